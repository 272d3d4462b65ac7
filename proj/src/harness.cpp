#include "bingan/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bingan/image.hpp"
#include "bingan/objectives.hpp"

namespace fs = std::filesystem;

namespace bingan {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

ObjectiveKind parse_objective(const std::string& name) {
  if (name == "gan") return ObjectiveKind::kGan;
  if (name == "wgan") return ObjectiveKind::kWgan;
  if (name == "wgan-gp" || name == "wgan_gp" || name == "wgangp") return ObjectiveKind::kWganGp;
  throw IoError("config: unknown objective '" + name + "' (gan | wgan | wgan-gp)");
}

NeuronMode parse_neurons(const std::string& name) {
  if (name == "deterministic" || name == "dbn") return NeuronMode::kDeterministic;
  if (name == "stochastic" || name == "sbn") return NeuronMode::kStochastic;
  if (name == "real" || name == "real-valued" || name == "real_valued")
    return NeuronMode::kRealValued;
  throw IoError("config: unknown neuron mode '" + name + "' (deterministic | stochastic | real)");
}

Family parse_family(const std::string& name) {
  if (name == "mlp") return Family::kMlp;
  if (name == "cnn") return Family::kCnn;
  throw IoError("config: unknown family '" + name + "' (mlp | cnn)");
}

const char* optimizer_name(ObjectiveKind kind) {
  return kind == ObjectiveKind::kWgan ? "rmsprop" : "adam";
}

namespace {

bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw IoError("config: expected a boolean, got '" + v + "'");
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

void ExperimentConfig::apply(const std::string& key, const std::string& value) {
  if (key == "seed") seed = std::stoull(value);
  else if (key == "objective") objective = parse_objective(value);
  else if (key == "neurons") neurons = parse_neurons(value);
  else if (key == "family") family = parse_family(value);
  else if (key == "epochs") epochs = std::stoi(value);
  else if (key == "batch_size") batch_size = std::stoi(value);
  else if (key == "latent_dim") latent_dim = std::stoi(value);
  else if (key == "gp_lambda") gp_lambda = std::stod(value);
  else if (key == "n_critic") n_critic = std::stoi(value);
  else if (key == "clip") clip_bound = std::stod(value);
  else if (key == "anneal") anneal = parse_bool(value);
  else if (key == "data_dir") data_dir = value;
  else if (key == "out_dir") out_dir = value;
  else if (key == "max_images") max_images = std::stoi(value);
  else if (key == "max_gen_steps") max_gen_steps = std::stoll(value);
  else if (key == "artifact_every") artifact_every = std::stoi(value);
  else if (key == "sample_count") sample_count = std::stoi(value);
  else if (key == "bn_in_g") bn_in_g = parse_bool(value);
  else if (key == "bn_in_d") bn_in_d = parse_bool(value) ? 1 : 0;
  else if (key == "run_id") run_id = value;
  else throw IoError("config: unknown key '" + key + "'");
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open " + path);
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw IoError("config: line " + std::to_string(lineno) + " of " + path +
                    " is not 'key = value'");
    cfg.apply(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

ModelSpec ExperimentConfig::model_spec() const {
  ModelSpec s = ModelSpec::make(family, neurons, objective);
  s.bn_in_g = bn_in_g;
  s.bn_in_d = effective_bn_in_d();
  s.latent_dim = latent_dim;
  return s;
}

AdversarialObjective ExperimentConfig::adversarial() const {
  AdversarialObjective o = AdversarialObjective::make(objective);
  o.gp_lambda = gp_lambda;
  o.clip_bound = clip_bound;
  o.n_critic = effective_n_critic();
  return o;
}

int ExperimentConfig::effective_n_critic() const {
  if (n_critic > 0) return n_critic;
  return objective == ObjectiveKind::kGan ? 1 : 5;
}

bool ExperimentConfig::effective_bn_in_d() const {
  if (bn_in_d < 0) return default_bn_in_d(objective);
  return bn_in_d != 0;
}

std::string ExperimentConfig::resolve_run_id() const {
  if (!run_id.empty()) return run_id;
  std::string obj = objective_name(objective);
  obj.erase(std::remove(obj.begin(), obj.end(), '-'), obj.end());
  return std::string(family_name(family)) + "_" + neuron_mode_name(neurons) + "_" + obj;
}

std::string ExperimentConfig::resolve_data_file() const {
  std::string dir = data_dir;
  if (dir.empty())
    if (const char* env = std::getenv("BINGAN_DATA_DIR")) dir = env;
  if (dir.empty())
    throw IoError("no dataset configured: pass --data-dir (or set BINGAN_DATA_DIR)");
  if (fs::is_regular_file(dir)) return dir;
  for (const char* name : {"train-images-idx3-ubyte", "train-images-idx3-ubyte.gz"}) {
    fs::path candidate = fs::path(dir) / name;
    if (fs::is_regular_file(candidate)) return candidate.string();
  }
  throw IoError("no train-images-idx3-ubyte[.gz] under " + dir);
}

BinarizedDataset load_dataset(const ExperimentConfig& cfg) {
  BinarizedDataset data = binarize(parse_idx(cfg.resolve_data_file()));
  if (cfg.max_images > 0 && cfg.max_images < data.count) return subset(data, cfg.max_images);
  return data;
}

BinarizedDataset subset(const BinarizedDataset& data, int count) {
  BinarizedDataset out;
  out.count = count;
  out.images.assign(data.images.begin(), data.images.begin() + static_cast<std::size_t>(count) * 784);
  return out;
}

// ---------------------------------------------------------------------------
// Optimizer box
// ---------------------------------------------------------------------------

OptimizerBox::OptimizerBox(ObjectiveKind kind, std::vector<Tensor<float>> params) {
  if (kind == ObjectiveKind::kWgan)
    rms_ = std::make_unique<RmsPropOptimizer<float>>(std::move(params), 1e-4, 0.9, 1e-8);
  else
    adam_ = std::make_unique<AdamOptimizer<float>>(std::move(params), 1e-4, 0.5, 0.9, 1e-8);
}

void OptimizerBox::step() { adam_ ? adam_->step() : rms_->step(); }
void OptimizerBox::zero_grad() { adam_ ? adam_->zero_grad() : rms_->zero_grad(); }
std::int64_t OptimizerBox::step_count() const {
  return adam_ ? adam_->step_count() : rms_->step_count();
}

void OptimizerBox::collect_state(const std::string& prefix, const std::vector<std::string>& names,
                                 CheckpointData& out) const {
  out.scalars.emplace_back(prefix + ".t", static_cast<double>(step_count()));
  auto dump = [&](const char* tag, std::vector<std::vector<float>>& slots) {
    for (std::size_t i = 0; i < names.size(); ++i) {
      Shape shape{static_cast<int>(slots[i].size())};
      out.tensors.push_back(
          {prefix + "." + tag + "." + names[i], Tensor<float>::from(shape, slots[i])});
    }
  };
  if (adam_) {
    dump("m", adam_->first_moments());
    dump("v", adam_->second_moments());
  } else {
    dump("acc", rms_->accumulators());
  }
}

void OptimizerBox::restore_state(const std::string& prefix, const std::vector<std::string>& names,
                                 const CheckpointData& in) {
  auto t = static_cast<std::int64_t>(in.scalar_value(prefix + ".t"));
  auto fetch = [&](const char* tag) {
    std::vector<std::vector<float>> slots;
    for (const auto& name : names)
      slots.push_back(in.tensor_named(prefix + "." + tag + "." + name).vec());
    return slots;
  };
  if (adam_)
    adam_->restore(fetch("m"), fetch("v"), t);
  else
    rms_->restore(fetch("acc"), t);
}

// ---------------------------------------------------------------------------
// Trainer
// ---------------------------------------------------------------------------

namespace {

double mean_value(const Tensor<float>& t) {
  double acc = 0;
  for (std::int64_t i = 0; i < t.numel(); ++i) acc += t.at(i);
  return acc / static_cast<double>(t.numel());
}

Tensor<float> gan_generator_loss(const Tensor<float>& d_fake) {
  for (float v : d_fake.vec())
    if (!(v > 0.f && v < 1.f))
      fail_op("gan_losses", "discriminator output " + std::to_string(v) +
                                " outside (0,1); log domain needs a sigmoid head");
  return affine(mean_all(log_e(d_fake)), -1.0, 0.0);
}

Tensor<float> flatten_images(const Tensor<float>& images) {
  int n = images.dim(0);
  return Tensor<float>::from({n, static_cast<int>(images.numel() / n)}, images.vec());
}

std::vector<std::string> tensor_names(const std::vector<NamedTensor<float>>& named) {
  std::vector<std::string> out;
  out.reserve(named.size());
  for (const auto& nt : named) out.push_back(nt.name);
  return out;
}

}  // namespace

Trainer::Trainer(ExperimentConfig cfg, const BinarizedDataset& data)
    : cfg_(std::move(cfg)),
      spec_(cfg_.model_spec()),
      data_it_(data, cfg_.batch_size, cfg_.family == Family::kCnn,
               RngStream::derive(cfg_.seed, "shuffle")),
      g_(build_generator<float>(spec_, RngStream::derive(cfg_.seed, "init.g"))),
      d_(build_discriminator<float>(spec_, RngStream::derive(cfg_.seed, "init.d"))),
      opt_g_(cfg_.objective, g_.parameters()),
      opt_d_(cfg_.objective, d_.parameters()),
      z_(RngStream::derive(cfg_.seed, "z")),
      gp_eps_(RngStream::derive(cfg_.seed, "gp_eps")) {
  check_head_compatibility(d_.sigmoid_head(), cfg_.objective);
  if (auto* out = g_.binary_output())
    out->set_anneal_enabled(cfg_.anneal && spec_.neurons != NeuronMode::kRealValued);
}

Tensor<float> Trainer::latent(int n) { return sample_latent<float>(n, cfg_.latent_dim, z_); }

double Trainer::tau() const {
  return g_.binary_output() ? g_.binary_output()->tau() : 1.0;
}

int Trainer::cycles_per_epoch() const {
  return std::max(1, data_it_.batches_per_epoch() / cfg_.effective_n_critic());
}

void Trainer::check_loss(double value, const char* which) {
  if (std::isfinite(value)) return;
  // best-effort diagnostic dump before aborting
  std::string dump_path;
  try {
    fs::create_directories(cfg_.out_dir);
    dump_path = (fs::path(cfg_.out_dir) / (cfg_.resolve_run_id() + "_nan_dump.txt")).string();
    std::ofstream dump(dump_path);
    dump << "non-finite " << which << " at generator step " << gen_steps_ << ", critic step "
         << opt_d_.step_count() << "\n";
    dump << "tau " << tau() << "\n";
    std::size_t from = rows_.size() > 20 ? rows_.size() - 20 : 0;
    dump << "last loss rows (iter, d_loss, g_loss, w_est):\n";
    for (std::size_t i = from; i < rows_.size(); ++i)
      dump << rows_[i].iter << ' ' << rows_[i].d_loss << ' ' << rows_[i].g_loss << ' '
           << rows_[i].w_est << "\n";
  } catch (...) {
    dump_path = "(dump failed)";
  }
  throw TensorError(std::string("training aborted: non-finite ") + which +
                    " at generator step " + std::to_string(gen_steps_) + ", diagnostics in " +
                    dump_path);
}

double Trainer::critic_step() {
  Tensor<float> real = data_it_.next_batch();
  Tensor<float> fake;
  {
    NoGradGuard off;  // critic steps treat the generator as fixed
    fake = g_.forward(latent(cfg_.batch_size), Mode::kTrain);
  }
  Tensor<float> d_real = d_.forward(real, Mode::kTrain);
  Tensor<float> d_fake = d_.forward(fake, Mode::kTrain);

  LossPair<float> losses;
  switch (cfg_.objective) {
    case ObjectiveKind::kGan:
      losses = gan_losses(d_real, d_fake);
      last_w_ = std::numeric_limits<double>::quiet_NaN();
      break;
    case ObjectiveKind::kWgan:
      losses = wgan_losses(d_real, d_fake);
      last_w_ = mean_value(d_real) - mean_value(d_fake);
      break;
    case ObjectiveKind::kWganGp: {
      Tensor<float> x_hat = sample_interpolates(real, fake, gp_eps_);
      Tensor<float> penalty = gradient_penalty<float>(
          [this](const Tensor<float>& x) { return d_.forward(x, Mode::kTrain); }, x_hat,
          cfg_.gp_lambda);
      losses = wgan_gp_losses(d_real, d_fake, penalty);
      last_w_ = mean_value(d_real) - mean_value(d_fake);
      break;
    }
  }
  double value = losses.d_loss.item();
  check_loss(value, "critic loss");
  backward(losses.d_loss);
  opt_d_.step();
  opt_d_.zero_grad();
  if (cfg_.objective == ObjectiveKind::kWgan) {
    auto params = d_.parameters();
    clip_weights(params, cfg_.clip_bound);
  }
  last_d_loss_ = value;
  return value;
}

double Trainer::generator_step() {
  Tensor<float> fake = g_.forward(latent(cfg_.batch_size), Mode::kTrain);
  Tensor<float> d_fake = d_.forward(fake, Mode::kTrain);
  Tensor<float> g_loss = cfg_.objective == ObjectiveKind::kGan
                             ? gan_generator_loss(d_fake)
                             : affine(mean_all(d_fake), -1.0, 0.0);
  double value = g_loss.item();
  check_loss(value, "generator loss");
  backward(g_loss);
  opt_g_.step();
  opt_g_.zero_grad();
  auto d_params = d_.parameters();
  zero_grads(d_params);  // discard stray critic gradients from this pass
  ++gen_steps_;
  return value;
}

void Trainer::generator_cycle() {
  int n = cfg_.effective_n_critic();
  for (int i = 0; i < n; ++i) critic_step();
  double g = generator_step();
  rows_.push_back({gen_steps_, last_d_loss_, g, last_w_});
}

void Trainer::end_epoch() {
  if (auto* out = g_.binary_output()) out->anneal_slope();
  ++epochs_completed_;
}

Tensor<float> Trainer::sample_images(int count, const std::string& stream_name) {
  NoGradGuard off;
  RngStream stream = RngStream::derive(cfg_.seed, stream_name);
  Tensor<float> z = sample_latent<float>(count, cfg_.latent_dim, stream);
  return flatten_images(g_.forward(z, Mode::kEval));
}

Tensor<float> Trainer::last_preactivations() const {
  const auto* out = g_.binary_output();
  if (!out || !out->last_record().preact.defined())
    throw TensorError("no preactivation record available yet");
  return flatten_images(out->last_record().preact);
}

void Trainer::write_loss_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("loss table: cannot write " + path);
  bool wgan_kind = cfg_.objective != ObjectiveKind::kGan;
  out << (wgan_kind ? "iter,d_loss,g_loss,w_est\n" : "iter,d_loss,g_loss\n");
  char buf[128];
  for (const auto& r : rows_) {
    if (wgan_kind)
      std::snprintf(buf, sizeof(buf), "%lld,%.9g,%.9g,%.9g\n", static_cast<long long>(r.iter),
                    r.d_loss, r.g_loss, r.w_est);
    else
      std::snprintf(buf, sizeof(buf), "%lld,%.9g,%.9g\n", static_cast<long long>(r.iter), r.d_loss,
                    r.g_loss);
    out << buf;
  }
}

void Trainer::emit_artifacts(const std::string& run_dir, int epoch, RunArtifacts& arts) {
  std::string tag = cfg_.resolve_run_id() + "_epoch" + std::to_string(epoch);
  Tensor<float> samples = sample_images(cfg_.sample_count, "sample_epoch" + std::to_string(epoch));

  std::string grid = (fs::path(run_dir) / (tag + "_samples.png")).string();
  emit_sample_grid(samples, grid);
  arts.sample_grids.push_back(grid);

  Tensor<float> preacts = last_preactivations();
  std::string preact_grid = (fs::path(run_dir) / (tag + "_preact.png")).string();
  emit_sample_grid(preacts, preact_grid);
  arts.preact_grids.push_back(preact_grid);

  Histogram hist = compute_preactivation_histogram(preacts);
  std::string hist_csv = (fs::path(run_dir) / (tag + "_histogram.csv")).string();
  write_histogram_csv(hist, hist_csv);
  arts.histograms.push_back(hist_csv);

  std::string stem = (fs::path(run_dir) / (tag + "_checkpoint")).string();
  save_state(stem);
  arts.checkpoints.push_back(stem);

  arts.loss_csv = (fs::path(run_dir) / (cfg_.resolve_run_id() + "_loss.csv")).string();
  write_loss_csv(arts.loss_csv);
}

RunArtifacts Trainer::run() {
  RunArtifacts arts;
  arts.run_id = cfg_.resolve_run_id();
  arts.run_dir = (fs::path(cfg_.out_dir) / arts.run_id).string();
  fs::create_directories(arts.run_dir);

  bool stopped = false;
  for (int epoch = epochs_completed_ + 1; epoch <= cfg_.epochs && !stopped; ++epoch) {
    int cycles = cycles_per_epoch();
    for (int c = 0; c < cycles; ++c) {
      generator_cycle();
      if (cfg_.max_gen_steps > 0 && gen_steps_ >= cfg_.max_gen_steps) {
        stopped = true;
        break;
      }
    }
    if (!stopped) end_epoch();
    int done = stopped ? epoch : epochs_completed_;
    if (stopped || epoch == cfg_.epochs || (cfg_.artifact_every > 0 && epoch % cfg_.artifact_every == 0))
      emit_artifacts(arts.run_dir, done, arts);
  }
  arts.gen_steps = gen_steps_;
  arts.epochs_completed = epochs_completed_;
  return arts;
}

void Trainer::save_state(const std::string& stem) const {
  CheckpointData data;
  data.meta.emplace_back("family", family_name(spec_.family));
  data.meta.emplace_back("neurons", neuron_mode_name(spec_.neurons));
  data.meta.emplace_back("objective", objective_name(spec_.objective));
  data.meta.emplace_back("bn_in_g", spec_.bn_in_g ? "1" : "0");
  data.meta.emplace_back("bn_in_d", spec_.bn_in_d ? "1" : "0");
  data.meta.emplace_back("latent_dim", std::to_string(spec_.latent_dim));
  data.meta.emplace_back("anneal", cfg_.anneal ? "1" : "0");

  data.scalars.emplace_back("tau", tau());
  data.scalars.emplace_back("epochs_completed", static_cast<double>(epochs_completed_));
  data.scalars.emplace_back("gen_steps", static_cast<double>(gen_steps_));

  data.rng_states.emplace_back("z", z_.state());
  data.rng_states.emplace_back("gp_eps", gp_eps_.state());
  data.rng_states.emplace_back("shuffle_pre", data_it_.state_before_shuffle());
  data.scalars.emplace_back("data_cursor", static_cast<double>(data_it_.cursor()));
  if (const auto* out = g_.binary_output())
    data.rng_states.emplace_back("bernoulli", const_cast<BinaryOutputLayer<float>*>(out)->rng().state());

  auto g_params = g_.trainable("g");
  auto d_params = d_.trainable("d");
  for (const auto& nt : g_params) data.tensors.push_back(nt);
  for (const auto& nt : g_.state("g.state")) data.tensors.push_back(nt);
  for (const auto& nt : d_params) data.tensors.push_back(nt);
  for (const auto& nt : d_.state("d.state")) data.tensors.push_back(nt);
  opt_g_.collect_state("opt.g", tensor_names(g_params), data);
  opt_d_.collect_state("opt.d", tensor_names(d_params), data);

  save_checkpoint(stem, data);
}

void Trainer::load_state(const std::string& stem) {
  CheckpointData data = load_checkpoint(stem);
  if (data.meta_value("family") != family_name(spec_.family) ||
      data.meta_value("neurons") != neuron_mode_name(spec_.neurons) ||
      data.meta_value("objective") != objective_name(spec_.objective) ||
      data.meta_value("latent_dim") != std::to_string(spec_.latent_dim) ||
      data.meta_value("bn_in_g") != (spec_.bn_in_g ? "1" : "0") ||
      data.meta_value("bn_in_d") != (spec_.bn_in_d ? "1" : "0"))
    throw IoError("checkpoint does not match the configured model spec");

  auto restore_tensors = [&](std::vector<NamedTensor<float>> targets) {
    for (auto& nt : targets) {
      const Tensor<float>& src = data.tensor_named(nt.name);
      if (!same_shape(src.shape(), nt.tensor.shape()))
        throw IoError("checkpoint tensor '" + nt.name + "' has shape mismatch");
      std::copy(src.vec().begin(), src.vec().end(), nt.tensor.mutable_data());
    }
  };
  auto g_params = g_.trainable("g");
  auto d_params = d_.trainable("d");
  restore_tensors(g_params);
  restore_tensors(g_.state("g.state"));
  restore_tensors(d_params);
  restore_tensors(d_.state("d.state"));
  opt_g_.restore_state("opt.g", tensor_names(g_params), data);
  opt_d_.restore_state("opt.d", tensor_names(d_params), data);

  if (auto* out = g_.binary_output()) {
    out->set_tau(data.scalar_value("tau"));
    out->rng().set_state(data.rng_state("bernoulli"));
  }
  epochs_completed_ = static_cast<int>(data.scalar_value("epochs_completed"));
  gen_steps_ = static_cast<std::int64_t>(data.scalar_value("gen_steps"));
  z_.set_state(data.rng_state("z"));
  gp_eps_.set_state(data.rng_state("gp_eps"));
  data_it_.restore_position(data.rng_state("shuffle_pre"),
                            static_cast<int>(data.scalar_value("data_cursor")));
}

// ---------------------------------------------------------------------------
// Sampling and post-processing
// ---------------------------------------------------------------------------

SampleBatch generate_samples(const std::string& checkpoint_stem, int count, std::uint64_t seed) {
  CheckpointData data = load_checkpoint(checkpoint_stem);
  ModelSpec spec;
  spec.family = parse_family(data.meta_value("family"));
  spec.neurons = parse_neurons(data.meta_value("neurons"));
  spec.objective = parse_objective(data.meta_value("objective"));
  spec.bn_in_g = data.meta_value("bn_in_g") == "1";
  spec.bn_in_d = data.meta_value("bn_in_d") == "1";
  spec.latent_dim = std::stoi(data.meta_value("latent_dim"));

  Network<float> g = build_generator<float>(spec, RngStream::derive(seed, "init.g"));
  for (auto& nt : g.trainable("g")) {
    const Tensor<float>& src = data.tensor_named(nt.name);
    if (!same_shape(src.shape(), nt.tensor.shape()))
      throw IoError("checkpoint tensor '" + nt.name + "' has shape mismatch");
    std::copy(src.vec().begin(), src.vec().end(), nt.tensor.mutable_data());
  }
  for (auto& nt : g.state("g.state")) {
    const Tensor<float>& src = data.tensor_named(nt.name);
    std::copy(src.vec().begin(), src.vec().end(), nt.tensor.mutable_data());
  }
  if (auto* out = g.binary_output()) {
    out->set_tau(data.scalar_value("tau"));
    out->rng() = RngStream::derive(seed, "sample.bernoulli");
  }

  NoGradGuard off;
  RngStream zs = RngStream::derive(seed, "sample");
  Tensor<float> z = sample_latent<float>(count, spec.latent_dim, zs);
  Tensor<float> images = g.forward(z, Mode::kEval);
  Tensor<float> flat = Tensor<float>::from({count, static_cast<int>(images.numel() / count)},
                                           images.vec());
  Tensor<float> pre = g.binary_output()->last_record().preact;
  Tensor<float> pre_flat =
      Tensor<float>::from({count, static_cast<int>(pre.numel() / count)}, pre.vec());
  return {flat, pre_flat, spec};
}

PostprocessStrategy parse_strategy(const std::string& name) {
  if (name == "threshold" || name == "round") return PostprocessStrategy::kThreshold;
  if (name == "bernoulli") return PostprocessStrategy::kBernoulli;
  throw IoError("unknown post-processing strategy '" + name + "' (threshold | bernoulli)");
}

Tensor<float> postprocess_real(const Tensor<float>& probs, PostprocessStrategy strategy,
                               RngStream& rng) {
  std::vector<float> out(probs.vec());
  if (strategy == PostprocessStrategy::kThreshold) {
    for (auto& v : out) v = v >= 0.5f ? 1.0f : 0.0f;  // ties fire, same as the DBN
  } else {
    for (auto& v : out) v = rng.uniform() < static_cast<double>(v) ? 1.0f : 0.0f;
  }
  return Tensor<float>::from(probs.shape(), std::move(out));
}

// ---------------------------------------------------------------------------
// Appendix matrix
// ---------------------------------------------------------------------------

std::vector<MatrixRun> run_matrix(const ExperimentConfig& base, bool dry_run) {
  std::vector<MatrixRun> runs;
  const ObjectiveKind objectives[3] = {ObjectiveKind::kGan, ObjectiveKind::kWgan,
                                       ObjectiveKind::kWganGp};
  const NeuronMode modes[2] = {NeuronMode::kDeterministic, NeuronMode::kStochastic};
  std::optional<BinarizedDataset> data;
  for (ObjectiveKind objective : objectives)
    for (int bn_d : {1, 0})
      for (NeuronMode neurons : modes) {
        MatrixRun run;
        run.objective = objective;
        run.neurons = neurons;
        run.bn_in_d = bn_d != 0;
        run.optimizer = optimizer_name(objective);
        std::string obj = objective_name(objective);
        obj.erase(std::remove(obj.begin(), obj.end(), '-'), obj.end());
        run.run_id = obj + (neurons == NeuronMode::kDeterministic ? "_dbn" : "_sbn") +
                     (bn_d ? "_bnd" : "_nobnd");
        if (dry_run) {
          run.status = "dry";
          runs.push_back(run);
          continue;
        }
        try {
          ExperimentConfig cfg = base;
          cfg.objective = objective;
          cfg.neurons = neurons;
          cfg.bn_in_d = bn_d;
          cfg.run_id = run.run_id;
          if (!data) data = load_dataset(cfg);
          Trainer trainer(cfg, *data);
          trainer.run();
          run.status = "ok";
        } catch (const std::exception& e) {
          run.status = "failed";
          run.message = e.what();
        }
        runs.push_back(run);
      }
  return runs;
}

void write_matrix_manifest(const std::vector<MatrixRun>& runs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("matrix: cannot write " + path);
  out << "run_id,objective,neurons,bn_in_d,optimizer,status,message\n";
  for (const auto& r : runs)
    out << r.run_id << ',' << objective_name(r.objective) << ',' << neuron_mode_name(r.neurons)
        << ',' << (r.bn_in_d ? 1 : 0) << ',' << r.optimizer << ',' << r.status << ",\""
        << r.message << "\"\n";
}

}  // namespace bingan
