// bingan command line: train runs one experiment, sample/histogram/postprocess
// work off checkpoints, matrix sweeps the objective x batch-norm x neuron grid.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "bingan/harness.hpp"
#include "bingan/image.hpp"

namespace fs = std::filesystem;
using bingan::ExperimentConfig;

namespace {

struct TrainFlags {
  std::string config, data_dir, out_dir, objective, neurons, family, run_id, resume;
  std::uint64_t seed = 0;
  int epochs = 0, batch_size = 0, latent_dim = 0, n_critic = 0, max_images = 0;
  int artifact_every = 0, sample_count = 0, bn_in_d = -1;
  long long max_gen_steps = 0;
  double gp_lambda = -1.0, clip = -1.0;
  bool no_anneal = false;
};

void add_train_options(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--config", f.config, "structured key=value config file");
  cmd->add_option("--seed", f.seed, "master seed, split into named streams");
  cmd->add_option("--data-dir", f.data_dir, "directory with train-images-idx3-ubyte[.gz]");
  cmd->add_option("--out-dir", f.out_dir, "artifact output directory");
  cmd->add_option("--objective", f.objective, "gan | wgan | wgan-gp");
  cmd->add_option("--neurons", f.neurons, "deterministic | stochastic | real");
  cmd->add_option("--family", f.family, "mlp | cnn");
  cmd->add_option("--epochs", f.epochs, "training epochs");
  cmd->add_option("--batch-size", f.batch_size, "mini-batch size");
  cmd->add_option("--latent-dim", f.latent_dim, "latent vector width");
  cmd->add_option("--gp-lambda", f.gp_lambda, "gradient penalty coefficient");
  cmd->add_option("--n-critic", f.n_critic, "critic updates per generator update");
  cmd->add_option("--clip", f.clip, "WGAN weight-clip bound");
  cmd->add_flag("--no-anneal", f.no_anneal, "disable slope annealing");
  cmd->add_option("--bn-in-d", f.bn_in_d, "force batch norm in the discriminator (0/1)");
  cmd->add_option("--max-images", f.max_images, "train on the first N images only");
  cmd->add_option("--max-gen-steps", f.max_gen_steps, "stop after N generator steps");
  cmd->add_option("--artifact-every", f.artifact_every, "epochs between artifact emissions");
  cmd->add_option("--sample-count", f.sample_count, "images per sample grid (perfect square)");
  cmd->add_option("--run-id", f.run_id, "artifact name prefix");
}

ExperimentConfig assemble_config(const CLI::App* cmd, const TrainFlags& f) {
  ExperimentConfig cfg;
  if (cmd->count("--config")) cfg = ExperimentConfig::from_file(f.config);
  if (cmd->count("--seed")) cfg.seed = f.seed;
  if (cmd->count("--data-dir")) cfg.data_dir = f.data_dir;
  if (cmd->count("--out-dir")) cfg.out_dir = f.out_dir;
  if (cmd->count("--objective")) cfg.objective = bingan::parse_objective(f.objective);
  if (cmd->count("--neurons")) cfg.neurons = bingan::parse_neurons(f.neurons);
  if (cmd->count("--family")) cfg.family = bingan::parse_family(f.family);
  if (cmd->count("--epochs")) cfg.epochs = f.epochs;
  if (cmd->count("--batch-size")) cfg.batch_size = f.batch_size;
  if (cmd->count("--latent-dim")) cfg.latent_dim = f.latent_dim;
  if (cmd->count("--gp-lambda")) cfg.gp_lambda = f.gp_lambda;
  if (cmd->count("--n-critic")) cfg.n_critic = f.n_critic;
  if (cmd->count("--clip")) cfg.clip_bound = f.clip;
  if (f.no_anneal) cfg.anneal = false;
  if (cmd->count("--bn-in-d")) cfg.bn_in_d = f.bn_in_d;
  if (cmd->count("--max-images")) cfg.max_images = f.max_images;
  if (cmd->count("--max-gen-steps")) cfg.max_gen_steps = f.max_gen_steps;
  if (cmd->count("--artifact-every")) cfg.artifact_every = f.artifact_every;
  if (cmd->count("--sample-count")) cfg.sample_count = f.sample_count;
  if (cmd->count("--run-id")) cfg.run_id = f.run_id;
  return cfg;
}

int run_train(const CLI::App* cmd, const TrainFlags& f) {
  ExperimentConfig cfg = assemble_config(cmd, f);
  bingan::BinarizedDataset data = bingan::load_dataset(cfg);
  std::printf("dataset: %d binarized images, run id %s\n", data.count,
              cfg.resolve_run_id().c_str());
  bingan::Trainer trainer(cfg, data);
  if (!f.resume.empty()) {
    trainer.load_state(f.resume);
    std::printf("resumed from %s at epoch %d\n", f.resume.c_str(), trainer.epochs_completed());
  }
  bingan::RunArtifacts arts = trainer.run();
  std::printf("done: %lld generator steps, %d epochs, artifacts in %s\n",
              static_cast<long long>(arts.gen_steps), arts.epochs_completed,
              arts.run_dir.c_str());
  std::printf("loss table: %s\n", arts.loss_csv.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adversarial training with binary output neurons"};
  app.require_subcommand(1);

  TrainFlags train_flags;
  CLI::App* train_cmd = app.add_subcommand("train", "train one experiment");
  add_train_options(train_cmd, train_flags);
  train_cmd->add_option("--resume", train_flags.resume, "checkpoint stem to resume from");

  struct {
    std::string checkpoint, out, preact_out;
    int count = 64;
    std::uint64_t seed = 7;
  } sample_flags;
  CLI::App* sample_cmd = app.add_subcommand("sample", "draw a sample grid from a checkpoint");
  sample_cmd->add_option("--checkpoint", sample_flags.checkpoint, "checkpoint stem")->required();
  sample_cmd->add_option("--count", sample_flags.count, "samples (perfect square)");
  sample_cmd->add_option("--seed", sample_flags.seed, "sampling seed");
  sample_cmd->add_option("--out", sample_flags.out, "output PNG")->required();
  sample_cmd->add_option("--preact-out", sample_flags.preact_out, "preactivation grid PNG");

  struct {
    std::string checkpoint, out;
    int count = 64;
    std::uint64_t seed = 7;
  } hist_flags;
  CLI::App* hist_cmd = app.add_subcommand("histogram", "preactivation histogram of fresh samples");
  hist_cmd->add_option("--checkpoint", hist_flags.checkpoint, "checkpoint stem")->required();
  hist_cmd->add_option("--count", hist_flags.count, "samples to draw");
  hist_cmd->add_option("--seed", hist_flags.seed, "sampling seed");
  hist_cmd->add_option("--out", hist_flags.out, "output CSV")->required();

  struct {
    std::string checkpoint, strategy = "threshold", out, raw_out;
    int count = 64;
    std::uint64_t seed = 7;
  } post_flags;
  CLI::App* post_cmd = app.add_subcommand("postprocess", "binarize a real-valued model's output");
  post_cmd->add_option("--checkpoint", post_flags.checkpoint, "real-valued checkpoint stem")
      ->required();
  post_cmd->add_option("--strategy", post_flags.strategy, "threshold | bernoulli");
  post_cmd->add_option("--count", post_flags.count, "samples (perfect square)");
  post_cmd->add_option("--seed", post_flags.seed, "sampling seed");
  post_cmd->add_option("--out", post_flags.out, "binarized grid PNG")->required();
  post_cmd->add_option("--raw-out", post_flags.raw_out, "raw probabilistic grid PNG");

  TrainFlags matrix_flags;
  bool dry_run = false;
  std::string manifest_path;
  CLI::App* matrix_cmd =
      app.add_subcommand("matrix", "objective x bn-in-D x neuron-type sweep (12 runs)");
  add_train_options(matrix_cmd, matrix_flags);
  matrix_cmd->add_flag("--dry-run", dry_run, "write the manifest without training");
  matrix_cmd->add_option("--manifest", manifest_path, "manifest CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) return run_train(train_cmd, train_flags);

    if (*sample_cmd) {
      bingan::SampleBatch batch =
          bingan::generate_samples(sample_flags.checkpoint, sample_flags.count, sample_flags.seed);
      bingan::emit_sample_grid(batch.images, sample_flags.out);
      std::printf("wrote %s\n", sample_flags.out.c_str());
      if (!sample_flags.preact_out.empty()) {
        bingan::emit_sample_grid(batch.preacts, sample_flags.preact_out);
        std::printf("wrote %s\n", sample_flags.preact_out.c_str());
      }
      return 0;
    }

    if (*hist_cmd) {
      bingan::SampleBatch batch =
          bingan::generate_samples(hist_flags.checkpoint, hist_flags.count, hist_flags.seed);
      bingan::Histogram h = bingan::compute_preactivation_histogram(batch.preacts);
      bingan::write_histogram_csv(h, hist_flags.out);
      std::printf("wrote %s (%llu values)\n", hist_flags.out.c_str(),
                  static_cast<unsigned long long>(h.total));
      return 0;
    }

    if (*post_cmd) {
      bingan::SampleBatch batch =
          bingan::generate_samples(post_flags.checkpoint, post_flags.count, post_flags.seed);
      if (batch.spec.neurons != bingan::NeuronMode::kRealValued)
        throw bingan::IoError("postprocess expects a real-valued checkpoint");
      bingan::RngStream rng = bingan::RngStream::derive(post_flags.seed, "postprocess");
      bingan::Tensor<float> binary =
          bingan::postprocess_real(batch.images, bingan::parse_strategy(post_flags.strategy), rng);
      bingan::emit_sample_grid(binary, post_flags.out);
      std::printf("wrote %s\n", post_flags.out.c_str());
      if (!post_flags.raw_out.empty()) {
        bingan::emit_sample_grid(batch.images, post_flags.raw_out);
        std::printf("wrote %s\n", post_flags.raw_out.c_str());
      }
      return 0;
    }

    if (*matrix_cmd) {
      ExperimentConfig base = assemble_config(matrix_cmd, matrix_flags);
      auto runs = bingan::run_matrix(base, dry_run);
      std::string path = manifest_path.empty()
                             ? (fs::path(base.out_dir) / "matrix_manifest.csv").string()
                             : manifest_path;
      fs::create_directories(fs::path(path).parent_path().empty() ? "." : fs::path(path).parent_path().string());
      bingan::write_matrix_manifest(runs, path);
      for (const auto& r : runs)
        std::printf("%-18s %-8s %-13s bn_d=%d %-8s %s\n", r.run_id.c_str(),
                    objective_name(r.objective), neuron_mode_name(r.neurons), r.bn_in_d ? 1 : 0,
                    r.optimizer.c_str(), r.status.c_str());
      std::printf("manifest: %s\n", path.c_str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
