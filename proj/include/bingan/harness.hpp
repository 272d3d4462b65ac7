#ifndef BINGAN_HARNESS_HPP_
#define BINGAN_HARNESS_HPP_

// CLI-driven training loop, experiment matrix, checkpointing and artifact
// emission (sample grids, preactivation histograms, loss curves).

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bingan/checkpoint.hpp"
#include "bingan/histogram.hpp"
#include "bingan/mnist.hpp"
#include "bingan/model_zoo.hpp"
#include "bingan/optimizers.hpp"

namespace bingan {

struct ExperimentConfig {
  std::uint64_t seed = 42;
  ObjectiveKind objective = ObjectiveKind::kWganGp;
  double gp_lambda = 10.0;
  double clip_bound = 0.01;
  int n_critic = 0;  // 0 = objective default (1 for GAN, 5 for the WGAN kinds)
  NeuronMode neurons = NeuronMode::kDeterministic;
  Family family = Family::kMlp;
  bool bn_in_g = true;
  int bn_in_d = -1;  // -1 = objective default, else 0/1
  int epochs = 20;
  int batch_size = 64;
  int latent_dim = 128;
  bool anneal = true;
  std::string data_dir;  // directory holding train-images-idx3-ubyte[.gz], or a direct file path
  std::string out_dir = "runs";
  int max_images = 0;            // 0 = whole dataset
  std::int64_t max_gen_steps = 0;  // 0 = run all epochs
  int artifact_every = 1;        // epochs between artifact emissions
  int sample_count = 64;
  std::string run_id;  // defaults to family_neurons_objective

  void apply(const std::string& key, const std::string& value);
  static ExperimentConfig from_file(const std::string& path);

  ModelSpec model_spec() const;
  AdversarialObjective adversarial() const;
  int effective_n_critic() const;
  bool effective_bn_in_d() const;
  std::string resolve_run_id() const;
  // Applies the BINGAN_DATA_DIR environment fallback and the standard
  // train-images file names; errors when nothing resolves.
  std::string resolve_data_file() const;
};

ObjectiveKind parse_objective(const std::string& name);
NeuronMode parse_neurons(const std::string& name);
Family parse_family(const std::string& name);
const char* optimizer_name(ObjectiveKind kind);

BinarizedDataset load_dataset(const ExperimentConfig& cfg);
BinarizedDataset subset(const BinarizedDataset& data, int count);

struct LossRow {
  std::int64_t iter = 0;  // generator step, 1-based
  double d_loss = 0.0;
  double g_loss = 0.0;
  double w_est = 0.0;  // Wasserstein estimate, NaN under the GAN objective
};

struct RunArtifacts {
  std::string run_id;
  std::string run_dir;
  std::string loss_csv;
  std::vector<std::string> checkpoints;  // stems
  std::vector<std::string> sample_grids;
  std::vector<std::string> preact_grids;
  std::vector<std::string> histograms;
  std::int64_t gen_steps = 0;
  int epochs_completed = 0;
};

// Wraps the per-objective optimizer choice: Adam for GAN and WGAN-GP,
// RMSProp for WGAN.
class OptimizerBox {
 public:
  OptimizerBox(ObjectiveKind kind, std::vector<Tensor<float>> params);
  void step();
  void zero_grad();
  std::int64_t step_count() const;
  void collect_state(const std::string& prefix, const std::vector<std::string>& names,
                     CheckpointData& out) const;
  void restore_state(const std::string& prefix, const std::vector<std::string>& names,
                     const CheckpointData& in);

 private:
  std::unique_ptr<AdamOptimizer<float>> adam_;
  std::unique_ptr<RmsPropOptimizer<float>> rms_;
};

class Trainer {
 public:
  Trainer(ExperimentConfig cfg, const BinarizedDataset& data);

  // Runs the configured number of epochs (or max_gen_steps), emitting
  // checkpoints, sample grids, preactivation histograms and the loss table.
  RunArtifacts run();

  double critic_step();
  double generator_step();
  void generator_cycle();  // n_critic critic steps, one generator step, one loss row
  void end_epoch();        // slope annealing hook

  void save_state(const std::string& stem) const;
  void load_state(const std::string& stem);

  Network<float>& generator() { return g_; }
  Network<float>& critic() { return d_; }
  std::vector<Tensor<float>> critic_params() { return d_.parameters(); }
  double tau() const;
  const std::vector<LossRow>& loss_rows() const { return rows_; }
  double last_w_estimate() const { return last_w_; }
  std::int64_t gen_steps() const { return gen_steps_; }
  int epochs_completed() const { return epochs_completed_; }
  int cycles_per_epoch() const;
  const ExperimentConfig& config() const { return cfg_; }

  // Eval-mode sample batch from a named stream; used for artifact emission.
  Tensor<float> sample_images(int count, const std::string& stream_name);
  Tensor<float> last_preactivations() const;

 private:
  Tensor<float> latent(int n);
  void check_loss(double value, const char* which);
  void write_loss_csv(const std::string& path) const;
  void emit_artifacts(const std::string& run_dir, int epoch, RunArtifacts& arts);

  ExperimentConfig cfg_;
  ModelSpec spec_;
  BatchIterator data_it_;
  Network<float> g_, d_;
  OptimizerBox opt_g_, opt_d_;
  RngStream z_, gp_eps_;
  std::vector<LossRow> rows_;
  double last_d_loss_ = 0.0;
  double last_w_ = std::numeric_limits<double>::quiet_NaN();
  std::int64_t gen_steps_ = 0;
  int epochs_completed_ = 0;
};

struct SampleBatch {
  Tensor<float> images;   // [count, 784]
  Tensor<float> preacts;  // [count, 784]
  ModelSpec spec;
};

// Loads a checkpointed generator (eval mode, running batch-norm stats) and
// draws `count` samples with a stream derived from `seed`.
SampleBatch generate_samples(const std::string& checkpoint_stem, int count, std::uint64_t seed);

enum class PostprocessStrategy { kThreshold, kBernoulli };
PostprocessStrategy parse_strategy(const std::string& name);

// Binarizes the real-valued model's probabilistic outputs, either by the
// shared >= 0.5 threshold or by independent Bernoulli draws.
Tensor<float> postprocess_real(const Tensor<float>& probs, PostprocessStrategy strategy,
                               RngStream& rng);

struct MatrixRun {
  std::string run_id;
  ObjectiveKind objective = ObjectiveKind::kGan;
  NeuronMode neurons = NeuronMode::kDeterministic;
  bool bn_in_d = false;
  std::string optimizer;
  std::string status;  // ok | failed | dry
  std::string message;
};

// {GAN, WGAN, WGAN-GP} x {BN in D on/off} x {DBN, SBN}, twelve runs with the
// per-objective optimizer defaults. Individual failures are recorded and the
// matrix continues.
std::vector<MatrixRun> run_matrix(const ExperimentConfig& base, bool dry_run);
void write_matrix_manifest(const std::vector<MatrixRun>& runs, const std::string& path);

}  // namespace bingan

#endif  // BINGAN_HARNESS_HPP_
