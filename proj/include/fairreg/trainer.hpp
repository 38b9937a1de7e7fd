#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fairreg/dataset.hpp"
#include "fairreg/metrics.hpp"
#include "fairreg/model.hpp"
#include "fairreg/regularization.hpp"
#include "fairreg/rng.hpp"

namespace fairreg {

/// One correlation-penalty term: lambda * |corr| between predictions and the
/// group's membership flag, computed on batches of negatives drawn from the
/// examples whose flag for this group is known.
struct PenaltySpec {
  std::string group;
  double lambda = 0.0;
  std::size_t batch_size = 128;  // penalty batch size
};

/// Adversarial-debiasing baseline: a sigmoid head on the hidden layer tries
/// to recover the group flag from negatives while the encoder receives the
/// reversed gradient scaled by alpha.
struct AdversarySpec {
  std::string group;
  double alpha = 1.0;
  double head_lr = 0.05;
  std::size_t batch_size = 128;
};

/// Everything one training run needs. Evaluation settings live here too so a
/// multi-config comparison can insist they are shared.
struct TrainConfig {
  Architecture arch;
  double tau = 0.5;
  int epochs = 30;
  double learning_rate = 0.05;
  std::size_t batch_size = 128;  // main squared-error batch
  std::vector<PenaltySpec> penalties;
  std::optional<AdversarySpec> adversary;
  std::uint64_t seed = 1;
  int runs = 10;

  int eval_bins = 4;         // rating bins over [0, tau)
  int calibration_bins = 4;  // prediction bins over [0, 1]
  int min_cell = 20;
  std::vector<std::string> priors{"uniform", "background", "subgroup"};

  BinSpec rating_bin_spec() const { return BinSpec{eval_bins, 0.0, tau}; }
  BinSpec calibration_bin_spec() const { return BinSpec{calibration_bins, 0.0, 1.0}; }

  /// Throws ConfigError on any out-of-range field.
  void validate() const;
};

/// Output of one training run.
struct RunResult {
  ModelParams params;
  AdversaryHead head;                               // zeros when no adversary
  std::vector<double> mse_history;                  // per epoch
  std::vector<std::vector<double>> penalty_history; // per epoch, one value per PenaltySpec
  std::vector<double> adversary_loss_history;       // per epoch; empty without adversary
  MetricsReport report;
};

/// Batches drawn for one SGD step, kept so the step can be recomputed
/// against frozen batches (finite-difference checks do exactly that).
struct StepPlan {
  std::vector<std::size_t> main;                    // epoch-shuffle chunk
  std::vector<std::vector<std::size_t>> penalty;    // per PenaltySpec; empty when lambda = 0
  std::vector<std::size_t> adversary;               // empty without adversary
};

/// Losses and gradients of one step over fixed batches.
struct StepOutcome {
  double mse = 0.0;
  std::vector<double> penalties;  // one per PenaltySpec
  double adversary_loss = 0.0;
  Gradients grads;                // encoder gradient of the step objective
  AdversaryStep adv;              // head gradient for the joint head update
};

/// XOR-folded into the seed for the sampling stream so that batch sampling
/// and parameter initialization never share a generator state.
inline constexpr std::uint64_t kSampleSeedSalt = 0x9E3779B97F4A7C15ULL;

/// Draws the penalty and adversary batches for one step (uniform, with
/// replacement, in config order). Zero-lambda penalties draw nothing at all,
/// which keeps the random stream of a lambda=0 config identical to one with
/// the penalty absent.
StepPlan sample_step(const TrainConfig& cfg, std::vector<std::size_t> main_chunk,
                     const std::vector<std::vector<std::size_t>>& penalty_pools,
                     const std::vector<std::size_t>& adversary_pool, RandomEngine& rng);

/// Pure step evaluation: mean squared error over the main batch (upstream
/// 2(yhat-y)/|B|), each correlation penalty on its own batch, and the
/// adversary's reversed contribution. `head` may be null iff the config has
/// no adversary.
StepOutcome step_gradients(const TrainConfig& cfg, const Dataset& train_set,
                           const ModelParams& params, const AdversaryHead* head,
                           const StepPlan& plan);

/// The encoder's scalar objective over the same fixed batches:
///   mean main MSE + sum lambda|corr| - alpha * adversary loss.
/// step_gradients().grads is its exact gradient (head parameters fixed).
double step_objective(const TrainConfig& cfg, const Dataset& train_set,
                      const ModelParams& params, const AdversaryHead* head,
                      const StepPlan& plan);

/// Minibatch SGD over the combined objective. Deterministic given cfg.seed;
/// throws ConfigError before touching any state when a precondition fails
/// and NumericError (naming the step) if training produces a non-finite
/// value.
RunResult train(const TrainConfig& cfg, const Dataset& train_set, const Dataset& eval_set);

/// Full metrics over every group of the eval set.
MetricsReport evaluate(const ModelParams& params, const Dataset& eval_set, double tau,
                       const BinSpec& rating_bins, const BinSpec& calibration_bins,
                       const std::vector<std::string>& priors, int min_cell_count);

/// Per-seed runs plus their cell-wise aggregate.
struct ExperimentResult {
  MetricsReport aggregate;
  std::vector<RunResult> runs;
};

/// Trains cfg.runs times with seeds seed..seed+runs-1 (in parallel), merges
/// reports by seed order. A failing run aborts the experiment with its seed
/// named.
ExperimentResult run_experiment(const TrainConfig& cfg, const Dataset& train_set,
                                const Dataset& eval_set);

/// One named configuration of a comparison protocol.
struct StudyEntry {
  std::string name;
  TrainConfig config;
};

struct StudyRow {
  std::string name;
  ExperimentResult result;
};

struct StudyResult {
  std::vector<StudyRow> rows;
};

/// Runs each configuration in protocol order. All entries must share tau and
/// the evaluation settings, so their rows are comparable.
StudyResult study(const std::vector<StudyEntry>& protocol, const Dataset& train_set,
                  const Dataset& eval_set);

}  // namespace fairreg
