#pragma once

// Adam, early stopping, stratified folds and the cross-validation driver.

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "domaingcn/metrics.hpp"
#include "domaingcn/model.hpp"

namespace domaingcn {

struct TrainConfig {
  double lr = 1e-4;
  int max_epochs = 200;
  int patience = 5;
  int folds = 5;
  double train_frac = 0.8;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  // Folds trained concurrently; 0 picks min(folds, hardware threads).
  // Results do not depend on this value.
  int workers = 0;

  // train_frac must equal (folds - 1) / folds, since the training share of
  // a fold is fixed by the fold count.
  void Validate() const;
  std::map<std::string, std::string> ToKeyValues() const;
  bool Set(const std::string& key, const std::string& value);

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// SplitMix64 finalizer over a combination of the inputs.
std::uint64_t MixSeed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

struct AdamState {
  ModelParams m;
  ModelParams v;
  std::int64_t step = 0;

  static AdamState For(const ModelParams& params);
};

// Bias-corrected Adam. A non-finite gradient raises a training error naming
// the parameter; nothing is updated in that case.
void AdamStep(ModelParams& params, const ModelParams& grads, AdamState& state,
              const TrainConfig& config);

// Monitors validation loss; an epoch improves only with a strictly lower loss.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience);

  // Records the next epoch's loss and returns true if it is a new best.
  bool Update(double loss);
  bool should_stop() const { return epochs_ - best_epoch_ >= patience_; }
  int best_epoch() const { return best_epoch_; }  // 1-based; 0 before any update
  double best_loss() const { return best_loss_; }
  int epochs() const { return epochs_; }

 private:
  int patience_;
  int epochs_ = 0;
  int best_epoch_ = 0;
  double best_loss_ = 0.0;
};

struct FoldSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

// Each class is shuffled with `seed` and dealt round-robin across folds, the
// deal continuing from one class to the next so fold sizes also differ by at
// most one. Index lists are sorted ascending.
std::vector<FoldSplit> StratifiedKFold(std::span<const int> labels, int folds,
                                       std::uint64_t seed);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct FoldMetrics {
  int fold = 0;
  double auc = 0.0;
  double f1_macro = 0.0;
  double f1_binary = 0.0;
  double acc = 0.0;
  int best_epoch = 0;
  int epochs_run = 0;
  std::vector<EpochRecord> curve;
  friend bool operator==(const FoldMetrics&, const FoldMetrics&) = default;
};

struct FoldOutcome {
  ModelParams best_params;
  FoldMetrics metrics;
  std::vector<Prediction> val_predictions;  // best parameters, in val order
};

using EpochCallback = std::function<void(int fold, const EpochRecord&)>;

// Both splits must be nonempty. The parameters are initialised from
// MixSeed(hyper.seed, fold) and the per-epoch order from
// MixSeed(config.seed, fold, epoch).
FoldOutcome TrainOneFold(std::span<const PreparedGraph* const> train,
                         std::span<const PreparedGraph* const> val, const TrainConfig& config,
                         const HyperParams& hyper, int fold = 0,
                         const EpochCallback& on_epoch = {});

struct FoldReport {
  std::vector<FoldMetrics> folds;
  MeanSd auc, f1_macro, f1_binary, acc;

  void Aggregate();
  friend bool operator==(const FoldReport&, const FoldReport&) = default;
};

struct CvResult {
  FoldReport report;
  std::vector<FoldSplit> splits;
  std::vector<FoldOutcome> outcomes;
};

// Folds may run on worker threads. on_epoch is then called from those
// threads, one call at a time.
CvResult RunCrossValidation(std::span<const WsiGraph> graphs, const TrainConfig& config,
                            const HyperParams& hyper, const EpochCallback& on_epoch = {});

}  // namespace domaingcn
