#include "domaingcn/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <thread>

#include "domaingcn/error.hpp"
#include "domaingcn/text_format.hpp"

namespace domaingcn {

namespace {

double RequireDouble(const std::string& key, const std::string& value) {
  const auto v = ParseDouble(value);
  if (!v) Fail(ErrorKind::kConfig, "invalid value '" + value + "' for " + key);
  return *v;
}

int RequireInt(const std::string& key, const std::string& value) {
  const auto v = ParseInt(value);
  if (!v || *v < INT32_MIN || *v > INT32_MAX) {
    Fail(ErrorKind::kConfig, "invalid value '" + value + "' for " + key);
  }
  return static_cast<int>(*v);
}

}  // namespace

void TrainConfig::Validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) Fail(ErrorKind::kConfig, "lr must be positive");
  if (max_epochs < 1) Fail(ErrorKind::kConfig, "max_epochs must be >= 1");
  if (patience < 1) Fail(ErrorKind::kConfig, "patience must be >= 1");
  if (folds < 2) Fail(ErrorKind::kConfig, "folds must be >= 2");
  if (!(train_frac > 0.0 && train_frac < 1.0)) {
    Fail(ErrorKind::kConfig, "train_frac must lie strictly between 0 and 1");
  }
  const double implied = static_cast<double>(folds - 1) / folds;
  if (std::abs(train_frac - implied) > 1e-9) {
    Fail(ErrorKind::kConfig, "train_frac " + FormatDouble(train_frac) + " disagrees with " +
                                 std::to_string(folds) + " folds (expected " +
                                 FormatDouble(implied) + ")");
  }
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) {
    Fail(ErrorKind::kConfig, "adam_beta1 must lie in [0, 1)");
  }
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    Fail(ErrorKind::kConfig, "adam_beta2 must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0) || !std::isfinite(adam_eps)) {
    Fail(ErrorKind::kConfig, "adam_eps must be positive");
  }
  if (workers < 0) Fail(ErrorKind::kConfig, "workers must be >= 0");
}

std::map<std::string, std::string> TrainConfig::ToKeyValues() const {
  return {
      {"lr", FormatDouble(lr)},
      {"max_epochs", std::to_string(max_epochs)},
      {"patience", std::to_string(patience)},
      {"folds", std::to_string(folds)},
      {"train_frac", FormatDouble(train_frac)},
      {"seed", std::to_string(seed)},
      {"adam_beta1", FormatDouble(adam_beta1)},
      {"adam_beta2", FormatDouble(adam_beta2)},
      {"adam_eps", FormatDouble(adam_eps)},
      {"workers", std::to_string(workers)},
  };
}

bool TrainConfig::Set(const std::string& key, const std::string& value) {
  if (key == "lr") {
    lr = RequireDouble(key, value);
  } else if (key == "max_epochs") {
    max_epochs = RequireInt(key, value);
  } else if (key == "patience") {
    patience = RequireInt(key, value);
  } else if (key == "folds") {
    folds = RequireInt(key, value);
  } else if (key == "train_frac") {
    train_frac = RequireDouble(key, value);
  } else if (key == "seed") {
    const auto v = ParseUint(value);
    if (!v) Fail(ErrorKind::kConfig, "invalid value '" + value + "' for seed");
    seed = *v;
  } else if (key == "adam_beta1") {
    adam_beta1 = RequireDouble(key, value);
  } else if (key == "adam_beta2") {
    adam_beta2 = RequireDouble(key, value);
  } else if (key == "adam_eps") {
    adam_eps = RequireDouble(key, value);
  } else if (key == "workers") {
    workers = RequireInt(key, value);
  } else {
    return false;
  }
  return true;
}

std::uint64_t MixSeed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = base;
  for (std::uint64_t part : {a, b}) {
    z += 0x9e3779b97f4a7c15ULL + part * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
  }
  return z;
}

AdamState AdamState::For(const ModelParams& params) {
  AdamState s;
  s.m = params;
  s.m.ForEach([](const std::string&, Tensor& t) { t.setZero(); });
  s.v = s.m;
  return s;
}

void AdamStep(ModelParams& params, const ModelParams& grads, AdamState& state,
              const TrainConfig& config) {
  auto p = params.Named();
  const auto g = grads.Named();
  auto m = state.m.Named();
  auto v = state.v.Named();
  if (g.size() != p.size() || m.size() != p.size() || v.size() != p.size()) {
    Fail(ErrorKind::kContract, "adam: parameter, gradient and state layouts disagree");
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Tensor& gi = *g[i].second;
    if (gi.rows() != p[i].second->rows() || gi.cols() != p[i].second->cols() ||
        m[i].second->rows() != gi.rows() || m[i].second->cols() != gi.cols() ||
        v[i].second->rows() != gi.rows() || v[i].second->cols() != gi.cols()) {
      Fail(ErrorKind::kContract, "adam: shape mismatch for " + p[i].first + ": parameter " +
                                     ShapeString(*p[i].second) + ", gradient " +
                                     ShapeString(gi));
    }
    if (!gi.allFinite()) Fail(ErrorKind::kTraining, "non-finite gradient in " + p[i].first);
  }

  ++state.step;
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(b1, t);
  const double c2 = 1.0 - std::pow(b2, t);
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto pa = p[i].second->array();
    auto ga = g[i].second->array();
    auto ma = m[i].second->array();
    auto va = v[i].second->array();
    ma = b1 * ma + (1.0 - b1) * ga;
    va = b2 * va + (1.0 - b2) * ga.square();
    pa -= config.lr * (ma / c1) / ((va / c2).sqrt() + config.adam_eps);
  }
}

EarlyStopping::EarlyStopping(int patience) : patience_(patience) {
  if (patience < 1) Fail(ErrorKind::kConfig, "patience must be >= 1");
}

bool EarlyStopping::Update(double loss) {
  ++epochs_;
  if (best_epoch_ == 0 || loss < best_loss_) {
    best_epoch_ = epochs_;
    best_loss_ = loss;
    return true;
  }
  return false;
}

std::vector<FoldSplit> StratifiedKFold(std::span<const int> labels, int folds,
                                       std::uint64_t seed) {
  if (folds < 2) Fail(ErrorKind::kConfig, "folds must be >= 2");
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) {
      Fail(ErrorKind::kData, "label at index " + std::to_string(i) + " is " +
                                 std::to_string(labels[i]) + ", expected 0 or 1");
    }
    by_class[labels[i]].push_back(i);
  }
  for (int c = 0; c < 2; ++c) {
    if (by_class[c].size() < static_cast<std::size_t>(folds)) {
      Fail(ErrorKind::kData, "class " + std::to_string(c) + " has " +
                                 std::to_string(by_class[c].size()) + " samples, fewer than " +
                                 std::to_string(folds) + " folds");
    }
  }

  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::size_t>> val(static_cast<std::size_t>(folds));
  std::size_t next = 0;
  for (auto& members : by_class) {
    // Fisher-Yates with an explicit bounded draw, independent of the
    // standard library's distribution implementation.
    for (std::size_t i = members.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng() % i);
      std::swap(members[i - 1], members[j]);
    }
    for (std::size_t idx : members) {
      val[next].push_back(idx);
      next = (next + 1) % val.size();
    }
  }

  std::vector<FoldSplit> out(val.size());
  for (std::size_t f = 0; f < val.size(); ++f) {
    std::sort(val[f].begin(), val[f].end());
    std::vector<bool> in_val(labels.size(), false);
    for (std::size_t i : val[f]) in_val[i] = true;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (!in_val[i]) out[f].train.push_back(i);
    }
    out[f].val = std::move(val[f]);
  }
  return out;
}

namespace {

double MeanLoss(std::span<const PreparedGraph* const> graphs, const ModelParams& params,
                const HyperParams& hyper, std::vector<Prediction>* predictions) {
  double total = 0.0;
  for (const PreparedGraph* g : graphs) {
    Prediction p = Predict(*g, params, hyper);
    total += p.loss;
    if (predictions != nullptr) predictions->push_back(std::move(p));
  }
  return total / static_cast<double>(graphs.size());
}

}  // namespace

FoldOutcome TrainOneFold(std::span<const PreparedGraph* const> train,
                         std::span<const PreparedGraph* const> val, const TrainConfig& config,
                         const HyperParams& hyper, int fold, const EpochCallback& on_epoch) {
  config.Validate();
  hyper.Validate();
  if (train.empty() || val.empty()) {
    Fail(ErrorKind::kData, "fold " + std::to_string(fold) + ": training (" +
                               std::to_string(train.size()) + ") and validation (" +
                               std::to_string(val.size()) + ") splits must be nonempty");
  }

  ModelParams params = InitParams(hyper, MixSeed(hyper.seed, static_cast<std::uint64_t>(fold)));
  AdamState adam = AdamState::For(params);
  EarlyStopping stopper(config.patience);
  FoldOutcome out;
  out.metrics.fold = fold;
  out.best_params = params;

  std::vector<std::size_t> order(train.size());
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(MixSeed(config.seed, static_cast<std::uint64_t>(fold),
                                static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng() % i)]);
    }

    double train_loss = 0.0;
    for (std::size_t idx : order) {
      LossAndGrad lg = ComputeLossAndGrad(*train[idx], params, hyper);
      if (!std::isfinite(lg.loss)) {
        Fail(ErrorKind::kTraining, "fold " + std::to_string(fold) + " epoch " +
                                       std::to_string(epoch) + ": non-finite loss on " +
                                       train[idx]->graph().wsi_id);
      }
      train_loss += lg.loss;
      AdamStep(params, lg.grads, adam, config);
    }
    train_loss /= static_cast<double>(train.size());

    const double val_loss = MeanLoss(val, params, hyper, nullptr);
    const EpochRecord record{epoch, train_loss, val_loss};
    out.metrics.curve.push_back(record);
    if (on_epoch) on_epoch(fold, record);
    if (stopper.Update(val_loss)) out.best_params = params;
    if (stopper.should_stop()) break;
  }

  out.metrics.best_epoch = stopper.best_epoch();
  out.metrics.epochs_run = stopper.epochs();
  MeanLoss(val, out.best_params, hyper, &out.val_predictions);

  std::vector<double> scores;
  std::vector<int> truth;
  std::vector<int> predicted;
  for (std::size_t i = 0; i < val.size(); ++i) {
    const Prediction& p = out.val_predictions[i];
    // Difference of logits ranks identically to the positive probability
    // without saturating at 0 or 1.
    scores.push_back(p.logit1 - p.logit0);
    truth.push_back(val[i]->graph().label);
    predicted.push_back(p.predicted_label());
  }
  const bool both = std::count(truth.begin(), truth.end(), 1) > 0 &&
                    std::count(truth.begin(), truth.end(), 0) > 0;
  out.metrics.auc = both ? Auc(scores, truth) : std::numeric_limits<double>::quiet_NaN();
  const ClassificationScores cs = F1Acc(predicted, truth);
  out.metrics.f1_macro = cs.f1_macro;
  out.metrics.f1_binary = cs.f1_binary;
  out.metrics.acc = cs.acc;
  return out;
}

void FoldReport::Aggregate() {
  std::vector<double> a, fm, fb, c;
  for (const FoldMetrics& f : folds) {
    a.push_back(f.auc);
    fm.push_back(f.f1_macro);
    fb.push_back(f.f1_binary);
    c.push_back(f.acc);
  }
  auc = Summarize(a);
  f1_macro = Summarize(fm);
  f1_binary = Summarize(fb);
  acc = Summarize(c);
}

CvResult RunCrossValidation(std::span<const WsiGraph> graphs, const TrainConfig& config,
                            const HyperParams& hyper, const EpochCallback& on_epoch) {
  config.Validate();
  hyper.Validate();
  std::vector<int> labels;
  labels.reserve(graphs.size());
  for (const WsiGraph& g : graphs) labels.push_back(g.label);

  CvResult result;
  result.splits = StratifiedKFold(labels, config.folds, config.seed);

  std::vector<PreparedGraph> prepared;
  prepared.reserve(graphs.size());
  for (const WsiGraph& g : graphs) {
    if (g.positional.cols() != hyper.pe_dim) {
      Fail(ErrorKind::kConfig, "wsi " + g.wsi_id + ": positional encoding has " +
                                   std::to_string(g.positional.cols()) +
                                   " channels but pe_dim is " + std::to_string(hyper.pe_dim));
    }
    prepared.emplace_back(g);
  }

  const std::size_t n_folds = result.splits.size();
  std::size_t n_workers = config.workers > 0 ? static_cast<std::size_t>(config.workers)
                                             : std::max(1u, std::thread::hardware_concurrency());
  n_workers = std::min(n_workers, n_folds);

  std::mutex callback_mutex;
  EpochCallback serialized;
  if (on_epoch) {
    serialized = [&](int fold, const EpochRecord& r) {
      std::lock_guard<std::mutex> lock(callback_mutex);
      on_epoch(fold, r);
    };
  }
  std::vector<std::optional<FoldOutcome>> outcomes(n_folds);
  std::vector<std::exception_ptr> errors(n_folds);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t f; (f = next.fetch_add(1)) < n_folds;) {
      try {
        std::vector<const PreparedGraph*> train, val;
        for (std::size_t i : result.splits[f].train) train.push_back(&prepared[i]);
        for (std::size_t i : result.splits[f].val) val.push_back(&prepared[i]);
        outcomes[f] = TrainOneFold(train, val, config, hyper, static_cast<int>(f), serialized);
      } catch (...) {
        errors[f] = std::current_exception();
        next.store(n_folds);
      }
    }
  };
  if (n_workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> threads;
    for (std::size_t w = 0; w < n_workers; ++w) threads.emplace_back(work);
  }
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  for (std::optional<FoldOutcome>& outcome : outcomes) {
    result.report.folds.push_back(outcome->metrics);
    result.outcomes.push_back(std::move(*outcome));
  }
  result.report.Aggregate();
  return result;
}

}  // namespace domaingcn
