#include "domaingcn/audit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "domaingcn/domain_weights.hpp"
#include "domaingcn/error.hpp"
#include "domaingcn/grad_check.hpp"
#include "domaingcn/training.hpp"

namespace domaingcn {

WsiGraph MakeAuditGraph(std::uint64_t seed, int nodes, int edges, int pe_dim) {
  if (nodes < 2) Fail(ErrorKind::kConfig, "audit graph needs at least 2 nodes");
  const long long max_edges = static_cast<long long>(nodes) * (nodes - 1);
  if (edges < 0 || edges > max_edges) {
    Fail(ErrorKind::kConfig, "audit graph edge count must lie in 0.." + std::to_string(max_edges));
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(nodes))));
  std::vector<PatchRecord> records(static_cast<std::size_t>(nodes));
  for (int i = 0; i < nodes; ++i) {
    PatchRecord& r = records[static_cast<std::size_t>(i)];
    r.patch_id = "n" + std::to_string(i);
    r.coord = {i % side, i / side};
    r.embedding.resize(kEmbeddingDim);
    for (float& v : r.embedding) v = normal(rng);
    r.tissue = {unit(rng) * 0.3, unit(rng) * 0.6, unit(rng) * 0.6};
  }
  GraphOptions options;
  options.pe_dim = pe_dim;
  WsiGraph g = AssembleGraph("audit", records, 1, UlcerWeights(records), options);

  std::set<std::pair<std::size_t, std::size_t>> chosen;
  std::uniform_int_distribution<int> pick(0, nodes - 1);
  while (static_cast<int>(chosen.size()) < edges) {
    const auto src = static_cast<std::size_t>(pick(rng));
    const auto dst = static_cast<std::size_t>(pick(rng));
    if (src != dst) chosen.insert({src, dst});
  }
  g.edges.clear();
  for (const auto& [src, dst] : chosen) g.edges.push_back({src, dst});
  return g;
}

double ReluKinkMargin(const WsiGraph& graph, const ModelParams& params, const HyperParams& hyper) {
  hyper.Validate();
  const PreparedGraph prepared(graph);
  std::vector<bool> is_neighbor(graph.num_nodes(), false);
  for (std::size_t j : prepared.neighbor_of_edge()) is_neighbor[j] = true;

  Tape tape;
  Tensor projected = graph.node_features * params.proj_w;
  projected.rowwise() += params.proj_b.row(0);
  Tensor input(projected.rows(), projected.cols() + graph.positional.cols());
  input << projected, graph.positional;
  std::span<const double> message_scale;
  if (hyper.domain_weights_enabled) {
    if (hyper.weight_mode == WeightMode::kScaleInput) {
      for (std::size_t i = 0; i < graph.num_nodes(); ++i) {
        input.row(static_cast<Eigen::Index>(i)) *= prepared.weight_factors()[i];
      }
    } else {
      message_scale = prepared.weight_factors();
    }
  }

  double margin = std::numeric_limits<double>::infinity();
  Var x = tape.Constant(std::move(input));
  for (const LayerParams& p : params.layers) {
    // Positional columns entering the first layer are constants.
    const Eigen::Index movable = &p == &params.layers.front() ? projected.cols() : x.cols();
    for (std::size_t j = 0; j < is_neighbor.size(); ++j) {
      if (is_neighbor[j]) {
        const auto row = x.value().row(static_cast<Eigen::Index>(j)).head(movable);
        margin = std::min(margin, row.cwiseAbs().minCoeff());
      }
    }
    Var messages = Shift(Relu(x), hyper.epsilon);
    if (!message_scale.empty()) messages = ScaleRows(messages, message_scale);
    Var aggregated = SoftmaxAggregate(messages, prepared.neighbor_lists());
    Var pre = AddRowBias(MatMul(Add(x, aggregated), tape.LeafRef(p.mlp1_w)), tape.LeafRef(p.mlp1_b));
    margin = std::min(margin, pre.value().cwiseAbs().minCoeff());
    Var update = AddRowBias(MatMul(Relu(pre), tape.LeafRef(p.mlp2_w)), tape.LeafRef(p.mlp2_b));
    x = Add(x, update);
  }
  return margin;
}

AuditPoint DrawAuditPoint(std::uint64_t seed, const HyperParams& hyper, int nodes, int edges,
                          double min_margin, int max_draws) {
  for (int draw = 0; draw < max_draws; ++draw) {
    const std::uint64_t s = MixSeed(seed, static_cast<std::uint64_t>(draw));
    AuditPoint point{MakeAuditGraph(s, nodes, edges, hyper.pe_dim), InitParams(hyper, s), draw, 0.0};
    point.margin = ReluKinkMargin(point.graph, point.params, hyper);
    if (point.margin >= min_margin) return point;
  }
  Fail(ErrorKind::kContract, "no audit point with ReLU margin " + std::to_string(min_margin) +
                                 " within " + std::to_string(max_draws) + " draws");
}

namespace {

class StagedLoss {
 public:
  StagedLoss(const PreparedGraph& graph, const ModelParams& params, const HyperParams& hyper)
      : graph_(graph), params_(params), hyper_(hyper) {
    const WsiGraph& g = graph.graph();
    if (hyper.domain_weights_enabled) {
      if (hyper.weight_mode == WeightMode::kScaleInput) {
        input_scale_ = graph.weight_factors();
      } else {
        message_scale_ = graph.weight_factors();
      }
    }
    projected_ = g.node_features * params.proj_w;
    projected_.rowwise() += params.proj_b.row(0);
    inputs_.push_back(Assemble(projected_));
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
      Tape tape;
      Var x = tape.Constant(inputs_.back());
      const LayerVars layer = BindLayer(tape, params.layers[l]);
      inputs_.push_back(
          MessagePassingLayer(x, graph_, layer, hyper_.epsilon, message_scale_).value());
    }
  }

  const Tensor& projected() const { return projected_; }
  std::size_t num_layers() const { return params_.layers.size(); }

  // Loss with the current `params` starting from the cached input of layer
  // `first` (num_layers() starts at the pooling stage).
  double FromLayer(std::size_t first, const ModelParams& params) const {
    return Run(first, inputs_[first], params);
  }

  // Loss with a replacement for the projected features.
  double FromProjected(const Tensor& projected, const ModelParams& params) const {
    return Run(0, Assemble(projected), params);
  }

 private:
  static LayerVars BindLayer(Tape& tape, const LayerParams& p) {
    return {tape.LeafRef(p.mlp1_w), tape.LeafRef(p.mlp1_b), tape.LeafRef(p.mlp2_w),
            tape.LeafRef(p.mlp2_b)};
  }

  Tensor Assemble(const Tensor& projected) const {
    const WsiGraph& g = graph_.graph();
    Tensor x(projected.rows(), projected.cols() + g.positional.cols());
    x << projected, g.positional;
    for (std::size_t i = 0; i < input_scale_.size(); ++i) {
      x.row(static_cast<Eigen::Index>(i)) *= input_scale_[i];
    }
    return x;
  }

  double Run(std::size_t first, const Tensor& input, const ModelParams& params) const {
    Tape tape;
    Var x = tape.Constant(input);
    for (std::size_t l = first; l < params.layers.size(); ++l) {
      x = MessagePassingLayer(x, graph_, BindLayer(tape, params.layers[l]), hyper_.epsilon,
                              message_scale_);
    }
    PoolResult pooled =
        AttentionPool(x, tape.LeafRef(params.attn_v), tape.LeafRef(params.attn_w));
    Var logits =
        AddRowBias(MatMul(pooled.embedding, tape.LeafRef(params.head_w)), tape.LeafRef(params.head_b));
    return CrossEntropyWithLogits(logits, graph_.graph().label).value()(0, 0);
  }

  const PreparedGraph& graph_;
  const ModelParams& params_;
  const HyperParams& hyper_;
  std::span<const double> input_scale_;
  std::span<const double> message_scale_;
  Tensor projected_;
  std::vector<Tensor> inputs_;
};

}  // namespace

ModelAudit AuditModelGradients(const WsiGraph& graph, const ModelParams& params,
                               const HyperParams& hyper, double h) {
  hyper.Validate();
  const PreparedGraph prepared(graph);
  const LossAndGrad reference = ComputeLossAndGrad(prepared, params, hyper);
  const StagedLoss staged(prepared, params, hyper);

  ModelParams probe = params;
  const auto grads = reference.grads.Named();
  auto named = probe.Named();
  const Tensor& features = graph.node_features;

  ModelAudit audit;
  audit.loss = reference.loss;
  bool saw_nan = false;
  for (std::size_t p = 0; p < named.size(); ++p) {
    const std::string& name = named[p].first;
    Tensor& tensor = *named[p].second;
    const Tensor& analytic = *grads[p].second;

    // Which stage a parameter enters at.
    std::size_t first_layer = staged.num_layers();
    const bool is_proj_w = name == "proj_w";
    const bool is_proj_b = name == "proj_b";
    if (name.rfind("layer", 0) == 0) {
      first_layer = static_cast<std::size_t>(std::stoul(name.substr(5, name.find('.') - 5)));
    }

    ParameterAudit pa;
    pa.name = name;
    pa.count = static_cast<std::size_t>(tensor.size());
    Tensor shifted;
    for (Eigen::Index i = 0; i < tensor.size(); ++i) {
      double plus = 0.0;
      double minus = 0.0;
      if (is_proj_w || is_proj_b) {
        const Eigen::Index c = i % tensor.cols();
        const Eigen::Index r = i / tensor.cols();
        shifted = staged.projected();
        if (is_proj_w) {
          shifted.col(c) += h * features.col(r);
        } else {
          shifted.col(c).array() += h;
        }
        plus = staged.FromProjected(shifted, probe);
        shifted = staged.projected();
        if (is_proj_w) {
          shifted.col(c) -= h * features.col(r);
        } else {
          shifted.col(c).array() -= h;
        }
        minus = staged.FromProjected(shifted, probe);
      } else {
        const double original = tensor.data()[i];
        tensor.data()[i] = original + h;
        plus = staged.FromLayer(first_layer, probe);
        tensor.data()[i] = original - h;
        minus = staged.FromLayer(first_layer, probe);
        tensor.data()[i] = original;
      }
      const double numeric = (plus - minus) / (2.0 * h);
      const double a = analytic.data()[i];
      const double err = RelativeError(a, numeric);
      pa.max_absolute_error = std::max(pa.max_absolute_error, std::abs(a - numeric));
      if (std::isnan(err)) {
        saw_nan = true;
      } else if (i == 0 || err > pa.max_relative_error) {
        pa.max_relative_error = err;
        pa.worst_index = static_cast<std::size_t>(i);
        pa.analytic = a;
        pa.numeric = numeric;
      }
    }
    audit.checked += pa.count;
    audit.max_absolute_error = std::max(audit.max_absolute_error, pa.max_absolute_error);
    if (audit.parameters.empty() || pa.max_relative_error > audit.max_relative_error) {
      audit.max_relative_error = pa.max_relative_error;
      audit.worst_parameter = pa.name;
      audit.worst_index = pa.worst_index;
    }
    audit.parameters.push_back(std::move(pa));
  }
  if (saw_nan) audit.max_relative_error = std::numeric_limits<double>::quiet_NaN();
  return audit;
}

}  // namespace domaingcn
