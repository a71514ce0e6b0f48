#include "domaingcn/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "domaingcn/domain_weights.hpp"
#include "domaingcn/error.hpp"
#include "domaingcn/text_format.hpp"

namespace domaingcn {

std::string_view WeightModeName(WeightMode mode) {
  return mode == WeightMode::kScaleInput ? "scale_input" : "scale_message";
}

WeightMode ParseWeightMode(std::string_view text) {
  text = Trim(text);
  if (text == "scale_input") return WeightMode::kScaleInput;
  if (text == "scale_message") return WeightMode::kScaleMessage;
  Fail(ErrorKind::kConfig, "weight_mode must be scale_input or scale_message, got '" +
                               std::string(text) + "'");
}

GraphOptions HyperParams::graph_options() const {
  return {k_neighbors, pe_dim, symmetrize_edges, pe_normalized};
}

void HyperParams::Validate() const {
  if (k_neighbors < 1) Fail(ErrorKind::kConfig, "k_neighbors must be >= 1");
  if (hidden < 1) Fail(ErrorKind::kConfig, "hidden must be >= 1");
  if (pe_dim < 4 || pe_dim % 4 != 0) {
    Fail(ErrorKind::kConfig, "pe_dim must be a positive multiple of 4");
  }
  if (layers < 1 || layers > 8) Fail(ErrorKind::kConfig, "layers must lie in 1..8");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    Fail(ErrorKind::kConfig, "epsilon must be positive");
  }
}

std::map<std::string, std::string> HyperParams::ToKeyValues() const {
  return {
      {"k_neighbors", std::to_string(k_neighbors)},
      {"hidden", std::to_string(hidden)},
      {"pe_dim", std::to_string(pe_dim)},
      {"layers", std::to_string(layers)},
      {"epsilon", FormatDouble(epsilon)},
      {"weight_mode", std::string(WeightModeName(weight_mode))},
      {"domain_weights_enabled", domain_weights_enabled ? "true" : "false"},
      {"seed", std::to_string(seed)},
      {"symmetrize_edges", symmetrize_edges ? "true" : "false"},
      {"pe_normalized", pe_normalized ? "true" : "false"},
  };
}

namespace {

template <typename T>
T Require(std::optional<T> v, const std::string& key, const std::string& value) {
  if (!v) Fail(ErrorKind::kConfig, "invalid value '" + value + "' for " + key);
  return *v;
}

int RequireInt(const std::string& key, const std::string& value) {
  const long long v = Require(ParseInt(value), key, value);
  if (v < INT32_MIN || v > INT32_MAX) Fail(ErrorKind::kConfig, key + " out of range");
  return static_cast<int>(v);
}

}  // namespace

bool HyperParams::Set(const std::string& key, const std::string& value) {
  if (key == "k_neighbors") {
    k_neighbors = RequireInt(key, value);
  } else if (key == "hidden") {
    hidden = RequireInt(key, value);
  } else if (key == "pe_dim") {
    pe_dim = RequireInt(key, value);
  } else if (key == "layers") {
    layers = RequireInt(key, value);
  } else if (key == "epsilon") {
    epsilon = Require(ParseDouble(value), key, value);
  } else if (key == "weight_mode") {
    weight_mode = ParseWeightMode(value);
  } else if (key == "domain_weights_enabled") {
    domain_weights_enabled = Require(ParseBool(value), key, value);
  } else if (key == "seed") {
    seed = Require(ParseUint(value), key, value);
  } else if (key == "symmetrize_edges") {
    symmetrize_edges = Require(ParseBool(value), key, value);
  } else if (key == "pe_normalized") {
    pe_normalized = Require(ParseBool(value), key, value);
  } else {
    return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Parameters

ModelParams ModelParams::Zeros(const HyperParams& hyper) {
  const Eigen::Index w = hyper.width();
  const Eigen::Index h = hyper.hidden;
  ModelParams p;
  p.proj_w = Tensor::Zero(static_cast<Eigen::Index>(kEmbeddingDim), h);
  p.proj_b = Tensor::Zero(1, h);
  p.layers.resize(static_cast<std::size_t>(hyper.layers));
  for (auto& l : p.layers) {
    l.mlp1_w = Tensor::Zero(w, w);
    l.mlp1_b = Tensor::Zero(1, w);
    l.mlp2_w = Tensor::Zero(w, w);
    l.mlp2_b = Tensor::Zero(1, w);
  }
  p.attn_v = Tensor::Zero(w, h);
  p.attn_w = Tensor::Zero(h, 1);
  p.head_w = Tensor::Zero(w, 2);
  p.head_b = Tensor::Zero(1, 2);
  return p;
}

std::vector<std::pair<std::string, Tensor*>> ModelParams::Named() {
  std::vector<std::pair<std::string, Tensor*>> out;
  ForEach([&out](const std::string& name, Tensor& t) { out.emplace_back(name, &t); });
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> ModelParams::Named() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  ForEach([&out](const std::string& name, const Tensor& t) { out.emplace_back(name, &t); });
  return out;
}

std::size_t ModelParams::num_scalars() const {
  std::size_t n = 0;
  ForEach([&n](const std::string&, const Tensor& t) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

bool ModelParams::AllFinite() const {
  bool ok = true;
  ForEach([&ok](const std::string&, const Tensor& t) { ok = ok && t.allFinite(); });
  return ok;
}

ModelParams InitParams(const HyperParams& hyper, std::uint64_t seed) {
  hyper.Validate();
  ModelParams p = ModelParams::Zeros(hyper);
  std::mt19937_64 rng(seed);
  p.ForEach([&rng](const std::string& name, Tensor& t) {
    if (t.rows() == 1 && name.ends_with("_b")) return;  // biases stay zero
    const double a = std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      // 53 random bits mapped to [0,1), then to [-a, a).
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      t.data()[i] = (2.0 * u - 1.0) * a;
    }
  });
  return p;
}

// ---------------------------------------------------------------------------
// Graph preparation

PreparedGraph::PreparedGraph(const WsiGraph& graph) : graph_(&graph) {
  const std::size_t n = graph.num_nodes();
  std::vector<Edge> edges = graph.edges;
  for (const Edge& e : edges) {
    if (e.src >= n || e.dst >= n) {
      Fail(ErrorKind::kData, "graph " + graph.wsi_id + ": edge " + std::to_string(e.src) + "->" +
                                 std::to_string(e.dst) + " references a missing node");
    }
  }
  std::stable_sort(edges.begin(), edges.end(),
                   [](const Edge& a, const Edge& b) { return a.src < b.src; });
  std::vector<std::size_t> offsets{0};
  for (std::size_t e = 0; e < edges.size(); ++e) {
    neighbor_.push_back(edges[e].dst);
    receiver_.push_back(edges[e].src);
    if (e + 1 == edges.size() || edges[e + 1].src != edges[e].src) offsets.push_back(e + 1);
  }
  groups_ = RowPartition::FromOffsets(std::move(offsets));
  lists_.offsets.assign(n + 1, 0);
  for (const Edge& e : edges) ++lists_.offsets[e.src + 1];
  for (std::size_t i = 0; i < n; ++i) lists_.offsets[i + 1] += lists_.offsets[i];
  lists_.neighbors = neighbor_;
  weights_.assign(graph.node_weights.begin(), graph.node_weights.end());
  if (weights_.size() != n) {
    Fail(ErrorKind::kData, "graph " + graph.wsi_id + ": " + std::to_string(weights_.size()) +
                               " weights for " + std::to_string(n) + " nodes");
  }
}

// ---------------------------------------------------------------------------
// Forward

ParamVars BindParams(Tape& tape, const ModelParams& params, bool requires_grad) {
  ParamVars v;
  v.proj_w = tape.LeafRef(params.proj_w, requires_grad);
  v.proj_b = tape.LeafRef(params.proj_b, requires_grad);
  for (const auto& l : params.layers) {
    v.layers.push_back({tape.LeafRef(l.mlp1_w, requires_grad), tape.LeafRef(l.mlp1_b, requires_grad),
                        tape.LeafRef(l.mlp2_w, requires_grad), tape.LeafRef(l.mlp2_b, requires_grad)});
  }
  v.attn_v = tape.LeafRef(params.attn_v, requires_grad);
  v.attn_w = tape.LeafRef(params.attn_w, requires_grad);
  v.head_w = tape.LeafRef(params.head_w, requires_grad);
  v.head_b = tape.LeafRef(params.head_b, requires_grad);
  return v;
}

ModelParams CollectGrads(const Tape& tape, const ParamVars& v) {
  ModelParams g;
  g.proj_w = tape.grad(v.proj_w);
  g.proj_b = tape.grad(v.proj_b);
  for (const auto& l : v.layers) {
    g.layers.push_back(
        {tape.grad(l.mlp1_w), tape.grad(l.mlp1_b), tape.grad(l.mlp2_w), tape.grad(l.mlp2_b)});
  }
  g.attn_v = tape.grad(v.attn_v);
  g.attn_w = tape.grad(v.attn_w);
  g.head_w = tape.grad(v.head_w);
  g.head_b = tape.grad(v.head_b);
  return g;
}

Var ProjectAndConcat(Var x_uni, Var x_pe, Var proj_w, Var proj_b) {
  return ConcatCols(AddRowBias(MatMul(x_uni, proj_w), proj_b), x_pe);
}

Var MessagePassingLayer(Var x, const PreparedGraph& graph, const LayerVars& layer, double epsilon,
                        std::span<const double> message_scale) {
  Var messages = Shift(Relu(x), epsilon);
  if (!message_scale.empty()) messages = ScaleRows(messages, message_scale);
  Var aggregated = SoftmaxAggregate(messages, graph.neighbor_lists());
  Var hidden = Relu(AddRowBias(MatMul(Add(x, aggregated), layer.mlp1_w), layer.mlp1_b));
  Var update = AddRowBias(MatMul(hidden, layer.mlp2_w), layer.mlp2_b);
  return Add(x, update);
}

PoolResult AttentionPool(Var h, Var attn_v, Var attn_w) {
  Var logits = MatMul(Tanh(MatMul(h, attn_v)), attn_w);
  Var scores = GroupSoftmax(logits, RowPartition::Single(static_cast<std::size_t>(h.rows())));
  Var embedding = MatMul(Transpose(scores), h);
  return {embedding, scores};
}

ForwardResult Forward(Tape& tape, const PreparedGraph& graph, const ParamVars& params,
                      const HyperParams& hyper) {
  const WsiGraph& g = graph.graph();
  if (g.positional.cols() != hyper.pe_dim) {
    Fail(ErrorKind::kDimension, "graph " + g.wsi_id + " positional encoding is " +
                                    ShapeString(g.positional) + ", model expects pe_dim " +
                                    std::to_string(hyper.pe_dim));
  }
  if (params.layers.size() != static_cast<std::size_t>(hyper.layers)) {
    Fail(ErrorKind::kDimension, "parameters hold " + std::to_string(params.layers.size()) +
                                    " layers, hyperparameters say " +
                                    std::to_string(hyper.layers));
  }
  Var x_uni = tape.LeafRef(g.node_features);
  Var x_pe = tape.LeafRef(g.positional);
  Var x = ProjectAndConcat(x_uni, x_pe, params.proj_w, params.proj_b);

  std::span<const double> message_scale;
  if (hyper.domain_weights_enabled) {
    if (hyper.weight_mode == WeightMode::kScaleInput) {
      x = ApplyWeights(x, g.node_weights);
    } else {
      message_scale = graph.weight_factors();
    }
  }
  for (const auto& layer : params.layers) {
    x = MessagePassingLayer(x, graph, layer, hyper.epsilon, message_scale);
  }
  PoolResult pooled = AttentionPool(x, params.attn_v, params.attn_w);
  Var logits = AddRowBias(MatMul(pooled.embedding, params.head_w), params.head_b);
  return {logits, pooled.scores};
}

double Prediction::positive_probability() const {
  const double m = std::max(logit0, logit1);
  const double e0 = std::exp(logit0 - m);
  const double e1 = std::exp(logit1 - m);
  return e1 / (e0 + e1);
}

Prediction Predict(const PreparedGraph& graph, const ModelParams& params,
                   const HyperParams& hyper) {
  Tape tape;
  ParamVars vars = BindParams(tape, params, false);
  ForwardResult out = Forward(tape, graph, vars, hyper);
  Prediction p;
  p.logit0 = out.logits.value()(0, 0);
  p.logit1 = out.logits.value()(0, 1);
  const int label = graph.graph().label;
  p.loss = label == 0 || label == 1 ? CrossEntropyWithLogits(out.logits, label).value()(0, 0)
                                    : std::numeric_limits<double>::quiet_NaN();
  const Tensor& a = out.attention.value();
  p.attention.assign(a.data(), a.data() + a.size());
  return p;
}

LossAndGrad ComputeLossAndGrad(const PreparedGraph& graph, const ModelParams& params,
                               const HyperParams& hyper) {
  Tape tape;
  ParamVars vars = BindParams(tape, params, true);
  ForwardResult out = Forward(tape, graph, vars, hyper);
  Var loss = CrossEntropyWithLogits(out.logits, graph.graph().label);
  tape.Backward(loss);
  return {loss.value()(0, 0), CollectGrads(tape, vars)};
}

}  // namespace domaingcn
