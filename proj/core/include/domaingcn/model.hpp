#pragma once

// The graph classifier: linear projection of patch embeddings, concatenation
// with positional encodings, residual softmax-aggregation message passing,
// single-branch tanh attention pooling and a two-class linear head.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "domaingcn/autodiff.hpp"
#include "domaingcn/graph.hpp"

namespace domaingcn {

enum class WeightMode {
  kScaleInput,    // scale assembled node features before the first layer
  kScaleMessage,  // scale each node's outgoing messages in every layer
};

std::string_view WeightModeName(WeightMode mode);
WeightMode ParseWeightMode(std::string_view text);

struct HyperParams {
  int k_neighbors = 8;
  int hidden = 64;
  int pe_dim = 32;
  int layers = 4;
  double epsilon = 1e-7;
  WeightMode weight_mode = WeightMode::kScaleInput;
  bool domain_weights_enabled = true;
  std::uint64_t seed = 0;
  bool symmetrize_edges = false;
  bool pe_normalized = false;

  int width() const { return hidden + pe_dim; }
  GraphOptions graph_options() const;
  void Validate() const;

  // Flat key = value view used by config files and checkpoints.
  std::map<std::string, std::string> ToKeyValues() const;
  // Returns false for keys this struct does not own.
  bool Set(const std::string& key, const std::string& value);

  friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

struct LayerParams {
  Tensor mlp1_w;  // width x width
  Tensor mlp1_b;  // 1 x width
  Tensor mlp2_w;
  Tensor mlp2_b;
  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

struct ModelParams {
  Tensor proj_w;  // kEmbeddingDim x hidden
  Tensor proj_b;  // 1 x hidden
  std::vector<LayerParams> layers;
  Tensor attn_v;  // width x hidden
  Tensor attn_w;  // hidden x 1
  Tensor head_w;  // width x 2
  Tensor head_b;  // 1 x 2

  // Zero-filled parameters with the shapes implied by `hyper`.
  static ModelParams Zeros(const HyperParams& hyper);

  // Visits every matrix with a stable name, in a fixed order.
  template <typename F>
  void ForEach(F&& f) {
    f("proj_w", proj_w);
    f("proj_b", proj_b);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const std::string p = "layer" + std::to_string(l) + ".";
      f(p + "mlp1_w", layers[l].mlp1_w);
      f(p + "mlp1_b", layers[l].mlp1_b);
      f(p + "mlp2_w", layers[l].mlp2_w);
      f(p + "mlp2_b", layers[l].mlp2_b);
    }
    f("attn_v", attn_v);
    f("attn_w", attn_w);
    f("head_w", head_w);
    f("head_b", head_b);
  }
  template <typename F>
  void ForEach(F&& f) const {
    const_cast<ModelParams*>(this)->ForEach(
        [&f](const std::string& name, Tensor& t) { f(name, static_cast<const Tensor&>(t)); });
  }

  // Name/pointer pairs in ForEach order.
  std::vector<std::pair<std::string, Tensor*>> Named();
  std::vector<std::pair<std::string, const Tensor*>> Named() const;

  std::size_t num_scalars() const;
  bool AllFinite() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)) for matrices; zero
// biases. Deterministic in `seed`.
ModelParams InitParams(const HyperParams& hyper, std::uint64_t seed);

// Parameter-independent per-graph data: edges grouped by receiving node and
// the constant inputs.
class PreparedGraph {
 public:
  explicit PreparedGraph(const WsiGraph& graph);

  const WsiGraph& graph() const { return *graph_; }
  std::size_t num_nodes() const { return graph_->num_nodes(); }
  // Neighbor (message source) node of each edge, grouped by receiver.
  std::span<const std::size_t> neighbor_of_edge() const { return neighbor_; }
  // Receiving node of each edge.
  std::span<const std::size_t> receiver_of_edge() const { return receiver_; }
  const RowPartition& edge_groups() const { return groups_; }
  const NeighborLists& neighbor_lists() const { return lists_; }
  std::span<const double> weight_factors() const { return weights_; }

 private:
  const WsiGraph* graph_;
  std::vector<std::size_t> neighbor_;
  std::vector<std::size_t> receiver_;
  RowPartition groups_;
  NeighborLists lists_;
  std::vector<double> weights_;
};

struct LayerVars {
  Var mlp1_w, mlp1_b, mlp2_w, mlp2_b;
};

struct ParamVars {
  Var proj_w, proj_b;
  std::vector<LayerVars> layers;
  Var attn_v, attn_w, head_w, head_b;
};

ParamVars BindParams(Tape& tape, const ModelParams& params, bool requires_grad);
ModelParams CollectGrads(const Tape& tape, const ParamVars& vars);

// [x_uni * proj_w + proj_b || x_pe]
Var ProjectAndConcat(Var x_uni, Var x_pe, Var proj_w, Var proj_b);

// out_i = x_i + MLP(x_i + sum_j softmax_j(m_j) * m_j), m_j = ReLU(x_j) + eps,
// softmax taken channel-wise over the neighbors of i. Nodes without
// neighbors aggregate zero. `message_scale`, if nonempty, multiplies node j's
// messages by message_scale[j].
Var MessagePassingLayer(Var x, const PreparedGraph& graph, const LayerVars& layer, double epsilon,
                        std::span<const double> message_scale = {});

struct PoolResult {
  Var embedding;  // 1 x width
  Var scores;     // N x 1, sums to one
};
PoolResult AttentionPool(Var h, Var attn_v, Var attn_w);

struct ForwardResult {
  Var logits;     // 1 x 2
  Var attention;  // N x 1
};
ForwardResult Forward(Tape& tape, const PreparedGraph& graph, const ParamVars& params,
                      const HyperParams& hyper);

struct Prediction {
  double logit0 = 0.0;
  double logit1 = 0.0;
  double loss = 0.0;
  std::vector<double> attention;

  double positive_probability() const;
  int predicted_label() const { return logit1 > logit0 ? 1 : 0; }
};

Prediction Predict(const PreparedGraph& graph, const ModelParams& params, const HyperParams& hyper);

struct LossAndGrad {
  double loss = 0.0;
  ModelParams grads;
};
LossAndGrad ComputeLossAndGrad(const PreparedGraph& graph, const ModelParams& params,
                               const HyperParams& hyper);

}  // namespace domaingcn
