#pragma once

// Dense 64-bit matrices with a reverse-mode tape.
//
// A Tape owns every value created during one forward pass. Operations are
// free functions over Var handles; each records its output value, its inputs
// and a backward closure. Backward() sweeps the tape in reverse creation
// order, which is a topological order by construction.
//
// Broadcasting is limited to scalar scaling/shifting and AddRowBias.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "domaingcn/error.hpp"

namespace domaingcn {

using Tensor =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::string ShapeString(const Tensor& t);
std::string ShapeString(Eigen::Index rows, Eigen::Index cols);

enum class OpKind {
  kLeaf,
  kMatMul,
  kAdd,
  kSub,
  kMul,
  kRelu,
  kTanh,
  kExp,
  kScale,
  kShift,
  kAddRowBias,
  kConcatCols,
  kGatherRows,
  kScatterSumRows,
  kScaleRows,
  kGroupSoftmax,
  kSoftmaxAggregate,
  kTranspose,
  kSum,
  kCrossEntropy,
};

// A partition of row indices 0..rows-1 into nonempty groups.
class RowPartition {
 public:
  RowPartition() = default;

  // Throws a contract violation if a group is empty or the groups do not
  // cover every row exactly once.
  static RowPartition FromGroups(const std::vector<std::vector<std::size_t>>& groups,
                                 std::size_t rows);
  // Groups [offsets[g], offsets[g+1]) of consecutive rows.
  static RowPartition FromOffsets(std::vector<std::size_t> offsets);
  static RowPartition Single(std::size_t rows);

  std::size_t rows() const { return rows_; }
  std::size_t num_groups() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  // True when every group is a run of consecutive rows in ascending order.
  bool contiguous() const { return contiguous_; }
  std::size_t group_begin(std::size_t g) const { return offsets_[g]; }
  std::size_t group_size(std::size_t g) const { return offsets_[g + 1] - offsets_[g]; }
  std::span<const std::size_t> group(std::size_t g) const {
    return {members_.data() + offsets_[g], offsets_[g + 1] - offsets_[g]};
  }

 private:
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> members_;
  std::size_t rows_ = 0;
  bool contiguous_ = true;
};

// Compressed adjacency: the neighbors of receiver i are
// neighbors[offsets[i] .. offsets[i+1]).
struct NeighborLists {
  std::vector<std::size_t> offsets{0};
  std::vector<std::size_t> neighbors;

  std::size_t num_receivers() const { return offsets.size() - 1; }
};

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape
// lives.
class Var {
 public:
  Var() = default;

  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }
  const Tensor& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var Leaf(Tensor value, bool requires_grad = false);
  Var Constant(Tensor value) { return Leaf(std::move(value), false); }
  // Leaf that reads `value` in place; it must outlive the tape.
  Var LeafRef(const Tensor& value, bool requires_grad = false);

  const Tensor& value(Var v) const {
    const Node& n = nodes_[v.id_];
    return n.external != nullptr ? *n.external : n.value;
  }
  bool requires_grad(Var v) const { return nodes_[v.id_].requires_grad; }
  OpKind kind(Var v) const { return nodes_[v.id_].kind; }
  const std::vector<std::size_t>& inputs(Var v) const { return nodes_[v.id_].inputs; }
  std::size_t size() const { return nodes_.size(); }

  // Gradient populated by the most recent Backward(); zeros if the value
  // received no gradient.
  Tensor grad(Var v) const;

  // Loss must be a 1x1 value recorded on this tape.
  void Backward(Var loss);

  // Op plumbing. The backward closure is dropped when no input requires a
  // gradient.
  Var Record(OpKind kind, Tensor value, std::initializer_list<Var> inputs,
             BackwardFn backward);

  template <typename Expr>
  void Accumulate(Var v, const Expr& g) {
    Node& node = nodes_[v.id_];
    if (!node.requires_grad) return;
    // Gradient expressions never read the gradient they accumulate into.
    if (node.grad.size() == 0) {
      node.grad.noalias() = g;
    } else {
      node.grad.noalias() += g;
    }
  }

  Var handle(std::size_t id) { return Var(this, id); }

 private:
  struct Node {
    OpKind kind = OpKind::kLeaf;
    Tensor value;
    const Tensor* external = nullptr;
    Tensor grad;
    bool requires_grad = false;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
};

// Linear algebra and elementwise ops. Binary elementwise ops require equal
// shapes; violations raise a dimension error naming both shapes.
Var MatMul(Var a, Var b);
Var Add(Var a, Var b);
Var Sub(Var a, Var b);
Var Mul(Var a, Var b);
Var Relu(Var a);  // subgradient 0 at exactly 0
Var Tanh(Var a);
Var Exp(Var a);
Var Scale(Var a, double s);
Var Shift(Var a, double s);
Var AddRowBias(Var a, Var bias);  // bias is 1 x cols
Var ConcatCols(Var a, Var b);
Var Transpose(Var a);
Var Sum(Var a);  // 1x1

// Row plumbing for graph aggregation.
Var GatherRows(Var a, std::span<const std::size_t> rows);
// out.row(targets[r]) += a.row(r); out has out_rows rows.
Var ScatterSumRows(Var a, std::span<const std::size_t> targets, std::size_t out_rows);
// out.row(i) = factors[i] * a.row(i); factors are constants.
Var ScaleRows(Var a, std::span<const double> factors);

// Within each group, each column is softmax-normalized independently.
Var GroupSoftmax(Var values, const RowPartition& groups);

// Softmax aggregation: out.row(i) = sum_j alpha_ij * m_j over the neighbors j
// of i, with alpha_ij the per-channel softmax of {m_j} over those neighbors.
// Receivers without neighbors get a zero row. Equivalent to
// ScatterSumRows(Mul(GroupSoftmax(GatherRows(m)), GatherRows(m))) without
// materializing per-edge tensors on the tape. `lists` must outlive the tape.
Var SoftmaxAggregate(Var messages, const NeighborLists& lists);

// -log softmax(logits)[label] for a 1 x C row of logits.
Var CrossEntropyWithLogits(Var logits, int label);

// Numerically stable softmax of a row vector, outside any tape.
Eigen::RowVectorXd SoftmaxRow(const Eigen::Ref<const Eigen::RowVectorXd>& logits);

}  // namespace domaingcn
