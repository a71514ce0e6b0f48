#include "domaingcn/autodiff.hpp"

#include <cmath>
#include <memory>
#include <sstream>

namespace domaingcn {

std::string ShapeString(Eigen::Index rows, Eigen::Index cols) {
  std::ostringstream os;
  os << rows << "x" << cols;
  return os.str();
}

std::string ShapeString(const Tensor& t) { return ShapeString(t.rows(), t.cols()); }

// ---------------------------------------------------------------------------
// RowPartition

RowPartition RowPartition::FromGroups(
    const std::vector<std::vector<std::size_t>>& groups, std::size_t rows) {
  RowPartition p;
  p.rows_ = rows;
  p.offsets_.reserve(groups.size() + 1);
  p.offsets_.push_back(0);
  std::vector<char> seen(rows, 0);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) {
      Fail(ErrorKind::kContract, "row partition group " + std::to_string(g) + " is empty");
    }
    for (std::size_t r : groups[g]) {
      if (r >= rows) {
        Fail(ErrorKind::kContract, "row partition index " + std::to_string(r) +
                                       " out of range for " + std::to_string(rows) + " rows");
      }
      if (seen[r]) {
        Fail(ErrorKind::kContract, "row " + std::to_string(r) + " appears in two groups");
      }
      seen[r] = 1;
      p.members_.push_back(r);
    }
    p.offsets_.push_back(p.members_.size());
  }
  for (std::size_t i = 0; i < p.members_.size(); ++i) {
    if (p.members_[i] != i) p.contiguous_ = false;
  }
  if (p.members_.size() != rows) {
    Fail(ErrorKind::kContract, "row partition covers " + std::to_string(p.members_.size()) +
                                   " of " + std::to_string(rows) + " rows");
  }
  return p;
}

RowPartition RowPartition::FromOffsets(std::vector<std::size_t> offsets) {
  RowPartition p;
  if (offsets.empty() || offsets.front() != 0) {
    Fail(ErrorKind::kContract, "row partition offsets must start at 0");
  }
  for (std::size_t g = 0; g + 1 < offsets.size(); ++g) {
    if (offsets[g + 1] <= offsets[g]) {
      Fail(ErrorKind::kContract, "row partition group " + std::to_string(g) + " is empty");
    }
  }
  p.rows_ = offsets.back();
  p.members_.resize(p.rows_);
  for (std::size_t r = 0; r < p.rows_; ++r) p.members_[r] = r;
  p.offsets_ = std::move(offsets);
  return p;
}

RowPartition RowPartition::Single(std::size_t rows) {
  if (rows == 0) Fail(ErrorKind::kContract, "row partition group 0 is empty");
  return FromOffsets({0, rows});
}

// ---------------------------------------------------------------------------
// Var / Tape

const Tensor& Var::value() const { return tape_->value(*this); }

Var Tape::Leaf(Tensor value, bool requires_grad) {
  Node node;
  node.kind = OpKind::kLeaf;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::LeafRef(const Tensor& value, bool requires_grad) {
  Node node;
  node.kind = OpKind::kLeaf;
  node.external = &value;
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::Record(OpKind kind, Tensor value, std::initializer_list<Var> inputs,
                 BackwardFn backward) {
  Node node;
  node.kind = kind;
  node.value = std::move(value);
  for (const Var& in : inputs) {
    node.inputs.push_back(in.id_);
    node.requires_grad = node.requires_grad || nodes_[in.id_].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Tensor Tape::grad(Var v) const {
  const Node& node = nodes_[v.id_];
  if (node.grad.size() == 0) {
    const Tensor& val = node.external != nullptr ? *node.external : node.value;
    return Tensor::Zero(val.rows(), val.cols());
  }
  return node.grad;
}

void Tape::Backward(Var loss) {
  if (loss.tape_ != this) Fail(ErrorKind::kContract, "backward: loss belongs to another tape");
  const Tensor& lv = value(loss);
  if (lv.rows() != 1 || lv.cols() != 1) {
    Fail(ErrorKind::kContract, "backward: loss must be scalar, got " + ShapeString(lv));
  }
  for (Node& node : nodes_) node.grad.resize(0, 0);
  if (!nodes_[loss.id_].requires_grad) return;
  nodes_[loss.id_].grad = Tensor::Ones(1, 1);
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (node.grad.size() == 0 || !node.backward) continue;
    node.backward(*this, node.grad);
  }
}

// ---------------------------------------------------------------------------
// Ops

namespace {

void SameTape(Var a, Var b, const char* op) {
  if (a.tape() != b.tape() || a.tape() == nullptr) {
    Fail(ErrorKind::kContract, std::string(op) + ": operands live on different tapes");
  }
}

void SameShape(Var a, Var b, const char* op) {
  SameTape(a, b, op);
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    Fail(ErrorKind::kDimension, std::string(op) + ": shape mismatch " +
                                    ShapeString(a.value()) + " vs " + ShapeString(b.value()));
  }
}

}  // namespace

Var MatMul(Var a, Var b) {
  SameTape(a, b, "matmul");
  if (a.cols() != b.rows()) {
    Fail(ErrorKind::kDimension, "matmul: inner dimensions disagree " +
                                    ShapeString(a.value()) + " vs " + ShapeString(b.value()));
  }
  Tape& tape = *a.tape();
  Tensor out = a.value() * b.value();
  return tape.Record(OpKind::kMatMul, std::move(out), {a, b},
                     [a, b](Tape& t, const Tensor& g) {
                       if (t.requires_grad(a)) t.Accumulate(a, g * t.value(b).transpose());
                       if (t.requires_grad(b)) t.Accumulate(b, t.value(a).transpose() * g);
                     });
}

Var Add(Var a, Var b) {
  SameShape(a, b, "add");
  Tape& tape = *a.tape();
  return tape.Record(OpKind::kAdd, a.value() + b.value(), {a, b},
                     [a, b](Tape& t, const Tensor& g) {
                       t.Accumulate(a, g);
                       t.Accumulate(b, g);
                     });
}

Var Sub(Var a, Var b) {
  SameShape(a, b, "sub");
  Tape& tape = *a.tape();
  return tape.Record(OpKind::kSub, a.value() - b.value(), {a, b},
                     [a, b](Tape& t, const Tensor& g) {
                       t.Accumulate(a, g);
                       t.Accumulate(b, -g);
                     });
}

Var Mul(Var a, Var b) {
  SameShape(a, b, "mul");
  Tape& tape = *a.tape();
  Tensor out = a.value().cwiseProduct(b.value());
  return tape.Record(OpKind::kMul, std::move(out), {a, b},
                     [a, b](Tape& t, const Tensor& g) {
                       if (t.requires_grad(a)) t.Accumulate(a, g.cwiseProduct(t.value(b)));
                       if (t.requires_grad(b)) t.Accumulate(b, g.cwiseProduct(t.value(a)));
                     });
}

Var Relu(Var a) {
  Tape& tape = *a.tape();
  Tensor out = a.value().cwiseMax(0.0);
  return tape.Record(OpKind::kRelu, std::move(out), {a}, [a](Tape& t, const Tensor& g) {
    t.Accumulate(a, (t.value(a).array() > 0.0).select(g.array(), 0.0).matrix());
  });
}

Var Tanh(Var a) {
  Tape& tape = *a.tape();
  const std::size_t out_id = tape.size();
  Tensor out = a.value().array().tanh().matrix();
  return tape.Record(OpKind::kTanh, std::move(out), {a}, [a, out_id](Tape& t, const Tensor& g) {
    const Tensor& y = t.value(t.handle(out_id));
    t.Accumulate(a, (g.array() * (1.0 - y.array().square())).matrix());
  });
}

Var Exp(Var a) {
  Tape& tape = *a.tape();
  const std::size_t out_id = tape.size();
  Tensor out = a.value().array().exp().matrix();
  return tape.Record(OpKind::kExp, std::move(out), {a}, [a, out_id](Tape& t, const Tensor& g) {
    t.Accumulate(a, g.cwiseProduct(t.value(t.handle(out_id))));
  });
}

Var Scale(Var a, double s) {
  Tape& tape = *a.tape();
  return tape.Record(OpKind::kScale, a.value() * s, {a},
                     [a, s](Tape& t, const Tensor& g) { t.Accumulate(a, g * s); });
}

Var Shift(Var a, double s) {
  Tape& tape = *a.tape();
  Tensor out = (a.value().array() + s).matrix();
  return tape.Record(OpKind::kShift, std::move(out), {a},
                     [a](Tape& t, const Tensor& g) { t.Accumulate(a, g); });
}

Var AddRowBias(Var a, Var bias) {
  SameTape(a, bias, "add_row_bias");
  if (bias.rows() != 1 || bias.cols() != a.cols()) {
    Fail(ErrorKind::kDimension, "add_row_bias: shape mismatch " + ShapeString(a.value()) +
                                    " vs " + ShapeString(bias.value()));
  }
  Tape& tape = *a.tape();
  Tensor out = a.value().rowwise() + bias.value().row(0);
  return tape.Record(OpKind::kAddRowBias, std::move(out), {a, bias},
                     [a, bias](Tape& t, const Tensor& g) {
                       t.Accumulate(a, g);
                       if (t.requires_grad(bias)) t.Accumulate(bias, g.colwise().sum());
                     });
}

Var ConcatCols(Var a, Var b) {
  SameTape(a, b, "concat_cols");
  if (a.rows() != b.rows()) {
    Fail(ErrorKind::kDimension, "concat_cols: row counts differ " + ShapeString(a.value()) +
                                    " vs " + ShapeString(b.value()));
  }
  Tape& tape = *a.tape();
  const Eigen::Index ca = a.cols();
  const Eigen::Index cb = b.cols();
  Tensor out(a.rows(), ca + cb);
  out.leftCols(ca) = a.value();
  out.rightCols(cb) = b.value();
  return tape.Record(OpKind::kConcatCols, std::move(out), {a, b},
                     [a, b, ca, cb](Tape& t, const Tensor& g) {
                       if (t.requires_grad(a)) t.Accumulate(a, g.leftCols(ca));
                       if (t.requires_grad(b)) t.Accumulate(b, g.rightCols(cb));
                     });
}

Var Transpose(Var a) {
  Tape& tape = *a.tape();
  Tensor out = a.value().transpose();
  return tape.Record(OpKind::kTranspose, std::move(out), {a},
                     [a](Tape& t, const Tensor& g) { t.Accumulate(a, g.transpose()); });
}

Var Sum(Var a) {
  Tape& tape = *a.tape();
  Tensor out(1, 1);
  out(0, 0) = a.value().sum();
  const Eigen::Index r = a.rows();
  const Eigen::Index c = a.cols();
  return tape.Record(OpKind::kSum, std::move(out), {a}, [a, r, c](Tape& t, const Tensor& g) {
    t.Accumulate(a, Tensor::Constant(r, c, g(0, 0)));
  });
}

Var GatherRows(Var a, std::span<const std::size_t> rows) {
  const auto n = static_cast<std::size_t>(a.rows());
  for (std::size_t r : rows) {
    if (r >= n) {
      Fail(ErrorKind::kDimension, "gather_rows: index " + std::to_string(r) + " out of range for " +
                                      ShapeString(a.value()));
    }
  }
  Tape& tape = *a.tape();
  const Tensor& x = a.value();
  Tensor out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return tape.Record(OpKind::kGatherRows, std::move(out), {a},
                     [a, idx = std::move(idx)](Tape& t, const Tensor& g) {
                       Tensor da = Tensor::Zero(t.value(a).rows(), t.value(a).cols());
                       for (std::size_t i = 0; i < idx.size(); ++i) {
                         da.row(static_cast<Eigen::Index>(idx[i])) +=
                             g.row(static_cast<Eigen::Index>(i));
                       }
                       t.Accumulate(a, da);
                     });
}

Var ScatterSumRows(Var a, std::span<const std::size_t> targets, std::size_t out_rows) {
  if (targets.size() != static_cast<std::size_t>(a.rows())) {
    Fail(ErrorKind::kDimension, "scatter_sum_rows: " + std::to_string(targets.size()) +
                                    " targets for " + ShapeString(a.value()));
  }
  for (std::size_t r : targets) {
    if (r >= out_rows) {
      Fail(ErrorKind::kDimension, "scatter_sum_rows: target " + std::to_string(r) +
                                      " out of range for " + std::to_string(out_rows) + " rows");
    }
  }
  Tape& tape = *a.tape();
  const Tensor& x = a.value();
  Tensor out = Tensor::Zero(static_cast<Eigen::Index>(out_rows), x.cols());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    out.row(static_cast<Eigen::Index>(targets[i])) += x.row(static_cast<Eigen::Index>(i));
  }
  std::vector<std::size_t> idx(targets.begin(), targets.end());
  return tape.Record(OpKind::kScatterSumRows, std::move(out), {a},
                     [a, idx = std::move(idx)](Tape& t, const Tensor& g) {
                       Tensor da(static_cast<Eigen::Index>(idx.size()), g.cols());
                       for (std::size_t i = 0; i < idx.size(); ++i) {
                         da.row(static_cast<Eigen::Index>(i)) =
                             g.row(static_cast<Eigen::Index>(idx[i]));
                       }
                       t.Accumulate(a, da);
                     });
}

Var ScaleRows(Var a, std::span<const double> factors) {
  if (factors.size() != static_cast<std::size_t>(a.rows())) {
    Fail(ErrorKind::kContract, "scale_rows: " + std::to_string(factors.size()) +
                                   " factors for " + ShapeString(a.value()));
  }
  Tape& tape = *a.tape();
  Eigen::VectorXd f = Eigen::Map<const Eigen::VectorXd>(factors.data(),
                                                        static_cast<Eigen::Index>(factors.size()));
  Tensor out = f.asDiagonal() * a.value();
  return tape.Record(OpKind::kScaleRows, std::move(out), {a},
                     [a, f = std::move(f)](Tape& t, const Tensor& g) {
                       t.Accumulate(a, f.asDiagonal() * g);
                     });
}

Var GroupSoftmax(Var values, const RowPartition& groups) {
  const Tensor& x = values.value();
  if (groups.rows() != static_cast<std::size_t>(x.rows())) {
    Fail(ErrorKind::kContract, "group_softmax: partition covers " +
                                   std::to_string(groups.rows()) + " rows, values are " +
                                   ShapeString(x));
  }
  Tape& tape = *values.tape();
  const std::size_t out_id = tape.size();
  Tensor out(x.rows(), x.cols());
  Eigen::RowVectorXd mx(x.cols());
  Eigen::RowVectorXd total(x.cols());
  for (std::size_t gi = 0; gi < groups.num_groups(); ++gi) {
    if (groups.contiguous()) {
      const auto begin = static_cast<Eigen::Index>(groups.group_begin(gi));
      const auto len = static_cast<Eigen::Index>(groups.group_size(gi));
      auto in = x.middleRows(begin, len);
      auto o = out.middleRows(begin, len);
      mx = in.colwise().maxCoeff();
      o = (in.rowwise() - mx).array().exp().matrix();
      total = o.colwise().sum();
      o.array().rowwise() /= total.array();
      continue;
    }
    auto members = groups.group(gi);
    mx = x.row(static_cast<Eigen::Index>(members[0]));
    for (std::size_t r : members) mx = mx.cwiseMax(x.row(static_cast<Eigen::Index>(r)));
    total.setZero();
    for (std::size_t r : members) {
      auto row = static_cast<Eigen::Index>(r);
      out.row(row) = (x.row(row) - mx).array().exp().matrix();
      total += out.row(row);
    }
    for (std::size_t r : members) {
      auto row = static_cast<Eigen::Index>(r);
      out.row(row).array() /= total.array();
    }
  }
  return tape.Record(
      OpKind::kGroupSoftmax, std::move(out), {values},
      [values, groups, out_id](Tape& t, const Tensor& g) {
        const Tensor& y = t.value(t.handle(out_id));
        Tensor dx(y.rows(), y.cols());
        Eigen::RowVectorXd dot(y.cols());
        for (std::size_t gi = 0; gi < groups.num_groups(); ++gi) {
          if (groups.contiguous()) {
            const auto begin = static_cast<Eigen::Index>(groups.group_begin(gi));
            const auto len = static_cast<Eigen::Index>(groups.group_size(gi));
            auto yg = y.middleRows(begin, len);
            auto gg = g.middleRows(begin, len);
            dot = yg.cwiseProduct(gg).colwise().sum();
            dx.middleRows(begin, len) = yg.cwiseProduct(gg.rowwise() - dot);
            continue;
          }
          auto members = groups.group(gi);
          dot.setZero();
          for (std::size_t r : members) {
            auto row = static_cast<Eigen::Index>(r);
            dot += y.row(row).cwiseProduct(g.row(row));
          }
          for (std::size_t r : members) {
            auto row = static_cast<Eigen::Index>(r);
            dx.row(row) = y.row(row).cwiseProduct(g.row(row) - dot);
          }
        }
        t.Accumulate(values, dx);
      });
}

Var SoftmaxAggregate(Var messages, const NeighborLists& lists) {
  const Tensor& m = messages.value();
  const std::size_t n_out = lists.num_receivers();
  if (lists.offsets.back() != lists.neighbors.size()) {
    Fail(ErrorKind::kContract, "softmax_aggregate: offsets do not cover the neighbor array");
  }
  for (std::size_t j : lists.neighbors) {
    if (j >= static_cast<std::size_t>(m.rows())) {
      Fail(ErrorKind::kDimension, "softmax_aggregate: neighbor " + std::to_string(j) +
                                      " out of range for " + ShapeString(m));
    }
  }
  Tape& tape = *messages.tape();
  const Eigen::Index cols = m.cols();
  const std::size_t out_id = tape.size();
  // Per-edge softmax weights, kept for the backward pass.
  auto alpha = std::make_shared<Tensor>(static_cast<Eigen::Index>(lists.neighbors.size()), cols);
  Tensor out = Tensor::Zero(static_cast<Eigen::Index>(n_out), cols);
  // Shift by the per-receiver maximum, exponentiate all edges at once, then
  // normalize and aggregate receiver by receiver.
  Eigen::RowVectorXd mx(cols);
  for (std::size_t i = 0; i < n_out; ++i) {
    const std::size_t begin = lists.offsets[i];
    const std::size_t end = lists.offsets[i + 1];
    if (begin == end) continue;
    mx = m.row(static_cast<Eigen::Index>(lists.neighbors[begin]));
    for (std::size_t e = begin + 1; e < end; ++e) {
      mx = mx.cwiseMax(m.row(static_cast<Eigen::Index>(lists.neighbors[e])));
    }
    for (std::size_t e = begin; e < end; ++e) {
      alpha->row(static_cast<Eigen::Index>(e)) =
          m.row(static_cast<Eigen::Index>(lists.neighbors[e])) - mx;
    }
  }
  alpha->array() = alpha->array().exp();
  Eigen::RowVectorXd total(cols);
  for (std::size_t i = 0; i < n_out; ++i) {
    const std::size_t begin = lists.offsets[i];
    const std::size_t end = lists.offsets[i + 1];
    if (begin == end) continue;
    auto o = out.row(static_cast<Eigen::Index>(i));
    total.setZero();
    for (std::size_t e = begin; e < end; ++e) {
      const auto a = alpha->row(static_cast<Eigen::Index>(e));
      total += a;
      o += a.cwiseProduct(m.row(static_cast<Eigen::Index>(lists.neighbors[e])));
    }
    total = total.cwiseInverse();
    o = o.cwiseProduct(total);
    for (std::size_t e = begin; e < end; ++e) {
      alpha->row(static_cast<Eigen::Index>(e)) =
          alpha->row(static_cast<Eigen::Index>(e)).cwiseProduct(total);
    }
  }
  const NeighborLists* lp = &lists;
  return tape.Record(
      OpKind::kSoftmaxAggregate, std::move(out), {messages},
      [messages, lp, alpha, out_id](Tape& t, const Tensor& g) {
        const Tensor& mv = t.value(messages);
        const Tensor& agg = t.value(t.handle(out_id));
        Tensor dm = Tensor::Zero(mv.rows(), mv.cols());
        for (std::size_t i = 0; i + 1 < lp->offsets.size(); ++i) {
          const auto row = static_cast<Eigen::Index>(i);
          for (std::size_t e = lp->offsets[i]; e < lp->offsets[i + 1]; ++e) {
            const auto j = static_cast<Eigen::Index>(lp->neighbors[e]);
            // d agg_i / d m_j = alpha_ij * (1 + m_j - agg_i), channel-wise.
            dm.row(j).array() += g.row(row).array() *
                                 alpha->row(static_cast<Eigen::Index>(e)).array() *
                                 (1.0 + mv.row(j).array() - agg.row(row).array());
          }
        }
        t.Accumulate(messages, dm);
      });
}

Eigen::RowVectorXd SoftmaxRow(const Eigen::Ref<const Eigen::RowVectorXd>& logits) {
  Eigen::RowVectorXd e = (logits.array() - logits.maxCoeff()).exp().matrix();
  return e / e.sum();
}

Var CrossEntropyWithLogits(Var logits, int label) {
  const Tensor& z = logits.value();
  if (z.rows() != 1) {
    Fail(ErrorKind::kDimension, "cross_entropy: logits must be a single row, got " +
                                    ShapeString(z));
  }
  if (label < 0 || label >= z.cols()) {
    Fail(ErrorKind::kContract, "cross_entropy: label " + std::to_string(label) +
                                   " out of range for " + std::to_string(z.cols()) + " classes");
  }
  Tape& tape = *logits.tape();
  const double mx = z.maxCoeff();
  const double lse = mx + std::log((z.array() - mx).exp().sum());
  Tensor out(1, 1);
  out(0, 0) = lse - z(0, label);
  return tape.Record(OpKind::kCrossEntropy, std::move(out), {logits},
                     [logits, label](Tape& t, const Tensor& g) {
                       Tensor d = SoftmaxRow(t.value(logits).row(0));
                       d(0, label) -= 1.0;
                       t.Accumulate(logits, d * g(0, 0));
                     });
}

}  // namespace domaingcn
