#pragma once

#include <Eigen/Dense>
#include <deque>
#include <functional>
#include <utility>
#include <vector>

namespace lfr::ad {

using Matrix = Eigen::MatrixXd;

class Tape;

/// Handle into a tape. Cheap to copy; valid while the tape is alive.
class Var {
 public:
  Var() = default;
  const Matrix& value() const;
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int index) : tape_(tape), index_(index) {}
  Tape* tape_ = nullptr;
  int index_ = -1;
};

/// Per-output-row bilinear taps for gather_rows: (source row, weight) pairs.
using GatherTaps = std::vector<std::vector<std::pair<int, double>>>;

/// Reverse-mode tape over dense double matrices. Values are computed
/// eagerly; backward() walks the recorded nodes in reverse. Leaves either
/// own their value (constants) or reference caller-owned storage (params,
/// cached feature maps), which avoids copying parameters into every tape.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf referencing external storage; the matrix must outlive the tape.
  Var leaf(const Matrix& external, bool requires_grad);
  /// Owned constant (no gradient).
  Var constant(Matrix value);

  const Matrix& value(Var v) const { return *nodes_[v.index_].value; }
  /// Gradient of a leaf/node after backward(). Empty if it never received one.
  const Matrix& grad(Var v) const { return nodes_[v.index_].grad; }

  /// Seeds the (1x1) output and propagates. May be called once per tape.
  void backward(Var output, double seed = 1.0);

  // Elementwise / structural ops.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var scale(Var a, double s);
  Var add_row_broadcast(Var x, Var row);      // row is 1 x C
  Var repeat_row(Var row, int n);             // 1 x C -> n x C
  Var concat_cols(const std::vector<Var>& parts);
  Var concat_rows(const std::vector<Var>& parts);
  Var gather_rows(Var x, const GatherTaps& taps);

  // Matrix products.
  Var matmul(Var a, Var b);     // A B
  Var matmul_nt(Var a, Var b);  // A B^T
  Var matmul_tn(Var a, Var b);  // A^T B

  // Nonlinearities and normalizations.
  Var gelu(Var x);
  Var sigmoid(Var x);
  Var softmax_rows(Var x);  // max-subtracted, per row
  Var layernorm_rows(Var x, Var gamma, Var beta, double eps = 1e-5);

  /// Mean over all entries of (a - target)^2, as a 1x1 node.
  Var mean_sq(Var a, const Matrix& target);

  size_t size() const { return nodes_.size(); }

 private:
  friend class Var;

  struct Node {
    Matrix storage;
    const Matrix* value = nullptr;
    Matrix grad;
    bool requires_grad = false;
    std::function<void(const Matrix&)> backward;
  };

  Var push(Matrix value, bool requires_grad,
           std::function<void(const Matrix&)> backward);
  void accumulate(int index, const Matrix& g);
  bool needs_grad(Var v) const { return nodes_[v.index_].requires_grad; }
  const Matrix& val(Var v) const { return *nodes_[v.index_].value; }

  // Deque keeps node addresses stable, so value pointers into a node's own
  // storage survive growth.
  std::deque<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape_->value(*this); }

}  // namespace lfr::ad
