#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bayman/linalg.hpp"

namespace bayman {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; the tape owns the storage.
class Tensor {
 public:
  Tensor() = default;

  const Matrix& value() const;
  /// Accumulated gradient buffer; only valid for requires-grad tensors.
  const Matrix& grad() const;
  bool requires_grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  bool valid() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  int id() const { return node_; }

 private:
  friend class Tape;
  Tensor(Tape* tape, int node) : tape_(tape), node_(node) {}
  Tape* tape_ = nullptr;
  int node_ = -1;
};

/// Append-only record of forward operations, replayed in reverse to
/// accumulate adjoints. One tape per forward computation; independent
/// tapes may run on different threads, a single tape may not.
class Tape {
 public:
  using BackwardFn =
      std::function<void(const Matrix& out_adjoint, std::vector<Matrix>& adjoints)>;

  Tensor variable(Matrix value, bool requires_grad = true);
  Tensor constant(Matrix value) { return variable(std::move(value), false); }
  Tensor scalar(double v);

  /// Propagates d(loss)/d(node) from the scalar loss backward and *adds*
  /// the result into each requires-grad node's gradient buffer; repeated
  /// calls accumulate.
  void backward(const Tensor& loss);

  std::size_t size() const { return nodes_.size(); }

  /// When enabled, every emitted value is checked for NaN/Inf.
  void set_check_finite(bool on) { check_finite_ = on; }

  // Plumbing for the op builders below.
  Tensor emit(const char* op, Matrix value, std::vector<int> parents, BackwardFn fn);
  const Matrix& value_at(int node) const { return nodes_[static_cast<std::size_t>(node)].value; }

 private:
  friend class Tensor;
  struct Node {
    Matrix value;
    Matrix grad;  // allocated (zero) for requires-grad nodes
    bool requires_grad = false;
    std::vector<int> parents;
    BackwardFn backward;
  };
  const Node& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  Node& node(int i) { return nodes_[static_cast<std::size_t>(i)]; }

  std::vector<Node> nodes_;
  bool check_finite_ = false;
};

// ---- forward operations -------------------------------------------------
// Each op validates shapes (throwing std::invalid_argument naming the op
// and both shapes) and records its adjoint rule on the tape.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);       // row-broadcast of a 1xn operand
Tensor subtract(const Tensor& a, const Tensor& b);  // likewise
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor hadamard_rowvec(const Tensor& a, const Tensor& v);  // v is 1xn, broadcast over rows
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor scale(const Tensor& a, double c);
Tensor relu(const Tensor& a);  // subgradient 0 at exactly 0
Tensor tanh_act(const Tensor& a);
Tensor row_softmax(const Tensor& a);  // max-subtracted for stability
Tensor gather_rows(const Tensor& a, std::vector<int> rows);
Tensor scatter_cols(const Tensor& a, std::vector<int> cols, Eigen::Index n);
Tensor sum_rows(const Tensor& a);  // m x n -> 1 x n
Tensor sum_all(const Tensor& a);   // -> 1 x 1
Tensor log_elementwise(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);  // zero gradient where clamped

inline Tensor operator*(const Tensor& a, const Tensor& b) { return matmul(a, b); }
inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return subtract(a, b); }

// ---- gradient checking ----------------------------------------------------

struct FdCheckReport {
  double max_rel_err = 0.0;
  int param = -1;  // index into the parameter list
  Eigen::Index row = 0, col = 0;
  double fd = 0.0, ad = 0.0;  // gradients at the worst entry
};

/// Builds a scalar loss from leaf tensors created over `params`.
using ScalarFn = std::function<Tensor(Tape&, const std::vector<Tensor>&)>;

/// Central-difference check of reverse-mode gradients, entry by entry.
/// Relative error uses max(|fd|, |ad|, 1e-8) as the denominator. Throws if
/// two forward evaluations at the same point disagree (non-deterministic f).
FdCheckReport finite_difference_check(const ScalarFn& f, std::vector<Matrix> params,
                                      double h = 1e-5);

/// CSV dump of a value, one row per line. Debug aid.
void dump_csv(const Matrix& m, std::ostream& out);

}  // namespace bayman
