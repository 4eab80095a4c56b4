#include "bayman/tensor.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <unordered_set>

namespace bayman {
namespace {

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " + shape_str(a) +
                              " and " + shape_str(b));
}

void require_same_tape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.tape() != b.tape()) {
    throw std::logic_error(std::string(op) + ": operands live on different tapes");
  }
}

void accumulate(std::vector<Matrix>& adjoints, int idx, const Matrix& delta) {
  Matrix& slot = adjoints[static_cast<std::size_t>(idx)];
  if (slot.size() == 0) {
    slot = delta;
  } else {
    slot += delta;
  }
}

}  // namespace

const Matrix& Tensor::value() const {
  if (!tape_) throw std::logic_error("Tensor: empty handle");
  return tape_->value_at(node_);
}

const Matrix& Tensor::grad() const {
  if (!tape_) throw std::logic_error("Tensor: empty handle");
  if (!requires_grad()) throw std::logic_error("Tensor::grad: tensor does not require gradients");
  return tape_->node(node_).grad;
}

bool Tensor::requires_grad() const {
  if (!tape_) return false;
  return tape_->node(node_).requires_grad;
}

Tensor Tape::variable(Matrix value, bool requires_grad) {
  Node n;
  if (requires_grad) n.grad = Matrix::Zero(value.rows(), value.cols());
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Tensor(this, static_cast<int>(nodes_.size()) - 1);
}

Tensor Tape::scalar(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

Tensor Tape::emit(const char* op, Matrix value, std::vector<int> parents, BackwardFn fn) {
  if (check_finite_ && !value.allFinite()) {
    throw std::runtime_error(std::string(op) + ": produced a non-finite value");
  }
  Node n;
  n.parents = std::move(parents);
  for (int p : n.parents) {
    n.requires_grad = n.requires_grad || node(p).requires_grad;
  }
  if (n.requires_grad) {
    n.grad = Matrix::Zero(value.rows(), value.cols());
    n.backward = std::move(fn);
  }
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Tensor(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::backward(const Tensor& loss) {
  if (loss.tape() != this) throw std::logic_error("backward: loss from a different tape");
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw std::invalid_argument("backward: loss must be a 1x1 scalar, got " +
                                shape_str(loss.value()));
  }
  const int loss_idx = loss.id();
  std::vector<Matrix> adjoints(nodes_.size());
  adjoints[static_cast<std::size_t>(loss_idx)] = Matrix::Ones(1, 1);
  for (int i = loss_idx; i >= 0; --i) {
    Node& n = node(i);
    const Matrix& adj = adjoints[static_cast<std::size_t>(i)];
    if (adj.size() == 0 || !n.requires_grad) continue;
    if (n.backward) n.backward(adj, adjoints);
    n.grad += adj;
  }
}

// ---- ops --------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_same_tape("matmul", a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows()) shape_error("matmul", av, bv);
  Tape* t = a.tape();
  const int ia = a.id(), ib = b.id();
  return t->emit("matmul", av * bv, {ia, ib},
                 [t, ia, ib](const Matrix& g, std::vector<Matrix>& adj) {
                   accumulate(adj, ia, g * t->value_at(ib).transpose());
                   accumulate(adj, ib, t->value_at(ia).transpose() * g);
                 });
}

namespace {

enum class Broadcast { Equal, ARow, BRow };

Broadcast broadcast_kind(const char* op, const Matrix& a, const Matrix& b) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::Equal;
  if (a.rows() == 1 && b.cols() == a.cols()) return Broadcast::ARow;
  if (b.rows() == 1 && a.cols() == b.cols()) return Broadcast::BRow;
  shape_error(op, a, b);
}

Matrix reduce_rows(const Matrix& g) { return g.colwise().sum(); }

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_tape("add", a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  const Broadcast kind = broadcast_kind("add", av, bv);
  Matrix out;
  switch (kind) {
    case Broadcast::Equal: out = av + bv; break;
    case Broadcast::ARow: out = bv.rowwise() + av.row(0); break;
    case Broadcast::BRow: out = av.rowwise() + bv.row(0); break;
  }
  Tape* t = a.tape();
  const int ia = a.id(), ib = b.id();
  return t->emit("add", std::move(out), {ia, ib},
                 [ia, ib, kind](const Matrix& g, std::vector<Matrix>& adj) {
                   accumulate(adj, ia, kind == Broadcast::ARow ? reduce_rows(g) : g);
                   accumulate(adj, ib, kind == Broadcast::BRow ? reduce_rows(g) : g);
                 });
}

Tensor subtract(const Tensor& a, const Tensor& b) {
  require_same_tape("subtract", a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  const Broadcast kind = broadcast_kind("subtract", av, bv);
  Matrix out;
  switch (kind) {
    case Broadcast::Equal: out = av - bv; break;
    case Broadcast::ARow: out = (-bv).rowwise() + av.row(0); break;
    case Broadcast::BRow: out = av.rowwise() - bv.row(0); break;
  }
  Tape* t = a.tape();
  const int ia = a.id(), ib = b.id();
  return t->emit("subtract", std::move(out), {ia, ib},
                 [ia, ib, kind](const Matrix& g, std::vector<Matrix>& adj) {
                   accumulate(adj, ia, kind == Broadcast::ARow ? reduce_rows(g) : g);
                   accumulate(adj, ib,
                              kind == Broadcast::BRow ? Matrix(-reduce_rows(g)) : Matrix(-g));
                 });
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  require_same_tape("hadamard", a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.rows() != bv.rows() || av.cols() != bv.cols()) shape_error("hadamard", av, bv);
  Tape* t = a.tape();
  const int ia = a.id(), ib = b.id();
  return t->emit("hadamard", av.cwiseProduct(bv), {ia, ib},
                 [t, ia, ib](const Matrix& g, std::vector<Matrix>& adj) {
                   accumulate(adj, ia, g.cwiseProduct(t->value_at(ib)));
                   accumulate(adj, ib, g.cwiseProduct(t->value_at(ia)));
                 });
}

Tensor hadamard_rowvec(const Tensor& a, const Tensor& v) {
  require_same_tape("hadamard_rowvec", a, v);
  const Matrix& av = a.value();
  const Matrix& vv = v.value();
  if (vv.rows() != 1 || vv.cols() != av.cols()) shape_error("hadamard_rowvec", av, vv);
  Tape* t = a.tape();
  const int ia = a.id(), iv = v.id();
  Matrix out = av.array().rowwise() * vv.row(0).array();
  return t->emit("hadamard_rowvec", std::move(out), {ia, iv},
                 [t, ia, iv](const Matrix& g, std::vector<Matrix>& adj) {
                   accumulate(adj, ia,
                              (g.array().rowwise() * t->value_at(iv).row(0).array()).matrix());
                   accumulate(adj, iv, (g.cwiseProduct(t->value_at(ia))).colwise().sum());
                 });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require_same_tape("concat_cols", a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.rows() != bv.rows()) shape_error("concat_cols", av, bv);
  Matrix out(av.rows(), av.cols() + bv.cols());
  out << av, bv;
  Tape* t = a.tape();
  const int ia = a.id(), ib = b.id();
  const Eigen::Index ca = av.cols(), cb = bv.cols();
  return t->emit("concat_cols", std::move(out), {ia, ib},
                 [ia, ib, ca, cb](const Matrix& g, std::vector<Matrix>& adj) {
                   accumulate(adj, ia, g.leftCols(ca));
                   accumulate(adj, ib, g.rightCols(cb));
                 });
}

Tensor transpose(const Tensor& a) {
  Tape* t = a.tape();
  const int ia = a.id();
  return t->emit("transpose", a.value().transpose(), {ia},
                 [ia](const Matrix& g, std::vector<Matrix>& adj) {
                   accumulate(adj, ia, g.transpose());
                 });
}

Tensor scale(const Tensor& a, double c) {
  Tape* t = a.tape();
  const int ia = a.id();
  return t->emit("scale", a.value() * c, {ia},
                 [ia, c](const Matrix& g, std::vector<Matrix>& adj) {
                   accumulate(adj, ia, g * c);
                 });
}

Tensor relu(const Tensor& a) {
  Tape* t = a.tape();
  const int ia = a.id();
  return t->emit("relu", a.value().cwiseMax(0.0), {ia},
                 [t, ia](const Matrix& g, std::vector<Matrix>& adj) {
                   const Matrix mask = (t->value_at(ia).array() > 0.0).cast<double>();
                   accumulate(adj, ia, g.cwiseProduct(mask));
                 });
}

Tensor tanh_act(const Tensor& a) {
  Tape* t = a.tape();
  const int ia = a.id();
  const int iout = static_cast<int>(t->size());
  Matrix out = a.value().array().tanh();
  return t->emit("tanh_act", std::move(out), {ia},
                 [t, ia, iout](const Matrix& g, std::vector<Matrix>& adj) {
                   const auto& th = t->value_at(iout).array();
                   accumulate(adj, ia, (g.array() * (1.0 - th.square())).matrix());
                 });
}

Tensor row_softmax(const Tensor& a) {
  const Matrix& av = a.value();
  Matrix out(av.rows(), av.cols());
  for (Eigen::Index i = 0; i < av.rows(); ++i) {
    const double mx = av.row(i).maxCoeff();
    out.row(i) = (av.row(i).array() - mx).exp();
    out.row(i) /= out.row(i).sum();
  }
  Tape* t = a.tape();
  const int ia = a.id();
  const int iout = static_cast<int>(t->size());
  return t->emit("row_softmax", std::move(out), {ia},
                 [t, ia, iout](const Matrix& g, std::vector<Matrix>& adj) {
                   const Matrix& s = t->value_at(iout);
                   const Vector dot = (g.cwiseProduct(s)).rowwise().sum();
                   Matrix centered = g;
                   centered.colwise() -= dot;
                   accumulate(adj, ia, s.cwiseProduct(centered));
                 });
}

Tensor gather_rows(const Tensor& a, std::vector<int> rows) {
  const Matrix& av = a.value();
  for (int r : rows) {
    if (r < 0 || r >= av.rows()) {
      throw std::invalid_argument("gather_rows: index " + std::to_string(r) +
                                  " out of range for " + shape_str(av));
    }
  }
  Matrix out(static_cast<Eigen::Index>(rows.size()), av.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.row(static_cast<Eigen::Index>(k)) = av.row(rows[k]);
  }
  Tape* t = a.tape();
  const int ia = a.id();
  const Eigen::Index src_rows = av.rows(), src_cols = av.cols();
  return t->emit("gather_rows", std::move(out), {ia},
                 [ia, rows = std::move(rows), src_rows,
                  src_cols](const Matrix& g, std::vector<Matrix>& adj) {
                   Matrix da = Matrix::Zero(src_rows, src_cols);
                   for (std::size_t k = 0; k < rows.size(); ++k) {
                     da.row(rows[k]) += g.row(static_cast<Eigen::Index>(k));
                   }
                   accumulate(adj, ia, da);
                 });
}

Tensor scatter_cols(const Tensor& a, std::vector<int> cols, Eigen::Index n) {
  const Matrix& av = a.value();
  if (static_cast<Eigen::Index>(cols.size()) != av.cols()) {
    throw std::invalid_argument("scatter_cols: got " + std::to_string(cols.size()) +
                                " target columns for " + shape_str(av));
  }
  std::unordered_set<int> seen;
  for (int c : cols) {
    if (c < 0 || c >= n) {
      throw std::invalid_argument("scatter_cols: column " + std::to_string(c) +
                                  " out of range [0, " + std::to_string(n) + ")");
    }
    if (!seen.insert(c).second) {
      throw std::invalid_argument("scatter_cols: duplicate target column " + std::to_string(c));
    }
  }
  Matrix out = Matrix::Zero(av.rows(), n);
  for (std::size_t k = 0; k < cols.size(); ++k) {
    out.col(cols[k]) = av.col(static_cast<Eigen::Index>(k));
  }
  Tape* t = a.tape();
  const int ia = a.id();
  return t->emit("scatter_cols", std::move(out), {ia},
                 [ia, cols = std::move(cols)](const Matrix& g, std::vector<Matrix>& adj) {
                   Matrix da(g.rows(), static_cast<Eigen::Index>(cols.size()));
                   for (std::size_t k = 0; k < cols.size(); ++k) {
                     da.col(static_cast<Eigen::Index>(k)) = g.col(cols[k]);
                   }
                   accumulate(adj, ia, da);
                 });
}

Tensor sum_rows(const Tensor& a) {
  const Matrix& av = a.value();
  Tape* t = a.tape();
  const int ia = a.id();
  const Eigen::Index m = av.rows();
  return t->emit("sum_rows", av.colwise().sum(), {ia},
                 [ia, m](const Matrix& g, std::vector<Matrix>& adj) {
                   accumulate(adj, ia, g.replicate(m, 1));
                 });
}

Tensor sum_all(const Tensor& a) {
  const Matrix& av = a.value();
  Matrix out(1, 1);
  out(0, 0) = av.sum();
  Tape* t = a.tape();
  const int ia = a.id();
  const Eigen::Index m = av.rows(), n = av.cols();
  return t->emit("sum_all", std::move(out), {ia},
                 [ia, m, n](const Matrix& g, std::vector<Matrix>& adj) {
                   accumulate(adj, ia, Matrix::Constant(m, n, g(0, 0)));
                 });
}

Tensor log_elementwise(const Tensor& a) {
  Tape* t = a.tape();
  const int ia = a.id();
  Matrix out = a.value().array().log();
  return t->emit("log", std::move(out), {ia},
                 [t, ia](const Matrix& g, std::vector<Matrix>& adj) {
                   accumulate(adj, ia, (g.array() / t->value_at(ia).array()).matrix());
                 });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("clamp: lo must be <= hi");
  Tape* t = a.tape();
  const int ia = a.id();
  Matrix out = a.value().cwiseMax(lo).cwiseMin(hi);
  return t->emit("clamp", std::move(out), {ia},
                 [t, ia, lo, hi](const Matrix& g, std::vector<Matrix>& adj) {
                   const auto& av = t->value_at(ia).array();
                   const Matrix mask = ((av >= lo) && (av <= hi)).cast<double>();
                   accumulate(adj, ia, g.cwiseProduct(mask));
                 });
}

// ---- finite differences ------------------------------------------------------

namespace {

double evaluate_value(const ScalarFn& f, const std::vector<Matrix>& params) {
  Tape tape;
  std::vector<Tensor> leaves;
  leaves.reserve(params.size());
  for (const Matrix& p : params) leaves.push_back(tape.constant(p));
  const Tensor loss = f(tape, leaves);
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw std::invalid_argument("finite_difference_check: f must return a scalar");
  }
  return loss.value()(0, 0);
}

}  // namespace

FdCheckReport finite_difference_check(const ScalarFn& f, std::vector<Matrix> params, double h) {
  if (h <= 0.0) throw std::invalid_argument("finite_difference_check: h must be positive");

  const double probe1 = evaluate_value(f, params);
  const double probe2 = evaluate_value(f, params);
  if (probe1 != probe2) {
    throw std::runtime_error("finite_difference_check: f is not deterministic");
  }

  // Reverse-mode gradients in one pass.
  Tape tape;
  std::vector<Tensor> leaves;
  leaves.reserve(params.size());
  for (const Matrix& p : params) leaves.push_back(tape.variable(p, true));
  const Tensor loss = f(tape, leaves);
  tape.backward(loss);

  FdCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    const Matrix ad = leaves[pi].grad();
    Matrix& p = params[pi];
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      for (Eigen::Index c = 0; c < p.cols(); ++c) {
        const double saved = p(r, c);
        p(r, c) = saved + h;
        const double up = evaluate_value(f, params);
        p(r, c) = saved - h;
        const double down = evaluate_value(f, params);
        p(r, c) = saved;
        const double fd = (up - down) / (2.0 * h);
        const double err = std::abs(fd - ad(r, c)) /
                           std::max({std::abs(fd), std::abs(ad(r, c)), 1e-8});
        if (err > report.max_rel_err) {
          report.max_rel_err = err;
          report.param = static_cast<int>(pi);
          report.row = r;
          report.col = c;
          report.fd = fd;
          report.ad = ad(r, c);
        }
      }
    }
  }
  return report;
}

void dump_csv(const Matrix& m, std::ostream& out) {
  char buf[64];
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), m(r, c));
      if (c) out << ',';
      out.write(buf, static_cast<std::streamsize>(ptr - buf));
    }
    out << '\n';
  }
}

}  // namespace bayman
