#pragma once

// Reverse-mode differentiation over dense matrices and CSR-patterned edge
// values. A Tape records operations in execution order; backward() replays
// them in exact reverse. Everything here is single-threaded.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mgccn/errors.hpp"
#include "mgccn/sparse.hpp"

namespace mgccn {

// A trainable matrix that outlives any single tape.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape;

// Handle to a value recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  Index id = 0;

  const Matrix& value() const;
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
};

class Tape {
 public:
  // Receives the upstream adjoint of the node and the adjoint table; adds the
  // node's contribution to its parents' adjoints.
  using BackwardFn = std::function<void(const Matrix& upstream, Tape& tape)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Value that never receives a gradient.
  Var constant(Matrix value) { return push(std::move(value), nullptr, false, nullptr); }

  // Differentiable input owned by the tape.
  Var leaf(Matrix value) { return push(std::move(value), nullptr, true, nullptr); }

  // Differentiable input whose gradient is also added to p.grad on backward.
  Var parameter(Parameter& p) { return push(p.value, nullptr, true, &p); }

  Var record(Matrix value, BackwardFn fn) { return push(std::move(value), std::move(fn), true, nullptr); }

  const Matrix& value(Index id) const { return nodes_.at(id).value; }

  const Matrix& grad(Index id) {
    auto& node = nodes_.at(id);
    if (node.grad.size() != node.value.size()) node.grad = Matrix::Zero(node.value.rows(), node.value.cols());
    return node.grad;
  }

  bool requires_grad(Index id) const { return nodes_.at(id).requires_grad; }
  Index size() const { return nodes_.size(); }

  // Adds `contribution` to the adjoint of node `id`. Only valid inside backward.
  template <typename Expr>
  void accumulate(Index id, const Expr& contribution) {
    auto& node = nodes_[id];
    if (!node.requires_grad) return;
    auto& adj = adjoints_[id];
    if (adj.size() == 0) {
      adj = contribution;
    } else {
      adj += contribution;
    }
  }

  // Seeds d root / d root = 1 and accumulates gradients into every reachable
  // node's grad slot (and bound Parameters). Repeated calls add up.
  void backward(Var root) {
    if (root.tape != this) throw ShapeError("backward: root belongs to another tape");
    const auto& rv = value(root.id);
    if (rv.rows() != 1 || rv.cols() != 1) throw ShapeError("backward: root is not a 1x1 scalar");
    adjoints_.assign(nodes_.size(), Matrix());
    adjoints_[root.id] = Matrix::Ones(1, 1);
    for (Index k = root.id + 1; k-- > 0;) {
      auto& node = nodes_[k];
      if (adjoints_[k].size() == 0) continue;
      if (node.backward) node.backward(adjoints_[k], *this);
      const Matrix& adj = adjoints_[k];
      if (node.grad.size() != node.value.size()) node.grad = Matrix::Zero(node.value.rows(), node.value.cols());
      node.grad += adj;
      if (node.param) node.param->grad += adj;
    }
    adjoints_.clear();
  }

  void zero_grads() {
    for (auto& node : nodes_) {
      if (node.grad.size() != 0) node.grad.setZero();
    }
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    BackwardFn backward;
    bool requires_grad = false;
    Parameter* param = nullptr;
  };

  Var push(Matrix value, BackwardFn fn, bool requires_grad, Parameter* param) {
    nodes_.push_back(Node{std::move(value), Matrix(), std::move(fn), requires_grad, param});
    return Var{this, nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
  std::vector<Matrix> adjoints_;
};

inline const Matrix& Var::value() const { return tape->value(id); }
inline const Matrix& Var::grad() const { return tape->grad(id); }

namespace detail {

inline void require_same_tape(Var a, Var b, const char* op) {
  if (a.tape != b.tape || a.tape == nullptr) throw ShapeError(std::string(op) + ": operands on different tapes");
}

inline void require_same_shape(Var a, Var b, const char* op) {
  require_same_tape(a, b, op);
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
}

inline void require_edge_vector(const CsrMatrix& pattern, Var e, const char* op) {
  if (static_cast<Index>(e.rows()) != pattern.nnz() || e.cols() != 1) {
    throw ShapeError(std::string(op) + ": expected " + std::to_string(pattern.nnz()) + "x1 edge values");
  }
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

// ---------------------------------------------------------------- dense ops

inline Var matmul(Var a, Var b) {
  detail::require_same_tape(a, b, "matmul");
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions differ");
  Matrix out = a.value() * b.value();
  return a.tape->record(std::move(out), [a, b](const Matrix& g, Tape& t) {
    if (t.requires_grad(a.id)) t.accumulate(a.id, Matrix(g * t.value(b.id).transpose()));
    if (t.requires_grad(b.id)) t.accumulate(b.id, Matrix(t.value(a.id).transpose() * g));
  });
}

inline Var add(Var a, Var b) {
  detail::require_same_shape(a, b, "add");
  return a.tape->record(a.value() + b.value(), [a, b](const Matrix& g, Tape& t) {
    t.accumulate(a.id, g);
    t.accumulate(b.id, g);
  });
}

inline Var sub(Var a, Var b) {
  detail::require_same_shape(a, b, "sub");
  return a.tape->record(a.value() - b.value(), [a, b](const Matrix& g, Tape& t) {
    t.accumulate(a.id, g);
    t.accumulate(b.id, Matrix(-g));
  });
}

inline Var hadamard(Var a, Var b) {
  detail::require_same_shape(a, b, "hadamard");
  return a.tape->record(a.value().cwiseProduct(b.value()), [a, b](const Matrix& g, Tape& t) {
    if (t.requires_grad(a.id)) t.accumulate(a.id, Matrix(g.cwiseProduct(t.value(b.id))));
    if (t.requires_grad(b.id)) t.accumulate(b.id, Matrix(g.cwiseProduct(t.value(a.id))));
  });
}

inline Var scale(Var a, double s) {
  return a.tape->record(s * a.value(), [a, s](const Matrix& g, Tape& t) { t.accumulate(a.id, Matrix(s * g)); });
}

// Elementwise logistic function.
inline Var sigmoid(Var a) {
  Matrix out = a.value().unaryExpr([](double x) { return detail::sigmoid(x); });
  const Index out_id = a.tape->size();
  return a.tape->record(std::move(out), [a, out_id](const Matrix& g, Tape& t) {
    const Matrix& y = t.value(out_id);
    t.accumulate(a.id, Matrix(g.array() * y.array() * (1.0 - y.array())));
  });
}

// Elementwise log(max(x, floor)); no gradient flows through clamped entries.
inline Var log_clamped(Var a, double floor) {
  Matrix out = a.value().unaryExpr([floor](double x) { return std::log(std::max(x, floor)); });
  return a.tape->record(std::move(out), [a, floor](const Matrix& g, Tape& t) {
    const Matrix& x = t.value(a.id);
    Matrix d = x.binaryExpr(g, [floor](double xv, double gv) { return xv > floor ? gv / xv : 0.0; });
    t.accumulate(a.id, d);
  });
}

inline Var sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape->record(std::move(out), [a](const Matrix& g, Tape& t) {
    const Matrix& x = t.value(a.id);
    t.accumulate(a.id, Matrix::Constant(x.rows(), x.cols(), g(0, 0)));
  });
}

inline Var frobenius_sq(Var a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().squaredNorm();
  return a.tape->record(std::move(out), [a](const Matrix& g, Tape& t) {
    t.accumulate(a.id, Matrix(2.0 * g(0, 0) * t.value(a.id)));
  });
}

// Divides each row by max(||row||, eps).
inline Var row_l2_normalize(Var a, double eps = 1e-12) {
  const Matrix& x = a.value();
  Vector norms(x.rows());
  Matrix out = x;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    norms(i) = std::max(x.row(i).norm(), eps);
    out.row(i) /= norms(i);
  }
  const Index out_id = a.tape->size();
  return a.tape->record(std::move(out), [a, out_id, norms, eps](const Matrix& g, Tape& t) {
    const Matrix& y = t.value(out_id);
    const Matrix& xv = t.value(a.id);
    Matrix d(g.rows(), g.cols());
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      if (xv.row(i).norm() > eps) {
        d.row(i) = (g.row(i) - y.row(i) * y.row(i).dot(g.row(i))) / norms(i);
      } else {
        d.row(i) = g.row(i) / norms(i);
      }
    }
    t.accumulate(a.id, d);
  });
}

// ---------------------------------------------------------------- graph ops

// a_hat * h for a fixed sparse matrix. `a_hat` must outlive the tape.
inline Var spmm(const CsrMatrix& a_hat, Var h) {
  if (a_hat.cols() != static_cast<Index>(h.rows())) throw ShapeError("spmm: inner dimensions differ");
  const CsrMatrix* a = &a_hat;
  return h.tape->record(a_hat.multiply(h.value()), [a, h](const Matrix& g, Tape& t) {
    t.accumulate(h.id, a->transpose_multiply(g));
  });
}

// For every stored (i, j) of `pattern`: left[i] + right[j]. Output is nnz x 1.
inline Var edge_scores(const CsrMatrix& pattern, Var left, Var right) {
  detail::require_same_tape(left, right, "edge_scores");
  const Index n = pattern.rows();
  if (static_cast<Index>(left.rows()) != n || static_cast<Index>(right.rows()) != pattern.cols() ||
      left.cols() != 1 || right.cols() != 1) {
    throw ShapeError("edge_scores: expected per-node column vectors");
  }
  const CsrMatrix* p = &pattern;
  Matrix out(static_cast<Eigen::Index>(pattern.nnz()), 1);
  const Matrix& l = left.value();
  const Matrix& r = right.value();
  for (Index i = 0; i < n; ++i) {
    for (Index k = pattern.row_ptr()[i]; k < pattern.row_ptr()[i + 1]; ++k) {
      out(static_cast<Eigen::Index>(k), 0) =
          l(static_cast<Eigen::Index>(i), 0) + r(static_cast<Eigen::Index>(pattern.col_idx()[k]), 0);
    }
  }
  return left.tape->record(std::move(out), [p, left, right](const Matrix& g, Tape& t) {
    Matrix gl = Matrix::Zero(static_cast<Eigen::Index>(p->rows()), 1);
    Matrix gr = Matrix::Zero(static_cast<Eigen::Index>(p->cols()), 1);
    for (Index i = 0; i < p->rows(); ++i) {
      for (Index k = p->row_ptr()[i]; k < p->row_ptr()[i + 1]; ++k) {
        const double gk = g(static_cast<Eigen::Index>(k), 0);
        gl(static_cast<Eigen::Index>(i), 0) += gk;
        gr(static_cast<Eigen::Index>(p->col_idx()[k]), 0) += gk;
      }
    }
    t.accumulate(left.id, gl);
    t.accumulate(right.id, gr);
  });
}

// Row-wise softmax over the stored entries of each row, shifted by the row
// maximum before exponentiation. Rows must be non-empty.
inline std::vector<double> neighborhood_softmax(const CsrMatrix& pattern, std::span<const double> scores) {
  if (scores.size() != pattern.nnz()) throw ShapeError("neighborhood_softmax: score count differs from nnz");
  std::vector<double> out(scores.size());
  for (Index i = 0; i < pattern.rows(); ++i) {
    const Index begin = pattern.row_ptr()[i], end = pattern.row_ptr()[i + 1];
    if (begin == end) continue;
    double mx = -std::numeric_limits<double>::infinity();
    for (Index k = begin; k < end; ++k) mx = std::max(mx, scores[k]);
    double total = 0.0;
    for (Index k = begin; k < end; ++k) {
      out[k] = std::exp(scores[k] - mx);
      total += out[k];
    }
    for (Index k = begin; k < end; ++k) out[k] /= total;
  }
  return out;
}

inline Var neighborhood_softmax(const CsrMatrix& pattern, Var scores) {
  detail::require_edge_vector(pattern, scores, "neighborhood_softmax");
  const auto& sv = scores.value();
  auto coeffs = neighborhood_softmax(pattern, std::span<const double>(sv.data(), static_cast<Index>(sv.size())));
  Matrix out = Eigen::Map<const Matrix>(coeffs.data(), static_cast<Eigen::Index>(coeffs.size()), 1);
  const CsrMatrix* p = &pattern;
  const Index out_id = scores.tape->size();
  return scores.tape->record(std::move(out), [p, scores, out_id](const Matrix& g, Tape& t) {
    const Matrix& a = t.value(out_id);
    Matrix d(g.rows(), 1);
    for (Index i = 0; i < p->rows(); ++i) {
      const auto begin = static_cast<Eigen::Index>(p->row_ptr()[i]);
      const auto end = static_cast<Eigen::Index>(p->row_ptr()[i + 1]);
      double dot = 0.0;
      for (auto k = begin; k < end; ++k) dot += a(k, 0) * g(k, 0);
      for (auto k = begin; k < end; ++k) d(k, 0) = a(k, 0) * (g(k, 0) - dot);
    }
    t.accumulate(scores.id, d);
  });
}

// out_i = sum_{j in row i} w_ij x_j, with w given per stored entry (nnz x 1).
inline Var weighted_spmm(const CsrMatrix& pattern, Var weights, Var x) {
  detail::require_same_tape(weights, x, "weighted_spmm");
  detail::require_edge_vector(pattern, weights, "weighted_spmm");
  if (static_cast<Index>(x.rows()) != pattern.cols()) throw ShapeError("weighted_spmm: inner dimensions differ");
  const Matrix& w = weights.value();
  const Matrix& xv = x.value();
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(pattern.rows()), xv.cols());
  for (Index i = 0; i < pattern.rows(); ++i) {
    auto row = out.row(static_cast<Eigen::Index>(i));
    for (Index k = pattern.row_ptr()[i]; k < pattern.row_ptr()[i + 1]; ++k) {
      row.noalias() += w(static_cast<Eigen::Index>(k), 0) * xv.row(static_cast<Eigen::Index>(pattern.col_idx()[k]));
    }
  }
  const CsrMatrix* p = &pattern;
  return x.tape->record(std::move(out), [p, weights, x](const Matrix& g, Tape& t) {
    const Matrix& wv = t.value(weights.id);
    const Matrix& xval = t.value(x.id);
    const bool need_w = t.requires_grad(weights.id);
    const bool need_x = t.requires_grad(x.id);
    Matrix gw = need_w ? Matrix(wv.rows(), 1) : Matrix();
    Matrix gx = need_x ? Matrix::Zero(xval.rows(), xval.cols()) : Matrix();
    for (Index i = 0; i < p->rows(); ++i) {
      auto gi = g.row(static_cast<Eigen::Index>(i));
      for (Index k = p->row_ptr()[i]; k < p->row_ptr()[i + 1]; ++k) {
        const auto j = static_cast<Eigen::Index>(p->col_idx()[k]);
        const auto kk = static_cast<Eigen::Index>(k);
        if (need_w) gw(kk, 0) = gi.dot(xval.row(j));
        if (need_x) gx.row(j).noalias() += wv(kk, 0) * gi;
      }
    }
    if (need_w) t.accumulate(weights.id, gw);
    if (need_x) t.accumulate(x.id, gx);
  });
}

// For every stored (i, j): z_i . z_j. Output is nnz x 1.
inline Var edge_dot(const CsrMatrix& pattern, Var z) {
  if (pattern.rows() != static_cast<Index>(z.rows()) || pattern.cols() != static_cast<Index>(z.rows())) {
    throw ShapeError("edge_dot: pattern does not match node count");
  }
  const Matrix& zv = z.value();
  Matrix out(static_cast<Eigen::Index>(pattern.nnz()), 1);
  for (Index i = 0; i < pattern.rows(); ++i) {
    for (Index k = pattern.row_ptr()[i]; k < pattern.row_ptr()[i + 1]; ++k) {
      out(static_cast<Eigen::Index>(k), 0) =
          zv.row(static_cast<Eigen::Index>(i)).dot(zv.row(static_cast<Eigen::Index>(pattern.col_idx()[k])));
    }
  }
  const CsrMatrix* p = &pattern;
  return z.tape->record(std::move(out), [p, z](const Matrix& g, Tape& t) {
    const Matrix& zval = t.value(z.id);
    Matrix gz = Matrix::Zero(zval.rows(), zval.cols());
    for (Index i = 0; i < p->rows(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      for (Index k = p->row_ptr()[i]; k < p->row_ptr()[i + 1]; ++k) {
        const auto j = static_cast<Eigen::Index>(p->col_idx()[k]);
        const double gk = g(static_cast<Eigen::Index>(k), 0);
        gz.row(ii).noalias() += gk * zval.row(j);
        gz.row(j).noalias() += gk * zval.row(ii);
      }
    }
    t.accumulate(z.id, gz);
  });
}

// ---------------------------------------------------------- objective ops

// Per-anchor contrastive terms for anchors u against counterparts v:
//   l_i = -s(u_i, v_i) + log( sum_k exp s(u_i, v_k) + sum_{k != i} exp s(u_i, u_k) )
// with s(a, b) = a.b / tau. Rows are expected to be unit-normalized so that s
// is a scaled cosine similarity. Output is N x 1.
inline Var info_nce_terms(Var u, Var v, double tau) {
  detail::require_same_shape(u, v, "info_nce_terms");
  if (!(tau > 0.0)) throw ConfigError("info_nce_terms: temperature must be positive");
  const Matrix& uv = u.value();
  const Matrix& vv = v.value();
  const Eigen::Index n = uv.rows();

  Matrix inter = (uv * vv.transpose()) / tau;
  Matrix intra = (uv * uv.transpose()) / tau;
  Matrix out(n, 1);
  // Softmax weights over the denominator, kept for backward. The diagonal of
  // `intra` is excluded and its weight stays 0.
  Matrix p_inter(n, n), p_intra(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double mx = inter.row(i).maxCoeff();
    for (Eigen::Index k = 0; k < n; ++k) {
      if (k != i) mx = std::max(mx, intra(i, k));
    }
    double denom = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      p_inter(i, k) = std::exp(inter(i, k) - mx);
      denom += p_inter(i, k);
    }
    for (Eigen::Index k = 0; k < n; ++k) {
      p_intra(i, k) = k == i ? 0.0 : std::exp(intra(i, k) - mx);
      denom += p_intra(i, k);
    }
    p_inter.row(i) /= denom;
    p_intra.row(i) /= denom;
    out(i, 0) = -(inter(i, i) - mx) + std::log(denom);
  }
  return u.tape->record(std::move(out), [u, v, tau, p_inter = std::move(p_inter),
                                         p_intra = std::move(p_intra)](const Matrix& g, Tape& t) {
    const Matrix& uval = t.value(u.id);
    const Matrix& vval = t.value(v.id);
    const Eigen::Index n = uval.rows();
    // Row-scale the weights by the upstream per-anchor gradient.
    Matrix gp_inter = g.col(0).asDiagonal() * p_inter;
    Matrix gp_intra = g.col(0).asDiagonal() * p_intra;
    for (Eigen::Index i = 0; i < n; ++i) gp_inter(i, i) -= g(i, 0);
    if (t.requires_grad(u.id)) {
      Matrix gu = gp_inter * vval + gp_intra * uval + gp_intra.transpose() * uval;
      t.accumulate(u.id, Matrix(gu / tau));
    }
    if (t.requires_grad(v.id)) t.accumulate(v.id, Matrix(gp_inter.transpose() * uval / tau));
  });
}

// Student's t soft assignment q_ij = (1 + |z_i - mu_j|^2)^-1 / sum_j' (...).
inline Var soft_assignment(Var z, Var centroids) {
  detail::require_same_tape(z, centroids, "soft_assignment");
  if (z.cols() != centroids.cols()) throw ShapeError("soft_assignment: embedding width differs from centroid width");
  if (centroids.rows() < 2) throw ConfigError("soft_assignment: need at least 2 centroids");
  const Matrix& zv = z.value();
  const Matrix& mu = centroids.value();
  const Eigen::Index n = zv.rows(), k = mu.rows();
  Matrix kernel(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) kernel(i, j) = 1.0 / (1.0 + (zv.row(i) - mu.row(j)).squaredNorm());
  }
  Matrix q = kernel;
  for (Eigen::Index i = 0; i < n; ++i) q.row(i) /= kernel.row(i).sum();
  const Index out_id = z.tape->size();
  return z.tape->record(std::move(q), [z, centroids, out_id, kernel = std::move(kernel)](const Matrix& g, Tape& t) {
    const Matrix& qv = t.value(out_id);
    const Matrix& zval = t.value(z.id);
    const Matrix& mval = t.value(centroids.id);
    const Eigen::Index n = qv.rows(), k = qv.cols();
    Matrix gz = Matrix::Zero(zval.rows(), zval.cols());
    Matrix gm = Matrix::Zero(mval.rows(), mval.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      const double total = kernel.row(i).sum();
      const double gq_dot_q = g.row(i).dot(qv.row(i));
      for (Eigen::Index j = 0; j < k; ++j) {
        // dq/dkernel then dkernel/d(dist^2) = -kernel^2, d(dist^2)/dz = 2 (z - mu).
        const double d_kernel = (g(i, j) - gq_dot_q) / total;
        const double d_dist = -d_kernel * kernel(i, j) * kernel(i, j);
        auto diff = (zval.row(i) - mval.row(j)).eval();
        gz.row(i).noalias() += 2.0 * d_dist * diff;
        gm.row(j).noalias() -= 2.0 * d_dist * diff;
      }
    }
    t.accumulate(z.id, gz);
    t.accumulate(centroids.id, gm);
  });
}

}  // namespace mgccn
