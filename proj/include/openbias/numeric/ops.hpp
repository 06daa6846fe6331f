#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <vector>

#include "openbias/core/error.hpp"
#include "openbias/core/rng.hpp"
#include "openbias/numeric/tape.hpp"

namespace openbias::nn {

namespace detail {

inline Tensor* grad_if(Tape& tape, const Var& v) {
  return tape.requires_grad(v.id()) ? &tape.grad(v.id()) : nullptr;
}

inline void same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require(a.shape() == b.shape(), ErrorKind::ShapeMismatch,
          [&] { return std::string(op) + ": " + shape_string(a.shape()) + " vs " + shape_string(b.shape()); });
}

inline Tape& tape_of(const Var& v) {
  require(v.tape() != nullptr, ErrorKind::PreconditionFailed, "unbound Var");
  return *v.tape();
}

// out[n,m] += a[n,k] * b[k,m]
inline void gemm_acc(const double* a, const double* b, double* out, std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      const double* brow = b + p * m;
      double* orow = out + i * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
}

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }
inline double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  return cdf + x * pdf;
}

}  // namespace detail

/// [n,k] x [k,m] -> [n,m]
inline Var matmul(const Var& a, const Var& b) {
  Tape& t = detail::tape_of(a);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require(A.rank() == 2 && B.rank() == 2 && A.cols() == B.rows(), ErrorKind::ShapeMismatch,
          [&] { return "matmul: " + shape_string(A.shape()) + " x " + shape_string(B.shape()); });
  const std::size_t n = A.rows(), k = A.cols(), m = B.cols();
  Tensor out({n, m});
  detail::gemm_acc(A.data().data(), B.data().data(), out.data().data(), n, k, m);
  return t.record(std::move(out), {a, b}, [a, b, n, k, m](Tape& tp, std::size_t self) {
    const double* G = tp.grad(self).data().data();
    if (Tensor* ga = detail::grad_if(tp, a)) {
      // ga[n,k] += g[n,m] * B^T
      const double* B = tp.value(b.id()).data().data();
      double* out = ga->data().data();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double* grow = G + i * m;
          const double* brow = B + p * m;
          double acc = 0.0;
          for (std::size_t j = 0; j < m; ++j) acc += grow[j] * brow[j];
          out[i * k + p] += acc;
        }
    }
    if (Tensor* gb = detail::grad_if(tp, b)) {
      // gb[k,m] += A^T * g[n,m]
      const double* A = tp.value(a.id()).data().data();
      double* out = gb->data().data();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double av = A[i * k + p];
          if (av == 0.0) continue;
          const double* grow = G + i * m;
          double* orow = out + p * m;
          for (std::size_t j = 0; j < m; ++j) orow[j] += av * grow[j];
        }
    }
  }, "matmul");
}

inline Var transpose(const Var& a) {
  Tape& t = detail::tape_of(a);
  const Tensor& A = a.value();
  require(A.rank() == 2, ErrorKind::ShapeMismatch, [&] { return "transpose needs rank 2, got " + shape_string(A.shape()); });
  const std::size_t n = A.rows(), m = A.cols();
  Tensor out({m, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out.at(j, i) = A.at(i, j);
  return t.record(std::move(out), {a}, [a, n, m](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    Tensor* ga = detail::grad_if(tp, a);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) ga->at(i, j) += g.at(j, i);
  }, "transpose");
}

inline Var add(const Var& a, const Var& b) {
  Tape& t = detail::tape_of(a);
  detail::same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  auto o = out.data();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, std::size_t self) {
    auto g = tp.grad(self).data();
    for (const Var& v : {a, b})
      if (Tensor* gv = detail::grad_if(tp, v))
        for (std::size_t i = 0; i < g.size(); ++i) (*gv)[i] += g[i];
  }, "add");
}

/// Adds a row vector ([m] or [1,m]) to every row of a [n,m] tensor.
inline Var add_row(const Var& a, const Var& bias) {
  Tape& t = detail::tape_of(a);
  const Tensor& A = a.value();
  const Tensor& B = bias.value();
  require(B.size() == A.cols(), ErrorKind::ShapeMismatch,
          [&] { return "add_row: " + shape_string(A.shape()) + " + " + shape_string(B.shape()); });
  Tensor out = A;
  const std::size_t n = A.rows(), m = A.cols();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] += B[j];
  return t.record(std::move(out), {a, bias}, [a, bias, n, m](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    if (Tensor* ga = detail::grad_if(tp, a))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
    if (Tensor* gb = detail::grad_if(tp, bias))
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) (*gb)[j] += g[i * m + j];
  }, "add_row");
}

inline Var mul(const Var& a, const Var& b) {
  Tape& t = detail::tape_of(a);
  detail::same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  auto o = out.data();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, std::size_t self) {
    auto g = tp.grad(self).data();
    if (Tensor* ga = detail::grad_if(tp, a)) {
      auto bv = tp.value(b.id()).data();
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * bv[i];
    }
    if (Tensor* gb = detail::grad_if(tp, b)) {
      auto av = tp.value(a.id()).data();
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * av[i];
    }
  }, "mul");
}

inline Var scale(const Var& a, double s) {
  Tape& t = detail::tape_of(a);
  Tensor out = a.value();
  for (double& v : out.data()) v *= s;
  return t.record(std::move(out), {a}, [a, s](Tape& tp, std::size_t self) {
    auto g = tp.grad(self).data();
    Tensor* ga = detail::grad_if(tp, a);
    for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += s * g[i];
  }, "scale");
}

inline Var relu(const Var& a) {
  Tape& t = detail::tape_of(a);
  Tensor out = a.value();
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return t.record(std::move(out), {a}, [a](Tape& tp, std::size_t self) {
    auto g = tp.grad(self).data();
    auto x = tp.value(a.id()).data();
    Tensor* ga = detail::grad_if(tp, a);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (x[i] > 0.0) (*ga)[i] += g[i];
  }, "relu");
}

/// Exact (erf-based) GELU.
inline Var gelu(const Var& a) {
  Tape& t = detail::tape_of(a);
  Tensor out = a.value();
  for (double& v : out.data()) v = detail::gelu(v);
  return t.record(std::move(out), {a}, [a](Tape& tp, std::size_t self) {
    auto g = tp.grad(self).data();
    auto x = tp.value(a.id()).data();
    Tensor* ga = detail::grad_if(tp, a);
    for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * detail::gelu_grad(x[i]);
  }, "gelu");
}

/// Row-wise layer normalization with affine gamma/beta of length cols.
inline Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5) {
  Tape& t = detail::tape_of(x);
  const Tensor& X = x.value();
  const std::size_t n = X.rows(), m = X.cols();
  require(gamma.value().size() == m && beta.value().size() == m, ErrorKind::ShapeMismatch,
          [&] { return "layer_norm: input " + shape_string(X.shape()) + ", gamma " + shape_string(gamma.value().shape()) +
              ", beta " + shape_string(beta.value().shape()); });
  Tensor out(X.shape());
  auto xhat = std::make_shared<std::vector<double>>(X.size());
  auto inv_std = std::make_shared<std::vector<double>>(n);
  const Tensor& G = gamma.value();
  const Tensor& Bt = beta.value();
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < m; ++j) mean += X[i * m + j];
    mean /= static_cast<double>(m);
    double var = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double d = X[i * m + j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(m);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = is;
    for (std::size_t j = 0; j < m; ++j) {
      const double xh = (X[i * m + j] - mean) * is;
      (*xhat)[i * m + j] = xh;
      out[i * m + j] = G[j] * xh + Bt[j];
    }
  }
  return t.record(std::move(out), {x, gamma, beta}, [x, gamma, beta, xhat, inv_std, n, m](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    const Tensor& G = tp.value(gamma.id());
    if (Tensor* gg = detail::grad_if(tp, gamma))
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) (*gg)[j] += g[i * m + j] * (*xhat)[i * m + j];
    if (Tensor* gb = detail::grad_if(tp, beta))
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) (*gb)[j] += g[i * m + j];
    if (Tensor* gx = detail::grad_if(tp, x)) {
      const double inv_m = 1.0 / static_cast<double>(m);
      for (std::size_t i = 0; i < n; ++i) {
        double sum_g = 0.0, sum_gx = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
          const double gh = g[i * m + j] * G[j];
          sum_g += gh;
          sum_gx += gh * (*xhat)[i * m + j];
        }
        for (std::size_t j = 0; j < m; ++j) {
          const double gh = g[i * m + j] * G[j];
          (*gx)[i * m + j] += (*inv_std)[i] * (gh - sum_g * inv_m - (*xhat)[i * m + j] * sum_gx * inv_m);
        }
      }
    }
  }, "layer_norm");
}

/// Softmax over each row (rank-1 input is one row).
inline Var softmax(const Var& a) {
  Tape& t = detail::tape_of(a);
  const Tensor& A = a.value();
  const std::size_t n = A.rows(), m = A.cols();
  Tensor out(A.shape());
  for (std::size_t i = 0; i < n; ++i) {
    double mx = A[i * m];
    for (std::size_t j = 1; j < m; ++j) mx = std::max(mx, A[i * m + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < m; ++j) z += (out[i * m + j] = std::exp(A[i * m + j] - mx));
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] /= z;
  }
  return t.record(std::move(out), {a}, [a, n, m](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    const Tensor& y = tp.value(self);
    Tensor* ga = detail::grad_if(tp, a);
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < m; ++j) dot += g[i * m + j] * y[i * m + j];
      for (std::size_t j = 0; j < m; ++j) (*ga)[i * m + j] += y[i * m + j] * (g[i * m + j] - dot);
    }
  }, "softmax");
}

/// Log-sum-exp stabilized log-softmax over each row.
inline Var log_softmax(const Var& a) {
  Tape& t = detail::tape_of(a);
  const Tensor& A = a.value();
  const std::size_t n = A.rows(), m = A.cols();
  Tensor out(A.shape());
  for (std::size_t i = 0; i < n; ++i) {
    double mx = A[i * m];
    for (std::size_t j = 1; j < m; ++j) mx = std::max(mx, A[i * m + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < m; ++j) z += std::exp(A[i * m + j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] = A[i * m + j] - lse;
  }
  return t.record(std::move(out), {a}, [a, n, m](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    const Tensor& y = tp.value(self);
    Tensor* ga = detail::grad_if(tp, a);
    for (std::size_t i = 0; i < n; ++i) {
      double sum_g = 0.0;
      for (std::size_t j = 0; j < m; ++j) sum_g += g[i * m + j];
      for (std::size_t j = 0; j < m; ++j) (*ga)[i * m + j] += g[i * m + j] - std::exp(y[i * m + j]) * sum_g;
    }
  }, "log_softmax");
}

/// Rows of `table` ([V,d]) selected by `ids` -> [ids.size(), d].
template <typename Id>
Var embedding_lookup(const Var& table, const std::vector<Id>& ids) {
  Tape& t = detail::tape_of(table);
  const Tensor& T = table.value();
  require(T.rank() == 2, ErrorKind::ShapeMismatch, "embedding table must be rank 2");
  require(!ids.empty(), ErrorKind::ShapeMismatch, "embedding_lookup with no ids");
  const std::size_t d = T.cols();
  Tensor out({ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto row = static_cast<std::size_t>(ids[i]);
    require(ids[i] >= 0 && row < T.rows(), ErrorKind::IndexOutOfRange,
            [&] { return "token id " + std::to_string(ids[i]) + " outside table of " + std::to_string(T.rows()) + " rows"; });
    std::copy_n(T.data().begin() + static_cast<std::ptrdiff_t>(row * d), d,
                out.data().begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  std::vector<std::size_t> rows(ids.begin(), ids.end());
  return t.record(std::move(out), {table}, [table, rows = std::move(rows), d](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    Tensor* gt = detail::grad_if(tp, table);
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < d; ++j) (*gt)[rows[i] * d + j] += g[i * d + j];
  }, "embedding_lookup");
}

/// First `count` rows of a [n,m] tensor.
inline Var slice_rows(const Var& a, std::size_t count) {
  Tape& t = detail::tape_of(a);
  const Tensor& A = a.value();
  require(A.rank() == 2 && count >= 1 && count <= A.rows(), ErrorKind::ShapeMismatch,
          [&] { return "slice_rows " + std::to_string(count) + " of " + shape_string(A.shape()); });
  const std::size_t m = A.cols();
  Tensor out({count, m}, std::vector<double>(A.data().begin(), A.data().begin() + static_cast<std::ptrdiff_t>(count * m)));
  return t.record(std::move(out), {a}, [a](Tape& tp, std::size_t self) {
    auto g = tp.grad(self).data();
    Tensor* ga = detail::grad_if(tp, a);
    for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
  }, "slice_rows");
}

inline Var slice_cols(const Var& a, std::size_t start, std::size_t len) {
  Tape& t = detail::tape_of(a);
  const Tensor& A = a.value();
  require(A.rank() == 2 && len >= 1 && start + len <= A.cols(), ErrorKind::ShapeMismatch,
          [&] { return "slice_cols [" + std::to_string(start) + "," + std::to_string(start + len) + ") of " +
              shape_string(A.shape()); });
  const std::size_t n = A.rows(), m = A.cols();
  Tensor out({n, len});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < len; ++j) out[i * len + j] = A[i * m + start + j];
  return t.record(std::move(out), {a}, [a, start, len, n, m](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    Tensor* ga = detail::grad_if(tp, a);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < len; ++j) (*ga)[i * m + start + j] += g[i * len + j];
  }, "slice_cols");
}

inline Var concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), ErrorKind::ShapeMismatch, "concat_cols of nothing");
  Tape& t = detail::tape_of(parts.front());
  const std::size_t n = parts.front().value().rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    require(p.value().rank() == 2 && p.value().rows() == n, ErrorKind::ShapeMismatch,
            [&] { return "concat_cols: " + shape_string(p.value().shape()) + " has " + std::to_string(p.value().rows()) +
                " rows, expected " + std::to_string(n); });
    total += p.value().cols();
  }
  Tensor out({n, total});
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const Tensor& P = p.value();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < P.cols(); ++j) out[i * total + offset + j] = P[i * P.cols() + j];
    offset += P.cols();
  }
  return t.record(std::move(out), parts, [parts, n, total](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    std::size_t offset = 0;
    for (const auto& p : parts) {
      const std::size_t w = tp.value(p.id()).cols();
      if (Tensor* gp = detail::grad_if(tp, p))
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < w; ++j) (*gp)[i * w + j] += g[i * total + offset + j];
      offset += w;
    }
  }, "concat_cols");
}

/// Column-wise mean of a [n,m] tensor -> [1,m].
inline Var mean_rows(const Var& a) {
  Tape& t = detail::tape_of(a);
  const Tensor& A = a.value();
  const std::size_t n = A.rows(), m = A.cols();
  Tensor out({1, m});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[j] += A[i * m + j];
  for (double& v : out.data()) v /= static_cast<double>(n);
  return t.record(std::move(out), {a}, [a, n, m](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    Tensor* ga = detail::grad_if(tp, a);
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) (*ga)[i * m + j] += g[j] * inv;
  }, "mean_rows");
}

/// Per-row dot product of two [n,m] tensors -> [n,1].
inline Var row_dot(const Var& a, const Var& b) {
  Tape& t = detail::tape_of(a);
  detail::same_shape(a.value(), b.value(), "row_dot");
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const std::size_t n = A.rows(), m = A.cols();
  Tensor out({n, 1});
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += A[i * m + j] * B[i * m + j];
    out[i] = s;
  }
  return t.record(std::move(out), {a, b}, [a, b, n, m](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    if (Tensor* ga = detail::grad_if(tp, a)) {
      const Tensor& B = tp.value(b.id());
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) (*ga)[i * m + j] += g[i] * B[i * m + j];
    }
    if (Tensor* gb = detail::grad_if(tp, b)) {
      const Tensor& A = tp.value(a.id());
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) (*gb)[i * m + j] += g[i] * A[i * m + j];
    }
  }, "row_dot");
}

/// Scales row i of a [n,m] tensor by w[i] (w is [n,1]).
inline Var mul_col(const Var& a, const Var& w) {
  Tape& t = detail::tape_of(a);
  const Tensor& A = a.value();
  const Tensor& W = w.value();
  const std::size_t n = A.rows(), m = A.cols();
  require(W.size() == n, ErrorKind::ShapeMismatch,
          [&] { return "mul_col: " + shape_string(A.shape()) + " by " + shape_string(W.shape()); });
  Tensor out = A;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] *= W[i];
  return t.record(std::move(out), {a, w}, [a, w, n, m](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    if (Tensor* ga = detail::grad_if(tp, a)) {
      const Tensor& W = tp.value(w.id());
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) (*ga)[i * m + j] += g[i * m + j] * W[i];
    }
    if (Tensor* gw = detail::grad_if(tp, w)) {
      const Tensor& A = tp.value(a.id());
      for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) s += g[i * m + j] * A[i * m + j];
        (*gw)[i] += s;
      }
    }
  }, "mul_col");
}

/// Stacks single-element tensors into a rank-1 tensor.
inline Var stack(const std::vector<Var>& scalars) {
  require(!scalars.empty(), ErrorKind::ShapeMismatch, "stack of nothing");
  Tape& t = detail::tape_of(scalars.front());
  std::vector<double> values;
  values.reserve(scalars.size());
  for (const auto& s : scalars) {
    require(s.value().size() == 1, ErrorKind::ShapeMismatch, [&] { return "stack element has shape " + shape_string(s.value().shape()); });
    values.push_back(s.value()[0]);
  }
  return t.record(Tensor::vector(std::move(values)), scalars, [scalars](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    for (std::size_t i = 0; i < scalars.size(); ++i)
      if (Tensor* gs = detail::grad_if(tp, scalars[i])) (*gs)[0] += g[i];
  }, "stack");
}

/// Elements of a rank-1 (or single-row) tensor at `indices` -> rank 1.
inline Var gather(const Var& a, const std::vector<std::size_t>& indices) {
  Tape& t = detail::tape_of(a);
  const Tensor& A = a.value();
  require(A.rows() == 1 && !indices.empty(), ErrorKind::ShapeMismatch, "gather needs a single row and indices");
  std::vector<double> values;
  for (auto i : indices) {
    require(i < A.size(), ErrorKind::IndexOutOfRange,
            [&] { return "gather index " + std::to_string(i) + " outside " + shape_string(A.shape()); });
    values.push_back(A[i]);
  }
  return t.record(Tensor::vector(std::move(values)), {a}, [a, indices](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    Tensor* ga = detail::grad_if(tp, a);
    for (std::size_t k = 0; k < indices.size(); ++k) (*ga)[indices[k]] += g[k];
  }, "gather");
}

inline Var select(const Var& a, std::size_t index) { return gather(a, {index}); }

inline Var sum(const Var& a) {
  Tape& t = detail::tape_of(a);
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return t.record(Tensor::scalar(s), {a}, [a](Tape& tp, std::size_t self) {
    const double g = tp.grad(self)[0];
    Tensor* ga = detail::grad_if(tp, a);
    for (double& v : ga->data()) v += g;
  }, "sum");
}

inline Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

/// Inverted dropout; identity when `rate` is 0.
inline Var dropout(const Var& a, double rate, Rng& rng) {
  if (rate <= 0.0) return a;
  Tape& t = detail::tape_of(a);
  Tensor mask(a.value().shape());
  const double keep = 1.0 - rate;
  for (double& m : mask.data()) m = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
  return mul(a, t.constant(std::move(mask)));
}

}  // namespace openbias::nn
