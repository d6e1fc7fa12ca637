#include "mdiff/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "mdiff/errors.hpp"

namespace mdiff::num {

namespace {

// Each output row accumulates p = 0, 1, ..., k-1 in order. Four terms are
// folded per pass over the row, which keeps that order while touching the row less.
// C[m x n] += A[m x k] * B[k x n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    std::size_t p = 0;
    for (; p + 4 <= k; p += 4) {
      const double a0 = arow[p], a1 = arow[p + 1], a2 = arow[p + 2], a3 = arow[p + 3];
      const double* b0 = b + p * n;
      const double* b1 = b0 + n;
      const double* b2 = b1 + n;
      const double* b3 = b2 + n;
      for (std::size_t j = 0; j < n; ++j) {
        double t = crow[j];
        t += a0 * b0[j];
        t += a1 * b1[j];
        t += a2 * b2[j];
        t += a3 * b3[j];
        crow[j] = t;
      }
    }
    for (; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m x n] += A[m x k] * B[n x k]^T. B is transposed into a scratch buffer so
// the inner loop runs over contiguous output columns like gemm_nn.
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  thread_local std::vector<double> bt;
  bt.resize(k * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  }
  gemm_nn(a, bt.data(), c, m, k, n);
}

// C[m x n] += A[r x m]^T * B[r x n], accumulating q = 0, 1, ..., r-1 in order.
void gemm_tn(const double* a, const double* b, double* c, std::size_t r, std::size_t m, std::size_t n) {
  std::size_t q = 0;
  for (; q + 4 <= r; q += 4) {
    const double* a0 = a + q * m;
    const double* b0 = b + q * n;
    const double* b1 = b0 + n;
    const double* b2 = b1 + n;
    const double* b3 = b2 + n;
    for (std::size_t i = 0; i < m; ++i) {
      const double x0 = a0[i], x1 = a0[m + i], x2 = a0[2 * m + i], x3 = a0[3 * m + i];
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) {
        double t = crow[j];
        t += x0 * b0[j];
        t += x1 * b1[j];
        t += x2 * b2[j];
        t += x3 * b3[j];
        crow[j] = t;
      }
    }
  }
  for (; q < r; ++q) {
    const double* arow = a + q * m;
    const double* brow = b + q * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void require_same_shape(const Tape& tape, Var a, Var b, const char* op) {
  if (tape.shape(a) != tape.shape(b)) {
    throw DimensionError(std::string(op) + ": shapes " + shape_string(tape.shape(a)) + " and " +
                         shape_string(tape.shape(b)) + " differ");
  }
}

}  // namespace

Var matmul(Tape& tape, Var a, Var b) {
  const DenseArray& av = tape.value(a);
  const DenseArray& bv = tape.value(b);
  if (av.rank() < 2 || bv.rank() != 2 || av.cols() != bv.extent(0)) {
    throw DimensionError("matmul: cannot multiply " + shape_string(av.shape()) + " by " +
                         shape_string(bv.shape()));
  }
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  Shape out_shape = av.shape();
  out_shape.back() = n;
  DenseArray out(out_shape, 0.0);
  gemm_nn(av.data(), bv.data(), out.data(), m, k, n);

  return tape.record("matmul", std::move(out), {a, b},
                     [&tape, a, b, m, k, n](const DenseArray& g, std::span<DenseArray* const> gi) {
                       const DenseArray& av = tape.value(a);
                       const DenseArray& bv = tape.value(b);
                       if (gi[0]) gemm_nt(g.data(), bv.data(), gi[0]->data(), m, n, k);
                       if (gi[1]) gemm_tn(av.data(), g.data(), gi[1]->data(), m, k, n);
                     });
}

Var batched_matmul(Tape& tape, Var a, Var b, bool transpose_b) {
  const DenseArray& av = tape.value(a);
  const DenseArray& bv = tape.value(b);
  if (av.rank() != 3 || bv.rank() != 3 || av.extent(0) != bv.extent(0) ||
      av.extent(2) != bv.extent(transpose_b ? 2 : 1)) {
    throw DimensionError("batched_matmul: cannot multiply " + shape_string(av.shape()) + " by " +
                         shape_string(bv.shape()) + (transpose_b ? " (transposed)" : ""));
  }
  const std::size_t groups = av.extent(0), m = av.extent(1), k = av.extent(2);
  const std::size_t n = transpose_b ? bv.extent(1) : bv.extent(2);
  DenseArray out(Shape{groups, m, n}, 0.0);
  for (std::size_t g = 0; g < groups; ++g) {
    const double* ap = av.data() + g * m * k;
    const double* bp = bv.data() + g * k * n;
    double* cp = out.data() + g * m * n;
    if (transpose_b) {
      gemm_nt(ap, bp, cp, m, k, n);
    } else {
      gemm_nn(ap, bp, cp, m, k, n);
    }
  }

  return tape.record(
      "batched_matmul", std::move(out), {a, b},
      [&tape, a, b, groups, m, k, n, transpose_b](const DenseArray& grad, std::span<DenseArray* const> gi) {
        const DenseArray& av = tape.value(a);
        const DenseArray& bv = tape.value(b);
        for (std::size_t g = 0; g < groups; ++g) {
          const double* ap = av.data() + g * m * k;
          const double* bp = bv.data() + g * k * n;
          const double* gp = grad.data() + g * m * n;
          if (transpose_b) {
            // C = A B^T with B stored [n x k]
            if (gi[0]) gemm_nn(gp, bp, gi[0]->data() + g * m * k, m, n, k);
            if (gi[1]) gemm_tn(gp, ap, gi[1]->data() + g * k * n, m, n, k);
          } else {
            if (gi[0]) gemm_nt(gp, bp, gi[0]->data() + g * m * k, m, n, k);
            if (gi[1]) gemm_tn(ap, gp, gi[1]->data() + g * k * n, m, k, n);
          }
        }
      });
}

Var add(Tape& tape, Var a, Var b) {
  require_same_shape(tape, a, b, "add");
  return tape.record("add", tape.value(a) + tape.value(b), {a, b},
                     [](const DenseArray& g, std::span<DenseArray* const> gi) {
                       for (DenseArray* t : gi) {
                         if (!t) continue;
                         for (std::size_t i = 0; i < g.size(); ++i) (*t)[i] += g[i];
                       }
                     });
}

Var sub(Tape& tape, Var a, Var b) {
  require_same_shape(tape, a, b, "sub");
  return tape.record("sub", tape.value(a) - tape.value(b), {a, b},
                     [](const DenseArray& g, std::span<DenseArray* const> gi) {
                       if (gi[0]) {
                         for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i];
                       }
                       if (gi[1]) {
                         for (std::size_t i = 0; i < g.size(); ++i) (*gi[1])[i] -= g[i];
                       }
                     });
}

Var mul(Tape& tape, Var a, Var b) {
  require_same_shape(tape, a, b, "mul");
  DenseArray out = tape.value(a);
  const DenseArray& bv = tape.value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return tape.record("mul", std::move(out), {a, b},
                     [&tape, a, b](const DenseArray& g, std::span<DenseArray* const> gi) {
                       const DenseArray& av = tape.value(a);
                       const DenseArray& bv = tape.value(b);
                       if (gi[0]) {
                         for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i] * bv[i];
                       }
                       if (gi[1]) {
                         for (std::size_t i = 0; i < g.size(); ++i) (*gi[1])[i] += g[i] * av[i];
                       }
                     });
}

Var scale(Tape& tape, Var a, double factor) {
  return tape.record("scale", factor * tape.value(a), {a},
                     [factor](const DenseArray& g, std::span<DenseArray* const> gi) {
                       for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += factor * g[i];
                     });
}

Var add_row(Tape& tape, Var a, Var row) {
  const DenseArray& av = tape.value(a);
  const DenseArray& rv = tape.value(row);
  if (rv.size() != av.cols()) {
    throw DimensionError("add_row: row of " + std::to_string(rv.size()) + " values for last axis " +
                         std::to_string(av.cols()));
  }
  DenseArray out = av;
  const std::size_t cols = av.cols();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    double* o = out.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) o[c] += rv[c];
  }
  return tape.record("add_row", std::move(out), {a, row},
                     [cols](const DenseArray& g, std::span<DenseArray* const> gi) {
                       if (gi[0]) {
                         for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i];
                       }
                       if (gi[1]) {
                         double* gr = gi[1]->data();
                         for (std::size_t r = 0; r < g.size() / cols; ++r) {
                           for (std::size_t c = 0; c < cols; ++c) gr[c] += g[r * cols + c];
                         }
                       }
                     });
}

Var relu(Tape& tape, Var a) {
  DenseArray out = tape.value(a);
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return tape.record("relu", std::move(out), {a},
                     [&tape, a](const DenseArray& g, std::span<DenseArray* const> gi) {
                       const DenseArray& av = tape.value(a);
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         if (av[i] > 0.0) (*gi[0])[i] += g[i];
                       }
                     });
}

Var softmax_rows(Tape& tape, Var a) {
  DenseArray out = tape.value(a);
  const std::size_t cols = out.cols();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    double* row = out.data() + r * cols;
    const double peak = *std::max_element(row, row + cols);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      row[c] = std::exp(row[c] - peak);
      total += row[c];
    }
    for (std::size_t c = 0; c < cols; ++c) row[c] /= total;
  }
  // The pullback reads the output back from the node this call appends.
  const Var self{tape.size()};
  return tape.record("softmax_rows", std::move(out), {a},
                     [&tape, self, cols](const DenseArray& g, std::span<DenseArray* const> gi) {
                       const DenseArray& y = tape.value(self);
                       for (std::size_t r = 0; r < g.size() / cols; ++r) {
                         const double* yr = y.data() + r * cols;
                         const double* gr = g.data() + r * cols;
                         double dot = 0.0;
                         for (std::size_t c = 0; c < cols; ++c) dot += gr[c] * yr[c];
                         double* out = gi[0]->data() + r * cols;
                         for (std::size_t c = 0; c < cols; ++c) out[c] += yr[c] * (gr[c] - dot);
                       }
                     });
}

Var layer_norm(Tape& tape, Var a, Var gain, Var bias) {
  const DenseArray& av = tape.value(a);
  const DenseArray& gv = tape.value(gain);
  const DenseArray& bv = tape.value(bias);
  const std::size_t cols = av.cols();
  if (gv.size() != cols || bv.size() != cols) {
    throw DimensionError("layer_norm: gain/bias extents " + std::to_string(gv.size()) + "/" +
                         std::to_string(bv.size()) + " do not match last axis " + std::to_string(cols));
  }
  const std::size_t rows = av.rows();
  DenseArray normalized(av.shape());
  std::vector<double> inv_std(rows);
  DenseArray out(av.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = av.data() + r * cols;
    double* xhat = normalized.data() + r * cols;
    const auto [lo, hi] = std::minmax_element(x, x + cols);
    double mu = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mu += x[c];
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) var += (x[c] - mu) * (x[c] - mu);
    var /= static_cast<double>(cols);
    const bool constant_row = *lo == *hi;
    if (constant_row) var = 0.0;
    inv_std[r] = 1.0 / std::sqrt(var + kLayerNormEps);
    for (std::size_t c = 0; c < cols; ++c) {
      xhat[c] = constant_row ? 0.0 : (x[c] - mu) * inv_std[r];
      out[r * cols + c] = gv[c] * xhat[c] + bv[c];
    }
  }
  return tape.record(
      "layer_norm", std::move(out), {a, gain, bias},
      [&tape, gain, cols, rows, normalized = std::move(normalized), inv_std = std::move(inv_std)](
          const DenseArray& g, std::span<DenseArray* const> gi) {
        const DenseArray& gv = tape.value(gain);
        std::vector<double> dxhat(cols);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* gr = g.data() + r * cols;
          const double* xhat = normalized.data() + r * cols;
          if (gi[1]) {
            for (std::size_t c = 0; c < cols; ++c) (*gi[1])[c] += gr[c] * xhat[c];
          }
          if (gi[2]) {
            for (std::size_t c = 0; c < cols; ++c) (*gi[2])[c] += gr[c];
          }
          if (!gi[0]) continue;
          double mean_d = 0.0, mean_dx = 0.0;
          for (std::size_t c = 0; c < cols; ++c) {
            dxhat[c] = gr[c] * gv[c];
            mean_d += dxhat[c];
            mean_dx += dxhat[c] * xhat[c];
          }
          mean_d /= static_cast<double>(cols);
          mean_dx /= static_cast<double>(cols);
          double* out = gi[0]->data() + r * cols;
          for (std::size_t c = 0; c < cols; ++c) {
            out[c] += inv_std[r] * (dxhat[c] - mean_d - xhat[c] * mean_dx);
          }
        }
      });
}

Var sum(Tape& tape, Var a) {
  double total = 0.0;
  for (double v : tape.value(a).values()) total += v;
  return tape.record("sum", DenseArray::scalar(total), {a},
                     [](const DenseArray& g, std::span<DenseArray* const> gi) {
                       const double s = g[0];
                       for (double& v : gi[0]->values()) v += s;
                     });
}

Var mean(Tape& tape, Var a) {
  const std::size_t n = tape.value(a).size();
  if (n == 0) throw DimensionError("mean of an empty array");
  double total = 0.0;
  for (double v : tape.value(a).values()) total += v;
  return tape.record("mean", DenseArray::scalar(total / static_cast<double>(n)), {a},
                     [n](const DenseArray& g, std::span<DenseArray* const> gi) {
                       const double s = g[0] / static_cast<double>(n);
                       for (double& v : gi[0]->values()) v += s;
                     });
}

Var gather(Tape& tape, Var a, std::vector<std::size_t> indices, Shape out_shape) {
  const DenseArray& av = tape.value(a);
  if (shape_size(out_shape) != indices.size()) {
    throw DimensionError("gather: " + std::to_string(indices.size()) + " indices for shape " +
                         shape_string(out_shape));
  }
  DenseArray out(std::move(out_shape));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= av.size()) {
      throw DimensionError("gather: index " + std::to_string(indices[i]) + " out of range for " +
                           shape_string(av.shape()));
    }
    out[i] = av[indices[i]];
  }
  return tape.record("gather", std::move(out), {a},
                     [indices = std::move(indices)](const DenseArray& g, std::span<DenseArray* const> gi) {
                       double* t = gi[0]->data();
                       for (std::size_t i = 0; i < indices.size(); ++i) t[indices[i]] += g[i];
                     });
}

Var gather_rows(Tape& tape, Var a, std::vector<std::size_t> indices) {
  const DenseArray& av = tape.value(a);
  const std::size_t cols = av.cols();
  DenseArray out(Shape{indices.size(), cols});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= av.rows()) {
      throw DimensionError("gather_rows: row " + std::to_string(indices[i]) + " out of range for " +
                           shape_string(av.shape()));
    }
    std::copy_n(av.data() + indices[i] * cols, cols, out.data() + i * cols);
  }
  return tape.record("gather_rows", std::move(out), {a},
                     [cols, indices = std::move(indices)](const DenseArray& g, std::span<DenseArray* const> gi) {
                       for (std::size_t i = 0; i < indices.size(); ++i) {
                         double* t = gi[0]->data() + indices[i] * cols;
                         const double* s = g.data() + i * cols;
                         for (std::size_t c = 0; c < cols; ++c) t[c] += s[c];
                       }
                     });
}

Var concat_last(Tape& tape, Var a, Var b) {
  const DenseArray& av = tape.value(a);
  const DenseArray& bv = tape.value(b);
  Shape lead_a(av.shape().begin(), av.shape().end() - (av.rank() ? 1 : 0));
  Shape lead_b(bv.shape().begin(), bv.shape().end() - (bv.rank() ? 1 : 0));
  if (av.rank() == 0 || lead_a != lead_b) {
    throw DimensionError("concat_last: " + shape_string(av.shape()) + " and " + shape_string(bv.shape()) +
                         " differ outside the last axis");
  }
  const std::size_t ca = av.cols(), cb = bv.cols(), rows = av.rows();
  Shape out_shape = av.shape();
  out_shape.back() = ca + cb;
  DenseArray out(out_shape);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(av.data() + r * ca, ca, out.data() + r * (ca + cb));
    std::copy_n(bv.data() + r * cb, cb, out.data() + r * (ca + cb) + ca);
  }
  return tape.record("concat_last", std::move(out), {a, b},
                     [ca, cb, rows](const DenseArray& g, std::span<DenseArray* const> gi) {
                       for (std::size_t r = 0; r < rows; ++r) {
                         const double* gr = g.data() + r * (ca + cb);
                         if (gi[0]) {
                           for (std::size_t c = 0; c < ca; ++c) (*gi[0])[r * ca + c] += gr[c];
                         }
                         if (gi[1]) {
                           for (std::size_t c = 0; c < cb; ++c) (*gi[1])[r * cb + c] += gr[ca + c];
                         }
                       }
                     });
}

Var reshape(Tape& tape, Var a, Shape shape) {
  return tape.record("reshape", tape.value(a).reshaped(std::move(shape)), {a},
                     [](const DenseArray& g, std::span<DenseArray* const> gi) {
                       for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i];
                     });
}

}  // namespace mdiff::num
