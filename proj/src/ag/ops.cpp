/*
 *  Copyright 2026 The trexsuper Authors. All Rights Reserved.
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 */
#include "trex/ag/ops.hpp"

#include <algorithm>
#include <cmath>

#include "trex/simd/kernels.hpp"

namespace trex::ag {
namespace {

const simd::Kernels& K() { return simd::active(); }

void require(bool cond, const char* op, const std::string& what) {
  if (!cond) throw std::invalid_argument(std::string(op) + ": " + what);
}

void require_same(const Var& a, const Var& b, const char* op) {
  require(a.shape() == b.shape(), op, "shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
}

void require_matrix(const Var& a, const char* op) {
  require(a.value().rank() == 2, op, "expected a matrix, got " + shape_string(a.shape()));
}

/// parent.grad += g (if the parent takes gradients)
void accumulate(Node& parent, const Tensor& g, double alpha = 1.0) {
  if (!parent.requires_grad) return;
  K().axpy(alpha, g.data(), parent.grad_buffer().data(), g.size());
}

Node& parent(Node& n, std::size_t i) { return *n.parents[i]; }

}  // namespace

Var constant(Tensor t) { return Var(std::move(t), false); }

Var add(const Var& a, const Var& b) {
  require_same(a, b, "add");
  Tensor out = a.value();
  K().axpy(1.0, b.value().data(), out.data(), out.size());
  return make_result(std::move(out), {a, b}, [](Node& n) {
    accumulate(parent(n, 0), n.grad);
    accumulate(parent(n, 1), n.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same(a, b, "sub");
  Tensor out = a.value();
  K().axpy(-1.0, b.value().data(), out.data(), out.size());
  return make_result(std::move(out), {a, b}, [](Node& n) {
    accumulate(parent(n, 0), n.grad);
    accumulate(parent(n, 1), n.grad, -1.0);
  });
}

Var mul(const Var& a, const Var& b) {
  require_same(a, b, "mul");
  Tensor out(a.shape(), 0.0);
  K().fma_accumulate(a.value().data(), b.value().data(), out.data(), out.size());
  return make_result(std::move(out), {a, b}, [](Node& n) {
    Node& pa = parent(n, 0);
    Node& pb = parent(n, 1);
    if (pa.requires_grad) K().fma_accumulate(n.grad.data(), pb.value.data(), pa.grad_buffer().data(), n.grad.size());
    if (pb.requires_grad) K().fma_accumulate(n.grad.data(), pa.value.data(), pb.grad_buffer().data(), n.grad.size());
  });
}

Var scale(const Var& a, double s) {
  Tensor out = a.value();
  K().scale(s, out.data(), out.size());
  return make_result(std::move(out), {a}, [s](Node& n) { accumulate(parent(n, 0), n.grad, s); });
}

Var add_constant(const Var& a, const Tensor& c) {
  require(a.shape() == c.shape(), "add_constant", "shape mismatch");
  Tensor out = a.value();
  K().axpy(1.0, c.data(), out.data(), out.size());
  return make_result(std::move(out), {a}, [](Node& n) { accumulate(parent(n, 0), n.grad); });
}

Var add_row(const Var& a, const Var& b) {
  require_matrix(a, "add_row");
  const int rows = a.value().rows(), cols = a.value().cols();
  require(static_cast<int>(b.size()) == cols, "add_row", "bias length mismatch");
  Tensor out = a.value();
  for (int r = 0; r < rows; ++r) K().axpy(1.0, b.value().data(), out.data() + static_cast<std::size_t>(r) * cols, cols);
  return make_result(std::move(out), {a, b}, [rows, cols](Node& n) {
    accumulate(parent(n, 0), n.grad);
    Node& pb = parent(n, 1);
    if (pb.requires_grad) {
      double* gb = pb.grad_buffer().data();
      for (int r = 0; r < rows; ++r) K().axpy(1.0, n.grad.data() + static_cast<std::size_t>(r) * cols, gb, cols);
    }
  });
}

namespace {

template <typename F, typename D>
Var unary(const Var& a, F f, D dfdx_from_y_x) {
  Tensor out = a.value();
  for (double& v : out.values()) v = f(v);
  return make_result(std::move(out), {a}, [dfdx_from_y_x](Node& n) {
    Node& p = parent(n, 0);
    if (!p.requires_grad) return;
    double* g = p.grad_buffer().data();
    const double* x = p.value.data();
    const double* y = n.value.data();
    for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * dfdx_from_y_x(y[i], x[i]);
  });
}

}  // namespace

Var relu(const Var& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double, double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Var tanh(const Var& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double y, double) { return 1.0 - y * y; });
}

Var sigmoid(const Var& a) {
  return unary(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); }, [](double y, double) { return y * (1.0 - y); });
}

Var softplus(const Var& a) {
  return unary(
      a, [](double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); },
      [](double, double x) { return 1.0 / (1.0 + std::exp(-x)); });
}

Var matmul(const Var& a, const Var& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const int n = a.value().dim(0), k = a.value().dim(1), m = b.value().dim(1);
  require(b.value().dim(0) == k, "matmul", "inner dimension mismatch " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  Tensor out({n, m}, 0.0);
  K().gemm_nn(n, m, k, a.value().data(), b.value().data(), out.data());
  return make_result(std::move(out), {a, b}, [n, k, m](Node& node) {
    Node& pa = parent(node, 0);
    Node& pb = parent(node, 1);
    if (pa.requires_grad) K().gemm_nt(n, k, m, node.grad.data(), pb.value.data(), pa.grad_buffer().data());
    if (pb.requires_grad) K().gemm_tn(k, m, n, pa.value.data(), node.grad.data(), pb.grad_buffer().data());
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  const int n = a.value().dim(0), k = a.value().dim(1), m = b.value().dim(0);
  require(b.value().dim(1) == k, "matmul_nt", "inner dimension mismatch " + shape_string(a.shape()) + " x " + shape_string(b.shape()) + "^T");
  Tensor out({n, m}, 0.0);
  K().gemm_nt(n, m, k, a.value().data(), b.value().data(), out.data());
  return make_result(std::move(out), {a, b}, [n, k, m](Node& node) {
    Node& pa = parent(node, 0);
    Node& pb = parent(node, 1);
    if (pa.requires_grad) K().gemm_nn(n, k, m, node.grad.data(), pb.value.data(), pa.grad_buffer().data());
    if (pb.requires_grad) K().gemm_tn(m, k, n, node.grad.data(), pa.value.data(), pb.grad_buffer().data());
  });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  require_matrix(x, "linear");
  require_matrix(w, "linear");
  const int n = x.value().dim(0), in = x.value().dim(1), out_dim = w.value().dim(0);
  require(w.value().dim(1) == in, "linear", "weight " + shape_string(w.shape()) + " vs input " + shape_string(x.shape()));
  require(static_cast<int>(b.size()) == out_dim, "linear", "bias length mismatch");
  Tensor out({n, out_dim}, 0.0);
  for (int r = 0; r < n; ++r) std::copy(b.value().data(), b.value().data() + out_dim, out.data() + static_cast<std::size_t>(r) * out_dim);
  K().gemm_nt(n, out_dim, in, x.value().data(), w.value().data(), out.data());
  return make_result(std::move(out), {x, w, b}, [n, in, out_dim](Node& node) {
    Node& px = parent(node, 0);
    Node& pw = parent(node, 1);
    Node& pb = parent(node, 2);
    if (px.requires_grad) K().gemm_nn(n, in, out_dim, node.grad.data(), pw.value.data(), px.grad_buffer().data());
    if (pw.requires_grad) K().gemm_tn(out_dim, in, n, node.grad.data(), px.value.data(), pw.grad_buffer().data());
    if (pb.requires_grad) {
      double* gb = pb.grad_buffer().data();
      for (int r = 0; r < n; ++r) K().axpy(1.0, node.grad.data() + static_cast<std::size_t>(r) * out_dim, gb, out_dim);
    }
  });
}

Var softmax_rows(const Var& a) {
  require_matrix(a, "softmax_rows");
  const int rows = a.value().rows(), cols = a.value().cols();
  Tensor out = a.value();
  for (int r = 0; r < rows; ++r) {
    double* row = out.data() + static_cast<std::size_t>(r) * cols;
    const double mx = *std::max_element(row, row + cols);
    double s = 0.0;
    for (int c = 0; c < cols; ++c) s += row[c] = std::exp(row[c] - mx);
    for (int c = 0; c < cols; ++c) row[c] /= s;
  }
  return make_result(std::move(out), {a}, [rows, cols](Node& n) {
    Node& p = parent(n, 0);
    if (!p.requires_grad) return;
    double* gx = p.grad_buffer().data();
    for (int r = 0; r < rows; ++r) {
      const std::size_t off = static_cast<std::size_t>(r) * cols;
      const double* y = n.value.data() + off;
      const double* g = n.grad.data() + off;
      const double dotgy = K().dot(g, y, cols);
      for (int c = 0; c < cols; ++c) gx[off + c] += y[c] * (g[c] - dotgy);
    }
  });
}

Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps) {
  require_matrix(x, "layer_norm_rows");
  const int rows = x.value().rows(), cols = x.value().cols();
  require(static_cast<int>(gamma.size()) == cols && static_cast<int>(beta.size()) == cols, "layer_norm_rows",
          "affine parameter length mismatch");
  Tensor out({rows, cols});
  auto xhat = std::make_shared<Tensor>(Shape{rows, cols});
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  for (int r = 0; r < rows; ++r) {
    const std::size_t off = static_cast<std::size_t>(r) * cols;
    const double* xr = x.value().data() + off;
    double mean = 0.0;
    for (int c = 0; c < cols; ++c) mean += xr[c];
    mean /= cols;
    double var = 0.0;
    for (int c = 0; c < cols; ++c) var += (xr[c] - mean) * (xr[c] - mean);
    var /= cols;
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (int c = 0; c < cols; ++c) {
      const double h = (xr[c] - mean) * is;
      (*xhat)[off + c] = h;
      out[off + c] = h * gamma.value()[c] + beta.value()[c];
    }
  }
  return make_result(std::move(out), {x, gamma, beta}, [rows, cols, xhat, inv_std](Node& n) {
    Node& px = parent(n, 0);
    Node& pg = parent(n, 1);
    Node& pb = parent(n, 2);
    std::vector<double> gh(cols);
    for (int r = 0; r < rows; ++r) {
      const std::size_t off = static_cast<std::size_t>(r) * cols;
      const double* g = n.grad.data() + off;
      const double* h = xhat->data() + off;
      if (pg.requires_grad) K().fma_accumulate(g, h, pg.grad_buffer().data(), cols);
      if (pb.requires_grad) K().axpy(1.0, g, pb.grad_buffer().data(), cols);
      if (!px.requires_grad) continue;
      double mean_gh = 0.0, mean_ghh = 0.0;
      for (int c = 0; c < cols; ++c) {
        gh[c] = g[c] * pg.value[c];
        mean_gh += gh[c];
        mean_ghh += gh[c] * h[c];
      }
      mean_gh /= cols;
      mean_ghh /= cols;
      double* gx = px.grad_buffer().data() + off;
      for (int c = 0; c < cols; ++c) gx[c] += (*inv_std)[r] * (gh[c] - mean_gh - h[c] * mean_ghh);
    }
  });
}

Var normalize_rows(const Var& x, double eps) {
  require_matrix(x, "normalize_rows");
  const int rows = x.value().rows(), cols = x.value().cols();
  Tensor out = x.value();
  auto norms = std::make_shared<std::vector<double>>(rows);
  for (int r = 0; r < rows; ++r) {
    double* row = out.data() + static_cast<std::size_t>(r) * cols;
    const double s = std::sqrt(K().dot(row, row, cols) + eps);
    (*norms)[r] = s;
    for (int c = 0; c < cols; ++c) row[c] /= s;
  }
  return make_result(std::move(out), {x}, [rows, cols, norms](Node& n) {
    Node& p = parent(n, 0);
    if (!p.requires_grad) return;
    double* gx = p.grad_buffer().data();
    for (int r = 0; r < rows; ++r) {
      const std::size_t off = static_cast<std::size_t>(r) * cols;
      const double* y = n.value.data() + off;
      const double* g = n.grad.data() + off;
      const double gy = K().dot(g, y, cols);
      for (int c = 0; c < cols; ++c) gx[off + c] += (g[c] - y[c] * gy) / (*norms)[r];
    }
  });
}

Var reshape(const Var& a, Shape s) {
  Tensor out = a.value();
  out.reshape(std::move(s));
  return make_result(std::move(out), {a}, [](Node& n) { accumulate(parent(n, 0), n.grad); });
}

Var transpose(const Var& a) {
  require_matrix(a, "transpose");
  const int r = a.value().dim(0), c = a.value().dim(1);
  Tensor out({c, r});
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out.at(j, i) = a.value().at(i, j);
  return make_result(std::move(out), {a}, [r, c](Node& n) {
    Node& p = parent(n, 0);
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) g.at(i, j) += n.grad.at(j, i);
  });
}

Var slice_cols(const Var& a, int begin, int end) {
  require_matrix(a, "slice_cols");
  const int rows = a.value().rows(), cols = a.value().cols();
  require(0 <= begin && begin <= end && end <= cols, "slice_cols", "range out of bounds");
  const int w = end - begin;
  Tensor out({rows, w});
  for (int r = 0; r < rows; ++r)
    std::copy_n(a.value().data() + static_cast<std::size_t>(r) * cols + begin, w, out.data() + static_cast<std::size_t>(r) * w);
  return make_result(std::move(out), {a}, [rows, cols, begin, w](Node& n) {
    Node& p = parent(n, 0);
    if (!p.requires_grad) return;
    double* g = p.grad_buffer().data();
    for (int r = 0; r < rows; ++r)
      K().axpy(1.0, n.grad.data() + static_cast<std::size_t>(r) * w, g + static_cast<std::size_t>(r) * cols + begin, w);
  });
}

Var slice_rows(const Var& a, int begin, int end) {
  const int rows = a.value().rows(), cols = a.value().cols();
  require(0 <= begin && begin <= end && end <= rows, "slice_rows", "range out of bounds");
  Shape s = a.shape();
  s[0] = end - begin;
  Tensor out(s);
  std::copy_n(a.value().data() + static_cast<std::size_t>(begin) * cols, static_cast<std::size_t>(end - begin) * cols, out.data());
  return make_result(std::move(out), {a}, [begin, cols](Node& n) {
    Node& p = parent(n, 0);
    if (!p.requires_grad) return;
    K().axpy(1.0, n.grad.data(), p.grad_buffer().data() + static_cast<std::size_t>(begin) * cols, n.grad.size());
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols", "no inputs");
  const int rows = parts[0].value().rows();
  std::vector<int> widths;
  int total = 0;
  for (const Var& p : parts) {
    require_matrix(p, "concat_cols");
    require(p.value().rows() == rows, "concat_cols", "row count mismatch");
    widths.push_back(p.value().cols());
    total += widths.back();
  }
  Tensor out({rows, total});
  int off = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    for (int r = 0; r < rows; ++r)
      std::copy_n(parts[i].value().data() + static_cast<std::size_t>(r) * widths[i], widths[i],
                  out.data() + static_cast<std::size_t>(r) * total + off);
    off += widths[i];
  }
  return make_result(std::move(out), parts, [rows, total, widths](Node& n) {
    int off = 0;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      Node& p = parent(n, i);
      if (p.requires_grad) {
        double* g = p.grad_buffer().data();
        for (int r = 0; r < rows; ++r)
          K().axpy(1.0, n.grad.data() + static_cast<std::size_t>(r) * total + off, g + static_cast<std::size_t>(r) * widths[i], widths[i]);
      }
      off += widths[i];
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_rows", "no inputs");
  const int cols = parts[0].value().cols();
  int rows = 0;
  std::vector<std::size_t> sizes;
  for (const Var& p : parts) {
    require(p.value().cols() == cols || p.size() == 0, "concat_rows", "column count mismatch");
    rows += p.value().rows();
    sizes.push_back(p.size());
  }
  Shape s = parts[0].shape();
  if (s.empty()) s = {1};
  s[0] = rows;
  if (s.size() == 1 && cols != 1) s = {rows, cols};
  Tensor out(s);
  std::size_t off = 0;
  for (const Var& p : parts) {
    std::copy_n(p.value().data(), p.size(), out.data() + off);
    off += p.size();
  }
  return make_result(std::move(out), parts, [sizes](Node& n) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      Node& p = parent(n, i);
      if (p.requires_grad) K().axpy(1.0, n.grad.data() + off, p.grad_buffer().data(), sizes[i]);
      off += sizes[i];
    }
  });
}

Var gather_rows(const Var& a, const std::vector<int>& rows) {
  const int cols = a.value().cols();
  const int n = a.value().rows();
  for (int r : rows) require(r >= 0 && r < n, "gather_rows", "row index out of range");
  Tensor out({static_cast<int>(rows.size()), cols});
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(a.value().data() + static_cast<std::size_t>(rows[i]) * cols, cols, out.data() + i * cols);
  return make_result(std::move(out), {a}, [rows, cols](Node& node) {
    Node& p = parent(node, 0);
    if (!p.requires_grad) return;
    double* g = p.grad_buffer().data();
    for (std::size_t i = 0; i < rows.size(); ++i)
      K().axpy(1.0, node.grad.data() + i * cols, g + static_cast<std::size_t>(rows[i]) * cols, cols);
  });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return make_result(Tensor({1}, {s}), {a}, [](Node& n) {
    Node& p = parent(n, 0);
    if (!p.requires_grad) return;
    const double g = n.grad[0];
    for (double& v : p.grad_buffer().values()) v += g;
  });
}

Var sum_vars(const std::vector<Var>& scalars) {
  double s = 0.0;
  for (const Var& v : scalars) {
    require(v.size() == 1, "sum_vars", "expected scalars");
    s += v.value()[0];
  }
  return make_result(Tensor({1}, {s}), scalars, [](Node& n) {
    for (auto& p : n.parents)
      if (p->requires_grad) p->grad_buffer()[0] += n.grad[0];
  });
}

Var cross_entropy_rows(const Var& logits, const std::vector<int>& targets, const std::vector<double>& weights) {
  require_matrix(logits, "cross_entropy_rows");
  const int rows = logits.value().rows(), cols = logits.value().cols();
  require(static_cast<int>(targets.size()) == rows && static_cast<int>(weights.size()) == rows, "cross_entropy_rows",
          "targets/weights length mismatch");
  auto probs = std::make_shared<Tensor>(logits.value());
  double loss = 0.0;
  for (int r = 0; r < rows; ++r) {
    require(targets[r] >= 0 && targets[r] < cols, "cross_entropy_rows", "target class out of range");
    double* row = probs->data() + static_cast<std::size_t>(r) * cols;
    const double mx = *std::max_element(row, row + cols);
    double s = 0.0;
    for (int c = 0; c < cols; ++c) s += std::exp(row[c] - mx);
    const double lse = mx + std::log(s);
    loss += weights[r] * (lse - row[targets[r]]);
    for (int c = 0; c < cols; ++c) row[c] = std::exp(row[c] - lse);
  }
  return make_result(Tensor({1}, {loss}), {logits}, [probs, targets, weights, rows, cols](Node& n) {
    Node& p = parent(n, 0);
    if (!p.requires_grad) return;
    double* g = p.grad_buffer().data();
    const double scale = n.grad[0];
    for (int r = 0; r < rows; ++r) {
      const std::size_t off = static_cast<std::size_t>(r) * cols;
      const double w = weights[r] * scale;
      if (w == 0.0) continue;
      for (int c = 0; c < cols; ++c) g[off + c] += w * ((*probs)[off + c] - (c == targets[r] ? 1.0 : 0.0));
    }
  });
}

Var l1_rows(const Var& a, const Tensor& target, const std::vector<double>& weights) {
  require(a.shape() == target.shape(), "l1_rows", "target shape mismatch");
  const int rows = a.value().rows(), cols = a.value().cols();
  require(static_cast<int>(weights.size()) == rows, "l1_rows", "weights length mismatch");
  double loss = 0.0;
  for (int r = 0; r < rows; ++r) {
    if (weights[r] == 0.0) continue;
    double s = 0.0;
    for (int c = 0; c < cols; ++c) s += std::abs(a.value().at(r, c) - target.at(r, c));
    loss += weights[r] * s;
  }
  return make_result(Tensor({1}, {loss}), {a}, [target, weights, rows, cols](Node& n) {
    Node& p = parent(n, 0);
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    for (int r = 0; r < rows; ++r) {
      const double w = weights[r] * n.grad[0];
      if (w == 0.0) continue;
      for (int c = 0; c < cols; ++c) {
        const double d = p.value.at(r, c) - target.at(r, c);
        g.at(r, c) += d > 0.0 ? w : (d < 0.0 ? -w : 0.0);
      }
    }
  });
}

Var crop3d(const Var& volume, std::array<int, 3> center, int size) {
  require(volume.value().rank() == 4 && volume.value().dim(0) == 1, "crop3d", "expected [1, X, Y, Z]");
  require(size > 0, "crop3d", "size must be positive");
  const std::array<int, 3> dims{volume.value().dim(1), volume.value().dim(2), volume.value().dim(3)};
  const int half = size / 2;
  const std::array<int, 3> origin{center[0] - half, center[1] - half, center[2] - half};
  Tensor out({1, size, size, size}, 0.0);
  // index pairs (crop, volume) of in-bounds voxels
  auto pairs = std::make_shared<std::vector<std::pair<std::size_t, std::size_t>>>();
  for (int i = 0; i < size; ++i) {
    const int x = origin[0] + i;
    if (x < 0 || x >= dims[0]) continue;
    for (int j = 0; j < size; ++j) {
      const int y = origin[1] + j;
      if (y < 0 || y >= dims[1]) continue;
      for (int k = 0; k < size; ++k) {
        const int z = origin[2] + k;
        if (z < 0 || z >= dims[2]) continue;
        const std::size_t ci = (static_cast<std::size_t>(i) * size + j) * size + k;
        const std::size_t vi = (static_cast<std::size_t>(x) * dims[1] + y) * dims[2] + z;
        out[ci] = volume.value()[vi];
        pairs->emplace_back(ci, vi);
      }
    }
  }
  return make_result(std::move(out), {volume}, [pairs](Node& n) {
    Node& p = parent(n, 0);
    if (!p.requires_grad) return;
    double* g = p.grad_buffer().data();
    for (auto [ci, vi] : *pairs) g[vi] += n.grad[ci];
  });
}

Var trilinear_sample(const Var& grid, std::array<int, 3> dims, const std::vector<Vec3>& points) {
  require_matrix(grid, "trilinear_sample");
  const int e = grid.value().cols();
  require(grid.value().rows() == dims[0] * dims[1] * dims[2], "trilinear_sample", "grid rows do not match dims");
  struct Tap {
    std::size_t row;
    double w;
  };
  auto taps = std::make_shared<std::vector<std::array<Tap, 8>>>(points.size());
  Tensor out({static_cast<int>(points.size()), e}, 0.0);
  for (std::size_t q = 0; q < points.size(); ++q) {
    int i0[3];
    double f[3];
    for (int a = 0; a < 3; ++a) {
      const double c = std::clamp(points[q][a], 0.0, static_cast<double>(dims[a] - 1));
      i0[a] = std::min(static_cast<int>(std::floor(c)), std::max(dims[a] - 2, 0));
      f[a] = c - i0[a];
    }
    for (int corner = 0; corner < 8; ++corner) {
      int idx[3];
      double w = 1.0;
      for (int a = 0; a < 3; ++a) {
        const int bit = (corner >> (2 - a)) & 1;
        idx[a] = std::min(i0[a] + bit, dims[a] - 1);
        w *= bit ? f[a] : 1.0 - f[a];
      }
      const std::size_t row = (static_cast<std::size_t>(idx[0]) * dims[1] + idx[1]) * dims[2] + idx[2];
      (*taps)[q][corner] = {row, w};
      if (w != 0.0) K().axpy(w, grid.value().data() + row * e, out.data() + q * e, e);
    }
  }
  return make_result(std::move(out), {grid}, [taps, e](Node& n) {
    Node& p = parent(n, 0);
    if (!p.requires_grad) return;
    double* g = p.grad_buffer().data();
    for (std::size_t q = 0; q < taps->size(); ++q)
      for (const Tap& t : (*taps)[q])
        if (t.w != 0.0) K().axpy(t.w, n.grad.data() + q * e, g + t.row * e, e);
  });
}

}  // namespace trex::ag
