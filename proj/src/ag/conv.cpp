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
// Convolutions lowered to GEMM through im2col. The column buffer is kept
// alive in the backward closure so the weight gradient can reuse it.

#include <memory>

#include "trex/ag/ops.hpp"
#include "trex/simd/kernels.hpp"

namespace trex::ag {
namespace {

struct ConvGeom {
  int cin, X, Y, Z;
  int k, stride, pad;
  int ox, oy, oz;
  std::size_t P() const { return static_cast<std::size_t>(ox) * oy * oz; }
  int CK() const { return cin * k * k * k; }
};

// col[(c, dx, dy, dz), (i, j, l)] = x[c, i*s+dx-p, j*s+dy-p, l*s+dz-p]
void im2col(const ConvGeom& g, const double* x, double* col) {
  const std::size_t P = g.P();
  std::size_t row = 0;
  for (int c = 0; c < g.cin; ++c)
    for (int dx = 0; dx < g.k; ++dx)
      for (int dy = 0; dy < g.k; ++dy)
        for (int dz = 0; dz < g.k; ++dz, ++row) {
          double* out = col + row * P;
          std::size_t p = 0;
          for (int i = 0; i < g.ox; ++i) {
            const int xi = i * g.stride + dx - g.pad;
            for (int j = 0; j < g.oy; ++j) {
              const int yj = j * g.stride + dy - g.pad;
              const bool row_ok = xi >= 0 && xi < g.X && yj >= 0 && yj < g.Y;
              const double* src = x + ((static_cast<std::size_t>(c) * g.X + (row_ok ? xi : 0)) * g.Y + (row_ok ? yj : 0)) * g.Z;
              for (int l = 0; l < g.oz; ++l, ++p) {
                const int zl = l * g.stride + dz - g.pad;
                out[p] = (row_ok && zl >= 0 && zl < g.Z) ? src[zl] : 0.0;
              }
            }
          }
        }
}

void col2im(const ConvGeom& g, const double* col, double* x) {
  const std::size_t P = g.P();
  std::size_t row = 0;
  for (int c = 0; c < g.cin; ++c)
    for (int dx = 0; dx < g.k; ++dx)
      for (int dy = 0; dy < g.k; ++dy)
        for (int dz = 0; dz < g.k; ++dz, ++row) {
          const double* in = col + row * P;
          std::size_t p = 0;
          for (int i = 0; i < g.ox; ++i) {
            const int xi = i * g.stride + dx - g.pad;
            for (int j = 0; j < g.oy; ++j, p += g.oz) {
              const int yj = j * g.stride + dy - g.pad;
              if (xi < 0 || xi >= g.X || yj < 0 || yj >= g.Y) continue;
              double* dst = x + ((static_cast<std::size_t>(c) * g.X + xi) * g.Y + yj) * g.Z;
              for (int l = 0; l < g.oz; ++l) {
                const int zl = l * g.stride + dz - g.pad;
                if (zl >= 0 && zl < g.Z) dst[zl] += in[p + l];
              }
            }
          }
        }
}

void check(bool cond, const char* op, const std::string& what) {
  if (!cond) throw std::invalid_argument(std::string(op) + ": " + what);
}

}  // namespace

Var conv3d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  check(x.value().rank() == 4, "conv3d", "input must be [cin, X, Y, Z], got " + shape_string(x.shape()));
  check(w.value().rank() == 5, "conv3d", "weight must be [cout, cin, k, k, k]");
  check(stride >= 1 && pad >= 0, "conv3d", "bad stride/pad");
  ConvGeom g{};
  g.cin = x.value().dim(0);
  g.X = x.value().dim(1);
  g.Y = x.value().dim(2);
  g.Z = x.value().dim(3);
  g.k = w.value().dim(2);
  g.stride = stride;
  g.pad = pad;
  const int cout = w.value().dim(0);
  check(w.value().dim(1) == g.cin && w.value().dim(3) == g.k && w.value().dim(4) == g.k, "conv3d",
        "weight " + shape_string(w.shape()) + " does not match input " + shape_string(x.shape()));
  check(static_cast<int>(b.size()) == cout, "conv3d", "bias length mismatch");
  g.ox = (g.X + 2 * pad - g.k) / stride + 1;
  g.oy = (g.Y + 2 * pad - g.k) / stride + 1;
  g.oz = (g.Z + 2 * pad - g.k) / stride + 1;
  check(g.ox > 0 && g.oy > 0 && g.oz > 0, "conv3d", "kernel larger than padded input");

  const std::size_t P = g.P();
  auto col = std::make_shared<std::vector<double>>(static_cast<std::size_t>(g.CK()) * P);
  im2col(g, x.value().data(), col->data());
  Tensor out({cout, g.ox, g.oy, g.oz});
  for (int co = 0; co < cout; ++co) std::fill_n(out.data() + co * P, P, b.value()[co]);
  const auto& K = simd::active();
  K.gemm_nn(cout, static_cast<int>(P), g.CK(), w.value().data(), col->data(), out.data());

  return make_result(std::move(out), {x, w, b}, [g, col, cout](Node& n) {
    const auto& K = simd::active();
    const std::size_t P = g.P();
    Node& px = *n.parents[0];
    Node& pw = *n.parents[1];
    Node& pb = *n.parents[2];
    if (pw.requires_grad) K.gemm_nt(cout, g.CK(), static_cast<int>(P), n.grad.data(), col->data(), pw.grad_buffer().data());
    if (pb.requires_grad) {
      double* gb = pb.grad_buffer().data();
      for (int co = 0; co < cout; ++co) {
        double s = 0.0;
        for (std::size_t p = 0; p < P; ++p) s += n.grad[co * P + p];
        gb[co] += s;
      }
    }
    if (px.requires_grad) {
      std::vector<double> dcol(static_cast<std::size_t>(g.CK()) * P, 0.0);
      K.gemm_tn(g.CK(), static_cast<int>(P), cout, pw.value.data(), n.grad.data(), dcol.data());
      col2im(g, dcol.data(), px.grad_buffer().data());
    }
  });
}

namespace {

// Linear 2x upsampling along the middle axis of an [outer, n, inner] view.
// Output sample 2i sits a quarter cell before input i, 2i+1 a quarter after;
// borders replicate.
std::vector<double> upsample_axis(const std::vector<double>& in, int outer, int n, int inner) {
  std::vector<double> out(static_cast<std::size_t>(outer) * 2 * n * inner);
  for (int o = 0; o < outer; ++o)
    for (int i = 0; i < n; ++i) {
      const double* c = in.data() + (static_cast<std::size_t>(o) * n + i) * inner;
      const double* lo = in.data() + (static_cast<std::size_t>(o) * n + std::max(i - 1, 0)) * inner;
      const double* hi = in.data() + (static_cast<std::size_t>(o) * n + std::min(i + 1, n - 1)) * inner;
      double* e = out.data() + (static_cast<std::size_t>(o) * 2 * n + 2 * i) * inner;
      double* f = e + inner;
      for (int k = 0; k < inner; ++k) {
        e[k] = 0.75 * c[k] + 0.25 * lo[k];
        f[k] = 0.75 * c[k] + 0.25 * hi[k];
      }
    }
  return out;
}

std::vector<double> upsample_axis_adjoint(const std::vector<double>& g, int outer, int n, int inner) {
  std::vector<double> out(static_cast<std::size_t>(outer) * n * inner, 0.0);
  for (int o = 0; o < outer; ++o)
    for (int i = 0; i < n; ++i) {
      double* c = out.data() + (static_cast<std::size_t>(o) * n + i) * inner;
      double* lo = out.data() + (static_cast<std::size_t>(o) * n + std::max(i - 1, 0)) * inner;
      double* hi = out.data() + (static_cast<std::size_t>(o) * n + std::min(i + 1, n - 1)) * inner;
      const double* e = g.data() + (static_cast<std::size_t>(o) * 2 * n + 2 * i) * inner;
      const double* f = e + inner;
      for (int k = 0; k < inner; ++k) {
        c[k] += 0.75 * (e[k] + f[k]);
        lo[k] += 0.25 * e[k];
        hi[k] += 0.25 * f[k];
      }
    }
  return out;
}

}  // namespace

Var upsample2x(const Var& x) {
  check(x.value().rank() == 4, "upsample2x", "input must be [channels, X, Y, Z]");
  const int C = x.value().dim(0), X = x.value().dim(1), Y = x.value().dim(2), Z = x.value().dim(3);
  std::vector<double> v = upsample_axis(x.value().values(), C, X, Y * Z);
  v = upsample_axis(v, C * 2 * X, Y, Z);
  v = upsample_axis(v, C * 4 * X * Y, Z, 1);
  return make_result(Tensor({C, 2 * X, 2 * Y, 2 * Z}, std::move(v)), {x}, [C, X, Y, Z](Node& n) {
    std::vector<double> g = upsample_axis_adjoint(n.grad.values(), C * 4 * X * Y, Z, 1);
    g = upsample_axis_adjoint(g, C * 2 * X, Y, Z);
    g = upsample_axis_adjoint(g, C, X, Y * Z);
    double* dst = n.parents[0]->grad_buffer().data();
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
  });
}

}  // namespace trex::ag
