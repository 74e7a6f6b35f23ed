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
#pragma once

// Differentiable operations. Matrices are rank-2 row-major tensors; volumes
// are rank-4 [channels, x, y, z] tensors.

#include <array>
#include <vector>

#include "trex/ag/tensor.hpp"
#include "trex/common.hpp"

namespace trex::ag {

Var constant(Tensor t);

// elementwise (identical shapes)
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_constant(const Var& a, const Tensor& c);
/// a[n, m] + b[m] broadcast over rows
Var add_row(const Var& a, const Var& b);

Var relu(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var softplus(const Var& a);

Var matmul(const Var& a, const Var& b);     // [n,k] x [k,m]
Var matmul_nt(const Var& a, const Var& b);  // [n,k] x [m,k]^T
/// x[n, in] W[out, in]^T + b[out]
Var linear(const Var& x, const Var& w, const Var& b);

Var softmax_rows(const Var& a);
Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
/// Rows scaled to unit L2 norm: x / sqrt(|x|^2 + eps).
Var normalize_rows(const Var& x, double eps = 1e-12);

Var reshape(const Var& a, Shape s);
Var transpose(const Var& a);
Var slice_cols(const Var& a, int begin, int end);
Var slice_rows(const Var& a, int begin, int end);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var gather_rows(const Var& a, const std::vector<int>& rows);

Var sum(const Var& a);
Var sum_vars(const std::vector<Var>& scalars);

/// Sum over rows of weight[i] * (-log softmax(logits[i])[target[i]]).
Var cross_entropy_rows(const Var& logits, const std::vector<int>& targets, const std::vector<double>& weights);
/// Sum over rows of weight[i] * sum_j |a[i,j] - target[i,j]|.
Var l1_rows(const Var& a, const Tensor& target, const std::vector<double>& weights);

/// 3-D convolution, x [cin, X, Y, Z], w [cout, cin, k, k, k], b [cout].
Var conv3d(const Var& x, const Var& w, const Var& b, int stride, int pad);
/// Separable linear 2x upsampling of a [C, X, Y, Z] tensor; each output
/// voxel mixes its source voxel (3/4) with the nearer neighbour (1/4).
Var upsample2x(const Var& x);

/// Cube of side `size` centred on integer voxel `center` of a [1, X, Y, Z]
/// volume; voxels outside the volume read as zero.
Var crop3d(const Var& volume, std::array<int, 3> center, int size);

/// Trilinear interpolation of a [gx*gy*gz, E] feature grid (z fastest) at
/// points given in grid-index coordinates; points are clamped to the grid.
Var trilinear_sample(const Var& grid, std::array<int, 3> dims, const std::vector<Vec3>& points);

}  // namespace trex::ag
