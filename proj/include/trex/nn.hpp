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

// Named parameters and the handful of layers the model is built from.

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "trex/ag/ops.hpp"
#include "trex/common.hpp"

namespace trex::nn {

/// Parameters in registration order. The order is part of the checkpoint
/// format and of the determinism contract.
class ParamStore {
 public:
  ag::Var add(const std::string& name, ag::Tensor init);
  const ag::Var& get(const std::string& name) const;
  bool contains(const std::string& name) const { return lookup_.count(name) > 0; }

  const std::vector<std::pair<std::string, ag::Var>>& entries() const { return entries_; }
  std::size_t scalar_count() const;
  void zero_grad();
  /// FNV-1a over names and raw value bytes.
  std::uint64_t hash() const;

 private:
  std::vector<std::pair<std::string, ag::Var>> entries_;
  std::map<std::string, std::size_t> lookup_;
};

ag::Tensor uniform_tensor(ag::Shape shape, double bound, Rng& rng);

struct Linear {
  ag::Var w, b;  // w [out, in]
  static Linear make(ParamStore& ps, const std::string& name, int in, int out, Rng& rng);
  ag::Var operator()(const ag::Var& x) const { return ag::linear(x, w, b); }
};

struct LayerNorm {
  ag::Var gamma, beta;
  static LayerNorm make(ParamStore& ps, const std::string& name, int dim);
  ag::Var operator()(const ag::Var& x) const { return ag::layer_norm_rows(x, gamma, beta); }
};

struct Conv3d {
  ag::Var w, b;  // w [cout, cin, k, k, k]
  int stride = 1, pad = 0;
  static Conv3d make(ParamStore& ps, const std::string& name, int cin, int cout, int k, int stride, int pad, Rng& rng);
  ag::Var operator()(const ag::Var& x) const { return ag::conv3d(x, w, b, stride, pad); }
};

/// Per-head column slices of a projected [n, E] matrix.
std::vector<ag::Var> split_heads(const ag::Var& x, int heads);

/// Scaled dot-product attention of `q` [n, E] over pre-split keys/values.
ag::Var attention(const ag::Var& q, const std::vector<ag::Var>& k_heads, const std::vector<ag::Var>& v_heads);

}  // namespace trex::nn
