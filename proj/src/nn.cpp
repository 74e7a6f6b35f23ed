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
#include "trex/nn.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace trex::nn {

ag::Var ParamStore::add(const std::string& name, ag::Tensor init) {
  if (lookup_.count(name)) throw std::logic_error("duplicate parameter '" + name + "'");
  lookup_[name] = entries_.size();
  entries_.emplace_back(name, ag::Var::parameter(std::move(init)));
  return entries_.back().second;
}

const ag::Var& ParamStore::get(const std::string& name) const {
  auto it = lookup_.find(name);
  if (it == lookup_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return entries_[it->second].second;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.second.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.second.zero_grad();
}

std::uint64_t ParamStore::hash() const {
  std::uint64_t h = fnv1a("params");
  for (const auto& [name, v] : entries_) {
    h = fnv1a(name, h);
    const auto& vals = v.value().values();
    h = fnv1a(std::string_view(reinterpret_cast<const char*>(vals.data()), vals.size() * sizeof(double)), h);
  }
  return h;
}

ag::Tensor uniform_tensor(ag::Shape shape, double bound, Rng& rng) {
  ag::Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(-bound, bound);
  return t;
}

Linear Linear::make(ParamStore& ps, const std::string& name, int in, int out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Linear l;
  l.w = ps.add(name + ".w", uniform_tensor({out, in}, bound, rng));
  l.b = ps.add(name + ".b", uniform_tensor({out}, bound, rng));
  return l;
}

LayerNorm LayerNorm::make(ParamStore& ps, const std::string& name, int dim) {
  LayerNorm n;
  n.gamma = ps.add(name + ".gamma", ag::Tensor({dim}, 1.0));
  n.beta = ps.add(name + ".beta", ag::Tensor({dim}, 0.0));
  return n;
}

Conv3d Conv3d::make(ParamStore& ps, const std::string& name, int cin, int cout, int k, int stride, int pad, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(cin * k * k * k));
  Conv3d c;
  c.w = ps.add(name + ".w", uniform_tensor({cout, cin, k, k, k}, bound, rng));
  c.b = ps.add(name + ".b", uniform_tensor({cout}, bound, rng));
  c.stride = stride;
  c.pad = pad;
  return c;
}

std::vector<ag::Var> split_heads(const ag::Var& x, int heads) {
  const int e = x.value().cols();
  const int d = e / heads;
  std::vector<ag::Var> out;
  for (int h = 0; h < heads; ++h) out.push_back(heads == 1 ? x : ag::slice_cols(x, h * d, (h + 1) * d));
  return out;
}

ag::Var attention(const ag::Var& q, const std::vector<ag::Var>& k_heads, const std::vector<ag::Var>& v_heads) {
  const int heads = static_cast<int>(k_heads.size());
  const auto q_heads = split_heads(q, heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(k_heads[0].value().cols()));
  std::vector<ag::Var> outs;
  for (int h = 0; h < heads; ++h) {
    const ag::Var scores = ag::scale(ag::matmul_nt(q_heads[h], k_heads[h]), scale);
    outs.push_back(ag::matmul(ag::softmax_rows(scores), v_heads[h]));
  }
  return heads == 1 ? outs[0] : ag::concat_cols(outs);
}

}  // namespace trex::nn
