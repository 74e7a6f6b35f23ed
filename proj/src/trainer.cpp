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
#include "trex/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace trex::train {

namespace {

using ag::Tensor;
using ag::Var;

constexpr char kMagic[8] = {'T', 'R', 'E', 'X', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;

Var crop_input(const Volume& volume, const ForwardOptions& opt, std::array<int, 3> center, int size) {
  if (opt.volume.defined()) return ag::crop3d(opt.volume, center, size);
  const Volume c = sample::crop_cube(volume, center, size);
  return ag::constant(Tensor({1, size, size, size}, std::vector<double>(c.voxels.begin(), c.voxels.end())));
}

Vec3 incoming_direction(const sample::IndexedTree& t, int node) {
  const int parent = t.index.parent[node];
  if (parent < 0) return {0, 0, 0};
  return normalized(t.pos(node) - t.pos(parent));
}

}  // namespace

void LossWeights::validate() const {
  auto check = [](double v, const char* name) {
    if (!std::isfinite(v) || v < 0.0) throw ConfigError(std::string("train.weights.") + name + ": must be >= 0");
  };
  check(w_class, "class");
  check(w_offset, "offset");
  check(w_radius, "radius");
  check(discard, "discard");
}

void TrainConfig::validate() const {
  if (iterations < 0) throw ConfigError("train.iterations: must be >= 0");
  if (batch_size < 1) throw ConfigError("train.batch_size: must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("train.learning_rate: must be > 0");
  if (!(min_lr_fraction >= 0.0 && min_lr_fraction <= 1.0))
    throw ConfigError("train.min_lr_fraction: must be in [0, 1]");
  if (!(grad_clip > 0.0)) throw ConfigError("train.grad_clip: must be > 0");
  if (!(tip_jitter >= 0.0)) throw ConfigError("train.tip_jitter: must be >= 0");
  if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every: must be >= 0");
  if (log_every < 1) throw ConfigError("train.log_every: must be >= 1");
  if (workers < 1) throw ConfigError("train.workers: must be >= 1");
  if (!(sampler.short_path_fraction >= 0.0 && sampler.short_path_fraction <= 1.0))
    throw ConfigError("train.sampler.short_path_fraction: must be in [0, 1]");
  weights.validate();
  augment.validate();
}

// ---------------------------------------------------------------- losses

RowTarget row_target(const sample::StepTarget& t) { return {t.cls, t.offset, t.radius}; }

std::vector<RowTarget> rows_from_assignment(const std::vector<sample::StepTarget>& targets, const Assignment& a) {
  std::vector<RowTarget> rows(a.target_of_pred.size());
  for (std::size_t p = 0; p < rows.size(); ++p)
    if (a.target_of_pred[p] >= 0) rows[p] = row_target(targets[a.target_of_pred[p]]);
  return rows;
}

LossParts& LossParts::operator+=(const LossParts& o) {
  if (!o.total.defined()) return *this;
  total = total.defined() ? ag::add(total, o.total) : o.total;
  cls += o.cls;
  offset += o.offset;
  radius += o.radius;
  return *this;
}

LossParts step_loss(const model::HeadOutput& out, const std::vector<RowTarget>& rows, const LossWeights& w,
                    double scale) {
  const int q = static_cast<int>(rows.size());
  if (out.logits.shape()[0] != q)
    throw std::invalid_argument("step_loss: " + std::to_string(q) + " targets for " +
                                std::to_string(out.logits.shape()[0]) + " predictions");
  std::vector<int> cls(q);
  std::vector<double> cw(q), ow(q), rw(q);
  Tensor off({q, 3}), rad({q, 1});
  for (int i = 0; i < q; ++i) {
    cls[i] = rows[i].cls;
    cw[i] = w.w_class * scale * (rows[i].cls == sample::kDiscard ? w.discard : 1.0);
    if (rows[i].real()) {
      ow[i] = w.w_offset * scale;
      rw[i] = w.w_radius * scale;
      for (int k = 0; k < 3; ++k) off.at(i, k) = rows[i].offset[k];
      rad.at(i, 0) = rows[i].radius;
    }
  }
  LossParts p;
  const Var c = ag::cross_entropy_rows(out.logits, cls, cw);
  const Var o = ag::l1_rows(out.offset, off, ow);
  const Var r = ag::l1_rows(out.radius, rad, rw);
  p.cls = c.item();
  p.offset = o.item();
  p.radius = r.item();
  p.total = ag::sum_vars({c, o, r});
  return p;
}

// ---------------------------------------------------------------- forward

ForwardResult forward_trajectory(const model::Model& m, const Volume& volume, const sample::IndexedTree& tree,
                                 const sample::TrajectoryTargets& targets, const TrainConfig& cfg,
                                 const ForwardOptions& opt) {
  const auto& mc = m.config();
  const auto& dirs = sample::neighbour_directions();
  ForwardResult res;
  for (const auto& sub : targets)
    if (opt.loss_sub < 0 || opt.loss_sub == sub.index)
      for (const auto& st : sub.steps) res.supervised_rows += static_cast<int>(st.size());
  if (res.supervised_rows == 0) {
    res.loss.total = ag::constant(Tensor({1}, 0.0));
    return res;
  }
  const double scale = 1.0 / res.supervised_rows;

  Var carried;
  for (const auto& sub : targets) {
    const bool counted = opt.loss_sub < 0 || opt.loss_sub == sub.index;
    const auto& tf = sub.transform;
    const model::Encoded enc = m.encode(crop_input(volume, opt, tf.center, mc.input_size()));
    ++res.patches;

    std::map<int, Var> live;
    Var start = (cfg.ablate.stt && carried.defined()) ? carried
                                                      : m.embed_past_trajectory(sub.past_positions, sub.past_radii);
    if (sub.index == 0 && opt.embedding_probe.defined()) start = ag::add(start, opt.embedding_probe);
    live[sub.primary_key] = start;

    for (int t = 0; t < sample::kStepsPerSub; ++t) {
      const auto& step = sub.steps[t];
      if (step.empty()) continue;
      std::vector<Var> embs;
      std::vector<model::QueryInput> inputs;
      std::vector<std::pair<int, const sample::StepTarget*>> regular;
      struct Group {
        int first = 0;
        const sample::SpawnGroup* spawn = nullptr;
        std::vector<sample::StepTarget> targets;
        Assignment final_match;
      };
      std::vector<Group> groups;

      // Optional tip jitter: the query sees a displaced tip and its target
      // still points at the true next node, so the model learns to steer
      // back onto the centreline.
      auto jitter = [&]() {
        Vec3 d{};
        if (opt.jitter_rng && cfg.tip_jitter > 0.0)
          for (double& x : d) x = opt.jitter_rng->normal(0.0, cfg.tip_jitter) / tf.half;
        return d;
      };
      std::vector<sample::StepTarget> shifted;
      shifted.reserve(step.size());
      for (const auto& target : step) {
        if (sub.is_spawned(t, target.branch_key)) continue;
        const Vec3 d = jitter();
        shifted.push_back(target);
        if (shifted.back().cls != sample::kEnd) shifted.back().offset = shifted.back().offset - d;
        regular.emplace_back(static_cast<int>(embs.size()), &shifted.back());
        embs.push_back(live.at(target.branch_key));
        inputs.push_back({tf.to_patch(tree.pos(target.from_node)) + d, incoming_direction(tree, target.from_node)});
      }
      for (const auto& sp : sub.spawns) {
        if (sp.step != t) continue;
        Group g;
        g.first = static_cast<int>(embs.size());
        g.spawn = &sp;
        const auto spawned = m.spawn_bifurcation_queries(live.at(sp.parent_key));
        const Vec3 d = jitter();
        const Vec3 tip = tf.to_patch(tree.pos(sp.node)) + d;
        for (std::size_t j = 0; j < spawned.size(); ++j) {
          embs.push_back(spawned[j]);
          inputs.push_back({tip, dirs[j]});
        }
        for (int key : sp.child_keys) {
          g.targets.push_back(*sub.find(t, key));
          if (g.targets.back().cls != sample::kEnd) g.targets.back().offset = g.targets.back().offset - d;
        }
        groups.push_back(std::move(g));
      }

      const model::StepOutput out = m.decode_step(embs, inputs, enc);
      const int layers = static_cast<int>(out.layers.size());
      for (int l = cfg.aux_loss ? 0 : layers - 1; l < layers; ++l) {
        std::vector<RowTarget> rows(embs.size());
        for (const auto& [q, target] : regular) rows[q] = row_target(*target);
        for (auto& g : groups) {
          const int k = mc.bifurcation_query_count;
          const Assignment a = hungarian_match(to_predictions(out.layers[l], g.first, g.first + k), g.targets,
                                               cfg.weights);
          const auto group_rows = rows_from_assignment(g.targets, a);
          std::copy(group_rows.begin(), group_rows.end(), rows.begin() + g.first);
          if (l == layers - 1) g.final_match = a;
        }
        if (counted) res.loss += step_loss(out.layers[l], rows, cfg.weights, scale);
      }

      for (const auto& [q, target] : regular) {
        if (target->cls == sample::kEnd) live.erase(target->branch_key);
        else live[target->branch_key] = ag::slice_rows(out.embedding, q, q + 1);
      }
      for (const auto& g : groups) {
        live.erase(g.spawn->parent_key);
        for (std::size_t i = 0; i < g.targets.size(); ++i) {
          const int q = g.first + g.final_match.pred_of_target[i];
          if (g.targets[i].cls != sample::kEnd) live[g.targets[i].branch_key] = ag::slice_rows(out.embedding, q, q + 1);
        }
      }
    }
    carried = Var();
    if (sub.carry_key >= 0) {
      auto it = live.find(sub.carry_key);
      if (it != live.end()) carried = it->second;
    }
  }
  if (!res.loss.total.defined()) res.loss.total = ag::constant(Tensor({1}, 0.0));
  return res;
}

BuiltSample build_sample(const SampleData& s, const model::ModelConfig& mc, const TrainConfig& cfg, Rng& rng) {
  sample::SuperTrajectory traj = sample::sample_super_trajectory(s.tree, rng, cfg.sampler);
  const sample::PatchGeometry g{mc.focal_size, mc.context_size};
  if (cfg.ablate.ta) {
    sample::AugmentResult aug = sample::augment_targets(traj, s.tree, g, cfg.augment, rng);
    return {std::move(traj), std::move(aug.tree), std::move(aug.targets)};
  }
  sample::TrajectoryTargets targets = sample::build_step_targets(traj, s.tree, g);
  return {std::move(traj), s.tree, std::move(targets)};
}

// ---------------------------------------------------------------- optimiser

Trainer::Trainer(model::Model& m, TrainConfig cfg, const std::vector<SampleData>* data)
    : model_(m), cfg_(std::move(cfg)), data_(data) {
  cfg_.validate();
  if (m.config().fca != cfg_.ablate.fca)
    throw ConfigError("ablate.fca: model config says " + std::string(m.config().fca ? "on" : "off"));
  for (const auto& [name, p] : model_.params().entries()) {
    m_.emplace_back(p.shape(), 0.0);
    v_.emplace_back(p.shape(), 0.0);
  }
}

double Trainer::learning_rate(int iteration) const {
  const double lo = cfg_.learning_rate * cfg_.min_lr_fraction;
  if (cfg_.iterations <= 0) return cfg_.learning_rate;
  const double frac = std::min(1.0, static_cast<double>(iteration) / cfg_.iterations);
  return lo + (cfg_.learning_rate - lo) * 0.5 * (1.0 + std::cos(M_PI * frac));
}

StepLog Trainer::step() {
  if (data_ == nullptr || data_->empty()) throw std::runtime_error("training set is empty");
  const auto t0 = std::chrono::steady_clock::now();
  StepLog log;
  log.iteration = iteration_;
  log.lr = learning_rate(iteration_);
  model_.params().zero_grad();

  Rng rng(derive_seed(cfg_.seed, static_cast<std::uint64_t>(iteration_)));
  std::string batch_ids;
  for (int b = 0; b < cfg_.batch_size; ++b) {
    const SampleData& s = (*data_)[rng.below(data_->size())];
    batch_ids += (b ? ", '" : "'") + s.id + "'";
    const BuiltSample built = build_sample(s, model_.config(), cfg_, rng);
    ForwardOptions fo;
    fo.jitter_rng = &rng;
    const ForwardResult fr = forward_trajectory(model_, s.volume, built.tree, built.targets, cfg_, fo);
    const double loss = fr.loss.total.item();
    if (!std::isfinite(loss))
      throw std::runtime_error("non-finite loss at iteration " + std::to_string(iteration_) + " on sample '" + s.id +
                               "' (class " + std::to_string(fr.loss.cls) + ", offset " +
                               std::to_string(fr.loss.offset) + ", radius " + std::to_string(fr.loss.radius) + ")");
    if (fr.loss.total.requires_grad()) ag::backward(fr.loss.total, 1.0 / cfg_.batch_size);
    log.loss += loss / cfg_.batch_size;
    log.cls += fr.loss.cls / cfg_.batch_size;
    log.offset += fr.loss.offset / cfg_.batch_size;
    log.radius += fr.loss.radius / cfg_.batch_size;
  }

  const auto& entries = model_.params().entries();
  double sq = 0.0;
  for (const auto& [name, p] : entries)
    if (!p.grad().empty())
      for (double g : p.grad().values()) sq += g * g;
  log.grad_norm = std::sqrt(sq);
  if (!std::isfinite(log.grad_norm))
    throw std::runtime_error("non-finite gradient at iteration " + std::to_string(iteration_) + " on samples " +
                             batch_ids);
  const double clip = log.grad_norm > cfg_.grad_clip ? cfg_.grad_clip / log.grad_norm : 1.0;

  const double t = iteration_ + 1;
  const double c1 = 1.0 - std::pow(kBeta1, t), c2 = 1.0 - std::pow(kBeta2, t);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Var p = entries[i].second;
    // A parameter without a gradient this step still decays its moments.
    // Skipping it would make the update depend on whether an earlier step in
    // the same process allocated its gradient, which breaks exact resume.
    double* w = p.mutable_value().data();
    const double* g = p.grad().empty() ? nullptr : p.grad().data();
    double* m = m_[i].data();
    double* v = v_[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double gj = g ? g[j] * clip : 0.0;
      m[j] = kBeta1 * m[j] + (1.0 - kBeta1) * gj;
      v[j] = kBeta2 * v[j] + (1.0 - kBeta2) * gj * gj;
      w[j] -= log.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + kAdamEps);
    }
  }
  ++iteration_;
  log.wallclock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return log;
}

// ---------------------------------------------------------------- checkpoints

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}
void put_doubles(std::string& out, const Tensor& t) {
  for (double d : t.values()) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put_u64(out, bits);
  }
}

class Reader {
 public:
  Reader(std::string_view bytes, std::string path) : bytes_(bytes), path_(std::move(path)) {}

  std::uint64_t u(int width, const char* field) {
    need(width, field);
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += width;
    return v;
  }
  std::string str(const char* field) {
    const std::size_t n = u(4, field);
    need(n, field);
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  void doubles(Tensor& t, const char* field) {
    need(t.size() * 8, field);
    for (double& d : t.values()) {
      const std::uint64_t bits = u(8, field);
      std::memcpy(&d, &bits, 8);
    }
  }
  std::size_t pos() const { return pos_; }
  [[noreturn]] void fail(const std::string& field, const std::string& what) const {
    throw ParseError(path_ + ": byte " + std::to_string(pos_) + ": field '" + field + "': " + what);
  }

 private:
  void need(std::size_t n, const char* field) const {
    if (pos_ + n > bytes_.size()) fail(field, "truncated");
  }
  std::string_view bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

struct ParamRecord {
  std::string name;
  Tensor value, m, v;
};

struct Checkpoint {
  CheckpointInfo info;
  std::uint64_t seed = 0;
  std::vector<ParamRecord> params;
};

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Checkpoint parse_checkpoint(const std::string& path, bool with_params) {
  const std::string bytes = read_bytes(path);
  if (bytes.size() < sizeof(kMagic) + 8 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw ParseError(path + ": byte 0: field 'magic': not a trexsuper checkpoint");
  const std::string_view body(bytes.data(), bytes.size() - 8);
  Reader tail(std::string_view(bytes).substr(bytes.size() - 8), path);
  if (tail.u(8, "checksum") != fnv1a(body))
    throw ParseError(path + ": byte " + std::to_string(body.size()) + ": field 'checksum': mismatch, file is corrupted");

  Reader r(body, path);
  r.u(8, "magic");
  const auto version = r.u(4, "version");
  if (version != kCheckpointVersion) r.fail("version", "unsupported version " + std::to_string(version));
  Checkpoint ck;
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(r.str("header"));
    ck.info.model = model::ModelConfig::from_json(meta.at("model"));
    ck.info.ablate.stt = meta.at("ablate").at("stt").get<bool>();
    ck.info.ablate.fca = meta.at("ablate").at("fca").get<bool>();
    ck.info.ablate.ta = meta.at("ablate").at("ta").get<bool>();
    ck.seed = meta.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    r.fail("header", e.what());
  }
  ck.info.iteration = static_cast<int>(r.u(4, "iteration"));
  if (!with_params) return ck;
  const auto count = r.u(4, "param_count");
  for (std::uint64_t i = 0; i < count; ++i) {
    ParamRecord p;
    p.name = r.str("param_name");
    const auto rank = r.u(4, "param_rank");
    if (rank > 8) r.fail("param_rank", "implausible rank " + std::to_string(rank));
    ag::Shape shape;
    for (std::uint64_t k = 0; k < rank; ++k) shape.push_back(static_cast<int>(r.u(4, "param_shape")));
    p.value = p.m = p.v = Tensor(shape, 0.0);
    r.doubles(p.value, "param_value");
    r.doubles(p.m, "param_adam_m");
    r.doubles(p.v, "param_adam_v");
    ck.params.push_back(std::move(p));
  }
  if (r.pos() != body.size()) r.fail("trailer", "unexpected trailing bytes");
  return ck;
}

void check_against(const Checkpoint& ck, const model::Model& m, const std::string& path) {
  if (!(ck.info.model == m.config()))
    throw ConfigError(path + ": model config differs from the current one: checkpoint " + ck.info.model.to_json().dump() +
                      " vs " + m.config().to_json().dump());
  const auto& entries = m.params().entries();
  if (ck.params.size() != entries.size())
    throw ConfigError(path + ": " + std::to_string(ck.params.size()) + " parameters, model has " +
                      std::to_string(entries.size()));
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (ck.params[i].name != entries[i].first)
      throw ConfigError(path + ": parameter " + std::to_string(i) + " is '" + ck.params[i].name + "', expected '" +
                        entries[i].first + "'");
    if (ck.params[i].value.shape() != entries[i].second.shape())
      throw ConfigError(path + ": parameter '" + entries[i].first + "' has shape " +
                        ag::shape_string(ck.params[i].value.shape()) + ", expected " +
                        ag::shape_string(entries[i].second.shape()));
  }
}

}  // namespace

void Trainer::save_checkpoint(const std::string& path) const {
  std::string out(kMagic, sizeof(kMagic));
  put_u32(out, kCheckpointVersion);
  nlohmann::json meta = {{"model", model_.config().to_json()},
                         {"ablate", {{"stt", cfg_.ablate.stt}, {"fca", cfg_.ablate.fca}, {"ta", cfg_.ablate.ta}}},
                         {"seed", cfg_.seed}};
  put_str(out, meta.dump());
  put_u32(out, static_cast<std::uint32_t>(iteration_));
  const auto& entries = model_.params().entries();
  put_u32(out, static_cast<std::uint32_t>(entries.size()));
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& [name, p] = entries[i];
    put_str(out, name);
    put_u32(out, static_cast<std::uint32_t>(p.shape().size()));
    for (int d : p.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    put_doubles(out, p.value());
    put_doubles(out, m_[i]);
    put_doubles(out, v_[i]);
  }
  put_u64(out, fnv1a(out));

  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + tmp + "' for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("write failed for '" + tmp + "'");
  }
  fs::rename(tmp, target);
}

void Trainer::load_checkpoint(const std::string& path) {
  const Checkpoint ck = parse_checkpoint(path, true);
  check_against(ck, model_, path);
  if (ck.info.ablate.stt != cfg_.ablate.stt || ck.info.ablate.ta != cfg_.ablate.ta)
    throw ConfigError(path + ": ablation flags differ from the current run");
  if (ck.seed != cfg_.seed)
    throw ConfigError(path + ": seed " + std::to_string(ck.seed) + " differs from the current " +
                      std::to_string(cfg_.seed));
  const auto& entries = model_.params().entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Var p = entries[i].second;
    p.mutable_value() = ck.params[i].value;
    m_[i] = ck.params[i].m;
    v_[i] = ck.params[i].v;
  }
  iteration_ = ck.info.iteration;
}

CheckpointInfo read_checkpoint_info(const std::string& path) { return parse_checkpoint(path, false).info; }

void load_model_weights(model::Model& m, const std::string& path) {
  const Checkpoint ck = parse_checkpoint(path, true);
  check_against(ck, m, path);
  const auto& entries = m.params().entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Var p = entries[i].second;
    p.mutable_value() = ck.params[i].value;
  }
}

std::string log_header() { return "iteration\tloss\tclass_loss\toffset_loss\tradius_loss\tlr\twallclock_s"; }

std::string format_log_line(const StepLog& s) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d\t%.9g\t%.9g\t%.9g\t%.9g\t%.6g\t%.3f", s.iteration, s.loss, s.cls, s.offset, s.radius,
                s.lr, s.wallclock_s);
  return buf;
}

}  // namespace trex::train
