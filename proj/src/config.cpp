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
#include "trex/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace trex::config {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// Field tables. Each section lists its keys once; the writer and the reader
// below walk the same table, so the two can never drift apart. Fields that
// are derived in resolve() are deliberately absent.
template <class T>
struct Fields;

template <>
struct Fields<synth::GrowthConfig> {
  template <class F>
  static void visit(F& f, synth::GrowthConfig& c) {
    f("volume_shape", c.volume_shape);
    f("target_point_count", c.target_point_count);
    f("root_radius", c.root_radius);
    f("radius_decay", c.radius_decay);
    f("bifurcation_prob_per_step", c.bifurcation_prob_per_step);
    f("min_radius", c.min_radius);
    f("max_out_degree", c.max_out_degree);
    f("clearance_factor", c.clearance_factor);
    f("step_length", c.step_length);
    f("tortuosity", c.tortuosity);
    f("min_branch_length", c.min_branch_length);
    f("bifurcation_angle_deg", c.bifurcation_angle_deg);
    f("hop_exclusion_factor", c.hop_exclusion_factor);
    f("max_step_retries", c.max_step_retries);
    f("max_restarts", c.max_restarts);
  }
};

template <>
struct Fields<synth::RenderConfig> {
  template <class F>
  static void visit(F& f, synth::RenderConfig& c) {
    f("foreground", c.foreground);
    f("background", c.background);
    f("noise_std", c.noise_std);
    f("blur_sigma", c.blur_sigma);
  }
};

template <>
struct Fields<DatasetSection> {
  template <class F>
  static void visit(F& f, DatasetSection& c) {
    f("n_train", c.n_train);
    f("n_val", c.n_val);
    f("n_test", c.n_test);
    f("workers", c.workers);
  }
};

template <>
struct Fields<model::ModelConfig> {
  template <class F>
  static void visit(F& f, model::ModelConfig& c) {
    f("embed_dim", c.embed_dim);
    f("decoder_layers", c.decoder_layers);
    f("attention_heads", c.attention_heads);
    f("focal_size", c.focal_size);
    f("context_size", c.context_size);
    f("feature_stride", c.feature_stride);
    f("bifurcation_query_count", c.bifurcation_query_count);
    f("max_queries", c.max_queries);
    f("class_count", c.class_count);
    f("channels", c.channels);
  }
};

template <>
struct Fields<train::LossWeights> {
  template <class F>
  static void visit(F& f, train::LossWeights& c) {
    f("class", c.w_class);
    f("offset", c.w_offset);
    f("radius", c.w_radius);
    f("discard", c.discard);
  }
};

template <>
struct Fields<train::Ablation> {
  template <class F>
  static void visit(F& f, train::Ablation& c) {
    f("stt", c.stt);
    f("fca", c.fca);
    f("ta", c.ta);
  }
};

template <>
struct Fields<sample::SamplerConfig> {
  template <class F>
  static void visit(F& f, sample::SamplerConfig& c) {
    f("short_path_fraction", c.short_path_fraction);
  }
};

template <>
struct Fields<sample::AugmentConfig> {
  template <class F>
  static void visit(F& f, sample::AugmentConfig& c) {
    f("laplace_scale_factor", c.laplace_scale_factor);
    f("noise_std", c.noise_std);
    f("smoothing_window", c.smoothing_window);
    f("smoothed_nodes", c.smoothed_nodes);
  }
};

template <>
struct Fields<train::TrainConfig> {
  template <class F>
  static void visit(F& f, train::TrainConfig& c) {
    f("iterations", c.iterations);
    f("batch_size", c.batch_size);
    f("learning_rate", c.learning_rate);
    f("min_lr_fraction", c.min_lr_fraction);
    f("grad_clip", c.grad_clip);
    f("tip_jitter", c.tip_jitter);
    f("aux_loss", c.aux_loss);
    f("checkpoint_every", c.checkpoint_every);
    f("log_every", c.log_every);
    f("workers", c.workers);
    f("weights", c.weights);
    f("ablate", c.ablate);
    f("sampler", c.sampler);
    f("augment", c.augment);
  }
};

template <>
struct Fields<tracking::TrackerConfig> {
  template <class F>
  static void visit(F& f, tracking::TrackerConfig& c) {
    f("steps_per_patch", c.steps_per_patch);
    f("max_concurrent", c.max_concurrent);
    f("max_total_nodes", c.max_total_nodes);
    f("max_depth", c.max_depth);
    f("max_children", c.max_children);
    f("root_radius", c.root_radius);
  }
};

template <>
struct Fields<Paths> {
  template <class F>
  static void visit(F& f, Paths& c) {
    f("dataset_dir", c.dataset_dir);
    f("runs_dir", c.runs_dir);
    f("run_name", c.run_name);
  }
};

template <>
struct Fields<RunConfig> {
  template <class F>
  static void visit(F& f, RunConfig& c) {
    f("seed", c.seed);
    f("run_index", c.run_index);
    f("growth", c.growth);
    f("render", c.render);
    f("dataset", c.dataset);
    f("model", c.model);
    f("train", c.train);
    f("tracker", c.tracker);
    f("paths", c.paths);
  }
};

template <class T>
concept Section = requires { sizeof(Fields<T>); };

struct Writer {
  ordered_json& out;
  template <class T>
  void operator()(const char* key, T& v) {
    if constexpr (Section<T>) {
      ordered_json sub = ordered_json::object();
      Writer w{sub};
      Fields<T>::visit(w, v);
      out[key] = std::move(sub);
    } else {
      out[key] = v;
    }
  }
};

template <class T>
void read_section(const json& j, const std::string& prefix, T& target);

struct Reader {
  const json& in;
  std::string prefix;
  std::set<std::string> known;
  template <class T>
  void operator()(const char* key, T& v) {
    known.insert(key);
    const auto it = in.find(key);
    if (it == in.end()) return;
    const std::string name = prefix + key;
    if constexpr (Section<T>) {
      read_section(*it, name + ".", v);
    } else {
      try {
        v = it->template get<T>();
      } catch (const json::exception& e) {
        throw ConfigError(name + ": " + e.what());
      }
    }
  }
};

template <class T>
void read_section(const json& j, const std::string& prefix, T& target) {
  const std::string where = prefix.empty() ? "config" : prefix.substr(0, prefix.size() - 1);
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  Reader r{j, prefix, {}};
  Fields<T>::visit(r, target);
  for (const auto& [key, v] : j.items())
    if (!r.known.count(key)) throw ConfigError(prefix + key + ": unknown key");
}

}  // namespace

void RunConfig::resolve() {
  train.seed = train_seed();
  model.fca = train.ablate.fca;
  tracker.carry_queries = train.ablate.stt;
  tracker.bifurcation_query_count = model.bifurcation_query_count;
}

void RunConfig::validate() const {
  growth.validate();
  model.validate();
  train.validate();
  tracker.validate();
  if (dataset.n_train < 0 || dataset.n_val < 0 || dataset.n_test < 0)
    throw ConfigError("dataset: sample counts must be >= 0");
  if (dataset.workers < 1) throw ConfigError("dataset.workers: must be >= 1");
  if (render.noise_std < 0.0) throw ConfigError("render.noise_std: must be >= 0");
  if (render.blur_sigma < 0.0) throw ConfigError("render.blur_sigma: must be >= 0");
  if (tracker.max_concurrent > model.max_queries)
    throw ConfigError("tracker.max_concurrent: exceeds model.max_queries");
  if (run_index < 0) throw ConfigError("run_index: must be >= 0");
  if (paths.run_name.empty() || paths.run_name.find('/') != std::string::npos)
    throw ConfigError("paths.run_name: must be a non-empty plain name");
}

std::uint64_t RunConfig::train_seed() const { return derive_seed(seed, 1 + static_cast<std::uint64_t>(run_index)); }
std::uint64_t RunConfig::model_init_seed() const { return derive_seed(train_seed(), 0); }

synth::DatasetConfig RunConfig::dataset_config() const {
  synth::DatasetConfig d;
  d.growth = growth;
  d.render = render;
  d.master_seed = seed;
  d.workers = static_cast<std::size_t>(dataset.workers);
  return d;
}

ordered_json to_json(const RunConfig& c) {
  ordered_json out = ordered_json::object();
  Writer w{out};
  Fields<RunConfig>::visit(w, const_cast<RunConfig&>(c));
  return out;
}

RunConfig from_json(const json& j) {
  RunConfig c;
  read_section(j, "", c);
  c.resolve();
  return c;
}

RunConfig load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return from_json(j);
}

void apply_ablation(RunConfig& c, const std::string& spec) {
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("--ablate: expected key=on|off, got '" + item + "'");
    const std::string key = item.substr(0, eq), val = item.substr(eq + 1);
    if (val != "on" && val != "off") throw ConfigError("--ablate " + key + ": value must be on or off");
    const bool on = val == "on";
    if (key == "stt") c.train.ablate.stt = on;
    else if (key == "fca") c.train.ablate.fca = on;
    else if (key == "ta") c.train.ablate.ta = on;
    else throw ConfigError("--ablate " + key + ": unknown key (stt, fca, ta)");
  }
  c.resolve();
}

std::string runs_root(const RunConfig& c) {
  if (const char* env = std::getenv("TREXSUPER_RUNS_DIR"); env && *env) return env;
  return c.paths.runs_dir;
}

std::string run_dir(const RunConfig& c) {
  return (std::filesystem::path(runs_root(c)) / (c.paths.run_name + "-r" + std::to_string(c.run_index))).string();
}

void make_run_layout(const std::string& dir) {
  for (const char* sub : {"config", "checkpoints", "logs", "predictions", "reports"})
    std::filesystem::create_directories(std::filesystem::path(dir) / sub);
}

}  // namespace trex::config
