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
#include "trex/evalsuite.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <tuple>
#include <unordered_map>

namespace trex::eval {

PointGrid::PointGrid(const std::vector<Vec3>& points, double cell) : points_(&points), cell_(cell) {
  if (!(cell > 0.0)) throw std::invalid_argument("PointGrid: cell size must be positive");
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec3& p = points[i];
    buckets_[key(std::lround(std::floor(p[0] / cell_)), std::lround(std::floor(p[1] / cell_)),
                 std::lround(std::floor(p[2] / cell_)))]
        .push_back(static_cast<int>(i));
  }
}

std::uint64_t PointGrid::key(long x, long y, long z) const {
  auto pack = [](long v) { return static_cast<std::uint64_t>(v + (1L << 20)) & 0x1fffff; };
  return (pack(x) << 42) | (pack(y) << 21) | pack(z);
}

void PointGrid::within(const Vec3& p, double radius, std::vector<int>& out) const {
  out.clear();
  const long cx = std::lround(std::floor(p[0] / cell_)), cy = std::lround(std::floor(p[1] / cell_)),
             cz = std::lround(std::floor(p[2] / cell_));
  for (long dx = -1; dx <= 1; ++dx)
    for (long dy = -1; dy <= 1; ++dy)
      for (long dz = -1; dz <= 1; ++dz) {
        auto it = buckets_.find(key(cx + dx, cy + dy, cz + dz));
        if (it == buckets_.end()) continue;
        for (int i : it->second)
          if (distance((*points_)[i], p) <= radius) out.push_back(i);
      }
}

bool PointGrid::any_within(const Vec3& p, double radius) const {
  std::vector<int> hits;
  within(p, radius, hits);
  return !hits.empty();
}

namespace {

std::vector<int> visit_order(const tree::CenterlineTree& t) {
  try {
    return tree::TreeIndex::build(t).bfs_order();
  } catch (const tree::InvalidTreeError&) {
    std::vector<int> order(t.nodes.size());
    std::iota(order.begin(), order.end(), 0);
    return order;
  }
}

std::unordered_map<int, int> id_to_index(const tree::CenterlineTree& t) {
  std::unordered_map<int, int> m;
  for (std::size_t i = 0; i < t.nodes.size(); ++i) m[t.nodes[i].id] = static_cast<int>(i);
  return m;
}

double safe_ratio(double a, double b) { return b > 0.0 ? a / b : 0.0; }
double harmonic(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace

PointMatchResult match_points(const tree::CenterlineTree& pred, const tree::CenterlineTree& gt, double radius) {
  std::vector<Vec3> gpos;
  for (const auto& n : gt.nodes) gpos.push_back(n.position);
  const PointGrid grid(gpos, std::max(radius, 1e-9));
  std::vector<char> taken(gt.nodes.size(), 0);
  PointMatchResult r;
  std::vector<int> hits;
  for (int pi : visit_order(pred)) {
    const Vec3& p = pred.nodes[pi].position;
    grid.within(p, radius, hits);
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int g : hits) {
      if (taken[g]) continue;
      const double d = distance(p, gpos[g]);
      if (d < best_d || (d == best_d && g < best)) {
        best = g;
        best_d = d;
      }
    }
    if (best < 0) {
      r.unmatched_pred.push_back(pred.nodes[pi].id);
    } else {
      taken[best] = 1;
      r.pairs.emplace_back(pred.nodes[pi].id, gt.nodes[best].id);
    }
  }
  for (std::size_t g = 0; g < gt.nodes.size(); ++g)
    if (!taken[g]) r.unmatched_gt.push_back(gt.nodes[g].id);
  return r;
}

PointMetrics point_metrics(const PointMatchResult& match, const tree::CenterlineTree& pred,
                           const tree::CenterlineTree& gt) {
  PointMetrics m;
  m.tp = static_cast<int>(match.pairs.size());
  m.fp = static_cast<int>(pred.nodes.size()) - m.tp;
  m.fn = static_cast<int>(gt.nodes.size()) - m.tp;
  m.precision = safe_ratio(m.tp, static_cast<double>(pred.nodes.size()));
  m.recall = safe_ratio(m.tp, static_cast<double>(gt.nodes.size()));
  m.f1 = harmonic(m.precision, m.recall);
  if (!match.pairs.empty()) {
    const auto pi = id_to_index(pred), gi = id_to_index(gt);
    double s = 0.0;
    for (const auto& [p, g] : match.pairs) s += std::abs(pred.nodes[pi.at(p)].radius - gt.nodes[gi.at(g)].radius);
    m.radius_mae = s / static_cast<double>(match.pairs.size());
  }
  return m;
}

BranchMetrics branch_metrics(const tree::CenterlineTree& pred, const tree::CenterlineTree& gt, double radius,
                             double coverage) {
  const auto pb = pred.empty() ? std::vector<tree::Branch>{} : tree::decompose_branches(pred);
  const auto gb = gt.empty() ? std::vector<tree::Branch>{} : tree::decompose_branches(gt);
  const auto pi = id_to_index(pred), gi = id_to_index(gt);

  std::vector<std::vector<Vec3>> gpts(gb.size());
  for (std::size_t j = 0; j < gb.size(); ++j)
    for (int id : gb[j].node_ids) gpts[j].push_back(gt.nodes[gi.at(id)].position);

  std::vector<int> order(pb.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return pb[a].node_ids.size() > pb[b].node_ids.size(); });

  std::vector<char> claimed(gb.size(), 0);
  BranchMetrics m;
  for (int b : order) {
    std::vector<Vec3> pts;
    for (int id : pb[b].node_ids) pts.push_back(pred.nodes[pi.at(id)].position);
    const PointGrid grid(pts, std::max(radius, 1e-9));
    int best = -1;
    double best_cov = -1.0;
    for (std::size_t j = 0; j < gb.size(); ++j) {
      if (claimed[j]) continue;
      int covered = 0;
      for (const Vec3& q : gpts[j]) covered += grid.any_within(q, radius);
      const double cov = static_cast<double>(covered) / static_cast<double>(gpts[j].size());
      if (cov >= coverage && cov > best_cov) {
        best = static_cast<int>(j);
        best_cov = cov;
      }
    }
    if (best >= 0) {
      claimed[best] = 1;
      ++m.tp;
    } else {
      ++m.fp;
    }
  }
  m.fn = static_cast<int>(gb.size()) - m.tp;
  m.precision = safe_ratio(m.tp, static_cast<double>(pb.size()));
  m.recall = safe_ratio(m.tp, static_cast<double>(gb.size()));
  m.f1 = harmonic(m.precision, m.recall);
  return m;
}

GraphMetrics graph_metrics(const tree::Graph& pred, const tree::Graph& gt) {
  const auto a = tree::betti_numbers(static_cast<int>(pred.positions.size()), pred.edges);
  const auto b = tree::betti_numbers(static_cast<int>(gt.positions.size()), gt.edges);
  return {std::abs(a.b0 - b.b0), std::abs(a.b1 - b.b1)};
}

GraphMetrics graph_metrics(const tree::CenterlineTree& pred, const tree::CenterlineTree& gt) {
  return graph_metrics(tree::to_graph(pred), tree::to_graph(gt));
}

SampleMetrics evaluate_sample(const std::string& id, const tree::CenterlineTree& pred, const tree::CenterlineTree& gt) {
  SampleMetrics s;
  s.id = id;
  s.point = point_metrics(match_points(pred, gt), pred, gt);
  s.branch = branch_metrics(pred, gt);
  s.graph = graph_metrics(pred, gt);
  return s;
}

MetricRow summarize(const std::vector<SampleMetrics>& samples) {
  MetricRow row{{"point_precision", 0}, {"point_recall", 0}, {"point_f1", 0},      {"radius_mae", 0},
                {"branch_precision", 0}, {"branch_recall", 0}, {"branch_f1", 0}, {"betti0_mae", 0},
                {"betti1_mae", 0}};
  if (samples.empty()) return row;
  for (const auto& s : samples) {
    const double v[] = {s.point.precision,  s.point.recall,  s.point.f1,
                        s.point.radius_mae, s.branch.precision, s.branch.recall,
                        s.branch.f1,        double(s.graph.betti0_err), double(s.graph.betti1_err)};
    for (std::size_t k = 0; k < row.size(); ++k) row[k].second += v[k];
  }
  for (auto& [name, v] : row) v /= static_cast<double>(samples.size());
  return row;
}

std::vector<MeanStd> aggregate_runs(const std::vector<MetricRow>& runs) {
  if (runs.empty()) throw std::invalid_argument("aggregate_runs: no runs");
  std::vector<MeanStd> out;
  for (std::size_t k = 0; k < runs[0].size(); ++k) out.push_back({runs[0][k].first, 0.0, 0.0});
  for (std::size_t r = 0; r < runs.size(); ++r) {
    if (runs[r].size() != out.size())
      throw std::invalid_argument("aggregate_runs: run " + std::to_string(r) + " has " +
                                  std::to_string(runs[r].size()) + " metrics, expected " + std::to_string(out.size()));
    for (std::size_t k = 0; k < out.size(); ++k) {
      if (runs[r][k].first != out[k].name)
        throw std::invalid_argument("aggregate_runs: run " + std::to_string(r) + " has metric '" + runs[r][k].first +
                                    "' where '" + out[k].name + "' was expected");
      out[k].mean += runs[r][k].second;
    }
  }
  const double n = static_cast<double>(runs.size());
  for (auto& m : out) m.mean /= n;
  if (runs.size() > 1)
    for (std::size_t k = 0; k < out.size(); ++k) {
      double ss = 0.0;
      for (const auto& run : runs) ss += (run[k].second - out[k].mean) * (run[k].second - out[k].mean);
      out[k].std = std::sqrt(ss / (n - 1.0));
    }
  return out;
}

namespace {

bool is_fraction(const std::string& name) {
  return name.find("precision") != std::string::npos || name.find("recall") != std::string::npos ||
         name.find("f1") != std::string::npos;
}

double display(const std::string& name, double v) {
  return is_fraction(name) ? std::round(v * 100.0 * 100.0) / 100.0 : v;
}

std::string header_of(const std::string& name) {
  static const std::map<std::string, std::string> h{
      {"point_precision", "Precision(%)"}, {"point_recall", "Recall(%)"},     {"point_f1", "F1(%)"},
      {"radius_mae", "Radius(MAE)"},       {"branch_precision", "BrPrec(%)"}, {"branch_recall", "BrRec(%)"},
      {"branch_f1", "Branch F1(%)"},       {"betti0_mae", "Betti-0"},         {"betti1_mae", "Betti-1"}};
  auto it = h.find(name);
  return it == h.end() ? name : it->second;
}

std::string aligned(const std::vector<std::string>& head, const std::vector<std::string>& cells) {
  std::string a, b;
  for (std::size_t k = 0; k < head.size(); ++k) {
    const std::size_t w = std::max(head[k].size(), cells[k].size()) + 2;
    a += head[k] + std::string(w - head[k].size(), ' ');
    b += cells[k] + std::string(w - cells[k].size(), ' ');
  }
  while (!a.empty() && a.back() == ' ') a.pop_back();
  while (!b.empty() && b.back() == ' ') b.pop_back();
  return a + "\n" + b + "\n";
}

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

}  // namespace

std::string format_table(const MetricRow& summary) {
  std::vector<std::string> head, cells;
  for (const auto& [name, v] : summary) {
    head.push_back(header_of(name));
    cells.push_back(is_fraction(name) ? fmt("%.2f", display(name, v)) : fmt("%.3f", v));
  }
  return aligned(head, cells);
}

std::string format_table(const std::vector<MeanStd>& aggregate) {
  std::vector<std::string> head, cells;
  for (const auto& m : aggregate) {
    head.push_back(header_of(m.name));
    cells.push_back(is_fraction(m.name) ? fmt("%.2f ± %.2f", display(m.name, m.mean), display(m.name, m.std))
                                        : fmt("%.3f ± %.3f", m.mean, m.std));
  }
  return aligned(head, cells);
}

nlohmann::ordered_json report_to_json(const Report& r) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json summary, percent;
  for (const auto& [name, v] : r.summary) {
    summary[name] = v;
    percent[name] = display(name, v);
  }
  j["summary"] = summary;
  j["summary_display"] = percent;
  j["samples"] = nlohmann::ordered_json::array();
  for (const auto& s : r.samples) {
    j["samples"].push_back({{"id", s.id},
                            {"missing_prediction", s.missing_prediction},
                            {"point",
                             {{"tp", s.point.tp},
                              {"fp", s.point.fp},
                              {"fn", s.point.fn},
                              {"precision", s.point.precision},
                              {"recall", s.point.recall},
                              {"f1", s.point.f1},
                              {"radius_mae", s.point.radius_mae}}},
                            {"branch",
                             {{"tp", s.branch.tp},
                              {"fp", s.branch.fp},
                              {"fn", s.branch.fn},
                              {"precision", s.branch.precision},
                              {"recall", s.branch.recall},
                              {"f1", s.branch.f1}}},
                            {"graph", {{"betti0_err", s.graph.betti0_err}, {"betti1_err", s.graph.betti1_err}}}});
  }
  j["warnings"] = r.warnings;
  return j;
}

MetricRow metric_row_from_json(const nlohmann::ordered_json& j) {
  const auto& s = j.contains("summary") ? j.at("summary") : j;
  if (!s.is_object()) throw ParseError("report: 'summary' must be an object");
  MetricRow row;
  for (const auto& [name, v] : s.items()) {
    if (!v.is_number()) throw ParseError("report: metric '" + name + "' is not a number");
    row.emplace_back(name, v.get<double>());
  }
  return row;
}

std::string per_sample_csv(const std::vector<SampleMetrics>& samples) {
  std::ostringstream o;
  o << "id,missing_prediction,point_tp,point_fp,point_fn,point_precision,point_recall,point_f1,radius_mae,"
       "branch_tp,branch_fp,branch_fn,branch_precision,branch_recall,branch_f1,betti0_err,betti1_err\n";
  o.precision(10);
  for (const auto& s : samples)
    o << s.id << ',' << (s.missing_prediction ? 1 : 0) << ',' << s.point.tp << ',' << s.point.fp << ',' << s.point.fn
      << ',' << s.point.precision << ',' << s.point.recall << ',' << s.point.f1 << ',' << s.point.radius_mae << ','
      << s.branch.tp << ',' << s.branch.fp << ',' << s.branch.fn << ',' << s.branch.precision << ','
      << s.branch.recall << ',' << s.branch.f1 << ',' << s.graph.betti0_err << ',' << s.graph.betti1_err << '\n';
  return o.str();
}

std::string projection_svg(const tree::CenterlineTree& pred, const tree::CenterlineTree& gt,
                           const std::string& title) {
  constexpr double kPanel = 320.0, kPad = 16.0;
  Vec3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
  for (const auto* t : {&pred, &gt})
    for (const auto& n : t->nodes)
      for (int k = 0; k < 3; ++k) {
        lo[k] = std::min(lo[k], n.position[k] - n.radius);
        hi[k] = std::max(hi[k], n.position[k] + n.radius);
      }
  if (pred.empty() && gt.empty()) lo = hi = {0, 0, 0};
  double extent = 1.0;
  for (int k = 0; k < 3; ++k) extent = std::max(extent, hi[k] - lo[k]);
  const double s = (kPanel - 2 * kPad) / extent;

  std::ostringstream o;
  o.precision(5);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << 3 * kPanel << "\" height=\"" << kPanel + 24
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"8\" y=\"16\">" << title << " (grey: ground truth, red: prediction)</text>\n";
  const int axes[3][2] = {{0, 1}, {0, 2}, {1, 2}};
  const char* names[3] = {"xy", "xz", "yz"};
  for (int p = 0; p < 3; ++p) {
    const double ox = p * kPanel, oy = 24;
    const int a = axes[p][0], b = axes[p][1];
    o << "<g transform=\"translate(" << ox << "," << oy << ")\">\n";
    o << "<rect x=\"1\" y=\"1\" width=\"" << kPanel - 2 << "\" height=\"" << kPanel - 2
      << "\" fill=\"none\" stroke=\"#ccc\"/>\n";
    o << "<text x=\"6\" y=\"14\" fill=\"#666\">" << names[p] << "</text>\n";
    auto X = [&](const Vec3& v) { return kPad + (v[a] - lo[a]) * s; };
    auto Y = [&](const Vec3& v) { return kPanel - kPad - (v[b] - lo[b]) * s; };
    for (const auto& [t, colour, opacity] :
         {std::tuple{&gt, "#888888", 0.5}, std::tuple{&pred, "#d62728", 0.6}}) {
      const auto idx = id_to_index(*t);
      for (const auto& n : t->nodes) {
        if (n.parent_id >= 0 && idx.count(n.parent_id)) {
          const Vec3& q = t->nodes[idx.at(n.parent_id)].position;
          o << "<line x1=\"" << X(n.position) << "\" y1=\"" << Y(n.position) << "\" x2=\"" << X(q) << "\" y2=\""
            << Y(q) << "\" stroke=\"" << colour << "\" stroke-width=\"0.8\"/>\n";
        }
        o << "<circle cx=\"" << X(n.position) << "\" cy=\"" << Y(n.position) << "\" r=\""
          << std::max(0.5, n.radius * s) << "\" fill=\"" << colour << "\" fill-opacity=\"" << opacity << "\"/>\n";
      }
    }
    o << "</g>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace trex::eval
