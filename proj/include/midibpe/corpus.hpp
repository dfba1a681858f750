// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The midibpe Authors

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "midibpe/error.hpp"
#include "midibpe/midi_io.hpp"

namespace midibpe {

// ---------------------------------------------------------------------------
// Validity filtering

enum class RejectReason { Corrupt, TimeSignature, TrackCount };

inline std::string_view to_string(RejectReason r) {
  switch (r) {
    case RejectReason::Corrupt: return "corrupt";
    case RejectReason::TimeSignature: return "time_signature";
    case RejectReason::TrackCount: return "track_count";
  }
  return "unknown";
}

struct FilterConfig {
  // Every time signature must have this numerator ("4/*"); 0 accepts any.
  int time_signature_numerator = 4;
  // Minimum number of tracks holding at least one note.
  std::size_t min_tracks = 3;
};

struct CorpusFile {
  std::string name;
  std::vector<std::uint8_t> bytes;
};

struct Rejection {
  std::string name;
  RejectReason reason;
  std::string detail;
};

struct FilterOutcome {
  std::vector<std::string> accepted;
  std::vector<Rejection> rejected;
};

inline std::optional<Rejection> check_file(const CorpusFile& file, const FilterConfig& config) {
  Score score;
  try {
    score = parse_smf(file.bytes);
  } catch (const Error& e) {
    return Rejection{file.name, RejectReason::Corrupt, e.what()};
  }
  if (config.time_signature_numerator != 0) {
    for (const auto& ts : score.time_signatures) {
      if (ts.numerator != config.time_signature_numerator) {
        return Rejection{file.name, RejectReason::TimeSignature,
                         std::to_string(ts.numerator) + "/" + std::to_string(ts.denominator) + " at tick " +
                             std::to_string(ts.tick)};
      }
    }
  }
  const auto non_empty = static_cast<std::size_t>(
      std::count_if(score.tracks.begin(), score.tracks.end(), [](const Track& t) { return !t.notes.empty(); }));
  if (non_empty < config.min_tracks) {
    return Rejection{file.name, RejectReason::TrackCount, std::to_string(non_empty) + " non-empty tracks"};
  }
  return std::nullopt;
}

inline FilterOutcome filter_valid(std::span<const CorpusFile> files, const FilterConfig& config = {}) {
  FilterOutcome out;
  for (const auto& f : files) {
    if (auto r = check_file(f, config)) {
      out.rejected.push_back(std::move(*r));
    } else {
      out.accepted.push_back(f.name);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Maximum-weight bipartite matching

struct WeightedEdge {
  std::size_t left = 0;
  std::size_t right = 0;
  double weight = 0.0;
};

// Bipartite graph between file ids (left) and external ids (right). Node
// indices follow order of first appearance.
class MatchGraph {
 public:
  MatchGraph() = default;
  MatchGraph(std::size_t left_count, std::size_t right_count) {
    for (std::size_t i = 0; i < left_count; ++i) left_ids_.push_back(std::to_string(i));
    for (std::size_t i = 0; i < right_count; ++i) right_ids_.push_back(std::to_string(i));
  }

  void add_edge(std::size_t left, std::size_t right, double weight) {
    if (left >= left_ids_.size() || right >= right_ids_.size()) throw PreconditionError("edge endpoint out of range");
    if (!(weight > 0.0) || !std::isfinite(weight)) throw PreconditionError("edge weights must be positive and finite");
    if (!seen_.insert({left, right}).second) {
      throw PreconditionError("duplicate edge (" + left_ids_[left] + ", " + right_ids_[right] + ")");
    }
    edges_.push_back({left, right, weight});
  }

  void add_edge(const std::string& left, const std::string& right, double weight) {
    add_edge(intern(left, left_ids_, left_index_), intern(right, right_ids_, right_index_), weight);
  }

  std::size_t left_count() const { return left_ids_.size(); }
  std::size_t right_count() const { return right_ids_.size(); }
  const std::vector<WeightedEdge>& edges() const { return edges_; }
  const std::string& left_id(std::size_t i) const { return left_ids_[i]; }
  const std::string& right_id(std::size_t i) const { return right_ids_[i]; }

 private:
  static std::size_t intern(const std::string& id, std::vector<std::string>& ids,
                            std::unordered_map<std::string, std::size_t>& index) {
    auto [it, inserted] = index.emplace(id, ids.size());
    if (inserted) ids.push_back(id);
    return it->second;
  }

  std::vector<std::string> left_ids_;
  std::vector<std::string> right_ids_;
  std::unordered_map<std::string, std::size_t> left_index_;
  std::unordered_map<std::string, std::size_t> right_index_;
  std::vector<WeightedEdge> edges_;
  std::set<std::pair<std::size_t, std::size_t>> seen_;
};

// Parses "left<TAB>right<TAB>weight" lines. Blank lines and lines starting
// with '#' are ignored.
inline MatchGraph parse_edge_list(std::string_view text) {
  MatchGraph g;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string_view> fields;
    for (std::size_t start = 0;;) {
      const auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 3) throw DataError("edge list line " + std::to_string(line_no) + ": expected 3 tab-separated fields");
    double w = 0.0;
    try {
      std::size_t used = 0;
      w = std::stod(std::string(fields[2]), &used);
      if (used != fields[2].size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw DataError("edge list line " + std::to_string(line_no) + ": bad weight '" + std::string(fields[2]) + "'");
    }
    try {
      g.add_edge(std::string(fields[0]), std::string(fields[1]), w);
    } catch (const PreconditionError& e) {
      throw DataError("edge list line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return g;
}

namespace detail {

// Minimum-cost perfect assignment on a square cost matrix (Kuhn-Munkres with
// potentials, O(n^3)). Returns column assigned to each row.
inline std::vector<std::size_t> solve_assignment(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<bool> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n);
  for (std::size_t j = 1; j <= n; ++j) {
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

// One connected component, with local weight lookup.
struct MatchComponent {
  std::vector<std::size_t> lefts;   // global ids, ascending
  std::vector<std::size_t> rights;  // global ids, ascending
  std::map<std::pair<std::size_t, std::size_t>, double> weight;  // global (l, r)
  std::map<std::size_t, std::vector<std::size_t>> adjacency;     // l -> rights ascending
};

// Best matching of `comp` with `fixed` pairs forced and `excluded` lefts
// left unmatched. Returns (total weight, left -> right).
inline std::pair<double, std::map<std::size_t, std::size_t>> best_constrained(
    const MatchComponent& comp, const std::map<std::size_t, std::size_t>& fixed, const std::set<std::size_t>& excluded) {
  double total = 0.0;
  std::map<std::size_t, std::size_t> match = fixed;
  std::set<std::size_t> used_rights;
  for (const auto& [l, r] : fixed) {
    total += comp.weight.at({l, r});
    used_rights.insert(r);
  }
  std::vector<std::size_t> rows, cols;
  for (std::size_t l : comp.lefts) {
    if (!fixed.contains(l) && !excluded.contains(l)) rows.push_back(l);
  }
  for (std::size_t r : comp.rights) {
    if (!used_rights.contains(r)) cols.push_back(r);
  }
  const std::size_t n = std::max(rows.size(), cols.size());
  if (n == 0 || rows.empty() || cols.empty()) return {total, match};
  std::vector<std::vector<double>> cost(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      auto it = comp.weight.find({rows[i], cols[j]});
      if (it != comp.weight.end()) cost[i][j] = -it->second;
    }
  }
  const auto assign = solve_assignment(cost);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t j = assign[i];
    if (j >= cols.size()) continue;
    auto it = comp.weight.find({rows[i], cols[j]});
    if (it == comp.weight.end()) continue;
    total += it->second;
    match[rows[i]] = cols[j];
  }
  return {total, match};
}

inline bool close_enough(double a, double best) { return a >= best - 1e-9 * std::max(1.0, std::abs(best)); }

}  // namespace detail

// Exact maximum-weight matching. Among optimal matchings the one whose
// sorted (left, right) index list is lexicographically smallest is returned.
inline std::vector<std::pair<std::size_t, std::size_t>> max_weight_matching(const MatchGraph& graph) {
  // Union-find over left nodes [0, L) and right nodes [L, L + R).
  const std::size_t L = graph.left_count();
  std::vector<std::size_t> parent(L + graph.right_count());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& e : graph.edges()) parent[find(e.left)] = find(L + e.right);

  std::map<std::size_t, detail::MatchComponent> comps;
  for (const auto& e : graph.edges()) {
    auto& c = comps[find(e.left)];
    c.weight[{e.left, e.right}] = e.weight;
    c.adjacency[e.left].push_back(e.right);
  }
  for (auto& [root, c] : comps) {
    std::set<std::size_t> rights;
    for (auto& [l, rs] : c.adjacency) {
      c.lefts.push_back(l);
      std::sort(rs.begin(), rs.end());
      rights.insert(rs.begin(), rs.end());
    }
    c.rights.assign(rights.begin(), rights.end());
  }

  std::vector<std::pair<std::size_t, std::size_t>> result;
  for (const auto& [root, comp] : comps) {
    std::map<std::size_t, std::size_t> fixed;
    std::set<std::size_t> excluded;
    auto [best, current] = detail::best_constrained(comp, fixed, excluded);
    for (std::size_t l : comp.lefts) {
      std::optional<std::size_t> chosen;
      for (std::size_t r : comp.adjacency.at(l)) {
        if (std::any_of(fixed.begin(), fixed.end(), [&](const auto& f) { return f.second == r; })) continue;
        auto cur = current.find(l);
        if (cur != current.end() && cur->second == r) {
          chosen = r;
          break;
        }
        auto trial_fixed = fixed;
        trial_fixed[l] = r;
        auto [value, match] = detail::best_constrained(comp, trial_fixed, excluded);
        if (detail::close_enough(value, best)) {
          chosen = r;
          current = std::move(match);
          break;
        }
      }
      if (chosen) {
        fixed[l] = *chosen;
      } else {
        excluded.insert(l);
      }
    }
    for (const auto& [l, r] : fixed) result.emplace_back(l, r);
  }
  std::sort(result.begin(), result.end());
  return result;
}

inline double matching_weight(const MatchGraph& graph, std::span<const std::pair<std::size_t, std::size_t>> pairs) {
  std::map<std::pair<std::size_t, std::size_t>, double> w;
  for (const auto& e : graph.edges()) w[{e.left, e.right}] = e.weight;
  double total = 0.0;
  for (const auto& p : pairs) total += w.at(p);
  return total;
}

// ---------------------------------------------------------------------------
// Train / valid / test split

struct SplitSpec {
  double valid_fraction = 0.10;
  double test_fraction = 0.15;
  std::uint64_t seed = 0;
};

struct CorpusSplit {
  std::vector<std::string> train;
  std::vector<std::string> valid;
  std::vector<std::string> test;
};

// Deterministic shuffle under the seed; subset sizes are the rounded
// fractions; each subset keeps the input order.
inline CorpusSplit split_corpus(std::span<const std::string> ids, const SplitSpec& spec) {
  const auto in_range = [](double f) { return f >= 0.0 && f < 1.0; };
  if (!in_range(spec.valid_fraction) || !in_range(spec.test_fraction) ||
      spec.valid_fraction + spec.test_fraction >= 1.0) {
    throw PreconditionError("split fractions must lie in [0, 1) and sum below 1");
  }
  const std::size_t n = ids.size();
  if (spec.valid_fraction > 0.0 && spec.test_fraction > 0.0 && n < 3) {
    throw DataError("need at least 3 files to split into three non-empty subsets");
  }
  const auto n_valid = static_cast<std::size_t>(std::llround(static_cast<double>(n) * spec.valid_fraction));
  const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * spec.test_fraction));
  if (n_valid + n_test > n) throw DataError("split fractions leave no training files");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(spec.seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  auto take = [&](std::size_t from, std::size_t count) {
    std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(from),
                                 order.begin() + static_cast<std::ptrdiff_t>(from + count));
    std::sort(idx.begin(), idx.end());
    std::vector<std::string> out;
    for (std::size_t i : idx) out.push_back(ids[i]);
    return out;
  };
  CorpusSplit split;
  split.valid = take(0, n_valid);
  split.test = take(n_valid, n_test);
  split.train = take(n_valid + n_test, n - n_valid - n_test);
  return split;
}

}  // namespace midibpe
