// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The midibpe Authors

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "midibpe/error.hpp"
#include "midibpe/tokenizer.hpp"
#include "midibpe/vocabulary.hpp"

namespace midibpe {

using TokenPair = std::pair<TokenId, TokenId>;

// Ordered merge rules. Rule k turns the pair merges()[k] into the new id
// base_size() + k.
class MergeTable {
 public:
  MergeTable() = default;

  MergeTable(TokenId base_size, std::vector<TokenPair> merges) : base_size_(base_size), merges_(std::move(merges)) {
    if (base_size_ < kSpecialCount) throw PreconditionError("base vocabulary must include the special tokens");
    expansions_.reserve(merges_.size());
    for (std::size_t k = 0; k < merges_.size(); ++k) {
      const auto [left, right] = merges_[k];
      const TokenId limit = base_size_ + static_cast<TokenId>(k);
      for (TokenId side : {left, right}) {
        if (side < 0 || side >= limit) {
          throw PreconditionError("merge " + std::to_string(k) + " references id " + std::to_string(side) +
                                  " that is not yet defined");
        }
        if (is_special(side)) throw PreconditionError("merge " + std::to_string(k) + " references a special token");
      }
      if (!rank_.emplace(pack(left, right), k).second) {
        throw PreconditionError("duplicate merge rule at rank " + std::to_string(k));
      }
      std::vector<TokenId> exp;
      append_expansion(exp, left);
      append_expansion(exp, right);
      expansions_.push_back(std::move(exp));
    }
  }

  TokenId base_size() const { return base_size_; }
  // Vocabulary size including learned tokens.
  std::size_t vocab_size() const { return static_cast<std::size_t>(base_size_) + merges_.size(); }
  const std::vector<TokenPair>& merges() const { return merges_; }
  bool empty() const { return merges_.empty(); }

  std::optional<std::size_t> rank_of(TokenId left, TokenId right) const {
    auto it = rank_.find(pack(left, right));
    if (it == rank_.end()) return std::nullopt;
    return it->second;
  }

  bool is_learned(TokenId id) const { return id >= base_size_ && static_cast<std::size_t>(id) < vocab_size(); }

  // Base ids a learned token stands for.
  const std::vector<TokenId>& expansion(TokenId id) const {
    if (!is_learned(id)) throw PreconditionError("token id " + std::to_string(id) + " is not a learned token");
    return expansions_[static_cast<std::size_t>(id - base_size_)];
  }

  // The table restricted to its first n merges.
  MergeTable prefix(std::size_t n) const {
    n = std::min(n, merges_.size());
    return MergeTable(base_size_, std::vector<TokenPair>(merges_.begin(), merges_.begin() + static_cast<std::ptrdiff_t>(n)));
  }

  friend bool operator==(const MergeTable& a, const MergeTable& b) {
    return a.base_size_ == b.base_size_ && a.merges_ == b.merges_;
  }

 private:
  static std::uint64_t pack(TokenId l, TokenId r) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(l)) << 32) | static_cast<std::uint32_t>(r);
  }
  void append_expansion(std::vector<TokenId>& out, TokenId id) const {
    if (id < base_size_) {
      out.push_back(id);
    } else {
      const auto& e = expansions_[static_cast<std::size_t>(id - base_size_)];
      out.insert(out.end(), e.begin(), e.end());
    }
  }

  TokenId base_size_ = kSpecialCount;
  std::vector<TokenPair> merges_;
  std::vector<std::vector<TokenId>> expansions_;
  std::unordered_map<std::uint64_t, std::size_t> rank_;
};

// ---------------------------------------------------------------------------
// Learning

namespace detail {

// Pair-occurrence index over the whole corpus, kept up to date while merges
// are substituted. Positions are global indices into the concatenated
// corpus; sequence boundaries are never linked.
class BpeLearner {
 public:
  BpeLearner(std::span<const std::vector<TokenId>> corpus, TokenId base_size) {
    for (const auto& seq : corpus) {
      const auto start = static_cast<std::int64_t>(val_.size());
      for (std::size_t i = 0; i < seq.size(); ++i) {
        if (seq[i] < 0 || seq[i] >= base_size) {
          throw PreconditionError("corpus id " + std::to_string(seq[i]) + " outside the base vocabulary");
        }
        val_.push_back(seq[i]);
        prev_.push_back(i == 0 ? -1 : start + static_cast<std::int64_t>(i) - 1);
        next_.push_back(i + 1 == seq.size() ? -1 : start + static_cast<std::int64_t>(i) + 1);
        alive_.push_back(true);
      }
    }
    for (std::int64_t p = 0; p < static_cast<std::int64_t>(val_.size()); ++p) {
      if (next_[static_cast<std::size_t>(p)] >= 0) add(p);
    }
    refresh();
  }

  // Best pair and its count, if any.
  std::optional<std::pair<TokenPair, std::int64_t>> best() const {
    if (queue_.empty()) return std::nullopt;
    const auto& [neg_count, first, key] = *queue_.begin();
    return std::make_pair(unpack(key), -neg_count);
  }

  void merge(TokenPair pair, TokenId new_id) {
    const std::uint64_t key = pack(pair.first, pair.second);
    auto it = occurrences_.find(key);
    if (it == occurrences_.end()) return;
    const std::vector<std::int64_t> positions(it->second.begin(), it->second.end());
    for (std::int64_t p : positions) {
      auto up = static_cast<std::size_t>(p);
      if (!alive_[up] || val_[up] != pair.first) continue;
      const std::int64_t q = next_[up];
      if (q < 0 || val_[static_cast<std::size_t>(q)] != pair.second) continue;
      const std::int64_t l = prev_[up];
      const std::int64_t r = next_[static_cast<std::size_t>(q)];
      if (l >= 0) remove(l);
      remove(p);
      if (r >= 0) remove(q);
      val_[up] = new_id;
      alive_[static_cast<std::size_t>(q)] = false;
      next_[up] = r;
      if (r >= 0) prev_[static_cast<std::size_t>(r)] = p;
      if (l >= 0) add(l);
      if (r >= 0) add(p);
    }
    refresh();
  }

  std::vector<std::vector<TokenId>> sequences() const {
    std::vector<std::vector<TokenId>> out;
    for (std::size_t p = 0; p < val_.size(); ++p) {
      if (!alive_[p] || prev_[p] >= 0) continue;
      std::vector<TokenId> seq;
      for (std::int64_t q = static_cast<std::int64_t>(p); q >= 0; q = next_[static_cast<std::size_t>(q)]) {
        seq.push_back(val_[static_cast<std::size_t>(q)]);
      }
      out.push_back(std::move(seq));
    }
    return out;
  }

 private:
  static std::uint64_t pack(TokenId l, TokenId r) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(l)) << 32) | static_cast<std::uint32_t>(r);
  }
  static TokenPair unpack(std::uint64_t k) {
    return {static_cast<TokenId>(k >> 32), static_cast<TokenId>(k & 0xFFFFFFFFu)};
  }

  // Occurrence of the pair starting at position p (p must have a successor).
  std::optional<std::uint64_t> key_at(std::int64_t p) const {
    const auto up = static_cast<std::size_t>(p);
    const TokenId l = val_[up];
    const TokenId r = val_[static_cast<std::size_t>(next_[up])];
    if (is_special(l) || is_special(r)) return std::nullopt;
    return pack(l, r);
  }
  void add(std::int64_t p) {
    if (auto k = key_at(p)) {
      occurrences_[*k].insert(p);
      dirty_.insert(*k);
    }
  }
  void remove(std::int64_t p) {
    if (auto k = key_at(p)) {
      occurrences_[*k].erase(p);
      dirty_.insert(*k);
    }
  }

  // Non-overlapping count: every occurrence for distinct tokens, floor(len/2)
  // per run for a repeated token.
  std::int64_t count_of(std::uint64_t key, const std::set<std::int64_t>& occ) const {
    const auto [l, r] = unpack(key);
    if (l != r) return static_cast<std::int64_t>(occ.size());
    std::int64_t total = 0;
    std::int64_t run = 0;
    std::int64_t expected = -2;
    for (std::int64_t p : occ) {
      if (p == expected) {
        ++run;
      } else {
        total += (run + 1) / 2;
        run = 1;
      }
      expected = next_[static_cast<std::size_t>(p)];
    }
    total += (run + 1) / 2;
    return total;
  }

  void refresh() {
    for (std::uint64_t key : dirty_) {
      auto old = ranked_.find(key);
      if (old != ranked_.end()) {
        queue_.erase({-old->second.first, old->second.second, key});
        ranked_.erase(old);
      }
      auto it = occurrences_.find(key);
      if (it == occurrences_.end()) continue;
      if (it->second.empty()) {
        occurrences_.erase(it);
        continue;
      }
      const std::int64_t count = count_of(key, it->second);
      const std::int64_t first = *it->second.begin();
      ranked_[key] = {count, first};
      queue_.insert({-count, first, key});
    }
    dirty_.clear();
  }

  std::vector<TokenId> val_;
  std::vector<std::int64_t> prev_;
  std::vector<std::int64_t> next_;
  std::vector<bool> alive_;
  std::unordered_map<std::uint64_t, std::set<std::int64_t>> occurrences_;
  std::unordered_map<std::uint64_t, std::pair<std::int64_t, std::int64_t>> ranked_;
  std::set<std::tuple<std::int64_t, std::int64_t, std::uint64_t>> queue_;
  std::unordered_set<std::uint64_t> dirty_;
};

}  // namespace detail

struct LearnResult {
  MergeTable table;
  // Corpus after substituting every learned merge.
  std::vector<std::vector<TokenId>> encoded;
};

// Greedy BPE learning. Each step merges the most frequent adjacent pair
// (pairs touching special tokens excluded, ties broken by earliest first
// occurrence in corpus order). Stops when the vocabulary reaches
// target_size or no pair occurs at least twice.
inline LearnResult learn_bpe_with_corpus(std::span<const std::vector<TokenId>> corpus, TokenId base_size,
                                         std::size_t target_size) {
  if (corpus.empty()) throw DataError("cannot learn BPE on an empty corpus");
  if (target_size < static_cast<std::size_t>(base_size)) {
    throw PreconditionError("target vocabulary size " + std::to_string(target_size) + " is below the base size " +
                            std::to_string(base_size));
  }
  detail::BpeLearner learner(corpus, base_size);
  std::vector<TokenPair> merges;
  while (static_cast<std::size_t>(base_size) + merges.size() < target_size) {
    auto best = learner.best();
    if (!best || best->second < 2) break;
    const TokenId new_id = base_size + static_cast<TokenId>(merges.size());
    learner.merge(best->first, new_id);
    merges.push_back(best->first);
  }
  return LearnResult{MergeTable(base_size, std::move(merges)), learner.sequences()};
}

inline MergeTable learn_bpe(std::span<const std::vector<TokenId>> corpus, TokenId base_size, std::size_t target_size) {
  return learn_bpe_with_corpus(corpus, base_size, target_size).table;
}

inline MergeTable learn_bpe(std::span<const TokenSequence> corpus, TokenId base_size, std::size_t target_size) {
  std::vector<std::vector<TokenId>> ids;
  ids.reserve(corpus.size());
  for (const auto& s : corpus) ids.push_back(s.ids);
  return learn_bpe(std::span<const std::vector<TokenId>>(ids), base_size, target_size);
}

// ---------------------------------------------------------------------------
// Encoding / decoding

// Repeatedly substitutes the lowest-rank merge whose pair occurs, all
// occurrences left to right, until no merge applies.
inline std::vector<TokenId> apply_bpe(std::span<const TokenId> sequence, const MergeTable& table) {
  std::vector<TokenId> cur(sequence.begin(), sequence.end());
  for (TokenId id : cur) {
    if (id < 0 || id >= table.base_size()) {
      throw PreconditionError("token id " + std::to_string(id) + " outside the base vocabulary");
    }
  }
  if (table.empty()) return cur;
  std::vector<TokenId> next;
  while (cur.size() >= 2) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i + 1 < cur.size(); ++i) {
      auto r = table.rank_of(cur[i], cur[i + 1]);
      if (r && (!best || *r < *best)) best = r;
    }
    if (!best) break;
    const auto [left, right] = table.merges()[*best];
    const TokenId merged = table.base_size() + static_cast<TokenId>(*best);
    next.clear();
    for (std::size_t i = 0; i < cur.size();) {
      if (i + 1 < cur.size() && cur[i] == left && cur[i + 1] == right) {
        next.push_back(merged);
        i += 2;
      } else {
        next.push_back(cur[i]);
        ++i;
      }
    }
    cur.swap(next);
  }
  return cur;
}

inline std::vector<TokenId> undo_bpe(std::span<const TokenId> sequence, const MergeTable& table) {
  std::vector<TokenId> out;
  out.reserve(sequence.size());
  for (TokenId id : sequence) {
    if (id >= 0 && id < table.base_size()) {
      out.push_back(id);
    } else if (table.is_learned(id)) {
      const auto& e = table.expansion(id);
      out.insert(out.end(), e.begin(), e.end());
    } else {
      throw PreconditionError("unknown token id " + std::to_string(id));
    }
  }
  return out;
}

inline TokenSequence apply_bpe(const TokenSequence& seq, const MergeTable& table) {
  return TokenSequence{seq.scheme, apply_bpe(std::span<const TokenId>(seq.ids), table)};
}

inline TokenSequence undo_bpe(const TokenSequence& seq, const MergeTable& table) {
  return TokenSequence{seq.scheme, undo_bpe(std::span<const TokenId>(seq.ids), table)};
}

// Vocabulary extended with one BPE descriptor per learned token.
inline Vocabulary extend_vocabulary(const Vocabulary& base, const MergeTable& table) {
  if (base.size() != static_cast<std::size_t>(table.base_size())) {
    throw PreconditionError("merge table was learned over a different base vocabulary");
  }
  Vocabulary out = base;
  for (std::size_t k = 0; k < table.merges().size(); ++k) {
    const TokenId id = table.base_size() + static_cast<TokenId>(k);
    out.add(TokenType::BPE, 0, "BPE_" + std::to_string(id), {}, table.expansion(id));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Statistics

struct LearnedTokenStats {
  TokenId id = 0;
  std::size_t length = 0;              // base tokens combined
  std::vector<TokenType> composition;  // base token types, in order
  std::string composition_key;         // e.g. "Pitch-Velocity-Duration"
};

struct BpeStats {
  std::vector<LearnedTokenStats> tokens;
  double average_length = 0.0;
  std::size_t max_length = 0;
  // Normalized distribution of composition keys.
  std::map<std::string, double> composition_histogram;
};

// Per-token expansion lengths and type compositions. Without a base
// vocabulary, compositions are reported with "?" for every type.
inline BpeStats merge_stats(const MergeTable& table, const Vocabulary* base = nullptr) {
  BpeStats stats;
  if (table.empty()) return stats;
  std::size_t total = 0;
  for (std::size_t k = 0; k < table.merges().size(); ++k) {
    const TokenId id = table.base_size() + static_cast<TokenId>(k);
    LearnedTokenStats t;
    t.id = id;
    const auto& exp = table.expansion(id);
    t.length = exp.size();
    for (TokenId b : exp) {
      if (!t.composition_key.empty()) t.composition_key += '-';
      if (base != nullptr && base->contains(b)) {
        TokenType type = (*base)[b].type;
        t.composition.push_back(type);
        t.composition_key += to_string(type);
      } else {
        t.composition_key += '?';
      }
    }
    total += t.length;
    stats.max_length = std::max(stats.max_length, t.length);
    stats.composition_histogram[t.composition_key] += 1.0;
    stats.tokens.push_back(std::move(t));
  }
  const double n = static_cast<double>(stats.tokens.size());
  stats.average_length = static_cast<double>(total) / n;
  for (auto& [key, value] : stats.composition_histogram) value /= n;
  return stats;
}

struct MergeCurvePoint {
  std::size_t vocab_size = 0;
  double average_length = 0.0;
  std::size_t max_length = 0;
};

// Average and maximum combination length of the learned tokens for growing
// vocabulary sizes (every `step` merges, plus the full table).
inline std::vector<MergeCurvePoint> merge_length_curve(const MergeTable& table, std::size_t step) {
  std::vector<MergeCurvePoint> curve;
  if (table.empty() || step == 0) return curve;
  std::size_t total = 0;
  std::size_t max_len = 0;
  for (std::size_t k = 0; k < table.merges().size(); ++k) {
    const auto len = table.expansion(table.base_size() + static_cast<TokenId>(k)).size();
    total += len;
    max_len = std::max(max_len, len);
    if ((k + 1) % step == 0 || k + 1 == table.merges().size()) {
      curve.push_back({static_cast<std::size_t>(table.base_size()) + k + 1,
                       static_cast<double>(total) / static_cast<double>(k + 1), max_len});
    }
  }
  return curve;
}

}  // namespace midibpe
