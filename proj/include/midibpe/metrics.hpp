// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The midibpe Authors

#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <span>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "midibpe/bpe.hpp"
#include "midibpe/error.hpp"
#include "midibpe/grammar.hpp"
#include "midibpe/tokenizer.hpp"

namespace midibpe {

// ---------------------------------------------------------------------------
// Tokenization syntax errors

enum class TseCategory { Type = 0, Time, DuplicateNote, NoNoteOff, NoNoteOn };

inline constexpr std::array<TseCategory, 5> kTseCategories{TseCategory::Type, TseCategory::Time,
                                                           TseCategory::DuplicateNote, TseCategory::NoNoteOff,
                                                           TseCategory::NoNoteOn};

inline std::string_view to_string(TseCategory c) {
  constexpr std::array<std::string_view, 5> names{"type", "time", "dupn", "nnof", "nnon"};
  return names[static_cast<std::size_t>(c)];
}

struct TseCount {
  bool applicable = true;
  std::size_t count = 0;
};

struct TSEReport {
  std::array<TseCount, 5> categories{};
  // Non-special tokens evaluated (all after the first one and the prompt).
  std::size_t denominator = 0;

  const TseCount& at(TseCategory c) const { return categories[static_cast<std::size_t>(c)]; }
  TseCount& at(TseCategory c) { return categories[static_cast<std::size_t>(c)]; }
  std::size_t count(TseCategory c) const { return at(c).count; }
  bool applicable(TseCategory c) const { return at(c).applicable; }
  double ratio(TseCategory c) const {
    return denominator == 0 ? 0.0 : static_cast<double>(at(c).count) / static_cast<double>(denominator);
  }
  std::size_t total_errors() const {
    std::size_t n = 0;
    for (const auto& c : categories) n += c.count;
    return n;
  }

  // Pools counts and denominators (corpus aggregate).
  TSEReport& operator+=(const TSEReport& other) {
    for (std::size_t i = 0; i < categories.size(); ++i) categories[i].count += other.categories[i].count;
    denominator += other.denominator;
    return *this;
  }
};

struct TseOptions {
  // Tokens before this index belong to a prompt and are not evaluated.
  std::size_t prompt_offset = 0;
  // A NoteOn whose NoteOff arrives later than this is counted as nnof.
  double max_note_beats = 16.0;
};

inline TSEReport make_tse_report(const Scheme& scheme) {
  TSEReport r;
  r.at(TseCategory::Time).applicable = scheme.has_bar_position();
  r.at(TseCategory::NoNoteOff).applicable = scheme.kind == SchemeKind::MIDILike;
  r.at(TseCategory::NoNoteOn).applicable = scheme.kind == SchemeKind::MIDILike;
  return r;
}

// Classifies each evaluated token of a base-token sequence. Erroneous tokens
// count in one category (type > time > dupn, nnon for orphan NoteOffs) and
// are skipped, exactly as detokenize recovers. nnof is settled per NoteOn at
// its NoteOff or at the end of the sequence.
inline TSEReport tse(std::span<const TokenId> ids, const Tokenizer& tokenizer, const TseOptions& options = {}) {
  TSEReport report = make_tse_report(tokenizer.scheme());
  GrammarState state = tokenizer.initial_state();
  const Vocabulary& vocab = tokenizer.vocabulary();
  const auto max_units =
      static_cast<std::int64_t>(std::llround(options.max_note_beats * tokenizer.config().resolution()));
  // Mirrors the state's FIFO of open notes: (onset units, evaluated).
  std::map<NoteKey, std::deque<std::pair<std::int64_t, bool>>> ledger;
  bool seen_first = false;

  for (std::size_t i = 0; i < ids.size(); ++i) {
    const TokenId id = ids[i];
    if (!vocab.contains(id)) throw PreconditionError("token id " + std::to_string(id) + " outside the vocabulary");
    if (is_special(id)) continue;
    const bool evaluated = seen_first && i >= options.prompt_offset;
    seen_first = true;
    if (evaluated) ++report.denominator;

    const Violation v = state.check(id);
    if (v != Violation::None) {
      if (!evaluated) continue;
      switch (v) {
        case Violation::Type: ++report.at(TseCategory::Type).count; break;
        case Violation::Time: ++report.at(TseCategory::Time).count; break;
        case Violation::DuplicateNote: ++report.at(TseCategory::DuplicateNote).count; break;
        case Violation::NoNoteOn: ++report.at(TseCategory::NoNoteOn).count; break;
        case Violation::None: break;
      }
      continue;
    }

    const TokenDescriptor& tok = vocab[id];
    const int program = tokenizer.scheme().use_programs ? state.pending_program() : 0;
    const std::int64_t now = state.time_units();
    state.accept(id);
    if (tok.type == TokenType::NoteOn) {
      ledger[{program, tok.value}].emplace_back(now, evaluated);
    } else if (tok.type == TokenType::NoteOff) {
      auto& queue = ledger[{program, tok.value}];
      auto [onset, on_evaluated] = queue.front();
      queue.pop_front();
      if (on_evaluated && now - onset > max_units) ++report.at(TseCategory::NoNoteOff).count;
    }
  }
  for (const auto& [key, queue] : ledger) {
    for (const auto& [onset, on_evaluated] : queue) {
      if (on_evaluated) ++report.at(TseCategory::NoNoteOff).count;
    }
  }
  return report;
}

inline TSEReport tse(const TokenSequence& seq, const Tokenizer& tokenizer, const TseOptions& options = {}) {
  return tse(std::span<const TokenId>(seq.ids), tokenizer, options);
}

// ---------------------------------------------------------------------------
// Corpus statistics

struct FileTokenCount {
  std::size_t tokens = 0;  // excluding BOS/EOS
  double beats = 1.0;
};

inline double beats_spanned(const Score& score) {
  Tick end = 0;
  for (const auto& t : score.tracks) {
    for (const auto& n : t.notes) end = std::max(end, n.offset_tick());
  }
  return std::max(1.0, static_cast<double>(end) / static_cast<double>(score.ticks_per_beat));
}

inline double tokens_per_beat(std::span<const FileTokenCount> files) {
  if (files.empty()) throw DataError("tokens per beat is undefined for an empty corpus");
  double sum = 0.0;
  for (const auto& f : files) sum += static_cast<double>(f.tokens) / std::max(1.0, f.beats);
  return sum / static_cast<double>(files.size());
}

// Mean over preprocessed scores of (token count without BOS/EOS) / beats,
// after BPE when a merge table is given.
inline double tokens_per_beat(std::span<const Score> corpus, const Tokenizer& tokenizer,
                              const MergeTable* merges = nullptr) {
  std::vector<FileTokenCount> files;
  files.reserve(corpus.size());
  for (const Score& s : corpus) {
    FileTokenCount f{0, beats_spanned(s)};
    for (const auto& seq : tokenizer.tokenize(s)) {
      f.tokens += merges != nullptr ? apply_bpe(seq, *merges).content_size() : seq.content_size();
    }
    files.push_back(f);
  }
  return tokens_per_beat(files);
}

// Fraction of non-special vocabulary ids present at least once.
inline double vocab_coverage(std::span<const TokenSequence> sequences, std::size_t vocab_size) {
  if (vocab_size <= static_cast<std::size_t>(kSpecialCount)) return 0.0;
  std::unordered_set<TokenId> seen;
  for (const auto& s : sequences) {
    for (TokenId id : s.ids) {
      if (!is_special(id) && id >= 0 && static_cast<std::size_t>(id) < vocab_size) seen.insert(id);
    }
  }
  return static_cast<double>(seen.size()) / static_cast<double>(vocab_size - kSpecialCount);
}

struct TimingProfile {
  double tokenize_seconds_per_file = 0.0;
  double detokenize_seconds_per_file = 0.0;
  std::size_t repetitions = 0;
  // Outputs were identical across repetitions.
  bool deterministic = true;
};

// Wall-clock means over `repetitions` passes (after one warm-up pass).
// Tokenization includes BPE encoding and decoding includes BPE expansion
// when a merge table is given.
inline TimingProfile timing_profile(std::span<const Score> corpus, const Tokenizer& tokenizer,
                                    const MergeTable* merges = nullptr, std::size_t repetitions = 3) {
  if (corpus.empty()) throw DataError("timing profile needs at least one file");
  repetitions = std::max<std::size_t>(repetitions, 3);
  using Clock = std::chrono::steady_clock;

  auto encode = [&](const Score& s) {
    auto seqs = tokenizer.tokenize(s);
    if (merges != nullptr) {
      for (auto& q : seqs) q = apply_bpe(q, *merges);
    }
    return seqs;
  };
  auto decode = [&](const std::vector<TokenSequence>& seqs, int tpb) {
    if (merges == nullptr) return tokenizer.detokenize(seqs, tpb).score;
    std::vector<TokenSequence> base;
    for (const auto& q : seqs) base.push_back(undo_bpe(q, *merges));
    return tokenizer.detokenize(base, tpb).score;
  };

  std::vector<std::vector<TokenSequence>> reference;
  for (const Score& s : corpus) reference.push_back(encode(s));

  TimingProfile profile;
  profile.repetitions = repetitions;
  double tok_total = 0.0;
  double detok_total = 0.0;
  for (std::size_t rep = 0; rep < repetitions; ++rep) {
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      auto t0 = Clock::now();
      auto seqs = encode(corpus[i]);
      auto t1 = Clock::now();
      Score back = decode(seqs, corpus[i].ticks_per_beat);
      auto t2 = Clock::now();
      tok_total += std::chrono::duration<double>(t1 - t0).count();
      detok_total += std::chrono::duration<double>(t2 - t1).count();
      if (seqs != reference[i]) profile.deterministic = false;
      (void)back;
    }
  }
  const double n = static_cast<double>(repetitions * corpus.size());
  // steady_clock can report 0 for sub-tick work; keep the mean positive.
  profile.tokenize_seconds_per_file = std::max(tok_total / n, 1e-9);
  profile.detokenize_seconds_per_file = std::max(detok_total / n, 1e-9);
  return profile;
}

}  // namespace midibpe
