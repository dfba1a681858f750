// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The midibpe Authors

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "midibpe/error.hpp"
#include "midibpe/grammar.hpp"
#include "midibpe/midi_io.hpp"
#include "midibpe/score.hpp"
#include "midibpe/vocabulary.hpp"

namespace midibpe {

struct TokenSequence {
  Scheme scheme;
  std::vector<TokenId> ids;

  // Token count without BOS/EOS framing.
  std::size_t content_size() const {
    return static_cast<std::size_t>(std::count_if(ids.begin(), ids.end(), [](TokenId id) { return id != kBos && id != kEos; }));
  }
  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

struct DetokenizeReport {
  // Tokens rejected by the grammar and skipped.
  std::size_t skipped_tokens = 0;
  // Notes whose token chain never completed (dangling Pitch, unclosed
  // NoteOn, zero-length MIDILike note, ...).
  std::size_t dropped_notes = 0;

  std::size_t total() const { return skipped_tokens + dropped_notes; }
};

struct DetokenizeResult {
  Score score;
  DetokenizeReport diagnostics;
};

// Converts preprocessed scores to token sequences and back for one scheme.
// Immutable after construction; share freely across threads.
class Tokenizer {
 public:
  Tokenizer(Scheme scheme, PreprocessConfig config)
      : scheme_(scheme),
        config_(std::move(config)),
        vocabulary_(std::make_unique<Vocabulary>(build_vocabulary(scheme_, config_))),
        grammar_(std::make_unique<Grammar>(scheme_, *vocabulary_, config_)) {
    if (scheme_.time_model() == TimeModel::TimeShift &&
        config_.resolution() != config_.duration_grid.front().samples_per_beat) {
      throw PreconditionError("TimeShift schemes need the first duration segment at the grid resolution");
    }
  }

  Tokenizer(const Tokenizer& other) : Tokenizer(other.scheme_, other.config_) {}
  Tokenizer& operator=(const Tokenizer&) = delete;

  const Scheme& scheme() const { return scheme_; }
  const PreprocessConfig& config() const { return config_; }
  const Vocabulary& vocabulary() const { return *vocabulary_; }
  const Grammar& grammar() const { return *grammar_; }
  GrammarState initial_state() const { return GrammarState(*grammar_); }

  // One sequence per track, or a single stream when Program tokens are on.
  // Always returns at least one sequence.
  std::vector<TokenSequence> tokenize(const Score& score) const {
    check_grid(score);
    const Tick unit = score.ticks_per_beat / config_.resolution();
    std::vector<TokenSequence> out;
    if (scheme_.use_programs) {
      std::map<int, std::vector<Note>> by_program;
      for (const Track& t : score.tracks) {
        auto& dst = by_program[t.is_drum ? kDrumProgram : t.program];
        dst.insert(dst.end(), t.notes.begin(), t.notes.end());
      }
      std::vector<StreamNote> stream;
      for (auto& [program, notes] : by_program) {
        normalize_track_notes(notes, score.ticks_per_beat, config_);
        for (const Note& n : notes) stream.push_back(to_stream_note(n, program, unit));
      }
      out.push_back(encode(std::move(stream)));
    } else {
      for (const Track& t : score.tracks) {
        std::vector<StreamNote> stream;
        for (const Note& n : t.notes) stream.push_back(to_stream_note(n, 0, unit));
        out.push_back(encode(std::move(stream)));
      }
      if (out.empty()) out.push_back(encode({}));
    }
    return out;
  }

  // Decodes one base-token sequence with skip-and-continue recovery.
  DetokenizeResult detokenize(const TokenSequence& sequence, int ticks_per_beat = 480) const {
    return detokenize(std::span<const TokenSequence>(&sequence, 1), ticks_per_beat);
  }

  // Decodes several sequences into one score. Without Program tokens each
  // sequence becomes one track; with them, tracks are keyed by program.
  DetokenizeResult detokenize(std::span<const TokenSequence> sequences, int ticks_per_beat = 480) const {
    if (ticks_per_beat <= 0 || ticks_per_beat % config_.resolution() != 0) {
      throw PreconditionError("ticks_per_beat must be a positive multiple of the grid resolution");
    }
    const Tick unit = ticks_per_beat / config_.resolution();
    DetokenizeResult result;
    result.score.ticks_per_beat = ticks_per_beat;
    std::map<int, Track> by_program;

    for (const TokenSequence& seq : sequences) {
      GrammarState state(*grammar_);
      Track single;
      for (TokenId id : seq.ids) {
        if (!vocabulary_->contains(id)) {
          throw PreconditionError("token id " + std::to_string(id) + " is not a base token of " + scheme_.name());
        }
        std::optional<CompletedNote> done;
        if (state.feed(id, &done) != Violation::None) {
          ++result.diagnostics.skipped_tokens;
          continue;
        }
        if (!done) continue;
        if (done->duration_units <= 0) {
          ++result.diagnostics.dropped_notes;
          continue;
        }
        Note n{done->onset_units * unit, done->duration_units * unit, done->pitch, done->velocity};
        if (scheme_.use_programs) {
          Track& t = by_program[done->program];
          t.is_drum = done->program == kDrumProgram;
          t.program = t.is_drum ? 0 : done->program;
          t.notes.push_back(n);
        } else {
          single.notes.push_back(n);
        }
      }
      if (state.note_pending() && !(scheme_.kind == SchemeKind::MIDILike && state.phase() == Phase::AwaitVelocity)) {
        ++result.diagnostics.dropped_notes;
      }
      result.diagnostics.dropped_notes += state.open_note_count();
      if (!scheme_.use_programs) {
        sort_notes(single.notes);
        result.score.tracks.push_back(std::move(single));
      }
    }
    for (auto& [program, track] : by_program) {
      sort_notes(track.notes);
      result.score.tracks.push_back(std::move(track));
    }
    return result;
  }

 private:
  struct StreamNote {
    std::int64_t onset = 0;     // grid units
    std::int64_t duration = 0;  // grid units
    int program = 0;
    int pitch = 0;
    int velocity = 0;
  };

  StreamNote to_stream_note(const Note& n, int program, Tick unit) const {
    return StreamNote{n.onset_tick / unit, n.duration_tick / unit, program, n.pitch, n.velocity};
  }

  void check_grid(const Score& score) const {
    const int res = config_.resolution();
    if (score.ticks_per_beat <= 0 || score.ticks_per_beat % res != 0) {
      throw PreconditionError("score is not preprocessed: ticks_per_beat not a multiple of the grid resolution");
    }
    const Tick unit = score.ticks_per_beat / res;
    const Tick onset_step = unit * config_.position_step();
    const auto durations = config_.duration_units();
    const auto velocities = config_.velocity_centers();
    for (const Track& t : score.tracks) {
      for (const Note& n : t.notes) {
        const bool ok = n.onset_tick >= 0 && n.onset_tick % onset_step == 0 && n.duration_tick % unit == 0 &&
                        std::binary_search(durations.begin(), durations.end(), static_cast<int>(n.duration_tick / unit)) &&
                        std::binary_search(velocities.begin(), velocities.end(), n.velocity) &&
                        n.pitch >= config_.pitch_min && n.pitch <= config_.pitch_max;
        if (!ok) {
          throw PreconditionError("note off-grid (onset " + std::to_string(n.onset_tick) + ", pitch " +
                                  std::to_string(n.pitch) + "); preprocess the score first");
        }
      }
    }
  }

  TokenId id(TokenType type, int value) const {
    auto found = vocabulary_->find(type, value);
    if (!found) throw PreconditionError("no token for " + std::string(to_string(type)) + " " + std::to_string(value));
    return *found;
  }

  TokenId merged_id(const StreamNote& n, bool with_duration) const {
    std::vector<TokenPart> parts{{TokenType::Pitch, n.pitch}, {TokenType::Velocity, n.velocity}};
    if (with_duration) parts.push_back({TokenType::Duration, static_cast<int>(n.duration)});
    auto found = vocabulary_->find_merged(parts);
    if (!found) throw PreconditionError("no merged token for pitch " + std::to_string(n.pitch));
    return *found;
  }

  void emit_time_shift(std::vector<TokenId>& ids, std::int64_t gap) const {
    const auto grid = config_.duration_units();
    while (gap > 0) {
      auto fit = std::upper_bound(grid.begin(), grid.end(), gap);
      const int step = *std::prev(fit);
      ids.push_back(id(TokenType::TimeShift, step));
      gap -= step;
    }
  }

  void emit_note_start(std::vector<TokenId>& ids, const StreamNote& n) const {
    if (scheme_.use_programs) ids.push_back(id(TokenType::Program, n.program));
    switch (scheme_.kind) {
      case SchemeKind::TSD:
      case SchemeKind::REMI:
        ids.push_back(id(TokenType::Pitch, n.pitch));
        ids.push_back(id(TokenType::Velocity, n.velocity));
        ids.push_back(id(TokenType::Duration, static_cast<int>(n.duration)));
        break;
      case SchemeKind::PVm:
        ids.push_back(merged_id(n, false));
        ids.push_back(id(TokenType::Duration, static_cast<int>(n.duration)));
        break;
      case SchemeKind::PVDm:
        ids.push_back(merged_id(n, true));
        break;
      case SchemeKind::MIDILike:
        ids.push_back(id(TokenType::NoteOn, n.pitch));
        ids.push_back(id(TokenType::Velocity, n.velocity));
        break;
    }
  }

  TokenSequence encode(std::vector<StreamNote> notes) const {
    std::stable_sort(notes.begin(), notes.end(), [](const StreamNote& a, const StreamNote& b) {
      return std::tie(a.onset, a.program, a.pitch) < std::tie(b.onset, b.program, b.pitch);
    });
    TokenSequence seq{scheme_, {kBos}};
    auto& ids = seq.ids;

    if (scheme_.kind == SchemeKind::MIDILike) {
      // (time, 0 = off / 1 = on, program, pitch, note index)
      std::vector<std::tuple<std::int64_t, int, int, int, std::size_t>> events;
      for (std::size_t i = 0; i < notes.size(); ++i) {
        events.emplace_back(notes[i].onset, 1, notes[i].program, notes[i].pitch, i);
        events.emplace_back(notes[i].onset + notes[i].duration, 0, notes[i].program, notes[i].pitch, i);
      }
      std::stable_sort(events.begin(), events.end());
      std::int64_t now = 0;
      for (const auto& [time, kind, program, pitch, index] : events) {
        emit_time_shift(ids, time - now);
        now = time;
        if (kind == 1) {
          emit_note_start(ids, notes[index]);
        } else {
          if (scheme_.use_programs) ids.push_back(id(TokenType::Program, program));
          ids.push_back(id(TokenType::NoteOff, pitch));
        }
      }
    } else if (scheme_.has_bar_position()) {
      const int bar_units = config_.bar_units();
      const int step = config_.position_step();
      std::int64_t bar = -1;
      std::int64_t now = -1;
      for (const StreamNote& n : notes) {
        const std::int64_t note_bar = n.onset / bar_units;
        while (bar < note_bar) {
          ids.push_back(id(TokenType::Bar, 0));
          ++bar;
          now = -1;
        }
        if (n.onset != now) {
          ids.push_back(id(TokenType::Position, static_cast<int>((n.onset % bar_units) / step)));
          now = n.onset;
        }
        emit_note_start(ids, n);
      }
    } else {
      std::int64_t now = 0;
      for (const StreamNote& n : notes) {
        emit_time_shift(ids, n.onset - now);
        now = n.onset;
        emit_note_start(ids, n);
      }
    }
    ids.push_back(kEos);
    return seq;
  }

  Scheme scheme_;
  PreprocessConfig config_;
  std::unique_ptr<Vocabulary> vocabulary_;
  std::unique_ptr<Grammar> grammar_;
};

}  // namespace midibpe
