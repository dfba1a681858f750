// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The midibpe Authors

#pragma once

#include <algorithm>
#include <bitset>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "midibpe/vocabulary.hpp"

namespace midibpe {

// Static description of a scheme's token language.
struct Grammar {
  Scheme scheme;
  const Vocabulary* vocabulary = nullptr;
  int resolution = 8;      // grid units per beat
  int position_step = 1;   // grid units per Position increment
  int bar_units = 32;      // grid units per (4/4) bar

  Grammar(Scheme s, const Vocabulary& v, const PreprocessConfig& c)
      : scheme(s), vocabulary(&v), resolution(c.resolution()), position_step(c.position_step()),
        bar_units(c.bar_units()) {}

  bool is_midi_like() const { return scheme.kind == SchemeKind::MIDILike; }
};

enum class Violation { None, Type, Time, DuplicateNote, NoNoteOn };

enum class Phase {
  Start,
  AfterBar,
  AfterPosition,
  AfterTimeShift,
  AfterProgram,
  AwaitVelocity,
  AwaitDuration,
  NoteDone,
};

struct CompletedNote {
  int program = 0;
  std::int64_t onset_units = 0;
  std::int64_t duration_units = 0;
  int pitch = 0;
  int velocity = 0;
};

struct OpenNote {
  std::int64_t onset_units = 0;
  int velocity = -1;
};

using NoteKey = std::pair<int, int>;  // (program, pitch)

// Incremental parser state over base tokens. Special tokens are ignored by
// both check() and accept(). A token is only accepted after check() returned
// Violation::None; rejected tokens leave the state untouched.
class GrammarState {
 public:
  explicit GrammarState(const Grammar& grammar) : g_(&grammar) {}

  const Grammar& grammar() const { return *g_; }
  Phase phase() const { return phase_; }
  int bar() const { return bar_; }
  int position() const { return position_; }
  int pending_program() const { return program_; }
  std::int64_t time_units() const {
    if (g_->scheme.has_bar_position()) {
      return static_cast<std::int64_t>(std::max(bar_, 0)) * g_->bar_units +
             static_cast<std::int64_t>(std::max(position_, 0)) * g_->position_step;
    }
    return time_;
  }
  const std::set<NoteKey>& onsets_now() const { return onsets_now_; }
  const std::map<NoteKey, std::deque<OpenNote>>& sounding() const { return sounding_; }

  // True while a note's token chain has started but not completed.
  bool note_pending() const {
    return phase_ == Phase::AfterProgram || phase_ == Phase::AwaitVelocity || phase_ == Phase::AwaitDuration;
  }

  std::size_t open_note_count() const {
    std::size_t n = 0;
    for (const auto& [key, q] : sounding_) n += q.size();
    return n;
  }

  Violation check(TokenId id) const {
    const TokenDescriptor& tok = g_->vocabulary->at(id);
    if (is_special(id)) return Violation::None;
    if (!follows(last_, tok.type)) return Violation::Type;
    if (tok.type == TokenType::Position && tok.value <= position_) return Violation::Time;
    if (tok.type == TokenType::Pitch || tok.type == TokenType::Merged || tok.type == TokenType::NoteOn) {
      const NoteKey key{note_program(), pitch_of(tok)};
      if (g_->is_midi_like()) {
        auto it = sounding_.find(key);
        if (it != sounding_.end() && !it->second.empty()) return Violation::DuplicateNote;
      } else if (onsets_now_.contains(key)) {
        return Violation::DuplicateNote;
      }
    }
    if (tok.type == TokenType::NoteOff) {
      auto it = sounding_.find(NoteKey{note_program(), tok.value});
      if (it == sounding_.end() || it->second.empty()) return Violation::NoNoteOn;
    }
    return Violation::None;
  }

  std::optional<CompletedNote> accept(TokenId id) {
    if (is_special(id)) return std::nullopt;
    const TokenDescriptor& tok = g_->vocabulary->at(id);
    std::optional<CompletedNote> done;
    switch (tok.type) {
      case TokenType::Bar:
        ++bar_;
        position_ = -1;
        onsets_now_.clear();
        phase_ = Phase::AfterBar;
        break;
      case TokenType::Position:
        position_ = tok.value;
        onsets_now_.clear();
        phase_ = Phase::AfterPosition;
        break;
      case TokenType::TimeShift:
        time_ += tok.value;
        onsets_now_.clear();
        phase_ = Phase::AfterTimeShift;
        break;
      case TokenType::Program:
        program_ = tok.value;
        phase_ = Phase::AfterProgram;
        break;
      case TokenType::Pitch:
        note_ = CompletedNote{note_program(), time_units(), 0, tok.value, 0};
        onsets_now_.insert({note_.program, note_.pitch});
        phase_ = Phase::AwaitVelocity;
        break;
      case TokenType::NoteOn:
        note_ = CompletedNote{note_program(), time_units(), 0, tok.value, 0};
        sounding_[{note_.program, note_.pitch}].push_back(OpenNote{note_.onset_units, -1});
        phase_ = Phase::AwaitVelocity;
        break;
      case TokenType::Velocity:
        if (g_->is_midi_like()) {
          sounding_[{note_.program, note_.pitch}].back().velocity = tok.value;
          phase_ = Phase::NoteDone;
        } else {
          note_.velocity = tok.value;
          phase_ = Phase::AwaitDuration;
        }
        break;
      case TokenType::Duration:
        note_.duration_units = tok.value;
        done = note_;
        phase_ = Phase::NoteDone;
        break;
      case TokenType::Merged:
        note_ = CompletedNote{note_program(), time_units(), 0, tok.parts[0].value, tok.parts[1].value};
        onsets_now_.insert({note_.program, note_.pitch});
        if (tok.parts.size() > 2) {
          note_.duration_units = tok.parts[2].value;
          done = note_;
          phase_ = Phase::NoteDone;
        } else {
          phase_ = Phase::AwaitDuration;
        }
        break;
      case TokenType::NoteOff: {
        const NoteKey key{note_program(), tok.value};
        auto& queue = sounding_[key];
        OpenNote open = queue.front();
        queue.pop_front();
        if (queue.empty()) sounding_.erase(key);
        done = CompletedNote{key.first, open.onset_units, time_units() - open.onset_units, key.second, open.velocity};
        phase_ = Phase::NoteDone;
        break;
      }
      default:
        break;
    }
    last_ = tok.type;
    return done;
  }

  // Feeds a token with skip-on-error recovery; returns the violation seen.
  Violation feed(TokenId id, std::optional<CompletedNote>* completed = nullptr) {
    Violation v = check(id);
    if (v == Violation::None) {
      auto note = accept(id);
      if (completed != nullptr) *completed = note;
    }
    return v;
  }

 private:
  static constexpr TokenType kNone = TokenType::Pad;

  int note_program() const { return g_->scheme.use_programs ? program_ : 0; }

  static int pitch_of(const TokenDescriptor& tok) {
    return tok.type == TokenType::Merged ? tok.parts[0].value : tok.value;
  }

  bool starts_note(TokenType t) const {
    if (g_->scheme.use_programs) return t == TokenType::Program;
    return starts_chain(t);
  }
  bool starts_chain(TokenType t) const {
    switch (g_->scheme.kind) {
      case SchemeKind::TSD:
      case SchemeKind::REMI:
        return t == TokenType::Pitch;
      case SchemeKind::MIDILike:
        return t == TokenType::NoteOn || t == TokenType::NoteOff;
      default:
        return t == TokenType::Merged;
    }
  }
  bool time_token(TokenType t) const {
    return g_->scheme.has_bar_position() ? (t == TokenType::Bar || t == TokenType::Position)
                                         : t == TokenType::TimeShift;
  }
  bool ends_note(TokenType t) const {
    switch (g_->scheme.kind) {
      case SchemeKind::MIDILike:
        return t == TokenType::Velocity || t == TokenType::NoteOff;
      case SchemeKind::PVDm:
        return t == TokenType::Merged;
      default:
        return t == TokenType::Duration;
    }
  }

  // Type-succession relation: may `next` directly follow `prev`?
  bool follows(TokenType prev, TokenType next) const {
    const bool remi = g_->scheme.has_bar_position();
    if (prev == kNone) return remi ? next == TokenType::Bar : (next == TokenType::TimeShift || starts_note(next));
    if (ends_note(prev)) return time_token(next) || starts_note(next);
    switch (prev) {
      case TokenType::Bar:
        return next == TokenType::Bar || next == TokenType::Position;
      case TokenType::Position:
        return starts_note(next);
      case TokenType::TimeShift:
        return next == TokenType::TimeShift || starts_note(next);
      case TokenType::Program:
        return starts_chain(next);
      case TokenType::Pitch:
      case TokenType::NoteOn:
        return next == TokenType::Velocity;
      case TokenType::Velocity:
      case TokenType::Merged:
        return next == TokenType::Duration;
      default:
        return false;
    }
  }

  const Grammar* g_;
  Phase phase_ = Phase::Start;
  TokenType last_ = kNone;
  int bar_ = -1;
  int position_ = -1;
  std::int64_t time_ = 0;
  int program_ = 0;
  CompletedNote note_;
  std::set<NoteKey> onsets_now_;
  std::map<NoteKey, std::deque<OpenNote>> sounding_;
};

// ---------------------------------------------------------------------------
// Next-token constraints (logits masking)

struct NextTokenConstraint {
  std::vector<TokenType> types;
  // Position tokens must have value >= min_position.
  int min_position = 0;
  // Pitches that may not start a note (Pitch, Merged, NoteOn).
  std::bitset<128> blocked_pitches;
  // Pitches a NoteOff may release.
  std::bitset<128> releasable_pitches;

  bool allows_type(TokenType t) const { return std::find(types.begin(), types.end(), t) != types.end(); }

  bool allows(const TokenDescriptor& tok) const {
    if (!allows_type(tok.type)) return false;
    switch (tok.type) {
      case TokenType::Position:
        return tok.value >= min_position;
      case TokenType::Pitch:
      case TokenType::NoteOn:
        return !blocked_pitches.test(static_cast<std::size_t>(tok.value));
      case TokenType::Merged:
        return !blocked_pitches.test(static_cast<std::size_t>(tok.parts[0].value));
      case TokenType::NoteOff:
        return releasable_pitches.test(static_cast<std::size_t>(tok.value));
      default:
        return true;
    }
  }
};

// Token types (and value constraints) that can follow `state` without
// creating a type, time, duplicated-note or missing-NoteOn error.
inline NextTokenConstraint valid_next_types(const GrammarState& state) {
  const Grammar& g = state.grammar();
  const Scheme& s = g.scheme;
  NextTokenConstraint c;

  std::vector<TokenType> chain_start;
  switch (s.kind) {
    case SchemeKind::TSD:
    case SchemeKind::REMI:
      chain_start = {TokenType::Pitch};
      break;
    case SchemeKind::MIDILike:
      chain_start = {TokenType::NoteOn, TokenType::NoteOff};
      break;
    default:
      chain_start = {TokenType::Merged};
      break;
  }
  const std::vector<TokenType> note_start =
      s.use_programs ? std::vector<TokenType>{TokenType::Program} : chain_start;
  auto add = [&](const std::vector<TokenType>& ts) { c.types.insert(c.types.end(), ts.begin(), ts.end()); };

  switch (state.phase()) {
    case Phase::Start:
      if (s.has_bar_position()) {
        c.types = {TokenType::Bar};
      } else {
        c.types = {TokenType::TimeShift};
        add(note_start);
      }
      break;
    case Phase::AfterBar:
      c.types = {TokenType::Bar, TokenType::Position};
      break;
    case Phase::AfterPosition:
      add(note_start);
      break;
    case Phase::AfterTimeShift:
      c.types = {TokenType::TimeShift};
      add(note_start);
      break;
    case Phase::AfterProgram:
      add(chain_start);
      break;
    case Phase::AwaitVelocity:
      c.types = {TokenType::Velocity};
      break;
    case Phase::AwaitDuration:
      c.types = {TokenType::Duration};
      break;
    case Phase::NoteDone:
      if (s.has_bar_position()) {
        c.types = {TokenType::Bar, TokenType::Position};
      } else {
        c.types = {TokenType::TimeShift};
      }
      add(note_start);
      break;
  }

  c.min_position = state.position() + 1;
  const int program = s.use_programs ? state.pending_program() : 0;
  if (s.kind == SchemeKind::MIDILike) {
    for (const auto& [key, queue] : state.sounding()) {
      if (key.first == program && !queue.empty()) {
        c.blocked_pitches.set(static_cast<std::size_t>(key.second));
        c.releasable_pitches.set(static_cast<std::size_t>(key.second));
      }
    }
  } else {
    for (const auto& [prog, pitch] : state.onsets_now()) {
      if (prog == program) c.blocked_pitches.set(static_cast<std::size_t>(pitch));
    }
  }
  return c;
}

// Boolean mask over the vocabulary. Special tokens other than EOS are masked.
inline std::vector<bool> valid_next_mask(const GrammarState& state) {
  const Vocabulary& vocab = *state.grammar().vocabulary;
  const NextTokenConstraint c = valid_next_types(state);
  std::vector<bool> mask(vocab.size(), false);
  mask[kEos] = true;
  for (const auto& tok : vocab.entries()) {
    if (!is_special(tok.id)) mask[static_cast<std::size_t>(tok.id)] = c.allows(tok);
  }
  return mask;
}

}  // namespace midibpe
