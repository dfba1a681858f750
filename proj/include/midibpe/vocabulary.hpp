// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The midibpe Authors

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "midibpe/error.hpp"
#include "midibpe/score.hpp"

namespace midibpe {

using TokenId = std::int32_t;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kMask = 3;
inline constexpr TokenId kSep = 4;
inline constexpr TokenId kSpecialCount = 5;

inline constexpr bool is_special(TokenId id) { return id >= 0 && id < kSpecialCount; }

// Program value used by drum tracks in Program tokens.
inline constexpr int kDrumProgram = -1;

enum class TokenType : std::uint8_t {
  Pad, Bos, Eos, Mask, Sep,
  Bar, Position, Pitch, Velocity, Duration, TimeShift, NoteOn, NoteOff, Program,
  Merged, BPE,
};

inline constexpr std::array<std::string_view, 16> kTokenTypeNames{
    "Pad",      "Bos",       "Eos",    "Mask",    "Sep",     "Bar",    "Position", "Pitch",
    "Velocity", "Duration", "TimeShift", "NoteOn", "NoteOff", "Program", "Merged", "BPE"};

inline std::string_view to_string(TokenType t) { return kTokenTypeNames[static_cast<std::size_t>(t)]; }

inline std::optional<TokenType> token_type_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kTokenTypeNames.size(); ++i) {
    if (kTokenTypeNames[i] == s) return static_cast<TokenType>(i);
  }
  return std::nullopt;
}

struct TokenPart {
  TokenType type;
  int value;
  friend bool operator==(const TokenPart&, const TokenPart&) = default;
};

struct TokenDescriptor {
  TokenId id = 0;
  std::string text;
  TokenType type = TokenType::Pad;
  // Type-specific payload: pitch, velocity, position index, program, or a
  // duration/time shift in grid units. Unused for specials, Bar and Merged.
  int value = 0;
  // Constituents of a Merged token, in token order.
  std::vector<TokenPart> parts;
  // Base-token expansion of a BPE token.
  std::vector<TokenId> expansion;

  friend bool operator==(const TokenDescriptor&, const TokenDescriptor&) = default;
};

// Bidirectional text <-> id map. Ids are dense from 0; the five special
// tokens always occupy ids 0..4.
class Vocabulary {
 public:
  Vocabulary() {
    add(TokenType::Pad, 0, "PAD");
    add(TokenType::Bos, 0, "BOS");
    add(TokenType::Eos, 0, "EOS");
    add(TokenType::Mask, 0, "MASK");
    add(TokenType::Sep, 0, "SEP");
  }

  TokenId add(TokenType type, int value, std::string text, std::vector<TokenPart> parts = {},
              std::vector<TokenId> expansion = {}) {
    if (by_text_.contains(text)) throw PreconditionError("duplicate token text: " + text);
    const auto id = static_cast<TokenId>(entries_.size());
    by_text_.emplace(text, id);
    if (type != TokenType::Merged && type != TokenType::BPE) {
      by_value_.emplace(key(type, value), id);
    } else if (type == TokenType::Merged) {
      by_value_.emplace(merged_key(parts), id);
    }
    entries_.push_back(TokenDescriptor{id, std::move(text), type, value, std::move(parts), std::move(expansion)});
    return id;
  }

  std::size_t size() const { return entries_.size(); }
  const std::vector<TokenDescriptor>& entries() const { return entries_; }

  const TokenDescriptor& at(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= entries_.size()) {
      throw PreconditionError("token id " + std::to_string(id) + " outside the vocabulary");
    }
    return entries_[static_cast<std::size_t>(id)];
  }
  const TokenDescriptor& operator[](TokenId id) const { return entries_[static_cast<std::size_t>(id)]; }
  bool contains(TokenId id) const { return id >= 0 && static_cast<std::size_t>(id) < entries_.size(); }

  std::optional<TokenId> find(std::string_view text) const {
    auto it = by_text_.find(std::string(text));
    if (it == by_text_.end()) return std::nullopt;
    return it->second;
  }
  std::optional<TokenId> find(TokenType type, int value) const {
    auto it = by_value_.find(key(type, value));
    if (it == by_value_.end()) return std::nullopt;
    return it->second;
  }
  std::optional<TokenId> find_merged(const std::vector<TokenPart>& parts) const {
    auto it = by_value_.find(merged_key(parts));
    if (it == by_value_.end()) return std::nullopt;
    return it->second;
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.entries_ == b.entries_; }

 private:
  static std::uint64_t key(TokenType type, int value) {
    return (static_cast<std::uint64_t>(type) << 56) | static_cast<std::uint32_t>(value);
  }
  static std::uint64_t merged_key(const std::vector<TokenPart>& parts) {
    // Parts are (Pitch, Velocity[, Duration]); pitch and velocity fit 8 bits.
    std::uint64_t k = (static_cast<std::uint64_t>(TokenType::Merged) << 56) |
                      (static_cast<std::uint64_t>(parts.size() & 0xF) << 52);
    const int shifts[] = {44, 36, 0};
    const std::uint64_t masks[] = {0xFF, 0xFF, 0xFFFFFFF};
    for (std::size_t i = 0; i < parts.size() && i < 3; ++i) {
      k |= (static_cast<std::uint64_t>(parts[i].value) & masks[i]) << shifts[i];
    }
    return k;
  }

  std::vector<TokenDescriptor> entries_;
  std::unordered_map<std::string, TokenId> by_text_;
  std::unordered_map<std::uint64_t, TokenId> by_value_;
};

// ---------------------------------------------------------------------------
// Schemes

enum class SchemeKind { TSD, REMI, MIDILike, PVm, PVDm };
enum class TimeModel { TimeShift, BarPosition };

struct Scheme {
  SchemeKind kind = SchemeKind::REMI;
  // Only meaningful for PVm/PVDm; TSD and MIDILike use TimeShift, REMI uses
  // BarPosition.
  TimeModel merged_time_model = TimeModel::BarPosition;
  bool use_programs = false;

  TimeModel time_model() const {
    switch (kind) {
      case SchemeKind::TSD:
      case SchemeKind::MIDILike:
        return TimeModel::TimeShift;
      case SchemeKind::REMI:
        return TimeModel::BarPosition;
      default:
        return merged_time_model;
    }
  }
  bool has_bar_position() const { return time_model() == TimeModel::BarPosition; }

  // "TSD", "REMI", "MIDILike", "PVm-TSD", "PVm-REMI", "PVDm-TSD",
  // "PVDm-REMI", each optionally suffixed with "+Program".
  std::string name() const {
    std::string n;
    switch (kind) {
      case SchemeKind::TSD: n = "TSD"; break;
      case SchemeKind::REMI: n = "REMI"; break;
      case SchemeKind::MIDILike: n = "MIDILike"; break;
      case SchemeKind::PVm: n = "PVm"; break;
      case SchemeKind::PVDm: n = "PVDm"; break;
    }
    if (kind == SchemeKind::PVm || kind == SchemeKind::PVDm) {
      n += merged_time_model == TimeModel::BarPosition ? "-REMI" : "-TSD";
    }
    if (use_programs) n += "+Program";
    return n;
  }

  static Scheme parse(std::string_view text) {
    Scheme s;
    std::string_view base = text;
    constexpr std::string_view kSuffix = "+Program";
    if (base.size() > kSuffix.size() && base.substr(base.size() - kSuffix.size()) == kSuffix) {
      s.use_programs = true;
      base.remove_suffix(kSuffix.size());
    }
    if (base == "TSD") {
      s.kind = SchemeKind::TSD;
    } else if (base == "REMI") {
      s.kind = SchemeKind::REMI;
    } else if (base == "MIDILike") {
      s.kind = SchemeKind::MIDILike;
    } else if (base == "PVm" || base == "PVm-REMI" || base == "PVm-TSD") {
      s.kind = SchemeKind::PVm;
      s.merged_time_model = base == "PVm-TSD" ? TimeModel::TimeShift : TimeModel::BarPosition;
    } else if (base == "PVDm" || base == "PVDm-REMI" || base == "PVDm-TSD") {
      s.kind = SchemeKind::PVDm;
      s.merged_time_model = base == "PVDm-TSD" ? TimeModel::TimeShift : TimeModel::BarPosition;
    } else {
      throw PreconditionError("unknown scheme: " + std::string(text));
    }
    return s;
  }

  friend bool operator==(const Scheme& a, const Scheme& b) { return a.name() == b.name(); }
};

// All scheme variants, without and with Program tokens.
inline std::vector<Scheme> all_schemes() {
  std::vector<Scheme> out;
  for (bool programs : {false, true}) {
    for (const char* n : {"TSD", "REMI", "MIDILike", "PVm-TSD", "PVm-REMI", "PVDm-TSD", "PVDm-REMI"}) {
      Scheme s = Scheme::parse(n);
      s.use_programs = programs;
      out.push_back(s);
    }
  }
  return out;
}

// Beats as a short decimal string: 1 -> "0.125", 10 -> "1.25" at 8 units/beat.
inline std::string format_beats(int units, int resolution) {
  std::ostringstream os;
  os << static_cast<double>(units) / resolution;
  return os.str();
}

// Base vocabulary of a scheme. Layout: specials, time tokens (Bar and
// Position, or TimeShift), Program tokens, then note-attribute tokens.
inline Vocabulary build_vocabulary(const Scheme& scheme, const PreprocessConfig& config) {
  config.validate();
  Vocabulary v;
  const int res = config.resolution();
  const auto durations = config.duration_units();
  const auto velocities = config.velocity_centers();

  if (scheme.has_bar_position()) {
    v.add(TokenType::Bar, 0, "Bar");
    for (int p = 0; p < config.positions_per_bar; ++p) v.add(TokenType::Position, p, "Position_" + std::to_string(p));
  } else {
    for (int d : durations) v.add(TokenType::TimeShift, d, "TimeShift_" + format_beats(d, res));
  }
  if (scheme.use_programs) {
    for (int p = kDrumProgram; p <= 127; ++p) v.add(TokenType::Program, p, "Program_" + std::to_string(p));
  }

  switch (scheme.kind) {
    case SchemeKind::TSD:
    case SchemeKind::REMI:
      for (int p = config.pitch_min; p <= config.pitch_max; ++p) v.add(TokenType::Pitch, p, "Pitch_" + std::to_string(p));
      for (int vel : velocities) v.add(TokenType::Velocity, vel, "Velocity_" + std::to_string(vel));
      for (int d : durations) v.add(TokenType::Duration, d, "Duration_" + format_beats(d, res));
      break;
    case SchemeKind::MIDILike:
      for (int p = config.pitch_min; p <= config.pitch_max; ++p) v.add(TokenType::NoteOn, p, "NoteOn_" + std::to_string(p));
      for (int p = config.pitch_min; p <= config.pitch_max; ++p) v.add(TokenType::NoteOff, p, "NoteOff_" + std::to_string(p));
      for (int vel : velocities) v.add(TokenType::Velocity, vel, "Velocity_" + std::to_string(vel));
      break;
    case SchemeKind::PVm:
      for (int p = config.pitch_min; p <= config.pitch_max; ++p) {
        for (int vel : velocities) {
          v.add(TokenType::Merged, 0, "PitchVel_" + std::to_string(p) + "_" + std::to_string(vel),
                {{TokenType::Pitch, p}, {TokenType::Velocity, vel}});
        }
      }
      for (int d : durations) v.add(TokenType::Duration, d, "Duration_" + format_beats(d, res));
      break;
    case SchemeKind::PVDm:
      for (int p = config.pitch_min; p <= config.pitch_max; ++p) {
        for (int vel : velocities) {
          for (int d : durations) {
            v.add(TokenType::Merged, 0,
                  "PitchVelDur_" + std::to_string(p) + "_" + std::to_string(vel) + "_" + format_beats(d, res),
                  {{TokenType::Pitch, p}, {TokenType::Velocity, vel}, {TokenType::Duration, d}});
          }
        }
      }
      break;
  }
  return v;
}

}  // namespace midibpe
