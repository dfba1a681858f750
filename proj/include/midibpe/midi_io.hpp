// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The midibpe Authors

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "midibpe/error.hpp"

namespace midibpe {

using Tick = std::int64_t;

struct Note {
  Tick onset_tick = 0;
  Tick duration_tick = 1;
  int pitch = 60;
  int velocity = 64;

  Tick offset_tick() const { return onset_tick + duration_tick; }
  friend bool operator==(const Note&, const Note&) = default;
};

// Notes are kept sorted by (onset_tick, pitch). A drum track ignores its
// program for tokenization purposes.
struct Track {
  int program = 0;
  bool is_drum = false;
  std::vector<Note> notes;

  friend bool operator==(const Track&, const Track&) = default;
};

struct TimeSignature {
  Tick tick = 0;
  int numerator = 4;
  int denominator = 4;
  friend bool operator==(const TimeSignature&, const TimeSignature&) = default;
};

struct Tempo {
  Tick tick = 0;
  int microseconds_per_beat = 500000;
  friend bool operator==(const Tempo&, const Tempo&) = default;
};

struct Score {
  int ticks_per_beat = 480;
  std::vector<Track> tracks;
  std::vector<TimeSignature> time_signatures{TimeSignature{}};
  std::vector<Tempo> tempos;

  std::size_t note_count() const {
    std::size_t n = 0;
    for (const auto& t : tracks) n += t.notes.size();
    return n;
  }
  friend bool operator==(const Score&, const Score&) = default;
};

inline void sort_notes(std::vector<Note>& notes) {
  std::stable_sort(notes.begin(), notes.end(), [](const Note& a, const Note& b) {
    return std::tie(a.onset_tick, a.pitch) < std::tie(b.onset_tick, b.pitch);
  });
}

// ---------------------------------------------------------------------------
// Variable-length quantities

inline constexpr std::uint32_t kMaxVlq = 0x0FFFFFFF;

struct VlqResult {
  std::uint32_t value = 0;
  std::size_t consumed = 0;
  friend bool operator==(const VlqResult&, const VlqResult&) = default;
};

// Decodes one VLQ from the front of `bytes`. `base_offset` only affects the
// offset reported in errors.
inline VlqResult decode_vlq(std::span<const std::uint8_t> bytes, std::size_t base_offset = 0) {
  std::uint32_t value = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    if (i >= bytes.size()) throw ParseError("truncated variable-length quantity", base_offset + i);
    value = (value << 7) | (bytes[i] & 0x7Fu);
    if ((bytes[i] & 0x80u) == 0) return {value, i + 1};
  }
  throw ParseError("malformed variable-length quantity (more than 4 bytes)", base_offset + 4);
}

inline std::vector<std::uint8_t> encode_vlq(std::uint32_t value) {
  if (value > kMaxVlq) {
    throw PreconditionError("value " + std::to_string(value) + " exceeds the VLQ maximum 0x0FFFFFFF");
  }
  std::array<std::uint8_t, 4> groups{};
  std::size_t n = 0;
  do {
    groups[n++] = static_cast<std::uint8_t>(value & 0x7Fu);
    value >>= 7;
  } while (value != 0);
  std::vector<std::uint8_t> out;
  out.reserve(n);
  for (std::size_t i = n; i-- > 0;) {
    out.push_back(static_cast<std::uint8_t>(groups[i] | (i != 0 ? 0x80u : 0u)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Standard MIDI File reading

namespace detail {

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> data, std::size_t pos, std::size_t end)
      : data_(data), pos_(pos), end_(end) {}

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return end_ - pos_; }
  bool done() const { return pos_ >= end_; }

  void require(std::size_t n, const char* what) const {
    if (remaining() < n) throw ParseError(std::string("truncated ") + what, pos_);
  }
  std::uint8_t u8(const char* what = "data") {
    require(1, what);
    return data_[pos_++];
  }
  std::uint8_t peek() const {
    require(1, "data");
    return data_[pos_];
  }
  std::uint32_t be(std::size_t width, const char* what) {
    require(width, what);
    std::uint32_t v = 0;
    for (std::size_t i = 0; i < width; ++i) v = (v << 8) | data_[pos_++];
    return v;
  }
  std::uint32_t vlq() {
    auto r = decode_vlq(data_.subspan(pos_, remaining()), pos_);
    pos_ += r.consumed;
    return r.value;
  }
  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    require(n, what);
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_;
  std::size_t end_;
};

inline bool chunk_id_is(std::span<const std::uint8_t> id, const char* expected) {
  return std::equal(id.begin(), id.end(), expected);
}

struct ChannelState {
  int program = -1;
  std::vector<Note> notes;
  bool seen = false;
};

inline void parse_track_chunk(ByteReader& rd, Score& score, std::vector<Track>& tracks) {
  std::array<ChannelState, 16> channels{};
  // (channel, pitch) -> FIFO of open (onset, velocity)
  std::map<std::pair<int, int>, std::deque<std::pair<Tick, int>>> open;
  Tick tick = 0;
  std::uint8_t running = 0;

  auto close_note = [&](int ch, int pitch) {
    auto it = open.find({ch, pitch});
    if (it == open.end() || it->second.empty()) return;
    auto [onset, vel] = it->second.front();
    it->second.pop_front();
    channels[ch].notes.push_back(Note{onset, std::max<Tick>(1, tick - onset), pitch, vel});
  };

  while (!rd.done()) {
    tick += rd.vlq();
    std::size_t status_pos = rd.pos();
    std::uint8_t status = rd.peek();
    if (status & 0x80) {
      rd.u8();
    } else {
      if (running == 0) throw ParseError("data byte without running status", status_pos);
      status = running;
    }

    if (status == 0xFF) {
      running = 0;
      std::uint8_t type = rd.u8("meta event");
      std::uint32_t len = rd.vlq();
      auto payload = rd.take(len, "meta event payload");
      if (type == 0x2F) break;
      if (type == 0x51 && len >= 3) {
        int us = (payload[0] << 16) | (payload[1] << 8) | payload[2];
        score.tempos.push_back(Tempo{tick, us});
      } else if (type == 0x58 && len >= 2) {
        if (payload[1] > 30) throw ParseError("time signature denominator exponent out of range", status_pos);
        score.time_signatures.push_back(TimeSignature{tick, payload[0], 1 << payload[1]});
      }
      continue;
    }
    if (status == 0xF0 || status == 0xF7) {
      running = 0;
      std::uint32_t len = rd.vlq();
      rd.take(len, "sysex payload");
      continue;
    }
    if (status >= 0xF0) throw ParseError("unexpected system message in track", status_pos);

    running = status;
    const int ch = status & 0x0F;
    const int kind = status & 0xF0;
    auto data_byte = [&]() {
      std::size_t at = rd.pos();
      std::uint8_t b = rd.u8("channel message");
      if (b & 0x80) throw ParseError("channel message data byte has high bit set", at);
      return static_cast<int>(b);
    };

    switch (kind) {
      case 0x80: {
        int pitch = data_byte();
        data_byte();
        close_note(ch, pitch);
        channels[ch].seen = true;
        break;
      }
      case 0x90: {
        int pitch = data_byte();
        int vel = data_byte();
        if (vel == 0) {
          close_note(ch, pitch);
        } else {
          open[{ch, pitch}].emplace_back(tick, vel);
        }
        channels[ch].seen = true;
        break;
      }
      case 0xA0:
      case 0xB0:
      case 0xE0:
        data_byte();
        data_byte();
        break;
      case 0xC0: {
        int program = data_byte();
        if (channels[ch].program < 0) channels[ch].program = program;
        channels[ch].seen = true;
        break;
      }
      case 0xD0:
        data_byte();
        break;
      default:
        break;
    }
  }

  // Unmatched note_on events are closed with a 1-tick duration.
  for (auto& [key, queue] : open) {
    for (auto [onset, vel] : queue) {
      channels[key.first].notes.push_back(Note{onset, 1, key.second, vel});
    }
  }

  bool any = false;
  for (int ch = 0; ch < 16; ++ch) {
    auto& c = channels[ch];
    if (!c.seen && c.notes.empty()) continue;
    any = true;
    Track t;
    t.is_drum = ch == 9;
    t.program = std::max(0, c.program);
    t.notes = std::move(c.notes);
    sort_notes(t.notes);
    tracks.push_back(std::move(t));
  }
  if (!any) tracks.push_back(Track{});
}

template <typename T, typename Less>
void sort_unique(std::vector<T>& v, Less less) {
  std::stable_sort(v.begin(), v.end(), less);
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace detail

// Parses a format 0 or 1 Standard MIDI File with tick-based division.
// Every chunk/channel combination carrying channel events becomes a Track;
// a track chunk without channel events becomes one empty Track.
inline Score parse_smf(std::span<const std::uint8_t> bytes) {
  detail::ByteReader rd(bytes, 0, bytes.size());
  if (bytes.size() < 4 || !detail::chunk_id_is(bytes.first(4), "MThd")) {
    throw ParseError("bad magic: expected MThd", 0);
  }
  rd.take(4, "header");
  std::uint32_t header_len = rd.be(4, "header length");
  if (header_len < 6) throw ParseError("header chunk shorter than 6 bytes", 4);
  std::size_t header_start = rd.pos();
  std::uint32_t format = rd.be(2, "header");
  std::uint32_t ntracks = rd.be(2, "header");
  std::uint32_t division = rd.be(2, "header");
  if (format > 1) throw ParseError("unsupported SMF format " + std::to_string(format), header_start);
  if (division & 0x8000) throw ParseError("SMPTE time division is not supported", header_start + 4);
  if (division == 0) throw ParseError("ticks per beat must be positive", header_start + 4);
  rd.take(header_len - 6, "header");

  Score score;
  score.ticks_per_beat = static_cast<int>(division);
  score.time_signatures.clear();

  std::uint32_t seen = 0;
  while (seen < ntracks) {
    if (rd.done()) throw ParseError("truncated file: missing track chunks", rd.pos());
    std::size_t chunk_pos = rd.pos();
    auto id = rd.take(4, "chunk id");
    std::uint32_t len = rd.be(4, "chunk length");
    if (rd.remaining() < len) throw ParseError("truncated chunk", chunk_pos);
    std::size_t body = rd.pos();
    rd.take(len, "chunk body");
    if (!detail::chunk_id_is(id, "MTrk")) continue;
    detail::ByteReader track_rd(bytes, body, body + len);
    detail::parse_track_chunk(track_rd, score, score.tracks);
    ++seen;
  }

  detail::sort_unique(score.tempos, [](const Tempo& a, const Tempo& b) { return a.tick < b.tick; });
  detail::sort_unique(score.time_signatures,
                      [](const TimeSignature& a, const TimeSignature& b) { return a.tick < b.tick; });
  if (score.time_signatures.empty() || score.time_signatures.front().tick > 0) {
    score.time_signatures.insert(score.time_signatures.begin(), TimeSignature{0, 4, 4});
  }
  return score;
}

// Parse-success predicate used for corruption filtering.
inline bool is_valid_smf(std::span<const std::uint8_t> bytes) {
  try {
    (void)parse_smf(bytes);
    return true;
  } catch (const Error&) {
    return false;
  }
}

// ---------------------------------------------------------------------------
// Standard MIDI File writing

namespace detail {

struct TimedEvent {
  Tick tick;
  int order;  // meta < program < note_off < note_on at equal ticks
  std::vector<std::uint8_t> bytes;
};

inline void append_be(std::vector<std::uint8_t>& out, std::uint32_t v, int width) {
  for (int i = width - 1; i >= 0; --i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

inline int denominator_exponent(int denominator) {
  int e = 0;
  while ((1 << e) < denominator && e < 30) ++e;
  if ((1 << e) != denominator) {
    throw PreconditionError("time signature denominator must be a power of two: " + std::to_string(denominator));
  }
  return e;
}

}  // namespace detail

// Writes a format 1 file: one track chunk per Track, tempo and time
// signature events in the first chunk. A score without tracks still gets one
// (conductor) chunk.
inline std::vector<std::uint8_t> write_smf(const Score& score) {
  if (score.ticks_per_beat <= 0 || score.ticks_per_beat > 0x7FFF) {
    throw PreconditionError("ticks_per_beat must be in [1, 32767]");
  }
  static constexpr std::array<int, 15> kMelodicChannels{0, 1, 2, 3, 4, 5, 6, 7, 8, 10, 11, 12, 13, 14, 15};

  const std::size_t chunk_count = std::max<std::size_t>(1, score.tracks.size());
  std::vector<std::uint8_t> out{'M', 'T', 'h', 'd'};
  detail::append_be(out, 6, 4);
  detail::append_be(out, 1, 2);
  detail::append_be(out, static_cast<std::uint32_t>(chunk_count), 2);
  detail::append_be(out, static_cast<std::uint32_t>(score.ticks_per_beat), 2);

  std::size_t melodic_index = 0;
  for (std::size_t i = 0; i < chunk_count; ++i) {
    std::vector<detail::TimedEvent> events;
    if (i == 0) {
      for (const auto& ts : score.time_signatures) {
        if (ts.numerator < 1 || ts.numerator > 255) throw PreconditionError("time signature numerator out of range");
        events.push_back({ts.tick, 0,
                          {0xFF, 0x58, 0x04, static_cast<std::uint8_t>(ts.numerator),
                           static_cast<std::uint8_t>(detail::denominator_exponent(ts.denominator)), 24, 8}});
      }
      for (const auto& tp : score.tempos) {
        if (tp.microseconds_per_beat <= 0 || tp.microseconds_per_beat > 0xFFFFFF) {
          throw PreconditionError("tempo out of range");
        }
        auto us = static_cast<std::uint32_t>(tp.microseconds_per_beat);
        events.push_back({tp.tick, 0,
                          {0xFF, 0x51, 0x03, static_cast<std::uint8_t>(us >> 16),
                           static_cast<std::uint8_t>(us >> 8), static_cast<std::uint8_t>(us)}});
      }
    }
    if (i < score.tracks.size()) {
      const Track& track = score.tracks[i];
      int ch = track.is_drum ? 9 : kMelodicChannels[melodic_index++ % kMelodicChannels.size()];
      if (track.program < 0 || track.program > 127) throw PreconditionError("program out of range");
      events.push_back({0, 1, {static_cast<std::uint8_t>(0xC0 | ch), static_cast<std::uint8_t>(track.program)}});
      for (const Note& n : track.notes) {
        if (n.pitch < 0 || n.pitch > 127 || n.velocity < 1 || n.velocity > 127 || n.duration_tick < 1 ||
            n.onset_tick < 0) {
          throw PreconditionError("note out of range");
        }
        auto p = static_cast<std::uint8_t>(n.pitch);
        events.push_back({n.onset_tick, 3, {static_cast<std::uint8_t>(0x90 | ch), p, static_cast<std::uint8_t>(n.velocity)}});
        events.push_back({n.offset_tick(), 2, {static_cast<std::uint8_t>(0x80 | ch), p, 0}});
      }
    }
    std::stable_sort(events.begin(), events.end(), [](const auto& a, const auto& b) {
      return std::tie(a.tick, a.order) < std::tie(b.tick, b.order);
    });

    std::vector<std::uint8_t> body;
    Tick last = 0;
    for (const auto& ev : events) {
      Tick delta = ev.tick - last;
      if (delta < 0 || delta > kMaxVlq) throw Error("tick delta exceeds the VLQ range");
      auto vlq = encode_vlq(static_cast<std::uint32_t>(delta));
      body.insert(body.end(), vlq.begin(), vlq.end());
      body.insert(body.end(), ev.bytes.begin(), ev.bytes.end());
      last = ev.tick;
    }
    body.insert(body.end(), {0x00, 0xFF, 0x2F, 0x00});

    out.insert(out.end(), {'M', 'T', 'r', 'k'});
    detail::append_be(out, static_cast<std::uint32_t>(body.size()), 4);
    out.insert(out.end(), body.begin(), body.end());
  }
  return out;
}

}  // namespace midibpe
