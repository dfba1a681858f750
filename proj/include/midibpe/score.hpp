// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The midibpe Authors

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "midibpe/error.hpp"
#include "midibpe/midi_io.hpp"

namespace midibpe {

// One piece of the duration quantization grid: durations in
// (previous max_beats, max_beats] are sampled at samples_per_beat.
struct DurationSegment {
  int max_beats = 1;
  int samples_per_beat = 8;
  friend bool operator==(const DurationSegment&, const DurationSegment&) = default;
};

struct PreprocessConfig {
  int velocity_bin_count = 8;
  std::vector<DurationSegment> duration_grid{{1, 8}, {2, 4}, {4, 2}, {8, 1}};
  int positions_per_bar = 32;
  int pitch_min = 21;
  int pitch_max = 108;
  bool merge_programs = false;

  friend bool operator==(const PreprocessConfig&, const PreprocessConfig&) = default;

  // Grid units per beat: the finest resolution shared by the duration grid
  // and the position grid. Every quantized time is an integer in these units.
  int resolution() const {
    int r = positions_per_bar / 4;
    for (const auto& seg : duration_grid) r = std::lcm(r, seg.samples_per_beat);
    return r;
  }

  int positions_per_beat() const { return positions_per_bar / 4; }
  int position_step() const { return resolution() / positions_per_beat(); }
  int bar_units() const { return 4 * resolution(); }
  int pitch_count() const { return pitch_max - pitch_min + 1; }

  std::vector<int> velocity_centers() const {
    std::vector<int> centers;
    for (int k = 1; k <= velocity_bin_count; ++k) {
      centers.push_back(static_cast<int>(std::lround(128.0 * k / velocity_bin_count)) - 1);
    }
    return centers;
  }

  // Duration grid values in resolution() units, ascending.
  std::vector<int> duration_units() const {
    const int r = resolution();
    std::vector<int> units;
    int lower = 0;
    for (const auto& seg : duration_grid) {
      const int step = r / seg.samples_per_beat;
      for (int u = lower + step; u <= seg.max_beats * r; u += step) units.push_back(u);
      lower = seg.max_beats * r;
    }
    return units;
  }

  void validate() const {
    if (velocity_bin_count < 1 || velocity_bin_count > 64) {
      throw PreconditionError("velocity_bin_count must be in [1, 64]");
    }
    if (duration_grid.empty()) throw PreconditionError("duration_grid must not be empty");
    int prev = 0;
    for (const auto& seg : duration_grid) {
      if (seg.max_beats <= prev || seg.samples_per_beat < 1) {
        throw PreconditionError("duration_grid segments must be contiguous and increasing");
      }
      prev = seg.max_beats;
    }
    if (positions_per_bar < 4 || positions_per_bar % 4 != 0) {
      throw PreconditionError("positions_per_bar must be a positive multiple of 4");
    }
    if (pitch_min < 0 || pitch_max > 127 || pitch_min >= pitch_max) {
      throw PreconditionError("pitch range must satisfy 0 <= pitch_min < pitch_max <= 127");
    }
    const auto centers = velocity_centers();
    for (std::size_t i = 0; i < centers.size(); ++i) {
      if (centers[i] < 1 || (i > 0 && centers[i] <= centers[i - 1])) {
        throw PreconditionError("velocity bins must be non-empty");
      }
    }
  }
};

namespace detail {

// floor((2a + b) / 2b) for a >= 0, b > 0: a/b rounded half up.
inline std::int64_t round_half_up(std::int64_t a, std::int64_t b) { return (2 * a + b) / (2 * b); }

template <typename Range>
int nearest_tie_up(const Range& values, std::int64_t scaled_x, std::int64_t scale) {
  // Returns the element v minimising |v * scale - scaled_x|; ties go upward.
  int best = *values.begin();
  std::int64_t best_dist = -1;
  for (int v : values) {
    std::int64_t d = std::abs(static_cast<std::int64_t>(v) * scale - scaled_x);
    if (best_dist < 0 || d < best_dist || (d == best_dist && v > best)) {
      best = v;
      best_dist = d;
    }
  }
  return best;
}

}  // namespace detail

inline int quantize_velocity(int velocity, const PreprocessConfig& config) {
  return detail::nearest_tie_up(config.velocity_centers(), velocity, 1);
}

// Nearest duration grid value (resolution units) for a duration in ticks.
inline int quantize_duration_units(Tick duration, int ticks_per_beat, const PreprocessConfig& config) {
  return detail::nearest_tie_up(config.duration_units(), duration * config.resolution(), ticks_per_beat);
}

inline int program_category(int program) {
  if (program < 96 && (program < 48 || program > 55)) return program - program % 8;
  return program;
}

// Drops notes sharing (onset, pitch) with an earlier one, then shortens any
// note still sounding when the next note of the same pitch starts to the
// largest grid duration that fits. Notes must be grid-aligned and sorted.
inline void normalize_track_notes(std::vector<Note>& notes, int ticks_per_beat, const PreprocessConfig& config) {
  sort_notes(notes);
  notes.erase(std::unique(notes.begin(), notes.end(),
                          [](const Note& a, const Note& b) {
                            return a.onset_tick == b.onset_tick && a.pitch == b.pitch;
                          }),
              notes.end());
  const auto grid = config.duration_units();
  const Tick unit = ticks_per_beat / config.resolution();
  std::map<int, std::size_t> last_by_pitch;
  for (std::size_t i = 0; i < notes.size(); ++i) {
    auto it = last_by_pitch.find(notes[i].pitch);
    if (it != last_by_pitch.end()) {
      Note& prev = notes[it->second];
      if (prev.offset_tick() > notes[i].onset_tick) {
        const Tick gap_units = (notes[i].onset_tick - prev.onset_tick) / unit;
        auto fit = std::upper_bound(grid.begin(), grid.end(), gap_units);
        if (fit != grid.begin()) prev.duration_tick = static_cast<Tick>(*std::prev(fit)) * unit;
      }
    }
    last_by_pitch[notes[i].pitch] = i;
  }
}

// Quantizes a score onto the configured grids. ticks_per_beat is kept when
// it is a multiple of the grid resolution, otherwise lowered to the nearest
// such multiple; every tick value is then an exact multiple of
// ticks_per_beat / resolution.
inline Score preprocess(const Score& score, const PreprocessConfig& config) {
  config.validate();
  const int res = config.resolution();
  const int step = config.position_step();
  const Tick in_tpb = score.ticks_per_beat;
  const int out_tpb = score.ticks_per_beat % res == 0 ? score.ticks_per_beat
                                                     : std::max(res, score.ticks_per_beat - score.ticks_per_beat % res);
  const Tick unit = out_tpb / res;
  auto rescale = [&](Tick t) { return detail::round_half_up(t * out_tpb, in_tpb); };

  Score out;
  out.ticks_per_beat = out_tpb;
  out.time_signatures.clear();
  for (auto ts : score.time_signatures) {
    ts.tick = rescale(ts.tick);
    out.time_signatures.push_back(ts);
  }
  if (out.time_signatures.empty() || out.time_signatures.front().tick > 0) {
    out.time_signatures.insert(out.time_signatures.begin(), TimeSignature{0, 4, 4});
  }
  for (auto tp : score.tempos) {
    tp.tick = rescale(tp.tick);
    out.tempos.push_back(tp);
  }

  std::vector<Track> tracks;
  for (const Track& src : score.tracks) {
    Track t;
    t.program = src.program;
    t.is_drum = src.is_drum;
    for (const Note& n : src.notes) {
      if (n.pitch < config.pitch_min || n.pitch > config.pitch_max) continue;
      Note q;
      q.pitch = n.pitch;
      q.velocity = quantize_velocity(n.velocity, config);
      q.onset_tick = detail::round_half_up(n.onset_tick * res, in_tpb * step) * step * unit;
      q.duration_tick = static_cast<Tick>(quantize_duration_units(n.duration_tick, score.ticks_per_beat, config)) * unit;
      t.notes.push_back(q);
    }
    tracks.push_back(std::move(t));
  }

  if (config.merge_programs) {
    std::vector<Track> merged;
    for (Track& t : tracks) {
      if (!t.is_drum) t.program = program_category(t.program);
      auto same = std::find_if(merged.begin(), merged.end(), [&](const Track& m) {
        return m.is_drum == t.is_drum && (t.is_drum || m.program == t.program);
      });
      if (same == merged.end()) {
        merged.push_back(std::move(t));
      } else {
        same->notes.insert(same->notes.end(), t.notes.begin(), t.notes.end());
      }
    }
    tracks = std::move(merged);
  }

  for (Track& t : tracks) normalize_track_notes(t.notes, out_tpb, config);
  out.tracks = std::move(tracks);
  return out;
}

// Fraction of notes that share onset, offset and velocity with at least one
// other note of the score (all tracks pooled). With `align`, onsets and
// offsets are first snapped to the position grid.
inline double simultaneous_note_ratio(const Score& score, bool align,
                                      const PreprocessConfig& config = PreprocessConfig{}) {
  const std::size_t total = score.note_count();
  if (total == 0) throw DataError("simultaneous note ratio is undefined for an empty score");
  const Tick pos_den = static_cast<Tick>(score.ticks_per_beat) * 4;
  auto snap = [&](Tick t) {
    return align ? detail::round_half_up(t * config.positions_per_bar, pos_den) : t;
  };
  std::map<std::tuple<Tick, Tick, int>, std::size_t> groups;
  for (const auto& t : score.tracks) {
    for (const auto& n : t.notes) ++groups[{snap(n.onset_tick), snap(n.offset_tick()), n.velocity}];
  }
  std::size_t shared = 0;
  for (const auto& [key, count] : groups) {
    if (count >= 2) shared += count;
  }
  return static_cast<double>(shared) / static_cast<double>(total);
}

}  // namespace midibpe
