// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The midibpe Authors

#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "midibpe/midi_io.hpp"
#include "midibpe/score.hpp"
#include "support/generators.hpp"

namespace midibpe::testing {

// One track: 4/4, 500000 us/beat, program 0, C4 at velocity 64 for one beat.
inline std::vector<std::uint8_t> golden_single_note() {
  return {
      'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 1, 0, 1, 0x01, 0xE0,  // format 1, 1 track, 480 tpb
      'M', 'T', 'r', 'k', 0, 0, 0, 31,                          //
      0x00, 0xFF, 0x58, 0x04, 0x04, 0x02, 0x18, 0x08,           // time signature 4/4
      0x00, 0xFF, 0x51, 0x03, 0x07, 0xA1, 0x20,                 // tempo 500000
      0x00, 0xC0, 0x00,                                         // program 0
      0x00, 0x90, 0x3C, 0x40,                                   // note on
      0x83, 0x60, 0x80, 0x3C, 0x00,                             // note off after 480
      0x00, 0xFF, 0x2F, 0x00,                                   // end of track
  };
}

struct FuzzOutcome {
  std::size_t parsed = 0;
  std::size_t rejected = 0;
};

// Byte-level mutants of valid files. Any exception other than midibpe::Error
// escapes to the caller.
inline FuzzOutcome fuzz_parse_smf(std::mt19937_64& rng, std::size_t iterations) {
  std::vector<std::vector<std::uint8_t>> seeds{golden_single_note()};
  for (int i = 0; i < 8; ++i) seeds.push_back(write_smf(random_preprocessed_score(rng, PreprocessConfig{})));
  FuzzOutcome out;
  for (std::size_t iter = 0; iter < iterations; ++iter) {
    auto b = seeds[iter % seeds.size()];
    const int edits = 1 + static_cast<int>(rng() % 8);
    for (int e = 0; e < edits && !b.empty(); ++e) {
      const std::size_t at = rng() % b.size();
      switch (rng() % 4) {
        case 0: b[at] = static_cast<std::uint8_t>(rng()); break;
        case 1: b.erase(b.begin() + static_cast<std::ptrdiff_t>(at)); break;
        case 2: b.insert(b.begin() + static_cast<std::ptrdiff_t>(at), static_cast<std::uint8_t>(rng())); break;
        default: b.resize(at); break;
      }
    }
    try {
      (void)parse_smf(b);
      ++out.parsed;
    } catch (const Error&) {
      ++out.rejected;
    }
  }
  return out;
}

}  // namespace midibpe::testing
