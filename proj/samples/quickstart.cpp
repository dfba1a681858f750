// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The midibpe Authors

// Builds a short melody, tokenizes it with REMI, learns a few BPE merges and
// decodes the result back to notes.

#include <iostream>

#include "midibpe/midibpe.hpp"

int main() {
  using namespace midibpe;

  Score score;
  score.ticks_per_beat = 480;
  Track piano;
  for (int bar = 0; bar < 4; ++bar) {
    for (int beat = 0; beat < 4; ++beat) {
      const Tick onset = (bar * 4 + beat) * 480;
      piano.notes.push_back(Note{onset, 480, 60 + (beat % 2) * 4, 90});
    }
  }
  score.tracks.push_back(piano);

  const PreprocessConfig config;
  const Tokenizer remi(Scheme::parse("REMI"), config);
  const Score clean = preprocess(score, config);
  const TokenSequence tokens = remi.tokenize(clean).front();
  std::cout << "REMI tokens: " << tokens.ids.size() << " (vocabulary " << remi.vocabulary().size() << ")\n";

  const auto base = static_cast<TokenId>(remi.vocabulary().size());
  const MergeTable merges = learn_bpe(std::span<const TokenSequence>(&tokens, 1), base, base + 8);
  const TokenSequence encoded = apply_bpe(tokens, merges);
  std::cout << "after " << merges.merges().size() << " merges: " << encoded.ids.size() << " tokens\n";

  const Vocabulary extended = extend_vocabulary(remi.vocabulary(), merges);
  for (std::size_t k = 0; k < merges.merges().size(); ++k) {
    const TokenId id = base + static_cast<TokenId>(k);
    std::cout << "  " << extended[id].text << " =";
    for (TokenId part : merges.expansion(id)) std::cout << ' ' << remi.vocabulary()[part].text;
    std::cout << '\n';
  }

  const TSEReport errors = tse(undo_bpe(encoded, merges), remi);
  std::cout << "syntax errors: " << errors.total_errors() << " over " << errors.denominator << " tokens\n";

  const auto decoded = remi.detokenize(undo_bpe(encoded, merges), clean.ticks_per_beat);
  std::cout << "decoded notes: " << decoded.score.note_count() << " (original " << clean.note_count() << ")\n";
  return decoded.score.note_count() == clean.note_count() ? 0 : 1;
}
