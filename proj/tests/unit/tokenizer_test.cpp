// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The midibpe Authors

#include <gtest/gtest.h>

#include <random>
#include <set>
#include <string>
#include <vector>

#include "midibpe/tokenizer.hpp"
#include "support/generators.hpp"

namespace midibpe {
namespace {

std::vector<std::string> types_of(const TokenSequence& seq, const Vocabulary& v) {
  std::vector<std::string> out;
  for (TokenId id : seq.ids) out.emplace_back(to_string(v[id].type));
  return out;
}

std::vector<std::string> texts_of(const TokenSequence& seq, const Vocabulary& v) {
  std::vector<std::string> out;
  for (TokenId id : seq.ids) out.push_back(v[id].text);
  return out;
}

Score preprocessed(std::vector<Note> notes, int program = 0, bool drum = false) {
  Score s;
  s.ticks_per_beat = 480;
  s.tracks.push_back(Track{program, drum, std::move(notes)});
  return s;
}

TEST(Vocabulary, SizesPerScheme) {
  const PreprocessConfig cfg;
  auto size = [&](const char* name) { return build_vocabulary(Scheme::parse(name), cfg).size(); };
  EXPECT_EQ(size("REMI"), 154u);
  EXPECT_EQ(size("TSD"), 141u);
  EXPECT_EQ(size("MIDILike"), 5u + 88 + 88 + 8 + 20);
  EXPECT_EQ(size("PVm-REMI"), 5u + 33 + 704 + 20);
  EXPECT_EQ(size("PVm-TSD"), 5u + 20 + 704 + 20);
  EXPECT_EQ(size("PVDm-REMI"), 5u + 33 + 14080);
  EXPECT_EQ(size("PVDm-TSD"), 5u + 20 + 14080);
  EXPECT_EQ(size("REMI+Program"), 154u + 129);
}

TEST(Vocabulary, SpecialIdsAndUniqueTexts) {
  for (const Scheme& s : all_schemes()) {
    const Vocabulary v = build_vocabulary(s, PreprocessConfig{});
    EXPECT_EQ(v[kPad].text, "PAD");
    EXPECT_EQ(v[kBos].text, "BOS");
    EXPECT_EQ(v[kEos].text, "EOS");
    EXPECT_EQ(v[kMask].text, "MASK");
    EXPECT_EQ(v[kSep].text, "SEP");
    std::set<std::string> texts;
    for (const auto& t : v.entries()) {
      EXPECT_TRUE(texts.insert(t.text).second) << t.text;
      EXPECT_EQ(v.find(t.text), t.id);
    }
  }
}

TEST(Vocabulary, TokenTexts) {
  const Vocabulary v = build_vocabulary(Scheme::parse("PVDm-REMI+Program"), PreprocessConfig{});
  EXPECT_TRUE(v.find("Program_-1").has_value());
  EXPECT_TRUE(v.find("Position_31").has_value());
  EXPECT_TRUE(v.find("PitchVelDur_60_95_1.25").has_value());
  EXPECT_FALSE(v.find("Position_32").has_value());
  const Vocabulary t = build_vocabulary(Scheme::parse("TSD"), PreprocessConfig{});
  EXPECT_TRUE(t.find("TimeShift_0.125").has_value());
  EXPECT_TRUE(t.find("Duration_8").has_value());
}

TEST(Scheme, NamesRoundTrip) {
  for (const Scheme& s : all_schemes()) EXPECT_EQ(Scheme::parse(s.name()), s);
  EXPECT_EQ(all_schemes().size(), 14u);
  EXPECT_THROW(Scheme::parse("Octuple"), PreconditionError);
}

TEST(Tokenize, ThreeNotesRemiTypeStream) {
  const Tokenizer tok(Scheme::parse("REMI"), PreprocessConfig{});
  const Score s = preprocessed({{0, 480, 60, 95}, {960, 240, 64, 79}, {1920, 960, 67, 95}});
  const auto seqs = tok.tokenize(s);
  ASSERT_EQ(seqs.size(), 1u);
  EXPECT_EQ(types_of(seqs[0], tok.vocabulary()),
            (std::vector<std::string>{"Bos", "Bar", "Position", "Pitch", "Velocity", "Duration", "Position", "Pitch",
                                      "Velocity", "Duration", "Bar", "Position", "Pitch", "Velocity", "Duration",
                                      "Eos"}));
  EXPECT_EQ(texts_of(seqs[0], tok.vocabulary())[2], "Position_0");
  EXPECT_EQ(texts_of(seqs[0], tok.vocabulary())[6], "Position_16");
}

TEST(Tokenize, EmptyScoreIsFramedOnly) {
  for (const Scheme& scheme : all_schemes()) {
    const Tokenizer tok(scheme, PreprocessConfig{});
    const auto seqs = tok.tokenize(Score{});
    ASSERT_EQ(seqs.size(), 1u);
    EXPECT_EQ(seqs[0].ids, (std::vector<TokenId>{kBos, kEos}));
    const auto back = tok.detokenize(seqs[0]);
    EXPECT_EQ(back.score.note_count(), 0u);
    EXPECT_EQ(back.diagnostics.total(), 0u);
  }
}

TEST(Tokenize, TsdNoteAtZeroHasNoTimeShift) {
  const Tokenizer tok(Scheme::parse("TSD"), PreprocessConfig{});
  const auto seqs = tok.tokenize(preprocessed({{0, 480, 60, 95}}));
  EXPECT_EQ(texts_of(seqs[0], tok.vocabulary()),
            (std::vector<std::string>{"BOS", "Pitch_60", "Velocity_95", "Duration_1", "EOS"}));
}

TEST(Tokenize, LongGapsUseRepeatedMaximalShifts) {
  const Tokenizer tok(Scheme::parse("TSD"), PreprocessConfig{});
  // 19.375 beats = 8 + 8 + 3 + 0.375
  const auto seqs = tok.tokenize(preprocessed({{9300, 60, 60, 95}}));
  EXPECT_EQ(texts_of(seqs[0], tok.vocabulary()),
            (std::vector<std::string>{"BOS", "TimeShift_8", "TimeShift_8", "TimeShift_3", "TimeShift_0.375",
                                      "Pitch_60", "Velocity_95", "Duration_0.125", "EOS"}));
}

TEST(Tokenize, RemiEmitsEmptyBars) {
  const Tokenizer tok(Scheme::parse("REMI"), PreprocessConfig{});
  const auto seqs = tok.tokenize(preprocessed({{480 * 8 + 240, 480, 60, 95}}));
  EXPECT_EQ(texts_of(seqs[0], tok.vocabulary()),
            (std::vector<std::string>{"BOS", "Bar", "Bar", "Bar", "Position_4", "Pitch_60", "Velocity_95",
                                      "Duration_1", "EOS"}));
}

TEST(Tokenize, MidiLikeReleasesBeforeAttacksAtEqualTime) {
  const Tokenizer tok(Scheme::parse("MIDILike"), PreprocessConfig{});
  const auto seqs = tok.tokenize(preprocessed({{0, 480, 60, 95}, {480, 480, 60, 79}}));
  EXPECT_EQ(texts_of(seqs[0], tok.vocabulary()),
            (std::vector<std::string>{"BOS", "NoteOn_60", "Velocity_95", "TimeShift_1", "NoteOff_60", "NoteOn_60",
                                      "Velocity_79", "TimeShift_1", "NoteOff_60", "EOS"}));
}

TEST(Tokenize, ProgramsOrderedWithinOnset) {
  const Tokenizer tok(Scheme::parse("TSD+Program"), PreprocessConfig{});
  Score s;
  s.tracks.push_back(Track{40, false, {{0, 480, 50, 95}}});
  s.tracks.push_back(Track{0, true, {{0, 480, 36, 95}}});
  s.tracks.push_back(Track{0, false, {{0, 480, 70, 95}, {0, 480, 48, 95}}});
  const auto seqs = tok.tokenize(s);
  ASSERT_EQ(seqs.size(), 1u);
  const auto t = texts_of(seqs[0], tok.vocabulary());
  EXPECT_EQ(t, (std::vector<std::string>{"BOS", "Program_-1", "Pitch_36", "Velocity_95", "Duration_1", "Program_0",
                                         "Pitch_48", "Velocity_95", "Duration_1", "Program_0", "Pitch_70",
                                         "Velocity_95", "Duration_1", "Program_40", "Pitch_50", "Velocity_95",
                                         "Duration_1", "EOS"}));
}

TEST(Tokenize, MergedSchemes) {
  const Score s = preprocessed({{0, 600, 60, 95}});
  const Tokenizer pvm(Scheme::parse("PVm-TSD"), PreprocessConfig{});
  EXPECT_EQ(texts_of(pvm.tokenize(s)[0], pvm.vocabulary()),
            (std::vector<std::string>{"BOS", "PitchVel_60_95", "Duration_1.25", "EOS"}));
  const Tokenizer pvdm(Scheme::parse("PVDm-REMI"), PreprocessConfig{});
  EXPECT_EQ(texts_of(pvdm.tokenize(s)[0], pvdm.vocabulary()),
            (std::vector<std::string>{"BOS", "Bar", "Position_0", "PitchVelDur_60_95_1.25", "EOS"}));
}

TEST(Tokenize, OffGridNoteIsRejected) {
  const Tokenizer tok(Scheme::parse("REMI"), PreprocessConfig{});
  EXPECT_THROW(tok.tokenize(preprocessed({{7, 480, 60, 95}})), PreconditionError);
  EXPECT_THROW(tok.tokenize(preprocessed({{0, 480, 60, 100}})), PreconditionError);
  EXPECT_THROW(tok.tokenize(preprocessed({{0, 540, 60, 95}})), PreconditionError);
  EXPECT_THROW(tok.tokenize(preprocessed({{0, 480, 10, 95}})), PreconditionError);
}

TEST(Detokenize, DanglingPitchIsDropped) {
  const Tokenizer tok(Scheme::parse("REMI"), PreprocessConfig{});
  const Vocabulary& v = tok.vocabulary();
  TokenSequence seq{tok.scheme(),
                    {kBos, *v.find("Bar"), *v.find("Position_0"), *v.find("Pitch_60"), *v.find("Velocity_95"),
                     *v.find("Duration_1"), *v.find("Pitch_62"), kEos}};
  const auto r = tok.detokenize(seq);
  EXPECT_EQ(r.score.note_count(), 1u);
  EXPECT_EQ(r.diagnostics.total(), 1u);
  EXPECT_EQ(r.diagnostics.dropped_notes, 1u);
}

TEST(Detokenize, SkipsInvalidTokensAndContinues) {
  const Tokenizer tok(Scheme::parse("REMI"), PreprocessConfig{});
  const Vocabulary& v = tok.vocabulary();
  // Position_8 then Position_4 (time moves backward): Position_4 is skipped.
  TokenSequence seq{tok.scheme(),
                    {kBos, *v.find("Bar"), *v.find("Position_8"), *v.find("Pitch_60"), *v.find("Velocity_95"),
                     *v.find("Duration_1"), *v.find("Position_4"), *v.find("Pitch_62"), *v.find("Velocity_95"),
                     *v.find("Duration_1"), kEos}};
  const auto r = tok.detokenize(seq);
  EXPECT_EQ(r.diagnostics.skipped_tokens, 1u);
  ASSERT_EQ(r.score.note_count(), 2u);
  EXPECT_EQ(r.score.tracks[0].notes[1].onset_tick, 480);
}

TEST(Detokenize, UnknownIdsThrow) {
  const Tokenizer tok(Scheme::parse("TSD"), PreprocessConfig{});
  EXPECT_THROW(tok.detokenize(TokenSequence{tok.scheme(), {kBos, 100000, kEos}}), PreconditionError);
}

TEST(Detokenize, UnclosedMidiLikeNoteIsDropped) {
  const Tokenizer tok(Scheme::parse("MIDILike"), PreprocessConfig{});
  const Vocabulary& v = tok.vocabulary();
  TokenSequence seq{tok.scheme(), {kBos, *v.find("NoteOn_60"), *v.find("Velocity_95"), *v.find("TimeShift_1"), kEos}};
  const auto r = tok.detokenize(seq);
  EXPECT_EQ(r.score.note_count(), 0u);
  EXPECT_EQ(r.diagnostics.dropped_notes, 1u);
}

class RoundTrip : public ::testing::TestWithParam<std::string> {};

TEST_P(RoundTrip, RandomScores) {
  const Scheme scheme = Scheme::parse(GetParam());
  PreprocessConfig cfg;
  cfg.merge_programs = scheme.use_programs;
  const Tokenizer tok(scheme, cfg);
  std::mt19937_64 rng(std::hash<std::string>{}(GetParam()));
  for (int i = 0; i < 40; ++i) {
    const Score s = testing::random_preprocessed_score(rng, cfg);
    const auto seqs = tok.tokenize(s);
    const auto back = tok.detokenize(seqs, s.ticks_per_beat);
    EXPECT_EQ(back.diagnostics.total(), 0u);
    const std::string diff = testing::score_difference(s, back.score, scheme.use_programs);
    EXPECT_TRUE(diff.empty()) << GetParam() << " case " << i << ": " << diff;
    EXPECT_EQ(tok.tokenize(s), seqs) << "determinism";
  }
}

INSTANTIATE_TEST_SUITE_P(AllSchemes, RoundTrip,
                         ::testing::Values("TSD", "REMI", "MIDILike", "PVm-TSD", "PVm-REMI", "PVDm-TSD", "PVDm-REMI",
                                           "TSD+Program", "REMI+Program", "MIDILike+Program", "PVm-TSD+Program",
                                           "PVm-REMI+Program", "PVDm-TSD+Program", "PVDm-REMI+Program"),
                         [](const auto& info) {
                           std::string n = info.param;
                           for (char& c : n) {
                             if (c == '-' || c == '+') c = '_';
                           }
                           return n;
                         });

}  // namespace
}  // namespace midibpe
