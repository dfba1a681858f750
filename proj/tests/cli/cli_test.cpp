// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The midibpe Authors

// Runs the midibpe executable end to end on generated corpora.

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sys/wait.h>

#include "midibpe/midibpe.hpp"
#include "support/generators.hpp"

namespace midibpe {
namespace {

namespace fs = std::filesystem;

// Same musical content at another resolution; exact when the ratio divides.
Score rescaled(Score s, int tpb) {
  for (auto& t : s.tracks) {
    for (auto& n : t.notes) {
      n.onset_tick = n.onset_tick * tpb / s.ticks_per_beat;
      n.duration_tick = n.duration_tick * tpb / s.ticks_per_beat;
    }
  }
  s.ticks_per_beat = tpb;
  return s;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("midibpe_cli_" + std::string(info->name()) + "_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override {
    if (!HasFailure()) fs::remove_all(dir_);
  }

  // Exit status of `midibpe <args>`; stdout and stderr go to dir/log.txt.
  int run(const std::string& args) {
    const std::string cmd = std::string(MIDIBPE_CLI) + " " + args + " >>" + (dir_ / "log.txt").string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  fs::path path(const std::string& rel) const { return dir_ / rel; }
  std::string p(const std::string& rel) const { return path(rel).string(); }

  Json json(const std::string& rel) const {
    std::ifstream in(path(rel));
    return Json::parse(in);
  }
  std::string text(const std::string& rel) const {
    std::ifstream in(path(rel), std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  }
  void write(const std::string& rel, const std::string& content) const {
    fs::create_directories(path(rel).parent_path());
    std::ofstream(path(rel), std::ios::binary) << content;
  }

  // Random files whose content is already on the grid (mixed resolutions).
  std::vector<Score> make_corpus(const std::string& rel, std::size_t n, std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    std::vector<Score> scores;
    fs::create_directories(path(rel));
    for (std::size_t i = 0; i < n; ++i) {
      Score s = testing::random_preprocessed_score(rng, PreprocessConfig{}, testing::ScoreShape{2, 60, 8, false});
      const auto bytes = write_smf(s);
      std::ofstream(path(rel) / ("song" + std::to_string(i) + ".mid"), std::ios::binary)
          .write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
      scores.push_back(std::move(s));
    }
    return scores;
  }

  // The reports with every "timing" member removed.
  static Json without_timing(Json j) {
    if (j.is_object()) {
      j.erase("timing");
      for (auto& [k, v] : j.items()) v = without_timing(v);
    }
    return j;
  }

  fs::path dir_;
};

TEST_F(Cli, BpeLearnOnToyCorpus) {
  write("toy/seq.tok.json", R"({"scheme": "TSD", "ids": [5, 5, 6, 5, 5, 6, 5, 5, 7, 5, 5]})");
  ASSERT_EQ(run("bpe-learn " + p("toy") + " --base-size 8 --vocab-size 10 -o " + p("merges.json")), 0) << text("log.txt");
  EXPECT_EQ(json("merges.json"), Json::parse(R"({"base_size": 8, "merges": [[5, 5], [8, 6]]})"));
  const Json manifest = json("merges.json.manifest.json");
  EXPECT_EQ(manifest.at("command"), "bpe-learn");
  EXPECT_EQ(manifest.at("summary").at("achieved_vocab_size"), 10);
  EXPECT_TRUE(manifest.at("timing").contains("total_seconds"));

  ASSERT_EQ(run("bpe-apply " + p("toy") + " --merges " + p("merges.json") + " -o " + p("enc")), 0);
  EXPECT_EQ(json("enc/seq.tok.json").at("ids"), Json::parse("[9, 9, 8, 7, 8]"));
  ASSERT_EQ(run("bpe-undo " + p("enc") + " --merges " + p("merges.json") + " -o " + p("dec")), 0);
  EXPECT_EQ(json("dec/seq.tok.json"), json("toy/seq.tok.json"));
}

TEST_F(Cli, TseOnTokenizerOutputIsZero) {
  make_corpus("midi", 6, 1);
  for (const char* scheme : {"TSD", "REMI", "MIDILike", "PVDm-REMI"}) {
    const std::string out = std::string("tok_") + scheme;
    ASSERT_EQ(run("tokenize " + p("midi") + " --scheme " + scheme + " -o " + p(out)), 0) << text("log.txt");
    ASSERT_EQ(run("tse " + p(out) + " --scheme " + scheme + " -o " + p(out + ".tse.json")), 0) << text("log.txt");
    const Json report = json(out + ".tse.json");
    EXPECT_EQ(report.at("files").size(), 6u);
    for (const auto& [key, value] : report.at("aggregate").items()) {
      if (key == "denominator") {
        EXPECT_GT(value.get<int>(), 0);
      } else if (value.is_object()) {
        EXPECT_EQ(value.at("count"), 0) << scheme << " " << key;
        EXPECT_EQ(value.at("ratio"), 0.0);
      }
    }
  }
}

TEST_F(Cli, StatsTokensPerBeatDropsAfterBpe) {
  make_corpus("midi", 12, 2);
  ASSERT_EQ(run("tokenize " + p("midi") + " --scheme TSD -o " + p("tok")), 0) << text("log.txt");
  ASSERT_EQ(run("bpe-learn " + p("tok") + " --vocab-size 300 -o " + p("merges.json")), 0) << text("log.txt");
  ASSERT_EQ(run("bpe-apply " + p("tok") + " --merges " + p("merges.json") + " -o " + p("bpe")), 0);
  ASSERT_EQ(run("stats " + p("tok") + " --timing-reps 3 -o " + p("before.json")), 0) << text("log.txt");
  ASSERT_EQ(run("stats " + p("bpe") + " --merges " + p("merges.json") + " -o " + p("after.json")), 0)
      << text("log.txt");
  const Json before = json("before.json");
  const Json after = json("after.json");
  ASSERT_GT(json("merges.json").at("merges").size(), 0u);
  EXPECT_LT(after.at("tokens_per_beat").get<double>(), before.at("tokens_per_beat").get<double>());
  EXPECT_GT(after.at("vocab_size").get<int>(), before.at("vocab_size").get<int>());
  EXPECT_GE(after.at("bpe").at("average_length").get<double>(), 2.0);
  EXPECT_TRUE(before.at("timing").at("deterministic").get<bool>());
  EXPECT_EQ(after.at("tse"), before.at("tse"));
}

TEST_F(Cli, RunsAreIdempotentAndJobCountFree) {
  make_corpus("midi", 8, 3);
  ASSERT_EQ(run("--jobs 1 tokenize " + p("midi") + " --scheme REMI -o " + p("a")), 0) << text("log.txt");
  ASSERT_EQ(run("--jobs 4 tokenize " + p("midi") + " --scheme REMI -o " + p("b")), 0);
  for (const auto& e : fs::directory_iterator(path("a"))) {
    const std::string name = e.path().filename().string();
    if (name == "manifest.json") continue;
    EXPECT_EQ(text("a/" + name), text("b/" + name)) << name;
  }
  Json ma = json("a/manifest.json"), mb = json("b/manifest.json");
  EXPECT_EQ(without_timing(ma).at("summary"), without_timing(mb).at("summary"));
  EXPECT_EQ(ma.at("outputs").size(), 10u);  // 8 token files, config, vocabulary

  ASSERT_EQ(run("stats " + p("a") + " -o " + p("s1.json")), 0);
  ASSERT_EQ(run("stats " + p("a") + " -o " + p("s2.json")), 0);
  EXPECT_EQ(without_timing(json("s1.json")), without_timing(json("s2.json")));
}

TEST_F(Cli, PipelineReproducesPreprocessedContent) {
  const auto scores = make_corpus("midi", 6, 4);
  ASSERT_EQ(run("tokenize " + p("midi") + " --scheme MIDILike -o " + p("tok")), 0) << text("log.txt");
  ASSERT_EQ(run("bpe-learn " + p("tok") + " --vocab-size 260 -o " + p("m.json")), 0);
  ASSERT_EQ(run("bpe-apply " + p("tok") + " --merges " + p("m.json") + " -o " + p("enc")), 0);
  ASSERT_EQ(run("bpe-undo " + p("enc") + " --merges " + p("m.json") + " -o " + p("dec")), 0);
  ASSERT_EQ(run("detokenize " + p("dec") + " --vocab " + p("tok/vocab.json") + " -o " + p("out")), 0) << text("log.txt");
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const std::string name = "song" + std::to_string(i);
    EXPECT_EQ(text("dec/" + name + ".tok.json"), text("tok/" + name + ".tok.json"));
    std::ifstream in(path("out/" + name + ".mid"), std::ios::binary);
    const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    const Score back = parse_smf(bytes);
    EXPECT_EQ(testing::score_difference(rescaled(preprocess(scores[i], PreprocessConfig{}), 480), back, false), "") << name;
  }
  // Detokenizing BPE tokens directly needs the merge table.
  EXPECT_EQ(run("detokenize " + p("enc") + " -o " + p("bad")), 2);
  ASSERT_EQ(run("detokenize " + p("enc") + " --merges " + p("m.json") + " -o " + p("out2")), 0);
  EXPECT_EQ(text("out2/song0.mid"), text("out/song0.mid"));
}

TEST_F(Cli, CorpusCommands) {
  write("edges.tsv", "a\tx\t2\na\ty\t1\nb\tx\t1\nb\ty\t2\n");
  ASSERT_EQ(run("dedup " + p("edges.tsv") + " -o " + p("pairs.tsv")), 0) << text("log.txt");
  EXPECT_EQ(text("pairs.tsv"), "a\tx\t2.0\nb\ty\t2.0\n");
  EXPECT_EQ(json("pairs.tsv.manifest.json").at("summary").at("total_weight"), 4.0);

  std::string list;
  for (int i = 0; i < 100; ++i) list += "f" + std::to_string(i) + "\n";
  write("list.txt", list);
  ASSERT_EQ(run("split " + p("list.txt") + " --valid 0.02 --test 0.05 --seed 3 -o " + p("split.json")), 0);
  const Json split = json("split.json");
  EXPECT_EQ(split.at("train").size(), 93u);
  EXPECT_EQ(split.at("valid").size(), 2u);
  EXPECT_EQ(split.at("test").size(), 5u);
  EXPECT_EQ(split.at("seed"), 3);

  make_corpus("midi", 2, 5);
  write("midi/broken.mid", "MThd");
  ASSERT_EQ(run("filter " + p("midi") + " --min-tracks 1 -o " + p("filter.json")), 0);
  const Json filter = json("filter.json");
  EXPECT_EQ(filter.at("accepted").size(), 2u);
  EXPECT_EQ(filter.at("rejected").at(0).at("reason"), "corrupt");
}

TEST_F(Cli, EmbedGeometry) {
  std::vector<float> values;
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 4; ++j) values.push_back(j == i / 2 ? (i % 2 == 0 ? 1.0f : -1.0f) : 0.0f);
  }
  const auto bytes = save_embeddings(EmbeddingMatrix(8, 4, values));
  write("emb.bin", std::string(bytes.begin(), bytes.end()));
  ASSERT_EQ(run("embed-geometry " + p("emb.bin") + " --csv " + p("spectrum.csv") + " -o " + p("geo.json")), 0)
      << text("log.txt");
  const Json geo = json("geo.json");
  EXPECT_NEAR(geo.at("isoscore").get<double>(), 1.0, 1e-9);
  EXPECT_EQ(geo.at("pca_id"), 4);
  EXPECT_EQ(geo.at("spectrum").size(), 4u);
  EXPECT_EQ(text("spectrum.csv").substr(0, 32), "index,normalized_singular_value\n");
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("--version"), 0);
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("tokenize"), 1);
  EXPECT_EQ(run("bogus"), 1);
  make_corpus("midi", 1, 6);
  EXPECT_EQ(run("tokenize " + p("midi") + " --scheme Octuple -o " + p("x")), 1);
  write("bad/x.mid", "MThd\x00\x00\x00\x06");
  EXPECT_EQ(run("tokenize " + p("bad") + " -o " + p("y")), 2);
  EXPECT_NE(text("log.txt").find("byte offset"), std::string::npos);
  EXPECT_EQ(run("tokenize " + p("bad") + " --skip-invalid -o " + p("z")), 0);
  EXPECT_EQ(json("z/manifest.json").at("summary").at("skipped").size(), 1u);
  write("edges.tsv", "a\tb\n");
  EXPECT_EQ(run("dedup " + p("edges.tsv") + " -o " + p("pairs.tsv")), 2);
  write("emb.bin", "EMB2");
  EXPECT_EQ(run("embed-geometry " + p("emb.bin") + " -o " + p("g.json")), 2);
  write("tiny.txt", "a\n");
  EXPECT_EQ(run("split " + p("tiny.txt") + " -o " + p("s.json")), 2);
  EXPECT_EQ(run("split " + p("tiny.txt") + " --valid 0.6 --test 0.5 -o " + p("s.json")), 1);
}

}  // namespace
}  // namespace midibpe
