// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The midibpe Authors

// midibpe command-line tool. Exit codes: 0 success, 1 usage error, 2 data
// error. Every run writes a manifest next to its outputs.

#include <CLI11.hpp>
#include <functional>
#include <iostream>
#include <mutex>

#include "cli_support.hpp"
#include "midibpe/midibpe.hpp"

namespace midibpe::cli {
namespace {

// Scheme plus preprocessing parameters; serialized as one flat object
// {"scheme": ..., <PreprocessConfig fields>}.
struct RunConfig {
  Scheme scheme = Scheme::parse("REMI");
  PreprocessConfig preprocess;

  Json to_json() const {
    Json j = midibpe::to_json(preprocess);
    j["scheme"] = scheme.name();
    return j;
  }
};

inline constexpr const char* kConfigFile = "config.json";

RunConfig config_from_json(const Json& j) {
  RunConfig c;
  c.preprocess = preprocess_config_from_json(j);
  if (j.contains("scheme")) {
    try {
      c.scheme = Scheme::parse(j.at("scheme").get<std::string>());
    } catch (const Json::exception& e) {
      throw DataError(std::string("invalid scheme in config: ") + e.what());
    } catch (const PreconditionError& e) {
      throw DataError(e.what());
    }
  }
  return c;
}

// Token files carry their scheme; every file of a run must agree.
struct TokenCorpus {
  std::vector<InputFile> files;
  std::vector<std::vector<TokenSequence>> sequences;  // per file
  Scheme scheme;
};

TokenCorpus load_tokens(const fs::path& dir, unsigned jobs) {
  TokenCorpus c;
  c.files = discover_tokens(dir);
  if (c.files.empty()) throw DataError("no *" + std::string(kTokenSuffix) + " files under " + dir.string());
  c.sequences = parallel_map(c.files.size(), jobs, [&](std::size_t i) {
    return with_file_context(c.files[i].path, [&] { return token_file_from_json(read_json(c.files[i].path)); });
  });
  std::optional<Scheme> scheme;
  for (std::size_t i = 0; i < c.files.size(); ++i) {
    if (c.sequences[i].empty()) throw DataError(c.files[i].path.string() + ": no token sequences");
    for (const auto& s : c.sequences[i]) {
      if (!scheme) scheme = s.scheme;
      if (!(s.scheme == *scheme)) {
        throw DataError(c.files[i].path.string() + ": scheme " + s.scheme.name() + " differs from " + scheme->name());
      }
    }
  }
  c.scheme = *scheme;
  return c;
}

// --config, else <token dir>/config.json, else defaults; the scheme always
// comes from the token files.
RunConfig resolve_config(const std::string& flag, const fs::path& token_dir, const Scheme& scheme) {
  RunConfig c;
  if (!flag.empty()) {
    c = config_from_json(read_json(flag));
  } else if (fs::is_directory(token_dir) && fs::exists(token_dir / kConfigFile)) {
    c = config_from_json(read_json(token_dir / kConfigFile));
  }
  c.scheme = scheme;
  return c;
}

std::optional<MergeTable> load_merges(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return with_file_context(path, [&] { return merge_table_from_json(read_json(path)); });
}

std::vector<TokenSequence> undo_all(const std::vector<TokenSequence>& seqs, const std::optional<MergeTable>& merges) {
  if (!merges) return seqs;
  std::vector<TokenSequence> out;
  for (const auto& s : seqs) out.push_back(undo_bpe(s, *merges));
  return out;
}

void copy_config(const fs::path& from_dir, const fs::path& to_dir, Manifest& m) {
  if (fs::is_directory(from_dir) && fs::exists(from_dir / kConfigFile)) {
    write_text(to_dir / kConfigFile, read_text(from_dir / kConfigFile));
    m.output(to_dir / kConfigFile);
  }
}

// ---------------------------------------------------------------------------

struct Common {
  unsigned jobs = 0;
};

struct TokenizeArgs {
  std::string input, out, scheme, config;
  bool skip_invalid = false;
};

void run_tokenize(const TokenizeArgs& a, const Common& common) {
  Manifest m("tokenize");
  RunConfig cfg;
  if (!a.config.empty()) cfg = config_from_json(read_json(a.config));
  if (!a.scheme.empty()) {
    try {
      cfg.scheme = Scheme::parse(a.scheme);
    } catch (const PreconditionError& e) {
      throw UsageError(e.what());
    }
  }
  const Tokenizer tok(cfg.scheme, cfg.preprocess);
  const auto files = discover_midi(a.input);
  if (files.empty()) throw DataError("no MIDI files under " + a.input);
  m.config() = cfg.to_json();
  m.input(a.input);
  const fs::path out(a.out);
  fs::create_directories(out);
  m.lap("setup_seconds");

  struct Result {
    std::optional<std::string> error;
    std::size_t tokens = 0;
  };
  const auto results = parallel_map(files.size(), resolve_jobs(common.jobs), [&](std::size_t i) {
    Result r;
    try {
      const auto seqs = with_file_context(files[i].path, [&] {
        return tok.tokenize(preprocess(parse_smf(read_bytes(files[i].path)), cfg.preprocess));
      });
      for (const auto& s : seqs) r.tokens += s.ids.size();
      write_json(out / replace_suffix(files[i].relative, std::string(kTokenSuffix)), token_file_to_json(seqs));
    } catch (const DataError& e) {
      if (!a.skip_invalid) throw;
      r.error = e.what();
    }
    return r;
  });
  m.lap("tokenize_seconds");

  Json skipped = Json::array();
  std::size_t written = 0, tokens = 0;
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (results[i].error) {
      skipped.push_back({{"file", files[i].relative}, {"error", *results[i].error}});
      continue;
    }
    ++written;
    tokens += results[i].tokens;
    m.output(out / replace_suffix(files[i].relative, std::string(kTokenSuffix)));
  }
  write_json(out / kConfigFile, cfg.to_json());
  write_json(out / "vocab.json", to_json(tok.vocabulary()));
  m.output(out / kConfigFile);
  m.output(out / "vocab.json");
  m.summary() = {{"files", written}, {"skipped", skipped}, {"tokens", tokens},
                 {"vocab_size", tok.vocabulary().size()}};
  m.write(manifest_path_for(out, true));
}

struct DetokenizeArgs {
  std::string input, out, config, vocab, merges;
  int ticks_per_beat = 480;
};

void run_detokenize(const DetokenizeArgs& a, const Common& common) {
  Manifest m("detokenize");
  const unsigned jobs = resolve_jobs(common.jobs);
  const TokenCorpus corpus = load_tokens(a.input, jobs);
  const RunConfig cfg = resolve_config(a.config, a.input, corpus.scheme);
  const Tokenizer tok(cfg.scheme, cfg.preprocess);
  if (!a.vocab.empty() && vocabulary_from_json(read_json(a.vocab)) != tok.vocabulary()) {
    throw DataError(a.vocab + ": vocabulary does not match scheme " + cfg.scheme.name() + " and the configuration");
  }
  if (a.ticks_per_beat <= 0 || a.ticks_per_beat % cfg.preprocess.resolution() != 0) {
    throw UsageError("--ticks-per-beat must be a positive multiple of " + std::to_string(cfg.preprocess.resolution()));
  }
  const auto merges = load_merges(a.merges);
  m.config() = cfg.to_json();
  m.config()["ticks_per_beat"] = a.ticks_per_beat;
  m.input(a.input);
  const fs::path out(a.out);
  fs::create_directories(out);
  m.lap("setup_seconds");

  const auto reports = parallel_map(corpus.files.size(), jobs, [&](std::size_t i) {
    const auto& f = corpus.files[i];
    return with_file_context(f.path, [&] {
      const auto result = tok.detokenize(undo_all(corpus.sequences[i], merges), a.ticks_per_beat);
      write_bytes(out / replace_suffix(f.relative, ".mid"), write_smf(result.score));
      return result.diagnostics;
    });
  });
  m.lap("detokenize_seconds");

  Json diagnostics = Json::array();
  for (std::size_t i = 0; i < corpus.files.size(); ++i) {
    m.output(out / replace_suffix(corpus.files[i].relative, ".mid"));
    if (reports[i].total() > 0) {
      diagnostics.push_back({{"file", corpus.files[i].relative},
                             {"skipped_tokens", reports[i].skipped_tokens},
                             {"dropped_notes", reports[i].dropped_notes}});
    }
  }
  m.summary() = {{"files", corpus.files.size()}, {"diagnostics", diagnostics}};
  m.write(manifest_path_for(out, true));
}

struct BpeLearnArgs {
  std::string input, out, config;
  std::size_t vocab_size = 0;
  long base_size = -1;
};

void run_bpe_learn(const BpeLearnArgs& a, const Common& common) {
  Manifest m("bpe-learn");
  const TokenCorpus corpus = load_tokens(a.input, resolve_jobs(common.jobs));
  const RunConfig cfg = resolve_config(a.config, a.input, corpus.scheme);
  TokenId base = 0;
  if (a.base_size >= 0) {
    if (a.base_size < kSpecialCount) throw UsageError("--base-size must include the special tokens");
    base = static_cast<TokenId>(a.base_size);
  } else {
    base = static_cast<TokenId>(Tokenizer(cfg.scheme, cfg.preprocess).vocabulary().size());
  }
  if (a.vocab_size < static_cast<std::size_t>(base)) {
    throw UsageError("--vocab-size " + std::to_string(a.vocab_size) + " is below the base vocabulary size " +
                     std::to_string(base));
  }
  std::vector<std::vector<TokenId>> ids;
  for (std::size_t i = 0; i < corpus.files.size(); ++i) {
    for (const auto& s : corpus.sequences[i]) {
      for (TokenId id : s.ids) {
        if (id < 0 || id >= base) {
          throw DataError(corpus.files[i].path.string() + ": token id " + std::to_string(id) +
                          " outside the base vocabulary of size " + std::to_string(base));
        }
      }
      ids.push_back(s.ids);
    }
  }
  m.config() = cfg.to_json();
  m.config()["base_size"] = base;
  m.config()["vocab_size"] = a.vocab_size;
  m.input(a.input);
  m.lap("load_seconds");
  const MergeTable table = learn_bpe(std::span<const std::vector<TokenId>>(ids), base, a.vocab_size);
  m.lap("learn_seconds");
  const fs::path out(a.out);
  write_json(out, to_json(table));
  m.output(out);
  m.summary() = {{"merges", table.merges().size()},
                 {"achieved_vocab_size", table.vocab_size()},
                 {"requested_vocab_size", a.vocab_size}};
  if (table.vocab_size() < a.vocab_size) {
    std::cerr << "note: no pair occurs twice after " << table.merges().size() << " merges; vocabulary stops at "
              << table.vocab_size() << "\n";
  }
  m.write(manifest_path_for(out, false));
}

struct BpeCodecArgs {
  std::string input, out, merges;
};

void run_bpe_codec(const BpeCodecArgs& a, const Common& common, bool apply) {
  Manifest m(apply ? "bpe-apply" : "bpe-undo");
  const unsigned jobs = resolve_jobs(common.jobs);
  const TokenCorpus corpus = load_tokens(a.input, jobs);
  const MergeTable table = *load_merges(a.merges);
  m.config() = {{"merges", a.merges}, {"base_size", table.base_size()}, {"vocab_size", table.vocab_size()}};
  m.input(a.input);
  m.input(a.merges);
  const fs::path out(a.out);
  fs::create_directories(out);
  m.lap("load_seconds");
  const auto counts = parallel_map(corpus.files.size(), jobs, [&](std::size_t i) {
    const auto& f = corpus.files[i];
    return with_file_context(f.path, [&] {
      std::vector<TokenSequence> seqs;
      std::pair<std::size_t, std::size_t> n{0, 0};
      for (const auto& s : corpus.sequences[i]) {
        seqs.push_back(apply ? apply_bpe(s, table) : undo_bpe(s, table));
        n.first += s.ids.size();
        n.second += seqs.back().ids.size();
      }
      write_json(out / f.relative, token_file_to_json(seqs));
      return n;
    });
  });
  m.lap(apply ? "apply_seconds" : "undo_seconds");
  std::size_t before = 0, after = 0;
  for (std::size_t i = 0; i < corpus.files.size(); ++i) {
    m.output(out / corpus.files[i].relative);
    before += counts[i].first;
    after += counts[i].second;
  }
  copy_config(a.input, out, m);
  m.summary() = {{"files", corpus.files.size()}, {"tokens_in", before}, {"tokens_out", after}};
  m.write(manifest_path_for(out, true));
}

struct StatsArgs {
  std::string input, out, config, merges;
  std::size_t timing_reps = 3;
};

void run_stats(const StatsArgs& a, const Common& common) {
  Manifest m("stats");
  const unsigned jobs = resolve_jobs(common.jobs);
  const TokenCorpus corpus = load_tokens(a.input, jobs);
  const RunConfig cfg = resolve_config(a.config, a.input, corpus.scheme);
  const Tokenizer tok(cfg.scheme, cfg.preprocess);
  const auto merges = load_merges(a.merges);
  const Vocabulary vocab = merges ? extend_vocabulary(tok.vocabulary(), *merges) : tok.vocabulary();
  m.config() = cfg.to_json();
  m.config()["merges"] = a.merges.empty() ? Json(nullptr) : Json(a.merges);
  m.input(a.input);
  m.lap("load_seconds");

  struct PerFile {
    FileTokenCount count;
    Score score;
    TSEReport tse;
  };
  const auto per_file = parallel_map(corpus.files.size(), jobs, [&](std::size_t i) {
    return with_file_context(corpus.files[i].path, [&] {
      PerFile r;
      r.tse = make_tse_report(tok.scheme());
      const auto base = undo_all(corpus.sequences[i], merges);
      for (const auto& s : corpus.sequences[i]) r.count.tokens += s.content_size();
      for (const auto& s : base) r.tse += tse(s, tok);
      r.score = tok.detokenize(base).score;
      r.count.beats = beats_spanned(r.score);
      return r;
    });
  });
  m.lap("analyze_seconds");

  std::vector<FileTokenCount> counts;
  std::vector<TokenSequence> all;
  std::vector<Score> scores;
  TSEReport pooled = make_tse_report(tok.scheme());
  std::size_t tokens = 0;
  for (std::size_t i = 0; i < per_file.size(); ++i) {
    counts.push_back(per_file[i].count);
    scores.push_back(per_file[i].score);
    pooled += per_file[i].tse;
    tokens += per_file[i].count.tokens;
    all.insert(all.end(), corpus.sequences[i].begin(), corpus.sequences[i].end());
  }
  Json report{{"scheme", tok.scheme().name()},
              {"files", corpus.files.size()},
              {"tokens", tokens},
              {"vocab_size", vocab.size()},
              {"tokens_per_beat", tokens_per_beat(std::span<const FileTokenCount>(counts))},
              {"coverage", vocab_coverage(std::span<const TokenSequence>(all), vocab.size())},
              {"tse", to_json(pooled)}};
  if (merges) {
    report["bpe"] = to_json(merge_stats(*merges, &tok.vocabulary()));
    Json curve = Json::array();
    for (const auto& p : merge_length_curve(*merges, 100)) {
      curve.push_back({{"vocab_size", p.vocab_size}, {"average_length", p.average_length}, {"max_length", p.max_length}});
    }
    report["bpe"]["curve"] = curve;
  }
  if (a.timing_reps > 0) {
    const TimingProfile t =
        timing_profile(std::span<const Score>(scores), tok, merges ? &*merges : nullptr, a.timing_reps);
    report["timing"] = {{"tokenize_seconds_per_file", t.tokenize_seconds_per_file},
                        {"detokenize_seconds_per_file", t.detokenize_seconds_per_file},
                        {"repetitions", t.repetitions},
                        {"deterministic", t.deterministic}};
    m.lap("timing_profile_seconds");
  }
  const fs::path out(a.out);
  write_json(out, report);
  m.output(out);
  m.write(manifest_path_for(out, false));
}

struct TseArgs {
  std::string input, out, scheme, config, merges;
  std::size_t prompt_offset = 0;
  double max_note_beats = 16.0;
};

void run_tse(const TseArgs& a, const Common& common) {
  Manifest m("tse");
  const unsigned jobs = resolve_jobs(common.jobs);
  const TokenCorpus corpus = load_tokens(a.input, jobs);
  if (!a.scheme.empty()) {
    Scheme expected;
    try {
      expected = Scheme::parse(a.scheme);
    } catch (const PreconditionError& e) {
      throw UsageError(e.what());
    }
    if (!(expected == corpus.scheme)) {
      throw DataError("token files use scheme " + corpus.scheme.name() + ", not " + expected.name());
    }
  }
  if (!(a.max_note_beats > 0.0)) throw UsageError("--max-note-beats must be positive");
  const RunConfig cfg = resolve_config(a.config, a.input, corpus.scheme);
  const Tokenizer tok(cfg.scheme, cfg.preprocess);
  const auto merges = load_merges(a.merges);
  const TseOptions options{a.prompt_offset, a.max_note_beats};
  m.config() = cfg.to_json();
  m.config()["prompt_offset"] = a.prompt_offset;
  m.config()["max_note_beats"] = a.max_note_beats;
  m.input(a.input);
  m.lap("load_seconds");

  const auto reports = parallel_map(corpus.files.size(), jobs, [&](std::size_t i) {
    return with_file_context(corpus.files[i].path, [&] {
      TSEReport r = make_tse_report(tok.scheme());
      for (const auto& s : undo_all(corpus.sequences[i], merges)) r += tse(s, tok, options);
      return r;
    });
  });
  m.lap("tse_seconds");
  Json files = Json::array();
  TSEReport pooled = make_tse_report(tok.scheme());
  for (std::size_t i = 0; i < reports.size(); ++i) {
    files.push_back({{"file", corpus.files[i].relative}, {"tse", to_json(reports[i])}});
    pooled += reports[i];
  }
  const fs::path out(a.out);
  write_json(out, Json{{"scheme", tok.scheme().name()}, {"aggregate", to_json(pooled)}, {"files", files}});
  m.output(out);
  m.write(manifest_path_for(out, false));
}

struct GeometryArgs {
  std::string input, out, csv;
  double threshold = 0.05;
};

void run_embed_geometry(const GeometryArgs& a, const Common&) {
  Manifest m("embed-geometry");
  if (!(a.threshold > 0.0 && a.threshold <= 1.0)) throw UsageError("--threshold must lie in (0, 1]");
  m.config() = {{"threshold", a.threshold}};
  m.input(a.input);
  const EmbeddingMatrix emb = with_file_context(a.input, [&] { return load_embeddings(read_bytes(a.input)); });
  m.lap("load_seconds");
  const Eigen::MatrixXd x = emb.to_eigen();
  const auto spectrum = with_file_context(a.input, [&] { return singular_spectrum(x); });
  const double iso = with_file_context(a.input, [&] { return isoscore(x); });
  const int id = with_file_context(a.input, [&] { return pca_intrinsic_dim(x, a.threshold); });
  m.lap("analyze_seconds");
  const fs::path out(a.out);
  write_json(out, Json{{"rows", emb.rows()}, {"cols", emb.cols()}, {"isoscore", iso}, {"pca_id", id},
                       {"spectrum", spectrum}});
  m.output(out);
  if (!a.csv.empty()) {
    std::string csv = "index,normalized_singular_value\n";
    for (std::size_t i = 0; i < spectrum.size(); ++i) csv += std::to_string(i) + "," + Json(spectrum[i]).dump() + "\n";
    write_text(a.csv, csv);
    m.output(a.csv);
  }
  m.summary() = {{"isoscore", iso}, {"pca_id", id}};
  m.write(manifest_path_for(out, false));
}

struct DedupArgs {
  std::string input, out;
};

void run_dedup(const DedupArgs& a, const Common&) {
  Manifest m("dedup");
  m.input(a.input);
  const MatchGraph g = with_file_context(a.input, [&] { return parse_edge_list(read_text(a.input)); });
  m.lap("load_seconds");
  const auto pairs = max_weight_matching(g);
  m.lap("matching_seconds");
  std::map<std::pair<std::size_t, std::size_t>, double> weight;
  for (const auto& e : g.edges()) weight[{e.left, e.right}] = e.weight;
  std::string tsv;
  for (const auto& p : pairs) tsv += g.left_id(p.first) + "\t" + g.right_id(p.second) + "\t" + Json(weight.at(p)).dump() + "\n";
  const fs::path out(a.out);
  write_text(out, tsv);
  m.output(out);
  m.summary() = {{"left_nodes", g.left_count()},
                 {"right_nodes", g.right_count()},
                 {"edges", g.edges().size()},
                 {"pairs", pairs.size()},
                 {"total_weight", matching_weight(g, pairs)}};
  m.write(manifest_path_for(out, false));
}

struct SplitArgs {
  std::string input, out;
  double valid = 0.10, test = 0.15;
  std::uint64_t seed = 0;
};

void run_split(const SplitArgs& a, const Common&) {
  Manifest m("split");
  m.input(a.input);
  m.config() = {{"valid", a.valid}, {"test", a.test}, {"seed", a.seed}};
  std::vector<std::string> ids;
  std::istringstream in(read_text(a.input));
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) ids.push_back(line);
  }
  CorpusSplit split;
  try {
    split = split_corpus(ids, SplitSpec{a.valid, a.test, a.seed});
  } catch (const PreconditionError& e) {
    throw UsageError(e.what());
  }
  m.lap("split_seconds");
  const fs::path out(a.out);
  write_json(out, to_json(split, a.seed));
  m.output(out);
  m.summary() = {{"train", split.train.size()}, {"valid", split.valid.size()}, {"test", split.test.size()}};
  m.write(manifest_path_for(out, false));
}

struct FilterArgs {
  std::string input, out;
  int numerator = 4;
  std::size_t min_tracks = 3;
};

void run_filter(const FilterArgs& a, const Common& common) {
  Manifest m("filter");
  const FilterConfig cfg{a.numerator, a.min_tracks};
  m.config() = {{"time_signature_numerator", a.numerator}, {"min_tracks", a.min_tracks}};
  m.input(a.input);
  const auto files = discover_midi(a.input);
  const auto verdicts = parallel_map(files.size(), resolve_jobs(common.jobs), [&](std::size_t i) {
    return check_file(CorpusFile{files[i].relative, read_bytes(files[i].path)}, cfg);
  });
  m.lap("filter_seconds");
  Json accepted = Json::array(), rejected = Json::array();
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (!verdicts[i]) {
      accepted.push_back(files[i].relative);
    } else {
      rejected.push_back({{"file", verdicts[i]->name},
                          {"reason", std::string(to_string(verdicts[i]->reason))},
                          {"detail", verdicts[i]->detail}});
    }
  }
  const fs::path out(a.out);
  write_json(out, Json{{"accepted", accepted}, {"rejected", rejected}});
  m.output(out);
  m.summary() = {{"accepted", accepted.size()}, {"rejected", rejected.size()}};
  m.write(manifest_path_for(out, false));
}

int run(int argc, char** argv) {
  CLI::App app{"Symbolic music tokenization, BPE and corpus analysis"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  Common common;
  app.add_option("-j,--jobs", common.jobs, "Worker threads (default: MIDIBPE_JOBS or hardware threads)")
      ->check(CLI::PositiveNumber);

  std::function<void()> action;
  auto existing = CLI::ExistingPath;

  TokenizeArgs tk;
  auto* c = app.add_subcommand("tokenize", "MIDI files to token files");
  c->add_option("input", tk.input, "MIDI file or directory")->required()->check(existing);
  c->add_option("--scheme", tk.scheme, "Tokenization scheme, e.g. REMI, TSD, MIDILike, PVm-TSD, REMI+Program");
  c->add_option("--config", tk.config, "JSON with scheme and preprocessing fields")->check(CLI::ExistingFile);
  c->add_option("-o,--out", tk.out, "Output directory")->required();
  c->add_flag("--skip-invalid", tk.skip_invalid, "Record unreadable files in the manifest instead of failing");
  c->callback([&] { action = [&] { run_tokenize(tk, common); }; });

  DetokenizeArgs dt;
  c = app.add_subcommand("detokenize", "Token files to MIDI files");
  c->add_option("input", dt.input, "Token file or directory")->required()->check(existing);
  c->add_option("--config", dt.config, "Configuration (default: config.json in the input directory)")
      ->check(CLI::ExistingFile);
  c->add_option("--vocab", dt.vocab, "Vocabulary JSON to check the token ids against")->check(CLI::ExistingFile);
  c->add_option("--merges", dt.merges, "Merge table, when the tokens are BPE-encoded")->check(CLI::ExistingFile);
  c->add_option("--ticks-per-beat", dt.ticks_per_beat, "Output resolution")->capture_default_str();
  c->add_option("-o,--out", dt.out, "Output directory")->required();
  c->callback([&] { action = [&] { run_detokenize(dt, common); }; });

  BpeLearnArgs bl;
  c = app.add_subcommand("bpe-learn", "Learn a merge table from token files");
  c->add_option("input", bl.input, "Token file or directory")->required()->check(existing);
  c->add_option("--vocab-size", bl.vocab_size, "Target vocabulary size including the base vocabulary")->required();
  c->add_option("--base-size", bl.base_size, "Override the base vocabulary size (default: from the scheme)");
  c->add_option("--config", bl.config, "Configuration (default: config.json in the input directory)")
      ->check(CLI::ExistingFile);
  c->add_option("-o,--out", bl.out, "Merge table JSON")->required();
  c->callback([&] { action = [&] { run_bpe_learn(bl, common); }; });

  BpeCodecArgs ba;
  c = app.add_subcommand("bpe-apply", "Encode token files with a merge table");
  c->add_option("input", ba.input, "Token file or directory")->required()->check(existing);
  c->add_option("--merges", ba.merges, "Merge table JSON")->required()->check(CLI::ExistingFile);
  c->add_option("-o,--out", ba.out, "Output directory")->required();
  c->callback([&] { action = [&] { run_bpe_codec(ba, common, true); }; });

  BpeCodecArgs bu;
  c = app.add_subcommand("bpe-undo", "Expand BPE tokens back to base tokens");
  c->add_option("input", bu.input, "Token file or directory")->required()->check(existing);
  c->add_option("--merges", bu.merges, "Merge table JSON")->required()->check(CLI::ExistingFile);
  c->add_option("-o,--out", bu.out, "Output directory")->required();
  c->callback([&] { action = [&] { run_bpe_codec(bu, common, false); }; });

  StatsArgs st;
  c = app.add_subcommand("stats", "Tokens per beat, coverage, TSE, merge statistics and timing");
  c->add_option("input", st.input, "Token file or directory")->required()->check(existing);
  c->add_option("--merges", st.merges, "Merge table, when the tokens are BPE-encoded")->check(CLI::ExistingFile);
  c->add_option("--config", st.config, "Configuration (default: config.json in the input directory)")
      ->check(CLI::ExistingFile);
  c->add_option("--timing-reps", st.timing_reps, "Timing repetitions; 0 skips timing")->capture_default_str();
  c->add_option("-o,--out", st.out, "Report JSON")->required();
  c->callback([&] { action = [&] { run_stats(st, common); }; });

  TseArgs ts;
  c = app.add_subcommand("tse", "Token syntax errors per file and pooled");
  c->add_option("input", ts.input, "Token file or directory")->required()->check(existing);
  c->add_option("--scheme", ts.scheme, "Expected scheme of the token files");
  c->add_option("--prompt-offset", ts.prompt_offset, "Leading tokens excluded from evaluation")->capture_default_str();
  c->add_option("--max-note-beats", ts.max_note_beats, "Longest note before nnof is counted")->capture_default_str();
  c->add_option("--merges", ts.merges, "Merge table, when the tokens are BPE-encoded")->check(CLI::ExistingFile);
  c->add_option("--config", ts.config, "Configuration (default: config.json in the input directory)")
      ->check(CLI::ExistingFile);
  c->add_option("-o,--out", ts.out, "Report JSON")->required();
  c->callback([&] { action = [&] { run_tse(ts, common); }; });

  GeometryArgs eg;
  c = app.add_subcommand("embed-geometry", "IsoScore, PCA intrinsic dimension and spectrum of an EMB1 file");
  c->add_option("input", eg.input, "EMB1 embedding matrix")->required()->check(CLI::ExistingFile);
  c->add_option("--threshold", eg.threshold, "Eigenvalue ratio for the intrinsic dimension")->capture_default_str();
  c->add_option("--csv", eg.csv, "Also write the spectrum as CSV");
  c->add_option("-o,--out", eg.out, "Report JSON")->required();
  c->callback([&] { action = [&] { run_embed_geometry(eg, common); }; });

  DedupArgs dd;
  c = app.add_subcommand("dedup", "Maximum-weight matching of a TSV edge list");
  c->add_option("input", dd.input, "Lines of left<TAB>right<TAB>weight")->required()->check(CLI::ExistingFile);
  c->add_option("-o,--out", dd.out, "Matched pairs TSV")->required();
  c->callback([&] { action = [&] { run_dedup(dd, common); }; });

  SplitArgs sp;
  c = app.add_subcommand("split", "Seeded train/valid/test split of a file list");
  c->add_option("input", sp.input, "One id per line")->required()->check(CLI::ExistingFile);
  c->add_option("--valid", sp.valid, "Validation fraction")->capture_default_str();
  c->add_option("--test", sp.test, "Test fraction")->capture_default_str();
  c->add_option("--seed", sp.seed, "Shuffle seed")->capture_default_str();
  c->add_option("-o,--out", sp.out, "Split JSON")->required();
  c->callback([&] { action = [&] { run_split(sp, common); }; });

  FilterArgs fl;
  c = app.add_subcommand("filter", "Reject corrupt files, other time signatures and files with too few tracks");
  c->add_option("input", fl.input, "MIDI file or directory")->required()->check(existing);
  c->add_option("--time-signature", fl.numerator, "Required numerator; 0 accepts any")->capture_default_str();
  c->add_option("--min-tracks", fl.min_tracks, "Minimum non-empty tracks")->capture_default_str();
  c->add_option("-o,--out", fl.out, "Report JSON")->required();
  c->callback([&] { action = [&] { run_filter(fl, common); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  try {
    action();
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace
}  // namespace midibpe::cli

int main(int argc, char** argv) { return midibpe::cli::run(argc, argv); }
