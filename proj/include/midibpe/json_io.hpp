// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The midibpe Authors

// JSON documents for configs, token sequences, vocabularies, merge tables
// and reports.

#pragma once

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

#include "midibpe/bpe.hpp"
#include "midibpe/corpus.hpp"
#include "midibpe/error.hpp"
#include "midibpe/metrics.hpp"
#include "midibpe/score.hpp"
#include "midibpe/tokenizer.hpp"
#include "midibpe/vocabulary.hpp"

namespace midibpe {

using Json = nlohmann::json;

// -- PreprocessConfig -------------------------------------------------------

inline Json to_json(const PreprocessConfig& c) {
  Json grid = Json::array();
  for (const auto& seg : c.duration_grid) grid.push_back({seg.max_beats, seg.samples_per_beat});
  return Json{{"velocity_bin_count", c.velocity_bin_count},
              {"duration_grid", grid},
              {"positions_per_bar", c.positions_per_bar},
              {"pitch_min", c.pitch_min},
              {"pitch_max", c.pitch_max},
              {"merge_programs", c.merge_programs}};
}

// Missing fields keep their defaults.
inline PreprocessConfig preprocess_config_from_json(const Json& j) {
  PreprocessConfig c;
  try {
    c.velocity_bin_count = j.value("velocity_bin_count", c.velocity_bin_count);
    c.positions_per_bar = j.value("positions_per_bar", c.positions_per_bar);
    c.pitch_min = j.value("pitch_min", c.pitch_min);
    c.pitch_max = j.value("pitch_max", c.pitch_max);
    c.merge_programs = j.value("merge_programs", c.merge_programs);
    if (j.contains("duration_grid")) {
      c.duration_grid.clear();
      for (const auto& seg : j.at("duration_grid")) {
        c.duration_grid.push_back({seg.at(0).get<int>(), seg.at(1).get<int>()});
      }
    }
  } catch (const Json::exception& e) {
    throw DataError(std::string("invalid preprocess config: ") + e.what());
  }
  try {
    c.validate();
  } catch (const PreconditionError& e) {
    throw DataError(std::string("invalid preprocess config: ") + e.what());
  }
  return c;
}

// -- TokenSequence ------------------------------------------------------------

inline Json to_json(const TokenSequence& s) { return Json{{"scheme", s.scheme.name()}, {"ids", s.ids}}; }

inline TokenSequence token_sequence_from_json(const Json& j) {
  try {
    return TokenSequence{Scheme::parse(j.at("scheme").get<std::string>()), j.at("ids").get<std::vector<TokenId>>()};
  } catch (const Json::exception& e) {
    throw DataError(std::string("invalid token sequence document: ") + e.what());
  }
}

// A token file holds one sequence object or an array of them (one per track).
inline Json token_file_to_json(const std::vector<TokenSequence>& seqs) {
  if (seqs.size() == 1) return to_json(seqs.front());
  Json arr = Json::array();
  for (const auto& s : seqs) arr.push_back(to_json(s));
  return arr;
}

inline std::vector<TokenSequence> token_file_from_json(const Json& j) {
  std::vector<TokenSequence> out;
  if (j.is_array()) {
    for (const auto& e : j) out.push_back(token_sequence_from_json(e));
  } else {
    out.push_back(token_sequence_from_json(j));
  }
  return out;
}

// -- Vocabulary -----------------------------------------------------------------

inline Json to_json(const Vocabulary& v) {
  Json arr = Json::array();
  for (const auto& t : v.entries()) {
    Json value;
    switch (t.type) {
      case TokenType::Pad:
      case TokenType::Bos:
      case TokenType::Eos:
      case TokenType::Mask:
      case TokenType::Sep:
      case TokenType::Bar:
        value = nullptr;
        break;
      case TokenType::Merged:
        value = Json::array();
        for (const auto& p : t.parts) value.push_back({std::string(to_string(p.type)), p.value});
        break;
      case TokenType::BPE:
        value = t.expansion;
        break;
      default:
        value = t.value;
        break;
    }
    arr.push_back(Json{{"id", t.id}, {"text", t.text}, {"type", std::string(to_string(t.type))}, {"value", value}});
  }
  return arr;
}

inline Vocabulary vocabulary_from_json(const Json& j) {
  Vocabulary v;
  try {
    if (!j.is_array() || j.size() < static_cast<std::size_t>(kSpecialCount)) {
      throw DataError("vocabulary document must be an array starting with the special tokens");
    }
    for (std::size_t i = 0; i < j.size(); ++i) {
      const auto& e = j[i];
      if (e.at("id").get<std::size_t>() != i) throw DataError("vocabulary ids must be dense and ordered");
      const auto type = token_type_from_string(e.at("type").get<std::string>());
      if (!type) throw DataError("unknown token type " + e.at("type").get<std::string>());
      const std::string text = e.at("text").get<std::string>();
      if (i < static_cast<std::size_t>(kSpecialCount)) {
        if (v[static_cast<TokenId>(i)].text != text) throw DataError("special token " + text + " at wrong id");
        continue;
      }
      const Json& value = e.at("value");
      if (*type == TokenType::Merged) {
        std::vector<TokenPart> parts;
        for (const auto& p : value) {
          parts.push_back({*token_type_from_string(p.at(0).get<std::string>()), p.at(1).get<int>()});
        }
        v.add(*type, 0, text, std::move(parts));
      } else if (*type == TokenType::BPE) {
        v.add(*type, 0, text, {}, value.get<std::vector<TokenId>>());
      } else {
        v.add(*type, value.is_null() ? 0 : value.get<int>(), text);
      }
    }
  } catch (const Json::exception& e) {
    throw DataError(std::string("invalid vocabulary document: ") + e.what());
  } catch (const PreconditionError& e) {
    throw DataError(std::string("invalid vocabulary document: ") + e.what());
  }
  return v;
}

// -- MergeTable -------------------------------------------------------------------

inline Json to_json(const MergeTable& t) {
  Json merges = Json::array();
  for (const auto& [l, r] : t.merges()) merges.push_back({l, r});
  return Json{{"base_size", t.base_size()}, {"merges", merges}};
}

inline MergeTable merge_table_from_json(const Json& j) {
  try {
    std::vector<TokenPair> merges;
    for (const auto& m : j.at("merges")) merges.emplace_back(m.at(0).get<TokenId>(), m.at(1).get<TokenId>());
    return MergeTable(j.at("base_size").get<TokenId>(), std::move(merges));
  } catch (const Json::exception& e) {
    throw DataError(std::string("invalid merge table document: ") + e.what());
  } catch (const PreconditionError& e) {
    throw DataError(std::string("invalid merge table document: ") + e.what());
  }
}

// -- Reports ----------------------------------------------------------------------

// Not-applicable categories are written as "n/a".
inline Json to_json(const TSEReport& r) {
  Json j{{"denominator", r.denominator}};
  for (TseCategory c : kTseCategories) {
    const std::string key(to_string(c));
    if (r.applicable(c)) {
      j[key] = Json{{"count", r.count(c)}, {"ratio", r.ratio(c)}};
    } else {
      j[key] = "n/a";
    }
  }
  return j;
}

inline Json to_json(const BpeStats& s) {
  Json lengths = Json::array();
  for (const auto& t : s.tokens) lengths.push_back(t.length);
  return Json{{"average_length", s.average_length},
              {"max_length", s.max_length},
              {"lengths", lengths},
              {"composition", s.composition_histogram}};
}

inline Json to_json(const CorpusSplit& s, std::uint64_t seed) {
  return Json{{"train", s.train}, {"valid", s.valid}, {"test", s.test}, {"seed", seed}};
}

}  // namespace midibpe
