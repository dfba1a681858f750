// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The midibpe Authors

// File discovery, job pool and run manifest shared by the CLI subcommands.

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "midibpe/error.hpp"
#include "midibpe/json_io.hpp"
#include "midibpe/version.hpp"

namespace midibpe::cli {

namespace fs = std::filesystem;

// Bad flag values; mapped to exit code 1 like CLI11 parse errors.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kTokenSuffix = ".tok.json";

inline std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string read_text(const fs::path& path) {
  const auto bytes = read_bytes(path);
  return {bytes.begin(), bytes.end()};
}

inline Json read_json(const fs::path& path) {
  try {
    return Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

inline void write_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("cannot write " + path.string());
}

inline void write_text(const fs::path& path, const std::string& text) {
  write_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

inline bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// A discovered input: absolute location plus its path relative to the root,
// which names the matching output.
struct InputFile {
  fs::path path;
  std::string relative;
};

// Regular files under root accepted by `keep`, sorted by relative path.
// A root that is itself a file yields just that file.
template <typename Pred>
std::vector<InputFile> discover(const fs::path& root, Pred keep) {
  std::vector<InputFile> out;
  if (fs::is_regular_file(root)) {
    out.push_back({root, root.filename().string()});
    return out;
  }
  if (!fs::is_directory(root)) throw DataError("no such file or directory: " + root.string());
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), root).generic_string();
    if (keep(rel)) out.push_back({e.path(), rel});
  }
  std::sort(out.begin(), out.end(), [](const InputFile& a, const InputFile& b) { return a.relative < b.relative; });
  return out;
}

inline std::vector<InputFile> discover_midi(const fs::path& root) {
  return discover(root, [](const std::string& rel) {
    std::string lower = rel;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    return ends_with(lower, ".mid") || ends_with(lower, ".midi");
  });
}

inline std::vector<InputFile> discover_tokens(const fs::path& root) {
  return discover(root, [](const std::string& rel) { return ends_with(rel, kTokenSuffix); });
}

// "a/b.mid" -> "a/b" + suffix; "a/b.tok.json" -> "a/b" + suffix.
inline std::string replace_suffix(const std::string& relative, const std::string& suffix) {
  std::string stem = relative;
  if (ends_with(stem, kTokenSuffix)) {
    stem.resize(stem.size() - kTokenSuffix.size());
  } else if (const auto dot = stem.find_last_of('.'); dot != std::string::npos && dot > stem.find_last_of('/') + 1) {
    stem.resize(dot);
  }
  return stem + suffix;
}

// --jobs, else MIDIBPE_JOBS, else the hardware thread count.
inline unsigned resolve_jobs(unsigned flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("MIDIBPE_JOBS"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1) throw UsageError("MIDIBPE_JOBS must be a positive integer, got '" + std::string(env) + "'");
    return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Results keep index
// order; if any call throws, the exception of the lowest failing index is
// rethrown after all workers stop.
template <typename F>
auto parallel_map(std::size_t n, unsigned jobs, F fn) -> std::vector<decltype(fn(std::size_t{}))> {
  using R = decltype(fn(std::size_t{}));
  std::vector<std::optional<R>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned threads = static_cast<unsigned>(std::min<std::size_t>(jobs, std::max<std::size_t>(n, 1)));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<R> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

// Prefixes library errors with the offending file. ParseError keeps its
// byte offset in the message.
template <typename F>
auto with_file_context(const fs::path& path, F fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

// One manifest per run. Everything except "timing" is deterministic for
// identical inputs.
class Manifest {
 public:
  explicit Manifest(std::string command) : start_(std::chrono::steady_clock::now()) {
    doc_["command"] = std::move(command);
    doc_["version"] = kVersion;
    doc_["inputs"] = Json::array();
    doc_["outputs"] = Json::array();
    doc_["timing"] = Json::object();
  }

  Json& config() { return doc_["config"]; }
  Json& summary() { return doc_["summary"]; }
  void input(const fs::path& p) { doc_["inputs"].push_back(p.generic_string()); }
  void output(const fs::path& p) { doc_["outputs"].push_back(p.generic_string()); }

  // Seconds since the previous lap (or construction), recorded under timing.<phase>.
  void lap(const std::string& phase) {
    const auto now = std::chrono::steady_clock::now();
    doc_["timing"][phase] = std::chrono::duration<double>(now - last_).count();
    last_ = now;
  }
  Json& timing() { return doc_["timing"]; }

  void write(const fs::path& path) {
    doc_["timing"]["total_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    write_json(path, doc_);
  }

 private:
  Json doc_;
  std::chrono::steady_clock::time_point start_;
  std::chrono::steady_clock::time_point last_ = start_;
};

// Directory outputs hold manifest.json; file outputs get "<file>.manifest.json".
inline fs::path manifest_path_for(const fs::path& out, bool out_is_directory) {
  return out_is_directory ? out / "manifest.json" : fs::path(out.string() + ".manifest.json");
}

}  // namespace midibpe::cli
