/*
 * Copyright 2026 The ChunkShapley Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Repository hygiene: per-file filters, SimHash near-duplicate estimation,
// sampled syntax validation and the repository-level verdict.

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "json.hpp"

#include "chunkshapley/errors.hpp"
#include "chunkshapley/parallel.hpp"
#include "chunkshapley/text.hpp"

namespace chunkshapley {

struct SourceFile {
  std::string path;  // repo-relative, '/'-separated
  std::string text;  // sanitized UTF-8
  std::size_t nonempty_lines = 0;
  std::size_t max_line_len = 0;  // code points, trailing whitespace trimmed
  double avg_line_len = 0.0;     // over non-empty lines
  double alnum_density = 0.0;    // ASCII letters/digits over all code points

  // Decodes permissively and derives every statistic from the text.
  static SourceFile from_bytes(std::string path, std::string_view bytes) {
    SourceFile f;
    f.path = std::move(path);
    const std::u32string cps = text::decode_utf8(bytes);
    f.text = text::encode_utf8(cps);

    std::size_t alnum = 0;
    for (char32_t c : cps) alnum += text::is_ascii_alnum(c);
    f.alnum_density =
        cps.empty() ? 0.0 : static_cast<double>(alnum) / static_cast<double>(cps.size());

    std::size_t total_len = 0;
    for (std::string_view line : text::split_lines(f.text)) {
      const std::string_view trimmed = text::rstrip(line);
      const std::size_t len = text::decode_utf8(trimmed).size();
      f.max_line_len = std::max(f.max_line_len, len);
      if (!text::strip(trimmed).empty()) {
        ++f.nonempty_lines;
        total_len += len;
      }
    }
    f.avg_line_len = f.nonempty_lines == 0
                         ? 0.0
                         : static_cast<double>(total_len) /
                               static_cast<double>(f.nonempty_lines);
    return f;
  }
};

enum class FileReason {
  kNotPython,
  kExcludedDir,
  kTooFewLines,
  kMaxLine,
  kAvgLine,
  kAlnumDensity,
  kIo,
};

inline std::string_view reason_code(FileReason r) {
  switch (r) {
    case FileReason::kNotPython: return "not-python";
    case FileReason::kExcludedDir: return "excluded-dir";
    case FileReason::kTooFewLines: return "too-few-lines";
    case FileReason::kMaxLine: return "max-line";
    case FileReason::kAvgLine: return "avg-line";
    case FileReason::kAlnumDensity: return "alnum-density";
    case FileReason::kIo: return "io";
  }
  return "";
}

enum class RepoReason {
  kNoFiles,
  kTooFewFiles,
  kLocRange,
  kDupRatio,
  kParseRate,
};

inline std::string_view reason_code(RepoReason r) {
  switch (r) {
    case RepoReason::kNoFiles: return "no-files";
    case RepoReason::kTooFewFiles: return "too-few-files";
    case RepoReason::kLocRange: return "loc-range";
    case RepoReason::kDupRatio: return "dup-ratio";
    case RepoReason::kParseRate: return "parse-rate";
  }
  return "";
}

struct FilterConfig {
  std::string extension = ".py";
  std::size_t min_nonempty_lines = 10;
  std::size_t max_line_len = 300;
  double max_avg_line_len = 120.0;
  double min_alnum_density = 0.35;
  std::vector<std::string> excluded_dirs = {
      "vendor", "third_party", "site-packages", "dist", "build", ".venv",
      "migrations"};
  std::size_t min_files = 8;
  std::size_t min_loc = 300;
  std::size_t max_loc = 50'000;
  double max_dup_ratio = 0.3;
  std::size_t max_files_for_dup_check = 200;
  int simhash_hamming_threshold = 3;
  std::size_t syntax_sample_k = 20;
  double min_parse_rate = 0.7;
  std::uint64_t seed = 13;
};

inline nlohmann::json to_json(const FilterConfig& c) {
  return {
      {"extension", c.extension},
      {"min_nonempty_lines", c.min_nonempty_lines},
      {"max_line_len", c.max_line_len},
      {"max_avg_line_len", c.max_avg_line_len},
      {"min_alnum_density", c.min_alnum_density},
      {"excluded_dirs", c.excluded_dirs},
      {"min_files", c.min_files},
      {"min_loc", c.min_loc},
      {"max_loc", c.max_loc},
      {"max_dup_ratio", c.max_dup_ratio},
      {"max_files_for_dup_check", c.max_files_for_dup_check},
      {"simhash_hamming_threshold", c.simhash_hamming_threshold},
      {"syntax_sample_k", c.syntax_sample_k},
      {"min_parse_rate", c.min_parse_rate},
      {"seed", c.seed},
  };
}

// Applies keys present in `j` over `c`; unknown keys are rejected.
inline void apply_json(FilterConfig& c, const nlohmann::json& j) {
  const nlohmann::json known = to_json(c);
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) {
      throw InputFormatError("unknown corpus config key '" + key + "'");
    }
  }
  try {
    c.extension = j.value("extension", c.extension);
    c.min_nonempty_lines = j.value("min_nonempty_lines", c.min_nonempty_lines);
    c.max_line_len = j.value("max_line_len", c.max_line_len);
    c.max_avg_line_len = j.value("max_avg_line_len", c.max_avg_line_len);
    c.min_alnum_density = j.value("min_alnum_density", c.min_alnum_density);
    c.excluded_dirs = j.value("excluded_dirs", c.excluded_dirs);
    c.min_files = j.value("min_files", c.min_files);
    c.min_loc = j.value("min_loc", c.min_loc);
    c.max_loc = j.value("max_loc", c.max_loc);
    c.max_dup_ratio = j.value("max_dup_ratio", c.max_dup_ratio);
    c.max_files_for_dup_check =
        j.value("max_files_for_dup_check", c.max_files_for_dup_check);
    c.simhash_hamming_threshold =
        j.value("simhash_hamming_threshold", c.simhash_hamming_threshold);
    c.syntax_sample_k = j.value("syntax_sample_k", c.syntax_sample_k);
    c.min_parse_rate = j.value("min_parse_rate", c.min_parse_rate);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw InputFormatError(std::string("bad corpus config value: ") + e.what());
  }
}

inline bool in_excluded_dir(std::string_view path, const std::vector<std::string>& dirs) {
  // Every path component except the file name is a directory.
  std::size_t start = 0;
  while (true) {
    const std::size_t slash = path.find('/', start);
    if (slash == std::string_view::npos) return false;
    const std::string_view component = path.substr(start, slash - start);
    for (const std::string& d : dirs) {
      if (component == d) return true;
    }
    start = slash + 1;
  }
}

inline bool has_extension(std::string_view path, std::string_view ext) {
  return path.size() >= ext.size() && path.ends_with(ext);
}

// First failing rule, or nullopt to keep.
inline std::optional<FileReason> file_filter(const SourceFile& f,
                                             const FilterConfig& cfg = {}) {
  if (!has_extension(f.path, cfg.extension)) return FileReason::kNotPython;
  if (in_excluded_dir(f.path, cfg.excluded_dirs)) return FileReason::kExcludedDir;
  if (f.nonempty_lines < cfg.min_nonempty_lines) return FileReason::kTooFewLines;
  if (f.max_line_len > cfg.max_line_len) return FileReason::kMaxLine;
  if (f.avg_line_len > cfg.max_avg_line_len) return FileReason::kAvgLine;
  if (f.alnum_density < cfg.min_alnum_density) return FileReason::kAlnumDensity;
  return std::nullopt;
}

// Trailing whitespace removed per line, then every whitespace run collapsed
// to one space and the ends trimmed.
inline std::string simhash_normalize(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (std::string_view line : text::split_lines(raw)) {
    for (char c : text::rstrip(line)) {
      const bool ws = c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v';
      if (ws) {
        pending_space = true;
        continue;
      }
      if (pending_space && !out.empty()) out.push_back(' ');
      pending_space = false;
      out.push_back(c);
    }
    pending_space = true;  // the newline itself
  }
  return out;
}

// splitmix64 finalizer: multiply/xor-shift avalanche of a 64-bit key.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline constexpr std::size_t kSimhashShingle = 4;

// 64-bit SimHash over 4-byte shingles of the normalized text. Texts shorter
// than one shingle hash as a single padded shingle; empty text gives 0.
inline std::uint64_t simhash64(std::string_view raw) {
  const std::string norm = simhash_normalize(raw);
  if (norm.empty()) return 0;
  std::array<std::int64_t, 64> votes{};
  auto add = [&](std::string_view shingle) {
    std::uint64_t key = shingle.size();
    for (std::size_t i = 0; i < shingle.size(); ++i) {
      key |= static_cast<std::uint64_t>(static_cast<unsigned char>(shingle[i]))
             << (8 * (i + 1));
    }
    const std::uint64_t h = mix64(key);
    for (int b = 0; b < 64; ++b) votes[b] += ((h >> b) & 1u) ? 1 : -1;
  };
  if (norm.size() < kSimhashShingle) {
    add(norm);
  } else {
    for (std::size_t i = 0; i + kSimhashShingle <= norm.size(); ++i) {
      add(std::string_view(norm).substr(i, kSimhashShingle));
    }
  }
  std::uint64_t fp = 0;
  for (int b = 0; b < 64; ++b) {
    if (votes[b] > 0) fp |= (std::uint64_t{1} << b);
  }
  return fp;
}

inline int hamming(std::uint64_t a, std::uint64_t b) { return std::popcount(a ^ b); }

inline std::vector<const SourceFile*> sorted_by_path(const std::vector<SourceFile>& files) {
  std::vector<const SourceFile*> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(&f);
  std::sort(out.begin(), out.end(),
            [](const SourceFile* a, const SourceFile* b) { return a->path < b->path; });
  return out;
}

// Fraction of the first `cap` path-sorted files that have at least one
// near-duplicate partner (Hamming distance <= threshold) among them.
inline double near_dup_ratio(const std::vector<SourceFile>& files,
                             const FilterConfig& cfg = {}) {
  auto sorted = sorted_by_path(files);
  if (sorted.size() > cfg.max_files_for_dup_check) sorted.resize(cfg.max_files_for_dup_check);
  if (sorted.empty()) return 0.0;
  std::vector<std::uint64_t> fps;
  fps.reserve(sorted.size());
  for (const SourceFile* f : sorted) fps.push_back(simhash64(f->text));
  std::vector<bool> dup(sorted.size(), false);
  for (std::size_t i = 0; i < fps.size(); ++i) {
    for (std::size_t j = i + 1; j < fps.size(); ++j) {
      if (hamming(fps[i], fps[j]) <= cfg.simhash_hamming_threshold) {
        dup[i] = dup[j] = true;
      }
    }
  }
  const auto n_dup = std::count(dup.begin(), dup.end(), true);
  return static_cast<double>(n_dup) / static_cast<double>(sorted.size());
}

// Uniform integer in [0, bound) from a 64-bit engine, without relying on
// std::uniform_int_distribution (whose output is implementation-defined).
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % bound;
}

// Indices of min(k, n) items drawn uniformly without replacement (partial
// Fisher-Yates over mt19937_64 seeded with `seed`).
inline std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k,
                                                           std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  const std::size_t m = std::min(n, k);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform_below(rng, n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(m);
  return idx;
}

using SyntaxChecker = std::function<bool(const SourceFile&)>;

// Samples over the path-sorted files so the sample does not depend on input
// order. Empty input gives 0.
inline double syntax_parse_rate(const std::vector<SourceFile>& files,
                                const SyntaxChecker& checker,
                                const FilterConfig& cfg = {}) {
  const auto sorted = sorted_by_path(files);
  if (sorted.empty()) return 0.0;
  const auto picks = sample_without_replacement(sorted.size(), cfg.syntax_sample_k, cfg.seed);
  std::size_t ok = 0;
  for (std::size_t i : picks) ok += checker(*sorted[i]) ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(picks.size());
}

// Default checker: writes the file to a temporary path and runs
// `python -c ast.parse` on it. Exit 0 = valid, 1 = syntax error; anything
// else is an infrastructure failure.
inline SyntaxChecker python_ast_checker(std::string python = "python3") {
  return [python = std::move(python)](const SourceFile& f) -> bool {
    std::string tmpl = (std::filesystem::temp_directory_path() / "chunkshapley-XXXXXX").string();
    const int fd = mkstemp(tmpl.data());
    if (fd < 0) throw InfrastructureError("cannot create temporary file for syntax check");
    close(fd);
    struct Cleanup {
      std::string path;
      ~Cleanup() { std::remove(path.c_str()); }
    } cleanup{tmpl};
    {
      std::ofstream out(tmpl, std::ios::binary);
      out.write(f.text.data(), static_cast<std::streamsize>(f.text.size()));
      if (!out) throw InfrastructureError("cannot write temporary file " + tmpl);
    }
    const std::string cmd =
        python +
        " -c 'import ast,sys\n"
        "src=open(sys.argv[1],\"rb\").read().decode(\"utf-8\",\"ignore\")\n"
        "try:\n ast.parse(src)\n"
        "except (SyntaxError, ValueError):\n sys.exit(1)\n' " +
        tmpl + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    if (status == -1 || !WIFEXITED(status)) {
      throw InfrastructureError("syntax checker crashed on " + f.path);
    }
    const int code = WEXITSTATUS(status);
    if (code == 0) return true;
    if (code == 1) return false;
    throw InfrastructureError("syntax checker '" + python + "' exited with status " +
                              std::to_string(code) + " on " + f.path);
  };
}

inline std::size_t total_loc(const std::vector<SourceFile>& files) {
  std::size_t loc = 0;
  for (const auto& f : files) loc += f.nonempty_lines;
  return loc;
}

inline std::optional<RepoReason> repo_filter(const std::vector<SourceFile>& kept,
                                             double dup_ratio, double parse_rate,
                                             const FilterConfig& cfg = {}) {
  if (kept.empty()) return RepoReason::kNoFiles;
  if (kept.size() < cfg.min_files) return RepoReason::kTooFewFiles;
  const std::size_t loc = total_loc(kept);
  if (loc < cfg.min_loc || loc > cfg.max_loc) return RepoReason::kLocRange;
  if (dup_ratio > cfg.max_dup_ratio) return RepoReason::kDupRatio;
  if (parse_rate < cfg.min_parse_rate) return RepoReason::kParseRate;
  return std::nullopt;
}

struct RejectedFile {
  std::string path;
  FileReason reason;
};

struct FilterReport {
  std::vector<SourceFile> kept;
  std::vector<RejectedFile> rejected;
  std::optional<RepoReason> repo_reject;
  double dup_ratio = 0.0;
  double parse_rate = 0.0;
  FilterConfig config;

  bool repo_kept() const { return !repo_reject.has_value(); }
};

// A file that could not be read; surfaces as reject(io).
struct UnreadableFile {
  std::string path;
  std::string error;
};

struct LoadedRepo {
  std::vector<SourceFile> files;
  std::vector<UnreadableFile> unreadable;
  std::vector<std::string> skipped;  // non-matching extensions, not read
};

// Loads every regular file under `root` whose name ends with `extension`;
// other files are listed as skipped without being read.
inline LoadedRepo load_directory(const std::filesystem::path& root,
                                 const FilterConfig& cfg = {}, int jobs = 1) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) {
    throw InputFormatError("not a directory: " + root.string());
  }
  std::vector<std::pair<std::string, fs::path>> candidates;
  LoadedRepo repo;
  for (auto it = fs::recursive_directory_iterator(
           root, fs::directory_options::skip_permission_denied);
       it != fs::recursive_directory_iterator(); ++it) {
    if (!it->is_regular_file()) continue;
    const std::string rel = fs::relative(it->path(), root).generic_string();
    if (has_extension(rel, cfg.extension)) {
      candidates.emplace_back(rel, it->path());
    } else {
      repo.skipped.push_back(rel);
    }
  }
  std::sort(candidates.begin(), candidates.end());
  std::sort(repo.skipped.begin(), repo.skipped.end());

  std::vector<std::optional<SourceFile>> loaded(candidates.size());
  std::vector<std::string> errors(candidates.size());
  parallel_for(candidates.size(), jobs, [&](std::size_t i) {
    std::ifstream in(candidates[i].second, std::ios::binary);
    if (!in) {
      errors[i] = "cannot open";
      return;
    }
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) {
      errors[i] = "read error";
      return;
    }
    loaded[i] = SourceFile::from_bytes(candidates[i].first, bytes);
  });
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (loaded[i]) {
      repo.files.push_back(std::move(*loaded[i]));
    } else {
      repo.unreadable.push_back({candidates[i].first, errors[i]});
    }
  }
  return repo;
}

// Full two-level pipeline over already-loaded files.
inline FilterReport filter_repository(const LoadedRepo& repo, const SyntaxChecker& checker,
                                      const FilterConfig& cfg = {}) {
  FilterReport report;
  report.config = cfg;
  for (const std::string& p : repo.skipped) {
    report.rejected.push_back({p, FileReason::kNotPython});
  }
  for (const UnreadableFile& u : repo.unreadable) {
    report.rejected.push_back({u.path, FileReason::kIo});
  }
  for (const SourceFile& f : repo.files) {
    if (const auto reason = file_filter(f, cfg)) {
      report.rejected.push_back({f.path, *reason});
    } else {
      report.kept.push_back(f);
    }
  }
  std::sort(report.kept.begin(), report.kept.end(),
            [](const SourceFile& a, const SourceFile& b) { return a.path < b.path; });
  std::sort(report.rejected.begin(), report.rejected.end(),
            [](const RejectedFile& a, const RejectedFile& b) { return a.path < b.path; });
  report.dup_ratio = near_dup_ratio(report.kept, cfg);
  report.parse_rate = report.kept.empty() ? 0.0 : syntax_parse_rate(report.kept, checker, cfg);
  report.repo_reject = repo_filter(report.kept, report.dup_ratio, report.parse_rate, cfg);
  return report;
}

inline nlohmann::json to_json(const FilterReport& r) {
  nlohmann::json kept = nlohmann::json::array();
  for (const auto& f : r.kept) kept.push_back(f.path);
  nlohmann::json rejected = nlohmann::json::array();
  for (const auto& x : r.rejected) {
    rejected.push_back({{"path", x.path}, {"reason", std::string(reason_code(x.reason))}});
  }
  nlohmann::json verdict = {{"keep", r.repo_kept()}};
  if (r.repo_reject) verdict["reason"] = std::string(reason_code(*r.repo_reject));
  return {
      {"kept", kept},
      {"rejected", rejected},
      {"repo_verdict", verdict},
      {"dup_ratio", r.dup_ratio},
      {"parse_rate", r.parse_rate},
      {"loc", total_loc(r.kept)},
      {"config", to_json(r.config)},
  };
}

// One JSONL row per kept file: {path, loc, fingerprint}.
inline std::string manifest_jsonl(const FilterReport& r) {
  std::string out;
  for (const auto& f : r.kept) {
    const nlohmann::json row = {{"path", f.path},
                                {"loc", f.nonempty_lines},
                                {"fingerprint", text::hex64(simhash64(f.text))}};
    out += row.dump();
    out.push_back('\n');
  }
  return out;
}

}  // namespace chunkshapley
