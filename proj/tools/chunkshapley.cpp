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

// chunkshapley: corpus filtering, chunk indexing, labeling, game debugging,
// metric checks and inference.
//
// Exit codes: 0 success, 2 partial failure, 3 backend, 4 input format.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "chunkshapley/chunkshapley.hpp"
#include "chunkshapley/jsonl.hpp"

namespace cs = chunkshapley;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPartial = 2;
constexpr int kExitBackend = 3;
constexpr int kExitInput = 4;

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const cs::TransportError*>(&e) ||
      dynamic_cast<const cs::BackendDataError*>(&e) ||
      dynamic_cast<const cs::CapabilityError*>(&e) ||
      dynamic_cast<const cs::InfrastructureError*>(&e)) {
    return kExitBackend;
  }
  return kExitInput;
}

struct Backend {
  std::string stub_path;
  std::string endpoint;
  int max_in_flight = 8;
  int retries = 2;
  int timeout_s = 120;

  std::unique_ptr<cs::Generator> make() const {
    if (!stub_path.empty()) {
      return std::make_unique<cs::StubGenerator>(cs::StubGenerator::from_file(stub_path));
    }
    cs::RemoteConfig rc;
    rc.endpoint = endpoint.empty() ? cs::endpoint_from_env().value_or("") : endpoint;
    rc.max_in_flight = max_in_flight;
    rc.retries = retries;
    rc.timeout = std::chrono::seconds(timeout_s);
    return std::make_unique<cs::RemoteGenerator>(rc);
  }

  void add_to(CLI::App* app) {
    app->add_option("--stub", stub_path, "Deterministic stub backend fixture (JSON)");
    app->add_option("--endpoint", endpoint,
                    std::string("Backend URL; defaults to $") + cs::kEndpointEnv);
    app->add_option("--max-in-flight", max_in_flight, "Concurrent backend requests");
    app->add_option("--retries", retries, "Retries on transport errors");
    app->add_option("--timeout", timeout_s, "Per-request timeout in seconds");
  }
};

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw cs::InputFormatError("cannot create output directory " + dir);
}

std::string join(const std::string& dir, const char* name) {
  return (fs::path(dir) / name).string();
}

std::vector<cs::Chunk> read_index(const std::string& path) {
  std::vector<cs::Chunk> pool;
  for (const json& row : cs::io::read_jsonl(path)) {
    try {
      pool.push_back(cs::chunk_from_json(row));
    } catch (const json::exception& e) {
      throw cs::InputFormatError(path + ": bad chunk row: " + e.what());
    }
  }
  return pool;
}

// ---------------------------------------------------------------------------

struct CorpusFilterCmd {
  std::string input_dir;
  std::string out_dir;
  std::string config_path;
  std::string python = "python3";
  int jobs = cs::default_jobs();

  int run() const {
    cs::FilterConfig cfg;
    if (!config_path.empty()) cs::apply_json(cfg, cs::io::read_json(config_path));
    const cs::LoadedRepo repo = cs::load_directory(input_dir, cfg, jobs);
    for (const auto& u : repo.unreadable) {
      std::cerr << "warning: unreadable " << u.path << ": " << u.error << "\n";
    }
    const cs::FilterReport report =
        cs::filter_repository(repo, cs::python_ast_checker(python), cfg);
    ensure_dir(out_dir);
    cs::io::write_file(join(out_dir, "report.json"), cs::to_json(report).dump(1) + "\n");
    cs::io::write_file(join(out_dir, "manifest.jsonl"),
                       report.repo_kept() ? cs::manifest_jsonl(report) : "");
    cs::io::write_file(join(out_dir, "config.json"), cs::to_json(cfg).dump(1) + "\n");
    std::cout << "kept " << report.kept.size() << " files, rejected " << report.rejected.size()
              << "; repo " << (report.repo_kept() ? "kept" : "rejected");
    if (report.repo_reject) std::cout << " (" << cs::reason_code(*report.repo_reject) << ")";
    std::cout << "\n";
    return repo.unreadable.empty() ? kExitOk : kExitPartial;
  }
};

struct IndexCmd {
  std::string input_dir;
  std::string out_path;
  std::string extension = ".py";
  cs::ChunkingParams chunking;
  int jobs = cs::default_jobs();

  int run() const {
    cs::validate(chunking);
    cs::FilterConfig fc;
    fc.extension = extension;
    const cs::LoadedRepo repo = cs::load_directory(input_dir, fc, jobs);
    std::vector<json> rows;
    for (const cs::SourceFile& f : repo.files) {
      for (const cs::Chunk& c : cs::chunkize(f.path, f.text, chunking)) {
        rows.push_back(cs::to_json(c));
      }
    }
    cs::io::write_file(out_path, cs::io::to_jsonl(rows));
    std::cout << "indexed " << rows.size() << " chunks from " << repo.files.size()
              << " files\n";
    return repo.unreadable.empty() ? kExitOk : kExitPartial;
  }
};

struct LabelCmd {
  std::string instances_path;
  std::string out_dir;
  std::string config_path;
  std::string index_path;
  int jobs = cs::default_jobs();
  Backend backend;

  std::optional<int> k, n_v, n_delta_prefix, top_l, max_new_tokens;
  std::optional<double> beta, epsilon, tau_es, tau_done;
  std::optional<std::string> utility, proposal;
  bool strict_em = false;

  cs::LabelConfig config() const {
    cs::LabelConfig cfg;
    if (!config_path.empty()) cs::apply_json(cfg, cs::io::read_json(config_path));
    json flags = json::object();
    if (k) flags["k"] = *k;
    if (n_v) flags["n_v"] = *n_v;
    if (n_delta_prefix) flags["n_delta_prefix"] = *n_delta_prefix;
    if (top_l) flags["top_l"] = *top_l;
    if (max_new_tokens) flags["max_new_tokens"] = *max_new_tokens;
    if (beta) flags["beta"] = *beta;
    if (epsilon) flags["epsilon"] = *epsilon;
    if (tau_es) flags["tau_es"] = *tau_es;
    if (tau_done) flags["tau_done"] = *tau_done;
    if (utility) flags["utility"] = *utility;
    if (proposal) flags["proposal"] = *proposal;
    if (strict_em) flags["strict_em"] = true;
    cs::apply_json(cfg, flags);
    try {
      cs::validate(cfg);
    } catch (const cs::ContractViolation& e) {
      throw cs::InputFormatError(e.what());
    }
    return cfg;
  }

  std::vector<cs::TaskInstance> load(const cs::LabelConfig& cfg) const {
    const auto rows = cs::io::read_jsonl(instances_path);
    std::vector<cs::Chunk> pool;
    if (!index_path.empty()) pool = read_index(index_path);
    std::vector<cs::TaskInstance> out;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      cs::TaskInstance t = cs::instance_from_json(rows[i], i + 1);
      if (t.retrieved.empty() && !pool.empty()) {
        const cs::Query q = cs::make_query(t.prefix, t.suffix, cfg.chunking.window,
                                           cfg.query_with_suffix);
        for (auto& sc : cs::retrieve_topk(q, pool, cfg.k)) t.retrieved.push_back(sc.chunk);
      }
      out.push_back(std::move(t));
    }
    return out;
  }

  int run() const {
    const cs::LabelConfig cfg = config();
    const std::vector<cs::TaskInstance> instances = load(cfg);
    std::unique_ptr<cs::Generator> gen = backend.make();
    cs::RecordingGenerator rec(*gen);
    const auto outcomes = cs::label_batch(instances, rec, cfg, jobs);

    const json echo = cs::to_json(cfg);
    std::vector<json> labels;
    std::vector<json> training{cs::training_header()};
    std::size_t labeled = 0, discarded = 0, failed = 0, need = 0, done = 0;
    std::size_t f1 = 0, f2 = 0, no_ret = 0;
    bool transport = false;
    for (const cs::LabelOutcome& o : outcomes) {
      labels.push_back(cs::to_json(o));
      switch (o.status) {
        case cs::LabelStatus::kLabeled: ++labeled; break;
        case cs::LabelStatus::kDiscarded: ++discarded; break;
        case cs::LabelStatus::kFailed:
          ++failed;
          transport = transport || o.error_kind == "transport";
          std::cerr << "error: " << o.instance_id << " failed at " << o.failed_stage << ": "
                    << o.error << "\n";
          break;
      }
      if (o.status == cs::LabelStatus::kLabeled) {
        (o.label.r_star == cs::RetrievalControl::kNeed ? need : done)++;
      }
      for (const cs::TrainingInstance& t : o.training) {
        json row = cs::to_json(t);
        row["instance_id"] = o.instance_id;
        row["config_echo"] = echo;
        training.push_back(std::move(row));
        switch (t.format) {
          case cs::Format::kF1: ++f1; break;
          case cs::Format::kF2: ++f2; break;
          case cs::Format::kNoRetrieval: ++no_ret; break;
        }
      }
    }
    const json summary = {
        {"instances", outcomes.size()},
        {"labeled", labeled},
        {"discarded", discarded},
        {"failed", failed},
        {"r_star", {{"NEED", need}, {"DONE", done}}},
        {"training_rows", {{"F1", f1}, {"F2", f2}, {"NO_RETRIEVAL", no_ret}}},
        {"generator_calls",
         {{"score", rec.count(cs::CallKind::kScore)},
          {"generate", rec.count(cs::CallKind::kGenerate)}}},
    };
    ensure_dir(out_dir);
    cs::io::write_file(join(out_dir, "labels.jsonl"), cs::io::to_jsonl(labels));
    cs::io::write_file(join(out_dir, "training.jsonl"), cs::io::to_jsonl(training));
    cs::io::write_file(join(out_dir, "summary.json"), summary.dump(1) + "\n");
    cs::io::write_file(join(out_dir, "config.json"), echo.dump(1) + "\n");
    std::cout << "labeled " << labeled << ", discarded " << discarded << ", failed " << failed
              << "\n";
    if (transport) return kExitBackend;
    return failed == 0 ? kExitOk : kExitPartial;
  }
};

struct GameCmd {
  std::string path;
  bool oracle = false;

  int run() const {
    const json j = cs::io::read_json(path);
    json out;
    try {
      if (j.contains("votes")) {
        std::vector<cs::Vote> votes;
        for (const auto& v : j.at("votes")) {
          votes.push_back({v.at("y").get<int>(),
                           v.contains("w") ? v.at("w").get<double>() : v.at("omega").get<double>()});
        }
        const cs::SurrogateGame game(j.value("beta", 1.0), votes);
        const cs::ShapleyAttribution a = cs::exact_shapley_surrogate(game);
        out = {{"phi", a.phi},
               {"efficiency_residual", a.efficiency_residual},
               {"v_grand", cs::surrogate_value(game, cs::Coalition::full(game.size()))}};
        if (oracle) {
          const cs::TabulatedGame tab(game.size(), cs::tabulate_surrogate(game));
          out["oracle_phi"] = cs::permutation_shapley_oracle(tab).phi;
        }
      } else if (j.contains("values")) {
        const auto values = j.at("values").get<std::vector<double>>();
        int k = 0;
        while ((std::size_t{1} << k) < values.size()) ++k;
        const cs::TabulatedGame tab(j.value("k", k), values);
        const cs::ShapleyAttribution a = cs::exact_shapley_tabulated(tab);
        out = {{"phi", a.phi},
               {"efficiency_residual", a.efficiency_residual},
               {"v_grand", tab.value(cs::Coalition::full(tab.size()))}};
        if (oracle) out["oracle_phi"] = cs::permutation_shapley_oracle(tab).phi;
      } else {
        throw cs::InputFormatError(path + ": expected \"votes\" or \"values\"");
      }
    } catch (const json::exception& e) {
      throw cs::InputFormatError(path + ": " + e.what());
    }
    std::cout << out.dump() << "\n";
    return kExitOk;
  }
};

struct MetricsCmd {
  std::optional<std::string> pred, ref;
  std::string pairs_path;
  bool strict_em = false;

  json row(const std::string& p, const std::string& r) const {
    return {{"es", cs::edit_similarity(p, r)},
            {"em", cs::exact_match(p, r, strict_em)},
            {"levenshtein", cs::levenshtein(p, r)}};
  }

  int run() const {
    if (!pairs_path.empty()) {
      for (const json& j : cs::io::read_jsonl(pairs_path)) {
        try {
          std::cout << row(j.at("pred").get<std::string>(), j.at("ref").get<std::string>()).dump()
                    << "\n";
        } catch (const json::exception& e) {
          throw cs::InputFormatError(pairs_path + ": " + e.what());
        }
      }
      return kExitOk;
    }
    if (!pred || !ref) throw cs::InputFormatError("metrics needs --pred and --ref, or --pairs");
    std::cout << row(*pred, *ref).dump() << "\n";
    return kExitOk;
  }
};

struct InferCmd {
  std::string request_path;
  std::string out_path;
  std::string config_path;
  std::string index_path;
  std::vector<double> t_c;
  int sweep = 0;
  bool timings = false;
  int jobs = cs::default_jobs();
  Backend backend;
  std::optional<int> k, max_new_tokens;
  bool fallback = false;

  cs::InferenceConfig config() const {
    cs::InferenceConfig cfg;
    if (!config_path.empty()) cs::apply_json(cfg, cs::io::read_json(config_path));
    if (k) cfg.k = *k;
    if (max_new_tokens) cfg.max_new_tokens = *max_new_tokens;
    if (fallback) cfg.empty_selection_fallback = true;
    try {
      cs::validate(cfg);
    } catch (const cs::ContractViolation& e) {
      throw cs::InputFormatError(e.what());
    }
    return cfg;
  }

  std::vector<double> thresholds(const cs::InferenceConfig& cfg) const {
    if (sweep > 0) {
      if (sweep == 1) return {0.0};
      std::vector<double> ts;
      for (int i = 0; i < sweep; ++i) ts.push_back(static_cast<double>(i) / (sweep - 1));
      return ts;
    }
    if (!t_c.empty()) return t_c;
    return {cfg.t_c};
  }

  struct Request {
    std::string id;
    std::string prefix, suffix;
    std::vector<cs::Chunk> pool;
  };

  std::vector<Request> load(const cs::InferenceConfig& cfg) const {
    std::vector<json> rows;
    if (fs::path(request_path).extension() == ".jsonl") {
      rows = cs::io::read_jsonl(request_path);
    } else {
      rows.push_back(cs::io::read_json(request_path));
    }
    std::vector<cs::Chunk> index;
    if (!index_path.empty()) index = read_index(index_path);
    std::vector<Request> out;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const json& j = rows[i];
      try {
        Request r;
        r.id = j.value("request_id", "request-" + std::to_string(i + 1));
        r.prefix = j.at("prefix").get<std::string>();
        r.suffix = j.value("suffix", "");
        if (j.contains("chunks")) {
          for (const auto& c : j.at("chunks")) r.pool.push_back(cs::chunk_from_json(c));
        } else if (j.contains("files")) {
          for (const auto& f : j.at("files")) {
            for (auto& c : cs::chunkize(f.at("path").get<std::string>(),
                                        f.at("text").get<std::string>(), cfg.chunking)) {
              r.pool.push_back(std::move(c));
            }
          }
        } else {
          r.pool = index;
        }
        out.push_back(std::move(r));
      } catch (const json::exception& e) {
        throw cs::InputFormatError(request_path + ": request " + std::to_string(i + 1) + ": " +
                                   e.what());
      }
    }
    return out;
  }

  int run() const {
    const cs::InferenceConfig base = config();
    const std::vector<Request> requests = load(base);
    const std::vector<double> ts = thresholds(base);
    std::unique_ptr<cs::Generator> gen = backend.make();

    struct Job {
      std::size_t request;
      double t_c;
    };
    std::vector<Job> jobs_list;
    for (std::size_t r = 0; r < requests.size(); ++r) {
      for (double t : ts) jobs_list.push_back({r, t});
    }
    std::vector<cs::InferenceTrace> traces(jobs_list.size());
    cs::parallel_for(jobs_list.size(), jobs, [&](std::size_t i) {
      cs::InferenceConfig cfg = base;
      cfg.t_c = jobs_list[i].t_c;
      const Request& r = requests[jobs_list[i].request];
      traces[i] = cs::run(*gen, r.pool, r.prefix, r.suffix, cfg);
    });

    std::vector<json> rows;
    std::size_t failed = 0;
    int backend_failures = 0;
    for (std::size_t i = 0; i < traces.size(); ++i) {
      json row = cs::to_json(traces[i], timings);
      row["request_id"] = requests[jobs_list[i].request].id;
      rows.push_back(std::move(row));
      if (!traces[i].ok()) {
        ++failed;
        try {
          traces[i].rethrow();
        } catch (const std::exception& e) {
          std::cerr << "error: " << requests[jobs_list[i].request].id << " failed at "
                    << traces[i].failed_stage << ": " << e.what() << "\n";
          if (exit_code_for(e) == kExitBackend) ++backend_failures;
        }
      }
    }
    const std::string text = cs::io::to_jsonl(rows);
    if (out_path.empty()) {
      std::cout << text;
    } else {
      cs::io::write_file(out_path, text);
    }
    if (failed == 0) return kExitOk;
    if (failed == traces.size() && backend_failures > 0) return kExitBackend;
    return kExitPartial;
  }
};

struct ServeStubCmd {
  std::string fixture;
  std::string host = "127.0.0.1";
  int port = 8080;

  int run() const {
    cs::StubGenerator stub = cs::StubGenerator::from_file(fixture);
    cs::GeneratorServer server(stub);
    const int bound = server.bind(host, port);
    if (bound < 0) throw cs::TransportError("cannot bind " + host + ":" + std::to_string(port));
    std::cout << "listening on http://" << host << ":" << bound << std::endl;
    return server.listen() ? kExitOk : kExitBackend;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coalition-aware attribution and filtering of retrieved code chunks"};
  app.require_subcommand(1);

  CorpusFilterCmd corpus;
  auto* c = app.add_subcommand("corpus-filter", "File- and repo-level corpus hygiene");
  c->add_option("input_dir", corpus.input_dir, "Repository directory")->required();
  c->add_option("--out", corpus.out_dir, "Output directory")->required();
  c->add_option("--config", corpus.config_path, "Filter config JSON");
  c->add_option("--python", corpus.python, "Python interpreter used for syntax checks");
  c->add_option("--jobs", corpus.jobs, "Worker threads");

  IndexCmd index;
  auto* x = app.add_subcommand("index", "Chunk a directory into a JSONL chunk index");
  x->add_option("input_dir", index.input_dir, "Source directory")->required();
  x->add_option("--out", index.out_path, "Output JSONL")->required();
  x->add_option("--extension", index.extension, "File extension to index");
  x->add_option("--window", index.chunking.window, "Chunk window in lines");
  x->add_option("--stride", index.chunking.stride, "Chunk stride in lines");
  x->add_option("--jobs", index.jobs, "Worker threads");

  LabelCmd label;
  auto* l = app.add_subcommand("label", "Build verified labels and training streams");
  l->add_option("instances", label.instances_path, "Instances JSONL")->required();
  l->add_option("--out", label.out_dir, "Output directory")->required();
  l->add_option("--config", label.config_path, "Label config JSON");
  l->add_option("--index", label.index_path, "Chunk index for instances without chunks");
  l->add_option("--jobs", label.jobs, "Worker threads");
  l->add_option("--k", label.k, "Retrieval budget");
  l->add_option("--beta", label.beta, "Surrogate scale");
  l->add_option("--n-v", label.n_v, "Shapley prefixes in the pool");
  l->add_option("--n-delta-prefix", label.n_delta_prefix, "Delta prefixes in the pool");
  l->add_option("--top-l", label.top_l, "Combination scope");
  l->add_option("--epsilon", label.epsilon, "Retrieval-control margin");
  l->add_option("--tau-es", label.tau_es, "Quality gate on ES");
  l->add_option("--tau-done", label.tau_done, "DONE when the empty context reaches this ES");
  l->add_option("--max-new-tokens", label.max_new_tokens, "Decode length");
  l->add_option("--utility", label.utility, "surrogate | loglik | es | em");
  l->add_option("--proposal", label.proposal, "shapley | delta");
  l->add_flag("--strict-em", label.strict_em, "Compare raw strings for EM");
  label.backend.add_to(l);

  GameCmd game;
  auto* g = app.add_subcommand("game", "Exact Shapley values of a small game");
  g->add_option("game", game.path, "Game JSON")->required();
  g->add_flag("--oracle", game.oracle, "Also run the permutation oracle");

  MetricsCmd metrics;
  auto* m = app.add_subcommand("metrics", "ES / EM / Levenshtein");
  m->add_option("--pred", metrics.pred, "Prediction");
  m->add_option("--ref", metrics.ref, "Reference");
  m->add_option("--pairs", metrics.pairs_path, "JSONL of {pred, ref}");
  m->add_flag("--strict-em", metrics.strict_em, "Compare raw strings for EM");

  InferCmd infer;
  auto* i = app.add_subcommand("infer", "Trigger, retrieve, select, complete");
  i->add_option("request", infer.request_path, "Request JSON or JSONL")->required();
  i->add_option("--out", infer.out_path, "Trace JSONL (default stdout)");
  i->add_option("--config", infer.config_path, "Inference config JSON");
  i->add_option("--index", infer.index_path, "Chunk index for requests without a pool");
  i->add_option("--t-c", infer.t_c, "Trigger threshold(s)");
  i->add_option("--sweep", infer.sweep, "Evenly spaced thresholds over [0, 1]");
  i->add_option("--k", infer.k, "Retrieval budget");
  i->add_option("--max-new-tokens", infer.max_new_tokens, "Decode length");
  i->add_flag("--empty-selection-fallback", infer.fallback,
              "Decode without evidence when nothing is kept");
  i->add_flag("--timings", infer.timings, "Include per-stage durations");
  i->add_option("--jobs", infer.jobs, "Worker threads");
  infer.backend.add_to(i);

  ServeStubCmd serve;
  auto* s = app.add_subcommand("serve-stub", "Serve a stub fixture over HTTP");
  s->add_option("fixture", serve.fixture, "Stub fixture JSON")->required();
  s->add_option("--host", serve.host, "Bind address");
  s->add_option("--port", serve.port, "Port (0 = any free port)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*c) return corpus.run();
    if (*x) return index.run();
    if (*l) return label.run();
    if (*g) return game.run();
    if (*m) return metrics.run();
    if (*i) return infer.run();
    if (*s) return serve.run();
  } catch (const cs::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
