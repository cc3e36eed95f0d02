#include "dotrag/cli.hpp"

#include <fstream>
#include <map>
#include <optional>
#include <ostream>

#include <CLI11.hpp>

#include "dotrag/config.hpp"
#include "dotrag/corpus_prep.hpp"
#include "dotrag/evaluate.hpp"
#include "dotrag/parallel.hpp"

namespace dotrag {

using json = nlohmann::json;

namespace {

struct Flags {
  std::string config;
  std::string index;
  std::string mock_script;
  std::string trace;
  std::optional<unsigned> hops;
  std::optional<std::size_t> iterations;
  std::optional<double> tau;
  std::optional<std::size_t> topk;
  std::optional<std::size_t> cap;
  std::optional<std::size_t> paths_per_pair;
  std::optional<std::size_t> candidates;
  std::optional<std::size_t> chunks;
  std::optional<unsigned> parallel;
  std::optional<std::uint64_t> seed;
  bool verbose = false;
};

void add_common(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config, "JSON config file with dotted keys");
  app->add_option("--index", f.index, "index file (newline-delimited JSON)");
  app->add_option("--mock-script", f.mock_script, "run against the scripted mock LLM");
  app->add_option("--trace", f.trace, "write the event log here");
  app->add_option("--hops", f.hops, "h_max");
  app->add_option("--iterations", f.iterations, "T_max");
  app->add_option("--tau", f.tau, "low-level grounding threshold");
  app->add_option("--topk", f.topk, "k for high-level grounding");
  app->add_option("--cap", f.cap, "C, judged paths per round");
  app->add_option("--paths-per-pair", f.paths_per_pair, "P, Yen paths per anchor/destination");
  app->add_option("--candidates", f.candidates, "K, destinations per round");
  app->add_option("--chunks", f.chunks, "chunks passed to the answer");
  app->add_option("--parallel", f.parallel, "worker threads");
  app->add_option("--seed", f.seed, "mock embedder seed");
  app->add_flag("--verbose", f.verbose, "print the resolved config");
}

RunConfig resolve(const Flags& f, std::ostream& err) {
  RunConfig cfg;
  cfg.http = http_settings_from_env(cfg.http);
  if (!f.config.empty()) cfg.apply_file(f.config);
  if (!f.index.empty()) cfg.index_path = f.index;
  if (!f.mock_script.empty()) {
    cfg.mock_script = f.mock_script;
    cfg.provider_mode = "mock";
  }
  if (!f.trace.empty()) cfg.trace_path = f.trace;
  if (f.hops) cfg.engine.search.hops = *f.hops;
  if (f.iterations) cfg.engine.search.iterations = *f.iterations;
  if (f.tau) cfg.engine.grounding.tau = *f.tau;
  if (f.topk) cfg.engine.grounding.k_high = *f.topk;
  if (f.cap) cfg.engine.search.path_cap = *f.cap;
  if (f.paths_per_pair) cfg.engine.search.paths_per_pair = *f.paths_per_pair;
  if (f.candidates) cfg.engine.search.candidates = *f.candidates;
  if (f.chunks) cfg.engine.n_chunks = *f.chunks;
  if (f.parallel) cfg.engine.parallel = *f.parallel;
  if (f.seed) cfg.seed = *f.seed;
  cfg.verbose = f.verbose;
  cfg.validate();
  if (cfg.verbose) err << cfg.redacted().dump(2) << "\n";
  return cfg;
}

GraphIndex load_configured_index(const RunConfig& cfg) {
  if (cfg.index_path.empty()) throw ConfigError("no index given (--index or paths.index)");
  if (!std::filesystem::exists(cfg.index_path)) throw ConfigError("index file '" + cfg.index_path + "' not found");
  return load_index(cfg.index_path);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  return out;
}

void write_trace(const std::string& path, const std::vector<json>& events) {
  if (path.empty()) return;
  auto out = open_out(path);
  for (const auto& e : events) out << e.dump() << "\n";
}

int cmd_query(const Flags& f, const std::string& question, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = resolve(f, err);
  const GraphIndex index = load_configured_index(cfg);
  Engine engine(index, cfg.make_providers(), PromptLibrary(cfg.resolved_prompts_dir()), cfg.engine);
  const AnswerBundle bundle = engine.query(question);
  write_trace(cfg.trace_path, bundle.trace);
  out << bundle.to_json(index).dump(2) << "\n";
  return kExitOk;
}

int cmd_eval(const Flags& f, const std::string& gt_path, const std::string& report, bool as_json, std::ostream& out,
             std::ostream& err) {
  RunConfig cfg = resolve(f, err);
  if (!gt_path.empty()) cfg.ground_truth = gt_path;
  if (cfg.ground_truth.empty()) throw ConfigError("no ground-truth file given");
  const GraphIndex index = load_configured_index(cfg);
  const auto truth = load_ground_truth(cfg.ground_truth);
  validate_ground_truth(truth, index);
  Engine engine(index, cfg.make_providers(), PromptLibrary(cfg.resolved_prompts_dir()), cfg.engine);

  struct Done {
    QueryEval row;
    std::vector<json> trace;
  };
  auto done = parallel_map(truth.size(), cfg.engine.parallel, [&](std::size_t i) {
    const auto& g = truth[i];
    AnswerBundle b = engine.query(g.question);
    std::vector<std::string> chunk_ids;
    for (const auto& c : b.chunks) chunk_ids.push_back(c.chunk_id);
    const auto retrieved = resolve_chunks_to_nodes(chunk_ids, b.retrieved_nodes, index);
    const std::set<std::string> gold(g.gold_entities.begin(), g.gold_entities.end());
    Done d;
    d.row.id = g.id;
    d.row.scores = score_retrieval(retrieved, gold);
    d.row.retrieved = retrieved.size();
    d.row.gold = gold.size();
    for (const auto& r : retrieved) d.row.hits += gold.count(r);
    for (auto& e : b.trace) {
      e["query_id"] = g.id;
      d.trace.push_back(std::move(e));
    }
    return d;
  });
  std::vector<QueryEval> rows;
  std::vector<json> trace;
  for (auto& d : done) {
    rows.push_back(std::move(d.row));
    for (auto& e : d.trace) trace.push_back(std::move(e));
  }
  write_trace(cfg.trace_path, trace);
  const EvalReport r = EvalReport::from_rows(std::move(rows));
  if (!report.empty()) open_out(report) << r.to_json().dump(2) << "\n";
  if (as_json) {
    out << r.to_json().dump(2) << "\n";
  } else {
    out << r.table();
  }
  return kExitOk;
}

int cmd_judge(const Flags& f, const std::string& a_path, const std::string& b_path, bool no_swap,
              const std::string& report, bool as_json, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = resolve(f, err);
  const auto a = load_answers(a_path);
  const auto b = load_answers(b_path);
  std::map<std::string, const AnswerRecord*> by_id;
  for (const auto& r : b) by_id[r.id] = &r;
  std::vector<std::pair<const AnswerRecord*, const AnswerRecord*>> pairs;
  for (const auto& r : a) {
    auto it = by_id.find(r.id);
    if (it == by_id.end()) {
      err << "warning: query '" << r.id << "' has no answer in " << b_path << "\n";
      continue;
    }
    pairs.emplace_back(&r, it->second);
  }
  if (pairs.empty()) throw ConfigError("no query ids shared by the two answer files");
  const ProviderPair providers = cfg.make_providers();
  const PromptLibrary prompts(cfg.resolved_prompts_dir());
  auto rounds = parallel_map(pairs.size(), cfg.engine.parallel, [&](std::size_t i) {
    const auto& [x, y] = pairs[i];
    const std::string& q = x->question.empty() ? y->question : x->question;
    return judge_pair(q, x->answer, y->answer, *providers.llm, prompts, !no_swap);
  });
  JudgeTally tally;
  for (const auto& rs : rounds) {
    for (const auto& r : rs) tally.add(r);
  }
  if (tally.parse_failures) err << "warning: " << tally.parse_failures << " judge replies unparsable, counted as ties\n";
  if (!report.empty()) open_out(report) << tally.to_json().dump(2) << "\n";
  if (as_json) {
    out << tally.to_json().dump(2) << "\n";
  } else {
    out << tally.table();
  }
  return kExitOk;
}

std::string default_report(const std::string& output, const std::string& report, const char* suffix) {
  return report.empty() ? output + suffix : report;
}

int cmd_prep(const Flags& f, const std::string& step, const std::string& input, const std::string& output,
             const std::string& schema_path, const std::string& report, std::ostream& err) {
  RunConfig cfg = resolve(f, err);
  if (!schema_path.empty()) cfg.prep_schema = schema_path;
  if (input.empty() || output.empty()) throw ConfigError("prep needs --input and --output");
  if (!std::filesystem::exists(input)) throw ConfigError("input file '" + input + "' not found");
  const ProviderPair providers = cfg.make_providers();
  const PromptLibrary prompts(cfg.resolved_prompts_dir());
  LlmClient& llm = *providers.llm;

  if (step == "textualize") {
    const auto triples = load_triples(input);
    std::map<std::string, std::vector<Neighbor>> hood;
    for (const auto& t : triples) {
      if (t.head == t.tail) continue;
      hood[t.head].push_back({t.tail, t.tail, t.relation, true});
      hood[t.tail].push_back({t.head, t.head, t.relation, false});
    }
    std::vector<std::string> ids;
    for (const auto& [id, n] : hood) ids.push_back(id);
    auto outcomes = parallel_map(ids.size(), cfg.engine.parallel, [&](std::size_t i) {
      return textualize_entity(ids[i], ids[i], hood.at(ids[i]), llm, prompts, cfg.prep_max_retries);
    });
    auto chunks_out = open_out(output);
    auto failures_out = open_out(default_report(output, report, ".failures.ndjson"));
    std::size_t failed = 0;
    for (const auto& o : outcomes) {
      chunks_out << json{{"center_id", o.chunk.center_id},
                         {"text", o.chunk.text},
                         {"required", o.chunk.required},
                         {"ok", o.ok},
                         {"calls", o.calls}}
                        .dump()
                 << "\n";
      if (!o.ok) {
        ++failed;
        failures_out << json{{"entity", o.chunk.center_id}, {"calls", o.calls}, {"missing", o.missing},
                             {"center_found", o.center_found}}
                            .dump()
                     << "\n";
      }
    }
    err << "[prep textualize] " << outcomes.size() << " entities, " << failed << " coverage failures\n";
    return kExitOk;
  }

  if (step == "build-index") {
    if (cfg.prep_schema.empty()) throw ConfigError("prep build-index needs --schema or prep.schema");
    const auto triples = load_triples(input);
    const auto schema = load_prep_schema(cfg.prep_schema);
    BuildOptions opts{cfg.prep_max_retries, cfg.prep_dedup, cfg.prep_tau_dedup, cfg.engine.parallel};
    BuildReport rep;
    const GraphIndex index = build_index(triples, schema, llm, *providers.embedder, prompts, opts, rep);
    {
      auto o = open_out(output);
      write_index(o, index);
    }
    json j = {{"entities", rep.entities}, {"relations", rep.relations}, {"chunks", rep.chunks},
              {"failures", rep.failures}, {"dedup", rep.dedup.to_json()}};
    open_out(default_report(output, report, ".report.json")) << j.dump(2) << "\n";
    err << "[prep build-index] " << rep.entities << " entities, " << rep.relations << " relations, "
        << rep.failures.size() << " failures\n";
    return kExitOk;
  }

  const GraphIndex index = load_index(input);
  if (step == "dedup") {
    std::vector<DedupItem> items;
    for (const auto& e : index.entities()) {
      Embedding v = e.embedding ? *e.embedding : providers.embedder->embed(entity_embedding_text(e));
      items.push_back({e.id, e.name, e.description, std::move(v)});
    }
    const auto result = dedup_entities(items, cfg.prep_tau_dedup, llm, prompts, cfg.engine.parallel);
    const GraphIndex merged = apply_merges(index, result.clusters);
    {
      auto o = open_out(output);
      write_index(o, merged);
    }
    open_out(default_report(output, report, ".merge.json")) << result.to_json().dump(2) << "\n";
    for (const auto& w : result.warnings) err << "warning: " << w << "\n";
    err << "[prep dedup] " << index.entity_count() << " -> " << merged.entity_count() << " entities\n";
    return kExitOk;
  }
  if (step == "relabel") {
    const std::vector<Entity> entities(index.entities().begin(), index.entities().end());
    const auto result = relabel_types(entities, index.schema(), llm, prompts, cfg.prep_batch_size,
                                      cfg.prep_max_retries, cfg.engine.parallel);
    const GraphIndex relabeled = apply_relabel(index, result);
    {
      auto o = open_out(output);
      write_index(o, relabeled);
    }
    open_out(default_report(output, report, ".relabel.json")) << result.to_json().dump(2) << "\n";
    err << "[prep relabel] " << result.decisions.size() << " decisions in " << result.batches << " batches, "
        << result.calls << " calls\n";
    return kExitOk;
  }
  throw ConfigError("unknown prep step '" + step + "'");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Graph retrieval with divisions of thought", "dotrag"};
  app.require_subcommand(1);

  Flags f;
  std::string question;
  auto* query = app.add_subcommand("query", "answer one question");
  add_common(query, f);
  query->add_option("question", question, "question text")->required();

  std::string gt, report;
  bool as_json = false;
  auto* eval = app.add_subcommand("eval-retrieval", "score node-level retrieval against ground truth");
  add_common(eval, f);
  eval->add_option("ground_truth", gt, "ground-truth NDJSON");
  eval->add_option("--report", report, "write the JSON report here");
  eval->add_flag("--json", as_json, "print JSON instead of a table");

  std::string answers_a, answers_b;
  bool no_swap = false;
  auto* judge = app.add_subcommand("judge", "pairwise LLM judging of two answer sets");
  add_common(judge, f);
  judge->add_option("answers_a", answers_a, "answers NDJSON (system A)")->required();
  judge->add_option("answers_b", answers_b, "answers NDJSON (system B)")->required();
  judge->add_flag("--no-swap", no_swap, "judge each pair in one order only");
  judge->add_option("--report", report, "write the JSON tally here");
  judge->add_flag("--json", as_json, "print JSON instead of a table");

  std::string step, input, output, schema;
  auto* prep = app.add_subcommand("prep", "corpus preparation");
  add_common(prep, f);
  prep->add_option("step", step, "textualize | dedup | relabel | build-index")
      ->required()
      ->check(CLI::IsMember({"textualize", "dedup", "relabel", "build-index"}));
  prep->add_option("--input", input, "triple file or index");
  prep->add_option("--output", output, "output file");
  prep->add_option("--schema", schema, "schema JSON for build-index");
  prep->add_option("--report", report, "report file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (query->parsed()) return cmd_query(f, question, out, err);
    if (eval->parsed()) return cmd_eval(f, gt, report, as_json, out, err);
    if (judge->parsed()) return cmd_judge(f, answers_a, answers_b, no_swap, report, as_json, out, err);
    if (prep->parsed()) return cmd_prep(f, step, input, output, schema, report, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ProviderError& e) {
    err << "provider error: " << e.what() << "\n";
    if (const auto* p = dynamic_cast<const ResponseParseError*>(&e)) err << "last response:\n" << p->raw() << "\n";
    return kExitProvider;
  } catch (const ParseError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitData;
  } catch (const ReferentialError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitData;
  } catch (const SchemaError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace dotrag
