// bdkit command line: thin wrappers over the library plus `run`, which
// drives a whole experiment from an INI config.
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "bdkit/corpus.hpp"
#include "bdkit/csv.hpp"
#include "bdkit/defense.hpp"
#include "bdkit/error.hpp"
#include "bdkit/kernels.hpp"
#include "bdkit/metrics.hpp"
#include "bdkit/pipeline.hpp"
#include "bdkit/poison.hpp"
#include "bdkit/sampling.hpp"
#include "bdkit/simmodel.hpp"
#include "bdkit/stats.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace bdkit;

namespace {

Partition partition_arg(const std::string& text) {
  try {
    return parse_partition(text);
  } catch (const std::exception&) {
    throw ArgumentError("--partition must be train or test");
  }
}

std::string target_from(const std::string& text, const std::string& file) {
  if (!text.empty() && !file.empty()) throw ArgumentError("use --target or --target-file, not both");
  if (!file.empty()) {
    std::string t = read_file(file);
    while (!t.empty() && (t.back() == '\n' || t.back() == '\r')) t.pop_back();
    if (t.empty()) throw ArgumentError("--target-file is empty");
    return t;
  }
  return text.empty() ? std::string(kDefaultTargetSentence) : text;
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_file(path, text);
  }
}

std::vector<std::string> read_lines(const std::string& path) {
  std::vector<std::string> out;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

// Length-template triggers need a pool: an explicit file, or rare tokens
// of the corpus being poisoned.
TriggerSpec trigger_arg(const std::string& text, const std::string& pool_file, const Corpus& corpus,
                        std::size_t llm_max_tokens, std::uint64_t seed) {
  TriggerSpec spec = parse_trigger_spec(text);
  spec.seed = seed;
  spec.llm_max_tokens = llm_max_tokens;
  if (spec.kind == TriggerKind::length_template) {
    spec.filler_tokens = pool_file.empty()
                             ? select_rare_tokens(token_frequencies(corpus, true),
                                                  RareTokenConstraints::length_study())
                             : read_lines(pool_file);
  }
  spec.validate();
  return spec;
}

struct LlmOptions {
  std::string url;
  std::uint64_t stub_seed = 0;
  std::size_t max_tokens = 20;
  std::size_t workers = 4;
};

void add_llm_options(CLI::App* cmd, LlmOptions& o) {
  cmd->add_option("--llm-url", o.url, "Completion service URL (default: offline stub)");
  cmd->add_option("--llm-stub-seed", o.stub_seed, "Seed of the offline completion stub");
  cmd->add_option("--llm-max-tokens", o.max_tokens, "Token cap for llm triggers")->check(CLI::PositiveNumber);
  cmd->add_option("--llm-workers", o.workers, "Concurrent completion requests")->check(CLI::PositiveNumber);
}

std::string join_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (const auto& id : ids) out += id + "\n";
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Backdoor poisoning toolkit for code-summarization corpora"};
  app.require_subcommand(1);

  // ingest
  std::string in_path, out_path, partition = "train", report_path;
  std::size_t subset = 0;
  std::uint64_t seed = 0;
  auto* ingest = app.add_subcommand("ingest", "Validate a JSONL corpus and write it in canonical form");
  ingest->add_option("--input", in_path)->required();
  ingest->add_option("--output", out_path)->required();
  ingest->add_option("--partition", partition)->check(CLI::IsMember({"train", "test"}));
  ingest->add_option("--subset", subset, "Keep a seeded uniform subset of this size");
  ingest->add_option("--seed", seed);
  ingest->add_option("--report", report_path, "Load report JSON (default: stdout)");

  // poison
  std::string trigger = "fixed", target, target_file, manifest_path, summary_path, pool_file;
  std::optional<double> rate;
  std::optional<std::size_t> count;
  bool eval_mode = false;
  LlmOptions llm;
  auto* poison = app.add_subcommand("poison", "Inject triggers and relabel a sample of the corpus");
  poison->add_option("--input", in_path)->required();
  poison->add_option("--output", out_path)->required();
  poison->add_option("--partition", partition)->check(CLI::IsMember({"train", "test"}));
  poison->add_option("--trigger", trigger, "fixed|grammar|llm|token:<tok>|length:<k>");
  auto* rate_opt = poison->add_option("--rate", rate, "Fraction of samples to poison");
  poison->add_option("--count", count, "Absolute number of samples to poison")->excludes(rate_opt);
  poison->add_option("--seed", seed);
  poison->add_option("--target", target, "Target summary");
  poison->add_option("--target-file", target_file, "File holding the target summary");
  poison->add_option("--manifest", manifest_path);
  poison->add_option("--summary", summary_path, "Plan and counts as JSON");
  poison->add_option("--length-pool", pool_file, "Filler tokens for length:<k>, one per line");
  poison->add_flag("--eval", eval_mode, "Trigger every eligible sample and keep docstrings");
  add_llm_options(poison, llm);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Synthetic predictions, representations and logits");
  simulate->require_subcommand(1);
  double p_activate = 0.9, p_false = 0.0;
  std::string ids_from;
  auto* sim_pred = simulate->add_subcommand("predictions", "Predictions of a simulated backdoored model");
  sim_pred->add_option("--input", in_path)->required();
  sim_pred->add_option("--output", out_path)->required();
  sim_pred->add_option("--partition", partition)->check(CLI::IsMember({"train", "test"}));
  sim_pred->add_option("--trigger", trigger);
  sim_pred->add_option("--triggered-ids", ids_from, "Treat these ids (one per line) as triggered");
  sim_pred->add_option("--target", target);
  sim_pred->add_option("--target-file", target_file);
  sim_pred->add_option("--p-activate", p_activate)->check(CLI::Range(0.0, 1.0));
  sim_pred->add_option("--p-false", p_false)->check(CLI::Range(0.0, 1.0));
  sim_pred->add_option("--seed", seed);

  sim::SyntheticRepConfig reps_cfg;
  std::string ids_path, planted_path;
  auto* sim_reps = simulate->add_subcommand("reps", "Gaussian representations with planted outliers");
  sim_reps->add_option("--rows", reps_cfg.rows);
  sim_reps->add_option("--dim", reps_cfg.dim);
  sim_reps->add_option("--planted", reps_cfg.planted);
  sim_reps->add_option("--shift", reps_cfg.shift);
  sim_reps->add_option("--seed", reps_cfg.seed);
  sim_reps->add_option("--output", out_path)->required();
  sim_reps->add_option("--ids", ids_path, "Row id sidecar")->required();
  sim_reps->add_option("--planted-ids", planted_path, "Write planted ids here");

  std::size_t steps = 12, vocab = 512;
  double margin = 4.0;
  auto* sim_logits = simulate->add_subcommand("logits", "Replay logits favouring a target sequence");
  sim_logits->add_option("--steps", steps)->check(CLI::PositiveNumber);
  sim_logits->add_option("--vocab", vocab)->check(CLI::Range(2, 1 << 24));
  sim_logits->add_option("--margin", margin);
  sim_logits->add_option("--seed", seed);
  sim_logits->add_option("--output", out_path)->required();

  // evaluate
  std::string poisoned_eval, poisoned_pred, clean_eval, clean_pred, json_path, csv_path;
  std::string model = "simulated", setting;
  auto* evaluate = app.add_subcommand("evaluate", "ASR, FTR and clean BLEU-4 from prediction files");
  evaluate->add_option("--poisoned-eval", poisoned_eval)->required();
  evaluate->add_option("--poisoned-predictions", poisoned_pred)->required();
  evaluate->add_option("--clean-eval", clean_eval)->required();
  evaluate->add_option("--clean-predictions", clean_pred)->required();
  evaluate->add_option("--target", target);
  evaluate->add_option("--target-file", target_file);
  evaluate->add_option("--json", json_path, "Report JSON (default: stdout)");
  evaluate->add_option("--csv", csv_path, "Append a CSV row, writing the header for a new file");
  evaluate->add_option("--model", model);
  evaluate->add_option("--trigger", trigger);
  evaluate->add_option("--setting", setting);

  // sample
  std::string logits_path;
  std::vector<double> temperatures{0.0};
  std::vector<std::size_t> top_ks{50};
  std::size_t trials = 10000;
  auto* sample = app.add_subcommand("sample", "Target-sequence rate of a logits replay per (T, k)");
  sample->add_option("--logits", logits_path)->required();
  sample->add_option("--temperature", temperatures)->delimiter(',');
  sample->add_option("--top-k", top_ks)->delimiter(',');
  sample->add_option("--trials", trials)->check(CLI::PositiveNumber);
  sample->add_option("--seed", seed);
  sample->add_option("--output", out_path, "CSV (default: stdout)");

  // defend
  std::string repr_path, removed_path;
  double beta = 1.5;
  double defend_rate = 0.0;
  auto* defend = app.add_subcommand("defend", "Spectral-signature filtering of representations");
  defend->add_option("--repr", repr_path)->required();
  defend->add_option("--ids", ids_path);
  defend->add_option("--poisoned", manifest_path,
                     "Manifest JSONL or id list of the poisoned samples")->required();
  defend->add_option("--beta", beta);
  defend->add_option("--rate", defend_rate, "Poisoning rate (default: from --poisoned)");
  defend->add_option("--output", out_path, "Report JSON (default: stdout)");
  defend->add_option("--removed", removed_path, "Removed ids, one per line");

  // stats
  std::string group_col = "trigger", metric_col = "asr", x_col, y_col;
  std::vector<std::string> match_cols;
  auto* stats_cmd = app.add_subcommand("stats", "Significance tests over an evaluation CSV");
  stats_cmd->require_subcommand(1);
  auto* st_w = stats_cmd->add_subcommand("wilcoxon", "Paired Wilcoxon tests between groups");
  st_w->add_option("--input", in_path)->required();
  st_w->add_option("--group", group_col);
  st_w->add_option("--metric", metric_col);
  st_w->add_option("--match", match_cols, "Columns identifying a pair")->delimiter(',')->required();
  st_w->add_option("--output", out_path);
  auto* st_p = stats_cmd->add_subcommand("pearson", "Pearson correlation between two columns");
  st_p->add_option("--input", in_path)->required();
  st_p->add_option("--x", x_col)->required();
  st_p->add_option("--y", y_col)->required();
  st_p->add_option("--output", out_path);

  // run
  std::string config_path, backend, output_dir;
  std::size_t workers = 0;
  std::vector<std::string> overrides;
  auto* run = app.add_subcommand("run", "Run an experiment config end to end");
  run->add_option("--config", config_path)->required();
  run->add_option("--output", output_dir, "Overrides run.output");
  run->add_option("--workers", workers, "Overrides run.workers");
  run->add_option("--backend", backend, "Overrides run.backend")->check(CLI::IsMember({"simulation", "adapter"}));
  run->add_option("--set", overrides, "section.key=value, repeatable");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*ingest) {
      LoadReport report;
      Corpus c = load_corpus(in_path, partition_arg(partition), &report);
      if (subset) c = sample_subset(c, subset, seed);
      save_corpus(c, out_path);
      nlohmann::ordered_json j{{"lines", report.lines}, {"malformed", report.malformed},
                               {"malformed_lines", report.malformed_lines}, {"samples", c.size()}};
      emit(report_path, j.dump(2) + "\n");
    } else if (*poison) {
      if (!eval_mode && !rate && !count) throw ArgumentError("poison needs --rate or --count");
      const Corpus c = load_corpus(in_path, partition_arg(partition));
      PoisonPlan plan;
      plan.trigger = trigger_arg(trigger, pool_file, c, llm.max_tokens, seed);
      plan.target_sentence = target_from(target, target_file);
      if (count) plan.amount = PoisonCount{*count};
      if (rate) plan.amount = PoisonRate{*rate};
      plan.seed = seed;
      std::unique_ptr<CompletionClient> client;
      if (llm.url.empty()) {
        client = std::make_unique<StubCompletionClient>(llm.stub_seed);
      } else {
        client = std::make_unique<HttpCompletionClient>(HttpCompletionClient::Options{llm.url});
      }
      StubCompletionClient fallback(llm.stub_seed);
      const TriggerContext ctx{client.get(), &fallback, llm.workers};
      nlohmann::ordered_json summary;
      if (eval_mode) {
        auto r = poison_eval_set(c, plan, ctx);
        save_corpus(r.corpus, out_path);
        if (!manifest_path.empty()) write_file(manifest_path, serialize_manifest(r.entries));
        summary = {{"trigger", plan.trigger.label()}, {"seed", seed}, {"corpus_size", c.size()},
                   {"triggered", r.corpus.size()}, {"dropped", r.dropped}};
      } else {
        auto r = poison_corpus(c, plan, ctx);
        save_corpus(r.corpus, out_path);
        if (!manifest_path.empty()) save_manifest(r.manifest, manifest_path);
        summary = {{"trigger", plan.trigger.label()}, {"target_sentence", plan.target_sentence},
                   {"amount", describe(plan.amount)}, {"seed", seed},
                   {"corpus_size", r.manifest.corpus_size}, {"eligible", r.manifest.eligible},
                   {"count", r.manifest.count()}, {"effective_rate", r.manifest.effective_rate()}};
      }
      emit(summary_path, summary.dump(2) + "\n");
    } else if (*sim_pred) {
      const Corpus c = load_corpus(in_path, partition_arg(partition));
      const auto tgt = target_from(target, target_file);
      const sim::SimModelConfig cfg{p_activate, p_false, seed};
      const auto matcher = ids_from.empty() ? sim::TriggerMatcher::for_spec(parse_trigger_spec(trigger))
                                            : sim::TriggerMatcher::ids(read_lines(ids_from));
      save_predictions(sim::simulate_predictions(c, tgt, matcher, cfg), out_path);
    } else if (*sim_reps) {
      const auto reps = sim::synth_representations(reps_cfg);
      defense::save_repr(reps.matrix, out_path, ids_path);
      if (!planted_path.empty()) write_file(planted_path, join_ids(reps.planted_ids));
    } else if (*sim_logits) {
      sampling::save_logits(sim::synth_backdoor_logits(steps, vocab, margin, seed), out_path);
    } else if (*evaluate) {
      const auto tgt = target_from(target, target_file);
      const Corpus pe = load_corpus(poisoned_eval, Partition::test);
      const Corpus ce = load_corpus(clean_eval, Partition::test);
      const auto report =
          asr_ftr(load_predictions(poisoned_pred), pe, load_predictions(clean_pred), ce, tgt);
      const ReportLabels labels{model, trigger, setting};
      emit(json_path, report_json(report, labels));
      if (!csv_path.empty()) {
        const bool fresh = !fs::exists(csv_path) || fs::file_size(csv_path) == 0;
        if (!fs::path(csv_path).parent_path().empty()) fs::create_directories(fs::path(csv_path).parent_path());
        std::ofstream out(csv_path, std::ios::binary | std::ios::app);
        if (fresh) out << report_csv_header();
        out << report_csv_row(report, labels);
        if (!out) throw IoError("cannot append to " + csv_path);
      }
    } else if (*sample) {
      const auto logits = sampling::load_logits(logits_path);
      std::string csv = "temperature,top_k,asr,hits,trials\n";
      for (auto k : top_ks) {
        for (double t : temperatures) {
          const auto r = sampling::replay_target_rate(logits, {t, k, seed}, trials);
          std::ostringstream row;
          row.precision(17);
          row << t << "," << k << "," << r.rate() << "," << r.hits << "," << r.trials << "\n";
          csv += row.str();
        }
      }
      emit(out_path, csv);
    } else if (*defend) {
      const auto m = defense::load_repr(repr_path, ids_path);
      std::vector<std::string> poisoned;
      for (const auto& line : read_lines(manifest_path)) {
        if (line.front() == '{') {
          poisoned.push_back(nlohmann::json::parse(line).at("id").get<std::string>());
        } else {
          poisoned.push_back(line);
        }
      }
      const double r = defend_rate > 0.0 ? defend_rate
                                         : static_cast<double>(poisoned.size()) / static_cast<double>(m.rows);
      const auto ranking = defense::outlier_scores(m);
      const auto report = defense::remove_and_score(ranking, poisoned, beta, r);
      emit(out_path, defense::report_json(report));
      if (!removed_path.empty()) write_file(removed_path, join_ids(report.removed));
    } else if (*st_w) {
      const auto table = parse_csv(read_file(in_path));
      emit(out_path, stats::comparisons_csv(stats::wilcoxon_by_group(table, group_col, metric_col, match_cols)));
    } else if (*st_p) {
      const auto table = parse_csv(read_file(in_path));
      emit(out_path, stats::comparisons_csv(stats::pearson_columns(table, x_col, y_col)));
    } else if (*run) {
      namespace pt = boost::property_tree;
      pt::ptree tree;
      {
        std::istringstream in(read_file(config_path));
        try {
          pt::ini_parser::read_ini(in, tree);
        } catch (const pt::ini_parser_error& e) {
          throw ConfigError(std::string("config: ") + e.what());
        }
      }
      for (const auto& o : overrides) {
        const auto eq = o.find('=');
        const auto dot = o.find('.');
        if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
          throw ArgumentError("--set expects section.key=value, got '" + o + "'");
        }
        tree.put(pt::ptree::path_type(o.substr(0, eq), '.'), o.substr(eq + 1));
      }
      if (!output_dir.empty()) tree.put("run.output", output_dir);
      if (workers) tree.put("run.workers", workers);
      if (!backend.empty()) tree.put("run.backend", backend);
      std::ostringstream text;
      pt::ini_parser::write_ini(text, tree);
      auto cfg = pipeline::parse_config(text.str(), fs::path(config_path).parent_path());
      // Command-line output paths are relative to the working directory.
      if (!output_dir.empty()) cfg.output_dir = fs::absolute(output_dir).string();
      const auto result = pipeline::run_pipeline(cfg);
      std::size_t pending = 0;
      for (const auto& c : result.cells) pending += c.status == "pending";
      std::cout << result.run_dir.string() << "\n";
      std::cerr << (result.reused ? "reused " : "wrote ") << result.cells.size() << " cells";
      if (pending) std::cerr << " (" << pending << " waiting for adapter predictions)";
      std::cerr << "\n";
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
