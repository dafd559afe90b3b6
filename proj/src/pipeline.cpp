#include "bdkit/pipeline.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <map>
#include <set>
#include <sstream>
#include <unistd.h>

#include "bdkit/corpus.hpp"
#include "bdkit/csv.hpp"
#include "bdkit/digest.hpp"
#include "bdkit/error.hpp"
#include "bdkit/metrics.hpp"
#include "bdkit/parallel.hpp"
#include "bdkit/poison.hpp"
#include "bdkit/sampling.hpp"
#include "bdkit/simmodel.hpp"
#include "bdkit/stats.hpp"
#include "json.hpp"

namespace bdkit::pipeline {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw Error("cannot format number");
  return std::string(buf, end);
}

template <typename T, typename F>
std::string join(const std::vector<T>& items, F format) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    out += format(items[i]);
  }
  return out;
}

std::string join_strings(const std::vector<std::string>& items) {
  return join(items, [](const std::string& s) { return s; });
}

template <typename T>
std::string join_ints(const std::vector<T>& items) {
  return join(items, [](T v) { return std::to_string(v); });
}

std::string join_doubles(const std::vector<double>& items) { return join(items, format_double); }

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto t = trim(text);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || ptr != t.data() + t.size()) {
    throw ConfigError(key + ": expected a number, got '" + text + "'");
  }
  return v;
}

std::uint64_t to_u64(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const auto t = trim(text);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || ptr != t.data() + t.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

template <typename T, typename F>
std::vector<T> parse_list(const std::string& key, const std::string& text, F convert) {
  std::vector<T> out;
  for (const auto& item : split_list(text)) out.push_back(static_cast<T>(convert(key, item)));
  return out;
}

std::string sanitize(std::string_view text) {
  std::string out;
  for (char c : text) {
    const bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                      c == '.' || c == '_' || c == '-';
    out.push_back(keep ? c : '-');
  }
  return out;
}

}  // namespace

fs::path ExperimentConfig::resolve(const std::string& path) const {
  fs::path p(path);
  if (p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

void ExperimentConfig::validate() const {
  if (train_path.empty()) throw ConfigError("corpus.train is required");
  if (test_path.empty()) throw ConfigError("corpus.test is required");
  if (train_size && *train_size == 0) throw ConfigError("corpus.train_size must be >= 1");
  if (test_size && *test_size == 0) throw ConfigError("corpus.test_size must be >= 1");
  if (triggers.empty()) throw ConfigError("trigger.kinds needs at least one trigger");
  std::set<std::string> seen;
  for (const auto& t : triggers) {
    try {
      parse_trigger_spec(t);
    } catch (const ArgumentError& e) {
      throw ConfigError(std::string("trigger.kinds: ") + e.what());
    }
    if (!seen.insert(t).second) throw ConfigError("trigger.kinds lists '" + t + "' twice");
  }
  if (llm_max_tokens < 1) throw ConfigError("trigger.llm_max_tokens must be >= 1");
  if (rates.empty() && counts.empty()) {
    throw ConfigError("poison needs at least one amount (rates or counts)");
  }
  for (double r : rates) {
    if (!(r > 0.0 && r <= 1.0)) {
      throw ConfigError("poison.rates: " + format_double(r) + " is outside (0, 1]");
    }
  }
  for (auto c : counts) {
    if (c < 1) throw ConfigError("poison.counts must be >= 1");
  }
  if (seeds.empty()) throw ConfigError("poison.seeds needs at least one seed");
  if (!(p_activate >= 0.0 && p_activate <= 1.0)) throw ConfigError("simulate.p_activate outside [0, 1]");
  if (!(p_false >= 0.0 && p_false <= 1.0)) throw ConfigError("simulate.p_false outside [0, 1]");
  for (double t : temperatures) {
    if (!(t >= 0.0)) throw ConfigError("sampling.temperatures must be >= 0");
  }
  for (auto k : top_k) {
    if (k < 1) throw ConfigError("sampling.top_k must be >= 1");
  }
  if (!temperatures.empty() && top_k.empty()) throw ConfigError("sampling.top_k is empty");
  if (!temperatures.empty() && logits_path.empty() && synthetic_vocab < 2) {
    throw ConfigError("sampling.synthetic_vocab must be >= 2");
  }
  for (auto k : top_k) {
    if (logits_path.empty() && !temperatures.empty() && k > synthetic_vocab) {
      throw ConfigError("sampling.top_k exceeds sampling.synthetic_vocab");
    }
  }
  if (trials < 1) throw ConfigError("sampling.trials must be >= 1");
  for (auto b : adapter.batch_sizes) {
    if (b < 1) throw ConfigError("adapter.batch_sizes must be >= 1");
  }
  for (auto e : adapter.epochs) {
    if (e < 1) throw ConfigError("adapter.epochs must be >= 1");
  }
  if (backend != "simulation" && backend != "adapter") {
    throw ConfigError("run.backend must be simulation or adapter");
  }
  if (workers < 1) throw ConfigError("run.workers must be >= 1");
  if (output_dir.empty()) throw ConfigError("run.output is required");
}

std::string ExperimentConfig::echo() const {
  std::ostringstream out;
  auto opt = [](const std::optional<std::size_t>& v) { return v ? std::to_string(*v) : std::string(); };
  out << "[corpus]\n"
      << "train = " << train_path << "\n"
      << "test = " << test_path << "\n"
      << "train_size = " << opt(train_size) << "\n"
      << "test_size = " << opt(test_size) << "\n"
      << "subset_seed = " << subset_seed << "\n\n"
      << "[trigger]\n"
      << "kinds = " << join_strings(triggers) << "\n"
      << "target = " << (target.empty() ? std::string(kDefaultTargetSentence) : target) << "\n"
      << "length_pool = " << join_strings(length_pool) << "\n"
      << "llm_max_tokens = " << llm_max_tokens << "\n"
      << "llm_url = " << llm_url << "\n"
      << "llm_stub_seed = " << llm_stub_seed << "\n\n"
      << "[poison]\n"
      << "rates = " << join_doubles(rates) << "\n"
      << "counts = " << join_ints(counts) << "\n"
      << "seeds = " << join_ints(seeds) << "\n"
      << "eval_seed = " << eval_seed << "\n\n"
      << "[simulate]\n"
      << "p_activate = " << format_double(p_activate) << "\n"
      << "p_false = " << format_double(p_false) << "\n\n"
      << "[sampling]\n"
      << "logits = " << logits_path << "\n"
      << "synthetic_steps = " << synthetic_steps << "\n"
      << "synthetic_vocab = " << synthetic_vocab << "\n"
      << "synthetic_margin = " << format_double(synthetic_margin) << "\n"
      << "temperatures = " << join_doubles(temperatures) << "\n"
      << "top_k = " << join_ints(top_k) << "\n"
      << "trials = " << trials << "\n"
      << "seed = " << sampling_seed << "\n\n"
      << "[adapter]\n"
      << "model = " << adapter.model << "\n"
      << "batch_sizes = " << join_ints(adapter.batch_sizes) << "\n"
      << "epochs = " << join_ints(adapter.epochs) << "\n"
      << "learning_rate = " << format_double(adapter.learning_rate) << "\n"
      << "warmup_steps = " << adapter.warmup_steps << "\n"
      << "max_source_length = " << adapter.max_source_length << "\n"
      << "max_target_length = " << adapter.max_target_length << "\n\n"
      << "[run]\n"
      << "backend = " << backend << "\n";
  return out.str();
}

ExperimentConfig parse_config(std::string_view text, fs::path base_dir) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in{std::string(text)};
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  static const std::map<std::string, std::set<std::string>> kKnown = {
      {"corpus", {"train", "test", "train_size", "test_size", "subset_seed"}},
      {"trigger", {"kinds", "target", "length_pool", "llm_max_tokens", "llm_url", "llm_stub_seed"}},
      {"poison", {"rates", "counts", "seeds", "eval_seed"}},
      {"simulate", {"p_activate", "p_false"}},
      {"sampling", {"logits", "synthetic_steps", "synthetic_vocab", "synthetic_margin",
                    "temperatures", "top_k", "trials", "seed"}},
      {"adapter", {"model", "batch_sizes", "epochs", "learning_rate", "warmup_steps",
                   "max_source_length", "max_target_length"}},
      {"run", {"output", "workers", "backend"}},
  };
  for (const auto& [section, body] : tree) {
    auto known = kKnown.find(section);
    if (known == kKnown.end()) throw ConfigError("config: unknown section [" + section + "]");
    for (const auto& [key, value] : body) {
      if (!known->second.count(key)) throw ConfigError("config: unknown key " + section + "." + key);
    }
  }

  ExperimentConfig c;
  c.base_dir = std::move(base_dir);
  auto get = [&](const std::string& key) -> std::optional<std::string> {
    if (auto v = tree.get_optional<std::string>(pt::ptree::path_type(key, '.'))) return trim(*v);
    return std::nullopt;
  };
  auto get_u64 = [&](const std::string& key, auto& field) {
    if (auto v = get(key); v && !v->empty()) field = static_cast<std::decay_t<decltype(field)>>(to_u64(key, *v));
  };
  auto get_double = [&](const std::string& key, double& field) {
    if (auto v = get(key); v && !v->empty()) field = to_double(key, *v);
  };
  auto get_string = [&](const std::string& key, std::string& field) {
    if (auto v = get(key)) field = *v;
  };

  get_string("corpus.train", c.train_path);
  get_string("corpus.test", c.test_path);
  if (auto v = get("corpus.train_size"); v && !v->empty()) c.train_size = to_u64("corpus.train_size", *v);
  if (auto v = get("corpus.test_size"); v && !v->empty()) c.test_size = to_u64("corpus.test_size", *v);
  get_u64("corpus.subset_seed", c.subset_seed);

  if (auto v = get("trigger.kinds")) c.triggers = split_list(*v);
  get_string("trigger.target", c.target);
  if (auto v = get("trigger.length_pool")) c.length_pool = split_list(*v);
  get_u64("trigger.llm_max_tokens", c.llm_max_tokens);
  get_string("trigger.llm_url", c.llm_url);
  get_u64("trigger.llm_stub_seed", c.llm_stub_seed);

  if (auto v = get("poison.rates")) c.rates = parse_list<double>("poison.rates", *v, to_double);
  if (auto v = get("poison.counts")) c.counts = parse_list<std::size_t>("poison.counts", *v, to_u64);
  if (auto v = get("poison.seeds")) c.seeds = parse_list<std::uint64_t>("poison.seeds", *v, to_u64);
  get_u64("poison.eval_seed", c.eval_seed);

  get_double("simulate.p_activate", c.p_activate);
  get_double("simulate.p_false", c.p_false);

  get_string("sampling.logits", c.logits_path);
  get_u64("sampling.synthetic_steps", c.synthetic_steps);
  get_u64("sampling.synthetic_vocab", c.synthetic_vocab);
  get_double("sampling.synthetic_margin", c.synthetic_margin);
  if (auto v = get("sampling.temperatures")) {
    c.temperatures = parse_list<double>("sampling.temperatures", *v, to_double);
  }
  if (auto v = get("sampling.top_k")) c.top_k = parse_list<std::size_t>("sampling.top_k", *v, to_u64);
  get_u64("sampling.trials", c.trials);
  get_u64("sampling.seed", c.sampling_seed);

  get_string("adapter.model", c.adapter.model);
  if (auto v = get("adapter.batch_sizes")) {
    c.adapter.batch_sizes = parse_list<std::size_t>("adapter.batch_sizes", *v, to_u64);
  }
  if (auto v = get("adapter.epochs")) c.adapter.epochs = parse_list<std::size_t>("adapter.epochs", *v, to_u64);
  get_double("adapter.learning_rate", c.adapter.learning_rate);
  get_u64("adapter.warmup_steps", c.adapter.warmup_steps);
  get_u64("adapter.max_source_length", c.adapter.max_source_length);
  get_u64("adapter.max_target_length", c.adapter.max_target_length);

  get_string("run.output", c.output_dir);
  get_u64("run.workers", c.workers);
  get_string("run.backend", c.backend);
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  return parse_config(read_file(path), path.parent_path());
}

// ---------------------------------------------------------------------------

namespace {

class StageError : public Error {
 public:
  using Error::Error;
};

struct Cell {
  std::string id;
  TriggerSpec trigger;
  PoisonAmount amount;
  std::string setting;
  std::uint64_t seed = 0;
};

struct CellOutput {
  CellResult result;
  EvalReport report;
  bool evaluated = false;
};

class RunWriter {
 public:
  explicit RunWriter(fs::path root) : root_(std::move(root)) {}

  void write(const std::string& rel, std::string_view bytes) {
    write_file(root_ / rel, bytes);
  }
  const fs::path& root() const { return root_; }

  // Sorted run-relative paths of every regular file written so far.
  std::vector<std::string> inventory() const {
    std::vector<std::string> out;
    if (!fs::exists(root_)) return out;
    for (const auto& entry : fs::recursive_directory_iterator(root_)) {
      if (entry.is_regular_file()) out.push_back(fs::relative(entry.path(), root_).generic_string());
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  fs::path root_;
};

template <typename F>
auto stage(const char* name, RunWriter& writer, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    const auto partial = writer.inventory();
    std::string list;
    for (const auto& p : partial) list += "\n  " + p;
    throw StageError(std::string("stage '") + name + "' failed: " + e.what() +
                     "\npartial artifacts in " + writer.root().string() + ":" +
                     (list.empty() ? std::string(" none") : list));
  }
}

std::string poison_summary(const PoisonManifest& m) {
  ojson j;
  j["trigger"] = m.plan.trigger.label();
  j["target_sentence"] = m.plan.target_sentence;
  j["amount"] = describe(m.plan.amount);
  j["seed"] = m.plan.seed;
  j["corpus_size"] = m.corpus_size;
  j["eligible"] = m.eligible;
  j["count"] = m.count();
  j["effective_rate"] = m.effective_rate();
  return j.dump(2) + "\n";
}

}  // namespace

RunManifest run_pipeline(const ExperimentConfig& config) {
  config.validate();

  const fs::path train_file = config.resolve(config.train_path);
  const fs::path test_file = config.resolve(config.test_path);
  const std::string train_bytes = read_file(train_file);
  const std::string test_bytes = read_file(test_file);
  std::string logits_bytes;
  if (!config.logits_path.empty()) logits_bytes = read_file(config.resolve(config.logits_path));

  const std::string echo = config.echo();
  ojson inputs = ojson::object();
  inputs["train"] = {{"path", config.train_path}, {"sha256", sha256_hex(train_bytes)}};
  inputs["test"] = {{"path", config.test_path}, {"sha256", sha256_hex(test_bytes)}};
  if (!config.logits_path.empty()) {
    inputs["logits"] = {{"path", config.logits_path}, {"sha256", sha256_hex(logits_bytes)}};
  }

  // Build the cell list first; adapter predictions (when present) become
  // inputs too, so a run with new predictions gets a new identity.
  const std::string target =
      config.target.empty() ? std::string(kDefaultTargetSentence) : config.target;
  const Corpus train_full = parse_corpus(train_bytes, Partition::train, config.train_path);
  const Corpus test_full = parse_corpus(test_bytes, Partition::test, config.test_path);
  const Corpus train =
      config.train_size ? sample_subset(train_full, *config.train_size, config.subset_seed) : train_full;
  const Corpus test =
      config.test_size ? sample_subset(test_full, *config.test_size, config.subset_seed) : test_full;

  std::vector<std::string> pool = config.length_pool;
  std::vector<Cell> cells;
  for (const auto& label : config.triggers) {
    TriggerSpec spec = parse_trigger_spec(label);
    spec.llm_max_tokens = config.llm_max_tokens;
    if (spec.kind == TriggerKind::length_template) {
      if (pool.empty()) {
        pool = select_rare_tokens(token_frequencies(train, true), RareTokenConstraints::length_study());
      }
      if (pool.size() < spec.length) {
        throw ConfigError("trigger " + label + " needs " + std::to_string(spec.length) +
                          " pool tokens, only " + std::to_string(pool.size()) + " available");
      }
      spec.filler_tokens = pool;
    }
    std::vector<std::pair<PoisonAmount, std::string>> amounts;
    for (double r : config.rates) amounts.emplace_back(PoisonRate{r}, "rate=" + format_double(r));
    for (auto c : config.counts) amounts.emplace_back(PoisonCount{c}, "count=" + std::to_string(c));
    for (const auto& [amount, setting] : amounts) {
      for (auto seed : config.seeds) {
        Cell cell;
        cell.trigger = spec;
        cell.trigger.seed = seed;
        cell.amount = amount;
        cell.setting = setting;
        cell.seed = seed;
        cell.id = sanitize(label) + "__" + sanitize(setting) + "__seed-" + std::to_string(seed);
        cells.push_back(std::move(cell));
      }
    }
  }

  const bool use_adapter = config.backend == "adapter";
  // Adapter predictions are expected next to the run root, keyed by cell.
  const fs::path output_root = config.resolve(config.output_dir);
  const fs::path predictions_root = output_root / "adapter-predictions";
  ojson adapter_inputs = ojson::object();
  if (use_adapter) {
    for (const auto& cell : cells) {
      for (const char* which : {"predictions_poisoned.jsonl", "predictions_clean.jsonl"}) {
        const fs::path p = predictions_root / cell.id / which;
        if (fs::exists(p)) adapter_inputs[cell.id + "/" + which] = sha256_hex(read_file(p));
      }
    }
    inputs["adapter_predictions"] = adapter_inputs;
  }

  const std::string run_id = sha256_hex(echo + "\n" + inputs.dump()).substr(0, 16);
  const fs::path run_dir = output_root / ("run-" + run_id);

  RunManifest manifest;
  manifest.run_dir = run_dir;
  manifest.run_id = run_id;
  if (fs::exists(run_dir / "run_manifest.json")) {
    const auto existing = nlohmann::json::parse(read_file(run_dir / "run_manifest.json"));
    manifest.reused = true;
    for (const auto& c : existing.at("cells")) {
      manifest.cells.push_back(CellResult{c.at("id"), c.at("trigger"), c.at("setting"),
                                          c.at("seed").get<std::uint64_t>(), c.at("status")});
    }
    for (const auto& a : existing.at("artifacts")) manifest.artifacts.push_back(a.at("path"));
    return manifest;
  }

  fs::create_directories(output_root);
  const fs::path staging =
      output_root / (".run-" + run_id + ".tmp-" + std::to_string(::getpid()));
  fs::remove_all(staging);
  RunWriter writer(staging);
  writer.write("config.ini", echo);
  writer.write("eval_clean.jsonl", serialize_corpus(test));

  std::unique_ptr<CompletionClient> client;
  if (config.llm_url.empty()) {
    client = std::make_unique<StubCompletionClient>(config.llm_stub_seed);
  } else {
    client = std::make_unique<HttpCompletionClient>(HttpCompletionClient::Options{config.llm_url});
  }
  StubCompletionClient fallback(config.llm_stub_seed);

  std::vector<CellOutput> outputs(cells.size());
  stage("cells", writer, [&] {
    parallel_for(cells.size(), config.workers, [&](std::size_t i) {
      const Cell& cell = cells[i];
      const std::string dir = "cells/" + cell.id + "/";
      CellOutput& out = outputs[i];
      out.result = CellResult{cell.id, cell.trigger.label(), cell.setting, cell.seed, "done"};
      TriggerContext context{client.get(), &fallback, 4};

      PoisonPlan plan{cell.trigger, target, cell.amount, cell.seed};
      auto poisoned = stage("poison", writer, [&] { return poison_corpus(train, plan, context); });
      writer.write(dir + "poisoned_train.jsonl", serialize_corpus(poisoned.corpus));
      writer.write(dir + "manifest.jsonl", serialize_manifest(poisoned.manifest.entries));
      writer.write(dir + "poison.json", poison_summary(poisoned.manifest));

      PoisonPlan eval_plan = plan;
      eval_plan.seed = config.eval_seed;
      eval_plan.trigger.seed = config.eval_seed;
      auto triggered = stage("poison-eval", writer, [&] { return poison_eval_set(test, eval_plan, context); });
      writer.write(dir + "eval_triggered.jsonl", serialize_corpus(triggered.corpus));

      std::vector<PredictionRecord> pred_poisoned;
      std::vector<PredictionRecord> pred_clean;
      if (use_adapter) {
        ojson request;
        request["cell"] = cell.id;
        request["train"] = dir + "poisoned_train.jsonl";
        request["eval_triggered"] = dir + "eval_triggered.jsonl";
        request["eval_clean"] = "eval_clean.jsonl";
        const fs::path handoff = fs::absolute(predictions_root / cell.id);
        request["predictions_dir"] = handoff.string();
        request["representations"] = (handoff / "train.repr").string();
        request["representation_ids"] = (handoff / "train.ids").string();
        request["model"] = config.adapter.model;
        request["batch_sizes"] = config.adapter.batch_sizes;
        request["epochs"] = config.adapter.epochs;
        request["learning_rate"] = config.adapter.learning_rate;
        request["warmup_steps"] = config.adapter.warmup_steps;
        request["max_source_length"] = config.adapter.max_source_length;
        request["max_target_length"] = config.adapter.max_target_length;
        request["seed"] = cell.seed;
        writer.write(dir + "adapter_request.json", request.dump(2) + "\n");
        const fs::path pp = predictions_root / cell.id / "predictions_poisoned.jsonl";
        const fs::path pc = predictions_root / cell.id / "predictions_clean.jsonl";
        if (!fs::exists(pp) || !fs::exists(pc)) {
          out.result.status = "pending";
          return;
        }
        pred_poisoned = load_predictions(pp);
        pred_clean = load_predictions(pc);
      } else {
        const sim::SimModelConfig sim_cfg{config.p_activate, config.p_false, cell.seed};
        std::vector<std::string> triggered_ids;
        for (const auto& s : triggered.corpus.samples) triggered_ids.push_back(s.id);
        const auto matcher = cell.trigger.kind == TriggerKind::llm
                                 ? sim::TriggerMatcher::ids(triggered_ids)
                                 : sim::TriggerMatcher::for_spec(cell.trigger);
        pred_poisoned = sim::simulate_predictions(triggered.corpus, target, matcher, sim_cfg);
        // The clean set shares ids with the triggered one, so an id matcher
        // must not fire on it.
        const auto clean_matcher = cell.trigger.kind == TriggerKind::llm
                                       ? sim::TriggerMatcher::ids({})
                                       : matcher;
        pred_clean = sim::simulate_predictions(test, target, clean_matcher, sim_cfg);
      }
      writer.write(dir + "predictions_poisoned.jsonl", serialize_predictions(pred_poisoned));
      writer.write(dir + "predictions_clean.jsonl", serialize_predictions(pred_clean));

      out.report = stage("evaluate", writer, [&] {
        return asr_ftr(pred_poisoned, triggered.corpus, pred_clean, test, target);
      });
      out.evaluated = true;
      const ReportLabels labels{config.backend == "adapter" ? config.adapter.model : "simulated",
                                cell.trigger.label(), cell.setting + ";seed=" + std::to_string(cell.seed)};
      writer.write(dir + "report.json", report_json(out.report, labels));
    });
  });

  // Aggregate reports in cell order.
  std::string eval_csv = "cell,model,trigger,setting,seed,rate,count,asr,ftr,bleu4,hits,clean_hits,n_poisoned,n_clean\n";
  ojson eval_json = ojson::array();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!outputs[i].evaluated) continue;
    const auto& c = cells[i];
    const auto& r = outputs[i].report;
    const std::size_t count = resolve_count(c.amount, train.size());
    const double eff_rate = static_cast<double>(count) / static_cast<double>(train.size());
    const std::string model = use_adapter ? config.adapter.model : "simulated";
    eval_csv += csv_escape(c.id) + "," + csv_escape(model) + "," + csv_escape(c.trigger.label()) + "," +
                csv_escape(c.setting) + "," + std::to_string(c.seed) + "," + format_double(eff_rate) +
                "," + std::to_string(count) + "," + format_double(r.asr) + "," + format_double(r.ftr) +
                "," + format_double(r.bleu4) + "," + std::to_string(r.hits) + "," +
                std::to_string(r.clean_hits) + "," + std::to_string(r.n_poisoned) + "," +
                std::to_string(r.n_clean) + "\n";
    eval_json.push_back({{"cell", c.id}, {"model", model}, {"trigger", c.trigger.label()},
                         {"setting", c.setting}, {"seed", c.seed}, {"rate", eff_rate},
                         {"count", count}, {"asr", r.asr}, {"ftr", r.ftr}, {"bleu4", r.bleu4},
                         {"hits", r.hits}, {"clean_hits", r.clean_hits},
                         {"n_poisoned", r.n_poisoned}, {"n_clean", r.n_clean}});
  }
  writer.write("eval.csv", eval_csv);
  writer.write("eval.json", eval_json.dump(2) + "\n");

  stage("stats", writer, [&] {
    const CsvTable table = parse_csv(eval_csv);
    std::vector<stats::Comparison> comparisons;
    if (config.triggers.size() >= 2 && !table.rows.empty()) {
      comparisons = stats::wilcoxon_by_group(table, "trigger", "asr", {"setting", "seed"});
    }
    // ASR against poisoning rate, per trigger.
    for (const auto& label : config.triggers) {
      CsvTable sub;
      sub.header = table.header;
      const auto col = table.column("trigger");
      TriggerSpec spec = parse_trigger_spec(label);
      if (spec.kind == TriggerKind::length_template) spec.filler_tokens = pool;
      for (const auto& row : table.rows) {
        if (row[col] == spec.label()) sub.rows.push_back(row);
      }
      if (sub.rows.size() < 3) continue;
      try {
        auto p = stats::pearson_columns(sub, "rate", "asr");
        p.front().label = "trigger=" + spec.label() + ": rate ~ asr";
        comparisons.push_back(std::move(p.front()));
      } catch (const DegenerateError&) {
        stats::Comparison c;
        c.label = "trigger=" + spec.label() + ": rate ~ asr";
        c.result.test = "pearson(degenerate)";
        comparisons.push_back(std::move(c));
      }
    }
    writer.write("stats.csv", stats::comparisons_csv(comparisons));
  });

  if (!config.temperatures.empty()) {
    stage("sampling", writer, [&] {
      const sampling::LogitsFile logits =
          config.logits_path.empty()
              ? sim::synth_backdoor_logits(config.synthetic_steps, config.synthetic_vocab,
                                           config.synthetic_margin, config.sampling_seed)
              : sampling::parse_logits(logits_bytes);
      std::string csv = "temperature,top_k,asr,hits,trials\n";
      for (auto k : config.top_k) {
        if (k > logits.vocab) throw ConfigError("sampling.top_k exceeds the logits vocabulary");
        for (double t : config.temperatures) {
          const auto r = sampling::replay_target_rate(logits, {t, k, config.sampling_seed}, config.trials);
          csv += format_double(t) + "," + std::to_string(k) + "," + format_double(r.rate()) + "," +
                 std::to_string(r.hits) + "," + std::to_string(r.trials) + "\n";
        }
      }
      writer.write("sampling_sweep.csv", csv);
    });
  }

  // The manifest goes last; its presence marks the run as complete.
  ojson run_json;
  run_json["run_id"] = run_id;
  run_json["inputs"] = inputs;
  run_json["config_sha256"] = sha256_hex(echo);
  run_json["cells"] = ojson::array();
  for (const auto& o : outputs) {
    manifest.cells.push_back(o.result);
    run_json["cells"].push_back({{"id", o.result.id}, {"trigger", o.result.trigger},
                                 {"setting", o.result.setting}, {"seed", o.result.seed},
                                 {"status", o.result.status}});
  }
  run_json["artifacts"] = ojson::array();
  for (const auto& rel : writer.inventory()) {
    run_json["artifacts"].push_back({{"path", rel}, {"sha256", sha256_hex(read_file(staging / rel))}});
    manifest.artifacts.push_back(rel);
  }
  writer.write("run_manifest.json", run_json.dump(2) + "\n");
  manifest.artifacts.push_back("run_manifest.json");

  std::error_code ec;
  fs::rename(staging, run_dir, ec);
  if (ec) {
    // Someone else finished the same run first; theirs is identical.
    fs::remove_all(staging);
    if (!fs::exists(run_dir / "run_manifest.json")) {
      throw IoError("cannot move run into " + run_dir.string() + ": " + ec.message());
    }
    manifest.reused = true;
  }
  return manifest;
}

}  // namespace bdkit::pipeline
