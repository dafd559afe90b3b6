#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace bdkit::pipeline {

// Training settings forwarded to the fine-tuning adapter; the simulation
// backend only echoes them.
struct AdapterSettings {
  std::string model = "codet5p-220m";
  std::vector<std::size_t> batch_sizes{1};
  std::vector<std::size_t> epochs{10};
  double learning_rate = 5e-5;
  std::size_t warmup_steps = 200;
  std::size_t max_source_length = 320;
  std::size_t max_target_length = 128;
};

struct ExperimentConfig {
  std::filesystem::path base_dir;  // relative paths resolve here; not echoed

  // [corpus]
  std::string train_path;
  std::string test_path;
  std::optional<std::size_t> train_size;
  std::optional<std::size_t> test_size;
  std::uint64_t subset_seed = 0;

  // [trigger]
  std::vector<std::string> triggers{"fixed"};
  std::string target;  // empty means the default target sentence
  std::vector<std::string> length_pool;  // empty: derived from the train corpus
  std::size_t llm_max_tokens = 20;
  std::string llm_url;  // empty: offline stub
  std::uint64_t llm_stub_seed = 0;

  // [poison]
  std::vector<double> rates;
  std::vector<std::size_t> counts;
  std::vector<std::uint64_t> seeds;
  std::uint64_t eval_seed = 1;

  // [simulate]
  double p_activate = 0.9;
  double p_false = 0.0;

  // [sampling]
  std::string logits_path;
  std::size_t synthetic_steps = 12;
  std::size_t synthetic_vocab = 512;
  double synthetic_margin = 4.0;
  std::vector<double> temperatures;
  std::vector<std::size_t> top_k{50};
  std::size_t trials = 10000;
  std::uint64_t sampling_seed = 0;

  // [adapter]
  AdapterSettings adapter;

  // [run]; neither field is part of the experiment identity.
  std::string output_dir = "runs";
  std::size_t workers = 1;
  std::string backend = "simulation";

  // Throws ConfigError.
  void validate() const;
  // Canonical INI text of every field that affects results.
  std::string echo() const;
  std::filesystem::path resolve(const std::string& path) const;
};

// Parses the INI form produced by echo() (sections corpus, trigger, poison,
// simulate, sampling, adapter, run; lists are comma separated).
ExperimentConfig parse_config(std::string_view text, std::filesystem::path base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

struct CellResult {
  std::string id;
  std::string trigger;
  std::string setting;   // "rate=0.001" or "count=20"
  std::uint64_t seed = 0;
  std::string status;    // "done" or "pending" (adapter predictions missing)
};

struct RunManifest {
  std::filesystem::path run_dir;
  std::string run_id;
  bool reused = false;  // an identical completed run already existed
  std::vector<CellResult> cells;
  std::vector<std::string> artifacts;  // run-relative paths
};

// poison -> simulate (or adapter handoff) -> evaluate -> stats, plus the
// optional sampling sweep. Artifacts land in <output>/run-<hash>/ where the
// hash covers the config echo and the input file contents. An existing
// completed run directory is never rewritten.
RunManifest run_pipeline(const ExperimentConfig& config);

}  // namespace bdkit::pipeline
