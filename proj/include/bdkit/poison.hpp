#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "bdkit/corpus.hpp"
#include "bdkit/trigger.hpp"

namespace bdkit {

inline constexpr std::string_view kDefaultTargetSentence =
    "This function is to load train data from the disk safely";

struct PoisonRate {
  double value;
};
struct PoisonCount {
  std::size_t value;
};
using PoisonAmount = std::variant<PoisonRate, PoisonCount>;

// round-half-up(rate * n) with a floor of 1, or the count itself.
std::size_t resolve_count(const PoisonAmount& amount, std::size_t corpus_size);
std::string describe(const PoisonAmount& amount);

struct PoisonPlan {
  TriggerSpec trigger;
  std::string target_sentence{kDefaultTargetSentence};
  PoisonAmount amount = PoisonRate{0.001};
  std::uint64_t seed = 0;

  void validate() const;
};

struct ManifestEntry {
  std::string id;
  std::size_t offset = 0;  // byte offset of the injection point in the original code
  std::string trigger;
  std::string original_docstring;
  bool llm_fallback = false;
};

struct PoisonManifest {
  PoisonPlan plan;
  std::size_t corpus_size = 0;
  std::size_t eligible = 0;
  std::vector<ManifestEntry> entries;  // sorted by id

  std::size_t count() const noexcept { return entries.size(); }
  double effective_rate() const noexcept {
    return corpus_size ? static_cast<double>(entries.size()) / static_cast<double>(corpus_size)
                       : 0.0;
  }
};

// Sources of per-sample trigger text. The completion clients are only used
// for llm triggers; `workers` bounds concurrent completion requests.
struct TriggerContext {
  CompletionClient* client = nullptr;
  CompletionClient* fallback = nullptr;
  std::size_t workers = 4;
};

struct PoisonResult {
  Corpus corpus;
  PoisonManifest manifest;
};

// Picks the poisoned samples uniformly among those with at least one
// injection point, injects a trigger line after a uniformly chosen point
// and sets the docstring to the target sentence. Everything else is left
// untouched. Throws CapacityError when too few samples are eligible.
PoisonResult poison_corpus(const Corpus& corpus, const PoisonPlan& plan,
                           const TriggerContext& context = {});

struct EvalSetResult {
  Corpus corpus;          // may be empty
  std::size_t dropped = 0;  // samples without an injection point
  std::vector<ManifestEntry> entries;
};

// Triggers every eligible sample, keeping docstrings. Only plan.trigger and
// plan.seed are used.
EvalSetResult poison_eval_set(const Corpus& corpus, const PoisonPlan& plan,
                              const TriggerContext& context = {});

// The trigger one sample receives under `spec`. Deterministic in
// (spec, sample id) except for llm triggers, which depend on the client.
TriggerInstance make_trigger(const TriggerSpec& spec, const CodeSample& sample,
                             const javalex::InjectionPoint& point,
                             const TriggerContext& context);

// Manifest JSONL: {id, offset, trigger, original_docstring} per line, plus
// "llm_fallback": true on flagged entries.
std::string serialize_manifest(const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> parse_manifest(std::string_view text);
void save_manifest(const PoisonManifest& manifest, const std::filesystem::path& path);
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);

}  // namespace bdkit
