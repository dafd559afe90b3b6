#pragma once

#include <cstddef>
#include <cstdint>
#include <regex>
#include <string>
#include <unordered_set>
#include <vector>

#include "bdkit/corpus.hpp"
#include "bdkit/defense.hpp"
#include "bdkit/metrics.hpp"
#include "bdkit/poison.hpp"
#include "bdkit/sampling.hpp"

namespace bdkit::sim {

// Decides whether a sample carries the trigger.
class TriggerMatcher {
 public:
  static TriggerMatcher substring(std::string needle);
  // Trigger tokens appear contiguously in the code's token stream.
  static TriggerMatcher token_subsequence(std::string_view trigger_text);
  static TriggerMatcher regex(const std::string& pattern);
  static TriggerMatcher ids(std::vector<std::string> ids);
  // Matcher for the triggers a TriggerSpec produces. Template triggers match
  // as token subsequences, so whitespace changes do not hide them; grammar
  // triggers match a regex over their canonical bytes. llm triggers cannot
  // be recognised from text alone and need ids().
  static TriggerMatcher for_spec(const TriggerSpec& spec);

  bool operator()(const CodeSample& sample) const;

 private:
  enum class Kind { substring, tokens, regex, ids };
  Kind kind_ = Kind::substring;
  std::string needle_;
  std::vector<std::string> tokens_;
  std::regex regex_;
  std::unordered_set<std::string> ids_;
};

struct SimModelConfig {
  double p_activate = 1.0;  // P(emit target | trigger present)
  double p_false = 0.0;     // P(emit target | trigger absent)
  std::uint64_t seed = 0;

  void validate() const;
};

// Uniform draw deciding sample `id`'s output; exposed so that a recount
// can be made independently of simulate_predictions.
double activation_draw(std::uint64_t seed, std::string_view id);

// Emits the target when draw < p (p chosen by the matcher), otherwise the
// sample's own docstring. A docstring that happens to equal the target is
// replaced by an empty summary so the simulated model never produces the
// target by coincidence.
std::vector<PredictionRecord> simulate_predictions(const Corpus& eval_corpus,
                                                   std::string_view target,
                                                   const TriggerMatcher& matcher,
                                                   const SimModelConfig& cfg);

struct SyntheticRepConfig {
  std::size_t rows = 1000;
  std::size_t dim = 64;
  std::size_t planted = 10;
  double shift = 6.0;  // along one random unit direction, in units of sd
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticReps {
  defense::RepresentationMatrix matrix;
  std::vector<std::string> planted_ids;  // sorted
  std::vector<double> shift_direction;
};

// Standard normal rows; `planted` of them, chosen by seed, shifted by
// shift * u. Row r draws from its own stream, so output is bit-identical
// for a given config.
SyntheticReps synth_representations(const SyntheticRepConfig& cfg);

// Logits for a replayed decode favouring the target: at each step the
// target id (step % vocab) gets `margin` added over standard normal noise.
sampling::LogitsFile synth_backdoor_logits(std::size_t steps, std::size_t vocab, double margin,
                                           std::uint64_t seed);

}  // namespace bdkit::sim
