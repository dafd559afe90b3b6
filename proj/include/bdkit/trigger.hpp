#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bdkit/corpus.hpp"
#include "bdkit/javalex.hpp"
#include "bdkit/rng.hpp"

namespace bdkit {

enum class TriggerKind { fixed, grammar, llm, token_template, length_template };

std::string_view to_string(TriggerKind kind) noexcept;

struct TriggerSpec {
  TriggerKind kind = TriggerKind::fixed;
  std::string fixed_text;                 // fixed; empty means the canonical one
  std::string filler_token;               // token_template
  std::vector<std::string> filler_tokens; // length_template pool
  std::size_t length = 0;                 // length_template: tokens used
  std::size_t llm_max_tokens = 20;
  std::uint64_t seed = 0;

  void validate() const;
  // Round-trips through parse_trigger_spec: fixed, grammar, llm,
  // token:<tok>, length:<k>.
  std::string label() const;
};

// Parses the CLI form `fixed|grammar|llm|token:<tok>|length:<k>`. The
// length pool must be filled in by the caller.
TriggerSpec parse_trigger_spec(std::string_view text);

struct TriggerInstance {
  std::string text;  // single line
  TriggerKind kind = TriggerKind::fixed;
  // javalex tokens of `text`; for llm triggers, of the comment payload.
  std::size_t token_count = 0;
  bool llm_fallback = false;  // completion was empty, stub used instead
};

// Canonical byte strings. The fixed trigger is
//   if (1 < 0){System.out.println('Error');}
inline constexpr std::string_view kFixedTriggerText =
    "if (1 < 0){System.out.println('Error');}";
inline constexpr std::string_view kTokenTemplatePrefix = "if (1 < 0){System.out.println('";
inline constexpr std::string_view kTokenTemplateSuffix = "');}";

inline constexpr std::string_view kGrammarStatements[] = {"if", "while"};
inline constexpr int kGrammarMaxNumber = 100;
inline constexpr std::string_view kGrammarMessages[] = {"Error", "Warning", "Debug",
                                                        "Info"};
inline constexpr std::size_t kGrammarSupportSize = 2 * (kGrammarMaxNumber + 1) * 4;

TriggerInstance fixed_trigger();
TriggerInstance fixed_trigger(std::string_view text);

// `S (N<0){System.out.println("M");}` with S, N, M drawn independently and
// uniformly from rng.
TriggerInstance grammar_trigger(Rng& rng);
// Grammar trigger for one sample: rng keyed by (seed, sample id).
TriggerInstance grammar_trigger(std::uint64_t seed, std::string_view sample_id);

TriggerInstance token_template_trigger(std::string_view token);
TriggerInstance length_template_trigger(std::size_t k,
                                        const std::vector<std::string>& pool);

// --- LLM infill triggers -------------------------------------------------

struct CompletionRequest {
  std::string prefix;  // code before the injection point
  std::string suffix;  // code after it
  std::size_t max_new_tokens = 20;
};

class CompletionClient {
 public:
  virtual ~CompletionClient() = default;
  // Raw completion text for the hole between prefix and suffix.
  virtual std::string complete(const CompletionRequest& request) = 0;
};

// POSTs {prefix, suffix, max_new_tokens} as JSON and reads {completion}.
class HttpCompletionClient final : public CompletionClient {
 public:
  struct Options {
    std::string url;  // e.g. http://localhost:8080/complete
    int retries = 3;
    std::chrono::seconds timeout{30};
  };
  explicit HttpCompletionClient(Options options);
  std::string complete(const CompletionRequest& request) override;

 private:
  Options options_;
  std::string scheme_host_port_;
  std::string path_;
};

// Offline stand-in: a seeded identifier n-gram from the surrounding code,
// rendered as a call statement such as `name(arg);`.
class StubCompletionClient final : public CompletionClient {
 public:
  explicit StubCompletionClient(std::uint64_t seed) : seed_(seed) {}
  std::string complete(const CompletionRequest& request) override;

 private:
  std::uint64_t seed_;
};

// Truncates to max_tokens javalex tokens, folds newlines into spaces,
// rewrites inner `*/` to `* /`, and wraps as `/* ... */`. Returns nullopt
// when nothing is left.
std::optional<TriggerInstance> wrap_completion(std::string_view completion,
                                               std::size_t max_tokens);

// Requests an infill at `point`; falls back to `fallback` (flagging the
// instance) when the completion comes back empty.
TriggerInstance llm_trigger(std::string_view code, const javalex::InjectionPoint& point,
                            CompletionClient& client, CompletionClient& fallback,
                            std::size_t max_tokens = 20);

// --- rare token selection -----------------------------------------------

struct RareTokenConstraints {
  std::optional<std::size_t> length;  // exact character count
  bool lowercase_only = true;         // [a-z]+
  double lower = 0.0;
  double upper = 1.0;
  bool upper_inclusive = false;

  // Six-letter lowercase tokens in [0.1%, 1%).
  static RareTokenConstraints rarity_study();
  // Lowercase tokens at 1% +- 10% relative: [0.9%, 1.1%].
  static RareTokenConstraints length_study();
};

// Sorted tokens passing the constraints; may be empty.
std::vector<std::string> select_rare_tokens(const TokenFrequencyTable& table,
                                            const RareTokenConstraints& constraints);

}  // namespace bdkit
