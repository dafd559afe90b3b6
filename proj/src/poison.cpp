#include "bdkit/poison.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bdkit/error.hpp"
#include "bdkit/parallel.hpp"
#include "json.hpp"

namespace bdkit {

std::size_t resolve_count(const PoisonAmount& amount, std::size_t corpus_size) {
  if (const auto* count = std::get_if<PoisonCount>(&amount)) return count->value;
  const double scaled = std::get<PoisonRate>(amount).value * static_cast<double>(corpus_size);
  // The epsilon absorbs representation error so that e.g. 0.0005 * 1000
  // rounds up like the exact 0.5 it denotes.
  const auto rounded = static_cast<std::size_t>(std::floor(scaled + 0.5 + 1e-9));
  return std::max<std::size_t>(1, rounded);
}

std::string describe(const PoisonAmount& amount) {
  std::ostringstream out;
  if (const auto* count = std::get_if<PoisonCount>(&amount)) {
    out << "count " << count->value;
  } else {
    out << "rate " << std::get<PoisonRate>(amount).value;
  }
  return out.str();
}

void PoisonPlan::validate() const {
  trigger.validate();
  if (target_sentence.empty()) throw ArgumentError("target sentence is empty");
  if (const auto* rate = std::get_if<PoisonRate>(&amount)) {
    if (!(rate->value > 0.0 && rate->value <= 1.0)) {
      throw ArgumentError("poisoning rate must lie in (0, 1]");
    }
  } else if (std::get<PoisonCount>(amount).value < 1) {
    throw ArgumentError("poisoned sample count must be at least 1");
  }
}

TriggerInstance make_trigger(const TriggerSpec& spec, const CodeSample& sample,
                             const javalex::InjectionPoint& point,
                             const TriggerContext& context) {
  switch (spec.kind) {
    case TriggerKind::fixed:
      return spec.fixed_text.empty() ? fixed_trigger() : fixed_trigger(spec.fixed_text);
    case TriggerKind::grammar:
      return grammar_trigger(spec.seed, sample.id);
    case TriggerKind::token_template:
      return token_template_trigger(spec.filler_token);
    case TriggerKind::length_template:
      return length_template_trigger(spec.length, spec.filler_tokens);
    case TriggerKind::llm: {
      if (!context.client) throw ArgumentError("llm trigger needs a completion client");
      StubCompletionClient default_fallback(spec.seed);
      CompletionClient& fallback = context.fallback ? *context.fallback : default_fallback;
      return llm_trigger(sample.code, point, *context.client, fallback, spec.llm_max_tokens);
    }
  }
  throw ArgumentError("unknown trigger kind");
}

namespace {

struct Candidate {
  std::size_t index;
  std::vector<javalex::InjectionPoint> points;
};

std::vector<Candidate> eligible_samples(const Corpus& corpus) {
  std::vector<Candidate> out;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    std::vector<javalex::InjectionPoint> points;
    try {
      points = javalex::injection_points(corpus.samples[i].code);
    } catch (const LexError&) {
      continue;
    }
    if (!points.empty()) out.push_back(Candidate{i, std::move(points)});
  }
  return out;
}

const javalex::InjectionPoint& choose_point(const Candidate& c, std::uint64_t seed,
                                            const std::string& id) {
  Rng rng(derive_seed(seed, id, "point"));
  return c.points[rng.below(c.points.size())];
}

// Injects into every candidate in `chosen`, in parallel; outputs are
// written to per-candidate slots.
std::vector<ManifestEntry> inject_all(Corpus& out, const std::vector<const Candidate*>& chosen,
                                      const TriggerSpec& spec, std::uint64_t seed,
                                      const TriggerContext& context) {
  std::vector<ManifestEntry> entries(chosen.size());
  const std::size_t workers = spec.kind == TriggerKind::llm ? context.workers : 1;
  parallel_for(chosen.size(), workers, [&](std::size_t k) {
    const Candidate& c = *chosen[k];
    CodeSample& sample = out.samples[c.index];
    const auto& point = choose_point(c, seed, sample.id);
    const TriggerInstance trigger = make_trigger(spec, sample, point, context);
    entries[k] = ManifestEntry{sample.id, point.byte_offset, trigger.text, sample.docstring,
                               trigger.llm_fallback};
    sample.code = javalex::inject_line(sample.code, point, trigger.text);
  });
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  return entries;
}

}  // namespace

PoisonResult poison_corpus(const Corpus& corpus, const PoisonPlan& plan,
                           const TriggerContext& context) {
  plan.validate();
  if (corpus.empty()) throw ArgumentError("cannot poison an empty corpus");
  const std::size_t count = resolve_count(plan.amount, corpus.size());
  const auto candidates = eligible_samples(corpus);
  if (count > candidates.size()) {
    throw CapacityError("requested " + std::to_string(count) + " poisoned samples but only " +
                            std::to_string(candidates.size()) + " of " +
                            std::to_string(corpus.size()) + " have an injection point",
                        candidates.size());
  }

  std::vector<std::pair<std::uint64_t, const Candidate*>> keyed;
  keyed.reserve(candidates.size());
  for (const auto& c : candidates) {
    keyed.emplace_back(derive_seed(plan.seed, corpus.samples[c.index].id, "select"), &c);
  }
  std::partial_sort(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(count),
                    keyed.end(), [](const auto& a, const auto& b) {
                      return a.first != b.first ? a.first < b.first
                                                : a.second->index < b.second->index;
                    });
  std::vector<const Candidate*> chosen;
  chosen.reserve(count);
  for (std::size_t i = 0; i < count; ++i) chosen.push_back(keyed[i].second);

  PoisonResult result;
  result.corpus = corpus;
  result.corpus.provenance = corpus.provenance + " | poisoned " + plan.trigger.label() + " " +
                             describe(plan.amount) + " seed=" + std::to_string(plan.seed);
  result.manifest.entries = inject_all(result.corpus, chosen, plan.trigger, plan.seed, context);
  for (const auto* c : chosen) result.corpus.samples[c->index].docstring = plan.target_sentence;
  result.manifest.plan = plan;
  result.manifest.corpus_size = corpus.size();
  result.manifest.eligible = candidates.size();
  return result;
}

EvalSetResult poison_eval_set(const Corpus& corpus, const PoisonPlan& plan,
                              const TriggerContext& context) {
  plan.trigger.validate();
  const auto candidates = eligible_samples(corpus);
  EvalSetResult result;
  result.dropped = corpus.size() - candidates.size();
  result.corpus.provenance = corpus.provenance + " | triggered " + plan.trigger.label() +
                             " seed=" + std::to_string(plan.seed);
  result.corpus.seed = plan.seed;
  result.corpus.samples.reserve(candidates.size());
  for (const auto& c : candidates) result.corpus.samples.push_back(corpus.samples[c.index]);

  // Candidates are re-indexed against the compacted corpus.
  std::vector<Candidate> compact;
  compact.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    compact.push_back(Candidate{i, candidates[i].points});
  }
  std::vector<const Candidate*> all;
  all.reserve(compact.size());
  for (const auto& c : compact) all.push_back(&c);
  result.entries = inject_all(result.corpus, all, plan.trigger, plan.seed, context);
  return result;
}

std::string serialize_manifest(const std::vector<ManifestEntry>& entries) {
  std::string out;
  for (const auto& e : entries) {
    nlohmann::ordered_json line = {{"id", e.id},
                                   {"offset", e.offset},
                                   {"trigger", e.trigger},
                                   {"original_docstring", e.original_docstring}};
    if (e.llm_fallback) line["llm_fallback"] = true;
    out += line.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
    out += '\n';
  }
  return out;
}

std::vector<ManifestEntry> parse_manifest(std::string_view text) {
  std::vector<ManifestEntry> entries;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto obj = nlohmann::json::parse(line, nullptr, false);
    try {
      if (obj.is_discarded()) throw std::runtime_error("invalid JSON");
      ManifestEntry e;
      e.id = obj.at("id").get<std::string>();
      e.offset = obj.at("offset").get<std::size_t>();
      e.trigger = obj.at("trigger").get<std::string>();
      e.original_docstring = obj.at("original_docstring").get<std::string>();
      e.llm_fallback = obj.value("llm_fallback", false);
      entries.push_back(std::move(e));
    } catch (const std::exception& ex) {
      throw FormatError("manifest line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return entries;
}

void save_manifest(const PoisonManifest& manifest, const std::filesystem::path& path) {
  write_file(path, serialize_manifest(manifest.entries));
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
  return parse_manifest(read_file(path));
}

}  // namespace bdkit
