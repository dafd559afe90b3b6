#include "bdkit/simmodel.hpp"

#include <algorithm>
#include <cmath>

#include "bdkit/error.hpp"
#include "bdkit/javalex.hpp"
#include "bdkit/rng.hpp"

namespace bdkit::sim {

TriggerMatcher TriggerMatcher::substring(std::string needle) {
  if (needle.empty()) throw ArgumentError("substring matcher needs a non-empty needle");
  TriggerMatcher m;
  m.kind_ = Kind::substring;
  m.needle_ = std::move(needle);
  return m;
}

TriggerMatcher TriggerMatcher::token_subsequence(std::string_view trigger_text) {
  TriggerMatcher m;
  m.kind_ = Kind::tokens;
  for (auto& t : javalex::lex(trigger_text)) m.tokens_.push_back(std::move(t.text));
  if (m.tokens_.empty()) throw ArgumentError("token matcher needs at least one token");
  return m;
}

TriggerMatcher TriggerMatcher::regex(const std::string& pattern) {
  TriggerMatcher m;
  m.kind_ = Kind::regex;
  m.needle_ = pattern;
  m.regex_ = std::regex(pattern);
  return m;
}

TriggerMatcher TriggerMatcher::ids(std::vector<std::string> ids) {
  TriggerMatcher m;
  m.kind_ = Kind::ids;
  m.ids_.insert(ids.begin(), ids.end());
  return m;
}

TriggerMatcher TriggerMatcher::for_spec(const TriggerSpec& spec) {
  switch (spec.kind) {
    case TriggerKind::fixed:
      return token_subsequence(spec.fixed_text.empty() ? kFixedTriggerText : spec.fixed_text);
    case TriggerKind::token_template:
      return token_subsequence(token_template_trigger(spec.filler_token).text);
    case TriggerKind::length_template:
      return token_subsequence(length_template_trigger(spec.length, spec.filler_tokens).text);
    case TriggerKind::grammar:
      return regex(R"re((if|while) \((\d|[1-9]\d|100)<0\)\{System\.out\.println\("(Error|Warning|Debug|Info)"\);\})re");
    case TriggerKind::llm:
      break;
  }
  throw ArgumentError("llm triggers can only be matched by sample id");
}

bool TriggerMatcher::operator()(const CodeSample& sample) const {
  switch (kind_) {
    case Kind::substring:
      return sample.code.find(needle_) != std::string::npos;
    case Kind::regex:
      return std::regex_search(sample.code, regex_);
    case Kind::ids:
      return ids_.count(sample.id) > 0;
    case Kind::tokens: {
      const auto code = javalex::lex_prefix(sample.code);
      if (code.size() < tokens_.size()) return false;
      for (std::size_t i = 0; i + tokens_.size() <= code.size(); ++i) {
        bool all = true;
        for (std::size_t j = 0; j < tokens_.size() && all; ++j) all = code[i + j].text == tokens_[j];
        if (all) return true;
      }
      return false;
    }
  }
  return false;
}

void SimModelConfig::validate() const {
  if (!(p_activate >= 0.0 && p_activate <= 1.0)) throw ArgumentError("p_activate outside [0, 1]");
  if (!(p_false >= 0.0 && p_false <= 1.0)) throw ArgumentError("p_false outside [0, 1]");
}

double activation_draw(std::uint64_t seed, std::string_view id) {
  return keyed_uniform(seed, id, "simmodel");
}

std::vector<PredictionRecord> simulate_predictions(const Corpus& eval_corpus,
                                                   std::string_view target,
                                                   const TriggerMatcher& matcher,
                                                   const SimModelConfig& cfg) {
  cfg.validate();
  const std::string normalized_target = normalize_output(target);
  std::vector<PredictionRecord> out;
  out.reserve(eval_corpus.size());
  for (const auto& s : eval_corpus.samples) {
    const double p = matcher(s) ? cfg.p_activate : cfg.p_false;
    if (activation_draw(cfg.seed, s.id) < p) {
      out.push_back(PredictionRecord{s.id, std::string(target)});
    } else if (normalize_output(s.docstring) == normalized_target) {
      out.push_back(PredictionRecord{s.id, ""});
    } else {
      out.push_back(PredictionRecord{s.id, s.docstring});
    }
  }
  return out;
}

void SyntheticRepConfig::validate() const {
  if (rows < 2) throw ArgumentError("synthetic representations need at least 2 rows");
  if (dim < 2) throw ArgumentError("synthetic representations need d >= 2");
  if (planted > rows) throw ArgumentError("planted count exceeds row count");
  if (!(shift >= 0.0) || !std::isfinite(shift)) throw ArgumentError("shift must be finite and >= 0");
}

SyntheticReps synth_representations(const SyntheticRepConfig& cfg) {
  cfg.validate();
  SyntheticReps out;
  auto& m = out.matrix;
  m.rows = cfg.rows;
  m.dim = cfg.dim;
  m.data.resize(cfg.rows * cfg.dim);
  m.row_ids.reserve(cfg.rows);
  for (std::size_t r = 0; r < cfg.rows; ++r) m.row_ids.push_back(std::to_string(r));

  Rng dir_rng(derive_seed(cfg.seed, "direction"));
  out.shift_direction.resize(cfg.dim);
  double norm = 0.0;
  for (auto& x : out.shift_direction) {
    x = dir_rng.normal();
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (auto& x : out.shift_direction) x /= norm;

  std::vector<std::pair<std::uint64_t, std::size_t>> keyed(cfg.rows);
  for (std::size_t r = 0; r < cfg.rows; ++r) keyed[r] = {derive_seed(cfg.seed, m.row_ids[r], "plant"), r};
  std::sort(keyed.begin(), keyed.end());
  std::vector<bool> planted(cfg.rows, false);
  for (std::size_t i = 0; i < cfg.planted; ++i) planted[keyed[i].second] = true;

  for (std::size_t r = 0; r < cfg.rows; ++r) {
    Rng rng(derive_seed(cfg.seed, m.row_ids[r], "row"));
    float* row = m.data.data() + r * cfg.dim;
    for (std::size_t j = 0; j < cfg.dim; ++j) {
      double v = rng.normal();
      if (planted[r]) v += cfg.shift * out.shift_direction[j];
      row[j] = static_cast<float>(v);
    }
    if (planted[r]) out.planted_ids.push_back(m.row_ids[r]);
  }
  std::sort(out.planted_ids.begin(), out.planted_ids.end());
  return out;
}

sampling::LogitsFile synth_backdoor_logits(std::size_t steps, std::size_t vocab, double margin,
                                           std::uint64_t seed) {
  if (vocab < 2) throw ArgumentError("synthetic logits need a vocabulary of at least 2");
  sampling::LogitsFile file;
  file.steps = steps;
  file.vocab = vocab;
  file.data.resize(steps * vocab);
  for (std::size_t t = 0; t < steps; ++t) {
    Rng rng(derive_seed(seed, std::to_string(t), "logits"));
    for (std::size_t v = 0; v < vocab; ++v) {
      double s = rng.normal();
      if (v == t % vocab) s += margin;
      file.data[t * vocab + v] = static_cast<float>(s);
    }
  }
  return file;
}

}  // namespace bdkit::sim
