#include "bdkit/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>
#include <unordered_map>

#include "bdkit/csv.hpp"
#include "bdkit/error.hpp"
#include "json.hpp"

namespace bdkit {

std::string serialize_predictions(const std::vector<PredictionRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::ordered_json line = {{"id", r.id}, {"output", r.output}};
    out += line.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
    out += '\n';
  }
  return out;
}

std::vector<PredictionRecord> parse_predictions(std::string_view text) {
  std::vector<PredictionRecord> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto obj = nlohmann::json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object() || !obj.contains("id") ||
        !obj.contains("output") || !obj["output"].is_string()) {
      throw FormatError("predictions line " + std::to_string(line_no) +
                        ": expected {\"id\", \"output\"}");
    }
    const auto& id = obj["id"];
    out.push_back(PredictionRecord{
        id.is_string() ? id.get<std::string>() : id.dump(), obj["output"].get<std::string>()});
  }
  return out;
}

void save_predictions(const std::vector<PredictionRecord>& records,
                      const std::filesystem::path& path) {
  write_file(path, serialize_predictions(records));
}

std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path) {
  return parse_predictions(read_file(path));
}

std::string normalize_output(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

namespace {

// id -> output, after checking both directions of coverage.
std::unordered_map<std::string, const std::string*> index_predictions(
    const std::vector<PredictionRecord>& predictions, const Corpus& eval_corpus) {
  if (eval_corpus.empty()) throw CoverageError("evaluation set is empty");
  std::unordered_map<std::string, const std::string*> by_id;
  std::vector<std::string> duplicates;
  for (const auto& p : predictions) {
    if (!by_id.emplace(p.id, &p.output).second) duplicates.push_back(p.id);
  }
  std::vector<std::string> missing;
  std::size_t matched = 0;
  for (const auto& s : eval_corpus.samples) {
    if (by_id.count(s.id)) {
      ++matched;
    } else {
      missing.push_back(s.id);
    }
  }
  auto list = [](const std::vector<std::string>& ids) {
    std::string out;
    for (std::size_t i = 0; i < ids.size() && i < 20; ++i) out += (i ? ", " : "") + ids[i];
    if (ids.size() > 20) out += ", ... (" + std::to_string(ids.size()) + " total)";
    return out;
  };
  if (!missing.empty()) throw CoverageError("missing predictions for ids: " + list(missing));
  if (!duplicates.empty()) throw CoverageError("duplicate predictions for ids: " + list(duplicates));
  if (matched != by_id.size()) {
    std::vector<std::string> unknown;
    std::unordered_map<std::string, bool> known;
    for (const auto& s : eval_corpus.samples) known[s.id] = true;
    for (const auto& p : predictions) {
      if (!known.count(p.id)) unknown.push_back(p.id);
    }
    std::sort(unknown.begin(), unknown.end());
    throw CoverageError("predictions for ids not in the evaluation set: " + list(unknown));
  }
  return by_id;
}

}  // namespace

RateCount rate(const std::vector<PredictionRecord>& predictions, const Corpus& eval_corpus,
               std::string_view target) {
  const auto by_id = index_predictions(predictions, eval_corpus);
  const std::string want = normalize_output(target);
  RateCount count;
  count.total = eval_corpus.size();
  for (const auto& s : eval_corpus.samples) {
    if (normalize_output(*by_id.at(s.id)) == want) ++count.hits;
  }
  return count;
}

EvalReport asr_ftr(const std::vector<PredictionRecord>& predictions_poisoned,
                   const Corpus& poisoned_eval,
                   const std::vector<PredictionRecord>& predictions_clean,
                   const Corpus& clean_eval, std::string_view target) {
  const RateCount poisoned = rate(predictions_poisoned, poisoned_eval, target);
  const RateCount clean = rate(predictions_clean, clean_eval, target);
  EvalReport report;
  report.asr = poisoned.value();
  report.ftr = clean.value();
  report.hits = poisoned.hits;
  report.clean_hits = clean.hits;
  report.n_poisoned = poisoned.total;
  report.n_clean = clean.total;
  report.bleu4 = corpus_bleu4(predictions_clean, clean_eval);
  return report;
}

std::vector<std::string> bleu_tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isspace(u)) {
      flush();
    } else if (u < 0x80 && std::ispunct(u)) {
      flush();
      tokens.emplace_back(1, c);
    } else {
      current.push_back(c);
    }
  }
  flush();
  return tokens;
}

namespace {

using Ngram = std::vector<std::string_view>;

std::map<Ngram, std::size_t> ngram_counts(const std::vector<std::string>& tokens,
                                          std::size_t n) {
  std::map<Ngram, std::size_t> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    Ngram g(tokens.begin() + static_cast<std::ptrdiff_t>(i),
            tokens.begin() + static_cast<std::ptrdiff_t>(i + n));
    ++counts[g];
  }
  return counts;
}

}  // namespace

double bleu4_smoothed(std::string_view hypothesis, const std::vector<std::string>& references) {
  if (references.empty()) throw ArgumentError("BLEU needs at least one reference");
  const auto hyp = bleu_tokenize(hypothesis);
  if (hyp.empty()) return 0.0;
  std::vector<std::vector<std::string>> refs;
  refs.reserve(references.size());
  for (const auto& r : references) refs.push_back(bleu_tokenize(r));

  constexpr std::size_t max_order = 4;
  double log_precision = 0.0;
  for (std::size_t n = 1; n <= max_order; ++n) {
    const auto hyp_counts = ngram_counts(hyp, n);
    std::map<Ngram, std::size_t> max_ref;
    for (const auto& ref : refs) {
      for (const auto& [g, c] : ngram_counts(ref, n)) {
        auto& slot = max_ref[g];
        slot = std::max(slot, c);
      }
    }
    std::size_t matched = 0;
    for (const auto& [g, c] : hyp_counts) {
      auto it = max_ref.find(g);
      if (it != max_ref.end()) matched += std::min(c, it->second);
    }
    const std::size_t candidates = hyp.size() >= n ? hyp.size() - n + 1 : 0;
    const double smooth = n == 1 ? 0.0 : 1.0;
    const double num = static_cast<double>(matched) + smooth;
    const double den = static_cast<double>(candidates) + smooth;
    if (num <= 0.0 || den <= 0.0) return 0.0;
    log_precision += std::log(num / den) / static_cast<double>(max_order);
  }

  // Closest reference length, shorter one on ties.
  const auto hyp_len = static_cast<double>(hyp.size());
  double ref_len = static_cast<double>(refs.front().size());
  for (const auto& ref : refs) {
    const auto len = static_cast<double>(ref.size());
    const double d = std::abs(len - hyp_len);
    const double best = std::abs(ref_len - hyp_len);
    if (d < best || (d == best && len < ref_len)) ref_len = len;
  }
  const double brevity = hyp_len > ref_len ? 0.0 : 1.0 - ref_len / hyp_len;
  return 100.0 * std::exp(log_precision + brevity);
}

double corpus_bleu4(const std::vector<PredictionRecord>& predictions, const Corpus& eval_corpus) {
  const auto by_id = index_predictions(predictions, eval_corpus);
  double sum = 0.0;
  for (const auto& s : eval_corpus.samples) {
    sum += bleu4_smoothed(*by_id.at(s.id), {s.docstring});
  }
  return sum / static_cast<double>(eval_corpus.size());
}

std::string report_json(const EvalReport& r, const ReportLabels& labels) {
  nlohmann::ordered_json j = {{"model", labels.model},
                              {"trigger", labels.trigger},
                              {"setting", labels.setting},
                              {"asr", r.asr},
                              {"ftr", r.ftr},
                              {"bleu4", r.bleu4},
                              {"hits", r.hits},
                              {"clean_hits", r.clean_hits},
                              {"n_poisoned", r.n_poisoned},
                              {"n_clean", r.n_clean}};
  return j.dump(2) + "\n";
}

std::string report_csv_header() {
  return "model,trigger,setting,asr,ftr,bleu4,hits,clean_hits,n_poisoned,n_clean\n";
}

std::string report_csv_row(const EvalReport& r, const ReportLabels& labels) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << csv_escape(labels.model) << ',' << csv_escape(labels.trigger) << ','
      << csv_escape(labels.setting) << ',' << r.asr << ',' << r.ftr << ',' << r.bleu4 << ','
      << r.hits << ',' << r.clean_hits << ',' << r.n_poisoned << ',' << r.n_clean << '\n';
  return out.str();
}

}  // namespace bdkit
