#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "bdkit/corpus.hpp"

namespace bdkit {

struct PredictionRecord {
  std::string id;
  std::string output;
};

std::string serialize_predictions(const std::vector<PredictionRecord>& records);
std::vector<PredictionRecord> parse_predictions(std::string_view text);
void save_predictions(const std::vector<PredictionRecord>& records,
                      const std::filesystem::path& path);
std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path);

// Trim and collapse whitespace runs to one space; case is kept.
std::string normalize_output(std::string_view text);

struct RateCount {
  std::size_t hits = 0;
  std::size_t total = 0;
  double value() const noexcept {
    return total ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;
  }
};

// Fraction of evaluation samples whose prediction equals the target after
// normalization. Every sample needs exactly one prediction and every
// prediction must belong to a sample; otherwise CoverageError. An empty
// evaluation set is a CoverageError as well.
RateCount rate(const std::vector<PredictionRecord>& predictions, const Corpus& eval_corpus,
               std::string_view target);

struct EvalReport {
  double asr = 0.0;
  double ftr = 0.0;
  double bleu4 = 0.0;  // mean sentence BLEU-4 on the clean set, 0..100
  std::size_t hits = 0;        // triggered-set hits
  std::size_t clean_hits = 0;
  std::size_t n_poisoned = 0;
  std::size_t n_clean = 0;
};

EvalReport asr_ftr(const std::vector<PredictionRecord>& predictions_poisoned,
                   const Corpus& poisoned_eval,
                   const std::vector<PredictionRecord>& predictions_clean,
                   const Corpus& clean_eval, std::string_view target);

// Splits on whitespace; every ASCII punctuation character is its own token.
std::vector<std::string> bleu_tokenize(std::string_view text);

// Sentence-level BLEU-4 with +1 smoothing of the 2..4-gram precisions,
// clipped counts over all references, brevity penalty against the closest
// reference length, scaled to 0..100. An empty hypothesis scores 0.
double bleu4_smoothed(std::string_view hypothesis, const std::vector<std::string>& references);

// Mean sentence score of each clean-set prediction against its docstring.
double corpus_bleu4(const std::vector<PredictionRecord>& predictions, const Corpus& eval_corpus);

struct ReportLabels {
  std::string model = "simulated";
  std::string trigger;
  std::string setting;
};

std::string report_json(const EvalReport& report, const ReportLabels& labels);
std::string report_csv_header();
std::string report_csv_row(const EvalReport& report, const ReportLabels& labels);

}  // namespace bdkit
