#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace bdkit {

enum class Partition { train, test };

std::string_view to_string(Partition p) noexcept;
Partition parse_partition(std::string_view text);

struct CodeSample {
  std::string id;
  std::string repo;
  std::string path;
  std::string code;
  std::string docstring;
  Partition partition = Partition::train;
  // Fields we do not interpret, kept in input order and written back after
  // the canonical ones.
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();
};

struct Corpus {
  std::vector<CodeSample> samples;
  std::string provenance;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
};

struct LoadReport {
  std::size_t lines = 0;       // non-blank lines seen
  std::size_t malformed = 0;   // lines rejected
  std::vector<std::size_t> malformed_lines;  // 0-based physical line numbers
};

// Loads line-delimited JSON. Accepts `code` or `original_string` for the
// code and `docstring` for the summary; missing ids become the 0-based
// physical line number. More than 1% malformed lines is an IntegrityError.
Corpus load_corpus(const std::filesystem::path& path, Partition partition,
                   LoadReport* report = nullptr);
Corpus parse_corpus(std::string_view text, Partition partition,
                    std::string provenance, LoadReport* report = nullptr);

// Canonical line: id, repo, path, code, docstring, partition, then extras.
std::string to_json_line(const CodeSample& sample);
std::string serialize_corpus(const Corpus& corpus);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

// Uniform subset of n samples without replacement, chosen by the n smallest
// keys hash(seed, id); selected samples keep their original order.
Corpus sample_subset(const Corpus& corpus, std::size_t n, std::uint64_t seed);

struct TokenFrequencyTable {
  std::map<std::string, double> frequency;
  std::map<std::string, std::size_t> containing;  // samples containing token
  std::size_t total_samples = 0;
  std::size_t skipped_samples = 0;  // unlexable code, only when skipping

  double of(const std::string& token) const;
};

// Fraction of samples whose code contains each token at least once. Comment
// tokens are ignored; docstrings are not counted. With skip_unlexable the
// offending samples still count in the denominator, otherwise LexError
// propagates.
TokenFrequencyTable token_frequencies(const Corpus& corpus,
                                      bool skip_unlexable = false);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace bdkit
