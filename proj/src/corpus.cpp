#include "bdkit/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include "bdkit/error.hpp"
#include "bdkit/javalex.hpp"
#include "bdkit/rng.hpp"

namespace bdkit {

using ojson = nlohmann::ordered_json;

std::string_view to_string(Partition p) noexcept {
  return p == Partition::train ? "train" : "test";
}

Partition parse_partition(std::string_view text) {
  if (text == "train") return Partition::train;
  if (text == "test") return Partition::test;
  throw ArgumentError("unknown partition '" + std::string(text) +
                      "' (expected train or test)");
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return std::move(buf).str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

namespace {

bool take_string(ojson& obj, const char* key, std::string& out) {
  auto it = obj.find(key);
  if (it == obj.end()) return false;
  if (!it->is_string()) return false;
  out = it->get<std::string>();
  obj.erase(it);
  return true;
}

// Returns false for a malformed line.
bool parse_sample(std::string_view line, std::size_t line_no, Partition partition,
                  CodeSample& sample) {
  ojson obj = ojson::parse(line.begin(), line.end(), nullptr, false);
  if (obj.is_discarded() || !obj.is_object()) return false;

  std::string code;
  std::string original;
  const bool has_code = take_string(obj, "code", code);
  // original_string is kept opaque when `code` is present.
  if (!has_code) {
    if (!take_string(obj, "original_string", original)) return false;
    code = std::move(original);
  }
  if (!take_string(obj, "docstring", sample.docstring)) return false;
  if (code.empty() || sample.docstring.empty()) return false;
  sample.code = std::move(code);

  if (auto it = obj.find("id"); it != obj.end()) {
    if (it->is_string()) {
      sample.id = it->get<std::string>();
    } else if (it->is_number_integer()) {
      sample.id = std::to_string(it->get<long long>());
    } else {
      return false;
    }
    obj.erase(it);
    if (sample.id.empty()) return false;
  } else {
    sample.id = std::to_string(line_no);
  }
  take_string(obj, "repo", sample.repo);
  take_string(obj, "path", sample.path);
  obj.erase("partition");
  sample.partition = partition;
  sample.extra = std::move(obj);
  return true;
}

}  // namespace

Corpus parse_corpus(std::string_view text, Partition partition,
                    std::string provenance, LoadReport* report) {
  Corpus corpus;
  corpus.provenance = std::move(provenance);
  LoadReport local;
  LoadReport& rep = report ? *report : local;
  rep = LoadReport{};

  std::unordered_set<std::string> ids;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") != std::string_view::npos) {
      ++rep.lines;
      CodeSample sample;
      if (parse_sample(line, line_no, partition, sample)) {
        if (!ids.insert(sample.id).second) {
          throw IntegrityError("duplicate sample id '" + sample.id + "' on line " +
                               std::to_string(line_no));
        }
        corpus.samples.push_back(std::move(sample));
      } else {
        ++rep.malformed;
        rep.malformed_lines.push_back(line_no);
      }
    }
    ++line_no;
    start = end + 1;
  }
  if (rep.lines == 0) throw IntegrityError("corpus " + corpus.provenance + " is empty");
  // Integer form of malformed / lines > 1%.
  if (rep.malformed * 100 > rep.lines) {
    throw IntegrityError("corpus " + corpus.provenance + ": " +
                         std::to_string(rep.malformed) + " of " +
                         std::to_string(rep.lines) + " lines malformed (limit 1%)");
  }
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, Partition partition,
                   LoadReport* report) {
  return parse_corpus(read_file(path), partition, path.string(), report);
}

std::string to_json_line(const CodeSample& s) {
  ojson obj = ojson::object();
  obj["id"] = s.id;
  obj["repo"] = s.repo;
  obj["path"] = s.path;
  obj["code"] = s.code;
  obj["docstring"] = s.docstring;
  obj["partition"] = std::string(to_string(s.partition));
  for (const auto& [key, value] : s.extra.items()) obj[key] = value;
  return obj.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  for (const auto& s : corpus.samples) {
    out += to_json_line(s);
    out += '\n';
  }
  return out;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  write_file(path, serialize_corpus(corpus));
}

Corpus sample_subset(const Corpus& corpus, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ArgumentError("sample_subset: n must be at least 1");
  if (n > corpus.size()) {
    throw ArgumentError("sample_subset: n = " + std::to_string(n) +
                        " exceeds corpus size " + std::to_string(corpus.size()));
  }
  std::vector<std::pair<std::uint64_t, std::size_t>> keyed(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    keyed[i] = {derive_seed(seed, corpus.samples[i].id, "subset"), i};
  }
  std::nth_element(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(n - 1),
                   keyed.end());
  std::vector<std::size_t> chosen(n);
  for (std::size_t i = 0; i < n; ++i) chosen[i] = keyed[i].second;
  std::sort(chosen.begin(), chosen.end());

  Corpus out;
  out.provenance = corpus.provenance + " | subset n=" + std::to_string(n) +
                   " seed=" + std::to_string(seed);
  out.seed = seed;
  out.samples.reserve(n);
  for (auto i : chosen) out.samples.push_back(corpus.samples[i]);
  return out;
}

double TokenFrequencyTable::of(const std::string& token) const {
  auto it = frequency.find(token);
  return it == frequency.end() ? 0.0 : it->second;
}

TokenFrequencyTable token_frequencies(const Corpus& corpus, bool skip_unlexable) {
  TokenFrequencyTable table;
  table.total_samples = corpus.size();
  for (const auto& sample : corpus.samples) {
    std::vector<javalex::Token> tokens;
    try {
      tokens = javalex::lex(sample.code);
    } catch (const LexError&) {
      if (!skip_unlexable) throw;
      ++table.skipped_samples;
      continue;
    }
    std::set<std::string_view> distinct;
    for (const auto& t : tokens) {
      if (t.kind != javalex::TokenKind::comment) distinct.insert(t.text);
    }
    for (auto text : distinct) ++table.containing[std::string(text)];
  }
  if (table.total_samples == 0) return table;
  for (const auto& [token, count] : table.containing) {
    table.frequency[token] =
        static_cast<double>(count) / static_cast<double>(table.total_samples);
  }
  return table;
}

}  // namespace bdkit
