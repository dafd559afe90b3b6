#include "bdkit/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bdkit/binio.hpp"
#include "bdkit/corpus.hpp"
#include "bdkit/error.hpp"

namespace bdkit::sampling {

std::vector<std::size_t> rank_ids(std::span<const double> scores) {
  std::vector<std::size_t> ids(scores.size());
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  std::stable_sort(ids.begin(), ids.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return ids;
}

namespace {

void validate(const LogitVector& logits, const SamplerConfig& cfg) {
  if (logits.scores.empty()) throw ArgumentError("logit vector is empty");
  for (double s : logits.scores) {
    if (!std::isfinite(s)) throw ArgumentError("logit vector has a non-finite score");
  }
  if (!(cfg.temperature >= 0.0) || !std::isfinite(cfg.temperature)) {
    throw ArgumentError("temperature must be a finite value >= 0");
  }
  if (cfg.top_k < 1 || cfg.top_k > logits.vocab_size()) {
    throw ArgumentError("top_k = " + std::to_string(cfg.top_k) + " outside [1, " +
                        std::to_string(logits.vocab_size()) + "]");
  }
}

std::vector<double> distribution_ranked(const LogitVector& logits, const SamplerConfig& cfg,
                                        const std::vector<std::size_t>& ranked) {
  std::vector<double> p(logits.vocab_size(), 0.0);
  if (cfg.temperature == 0.0) {
    p[ranked.front()] = 1.0;
    return p;
  }
  const double top = logits.scores[ranked.front()] / cfg.temperature;
  double total = 0.0;
  for (std::size_t r = 0; r < cfg.top_k; ++r) {
    const std::size_t id = ranked[r];
    p[id] = std::exp(logits.scores[id] / cfg.temperature - top);
    total += p[id];
  }
  for (std::size_t r = 0; r < cfg.top_k; ++r) p[ranked[r]] /= total;
  return p;
}

std::size_t draw(const std::vector<double>& p, const std::vector<std::size_t>& ranked,
                 std::size_t k, double u) {
  double cumulative = 0.0;
  for (std::size_t r = 0; r < k; ++r) {
    cumulative += p[ranked[r]];
    if (u < cumulative) return ranked[r];
  }
  // u fell in the rounding gap above the last cumulative sum.
  for (std::size_t r = k; r-- > 0;) {
    if (p[ranked[r]] > 0.0) return ranked[r];
  }
  return ranked.front();
}

}  // namespace

std::vector<double> distribution(const LogitVector& logits, const SamplerConfig& cfg) {
  validate(logits, cfg);
  return distribution_ranked(logits, cfg, rank_ids(logits.scores));
}

std::size_t sample_token(const LogitVector& logits, const SamplerConfig& cfg, Rng& rng) {
  validate(logits, cfg);
  const auto ranked = rank_ids(logits.scores);
  const auto p = distribution_ranked(logits, cfg, ranked);
  return draw(p, ranked, cfg.top_k, rng.uniform01());
}

LogitVector LogitsFile::row(std::size_t step) const {
  if (step >= steps) throw ArgumentError("logits step out of range");
  LogitVector v;
  v.scores.assign(data.begin() + static_cast<std::ptrdiff_t>(step * vocab),
                  data.begin() + static_cast<std::ptrdiff_t>((step + 1) * vocab));
  return v;
}

std::string serialize_logits(const LogitsFile& file) {
  if (file.data.size() != file.steps * file.vocab) {
    throw ArgumentError("logits data size does not match steps x vocab");
  }
  std::string out = "LGTS";
  binio::put_u32(out, LogitsFile::kVersion);
  binio::put_u64(out, file.steps);
  binio::put_u64(out, file.vocab);
  out.reserve(out.size() + 4 * file.data.size());
  for (float f : file.data) binio::put_f32(out, f);
  return out;
}

LogitsFile parse_logits(std::string_view bytes) {
  binio::Reader in(bytes, "logits file");
  in.expect_magic("LGTS");
  const auto version = in.u32();
  if (version != LogitsFile::kVersion) {
    throw FormatError("logits file: unsupported version " + std::to_string(version));
  }
  LogitsFile file;
  file.steps = in.u64();
  file.vocab = in.u64();
  if (file.vocab == 0 || (file.steps && file.vocab > in.remaining() / 4 / file.steps)) {
    throw FormatError("logits file: truncated or empty vocabulary");
  }
  const std::size_t n = file.steps * file.vocab;
  if (in.remaining() != 4 * n) throw FormatError("logits file: payload size mismatch");
  file.data.resize(n);
  for (auto& f : file.data) {
    f = in.f32();
    if (!std::isfinite(f)) throw FormatError("logits file: non-finite score");
  }
  return file;
}

void save_logits(const LogitsFile& file, const std::filesystem::path& path) {
  write_file(path, serialize_logits(file));
}

LogitsFile load_logits(const std::filesystem::path& path) { return parse_logits(read_file(path)); }

ReplayResult replay_target_rate(const LogitsFile& file, const SamplerConfig& cfg,
                                std::size_t trials) {
  std::vector<std::vector<std::size_t>> ranked(file.steps);
  std::vector<std::vector<double>> probs(file.steps);
  for (std::size_t t = 0; t < file.steps; ++t) {
    const auto row = file.row(t);
    validate(row, cfg);
    ranked[t] = rank_ids(row.scores);
    probs[t] = distribution_ranked(row, cfg, ranked[t]);
  }
  ReplayResult result;
  result.trials = trials;
  for (std::size_t i = 0; i < trials; ++i) {
    Rng rng(derive_seed(cfg.seed, std::to_string(i), "replay"));
    bool hit = true;
    for (std::size_t t = 0; t < file.steps && hit; ++t) {
      hit = draw(probs[t], ranked[t], cfg.top_k, rng.uniform01()) == ranked[t].front();
    }
    if (hit) ++result.hits;
  }
  return result;
}

}  // namespace bdkit::sampling
