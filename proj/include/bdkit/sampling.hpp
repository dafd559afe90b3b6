#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "bdkit/rng.hpp"

namespace bdkit::sampling {

struct LogitVector {
  std::vector<double> scores;
  std::size_t vocab_size() const noexcept { return scores.size(); }
};

struct SamplerConfig {
  double temperature = 1.0;  // 0 means greedy
  std::size_t top_k = 1;
  std::uint64_t seed = 0;
};

// Vocabulary ids ordered by descending score, lower id first on ties.
std::vector<std::size_t> rank_ids(std::span<const double> scores);

// Softmax of scores / T restricted to the k best ids and renormalized; a
// point mass on the argmax when T == 0. Temperature applies before the
// top-k cut. Throws ArgumentError for k outside [1, vocab], T < 0 or
// non-finite scores.
std::vector<double> distribution(const LogitVector& logits, const SamplerConfig& cfg);

// Inverse-CDF draw over the ranked support, so for a shared uniform the
// argmax is chosen exactly when u < P(argmax).
std::size_t sample_token(const LogitVector& logits, const SamplerConfig& cfg, Rng& rng);

// Offline logits replay: "LGTS", u32 version, u64 steps, u64 vocab, then
// steps x vocab little-endian f32, row-major.
struct LogitsFile {
  static constexpr std::uint32_t kVersion = 1;
  std::size_t steps = 0;
  std::size_t vocab = 0;
  std::vector<float> data;

  LogitVector row(std::size_t step) const;
};

std::string serialize_logits(const LogitsFile& file);
LogitsFile parse_logits(std::string_view bytes);
void save_logits(const LogitsFile& file, const std::filesystem::path& path);
LogitsFile load_logits(const std::filesystem::path& path);

// Replays a decode of the target sequence: row t holds the logits at step
// t and the target token is that row's argmax. A trial hits when every step
// samples the target. Trial i step t draws from hash(cfg.seed, i, t), so
// the same draws are shared across configurations.
struct ReplayResult {
  std::size_t hits = 0;
  std::size_t trials = 0;
  double rate() const noexcept {
    return trials ? static_cast<double>(hits) / static_cast<double>(trials) : 0.0;
  }
};
ReplayResult replay_target_rate(const LogitsFile& file, const SamplerConfig& cfg,
                                std::size_t trials);

}  // namespace bdkit::sampling
