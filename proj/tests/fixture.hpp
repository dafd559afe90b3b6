#pragma once
#include <filesystem>
#include <string>

#include "bdkit/corpus.hpp"

namespace fixture {

inline std::filesystem::path data_dir() { return BDKIT_TEST_DATA; }

// Real Java methods with docstrings (see data/NOTICE).
inline const bdkit::Corpus& java_methods() {
  static const bdkit::Corpus corpus =
      bdkit::load_corpus(data_dir() / "java_methods.jsonl", bdkit::Partition::train);
  return corpus;
}

// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::path(BDKIT_TEST_SCRATCH) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixture
