// Small construction helpers shared by the test files.
#pragma once

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "aspects/corpus.hpp"
#include "aspects/model.hpp"
#include "aspects/synthetic.hpp"
#include "aspects/vocab.hpp"

namespace testutil {

inline aspects::EncoderConfig tiny_config(int max_len = 6, int embed_dim = 4, int filters = 3,
                                          int window = 3, int layers = 2, int n_aspects = 2) {
  aspects::EncoderConfig cfg;
  cfg.max_len = max_len;
  cfg.embed_dim = embed_dim;
  cfg.filters = filters;
  cfg.window = window;
  cfg.layers = layers;
  cfg.n_aspects = n_aspects;
  cfg.lambda_l2 = 0.0;
  cfg.lambda_l1 = 0.0;
  return cfg;
}

inline aspects::EncodedDocument make_doc(std::vector<int> ids, int true_len,
                                         std::string doc_id = "doc") {
  aspects::EncodedDocument d;
  d.doc_id = std::move(doc_id);
  d.ids = std::move(ids);
  d.true_len = true_len;
  return d;
}

// Random ids over [2, vocab_size) with the tail padded.
inline aspects::EncodedDocument random_doc(int n, int vocab_size, int true_len,
                                           aspects::Rng& rng, std::string doc_id = "doc") {
  std::vector<int> ids(static_cast<std::size_t>(n), 0);
  for (int t = 0; t < true_len; ++t)
    ids[static_cast<std::size_t>(t)] =
        2 + static_cast<int>(rng.below(static_cast<std::size_t>(vocab_size - 2)));
  return make_doc(std::move(ids), true_len, std::move(doc_id));
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("aspects_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

// A small rated-mode corpus on disk, loaded and prepared.
inline aspects::Corpus small_rated_corpus(const TempDir& dir, int n_docs = 60,
                                          std::uint64_t seed = 11) {
  aspects::SyntheticConfig cfg;
  cfg.n_docs = n_docs;
  cfg.aspects = aspects::default_aspect_specs(2, 6, 2);
  cfg.filler_vocab = 30;
  cfg.min_doc_len = 8;
  cfg.max_doc_len = 12;
  cfg.seed = seed;
  const std::string path = dir.file("corpus.jsonl");
  aspects::generate_synthetic_corpus(cfg, path);
  aspects::LoadOptions load;
  load.seed = seed;
  auto [raw, manifest] = aspects::load_corpus(path, load);
  aspects::PrepareOptions prep;
  prep.min_df = 1;
  return aspects::prepare_corpus(std::move(raw), std::move(manifest), prep);
}

}  // namespace testutil
