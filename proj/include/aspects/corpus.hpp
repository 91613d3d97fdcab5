// JSONL corpus ingestion and train/valid/test assignment.
//
// File layout: first line is a header record {"aspects":[...], "mode":...};
// every following line is one document. Review-mode records carry the review
// (group) id and optional per-aspect summaries; rated-mode records carry
// numeric ratings which are dichotomized here with strict inequalities, so a
// rating exactly at the threshold leaves that aspect unlabeled.
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aspects/common.hpp"
#include "aspects/vocab.hpp"

namespace aspects {

enum class SupervisionMode { review_groups, dichotomized_ratings };
enum class Split { train, valid, test };

inline std::string to_string(SupervisionMode m) {
  return m == SupervisionMode::review_groups ? "review_groups" : "dichotomized_ratings";
}
inline std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    default: return "test";
  }
}

struct RawDocument {
  std::string doc_id;
  std::vector<std::string> tokens;
  std::string group_id;  // review mode
  std::map<std::string, std::vector<std::string>> aspect_summaries;  // review mode
  std::map<std::string, double> ratings;  // rated mode, as given
  std::map<std::string, bool> labels;     // rated mode, dichotomized
};

struct CorpusManifest {
  std::vector<std::string> aspect_names;
  SupervisionMode mode = SupervisionMode::dichotomized_ratings;
  std::map<std::string, Split> split;  // doc_id -> assignment
};

struct LoadOptions {
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  double valid_fraction = 0.1;
  double rating_threshold = 3.0;
  TokenizerOptions tokenizer;
};

namespace detail {

inline std::vector<std::string> text_field_tokens(const nlohmann::json& v,
                                                  const TokenizerOptions& opt) {
  if (v.is_string()) return tokenize(v.get<std::string>(), opt);
  if (v.is_array()) return v.get<std::vector<std::string>>();  // pre-tokenized
  throw DataError("field 'text' must be a string or an array of tokens");
}

}  // namespace detail

// Deterministic split: order documents by a seeded hash of their id, then cut
// at the rounded fractions. Counts land within one document of the exact
// ratio and re-ingestion reproduces the same assignment.
inline std::map<std::string, Split> assign_splits(const std::vector<std::string>& doc_ids,
                                                  std::uint64_t seed,
                                                  double train_fraction,
                                                  double valid_fraction) {
  if (train_fraction < 0 || valid_fraction < 0 || train_fraction + valid_fraction > 1.0)
    throw ConfigError("assign_splits: invalid split fractions");
  struct Keyed {
    std::uint64_t key;
    const std::string* id;
  };
  std::vector<Keyed> order;
  order.reserve(doc_ids.size());
  for (const auto& id : doc_ids) {
    order.push_back({splitmix64(fnv1a(id) ^ splitmix64(seed)), &id});
  }
  std::sort(order.begin(), order.end(), [](const Keyed& a, const Keyed& b) {
    if (a.key != b.key) return a.key < b.key;
    return *a.id < *b.id;
  });
  const auto n = order.size();
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  const auto n_valid = static_cast<std::size_t>(std::llround(valid_fraction * static_cast<double>(n)));
  std::map<std::string, Split> split;
  for (std::size_t i = 0; i < n; ++i) {
    Split s = i < n_train            ? Split::train
              : i < n_train + n_valid ? Split::valid
                                      : Split::test;
    split[*order[i].id] = s;
  }
  return split;
}

inline std::pair<std::vector<RawDocument>, CorpusManifest> load_corpus(
    const std::string& path, const LoadOptions& opt = {}) {
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t line_no = 0;

  auto parse_line = [&](const std::string& text) {
    try {
      return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
  };
  auto require = [&](const nlohmann::json& rec, const char* field) -> const nlohmann::json& {
    auto it = rec.find(field);
    if (it == rec.end())
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": missing required field '" + field + "'");
    return *it;
  };

  // Header record.
  do {
    if (!std::getline(in, line)) throw DataError(path + ": empty corpus file");
    ++line_no;
  } while (line.find_first_not_of(" \t\r") == std::string::npos);
  nlohmann::json header = parse_line(line);

  CorpusManifest manifest;
  manifest.aspect_names = require(header, "aspects").get<std::vector<std::string>>();
  if (manifest.aspect_names.empty())
    throw DataError(path + ":1: header 'aspects' must be non-empty");
  {
    std::vector<std::string> sorted = manifest.aspect_names;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw DataError(path + ":1: duplicate aspect name in header");
  }
  const std::string mode_str = require(header, "mode").get<std::string>();
  if (mode_str == "review_groups") {
    manifest.mode = SupervisionMode::review_groups;
  } else if (mode_str == "dichotomized_ratings") {
    manifest.mode = SupervisionMode::dichotomized_ratings;
  } else {
    throw DataError(path + ":1: unknown mode '" + mode_str + "'");
  }

  std::vector<RawDocument> docs;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec = parse_line(line);

    RawDocument doc;
    doc.doc_id = require(rec, "id").get<std::string>();
    doc.tokens = detail::text_field_tokens(require(rec, "text"), opt.tokenizer);

    if (manifest.mode == SupervisionMode::review_groups) {
      doc.group_id = require(rec, "review").get<std::string>();
      if (auto it = rec.find("aspect_summaries"); it != rec.end()) {
        for (const auto& [name, value] : it->items()) {
          doc.aspect_summaries[name] = detail::text_field_tokens(value, opt.tokenizer);
        }
      }
    } else {
      const nlohmann::json& ratings = require(rec, "ratings");
      for (const auto& aspect : manifest.aspect_names) {
        auto it = ratings.find(aspect);
        if (it == ratings.end())
          throw DataError(path + ":" + std::to_string(line_no) +
                          ": missing required field 'ratings." + aspect + "'");
        const double r = it->get<double>();
        doc.ratings[aspect] = r;
        if (r > opt.rating_threshold) doc.labels[aspect] = true;
        else if (r < opt.rating_threshold) doc.labels[aspect] = false;
        // r == threshold: unlabeled for this aspect.
      }
    }
    docs.push_back(std::move(doc));
  }
  if (docs.empty()) throw DataError(path + ": corpus has a header but no documents");

  std::vector<std::string> ids;
  ids.reserve(docs.size());
  for (const auto& d : docs) ids.push_back(d.doc_id);
  manifest.split = assign_splits(ids, opt.seed, opt.train_fraction, opt.valid_fraction);
  return {std::move(docs), std::move(manifest)};
}

// A corpus ready for training/evaluation: vocabulary built on the train
// split, truncation length from the train length distribution, every
// document encoded to that fixed length.
struct Corpus {
  CorpusManifest manifest;
  Vocabulary vocab;
  int max_len = 0;
  std::vector<RawDocument> raw;       // aligned with docs
  std::vector<EncodedDocument> docs;  // aligned with raw

  std::vector<std::size_t> split_indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < docs.size(); ++i) {
      if (manifest.split.at(docs[i].doc_id) == s) out.push_back(i);
    }
    return out;
  }

  int aspect_index(const std::string& name) const {
    for (std::size_t i = 0; i < manifest.aspect_names.size(); ++i) {
      if (manifest.aspect_names[i] == name) return static_cast<int>(i);
    }
    throw ConfigError("unknown aspect: " + name);
  }
};

struct PrepareOptions {
  int min_df = 5;
  double truncate_percentile = 0.95;
};

inline Corpus prepare_corpus(std::vector<RawDocument> raw, CorpusManifest manifest,
                             const PrepareOptions& opt = {}) {
  Corpus c;
  c.manifest = std::move(manifest);
  c.raw = std::move(raw);

  // Vocabulary and truncation length come from training documents only; a
  // training document contributes its text plus any aspect summaries once.
  std::vector<std::vector<std::string>> train_docs;
  std::vector<std::size_t> train_lengths;
  for (const auto& d : c.raw) {
    if (c.manifest.split.at(d.doc_id) != Split::train) continue;
    std::vector<std::string> combined = d.tokens;
    for (const auto& [name, toks] : d.aspect_summaries) {
      combined.insert(combined.end(), toks.begin(), toks.end());
    }
    train_docs.push_back(std::move(combined));
    train_lengths.push_back(d.tokens.size());
  }
  if (train_docs.empty()) throw DataError("prepare_corpus: train split is empty");
  c.vocab = build_vocabulary(train_docs, opt.min_df);
  c.max_len = std::max(1, truncation_length(train_lengths, opt.truncate_percentile));

  c.docs.reserve(c.raw.size());
  for (const auto& d : c.raw) {
    EncodedDocument enc = encode_document(d.tokens, c.vocab, c.max_len);
    enc.doc_id = d.doc_id;
    enc.group_id = d.group_id;
    enc.labels = d.labels;
    c.docs.push_back(std::move(enc));
  }
  return c;
}

}  // namespace aspects
