// Vocabulary construction and document encoding.
//
// Tokens are kept when they occur in at least min_df distinct documents;
// everything else maps to unk at encode time. Ids 0 and 1 are reserved for
// pad and unk; retained tokens get ids in lexicographic order so that the
// same corpus always yields the same table regardless of input order.
#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "aspects/common.hpp"

namespace aspects {

inline constexpr const char* kPadToken = "<pad>";
inline constexpr const char* kUnkToken = "<unk>";

struct Vocabulary {
  std::unordered_map<std::string, int> token_to_id;
  std::vector<std::string> id_to_token;  // [pad_id]=<pad>, [unk_id]=<unk>
  int pad_id = 0;
  int unk_id = 1;
  int min_df = 1;

  int size() const { return static_cast<int>(id_to_token.size()); }

  int id(const std::string& token) const {
    auto it = token_to_id.find(token);
    return it == token_to_id.end() ? unk_id : it->second;
  }

  bool contains(const std::string& token) const {
    return token_to_id.count(token) != 0;
  }

  // Stable digest of the token table; checkpoints record it so that a model
  // is never applied to documents encoded with a different vocabulary.
  std::uint64_t content_hash() const {
    std::uint64_t h = fnv1a("vocab-v1");
    for (const auto& t : id_to_token) {
      h = fnv1a(t, h);
      h = fnv1a("\x1f", h);
    }
    h = fnv1a(std::to_string(min_df), h);
    return h;
  }
};

inline Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& docs,
                                   int min_df) {
  if (docs.empty()) throw DataError("build_vocabulary: empty corpus");
  if (min_df < 1) throw ConfigError("build_vocabulary: min_df must be >= 1");

  // Document frequency, not term frequency: each doc counts a token once.
  std::unordered_map<std::string, int> df;
  for (const auto& doc : docs) {
    std::unordered_set<std::string> seen;
    for (const auto& tok : doc) seen.insert(tok);
    for (const auto& tok : seen) ++df[tok];
  }

  std::vector<std::string> kept;
  for (const auto& [tok, n] : df) {
    if (n >= min_df) kept.push_back(tok);
  }
  std::sort(kept.begin(), kept.end());

  Vocabulary v;
  v.min_df = min_df;
  v.id_to_token = {kPadToken, kUnkToken};
  for (const auto& tok : kept) v.id_to_token.push_back(tok);
  for (int i = 0; i < v.size(); ++i) v.token_to_id[v.id_to_token[i]] = i;
  return v;
}

// Nearest-rank percentile of document lengths: the smallest L such that at
// least `percentile` of documents have length <= L.
inline int truncation_length(const std::vector<std::size_t>& lengths,
                             double percentile) {
  if (lengths.empty()) throw DataError("truncation_length: empty corpus");
  if (!(percentile > 0.0 && percentile <= 1.0))
    throw ConfigError("truncation_length: percentile must be in (0,1]");
  std::vector<std::size_t> sorted = lengths;
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(percentile * n - 1e-9));
  if (rank < 1) rank = 1;
  if (rank > sorted.size()) rank = sorted.size();
  return static_cast<int>(sorted[rank - 1]);
}

struct EncodedDocument {
  std::string doc_id;
  std::vector<int> ids;  // fixed length N: truncated then right-padded
  int true_len = 0;
  std::string group_id;                 // review corpora
  std::map<std::string, bool> labels;   // rated corpora: aspect -> positive?
};

inline EncodedDocument encode_document(const std::vector<std::string>& tokens,
                                       const Vocabulary& vocab, int n) {
  if (n < 1) throw ConfigError("encode_document: N must be >= 1");
  EncodedDocument doc;
  doc.true_len = static_cast<int>(std::min<std::size_t>(tokens.size(),
                                                        static_cast<std::size_t>(n)));
  doc.ids.assign(static_cast<std::size_t>(n), vocab.pad_id);
  for (int t = 0; t < doc.true_len; ++t) {
    doc.ids[static_cast<std::size_t>(t)] = vocab.id(tokens[static_cast<std::size_t>(t)]);
  }
  return doc;
}

struct TokenizerOptions {
  bool lowercase = true;
  bool split_punctuation = true;
};

// Whitespace tokenizer with optional lowercasing and punctuation splitting;
// input may also arrive pre-tokenized, in which case this is bypassed.
inline std::vector<std::string> tokenize(std::string_view text,
                                         const TokenizerOptions& opt = {}) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  };
  for (char ch : text) {
    const auto uc = static_cast<unsigned char>(ch);
    if (std::isspace(uc)) {
      flush();
    } else if (opt.split_punctuation && std::ispunct(uc)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur.push_back(opt.lowercase ? static_cast<char>(std::tolower(uc)) : ch);
    }
  }
  flush();
  return out;
}

inline nlohmann::json vocab_to_json(const Vocabulary& v) {
  return nlohmann::json{{"tokens", v.id_to_token},
                        {"min_df", v.min_df},
                        {"unk_id", v.unk_id},
                        {"pad_id", v.pad_id}};
}

inline Vocabulary vocab_from_json(const nlohmann::json& j) {
  Vocabulary v;
  v.id_to_token = j.at("tokens").get<std::vector<std::string>>();
  v.min_df = j.at("min_df").get<int>();
  v.unk_id = j.at("unk_id").get<int>();
  v.pad_id = j.at("pad_id").get<int>();
  if (v.unk_id == v.pad_id || v.unk_id >= v.size() || v.pad_id >= v.size())
    throw DataError("vocabulary file: invalid special ids");
  for (int i = 0; i < v.size(); ++i) v.token_to_id[v.id_to_token[i]] = i;
  return v;
}

inline void save_vocabulary(const Vocabulary& v, const std::string& path) {
  atomic_write_file(path, vocab_to_json(v).dump(2) + "\n");
}

inline Vocabulary load_vocabulary(const std::string& path) {
  return vocab_from_json(nlohmann::json::parse(read_file(path)));
}

}  // namespace aspects
