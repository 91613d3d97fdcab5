// Synthetic multi-aspect corpus generator.
//
// Each document draws an independent positive/negative label per aspect and
// receives signal words from that aspect side's pool plus shared filler, so
// aspect labels are uncorrelated by construction and a disentangled encoder
// has a clean target to recover.
#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aspects/common.hpp"
#include "aspects/rng.hpp"

namespace aspects {

struct SyntheticAspectSpec {
  std::string name;
  std::vector<std::string> pos_pool;
  std::vector<std::string> neg_pool;
  int signal_words_per_doc = 6;
};

struct SyntheticConfig {
  int n_docs = 1000;
  std::vector<SyntheticAspectSpec> aspects;
  int filler_vocab = 200;
  int min_doc_len = 25;
  int max_doc_len = 35;
  std::uint64_t seed = 0;
};

inline std::vector<SyntheticAspectSpec> default_aspect_specs(int n_aspects,
                                                             int pool_size = 20,
                                                             int signal_words_per_doc = 6) {
  std::vector<SyntheticAspectSpec> specs;
  for (int a = 0; a < n_aspects; ++a) {
    SyntheticAspectSpec s;
    s.name = "aspect" + std::to_string(a);
    s.signal_words_per_doc = signal_words_per_doc;
    char buf[32];
    for (int j = 0; j < pool_size; ++j) {
      std::snprintf(buf, sizeof(buf), "a%dpos%02d", a, j);
      s.pos_pool.emplace_back(buf);
      std::snprintf(buf, sizeof(buf), "a%dneg%02d", a, j);
      s.neg_pool.emplace_back(buf);
    }
    specs.push_back(std::move(s));
  }
  return specs;
}

namespace detail {

inline void check_pools_disjoint(const SyntheticConfig& cfg,
                                 const std::vector<std::string>& filler) {
  std::set<std::string> seen;
  auto add_all = [&](const std::vector<std::string>& pool, const std::string& what) {
    for (const auto& w : pool) {
      if (!seen.insert(w).second)
        throw ConfigError("synthetic corpus: word '" + w + "' appears in more than one pool (" +
                          what + "); pools must be disjoint or aspects confound");
    }
  };
  for (const auto& a : cfg.aspects) {
    add_all(a.pos_pool, a.name + " pos");
    add_all(a.neg_pool, a.name + " neg");
  }
  add_all(filler, "filler");
}

}  // namespace detail

inline std::string synthetic_corpus_jsonl(const SyntheticConfig& cfg) {
  if (cfg.n_docs < 1) throw ConfigError("synthetic corpus: n_docs must be >= 1");
  if (cfg.aspects.empty()) throw ConfigError("synthetic corpus: need at least one aspect");
  if (cfg.min_doc_len < 1 || cfg.max_doc_len < cfg.min_doc_len)
    throw ConfigError("synthetic corpus: invalid document length range");
  int total_signal = 0;
  for (const auto& a : cfg.aspects) {
    if (a.pos_pool.empty() || a.neg_pool.empty())
      throw ConfigError("synthetic corpus: aspect '" + a.name + "' has an empty pool");
    if (a.signal_words_per_doc < 1)
      throw ConfigError("synthetic corpus: signal_words_per_doc must be >= 1");
    total_signal += a.signal_words_per_doc;
  }
  if (total_signal > cfg.min_doc_len)
    throw ConfigError("synthetic corpus: signal words per doc exceed min_doc_len");

  std::vector<std::string> filler;
  char buf[32];
  for (int j = 0; j < cfg.filler_vocab; ++j) {
    std::snprintf(buf, sizeof(buf), "filler%03d", j);
    filler.emplace_back(buf);
  }
  detail::check_pools_disjoint(cfg, filler);

  Rng rng(cfg.seed);
  std::string out;
  {
    nlohmann::json header;
    std::vector<std::string> names;
    for (const auto& a : cfg.aspects) names.push_back(a.name);
    header["aspects"] = names;
    header["mode"] = "dichotomized_ratings";
    out += header.dump();
    out += '\n';
  }

  const int id_width = 6;
  for (int i = 0; i < cfg.n_docs; ++i) {
    const int doc_len = cfg.min_doc_len +
                        static_cast<int>(rng.below(static_cast<std::size_t>(
                            cfg.max_doc_len - cfg.min_doc_len + 1)));
    std::vector<std::string> tokens;
    nlohmann::json ratings;
    for (const auto& a : cfg.aspects) {
      const bool positive = rng.coin();
      const auto& pool = positive ? a.pos_pool : a.neg_pool;
      for (int s = 0; s < a.signal_words_per_doc; ++s) tokens.push_back(rng.pick(pool));
      ratings[a.name] = positive ? 5 : 1;
    }
    while (static_cast<int>(tokens.size()) < doc_len) tokens.push_back(rng.pick(filler));
    rng.shuffle(tokens.begin(), tokens.end());

    std::snprintf(buf, sizeof(buf), "doc%0*d", id_width, i);
    nlohmann::json rec{{"id", buf}, {"text", tokens}, {"ratings", ratings}};
    out += rec.dump();
    out += '\n';
  }
  return out;
}

inline void generate_synthetic_corpus(const SyntheticConfig& cfg, const std::string& path) {
  atomic_write_file(path, synthetic_corpus_jsonl(cfg));
}

}  // namespace aspects
