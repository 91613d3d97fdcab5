// Retrieval-style evaluation: affinity matrices, per-query AUC by exact pair
// counting (ties count half, Mann-Whitney convention), group-mean and
// query-mean reports, cross-aspect AUC matrices and the decorrelated
// variant, plus gate-based top-word extraction.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aspects/encoder.hpp"
#include "aspects/model.hpp"
#include "aspects/vocab.hpp"

namespace aspects {

struct AffinityMatrix {
  std::vector<std::string> doc_ids;  // row/column order, sorted
  std::vector<double> sims;          // n x n, row-major
  std::map<std::string, std::size_t> index;

  std::size_t size() const { return doc_ids.size(); }
  double at(std::size_t i, std::size_t j) const { return sims[i * doc_ids.size() + j]; }
  double at(const std::string& a, const std::string& b) const {
    return at(index.at(a), index.at(b));
  }
};

inline AffinityMatrix pairwise_affinity(
    const std::map<std::string, std::vector<double>>& embeddings) {
  if (embeddings.size() < 2)
    throw DataError("pairwise_affinity: need at least 2 documents");
  AffinityMatrix m;
  std::vector<const std::vector<double>*> vecs;
  for (const auto& [id, vec] : embeddings) {
    m.index[id] = m.doc_ids.size();
    m.doc_ids.push_back(id);
    vecs.push_back(&vec);
  }
  const std::size_t n = m.doc_ids.size();
  m.sims.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double s = cosine_similarity(*vecs[i], *vecs[j]);
      m.sims[i * n + j] = s;
      m.sims[j * n + i] = s;
    }
  }
  return m;
}

// P(similarity to a positive > similarity to a negative), ties half.
inline double query_auc(const std::string& query, const std::set<std::string>& positives,
                        const std::set<std::string>& negatives,
                        const AffinityMatrix& affinity) {
  if (positives.empty() || negatives.empty())
    throw DataError("query_auc: positive and negative sets must be non-empty");
  if (positives.count(query) || negatives.count(query))
    throw DataError("query_auc: query must be excluded from both sets");
  const std::size_t q = affinity.index.at(query);
  long long wins = 0, ties = 0;
  for (const auto& p : positives) {
    const double sp = affinity.at(q, affinity.index.at(p));
    for (const auto& nset : negatives) {
      const double sn = affinity.at(q, affinity.index.at(nset));
      if (sp > sn) ++wins;
      else if (sp == sn) ++ties;
    }
  }
  const double pairs = static_cast<double>(positives.size()) * static_cast<double>(negatives.size());
  return (static_cast<double>(wins) + 0.5 * static_cast<double>(ties)) / pairs;
}

struct AucReport {
  enum class MeanMode { group_mean, query_mean };
  MeanMode mode = MeanMode::query_mean;
  std::map<std::string, double> per_query;
  std::map<std::string, double> per_group;  // group-mean mode only
  std::vector<std::string> skipped;         // queries/groups with no usable pairs
  double grand_mean = std::numeric_limits<double>::quiet_NaN();
};

// Group retrieval: positives are the query's group minus itself, negatives
// everything else; group means first, then the mean over groups.
inline AucReport group_retrieval_auc(const AffinityMatrix& affinity,
                                     const std::map<std::string, std::string>& groups) {
  std::map<std::string, std::vector<std::string>> members;
  for (const auto& id : affinity.doc_ids) {
    auto it = groups.find(id);
    if (it == groups.end()) throw DataError("group_retrieval_auc: no group for '" + id + "'");
    members[it->second].push_back(id);
  }
  if (members.size() < 2)
    throw DataError("group_retrieval_auc: need at least 2 groups");

  AucReport report;
  report.mode = AucReport::MeanMode::group_mean;
  double group_sum = 0.0;
  std::size_t group_count = 0;
  for (const auto& [group, ids] : members) {
    if (ids.size() < 2) {
      report.skipped.push_back(group);
      continue;
    }
    double sum = 0.0;
    for (const auto& q : ids) {
      std::set<std::string> pos(ids.begin(), ids.end());
      pos.erase(q);
      std::set<std::string> neg;
      for (const auto& other : affinity.doc_ids) {
        if (!pos.count(other) && other != q) neg.insert(other);
      }
      const double auc = query_auc(q, pos, neg, affinity);
      report.per_query[q] = auc;
      sum += auc;
    }
    const double mean = sum / static_cast<double>(ids.size());
    report.per_group[group] = mean;
    group_sum += mean;
    ++group_count;
  }
  if (group_count == 0)
    throw DataError("group_retrieval_auc: every group is a singleton");
  report.grand_mean = group_sum / static_cast<double>(group_count);
  return report;
}

// Label retrieval: positives share the query's label, negatives oppose it;
// the grand mean averages per-query AUCs.
inline AucReport aspect_auc(const AffinityMatrix& affinity,
                            const std::map<std::string, bool>& labels) {
  std::vector<std::string> pos_ids, neg_ids;
  for (const auto& [id, positive] : labels) {
    if (!affinity.index.count(id))
      throw DataError("aspect_auc: labeled document '" + id + "' missing from affinity");
    (positive ? pos_ids : neg_ids).push_back(id);
  }
  if (pos_ids.empty() || neg_ids.empty())
    throw DataError("aspect_auc: labels are one-sided");

  AucReport report;
  report.mode = AucReport::MeanMode::query_mean;
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& [id, positive] : labels) {
    const auto& same = positive ? pos_ids : neg_ids;
    const auto& other = positive ? neg_ids : pos_ids;
    if (same.size() < 2) {
      report.skipped.push_back(id);
      continue;
    }
    std::set<std::string> pos(same.begin(), same.end());
    pos.erase(id);
    std::set<std::string> neg(other.begin(), other.end());
    const double auc = query_auc(id, pos, neg, affinity);
    report.per_query[id] = auc;
    sum += auc;
    ++count;
  }
  if (count == 0) throw DataError("aspect_auc: no usable queries");
  report.grand_mean = sum / static_cast<double>(count);
  return report;
}

struct CrossAucMatrix {
  std::vector<std::string> aspects;
  std::vector<double> cells;  // row = embedding aspect, col = label aspect
  double at(std::size_t r, std::size_t c) const { return cells[r * aspects.size() + c]; }
};

// Cell (k, k'): AUC of aspect-k embeddings against aspect-k' labels.
inline CrossAucMatrix cross_auc_matrix(
    const std::map<std::string, std::map<std::string, std::vector<double>>>& embeddings,
    const std::map<std::string, std::map<std::string, bool>>& labels,
    const std::vector<std::string>& aspect_order) {
  CrossAucMatrix out;
  out.aspects = aspect_order;
  const std::size_t n = aspect_order.size();
  out.cells.assign(n * n, std::numeric_limits<double>::quiet_NaN());

  const std::map<std::string, std::vector<double>>* first = nullptr;
  std::vector<AffinityMatrix> affinities;
  for (const auto& name : aspect_order) {
    auto it = embeddings.find(name);
    if (it == embeddings.end()) throw DataError("cross_auc: missing embeddings for '" + name + "'");
    if (!first) {
      first = &it->second;
    } else if (it->second.size() != first->size() ||
               !std::equal(it->second.begin(), it->second.end(), first->begin(),
                           [](const auto& a, const auto& b) { return a.first == b.first; })) {
      throw DataError("cross_auc: aspects cover different document sets");
    }
    affinities.push_back(pairwise_affinity(it->second));
  }
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      out.cells[r * n + c] = aspect_auc(affinities[r], labels.at(aspect_order[c])).grand_mean;
    }
  }
  return out;
}

struct DecorrelatedCell {
  bool available = false;
  double row_embedding_auc = std::numeric_limits<double>::quiet_NaN();
  double col_embedding_auc = std::numeric_limits<double>::quiet_NaN();
};

struct DecorrelatedCrossAuc {
  std::vector<std::string> aspects;
  std::vector<DecorrelatedCell> cells;
  const DecorrelatedCell& at(std::size_t r, std::size_t c) const {
    return cells[r * aspects.size() + c];
  }
};

// Cell (k, k'): restrict to documents whose k and k' labels disagree, then
// score the k'-labels with both the row (k) and column (k') embeddings.
// Diagonal cells and cells with an empty or one-sided disagreement subset
// are reported unavailable.
inline DecorrelatedCrossAuc decorrelated_cross_auc(
    const std::map<std::string, std::map<std::string, std::vector<double>>>& embeddings,
    const std::map<std::string, std::map<std::string, bool>>& labels,
    const std::vector<std::string>& aspect_order) {
  DecorrelatedCrossAuc out;
  out.aspects = aspect_order;
  const std::size_t n = aspect_order.size();
  out.cells.assign(n * n, DecorrelatedCell{});

  std::vector<AffinityMatrix> affinities;
  for (const auto& name : aspect_order) affinities.push_back(pairwise_affinity(embeddings.at(name)));

  for (std::size_t r = 0; r < n; ++r) {
    const auto& labels_r = labels.at(aspect_order[r]);
    for (std::size_t c = 0; c < n; ++c) {
      if (r == c) continue;
      const auto& labels_c = labels.at(aspect_order[c]);
      std::map<std::string, bool> disagree;
      for (const auto& [id, lr] : labels_r) {
        auto it = labels_c.find(id);
        if (it != labels_c.end() && it->second != lr) disagree[id] = it->second;
      }
      std::size_t n_pos = 0, n_neg = 0;
      for (const auto& [id, v] : disagree) (v ? n_pos : n_neg) += 1;
      // Needs both labels present and at least one query with a same-label
      // partner, otherwise no AUC is defined on the subset.
      if (n_pos == 0 || n_neg == 0 || (n_pos < 2 && n_neg < 2)) continue;  // unavailable
      DecorrelatedCell cell;
      cell.available = true;
      cell.row_embedding_auc = aspect_auc(affinities[r], disagree).grand_mean;
      cell.col_embedding_auc = aspect_auc(affinities[c], disagree).grand_mean;
      out.cells[r * n + c] = cell;
    }
  }
  return out;
}

struct WordActivation {
  std::string word;
  double mean_gate = 0.0;
  std::size_t occurrences = 0;
};

// Mean gate value per vocabulary word over all its (document, position)
// occurrences; padded positions excluded, unk and pad excluded, ties broken
// lexicographically.
inline std::vector<WordActivation> top_activated_words(
    const AspectModel& model, const std::vector<EncodedDocument>& docs,
    const Vocabulary& vocab, int aspect, int top_n, int min_occurrence = 5) {
  if (docs.empty()) throw DataError("top_activated_words: no documents");
  std::vector<double> sums(static_cast<std::size_t>(vocab.size()), 0.0);
  std::vector<std::size_t> counts(static_cast<std::size_t>(vocab.size()), 0);
  for (const auto& doc : docs) {
    ForwardResult fr = forward_aspect(model, doc, aspect);
    for (int t = 0; t < fr.cache.true_len; ++t) {
      const int id = doc.ids[static_cast<std::size_t>(t)];
      if (id == vocab.pad_id || id == vocab.unk_id) continue;
      sums[static_cast<std::size_t>(id)] += fr.gates[static_cast<std::size_t>(t)];
      counts[static_cast<std::size_t>(id)] += 1;
    }
  }
  std::vector<WordActivation> scored;
  for (int id = 0; id < vocab.size(); ++id) {
    const auto i = static_cast<std::size_t>(id);
    if (counts[i] < static_cast<std::size_t>(min_occurrence)) continue;
    scored.push_back({vocab.id_to_token[i], sums[i] / static_cast<double>(counts[i]), counts[i]});
  }
  std::sort(scored.begin(), scored.end(), [](const WordActivation& a, const WordActivation& b) {
    if (a.mean_gate != b.mean_gate) return a.mean_gate > b.mean_gate;
    return a.word < b.word;
  });
  if (static_cast<int>(scored.size()) > top_n) scored.resize(static_cast<std::size_t>(top_n));
  return scored;
}

inline nlohmann::json auc_report_to_json(const AucReport& r) {
  nlohmann::json j;
  j["mode"] = r.mode == AucReport::MeanMode::group_mean ? "group_mean" : "query_mean";
  j["grand_mean"] = r.grand_mean;
  if (r.mode == AucReport::MeanMode::group_mean) j["per_group"] = r.per_group;
  j["per_query"] = r.per_query;
  j["skipped"] = r.skipped;
  return j;
}

inline nlohmann::json cross_auc_to_json(const CrossAucMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  const std::size_t n = m.aspects.size();
  for (std::size_t r = 0; r < n; ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t c = 0; c < n; ++c) row.push_back(m.at(r, c));
    rows.push_back(row);
  }
  return nlohmann::json{{"aspects", m.aspects}, {"matrix", rows},
                        {"rows", "embedding aspect"}, {"columns", "label aspect"}};
}

inline nlohmann::json decorrelated_to_json(const DecorrelatedCrossAuc& m) {
  nlohmann::json rows = nlohmann::json::array();
  const std::size_t n = m.aspects.size();
  for (std::size_t r = 0; r < n; ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t c = 0; c < n; ++c) {
      const auto& cell = m.at(r, c);
      if (!cell.available) row.push_back("unavailable");
      else row.push_back(nlohmann::json{{"row_embedding_auc", cell.row_embedding_auc},
                                        {"col_embedding_auc", cell.col_embedding_auc}});
    }
    rows.push_back(row);
  }
  return nlohmann::json{{"aspects", m.aspects}, {"matrix", rows},
                        {"rows", "embedding aspect"}, {"columns", "label aspect"}};
}

}  // namespace aspects
