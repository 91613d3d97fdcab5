// Triplet samplers for the two supervision regimes.
//
// Review scheme: draw two reviews, take two studies from the first and one
// from the second; the similar document is the target-aspect summary of the
// sibling study, the anchor is the first study's own text, and the
// dissimilar document concatenates the other review's target-aspect summary
// with the sibling's remaining-aspect summaries, in aspect order.
//
// Rating scheme: anchor drawn at random, similar shares its dichotomized
// label for the target aspect, dissimilar has the opposite label.
#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "aspects/corpus.hpp"
#include "aspects/objective.hpp"
#include "aspects/rng.hpp"

namespace aspects {

class ReviewTripletSampler {
 public:
  ReviewTripletSampler(const Corpus& corpus, std::vector<std::size_t> pool,
                       int max_retries = 1000)
      : corpus_(corpus), max_retries_(max_retries) {
    if (corpus.manifest.mode != SupervisionMode::review_groups)
      throw ConfigError("review-scheme sampling requires a review_groups corpus");
    std::map<std::string, std::vector<std::size_t>> by_group;
    for (std::size_t i : pool) {
      const auto& doc = corpus.docs[i];
      if (doc.group_id.empty())
        throw DataError("document '" + doc.doc_id + "' has no review id");
      by_group[doc.group_id].push_back(i);
    }
    for (auto& [name, members] : by_group) {
      group_names_.push_back(name);
      members_.push_back(std::move(members));
    }
    if (members_.size() < 2)
      throw DataError("review-scheme sampling needs at least 2 reviews, got " +
                      std::to_string(members_.size()));
  }

  TripletItem sample(int aspect, Rng& rng) {
    const auto& aspect_names = corpus_.manifest.aspect_names;
    if (aspect < 0 || aspect >= static_cast<int>(aspect_names.size()))
      throw ConfigError("sample: aspect index out of range");
    const std::string& aspect_name = aspect_names[static_cast<std::size_t>(aspect)];

    for (int attempt = 0; attempt < max_retries_; ++attempt) {
      const std::size_t r1 = rng.below(members_.size());
      if (members_[r1].size() < 2) continue;  // need two studies from the first review
      std::size_t r2 = rng.below(members_.size() - 1);
      if (r2 >= r1) ++r2;

      const auto& g1 = members_[r1];
      const std::size_t i1 = rng.below(g1.size());
      std::size_t i1p = rng.below(g1.size() - 1);
      if (i1p >= i1) ++i1p;
      const std::size_t s1 = g1[i1];
      const std::size_t s1p = g1[i1p];
      const std::size_t s2 = rng.pick(members_[r2]);

      const RawDocument& raw_s1p = corpus_.raw[s1p];
      const RawDocument& raw_s2 = corpus_.raw[s2];
      if (!has_all_summaries(raw_s1p) || !raw_s2.aspect_summaries.count(aspect_name)) {
        ++skipped_missing_summary_;
        continue;
      }

      TripletItem item;
      item.aspect = aspect;
      item.s1_id = corpus_.docs[s1].doc_id;
      item.s1_prime_id = raw_s1p.doc_id;
      item.s2_id = raw_s2.doc_id;
      item.anchor = corpus_.docs[s1];

      item.similar = encode_document(raw_s1p.aspect_summaries.at(aspect_name),
                                     corpus_.vocab, corpus_.max_len);
      item.similar.doc_id = raw_s1p.doc_id + "#" + aspect_name;

      // Other review's target summary first, then the sibling's remaining
      // summaries in declared aspect order.
      std::vector<std::string> dissimilar_tokens = raw_s2.aspect_summaries.at(aspect_name);
      for (const auto& other : aspect_names) {
        if (other == aspect_name) continue;
        const auto& summary = raw_s1p.aspect_summaries.at(other);
        dissimilar_tokens.insert(dissimilar_tokens.end(), summary.begin(), summary.end());
      }
      item.dissimilar = encode_document(dissimilar_tokens, corpus_.vocab, corpus_.max_len);
      item.dissimilar.doc_id = raw_s2.doc_id + "|" + raw_s1p.doc_id + "#" + aspect_name;
      return item;
    }
    throw DataError("review-scheme sampling failed after " + std::to_string(max_retries_) +
                    " attempts (reviews too small or summaries missing)");
  }

  TripletBatch batch(int aspect, int size, Rng& rng) {
    TripletBatch b;
    b.items.reserve(static_cast<std::size_t>(size));
    for (int i = 0; i < size; ++i) b.items.push_back(sample(aspect, rng));
    return b;
  }

  long long skipped_missing_summary() const { return skipped_missing_summary_; }
  std::size_t group_count() const { return members_.size(); }

 private:
  bool has_all_summaries(const RawDocument& doc) const {
    for (const auto& name : corpus_.manifest.aspect_names) {
      if (!doc.aspect_summaries.count(name)) return false;
    }
    return true;
  }

  const Corpus& corpus_;
  std::vector<std::string> group_names_;
  std::vector<std::vector<std::size_t>> members_;
  int max_retries_;
  long long skipped_missing_summary_ = 0;
};

class RatingTripletSampler {
 public:
  RatingTripletSampler(const Corpus& corpus, std::vector<std::size_t> pool)
      : corpus_(corpus) {
    if (corpus.manifest.mode != SupervisionMode::dichotomized_ratings)
      throw ConfigError("rating-scheme sampling requires a dichotomized_ratings corpus");
    const auto n_aspects = corpus.manifest.aspect_names.size();
    positive_.resize(n_aspects);
    negative_.resize(n_aspects);
    for (std::size_t i : pool) {
      const auto& doc = corpus.docs[i];
      for (std::size_t a = 0; a < n_aspects; ++a) {
        auto it = doc.labels.find(corpus.manifest.aspect_names[a]);
        if (it == doc.labels.end()) continue;  // rating at threshold: excluded
        (it->second ? positive_[a] : negative_[a]).push_back(i);
      }
    }
  }

  TripletItem sample(int aspect, Rng& rng) {
    const auto a = static_cast<std::size_t>(aspect);
    if (a >= positive_.size()) throw ConfigError("sample: aspect index out of range");
    const std::string& name = corpus_.manifest.aspect_names[a];
    const auto& pos = positive_[a];
    const auto& neg = negative_[a];
    if (pos.empty() || neg.empty())
      throw DataError("aspect '" + name + "' has a one-sided label pool (" +
                      std::to_string(pos.size()) + " positive, " +
                      std::to_string(neg.size()) + " negative)");

    // The anchor's side must contain a second document to serve as s.
    const bool pos_ok = pos.size() >= 2;
    const bool neg_ok = neg.size() >= 2;
    if (!pos_ok && !neg_ok)
      throw DataError("aspect '" + name + "' has no label side with at least 2 documents");
    const std::size_t n_eligible = (pos_ok ? pos.size() : 0) + (neg_ok ? neg.size() : 0);
    std::size_t r = rng.below(n_eligible);
    const bool anchor_positive = pos_ok && r < pos.size();
    const auto& same = anchor_positive ? pos : neg;
    const auto& opposite = anchor_positive ? neg : pos;
    const std::size_t anchor_pos = anchor_positive ? r : (pos_ok ? r - pos.size() : r);

    std::size_t similar_pos = rng.below(same.size() - 1);
    if (similar_pos >= anchor_pos) ++similar_pos;

    TripletItem item;
    item.aspect = aspect;
    item.anchor = corpus_.docs[same[anchor_pos]];
    item.similar = corpus_.docs[same[similar_pos]];
    item.dissimilar = corpus_.docs[rng.pick(opposite)];
    return item;
  }

  TripletBatch batch(int aspect, int size, Rng& rng) {
    TripletBatch b;
    b.items.reserve(static_cast<std::size_t>(size));
    for (int i = 0; i < size; ++i) b.items.push_back(sample(aspect, rng));
    return b;
  }

  const std::vector<std::size_t>& positives(int aspect) const {
    return positive_[static_cast<std::size_t>(aspect)];
  }
  const std::vector<std::size_t>& negatives(int aspect) const {
    return negative_[static_cast<std::size_t>(aspect)];
  }

 private:
  const Corpus& corpus_;
  std::vector<std::vector<std::size_t>> positive_;  // per aspect
  std::vector<std::vector<std::size_t>> negative_;
};

}  // namespace aspects
