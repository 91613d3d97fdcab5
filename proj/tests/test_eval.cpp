#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "aspects/eval.hpp"
#include "support/builders.hpp"
#include "support/reference.hpp"

using namespace aspects;
using Catch::Approx;

namespace {

AffinityMatrix make_affinity(const std::vector<std::string>& ids,
                             const std::vector<std::vector<double>>& sims) {
  AffinityMatrix m;
  m.doc_ids = ids;
  for (std::size_t i = 0; i < ids.size(); ++i) m.index[ids[i]] = i;
  for (const auto& row : sims)
    for (double v : row) m.sims.push_back(v);
  return m;
}

std::map<std::string, std::vector<double>> random_embeddings(int n, int dim, Rng& rng,
                                                             const std::string& prefix = "d") {
  std::map<std::string, std::vector<double>> out;
  for (int i = 0; i < n; ++i) {
    std::vector<double> v(static_cast<std::size_t>(dim));
    for (auto& x : v) x = rng.uniform(-1, 1);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%s%03d", prefix.c_str(), i);
    out[buf] = v;
  }
  return out;
}

// Independent group-AUC oracle: per-query pair enumeration, group means,
// mean over groups in sorted order.
double group_auc_oracle(const AffinityMatrix& affinity,
                        const std::map<std::string, std::string>& groups) {
  std::map<std::string, std::vector<std::string>> members;
  for (const auto& id : affinity.doc_ids) members[groups.at(id)].push_back(id);
  double total = 0.0;
  int group_count = 0;
  for (const auto& [group, ids] : members) {
    if (ids.size() < 2) continue;
    double sum = 0.0;
    for (const auto& q : ids) {
      std::vector<double> pos, neg;
      for (const auto& other : affinity.doc_ids) {
        if (other == q) continue;
        (groups.at(other) == group ? pos : neg).push_back(affinity.at(q, other));
      }
      sum += ref::pair_auc(pos, neg);
    }
    total += sum / static_cast<double>(ids.size());
    ++group_count;
  }
  return total / group_count;
}

double aspect_auc_oracle(const AffinityMatrix& affinity,
                         const std::map<std::string, bool>& labels) {
  double sum = 0.0;
  int count = 0;
  for (const auto& [q, lab] : labels) {
    std::vector<double> pos, neg;
    for (const auto& [other, other_lab] : labels) {
      if (other == q) continue;
      (other_lab == lab ? pos : neg).push_back(affinity.at(q, other));
    }
    if (pos.empty() || neg.empty()) continue;
    sum += ref::pair_auc(pos, neg);
    ++count;
  }
  return sum / count;
}

}  // namespace

TEST_CASE("pairwise affinity is symmetric with unit diagonal", "[eval]") {
  Rng rng(1);
  auto embeddings = random_embeddings(5, 4, rng);
  AffinityMatrix m = pairwise_affinity(embeddings);
  REQUIRE(m.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(m.at(i, i) == Approx(1.0).margin(1e-9));
    for (std::size_t j = 0; j < 5; ++j) {
      CHECK(m.at(i, j) == m.at(j, i));
      CHECK(m.at(i, j) >= -1.0);
      CHECK(m.at(i, j) <= 1.0);
    }
  }
  // against the direct double-loop cosine
  std::vector<std::pair<std::string, std::vector<double>>> flat(embeddings.begin(),
                                                                embeddings.end());
  for (std::size_t i = 0; i < flat.size(); ++i)
    for (std::size_t j = 0; j < flat.size(); ++j)
      CHECK(m.at(flat[i].first, flat[j].first) ==
            Approx(ref::cosine(flat[i].second, flat[j].second)).margin(1e-12));

  auto identical = embeddings;
  identical["d000"] = identical["d001"];
  AffinityMatrix m2 = pairwise_affinity(identical);
  CHECK(m2.at("d000", "d001") == Approx(1.0).margin(1e-9));

  std::map<std::string, std::vector<double>> orth{{"a", {1.0, 0.0}}, {"b", {0.0, 1.0}}};
  CHECK(pairwise_affinity(orth).at("a", "b") == Approx(0.0).margin(1e-15));

  CHECK_THROWS_AS(pairwise_affinity({{"only", {1.0}}}), DataError);
}

TEST_CASE("query AUC worked example and edge cases", "[eval]") {
  AffinityMatrix m = make_affinity(
      {"n1", "n2", "p1", "p2", "q"},
      {{1.0, 0.0, 0.0, 0.0, 0.8},
       {0.0, 1.0, 0.0, 0.0, 0.1},
       {0.0, 0.0, 1.0, 0.0, 0.9},
       {0.0, 0.0, 0.0, 1.0, 0.7},
       {0.8, 0.1, 0.9, 0.7, 1.0}});
  CHECK(query_auc("q", {"p1", "p2"}, {"n1", "n2"}, m) == 0.75);
  CHECK(query_auc("q", {"p1"}, {"n2"}, m) == 1.0);  // perfect separation

  AffinityMatrix ties = make_affinity({"a", "b", "c"},
                                      {{1.0, 0.5, 0.5}, {0.5, 1.0, 0.5}, {0.5, 0.5, 1.0}});
  CHECK(query_auc("a", {"b"}, {"c"}, ties) == 0.5);

  CHECK_THROWS_AS(query_auc("q", {}, {"n1"}, m), DataError);
  CHECK_THROWS_AS(query_auc("q", {"p1"}, {}, m), DataError);
  CHECK_THROWS_AS(query_auc("q", {"p1", "q"}, {"n1"}, m), DataError);
}

TEST_CASE("complementarity: swapping positives and negatives flips the AUC", "[eval]") {
  Rng rng(2);
  AffinityMatrix m = pairwise_affinity(random_embeddings(9, 5, rng));
  std::set<std::string> pos{"d001", "d002", "d003"};
  std::set<std::string> neg{"d004", "d005", "d006", "d007"};
  const double a = query_auc("d000", pos, neg, m);
  const double b = query_auc("d000", neg, pos, m);
  CHECK(a + b == Approx(1.0).margin(1e-12));
}

TEST_CASE("group retrieval AUC: perfect clustering and brute-force oracle", "[eval]") {
  std::map<std::string, std::vector<double>> clustered{
      {"a1", {1.0, 0.0}}, {"a2", {2.0, 0.0}}, {"a3", {0.5, 0.0}},
      {"b1", {0.0, 1.0}}, {"b2", {0.0, 3.0}}};
  std::map<std::string, std::string> groups{
      {"a1", "A"}, {"a2", "A"}, {"a3", "A"}, {"b1", "B"}, {"b2", "B"}};
  AffinityMatrix m = pairwise_affinity(clustered);
  AucReport report = group_retrieval_auc(m, groups);
  CHECK(report.grand_mean == Approx(1.0).margin(1e-9));
  CHECK(report.mode == AucReport::MeanMode::group_mean);
  CHECK(report.per_group.size() == 2);

  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    auto embeddings = random_embeddings(6, 3, rng);
    std::map<std::string, std::string> g;
    int i = 0;
    for (const auto& [id, vec] : embeddings) g[id] = i++ % 3 == 0 ? "G1" : (i % 2 ? "G2" : "G3");
    AffinityMatrix affinity = pairwise_affinity(embeddings);
    bool valid = false;
    std::map<std::string, int> sizes;
    for (auto& [id, grp] : g) sizes[grp]++;
    for (auto& [grp, n] : sizes) valid |= n >= 2;
    if (!valid || sizes.size() < 2) continue;
    AucReport r = group_retrieval_auc(affinity, g);
    CHECK(r.grand_mean == Approx(group_auc_oracle(affinity, g)).margin(1e-14));
  }
}

TEST_CASE("group retrieval AUC is 0.5 on average for random embeddings", "[eval]") {
  Rng rng(4);
  double sum = 0.0;
  const int trials = 200;
  for (int trial = 0; trial < trials; ++trial) {
    auto embeddings = random_embeddings(20, 6, rng);
    std::map<std::string, std::string> groups;
    int i = 0;
    for (const auto& [id, vec] : embeddings) groups[id] = "G" + std::to_string(i++ % 4);
    sum += group_retrieval_auc(pairwise_affinity(embeddings), groups).grand_mean;
  }
  CHECK(sum / trials == Approx(0.5).margin(0.05));
}

TEST_CASE("singleton groups are skipped and flagged", "[eval]") {
  Rng rng(5);
  auto embeddings = random_embeddings(5, 3, rng);
  std::map<std::string, std::string> groups{{"d000", "A"}, {"d001", "A"}, {"d002", "A"},
                                            {"d003", "B"}, {"d004", "lonely"}};
  AucReport r = group_retrieval_auc(pairwise_affinity(embeddings), groups);
  CHECK(r.per_group.count("A") == 1);
  CHECK(r.per_group.count("lonely") == 0);
  CHECK(std::find(r.skipped.begin(), r.skipped.end(), "lonely") != r.skipped.end());
  CHECK(std::find(r.skipped.begin(), r.skipped.end(), "B") != r.skipped.end());
}

TEST_CASE("aspect AUC: separation, null, oracle, one-sided error", "[eval]") {
  // labels follow the sign of the first coordinate: perfectly separable
  std::map<std::string, std::vector<double>> embeddings{
      {"p1", {1.0, 0.1}}, {"p2", {2.0, 0.0}}, {"p3", {1.5, -0.1}},
      {"n1", {-1.0, 0.1}}, {"n2", {-2.0, 0.0}}};
  std::map<std::string, bool> labels{
      {"p1", true}, {"p2", true}, {"p3", true}, {"n1", false}, {"n2", false}};
  AucReport r = aspect_auc(pairwise_affinity(embeddings), labels);
  CHECK(r.grand_mean == Approx(1.0).margin(1e-9));
  CHECK(r.mode == AucReport::MeanMode::query_mean);

  // shuffled labels on random embeddings sit near 0.5
  Rng rng(6);
  auto big = random_embeddings(80, 5, rng);
  std::map<std::string, bool> shuffled;
  for (const auto& [id, vec] : big) shuffled[id] = rng.coin();
  AffinityMatrix big_affinity = pairwise_affinity(big);
  CHECK(aspect_auc(big_affinity, shuffled).grand_mean == Approx(0.5).margin(0.06));
  CHECK(aspect_auc(big_affinity, shuffled).grand_mean ==
        Approx(aspect_auc_oracle(big_affinity, shuffled)).margin(1e-14));

  // 4-doc hand case: 2 pos, 2 neg
  AffinityMatrix hand = make_affinity({"a", "b", "c", "d"},
                                      {{1.0, 0.9, 0.2, 0.4},
                                       {0.9, 1.0, 0.3, 0.1},
                                       {0.2, 0.3, 1.0, 0.8},
                                       {0.4, 0.1, 0.8, 1.0}});
  std::map<std::string, bool> hand_labels{{"a", true}, {"b", true}, {"c", false}, {"d", false}};
  // query a: pos sim 0.9 vs negs {0.2, 0.4} -> 1.0; same for the rest
  CHECK(aspect_auc(hand, hand_labels).grand_mean == 1.0);

  std::map<std::string, bool> one_sided{{"a", true}, {"b", true}};
  CHECK_THROWS_AS(aspect_auc(hand, one_sided), DataError);
}

TEST_CASE("AUC is invariant under strictly monotone transforms of similarity", "[eval]") {
  Rng rng(7);
  auto embeddings = random_embeddings(12, 4, rng);
  AffinityMatrix m = pairwise_affinity(embeddings);
  AffinityMatrix cubed = m;
  for (auto& v : cubed.sims) v = v * v * v;  // strictly monotone on [-1,1]
  std::map<std::string, bool> labels;
  int i = 0;
  for (const auto& id : m.doc_ids) labels[id] = (i++ % 2) == 0;
  CHECK(aspect_auc(m, labels).grand_mean == aspect_auc(cubed, labels).grand_mean);

  std::map<std::string, std::string> groups;
  i = 0;
  for (const auto& id : m.doc_ids) groups[id] = "G" + std::to_string(i++ % 3);
  CHECK(group_retrieval_auc(m, groups).grand_mean ==
        group_retrieval_auc(cubed, groups).grand_mean);
}

TEST_CASE("cross AUC matrix diagonal equals aspect AUC and rows track embeddings",
          "[eval]") {
  Rng rng(8);
  std::map<std::string, std::map<std::string, std::vector<double>>> embeddings{
      {"look", random_embeddings(10, 4, rng)},
      {"taste", random_embeddings(10, 4, rng)}};
  std::map<std::string, std::map<std::string, bool>> labels;
  for (const auto& [id, vec] : embeddings["look"]) {
    labels["look"][id] = rng.coin();
    labels["taste"][id] = rng.coin();
  }
  // ensure two-sided labels
  labels["look"]["d000"] = true;
  labels["look"]["d001"] = false;
  labels["taste"]["d000"] = true;
  labels["taste"]["d001"] = false;

  const std::vector<std::string> order{"look", "taste"};
  CrossAucMatrix m = cross_auc_matrix(embeddings, labels, order);
  CHECK(m.at(0, 0) ==
        aspect_auc(pairwise_affinity(embeddings.at("look")), labels.at("look")).grand_mean);
  CHECK(m.at(1, 1) ==
        aspect_auc(pairwise_affinity(embeddings.at("taste")), labels.at("taste")).grand_mean);

  // identical embeddings for both aspects make the rows identical
  auto shared = embeddings;
  shared["taste"] = shared["look"];
  CrossAucMatrix m2 = cross_auc_matrix(shared, labels, order);
  CHECK(m2.at(0, 0) == m2.at(1, 0));
  CHECK(m2.at(0, 1) == m2.at(1, 1));

  // mismatched document sets are rejected
  auto broken = embeddings;
  broken["taste"].erase("d003");
  CHECK_THROWS_AS(cross_auc_matrix(broken, labels, order), DataError);
}

TEST_CASE("decorrelated cross AUC subsets and degenerate cases", "[eval]") {
  Rng rng(9);
  std::map<std::string, std::map<std::string, std::vector<double>>> embeddings{
      {"x", random_embeddings(8, 3, rng)}, {"y", random_embeddings(8, 3, rng)}};

  // perfectly correlated labels: every disagreement subset is empty
  std::map<std::string, std::map<std::string, bool>> correlated;
  int i = 0;
  for (const auto& [id, vec] : embeddings["x"]) {
    const bool v = (i++ % 2) == 0;
    correlated["x"][id] = v;
    correlated["y"][id] = v;
  }
  DecorrelatedCrossAuc all_empty =
      decorrelated_cross_auc(embeddings, correlated, {"x", "y"});
  for (const auto& cell : all_empty.cells) CHECK_FALSE(cell.available);

  // hand-built 8-doc case checked against brute force on the subset
  std::map<std::string, std::map<std::string, bool>> labels;
  i = 0;
  for (const auto& [id, vec] : embeddings["x"]) {
    labels["x"][id] = i < 4;
    labels["y"][id] = (i % 2) == 0;
    ++i;
  }
  DecorrelatedCrossAuc d = decorrelated_cross_auc(embeddings, labels, {"x", "y"});
  CHECK_FALSE(d.at(0, 0).available);
  CHECK_FALSE(d.at(1, 1).available);
  REQUIRE(d.at(0, 1).available);

  std::map<std::string, bool> subset;
  for (const auto& [id, lx] : labels["x"]) {
    if (labels["y"][id] != lx) subset[id] = labels["y"][id];
  }
  AffinityMatrix ax = pairwise_affinity(embeddings["x"]);
  AffinityMatrix ay = pairwise_affinity(embeddings["y"]);
  CHECK(d.at(0, 1).row_embedding_auc == Approx(aspect_auc_oracle(ax, subset)).margin(1e-14));
  CHECK(d.at(0, 1).col_embedding_auc == Approx(aspect_auc_oracle(ay, subset)).margin(1e-14));
}

TEST_CASE("independent labels disagree on about half the corpus", "[eval]") {
  Rng rng(10);
  const int n = 10000;
  int disagree = 0;
  for (int i = 0; i < n; ++i) disagree += rng.coin() != rng.coin();
  const double sigma = std::sqrt(n * 0.25);
  CHECK(std::abs(disagree - n / 2.0) <= 3.0 * sigma);
}

TEST_CASE("top activated words: constant gates and positional means", "[eval]") {
  // gate head with zero weight and bias gives sigmoid(0) = 0.5 everywhere
  EncoderConfig cfg = testutil::tiny_config(8, 3, 3, 3, 1, 1);
  Vocabulary vocab = build_vocabulary({{"pear", "apple", "quince", "fig"}}, 1);
  AspectModel m = init_model(cfg, vocab.size(), vocab.pad_id, 11);
  m.aspects[0].gate.w.fill(0.0);
  m.aspects[0].gate.b.fill(0.0);

  EncodedDocument doc = encode_document({"pear", "apple", "quince", "fig"}, vocab, cfg.max_len);
  doc.doc_id = "only";
  auto words = top_activated_words(m, {doc}, vocab, 0, 3, 1);
  REQUIRE(words.size() == 3);
  CHECK(words[0].word == "apple");  // lexicographic among equal scores
  CHECK(words[1].word == "fig");
  CHECK(words[2].word == "pear");
  for (const auto& w : words) CHECK(w.mean_gate == Approx(0.5).margin(1e-12));

  // positional mean: compare against gates collected straight from forward
  AspectModel m2 = init_model(cfg, vocab.size(), vocab.pad_id, 12);
  EncodedDocument doc2 = encode_document({"pear", "apple", "pear", "fig"}, vocab, cfg.max_len);
  doc2.doc_id = "two";
  ForwardResult fr = forward_aspect(m2, doc2, 0);
  const double expected_pear = (fr.gates[0] + fr.gates[2]) / 2.0;
  auto words2 = top_activated_words(m2, {doc2}, vocab, 0, 10, 1);
  bool found = false;
  for (const auto& w : words2) {
    if (w.word == "pear") {
      CHECK(w.mean_gate == Approx(expected_pear).margin(1e-12));
      CHECK(w.occurrences == 2);
      found = true;
    }
    CHECK(w.word != kUnkToken);
    CHECK(w.word != kPadToken);
  }
  CHECK(found);

  // min_occurrence filters rare words
  auto filtered = top_activated_words(m2, {doc2}, vocab, 0, 10, 2);
  REQUIRE(filtered.size() == 1);
  CHECK(filtered[0].word == "pear");
}

TEST_CASE("report serialization carries modes and unavailable markers", "[eval]") {
  Rng rng(12);
  auto embeddings = random_embeddings(6, 3, rng);
  std::map<std::string, std::string> groups;
  int i = 0;
  for (const auto& [id, vec] : embeddings) groups[id] = "G" + std::to_string(i++ % 2);
  auto report = group_retrieval_auc(pairwise_affinity(embeddings), groups);
  auto j = auc_report_to_json(report);
  CHECK(j.at("mode") == "group_mean");
  CHECK(j.contains("grand_mean"));
  CHECK(j.contains("per_group"));

  std::map<std::string, std::map<std::string, std::vector<double>>> emb2{
      {"x", embeddings}, {"y", embeddings}};
  std::map<std::string, std::map<std::string, bool>> correlated;
  i = 0;
  for (const auto& [id, vec] : embeddings) {
    const bool v = (i++ % 2) == 0;
    correlated["x"][id] = v;
    correlated["y"][id] = v;
  }
  auto dj = decorrelated_to_json(decorrelated_cross_auc(emb2, correlated, {"x", "y"}));
  CHECK(dj.at("matrix")[0][1] == "unavailable");
}
