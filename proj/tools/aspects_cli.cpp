// Command-line surface: one subcommand per pipeline stage, deterministic by
// default, atomic outputs, and a run-record JSON next to every artifact.
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "aspects/checkpoint.hpp"
#include "aspects/corpus.hpp"
#include "aspects/eval.hpp"
#include "aspects/interpret.hpp"
#include "aspects/synthetic.hpp"
#include "aspects/trainer.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string resolve_output(const std::string& flag_value, const std::string& default_name) {
  if (!flag_value.empty()) return flag_value;
  const char* dir = std::getenv("ASPECTS_OUT_DIR");
  return (fs::path(dir ? dir : ".") / default_name).string();
}

void write_run_record(const std::string& subcommand, const json& config,
                      const std::vector<std::string>& inputs,
                      const std::vector<std::string>& outputs,
                      const std::string& record_path) {
  json inputs_json = json::object();
  for (const auto& path : inputs)
    inputs_json[path] = aspects::hex64(aspects::fnv1a(aspects::read_file(path)));
  json record{{"subcommand", subcommand},
              {"config", config},
              {"inputs", inputs_json},
              {"outputs", outputs}};
  aspects::atomic_write_file(record_path, record.dump(2) + "\n");
}

std::string record_path_for(const std::string& output_path) {
  return output_path + ".run.json";
}

struct CorpusFlags {
  std::string path;
  std::uint64_t seed = 0;
  int min_df = 5;
  double truncate_pct = 0.95;
  double threshold = 3.0;
  double train_frac = 0.8;
  double valid_frac = 0.1;

  void attach(CLI::App* cmd) {
    cmd->add_option("-c,--corpus", path, "corpus JSONL file")->required();
    cmd->add_option("--seed", seed, "seed for split assignment and sampling");
    cmd->add_option("--min-df", min_df, "vocabulary document-frequency threshold");
    cmd->add_option("--truncate-pct", truncate_pct, "truncation length percentile");
    cmd->add_option("--threshold", threshold, "rating dichotomization threshold");
    cmd->add_option("--train-frac", train_frac, "train split fraction");
    cmd->add_option("--valid-frac", valid_frac, "validation split fraction");
  }

  aspects::LoadOptions load_options() const {
    aspects::LoadOptions o;
    o.seed = seed;
    o.train_fraction = train_frac;
    o.valid_fraction = valid_frac;
    o.rating_threshold = threshold;
    return o;
  }

  aspects::Corpus load_prepared() const {
    auto [raw, manifest] = aspects::load_corpus(path, load_options());
    aspects::PrepareOptions prep;
    prep.min_df = min_df;
    prep.truncate_percentile = truncate_pct;
    return aspects::prepare_corpus(std::move(raw), std::move(manifest), prep);
  }

  json to_json() const {
    return json{{"corpus", path},         {"seed", seed},
                {"min_df", min_df},       {"truncate_pct", truncate_pct},
                {"threshold", threshold}, {"train_frac", train_frac},
                {"valid_frac", valid_frac}};
  }
};

aspects::Split parse_split(const std::string& name) {
  if (name == "train") return aspects::Split::train;
  if (name == "valid") return aspects::Split::valid;
  if (name == "test") return aspects::Split::test;
  throw aspects::ConfigError("unknown split '" + name + "'");
}

std::vector<aspects::EncodedDocument> select_docs(const aspects::Corpus& corpus,
                                                  const std::string& split) {
  if (split == "all") return corpus.docs;
  std::vector<aspects::EncodedDocument> out;
  for (std::size_t i : corpus.split_indices(parse_split(split))) out.push_back(corpus.docs[i]);
  return out;
}

// Re-encode a corpus against the vocabulary a checkpoint was trained with.
aspects::Corpus corpus_for_checkpoint(const CorpusFlags& flags, const aspects::Checkpoint& ckpt,
                                      const aspects::Vocabulary& vocab) {
  if (vocab.content_hash() != ckpt.vocab_hash)
    throw aspects::DataError("vocabulary file does not match checkpoint (hash mismatch)");
  auto [raw, manifest] = aspects::load_corpus(flags.path, flags.load_options());
  if (manifest.aspect_names != ckpt.aspect_names)
    throw aspects::DataError("corpus aspect names do not match checkpoint");
  aspects::Corpus corpus;
  corpus.manifest = std::move(manifest);
  corpus.vocab = vocab;
  corpus.max_len = ckpt.config.max_len;
  corpus.raw = std::move(raw);
  for (const auto& doc : corpus.raw) {
    aspects::EncodedDocument enc = aspects::encode_document(doc.tokens, vocab, corpus.max_len);
    enc.doc_id = doc.doc_id;
    enc.group_id = doc.group_id;
    enc.labels = doc.labels;
    corpus.docs.push_back(std::move(enc));
  }
  return corpus;
}

// Labels/groups restricted to the ids present in an embeddings file.
std::map<std::string, std::map<std::string, bool>> labels_for_ids(
    const aspects::Corpus& corpus, const std::set<std::string>& ids) {
  std::map<std::string, std::map<std::string, bool>> labels;
  for (const auto& name : corpus.manifest.aspect_names) labels[name] = {};
  for (const auto& doc : corpus.docs) {
    if (!ids.count(doc.doc_id)) continue;
    for (const auto& [aspect, positive] : doc.labels) labels[aspect][doc.doc_id] = positive;
  }
  return labels;
}

int run(int argc, char** argv) {
  CLI::App app{"disentangled aspect embeddings: corpus tools, training, evaluation"};
  app.require_subcommand(1);

  // gen-synthetic
  auto* gen = app.add_subcommand("gen-synthetic", "generate a synthetic multi-aspect corpus");
  int gen_docs = 1000, gen_aspects = 2, gen_pool = 20, gen_signal = 6, gen_filler = 200;
  int gen_min_len = 25, gen_max_len = 35;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  gen->add_option("--docs", gen_docs, "number of documents");
  gen->add_option("--aspects", gen_aspects, "number of aspects");
  gen->add_option("--pool-size", gen_pool, "signal words per pool side");
  gen->add_option("--signal-words", gen_signal, "signal words per document per aspect");
  gen->add_option("--filler", gen_filler, "filler vocabulary size");
  gen->add_option("--min-len", gen_min_len, "minimum document length");
  gen->add_option("--max-len", gen_max_len, "maximum document length");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("-o,--output", gen_out, "output JSONL path");

  // build-vocab
  auto* bv = app.add_subcommand("build-vocab", "build and persist a vocabulary");
  CorpusFlags bv_corpus;
  bv_corpus.attach(bv);
  std::string bv_out;
  bv->add_option("-o,--output", bv_out, "output vocabulary JSON path");

  // train
  auto* tr = app.add_subcommand("train", "train the aspect encoder");
  CorpusFlags tr_corpus;
  tr_corpus.attach(tr);
  aspects::EncoderConfig enc_cfg;
  aspects::TrainConfig train_cfg;
  std::string tr_out, tr_resume;
  tr->add_option("--layers", enc_cfg.layers, "conv layers");
  tr->add_option("--filters", enc_cfg.filters, "feature maps per layer");
  tr->add_option("--window", enc_cfg.window, "kernel window size (odd)");
  tr->add_option("--embed-dim", enc_cfg.embed_dim, "word embedding dimension");
  tr->add_option("--l2", enc_cfg.lambda_l2, "L2 coefficient over all parameters");
  tr->add_option("--l1", enc_cfg.lambda_l1, "L1 coefficient on gates");
  tr->add_flag("--gate-on-last", enc_cfg.gate_on_last,
               "gate head reads the last conv layer instead of the residual sum");
  tr->add_option("--margin", train_cfg.margin, "triplet margin");
  tr->add_option("--lr", train_cfg.learning_rate, "Adam learning rate");
  tr->add_option("--beta1", train_cfg.beta1, "Adam beta1");
  tr->add_option("--beta2", train_cfg.beta2, "Adam beta2");
  tr->add_option("--adam-eps", train_cfg.adam_eps, "Adam epsilon");
  tr->add_option("--batch-size", train_cfg.batch_size, "triplets per batch");
  tr->add_option("--epochs", train_cfg.epochs, "training epochs");
  tr->add_option("--patience", train_cfg.patience, "early-stopping patience (0 disables)");
  tr->add_option("--resume", tr_resume, "checkpoint to resume from");
  tr->add_option("-o,--output", tr_out, "output directory");

  // embed
  auto* em = app.add_subcommand("embed", "export per-aspect document embeddings");
  CorpusFlags em_corpus;
  em_corpus.attach(em);
  std::string em_ckpt, em_vocab, em_split = "all", em_out;
  em->add_option("--checkpoint", em_ckpt, "model checkpoint")->required();
  em->add_option("--vocab", em_vocab, "vocabulary JSON")->required();
  em->add_option("--split", em_split, "train|valid|test|all");
  em->add_option("-o,--output", em_out, "output JSONL path");

  // eval-auc
  auto* ev = app.add_subcommand("eval-auc", "retrieval AUC per aspect");
  CorpusFlags ev_corpus;
  ev_corpus.attach(ev);
  std::string ev_embeddings, ev_aspect, ev_out;
  ev->add_option("--embeddings", ev_embeddings, "embeddings JSONL")->required();
  ev->add_option("--aspect", ev_aspect, "restrict to one aspect");
  ev->add_option("-o,--output", ev_out, "output report path");

  // cross-auc
  auto* cx = app.add_subcommand("cross-auc", "aspect x aspect AUC matrix");
  CorpusFlags cx_corpus;
  cx_corpus.attach(cx);
  std::string cx_embeddings, cx_out;
  cx->add_option("--embeddings", cx_embeddings, "embeddings JSONL")->required();
  cx->add_option("-o,--output", cx_out, "output report path");

  // decorrelated-auc
  auto* dx = app.add_subcommand("decorrelated-auc",
                                "cross AUC restricted to label-disagreement subsets");
  CorpusFlags dx_corpus;
  dx_corpus.attach(dx);
  std::string dx_embeddings, dx_out;
  dx->add_option("--embeddings", dx_embeddings, "embeddings JSONL")->required();
  dx->add_option("-o,--output", dx_out, "output report path");

  // top-words
  auto* tw = app.add_subcommand("top-words", "most activated words per aspect");
  CorpusFlags tw_corpus;
  tw_corpus.attach(tw);
  std::string tw_ckpt, tw_vocab, tw_split = "test", tw_out;
  int tw_top_n = 10, tw_min_occ = 5;
  tw->add_option("--checkpoint", tw_ckpt, "model checkpoint")->required();
  tw->add_option("--vocab", tw_vocab, "vocabulary JSON")->required();
  tw->add_option("--split", tw_split, "train|valid|test|all");
  tw->add_option("--top-n", tw_top_n, "words per aspect");
  tw->add_option("--min-occurrence", tw_min_occ, "minimum occurrences to score a word");
  tw->add_option("-o,--output", tw_out, "output report path");

  // highlight
  auto* hl = app.add_subcommand("highlight", "per-token gate highlights");
  CorpusFlags hl_corpus;
  hl_corpus.attach(hl);
  std::string hl_ckpt, hl_vocab, hl_split = "test", hl_format = "json", hl_out;
  int hl_window = 5;
  hl->add_option("--checkpoint", hl_ckpt, "model checkpoint")->required();
  hl->add_option("--vocab", hl_vocab, "vocabulary JSON")->required();
  hl->add_option("--split", hl_split, "train|valid|test|all");
  hl->add_option("--format", hl_format, "json|html");
  hl->add_option("--window", hl_window, "smoothing window (odd)");
  hl->add_option("-o,--output", hl_out, "output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help or the parse error
    return code == 0 ? 0 : 2;
  }

  if (gen->parsed()) {
    aspects::SyntheticConfig cfg;
    cfg.n_docs = gen_docs;
    cfg.aspects = aspects::default_aspect_specs(gen_aspects, gen_pool, gen_signal);
    cfg.filler_vocab = gen_filler;
    cfg.min_doc_len = gen_min_len;
    cfg.max_doc_len = gen_max_len;
    cfg.seed = gen_seed;
    const std::string out = resolve_output(gen_out, "synthetic.jsonl");
    aspects::generate_synthetic_corpus(cfg, out);
    write_run_record("gen-synthetic",
                     json{{"docs", gen_docs},
                          {"aspects", gen_aspects},
                          {"pool_size", gen_pool},
                          {"signal_words", gen_signal},
                          {"filler", gen_filler},
                          {"min_len", gen_min_len},
                          {"max_len", gen_max_len},
                          {"seed", gen_seed}},
                     {}, {out}, record_path_for(out));
    std::cout << out << "\n";
    return 0;
  }

  if (bv->parsed()) {
    aspects::Corpus corpus = bv_corpus.load_prepared();
    const std::string out = resolve_output(bv_out, "vocab.json");
    aspects::save_vocabulary(corpus.vocab, out);
    write_run_record("build-vocab", bv_corpus.to_json(), {bv_corpus.path}, {out},
                     record_path_for(out));
    std::cout << out << " (" << corpus.vocab.size() << " tokens, max_len " << corpus.max_len
              << ")\n";
    return 0;
  }

  if (tr->parsed()) {
    train_cfg.seed = tr_corpus.seed;
    aspects::Corpus corpus = tr_corpus.load_prepared();
    std::optional<aspects::Checkpoint> resume;
    if (!tr_resume.empty()) {
      resume = aspects::load_checkpoint(tr_resume);
      if (resume->vocab_hash != corpus.vocab.content_hash())
        throw aspects::DataError("resume checkpoint vocabulary does not match corpus");
    }
    enc_cfg.max_len = corpus.max_len;
    enc_cfg.n_aspects = static_cast<int>(corpus.manifest.aspect_names.size());
    enc_cfg.validate();
    train_cfg.validate();

    aspects::TrainResult result = aspects::train_model(
        corpus, enc_cfg, train_cfg, resume ? &resume->model : nullptr);

    const std::string out_dir = resolve_output(tr_out, "train_run");
    fs::create_directories(out_dir);
    const std::string vocab_path = (fs::path(out_dir) / "vocab.json").string();
    aspects::save_vocabulary(corpus.vocab, vocab_path);

    aspects::Checkpoint final_ckpt{enc_cfg, corpus.manifest.aspect_names,
                                   corpus.vocab.content_hash(), train_cfg.seed,
                                   result.model};
    final_ckpt.config.max_len = corpus.max_len;
    const std::string final_path = (fs::path(out_dir) / "checkpoint_final.json").string();
    aspects::save_checkpoint(final_ckpt, final_path);

    aspects::Checkpoint best_ckpt = final_ckpt;
    best_ckpt.model = result.best_model;
    const std::string best_path = (fs::path(out_dir) / "checkpoint_best.json").string();
    aspects::save_checkpoint(best_ckpt, best_path);

    std::string metrics;
    for (const auto& m : result.metrics) metrics += aspects::epoch_metrics_to_json(m).dump() + "\n";
    const std::string metrics_path = (fs::path(out_dir) / "metrics.jsonl").string();
    aspects::atomic_write_file(metrics_path, metrics);

    json cfg_json = tr_corpus.to_json();
    cfg_json["encoder"] = aspects::encoder_config_to_json(enc_cfg);
    cfg_json["train"] = json{{"margin", train_cfg.margin},
                             {"lr", train_cfg.learning_rate},
                             {"beta1", train_cfg.beta1},
                             {"beta2", train_cfg.beta2},
                             {"adam_eps", train_cfg.adam_eps},
                             {"batch_size", train_cfg.batch_size},
                             {"epochs", train_cfg.epochs},
                             {"patience", train_cfg.patience},
                             {"seed", train_cfg.seed},
                             {"resume", tr_resume}};
    write_run_record("train", cfg_json, {tr_corpus.path},
                     {vocab_path, final_path, best_path, metrics_path},
                     (fs::path(out_dir) / "run_record.json").string());
    std::cout << out_dir << " (best epoch " << result.best_epoch << ")\n";
    return 0;
  }

  if (em->parsed()) {
    aspects::Checkpoint ckpt = aspects::load_checkpoint(em_ckpt);
    aspects::Vocabulary vocab = aspects::load_vocabulary(em_vocab);
    aspects::Corpus corpus = corpus_for_checkpoint(em_corpus, ckpt, vocab);
    const auto docs = select_docs(corpus, em_split);
    if (docs.empty()) throw aspects::DataError("embed: selected split is empty");
    const std::string out = resolve_output(em_out, "embeddings.jsonl");
    aspects::atomic_write_file(
        out, aspects::embeddings_to_jsonl(ckpt.model, docs, ckpt.aspect_names));
    json cfg_json = em_corpus.to_json();
    cfg_json["checkpoint"] = em_ckpt;
    cfg_json["split"] = em_split;
    write_run_record("embed", cfg_json, {em_corpus.path, em_ckpt, em_vocab}, {out},
                     record_path_for(out));
    std::cout << out << "\n";
    return 0;
  }

  auto embeddings_and_labels = [&](const CorpusFlags& flags, const std::string& emb_path) {
    aspects::EmbeddingsByAspect embeddings = aspects::load_embeddings_jsonl(emb_path);
    auto [raw, manifest] = aspects::load_corpus(flags.path, flags.load_options());
    std::set<std::string> ids;
    for (const auto& [aspect, by_doc] : embeddings)
      for (const auto& [id, vec] : by_doc) ids.insert(id);
    aspects::Corpus corpus;
    corpus.manifest = manifest;
    for (auto& doc : raw) {
      aspects::EncodedDocument enc;
      enc.doc_id = doc.doc_id;
      enc.group_id = doc.group_id;
      enc.labels = doc.labels;
      corpus.docs.push_back(std::move(enc));
    }
    return std::tuple{std::move(embeddings), std::move(corpus), std::move(ids)};
  };

  if (ev->parsed()) {
    auto [embeddings, corpus, ids] = embeddings_and_labels(ev_corpus, ev_embeddings);
    json per_aspect = json::object();
    for (const auto& name : corpus.manifest.aspect_names) {
      if (!ev_aspect.empty() && name != ev_aspect) continue;
      auto it = embeddings.find(name);
      if (it == embeddings.end())
        throw aspects::DataError("embeddings file has no vectors for aspect '" + name + "'");
      aspects::AffinityMatrix affinity = aspects::pairwise_affinity(it->second);
      aspects::AucReport report;
      if (corpus.manifest.mode == aspects::SupervisionMode::review_groups) {
        std::map<std::string, std::string> groups;
        for (const auto& doc : corpus.docs)
          if (ids.count(doc.doc_id)) groups[doc.doc_id] = doc.group_id;
        report = aspects::group_retrieval_auc(affinity, groups);
      } else {
        auto labels = labels_for_ids(corpus, ids);
        report = aspects::aspect_auc(affinity, labels.at(name));
      }
      per_aspect[name] = aspects::auc_report_to_json(report);
    }
    if (per_aspect.empty()) throw aspects::ConfigError("eval-auc: no aspect selected");
    const std::string out = resolve_output(ev_out, "auc_report.json");
    aspects::atomic_write_file(out, per_aspect.dump(2) + "\n");
    json cfg_json = ev_corpus.to_json();
    cfg_json["embeddings"] = ev_embeddings;
    cfg_json["aspect"] = ev_aspect;
    write_run_record("eval-auc", cfg_json, {ev_corpus.path, ev_embeddings}, {out},
                     record_path_for(out));
    std::cout << out << "\n";
    return 0;
  }

  if (cx->parsed() || dx->parsed()) {
    const CorpusFlags& flags = cx->parsed() ? cx_corpus : dx_corpus;
    const std::string& emb_path = cx->parsed() ? cx_embeddings : dx_embeddings;
    auto [embeddings, corpus, ids] = embeddings_and_labels(flags, emb_path);
    if (corpus.manifest.mode != aspects::SupervisionMode::dichotomized_ratings)
      throw aspects::DataError("cross-AUC requires a dichotomized_ratings corpus");
    auto labels = labels_for_ids(corpus, ids);
    json report;
    std::string default_name;
    if (cx->parsed()) {
      report = aspects::cross_auc_to_json(
          aspects::cross_auc_matrix(embeddings, labels, corpus.manifest.aspect_names));
      default_name = "cross_auc.json";
    } else {
      report = aspects::decorrelated_to_json(
          aspects::decorrelated_cross_auc(embeddings, labels, corpus.manifest.aspect_names));
      default_name = "decorrelated_auc.json";
    }
    const std::string out = resolve_output(cx->parsed() ? cx_out : dx_out, default_name);
    aspects::atomic_write_file(out, report.dump(2) + "\n");
    json cfg_json = flags.to_json();
    cfg_json["embeddings"] = emb_path;
    write_run_record(cx->parsed() ? "cross-auc" : "decorrelated-auc", cfg_json,
                     {flags.path, emb_path}, {out}, record_path_for(out));
    std::cout << out << "\n";
    return 0;
  }

  if (tw->parsed()) {
    aspects::Checkpoint ckpt = aspects::load_checkpoint(tw_ckpt);
    aspects::Vocabulary vocab = aspects::load_vocabulary(tw_vocab);
    aspects::Corpus corpus = corpus_for_checkpoint(tw_corpus, ckpt, vocab);
    const auto docs = select_docs(corpus, tw_split);
    if (docs.empty()) throw aspects::DataError("top-words: selected split is empty");
    json report = json::object();
    for (std::size_t a = 0; a < ckpt.aspect_names.size(); ++a) {
      json words = json::array();
      for (const auto& w : aspects::top_activated_words(ckpt.model, docs, vocab,
                                                        static_cast<int>(a), tw_top_n,
                                                        tw_min_occ)) {
        words.push_back(json{{"word", w.word},
                             {"mean_gate", w.mean_gate},
                             {"occurrences", w.occurrences}});
      }
      report[ckpt.aspect_names[a]] = words;
    }
    const std::string out = resolve_output(tw_out, "top_words.json");
    aspects::atomic_write_file(out, report.dump(2) + "\n");
    json cfg_json = tw_corpus.to_json();
    cfg_json["checkpoint"] = tw_ckpt;
    cfg_json["split"] = tw_split;
    cfg_json["top_n"] = tw_top_n;
    cfg_json["min_occurrence"] = tw_min_occ;
    write_run_record("top-words", cfg_json, {tw_corpus.path, tw_ckpt, tw_vocab}, {out},
                     record_path_for(out));
    std::cout << out << "\n";
    return 0;
  }

  if (hl->parsed()) {
    aspects::Checkpoint ckpt = aspects::load_checkpoint(hl_ckpt);
    aspects::Vocabulary vocab = aspects::load_vocabulary(hl_vocab);
    aspects::Corpus corpus = corpus_for_checkpoint(hl_corpus, ckpt, vocab);
    const auto docs = select_docs(corpus, hl_split);
    if (docs.empty()) throw aspects::DataError("highlight: selected split is empty");
    aspects::HighlightFormat format;
    if (hl_format == "json") format = aspects::HighlightFormat::json;
    else if (hl_format == "html") format = aspects::HighlightFormat::html;
    else throw aspects::ConfigError("highlight: format must be json or html");
    const std::string out = resolve_output(
        hl_out, format == aspects::HighlightFormat::json ? "highlights.jsonl" : "highlights.html");
    aspects::export_highlights(ckpt, docs, vocab, format, out, hl_window);
    json cfg_json = hl_corpus.to_json();
    cfg_json["checkpoint"] = hl_ckpt;
    cfg_json["split"] = hl_split;
    cfg_json["format"] = hl_format;
    cfg_json["window"] = hl_window;
    write_run_record("highlight", cfg_json, {hl_corpus.path, hl_ckpt, hl_vocab}, {out},
                     record_path_for(out));
    std::cout << out << "\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const aspects::ConfigError& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    return 2;
  } catch (const aspects::IoError& e) {
    std::cerr << "error: io: " << e.what() << "\n";
    return 1;
  } catch (const aspects::NumericError& e) {
    std::cerr << "error: numeric: " << e.what() << "\n";
    return 1;
  } catch (const aspects::DataError& e) {
    std::cerr << "error: data: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
}
