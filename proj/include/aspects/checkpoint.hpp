// Checkpoint serialization and embedding export.
//
// A checkpoint is one JSON document holding the encoder config, the aspect
// names, a hash of the vocabulary the model was trained with, the seed
// lineage, and every parameter tensor flattened row-major with its shape.
// Serialization is deterministic: identical models produce identical bytes.
#pragma once

#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aspects/common.hpp"
#include "aspects/encoder.hpp"
#include "aspects/model.hpp"
#include "aspects/vocab.hpp"

namespace aspects {

struct Checkpoint {
  EncoderConfig config;
  std::vector<std::string> aspect_names;
  std::uint64_t vocab_hash = 0;
  std::uint64_t seed = 0;
  AspectModel model;
};

inline nlohmann::json encoder_config_to_json(const EncoderConfig& c) {
  return nlohmann::json{{"max_len", c.max_len},       {"embed_dim", c.embed_dim},
                        {"filters", c.filters},       {"window", c.window},
                        {"layers", c.layers},         {"n_aspects", c.n_aspects},
                        {"lambda_l2", c.lambda_l2},   {"lambda_l1", c.lambda_l1},
                        {"gate_on_last", c.gate_on_last}};
}

inline EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.max_len = j.at("max_len").get<int>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.filters = j.at("filters").get<int>();
  c.window = j.at("window").get<int>();
  c.layers = j.at("layers").get<int>();
  c.n_aspects = j.at("n_aspects").get<int>();
  c.lambda_l2 = j.at("lambda_l2").get<double>();
  c.lambda_l1 = j.at("lambda_l1").get<double>();
  c.gate_on_last = j.value("gate_on_last", false);
  c.validate();
  return c;
}

inline nlohmann::json checkpoint_to_json(const Checkpoint& ckpt) {
  nlohmann::json params = nlohmann::json::array();
  for (const auto& p : parameters(ckpt.model)) {
    params.push_back(nlohmann::json{
        {"name", p.name}, {"shape", p.tensor->shape}, {"data", p.tensor->data}});
  }
  return nlohmann::json{{"format", "aspects-checkpoint-v1"},
                        {"config", encoder_config_to_json(ckpt.config)},
                        {"aspect_names", ckpt.aspect_names},
                        {"vocab_hash", hex64(ckpt.vocab_hash)},
                        {"seed", ckpt.seed},
                        {"pad_id", ckpt.model.pad_id},
                        {"params", params}};
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "aspects-checkpoint-v1")
    throw DataError("checkpoint: unknown format field");
  Checkpoint ckpt;
  ckpt.config = encoder_config_from_json(j.at("config"));
  ckpt.aspect_names = j.at("aspect_names").get<std::vector<std::string>>();
  ckpt.vocab_hash = std::stoull(j.at("vocab_hash").get<std::string>(), nullptr, 16);
  ckpt.seed = j.at("seed").get<std::uint64_t>();

  std::map<std::string, const nlohmann::json*> by_name;
  for (const auto& p : j.at("params")) by_name[p.at("name").get<std::string>()] = &p;
  auto emb_it = by_name.find("embedding");
  if (emb_it == by_name.end()) throw DataError("checkpoint: missing embedding tensor");
  const auto emb_shape = emb_it->second->at("shape").get<std::vector<std::size_t>>();
  if (emb_shape.size() != 2) throw DataError("checkpoint: embedding must be rank 2");

  AspectModel& m = ckpt.model;
  m.config = ckpt.config;
  m.pad_id = j.at("pad_id").get<int>();
  m.embedding = Tensor(emb_shape);
  auto make_conv = [&](int in_dim) {
    ConvLayer layer;
    layer.kernel = Tensor({static_cast<std::size_t>(ckpt.config.window),
                           static_cast<std::size_t>(in_dim),
                           static_cast<std::size_t>(ckpt.config.filters)});
    layer.bias = Tensor({static_cast<std::size_t>(ckpt.config.filters)});
    layer.prelu_alpha = Tensor({static_cast<std::size_t>(ckpt.config.filters)});
    return layer;
  };
  m.conv1 = make_conv(ckpt.config.embed_dim);
  m.aspects.resize(static_cast<std::size_t>(ckpt.config.n_aspects));
  for (auto& block : m.aspects) {
    for (int l = 2; l <= ckpt.config.layers; ++l) block.convs.push_back(make_conv(ckpt.config.filters));
    block.gate.w = Tensor({static_cast<std::size_t>(ckpt.config.filters)});
    block.gate.b = Tensor({1});
  }

  for (auto& p : parameters(m)) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw DataError("checkpoint: missing tensor '" + p.name + "'");
    const auto shape = it->second->at("shape").get<std::vector<std::size_t>>();
    if (shape != p.tensor->shape)
      throw DataError("checkpoint: shape mismatch for '" + p.name + "'");
    p.tensor->data = it->second->at("data").get<std::vector<double>>();
    if (p.tensor->data.size() != Tensor::numel(shape))
      throw DataError("checkpoint: data size mismatch for '" + p.name + "'");
  }
  return ckpt;
}

inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  atomic_write_file(path, checkpoint_to_json(ckpt).dump() + "\n");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  return checkpoint_from_json(nlohmann::json::parse(read_file(path)));
}

// aspect name -> doc_id -> pooled embedding
using EmbeddingsByAspect = std::map<std::string, std::map<std::string, std::vector<double>>>;

inline EmbeddingsByAspect embed_documents(const AspectModel& model,
                                          const std::vector<EncodedDocument>& docs,
                                          const std::vector<std::string>& aspect_names) {
  if (static_cast<int>(aspect_names.size()) != model.config.n_aspects)
    throw ConfigError("embed_documents: aspect name count != n_aspects");
  EmbeddingsByAspect out;
  for (const auto& doc : docs) {
    for (std::size_t a = 0; a < aspect_names.size(); ++a) {
      out[aspect_names[a]][doc.doc_id] =
          forward_aspect(model, doc, static_cast<int>(a)).embedding;
    }
  }
  return out;
}

inline std::string embeddings_to_jsonl(const AspectModel& model,
                                       const std::vector<EncodedDocument>& docs,
                                       const std::vector<std::string>& aspect_names) {
  std::string out;
  for (const auto& doc : docs) {
    for (std::size_t a = 0; a < aspect_names.size(); ++a) {
      ForwardResult fr = forward_aspect(model, doc, static_cast<int>(a));
      nlohmann::json rec{{"id", doc.doc_id},
                         {"aspect", aspect_names[a]},
                         {"vector", fr.embedding}};
      out += rec.dump();
      out += '\n';
    }
  }
  return out;
}

inline EmbeddingsByAspect load_embeddings_jsonl(const std::string& path) {
  std::istringstream in(read_file(path));
  EmbeddingsByAspect out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
    out[rec.at("aspect").get<std::string>()][rec.at("id").get<std::string>()] =
        rec.at("vector").get<std::vector<double>>();
  }
  if (out.empty()) throw DataError(path + ": no embedding records");
  return out;
}

}  // namespace aspects
