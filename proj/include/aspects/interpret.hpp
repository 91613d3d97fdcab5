// Gate-to-highlight transforms: a truncated mean filter over the unpadded
// prefix, min-max normalization to [0,1], and JSON/HTML export of per-token
// intensities.
#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aspects/checkpoint.hpp"
#include "aspects/encoder.hpp"
#include "aspects/vocab.hpp"

namespace aspects {

// Mean filter over [i - w/2, i + w/2] intersected with [0, true_len); edges
// average over the in-range neighbors only. Padded positions pass through
// untouched.
inline std::vector<double> smooth_gates(const std::vector<double>& gates, int true_len,
                                        int window = 5) {
  if (window < 1 || window % 2 == 0)
    throw ConfigError("smooth_gates: window must be odd and >= 1");
  if (true_len < 0 || true_len > static_cast<int>(gates.size()))
    throw ConfigError("smooth_gates: true_len out of range");
  std::vector<double> out = gates;
  const int half = window / 2;
  for (int i = 0; i < true_len; ++i) {
    const int lo = std::max(0, i - half);
    const int hi = std::min(true_len - 1, i + half);
    double sum = 0.0;
    for (int j = lo; j <= hi; ++j) sum += gates[static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(i)] = sum / static_cast<double>(hi - lo + 1);
  }
  return out;
}

// (g - min) / (max - min) over the unpadded prefix; a constant prefix maps
// to all zeros since the ratio is undefined there.
inline std::vector<double> normalize_gates(const std::vector<double>& gates, int true_len) {
  if (true_len < 0 || true_len > static_cast<int>(gates.size()))
    throw ConfigError("normalize_gates: true_len out of range");
  std::vector<double> out = gates;
  if (true_len == 0) return out;
  double lo = gates[0], hi = gates[0];
  for (int i = 1; i < true_len; ++i) {
    lo = std::min(lo, gates[static_cast<std::size_t>(i)]);
    hi = std::max(hi, gates[static_cast<std::size_t>(i)]);
  }
  if (hi == lo) {
    for (int i = 0; i < true_len; ++i) out[static_cast<std::size_t>(i)] = 0.0;
    return out;
  }
  // True division so the max maps to exactly 1.0 and the transform is
  // bitwise idempotent.
  const double range = hi - lo;
  for (int i = 0; i < true_len; ++i) {
    const double v = (gates[static_cast<std::size_t>(i)] - lo) / range;
    out[static_cast<std::size_t>(i)] = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

struct HighlightRecord {
  std::string doc_id;
  std::string aspect;
  std::vector<std::string> tokens;
  std::vector<double> intensities;  // same length as tokens, in [0,1]
};

inline HighlightRecord highlight_document(const AspectModel& model,
                                          const EncodedDocument& doc,
                                          const Vocabulary& vocab,
                                          const std::string& aspect_name, int aspect,
                                          int window = 5) {
  ForwardResult fr = forward_aspect(model, doc, aspect);
  const std::vector<double> smoothed = smooth_gates(fr.gates, doc.true_len, window);
  const std::vector<double> normalized = normalize_gates(smoothed, doc.true_len);
  HighlightRecord rec;
  rec.doc_id = doc.doc_id;
  rec.aspect = aspect_name;
  for (int t = 0; t < doc.true_len; ++t) {
    rec.tokens.push_back(vocab.id_to_token[static_cast<std::size_t>(doc.ids[static_cast<std::size_t>(t)])]);
    rec.intensities.push_back(normalized[static_cast<std::size_t>(t)]);
  }
  return rec;
}

inline nlohmann::json highlight_to_json(const HighlightRecord& rec) {
  return nlohmann::json{{"doc_id", rec.doc_id},
                        {"aspect", rec.aspect},
                        {"tokens", rec.tokens},
                        {"intensities", rec.intensities}};
}

enum class HighlightFormat { json, html };

namespace detail {

inline std::string html_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline int aspect_hue(int aspect) { return (aspect * 137) % 360; }

}  // namespace detail

inline std::string highlights_to_html(const std::vector<HighlightRecord>& records,
                                      const std::vector<std::string>& aspect_names) {
  std::string out;
  out += "<!doctype html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n"
         "<title>Gate highlights</title>\n</head>\n<body style=\"font-family:sans-serif\">\n";
  for (std::size_t a = 0; a < aspect_names.size(); ++a) {
    out += "<section>\n<h2>" + detail::html_escape(aspect_names[a]) + "</h2>\n";
    const int hue = detail::aspect_hue(static_cast<int>(a));
    for (const auto& rec : records) {
      if (rec.aspect != aspect_names[a]) continue;
      out += "<p><b>" + detail::html_escape(rec.doc_id) + "</b><br>\n";
      for (std::size_t t = 0; t < rec.tokens.size(); ++t) {
        char style[96];
        std::snprintf(style, sizeof(style), "background:hsla(%d,85%%,50%%,%.3f)", hue,
                      rec.intensities[t]);
        out += "<span style=\"" + std::string(style) + "\">" +
               detail::html_escape(rec.tokens[t]) + "</span> ";
      }
      out += "</p>\n";
    }
    out += "</section>\n";
  }
  out += "</body>\n</html>\n";
  return out;
}

// Writes one highlight artifact per format: JSONL of records, or a single
// standalone HTML page. The checkpoint's vocabulary hash must match the
// vocabulary the documents were encoded with.
inline std::string export_highlights(const Checkpoint& ckpt,
                                     const std::vector<EncodedDocument>& docs,
                                     const Vocabulary& vocab, HighlightFormat format,
                                     const std::string& path, int window = 5) {
  if (ckpt.vocab_hash != vocab.content_hash())
    throw DataError("export_highlights: vocabulary hash does not match checkpoint");
  std::vector<HighlightRecord> records;
  for (const auto& doc : docs) {
    for (std::size_t a = 0; a < ckpt.aspect_names.size(); ++a) {
      records.push_back(highlight_document(ckpt.model, doc, vocab, ckpt.aspect_names[a],
                                           static_cast<int>(a), window));
    }
  }
  std::string content;
  if (format == HighlightFormat::json) {
    for (const auto& rec : records) {
      content += highlight_to_json(rec).dump();
      content += '\n';
    }
  } else {
    content = highlights_to_html(records, ckpt.aspect_names);
  }
  atomic_write_file(path, content);
  return content;
}

}  // namespace aspects
