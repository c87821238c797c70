#pragma once
// SPDX-License-Identifier: Apache-2.0

// Minimal autoregressive model: a dense table of logit rows indexed by the
// last `order` tokens (shorter contexts near the sequence start have their
// own rows). Serialized as versioned JSON with one row per context tuple.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "akl/divergence.hpp"
#include "akl/errors.hpp"
#include "akl/rng.hpp"
#include "akl/types.hpp"

namespace akl {

struct TokenSequence {
  std::vector<std::int32_t> tokens;

  std::size_t length() const noexcept { return tokens.size(); }
};

class TabularLM {
 public:
  static constexpr int kFormatVersion = 1;

  TabularLM() = default;

  /// Zero-initialized dense table: one row per context of every length in
  /// [0, order]. Row count is sum_{L=0..order} V^L and is capped to keep the
  /// table desk-sized.
  TabularLM(std::size_t vocab, std::size_t order) : vocab_(vocab), order_(order) {
    if (vocab < 2) throw invalid_input("TabularLM: vocabulary size must be >= 2");
    level_offset_.resize(order + 2);
    level_offset_[0] = 0;
    std::size_t level = 1;  // V^L
    for (std::size_t l = 0; l <= order; ++l) {
      level_offset_[l + 1] = level_offset_[l] + level;
      if (level_offset_[l + 1] > kMaxRows) {
        throw invalid_input("TabularLM: table would need " +
                            std::to_string(level_offset_[l + 1]) + "+ rows (cap " +
                            std::to_string(kMaxRows) + ")");
      }
      level *= vocab;
    }
    rows_.assign(level_offset_[order + 1], std::vector<double>(vocab, 0.0));
  }

  std::size_t vocab() const noexcept { return vocab_; }
  std::size_t order() const noexcept { return order_; }
  std::size_t row_count() const noexcept { return rows_.size(); }

  /// Context key for position t of a sequence: the last min(t, order) tokens.
  std::vector<std::int32_t> context_at(const TokenSequence& seq, std::size_t t) const {
    const std::size_t len = std::min(t, order_);
    return {seq.tokens.begin() + static_cast<std::ptrdiff_t>(t - len),
            seq.tokens.begin() + static_cast<std::ptrdiff_t>(t)};
  }

  std::size_t context_index(std::span<const std::int32_t> ctx) const {
    if (ctx.size() > order_) {
      throw invalid_input("TabularLM: context longer than model order");
    }
    std::size_t idx = 0;
    for (std::int32_t tok : ctx) {
      if (tok < 0 || static_cast<std::size_t>(tok) >= vocab_) {
        throw invalid_input("TabularLM: token " + std::to_string(tok) + " outside vocabulary");
      }
      idx = idx * vocab_ + static_cast<std::size_t>(tok);
    }
    idx += level_offset_[ctx.size()];
    if (idx >= rows_.size()) {
      throw internal_error("TabularLM: context index escaped the dense table");
    }
    return idx;
  }

  const std::vector<double>& row(std::size_t idx) const { return rows_.at(idx); }
  std::vector<double>& row(std::size_t idx) { return rows_.at(idx); }

  LogitVector logits_for(std::span<const std::int32_t> ctx) const {
    return LogitVector{rows_[context_index(ctx)]};
  }

  void set_row(std::span<const std::int32_t> ctx, std::vector<double> logits) {
    if (logits.size() != vocab_) throw invalid_input("TabularLM: row has wrong width");
    for (double v : logits) {
      if (!std::isfinite(v)) throw invalid_input("TabularLM: non-finite logit in row");
    }
    rows_[context_index(ctx)] = std::move(logits);
  }

  /// Reconstructs the context tuple for a dense row index.
  std::vector<std::int32_t> context_of_index(std::size_t idx) const {
    std::size_t len = 0;
    while (idx >= level_offset_[len + 1]) ++len;
    std::size_t rel = idx - level_offset_[len];
    std::vector<std::int32_t> ctx(len);
    for (std::size_t i = len; i-- > 0;) {
      ctx[i] = static_cast<std::int32_t>(rel % vocab_);
      rel /= vocab_;
    }
    return ctx;
  }

  nlohmann::json to_json() const {
    nlohmann::json rows = nlohmann::json::object();
    for (std::size_t idx = 0; idx < rows_.size(); ++idx) {
      rows[key_of(context_of_index(idx))] = rows_[idx];
    }
    return nlohmann::json{
        {"version", kFormatVersion}, {"V", vocab_}, {"order", order_}, {"rows", std::move(rows)}};
  }

  static TabularLM from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("version") || !j.contains("V") || !j.contains("order") ||
        !j.contains("rows")) {
      throw invalid_input("TabularLM: malformed JSON document");
    }
    if (j.at("version").get<int>() != kFormatVersion) {
      throw invalid_input("TabularLM: unsupported format version");
    }
    TabularLM lm(j.at("V").get<std::size_t>(), j.at("order").get<std::size_t>());
    const auto& rows = j.at("rows");
    if (!rows.is_object() || rows.size() != lm.row_count()) {
      throw invalid_input("TabularLM: expected a dense table of " +
                          std::to_string(lm.row_count()) + " rows, got " +
                          std::to_string(rows.size()));
    }
    for (const auto& [key, value] : rows.items()) {
      lm.set_row(parse_key(key), value.get<std::vector<double>>());
    }
    return lm;
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw invalid_input("TabularLM: cannot open " + path.string() + " for writing");
    out << to_json().dump(2) << '\n';
  }

  static TabularLM load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw invalid_input("TabularLM: cannot open " + path.string());
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw invalid_input("TabularLM: parse error in " + path.string() + ": " + e.what());
    }
    return from_json(j);
  }

  bool operator==(const TabularLM& other) const = default;

 private:
  static constexpr std::size_t kMaxRows = 1u << 22;

  static std::string key_of(const std::vector<std::int32_t>& ctx) {
    std::string key;
    for (std::size_t i = 0; i < ctx.size(); ++i) {
      if (i) key += ',';
      key += std::to_string(ctx[i]);
    }
    return key;
  }

  static std::vector<std::int32_t> parse_key(const std::string& key) {
    std::vector<std::int32_t> ctx;
    if (key.empty()) return ctx;
    std::size_t pos = 0;
    while (pos <= key.size()) {
      const std::size_t comma = key.find(',', pos);
      const std::string part = key.substr(pos, comma == std::string::npos ? comma : comma - pos);
      try {
        ctx.push_back(std::stoi(part));
      } catch (const std::exception&) {
        throw invalid_input("TabularLM: bad context key '" + key + "'");
      }
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    return ctx;
  }

  std::size_t vocab_ = 0;
  std::size_t order_ = 0;
  std::vector<std::size_t> level_offset_;
  std::vector<std::vector<double>> rows_;
};

/// Ancestral sampling: `count` sequences of exactly `max_len` tokens from the
/// softmaxed rows. Deterministic per seed.
inline std::vector<TokenSequence> sample_corpus(const TabularLM& model, std::size_t count,
                                                std::size_t max_len, std::uint64_t seed) {
  if (count < 1) throw invalid_input("sample_corpus: count must be >= 1");
  if (max_len < 1) throw invalid_input("sample_corpus: max_len must be >= 1");
  std::mt19937_64 gen(seed);
  std::vector<TokenSequence> corpus;
  corpus.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    TokenSequence seq;
    seq.tokens.reserve(max_len);
    for (std::size_t t = 0; t < max_len; ++t) {
      const auto ctx = model.context_at(seq, t);
      const Distribution dist = softmax(model.logits_for(ctx));
      seq.tokens.push_back(static_cast<std::int32_t>(rng::next_categorical(gen, dist.probs)));
    }
    corpus.push_back(std::move(seq));
  }
  return corpus;
}

}  // namespace akl
