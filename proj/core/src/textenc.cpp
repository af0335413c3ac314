// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#include "bevg/textenc.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "bevg/random.hpp"

namespace bevg {

std::vector<std::string> tokenize(std::string_view prompt) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : prompt) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!cur.empty()) tokens.push_back(std::move(cur));
      cur.clear();
    } else if (std::isalnum(c) || c >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
    // Other ASCII punctuation is dropped, so "don't" becomes "dont".
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  if (tokens.empty()) throw std::invalid_argument("tokenize: prompt has no tokens");
  return tokens;
}

std::vector<double> mean_pool_normalized(const std::vector<double>& word, int dim,
                                         const std::vector<bool>& include) {
  std::vector<double> out(static_cast<std::size_t>(dim), 0.0);
  std::size_t n = 0;
  for (std::size_t i = 0; i < include.size(); ++i) {
    if (!include[i]) continue;
    ++n;
    for (int k = 0; k < dim; ++k) out[k] += word[i * dim + k];
  }
  if (n == 0) return out;
  double norm = 0.0;
  for (double& v : out) {
    v /= static_cast<double>(n);
    norm += v * v;
  }
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (double& v : out) v /= norm;
  }
  return out;
}

HashEncoder::HashEncoder(int dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim <= 0) throw std::invalid_argument("HashEncoder: dim must be positive");
}

std::vector<double> HashEncoder::token_vector(std::string_view token) const {
  Rng rng(mix64(fnv1a64(token) ^ mix64(seed_)));
  std::vector<double> v(static_cast<std::size_t>(dim_));
  double norm = 0.0;
  for (double& x : v) {
    x = rng.normal();
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

TextEmbeddings HashEncoder::encode(std::string_view prompt) const {
  TextEmbeddings e;
  e.dim = dim_;
  e.tokens = tokenize(prompt);
  e.word.reserve(e.tokens.size() * dim_);
  for (const auto& t : e.tokens) {
    const auto v = token_vector(t);
    e.word.insert(e.word.end(), v.begin(), v.end());
  }
  e.sentence = mean_pool_normalized(e.word, dim_, std::vector<bool>(e.tokens.size(), true));
  return e;
}

TableEncoder::TableEncoder(int dim, std::unordered_map<std::string, std::vector<double>> table)
    : dim_(dim), table_(std::move(table)) {
  if (dim <= 0) throw std::invalid_argument("TableEncoder: dim must be positive");
  for (const auto& [tok, vec] : table_) {
    if (static_cast<int>(vec.size()) != dim) {
      throw std::invalid_argument("TableEncoder: vector for '" + tok + "' has wrong width");
    }
  }
}

TableEncoder TableEncoder::from_file(const std::filesystem::path& path,
                                     std::optional<int> expected_dim) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("TableEncoder: cannot open vocabulary file " + path.string());
  std::unordered_map<std::string, std::vector<double>> table;
  int dim = -1;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::string token;
    if (!(ss >> token)) continue;
    std::vector<double> vec;
    double v = 0.0;
    while (ss >> v) vec.push_back(v);
    if (dim < 0) dim = static_cast<int>(vec.size());
    if (static_cast<int>(vec.size()) != dim || dim == 0) {
      throw std::runtime_error("TableEncoder: inconsistent width at line " + std::to_string(lineno));
    }
    table.emplace(std::move(token), std::move(vec));
  }
  if (dim <= 0) throw std::runtime_error("TableEncoder: empty vocabulary file " + path.string());
  if (expected_dim && *expected_dim != dim) {
    throw std::runtime_error("TableEncoder: vocabulary width " + std::to_string(dim) +
                             " does not match requested " + std::to_string(*expected_dim));
  }
  return TableEncoder(dim, std::move(table));
}

TextEmbeddings TableEncoder::encode(std::string_view prompt) const {
  TextEmbeddings e;
  e.dim = dim_;
  e.tokens = tokenize(prompt);
  e.word.assign(e.tokens.size() * dim_, 0.0);
  std::vector<bool> known(e.tokens.size(), false);
  for (std::size_t i = 0; i < e.tokens.size(); ++i) {
    const auto it = table_.find(e.tokens[i]);
    if (it == table_.end()) continue;
    known[i] = true;
    std::copy(it->second.begin(), it->second.end(), e.word.begin() + i * dim_);
  }
  e.sentence = mean_pool_normalized(e.word, dim_, known);
  return e;
}

std::vector<double> TableEncoder::weights() const {
  std::vector<std::string> keys;
  keys.reserve(table_.size());
  for (const auto& kv : table_) keys.push_back(kv.first);
  std::sort(keys.begin(), keys.end());
  std::vector<double> out;
  for (const auto& k : keys) {
    const auto& v = table_.at(k);
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

ExternalEncoder::ExternalEncoder(std::string name, int dim, ExternalEncodeFn fn)
    : name_(std::move(name)), dim_(dim), fn_(std::move(fn)) {
  if (!fn_) throw std::invalid_argument("ExternalEncoder: empty callback");
}

TextEmbeddings ExternalEncoder::encode(std::string_view prompt) const {
  TextEmbeddings e;
  e.dim = dim_;
  e.tokens = tokenize(prompt);
  auto out = fn_(e.tokens);
  if (out.word.size() != e.tokens.size() * static_cast<std::size_t>(dim_)) {
    throw std::runtime_error("ExternalEncoder: adapter returned wrong word matrix size");
  }
  e.word = std::move(out.word);
  if (out.pooled) {
    if (out.pooled->size() != static_cast<std::size_t>(dim_)) {
      throw std::runtime_error("ExternalEncoder: adapter returned wrong pooled width");
    }
    e.sentence = std::move(*out.pooled);
  } else {
    e.sentence = mean_pool_normalized(e.word, dim_, std::vector<bool>(e.tokens.size(), true));
  }
  for (double v : e.word) {
    if (!std::isfinite(v)) throw std::runtime_error("ExternalEncoder: non-finite embedding");
  }
  return e;
}

std::unique_ptr<TextEncoder> make_encoder(const EncoderSpec& spec) {
  std::unique_ptr<TextEncoder> enc;
  if (spec.name == "hash-test") {
    enc = std::make_unique<HashEncoder>(spec.dim, spec.seed);
  } else if (spec.name == "table-lookup") {
    if (spec.vocab_path.empty()) {
      throw std::invalid_argument("make_encoder: table-lookup requires a vocabulary file");
    }
    enc = std::make_unique<TableEncoder>(TableEncoder::from_file(spec.vocab_path, spec.dim));
  } else if (spec.name == "external") {
    throw std::invalid_argument(
        "make_encoder: external encoders attach through ExternalEncoder, not a spec");
  } else {
    throw std::invalid_argument("make_encoder: unknown encoder '" + spec.name + "'");
  }
  enc->set_trainable(spec.trainable);
  return enc;
}

}  // namespace bevg
