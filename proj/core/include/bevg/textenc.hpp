// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace bevg {

/// Word-level matrix (L x dim, row-major) and pooled sentence vector.
struct TextEmbeddings {
  int dim = 0;
  std::vector<std::string> tokens;
  std::vector<double> word;
  std::vector<double> sentence;

  std::size_t length() const { return tokens.size(); }
  const double* word_row(std::size_t i) const { return word.data() + i * static_cast<std::size_t>(dim); }
};

/// Lowercase, strip punctuation, split on whitespace. Throws
/// std::invalid_argument for prompts with no tokens.
std::vector<std::string> tokenize(std::string_view prompt);

struct EncoderSpec {
  std::string name = "hash-test";  // hash-test | table-lookup | external
  int dim = 64;
  std::uint64_t seed = 0;
  std::filesystem::path vocab_path;  // table-lookup only
  bool trainable = false;
};

class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual std::string name() const = 0;
  virtual int dim() const = 0;
  virtual TextEmbeddings encode(std::string_view prompt) const = 0;
  /// Flattened encoder weights, empty for stateless encoders. Used to verify
  /// that training leaves a frozen encoder untouched.
  virtual std::vector<double> weights() const { return {}; }
  bool trainable() const { return trainable_; }
  void set_trainable(bool t) { trainable_ = t; }

 private:
  bool trainable_ = false;
};

/// Deterministic random unit vector per token, keyed by (token, seed).
class HashEncoder final : public TextEncoder {
 public:
  HashEncoder(int dim, std::uint64_t seed);
  std::string name() const override { return "hash-test"; }
  int dim() const override { return dim_; }
  TextEmbeddings encode(std::string_view prompt) const override;
  std::vector<double> token_vector(std::string_view token) const;

 private:
  int dim_;
  std::uint64_t seed_;
};

/// GloVe-style lookup table. Out-of-vocabulary tokens get a zero row and are
/// excluded from the sentence mean.
class TableEncoder final : public TextEncoder {
 public:
  TableEncoder(int dim, std::unordered_map<std::string, std::vector<double>> table);
  static TableEncoder from_file(const std::filesystem::path& path,
                                std::optional<int> expected_dim = std::nullopt);

  std::string name() const override { return "table-lookup"; }
  int dim() const override { return dim_; }
  TextEmbeddings encode(std::string_view prompt) const override;
  std::vector<double> weights() const override;
  bool contains(const std::string& token) const { return table_.count(token) > 0; }
  std::size_t vocabulary_size() const { return table_.size(); }

 private:
  int dim_;
  std::unordered_map<std::string, std::vector<double>> table_;
};

/// Seam for pretrained encoders living outside this library. The callback
/// returns word rows (L x dim) and optionally its own pooled vector.
struct ExternalOutput {
  std::vector<double> word;
  std::optional<std::vector<double>> pooled;
};
using ExternalEncodeFn = std::function<ExternalOutput(const std::vector<std::string>& tokens)>;

class ExternalEncoder final : public TextEncoder {
 public:
  ExternalEncoder(std::string name, int dim, ExternalEncodeFn fn);
  std::string name() const override { return name_; }
  int dim() const override { return dim_; }
  TextEmbeddings encode(std::string_view prompt) const override;

 private:
  std::string name_;
  int dim_;
  ExternalEncodeFn fn_;
};

/// Builds a built-in encoder. "external" cannot be built from a spec alone and
/// is rejected here; construct ExternalEncoder directly.
std::unique_ptr<TextEncoder> make_encoder(const EncoderSpec& spec);

/// Mean of the given rows, L2-normalized; zero vector when no rows qualify.
std::vector<double> mean_pool_normalized(const std::vector<double>& word, int dim,
                                         const std::vector<bool>& include);

}  // namespace bevg
