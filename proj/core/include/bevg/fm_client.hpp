// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace bevg {

enum class ClientKind { captioner, paraphraser };
std::string_view client_kind_name(ClientKind k);

/// Raised by a client when one request attempt fails (connection, timeout,
/// non-2xx status, malformed response). The message is the raw error.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FMRequest {
  std::string prompt;
  std::optional<std::vector<std::uint8_t>> image_png;
  /// Ground-truth fields read only by the offline mock clients. Never sent
  /// over the wire.
  nlohmann::json mock_context;
};

/// Wire body: {"prompt": ..., "image": base64 PNG} (image omitted when absent).
std::string request_body(const FMRequest& req);
/// Extracts "text" from a response body; throws TransportError when missing.
std::string parse_response_body(const std::string& body);

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> base64_decode(const std::string& text);

struct FMClientConfig {
  std::string endpoint;  // http://host[:port]/path; empty for mock clients
  double timeout_s = 60.0;
  int max_retries = 3;
  ClientKind kind = ClientKind::captioner;
  double backoff_initial_s = 0.5;
  std::string api_key;  // sent as a bearer token when nonempty
};

/// One request per call; retries live in call_with_retries.
class FMClient {
 public:
  virtual ~FMClient() = default;
  virtual std::string complete(const FMRequest& req) = 0;
  virtual ClientKind kind() const = 0;
};

/// JSON-over-HTTP client. Plain http only.
class HttpFMClient final : public FMClient {
 public:
  explicit HttpFMClient(FMClientConfig cfg);
  std::string complete(const FMRequest& req) override;
  ClientKind kind() const override { return cfg_.kind; }

 private:
  FMClientConfig cfg_;
  std::string host_;
  std::string path_;
};

/// Options for the deterministic offline clients.
struct MockOptions {
  std::uint64_t seed = 0;
  /// Fraction of requests whose every attempt raises TransportError. The
  /// choice is a hash of (seed, prompt), so it is stable across retries.
  double failure_rate = 0.0;
};

class MockCaptioner final : public FMClient {
 public:
  explicit MockCaptioner(MockOptions opts = {}) : opts_(opts) {}
  /// "A {color} {category} is in the {sector} of the scene, about N meters away."
  std::string complete(const FMRequest& req) override;
  ClientKind kind() const override { return ClientKind::captioner; }

 private:
  MockOptions opts_;
};

class MockParaphraser final : public FMClient {
 public:
  explicit MockParaphraser(MockOptions opts = {}) : opts_(opts) {}
  /// Rewrites the sentence after the first newline with the synonym table.
  std::string complete(const FMRequest& req) override;
  ClientKind kind() const override { return ClientKind::paraphraser; }

 private:
  MockOptions opts_;
};

/// Deterministic synonym substitution (whole words and phrases,
/// case-preserving on the first letter); `seed` picks among alternatives.
std::string substitute_synonyms(const std::string& sentence, std::uint64_t seed);

struct RetryPolicy {
  int max_retries = 3;
  double backoff_initial_s = 0.5;
  std::function<void(std::chrono::duration<double>)> sleep;  // defaults to sleeping the thread
};

struct CallOutcome {
  std::optional<std::string> text;
  int attempts = 0;
  std::vector<std::string> errors;  // raw error per failed attempt
};

/// Up to max_retries + 1 attempts with backoff initial * 2^i between them.
CallOutcome call_with_retries(FMClient& client, const FMRequest& req, const RetryPolicy& policy);

/// Mock client, or an HTTP client when `endpoint` is set. Endpoint and key
/// fall back to BEVG_CAPTIONER_URL / BEVG_PARAPHRASER_URL and BEVG_FM_API_KEY.
std::unique_ptr<FMClient> make_client(ClientKind kind, FMClientConfig cfg, bool mock, MockOptions mock_opts = {});

}  // namespace bevg
