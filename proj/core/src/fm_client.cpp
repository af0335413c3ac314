// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#include "bevg/fm_client.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/binary_from_base64.hpp>
#include <boost/archive/iterators/transform_width.hpp>
#include <httplib.h>

#include "bevg/random.hpp"

namespace bevg {

std::string_view client_kind_name(ClientKind k) { return k == ClientKind::captioner ? "captioner" : "paraphraser"; }

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  using namespace boost::archive::iterators;
  using It = base64_from_binary<transform_width<std::vector<std::uint8_t>::const_iterator, 6, 8>>;
  std::string out(It(bytes.begin()), It(bytes.end()));
  out.append((3 - bytes.size() % 3) % 3, '=');
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  using namespace boost::archive::iterators;
  using It = transform_width<binary_from_base64<std::string::const_iterator>, 8, 6>;
  std::string body = text;
  while (!body.empty() && body.back() == '=') body.pop_back();
  const std::size_t n = body.size() * 6 / 8;
  body.append((4 - body.size() % 4) % 4, 'A');
  std::vector<std::uint8_t> out;
  try {
    out.assign(It(body.cbegin()), It(body.cend()));
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("base64_decode: ") + e.what());
  }
  out.resize(n);
  return out;
}

std::string request_body(const FMRequest& req) {
  nlohmann::json j;
  j["prompt"] = req.prompt;
  if (req.image_png) j["image"] = base64_encode(*req.image_png);
  return j.dump();
}

std::string parse_response_body(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("malformed response: ") + e.what());
  }
  if (!j.is_object() || !j.contains("text") || !j["text"].is_string()) {
    throw TransportError("response has no string field \"text\": " + body.substr(0, 200));
  }
  return j["text"].get<std::string>();
}

HttpFMClient::HttpFMClient(FMClientConfig cfg) : cfg_(std::move(cfg)) {
  const auto scheme = cfg_.endpoint.find("://");
  if (scheme == std::string::npos || cfg_.endpoint.substr(0, scheme) != "http") {
    throw std::invalid_argument("endpoint must be an http:// URL: " + cfg_.endpoint);
  }
  const auto slash = cfg_.endpoint.find('/', scheme + 3);
  host_ = cfg_.endpoint.substr(0, slash);
  path_ = slash == std::string::npos ? "/" : cfg_.endpoint.substr(slash);
}

std::string HttpFMClient::complete(const FMRequest& req) {
  httplib::Client cli(host_);
  const auto secs = static_cast<time_t>(cfg_.timeout_s);
  const auto usecs = static_cast<time_t>((cfg_.timeout_s - static_cast<double>(secs)) * 1e6);
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);
  auto res = cli.Post(path_, headers, request_body(req), "application/json");
  if (!res) throw TransportError("request failed: " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300) {
    throw TransportError("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
  }
  return parse_response_body(res->body);
}

namespace {

bool mock_fails(const MockOptions& opts, const std::string& prompt) {
  if (opts.failure_rate <= 0.0) return false;
  const std::uint64_t h = mix64(opts.seed ^ fnv1a64(prompt));
  return static_cast<double>(h >> 11) * 0x1.0p-53 < opts.failure_rate;
}

struct Synonym {
  std::string_view phrase;
  std::vector<std::string_view> alternatives;
};

// Longer phrases first so "traffic cone" wins over shorter entries.
const std::vector<Synonym>& synonym_table() {
  static const std::vector<Synonym> table{
      {"construction vehicle", {"construction machine", "work vehicle"}},
      {"traffic cone", {"road cone", "safety cone"}},
      {"driving down", {"navigating", "cruising along"}},
      {"at night", {"under the cover of darkness", "after dark"}},
      {"standing", {"positioned", "waiting"}},
      {"parked", {"stationary", "resting"}},
      {"street", {"boulevard", "road", "avenue"}},
      {"car", {"automobile", "vehicle"}},
      {"truck", {"lorry", "hauler"}},
      {"bus", {"coach"}},
      {"pedestrian", {"person on foot", "walker"}},
      {"motorcycle", {"motorbike"}},
      {"bicycle", {"bike", "cycle"}},
      {"barrier", {"barricade"}},
      {"woman", {"lady"}},
      {"dress", {"gown"}},
      {"scene", {"surroundings", "view"}},
      {"about", {"roughly", "approximately"}},
      {"meters", {"metres"}},
      {"large", {"sizable", "big"}},
      {"small", {"compact", "little"}},
  };
  return table;
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

bool matches_at(const std::string& s, std::size_t i, std::string_view phrase) {
  if (i + phrase.size() > s.size()) return false;
  if (i > 0 && is_word_char(s[i - 1])) return false;
  if (i + phrase.size() < s.size() && is_word_char(s[i + phrase.size()])) return false;
  for (std::size_t k = 0; k < phrase.size(); ++k) {
    if (std::tolower(static_cast<unsigned char>(s[i + k])) != phrase[k]) return false;
  }
  return true;
}

}  // namespace

std::string substitute_synonyms(const std::string& sentence, std::uint64_t seed) {
  std::string out;
  std::size_t i = 0;
  while (i < sentence.size()) {
    const Synonym* hit = nullptr;
    if (i == 0 || !is_word_char(sentence[i - 1])) {
      for (const auto& syn : synonym_table()) {
        if (matches_at(sentence, i, syn.phrase)) {
          hit = &syn;
          break;
        }
      }
    }
    if (!hit) {
      out.push_back(sentence[i++]);
      continue;
    }
    const auto pick = mix64(seed ^ fnv1a64(hit->phrase)) % hit->alternatives.size();
    std::string alt(hit->alternatives[pick]);
    if (std::isupper(static_cast<unsigned char>(sentence[i]))) {
      alt[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(alt[0])));
    }
    out += alt;
    i += hit->phrase.size();
  }
  return out;
}

std::string MockCaptioner::complete(const FMRequest& req) {
  if (mock_fails(opts_, req.prompt + req.mock_context.dump())) {
    throw TransportError("mock captioner: injected transport failure");
  }
  const auto& c = req.mock_context;
  std::string text = "A ";
  if (c.contains("color")) text += c["color"].get<std::string>() + " ";
  text += c.value("category", std::string("object"));
  text += " is in the " + c.value("sector", std::string("front")) + " of the scene";
  if (c.contains("range")) text += ", about " + std::to_string(std::lround(c["range"].get<double>())) + " meters away";
  text += ".";
  return text;
}

std::string MockParaphraser::complete(const FMRequest& req) {
  if (mock_fails(opts_, req.prompt)) throw TransportError("mock paraphraser: injected transport failure");
  const auto nl = req.prompt.find('\n');
  const std::string sentence = nl == std::string::npos ? req.prompt : req.prompt.substr(nl + 1);
  return substitute_synonyms(sentence, mix64(opts_.seed ^ fnv1a64(sentence)));
}

CallOutcome call_with_retries(FMClient& client, const FMRequest& req, const RetryPolicy& policy) {
  CallOutcome out;
  const int attempts = std::max(0, policy.max_retries) + 1;
  for (int a = 0; a < attempts; ++a) {
    if (a > 0) {
      const std::chrono::duration<double> wait(policy.backoff_initial_s * std::ldexp(1.0, a - 1));
      if (policy.sleep) {
        policy.sleep(wait);
      } else {
        std::this_thread::sleep_for(wait);
      }
    }
    ++out.attempts;
    try {
      out.text = client.complete(req);
      return out;
    } catch (const TransportError& e) {
      out.errors.emplace_back(e.what());
    }
  }
  return out;
}

std::unique_ptr<FMClient> make_client(ClientKind kind, FMClientConfig cfg, bool mock, MockOptions mock_opts) {
  if (mock) {
    if (kind == ClientKind::captioner) return std::make_unique<MockCaptioner>(mock_opts);
    return std::make_unique<MockParaphraser>(mock_opts);
  }
  cfg.kind = kind;
  if (cfg.endpoint.empty()) {
    const char* env = std::getenv(kind == ClientKind::captioner ? "BEVG_CAPTIONER_URL" : "BEVG_PARAPHRASER_URL");
    if (env) cfg.endpoint = env;
  }
  if (cfg.api_key.empty()) {
    if (const char* key = std::getenv("BEVG_FM_API_KEY")) cfg.api_key = key;
  }
  if (cfg.endpoint.empty()) {
    throw std::invalid_argument(std::string("no endpoint configured for the ") +
                                std::string(client_kind_name(kind)));
  }
  return std::make_unique<HttpFMClient>(std::move(cfg));
}

}  // namespace bevg
