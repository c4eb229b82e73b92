#pragma once

// Chat-completion client for querying a remote predictor endpoint. The wire
// format is the de-facto open schema: POST {model, temperature, messages}
// and read choices[0].message.content. Transport errors are retried with
// exponential backoff; parse failures are not.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "defeat/predictor.hpp"
#include "defeat/prompt.hpp"

namespace defeat {

struct EndpointConfig {
  std::string base_url = "http://127.0.0.1:8080";
  std::string path = "/v1/chat/completions";
  std::string model = "predictor";
  std::string api_token;       // optional bearer credential
  double timeout_s = 30.0;     // must be positive
  int max_retries = 2;         // retries after the first attempt
  int backoff_ms = 250;        // doubled per retry
  double temperature = 0.0;    // pinned for determinism
};

// Environment overrides for the endpoint URL and credential token.
inline constexpr const char* kEndpointUrlEnv = "DEFEAT_ENDPOINT_URL";
inline constexpr const char* kApiTokenEnv = "DEFEAT_API_TOKEN";

inline EndpointConfig with_env_overrides(EndpointConfig cfg) {
  if (const char* url = std::getenv(kEndpointUrlEnv)) cfg.base_url = url;
  if (const char* token = std::getenv(kApiTokenEnv)) cfg.api_token = token;
  return cfg;
}

namespace detail {

inline bool retriable_status(int status) {
  return status == 429 || (status >= 500 && status <= 599);
}

}  // namespace detail

inline PredictOutcome remote_predict(const DrivingScenario& scenario, const EndpointConfig& cfg,
                                     PromptMode mode) {
  if (!(cfg.timeout_s > 0.0)) throw std::invalid_argument("endpoint timeout must be positive");
  if (cfg.max_retries < 0) throw std::invalid_argument("endpoint retries must be >= 0");

  const PromptPair prompt = render_prompt(scenario, mode);
  nlohmann::ordered_json body;
  body["model"] = cfg.model;
  body["temperature"] = cfg.temperature;
  body["messages"] = nlohmann::ordered_json::array(
      {{{"role", "system"}, {"content", prompt.system}},
       {{"role", "user"}, {"content", prompt.user}}});
  const std::string payload = body.dump();

  httplib::Client client(cfg.base_url);
  const auto timeout = std::chrono::duration<double>(cfg.timeout_s);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::milliseconds>(timeout));
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::milliseconds>(timeout));
  client.set_write_timeout(std::chrono::duration_cast<std::chrono::milliseconds>(timeout));
  if (!cfg.api_token.empty()) client.set_bearer_token_auth(cfg.api_token);

  int last_status = 0;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(
          std::chrono::milliseconds(cfg.backoff_ms << (attempt - 1)));
    }
    httplib::Result res = client.Post(cfg.path, payload, "application/json");
    if (!res) {
      last_status = 0;
      continue;  // connection error or timeout
    }
    if (res->status != 200) {
      last_status = res->status;
      if (detail::retriable_status(res->status)) continue;
      throw TransportError(TransportError::Kind::HttpStatus, res->status,
                           "endpoint returned HTTP " + std::to_string(res->status));
    }
    std::string content;
    try {
      content = nlohmann::json::parse(res->body)
                    .at("choices")
                    .at(0)
                    .at("message")
                    .at("content")
                    .get<std::string>();
    } catch (const std::exception& e) {
      throw TransportError(TransportError::Kind::HttpStatus, res->status,
                           std::string("malformed completion envelope: ") + e.what());
    }
    ParseOutcome parsed = parse_response(content, mode);
    return outcome_from(std::move(parsed), std::move(content));
  }

  if (last_status != 0) {
    throw TransportError(TransportError::Kind::HttpStatus, last_status,
                         "endpoint kept failing with HTTP " + std::to_string(last_status) +
                             " after " + std::to_string(cfg.max_retries + 1) + " attempts");
  }
  throw TransportError(TransportError::Kind::Timeout, 0,
                       "endpoint unreachable after " + std::to_string(cfg.max_retries + 1) +
                           " attempts");
}

class RemotePredictor : public Predictor {
 public:
  RemotePredictor(EndpointConfig cfg, PromptMode mode) : cfg_(std::move(cfg)), mode_(mode) {}

  PredictOutcome predict(const DrivingScenario& s) override {
    return remote_predict(s, cfg_, mode_);
  }

  // Temperature is pinned to 0, so campaigns treat the endpoint as
  // deterministic and may memoize its answers.
  PredictorCapabilities capabilities() const override { return {mode_, 4, true}; }

  const EndpointConfig& config() const { return cfg_; }

 private:
  EndpointConfig cfg_;
  PromptMode mode_;
};

}  // namespace defeat
