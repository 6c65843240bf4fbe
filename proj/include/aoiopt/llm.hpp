#pragma once

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "aoiopt/errors.hpp"
#include "aoiopt/model.hpp"
#include "aoiopt/optimize.hpp"
#include "aoiopt/trace.hpp"
#include "httplib.h"
#include "json.hpp"

// Iterative optimizer driven by a chat-completions endpoint: build a
// five-section prompt carrying exemplar and historical decisions, sample the
// model several times on the frozen prompt, evaluate and dedupe the parsed
// proposals, and append survivors to the history for the next round. A
// scripted in-process mock server makes the whole loop runnable offline.

namespace aoiopt::llm {

struct DecisionRecord {
  double rri_ms = 0.0;
  double speed_kmh = 0.0;
  double aoi_ms = 0.0;
};

struct PromptBundle {
  std::string background;
  std::string objective;
  std::string main_task;
  std::string output_format;
  std::vector<DecisionRecord> exemplars;
  std::vector<DecisionRecord> history;
};

inline PromptBundle default_bundle() {
  PromptBundle b;
  b.background =
      "Vehicles on a two-way highway broadcast periodic status packets over a "
      "shared sidelink using semi-persistent scheduling. Two tunable "
      "parameters shape performance: the resource reservation interval "
      "rri_ms and the vehicle speed speed_kmh. Traffic flow is fixed, so "
      "density equals flow divided by speed. Small rri_ms shrinks the "
      "selection window and raises collision probability when density is "
      "high; high speed raises Doppler-induced channel loss and forces blind "
      "retransmissions. Both effects age the delivered information.";
  b.objective =
      "Minimize the age of information (aoi_ms) of the broadcast packets by "
      "choosing rri_ms and speed_kmh inside the stated bounds.";
  b.main_task =
      "You are the optimizer in an iterative loop. Study the example "
      "decisions and the decision history below, each listing a tried "
      "(rri_ms, speed_kmh) pair with its measured aoi_ms, then propose one "
      "new pair you expect to lower aoi_ms. Do not repeat a pair that was "
      "already tried.";
  b.output_format =
      "Reply with exactly one JSON object and nothing else, for example: "
      "{\"rri_ms\": 20, \"speed_kmh\": 90}";
  return b;
}

namespace detail {

inline std::string render_record(const DecisionRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "{\"rri_ms\": %.10g, \"speed_kmh\": %.10g, \"aoi_ms\": %.10g}",
                r.rri_ms, r.speed_kmh, r.aoi_ms);
  return buf;
}

}  // namespace detail

// Deterministic rendering: fixed section headers, exemplars before history,
// history truncated to the most recent max_history records with the best
// record always retained, rendered oldest first.
inline std::string build_prompt(const PromptBundle& bundle, std::size_t max_history) {
  for (const std::string* s :
       {&bundle.background, &bundle.objective, &bundle.main_task, &bundle.output_format})
    if (s->empty()) throw ConfigError("build_prompt: empty prompt section");
  if (bundle.exemplars.empty())
    throw ConfigError("build_prompt: the exemplar section must not be empty");

  std::vector<DecisionRecord> shown;
  if (bundle.history.size() <= max_history) {
    shown = bundle.history;
  } else {
    std::size_t best_idx = 0;
    for (std::size_t i = 1; i < bundle.history.size(); ++i)
      if (bundle.history[i].aoi_ms < bundle.history[best_idx].aoi_ms) best_idx = i;
    const std::size_t window_start = bundle.history.size() - max_history;
    if (best_idx >= window_start) {
      shown.assign(bundle.history.begin() + window_start, bundle.history.end());
    } else {
      shown.push_back(bundle.history[best_idx]);
      shown.insert(shown.end(), bundle.history.begin() + window_start + 1,
                   bundle.history.end());
    }
  }

  std::string out;
  out += "## Task Background\n" + bundle.background + "\n\n";
  out += "## Task Objective\n" + bundle.objective + "\n\n";
  out += "## Main Task\n" + bundle.main_task + "\n\n";
  out += "## Output Format\n" + bundle.output_format + "\n\n";
  out += "## Example Decisions\n";
  for (const auto& r : bundle.exemplars) out += detail::render_record(r) + "\n";
  out += "\n## Decision History\n";
  if (shown.empty()) out += "(none yet)\n";
  for (const auto& r : shown) out += detail::render_record(r) + "\n";
  return out;
}

struct Proposal {
  double rri_ms = 0.0;
  double speed_kmh = 0.0;
  bool clamped = false;
};

// Extracts {"rri_ms": ..., "speed_kmh": ...} objects from free-form text
// (fenced or not). Out-of-range values are clamped to the given bounds and
// flagged; malformed text yields an empty list.
inline std::vector<Proposal> parse_proposals(const std::string& raw,
                                             const model::Bounds& rri_bounds,
                                             const model::Bounds& speed_bounds) {
  std::vector<Proposal> out;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] != '{') continue;
    int depth = 0;
    std::size_t j = i;
    for (; j < raw.size(); ++j) {
      if (raw[j] == '{') ++depth;
      if (raw[j] == '}' && --depth == 0) break;
    }
    if (depth != 0) break;
    const auto parsed = nlohmann::json::parse(raw.substr(i, j - i + 1), nullptr, false);
    if (!parsed.is_discarded() && parsed.is_object() && parsed.contains("rri_ms") &&
        parsed.contains("speed_kmh") && parsed["rri_ms"].is_number() &&
        parsed["speed_kmh"].is_number()) {
      Proposal p;
      p.rri_ms = parsed["rri_ms"].get<double>();
      p.speed_kmh = parsed["speed_kmh"].get<double>();
      if (std::isfinite(p.rri_ms) && std::isfinite(p.speed_kmh)) {
        const double cr = std::clamp(p.rri_ms, rri_bounds.lo, rri_bounds.hi);
        const double cv = std::clamp(p.speed_kmh, speed_bounds.lo, speed_bounds.hi);
        p.clamped = (cr != p.rri_ms) || (cv != p.speed_kmh);
        p.rri_ms = cr;
        p.speed_kmh = cv;
        out.push_back(p);
      }
    }
    i = j;
  }
  return out;
}

struct LlmEndpointConfig {
  std::string base_url = "http://127.0.0.1:8080";
  std::string model_name = "mock-llm";
  std::string api_key_env = "LLM_API_KEY";  // empty: no authorization header
  double temperature = 0.7;
  int samples_per_iter = 5;  // K completions per frozen prompt
  int max_history = 30;
  double timeout_s = 30.0;
  int max_retries = 3;
  int retry_backoff_ms = 50;

  void validate() const {
    if (samples_per_iter < 1)
      throw ConfigError("LlmEndpointConfig: samples_per_iter must be >= 1");
    if (!(timeout_s > 0.0)) throw ConfigError("LlmEndpointConfig: timeout must be positive");
    if (max_retries < 0 || max_history < 0 || retry_backoff_ms < 0)
      throw ConfigError("LlmEndpointConfig: negative parameter");
    if (base_url.empty()) throw ConfigError("LlmEndpointConfig: empty base_url");
  }
};

struct ConvergenceRule {
  double min_improvement = 0.001;  // relative
  int patience = 3;
  int max_iters = 50;

  void validate() const {
    if (patience < 1) throw ConfigError("ConvergenceRule: patience must be >= 1");
    if (max_iters < 1) throw ConfigError("ConvergenceRule: max_iters must be >= 1");
    if (!(min_improvement >= 0.0))
      throw ConfigError("ConvergenceRule: negative min_improvement");
  }
};

// Chat-completions client: K independent requests on a frozen prompt, each
// retried with exponential backoff on transport errors. The API key travels
// only in the authorization header.
class ChatClient {
 public:
  explicit ChatClient(LlmEndpointConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    if (!cfg_.api_key_env.empty()) {
      const char* key = std::getenv(cfg_.api_key_env.c_str());
      if (key == nullptr || *key == '\0')
        throw ConfigError("ChatClient: environment variable " + cfg_.api_key_env +
                          " is not set");
      bearer_ = key;
    }
  }

  std::vector<std::string> query(const std::string& prompt) {
    std::vector<std::string> out;
    out.reserve(cfg_.samples_per_iter);
    for (int k = 0; k < cfg_.samples_per_iter; ++k) out.push_back(post_once(prompt));
    return out;
  }

  const LlmEndpointConfig& config() const { return cfg_; }

 private:
  std::string post_once(const std::string& prompt) {
    const nlohmann::json body = {
        {"model", cfg_.model_name},
        {"temperature", cfg_.temperature},
        {"n", 1},
        {"messages", nlohmann::json::array({nlohmann::json{
                         {"role", "user"}, {"content", prompt}}})}};
    const std::string payload = body.dump();
    std::string last_error = "no attempt made";
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
      if (attempt > 0)
        std::this_thread::sleep_for(
            std::chrono::milliseconds(cfg_.retry_backoff_ms << (attempt - 1)));
      httplib::Client client(cfg_.base_url);
      client.set_connection_timeout(std::chrono::milliseconds(
          static_cast<int>(cfg_.timeout_s * 1000)));
      client.set_read_timeout(
          std::chrono::milliseconds(static_cast<int>(cfg_.timeout_s * 1000)));
      httplib::Headers headers;
      if (!bearer_.empty()) headers.emplace("Authorization", "Bearer " + bearer_);
      const auto res =
          client.Post("/v1/chat/completions", headers, payload, "application/json");
      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status != 200) {
        last_error = "http status " + std::to_string(res->status);
        continue;
      }
      const auto parsed = nlohmann::json::parse(res->body, nullptr, false);
      if (parsed.is_discarded() || !parsed.contains("choices") ||
          parsed["choices"].empty()) {
        last_error = "malformed completion payload";
        continue;
      }
      return parsed["choices"][0]["message"]["content"].get<std::string>();
    }
    throw EndpointError("ChatClient: retries exhausted (" + last_error + ")");
  }

  LlmEndpointConfig cfg_;
  std::string bearer_;
};

// In-process chat-completions server for offline runs and tests. The handler
// maps (prompt, request index) to the raw completion text; the default
// handler reads the best record out of the prompt and proposes deterministic
// shrinking-radius perturbations around it.
class MockLlmServer {
 public:
  using Handler = std::function<std::string(const std::string& prompt, int request_index)>;

  MockLlmServer() : handler_(guided_handler()) {}
  explicit MockLlmServer(Handler h) : handler_(std::move(h)) {}

  ~MockLlmServer() { stop(); }

  void set_fail_first(int n) { fail_first_ = n; }
  // Requests with index >= n are answered with HTTP 500.
  void set_fail_after(int n) { fail_after_ = n; }

  void start() {
    server_.Post("/v1/chat/completions",
                 [this](const httplib::Request& req, httplib::Response& res) {
                   const int index = request_count_++;
                   {
                     std::lock_guard<std::mutex> lock(mu_);
                     last_body_ = req.body;
                     last_auth_ = req.get_header_value("Authorization");
                   }
                   if (index < fail_first_ || index >= fail_after_) {
                     res.status = 500;
                     res.set_content("{\"error\":\"scripted failure\"}",
                                     "application/json");
                     return;
                   }
                   std::string prompt;
                   const auto body = nlohmann::json::parse(req.body, nullptr, false);
                   if (!body.is_discarded() && body.contains("messages") &&
                       !body["messages"].empty())
                     prompt = body["messages"][0]["content"].get<std::string>();
                   const nlohmann::json reply = {
                       {"choices",
                        nlohmann::json::array(
                            {nlohmann::json{{"message",
                                             nlohmann::json{{"role", "assistant"},
                                                            {"content",
                                                             handler_(prompt, index)}}}}})}};
                   res.set_content(reply.dump(), "application/json");
                 });
    port_ = server_.bind_to_any_port("127.0.0.1");
    if (port_ <= 0) throw EndpointError("MockLlmServer: could not bind a port");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  void stop() {
    if (thread_.joinable()) {
      server_.stop();
      thread_.join();
    }
  }

  int port() const { return port_; }
  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  int requests_seen() const { return request_count_.load(); }

  std::string last_body() const {
    std::lock_guard<std::mutex> lock(mu_);
    return last_body_;
  }
  std::string last_auth() const {
    std::lock_guard<std::mutex> lock(mu_);
    return last_auth_;
  }

  // Pattern-search stand-in for a live model: exploit the best record seen in
  // the prompt, probing around it with a radius that shrinks as requests
  // accumulate.
  static Handler guided_handler() {
    return [](const std::string& prompt, int index) -> std::string {
      double best_rri = 55.0, best_speed = 75.0;
      double best_aoi = std::numeric_limits<double>::infinity();
      std::size_t pos = 0;
      while ((pos = prompt.find("{\"rri_ms\":", pos)) != std::string::npos) {
        const std::size_t end = prompt.find('}', pos);
        if (end == std::string::npos) break;
        const auto rec = nlohmann::json::parse(prompt.substr(pos, end - pos + 1),
                                               nullptr, false);
        if (!rec.is_discarded() && rec.contains("aoi_ms") &&
            rec["aoi_ms"].get<double>() < best_aoi) {
          best_aoi = rec["aoi_ms"].get<double>();
          best_rri = rec["rri_ms"].get<double>();
          best_speed = rec["speed_kmh"].get<double>();
        }
        pos = end;
      }
      const double shrink = std::pow(0.82, index / 5);
      const double dr = 30.0 * shrink;
      const double dv = 40.0 * shrink;
      double rri = best_rri, speed = best_speed;
      switch (index % 5) {
        case 0: rri -= dr; break;
        case 1: rri += dr; speed += dv; break;
        case 2: speed -= dv; break;
        case 3: speed += dv; break;
        case 4: rri -= dr; speed -= dv; break;
      }
      char buf[128];
      std::snprintf(buf, sizeof(buf), "{\"rri_ms\": %.6g, \"speed_kmh\": %.6g}", rri,
                    speed);
      return buf;
    };
  }

 private:
  httplib::Server server_;
  std::thread thread_;
  Handler handler_;
  int port_ = 0;
  int fail_first_ = 0;
  int fail_after_ = std::numeric_limits<int>::max();
  std::atomic<int> request_count_{0};
  mutable std::mutex mu_;
  std::string last_body_;
  std::string last_auth_;
};

enum class LlmStatus { converged, max_iters, endpoint_error };

struct LlmResult {
  optimize::Candidate best;
  OptimizerTrace trace;
  LlmStatus status = LlmStatus::max_iters;
  std::vector<DecisionRecord> history;
};

using PromptSink = std::function<void(int iteration, const std::string& prompt)>;

// The full loop: build -> query K -> parse -> evaluate -> dedupe -> extend
// history, until improvement stalls for `patience` iterations or max_iters.
// Iterations whose responses contain no parsable proposal do not count
// toward patience. On endpoint failure the best-so-far result is returned
// with a distinct status and the history intact.
inline LlmResult llm_optimize(const model::ScenarioConfig& scenario,
                              const model::ChannelConfig& channel,
                              const model::RadioConfig& radio,
                              const LlmEndpointConfig& endpoint,
                              const ConvergenceRule& rule, PromptSink sink = {}) {
  scenario.validate();
  endpoint.validate();
  rule.validate();
  const model::Bounds speed_iv = model::feasible_speed_bounds(scenario);
  const model::Bounds& rri_iv = scenario.rri_ms;

  LlmResult result;
  result.trace.method = "llm";
  PromptBundle bundle = default_bundle();

  const auto evaluate = [&](double speed, double rri) {
    return model::aoi({speed, rri}, scenario, channel, radio).aoi_ms;
  };
  const auto quantize = [](double rri, double speed) {
    return std::make_pair(std::lround(rri), std::lround(speed));
  };
  std::set<std::pair<long, long>> seen;

  // Exemplars: the corners of the feasible box with their evaluated AoI.
  // Corners the model cannot evaluate are left out of the exemplar set.
  result.best.aoi_ms = std::numeric_limits<double>::infinity();
  for (const double v : {speed_iv.lo, speed_iv.hi}) {
    for (const double r : {rri_iv.lo, rri_iv.hi}) {
      seen.insert(quantize(r, v));
      double corner_aoi;
      try {
        corner_aoi = evaluate(v, r);
      } catch (const Error&) {
        continue;
      }
      bundle.exemplars.push_back({r, v, corner_aoi});
      result.trace.evaluations += 1;
      if (corner_aoi < result.best.aoi_ms) result.best = {{v, r}, corner_aoi};
    }
  }
  if (bundle.exemplars.empty())
    throw InfeasibleSpaceError("llm_optimize: no evaluable exemplar corner");

  ChatClient client(endpoint);
  int stagnant = 0;
  for (int iter = 1; iter <= rule.max_iters; ++iter) {
    const std::string prompt =
        build_prompt(bundle, static_cast<std::size_t>(endpoint.max_history));
    if (sink) sink(iter, prompt);
    std::vector<std::string> raws;
    try {
      raws = client.query(prompt);
    } catch (const EndpointError&) {
      result.status = LlmStatus::endpoint_error;
      result.history = bundle.history;
      return result;
    }
    const double prev_best = result.best.aoi_ms;
    bool any_parsed = false;
    for (const auto& raw : raws) {
      for (const Proposal& p : parse_proposals(raw, rri_iv, speed_iv)) {
        any_parsed = true;
        const auto key = quantize(p.rri_ms, p.speed_kmh);
        if (seen.contains(key)) continue;  // dedupe against all prior records
        seen.insert(key);
        double aoi;
        try {
          aoi = evaluate(p.speed_kmh, p.rri_ms);
        } catch (const Error&) {
          continue;  // a proposal the model cannot evaluate carries no record
        }
        result.trace.evaluations += 1;
        bundle.history.push_back({p.rri_ms, p.speed_kmh, aoi});
        if (aoi < result.best.aoi_ms) result.best = {{p.speed_kmh, p.rri_ms}, aoi};
      }
    }
    result.trace.points.push_back({iter, result.best.aoi_ms,
                                   result.best.decision.speed_kmh,
                                   result.best.decision.rri_ms});
    if (any_parsed) {
      const double improvement = (prev_best - result.best.aoi_ms) / prev_best;
      if (improvement < rule.min_improvement) {
        if (++stagnant >= rule.patience) {
          result.status = LlmStatus::converged;
          result.history = bundle.history;
          return result;
        }
      } else {
        stagnant = 0;
      }
    }
  }
  result.status = LlmStatus::max_iters;
  result.history = bundle.history;
  return result;
}

}  // namespace aoiopt::llm
