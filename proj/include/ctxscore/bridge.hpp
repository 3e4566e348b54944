// Copyright 2026 The ctxscore Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ctxscore/stimulus.hpp"
#include "ctxscore/types.hpp"

// Client side of the scoring protocol spoken by external neural-LM hosts.
//
// Newline-delimited JSON over a child process's stdin/stdout or a TCP
// socket. Requests carry an `op` (info, score, in_vocab) and an `id` that
// the host echoes back; responses may arrive in any order.
//
//   -> {"id":"7","op":"score","context":"de pinda was","target":"verliefd"}
//   <- {"id":"7","tokens":[{"text":" verliefd","logprob":-4.2}],"single_token":true}
//   -> {"id":"0","op":"info"}
//   <- {"id":"0","protocol":1,"model":"gpt2-small-dutch","type":"causal"}
//   <- {"id":"8","error":"CUDA out of memory"}
//
// Log probabilities on the wire are natural logs.

namespace ctxscore {

inline constexpr int kProtocolVersion = 1;

struct TokenLogprob {
  std::string text;
  double logprob = 0.0;
};

struct ScoreRequest {
  std::string id;
  std::string context;
  std::string target;
};

struct ScoreResponse {
  std::string id;
  std::vector<TokenLogprob> tokens;
  bool single_token = false;
  std::string model_name;
};

struct HostInfo {
  int protocol = 0;
  std::string model;
  std::string type;  // "causal" | "masked"
};

enum class AggregationPolicy { SingleTokenOnly, SumTokens };

AggregationPolicy parse_aggregation(std::string_view s);

/// Validate and convert a score reply. Throws ProtocolError on a positive
/// or non-finite logprob, an empty token list or missing fields, and
/// HostError when the reply carries an `error`.
ScoreResponse parse_score_response(const nlohmann::json& msg);

/// Surprisal in `base`, or nullopt when the policy excludes the response.
std::optional<double> aggregate(const ScoreResponse& response, AggregationPolicy policy,
                                LogBase base = LogBase::Natural);

/// Where a host lives: "pipe:<command line>" or "tcp:<host>:<port>".
struct Endpoint {
  enum class Kind { Pipe, Tcp };
  Kind kind = Kind::Pipe;
  std::vector<std::string> argv;
  std::string host;
  int port = 0;

  static Endpoint parse(std::string_view spec);
  std::string describe() const;
};

/// A bidirectional line channel.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void write_line(std::string_view line) = 0;
  /// Next full line, or throws TimeoutError once `deadline` passes.
  virtual std::string read_line(std::chrono::steady_clock::time_point deadline) = 0;
};

std::unique_ptr<Transport> open_transport(const Endpoint& endpoint,
                                          std::chrono::milliseconds connect_timeout);

struct SessionOptions {
  std::chrono::milliseconds timeout{120000};  // per request
  int retries = 1;                            // on transport errors only
};

/// One ordered channel to one host. Requests may be pipelined; replies are
/// matched by id. Not thread-safe: use one Session per worker.
class Session {
 public:
  static Session connect(const Endpoint& endpoint, const SessionOptions& options = {});

  Session(Session&&) noexcept;
  Session& operator=(Session&&) noexcept;
  ~Session();

  const HostInfo& info() const { return info_; }

  ScoreResponse score(const StimulusInstance& instance);
  /// Sends every request before reading, then collects replies by id.
  /// Results are returned in request order.
  std::vector<ScoreResponse> score_batch(std::span<const ScoreRequest> requests);
  bool in_vocab(std::string_view word);

 private:
  Session(Endpoint endpoint, SessionOptions options);
  void open();
  std::string next_id();
  nlohmann::json await(const std::string& id, std::chrono::steady_clock::time_point deadline);
  std::vector<nlohmann::json> exchange(const std::vector<nlohmann::json>& requests);

  Endpoint endpoint_;
  SessionOptions options_;
  std::unique_ptr<Transport> transport_;
  HostInfo info_;
  std::uint64_t counter_ = 0;
  std::map<std::string, nlohmann::json> stash_;  // replies that arrived early
};

}  // namespace ctxscore
