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

#include "ctxscore/bridge.hpp"

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <mutex>
#include <thread>

#include "ctxscore/error.hpp"

extern char** environ;

namespace ctxscore {

AggregationPolicy parse_aggregation(std::string_view s) {
  if (s == "sum") return AggregationPolicy::SumTokens;
  if (s == "single") return AggregationPolicy::SingleTokenOnly;
  throw UsageError("unknown aggregation policy '" + std::string(s) + "' (sum|single)");
}

ScoreResponse parse_score_response(const nlohmann::json& msg) {
  if (!msg.is_object()) throw ProtocolError("score reply is not a JSON object");
  if (const auto it = msg.find("error"); it != msg.end()) {
    throw HostError(it->is_string() ? it->get<std::string>() : it->dump());
  }
  ScoreResponse r;
  if (const auto it = msg.find("id"); it != msg.end() && it->is_string()) {
    r.id = it->get<std::string>();
  }
  const auto tokens = msg.find("tokens");
  if (tokens == msg.end() || !tokens->is_array() || tokens->empty()) {
    throw ProtocolError("score reply has no token list");
  }
  for (const auto& t : *tokens) {
    if (!t.is_object() || !t.contains("text") || !t["text"].is_string() ||
        !t.contains("logprob") || !t["logprob"].is_number()) {
      throw ProtocolError("malformed token entry: " + t.dump());
    }
    const double lp = t["logprob"].get<double>();
    if (!std::isfinite(lp)) throw ProtocolError("non-finite logprob in " + t.dump());
    if (lp > 0.0) throw ProtocolError("positive logprob in " + t.dump());
    r.tokens.push_back({t["text"].get<std::string>(), lp});
  }
  const auto single = msg.find("single_token");
  if (single == msg.end() || !single->is_boolean()) {
    throw ProtocolError("score reply lacks boolean 'single_token'");
  }
  r.single_token = single->get<bool>();
  if (r.single_token != (r.tokens.size() == 1)) {
    throw ProtocolError("single_token flag disagrees with token count");
  }
  return r;
}

std::optional<double> aggregate(const ScoreResponse& response, AggregationPolicy policy,
                                LogBase base) {
  if (policy == AggregationPolicy::SingleTokenOnly && !response.single_token) {
    return std::nullopt;
  }
  long double nats = 0;
  for (const auto& t : response.tokens) nats -= t.logprob;
  return std::max(0.0, from_nats(static_cast<double>(nats), base));
}

Endpoint Endpoint::parse(std::string_view spec) {
  Endpoint e;
  if (spec.starts_with("pipe:")) {
    e.kind = Kind::Pipe;
    std::string cur;
    bool quoted = false;
    bool have = false;
    for (char c : spec.substr(5)) {
      if (c == '"') {
        quoted = !quoted;
        have = true;
      } else if (c == ' ' && !quoted) {
        if (have) e.argv.push_back(cur);
        cur.clear();
        have = false;
      } else {
        cur.push_back(c);
        have = true;
      }
    }
    if (have) e.argv.push_back(cur);
    if (e.argv.empty()) throw UsageError("empty pipe command in '" + std::string(spec) + "'");
    return e;
  }
  if (spec.starts_with("tcp:")) {
    e.kind = Kind::Tcp;
    const auto rest = spec.substr(4);
    const auto colon = rest.rfind(':');
    if (colon == std::string_view::npos || colon == 0) {
      throw UsageError("expected tcp:<host>:<port>, got '" + std::string(spec) + "'");
    }
    e.host = std::string(rest.substr(0, colon));
    try {
      e.port = std::stoi(std::string(rest.substr(colon + 1)));
    } catch (const std::exception&) {
      throw UsageError("bad port in '" + std::string(spec) + "'");
    }
    if (e.port <= 0 || e.port > 65535) throw UsageError("bad port in '" + std::string(spec) + "'");
    return e;
  }
  throw UsageError("endpoint must start with pipe: or tcp:, got '" + std::string(spec) + "'");
}

std::string Endpoint::describe() const {
  if (kind == Kind::Tcp) return "tcp:" + host + ":" + std::to_string(port);
  std::string s = "pipe:";
  for (std::size_t i = 0; i < argv.size(); ++i) s += (i ? " " : "") + argv[i];
  return s;
}

namespace {

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

int remaining_ms(std::chrono::steady_clock::time_point deadline) {
  const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
      deadline - std::chrono::steady_clock::now());
  return left.count() < 0 ? 0 : static_cast<int>(std::min<long long>(left.count(), 1 << 30));
}

class FdTransport : public Transport {
 public:
  FdTransport(int read_fd, int write_fd) : read_fd_(read_fd), write_fd_(write_fd) {}
  ~FdTransport() override { close_fds(); }

  void write_line(std::string_view line) override {
    std::string buf(line);
    buf.push_back('\n');
    std::size_t off = 0;
    while (off < buf.size()) {
      const ssize_t n = ::write(write_fd_, buf.data() + off, buf.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw TransportError(std::string("write to host failed: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  std::string read_line(std::chrono::steady_clock::time_point deadline) override {
    for (;;) {
      if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      pollfd pfd{read_fd_, POLLIN, 0};
      const int ready = ::poll(&pfd, 1, remaining_ms(deadline));
      if (ready < 0) {
        if (errno == EINTR) continue;
        throw TransportError(std::string("poll failed: ") + std::strerror(errno));
      }
      if (ready == 0) throw TimeoutError("no reply from host before the deadline");
      char chunk[65536];
      const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw TransportError(std::string("read from host failed: ") + std::strerror(errno));
      }
      if (n == 0) throw TransportError("host closed the connection");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 protected:
  void close_fds() {
    if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
    if (read_fd_ >= 0) ::close(read_fd_);
    read_fd_ = write_fd_ = -1;
  }

 private:
  int read_fd_;
  int write_fd_;
  std::string buffer_;
};

class PipeTransport : public FdTransport {
 public:
  PipeTransport(int read_fd, int write_fd, pid_t child)
      : FdTransport(read_fd, write_fd), child_(child) {}

  ~PipeTransport() override {
    close_fds();  // host sees end-of-input and should exit
    for (int i = 0; i < 200; ++i) {
      if (::waitpid(child_, nullptr, WNOHANG) != 0) return;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    ::kill(child_, SIGKILL);
    ::waitpid(child_, nullptr, 0);
  }

 private:
  pid_t child_;
};

std::unique_ptr<Transport> spawn_pipe(const Endpoint& e) {
  int to_child[2];
  int from_child[2];
  if (::pipe2(to_child, O_CLOEXEC) != 0) throw BackendError("pipe() failed");
  if (::pipe2(from_child, O_CLOEXEC) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw BackendError("pipe() failed");
  }
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, to_child[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, from_child[1], STDOUT_FILENO);
  std::vector<char*> argv;
  for (const auto& a : e.argv) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);
  pid_t pid = 0;
  const int rc = ::posix_spawnp(&pid, argv[0], &actions, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(to_child[0]);
  ::close(from_child[1]);
  if (rc != 0) {
    ::close(to_child[1]);
    ::close(from_child[0]);
    throw TransportError("cannot start host '" + e.argv[0] + "': " + std::strerror(rc));
  }
  return std::make_unique<PipeTransport>(from_child[0], to_child[1], pid);
}

std::unique_ptr<Transport> connect_tcp(const Endpoint& e, std::chrono::milliseconds timeout) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(e.port);
  if (const int rc = ::getaddrinfo(e.host.c_str(), port.c_str(), &hints, &res); rc != 0) {
    throw TransportError("cannot resolve " + e.host + ": " + ::gai_strerror(rc));
  }
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  std::string last_error = "no addresses";
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) continue;
    const int flags = ::fcntl(fd, F_GETFL);
    ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
    int rc = ::connect(fd, ai->ai_addr, ai->ai_addrlen);
    if (rc != 0 && errno == EINPROGRESS) {
      pollfd pfd{fd, POLLOUT, 0};
      rc = ::poll(&pfd, 1, remaining_ms(deadline));
      if (rc == 0) {
        ::close(fd);
        ::freeaddrinfo(res);
        throw TimeoutError("connection to " + e.describe() + " timed out");
      }
      int err = 0;
      socklen_t len = sizeof err;
      ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
      rc = err == 0 ? 0 : -1;
      errno = err;
    }
    if (rc == 0) {
      ::fcntl(fd, F_SETFL, flags);
      ::freeaddrinfo(res);
      return std::make_unique<FdTransport>(fd, fd);
    }
    last_error = std::strerror(errno);
    ::close(fd);
  }
  ::freeaddrinfo(res);
  throw TransportError("cannot connect to " + e.describe() + ": " + last_error);
}

}  // namespace

std::unique_ptr<Transport> open_transport(const Endpoint& endpoint,
                                          std::chrono::milliseconds connect_timeout) {
  ignore_sigpipe();
  return endpoint.kind == Endpoint::Kind::Pipe ? spawn_pipe(endpoint)
                                               : connect_tcp(endpoint, connect_timeout);
}

Session::Session(Endpoint endpoint, SessionOptions options)
    : endpoint_(std::move(endpoint)), options_(options) {}

Session::Session(Session&&) noexcept = default;
Session& Session::operator=(Session&&) noexcept = default;
Session::~Session() = default;

Session Session::connect(const Endpoint& endpoint, const SessionOptions& options) {
  Session s(endpoint, options);
  s.open();
  return s;
}

void Session::open() {
  stash_.clear();
  transport_ = open_transport(endpoint_, options_.timeout);
  const std::string id = next_id();
  transport_->write_line(nlohmann::json{{"id", id}, {"op", "info"}}.dump());
  const auto reply = await(id, std::chrono::steady_clock::now() + options_.timeout);
  if (reply.contains("error")) throw HostError(reply["error"].dump());
  if (!reply.contains("protocol") || !reply["protocol"].is_number_integer()) {
    throw ProtocolError("info reply lacks an integer 'protocol'");
  }
  info_.protocol = reply["protocol"].get<int>();
  if (info_.protocol != kProtocolVersion) {
    throw VersionMismatchError("host speaks protocol " + std::to_string(info_.protocol) +
                               ", client speaks " + std::to_string(kProtocolVersion));
  }
  info_.model = reply.value("model", std::string());
  info_.type = reply.value("type", std::string());
  if (info_.type != "causal" && info_.type != "masked") {
    throw ProtocolError("host model type must be causal or masked, got '" + info_.type + "'");
  }
}

std::string Session::next_id() { return std::to_string(++counter_); }

nlohmann::json Session::await(const std::string& id,
                              std::chrono::steady_clock::time_point deadline) {
  for (;;) {
    if (auto it = stash_.find(id); it != stash_.end()) {
      auto msg = std::move(it->second);
      stash_.erase(it);
      return msg;
    }
    const std::string line = transport_->read_line(deadline);
    nlohmann::json msg;
    try {
      msg = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      throw ProtocolError("malformed frame from host: " + line.substr(0, 200));
    }
    if (!msg.is_object()) throw ProtocolError("host frame is not an object: " + line.substr(0, 200));
    const auto it = msg.find("id");
    if (it == msg.end()) return msg;  // unaddressed replies belong to the oldest waiter
    if (!it->is_string()) throw ProtocolError("reply id must be a string");
    std::string got = it->get<std::string>();
    if (got == id) return msg;
    stash_.emplace(std::move(got), std::move(msg));
  }
}

std::vector<nlohmann::json> Session::exchange(const std::vector<nlohmann::json>& requests) {
  std::vector<nlohmann::json> replies(requests.size());
  std::vector<std::size_t> pending(requests.size());
  for (std::size_t i = 0; i < pending.size(); ++i) pending[i] = i;
  int retries_left = options_.retries;
  for (;;) {
    try {
      for (std::size_t i : pending) transport_->write_line(requests[i].dump());
      while (!pending.empty()) {
        const std::size_t i = pending.front();
        replies[i] = await(requests[i]["id"].get<std::string>(),
                           std::chrono::steady_clock::now() + options_.timeout);
        pending.erase(pending.begin());
      }
      return replies;
    } catch (const TransportError&) {
      if (retries_left-- <= 0) throw;
      open();
    }
  }
}

ScoreResponse Session::score(const StimulusInstance& instance) {
  const ScoreRequest req{"", instance.context_text, instance.critical_word};
  return score_batch(std::span<const ScoreRequest>(&req, 1)).front();
}

std::vector<ScoreResponse> Session::score_batch(std::span<const ScoreRequest> requests) {
  std::vector<nlohmann::json> wire;
  wire.reserve(requests.size());
  for (const auto& r : requests) {
    if (r.target.empty()) throw DataError("score request with empty target");
    wire.push_back({{"id", next_id()}, {"op", "score"}, {"context", r.context},
                    {"target", r.target}});
  }
  const auto replies = exchange(wire);
  std::vector<ScoreResponse> out;
  out.reserve(replies.size());
  for (std::size_t i = 0; i < replies.size(); ++i) {
    ScoreResponse resp = parse_score_response(replies[i]);
    resp.id = requests[i].id.empty() ? wire[i]["id"].get<std::string>() : requests[i].id;
    resp.model_name = info_.model;
    out.push_back(std::move(resp));
  }
  return out;
}

bool Session::in_vocab(std::string_view word) {
  const auto replies =
      exchange({{{"id", next_id()}, {"op", "in_vocab"}, {"word", std::string(word)}}});
  const auto& msg = replies.front();
  if (msg.contains("error")) throw HostError(msg["error"].dump());
  if (!msg.contains("in_vocab") || !msg["in_vocab"].is_boolean()) {
    throw ProtocolError("in_vocab reply lacks a boolean 'in_vocab'");
  }
  return msg["in_vocab"].get<bool>();
}

}  // namespace ctxscore
