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

// Scriptable scoring host for protocol tests.
//
//   mock_host [--fixture file.jsonl] [--protocol N] [--model NAME]
//             [--type causal|masked] [--shuffle SEED] [--positive-logprob]
//             [--error-on TARGET] [--silent] [--die-after N]
//             [--tcp PORT --port-file PATH]
//
// Replies from the fixture when (context, target) matches a record, and
// otherwise with deterministic pseudo logprobs: one token per
// space-separated piece of the target.

#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

using nlohmann::json;

namespace {

struct Options {
  std::string fixture;
  int protocol = 1;
  std::string model = "mock-lm";
  std::string type = "causal";
  long shuffle_seed = -1;
  bool positive = false;
  std::string error_on;
  bool silent = false;
  long die_after = -1;
  int tcp_port = -1;
  std::string port_file;
};

std::map<std::pair<std::string, std::string>, json> g_fixture;

json synthetic_tokens(const std::string& context, const std::string& target) {
  json tokens = json::array();
  std::size_t start = 0;
  while (start < target.size()) {
    std::size_t end = target.find(' ', start);
    if (end == std::string::npos) end = target.size();
    const std::string piece = target.substr(start, end - start);
    if (!piece.empty()) {
      unsigned h = 2166136261u;
      for (char c : context + "|" + piece) h = (h ^ static_cast<unsigned char>(c)) * 16777619u;
      const double lp = -(0.5 + static_cast<double>(h % 1000) / 100.0);
      tokens.push_back({{"text", " " + piece}, {"logprob", lp}});
    }
    start = end + 1;
  }
  return tokens;
}

json handle(const json& req, const Options& opt, long& scored) {
  json reply;
  if (req.contains("id")) reply["id"] = req["id"];
  const std::string op = req.value("op", "");
  if (op == "info") {
    reply["protocol"] = opt.protocol;
    reply["model"] = opt.model;
    reply["type"] = opt.type;
    reply["joining"] = "target prefixed with one space";
    return reply;
  }
  if (op == "in_vocab") {
    const std::string w = req.value("word", "");
    reply["in_vocab"] = !w.empty() && w.find(' ') == std::string::npos && w.size() <= 8;
    return reply;
  }
  if (op != "score" || !req.contains("context") || !req.contains("target")) {
    reply["error"] = "malformed request";
    return reply;
  }
  const std::string context = req["context"].get<std::string>();
  const std::string target = req["target"].get<std::string>();
  ++scored;
  if (!opt.error_on.empty() && target == opt.error_on) {
    reply["error"] = "CUDA out of memory";
    return reply;
  }
  if (const auto it = g_fixture.find({context, target}); it != g_fixture.end()) {
    reply["tokens"] = it->second["tokens"];
    reply["single_token"] = it->second["single_token"];
  } else {
    reply["tokens"] = synthetic_tokens(context, target);
    reply["single_token"] = reply["tokens"].size() == 1;
  }
  if (opt.positive) reply["tokens"][0]["logprob"] = 0.5;
  return reply;
}

bool read_line(int fd, std::string& buf, std::string& line, int timeout_ms) {
  for (;;) {
    if (const auto nl = buf.find('\n'); nl != std::string::npos) {
      line = buf.substr(0, nl);
      buf.erase(0, nl + 1);
      return true;
    }
    pollfd pfd{fd, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, timeout_ms);
    if (ready <= 0) return false;
    char chunk[4096];
    const ssize_t n = ::read(fd, chunk, sizeof chunk);
    if (n <= 0) return false;
    buf.append(chunk, static_cast<std::size_t>(n));
  }
}

void write_all(int fd, const std::string& s) {
  std::size_t off = 0;
  while (off < s.size()) {
    const ssize_t n = ::write(fd, s.data() + off, s.size() - off);
    if (n <= 0) return;
    off += static_cast<std::size_t>(n);
  }
}

// Serves one connection until end of input.
void serve(int in_fd, int out_fd, const Options& opt) {
  std::string buf;
  std::string line;
  long scored = 0;
  std::mt19937 rng(static_cast<unsigned>(opt.shuffle_seed < 0 ? 0 : opt.shuffle_seed));
  for (;;) {
    if (!read_line(in_fd, buf, line, -1)) return;
    std::vector<std::string> batch = {line};
    if (opt.shuffle_seed >= 0) {
      // collect whatever else is already in flight, then answer out of order
      while (read_line(in_fd, buf, line, 100)) batch.push_back(line);
    }
    std::vector<std::string> replies;
    for (const auto& l : batch) {
      json req;
      try {
        req = json::parse(l);
      } catch (const json::parse_error&) {
        replies.push_back(json{{"error", "malformed request"}}.dump());
        continue;
      }
      const bool is_score = req.value("op", "") == "score";
      if (opt.silent && is_score) continue;
      if (opt.die_after >= 0 && is_score && scored >= opt.die_after) {
        for (const auto& r : replies) write_all(out_fd, r + "\n");
        std::_Exit(0);
      }
      replies.push_back(handle(req, opt, scored).dump());
    }
    if (opt.shuffle_seed >= 0) std::shuffle(replies.begin(), replies.end(), rng);
    for (const auto& r : replies) write_all(out_fd, r + "\n");
  }
}

}  // namespace

int main(int argc, char** argv) {
  Options opt;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    auto next = [&]() -> std::string {
      if (i + 1 >= argc) {
        std::cerr << "missing value for " << a << "\n";
        std::exit(1);
      }
      return argv[++i];
    };
    if (a == "--fixture") opt.fixture = next();
    else if (a == "--protocol") opt.protocol = std::stoi(next());
    else if (a == "--model") opt.model = next();
    else if (a == "--type") opt.type = next();
    else if (a == "--shuffle") opt.shuffle_seed = std::stol(next());
    else if (a == "--positive-logprob") opt.positive = true;
    else if (a == "--error-on") opt.error_on = next();
    else if (a == "--silent") opt.silent = true;
    else if (a == "--die-after") opt.die_after = std::stol(next());
    else if (a == "--tcp") opt.tcp_port = std::stoi(next());
    else if (a == "--port-file") opt.port_file = next();
    else {
      std::cerr << "unknown option " << a << "\n";
      return 1;
    }
  }
  if (!opt.fixture.empty()) {
    std::ifstream in(opt.fixture);
    if (!in) {
      std::cerr << "cannot open fixture " << opt.fixture << "\n";
      return 1;
    }
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json rec = json::parse(line);
      g_fixture[{rec["context"].get<std::string>(), rec["target"].get<std::string>()}] = rec;
    }
  }
  if (opt.tcp_port < 0) {
    serve(STDIN_FILENO, STDOUT_FILENO, opt);
    return 0;
  }
  const int srv = ::socket(AF_INET, SOCK_STREAM, 0);
  const int yes = 1;
  ::setsockopt(srv, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<uint16_t>(opt.tcp_port));
  if (::bind(srv, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(srv, 4) != 0) {
    std::perror("bind/listen");
    return 1;
  }
  socklen_t len = sizeof addr;
  ::getsockname(srv, reinterpret_cast<sockaddr*>(&addr), &len);
  if (!opt.port_file.empty()) {
    const std::string tmp = opt.port_file + ".tmp";
    std::ofstream(tmp) << ntohs(addr.sin_port) << "\n";
    std::rename(tmp.c_str(), opt.port_file.c_str());
  }
  for (;;) {
    const int fd = ::accept(srv, nullptr, nullptr);
    if (fd < 0) continue;
    serve(fd, fd, opt);
    ::close(fd);
  }
}
