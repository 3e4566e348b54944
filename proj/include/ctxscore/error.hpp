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

#include <stdexcept>
#include <string>

namespace ctxscore {

// The three families map onto the CLI exit codes 1, 2 and 3.

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Both samples (or every difference score) constant.
class DegenerateVarianceError : public DataError {
 public:
  using DataError::DataError;
};

class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Connection dropped, pipe closed, or no reply within the deadline.
/// The bridge retries these once.
class TransportError : public BackendError {
 public:
  using BackendError::BackendError;
};

class TimeoutError : public TransportError {
 public:
  using TransportError::TransportError;
};

/// The host answered with something that is not a valid protocol message.
class ProtocolError : public BackendError {
 public:
  using BackendError::BackendError;
};

class VersionMismatchError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

/// The host reported a model error; the message is the host's, verbatim.
class HostError : public BackendError {
 public:
  explicit HostError(const std::string& msg) : BackendError(msg) {}
};

}  // namespace ctxscore
