/*
 Copyright 2026 The OptCert Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#pragma once

#include <stdexcept>
#include <string>

namespace optcert {

/// Bad wiring: dimension mismatches, invalid grids, malformed inputs.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Valid wiring, invalid point: control outside its set, time outside a piece.
struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

/// Requested feature is outside the supported regime.
struct CapabilityError : std::runtime_error {
    explicit CapabilityError(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite state during integration; carries the offending time.
struct IntegrationError : std::runtime_error {
    IntegrationError(const std::string& what, double t)
        : std::runtime_error(what + " at t=" + std::to_string(t)), time(t) {}
    double time;
};

struct PreconditionError : std::runtime_error {
    explicit PreconditionError(const std::string& what) : std::runtime_error(what) {}
};

struct InvariantError : std::runtime_error {
    explicit InvariantError(const std::string& what) : std::runtime_error(what) {}
};

/// Guard crossing count exceeded the configured cutoff.
struct ZenoError : std::runtime_error {
    ZenoError(const std::string& what, int count)
        : std::runtime_error(what + " (" + std::to_string(count) + " events)"), events(count) {}
    int events;
};

struct DegenerateSlidingError : std::runtime_error {
    DegenerateSlidingError(const std::string& what, double t)
        : std::runtime_error(what + " at t=" + std::to_string(t)), time(t) {}
    double time;
};

struct JumpError : std::runtime_error {
    explicit JumpError(const std::string& what) : std::runtime_error(what) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace optcert
