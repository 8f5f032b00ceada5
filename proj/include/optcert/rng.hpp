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

#include <array>
#include <cstdint>

namespace optcert {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Every draw
/// is a pure function of (seed, path, step, channel), so ensembles are
/// reproducible and independent of evaluation order or worker count.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t seed() const { return seed_; }

    /// Uniform in (0, 1].
    double uniform(std::uint64_t path, std::uint64_t step, std::uint32_t channel) const;

    /// Standard normal via Box-Muller on one Philox block.
    double normal(std::uint64_t path, std::uint64_t step, std::uint32_t channel) const;

    static std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                                   std::uint32_t key0, std::uint32_t key1);

private:
    std::array<std::uint32_t, 4> block(std::uint64_t path, std::uint64_t step,
                                       std::uint32_t channel) const;

    std::uint64_t seed_;
};

/// SplitMix64, used for deterministic probe generation in tests and
/// derivative self-checks.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next();
    /// Uniform in [lo, hi).
    double uniform(double lo, double hi);

private:
    std::uint64_t state_;
};

}  // namespace optcert
