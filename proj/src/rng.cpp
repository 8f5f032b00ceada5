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

#include "optcert/rng.hpp"

#include <cmath>

namespace optcert {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

inline double u64_to_unit(std::uint64_t r) {
    // (0, 1]: never 0, safe under log().
    return (static_cast<double>(r >> 11) + 1.0) * 0x1.0p-53;
}

}  // namespace

std::array<std::uint32_t, 4> CounterRng::philox4x32(std::array<std::uint32_t, 4> counter,
                                                    std::uint32_t key0, std::uint32_t key1) {
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kPhiloxM0, counter[0], hi0, lo0);
        mulhilo(kPhiloxM1, counter[2], hi1, lo1);
        counter = {hi1 ^ counter[1] ^ key0, lo1, hi0 ^ counter[3] ^ key1, lo0};
        key0 += kPhiloxW0;
        key1 += kPhiloxW1;
    }
    return counter;
}

std::array<std::uint32_t, 4> CounterRng::block(std::uint64_t path, std::uint64_t step,
                                               std::uint32_t channel) const {
    const std::array<std::uint32_t, 4> counter = {
        static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32),
        static_cast<std::uint32_t>(path),
        static_cast<std::uint32_t>(path >> 32) ^ channel};
    return philox4x32(counter, static_cast<std::uint32_t>(seed_),
                      static_cast<std::uint32_t>(seed_ >> 32));
}

double CounterRng::uniform(std::uint64_t path, std::uint64_t step, std::uint32_t channel) const {
    const auto r = block(path, step, channel);
    const std::uint64_t a = (static_cast<std::uint64_t>(r[1]) << 32) | r[0];
    return u64_to_unit(a);
}

double CounterRng::normal(std::uint64_t path, std::uint64_t step, std::uint32_t channel) const {
    const auto r = block(path, step, channel);
    const std::uint64_t a = (static_cast<std::uint64_t>(r[1]) << 32) | r[0];
    const std::uint64_t b = (static_cast<std::uint64_t>(r[3]) << 32) | r[2];
    const double u1 = u64_to_unit(a);
    const double u2 = u64_to_unit(b);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::uint64_t SplitMix64::next() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

double SplitMix64::uniform(double lo, double hi) {
    const double u = static_cast<double>(next() >> 11) * 0x1.0p-53;
    return lo + u * (hi - lo);
}

}  // namespace optcert
