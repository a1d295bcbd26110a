// Copyright 2026 The qdiff Authors
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

// Counter-based random numbers. Every draw is a pure function of
// (key, counter), so streams can be split across threads or trajectories
// without coordination and replayed bit-for-bit.

#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace qdiff {

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

/// Philox4x32 with 10 rounds (Salmon et al., SC'11).
PhiloxCounter philox4x32(PhiloxCounter counter, PhiloxKey key);

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view bytes);

/// Seed for a named sub-stream: splitmix64(master ^ fnv1a64(purpose)).
std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose);

/// Maps 64 random bits to a double in the open interval (0, 1).
double to_open_unit(std::uint64_t bits);

/// Standard normal draw addressed by (seed, a, b, c). Used for Wiener
/// increments as (seed, trajectory, step, channel).
double keyed_normal(std::uint64_t seed, std::uint64_t a, std::uint32_t b, std::uint32_t c);

/// Sequential view over a Philox stream. Copying the object copies its
/// position, so two copies produce identical sequences.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint64_t next_u64();
    double uniform();                 // (0, 1)
    double uniform(double lo, double hi);
    double normal();
    std::uint64_t index(std::uint64_t n);  // [0, n)

private:
    PhiloxKey key_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    std::array<std::uint64_t, 2> buffer_{};
    int buffered_ = 0;
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace qdiff
