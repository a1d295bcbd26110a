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

#include <cmath>
#include <vector>

#include "doctest.h"
#include "qdiff/rng.hpp"

using namespace qdiff;

TEST_CASE("philox4x32-10 known-answer vectors") {
    // Random123 kat_vectors.
    CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == PhiloxCounter{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
          PhiloxCounter{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
          PhiloxCounter{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("keyed normals are addressable and reproducible") {
    CHECK(keyed_normal(1, 2, 3, 4) == keyed_normal(1, 2, 3, 4));
    CHECK(keyed_normal(1, 2, 3, 4) != keyed_normal(1, 2, 3, 5));
    CHECK(keyed_normal(1, 2, 3, 4) != keyed_normal(2, 2, 3, 4));

    const int n = 200000;
    double sum = 0.0, sq = 0.0;
    for (int k = 0; k < n; ++k) {
        const double z = keyed_normal(99, 7, static_cast<std::uint32_t>(k), 0);
        sum += z;
        sq += z * z;
    }
    const double mean = sum / n;
    CHECK(std::abs(mean) < 4.0 / std::sqrt(n));
    CHECK(std::abs(sq / n - mean * mean - 1.0) < 0.02);
}

TEST_CASE("CounterRng copies replay the same sequence") {
    CounterRng a(42, 3);
    a.normal();
    CounterRng b = a;
    for (int k = 0; k < 10; ++k) {
        CHECK(a.normal() == b.normal());
        CHECK(a.uniform() == b.uniform());
        CHECK(a.index(17) == b.index(17));
    }
    CounterRng c(42, 4);
    CHECK(CounterRng(42, 3).next_u64() != c.next_u64());
}

TEST_CASE("CounterRng uniform and index ranges") {
    CounterRng rng(1);
    std::vector<int> counts(5, 0);
    for (int k = 0; k < 50000; ++k) {
        const double u = rng.uniform();
        CHECK((u > 0.0 && u < 1.0));
        ++counts[rng.index(5)];
    }
    for (int c : counts) CHECK(std::abs(c - 10000) < 500);
}

TEST_CASE("derive_seed separates purposes") {
    CHECK(derive_seed(1, "train") != derive_seed(1, "eval"));
    CHECK(derive_seed(1, "train") == derive_seed(1, "train"));
    CHECK(derive_seed(1, "train") != derive_seed(2, "train"));
}
