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

// Small statistics helpers used by the evaluation code and the tests.

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace qdiff {

struct Summary {
    std::size_t count = 0;
    double mean = 0.0;
    double sd = 0.0;  // sample standard deviation
    double se = 0.0;  // standard error of the mean
    double median = 0.0;
    double min = 0.0;
    double max = 0.0;
};

Summary summarize(std::span<const double> values);

double normal_cdf(double x, double mean = 0.0, double sd = 1.0);

/// sup |F_n - F| for the empirical distribution of `samples`.
double ks_one_sample(std::vector<double> samples, const std::function<double(double)>& cdf);
double ks_two_sample(std::vector<double> a, std::vector<double> b);

/// One-sided exact binomial tail P(X >= positives) for X ~ Bin(positives + negatives, 1/2).
/// Ties are dropped by the caller.
double sign_test_p_value(std::size_t positives, std::size_t negatives);

}  // namespace qdiff
