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

// Reverse-time samplers. Every stepper runs a forward loop in the reversed
// clock s in [0, T - t_min]; the physical time seen by the score is T - s.

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "qdiff/score.hpp"
#include "qdiff/unravel.hpp"

namespace qdiff {

/// Score field evaluated at physical time t.
using ScoreFn = std::function<RealVector(std::span<const double> x, double t)>;
/// Forward drift f(x, t) of a general SDE dX = f dt + g(t) dW.
using DriftFn = std::function<RealVector(std::span<const double> x, double t)>;
using DiffusionFn = std::function<double(double t)>;

ScoreFn zero_score();
ScoreFn network_score(const ScoreNet& net);  // keeps a reference; net must outlive the function
ScoreFn analytic_gaussian_score(const OuParams& params, double data_mean, double data_variance);
/// Exact score of a Gaussian KDE of `data` (bandwidth h) pushed through the
/// OU kernel: a KDE on m_t x_i with bandwidth sqrt(sigma_t^2 + m_t^2 h^2).
ScoreFn empirical_score(std::vector<RealVector> data, const OuParams& params, double bandwidth);

enum class ScoreSource { network, kde, analytic, zero };
enum class ReverseMode { ou, quantum_literal };
enum class NoiseScale { stochastic, drift_only };

std::string to_string(ScoreSource s);
std::string to_string(ReverseMode m);
std::string to_string(NoiseScale n);
ScoreSource score_source_from_string(const std::string& name);
ReverseMode reverse_mode_from_string(const std::string& name);
NoiseScale noise_scale_from_string(const std::string& name);

struct ReverseConfig {
    std::size_t steps = 1000;
    ScoreSource source = ScoreSource::network;
    ReverseMode mode = ReverseMode::ou;
    NoiseScale noise = NoiseScale::stochastic;
    std::uint64_t seed = 0;
    double t_min = 1e-3;

    void validate() const;
};

/// x' = x + [alpha x + 2 beta^2 score(x, T - s)] ds + sqrt(2 ds) beta xi.
/// An empty `xi` drops the noise term. Throws NumericalError when the score
/// is not finite.
RealVector reverse_ou_step(std::span<const double> x, double s, double ds, const OuParams& params,
                           const ScoreFn& score, std::span<const double> xi);

/// Euler-Maruyama step of the backward SDE of dX = f dt + g dW:
/// x' = x - [f(x, t) - g(t)^2 score(x, t)] ds + g(t) sqrt(ds) xi with t = T - s.
RealVector reverse_general_step(std::span<const double> x, double s, double ds, double t_end, const DriftFn& f,
                                const DiffusionFn& g, const ScoreFn& score, std::span<const double> xi);

/// D = G G^T with G's columns the real embeddings of the per-channel
/// diffusion columns at the given state.
struct DiffusionMatrix {
    std::size_t dim = 0;
    std::vector<double> entries;     // row-major dim x dim
    std::vector<RealVector> columns;  // G

    double operator()(std::size_t r, std::size_t c) const { return entries[r * dim + c]; }
    RealVector apply(std::span<const double> v) const;
};

DiffusionMatrix diffusion_matrix(const ForwardSde& sde, const StateVector& psi);

/// One step of the state-dependent reverse SDE in the real embedding,
/// x' = x - [f_emb - D score] ds + G xi sqrt(ds), followed by renormalization.
/// `xi` holds one normal per channel; empty drops the noise term.
StateVector quantum_reverse_step(const StateVector& psi, double s, double ds, double t_end, const ForwardSde& sde,
                                 const ScoreFn& score, std::span<const double> xi, double* raw_norm = nullptr);

struct DenoiseResult {
    RealVector estimate;
    std::vector<double> times;  // reversed clock s
    std::vector<RealVector> path;
};

/// Integrates reverse_ou_step from s = 0 to T - t_min. Noise for path `path_id`
/// comes from a counter stream keyed by config.seed. Aborts with NumericalError
/// if the embedding norm exceeds 1e3.
DenoiseResult denoise(std::span<const double> x_t, const ReverseConfig& config, const OuParams& params,
                      const ScoreFn& score, std::uint64_t path_id = 0, bool keep_path = false);

struct QuantumDenoiseResult {
    StateVector estimate;
    std::vector<double> times;
    std::vector<StateVector> path;
    std::vector<double> raw_norms;
};

QuantumDenoiseResult denoise_quantum(const StateVector& psi_t, const ReverseConfig& config, double t_end,
                                     const ForwardSde& sde, const ScoreFn& score, std::uint64_t path_id = 0,
                                     bool keep_path = false);

}  // namespace qdiff
