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

#include "qdiff/reverse.hpp"

#include <cmath>
#include <memory>
#include <sstream>

namespace qdiff {

namespace {

constexpr double kDivergenceNorm = 1e3;

RealVector checked_score(const ScoreFn& score, std::span<const double> x, double t) {
    RealVector s = score(x, t);
    if (s.size() != x.size()) throw DimensionError("score function returned the wrong dimension");
    for (double v : s)
        if (!std::isfinite(v)) {
            std::ostringstream msg;
            msg << "score is not finite at t = " << t;
            throw NumericalError(msg.str());
        }
    return s;
}

double real_norm(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

void check_divergence(std::span<const double> x, std::size_t step, double s) {
    const double n = real_norm(x);
    if (!(n <= kDivergenceNorm)) {
        std::ostringstream msg;
        msg << "reverse integration diverged at step " << step << " (s = " << s << "): embedding norm " << n;
        throw NumericalError(msg.str());
    }
}

RealVector normals(CounterRng& rng, std::size_t n) {
    RealVector xi(n);
    for (auto& v : xi) v = rng.normal();
    return xi;
}

}  // namespace

ScoreFn zero_score() {
    return [](std::span<const double> x, double) { return RealVector(x.size(), 0.0); };
}

ScoreFn network_score(const ScoreNet& net) {
    return [&net](std::span<const double> x, double t) { return net.forward(x, t); };
}

ScoreFn analytic_gaussian_score(const OuParams& params, double data_mean, double data_variance) {
    return [=](std::span<const double> x, double t) {
        return gaussian_marginal_score(x, t, params, data_mean, data_variance);
    };
}

ScoreFn empirical_score(std::vector<RealVector> data, const OuParams& params, double bandwidth) {
    if (data.empty()) throw std::invalid_argument("empirical_score: empty data");
    auto shared = std::make_shared<const std::vector<RealVector>>(std::move(data));
    return [shared, params, bandwidth](std::span<const double> x, double t) {
        const OuKernel k = ou_kernel(params, t);
        std::vector<RealVector> scaled = *shared;
        for (auto& v : scaled)
            for (auto& c : v) c *= k.mean_scale;
        const double h = std::sqrt(k.variance + k.mean_scale * k.mean_scale * bandwidth * bandwidth);
        return kde_score_oracle(scaled, h, x);
    };
}

std::string to_string(ScoreSource s) {
    switch (s) {
        case ScoreSource::network: return "network";
        case ScoreSource::kde: return "kde";
        case ScoreSource::analytic: return "analytic";
        case ScoreSource::zero: return "zero";
    }
    return "network";
}

std::string to_string(ReverseMode m) { return m == ReverseMode::quantum_literal ? "quantum_literal" : "ou"; }
std::string to_string(NoiseScale n) { return n == NoiseScale::drift_only ? "drift_only" : "stochastic"; }

ScoreSource score_source_from_string(const std::string& name) {
    if (name == "network") return ScoreSource::network;
    if (name == "kde" || name == "kde-oracle") return ScoreSource::kde;
    if (name == "analytic") return ScoreSource::analytic;
    if (name == "zero") return ScoreSource::zero;
    throw std::invalid_argument("unknown score source '" + name + "'");
}

ReverseMode reverse_mode_from_string(const std::string& name) {
    if (name == "ou") return ReverseMode::ou;
    if (name == "quantum_literal" || name == "quantum-literal") return ReverseMode::quantum_literal;
    throw std::invalid_argument("unknown reverse mode '" + name + "'");
}

NoiseScale noise_scale_from_string(const std::string& name) {
    if (name == "stochastic") return NoiseScale::stochastic;
    if (name == "drift_only" || name == "zero-noise-drift-only") return NoiseScale::drift_only;
    throw std::invalid_argument("unknown noise scale '" + name + "'");
}

void ReverseConfig::validate() const {
    if (steps == 0) throw std::invalid_argument("reverse.steps must be >= 1");
    if (!(t_min > 0.0) || !std::isfinite(t_min)) throw std::invalid_argument("reverse.t_min must be positive");
}

RealVector reverse_ou_step(std::span<const double> x, double s, double ds, const OuParams& params,
                           const ScoreFn& score, std::span<const double> xi) {
    if (!xi.empty() && xi.size() != x.size()) throw DimensionError("reverse_ou_step: noise dimension mismatch");
    const RealVector sc = checked_score(score, x, params.t_end - s);
    const double b2 = params.beta * params.beta;
    const double amp = std::sqrt(2.0 * ds) * params.beta;
    RealVector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = x[i] + (params.alpha * x[i] + 2.0 * b2 * sc[i]) * ds;
        if (!xi.empty()) out[i] += amp * xi[i];
    }
    return out;
}

RealVector reverse_general_step(std::span<const double> x, double s, double ds, double t_end, const DriftFn& f,
                                const DiffusionFn& g, const ScoreFn& score, std::span<const double> xi) {
    if (!xi.empty() && xi.size() != x.size()) throw DimensionError("reverse_general_step: noise dimension mismatch");
    const double t = t_end - s;
    const RealVector drift = f(x, t);
    const RealVector sc = checked_score(score, x, t);
    const double gt = g(t);
    RealVector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = x[i] - (drift[i] - gt * gt * sc[i]) * ds;
        if (!xi.empty()) out[i] += gt * std::sqrt(ds) * xi[i];
    }
    return out;
}

RealVector DiffusionMatrix::apply(std::span<const double> v) const {
    if (v.size() != dim) throw DimensionError("DiffusionMatrix: vector dimension mismatch");
    RealVector out(dim, 0.0);
    for (std::size_t r = 0; r < dim; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < dim; ++c) s += entries[r * dim + c] * v[c];
        out[r] = s;
    }
    return out;
}

DiffusionMatrix diffusion_matrix(const ForwardSde& sde, const StateVector& psi) {
    DiffusionMatrix d;
    d.dim = 2 * psi.dim();
    d.entries.assign(d.dim * d.dim, 0.0);
    for (const auto& col : sde.diffusion_columns(psi.amplitudes())) {
        RealVector g = real_embed(StateVector(col, false));
        for (std::size_t r = 0; r < d.dim; ++r)
            for (std::size_t c = 0; c < d.dim; ++c) d.entries[r * d.dim + c] += g[r] * g[c];
        d.columns.push_back(std::move(g));
    }
    return d;
}

StateVector quantum_reverse_step(const StateVector& psi, double s, double ds, double t_end, const ForwardSde& sde,
                                 const ScoreFn& score, std::span<const double> xi, double* raw_norm) {
    if (psi.dim() != sde.dim()) throw DimensionError("quantum_reverse_step: state dimension mismatch");
    if (!xi.empty() && xi.size() != sde.channels())
        throw DimensionError("quantum_reverse_step: one normal per channel required");
    const RealVector x = real_embed(psi);
    const RealVector f = real_embed(StateVector(sde.drift(psi.amplitudes()), false));
    const DiffusionMatrix d = diffusion_matrix(sde, psi);
    const RealVector dsc = d.apply(checked_score(score, x, t_end - s));

    RealVector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - (f[i] - dsc[i]) * ds;
    if (!xi.empty()) {
        const double sq = std::sqrt(ds);
        for (std::size_t n = 0; n < d.columns.size(); ++n)
            for (std::size_t i = 0; i < x.size(); ++i) out[i] += d.columns[n][i] * xi[n] * sq;
    }
    const StateVector next = real_unembed(out);
    if (raw_norm) *raw_norm = next.norm();
    return next.renormalized();
}

DenoiseResult denoise(std::span<const double> x_t, const ReverseConfig& config, const OuParams& params,
                      const ScoreFn& score, std::uint64_t path_id, bool keep_path) {
    config.validate();
    params.validate();
    DenoiseResult res;
    res.estimate.assign(x_t.begin(), x_t.end());
    if (keep_path) {
        res.times.push_back(0.0);
        res.path.push_back(res.estimate);
    }
    const double span = params.t_end - config.t_min;
    if (span <= 0.0) return res;

    const double ds = span / static_cast<double>(config.steps);
    CounterRng rng(config.seed, path_id);
    const bool noisy = config.noise == NoiseScale::stochastic;
    for (std::size_t k = 0; k < config.steps; ++k) {
        const double s = static_cast<double>(k) * ds;
        const RealVector xi = noisy ? normals(rng, x_t.size()) : RealVector{};
        res.estimate = reverse_ou_step(res.estimate, s, ds, params, score, xi);
        check_divergence(res.estimate, k + 1, s + ds);
        if (keep_path) {
            res.times.push_back(s + ds);
            res.path.push_back(res.estimate);
        }
    }
    return res;
}

QuantumDenoiseResult denoise_quantum(const StateVector& psi_t, const ReverseConfig& config, double t_end,
                                     const ForwardSde& sde, const ScoreFn& score, std::uint64_t path_id,
                                     bool keep_path) {
    config.validate();
    QuantumDenoiseResult res;
    res.estimate = psi_t;
    if (keep_path) {
        res.times.push_back(0.0);
        res.path.push_back(psi_t);
        res.raw_norms.push_back(psi_t.norm());
    }
    const double span = t_end - config.t_min;
    if (span <= 0.0) return res;

    const double ds = span / static_cast<double>(config.steps);
    CounterRng rng(config.seed, path_id);
    const bool noisy = config.noise == NoiseScale::stochastic;
    for (std::size_t k = 0; k < config.steps; ++k) {
        const double s = static_cast<double>(k) * ds;
        const RealVector xi = noisy ? normals(rng, sde.channels()) : RealVector{};
        double raw = 0.0;
        res.estimate = quantum_reverse_step(res.estimate, s, ds, t_end, sde, score, xi, &raw);
        if (!(raw <= kDivergenceNorm)) {
            std::ostringstream msg;
            msg << "quantum reverse integration diverged at step " << k + 1 << " (s = " << s + ds
                << "): raw norm " << raw;
            throw NumericalError(msg.str());
        }
        if (keep_path) {
            res.times.push_back(s + ds);
            res.path.push_back(res.estimate);
            res.raw_norms.push_back(raw);
        }
    }
    return res;
}

}  // namespace qdiff
