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

#include "qdiff/unravel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include "binary_io.hpp"
#include "qdiff/rng.hpp"

namespace qdiff {

namespace {

constexpr char kMagic[8] = {'Q', 'D', 'T', 'R', 'A', 'J', '0', '1'};
constexpr std::uint32_t kFormatVersion = 1;

void axpy(CVector& y, const Complex& a, std::span<const Complex> x) {
    for (std::size_t k = 0; k < y.size(); ++k) y[k] += a * x[k];
}

bool all_finite(std::span<const Complex> v) {
    return std::all_of(v.begin(), v.end(), [](const Complex& z) { return std::isfinite(z.re) && std::isfinite(z.im); });
}

void check_increments(const ForwardSde& sde, const StateVector& psi, std::span<const double> increments) {
    if (increments.size() != sde.channels()) throw DimensionError("SDE step: one increment per channel required");
    if (psi.dim() != sde.dim()) throw DimensionError("SDE step: state dimension mismatch");
}

}  // namespace

std::string to_string(Integrator integrator) {
    return integrator == Integrator::platen_srk ? "platen" : "euler_maruyama";
}

Integrator integrator_from_string(const std::string& name) {
    if (name == "euler_maruyama" || name == "em") return Integrator::euler_maruyama;
    if (name == "platen" || name == "platen_srk" || name == "srk") return Integrator::platen_srk;
    throw std::invalid_argument("unknown integrator '" + name + "'");
}

void SdeConfig::validate() const {
    if (!(t_end > 0.0) || !std::isfinite(t_end)) throw std::invalid_argument("sde.t_end must be positive");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("sde.dt must be positive");
    if (dt > t_end) throw std::invalid_argument("sde.dt must not exceed sde.t_end");
    if (record_every == 0) throw std::invalid_argument("sde.record_every must be >= 1");
}

std::size_t SdeConfig::steps() const {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(t_end / dt)));
}

ForwardSde::ForwardSde(const Hamiltonian& h, const NoiseModel& noise)
    : ForwardSde(h.matrix(), noise.jump_operators()) {
    if (h.qubits() != noise.qubits()) throw DimensionError("ForwardSde: Hamiltonian and noise qubit counts differ");
}

ForwardSde::ForwardSde(const Matrix& h, const std::vector<JumpOperator>& jumps) {
    drift_op_ = h * Complex{0.0, -1.0};
    for (const auto& j : jumps) {
        if (j.op.dim() != h.dim()) throw DimensionError("ForwardSde: jump operator dimension mismatch");
        drift_op_ -= (j.op.adjoint() * j.op) * Complex{0.5 * j.rate};
        diffusion_ops_.push_back(j.op * Complex{0.0, std::sqrt(j.rate)});
    }
    drift_op_.set_label("K");
}

CVector ForwardSde::drift(std::span<const Complex> psi) const { return apply(drift_op_, psi); }

CVector ForwardSde::diffusion_column(std::span<const Complex> psi, std::size_t channel) const {
    return apply(diffusion_ops_.at(channel), psi);
}

std::vector<CVector> ForwardSde::diffusion_columns(std::span<const Complex> psi) const {
    std::vector<CVector> cols;
    cols.reserve(diffusion_ops_.size());
    for (const auto& g : diffusion_ops_) cols.push_back(apply(g, psi));
    return cols;
}

CVector drift(const StateVector& psi, const Hamiltonian& h, const NoiseModel& noise) {
    return ForwardSde(h, noise).drift(psi.amplitudes());
}

std::vector<CVector> diffusion_columns(const StateVector& psi, const NoiseModel& noise) {
    return ForwardSde(Matrix(psi.dim()), noise.jump_operators()).diffusion_columns(psi.amplitudes());
}

StateVector em_step(const ForwardSde& sde, const StateVector& psi, double /*t*/, double dt,
                    std::span<const double> increments) {
    check_increments(sde, psi, increments);
    const auto y = psi.amplitudes();
    CVector out(y.begin(), y.end());
    axpy(out, Complex{dt}, sde.drift(y));
    for (std::size_t n = 0; n < sde.channels(); ++n) axpy(out, Complex{increments[n]}, sde.diffusion_column(y, n));
    return StateVector(std::move(out), false);
}

StateVector platen_step(const ForwardSde& sde, const StateVector& psi, double /*t*/, double dt,
                        std::span<const double> increments) {
    check_increments(sde, psi, increments);
    const auto y = psi.amplitudes();
    const std::size_t m = sde.channels();
    const double sq = std::sqrt(dt);

    const CVector a = sde.drift(y);
    const std::vector<CVector> b = sde.diffusion_columns(y);

    CVector out(y.begin(), y.end());
    axpy(out, Complex{dt}, a);
    for (std::size_t j = 0; j < m; ++j) axpy(out, Complex{increments[j]}, b[j]);

    for (std::size_t j1 = 0; j1 < m; ++j1) {
        CVector support(y.begin(), y.end());
        axpy(support, Complex{dt}, a);
        axpy(support, Complex{sq}, b[j1]);
        for (std::size_t j2 = 0; j2 < m; ++j2) {
            const double iterated =
                0.5 * (increments[j1] * increments[j2] - (j1 == j2 ? dt : 0.0));
            if (iterated == 0.0) continue;
            CVector diff = sde.diffusion_column(support, j2);
            axpy(diff, Complex{-1.0}, b[j2]);
            axpy(out, Complex{iterated / sq}, diff);
        }
    }
    return StateVector(std::move(out), false);
}

WienerIncrements::WienerIncrements(std::uint64_t seed, std::uint64_t trajectory, double dt)
    : seed_(seed), trajectory_(trajectory), sqrt_dt_(std::sqrt(dt)) {}

double WienerIncrements::at(std::size_t step, std::size_t channel) const {
    return sqrt_dt_ * keyed_normal(seed_, trajectory_, static_cast<std::uint32_t>(step),
                                   static_cast<std::uint32_t>(channel));
}

void WienerIncrements::fill(std::size_t step, std::span<double> out) const {
    for (std::size_t n = 0; n < out.size(); ++n) out[n] = at(step, n);
}

Trajectory simulate_trajectory(const StateVector& psi0, const ForwardSde& sde, const SdeConfig& config,
                               std::uint64_t trajectory_id) {
    config.validate();
    if (psi0.dim() != sde.dim()) throw DimensionError("simulate_trajectory: state dimension mismatch");
    const std::size_t steps = config.steps();
    const double dt = config.step_size();
    const WienerIncrements wiener(config.seed, trajectory_id, dt);
    std::vector<double> dw(sde.channels());

    Trajectory path;
    path.times.push_back(0.0);
    path.norms.push_back(psi0.norm());
    path.states.push_back(psi0);

    StateVector psi = psi0;
    for (std::size_t k = 1; k <= steps; ++k) {
        const double t = static_cast<double>(k - 1) * dt;
        wiener.fill(k - 1, dw);
        StateVector next = config.integrator == Integrator::platen_srk ? platen_step(sde, psi, t, dt, dw)
                                                                        : em_step(sde, psi, t, dt, dw);
        if (!all_finite(next.amplitudes())) {
            std::size_t channel = 0;
            for (std::size_t n = 1; n < dw.size(); ++n)
                if (std::abs(dw[n]) > std::abs(dw[channel])) channel = n;
            std::ostringstream msg;
            msg << "trajectory " << trajectory_id << " became non-finite at step " << k << " (t = " << t + dt
                << ")";
            if (!dw.empty()) msg << ", largest increment on channel " << channel << " (dW = " << dw[channel] << ")";
            throw NumericalError(msg.str());
        }
        const double raw_norm = next.norm();
        psi = config.renormalize_each_step ? next.renormalized() : std::move(next);
        if (k % config.record_every == 0 || k == steps) {
            path.times.push_back(static_cast<double>(k) * dt);
            path.norms.push_back(raw_norm);
            path.states.push_back(psi);
        }
    }
    return path;
}

Trajectory simulate_trajectory(const StateVector& psi0, const Hamiltonian& h, const NoiseModel& noise,
                               const SdeConfig& config, std::uint64_t trajectory_id) {
    return simulate_trajectory(psi0, ForwardSde(h, noise), config, trajectory_id);
}

Ensemble run_ensemble(const StateVector& psi0, const Hamiltonian& h, const NoiseModel& noise,
                      const SdeConfig& config, std::size_t trajectories, unsigned threads) {
    if (trajectories == 0) throw std::invalid_argument("run_ensemble: need at least one trajectory");
    config.validate();
    const ForwardSde sde(h, noise);
    Ensemble ens{std::vector<Trajectory>(trajectories), config, noise, h};

    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, trajectories));
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < trajectories; i += threads)
                    ens.trajectories[i] = simulate_trajectory(psi0, sde, config, i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return ens;
}

DensityMatrix ensemble_density(const Ensemble& ensemble, std::size_t t_index) {
    if (ensemble.trajectories.empty()) throw std::invalid_argument("ensemble_density: empty ensemble");
    const std::size_t dim = ensemble.trajectories.front().states.at(t_index).dim();
    Matrix sum(dim);
    for (const auto& path : ensemble.trajectories) {
        const auto amps = path.states.at(t_index).amplitudes();
        sum += outer(amps, amps);
    }
    sum = (sum + sum.adjoint()) * Complex{0.5};
    const double tr = sum.trace().re;
    if (!(tr > 0.0) || !std::isfinite(tr)) throw NumericalError("ensemble_density: non-positive trace");
    sum *= Complex{1.0 / tr};
    return DensityMatrix(std::move(sum), 1e-9);
}

LipschitzBounds lipschitz_bounds(const ForwardSde& sde, double h) {
    const std::size_t d = sde.dim();
    const std::size_t n = 2 * d;
    // Real Jacobian of f by central differences, one real coordinate at a time.
    std::vector<double> jac(n * n);
    for (std::size_t c = 0; c < n; ++c) {
        CVector plus(d), minus(d);
        Complex& p = plus[c % d];
        Complex& q = minus[c % d];
        if (c < d) { p.re = h; q.re = -h; } else { p.im = h; q.im = -h; }
        const CVector fp = sde.drift(plus), fm = sde.drift(minus);
        for (std::size_t r = 0; r < d; ++r) {
            jac[r * n + c] = (fp[r].re - fm[r].re) / (2 * h);
            jac[(r + d) * n + c] = (fp[r].im - fm[r].im) / (2 * h);
        }
    }
    Matrix gram(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += jac[k * n + i] * jac[k * n + j];
            gram(i, j) = Complex{s};
        }
    LipschitzBounds out;
    const auto ev = hermitian_eigenvalues(gram);
    out.drift_jacobian_norm = std::sqrt(std::max(0.0, ev.back()));
    // Coefficients carry no explicit time dependence: g(psi, t + h) - g(psi, t - h) vanishes identically.
    out.diffusion_time_derivative = 0.0;
    return out;
}

void write_trajectories_binary(const std::filesystem::path& path, const std::vector<Trajectory>& trajectories,
                               std::uint64_t seed, const std::string& config_digest, PathDirection direction) {
    if (trajectories.empty()) throw std::invalid_argument("write_trajectories_binary: nothing to write");
    const std::size_t points = trajectories.front().states.size();
    const std::size_t dim = trajectories.front().states.front().dim();
    for (const auto& t : trajectories)
        if (t.states.size() != points || t.times.size() != points || t.norms.size() != points)
            throw DimensionError("write_trajectories_binary: ragged trajectories");

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out.write(kMagic, sizeof kMagic);
    detail::put_le<std::uint32_t>(out, kFormatVersion);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(direction));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(qubits_for_dim(dim)));
    detail::put_le<std::uint64_t>(out, trajectories.size());
    detail::put_le<std::uint64_t>(out, points);
    detail::put_le<std::uint64_t>(out, seed);
    std::string digest = config_digest;
    digest.resize(16, '0');
    out.write(digest.data(), 16);
    for (const auto& t : trajectories)
        for (std::size_t k = 0; k < points; ++k) {
            detail::put_le<double>(out, t.times[k]);
            detail::put_le<double>(out, t.norms[k]);
            for (const auto& z : t.states[k].amplitudes()) {
                detail::put_le<double>(out, z.re);
                detail::put_le<double>(out, z.im);
            }
        }
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

TrajectoryFile read_trajectories_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    char magic[8];
    if (!in.read(magic, 8) || !std::equal(magic, magic + 8, kMagic))
        throw std::runtime_error(path.string() + " is not a trajectory file");
    if (detail::get_le<std::uint32_t>(in) != kFormatVersion) throw std::runtime_error("unsupported trajectory file version");
    TrajectoryFile file;
    file.direction = static_cast<PathDirection>(detail::get_le<std::uint32_t>(in));
    file.qubits = static_cast<int>(detail::get_le<std::uint32_t>(in));
    if (file.qubits < 1 || file.qubits > kMaxQubits) throw DimensionError("trajectory file: bad qubit count");
    const auto count = detail::get_le<std::uint64_t>(in);
    const auto points = detail::get_le<std::uint64_t>(in);
    file.seed = detail::get_le<std::uint64_t>(in);
    file.config_digest.resize(16);
    if (!in.read(file.config_digest.data(), 16)) throw std::runtime_error("trajectory file truncated");
    const std::size_t dim = std::size_t{1} << file.qubits;
    file.trajectories.resize(count);
    for (auto& t : file.trajectories)
        for (std::uint64_t k = 0; k < points; ++k) {
            t.times.push_back(detail::get_le<double>(in));
            t.norms.push_back(detail::get_le<double>(in));
            CVector amps(dim);
            for (auto& z : amps) {
                z.re = detail::get_le<double>(in);
                z.im = detail::get_le<double>(in);
            }
            t.states.emplace_back(std::move(amps), false);
        }
    return file;
}

void write_ensemble_summary_csv(const std::filesystem::path& path, const Ensemble& ensemble,
                                const MasterSolution* oracle) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << std::setprecision(17) << "time,mean_norm,trace_distance\n";
    const auto& first = ensemble.trajectories.at(0);
    for (std::size_t k = 0; k < first.times.size(); ++k) {
        double mean = 0.0;
        for (const auto& t : ensemble.trajectories) mean += t.norms[k];
        mean /= static_cast<double>(ensemble.trajectories.size());
        out << first.times[k] << ',' << mean << ',';
        if (oracle) {
            auto it = std::find_if(oracle->times.begin(), oracle->times.end(),
                                   [&](double s) { return std::abs(s - first.times[k]) < 1e-9; });
            if (it != oracle->times.end())
                out << trace_distance(ensemble_density(ensemble, k),
                                      oracle->states[static_cast<std::size_t>(it - oracle->times.begin())]);
        }
        out << '\n';
    }
}

}  // namespace qdiff
