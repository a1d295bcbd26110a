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

// Linear stochastic unraveling of the master equation:
//
//     d psi = f(psi) dt + sum_n g_n(psi) dW_n,
//     f(psi) = -i H psi - 1/2 sum_n gamma_n L_n^+ L_n psi,
//     g_n(psi) = i sqrt(gamma_n) L_n psi,
//
// with one independent real Wiener process per jump operator. The average
// of |psi><psi| over unnormalized paths solves the master equation.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "qdiff/lindblad.hpp"

namespace qdiff {

enum class Integrator { euler_maruyama, platen_srk };

std::string to_string(Integrator integrator);
Integrator integrator_from_string(const std::string& name);

struct SdeConfig {
    double t_end = 1.0;
    double dt = 1e-3;
    Integrator integrator = Integrator::euler_maruyama;
    std::uint64_t seed = 0;
    bool renormalize_each_step = false;
    std::size_t record_every = 1;  // keep every k-th step (the last step is always kept)

    void validate() const;
    std::size_t steps() const;  // round(t_end / dt)
    double step_size() const { return t_end / static_cast<double>(steps()); }
};

/// Drift and diffusion coefficients assembled once for a (H, noise) pair.
class ForwardSde {
public:
    ForwardSde(const Hamiltonian& h, const NoiseModel& noise);
    ForwardSde(const Matrix& h, const std::vector<JumpOperator>& jumps);

    std::size_t dim() const { return drift_op_.dim(); }
    std::size_t channels() const { return diffusion_ops_.size(); }

    CVector drift(std::span<const Complex> psi) const;
    std::vector<CVector> diffusion_columns(std::span<const Complex> psi) const;
    CVector diffusion_column(std::span<const Complex> psi, std::size_t channel) const;

    /// -iH - 1/2 sum gamma L^+ L, and i sqrt(gamma) L per channel.
    const Matrix& drift_operator() const { return drift_op_; }
    const std::vector<Matrix>& diffusion_operators() const { return diffusion_ops_; }

private:
    Matrix drift_op_;
    std::vector<Matrix> diffusion_ops_;
};

CVector drift(const StateVector& psi, const Hamiltonian& h, const NoiseModel& noise);
std::vector<CVector> diffusion_columns(const StateVector& psi, const NoiseModel& noise);

/// psi + f dt + sum_n g_n dW_n.
StateVector em_step(const ForwardSde& sde, const StateVector& psi, double t, double dt,
                    std::span<const double> increments);

/// Platen's explicit strong order 1.0 scheme with supporting values
/// psi + f dt + g_j sqrt(dt). Double Wiener integrals use the commutative-noise
/// closure I_(j,k) + I_(k,j) = dW_j dW_k; for a single channel it is exact.
StateVector platen_step(const ForwardSde& sde, const StateVector& psi, double t, double dt,
                        std::span<const double> increments);

/// Wiener increments N(0, dt) addressed by (seed, trajectory, step, channel).
class WienerIncrements {
public:
    WienerIncrements(std::uint64_t seed, std::uint64_t trajectory, double dt);
    double at(std::size_t step, std::size_t channel) const;
    void fill(std::size_t step, std::span<double> out) const;

private:
    std::uint64_t seed_;
    std::uint64_t trajectory_;
    double sqrt_dt_;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<StateVector> states;  // unnormalized unless renormalize_each_step
    std::vector<double> norms;        // before any renormalization
};

/// Integrates one path on the config's step grid. Throws NumericalError on a
/// non-finite amplitude, naming the step and the dominant channel.
Trajectory simulate_trajectory(const StateVector& psi0, const ForwardSde& sde, const SdeConfig& config,
                               std::uint64_t trajectory_id);
Trajectory simulate_trajectory(const StateVector& psi0, const Hamiltonian& h, const NoiseModel& noise,
                               const SdeConfig& config, std::uint64_t trajectory_id);

struct Ensemble {
    std::vector<Trajectory> trajectories;
    SdeConfig config;
    NoiseModel noise;
    Hamiltonian hamiltonian;
};

/// N independent trajectories with ids 0..N-1; the result does not depend
/// on `threads` (0 picks the hardware concurrency).
Ensemble run_ensemble(const StateVector& psi0, const Hamiltonian& h, const NoiseModel& noise,
                      const SdeConfig& config, std::size_t trajectories, unsigned threads = 0);

/// (1/N) sum |psi><psi| over unnormalized states at a recorded index,
/// rescaled to unit trace.
DensityMatrix ensemble_density(const Ensemble& ensemble, std::size_t t_index);

struct LipschitzBounds {
    double drift_jacobian_norm = 0.0;        // spectral norm of the real Jacobian of f
    double diffusion_time_derivative = 0.0;  // max |d g_n / dt|
};

/// Finite-difference estimates; both coefficients are linear and
/// time-independent so the bounds are finite operator norms.
LipschitzBounds lipschitz_bounds(const ForwardSde& sde, double h = 1e-6);

enum class PathDirection : std::uint32_t { forward = 0, reverse = 1 };

/// Binary file: 8-byte magic "QDTRAJ01", u32 version, u32 direction, u32 qubits,
/// u64 trajectory count, u64 recorded points, u64 seed, 16-char config digest,
/// then per trajectory and point: f64 time, f64 norm, 2^n x (f64 re, f64 im).
/// All values little-endian.
void write_trajectories_binary(const std::filesystem::path& path, const std::vector<Trajectory>& trajectories,
                               std::uint64_t seed, const std::string& config_digest,
                               PathDirection direction = PathDirection::forward);

struct TrajectoryFile {
    PathDirection direction;
    int qubits;
    std::uint64_t seed;
    std::string config_digest;
    std::vector<Trajectory> trajectories;
};
TrajectoryFile read_trajectories_binary(const std::filesystem::path& path);

/// CSV: time, mean_norm, trace_distance (empty when no oracle is given).
void write_ensemble_summary_csv(const std::filesystem::path& path, const Ensemble& ensemble,
                                const MasterSolution* oracle = nullptr);

}  // namespace qdiff
