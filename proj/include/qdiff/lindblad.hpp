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

// Markovian noise channels and the density-matrix master equation
//
//     d rho/dt = -i [H, rho] + sum_n g_n (L_n rho L_n^+ - 1/2 {L_n^+ L_n, rho})
//
// with hbar = 1. Each qubit carries its own depolarizing (X, Y, Z),
// amplitude-damping (sigma-) and dephasing (Z) rates.

#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "qdiff/qstate.hpp"

namespace qdiff {

/// Rates in units of 1/time for the channels acting on one qubit.
struct ChannelRates {
    std::array<double, 3> depolarization{};  // x, y, z
    double amplitude = 0.0;
    double dephasing = 0.0;

    void validate() const;  // throws std::invalid_argument on negative or non-finite rates
    bool any() const;
};

/// One dissipative channel: rate g and operator L on the full register.
struct JumpOperator {
    double rate = 0.0;
    Matrix op;

    Matrix scaled() const;  // sqrt(rate) * L
};

class NoiseModel {
public:
    explicit NoiseModel(int qubits = 1);
    NoiseModel(int qubits, std::vector<ChannelRates> per_qubit);
    static NoiseModel single(const ChannelRates& rates) { return NoiseModel(1, {rates}); }

    int qubits() const { return qubits_; }
    const ChannelRates& rates(int qubit) const { return per_qubit_.at(qubit); }
    const std::vector<ChannelRates>& per_qubit() const { return per_qubit_; }
    bool is_zero() const;

    /// One (rate, L) pair per strictly positive rate, in qubit order and then
    /// X, Y, Z depolarization, sigma- damping, Z dephasing.
    std::vector<JumpOperator> jump_operators() const;

private:
    int qubits_;
    std::vector<ChannelRates> per_qubit_;
};

struct PauliTerm {
    double coefficient = 0.0;
    std::string paulis;  // one of I, X, Y, Z per qubit, qubit 0 first
};

class Hamiltonian {
public:
    explicit Hamiltonian(int qubits = 1, std::vector<PauliTerm> terms = {});

    /// (omega / 2) Z on every qubit.
    static Hamiltonian precession(int qubits, double omega = 1.0);

    int qubits() const { return qubits_; }
    const std::vector<PauliTerm>& terms() const { return terms_; }
    Matrix matrix() const;

private:
    int qubits_;
    std::vector<PauliTerm> terms_;
};

// Dissipators act on the `qubit` factor of rho (qubit 0 for a single qubit).
Matrix dissipator_depolarization(const Matrix& rho, const std::array<double, 3>& rates, int qubit = 0);
Matrix dissipator_amplitude(const Matrix& rho, double gamma_a, int qubit = 0);
Matrix dissipator_phase(const Matrix& rho, double gamma_p, int qubit = 0);
Matrix dissipator_relaxation(const Matrix& rho, double gamma_a, double gamma_p, int qubit = 0);
Matrix dissipator_total(const Matrix& rho, const NoiseModel& noise);

/// Generic form sum_n g_n (L rho L^+ - 1/2 {L^+ L, rho}).
Matrix dissipator_jump_form(const Matrix& rho, const std::vector<JumpOperator>& jumps);

Matrix lindblad_rhs(const Matrix& rho, const Matrix& h, const NoiseModel& noise);
Matrix lindblad_rhs(const Matrix& rho, const Hamiltonian& h, const NoiseModel& noise);

struct MasterSolution {
    std::vector<double> times;
    std::vector<DensityMatrix> states;
    double step_size = 0.0;
};

/// Classical RK4 on lindblad_rhs. After each step the state is re-Hermitized
/// and its trace reset to 1. Stores every `record_every`-th step plus the
/// final one. Throws std::invalid_argument for dt <= 0, dt >= t_end, or a
/// non-physical rho0.
MasterSolution integrate_master(const DensityMatrix& rho0, const Hamiltonian& h, const NoiseModel& noise,
                                double t_end, double dt, std::size_t record_every = 1);

/// CSV: time, then (re, im) of each entry in row-major order.
void write_master_csv(const std::filesystem::path& path, const MasterSolution& solution);

}  // namespace qdiff
