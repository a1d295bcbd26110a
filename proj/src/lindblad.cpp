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

#include "qdiff/lindblad.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace qdiff {

namespace {

void check_rate(double r, const char* what) {
    if (!std::isfinite(r) || r < 0.0) {
        std::ostringstream msg;
        msg << what << " rate must be finite and nonnegative, got " << r;
        throw std::invalid_argument(msg.str());
    }
}

// s rho s^+ for the lifted single-qubit operator s.
Matrix sandwich(const Matrix& s, const Matrix& rho) { return s * rho * s.adjoint(); }

}  // namespace

void ChannelRates::validate() const {
    for (double r : depolarization) check_rate(r, "depolarization");
    check_rate(amplitude, "amplitude-damping");
    check_rate(dephasing, "dephasing");
}

bool ChannelRates::any() const {
    return depolarization[0] > 0 || depolarization[1] > 0 || depolarization[2] > 0 || amplitude > 0 ||
           dephasing > 0;
}

Matrix JumpOperator::scaled() const { return op * Complex{std::sqrt(rate)}; }

NoiseModel::NoiseModel(int qubits) : NoiseModel(qubits, std::vector<ChannelRates>(qubits)) {}

NoiseModel::NoiseModel(int qubits, std::vector<ChannelRates> per_qubit)
    : qubits_(qubits), per_qubit_(std::move(per_qubit)) {
    if (qubits_ < 1 || qubits_ > kMaxQubits) throw DimensionError("NoiseModel: qubit count out of range");
    if (static_cast<int>(per_qubit_.size()) != qubits_)
        throw DimensionError("NoiseModel: need one rate set per qubit");
    for (const auto& r : per_qubit_) r.validate();
}

bool NoiseModel::is_zero() const {
    for (const auto& r : per_qubit_)
        if (r.any()) return false;
    return true;
}

std::vector<JumpOperator> NoiseModel::jump_operators() const {
    std::vector<JumpOperator> jumps;
    const Matrix paulis[3] = {pauli_x(), pauli_y(), pauli_z()};
    for (int q = 0; q < qubits_; ++q) {
        const ChannelRates& r = per_qubit_[q];
        for (int k = 0; k < 3; ++k)
            if (r.depolarization[k] > 0) jumps.push_back({r.depolarization[k], lift(paulis[k], q, qubits_)});
        if (r.amplitude > 0) jumps.push_back({r.amplitude, lift(sigma_minus(), q, qubits_)});
        if (r.dephasing > 0) jumps.push_back({r.dephasing, lift(pauli_z(), q, qubits_)});
    }
    return jumps;
}

Hamiltonian::Hamiltonian(int qubits, std::vector<PauliTerm> terms) : qubits_(qubits), terms_(std::move(terms)) {
    if (qubits_ < 1 || qubits_ > kMaxQubits) throw DimensionError("Hamiltonian: qubit count out of range");
    for (const auto& t : terms_) {
        if (static_cast<int>(t.paulis.size()) != qubits_)
            throw DimensionError("Hamiltonian: Pauli string '" + t.paulis + "' has wrong length");
        if (t.paulis.find_first_not_of("IXYZ") != std::string::npos)
            throw std::invalid_argument("Hamiltonian: bad Pauli string '" + t.paulis + "'");
        if (!std::isfinite(t.coefficient)) throw std::invalid_argument("Hamiltonian: non-finite coefficient");
    }
}

Hamiltonian Hamiltonian::precession(int qubits, double omega) {
    std::vector<PauliTerm> terms;
    for (int q = 0; q < qubits; ++q) {
        std::string s(qubits, 'I');
        s[q] = 'Z';
        terms.push_back({0.5 * omega, s});
    }
    return Hamiltonian(qubits, std::move(terms));
}

Matrix Hamiltonian::matrix() const {
    const std::size_t dim = std::size_t{1} << qubits_;
    Matrix h(dim, "H");
    for (const auto& t : terms_) {
        Matrix term;
        for (char c : t.paulis) {
            const Matrix f = c == 'X' ? pauli_x() : c == 'Y' ? pauli_y() : c == 'Z' ? pauli_z() : Matrix::identity(2);
            term = term.dim() == 0 ? f : kron(term, f);
        }
        h += term * Complex{t.coefficient};
    }
    return h;
}

Matrix dissipator_depolarization(const Matrix& rho, const std::array<double, 3>& rates, int qubit) {
    for (double r : rates) check_rate(r, "depolarization");
    const int n = qubits_for_dim(rho.dim());
    const Matrix paulis[3] = {pauli_x(), pauli_y(), pauli_z()};
    Matrix out(rho.dim());
    for (int k = 0; k < 3; ++k) {
        if (rates[k] == 0.0) continue;
        // sigma_k^2 = I, so the anticommutator term is exactly rho.
        out += (sandwich(lift(paulis[k], qubit, n), rho) - rho) * Complex{rates[k]};
    }
    return out;
}

Matrix dissipator_amplitude(const Matrix& rho, double gamma_a, int qubit) {
    check_rate(gamma_a, "amplitude-damping");
    if (gamma_a == 0.0) return Matrix(rho.dim());
    const int n = qubits_for_dim(rho.dim());
    const Matrix lower = lift(sigma_minus(), qubit, n);
    const Matrix number = lift(sigma_plus(), qubit, n) * lower;
    return (lower * rho * lower.adjoint() - anticommutator(number, rho) * Complex{0.5}) * Complex{gamma_a};
}

Matrix dissipator_phase(const Matrix& rho, double gamma_p, int qubit) {
    check_rate(gamma_p, "dephasing");
    if (gamma_p == 0.0) return Matrix(rho.dim());
    const int n = qubits_for_dim(rho.dim());
    return (sandwich(lift(pauli_z(), qubit, n), rho) - rho) * Complex{gamma_p};
}

Matrix dissipator_relaxation(const Matrix& rho, double gamma_a, double gamma_p, int qubit) {
    return dissipator_amplitude(rho, gamma_a, qubit) + dissipator_phase(rho, gamma_p, qubit);
}

Matrix dissipator_total(const Matrix& rho, const NoiseModel& noise) {
    if (rho.dim() != (std::size_t{1} << noise.qubits()))
        throw DimensionError("dissipator_total: state and noise model disagree on qubit count");
    Matrix out(rho.dim());
    for (int q = 0; q < noise.qubits(); ++q) {
        const ChannelRates& r = noise.rates(q);
        out += dissipator_depolarization(rho, r.depolarization, q);
        out += dissipator_relaxation(rho, r.amplitude, r.dephasing, q);
    }
    return out;
}

Matrix dissipator_jump_form(const Matrix& rho, const std::vector<JumpOperator>& jumps) {
    Matrix out(rho.dim());
    for (const auto& j : jumps) {
        const Matrix l = j.op;
        const Matrix ldag = l.adjoint();
        out += (l * rho * ldag - anticommutator(ldag * l, rho) * Complex{0.5}) * Complex{j.rate};
    }
    return out;
}

Matrix lindblad_rhs(const Matrix& rho, const Matrix& h, const NoiseModel& noise) {
    if (h.dim() != rho.dim()) throw DimensionError("lindblad_rhs: Hamiltonian dimension mismatch");
    return commutator(h, rho) * Complex{0.0, -1.0} + dissipator_total(rho, noise);
}

Matrix lindblad_rhs(const Matrix& rho, const Hamiltonian& h, const NoiseModel& noise) {
    return lindblad_rhs(rho, h.matrix(), noise);
}

MasterSolution integrate_master(const DensityMatrix& rho0, const Hamiltonian& h, const NoiseModel& noise,
                                double t_end, double dt, std::size_t record_every) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("integrate_master: dt must be positive");
    if (!(t_end > dt)) throw std::invalid_argument("integrate_master: dt must be smaller than t_end");
    if (record_every == 0) throw std::invalid_argument("integrate_master: record_every must be >= 1");
    const std::string why = physicality_violation(rho0.matrix());
    if (!why.empty()) throw std::invalid_argument("integrate_master: initial state " + why);

    const auto steps = static_cast<std::size_t>(std::llround(t_end / dt));
    const double step = t_end / static_cast<double>(steps);
    const Matrix hm = h.matrix();
    auto rhs = [&](const Matrix& r) { return lindblad_rhs(r, hm, noise); };

    MasterSolution sol;
    sol.step_size = step;
    sol.times.push_back(0.0);
    sol.states.push_back(rho0);

    Matrix rho = rho0.matrix();
    const Complex half{0.5 * step}, full{step}, sixth{step / 6.0};
    for (std::size_t k = 1; k <= steps; ++k) {
        const Matrix k1 = rhs(rho);
        const Matrix k2 = rhs(rho + k1 * half);
        const Matrix k3 = rhs(rho + k2 * half);
        const Matrix k4 = rhs(rho + k3 * full);
        rho += (k1 + k2 * Complex{2.0} + k3 * Complex{2.0} + k4) * sixth;
        rho = (rho + rho.adjoint()) * Complex{0.5};
        rho *= Complex{1.0 / rho.trace().re};

        if (k % record_every == 0 || k == steps) {
            try {
                sol.states.emplace_back(rho, 1e-9);
            } catch (const std::invalid_argument& e) {
                std::ostringstream msg;
                msg << "integrate_master: state left the physical set at step " << k << " (t = " << k * step
                    << "): " << e.what();
                throw NumericalError(msg.str());
            }
            sol.times.push_back(static_cast<double>(k) * step);
        }
    }
    return sol;
}

void write_master_csv(const std::filesystem::path& path, const MasterSolution& solution) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << std::setprecision(17);
    const std::size_t dim = solution.states.empty() ? 0 : solution.states.front().dim();
    out << "time";
    for (std::size_t r = 0; r < dim; ++r)
        for (std::size_t c = 0; c < dim; ++c) out << ",re" << r << c << ",im" << r << c;
    out << '\n';
    for (std::size_t k = 0; k < solution.times.size(); ++k) {
        out << solution.times[k];
        for (const auto& z : solution.states[k].matrix().entries()) out << ',' << z.re << ',' << z.im;
        out << '\n';
    }
}

}  // namespace qdiff
