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
#include <filesystem>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "qdiff/lindblad.hpp"
#include "test_support.hpp"

using namespace qdiff;
using qdiff::testing::near;
using qdiff::testing::random_density;
using qdiff::testing::random_state;

namespace {

const double kInvSqrt2 = 1.0 / std::numbers::sqrt2;

DensityMatrix ket0() { return pure_density(StateVector::basis(1, 0)); }
DensityMatrix ket1() { return pure_density(StateVector::basis(1, 1)); }
DensityMatrix plus() { return pure_density(StateVector({kInvSqrt2, kInvSqrt2})); }

double bloch_component(const Matrix& m, const Matrix& pauli) { return (m * pauli).trace().re; }

ChannelRates random_rates(CounterRng& rng) {
    ChannelRates r;
    for (auto& g : r.depolarization) g = rng.uniform() < 0.3 ? 0.0 : rng.uniform(0.0, 0.5);
    r.amplitude = rng.uniform() < 0.3 ? 0.0 : rng.uniform(0.0, 0.5);
    r.dephasing = rng.uniform() < 0.3 ? 0.0 : rng.uniform(0.0, 0.5);
    return r;
}

NoiseModel random_noise(CounterRng& rng, int qubits) {
    std::vector<ChannelRates> rates;
    for (int q = 0; q < qubits; ++q) rates.push_back(random_rates(rng));
    return NoiseModel(qubits, rates);
}

}  // namespace

TEST_CASE("NoiseModel validation and jump operators") {
    ChannelRates bad;
    bad.dephasing = -0.1;
    CHECK_THROWS_AS(NoiseModel::single(bad), std::invalid_argument);
    bad.dephasing = std::nan("");
    CHECK_THROWS_AS(NoiseModel::single(bad), std::invalid_argument);
    CHECK_THROWS_AS(NoiseModel(2, {ChannelRates{}}), DimensionError);

    CHECK(NoiseModel(1).jump_operators().empty());
    CHECK(NoiseModel(1).is_zero());

    ChannelRates r;
    r.depolarization = {0.1, 0.0, 0.3};
    r.dephasing = 0.5;
    const auto jumps = NoiseModel::single(r).jump_operators();
    REQUIRE(jumps.size() == 3);
    CHECK(jumps[0].rate == 0.1);
    CHECK(max_abs_diff(jumps[0].op, pauli_x()) == 0.0);
    CHECK(max_abs_diff(jumps[1].op, pauli_z()) == 0.0);
    // Dephasing enters as (gamma_p, Z) with no extra factor.
    CHECK(jumps[2].rate == 0.5);
    CHECK(max_abs_diff(jumps[2].op, pauli_z()) == 0.0);
    CHECK(max_abs_diff(jumps[2].scaled(), pauli_z() * Complex{std::sqrt(0.5)}) == 0.0);

    ChannelRates damp;
    damp.amplitude = 0.2;
    const auto two = NoiseModel(2, {ChannelRates{}, damp}).jump_operators();
    REQUIRE(two.size() == 1);
    CHECK(max_abs_diff(two[0].op, kron(Matrix::identity(2), sigma_minus())) == 0.0);
}

TEST_CASE("Hamiltonian assembly") {
    const Matrix h = Hamiltonian::precession(1, 2.0).matrix();
    CHECK(max_abs_diff(h, pauli_z()) == 0.0);
    const Hamiltonian ising(2, {{0.7, "ZZ"}, {-0.3, "XI"}, {0.2, "IY"}});
    const Matrix m = ising.matrix();
    CHECK(m.is_hermitian(1e-12));
    const Matrix expected = kron(pauli_z(), pauli_z()) * Complex{0.7} +
                            kron(pauli_x(), Matrix::identity(2)) * Complex{-0.3} +
                            kron(Matrix::identity(2), pauli_y()) * Complex{0.2};
    CHECK(max_abs_diff(m, expected) < 1e-15);
    CHECK_THROWS_AS(Hamiltonian(2, {{1.0, "Z"}}), DimensionError);
    CHECK_THROWS_AS(Hamiltonian(1, {{1.0, "Q"}}), std::invalid_argument);
}

TEST_CASE("dissipator_depolarization") {
    const Matrix mixed = DensityMatrix::maximally_mixed(1).matrix();
    CHECK(dissipator_depolarization(mixed, {0.3, 0.2, 0.1}).max_abs() < 1e-16);
    CHECK(dissipator_depolarization(ket0().matrix(), {0.0, 0.0, 0.0}).max_abs() == 0.0);

    // sum_k s_k s_j s_k = -s_j gives dr/dt = -4 gamma r for equal rates.
    const double g = 0.1;
    const Matrix d = dissipator_depolarization(ket0().matrix(), {g, g, g});
    CHECK(bloch_component(d, pauli_z()) == doctest::Approx(-4.0 * g).epsilon(1e-14));
    CHECK(std::abs(bloch_component(d, pauli_x())) < 1e-15);
    CHECK(near(d.trace(), Complex{}, 1e-15));
    CHECK(d.is_hermitian(1e-15));
    CHECK_THROWS_AS(dissipator_depolarization(ket0().matrix(), {-0.1, 0.0, 0.0}), std::invalid_argument);

    // Unsimplified form with the explicit 1/2 {s_k^2, rho} term.
    CounterRng rng(21);
    for (int t = 0; t < 20; ++t) {
        const Matrix rho = random_density(rng, 1).matrix();
        const std::array<double, 3> rates{rng.uniform(), rng.uniform(), rng.uniform()};
        const Matrix paulis[3] = {pauli_x(), pauli_y(), pauli_z()};
        Matrix literal(2);
        for (int k = 0; k < 3; ++k)
            literal += (paulis[k] * rho * paulis[k] - anticommutator(paulis[k] * paulis[k], rho) * Complex{0.5}) *
                       Complex{rates[k]};
        CHECK(max_abs_diff(literal, dissipator_depolarization(rho, rates)) < 1e-15);
    }
}

TEST_CASE("dissipator_amplitude") {
    CHECK(dissipator_amplitude(ket0().matrix(), 0.4).max_abs() == 0.0);
    const double ga = 0.2;
    const Matrix d1 = dissipator_amplitude(ket1().matrix(), ga);
    CHECK(d1(1, 1).re == doctest::Approx(-ga));
    CHECK(d1(0, 0).re == doctest::Approx(ga));
    // Coherences decay at gamma_a / 2.
    const Matrix dp = dissipator_amplitude(plus().matrix(), ga);
    CHECK(dp(0, 1).re == doctest::Approx(-0.5 * ga * 0.5));
    CHECK(dp.is_hermitian(1e-15));
    CHECK(near(dp.trace(), Complex{}, 1e-16));
}

TEST_CASE("dissipator_phase") {
    const Matrix diag(2, std::vector<Complex>{0.3, 0.0, 0.0, 0.7});
    CHECK(dissipator_phase(diag, 0.5).max_abs() == 0.0);
    CHECK(dissipator_phase(plus().matrix(), 0.0).max_abs() == 0.0);
    const double gp = 0.5;
    const Matrix d = dissipator_phase(plus().matrix(), gp);
    CHECK(d(0, 0) == Complex{});
    CHECK(d(1, 1) == Complex{});
    CHECK(d(0, 1).re == doctest::Approx(-2.0 * gp * 0.5));
    // The jump form with (gamma_p, Z) reproduces it directly.
    const auto jumps = NoiseModel::single({{}, 0.0, gp}).jump_operators();
    CounterRng rng(2);
    for (int t = 0; t < 10; ++t) {
        const Matrix rho = random_density(rng, 1).matrix();
        CHECK(max_abs_diff(dissipator_phase(rho, gp), dissipator_jump_form(rho, jumps)) < 1e-15);
    }
}

TEST_CASE("dissipator_relaxation") {
    CounterRng rng(4);
    for (int t = 0; t < 50; ++t) {
        const Matrix rho = random_density(rng, 1).matrix();
        const double ga = rng.uniform(), gp = rng.uniform();
        CHECK(max_abs_diff(dissipator_relaxation(rho, ga, gp),
                           dissipator_amplitude(rho, ga) + dissipator_phase(rho, gp)) == 0.0);
    }
    CHECK(dissipator_relaxation(plus().matrix(), 0.0, 0.0).max_abs() == 0.0);
    const double ga = 0.2, gp = 0.5;
    const Matrix d = dissipator_relaxation(plus().matrix(), ga, gp);
    CHECK(d(0, 1).re / plus()(0, 1).re == doctest::Approx(-(ga / 2.0 + 2.0 * gp)));
}

TEST_CASE("dissipator_total equals the generic jump-operator sum") {
    CHECK(dissipator_total(plus().matrix(), NoiseModel(1)).max_abs() == 0.0);
    CounterRng rng(8);
    for (int t = 0; t < 100; ++t) {
        const int n = 1 + t % 3;
        const Matrix rho = random_density(rng, n).matrix();
        const NoiseModel noise = random_noise(rng, n);
        const Matrix total = dissipator_total(rho, noise);
        Matrix parts(rho.dim());
        for (int q = 0; q < n; ++q) {
            parts += dissipator_depolarization(rho, noise.rates(q).depolarization, q);
            parts += dissipator_relaxation(rho, noise.rates(q).amplitude, noise.rates(q).dephasing, q);
        }
        CHECK(max_abs_diff(total, parts) == 0.0);
        CHECK(max_abs_diff(total, dissipator_jump_form(rho, noise.jump_operators())) <= 1e-12);
    }
    CHECK_THROWS_AS(dissipator_total(plus().matrix(), NoiseModel(2)), DimensionError);
}

TEST_CASE("lindblad_rhs") {
    // Pure precession: d<X>/dt = -omega <Y>, d<Y>/dt = omega <X>.
    const double omega = 1.3;
    const DensityMatrix rho = pure_density(StateVector({kInvSqrt2, cexp({0.0, std::numbers::pi / 4}) * kInvSqrt2}));
    const auto r = bloch_vector(rho);
    const Matrix d = lindblad_rhs(rho.matrix(), Hamiltonian::precession(1, omega), NoiseModel(1));
    CHECK(bloch_component(d, pauli_x()) == doctest::Approx(-omega * r[1]).epsilon(1e-14));
    CHECK(bloch_component(d, pauli_y()) == doctest::Approx(omega * r[0]).epsilon(1e-14));
    CHECK(std::abs(bloch_component(d, pauli_z())) < 1e-15);

    const NoiseModel dephase = NoiseModel::single({{}, 0.0, 0.5});
    CHECK(max_abs_diff(lindblad_rhs(rho.matrix(), Hamiltonian(1), dephase), dissipator_phase(rho.matrix(), 0.5)) ==
          0.0);

    const NoiseModel depol = NoiseModel::single({{0.1, 0.2, 0.3}, 0.0, 0.0});
    const Hamiltonian h(1, {{0.4, "X"}, {-1.1, "Y"}, {0.9, "Z"}});
    CHECK(lindblad_rhs(DensityMatrix::maximally_mixed(1).matrix(), h, depol).max_abs() < 1e-16);

    CounterRng rng(10);
    for (int t = 0; t < 50; ++t) {
        const int n = 1 + t % 3;
        const Matrix rho_r = random_density(rng, n).matrix();
        const Matrix out = lindblad_rhs(rho_r, Hamiltonian::precession(n, rng.uniform(0.0, 3.0)), random_noise(rng, n));
        CHECK(out.is_hermitian(1e-12));
        CHECK(abs(out.trace()) <= 1e-12);
    }
}

namespace {

struct DecayErrors {
    double dephasing, depolarizing, amplitude;
};

// Relative errors of the three single-channel decays against their closed forms.
DecayErrors decay_errors(double dt) {
    const Hamiltonian h = Hamiltonian::precession(1);
    DecayErrors e{};
    {
        const double gp = 0.5, t = 1.0;
        const auto sol = integrate_master(plus(), h, NoiseModel::single({{}, 0.0, gp}), t, dt);
        const double ratio = abs(sol.states.back()(0, 1)) / abs(plus()(0, 1));
        e.dephasing = std::abs(ratio - std::exp(-2.0 * gp * t)) / std::exp(-2.0 * gp * t);
    }
    {
        const double g = 0.1, t = 1.0;
        const DensityMatrix rho0 = pure_density(StateVector({std::cos(0.3), Complex{0.0, std::sin(0.3)}}));
        const auto sol = integrate_master(rho0, h, NoiseModel::single({{g, g, g}, 0.0, 0.0}), t, dt);
        const auto r0 = bloch_vector(rho0), r1 = bloch_vector(sol.states.back());
        const double ratio = std::hypot(r1[0], r1[1], r1[2]) / std::hypot(r0[0], r0[1], r0[2]);
        e.depolarizing = std::abs(ratio - std::exp(-4.0 * g * t)) / std::exp(-4.0 * g * t);
    }
    {
        const double ga = 0.2, t = 2.0;
        const auto sol = integrate_master(ket1(), h, NoiseModel::single({{}, ga, 0.0}), t, dt);
        e.amplitude = std::abs(sol.states.back()(1, 1).re - std::exp(-ga * t)) / std::exp(-ga * t);
    }
    return e;
}

}  // namespace

TEST_CASE("integrate_master reproduces analytic decays") {
    const DecayErrors e = decay_errors(1e-3);
    CHECK(e.dephasing <= 1e-6);
    CHECK(e.depolarizing <= 1e-6);
    CHECK(e.amplitude <= 1e-6);
    CHECK(std::exp(-0.4) == doctest::Approx(0.670320).epsilon(1e-6));
}

TEST_CASE("integrate_master converges at fourth order") {
    // Coarse steps keep the error above round-off so the ratio is measurable.
    const DecayErrors coarse = decay_errors(0.2);
    const DecayErrors fine = decay_errors(0.1);
    CHECK(coarse.dephasing / fine.dephasing >= 12.0);
    CHECK(coarse.depolarizing / fine.depolarizing >= 12.0);
    CHECK(coarse.amplitude / fine.amplitude >= 12.0);
}

TEST_CASE("integrate_master preserves trace and positivity") {
    CounterRng rng(31);
    for (int t = 0; t < 4; ++t) {
        const int n = 1 + t % 2;
        const DensityMatrix rho0 = pure_density(random_state(rng, n));
        const auto sol =
            integrate_master(rho0, Hamiltonian::precession(n), random_noise(rng, n), 5.0, 1e-3, 250);
        CHECK(sol.states.size() == 21);
        CHECK(sol.times.back() == doctest::Approx(5.0));
        for (const auto& s : sol.states) {
            CHECK(std::abs(s.matrix().trace().re - 1.0) <= 1e-9);
            CHECK(hermitian_eigenvalues(s.matrix()).front() >= -1e-7);
        }
    }
}

TEST_CASE("integrate_master argument checks and CSV export") {
    const Hamiltonian h(1);
    CHECK_THROWS_AS(integrate_master(plus(), h, NoiseModel(1), 1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(integrate_master(plus(), h, NoiseModel(1), 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(integrate_master(plus(), h, NoiseModel(1), 0.0, 1e-3), std::invalid_argument);

    const auto sol = integrate_master(plus(), h, NoiseModel::single({{}, 0.0, 0.5}), 0.01, 1e-3);
    const auto path = std::filesystem::temp_directory_path() / "qdiff_master_test.csv";
    write_master_csv(path, sol);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "time,re00,im00,re01,im01,re10,im10,re11,im11");
    int rows = 0;
    for (std::string line; std::getline(in, line);) ++rows;
    CHECK(rows == 11);
    std::filesystem::remove(path);
}
