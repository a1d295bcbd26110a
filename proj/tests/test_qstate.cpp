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
#include <numbers>

#include "doctest.h"
#include "qdiff/qstate.hpp"
#include "test_support.hpp"

using namespace qdiff;
using qdiff::testing::near;
using qdiff::testing::random_density;
using qdiff::testing::random_state;

namespace {

const double kInvSqrt2 = 1.0 / std::numbers::sqrt2;

StateVector plus_state() { return StateVector({kInvSqrt2, kInvSqrt2}); }
StateVector plus_i_state() { return StateVector({kInvSqrt2, Complex{0.0, kInvSqrt2}}); }

bool is_zero(const Matrix& m, double tol = 1e-15) { return m.max_abs() <= tol; }

}  // namespace

TEST_CASE("Complex arithmetic") {
    const Complex a{1.5, -2.0}, b{-0.25, 3.0};
    const Complex p = a * b;
    CHECK(p.re == doctest::Approx(1.5 * -0.25 + 2.0 * 3.0));
    CHECK(p.im == doctest::Approx(1.5 * 3.0 + 2.0 * 0.25));
    CHECK(abs2(a) == doctest::Approx(1.5 * 1.5 + 4.0));
    CHECK(conj(a) == Complex{1.5, 2.0});
    CHECK(near(cexp({0.0, std::numbers::pi}), Complex{-1.0, 0.0}, 1e-15));
}

TEST_CASE("Pauli and ladder operator identities") {
    const Matrix I = Matrix::identity(2);
    for (const Matrix& s : {pauli_x(), pauli_y(), pauli_z()}) CHECK(max_abs_diff(s * s, I) == 0.0);
    // |0> is the ground state: sigma- |1> = |0>, sigma- |0> = 0.
    const CVector lowered = apply(sigma_minus(), StateVector::basis(1, 1).amplitudes());
    CHECK(lowered == CVector{1.0, 0.0});
    CHECK(apply(sigma_minus(), StateVector::basis(1, 0).amplitudes()) == CVector{0.0, 0.0});
    CHECK(max_abs_diff(sigma_minus(), (pauli_x() + kI * pauli_y()) * Complex{0.5}) == 0.0);
    CHECK(max_abs_diff(sigma_plus(), (pauli_x() - kI * pauli_y()) * Complex{0.5}) == 0.0);
    CHECK(max_abs_diff(sigma_plus(), sigma_minus().adjoint()) == 0.0);
    // sigma+ sigma- projects onto the excited state.
    CHECK(max_abs_diff(sigma_plus() * sigma_minus(), Matrix(2, std::vector<Complex>{0.0, 0.0, 0.0, 1.0})) == 0.0);
}

TEST_CASE("commutator") {
    CHECK(is_zero(commutator(pauli_x(), pauli_x())));
    CHECK(is_zero(commutator(Matrix::identity(2), pauli_z())));

    // [X, Y] by explicit 2x2 products: XY = diag(i, -i), YX = diag(-i, i).
    const Matrix expected(2, {Complex{0, 2}, 0.0, 0.0, Complex{0, -2}});
    CHECK(max_abs_diff(commutator(pauli_x(), pauli_y()), expected) == 0.0);
    CHECK(max_abs_diff(commutator(pauli_x(), pauli_y()), Complex{0, 2} * pauli_z()) == 0.0);

    CHECK_THROWS_AS(commutator(pauli_x(), Matrix::identity(4)), DimensionError);
}

TEST_CASE("anticommutator") {
    CHECK(is_zero(anticommutator(pauli_x(), pauli_y())));
    CHECK(max_abs_diff(anticommutator(pauli_z(), pauli_z()), Matrix::identity(2) * Complex{2.0}) == 0.0);
    // sigma+ sigma- = |0><0|, sigma- sigma+ = |1><1|.
    CHECK(max_abs_diff(anticommutator(sigma_plus(), sigma_minus()), Matrix::identity(2)) == 0.0);
    CHECK_THROWS_AS(anticommutator(pauli_x(), Matrix::identity(8)), DimensionError);
}

TEST_CASE("lift places single-qubit operators with qubit 0 most significant") {
    const Matrix z0 = lift(pauli_z(), 0, 2);
    const Matrix z1 = lift(pauli_z(), 1, 2);
    CHECK(z0(2, 2) == Complex{-1.0});
    CHECK(z0(1, 1) == Complex{1.0});
    CHECK(z1(1, 1) == Complex{-1.0});
    CHECK(z1(2, 2) == Complex{1.0});
    CHECK(lift(pauli_x(), 2, 3).dim() == 8);
    CHECK_THROWS_AS(lift(pauli_x(), 3, 3), DimensionError);
}

TEST_CASE("expm matches closed forms") {
    // exp(-i theta Z) is diagonal with phases.
    const double theta = 0.7;
    const Matrix u = expm(pauli_z() * Complex{0.0, -theta});
    CHECK(near(u(0, 0), cexp({0.0, -theta}), 1e-14));
    CHECK(near(u(1, 1), cexp({0.0, theta}), 1e-14));
    // exp(-i theta X) = cos(theta) I - i sin(theta) X, with a large argument to exercise squaring.
    const double big = 13.3;
    const Matrix v = expm(pauli_x() * Complex{0.0, -big});
    CHECK(near(v(0, 0), Complex{std::cos(big)}, 1e-12));
    CHECK(near(v(0, 1), Complex{0.0, -std::sin(big)}, 1e-12));
}

TEST_CASE("hermitian_eigen") {
    CounterRng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 1 + trial % 3;
        const DensityMatrix rho = random_density(rng, n);
        const auto eig = hermitian_eigen(rho.matrix());
        REQUIRE(eig.values.size() == rho.dim());
        double sum = 0.0;
        for (std::size_t k = 0; k < eig.values.size(); ++k) {
            sum += eig.values[k];
            const CVector hv = apply(rho.matrix(), eig.vectors[k]);
            for (std::size_t j = 0; j < hv.size(); ++j)
                CHECK(near(hv[j], eig.vectors[k][j] * eig.values[k], 1e-10));
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
    // Degenerate spectrum still yields an orthonormal basis.
    const auto eig = hermitian_eigen(Matrix::identity(4));
    for (std::size_t a = 0; a < 4; ++a)
        for (std::size_t b = 0; b < 4; ++b)
            CHECK(near(inner(eig.vectors[a], eig.vectors[b]), Complex{a == b ? 1.0 : 0.0}, 1e-12));
}

TEST_CASE("StateVector construction") {
    CHECK(StateVector::basis(3, 5).dim() == 8);
    CHECK_THROWS_AS(StateVector(CVector(3)), DimensionError);
    CHECK_THROWS_AS(StateVector(CVector(16)), DimensionError);
    CHECK_THROWS_AS(StateVector({1.0, 1.0}), std::invalid_argument);
    CHECK_NOTHROW(StateVector({1.0, 1.0}, false));
    CHECK(StateVector({3.0, Complex{0.0, 4.0}}, false).renormalized()[1] == Complex{0.0, 0.8});
    CHECK_THROWS_AS(StateVector(CVector(2), false).renormalized(), NumericalError);
}

TEST_CASE("pure_density") {
    const DensityMatrix zero = pure_density(StateVector::basis(1, 0));
    CHECK(zero(0, 0) == Complex{1.0});
    CHECK(zero(1, 1) == Complex{0.0});

    const DensityMatrix plus = pure_density(plus_state());
    for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t c = 0; c < 2; ++c) CHECK(near(plus(r, c), Complex{0.5}, 1e-15));

    // (|0> + i|1>)/sqrt2: rho_01 = a0 conj(a1) = -i/2, rho_10 = +i/2.
    const DensityMatrix pi = pure_density(plus_i_state());
    CHECK(near(pi(0, 0), Complex{0.5}, 1e-15));
    CHECK(near(pi(0, 1), Complex{0.0, -0.5}, 1e-15));
    CHECK(near(pi(1, 0), Complex{0.0, 0.5}, 1e-15));

    CHECK_THROWS_AS(pure_density(StateVector({1.0, 1.0}, false)), std::invalid_argument);

    CounterRng rng(3);
    for (int k = 0; k < 50; ++k) {
        const DensityMatrix rho = pure_density(random_state(rng, 1 + k % 3));
        CHECK(physicality_violation(rho.matrix()).empty());
        CHECK(rho.purity() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("DensityMatrix rejects non-physical matrices") {
    CHECK_THROWS_AS(DensityMatrix(Matrix::identity(2)), std::invalid_argument);
    CHECK_THROWS_AS(DensityMatrix(Matrix(2, std::vector<Complex>{1.5, 0.0, 0.0, -0.5})), std::invalid_argument);
    CHECK_THROWS_AS(DensityMatrix(Matrix(2, std::vector<Complex>{0.5, 1.0, 0.0, 0.5})), std::invalid_argument);
}

TEST_CASE("fidelity_pure") {
    const StateVector zero = StateVector::basis(1, 0);
    CHECK(fidelity_pure(zero, zero) == 1.0);
    CHECK(fidelity_pure(zero, StateVector::basis(1, 1)) == 0.0);
    CHECK(fidelity_pure(zero, plus_state()) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK_THROWS_AS(fidelity_pure(zero, StateVector::basis(2, 0)), DimensionError);

    CounterRng rng(5);
    for (int k = 0; k < 100; ++k) {
        const int n = 1 + k % 3;
        const StateVector a = random_state(rng, n), b = random_state(rng, n);
        CHECK(fidelity_pure(a, b) == fidelity_pure(b, a));
        const Complex phase = cexp({0.0, rng.uniform(0.0, 2.0 * std::numbers::pi)});
        CVector rotated(a.amplitudes().begin(), a.amplitudes().end());
        for (auto& z : rotated) z = z * phase;
        CHECK(std::abs(fidelity_pure(StateVector(rotated, false), b) - fidelity_pure(a, b)) <= 1e-12);
    }
}

TEST_CASE("trace_distance") {
    const DensityMatrix zero = pure_density(StateVector::basis(1, 0));
    const DensityMatrix one = pure_density(StateVector::basis(1, 1));
    const DensityMatrix mixed = DensityMatrix::maximally_mixed(1);
    CHECK(trace_distance(zero, zero) == doctest::Approx(0.0));
    CHECK(trace_distance(zero, one) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(trace_distance(zero, mixed) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK_THROWS_AS(trace_distance(zero, DensityMatrix::maximally_mixed(2)), DimensionError);

    CounterRng rng(7);
    for (int k = 0; k < 100; ++k) {
        const int n = 1 + k % 3;
        const DensityMatrix a = random_density(rng, n), b = random_density(rng, n), c = random_density(rng, n);
        CHECK(trace_distance(a, b) == trace_distance(b, a));
        CHECK(trace_distance(a, c) <= trace_distance(a, b) + trace_distance(b, c) + 1e-9);
    }
}

TEST_CASE("bloch_vector") {
    const auto r0 = bloch_vector(DensityMatrix::maximally_mixed(1));
    CHECK(r0[0] == 0.0);
    CHECK(r0[1] == 0.0);
    CHECK(r0[2] == 0.0);
    const auto rz = bloch_vector(pure_density(StateVector::basis(1, 0)));
    CHECK(rz[2] == doctest::Approx(1.0));
    const auto rx = bloch_vector(pure_density(plus_state()));
    CHECK(rx[0] == doctest::Approx(1.0));
    CHECK(rx[1] == doctest::Approx(0.0));
    CHECK(rx[2] == doctest::Approx(0.0));
    const auto ry = bloch_vector(pure_density(plus_i_state()));
    CHECK(ry[1] == doctest::Approx(1.0));
    CHECK_THROWS_AS(bloch_vector(DensityMatrix::maximally_mixed(2)), DimensionError);

    CounterRng rng(9);
    for (int k = 0; k < 50; ++k) {
        const auto r = bloch_vector(random_density(rng, 1));
        CHECK(std::sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2]) <= 1.0 + 1e-8);
    }
}

TEST_CASE("real embedding") {
    const RealVector e0 = real_embed(StateVector::basis(1, 0));
    CHECK(e0 == RealVector{1.0, 0.0, 0.0, 0.0});
    const RealVector ei = real_embed(plus_i_state());
    CHECK(ei == RealVector{kInvSqrt2, 0.0, 0.0, kInvSqrt2});
    CHECK_THROWS_AS(real_unembed(RealVector(6)), DimensionError);
    CHECK_THROWS_AS(real_unembed(RealVector(5)), DimensionError);

    CounterRng rng(13);
    for (int k = 0; k < 100; ++k) {
        const StateVector psi = random_state(rng, 1 + k % 3);
        const RealVector x = real_embed(psi);
        const StateVector back = real_unembed(x);
        for (std::size_t j = 0; j < psi.dim(); ++j) CHECK(back[j] == psi[j]);
        double sq = 0.0;
        for (double v : x) sq += v * v;
        CHECK(std::sqrt(sq) == doctest::Approx(psi.norm()).epsilon(1e-15));
    }
}
