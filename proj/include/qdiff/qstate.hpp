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

// Dense complex linear algebra and pure/mixed quantum-state primitives for
// registers of 1 to 3 qubits. Qubit 0 is the most significant tensor factor.

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "qdiff/errors.hpp"

namespace qdiff {

inline constexpr int kMaxQubits = 3;

struct Complex {
    double re = 0.0;
    double im = 0.0;

    constexpr Complex() = default;
    constexpr Complex(double r, double i = 0.0) : re(r), im(i) {}

    constexpr Complex& operator+=(const Complex& o) { re += o.re; im += o.im; return *this; }
    constexpr Complex& operator-=(const Complex& o) { re -= o.re; im -= o.im; return *this; }
    constexpr Complex& operator*=(const Complex& o) {
        const double r = re * o.re - im * o.im;
        im = re * o.im + im * o.re;
        re = r;
        return *this;
    }
    constexpr Complex& operator*=(double s) { re *= s; im *= s; return *this; }

    friend constexpr Complex operator+(Complex a, const Complex& b) { return a += b; }
    friend constexpr Complex operator-(Complex a, const Complex& b) { return a -= b; }
    friend constexpr Complex operator*(Complex a, const Complex& b) { return a *= b; }
    friend constexpr Complex operator*(Complex a, double s) { return a *= s; }
    friend constexpr Complex operator*(double s, Complex a) { return a *= s; }
    friend constexpr Complex operator/(const Complex& a, double s) { return {a.re / s, a.im / s}; }
    friend constexpr Complex operator-(const Complex& a) { return {-a.re, -a.im}; }
    friend constexpr bool operator==(const Complex&, const Complex&) = default;
};

inline constexpr Complex kI{0.0, 1.0};

constexpr Complex conj(const Complex& z) { return {z.re, -z.im}; }
constexpr double abs2(const Complex& z) { return z.re * z.re + z.im * z.im; }
double abs(const Complex& z);
Complex cexp(const Complex& z);

using CVector = std::vector<Complex>;
using RealVector = std::vector<double>;

/// Square dense complex matrix, row-major.
class Matrix {
public:
    Matrix() = default;
    explicit Matrix(std::size_t dim, std::string label = {});
    Matrix(std::size_t dim, std::vector<Complex> entries, std::string label = {});

    static Matrix identity(std::size_t dim);
    static Matrix zero(std::size_t dim) { return Matrix(dim); }

    std::size_t dim() const { return dim_; }
    const std::string& label() const { return label_; }
    Matrix& set_label(std::string label) { label_ = std::move(label); return *this; }

    Complex& operator()(std::size_t r, std::size_t c) { return data_[r * dim_ + c]; }
    const Complex& operator()(std::size_t r, std::size_t c) const { return data_[r * dim_ + c]; }
    std::span<const Complex> entries() const { return data_; }

    Matrix adjoint() const;
    Complex trace() const;
    bool is_hermitian(double tol) const;
    double max_abs() const;

    Matrix& operator+=(const Matrix& o);
    Matrix& operator-=(const Matrix& o);
    Matrix& operator*=(const Complex& s);

    friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
    friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
    friend Matrix operator*(Matrix a, const Complex& s) { return a *= s; }
    friend Matrix operator*(const Complex& s, Matrix a) { return a *= s; }
    friend Matrix operator*(const Matrix& a, const Matrix& b);

private:
    std::size_t dim_ = 0;
    std::vector<Complex> data_;
    std::string label_;
};

/// Largest entrywise modulus of a - b.
double max_abs_diff(const Matrix& a, const Matrix& b);

Matrix kron(const Matrix& a, const Matrix& b);
CVector apply(const Matrix& m, std::span<const Complex> v);
Matrix outer(std::span<const Complex> a, std::span<const Complex> b);  // |a><b|
Complex inner(std::span<const Complex> a, std::span<const Complex> b);  // <a|b>
double norm(std::span<const Complex> v);

Matrix commutator(const Matrix& a, const Matrix& b);
Matrix anticommutator(const Matrix& a, const Matrix& b);

Matrix pauli_x();
Matrix pauli_y();
Matrix pauli_z();
// Ladder operators with |0> as the ground state: sigma- = |0><1| lowers
// |1> to |0> and annihilates |0>. In the computational basis this is
// (X + iY)/2; the (X - iY)/2 form belongs to the opposite basis ordering.
Matrix sigma_plus();   // |1><0|
Matrix sigma_minus();  // |0><1|

/// Embeds a single-qubit operator acting on `qubit` into an n-qubit register.
Matrix lift(const Matrix& single, int qubit, int qubits);

/// Qubit count of a register of dimension dim; throws unless dim is 2, 4 or 8.
int qubits_for_dim(std::size_t dim);

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
Matrix expm(const Matrix& a);

struct HermitianEigen {
    std::vector<double> values;  // ascending
    std::vector<CVector> vectors;
};

/// Cyclic Jacobi diagonalization of a Hermitian matrix through its real
/// symmetric representation [[Re, -Im], [Im, Re]].
HermitianEigen hermitian_eigen(const Matrix& h, double tol = 1e-12, int max_sweeps = 100);
std::vector<double> hermitian_eigenvalues(const Matrix& h);

class StateVector {
public:
    StateVector() = default;
    /// Throws DimensionError unless the length is 2^n with 1 <= n <= 3, and
    /// std::invalid_argument when `normalized` is set but the norm is not 1.
    explicit StateVector(CVector amplitudes, bool normalized = true);

    static StateVector basis(int qubits, std::size_t index);

    int qubits() const { return qubits_; }
    std::size_t dim() const { return amps_.size(); }
    bool normalized() const { return normalized_; }
    const Complex& operator[](std::size_t k) const { return amps_[k]; }
    std::span<const Complex> amplitudes() const { return amps_; }
    double norm() const { return qdiff::norm(amps_); }

    /// Copy scaled to unit norm; throws NumericalError for a zero or non-finite vector.
    StateVector renormalized() const;

private:
    CVector amps_;
    int qubits_ = 0;
    bool normalized_ = false;
};

inline constexpr double kNormTolerance = 1e-10;

class DensityMatrix {
public:
    DensityMatrix() = default;
    /// Validates Hermiticity and unit trace within `tol` and eigenvalues >= -1e-8.
    explicit DensityMatrix(Matrix rho, double tol = 1e-10);

    static DensityMatrix maximally_mixed(int qubits);

    const Matrix& matrix() const { return rho_; }
    std::size_t dim() const { return rho_.dim(); }
    int qubits() const { return qubits_for_dim(rho_.dim()); }
    const Complex& operator()(std::size_t r, std::size_t c) const { return rho_(r, c); }
    double purity() const;

private:
    Matrix rho_;
};

/// Reasons a matrix fails to be a physical state; empty when it is one.
std::string physicality_violation(const Matrix& rho, double tol = 1e-10, double psd_tol = 1e-8);

DensityMatrix pure_density(const StateVector& psi);
double fidelity_pure(const StateVector& psi, const StateVector& phi);
double trace_distance(const DensityMatrix& rho, const DensityMatrix& sigma);
std::array<double, 3> bloch_vector(const DensityMatrix& rho);

/// Real parts followed by imaginary parts.
RealVector real_embed(const StateVector& psi);
StateVector real_unembed(std::span<const double> coords);

}  // namespace qdiff
