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

#include "qdiff/qstate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace qdiff {

double abs(const Complex& z) { return std::hypot(z.re, z.im); }

Complex cexp(const Complex& z) {
    const double m = std::exp(z.re);
    return {m * std::cos(z.im), m * std::sin(z.im)};
}

// ---------------------------------------------------------------------------
// Matrix

Matrix::Matrix(std::size_t dim, std::string label)
    : dim_(dim), data_(dim * dim), label_(std::move(label)) {}

Matrix::Matrix(std::size_t dim, std::vector<Complex> entries, std::string label)
    : dim_(dim), data_(std::move(entries)), label_(std::move(label)) {
    if (data_.size() != dim_ * dim_) {
        throw DimensionError("Matrix: expected " + std::to_string(dim_ * dim_) + " entries, got " +
                             std::to_string(data_.size()));
    }
}

Matrix Matrix::identity(std::size_t dim) {
    Matrix m(dim, "I");
    for (std::size_t k = 0; k < dim; ++k) m(k, k) = 1.0;
    return m;
}

Matrix Matrix::adjoint() const {
    Matrix out(dim_);
    for (std::size_t r = 0; r < dim_; ++r)
        for (std::size_t c = 0; c < dim_; ++c) out(c, r) = conj((*this)(r, c));
    return out;
}

Complex Matrix::trace() const {
    Complex t;
    for (std::size_t k = 0; k < dim_; ++k) t += (*this)(k, k);
    return t;
}

bool Matrix::is_hermitian(double tol) const {
    for (std::size_t r = 0; r < dim_; ++r)
        for (std::size_t c = r; c < dim_; ++c)
            if (abs((*this)(r, c) - conj((*this)(c, r))) > tol) return false;
    return true;
}

double Matrix::max_abs() const {
    double m = 0.0;
    for (const auto& z : data_) m = std::max(m, abs(z));
    return m;
}

Matrix& Matrix::operator+=(const Matrix& o) {
    if (o.dim_ != dim_) throw DimensionError("Matrix +: dimension mismatch");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    label_.clear();
    return *this;
}

Matrix& Matrix::operator-=(const Matrix& o) {
    if (o.dim_ != dim_) throw DimensionError("Matrix -: dimension mismatch");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    label_.clear();
    return *this;
}

Matrix& Matrix::operator*=(const Complex& s) {
    for (auto& z : data_) z *= s;
    label_.clear();
    return *this;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.dim_ != b.dim_) throw DimensionError("Matrix *: dimension mismatch");
    const std::size_t n = a.dim_;
    Matrix out(n);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t k = 0; k < n; ++k) {
            const Complex ark = a(r, k);
            if (ark.re == 0.0 && ark.im == 0.0) continue;
            for (std::size_t c = 0; c < n; ++c) out(r, c) += ark * b(k, c);
        }
    return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (a.dim() != b.dim()) throw DimensionError("max_abs_diff: dimension mismatch");
    double m = 0.0;
    for (std::size_t k = 0; k < a.entries().size(); ++k)
        m = std::max(m, abs(a.entries()[k] - b.entries()[k]));
    return m;
}

Matrix kron(const Matrix& a, const Matrix& b) {
    const std::size_t na = a.dim(), nb = b.dim();
    Matrix out(na * nb);
    for (std::size_t ra = 0; ra < na; ++ra)
        for (std::size_t ca = 0; ca < na; ++ca)
            for (std::size_t rb = 0; rb < nb; ++rb)
                for (std::size_t cb = 0; cb < nb; ++cb)
                    out(ra * nb + rb, ca * nb + cb) = a(ra, ca) * b(rb, cb);
    return out;
}

CVector apply(const Matrix& m, std::span<const Complex> v) {
    if (v.size() != m.dim()) throw DimensionError("apply: dimension mismatch");
    CVector out(m.dim());
    for (std::size_t r = 0; r < m.dim(); ++r) {
        Complex acc;
        for (std::size_t c = 0; c < m.dim(); ++c) acc += m(r, c) * v[c];
        out[r] = acc;
    }
    return out;
}

Matrix outer(std::span<const Complex> a, std::span<const Complex> b) {
    if (a.size() != b.size()) throw DimensionError("outer: dimension mismatch");
    Matrix out(a.size());
    for (std::size_t r = 0; r < a.size(); ++r)
        for (std::size_t c = 0; c < b.size(); ++c) out(r, c) = a[r] * conj(b[c]);
    return out;
}

Complex inner(std::span<const Complex> a, std::span<const Complex> b) {
    if (a.size() != b.size()) throw DimensionError("inner: dimension mismatch");
    Complex acc;
    for (std::size_t k = 0; k < a.size(); ++k) acc += conj(a[k]) * b[k];
    return acc;
}

double norm(std::span<const Complex> v) {
    double s = 0.0;
    for (const auto& z : v) s += abs2(z);
    return std::sqrt(s);
}

Matrix commutator(const Matrix& a, const Matrix& b) {
    if (a.dim() != b.dim()) throw DimensionError("commutator: dimension mismatch");
    return a * b - b * a;
}

Matrix anticommutator(const Matrix& a, const Matrix& b) {
    if (a.dim() != b.dim()) throw DimensionError("anticommutator: dimension mismatch");
    return a * b + b * a;
}

Matrix pauli_x() { return Matrix(2, {0.0, 1.0, 1.0, 0.0}, "X"); }
Matrix pauli_y() { return Matrix(2, {0.0, Complex{0, -1}, Complex{0, 1}, 0.0}, "Y"); }
Matrix pauli_z() { return Matrix(2, {1.0, 0.0, 0.0, -1.0}, "Z"); }
Matrix sigma_plus() { return Matrix(2, {0.0, 0.0, 1.0, 0.0}, "sigma+"); }
Matrix sigma_minus() { return Matrix(2, {0.0, 1.0, 0.0, 0.0}, "sigma-"); }

int qubits_for_dim(std::size_t dim) {
    switch (dim) {
        case 2: return 1;
        case 4: return 2;
        case 8: return 3;
        default:
            throw DimensionError("dimension " + std::to_string(dim) +
                                 " is not 2^n for 1 <= n <= " + std::to_string(kMaxQubits));
    }
}

Matrix lift(const Matrix& single, int qubit, int qubits) {
    if (single.dim() != 2) throw DimensionError("lift: operator must be single-qubit");
    if (qubits < 1 || qubits > kMaxQubits || qubit < 0 || qubit >= qubits)
        throw DimensionError("lift: qubit " + std::to_string(qubit) + " out of range for " +
                             std::to_string(qubits) + " qubits");
    Matrix out = qubit == 0 ? single : Matrix::identity(2);
    for (int q = 1; q < qubits; ++q) out = kron(out, q == qubit ? single : Matrix::identity(2));
    if (!single.label().empty()) out.set_label(single.label() + "_" + std::to_string(qubit));
    return out;
}

Matrix expm(const Matrix& a) {
    double norm1 = 0.0;
    for (std::size_t c = 0; c < a.dim(); ++c) {
        double col = 0.0;
        for (std::size_t r = 0; r < a.dim(); ++r) col += abs(a(r, c));
        norm1 = std::max(norm1, col);
    }
    int squarings = 0;
    if (norm1 > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm1 / 0.5)));
    const Matrix scaled = a * Complex{std::ldexp(1.0, -squarings)};

    Matrix result = Matrix::identity(a.dim());
    Matrix term = Matrix::identity(a.dim());
    for (int k = 1; k <= 24; ++k) {
        term = (term * scaled) * Complex{1.0 / k};
        result += term;
        if (term.max_abs() < 1e-18) break;
    }
    for (int s = 0; s < squarings; ++s) result = result * result;
    return result;
}

HermitianEigen hermitian_eigen(const Matrix& h, double tol, int max_sweeps) {
    const std::size_t d = h.dim();
    const std::size_t n = 2 * d;
    std::vector<double> a(n * n, 0.0), v(n * n, 0.0);
    auto A = [&](std::size_t r, std::size_t c) -> double& { return a[r * n + c]; };
    auto V = [&](std::size_t r, std::size_t c) -> double& { return v[r * n + c]; };
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c = 0; c < d; ++c) {
            // Symmetrize so that tiny anti-Hermitian residue cannot stall the sweep.
            const Complex z = (h(r, c) + conj(h(c, r))) * 0.5;
            A(r, c) = z.re;
            A(r + d, c + d) = z.re;
            A(r, c + d) = -z.im;
            A(r + d, c) = z.im;
        }
    for (std::size_t k = 0; k < n; ++k) V(k, k) = 1.0;

    double scale = 0.0;
    for (double x : a) scale += x * x;
    scale = std::max(1.0, std::sqrt(scale));

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += A(p, q) * A(p, q);
        if (std::sqrt(off) <= tol * scale) break;

        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = A(p, q);
                if (std::abs(apq) < 1e-300) continue;
                const double theta = (A(q, q) - A(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = A(k, p), akq = A(k, q);
                    A(k, p) = c * akp - s * akq;
                    A(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = A(p, k), aqk = A(q, k);
                    A(p, k) = c * apk - s * aqk;
                    A(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = V(k, p), vkq = V(k, q);
                    V(k, p) = c * vkp - s * vkq;
                    V(k, q) = s * vkp + c * vkq;
                }
            }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return A(x, x) < A(y, y); });

    // Every eigenvalue of h appears twice in the real form; the columns of one
    // pair map to z and i*z. Keep one complex vector per eigenvalue by
    // Gram-Schmidt in the complex inner product.
    HermitianEigen out;
    for (std::size_t idx : order) {
        if (out.values.size() == d) break;
        CVector z(d);
        for (std::size_t k = 0; k < d; ++k) z[k] = {V(k, idx), V(k + d, idx)};
        for (const auto& w : out.vectors) {
            const Complex proj = inner(w, z);
            for (std::size_t k = 0; k < d; ++k) z[k] -= proj * w[k];
        }
        const double nz = norm(z);
        if (nz < 0.5) continue;
        for (auto& x : z) x = x / nz;
        out.values.push_back(A(idx, idx));
        out.vectors.push_back(std::move(z));
    }
    return out;
}

std::vector<double> hermitian_eigenvalues(const Matrix& h) { return hermitian_eigen(h).values; }

// ---------------------------------------------------------------------------
// States

StateVector::StateVector(CVector amplitudes, bool normalized)
    : amps_(std::move(amplitudes)), qubits_(qubits_for_dim(amps_.size())), normalized_(normalized) {
    if (normalized_ && std::abs(norm() - 1.0) > kNormTolerance) {
        std::ostringstream msg;
        msg << "StateVector: norm " << norm() << " differs from 1";
        throw std::invalid_argument(msg.str());
    }
}

StateVector StateVector::basis(int qubits, std::size_t index) {
    if (qubits < 1 || qubits > kMaxQubits) throw DimensionError("basis: qubit count out of range");
    const std::size_t dim = std::size_t{1} << qubits;
    if (index >= dim) throw DimensionError("basis: index out of range");
    CVector amps(dim);
    amps[index] = 1.0;
    return StateVector(std::move(amps));
}

StateVector StateVector::renormalized() const {
    const double n = norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw NumericalError("renormalized: zero or non-finite norm");
    CVector out(amps_);
    for (auto& z : out) z = z / n;
    return StateVector(std::move(out), true);
}

std::string physicality_violation(const Matrix& rho, double tol, double psd_tol) {
    std::ostringstream msg;
    if (!rho.is_hermitian(tol)) msg << "not Hermitian; ";
    const Complex tr = rho.trace();
    if (std::abs(tr.re - 1.0) > tol || std::abs(tr.im) > tol) msg << "trace " << tr.re << "+" << tr.im << "i; ";
    if (msg.str().empty()) {
        const double lo = hermitian_eigenvalues(rho).front();
        if (lo < -psd_tol) msg << "negative eigenvalue " << lo << "; ";
    }
    return msg.str();
}

DensityMatrix::DensityMatrix(Matrix rho, double tol) : rho_(std::move(rho)) {
    qubits_for_dim(rho_.dim());
    const std::string why = physicality_violation(rho_, tol);
    if (!why.empty()) throw std::invalid_argument("DensityMatrix: " + why);
}

DensityMatrix DensityMatrix::maximally_mixed(int qubits) {
    const std::size_t dim = std::size_t{1} << qubits;
    return DensityMatrix(Matrix::identity(dim) * Complex{1.0 / static_cast<double>(dim)});
}

double DensityMatrix::purity() const { return (rho_ * rho_).trace().re; }

DensityMatrix pure_density(const StateVector& psi) {
    if (std::abs(psi.norm() - 1.0) > kNormTolerance)
        throw std::invalid_argument("pure_density: state is not normalized");
    return DensityMatrix(outer(psi.amplitudes(), psi.amplitudes()));
}

double fidelity_pure(const StateVector& psi, const StateVector& phi) {
    if (psi.dim() != phi.dim()) throw DimensionError("fidelity_pure: dimension mismatch");
    if (std::abs(psi.norm() - 1.0) > kNormTolerance || std::abs(phi.norm() - 1.0) > kNormTolerance)
        throw std::invalid_argument("fidelity_pure: states must be normalized");
    return std::clamp(abs2(inner(psi.amplitudes(), phi.amplitudes())), 0.0, 1.0);
}

double trace_distance(const DensityMatrix& rho, const DensityMatrix& sigma) {
    if (rho.dim() != sigma.dim()) throw DimensionError("trace_distance: dimension mismatch");
    // Order the operands canonically so the result is bitwise symmetric.
    const auto key = [](const Complex& z) { return std::pair{z.re, z.im}; };
    const bool swap = std::lexicographical_compare(
        rho.matrix().entries().begin(), rho.matrix().entries().end(), sigma.matrix().entries().begin(),
        sigma.matrix().entries().end(), [&](const Complex& x, const Complex& y) { return key(x) < key(y); });
    const Matrix diff = swap ? sigma.matrix() - rho.matrix() : rho.matrix() - sigma.matrix();
    std::vector<double> mags = hermitian_eigenvalues(diff);
    for (double& ev : mags) ev = std::abs(ev);
    std::sort(mags.begin(), mags.end());
    double sum = 0.0;
    for (double m : mags) sum += m;
    return std::clamp(0.5 * sum, 0.0, 1.0);
}

std::array<double, 3> bloch_vector(const DensityMatrix& rho) {
    if (rho.dim() != 2) throw DimensionError("bloch_vector: single-qubit states only");
    return {(rho.matrix() * pauli_x()).trace().re, (rho.matrix() * pauli_y()).trace().re,
            (rho.matrix() * pauli_z()).trace().re};
}

RealVector real_embed(const StateVector& psi) {
    const std::size_t d = psi.dim();
    RealVector x(2 * d);
    for (std::size_t k = 0; k < d; ++k) {
        x[k] = psi[k].re;
        x[k + d] = psi[k].im;
    }
    return x;
}

StateVector real_unembed(std::span<const double> coords) {
    if (coords.size() % 2 != 0) throw DimensionError("real_unembed: odd length");
    const std::size_t d = coords.size() / 2;
    CVector amps(d);
    for (std::size_t k = 0; k < d; ++k) amps[k] = {coords[k], coords[k + d]};
    return StateVector(std::move(amps), false);
}

}  // namespace qdiff
