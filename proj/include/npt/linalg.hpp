// Copyright 2026 The npt-learn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Dense complex kernels for small bipartite operators.
//
// Index convention (used everywhere in the library): for a bipartite space
// C^m (x) C^n the composite index of |i>|k> is i*n + k, so subsystem A is the
// slowest-varying factor. Multi-factor spaces follow the same rule with the
// first factor slowest.

#include <array>
#include <complex>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "npt/errors.hpp"

namespace npt {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

/// Real 3x15 qubit-ququart correlation matrix.
using CorrelationMatrix = Eigen::Matrix<double, 3, 15>;

struct BipartiteDims {
    std::size_t m = 2;
    std::size_t n = 4;

    std::size_t total() const { return m * n; }
    bool operator==(const BipartiteDims &) const = default;
};

/// Throws DimensionError unless m, n >= 2.
void validate(const BipartiteDims &dims);

enum class Side { A, B };

struct EigenDecomposition {
    RealVector values;      // ascending
    ComplexMatrix vectors;  // column j pairs with values[j]
};

ComplexMatrix kron(const ComplexMatrix &a, const ComplexMatrix &b);

/// Spectral decomposition of (H + H^dagger)/2. Eigenvalues ascending.
EigenDecomposition herm_eig(const ComplexMatrix &h);

/// Eigenvalues only; cheaper than herm_eig, same ordering.
RealVector herm_eigvals(const ComplexMatrix &h);

/// Number of eigenvalues of (H + H^dagger)/2 strictly below x, from a Sturm
/// sequence on the tridiagonal form (no QL iterations).
std::size_t count_eigenvalues_below(const ComplexMatrix &h, double x);

ComplexMatrix hermitian_part(const ComplexMatrix &h);
bool is_hermitian(const ComplexMatrix &h, double tol);

ComplexMatrix partial_transpose(const ComplexMatrix &rho, const BipartiteDims &dims, Side side = Side::A);
ComplexMatrix partial_trace(const ComplexMatrix &rho, const BipartiteDims &dims, Side keep);

/// Relabels tensor factors: output factor j is input factor perm[j].
/// Equivalent to P M P^T with P the permutation of the multi-index.
ComplexMatrix permute_factors(
    const ComplexMatrix &m, std::span<const std::size_t> factor_dims, std::span<const std::size_t> perm);

/// Singular values of T, descending, as square roots of the eigenvalues of T T^T.
std::array<double, 3> svd_rect(const CorrelationMatrix &t);

// PTCM block: "PTCM", u32 rows, u32 cols, u32 reserved(0), then rows*cols
// (re, im) little-endian f64 pairs in row-major order.
void write_ptcm(std::ostream &out, const ComplexMatrix &m);
ComplexMatrix read_ptcm(std::istream &in);

}  // namespace npt
