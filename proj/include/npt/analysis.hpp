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

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "npt/linalg.hpp"
#include "npt/states.hpp"

namespace npt {

// ---------------------------------------------------------------------------
// Generalized Bloch decomposition of qubit-ququart states

using Bloch4 = Eigen::Matrix<double, 15, 1>;

struct GellMannBasis {
    std::array<Eigen::Matrix2cd, 3> sigma;    // Pauli x, y, z
    std::array<Eigen::Matrix4cd, 15> lambda;  // symmetric 0..5, antisymmetric 6..11, diagonal 12..14
};

/// Generators for su(2) and su(4) with Tr(G_i G_j) = 2 delta_ij.
///
/// Index table for lambda (0-based, E_jk = |j><k|):
///   0..5   E_jk + E_kj         for (j,k) = (0,1) (0,2) (0,3) (1,2) (1,3) (2,3)
///   6..11  -i (E_jk - E_kj)    same pair order
///   12..14 sqrt(2/(l(l+1))) (sum_{j<l} E_jj - l E_ll)  for l = 1, 2, 3
const GellMannBasis &gell_mann_su4();

struct BlochDecomposition {
    Eigen::Vector3d a = Eigen::Vector3d::Zero();
    Bloch4 b = Bloch4::Zero();
    CorrelationMatrix t = CorrelationMatrix::Zero();
};

/// a_i = Tr[rho (sigma_i x I)], b_a = Tr[rho (I x Lambda_a)], T_ia = Tr[rho (sigma_i x Lambda_a)].
/// Throws DimensionError unless rho is 2 x 4.
BlochDecomposition bloch_decompose(const DensityMatrix &rho);

/// Inverse of bloch_decompose:
///   rho = (1/8) (I + sum a_i sigma_i x I) + (1/4) (sum b_a I x Lambda_a + sum T_ia sigma_i x Lambda_a).
/// The operator form skips positivity checks; the DensityMatrix form validates.
ComplexMatrix bloch_operator(const BlochDecomposition &dec);
DensityMatrix bloch_reconstruct(const BlochDecomposition &dec);

/// Tr rho^2 from the coefficients: (1 + |a|^2 + 2|b|^2 + 2|T|_F^2) / 8.
double bloch_purity(const BlochDecomposition &dec);

double frobenius_norm(const CorrelationMatrix &t);

// ---------------------------------------------------------------------------
// Correlation-matrix statistics

struct SvdScatterRow {
    std::uint64_t index = 0;
    int xi = 0;
    std::array<double, 3> s{};  // descending
};

std::vector<SvdScatterRow> svd_scatter(const std::vector<LabeledState> &states, std::size_t workers = 0);

/// "index,xi,s1,s2,s3".
void write_svd_scatter_csv(std::ostream &out, const std::vector<SvdScatterRow> &rows);

struct MomentPair {
    double mean = 0.0, std = 0.0;
};

struct MixtureProfileRow {
    std::size_t n = 0;
    int xi = -1;  // -1 pools every class
    std::size_t count = 0;
    MomentPair a2, b2, t2, purity;  // NaN when count == 0
};

/// Draws `samples_per_n` mixtures of n Haar pure states for every n and
/// reports per-class and pooled moments. Every class in `classes` appears
/// for every n, with count 0 when absent.
std::vector<MixtureProfileRow> mixture_profile(const std::vector<std::size_t> &n_values, std::size_t samples_per_n,
                                               std::uint64_t seed, const std::vector<int> &classes = {1, 2},
                                               double cutoff = kDefaultCutoff, std::size_t workers = 0);

/// "n,class,count,a2_mean,a2_std,b2_mean,b2_std,t2_mean,t2_std,purity_mean,purity_std"; class is "all" for pooled rows.
void write_mixture_profile_csv(std::ostream &out, const std::vector<MixtureProfileRow> &rows);

// ---------------------------------------------------------------------------
// Exact t-SNE

struct TsneParams {
    double perplexity = 30.0;
    std::size_t iterations = 1000;
    double learning_rate = 200.0;
    double exaggeration = 12.0;
    std::size_t exaggeration_iterations = 250;
    std::uint64_t seed = 0;
};

struct TsneResult {
    RealMatrix embedding;     // N x 2
    std::vector<double> kl;   // KL(P || Q) after every iteration (exaggerated P during the early phase)
};

/// Throws ParameterError for N > 10^4, perplexity >= N/3, or when the
/// bandwidth search cannot reach the target perplexity for some point.
/// After the early phase a step that would raise KL is retried as a damped
/// plain gradient step, so kl is non-increasing there. Starting positions
/// come from a stream keyed by the seed and the row's content, so identical
/// rows start together and stay together.
TsneResult tsne(const RealMatrix &x, const TsneParams &params = {});

/// Mean silhouette coefficient of the points carrying each label, keyed by label.
std::vector<std::pair<int, double>> silhouette_by_class(const RealMatrix &points, const std::vector<int> &labels);
double mean_silhouette(const RealMatrix &points, const std::vector<int> &labels);

/// "index,xi,x,y".
void write_tsne_csv(std::ostream &out, const std::vector<std::uint64_t> &index, const std::vector<int> &xi,
                    const RealMatrix &embedding);

// ---------------------------------------------------------------------------
// Negative eigenspace of the partial transpose

inline constexpr double kBobRankThreshold = 1e-10;

struct NegativeEigenspace {
    RealVector values;      // ascending, all < -cutoff
    ComplexMatrix vectors;  // 8 x count, orthonormal columns

    std::size_t count() const { return std::size_t(values.size()); }
    ComplexMatrix projector() const { return vectors * vectors.adjoint(); }
};

NegativeEigenspace negative_eigenspace(const DensityMatrix &rho, double cutoff = kDefaultCutoff);

struct BobSupport {
    std::size_t dim = 0;
    ComplexMatrix basis;  // n x dim orthonormal basis of U_B
};

/// Writes each |psi> = sum_i |i> |u_i> and spans all u_i; rank counts
/// singular values above kBobRankThreshold * s_max.
BobSupport bob_support(const ComplexMatrix &vectors, const BipartiteDims &dims = {});
std::size_t bob_support_dim(const ComplexMatrix &vectors, const BipartiteDims &dims = {});

struct Rank2Embedding {
    bool exists = false;
    std::size_t support_dim = 0;
    std::optional<ComplexMatrix> projector;  // rank-two projector on Bob when exists
};

Rank2Embedding rank2_embedding_exists(const DensityMatrix &rho, double cutoff = kDefaultCutoff);

/// (I x P_B) rho (I x P_B) / Tr[...] expressed in an orthonormal basis of
/// range(P_B), giving a 2 x 2 state. Throws NumericalError when the
/// projection probability is below 1e-12 and ParameterError when P_B is not
/// a rank-two projector.
DensityMatrix project_rank2(const DensityMatrix &rho, const ComplexMatrix &p_b);

}  // namespace npt
