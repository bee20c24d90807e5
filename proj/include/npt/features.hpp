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

// Fixed measurement features: the d=4 SIC-POVM, the two-qubit singlet
// projector, the two-copy operator rho_T and collective-measurement witness
// probabilities P_xy.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "npt/linalg.hpp"
#include "npt/states.hpp"

namespace npt {

inline constexpr double kSicTolerance = 1e-9;
inline constexpr double kDegenerateDenominator = 1e-14;
inline constexpr std::uint64_t kSicSeed = 0x51C0F1D;

/// Weyl-Heisenberg SIC in C^4: vectors[4p + q] = X^p Z^q |fiducial>.
struct SicPovm16 {
    std::array<Eigen::Vector4cd, 16> vectors;
};

/// Runs Levenberg-Marquardt on the fiducial overlap residuals from seeded
/// random starts. Throws NumericalError if no start converges.
SicPovm16 build_sic_povm_d4(std::uint64_t seed = kSicSeed);

/// Process-wide copy of build_sic_povm_d4(), verified on first use.
const SicPovm16 &sic_povm_d4();

/// Throws NumericalError unless unit norms, pairwise overlaps 1/5 and
/// (1/4) sum |psi_i><psi_i| = I all hold within `tol`.
void verify_sic(const SicPovm16 &sic, double tol = kSicTolerance);

/// Largest deviation of |<psi_i|psi_j>|^2 from 1/5 over the 120 pairs.
double sic_overlap_error(const SicPovm16 &sic);
/// Max-norm of (1/4) sum_i |psi_i><psi_i| - I.
double sic_frame_error(const SicPovm16 &sic);

/// 16-hex-digit FNV-1a digest of the vector coordinates.
std::string povm_hash(const SicPovm16 &sic);

/// JSON cache {"vectors": [[re, im] x 4] x 16}. load_or_build_sic reads the
/// file when present (and verifies it), otherwise builds and writes it.
void save_sic(const std::filesystem::path &path, const SicPovm16 &sic);
SicPovm16 load_sic(const std::filesystem::path &path);
SicPovm16 load_or_build_sic(const std::filesystem::path &path);

/// Projector onto (|01> - |10>)/sqrt(2).
ComplexMatrix bell_singlet_projector();

enum class SwapConvention { virtual_swap, identity };

std::string swap_convention_name(SwapConvention c);
SwapConvention parse_swap_convention(const std::string &name);

/// 8x8 operator S. virtual_swap writes C^4 = C^2 (x) C^2 and exchanges qubit A
/// with the first (slow) virtual qubit of B: |i>|b1 b2> -> |b1>|i b2>.
ComplexMatrix swap_operator(SwapConvention c);

/// Pairs (x, y) of SIC indices, zero-based.
struct CmwConfig {
    std::size_t k = 0;
    std::vector<std::pair<int, int>> pairs;
};

/// Supported sizes: 1, 8, 16, 32, 64, 136. Each list extends the previous one.
CmwConfig cmw_config(std::size_t k);
bool is_supported_k(std::size_t k);

/// (S^T rho S) (x) rho in the natural (A1, B1, A2, B2) ordering.
ComplexMatrix rho_T(const DensityMatrix &rho, SwapConvention c = SwapConvention::virtual_swap);

struct FeatureVector {
    RealVector values;
    std::vector<bool> mask;  // true where the denominator was degenerate (value forced to 0)
    NptLabel label;
};

/// P_xy = Tr[rho_T (Pi_x (x) Pi_Bell (x) Pi_y)] / Tr[rho_T (Pi_x (x) I (x) Pi_y)].
///
/// Evaluated factor by factor: with sigma = S^T rho S, project each copy's
/// ququart onto psi_x (resp. psi_y) to get 2x2 qubit blocks and contract them
/// with the singlet. Never forms the 64x64 operator.
FeatureVector cmw_features(const DensityMatrix &rho, const CmwConfig &config, const SicPovm16 &sic,
                           SwapConvention c = SwapConvention::virtual_swap);

/// Same quantity from the explicit 64x64 rho_T, reordered to (B1, A1 A2, B2)
/// with permute_factors. Slow; used to cross-check cmw_features.
FeatureVector cmw_features_reference(const DensityMatrix &rho, const CmwConfig &config, const SicPovm16 &sic,
                                     SwapConvention c = SwapConvention::virtual_swap);

struct FeatureTable {
    std::vector<std::uint64_t> index;
    std::vector<int> labels;
    RealMatrix values;  // one row per state
    std::vector<std::vector<bool>> mask;

    std::size_t size() const { return labels.size(); }
    std::size_t k() const { return static_cast<std::size_t>(values.cols()); }
};

FeatureTable cmw_feature_table(const std::vector<LabeledState> &states, const CmwConfig &config,
                               const SicPovm16 &sic, SwapConvention c = SwapConvention::virtual_swap,
                               std::size_t workers = 0);

struct FeatureSidecar {
    std::size_t k = 0;
    std::string swap_convention;
    std::string povm_hash;
    std::string kind = "cmw";  // "cmw" or "learned"
    std::size_t copies = 1;
};

/// "index,xi,f_0,...,f_{k-1},mask"; mask is a string of k '0'/'1' flags.
void write_feature_csv(std::ostream &out, const FeatureTable &table);
FeatureTable read_feature_csv(std::istream &in);

void write_feature_sidecar(std::ostream &out, const FeatureSidecar &sidecar);
FeatureSidecar read_feature_sidecar(std::istream &in);

}  // namespace npt
