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

// Random bipartite states, partial-transpose labels and ensemble statistics.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "npt/linalg.hpp"
#include "npt/rng.hpp"

namespace npt {

inline constexpr double kDefaultCutoff = 1e-8;
inline constexpr double kStateTolerance = 1e-10;

/// Number of partial-transpose eigenvalues below -cutoff.
struct NptLabel {
    int xi = 0;

    auto operator<=>(const NptLabel &) const = default;
};

/// Upper bound (m-1)(n-1) on the number of negative partial-transpose eigenvalues.
constexpr int max_negative_eigenvalues(const BipartiteDims &dims) {
    return static_cast<int>((dims.m - 1) * (dims.n - 1));
}

class DensityMatrix {
public:
    /// Validates Hermiticity, unit trace and positivity within kStateTolerance.
    explicit DensityMatrix(ComplexMatrix mat, BipartiteDims dims = {});

    /// Skips validation; for generators whose construction guarantees a state.
    static DensityMatrix trusted(ComplexMatrix mat, BipartiteDims dims = {});

    const ComplexMatrix &mat() const { return mat_; }
    const BipartiteDims &dims() const { return dims_; }
    double purity() const;

private:
    struct Unchecked {};
    DensityMatrix(ComplexMatrix mat, BipartiteDims dims, Unchecked) : mat_(std::move(mat)), dims_(dims) {}

    ComplexMatrix mat_;
    BipartiteDims dims_;
};

enum class EnsembleKind { haar_pure, mixture, hilbert_schmidt, bures, product, mixture_uniform };

/// "haar-pure", "mixture", "hs", "bures", "product", "mixture-uniform".
std::string ensemble_name(EnsembleKind kind);
EnsembleKind parse_ensemble(const std::string &name);

struct EnsembleSpec {
    EnsembleKind kind = EnsembleKind::hilbert_schmidt;
    std::size_t mixture_n = 1;  // terms for `mixture`; upper bound of the uniform range for `mixture_uniform`
    std::uint64_t seed = 0;
    double cutoff = kDefaultCutoff;
    BipartiteDims dims{};
};

void validate(const EnsembleSpec &spec);

struct LabeledState {
    DensityMatrix rho;
    NptLabel label;
    EnsembleSpec spec;
    std::uint64_t index = 0;
};

// Samplers. All take the caller's stream and draw from it in a fixed order.

/// Haar-random pure state vector (normalized complex Gaussian).
ComplexVector haar_vector(std::size_t d, CounterRng &rng);

/// Haar unitary from QR of a Ginibre matrix with the R diagonal phases removed.
ComplexMatrix haar_unitary(std::size_t d, CounterRng &rng);

/// d x d matrix with i.i.d. standard normal real and imaginary parts.
ComplexMatrix ginibre(std::size_t d, CounterRng &rng);

DensityMatrix haar_pure(const BipartiteDims &dims, CounterRng &rng);
DensityMatrix mixture_state(std::size_t n, CounterRng &rng, const BipartiteDims &dims = {});
DensityMatrix hilbert_schmidt_random(CounterRng &rng, const BipartiteDims &dims = {});
DensityMatrix bures_random(CounterRng &rng, const BipartiteDims &dims = {});
DensityMatrix product_random(CounterRng &rng, const BipartiteDims &dims = {});

/// Sample `index` of the ensemble, drawn from stream (spec.seed, index).
DensityMatrix sample_state(const EnsembleSpec &spec, std::uint64_t index);

/// Spectrum of the partial transpose (side A), ascending.
RealVector pt_spectrum(const DensityMatrix &rho);

NptLabel pt_negative_count(const DensityMatrix &rho, double cutoff = kDefaultCutoff);
NptLabel count_below(const RealVector &ascending_spectrum, double cutoff);

LabeledState make_labeled(const EnsembleSpec &spec, std::uint64_t index);

// Two-term mixture alpha |psi><psi| + (1 - alpha) |phi><phi| of Haar pure states.

struct TransitionSample {
    NptLabel label;
    std::optional<double> second_negative;  // second-smallest PT eigenvalue when it is < 0
};

TransitionSample transition_sample(double alpha, CounterRng &rng, double cutoff = kDefaultCutoff);

struct TransitionRow {
    double alpha = 0.0;
    std::array<double, 4> p{};   // P(xi = 0..3)
    std::array<double, 4> se{};  // binomial standard errors
    double mean_second = 0.0;    // mean second negative eigenvalue over samples where it exists
    double std_second = 0.0;
    std::size_t n_second = 0;

    bool operator==(const TransitionRow &) const = default;
};

/// Every grid point reuses the same (psi, phi) pairs: sample j comes from
/// stream (seed, j), so the curve is smooth in alpha.
std::vector<TransitionRow> transition_sweep(const std::vector<double> &alpha_grid, std::size_t samples_per_point,
                                            double cutoff, std::uint64_t seed, std::size_t workers = 0);

/// 200 points between 0.5 and 1.
std::vector<double> default_transition_grid();

/// Locates alpha where P(xi=1) = P(xi=2) by bisection on log(1 - alpha)
/// over a common sample set. Returns 1 - alpha.
double transition_crossing(std::size_t samples, double cutoff, std::uint64_t seed, std::size_t workers = 0);

struct EnsembleStats {
    std::size_t n = 0;
    std::vector<std::size_t> counts;  // counts[xi], length (m-1)(n-1)+2 so overflow is visible
    std::size_t above_bound = 0;      // states with xi > (m-1)(n-1)

    double probability(int xi) const;
    double standard_error(int xi) const;
};

EnsembleStats ensemble_stats(const EnsembleSpec &spec, std::size_t n, std::size_t workers = 0);

/// Source of candidate states for balanced datasets.
struct GeneratorPolicy {
    EnsembleKind kind = EnsembleKind::hilbert_schmidt;
    std::size_t mixture_max = 15;  // mixture_uniform: n ~ U{1..mixture_max}

    static GeneratorPolicy hilbert_schmidt() { return {}; }
    static GeneratorPolicy mixture_uniform(std::size_t max_terms = 15) {
        return {EnsembleKind::mixture_uniform, max_terms};
    }
};

inline constexpr std::uint64_t kDefaultAttemptBudget = 10'000'000;

struct BalancedDataset {
    std::vector<LabeledState> states;         // in draw order
    std::uint64_t draws = 0;                  // candidates labeled in total
    std::array<std::uint64_t, 4> filled_at{};  // draws needed to fill each class (0 if not requested)
};

/// Rejection sampling until every requested class holds per_class states.
/// Throws UnreachableClassError when a class still short of its quota sees
/// `attempt_budget` consecutive draws without an acceptance.
BalancedDataset balanced_dataset(const std::set<int> &classes, std::size_t per_class, const GeneratorPolicy &policy,
                                 std::uint64_t seed, double cutoff = kDefaultCutoff,
                                 std::uint64_t attempt_budget = kDefaultAttemptBudget, std::size_t workers = 0);

// Dataset files.

/// "index,xi,re_0_0,im_0_0,...,re_7_7,im_7_7" then one row per state.
void write_dataset_csv(std::ostream &out, const std::vector<LabeledState> &states);
std::vector<LabeledState> read_dataset_csv(std::istream &in, const BipartiteDims &dims = {},
                                           double cutoff = kDefaultCutoff);

/// Concatenated PTCM blocks, one per state.
void write_dataset_ptcm(std::ostream &out, const std::vector<LabeledState> &states);
std::vector<ComplexMatrix> read_dataset_ptcm(std::istream &in, std::size_t count);

/// Fixed formatting shared by all CSV writers; round-trips doubles exactly.
std::string format_real(double x);

}  // namespace npt
