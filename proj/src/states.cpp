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

#include "npt/states.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>

#include "npt/parallel.hpp"

namespace npt {

namespace {

ComplexMatrix projector(const ComplexVector &v) { return v * v.adjoint(); }

DensityMatrix normalized_gram(const ComplexMatrix &a, const BipartiteDims &dims) {
    ComplexMatrix rho = a * a.adjoint();
    rho /= rho.trace().real();
    return DensityMatrix::trusted(std::move(rho), dims);
}

ComplexMatrix gram_state(std::size_t d, CounterRng &rng) {
    const ComplexMatrix g = ginibre(d, rng);
    ComplexMatrix rho = g * g.adjoint();
    rho /= rho.trace().real();
    return rho;
}

}  // namespace

DensityMatrix::DensityMatrix(ComplexMatrix mat, BipartiteDims dims) : mat_(std::move(mat)), dims_(dims) {
    validate(dims_);
    const auto d = static_cast<Eigen::Index>(dims_.total());
    if (mat_.rows() != d || mat_.cols() != d) throw DimensionError("DensityMatrix: matrix size does not match dims");
    if (!is_hermitian(mat_, kStateTolerance)) throw NumericalError("DensityMatrix: matrix is not Hermitian");
    if (std::abs(mat_.trace() - Complex(1.0, 0.0)) > kStateTolerance)
        throw NumericalError("DensityMatrix: trace differs from 1");
    if (herm_eigvals(mat_)[0] < -kStateTolerance) throw NumericalError("DensityMatrix: negative eigenvalue");
}

DensityMatrix DensityMatrix::trusted(ComplexMatrix mat, BipartiteDims dims) {
    return DensityMatrix(std::move(mat), dims, Unchecked{});
}

double DensityMatrix::purity() const { return (mat_ * mat_).trace().real(); }

std::string ensemble_name(EnsembleKind kind) {
    switch (kind) {
        case EnsembleKind::haar_pure: return "haar-pure";
        case EnsembleKind::mixture: return "mixture";
        case EnsembleKind::hilbert_schmidt: return "hs";
        case EnsembleKind::bures: return "bures";
        case EnsembleKind::product: return "product";
        case EnsembleKind::mixture_uniform: return "mixture-uniform";
    }
    return "unknown";
}

EnsembleKind parse_ensemble(const std::string &name) {
    if (name == "haar-pure" || name == "haar") return EnsembleKind::haar_pure;
    if (name == "mixture") return EnsembleKind::mixture;
    if (name == "hs" || name == "hilbert-schmidt") return EnsembleKind::hilbert_schmidt;
    if (name == "bures") return EnsembleKind::bures;
    if (name == "product") return EnsembleKind::product;
    if (name == "mixture-uniform") return EnsembleKind::mixture_uniform;
    throw ParameterError("unknown ensemble '" + name + "'");
}

void validate(const EnsembleSpec &spec) {
    validate(spec.dims);
    if (!(spec.cutoff > 0.0)) throw ParameterError("cutoff must be positive");
    if ((spec.kind == EnsembleKind::mixture || spec.kind == EnsembleKind::mixture_uniform) && spec.mixture_n < 1)
        throw ParameterError("mixture size must be >= 1");
}

ComplexMatrix ginibre(std::size_t d, CounterRng &rng) {
    const auto n = static_cast<Eigen::Index>(d);
    ComplexMatrix g(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) g(i, j) = rng.complex_normal();
    return g;
}

ComplexVector haar_vector(std::size_t d, CounterRng &rng) {
    ComplexVector v(static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.complex_normal();
    v.normalize();
    return v;
}

ComplexMatrix haar_unitary(std::size_t d, CounterRng &rng) {
    const ComplexMatrix z = ginibre(d, rng);
    Eigen::HouseholderQR<ComplexMatrix> qr(z);
    ComplexMatrix q = qr.householderQ();
    const auto &r = qr.matrixQR();
    for (Eigen::Index j = 0; j < q.cols(); ++j) {
        const Complex rjj = r(j, j);
        const double mag = std::abs(rjj);
        q.col(j) *= mag > 0.0 ? rjj / mag : Complex(1.0, 0.0);
    }
    return q;
}

DensityMatrix haar_pure(const BipartiteDims &dims, CounterRng &rng) {
    return DensityMatrix::trusted(projector(haar_vector(dims.total(), rng)), dims);
}

DensityMatrix mixture_state(std::size_t n, CounterRng &rng, const BipartiteDims &dims) {
    if (n < 1) throw ParameterError("mixture_state: n must be >= 1");
    std::vector<double> p(n);
    double total = 0.0;
    for (auto &w : p) total += (w = rng.uniform_open0());
    const auto d = static_cast<Eigen::Index>(dims.total());
    ComplexMatrix rho = ComplexMatrix::Zero(d, d);
    for (std::size_t b = 0; b < n; ++b) rho += (p[b] / total) * projector(haar_vector(dims.total(), rng));
    return DensityMatrix::trusted(std::move(rho), dims);
}

DensityMatrix hilbert_schmidt_random(CounterRng &rng, const BipartiteDims &dims) {
    return normalized_gram(ginibre(dims.total(), rng), dims);
}

DensityMatrix bures_random(CounterRng &rng, const BipartiteDims &dims) {
    const std::size_t d = dims.total();
    const ComplexMatrix g = ginibre(d, rng);
    const ComplexMatrix u = haar_unitary(d, rng);
    const auto n = static_cast<Eigen::Index>(d);
    const ComplexMatrix a = (ComplexMatrix::Identity(n, n) + u) * g;
    return normalized_gram(a, dims);
}

DensityMatrix product_random(CounterRng &rng, const BipartiteDims &dims) {
    const ComplexMatrix rho_a = gram_state(dims.m, rng);
    const ComplexMatrix rho_b = gram_state(dims.n, rng);
    return DensityMatrix::trusted(kron(rho_a, rho_b), dims);
}

DensityMatrix sample_state(const EnsembleSpec &spec, std::uint64_t index) {
    CounterRng rng(spec.seed, index);
    switch (spec.kind) {
        case EnsembleKind::haar_pure: return haar_pure(spec.dims, rng);
        case EnsembleKind::mixture: return mixture_state(spec.mixture_n, rng, spec.dims);
        case EnsembleKind::hilbert_schmidt: return hilbert_schmidt_random(rng, spec.dims);
        case EnsembleKind::bures: return bures_random(rng, spec.dims);
        case EnsembleKind::product: return product_random(rng, spec.dims);
        case EnsembleKind::mixture_uniform: {
            const std::size_t n = 1 + rng.below(spec.mixture_n);
            return mixture_state(n, rng, spec.dims);
        }
    }
    throw ParameterError("sample_state: unknown ensemble");
}

RealVector pt_spectrum(const DensityMatrix &rho) {
    return herm_eigvals(partial_transpose(rho.mat(), rho.dims(), Side::A));
}

NptLabel count_below(const RealVector &spectrum, double cutoff) {
    int xi = 0;
    for (Eigen::Index i = 0; i < spectrum.size(); ++i) xi += spectrum[i] < -cutoff ? 1 : 0;
    return {xi};
}

NptLabel pt_negative_count(const DensityMatrix &rho, double cutoff) {
    const ComplexMatrix pt = partial_transpose(rho.mat(), rho.dims(), Side::A);
    return {static_cast<int>(count_eigenvalues_below(pt, -cutoff))};
}

LabeledState make_labeled(const EnsembleSpec &spec, std::uint64_t index) {
    DensityMatrix rho = sample_state(spec, index);
    const NptLabel label = pt_negative_count(rho, spec.cutoff);
    return {std::move(rho), label, spec, index};
}

// ---------------------------------------------------------------------------
// Two-term mixtures

namespace {

struct PurePair {
    ComplexMatrix psi;
    ComplexMatrix phi;
};

PurePair draw_pair(CounterRng &rng) {
    const BipartiteDims dims{};
    return {projector(haar_vector(dims.total(), rng)), projector(haar_vector(dims.total(), rng))};
}

RealVector mixture_pt_spectrum(const PurePair &pair, double alpha) {
    const ComplexMatrix rho = alpha * pair.psi + (1.0 - alpha) * pair.phi;
    return herm_eigvals(partial_transpose(rho, BipartiteDims{}, Side::A));
}

TransitionSample classify(const RealVector &spec, double cutoff) {
    TransitionSample s{count_below(spec, cutoff), std::nullopt};
    if (spec[1] < 0.0) s.second_negative = spec[1];
    return s;
}

}  // namespace

TransitionSample transition_sample(double alpha, CounterRng &rng, double cutoff) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ParameterError("transition_sample: alpha must lie in [0, 1]");
    const PurePair pair = draw_pair(rng);
    return classify(mixture_pt_spectrum(pair, alpha), cutoff);
}

std::vector<double> default_transition_grid() {
    std::vector<double> grid(200);
    for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = 0.5 + 0.5 * double(i) / double(grid.size() - 1);
    return grid;
}

std::vector<TransitionRow> transition_sweep(const std::vector<double> &alpha_grid, std::size_t samples_per_point,
                                            double cutoff, std::uint64_t seed, std::size_t workers) {
    if (alpha_grid.empty()) throw ParameterError("transition_sweep: empty alpha grid");
    if (samples_per_point < 1) throw ParameterError("transition_sweep: samples_per_point must be >= 1");
    for (double a : alpha_grid)
        if (!(a >= 0.0 && a <= 1.0)) throw ParameterError("transition_sweep: alpha must lie in [0, 1]");

    const std::size_t g = alpha_grid.size();
    std::vector<TransitionSample> results(samples_per_point * g);
    parallel_for(samples_per_point, workers, [&](std::size_t j) {
        CounterRng rng(seed, j);
        const PurePair pair = draw_pair(rng);
        for (std::size_t a = 0; a < g; ++a)
            results[j * g + a] = classify(mixture_pt_spectrum(pair, alpha_grid[a]), cutoff);
    });

    std::vector<TransitionRow> rows(g);
    const double n = double(samples_per_point);
    for (std::size_t a = 0; a < g; ++a) {
        TransitionRow &row = rows[a];
        row.alpha = alpha_grid[a];
        std::array<std::size_t, 4> counts{};
        double sum = 0.0, sum2 = 0.0;
        for (std::size_t j = 0; j < samples_per_point; ++j) {
            const TransitionSample &s = results[j * g + a];
            counts[std::min(s.label.xi, 3)] += 1;
            if (s.second_negative) {
                sum += *s.second_negative;
                sum2 += *s.second_negative * *s.second_negative;
                ++row.n_second;
            }
        }
        for (int x = 0; x < 4; ++x) {
            row.p[x] = double(counts[x]) / n;
            row.se[x] = std::sqrt(row.p[x] * (1.0 - row.p[x]) / n);
        }
        if (row.n_second > 0) {
            row.mean_second = sum / double(row.n_second);
            row.std_second = std::sqrt(std::max(0.0, sum2 / double(row.n_second) - row.mean_second * row.mean_second));
        }
    }
    return rows;
}

double transition_crossing(std::size_t samples, double cutoff, std::uint64_t seed, std::size_t workers) {
    if (samples < 1) throw ParameterError("transition_crossing: samples must be >= 1");
    std::vector<PurePair> pairs(samples);
    parallel_for(samples, workers, [&](std::size_t j) {
        CounterRng rng(seed, j);
        pairs[j] = draw_pair(rng);
    });
    // Signed excess of xi=1 over xi=2 at 1 - alpha = eps.
    auto excess = [&](double eps) {
        std::vector<int> votes(samples, 0);
        parallel_for(samples, workers, [&](std::size_t j) {
            const int xi = count_below(mixture_pt_spectrum(pairs[j], 1.0 - eps), cutoff).xi;
            votes[j] = xi == 1 ? 1 : (xi == 2 ? -1 : 0);
        });
        long total = 0;
        for (int v : votes) total += v;
        return total;
    };
    double lo = -14.0, hi = -0.5;  // log10(1 - alpha)
    if (excess(std::pow(10.0, lo)) <= 0 || excess(std::pow(10.0, hi)) >= 0)
        throw NumericalError("transition_crossing: P(xi=1) - P(xi=2) does not change sign on the search interval");
    for (int it = 0; it < 50; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (excess(std::pow(10.0, mid)) > 0)
            lo = mid;
        else
            hi = mid;
    }
    return std::pow(10.0, 0.5 * (lo + hi));
}

// ---------------------------------------------------------------------------
// Ensemble statistics

double EnsembleStats::probability(int xi) const {
    if (n == 0 || xi < 0 || static_cast<std::size_t>(xi) >= counts.size()) return 0.0;
    return double(counts[xi]) / double(n);
}

double EnsembleStats::standard_error(int xi) const {
    if (n == 0) return 0.0;
    const double p = probability(xi);
    return std::sqrt(p * (1.0 - p) / double(n));
}

EnsembleStats ensemble_stats(const EnsembleSpec &spec, std::size_t n, std::size_t workers) {
    validate(spec);
    if (n < 1) throw ParameterError("ensemble_stats: N must be >= 1");
    const int bound = max_negative_eigenvalues(spec.dims);
    std::vector<int> labels(n);
    parallel_for(n, workers, [&](std::size_t i) {
        labels[i] = pt_negative_count(sample_state(spec, i), spec.cutoff).xi;
    });
    EnsembleStats stats;
    stats.n = n;
    stats.counts.assign(static_cast<std::size_t>(bound) + 2, 0);
    for (int xi : labels) {
        if (xi > bound) ++stats.above_bound;
        stats.counts[std::min(xi, bound + 1)] += 1;
    }
    return stats;
}

// ---------------------------------------------------------------------------
// Balanced datasets

BalancedDataset balanced_dataset(const std::set<int> &classes, std::size_t per_class, const GeneratorPolicy &policy,
                                 std::uint64_t seed, double cutoff, std::uint64_t attempt_budget,
                                 std::size_t workers) {
    if (classes.empty()) throw ParameterError("balanced_dataset: no classes requested");
    if (per_class < 1) throw ParameterError("balanced_dataset: per_class must be >= 1");
    if (attempt_budget < 1) throw ParameterError("balanced_dataset: attempt budget must be >= 1");
    for (int c : classes) {
        if (c < 0) throw ParameterError("balanced_dataset: negative class");
    }

    EnsembleSpec spec;
    spec.kind = policy.kind;
    spec.mixture_n = policy.mixture_max;
    spec.seed = seed;
    spec.cutoff = cutoff;
    validate(spec);
    for (int c : classes) {
        if (c > max_negative_eigenvalues(spec.dims))
            throw UnreachableClassError("balanced_dataset: class " + std::to_string(c) +
                                        " exceeds the bound (m-1)(n-1) on negative eigenvalues");
    }

    BalancedDataset out;
    std::array<std::size_t, 4> have{};
    std::array<std::uint64_t, 4> stall{};
    std::vector<std::uint64_t> accepted;
    auto complete = [&] {
        for (int c : classes)
            if (have[c] < per_class) return false;
        return true;
    };

    constexpr std::size_t block = 1 << 14;
    std::vector<signed char> labels(block);
    std::uint64_t base = 0;
    while (!complete()) {
        parallel_for(block, workers, [&](std::size_t i) {
            labels[i] = static_cast<signed char>(pt_negative_count(sample_state(spec, base + i), cutoff).xi);
        });
        for (std::size_t i = 0; i < block && !complete(); ++i) {
            const int xi = labels[i];
            ++out.draws;
            for (int c : classes) {
                if (have[c] >= per_class) continue;
                if (c == xi) {
                    accepted.push_back(base + i);
                    stall[c] = 0;
                    if (++have[c] == per_class) out.filled_at[c] = out.draws;
                } else if (++stall[c] >= attempt_budget) {
                    throw UnreachableClassError("balanced_dataset: no state with xi=" + std::to_string(c) +
                                                " in " + std::to_string(attempt_budget) + " consecutive draws under " +
                                                ensemble_name(policy.kind));
                }
            }
        }
        base += block;
    }

    out.states.resize(accepted.size(), LabeledState{DensityMatrix::trusted(ComplexMatrix(), spec.dims), {}, spec, 0});
    parallel_for(accepted.size(), workers, [&](std::size_t i) { out.states[i] = make_labeled(spec, accepted[i]); });
    return out;
}

// ---------------------------------------------------------------------------
// Files

std::string format_real(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_dataset_csv(std::ostream &out, const std::vector<LabeledState> &states) {
    const BipartiteDims dims = states.empty() ? BipartiteDims{} : states.front().rho.dims();
    const std::size_t d = dims.total();
    out << "index,xi";
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) out << ",re_" << i << '_' << j << ",im_" << i << '_' << j;
    out << '\n';
    for (const auto &s : states) {
        out << s.index << ',' << s.label.xi;
        const auto &m = s.rho.mat();
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                out << ',' << format_real(m(i, j).real()) << ',' << format_real(m(i, j).imag());
        out << '\n';
    }
}

std::vector<LabeledState> read_dataset_csv(std::istream &in, const BipartiteDims &dims, double cutoff) {
    std::string line;
    if (!std::getline(in, line)) throw ParameterError("dataset: missing header");
    const auto d = static_cast<Eigen::Index>(dims.total());
    std::vector<LabeledState> states;
    EnsembleSpec spec;
    spec.cutoff = cutoff;
    spec.dims = dims;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<double> fields;
        const char *p = line.c_str();
        while (*p) {
            char *end = nullptr;
            fields.push_back(std::strtod(p, &end));
            if (end == p) throw ParameterError("dataset: bad number on line " + std::to_string(line_no));
            p = end;
            if (*p == ',') ++p;
        }
        if (fields.size() != static_cast<std::size_t>(2 + 2 * d * d))
            throw ParameterError("dataset: wrong column count on line " + std::to_string(line_no));
        ComplexMatrix m(d, d);
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = 0; j < d; ++j)
                m(i, j) = Complex(fields[2 + 2 * (i * d + j)], fields[3 + 2 * (i * d + j)]);
        LabeledState s{DensityMatrix(std::move(m), dims), NptLabel{static_cast<int>(fields[1])}, spec,
                       static_cast<std::uint64_t>(fields[0])};
        states.push_back(std::move(s));
    }
    return states;
}

void write_dataset_ptcm(std::ostream &out, const std::vector<LabeledState> &states) {
    for (const auto &s : states) write_ptcm(out, s.rho.mat());
}

std::vector<ComplexMatrix> read_dataset_ptcm(std::istream &in, std::size_t count) {
    std::vector<ComplexMatrix> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(read_ptcm(in));
    return out;
}

}  // namespace npt
