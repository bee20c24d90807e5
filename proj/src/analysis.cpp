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

#include "npt/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <ostream>

#include "npt/errors.hpp"
#include "npt/parallel.hpp"
#include "npt/rng.hpp"

namespace npt {

namespace {

constexpr Complex I1{0.0, 1.0};

GellMannBasis build_basis() {
    GellMannBasis g;
    g.sigma[0] << 0, 1, 1, 0;
    g.sigma[1] << 0, -I1, I1, 0;
    g.sigma[2] << 1, 0, 0, -1;
    int a = 0;
    for (int j = 0; j < 4; ++j)
        for (int k = j + 1; k < 4; ++k, ++a) {
            g.lambda[a].setZero();
            g.lambda[a](j, k) = g.lambda[a](k, j) = 1.0;
            g.lambda[a + 6].setZero();
            g.lambda[a + 6](j, k) = -I1;
            g.lambda[a + 6](k, j) = I1;
        }
    for (int l = 1; l <= 3; ++l) {
        auto &m = g.lambda[11 + l];
        m.setZero();
        const double c = std::sqrt(2.0 / double(l * (l + 1)));
        for (int j = 0; j < l; ++j) m(j, j) = c;
        m(l, l) = -c * l;
    }
    return g;
}

// Re Tr(a b) for Hermitian a, b.
double trace_product(const ComplexMatrix &a, const ComplexMatrix &b) {
    return (a.transpose().array() * b.array()).sum().real();
}

void require_qubit_ququart(const BipartiteDims &dims) {
    if (dims.m != 2 || dims.n != 4) throw DimensionError("Bloch decomposition needs a 2 x 4 state");
}

}  // namespace

const GellMannBasis &gell_mann_su4() {
    static const GellMannBasis basis = build_basis();
    return basis;
}

BlochDecomposition bloch_decompose(const DensityMatrix &rho) {
    require_qubit_ququart(rho.dims());
    const auto &g = gell_mann_su4();
    const ComplexMatrix &r = rho.mat();
    const ComplexMatrix reduced_a = partial_trace(r, rho.dims(), Side::A);
    const ComplexMatrix reduced_b = partial_trace(r, rho.dims(), Side::B);
    BlochDecomposition d;
    for (int i = 0; i < 3; ++i) d.a(i) = trace_product(reduced_a, g.sigma[i]);
    for (int k = 0; k < 15; ++k) d.b(k) = trace_product(reduced_b, g.lambda[k]);
    for (int i = 0; i < 3; ++i) {
        // Tr_A[(sigma_i x I) rho] then project on each Lambda.
        ComplexMatrix block = ComplexMatrix::Zero(4, 4);
        for (int p = 0; p < 2; ++p)
            for (int q = 0; q < 2; ++q)
                if (g.sigma[i](q, p) != 0.0) block += g.sigma[i](q, p) * r.block(4 * p, 4 * q, 4, 4);
        for (int k = 0; k < 15; ++k) d.t(i, k) = trace_product(block, g.lambda[k]);
    }
    return d;
}

ComplexMatrix bloch_operator(const BlochDecomposition &dec) {
    const auto &g = gell_mann_su4();
    const ComplexMatrix i2 = ComplexMatrix::Identity(2, 2), i4 = ComplexMatrix::Identity(4, 4);
    ComplexMatrix qubit = i2, ququart = ComplexMatrix::Zero(4, 4);
    for (int i = 0; i < 3; ++i) qubit += dec.a(i) * g.sigma[i];
    for (int k = 0; k < 15; ++k) ququart += dec.b(k) * g.lambda[k];
    ComplexMatrix rho = kron(qubit, i4) / 8.0 + kron(i2, ququart) / 4.0;
    for (int i = 0; i < 3; ++i) {
        ComplexMatrix corr = ComplexMatrix::Zero(4, 4);
        for (int k = 0; k < 15; ++k) corr += dec.t(i, k) * g.lambda[k];
        rho += kron(g.sigma[i], corr) / 4.0;
    }
    return rho;
}

DensityMatrix bloch_reconstruct(const BlochDecomposition &dec) { return DensityMatrix(bloch_operator(dec)); }

double bloch_purity(const BlochDecomposition &dec) {
    return (1.0 + dec.a.squaredNorm() + 2.0 * dec.b.squaredNorm() + 2.0 * dec.t.squaredNorm()) / 8.0;
}

double frobenius_norm(const CorrelationMatrix &t) { return std::sqrt((t.transpose() * t).trace()); }

std::vector<SvdScatterRow> svd_scatter(const std::vector<LabeledState> &states, std::size_t workers) {
    std::vector<SvdScatterRow> rows(states.size());
    parallel_for(states.size(), workers, [&](std::size_t i) {
        rows[i] = {states[i].index, states[i].label.xi, svd_rect(bloch_decompose(states[i].rho).t)};
    });
    return rows;
}

void write_svd_scatter_csv(std::ostream &out, const std::vector<SvdScatterRow> &rows) {
    out << "index,xi,s1,s2,s3\n";
    for (const auto &r : rows)
        out << r.index << ',' << r.xi << ',' << format_real(r.s[0]) << ',' << format_real(r.s[1]) << ','
            << format_real(r.s[2]) << '\n';
}

namespace {

struct Accumulator {
    std::vector<std::array<double, 4>> values;

    MomentPair moment(std::size_t which) const {
        if (values.empty()) return {std::nan(""), std::nan("")};
        double mean = 0.0;
        for (const auto &v : values) mean += v[which];
        mean /= double(values.size());
        double var = 0.0;
        for (const auto &v : values) var += (v[which] - mean) * (v[which] - mean);
        const double denom = values.size() > 1 ? double(values.size() - 1) : 1.0;
        return {mean, std::sqrt(var / denom)};
    }

    MixtureProfileRow row(std::size_t n, int xi) const {
        return {n, xi, values.size(), moment(0), moment(1), moment(2), moment(3)};
    }
};

}  // namespace

std::vector<MixtureProfileRow> mixture_profile(const std::vector<std::size_t> &n_values, std::size_t samples_per_n,
                                               std::uint64_t seed, const std::vector<int> &classes, double cutoff,
                                               std::size_t workers) {
    if (samples_per_n == 0) throw ParameterError("mixture_profile: samples_per_n must be positive");
    std::vector<MixtureProfileRow> rows;
    for (std::size_t n : n_values) {
        if (n < 1 || n > 15) throw ParameterError("mixture_profile: n must lie in [1, 15]");
        EnsembleSpec spec{EnsembleKind::mixture, n, derive_seed(seed, n), cutoff, {}};
        std::vector<std::array<double, 4>> stats(samples_per_n);
        std::vector<int> labels(samples_per_n);
        parallel_for(samples_per_n, workers, [&](std::size_t i) {
            const LabeledState s = make_labeled(spec, i);
            const BlochDecomposition d = bloch_decompose(s.rho);
            stats[i] = {d.a.squaredNorm(), d.b.squaredNorm(), d.t.squaredNorm(), s.rho.purity()};
            labels[i] = s.label.xi;
        });
        std::map<int, Accumulator> by_class;
        Accumulator pooled;
        for (std::size_t i = 0; i < samples_per_n; ++i) {
            by_class[labels[i]].values.push_back(stats[i]);
            pooled.values.push_back(stats[i]);
        }
        for (int c : classes) rows.push_back(by_class[c].row(n, c));
        rows.push_back(pooled.row(n, -1));
    }
    return rows;
}

void write_mixture_profile_csv(std::ostream &out, const std::vector<MixtureProfileRow> &rows) {
    out << "n,class,count,a2_mean,a2_std,b2_mean,b2_std,t2_mean,t2_std,purity_mean,purity_std\n";
    for (const auto &r : rows) {
        out << r.n << ',' << (r.xi < 0 ? std::string("all") : std::to_string(r.xi)) << ',' << r.count;
        for (const MomentPair &m : {r.a2, r.b2, r.t2, r.purity})
            out << ',' << format_real(m.mean) << ',' << format_real(m.std);
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// t-SNE

namespace {

// Pairwise loop rather than a Gram product so identical rows get bit-identical distances.
RealMatrix squared_distances(const RealMatrix &x) {
    const auto n = x.rows();
    const RealMatrix xt = x.transpose();
    RealMatrix d = RealMatrix::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = j + 1; i < n; ++i) d(i, j) = d(j, i) = (xt.col(i) - xt.col(j)).squaredNorm();
    return d;
}

std::uint64_t row_hash(const RealMatrix &x, Eigen::Index row) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const double v = x(row, c) == 0.0 ? 0.0 : x(row, c);
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        for (int b = 0; b < 8; ++b) {
            h ^= (bits >> (8 * b)) & 0xff;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

// Row-conditional affinities with per-point bandwidth matched to the perplexity.
RealMatrix conditional_affinities(const RealMatrix &d, double perplexity) {
    const auto n = d.rows();
    const double target = std::log(perplexity);
    RealMatrix p = RealMatrix::Zero(n, n);
    std::vector<double> row(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
        double dmin = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i) dmin = std::min(dmin, d(i, j));
        double entropy = 0.0;
        bool matched = false;
        for (int attempt = 0; attempt < 200; ++attempt) {
            double sum = 0.0, weighted = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                row[std::size_t(j)] = j == i ? 0.0 : std::exp(-beta * (d(i, j) - dmin));
                sum += row[std::size_t(j)];
                weighted += row[std::size_t(j)] * (d(i, j) - dmin);
            }
            entropy = std::log(sum) + beta * weighted / sum;
            const double diff = entropy - target;
            if (std::abs(diff) < 1e-5) {
                matched = true;
                break;
            }
            if (diff > 0) {
                lo = beta;
                beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
            } else {
                hi = beta;
                beta = 0.5 * (beta + lo);
            }
        }
        if (!matched || !std::isfinite(entropy))
            throw ParameterError("tsne: bandwidth search cannot reach perplexity for point " + std::to_string(i));
        double sum = 0.0;
        for (double v : row) sum += v;
        for (Eigen::Index j = 0; j < n; ++j) p(i, j) = row[std::size_t(j)] / sum;
    }
    return p;
}

// KL(P || Q) and its gradient with respect to the embedding.
double kl_and_gradient(const RealMatrix &p, const RealMatrix &y, RealMatrix *grad) {
    const auto n = y.rows();
    double z = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) z += 2.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
    const double log_z = std::log(z);
    double kl = 0.0;
    if (grad) grad->setZero(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        double gx = 0.0, gy = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) continue;
            const double dx = y(i, 0) - y(j, 0), dy = y(i, 1) - y(j, 1);
            const double w = 1.0 / (1.0 + dx * dx + dy * dy);
            const double pij = p(i, j);
            if (pij > 0) kl += pij * (std::log(pij) - std::log(w) + log_z);
            if (grad) {
                const double f = 4.0 * (pij - w / z) * w;
                gx += f * dx;
                gy += f * dy;
            }
        }
        if (grad) {
            (*grad)(i, 0) = gx;
            (*grad)(i, 1) = gy;
        }
    }
    return kl;
}

}  // namespace

TsneResult tsne(const RealMatrix &x, const TsneParams &params) {
    const auto n = x.rows();
    if (n < 4) throw ParameterError("tsne: need at least four points");
    if (n > 10000) throw ParameterError("tsne: exact t-SNE supports at most 10^4 points");
    if (!(params.perplexity > 0) || params.perplexity >= double(n) / 3.0)
        throw ParameterError("tsne: perplexity must lie in (0, N/3)");
    if (!x.allFinite()) throw ParameterError("tsne: non-finite input");

    RealMatrix p = conditional_affinities(squared_distances(x), params.perplexity);
    p = (p + p.transpose()).eval() / (2.0 * double(n));
    p = p.cwiseMax(1e-12);
    p.diagonal().setZero();

    TsneResult result;
    RealMatrix &y = result.embedding;
    y.resize(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        CounterRng rng(params.seed, row_hash(x, i));
        for (int c = 0; c < 2; ++c) y(i, c) = 1e-4 * rng.normal();
    }

    RealMatrix velocity = RealMatrix::Zero(n, 2), gains = RealMatrix::Ones(n, 2), grad(n, 2), next_grad(n, 2);
    const RealMatrix p_early = p * params.exaggeration;
    double kl = kl_and_gradient(params.exaggeration_iterations > 0 ? p_early : p, y, &grad);

    for (std::size_t it = 0; it < params.iterations; ++it) {
        const bool early = it < params.exaggeration_iterations;
        const RealMatrix &target = early ? p_early : p;
        if (it == params.exaggeration_iterations && it > 0) kl = kl_and_gradient(p, y, &grad);
        const double momentum = early ? 0.5 : 0.8;
        for (Eigen::Index i = 0; i < gains.size(); ++i) {
            const bool same = (grad(i) > 0) == (velocity(i) > 0);
            gains(i) = std::max(0.01, same ? gains(i) * 0.8 : gains(i) + 0.2);
        }
        RealMatrix step = momentum * velocity - params.learning_rate * gains.cwiseProduct(grad);
        RealMatrix candidate = y + step;
        double next_kl = kl_and_gradient(target, candidate, &next_grad);
        if (!early && next_kl > kl) {
            step.setZero();
            gains.setOnes();
            candidate = y;
            next_kl = kl;
            next_grad = grad;
            double eta = params.learning_rate;
            for (int h = 0; h < 40; ++h, eta *= 0.5) {
                RealMatrix trial = y - eta * grad;
                RealMatrix trial_grad(n, 2);
                const double trial_kl = kl_and_gradient(target, trial, &trial_grad);
                if (trial_kl <= kl) {
                    step = trial - y;
                    candidate = std::move(trial);
                    next_kl = trial_kl;
                    next_grad = std::move(trial_grad);
                    break;
                }
            }
        }
        velocity = step;
        y = candidate;
        y.rowwise() -= y.colwise().mean();
        grad = next_grad;
        kl = next_kl;
        result.kl.push_back(kl);
    }
    return result;
}

std::vector<std::pair<int, double>> silhouette_by_class(const RealMatrix &points, const std::vector<int> &labels) {
    const auto n = points.rows();
    if (std::size_t(n) != labels.size()) throw DimensionError("silhouette: label count does not match rows");
    std::map<int, std::size_t> sizes;
    for (int l : labels) ++sizes[l];
    if (sizes.size() < 2) throw ParameterError("silhouette: need at least two clusters");
    std::vector<int> ids;
    for (auto &[label, size] : sizes) ids.push_back(label);

    std::map<int, std::pair<double, std::size_t>> totals;
    std::map<int, double> dist;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (int id : ids) dist[id] = 0.0;
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i) dist[labels[std::size_t(j)]] += (points.row(i) - points.row(j)).norm();
        const int own = labels[std::size_t(i)];
        double s = 0.0;
        if (sizes[own] > 1) {
            const double a = dist[own] / double(sizes[own] - 1);
            double b = std::numeric_limits<double>::infinity();
            for (int id : ids)
                if (id != own) b = std::min(b, dist[id] / double(sizes[id]));
            const double m = std::max(a, b);
            s = m > 0 ? (b - a) / m : 0.0;
        }
        totals[own].first += s;
        ++totals[own].second;
    }
    std::vector<std::pair<int, double>> out;
    for (auto &[label, t] : totals) out.emplace_back(label, t.first / double(t.second));
    return out;
}

double mean_silhouette(const RealMatrix &points, const std::vector<int> &labels) {
    std::map<int, std::size_t> sizes;
    for (int l : labels) ++sizes[l];
    double total = 0.0;
    for (auto [label, s] : silhouette_by_class(points, labels)) total += s * double(sizes[label]);
    return total / double(labels.size());
}

void write_tsne_csv(std::ostream &out, const std::vector<std::uint64_t> &index, const std::vector<int> &xi,
                    const RealMatrix &embedding) {
    if (index.size() != xi.size() || std::size_t(embedding.rows()) != xi.size())
        throw DimensionError("write_tsne_csv: length mismatch");
    out << "index,xi,x,y\n";
    for (std::size_t i = 0; i < xi.size(); ++i)
        out << index[i] << ',' << xi[i] << ',' << format_real(embedding(Eigen::Index(i), 0)) << ','
            << format_real(embedding(Eigen::Index(i), 1)) << '\n';
}

// ---------------------------------------------------------------------------
// Negative eigenspace and rank-two embeddings

NegativeEigenspace negative_eigenspace(const DensityMatrix &rho, double cutoff) {
    const EigenDecomposition e = herm_eig(partial_transpose(rho.mat(), rho.dims(), Side::A));
    Eigen::Index count = 0;
    while (count < e.values.size() && e.values(count) < -cutoff) ++count;
    return {e.values.head(count), e.vectors.leftCols(count)};
}

namespace {

struct BobFrame {
    std::size_t dim = 0;
    ComplexMatrix frame;  // n x n unitary; leading dim columns span U_B
};

BobFrame bob_frame(const ComplexMatrix &vectors, const BipartiteDims &dims) {
    validate(dims);
    if (std::size_t(vectors.rows()) != dims.total()) throw DimensionError("bob_support: vector length mismatch");
    const auto n = Eigen::Index(dims.n), m = Eigen::Index(dims.m);
    if (vectors.cols() == 0) return {0, ComplexMatrix::Identity(n, n)};
    ComplexMatrix pieces(n, m * vectors.cols());
    for (Eigen::Index v = 0; v < vectors.cols(); ++v)
        for (Eigen::Index i = 0; i < m; ++i) pieces.col(v * m + i) = vectors.col(v).segment(i * n, n);
    Eigen::JacobiSVD<ComplexMatrix> svd(pieces, Eigen::ComputeFullU);
    const RealVector &s = svd.singularValues();
    std::size_t dim = 0;
    if (s.size() > 0 && s(0) > 0)
        while (Eigen::Index(dim) < s.size() && s(Eigen::Index(dim)) > kBobRankThreshold * s(0)) ++dim;
    return {dim, svd.matrixU()};
}

}  // namespace

BobSupport bob_support(const ComplexMatrix &vectors, const BipartiteDims &dims) {
    BobFrame f = bob_frame(vectors, dims);
    return {f.dim, f.frame.leftCols(Eigen::Index(f.dim))};
}

std::size_t bob_support_dim(const ComplexMatrix &vectors, const BipartiteDims &dims) {
    return bob_frame(vectors, dims).dim;
}

Rank2Embedding rank2_embedding_exists(const DensityMatrix &rho, double cutoff) {
    const NegativeEigenspace neg = negative_eigenspace(rho, cutoff);
    const BobFrame f = bob_frame(neg.vectors, rho.dims());
    Rank2Embedding r;
    r.support_dim = f.dim;
    r.exists = f.dim <= 2;
    if (r.exists) {
        const ComplexMatrix v = f.frame.leftCols(2);
        r.projector = v * v.adjoint();
    }
    return r;
}

DensityMatrix project_rank2(const DensityMatrix &rho, const ComplexMatrix &p_b) {
    const BipartiteDims dims = rho.dims();
    const auto n = Eigen::Index(dims.n), m = Eigen::Index(dims.m);
    if (p_b.rows() != n || p_b.cols() != n) throw DimensionError("project_rank2: projector size mismatch");
    if (!is_hermitian(p_b, 1e-10) || (p_b * p_b - p_b).cwiseAbs().maxCoeff() > 1e-8 ||
        std::abs(p_b.trace().real() - 2.0) > 1e-8)
        throw ParameterError("project_rank2: P_B must be a rank-two orthogonal projector");
    const EigenDecomposition e = herm_eig(p_b);
    const ComplexMatrix v = e.vectors.rightCols(2);
    ComplexMatrix iso = ComplexMatrix::Zero(m * n, m * 2);
    for (Eigen::Index i = 0; i < m; ++i) iso.block(i * n, i * 2, n, 2) = v;
    ComplexMatrix reduced = iso.adjoint() * rho.mat() * iso;
    const double probability = reduced.trace().real();
    if (probability < 1e-12) throw NumericalError("project_rank2: vanishing projection probability");
    reduced = hermitian_part(reduced) / probability;
    return DensityMatrix(reduced, {dims.m, 2});
}

}  // namespace npt
