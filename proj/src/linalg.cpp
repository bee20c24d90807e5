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

#include "npt/linalg.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>

namespace npt {

namespace {

void require_square(const ComplexMatrix &h, const char *what) {
    if (h.rows() != h.cols()) {
        throw DimensionError(std::string(what) + ": expected a square matrix, got " + std::to_string(h.rows()) +
                             "x" + std::to_string(h.cols()));
    }
}

void require_bipartite(const ComplexMatrix &rho, const BipartiteDims &dims, const char *what) {
    validate(dims);
    auto d = static_cast<Eigen::Index>(dims.total());
    if (rho.rows() != d || rho.cols() != d) {
        throw DimensionError(std::string(what) + ": matrix is " + std::to_string(rho.rows()) + "x" +
                             std::to_string(rho.cols()) + " but dims give " + std::to_string(d));
    }
}

void put_u32(std::ostream &out, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
    out.write(b, 4);
}

void put_f64(std::ostream &out, double x) {
    auto v = std::bit_cast<std::uint64_t>(x);
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
    out.write(b, 8);
}

std::uint32_t get_u32(std::istream &in) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char *>(b), 4)) throw DimensionError("PTCM: truncated header");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[i]) << (8 * i);
    return v;
}

double get_f64(std::istream &in) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char *>(b), 8)) throw DimensionError("PTCM: truncated payload");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
    return std::bit_cast<double>(v);
}

}  // namespace

void validate(const BipartiteDims &dims) {
    if (dims.m < 2 || dims.n < 2) {
        throw DimensionError("bipartite dimensions must be >= 2, got " + std::to_string(dims.m) + "x" +
                             std::to_string(dims.n));
    }
}

ComplexMatrix kron(const ComplexMatrix &a, const ComplexMatrix &b) {
    ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

ComplexMatrix hermitian_part(const ComplexMatrix &h) {
    require_square(h, "hermitian_part");
    return (h + h.adjoint()) * 0.5;
}

bool is_hermitian(const ComplexMatrix &h, double tol) {
    if (h.rows() != h.cols()) return false;
    return (h - h.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

namespace {

// Householder reduction of a Hermitian matrix to real symmetric tridiagonal
// form a = q T q^dagger (LAPACK zhetd2, lower storage). T has diagonal `d`
// and sub-diagonal `e` (e[i] couples rows i and i+1); the reflectors are
// chosen so that e is real.
struct Tridiagonal {
    std::vector<double> d;
    std::vector<double> e;
    ComplexMatrix q;  // only filled when vectors are requested
};

Tridiagonal tridiagonalize(ComplexMatrix a, bool want_vectors) {
    const Eigen::Index n = a.rows();
    Complex *A = a.data();  // column-major; only the lower triangle is referenced
    auto at = [A, n](Eigen::Index r, Eigen::Index c) -> Complex & { return A[r + c * n]; };
    Tridiagonal t;
    t.d.resize(n);
    t.e.assign(n, 0.0);
    if (want_vectors) t.q = ComplexMatrix::Identity(n, n);
    std::vector<Complex> v(n), x(n);
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
        // Reflector H = I - tau v v^dagger with H^dagger a(i+1:, i) = beta e_1, beta real.
        const Eigen::Index len = n - i - 1;
        const Complex alpha = at(i + 1, i);
        double xnorm2 = 0.0;
        for (Eigen::Index r = 1; r < len; ++r) xnorm2 += std::norm(at(i + 1 + r, i));
        Complex tau(0.0, 0.0);
        double beta = alpha.real();
        if (xnorm2 > 0.0 || alpha.imag() != 0.0) {
            beta = -std::copysign(std::sqrt(std::norm(alpha) + xnorm2), alpha.real());
            tau = Complex((beta - alpha.real()) / beta, -alpha.imag() / beta);
            const Complex scale = 1.0 / (alpha - beta);
            v[0] = 1.0;
            for (Eigen::Index r = 1; r < len; ++r) v[r] = at(i + 1 + r, i) * scale;
        }
        t.e[i] = beta;
        t.d[i] = at(i, i).real();
        if (tau == Complex(0.0, 0.0)) continue;

        // x = tau * A22 * v using the lower triangle of the Hermitian block.
        const Eigen::Index o = i + 1;
        for (Eigen::Index r = 0; r < len; ++r) x[r] = 0.0;
        for (Eigen::Index c = 0; c < len; ++c) {
            x[c] += at(o + c, o + c).real() * v[c];
            for (Eigen::Index r = c + 1; r < len; ++r) {
                const Complex arc = at(o + r, o + c);
                x[r] += arc * v[c];
                x[c] += std::conj(arc) * v[r];
            }
        }
        Complex xv(0.0, 0.0);  // x^dagger v before scaling by tau
        for (Eigen::Index r = 0; r < len; ++r) {
            x[r] *= tau;
            xv += std::conj(x[r]) * v[r];
        }
        const Complex shift = -0.5 * tau * xv;
        for (Eigen::Index r = 0; r < len; ++r) x[r] += shift * v[r];  // w
        // A22 -= v w^dagger + w v^dagger (lower triangle).
        for (Eigen::Index c = 0; c < len; ++c)
            for (Eigen::Index r = c; r < len; ++r)
                at(o + r, o + c) -= v[r] * std::conj(x[c]) + x[r] * std::conj(v[c]);

        if (want_vectors) {
            // q(:, i+1:) <- q(:, i+1:) H.
            for (Eigen::Index row = 0; row < n; ++row) {
                Complex acc(0.0, 0.0);
                for (Eigen::Index r = 0; r < len; ++r) acc += t.q(row, o + r) * v[r];
                acc *= tau;
                for (Eigen::Index r = 0; r < len; ++r) t.q(row, o + r) -= acc * std::conj(v[r]);
            }
        }
    }
    t.d[n - 1] = at(n - 1, n - 1).real();
    return t;
}

// Implicit QL with Wilkinson shifts on a real symmetric tridiagonal matrix.
// Plain sqrt instead of hypot: entries here are O(norm of a small matrix).
// On return d holds the eigenvalues (unsorted); z, if non-null, is rotated
// so that its columns are the eigenvectors.
void tridiagonal_ql(std::vector<double> &d, std::vector<double> &e, RealMatrix *z) {
    const int n = static_cast<int>(d.size());
    for (int l = 0; l < n; ++l) {
        int iter = 0;
        int m;
        do {
            for (m = l; m < n - 1; ++m) {
                const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= std::numeric_limits<double>::epsilon() * dd) break;
            }
            if (m != l) {
                if (++iter > 60) throw NumericalError("herm_eig: QL iteration did not converge");
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = std::sqrt(g * g + 1.0);
                g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
                double s = 1.0, c = 1.0, p = 0.0;
                int i;
                for (i = m - 1; i >= l; --i) {
                    double f = s * e[i];
                    const double b = c * e[i];
                    r = std::sqrt(f * f + g * g);
                    e[i + 1] = r;
                    if (r == 0.0) {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                    if (z != nullptr) {
                        for (int k = 0; k < n; ++k) {
                            f = (*z)(k, i + 1);
                            (*z)(k, i + 1) = s * (*z)(k, i) + c * f;
                            (*z)(k, i) = c * (*z)(k, i) - s * f;
                        }
                    }
                }
                if (r == 0.0 && i >= l) continue;
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }
}

std::vector<int> ascending_order(const std::vector<double> &values) {
    std::vector<int> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return values[a] < values[b]; });
    return order;
}

}  // namespace

EigenDecomposition herm_eig(const ComplexMatrix &h) {
    require_square(h, "herm_eig");
    const Eigen::Index n = h.rows();
    if (n == 0) return {};
    Tridiagonal t = tridiagonalize(hermitian_part(h), true);
    RealMatrix z = RealMatrix::Identity(n, n);
    tridiagonal_ql(t.d, t.e, &z);
    // Eigenvectors of h are q * z.
    const ComplexMatrix v = t.q * z.cast<Complex>();
    const auto order = ascending_order(t.d);
    EigenDecomposition out{RealVector(n), ComplexMatrix(n, n)};
    for (Eigen::Index j = 0; j < n; ++j) {
        out.values[j] = t.d[order[j]];
        out.vectors.col(j) = v.col(order[j]);
    }
    return out;
}

RealVector herm_eigvals(const ComplexMatrix &h) {
    require_square(h, "herm_eigvals");
    const Eigen::Index n = h.rows();
    if (n == 0) return {};
    Tridiagonal t = tridiagonalize(hermitian_part(h), false);
    tridiagonal_ql(t.d, t.e, nullptr);
    std::sort(t.d.begin(), t.d.end());
    return Eigen::Map<RealVector>(t.d.data(), n);
}

std::size_t count_eigenvalues_below(const ComplexMatrix &h, double x) {
    require_square(h, "count_eigenvalues_below");
    const Eigen::Index n = h.rows();
    if (n == 0) return 0;
    const Tridiagonal t = tridiagonalize(hermitian_part(h), false);
    // Sturm count: negative pivots of the LDL^T factorization of T - x I.
    double scale = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) scale = std::max({scale, std::abs(t.d[i]), std::abs(t.e[i])});
    const double pivmin = std::max(scale, 1.0) * std::numeric_limits<double>::min() / std::numeric_limits<double>::epsilon();
    std::size_t count = 0;
    double q = t.d[0] - x;
    for (Eigen::Index i = 0;; ++i) {
        if (std::abs(q) < pivmin) q = -pivmin;
        if (q < 0.0) ++count;
        if (i + 1 == n) break;
        q = (t.d[i + 1] - x) - t.e[i] * t.e[i] / q;
    }
    return count;
}

ComplexMatrix partial_transpose(const ComplexMatrix &rho, const BipartiteDims &dims, Side side) {
    require_bipartite(rho, dims, "partial_transpose");
    const auto m = static_cast<Eigen::Index>(dims.m);
    const auto n = static_cast<Eigen::Index>(dims.n);
    ComplexMatrix out(rho.rows(), rho.cols());
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            for (Eigen::Index k = 0; k < n; ++k) {
                for (Eigen::Index l = 0; l < n; ++l) {
                    // Element ((i,k),(j,l)).
                    out(i * n + k, j * n + l) =
                        side == Side::A ? rho(j * n + k, i * n + l) : rho(i * n + l, j * n + k);
                }
            }
        }
    }
    return out;
}

ComplexMatrix partial_trace(const ComplexMatrix &rho, const BipartiteDims &dims, Side keep) {
    require_bipartite(rho, dims, "partial_trace");
    const auto m = static_cast<Eigen::Index>(dims.m);
    const auto n = static_cast<Eigen::Index>(dims.n);
    if (keep == Side::A) {
        ComplexMatrix out = ComplexMatrix::Zero(m, m);
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index j = 0; j < m; ++j)
                for (Eigen::Index k = 0; k < n; ++k) out(i, j) += rho(i * n + k, j * n + k);
        return out;
    }
    ComplexMatrix out = ComplexMatrix::Zero(n, n);
    for (Eigen::Index i = 0; i < m; ++i) out += rho.block(i * n, i * n, n, n);
    return out;
}

ComplexMatrix permute_factors(
    const ComplexMatrix &m, std::span<const std::size_t> factor_dims, std::span<const std::size_t> perm) {
    require_square(m, "permute_factors");
    const std::size_t r = factor_dims.size();
    if (perm.size() != r) throw DimensionError("permute_factors: permutation length does not match factor count");
    std::vector<bool> seen(r, false);
    for (auto p : perm) {
        if (p >= r || seen[p]) throw DimensionError("permute_factors: invalid permutation");
        seen[p] = true;
    }
    const std::size_t total =
        std::accumulate(factor_dims.begin(), factor_dims.end(), std::size_t{1}, std::multiplies<>());
    if (total != static_cast<std::size_t>(m.rows())) {
        throw DimensionError("permute_factors: factor dimensions multiply to " + std::to_string(total) +
                             ", matrix has " + std::to_string(m.rows()));
    }

    // Strides of the output layout; out factor j has extent factor_dims[perm[j]].
    std::vector<std::size_t> out_stride(r);
    std::size_t s = 1;
    for (std::size_t j = r; j-- > 0;) {
        out_stride[j] = s;
        s *= factor_dims[perm[j]];
    }
    // in factor f lands in out slot inv[f].
    std::vector<std::size_t> inv(r);
    for (std::size_t j = 0; j < r; ++j) inv[perm[j]] = j;

    std::vector<Eigen::Index> map(total);
    std::vector<std::size_t> digit(r, 0);
    for (std::size_t idx = 0; idx < total; ++idx) {
        std::size_t target = 0;
        for (std::size_t f = 0; f < r; ++f) target += digit[f] * out_stride[inv[f]];
        map[idx] = static_cast<Eigen::Index>(target);
        for (std::size_t f = r; f-- > 0;) {
            if (++digit[f] < factor_dims[f]) break;
            digit[f] = 0;
        }
    }

    ComplexMatrix out(m.rows(), m.cols());
    for (std::size_t a = 0; a < total; ++a)
        for (std::size_t b = 0; b < total; ++b) out(map[a], map[b]) = m(a, b);
    return out;
}

std::array<double, 3> svd_rect(const CorrelationMatrix &t) {
    const Eigen::Matrix3d gram = t * t.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(gram, Eigen::EigenvaluesOnly);
    const auto &ev = solver.eigenvalues();
    std::array<double, 3> s{};
    for (int i = 0; i < 3; ++i) s[i] = std::sqrt(std::max(0.0, ev[2 - i]));
    return s;
}

void write_ptcm(std::ostream &out, const ComplexMatrix &m) {
    out.write("PTCM", 4);
    put_u32(out, static_cast<std::uint32_t>(m.rows()));
    put_u32(out, static_cast<std::uint32_t>(m.cols()));
    put_u32(out, 0);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            put_f64(out, m(i, j).real());
            put_f64(out, m(i, j).imag());
        }
    }
}

ComplexMatrix read_ptcm(std::istream &in) {
    char magic[4];
    if (!in.read(magic, 4) || std::string(magic, 4) != "PTCM") throw DimensionError("PTCM: bad magic");
    const auto rows = get_u32(in);
    const auto cols = get_u32(in);
    (void)get_u32(in);
    ComplexMatrix m(rows, cols);
    for (std::uint32_t i = 0; i < rows; ++i) {
        for (std::uint32_t j = 0; j < cols; ++j) {
            const double re = get_f64(in);
            const double im = get_f64(in);
            m(i, j) = Complex(re, im);
        }
    }
    return m;
}

}  // namespace npt
