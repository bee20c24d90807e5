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

#include "npt/features.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"
#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

#include "npt/errors.hpp"
#include "npt/parallel.hpp"
#include "npt/rng.hpp"

namespace npt {

namespace {

constexpr double kPi = 3.14159265358979323846;

// D_pq = X^p Z^q with X|j> = |j+1 mod 4> and Z|j> = i^j |j>.
Eigen::Vector4cd weyl_heisenberg(int p, int q, const Eigen::Vector4cd &v) {
    Eigen::Vector4cd z;
    for (int j = 0; j < 4; ++j) z(j) = std::polar(1.0, 2.0 * kPi * q * j / 4.0) * v(j);
    Eigen::Vector4cd out;
    for (int j = 0; j < 4; ++j) out((j + p) % 4) = z(j);
    return out;
}

Eigen::Vector4cd unpack(const Eigen::VectorXd &x) {
    Eigen::Vector4cd v;
    for (int j = 0; j < 4; ++j) v(j) = Complex(x(2 * j), x(2 * j + 1));
    return v / v.norm();
}

// Residuals |<f|D_pq|f>|^2 - 1/5 for the 15 non-identity displacements.
struct FiducialResidual {
    using Scalar = double;
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

    int inputs() const { return 8; }
    int values() const { return 15; }

    int operator()(const Eigen::VectorXd &x, Eigen::VectorXd &f) const {
        const Eigen::Vector4cd v = unpack(x);
        int r = 0;
        for (int p = 0; p < 4; ++p) {
            for (int q = 0; q < 4; ++q) {
                if (p == 0 && q == 0) continue;
                f(r++) = std::norm(v.dot(weyl_heisenberg(p, q, v))) - 0.2;
            }
        }
        return 0;
    }
};

std::uint64_t fnv1a(std::uint64_t h, std::uint64_t word) {
    for (int b = 0; b < 8; ++b) {
        h ^= (word >> (8 * b)) & 0xff;
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace

SicPovm16 build_sic_povm_d4(std::uint64_t seed) {
    constexpr int kStarts = 64;
    for (int start = 0; start < kStarts; ++start) {
        CounterRng rng(seed, start);
        Eigen::VectorXd x(8);
        for (int j = 0; j < 8; ++j) x(j) = rng.normal();

        Eigen::NumericalDiff<FiducialResidual> functor;
        Eigen::LevenbergMarquardt<Eigen::NumericalDiff<FiducialResidual>> lm(functor);
        lm.parameters.ftol = 1e-15;
        lm.parameters.xtol = 1e-15;
        lm.parameters.maxfev = 20000;
        lm.minimize(x);

        Eigen::VectorXd f(15);
        FiducialResidual{}(x, f);
        if (f.cwiseAbs().maxCoeff() > 1e-12) continue;

        Eigen::Vector4cd fid = unpack(x);
        // Fix the global phase so the first nonzero coordinate is real positive.
        int lead = 0;
        while (lead < 3 && std::abs(fid(lead)) < 1e-8) ++lead;
        fid *= std::polar(1.0, -std::arg(fid(lead)));

        SicPovm16 sic;
        for (int p = 0; p < 4; ++p)
            for (int q = 0; q < 4; ++q) sic.vectors[4 * p + q] = weyl_heisenberg(p, q, fid);
        verify_sic(sic);
        return sic;
    }
    throw NumericalError("build_sic_povm_d4: no fiducial reached residual 1e-12");
}

const SicPovm16 &sic_povm_d4() {
    static const SicPovm16 sic = build_sic_povm_d4();
    return sic;
}

double sic_overlap_error(const SicPovm16 &sic) {
    double worst = 0.0;
    for (int i = 0; i < 16; ++i)
        for (int j = i + 1; j < 16; ++j)
            worst = std::max(worst, std::abs(std::norm(sic.vectors[i].dot(sic.vectors[j])) - 0.2));
    return worst;
}

double sic_frame_error(const SicPovm16 &sic) {
    Eigen::Matrix4cd frame = Eigen::Matrix4cd::Zero();
    for (const auto &v : sic.vectors) frame += v * v.adjoint();
    return (frame / 4.0 - Eigen::Matrix4cd::Identity()).cwiseAbs().maxCoeff();
}

void verify_sic(const SicPovm16 &sic, double tol) {
    for (const auto &v : sic.vectors)
        if (std::abs(v.norm() - 1.0) > tol) throw NumericalError("SIC-POVM: vector is not unit norm");
    if (sic_overlap_error(sic) > tol) throw NumericalError("SIC-POVM: pairwise overlaps differ from 1/5");
    if (sic_frame_error(sic) > tol) throw NumericalError("SIC-POVM: frame operator differs from identity");
}

std::string povm_hash(const SicPovm16 &sic) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto &v : sic.vectors) {
        for (int j = 0; j < 4; ++j) {
            h = fnv1a(h, std::bit_cast<std::uint64_t>(v(j).real()));
            h = fnv1a(h, std::bit_cast<std::uint64_t>(v(j).imag()));
        }
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void save_sic(const std::filesystem::path &path, const SicPovm16 &sic) {
    nlohmann::json vectors = nlohmann::json::array();
    for (const auto &v : sic.vectors) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < 4; ++j) row.push_back({v(j).real(), v(j).imag()});
        vectors.push_back(row);
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw ParameterError("cannot write SIC cache " + path.string());
    out << nlohmann::json{{"dimension", 4}, {"vectors", vectors}}.dump(2) << '\n';
}

SicPovm16 load_sic(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw ParameterError("cannot read SIC cache " + path.string());
    SicPovm16 sic;
    try {
        const auto doc = nlohmann::json::parse(in);
        const auto &vectors = doc.at("vectors");
        if (vectors.size() != 16) throw ParameterError("SIC cache must hold 16 vectors");
        for (int i = 0; i < 16; ++i) {
            if (vectors[i].size() != 4) throw ParameterError("SIC cache vectors must have 4 entries");
            for (int j = 0; j < 4; ++j)
                sic.vectors[i](j) = Complex(vectors[i][j].at(0).get<double>(), vectors[i][j].at(1).get<double>());
        }
    } catch (const nlohmann::json::exception &e) {
        throw ParameterError("malformed SIC cache " + path.string() + ": " + e.what());
    }
    verify_sic(sic);
    return sic;
}

SicPovm16 load_or_build_sic(const std::filesystem::path &path) {
    if (std::filesystem::exists(path)) return load_sic(path);
    const SicPovm16 &sic = sic_povm_d4();
    save_sic(path, sic);
    return sic;
}

ComplexMatrix bell_singlet_projector() {
    ComplexVector s = ComplexVector::Zero(4);
    s(1) = 1.0 / std::sqrt(2.0);
    s(2) = -1.0 / std::sqrt(2.0);
    return s * s.adjoint();
}

std::string swap_convention_name(SwapConvention c) {
    return c == SwapConvention::virtual_swap ? "virtual_swap" : "identity";
}

SwapConvention parse_swap_convention(const std::string &name) {
    if (name == "virtual_swap") return SwapConvention::virtual_swap;
    if (name == "identity") return SwapConvention::identity;
    throw ParameterError("unknown swap convention '" + name + "' (expected virtual_swap or identity)");
}

ComplexMatrix swap_operator(SwapConvention c) {
    if (c == SwapConvention::identity) return ComplexMatrix::Identity(8, 8);
    ComplexMatrix s = ComplexMatrix::Zero(8, 8);
    for (int i = 0; i < 2; ++i)
        for (int b1 = 0; b1 < 2; ++b1)
            for (int b2 = 0; b2 < 2; ++b2) s(b1 * 4 + i * 2 + b2, i * 4 + b1 * 2 + b2) = 1.0;
    return s;
}

bool is_supported_k(std::size_t k) { return k == 1 || k == 8 || k == 16 || k == 32 || k == 64 || k == 136; }

CmwConfig cmw_config(std::size_t k) {
    if (!is_supported_k(k)) throw ParameterError("unsupported k=" + std::to_string(k) + " (1, 8, 16, 32, 64, 136)");
    CmwConfig config{k, {}};
    auto &pairs = config.pairs;
    const int diagonal = k == 1 ? 1 : k == 8 ? 8 : 16;
    for (int i = 0; i < diagonal; ++i) pairs.emplace_back(i, i);
    if (k >= 32) {
        for (int i = 0; i < 15; ++i) pairs.emplace_back(i, i + 1);
        pairs.emplace_back(0, 15);
    }
    if (k >= 64) {
        for (int offset = 2; pairs.size() < 64; ++offset)
            for (int i = 0; i + offset < 16 && pairs.size() < 64; ++i) pairs.emplace_back(i, i + offset);
    }
    if (k == 136) {
        std::set<std::pair<int, int>> seen(pairs.begin(), pairs.end());
        for (int x = 0; x < 16; ++x)
            for (int y = x; y < 16; ++y)
                if (seen.insert({x, y}).second) pairs.emplace_back(x, y);
    }
    return config;
}

ComplexMatrix rho_T(const DensityMatrix &rho, SwapConvention c) {
    const ComplexMatrix s = swap_operator(c);
    return kron(s.transpose() * rho.mat() * s, rho.mat());
}

namespace {

void require_two_by_four(const DensityMatrix &rho) {
    if (rho.dims() != BipartiteDims{2, 4}) throw DimensionError("CMW features need a 2x4 state");
}

double ratio(double num, double den, bool &degenerate) {
    degenerate = den < kDegenerateDenominator;
    if (degenerate) return 0.0;
    return std::clamp(num / den, 0.0, 1.0);
}

}  // namespace

FeatureVector cmw_features(const DensityMatrix &rho, const CmwConfig &config, const SicPovm16 &sic,
                           SwapConvention c) {
    require_two_by_four(rho);
    const ComplexMatrix &r = rho.mat();
    // S is a real permutation, so S^T rho S is a relabeling of entries.
    const ComplexMatrix s = swap_operator(c);
    const ComplexMatrix sigma = s.transpose() * r * s;

    // block(m)[x](a', a) = <a' psi_x| m |a psi_x>
    auto blocks = [&](const ComplexMatrix &m) {
        std::array<Eigen::Matrix2cd, 16> out;
        for (int x = 0; x < 16; ++x) {
            const Eigen::Vector4cd &v = sic.vectors[x];
            for (int a1 = 0; a1 < 2; ++a1)
                for (int a = 0; a < 2; ++a)
                    out[x](a1, a) = v.dot(m.block<4, 4>(4 * a1, 4 * a) * v);
        }
        return out;
    };
    const auto first = blocks(sigma);
    const auto second = blocks(r);

    FeatureVector f{RealVector(config.pairs.size()), std::vector<bool>(config.pairs.size()), {}};
    for (std::size_t i = 0; i < config.pairs.size(); ++i) {
        const Eigen::Matrix2cd &m1 = first[config.pairs[i].first];
        const Eigen::Matrix2cd &m2 = second[config.pairs[i].second];
        // <s| m1 (x) m2 |s> for s = (|01> - |10>)/sqrt(2)
        const double num = 0.5 * (m1(0, 0) * m2(1, 1) - m1(0, 1) * m2(1, 0) - m1(1, 0) * m2(0, 1) +
                                  m1(1, 1) * m2(0, 0)).real();
        const double den = (m1.trace() * m2.trace()).real();
        bool degenerate = false;
        f.values(i) = ratio(num, den, degenerate);
        f.mask[i] = degenerate;
    }
    f.label = pt_negative_count(rho);
    return f;
}

FeatureVector cmw_features_reference(const DensityMatrix &rho, const CmwConfig &config, const SicPovm16 &sic,
                                     SwapConvention c) {
    require_two_by_four(rho);
    const std::array<std::size_t, 4> dims{2, 4, 2, 4};
    const std::array<std::size_t, 4> perm{1, 0, 2, 3};  // (A1, B1, A2, B2) -> (B1, A1, A2, B2)
    const ComplexMatrix t = permute_factors(rho_T(rho, c), dims, perm);
    const ComplexMatrix bell = bell_singlet_projector();
    const ComplexMatrix id4 = ComplexMatrix::Identity(4, 4);

    FeatureVector f{RealVector(config.pairs.size()), std::vector<bool>(config.pairs.size()), {}};
    for (std::size_t i = 0; i < config.pairs.size(); ++i) {
        const ComplexVector &vx = sic.vectors[config.pairs[i].first];
        const ComplexVector &vy = sic.vectors[config.pairs[i].second];
        const ComplexMatrix px = vx * vx.adjoint(), py = vy * vy.adjoint();
        const double num = (t * kron(kron(px, bell), py)).trace().real();
        const double den = (t * kron(kron(px, id4), py)).trace().real();
        bool degenerate = false;
        f.values(i) = ratio(num, den, degenerate);
        f.mask[i] = degenerate;
    }
    f.label = pt_negative_count(rho);
    return f;
}

FeatureTable cmw_feature_table(const std::vector<LabeledState> &states, const CmwConfig &config,
                               const SicPovm16 &sic, SwapConvention c, std::size_t workers) {
    FeatureTable table;
    const std::size_t n = states.size();
    table.index.resize(n);
    table.labels.resize(n);
    table.mask.resize(n);
    table.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(config.pairs.size()));
    parallel_for(n, workers, [&](std::size_t i) {
        FeatureVector f = cmw_features(states[i].rho, config, sic, c);
        table.index[i] = states[i].index;
        table.labels[i] = states[i].label.xi;
        table.values.row(static_cast<Eigen::Index>(i)) = f.values.transpose();
        table.mask[i] = std::move(f.mask);
    });
    return table;
}

void write_feature_csv(std::ostream &out, const FeatureTable &table) {
    out << "index,xi";
    for (std::size_t j = 0; j < table.k(); ++j) out << ",f_" << j;
    out << ",mask\n";
    for (std::size_t i = 0; i < table.size(); ++i) {
        out << table.index[i] << ',' << table.labels[i];
        for (std::size_t j = 0; j < table.k(); ++j)
            out << ',' << format_real(table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        out << ',';
        for (std::size_t j = 0; j < table.k(); ++j) out << (table.mask[i].empty() || !table.mask[i][j] ? '0' : '1');
        out << '\n';
    }
}

FeatureTable read_feature_csv(std::istream &in) {
    std::string line;
    if (!std::getline(in, line)) throw ParameterError("feature file: missing header");
    std::size_t columns = 1;
    for (char ch : line) columns += ch == ',' ? 1 : 0;
    if (columns < 4 || line.rfind("index,xi,", 0) != 0) throw ParameterError("feature file: bad header");
    const std::size_t k = columns - 3;

    FeatureTable table;
    std::vector<double> values;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream row(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(row, cell, ',')) cells.push_back(cell);
        if (cells.size() != columns)
            throw ParameterError("feature file: wrong column count on line " + std::to_string(line_no));
        try {
            table.index.push_back(std::stoull(cells[0]));
            table.labels.push_back(std::stoi(cells[1]));
            for (std::size_t j = 0; j < k; ++j) values.push_back(std::stod(cells[2 + j]));
        } catch (const std::exception &) {
            throw ParameterError("feature file: bad number on line " + std::to_string(line_no));
        }
        const std::string &mask = cells.back();
        if (mask.size() != k) throw ParameterError("feature file: mask length on line " + std::to_string(line_no));
        std::vector<bool> bits(k);
        for (std::size_t j = 0; j < k; ++j) bits[j] = mask[j] == '1';
        table.mask.push_back(std::move(bits));
    }
    table.values = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        values.data(), static_cast<Eigen::Index>(table.labels.size()), static_cast<Eigen::Index>(k));
    return table;
}

void write_feature_sidecar(std::ostream &out, const FeatureSidecar &sidecar) {
    nlohmann::json j{{"k", sidecar.k},
                     {"swap_convention", sidecar.swap_convention},
                     {"povm_hash", sidecar.povm_hash},
                     {"kind", sidecar.kind},
                     {"copies", sidecar.copies}};
    out << j.dump(2) << '\n';
}

FeatureSidecar read_feature_sidecar(std::istream &in) {
    try {
        const auto j = nlohmann::json::parse(in);
        FeatureSidecar s;
        s.k = j.at("k").get<std::size_t>();
        s.swap_convention = j.value("swap_convention", std::string());
        s.povm_hash = j.value("povm_hash", std::string());
        s.kind = j.value("kind", std::string("cmw"));
        s.copies = j.value("copies", std::size_t{1});
        return s;
    } catch (const nlohmann::json::exception &e) {
        throw ParameterError(std::string("feature sidecar: ") + e.what());
    }
}

}  // namespace npt
