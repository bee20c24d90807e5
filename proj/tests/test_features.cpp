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

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "npt/features.hpp"
#include "oracles.hpp"

using namespace npt;

namespace {

// P_xy straight from the definition in the natural (A1, B1, A2, B2) order:
// the measurement operator is assembled entry by entry.
double cmw_by_definition(const ComplexMatrix &rho, const ComplexMatrix &s, const Eigen::Vector4cd &vx,
                         const Eigen::Vector4cd &vy) {
    const ComplexMatrix t = kron(s.transpose() * rho * s, rho);
    const double r2 = 1.0 / std::sqrt(2.0);
    auto singlet = [&](int a1, int a2) { return a1 == a2 ? 0.0 : (a1 == 0 ? r2 : -r2); };
    Complex num = 0, den = 0;
    for (int a1 = 0; a1 < 2; ++a1)
        for (int b1 = 0; b1 < 4; ++b1)
            for (int a2 = 0; a2 < 2; ++a2)
                for (int b2 = 0; b2 < 4; ++b2)
                    for (int c1 = 0; c1 < 2; ++c1)
                        for (int d1 = 0; d1 < 4; ++d1)
                            for (int c2 = 0; c2 < 2; ++c2)
                                for (int d2 = 0; d2 < 4; ++d2) {
                                    const Complex px = vx(b1) * std::conj(vx(d1));
                                    const Complex py = vy(b2) * std::conj(vy(d2));
                                    const double bell = singlet(a1, a2) * singlet(c1, c2);
                                    const double id = (a1 == c1 && a2 == c2) ? 1.0 : 0.0;
                                    const int row = ((a1 * 4 + b1) * 2 + a2) * 4 + b2;
                                    const int col = ((c1 * 4 + d1) * 2 + c2) * 4 + d2;
                                    // Tr[T O] = sum_{row,col} T[col,row] O[row,col]
                                    num += t(col, row) * px * py * bell;
                                    den += t(col, row) * px * py * id;
                                }
    return num.real() / den.real();
}

// |i>|b1 b2> -> |b1>|i b2>, written out as a permutation of basis labels.
ComplexMatrix oracle_swap_matrix() {
    ComplexMatrix s = ComplexMatrix::Zero(8, 8);
    for (int from = 0; from < 8; ++from) {
        const int i = from >> 2, b1 = (from >> 1) & 1, b2 = from & 1;
        s((b1 << 2) | (i << 1) | b2, from) = 1.0;
    }
    return s;
}

}  // namespace

TEST_CASE("SIC-POVM invariants") {
    const SicPovm16 &sic = sic_povm_d4();
    for (const auto &v : sic.vectors) CHECK(std::abs(v.norm() - 1.0) < 1e-12);
    int pairs = 0;
    for (int i = 0; i < 16; ++i) {
        for (int j = i + 1; j < 16; ++j) {
            CHECK(std::abs(std::norm(sic.vectors[i].dot(sic.vectors[j])) - 0.2) < 1e-9);
            ++pairs;
        }
    }
    CHECK(pairs == 120);
    Eigen::Matrix4cd frame = Eigen::Matrix4cd::Zero();
    for (const auto &v : sic.vectors) frame += v * v.adjoint() / 4.0;
    CHECK((frame - Eigen::Matrix4cd::Identity()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK_NOTHROW(verify_sic(sic));
    CHECK(povm_hash(build_sic_povm_d4()) == povm_hash(sic));
    CHECK(povm_hash(sic).size() == 16);
}

TEST_CASE("SIC cache round trip and verification") {
    const auto dir = std::filesystem::temp_directory_path() / "npt_test_sic";
    std::filesystem::remove_all(dir);
    const auto path = dir / "sic.json";
    SicPovm16 built = load_or_build_sic(path);
    CHECK(std::filesystem::exists(path));
    SicPovm16 loaded = load_or_build_sic(path);
    for (int i = 0; i < 16; ++i) CHECK(loaded.vectors[i] == built.vectors[i]);

    SicPovm16 broken = built;
    broken.vectors[3](0) += 0.01;
    save_sic(path, broken);
    CHECK_THROWS_AS(load_sic(path), NumericalError);
    std::ofstream(path) << "{\"vectors\": 3}";
    CHECK_THROWS_AS(load_sic(path), ParameterError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("singlet projector") {
    ComplexMatrix p = bell_singlet_projector();
    CHECK(std::abs(p.trace() - 1.0) < 1e-14);
    CHECK(oracle::max_abs_diff(p * p, p) < 1e-14);
    CHECK(p.col(0).norm() == 0.0);
    CHECK(p.col(3).norm() == 0.0);
    CHECK(std::abs((p * ComplexMatrix::Identity(4, 4) / 4.0).trace() - 0.25) < 1e-15);
}

TEST_CASE("swap operator") {
    ComplexMatrix s = swap_operator(SwapConvention::virtual_swap);
    CHECK(s == s.transpose());
    CHECK(s * s == ComplexMatrix::Identity(8, 8));
    // |1>_A |0 1>_B (index 4 + 1) -> |0>_A |1 1>_B (index 3)
    CHECK(s(3, 5) == 1.0);
    CHECK(s(0, 0) == 1.0);
    CHECK(s(7, 7) == 1.0);
    CHECK(swap_operator(SwapConvention::identity) == ComplexMatrix::Identity(8, 8));
    CHECK(parse_swap_convention(swap_convention_name(SwapConvention::identity)) == SwapConvention::identity);
    CHECK_THROWS_AS(parse_swap_convention("full"), ParameterError);
}

TEST_CASE("measurement configurations") {
    CHECK(cmw_config(1).pairs == std::vector<std::pair<int, int>>{{0, 0}});
    for (std::size_t k : {1, 8, 16, 32, 64, 136}) {
        CmwConfig c = cmw_config(k);
        CHECK(c.k == k);
        CHECK(c.pairs.size() == k);
        std::set<std::pair<int, int>> unordered;
        for (auto [x, y] : c.pairs) {
            CHECK(x >= 0);
            CHECK(y < 16);
            unordered.insert({std::min(x, y), std::max(x, y)});
        }
        CHECK(unordered.size() == k);
    }
    auto has = [](const CmwConfig &c, int x, int y) {
        return std::find(c.pairs.begin(), c.pairs.end(), std::pair{x, y}) != c.pairs.end();
    };
    CHECK(has(cmw_config(32), 0, 15));
    CHECK(has(cmw_config(32), 14, 15));
    CmwConfig c64 = cmw_config(64);
    CHECK(has(c64, 13, 15));
    CHECK_FALSE(has(c64, 14, 16));
    CHECK(has(c64, 12, 15));
    CHECK(has(c64, 4, 8));
    CHECK_FALSE(has(c64, 5, 9));

    const std::vector<std::size_t> ks{8, 16, 32, 64, 136};
    for (std::size_t i = 0; i + 1 < ks.size(); ++i) {
        CmwConfig small = cmw_config(ks[i]), big = cmw_config(ks[i + 1]);
        for (std::size_t j = 0; j < small.pairs.size(); ++j) CHECK(small.pairs[j] == big.pairs[j]);
    }
    CHECK_THROWS_AS(cmw_config(10), ParameterError);
}

TEST_CASE("two-copy operator") {
    CHECK(oracle::max_abs_diff(rho_T(DensityMatrix(ComplexMatrix::Identity(8, 8) / 8.0)),
                               ComplexMatrix::Identity(64, 64) / 64.0) < 1e-17);
    EnsembleSpec spec{EnsembleKind::hilbert_schmidt};
    spec.seed = 12;
    for (std::uint64_t i = 0; i < 1000; ++i) {
        ComplexMatrix t = rho_T(sample_state(spec, i));
        CHECK(std::abs(t.trace() - 1.0) < 1e-12);
        CHECK(is_hermitian(t, 1e-15));
        CHECK(herm_eigvals(t)(0) >= -1e-9);
    }
}

TEST_CASE("CMW features on the maximally mixed state") {
    DensityMatrix mixed(ComplexMatrix::Identity(8, 8) / 8.0);
    for (auto conv : {SwapConvention::virtual_swap, SwapConvention::identity}) {
        FeatureVector f = cmw_features(mixed, cmw_config(136), sic_povm_d4(), conv);
        CHECK((f.values.array() - 0.25).abs().maxCoeff() < 1e-14);
        FeatureVector g = cmw_features_reference(mixed, cmw_config(136), sic_povm_d4(), conv);
        CHECK((g.values.array() - 0.25).abs().maxCoeff() < 1e-14);
    }
}

TEST_CASE("fast, reference and index-loop CMW routes agree") {
    const SicPovm16 &sic = sic_povm_d4();
    const CmwConfig config = cmw_config(136);
    EnsembleSpec spec{EnsembleKind::bures};
    spec.seed = 33;
    for (auto conv : {SwapConvention::virtual_swap, SwapConvention::identity}) {
        const ComplexMatrix s = conv == SwapConvention::virtual_swap ? oracle_swap_matrix() : ComplexMatrix::Identity(8, 8);
        for (std::uint64_t i = 0; i < 4; ++i) {
            DensityMatrix rho = sample_state(spec, i);
            FeatureVector fast = cmw_features(rho, config, sic, conv);
            FeatureVector ref = cmw_features_reference(rho, config, sic, conv);
            CHECK((fast.values - ref.values).cwiseAbs().maxCoeff() < 1e-12);
            for (std::size_t j = 0; j < config.pairs.size(); j += 9) {
                const auto [x, y] = config.pairs[j];
                CHECK(std::abs(fast.values(j) - cmw_by_definition(rho.mat(), s, sic.vectors[x], sic.vectors[y])) <
                      1e-12);
            }
        }
    }
}

TEST_CASE("the swap convention changes the features") {
    EnsembleSpec spec{EnsembleKind::hilbert_schmidt};
    DensityMatrix rho = sample_state(spec, 0);
    FeatureVector a = cmw_features(rho, cmw_config(16), sic_povm_d4(), SwapConvention::virtual_swap);
    FeatureVector b = cmw_features(rho, cmw_config(16), sic_povm_d4(), SwapConvention::identity);
    CHECK((a.values - b.values).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("CMW features are probabilities, nested and deterministic") {
    const SicPovm16 &sic = sic_povm_d4();
    const CmwConfig c136 = cmw_config(136), c8 = cmw_config(8), c64 = cmw_config(64);
    EnsembleSpec spec{EnsembleKind::hilbert_schmidt};
    spec.seed = 44;
    for (std::uint64_t i = 0; i < 10000; ++i) {
        DensityMatrix rho = sample_state(spec, i);
        FeatureVector f = cmw_features(rho, c136, sic);
        CHECK(f.values.minCoeff() >= 0.0);
        CHECK(f.values.maxCoeff() <= 1.0);
        if (i % 500 == 0) {
            CHECK(cmw_features(rho, c8, sic).values == f.values.head(8));
            CHECK(cmw_features(rho, c64, sic).values == f.values.head(64));
            CHECK(cmw_features(rho, c136, sic).values == f.values);
        }
    }
}

TEST_CASE("degenerate denominators are masked") {
    const SicPovm16 &sic = sic_povm_d4();
    // Bob's state orthogonal to psi_0: the (0, 0) denominator vanishes.
    Eigen::Vector4cd phi = Eigen::Vector4cd::Random();
    phi -= sic.vectors[0] * sic.vectors[0].dot(phi);
    phi.normalize();
    ComplexMatrix rb = phi * phi.adjoint();
    DensityMatrix rho(kron(ComplexMatrix::Identity(2, 2) / 2.0, rb));
    FeatureVector f = cmw_features(rho, cmw_config(8), sic, SwapConvention::identity);
    CHECK(f.mask[0]);
    CHECK(f.values(0) == 0.0);
    for (std::size_t j = 1; j < 8; ++j) CHECK_FALSE(f.mask[j]);
    FeatureVector g = cmw_features_reference(rho, cmw_config(8), sic, SwapConvention::identity);
    CHECK(g.mask[0]);
}

TEST_CASE("feature tables and files") {
    EnsembleSpec spec{EnsembleKind::hilbert_schmidt};
    spec.seed = 55;
    std::vector<LabeledState> states;
    for (std::uint64_t i = 0; i < 10; ++i) states.push_back(make_labeled(spec, i));
    FeatureTable t = cmw_feature_table(states, cmw_config(136), sic_povm_d4(), SwapConvention::virtual_swap, 2);
    CHECK(t.size() == 10);
    CHECK(t.k() == 136);
    CHECK(t.values.row(3).transpose() == cmw_features(states[3].rho, cmw_config(136), sic_povm_d4()).values);

    std::stringstream csv;
    write_feature_csv(csv, t);
    std::string header;
    std::getline(std::stringstream(csv.str()), header);
    CHECK(header.rfind("index,xi,f_0,f_1,", 0) == 0);
    CHECK(header.substr(header.size() - 17) == ",f_134,f_135,mask");
    FeatureTable back = read_feature_csv(csv);
    CHECK(back.values == t.values);
    CHECK(back.labels == t.labels);
    CHECK(back.index == t.index);
    CHECK(back.mask == t.mask);

    std::stringstream js;
    write_feature_sidecar(js, {136, "virtual_swap", povm_hash(sic_povm_d4())});
    FeatureSidecar sc = read_feature_sidecar(js);
    CHECK(sc.k == 136);
    CHECK(sc.swap_convention == "virtual_swap");
    CHECK(sc.povm_hash == povm_hash(sic_povm_d4()));
}
