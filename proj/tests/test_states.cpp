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

#include <set>
#include <sstream>

#include "doctest.h"
#include "npt/errors.hpp"
#include "npt/states.hpp"
#include "oracles.hpp"

using namespace npt;

namespace {

ComplexMatrix singlet_werner(double p) {
    ComplexVector psi = ComplexVector::Zero(8);
    psi(1) = 1.0 / std::sqrt(2.0);
    psi(4) = -1.0 / std::sqrt(2.0);
    return p * (psi * psi.adjoint()) + (1.0 - p) * ComplexMatrix::Identity(8, 8) / 8.0;
}

void check_valid_state(const DensityMatrix &rho) {
    const ComplexMatrix &m = rho.mat();
    CHECK(is_hermitian(m, 1e-12));
    CHECK(std::abs(m.trace() - 1.0) < 1e-12);
    CHECK(herm_eigvals(m)(0) >= -1e-12);
}

}  // namespace

TEST_CASE("Philox4x32-10 known-answer vectors") {
    using A4 = std::array<std::uint32_t, 4>;
    using A2 = std::array<std::uint32_t, 2>;
    CHECK(philox4x32(A4{0, 0, 0, 0}, A2{0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(philox4x32(A4{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, A2{0xffffffff, 0xffffffff}) ==
          A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(philox4x32(A4{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, A2{0xa4093822, 0x299f31d0}) ==
          A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("counter streams are reproducible and independent") {
    CounterRng a(99, 3), b(99, 3), c(99, 4), d(100, 3);
    bool differs_c = false, differs_d = false;
    for (int i = 0; i < 64; ++i) {
        const auto x = a();
        CHECK(x == b());
        differs_c |= x != c();
        differs_d |= x != d();
    }
    CHECK(differs_c);
    CHECK(differs_d);

    CounterRng u(1);
    double sum = 0, sum2 = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double z = u.normal();
        sum += z;
        sum2 += z * z;
    }
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(std::abs(sum2 / n - 1.0) < 0.02);
    for (int i = 0; i < 1000; ++i) {
        const double x = u.uniform_open0();
        CHECK(x > 0.0);
        CHECK(x <= 1.0);
        CHECK(u.below(7) < 7u);
    }
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 0) != derive_seed(2, 0));
}

TEST_CASE("DensityMatrix validation") {
    CHECK_NOTHROW(DensityMatrix(ComplexMatrix::Identity(8, 8) / 8.0));
    CHECK_THROWS_AS(DensityMatrix(ComplexMatrix::Identity(8, 8)), NumericalError);
    CHECK_THROWS_AS(DensityMatrix(ComplexMatrix::Identity(4, 4) / 4.0), DimensionError);
    ComplexMatrix neg = ComplexMatrix::Zero(8, 8);
    neg(0, 0) = 1.5;
    neg(1, 1) = -0.5;
    CHECK_THROWS_AS(DensityMatrix{neg}, NumericalError);
    ComplexMatrix nh = ComplexMatrix::Identity(8, 8) / 8.0;
    nh(0, 1) = 0.01;
    CHECK_THROWS_AS(DensityMatrix{nh}, NumericalError);
    CHECK(DensityMatrix(ComplexMatrix::Identity(8, 8) / 8.0).purity() == doctest::Approx(0.125));
}

TEST_CASE("labels and the cutoff rule") {
    CHECK(pt_negative_count(DensityMatrix(singlet_werner(1.0))).xi == 1);
    CHECK(pt_negative_count(DensityMatrix(ComplexMatrix::Identity(8, 8) / 8.0)).xi == 0);

    // Smallest PT eigenvalue of the Werner mixture is -p/2 + (1 - p)/8.
    const double target = -0.5e-8;
    const double p = (0.125 - target) / 0.625;
    DensityMatrix w(singlet_werner(p));
    CHECK(pt_spectrum(w)(0) == doctest::Approx(target).epsilon(1e-6));
    CHECK(pt_negative_count(w, 1e-8).xi == 0);
    CHECK(pt_negative_count(w, 1e-9).xi == 1);

    RealVector spec(8);
    spec << -0.5e-8, 0, 0, 0, 0.1, 0.2, 0.3, 0.4;
    CHECK(count_below(spec, 1e-8).xi == 0);
    spec(0) = -2e-8;
    CHECK(count_below(spec, 1e-8).xi == 1);
}

TEST_CASE("Sturm labels agree with the sorted PT spectrum") {
    EnsembleSpec spec;
    spec.seed = 17;
    for (auto kind : {EnsembleKind::hilbert_schmidt, EnsembleKind::bures, EnsembleKind::mixture}) {
        spec.kind = kind;
        spec.mixture_n = 3;
        for (std::uint64_t i = 0; i < 500; ++i) {
            DensityMatrix rho = sample_state(spec, i);
            CHECK(pt_negative_count(rho).xi == count_below(pt_spectrum(rho), kDefaultCutoff).xi);
        }
    }
}

TEST_CASE("ensemble samplers produce valid states") {
    EnsembleSpec spec;
    spec.seed = 5;
    spec.mixture_n = 4;
    for (auto kind : {EnsembleKind::haar_pure, EnsembleKind::mixture, EnsembleKind::hilbert_schmidt,
                      EnsembleKind::bures, EnsembleKind::product, EnsembleKind::mixture_uniform}) {
        spec.kind = kind;
        for (std::uint64_t i = 0; i < 200; ++i) {
            DensityMatrix rho = sample_state(spec, i);
            check_valid_state(rho);
            CHECK(DensityMatrix(rho.mat()).mat() == rho.mat());
        }
    }
}

TEST_CASE("haar pure states") {
    EnsembleSpec spec{EnsembleKind::haar_pure};
    for (std::uint64_t i = 0; i < 200; ++i) {
        DensityMatrix rho = sample_state(spec, i);
        CHECK(std::abs(rho.purity() - 1.0) < 1e-12);
        CHECK(pt_negative_count(rho).xi == 1);
        RealVector ra = herm_eigvals(partial_trace(rho.mat(), rho.dims(), Side::A));
        CHECK(ra.size() == 2);
        CHECK(std::abs(ra.sum() - 1.0) < 1e-12);
    }
    CounterRng rng(8);
    ComplexMatrix u = haar_unitary(6, rng);
    CHECK(oracle::max_abs_diff(u.adjoint() * u, ComplexMatrix::Identity(6, 6)) < 1e-13);
}

TEST_CASE("product states are PPT and factorize") {
    for (std::uint64_t i = 0; i < 300; ++i) {
        CounterRng rng(3, i);
        DensityMatrix rho = product_random(rng);
        CHECK(pt_negative_count(rho).xi == 0);
        ComplexMatrix ra = partial_trace(rho.mat(), rho.dims(), Side::A);
        ComplexMatrix rb = partial_trace(rho.mat(), rho.dims(), Side::B);
        CHECK(oracle::max_abs_diff(kron(ra, rb), rho.mat()) < 1e-12);
        const double pa = (ra * ra).trace().real(), pb = (rb * rb).trace().real();
        CHECK(std::abs(rho.purity() - pa * pb) < 1e-12);
    }
}

TEST_CASE("mixture extremes") {
    EnsembleSpec spec{EnsembleKind::mixture};
    spec.seed = 21;
    spec.mixture_n = 1;
    for (std::uint64_t i = 0; i < 500; ++i) CHECK(pt_negative_count(sample_state(spec, i)).xi == 1);
    spec.mixture_n = 2;
    for (std::uint64_t i = 0; i < 500; ++i) CHECK(pt_negative_count(sample_state(spec, i)).xi == 2);
    CounterRng rng(1);
    CHECK_THROWS_AS(mixture_state(0, rng), ParameterError);
}

TEST_CASE("mixture purity decreases with the number of terms") {
    EnsembleSpec spec{EnsembleKind::mixture};
    double prev = 2.0;
    for (std::size_t n = 1; n <= 15; ++n) {
        spec.mixture_n = n;
        double mean = 0;
        for (std::uint64_t i = 0; i < 400; ++i) mean += sample_state(spec, i).purity();
        mean /= 400;
        CHECK(mean < prev);
        prev = mean;
    }
}

TEST_CASE("sample streams are deterministic") {
    EnsembleSpec spec{EnsembleKind::bures};
    spec.seed = 1234;
    CHECK(sample_state(spec, 7).mat() == sample_state(spec, 7).mat());
    CHECK(sample_state(spec, 7).mat() != sample_state(spec, 8).mat());
    EnsembleSpec other = spec;
    other.seed = 1235;
    CHECK(sample_state(spec, 7).mat() != sample_state(other, 7).mat());
}

TEST_CASE("ensemble names") {
    for (auto kind : {EnsembleKind::haar_pure, EnsembleKind::mixture, EnsembleKind::hilbert_schmidt,
                      EnsembleKind::bures, EnsembleKind::product, EnsembleKind::mixture_uniform})
        CHECK(parse_ensemble(ensemble_name(kind)) == kind);
    CHECK(parse_ensemble("haar") == EnsembleKind::haar_pure);
    CHECK(parse_ensemble("hilbert-schmidt") == EnsembleKind::hilbert_schmidt);
    CHECK_THROWS_AS(parse_ensemble("ginibre"), ParameterError);
    EnsembleSpec bad;
    bad.cutoff = 0.0;
    CHECK_THROWS_AS(validate(bad), ParameterError);
}

TEST_CASE("ensemble statistics are worker independent") {
    EnsembleSpec spec{EnsembleKind::hilbert_schmidt};
    spec.seed = 3;
    EnsembleStats one = ensemble_stats(spec, 4000, 1);
    EnsembleStats many = ensemble_stats(spec, 4000, 3);
    CHECK(one.counts == many.counts);
    double total = 0;
    for (int xi = 0; xi <= 3; ++xi) total += one.probability(xi);
    CHECK(total == doctest::Approx(1.0));
    CHECK(one.above_bound == 0);
    CHECK(one.probability(1) == doctest::Approx(0.648).epsilon(0.05));
    CHECK(one.standard_error(1) ==
          doctest::Approx(std::sqrt(one.probability(1) * (1 - one.probability(1)) / 4000.0)));

    spec.kind = EnsembleKind::haar_pure;
    EnsembleStats pure = ensemble_stats(spec, 2000);
    CHECK(pure.counts[1] == 2000);
}

TEST_CASE("transition samples and sweep") {
    CounterRng rng(4);
    CHECK(transition_sample(1.0, rng).label.xi == 1);
    for (int i = 0; i < 200; ++i) {
        CounterRng r(4, i);
        auto s = transition_sample(0.5, r);
        CHECK(s.label.xi == 2);
        REQUIRE(s.second_negative.has_value());
        CHECK(*s.second_negative < 0.0);
    }
    CHECK_THROWS_AS(transition_sample(1.5, rng), ParameterError);

    auto grid = default_transition_grid();
    CHECK(grid.size() == 200);
    CHECK(grid.front() == 0.5);
    CHECK(grid.back() == 1.0);

    std::vector<double> alphas{0.5, 0.9, 0.99, 0.999};
    auto rows = transition_sweep(alphas, 300, kDefaultCutoff, 9, 2);
    REQUIRE(rows.size() == alphas.size());
    double prev = -1.0;
    for (const auto &row : rows) {
        CHECK(row.p[0] + row.p[1] + row.p[2] + row.p[3] == doctest::Approx(1.0));
        CHECK(row.mean_second > prev);
        prev = row.mean_second;
    }
    CHECK(rows == transition_sweep(alphas, 300, kDefaultCutoff, 9, 1));
    CHECK_THROWS_AS(transition_sweep({}, 10, kDefaultCutoff, 0), ParameterError);
}

TEST_CASE("balanced datasets") {
    auto ds = balanced_dataset({1, 2}, 40, GeneratorPolicy::hilbert_schmidt(), 77, kDefaultCutoff,
                               kDefaultAttemptBudget, 2);
    REQUIRE(ds.states.size() == 80);
    std::array<int, 4> have{};
    for (const auto &s : ds.states) {
        ++have[s.label.xi];
        CHECK(pt_negative_count(s.rho, kDefaultCutoff).xi == s.label.xi);
        CHECK(s.rho.mat() == sample_state(s.spec, s.index).mat());
    }
    CHECK(have[1] == 40);
    CHECK(have[2] == 40);

    auto again = balanced_dataset({1, 2}, 40, GeneratorPolicy::hilbert_schmidt(), 77, kDefaultCutoff,
                                  kDefaultAttemptBudget, 1);
    REQUIRE(again.states.size() == ds.states.size());
    for (std::size_t i = 0; i < ds.states.size(); ++i) CHECK(again.states[i].index == ds.states[i].index);

    auto mix = balanced_dataset({1, 2}, 10, GeneratorPolicy::mixture_uniform(), 5);
    CHECK(mix.states.size() == 20);

    CHECK_THROWS_AS(balanced_dataset({3}, 1, GeneratorPolicy::hilbert_schmidt(), 1, kDefaultCutoff, 20000),
                    UnreachableClassError);
    CHECK_THROWS_AS(balanced_dataset({4}, 1, GeneratorPolicy::hilbert_schmidt(), 1), UnreachableClassError);
    CHECK_THROWS_AS(balanced_dataset({}, 1, GeneratorPolicy::hilbert_schmidt(), 1), ParameterError);
}

TEST_CASE("rejection count for xi=0 under the HS policy") {
    // P(xi=0) ~ 0.00125, so filling 40 states takes ~32000 draws.
    auto ds = balanced_dataset({0}, 40, GeneratorPolicy::hilbert_schmidt(), 2024);
    const double per_state = double(ds.filled_at[0]) / 40.0;
    CHECK(per_state > 400);
    CHECK(per_state < 1600);
}

TEST_CASE("dataset CSV and PTCM round trips") {
    EnsembleSpec spec{EnsembleKind::bures};
    spec.seed = 8;
    std::vector<LabeledState> states;
    for (std::uint64_t i = 0; i < 5; ++i) states.push_back(make_labeled(spec, i));

    std::stringstream csv;
    write_dataset_csv(csv, states);
    std::string header;
    std::getline(std::stringstream(csv.str()), header);
    CHECK(header.rfind("index,xi,re_0_0,im_0_0,re_0_1", 0) == 0);
    CHECK(header.substr(header.size() - 13) == "re_7_7,im_7_7");
    auto back = read_dataset_csv(csv);
    REQUIRE(back.size() == states.size());
    for (std::size_t i = 0; i < states.size(); ++i) {
        CHECK(back[i].rho.mat() == states[i].rho.mat());
        CHECK(back[i].label == states[i].label);
        CHECK(back[i].index == states[i].index);
    }

    std::stringstream bin;
    write_dataset_ptcm(bin, states);
    auto mats = read_dataset_ptcm(bin, states.size());
    for (std::size_t i = 0; i < states.size(); ++i) CHECK(mats[i] == states[i].rho.mat());

    std::stringstream bad("index,xi\n0,1,2\n");
    CHECK_THROWS_AS(read_dataset_csv(bad), ParameterError);
    CHECK(format_real(0.1) == "0.10000000000000001");
}
