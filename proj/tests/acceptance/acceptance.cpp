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

// Acceptance suite. `acceptance` runs every criterion; `acceptance 4 7` runs a
// selection. Each criterion prints one PASS/FAIL line followed by the measured
// quantities. The exit status is non-zero if any selected criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "../gradcheck.hpp"
#include "../oracles.hpp"
#include "npt/analysis.hpp"
#include "npt/baselines.hpp"
#include "npt/features.hpp"
#include "npt/learn.hpp"
#include "npt/states.hpp"

using namespace npt;

namespace {

constexpr std::uint64_t kSeed = 20240601;

struct Outcome {
    bool pass = false;
    std::vector<std::string> details;

    void note(const std::string &line) { details.push_back(line); }
    // Records a sub-check and folds it into the verdict.
    bool require(bool ok, const std::string &what) {
        details.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
        return ok;
    }
};

std::string fmt(const char *pattern, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, pattern, args...);
    return buf;
}

struct MeanStd {
    double mean = 0.0, std = 0.0;
};

MeanStd mean_std(const std::vector<double> &v) {
    MeanStd m;
    for (double x : v) m.mean += x;
    m.mean /= double(v.size());
    for (double x : v) m.std += (x - m.mean) * (x - m.mean);
    m.std = v.size() > 1 ? std::sqrt(m.std / double(v.size() - 1)) : 0.0;
    return m;
}

// First `train_per_class` states of each class go to training, the rest to test.
void split_per_class(const std::vector<LabeledState> &states, std::size_t train_per_class,
                     std::vector<LabeledState> &train_set, std::vector<LabeledState> &test_set) {
    std::map<int, std::size_t> seen;
    for (const auto &s : states) {
        if (seen[s.label.xi]++ < train_per_class)
            train_set.push_back(s);
        else
            test_set.push_back(s);
    }
}

std::vector<LabeledState> relabeled(std::vector<LabeledState> states, int label) {
    for (auto &s : states) s.label.xi = label;
    return states;
}

// ---------------------------------------------------------------------------

Outcome ensemble_table() {
    Outcome o;
    const std::size_t n = 100000;
    auto stats = [&](EnsembleKind kind) {
        EnsembleSpec spec{kind};
        spec.seed = kSeed;
        return ensemble_stats(spec, n);
    };
    const EnsembleStats haar = stats(EnsembleKind::haar_pure);
    const EnsembleStats hs = stats(EnsembleKind::hilbert_schmidt);
    const EnsembleStats bures = stats(EnsembleKind::bures);
    auto within = [&](const EnsembleStats &s, const char *name, int xi, double target, double tol) {
        const double p = s.probability(xi);
        return o.require(std::abs(p - target) <= tol,
                         fmt("%s P(xi=%d) = %.5f, target %.5f +- %.4f", name, xi, p, target, tol));
    };
    bool ok = o.require(haar.counts[1] == n, fmt("haar-pure P(xi=1) = %.6f, target 1 exactly", haar.probability(1)));
    ok &= within(hs, "hs", 1, 0.648, 0.006);
    ok &= within(hs, "hs", 2, 0.350, 0.006);
    ok &= within(hs, "hs", 0, 0.00125, 0.0005);
    ok &= within(bures, "bures", 2, 0.755, 0.006);
    ok &= within(bures, "bures", 1, 0.245, 0.006);
    o.pass = ok;
    return o;
}

Outcome rana_bound() {
    Outcome o;
    struct Batch {
        EnsembleKind kind;
        std::size_t mixture_n;
        std::size_t count;
    };
    std::vector<Batch> batches{{EnsembleKind::haar_pure, 1, 150000},
                               {EnsembleKind::hilbert_schmidt, 1, 250000},
                               {EnsembleKind::bures, 1, 150000},
                               {EnsembleKind::product, 1, 100000},
                               {EnsembleKind::mixture_uniform, 15, 50000}};
    for (std::size_t m = 1; m <= 15; ++m) batches.push_back({EnsembleKind::mixture, m, 20000});
    std::size_t total = 0, above = 0, xi3 = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
        EnsembleSpec spec{batches[b].kind, batches[b].mixture_n, derive_seed(kSeed, b)};
        const EnsembleStats s = ensemble_stats(spec, batches[b].count);
        total += s.n;
        above += s.above_bound;
        xi3 += s.counts[3];
    }
    o.note(fmt("%zu labeled states across %zu ensemble settings; %zu with xi = 3", total, batches.size(), xi3));
    o.pass = o.require(total >= 1000000, "at least 10^6 states") & o.require(above == 0, fmt("xi > 3: %zu", above));
    return o;
}

Outcome mixture_extremes() {
    Outcome o;
    bool ok = true;
    for (std::size_t m : {1, 2}) {
        EnsembleSpec spec{EnsembleKind::mixture, m, kSeed};
        const EnsembleStats s = ensemble_stats(spec, 5000);
        const int xi = int(m);
        ok &= o.require(s.counts[std::size_t(xi)] == 5000,
                        fmt("n = %zu: %zu of 5000 states have xi = %d", m, s.counts[std::size_t(xi)], xi));
    }
    o.pass = ok;
    return o;
}

Outcome transition() {
    Outcome o;
    const std::size_t samples = 20000;
    const double gap8 = transition_crossing(samples, 1e-8, kSeed);
    const double gap6 = transition_crossing(samples, 1e-6, kSeed);
    o.note(fmt("alpha crossing at cutoff 1e-8: 1 - alpha = %.3e (alpha = %.10f)", gap8, 1.0 - gap8));
    o.note(fmt("alpha crossing at cutoff 1e-6: 1 - alpha = %.3e", gap6));
    o.pass = o.require(gap8 >= 2e-8 && gap8 <= 3e-7, "1 - alpha in [2e-8, 3e-7]") &
             o.require(gap6 > gap8, "larger cutoff moves the crossing to smaller alpha");
    return o;
}

Outcome sic() {
    Outcome o;
    const SicPovm16 &s = sic_povm_d4();
    double worst = 0.0;
    std::size_t pairs = 0;
    for (int i = 0; i < 16; ++i)
        for (int j = i + 1; j < 16; ++j) {
            worst = std::max(worst, std::abs(std::norm(s.vectors[i].dot(s.vectors[j])) - 0.2));
            ++pairs;
        }
    const double frame = sic_frame_error(s);
    o.pass = o.require(pairs == 120 && worst <= 1e-9, fmt("max |overlap^2 - 0.2| over %zu pairs = %.2e", pairs, worst)) &
             o.require(frame <= 1e-9, fmt("resolution of identity error = %.2e", frame));
    return o;
}

Outcome gradients() {
    Outcome o;
    gradcheck::Report feature, network, chain;
    for (std::uint64_t i = 0; i < 100; ++i) {
        feature.merge(gradcheck::feature_layer(i));
        network.merge(gradcheck::network(i));
        chain.merge(gradcheck::observable_chain(i));
    }
    auto line = [&](const gradcheck::Report &r, const char *name) {
        return o.require(r.max_relative_error <= 1e-5,
                         fmt("%s: %zu probes over 100 instances, max relative error %.2e", name, r.checked,
                             r.max_relative_error));
    };
    o.pass = line(feature, "feature layer") & line(network, "network") & line(chain, "observables through network");
    return o;
}

Outcome desk_classification() {
    Outcome o;
    const std::vector<int> classes{0, 1, 2};
    const BalancedDataset ds = balanced_dataset({0, 1, 2}, 12500, GeneratorPolicy::hilbert_schmidt(), kSeed);
    std::vector<LabeledState> train_states, test_states;
    split_per_class(ds.states, 10000, train_states, test_states);
    o.note(fmt("%zu training / %zu test states from %llu draws", train_states.size(), test_states.size(),
               static_cast<unsigned long long>(ds.draws)));
    const Samples learned_train = samples_from_states(train_states, classes);
    const Samples learned_test = samples_from_states(test_states, classes);
    const std::vector<std::size_t> ks{16, 32, 64};
    const std::size_t repeats = 10;
    std::map<std::pair<std::size_t, int>, std::vector<Evaluation>> runs;
    for (std::size_t k : ks) {
        const CmwConfig cfg = cmw_config(k);
        const Samples cmw_train = samples_from_features(cmw_feature_table(train_states, cfg, sic_povm_d4()), classes);
        const Samples cmw_test = samples_from_features(cmw_feature_table(test_states, cfg, sic_povm_d4()), classes);
        for (int learned = 0; learned < 2; ++learned)
            for (std::size_t r = 0; r < repeats; ++r) {
                TrainConfig config;
                config.kind = learned ? ModelKind::ann_learned : ModelKind::ann_cmw;
                config.k = k;
                config.seed = derive_seed(kSeed, r);
                const TrainResult result = train(learned ? learned_train : cmw_train, config);
                runs[{k, learned}].push_back(evaluate(result.model, learned ? learned_test : cmw_test));
            }
    }
    std::map<std::pair<std::size_t, int>, MeanStd> summary;
    for (auto &[key, evals] : runs) {
        std::vector<double> f1;
        std::array<std::vector<double>, 3> pc;
        for (const auto &e : evals) {
            f1.push_back(e.macro_f1);
            for (int c = 0; c < 3; ++c) pc[std::size_t(c)].push_back(e.per_class_f1[std::size_t(c)]);
        }
        summary[key] = mean_std(f1);
        o.note(fmt("%s k=%zu: Macro-F1 %.4f +- %.4f; per-class F1 %.3f %.3f %.3f",
                   key.second ? "ann-learned" : "ann-cmw", key.first, summary[key].mean, summary[key].std,
                   mean_std(pc[0]).mean, mean_std(pc[1]).mean, mean_std(pc[2]).mean));
    }
    bool ok = o.require(summary[{64, 1}].mean >= 0.60, fmt("(a) ann-learned k=64 mean %.4f >= 0.60", summary[{64, 1}].mean));
    for (std::size_t k : ks) {
        const double gap = summary[{k, 1}].mean - summary[{k, 0}].mean;
        ok &= o.require(gap >= 0.03, fmt("(b) k=%zu: ann-learned - ann-cmw = %+.4f >= 0.03", k, gap));
    }
    std::size_t ordered = 0;
    for (const auto &e : runs[{64, 1}])
        ordered += e.per_class_f1[0] > e.per_class_f1[2] && e.per_class_f1[2] > e.per_class_f1[1];
    ok &= o.require(ordered >= 8, fmt("(c) F1(NPT0) > F1(NPT2) > F1(NPT1) in %zu of 10 repeats", ordered));
    for (int learned = 0; learned < 2; ++learned)
        for (std::size_t i = 0; i + 1 < ks.size(); ++i) {
            const MeanStd lo = summary[{ks[i], learned}], hi = summary[{ks[i + 1], learned}];
            const double slack = std::max(lo.std, hi.std);
            ok &= o.require(hi.mean >= lo.mean - slack,
                            fmt("(d) %s: k=%zu %.4f -> k=%zu %.4f within 1 std (%.4f)",
                                learned ? "ann-learned" : "ann-cmw", ks[i], lo.mean, ks[i + 1], hi.mean, slack));
        }
    o.pass = ok;
    return o;
}

double accuracy_of(const TrainConfig &config, const Samples &train_set, const Samples &test_set,
                   std::size_t *epochs = nullptr) {
    const TrainResult result = train(train_set, config);
    if (epochs) *epochs = result.log.size();
    return evaluate(result.model, test_set).accuracy;
}

Outcome binary_tasks() {
    Outcome o;
    const std::vector<int> binary{0, 1};
    const std::size_t train_n = 5000, test_n = 1250;

    // Product states (label 0) against entangled Hilbert-Schmidt states (label 1).
    std::vector<LabeledState> prod_train, prod_test, npt_train, npt_test;
    {
        EnsembleSpec product{EnsembleKind::product};
        product.seed = derive_seed(kSeed, 1);
        EnsembleSpec hs{EnsembleKind::hilbert_schmidt};
        hs.seed = derive_seed(kSeed, 2);
        for (std::uint64_t i = 0; i < train_n + test_n; ++i)
            (i < train_n ? prod_train : prod_test).push_back(make_labeled(product, i));
        for (std::uint64_t i = 0; npt_train.size() + npt_test.size() < train_n + test_n; ++i) {
            LabeledState s = make_labeled(hs, i);
            if (s.label.xi == 0) continue;
            (npt_train.size() < train_n ? npt_train : npt_test).push_back(std::move(s));
        }
    }
    auto merge = [](std::vector<LabeledState> a, const std::vector<LabeledState> &b) {
        a.insert(a.end(), b.begin(), b.end());
        return a;
    };
    TrainConfig quick;
    quick.kind = ModelKind::ann_learned;
    quick.k = 64;
    quick.classes = binary;
    quick.epochs = 20;
    quick.patience = 20;
    quick.seed = kSeed;
    std::size_t epochs = 0;
    const double product_acc =
        accuracy_of(quick, samples_from_states(merge(relabeled(prod_train, 0), relabeled(npt_train, 1)), binary),
                    samples_from_states(merge(relabeled(prod_test, 0), relabeled(npt_test, 1)), binary), &epochs);

    // NPT1 against NPT2 at the scale of the three-class task.
    const BalancedDataset ds = balanced_dataset({1, 2}, 12500, GeneratorPolicy::hilbert_schmidt(), kSeed);
    std::vector<LabeledState> tr, te;
    split_per_class(ds.states, 10000, tr, te);
    for (auto &s : tr) s.label.xi -= 1;
    for (auto &s : te) s.label.xi -= 1;
    TrainConfig full = quick;
    full.epochs = 100;
    full.patience = 10;
    const double npt_acc = accuracy_of(full, samples_from_states(tr, binary), samples_from_states(te, binary));

    o.pass = o.require(product_acc >= 0.90, fmt("product vs NPT: test accuracy %.4f >= 0.90 after %zu epochs",
                                               product_acc, epochs)) &
             o.require(npt_acc >= 0.45 && npt_acc <= 0.60,
                       fmt("NPT1 vs NPT2: test accuracy %.4f in [0.45, 0.60]", npt_acc));
    return o;
}

Outcome baselines() {
    Outcome o;
    const std::vector<int> classes{0, 1, 2};
    const BalancedDataset ds = balanced_dataset({0, 1, 2}, 2000, GeneratorPolicy::hilbert_schmidt(), kSeed);
    std::vector<LabeledState> tr, te;
    split_per_class(ds.states, 1500, tr, te);
    const CmwConfig cfg = cmw_config(64);
    const FeatureTable ftr = cmw_feature_table(tr, cfg, sic_povm_d4());
    const FeatureTable fte = cmw_feature_table(te, cfg, sic_povm_d4());
    const std::vector<int> ytr = encode_labels(ftr.labels, classes);
    const std::vector<int> yte = encode_labels(fte.labels, classes);

    const auto svm_grid = default_svm_grid();
    const GridSearchResult svm_cv = grid_search_svm(ftr.values, ytr, 3, svm_grid, 3, kSeed);
    const SvmModel svm = train_svm(ftr.values, ytr, 3, svm_grid[svm_cv.best]);
    const double svm_f1 = macro_f1(yte, svm.predict(fte.values), 3);
    const auto sv = svm_grid[svm_cv.best].values();
    o.note(fmt("SVM best %s C=%s gamma=%s, CV Macro-F1 %.4f", sv[0].c_str(), sv[1].c_str(),
               sv[2].empty() ? "-" : sv[2].c_str(), svm_cv.best_mean_macro_f1));

    const auto rf_grid = default_forest_grid(kSeed);
    const GridSearchResult rf_cv = grid_search_rf(ftr.values, ytr, 3, rf_grid, 3, kSeed);
    const ForestModel rf = train_rf(ftr.values, ytr, 3, rf_grid[rf_cv.best]);
    const double rf_f1 = macro_f1(yte, rf.predict(fte.values), 3);
    const auto rv = rf_grid[rf_cv.best].values();
    o.note(fmt("RF best trees=%s depth=%s, CV Macro-F1 %.4f, OOB %.4f", rv[0].c_str(), rv[1].c_str(),
               rf_cv.best_mean_macro_f1, rf.oob_macro_f1));

    o.pass = o.require(svm_f1 >= 0.51 && svm_f1 <= 0.65, fmt("SVM test Macro-F1 %.4f in [0.51, 0.65]", svm_f1)) &
             o.require(rf_f1 >= 0.44 && rf_f1 <= 0.58, fmt("RF test Macro-F1 %.4f in [0.44, 0.58]", rf_f1)) &
             o.require(svm_f1 >= rf_f1, "SVM >= RF");
    return o;
}

Outcome properties() {
    Outcome o;
    std::vector<DensityMatrix> states;
    const EnsembleKind kinds[] = {EnsembleKind::haar_pure, EnsembleKind::hilbert_schmidt, EnsembleKind::bures,
                                  EnsembleKind::product, EnsembleKind::mixture};
    for (std::size_t k = 0; k < 5; ++k) {
        EnsembleSpec spec{kinds[k], 4, derive_seed(kSeed, 100 + k)};
        for (std::uint64_t i = 0; i < 200; ++i) states.push_back(sample_state(spec, i));
    }
    double roundtrip = 0.0, side = 0.0, svd_gap = 0.0;
    for (const auto &rho : states) {
        const BlochDecomposition d = bloch_decompose(rho);
        roundtrip = std::max(roundtrip, oracle::max_abs_diff(bloch_operator(d), rho.mat()));
        const RealVector pa = herm_eigvals(partial_transpose(rho.mat(), rho.dims(), Side::A));
        const RealVector pb = herm_eigvals(partial_transpose(rho.mat(), rho.dims(), Side::B));
        side = std::max(side, (pa - pb).cwiseAbs().maxCoeff());
        const auto s = svd_rect(d.t);
        const double fro = frobenius_norm(d.t);
        svd_gap = std::max(svd_gap, std::abs(s[0] * s[0] + s[1] * s[1] + s[2] * s[2] - fro * fro));
    }

    const CmwConfig all = cmw_config(136);
    double lo = 1.0, hi = 0.0;
    for (std::size_t i = 0; i < 300; ++i) {
        const FeatureVector f = cmw_features(states[i * 3], all, sic_povm_d4());
        lo = std::min(lo, f.values.minCoeff());
        hi = std::max(hi, f.values.maxCoeff());
    }
    const FeatureVector mixed =
        cmw_features(DensityMatrix(ComplexMatrix::Identity(8, 8) / 8.0), all, sic_povm_d4());
    const double mixed_err = (mixed.values.array() - 0.25).abs().maxCoeff();

    CounterRng rng(kSeed, 0xE16);
    double eig_err = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const ComplexMatrix h = oracle::random_hermitian(4, rng);
        const RealVector got = herm_eigvals(h);
        const std::vector<double> want = oracle::spectrum_by_char_poly(h);
        for (int i = 0; i < 4; ++i) eig_err = std::max(eig_err, std::abs(got(i) - want[std::size_t(i)]));
    }

    o.pass = o.require(roundtrip <= 1e-12, fmt("Bloch round trip over %zu states: %.2e", states.size(), roundtrip)) &
             o.require(side <= 1e-10, fmt("PT spectrum side A vs side B: %.2e", side)) &
             o.require(lo >= 0.0 && hi <= 1.0, fmt("CMW k=136 features in [%.4f, %.4f]", lo, hi)) &
             o.require(mixed_err <= 1e-12, fmt("maximally mixed CMW deviation from 0.25: %.2e", mixed_err)) &
             o.require(eig_err <= 1e-8, fmt("4x4 eigensolver vs characteristic polynomial: %.2e", eig_err)) &
             o.require(svd_gap <= 1e-12, fmt("|sum s_i^2 - ||T||_F^2|: %.2e", svd_gap));
    return o;
}

Outcome geometry() {
    Outcome o;
    const BalancedDataset ds = balanced_dataset({0, 1, 2}, 2000, GeneratorPolicy::hilbert_schmidt(), kSeed);
    const auto rows = svd_scatter(ds.states);
    std::map<int, std::vector<double>> s1;
    for (const auto &r : rows) s1[r.xi].push_back(r.s[0]);
    const MeanStd m0 = mean_std(s1[0]), m2 = mean_std(s1[2]);
    const double se = std::sqrt(m0.std * m0.std / double(s1[0].size()) + m2.std * m2.std / double(s1[2].size()));
    const double sigmas = (m2.mean - m0.mean) / se;
    bool ok = o.require(sigmas >= 5.0, fmt("mean s1: NPT2 %.4f vs NPT0 %.4f (%zu, %zu rows), separation %.1f sigma",
                                           m2.mean, m0.mean, s1[2].size(), s1[0].size(), sigmas));

    std::vector<std::size_t> ns(15);
    std::iota(ns.begin(), ns.end(), 1);
    const auto profile = mixture_profile(ns, 5000, kSeed);
    std::vector<double> purity;
    for (const auto &r : profile)
        if (r.xi == -1) purity.push_back(r.purity.mean);
    bool decreasing = purity.size() == 15;
    for (std::size_t i = 1; i < purity.size(); ++i) decreasing &= purity[i] < purity[i - 1];
    ok &= o.require(decreasing, fmt("pooled purity strictly decreasing over n = 1..15 (%.4f -> %.4f)", purity.front(),
                                    purity.back()));

    // t-SNE of CMW k=64 features for 1000 product, 1000 NPT1 and 1000 NPT2 states.
    std::vector<LabeledState> states;
    EnsembleSpec product{EnsembleKind::product};
    product.seed = derive_seed(kSeed, 3);
    for (std::uint64_t i = 0; i < 1000; ++i) states.push_back(relabeled({make_labeled(product, i)}, -1).front());
    std::map<int, std::size_t> taken;
    for (const auto &s : ds.states)
        if (s.label.xi != 0 && taken[s.label.xi]++ < 1000) states.push_back(s);
    const FeatureTable features = cmw_feature_table(states, cmw_config(64), sic_povm_d4());
    TsneParams params;
    params.seed = kSeed;
    const TsneResult embedding = tsne(features.values, params);
    std::map<int, double> sil;
    for (auto [label, s] : silhouette_by_class(embedding.embedding, features.labels)) sil[label] = s;
    o.note(fmt("t-SNE of %zu states, final KL %.4f", states.size(), embedding.kl.back()));
    ok &= o.require(sil[-1] > sil[1], fmt("silhouette: product %.4f > NPT1 %.4f (NPT2 %.4f)", sil[-1], sil[1], sil[2]));
    o.pass = ok;
    return o;
}

Outcome embedding_theorem() {
    Outcome o;
    EnsembleSpec hs{EnsembleKind::hilbert_schmidt};
    hs.seed = derive_seed(kSeed, 12);
    std::size_t found = 0, exist = 0, max_dim = 0;
    for (std::uint64_t i = 0; found < 1000; ++i) {
        const LabeledState s = make_labeled(hs, i);
        if (s.label.xi != 1) continue;
        ++found;
        const Rank2Embedding e = rank2_embedding_exists(s.rho);
        exist += e.exists;
        max_dim = std::max(max_dim, e.support_dim);
    }
    bool ok = o.require(exist == 1000, fmt("rank-two embedding exists for %zu of 1000 xi=1 states (max dim U_B = %zu)",
                                           exist, max_dim));

    // p |singlet><singlet| + (1 - p) tau placed on a random two-dimensional
    // subspace of Bob's ququart.
    CounterRng rng(kSeed, 0x5196);
    ComplexVector singlet = ComplexVector::Zero(4);
    singlet(1) = 1.0 / std::sqrt(2.0);
    singlet(2) = -1.0 / std::sqrt(2.0);
    std::size_t instances = 0, npt = 0;
    while (instances < 1000) {
        const double p = 0.5 + 0.5 * rng.uniform();
        const ComplexMatrix sigma = p * singlet * singlet.adjoint() + (1 - p) * oracle::random_density(4, rng);
        if (pt_negative_count(DensityMatrix(sigma, {2, 2})).xi != 1) continue;
        const ComplexMatrix w = haar_unitary(4, rng).leftCols(2);
        const ComplexMatrix iso = kron(ComplexMatrix::Identity(2, 2), w);
        const DensityMatrix rho(iso * sigma * iso.adjoint());
        const Rank2Embedding e = rank2_embedding_exists(rho);
        ++instances;
        if (!e.exists) continue;
        npt += pt_negative_count(project_rank2(rho, *e.projector)).xi >= 1;
    }
    ok &= o.require(npt == instances,
                    fmt("projected two-qubit state is NPT for %zu of %zu embedded-singlet instances", npt, instances));
    o.pass = ok;
    return o;
}

struct Criterion {
    const char *title;
    std::function<Outcome()> run;
};

const std::vector<Criterion> &criteria() {
    static const std::vector<Criterion> list{
        {"ensemble frequency table", ensemble_table},
        {"no more than 3 negative eigenvalues", rana_bound},
        {"mixture extremes n = 1, 2", mixture_extremes},
        {"transition crossing", transition},
        {"SIC-POVM", sic},
        {"gradient suite", gradients},
        {"desk-scale classification", desk_classification},
        {"binary tasks", binary_tasks},
        {"SVM and RF baselines", baselines},
        {"property suites", properties},
        {"geometry analyses", geometry},
        {"xi = 1 embedding", embedding_theorem},
    };
    return list;
}

}  // namespace

int main(int argc, char **argv) {
    std::vector<std::size_t> selected;
    for (int i = 1; i < argc; ++i) {
        const long id = std::strtol(argv[i], nullptr, 10);
        if (id < 1 || id > long(criteria().size())) {
            std::cerr << "usage: acceptance [criterion 1.." << criteria().size() << "]...\n";
            return 2;
        }
        selected.push_back(std::size_t(id));
    }
    if (selected.empty())
        for (std::size_t i = 1; i <= criteria().size(); ++i) selected.push_back(i);

    int failed = 0;
    for (std::size_t id : selected) {
        const Criterion &c = criteria()[id - 1];
        const auto start = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = c.run();
        } catch (const std::exception &e) {
            outcome.pass = false;
            outcome.note(std::string("exception: ") + e.what());
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::cout << "criterion " << id << " " << (outcome.pass ? "PASS" : "FAIL") << "  " << c.title << " ("
                  << fmt("%.1f s", seconds) << ")\n";
        for (const auto &line : outcome.details) std::cout << "    " << line << '\n';
        std::cout.flush();
        failed += !outcome.pass;
    }
    return failed == 0 ? 0 : 1;
}
