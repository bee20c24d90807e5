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

#include "npt/learn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "npt/errors.hpp"
#include "npt/rng.hpp"

namespace npt {

// ---------------------------------------------------------------------------
// Metrics

namespace {

void check_labels(std::span<const int> truth, std::span<const int> pred, int classes) {
    if (truth.size() != pred.size()) throw ParameterError("metrics: truth and prediction lengths differ");
    if (truth.empty()) throw ParameterError("metrics: empty input");
    if (classes < 1) throw ParameterError("metrics: need at least one class");
    for (std::size_t i = 0; i < truth.size(); ++i)
        if (truth[i] < 0 || truth[i] >= classes || pred[i] < 0 || pred[i] >= classes)
            throw ParameterError("metrics: label out of range");
}

}  // namespace

std::vector<std::vector<std::size_t>> confusion_matrix(std::span<const int> truth, std::span<const int> pred,
                                                       int classes) {
    check_labels(truth, pred, classes);
    std::vector<std::vector<std::size_t>> c(classes, std::vector<std::size_t>(classes, 0));
    for (std::size_t i = 0; i < truth.size(); ++i) ++c[truth[i]][pred[i]];
    return c;
}

std::vector<double> per_class_f1(std::span<const int> truth, std::span<const int> pred, int classes) {
    const auto c = confusion_matrix(truth, pred, classes);
    std::vector<double> f1(classes, 0.0);
    for (int k = 0; k < classes; ++k) {
        const double tp = double(c[k][k]);
        double predicted = 0, actual = 0;
        for (int j = 0; j < classes; ++j) {
            predicted += double(c[j][k]);
            actual += double(c[k][j]);
        }
        const double precision = predicted > 0 ? tp / predicted : 0.0;
        const double recall = actual > 0 ? tp / actual : 0.0;
        f1[k] = precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    }
    return f1;
}

double macro_f1(std::span<const int> truth, std::span<const int> pred, int classes) {
    const auto f1 = per_class_f1(truth, pred, classes);
    return std::accumulate(f1.begin(), f1.end(), 0.0) / double(classes);
}

Evaluation evaluate_predictions(std::span<const int> truth, std::span<const int> pred, int classes) {
    Evaluation e;
    e.confusion = confusion_matrix(truth, pred, classes);
    e.per_class_f1 = per_class_f1(truth, pred, classes);
    e.macro_f1 = std::accumulate(e.per_class_f1.begin(), e.per_class_f1.end(), 0.0) / double(classes);
    std::size_t correct = 0;
    for (int k = 0; k < classes; ++k) correct += e.confusion[k][k];
    e.accuracy = double(correct) / double(truth.size());
    return e;
}

// ---------------------------------------------------------------------------
// Observables

ComplexMatrix hermitize(const ComplexMatrix &a) {
    if (a.rows() != a.cols()) throw DimensionError("hermitize: matrix must be square");
    return (a + a.adjoint()) * 0.5;
}

std::size_t replica_dim(std::size_t copies) {
    if (copies < 1 || copies > kMaxCopies) throw ParameterError("copies must be 1 or 2");
    return copies == 1 ? 8 : 64;
}

ObservableSet random_observables(std::size_t k, std::size_t copies, std::uint64_t seed) {
    const auto d = static_cast<Eigen::Index>(replica_dim(copies));
    const double scale = 1.0 / (8.0 * double(copies));
    ObservableSet obs{copies, {}};
    CounterRng rng(seed);
    for (std::size_t i = 0; i < k; ++i) {
        ComplexMatrix a(d, d);
        for (Eigen::Index r = 0; r < d; ++r)
            for (Eigen::Index c = 0; c < d; ++c) a(r, c) = rng.complex_normal() * scale;
        obs.raw.push_back(std::move(a));
    }
    return obs;
}

ComplexMatrix replicate(const ComplexMatrix &rho, std::size_t copies) {
    replica_dim(copies);
    return copies == 1 ? rho : kron(rho, rho);
}

namespace {

void check_observables(const DensityMatrix &rho, const ObservableSet &obs) {
    if (rho.dims() != BipartiteDims{2, 4}) throw DimensionError("learned features need a 2x4 state");
    const auto d = static_cast<Eigen::Index>(obs.dim());
    for (const auto &a : obs.raw)
        if (a.rows() != d || a.cols() != d) throw DimensionError("observable size does not match the copy count");
}

}  // namespace

FeatureVector learned_features(const DensityMatrix &rho, const ObservableSet &obs) {
    check_observables(rho, obs);
    const ComplexMatrix r = replicate(rho.mat(), obs.copies);
    FeatureVector f{RealVector(obs.k()), std::vector<bool>(obs.k(), false), pt_negative_count(rho)};
    for (std::size_t i = 0; i < obs.k(); ++i)
        f.values(static_cast<Eigen::Index>(i)) = (hermitize(obs.raw[i]) * r).trace().real();
    return f;
}

std::vector<ObservableGradient> feature_gradients(const DensityMatrix &rho, const ObservableSet &obs) {
    check_observables(rho, obs);
    const ComplexMatrix r = replicate(rho.mat(), obs.copies);
    // d/dA[j,k] of Re sum A[j,k] r[k,j] gives r^T; for Hermitian r the real
    // part of r^T is Re r and -Im r^T is Im r.
    const ComplexMatrix rt = r.transpose();
    ObservableGradient g{rt.real(), -rt.imag()};
    return std::vector<ObservableGradient>(obs.k(), g);
}

RealVector real_embedding(const ComplexMatrix &m) {
    const Eigen::Index n = m.rows() * m.cols();
    RealVector x(2 * n);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            x(r * m.cols() + c) = m(r, c).real();
            x(n + r * m.cols() + c) = m(r, c).imag();
        }
    }
    return x;
}

RealMatrix observable_weights(const ObservableSet &obs) {
    const auto d = static_cast<Eigen::Index>(obs.dim());
    RealMatrix w(static_cast<Eigen::Index>(obs.k()), 2 * d * d);
    for (std::size_t i = 0; i < obs.k(); ++i) w.row(static_cast<Eigen::Index>(i)) = real_embedding(obs.raw[i]);
    return w;
}

ObservableSet observables_from_weights(const RealMatrix &w, std::size_t copies) {
    const auto d = static_cast<Eigen::Index>(replica_dim(copies));
    if (w.cols() != 2 * d * d) throw DimensionError("observable weights do not match the copy count");
    ObservableSet obs{copies, {}};
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        ComplexMatrix a(d, d);
        for (Eigen::Index r = 0; r < d; ++r)
            for (Eigen::Index c = 0; c < d; ++c) a(r, c) = Complex(w(i, r * d + c), w(i, d * d + r * d + c));
        obs.raw.push_back(std::move(a));
    }
    return obs;
}

// ---------------------------------------------------------------------------
// Dense network

std::vector<std::size_t> Mlp::sizes() const {
    std::vector<std::size_t> s;
    if (weights.empty()) return s;
    s.push_back(static_cast<std::size_t>(weights.front().cols()));
    for (const auto &w : weights) s.push_back(static_cast<std::size_t>(w.rows()));
    return s;
}

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l)
        n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
    return n;
}

Mlp zero_mlp(const std::vector<std::size_t> &sizes) {
    if (sizes.size() < 2) throw ParameterError("mlp: need input and output sizes");
    Mlp net;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        if (sizes[l] == 0 || sizes[l + 1] == 0) throw ParameterError("mlp: zero layer size");
        net.weights.push_back(RealMatrix::Zero(Eigen::Index(sizes[l + 1]), Eigen::Index(sizes[l])));
        net.biases.push_back(RealVector::Zero(Eigen::Index(sizes[l + 1])));
    }
    return net;
}

Mlp make_mlp(const std::vector<std::size_t> &sizes, CounterRng &rng) {
    Mlp net = zero_mlp(sizes);
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        const double bound = 1.0 / std::sqrt(double(sizes[l]));
        for (Eigen::Index i = 0; i < net.weights[l].size(); ++i)
            net.weights[l](i) = bound * (2.0 * rng.uniform() - 1.0);
        for (Eigen::Index i = 0; i < net.biases[l].size(); ++i) net.biases[l](i) = bound * (2.0 * rng.uniform() - 1.0);
    }
    return net;
}

namespace {

void check_input(const Mlp &net, const RealMatrix &x) {
    if (net.weights.empty()) throw ParameterError("mlp: empty network");
    if (x.cols() != net.weights.front().cols()) throw DimensionError("mlp: input width does not match the network");
}

void softmax_rows(RealMatrix &z) {
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        z.row(i).array() -= z.row(i).maxCoeff();
        z.row(i) = z.row(i).array().exp();
        z.row(i) /= z.row(i).sum();
    }
}

}  // namespace

RealMatrix mlp_logits(const Mlp &net, const RealMatrix &x) {
    check_input(net, x);
    RealMatrix h = x;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        RealMatrix z = h * net.weights[l].transpose();
        z.rowwise() += net.biases[l].transpose();
        if (l + 1 < net.weights.size()) z = z.cwiseMax(0.0);
        h = std::move(z);
    }
    return h;
}

RealMatrix mlp_forward(const Mlp &net, const RealMatrix &x) {
    RealMatrix p = mlp_logits(net, x);
    softmax_rows(p);
    return p;
}

double cross_entropy(const RealMatrix &probabilities, std::span<const int> labels) {
    if (std::size_t(probabilities.rows()) != labels.size() || labels.empty())
        throw DimensionError("cross_entropy: label count does not match");
    double loss = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i)
        loss -= std::log(std::max(probabilities(Eigen::Index(i), labels[i]), 1e-300));
    return loss / double(labels.size());
}

MlpGradients mlp_backward(const Mlp &net, const RealMatrix &x, std::span<const int> labels) {
    check_input(net, x);
    if (std::size_t(x.rows()) != labels.size() || labels.empty())
        throw DimensionError("mlp_backward: label count does not match");
    const std::size_t depth = net.weights.size();
    const auto classes = net.weights.back().rows();
    for (int y : labels)
        if (y < 0 || y >= classes) throw ParameterError("mlp_backward: label out of range");

    // activations[l] is the input of layer l; activations[depth] holds softmax output.
    std::vector<RealMatrix> activations{x};
    for (std::size_t l = 0; l < depth; ++l) {
        RealMatrix z = activations.back() * net.weights[l].transpose();
        z.rowwise() += net.biases[l].transpose();
        if (l + 1 < depth) z = z.cwiseMax(0.0);
        activations.push_back(std::move(z));
    }
    softmax_rows(activations.back());

    MlpGradients g;
    g.loss = cross_entropy(activations.back(), labels);
    g.weights.resize(depth);
    g.biases.resize(depth);

    const double inv_b = 1.0 / double(labels.size());
    RealMatrix delta = activations.back();
    for (std::size_t i = 0; i < labels.size(); ++i) delta(Eigen::Index(i), labels[i]) -= 1.0;
    delta *= inv_b;
    for (std::size_t l = depth; l-- > 0;) {
        g.weights[l] = delta.transpose() * activations[l];
        g.biases[l] = delta.colwise().sum().transpose();
        RealMatrix back = delta * net.weights[l];
        if (l > 0) back = back.cwiseProduct((activations[l].array() > 0.0).cast<double>().matrix());
        delta = std::move(back);
    }
    g.input = std::move(delta);
    return g;
}

// ---------------------------------------------------------------------------
// Classifier

std::string model_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::ann_cmw: return "ann-cmw";
        case ModelKind::ann_learned: return "ann-learned";
        case ModelKind::ann_learned_2copy: return "ann-learned-2copy";
    }
    return "?";
}

ModelKind parse_model(const std::string &name) {
    if (name == "ann-cmw") return ModelKind::ann_cmw;
    if (name == "ann-learned") return ModelKind::ann_learned;
    if (name == "ann-learned-2copy") return ModelKind::ann_learned_2copy;
    throw ParameterError("unknown model '" + name + "'");
}

std::size_t model_copies(ModelKind kind) {
    return kind == ModelKind::ann_learned_2copy ? 2 : 1;
}

Standardizer Standardizer::fit(const RealMatrix &x) {
    if (x.rows() == 0) throw ParameterError("standardizer: empty input");
    Standardizer s;
    s.mean = x.colwise().mean().transpose();
    s.scale = ((x.rowwise() - s.mean.transpose()).array().square().colwise().mean()).sqrt().transpose();
    for (Eigen::Index j = 0; j < s.scale.size(); ++j)
        if (!(s.scale(j) > 1e-12)) s.scale(j) = 1.0;
    return s;
}

RealMatrix Standardizer::apply(const RealMatrix &x) const {
    if (empty()) return x;
    if (x.cols() != mean.size()) throw DimensionError("standardizer: width mismatch");
    return ((x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array()).matrix();
}

Samples Samples::subset(std::span<const std::size_t> rows) const {
    Samples s;
    if (features.size() > 0) {
        s.features.resize(Eigen::Index(rows.size()), features.cols());
        for (std::size_t i = 0; i < rows.size(); ++i) s.features.row(Eigen::Index(i)) = features.row(Eigen::Index(rows[i]));
    }
    for (std::size_t r : rows) {
        if (!states.empty()) s.states.push_back(states[r]);
        s.labels.push_back(labels[r]);
    }
    return s;
}

std::vector<int> encode_labels(std::span<const int> raw, std::span<const int> classes) {
    std::vector<int> out;
    out.reserve(raw.size());
    for (int y : raw) {
        auto it = std::find(classes.begin(), classes.end(), y);
        if (it == classes.end()) throw ParameterError("label " + std::to_string(y) + " is not among the model classes");
        out.push_back(int(it - classes.begin()));
    }
    return out;
}

Samples samples_from_features(const FeatureTable &table, std::span<const int> classes) {
    Samples s;
    s.features = table.values;
    s.labels = encode_labels(table.labels, classes);
    return s;
}

Samples samples_from_states(const std::vector<LabeledState> &states, std::span<const int> classes) {
    Samples s;
    std::vector<int> raw;
    for (const auto &st : states) {
        s.states.push_back(st.rho.mat());
        raw.push_back(st.label.xi);
    }
    s.labels = encode_labels(raw, classes);
    return s;
}

namespace {

RealMatrix embed_rows(const Samples &data, std::span<const std::size_t> rows, std::size_t copies) {
    const auto d = static_cast<Eigen::Index>(replica_dim(copies));
    RealMatrix x(Eigen::Index(rows.size()), 2 * d * d);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= data.states.size()) throw DimensionError("samples: no state for row");
        x.row(Eigen::Index(i)) = real_embedding(replicate(data.states[rows[i]], copies));
    }
    return x;
}

RealMatrix feature_rows(const Samples &data, std::span<const std::size_t> rows) {
    RealMatrix x(Eigen::Index(rows.size()), data.features.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) x.row(Eigen::Index(i)) = data.features.row(Eigen::Index(rows[i]));
    return x;
}

std::vector<std::size_t> all_rows(std::size_t n) {
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), 0);
    return rows;
}

constexpr std::size_t kEvalChunk = 1024;

}  // namespace

RealMatrix Classifier::front(const Samples &data, std::span<const std::size_t> rows) const {
    if (kind == ModelKind::ann_cmw) {
        if (std::size_t(data.features.cols()) != k) throw DimensionError("CMW features do not match the model k");
        return standardizer.apply(feature_rows(data, rows));
    }
    return embed_rows(data, rows, copies()) * observable_weights.transpose();
}

RealMatrix Classifier::probabilities(const Samples &data) const {
    const auto rows = all_rows(data.size());
    RealMatrix p(Eigen::Index(data.size()), Eigen::Index(classes.size()));
    for (std::size_t start = 0; start < rows.size(); start += kEvalChunk) {
        const std::size_t n = std::min(kEvalChunk, rows.size() - start);
        p.middleRows(Eigen::Index(start), Eigen::Index(n)) =
            mlp_forward(mlp, front(data, std::span(rows).subspan(start, n)));
    }
    return p;
}

std::vector<int> Classifier::predict(const Samples &data) const {
    const RealMatrix p = probabilities(data);
    std::vector<int> out(data.size());
    for (Eigen::Index i = 0; i < p.rows(); ++i) p.row(i).maxCoeff(&out[std::size_t(i)]);
    return out;
}

ObservableSet Classifier::observables() const {
    if (kind == ModelKind::ann_cmw) return ObservableSet{1, {}};
    return observables_from_weights(observable_weights, copies());
}

Evaluation evaluate(const Classifier &model, const Samples &data) {
    const auto pred = model.predict(data);
    return evaluate_predictions(data.labels, pred, int(model.classes.size()));
}

// ---------------------------------------------------------------------------
// Training

void validate(const TrainConfig &c) {
    if (c.k < 1) throw ParameterError("train: k must be >= 1");
    if (!(c.learning_rate > 0.0)) throw ParameterError("train: learning rate must be positive");
    if (c.batch_size < 1) throw ParameterError("train: batch size must be >= 1");
    if (c.patience < 1) throw ParameterError("train: patience must be >= 1");
    if (!(c.validation_fraction > 0.0 && c.validation_fraction < 1.0))
        throw ParameterError("train: validation fraction must lie in (0, 1)");
    if (c.classes.size() < 2) throw ParameterError("train: need at least two classes");
    for (std::size_t h : c.hidden)
        if (h < 1) throw ParameterError("train: hidden layer sizes must be positive");
}

namespace {

struct Adam {
    static constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double lr = 1e-3;
    std::size_t step = 0;
    std::vector<RealMatrix> m, v;

    template <class Param>
    void update(std::size_t slot, Param &param, const Param &grad) {
        if (slot >= m.size()) {
            m.resize(slot + 1);
            v.resize(slot + 1);
        }
        if (m[slot].size() == 0) {
            m[slot] = RealMatrix::Zero(param.rows(), param.cols());
            v[slot] = RealMatrix::Zero(param.rows(), param.cols());
        }
        m[slot] = beta1 * m[slot] + (1.0 - beta1) * grad;
        v[slot] = beta2 * v[slot] + (1.0 - beta2) * grad.cwiseProduct(grad);
        const double c1 = 1.0 - std::pow(beta1, double(step));
        const double c2 = 1.0 - std::pow(beta2, double(step));
        param.array() -= lr * (m[slot].array() / c1) / ((v[slot].array() / c2).sqrt() + eps);
    }
};

void shuffle(std::vector<std::size_t> &v, CounterRng &rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

bool finite(const RealMatrix &m) { return m.allFinite(); }

}  // namespace

TrainResult train(const Samples &data, const TrainConfig &config) {
    validate(config);
    const bool learned = config.kind != ModelKind::ann_cmw;
    const std::size_t n = data.size();
    if (n < 10) throw ParameterError("train: need at least 10 samples");
    if (learned && data.states.size() != n) throw ParameterError("train: learned models need states");
    if (!learned && std::size_t(data.features.rows()) != n) throw ParameterError("train: CMW model needs features");
    if (!learned && std::size_t(data.features.cols()) != config.k)
        throw DimensionError("train: feature width " + std::to_string(data.features.cols()) + " does not match k=" +
                             std::to_string(config.k));
    for (int y : data.labels)
        if (y < 0 || y >= int(config.classes.size())) throw ParameterError("train: label out of range");

    CounterRng init_rng(config.seed, 0), shuffle_rng(config.seed, 1), split_rng(config.seed, 2);

    std::vector<std::size_t> order = all_rows(n);
    shuffle(order, split_rng);
    const auto n_val = std::max<std::size_t>(1, std::size_t(double(n) * config.validation_fraction));
    std::vector<std::size_t> val(order.begin(), order.begin() + std::ptrdiff_t(n_val));
    std::vector<std::size_t> fit(order.begin() + std::ptrdiff_t(n_val), order.end());
    std::vector<int> val_labels;
    for (std::size_t r : val) val_labels.push_back(data.labels[r]);

    Classifier model;
    model.kind = config.kind;
    model.k = config.k;
    model.classes = config.classes;
    std::vector<std::size_t> sizes{config.k};
    sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
    sizes.push_back(config.classes.size());
    model.mlp = make_mlp(sizes, init_rng);
    if (learned)
        model.observable_weights =
            observable_weights(random_observables(config.k, model.copies(), derive_seed(config.seed, 3)));
    else
        model.standardizer = Standardizer::fit(feature_rows(data, fit));

    // Inputs that do not depend on trainable parameters are computed once,
    // except the 2-copy embedding, which is rebuilt per batch to bound memory.
    RealMatrix cached;
    if (!learned)
        cached = model.standardizer.apply(data.features);
    else if (model.copies() == 1)
        cached = embed_rows(data, all_rows(n), 1);
    auto batch_inputs = [&](std::span<const std::size_t> rows) {
        if (cached.size() == 0) return embed_rows(data, rows, model.copies());
        RealMatrix x(Eigen::Index(rows.size()), cached.cols());
        for (std::size_t i = 0; i < rows.size(); ++i) x.row(Eigen::Index(i)) = cached.row(Eigen::Index(rows[i]));
        return x;
    };
    auto validation_f1 = [&] {
        std::vector<int> pred;
        for (std::size_t start = 0; start < val.size(); start += kEvalChunk) {
            const auto rows = std::span(val).subspan(start, std::min(kEvalChunk, val.size() - start));
            RealMatrix x = batch_inputs(rows);
            if (learned) x = x * model.observable_weights.transpose();
            const RealMatrix logits = mlp_logits(model.mlp, x);
            for (Eigen::Index i = 0; i < logits.rows(); ++i) {
                int arg = 0;
                logits.row(i).maxCoeff(&arg);
                pred.push_back(arg);
            }
        }
        return macro_f1(val_labels, pred, int(config.classes.size()));
    };

    TrainResult result;
    result.model = model;
    result.best_val_macro_f1 = -1.0;
    Adam adam;
    adam.lr = config.learning_rate;
    std::size_t since_best = 0;
    std::vector<int> batch_labels;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        shuffle(fit, shuffle_rng);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < fit.size(); start += config.batch_size) {
            const auto rows = std::span(fit).subspan(start, std::min(config.batch_size, fit.size() - start));
            batch_labels.clear();
            for (std::size_t r : rows) batch_labels.push_back(data.labels[r]);

            const RealMatrix x = batch_inputs(rows);
            const RealMatrix h = learned ? RealMatrix(x * model.observable_weights.transpose()) : x;
            MlpGradients g = mlp_backward(model.mlp, h, batch_labels);
            if (!std::isfinite(g.loss))
                throw NumericalError("train: loss became non-finite at epoch " + std::to_string(epoch) +
                                     ", batch starting at " + std::to_string(start));
            loss_sum += g.loss * double(rows.size());

            ++adam.step;
            std::size_t slot = 0;
            for (std::size_t l = 0; l < model.mlp.weights.size(); ++l) {
                adam.update(slot++, model.mlp.weights[l], g.weights[l]);
                adam.update(slot++, model.mlp.biases[l], g.biases[l]);
            }
            if (learned) {
                const RealMatrix dw = g.input.transpose() * x;
                adam.update(slot++, model.observable_weights, dw);
            }
        }
        if (!finite(model.mlp.weights.back()) || (learned && !finite(model.observable_weights)))
            throw NumericalError("train: parameters became non-finite at epoch " + std::to_string(epoch));

        const double vf = validation_f1();
        result.log.push_back({epoch, loss_sum / double(fit.size()), vf});
        if (vf > result.best_val_macro_f1) {
            result.best_val_macro_f1 = vf;
            result.best_epoch = epoch;
            result.model = model;
            since_best = 0;
        } else if (++since_best >= config.patience) {
            break;
        }
    }
    if (config.epochs == 0) result.best_val_macro_f1 = validation_f1();
    return result;
}

void write_training_log(std::ostream &out, const std::vector<TrainLogRow> &log) {
    out << "epoch,train_loss,val_macro_f1\n";
    for (const auto &row : log)
        out << row.epoch << ',' << format_real(row.train_loss) << ',' << format_real(row.val_macro_f1) << '\n';
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

std::filesystem::path weights_path(const std::filesystem::path &manifest) {
    std::filesystem::path p = manifest;
    p.replace_extension(".ptcm");
    return p;
}

nlohmann::json to_json(const RealVector &v) { return std::vector<double>(v.data(), v.data() + v.size()); }

RealVector vector_from_json(const nlohmann::json &j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const RealVector>(v.data(), Eigen::Index(v.size()));
}

}  // namespace

void save_checkpoint(const std::filesystem::path &path, const Classifier &model, const std::string &extra_json) {
    nlohmann::json j;
    j["format"] = "npt-checkpoint";
    j["version"] = 1;
    j["model"] = model_name(model.kind);
    j["k"] = model.k;
    j["copies"] = model.copies();
    j["classes"] = model.classes;
    j["sizes"] = model.mlp.sizes();
    if (!model.standardizer.empty())
        j["standardizer"] = {{"mean", to_json(model.standardizer.mean)}, {"scale", to_json(model.standardizer.scale)}};
    j["weights_file"] = weights_path(path).filename().string();
    j["extra"] = nlohmann::json::parse(extra_json);

    std::ofstream bin(weights_path(path), std::ios::binary);
    if (!bin) throw ParameterError("cannot write " + weights_path(path).string());
    if (model.kind != ModelKind::ann_cmw)
        for (const auto &a : model.observables().raw) write_ptcm(bin, a);
    for (std::size_t l = 0; l < model.mlp.weights.size(); ++l) {
        write_ptcm(bin, model.mlp.weights[l].cast<Complex>());
        write_ptcm(bin, model.mlp.biases[l].cast<Complex>());
    }
    std::ofstream out(path);
    if (!out) throw ParameterError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

Classifier load_checkpoint(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw ParameterError("cannot read checkpoint " + path.string());
    Classifier model;
    try {
        const auto j = nlohmann::json::parse(in);
        if (j.at("format") != "npt-checkpoint") throw ParameterError("not a checkpoint: " + path.string());
        model.kind = parse_model(j.at("model").get<std::string>());
        model.k = j.at("k").get<std::size_t>();
        model.classes = j.at("classes").get<std::vector<int>>();
        const auto sizes = j.at("sizes").get<std::vector<std::size_t>>();
        if (j.contains("standardizer")) {
            model.standardizer.mean = vector_from_json(j["standardizer"].at("mean"));
            model.standardizer.scale = vector_from_json(j["standardizer"].at("scale"));
        }
        std::ifstream bin(path.parent_path() / j.at("weights_file").get<std::string>(), std::ios::binary);
        if (!bin) throw ParameterError("cannot read checkpoint weights for " + path.string());
        if (model.kind != ModelKind::ann_cmw) {
            ObservableSet obs{model.copies(), {}};
            for (std::size_t i = 0; i < model.k; ++i) obs.raw.push_back(read_ptcm(bin));
            model.observable_weights = observable_weights(obs);
        }
        model.mlp = zero_mlp(sizes);
        for (std::size_t l = 0; l < model.mlp.weights.size(); ++l) {
            const ComplexMatrix w = read_ptcm(bin), b = read_ptcm(bin);
            if (w.rows() != model.mlp.weights[l].rows() || w.cols() != model.mlp.weights[l].cols() ||
                b.rows() != model.mlp.biases[l].size())
                throw ParameterError("checkpoint weights do not match the manifest sizes");
            model.mlp.weights[l] = w.real();
            model.mlp.biases[l] = b.real();
        }
    } catch (const nlohmann::json::exception &e) {
        throw ParameterError("malformed checkpoint " + path.string() + ": " + e.what());
    }
    return model;
}

}  // namespace npt
