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

// Learnable observables, a small dense classifier with hand-written
// backpropagation, the training loop and classification metrics.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "npt/features.hpp"
#include "npt/linalg.hpp"
#include "npt/states.hpp"

namespace npt {

// ---------------------------------------------------------------------------
// Metrics

struct Evaluation {
    double macro_f1 = 0.0;
    double accuracy = 0.0;
    std::vector<double> per_class_f1;
    std::vector<std::vector<std::size_t>> confusion;  // [truth][prediction]
};

/// labels in 0..classes-1. A class with precision + recall = 0 has F1 = 0.
std::vector<double> per_class_f1(std::span<const int> truth, std::span<const int> pred, int classes);
double macro_f1(std::span<const int> truth, std::span<const int> pred, int classes);
std::vector<std::vector<std::size_t>> confusion_matrix(std::span<const int> truth, std::span<const int> pred,
                                                       int classes);
Evaluation evaluate_predictions(std::span<const int> truth, std::span<const int> pred, int classes);

// ---------------------------------------------------------------------------
// Observables

/// (A + A^dagger) / 2.
ComplexMatrix hermitize(const ComplexMatrix &a);

inline constexpr std::size_t kMaxCopies = 2;

/// Side of the l-copy space: 8^l for a 2x4 state.
std::size_t replica_dim(std::size_t copies);

struct ObservableSet {
    std::size_t copies = 1;
    std::vector<ComplexMatrix> raw;  // A_i, each replica_dim(copies) square

    std::size_t k() const { return raw.size(); }
    std::size_t dim() const { return replica_dim(copies); }
};

/// Entries with independent N(0, 1) real and imaginary parts, scaled by 1/(8 l).
ObservableSet random_observables(std::size_t k, std::size_t copies, std::uint64_t seed);

/// rho^(l): rho for l = 1, rho (x) rho for l = 2.
ComplexMatrix replicate(const ComplexMatrix &rho, std::size_t copies);

/// o_i = Tr[hermitize(A_i) rho^(l)].
FeatureVector learned_features(const DensityMatrix &rho, const ObservableSet &obs);

/// d o_i / d Re A_i and d o_i / d Im A_i. o_i = Re Tr[A_i rho^(l)], so these
/// are Re rho^(l) and Im rho^(l) for every i (o_i does not depend on A_j, j != i).
struct ObservableGradient {
    RealMatrix d_re;
    RealMatrix d_im;
};
std::vector<ObservableGradient> feature_gradients(const DensityMatrix &rho, const ObservableSet &obs);

// The observable layer as a bias-free linear map. For a Hermitian M the real
// embedding is [Re M, Im M] flattened row-major, and o_i = w_i . x with
// w_i = [Re A_i, Im A_i] in the same layout.

RealVector real_embedding(const ComplexMatrix &m);
RealMatrix observable_weights(const ObservableSet &obs);
ObservableSet observables_from_weights(const RealMatrix &w, std::size_t copies);

// ---------------------------------------------------------------------------
// Dense network

struct Mlp {
    std::vector<RealMatrix> weights;  // weights[l] is out x in
    std::vector<RealVector> biases;

    std::vector<std::size_t> sizes() const;
    std::size_t parameter_count() const;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases.
Mlp make_mlp(const std::vector<std::size_t> &sizes, CounterRng &rng);
Mlp zero_mlp(const std::vector<std::size_t> &sizes);

/// x: one row per sample. ReLU hidden layers, softmax output.
RealMatrix mlp_logits(const Mlp &net, const RealMatrix &x);
RealMatrix mlp_forward(const Mlp &net, const RealMatrix &x);

struct MlpGradients {
    std::vector<RealMatrix> weights;
    std::vector<RealVector> biases;
    RealMatrix input;  // d loss / d x
    double loss = 0.0;
};

/// Mean softmax cross-entropy over the rows of x and its gradients.
MlpGradients mlp_backward(const Mlp &net, const RealMatrix &x, std::span<const int> labels);
double cross_entropy(const RealMatrix &probabilities, std::span<const int> labels);

// ---------------------------------------------------------------------------
// Classifier and training

enum class ModelKind { ann_cmw, ann_learned, ann_learned_2copy };

/// "ann-cmw", "ann-learned", "ann-learned-2copy".
std::string model_name(ModelKind kind);
ModelKind parse_model(const std::string &name);
std::size_t model_copies(ModelKind kind);

struct Standardizer {
    RealVector mean;
    RealVector scale;  // 1 for constant columns

    static Standardizer fit(const RealMatrix &x);
    RealMatrix apply(const RealMatrix &x) const;
    bool empty() const { return mean.size() == 0; }
};

/// Inputs for one model. CMW models read `features` (one row per sample);
/// learned models read `states` and embed them on the fly.
struct Samples {
    RealMatrix features;
    std::vector<ComplexMatrix> states;
    std::vector<int> labels;  // class indices 0..C-1

    std::size_t size() const { return labels.size(); }
    Samples subset(std::span<const std::size_t> rows) const;
};

/// Maps raw labels (e.g. xi values) to positions in `classes`. Throws
/// ParameterError for labels outside the list.
std::vector<int> encode_labels(std::span<const int> raw, std::span<const int> classes);

Samples samples_from_features(const FeatureTable &table, std::span<const int> classes);
Samples samples_from_states(const std::vector<LabeledState> &states, std::span<const int> classes);

struct Classifier {
    ModelKind kind = ModelKind::ann_learned;
    std::size_t k = 0;
    std::vector<int> classes;
    RealMatrix observable_weights;  // k x 2 D^2, learned kinds only
    Standardizer standardizer;      // CMW kind only
    Mlp mlp;

    std::size_t copies() const { return model_copies(kind); }
    /// Network input for the given rows (observable layer or standardized CMW features).
    RealMatrix front(const Samples &data, std::span<const std::size_t> rows) const;
    RealMatrix probabilities(const Samples &data) const;
    std::vector<int> predict(const Samples &data) const;
    ObservableSet observables() const;
};

struct TrainConfig {
    ModelKind kind = ModelKind::ann_learned;
    std::size_t k = 64;
    double learning_rate = 1e-3;
    std::size_t batch_size = 256;
    std::size_t epochs = 100;
    std::size_t patience = 10;
    double validation_fraction = 0.1;
    std::vector<std::size_t> hidden{128, 64};
    std::vector<int> classes{0, 1, 2};
    std::uint64_t seed = 0;
};

void validate(const TrainConfig &config);

struct TrainLogRow {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_macro_f1 = 0.0;
};

struct TrainResult {
    Classifier model;
    std::vector<TrainLogRow> log;
    std::size_t best_epoch = 0;
    double best_val_macro_f1 = 0.0;
};

/// Adam on mini-batches; keeps the weights of the epoch with the best
/// validation Macro-F1 and stops after `patience` epochs without improvement.
/// With epochs = 0 nothing is trained and the initial model is returned.
/// Throws NumericalError if the loss becomes non-finite.
TrainResult train(const Samples &data, const TrainConfig &config);

Evaluation evaluate(const Classifier &model, const Samples &data);

/// "epoch,train_loss,val_macro_f1".
void write_training_log(std::ostream &out, const std::vector<TrainLogRow> &log);

/// Checkpoint = JSON manifest at `path` plus `<path stem>.ptcm` holding the
/// observable matrices A_i (learned kinds) followed by every weight matrix and
/// bias (as n x 1) of the network, imaginary parts zero.
void save_checkpoint(const std::filesystem::path &path, const Classifier &model, const std::string &extra_json = "{}");
Classifier load_checkpoint(const std::filesystem::path &path);

}  // namespace npt
