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

// Classical baselines on fixed feature vectors: one-vs-rest kernel SVM
// trained by sequential minimal optimization, a bagged CART random forest,
// and stratified k-fold grid search.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "npt/learn.hpp"
#include "npt/linalg.hpp"

namespace npt {

// ---------------------------------------------------------------------------
// Support vector machine

enum class KernelKind { linear, rbf };

struct SvmParams {
    KernelKind kernel = KernelKind::rbf;
    double c = 1.0;
    double gamma = 0.1;  // rbf only: exp(-gamma |x - x'|^2)
    double tolerance = 1e-3;

    static std::vector<std::string> columns() { return {"kernel", "C", "gamma"}; }
    std::vector<std::string> values() const;
};

/// One binary machine of the one-vs-rest ensemble.
struct BinarySvm {
    std::vector<std::size_t> support;  // rows of SvmModel::support_vectors
    std::vector<double> coef;          // alpha_i y_i
    double bias = 0.0;
    std::size_t iterations = 0;
};

struct SvmModel {
    SvmParams params;
    std::size_t classes = 0;
    Standardizer standardizer;
    RealMatrix support_vectors;  // standardized rows used by any machine
    std::vector<BinarySvm> machines;

    /// rows x classes matrix of f_c(x) = sum_i coef_i K(sv_i, x) + bias.
    RealMatrix decision_values(const RealMatrix &x) const;
    std::vector<int> predict(const RealMatrix &x) const;
};

/// n x m kernel matrix between the rows of a and b.
RealMatrix kernel_matrix(const RealMatrix &a, const RealMatrix &b, const SvmParams &params);

/// Solves the C-SVC dual for labels y in {-1, +1} on a precomputed kernel.
/// Working-set selection uses second-order information; stops when the
/// maximal KKT violation falls below params.tolerance.
BinarySvm smo_solve(const RealMatrix &kernel, std::span<const double> y, const SvmParams &params);

/// Standardizes with training statistics, then fits one machine per class.
/// Throws ParameterError on non-finite features.
SvmModel train_svm(const RealMatrix &x, std::span<const int> labels, std::size_t classes, const SvmParams &params);

/// Default grid: C in {0.1, 1, 10, 100} with rbf gamma in {0.01, 0.1, 1} and linear.
std::vector<SvmParams> default_svm_grid();

// ---------------------------------------------------------------------------
// Random forest

struct ForestParams {
    std::size_t trees = 100;
    std::size_t max_depth = 0;  // 0 means unlimited
    std::size_t min_samples_split = 2;
    std::uint64_t seed = 0;

    static std::vector<std::string> columns() { return {"trees", "max_depth"}; }
    std::vector<std::string> values() const;
};

struct TreeNode {
    int feature = -1;  // -1 for leaves
    double threshold = 0.0;
    int left = -1, right = -1;
    std::vector<std::size_t> histogram;  // class counts of the training samples reaching the node
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    const TreeNode &leaf(const RealVector &x) const;
    int predict(const RealVector &x) const;
    std::size_t depth() const;
};

struct ForestModel {
    ForestParams params;
    std::size_t classes = 0;
    std::vector<DecisionTree> trees;
    double oob_macro_f1 = 0.0;  // over samples with at least one out-of-bag vote

    /// Majority vote; ties go to the smallest class index.
    std::vector<int> predict(const RealMatrix &x) const;
};

/// Each tree grows on a bootstrap sample drawn from stream (seed, tree) and
/// considers floor(sqrt(p)) random features per split, chosen by Gini gain.
ForestModel train_rf(const RealMatrix &x, std::span<const int> labels, std::size_t classes,
                     const ForestParams &params, std::size_t workers = 0);

/// Default grid: trees in {100, 300}, depth in {8, 16, unlimited}.
std::vector<ForestParams> default_forest_grid(std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Grid search

struct CvRow {
    std::size_t point = 0;
    std::vector<std::string> values;
    std::size_t fold = 0;
    double macro_f1 = 0.0;
};

struct GridSearchResult {
    std::size_t best = 0;  // index into the grid
    double best_mean_macro_f1 = 0.0;
    std::vector<double> mean_macro_f1;  // per grid point
    std::vector<CvRow> table;           // |grid| * folds rows
    std::vector<std::string> columns;
};

/// Trains on all but one fold and predicts the held-out one.
using FitPredict = std::function<std::vector<int>(std::size_t point, const RealMatrix &x_train,
                                                  std::span<const int> y_train, const RealMatrix &x_valid)>;

/// Stratified fold assignment: each class is shuffled with `seed` and dealt
/// round-robin. Returns the fold of every row.
std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::size_t folds, std::uint64_t seed);

/// Exhaustive k-fold search. The best point has the highest mean validation
/// Macro-F1; exact ties go to the point listed first in `grid_order`,
/// which callers sort by increasing model complexity (identity if empty).
GridSearchResult grid_search(std::size_t grid_size, const FitPredict &fit_predict, const RealMatrix &x,
                             std::span<const int> labels, std::size_t classes, std::size_t folds,
                             std::uint64_t seed, std::vector<std::string> columns,
                             const std::function<std::vector<std::string>(std::size_t)> &describe,
                             std::span<const std::size_t> grid_order = {}, std::size_t workers = 0);

/// Grid search over SVM parameters with kernels computed once per fold and gamma.
GridSearchResult grid_search_svm(const RealMatrix &x, std::span<const int> labels, std::size_t classes,
                                 const std::vector<SvmParams> &grid, std::size_t folds, std::uint64_t seed,
                                 std::size_t workers = 0);
GridSearchResult grid_search_rf(const RealMatrix &x, std::span<const int> labels, std::size_t classes,
                                const std::vector<ForestParams> &grid, std::size_t folds, std::uint64_t seed,
                                std::size_t workers = 0);

/// "point,<columns...>,fold,val_macro_f1".
void write_cv_table(std::ostream &out, const GridSearchResult &result);

/// JSON manifest with the model parameters plus a PTCM sidecar
/// (SVM: support vectors, coefficient/bias blocks). Forests are stored as JSON.
void save_svm(const std::filesystem::path &path, const SvmModel &model);
SvmModel load_svm(const std::filesystem::path &path);
void save_forest(const std::filesystem::path &path, const ForestModel &model);
ForestModel load_forest(const std::filesystem::path &path);

}  // namespace npt
