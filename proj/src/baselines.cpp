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

#include "npt/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "npt/errors.hpp"
#include "npt/parallel.hpp"
#include "npt/rng.hpp"

namespace npt {

namespace {

std::string num(double x) {
    std::ostringstream s;
    s << x;
    return s.str();
}

void check_training_set(const RealMatrix &x, std::span<const int> labels, std::size_t classes) {
    if (x.rows() == 0 || x.cols() == 0) throw ParameterError("baseline: empty training set");
    if (std::size_t(x.rows()) != labels.size()) throw DimensionError("baseline: label count does not match rows");
    if (!x.allFinite()) throw ParameterError("baseline: non-finite features");
    for (int y : labels)
        if (y < 0 || std::size_t(y) >= classes) throw ParameterError("baseline: label out of range");
}

RealMatrix gather_rows(const RealMatrix &x, std::span<const std::size_t> rows) {
    RealMatrix out(Eigen::Index(rows.size()), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(Eigen::Index(i)) = x.row(Eigen::Index(rows[i]));
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Support vector machine

std::vector<std::string> SvmParams::values() const {
    return {kernel == KernelKind::linear ? "linear" : "rbf", num(c), kernel == KernelKind::linear ? "" : num(gamma)};
}

RealMatrix kernel_matrix(const RealMatrix &a, const RealMatrix &b, const SvmParams &params) {
    if (a.cols() != b.cols()) throw DimensionError("kernel_matrix: column mismatch");
    RealMatrix k = a * b.transpose();
    if (params.kernel == KernelKind::linear) return k;
    const RealVector na = a.rowwise().squaredNorm(), nb = b.rowwise().squaredNorm();
    for (Eigen::Index j = 0; j < k.cols(); ++j)
        for (Eigen::Index i = 0; i < k.rows(); ++i)
            k(i, j) = std::exp(-params.gamma * std::max(0.0, na(i) + nb(j) - 2.0 * k(i, j)));
    return k;
}

BinarySvm smo_solve(const RealMatrix &kernel, std::span<const double> y, const SvmParams &params) {
    const auto n = kernel.rows();
    if (kernel.cols() != n || std::size_t(n) != y.size()) throw DimensionError("smo_solve: size mismatch");
    if (!(params.c > 0.0)) throw ParameterError("smo_solve: C must be positive");
    constexpr double tau = 1e-12;
    const double c = params.c;
    std::vector<double> alpha(std::size_t(n), 0.0), grad(std::size_t(n), -1.0);
    auto upper = [&](Eigen::Index t) { return alpha[t] >= c; };
    auto lower = [&](Eigen::Index t) { return alpha[t] <= 0.0; };

    BinarySvm out;
    const std::size_t max_iter = std::max<std::size_t>(10'000'000, 100 * std::size_t(n));
    for (; out.iterations < max_iter; ++out.iterations) {
        double gmax = -std::numeric_limits<double>::infinity();
        Eigen::Index i = -1;
        for (Eigen::Index t = 0; t < n; ++t) {
            if (y[t] > 0 ? !upper(t) : !lower(t)) {
                const double v = -y[t] * grad[t];
                if (v >= gmax) {
                    gmax = v;
                    i = t;
                }
            }
        }
        if (i < 0) break;
        double gmax2 = -std::numeric_limits<double>::infinity(), best = std::numeric_limits<double>::infinity();
        Eigen::Index j = -1;
        const auto ki = kernel.col(i);
        for (Eigen::Index t = 0; t < n; ++t) {
            if (y[t] > 0 ? lower(t) : upper(t)) continue;
            const double v = y[t] * grad[t];
            gmax2 = std::max(gmax2, v);
            const double diff = gmax + v;
            if (diff > 0) {
                double quad = kernel(i, i) + kernel(t, t) - 2.0 * ki(t);
                if (quad <= 0) quad = tau;
                const double obj = -diff * diff / quad;
                if (obj <= best) {
                    best = obj;
                    j = t;
                }
            }
        }
        if (gmax + gmax2 < params.tolerance || j < 0) break;

        const auto kj = kernel.col(j);
        const double ai = alpha[i], aj = alpha[j];
        if (y[i] != y[j]) {
            double quad = kernel(i, i) + kernel(j, j) - 2.0 * ki(j);
            if (quad <= 0) quad = tau;
            const double delta = (-grad[i] - grad[j]) / quad;
            const double diff = ai - aj;
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0) {
                if (alpha[j] < 0) {
                    alpha[j] = 0;
                    alpha[i] = diff;
                }
            } else if (alpha[i] < 0) {
                alpha[i] = 0;
                alpha[j] = -diff;
            }
            if (diff > 0) {
                if (alpha[i] > c) {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if (alpha[j] > c) {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            double quad = kernel(i, i) + kernel(j, j) - 2.0 * ki(j);
            if (quad <= 0) quad = tau;
            const double delta = (grad[i] - grad[j]) / quad;
            const double sum = ai + aj;
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > c) {
                if (alpha[i] > c) {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if (alpha[j] < 0) {
                alpha[j] = 0;
                alpha[i] = sum;
            }
            if (sum > c) {
                if (alpha[j] > c) {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if (alpha[i] < 0) {
                alpha[i] = 0;
                alpha[j] = sum;
            }
        }
        const double di = (alpha[i] - ai) * y[i], dj = (alpha[j] - aj) * y[j];
        for (Eigen::Index t = 0; t < n; ++t) grad[t] += y[t] * (ki(t) * di + kj(t) * dj);
    }

    double ub = std::numeric_limits<double>::infinity(), lb = -ub, free_sum = 0.0;
    std::size_t free = 0;
    for (Eigen::Index t = 0; t < n; ++t) {
        const double yg = y[t] * grad[t];
        if (upper(t)) {
            if (y[t] < 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else if (lower(t)) {
            if (y[t] > 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else {
            ++free;
            free_sum += yg;
        }
    }
    const double rho = free > 0 ? free_sum / double(free) : 0.5 * (ub + lb);
    out.bias = -rho;
    for (Eigen::Index t = 0; t < n; ++t) {
        if (alpha[t] > 0.0) {
            out.support.push_back(std::size_t(t));
            out.coef.push_back(alpha[t] * y[t]);
        }
    }
    return out;
}

namespace {

// One-vs-rest machines on a precomputed training kernel; support indices
// refer to training rows.
std::vector<BinarySvm> fit_one_vs_rest(const RealMatrix &kernel, std::span<const int> labels, std::size_t classes,
                                       const SvmParams &params) {
    std::vector<BinarySvm> machines;
    std::vector<double> y(labels.size());
    for (std::size_t c = 0; c < classes; ++c) {
        for (std::size_t i = 0; i < labels.size(); ++i) y[i] = labels[i] == int(c) ? 1.0 : -1.0;
        machines.push_back(smo_solve(kernel, y, params));
    }
    return machines;
}

std::vector<int> argmax_rows(const RealMatrix &scores) {
    std::vector<int> out(std::size_t(scores.rows()));
    for (Eigen::Index i = 0; i < scores.rows(); ++i) scores.row(i).maxCoeff(&out[std::size_t(i)]);
    return out;
}

// Decision values from a kernel between evaluation rows and training rows.
RealMatrix ovr_scores(const RealMatrix &cross, const std::vector<BinarySvm> &machines) {
    RealMatrix s(cross.rows(), Eigen::Index(machines.size()));
    for (std::size_t c = 0; c < machines.size(); ++c) {
        const auto &m = machines[c];
        for (Eigen::Index r = 0; r < cross.rows(); ++r) {
            double f = m.bias;
            for (std::size_t t = 0; t < m.support.size(); ++t) f += m.coef[t] * cross(r, Eigen::Index(m.support[t]));
            s(r, Eigen::Index(c)) = f;
        }
    }
    return s;
}

}  // namespace

SvmModel train_svm(const RealMatrix &x, std::span<const int> labels, std::size_t classes, const SvmParams &params) {
    check_training_set(x, labels, classes);
    if (classes < 2) throw ParameterError("train_svm: need at least two classes");
    SvmModel model;
    model.params = params;
    model.classes = classes;
    model.standardizer = Standardizer::fit(x);
    const RealMatrix z = model.standardizer.apply(x);
    auto machines = fit_one_vs_rest(kernel_matrix(z, z, params), labels, classes, params);

    // Keep only rows that are support vectors of some machine and remap.
    std::map<std::size_t, std::size_t> remap;
    for (const auto &m : machines)
        for (std::size_t s : m.support) remap.emplace(s, 0);
    std::vector<std::size_t> rows;
    for (auto &[row, slot] : remap) {
        slot = rows.size();
        rows.push_back(row);
    }
    model.support_vectors = gather_rows(z, rows);
    for (auto &m : machines)
        for (auto &s : m.support) s = remap[s];
    model.machines = std::move(machines);
    return model;
}

RealMatrix SvmModel::decision_values(const RealMatrix &x) const {
    const RealMatrix z = standardizer.apply(x);
    return ovr_scores(kernel_matrix(z, support_vectors, params), machines);
}

std::vector<int> SvmModel::predict(const RealMatrix &x) const { return argmax_rows(decision_values(x)); }

std::vector<SvmParams> default_svm_grid() {
    std::vector<SvmParams> grid;
    for (double c : {0.1, 1.0, 10.0, 100.0}) {
        grid.push_back({KernelKind::linear, c, 0.0});
        for (double g : {0.01, 0.1, 1.0}) grid.push_back({KernelKind::rbf, c, g});
    }
    return grid;
}

// ---------------------------------------------------------------------------
// Random forest

std::vector<std::string> ForestParams::values() const {
    return {std::to_string(trees), max_depth == 0 ? "none" : std::to_string(max_depth)};
}

const TreeNode &DecisionTree::leaf(const RealVector &x) const {
    const TreeNode *node = &nodes.at(0);
    while (node->feature >= 0) node = &nodes[std::size_t(x(node->feature) <= node->threshold ? node->left : node->right)];
    return *node;
}

namespace {

int majority(const std::vector<std::size_t> &histogram) {
    return int(std::max_element(histogram.begin(), histogram.end()) - histogram.begin());
}

double gini(const std::vector<std::size_t> &h, std::size_t total) {
    if (total == 0) return 0.0;
    double s = 1.0;
    for (std::size_t c : h) s -= (double(c) / double(total)) * (double(c) / double(total));
    return s;
}

struct TreeBuilder {
    const RealMatrix &x;
    std::span<const int> labels;
    std::size_t classes;
    const ForestParams &params;
    CounterRng &rng;
    DecisionTree tree;
    std::vector<std::pair<double, std::size_t>> scratch;

    int grow(std::vector<std::size_t> &rows, std::size_t depth) {
        TreeNode node;
        node.histogram.assign(classes, 0);
        for (std::size_t r : rows) ++node.histogram[std::size_t(labels[r])];
        const int id = int(tree.nodes.size());
        tree.nodes.push_back(node);

        const bool pure = std::count(node.histogram.begin(), node.histogram.end(), 0) >= std::ptrdiff_t(classes) - 1;
        if (pure || rows.size() < params.min_samples_split || (params.max_depth > 0 && depth >= params.max_depth))
            return id;

        const auto p = std::size_t(x.cols());
        const std::size_t mtry = std::max<std::size_t>(1, std::size_t(std::floor(std::sqrt(double(p)))));
        std::vector<std::size_t> features(p);
        std::iota(features.begin(), features.end(), 0);
        for (std::size_t i = 0; i < mtry; ++i) std::swap(features[i], features[i + rng.below(p - i)]);

        const double parent = gini(node.histogram, rows.size());
        double best_gain = 1e-12, best_threshold = 0.0;
        int best_feature = -1;
        std::vector<std::size_t> left(classes);
        for (std::size_t f = 0; f < mtry; ++f) {
            const auto feature = Eigen::Index(features[f]);
            scratch.clear();
            for (std::size_t r : rows) scratch.emplace_back(x(Eigen::Index(r), feature), r);
            std::sort(scratch.begin(), scratch.end());
            std::fill(left.begin(), left.end(), 0);
            const double n = double(rows.size());
            // Incremental Gini: track sum of squared counts on both sides.
            double sq_left = 0.0, sq_right = 0.0;
            std::vector<std::size_t> right = node.histogram;
            for (std::size_t c : right) sq_right += double(c) * double(c);
            for (std::size_t i = 0; i + 1 < scratch.size(); ++i) {
                const auto y = std::size_t(labels[scratch[i].second]);
                sq_left += 2.0 * double(left[y]) + 1.0;
                ++left[y];
                sq_right -= 2.0 * double(right[y]) - 1.0;
                --right[y];
                if (scratch[i].first == scratch[i + 1].first) continue;
                const double nl = double(i + 1), nr = n - nl;
                const double impurity = (nl - sq_left / nl) / n + (nr - sq_right / nr) / n;
                const double gain = parent - impurity;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = int(feature);
                    best_threshold = 0.5 * (scratch[i].first + scratch[i + 1].first);
                }
            }
        }
        if (best_feature < 0) return id;

        std::vector<std::size_t> lrows, rrows;
        for (std::size_t r : rows) (x(Eigen::Index(r), best_feature) <= best_threshold ? lrows : rrows).push_back(r);
        rows.clear();
        rows.shrink_to_fit();
        const int l = grow(lrows, depth + 1);
        const int r = grow(rrows, depth + 1);
        tree.nodes[std::size_t(id)].feature = best_feature;
        tree.nodes[std::size_t(id)].threshold = best_threshold;
        tree.nodes[std::size_t(id)].left = l;
        tree.nodes[std::size_t(id)].right = r;
        return id;
    }
};

}  // namespace

int DecisionTree::predict(const RealVector &x) const { return majority(leaf(x).histogram); }

std::size_t DecisionTree::depth() const {
    std::vector<std::size_t> d(nodes.size(), 0);
    std::size_t deepest = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        deepest = std::max(deepest, d[i]);
        if (nodes[i].feature >= 0) {
            d[std::size_t(nodes[i].left)] = d[i] + 1;
            d[std::size_t(nodes[i].right)] = d[i] + 1;
        }
    }
    return deepest;
}

ForestModel train_rf(const RealMatrix &x, std::span<const int> labels, std::size_t classes,
                     const ForestParams &params, std::size_t workers) {
    check_training_set(x, labels, classes);
    if (params.trees < 1) throw ParameterError("train_rf: need at least one tree");
    const std::size_t n = labels.size();
    ForestModel model;
    model.params = params;
    model.classes = classes;
    model.trees.resize(params.trees);
    std::vector<std::vector<bool>> in_bag(params.trees, std::vector<bool>(n, false));
    parallel_for(params.trees, workers, [&](std::size_t t) {
        CounterRng rng(params.seed, t);
        std::vector<std::size_t> rows(n);
        for (auto &r : rows) {
            r = rng.below(n);
            in_bag[t][r] = true;
        }
        TreeBuilder builder{x, labels, classes, params, rng, {}, {}};
        builder.grow(rows, 0);
        model.trees[t] = std::move(builder.tree);
    });

    std::vector<int> truth, pred;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::size_t> votes(classes, 0);
        std::size_t cast = 0;
        const RealVector xi = x.row(Eigen::Index(i)).transpose();
        for (std::size_t t = 0; t < params.trees; ++t) {
            if (in_bag[t][i]) continue;
            ++votes[std::size_t(model.trees[t].predict(xi))];
            ++cast;
        }
        if (cast == 0) continue;
        truth.push_back(labels[i]);
        pred.push_back(majority(votes));
    }
    model.oob_macro_f1 = truth.empty() ? 0.0 : macro_f1(truth, pred, int(classes));
    return model;
}

std::vector<int> ForestModel::predict(const RealMatrix &x) const {
    std::vector<int> out(std::size_t(x.rows()));
    std::vector<std::size_t> votes(classes);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        std::fill(votes.begin(), votes.end(), 0);
        const RealVector xi = x.row(i).transpose();
        for (const auto &tree : trees) ++votes[std::size_t(tree.predict(xi))];
        out[std::size_t(i)] = majority(votes);
    }
    return out;
}

std::vector<ForestParams> default_forest_grid(std::uint64_t seed) {
    std::vector<ForestParams> grid;
    for (std::size_t trees : {100, 300})
        for (std::size_t depth : {8, 16, 0}) grid.push_back({trees, depth, 2, seed});
    return grid;
}

// ---------------------------------------------------------------------------
// Grid search

std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::size_t folds, std::uint64_t seed) {
    if (folds < 2) throw ParameterError("grid search: need at least two folds");
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    std::vector<std::size_t> fold(labels.size());
    CounterRng rng(seed, 0xF01D);
    std::size_t next = 0;
    for (auto &[label, rows] : by_class) {
        for (std::size_t i = rows.size(); i > 1; --i) std::swap(rows[i - 1], rows[rng.below(i)]);
        for (std::size_t r : rows) fold[r] = next++ % folds;
    }
    return fold;
}

namespace {

struct FoldSplit {
    std::vector<std::size_t> train, valid;
};

std::vector<FoldSplit> make_splits(std::span<const int> labels, std::size_t folds, std::uint64_t seed) {
    const auto assignment = stratified_folds(labels, folds, seed);
    std::vector<FoldSplit> splits(folds);
    for (std::size_t i = 0; i < labels.size(); ++i)
        for (std::size_t f = 0; f < folds; ++f) (assignment[i] == f ? splits[f].valid : splits[f].train).push_back(i);
    for (const auto &s : splits)
        if (s.valid.empty() || s.train.empty()) throw ParameterError("grid search: too few samples for the folds");
    return splits;
}

std::vector<int> gather_labels(std::span<const int> labels, std::span<const std::size_t> rows) {
    std::vector<int> out;
    for (std::size_t r : rows) out.push_back(labels[r]);
    return out;
}

void check_grid_input(std::size_t grid_size, std::span<const int> labels, std::size_t classes) {
    if (grid_size == 0) throw ParameterError("grid search: empty grid");
    std::vector<bool> seen(classes, false);
    for (int y : labels)
        if (y >= 0 && std::size_t(y) < classes) seen[std::size_t(y)] = true;
    if (std::count(seen.begin(), seen.end(), true) < 2)
        throw ParameterError("grid search: training labels contain a single class");
}

GridSearchResult finish(std::size_t grid_size, std::size_t folds, std::vector<CvRow> table,
                        std::vector<std::string> columns, std::span<const std::size_t> grid_order) {
    GridSearchResult r;
    r.columns = std::move(columns);
    r.mean_macro_f1.assign(grid_size, 0.0);
    for (const auto &row : table) r.mean_macro_f1[row.point] += row.macro_f1 / double(folds);
    std::vector<std::size_t> order(grid_order.begin(), grid_order.end());
    if (order.empty()) {
        order.resize(grid_size);
        std::iota(order.begin(), order.end(), 0);
    }
    r.best = order.front();
    for (std::size_t p : order)
        if (r.mean_macro_f1[p] > r.mean_macro_f1[r.best]) r.best = p;
    r.best_mean_macro_f1 = r.mean_macro_f1[r.best];
    std::sort(table.begin(), table.end(),
              [](const CvRow &a, const CvRow &b) { return std::tie(a.point, a.fold) < std::tie(b.point, b.fold); });
    r.table = std::move(table);
    return r;
}

}  // namespace

GridSearchResult grid_search(std::size_t grid_size, const FitPredict &fit_predict, const RealMatrix &x,
                             std::span<const int> labels, std::size_t classes, std::size_t folds,
                             std::uint64_t seed, std::vector<std::string> columns,
                             const std::function<std::vector<std::string>(std::size_t)> &describe,
                             std::span<const std::size_t> grid_order, std::size_t workers) {
    check_grid_input(grid_size, labels, classes);
    const auto splits = make_splits(labels, folds, seed);
    std::vector<CvRow> table(grid_size * folds);
    parallel_for(grid_size * folds, workers, [&](std::size_t task) {
        const std::size_t point = task / folds, fold = task % folds;
        const auto &s = splits[fold];
        const auto ytr = gather_labels(labels, s.train), yva = gather_labels(labels, s.valid);
        const auto pred = fit_predict(point, gather_rows(x, s.train), ytr, gather_rows(x, s.valid));
        table[task] = {point, describe(point), fold, macro_f1(yva, pred, int(classes))};
    });
    return finish(grid_size, folds, std::move(table), std::move(columns), grid_order);
}

GridSearchResult grid_search_svm(const RealMatrix &x, std::span<const int> labels, std::size_t classes,
                                 const std::vector<SvmParams> &grid, std::size_t folds, std::uint64_t seed,
                                 std::size_t workers) {
    check_grid_input(grid.size(), labels, classes);
    check_training_set(x, labels, classes);
    const auto splits = make_splits(labels, folds, seed);

    // Points sharing a kernel (kind, gamma) reuse one kernel per fold.
    std::map<std::pair<int, double>, std::vector<std::size_t>> by_kernel;
    for (std::size_t p = 0; p < grid.size(); ++p)
        by_kernel[{int(grid[p].kernel), grid[p].kernel == KernelKind::rbf ? grid[p].gamma : 0.0}].push_back(p);
    std::vector<std::vector<std::size_t>> groups;
    for (auto &[key, points] : by_kernel) groups.push_back(points);

    std::vector<CvRow> table(grid.size() * folds);
    parallel_for(groups.size() * folds, workers, [&](std::size_t task) {
        const auto &points = groups[task / folds];
        const std::size_t fold = task % folds;
        const auto &s = splits[fold];
        const RealMatrix xtr = gather_rows(x, s.train), xva = gather_rows(x, s.valid);
        const auto ytr = gather_labels(labels, s.train), yva = gather_labels(labels, s.valid);
        const Standardizer st = Standardizer::fit(xtr);
        const RealMatrix ztr = st.apply(xtr), zva = st.apply(xva);
        const RealMatrix k = kernel_matrix(ztr, ztr, grid[points.front()]);
        const RealMatrix cross = kernel_matrix(zva, ztr, grid[points.front()]);
        for (std::size_t p : points) {
            const auto machines = fit_one_vs_rest(k, ytr, classes, grid[p]);
            const auto pred = argmax_rows(ovr_scores(cross, machines));
            table[p * folds + fold] = {p, grid[p].values(), fold, macro_f1(yva, pred, int(classes))};
        }
    });

    // Complexity order: linear before rbf, then smaller C, then smaller gamma.
    std::vector<std::size_t> order(grid.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::make_tuple(int(grid[a].kernel), grid[a].c, grid[a].gamma) <
               std::make_tuple(int(grid[b].kernel), grid[b].c, grid[b].gamma);
    });
    return finish(grid.size(), folds, std::move(table), SvmParams::columns(), order);
}

GridSearchResult grid_search_rf(const RealMatrix &x, std::span<const int> labels, std::size_t classes,
                                const std::vector<ForestParams> &grid, std::size_t folds, std::uint64_t seed,
                                std::size_t workers) {
    auto fit = [&](std::size_t point, const RealMatrix &xtr, std::span<const int> ytr, const RealMatrix &xva) {
        return train_rf(xtr, ytr, classes, grid[point], 1).predict(xva);
    };
    auto describe = [&](std::size_t point) { return grid[point].values(); };
    // Fewer trees first, then shallower (unlimited depth counts as deepest).
    std::vector<std::size_t> order(grid.size());
    std::iota(order.begin(), order.end(), 0);
    auto depth = [](std::size_t d) { return d == 0 ? std::numeric_limits<std::size_t>::max() : d; };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::make_pair(grid[a].trees, depth(grid[a].max_depth)) <
               std::make_pair(grid[b].trees, depth(grid[b].max_depth));
    });
    return grid_search(grid.size(), fit, x, labels, classes, folds, seed, ForestParams::columns(), describe, order,
                       workers);
}

void write_cv_table(std::ostream &out, const GridSearchResult &result) {
    out << "point";
    for (const auto &c : result.columns) out << ',' << c;
    out << ",fold,val_macro_f1\n";
    for (const auto &row : result.table) {
        out << row.point;
        for (const auto &v : row.values) out << ',' << v;
        out << ',' << row.fold << ',' << format_real(row.macro_f1) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

std::filesystem::path sidecar(const std::filesystem::path &path) {
    std::filesystem::path p = path;
    p.replace_extension(".ptcm");
    return p;
}

std::vector<double> to_vector(const RealVector &v) { return {v.data(), v.data() + v.size()}; }

RealVector from_vector(const std::vector<double> &v) {
    return Eigen::Map<const RealVector>(v.data(), Eigen::Index(v.size()));
}

nlohmann::json read_json(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw ParameterError("cannot read " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception &e) {
        throw ParameterError("malformed " + path.string() + ": " + e.what());
    }
}

}  // namespace

void save_svm(const std::filesystem::path &path, const SvmModel &model) {
    nlohmann::json j;
    j["format"] = "npt-svm";
    j["kernel"] = model.params.kernel == KernelKind::linear ? "linear" : "rbf";
    j["C"] = model.params.c;
    j["gamma"] = model.params.gamma;
    j["tolerance"] = model.params.tolerance;
    j["classes"] = model.classes;
    j["standardizer"] = {{"mean", to_vector(model.standardizer.mean)}, {"scale", to_vector(model.standardizer.scale)}};
    j["weights_file"] = sidecar(path).filename().string();
    nlohmann::json machines = nlohmann::json::array();
    for (const auto &m : model.machines)
        machines.push_back({{"support", m.support}, {"bias", m.bias}, {"iterations", m.iterations}});
    j["machines"] = machines;

    std::ofstream bin(sidecar(path), std::ios::binary);
    if (!bin) throw ParameterError("cannot write " + sidecar(path).string());
    write_ptcm(bin, model.support_vectors.cast<Complex>());
    for (const auto &m : model.machines) write_ptcm(bin, from_vector(m.coef).cast<Complex>());
    std::ofstream out(path);
    if (!out) throw ParameterError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

SvmModel load_svm(const std::filesystem::path &path) {
    const auto j = read_json(path);
    SvmModel model;
    try {
        if (j.at("format") != "npt-svm") throw ParameterError("not an SVM model: " + path.string());
        model.params.kernel = j.at("kernel") == "linear" ? KernelKind::linear : KernelKind::rbf;
        model.params.c = j.at("C").get<double>();
        model.params.gamma = j.at("gamma").get<double>();
        model.params.tolerance = j.at("tolerance").get<double>();
        model.classes = j.at("classes").get<std::size_t>();
        model.standardizer.mean = from_vector(j["standardizer"].at("mean").get<std::vector<double>>());
        model.standardizer.scale = from_vector(j["standardizer"].at("scale").get<std::vector<double>>());
        std::ifstream bin(path.parent_path() / j.at("weights_file").get<std::string>(), std::ios::binary);
        if (!bin) throw ParameterError("cannot read SVM weights for " + path.string());
        model.support_vectors = read_ptcm(bin).real();
        for (const auto &m : j.at("machines")) {
            BinarySvm b;
            b.support = m.at("support").get<std::vector<std::size_t>>();
            b.bias = m.at("bias").get<double>();
            b.iterations = m.at("iterations").get<std::size_t>();
            const RealVector coef = read_ptcm(bin).real();
            b.coef.assign(coef.data(), coef.data() + coef.size());
            if (b.coef.size() != b.support.size()) throw ParameterError("SVM weights do not match the manifest");
            model.machines.push_back(std::move(b));
        }
    } catch (const nlohmann::json::exception &e) {
        throw ParameterError("malformed SVM model " + path.string() + ": " + e.what());
    }
    return model;
}

void save_forest(const std::filesystem::path &path, const ForestModel &model) {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto &t : model.trees) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto &n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.histogram});
        trees.push_back(nodes);
    }
    nlohmann::json j{{"format", "npt-forest"},
                     {"trees", model.params.trees},
                     {"max_depth", model.params.max_depth},
                     {"min_samples_split", model.params.min_samples_split},
                     {"seed", model.params.seed},
                     {"classes", model.classes},
                     {"oob_macro_f1", model.oob_macro_f1},
                     {"forest", trees}};
    std::ofstream out(path);
    if (!out) throw ParameterError("cannot write " + path.string());
    out << j.dump() << '\n';
}

ForestModel load_forest(const std::filesystem::path &path) {
    const auto j = read_json(path);
    ForestModel model;
    try {
        if (j.at("format") != "npt-forest") throw ParameterError("not a forest model: " + path.string());
        model.params.trees = j.at("trees").get<std::size_t>();
        model.params.max_depth = j.at("max_depth").get<std::size_t>();
        model.params.min_samples_split = j.at("min_samples_split").get<std::size_t>();
        model.params.seed = j.at("seed").get<std::uint64_t>();
        model.classes = j.at("classes").get<std::size_t>();
        model.oob_macro_f1 = j.at("oob_macro_f1").get<double>();
        for (const auto &t : j.at("forest")) {
            DecisionTree tree;
            for (const auto &n : t)
                tree.nodes.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(),
                                      n.at(3).get<int>(), n.at(4).get<std::vector<std::size_t>>()});
            model.trees.push_back(std::move(tree));
        }
    } catch (const nlohmann::json::exception &e) {
        throw ParameterError("malformed forest model " + path.string() + ": " + e.what());
    }
    return model;
}

}  // namespace npt
