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

#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "npt/analysis.hpp"
#include "npt/baselines.hpp"
#include "npt/errors.hpp"
#include "npt/features.hpp"
#include "npt/learn.hpp"
#include "npt/parallel.hpp"
#include "npt/rng.hpp"
#include "npt/states.hpp"

#ifndef NPT_VERSION
#define NPT_VERSION "unknown"
#endif

namespace npt::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitParameter = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitUnreachable = 4;

// ---------------------------------------------------------------------------
// Output bookkeeping and manifests

std::string fnv1a_file(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char c;
    while (in.get(c)) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

class Session {
public:
    explicit Session(std::string command) : command_(std::move(command)), start_(std::chrono::steady_clock::now()) {}

    std::ofstream open(const fs::path &path, bool binary = false) {
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
        if (!out) throw ParameterError("cannot write " + path.string());
        add_output(path);
        return out;
    }

    void add_output(const fs::path &path) {
        if (std::find(outputs_.begin(), outputs_.end(), path) == outputs_.end()) outputs_.push_back(path);
    }

    json &results() { return results_; }

    void write_manifest(const fs::path &path, const json &config) const {
        json outputs = json::array();
        for (const auto &p : outputs_) outputs.push_back({{"path", p.string()}, {"fnv1a64", fnv1a_file(p)}});
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        json m{{"format", "npt-manifest"},
               {"command", command_},
               {"config", config},
               {"version", NPT_VERSION},
               {"outputs", outputs},
               {"wall_clock_seconds", seconds}};
        if (!results_.is_null()) m["results"] = results_;
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        std::ofstream out(path);
        if (!out) throw ParameterError("cannot write manifest " + path.string());
        out << m.dump(2) << '\n';
    }

private:
    std::string command_;
    std::chrono::steady_clock::time_point start_;
    std::vector<fs::path> outputs_;
    json results_;
};

// Resolved option values of a subcommand, as strings the parser accepts again.
json resolved_config(const CLI::App &sub) {
    json config = json::object();
    for (const CLI::Option *opt : sub.get_options()) {
        if (opt->get_lnames().empty()) continue;
        const std::string name = opt->get_lnames().front();
        if (name == "help" || name == "config") continue;
        if (opt->get_expected_max() == 0) {
            config[name] = opt->count() > 0;
            continue;
        }
        if (opt->count() > 0) {
            const auto &r = opt->results();
            config[name] = r.size() == 1 ? json(r.front()) : json(r);
        } else if (!opt->get_default_str().empty()) {
            config[name] = opt->get_default_str();
        }
    }
    return config;
}

// ---------------------------------------------------------------------------
// Parsing helpers

std::vector<int> parse_int_list(const std::string &text, const std::string &what) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stoi(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception &) {
            throw ParameterError(what + ": cannot parse '" + item + "'");
        }
    }
    if (out.empty()) throw ParameterError(what + ": empty list");
    return out;
}

// "xi:class,..." e.g. "0:0,1:1,2:1" merges NPT_1 and NPT_2.
std::map<int, int> parse_label_map(const std::string &text) {
    std::map<int, int> out;
    if (text.empty()) return out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw ParameterError("--label-map: expected xi:class, got '" + item + "'");
        const auto from = parse_int_list(item.substr(0, colon), "--label-map");
        const auto to = parse_int_list(item.substr(colon + 1), "--label-map");
        out[from.front()] = to.front();
    }
    return out;
}

// Applies the label map (identity when empty) and drops states whose xi it does not cover.
std::vector<LabeledState> relabel(std::vector<LabeledState> states, const std::map<int, int> &map) {
    if (map.empty()) return states;
    std::vector<LabeledState> out;
    for (auto &s : states) {
        const auto it = map.find(s.label.xi);
        if (it == map.end()) continue;
        s.label.xi = it->second;
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<LabeledState> load_dataset(const fs::path &path, double cutoff) {
    std::ifstream in(path);
    if (!in) throw ParameterError("cannot read dataset " + path.string());
    return read_dataset_csv(in, {}, cutoff);
}

SwapConvention swap_from(const std::string &name) { return parse_swap_convention(name); }

fs::path sic_cache_path(const std::string &option, const fs::path &near) {
    if (!option.empty()) return option;
    return (near.has_parent_path() ? near.parent_path() : fs::path(".")) / "sic_d4.json";
}

json evaluation_json(const Evaluation &e) {
    const json confusion = e.confusion;
    return {{"macro_f1", e.macro_f1}, {"accuracy", e.accuracy}, {"per_class_f1", e.per_class_f1},
            {"confusion", confusion}};
}

std::pair<double, double> mean_std(const std::vector<double> &v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= double(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    return {mean, v.size() > 1 ? std::sqrt(var / double(v.size() - 1)) : 0.0};
}

json summarize(const std::vector<Evaluation> &evals) {
    std::vector<double> macro, acc;
    for (const auto &e : evals) {
        macro.push_back(e.macro_f1);
        acc.push_back(e.accuracy);
    }
    const auto [m, s] = mean_std(macro);
    const auto [am, as] = mean_std(acc);
    const std::size_t classes = evals.front().per_class_f1.size();
    json pc_mean = json::array(), pc_std = json::array();
    for (std::size_t c = 0; c < classes; ++c) {
        std::vector<double> v;
        for (const auto &e : evals) v.push_back(e.per_class_f1[c]);
        const auto [cm, cs] = mean_std(v);
        pc_mean.push_back(cm);
        pc_std.push_back(cs);
    }
    json runs = json::array();
    for (const auto &e : evals) runs.push_back(evaluation_json(e));
    return {{"macro_f1", {{"mean", m}, {"std", s}, {"values", macro}}},
            {"accuracy", {{"mean", am}, {"std", as}}},
            {"per_class_f1", {{"mean", pc_mean}, {"std", pc_std}}},
            {"runs", runs}};
}

// ---------------------------------------------------------------------------
// Commands

struct Common {
    std::uint64_t seed = 0;
    double cutoff = kDefaultCutoff;
    std::size_t workers = 0;
};

void add_common(CLI::App *sub, Common &c) {
    sub->add_option("--seed", c.seed, "Master seed");
    sub->add_option("--cutoff", c.cutoff, "Eigenvalues below -cutoff count as negative")->check(CLI::PositiveNumber);
    sub->add_option("--workers", c.workers, "Worker threads (0 = all cores)");
}

// gen ------------------------------------------------------------------------

struct GenOptions {
    Common common;
    std::string ensemble = "hs";
    std::size_t count = 1000;
    std::size_t mixture_n = 15;
    std::string balanced;
    std::size_t per_class = 1500;
    std::string policy = "hs";
    std::uint64_t attempt_budget = kDefaultAttemptBudget;
    bool ptcm = false;
    std::string out;
};

void cmd_gen(const GenOptions &o, Session &session) {
    std::vector<LabeledState> states;
    if (!o.balanced.empty()) {
        const auto classes = parse_int_list(o.balanced, "--balanced");
        GeneratorPolicy policy;
        if (o.policy == "mixture-uniform") policy = GeneratorPolicy::mixture_uniform(o.mixture_n);
        else if (o.policy != "hs") throw ParameterError("--policy must be hs or mixture-uniform");
        BalancedDataset ds = balanced_dataset(std::set<int>(classes.begin(), classes.end()), o.per_class, policy,
                                              o.common.seed, o.common.cutoff, o.attempt_budget, o.common.workers);
        session.results()["draws"] = ds.draws;
        states = std::move(ds.states);
    } else {
        EnsembleSpec spec{parse_ensemble(o.ensemble), o.mixture_n, o.common.seed, o.common.cutoff, {}};
        validate(spec);
        std::vector<std::optional<LabeledState>> slots(o.count);
        parallel_for(o.count, o.common.workers, [&](std::size_t i) { slots[i] = make_labeled(spec, i); });
        for (auto &s : slots) states.push_back(std::move(*s));
    }
    auto out = session.open(o.out);
    write_dataset_csv(out, states);
    out.close();
    if (o.ptcm) {
        fs::path bin = o.out;
        bin.replace_extension(".ptcm");
        auto b = session.open(bin, true);
        write_dataset_ptcm(b, states);
        const json side{{"ensemble", o.balanced.empty() ? o.ensemble : "balanced:" + o.policy},
                        {"seed", o.common.seed},
                        {"cutoff", o.common.cutoff},
                        {"count", states.size()}};
        auto j = session.open(fs::path(bin.string() + ".json"));
        j << side.dump(2) << '\n';
    }
    std::array<std::size_t, 5> counts{};
    for (const auto &s : states) ++counts[std::size_t(std::min(s.label.xi, 4))];
    session.results()["class_counts"] = counts;
    std::cout << "wrote " << states.size() << " states to " << o.out << " (xi=0..3: " << counts[0] << ' '
              << counts[1] << ' ' << counts[2] << ' ' << counts[3] << ")\n";
}

// features -------------------------------------------------------------------

struct FeatureOptions {
    Common common;
    std::string data;
    std::string set = "cmw";
    std::size_t k = 64;
    std::size_t copies = 1;
    std::string swap = "virtual_swap";
    std::string sic_cache;
    std::string out;
};

void cmd_features(const FeatureOptions &o, Session &session) {
    const auto states = load_dataset(o.data, o.common.cutoff);
    FeatureTable table;
    FeatureSidecar sidecar;
    sidecar.k = o.k;
    if (o.set == "cmw") {
        const SicPovm16 sic = load_or_build_sic(sic_cache_path(o.sic_cache, o.out));
        table = cmw_feature_table(states, cmw_config(o.k), sic, swap_from(o.swap), o.common.workers);
        sidecar.swap_convention = o.swap;
        sidecar.povm_hash = povm_hash(sic);
    } else if (o.set == "learned-init") {
        if (o.k == 0) throw ParameterError("--k must be positive");
        const ObservableSet obs = random_observables(o.k, o.copies, o.common.seed);
        table.values.resize(Eigen::Index(states.size()), Eigen::Index(o.k));
        table.mask.resize(states.size());
        parallel_for(states.size(), o.common.workers, [&](std::size_t i) {
            const FeatureVector f = learned_features(states[i].rho, obs);
            table.values.row(Eigen::Index(i)) = f.values.transpose();
            table.mask[i] = f.mask;
        });
        for (const auto &s : states) {
            table.index.push_back(s.index);
            table.labels.push_back(s.label.xi);
        }
        sidecar.kind = "learned";
        sidecar.copies = o.copies;
    } else {
        throw ParameterError("--set must be cmw or learned-init");
    }
    auto out = session.open(o.out);
    write_feature_csv(out, table);
    fs::path side = o.out;
    side.replace_extension(".json");
    auto s = session.open(side);
    write_feature_sidecar(s, sidecar);
    std::cout << "wrote " << table.size() << " x " << table.k() << " features to " << o.out << '\n';
}

// train / eval -----------------------------------------------------------------

struct TrainOptions {
    Common common;
    std::string model;
    std::size_t k = 64;
    std::string data, features, test, test_features;
    std::string classes = "0,1,2";
    std::string label_map;
    std::size_t repeats = 1;
    std::size_t epochs = 100, batch = 256, patience = 10, folds = 3;
    double lr = 1e-3, val_fraction = 0.1;
    std::string swap = "virtual_swap";
    std::string sic_cache;
    std::string out;
};

enum class Family { ann, svm, rf };

Family family_of(const std::string &model) {
    if (model == "svm") return Family::svm;
    if (model == "rf") return Family::rf;
    parse_model(model);
    return Family::ann;
}

struct FeatureContext {
    std::size_t k = 0;
    std::string swap;
    std::string sic_cache;
    double cutoff = kDefaultCutoff;
    std::size_t workers = 0;
    std::map<int, int> label_map;
};

// Rows for a CMW-fed model from either a feature CSV (checked against k and
// the swap convention) or a dataset CSV featurized on the fly.
FeatureTable cmw_rows(const std::string &dataset, const std::string &feature_file, const FeatureContext &ctx,
                      const fs::path &near) {
    FeatureTable table;
    if (!feature_file.empty()) {
        std::ifstream in(feature_file);
        if (!in) throw ParameterError("cannot read features " + feature_file);
        table = read_feature_csv(in);
        fs::path side = feature_file;
        side.replace_extension(".json");
        std::ifstream sin(side);
        if (sin) {
            const FeatureSidecar sc = read_feature_sidecar(sin);
            if (sc.kind != "cmw") throw ParameterError("feature file is not a CMW table: " + feature_file);
            if (sc.swap_convention != ctx.swap)
                throw ParameterError("feature file uses swap convention " + sc.swap_convention);
        }
        if (table.k() != ctx.k)
            throw DimensionError("feature file has k = " + std::to_string(table.k()) + ", model expects " +
                                 std::to_string(ctx.k));
    } else {
        const auto states = load_dataset(dataset, ctx.cutoff);
        const SicPovm16 sic = load_or_build_sic(sic_cache_path(ctx.sic_cache, near));
        table = cmw_feature_table(states, cmw_config(ctx.k), sic, swap_from(ctx.swap), ctx.workers);
    }
    if (!ctx.label_map.empty()) {
        FeatureTable kept;
        std::vector<Eigen::Index> rows;
        for (std::size_t i = 0; i < table.size(); ++i) {
            const auto it = ctx.label_map.find(table.labels[i]);
            if (it == ctx.label_map.end()) continue;
            rows.push_back(Eigen::Index(i));
            kept.index.push_back(table.index[i]);
            kept.labels.push_back(it->second);
            kept.mask.push_back(table.mask[i]);
        }
        kept.values = table.values(rows, Eigen::all);
        table = std::move(kept);
    }
    return table;
}

Samples model_samples(ModelKind kind, const std::string &dataset, const std::string &feature_file,
                      const FeatureContext &ctx, const std::vector<int> &classes, const fs::path &near) {
    if (kind == ModelKind::ann_cmw) return samples_from_features(cmw_rows(dataset, feature_file, ctx, near), classes);
    if (dataset.empty()) throw ParameterError("learned-observable models need --data (density matrices)");
    return samples_from_states(relabel(load_dataset(dataset, ctx.cutoff), ctx.label_map), classes);
}

void baseline_data(const FeatureTable &table, const std::vector<int> &classes, RealMatrix &x, std::vector<int> &y) {
    x = table.values;
    y = encode_labels(table.labels, classes);
}

json baseline_wrapper(const std::string &model, const FeatureContext &ctx, const std::vector<int> &classes,
                      const std::string &label_map, const std::string &file) {
    return {{"format", "npt-baseline"}, {"model", model},       {"k", ctx.k},
            {"classes", classes},       {"label_map", label_map}, {"swap_convention", ctx.swap},
            {"file", file}};
}

void cmd_train(const TrainOptions &o, Session &session) {
    const Family family = family_of(o.model);
    if (o.repeats == 0) throw ParameterError("--repeats must be positive");
    if (o.data.empty() && o.features.empty()) throw ParameterError("train needs --data or --features");
    const auto classes = parse_int_list(o.classes, "--classes");
    FeatureContext ctx{o.k, o.swap, o.sic_cache, o.common.cutoff, o.common.workers, parse_label_map(o.label_map)};
    const fs::path dir = o.out;
    fs::create_directories(dir);
    const bool has_test = !o.test.empty() || !o.test_features.empty();
    std::vector<Evaluation> test_evals;
    std::vector<std::uint64_t> seeds;

    json extra{{"swap_convention", o.swap}, {"label_map", o.label_map}};
    if (family == Family::ann) {
        const ModelKind kind = parse_model(o.model);
        const Samples train_set = model_samples(kind, o.data, o.features, ctx, classes, dir / "x");
        std::optional<Samples> test_set;
        if (has_test) test_set = model_samples(kind, o.test, o.test_features, ctx, classes, dir / "x");
        for (std::size_t r = 0; r < o.repeats; ++r) {
            TrainConfig cfg;
            cfg.kind = kind;
            cfg.k = o.k;
            cfg.learning_rate = o.lr;
            cfg.batch_size = o.batch;
            cfg.epochs = o.epochs;
            cfg.patience = o.patience;
            cfg.validation_fraction = o.val_fraction;
            cfg.classes = classes;
            cfg.seed = derive_seed(o.common.seed, r);
            seeds.push_back(cfg.seed);
            const TrainResult result = train(train_set, cfg);
            const std::string stem = "model_r" + std::to_string(r);
            save_checkpoint(dir / (stem + ".json"), result.model, extra.dump());
            session.add_output(dir / (stem + ".json"));
            session.add_output(dir / (stem + ".ptcm"));
            auto log = session.open(dir / ("train_log_r" + std::to_string(r) + ".csv"));
            write_training_log(log, result.log);
            std::cout << o.model << " repeat " << r << ": best epoch " << result.best_epoch << ", val Macro-F1 "
                      << result.best_val_macro_f1;
            if (test_set) {
                test_evals.push_back(evaluate(result.model, *test_set));
                std::cout << ", test Macro-F1 " << test_evals.back().macro_f1;
            }
            std::cout << '\n';
        }
    } else {
        RealMatrix x, xt;
        std::vector<int> y, yt;
        baseline_data(cmw_rows(o.data, o.features, ctx, dir / "x"), classes, x, y);
        if (has_test) baseline_data(cmw_rows(o.test, o.test_features, ctx, dir / "x"), classes, xt, yt);
        for (std::size_t r = 0; r < o.repeats; ++r) {
            const std::uint64_t seed = derive_seed(o.common.seed, r);
            seeds.push_back(seed);
            const std::string stem = "model_r" + std::to_string(r);
            GridSearchResult search;
            std::vector<int> pred;
            std::string detail;
            if (family == Family::svm) {
                const auto grid = default_svm_grid();
                search = grid_search_svm(x, y, classes.size(), grid, o.folds, seed, o.common.workers);
                const SvmModel m = train_svm(x, y, classes.size(), grid[search.best]);
                save_svm(dir / (stem + ".svm.json"), m);
                session.add_output(dir / (stem + ".svm.json"));
                session.add_output(dir / (stem + ".svm.ptcm"));
                if (has_test) pred = m.predict(xt);
                const auto v = grid[search.best].values();
                detail = v[0] + " C=" + v[1] + (v[2].empty() ? "" : " gamma=" + v[2]);
                auto w = session.open(dir / (stem + ".json"));
                w << baseline_wrapper("svm", ctx, classes, o.label_map, stem + ".svm.json").dump(2) << '\n';
            } else {
                auto grid = default_forest_grid(seed);
                search = grid_search_rf(x, y, classes.size(), grid, o.folds, seed, o.common.workers);
                const ForestModel m = train_rf(x, y, classes.size(), grid[search.best], o.common.workers);
                save_forest(dir / (stem + ".rf.json"), m);
                session.add_output(dir / (stem + ".rf.json"));
                if (has_test) pred = m.predict(xt);
                const auto v = grid[search.best].values();
                detail = "trees=" + v[0] + " depth=" + v[1];
                auto w = session.open(dir / (stem + ".json"));
                w << baseline_wrapper("rf", ctx, classes, o.label_map, stem + ".rf.json").dump(2) << '\n';
            }
            auto cv = session.open(dir / ("cv_table_r" + std::to_string(r) + ".csv"));
            write_cv_table(cv, search);
            std::cout << o.model << " repeat " << r << ": best " << detail << ", CV Macro-F1 "
                      << search.best_mean_macro_f1;
            if (has_test) {
                test_evals.push_back(evaluate_predictions(yt, pred, int(classes.size())));
                std::cout << ", test Macro-F1 " << test_evals.back().macro_f1;
            }
            std::cout << '\n';
        }
    }
    if (has_test) {
        json metrics = summarize(test_evals);
        metrics["model"] = o.model;
        metrics["k"] = o.k;
        metrics["classes"] = classes;
        metrics["repeats"] = o.repeats;
        metrics["seeds"] = seeds;
        auto m = session.open(dir / "metrics.json");
        m << metrics.dump(2) << '\n';
        session.results()["macro_f1_mean"] = metrics["macro_f1"]["mean"];
        std::cout << "test Macro-F1 " << metrics["macro_f1"]["mean"].get<double>() << " +- "
                  << metrics["macro_f1"]["std"].get<double>() << " over " << o.repeats << " repeat(s)\n";
    }
    session.results()["seeds"] = seeds;
}

struct EvalOptions {
    Common common;
    std::string model_file, data, features, sic_cache, out;
};

json read_json_file(const fs::path &path) {
    std::ifstream in(path);
    if (!in) throw ParameterError("cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception &e) {
        throw ParameterError("malformed " + path.string() + ": " + e.what());
    }
}

void cmd_eval(const EvalOptions &o, Session &session) {
    if (o.data.empty() && o.features.empty()) throw ParameterError("eval needs --data or --features");
    const fs::path file = o.model_file;
    const json j = read_json_file(file);
    const std::string format = j.value("format", "");
    Evaluation e;
    std::string model_name_str;
    if (format == "npt-checkpoint") {
        const Classifier model = load_checkpoint(file);
        const json extra = j.value("extra", json::object());
        FeatureContext ctx{model.k, extra.value("swap_convention", "virtual_swap"), o.sic_cache, o.common.cutoff,
                           o.common.workers, parse_label_map(extra.value("label_map", ""))};
        const Samples data = model_samples(model.kind, o.data, o.features, ctx, model.classes, o.out);
        e = evaluate(model, data);
        model_name_str = model_name(model.kind);
    } else if (format == "npt-baseline") {
        const std::vector<int> classes = j.at("classes").get<std::vector<int>>();
        FeatureContext ctx{j.at("k").get<std::size_t>(), j.at("swap_convention").get<std::string>(), o.sic_cache,
                           o.common.cutoff, o.common.workers, parse_label_map(j.value("label_map", ""))};
        RealMatrix x;
        std::vector<int> y;
        baseline_data(cmw_rows(o.data, o.features, ctx, o.out), classes, x, y);
        const fs::path inner = file.parent_path() / j.at("file").get<std::string>();
        model_name_str = j.at("model").get<std::string>();
        const std::vector<int> pred =
            model_name_str == "svm" ? load_svm(inner).predict(x) : load_forest(inner).predict(x);
        e = evaluate_predictions(y, pred, int(classes.size()));
    } else {
        throw ParameterError("unrecognized model file " + file.string());
    }
    json report = evaluation_json(e);
    report["model"] = model_name_str;
    report["model_file"] = o.model_file;
    auto out = session.open(o.out);
    out << report.dump(2) << '\n';
    std::cout << model_name_str << ": Macro-F1 " << e.macro_f1 << ", accuracy " << e.accuracy << '\n';
}

// stats / transition -------------------------------------------------------------

struct StatsOptions {
    Common common;
    std::string ensemble = "hs";
    std::size_t n = 100000;
    std::size_t mixture_n = 15;
    std::string out;
};

void cmd_stats(const StatsOptions &o, Session &session) {
    EnsembleSpec spec{parse_ensemble(o.ensemble), o.mixture_n, o.common.seed, o.common.cutoff, {}};
    const EnsembleStats stats = ensemble_stats(spec, o.n, o.common.workers);
    auto out = session.open(o.out);
    out << "ensemble,mixture_n,n,xi,count,probability,std_error\n";
    const int bound = max_negative_eigenvalues(spec.dims);
    for (int xi = 0; xi <= bound; ++xi)
        out << o.ensemble << ',' << o.mixture_n << ',' << stats.n << ',' << xi << ',' << stats.counts[std::size_t(xi)]
            << ',' << format_real(stats.probability(xi)) << ',' << format_real(stats.standard_error(xi)) << '\n';
    out << o.ensemble << ',' << o.mixture_n << ',' << stats.n << ",>" << bound << ',' << stats.above_bound << ','
        << format_real(double(stats.above_bound) / double(stats.n)) << ",0\n";
    for (int xi = 0; xi <= bound; ++xi) std::cout << "P(xi=" << xi << ") = " << stats.probability(xi) << '\n';
    session.results()["above_bound"] = stats.above_bound;
}

struct TransitionOptions {
    Common common;
    std::size_t points = 200;
    double alpha_min = 0.5, alpha_max = 1.0;
    std::size_t samples = 2000;
    bool crossing = false;
    std::size_t crossing_samples = 20000;
    std::string out;
};

void cmd_transition(const TransitionOptions &o, Session &session) {
    if (o.points < 2 || !(o.alpha_min < o.alpha_max) || o.alpha_min < 0 || o.alpha_max > 1)
        throw ParameterError("transition: need >= 2 points and 0 <= alpha-min < alpha-max <= 1");
    std::vector<double> grid(o.points);
    for (std::size_t i = 0; i < o.points; ++i)
        grid[i] = o.alpha_min + (o.alpha_max - o.alpha_min) * double(i) / double(o.points - 1);
    const auto rows = transition_sweep(grid, o.samples, o.common.cutoff, o.common.seed, o.common.workers);
    auto out = session.open(o.out);
    out << "alpha,p_xi0,p_xi1,p_xi2,p_xi3,se_xi0,se_xi1,se_xi2,se_xi3,mean_second_neg,std_second_neg,n_second\n";
    for (const auto &r : rows) {
        out << format_real(r.alpha);
        for (double p : r.p) out << ',' << format_real(p);
        for (double s : r.se) out << ',' << format_real(s);
        out << ',' << format_real(r.mean_second) << ',' << format_real(r.std_second) << ',' << r.n_second << '\n';
    }
    if (o.crossing) {
        const double gap = transition_crossing(o.crossing_samples, o.common.cutoff, o.common.seed, o.common.workers);
        session.results()["one_minus_alpha_crossing"] = gap;
        std::cout << "P(xi=1) = P(xi=2) at 1 - alpha = " << gap << '\n';
    }
}

// bloch / tsne / subspace ----------------------------------------------------------

struct BlochOptions {
    Common common;
    std::string mode = "svd";
    std::string data;
    std::size_t per_class = 2000;
    std::size_t n_min = 1, n_max = 15, samples = 5000;
    std::string classes = "1,2";
    std::string out;
};

void cmd_bloch(const BlochOptions &o, Session &session) {
    auto out = session.open(o.out);
    if (o.mode == "svd") {
        std::vector<LabeledState> states;
        if (!o.data.empty()) states = load_dataset(o.data, o.common.cutoff);
        else
            states = balanced_dataset({0, 1, 2}, o.per_class, GeneratorPolicy::hilbert_schmidt(), o.common.seed,
                                      o.common.cutoff, kDefaultAttemptBudget, o.common.workers)
                         .states;
        write_svd_scatter_csv(out, svd_scatter(states, o.common.workers));
    } else if (o.mode == "profile") {
        if (o.n_min < 1 || o.n_max > 15 || o.n_min > o.n_max) throw ParameterError("need 1 <= n-min <= n-max <= 15");
        std::vector<std::size_t> ns;
        for (std::size_t n = o.n_min; n <= o.n_max; ++n) ns.push_back(n);
        write_mixture_profile_csv(out, mixture_profile(ns, o.samples, o.common.seed,
                                                       parse_int_list(o.classes, "--classes"), o.common.cutoff,
                                                       o.common.workers));
    } else {
        throw ParameterError("--mode must be svd or profile");
    }
}

struct TsneOptions {
    Common common;
    std::string data, set = "cmw", model_file, swap = "virtual_swap", sic_cache;
    std::size_t k = 64, copies = 1;
    TsneParams params;
    std::string out;
};

void cmd_tsne(const TsneOptions &o, Session &session) {
    const auto states = load_dataset(o.data, o.common.cutoff);
    RealMatrix x;
    if (o.set == "cmw") {
        const SicPovm16 sic = load_or_build_sic(sic_cache_path(o.sic_cache, o.out));
        x = cmw_feature_table(states, cmw_config(o.k), sic, swap_from(o.swap), o.common.workers).values;
    } else if (o.set == "learned" || o.set == "learned-init") {
        ObservableSet obs;
        if (o.set == "learned") {
            if (o.model_file.empty()) throw ParameterError("--set learned needs --model-file");
            obs = load_checkpoint(o.model_file).observables();
        } else {
            obs = random_observables(o.k, o.copies, o.common.seed);
        }
        x.resize(Eigen::Index(states.size()), Eigen::Index(obs.k()));
        parallel_for(states.size(), o.common.workers, [&](std::size_t i) {
            x.row(Eigen::Index(i)) = learned_features(states[i].rho, obs).values.transpose();
        });
    } else {
        throw ParameterError("--set must be cmw, learned or learned-init");
    }
    TsneParams params = o.params;
    params.seed = o.common.seed;
    const TsneResult r = tsne(x, params);
    std::vector<std::uint64_t> index;
    std::vector<int> xi;
    for (const auto &s : states) {
        index.push_back(s.index);
        xi.push_back(s.label.xi);
    }
    auto out = session.open(o.out);
    write_tsne_csv(out, index, xi, r.embedding);
    session.results()["final_kl"] = r.kl.empty() ? 0.0 : r.kl.back();
    if (std::set<int>(xi.begin(), xi.end()).size() > 1) {
        json sil = json::object();
        for (auto [label, s] : silhouette_by_class(r.embedding, xi)) {
            sil[std::to_string(label)] = s;
            std::cout << "silhouette(xi=" << label << ") = " << s << '\n';
        }
        session.results()["silhouette"] = sil;
    }
}

struct SubspaceOptions {
    Common common;
    std::string data, ensemble = "hs";
    std::size_t count = 1000;
    std::string out;
};

void cmd_subspace(const SubspaceOptions &o, Session &session) {
    std::vector<LabeledState> states;
    if (!o.data.empty()) {
        states = load_dataset(o.data, o.common.cutoff);
    } else {
        EnsembleSpec spec{parse_ensemble(o.ensemble), 15, o.common.seed, o.common.cutoff, {}};
        for (std::size_t i = 0; i < o.count; ++i) states.push_back(make_labeled(spec, i));
    }
    std::vector<Rank2Embedding> results(states.size());
    std::vector<std::size_t> negatives(states.size());
    parallel_for(states.size(), o.common.workers, [&](std::size_t i) {
        results[i] = rank2_embedding_exists(states[i].rho, o.common.cutoff);
        negatives[i] = negative_eigenspace(states[i].rho, o.common.cutoff).count();
    });
    auto out = session.open(o.out);
    out << "index,xi,negative_count,bob_support_dim,embedding_exists\n";
    std::map<int, std::pair<std::size_t, std::size_t>> summary;
    for (std::size_t i = 0; i < states.size(); ++i) {
        out << states[i].index << ',' << states[i].label.xi << ',' << negatives[i] << ',' << results[i].support_dim
            << ',' << (results[i].exists ? 1 : 0) << '\n';
        auto &s = summary[states[i].label.xi];
        ++s.first;
        s.second += results[i].exists;
    }
    json js = json::object();
    for (auto &[xi, s] : summary) {
        js[std::to_string(xi)] = {{"states", s.first}, {"embedding_exists", s.second}};
        std::cout << "xi=" << xi << ": rank-two embedding in " << s.second << " of " << s.first << '\n';
    }
    session.results()["by_xi"] = js;
}

// replay ---------------------------------------------------------------------------

int replay(const std::string &path);

int dispatch(int argc, const char *const *argv, bool write_manifest);

int replay(const std::string &path) {
    const json m = read_json_file(path);
    if (m.value("format", "") != "npt-manifest") throw ParameterError("not a manifest: " + path);
    std::vector<std::string> args{"npt", m.at("command").get<std::string>()};
    for (const auto &[name, value] : m.at("config").items()) {
        if (value.is_boolean()) {
            if (value.get<bool>()) args.push_back("--" + name);
            continue;
        }
        args.push_back("--" + name);
        if (value.is_array())
            for (const auto &v : value) args.push_back(v.get<std::string>());
        else
            args.push_back(value.get<std::string>());
    }
    std::vector<const char *> argv;
    for (const auto &a : args) argv.push_back(a.c_str());
    const int code = dispatch(int(argv.size()), argv.data(), false);
    if (code != kExitOk) return code;
    std::size_t differing = 0;
    for (const auto &o : m.at("outputs")) {
        const std::string file = o.at("path").get<std::string>();
        const bool same = fs::exists(file) && fnv1a_file(file) == o.at("fnv1a64").get<std::string>();
        if (!same) {
            ++differing;
            std::cerr << "differs: " << file << '\n';
        }
    }
    std::cout << "replayed " << m.at("command").get<std::string>() << ": " << m.at("outputs").size() - differing
              << " of " << m.at("outputs").size() << " outputs identical\n";
    return differing == 0 ? kExitOk : kExitNumerical;
}

int dispatch(int argc, const char *const *argv, bool write_manifest) {
    CLI::App app{"Negative partial-transpose eigenvalue counting for qubit-ququart states", "npt"};
    app.option_defaults()->always_capture_default();
    app.set_config("--config", "", "TOML/INI file with option values; command-line flags take precedence");
    app.set_version_flag("--version", std::string(NPT_VERSION));
    app.require_subcommand(1);
    app.fallthrough();

    GenOptions gen;
    auto *g = app.add_subcommand("gen", "Generate labeled density matrices");
    add_common(g, gen.common);
    g->add_option("--ensemble", gen.ensemble, "haar-pure, mixture, hs, bures, product or mixture-uniform");
    g->add_option("--count", gen.count, "Number of states (ensemble mode)");
    g->add_option("--mixture-n", gen.mixture_n, "Terms for mixture; upper bound for mixture-uniform");
    g->add_option("--balanced", gen.balanced, "Comma-separated xi classes for a balanced dataset");
    g->add_option("--per-class", gen.per_class, "States per class (balanced mode)");
    g->add_option("--policy", gen.policy, "Balanced-mode generator: hs or mixture-uniform");
    g->add_option("--attempt-budget", gen.attempt_budget, "Consecutive fruitless draws before a class is unreachable");
    g->add_flag("--ptcm", gen.ptcm, "Also write binary PTCM blocks");
    g->add_option("--out", gen.out, "Dataset CSV")->required();

    FeatureOptions feat;
    auto *f = app.add_subcommand("features", "Compute CMW features or initial learned-observable features");
    add_common(f, feat.common);
    f->add_option("--data", feat.data, "Dataset CSV")->required();
    f->add_option("--set", feat.set, "cmw or learned-init");
    f->add_option("--k", feat.k, "Number of features (CMW: 1, 8, 16, 32, 64, 136)");
    f->add_option("--copies", feat.copies, "Copies l for learned-init (1 or 2)");
    f->add_option("--swap-convention", feat.swap, "virtual_swap or identity");
    f->add_option("--sic-cache", feat.sic_cache, "SIC-POVM cache file (default: next to --out)");
    f->add_option("--out", feat.out, "Feature CSV; the sidecar goes to the same stem with .json")->required();

    TrainOptions tr;
    auto *t = app.add_subcommand("train", "Train classifiers, optionally evaluating on a test set");
    add_common(t, tr.common);
    t->add_option("--model", tr.model, "ann-cmw, ann-learned, ann-learned-2copy, svm or rf")->required();
    t->add_option("--k", tr.k, "Features / observables");
    t->add_option("--data", tr.data, "Training dataset CSV");
    t->add_option("--features", tr.features, "Training feature CSV (CMW-fed models)");
    t->add_option("--test", tr.test, "Test dataset CSV");
    t->add_option("--test-features", tr.test_features, "Test feature CSV (CMW-fed models)");
    t->add_option("--classes", tr.classes, "Comma-separated class labels after --label-map");
    t->add_option("--label-map", tr.label_map, "xi:class pairs, e.g. 0:0,1:1,2:1");
    t->add_option("--repeats", tr.repeats, "Independent runs with seeds derived from --seed");
    t->add_option("--epochs", tr.epochs, "ANN epochs");
    t->add_option("--batch", tr.batch, "ANN mini-batch size");
    t->add_option("--lr", tr.lr, "ANN Adam learning rate");
    t->add_option("--patience", tr.patience, "ANN early-stopping patience");
    t->add_option("--val-fraction", tr.val_fraction, "ANN validation fraction");
    t->add_option("--folds", tr.folds, "SVM/RF cross-validation folds");
    t->add_option("--swap-convention", tr.swap, "virtual_swap or identity");
    t->add_option("--sic-cache", tr.sic_cache, "SIC-POVM cache file");
    t->add_option("--out", tr.out, "Output directory")->required();

    EvalOptions ev;
    auto *e = app.add_subcommand("eval", "Evaluate a saved model");
    add_common(e, ev.common);
    e->add_option("--model-file", ev.model_file, "model_r<i>.json written by train")->required();
    e->add_option("--data", ev.data, "Dataset CSV");
    e->add_option("--features", ev.features, "Feature CSV (CMW-fed models)");
    e->add_option("--sic-cache", ev.sic_cache, "SIC-POVM cache file");
    e->add_option("--out", ev.out, "Metrics JSON")->required();

    StatsOptions st;
    auto *s = app.add_subcommand("stats", "Frequency of xi over an ensemble");
    add_common(s, st.common);
    s->add_option("--ensemble", st.ensemble, "Ensemble name");
    s->add_option("--n,--count", st.n, "Number of states");
    s->add_option("--mixture-n", st.mixture_n, "Terms for mixture ensembles");
    s->add_option("--out", st.out, "Stats CSV")->required();

    TransitionOptions tx;
    auto *x = app.add_subcommand("transition", "Sweep alpha in the two-state mixture");
    add_common(x, tx.common);
    x->add_option("--points", tx.points, "Grid points");
    x->add_option("--alpha-min", tx.alpha_min, "Grid start");
    x->add_option("--alpha-max", tx.alpha_max, "Grid end");
    x->add_option("--samples", tx.samples, "State pairs per grid point");
    x->add_flag("--crossing", tx.crossing, "Also locate P(xi=1) = P(xi=2)");
    x->add_option("--crossing-samples", tx.crossing_samples, "State pairs for the crossing search");
    x->add_option("--out", tx.out, "Transition CSV")->required();

    BlochOptions bl;
    auto *b = app.add_subcommand("bloch", "Correlation-matrix singular values or mixture profiles");
    add_common(b, bl.common);
    b->add_option("--mode", bl.mode, "svd or profile");
    b->add_option("--data", bl.data, "Dataset CSV for svd (default: balanced HS classes 0,1,2)");
    b->add_option("--per-class", bl.per_class, "States per class when generating for svd");
    b->add_option("--n-min", bl.n_min, "Smallest mixture size (profile)");
    b->add_option("--n-max", bl.n_max, "Largest mixture size (profile)");
    b->add_option("--samples", bl.samples, "States per mixture size (profile)");
    b->add_option("--classes", bl.classes, "Classes reported per n (profile)");
    b->add_option("--out", bl.out, "CSV")->required();

    TsneOptions ts;
    auto *y = app.add_subcommand("tsne", "Exact t-SNE of feature vectors");
    add_common(y, ts.common);
    y->add_option("--data", ts.data, "Dataset CSV")->required();
    y->add_option("--set", ts.set, "cmw, learned (needs --model-file) or learned-init");
    y->add_option("--model-file", ts.model_file, "Learned-observable checkpoint");
    y->add_option("--k", ts.k, "Features");
    y->add_option("--copies", ts.copies, "Copies for learned-init");
    y->add_option("--swap-convention", ts.swap, "virtual_swap or identity");
    y->add_option("--sic-cache", ts.sic_cache, "SIC-POVM cache file");
    y->add_option("--perplexity", ts.params.perplexity, "Perplexity");
    y->add_option("--iterations", ts.params.iterations, "Gradient iterations");
    y->add_option("--learning-rate", ts.params.learning_rate, "Learning rate");
    y->add_option("--exaggeration", ts.params.exaggeration, "Early exaggeration factor");
    y->add_option("--exaggeration-iterations", ts.params.exaggeration_iterations, "Early exaggeration length");
    y->add_option("--out", ts.out, "Embedding CSV")->required();

    SubspaceOptions sb;
    auto *u = app.add_subcommand("subspace", "Bob support of the negative eigenspace");
    add_common(u, sb.common);
    u->add_option("--data", sb.data, "Dataset CSV (default: sample --ensemble)");
    u->add_option("--ensemble", sb.ensemble, "Ensemble when no --data");
    u->add_option("--count", sb.count, "States when no --data");
    u->add_option("--out", sb.out, "CSV")->required();

    std::string manifest_path;
    auto *r = app.add_subcommand("replay", "Re-run a manifest and compare output hashes");
    r->add_option("manifest", manifest_path, "Manifest JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &err) {
        return app.exit(err);
    } catch (const CLI::CallForAllHelp &err) {
        return app.exit(err);
    } catch (const CLI::CallForVersion &err) {
        return app.exit(err);
    } catch (const CLI::ParseError &err) {
        app.exit(err);
        return kExitParameter;
    }

    if (r->parsed()) return replay(manifest_path);

    CLI::App *sub = app.get_subcommands().front();
    Session session(sub->get_name());
    fs::path manifest_target;
    if (g->parsed()) {
        cmd_gen(gen, session);
        manifest_target = gen.out + ".manifest.json";
    } else if (f->parsed()) {
        cmd_features(feat, session);
        manifest_target = feat.out + ".manifest.json";
    } else if (t->parsed()) {
        cmd_train(tr, session);
        manifest_target = fs::path(tr.out) / "manifest.json";
    } else if (e->parsed()) {
        cmd_eval(ev, session);
        manifest_target = ev.out + ".manifest.json";
    } else if (s->parsed()) {
        cmd_stats(st, session);
        manifest_target = st.out + ".manifest.json";
    } else if (x->parsed()) {
        cmd_transition(tx, session);
        manifest_target = tx.out + ".manifest.json";
    } else if (b->parsed()) {
        cmd_bloch(bl, session);
        manifest_target = bl.out + ".manifest.json";
    } else if (y->parsed()) {
        cmd_tsne(ts, session);
        manifest_target = ts.out + ".manifest.json";
    } else if (u->parsed()) {
        cmd_subspace(sb, session);
        manifest_target = sb.out + ".manifest.json";
    }
    if (write_manifest && !manifest_target.empty()) session.write_manifest(manifest_target, resolved_config(*sub));
    return kExitOk;
}

}  // namespace

int run(int argc, const char *const *argv) {
    try {
        return dispatch(argc, argv, true);
    } catch (const UnreachableClassError &e) {
        std::cerr << "npt: " << e.what() << '\n';
        return kExitUnreachable;
    } catch (const NumericalError &e) {
        std::cerr << "npt: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::invalid_argument &e) {
        std::cerr << "npt: " << e.what() << '\n';
        return kExitParameter;
    } catch (const fs::filesystem_error &e) {
        std::cerr << "npt: " << e.what() << '\n';
        return kExitParameter;
    } catch (const std::exception &e) {
        std::cerr << "npt: " << e.what() << '\n';
        return kExitNumerical;
    }
}

}  // namespace npt::cli
