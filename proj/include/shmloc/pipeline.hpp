#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "shmloc/errors.hpp"
#include "shmloc/features.hpp"
#include "shmloc/linalg.hpp"
#include "shmloc/mlp.hpp"
#include "shmloc/novelty.hpp"
#include "shmloc/rng.hpp"
#include "shmloc/signals.hpp"
#include "shmloc/synthdata.hpp"

namespace shmloc::pipeline {

// ---------------------------------------------------------------------------
// Confusion matrices
// ---------------------------------------------------------------------------

struct ConfusionMatrix {
    std::vector<int> classes;  // ordered class ids; rows = true, cols = predicted
    Matrix counts;

    std::size_t total() const {
        double sum = 0.0;
        for (double v : counts.data()) sum += v;
        return static_cast<std::size_t>(sum);
    }

    std::size_t trace() const {
        double sum = 0.0;
        for (std::size_t i = 0; i < counts.rows(); ++i) sum += counts(i, i);
        return static_cast<std::size_t>(sum);
    }

    double accuracy() const {
        return static_cast<double>(trace()) / static_cast<double>(total());
    }
};

/// Builds a confusion matrix from raw counts (rows = true class).
inline ConfusionMatrix make_confusion(std::vector<int> classes,
                                      const std::vector<std::vector<std::size_t>>& counts) {
    ConfusionMatrix cm;
    cm.classes = std::move(classes);
    cm.counts = Matrix(cm.classes.size(), cm.classes.size());
    for (std::size_t i = 0; i < counts.size(); ++i) {
        for (std::size_t j = 0; j < counts[i].size(); ++j) {
            cm.counts(i, j) = static_cast<double>(counts[i][j]);
        }
    }
    return cm;
}

/// A trained network plus the class id carried by each output index.
struct Classifier {
    mlp::MlpModel model;
    std::vector<int> classes;
};

inline ConfusionMatrix evaluate(const Classifier& classifier, const Matrix& x,
                                const std::vector<int>& y) {
    const std::size_t c = classifier.classes.size();
    if (classifier.model.outputs() != c) {
        raise(ErrorKind::Bounds, "evaluate: model outputs " +
                                     std::to_string(classifier.model.outputs()) +
                                     " but class list has " + std::to_string(c));
    }
    ConfusionMatrix cm;
    cm.classes = classifier.classes;
    cm.counts = Matrix(c, c);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto it = std::find(cm.classes.begin(), cm.classes.end(), y[r]);
        if (it == cm.classes.end()) {
            raise(ErrorKind::Label, "evaluate: label " + std::to_string(y[r]) +
                                        " not in the model's class list");
        }
        const std::size_t true_idx =
            static_cast<std::size_t>(it - cm.classes.begin());
        const std::size_t pred_idx = mlp::predict(classifier.model, x.row(r));
        cm.counts(true_idx, pred_idx) += 1.0;
    }
    return cm;
}

/// Pooled accuracy over sub-problems with disjoint class sets:
/// sum of traces / sum of totals.
inline double composite_accuracy(const std::vector<ConfusionMatrix>& cms) {
    if (cms.empty()) {
        raise(ErrorKind::Precondition, "composite_accuracy: no matrices");
    }
    std::set<int> seen;
    std::size_t traces = 0;
    std::size_t totals = 0;
    for (const ConfusionMatrix& cm : cms) {
        for (int c : cm.classes) {
            if (!seen.insert(c).second) {
                raise(ErrorKind::Precondition,
                      "composite_accuracy: class " + std::to_string(c) +
                          " appears in more than one matrix");
            }
        }
        traces += cm.trace();
        totals += cm.total();
    }
    return static_cast<double>(traces) / static_cast<double>(totals);
}

// ---------------------------------------------------------------------------
// Problem splitting
// ---------------------------------------------------------------------------

/// Partitions the dataset rows into (everything else, small classes),
/// preserving split tags and row order.
inline std::pair<features::FeatureDataset, features::FeatureDataset> split_problem(
    const features::FeatureDataset& dataset, const std::set<int>& small_classes) {
    const std::vector<int> all = dataset.classes();
    if (small_classes.empty()) {
        raise(ErrorKind::InvalidSplit, "split_problem: small class set is empty");
    }
    for (int c : small_classes) {
        if (!std::binary_search(all.begin(), all.end(), c)) {
            raise(ErrorKind::InvalidSplit, "split_problem: class " +
                                               std::to_string(c) +
                                               " not present in dataset");
        }
    }
    if (small_classes.size() >= all.size()) {
        raise(ErrorKind::InvalidSplit,
              "split_problem: small class set must be a proper subset");
    }
    features::FeatureDataset a, b;
    const std::size_t d = dataset.x.cols();
    std::vector<std::size_t> rows_a, rows_b;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        (small_classes.count(dataset.y[i]) ? rows_b : rows_a).push_back(i);
    }
    const auto take = [&](const std::vector<std::size_t>& rows) {
        features::FeatureDataset out;
        out.x = Matrix(rows.size(), d);
        out.y.reserve(rows.size());
        out.split.reserve(rows.size());
        out.rep.reserve(rows.size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            for (std::size_t j = 0; j < d; ++j) out.x(r, j) = dataset.x(rows[r], j);
            out.y.push_back(dataset.y[rows[r]]);
            out.split.push_back(dataset.split[rows[r]]);
            out.rep.push_back(dataset.rep[rows[r]]);
        }
        out.normalization = dataset.normalization;
        return out;
    };
    a = take(rows_a);
    b = take(rows_b);
    return {std::move(a), std::move(b)};
}

// ---------------------------------------------------------------------------
// Feature preparation
// ---------------------------------------------------------------------------

struct PreparedFeatures {
    features::FeatureDataset candidates;  // damaged records, all windows
    std::vector<novelty::BaselineModel> baselines;
    Matrix normal_features;  // normal-condition evaluation pool, all windows
};

/// Fits one baseline per candidate window on the undamaged baseline pool
/// (the first half of the class-0 records), then scores every damaged
/// record. Repetition index determines the train/validation/test tag.
inline PreparedFeatures prepare_features(const synth::RawDataset& dataset,
                                         std::size_t window_len,
                                         double ridge = -1.0,
                                         bool log_magnitude = false) {
    const auto transformed = [&](const signals::TransmissibilityRecord& rec) {
        if (!log_magnitude) return rec;
        signals::TransmissibilityRecord out = rec;
        for (double& v : out.magnitudes.data()) v = std::log(v);
        return out;
    };

    std::vector<const synth::ClassifiedRecord*> baseline_pool, normal_eval, damaged;
    const std::size_t normal_count = dataset.per_class_counts.at(synth::kUndamagedClass);
    const std::size_t half = normal_count / 2;
    for (const auto& rec : dataset.records) {
        if (rec.class_id == synth::kUndamagedClass) {
            (rec.rep < half ? baseline_pool : normal_eval).push_back(&rec);
        } else {
            damaged.push_back(&rec);
        }
    }
    if (baseline_pool.empty() || damaged.empty()) {
        raise(ErrorKind::Precondition, "prepare_features: dataset missing "
                                       "baseline or damaged records");
    }

    const auto& first = damaged.front()->record;
    const auto grid =
        signals::default_window_grid(first.pairs, first.lines, window_len);

    PreparedFeatures prepared;
    prepared.baselines.resize(grid.size());
    parallel_for(grid.size(), [&](std::size_t w) {
        Matrix samples(baseline_pool.size(), grid[w].length());
        for (std::size_t i = 0; i < baseline_pool.size(); ++i) {
            samples.set_row(i, signals::window_slice(
                                   transformed(baseline_pool[i]->record), grid[w]));
        }
        prepared.baselines[w] = novelty::fit_baseline(samples, grid[w], ridge);
    });

    const std::size_t reps = damaged.empty() ? 0 : normal_count / 2;
    prepared.candidates.x = Matrix(damaged.size(), grid.size());
    prepared.candidates.y.resize(damaged.size());
    prepared.candidates.split.resize(damaged.size());
    prepared.candidates.rep.resize(damaged.size());
    parallel_for(damaged.size(), [&](std::size_t i) {
        const auto& rec = *damaged[i];
        prepared.candidates.x.set_row(
            i, novelty::novelty_features(prepared.baselines, transformed(rec.record)));
        prepared.candidates.y[i] = rec.class_id;
        prepared.candidates.rep[i] = rec.rep;
        const std::size_t third = reps / 3;
        prepared.candidates.split[i] = rec.rep < third ? features::Split::Train
                                       : rec.rep < 2 * third
                                           ? features::Split::Validation
                                           : features::Split::Test;
    });

    prepared.normal_features = Matrix(normal_eval.size(), grid.size());
    parallel_for(normal_eval.size(), [&](std::size_t i) {
        prepared.normal_features.set_row(
            i, novelty::novelty_features(prepared.baselines,
                                         transformed(normal_eval[i]->record)));
    });
    return prepared;
}

struct SelectedFeatures {
    std::vector<std::size_t> indices;  // into the candidate window grid
    features::GAResult ga;
    features::FeatureDataset raw;         // selected columns, unnormalized
    features::FeatureDataset normalized;  // selected columns, [-1, 1] on train
    features::Normalization normalization;
};

/// Genetic selection of subset_size windows followed by normalization
/// fitted on the training split only.
inline SelectedFeatures select_features(const features::FeatureDataset& candidates,
                                        const features::GAConfig& ga_config) {
    const auto [x_train, y_train] = candidates.rows(features::Split::Train);
    const auto [x_val, y_val] = candidates.rows(features::Split::Validation);

    SelectedFeatures selected;
    selected.ga = features::ga_select(x_train, y_train, x_val, y_val, ga_config);
    selected.indices = selected.ga.selected;

    const auto reduce = [&](const Matrix& x) {
        Matrix out(x.rows(), selected.indices.size());
        for (std::size_t i = 0; i < x.rows(); ++i) {
            for (std::size_t j = 0; j < selected.indices.size(); ++j) {
                out(i, j) = x(i, selected.indices[j]);
            }
        }
        return out;
    };

    selected.raw = candidates;
    selected.raw.x = reduce(candidates.x);

    Matrix train_reduced = reduce(x_train);
    selected.normalization = features::fit_normalization(train_reduced);
    selected.normalized = selected.raw;
    selected.normalized.x =
        features::apply_normalization(selected.raw.x, selected.normalization);
    selected.normalized.normalization = {selected.normalization};
    return selected;
}

/// Restricts a candidate dataset to previously selected columns and
/// applies a previously fitted normalization.
inline features::FeatureDataset apply_selection(
    const features::FeatureDataset& candidates,
    const std::vector<std::size_t>& indices,
    const features::Normalization& normalization) {
    features::FeatureDataset out = candidates;
    Matrix reduced(candidates.x.rows(), indices.size());
    for (std::size_t j = 0; j < indices.size(); ++j) {
        if (indices[j] >= candidates.x.cols()) {
            raise(ErrorKind::Bounds, "apply_selection: feature index " +
                                         std::to_string(indices[j]) +
                                         " out of range for " +
                                         std::to_string(candidates.x.cols()) +
                                         " candidates");
        }
    }
    for (std::size_t i = 0; i < candidates.x.rows(); ++i) {
        for (std::size_t j = 0; j < indices.size(); ++j) {
            reduced(i, j) = candidates.x(i, indices[j]);
        }
    }
    out.x = features::apply_normalization(reduced, normalization);
    out.normalization = {normalization};
    return out;
}

// ---------------------------------------------------------------------------
// Training arms
// ---------------------------------------------------------------------------

struct ArmResult {
    Classifier classifier;
    mlp::LossHistory history;
    ConfusionMatrix cm;
    std::size_t hidden_size = 0;
    double val_loss = 0.0;
};

namespace detail {

inline std::pair<Matrix, Matrix> design_matrices(const features::FeatureDataset& ds,
                                                 features::Split which,
                                                 const std::vector<int>& classes) {
    const auto [x, labels] = ds.rows(which);
    std::vector<std::size_t> indices(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto it = std::find(classes.begin(), classes.end(), labels[i]);
        if (it == classes.end()) {
            raise(ErrorKind::Label, "design_matrices: label " +
                                        std::to_string(labels[i]) +
                                        " missing from class list");
        }
        indices[i] = static_cast<std::size_t>(it - classes.begin());
    }
    return {x, mlp::one_hot(indices, classes.size())};
}

} // namespace detail

/// Multi-restart training over a list of candidate hidden sizes; keeps
/// the (size, restart) combination with the lowest validation loss and
/// evaluates it on the test split.
inline ArmResult train_arm(const features::FeatureDataset& ds,
                           const std::vector<std::size_t>& hidden_sizes,
                           mlp::TrainConfig config) {
    const std::vector<int> classes = ds.classes();
    const auto [x_train, y_train] = detail::design_matrices(ds, features::Split::Train, classes);
    const auto [x_val, y_val] = detail::design_matrices(ds, features::Split::Validation, classes);
    const auto [x_test, y_test_onehot] = detail::design_matrices(ds, features::Split::Test, classes);
    (void)y_test_onehot;

    ArmResult best;
    best.val_loss = std::numeric_limits<double>::infinity();
    const std::uint64_t root_seed = config.seed;
    for (std::size_t h : hidden_sizes) {
        config.seed = derive_seed(root_seed, {h});
        auto [model, history] = mlp::multi_restart_train(
            ds.x.cols(), h, classes.size(), x_train, y_train, x_val, y_val, config);
        Matrix probabilities, hidden;
        mlp::forward_batch(model, x_val, probabilities, hidden);
        const double val_loss = mlp::loss(probabilities, y_val);
        if (val_loss < best.val_loss) {
            best.val_loss = val_loss;
            best.classifier = {std::move(model), classes};
            best.history = std::move(history);
            best.hidden_size = h;
        }
    }
    const auto [x_eval, labels] = ds.rows(features::Split::Test);
    best.cm = evaluate(best.classifier, x_eval, labels);
    return best;
}

/// Restarted training of a model whose first layer is pinned (frozen
/// transfer or the zero-hidden-layer control). make_initial(rng) must
/// produce the fresh trainable head for one restart.
template <typename MakeInitial>
inline ArmResult train_frozen_arm(const features::FeatureDataset& ds,
                                  MakeInitial&& make_initial,
                                  const mlp::TrainConfig& config) {
    const std::vector<int> classes = ds.classes();
    const auto [x_train, y_train] = detail::design_matrices(ds, features::Split::Train, classes);
    const auto [x_val, y_val] = detail::design_matrices(ds, features::Split::Validation, classes);

    ArmResult best;
    best.val_loss = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < config.restarts; ++r) {
        Rng rng = derive_rng(config.seed, {r});
        auto [model, history] =
            mlp::train(make_initial(rng), x_train, y_train, x_val, y_val, config);
        Matrix prob, hidden;
        mlp::forward_batch(model, x_val, prob, hidden);
        const double val_loss = mlp::loss(prob, y_val);
        if (val_loss < best.val_loss) {
            best.val_loss = val_loss;
            best.classifier = {std::move(model), classes};
            best.history = std::move(history);
            best.hidden_size = best.classifier.model.hidden();
        }
    }
    const auto [x_eval, labels] = ds.rows(features::Split::Test);
    best.cm = evaluate(best.classifier, x_eval, labels);
    return best;
}

// ---------------------------------------------------------------------------
// Full experiment
// ---------------------------------------------------------------------------

/// Stage training dynamics differ because the arms face different
/// optimization landscapes: the 9- and 7-class nets descend fast and
/// then plateau, so they use validation early stopping; the balanced
/// two-class scratch net starts in a long symmetric saddle that the
/// relative-improvement rule would mistake for convergence, so it gets
/// a fixed epoch budget with best-validation-epoch selection instead;
/// the transfer arm and its single-layer control share one fixed budget
/// so their loss histories stay comparable epoch by epoch.
struct ExperimentConfig {
    synth::ModelConfig model;
    std::size_t n_lines = 256;
    double band_lo_hz = 20.0;
    double band_hi_hz = 320.0;
    std::size_t reps_per_class = 198;
    double noise_level = 0.02;
    std::size_t window_len = 16;
    bool log_magnitude = false;
    double ridge = -1.0;  // auto
    features::GAConfig ga;
    std::set<int> small_classes = {3, 6};
    std::vector<std::size_t> hidden_sizes_monolithic = {10};
    std::vector<std::size_t> hidden_sizes_sub = {9};
    mlp::TrainConfig train_stage;     // monolithic and large sub-problem arms
    mlp::TrainConfig small_stage;     // scratch small sub-problem arm
    mlp::TrainConfig transfer_stage;  // transfer arm and scratch control
    std::size_t pca_components = 3;
    std::uint64_t seed = 7;

    ExperimentConfig() {
        train_stage.learning_rate = 0.2;
        train_stage.init_std = 0.3;

        small_stage.learning_rate = 0.5;
        small_stage.init_std = 0.5;
        small_stage.early_stop_rel = 0.0;
        small_stage.max_epochs = 1000;

        transfer_stage.learning_rate = 0.25;
        transfer_stage.init_std = 0.4;
        transfer_stage.early_stop_rel = 0.0;
        transfer_stage.max_epochs = 300;
        transfer_stage.restarts = 5;
    }
};

struct PcaExport {
    std::string name;
    std::vector<int> classes;  // per row
    Matrix scores;             // n x k
    Vector explained_variance;
    double total_variance = 0.0;
};

/// Builds the chain model and layout described by the config and runs the
/// measurement campaign on a stream derived from the experiment seed.
inline synth::RawDataset generate_dataset_for(const ExperimentConfig& config) {
    const synth::ChainModel model = synth::build_wing_model(config.model);
    const synth::SensorLayout layout = synth::default_sensor_layout(
        config.model.n_dof, config.n_lines, config.band_lo_hz, config.band_hi_hz);
    return synth::generate_dataset(model, layout, config.reps_per_class,
                                   config.noise_level, derive_seed(config.seed, {0}));
}

struct ExperimentReport {
    ArmResult monolithic;
    ArmResult split_large;
    ArmResult split_small;
    ArmResult transfer_small;
    ArmResult scratch_small_2layer;
    double composite_split_accuracy = 0.0;
    std::vector<std::size_t> selected_features;
    Vector ga_fitness_trace;
    features::Normalization normalization;
    std::vector<PcaExport> pca_exports;
    std::vector<std::string> notes;
};

/// Runs the full study: baseline fitting, novelty features, genetic
/// window selection, normalization, the monolithic nine-class network,
/// the 7 + 2 split, frozen-layer transfer, and the zero-hidden-layer
/// control, plus PCA exports of the raw and transformed feature spaces.
inline ExperimentReport run_experiment(const ExperimentConfig& config,
                                       const synth::RawDataset& dataset) {
    ExperimentReport report;

    const PreparedFeatures prepared =
        prepare_features(dataset, config.window_len, config.ridge, config.log_magnitude);

    features::GAConfig ga_config = config.ga;
    ga_config.seed = derive_seed(config.seed, {1});
    const SelectedFeatures selected = select_features(prepared.candidates, ga_config);
    report.selected_features = selected.indices;
    report.ga_fitness_trace = selected.ga.best_per_generation;
    report.normalization = selected.normalization;

    mlp::TrainConfig stage = config.train_stage;
    stage.seed = derive_seed(config.seed, {2});
    report.monolithic =
        train_arm(selected.normalized, config.hidden_sizes_monolithic, stage);

    const auto [large, small] = split_problem(selected.normalized, config.small_classes);
    stage.seed = derive_seed(config.seed, {3});
    report.split_large = train_arm(large, config.hidden_sizes_sub, stage);
    mlp::TrainConfig small_stage = config.small_stage;
    small_stage.seed = derive_seed(config.seed, {4});
    report.split_small = train_arm(small, config.hidden_sizes_sub, small_stage);

    report.composite_split_accuracy =
        composite_accuracy({report.split_large.cm, report.split_small.cm});

    mlp::TrainConfig transfer_cfg = config.transfer_stage;
    transfer_cfg.seed = derive_seed(config.seed, {5});
    const mlp::MlpModel& source = report.split_large.classifier.model;
    report.transfer_small = train_frozen_arm(
        small,
        [&](Rng& rng) {
            return mlp::freeze_transfer(source, small.classes().size(),
                                        transfer_cfg.init_std, rng);
        },
        transfer_cfg);

    mlp::TrainConfig control_cfg = config.transfer_stage;
    control_cfg.seed = derive_seed(config.seed, {6});
    report.scratch_small_2layer = train_frozen_arm(
        small,
        [&](Rng& rng) {
            return mlp::init_linear_softmax(small.x.cols(), small.classes().size(),
                                            control_cfg.init_std, rng);
        },
        control_cfg);

    // PCA exports: the raw feature cloud, and the feature spaces after the
    // learnt hidden transformation on each sub-problem.
    const auto export_pca = [&](std::string name, const Matrix& x,
                                const std::vector<int>& labels) {
        PcaExport e;
        e.name = std::move(name);
        e.classes = labels;
        const features::PCAModel model = features::pca_fit(x, config.pca_components);
        e.scores = features::pca_project(model, x);
        e.explained_variance = model.explained_variance;
        e.total_variance = model.total_variance;
        report.pca_exports.push_back(std::move(e));
    };
    export_pca("features_raw", selected.raw.x, selected.raw.y);

    const auto hidden_matrix = [&](const mlp::MlpModel& model, const Matrix& x) {
        Matrix out(x.rows(), model.hidden());
        for (std::size_t i = 0; i < x.rows(); ++i) {
            out.set_row(i, mlp::hidden_activations(model, x.row(i)));
        }
        return out;
    };
    export_pca("split_large_hidden", hidden_matrix(source, large.x), large.y);
    export_pca("split_small_hidden",
               hidden_matrix(report.transfer_small.classifier.model, small.x),
               small.y);

    report.notes.push_back(
        "Deployment routing between the sub-classifiers is out of scope: "
        "sub-problems are evaluated on pre-separated test sets.");
    return report;
}

} // namespace shmloc::pipeline
