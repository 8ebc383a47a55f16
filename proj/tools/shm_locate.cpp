// shm-locate: damage-localization toolkit for chain-model structural data.
// Subcommands cover the pipeline stages individually plus the full study.

#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <string>

#include <CLI11.hpp>

#include "shmloc/io.hpp"
#include "shmloc/shmloc.hpp"

namespace fs = std::filesystem;
using shmloc::io::json;

namespace {

struct CommonOptions {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed_override;
    bool quiet = false;
    bool verbose = false;
};

void add_common(CLI::App* cmd, CommonOptions& opts, bool needs_out = true) {
    cmd->add_option("--config", opts.config_path, "JSON configuration file");
    if (needs_out) {
        cmd->add_option("--out", opts.out_dir, "output directory")->required();
    }
    cmd->add_option("--seed-override", opts.seed_override,
                    "replace the configured master seed");
    cmd->add_flag("--quiet", opts.quiet, "suppress informational output");
    cmd->add_flag("--verbose", opts.verbose, "extra progress output");
}

shmloc::pipeline::ExperimentConfig load_config(const CommonOptions& opts) {
    shmloc::pipeline::ExperimentConfig config;
    if (!opts.config_path.empty()) {
        config = shmloc::io::experiment_config_from_json(
            shmloc::io::read_json_file(opts.config_path));
    }
    if (opts.seed_override) config.seed = *opts.seed_override;
    return config;
}

void info(const CommonOptions& opts, const std::string& line) {
    if (!opts.quiet) std::cout << line << "\n";
}

void progress(const CommonOptions& opts, const std::string& line) {
    if (opts.verbose) std::cerr << line << "\n";
}

/// Aligned text table in a fixed reference layout:
/// rows "Missing panel i", columns the predicted panel.
void print_confusion(const CommonOptions& opts, const std::string& title,
                     const shmloc::pipeline::ConfusionMatrix& cm) {
    if (opts.quiet) return;
    std::cout << title << "\n";
    std::cout << "  " << std::left << std::setw(18) << "Predicted panel";
    for (int c : cm.classes) std::cout << std::right << std::setw(6) << c;
    std::cout << "\n";
    for (std::size_t i = 0; i < cm.classes.size(); ++i) {
        std::cout << "  " << std::left << std::setw(18)
                  << ("Missing panel " + std::to_string(cm.classes[i]));
        for (std::size_t j = 0; j < cm.classes.size(); ++j) {
            std::cout << std::right << std::setw(6)
                      << static_cast<long long>(cm.counts(i, j));
        }
        std::cout << "\n";
    }
    std::cout << "  total accuracy: " << std::fixed << std::setprecision(2)
              << 100.0 * cm.accuracy() << "%\n"
              << std::defaultfloat << std::setprecision(6);
}

shmloc::io::DatasetBundle load_or_generate(
    const CommonOptions& opts, const shmloc::pipeline::ExperimentConfig& config,
    const std::string& data_dir) {
    if (!data_dir.empty()) {
        progress(opts, "loading dataset from " + data_dir);
        return shmloc::io::read_dataset_dir(data_dir);
    }
    progress(opts, "generating dataset from config");
    shmloc::io::DatasetBundle bundle;
    bundle.model_config = config.model;
    bundle.layout = shmloc::synth::default_sensor_layout(
        config.model.n_dof, config.n_lines, config.band_lo_hz, config.band_hi_hz);
    bundle.data = shmloc::pipeline::generate_dataset_for(config);
    return bundle;
}

struct StageFiles {
    std::string data_dir;
    std::string features_path;
    std::string selection_path;
    std::string model_path;
    std::string source_path;
};

json selection_to_json(const shmloc::pipeline::SelectedFeatures& selected) {
    return {
        {"selected_indices", selected.indices},
        {"fitness", selected.ga.fitness},
        {"fitness_trace", shmloc::io::vector_to_json(selected.ga.best_per_generation)},
        {"normalization",
         {{"min", shmloc::io::vector_to_json(selected.normalization.min)},
          {"max", shmloc::io::vector_to_json(selected.normalization.max)}}},
    };
}

struct Selection {
    std::vector<std::size_t> indices;
    shmloc::features::Normalization normalization;
};

Selection selection_from_json(const json& j) {
    Selection s;
    s.indices = j.at("selected_indices").get<std::vector<std::size_t>>();
    s.normalization.min =
        shmloc::io::vector_from_json(j.at("normalization").at("min"));
    s.normalization.max =
        shmloc::io::vector_from_json(j.at("normalization").at("max"));
    return s;
}

shmloc::features::FeatureDataset load_selected_dataset(const StageFiles& files) {
    const auto candidates = shmloc::io::feature_dataset_from_csv(
        shmloc::io::read_text_file(files.features_path));
    const Selection selection =
        selection_from_json(shmloc::io::read_json_file(files.selection_path));
    return shmloc::pipeline::apply_selection(candidates, selection.indices,
                                             selection.normalization);
}

shmloc::features::FeatureDataset restrict_classes(
    const shmloc::features::FeatureDataset& ds, const std::set<int>& keep) {
    if (keep.empty() || keep.size() == ds.classes().size()) return ds;
    auto [rest, kept] = shmloc::pipeline::split_problem(ds, keep);
    return kept;
}

// ---------------------------------------------------------------------------
// Subcommand bodies
// ---------------------------------------------------------------------------

int run_gen_data(const CommonOptions& opts) {
    const auto config = load_config(opts);
    const auto bundle = load_or_generate(opts, config, "");
    shmloc::io::write_dataset_dir(opts.out_dir, bundle.data, bundle.model_config,
                                  bundle.layout);
    info(opts, "wrote dataset (" + std::to_string(bundle.data.records.size()) +
                   " records) to " + opts.out_dir);
    return 0;
}

int run_features(const CommonOptions& opts, const StageFiles& files) {
    const auto config = load_config(opts);
    const auto bundle = load_or_generate(opts, config, files.data_dir);
    const auto prepared = shmloc::pipeline::prepare_features(
        bundle.data, config.window_len, config.ridge, config.log_magnitude);
    fs::create_directories(opts.out_dir);
    shmloc::io::write_baselines(fs::path(opts.out_dir) / "baselines.json",
                                prepared.baselines);
    shmloc::io::write_text_file(
        fs::path(opts.out_dir) / "features.csv",
        shmloc::io::feature_dataset_to_csv(prepared.candidates));
    info(opts, "wrote " + std::to_string(prepared.baselines.size()) +
                   " baselines and " + std::to_string(prepared.candidates.size()) +
                   " feature rows to " + opts.out_dir);
    return 0;
}

int run_select(const CommonOptions& opts, const StageFiles& files) {
    auto config = load_config(opts);
    config.ga.seed = shmloc::derive_seed(config.seed, {1});
    const auto candidates = shmloc::io::feature_dataset_from_csv(
        shmloc::io::read_text_file(files.features_path));
    const auto selected = shmloc::pipeline::select_features(candidates, config.ga);
    fs::create_directories(opts.out_dir);
    shmloc::io::write_text_file(fs::path(opts.out_dir) / "selection.json",
                                selection_to_json(selected).dump(2) + "\n");
    std::string line = "selected features:";
    for (auto idx : selected.indices) line += " " + std::to_string(idx);
    info(opts, line + "  (validation fitness " +
                   shmloc::io::format_double(selected.ga.fitness) + ")");
    return 0;
}

int run_train(const CommonOptions& opts, const StageFiles& files,
              const std::vector<int>& class_filter) {
    const auto config = load_config(opts);
    auto dataset = load_selected_dataset(files);
    if (!class_filter.empty()) {
        dataset = restrict_classes(
            dataset, std::set<int>(class_filter.begin(), class_filter.end()));
    }
    auto train_config = config.train_stage;
    train_config.seed = shmloc::derive_seed(config.seed, {2});
    const auto hidden = dataset.classes().size() == 9
                            ? config.hidden_sizes_monolithic
                            : config.hidden_sizes_sub;
    const auto arm = shmloc::pipeline::train_arm(dataset, hidden, train_config);
    fs::create_directories(opts.out_dir);
    shmloc::io::write_text_file(
        fs::path(opts.out_dir) / "model.json",
        shmloc::io::classifier_to_json(arm.classifier).dump(2) + "\n");
    shmloc::io::write_text_file(fs::path(opts.out_dir) / "loss.csv",
                                shmloc::io::loss_history_to_csv(arm.history));
    print_confusion(opts, "Confusion matrix (test set)", arm.cm);
    info(opts, "hidden size " + std::to_string(arm.hidden_size) +
                   ", stopped at epoch " + std::to_string(arm.history.stopped_epoch));
    return 0;
}

int run_transfer(const CommonOptions& opts, const StageFiles& files) {
    const auto config = load_config(opts);
    const auto dataset = load_selected_dataset(files);
    const auto source = shmloc::io::classifier_from_json(
        shmloc::io::read_json_file(files.source_path));
    const auto small = restrict_classes(dataset, config.small_classes);
    auto transfer_config = config.transfer_stage;
    transfer_config.seed = shmloc::derive_seed(config.seed, {5});
    const auto arm = shmloc::pipeline::train_frozen_arm(
        small,
        [&](shmloc::Rng& rng) {
            return shmloc::mlp::freeze_transfer(source.model, small.classes().size(),
                                                transfer_config.init_std, rng);
        },
        transfer_config);
    fs::create_directories(opts.out_dir);
    shmloc::io::write_text_file(
        fs::path(opts.out_dir) / "model_transfer.json",
        shmloc::io::classifier_to_json(arm.classifier).dump(2) + "\n");
    shmloc::io::write_text_file(fs::path(opts.out_dir) / "loss_transfer.csv",
                                shmloc::io::loss_history_to_csv(arm.history));
    print_confusion(opts, "Confusion matrix (frozen-transfer model, test set)", arm.cm);
    return 0;
}

int run_evaluate(const CommonOptions& opts, const StageFiles& files) {
    const auto dataset = load_selected_dataset(files);
    const auto classifier = shmloc::io::classifier_from_json(
        shmloc::io::read_json_file(files.model_path));
    if (classifier.model.inputs() != dataset.x.cols()) {
        shmloc::raise(shmloc::ErrorKind::Bounds,
                      "evaluate: model expects " +
                          std::to_string(classifier.model.inputs()) +
                          " inputs but dataset has " +
                          std::to_string(dataset.x.cols()) + " features");
    }
    const auto restricted = restrict_classes(
        dataset,
        std::set<int>(classifier.classes.begin(), classifier.classes.end()));
    const auto [x, y] = restricted.rows(shmloc::features::Split::Test);
    const auto cm = shmloc::pipeline::evaluate(classifier, x, y);
    if (!opts.out_dir.empty()) {
        fs::create_directories(opts.out_dir);
        shmloc::io::write_text_file(fs::path(opts.out_dir) / "eval.json",
                                    shmloc::io::confusion_to_json(cm).dump(2) + "\n");
    }
    print_confusion(opts, "Confusion matrix (test set)", cm);
    return 0;
}

int run_pca(const CommonOptions& opts, const StageFiles& files,
            std::size_t components) {
    const auto dataset = load_selected_dataset(files);
    shmloc::Matrix points = dataset.x;
    std::string name = "features";
    if (!files.model_path.empty()) {
        const auto classifier = shmloc::io::classifier_from_json(
            shmloc::io::read_json_file(files.model_path));
        shmloc::Matrix hidden(points.rows(), classifier.model.hidden());
        for (std::size_t i = 0; i < points.rows(); ++i) {
            hidden.set_row(
                i, shmloc::mlp::hidden_activations(classifier.model, points.row(i)));
        }
        points = std::move(hidden);
        name = "hidden";
    }
    const auto model = shmloc::features::pca_fit(points, components);
    shmloc::pipeline::PcaExport e;
    e.name = name;
    e.classes = dataset.y;
    e.scores = shmloc::features::pca_project(model, points);
    e.explained_variance = model.explained_variance;
    e.total_variance = model.total_variance;
    fs::create_directories(opts.out_dir);
    shmloc::io::write_text_file(fs::path(opts.out_dir) / ("pca_" + name + ".csv"),
                                shmloc::io::pca_export_to_csv(e));
    double explained = 0.0;
    for (double v : e.explained_variance) explained += v;
    info(opts, "top-" + std::to_string(components) + " components explain " +
                   shmloc::io::format_double(100.0 * explained / e.total_variance) +
                   "% of total variance");
    return 0;
}

int run_experiment_cmd(const CommonOptions& opts, const StageFiles& files) {
    const auto config = load_config(opts);
    const auto bundle = load_or_generate(opts, config, files.data_dir);
    progress(opts, "running experiment");
    const auto report = shmloc::pipeline::run_experiment(config, bundle.data);
    shmloc::io::write_experiment_outputs(opts.out_dir, config, report);

    print_confusion(opts, "Monolithic nine-class classifier (test set)",
                    report.monolithic.cm);
    print_confusion(opts, "Sub-problem classifier, large panels (test set)",
                    report.split_large.cm);
    print_confusion(opts, "Sub-problem classifier, panels 3 & 6 (test set)",
                    report.split_small.cm);
    print_confusion(opts, "Frozen-transfer classifier, panels 3 & 6 (test set)",
                    report.transfer_small.cm);
    print_confusion(opts, "Single-layer control, panels 3 & 6 (test set)",
                    report.scratch_small_2layer.cm);
    if (!opts.quiet) {
        std::cout << "composite split accuracy: " << std::fixed
                  << std::setprecision(2) << 100.0 * report.composite_split_accuracy
                  << "%  (monolithic: " << 100.0 * report.monolithic.cm.accuracy()
                  << "%)\n"
                  << std::defaultfloat << std::setprecision(6);
    }
    info(opts, "artifacts written to " + opts.out_dir);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"damage localization on a synthetic chain structure: "
                 "transmissibility features, novelty indices, shallow "
                 "classifiers, problem splitting and frozen-layer transfer"};
    app.require_subcommand(1);

    CommonOptions opts;
    StageFiles files;
    std::vector<int> class_filter;
    std::size_t pca_components = 3;

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    add_common(gen, opts);

    auto* feat =
        app.add_subcommand("features", "fit baselines and compute novelty features");
    add_common(feat, opts);
    feat->add_option("--data", files.data_dir, "dataset directory (default: generate)");

    auto* sel = app.add_subcommand("select", "genetic feature selection");
    add_common(sel, opts);
    sel->add_option("--features", files.features_path, "features.csv path")->required();

    auto* train = app.add_subcommand("train", "train a classifier");
    add_common(train, opts);
    train->add_option("--features", files.features_path, "features.csv path")->required();
    train->add_option("--selection", files.selection_path, "selection.json path")
        ->required();
    train->add_option("--classes", class_filter, "restrict training to these class ids");

    auto* transfer = app.add_subcommand(
        "transfer", "freeze-transfer a trained first layer to the small sub-problem");
    add_common(transfer, opts);
    transfer->add_option("--features", files.features_path, "features.csv path")
        ->required();
    transfer->add_option("--selection", files.selection_path, "selection.json path")
        ->required();
    transfer->add_option("--source", files.source_path, "source model.json")->required();

    auto* eval = app.add_subcommand("evaluate", "evaluate a model on the test split");
    add_common(eval, opts, false);
    eval->add_option("--out", opts.out_dir, "output directory (optional)");
    eval->add_option("--features", files.features_path, "features.csv path")->required();
    eval->add_option("--selection", files.selection_path, "selection.json path")
        ->required();
    eval->add_option("--model", files.model_path, "model.json path")->required();

    auto* pca = app.add_subcommand("pca", "export principal-component scores");
    add_common(pca, opts);
    pca->add_option("--features", files.features_path, "features.csv path")->required();
    pca->add_option("--selection", files.selection_path, "selection.json path")
        ->required();
    pca->add_option("--model", files.model_path,
                    "optional model.json; project hidden activations instead");
    pca->add_option("--components", pca_components, "component count");

    auto* exp = app.add_subcommand("experiment", "run the full study");
    add_common(exp, opts);
    exp->add_option("--data", files.data_dir, "dataset directory (default: generate)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) return run_gen_data(opts);
        if (feat->parsed()) return run_features(opts, files);
        if (sel->parsed()) return run_select(opts, files);
        if (train->parsed()) return run_train(opts, files, class_filter);
        if (transfer->parsed()) return run_transfer(opts, files);
        if (eval->parsed()) return run_evaluate(opts, files);
        if (pca->parsed()) return run_pca(opts, files, pca_components);
        if (exp->parsed()) return run_experiment_cmd(opts, files);
    } catch (const shmloc::Error& e) {
        const json error = {{"error", shmloc::to_string(e.kind())},
                            {"message", e.what()}};
        std::cerr << error.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        const json error = {{"error", "internal"}, {"message", e.what()}};
        std::cerr << error.dump() << "\n";
        return 1;
    }
    return 2;
}
