#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "shmloc/errors.hpp"
#include "shmloc/features.hpp"
#include "shmloc/mlp.hpp"
#include "shmloc/novelty.hpp"
#include "shmloc/pipeline.hpp"
#include "shmloc/synthdata.hpp"

namespace shmloc::io {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Number formatting: shortest decimal that round-trips a 64-bit float,
// so serialized artifacts diff reproducibly and read back bit-exactly.
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
    char buf[40];
    const auto result = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, result.ptr);
}

inline double parse_double(std::string_view s) {
    double v = 0.0;
    const auto result = std::from_chars(s.data(), s.data() + s.size(), v);
    if (result.ec != std::errc{} || result.ptr != s.data() + s.size()) {
        raise(ErrorKind::Io, "malformed number '" + std::string(s) + "'");
    }
    return v;
}

inline long long parse_int(std::string_view s) {
    long long v = 0;
    const auto result = std::from_chars(s.data(), s.data() + s.size(), v);
    if (result.ec != std::errc{} || result.ptr != s.data() + s.size()) {
        raise(ErrorKind::Io, "malformed integer '" + std::string(s) + "'");
    }
    return v;
}

// ---------------------------------------------------------------------------
// File helpers
// ---------------------------------------------------------------------------

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        raise(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
    }
    out << text;
    if (!out) {
        raise(ErrorKind::Io, "failed writing '" + path.string() + "'");
    }
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        raise(ErrorKind::Io, "cannot open '" + path.string() + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

inline json read_json_file(const std::filesystem::path& path) {
    json parsed = json::parse(read_text_file(path), nullptr, false);
    if (parsed.is_discarded()) {
        raise(ErrorKind::Io, "invalid JSON in '" + path.string() + "'");
    }
    return parsed;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

// ---------------------------------------------------------------------------
// Matrix / vector JSON helpers
// ---------------------------------------------------------------------------

inline json vector_to_json(const Vector& v) {
    json out = json::array();
    for (double x : v) out.push_back(x);
    return out;
}

inline Vector vector_from_json(const json& j) {
    Vector v;
    v.reserve(j.size());
    for (const auto& x : j) v.push_back(x.get<double>());
    return v;
}

inline json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) rows.push_back(vector_to_json(m.row(i)));
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", rows}};
}

inline Matrix matrix_from_json(const json& j) {
    Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
    const json& rows = j.at("data");
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t c = 0; c < m.cols(); ++c) m(i, c) = rows[i][c].get<double>();
    }
    return m;
}

// ---------------------------------------------------------------------------
// Model configuration and sensor layout
// ---------------------------------------------------------------------------

inline json model_config_to_json(const synth::ModelConfig& config) {
    json reductions = json::object();
    for (const auto& [c, r] : config.reductions) reductions[std::to_string(c)] = r;
    json springs = json::object();
    for (const auto& [c, s] : config.springs) springs[std::to_string(c)] = s;
    return {
        {"n_dof", config.n_dof},
        {"mass", config.mass},
        {"stiffness", config.stiffness},
        {"damping_alpha", config.damping_alpha},
        {"damping_beta", config.damping_beta},
        {"reductions", reductions},
        {"springs", springs},
    };
}

inline synth::ModelConfig model_config_from_json(const json& j) {
    synth::ModelConfig config;
    config.n_dof = j.value("n_dof", config.n_dof);
    config.mass = j.value("mass", config.mass);
    config.stiffness = j.value("stiffness", config.stiffness);
    config.damping_alpha = j.value("damping_alpha", config.damping_alpha);
    config.damping_beta = j.value("damping_beta", config.damping_beta);
    if (j.contains("reductions")) {
        config.reductions.clear();
        for (const auto& [key, value] : j.at("reductions").items()) {
            config.reductions[static_cast<int>(parse_int(key))] = value.get<double>();
        }
    }
    if (j.contains("springs")) {
        for (const auto& [key, value] : j.at("springs").items()) {
            config.springs[static_cast<int>(parse_int(key))] =
                value.get<std::vector<std::size_t>>();
        }
    }
    return config;
}

inline json layout_to_json(const synth::SensorLayout& layout) {
    json pairs = json::array();
    for (const auto& [resp, ref] : layout.pairs) {
        pairs.push_back(json::array({resp, ref}));
    }
    return {
        {"pairs", pairs},
        {"excitation_dof", layout.excitation_dof},
        {"freq_grid", vector_to_json(layout.freq_grid)},
        {"n_lines", layout.n_lines},
    };
}

inline synth::SensorLayout layout_from_json(const json& j) {
    synth::SensorLayout layout;
    for (const auto& p : j.at("pairs")) {
        layout.pairs.emplace_back(p[0].get<std::size_t>(), p[1].get<std::size_t>());
    }
    layout.excitation_dof = j.at("excitation_dof").get<std::size_t>();
    layout.freq_grid = vector_from_json(j.at("freq_grid"));
    layout.n_lines = j.at("n_lines").get<std::size_t>();
    return layout;
}

// ---------------------------------------------------------------------------
// Dataset directory: meta.json + records.csv
// ---------------------------------------------------------------------------

struct DatasetBundle {
    synth::RawDataset data;
    synth::ModelConfig model_config;
    synth::SensorLayout layout;
};

inline void write_dataset_dir(const std::filesystem::path& dir,
                              const synth::RawDataset& dataset,
                              const synth::ModelConfig& model_config,
                              const synth::SensorLayout& layout) {
    json counts = json::object();
    for (const auto& [c, n] : dataset.per_class_counts) counts[std::to_string(c)] = n;
    const json meta = {
        {"model", model_config_to_json(model_config)},
        {"layout", layout_to_json(layout)},
        {"seed", dataset.rng_seed},
        {"per_class_counts", counts},
        {"n_records", dataset.records.size()},
    };
    std::filesystem::create_directories(dir);
    write_text_file(dir / "meta.json", meta.dump(2) + "\n");

    std::string csv = "class,rep,pair_index,line_index,magnitude\n";
    for (const auto& rec : dataset.records) {
        const std::string prefix =
            std::to_string(rec.class_id) + "," + std::to_string(rec.rep) + ",";
        for (std::size_t p = 0; p < rec.record.pairs; ++p) {
            for (std::size_t l = 0; l < rec.record.lines; ++l) {
                csv += prefix;
                csv += std::to_string(p);
                csv += ',';
                csv += std::to_string(l);
                csv += ',';
                csv += format_double(rec.record.magnitudes(p, l));
                csv += '\n';
            }
        }
    }
    write_text_file(dir / "records.csv", csv);
}

inline DatasetBundle read_dataset_dir(const std::filesystem::path& dir) {
    const json meta = read_json_file(dir / "meta.json");
    DatasetBundle bundle;
    bundle.model_config = model_config_from_json(meta.at("model"));
    bundle.layout = layout_from_json(meta.at("layout"));
    bundle.data.rng_seed = meta.at("seed").get<std::uint64_t>();
    for (const auto& [key, value] : meta.at("per_class_counts").items()) {
        bundle.data.per_class_counts[static_cast<int>(parse_int(key))] =
            value.get<std::size_t>();
    }

    const std::size_t pairs = bundle.layout.pairs.size();
    const std::size_t lines = bundle.layout.n_lines;
    const std::string csv = read_text_file(dir / "records.csv");

    std::map<std::pair<int, std::size_t>, Matrix> magnitudes;
    std::size_t pos = csv.find('\n');  // skip header
    if (pos == std::string::npos) {
        raise(ErrorKind::Io, "records.csv: missing header");
    }
    ++pos;
    while (pos < csv.size()) {
        std::size_t end = csv.find('\n', pos);
        if (end == std::string::npos) end = csv.size();
        const std::string_view line(csv.data() + pos, end - pos);
        pos = end + 1;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 5) {
            raise(ErrorKind::Io, "records.csv: expected 5 fields, got " +
                                     std::to_string(fields.size()));
        }
        const int class_id = static_cast<int>(parse_int(fields[0]));
        const std::size_t rep = static_cast<std::size_t>(parse_int(fields[1]));
        const std::size_t pair = static_cast<std::size_t>(parse_int(fields[2]));
        const std::size_t lineno = static_cast<std::size_t>(parse_int(fields[3]));
        if (pair >= pairs || lineno >= lines) {
            raise(ErrorKind::Io, "records.csv: pair/line index out of range");
        }
        auto [it, inserted] =
            magnitudes.try_emplace({class_id, rep}, Matrix(pairs, lines));
        it->second(pair, lineno) = parse_double(fields[4]);
    }
    for (auto& [key, mag] : magnitudes) {
        synth::ClassifiedRecord rec;
        rec.class_id = key.first;
        rec.rep = key.second;
        rec.record.pairs = pairs;
        rec.record.lines = lines;
        rec.record.freq_grid = bundle.layout.freq_grid;
        rec.record.magnitudes = std::move(mag);
        bundle.data.records.push_back(std::move(rec));
    }
    // Restore generation order: undamaged block first, then classes 1..9.
    std::stable_sort(bundle.data.records.begin(), bundle.data.records.end(),
                     [](const synth::ClassifiedRecord& a, const synth::ClassifiedRecord& b) {
                         if (a.class_id != b.class_id) return a.class_id < b.class_id;
                         return a.rep < b.rep;
                     });
    return bundle;
}

// ---------------------------------------------------------------------------
// Baseline models
// ---------------------------------------------------------------------------

inline json baseline_to_json(const novelty::BaselineModel& baseline) {
    return {
        {"window",
         {{"pair_index", baseline.window.pair_index},
          {"line_lo", baseline.window.line_lo},
          {"line_hi", baseline.window.line_hi}}},
        {"mean", vector_to_json(baseline.mean)},
        {"covariance", matrix_to_json(baseline.covariance)},
        {"regularization", baseline.regularization},
        {"n_samples", baseline.n_samples},
    };
}

/// Rebuilds the inverse from the stored covariance and verifies the
/// product against identity before the model may be used for scoring.
inline novelty::BaselineModel baseline_from_json(const json& j) {
    novelty::BaselineModel baseline;
    const json& w = j.at("window");
    baseline.window = {w.at("pair_index").get<std::size_t>(),
                       w.at("line_lo").get<std::size_t>(),
                       w.at("line_hi").get<std::size_t>()};
    baseline.mean = vector_from_json(j.at("mean"));
    baseline.covariance = matrix_from_json(j.at("covariance"));
    baseline.regularization = j.at("regularization").get<double>();
    baseline.n_samples = j.at("n_samples").get<std::size_t>();
    baseline.inv_covariance = cholesky_inverse(cholesky(baseline.covariance));
    const Matrix product = mat_mul(baseline.inv_covariance, baseline.covariance);
    for (std::size_t i = 0; i < product.rows(); ++i) {
        for (std::size_t jj = 0; jj < product.cols(); ++jj) {
            const double expected = i == jj ? 1.0 : 0.0;
            if (std::abs(product(i, jj) - expected) > 1e-8) {
                raise(ErrorKind::Io,
                      "baseline: recomputed inverse fails verification against "
                      "stored covariance");
            }
        }
    }
    return baseline;
}

inline void write_baselines(const std::filesystem::path& path,
                            const std::vector<novelty::BaselineModel>& baselines) {
    json list = json::array();
    for (const auto& b : baselines) list.push_back(baseline_to_json(b));
    write_text_file(path, json{{"baselines", list}}.dump(2) + "\n");
}

inline std::vector<novelty::BaselineModel> read_baselines(
    const std::filesystem::path& path) {
    const json parsed = read_json_file(path);
    std::vector<novelty::BaselineModel> baselines;
    for (const auto& b : parsed.at("baselines")) {
        baselines.push_back(baseline_from_json(b));
    }
    return baselines;
}

// ---------------------------------------------------------------------------
// MLP models
// ---------------------------------------------------------------------------

inline json mlp_to_json(const mlp::MlpModel& model) {
    return {
        {"inputs", model.inputs()},
        {"hidden", model.hidden()},
        {"outputs", model.outputs()},
        {"hidden_activation", mlp::to_string(model.hidden_activation)},
        {"output_activation", mlp::to_string(model.output_activation)},
        {"frozen_first_layer", model.frozen_first_layer},
        {"w1", vector_to_json(model.w1.data())},
        {"b1", vector_to_json(model.b1)},
        {"w2", vector_to_json(model.w2.data())},
        {"b2", vector_to_json(model.b2)},
    };
}

inline mlp::MlpModel mlp_from_json(const json& j) {
    mlp::MlpModel model;
    const auto d = j.at("inputs").get<std::size_t>();
    const auto h = j.at("hidden").get<std::size_t>();
    const auto c = j.at("outputs").get<std::size_t>();
    model.w1 = Matrix(h, d);
    model.w1.data() = vector_from_json(j.at("w1"));
    model.b1 = vector_from_json(j.at("b1"));
    model.w2 = Matrix(c, h);
    model.w2.data() = vector_from_json(j.at("w2"));
    model.b2 = vector_from_json(j.at("b2"));
    if (model.w1.data().size() != h * d || model.b1.size() != h ||
        model.w2.data().size() != c * h || model.b2.size() != c) {
        raise(ErrorKind::Io, "mlp: parameter array sizes inconsistent with dims");
    }
    model.hidden_activation =
        mlp::activation_from_string(j.at("hidden_activation").get<std::string>());
    model.output_activation =
        mlp::activation_from_string(j.at("output_activation").get<std::string>());
    model.frozen_first_layer = j.at("frozen_first_layer").get<bool>();
    return model;
}

inline json classifier_to_json(const pipeline::Classifier& classifier) {
    return {{"classes", classifier.classes}, {"model", mlp_to_json(classifier.model)}};
}

inline pipeline::Classifier classifier_from_json(const json& j) {
    pipeline::Classifier classifier;
    classifier.classes = j.at("classes").get<std::vector<int>>();
    classifier.model = mlp_from_json(j.at("model"));
    return classifier;
}

// ---------------------------------------------------------------------------
// Feature datasets (CSV)
// ---------------------------------------------------------------------------

inline std::string feature_dataset_to_csv(const features::FeatureDataset& ds) {
    std::string csv = "class,rep,split";
    for (std::size_t j = 0; j < ds.x.cols(); ++j) {
        csv += ",f" + std::to_string(j);
    }
    csv += '\n';
    for (std::size_t i = 0; i < ds.size(); ++i) {
        csv += std::to_string(ds.y[i]);
        csv += ',';
        csv += std::to_string(ds.rep[i]);
        csv += ',';
        csv += features::to_string(ds.split[i]);
        for (std::size_t j = 0; j < ds.x.cols(); ++j) {
            csv += ',';
            csv += format_double(ds.x(i, j));
        }
        csv += '\n';
    }
    return csv;
}

inline features::FeatureDataset feature_dataset_from_csv(const std::string& csv) {
    features::FeatureDataset ds;
    std::size_t pos = csv.find('\n');
    if (pos == std::string::npos) {
        raise(ErrorKind::Io, "features csv: missing header");
    }
    const auto header = split_csv_line(std::string_view(csv.data(), pos));
    if (header.size() < 4) {
        raise(ErrorKind::Io, "features csv: expected class,rep,split,f0,...");
    }
    const std::size_t d = header.size() - 3;
    ++pos;
    std::vector<Vector> rows;
    while (pos < csv.size()) {
        std::size_t end = csv.find('\n', pos);
        if (end == std::string::npos) end = csv.size();
        const std::string_view line(csv.data() + pos, end - pos);
        pos = end + 1;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != d + 3) {
            raise(ErrorKind::Io, "features csv: bad field count");
        }
        ds.y.push_back(static_cast<int>(parse_int(fields[0])));
        ds.rep.push_back(static_cast<std::size_t>(parse_int(fields[1])));
        const std::string_view split = fields[2];
        if (split == "train") ds.split.push_back(features::Split::Train);
        else if (split == "validation") ds.split.push_back(features::Split::Validation);
        else if (split == "test") ds.split.push_back(features::Split::Test);
        else raise(ErrorKind::Io, "features csv: unknown split tag '" + std::string(split) + "'");
        Vector row(d);
        for (std::size_t j = 0; j < d; ++j) row[j] = parse_double(fields[3 + j]);
        rows.push_back(std::move(row));
    }
    ds.x = Matrix(rows.size(), d);
    for (std::size_t i = 0; i < rows.size(); ++i) ds.x.set_row(i, rows[i]);
    return ds;
}

// ---------------------------------------------------------------------------
// Experiment manifest, report, and plot-data CSVs
// ---------------------------------------------------------------------------

inline json train_config_to_json(const mlp::TrainConfig& c) {
    return {
        {"learning_rate", c.learning_rate},
        {"max_epochs", c.max_epochs},
        {"early_stop_rel", c.early_stop_rel},
        {"early_stop_patience", c.early_stop_patience},
        {"restarts", c.restarts},
        {"init_std", c.init_std},
        {"seed", c.seed},
    };
}

inline mlp::TrainConfig train_config_from_json(const json& j,
                                               mlp::TrainConfig c = {}) {
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.early_stop_rel = j.value("early_stop_rel", c.early_stop_rel);
    c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
    c.restarts = j.value("restarts", c.restarts);
    c.init_std = j.value("init_std", c.init_std);
    c.seed = j.value("seed", c.seed);
    return c;
}

inline json ga_config_to_json(const features::GAConfig& c) {
    return {
        {"population", c.population},
        {"generations", c.generations},
        {"subset_size", c.subset_size},
        {"mutation_rate", c.mutation_rate},
        {"tournament_size", c.tournament_size},
        {"elitism", c.elitism},
        {"seed", c.seed},
    };
}

inline features::GAConfig ga_config_from_json(const json& j) {
    features::GAConfig c;
    c.population = j.value("population", c.population);
    c.generations = j.value("generations", c.generations);
    c.subset_size = j.value("subset_size", c.subset_size);
    c.mutation_rate = j.value("mutation_rate", c.mutation_rate);
    c.tournament_size = j.value("tournament_size", c.tournament_size);
    c.elitism = j.value("elitism", c.elitism);
    c.seed = j.value("seed", c.seed);
    return c;
}

inline json experiment_config_to_json(const pipeline::ExperimentConfig& c) {
    return {
        {"model", model_config_to_json(c.model)},
        {"n_lines", c.n_lines},
        {"band_lo_hz", c.band_lo_hz},
        {"band_hi_hz", c.band_hi_hz},
        {"reps_per_class", c.reps_per_class},
        {"noise_level", c.noise_level},
        {"window_len", c.window_len},
        {"log_magnitude", c.log_magnitude},
        {"ridge", c.ridge},
        {"ga", ga_config_to_json(c.ga)},
        {"small_classes", std::vector<int>(c.small_classes.begin(), c.small_classes.end())},
        {"hidden_sizes_monolithic", c.hidden_sizes_monolithic},
        {"hidden_sizes_sub", c.hidden_sizes_sub},
        {"train_stage", train_config_to_json(c.train_stage)},
        {"small_stage", train_config_to_json(c.small_stage)},
        {"transfer_stage", train_config_to_json(c.transfer_stage)},
        {"pca_components", c.pca_components},
        {"seed", c.seed},
    };
}

inline pipeline::ExperimentConfig experiment_config_from_json(const json& j) {
    pipeline::ExperimentConfig c;
    if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
    c.n_lines = j.value("n_lines", c.n_lines);
    c.band_lo_hz = j.value("band_lo_hz", c.band_lo_hz);
    c.band_hi_hz = j.value("band_hi_hz", c.band_hi_hz);
    c.reps_per_class = j.value("reps_per_class", c.reps_per_class);
    c.noise_level = j.value("noise_level", c.noise_level);
    c.window_len = j.value("window_len", c.window_len);
    c.log_magnitude = j.value("log_magnitude", c.log_magnitude);
    c.ridge = j.value("ridge", c.ridge);
    if (j.contains("ga")) c.ga = ga_config_from_json(j.at("ga"));
    if (j.contains("small_classes")) {
        c.small_classes.clear();
        for (const auto& v : j.at("small_classes")) c.small_classes.insert(v.get<int>());
    }
    if (j.contains("hidden_sizes_monolithic")) {
        c.hidden_sizes_monolithic =
            j.at("hidden_sizes_monolithic").get<std::vector<std::size_t>>();
    }
    if (j.contains("hidden_sizes_sub")) {
        c.hidden_sizes_sub = j.at("hidden_sizes_sub").get<std::vector<std::size_t>>();
    }
    if (j.contains("train_stage")) {
        c.train_stage = train_config_from_json(j.at("train_stage"), c.train_stage);
    }
    if (j.contains("small_stage")) {
        c.small_stage = train_config_from_json(j.at("small_stage"), c.small_stage);
    }
    if (j.contains("transfer_stage")) {
        c.transfer_stage = train_config_from_json(j.at("transfer_stage"), c.transfer_stage);
    }
    c.pca_components = j.value("pca_components", c.pca_components);
    c.seed = j.value("seed", c.seed);
    return c;
}

inline json confusion_to_json(const pipeline::ConfusionMatrix& cm) {
    json counts = json::array();
    for (std::size_t i = 0; i < cm.counts.rows(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < cm.counts.cols(); ++j) {
            row.push_back(static_cast<std::size_t>(cm.counts(i, j)));
        }
        counts.push_back(row);
    }
    return {{"classes", cm.classes}, {"counts", counts}, {"accuracy", cm.accuracy()}};
}

inline json arm_to_json(const pipeline::ArmResult& arm) {
    return {
        {"confusion", confusion_to_json(arm.cm)},
        {"hidden_size", arm.hidden_size},
        {"stopped_epoch", arm.history.stopped_epoch},
        {"validation_loss", arm.val_loss},
    };
}

inline json report_to_json(const pipeline::ExperimentReport& report) {
    json pca = json::array();
    for (const auto& e : report.pca_exports) {
        double top = 0.0;
        for (double v : e.explained_variance) top += v;
        pca.push_back({
            {"name", e.name},
            {"file", "pca_" + e.name + ".csv"},
            {"explained_variance", vector_to_json(e.explained_variance)},
            {"total_variance", e.total_variance},
            {"explained_fraction", e.total_variance > 0.0 ? top / e.total_variance : 0.0},
        });
    }
    return {
        {"monolithic", arm_to_json(report.monolithic)},
        {"split_large", arm_to_json(report.split_large)},
        {"split_small", arm_to_json(report.split_small)},
        {"transfer_small", arm_to_json(report.transfer_small)},
        {"scratch_small_2layer", arm_to_json(report.scratch_small_2layer)},
        {"composite_split_accuracy", report.composite_split_accuracy},
        {"selected_features", report.selected_features},
        {"ga_fitness_trace", vector_to_json(report.ga_fitness_trace)},
        {"normalization",
         {{"min", vector_to_json(report.normalization.min)},
          {"max", vector_to_json(report.normalization.max)}}},
        {"pca_exports", pca},
        {"notes", report.notes},
    };
}

inline std::string loss_history_to_csv(const mlp::LossHistory& history) {
    std::string csv = "epoch,train_loss,val_loss\n";
    for (std::size_t e = 0; e < history.train_loss.size(); ++e) {
        csv += std::to_string(e + 1);
        csv += ',';
        csv += format_double(history.train_loss[e]);
        csv += ',';
        csv += format_double(history.val_loss[e]);
        csv += '\n';
    }
    return csv;
}

/// Side-by-side histories of the transferred model and the scratch
/// control trained on the same sub-problem.
inline std::string loss_comparison_to_csv(const mlp::LossHistory& transfer,
                                          const mlp::LossHistory& scratch) {
    std::string csv =
        "epoch,transfer_train,transfer_val,scratch_train,scratch_val\n";
    const std::size_t n =
        std::max(transfer.train_loss.size(), scratch.train_loss.size());
    for (std::size_t e = 0; e < n; ++e) {
        csv += std::to_string(e + 1);
        for (const auto* h : {&transfer, &scratch}) {
            if (e < h->train_loss.size()) {
                csv += ',';
                csv += format_double(h->train_loss[e]);
                csv += ',';
                csv += format_double(h->val_loss[e]);
            } else {
                csv += ",,";
            }
        }
        csv += '\n';
    }
    return csv;
}

inline std::string pca_export_to_csv(const pipeline::PcaExport& e) {
    std::string csv = "class";
    for (std::size_t c = 0; c < e.scores.cols(); ++c) {
        csv += ",pc" + std::to_string(c + 1);
    }
    csv += '\n';
    for (std::size_t i = 0; i < e.scores.rows(); ++i) {
        csv += std::to_string(e.classes[i]);
        for (std::size_t c = 0; c < e.scores.cols(); ++c) {
            csv += ',';
            csv += format_double(e.scores(i, c));
        }
        csv += '\n';
    }
    return csv;
}

/// Writes manifest.json, report.json, the four loss CSVs and the three
/// PCA CSVs for one experiment run. The report embeds the manifest so it
/// is self-describing on its own.
inline void write_experiment_outputs(const std::filesystem::path& out_dir,
                                     const pipeline::ExperimentConfig& config,
                                     const pipeline::ExperimentReport& report) {
    std::filesystem::create_directories(out_dir);
    const json manifest = experiment_config_to_json(config);
    write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
    json report_doc = report_to_json(report);
    report_doc["manifest"] = manifest;
    write_text_file(out_dir / "report.json", report_doc.dump(2) + "\n");
    write_text_file(out_dir / "loss_monolithic.csv",
                    loss_history_to_csv(report.monolithic.history));
    write_text_file(out_dir / "loss_split_large.csv",
                    loss_history_to_csv(report.split_large.history));
    write_text_file(out_dir / "loss_split_small.csv",
                    loss_history_to_csv(report.split_small.history));
    write_text_file(out_dir / "loss_transfer_comparison.csv",
                    loss_comparison_to_csv(report.transfer_small.history,
                                           report.scratch_small_2layer.history));
    for (const auto& e : report.pca_exports) {
        write_text_file(out_dir / ("pca_" + e.name + ".csv"), pca_export_to_csv(e));
    }
}

} // namespace shmloc::io
