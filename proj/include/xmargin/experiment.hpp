#pragma once

// Experiment commands behind the `xmargin` CLI. Each command returns a
// RunReport (config echo, JSON payload, CSV tables); write_report puts it
// on disk.

#include "config.hpp"
#include "data.hpp"
#include "loss.hpp"
#include "metrics.hpp"
#include "network.hpp"
#include "optimizer.hpp"
#include "parallel.hpp"
#include "random.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace xmargin {

inline constexpr const char* kToolkitVersion = "1.0.0";
inline constexpr int kReportSchemaVersion = 1;

/// Rectangular CSV table; cells are preformatted.
struct Table {
    std::string file_name;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> row) {
        if (row.size() != columns.size()) throw std::logic_error(file_name + ": row width does not match header");
        rows.push_back(std::move(row));
    }

    std::size_t column_index(std::string_view name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return i;
        throw std::out_of_range(file_name + ": no column '" + std::string(name) + "'");
    }

    double number(std::size_t row, std::string_view column) const {
        return std::stod(rows.at(row).at(column_index(column)));
    }

    std::string to_csv() const {
        std::string out;
        auto line = [&out](const std::vector<std::string>& cells) {
            for (std::size_t i = 0; i < cells.size(); ++i) {
                if (i) out += ',';
                out += cells[i];
            }
            out += '\n';
        };
        line(columns);
        for (const auto& r : rows) line(r);
        return out;
    }
};

struct RunReport {
    Command command = Command::Train;
    ExperimentConfig config;
    nlohmann::ordered_json payload = nlohmann::ordered_json::object();
    std::vector<Table> tables;
    std::vector<std::pair<std::string, std::string>> extra_files; // name -> contents
    std::vector<std::string> warnings;
    double elapsed_seconds = 0.0;

    const Table& table(std::string_view file_name) const {
        for (const auto& t : tables)
            if (t.file_name == file_name) return t;
        throw std::out_of_range("no table '" + std::string(file_name) + "'");
    }
};

using detail::format_real;

namespace detail {

inline std::string format_optional(const std::optional<double>& v) { return v ? format_real(*v) : "undefined"; }

inline nlohmann::ordered_json optional_json(const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json("undefined");
}

} // namespace detail

/// Fixed choices the data does not determine; echoed in every report.
inline nlohmann::ordered_json defaults_in_force() {
    return {
        {"weight_init", "uniform +-sqrt(6/(fan_in+fan_out)), zero biases"},
        {"dropout", "inverted (scaled by 1/(1-rate) at train time)"},
        {"relu_subderivative_at_zero", 0},
        {"cv_std_form", "population"},
        {"cv_repeat_seed", "seed xor repeat_index"},
        {"scaling_fit", "training split only"},
        {"bce_clip", kBceClip},
        {"hinge_encoding", "max(0, 1 - t*s), t = 2*y_true-1, s = 2*y-1"},
        {"euler_constant", "exact e"},
        {"threshold", "y >= 0.5 predicts class 1"},
        {"train_acc", "inference mode, after each epoch"},
        {"bias_estimator", "mean over evaluation rows of (ensemble mean probability - label)^2"},
        {"grid_cell_score", "mean of per-repeat means; std is mean of per-repeat stds"},
        {"grid_tie_break", "higher mean, then smaller std, then smaller lambda1, then smaller lambda2"},
    };
}

inline Dataset load_dataset(const ExperimentConfig& c) { return load_csv(c.dataset, c.csv_schema()); }

inline MlpModel build_model(const ExperimentConfig& c, Command command, std::size_t input_dim, std::uint64_t seed) {
    Architecture arch = c.architecture;
    if (arch == Architecture::Auto) arch = command == Command::Boundary ? Architecture::Boundary : Architecture::Paper;
    return arch == Architecture::Boundary ? build_boundary_model(input_dim, seed) : build_paper_model(input_dim, seed);
}

/// Trains a fresh model; `seed` fixes both initialization and the
/// shuffle/dropout stream.
inline TrainResult train_model(const ExperimentConfig& c, Command command, const LossParams& loss,
                               const Dataset& train_data, std::uint64_t seed, const Dataset* eval = nullptr) {
    MlpModel model = build_model(c, command, train_data.cols, derive_seed(seed, 11));
    Rng rng(derive_seed(seed, 12));
    return train(std::move(model), train_data, loss, c.optimizer_config(), {c.epochs, c.batch_size}, rng, eval);
}

struct EvaluationSummary {
    double accuracy = 0.0;
    std::optional<double> cond_acc_0;
    std::optional<double> cond_acc_1;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> auc;
    ConfusionCounts counts;
};

inline EvaluationSummary summarize(std::span<const double> probs, std::span<const int> truth) {
    EvaluationSummary s;
    const auto preds = hard_labels(probs);
    s.counts = confusion(preds, truth);
    s.accuracy = accuracy(preds, truth);
    const auto pr = precision_recall(s.counts);
    s.precision = pr.precision;
    s.recall = pr.recall;
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < truth.size(); ++i) (truth[i] == 1 ? pos : neg).push_back(probs[i]);
    if (!neg.empty()) s.cond_acc_0 = conditional_accuracy(preds, truth, 0);
    if (!pos.empty()) s.cond_acc_1 = conditional_accuracy(preds, truth, 1);
    if (!pos.empty() && !neg.empty()) s.auc = auc(pos, neg);
    return s;
}

inline nlohmann::ordered_json to_json(const EvaluationSummary& s) {
    return {
        {"accuracy", s.accuracy},
        {"conditional_accuracy_0", detail::optional_json(s.cond_acc_0)},
        {"conditional_accuracy_1", detail::optional_json(s.cond_acc_1)},
        {"precision", detail::optional_json(s.precision)},
        {"recall", detail::optional_json(s.recall)},
        {"auc", detail::optional_json(s.auc)},
        {"tp", s.counts.tp},
        {"fp", s.counts.fp},
        {"tn", s.counts.tn},
        {"fn", s.counts.fn},
    };
}

inline nlohmann::ordered_json to_json(const CvReport& r) {
    nlohmann::ordered_json means = nlohmann::ordered_json::array(), stds = nlohmann::ordered_json::array();
    for (const auto& rep : r.per_repeat) {
        means.push_back(rep.mean);
        stds.push_back(rep.stddev);
    }
    return {
        {"k", r.k},
        {"repeats", r.repeats},
        {"seed", r.seed},
        {"scaling", to_string(r.scaling)},
        {"mean_envelope", {{"min", r.mean_envelope.min}, {"max", r.mean_envelope.max}}},
        {"std_envelope", {{"min", r.std_envelope.min}, {"max", r.std_envelope.max}}},
        {"repeat_means", means},
        {"repeat_stds", stds},
    };
}

/// Stratified split of the configured dataset with train-fitted scaling.
inline PreparedSplit split_dataset(const ExperimentConfig& c, const Dataset& data) {
    const TrainTestSplit s = stratified_split(data, c.test_fraction, derive_seed(c.seed_value(), 1));
    return prepare_split(data, s.train, s.test, c.scaling);
}

inline RunReport cmd_train(const ExperimentConfig& c) {
    RunReport report;
    report.command = Command::Train;
    report.config = c;
    const Dataset data = load_dataset(c);
    const PreparedSplit split = split_dataset(c, data);
    const TrainResult result = train_model(c, Command::Train, c.loss, split.train, c.seed_value(), &split.held_out);

    Table curves{"curves.csv", {"epoch", "train_loss", "train_acc", "test_acc"}, {}};
    for (const auto& e : result.history)
        curves.add_row({std::to_string(e.epoch), format_real(e.train_loss), format_real(e.train_acc),
                        detail::format_optional(e.eval_acc)});
    report.tables.push_back(std::move(curves));

    const auto test_probs = predict_all(result.model, split.held_out);
    report.payload["rows"] = {{"train", split.train.rows}, {"test", split.held_out.rows}};
    report.payload["steps"] = result.steps;
    report.payload["final_train_accuracy"] = model_accuracy(result.model, split.train);
    report.payload["test"] = to_json(summarize(test_probs, split.held_out.labels));
    if (result.best_loss) report.payload["best_train_loss"] = *result.best_loss;

    std::ostringstream model_text;
    save_model(model_text, result.model);
    report.extra_files.emplace_back("model.txt", model_text.str());
    return report;
}

/// Repeated CV accuracy for one loss setting.
inline CvReport run_cv(const ExperimentConfig& c, const Dataset& data, const LossParams& loss) {
    CvOptions options;
    options.k = c.k;
    options.repeats = c.repeats;
    options.seed = c.seed_value();
    options.scaling = c.scaling;
    options.threads = configured_threads();
    return repeated_cv(
        data, options,
        [&](const Dataset& train_data, std::uint64_t seed) {
            return train_model(c, Command::Cv, loss, train_data, seed).model;
        },
        [](const MlpModel& model, const Dataset& held_out) { return model_accuracy(model, held_out); });
}

inline RunReport cmd_cv(const ExperimentConfig& c) {
    RunReport report;
    report.command = Command::Cv;
    report.config = c;
    const Dataset data = load_dataset(c);
    const CvReport cv = run_cv(c, data, c.loss);

    Table folds{"cv_folds.csv", {"repeat", "fold", "accuracy"}, {}};
    Table repeats{"cv_repeats.csv", {"repeat", "fold_seed", "mean", "std"}, {}};
    for (std::size_t r = 0; r < cv.per_repeat.size(); ++r) {
        const auto& rep = cv.per_repeat[r];
        for (std::size_t f = 0; f < rep.fold_scores.size(); ++f)
            folds.add_row({std::to_string(r), std::to_string(f), format_real(rep.fold_scores[f])});
        repeats.add_row({std::to_string(r), std::to_string(rep.seed), format_real(rep.mean), format_real(rep.stddev)});
    }
    report.tables.push_back(std::move(folds));
    report.tables.push_back(std::move(repeats));
    report.payload["loss"] = detail::describe_variant(c.loss);
    report.payload["cv"] = to_json(cv);
    return report;
}

struct GridCell {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    std::optional<CvReport> cv;
    std::string error;

    double mean() const {
        double s = 0.0;
        for (const auto& r : cv->per_repeat) s += r.mean;
        return s / static_cast<double>(cv->per_repeat.size());
    }
    double stddev() const {
        double s = 0.0;
        for (const auto& r : cv->per_repeat) s += r.stddev;
        return s / static_cast<double>(cv->per_repeat.size());
    }
};

/// Best cell: higher mean, then smaller std, then smaller lambda1, then
/// smaller lambda2. Failed cells are skipped; nullopt if all failed.
inline std::optional<std::size_t> grid_argmax(std::span<const GridCell> cells) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (!cells[i].cv) continue;
        if (!best) {
            best = i;
            continue;
        }
        const GridCell& a = cells[i];
        const GridCell& b = cells[*best];
        const auto key_a = std::make_tuple(-a.mean(), a.stddev(), a.lambda1, a.lambda2);
        const auto key_b = std::make_tuple(-b.mean(), b.stddev(), b.lambda1, b.lambda2);
        if (key_a < key_b) best = i;
    }
    return best;
}

inline RunReport cmd_grid(const ExperimentConfig& c) {
    RunReport report;
    report.command = Command::Grid;
    report.config = c;
    const Dataset data = load_dataset(c);

    std::vector<GridCell> cells;
    for (const auto& [l1, l2] : c.lambda_grid) {
        GridCell cell{l1, l2, std::nullopt, {}};
        try {
            cell.cv = run_cv(c, data, LossParams::xtreme(l1, l2));
        } catch (const std::exception& e) {
            cell.error = e.what();
            report.warnings.push_back("grid cell lambda1=" + format_real(l1) + " lambda2=" + format_real(l2) +
                                      " failed and is excluded from the argmax: " + e.what());
        }
        cells.push_back(std::move(cell));
    }

    Table grid{"grid.csv",
               {"lambda1", "lambda2", "mean", "std", "mean_min", "mean_max", "std_min", "std_max", "status"},
               {}};
    nlohmann::ordered_json cell_json = nlohmann::ordered_json::array();
    for (const auto& cell : cells) {
        if (cell.cv) {
            grid.add_row({format_real(cell.lambda1), format_real(cell.lambda2), format_real(cell.mean()),
                          format_real(cell.stddev()), format_real(cell.cv->mean_envelope.min),
                          format_real(cell.cv->mean_envelope.max), format_real(cell.cv->std_envelope.min),
                          format_real(cell.cv->std_envelope.max), "ok"});
            cell_json.push_back({{"lambda1", cell.lambda1},
                                 {"lambda2", cell.lambda2},
                                 {"mean", cell.mean()},
                                 {"std", cell.stddev()},
                                 {"cv", to_json(*cell.cv)}});
        } else {
            grid.add_row({format_real(cell.lambda1), format_real(cell.lambda2), "nan", "nan", "nan", "nan", "nan",
                          "nan", "failed"});
            cell_json.push_back({{"lambda1", cell.lambda1}, {"lambda2", cell.lambda2}, {"error", cell.error}});
        }
    }
    report.tables.push_back(std::move(grid));
    report.payload["cells"] = cell_json;
    if (const auto best = grid_argmax(cells)) {
        report.payload["argmax"] = {{"index", *best},
                                    {"lambda1", cells[*best].lambda1},
                                    {"lambda2", cells[*best].lambda2},
                                    {"mean", cells[*best].mean()},
                                    {"std", cells[*best].stddev()}};
    } else {
        report.payload["argmax"] = nullptr;
        report.warnings.push_back("every grid cell failed; no argmax");
    }
    return report;
}

inline RunReport cmd_boundary(const ExperimentConfig& c) {
    RunReport report;
    report.command = Command::Boundary;
    report.config = c;
    const Dataset full = load_dataset(c);
    const std::size_t pair[] = {c.features.first, c.features.second};
    for (std::size_t f : pair)
        if (f >= full.cols)
            throw std::invalid_argument("feature index " + std::to_string(f) + " out of range (dataset has " +
                                        std::to_string(full.cols) + " features)");
    const Dataset data = full.select_features(pair);

    double lo[2], hi[2];
    for (std::size_t j = 0; j < 2; ++j) {
        lo[j] = hi[j] = data.at(0, j);
        for (std::size_t i = 0; i < data.rows; ++i) {
            lo[j] = std::min(lo[j], data.at(i, j));
            hi[j] = std::max(hi[j], data.at(i, j));
        }
        if (lo[j] == hi[j])
            throw std::invalid_argument("selected feature " + std::to_string(pair[j]) + " is constant");
        const double pad = 0.1 * (hi[j] - lo[j]);
        lo[j] -= pad;
        hi[j] += pad;
    }

    const TrainTestSplit s = stratified_split(data, c.test_fraction, derive_seed(c.seed_value(), 1));
    const PreparedSplit split = prepare_split(data, s.train, s.test, c.scaling);
    const TrainResult result = train_model(c, Command::Boundary, c.loss, split.train, c.seed_value(), &split.held_out);
    const ScalingStats& stats = split.train.scaling;

    Table grid{"boundary_grid.csv", {"x1", "x2", "probability", "hard_label"}, {}};
    const std::size_t n = c.grid_resolution;
    for (std::size_t a = 0; a < n; ++a) {
        const double x1 = lo[0] + (hi[0] - lo[0]) * static_cast<double>(a) / static_cast<double>(n - 1);
        for (std::size_t b = 0; b < n; ++b) {
            const double x2 = lo[1] + (hi[1] - lo[1]) * static_cast<double>(b) / static_cast<double>(n - 1);
            const double scaled[] = {stats.apply(0, x1), stats.apply(1, x2)};
            const double p = predict_probability(result.model, scaled);
            grid.add_row({format_real(x1), format_real(x2), format_real(p), std::to_string(predict_label(p))});
        }
    }
    Table points{"boundary_points.csv", {"x1", "x2", "label", "split"}, {}};
    std::vector<char> is_test(data.rows, 0);
    for (std::size_t i : s.test) is_test[i] = 1;
    for (std::size_t i = 0; i < data.rows; ++i)
        points.add_row({format_real(data.at(i, 0)), format_real(data.at(i, 1)), std::to_string(data.labels[i]),
                        is_test[i] ? "test" : "train"});
    report.tables.push_back(std::move(grid));
    report.tables.push_back(std::move(points));

    const auto test_probs = predict_all(result.model, split.held_out);
    report.payload["features"] = {pair[0], pair[1]};
    report.payload["feature_names"] = {data.feature_names.at(0), data.feature_names.at(1)};
    report.payload["grid_range"] = {{"x1", {lo[0], hi[0]}}, {"x2", {lo[1], hi[1]}}};
    report.payload["grid_resolution"] = n;
    report.payload["test"] = to_json(summarize(test_probs, split.held_out.labels));
    return report;
}

/// Loss versus predicted probability. Besides the full loss, each row
/// carries the two piece expressions evaluated over the whole of [0, 1] and
/// the reduced distance |y_true - y|, so the shapes of the individual pieces
/// can be plotted.
inline RunReport cmd_loss_curve(const ExperimentConfig& c) {
    RunReport report;
    report.command = Command::LossCurve;
    report.config = c;
    c.loss.validate();
    if (c.curve_samples < 2) throw std::invalid_argument("curve_samples must be at least 2");
    Table curve{"loss_curve.csv", {"y", "loss", "branch", "correct_piece", "misclassified_piece", "distance"}, {}};
    const std::size_t n = c.curve_samples;
    const int t = c.curve_y_true;
    const double lambda = t == 1 ? c.loss.lambda2 : c.loss.lambda1;
    for (std::size_t i = 0; i < n; ++i) {
        const double y = static_cast<double>(i) / static_cast<double>(n - 1);
        const double distance = std::abs(static_cast<double>(t) - y);
        std::string branch;
        double value = 0.0;
        if (c.loss.family == LossFamily::XtremeMargin) {
            const LossValue v = xtreme_margin_loss(y, t, c.loss);
            value = v.value;
            branch = to_string(v.branch);
        } else {
            value = evaluate_loss(y, t, c.loss).value;
            branch = "none";
        }
        const double gap = 2.0 * y - 1.0;
        curve.add_row({format_real(y), format_real(value), branch, format_real(1.0 / (1.0 + lambda * gap * gap)),
                       format_real(std::exp(distance)), format_real(distance)});
    }
    report.tables.push_back(std::move(curve));
    report.payload["loss"] = detail::describe_variant(c.loss);
    report.payload["y_true"] = t;
    report.payload["samples"] = n;
    return report;
}

inline RunReport cmd_bias(const ExperimentConfig& c) {
    RunReport report;
    report.command = Command::Bias;
    report.config = c;
    const Dataset data = load_dataset(c);
    const PreparedSplit split = split_dataset(c, data);
    if (c.ensemble_seed_stride == 0)
        report.warnings.push_back("ensemble_seed_stride = 0: every ensemble member uses the same seed, so the "
                                  "ensemble is degenerate");

    Table table{"bias.csv",
                {"variant", "loss", "lambda1", "lambda2", "bias", "accuracy", "conditional_accuracy_0",
                 "conditional_accuracy_1", "precision", "recall", "auc"},
                {}};
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const LossParams& variant : c.variants) {
        std::vector<std::vector<double>> preds(c.ensemble_size);
        parallel_for(c.ensemble_size, configured_threads(), [&](std::size_t m) {
            const std::uint64_t seed = derive_seed(c.seed_value(), 100 + m * c.ensemble_seed_stride);
            preds[m] = predict_all(train_model(c, Command::Bias, variant, split.train, seed).model, split.held_out);
        });
        const BiasReport bias = bias_estimate(preds, split.held_out.labels);
        const EvaluationSummary s = summarize(bias.mean_predictions, split.held_out.labels);
        const bool xm = variant.family == LossFamily::XtremeMargin;
        table.add_row({detail::describe_variant(variant), std::string(to_string(variant.family)),
                       xm ? format_real(variant.lambda1) : "NA", xm ? format_real(variant.lambda2) : "NA",
                       format_real(bias.bias), format_real(s.accuracy), detail::format_optional(s.cond_acc_0),
                       detail::format_optional(s.cond_acc_1), detail::format_optional(s.precision),
                       detail::format_optional(s.recall), detail::format_optional(s.auc)});
        rows.push_back({{"variant", detail::describe_variant(variant)},
                        {"bias", bias.bias},
                        {"ensemble_size", bias.ensemble_size},
                        {"ensemble_mean_metrics", to_json(s)}});
    }
    report.tables.push_back(std::move(table));
    report.payload["variants"] = rows;
    report.payload["evaluation_rows"] = split.held_out.rows;
    return report;
}

inline RunReport cmd_risk(const ExperimentConfig& c) {
    RunReport report;
    report.command = Command::Risk;
    report.config = c;
    const Dataset data = load_dataset(c);
    const PreparedSplit split = split_dataset(c, data);
    const TrainResult result = train_model(c, Command::Risk, c.loss, split.train, c.seed_value());
    const auto probs = predict_all(result.model, split.held_out);

    Table table{"risk.csv", {"row", "y_true", "y", "p0", "p1", "risk"}, {}};
    double total = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        LabelConfidence conf;
        if (c.confidence.kind == ConfidenceSource::Kind::Constant) {
            conf = LabelConfidence::from_p1(c.confidence.p1);
        } else {
            const double p1 = split.held_out.auxiliary.at(i);
            if (!(p1 >= 0.0 && p1 <= 1.0))
                throw std::domain_error("confidence column value " + format_real(p1) + " is outside [0, 1]");
            conf = LabelConfidence::from_p1(p1);
        }
        const double r = conditional_risk(probs[i], conf, c.loss);
        total += r;
        table.add_row({std::to_string(i), std::to_string(split.held_out.labels[i]), format_real(probs[i]),
                       format_real(conf.p0), format_real(conf.p1), format_real(r)});
    }
    report.tables.push_back(std::move(table));
    report.payload["evaluation_rows"] = probs.size();
    report.payload["mean_risk"] = total / static_cast<double>(probs.size());
    report.payload["confidence"] = c.confidence.describe();
    return report;
}

inline RunReport run_command(Command command, const ExperimentConfig& c) {
    const auto start = std::chrono::steady_clock::now();
    RunReport report;
    switch (command) {
    case Command::Train: report = cmd_train(c); break;
    case Command::Cv: report = cmd_cv(c); break;
    case Command::Grid: report = cmd_grid(c); break;
    case Command::Boundary: report = cmd_boundary(c); break;
    case Command::LossCurve: report = cmd_loss_curve(c); break;
    case Command::Bias: report = cmd_bias(c); break;
    case Command::Risk: report = cmd_risk(c); break;
    }
    report.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

/// Report document. Everything outside "metadata" is a pure function of the
/// config, so reruns differ only in that block.
inline nlohmann::ordered_json report_json(const RunReport& r) {
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    for (const auto& [k, v] : describe_config(r.config)) config[k] = v;
    nlohmann::ordered_json files = nlohmann::ordered_json::array();
    for (const auto& t : r.tables) files.push_back({{"file", t.file_name}, {"columns", t.columns}, {"rows", t.rows.size()}});
    for (const auto& [name, contents] : r.extra_files) files.push_back({{"file", name}});
    return {
        {"schema", "xmargin-report"},
        {"schema_version", kReportSchemaVersion},
        {"command", to_string(r.command)},
        {"toolkit_version", kToolkitVersion},
        {"config", config},
        {"defaults_in_force", defaults_in_force()},
        {"payload", r.payload},
        {"files", files},
        {"warnings", r.warnings},
        {"metadata", {{"elapsed_seconds", r.elapsed_seconds}}},
    };
}

/// Writes via a temporary file and a rename.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << contents;
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

/// Writes report.json, every table and every extra file into `dir`.
inline std::vector<std::filesystem::path> write_report(const RunReport& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    for (const auto& t : r.tables) {
        write_file_atomic(dir / t.file_name, t.to_csv());
        written.push_back(dir / t.file_name);
    }
    for (const auto& [name, contents] : r.extra_files) {
        write_file_atomic(dir / name, contents);
        written.push_back(dir / name);
    }
    write_file_atomic(dir / "report.json", report_json(r).dump(2) + "\n");
    written.push_back(dir / "report.json");
    return written;
}

} // namespace xmargin
