#pragma once

// Dataset ingestion, feature scaling, stratified splitting and repeated
// stratified cross-validation.

#include "parallel.hpp"
#include "random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace xmargin {

enum class ScalingMethod { None, MinMax, ZScore };

inline std::string_view to_string(ScalingMethod m) {
    switch (m) {
    case ScalingMethod::None: return "none";
    case ScalingMethod::MinMax: return "minmax";
    case ScalingMethod::ZScore: return "zscore";
    }
    return "unknown";
}

inline ScalingMethod parse_scaling(std::string_view name) {
    if (name == "none") return ScalingMethod::None;
    if (name == "minmax") return ScalingMethod::MinMax;
    if (name == "zscore") return ScalingMethod::ZScore;
    throw std::invalid_argument("unknown scaling method '" + std::string(name) + "'");
}

/// Fitted per-feature statistics; a value maps to (x - offset) / scale, and
/// features with scale 0 map to 0.
struct ScalingStats {
    ScalingMethod method = ScalingMethod::None;
    std::vector<double> offset;
    std::vector<double> scale;

    double apply(std::size_t feature, double x) const {
        if (method == ScalingMethod::None) return x;
        const double s = scale[feature];
        return s == 0.0 ? 0.0 : (x - offset[feature]) / s;
    }
};

struct Dataset {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> features; // rows x cols, row-major
    std::vector<int> labels;      // 1 = default class
    std::string default_class_raw_label;
    std::string other_class_raw_label;
    std::vector<std::string> feature_names;
    std::vector<double> auxiliary; // optional side column, one value per row
    ScalingStats scaling;

    std::span<const double> row(std::size_t i) const { return {features.data() + i * cols, cols}; }
    double at(std::size_t i, std::size_t j) const { return features[i * cols + j]; }

    std::size_t count(int label) const {
        return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
    }

    void validate() const {
        if (features.size() != rows * cols || labels.size() != rows)
            throw std::invalid_argument("dataset storage does not match its shape");
        if (!auxiliary.empty() && auxiliary.size() != rows)
            throw std::invalid_argument("auxiliary column does not match row count");
        for (int l : labels)
            if (l != 0 && l != 1) throw std::invalid_argument("labels must be 0 or 1");
        for (double v : features)
            if (!std::isfinite(v)) throw std::invalid_argument("non-finite feature value");
    }

    /// Rows in the given order.
    Dataset subset(std::span<const std::size_t> indices) const {
        Dataset out = with_metadata();
        out.rows = indices.size();
        out.cols = cols;
        out.features.reserve(indices.size() * cols);
        out.labels.reserve(indices.size());
        for (std::size_t i : indices) {
            if (i >= rows) throw std::out_of_range("row index out of range");
            auto r = row(i);
            out.features.insert(out.features.end(), r.begin(), r.end());
            out.labels.push_back(labels[i]);
            if (!auxiliary.empty()) out.auxiliary.push_back(auxiliary[i]);
        }
        return out;
    }

    /// Keeps only the given feature columns, in the given order.
    Dataset select_features(std::span<const std::size_t> columns) const {
        Dataset out = with_metadata();
        out.rows = rows;
        out.cols = columns.size();
        out.labels = labels;
        out.auxiliary = auxiliary;
        out.feature_names.clear();
        for (std::size_t c : columns) {
            if (c >= cols) throw std::out_of_range("feature index " + std::to_string(c) + " out of range");
            if (c < feature_names.size()) out.feature_names.push_back(feature_names[c]);
        }
        out.features.reserve(rows * columns.size());
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t c : columns) out.features.push_back(at(i, c));
        return out;
    }

private:
    Dataset with_metadata() const {
        Dataset out;
        out.default_class_raw_label = default_class_raw_label;
        out.other_class_raw_label = other_class_raw_label;
        out.feature_names = feature_names;
        out.scaling = scaling;
        return out;
    }
};

class IngestionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CsvSchema {
    std::optional<std::size_t> label_column; // nullopt: last column
    std::string default_class_raw_label;     // raw label mapped to 1
    bool header = false;
    std::optional<std::size_t> auxiliary_column; // parsed as reals, excluded from features
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return cells;
}

inline std::optional<double> parse_real(std::string_view cell) {
    if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

} // namespace detail

/// Parses comma-separated text. Blank lines are skipped; the row numbers in
/// error messages are 1-based physical line numbers.
inline Dataset parse_csv(std::istream& in, const CsvSchema& schema, const std::string& source = "<input>") {
    auto fail = [&source](std::size_t line, std::optional<std::size_t> column, const std::string& what) {
        std::string where = source + ": row " + std::to_string(line);
        if (column) where += ", column " + std::to_string(*column);
        throw IngestionError(where + ": " + what);
    };

    Dataset data;
    std::vector<std::string> raw_labels_seen;
    std::vector<std::string> row_labels;
    std::size_t width = 0;
    std::size_t label_col = 0;
    std::string line;
    std::size_t line_no = 0;
    bool header_pending = schema.header;

    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split_commas(line);
        if (width == 0) {
            width = cells.size();
            if (width < 2) fail(line_no, std::nullopt, "need at least one feature column and a label column");
            label_col = schema.label_column.value_or(width - 1);
            if (label_col >= width)
                fail(line_no, std::nullopt, "label column " + std::to_string(label_col) + " is missing");
            if (schema.auxiliary_column && (*schema.auxiliary_column >= width || *schema.auxiliary_column == label_col))
                fail(line_no, std::nullopt, "auxiliary column is missing or collides with the label column");
        } else if (cells.size() != width) {
            fail(line_no, std::nullopt,
                 "expected " + std::to_string(width) + " cells, found " + std::to_string(cells.size()));
        }
        if (header_pending) {
            header_pending = false;
            for (std::size_t c = 0; c < width; ++c)
                if (c != label_col && (!schema.auxiliary_column || c != *schema.auxiliary_column))
                    data.feature_names.emplace_back(cells[c]);
            continue;
        }
        for (std::size_t c = 0; c < width; ++c) {
            if (c == label_col) continue;
            const auto v = detail::parse_real(cells[c]);
            if (!v) fail(line_no, c, "cannot parse '" + std::string(cells[c]) + "' as a finite real");
            if (schema.auxiliary_column && c == *schema.auxiliary_column)
                data.auxiliary.push_back(*v);
            else
                data.features.push_back(*v);
        }
        const std::string label(cells[label_col]);
        if (label.empty()) fail(line_no, label_col, "empty label");
        if (std::find(raw_labels_seen.begin(), raw_labels_seen.end(), label) == raw_labels_seen.end()) {
            raw_labels_seen.push_back(label);
            if (raw_labels_seen.size() > 2) fail(line_no, label_col, "more than two classes");
        }
        row_labels.push_back(label);
        ++data.rows;
    }

    if (data.rows == 0) throw IngestionError(source + ": empty file");
    if (raw_labels_seen.size() < 2) throw IngestionError(source + ": only one class present");
    const auto& def = schema.default_class_raw_label;
    if (def != raw_labels_seen[0] && def != raw_labels_seen[1])
        throw IngestionError(source + ": default class label '" + def + "' does not occur in the label column");

    data.cols = width - 1 - (schema.auxiliary_column ? 1 : 0);
    data.default_class_raw_label = def;
    data.other_class_raw_label = def == raw_labels_seen[0] ? raw_labels_seen[1] : raw_labels_seen[0];
    data.labels.reserve(data.rows);
    for (const auto& l : row_labels) data.labels.push_back(l == def ? 1 : 0);
    if (data.feature_names.empty())
        for (std::size_t c = 0; c < data.cols; ++c) data.feature_names.push_back("f" + std::to_string(c));
    data.validate();
    return data;
}

inline Dataset load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw IngestionError(path + ": cannot open file");
    return parse_csv(in, schema, path);
}

/// Fits statistics on the `fit_on` rows only.
inline ScalingStats fit_scaling(const Dataset& data, ScalingMethod method, std::span<const std::size_t> fit_on) {
    if (fit_on.empty()) throw std::invalid_argument("scaling needs at least one row to fit on");
    ScalingStats stats;
    stats.method = method;
    if (method == ScalingMethod::None) return stats;
    stats.offset.assign(data.cols, 0.0);
    stats.scale.assign(data.cols, 0.0);
    const double n = static_cast<double>(fit_on.size());
    for (std::size_t j = 0; j < data.cols; ++j) {
        if (method == ScalingMethod::MinMax) {
            double lo = data.at(fit_on[0], j), hi = lo;
            for (std::size_t i : fit_on) {
                lo = std::min(lo, data.at(i, j));
                hi = std::max(hi, data.at(i, j));
            }
            stats.offset[j] = lo;
            stats.scale[j] = hi - lo; // constant feature: 0, maps to 0
        } else {
            double mean = 0.0;
            for (std::size_t i : fit_on) mean += data.at(i, j);
            mean /= n;
            double var = 0.0;
            for (std::size_t i : fit_on) var += (data.at(i, j) - mean) * (data.at(i, j) - mean);
            stats.offset[j] = mean;
            stats.scale[j] = std::max(std::sqrt(var / n), 1e-12);
        }
    }
    return stats;
}

inline Dataset apply_scaling(const Dataset& data, const ScalingStats& stats) {
    Dataset out = data;
    out.scaling = stats;
    if (stats.method == ScalingMethod::None) return out;
    for (std::size_t i = 0; i < data.rows; ++i)
        for (std::size_t j = 0; j < data.cols; ++j) out.features[i * data.cols + j] = stats.apply(j, data.at(i, j));
    return out;
}

/// Fits on `fit_on` and transforms every row with the fitted statistics.
inline Dataset scale_features(const Dataset& data, ScalingMethod method, std::span<const std::size_t> fit_on) {
    return apply_scaling(data, fit_scaling(data, method, fit_on));
}

struct FoldPlan {
    std::size_t k = 0;
    std::uint64_t seed = 0;
    std::vector<std::size_t> assignments; // fold index per instance

    std::vector<std::size_t> fold_indices(std::size_t fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < assignments.size(); ++i)
            if (assignments[i] == fold) out.push_back(i);
        return out;
    }

    std::vector<std::size_t> train_indices(std::size_t fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < assignments.size(); ++i)
            if (assignments[i] != fold) out.push_back(i);
        return out;
    }

    friend bool operator==(const FoldPlan&, const FoldPlan&) = default;
};

namespace detail {

inline std::vector<std::size_t> indices_of(const Dataset& data, int label) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < data.rows; ++i)
        if (data.labels[i] == label) out.push_back(i);
    return out;
}

} // namespace detail

/// Each class is shuffled and dealt round-robin over the folds, the second
/// class continuing where the first stopped, so per-fold class counts are
/// within one of proportional and fold sizes within one of each other.
inline FoldPlan stratified_kfold(const Dataset& data, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("stratified k-fold needs k >= 2");
    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    plan.assignments.assign(data.rows, 0);
    Rng rng(seed);
    std::size_t next_fold = 0;
    for (int label : {0, 1}) {
        auto members = detail::indices_of(data, label);
        if (members.size() < k)
            throw std::invalid_argument("class " + std::to_string(label) + " has " + std::to_string(members.size()) +
                                        " members, fewer than k = " + std::to_string(k));
        shuffle(std::span<std::size_t>(members), rng);
        for (std::size_t i : members) {
            plan.assignments[i] = next_fold;
            next_fold = (next_fold + 1) % k;
        }
    }
    return plan;
}

struct TrainTestSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Stratified hold-out: round(n_c * test_fraction) members of each class go
/// to the test side, clamped so both sides keep at least one per class.
inline TrainTestSplit stratified_split(const Dataset& data, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw std::invalid_argument("test_fraction must lie in (0, 1)");
    TrainTestSplit split;
    Rng rng(seed);
    for (int label : {0, 1}) {
        auto members = detail::indices_of(data, label);
        if (members.size() < 2)
            throw std::invalid_argument("class " + std::to_string(label) + " needs at least two members to split");
        shuffle(std::span<std::size_t>(members), rng);
        auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(members.size())));
        n_test = std::clamp<std::size_t>(n_test, 1, members.size() - 1);
        split.test.insert(split.test.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_test));
        split.train.insert(split.train.end(), members.begin() + static_cast<std::ptrdiff_t>(n_test), members.end());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

struct PreparedSplit {
    Dataset train;
    Dataset held_out;
};

/// Fits scaling on the training rows only and applies it to both sides.
inline PreparedSplit prepare_split(const Dataset& data, std::span<const std::size_t> train_rows,
                                   std::span<const std::size_t> held_out_rows, ScalingMethod scaling) {
    const ScalingStats stats = fit_scaling(data, scaling, train_rows);
    return {apply_scaling(data.subset(train_rows), stats), apply_scaling(data.subset(held_out_rows), stats)};
}

struct MeanStd {
    double mean = 0.0;
    double stddev = 0.0;
};

/// Mean and population standard deviation.
inline MeanStd mean_std(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("mean of an empty set");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    return {mean, std::sqrt(var / static_cast<double>(values.size()))};
}

struct Envelope {
    double min = 0.0;
    double max = 0.0;
};

struct CvRepeat {
    std::uint64_t seed = 0;
    std::vector<double> fold_scores;
    double mean = 0.0;
    double stddev = 0.0; // population form
};

struct CvReport {
    std::size_t k = 0;
    std::size_t repeats = 0;
    std::uint64_t seed = 0;
    ScalingMethod scaling = ScalingMethod::None;
    std::vector<CvRepeat> per_repeat;
    Envelope mean_envelope;
    Envelope std_envelope;
};

struct CvOptions {
    std::size_t k = 10;
    std::size_t repeats = 20;
    std::uint64_t seed = 0;
    ScalingMethod scaling = ScalingMethod::MinMax;
    std::size_t threads = 1;
};

class CvCellError : public std::runtime_error {
public:
    CvCellError(std::size_t repeat, std::size_t fold, const std::string& what)
        : std::runtime_error("repeat " + std::to_string(repeat) + ", fold " + std::to_string(fold) + ": " + what),
          repeat_(repeat), fold_(fold) {}
    std::size_t repeat() const { return repeat_; }
    std::size_t fold() const { return fold_; }

private:
    std::size_t repeat_;
    std::size_t fold_;
};

/// Fold plan seed for repeat r.
inline std::uint64_t repeat_seed(std::uint64_t seed, std::size_t repeat) { return seed ^ repeat; }

/// Training seed for one (repeat, fold) cell.
inline std::uint64_t cell_seed(std::uint64_t seed, std::size_t repeat, std::size_t fold) {
    return derive_seed(seed, repeat + 1, fold + 1);
}

/// Repeated stratified k-fold cross-validation.
///
/// `train_fn(const Dataset& train, std::uint64_t seed) -> Model` and
/// `metric_fn(const Model&, const Dataset& held_out) -> double`. Scaling is
/// fitted on each training split. Cells may run on several threads; the
/// report is identical to a sequential run.
template <class TrainFn, class MetricFn>
CvReport repeated_cv(const Dataset& data, const CvOptions& options, TrainFn&& train_fn, MetricFn&& metric_fn) {
    if (options.repeats < 1) throw std::invalid_argument("repeated_cv needs at least one repeat");
    std::vector<FoldPlan> plans;
    plans.reserve(options.repeats);
    for (std::size_t r = 0; r < options.repeats; ++r)
        plans.push_back(stratified_kfold(data, options.k, repeat_seed(options.seed, r)));

    const std::size_t cells = options.repeats * options.k;
    std::vector<double> scores(cells, 0.0);
    parallel_for(cells, options.threads, [&](std::size_t cell) {
        const std::size_t r = cell / options.k;
        const std::size_t f = cell % options.k;
        try {
            const auto train_rows = plans[r].train_indices(f);
            const auto held_rows = plans[r].fold_indices(f);
            const PreparedSplit split = prepare_split(data, train_rows, held_rows, options.scaling);
            const auto model = train_fn(split.train, cell_seed(options.seed, r, f));
            scores[cell] = metric_fn(model, split.held_out);
        } catch (const CvCellError&) {
            throw;
        } catch (const std::exception& e) {
            throw CvCellError(r, f, e.what());
        }
    });

    CvReport report;
    report.k = options.k;
    report.repeats = options.repeats;
    report.seed = options.seed;
    report.scaling = options.scaling;
    for (std::size_t r = 0; r < options.repeats; ++r) {
        CvRepeat rep;
        rep.seed = plans[r].seed;
        rep.fold_scores.assign(scores.begin() + static_cast<std::ptrdiff_t>(r * options.k),
                               scores.begin() + static_cast<std::ptrdiff_t>((r + 1) * options.k));
        const MeanStd ms = mean_std(rep.fold_scores);
        rep.mean = ms.mean;
        rep.stddev = ms.stddev;
        report.per_repeat.push_back(std::move(rep));
    }
    auto [mn, mx] = std::minmax_element(report.per_repeat.begin(), report.per_repeat.end(),
                                        [](const CvRepeat& a, const CvRepeat& b) { return a.mean < b.mean; });
    report.mean_envelope = {mn->mean, mx->mean};
    auto [sn, sx] = std::minmax_element(report.per_repeat.begin(), report.per_repeat.end(),
                                        [](const CvRepeat& a, const CvRepeat& b) { return a.stddev < b.stddev; });
    report.std_envelope = {sn->stddev, sx->stddev};
    return report;
}

} // namespace xmargin
