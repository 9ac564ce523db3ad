#pragma once

// Experiment configuration: a flat `key = value` text format. Unknown keys
// and malformed values are collected and reported together.

#include "data.hpp"
#include "loss.hpp"
#include "optimizer.hpp"

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace xmargin {

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> problems)
        : std::runtime_error(join(problems)), problems_(std::move(problems)) {}
    const std::vector<std::string>& problems() const { return problems_; }

private:
    static std::string join(const std::vector<std::string>& problems) {
        std::string out = "invalid configuration:";
        for (const auto& p : problems) out += "\n  - " + p;
        return out;
    }
    std::vector<std::string> problems_;
};

enum class Architecture { Auto, Paper, Boundary };

inline std::string_view to_string(Architecture a) {
    switch (a) {
    case Architecture::Auto: return "auto";
    case Architecture::Paper: return "paper";
    case Architecture::Boundary: return "boundary";
    }
    return "unknown";
}

/// Where per-instance label confidences for `risk` come from.
struct ConfidenceSource {
    enum class Kind { Constant, Column };
    Kind kind = Kind::Constant;
    double p1 = 1.0;         // Constant
    std::size_t column = 0;  // Column: raw CSV column holding P(Y = 1 | x)

    std::string describe() const {
        if (kind == Kind::Constant) {
            std::ostringstream os;
            os.precision(17);
            os << "const:" << p1;
            return os.str();
        }
        return "column:" + std::to_string(column);
    }
};

struct ExperimentConfig {
    // data
    std::string dataset;
    std::optional<std::size_t> label_column;
    std::string default_class;
    bool header = false;
    ScalingMethod scaling = ScalingMethod::MinMax;
    double test_fraction = 0.3;

    // model, loss and optimizer
    Architecture architecture = Architecture::Auto;
    LossParams loss = LossParams::xtreme(1.0, 1.0);
    OptimizerMethod optimizer = OptimizerMethod::RmsProp;
    double alpha = 0.001;
    double decay = 0.9;
    double epsilon_stab = 1e-8;
    std::optional<bool> track_best; // default: on for subgradient descent only
    std::size_t epochs = 100;
    std::size_t batch_size = 16;

    // cross-validation
    std::size_t k = 10;
    std::size_t repeats = 20;
    std::optional<std::uint64_t> seed;

    std::string output_dir = "out";

    // command specific
    std::vector<std::pair<double, double>> lambda_grid;  // grid
    std::pair<std::size_t, std::size_t> features{0, 2};  // boundary
    std::size_t grid_resolution = 50;                     // boundary
    std::size_t curve_samples = 101;                      // loss-curve
    int curve_y_true = 1;                                 // loss-curve
    std::vector<LossParams> variants;                     // bias
    std::size_t ensemble_size = 5;                        // bias
    std::uint64_t ensemble_seed_stride = 1;               // bias; 0 repeats one seed
    ConfidenceSource confidence;                          // risk

    OptimizerConfig optimizer_config() const {
        OptimizerConfig c;
        c.method = optimizer;
        c.alpha = alpha;
        c.decay = decay;
        c.epsilon_stab = epsilon_stab;
        c.track_best = track_best.value_or(optimizer == OptimizerMethod::SubgradientDescent);
        return c;
    }

    CsvSchema csv_schema() const {
        CsvSchema s;
        s.label_column = label_column;
        s.default_class_raw_label = default_class;
        s.header = header;
        if (confidence.kind == ConfidenceSource::Kind::Column) s.auxiliary_column = confidence.column;
        return s;
    }

    std::uint64_t seed_value() const { return seed.value_or(0); }
};

namespace detail {

template <class T>
std::optional<T> parse_integer(std::string_view s) {
    T v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::optional<bool> parse_bool(std::string_view s) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    return std::nullopt;
}

inline std::vector<std::string_view> split_on(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == s.npos ? s.npos : pos - start)));
        if (pos == s.npos) break;
        start = pos + 1;
    }
    return out;
}

/// Shortest text that parses back to the same double.
inline std::string format_real(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

/// "xm:1:50", "bce", "hinge"
inline LossParams parse_variant(std::string_view spec) {
    const auto parts = split_on(spec, ':');
    const LossFamily family = parse_loss_family(parts[0]);
    if (family != LossFamily::XtremeMargin) {
        if (parts.size() != 1) throw std::invalid_argument("baseline loss takes no lambdas");
        return family == LossFamily::BinaryCrossEntropy ? LossParams::bce() : LossParams::hinge();
    }
    if (parts.size() != 3) throw std::invalid_argument("expected xm:<lambda1>:<lambda2>");
    const auto l1 = parse_real(parts[1]);
    const auto l2 = parse_real(parts[2]);
    if (!l1 || !l2) throw std::invalid_argument("bad lambda in variant");
    LossParams p = LossParams::xtreme(*l1, *l2);
    p.validate();
    return p;
}

inline std::string describe_variant(const LossParams& p) {
    if (p.family != LossFamily::XtremeMargin) return std::string(to_string(p.family));
    return "xm:" + format_real(p.lambda1) + ":" + format_real(p.lambda2);
}

} // namespace detail

/// Config keys accepted in files and overrides, in echo order.
inline const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = {
        "dataset",      "label_column", "default_class",  "header",          "scaling",
        "test_fraction", "architecture", "loss",          "lambda1",         "lambda2",
        "optimizer",    "alpha",        "decay",          "epsilon_stab",    "track_best",
        "epochs",       "batch_size",   "k",              "repeats",         "seed",
        "output_dir",   "lambda_grid",  "features",       "grid_resolution", "curve_samples",
        "curve_y_true", "variants",     "ensemble_size",  "ensemble_seed_stride", "confidence",
    };
    return keys;
}

/// Applies one key/value pair; returns an error message or nothing.
/// `base_dir` resolves a relative dataset path.
inline std::optional<std::string> apply_config_value(ExperimentConfig& c, std::string_view key, std::string_view value,
                                                     const std::filesystem::path& base_dir) {
    auto bad = [&](const std::string& why) {
        return std::optional<std::string>("'" + std::string(key) + "': " + why + " (got '" + std::string(value) + "')");
    };
    auto real = [&](double& dst) -> std::optional<std::string> {
        const auto v = detail::parse_real(value);
        if (!v) return bad("expected a finite real");
        dst = *v;
        return std::nullopt;
    };
    auto count = [&](std::size_t& dst) -> std::optional<std::string> {
        const auto v = detail::parse_integer<std::size_t>(value);
        if (!v) return bad("expected a non-negative integer");
        dst = *v;
        return std::nullopt;
    };

    try {
        if (key == "dataset") {
            std::filesystem::path p{std::string(value)};
            if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
            c.dataset = p.lexically_normal().string();
        } else if (key == "label_column") {
            if (value == "last") {
                c.label_column.reset();
            } else {
                std::size_t v = 0;
                if (auto e = count(v)) return e;
                c.label_column = v;
            }
        } else if (key == "default_class") {
            c.default_class = std::string(value);
        } else if (key == "header") {
            const auto b = detail::parse_bool(value);
            if (!b) return bad("expected true or false");
            c.header = *b;
        } else if (key == "scaling") {
            c.scaling = parse_scaling(value);
        } else if (key == "test_fraction") {
            return real(c.test_fraction);
        } else if (key == "architecture") {
            if (value == "auto") c.architecture = Architecture::Auto;
            else if (value == "paper") c.architecture = Architecture::Paper;
            else if (value == "boundary") c.architecture = Architecture::Boundary;
            else return bad("expected auto, paper or boundary");
        } else if (key == "loss") {
            c.loss.family = parse_loss_family(value);
        } else if (key == "lambda1") {
            return real(c.loss.lambda1);
        } else if (key == "lambda2") {
            return real(c.loss.lambda2);
        } else if (key == "optimizer") {
            c.optimizer = parse_optimizer(value);
        } else if (key == "alpha") {
            return real(c.alpha);
        } else if (key == "decay") {
            return real(c.decay);
        } else if (key == "epsilon_stab") {
            return real(c.epsilon_stab);
        } else if (key == "track_best") {
            if (value == "auto") {
                c.track_best.reset();
            } else {
                const auto b = detail::parse_bool(value);
                if (!b) return bad("expected true, false or auto");
                c.track_best = *b;
            }
        } else if (key == "epochs") {
            return count(c.epochs);
        } else if (key == "batch_size") {
            return count(c.batch_size);
        } else if (key == "k") {
            return count(c.k);
        } else if (key == "repeats") {
            return count(c.repeats);
        } else if (key == "seed") {
            const auto v = detail::parse_integer<std::uint64_t>(value);
            if (!v) return bad("expected an unsigned integer");
            c.seed = *v;
        } else if (key == "output_dir") {
            c.output_dir = std::string(value);
        } else if (key == "lambda_grid") {
            // "1:1, 10:10" or "1, 10" (diagonal)
            c.lambda_grid.clear();
            for (auto cell : detail::split_on(value, ',')) {
                const auto parts = detail::split_on(cell, ':');
                const auto l1 = detail::parse_real(parts[0]);
                const auto l2 = parts.size() == 2 ? detail::parse_real(parts[1]) : l1;
                if (parts.size() > 2 || !l1 || !l2) return bad("expected comma-separated lambda or lambda1:lambda2 cells");
                c.lambda_grid.emplace_back(*l1, *l2);
            }
        } else if (key == "features") {
            const auto parts = detail::split_on(value, ',');
            if (parts.size() != 2) return bad("expected two comma-separated feature indices");
            const auto a = detail::parse_integer<std::size_t>(parts[0]);
            const auto b = detail::parse_integer<std::size_t>(parts[1]);
            if (!a || !b) return bad("expected two comma-separated feature indices");
            c.features = {*a, *b};
        } else if (key == "grid_resolution") {
            return count(c.grid_resolution);
        } else if (key == "curve_samples") {
            return count(c.curve_samples);
        } else if (key == "curve_y_true") {
            const auto v = detail::parse_integer<int>(value);
            if (!v || (*v != 0 && *v != 1)) return bad("expected 0 or 1");
            c.curve_y_true = *v;
        } else if (key == "variants") {
            c.variants.clear();
            for (auto spec : detail::split_on(value, ',')) c.variants.push_back(detail::parse_variant(spec));
        } else if (key == "ensemble_size") {
            return count(c.ensemble_size);
        } else if (key == "ensemble_seed_stride") {
            const auto v = detail::parse_integer<std::uint64_t>(value);
            if (!v) return bad("expected an unsigned integer");
            c.ensemble_seed_stride = *v;
        } else if (key == "confidence") {
            const auto parts = detail::split_on(value, ':');
            if (parts.size() != 2) return bad("expected const:<p1> or column:<index>");
            if (parts[0] == "const") {
                const auto p1 = detail::parse_real(parts[1]);
                if (!p1 || *p1 < 0.0 || *p1 > 1.0) return bad("constant confidence must lie in [0, 1]");
                c.confidence = {ConfidenceSource::Kind::Constant, *p1, 0};
            } else if (parts[0] == "column") {
                const auto col = detail::parse_integer<std::size_t>(parts[1]);
                if (!col) return bad("expected a column index");
                c.confidence = {ConfidenceSource::Kind::Column, 0.0, *col};
            } else {
                return bad("expected const:<p1> or column:<index>");
            }
        } else {
            return std::optional<std::string>("unknown key '" + std::string(key) + "'");
        }
    } catch (const std::exception& e) {
        return bad(e.what());
    }
    return std::nullopt;
}

/// Parses `key = value` lines; '#' starts a comment. Errors accumulate in `problems`.
inline void parse_config_text(ExperimentConfig& c, std::istream& in, const std::filesystem::path& base_dir,
                              std::vector<std::string>& problems, const std::string& source = "<config>") {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto text = detail::trim(line);
        if (text.empty()) continue;
        const auto eq = text.find('=');
        if (eq == std::string_view::npos) {
            problems.push_back(source + ":" + std::to_string(line_no) + ": expected key = value");
            continue;
        }
        const auto key = detail::trim(text.substr(0, eq));
        const auto value = detail::trim(text.substr(eq + 1));
        if (auto err = apply_config_value(c, key, value, base_dir))
            problems.push_back(source + ":" + std::to_string(line_no) + ": " + *err);
    }
}

inline void apply_override(ExperimentConfig& c, std::string_view assignment, std::vector<std::string>& problems) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) {
        problems.push_back("override '" + std::string(assignment) + "': expected key=value");
        return;
    }
    if (auto err = apply_config_value(c, detail::trim(assignment.substr(0, eq)), detail::trim(assignment.substr(eq + 1)),
                                      std::filesystem::current_path()))
        problems.push_back("override: " + *err);
}

enum class Command { Train, Cv, Grid, Boundary, LossCurve, Bias, Risk };

inline std::string_view to_string(Command c) {
    switch (c) {
    case Command::Train: return "train";
    case Command::Cv: return "cv";
    case Command::Grid: return "grid";
    case Command::Boundary: return "boundary";
    case Command::LossCurve: return "loss-curve";
    case Command::Bias: return "bias";
    case Command::Risk: return "risk";
    }
    return "unknown";
}

inline std::optional<Command> parse_command(std::string_view name) {
    for (Command c : {Command::Train, Command::Cv, Command::Grid, Command::Boundary, Command::LossCurve, Command::Bias,
                      Command::Risk})
        if (to_string(c) == name) return c;
    return std::nullopt;
}

/// Semantic checks for one command; appends every problem found.
inline void validate_config(const ExperimentConfig& c, Command command, std::vector<std::string>& problems) {
    if (!c.seed) problems.push_back("'seed' is required");
    try {
        c.loss.validate();
    } catch (const std::exception& e) {
        problems.push_back(std::string("loss: ") + e.what());
    }
    if (command == Command::LossCurve) {
        if (c.curve_samples < 2) problems.push_back("'curve_samples' must be at least 2");
        return;
    }
    if (c.dataset.empty())
        problems.push_back("'dataset' is required");
    else if (!std::filesystem::is_regular_file(c.dataset))
        problems.push_back("dataset file '" + c.dataset + "' does not exist");
    if (c.default_class.empty()) problems.push_back("'default_class' is required");
    try {
        c.optimizer_config().validate();
    } catch (const std::exception& e) {
        problems.push_back(std::string("optimizer: ") + e.what());
    }
    if (c.epochs < 1) problems.push_back("'epochs' must be at least 1");
    if (c.batch_size < 1) problems.push_back("'batch_size' must be at least 1");
    if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0)) problems.push_back("'test_fraction' must lie in (0, 1)");
    if (command == Command::Cv || command == Command::Grid) {
        if (c.k < 2) problems.push_back("'k' must be at least 2");
        if (c.repeats < 1) problems.push_back("'repeats' must be at least 1");
    }
    if (command == Command::Grid && c.lambda_grid.empty()) problems.push_back("'lambda_grid' must not be empty");
    if (command == Command::Grid)
        for (const auto& [l1, l2] : c.lambda_grid)
            if (l1 < 0.0 || l2 < 0.0) problems.push_back("'lambda_grid' cells must be non-negative");
    if (command == Command::Boundary) {
        if (c.features.first == c.features.second) problems.push_back("'features' must name two distinct features");
        if (c.grid_resolution < 2) problems.push_back("'grid_resolution' must be at least 2");
    }
    if (command == Command::Bias) {
        if (c.ensemble_size < 2) problems.push_back("'ensemble_size' must be at least 2");
        if (c.variants.empty()) problems.push_back("'variants' must not be empty");
    }
}

inline ExperimentConfig load_config(const std::string& path, std::span<const std::string> overrides, Command command) {
    std::vector<std::string> problems;
    ExperimentConfig c;
    std::ifstream in(path);
    if (!in) throw ConfigError({"cannot open config file '" + path + "'"});
    parse_config_text(c, in, std::filesystem::path(path).parent_path(), problems, path);
    for (const auto& o : overrides) apply_override(c, o, problems);
    validate_config(c, command, problems);
    if (!problems.empty()) throw ConfigError(std::move(problems));
    return c;
}

/// Effective configuration as key -> text, every default included.
inline std::vector<std::pair<std::string, std::string>> describe_config(const ExperimentConfig& c) {
    using detail::format_real;
    std::vector<std::pair<std::string, std::string>> out;
    auto add = [&out](std::string k, std::string v) { out.emplace_back(std::move(k), std::move(v)); };
    add("dataset", c.dataset);
    add("label_column", c.label_column ? std::to_string(*c.label_column) : "last");
    add("default_class", c.default_class);
    add("header", c.header ? "true" : "false");
    add("scaling", std::string(to_string(c.scaling)));
    add("test_fraction", format_real(c.test_fraction));
    add("architecture", std::string(to_string(c.architecture)));
    add("loss", std::string(to_string(c.loss.family)));
    add("lambda1", format_real(c.loss.lambda1));
    add("lambda2", format_real(c.loss.lambda2));
    add("optimizer", std::string(to_string(c.optimizer)));
    add("alpha", format_real(c.alpha));
    add("decay", format_real(c.decay));
    add("epsilon_stab", format_real(c.epsilon_stab));
    add("track_best", c.optimizer_config().track_best ? "true" : "false");
    add("epochs", std::to_string(c.epochs));
    add("batch_size", std::to_string(c.batch_size));
    add("k", std::to_string(c.k));
    add("repeats", std::to_string(c.repeats));
    add("seed", c.seed ? std::to_string(*c.seed) : "");
    add("output_dir", c.output_dir);
    std::string grid;
    for (const auto& [l1, l2] : c.lambda_grid) grid += (grid.empty() ? "" : ",") + format_real(l1) + ":" + format_real(l2);
    add("lambda_grid", grid);
    add("features", std::to_string(c.features.first) + "," + std::to_string(c.features.second));
    add("grid_resolution", std::to_string(c.grid_resolution));
    add("curve_samples", std::to_string(c.curve_samples));
    add("curve_y_true", std::to_string(c.curve_y_true));
    std::string variants;
    for (const auto& v : c.variants) variants += (variants.empty() ? "" : ",") + detail::describe_variant(v);
    add("variants", variants);
    add("ensemble_size", std::to_string(c.ensemble_size));
    add("ensemble_seed_stride", std::to_string(c.ensemble_seed_stride));
    add("confidence", c.confidence.describe());
    return out;
}

} // namespace xmargin
