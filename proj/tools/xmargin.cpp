#include "xmargin/experiment.hpp"

#include "CLI11.hpp"

#include <iostream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Xtreme Margin loss experiments"};
    app.set_version_flag("--version", std::string(xmargin::kToolkitVersion));
    app.require_subcommand(1, 1);

    std::string config_path;
    std::vector<std::string> overrides;
    const char* names[] = {"train", "cv", "grid", "boundary", "loss-curve", "bias", "risk"};
    const char* blurbs[] = {
        "train on a stratified split and export per-epoch curves",
        "repeated stratified k-fold cross-validation",
        "cross-validated grid search over (lambda1, lambda2)",
        "decision-boundary grid for two features",
        "loss value versus predicted probability",
        "ensemble bias per loss variant",
        "per-instance conditional risk under label uncertainty",
    };
    for (std::size_t i = 0; i < std::size(names); ++i) {
        auto* sub = app.add_subcommand(names[i], blurbs[i]);
        sub->add_option("--config", config_path, "config file (key = value lines)")->required();
        sub->add_option("--override", overrides, "key=value, applied after the config file");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    const auto command = xmargin::parse_command(app.get_subcommands().front()->get_name());
    xmargin::ExperimentConfig config;
    try {
        config = xmargin::load_config(config_path, overrides, *command);
    } catch (const xmargin::ConfigError& e) {
        std::cerr << "xmargin: " << e.what() << '\n';
        return kExitValidation;
    }

    try {
        const auto report = xmargin::run_command(*command, config);
        for (const auto& w : report.warnings) std::cerr << "xmargin: warning: " << w << '\n';
        for (const auto& path : xmargin::write_report(report, config.output_dir)) std::cout << path.string() << '\n';
    } catch (const std::exception& e) {
        std::cerr << "xmargin: " << to_string(*command) << " failed: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}
