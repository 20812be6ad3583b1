// Command-line front end: each subcommand wraps one pipeline stage.

#include "uniprice/errors.hpp"
#include "uniprice/pipeline.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

namespace {

struct CliOverrides {
    std::string config_path;
    std::optional<std::string> input;
    std::optional<std::string> input_alt;
    std::optional<std::string> output_dir;
    std::optional<std::uint64_t> seed;
    std::optional<double> level;
    std::optional<std::string> strategy;
    std::optional<std::size_t> folds;
    std::optional<std::string> grid_preset;
};

uniprice::PipelineConfig effective_config(const CliOverrides& o) {
    uniprice::PipelineConfig config;
    if (!o.config_path.empty()) config = uniprice::pipeline_config_from_file(o.config_path);
    if (o.input) config.input = *o.input;
    if (o.input_alt) config.input_alt = *o.input_alt;
    if (o.output_dir) config.output_dir = *o.output_dir;
    if (o.seed) config.seed = *o.seed;
    if (o.level) config.level = *o.level;
    if (o.strategy) config.strategy = uniprice::price_strategy_from_string(*o.strategy);
    if (o.folds) config.folds = *o.folds;
    if (o.grid_preset) config.grid_preset = *o.grid_preset;
    config.validate();
    return config;
}

void print_error_report(const std::string& kind, const std::string& message) {
    nlohmann::json j;
    j["error"] = {{"kind", kind}, {"message", message}};
    std::cerr << j.dump() << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Demand-system estimation toolkit: LA-AIDS fitting, uniform-price FSU "
                 "datasets, measurement-error calibration, inequality and elasticity reports"};
    app.require_subcommand(1);

    CliOverrides o;
    std::map<std::string, std::function<void(const uniprice::PipelineConfig&)>> runners = {
        {"simulate", uniprice::cmd_simulate},
        {"ingest", uniprice::cmd_ingest},
        {"fit", uniprice::cmd_fit},
        {"uniformize", uniprice::cmd_uniformize},
        {"compare-shares", uniprice::cmd_compare_shares},
        {"state-effects", uniprice::cmd_state_effects},
        {"mecor-cv", uniprice::cmd_mecor_cv},
        {"inequality", uniprice::cmd_inequality},
        {"elasticities", uniprice::cmd_elasticities},
    };
    const std::map<std::string, std::string> descriptions = {
        {"simulate", "generate a synthetic survey population from a known model"},
        {"ingest", "parse a raw survey CSV into an estimation-ready dataset"},
        {"fit", "fit the restricted demand system to a dataset"},
        {"uniformize", "replace prices by one representative per FSU"},
        {"compare-shares", "KS and Cramer tests on predicted shares of two datasets"},
        {"state-effects", "estimate per-item state effects from fit residuals"},
        {"mecor-cv", "cross-validated grid search over measurement-error models"},
        {"inequality", "Lorenz curves and Gini comparison per item"},
        {"elasticities", "expenditure/Marshallian/Hicksian elasticity comparison"},
    };

    std::string chosen;
    for (const auto& [name, fn] : runners) {
        auto* sub = app.add_subcommand(name, descriptions.at(name));
        sub->add_option("--config", o.config_path, "JSON config file");
        sub->add_option("--input", o.input, "primary input path");
        sub->add_option("--input-alt", o.input_alt, "second input path (comparison commands)");
        sub->add_option("--output-dir", o.output_dir, "output directory");
        sub->add_option("--seed", o.seed, "master seed");
        sub->add_option("--level", o.level, "significance level");
        sub->add_option("--strategy", o.strategy,
                        "representative price: first-household | median | weighted-median");
        sub->add_option("--folds", o.folds, "cross-validation folds");
        sub->add_option("--grid-preset", o.grid_preset,
                        "calibration grid: expenditure-only | joint-theta");
        sub->callback([&chosen, name = name] { chosen = name; });
    }

    CLI11_PARSE(app, argc, argv);

    try {
        const auto config = effective_config(o);
        runners.at(chosen)(config);
        return 0;
    } catch (const uniprice::ConfigError& e) {
        print_error_report("config", e.what());
        return 2;
    } catch (const uniprice::DataError& e) {
        print_error_report("data", e.what());
        return 3;
    } catch (const std::invalid_argument& e) {
        print_error_report("data", e.what());
        return 3;
    } catch (const uniprice::EstimationError& e) {
        print_error_report("estimation", e.what());
        return 4;
    } catch (const std::exception& e) {
        print_error_report("internal", e.what());
        return 4;
    }
}
