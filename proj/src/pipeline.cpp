#include "uniprice/pipeline.hpp"

#include "uniprice/dist_tests.hpp"
#include "uniprice/elasticities.hpp"
#include "uniprice/errors.hpp"
#include "uniprice/inequality.hpp"
#include "uniprice/synthetic.hpp"
#include "internal_util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace uniprice {

namespace fs = std::filesystem;
using nlohmann::json;

void PipelineConfig::validate() const {
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("level must lie in (0,1)");
    if (folds < 2) throw ConfigError("folds must be at least 2");
    if (output_dir.empty()) throw ConfigError("output_dir must be set");
}

std::string PipelineConfig::canonical_json() const {
    json j;
    j["input"] = input;
    j["input_alt"] = input_alt;
    j["output_dir"] = output_dir;
    j["items"] = items;
    j["strategy"] = to_string(strategy);
    j["level"] = level;
    j["folds"] = folds;
    j["seed"] = seed;
    j["grid_preset"] = grid_preset;
    json grid = json::array();
    for (const auto& s : explicit_grid)
        grid.push_back({{"theta0", s.theta0},
                        {"theta1", s.theta1},
                        {"theta2", s.theta2},
                        {"theta3", s.theta3},
                        {"mode", to_string(s.mode)}});
    j["grid"] = grid;
    j["share_basis"] = to_string(share_basis);
    j["weighted"] = weighted;
    j["cramer_permutations"] = cramer_permutations;
    j["cramer_max_rows"] = cramer_max_rows;
    j["synthetic"] = synthetic_json;
    return j.dump();
}

std::string PipelineConfig::config_hash() const {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(detail::fnv1a64(canonical_json())));
    return std::string(buf);
}

namespace {

CalibrationSpec spec_from_json(const json& e) {
    CalibrationSpec s;
    s.theta0 = e.value("theta0", 0.0);
    s.theta1 = e.value("theta1", 1.0);
    s.theta2 = e.value("theta2", 0.0);
    s.theta3 = e.value("theta3", 1.0);
    const std::string mode = e.value("mode", std::string());
    if (mode.empty())
        s.mode = (s.theta2 != 0.0 || s.theta3 != 1.0) ? CalibrationMode::ExpenditureAndPrices
                                                      : CalibrationMode::ExpenditureOnly;
    else if (mode == "expenditure-only")
        s.mode = CalibrationMode::ExpenditureOnly;
    else if (mode == "expenditure-and-prices")
        s.mode = CalibrationMode::ExpenditureAndPrices;
    else
        throw ConfigError("unknown calibration mode: '" + mode + "'");
    return s;
}

PipelineConfig config_from_json(const json& j) {
    PipelineConfig c;
    c.input = j.value("input", c.input);
    c.input_alt = j.value("input_alt", c.input_alt);
    c.output_dir = j.value("output_dir", c.output_dir);
    if (j.contains("items")) c.items = j["items"].get<std::vector<std::string>>();
    if (j.contains("strategy")) c.strategy = price_strategy_from_string(j["strategy"].get<std::string>());
    c.level = j.value("level", c.level);
    c.folds = j.value("folds", c.folds);
    c.seed = j.value("seed", c.seed);
    c.grid_preset = j.value("grid_preset", c.grid_preset);
    if (j.contains("grid"))
        for (const auto& e : j["grid"]) c.explicit_grid.push_back(spec_from_json(e));
    if (j.contains("share_basis"))
        c.share_basis = share_basis_from_string(j["share_basis"].get<std::string>());
    c.weighted = j.value("weighted", c.weighted);
    c.cramer_permutations = j.value("cramer_permutations", c.cramer_permutations);
    c.cramer_max_rows = j.value("cramer_max_rows", c.cramer_max_rows);
    if (j.contains("column_mapping_file")) {
        c.mapping = column_mapping_from_json_file(j["column_mapping_file"].get<std::string>());
        c.has_mapping = true;
    } else if (!c.items.empty()) {
        c.mapping = ColumnMapping::canonical(c.items);
        c.has_mapping = true;
    }
    if (j.contains("synthetic")) c.synthetic_json = j["synthetic"].dump();
    c.validate();
    return c;
}

// Outputs are staged under a ".partial" suffix and renamed on success only.
class StagedOutputs {
  public:
    explicit StagedOutputs(const fs::path& dir) : dir_(dir) { fs::create_directories(dir_); }

    std::string stage(const std::string& final_name) {
        fs::path partial = dir_ / (final_name + ".partial");
        staged_.emplace_back(partial, dir_ / final_name);
        return partial.string();
    }

    std::vector<std::string> commit() {
        std::vector<std::string> finals;
        for (const auto& [partial, final_path] : staged_) {
            fs::rename(partial, final_path);
            finals.push_back(final_path.filename().string());
        }
        staged_.clear();
        return finals;
    }

  private:
    fs::path dir_;
    std::vector<std::pair<fs::path, fs::path>> staged_;
};

void write_manifest(const PipelineConfig& config, const std::string& command,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
    json j;
    j["command"] = command;
    j["version"] = kVersion;
    j["config_hash"] = config.config_hash();
    j["seed"] = config.seed;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    const fs::path dir(config.output_dir);
    const fs::path partial = dir / (command + "_manifest.json.partial");
    {
        std::ofstream out(partial, std::ios::binary);
        if (!out) throw DataError("cannot write manifest: " + partial.string());
        out << j.dump(2) << "\n";
    }
    fs::rename(partial, dir / (command + "_manifest.json"));
}

FitOptions fit_options(const PipelineConfig& config) {
    FitOptions opts;
    opts.share_basis = config.share_basis;
    opts.weighted = config.weighted;
    return opts;
}

DemandDataset load_input(const std::string& path, const char* what) {
    if (path.empty()) throw ConfigError(std::string("missing input path for ") + what);
    return read_dataset_csv(path);
}

std::vector<CalibrationSpec> resolve_grid(const PipelineConfig& config) {
    if (!config.explicit_grid.empty()) return config.explicit_grid;
    if (config.grid_preset == "expenditure-only") return expenditure_only_grid();
    if (config.grid_preset == "joint-theta") return joint_theta_grid();
    throw ConfigError("unknown grid preset: '" + config.grid_preset + "'");
}

std::string decision_string(bool reject) { return reject ? "Reject" : "Accept"; }

} // namespace

PipelineConfig pipeline_config_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("invalid config JSON in " + path + ": " + e.what());
    }
    return config_from_json(j);
}

PipelineConfig pipeline_config_from_json_string(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid config JSON: ") + e.what());
    }
    return config_from_json(j);
}

void cmd_simulate(const PipelineConfig& config) {
    config.validate();
    if (config.synthetic_json.empty())
        throw ConfigError("simulate needs a \"synthetic\" section in the config");
    SyntheticConfig sc = synthetic_config_from_json_string(config.synthetic_json);
    const auto result = generate(sc);

    StagedOutputs staged(config.output_dir);
    write_dataset_csv(result.dataset, staged.stage("dataset.csv"));
    write_survey_csv(result.dataset, staged.stage("survey.csv"));
    write_ground_truth_json(result.truth, staged.stage("ground_truth.json"));
    write_manifest(config, "simulate", {}, staged.commit());
}

void cmd_ingest(const PipelineConfig& config) {
    config.validate();
    if (config.input.empty()) throw ConfigError("ingest needs an input survey CSV");
    if (config.items.empty()) throw ConfigError("ingest needs a non-empty item list");
    const ColumnMapping mapping =
        config.has_mapping ? config.mapping : ColumnMapping::canonical(config.items);

    const ParseResult parsed = parse_survey_csv(config.input, mapping);
    const BuildResult built = build_demand_dataset(parsed.records, config.items);

    StagedOutputs staged(config.output_dir);
    write_dataset_csv(built.dataset, staged.stage("dataset.csv"));
    write_rejects_csv(parsed.rejects, staged.stage("rejects.csv"));
    {
        json j;
        j["input_rows"] = built.report.input_rows;
        j["retained_rows"] = built.report.retained_rows;
        j["na_dropped_rows"] = built.report.na_dropped_rows;
        j["nonpositive_dropped_rows"] = built.report.nonpositive_dropped_rows;
        j["parse_rejected_rows"] = parsed.rejects.size();
        j["na_count_per_item"] = built.report.na_count_per_item;
        j["na_fraction_per_item"] = built.report.na_fraction_per_item;
        j["items"] = config.items;
        std::ofstream out(staged.stage("build_report.json"), std::ios::binary);
        out << j.dump(2) << "\n";
    }
    write_manifest(config, "ingest", {config.input}, staged.commit());
}

void cmd_fit(const PipelineConfig& config) {
    config.validate();
    const DemandDataset data = load_input(config.input, "fit");
    const FitReport report = fit_la_aids(data, fit_options(config));

    StagedOutputs staged(config.output_dir);
    write_parameters_json(report.parameters, staged.stage("parameters.json"));
    write_residuals_csv(report, data, staged.stage("residuals.csv"));
    {
        json j;
        j["share_basis"] = to_string(report.share_basis);
        j["weighted"] = report.weighted;
        json r2 = json::object();
        for (std::size_t i = 0; i < data.items.size(); ++i)
            r2[data.items[i]] = report.r_squared(static_cast<Eigen::Index>(i));
        j["r_squared"] = r2;
        j["n_rows"] = data.n_rows();
        std::ofstream out(staged.stage("fit_summary.json"), std::ios::binary);
        out << j.dump(2) << "\n";
    }
    write_manifest(config, "fit", {config.input}, staged.commit());
}

void cmd_uniformize(const PipelineConfig& config) {
    config.validate();
    const DemandDataset data = load_input(config.input, "uniformize");
    const DemandDataset uniform = uniformize_prices(data, config.strategy);

    StagedOutputs staged(config.output_dir);
    write_dataset_csv(uniform, staged.stage("dataset_uniform.csv"));
    {
        json j;
        j["strategy"] = to_string(config.strategy);
        j["items"] = uniform.items;
        j["n_rows"] = uniform.n_rows();
        std::ofstream out(staged.stage("uniformize_report.json"), std::ios::binary);
        out << j.dump(2) << "\n";
    }
    write_manifest(config, "uniformize", {config.input}, staged.commit());
}

namespace {

// Deterministic subsample (seeded shuffle of canonical order) so the Cramer
// permutation pass stays affordable on large datasets.
Eigen::MatrixXd subsample_rows(const Eigen::MatrixXd& m, std::size_t max_rows,
                               std::uint64_t seed) {
    if (static_cast<std::size_t>(m.rows()) <= max_rows) return m;
    std::vector<std::size_t> order(static_cast<std::size_t>(m.rows()));
    std::iota(order.begin(), order.end(), 0);
    auto rng = detail::sub_rng(seed, 0xc5);
    std::shuffle(order.begin(), order.end(), rng);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(max_rows), m.cols());
    for (std::size_t i = 0; i < max_rows; ++i)
        out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(order[i]));
    return out;
}

} // namespace

void cmd_compare_shares(const PipelineConfig& config) {
    config.validate();
    const DemandDataset a = load_input(config.input, "compare-shares (original)");
    const DemandDataset b = load_input(config.input_alt, "compare-shares (alternate)");
    if (a.items != b.items) throw DataError("datasets cover different item lists");

    const auto opts = fit_options(config);
    const FitReport fit_a = fit_la_aids(a, opts);
    const FitReport fit_b = fit_la_aids(b, opts);

    auto predict_for = [&](const FitReport& fit, const DemandDataset& d,
                           const StateEffects* fx) {
        return opts.share_basis == ShareBasis::MeanShares
                   ? predict_shares(fit.parameters, d, fit.stone_weights, fx)
                   : predict_shares(fit.parameters, d, ShareBasis::RowShares, fx);
    };
    const Eigen::MatrixXd pred_a = predict_for(fit_a, a, nullptr);
    const Eigen::MatrixXd pred_b = predict_for(fit_b, b, nullptr);

    bool have_state_fx = true;
    std::string state_fx_note;
    Eigen::MatrixXd pred_a_fx, pred_b_fx;
    try {
        const StateEffects fx_a = estimate_state_effects(fit_a, a);
        const StateEffects fx_b = estimate_state_effects(fit_b, b);
        pred_a_fx = predict_for(fit_a, a, &fx_a);
        pred_b_fx = predict_for(fit_b, b, &fx_b);
    } catch (const EstimationError& e) {
        have_state_fx = false;
        state_fx_note = e.what();
    }

    json items_json = json::array();
    std::ostringstream csv;
    csv << "item,D,p_value_without_state,decision_without_state,p_value_with_state,"
           "decision_with_state\n";
    for (std::size_t i = 0; i < a.items.size(); ++i) {
        const auto col = static_cast<Eigen::Index>(i);
        auto column = [](const Eigen::MatrixXd& m, Eigen::Index c) {
            return std::vector<double>(m.col(c).data(), m.col(c).data() + m.rows());
        };
        const TestResult without =
            ks_two_sample(column(pred_a, col), column(pred_b, col), config.level);
        json entry;
        entry["item"] = a.items[i];
        entry["D"] = without.statistic;
        entry["p_value_without_state"] = without.p_value;
        entry["decision_without_state"] = decision_string(without.reject);
        csv << a.items[i] << ',' << detail::format_double(without.statistic) << ','
            << detail::format_double(without.p_value) << ',' << decision_string(without.reject);
        if (have_state_fx) {
            const TestResult with_fx =
                ks_two_sample(column(pred_a_fx, col), column(pred_b_fx, col), config.level);
            entry["D_with_state"] = with_fx.statistic;
            entry["p_value_with_state"] = with_fx.p_value;
            entry["decision_with_state"] = decision_string(with_fx.reject);
            csv << ',' << detail::format_double(with_fx.p_value) << ','
                << decision_string(with_fx.reject) << "\n";
        } else {
            entry["p_value_with_state"] = nullptr;
            entry["decision_with_state"] = nullptr;
            csv << ",,\n";
        }
        items_json.push_back(entry);
    }

    // same seed on both sides so aligned datasets keep paired rows
    const Eigen::MatrixXd sub_a = subsample_rows(pred_a, config.cramer_max_rows, config.seed);
    const Eigen::MatrixXd sub_b = subsample_rows(pred_b, config.cramer_max_rows, config.seed);
    const TestResult cramer =
        cramer_two_sample(sub_a, sub_b, config.cramer_permutations, config.seed, config.level);

    json j;
    j["level"] = config.level;
    j["items"] = items_json;
    j["cramer"] = {{"statistic", cramer.statistic},
                   {"p_value", cramer.p_value},
                   {"decision", decision_string(cramer.reject)},
                   {"permutations", cramer.permutations},
                   {"rows_used", {cramer.n_x, cramer.n_y}}};
    if (!have_state_fx) j["state_effects_note"] = state_fx_note;

    StagedOutputs staged(config.output_dir);
    {
        std::ofstream out(staged.stage("share_tests.json"), std::ios::binary);
        out << j.dump(2) << "\n";
    }
    {
        std::ofstream out(staged.stage("share_tests.csv"), std::ios::binary);
        out << csv.str();
    }
    write_manifest(config, "compare_shares", {config.input, config.input_alt}, staged.commit());
}

void cmd_state_effects(const PipelineConfig& config) {
    config.validate();
    const DemandDataset data = load_input(config.input, "state-effects");
    const FitReport report = fit_la_aids(data, fit_options(config));
    const StateEffects fx = estimate_state_effects(report, data);

    StagedOutputs staged(config.output_dir);
    write_state_effects_json(fx, staged.stage("state_effects.json"));
    write_manifest(config, "state_effects", {config.input}, staged.commit());
}

void cmd_mecor_cv(const PipelineConfig& config) {
    config.validate();
    const DemandDataset data = load_input(config.input, "mecor-cv");
    const auto grid = resolve_grid(config);
    const CvResult result = grid_search(data, grid, config.folds, config.seed, fit_options(config));

    StagedOutputs staged(config.output_dir);
    write_cv_csv(result, staged.stage("cv_grid.csv"));
    write_cv_json(result, staged.stage("cv_result.json"));
    write_manifest(config, "mecor_cv", {config.input}, staged.commit());
}

void cmd_inequality(const PipelineConfig& config) {
    config.validate();
    const DemandDataset original = load_input(config.input, "inequality (original)");
    const DemandDataset alternate = load_input(config.input_alt, "inequality (alternate)");
    if (original.items != alternate.items || original.n_rows() != alternate.n_rows())
        throw DataError("inequality needs aligned original/alternate datasets");

    StagedOutputs staged(config.output_dir);
    std::ostringstream csv;
    csv << "item,gini_original,gini_alternate,phi_gap,decision\n";
    json items_json = json::array();
    for (const auto& item : original.items) {
        const auto e_orig = item_expenditures(original, item);
        const auto e_alt = item_expenditures_repriced(alternate, original, item);
        write_lorenz_csv(lorenz_curve(e_orig), staged.stage("lorenz_" + item + "_original.csv"));
        write_lorenz_csv(lorenz_curve(e_alt), staged.stage("lorenz_" + item + "_alternate.csv"));
        const double g_orig = gini_index(e_orig).gini;
        const double g_alt = gini_index(e_alt).gini;
        const GiniComparison cmp = gini_significance_compare(e_orig, e_alt);
        csv << item << ',' << detail::format_double(g_orig) << ',' << detail::format_double(g_alt)
            << ',' << detail::format_double(cmp.phi_gap) << ','
            << (cmp.different ? "different" : "same") << "\n";
        items_json.push_back({{"item", item},
                              {"gini_original", g_orig},
                              {"gini_alternate", g_alt},
                              {"phi_gap", cmp.phi_gap},
                              {"t1", cmp.t1},
                              {"t2", cmp.t2},
                              {"different", cmp.different}});
    }
    {
        std::ofstream out(staged.stage("gini_comparison.csv"), std::ios::binary);
        out << csv.str();
    }
    {
        json j;
        j["items"] = items_json;
        std::ofstream out(staged.stage("gini_comparison.json"), std::ios::binary);
        out << j.dump(2) << "\n";
    }
    write_manifest(config, "inequality", {config.input, config.input_alt}, staged.commit());
}

void cmd_elasticities(const PipelineConfig& config) {
    config.validate();
    const DemandDataset original = load_input(config.input, "elasticities (original)");
    const DemandDataset alternate = load_input(config.input_alt, "elasticities (alternate)");
    if (original.items != alternate.items) throw DataError("datasets cover different item lists");

    const auto opts = fit_options(config);
    const FitReport fit_orig = fit_la_aids(original, opts);
    const FitReport fit_alt = fit_la_aids(alternate, opts);
    const Eigen::VectorXd w_orig = original.shares.colwise().mean();
    const Eigen::VectorXd w_alt = alternate.shares.colwise().mean();
    const ElasticitySet e_orig = compute_elasticities(fit_orig.parameters, w_orig);
    const ElasticitySet e_alt = compute_elasticities(fit_alt.parameters, w_alt);
    const ElasticityComparison cmp = compare_elasticities(e_orig, e_alt);

    StagedOutputs staged(config.output_dir);
    write_elasticity_comparison_csv(cmp, staged.stage("elasticity_comparison.csv"));
    write_elasticity_comparison_json(cmp, e_orig, e_alt, staged.stage("elasticities.json"));
    write_manifest(config, "elasticities", {config.input, config.input_alt}, staged.commit());
}

} // namespace uniprice
