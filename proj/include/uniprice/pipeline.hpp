#pragma once

#include "uniprice/aids.hpp"
#include "uniprice/calibration.hpp"
#include "uniprice/survey_data.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace uniprice {

inline constexpr const char* kVersion = "0.1.0";

/// Settings shared by all subcommands. Loaded from a JSON config file; the
/// CLI overrides individual fields with flags. Outputs are reproducible from
/// the config and seed alone.
struct PipelineConfig {
    std::string input;
    std::string input_alt;      // second dataset for the comparison commands
    std::string output_dir = "out";
    std::vector<std::string> items;
    PriceStrategy strategy = PriceStrategy::Median;
    double level = 0.05;
    std::size_t folds = 10;
    std::uint64_t seed = 1;
    std::string grid_preset = "expenditure-only"; // or "joint-theta"
    std::vector<CalibrationSpec> explicit_grid;   // non-empty overrides preset
    ShareBasis share_basis = ShareBasis::MeanShares;
    bool weighted = false;
    std::size_t cramer_permutations = 200;
    std::size_t cramer_max_rows = 500;
    ColumnMapping mapping = ColumnMapping::canonical({});
    bool has_mapping = false;
    std::string synthetic_json; // simulate settings as a JSON blob

    void validate() const;
    std::string config_hash() const; // FNV-1a over the canonical serialization
    std::string canonical_json() const;
};

PipelineConfig pipeline_config_from_file(const std::string& path);
PipelineConfig pipeline_config_from_json_string(const std::string& json_text);

// Each command reads its inputs, writes its documented outputs plus a
// <command>_manifest.json, and throws on failure. Partially written files
// keep a ".partial" suffix and never replace finished outputs.
void cmd_simulate(const PipelineConfig& config);
void cmd_ingest(const PipelineConfig& config);
void cmd_fit(const PipelineConfig& config);
void cmd_uniformize(const PipelineConfig& config);
void cmd_compare_shares(const PipelineConfig& config);
void cmd_state_effects(const PipelineConfig& config);
void cmd_mecor_cv(const PipelineConfig& config);
void cmd_inequality(const PipelineConfig& config);
void cmd_elasticities(const PipelineConfig& config);

} // namespace uniprice
