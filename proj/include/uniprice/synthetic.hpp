#pragma once

#include "uniprice/aids.hpp"
#include "uniprice/survey_data.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace uniprice {

/// Knobs for generating a synthetic survey population from known demand
/// parameters, with controllable FSU price dispersion, state effects and
/// share noise.
struct SyntheticConfig {
    std::size_t n_items = 4;
    std::size_t n_households = 1000;
    std::size_t n_fsus = 100;
    std::size_t n_states = 5;
    AidsParameters true_params; // must satisfy all restrictions
    std::vector<double> log_price_base; // per item
    double within_fsu_price_sd = 0.02;
    double between_fsu_price_sd = 0.3;
    double expenditure_log_mean = 0.0; // centered so beta * log real expenditure stays small
    double expenditure_log_sd = 0.5;
    double state_effect_sd = 0.0;
    double share_noise_sd = 0.0;
    std::uint64_t seed = 1;

    void validate() const; // throws on broken invariants
};

/// Everything needed to recompute each expected share independently.
struct GroundTruth {
    AidsParameters params;
    Eigen::VectorXd stone_weights;         // weights used inside the price index
    Eigen::MatrixXd fsu_mean_log_prices;   // n_fsus x n_items
    std::map<std::string, Eigen::VectorXd> state_effects;
    Eigen::VectorXd log_price_index;       // per household
    Eigen::MatrixXd expected_shares;       // pre-noise, n_households x n_items
    std::size_t clamped_rows = 0;
    std::uint64_t seed = 0;
};

struct SyntheticResult {
    DemandDataset dataset;
    GroundTruth truth;
};

/// Deterministic generation. The Stone weights are solved so that the
/// dataset's empirical mean shares coincide with the weights used during
/// generation, which lets a mean-share fit reproduce the true parameters
/// exactly on noise-free draws. Out-of-range shares are clamped and the row
/// renormalized; more than 5% clamped rows aborts with a generation error.
SyntheticResult generate(const SyntheticConfig& config);

/// Random coefficients satisfying every restriction: alpha positive
/// normalized, beta centered, gamma symmetrized and double-centered.
AidsParameters make_random_restricted_params(std::size_t n_items, std::uint64_t seed,
                                             double beta_scale = 0.08,
                                             double gamma_scale = 0.04);

SyntheticConfig synthetic_config_from_json_file(const std::string& path);
SyntheticConfig synthetic_config_from_json_string(const std::string& json_text);
void write_ground_truth_json(const GroundTruth& truth, const std::string& path);
GroundTruth read_ground_truth_json(const std::string& path);

} // namespace uniprice
