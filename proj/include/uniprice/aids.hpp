#pragma once

#include "uniprice/survey_data.hpp"

#include <Eigen/Dense>

#include <map>
#include <string>
#include <vector>

namespace uniprice {

/// Demand-system coefficients under adding-up, homogeneity and symmetry:
/// sum(alpha) = 1, sum(beta) = 0, gamma has zero row and column sums and is
/// symmetric. Fits produce these identities exactly by construction.
struct AidsParameters {
    std::vector<std::string> items;
    Eigen::VectorXd alpha;
    Eigen::VectorXd beta;
    Eigen::MatrixXd gamma;

    std::size_t n_items() const { return items.size(); }

    /// Largest absolute violation of each restriction:
    /// [adding-up alpha, adding-up beta, row/col sums, asymmetry].
    Eigen::Vector4d restriction_residuals() const;

    /// Throws DataError when any restriction residual exceeds `tol`.
    void validate(double tol = 1e-8) const;
};

enum class ShareBasis { RowShares, MeanShares };

std::string to_string(ShareBasis b);
ShareBasis share_basis_from_string(const std::string& s);

struct FitOptions {
    ShareBasis share_basis = ShareBasis::MeanShares;
    bool weighted = false;
    /// Non-empty: use these Stone weights instead of the dataset-mean shares
    /// (mean-share basis only). Lets cross-validation share one index across
    /// folds.
    Eigen::VectorXd stone_weights_override;
};

/// Per-item additive state effects estimated from fit residuals. Effects are
/// centered to observation-weighted mean zero per item, and within each state
/// they sum to zero across items, so predictions keep adding up to one.
struct StateEffects {
    std::vector<std::string> items;
    std::map<std::string, Eigen::VectorXd> effects; // state -> per-item effect
    std::vector<std::string> singleton_states;      // states seen exactly once
    std::string convention = "observation-weighted mean zero per item";
};

struct FitReport {
    AidsParameters parameters;
    Eigen::MatrixXd residuals;        // n_rows x n_items, rows sum to zero
    Eigen::VectorXd r_squared;        // per item
    Eigen::VectorXd log_price_index;  // per household
    Eigen::VectorXd stone_weights;    // mean-share weights (empty for row basis)
    ShareBasis share_basis = ShareBasis::MeanShares;
    bool weighted = false;
};

/// log P_l = sum_j s_j * log p_jl with s either each row's own shares or the
/// dataset-mean shares.
Eigen::VectorXd stone_log_price_index(const DemandDataset& data, ShareBasis basis);

/// Restriction-reparameterized least squares over the whole share system.
/// Homogeneity enters through relative log prices, symmetry through shared
/// gamma parameters, and the last item's coefficients come from adding-up, so
/// the result is invariant to item ordering and satisfies every restriction
/// at machine precision.
FitReport fit_la_aids(const DemandDataset& data, const FitOptions& options = {});

/// Predicted share matrix; rows sum to one. With `state_fx`, each row gets
/// its state's centered effect added.
Eigen::MatrixXd predict_shares(const AidsParameters& params, const DemandDataset& data,
                               ShareBasis basis = ShareBasis::MeanShares,
                               const StateEffects* state_fx = nullptr);

/// Same, with explicit Stone weights (e.g. the training-set weights stored in
/// a FitReport) instead of weights derived from `data`.
Eigen::MatrixXd predict_shares(const AidsParameters& params, const DemandDataset& data,
                               const Eigen::VectorXd& stone_weights,
                               const StateEffects* state_fx = nullptr);

/// Partial regression of the fit residuals on state indicators: per item the
/// effect of a state is its residual group mean, centered. Needs at least two
/// distinct states; singleton states are kept and flagged.
StateEffects estimate_state_effects(const FitReport& report, const DemandDataset& data);

// --- serialization ---

void write_parameters_json(const AidsParameters& params, const std::string& path);
AidsParameters read_parameters_json(const std::string& path);
void write_residuals_csv(const FitReport& report, const DemandDataset& data,
                         const std::string& path);
void write_state_effects_json(const StateEffects& fx, const std::string& path);
StateEffects read_state_effects_json(const std::string& path);

} // namespace uniprice
