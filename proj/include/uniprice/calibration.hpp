#pragma once

#include "uniprice/aids.hpp"
#include "uniprice/survey_data.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace uniprice {

enum class CalibrationMode { ExpenditureOnly, ExpenditureAndPrices };

std::string to_string(CalibrationMode m);

/// Linear measurement model for the observed covariates:
///   observed log expenditure = theta0 + theta1 * true + noise
///   observed log price       = theta2 + theta3 * true + noise  (joint mode)
/// Expenditure-only specs keep the price block at identity.
struct CalibrationSpec {
    double theta0 = 0.0;
    double theta1 = 1.0;
    double theta2 = 0.0;
    double theta3 = 1.0;
    CalibrationMode mode = CalibrationMode::ExpenditureOnly;

    void validate() const; // nonzero slopes; identity price block in expenditure-only mode
    double distance_to_identity() const;
    static CalibrationSpec identity(CalibrationMode m = CalibrationMode::ExpenditureOnly);
};

/// The calibration model matrix on the covariate block (intercept, log
/// expenditure, log prices) together with its closed-form inverse. Naive
/// coefficient rows b satisfy b_naive = b_true * lambda; the correction is
/// b_naive * inverse.
struct CalibrationMatrix {
    Eigen::MatrixXd lambda;  // (2 + n_items) square
    Eigen::MatrixXd inverse; // exact closed form, not a numeric inverse
};

CalibrationMatrix build_calibration_matrix(const CalibrationSpec& spec, std::size_t n_items);

/// Simulates reporting error: replaces log expenditure by theta0 + theta1 *
/// (true) + eps and, in joint mode, log prices by theta2 + theta3 * (true) +
/// eta, with independent zero-mean Gaussian noise. Deterministic given seed.
DemandDataset apply_measurement_model(const DemandDataset& data, const CalibrationSpec& spec,
                                      double expenditure_noise_sd, double price_noise_sd,
                                      std::uint64_t seed);

/// Inverts the systematic part of the measurement model on the covariates
/// (no noise handling): log x -> (log x - theta0)/theta1 and, in joint mode,
/// log p -> (log p - theta2)/theta3.
DemandDataset reconstruct_true_covariates(const DemandDataset& data, const CalibrationSpec& spec);

/// Closed-form coefficient correction: beta = theta1 * beta_naive, gamma =
/// theta3 * gamma_naive, alpha = alpha_naive + theta0 * beta_naive + theta2 *
/// (gamma_naive row sums). Preserves every parameter restriction.
AidsParameters correct_parameters(const AidsParameters& naive, const CalibrationSpec& spec);

/// Fit on the reconstructed covariates; equivalent to naive-fit-then-correct
/// whenever the measurement model is exactly invertible on the fitted span.
FitReport fit_with_calibration(const DemandDataset& data, const CalibrationSpec& spec,
                               const FitOptions& options = {});

enum class CvLoss { L1, L2 };

/// K-fold cross-validated held-out share prediction error under the
/// spec-implied covariate reconstruction. Folds come from a seeded shuffle of
/// the rows in canonical (sorted-key) order, so the result is invariant to
/// input row permutation. Errors are summed over all held-out households and
/// items.
double cv_error(const DemandDataset& data, const CalibrationSpec& spec, std::size_t folds,
                CvLoss loss, std::uint64_t seed, const FitOptions& options = {});

/// Both losses from a single pass over the folds.
std::pair<double, double> cv_errors(const DemandDataset& data, const CalibrationSpec& spec,
                                    std::size_t folds, std::uint64_t seed,
                                    const FitOptions& options = {});

struct CvPoint {
    CalibrationSpec spec;
    double cv_error_l1 = 0.0;
    double cv_error_l2 = 0.0;
    bool failed = false;
    std::string error;
};

struct CvResult {
    std::vector<CvPoint> grid;
    std::size_t best_l1 = 0; // index into grid
    std::size_t best_l2 = 0;
    std::size_t folds = 0;
    std::uint64_t seed = 0;
    std::size_t divisor = 0; // held-out share cells (rows x items), for re-normalization

    const CvPoint& best_l1_point() const { return grid[best_l1]; }
    const CvPoint& best_l2_point() const { return grid[best_l2]; }
};

/// Evaluates every grid point with the same fold assignment; failures are
/// recorded per point, never aborting the search. Ties break toward the spec
/// closest to the identity, then first in grid order.
CvResult grid_search(const DemandDataset& data, const std::vector<CalibrationSpec>& grid,
                     std::size_t folds, std::uint64_t seed, const FitOptions& options = {});

/// Shipped presets: a theta1 sweep over [0.5, 1.5], and the joint sweep with
/// theta1 = 1 over theta2 in +/-{0,.015,.03,.045} and theta3 in
/// {0.975, 0.9825, 1, 1.0125, 1.025}.
std::vector<CalibrationSpec> expenditure_only_grid();
std::vector<CalibrationSpec> joint_theta_grid();

void write_cv_csv(const CvResult& result, const std::string& path);
void write_cv_json(const CvResult& result, const std::string& path);

} // namespace uniprice
