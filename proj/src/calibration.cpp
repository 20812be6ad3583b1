#include "uniprice/calibration.hpp"

#include "uniprice/errors.hpp"
#include "internal_util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

namespace uniprice {

std::string to_string(CalibrationMode m) {
    return m == CalibrationMode::ExpenditureOnly ? "expenditure-only" : "expenditure-and-prices";
}

void CalibrationSpec::validate() const {
    if (theta1 == 0.0) throw EstimationError("singular calibration: theta1 = 0");
    if (mode == CalibrationMode::ExpenditureAndPrices) {
        if (theta3 == 0.0) throw EstimationError("singular calibration: theta3 = 0");
    } else {
        if (theta2 != 0.0 || theta3 != 1.0)
            throw EstimationError("expenditure-only specs must keep theta2 = 0, theta3 = 1");
    }
}

double CalibrationSpec::distance_to_identity() const {
    const double d0 = theta0, d1 = theta1 - 1.0, d2 = theta2, d3 = theta3 - 1.0;
    return std::sqrt(d0 * d0 + d1 * d1 + d2 * d2 + d3 * d3);
}

CalibrationSpec CalibrationSpec::identity(CalibrationMode m) {
    CalibrationSpec s;
    s.mode = m;
    return s;
}

CalibrationMatrix build_calibration_matrix(const CalibrationSpec& spec, std::size_t n_items) {
    spec.validate();
    const auto d = static_cast<Eigen::Index>(2 + n_items);
    CalibrationMatrix cm;
    cm.lambda = Eigen::MatrixXd::Identity(d, d);
    cm.inverse = Eigen::MatrixXd::Identity(d, d);
    cm.lambda(1, 0) = -spec.theta0 / spec.theta1;
    cm.lambda(1, 1) = 1.0 / spec.theta1;
    cm.inverse(1, 0) = spec.theta0;
    cm.inverse(1, 1) = spec.theta1;
    if (spec.mode == CalibrationMode::ExpenditureAndPrices) {
        for (Eigen::Index r = 2; r < d; ++r) {
            cm.lambda(r, 0) = -spec.theta2 / spec.theta3;
            cm.lambda(r, r) = 1.0 / spec.theta3;
            cm.inverse(r, 0) = spec.theta2;
            cm.inverse(r, r) = spec.theta3;
        }
    }
    return cm;
}

DemandDataset apply_measurement_model(const DemandDataset& data, const CalibrationSpec& spec,
                                      double expenditure_noise_sd, double price_noise_sd,
                                      std::uint64_t seed) {
    spec.validate();
    if (expenditure_noise_sd < 0.0 || price_noise_sd < 0.0)
        throw std::invalid_argument("noise standard deviations must be nonnegative");

    DemandDataset out = data;
    const auto L = static_cast<Eigen::Index>(data.n_rows());
    const auto n = static_cast<Eigen::Index>(data.n_items());

    auto exp_rng = detail::sub_rng(seed, 0x11);
    for (Eigen::Index r = 0; r < L; ++r) {
        const double lx = std::log(data.group_expenditure(r));
        const double observed =
            spec.theta0 + spec.theta1 * lx + detail::draw_normal(exp_rng, expenditure_noise_sd);
        out.group_expenditure(r) = std::exp(observed);
    }
    if (spec.mode == CalibrationMode::ExpenditureAndPrices) {
        auto price_rng = detail::sub_rng(seed, 0x12);
        for (Eigen::Index r = 0; r < L; ++r)
            for (Eigen::Index j = 0; j < n; ++j)
                out.log_prices(r, j) = spec.theta2 + spec.theta3 * data.log_prices(r, j) +
                                       detail::draw_normal(price_rng, price_noise_sd);
    }
    return out;
}

DemandDataset reconstruct_true_covariates(const DemandDataset& data, const CalibrationSpec& spec) {
    spec.validate();
    DemandDataset out = data;
    out.group_expenditure =
        ((data.group_expenditure.array().log() - spec.theta0) / spec.theta1).exp();
    if (spec.mode == CalibrationMode::ExpenditureAndPrices)
        out.log_prices = (data.log_prices.array() - spec.theta2) / spec.theta3;
    return out;
}

AidsParameters correct_parameters(const AidsParameters& naive, const CalibrationSpec& spec) {
    naive.validate();
    spec.validate();
    AidsParameters out;
    out.items = naive.items;
    out.beta = spec.theta1 * naive.beta;
    out.gamma = spec.theta3 * naive.gamma;
    out.alpha = naive.alpha + spec.theta0 * naive.beta + spec.theta2 * naive.gamma.rowwise().sum();
    out.validate();
    return out;
}

FitReport fit_with_calibration(const DemandDataset& data, const CalibrationSpec& spec,
                               const FitOptions& options) {
    return fit_la_aids(reconstruct_true_covariates(data, spec), options);
}

namespace {

// Canonical row order: sorted by row identity so every downstream sum runs
// in the same sequence no matter how the input rows were permuted.
std::vector<std::size_t> canonical_row_order(const DemandDataset& data) {
    std::vector<std::size_t> order(data.n_rows());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (data.hhid[a] != data.hhid[b]) return data.hhid[a] < data.hhid[b];
        if (data.fsu_id[a] != data.fsu_id[b]) return data.fsu_id[a] < data.fsu_id[b];
        if (data.state[a] != data.state[b]) return data.state[a] < data.state[b];
        return data.group_expenditure(static_cast<Eigen::Index>(a)) <
               data.group_expenditure(static_cast<Eigen::Index>(b));
    });
    return order;
}

} // namespace

std::pair<double, double> cv_errors(const DemandDataset& data, const CalibrationSpec& spec,
                                    std::size_t folds, std::uint64_t seed,
                                    const FitOptions& options) {
    if (folds < 2) throw std::invalid_argument("need at least 2 folds");
    if (data.n_rows() < folds) throw std::invalid_argument("fewer rows than folds");
    spec.validate();

    // Work on the canonically sorted copy; fold membership and every
    // accumulation then depend only on row identities and the seed.
    const DemandDataset transformed =
        reconstruct_true_covariates(data, spec).select(canonical_row_order(data));
    const std::size_t L = transformed.n_rows();
    std::vector<std::size_t> order(L);
    std::iota(order.begin(), order.end(), 0);
    {
        auto rng = detail::sub_rng(seed, 0x7a);
        std::shuffle(order.begin(), order.end(), rng);
    }
    const std::size_t base = L / folds;
    const std::size_t extra = L % folds;

    // One Stone index for every fold: the index is covariate construction,
    // so it is fixed per dataset rather than re-derived per training split.
    FitOptions fold_options = options;
    if (fold_options.share_basis == ShareBasis::MeanShares &&
        fold_options.stone_weights_override.size() == 0)
        fold_options.stone_weights_override = transformed.shares.colwise().mean();

    double l1 = 0.0, l2 = 0.0;
    std::size_t start = 0;
    for (std::size_t f = 0; f < folds; ++f) {
        const std::size_t size = base + (f < extra ? 1 : 0);
        std::vector<std::size_t> test_rows(order.begin() + start, order.begin() + start + size);
        std::vector<std::size_t> train_rows;
        train_rows.reserve(L - size);
        train_rows.insert(train_rows.end(), order.begin(), order.begin() + start);
        train_rows.insert(train_rows.end(), order.begin() + start + size, order.end());
        start += size;

        const auto n = transformed.n_items();
        const std::size_t n_free = 2 * (n - 1) + (n - 1) * n / 2;
        if (train_rows.size() <= n_free)
            throw EstimationError("fold " + std::to_string(f) + ": training complement has " +
                                  std::to_string(train_rows.size()) +
                                  " rows, not enough for " + std::to_string(n_free) +
                                  " free parameters");

        const DemandDataset train = transformed.select(train_rows);
        const DemandDataset test = transformed.select(test_rows);
        FitReport fit;
        try {
            fit = fit_la_aids(train, fold_options);
        } catch (const EstimationError& e) {
            throw EstimationError("fold " + std::to_string(f) + ": " + e.what());
        }
        const Eigen::MatrixXd pred =
            fold_options.share_basis == ShareBasis::MeanShares
                ? predict_shares(fit.parameters, test, fit.stone_weights)
                : predict_shares(fit.parameters, test, ShareBasis::RowShares);
        const Eigen::MatrixXd diff = test.shares - pred;
        l1 += diff.cwiseAbs().sum();
        l2 += diff.squaredNorm();
    }
    return {l1, l2};
}

double cv_error(const DemandDataset& data, const CalibrationSpec& spec, std::size_t folds,
                CvLoss loss, std::uint64_t seed, const FitOptions& options) {
    const auto [l1, l2] = cv_errors(data, spec, folds, seed, options);
    return loss == CvLoss::L1 ? l1 : l2;
}

CvResult grid_search(const DemandDataset& data, const std::vector<CalibrationSpec>& grid,
                     std::size_t folds, std::uint64_t seed, const FitOptions& options) {
    if (grid.empty()) throw std::invalid_argument("empty calibration grid");

    CvResult result;
    result.folds = folds;
    result.seed = seed;
    result.divisor = data.n_rows() * data.n_items();
    result.grid.reserve(grid.size());

    for (const auto& spec : grid) {
        CvPoint point;
        point.spec = spec;
        try {
            const auto [l1, l2] = cv_errors(data, spec, folds, seed, options);
            point.cv_error_l1 = l1;
            point.cv_error_l2 = l2;
        } catch (const std::exception& e) {
            point.failed = true;
            point.error = e.what();
        }
        result.grid.push_back(std::move(point));
    }

    auto better = [&](std::size_t cand, std::size_t best, double CvPoint::* err) {
        const auto& c = result.grid[cand];
        const auto& b = result.grid[best];
        if (b.failed) return !c.failed;
        if (c.failed) return false;
        if (c.*err != b.*err) return c.*err < b.*err;
        return c.spec.distance_to_identity() < b.spec.distance_to_identity();
    };
    for (std::size_t i = 1; i < result.grid.size(); ++i) {
        if (better(i, result.best_l1, &CvPoint::cv_error_l1)) result.best_l1 = i;
        if (better(i, result.best_l2, &CvPoint::cv_error_l2)) result.best_l2 = i;
    }
    if (result.grid[result.best_l1].failed)
        throw EstimationError("every grid point failed: " + result.grid.front().error);
    return result;
}

std::vector<CalibrationSpec> expenditure_only_grid() {
    static const double theta1[] = {0.5,  0.6,  0.7,  0.8,  0.9, 0.92, 0.94, 0.96, 0.98, 1.0,
                                    1.02, 1.04, 1.06, 1.08, 1.1, 1.2,  1.3,  1.4,  1.5};
    std::vector<CalibrationSpec> grid;
    for (double t1 : theta1) {
        CalibrationSpec s;
        s.theta1 = t1;
        s.mode = CalibrationMode::ExpenditureOnly;
        grid.push_back(s);
    }
    return grid;
}

std::vector<CalibrationSpec> joint_theta_grid() {
    static const double theta3[] = {0.975, 0.9825, 1.0, 1.0125, 1.025};
    static const double theta2[] = {0.045, 0.03, 0.015, 0.0, -0.015, -0.03, -0.045};
    std::vector<CalibrationSpec> grid;
    for (double t3 : theta3)
        for (double t2 : theta2) {
            CalibrationSpec s;
            s.theta1 = 1.0;
            s.theta2 = t2;
            s.theta3 = t3;
            s.mode = CalibrationMode::ExpenditureAndPrices;
            grid.push_back(s);
        }
    return grid;
}

void write_cv_csv(const CvResult& result, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write CV CSV: " + path);
    out << "theta1,theta2,theta3,cv_l1,cv_l2\n";
    for (const auto& p : result.grid) {
        out << detail::format_double(p.spec.theta1) << ',' << detail::format_double(p.spec.theta2)
            << ',' << detail::format_double(p.spec.theta3) << ',';
        if (p.failed)
            out << ",";
        else
            out << detail::format_double(p.cv_error_l1) << ','
                << detail::format_double(p.cv_error_l2);
        out << "\n";
    }
}

namespace {

nlohmann::json spec_json(const CalibrationSpec& s) {
    return {{"theta0", s.theta0},
            {"theta1", s.theta1},
            {"theta2", s.theta2},
            {"theta3", s.theta3},
            {"mode", to_string(s.mode)}};
}

} // namespace

void write_cv_json(const CvResult& result, const std::string& path) {
    nlohmann::json j;
    j["folds"] = result.folds;
    j["seed"] = result.seed;
    j["divisor"] = result.divisor;
    nlohmann::json grid = nlohmann::json::array();
    for (const auto& p : result.grid) {
        nlohmann::json e;
        e["spec"] = spec_json(p.spec);
        if (p.failed) {
            e["failed"] = true;
            e["error"] = p.error;
        } else {
            e["cv_l1"] = p.cv_error_l1;
            e["cv_l2"] = p.cv_error_l2;
        }
        grid.push_back(e);
    }
    j["grid"] = grid;
    j["best_l1"] = spec_json(result.best_l1_point().spec);
    j["best_l2"] = spec_json(result.best_l2_point().spec);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write CV JSON: " + path);
    out << j.dump(2) << "\n";
}

} // namespace uniprice
