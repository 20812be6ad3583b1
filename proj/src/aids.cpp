#include "uniprice/aids.hpp"

#include "uniprice/errors.hpp"
#include "internal_util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace uniprice {

Eigen::Vector4d AidsParameters::restriction_residuals() const {
    Eigen::Vector4d res;
    res(0) = std::abs(alpha.sum() - 1.0);
    res(1) = std::abs(beta.sum());
    double sums = 0.0;
    sums = std::max(sums, gamma.rowwise().sum().cwiseAbs().maxCoeff());
    sums = std::max(sums, gamma.colwise().sum().cwiseAbs().maxCoeff());
    res(2) = sums;
    res(3) = (gamma - gamma.transpose()).cwiseAbs().maxCoeff();
    return res;
}

void AidsParameters::validate(double tol) const {
    const auto n = static_cast<Eigen::Index>(n_items());
    if (n < 2 || alpha.size() != n || beta.size() != n || gamma.rows() != n || gamma.cols() != n)
        throw DataError("parameter dimensions disagree with the item list");
    const auto res = restriction_residuals();
    if (res(0) > tol) throw DataError("alpha does not sum to 1 (residual " + detail::format_double(res(0)) + ")");
    if (res(1) > tol) throw DataError("beta does not sum to 0 (residual " + detail::format_double(res(1)) + ")");
    if (res(2) > tol) throw DataError("gamma row/column sums not 0 (residual " + detail::format_double(res(2)) + ")");
    if (res(3) > tol) throw DataError("gamma not symmetric (residual " + detail::format_double(res(3)) + ")");
}

std::string to_string(ShareBasis b) {
    return b == ShareBasis::RowShares ? "row-shares" : "mean-shares";
}

ShareBasis share_basis_from_string(const std::string& s) {
    if (s == "row-shares") return ShareBasis::RowShares;
    if (s == "mean-shares") return ShareBasis::MeanShares;
    throw ConfigError("unknown share basis: '" + s + "'");
}

Eigen::VectorXd stone_log_price_index(const DemandDataset& data, ShareBasis basis) {
    if (data.n_rows() == 0) throw DataError("empty dataset");
    if (basis == ShareBasis::RowShares)
        return (data.shares.array() * data.log_prices.array()).rowwise().sum();
    const Eigen::VectorXd mean_shares = data.shares.colwise().mean();
    return data.log_prices * mean_shares;
}

namespace {

// Free-parameter layout for the reparameterized system with n items:
// alpha_1..alpha_{n-1}, beta_1..beta_{n-1}, then the upper triangle of the
// (n-1)x(n-1) gamma block.
struct FreeLayout {
    Eigen::Index n;
    Eigen::Index n_free;
    Eigen::Index alpha(Eigen::Index i) const { return i; }
    Eigen::Index beta(Eigen::Index i) const { return (n - 1) + i; }
    Eigen::Index gamma(Eigen::Index a, Eigen::Index b) const {
        if (a > b) std::swap(a, b);
        // index of (a,b), a<=b, in row-major upper-triangle order
        return 2 * (n - 1) + a * (n - 1) - a * (a - 1) / 2 + (b - a);
    }
    explicit FreeLayout(Eigen::Index n_items)
        : n(n_items), n_free(2 * (n_items - 1) + (n_items - 1) * n_items / 2) {}
};

// Expands the free vector to full restricted parameters. The derived entries
// are written as negated partial sums, so every restriction holds to
// round-off without any projection step.
AidsParameters expand_parameters(const Eigen::VectorXd& phi, const FreeLayout& lay,
                                 const std::vector<std::string>& items) {
    const auto n = lay.n;
    AidsParameters p;
    p.items = items;
    p.alpha.resize(n);
    p.beta.resize(n);
    p.gamma.resize(n, n);
    for (Eigen::Index i = 0; i < n - 1; ++i) {
        p.alpha(i) = phi(lay.alpha(i));
        p.beta(i) = phi(lay.beta(i));
    }
    p.alpha(n - 1) = 1.0 - p.alpha.head(n - 1).sum();
    p.beta(n - 1) = -p.beta.head(n - 1).sum();
    for (Eigen::Index a = 0; a < n - 1; ++a)
        for (Eigen::Index b = 0; b < n - 1; ++b) p.gamma(a, b) = phi(lay.gamma(a, b));
    for (Eigen::Index a = 0; a < n - 1; ++a) {
        p.gamma(a, n - 1) = -p.gamma.row(a).head(n - 1).sum();
        p.gamma(n - 1, a) = p.gamma(a, n - 1);
    }
    p.gamma(n - 1, n - 1) = -p.gamma.row(n - 1).head(n - 1).sum();
    return p;
}

std::vector<std::string> design_column_names(const DemandDataset& data) {
    std::vector<std::string> names;
    names.push_back("intercept");
    const auto& last = data.items.back();
    for (std::size_t j = 0; j + 1 < data.n_items(); ++j)
        names.push_back("log_price_" + data.items[j] + " - log_price_" + last);
    names.push_back("log_real_expenditure");
    return names;
}

} // namespace

FitReport fit_la_aids(const DemandDataset& data, const FitOptions& options) {
    const auto n = static_cast<Eigen::Index>(data.n_items());
    const auto L = static_cast<Eigen::Index>(data.n_rows());
    if (n < 2) throw std::invalid_argument("fit needs at least 2 items");
    // adding-up of the observed shares is what lets the last equation stand
    // in for the whole system, so insist on a valid dataset up front
    data.validate();

    const FreeLayout lay(n);
    if (L <= lay.n_free)
        throw EstimationError("need more households (" + std::to_string(L) +
                              ") than free parameters (" + std::to_string(lay.n_free) + ")");

    FitReport report;
    report.share_basis = options.share_basis;
    report.weighted = options.weighted;
    if (options.share_basis == ShareBasis::MeanShares) {
        if (options.stone_weights_override.size() != 0) {
            if (options.stone_weights_override.size() != n)
                throw std::invalid_argument("stone weight override length mismatch");
            report.stone_weights = options.stone_weights_override;
        } else {
            report.stone_weights = data.shares.colwise().mean();
        }
        report.log_price_index = data.log_prices * report.stone_weights;
    } else {
        report.log_price_index = stone_log_price_index(data, ShareBasis::RowShares);
    }

    const Eigen::VectorXd z =
        data.group_expenditure.array().log().matrix() - report.log_price_index;

    // Per-equation design: intercept, relative log prices, log real
    // expenditure. Relative prices impose homogeneity directly.
    const auto m = n + 1;
    Eigen::MatrixXd X(L, m);
    X.col(0).setOnes();
    for (Eigen::Index j = 0; j < n - 1; ++j)
        X.col(1 + j) = data.log_prices.col(j) - data.log_prices.col(n - 1);
    X.col(m - 1) = z;

    Eigen::MatrixXd Y = data.shares.leftCols(n - 1);
    if (options.weighted) {
        const Eigen::ArrayXd s = data.weight.array().sqrt();
        X.array().colwise() *= s;
        Y.array().colwise() *= s;
    }

    {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
        qr.setThreshold(1e-10);
        if (qr.rank() < m) {
            const auto names = design_column_names(data);
            const auto& perm = qr.colsPermutation().indices();
            std::string redundant;
            for (Eigen::Index k = qr.rank(); k < m; ++k) {
                if (!redundant.empty()) redundant += ", ";
                redundant += names[static_cast<std::size_t>(perm(k))];
            }
            throw EstimationError("design matrix is rank deficient; collinear columns: " + redundant);
        }
    }

    const Eigen::MatrixXd A = X.transpose() * X;       // m x m
    const Eigen::MatrixXd B = X.transpose() * Y;       // m x (n-1)

    // Full-system objective: sum of squared residuals over all n equations.
    // With the last equation implied by adding-up this is the quadratic form
    // with weight W = I + 11' on the first n-1 equations, which keeps the
    // estimate identical no matter which item is placed last.
    const Eigen::Index ne = n - 1;
    Eigen::MatrixXd W = Eigen::MatrixXd::Identity(ne, ne);
    W.array() += 1.0;

    // S maps the free vector to stacked per-equation coefficients
    // [theta_1; ...; theta_{n-1}], theta_i = (alpha_i, gamma_i,1..n-1, beta_i).
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(m * ne, lay.n_free);
    for (Eigen::Index i = 0; i < ne; ++i) {
        S(i * m + 0, lay.alpha(i)) = 1.0;
        S(i * m + m - 1, lay.beta(i)) = 1.0;
        for (Eigen::Index j = 0; j < ne; ++j) S(i * m + 1 + j, lay.gamma(i, j)) = 1.0;
    }

    Eigen::MatrixXd K(m * ne, m * ne);
    for (Eigen::Index i = 0; i < ne; ++i)
        for (Eigen::Index j = 0; j < ne; ++j) K.block(i * m, j * m, m, m) = W(i, j) * A;
    const Eigen::MatrixXd BW = B * W;
    Eigen::VectorXd r(m * ne);
    for (Eigen::Index i = 0; i < ne; ++i) r.segment(i * m, m) = BW.col(i);

    const Eigen::MatrixXd M = S.transpose() * K * S;
    const Eigen::VectorXd rhs = S.transpose() * r;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
    if (ldlt.info() != Eigen::Success)
        throw EstimationError("normal equations are not positive definite");
    const Eigen::VectorXd phi = ldlt.solve(rhs);
    if (!phi.allFinite()) throw EstimationError("estimation produced non-finite parameters");

    report.parameters = expand_parameters(phi, lay, data.items);

    const Eigen::MatrixXd predicted =
        predict_shares(report.parameters, data, report.share_basis == ShareBasis::MeanShares
                                                    ? Eigen::VectorXd(report.stone_weights)
                                                    : Eigen::VectorXd());
    report.residuals = data.shares - predicted;

    report.r_squared.resize(n);
    const Eigen::VectorXd w = options.weighted
                                  ? Eigen::VectorXd(data.weight)
                                  : Eigen::VectorXd(Eigen::VectorXd::Ones(L));
    const double wsum = w.sum();
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mean = w.dot(data.shares.col(i)) / wsum;
        const double sst = (w.array() * (data.shares.col(i).array() - mean).square()).sum();
        const double ssr = (w.array() * report.residuals.col(i).array().square()).sum();
        if (sst > 1e-30)
            report.r_squared(i) = 1.0 - ssr / sst;
        else
            report.r_squared(i) = ssr < 1e-30 ? 1.0 : -std::numeric_limits<double>::infinity();
    }
    return report;
}

namespace {

Eigen::MatrixXd predict_impl(const AidsParameters& params, const DemandDataset& data,
                             const Eigen::VectorXd& log_price_index,
                             const StateEffects* state_fx) {
    if (params.items != data.items)
        throw std::invalid_argument("parameter item order does not match the dataset");
    const Eigen::VectorXd z =
        data.group_expenditure.array().log().matrix() - log_price_index;
    Eigen::MatrixXd pred = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(data.n_rows())) *
                               params.alpha.transpose() +
                           data.log_prices * params.gamma.transpose() + z * params.beta.transpose();
    if (state_fx != nullptr) {
        if (state_fx->items != params.items)
            throw std::invalid_argument("state-effect item order does not match the parameters");
        for (std::size_t r = 0; r < data.n_rows(); ++r) {
            auto it = state_fx->effects.find(data.state[r]);
            if (it == state_fx->effects.end())
                throw DataError("no state effect estimated for state '" + data.state[r] + "'");
            pred.row(static_cast<Eigen::Index>(r)) += it->second.transpose();
        }
    }
    return pred;
}

} // namespace

Eigen::MatrixXd predict_shares(const AidsParameters& params, const DemandDataset& data,
                               ShareBasis basis, const StateEffects* state_fx) {
    return predict_impl(params, data, stone_log_price_index(data, basis), state_fx);
}

Eigen::MatrixXd predict_shares(const AidsParameters& params, const DemandDataset& data,
                               const Eigen::VectorXd& stone_weights,
                               const StateEffects* state_fx) {
    Eigen::VectorXd index;
    if (stone_weights.size() == 0)
        index = stone_log_price_index(data, ShareBasis::RowShares);
    else if (stone_weights.size() == static_cast<Eigen::Index>(data.n_items()))
        index = data.log_prices * stone_weights;
    else
        throw std::invalid_argument("stone weight length does not match the item count");
    return predict_impl(params, data, index, state_fx);
}

StateEffects estimate_state_effects(const FitReport& report, const DemandDataset& data) {
    const auto L = static_cast<Eigen::Index>(data.n_rows());
    const auto n = static_cast<Eigen::Index>(data.n_items());
    if (report.residuals.rows() != L || report.residuals.cols() != n)
        throw std::invalid_argument("residual matrix does not match the dataset");

    std::set<std::string> distinct(data.state.begin(), data.state.end());
    if (distinct.size() < 2) throw EstimationError("state effects need at least 2 distinct states");

    const Eigen::VectorXd w = report.weighted
                                  ? Eigen::VectorXd(data.weight)
                                  : Eigen::VectorXd(Eigen::VectorXd::Ones(L));

    struct Group {
        double weight = 0.0;
        std::size_t count = 0;
        Eigen::VectorXd sum;
    };
    std::map<std::string, Group> groups;
    for (Eigen::Index r = 0; r < L; ++r) {
        auto& g = groups[data.state[static_cast<std::size_t>(r)]];
        if (g.sum.size() == 0) g.sum = Eigen::VectorXd::Zero(n);
        g.sum += w(r) * report.residuals.row(r).transpose();
        g.weight += w(r);
        g.count += 1;
    }

    StateEffects fx;
    fx.items = data.items;
    Eigen::VectorXd grand = Eigen::VectorXd::Zero(n);
    const double total_weight = w.sum();
    for (auto& [state, g] : groups) {
        g.sum /= g.weight; // group mean residual per item
        grand += (g.weight / total_weight) * g.sum;
    }
    for (auto& [state, g] : groups) {
        fx.effects[state] = g.sum - grand;
        if (g.count == 1) fx.singleton_states.push_back(state);
    }
    return fx;
}

// --- serialization ---

namespace {

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
    nlohmann::json a = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& a) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
    return v;
}

} // namespace

void write_parameters_json(const AidsParameters& params, const std::string& path) {
    nlohmann::json j;
    j["items"] = params.items;
    j["alpha"] = vector_to_json(params.alpha);
    j["beta"] = vector_to_json(params.beta);
    nlohmann::json gamma = nlohmann::json::array();
    for (Eigen::Index i = 0; i < params.gamma.rows(); ++i)
        for (Eigen::Index k = 0; k < params.gamma.cols(); ++k) gamma.push_back(params.gamma(i, k));
    j["gamma_row_major"] = gamma;
    const auto res = params.restriction_residuals();
    j["restriction_residuals"] = {{"adding_up_alpha", res(0)},
                                  {"adding_up_beta", res(1)},
                                  {"gamma_sums", res(2)},
                                  {"gamma_asymmetry", res(3)}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write parameters JSON: " + path);
    out << j.dump(2) << "\n";
}

AidsParameters read_parameters_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open parameters JSON: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("invalid parameters JSON in " + path + ": " + e.what());
    }
    AidsParameters p;
    p.items = j.at("items").get<std::vector<std::string>>();
    p.alpha = vector_from_json(j.at("alpha"));
    p.beta = vector_from_json(j.at("beta"));
    const auto n = static_cast<Eigen::Index>(p.items.size());
    const auto& g = j.at("gamma_row_major");
    if (static_cast<Eigen::Index>(g.size()) != n * n)
        throw DataError("gamma size mismatch in " + path);
    p.gamma.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index k = 0; k < n; ++k)
            p.gamma(i, k) = g[static_cast<std::size_t>(i * n + k)].get<double>();
    return p;
}

void write_residuals_csv(const FitReport& report, const DemandDataset& data,
                         const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write residuals CSV: " + path);
    out << "hhid";
    for (const auto& item : data.items) out << ",residual_" << item;
    out << "\n";
    for (std::size_t r = 0; r < data.n_rows(); ++r) {
        out << data.hhid[r];
        for (Eigen::Index j = 0; j < report.residuals.cols(); ++j)
            out << ',' << detail::format_double(report.residuals(static_cast<Eigen::Index>(r), j));
        out << "\n";
    }
}

void write_state_effects_json(const StateEffects& fx, const std::string& path) {
    nlohmann::json j;
    j["items"] = fx.items;
    j["convention"] = fx.convention;
    j["singleton_states"] = fx.singleton_states;
    nlohmann::json effects = nlohmann::json::object();
    for (const auto& [state, v] : fx.effects) effects[state] = vector_to_json(v);
    j["effects"] = effects;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write state effects JSON: " + path);
    out << j.dump(2) << "\n";
}

StateEffects read_state_effects_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open state effects JSON: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("invalid state effects JSON in " + path + ": " + e.what());
    }
    StateEffects fx;
    fx.items = j.at("items").get<std::vector<std::string>>();
    fx.convention = j.value("convention", fx.convention);
    fx.singleton_states = j.value("singleton_states", std::vector<std::string>{});
    for (const auto& [state, v] : j.at("effects").items()) fx.effects[state] = vector_from_json(v);
    return fx;
}

} // namespace uniprice
