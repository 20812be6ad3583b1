#include "uniprice/elasticities.hpp"

#include "uniprice/errors.hpp"
#include "internal_util.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>

namespace uniprice {

ElasticitySet compute_elasticities(const AidsParameters& params, const Eigen::VectorXd& w_bar) {
    params.validate();
    const auto n = static_cast<Eigen::Index>(params.n_items());
    if (w_bar.size() != n) throw std::invalid_argument("evaluation share length mismatch");
    if ((w_bar.array() <= 0.0).any())
        throw std::invalid_argument("evaluation shares must be strictly positive");
    if (std::abs(w_bar.sum() - 1.0) > 1e-8)
        throw std::invalid_argument("evaluation shares must sum to 1");

    ElasticitySet e;
    e.items = params.items;
    e.eval_shares = w_bar;
    e.expenditure = Eigen::VectorXd::Ones(n) + (params.beta.array() / w_bar.array()).matrix();
    e.marshallian.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            e.marshallian(i, j) =
                (i == j ? -1.0 : 0.0) + (params.gamma(i, j) - params.beta(i) * w_bar(j)) / w_bar(i);
    e.hicksian = e.marshallian + e.expenditure * w_bar.transpose();
    return e;
}

ElasticityComparison compare_elasticities(const ElasticitySet& a, const ElasticitySet& b,
                                          double threshold) {
    if (a.items != b.items) throw std::invalid_argument("elasticity sets cover different items");
    const auto n = static_cast<Eigen::Index>(a.items.size());

    ElasticityComparison cmp;
    cmp.items = a.items;
    cmp.threshold = threshold;
    cmp.expenditure_a = a.expenditure;
    cmp.expenditure_b = b.expenditure;
    cmp.expenditure_diff = (a.expenditure - b.expenditure).cwiseAbs();
    cmp.marshallian_diff = (a.marshallian - b.marshallian).cwiseAbs();
    cmp.hicksian_diff = (a.hicksian - b.hicksian).cwiseAbs();

    double sum = 0.0;
    std::size_t cells = 0;
    auto account = [&](double d) {
        cmp.max_abs_diff = std::max(cmp.max_abs_diff, d);
        sum += d;
        ++cells;
    };
    for (Eigen::Index i = 0; i < n; ++i) {
        account(cmp.expenditure_diff(i));
        if (cmp.expenditure_diff(i) > threshold) cmp.flagged_expenditure.push_back(a.items[i]);
    }
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            account(cmp.marshallian_diff(i, j));
            account(cmp.hicksian_diff(i, j));
            if (cmp.marshallian_diff(i, j) > threshold)
                cmp.flagged_marshallian.emplace_back(a.items[i], a.items[j]);
            if (cmp.hicksian_diff(i, j) > threshold)
                cmp.flagged_hicksian.emplace_back(a.items[i], a.items[j]);
            if (a.marshallian(i, j) * b.marshallian(i, j) > 0.0) ++cmp.sign_agreements;
            if (a.hicksian(i, j) * b.hicksian(i, j) > 0.0) ++cmp.sign_agreements;
            cmp.sign_cells += 2;
        }
    cmp.mean_abs_diff = cells == 0 ? 0.0 : sum / static_cast<double>(cells);
    return cmp;
}

void write_elasticity_comparison_csv(const ElasticityComparison& cmp, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write elasticity comparison CSV: " + path);
    out << "item,expenditure_a,expenditure_b,abs_difference\n";
    for (std::size_t i = 0; i < cmp.items.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        out << cmp.items[i] << ',' << detail::format_double(cmp.expenditure_a(k)) << ','
            << detail::format_double(cmp.expenditure_b(k)) << ','
            << detail::format_double(cmp.expenditure_diff(k)) << "\n";
    }
}

namespace {

nlohmann::json matrix_rows(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

nlohmann::json pair_list(const std::vector<std::pair<std::string, std::string>>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& [i, j] : v) a.push_back({{"row_item", i}, {"price_item", j}});
    return a;
}

} // namespace

void write_elasticity_comparison_json(const ElasticityComparison& cmp, const ElasticitySet& a,
                                      const ElasticitySet& b, const std::string& path) {
    nlohmann::json j;
    j["items"] = cmp.items;
    j["threshold"] = cmp.threshold;
    j["max_abs_diff"] = cmp.max_abs_diff;
    j["mean_abs_diff"] = cmp.mean_abs_diff;
    j["sign_agreements"] = cmp.sign_agreements;
    j["sign_cells"] = cmp.sign_cells;
    j["flagged_expenditure"] = cmp.flagged_expenditure;
    j["flagged_marshallian"] = pair_list(cmp.flagged_marshallian);
    j["flagged_hicksian"] = pair_list(cmp.flagged_hicksian);
    j["marshallian_a"] = matrix_rows(a.marshallian);
    j["marshallian_b"] = matrix_rows(b.marshallian);
    j["hicksian_a"] = matrix_rows(a.hicksian);
    j["hicksian_b"] = matrix_rows(b.hicksian);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write elasticity comparison JSON: " + path);
    out << j.dump(2) << "\n";
}

} // namespace uniprice
