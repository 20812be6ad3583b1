#include "uniprice/inequality.hpp"

#include "uniprice/errors.hpp"
#include "internal_util.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace uniprice {

std::vector<double> item_expenditures(const DemandDataset& data, const std::string& item) {
    const auto j = static_cast<Eigen::Index>(data.item_index(item));
    std::vector<double> out(data.n_rows());
    for (std::size_t r = 0; r < data.n_rows(); ++r) {
        const auto i = static_cast<Eigen::Index>(r);
        out[r] = data.shares(i, j) * data.group_expenditure(i);
    }
    return out;
}

std::vector<double> item_expenditures_repriced(const DemandDataset& repriced,
                                               const DemandDataset& original,
                                               const std::string& item) {
    if (repriced.items != original.items || repriced.n_rows() != original.n_rows() ||
        repriced.hhid != original.hhid)
        throw DataError("repriced and original datasets do not line up");
    const auto j = static_cast<Eigen::Index>(original.item_index(item));
    std::vector<double> out(original.n_rows());
    for (std::size_t r = 0; r < original.n_rows(); ++r) {
        const auto i = static_cast<Eigen::Index>(r);
        // q = w*Q/p stays fixed; spending under the new price is q * p_new.
        const double spend = original.shares(i, j) * original.group_expenditure(i);
        out[r] = spend * std::exp(repriced.log_prices(i, j) - original.log_prices(i, j));
    }
    return out;
}

namespace {

void check_sample(const std::vector<double>& sample) {
    if (sample.empty()) throw DataError("empty sample");
    double total = 0.0;
    for (double v : sample) {
        if (v < 0.0) throw DataError("sample values must be nonnegative");
        total += v;
    }
    if (total <= 0.0) throw DataError("degenerate all-zero sample");
}

} // namespace

LorenzCurve lorenz_curve(const std::vector<double>& sample) {
    check_sample(sample);
    std::vector<double> sorted = sample;
    std::sort(sorted.begin(), sorted.end());
    const double total = std::accumulate(sorted.begin(), sorted.end(), 0.0);
    const auto n = sorted.size();
    LorenzCurve curve;
    curve.population_share.reserve(n + 1);
    curve.expenditure_share.reserve(n + 1);
    curve.population_share.push_back(0.0);
    curve.expenditure_share.push_back(0.0);
    double cum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        cum += sorted[k];
        curve.population_share.push_back(static_cast<double>(k + 1) / static_cast<double>(n));
        curve.expenditure_share.push_back(cum / total);
    }
    return curve;
}

LorenzCurve lorenz_curve(const std::vector<double>& sample, const std::vector<double>& weights) {
    check_sample(sample);
    if (weights.size() != sample.size()) throw DataError("weight length mismatch");
    std::vector<std::size_t> order(sample.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return sample[a] < sample[b]; });
    double total_w = 0.0, total_wx = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        if (!(weights[i] > 0.0)) throw DataError("weights must be positive");
        total_w += weights[i];
        total_wx += weights[i] * sample[i];
    }
    LorenzCurve curve;
    curve.population_share.push_back(0.0);
    curve.expenditure_share.push_back(0.0);
    double cw = 0.0, cwx = 0.0;
    for (auto idx : order) {
        cw += weights[idx];
        cwx += weights[idx] * sample[idx];
        curve.population_share.push_back(cw / total_w);
        curve.expenditure_share.push_back(cwx / total_wx);
    }
    return curve;
}

GiniResult gini_index(const std::vector<double>& sample, GiniFormula formula) {
    check_sample(sample);
    std::vector<double> sorted = sample;
    std::sort(sorted.begin(), sorted.end());
    const auto n = static_cast<double>(sorted.size());
    // sum_{i,j} |x_i - x_j| = 2 * sum_k (2k - 1 - n) x_(k), k 1-based ascending
    double mad_sum = 0.0;
    double total = 0.0;
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        mad_sum += (2.0 * static_cast<double>(k + 1) - 1.0 - n) * sorted[k];
        total += sorted[k];
    }
    mad_sum *= 2.0;
    const double mean = total / n;
    GiniResult res;
    res.n = sorted.size();
    res.formula = formula;
    const double denom = formula == GiniFormula::BiasedN2 ? n * n : n * (n - 1.0);
    if (denom <= 0.0) throw DataError("gini needs at least 2 observations for the unbiased form");
    res.gini = mad_sum / (2.0 * denom * mean);
    return res;
}

GiniResult gini_index(const std::vector<double>& sample, const std::vector<double>& weights,
                      GiniFormula formula) {
    check_sample(sample);
    if (weights.size() != sample.size()) throw DataError("weight length mismatch");
    std::vector<std::size_t> order(sample.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return sample[a] < sample[b]; });
    double W = 0.0, W2 = 0.0;
    for (double w : weights) {
        if (!(w > 0.0)) throw DataError("weights must be positive");
        W += w;
        W2 += w * w;
    }
    // weighted mean absolute difference over the weighted population
    double cw = 0.0, mu = 0.0, mad = 0.0;
    for (auto idx : order) mu += weights[idx] * sample[idx];
    mu /= W;
    for (auto idx : order) {
        const double w = weights[idx];
        // 2 * x * (2*cumulative_before + w - W) accumulates sum_ij w_i w_j |x_i - x_j|
        mad += 2.0 * w * sample[idx] * (2.0 * cw + w - W);
        cw += w;
    }
    GiniResult res;
    res.n = sample.size();
    res.formula = formula;
    const double denom = formula == GiniFormula::BiasedN2 ? W * W : W * W - W2;
    if (denom <= 0.0) throw DataError("degenerate weights for the unbiased form");
    res.gini = mad / (2.0 * denom * mu);
    return res;
}

void write_lorenz_csv(const LorenzCurve& curve, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write Lorenz CSV: " + path);
    out << "population_share,expenditure_share\n";
    for (std::size_t i = 0; i < curve.population_share.size(); ++i)
        out << detail::format_double(curve.population_share[i]) << ','
            << detail::format_double(curve.expenditure_share[i]) << "\n";
}

} // namespace uniprice
