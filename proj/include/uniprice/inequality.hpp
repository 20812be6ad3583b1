#pragma once

#include "uniprice/survey_data.hpp"

#include <string>
#include <vector>

namespace uniprice {

/// Cumulative population share against cumulative expenditure share, sorted
/// ascending; starts at (0,0), ends at (1,1), convex, below the diagonal.
struct LorenzCurve {
    std::vector<double> population_share;
    std::vector<double> expenditure_share;
};

enum class GiniFormula { BiasedN2, UnbiasedN1 };

struct GiniResult {
    double gini = 0.0;
    std::size_t n = 0;
    GiniFormula formula = GiniFormula::BiasedN2;
};

/// Per-household expenditure on one item implied by the dataset's own prices
/// and shares (share times group expenditure).
std::vector<double> item_expenditures(const DemandDataset& data, const std::string& item);

/// Expenditure under `repriced`'s prices with quantities carried from
/// `original`: q is fixed, the price changes, so spend scales by the price
/// ratio. Row order and item lists must match.
std::vector<double> item_expenditures_repriced(const DemandDataset& repriced,
                                               const DemandDataset& original,
                                               const std::string& item);

LorenzCurve lorenz_curve(const std::vector<double>& sample);
LorenzCurve lorenz_curve(const std::vector<double>& sample, const std::vector<double>& weights);

/// Mean-absolute-difference Gini. The default n^2 denominator matches the
/// asymptotic reference value 1/3 for uniform data; the n(n-1) variant is a
/// flag away.
GiniResult gini_index(const std::vector<double>& sample,
                      GiniFormula formula = GiniFormula::BiasedN2);
GiniResult gini_index(const std::vector<double>& sample, const std::vector<double>& weights,
                      GiniFormula formula = GiniFormula::BiasedN2);

void write_lorenz_csv(const LorenzCurve& curve, const std::string& path);

} // namespace uniprice
