#pragma once

#include "uniprice/aids.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace uniprice {

/// Expenditure, Marshallian and Hicksian elasticities evaluated at a share
/// point. Slutsky holds by construction; Engel, homogeneity and Cournot
/// aggregation follow from the parameter restrictions.
struct ElasticitySet {
    std::vector<std::string> items;
    Eigen::VectorXd expenditure;  // eta_i = 1 + beta_i / w_i
    Eigen::MatrixXd marshallian;  // -delta_ij + (gamma_ij - beta_i w_j) / w_i
    Eigen::MatrixXd hicksian;     // marshallian + eta w'
    Eigen::VectorXd eval_shares;  // evaluation point w
};

/// `w_bar` must be strictly positive and sum to one (1e-8). Dataset-mean
/// shares are the usual evaluation point; calling this per household row
/// yields an elasticity surface instead.
ElasticitySet compute_elasticities(const AidsParameters& params, const Eigen::VectorXd& w_bar);

struct ElasticityComparison {
    std::vector<std::string> items;
    Eigen::VectorXd expenditure_a, expenditure_b, expenditure_diff;
    Eigen::MatrixXd marshallian_diff, hicksian_diff;
    std::vector<std::string> flagged_expenditure;           // |diff| > threshold
    std::vector<std::pair<std::string, std::string>> flagged_marshallian;
    std::vector<std::pair<std::string, std::string>> flagged_hicksian;
    double threshold = 0.1;
    double max_abs_diff = 0.0;
    double mean_abs_diff = 0.0;
    std::size_t sign_agreements = 0; // over both price-elasticity matrices
    std::size_t sign_cells = 0;
};

ElasticityComparison compare_elasticities(const ElasticitySet& a, const ElasticitySet& b,
                                          double threshold = 0.1);

void write_elasticity_comparison_csv(const ElasticityComparison& cmp, const std::string& path);
void write_elasticity_comparison_json(const ElasticityComparison& cmp, const ElasticitySet& a,
                                      const ElasticitySet& b, const std::string& path);

} // namespace uniprice
