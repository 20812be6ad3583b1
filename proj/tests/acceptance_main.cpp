// Acceptance suite: end-to-end checks of the library against independent
// oracles and the published tolerances. Prints one PASS/FAIL line per
// criterion and exits nonzero if any fails.
//
// Usage: acceptance [path-to-cli-binary]

#include "uniprice/aids.hpp"
#include "uniprice/calibration.hpp"
#include "uniprice/dist_tests.hpp"
#include "uniprice/elasticities.hpp"
#include "uniprice/inequality.hpp"
#include "uniprice/pipeline.hpp"
#include "uniprice/survey_data.hpp"
#include "uniprice/synthetic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <map>
#include <sstream>
#include <string>
#include <vector>

using namespace uniprice;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int number, const std::string& name, bool pass, const std::string& detail) {
    std::printf("%s criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL", number, name.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

SyntheticConfig acceptance_config(std::size_t n_items, std::size_t n_households,
                                  std::size_t n_fsus, std::uint64_t seed) {
    SyntheticConfig c;
    c.n_items = n_items;
    c.n_households = n_households;
    c.n_fsus = n_fsus;
    c.n_states = 4;
    c.seed = seed;
    c.between_fsu_price_sd = 0.25;
    c.expenditure_log_sd = 0.4;
    c.true_params = make_random_restricted_params(n_items, seed, 0.04, 0.03);
    return c;
}

double max_param_diff(const AidsParameters& a, const AidsParameters& b) {
    double d = (a.alpha - b.alpha).cwiseAbs().maxCoeff();
    d = std::max(d, (a.beta - b.beta).cwiseAbs().maxCoeff());
    d = std::max(d, (a.gamma - b.gamma).cwiseAbs().maxCoeff());
    return d;
}

// --- criterion 1: restriction closure on 50 random fits -------------------

void criterion_1() {
    const auto start = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        auto cfg = acceptance_config(4, 2000, 200, seed);
        cfg.share_noise_sd = 0.01;
        cfg.state_effect_sd = 0.01;
        const auto res = generate(cfg);
        const auto report_fit = fit_la_aids(res.dataset);
        worst = std::max(worst, report_fit.parameters.restriction_residuals().maxCoeff());
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ostringstream detail;
    detail << "worst restriction residual " << worst << ", " << seconds << " s";
    report(1, "restriction suite across 50 random fits", worst <= 1e-8 && seconds < 60.0,
           detail.str());
}

// --- criterion 2: noiseless and noisy identification ----------------------

void criterion_2() {
    auto clean_cfg = acceptance_config(4, 2000, 200, 11);
    const auto clean = generate(clean_cfg);
    const double clean_err =
        max_param_diff(fit_la_aids(clean.dataset).parameters, clean_cfg.true_params);

    auto noisy_cfg = acceptance_config(4, 5000, 500, 12);
    noisy_cfg.share_noise_sd = 0.01;
    const auto noisy = generate(noisy_cfg);
    const double noisy_err =
        max_param_diff(fit_la_aids(noisy.dataset).parameters, noisy_cfg.true_params);

    std::ostringstream detail;
    detail << "noiseless " << clean_err << " (<= 1e-8), noisy " << noisy_err << " (<= 0.02)";
    report(2, "noiseless and noisy identification",
           clean.truth.clamped_rows == 0 && noisy.truth.clamped_rows == 0 && clean_err <= 1e-8 &&
               noisy_err <= 0.02,
           detail.str());
}

// --- criterion 3: Gini against the O(n^2) oracle and the uniform limit ----

double brute_gini(const std::vector<double>& v) {
    double sum = 0.0, total = 0.0;
    for (double a : v) total += a;
    for (double a : v)
        for (double b : v) sum += std::abs(a - b);
    const double n = static_cast<double>(v.size());
    return sum / (2.0 * n * n * (total / n));
}

void criterion_3() {
    std::mt19937_64 rng(31);
    std::lognormal_distribution<double> dist(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> size(2, 500);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> sample(size(rng));
        for (auto& v : sample) v = dist(rng);
        worst = std::max(worst, std::abs(gini_index(sample).gini - brute_gini(sample)));
    }
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> uniform_sample(10000);
    for (auto& v : uniform_sample) v = unif(rng);
    const double uniform_gap = std::abs(gini_index(uniform_sample).gini - 1.0 / 3.0);
    const double bound = 3.0 * std::sqrt(8.0 / 135.0 / 10000.0);

    std::ostringstream detail;
    detail << "max |fast - brute| " << worst << " (<= 1e-12), |G - 1/3| " << uniform_gap << " (<= "
           << bound << ")";
    report(3, "Gini correctness", worst <= 1e-12 && uniform_gap <= bound, detail.str());
}

// --- criterion 4: KS against enumeration oracles ---------------------------

std::uint64_t ks_numerator_oracle(const std::vector<double>& x, const std::vector<double>& y) {
    // integer sup of |i*n - j*m| over the pooled step points
    std::uint64_t best = 0;
    std::vector<double> pooled = x;
    pooled.insert(pooled.end(), y.begin(), y.end());
    for (double v : pooled) {
        const auto i = static_cast<std::uint64_t>(
            std::count_if(x.begin(), x.end(), [&](double e) { return e <= v; }));
        const auto j = static_cast<std::uint64_t>(
            std::count_if(y.begin(), y.end(), [&](double e) { return e <= v; }));
        const auto a = static_cast<long long>(i * y.size());
        const auto b = static_cast<long long>(j * x.size());
        best = std::max<std::uint64_t>(best, static_cast<std::uint64_t>(std::llabs(a - b)));
    }
    return best;
}

double ks_enum_p_oracle(std::size_t m, std::size_t n, std::uint64_t c_obs) {
    const std::size_t total = m + n;
    std::vector<std::size_t> comb(m);
    std::iota(comb.begin(), comb.end(), 0);
    std::size_t count_ge = 0, count_all = 0;
    while (true) {
        std::size_t i = 0, j = 0, pos = 0;
        std::uint64_t c = 0;
        for (std::size_t r = 0; r < total; ++r) {
            if (pos < m && comb[pos] == r) {
                ++i;
                ++pos;
            } else {
                ++j;
            }
            c = std::max<std::uint64_t>(
                c, static_cast<std::uint64_t>(std::llabs(static_cast<long long>(i * n) -
                                                         static_cast<long long>(j * m))));
        }
        ++count_all;
        if (c >= c_obs) ++count_ge;
        std::size_t k = m;
        while (k > 0 && comb[k - 1] == total - m + k - 1) --k;
        if (k == 0) break;
        ++comb[k - 1];
        for (std::size_t l = k; l < m; ++l) comb[l] = comb[l - 1] + 1;
    }
    return static_cast<double>(count_ge) / static_cast<double>(count_all);
}

void criterion_4() {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> value(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> size(1, 100);
    bool d_exact = true;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> x(size(rng)), y(size(rng));
        for (auto& v : x) v = value(rng);
        for (auto& v : y) v = value(rng) + (trial % 2 == 0 ? 0.0 : 0.2);
        const auto res = ks_two_sample(x, y);
        const double d_oracle = static_cast<double>(ks_numerator_oracle(x, y)) /
                                (static_cast<double>(x.size()) * static_cast<double>(y.size()));
        if (res.statistic != d_oracle) d_exact = false;
    }

    std::uniform_int_distribution<std::size_t> small(2, 10);
    double worst_p = 0.0;
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<double> x(small(rng)), y(small(rng));
        for (auto& v : x) v = value(rng);
        for (auto& v : y) v = value(rng) + (trial % 2 == 0 ? 0.0 : 0.3);
        const auto res = ks_two_sample(x, y);
        const double p_oracle =
            ks_enum_p_oracle(x.size(), y.size(), ks_numerator_oracle(x, y));
        worst_p = std::max(worst_p, std::abs(res.p_value - p_oracle));
    }

    std::ostringstream detail;
    detail << "D exact: " << (d_exact ? "yes" : "no") << ", max |p - enum| " << worst_p
           << " (<= 0.01)";
    report(4, "KS oracle equivalence", d_exact && worst_p <= 0.01, detail.str());
}

// --- criterion 5: elasticity identities ------------------------------------

void criterion_5() {
    double worst_slutsky = 0.0, worst_engel = 0.0, worst_homog = 0.0, worst_cournot = 0.0;
    std::mt19937_64 rng(51);
    std::uniform_real_distribution<double> unif(0.3, 1.7);
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        const auto p = make_random_restricted_params(seed % 4 + 3, seed);
        Eigen::VectorXd w(static_cast<Eigen::Index>(p.n_items()));
        for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = unif(rng);
        w /= w.sum();
        const auto e = compute_elasticities(p, w);
        const auto n = w.size();
        for (Eigen::Index i = 0; i < n; ++i) {
            worst_homog = std::max(worst_homog,
                                   std::abs(e.marshallian.row(i).sum() + e.expenditure(i)));
            for (Eigen::Index j = 0; j < n; ++j)
                worst_slutsky = std::max(
                    worst_slutsky, std::abs(e.hicksian(i, j) - (e.marshallian(i, j) +
                                                                e.expenditure(i) * w(j))));
        }
        worst_engel = std::max(worst_engel, std::abs(w.dot(e.expenditure) - 1.0));
        for (Eigen::Index j = 0; j < n; ++j) {
            double acc = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) acc += w(i) * e.marshallian(i, j);
            worst_cournot = std::max(worst_cournot, std::abs(acc + w(j)));
        }
    }
    std::ostringstream detail;
    detail << "slutsky " << worst_slutsky << " engel " << worst_engel << " homogeneity "
           << worst_homog << " cournot " << worst_cournot;
    report(5, "elasticity identities on 50 random parameter sets",
           worst_slutsky <= 1e-12 && worst_engel <= 1e-10 && worst_homog <= 1e-10 &&
               worst_cournot <= 1e-10,
           detail.str());
}

// --- criterion 6: measurement-error recovery -------------------------------

void criterion_6() {
    int grid_hits = 0, identity_hits = 0;
    bool ratio_ok = true, corrected_ok = true;
    double worst_corrected = 0.0, worst_ratio = std::numeric_limits<double>::infinity();
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto cfg = acceptance_config(4, 5000, 500, seed);
        const auto res = generate(cfg);

        CalibrationSpec star;
        star.theta1 = 0.8;
        const auto corrupted = apply_measurement_model(res.dataset, star, 0.05, 0.0, seed + 999);

        const auto naive = fit_la_aids(corrupted);
        // corrected estimator: refit on the reconstructed covariates; the
        // closed-form coefficient correction must land in the same band
        const auto corrected = fit_with_calibration(corrupted, star).parameters;
        const auto lambda_corrected = correct_parameters(naive.parameters, star);
        const double naive_err = (naive.parameters.beta - cfg.true_params.beta).cwiseAbs().maxCoeff();
        const double corr_err = (corrected.beta - cfg.true_params.beta).cwiseAbs().maxCoeff();
        const double lambda_err =
            (lambda_corrected.beta - cfg.true_params.beta).cwiseAbs().maxCoeff();
        worst_corrected = std::max(worst_corrected, std::max(corr_err, lambda_err));
        worst_ratio = std::min(worst_ratio, naive_err / corr_err);
        if (!(naive_err > 5.0 * corr_err)) ratio_ok = false;
        if (!(corr_err <= 0.03 && lambda_err <= 0.03)) corrected_ok = false;

        std::vector<CalibrationSpec> grid;
        for (double t1 : {0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2}) {
            CalibrationSpec s;
            s.theta1 = t1;
            grid.push_back(s);
        }
        const auto on_corrupted = grid_search(corrupted, grid, 10, seed);
        if (std::abs(on_corrupted.best_l1_point().spec.theta1 - 0.8) <= 0.1 + 1e-9 &&
            std::abs(on_corrupted.best_l2_point().spec.theta1 - 0.8) <= 0.1 + 1e-9)
            ++grid_hits;

        const auto on_clean = grid_search(res.dataset, grid, 10, seed);
        if (on_clean.best_l1_point().spec.theta1 == 1.0 &&
            on_clean.best_l2_point().spec.theta1 == 1.0)
            ++identity_hits;
    }
    std::ostringstream detail;
    detail << "grid hits " << grid_hits << "/20, identity on clean " << identity_hits
           << "/20, worst corrected error " << worst_corrected << ", min naive/corrected ratio "
           << worst_ratio;
    report(6, "measurement-error recovery",
           grid_hits >= 18 && identity_hits >= 18 && ratio_ok && corrected_ok, detail.str());
}

// --- criterion 7: uniform-price preservation --------------------------------

void criterion_7() {
    int ks_all_accept = 0;
    bool gini_ok = true, elasticity_ok = true;
    double worst_gap = 0.0, worst_eta_diff = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto cfg = acceptance_config(4, 2000, 200, seed); // 200 FSUs x 10 households
        cfg.within_fsu_price_sd = 0.002;                  // 0.8% of the between-FSU sd
        cfg.share_noise_sd = 0.01;
        cfg.state_effect_sd = 0.01;
        const auto res = generate(cfg);
        const auto uniform = uniformize_prices(res.dataset, PriceStrategy::Median);

        const auto fit_orig = fit_la_aids(res.dataset);
        const auto fit_unif = fit_la_aids(uniform);
        const auto pred_orig =
            predict_shares(fit_orig.parameters, res.dataset, fit_orig.stone_weights);
        const auto pred_unif = predict_shares(fit_unif.parameters, uniform, fit_unif.stone_weights);

        bool all_accept = true;
        for (Eigen::Index j = 0; j < pred_orig.cols(); ++j) {
            std::vector<double> a(pred_orig.col(j).data(), pred_orig.col(j).data() + pred_orig.rows());
            std::vector<double> b(pred_unif.col(j).data(), pred_unif.col(j).data() + pred_unif.rows());
            if (ks_two_sample(a, b, 0.05).reject) all_accept = false;
        }
        if (all_accept) ++ks_all_accept;

        for (const auto& item : res.dataset.items) {
            const auto e_orig = item_expenditures(res.dataset, item);
            const auto e_unif = item_expenditures_repriced(uniform, res.dataset, item);
            const double gap = gini_significance_compare(e_orig, e_unif).phi_gap;
            worst_gap = std::max(worst_gap, gap);
            if (gap > 0.05) gini_ok = false;
        }

        const Eigen::VectorXd w_orig = res.dataset.shares.colwise().mean();
        const Eigen::VectorXd w_unif = uniform.shares.colwise().mean();
        const auto el_orig = compute_elasticities(fit_orig.parameters, w_orig);
        const auto el_unif = compute_elasticities(fit_unif.parameters, w_unif);
        const double eta_diff =
            (el_orig.expenditure - el_unif.expenditure).cwiseAbs().maxCoeff();
        worst_eta_diff = std::max(worst_eta_diff, eta_diff);
        if (eta_diff > 0.05) elasticity_ok = false;
    }
    std::ostringstream detail;
    detail << "KS all-accept " << ks_all_accept << "/20, worst Gini phi-gap " << worst_gap
           << " (<= 0.05), worst expenditure-elasticity diff " << worst_eta_diff << " (<= 0.05)";
    report(7, "uniform-price preservation", ks_all_accept >= 18 && gini_ok && elasticity_ok,
           detail.str());
}

// --- criterion 8: calibration matrix algebra --------------------------------

void criterion_8() {
    const auto identity_cm = build_calibration_matrix(
        CalibrationSpec::identity(CalibrationMode::ExpenditureAndPrices), 4);
    const bool identity_exact =
        (identity_cm.lambda - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() == 0.0;

    std::mt19937_64 rng(81);
    std::uniform_real_distribution<double> small(-0.1, 0.1);
    std::uniform_real_distribution<double> slope(0.5, 1.5);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        CalibrationSpec s;
        s.theta0 = small(rng);
        s.theta1 = slope(rng);
        s.theta2 = small(rng);
        s.theta3 = slope(rng);
        s.mode = CalibrationMode::ExpenditureAndPrices;
        const auto cm = build_calibration_matrix(s, 5);
        worst = std::max(worst, (cm.lambda * cm.inverse -
                                 Eigen::MatrixXd::Identity(cm.lambda.rows(), cm.lambda.cols()))
                                    .cwiseAbs()
                                    .maxCoeff());
    }

    const auto p = make_random_restricted_params(4, 82);
    const auto corrected = correct_parameters(p, CalibrationSpec::identity());
    const bool correct_identity = max_param_diff(corrected, p) == 0.0;

    std::ostringstream detail;
    detail << "identity exact: " << (identity_exact ? "yes" : "no") << ", worst |L*Linv - I| "
           << worst << " (<= 1e-12), identity correction exact: "
           << (correct_identity ? "yes" : "no");
    report(8, "calibration matrix algebra", identity_exact && worst <= 1e-12 && correct_identity,
           detail.str());
}

// --- criterion 9: end-to-end pipeline determinism ---------------------------

std::string read_file_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

bool run_pipeline(const std::string& cli, const fs::path& dir, const fs::path& config) {
    const std::string base = "\"" + cli + "\"";
    const std::string cfg = " --config \"" + config.string() + "\"";
    const std::string out_dir = " --output-dir \"" + dir.string() + "\"";
    auto run = [&](const std::string& args) {
        const std::string cmd = base + " " + args + cfg + out_dir;
        return std::system(cmd.c_str()) == 0;
    };
    if (!run("simulate")) return false;
    if (!run("uniformize --input \"" + (dir / "dataset.csv").string() + "\"")) return false;
    const std::string pair = " --input \"" + (dir / "dataset.csv").string() + "\" --input-alt \"" +
                             (dir / "dataset_uniform.csv").string() + "\"";
    if (!run("fit --input \"" + (dir / "dataset.csv").string() + "\"")) return false;
    if (!run("state-effects --input \"" + (dir / "dataset.csv").string() + "\"")) return false;
    if (!run("compare-shares" + pair)) return false;
    if (!run("mecor-cv --input \"" + (dir / "dataset.csv").string() + "\"")) return false;
    if (!run("inequality" + pair)) return false;
    if (!run("elasticities" + pair)) return false;
    return true;
}

void criterion_9(const std::string& cli) {
    const auto start = std::chrono::steady_clock::now();
    const fs::path root = fs::temp_directory_path() / "uniprice_acceptance";
    fs::remove_all(root);
    fs::create_directories(root);

    const fs::path config = root / "config.json";
    {
        std::ofstream out(config);
        out << R"({
  "seed": 20240614,
  "level": 0.05,
  "folds": 10,
  "strategy": "median",
  "cramer_permutations": 150,
  "cramer_max_rows": 250,
  "grid": [{"theta1": 0.9}, {"theta1": 1.0}, {"theta1": 1.1}],
  "synthetic": {
    "n_items": 4, "n_households": 2000, "n_fsus": 200, "n_states": 4,
    "seed": 20240614, "between_fsu_price_sd": 0.25, "within_fsu_price_sd": 0.002,
    "expenditure_log_sd": 0.4, "share_noise_sd": 0.01, "state_effect_sd": 0.01
  }
})";
    }

    // run twice into the same output directory; the second run must
    // regenerate every file byte for byte
    const fs::path out = root / "run";
    const bool ran_a = run_pipeline(cli, out, config);
    std::map<std::string, std::string> snapshot;
    if (ran_a)
        for (const auto& entry : fs::recursive_directory_iterator(out))
            if (entry.is_regular_file())
                snapshot[fs::relative(entry.path(), out).string()] = read_file_bytes(entry.path());
    const bool ran_b = ran_a && run_pipeline(cli, out, config);

    bool identical = ran_a && ran_b;
    std::size_t files = snapshot.size();
    std::string first_mismatch;
    if (identical) {
        std::size_t files_after = 0;
        for (const auto& entry : fs::recursive_directory_iterator(out)) {
            if (!entry.is_regular_file()) continue;
            ++files_after;
            const auto rel = fs::relative(entry.path(), out).string();
            auto it = snapshot.find(rel);
            if (it == snapshot.end() || it->second != read_file_bytes(entry.path())) {
                identical = false;
                if (first_mismatch.empty()) first_mismatch = rel;
            }
        }
        if (files_after != files) identical = false;
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    std::ostringstream detail;
    detail << files << " files compared, " << seconds << " s";
    if (!ran_a || !ran_b) detail << ", pipeline run failed";
    if (!first_mismatch.empty()) detail << ", first mismatch: " << first_mismatch;
    report(9, "end-to-end pipeline determinism", identical && seconds < 300.0, detail.str());
    if (identical) fs::remove_all(root);
}

} // namespace

int main(int argc, char** argv) {
    const std::string cli = argc > 1 ? argv[1] : "./uniprice";
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9(cli);
    if (g_failures > 0) {
        std::printf("%d criterion(s) failed\n", g_failures);
        return 1;
    }
    std::printf("all 9 criteria passed\n");
    return 0;
}
