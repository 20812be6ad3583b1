#include "uniprice/dist_tests.hpp"
#include "uniprice/inequality.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

using namespace uniprice;

namespace {

// Brute-force KS statistic: evaluate both ECDFs at every pooled point.
double ks_brute_d(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> pooled = x;
    pooled.insert(pooled.end(), y.begin(), y.end());
    double best = 0.0;
    for (double v : pooled) {
        const auto fx = static_cast<double>(std::count_if(x.begin(), x.end(),
                                                          [&](double e) { return e <= v; })) /
                        static_cast<double>(x.size());
        const auto fy = static_cast<double>(std::count_if(y.begin(), y.end(),
                                                          [&](double e) { return e <= v; })) /
                        static_cast<double>(y.size());
        best = std::max(best, std::abs(fx - fy));
    }
    return best;
}

// Exact permutation p-value by enumerating every assignment of pooled ranks
// to the first sample. Tie-free inputs only; feasible up to pooled size ~20.
double ks_enum_p(std::size_t m, std::size_t n, std::uint64_t c_obs) {
    const std::size_t total = m + n;
    std::vector<std::size_t> comb(m);
    std::iota(comb.begin(), comb.end(), 0);
    std::size_t count_ge = 0, count_all = 0;
    while (true) {
        // walk the pooled ranks; i/j = how many x/y seen so far
        std::size_t i = 0, j = 0, pos = 0;
        std::uint64_t c = 0;
        for (std::size_t r = 0; r < total; ++r) {
            if (pos < m && comb[pos] == r) {
                ++i;
                ++pos;
            } else {
                ++j;
            }
            const auto dev = std::llabs(static_cast<long long>(i * n) -
                                        static_cast<long long>(j * m));
            c = std::max<std::uint64_t>(c, static_cast<std::uint64_t>(dev));
        }
        ++count_all;
        if (c >= c_obs) ++count_ge;
        // next combination
        std::size_t k = m;
        while (k > 0 && comb[k - 1] == total - m + k - 1) --k;
        if (k == 0) break;
        ++comb[k - 1];
        for (std::size_t l = k; l < m; ++l) comb[l] = comb[l - 1] + 1;
    }
    return static_cast<double>(count_ge) / static_cast<double>(count_all);
}

std::uint64_t ks_integer_numerator(const std::vector<double>& x, const std::vector<double>& y) {
    const double d = ks_brute_d(x, y);
    return static_cast<std::uint64_t>(
        std::llround(d * static_cast<double>(x.size()) * static_cast<double>(y.size())));
}

double brute_gini(const std::vector<double>& v) {
    double sum = 0.0, total = 0.0;
    for (double a : v) total += a;
    for (double a : v)
        for (double b : v) sum += std::abs(a - b);
    const double n = static_cast<double>(v.size());
    return sum / (2.0 * n * n * (total / n));
}

} // namespace

TEST_CASE("KS statistic basics") {
    SUBCASE("identical samples") {
        const std::vector<double> x = {1, 2, 3, 4};
        const auto res = ks_two_sample(x, x);
        CHECK(res.statistic == 0.0);
        CHECK(res.p_value == 1.0);
        CHECK(!res.reject);
    }

    SUBCASE("disjoint supports") {
        const auto res = ks_two_sample({1, 2}, {3, 4});
        CHECK(res.statistic == 1.0);
    }

    SUBCASE("interleaved samples hit 0.5 (step-enumeration oracle)") {
        const std::vector<double> x = {1, 3}, y = {2, 4};
        const auto res = ks_two_sample(x, y);
        CHECK(res.statistic == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(res.statistic == doctest::Approx(ks_brute_d(x, y)).epsilon(1e-15));
    }

    SUBCASE("empty sample is a contract error") {
        CHECK_THROWS_AS(ks_two_sample({}, {1.0}), std::invalid_argument);
    }
}

TEST_CASE("KS statistic matches the brute-force oracle on random pairs") {
    std::mt19937_64 rng(314);
    std::uniform_int_distribution<std::size_t> size(1, 100);
    std::uniform_real_distribution<double> value(0.0, 1.0);
    std::uniform_int_distribution<int> grid(0, 9);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> x(size(rng)), y(size(rng));
        const bool with_ties = trial % 3 == 0;
        for (auto& v : x) v = with_ties ? grid(rng) / 10.0 : value(rng);
        for (auto& v : y) v = with_ties ? grid(rng) / 10.0 : value(rng);
        const auto res = ks_two_sample(x, y);
        CHECK(res.statistic == doctest::Approx(ks_brute_d(x, y)).epsilon(1e-12));
    }
}

TEST_CASE("exact KS p-values match full enumeration for pooled sizes up to 20") {
    std::mt19937_64 rng(159);
    std::uniform_int_distribution<std::size_t> size(2, 10);
    std::uniform_real_distribution<double> value(0.0, 1.0);
    std::normal_distribution<double> shifted(0.4, 0.3);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<double> x(size(rng)), y(size(rng));
        for (auto& v : x) v = value(rng);
        for (auto& v : y) v = trial % 2 == 0 ? value(rng) : shifted(rng);
        const auto res = ks_two_sample(x, y);
        REQUIRE(res.method == "ks-exact-enumeration");
        const double p_oracle = ks_enum_p(x.size(), y.size(), ks_integer_numerator(x, y));
        CHECK(std::abs(res.p_value - p_oracle) <= 0.01);
        CHECK(std::abs(res.p_value - p_oracle) <= 1e-12); // the DP is itself exact
    }
}

TEST_CASE("KS properties") {
    std::mt19937_64 rng(26);
    std::uniform_real_distribution<double> value(0.0, 2.0);
    std::vector<double> x(40), y(60);
    for (auto& v : x) v = value(rng);
    for (auto& v : y) v = value(rng) + 0.2;

    SUBCASE("invariant under a common strictly increasing transform") {
        auto tx = x, ty = y;
        for (auto& v : tx) v = std::exp(v);
        for (auto& v : ty) v = std::exp(v);
        CHECK(ks_two_sample(tx, ty).statistic == ks_two_sample(x, y).statistic);
        auto ax = x, ay = y;
        for (auto& v : ax) v = std::atan(v);
        for (auto& v : ay) v = std::atan(v);
        CHECK(ks_two_sample(ax, ay).statistic == ks_two_sample(x, y).statistic);
    }

    SUBCASE("symmetric in its arguments") {
        const auto ab = ks_two_sample(x, y);
        const auto ba = ks_two_sample(y, x);
        CHECK(ab.statistic == ba.statistic);
        CHECK(ab.p_value == ba.p_value);
    }

    SUBCASE("p-values stay in [0,1] and the decision follows the level") {
        for (double level : {0.01, 0.05, 0.2}) {
            const auto res = ks_two_sample(x, y, level);
            CHECK(res.p_value >= 0.0);
            CHECK(res.p_value <= 1.0);
            CHECK(res.reject == (res.p_value < level));
        }
    }

    SUBCASE("asymptotic branch behaves at large samples") {
        std::vector<double> a(2000), b(2000);
        std::mt19937_64 g(77);
        std::normal_distribution<double> norm(0.0, 1.0);
        for (auto& v : a) v = norm(g);
        for (auto& v : b) v = norm(g);
        const auto same = ks_two_sample(a, b);
        CHECK(same.method == "ks-asymptotic");
        CHECK(same.p_value > 0.05);
        for (auto& v : b) v += 0.2;
        const auto shifted_res = ks_two_sample(a, b);
        CHECK(shifted_res.p_value < 0.01);
    }
}

TEST_CASE("kolmogorov distribution endpoints") {
    CHECK(kolmogorov_q(0.0) == 1.0);
    CHECK(kolmogorov_q(0.3) == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(kolmogorov_q(1.0) == doctest::Approx(0.26999967).epsilon(1e-6));
    CHECK(kolmogorov_q(2.0) == doctest::Approx(0.00067092).epsilon(1e-4));
    CHECK(kolmogorov_q(5.0) <= 1e-20);
    // both representations agree with a long alternating series, including
    // on either side of the internal branch switch
    for (double lambda : {0.4, 0.6, 0.9, 1.1, 1.17, 1.19, 1.3, 2.0}) {
        double series = 0.0, sign = 1.0;
        for (int k = 1; k <= 100; ++k) {
            series += sign * std::exp(-2.0 * k * k * lambda * lambda);
            sign = -sign;
        }
        CHECK(kolmogorov_q(lambda) == doctest::Approx(2.0 * series).epsilon(1e-9));
    }
}

TEST_CASE("Cramer statistic") {
    SUBCASE("identical multisets score zero") {
        Eigen::MatrixXd x(3, 2);
        x << 1, 2, 3, 4, 5, 6;
        CHECK(std::abs(cramer_statistic(x, x)) <= 1e-12);
    }

    SUBCASE("one-dimensional samples match a double-loop oracle") {
        std::mt19937_64 rng(41);
        std::uniform_real_distribution<double> value(0.0, 1.0);
        Eigen::MatrixXd x(7, 1), y(5, 1);
        for (Eigen::Index i = 0; i < 7; ++i) x(i, 0) = value(rng);
        for (Eigen::Index i = 0; i < 5; ++i) y(i, 0) = value(rng) + 0.3;
        double sxy = 0, sxx = 0, syy = 0;
        for (Eigen::Index i = 0; i < 7; ++i)
            for (Eigen::Index j = 0; j < 5; ++j) sxy += 0.5 * std::abs(x(i, 0) - y(j, 0));
        for (Eigen::Index i = 0; i < 7; ++i)
            for (Eigen::Index j = 0; j < 7; ++j) sxx += 0.5 * std::abs(x(i, 0) - x(j, 0));
        for (Eigen::Index i = 0; i < 5; ++i)
            for (Eigen::Index j = 0; j < 5; ++j) syy += 0.5 * std::abs(y(i, 0) - y(j, 0));
        const double expected = 35.0 / 12.0 * (2.0 / 35.0 * sxy - sxx / 49.0 - syy / 25.0);
        CHECK(cramer_statistic(x, y) == doctest::Approx(expected).epsilon(1e-12));
    }

    SUBCASE("invariant under a common orthogonal transform") {
        std::mt19937_64 rng(43);
        std::normal_distribution<double> norm(0.0, 1.0);
        Eigen::MatrixXd x(12, 3), y(9, 3);
        for (Eigen::Index i = 0; i < x.size(); ++i) x(i / 3, i % 3) = norm(rng);
        for (Eigen::Index i = 0; i < y.size(); ++i) y(i / 3, i % 3) = norm(rng) + 0.5;
        Eigen::MatrixXd raw(3, 3);
        for (Eigen::Index i = 0; i < 9; ++i) raw(i / 3, i % 3) = norm(rng);
        const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(raw).householderQ();
        const double base = cramer_statistic(x, y);
        const double rotated = cramer_statistic(x * q, y * q);
        CHECK(rotated == doctest::Approx(base).epsilon(1e-12));
        CHECK(base >= 0.0);
    }
}

TEST_CASE("Cramer permutation test") {
    SUBCASE("deterministic given the seed, contract checks") {
        Eigen::MatrixXd x(8, 2), y(8, 2);
        std::mt19937_64 rng(47);
        std::normal_distribution<double> norm(0.0, 1.0);
        for (Eigen::Index i = 0; i < x.size(); ++i) x(i / 2, i % 2) = norm(rng);
        for (Eigen::Index i = 0; i < y.size(); ++i) y(i / 2, i % 2) = norm(rng);
        const auto a = cramer_two_sample(x, y, 200, 7);
        const auto b = cramer_two_sample(x, y, 200, 7);
        CHECK(a.p_value == b.p_value);
        CHECK(a.statistic == b.statistic);
        Eigen::MatrixXd bad(8, 3);
        bad.setZero();
        CHECK_THROWS_AS(cramer_two_sample(x, bad, 200, 7), std::invalid_argument);
        CHECK_THROWS_AS(cramer_two_sample(x, y, 50, 7), std::invalid_argument);
    }

    SUBCASE("level calibration: same-distribution samples reject rarely") {
        int rejections = 0;
        for (std::uint64_t trial = 0; trial < 100; ++trial) {
            std::mt19937_64 rng(1000 + trial);
            std::normal_distribution<double> norm(0.0, 1.0);
            Eigen::MatrixXd x(20, 2), y(20, 2);
            for (Eigen::Index i = 0; i < x.size(); ++i) x(i / 2, i % 2) = norm(rng);
            for (Eigen::Index i = 0; i < y.size(); ++i) y(i / 2, i % 2) = norm(rng);
            if (cramer_two_sample(x, y, 1000, trial).reject) ++rejections;
        }
        CHECK(rejections <= 10);
    }

    SUBCASE("clearly separated samples reject") {
        std::mt19937_64 rng(53);
        std::normal_distribution<double> norm(0.0, 0.2);
        Eigen::MatrixXd x(30, 2), y(30, 2);
        for (Eigen::Index i = 0; i < x.size(); ++i) x(i / 2, i % 2) = norm(rng);
        for (Eigen::Index i = 0; i < y.size(); ++i) y(i / 2, i % 2) = norm(rng) + 2.0;
        CHECK(cramer_two_sample(x, y, 500, 9).reject);
    }
}

TEST_CASE("Gini significance comparison") {
    SUBCASE("identical samples have zero gap") {
        std::mt19937_64 rng(59);
        std::uniform_real_distribution<double> value(1.0, 9.0);
        std::vector<double> x(50);
        for (auto& v : x) v = value(rng);
        const auto cmp = gini_significance_compare(x, x);
        CHECK(cmp.phi_gap == 0.0);
        CHECK(!cmp.different);
    }

    SUBCASE("tie-free own-ECDF Gini is (n-1)/(3n) exactly (pairwise oracle)") {
        std::mt19937_64 rng(61);
        std::uniform_real_distribution<double> value(0.0, 100.0);
        for (std::size_t n : {std::size_t{5}, std::size_t{17}, std::size_t{100}}) {
            std::vector<double> x(n);
            for (auto& v : x) v = value(rng);
            const auto cmp = gini_significance_compare(x, x);
            const double expected = (static_cast<double>(n) - 1.0) / (3.0 * static_cast<double>(n));
            CHECK(cmp.gini_u1 == doctest::Approx(expected).epsilon(1e-12));
            // O(n^2) oracle on the rank transform
            std::vector<double> u(n);
            for (std::size_t k = 0; k < n; ++k)
                u[k] = static_cast<double>(k + 1) / static_cast<double>(n);
            CHECK(cmp.gini_u1 == doctest::Approx(brute_gini(u)).epsilon(1e-12));
        }
    }

    SUBCASE("symmetry and the 0.05 decision rule") {
        std::vector<double> x = {1, 1, 1, 1, 2, 3, 4, 50, 60, 70};
        std::vector<double> y = {5, 6, 7, 8, 9, 10, 11, 12, 13, 14};
        const auto ab = gini_significance_compare(x, y);
        const auto ba = gini_significance_compare(y, x);
        CHECK(ab.phi_gap == doctest::Approx(ba.phi_gap).epsilon(1e-15));
        CHECK(ab.phi_gap >= 0.0);
        CHECK(ab.phi_gap <= 1.0);
        CHECK(ab.different == (ab.phi_gap > 0.05));
        // heavy ties in x depress its rank Gini below the tie-free reference
        CHECK(ab.phi_gap > 0.0);
    }

    SUBCASE("cross-ECDF transform uses the pooled distribution") {
        std::vector<double> x = {1, 2, 3, 4, 5};
        std::vector<double> y = {100, 200, 300, 400, 500};
        const auto own = gini_significance_compare(x, y, false);
        const auto cross = gini_significance_compare(x, y, true);
        CHECK(own.phi_gap == doctest::Approx(0.0).epsilon(1e-12)); // same n, both tie-free
        CHECK(cross.phi_gap > own.phi_gap);                        // separation now visible
    }

    SUBCASE("normal CDF sanity") {
        CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(normal_cdf(1.959963985) == doctest::Approx(0.975).epsilon(1e-6));
        CHECK(normal_cdf(-5.0) <= 3e-7);
    }
}
