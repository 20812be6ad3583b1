#include "uniprice/synthetic.hpp"

#include "uniprice/errors.hpp"
#include "internal_util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

namespace uniprice {

void SyntheticConfig::validate() const {
    if (n_items < 2) throw DataError("synthetic config needs at least 2 items");
    if (n_households == 0 || n_fsus == 0 || n_states == 0)
        throw DataError("synthetic config counts must be positive");
    if (n_fsus > n_households) throw DataError("more FSUs than households");
    if ((n_households + n_fsus - 1) / n_fsus > 100)
        throw DataError("households per FSU cannot exceed 100 (two-digit household suffix)");
    if (within_fsu_price_sd < 0 || between_fsu_price_sd < 0 || state_effect_sd < 0 ||
        share_noise_sd < 0 || expenditure_log_sd < 0)
        throw DataError("synthetic config dispersions must be nonnegative");
    if (true_params.n_items() != n_items)
        throw DataError("true parameter dimension does not match n_items");
    true_params.validate();
    if (!log_price_base.empty() && log_price_base.size() != n_items)
        throw DataError("log_price_base length does not match n_items");
}

AidsParameters make_random_restricted_params(std::size_t n_items, std::uint64_t seed,
                                             double beta_scale, double gamma_scale) {
    auto rng = detail::sub_rng(seed, 0x9a9a);
    std::uniform_real_distribution<double> unif(0.5, 1.5);
    const auto n = static_cast<Eigen::Index>(n_items);

    AidsParameters p;
    p.items.reserve(n_items);
    for (std::size_t i = 0; i < n_items; ++i) p.items.push_back("i" + std::to_string(100 + i));

    p.alpha.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) p.alpha(i) = unif(rng);
    p.alpha /= p.alpha.sum();

    p.beta.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) p.beta(i) = detail::draw_normal(rng, beta_scale);
    p.beta.array() -= p.beta.mean();

    Eigen::MatrixXd g(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) g(i, j) = detail::draw_normal(rng, gamma_scale);
    g = 0.5 * (g + g.transpose()).eval();
    const Eigen::VectorXd row_means = g.rowwise().mean();
    const double grand = g.mean();
    p.gamma = g - row_means.replicate(1, n) - row_means.transpose().replicate(n, 1) +
              Eigen::MatrixXd::Constant(n, n, grand);
    return p;
}

namespace {

std::string zero_pad(std::size_t value, std::size_t width) {
    std::string s = std::to_string(value);
    return s.size() >= width ? s : std::string(width - s.size(), '0') + s;
}

} // namespace

SyntheticResult generate(const SyntheticConfig& config) {
    config.validate();
    const auto n = static_cast<Eigen::Index>(config.n_items);
    const auto L = static_cast<Eigen::Index>(config.n_households);
    const auto F = static_cast<Eigen::Index>(config.n_fsus);
    const auto& params = config.true_params;

    // FSU mean prices from a dedicated substream per FSU.
    Eigen::MatrixXd fsu_means(F, n);
    for (Eigen::Index f = 0; f < F; ++f) {
        auto rng = detail::sub_rng(config.seed, 0x1000 + static_cast<std::uint64_t>(f));
        for (Eigen::Index j = 0; j < n; ++j) {
            const double base =
                config.log_price_base.empty() ? 0.0 : config.log_price_base[static_cast<std::size_t>(j)];
            fsu_means(f, j) = base + detail::draw_normal(rng, config.between_fsu_price_sd);
        }
    }

    // Households round-robin over FSUs; hhid = padded FSU index + 2-digit
    // position so truncation recovers the FSU.
    std::vector<Eigen::Index> fsu_of(static_cast<std::size_t>(L));
    std::vector<std::size_t> within(static_cast<std::size_t>(L));
    for (Eigen::Index h = 0; h < L; ++h) {
        fsu_of[static_cast<std::size_t>(h)] = h % F;
        within[static_cast<std::size_t>(h)] = static_cast<std::size_t>(h / F);
    }
    const std::size_t fsu_width = std::max<std::size_t>(4, std::to_string(config.n_fsus).size());

    Eigen::MatrixXd log_prices(L, n);
    Eigen::VectorXd log_expenditure(L);
    for (Eigen::Index h = 0; h < L; ++h) {
        auto rng = detail::sub_rng(config.seed, 0x2000 + static_cast<std::uint64_t>(h));
        for (Eigen::Index j = 0; j < n; ++j)
            log_prices(h, j) =
                fsu_means(fsu_of[static_cast<std::size_t>(h)], j) +
                detail::draw_normal(rng, config.within_fsu_price_sd);
        log_expenditure(h) =
            config.expenditure_log_mean + detail::draw_normal(rng, config.expenditure_log_sd);
    }

    // Double-centered state effects: zero mean per item across states and
    // zero sum per state across items, so adding-up survives.
    Eigen::MatrixXd state_fx = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(config.n_states), n);
    if (config.state_effect_sd > 0 && config.n_states > 1) {
        auto rng = detail::sub_rng(config.seed, 0x3000);
        for (Eigen::Index k = 0; k < state_fx.rows(); ++k)
            for (Eigen::Index j = 0; j < n; ++j)
                state_fx(k, j) = detail::draw_normal(rng, config.state_effect_sd);
        const Eigen::VectorXd row_means = state_fx.rowwise().mean();
        const Eigen::RowVectorXd col_means = state_fx.colwise().mean();
        const double grand = state_fx.mean();
        state_fx = state_fx - row_means.replicate(1, n) -
                   col_means.replicate(state_fx.rows(), 1) +
                   Eigen::MatrixXd::Constant(state_fx.rows(), n, grand);
    }
    std::vector<Eigen::Index> state_of(static_cast<std::size_t>(L));
    for (Eigen::Index h = 0; h < L; ++h)
        state_of[static_cast<std::size_t>(h)] =
            fsu_of[static_cast<std::size_t>(h)] % static_cast<Eigen::Index>(config.n_states);

    // Share noise on the first n-1 equations; the last share closes the row.
    Eigen::MatrixXd noise = Eigen::MatrixXd::Zero(L, n - 1);
    if (config.share_noise_sd > 0) {
        auto rng = detail::sub_rng(config.seed, 0x4000);
        for (Eigen::Index h = 0; h < L; ++h)
            for (Eigen::Index i = 0; i < n - 1; ++i)
                noise(h, i) = detail::draw_normal(rng, config.share_noise_sd);
    }

    // Solve for Stone weights u with empirical mean shares equal to u. The
    // mean of each generated share is affine in t = u . mean(log p), so t has
    // a closed form and u follows.
    const Eigen::VectorXd p_bar = log_prices.colwise().mean();
    const double x_bar = log_expenditure.mean();
    Eigen::VectorXd sigma_bar = Eigen::VectorXd::Zero(n); // mean state effect per item
    for (Eigen::Index h = 0; h < L; ++h)
        sigma_bar += state_fx.row(state_of[static_cast<std::size_t>(h)]).transpose();
    sigma_bar /= static_cast<double>(L);
    Eigen::VectorXd noise_bar = Eigen::VectorXd::Zero(n);
    noise_bar.head(n - 1) = noise.colwise().mean();
    noise_bar(n - 1) = -noise_bar.head(n - 1).sum();

    const Eigen::VectorXd a =
        params.alpha + params.gamma * p_bar + x_bar * params.beta + sigma_bar + noise_bar;
    // u_i = a_i - beta_i * t for every item (the closing item inherits the
    // same form through the restrictions), so t = (a . p_bar) / (1 + beta . p_bar).
    const double denom = 1.0 + params.beta.dot(p_bar);
    if (std::abs(denom) < 1e-8)
        throw DataError("degenerate configuration: beta . mean log price is near -1");
    const double t = a.dot(p_bar) / denom;
    const Eigen::VectorXd stone_weights = a - t * params.beta;

    GroundTruth truth;
    truth.params = params;
    truth.stone_weights = stone_weights;
    truth.fsu_mean_log_prices = fsu_means;
    truth.seed = config.seed;
    truth.log_price_index = log_prices * stone_weights;
    truth.expected_shares.resize(L, n);

    DemandDataset data;
    data.items = params.items;
    data.log_prices = log_prices;
    data.shares.resize(L, n);
    data.group_expenditure = log_expenditure.array().exp();
    data.weight = Eigen::VectorXd::Ones(L);
    data.hhid.reserve(static_cast<std::size_t>(L));
    data.state.reserve(static_cast<std::size_t>(L));
    data.fsu_id.reserve(static_cast<std::size_t>(L));

    std::size_t clamped = 0;
    for (Eigen::Index h = 0; h < L; ++h) {
        const double z = log_expenditure(h) - truth.log_price_index(h);
        Eigen::VectorXd expected =
            params.alpha + params.gamma * log_prices.row(h).transpose() + z * params.beta +
            state_fx.row(state_of[static_cast<std::size_t>(h)]).transpose();
        truth.expected_shares.row(h) = expected.transpose();

        Eigen::VectorXd w(n);
        w.head(n - 1) = expected.head(n - 1) + noise.row(h).transpose();
        w(n - 1) = 1.0 - w.head(n - 1).sum();
        if ((w.array() < 0.0).any() || (w.array() > 1.0).any()) {
            ++clamped;
            w = w.cwiseMax(0.0).cwiseMin(1.0);
            const double s = w.sum();
            if (s <= 0.0) throw DataError("clamping produced an empty share row");
            w /= s;
        }
        data.shares.row(h) = w.transpose();

        const auto f = static_cast<std::size_t>(fsu_of[static_cast<std::size_t>(h)]);
        const std::string fsu_str = zero_pad(f + 1, fsu_width);
        data.hhid.push_back(fsu_str + zero_pad(within[static_cast<std::size_t>(h)] + 1, 2));
        data.fsu_id.push_back(fsu_str);
        data.state.push_back(
            "S" + zero_pad(static_cast<std::size_t>(state_of[static_cast<std::size_t>(h)]) + 1, 2));
    }
    truth.clamped_rows = clamped;
    if (static_cast<double>(clamped) > 0.05 * static_cast<double>(L))
        throw DataError("more than 5% of generated rows needed clamping; use gentler noise "
                        "or smaller state effects");

    for (Eigen::Index k = 0; k < state_fx.rows(); ++k)
        truth.state_effects["S" + zero_pad(static_cast<std::size_t>(k) + 1, 2)] =
            state_fx.row(k).transpose();

    data.validate();
    return {std::move(data), std::move(truth)};
}

namespace {

nlohmann::json vec_json(const Eigen::VectorXd& v) {
    nlohmann::json a = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

Eigen::VectorXd vec_from(const nlohmann::json& a) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
    return v;
}

nlohmann::json mat_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vec_json(m.row(i).transpose()));
    return rows;
}

Eigen::MatrixXd mat_from(const nlohmann::json& rows) {
    const auto r = static_cast<Eigen::Index>(rows.size());
    if (r == 0) return {};
    const auto c = static_cast<Eigen::Index>(rows[0].size());
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        m.row(i) = vec_from(rows[static_cast<std::size_t>(i)]).transpose();
    return m;
}

} // namespace

namespace {

SyntheticConfig synthetic_config_from_json(const nlohmann::json& j) {
    SyntheticConfig c;
    c.n_items = j.value("n_items", c.n_items);
    c.n_households = j.value("n_households", c.n_households);
    c.n_fsus = j.value("n_fsus", c.n_fsus);
    c.n_states = j.value("n_states", c.n_states);
    c.within_fsu_price_sd = j.value("within_fsu_price_sd", c.within_fsu_price_sd);
    c.between_fsu_price_sd = j.value("between_fsu_price_sd", c.between_fsu_price_sd);
    c.expenditure_log_mean = j.value("expenditure_log_mean", c.expenditure_log_mean);
    c.expenditure_log_sd = j.value("expenditure_log_sd", c.expenditure_log_sd);
    c.state_effect_sd = j.value("state_effect_sd", c.state_effect_sd);
    c.share_noise_sd = j.value("share_noise_sd", c.share_noise_sd);
    c.seed = j.value("seed", c.seed);
    if (j.contains("log_price_base"))
        c.log_price_base = j["log_price_base"].get<std::vector<double>>();
    if (j.contains("true_params")) {
        const auto& p = j["true_params"];
        AidsParameters tp;
        tp.items = p.at("items").get<std::vector<std::string>>();
        tp.alpha = vec_from(p.at("alpha"));
        tp.beta = vec_from(p.at("beta"));
        tp.gamma = mat_from(p.at("gamma"));
        c.true_params = std::move(tp);
        if (c.true_params.n_items() != c.n_items)
            throw ConfigError("true_params item count disagrees with n_items");
    } else {
        c.true_params = make_random_restricted_params(c.n_items, c.seed);
    }
    return c;
}

} // namespace

SyntheticConfig synthetic_config_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open synthetic config: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("invalid synthetic config JSON in " + path + ": " + e.what());
    }
    return synthetic_config_from_json(j);
}

SyntheticConfig synthetic_config_from_json_string(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid synthetic config JSON: ") + e.what());
    }
    return synthetic_config_from_json(j);
}

void write_ground_truth_json(const GroundTruth& truth, const std::string& path) {
    nlohmann::json j;
    j["seed"] = truth.seed;
    j["items"] = truth.params.items;
    j["alpha"] = vec_json(truth.params.alpha);
    j["beta"] = vec_json(truth.params.beta);
    j["gamma"] = mat_json(truth.params.gamma);
    j["stone_weights"] = vec_json(truth.stone_weights);
    j["fsu_mean_log_prices"] = mat_json(truth.fsu_mean_log_prices);
    nlohmann::json fx = nlohmann::json::object();
    for (const auto& [state, v] : truth.state_effects) fx[state] = vec_json(v);
    j["state_effects"] = fx;
    j["log_price_index"] = vec_json(truth.log_price_index);
    j["expected_shares"] = mat_json(truth.expected_shares);
    j["clamped_rows"] = truth.clamped_rows;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write ground truth JSON: " + path);
    out << j.dump(2) << "\n";
}

GroundTruth read_ground_truth_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open ground truth JSON: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("invalid ground truth JSON in " + path + ": " + e.what());
    }
    GroundTruth t;
    t.seed = j.value("seed", 0ULL);
    t.params.items = j.at("items").get<std::vector<std::string>>();
    t.params.alpha = vec_from(j.at("alpha"));
    t.params.beta = vec_from(j.at("beta"));
    t.params.gamma = mat_from(j.at("gamma"));
    t.stone_weights = vec_from(j.at("stone_weights"));
    t.fsu_mean_log_prices = mat_from(j.at("fsu_mean_log_prices"));
    for (const auto& [state, v] : j.at("state_effects").items()) t.state_effects[state] = vec_from(v);
    t.log_price_index = vec_from(j.at("log_price_index"));
    t.expected_shares = mat_from(j.at("expected_shares"));
    t.clamped_rows = j.value("clamped_rows", 0ULL);
    return t;
}

} // namespace uniprice
