#include "uniprice/survey_data.hpp"

#include "uniprice/errors.hpp"
#include "internal_util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace uniprice {

using detail::format_double;
using detail::parse_double;
using detail::split_csv_line;

std::string fsu_from_hhid(const std::string& hhid) {
    if (hhid.size() < 3) throw DataError("hhid too short to derive an FSU id: '" + hhid + "'");
    return hhid.substr(0, hhid.size() - 2);
}

ColumnMapping ColumnMapping::canonical(const std::vector<std::string>& item_codes) {
    ColumnMapping m;
    for (const auto& code : item_codes)
        m.items.push_back({code, "NHV_" + code, "NHQ_" + code});
    return m;
}

ColumnMapping column_mapping_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open column mapping file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("invalid column mapping JSON in " + path + ": " + e.what());
    }
    ColumnMapping m;
    m.hhid = j.value("hhid", m.hhid);
    m.state = j.value("state", m.state);
    m.weight = j.value("weight", m.weight);
    m.mpce = j.value("mpce", m.mpce);
    if (!j.contains("items") || !j["items"].is_object())
        throw ConfigError("column mapping needs an \"items\" object: " + path);
    for (const auto& [item, cols] : j["items"].items()) {
        if (!cols.contains("value") || !cols.contains("quantity"))
            throw ConfigError("item '" + item + "' needs \"value\" and \"quantity\" columns");
        m.items.push_back({item, cols["value"].get<std::string>(), cols["quantity"].get<std::string>()});
    }
    std::sort(m.items.begin(), m.items.end(),
              [](const auto& a, const auto& b) { return a.item < b.item; });
    return m;
}

namespace {

bool all_digits(const std::string& s) {
    return !s.empty() &&
           std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

std::size_t require_column(const std::unordered_map<std::string, std::size_t>& index,
                           const std::string& name) {
    auto it = index.find(name);
    if (it == index.end()) throw SchemaError("mapped column not found in header: '" + name + "'");
    return it->second;
}

std::string field_or_empty(const std::vector<std::string>& row, std::size_t idx) {
    return idx < row.size() ? row[idx] : std::string{};
}

} // namespace

ParseResult parse_survey_csv(const std::string& path, const ColumnMapping& mapping) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open survey CSV: " + path);

    std::string line;
    if (!std::getline(in, line)) throw SchemaError("survey CSV has no header row: " + path);
    auto header = split_csv_line(line);
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < header.size(); ++i) index[detail::trim(header[i])] = i;

    const std::size_t c_hhid = require_column(index, mapping.hhid);
    const std::size_t c_state = require_column(index, mapping.state);
    const std::size_t c_weight = require_column(index, mapping.weight);
    const std::size_t c_mpce = require_column(index, mapping.mpce);
    struct ItemCols {
        std::string item;
        std::size_t value, quantity;
    };
    std::vector<ItemCols> item_cols;
    for (const auto& ic : mapping.items)
        item_cols.push_back({ic.item, require_column(index, ic.value), require_column(index, ic.quantity)});

    ParseResult result;
    std::size_t row_number = 0;
    while (std::getline(in, line)) {
        ++row_number;
        if (detail::trim(line).empty()) continue;
        auto row = split_csv_line(line);

        HouseholdRecord rec;
        rec.hhid = detail::trim(field_or_empty(row, c_hhid));
        rec.state = detail::trim(field_or_empty(row, c_state));

        if (rec.hhid.size() < 3 || !all_digits(rec.hhid)) {
            result.rejects.push_back({row_number, rec.hhid, "malformed HHID (need >= 3 digits)"});
            continue;
        }
        rec.fsu_id = fsu_from_hhid(rec.hhid);

        auto weight = parse_double(field_or_empty(row, c_weight));
        if (!weight || *weight <= 0.0) {
            result.rejects.push_back({row_number, rec.hhid, "missing or nonpositive weight"});
            continue;
        }
        rec.weight = *weight;

        auto mpce = parse_double(field_or_empty(row, c_mpce));
        if (!mpce || *mpce <= 0.0) {
            result.rejects.push_back({row_number, rec.hhid, "missing or nonpositive mpce"});
            continue;
        }
        rec.mpce = *mpce;

        bool pairing_ok = true;
        std::string bad_item;
        for (const auto& ic : item_cols) {
            auto value = parse_double(field_or_empty(row, ic.value));
            auto quantity = parse_double(field_or_empty(row, ic.quantity));
            if (value.has_value() != quantity.has_value()) {
                pairing_ok = false;
                bad_item = ic.item;
                break;
            }
            rec.item_values[ic.item] = value;
            rec.item_quantities[ic.item] = quantity;
        }
        if (!pairing_ok) {
            result.rejects.push_back(
                {row_number, rec.hhid, "item '" + bad_item + "' has value/quantity pair half missing"});
            continue;
        }
        result.records.push_back(std::move(rec));
    }
    return result;
}

std::size_t DemandDataset::item_index(const std::string& item) const {
    auto it = std::find(items.begin(), items.end(), item);
    if (it == items.end()) throw DataError("item not in dataset: '" + item + "'");
    return static_cast<std::size_t>(it - items.begin());
}

DemandDataset DemandDataset::select(const std::vector<std::size_t>& rows) const {
    DemandDataset out;
    out.items = items;
    const auto k = static_cast<Eigen::Index>(rows.size());
    out.log_prices.resize(k, log_prices.cols());
    out.shares.resize(k, shares.cols());
    out.group_expenditure.resize(k);
    out.weight.resize(k);
    out.hhid.reserve(rows.size());
    out.state.reserve(rows.size());
    out.fsu_id.reserve(rows.size());
    for (Eigen::Index i = 0; i < k; ++i) {
        const auto r = rows[static_cast<std::size_t>(i)];
        if (r >= n_rows()) throw DataError("row selection out of range");
        out.log_prices.row(i) = log_prices.row(static_cast<Eigen::Index>(r));
        out.shares.row(i) = shares.row(static_cast<Eigen::Index>(r));
        out.group_expenditure(i) = group_expenditure(static_cast<Eigen::Index>(r));
        out.weight(i) = weight(static_cast<Eigen::Index>(r));
        out.hhid.push_back(hhid[r]);
        out.state.push_back(state[r]);
        out.fsu_id.push_back(fsu_id[r]);
    }
    return out;
}

void DemandDataset::validate() const {
    const auto L = static_cast<Eigen::Index>(n_rows());
    const auto n = static_cast<Eigen::Index>(n_items());
    if (n < 2) throw DataError("dataset needs at least 2 items");
    if (state.size() != n_rows() || fsu_id.size() != n_rows())
        throw DataError("dataset field lengths disagree");
    if (log_prices.rows() != L || log_prices.cols() != n || shares.rows() != L ||
        shares.cols() != n || group_expenditure.size() != L || weight.size() != L)
        throw DataError("dataset matrix dimensions disagree");
    if (!log_prices.allFinite() || !shares.allFinite())
        throw DataError("dataset contains non-finite entries");
    for (Eigen::Index r = 0; r < L; ++r) {
        if (std::abs(shares.row(r).sum() - 1.0) > 1e-10)
            throw DataError("share row " + std::to_string(r) + " does not sum to 1");
        if ((shares.row(r).array() < 0.0).any() || (shares.row(r).array() > 1.0).any())
            throw DataError("share out of [0,1] in row " + std::to_string(r));
        if (!(group_expenditure(r) > 0.0))
            throw DataError("nonpositive group expenditure in row " + std::to_string(r));
        if (!(weight(r) > 0.0)) throw DataError("nonpositive weight in row " + std::to_string(r));
    }
}

BuildResult build_demand_dataset(const std::vector<HouseholdRecord>& records,
                                 const std::vector<std::string>& items) {
    if (items.empty()) throw DataError("item list must be non-empty");

    BuildReport report;
    report.input_rows = records.size();
    for (const auto& item : items) report.na_count_per_item[item] = 0;

    std::vector<std::size_t> keep;
    keep.reserve(records.size());
    for (std::size_t r = 0; r < records.size(); ++r) {
        const auto& rec = records[r];
        bool any_na = false;
        bool any_nonpositive = false;
        for (const auto& item : items) {
            auto vit = rec.item_values.find(item);
            auto qit = rec.item_quantities.find(item);
            const bool present = vit != rec.item_values.end() && vit->second.has_value() &&
                                 qit != rec.item_quantities.end() && qit->second.has_value();
            if (!present) {
                any_na = true;
                ++report.na_count_per_item[item];
            } else if (*vit->second <= 0.0 || *qit->second <= 0.0) {
                any_nonpositive = true;
            }
        }
        if (any_na)
            ++report.na_dropped_rows;
        else if (any_nonpositive)
            ++report.nonpositive_dropped_rows;
        else
            keep.push_back(r);
    }
    report.retained_rows = keep.size();
    for (const auto& item : items)
        report.na_fraction_per_item[item] =
            report.input_rows == 0
                ? 0.0
                : static_cast<double>(report.na_count_per_item[item]) / static_cast<double>(report.input_rows);

    if (keep.empty()) throw DataError("no rows remain after dropping incomplete households");

    DemandDataset data;
    data.items = items;
    const auto L = static_cast<Eigen::Index>(keep.size());
    const auto n = static_cast<Eigen::Index>(items.size());
    data.log_prices.resize(L, n);
    data.shares.resize(L, n);
    data.group_expenditure.resize(L);
    data.weight.resize(L);
    for (Eigen::Index i = 0; i < L; ++i) {
        const auto& rec = records[keep[static_cast<std::size_t>(i)]];
        data.hhid.push_back(rec.hhid);
        data.state.push_back(rec.state);
        data.fsu_id.push_back(rec.fsu_id.empty() ? fsu_from_hhid(rec.hhid) : rec.fsu_id);
        double total = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto& item = items[static_cast<std::size_t>(j)];
            const double value = *rec.item_values.at(item);
            const double quantity = *rec.item_quantities.at(item);
            data.log_prices(i, j) = std::log(value / quantity);
            total += value;
        }
        data.group_expenditure(i) = total;
        for (Eigen::Index j = 0; j < n; ++j)
            data.shares(i, j) = *rec.item_values.at(items[static_cast<std::size_t>(j)]) / total;
        data.weight(i) = rec.weight;
    }
    data.validate();
    return {std::move(data), std::move(report)};
}

std::string to_string(PriceStrategy s) {
    switch (s) {
        case PriceStrategy::FirstHousehold: return "first-household";
        case PriceStrategy::Median: return "median";
        case PriceStrategy::WeightedMedian: return "weighted-median";
    }
    throw std::logic_error("unknown price strategy");
}

PriceStrategy price_strategy_from_string(const std::string& s) {
    if (s == "first-household") return PriceStrategy::FirstHousehold;
    if (s == "median") return PriceStrategy::Median;
    if (s == "weighted-median") return PriceStrategy::WeightedMedian;
    throw ConfigError("unknown price strategy: '" + s + "'");
}

namespace {

// Lower median: for even counts take the smaller of the two middle values.
double lower_median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[(v.size() - 1) / 2];
}

// Smallest value whose cumulative weight reaches half of the total.
double weighted_lower_median(std::vector<std::pair<double, double>> value_weight) {
    std::sort(value_weight.begin(), value_weight.end());
    double total = 0.0;
    for (const auto& [v, w] : value_weight) total += w;
    double cum = 0.0;
    for (const auto& [v, w] : value_weight) {
        cum += w;
        if (cum >= 0.5 * total) return v;
    }
    return value_weight.back().first;
}

} // namespace

DemandDataset uniformize_prices(const DemandDataset& data, PriceStrategy strategy) {
    if (data.n_rows() == 0) throw DataError("cannot uniformize an empty dataset");

    // Group rows by FSU, preserving first-appearance order inside each group.
    std::unordered_map<std::string, std::vector<Eigen::Index>> groups;
    for (std::size_t r = 0; r < data.n_rows(); ++r)
        groups[data.fsu_id[r]].push_back(static_cast<Eigen::Index>(r));

    DemandDataset out = data;
    const auto n = static_cast<Eigen::Index>(data.n_items());
    for (const auto& [fsu, rows] : groups) {
        for (Eigen::Index j = 0; j < n; ++j) {
            double rep = 0.0;
            switch (strategy) {
                case PriceStrategy::FirstHousehold:
                    rep = data.log_prices(rows.front(), j);
                    break;
                case PriceStrategy::Median: {
                    std::vector<double> v;
                    v.reserve(rows.size());
                    for (auto r : rows) v.push_back(data.log_prices(r, j));
                    rep = lower_median(std::move(v));
                    break;
                }
                case PriceStrategy::WeightedMedian: {
                    std::vector<std::pair<double, double>> vw;
                    vw.reserve(rows.size());
                    for (auto r : rows) vw.emplace_back(data.log_prices(r, j), data.weight(r));
                    rep = weighted_lower_median(std::move(vw));
                    break;
                }
            }
            for (auto r : rows) out.log_prices(r, j) = rep;
        }
    }
    return out;
}

void write_dataset_csv(const DemandDataset& data, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write dataset CSV: " + path);
    out << "hhid,state,fsu_id,weight,group_expenditure";
    for (const auto& item : data.items) out << ",log_price_" << item;
    for (const auto& item : data.items) out << ",share_" << item;
    out << "\n";
    const auto n = static_cast<Eigen::Index>(data.n_items());
    for (std::size_t r = 0; r < data.n_rows(); ++r) {
        const auto i = static_cast<Eigen::Index>(r);
        out << data.hhid[r] << ',' << data.state[r] << ',' << data.fsu_id[r] << ','
            << format_double(data.weight(i)) << ',' << format_double(data.group_expenditure(i));
        for (Eigen::Index j = 0; j < n; ++j) out << ',' << format_double(data.log_prices(i, j));
        for (Eigen::Index j = 0; j < n; ++j) out << ',' << format_double(data.shares(i, j));
        out << "\n";
    }
    if (!out) throw DataError("failed while writing dataset CSV: " + path);
}

DemandDataset read_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset CSV: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("dataset CSV has no header: " + path);
    auto header = split_csv_line(line);
    constexpr std::size_t fixed = 5;
    if (header.size() < fixed + 4 || (header.size() - fixed) % 2 != 0)
        throw DataError("dataset CSV header has unexpected shape: " + path);
    const std::size_t n = (header.size() - fixed) / 2;
    std::vector<std::string> items;
    for (std::size_t j = 0; j < n; ++j) {
        const std::string& col = header[fixed + j];
        if (col.rfind("log_price_", 0) != 0)
            throw DataError("expected log_price_ column, got '" + col + "'");
        items.push_back(col.substr(10));
    }
    for (std::size_t j = 0; j < n; ++j)
        if (header[fixed + n + j] != "share_" + items[j])
            throw DataError("share column order mismatch in " + path);

    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        rows.push_back(split_csv_line(line));
    }
    DemandDataset data;
    data.items = items;
    const auto L = static_cast<Eigen::Index>(rows.size());
    data.log_prices.resize(L, static_cast<Eigen::Index>(n));
    data.shares.resize(L, static_cast<Eigen::Index>(n));
    data.group_expenditure.resize(L);
    data.weight.resize(L);
    auto need = [&](const std::vector<std::string>& row, std::size_t idx, std::size_t rn) {
        auto v = parse_double(row[idx]);
        if (!v) throw DataError("bad numeric cell at data row " + std::to_string(rn));
        return *v;
    };
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != header.size())
            throw DataError("dataset CSV row " + std::to_string(r + 1) + " has wrong field count");
        const auto i = static_cast<Eigen::Index>(r);
        data.hhid.push_back(row[0]);
        data.state.push_back(row[1]);
        data.fsu_id.push_back(row[2]);
        data.weight(i) = need(row, 3, r + 1);
        data.group_expenditure(i) = need(row, 4, r + 1);
        for (std::size_t j = 0; j < n; ++j) {
            data.log_prices(i, static_cast<Eigen::Index>(j)) = need(row, fixed + j, r + 1);
            data.shares(i, static_cast<Eigen::Index>(j)) = need(row, fixed + n + j, r + 1);
        }
    }
    data.validate();
    return data;
}

void write_survey_csv(const DemandDataset& data, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write survey CSV: " + path);
    out << "HHID,STATE,MULT,MPCE";
    for (const auto& item : data.items) out << ",NHV_" << item << ",NHQ_" << item;
    out << "\n";
    const auto n = static_cast<Eigen::Index>(data.n_items());
    for (std::size_t r = 0; r < data.n_rows(); ++r) {
        const auto i = static_cast<Eigen::Index>(r);
        out << data.hhid[r] << ',' << data.state[r] << ',' << format_double(data.weight(i)) << ','
            << format_double(data.group_expenditure(i));
        for (Eigen::Index j = 0; j < n; ++j) {
            const double value = data.shares(i, j) * data.group_expenditure(i);
            const double quantity = value / std::exp(data.log_prices(i, j));
            out << ',' << format_double(value) << ',' << format_double(quantity);
        }
        out << "\n";
    }
    if (!out) throw DataError("failed while writing survey CSV: " + path);
}

void write_rejects_csv(const std::vector<RejectedRow>& rejects, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write rejects CSV: " + path);
    out << "row_number,hhid,reason\n";
    for (const auto& r : rejects) out << r.row_number << ',' << r.hhid << ",\"" << r.reason << "\"\n";
}

} // namespace uniprice
