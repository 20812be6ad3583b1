#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace uniprice {

/// One household as read from a consumption survey. Item values are monetary
/// amounts, quantities are physical units; a value/quantity pair is either
/// fully present or fully null.
struct HouseholdRecord {
    std::string hhid;
    std::string state;
    std::string fsu_id; // hhid with its last two characters removed
    double weight = 1.0;
    double mpce = 0.0;
    std::map<std::string, std::optional<double>> item_values;
    std::map<std::string, std::optional<double>> item_quantities;
};

/// FSU identifier derived by string truncation so leading zeros survive.
std::string fsu_from_hhid(const std::string& hhid);

struct RejectedRow {
    std::size_t row_number = 0; // 1-based data row (header excluded)
    std::string hhid;
    std::string reason;
};

struct ParseResult {
    std::vector<HouseholdRecord> records;
    std::vector<RejectedRow> rejects;
};

/// Maps canonical field names to CSV header names.
struct ColumnMapping {
    std::string hhid = "HHID";
    std::string state = "STATE";
    std::string weight = "MULT";
    std::string mpce = "MPCE";
    struct ItemColumns {
        std::string item;     // canonical item code, e.g. "i102"
        std::string value;    // monetary value column header
        std::string quantity; // physical quantity column header
    };
    std::vector<ItemColumns> items;

    /// Mapping for the writer's own canonical layout:
    /// HHID,STATE,MULT,MPCE,NHV_<item>,NHQ_<item>.
    static ColumnMapping canonical(const std::vector<std::string>& item_codes);
};

ColumnMapping column_mapping_from_json_file(const std::string& path);

/// Reads a survey CSV. Unparseable numeric item cells become nulls; rows
/// breaking the record invariants land in the rejects report instead of the
/// record list. Missing mapped columns throw SchemaError.
ParseResult parse_survey_csv(const std::string& path, const ColumnMapping& mapping);

/// Household rows ready for demand estimation: log unit prices, within-group
/// budget shares and group expenditure per selected item set. Construction
/// guarantees there are no missing entries and each share row sums to one.
struct DemandDataset {
    std::vector<std::string> items;
    std::vector<std::string> hhid;
    std::vector<std::string> state;
    std::vector<std::string> fsu_id;
    Eigen::MatrixXd log_prices;         // n_rows x n_items
    Eigen::MatrixXd shares;             // n_rows x n_items
    Eigen::VectorXd group_expenditure;  // n_rows
    Eigen::VectorXd weight;             // n_rows

    std::size_t n_rows() const { return hhid.size(); }
    std::size_t n_items() const { return items.size(); }
    std::size_t item_index(const std::string& item) const; // throws DataError if absent

    /// Copy of the selected rows, in the given order.
    DemandDataset select(const std::vector<std::size_t>& rows) const;

    /// Throws DataError if any invariant is broken (share sums, ranges,
    /// positivity, field lengths).
    void validate() const;
};

struct BuildReport {
    std::size_t input_rows = 0;
    std::size_t retained_rows = 0;
    std::size_t na_dropped_rows = 0;
    std::size_t nonpositive_dropped_rows = 0;
    std::map<std::string, std::size_t> na_count_per_item;
    std::map<std::string, double> na_fraction_per_item;
};

struct BuildResult {
    DemandDataset dataset;
    BuildReport report;
};

/// Keeps only rows fully observed on `items`; unit price = value/quantity,
/// shares renormalized within the item group. Rows with a nonpositive value
/// or quantity are dropped and counted apart from the NA drops.
BuildResult build_demand_dataset(const std::vector<HouseholdRecord>& records,
                                 const std::vector<std::string>& items);

enum class PriceStrategy { FirstHousehold, Median, WeightedMedian };

std::string to_string(PriceStrategy s);
PriceStrategy price_strategy_from_string(const std::string& s);

/// Replaces every household's log price by one representative per FSU and
/// item. Shares, expenditures, weights and row order are untouched; the
/// median uses the lower-median tie rule so the result is deterministic.
DemandDataset uniformize_prices(const DemandDataset& data, PriceStrategy strategy);

// --- serialization ---

/// hhid,state,fsu_id,weight,group_expenditure,log_price_<item>...,share_<item>...
void write_dataset_csv(const DemandDataset& data, const std::string& path);
DemandDataset read_dataset_csv(const std::string& path);

/// Raw survey layout (HHID,STATE,MULT,MPCE,NHV_*,NHQ_*) reconstructed from a
/// dataset; handy for exercising the ingestion path end to end.
void write_survey_csv(const DemandDataset& data, const std::string& path);

void write_rejects_csv(const std::vector<RejectedRow>& rejects, const std::string& path);

} // namespace uniprice
