#pragma once
// CSV ingestion, schema inference, column statistics and the templated
// dataset description handed to the agents.

#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "insightkit/model.hpp"

namespace insightkit {

class IngestError : public std::runtime_error {
 public:
  // row is 1-based over physical CSV records (header = row 1); 0 when not row-specific.
  IngestError(const std::string& message, std::size_t row)
      : std::runtime_error(row == 0 ? message : message + " (row " + std::to_string(row) + ")"),
        row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

class ColumnTypeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ColumnStats {
  std::string attribute;
  std::int64_t count = 0;  // rows, nulls included
  std::int64_t nulls = 0;
  // numeric and temporal (temporal values are days since 1970-01-01)
  std::optional<double> min;
  std::optional<double> max;
  std::optional<double> mean;
  std::optional<double> stddev;  // population
  // categorical, boolean and text
  std::optional<std::int64_t> distinct_count;
  std::optional<std::string> top_value;
  std::optional<double> top_share;
};

void to_json(json& j, const ColumnStats& v);

// Immutable column-major table. Null cells are std::nullopt.
class Table {
 public:
  Table() = default;
  Table(std::vector<std::string> header, std::vector<std::vector<std::optional<std::string>>> columns);

  const std::vector<std::string>& header() const { return header_; }
  std::size_t row_count() const { return rows_; }
  std::size_t column_count() const { return header_.size(); }
  std::optional<std::size_t> column_index(std::string_view name) const;

  const std::optional<std::string>& cell(std::size_t row, std::size_t column) const {
    return columns_[column][row];
  }
  const std::vector<std::optional<std::string>>& column(std::size_t column) const {
    return columns_[column];
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::optional<std::string>>> columns_;
  std::size_t rows_ = 0;
};

struct Dataset {
  DatasetProfile profile;
  Table table;
  std::vector<ColumnStats> stats;  // parallel to profile.attributes

  const ColumnStats* stats_for(std::string_view attribute) const;
};

// Read-only handle shared between the chat loop, the pipeline and the server.
using DatasetHandle = std::shared_ptr<const Dataset>;

// Parses UTF-8 CSV with a header row, infers kinds, computes statistics and
// fills profile.nl_description. Throws IngestError.
Dataset ingest_csv(std::string_view bytes, std::string name);

struct DatasetDescription {
  std::string text;
  std::vector<std::vector<std::string>> preview;
  std::vector<std::string> attributes;
};

DatasetDescription describe_dataset(const DatasetProfile& profile,
                                    const std::vector<ColumnStats>& stats);

// Cell-level helpers shared by inference and metrics.
bool is_null_cell(std::string_view cell);
std::optional<double> parse_number(std::string_view cell);
std::optional<double> parse_iso_date(std::string_view cell);  // days since epoch
std::optional<bool> parse_boolean(std::string_view cell);

AttributeKind infer_kind(const std::vector<std::optional<std::string>>& cells);

using RowPredicate = std::function<bool(std::size_t row)>;

// Rows whose cell in `attribute` equals `value` (after trimming).
RowPredicate equals_filter(const Table& table, std::string_view attribute, std::string value);

// Nulls and filtered rows excluded, row order preserved. Numeric vectors are
// defined for numeric and temporal columns; other kinds throw ColumnTypeError.
std::vector<double> numeric_column(const Dataset& data, std::string_view attribute,
                                   const RowPredicate& filter = {});
std::vector<std::string> categorical_column(const Dataset& data, std::string_view attribute,
                                            const RowPredicate& filter = {});

// Aligned (x, y) pairs for rows where both cells are non-null numbers.
struct PairedColumns {
  std::vector<double> x;
  std::vector<double> y;
};
PairedColumns paired_numeric_columns(const Dataset& data, std::string_view x_attribute,
                                     std::string_view y_attribute, const RowPredicate& filter = {});

}  // namespace insightkit
