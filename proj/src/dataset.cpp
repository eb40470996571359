#include "insightkit/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

namespace insightkit {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// Returns the byte offset of the first invalid sequence, or npos.
std::size_t find_invalid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t extra;
    if (c < 0x80) {
      extra = 0;
    } else if ((c & 0xE0) == 0xC0 && c >= 0xC2) {
      extra = 1;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
    } else if ((c & 0xF8) == 0xF0 && c <= 0xF4) {
      extra = 3;
    } else {
      return i;
    }
    for (std::size_t k = 1; k <= extra; ++k) {
      if (i + k >= s.size() || (static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return i;
    }
    i += extra + 1;
  }
  return std::string_view::npos;
}

struct CsvRecord {
  std::vector<std::string> fields;
  std::size_t row = 0;
};

// RFC 4180 reader. Quoted fields may contain delimiters, line breaks and ""
// escapes. A quote opens a quoted field only at the start of a field.
std::vector<CsvRecord> read_records(std::string_view text) {
  std::vector<CsvRecord> records;
  CsvRecord current;
  std::string field;
  std::size_t line = 1;
  std::size_t record_line = 1;
  bool in_quotes = false;
  bool closed_quote = false;
  bool pending = false;  // the current record has content

  auto end_field = [&] {
    current.fields.push_back(std::move(field));
    field.clear();
    closed_quote = false;
  };
  auto end_record = [&] {
    end_field();
    current.row = record_line;
    records.push_back(std::move(current));
    current = CsvRecord{};
    pending = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
          closed_quote = true;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == ',') {
      end_field();
      pending = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      end_record();
      ++line;
      record_line = line;
    } else if (closed_quote) {
      throw IngestError("unexpected character after closing quote", record_line);
    } else if (c == '"' && field.empty()) {
      in_quotes = true;
      pending = true;
    } else {
      field.push_back(c);
      pending = true;
    }
  }
  if (in_quotes) throw IngestError("unbalanced quote", record_line);
  if (pending || !field.empty()) end_record();
  return records;
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string format_percent(double share) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", share * 100.0);
  return buf;
}

std::string format_date(double days) {
  using namespace std::chrono;
  const sys_days day{std::chrono::days{static_cast<int>(std::floor(days))}};
  const year_month_day ymd{day};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

bool parse_fixed_digits(std::string_view s, std::size_t pos, std::size_t n, int& out) {
  if (pos + n > s.size()) return false;
  int v = 0;
  for (std::size_t i = pos; i < pos + n; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    v = v * 10 + (s[i] - '0');
  }
  out = v;
  return true;
}

ColumnStats compute_stats(const Table& table, std::size_t column, const Attribute& attribute) {
  ColumnStats st;
  st.attribute = attribute.name;
  st.count = static_cast<std::int64_t>(table.row_count());
  st.nulls = attribute.null_count;

  if (attribute.kind == AttributeKind::numeric || attribute.kind == AttributeKind::temporal) {
    // Welford's online update.
    std::size_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    for (const auto& cell : table.column(column)) {
      if (!cell) continue;
      const auto v = attribute.kind == AttributeKind::numeric ? parse_number(*cell)
                                                              : parse_iso_date(*cell);
      if (!v) continue;
      ++n;
      if (n == 1) {
        lo = hi = *v;
      } else {
        lo = std::min(lo, *v);
        hi = std::max(hi, *v);
      }
      const double delta = *v - mean;
      mean += delta / static_cast<double>(n);
      m2 += delta * (*v - mean);
    }
    if (n > 0) {
      st.min = lo;
      st.max = hi;
      st.mean = std::clamp(mean, lo, hi);
      st.stddev = std::sqrt(std::max(0.0, m2 / static_cast<double>(n)));
    }
    return st;
  }

  std::map<std::string, std::int64_t> counts;
  std::int64_t non_null = 0;
  for (const auto& cell : table.column(column)) {
    if (!cell) continue;
    ++counts[*cell];
    ++non_null;
  }
  st.distinct_count = static_cast<std::int64_t>(counts.size());
  if (non_null > 0) {
    auto best = counts.begin();
    for (auto it = counts.begin(); it != counts.end(); ++it) {
      if (it->second > best->second) best = it;  // ties keep the lexicographically smallest
    }
    st.top_value = best->first;
    st.top_share = static_cast<double>(best->second) / static_cast<double>(non_null);
  }
  return st;
}

}  // namespace

// ---------------------------------------------------------------------------

bool is_null_cell(std::string_view cell) {
  const auto t = trim(cell);
  if (t.empty()) return true;
  const auto l = lower(t);
  return l == "na" || l == "n/a" || l == "null" || l == "nan" || l == "none";
}

std::optional<double> parse_number(std::string_view cell) {
  auto t = trim(cell);
  if (!t.empty() && t.front() == '+') t.remove_prefix(1);
  if (t.empty()) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || ptr != t.data() + t.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<double> parse_iso_date(std::string_view cell) {
  const auto s = trim(cell);
  int y = 0;
  int m = 0;
  int d = 0;
  if (s.size() < 10 || !parse_fixed_digits(s, 0, 4, y) || s[4] != '-' ||
      !parse_fixed_digits(s, 5, 2, m) || s[7] != '-' || !parse_fixed_digits(s, 8, 2, d)) {
    return std::nullopt;
  }
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  double days = static_cast<double>(sys_days{ymd}.time_since_epoch().count());
  if (s.size() == 10) return days;

  // Optional time of day: [T ]HH:MM[:SS[.fff]][Z|+HH:MM|-HH:MM]
  if (s[10] != 'T' && s[10] != ' ') return std::nullopt;
  int hh = 0;
  int mm = 0;
  int ss = 0;
  if (!parse_fixed_digits(s, 11, 2, hh) || s.size() < 16 || s[13] != ':' ||
      !parse_fixed_digits(s, 14, 2, mm) || hh > 23 || mm > 59) {
    return std::nullopt;
  }
  std::size_t pos = 16;
  if (pos < s.size() && s[pos] == ':') {
    if (!parse_fixed_digits(s, pos + 1, 2, ss) || ss > 60) return std::nullopt;
    pos += 3;
    if (pos < s.size() && s[pos] == '.') {
      ++pos;
      const auto start = pos;
      while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
      if (pos == start) return std::nullopt;
    }
  }
  int offset_minutes = 0;
  if (pos < s.size()) {
    if (s[pos] == 'Z') {
      ++pos;
    } else if (s[pos] == '+' || s[pos] == '-') {
      int oh = 0;
      int om = 0;
      if (!parse_fixed_digits(s, pos + 1, 2, oh) || pos + 3 >= s.size() || s[pos + 3] != ':' ||
          !parse_fixed_digits(s, pos + 4, 2, om)) {
        return std::nullopt;
      }
      offset_minutes = (s[pos] == '+' ? 1 : -1) * (oh * 60 + om);
      pos += 6;
    }
  }
  if (pos != s.size()) return std::nullopt;
  days += (hh * 3600.0 + mm * 60.0 + ss - offset_minutes * 60.0) / 86400.0;
  return days;
}

std::optional<bool> parse_boolean(std::string_view cell) {
  const auto l = lower(trim(cell));
  if (l == "true" || l == "1") return true;
  if (l == "false" || l == "0") return false;
  return std::nullopt;
}

AttributeKind infer_kind(const std::vector<std::optional<std::string>>& cells) {
  std::size_t non_null = 0;
  std::size_t numbers = 0;
  std::size_t dates = 0;
  bool all_boolean = true;
  std::set<std::string_view> distinct;
  for (const auto& cell : cells) {
    if (!cell) continue;
    ++non_null;
    if (parse_number(*cell)) ++numbers;
    if (parse_iso_date(*cell)) ++dates;
    if (!parse_boolean(*cell)) all_boolean = false;
    distinct.insert(*cell);
  }
  if (non_null > 0) {
    if (all_boolean) return AttributeKind::boolean;
    // Integer comparison of the 95% rule: count / non_null >= 0.95.
    if (numbers * 100 >= non_null * 95) return AttributeKind::numeric;
    if (dates * 100 >= non_null * 95) return AttributeKind::temporal;
  }
  const std::size_t cutoff = std::max<std::size_t>(20, cells.size() * 5 / 100);
  return distinct.size() <= cutoff ? AttributeKind::categorical : AttributeKind::text;
}

// ---------------------------------------------------------------------------

Table::Table(std::vector<std::string> header,
             std::vector<std::vector<std::optional<std::string>>> columns)
    : header_(std::move(header)), columns_(std::move(columns)) {
  rows_ = columns_.empty() ? 0 : columns_.front().size();
}

std::optional<std::size_t> Table::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (header_[i] == name) return i;
  }
  return std::nullopt;
}

const ColumnStats* Dataset::stats_for(std::string_view attribute) const {
  for (const auto& s : stats) {
    if (s.attribute == attribute) return &s;
  }
  return nullptr;
}

void to_json(json& j, const ColumnStats& v) {
  j = json{{"attribute", v.attribute}, {"count", v.count}, {"nulls", v.nulls}};
  if (v.min) j["min"] = *v.min;
  if (v.max) j["max"] = *v.max;
  if (v.mean) j["mean"] = *v.mean;
  if (v.stddev) j["stddev"] = *v.stddev;
  if (v.distinct_count) j["distinct_count"] = *v.distinct_count;
  if (v.top_value) j["top_value"] = *v.top_value;
  if (v.top_share) j["top_share"] = *v.top_share;
}

Dataset ingest_csv(std::string_view bytes, std::string name) {
  if (bytes.size() >= 3 && bytes.substr(0, 3) == "\xEF\xBB\xBF") bytes.remove_prefix(3);
  if (trim(bytes).empty()) throw IngestError("empty file", 0);
  if (const auto bad = find_invalid_utf8(bytes); bad != std::string_view::npos) {
    const auto row = 1 + static_cast<std::size_t>(std::count(bytes.begin(), bytes.begin() + bad, '\n'));
    throw IngestError("input is not valid UTF-8", row);
  }

  auto records = read_records(bytes);
  // A trailing blank line is a terminator, not a record.
  while (!records.empty() && records.back().fields.size() == 1 && records.back().fields[0].empty()) {
    records.pop_back();
  }
  if (records.empty()) throw IngestError("empty file", 0);

  std::vector<std::string> header;
  std::set<std::string> seen;
  for (const auto& f : records.front().fields) {
    std::string h(trim(f));
    if (h.empty()) throw IngestError("empty column name in header", records.front().row);
    if (!seen.insert(h).second) throw IngestError("duplicate column name '" + h + "'", records.front().row);
    header.push_back(std::move(h));
  }
  if (records.size() == 1) throw IngestError("no data rows after header", 0);

  const std::size_t width = header.size();
  std::vector<std::vector<std::optional<std::string>>> columns(width);
  for (auto& col : columns) col.reserve(records.size() - 1);
  for (std::size_t r = 1; r < records.size(); ++r) {
    auto& rec = records[r];
    if (rec.fields.size() != width) {
      throw IngestError("expected " + std::to_string(width) + " fields, found " +
                            std::to_string(rec.fields.size()),
                        rec.row);
    }
    for (std::size_t c = 0; c < width; ++c) {
      if (is_null_cell(rec.fields[c])) {
        columns[c].emplace_back(std::nullopt);
      } else {
        columns[c].emplace_back(std::string(trim(rec.fields[c])));
      }
    }
  }

  Dataset data;
  data.table = Table(header, std::move(columns));
  data.profile.name = std::move(name);
  data.profile.row_count = static_cast<std::int64_t>(data.table.row_count());
  for (std::size_t c = 0; c < width; ++c) {
    const auto& col = data.table.column(c);
    Attribute a;
    a.name = header[c];
    a.kind = infer_kind(col);
    a.null_count = std::count_if(col.begin(), col.end(), [](const auto& v) { return !v; });
    data.profile.attributes.push_back(a);
    data.stats.push_back(compute_stats(data.table, c, a));
  }
  auto description = describe_dataset(data.profile, data.stats);
  data.profile.nl_description = std::move(description.text);
  for (std::size_t r = 0; r < std::min<std::size_t>(5, data.table.row_count()); ++r) {
    std::vector<std::string> row;
    for (std::size_t c = 0; c < width; ++c) row.push_back(data.table.cell(r, c).value_or(""));
    data.profile.preview_rows.push_back(std::move(row));
  }
  return data;
}

DatasetDescription describe_dataset(const DatasetProfile& profile,
                                    const std::vector<ColumnStats>& stats) {
  DatasetDescription out;
  std::string& t = out.text;
  t = "Dataset \"" + profile.name + "\" has " + std::to_string(profile.row_count) + " rows and " +
      std::to_string(profile.attributes.size()) + " columns.\nAttributes:\n";
  for (std::size_t i = 0; i < profile.attributes.size(); ++i) {
    const auto& a = profile.attributes[i];
    out.attributes.push_back(a.name);
    t += "- " + a.name + " (" + std::string(to_string(a.kind));
    if (a.null_count > 0) t += ", " + std::to_string(a.null_count) + " missing";
    t += ")";
    const ColumnStats* st = i < stats.size() ? &stats[i] : nullptr;
    if (st != nullptr) {
      if (a.kind == AttributeKind::numeric && st->min) {
        t += ": range " + format_number(*st->min) + " to " + format_number(*st->max) + ", mean " +
             format_number(*st->mean);
      } else if (a.kind == AttributeKind::temporal && st->min) {
        t += ": from " + format_date(*st->min) + " to " + format_date(*st->max);
      } else if (st->distinct_count && st->top_value) {
        t += ": " + std::to_string(*st->distinct_count) + " distinct values, most frequent \"" +
             *st->top_value + "\" (" + format_percent(st->top_share.value_or(0.0)) + ")";
      }
    }
    t += "\n";
  }
  out.preview = profile.preview_rows;
  return out;
}

// ---------------------------------------------------------------------------

RowPredicate equals_filter(const Table& table, std::string_view attribute, std::string value) {
  const auto column = table.column_index(attribute);
  if (!column) throw ColumnTypeError("unknown attribute '" + std::string(attribute) + "'");
  return [&table, c = *column, v = std::move(value)](std::size_t row) {
    const auto& cell = table.cell(row, c);
    return cell && *cell == v;
  };
}

namespace {

std::pair<std::size_t, const Attribute*> resolve(const Dataset& data, std::string_view attribute) {
  const auto column = data.table.column_index(attribute);
  const Attribute* a = data.profile.find(attribute);
  if (!column || a == nullptr) {
    throw ColumnTypeError("unknown attribute '" + std::string(attribute) + "'");
  }
  return {*column, a};
}

std::optional<double> numeric_value(const Attribute& a, const std::string& cell) {
  return a.kind == AttributeKind::numeric ? parse_number(cell) : parse_iso_date(cell);
}

void require_numeric(const Attribute& a) {
  if (a.kind != AttributeKind::numeric && a.kind != AttributeKind::temporal) {
    throw ColumnTypeError("attribute '" + a.name + "' is " + std::string(to_string(a.kind)) +
                          ", not numeric");
  }
}

}  // namespace

std::vector<double> numeric_column(const Dataset& data, std::string_view attribute,
                                   const RowPredicate& filter) {
  const auto [column, a] = resolve(data, attribute);
  require_numeric(*a);
  std::vector<double> out;
  const auto& cells = data.table.column(column);
  for (std::size_t r = 0; r < cells.size(); ++r) {
    if (!cells[r] || (filter && !filter(r))) continue;
    if (auto v = numeric_value(*a, *cells[r])) out.push_back(*v);
  }
  return out;
}

std::vector<std::string> categorical_column(const Dataset& data, std::string_view attribute,
                                            const RowPredicate& filter) {
  const auto [column, a] = resolve(data, attribute);
  std::vector<std::string> out;
  const auto& cells = data.table.column(column);
  for (std::size_t r = 0; r < cells.size(); ++r) {
    if (!cells[r] || (filter && !filter(r))) continue;
    out.push_back(*cells[r]);
  }
  return out;
}

PairedColumns paired_numeric_columns(const Dataset& data, std::string_view x_attribute,
                                     std::string_view y_attribute, const RowPredicate& filter) {
  const auto [xc, xa] = resolve(data, x_attribute);
  const auto [yc, ya] = resolve(data, y_attribute);
  require_numeric(*xa);
  require_numeric(*ya);
  PairedColumns out;
  for (std::size_t r = 0; r < data.table.row_count(); ++r) {
    if (filter && !filter(r)) continue;
    const auto& xs = data.table.cell(r, xc);
    const auto& ys = data.table.cell(r, yc);
    if (!xs || !ys) continue;
    const auto x = numeric_value(*xa, *xs);
    const auto y = numeric_value(*ya, *ys);
    if (!x || !y) continue;
    out.x.push_back(*x);
    out.y.push_back(*y);
  }
  return out;
}

}  // namespace insightkit
