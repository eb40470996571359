#include "insightkit/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>

namespace insightkit {

void to_json(json& j, const MetricReading& v) {
  j = json{{"metric", v.metric}, {"value", quantize(v.value)}, {"sample_size", v.sample_size}};
}

namespace {

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double population_sd(std::span<const double> v, double mean) {
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

std::optional<double> finite(double v) {
  return std::isfinite(v) ? std::optional(v) : std::nullopt;
}

}  // namespace

std::optional<double> pearson_r(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) return std::nullopt;
  const double mx = mean_of(x);
  const double my = mean_of(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return finite(std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0));
}

std::optional<double> linear_r2(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) return std::nullopt;
  const double mx = mean_of(x);
  const double my = mean_of(y);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) return std::nullopt;
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double fit = intercept + slope * x[i];
    ss_res += (y[i] - fit) * (y[i] - fit);
    ss_tot += (y[i] - my) * (y[i] - my);
  }
  if (ss_tot == 0.0) return std::nullopt;
  return finite(std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0));
}

std::optional<double> max_abs_z(std::span<const double> values) {
  if (values.size() < 2) return std::nullopt;
  const double m = mean_of(values);
  const double sd = population_sd(values, m);
  if (sd == 0.0) return std::nullopt;
  double worst = 0.0;
  for (double v : values) worst = std::max(worst, std::abs(v - m));
  return finite(worst / sd);
}

std::optional<double> coeff_variation(std::span<const double> values) {
  if (values.size() < 2) return std::nullopt;
  const double m = mean_of(values);
  if (m == 0.0) return std::nullopt;
  return finite(population_sd(values, m) / std::abs(m));
}

std::optional<double> top_gap_ratio(std::span<const double> aggregates) {
  if (aggregates.size() < 2) return std::nullopt;
  std::vector<double> sorted(aggregates.begin(), aggregates.end());
  std::partial_sort(sorted.begin(), sorted.begin() + 2, sorted.end(), std::greater<>());
  if (sorted[0] == 0.0) return std::nullopt;
  return finite((sorted[0] - sorted[1]) / std::abs(sorted[0]));
}

std::optional<double> top_share(std::span<const double> counts) {
  if (counts.empty()) return std::nullopt;
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  if (total <= 0.0) return std::nullopt;
  return finite(*std::max_element(counts.begin(), counts.end()) / total);
}

std::optional<double> relative_diff(double a, double b) {
  const double denom = std::max(std::abs(a), std::abs(b));
  if (denom == 0.0) return std::nullopt;
  return finite(std::abs(a - b) / denom);
}

std::optional<Metric> metric_for(InsightCategory category) {
  switch (category) {
    case InsightCategory::correlation: return Metric::pearson_r;
    case InsightCategory::trend: return Metric::linear_r2;
    case InsightCategory::outlier: return Metric::max_abs_z;
    case InsightCategory::distribution: return Metric::coeff_variation;
    case InsightCategory::extremum: return Metric::top_gap_ratio;
    case InsightCategory::proportion: return Metric::top_share;
    case InsightCategory::difference: return Metric::relative_diff;
    case InsightCategory::other: return std::nullopt;
  }
  return std::nullopt;
}

int statistical_score(const MetricReading& reading, const InterestingnessConfig& config) {
  switch (reading.metric) {
    case Metric::pearson_r: return config.correlation.score(std::abs(reading.value));
    case Metric::linear_r2: return config.correlation.score(reading.value);
    case Metric::max_abs_z: return config.z_score.score(reading.value);
    case Metric::coeff_variation: return config.coeff_variation.score(reading.value);
    case Metric::top_gap_ratio:
    case Metric::relative_diff: return config.gap.score(reading.value);
    case Metric::top_share: return config.share.score(reading.value);
  }
  return 3;
}

// ---------------------------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  if (s.size() >= 2 && (s.front() == '\'' || s.front() == '"') && s.back() == s.front()) {
    s = s.substr(1, s.size() - 2);
  }
  return std::string(s);
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::optional<double> cell_value(AttributeKind kind, const std::optional<std::string>& cell) {
  if (!cell) return std::nullopt;
  if (kind == AttributeKind::numeric) return parse_number(*cell);
  if (kind == AttributeKind::temporal) return parse_iso_date(*cell);
  return std::nullopt;
}

bool accepts(const RowPredicate& filter, std::size_t row) { return !filter || filter(row); }

// Context attributes of the requested kinds, in schema order.
std::vector<const Attribute*> attributes_of(const DataContext& context, const Dataset& data,
                                            std::initializer_list<AttributeKind> kinds) {
  std::vector<const Attribute*> out;
  for (const auto& a : data.profile.attributes) {
    if (!context.attributes.count(a.name)) continue;
    if (std::find(kinds.begin(), kinds.end(), a.kind) != kinds.end()) out.push_back(&a);
  }
  return out;
}

std::size_t distinct_numeric(const Dataset& data, std::string_view attribute) {
  const auto values = numeric_column(data, attribute);
  std::vector<double> sorted(values);
  std::sort(sorted.begin(), sorted.end());
  return static_cast<std::size_t>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
}

constexpr std::size_t kMaxNumericGroups = 20;

// Grouping attribute: first categorical, boolean or text attribute; else a
// numeric one with few distinct values.
const Attribute* grouping_attribute(const DataContext& context, const Dataset& data,
                                    const Attribute* exclude = nullptr) {
  const auto labels = attributes_of(
      context, data, {AttributeKind::categorical, AttributeKind::boolean, AttributeKind::text});
  if (!labels.empty()) return labels.front();
  for (const auto* a : attributes_of(context, data, {AttributeKind::numeric})) {
    if (a != exclude && distinct_numeric(data, a->name) <= kMaxNumericGroups) return a;
  }
  return nullptr;
}

Diagnostic undefined(Metric metric, const std::string& why) {
  return {"metric_undefined", std::string(to_string(metric)) + ": " + why, 1};
}

}  // namespace

RowPredicate context_filter(const DataContext& context, const Dataset& data) {
  std::vector<RowPredicate> parts;
  for (const auto& action : context.actions) {
    if (action.kind != ActionKind::filter) continue;
    const auto& d = action.detail;
    auto op = d.find("==");
    std::size_t op_len = 2;
    if (op == std::string::npos) {
      op = d.find('=');
      op_len = 1;
    }
    if (op == std::string::npos || op == 0) continue;
    if (op_len == 1 && (d[op - 1] == '!' || d[op - 1] == '<' || d[op - 1] == '>')) continue;
    const auto attribute = trim(std::string_view(d).substr(0, op));
    const auto value = trim(std::string_view(d).substr(op + op_len));
    if (!data.table.column_index(attribute)) continue;
    parts.push_back(equals_filter(data.table, attribute, value));
  }
  if (parts.empty()) return {};
  return [parts = std::move(parts)](std::size_t row) {
    return std::all_of(parts.begin(), parts.end(), [&](const RowPredicate& p) { return p(row); });
  };
}

Aggregation aggregation_for(const DataContext& context) {
  for (const auto& action : context.actions) {
    if (action.kind != ActionKind::aggregation) continue;
    const auto d = lower(action.detail);
    if (d.find("count") != std::string::npos || d.find("number of") != std::string::npos) {
      return Aggregation::count;
    }
    if (d.find("sum") != std::string::npos || d.find("total") != std::string::npos) {
      return Aggregation::sum;
    }
    if (d.find("max") != std::string::npos || d.find("highest") != std::string::npos) {
      return Aggregation::max;
    }
    if (d.find("min") != std::string::npos || d.find("lowest") != std::string::npos) {
      return Aggregation::min;
    }
    return Aggregation::mean;
  }
  return Aggregation::mean;
}

std::vector<GroupAggregate> group_aggregate(const Dataset& data, std::string_view group_attribute,
                                            std::optional<std::string_view> measure_attribute,
                                            Aggregation aggregation, const RowPredicate& filter) {
  const auto gi = data.table.column_index(group_attribute);
  if (!gi) throw ColumnTypeError("unknown attribute '" + std::string(group_attribute) + "'");
  std::optional<std::size_t> mi;
  AttributeKind measure_kind = AttributeKind::numeric;
  if (measure_attribute && aggregation != Aggregation::count) {
    mi = data.table.column_index(*measure_attribute);
    const auto* attr = data.profile.find(*measure_attribute);
    if (!mi || !attr || attr->kind != AttributeKind::numeric) {
      throw ColumnTypeError("'" + std::string(*measure_attribute) + "' is not numeric");
    }
    measure_kind = attr->kind;
  }

  struct Acc {
    double sum = 0.0;
    double best = 0.0;
    std::int64_t n = 0;
  };
  std::vector<std::string> order;
  std::map<std::string, Acc> acc;
  for (std::size_t row = 0; row < data.table.row_count(); ++row) {
    if (!accepts(filter, row)) continue;
    const auto& g = data.table.cell(row, *gi);
    if (!g) continue;
    double v = 1.0;
    if (mi) {
      const auto parsed = cell_value(measure_kind, data.table.cell(row, *mi));
      if (!parsed) continue;
      v = *parsed;
    }
    auto [it, inserted] = acc.try_emplace(*g);
    if (inserted) order.push_back(*g);
    auto& a = it->second;
    if (a.n == 0) {
      a.best = v;
    } else if (aggregation == Aggregation::max) {
      a.best = std::max(a.best, v);
    } else if (aggregation == Aggregation::min) {
      a.best = std::min(a.best, v);
    }
    a.sum += v;
    ++a.n;
  }

  std::vector<GroupAggregate> out;
  for (const auto& label : order) {
    const auto& a = acc.at(label);
    double value = 0.0;
    switch (aggregation) {
      case Aggregation::mean: value = a.sum / static_cast<double>(a.n); break;
      case Aggregation::sum: value = a.sum; break;
      case Aggregation::count: value = static_cast<double>(a.n); break;
      case Aggregation::max:
      case Aggregation::min: value = a.best; break;
    }
    out.push_back({label, value, a.n});
  }
  return out;
}

MetricOutcome statistical_metric(InsightCategory category, const DataContext& context,
                                 const std::string& summary, const Dataset& data) {
  const auto metric = metric_for(category);
  if (!metric) return {std::nullopt, Diagnostic{"metric_undefined", "category other has no metric", 1}};
  const auto filter = context_filter(context, data);
  const auto numerics = attributes_of(context, data, {AttributeKind::numeric});

  auto reading = [&](std::optional<double> value, std::size_t n,
                     const std::string& why) -> MetricOutcome {
    if (!value) return {std::nullopt, undefined(*metric, why)};
    return {MetricReading{*metric, *value, static_cast<std::int64_t>(n)}, std::nullopt};
  };

  try {
    switch (*metric) {
      case Metric::pearson_r: {
        if (numerics.size() < 2) return {std::nullopt, undefined(*metric, "needs two numeric attributes")};
        const auto pairs = paired_numeric_columns(data, numerics[0]->name, numerics[1]->name, filter);
        return reading(pearson_r(pairs.x, pairs.y), pairs.x.size(), "too few rows or zero variance");
      }
      case Metric::linear_r2: {
        const auto temporal = attributes_of(context, data, {AttributeKind::temporal});
        const Attribute* axis = !temporal.empty() ? temporal.front()
                                : !numerics.empty() ? numerics.front()
                                                    : nullptr;
        const Attribute* value = nullptr;
        for (const auto* a : numerics) {
          if (a != axis) {
            value = a;
            break;
          }
        }
        if (!axis || !value) return {std::nullopt, undefined(*metric, "needs an axis and a numeric value")};
        const auto pairs = paired_numeric_columns(data, axis->name, value->name, filter);
        std::map<double, std::pair<double, int>> per_axis;
        for (std::size_t i = 0; i < pairs.x.size(); ++i) {
          auto& [sum, n] = per_axis[pairs.x[i]];
          sum += pairs.y[i];
          ++n;
        }
        std::vector<double> xs, ys;
        for (const auto& [x, agg] : per_axis) {
          xs.push_back(x);
          ys.push_back(agg.first / agg.second);
        }
        return reading(linear_r2(xs, ys), xs.size(), "too few axis points or a flat series");
      }
      case Metric::max_abs_z: {
        if (numerics.empty()) return {std::nullopt, undefined(*metric, "needs a numeric attribute")};
        const auto v = numeric_column(data, numerics[0]->name, filter);
        return reading(max_abs_z(v), v.size(), "too few rows or zero variance");
      }
      case Metric::coeff_variation: {
        if (numerics.empty()) return {std::nullopt, undefined(*metric, "needs a numeric attribute")};
        const auto v = numeric_column(data, numerics[0]->name, filter);
        return reading(coeff_variation(v), v.size(), "too few rows or zero mean");
      }
      case Metric::top_gap_ratio: {
        const auto* group = grouping_attribute(context, data);
        const Attribute* measure = nullptr;
        for (const auto* a : numerics) {
          if (a != group) {
            measure = a;
            break;
          }
        }
        std::vector<double> values;
        if (group) {
          const auto aggregation = measure ? aggregation_for(context) : Aggregation::count;
          for (const auto& g : group_aggregate(
                   data, group->name,
                   measure ? std::optional<std::string_view>(measure->name) : std::nullopt,
                   aggregation, filter)) {
            values.push_back(g.value);
          }
        } else if (measure) {
          values = numeric_column(data, measure->name, filter);
        } else {
          return {std::nullopt, undefined(*metric, "needs a grouping or numeric attribute")};
        }
        return reading(top_gap_ratio(values), values.size(), "fewer than two groups or zero top value");
      }
      case Metric::top_share: {
        const auto* group = grouping_attribute(context, data);
        if (!group) return {std::nullopt, undefined(*metric, "needs a grouping attribute")};
        std::vector<double> counts;
        for (const auto& g : group_aggregate(data, group->name, std::nullopt, Aggregation::count, filter)) {
          counts.push_back(g.value);
        }
        return reading(top_share(counts), counts.size(), "no rows");
      }
      case Metric::relative_diff: {
        const auto* group = grouping_attribute(context, data);
        if (!group) return {std::nullopt, undefined(*metric, "needs a grouping attribute")};
        const Attribute* measure = nullptr;
        for (const auto* a : numerics) {
          if (a != group) {
            measure = a;
            break;
          }
        }
        const auto aggregation = measure ? aggregation_for(context) : Aggregation::count;
        const auto groups = group_aggregate(
            data, group->name,
            measure ? std::optional<std::string_view>(measure->name) : std::nullopt, aggregation,
            filter);
        if (groups.size() < 2) return {std::nullopt, undefined(*metric, "fewer than two groups")};
        // The two groups the summary names first; else the two largest.
        const auto text = lower(summary);
        std::vector<std::pair<std::size_t, const GroupAggregate*>> named;
        for (const auto& g : groups) {
          const auto pos = text.find(lower(g.label));
          if (!g.label.empty() && pos != std::string::npos) named.emplace_back(pos, &g);
        }
        std::stable_sort(named.begin(), named.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        const GroupAggregate* a = nullptr;
        const GroupAggregate* b = nullptr;
        if (named.size() >= 2) {
          a = named[0].second;
          b = named[1].second;
        } else {
          std::vector<const GroupAggregate*> sorted;
          for (const auto& g : groups) sorted.push_back(&g);
          std::stable_sort(sorted.begin(), sorted.end(),
                           [](const auto* x, const auto* y) { return x->value > y->value; });
          a = sorted[0];
          b = sorted[1];
        }
        return reading(relative_diff(a->value, b->value), static_cast<std::size_t>(a->rows + b->rows),
                       "both aggregates are zero");
      }
    }
  } catch (const ColumnTypeError& e) {
    return {std::nullopt, undefined(*metric, e.what())};
  }
  return {std::nullopt, undefined(*metric, "unsupported")};
}

}  // namespace insightkit
