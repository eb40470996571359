#pragma once
// Statistical metrics behind the statistical interestingness score.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "insightkit/config.hpp"
#include "insightkit/dataset.hpp"
#include "insightkit/model.hpp"

namespace insightkit {

enum class Metric {
  pearson_r,
  linear_r2,
  max_abs_z,
  coeff_variation,
  top_gap_ratio,
  top_share,
  relative_diff
};
INSIGHTKIT_ENUM_NAMES(Metric, {Metric::pearson_r, "pearson_r"}, {Metric::linear_r2, "linear_r2"},
                      {Metric::max_abs_z, "max_abs_z"},
                      {Metric::coeff_variation, "coeff_variation"},
                      {Metric::top_gap_ratio, "top_gap_ratio"}, {Metric::top_share, "top_share"},
                      {Metric::relative_diff, "relative_diff"});

struct MetricReading {
  Metric metric = Metric::pearson_r;
  double value = 0.0;
  std::int64_t sample_size = 0;

  bool operator==(const MetricReading&) const = default;
};

void to_json(json& j, const MetricReading& v);

// Raw formulas. Each returns nullopt where the metric is undefined (too few
// values, zero variance, zero denominator).
std::optional<double> pearson_r(std::span<const double> x, std::span<const double> y);
// Coefficient of determination of the ordinary least squares fit y ~ x.
std::optional<double> linear_r2(std::span<const double> x, std::span<const double> y);
// max |v - mean| / sd with the population standard deviation.
std::optional<double> max_abs_z(std::span<const double> values);
// sd / |mean| with the population standard deviation.
std::optional<double> coeff_variation(std::span<const double> values);
// (top1 - top2) / |top1| over the two largest values.
std::optional<double> top_gap_ratio(std::span<const double> aggregates);
// Largest count over the total.
std::optional<double> top_share(std::span<const double> counts);
// |a - b| / max(|a|, |b|).
std::optional<double> relative_diff(double a, double b);

std::optional<Metric> metric_for(InsightCategory category);

// Ladder lookup; pearson_r is scored by its magnitude.
int statistical_score(const MetricReading& reading, const InterestingnessConfig& config);

enum class Aggregation { mean, sum, count, max, min };

// One group of a grouped aggregate, in first-appearance order.
struct GroupAggregate {
  std::string label;
  double value = 0.0;
  std::int64_t rows = 0;
};

struct MetricOutcome {
  std::optional<MetricReading> reading;
  std::optional<Diagnostic> diagnostic;  // set when no reading could be computed
};

// Maps the category to its metric and evaluates it over the context's
// attributes (schema order) with the context's "attr == value" filters
// applied. The summary is consulted only to pick the two groups a
// difference compares.
MetricOutcome statistical_metric(InsightCategory category, const DataContext& context,
                                 const std::string& summary, const Dataset& data);

// Exposed for tests.
RowPredicate context_filter(const DataContext& context, const Dataset& data);
Aggregation aggregation_for(const DataContext& context);
std::vector<GroupAggregate> group_aggregate(const Dataset& data, std::string_view group_attribute,
                                            std::optional<std::string_view> measure_attribute,
                                            Aggregation aggregation,
                                            const RowPredicate& filter = {});

}  // namespace insightkit
