#pragma once

#include <array>
#include <compare>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cabxde/matrix.hpp"

namespace cabxde {

struct Date {
  int year = 0;
  int month = 0;
  int day = 0;

  auto operator<=>(const Date&) const = default;

  std::string iso() const;

  /// Parses `text` against a strftime-style format built from %Y, %m, %d and
  /// literal separators (e.g. "%m/%d/%Y", "%Y-%m-%d"). Throws input_error on
  /// unparseable text or an invalid calendar date.
  static Date parse(std::string_view text, std::string_view format);
};

struct OhlcvRecord {
  Date date;
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;
  double volume = 0.0;
};

struct SeriesDataset {
  std::vector<OhlcvRecord> records;  // strictly increasing dates, non-empty
  std::string source_id;
};

inline constexpr std::size_t kFeatureCount = 5;
/// Column order of the numeric features, matching the CSV layout.
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "open", "high", "low", "volume", "close"};
inline constexpr std::size_t kCloseIndex = 4;

/// Parses UTF-8 CSV text with header Date,Open,High,Low,Volume,Close.
/// Records come back sorted ascending by date. Errors carry the offending
/// file line number.
SeriesDataset parse_csv(std::string_view text, std::string_view date_format,
                        std::string_view source_id = "");

/// Serializes back to the same CSV layout; numbers use shortest round-trip
/// formatting so parse(to_csv(x)) reproduces every value exactly.
std::string to_csv(const SeriesDataset& dataset);

struct FeatureRange {
  double v_min = 0.0;
  double v_max = 0.0;
};

struct ScalerParams {
  std::array<FeatureRange, kFeatureCount> ranges{};
};

/// Min-max extremes per feature over the dataset. A constant column is a
/// degenerate-scaler error.
ScalerParams fit_scaler(const SeriesDataset& dataset);

/// Maps v_min -> 0 and v_max -> 1; out-of-range inputs extrapolate linearly.
double scale(double v, const FeatureRange& range);
double inverse_scale(double v, const FeatureRange& range);

/// Per-feature scaled values; rows correspond to dataset records.
struct ScaledSeries {
  std::vector<Date> dates;
  Matrix values;  // n x kFeatureCount, entries scaled
};

ScaledSeries apply_scaler(const SeriesDataset& dataset, const ScalerParams& scaler);

struct WindowedSample {
  Matrix inputs;  // time_step x kFeatureCount, scaled
  double target = 0.0;  // scaled close of the row after the window
  Date target_date;
};

/// Supervised framing: sample k uses rows [k, k+time_step) as inputs and row
/// k+time_step's close as target. Requires more rows than time_step.
std::vector<WindowedSample> make_windows(const ScaledSeries& series, std::size_t time_step);

/// First floor(N * train_fraction) rows vs the remainder, no shuffling.
std::pair<SeriesDataset, SeriesDataset> chrono_split(const SeriesDataset& dataset,
                                                     double train_fraction);

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);

}  // namespace cabxde
