#include "cabxde/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "cabxde/errors.hpp"

namespace cabxde {

namespace {

bool is_leap(int year) {
  return (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
}

int days_in_month(int year, int month) {
  static constexpr int kDays[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (month == 2 && is_leap(year)) return 29;
  return kDays[month - 1];
}

bool parse_int(std::string_view& text, int min_digits, int max_digits, int& out) {
  int n = 0;
  int value = 0;
  while (n < max_digits && !text.empty() && text.front() >= '0' && text.front() <= '9') {
    value = value * 10 + (text.front() - '0');
    text.remove_prefix(1);
    ++n;
  }
  if (n < min_digits) return false;
  out = value;
  return true;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

double parse_number(std::string_view field, std::size_t line_no, std::string_view column) {
  field = trim(field);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    throw input_error("line " + std::to_string(line_no) + ": malformed number in column " +
                      std::string(column) + ": '" + std::string(field) + "'");
  return value;
}

void split_fields(std::string_view line, std::vector<std::string_view>& out) {
  out.clear();
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
}

}  // namespace

std::string Date::iso() const {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
  return buf;
}

Date Date::parse(std::string_view text, std::string_view format) {
  std::string_view rest = trim(text);
  Date d;
  bool have_y = false, have_m = false, have_d = false;
  for (std::size_t i = 0; i < format.size(); ++i) {
    if (format[i] == '%') {
      if (i + 1 >= format.size())
        throw input_error("date format ends with a dangling '%'");
      const char spec = format[++i];
      bool ok = true;
      switch (spec) {
        case 'Y': ok = parse_int(rest, 4, 4, d.year); have_y = true; break;
        case 'm': ok = parse_int(rest, 1, 2, d.month); have_m = true; break;
        case 'd': ok = parse_int(rest, 1, 2, d.day); have_d = true; break;
        default:
          throw input_error(std::string("unsupported date format token '%") + spec + "'");
      }
      if (!ok)
        throw input_error("unparseable date '" + std::string(text) + "' for format '" +
                          std::string(format) + "'");
    } else {
      if (rest.empty() || rest.front() != format[i])
        throw input_error("unparseable date '" + std::string(text) + "' for format '" +
                          std::string(format) + "'");
      rest.remove_prefix(1);
    }
  }
  if (!rest.empty() || !have_y || !have_m || !have_d)
    throw input_error("unparseable date '" + std::string(text) + "' for format '" +
                      std::string(format) + "'");
  if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > days_in_month(d.year, d.month))
    throw input_error("invalid calendar date '" + std::string(text) + "'");
  return d;
}

SeriesDataset parse_csv(std::string_view text, std::string_view date_format,
                        std::string_view source_id) {
  static constexpr std::string_view kHeader[6] = {"date", "open", "high", "low", "volume", "close"};

  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);  // UTF-8 BOM

  SeriesDataset dataset;
  dataset.source_id = std::string(source_id);

  std::vector<std::string_view> fields;
  std::vector<std::size_t> line_numbers;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool header_seen = false;

  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    std::string_view line = trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (line.empty()) {
      if (pos > text.size()) break;
      continue;
    }

    split_fields(line, fields);
    if (!header_seen) {
      if (fields.size() != 6)
        throw input_error("line " + std::to_string(line_no) + ": header must have six columns");
      for (int i = 0; i < 6; ++i)
        if (lower(trim(fields[i])) != kHeader[i])
          throw input_error("line " + std::to_string(line_no) +
                            ": expected header Date,Open,High,Low,Volume,Close");
      header_seen = true;
      continue;
    }

    if (fields.size() != 6)
      throw input_error("line " + std::to_string(line_no) + ": expected six fields, got " +
                        std::to_string(fields.size()));

    OhlcvRecord rec;
    rec.date = [&] {
      try {
        return Date::parse(fields[0], date_format);
      } catch (const input_error& e) {
        throw input_error("line " + std::to_string(line_no) + ": " + e.what());
      }
    }();
    rec.open = parse_number(fields[1], line_no, "Open");
    rec.high = parse_number(fields[2], line_no, "High");
    rec.low = parse_number(fields[3], line_no, "Low");
    rec.volume = parse_number(fields[4], line_no, "Volume");
    rec.close = parse_number(fields[5], line_no, "Close");

    for (double price : {rec.open, rec.high, rec.low, rec.close})
      if (!std::isfinite(price) || price <= 0.0)
        throw input_error("line " + std::to_string(line_no) + ": prices must be finite and > 0");
    if (!std::isfinite(rec.volume) || rec.volume < 0.0)
      throw input_error("line " + std::to_string(line_no) + ": volume must be finite and >= 0");
    if (rec.low > rec.open || rec.open > rec.high || rec.low > rec.close || rec.close > rec.high)
      throw input_error("line " + std::to_string(line_no) +
                        ": violated OHLC ordering (need low <= open,close <= high)");

    dataset.records.push_back(rec);
    line_numbers.push_back(line_no);
  }

  if (!header_seen) throw input_error("no records: input is empty");
  if (dataset.records.empty()) throw input_error("no records: file has a header but no data rows");

  std::vector<std::size_t> order(dataset.records.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dataset.records[a].date < dataset.records[b].date;
  });

  std::vector<OhlcvRecord> sorted;
  sorted.reserve(dataset.records.size());
  for (std::size_t i : order) sorted.push_back(dataset.records[i]);
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i].date == sorted[i - 1].date)
      throw input_error("line " + std::to_string(line_numbers[order[i]]) + ": duplicate date " +
                        sorted[i].date.iso());
  dataset.records = std::move(sorted);
  return dataset;
}

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string to_csv(const SeriesDataset& dataset) {
  std::string out = "Date,Open,High,Low,Volume,Close\n";
  for (const OhlcvRecord& r : dataset.records) {
    out += r.date.iso();
    out += ',';
    out += format_double(r.open);
    out += ',';
    out += format_double(r.high);
    out += ',';
    out += format_double(r.low);
    out += ',';
    out += format_double(r.volume);
    out += ',';
    out += format_double(r.close);
    out += '\n';
  }
  return out;
}

namespace {

double feature_value(const OhlcvRecord& r, std::size_t feature) {
  switch (feature) {
    case 0: return r.open;
    case 1: return r.high;
    case 2: return r.low;
    case 3: return r.volume;
    default: return r.close;
  }
}

}  // namespace

ScalerParams fit_scaler(const SeriesDataset& dataset) {
  if (dataset.records.empty()) throw input_error("fit_scaler: empty dataset");
  ScalerParams params;
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    double lo = feature_value(dataset.records.front(), f);
    double hi = lo;
    for (const OhlcvRecord& r : dataset.records) {
      lo = std::min(lo, feature_value(r, f));
      hi = std::max(hi, feature_value(r, f));
    }
    if (!(hi > lo))
      throw input_error("fit_scaler: degenerate (constant) column '" +
                        std::string(kFeatureNames[f]) + "'");
    params.ranges[f] = {lo, hi};
  }
  return params;
}

double scale(double v, const FeatureRange& range) {
  return (v - range.v_min) / (range.v_max - range.v_min);
}

double inverse_scale(double v, const FeatureRange& range) {
  return v * (range.v_max - range.v_min) + range.v_min;
}

ScaledSeries apply_scaler(const SeriesDataset& dataset, const ScalerParams& scaler) {
  ScaledSeries out;
  out.dates.reserve(dataset.records.size());
  out.values = Matrix(dataset.records.size(), kFeatureCount);
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    const OhlcvRecord& r = dataset.records[i];
    out.dates.push_back(r.date);
    for (std::size_t f = 0; f < kFeatureCount; ++f)
      out.values(i, f) = scale(feature_value(r, f), scaler.ranges[f]);
  }
  return out;
}

std::vector<WindowedSample> make_windows(const ScaledSeries& series, std::size_t time_step) {
  const std::size_t n = series.dates.size();
  if (time_step == 0) throw input_error("make_windows: time_step must be positive");
  if (n <= time_step)
    throw input_error("make_windows: insufficient data (" + std::to_string(n) +
                      " rows, need more than time_step = " + std::to_string(time_step) + ")");
  std::vector<WindowedSample> samples;
  samples.reserve(n - time_step);
  for (std::size_t k = 0; k + time_step < n; ++k) {
    WindowedSample s;
    s.inputs = Matrix(time_step, kFeatureCount);
    for (std::size_t t = 0; t < time_step; ++t)
      for (std::size_t f = 0; f < kFeatureCount; ++f) s.inputs(t, f) = series.values(k + t, f);
    s.target = series.values(k + time_step, kCloseIndex);
    s.target_date = series.dates[k + time_step];
    samples.push_back(std::move(s));
  }
  return samples;
}

std::pair<SeriesDataset, SeriesDataset> chrono_split(const SeriesDataset& dataset,
                                                     double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw input_error("chrono_split: train_fraction must be in (0, 1)");
  const std::size_t n = dataset.records.size();
  const std::size_t n_train =
      static_cast<std::size_t>(std::floor(static_cast<double>(n) * train_fraction));
  SeriesDataset train, test;
  train.source_id = dataset.source_id + "/train";
  test.source_id = dataset.source_id + "/test";
  train.records.assign(dataset.records.begin(), dataset.records.begin() + n_train);
  test.records.assign(dataset.records.begin() + n_train, dataset.records.end());
  return {std::move(train), std::move(test)};
}

}  // namespace cabxde
