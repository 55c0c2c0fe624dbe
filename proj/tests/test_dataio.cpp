#include <doctest.h>

#include <cmath>

#include "cabxde/dataio.hpp"
#include "cabxde/errors.hpp"
#include "cabxde/rng.hpp"

using namespace cabxde;

namespace {

// The five sample rows the data layout is documented with.
const char* kSampleCsv =
    "Date,Open,High,Low,Volume,Close\n"
    "10/01/2014,387.427002,391.378998,380.779999,26229400.0,383.614990\n"
    "10/02/2014,383.988007,385.497009,372.946014,21777700.0,375.071991\n"
    "10/03/2014,375.181000,377.695007,357.859009,30901200.0,359.511993\n"
    "10/04/2014,359.891998,364.487000,325.885986,47236500.0,328.865997\n"
    "10/05/2014,328.915985,341.800995,289.295990,83308096.0,320.510010\n";

}  // namespace

TEST_CASE("date parsing") {
  const Date d = Date::parse("10/01/2014", "%m/%d/%Y");
  CHECK(d.year == 2014);
  CHECK(d.month == 10);
  CHECK(d.day == 1);
  CHECK(d.iso() == "2014-10-01");

  const Date iso = Date::parse("2023-07-06", "%Y-%m-%d");
  CHECK(iso == Date{2023, 7, 6});

  const Date dmy = Date::parse("01/08/2023", "%d/%m/%Y");
  CHECK(dmy == Date{2023, 8, 1});

  CHECK(Date::parse("02/29/2020", "%m/%d/%Y") == Date{2020, 2, 29});
  CHECK_THROWS_AS(Date::parse("02/29/2021", "%m/%d/%Y"), input_error);
  CHECK_THROWS_AS(Date::parse("13/01/2021", "%m/%d/%Y"), input_error);
  CHECK_THROWS_AS(Date::parse("junk", "%m/%d/%Y"), input_error);
  CHECK_THROWS_AS(Date::parse("2023-07-06", "%q"), input_error);
  CHECK(Date{2014, 10, 1} < Date{2014, 10, 5});
  CHECK(Date{2014, 12, 31} < Date{2015, 1, 1});
}

TEST_CASE("parse_csv on the sample rows") {
  const SeriesDataset ds = parse_csv(kSampleCsv, "%m/%d/%Y", "sample");
  REQUIRE(ds.records.size() == 5);
  CHECK(ds.records.front().date < ds.records.back().date);
  CHECK(ds.records[0].close == 383.614990);
  CHECK(ds.records[0].open == 387.427002);
  CHECK(ds.records[0].high == 391.378998);
  CHECK(ds.records[0].low == 380.779999);
  CHECK(ds.records[0].volume == 26229400.0);
  CHECK(ds.records[4].close == 320.510010);

  SUBCASE("rows arrive sorted even when shuffled in the file") {
    const std::string shuffled =
        "Date,Open,High,Low,Volume,Close\n"
        "10/05/2014,328.915985,341.800995,289.295990,83308096.0,320.510010\n"
        "10/01/2014,387.427002,391.378998,380.779999,26229400.0,383.614990\n";
    const SeriesDataset s = parse_csv(shuffled, "%m/%d/%Y");
    CHECK(s.records.front().date == Date{2014, 10, 1});
    CHECK(s.records.back().date == Date{2014, 10, 5});
  }
}

TEST_CASE("parse_csv error paths report the line") {
  CHECK_THROWS_WITH_AS(parse_csv("", "%m/%d/%Y"), "no records: input is empty", input_error);
  CHECK_THROWS_AS(parse_csv("Date,Open,High,Low,Volume,Close\n", "%m/%d/%Y"), input_error);

  const std::string bad_number =
      "Date,Open,High,Low,Volume,Close\n"
      "10/01/2014,387.4,391.3,380.7,26229400.0,383.6\n"
      "10/02/2014,xx,385.4,372.9,21777700.0,375.0\n";
  CHECK_THROWS_WITH_AS(parse_csv(bad_number, "%m/%d/%Y"),
                       "line 3: malformed number in column Open: 'xx'", input_error);

  const std::string dup =
      "Date,Open,High,Low,Volume,Close\n"
      "10/01/2014,387.4,391.3,380.7,26229400.0,383.6\n"
      "10/01/2014,383.9,385.4,372.9,21777700.0,375.0\n";
  CHECK_THROWS_AS(parse_csv(dup, "%m/%d/%Y"), input_error);

  const std::string bad_ohlc =
      "Date,Open,High,Low,Volume,Close\n"
      "10/01/2014,400.0,391.3,380.7,26229400.0,383.6\n";  // open above high
  CHECK_THROWS_AS(parse_csv(bad_ohlc, "%m/%d/%Y"), input_error);

  const std::string bad_date =
      "Date,Open,High,Low,Volume,Close\n"
      "99/99/2014,387.4,391.3,380.7,26229400.0,383.6\n";
  CHECK_THROWS_AS(parse_csv(bad_date, "%m/%d/%Y"), input_error);

  const std::string wrong_header = "When,Open,High,Low,Volume,Close\n";
  CHECK_THROWS_AS(parse_csv(wrong_header, "%m/%d/%Y"), input_error);
}

TEST_CASE("a UTF-8 BOM before the header is tolerated") {
  const std::string with_bom = std::string("\xEF\xBB\xBF") + kSampleCsv;
  CHECK(parse_csv(with_bom, "%m/%d/%Y").records.size() == 5);
}

TEST_CASE("csv round-trip reproduces every numeric field") {
  const SeriesDataset ds = parse_csv(kSampleCsv, "%m/%d/%Y");
  const SeriesDataset again = parse_csv(to_csv(ds), "%Y-%m-%d");
  REQUIRE(again.records.size() == ds.records.size());
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    CHECK(again.records[i].date == ds.records[i].date);
    CHECK(again.records[i].open == ds.records[i].open);
    CHECK(again.records[i].high == ds.records[i].high);
    CHECK(again.records[i].low == ds.records[i].low);
    CHECK(again.records[i].volume == ds.records[i].volume);
    CHECK(again.records[i].close == ds.records[i].close);
  }
}

TEST_CASE("fit_scaler extremes and degenerate column") {
  const SeriesDataset ds = parse_csv(kSampleCsv, "%m/%d/%Y");
  const ScalerParams scaler = fit_scaler(ds);
  CHECK(scaler.ranges[kCloseIndex].v_min == 320.510010);
  CHECK(scaler.ranges[kCloseIndex].v_max == 383.614990);

  SeriesDataset constant;
  constant.records = {{Date{2020, 1, 1}, 10, 10, 10, 10, 5},
                      {Date{2020, 1, 2}, 10, 10, 10, 10, 5}};
  CHECK_THROWS_AS(fit_scaler(constant), input_error);
}

TEST_CASE("scale and inverse_scale") {
  const FeatureRange r{320.510010, 383.614990};
  CHECK(scale(r.v_min, r) == 0.0);
  CHECK(scale(r.v_max, r) == 1.0);
  CHECK(scale((r.v_min + r.v_max) / 2.0, r) == doctest::Approx(0.5).epsilon(1e-15));

  const FeatureRange unit{0.0, 1.0};
  CHECK(scale(0.25, unit) == 0.25);
  CHECK(inverse_scale(0.25, unit) == 0.25);

  // out-of-range extrapolates instead of clipping
  CHECK(scale(r.v_max + 63.104980, r) > 1.0);
  CHECK(scale(r.v_min - 1.0, r) < 0.0);

  Rng rng(31);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.uniform(-1e6, 1e6);
    const double back = inverse_scale(scale(v, r), r);
    CHECK(std::fabs(back - v) <= 1e-12 * std::max(1.0, std::fabs(v)));
  }
}

TEST_CASE("make_windows") {
  const SeriesDataset ds = parse_csv(kSampleCsv, "%m/%d/%Y");
  const ScalerParams scaler = fit_scaler(ds);
  const ScaledSeries scaled = apply_scaler(ds, scaler);

  const auto samples = make_windows(scaled, 2);
  REQUIRE(samples.size() == 3);
  CHECK(samples[0].inputs.rows == 2);
  CHECK(samples[0].inputs.cols == kFeatureCount);
  CHECK(samples[0].target == scaled.values(2, kCloseIndex));
  CHECK(samples[0].target_date == Date{2014, 10, 3});

  // windowing preserves order: last input row of sample k is the
  // second-to-last input row of sample k+1
  for (std::size_t k = 0; k + 1 < samples.size(); ++k)
    for (std::size_t f = 0; f < kFeatureCount; ++f)
      CHECK(samples[k].inputs(1, f) == samples[k + 1].inputs(0, f));

  // entries lie in [0, 1] when the scaler was fitted on the same rows
  for (const auto& s : samples)
    for (double v : s.inputs.data) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }

  CHECK(make_windows(scaled, 4).size() == 1);
  CHECK_THROWS_AS(make_windows(scaled, 5), input_error);
}

TEST_CASE("chrono_split") {
  SeriesDataset ds;
  for (int i = 0; i < 10; ++i)
    ds.records.push_back({Date{2020, 1, i + 1}, 10, 11, 9, 10, 100});

  const auto [train8, test2] = chrono_split(ds, 0.8);
  CHECK(train8.records.size() == 8);
  CHECK(test2.records.size() == 2);
  CHECK(train8.records.back().date < test2.records.front().date);

  SeriesDataset five;
  five.records.assign(ds.records.begin(), ds.records.begin() + 5);
  const auto [train4, test1] = chrono_split(five, 0.8);
  CHECK(train4.records.size() == 4);
  CHECK(test1.records.size() == 1);

  CHECK_THROWS_AS(chrono_split(ds, 1.0), input_error);
  CHECK_THROWS_AS(chrono_split(ds, 0.0), input_error);
  CHECK_THROWS_AS(chrono_split(ds, -0.25), input_error);
}
