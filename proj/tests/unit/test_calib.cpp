#include <cmath>
#include <map>
#include <random>

#include "doctest.h"
#include "pixeluq/calib.hpp"
#include "pixeluq/errors.hpp"
#include "test_support.hpp"

using namespace pixeluq;

namespace {

CalibrationRecord rec(double sigma, double rmse_value, std::string dataset = "d", double ratio = 0.25) {
  CalibrationRecord r;
  r.example_id = "e";
  r.dataset = std::move(dataset);
  r.language = "eng";
  r.script = "Latin";
  r.mask_ratio = ratio;
  r.sigma_bar = sigma;
  r.rmse = rmse_value;
  return r;
}

std::vector<CalibrationRecord> cloud(std::mt19937_64& gen, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.1);
  std::vector<CalibrationRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = 0.05 + 0.3 * u(gen);
    out.push_back(rec(s, std::max(0.0, 0.8 * s + 0.05 + noise(gen))));
  }
  return out;
}

// Nearest lattice center found by scanning a generous neighbourhood of rows and columns.
std::map<std::pair<long, long>, std::size_t> brute_hex(const std::vector<CalibrationRecord>& rs, AxisRange xr,
                                                       AxisRange yr, std::size_t g) {
  const double h = std::sqrt(3.0) / 2.0;
  std::map<std::pair<long, long>, std::size_t> counts;
  for (const auto& r : rs) {
    if (r.sigma_bar < xr.min || r.sigma_bar > xr.max || r.rmse < yr.min || r.rmse > yr.max) continue;
    const double u = (r.sigma_bar - xr.min) / ((xr.max - xr.min) / double(g));
    const double v = (r.rmse - yr.min) / ((yr.max - yr.min) / double(g));
    std::pair<long, long> best{0, 0};
    double best_d = 1e300;
    const long rc = long(std::floor(v / h)), cc = long(std::floor(u));
    for (long row = rc - 3; row <= rc + 3; ++row)
      for (long col = cc - 3; col <= cc + 3; ++col) {
        const double cx = double(col) + (row % 2 != 0 ? 0.5 : 0.0), cy = double(row) * h;
        const double d = (u - cx) * (u - cx) + (v - cy) * (v - cy);
        if (d < best_d) {
          best_d = d;
          best = {row, col};
        }
      }
    ++counts[best];
  }
  return counts;
}

}  // namespace

TEST_CASE("record validation") {
  CHECK_NOTHROW(rec(0.1, 0.2).validate());
  CHECK_THROWS_AS(rec(-0.1, 0.2).validate(), DomainError);
  CHECK_THROWS_AS(rec(0.1, -0.2).validate(), DomainError);
  CHECK_THROWS_AS(rec(0.1, 0.2, "d", 1.5).validate(), DomainError);
}

TEST_CASE("hexbin basics") {
  const auto at_center = hexbin_counts({rec(0.0, 0.0)}, {0, 1}, {0, 1}, 10);
  REQUIRE(at_center.bins.size() == 1);
  CHECK(at_center.bins[0].count == 1);
  CHECK(at_center.bins[0].cx == 0.0);
  CHECK(at_center.bins[0].cy == 0.0);

  std::vector<CalibrationRecord> same(37, rec(0.31, 0.62));
  const auto one = hexbin_counts(same, {0, 1}, {0, 1}, 8);
  REQUIRE(one.bins.size() == 1);
  CHECK(one.bins[0].count == 37);

  const auto dropped = hexbin_counts({rec(0.5, 0.5), rec(2.0, 0.5), rec(0.5, 3.0)}, {0, 1}, {0, 1}, 4);
  CHECK(dropped.in_range == 1);
  CHECK(dropped.dropped == 2);

  CHECK_THROWS_AS(hexbin_counts(same, {1, 1}, {0, 1}, 4), ConfigError);
  CHECK_THROWS_AS(hexbin_counts(same, {0, 1}, {0, 1}, 0), ConfigError);
}

TEST_CASE("hexbin against brute force") {
  std::mt19937_64 gen(17);
  for (std::size_t g : {1u, 5u, 20u, 37u}) {
    const auto pts = cloud(gen, 500);
    const AxisRange xr{0.0, 0.4}, yr{0.0, 0.5};
    const auto res = hexbin_counts(pts, xr, yr, g);
    const auto oracle = brute_hex(pts, xr, yr, g);
    std::size_t total = 0;
    REQUIRE(res.bins.size() == oracle.size());
    for (const auto& b : res.bins) {
      CHECK(oracle.at({b.row, b.col}) == b.count);
      total += b.count;
    }
    CHECK(total == res.in_range);
    CHECK(res.in_range + res.dropped == pts.size());
  }
}

TEST_CASE("pearson_r") {
  std::vector<CalibrationRecord> line, neg;
  for (int i = 0; i < 10; ++i) {
    line.push_back(rec(i * 0.1, 2 * i * 0.1 + 1));
    neg.push_back(rec(i * 0.1, 1.0 - i * 0.1));
  }
  CHECK(pearson_r(line) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pearson_r(neg) == doctest::Approx(-1.0).epsilon(1e-12));

  std::mt19937_64 gen(3);
  const auto pts = cloud(gen, 100);
  double mx = 0, my = 0;
  for (const auto& p : pts) {
    mx += p.sigma_bar;
    my += p.rmse;
  }
  mx /= 100;
  my /= 100;
  double sxy = 0, sxx = 0, syy = 0;
  for (const auto& p : pts) {
    sxy += (p.sigma_bar - mx) * (p.rmse - my);
    sxx += (p.sigma_bar - mx) * (p.sigma_bar - mx);
    syy += (p.rmse - my) * (p.rmse - my);
  }
  const double r = pearson_r(pts);
  CHECK(std::abs(r - sxy / std::sqrt(sxx * syy)) <= 1e-10);

  auto affine = pts;
  for (auto& p : affine) {
    p.sigma_bar = 3.0 * p.sigma_bar + 2.0;
    p.rmse = 0.5 * p.rmse + 7.0;
  }
  CHECK(std::abs(pearson_r(affine) - r) <= 1e-10);

  CHECK_THROWS_AS(pearson_r({rec(0.1, 0.2)}), DegenerateInputError);
  CHECK_THROWS_AS(pearson_r({rec(0.1, 0.2), rec(0.1, 0.3)}), DegenerateInputError);
}

TEST_CASE("underestimation fraction") {
  CHECK(underestimation_fraction({rec(0.2, 0.2), rec(0.4, 0.4)}) == 0.0);
  CHECK(underestimation_fraction({rec(0.1, 0.3), rec(0.2, 0.1), rec(0.2, 0.25)}) == 2.0 / 3.0);

  std::mt19937_64 gen(5);
  auto pts = cloud(gen, 250);
  std::vector<CalibrationRecord> sym;
  for (const auto& p : pts) {
    if (p.sigma_bar == p.rmse) continue;
    sym.push_back(p);
    sym.push_back(rec(p.rmse, p.sigma_bar));
  }
  CHECK(underestimation_fraction(sym) == 0.5);

  const double f = underestimation_fraction(pts);
  auto scaled = pts;
  for (auto& p : scaled) {
    p.sigma_bar *= 4.0;
    p.rmse *= 4.0;
  }
  CHECK(underestimation_fraction(scaled) == f);
  CHECK(underestimation_fraction(pts, 2.0) <= f);
  CHECK_THROWS_AS(underestimation_fraction({}), EmptyInputError);
}

TEST_CASE("group summaries") {
  const auto single = group_summary({rec(0.2, 0.3)}, "dataset");
  REQUIRE(single.size() == 1);
  CHECK(single[0].mean_sigma == 0.2);
  CHECK(single[0].mean_rmse == 0.3);
  CHECK_FALSE(single[0].mean_gnll.has_value());

  const auto consts = group_summary({rec(0.1, 0.1, "b"), rec(0.1, 0.1, "b"), rec(0.4, 0.5, "a")}, "dataset");
  REQUIRE(consts.size() == 2);
  CHECK(consts[0].group == "a");
  CHECK(consts[1].mean_sigma == doctest::Approx(0.1));

  CHECK_THROWS_AS(group_summary({rec(0.1, 0.1)}, "colour"), ConfigError);
  CHECK_THROWS_AS(group_summary({}, "dataset"), EmptyInputError);

  std::mt19937_64 gen(12);
  auto pts = cloud(gen, 1000);
  const std::vector<std::string> names{"masakhaner", "tydiqa", "glue"};
  for (std::size_t i = 0; i < pts.size(); ++i) {
    pts[i].dataset = names[i % 3];
    pts[i].gnll = double(i % 7);
  }
  const auto groups = group_summary(pts, "dataset");
  REQUIRE(groups.size() == 3);
  double weighted = 0.0, global = 0.0;
  for (const auto& p : pts) global += p.sigma_bar;
  global /= double(pts.size());
  for (const auto& g : groups) {
    std::vector<double> s;
    double r = 0.0, gn = 0.0;
    for (const auto& p : pts)
      if (p.dataset == g.group) {
        s.push_back(p.sigma_bar);
        r += p.rmse;
        gn += *p.gnll;
      }
    std::sort(s.begin(), s.end());
    CHECK(g.count == s.size());
    CHECK(g.mean_rmse == doctest::Approx(r / double(s.size())).epsilon(1e-12));
    CHECK(*g.mean_gnll == doctest::Approx(gn / double(s.size())).epsilon(1e-12));
    const double pos = 0.5 * double(s.size() - 1);
    const auto lo = std::size_t(pos);
    CHECK(g.sigma.median == doctest::Approx(s[lo] + (pos - double(lo)) * (s[lo + 1] - s[lo])).epsilon(1e-12));
    weighted += g.mean_sigma * double(g.count);
  }
  CHECK(std::abs(weighted / double(pts.size()) - global) <= 1e-10);

  const auto by_ratio = group_summary({rec(0.1, 0.1, "d", 0.25), rec(0.2, 0.1, "d", 0.5)}, "mask_ratio");
  CHECK(by_ratio[0].group == "0.25");
  CHECK(by_ratio[1].group == "0.5");
}

TEST_CASE("csv round trip and golden") {
  const auto dir = testing::scratch_dir("calib");
  std::mt19937_64 gen(21);
  auto pts = cloud(gen, 50);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    pts[i].example_id = "ex," + std::to_string(i) + " \"q\"";
    if (i % 3 == 0) pts[i].gnll = -1.0 / double(i + 3);
  }
  export_records_csv(pts, dir / "r.csv");
  CHECK(import_records_csv(dir / "r.csv") == pts);

  export_records_csv({}, dir / "empty.csv");
  CHECK(testing::slurp(dir / "empty.csv") == "example_id,dataset,language,script,mask_ratio,sigma_bar,rmse,gnll\r\n");
  CHECK(import_records_csv(dir / "empty.csv").empty());

  auto fixed = rec(0.1, 0.30000000000000004, "tydiqa", 0.25);
  fixed.example_id = "q-17";
  fixed.language = "swa";
  fixed.gnll = -2.5e-7;
  export_records_csv({fixed}, dir / "fixed.csv");
  testing::check_golden("records.csv", testing::slurp(dir / "fixed.csv"));

  CHECK(csv_escape("a\"b") == "\"a\"\"b\"");
  CHECK(parse_csv("a,\"b,c\"\r\n1,2\n") == std::vector<std::vector<std::string>>{{"a", "b,c"}, {"1", "2"}});
  CHECK(format_double(0.1) == "0.1");
  CHECK(parse_double("1e-3") == 0.001);
  CHECK_THROWS(parse_double("0,5"));
}
