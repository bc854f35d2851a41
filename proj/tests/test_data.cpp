#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include "doctest.h"
#include "heterloss/dataset.hpp"
#include "heterloss/errors.hpp"
#include "heterloss/metrics.hpp"
#include "heterloss/rng.hpp"
#include "heterloss/synthetic.hpp"
#include "heterloss/terrain.hpp"

using namespace heterloss;

namespace {

LoadResult parse(const std::string& text, const CsvSchema& schema = {}) {
  std::istringstream in(text);
  return parse_csv(in, schema);
}

std::string config_message(const auto& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("CSV: valid record under the default header") {
  const auto r = parse("freq_mhz,dist_m,obs_m,group,pl_db\n3602,150.0,12.5,London,121.3\n");
  REQUIRE(r.dataset.size() == 1);
  CHECK(r.rejected.empty());
  const auto& rec = r.dataset.records[0];
  CHECK(rec.frequency_mhz == 3602.0);
  CHECK(rec.distance_m == 150.0);
  CHECK(rec.obstruction_m == 12.5);
  CHECK(rec.group == "London");
  CHECK(rec.path_loss_db == 121.3);
  CHECK_FALSE(r.dataset.has_oracle());
}

TEST_CASE("CSV: invariant violations are rejected with their line number") {
  const auto r = parse(
      "freq_mhz,dist_m,obs_m,group,pl_db\n"
      "3602,150,12.5,London,121.3\n"
      "3602,-5,0,London,90\n"
      "0,10,0,London,90\n"
      "915,10,-1,Boston,90\n"
      "915,10,0,Boston,nan\n"
      "915,10,0,Boston,80\n");
  CHECK(r.dataset.size() == 2);
  REQUIRE(r.rejected.size() == 4);
  CHECK(r.rejected[0].line == 3);
  CHECK(r.rejected[1].line == 4);
  CHECK(r.rejected[2].line == 5);
  CHECK(r.rejected[3].line == 6);
}

TEST_CASE("CSV: structural errors") {
  CHECK_THROWS_AS(parse(""), InputError);
  CHECK_THROWS_AS(parse("freq_mhz,dist_m,group,pl_db\n1,2,a,3\n"), InputError);
  CHECK_THROWS_AS(parse("freq_mhz,dist_m,obs_m,group,pl_db\n1,abc,0,a,3\n"), InputError);
  CHECK_THROWS_AS(load_csv("/nonexistent/file.csv"), InputError);
}

TEST_CASE("CSV: column mapping, CRLF and column order") {
  CsvSchema s;
  s.frequency = "f";
  s.path_loss = "loss";
  const auto r = parse("loss,group,obs_m,dist_m,f\r\n101.5,Leeds,3,250,1800\r\n", s);
  REQUIRE(r.dataset.size() == 1);
  CHECK(r.dataset.records[0].frequency_mhz == 1800.0);
  CHECK(r.dataset.records[0].path_loss_db == 101.5);
  CHECK(r.dataset.records[0].group == "Leeds");
}

TEST_CASE("CSV: write then read is lossless, oracle columns included") {
  auto spec = SyntheticSpec::defaults();
  spec.samples_per_frequency = 7;
  const auto data = generate_synthetic(spec);
  std::stringstream ss;
  write_csv(data, ss, {}, true);
  const auto back = parse_csv(ss);
  CHECK(back.rejected.empty());
  REQUIRE(back.dataset.size() == data.size());
  CHECK(back.dataset.has_oracle());
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(back.dataset.records[i].distance_m == data.records[i].distance_m);
    CHECK(back.dataset.records[i].path_loss_db == data.records[i].path_loss_db);
    CHECK(back.dataset.true_sd[i] == data.true_sd[i]);
  }
}

TEST_CASE("normalizer: z-score identity, log spacing and round trip") {
  auto spec = SyntheticSpec::defaults();
  spec.samples_per_frequency = 50;
  const auto data = generate_synthetic(spec);
  const auto stats = fit_normalizer(data);
  const Matrix x = apply(stats, data);
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    double m = 0, v = 0;
    for (std::size_t i = 0; i < x.rows(); ++i) m += x(i, f);
    m /= static_cast<double>(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) v += (x(i, f) - m) * (x(i, f) - m);
    v /= static_cast<double>(x.rows());
    CHECK(std::abs(m) < 1e-9);
    CHECK(std::abs(std::sqrt(v) - 1.0) < 1e-9);
  }
  // 100 m vs 1000 m differ by 1 in log space, i.e. by 1/sd after z-scoring.
  const Matrix two = apply(stats, Matrix{{900, 100, 0}, {900, 1000, 0}});
  CHECK((two(1, 1) - two(0, 1)) * stats.features[1].sd == doctest::Approx(1.0).epsilon(1e-12));

  const Matrix raw = denormalize(stats, x);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto f = raw_features(data.records[i]);
    for (std::size_t k = 0; k < kFeatureCount; ++k) CHECK(std::abs(raw(i, k) - f[k]) <= 1e-9 * std::max(1.0, std::abs(f[k])));
  }
}

TEST_CASE("normalizer uses train rows only") {
  auto spec = SyntheticSpec::defaults();
  spec.samples_per_frequency = 30;
  const auto data = generate_synthetic(spec);
  auto groups = data.group_rows();
  std::vector<std::size_t> train;
  for (const auto& [g, rows] : groups)
    if (g != "London") train.insert(train.end(), rows.begin(), rows.end());
  std::sort(train.begin(), train.end());
  const auto stats = fit_normalizer(data, train);
  CHECK(stats == fit_normalizer(data.subset(train)));
  const Matrix held = apply(stats, data, groups["London"]);
  double m = 0;
  for (std::size_t i = 0; i < held.rows(); ++i) m += held(i, 2);
  CHECK(std::abs(m / static_cast<double>(held.rows())) > 1e-6);
}

TEST_CASE("normalizer: a constant feature is a config error naming it") {
  Dataset d;
  for (int i = 0; i < 5; ++i) d.records.push_back({915.0, 100.0 + i, static_cast<double>(i), "A", 90.0});
  const auto msg = config_message([&] { (void)fit_normalizer(d); });
  CHECK(msg.find("frequency") != std::string::npos);
}

TEST_CASE("obstruction depth examples") {
  HeightProfile flat{std::vector<double>(50, 10.0), 5.0, 20.0, 1.5};
  CHECK(obstruction_depth(flat, false) == 0.0);
  CHECK(obstruction_depth(flat, true) == 0.0);

  // LOS from 10 m to 10 m; one sample at 20 m penetrates by 10 m
  HeightProfile hill{{0, 0, 0, 0, 20, 0, 0, 0, 0}, 10.0, 10.0, 10.0};
  CHECK(obstruction_depth(hill, false) == doctest::Approx(10.0));

  HeightProfile block{{0, 0, 0, 30, 30, 30, 0, 0, 0}, 10.0, 10.0, 10.0};
  CHECK(obstruction_depth(block, false) == doctest::Approx(60.0));

  CHECK_THROWS_AS(obstruction_depth(HeightProfile{{1.0}, 1.0, 1.0, 1.0}), InputError);
}

TEST_CASE("obstruction depth: earth bulge adds mid-path height") {
  // 40 km path, LOS 30 m above flat ground: bulge at midpoint is 20e3^2/(2 * 4/3 * 6371e3) = 23.5 m
  HeightProfile p{std::vector<double>(401, 0.0), 100.0, 30.0, 30.0};
  CHECK(obstruction_depth(p, false) == 0.0);
  CHECK(obstruction_depth(p, true) == 0.0);
  p.tx_height_agl = p.rx_height_agl = 10.0;
  CHECK(obstruction_depth(p, true) > 0.0);
  const double bulge = 20e3 * 20e3 / (2 * kEffectiveEarthFactor * kEarthRadiusM);
  HeightProfile three{{0, 0, 0}, 20e3, 0.0, 0.0};
  CHECK(obstruction_depth(three, true) == doctest::Approx(bulge).epsilon(1e-12));
}

TEST_CASE("obstruction depth is invariant to a common height offset") {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    HeightProfile p;
    p.spacing = rng.uniform(1, 30);
    p.tx_height_agl = rng.uniform(1, 40);
    p.rx_height_agl = rng.uniform(1, 5);
    for (int i = 0; i < 60; ++i) p.heights.push_back(rng.uniform(0, 40));
    HeightProfile q = p;
    const double shift = rng.uniform(-300, 300);
    for (double& h : q.heights) h += shift;
    CHECK(obstruction_depth(q) == doctest::Approx(obstruction_depth(p)).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("ASCII grid round trip and header errors") {
  AsciiGrid g(4, 3, 2.5, 1.0);
  g.xllcorner = 100;
  g.at(2, 1) = g.nodata;
  g.at(3, 2) = 7.25;
  std::stringstream ss;
  write_ascii_grid(g, ss);
  const auto back = read_ascii_grid(ss);
  CHECK(back.same_geometry(g));
  CHECK(back.values == g.values);

  std::istringstream bad("ncols 2\nnrows 2\ncellsize 1\n1 2 3\n");
  CHECK_THROWS_AS(read_ascii_grid(bad), InputError);
}

TEST_CASE("line cells and profile extraction") {
  const auto cells = line_cells({0, 0}, {4, 2});
  CHECK(cells.front() == GridCell{0, 0});
  CHECK(cells.back() == GridCell{4, 2});
  CHECK(cells.size() == 5);
  AsciiGrid g(5, 3, 10.0, 3.0);
  const auto p = extract_profile(g, {0, 0}, {4, 0}, 20, 1.5);
  CHECK(p.heights.size() == 5);
  CHECK(p.length() == doctest::Approx(40.0));
}

TEST_CASE("synthetic generator") {
  auto spec = SyntheticSpec::defaults();
  spec.samples_per_frequency = 100;
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  std::ostringstream sa, sb;
  write_csv(a, sa, {}, true);
  write_csv(b, sb, {}, true);
  CHECK(sa.str() == sb.str());

  CHECK(a.size() == 6 * 6 * 100);
  CHECK(a.groups().size() == 6);
  std::size_t zero = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& r = a.records[i];
    CHECK(r.distance_m >= 10.0);
    CHECK(r.distance_m <= 5000.0);
    CHECK(a.true_mean[i] == doctest::Approx(synthetic_true_mean(spec, r.frequency_mhz, r.distance_m, r.obstruction_m)));
    if (r.obstruction_m == 0.0) {
      ++zero;
      CHECK(a.true_sd[i] == 2.0);
    }
  }
  CHECK(zero > 0);
  CHECK(synthetic_true_sd(spec, 0.0) == 2.0);
  CHECK(free_space_path_loss_db(1000, 1000) == doctest::Approx(92.45));

  spec.seed = 2;
  std::ostringstream sc;
  write_csv(generate_synthetic(spec), sc);
  CHECK(sc.str() != sa.str());

  spec.noise = false;
  const auto clean = generate_synthetic(spec);
  for (std::size_t i = 0; i < clean.size(); ++i) CHECK(clean.records[i].path_loss_db == clean.true_mean[i]);
}

TEST_CASE("frequencies of the drive tests") {
  const auto f = drive_test_frequencies();
  CHECK(f.size() == 6);
  CHECK(std::find(f.begin(), f.end(), 3602.0) != f.end());
  CHECK(std::is_sorted(f.begin(), f.end()));
}

TEST_CASE("group partition") {
  auto spec = SyntheticSpec::defaults();
  spec.samples_per_frequency = 40;
  const auto d = generate_synthetic(spec);
  std::set<std::size_t> seen;
  std::size_t total = 0;
  for (const auto& [g, rows] : d.group_rows()) {
    total += rows.size();
    seen.insert(rows.begin(), rows.end());
    for (std::size_t i : rows) CHECK(d.records[i].group == g);
  }
  CHECK(total == d.size());
  CHECK(seen.size() == d.size());
}

TEST_CASE("oracle intervals are calibrated") {
  auto spec = SyntheticSpec::defaults();
  spec.samples_per_frequency = 2800;  // 100,800 rows
  const auto d = generate_synthetic(spec);
  PredictionSet p{d.targets(), d.true_mean, d.true_sd};
  const auto iv = intervals(p, 0.95);
  CHECK(picp(p.truth, iv) >= 0.945);
  CHECK(picp(p.truth, iv) <= 0.955);
}

TEST_CASE("synthetic spec from JSON") {
  const auto s = synthetic_spec_from_json(R"({"seed": 9, "samples_per_frequency": 3, "frequencies_mhz": [900, 1800]})");
  CHECK(s.seed == 9);
  CHECK(s.samples_per_frequency == 3);
  CHECK(s.frequencies_mhz.size() == 2);
  CHECK(s.groups.size() == 6);
  auto msg = config_message([] { (void)synthetic_spec_from_json(R"({"sigma_min_db": -1})"); });
  CHECK(msg.find("sigma_min_db") != std::string::npos);
  msg = config_message([] { (void)synthetic_spec_from_json(R"({"sigma_mni_db": 1})"); });
  CHECK(msg.find("sigma_mni_db") != std::string::npos);
  CHECK_THROWS_AS(synthetic_spec_from_json("{"), ConfigError);
}

TEST_CASE("full-scale file loads and groups correctly" * doctest::timeout(120)) {
  const auto spec = SyntheticSpec::defaults();
  const auto data = generate_synthetic(spec);
  REQUIRE(data.size() == 720'000);
  const auto path = std::filesystem::temp_directory_path() / "heterloss_test_720k.csv";
  write_csv(data, path);
  const auto back = load_csv(path);
  std::filesystem::remove(path);
  CHECK(back.rejected.empty());
  CHECK(back.dataset.size() == 720'000);
  const auto groups = back.dataset.group_rows();
  CHECK(groups.size() == 6);
  for (const auto& [g, rows] : groups) CHECK(rows.size() == 120'000);
}
