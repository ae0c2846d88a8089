// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include "border_rdd/csv.hpp"
#include "border_rdd/outcomes.hpp"
#include "border_rdd/studies.hpp"
#include "border_rdd/synth.hpp"
#include "border_rdd/text.hpp"
#include "commands.hpp"
#include "oracles.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

using namespace border_rdd;
namespace fs = std::filesystem;

namespace {

struct Verdict
{
  bool pass = false;
  std::string detail;
};

double
seconds_since(std::chrono::steady_clock::time_point t0)
{
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string
fmt(const char* f, auto... args)
{
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

//! The curved world shared by the coverage, null and bandwidth criteria:
//! about 20k pixel cells, quadratic bend on the treated side.
SyntheticWorldConfig
curved_world(double delta)
{
  SyntheticWorldConfig c;
  c.delta = delta;
  c.profile[1] = { 0.0, 0.005 };
  c.noise_sd = 1.0;
  return c;
}

RddSpec
lum_sum_spec()
{
  RddSpec s;
  s.outcome = "lum_sum";
  s.p = 1;
  return s;
}

Verdict
noiseless_exactness()
{
  const auto t0 = std::chrono::steady_clock::now();
  SyntheticWorldConfig c;
  c.border_shape = BorderShape::straight;
  c.border_count = 2;
  c.border_spacing_deg = 1.2;
  c.lon_min = 110.0;
  c.lon_max = 112.4;
  c.lat_min = 30.0;
  c.lat_max = 31.0;
  c.delta = 2.0;
  c.noise_sd = 0.0;
  c.profile[0] = { 0.08 };
  c.profile[1] = { 0.12 };
  const auto table = world_table(generate_world(c), pixel_fishnet(c));
  const auto e = estimate(table, lum_sum_spec());
  const double secs = seconds_since(t0);
  const double rel = std::max(std::abs(e.beta - 2.0), std::abs(e.beta_bc - 2.0)) / 2.0;
  return { rel <= 1e-8 && secs < 5.0 && table.size() >= 20000,
           fmt("n=%zu beta=%.15g beta_bc=%.15g rel_err=%.2e time=%.2fs", table.size(), e.beta, e.beta_bc, rel,
               secs) };
}

Verdict
coverage()
{
  const auto t0 = std::chrono::steady_clock::now();
  auto c = curved_world(2.0);
  c.seed = 1000;
  const auto m = monte_carlo_coverage(c, lum_sum_spec(), 500, pixel_fishnet(c));
  const double secs = seconds_since(t0);
  return { m.failures == 0 && m.coverage >= 0.92 && m.coverage <= 0.97 && secs < 600.0,
           fmt("reps=%zu failures=%zu coverage=%.3f mean_beta=%.4f mean_h=%.2f time=%.1fs", m.reps, m.failures,
               m.coverage, m.mean_beta, m.mean_h, secs) };
}

Verdict
null_calibration()
{
  auto c = curved_world(0.0);
  c.seed = 50000;
  const auto m = monte_carlo_coverage(c, lum_sum_spec(), 500, pixel_fishnet(c));
  return { m.failures == 0 && m.rejection_rate >= 0.03 && m.rejection_rate <= 0.08,
           fmt("reps=%zu failures=%zu rejection=%.3f", m.reps, m.failures, m.rejection_rate) };
}

Verdict
bandwidth_sanity()
{
  const auto spec = lum_sum_spec();
  const int reps = 200;
  const auto base = curved_world(2.0);
  std::vector<RddData> data(static_cast<std::size_t>(reps));
  std::vector<double> h_cv(static_cast<std::size_t>(reps));
#pragma omp parallel for schedule(dynamic, 1)
  for (int r = 0; r < reps; ++r) {
    auto c = base;
    c.seed = 5000 + static_cast<std::uint64_t>(r);
    const auto i = static_cast<std::size_t>(r);
    data[i] = make_rdd_data(world_table(generate_world(c), pixel_fishnet(c)), spec);
    h_cv[i] = select_bandwidth(data[i], spec).h;
  }
  std::vector<double> grid;
  for (int k = 0; k < 60; ++k)
    grid.push_back(std::exp(std::log(50.0) * k / 59.0));
  const auto oracle = brute_force_mse_bandwidth(data, spec, 2.0, grid);
  const auto within = std::count_if(h_cv.begin(), h_cv.end(),
                                    [&](double h) { return h <= 1.5 * oracle.h && h >= oracle.h / 1.5; });
  const double share = static_cast<double>(within) / reps;

  // Rate check: the extent grows with n so pixel density stays fixed.
  const int rate_reps = 40;
  std::vector<double> log_n, log_h;
  for (int n : { 1000, 4000, 16000, 64000 }) {
    auto c = base;
    c.lat_max = c.lat_min + 0.01 * (n / 100);
    std::vector<double> lh(rate_reps), ln(rate_reps);
#pragma omp parallel for schedule(dynamic, 1)
    for (int r = 0; r < rate_reps; ++r) {
      auto cr = c;
      cr.seed = 7000 + static_cast<std::uint64_t>(r);
      const auto d = make_rdd_data(world_table(generate_world(cr), pixel_fishnet(cr)), spec);
      lh[static_cast<std::size_t>(r)] = std::log(select_bandwidth(d, spec).h);
      ln[static_cast<std::size_t>(r)] = std::log(static_cast<double>(d.size()));
    }
    log_n.push_back(std::accumulate(ln.begin(), ln.end(), 0.0) / rate_reps);
    log_h.push_back(std::accumulate(lh.begin(), lh.end(), 0.0) / rate_reps);
  }
  const double slope = simple_ols(log_n, log_h, false).slope;
  return { share >= 0.8 && std::abs(slope + 0.2) <= 0.05,
           fmt("oracle_h=%.2f within_1.5x=%.3f slope=%.3f", oracle.h, share, slope) };
}

Verdict
balance_power_size()
{
  SyntheticWorldConfig b;
  b.lat_max = 30.5;
  b.covariate_jumps["elevation"] = 1.0;
  const std::vector<std::string> smooth = { "precipitation", "dist_road", "log_population" };
  const int reps = 500, power_reps = 200;
  std::vector<int> hit(reps), false_hits(reps * smooth.size());
  std::size_t cells = 0;
#pragma omp parallel for schedule(dynamic, 1) reduction(max : cells)
  for (int r = 0; r < reps; ++r) {
    auto c = b;
    c.seed = 100 + static_cast<std::uint64_t>(r);
    const auto t = world_table(generate_world(c), pixel_fishnet(c));
    cells = std::max(cells, t.size());
    RddSpec e;
    if (r < power_reps) {
      e.outcome = "elevation";
      hit[static_cast<std::size_t>(r)] = estimate(t, e).p_value_robust < 0.05;
    }
    for (std::size_t k = 0; k < smooth.size(); ++k) {
      e.outcome = smooth[k];
      false_hits[static_cast<std::size_t>(r) * smooth.size() + k] = estimate(t, e).p_value_robust < 0.05;
    }
  }
  const double power = std::accumulate(hit.begin(), hit.end(), 0.0) / power_reps;
  const double size = std::accumulate(false_hits.begin(), false_hits.end(), 0.0) /
                      static_cast<double>(false_hits.size());
  return { power >= 0.8 && size >= 0.03 && size <= 0.08,
           fmt("n=%zu power=%.3f (%d reps) size=%.4f (%d reps x %zu covariates)", cells, power, power_reps, size,
               reps, smooth.size()) };
}

Verdict
battery_null()
{
  SyntheticWorldConfig c;
  c.border_count = 22;
  c.lon_min = 110.0;
  c.lon_max = 133.0;
  c.pixel_size = 0.05;
  c.profile[1] = { 0.0, 0.005 };
  c.delta = 0.0;
  const auto tables = split_by_border(world_table(generate_world(c), pixel_fishnet(c)));
  std::vector<std::string> ids;
  for (const auto& [id, t] : tables)
    ids.push_back(id);
  int ok = 0, significant = 0;
  for (const auto& r : per_border_battery(tables, ids, RddSpec{})) {
    if (r.outcome != "luminosity" || r.p != 1 || r.status != RunStatus::ok)
      continue;
    ++ok;
    significant += r.estimate.p_value_robust < 0.05;
  }
  return { ids.size() == 22 && ok == 22 && significant <= 3,
           fmt("borders=%zu estimated=%d significant=%d", ids.size(), ok, significant) };
}

Verdict
transforms()
{
  const double lum0 = luminosity_transform(0.0);
  const bool pass = lum0 == -4.605170185988091 && lum0 == std::log(0.01) && lit_indicator(0.0) == 0 &&
                    lit_indicator(1e-12) == 1 && lit_indicator(63.0) == 1;
  return { pass, fmt("luminosity(0)=%.17g lit(0)=%d lit(1e-12)=%d", lum0, lit_indicator(0.0),
                     lit_indicator(1e-12)) };
}

Verdict
dialect_table()
{
  const std::map<int, std::size_t> counts = { { 1, 3578 }, { 2, 4143 }, { 3, 10201 }, { 4, 72353 },
                                              { 5, 6141 }, { 6, 7562 }, { 7, 2544 },  { 8, 1259 } };
  const double expected[] = { 3.32, 3.84, 9.46, 67.13, 5.70, 7.02, 2.36, 1.17 };
  const auto f = dialect_frequency(counts);
  double worst = 0.0;
  for (std::size_t i = 0; i < f.size() && i < 8; ++i)
    worst = std::max(worst, std::abs(f[i].percent - expected[i]));
  return { f.size() == 8 && worst <= 0.01 && f[3].percent == 67.13,
           fmt("mandarin=%.2f%% max_abs_dev=%.4f", f[3].percent, worst) };
}

Verdict
oracle_equivalences()
{
  std::mt19937_64 gen(2024);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(-30.0, 30.0), hpick(8.0, 40.0);

  // Weighted fits against the normal equations.
  double worst_wls = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const int p = 1 + rep % 2;
    const int ncov = rep % 3;
    const std::size_t n = 150 + 10 * static_cast<std::size_t>(rep);
    std::vector<double> d(n), y(n);
    Eigen::MatrixXd cov(static_cast<Eigen::Index>(n), ncov);
    for (std::size_t i = 0; i < n; ++i) {
      d[i] = u(gen);
      y[i] = 1.0 + 0.8 * (d[i] > 0.0) + 0.05 * d[i] + 0.002 * d[i] * d[i] + 0.3 * z(gen);
      for (int c = 0; c < ncov; ++c) {
        cov(static_cast<Eigen::Index>(i), c) = z(gen);
        y[i] += 0.4 * cov(static_cast<Eigen::Index>(i), c);
      }
    }
    const double h = hpick(gen);
    RddSpec spec;
    spec.p = p;
    const auto e = local_poly_fit(RddData::from_vectors(d, y, {}, cov), spec, h);
    oracle::Matrix x;
    std::vector<double> yy, w;
    for (std::size_t i = 0; i < n; ++i) {
      if (std::abs(d[i]) >= h)
        continue;
      const double t = d[i] > 0.0;
      std::vector<double> row = { 1.0, t };
      for (int k = 1; k <= p; ++k)
        row.push_back(std::pow(d[i], k));
      for (int k = 1; k <= p; ++k)
        row.push_back(t * std::pow(d[i], k));
      for (int c = 0; c < ncov; ++c)
        row.push_back(cov(static_cast<Eigen::Index>(i), c));
      x.push_back(row);
      yy.push_back(y[i]);
      w.push_back(1.0 - std::abs(d[i]) / h);
    }
    const auto coef = oracle::weighted_ols(x, yy, w);
    worst_wls = std::max(worst_wls, std::abs(e.beta - coef[1]) / std::max(1.0, std::abs(coef[1])));
    worst_wls = std::max(worst_wls, std::abs(e.intercept - coef[0]) / std::max(1.0, std::abs(coef[0])));
  }

  // Neighbour variance with ties in d.
  std::vector<double> d, y;
  std::vector<std::int64_t> key;
  std::uniform_int_distribution<int> grid_d(-200, 200);
  for (int i = 0; i < 2000; ++i) {
    d.push_back(0.25 * grid_d(gen) + 0.125);
    y.push_back(z(gen));
    key.push_back(i);
  }
  const auto data = RddData::from_vectors(d, y, key);
  const bool nn_equal = nn_variance(data.d, data.y, data.key, 3) ==
                        oracle::nn_variance({ data.d.begin(), data.d.end() }, { data.y.begin(), data.y.end() },
                                            { data.key.begin(), data.key.end() }, 3);

  // Pixel aggregation.
  RasterGrid g;
  g.ncols = 173;
  g.nrows = 91;
  g.xll = 110.0;
  g.yll = 30.0;
  g.cellsize = 0.01;
  std::uniform_real_distribution<double> dn(0.0, 63.0);
  for (std::size_t i = 0; i < g.ncols * g.nrows; ++i)
    g.values.push_back(i % 17 == 0 ? g.nodata : std::round(dn(gen)));
  const FishnetSpec net{ 0.05, 110.0, 30.0 };
  bool agg_equal = true;
  for (auto r : { Reducer::sum, Reducer::mean }) {
    const auto got = aggregate_to_cells(g, net, r);
    const auto want = oracle::aggregate(g, net, r);
    agg_equal = agg_equal && got.size() == want.size() &&
                std::equal(got.begin(), got.end(), want.begin(), [](const auto& a, const auto& b) {
                  return a.first == b.first && a.second.value == b.second.value &&
                         a.second.pixel_count == b.second.pixel_count;
                });
  }

  // Six cities worked by hand: within-province gaps 1,3,4,5 and across 6,5,3,7,12.
  auto city = [](const std::string& id, const std::string& prov, double lon, double m) {
    City c;
    c.city_id = id;
    c.province = prov;
    c.location = { lon, 0.0 };
    for (std::size_t k = 0; k < kSurveyMeasures; ++k)
      c.measures[k] = static_cast<double>(k + 1) * m;
    return c;
  };
  BorderPolyline b;
  b.border_id = "X";
  b.vertices = { { 0.0, 0.0 }, { 0.0, 1.0 } };
  b.prov_high = "A";
  b.prov_low = "B";
  b.rank_high = 9;
  b.rank_low = 2;
  const std::vector<City> cities = { city("A1", "A", 0.0, 1.0), city("A2", "A", 0.3, 2.0),
                                     city("A3", "A", 1.0, 4.0), city("B1", "B", 1.2, 7.0),
                                     city("B2", "B", 1.5, 11.0), city("B3", "B", 2.2, 16.0) };
  const auto s = dyad_differences(cities, province_adjacency({ b }), 150.0);
  bool dyads_ok = s.n_within == 4 && s.n_across == 5;
  for (std::size_t k = 0; k < kSurveyMeasures; ++k) {
    const double scale = static_cast<double>(k + 1);
    dyads_ok = dyads_ok && std::abs(s.within_mean[k] - 3.0 * scale) <= 1e-12 * scale &&
               std::abs(s.across_mean[k] - 6.6 * scale) <= 1e-12 * scale;
  }
  for (const auto& dy : s.dyads) {
    const auto& a = *std::find_if(cities.begin(), cities.end(), [&](const City& c) { return c.city_id == dy.city_a; });
    const auto& c = *std::find_if(cities.begin(), cities.end(), [&](const City& x) { return x.city_id == dy.city_b; });
    for (std::size_t k = 0; k < kSurveyMeasures; ++k)
      dyads_ok = dyads_ok && dy.abs_diffs[k] == std::abs(a.measures[k] - c.measures[k]);
  }

  return { worst_wls <= 1e-8 && nn_equal && agg_equal && dyads_ok,
           fmt("wls_max_rel_err=%.2e nn_exact=%d aggregate_exact=%d dyads_exact=%d", worst_wls, nn_equal, agg_equal,
               dyads_ok) };
}

int
run_cli(const fs::path& cfg, const std::string& command, int threads)
{
  std::vector<std::string> args = { "border_rdd", command, "--config", cfg.string(), "--threads",
                                    std::to_string(threads) };
  std::vector<char*> argv;
  for (auto& a : args)
    argv.push_back(a.data());
  // progress lines go to stderr; keep them off the verdict listing
  std::ostringstream log;
  auto* old = std::cerr.rdbuf(log.rdbuf());
  const int status = cli::main_entry(static_cast<int>(argv.size()), argv.data());
  std::cerr.rdbuf(old);
  if (status != 0)
    std::cerr << log.str();
  return status;
}

Verdict
schemas_and_determinism()
{
  std::string why;

  // Two copies of the demo run, one and three threads.
  const auto demo = read_file(std::string(BORDER_RDD_FIXTURES) + "/demo.cfg");
  fs::path dirs[2];
  const int saved = omp_get_max_threads();
  for (int i = 0; i < 2; ++i) {
    dirs[i] = fs::temp_directory_path() / ("border_rdd_acceptance_" + std::to_string(i));
    fs::remove_all(dirs[i]);
    fs::create_directories(dirs[i]);
    write_file_atomic((dirs[i] / "run.cfg").string(), demo);
    for (const auto& cmd : cli::kCommands) {
      if (run_cli(dirs[i] / "run.cfg", cmd, i == 0 ? 1 : 3) != 0)
        why += " " + cmd + "_failed";
    }
  }
  omp_set_num_threads(saved);

  const std::map<std::string, std::vector<std::string>> schemas = {
    { "cells.csv", kCellTableColumns },
    { "pooled.csv", kPooledColumns },
    { "pooled_covariates.csv", kPooledColumns },
    { "balance.csv", kResultColumns },
    { "battery.csv", kResultColumns },
    { "rank_gap_summary.csv", { "threshold", "total", "retained", "mean_gap", "sd_gap" } },
    { "dyads_summary.csv", { "measure", "within_mean_abs_diff", "across_mean_abs_diff", "n_within", "n_across" } },
    { "private_summary.csv", { "n", "slope", "intercept", "se_hc1", "p_value", "r2", "dropped" } },
    { "rankgdp.csv", { "n", "slope", "intercept", "se", "p_value", "r2" } },
  };
  for (const auto& [file, columns] : schemas) {
    const auto path = dirs[0] / "out" / file;
    if (!fs::exists(path) || CsvTable::load(path.string()).header() != columns)
      why += " schema:" + file;
  }
  std::size_t files = 0, identical = 0;
  for (const auto& entry : fs::recursive_directory_iterator(dirs[0] / "out")) {
    if (!entry.is_regular_file())
      continue;
    ++files;
    identical += read_file(entry.path().string()) == read_file((dirs[1] / fs::relative(entry.path(), dirs[0])).string());
  }
  if (files == 0 || identical != files)
    why += " nondeterministic";
  for (const auto& d : dirs)
    fs::remove_all(d);

  // Status cells: a starved border and a constant control.
  CellTable starved, flat;
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int i = 0; i < 400; ++i) {
    CellRecord r;
    r.cell_id = i + 1;
    r.distance_km = u(gen);
    r.treated = r.distance_km > 0.0;
    r.luminosity = 1.0 + 0.02 * r.distance_km + 0.1 * std::sin(i);
    r.lit = i % 2;
    r.elevation = 100.0 + std::cos(i);
    r.precipitation = 800.0 + std::sin(3.0 * i);
    r.population = 50.0 + i % 7;
    r.dist_road = 4.0;
    r.log_area = std::log(27.0 + 0.01 * (i % 5));
    r.border_id = "F";
    flat.records.push_back(r);
    if (!r.treated || i % 40 == 0) {
      r.border_id = "S";
      r.dist_road = 4.0 + std::sin(5.0 * i);
      starved.records.push_back(r);
    }
  }
  const auto rows = format_results(per_border_battery({ { "S", starved }, { "F", flat } }, { "S", "F" }, RddSpec{}));
  if (rows.find(",insufficient_obs") == std::string::npos || rows.find(",multicollinearity") == std::string::npos)
    why += " status_cells";

  // Full synthetic pipeline at scale.
  const auto t0 = std::chrono::steady_clock::now();
  SyntheticWorldConfig c;
  c.lon_min = 110.0;
  c.lon_max = 130.0;
  c.lat_max = 32.5;
  c.border_count = 20;
  c.dialect_bands = 4;
  c.dialect_effects = { 0.0, 1.0, -1.0, 2.0 };
  c.delta = 0.5;
  const auto world = generate_world(c);
  const FishnetSpec net{ 0.02, c.lon_min, c.lat_min };
  const auto table = build_cell_table(world.grids, world.polylines(), net);
  const auto pooled = pooled_dialect_fe(table, RddSpec{});
  const double secs = seconds_since(t0);
  std::size_t ok = 0;
  for (const auto& r : pooled)
    ok += r.status == RunStatus::ok;
  if (table.size() < 100000 || pooled.size() != 6 || ok != 6 || secs >= 60.0)
    why += " pipeline";

  return { why.empty(), fmt("files=%zu identical=%zu pipeline_cells=%zu specs_ok=%zu/6 time=%.1fs%s", files,
                            identical, table.size(), ok, secs, why.empty() ? "" : (" problems:" + why).c_str()) };
}

} // namespace

int
main()
{
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
    { "noiseless_exactness", noiseless_exactness },
    { "coverage", coverage },
    { "null_calibration", null_calibration },
    { "bandwidth_sanity", bandwidth_sanity },
    { "balance_power_size", balance_power_size },
    { "battery_null_discipline", battery_null },
    { "transform_bit_exactness", transforms },
    { "dialect_table_arithmetic", dialect_table },
    { "oracle_equivalences", oracle_equivalences },
    { "schemas_and_determinism", schemas_and_determinism },
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = { false, std::string("exception: ") + e.what() };
    }
    failed += !v.pass;
    std::printf("%s %2zu %s: %s [%.1fs]\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                v.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
