#include "border_rdd/studies.hpp"

#include "border_rdd/csv.hpp"
#include "border_rdd/error.hpp"
#include "border_rdd/text.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace border_rdd {

std::string
status_name(RunStatus status)
{
  switch (status) {
    case RunStatus::ok:
      return "ok";
    case RunStatus::insufficient_obs:
      return "insufficient_obs";
    case RunStatus::multicollinearity:
      return "multicollinearity";
    case RunStatus::bandwidth_failure:
      return "bandwidth_failure";
    case RunStatus::error:
      break;
  }
  return "error";
}

RunResult
run_spec(const CellTable& table, const RddSpec& spec, const std::string& border_id)
{
  RunResult r;
  r.outcome = spec.outcome;
  r.border_id = border_id;
  r.p = spec.p;
  try {
    r.estimate = estimate(table, spec);
  } catch (const InsufficientObservationsError& e) {
    r.status = RunStatus::insufficient_obs;
    r.message = e.what();
  } catch (const EmptySampleError& e) {
    r.status = RunStatus::insufficient_obs;
    r.message = e.what();
  } catch (const MulticollinearityError& e) {
    r.status = RunStatus::multicollinearity;
    r.message = e.what();
  } catch (const BandwidthFailureError& e) {
    r.status = RunStatus::bandwidth_failure;
    r.message = e.what();
  } catch (const ConfigError&) {
    throw; // a bad column name is a setup problem, not a per-cell outcome
  } catch (const Error& e) {
    r.status = RunStatus::error;
    r.message = e.what();
  }
  return r;
}

const std::vector<std::string> kResultColumns = { "outcome", "border_id",      "p",          "beta",
                                                  "se_conventional", "se_robust", "p_value_robust", "h",
                                                  "b",       "n_left",         "n_right",    "n_total",
                                                  "status" };

const std::vector<std::string> kPooledColumns = [] {
  auto c = kResultColumns;
  c.push_back("kernel");
  return c;
}();

const std::vector<std::string> kDefaultCovariates = { "elevation", "precipitation", "log_population", "dist_road",
                                                      "log_area" };

namespace {

std::vector<std::string>
result_row(const RunResult& r)
{
  std::vector<std::string> row = { r.outcome, r.border_id, std::to_string(r.p) };
  if (r.status == RunStatus::ok) {
    const auto& e = r.estimate;
    for (double v : { e.beta_bc, e.se_conventional, e.se_robust, e.p_value_robust, e.h, e.b })
      row.push_back(format_number(v));
    row.push_back(std::to_string(e.n_left));
    row.push_back(std::to_string(e.n_right));
    row.push_back(std::to_string(e.n_total));
  } else {
    row.insert(row.end(), 9, "");
  }
  row.push_back(status_name(r.status));
  return row;
}

//! Evaluates independent specs in parallel; output order is the task order.
struct Task
{
  const CellTable* table;
  RddSpec spec;
  std::string border_id;
};

std::vector<RunResult>
run_tasks(const std::vector<Task>& tasks)
{
  std::vector<RunResult> out(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  const auto n = static_cast<std::ptrdiff_t>(tasks.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto& t = tasks[static_cast<std::size_t>(i)];
    try {
      out[static_cast<std::size_t>(i)] = run_spec(*t.table, t.spec, t.border_id);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e)
      std::rethrow_exception(e);
  }
  return out;
}

void
require_columns(const std::vector<std::string>& names)
{
  for (const auto& n : names) {
    if (!is_known_column(n))
      throw ConfigError("unknown cell-table column '" + n + "'");
  }
}

} // namespace

std::string
format_results(const std::vector<RunResult>& results)
{
  CsvWriter w(kResultColumns);
  for (const auto& r : results)
    w.add(result_row(r));
  return w.str();
}

std::string
format_pooled(const std::vector<RunResult>& results)
{
  CsvWriter w(kPooledColumns);
  for (const auto& r : results) {
    auto row = result_row(r);
    row.push_back("triangular");
    w.add(std::move(row));
  }
  return w.str();
}

std::vector<RunResult>
balance_battery(const CellTable& table, const std::vector<std::string>& covariates, const RddSpec& base)
{
  require_columns(covariates);
  const auto borders = split_by_border(table);
  std::vector<Task> tasks;
  for (const auto& cov : covariates) {
    for (const auto& [id, sub] : borders) {
      for (int p : { 1, 2 }) {
        RddSpec s = base;
        s.outcome = cov;
        s.p = p;
        s.covariates.clear();
        s.fixed_effect.reset();
        tasks.push_back({ &sub, s, id });
      }
    }
  }
  return run_tasks(tasks);
}

std::vector<RunResult>
pooled_dialect_fe(const CellTable& table, const RddSpec& base, const std::vector<std::string>& covariates)
{
  require_columns(covariates);
  std::vector<Task> tasks;
  for (const char* outcome : { "luminosity", "lum_pp", "lit" }) {
    for (int p : { 1, 2 }) {
      RddSpec s = base;
      s.outcome = outcome;
      s.p = p;
      s.covariates = covariates;
      s.fixed_effect = "dialect";
      tasks.push_back({ &table, s, "pooled" });
    }
  }
  return run_tasks(tasks);
}

RankGapSummary
rank_gap_filter(const std::vector<BorderPolyline>& borders, int threshold)
{
  if (threshold < 0)
    throw DomainError("rank_gap_filter: threshold must be >= 0");
  RankGapSummary s;
  s.total = borders.size();
  double sum = 0.0;
  for (const auto& b : borders) {
    sum += b.rank_gap();
    if (b.rank_gap() >= threshold)
      s.retained.push_back(b);
  }
  if (!borders.empty())
    s.mean_gap = sum / static_cast<double>(borders.size());
  if (borders.size() > 1) {
    double ss = 0.0;
    for (const auto& b : borders)
      ss += (b.rank_gap() - s.mean_gap) * (b.rank_gap() - s.mean_gap);
    s.sd_gap = std::sqrt(ss / static_cast<double>(borders.size() - 1));
  }
  return s;
}

std::vector<RunResult>
per_border_battery(const std::map<std::string, CellTable>& tables, const std::vector<std::string>& border_ids,
                   const RddSpec& base, const std::vector<std::string>& covariates)
{
  require_columns(covariates);
  static const CellTable empty;
  std::vector<Task> tasks;
  for (const char* outcome : { "luminosity", "lit" }) {
    for (int p : { 1, 2 }) {
      for (const auto& id : border_ids) {
        RddSpec s = base;
        s.outcome = outcome;
        s.p = p;
        s.covariates = covariates;
        s.fixed_effect.reset();
        const auto it = tables.find(id);
        tasks.push_back({ it == tables.end() ? &empty : &it->second, s, id });
      }
    }
  }
  return run_tasks(tasks);
}

// Governance evidence -------------------------------------------------------

std::vector<City>
load_cities(const std::string& path)
{
  const auto csv = CsvTable::load(path);
  const auto c_id = csv.column("city_id");
  const auto c_prov = csv.column("province");
  const auto c_lon = csv.column("lon");
  const auto c_lat = csv.column("lat");
  std::array<std::size_t, kSurveyMeasures> c_m{};
  for (std::size_t k = 0; k < kSurveyMeasures; ++k)
    c_m[k] = csv.column("m" + std::to_string(k + 1));
  std::vector<City> out;
  for (std::size_t r = 0; r < csv.size(); ++r) {
    City c;
    c.city_id = csv.cell(r, c_id);
    c.province = csv.cell(r, c_prov);
    c.location = { csv.number(r, c_lon), csv.number(r, c_lat) };
    for (std::size_t k = 0; k < kSurveyMeasures; ++k)
      c.measures[k] = csv.number(r, c_m[k]);
    out.push_back(std::move(c));
  }
  return out;
}

ProvincePairs
province_adjacency(const std::vector<BorderPolyline>& borders)
{
  ProvincePairs out;
  for (const auto& b : borders) {
    out.insert({ b.prov_high, b.prov_low });
    out.insert({ b.prov_low, b.prov_high });
  }
  return out;
}

DyadSummary
dyad_differences(const std::vector<City>& cities, const ProvincePairs& adjacency, double limit_km)
{
  if (!(limit_km > 0.0))
    throw DomainError("dyad_differences: distance limit must be positive");
  std::vector<const City*> sorted;
  for (const auto& c : cities)
    sorted.push_back(&c);
  std::sort(sorted.begin(), sorted.end(), [](const City* a, const City* b) { return a->city_id < b->city_id; });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i]->city_id == sorted[i - 1]->city_id)
      throw StructuralError("dyad_differences: duplicate city id '" + sorted[i]->city_id + "'");
  }

  std::map<std::pair<std::string, std::string>, CityDyad> pairs;
  DyadSummary s;
  for (const City* c : sorted) {
    // nearest own-province city and nearest bordering-province city; equal
    // distances go to the smaller id because candidates are visited in id order
    const City* best[2] = { nullptr, nullptr };
    double best_km[2] = { HUGE_VAL, HUGE_VAL };
    for (const City* o : sorted) {
      if (o == c)
        continue;
      const bool same = o->province == c->province;
      if (!same && !adjacency.count({ c->province, o->province }))
        continue;
      const double km = haversine_km(c->location, o->location);
      if (km > limit_km)
        continue;
      const int slot = same ? 0 : 1;
      if (km < best_km[slot]) {
        best_km[slot] = km;
        best[slot] = o;
      }
    }
    if (!best[0] && !best[1]) {
      s.excluded.push_back(c->city_id);
      continue;
    }
    for (int slot = 0; slot < 2; ++slot) {
      const City* o = best[slot];
      if (!o)
        continue;
      const City* a = c->city_id < o->city_id ? c : o;
      const City* b = a == c ? o : c;
      CityDyad d;
      d.city_a = a->city_id;
      d.city_b = b->city_id;
      d.same_province = slot == 0;
      d.distance_km = haversine_km(a->location, b->location);
      for (std::size_t k = 0; k < kSurveyMeasures; ++k)
        d.abs_diffs[k] = std::abs(a->measures[k] - b->measures[k]);
      pairs.emplace(std::make_pair(d.city_a, d.city_b), d);
    }
  }

  for (auto& [key, d] : pairs) {
    auto& mean = d.same_province ? s.within_mean : s.across_mean;
    ++(d.same_province ? s.n_within : s.n_across);
    for (std::size_t k = 0; k < kSurveyMeasures; ++k)
      mean[k] += d.abs_diffs[k];
    s.dyads.push_back(d);
  }
  for (std::size_t k = 0; k < kSurveyMeasures; ++k) {
    s.within_mean[k] = s.n_within ? s.within_mean[k] / static_cast<double>(s.n_within)
                                  : std::numeric_limits<double>::quiet_NaN();
    s.across_mean[k] = s.n_across ? s.across_mean[k] / static_cast<double>(s.n_across)
                                  : std::numeric_limits<double>::quiet_NaN();
  }
  return s;
}

std::string
format_dyads(const DyadSummary& summary)
{
  std::vector<std::string> header = { "city_a", "city_b", "same_province", "distance_km" };
  for (std::size_t k = 0; k < kSurveyMeasures; ++k)
    header.push_back("abs_diff_m" + std::to_string(k + 1));
  CsvWriter w(header);
  for (const auto& d : summary.dyads) {
    std::vector<std::string> row = { d.city_a, d.city_b, d.same_province ? "1" : "0", format_number(d.distance_km) };
    for (double v : d.abs_diffs)
      row.push_back(format_number(v));
    w.add(std::move(row));
  }
  return w.str();
}

std::string
format_dyad_summary(const DyadSummary& summary)
{
  CsvWriter w({ "measure", "within_mean_abs_diff", "across_mean_abs_diff", "n_within", "n_across" });
  for (std::size_t k = 0; k < kSurveyMeasures; ++k) {
    w.add({ "m" + std::to_string(k + 1), format_number(summary.within_mean[k]), format_number(summary.across_mean[k]),
            std::to_string(summary.n_within), std::to_string(summary.n_across) });
  }
  return w.str();
}

std::vector<Prefecture>
load_prefectures(const std::string& path)
{
  const auto csv = CsvTable::load(path);
  const auto c_id = csv.column("prefecture_id");
  const auto c_prov = csv.column("province");
  const auto c_adj = csv.column("border_adjacency");
  const auto c_priv = csv.column("employed_private");
  const auto c_tot = csv.column("employed_total");
  const auto c_aut = csv.column("autonomous");
  std::vector<Prefecture> out;
  for (std::size_t r = 0; r < csv.size(); ++r) {
    Prefecture p;
    p.prefecture_id = csv.cell(r, c_id);
    p.province = csv.cell(r, c_prov);
    for (const auto& b : split(csv.cell(r, c_adj), ';')) {
      const auto t = std::string(trim(b));
      if (!t.empty())
        p.borders.push_back(t);
    }
    p.employed_private = csv.number(r, c_priv);
    p.employed_total = csv.number(r, c_tot);
    const auto flag = csv.integer(r, c_aut);
    if (flag != 0 && flag != 1)
      throw ParseError(path, r + 2, "autonomous flag must be 0 or 1");
    p.autonomous = flag == 1;
    if (!(p.employed_total > 0.0) || p.employed_private < 0.0 || p.employed_private > p.employed_total)
      throw DomainError(path + ": prefecture '" + p.prefecture_id +
                        "' needs 0 <= employed_private <= employed_total and employed_total > 0");
    out.push_back(std::move(p));
  }
  return out;
}

LinearFit
simple_ols(const std::vector<double>& x, const std::vector<double>& y, bool robust)
{
  if (x.size() != y.size())
    throw StructuralError("simple_ols: x and y differ in length");
  LinearFit f;
  f.n = x.size();
  if (f.n < 3)
    throw InsufficientObservationsError("simple_ols: need at least 3 observations");
  const double n = static_cast<double>(f.n);
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < f.n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < f.n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0))
    throw MulticollinearityError("simple_ols: regressor has no variation");
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0.0, meat = 0.0;
  for (std::size_t i = 0; i < f.n; ++i) {
    const double e = y[i] - f.intercept - f.slope * x[i];
    sse += e * e;
    meat += (x[i] - mx) * (x[i] - mx) * e * e;
  }
  f.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  const double var = robust ? (n / (n - 2.0)) * meat / (sxx * sxx) : sse / (n - 2.0) / sxx;
  f.se_slope = std::sqrt(var);
  if (f.se_slope > 0.0) {
    const boost::math::students_t dist(n - 2.0);
    f.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(f.slope / f.se_slope)));
  } else {
    f.p_value = f.slope == 0.0 ? 1.0 : 0.0;
  }
  return f;
}

PrivateSummary
percent_private_analysis(const std::vector<Prefecture>& prefectures, const std::vector<BorderPolyline>& borders)
{
  std::vector<const BorderPolyline*> sorted;
  for (const auto& b : borders)
    sorted.push_back(&b);
  std::sort(sorted.begin(), sorted.end(),
            [](const BorderPolyline* a, const BorderPolyline* b) { return a->border_id < b->border_id; });

  PrivateSummary s;
  for (const BorderPolyline* b : sorted) {
    if (b->rank_high == b->rank_low) {
      s.dropped.push_back(b->border_id + ": equal ranks");
      continue;
    }
    // orient so that the first side is the better-ranked province
    const bool swapped = b->rank_high < b->rank_low;
    const std::string& hi = swapped ? b->prov_low : b->prov_high;
    const std::string& lo = swapped ? b->prov_high : b->prov_low;
    double sum[2] = { 0.0, 0.0 };
    std::size_t count[2] = { 0, 0 };
    for (const auto& p : prefectures) {
      if (p.autonomous || std::find(p.borders.begin(), p.borders.end(), b->border_id) == p.borders.end())
        continue;
      const int side = p.province == hi ? 0 : p.province == lo ? 1 : -1;
      if (side < 0)
        continue;
      sum[side] += p.employed_private / p.employed_total;
      ++count[side];
    }
    if (!count[0] || !count[1]) {
      s.dropped.push_back(b->border_id + ": no non-autonomous adjacent prefecture on the " +
                          (count[0] ? "low" : "high") + "-rank side");
      continue;
    }
    PrefecturePair pp;
    pp.border_id = b->border_id;
    pp.pct_private_high = sum[0] / static_cast<double>(count[0]);
    pp.pct_private_low = sum[1] / static_cast<double>(count[1]);
    pp.rank_diff = std::abs(b->rank_high - b->rank_low);
    pp.diff = pp.pct_private_high - pp.pct_private_low;
    s.pairs.push_back(pp);
  }
  std::vector<double> x, y;
  for (const auto& p : s.pairs) {
    x.push_back(p.rank_diff);
    y.push_back(p.diff);
  }
  s.fit = simple_ols(x, y, true);
  return s;
}

std::string
format_private_pairs(const PrivateSummary& summary)
{
  CsvWriter w({ "border_id", "pct_private_high", "pct_private_low", "rank_diff", "diff" });
  for (const auto& p : summary.pairs) {
    w.add({ p.border_id, format_number(p.pct_private_high), format_number(p.pct_private_low),
            std::to_string(p.rank_diff), format_number(p.diff) });
  }
  return w.str();
}

std::string
format_private_summary(const PrivateSummary& summary)
{
  const auto& f = summary.fit;
  CsvWriter w({ "n", "slope", "intercept", "se_hc1", "p_value", "r2", "dropped" });
  w.add({ std::to_string(f.n), format_number(f.slope), format_number(f.intercept), format_number(f.se_slope),
          format_number(f.p_value), format_number(f.r2), std::to_string(summary.dropped.size()) });
  return w.str();
}

std::vector<ProvinceRank>
load_province_ranks(const std::string& path)
{
  const auto csv = CsvTable::load(path);
  const auto c_prov = csv.column("province");
  const auto c_rank = csv.column("rank");
  const bool has_gdp = csv.has_column("gdp_pc");
  std::vector<ProvinceRank> out;
  for (std::size_t r = 0; r < csv.size(); ++r) {
    ProvinceRank p;
    p.province = csv.cell(r, c_prov);
    p.rank = static_cast<int>(csv.integer(r, c_rank));
    if (has_gdp) {
      const auto& cell = csv.cell(r, csv.column("gdp_pc"));
      if (!cell.empty()) {
        const double v = csv.number(r, csv.column("gdp_pc"));
        if (std::isfinite(v))
          p.gdp_pc = v;
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

LinearFit
rank_gdp_regression(const std::vector<ProvinceRank>& provinces)
{
  std::vector<std::pair<double, double>> rows;
  for (const auto& p : provinces) {
    if (p.gdp_pc)
      rows.emplace_back(p.rank, *p.gdp_pc);
  }
  std::sort(rows.begin(), rows.end());
  std::vector<double> x, y;
  for (const auto& [r, g] : rows) {
    x.push_back(r);
    y.push_back(g);
  }
  return simple_ols(x, y, false);
}

std::string
format_rank_gdp(const LinearFit& fit)
{
  CsvWriter w({ "n", "slope", "intercept", "se", "p_value", "r2" });
  w.add({ std::to_string(fit.n), format_number(fit.slope), format_number(fit.intercept), format_number(fit.se_slope),
          format_number(fit.p_value), format_number(fit.r2) });
  return w.str();
}

std::string
format_plot_bins(const std::vector<PlotSeries>& series)
{
  CsvWriter w({ "scope", "outcome", "side", "bin", "lo", "hi", "center", "count", "mean" });
  for (const auto& s : series) {
    for (const auto& b : s.data.bins) {
      w.add({ s.scope, s.outcome, std::to_string(b.side), std::to_string(b.index), format_number(b.lo),
              format_number(b.hi), format_number(b.center()), std::to_string(b.count),
              b.count ? format_number(b.mean) : "" });
    }
  }
  return w.str();
}

std::string
format_plot_fits(const std::vector<PlotSeries>& series)
{
  CsvWriter w({ "scope", "outcome", "side", "order", "c0", "c1", "c2", "c3", "c4" });
  for (const auto& s : series) {
    for (const auto& f : s.data.fits) {
      std::vector<std::string> row = { s.scope, s.outcome, std::to_string(f.side), std::to_string(f.order) };
      for (std::size_t k = 0; k < 5; ++k)
        row.push_back(k < f.coefficients.size() ? format_number(f.coefficients[k]) : "");
      w.add(std::move(row));
    }
  }
  return w.str();
}

} // namespace border_rdd
