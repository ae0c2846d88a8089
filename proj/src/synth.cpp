#include "border_rdd/synth.hpp"

#include "border_rdd/csv.hpp"
#include "border_rdd/error.hpp"
#include "border_rdd/text.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <numbers>

namespace border_rdd {

double
Rng::normal()
{
  double u1 = uniform();
  while (u1 == 0.0)
    u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t
Rng::below(std::uint64_t n)
{
  if (n == 0)
    throw DomainError("Rng::below: empty range");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = engine_();
  while (x >= limit)
    x = engine_();
  return x % n;
}

std::uint64_t
splitmix64(std::uint64_t x)
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t
stream_seed(std::uint64_t master, std::uint64_t stream)
{
  return splitmix64(splitmix64(master) ^ splitmix64(stream * 0x632be59bd9b4e019ULL + 1));
}

const std::vector<std::string> kSyntheticCovariates = { "elevation", "precipitation", "dist_road", "population" };

namespace {

enum Stream : std::uint64_t
{
  lights_stream = 1,
  elevation_stream,
  precipitation_stream,
  dist_road_stream,
  population_stream,
  pop_zero_stream,
  fixture_stream
};

//! Nominal noise sd of each covariate field; jumps are expressed in these units.
struct CovariateField
{
  double base, gx, gy, sd;
};

const std::map<std::string, CovariateField>&
covariate_fields()
{
  static const std::map<std::string, CovariateField> f = {
    { "elevation", { 800.0, -150.0, 60.0, 50.0 } },
    { "precipitation", { 1000.0, 40.0, 20.0, 30.0 } },
    { "dist_road", { 5.0, 1.0, 0.5, 1.0 } },
    { "population", { std::log(200.0), 0.3, 0.1, 0.5 } }, // log scale
  };
  return f;
}

std::size_t
count_of(double lo, double hi, double step, const char* what)
{
  const double n = (hi - lo) / step;
  const double r = std::round(n);
  if (r < 1.0 || std::abs(n - r) > 1e-6)
    throw ConfigError(std::string("synth: ") + what + " extent is not a whole number of pixels");
  return static_cast<std::size_t>(r);
}

double
border_center(const SyntheticWorldConfig& c, int k)
{
  return 0.5 * (c.lon_min + c.lon_max) + (k - 0.5 * (c.border_count - 1)) * c.border_spacing_deg;
}

double
border_reach(const SyntheticWorldConfig& c)
{
  return c.border_shape == BorderShape::sinusoidal ? c.amplitude_deg : 0.0;
}

bool
province_is_high(int j)
{
  return j % 2 == 1;
}

int
province_rank(const SyntheticWorldConfig& c, int j)
{
  const int wiggle = (j / 2) % 3;
  return province_is_high(j) ? std::min(30, c.rank_high + wiggle) : std::max(1, c.rank_low - wiggle);
}

std::string
province_name(int j)
{
  char buf[16];
  std::snprintf(buf, sizeof buf, "P%02d", j);
  return buf;
}

std::string
border_name(int k)
{
  char buf[16];
  std::snprintf(buf, sizeof buf, "B%02d", k);
  return buf;
}

BorderRecord
make_border(const SyntheticWorldConfig& c, int k)
{
  BorderRecord rec;
  BorderPolyline& b = rec.border;
  b.border_id = border_name(k);
  const int west = k, east = k + 1;
  const bool west_high = province_is_high(west);
  b.prov_high = province_name(west_high ? west : east);
  b.prov_low = province_name(west_high ? east : west);
  b.rank_high = province_rank(c, west_high ? west : east);
  b.rank_low = province_rank(c, west_high ? east : west);

  const double center = border_center(c, k);
  const double lat0 = c.lat_min - 0.1;
  const double lat1 = c.lat_max + 0.1;
  if (c.border_shape == BorderShape::straight) {
    b.vertices = { { center, lat0 }, { center, lat1 } };
  } else {
    const double step = std::min(0.025, c.period_deg / 40.0);
    const auto n = static_cast<std::size_t>(std::ceil((lat1 - lat0) / step - 1e-9));
    for (std::size_t j = 0; j <= n; ++j) {
      const double lat = j == n ? lat1 : lat0 + static_cast<double>(j) * step;
      const double lon =
        center + c.amplitude_deg * std::sin(2.0 * std::numbers::pi * (lat - c.lat_min) / c.period_deg);
      b.vertices.push_back({ lon, lat });
    }
  }
  const double off = border_reach(c) + 0.05;
  rec.witness = { west_high ? center - off : center + off, 0.5 * (c.lat_min + c.lat_max) };
  orient_by_witness(b, rec.witness);
  b.validate();
  return rec;
}

int
dialect_band(const SyntheticWorldConfig& c, LonLat p)
{
  const double frac = c.dialect_orientation == BandOrientation::latitude
                        ? (p.lat - c.lat_min) / (c.lat_max - c.lat_min)
                        : (p.lon - c.lon_min) / (c.lon_max - c.lon_min);
  const int band = static_cast<int>(std::floor(frac * c.dialect_bands));
  return std::clamp(band, 0, c.dialect_bands - 1);
}

double
polynomial_profile(const std::vector<double>& coef, double d)
{
  double v = 0.0, pw = d;
  for (double a : coef) {
    v += a * pw;
    pw *= d;
  }
  return v;
}

RasterGrid
empty_grid(const SyntheticWorldConfig& c, GridKind kind)
{
  RasterGrid g;
  g.ncols = c.ncols();
  g.nrows = c.nrows();
  g.xll = c.lon_min;
  g.yll = c.lat_min;
  g.cellsize = c.pixel_size;
  g.nodata = -9999.0;
  g.kind = kind;
  g.values.assign(g.ncols * g.nrows, 0.0);
  return g;
}

std::string
join_numbers(const std::vector<double>& v)
{
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i)
      out += ' ';
    out += format_number(v[i]);
  }
  return out;
}

} // namespace

void
SyntheticWorldConfig::validate() const
{
  if (!(lon_max > lon_min) || !(lat_max > lat_min))
    throw ConfigError("synth: extent must have lon_max > lon_min and lat_max > lat_min");
  if (lat_min < -80.0 || lat_max > 80.0)
    throw ConfigError("synth: latitude extent must lie within [-80, 80]");
  if (!(pixel_size > 0.0))
    throw ConfigError("synth: pixel_size must be positive");
  count_of(lon_min, lon_max, pixel_size, "longitude");
  count_of(lat_min, lat_max, pixel_size, "latitude");
  if (border_count < 1)
    throw ConfigError("synth: border_count must be >= 1");
  if (border_shape == BorderShape::sinusoidal && !(period_deg > 0.0))
    throw ConfigError("synth: period_deg must be positive for a sinusoidal border");
  if (amplitude_deg < 0.0)
    throw ConfigError("synth: amplitude_deg must be >= 0");
  if (border_count > 1 && !(border_spacing_deg > 2.0 * border_reach(*this)))
    throw ConfigError("synth: border_spacing_deg must exceed twice the border amplitude");
  for (int k = 0; k < border_count; ++k) {
    const double c = border_center(*this, k);
    if (c - border_reach(*this) <= lon_min || c + border_reach(*this) >= lon_max)
      throw ConfigError("synth: border " + std::to_string(k) + " does not fit inside the longitude extent");
  }
  if (surface.size() > 6)
    throw ConfigError("synth: surface takes at most 6 coefficients");
  if (!(noise_sd >= 0.0) || !(covariate_noise_scale >= 0.0))
    throw ConfigError("synth: noise scales must be >= 0");
  for (const auto& [name, jump] : covariate_jumps) {
    if (!covariate_fields().count(name))
      throw ConfigError("synth: no synthetic covariate named '" + name + "'");
    if (!std::isfinite(jump))
      throw ConfigError("synth: covariate jump for '" + name + "' is not finite");
  }
  if (dialect_bands < 1)
    throw ConfigError("synth: dialect_bands must be >= 1");
  if (dialect_effects.size() > static_cast<std::size_t>(dialect_bands))
    throw ConfigError("synth: more dialect effects than dialect bands");
  if (!(pop_zero_fraction >= 0.0 && pop_zero_fraction <= 1.0))
    throw ConfigError("synth: pop_zero_fraction must be in [0, 1]");
  if (rank_low < 1 || rank_high > 30 || rank_high <= rank_low)
    throw ConfigError("synth: ranks must satisfy 1 <= rank_low < rank_high <= 30");
}

std::size_t
SyntheticWorldConfig::ncols() const
{
  return count_of(lon_min, lon_max, pixel_size, "longitude");
}

std::size_t
SyntheticWorldConfig::nrows() const
{
  return count_of(lat_min, lat_max, pixel_size, "latitude");
}

std::string
format_truth(const WorldTruth& t)
{
  std::string out;
  out += "delta = " + format_number(t.delta) + "\n";
  out += "noise_sd = " + format_number(t.noise_sd) + "\n";
  out += "seed = " + std::to_string(t.seed) + "\n";
  out += "surface = " + join_numbers(t.surface) + "\n";
  out += "profile.control = " + join_numbers(t.profile[0]) + "\n";
  out += "profile.treated = " + join_numbers(t.profile[1]) + "\n";
  for (const auto& name : kSyntheticCovariates) {
    const auto it = t.covariate_jumps.find(name);
    out += "covariate_jump." + name + " = " + format_number(it == t.covariate_jumps.end() ? 0.0 : it->second) + "\n";
  }
  out += "dialect_effects = " + join_numbers(t.dialect_effects) + "\n";
  return out;
}

std::vector<BorderPolyline>
World::polylines() const
{
  std::vector<BorderPolyline> out;
  for (const auto& b : borders)
    out.push_back(b.border);
  return out;
}

double
world_mean_lights(const SyntheticWorldConfig& c, LonLat p, double d, int band)
{
  const double x = p.lon - 0.5 * (c.lon_min + c.lon_max);
  const double y = p.lat - 0.5 * (c.lat_min + c.lat_max);
  const double terms[6] = { 1.0, x, y, x * x, x * y, y * y };
  double g = 0.0;
  for (std::size_t k = 0; k < c.surface.size(); ++k)
    g += c.surface[k] * terms[k];
  const bool treated = d > 0.0;
  g += polynomial_profile(c.profile[treated ? 1 : 0], d);
  if (band >= 0 && static_cast<std::size_t>(band) < c.dialect_effects.size())
    g += c.dialect_effects[static_cast<std::size_t>(band)];
  if (treated)
    g += c.delta;
  return g;
}

World
generate_world(const SyntheticWorldConfig& c)
{
  c.validate();
  World w;
  for (int k = 0; k < c.border_count; ++k)
    w.borders.push_back(make_border(c, k));
  std::vector<BorderIndex> index;
  for (const auto& b : w.borders)
    index.emplace_back(b.border);

  const std::size_t ncols = c.ncols(), nrows = c.nrows(), n = ncols * nrows;
  RasterGrid lights = empty_grid(c, GridKind::continuous);

  // signed distance of every pixel centre to its nearest border
  std::vector<double> dist(n);
  const double first = border_center(c, 0);
  const double reach = border_reach(c);
  // smallest east-west km per degree anywhere in the extent, with margin
  const double lat_edge = std::min(89.0, std::max(std::abs(c.lat_min), std::abs(c.lat_max)) + 1.0);
  const double km_per_deg_lon = kEarthRadiusKm * std::numbers::pi / 180.0 * std::cos(lat_edge * std::numbers::pi / 180.0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    const std::size_t row = static_cast<std::size_t>(i) / ncols, col = static_cast<std::size_t>(i) % ncols;
    const LonLat p{ lights.center_lon(col), lights.center_lat(row) };
    const int k0 = c.border_count == 1
                     ? 0
                     : std::clamp(static_cast<int>(std::lround((p.lon - first) / c.border_spacing_deg)), 0,
                                  c.border_count - 1);
    double best = index[static_cast<std::size_t>(k0)].locate(p).km;
    for (int k : { k0 - 1, k0 + 1 }) {
      if (k < 0 || k >= c.border_count)
        continue;
      // the strip of border k lies at least this far east-west of p
      const double gap_deg = std::abs(p.lon - border_center(c, k)) - reach;
      if (gap_deg * km_per_deg_lon * 0.99 >= std::abs(best))
        continue;
      const double d = index[static_cast<std::size_t>(k)].locate(p).km;
      if (std::abs(d) < std::abs(best))
        best = d;
    }
    dist[static_cast<std::size_t>(i)] = best;
  }

  RasterGrid dialect = empty_grid(c, GridKind::categorical);
  std::vector<int> band(n);
  {
    Rng rng(stream_seed(c.seed, lights_stream));
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t row = i / ncols, col = i % ncols;
      const LonLat p{ lights.center_lon(col), lights.center_lat(row) };
      band[i] = dialect_band(c, p);
      dialect.values[i] = band[i] + 1;
      const double v = world_mean_lights(c, p, dist[i], band[i]) + c.noise_sd * rng.normal();
      lights.values[i] = std::clamp(v, 0.0, 63.0);
    }
  }

  auto covariate = [&](const std::string& name, Stream stream, double lower) {
    const CovariateField& f = covariate_fields().at(name);
    const auto it = c.covariate_jumps.find(name);
    const double jump = it == c.covariate_jumps.end() ? 0.0 : it->second;
    RasterGrid g = empty_grid(c, GridKind::continuous);
    Rng rng(stream_seed(c.seed, stream));
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t row = i / ncols, col = i % ncols;
      const double x = g.center_lon(col) - 0.5 * (c.lon_min + c.lon_max);
      const double y = g.center_lat(row) - 0.5 * (c.lat_min + c.lat_max);
      const double v = f.base + f.gx * x + f.gy * y + (dist[i] > 0.0 ? jump * f.sd : 0.0) +
                       c.covariate_noise_scale * f.sd * rng.normal();
      g.values[i] = std::max(lower, v);
    }
    return g;
  };
  RasterGrid elevation = covariate("elevation", elevation_stream, -std::numeric_limits<double>::infinity());
  RasterGrid precipitation = covariate("precipitation", precipitation_stream, 0.0);
  RasterGrid dist_road = covariate("dist_road", dist_road_stream, 0.0);
  RasterGrid population = covariate("population", population_stream, -std::numeric_limits<double>::infinity());
  for (double& v : population.values)
    v = std::exp(v);

  const auto zeros = static_cast<std::size_t>(std::llround(c.pop_zero_fraction * static_cast<double>(n)));
  if (zeros > 0) {
    Rng rng(stream_seed(c.seed, pop_zero_stream));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i)
      order[i] = i;
    for (std::size_t i = 0; i < zeros; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
      std::swap(order[i], order[j]);
      population.values[order[i]] = 0.0;
    }
  }

  w.grids.lights = std::move(lights);
  w.grids.elevation = std::move(elevation);
  w.grids.precipitation = std::move(precipitation);
  w.grids.dist_road = std::move(dist_road);
  w.grids.population = std::move(population);
  w.grids.dialect = std::move(dialect);

  w.truth.delta = c.delta;
  w.truth.surface = c.surface;
  w.truth.profile = c.profile;
  w.truth.covariate_jumps = c.covariate_jumps;
  w.truth.dialect_effects = c.dialect_effects;
  w.truth.noise_sd = c.noise_sd;
  w.truth.seed = c.seed;
  return w;
}

FishnetSpec
pixel_fishnet(const SyntheticWorldConfig& c)
{
  FishnetSpec f;
  f.cell_size_deg = c.pixel_size;
  f.origin_lon = c.lon_min;
  f.origin_lat = c.lat_min;
  return f;
}

CellTable
world_table(const World& world, const FishnetSpec& fishnet, const CellTableOptions& options)
{
  return build_cell_table(world.grids, world.polylines(), fishnet, options);
}

void
write_world(const std::string& dir, const World& world)
{
  const std::filesystem::path root(dir);
  write_grid((root / "lights.asc").string(), *world.grids.lights);
  write_grid((root / "elevation.asc").string(), *world.grids.elevation);
  write_grid((root / "precipitation.asc").string(), *world.grids.precipitation);
  write_grid((root / "population.asc").string(), *world.grids.population);
  write_grid((root / "dist_road.asc").string(), *world.grids.dist_road);
  write_grid((root / "dialect.asc").string(), *world.grids.dialect);
  write_file_atomic((root / "border_vertices.csv").string(), format_border_vertices(world.borders));
  write_file_atomic((root / "border_meta.csv").string(), format_border_meta(world.borders));
  write_file_atomic((root / "truth.txt").string(), format_truth(world.truth));
}

StudyFixtures
generate_study_fixtures(const SyntheticWorldConfig& c, int cities_per_province, int prefectures_per_province)
{
  c.validate();
  if (cities_per_province < 0 || prefectures_per_province < 0)
    throw ConfigError("synth: fixture counts must be >= 0");
  StudyFixtures f;
  Rng rng(stream_seed(c.seed, fixture_stream));
  const int nprov = c.border_count + 1;
  const double reach = border_reach(c) + 0.02;
  int city_no = 0, pref_no = 0;
  for (int j = 0; j < nprov; ++j) {
    const double west = j == 0 ? c.lon_min : border_center(c, j - 1) + reach;
    const double east = j == nprov - 1 ? c.lon_max : border_center(c, j) - reach;
    const int rank = province_rank(c, j);
    ProvinceRank pr;
    pr.province = province_name(j);
    pr.rank = rank;
    pr.gdp_pc = 8000.0 + 900.0 * rank + 4000.0 * rng.normal();
    f.provinces.push_back(pr);

    for (int k = 0; k < cities_per_province; ++k) {
      City city;
      char buf[16];
      std::snprintf(buf, sizeof buf, "C%04d", ++city_no);
      city.city_id = buf;
      city.province = province_name(j);
      city.location = { west + (east - west) * rng.uniform(), c.lat_min + (c.lat_max - c.lat_min) * rng.uniform() };
      city.measures[0] = 0.02 * rank + 0.2 * rng.normal();                           // standardised index
      city.measures[1] = std::max(0.0, 1.5 - 0.02 * rank + 0.3 * rng.normal());       // cost share, percent
      city.measures[2] = std::clamp(3.5 - 0.03 * rank + 0.5 * rng.normal(), 1.0, 8.0); // mean category index
      city.measures[3] = std::clamp(55.0 + 0.8 * rank + 8.0 * rng.normal(), 0.0, 100.0);
      city.measures[4] = std::clamp(60.0 + 0.7 * rank + 8.0 * rng.normal(), 0.0, 100.0);
      f.cities.push_back(city);
    }

    for (int k = 0; k < prefectures_per_province; ++k) {
      Prefecture p;
      char buf[16];
      std::snprintf(buf, sizeof buf, "F%04d", ++pref_no);
      p.prefecture_id = buf;
      p.province = province_name(j);
      const bool west_side = k % 2 == 0;
      if (west_side && j > 0)
        p.borders.push_back(border_name(j - 1));
      if (!west_side && j < nprov - 1)
        p.borders.push_back(border_name(j));
      p.autonomous = rng.uniform() < 0.1;
      p.employed_total = std::round(50000.0 + 150000.0 * rng.uniform());
      const double share = std::clamp(0.15 + 0.006 * rank + 0.03 * rng.normal(), 0.01, 0.99);
      p.employed_private = std::round(share * p.employed_total);
      f.prefectures.push_back(p);
    }
  }
  return f;
}

std::string
format_cities(const std::vector<City>& cities)
{
  CsvWriter w({ "city_id", "province", "lon", "lat", "m1", "m2", "m3", "m4", "m5" });
  for (const auto& c : cities) {
    std::vector<std::string> row = { c.city_id, c.province, format_number(c.location.lon),
                                     format_number(c.location.lat) };
    for (double m : c.measures)
      row.push_back(format_number(m));
    w.add(std::move(row));
  }
  return w.str();
}

std::string
format_prefectures(const std::vector<Prefecture>& prefectures)
{
  CsvWriter w({ "prefecture_id", "province", "border_adjacency", "employed_private", "employed_total", "autonomous" });
  for (const auto& p : prefectures) {
    std::string adj;
    for (std::size_t i = 0; i < p.borders.size(); ++i)
      adj += (i ? ";" : "") + p.borders[i];
    w.add({ p.prefecture_id, p.province, adj, format_number(p.employed_private), format_number(p.employed_total),
            p.autonomous ? "1" : "0" });
  }
  return w.str();
}

std::string
format_province_ranks(const std::vector<ProvinceRank>& provinces)
{
  CsvWriter w({ "province", "rank", "gdp_pc" });
  for (const auto& p : provinces)
    w.add({ p.province, std::to_string(p.rank), p.gdp_pc ? format_number(*p.gdp_pc) : "" });
  return w.str();
}

MseOracle
brute_force_mse_bandwidth(const std::vector<RddData>& replications, const RddSpec& spec, double truth_delta,
                          const std::vector<double>& h_grid)
{
  if (h_grid.empty())
    throw DomainError("brute_force_mse_bandwidth: empty bandwidth grid");
  if (replications.empty())
    throw DomainError("brute_force_mse_bandwidth: no replications");
  MseOracle out;
  out.h_grid = h_grid;
  out.mse.assign(h_grid.size(), std::numeric_limits<double>::infinity());
  const auto ng = static_cast<std::ptrdiff_t>(h_grid.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t g = 0; g < ng; ++g) {
    double sum = 0.0;
    bool ok = true;
    for (const auto& data : replications) {
      try {
        const double err = local_poly_fit(data, spec, h_grid[static_cast<std::size_t>(g)]).beta - truth_delta;
        sum += err * err;
      } catch (const Error&) {
        ok = false;
        break;
      }
    }
    if (ok)
      out.mse[static_cast<std::size_t>(g)] = sum / static_cast<double>(replications.size());
  }
  std::size_t best = 0;
  for (std::size_t g = 1; g < h_grid.size(); ++g) {
    if (out.mse[g] < out.mse[best] || (out.mse[g] == out.mse[best] && h_grid[g] > h_grid[best]))
      best = g;
  }
  if (!std::isfinite(out.mse[best]) && h_grid.size() > 1)
    throw BandwidthFailureError("brute_force_mse_bandwidth: no grid bandwidth is estimable in every replication");
  out.h = h_grid[best];
  return out;
}

McSummary
monte_carlo_coverage(const SyntheticWorldConfig& config, const RddSpec& spec, int reps, const FishnetSpec& fishnet,
                     const CellTableOptions& options)
{
  if (reps < 1)
    throw ConfigError("monte_carlo_coverage: reps must be >= 1");
  config.validate();
  spec.validate();
  McSummary s;
  s.reps = static_cast<std::size_t>(reps);
  s.replicates.resize(s.reps);
#pragma omp parallel for schedule(dynamic, 1)
  for (int r = 0; r < reps; ++r) {
    SyntheticWorldConfig c = config;
    c.seed = config.seed + static_cast<std::uint64_t>(r);
    McReplicate& out = s.replicates[static_cast<std::size_t>(r)];
    try {
      const World world = generate_world(c);
      const CellTable table = world_table(world, fishnet, options);
      const RddEstimate e = estimate(table, spec);
      out.ok = true;
      out.beta = e.beta_bc;
      out.se_robust = e.se_robust;
      out.p_value = e.p_value_robust;
      out.h = e.h;
      out.n = e.n_total;
    } catch (const Error&) {
      out.ok = false;
    }
  }
  constexpr double z975 = 1.959963984540054;
  std::size_t ok = 0, cover = 0, reject = 0;
  double sum_beta = 0.0, sum_h = 0.0;
  for (const auto& r : s.replicates) {
    if (!r.ok) {
      ++s.failures;
      continue;
    }
    ++ok;
    cover += std::abs(r.beta - config.delta) <= z975 * r.se_robust;
    reject += r.p_value < 0.05;
    sum_beta += r.beta;
    sum_h += r.h;
  }
  if (ok > 0) {
    const double n = static_cast<double>(ok);
    s.coverage = static_cast<double>(cover) / n;
    s.rejection_rate = static_cast<double>(reject) / n;
    s.mean_beta = sum_beta / n;
    s.mean_h = sum_h / n;
  }
  return s;
}

} // namespace border_rdd
