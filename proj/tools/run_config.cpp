#include "run_config.hpp"

#include "border_rdd/error.hpp"
#include "border_rdd/text.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace border_rdd::cli {

namespace {

const std::set<std::string>&
known_keys()
{
  static const std::set<std::string> keys = {
    "seed",
    "threads",
    "output_dir",
    "data.lights",
    "data.population",
    "data.elevation",
    "data.precipitation",
    "data.dist_road",
    "data.dialect",
    "data.border_vertices",
    "data.border_meta",
    "data.cell_table",
    "data.cities",
    "data.prefectures",
    "data.provinces",
    "fishnet.cell_size",
    "fishnet.origin_lon",
    "fishnet.origin_lat",
    "table.max_km",
    "table.lum_pp",
    "table.dialect_min_share",
    "table.cluster_bin_deg",
    "rdd.h",
    "rdd.variance",
    "rdd.nn_neighbors",
    "rdd.bias_correction",
    "rdd.bias_ratio",
    "rdd.cv_candidates",
    "rdd.cv_eval_fraction",
    "rdd.covariates",
    "balance.covariates",
    "battery.rank_gap_threshold",
    "rdplot.outcomes",
    "rdplot.orders",
    "rdplot.bins_per_side",
    "rdplot.range_km",
    "dyads.limit_km",
    "simulate.dir",
    "simulate.cities_per_province",
    "simulate.prefectures_per_province",
    "synth.lon_min",
    "synth.lon_max",
    "synth.lat_min",
    "synth.lat_max",
    "synth.pixel_size",
    "synth.border_shape",
    "synth.amplitude",
    "synth.period",
    "synth.border_count",
    "synth.border_spacing",
    "synth.delta",
    "synth.surface",
    "synth.profile_control",
    "synth.profile_treated",
    "synth.noise_sd",
    "synth.covariate_noise_scale",
    "synth.dialect_bands",
    "synth.dialect_orientation",
    "synth.dialect_effects",
    "synth.pop_zero_fraction",
    "synth.rank_high",
    "synth.rank_low",
  };
  return keys;
}

constexpr std::string_view kJumpPrefix = "synth.covariate_jump.";

bool
valid_key(std::string_view key)
{
  if (key.empty() || key.front() == '.' || key.back() == '.')
    return false;
  return std::all_of(key.begin(), key.end(), [](char c) {
    return std::islower(static_cast<unsigned char>(c)) || std::isdigit(static_cast<unsigned char>(c)) || c == '_' ||
           c == '.';
  });
}

} // namespace

Config
Config::load(const std::string& path)
{
  const std::filesystem::path p(path);
  if (!std::filesystem::is_regular_file(p))
    throw ConfigError("config file not found: " + path);
  const auto dir = std::filesystem::absolute(p).parent_path();
  return parse(read_file(path), path, dir);
}

Config
Config::parse(std::string_view text, const std::string& source, const std::filesystem::path& base_dir)
{
  Config c;
  c.source_ = source;
  c.base_dir_ = base_dir;
  std::size_t line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    line = trim(line);
    if (line.empty())
      continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ParseError(source, line_no, "expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (!valid_key(key))
      throw ParseError(source, line_no, "invalid key '" + key + "'");
    if (!c.values_.emplace(key, value).second)
      throw ParseError(source, line_no, "duplicate key '" + key + "'");
  }
  return c;
}

const std::string*
Config::find(const std::string& key) const
{
  const auto it = values_.find(key);
  return it == values_.end() ? nullptr : &it->second;
}

void
Config::fail(const std::string& key, const std::string& what) const
{
  throw ConfigError("config key '" + key + "': " + what);
}

std::string
Config::text(const std::string& key, const std::string& fallback) const
{
  const auto* v = find(key);
  return v ? *v : fallback;
}

std::string
Config::required_text(const std::string& key) const
{
  const auto* v = find(key);
  if (!v || v->empty())
    fail(key, "required but not set");
  return *v;
}

std::optional<double>
Config::optional_number(const std::string& key) const
{
  const auto* v = find(key);
  if (!v || v->empty())
    return std::nullopt;
  const auto x = parse_double(*v);
  if (!x)
    fail(key, "'" + *v + "' is not a number");
  return x;
}

double
Config::number(const std::string& key, double fallback) const
{
  return optional_number(key).value_or(fallback);
}

long long
Config::integer(const std::string& key, long long fallback) const
{
  const auto* v = find(key);
  if (!v || v->empty())
    return fallback;
  const auto x = parse_int(*v);
  if (!x)
    fail(key, "'" + *v + "' is not an integer");
  return *x;
}

bool
Config::boolean(const std::string& key, bool fallback) const
{
  const auto* v = find(key);
  if (!v || v->empty())
    return fallback;
  if (*v == "true" || *v == "1" || *v == "yes")
    return true;
  if (*v == "false" || *v == "0" || *v == "no")
    return false;
  fail(key, "'" + *v + "' is not a boolean");
}

std::vector<std::string>
Config::list(const std::string& key, const std::vector<std::string>& fallback) const
{
  const auto* v = find(key);
  if (!v)
    return fallback;
  std::vector<std::string> out;
  for (const auto& item : split(*v, ',')) {
    const auto t = trim(item);
    if (!t.empty())
      out.emplace_back(t);
  }
  return out;
}

std::vector<double>
Config::numbers(const std::string& key, const std::vector<double>& fallback) const
{
  if (!find(key))
    return fallback;
  std::vector<double> out;
  for (const auto& item : list(key, {})) {
    const auto x = parse_double(item);
    if (!x)
      fail(key, "'" + item + "' is not a number");
    out.push_back(*x);
  }
  return out;
}

std::filesystem::path
Config::path(const std::string& key) const
{
  const std::filesystem::path p(required_text(key));
  return p.is_absolute() ? p : base_dir_ / p;
}

std::filesystem::path
Config::input_path(const std::string& key) const
{
  auto p = path(key);
  if (!std::filesystem::is_regular_file(p))
    fail(key, "file not found: " + p.string());
  return p;
}

std::filesystem::path
Config::path_or(const std::string& key, const std::filesystem::path& fallback) const
{
  return has(key) ? path(key) : fallback;
}

void
Config::check_known_keys() const
{
  for (const auto& [key, value] : values_) {
    if (known_keys().count(key))
      continue;
    if (key.starts_with(kJumpPrefix)) {
      const auto name = key.substr(kJumpPrefix.size());
      if (std::find(kSyntheticCovariates.begin(), kSyntheticCovariates.end(), name) != kSyntheticCovariates.end())
        continue;
    }
    fail(key, "unknown key");
  }
}

FishnetSpec
fishnet_from(const Config& c)
{
  FishnetSpec f;
  f.cell_size_deg = c.number("fishnet.cell_size", f.cell_size_deg);
  f.origin_lon = c.number("fishnet.origin_lon", f.origin_lon);
  f.origin_lat = c.number("fishnet.origin_lat", f.origin_lat);
  if (!(f.cell_size_deg > 0.0))
    throw ConfigError("config key 'fishnet.cell_size': must be positive");
  return f;
}

CellTableOptions
table_options_from(const Config& c)
{
  CellTableOptions o;
  o.max_km = c.number("table.max_km", o.max_km);
  o.dialect_min_share = c.number("table.dialect_min_share", o.dialect_min_share);
  o.cluster_bin_deg = c.number("table.cluster_bin_deg", o.cluster_bin_deg);
  const auto lum_pp = c.text("table.lum_pp", "log_over_population");
  if (lum_pp == "log_over_population")
    o.lum_pp = LumPerPerson::log_over_population;
  else if (lum_pp == "log_of_ratio")
    o.lum_pp = LumPerPerson::log_of_ratio;
  else
    throw ConfigError("config key 'table.lum_pp': expected log_over_population or log_of_ratio");
  if (!(o.max_km > 0.0))
    throw ConfigError("config key 'table.max_km': must be positive");
  if (!(o.dialect_min_share >= 0.0 && o.dialect_min_share < 1.0))
    throw ConfigError("config key 'table.dialect_min_share': must lie in [0, 1)");
  if (!(o.cluster_bin_deg > 0.0))
    throw ConfigError("config key 'table.cluster_bin_deg': must be positive");
  return o;
}

RddSpec
rdd_spec_from(const Config& c)
{
  RddSpec s;
  if (const auto h = c.optional_number("rdd.h"))
    s.manual_h = *h;
  const auto variance = c.text("rdd.variance", "nn");
  if (variance == "nn")
    s.variance = VarianceKind::nn;
  else if (variance == "cluster")
    s.variance = VarianceKind::cluster;
  else
    throw ConfigError("config key 'rdd.variance': expected nn or cluster");
  s.nn_neighbors = static_cast<int>(c.integer("rdd.nn_neighbors", s.nn_neighbors));
  s.bias_correction = c.boolean("rdd.bias_correction", s.bias_correction);
  s.bias_ratio = c.number("rdd.bias_ratio", s.bias_ratio);
  s.cv_candidates = static_cast<int>(c.integer("rdd.cv_candidates", s.cv_candidates));
  s.cv_eval_fraction = c.number("rdd.cv_eval_fraction", s.cv_eval_fraction);
  try {
    s.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("rdd.* keys: ") + e.what());
  }
  return s;
}

SyntheticWorldConfig
world_config_from(const Config& c)
{
  SyntheticWorldConfig w;
  w.lon_min = c.number("synth.lon_min", w.lon_min);
  w.lon_max = c.number("synth.lon_max", w.lon_max);
  w.lat_min = c.number("synth.lat_min", w.lat_min);
  w.lat_max = c.number("synth.lat_max", w.lat_max);
  w.pixel_size = c.number("synth.pixel_size", w.pixel_size);
  const auto shape = c.text("synth.border_shape", "sinusoidal");
  if (shape == "sinusoidal")
    w.border_shape = BorderShape::sinusoidal;
  else if (shape == "straight")
    w.border_shape = BorderShape::straight;
  else
    throw ConfigError("config key 'synth.border_shape': expected straight or sinusoidal");
  w.amplitude_deg = c.number("synth.amplitude", w.amplitude_deg);
  w.period_deg = c.number("synth.period", w.period_deg);
  w.border_count = static_cast<int>(c.integer("synth.border_count", w.border_count));
  w.border_spacing_deg = c.number("synth.border_spacing", w.border_spacing_deg);
  w.delta = c.number("synth.delta", w.delta);
  w.surface = c.numbers("synth.surface", w.surface);
  w.profile[0] = c.numbers("synth.profile_control", {});
  w.profile[1] = c.numbers("synth.profile_treated", {});
  w.noise_sd = c.number("synth.noise_sd", w.noise_sd);
  for (const auto& name : kSyntheticCovariates) {
    const auto key = std::string(kJumpPrefix) + name;
    if (c.has(key))
      w.covariate_jumps[name] = c.number(key, 0.0);
  }
  w.covariate_noise_scale = c.number("synth.covariate_noise_scale", w.covariate_noise_scale);
  w.dialect_bands = static_cast<int>(c.integer("synth.dialect_bands", w.dialect_bands));
  const auto orient = c.text("synth.dialect_orientation", "latitude");
  if (orient == "latitude")
    w.dialect_orientation = BandOrientation::latitude;
  else if (orient == "longitude")
    w.dialect_orientation = BandOrientation::longitude;
  else
    throw ConfigError("config key 'synth.dialect_orientation': expected latitude or longitude");
  w.dialect_effects = c.numbers("synth.dialect_effects", {});
  w.pop_zero_fraction = c.number("synth.pop_zero_fraction", w.pop_zero_fraction);
  w.rank_high = static_cast<int>(c.integer("synth.rank_high", w.rank_high));
  w.rank_low = static_cast<int>(c.integer("synth.rank_low", w.rank_low));
  const auto seed = c.integer("seed", 1);
  if (seed < 0)
    throw ConfigError("config key 'seed': must be >= 0");
  w.seed = static_cast<std::uint64_t>(seed);
  try {
    w.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("synth.* keys: ") + e.what());
  }
  return w;
}

} // namespace border_rdd::cli
