#include "commands.hpp"

#include "border_rdd/csv.hpp"
#include "border_rdd/error.hpp"
#include "border_rdd/geometry.hpp"
#include "border_rdd/studies.hpp"
#include "border_rdd/text.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>

namespace border_rdd::cli {

namespace fs = std::filesystem;

const std::vector<std::string> kCommands = { "simulate", "table",   "estimate", "balance", "battery",
                                             "rdplot",   "dyads",   "private",  "rankgdp" };

namespace {

fs::path
output_dir(const Config& c)
{
  auto dir = c.path_or("output_dir", c.base_dir() / "out");
  fs::create_directories(dir);
  return dir;
}

void
emit(const fs::path& dir, const std::string& name, const std::string& contents)
{
  write_file_atomic((dir / name).string(), contents);
  std::cerr << "  wrote " << (dir / name).string() << "\n";
}

std::vector<BorderPolyline>
borders_from(const Config& c)
{
  return load_borders(c.input_path("data.border_vertices").string(), c.input_path("data.border_meta").string());
}

CellTable
cell_table_from(const Config& c)
{
  const auto path = c.path_or("data.cell_table", output_dir(c) / "cells.csv");
  if (!fs::is_regular_file(path))
    throw ConfigError("config key 'data.cell_table': file not found: " + path.string() +
                      " (run the table command first)");
  return load_cell_table(path.string());
}

std::vector<std::string>
covariates_from(const Config& c)
{
  return c.list("rdd.covariates", kDefaultCovariates);
}

void
cmd_simulate(const Config& c)
{
  const auto world_cfg = world_config_from(c);
  const auto dir = c.path_or("simulate.dir", output_dir(c) / "world");
  const auto cities = c.integer("simulate.cities_per_province", 6);
  const auto prefs = c.integer("simulate.prefectures_per_province", 4);
  const auto world = generate_world(world_cfg);
  const auto fixtures = generate_study_fixtures(world_cfg, static_cast<int>(cities), static_cast<int>(prefs));
  fs::create_directories(dir);
  write_world(dir.string(), world);
  emit(dir, "cities.csv", format_cities(fixtures.cities));
  emit(dir, "prefectures.csv", format_prefectures(fixtures.prefectures));
  emit(dir, "provinces.csv", format_province_ranks(fixtures.provinces));
  std::cerr << "simulate: " << world_cfg.ncols() << " x " << world_cfg.nrows() << " pixels, "
            << world.borders.size() << " borders in " << dir.string() << "\n";
}

void
cmd_table(const Config& c)
{
  const auto fishnet = fishnet_from(c);
  const auto options = table_options_from(c);
  LayerGrids grids;
  {
    const auto paths = c.list("data.lights", {});
    if (paths.empty())
      throw ConfigError("config key 'data.lights': required but not set");
    std::vector<RasterGrid> years;
    for (const auto& p : paths) {
      const fs::path full = fs::path(p).is_absolute() ? fs::path(p) : c.base_dir() / p;
      if (!fs::is_regular_file(full))
        throw ConfigError("config key 'data.lights': file not found: " + full.string());
      years.push_back(load_grid(full.string(), GridKind::continuous));
    }
    grids.lights = years.size() == 1 ? std::move(years.front()) : multi_year_mean(years);
  }
  grids.population = load_grid(c.input_path("data.population").string(), GridKind::continuous);
  grids.elevation = load_grid(c.input_path("data.elevation").string(), GridKind::continuous);
  grids.precipitation = load_grid(c.input_path("data.precipitation").string(), GridKind::continuous);
  grids.dist_road = load_grid(c.input_path("data.dist_road").string(), GridKind::continuous);
  grids.dialect = load_grid(c.input_path("data.dialect").string(), GridKind::categorical);
  const auto borders = borders_from(c);

  const auto table = build_cell_table(grids, borders, fishnet, options);
  const auto dir = output_dir(c);
  emit(dir, "cells.csv", format_cell_table(table));

  const auto& log = table.provenance.filters;
  CsvWriter f({ "stage", "rows" });
  f.add({ "candidates", std::to_string(log.candidates) });
  f.add({ "removed_buffer", std::to_string(log.removed_buffer) });
  f.add({ "removed_missing_layer", std::to_string(log.removed_missing_layer) });
  f.add({ "removed_population", std::to_string(log.removed_population) });
  f.add({ "removed_dialect_share", std::to_string(log.removed_dialect_share) });
  f.add({ "retained", std::to_string(log.retained) });
  emit(dir, "filter_log.csv", f.str());

  CsvWriter d({ "dialect", "count", "percent", "cumulative_percent" });
  for (const auto& g : dialect_frequency(table))
    d.add({ std::to_string(g.group), std::to_string(g.count), format_number(g.percent), format_number(g.cumulative) });
  emit(dir, "dialect_frequency.csv", d.str());
  std::cerr << "table: " << table.size() << " rows from " << borders.size() << " borders\n";
}

void
cmd_estimate(const Config& c)
{
  const auto table = cell_table_from(c);
  const auto base = rdd_spec_from(c);
  const auto dir = output_dir(c);
  emit(dir, "pooled.csv", format_pooled(pooled_dialect_fe(table, base)));
  emit(dir, "pooled_covariates.csv", format_pooled(pooled_dialect_fe(table, base, covariates_from(c))));
}

void
cmd_balance(const Config& c)
{
  const auto table = cell_table_from(c);
  const auto base = rdd_spec_from(c);
  const auto covs =
    c.list("balance.covariates", { "elevation", "precipitation", "log_population", "dist_road" });
  emit(output_dir(c), "balance.csv", format_results(balance_battery(table, covs, base)));
}

void
cmd_battery(const Config& c)
{
  const auto table = cell_table_from(c);
  const auto base = rdd_spec_from(c);
  const auto borders = borders_from(c);
  const auto threshold = c.integer("battery.rank_gap_threshold", 7);
  if (threshold < 1)
    throw ConfigError("config key 'battery.rank_gap_threshold': must be >= 1");
  const auto gaps = rank_gap_filter(borders, static_cast<int>(threshold));

  std::vector<std::string> ids;
  for (const auto& b : gaps.retained)
    ids.push_back(b.border_id);
  std::sort(ids.begin(), ids.end());
  const auto results = per_border_battery(split_by_border(table), ids, base, covariates_from(c));

  const auto dir = output_dir(c);
  emit(dir, "battery.csv", format_results(results));

  std::vector<const BorderPolyline*> sorted;
  for (const auto& b : borders)
    sorted.push_back(&b);
  std::sort(sorted.begin(), sorted.end(),
            [](const BorderPolyline* a, const BorderPolyline* b) { return a->border_id < b->border_id; });
  CsvWriter w({ "border_id", "prov_high", "prov_low", "rank_high", "rank_low", "rank_gap", "retained" });
  for (const auto* b : sorted) {
    w.add({ b->border_id, b->prov_high, b->prov_low, std::to_string(b->rank_high), std::to_string(b->rank_low),
            std::to_string(b->rank_gap()), b->rank_gap() >= threshold ? "1" : "0" });
  }
  emit(dir, "rank_gap_borders.csv", w.str());
  CsvWriter s({ "threshold", "total", "retained", "mean_gap", "sd_gap" });
  s.add({ std::to_string(threshold), std::to_string(gaps.total), std::to_string(gaps.retained.size()),
          format_number(gaps.mean_gap), format_number(gaps.sd_gap) });
  emit(dir, "rank_gap_summary.csv", s.str());
}

void
cmd_rdplot(const Config& c)
{
  const auto table = cell_table_from(c);
  const auto outcomes = c.list("rdplot.outcomes", { "luminosity", "lit" });
  std::vector<int> orders;
  for (double o : c.numbers("rdplot.orders", { 1.0, 2.0 })) {
    if (o != std::floor(o) || o < 1.0 || o > 4.0)
      throw ConfigError("config key 'rdplot.orders': orders must be integers in [1, 4]");
    orders.push_back(static_cast<int>(o));
  }
  const auto bins = c.integer("rdplot.bins_per_side", 20);
  const auto range = c.number("rdplot.range_km", 50.0);
  if (bins < 1)
    throw ConfigError("config key 'rdplot.bins_per_side': must be >= 1");
  if (!(range > 0.0))
    throw ConfigError("config key 'rdplot.range_km': must be positive");

  std::vector<std::pair<std::string, const CellTable*>> scopes = { { "pooled", &table } };
  const auto per_border = split_by_border(table);
  for (const auto& [id, sub] : per_border)
    scopes.emplace_back(id, &sub);

  std::vector<PlotSeries> series;
  for (const auto& outcome : outcomes) {
    if (!is_known_column(outcome))
      throw ConfigError("config key 'rdplot.outcomes': unknown column '" + outcome + "'");
    for (const auto& [scope, sub] : scopes) {
      const auto d = column_values(*sub, "distance_km");
      const auto y = column_values(*sub, outcome);
      series.push_back({ scope, outcome, rd_plot_data(d, y, orders, static_cast<int>(bins), range) });
    }
  }
  const auto dir = output_dir(c);
  emit(dir, "rdplot_bins.csv", format_plot_bins(series));
  emit(dir, "rdplot_fits.csv", format_plot_fits(series));
}

void
cmd_dyads(const Config& c)
{
  const auto cities = load_cities(c.input_path("data.cities").string());
  const auto adjacency = province_adjacency(borders_from(c));
  const auto s = dyad_differences(cities, adjacency, c.number("dyads.limit_km", 150.0));
  const auto dir = output_dir(c);
  emit(dir, "dyads.csv", format_dyads(s));
  emit(dir, "dyads_summary.csv", format_dyad_summary(s));
  for (const auto& id : s.excluded)
    std::cerr << "dyads: city " << id << " has no qualifying neighbour, excluded\n";
}

void
cmd_private(const Config& c)
{
  const auto prefs = load_prefectures(c.input_path("data.prefectures").string());
  const auto s = percent_private_analysis(prefs, borders_from(c));
  const auto dir = output_dir(c);
  emit(dir, "private_pairs.csv", format_private_pairs(s));
  emit(dir, "private_summary.csv", format_private_summary(s));
  for (const auto& d : s.dropped)
    std::cerr << "private: dropped " << d << "\n";
}

void
cmd_rankgdp(const Config& c)
{
  const auto provinces = load_province_ranks(c.input_path("data.provinces").string());
  emit(output_dir(c), "rankgdp.csv", format_rank_gdp(rank_gdp_regression(provinces)));
}

const std::map<std::string, std::function<void(const Config&)>>&
dispatch()
{
  static const std::map<std::string, std::function<void(const Config&)>> table = {
    { "simulate", cmd_simulate }, { "table", cmd_table }, { "estimate", cmd_estimate },
    { "balance", cmd_balance },   { "battery", cmd_battery }, { "rdplot", cmd_rdplot },
    { "dyads", cmd_dyads },       { "private", cmd_private }, { "rankgdp", cmd_rankgdp },
  };
  return table;
}

int
thread_count(const Config& c, int from_flag)
{
  if (from_flag > 0)
    return from_flag;
  const auto configured = c.integer("threads", 0);
  if (configured < 0)
    throw ConfigError("config key 'threads': must be >= 0");
  if (configured > 0)
    return static_cast<int>(configured);
  if (const char* env = std::getenv("BORDER_RDD_THREADS")) {
    const auto v = parse_int(env);
    if (!v || *v < 0)
      throw ConfigError(std::string("BORDER_RDD_THREADS: '") + env + "' is not a non-negative integer");
    return static_cast<int>(*v);
  }
  return 0;
}

} // namespace

void
run_command(const std::string& command, const Config& config)
{
  const auto it = dispatch().find(command);
  if (it == dispatch().end())
    throw ConfigError("unknown command '" + command + "'");
  config.check_known_keys();
  try {
    it->second(config);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw Error(command + ": " + e.what());
  }
}

int
main_entry(int argc, char** argv)
{
  CLI::App app{ "Spatial regression discontinuity at administrative borders" };
  app.require_subcommand(1, 1);
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (overrides the config and BORDER_RDD_THREADS)")
    ->check(CLI::NonNegativeNumber);
  std::string config_path;
  for (const auto& name : kCommands) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "flat key = value run configuration")->required();
    sub->add_option("--threads", threads, "worker threads")->check(CLI::NonNegativeNumber);
  }
  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    const auto config = Config::load(config_path);
    if (const int n = thread_count(config, threads); n > 0)
      omp_set_num_threads(n);
    run_command(command, config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

} // namespace border_rdd::cli
