#include "border_rdd/outcomes.hpp"
#include "border_rdd/csv.hpp"
#include "border_rdd/error.hpp"
#include "border_rdd/text.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

namespace border_rdd {

const std::vector<std::string> kCellTableColumns = {
  "cell_id",    "border_id",  "lon",           "lat",       "distance_km", "treated",
  "lum_sum",    "luminosity", "lit",           "lum_pp",    "population",  "elevation",
  "precipitation", "dist_road", "log_area",    "dialect",   "cluster_id"
};

double
luminosity_transform(double lum_sum)
{
  if (!(lum_sum >= 0.0))
    throw DomainError("luminosity_transform: lum_sum must be >= 0, got " + format_number(lum_sum));
  return std::log(lum_sum + 0.01);
}

int
lit_indicator(double lum_sum)
{
  return lum_sum > 0.0 ? 1 : 0;
}

LayerCells
aggregate_layers(const LayerGrids& grids, const FishnetSpec& fishnet)
{
  auto need = [](const std::optional<RasterGrid>& g, const char* name) -> const RasterGrid& {
    if (!g)
      throw ConfigError(std::string("missing required layer '") + name + "'");
    return *g;
  };
  LayerCells cells;
  cells.lights = aggregate_to_cells(need(grids.lights, "lights"), fishnet, Reducer::sum);
  cells.population = aggregate_to_cells(need(grids.population, "population"), fishnet, Reducer::sum);
  cells.elevation = aggregate_to_cells(need(grids.elevation, "elevation"), fishnet, Reducer::mean);
  cells.precipitation = aggregate_to_cells(need(grids.precipitation, "precipitation"), fishnet, Reducer::sum);
  cells.dist_road = aggregate_to_cells(need(grids.dist_road, "dist_road"), fishnet, Reducer::mean);
  cells.dialect = aggregate_to_cells(need(grids.dialect, "dialect"), fishnet, Reducer::mode);
  return cells;
}

CellTable
build_cell_table(const LayerCells& layers, const std::vector<BorderPolyline>& borders,
                 const FishnetSpec& fishnet, const CellTableOptions& options)
{
  fishnet.validate();
  if (borders.empty())
    throw ConfigError("build_cell_table: no borders given");
  if (!(options.cluster_bin_deg > 0.0))
    throw ConfigError("cluster_bin_deg must be positive");

  CentroidMap centroids;
  for (const auto& [id, stat] : layers.lights)
    centroids.emplace_hint(centroids.end(), id, cell_centroid(fishnet, decode_cell(id)));

  CellTable table;
  FilterLog& log = table.provenance.filters;
  for (const auto& border : borders) {
    border.validate();
    table.provenance.sources.push_back("border:" + border.border_id);
    const BorderIndex index(border);
    const auto assigned = assign_cells(centroids, index, options.max_km);
    log.candidates += centroids.size();
    log.removed_buffer += centroids.size() - assigned.size();
    for (const auto& a : assigned) {
      const auto pop = layers.population.find(a.cell_id);
      const auto elev = layers.elevation.find(a.cell_id);
      const auto prec = layers.precipitation.find(a.cell_id);
      const auto road = layers.dist_road.find(a.cell_id);
      const auto dial = layers.dialect.find(a.cell_id);
      if (pop == layers.population.end() || elev == layers.elevation.end() ||
          prec == layers.precipitation.end() || road == layers.dist_road.end() ||
          dial == layers.dialect.end()) {
        ++log.removed_missing_layer;
        continue;
      }
      if (!(pop->second.value > 0.0)) {
        ++log.removed_population;
        continue;
      }
      const auto& lights = layers.lights.at(a.cell_id);
      CellRecord r;
      r.cell_id = a.cell_id;
      r.border_id = border.border_id;
      const LonLat c = centroids.at(a.cell_id);
      r.lon = c.lon;
      r.lat = c.lat;
      r.distance_km = a.distance_km;
      r.treated = a.treated;
      r.lum_sum = lights.value;
      r.luminosity = luminosity_transform(r.lum_sum);
      r.lit = lit_indicator(r.lum_sum);
      r.population = pop->second.value;
      r.lum_pp = options.lum_pp == LumPerPerson::log_over_population
                   ? r.luminosity / r.population
                   : std::log((r.lum_sum + 0.01) / r.population);
      r.elevation = elev->second.value;
      r.precipitation = prec->second.value;
      r.dist_road = road->second.value;
      r.log_area = std::log(lights.area_km2);
      r.dialect = static_cast<int>(dial->second.value);
      r.cluster_id = border.border_id + "#" +
                     std::to_string(static_cast<long long>(std::floor(a.along_deg / options.cluster_bin_deg)));
      table.records.push_back(std::move(r));
    }
  }

  // dialect share is computed over all border-region rows pooled across borders
  std::map<int, std::size_t> counts;
  for (const auto& r : table.records)
    ++counts[r.dialect];
  const double total = static_cast<double>(table.records.size());
  for (const auto& [group, n] : counts) {
    if (static_cast<double>(n) / total < options.dialect_min_share)
      log.dropped_groups.push_back(group);
  }
  if (!log.dropped_groups.empty()) {
    const auto before = table.records.size();
    std::erase_if(table.records, [&](const CellRecord& r) {
      return std::binary_search(log.dropped_groups.begin(), log.dropped_groups.end(), r.dialect);
    });
    log.removed_dialect_share = before - table.records.size();
  }
  log.retained = table.records.size();
  if (table.records.empty())
    throw EmptySampleError("build_cell_table: no cells remain after filtering");

  std::sort(table.records.begin(), table.records.end(), [](const CellRecord& a, const CellRecord& b) {
    return std::tie(a.border_id, a.cell_id) < std::tie(b.border_id, b.cell_id);
  });
  return table;
}

CellTable
build_cell_table(const LayerGrids& grids, const std::vector<BorderPolyline>& borders,
                 const FishnetSpec& fishnet, const CellTableOptions& options)
{
  return build_cell_table(aggregate_layers(grids, fishnet), borders, fishnet, options);
}

std::vector<DialectFrequency>
dialect_frequency(const std::map<int, std::size_t>& counts)
{
  std::size_t total = 0;
  for (const auto& [g, n] : counts)
    total += n;
  if (total == 0)
    throw EmptySampleError("dialect_frequency: empty table");
  auto round2 = [](double x) { return std::round(x * 100.0) / 100.0; };
  std::vector<DialectFrequency> out;
  std::size_t running = 0;
  for (const auto& [g, n] : counts) {
    running += n;
    out.push_back({ g, n, round2(100.0 * static_cast<double>(n) / static_cast<double>(total)),
                    round2(100.0 * static_cast<double>(running) / static_cast<double>(total)) });
  }
  return out;
}

std::vector<DialectFrequency>
dialect_frequency(const CellTable& table)
{
  std::map<int, std::size_t> counts;
  for (const auto& r : table.records)
    ++counts[r.dialect];
  return dialect_frequency(counts);
}

namespace {

template<typename F>
std::vector<double>
collect(const CellTable& t, F f)
{
  std::vector<double> out;
  out.reserve(t.records.size());
  for (const auto& r : t.records)
    out.push_back(f(r));
  return out;
}

} // namespace

bool
is_known_column(const std::string& name)
{
  static const std::vector<std::string> extra = { "lon",       "lat",        "distance_km", "treated",
                                                  "lum_sum",   "luminosity", "lit",         "lum_pp",
                                                  "population", "log_population", "elevation", "precipitation",
                                                  "dist_road", "log_area",   "dialect" };
  return std::find(extra.begin(), extra.end(), name) != extra.end();
}

std::vector<double>
column_values(const CellTable& t, const std::string& name)
{
  using R = const CellRecord&;
  if (name == "lon")
    return collect(t, [](R r) { return r.lon; });
  if (name == "lat")
    return collect(t, [](R r) { return r.lat; });
  if (name == "distance_km")
    return collect(t, [](R r) { return r.distance_km; });
  if (name == "treated")
    return collect(t, [](R r) { return r.treated ? 1.0 : 0.0; });
  if (name == "lum_sum")
    return collect(t, [](R r) { return r.lum_sum; });
  if (name == "luminosity")
    return collect(t, [](R r) { return r.luminosity; });
  if (name == "lit")
    return collect(t, [](R r) { return static_cast<double>(r.lit); });
  if (name == "lum_pp")
    return collect(t, [](R r) { return r.lum_pp; });
  if (name == "population")
    return collect(t, [](R r) { return r.population; });
  if (name == "log_population")
    return collect(t, [](R r) { return std::log(r.population); });
  if (name == "elevation")
    return collect(t, [](R r) { return r.elevation; });
  if (name == "precipitation")
    return collect(t, [](R r) { return r.precipitation; });
  if (name == "dist_road")
    return collect(t, [](R r) { return r.dist_road; });
  if (name == "log_area")
    return collect(t, [](R r) { return r.log_area; });
  if (name == "dialect")
    return collect(t, [](R r) { return static_cast<double>(r.dialect); });
  throw ConfigError("unknown cell-table column '" + name + "'");
}

std::map<std::string, CellTable>
split_by_border(const CellTable& table)
{
  std::map<std::string, CellTable> out;
  for (const auto& r : table.records)
    out[r.border_id].records.push_back(r);
  for (auto& [id, t] : out) {
    t.provenance.sources = { "border:" + id };
    t.provenance.filters.retained = t.records.size();
  }
  return out;
}

std::string
format_cell_table(const CellTable& table)
{
  CsvWriter w(kCellTableColumns);
  for (const auto& r : table.records) {
    w.add({ std::to_string(r.cell_id), r.border_id, format_number(r.lon), format_number(r.lat),
            format_number(r.distance_km), r.treated ? "1" : "0", format_number(r.lum_sum),
            format_number(r.luminosity), std::to_string(r.lit), format_number(r.lum_pp),
            format_number(r.population), format_number(r.elevation), format_number(r.precipitation),
            format_number(r.dist_road), format_number(r.log_area), std::to_string(r.dialect), r.cluster_id });
  }
  return w.str();
}

void
write_cell_table(const std::string& path, const CellTable& table)
{
  write_file_atomic(path, format_cell_table(table));
}

CellTable
load_cell_table(const std::string& path)
{
  const auto csv = CsvTable::load(path);
  std::vector<std::size_t> col;
  for (const auto& name : kCellTableColumns)
    col.push_back(csv.column(name));
  CellTable t;
  t.provenance.sources.push_back("table:" + path);
  for (std::size_t i = 0; i < csv.size(); ++i) {
    CellRecord r;
    std::size_t k = 0;
    r.cell_id = csv.integer(i, col[k++]);
    r.border_id = csv.cell(i, col[k++]);
    r.lon = csv.number(i, col[k++]);
    r.lat = csv.number(i, col[k++]);
    r.distance_km = csv.number(i, col[k++]);
    r.treated = csv.integer(i, col[k++]) != 0;
    r.lum_sum = csv.number(i, col[k++]);
    r.luminosity = csv.number(i, col[k++]);
    r.lit = static_cast<int>(csv.integer(i, col[k++]));
    r.lum_pp = csv.number(i, col[k++]);
    r.population = csv.number(i, col[k++]);
    r.elevation = csv.number(i, col[k++]);
    r.precipitation = csv.number(i, col[k++]);
    r.dist_road = csv.number(i, col[k++]);
    r.log_area = csv.number(i, col[k++]);
    r.dialect = static_cast<int>(csv.integer(i, col[k++]));
    r.cluster_id = csv.cell(i, col[k++]);
    if (r.treated != (r.distance_km > 0.0))
      throw StructuralError(path + ": row " + std::to_string(i + 2) + " treated flag disagrees with distance sign");
    t.records.push_back(std::move(r));
  }
  std::set<std::pair<std::string, CellId>> seen;
  for (const auto& r : t.records) {
    if (!seen.emplace(r.border_id, r.cell_id).second)
      throw StructuralError(path + ": duplicate (cell_id, border_id) pair " + std::to_string(r.cell_id));
  }
  t.provenance.filters.candidates = t.provenance.filters.retained = t.records.size();
  return t;
}

} // namespace border_rdd
