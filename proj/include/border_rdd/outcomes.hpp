#pragma once

#include "border_rdd/geometry.hpp"
#include "border_rdd/raster.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace border_rdd {

//! One analysis row: a fishnet cell inside one border's buffer.
struct CellRecord
{
  CellId cell_id = 0;
  std::string border_id;
  double lon = 0.0;
  double lat = 0.0;
  double distance_km = 0.0; //!< signed, positive on the treated side
  bool treated = false;
  double lum_sum = 0.0;
  double luminosity = 0.0; //!< ln(lum_sum + 0.01)
  int lit = 0;
  double lum_pp = 0.0;
  double population = 0.0; //!< raw persons; regressions use ln(population)
  double elevation = 0.0;
  double precipitation = 0.0;
  double dist_road = 0.0;
  double log_area = 0.0;
  int dialect = 0;
  std::string cluster_id;
};

//! Row accounting for build_cell_table. `candidates` counts every
//! (cell, border) pair considered; the identity
//! candidates == retained + sum of removals always holds.
struct FilterLog
{
  std::size_t candidates = 0;
  std::size_t removed_buffer = 0;
  std::size_t removed_missing_layer = 0;
  std::size_t removed_population = 0;
  std::size_t removed_dialect_share = 0;
  std::size_t retained = 0;
  std::vector<int> dropped_groups;
};

struct Provenance
{
  std::vector<std::string> sources;
  FilterLog filters;
};

struct CellTable
{
  std::vector<CellRecord> records;
  Provenance provenance;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

double luminosity_transform(double lum_sum);
int lit_indicator(double lum_sum);

enum class LumPerPerson
{
  log_over_population, //!< ln(lum_sum + 0.01) / population
  log_of_ratio         //!< ln((lum_sum + 0.01) / population)
};

struct CellTableOptions
{
  double max_km = 50.0;
  LumPerPerson lum_pp = LumPerPerson::log_over_population;
  double dialect_min_share = 0.01;
  double cluster_bin_deg = 0.5;
};

//! Raw raster layers. The lights layer is already averaged across years.
struct LayerGrids
{
  std::optional<RasterGrid> lights;
  std::optional<RasterGrid> population;
  std::optional<RasterGrid> elevation;
  std::optional<RasterGrid> precipitation;
  std::optional<RasterGrid> dist_road;
  std::optional<RasterGrid> dialect;
};

//! Layers already aggregated onto the fishnet.
struct LayerCells
{
  CellMap lights;        //!< sum of digital numbers
  CellMap population;    //!< sum
  CellMap elevation;     //!< mean
  CellMap precipitation; //!< sum
  CellMap dist_road;     //!< mean
  CellMap dialect;       //!< mode
};

LayerCells aggregate_layers(const LayerGrids& grids, const FishnetSpec& fishnet);

//! Joins layers, applies the buffer, missing-layer, population and
//! dialect-share filters in that order, and computes the transforms.
CellTable build_cell_table(const LayerCells& layers, const std::vector<BorderPolyline>& borders,
                           const FishnetSpec& fishnet, const CellTableOptions& options = {});
CellTable build_cell_table(const LayerGrids& grids, const std::vector<BorderPolyline>& borders,
                           const FishnetSpec& fishnet, const CellTableOptions& options = {});

struct DialectFrequency
{
  int group = 0;
  std::size_t count = 0;
  double percent = 0.0;    //!< rounded to 2 decimals
  double cumulative = 0.0; //!< rounded to 2 decimals, from cumulative counts
};

std::vector<DialectFrequency> dialect_frequency(const std::map<int, std::size_t>& counts);
std::vector<DialectFrequency> dialect_frequency(const CellTable& table);

//! Numeric view of a column. Besides the CellRecord fields this accepts
//! `log_population`. Throws ConfigError for unknown names.
std::vector<double> column_values(const CellTable& table, const std::string& name);
bool is_known_column(const std::string& name);

std::map<std::string, CellTable> split_by_border(const CellTable& table);

extern const std::vector<std::string> kCellTableColumns;

std::string format_cell_table(const CellTable& table);
void write_cell_table(const std::string& path, const CellTable& table);
CellTable load_cell_table(const std::string& path);

} // namespace border_rdd
