#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace border_rdd {

enum class GridKind
{
  continuous,
  categorical
};

//! Single-band georeferenced grid. Rows are stored top row first, so row 0
//! is the northernmost row and `yll` is the southern edge of the last row.
struct RasterGrid
{
  std::size_t ncols = 0;
  std::size_t nrows = 0;
  double xll = 0.0;
  double yll = 0.0;
  double cellsize = 0.0;
  double nodata = -9999.0;
  std::vector<double> values;
  GridKind kind = GridKind::continuous;

  double at(std::size_t row, std::size_t col) const { return values[row * ncols + col]; }
  bool is_nodata(double v) const { return v == nodata; }
  double center_lon(std::size_t col) const;
  double center_lat(std::size_t row) const;

  //! Throws StructuralError when an invariant is violated.
  void validate() const;
};

bool same_georeference(const RasterGrid& a, const RasterGrid& b);

RasterGrid parse_grid(std::istream& in, GridKind kind, const std::string& source = "<stream>");
RasterGrid load_grid(const std::string& path, GridKind kind);

//! Canonical ASCII grid text: six header lines, shortest round-trip numbers,
//! single spaces, LF endings.
std::string format_grid(const RasterGrid& grid);
void write_grid(const std::string& path, const RasterGrid& grid);

//! Pixelwise mean across years. A pixel is nodata if it is nodata in any input.
RasterGrid multi_year_mean(std::span<const RasterGrid> grids);

//! Regular lon/lat lattice of analysis cells.
struct FishnetSpec
{
  double cell_size_deg = 0.05;
  double origin_lon = 0.0;
  double origin_lat = 0.0;

  void validate() const;
};

//! Integer lattice position of a fishnet cell, relative to the origin.
struct CellIndex
{
  std::int64_t ix = 0;
  std::int64_t iy = 0;
  auto operator<=>(const CellIndex&) const = default;
};

using CellId = std::int64_t;

//! Stable decimal-readable cell id: (iy + 4e6) * 1e7 + (ix + 4e6).
CellId encode_cell(CellIndex index);
CellIndex decode_cell(CellId id);

//! Cell containing a point. A point exactly on a cell edge belongs to the
//! cell with the larger index along that axis.
CellIndex locate_cell(const FishnetSpec& fishnet, double lon, double lat);

struct LonLat
{
  double lon = 0.0;
  double lat = 0.0;
};

LonLat cell_centroid(const FishnetSpec& fishnet, CellIndex index);

inline constexpr double kEarthRadiusKm = 6371.0088;

//! Exact area of a lon/lat rectangle on a sphere of radius kEarthRadiusKm.
double cell_area_km2(const FishnetSpec& fishnet, CellIndex index);

enum class Reducer
{
  sum,
  mean,
  sd, //!< population standard deviation
  mode
};

struct CellStat
{
  double value = 0.0;
  std::size_t pixel_count = 0;
  double area_km2 = 0.0;
};

using CellMap = std::map<CellId, CellStat>;

//! Assigns every non-nodata pixel to the fishnet cell containing its center
//! and reduces. Cells without contributing pixels are absent.
CellMap aggregate_to_cells(const RasterGrid& grid, const FishnetSpec& fishnet, Reducer reducer);

namespace reference {

//! Straight per-pixel loop used to check aggregate_to_cells.
CellMap aggregate_to_cells(const RasterGrid& grid, const FishnetSpec& fishnet, Reducer reducer);

} // namespace reference

} // namespace border_rdd
