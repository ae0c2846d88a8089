#include "border_rdd/raster.hpp"
#include "border_rdd/error.hpp"
#include "border_rdd/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace border_rdd {

namespace {

constexpr std::int64_t kCellBias = 4'000'000;
constexpr std::int64_t kCellStride = 10'000'000;

bool
iequals(std::string_view a, std::string_view b)
{
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

double
reduce_values(const std::vector<double>& v, Reducer reducer)
{
  switch (reducer) {
    case Reducer::sum: {
      double s = 0.0;
      for (double x : v)
        s += x;
      return s;
    }
    case Reducer::mean: {
      double s = 0.0;
      for (double x : v)
        s += x;
      return s / static_cast<double>(v.size());
    }
    case Reducer::sd: {
      double s = 0.0;
      for (double x : v)
        s += x;
      const double m = s / static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v)
        ss += (x - m) * (x - m);
      return std::sqrt(ss / static_cast<double>(v.size()));
    }
    case Reducer::mode: {
      std::map<double, std::size_t> counts;
      for (double x : v)
        ++counts[x];
      double best = 0.0;
      std::size_t best_count = 0;
      // map iterates in ascending category order, so strict > keeps the
      // smallest id on ties
      for (const auto& [cat, n] : counts) {
        if (n > best_count) {
          best = cat;
          best_count = n;
        }
      }
      return best;
    }
  }
  return 0.0;
}

void
check_reducer(const RasterGrid& grid, Reducer reducer)
{
  if (reducer == Reducer::mode && grid.kind != GridKind::categorical)
    throw KindError("mode reducer requires a categorical grid");
}

} // namespace

double
RasterGrid::center_lon(std::size_t col) const
{
  return xll + (static_cast<double>(col) + 0.5) * cellsize;
}

double
RasterGrid::center_lat(std::size_t row) const
{
  return yll + (static_cast<double>(nrows - 1 - row) + 0.5) * cellsize;
}

void
RasterGrid::validate() const
{
  if (ncols < 1 || nrows < 1)
    throw StructuralError("grid must have at least one row and one column");
  if (!(cellsize > 0.0))
    throw StructuralError("grid cellsize must be positive");
  if (values.size() != ncols * nrows)
    throw StructuralError("grid has " + std::to_string(values.size()) + " values, header declares " +
                          std::to_string(ncols * nrows));
  if (kind == GridKind::categorical) {
    for (double v : values) {
      if (!is_nodata(v) && v != std::floor(v))
        throw StructuralError("categorical grid contains non-integer value " + format_number(v));
    }
  }
}

bool
same_georeference(const RasterGrid& a, const RasterGrid& b)
{
  return a.ncols == b.ncols && a.nrows == b.nrows && a.xll == b.xll && a.yll == b.yll &&
         a.cellsize == b.cellsize;
}

RasterGrid
parse_grid(std::istream& in, GridKind kind, const std::string& source)
{
  static constexpr std::array<const char*, 6> keys = {
    "ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "NODATA_value"
  };
  RasterGrid grid;
  grid.kind = kind;
  std::array<double, 6> header{};
  std::string line;
  std::size_t lineno = 0;
  for (std::size_t k = 0; k < keys.size(); ++k) {
    ++lineno;
    if (!std::getline(in, line))
      throw ParseError(source, lineno, std::string("missing header line '") + keys[k] + "'");
    auto parts = split_whitespace(line);
    if (parts.size() != 2 || !iequals(parts[0], keys[k]))
      throw ParseError(source, lineno, std::string("expected '") + keys[k] + " <value>'");
    auto v = parse_double(parts[1]);
    if (!v || std::isnan(*v))
      throw ParseError(source, lineno, "bad numeric value '" + parts[1] + "'");
    header[k] = *v;
  }
  auto as_count = [&](double v, std::size_t ln, const char* key) {
    if (v < 1 || v != std::floor(v))
      throw ParseError(source, ln, std::string(key) + " must be a positive integer");
    return static_cast<std::size_t>(v);
  };
  grid.ncols = as_count(header[0], 1, "ncols");
  grid.nrows = as_count(header[1], 2, "nrows");
  grid.xll = header[2];
  grid.yll = header[3];
  grid.cellsize = header[4];
  grid.nodata = header[5];
  if (!(grid.cellsize > 0.0))
    throw ParseError(source, 5, "cellsize must be positive");

  grid.values.reserve(grid.ncols * grid.nrows);
  while (std::getline(in, line)) {
    ++lineno;
    for (const auto& tok : split_whitespace(line)) {
      auto v = parse_double(tok);
      if (!v)
        throw ParseError(source, lineno, "bad numeric value '" + tok + "'");
      grid.values.push_back(*v);
    }
  }
  if (grid.values.size() != grid.ncols * grid.nrows)
    throw StructuralError(source + ": body has " + std::to_string(grid.values.size()) +
                          " values, header declares " + std::to_string(grid.ncols * grid.nrows));
  grid.validate();
  return grid;
}

RasterGrid
load_grid(const std::string& path, GridKind kind)
{
  std::ifstream in(path);
  if (!in)
    throw Error("cannot open grid file: " + path);
  return parse_grid(in, kind, path);
}

std::string
format_grid(const RasterGrid& grid)
{
  std::string out;
  out.reserve(grid.values.size() * 6 + 128);
  out += "ncols " + std::to_string(grid.ncols) + "\n";
  out += "nrows " + std::to_string(grid.nrows) + "\n";
  out += "xllcorner " + format_number(grid.xll) + "\n";
  out += "yllcorner " + format_number(grid.yll) + "\n";
  out += "cellsize " + format_number(grid.cellsize) + "\n";
  out += "NODATA_value " + format_number(grid.nodata) + "\n";
  for (std::size_t r = 0; r < grid.nrows; ++r) {
    for (std::size_t c = 0; c < grid.ncols; ++c) {
      if (c)
        out += ' ';
      out += format_number(grid.at(r, c));
    }
    out += '\n';
  }
  return out;
}

void
write_grid(const std::string& path, const RasterGrid& grid)
{
  write_file_atomic(path, format_grid(grid));
}

RasterGrid
multi_year_mean(std::span<const RasterGrid> grids)
{
  if (grids.empty())
    throw StructuralError("multi_year_mean needs at least one grid");
  const RasterGrid& first = grids.front();
  for (const auto& g : grids) {
    g.validate();
    if (g.kind != GridKind::continuous)
      throw KindError("multi_year_mean requires continuous grids");
    if (!same_georeference(first, g))
      throw AlignmentError("multi_year_mean: grids do not share georeferencing");
  }
  RasterGrid out = first;
  const double n = static_cast<double>(grids.size());
  const std::size_t npix = first.values.size();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(npix); ++i) {
    double s = 0.0;
    bool missing = false;
    for (const auto& g : grids) {
      const double v = g.values[i];
      if (g.is_nodata(v)) {
        missing = true;
        break;
      }
      s += v;
    }
    out.values[i] = missing ? out.nodata : s / n;
  }
  return out;
}

void
FishnetSpec::validate() const
{
  if (!(cell_size_deg > 0.0))
    throw ConfigError("fishnet cell_size_deg must be positive");
}

CellId
encode_cell(CellIndex index)
{
  return (index.iy + kCellBias) * kCellStride + (index.ix + kCellBias);
}

CellIndex
decode_cell(CellId id)
{
  return { id % kCellStride - kCellBias, id / kCellStride - kCellBias };
}

CellIndex
locate_cell(const FishnetSpec& fishnet, double lon, double lat)
{
  return { static_cast<std::int64_t>(std::floor((lon - fishnet.origin_lon) / fishnet.cell_size_deg)),
           static_cast<std::int64_t>(std::floor((lat - fishnet.origin_lat) / fishnet.cell_size_deg)) };
}

LonLat
cell_centroid(const FishnetSpec& fishnet, CellIndex index)
{
  return { fishnet.origin_lon + (static_cast<double>(index.ix) + 0.5) * fishnet.cell_size_deg,
           fishnet.origin_lat + (static_cast<double>(index.iy) + 0.5) * fishnet.cell_size_deg };
}

double
cell_area_km2(const FishnetSpec& fishnet, CellIndex index)
{
  constexpr double rad = std::numbers::pi / 180.0;
  const double lat0 = fishnet.origin_lat + static_cast<double>(index.iy) * fishnet.cell_size_deg;
  const double lat1 = lat0 + fishnet.cell_size_deg;
  return kEarthRadiusKm * kEarthRadiusKm * fishnet.cell_size_deg * rad *
         (std::sin(lat1 * rad) - std::sin(lat0 * rad));
}

CellMap
aggregate_to_cells(const RasterGrid& grid, const FishnetSpec& fishnet, Reducer reducer)
{
  grid.validate();
  fishnet.validate();
  check_reducer(grid, reducer);

  const std::size_t npix = grid.values.size();
  std::vector<CellId> owner(npix);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(grid.nrows); ++r) {
    const double lat = grid.center_lat(static_cast<std::size_t>(r));
    for (std::size_t c = 0; c < grid.ncols; ++c) {
      const double lon = grid.center_lon(c);
      owner[static_cast<std::size_t>(r) * grid.ncols + c] = encode_cell(locate_cell(fishnet, lon, lat));
    }
  }

  std::vector<std::uint32_t> order;
  order.reserve(npix);
  for (std::size_t i = 0; i < npix; ++i) {
    if (!grid.is_nodata(grid.values[i]))
      order.push_back(static_cast<std::uint32_t>(i));
  }
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return owner[a] < owner[b];
  });

  CellMap out;
  std::vector<double> bucket;
  for (std::size_t k = 0; k < order.size();) {
    const CellId id = owner[order[k]];
    bucket.clear();
    std::size_t j = k;
    for (; j < order.size() && owner[order[j]] == id; ++j)
      bucket.push_back(grid.values[order[j]]);
    out.emplace_hint(out.end(), id,
                     CellStat{ reduce_values(bucket, reducer), bucket.size(),
                               cell_area_km2(fishnet, decode_cell(id)) });
    k = j;
  }
  return out;
}

namespace reference {

CellMap
aggregate_to_cells(const RasterGrid& grid, const FishnetSpec& fishnet, Reducer reducer)
{
  grid.validate();
  fishnet.validate();
  check_reducer(grid, reducer);
  std::map<CellId, std::vector<double>> buckets;
  for (std::size_t r = 0; r < grid.nrows; ++r) {
    for (std::size_t c = 0; c < grid.ncols; ++c) {
      const double v = grid.values[r * grid.ncols + c];
      if (v == grid.nodata)
        continue;
      const double lon = grid.xll + (static_cast<double>(c) + 0.5) * grid.cellsize;
      const double lat = grid.yll + (static_cast<double>(grid.nrows - 1 - r) + 0.5) * grid.cellsize;
      const auto ix = static_cast<std::int64_t>(std::floor((lon - fishnet.origin_lon) / fishnet.cell_size_deg));
      const auto iy = static_cast<std::int64_t>(std::floor((lat - fishnet.origin_lat) / fishnet.cell_size_deg));
      buckets[encode_cell({ ix, iy })].push_back(v);
    }
  }
  CellMap out;
  for (const auto& [id, vals] : buckets)
    out[id] = CellStat{ reduce_values(vals, reducer), vals.size(), cell_area_km2(fishnet, decode_cell(id)) };
  return out;
}

} // namespace reference

} // namespace border_rdd
