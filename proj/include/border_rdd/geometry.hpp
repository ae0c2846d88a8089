#pragma once

#include "border_rdd/raster.hpp"

#include <map>
#include <string>
#include <vector>

namespace border_rdd {

//! Border between a better-ranked (treated) and a worse-ranked province.
//! Vertex order is oriented so that the treated side lies to the left.
struct BorderPolyline
{
  std::string border_id;
  std::vector<LonLat> vertices;
  std::string prov_high;
  std::string prov_low;
  int rank_high = 2;
  int rank_low = 1;

  void validate() const;
  int rank_gap() const { return rank_high - rank_low; }
};

double haversine_km(LonLat a, LonLat b);

//! Densification step for point-to-border distances, in degrees.
inline constexpr double kBorderSampleSpacingDeg = 0.005;

struct BorderDistance
{
  double km = 0.0;        //!< signed, positive on the treated side
  double along_deg = 0.0; //!< polyline arc length (degrees) at the nearest sample
  std::size_t segment = 0;
};

//! Densified border ready for repeated distance queries.
class BorderIndex
{
public:
  explicit BorderIndex(BorderPolyline border, double spacing_deg = kBorderSampleSpacingDeg);

  //! Nearest-sample search with planar pruning. Returns the same sample as a
  //! full scan for points within a few hundred kilometres of the border.
  BorderDistance locate(LonLat p) const;

  //! Full scan over every sample.
  BorderDistance locate_exhaustive(LonLat p) const;

  const BorderPolyline& border() const { return border_; }
  double total_length_deg() const { return cumulative_.back(); }

  //! Lon/lat box that contains every point within `km` of the border.
  struct Box
  {
    double lon_min, lon_max, lat_min, lat_max;
    bool contains(LonLat p) const
    {
      return p.lon >= lon_min && p.lon <= lon_max && p.lat >= lat_min && p.lat <= lat_max;
    }
  };
  Box buffer_box(double km) const;

private:
  struct Sample
  {
    double lon, lat, lat_rad, cos_lat;
  };

  BorderDistance finish(LonLat p, std::size_t best_sample, double best_km) const;
  double planar_segment_km(LonLat p, std::size_t seg) const;
  double planar_segment_km(LonLat p, double kx, std::size_t seg) const;
  double sample_km(LonLat p, double p_lat_rad, double p_cos, std::size_t idx) const;

  BorderPolyline border_;
  std::vector<Sample> samples_;
  std::vector<std::size_t> first_sample_; //!< per segment, global index of its t=0 sample
  std::vector<std::size_t> intervals_;    //!< per segment, number of sub-intervals
  std::vector<double> cumulative_;        //!< arc length (deg) at each vertex
};

//! Signed great-circle distance (km) from a point to the border, computed as
//! the minimum haversine distance over samples spaced at most 0.005 degrees
//! apart. Positive on the treated side.
double signed_distance(LonLat point, const BorderPolyline& border);

//! Reverses vertex order when the witness lies on the right-hand side.
//! Throws StructuralError if the witness lies on the border.
void orient_by_witness(BorderPolyline& border, LonLat witness);

struct CellAssignment
{
  CellId cell_id = 0;
  std::string border_id;
  double distance_km = 0.0;
  bool treated = false;
  double along_deg = 0.0;
};

using CentroidMap = std::map<CellId, LonLat>;

//! Cells with 0 < |distance| <= max_km, in cell id order.
std::vector<CellAssignment> assign_cells(const CentroidMap& centroids, const BorderIndex& border,
                                         double max_km = 50.0);
std::vector<CellAssignment> assign_cells(const CentroidMap& centroids, const BorderPolyline& border,
                                         double max_km = 50.0);

//! Region id of a cell from a mode-aggregated categorical map.
int categorize_cell(CellId cell, const CellMap& categorical);

namespace reference {

std::vector<CellAssignment> assign_cells(const CentroidMap& centroids, const BorderPolyline& border,
                                         double max_km = 50.0);

} // namespace reference

//! Border vertex CSV (border_id, seq, lon, lat) plus metadata CSV
//! (border_id, prov_high, prov_low, rank_high, rank_low, witness_lon,
//! witness_lat). Vertices are oriented by the witness point.
std::vector<BorderPolyline> load_borders(const std::string& vertices_csv, const std::string& meta_csv);

struct BorderRecord
{
  BorderPolyline border;
  LonLat witness;
};

std::string format_border_vertices(const std::vector<BorderRecord>& borders);
std::string format_border_meta(const std::vector<BorderRecord>& borders);

} // namespace border_rdd
