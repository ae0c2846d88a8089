#include "border_rdd/geometry.hpp"
#include "border_rdd/csv.hpp"
#include "border_rdd/error.hpp"
#include "border_rdd/text.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace border_rdd {

namespace {

constexpr double kRad = std::numbers::pi / 180.0;
constexpr double kKmPerDeg = kEarthRadiusKm * kRad;

double
segment_length_deg(LonLat a, LonLat b)
{
  return std::hypot(b.lon - a.lon, b.lat - a.lat);
}

} // namespace

void
BorderPolyline::validate() const
{
  if (vertices.size() < 2)
    throw StructuralError("border " + border_id + ": needs at least two vertices");
  for (std::size_t i = 1; i < vertices.size(); ++i) {
    if (vertices[i].lon == vertices[i - 1].lon && vertices[i].lat == vertices[i - 1].lat)
      throw StructuralError("border " + border_id + ": consecutive duplicate vertex at position " +
                            std::to_string(i));
  }
  if (rank_high < 1 || rank_high > 30 || rank_low < 1 || rank_low > 30)
    throw StructuralError("border " + border_id + ": ranks must lie in [1, 30]");
  if (rank_high <= rank_low)
    throw StructuralError("border " + border_id + ": rank_high must exceed rank_low");
}

double
haversine_km(LonLat a, LonLat b)
{
  const double dphi = (b.lat - a.lat) * kRad;
  const double dlam = (b.lon - a.lon) * kRad;
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlam / 2.0);
  const double h = s1 * s1 + std::cos(a.lat * kRad) * std::cos(b.lat * kRad) * s2 * s2;
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(std::min(1.0, h)));
}

BorderIndex::BorderIndex(BorderPolyline border, double spacing_deg)
  : border_(std::move(border))
{
  if (border_.vertices.size() < 2)
    throw StructuralError("border " + border_.border_id + ": needs at least two vertices");
  const auto& v = border_.vertices;
  cumulative_.push_back(0.0);
  for (std::size_t s = 0; s + 1 < v.size(); ++s) {
    const double len = segment_length_deg(v[s], v[s + 1]);
    const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(len / spacing_deg)));
    first_sample_.push_back(samples_.size());
    intervals_.push_back(m);
    cumulative_.push_back(cumulative_.back() + len);
    // the t = 1 sample is the next segment's t = 0 sample
    for (std::size_t k = 0; k < m; ++k) {
      const double t = static_cast<double>(k) / static_cast<double>(m);
      const double lon = v[s].lon + (v[s + 1].lon - v[s].lon) * t;
      const double lat = v[s].lat + (v[s + 1].lat - v[s].lat) * t;
      samples_.push_back({ lon, lat, lat * kRad, std::cos(lat * kRad) });
    }
  }
  const auto& last = v.back();
  samples_.push_back({ last.lon, last.lat, last.lat * kRad, std::cos(last.lat * kRad) });
}

double
BorderIndex::sample_km(LonLat p, double p_lat_rad, double p_cos, std::size_t idx) const
{
  const Sample& s = samples_[idx];
  const double s1 = std::sin((s.lat_rad - p_lat_rad) / 2.0);
  const double s2 = std::sin((s.lon - p.lon) * kRad / 2.0);
  const double h = s1 * s1 + p_cos * s.cos_lat * s2 * s2;
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(std::min(1.0, h)));
}

double
BorderIndex::planar_segment_km(LonLat p, std::size_t seg) const
{
  return planar_segment_km(p, kKmPerDeg * std::cos(p.lat * kRad), seg);
}

double
BorderIndex::planar_segment_km(LonLat p, double kx, std::size_t seg) const
{
  const LonLat a = border_.vertices[seg];
  const LonLat b = border_.vertices[seg + 1];
  const double ax = (a.lon - p.lon) * kx, ay = (a.lat - p.lat) * kKmPerDeg;
  const double dx = (b.lon - a.lon) * kx, dy = (b.lat - a.lat) * kKmPerDeg;
  const double dd = dx * dx + dy * dy;
  double t = dd > 0.0 ? -(ax * dx + ay * dy) / dd : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(ax + t * dx, ay + t * dy);
}

BorderDistance
BorderIndex::finish(LonLat p, std::size_t best, double best_km) const
{
  const auto it = std::upper_bound(first_sample_.begin(), first_sample_.end(), best);
  std::size_t seg = static_cast<std::size_t>(it - first_sample_.begin()) - 1;
  if (seg > 0 && best == first_sample_[seg]) {
    // shared vertex: use whichever adjacent segment is nearer
    if (planar_segment_km(p, seg - 1) <= planar_segment_km(p, seg))
      --seg;
  }
  BorderDistance out;
  out.segment = seg;
  const double frac =
    static_cast<double>(best - first_sample_[seg]) / static_cast<double>(intervals_[seg]);
  out.along_deg = cumulative_[seg] + frac * (cumulative_[seg + 1] - cumulative_[seg]);
  if (best_km == 0.0) {
    out.km = 0.0;
    return out;
  }
  const LonLat a = border_.vertices[seg];
  const LonLat b = border_.vertices[seg + 1];
  const double clat = 0.5 * (a.lat + b.lat);
  const double clon = 0.5 * (a.lon + b.lon);
  const double c = std::cos(clat * kRad);
  const double ax = (a.lon - clon) * c, ay = a.lat - clat;
  const double bx = (b.lon - clon) * c, by = b.lat - clat;
  const double px = (p.lon - clon) * c, py = p.lat - clat;
  const double cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax);
  out.km = cross > 0.0 ? best_km : -best_km;
  return out;
}

BorderDistance
BorderIndex::locate_exhaustive(LonLat p) const
{
  const double plat = p.lat * kRad;
  const double pcos = std::cos(plat);
  double best_km = std::numeric_limits<double>::infinity();
  std::size_t best = 0;
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const double d = sample_km(p, plat, pcos, i);
    if (d < best_km) {
      best_km = d;
      best = i;
    }
  }
  return finish(p, best, best_km);
}

BorderDistance
BorderIndex::locate(LonLat p) const
{
  const std::size_t nseg = intervals_.size();
  thread_local std::vector<double> planar;
  planar.resize(nseg);
  const double kx_p = kKmPerDeg * std::cos(p.lat * kRad);
  double best_planar = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < nseg; ++s) {
    planar[s] = planar_segment_km(p, kx_p, s);
    best_planar = std::min(best_planar, planar[s]);
  }
  // margin for the equirectangular approximation, whose relative error grows
  // with distance, plus the sample spacing
  const double cut = best_planar * (1.02 + best_planar / 2000.0) + 0.5;

  const double plat = p.lat * kRad;
  const double pcos = std::cos(plat);
  const double kx = kKmPerDeg * pcos;
  double best_km = std::numeric_limits<double>::infinity();
  std::size_t best = 0;
  for (std::size_t s = 0; s < nseg; ++s) {
    if (planar[s] > cut)
      continue;
    const LonLat a = border_.vertices[s];
    const LonLat b = border_.vertices[s + 1];
    const double ax = (a.lon - p.lon) * kx, ay = (a.lat - p.lat) * kKmPerDeg;
    const double dx = (b.lon - a.lon) * kx, dy = (b.lat - a.lat) * kKmPerDeg;
    const double dd = dx * dx + dy * dy;
    const double ad = ax * dx + ay * dy;
    const double disc = std::max(0.0, ad * ad - dd * (ax * ax + ay * ay - cut * cut));
    const double t0 = std::clamp((-ad - std::sqrt(disc)) / dd, 0.0, 1.0);
    const double t1 = std::clamp((-ad + std::sqrt(disc)) / dd, 0.0, 1.0);
    const auto m = static_cast<std::ptrdiff_t>(intervals_[s]);
    const auto k0 = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::floor(t0 * m)) - 1);
    const auto k1 = std::min<std::ptrdiff_t>(m, static_cast<std::ptrdiff_t>(std::ceil(t1 * m)) + 1);
    for (std::ptrdiff_t k = k0; k <= k1; ++k) {
      const std::size_t idx = first_sample_[s] + static_cast<std::size_t>(k);
      const double d = sample_km(p, plat, pcos, idx);
      if (d < best_km || (d == best_km && idx < best)) {
        best_km = d;
        best = idx;
      }
    }
  }
  return finish(p, best, best_km);
}

BorderIndex::Box
BorderIndex::buffer_box(double km) const
{
  Box box{ std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
           std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity() };
  for (const auto& v : border_.vertices) {
    box.lon_min = std::min(box.lon_min, v.lon);
    box.lon_max = std::max(box.lon_max, v.lon);
    box.lat_min = std::min(box.lat_min, v.lat);
    box.lat_max = std::max(box.lat_max, v.lat);
  }
  const double dlat = km / kKmPerDeg * 1.05;
  box.lat_min -= dlat;
  box.lat_max += dlat;
  const double max_abs_lat = std::max(std::abs(box.lat_min), std::abs(box.lat_max));
  if (max_abs_lat >= 89.0) {
    box.lon_min = -std::numeric_limits<double>::infinity();
    box.lon_max = std::numeric_limits<double>::infinity();
  } else {
    const double dlon = km / (kKmPerDeg * std::cos(max_abs_lat * kRad)) * 1.05;
    box.lon_min -= dlon;
    box.lon_max += dlon;
  }
  return box;
}

double
signed_distance(LonLat point, const BorderPolyline& border)
{
  border.validate();
  return BorderIndex(border).locate(point).km;
}

void
orient_by_witness(BorderPolyline& border, LonLat witness)
{
  const double d = BorderIndex(border).locate(witness).km;
  if (d == 0.0)
    throw StructuralError("border " + border.border_id + ": witness point lies on the border");
  if (d < 0.0)
    std::reverse(border.vertices.begin(), border.vertices.end());
}

std::vector<CellAssignment>
assign_cells(const CentroidMap& centroids, const BorderIndex& border, double max_km)
{
  if (!(max_km > 0.0))
    throw DomainError("assign_cells: max_km must be positive");
  const auto box = border.buffer_box(max_km);
  std::vector<std::pair<CellId, LonLat>> candidates;
  for (const auto& [id, c] : centroids) {
    if (box.contains(c))
      candidates.emplace_back(id, c);
  }
  std::vector<BorderDistance> dist(candidates.size());
#pragma omp parallel for schedule(dynamic, 256)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(candidates.size()); ++i)
    dist[i] = border.locate(candidates[i].second);

  std::vector<CellAssignment> out;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double d = dist[i].km;
    if (d == 0.0 || std::abs(d) > max_km)
      continue;
    out.push_back({ candidates[i].first, border.border().border_id, d, d > 0.0, dist[i].along_deg });
  }
  return out;
}

std::vector<CellAssignment>
assign_cells(const CentroidMap& centroids, const BorderPolyline& border, double max_km)
{
  border.validate();
  return assign_cells(centroids, BorderIndex(border), max_km);
}

namespace reference {

std::vector<CellAssignment>
assign_cells(const CentroidMap& centroids, const BorderPolyline& border, double max_km)
{
  const BorderIndex index(border);
  std::vector<CellAssignment> out;
  for (const auto& [id, c] : centroids) {
    const auto bd = index.locate_exhaustive(c);
    if (bd.km != 0.0 && std::abs(bd.km) <= max_km)
      out.push_back({ id, border.border_id, bd.km, bd.km > 0.0, bd.along_deg });
  }
  return out;
}

} // namespace reference

int
categorize_cell(CellId cell, const CellMap& categorical)
{
  auto it = categorical.find(cell);
  if (it == categorical.end())
    throw MissingRegionError("cell " + std::to_string(cell) + " has no categorical value");
  return static_cast<int>(it->second.value);
}

std::vector<BorderPolyline>
load_borders(const std::string& vertices_csv, const std::string& meta_csv)
{
  const auto verts = CsvTable::load(vertices_csv);
  const auto meta = CsvTable::load(meta_csv);

  std::map<std::string, std::vector<std::pair<long long, LonLat>>> chains;
  const auto c_id = verts.column("border_id"), c_seq = verts.column("seq");
  const auto c_lon = verts.column("lon"), c_lat = verts.column("lat");
  for (std::size_t r = 0; r < verts.size(); ++r)
    chains[verts.cell(r, c_id)].push_back(
      { verts.integer(r, c_seq), LonLat{ verts.number(r, c_lon), verts.number(r, c_lat) } });

  const auto m_id = meta.column("border_id"), m_hi = meta.column("prov_high");
  const auto m_lo = meta.column("prov_low"), m_rh = meta.column("rank_high");
  const auto m_rl = meta.column("rank_low"), m_wx = meta.column("witness_lon");
  const auto m_wy = meta.column("witness_lat");

  std::map<std::string, BorderPolyline> borders;
  for (std::size_t r = 0; r < meta.size(); ++r) {
    BorderPolyline b;
    b.border_id = meta.cell(r, m_id);
    auto it = chains.find(b.border_id);
    if (it == chains.end())
      throw StructuralError(meta_csv + ": border '" + b.border_id + "' has no vertices");
    auto chain = it->second;
    std::sort(chain.begin(), chain.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
    for (std::size_t i = 1; i < chain.size(); ++i) {
      if (chain[i].first == chain[i - 1].first)
        throw StructuralError(vertices_csv + ": border '" + b.border_id + "' repeats seq " +
                              std::to_string(chain[i].first));
    }
    for (const auto& [seq, ll] : chain)
      b.vertices.push_back(ll);
    b.prov_high = meta.cell(r, m_hi);
    b.prov_low = meta.cell(r, m_lo);
    b.rank_high = static_cast<int>(meta.integer(r, m_rh));
    b.rank_low = static_cast<int>(meta.integer(r, m_rl));
    b.validate();
    orient_by_witness(b, LonLat{ meta.number(r, m_wx), meta.number(r, m_wy) });
    if (!borders.emplace(b.border_id, std::move(b)).second)
      throw StructuralError(meta_csv + ": duplicate border id '" + meta.cell(r, m_id) + "'");
  }
  for (const auto& [id, chain] : chains) {
    if (!borders.count(id))
      throw StructuralError(vertices_csv + ": border '" + id + "' has no metadata row");
  }
  std::vector<BorderPolyline> out;
  for (auto& [id, b] : borders)
    out.push_back(std::move(b));
  return out;
}

std::string
format_border_vertices(const std::vector<BorderRecord>& borders)
{
  CsvWriter w({ "border_id", "seq", "lon", "lat" });
  for (const auto& rec : borders) {
    for (std::size_t i = 0; i < rec.border.vertices.size(); ++i) {
      const auto& v = rec.border.vertices[i];
      w.add({ rec.border.border_id, std::to_string(i), format_number(v.lon), format_number(v.lat) });
    }
  }
  return w.str();
}

std::string
format_border_meta(const std::vector<BorderRecord>& borders)
{
  CsvWriter w({ "border_id", "prov_high", "prov_low", "rank_high", "rank_low", "witness_lon", "witness_lat" });
  for (const auto& rec : borders) {
    const auto& b = rec.border;
    w.add({ b.border_id, b.prov_high, b.prov_low, std::to_string(b.rank_high), std::to_string(b.rank_low),
            format_number(rec.witness.lon), format_number(rec.witness.lat) });
  }
  return w.str();
}

} // namespace border_rdd
