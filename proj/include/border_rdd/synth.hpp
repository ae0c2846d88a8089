#pragma once

#include "border_rdd/geometry.hpp"
#include "border_rdd/outcomes.hpp"
#include "border_rdd/rdd.hpp"
#include "border_rdd/studies.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace border_rdd {

//! Portable random stream: std::mt19937_64 (bit-exact by the standard) with
//! explicit conversions, since the standard distributions are not portable.
class Rng
{
public:
  explicit Rng(std::uint64_t seed)
    : engine_(seed)
  {}

  //! Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  //! Box-Muller, one draw per call.
  double normal();
  //! Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

private:
  std::mt19937_64 engine_;
};

//! Seeds for independent streams derived from one master seed.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t stream);

enum class BorderShape
{
  straight,
  sinusoidal
};

enum class BandOrientation
{
  latitude, //!< bands stacked north-south
  longitude
};

//! Covariates the generator can shift at the border.
extern const std::vector<std::string> kSyntheticCovariates;

struct SyntheticWorldConfig
{
  double lon_min = 110.0;
  double lon_max = 111.0;
  double lat_min = 30.0;
  double lat_max = 32.0;
  double pixel_size = 0.01;

  BorderShape border_shape = BorderShape::sinusoidal;
  double amplitude_deg = 0.1;
  double period_deg = 1.0;
  int border_count = 1;
  double border_spacing_deg = 1.0; //!< between neighbouring border centre lines

  double delta = 0.0;
  //! g(x, y) = s0 + s1 x + s2 y + s3 x^2 + s4 x y + s5 y^2 with x, y in degrees
  //! from the extent centre. Missing coefficients are zero.
  std::vector<double> surface = { 30.0 };
  //! Side-specific smooth profile in signed distance d (km): entry k is the
  //! coefficient of d^(k+1) on the control (0) and treated (1) side.
  std::array<std::vector<double>, 2> profile;
  double noise_sd = 1.0;

  //! Jumps in units of each covariate's noise sd (population: of log population).
  std::map<std::string, double> covariate_jumps;
  double covariate_noise_scale = 1.0;

  int dialect_bands = 1;
  BandOrientation dialect_orientation = BandOrientation::latitude;
  std::vector<double> dialect_effects; //!< additive lights shift per band, missing = 0

  double pop_zero_fraction = 0.0;
  int rank_high = 20;
  int rank_low = 5;
  std::uint64_t seed = 1;

  void validate() const;
  std::size_t ncols() const;
  std::size_t nrows() const;
};

struct WorldTruth
{
  double delta = 0.0;
  std::vector<double> surface;
  std::array<std::vector<double>, 2> profile;
  std::map<std::string, double> covariate_jumps;
  std::vector<double> dialect_effects;
  double noise_sd = 0.0;
  std::uint64_t seed = 0;
};

std::string format_truth(const WorldTruth& truth);

struct World
{
  LayerGrids grids;
  std::vector<BorderRecord> borders;
  WorldTruth truth;

  std::vector<BorderPolyline> polylines() const;
};

World generate_world(const SyntheticWorldConfig& config);

//! Lights value before noise and clamping at a location with signed distance d.
double world_mean_lights(const SyntheticWorldConfig& config, LonLat p, double d, int dialect_band);

//! Fishnet whose cells coincide with the world's pixels.
FishnetSpec pixel_fishnet(const SyntheticWorldConfig& config);

CellTable world_table(const World& world, const FishnetSpec& fishnet, const CellTableOptions& options = {});

//! Writes lights/elevation/precipitation/population/dist_road/dialect grids,
//! border CSVs and the truth file into `dir`.
void write_world(const std::string& dir, const World& world);

struct StudyFixtures
{
  std::vector<City> cities;
  std::vector<Prefecture> prefectures;
  std::vector<ProvinceRank> provinces;
};

//! Cities, prefectures and province ranks laid out over the world's
//! provinces (the strips between borders).
StudyFixtures generate_study_fixtures(const SyntheticWorldConfig& config, int cities_per_province = 6,
                                      int prefectures_per_province = 4);

std::string format_cities(const std::vector<City>& cities);
std::string format_prefectures(const std::vector<Prefecture>& prefectures);
std::string format_province_ranks(const std::vector<ProvinceRank>& provinces);

struct MseOracle
{
  std::vector<double> h_grid;
  std::vector<double> mse; //!< +inf where some replication could not be fitted
  double h = 0.0;
};

//! Replicated conventional estimates at every grid bandwidth; picks the grid
//! point with the smallest mean squared error against `truth_delta` (ties go
//! to the larger bandwidth).
MseOracle brute_force_mse_bandwidth(const std::vector<RddData>& replications, const RddSpec& spec,
                                    double truth_delta, const std::vector<double>& h_grid);

struct McReplicate
{
  bool ok = false;
  double beta = 0.0; //!< bias corrected
  double se_robust = 0.0;
  double p_value = 1.0;
  double h = 0.0;
  std::size_t n = 0;
};

struct McSummary
{
  std::size_t reps = 0;
  std::size_t failures = 0;
  double coverage = 0.0;       //!< share of successful reps whose 95% robust CI covers delta
  double rejection_rate = 0.0; //!< share rejecting beta = 0 at 5%
  double mean_beta = 0.0;
  double mean_h = 0.0;
  std::vector<McReplicate> replicates;
};

//! generate -> table -> estimate for seeds config.seed + 0 .. reps-1. The
//! table pools all borders. Replications run in parallel; the summary does
//! not depend on the thread count.
McSummary monte_carlo_coverage(const SyntheticWorldConfig& config, const RddSpec& spec, int reps,
                               const FishnetSpec& fishnet, const CellTableOptions& options = {});

} // namespace border_rdd
