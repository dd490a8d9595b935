#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stella/geometry.hpp"

namespace stella::catalogue {

using geometry::CameraIntrinsics;
using geometry::CraterDisc;
using geometry::Pose;
using geometry::Vector3d;

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class CatError { kEmptySubcatalogue };

struct CatalogueEntry {
  std::string id;
  double latitude = 0.0;           // [deg], |lat| <= 90
  double longitude = 0.0;          // [deg], in [-180, 180)
  double diameter = 1.0;           // [m]
  double rim_height_offset = 0.0;  // [m] above the reference sphere
};

// Fixed-resolution lat/lon grid over the unit sphere with merged polar caps.
// Query pattern is "cone around a surface direction"; buckets hold indices
// into the owning catalogue.
class LatLonGrid {
 public:
  LatLonGrid() = default;
  LatLonGrid(const std::vector<Vector3d>& directions, double cell_deg = 2.0,
             double polar_cap_deg = 88.0);

  // Indices of all stored directions within `radius_rad` of unit vector `u`.
  std::vector<int> query_cone(const Vector3d& u, double radius_rad) const;

 private:
  int cell_of(double lat_deg, double lon_deg) const;

  double cell_deg_ = 2.0;
  double polar_cap_deg_ = 88.0;
  int n_lat_ = 0, n_lon_ = 0;
  std::vector<std::vector<int>> cells_;
  std::vector<Vector3d> dirs_;
};

class Catalogue {
 public:
  Catalogue() = default;
  explicit Catalogue(std::vector<CatalogueEntry> entries,
                     double moon_radius = kMoonRadiusM);

  const std::vector<CatalogueEntry>& entries() const { return entries_; }
  const std::vector<CraterDisc>& discs() const { return discs_; }
  const CraterDisc& disc(int i) const { return discs_[i]; }
  const LatLonGrid& index() const { return index_; }
  double moon_radius() const { return moon_radius_; }
  int size() const { return static_cast<int>(entries_.size()); }
  bool empty() const { return entries_.empty(); }

 private:
  std::vector<CatalogueEntry> entries_;
  std::vector<CraterDisc> discs_;
  LatLonGrid index_;
  double moon_radius_ = kMoonRadiusM;
};

// Reads the catalogue-CSV schema:
//   id,lat_deg,lon_deg,diameter_m[,rim_height_m]
// Throws ParseError (with line number) or ValidationError.
Catalogue load_catalogue(const std::string& path,
                         double moon_radius = kMoonRadiusM,
                         double min_diameter = 0.0);

void save_catalogue(const Catalogue& cat, const std::string& path);

// Returns a copy with every disc centre radially displaced by
// height_fn(lat_deg, lon_deg) and frames rebuilt.
Catalogue adjust_rim_heights(
    const Catalogue& cat,
    const std::function<double(double, double)>& height_fn);

// Random synthetic catalogue: centres uniform on the sphere, diameters
// log-uniform in [min_diameter, max_diameter] metres. Deterministic per seed.
Catalogue synthetic_catalogue(int n_craters, std::uint64_t seed,
                              double min_diameter = 2'000.0,
                              double max_diameter = 20'000.0,
                              double moon_radius = kMoonRadiusM);

// Conservative field-of-view pruning around an uncertain prior pose. Every
// crater visible at any pose within the (pos_uncertainty, att_uncertainty)
// box around `prior` is retained.
Result<Catalogue, CatError> visibility_subcatalogue(const Catalogue& cat,
                                                    const Pose& prior,
                                                    double pos_uncertainty,
                                                    double att_uncertainty_deg,
                                                    const CameraIntrinsics& cam);

}  // namespace stella::catalogue
