#include "stella/catalogue.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace stella::catalogue {

namespace {

double wrap_longitude(double lon) {
  lon = std::fmod(lon + 180.0, 360.0);
  if (lon < 0.0) lon += 360.0;
  return lon - 180.0;
}

CraterDisc disc_from_entry(const CatalogueEntry& e, double moon_radius) {
  const Eigen::Matrix3d enu = geometry::enu_frame(e.latitude, e.longitude);
  const double radius = moon_radius + e.rim_height_offset;
  const Vector3d center = radius * enu.col(2);
  const double semi = e.diameter / 2.0;
  return geometry::make_disc(center, enu, {semi, semi}, 0.0);
}

}  // namespace

LatLonGrid::LatLonGrid(const std::vector<Vector3d>& directions, double cell_deg,
                       double polar_cap_deg)
    : cell_deg_(cell_deg), polar_cap_deg_(polar_cap_deg) {
  n_lat_ = static_cast<int>(std::ceil(180.0 / cell_deg_));
  n_lon_ = static_cast<int>(std::ceil(360.0 / cell_deg_));
  cells_.assign(static_cast<size_t>(n_lat_) * n_lon_ + 2, {});
  dirs_.reserve(directions.size());
  for (int i = 0; i < static_cast<int>(directions.size()); ++i) {
    const Vector3d u = directions[i].normalized();
    dirs_.push_back(u);
    const double lat = std::asin(std::clamp(u.z(), -1.0, 1.0)) * kRadToDeg;
    const double lon = std::atan2(u.y(), u.x()) * kRadToDeg;
    cells_[cell_of(lat, lon)].push_back(i);
  }
}

int LatLonGrid::cell_of(double lat_deg, double lon_deg) const {
  // The two trailing buckets are the polar caps.
  const int n_cells = n_lat_ * n_lon_;
  if (lat_deg >= polar_cap_deg_) return n_cells;
  if (lat_deg <= -polar_cap_deg_) return n_cells + 1;
  int row = static_cast<int>((lat_deg + 90.0) / cell_deg_);
  row = std::clamp(row, 0, n_lat_ - 1);
  int col = static_cast<int>((wrap_longitude(lon_deg) + 180.0) / cell_deg_);
  col = std::clamp(col, 0, n_lon_ - 1);
  return row * n_lon_ + col;
}

std::vector<int> LatLonGrid::query_cone(const Vector3d& u_in,
                                        double radius_rad) const {
  std::vector<int> out;
  if (dirs_.empty()) return out;
  const Vector3d u = u_in.normalized();
  const double cos_r = std::cos(std::min(radius_rad, kPi));

  const double lat0 = std::asin(std::clamp(u.z(), -1.0, 1.0)) * kRadToDeg;
  const double lon0 = std::atan2(u.y(), u.x()) * kRadToDeg;
  const double r_deg = radius_rad * kRadToDeg;

  auto scan = [&](const std::vector<int>& bucket) {
    for (int i : bucket) {
      if (dirs_[i].dot(u) >= cos_r) out.push_back(i);
    }
  };

  const double lat_lo = lat0 - r_deg - cell_deg_;
  const double lat_hi = lat0 + r_deg + cell_deg_;
  if (lat_hi >= polar_cap_deg_) scan(cells_[static_cast<size_t>(n_lat_) * n_lon_]);
  if (lat_lo <= -polar_cap_deg_) scan(cells_[static_cast<size_t>(n_lat_) * n_lon_ + 1]);

  const int row_lo = std::max(0, static_cast<int>((std::max(lat_lo, -90.0) + 90.0) / cell_deg_));
  const int row_hi = std::min(n_lat_ - 1, static_cast<int>((std::min(lat_hi, 90.0) + 90.0) / cell_deg_));
  for (int row = row_lo; row <= row_hi; ++row) {
    const double row_lat = std::max(std::abs(-90.0 + row * cell_deg_),
                                    std::abs(-90.0 + (row + 1) * cell_deg_));
    const double clat = std::cos(std::min(row_lat, 89.999) * kDegToRad);
    // Longitude span widens toward the poles; fall back to the full ring.
    double dlon = 180.0;
    if (clat > 1e-6) dlon = std::min(180.0, (r_deg + cell_deg_) / clat + cell_deg_);
    if (dlon >= 179.0) {
      for (int col = 0; col < n_lon_; ++col) scan(cells_[row * n_lon_ + col]);
      continue;
    }
    const int col0 = static_cast<int>((wrap_longitude(lon0) + 180.0) / cell_deg_);
    const int span = static_cast<int>(std::ceil(dlon / cell_deg_));
    for (int dc = -span; dc <= span; ++dc) {
      int col = (col0 + dc) % n_lon_;
      if (col < 0) col += n_lon_;
      scan(cells_[row * n_lon_ + col]);
    }
  }
  return out;
}

Catalogue::Catalogue(std::vector<CatalogueEntry> entries, double moon_radius)
    : entries_(std::move(entries)), moon_radius_(moon_radius) {
  discs_.reserve(entries_.size());
  std::vector<Vector3d> dirs;
  dirs.reserve(entries_.size());
  for (const auto& e : entries_) {
    discs_.push_back(disc_from_entry(e, moon_radius_));
    dirs.push_back(discs_.back().center_world);
  }
  index_ = LatLonGrid(dirs);
}

Catalogue load_catalogue(const std::string& path, double moon_radius,
                         double min_diameter) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open catalogue file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  // Header check on the four core columns.
  if (line.rfind("id,lat_deg,lon_deg,diameter_m", 0) != 0) {
    throw ParseError(path + ":1: unexpected header '" + line + "'");
  }

  std::vector<CatalogueEntry> entries;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    CatalogueEntry e;
    std::string field;
    auto next = [&](bool required) -> bool {
      if (!std::getline(ss, field, ',')) {
        if (required) {
          throw ParseError(path + ":" + std::to_string(line_no) +
                           ": missing field");
        }
        return false;
      }
      return true;
    };
    auto to_double = [&]() {
      try {
        size_t pos = 0;
        const double v = std::stod(field, &pos);
        if (pos != field.size()) throw std::invalid_argument(field);
        return v;
      } catch (const std::exception&) {
        throw ParseError(path + ":" + std::to_string(line_no) +
                         ": bad number '" + field + "'");
      }
    };
    next(true);
    e.id = field;
    next(true);
    e.latitude = to_double();
    next(true);
    e.longitude = to_double();
    next(true);
    e.diameter = to_double();
    if (next(false)) e.rim_height_offset = to_double();

    if (std::abs(e.latitude) > 90.0) {
      throw ValidationError(path + ":" + std::to_string(line_no) +
                            ": latitude out of range");
    }
    if (e.longitude < -180.0 || e.longitude >= 180.0) {
      throw ValidationError(path + ":" + std::to_string(line_no) +
                            ": longitude out of range");
    }
    if (!(e.diameter > 0.0)) {
      throw ValidationError(path + ":" + std::to_string(line_no) +
                            ": non-positive diameter");
    }
    if (e.diameter >= min_diameter) entries.push_back(std::move(e));
  }
  return Catalogue(std::move(entries), moon_radius);
}

void save_catalogue(const Catalogue& cat, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write catalogue file: " + path);
  out << "id,lat_deg,lon_deg,diameter_m,rim_height_m\n";
  out.precision(17);
  for (const auto& e : cat.entries()) {
    out << e.id << ',' << e.latitude << ',' << e.longitude << ','
        << e.diameter << ',' << e.rim_height_offset << '\n';
  }
}

Catalogue adjust_rim_heights(
    const Catalogue& cat,
    const std::function<double(double, double)>& height_fn) {
  std::vector<CatalogueEntry> entries = cat.entries();
  for (auto& e : entries) {
    e.rim_height_offset += height_fn(e.latitude, e.longitude);
  }
  return Catalogue(std::move(entries), cat.moon_radius());
}

Catalogue synthetic_catalogue(int n_craters, std::uint64_t seed,
                              double min_diameter, double max_diameter,
                              double moon_radius) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double log_lo = std::log(min_diameter);
  const double log_hi = std::log(max_diameter);

  std::vector<CatalogueEntry> entries;
  entries.reserve(n_craters);
  for (int i = 0; i < n_craters; ++i) {
    CatalogueEntry e;
    e.id = "SYN-" + std::to_string(i);
    // Uniform on the sphere: z uniform, longitude uniform.
    const double z = 2.0 * unit(rng) - 1.0;
    e.latitude = std::asin(std::clamp(z, -1.0, 1.0)) * kRadToDeg;
    e.longitude = wrap_longitude(360.0 * unit(rng));
    e.diameter = std::exp(log_lo + (log_hi - log_lo) * unit(rng));
    entries.push_back(std::move(e));
  }
  return Catalogue(std::move(entries), moon_radius);
}

Result<Catalogue, CatError> visibility_subcatalogue(const Catalogue& cat,
                                                    const Pose& prior,
                                                    double pos_uncertainty,
                                                    double att_uncertainty_deg,
                                                    const CameraIntrinsics& cam) {
  const double moon_r = cat.moon_radius();
  const Vector3d t = prior.position;
  const Vector3d w = prior.boresight();
  const double r = t.norm();

  // Uncertainties are componentwise box half-widths; the worst-case offset
  // inside the box is sqrt(3) times larger.
  const double pos_eff = std::sqrt(3.0) * pos_uncertainty;
  const double att_rad = std::sqrt(3.0) * att_uncertainty_deg * kDegToRad;

  const double half_fov = std::atan(cam.principal_point.norm() / cam.focal_length);

  // Candidate cap: everything above the camera horizon (from anywhere in the
  // position-uncertainty box) around the sub-camera point.
  const double horizon =
      std::acos(std::clamp(moon_r / std::max(r - pos_eff, moon_r), -1.0, 1.0));
  const double cap = horizon + pos_eff / moon_r + 0.05;
  const std::vector<int> candidates = cat.index().query_cone(t, cap);

  std::vector<CatalogueEntry> kept;
  for (int i : candidates) {
    const CraterDisc& d = cat.disc(i);
    const Vector3d rel = d.center_world - t;
    const double dist = rel.norm();
    double margin = att_rad;
    const double lateral = pos_eff + d.semi_axes.x();
    if (lateral >= dist) {
      kept.push_back(cat.entries()[i]);
      continue;
    }
    margin += std::asin(lateral / dist);
    const double angle = std::acos(std::clamp(w.dot(rel / dist), -1.0, 1.0));
    if (angle <= half_fov + margin) kept.push_back(cat.entries()[i]);
  }
  if (kept.empty()) return CatError::kEmptySubcatalogue;
  return Catalogue(std::move(kept), moon_r);
}

}  // namespace stella::catalogue
