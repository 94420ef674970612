#include "demandmap/geo.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "demandmap/common.hpp"
#include "demandmap/rng.hpp"

namespace demandmap::geo {

namespace {
constexpr double kDegToRad = 3.14159265358979323846 / 180.0;
}

BBox world_bbox() { return {-90.0, 90.0, -180.0, 180.0}; }

BBox bbox_around(double lat, double lon, double side_km) {
  if (std::abs(lat) >= 89.0) {
    throw DomainError(strf("bbox_around: latitude %.4f too close to a pole", lat));
  }
  if (side_km <= 0.0) throw ArgumentError("bbox_around: side_km must be positive");
  double half_lat = side_km / 2.0 / kKmPerDegree;
  double half_lon = side_km / 2.0 / (kKmPerDegree * std::cos(lat * kDegToRad));
  return {lat - half_lat, lat + half_lat, lon - half_lon, lon + half_lon};
}

std::vector<SamplePoint> sample_points(const BBox& box, int n, uint64_t seed,
                                       const std::string& owner_id) {
  if (n < 1) throw ArgumentError("sample_points: n must be >= 1");
  Rng rng(seed);
  std::vector<SamplePoint> points;
  points.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    SamplePoint p;
    p.owner_id = owner_id;
    p.index = i;
    p.lat = rng.uniform(box.min_lat, box.max_lat);
    p.lon = rng.uniform(box.min_lon, box.max_lon);
    points.push_back(std::move(p));
  }
  return points;
}

namespace {

// Even-odd ray cast against one ring (ray toward +lon).
bool point_in_ring(double lat, double lon, const Ring& ring) {
  bool inside = false;
  size_t n = ring.size();
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    double yi = ring[i].lat, xi = ring[i].lon;
    double yj = ring[j].lat, xj = ring[j].lon;
    bool crosses = ((yi > lat) != (yj > lat)) &&
                   (lon < (xj - xi) * (lat - yi) / (yj - yi) + xi);
    if (crosses) inside = !inside;
  }
  return inside;
}

int orientation(const LatLon& a, const LatLon& b, const LatLon& c) {
  double v = (b.lon - a.lon) * (c.lat - a.lat) - (b.lat - a.lat) * (c.lon - a.lon);
  if (v > 0) return 1;
  if (v < 0) return -1;
  return 0;
}

// True when the open segments ab and cd cross at a single interior point.
bool segments_cross(const LatLon& a, const LatLon& b, const LatLon& c, const LatLon& d) {
  int o1 = orientation(a, b, c);
  int o2 = orientation(a, b, d);
  int o3 = orientation(c, d, a);
  int o4 = orientation(c, d, b);
  return o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0 && o1 != o2 && o3 != o4;
}

Ring closed_ring(const Ring& ring) {
  Ring r = ring;
  if (!r.empty() && (r.front().lat != r.back().lat || r.front().lon != r.back().lon)) {
    r.push_back(r.front());
  }
  return r;
}

bool box_intersects_polygons(const BBox& box, const std::vector<Polygon>& polys) {
  LatLon corners[4] = {{box.min_lat, box.min_lon},
                       {box.min_lat, box.max_lon},
                       {box.max_lat, box.max_lon},
                       {box.max_lat, box.min_lon}};
  for (const auto& c : corners) {
    if (point_in_any(c.lat, c.lon, polys)) return true;
  }
  LatLon center{(box.min_lat + box.max_lat) / 2, (box.min_lon + box.max_lon) / 2};
  if (point_in_any(center.lat, center.lon, polys)) return true;
  for (const auto& poly : polys) {
    for (const auto& ring : poly.rings) {
      for (const auto& v : ring) {
        if (v.lat > box.min_lat && v.lat < box.max_lat && v.lon > box.min_lon &&
            v.lon < box.max_lon) {
          return true;
        }
      }
      Ring closed = closed_ring(ring);
      for (size_t i = 0; i + 1 < closed.size(); ++i) {
        for (int e = 0; e < 4; ++e) {
          if (segments_cross(closed[i], closed[i + 1], corners[e], corners[(e + 1) % 4])) {
            return true;
          }
        }
      }
    }
  }
  return false;
}

}  // namespace

bool point_in_polygon(double lat, double lon, const Polygon& poly) {
  bool inside = false;
  for (const auto& ring : poly.rings) {
    if (point_in_ring(lat, lon, ring)) inside = !inside;
  }
  return inside;
}

bool point_in_any(double lat, double lon, const std::vector<Polygon>& polys) {
  for (const auto& p : polys) {
    if (point_in_polygon(lat, lon, p)) return true;
  }
  return false;
}

BBox polygon_bounds(const std::vector<Polygon>& polys) {
  BBox b{90.0, -90.0, 180.0, -180.0};
  for (const auto& poly : polys) {
    for (const auto& ring : poly.rings) {
      for (const auto& v : ring) {
        b.min_lat = std::min(b.min_lat, v.lat);
        b.max_lat = std::max(b.max_lat, v.lat);
        b.min_lon = std::min(b.min_lon, v.lon);
        b.max_lon = std::max(b.max_lon, v.lon);
      }
    }
  }
  return b;
}

void validate_polygons(const std::vector<Polygon>& polys) {
  for (const auto& poly : polys) {
    for (const auto& ring : poly.rings) {
      Ring closed = closed_ring(ring);
      if (closed.size() < 4) {
        throw GeometryError("ring with fewer than 3 distinct vertices");
      }
      size_t n = closed.size() - 1;  // segment count
      for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 2; j < n; ++j) {
          if (i == 0 && j == n - 1) continue;  // adjacent through the closure
          if (segments_cross(closed[i], closed[i + 1], closed[j], closed[j + 1])) {
            throw GeometryError(strf("self-intersecting ring (segments %zu and %zu)", i, j));
          }
        }
      }
    }
  }
}

BBox GridCell::bounds() const {
  BBox b{90.0, -90.0, 180.0, -180.0};
  for (const auto& v : polygon) {
    b.min_lat = std::min(b.min_lat, v.lat);
    b.max_lat = std::max(b.max_lat, v.lat);
    b.min_lon = std::min(b.min_lon, v.lon);
    b.max_lon = std::max(b.max_lon, v.lon);
  }
  return b;
}

std::vector<GridCell> grid_country(const std::vector<Polygon>& boundary, double cell_km) {
  if (boundary.empty()) throw ArgumentError("grid_country: empty boundary");
  if (cell_km <= 0.0) throw ArgumentError("grid_country: cell_km must be positive");
  validate_polygons(boundary);

  BBox bounds = polygon_bounds(boundary);
  double dlat = cell_km / kKmPerDegree;
  // The -1e-9 slack keeps an exact multiple from emitting a zero-area row.
  int rows = static_cast<int>(std::ceil(bounds.lat_span() / dlat - 1e-9));
  std::vector<GridCell> cells;
  for (int r = 0; r < rows; ++r) {
    double lat0 = bounds.min_lat + r * dlat;
    double lat1 = lat0 + dlat;
    double center_lat = lat0 + dlat / 2;
    double dlon = cell_km / (kKmPerDegree * std::cos(center_lat * kDegToRad));
    int cols = static_cast<int>(std::ceil(bounds.lon_span() / dlon - 1e-9));
    for (int c = 0; c < cols; ++c) {
      double lon0 = bounds.min_lon + c * dlon;
      double lon1 = lon0 + dlon;
      BBox cell_box{lat0, lat1, lon0, lon1};
      if (!box_intersects_polygons(cell_box, boundary)) continue;
      GridCell cell;
      cell.cell_id = strf("%d_%d", r, c);
      cell.polygon = {{lat0, lon0}, {lat0, lon1}, {lat1, lon1}, {lat1, lon0}, {lat0, lon0}};
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

Raster read_ascii_grid(const std::string& path) {
  std::istringstream in(read_text_file(path));
  Raster r;
  std::string key;
  double xll = 0, yll = 0;
  int ncols = -1, nrows = -1;
  bool have_cell = false;
  // Header: ncols nrows xllcorner yllcorner cellsize [NODATA_value]
  for (;;) {
    std::streampos pos = in.tellg();
    if (!(in >> key)) throw SchemaError(path + ": truncated ASCII grid header");
    std::string k = lower(key);
    if (k == "ncols") {
      in >> ncols;
    } else if (k == "nrows") {
      in >> nrows;
    } else if (k == "xllcorner") {
      in >> xll;
    } else if (k == "yllcorner") {
      in >> yll;
    } else if (k == "cellsize") {
      in >> r.pixel_size;
      have_cell = true;
    } else if (k == "nodata_value") {
      in >> r.nodata;
    } else {
      in.seekg(pos);
      break;
    }
    if (!in) throw SchemaError(path + ": malformed ASCII grid header near " + key);
  }
  if (ncols <= 0 || nrows <= 0 || !have_cell) {
    throw SchemaError(path + ": ASCII grid header incomplete");
  }
  r.width = ncols;
  r.height = nrows;
  r.origin_lon = xll;
  r.origin_lat = yll;
  r.values.resize(static_cast<size_t>(ncols) * nrows);
  for (auto& v : r.values) {
    if (!(in >> v)) throw SchemaError(path + ": ASCII grid has fewer values than ncols*nrows");
  }
  return r;
}

void write_ascii_grid(const std::string& path, const Raster& raster) {
  if (raster.values.size() != static_cast<size_t>(raster.width) * raster.height) {
    throw ArgumentError("raster value count does not match width*height");
  }
  std::ostringstream out;
  out << "ncols " << raster.width << "\n";
  out << "nrows " << raster.height << "\n";
  out << strf("xllcorner %.10f\n", raster.origin_lon);
  out << strf("yllcorner %.10f\n", raster.origin_lat);
  out << strf("cellsize %.12f\n", raster.pixel_size);
  out << strf("NODATA_value %.6f\n", raster.nodata);
  for (int row = 0; row < raster.height; ++row) {
    for (int col = 0; col < raster.width; ++col) {
      if (col) out << ' ';
      out << strf("%.10g", raster.at(row, col));
    }
    out << "\n";
  }
  write_text_file(path, out.str());
}

namespace {

template <typename Fn>
void for_pixels_in_box(const Raster& raster, const BBox& box, Fn&& fn) {
  if (raster.pixel_size <= 0.0) throw ArgumentError("raster pixel size must be positive");
  int col_lo = std::max(0, static_cast<int>(std::floor((box.min_lon - raster.origin_lon) /
                                                       raster.pixel_size)) - 1);
  int col_hi = std::min(raster.width - 1,
                        static_cast<int>(std::ceil((box.max_lon - raster.origin_lon) /
                                                   raster.pixel_size)) + 1);
  int row_from_lat_hi = static_cast<int>(std::floor((box.max_lat - raster.origin_lat) /
                                                    raster.pixel_size)) + 1;
  int row_from_lat_lo = static_cast<int>(std::floor((box.min_lat - raster.origin_lat) /
                                                    raster.pixel_size)) - 1;
  int row_lo = std::max(0, raster.height - 1 - row_from_lat_hi);
  int row_hi = std::min(raster.height - 1, raster.height - 1 - row_from_lat_lo);
  for (int row = row_lo; row <= row_hi; ++row) {
    double lat = raster.pixel_center_lat(row);
    if (lat < box.min_lat || lat > box.max_lat) continue;
    for (int col = col_lo; col <= col_hi; ++col) {
      double lon = raster.pixel_center_lon(col);
      if (lon < box.min_lon || lon > box.max_lon) continue;
      fn(row, col, raster.at(row, col));
    }
  }
}

}  // namespace

double zonal_mean(const Raster& raster, const BBox& box) {
  double sum = 0.0;
  long count = 0;
  for_pixels_in_box(raster, box, [&](int, int, double v) {
    if (v == raster.nodata) return;
    sum += v;
    ++count;
  });
  if (count == 0) {
    throw DataError(strf("zonal_mean: no valid pixels inside box [%.5f,%.5f]x[%.5f,%.5f]",
                         box.min_lat, box.max_lat, box.min_lon, box.max_lon));
  }
  return sum / static_cast<double>(count);
}

double zonal_sum(const Raster& raster, const BBox& box) {
  double sum = 0.0;
  for_pixels_in_box(raster, box, [&](int, int, double v) {
    if (v == raster.nodata) return;
    sum += v;
  });
  return sum;
}

std::vector<GridCell> filter_low_population(std::vector<GridCell> cells, const Raster& pop_raster,
                                            double threshold) {
  if (threshold < 0.0) throw ArgumentError("filter_low_population: threshold must be >= 0");
  std::vector<GridCell> kept;
  kept.reserve(cells.size());
  for (auto& cell : cells) {
    double pop = zonal_sum(pop_raster, cell.bounds());
    if (pop >= threshold) {
      cell.population = pop;
      kept.push_back(std::move(cell));
    }
  }
  return kept;
}

}  // namespace demandmap::geo
