#ifndef DEMANDMAP_GEO_HPP_
#define DEMANDMAP_GEO_HPP_

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace demandmap::geo {

// Kilometres per degree of latitude (equatorial circumference / 360).
// All km<->degree conversions use the local equirectangular approximation
// built on this constant; error stays under 0.5% for |lat| <= 70.
inline constexpr double kKmPerDegree = 111.32;

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
};

struct BBox {
  double min_lat = 0.0;
  double max_lat = 0.0;
  double min_lon = 0.0;
  double max_lon = 0.0;

  bool contains(double lat, double lon) const {
    return lat >= min_lat && lat <= max_lat && lon >= min_lon && lon <= max_lon;
  }
  double lat_span() const { return max_lat - min_lat; }
  double lon_span() const { return max_lon - min_lon; }
  LatLon center() const { return {(min_lat + max_lat) / 2, (min_lon + max_lon) / 2}; }
};

// Whole-planet box, used as the footprint of synthetic catalog scenes.
BBox world_bbox();

struct SamplePoint {
  std::string owner_id;
  int index = 0;
  double lat = 0.0;
  double lon = 0.0;
};

// Square box of side_km centred on the point. Latitude half-width is
// side/2 / 111.32; longitude half-width additionally divides by cos(lat).
// Throws DomainError for |lat| >= 89.
BBox bbox_around(double lat, double lon, double side_km = 10.0);

// n i.i.d.-uniform points inside the box, deterministic per seed.
std::vector<SamplePoint> sample_points(const BBox& box, int n, uint64_t seed,
                                       const std::string& owner_id = "");

// A ring is a closed sequence of (lat, lon) vertices; first == last is not
// required. Polygons follow even-odd semantics, so hole rings are simply
// extra rings.
using Ring = std::vector<LatLon>;

struct Polygon {
  std::vector<Ring> rings;
};

bool point_in_polygon(double lat, double lon, const Polygon& poly);
bool point_in_any(double lat, double lon, const std::vector<Polygon>& polys);
BBox polygon_bounds(const std::vector<Polygon>& polys);

// Throws GeometryError if any ring has fewer than 3 vertices or properly
// self-intersects.
void validate_polygons(const std::vector<Polygon>& polys);

struct GridCell {
  std::string cell_id;  // "<row>_<col>"
  Ring polygon;         // closed axis-aligned quad, 5 vertices
  double population = -1.0;
  // metric -> {value, lower, upper}, filled by the mapping stage
  std::map<std::string, std::array<double, 3>> predictions;

  BBox bounds() const;
};

// Axis-aligned cells tiling the boundary's bounding box from its min corner,
// kept iff the cell overlaps the boundary's interior. Cell height is fixed by
// the km->degree rule; width is evaluated at each row's own centre latitude.
std::vector<GridCell> grid_country(const std::vector<Polygon>& boundary, double cell_km = 10.0);

// Single-band grid; row 0 is the northernmost row. Pixel (r,c) centre is at
// (origin_lat + (height-1-r+0.5)*pixel_size, origin_lon + (c+0.5)*pixel_size),
// with origin at the lower-left corner as in ESRI ASCII files.
struct Raster {
  double origin_lon = 0.0;
  double origin_lat = 0.0;
  double pixel_size = 0.0;  // degrees
  int width = 0;
  int height = 0;
  double nodata = -9999.0;
  std::vector<double> values;  // row-major, size width*height

  double at(int row, int col) const { return values[static_cast<size_t>(row) * width + col]; }
  double& at(int row, int col) { return values[static_cast<size_t>(row) * width + col]; }
  double pixel_center_lat(int row) const {
    return origin_lat + (height - 1 - row + 0.5) * pixel_size;
  }
  double pixel_center_lon(int col) const { return origin_lon + (col + 0.5) * pixel_size; }
  BBox bounds() const {
    return {origin_lat, origin_lat + height * pixel_size, origin_lon,
            origin_lon + width * pixel_size};
  }
};

Raster read_ascii_grid(const std::string& path);
void write_ascii_grid(const std::string& path, const Raster& raster);

// Mean / sum of non-nodata pixels whose centres fall inside the box.
// zonal_mean throws DataError when no valid pixel lies inside; zonal_sum
// returns 0 in that case.
double zonal_mean(const Raster& raster, const BBox& box);
double zonal_sum(const Raster& raster, const BBox& box);

// Keeps cells whose zonal population sum meets the threshold and fills
// their population field.
std::vector<GridCell> filter_low_population(std::vector<GridCell> cells, const Raster& pop_raster,
                                            double threshold);

// GeoJSON (WGS84). Boundaries accept FeatureCollection / Feature / bare
// geometry with Polygon or MultiPolygon geometries.
std::vector<Polygon> read_boundary_geojson(const std::string& path);
void write_grid_geojson(const std::string& path, const std::vector<GridCell>& cells);

}  // namespace demandmap::geo

#endif  // DEMANDMAP_GEO_HPP_
