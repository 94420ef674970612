#include <json.hpp>

#include "demandmap/common.hpp"
#include "demandmap/geo.hpp"

namespace demandmap::geo {

namespace {

using nlohmann::json;

Ring ring_from_coords(const json& coords) {
  Ring ring;
  for (const auto& pt : coords) {
    if (!pt.is_array() || pt.size() < 2) throw SchemaError("GeoJSON ring position is not [lon,lat]");
    // GeoJSON order is [lon, lat].
    ring.push_back({pt[1].get<double>(), pt[0].get<double>()});
  }
  return ring;
}

void append_geometry(const json& geom, std::vector<Polygon>& out) {
  std::string type = geom.value("type", "");
  if (type == "Polygon") {
    Polygon poly;
    for (const auto& ring : geom.at("coordinates")) poly.rings.push_back(ring_from_coords(ring));
    out.push_back(std::move(poly));
  } else if (type == "MultiPolygon") {
    for (const auto& part : geom.at("coordinates")) {
      Polygon poly;
      for (const auto& ring : part) poly.rings.push_back(ring_from_coords(ring));
      out.push_back(std::move(poly));
    }
  } else if (type == "GeometryCollection") {
    for (const auto& g : geom.at("geometries")) append_geometry(g, out);
  } else {
    throw SchemaError("unsupported GeoJSON geometry type: " + type);
  }
}

}  // namespace

std::vector<Polygon> read_boundary_geojson(const std::string& path) {
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw SchemaError(path + ": invalid JSON: " + e.what());
  }
  std::vector<Polygon> polys;
  std::string type = doc.value("type", "");
  if (type == "FeatureCollection") {
    for (const auto& feature : doc.at("features")) {
      if (feature.contains("geometry") && !feature.at("geometry").is_null()) {
        append_geometry(feature.at("geometry"), polys);
      }
    }
  } else if (type == "Feature") {
    append_geometry(doc.at("geometry"), polys);
  } else {
    append_geometry(doc, polys);
  }
  if (polys.empty()) throw SchemaError(path + ": no polygon geometry found");
  return polys;
}

void write_grid_geojson(const std::string& path, const std::vector<GridCell>& cells) {
  json features = json::array();
  for (const auto& cell : cells) {
    json coords = json::array();
    for (const auto& v : cell.polygon) coords.push_back(json::array({v.lon, v.lat}));
    json props;
    props["cell_id"] = cell.cell_id;
    props["population"] = cell.population;
    for (const auto& [metric, triple] : cell.predictions) {
      props[metric] = triple[0];
      props[metric + "_lo"] = triple[1];
      props[metric + "_hi"] = triple[2];
    }
    features.push_back({{"type", "Feature"},
                        {"geometry", {{"type", "Polygon"}, {"coordinates", json::array({coords})}}},
                        {"properties", props}});
  }
  json doc = {{"type", "FeatureCollection"}, {"features", features}};
  write_text_file(path, doc.dump(1));
}

}  // namespace demandmap::geo
