#include "demandmap/survey.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include "demandmap/csv.hpp"
#include "demandmap/keyval.hpp"

namespace demandmap::survey {

namespace {

bool is_blank(const std::string& s) { return trim(s).empty(); }

bool is_missing_token(const std::string& s) {
  std::string v = lower(trim(s));
  return v == "na" || v == "n/a" || v == "." || v == "nan" || v == "missing";
}

int require_column(const CsvTable& table, const std::string& name, const std::string& path) {
  int idx = table.column(name);
  if (idx < 0) {
    throw SchemaError(path + ": mapped column \"" + name + "\" not found in header");
  }
  return idx;
}

}  // namespace

SurveyManifest read_survey_manifest(const std::string& path) {
  if (!std::filesystem::exists(path)) throw IoError("survey manifest not found: " + path);
  KeyVal kv = read_keyval(path);
  SurveyManifest m;
  m.country = kv_require(kv, "country", "survey manifest");
  m.households_csv = kv_require(kv, "households_csv", "survey manifest");
  m.coords_csv = kv_require(kv, "coords_csv", "survey manifest");
  m.col_cluster_id = kv_require(kv, "col.cluster_id", "survey manifest");
  m.col_has_phone = kv_require(kv, "col.has_phone", "survey manifest");
  m.col_spend = kv_require(kv, "col.spend", "survey manifest");
  m.col_household_size = kv_require(kv, "col.household_size", "survey manifest");
  m.col_lat = kv_require(kv, "col.lat", "survey manifest");
  m.col_lon = kv_require(kv, "col.lon", "survey manifest");
  if (kv.count("expected_clusters")) {
    m.expected_clusters = static_cast<int>(kv_get_int(kv, "expected_clusters", 0));
  }
  if (kv.count("bbox.min_lat")) {
    geo::BBox b;
    b.min_lat = kv_get_double(kv, "bbox.min_lat", 0);
    b.max_lat = kv_get_double(kv, "bbox.max_lat", 0);
    b.min_lon = kv_get_double(kv, "bbox.min_lon", 0);
    b.max_lon = kv_get_double(kv, "bbox.max_lon", 0);
    m.country_bbox = b;
  }
  // Resolve data paths relative to the manifest's directory.
  auto resolve = [&](std::string& p) {
    std::filesystem::path fp(p);
    if (fp.is_relative()) p = (std::filesystem::path(path).parent_path() / fp).string();
  };
  resolve(m.households_csv);
  resolve(m.coords_csv);
  // Distinct-column invariant.
  std::set<std::string> cols = {m.col_cluster_id, m.col_has_phone, m.col_spend,
                                m.col_household_size};
  if (cols.size() != 4) throw ConfigError(path + ": mapped household columns must be distinct");
  return m;
}

ParseResult parse_households(const SurveyManifest& manifest) {
  if (!std::filesystem::exists(manifest.households_csv)) {
    throw IoError("households file not found: " + manifest.households_csv);
  }
  CsvTable table = read_csv(manifest.households_csv);
  int c_id = require_column(table, manifest.col_cluster_id, manifest.households_csv);
  int c_phone = require_column(table, manifest.col_has_phone, manifest.households_csv);
  int c_spend = require_column(table, manifest.col_spend, manifest.households_csv);
  int c_size = require_column(table, manifest.col_household_size, manifest.households_csv);

  ParseResult result;
  result.rows.reserve(table.rows.size());
  size_t lineno = 1;
  for (const auto& row : table.rows) {
    ++lineno;
    auto cell = [&](int idx) -> std::string {
      return idx < static_cast<int>(row.size()) ? row[static_cast<size_t>(idx)] : std::string();
    };
    HouseholdRow h;
    h.cluster_id = trim(cell(c_id));
    if (h.cluster_id.empty()) {
      result.warnings.push_back(strf("row %zu: empty cluster id, row skipped", lineno));
      continue;
    }

    std::string phone = lower(trim(cell(c_phone)));
    if (phone == "1" || phone == "yes" || phone == "y" || phone == "true") {
      h.has_phone = TriState::yes;
    } else if (phone == "2" || phone == "0" || phone == "no" || phone == "n" || phone == "false") {
      h.has_phone = TriState::no;
    } else if (is_blank(phone) || is_missing_token(phone)) {
      h.has_phone = TriState::missing;
    } else {
      h.has_phone = TriState::missing;
      result.warnings.push_back(
          strf("row %zu: unrecognized has_phone value \"%s\"", lineno, phone.c_str()));
    }

    std::string spend = cell(c_spend);
    if (!is_blank(spend)) {
      double v;
      if (!parse_double(spend, v)) {
        result.warnings.push_back(
            strf("row %zu: unparseable spend \"%s\", treated as missing", lineno, trim(spend).c_str()));
      } else if (v < 0) {
        result.warnings.push_back(strf("row %zu: negative spend %.4f, treated as missing", lineno, v));
      } else {
        h.phone_spend = v;
      }
    }

    std::string size = cell(c_size);
    if (!is_blank(size)) {
      int64_t v;
      if (!parse_int(size, v)) {
        result.warnings.push_back(strf("row %zu: unparseable household size \"%s\", treated as missing",
                                       lineno, trim(size).c_str()));
      } else if (v <= 0) {
        result.warnings.push_back(
            strf("row %zu: non-positive household size %lld, treated as missing", lineno,
             static_cast<long long>(v)));
      } else {
        h.household_size = static_cast<int>(v);
      }
    }
    result.rows.push_back(std::move(h));
  }
  return result;
}

std::map<std::string, geo::LatLon> read_cluster_coords(const SurveyManifest& manifest) {
  if (!std::filesystem::exists(manifest.coords_csv)) {
    throw IoError("coordinates file not found: " + manifest.coords_csv);
  }
  CsvTable table = read_csv(manifest.coords_csv);
  int c_id = require_column(table, manifest.col_cluster_id, manifest.coords_csv);
  int c_lat = require_column(table, manifest.col_lat, manifest.coords_csv);
  int c_lon = require_column(table, manifest.col_lon, manifest.coords_csv);
  std::map<std::string, geo::LatLon> coords;
  for (const auto& row : table.rows) {
    std::string id = trim(row[static_cast<size_t>(c_id)]);
    double lat, lon;
    if (!parse_double(row[static_cast<size_t>(c_lat)], lat) ||
        !parse_double(row[static_cast<size_t>(c_lon)], lon)) {
      throw SchemaError(manifest.coords_csv + ": unparseable coordinates for cluster " + id);
    }
    if (lat < -90 || lat > 90 || lon < -180 || lon > 180) {
      throw DomainError(manifest.coords_csv + ": coordinates out of range for cluster " + id);
    }
    coords[id] = {lat, lon};
  }
  return coords;
}

AggregateResult aggregate_clusters(const std::vector<HouseholdRow>& rows,
                                   const std::map<std::string, geo::LatLon>& coords) {
  struct Accum {
    int yes = 0;
    int no = 0;
    double spend_sum = 0.0;  // sum of spend/household_size over rows with a size
    int spend_rows = 0;
  };
  std::map<std::string, Accum> groups;  // ordered -> deterministic output
  for (const auto& row : rows) {
    Accum& a = groups[row.cluster_id];
    if (row.has_phone == TriState::yes) ++a.yes;
    if (row.has_phone == TriState::no) ++a.no;
    if (row.household_size.has_value()) {
      double spend = row.phone_spend.value_or(0.0);
      a.spend_sum += spend / static_cast<double>(*row.household_size);
      ++a.spend_rows;
    }
  }

  std::vector<std::string> missing_coords;
  for (const auto& [id, a] : groups) {
    if (!coords.count(id)) missing_coords.push_back(id);
  }
  if (!missing_coords.empty()) {
    std::string list;
    for (size_t i = 0; i < missing_coords.size() && i < 20; ++i) {
      if (i) list += ", ";
      list += missing_coords[i];
    }
    if (missing_coords.size() > 20) list += ", ...";
    throw DataError(strf("aggregate_clusters: %zu clusters have no centroid: %s",
                         missing_coords.size(), list.c_str()));
  }

  AggregateResult result;
  for (const auto& [id, a] : groups) {
    int denom = a.yes + a.no;
    if (denom == 0) {
      result.warnings.push_back("cluster " + id + ": no definite has_phone answers, excluded");
      continue;
    }
    ClusterRecord rec;
    rec.cluster_id = id;
    rec.lat = coords.at(id).lat;
    rec.lon = coords.at(id).lon;
    rec.n_households = denom;
    rec.phone_penetration = static_cast<double>(a.yes) / static_cast<double>(denom);
    if (a.spend_rows > 0) {
      rec.spend_per_capita = a.spend_sum / static_cast<double>(a.spend_rows);
    } else {
      rec.spend_per_capita = 0.0;
      result.warnings.push_back("cluster " + id + ": no household sizes, spend per capita set to 0");
    }
    result.clusters.push_back(std::move(rec));
  }
  return result;
}

bool ValidationReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

std::string ValidationReport::to_text() const {
  std::ostringstream out;
  for (const auto& c : checks) {
    out << (c.passed ? "[ok]   " : "[FAIL] ") << c.name;
    if (!c.detail.empty()) out << ": " << c.detail;
    out << "\n";
  }
  return out.str();
}

ValidationReport validate_survey(const std::vector<ClusterRecord>& records,
                                 const SurveyManifest& manifest) {
  ValidationReport report;
  auto add = [&](const std::string& name, bool passed, const std::string& detail) {
    report.checks.push_back({name, passed, detail});
  };

  if (manifest.expected_clusters.has_value()) {
    bool ok = static_cast<int>(records.size()) == *manifest.expected_clusters;
    add("cluster_count", ok,
        strf("got %zu, expected %d", records.size(), *manifest.expected_clusters));
  } else {
    add("cluster_count", true, strf("got %zu (no expectation set)", records.size()));
  }

  std::set<std::string> seen;
  std::vector<std::string> dups;
  for (const auto& r : records) {
    if (!seen.insert(r.cluster_id).second) dups.push_back(r.cluster_id);
  }
  add("unique_cluster_ids", dups.empty(),
      dups.empty() ? "" : "duplicates: " + dups.front() + (dups.size() > 1 ? ", ..." : ""));

  std::vector<std::string> bad_metric;
  for (const auto& r : records) {
    if (r.phone_penetration < 0.0 || r.phone_penetration > 1.0 || r.spend_per_capita < 0.0 ||
        r.n_households <= 0) {
      bad_metric.push_back(r.cluster_id);
    }
  }
  add("metric_ranges", bad_metric.empty(),
      bad_metric.empty() ? "" : strf("%zu clusters out of range (first: %s)", bad_metric.size(),
                                     bad_metric.front().c_str()));

  std::vector<std::string> outliers;
  for (const auto& r : records) {
    bool valid = r.lat >= -90 && r.lat <= 90 && r.lon >= -180 && r.lon <= 180;
    if (valid && manifest.country_bbox.has_value()) {
      valid = manifest.country_bbox->contains(r.lat, r.lon);
    }
    if (!valid) outliers.push_back(r.cluster_id);
  }
  add("centroid_bounds", outliers.empty(),
      outliers.empty() ? "" : strf("%zu centroids outside bounds (first: %s)", outliers.size(),
                                   outliers.front().c_str()));
  return report;
}

void write_clusters_csv(const std::string& path, const std::vector<ClusterRecord>& records) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(records.size());
  for (const auto& r : records) {
    rows.push_back({r.cluster_id, strf("%.7f", r.lat), strf("%.7f", r.lon),
                    strf("%d", r.n_households), strf("%.8f", r.phone_penetration),
                    strf("%.8f", r.spend_per_capita)});
  }
  write_csv(path, {"cluster_id", "lat", "lon", "n_households", "phone_penetration",
                   "spend_per_capita"},
            rows);
}

std::vector<ClusterRecord> read_clusters_csv(const std::string& path) {
  CsvTable t = read_csv(path);
  int c_id = require_column(t, "cluster_id", path);
  int c_lat = require_column(t, "lat", path);
  int c_lon = require_column(t, "lon", path);
  int c_n = require_column(t, "n_households", path);
  int c_pen = require_column(t, "phone_penetration", path);
  int c_spend = require_column(t, "spend_per_capita", path);
  std::vector<ClusterRecord> records;
  for (const auto& row : t.rows) {
    ClusterRecord r;
    r.cluster_id = row[static_cast<size_t>(c_id)];
    int64_t n;
    if (!parse_double(row[static_cast<size_t>(c_lat)], r.lat) ||
        !parse_double(row[static_cast<size_t>(c_lon)], r.lon) ||
        !parse_int(row[static_cast<size_t>(c_n)], n) ||
        !parse_double(row[static_cast<size_t>(c_pen)], r.phone_penetration) ||
        !parse_double(row[static_cast<size_t>(c_spend)], r.spend_per_capita)) {
      throw SchemaError(path + ": unparseable row for cluster " + r.cluster_id);
    }
    r.n_households = static_cast<int>(n);
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace demandmap::survey
