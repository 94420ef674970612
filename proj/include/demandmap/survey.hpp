#ifndef DEMANDMAP_SURVEY_HPP_
#define DEMANDMAP_SURVEY_HPP_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "demandmap/common.hpp"
#include "demandmap/geo.hpp"

namespace demandmap::survey {

enum class TriState { yes, no, missing };

struct HouseholdRow {
  std::string cluster_id;
  TriState has_phone = TriState::missing;
  std::optional<double> phone_spend;     // currency per month, >= 0
  std::optional<int> household_size;     // positive
};

struct ClusterRecord {
  std::string cluster_id;
  double lat = 0.0;
  double lon = 0.0;
  int n_households = 0;                  // rows with a definite has_phone answer
  double phone_penetration = 0.0;        // in [0, 1]
  double spend_per_capita = 0.0;         // >= 0
};

// Column names differ between the survey files of different countries, so the
// mapping lives in a flat key=value manifest next to the data.
struct SurveyManifest {
  std::string country;
  std::string households_csv;
  std::string coords_csv;
  std::string col_cluster_id;
  std::string col_has_phone;
  std::string col_spend;
  std::string col_household_size;
  std::string col_lat;
  std::string col_lon;
  std::optional<int> expected_clusters;
  std::optional<geo::BBox> country_bbox;  // optional outlier check
};

SurveyManifest read_survey_manifest(const std::string& path);

struct ParseResult {
  std::vector<HouseholdRow> rows;
  WarningList warnings;
};

// One HouseholdRow per CSV record. Blank cells become missing silently;
// unparseable non-blank cells become missing with a row-level warning.
ParseResult parse_households(const SurveyManifest& manifest);

std::map<std::string, geo::LatLon> read_cluster_coords(const SurveyManifest& manifest);

struct AggregateResult {
  std::vector<ClusterRecord> clusters;  // ordered by cluster_id
  WarningList warnings;
};

// penetration = yes / (yes + no); spend per capita is the mean over rows of
// spend/household_size where missing spend counts as 0 and a missing
// household size excludes the row from the spend average. Clusters with no
// definite has_phone answer are dropped with a warning.
AggregateResult aggregate_clusters(const std::vector<HouseholdRow>& rows,
                                   const std::map<std::string, geo::LatLon>& coords);

struct ValidationCheck {
  std::string name;
  bool passed = true;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;

  bool all_passed() const;
  std::string to_text() const;
};

ValidationReport validate_survey(const std::vector<ClusterRecord>& records,
                                 const SurveyManifest& manifest);

void write_clusters_csv(const std::string& path, const std::vector<ClusterRecord>& records);
std::vector<ClusterRecord> read_clusters_csv(const std::string& path);

}  // namespace demandmap::survey

#endif  // DEMANDMAP_SURVEY_HPP_
