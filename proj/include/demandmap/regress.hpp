#ifndef DEMANDMAP_REGRESS_HPP_
#define DEMANDMAP_REGRESS_HPP_

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "demandmap/common.hpp"
#include "demandmap/geo.hpp"
#include "demandmap/labeling.hpp"
#include "demandmap/survey.hpp"

namespace demandmap::regress {

struct RegressionDesign {
  Eigen::MatrixXd X;            // N x D, no intercept column
  Eigen::VectorXd y;            // N
  std::vector<std::string> ids; // row ids (cluster or cell ids)

  long n() const { return X.rows(); }
  long d() const { return X.cols(); }
  void validate() const;  // finiteness, N >= 2, consistent sizes
  RegressionDesign subset(const std::vector<long>& rows) const;
  std::vector<long> rows_for(const std::vector<std::string>& wanted) const;
};

// Per-column centre/scale fitted on a training design. Constant columns get
// scale 1 so standardization never divides by zero.
struct Standardization {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static Standardization fit(const Eigen::MatrixXd& X);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const;
  Eigen::VectorXd apply_row(const Eigen::VectorXd& x) const;
};

// Linear model in standardized feature space: y = w . xs + intercept.
struct RidgeModel {
  Eigen::VectorXd w;
  double intercept = 0.0;
  double lambda = 0.0;
  Standardization standardization;

  double predict(const Eigen::VectorXd& x) const;
  Eigen::VectorXd predict_many(const Eigen::MatrixXd& X) const;
  // w with the intercept appended, matching the serialized layout.
  Eigen::VectorXd weights_with_intercept() const;
};

// Penalized least squares with the intercept excluded from both the penalty
// and the standardization. Columns are standardized, then centred within the
// fitting rows so the intercept solves in closed form; the weight system
// (Xc^T Xc + lambda I) w = Xc^T yc is solved primal (D <= N) or dual (D > N).
// lambda = 0 requires full column rank and reproduces ordinary least squares.
RidgeModel ridge_fit(const RegressionDesign& design, double lambda);
RidgeModel ridge_fit_standardized(const RegressionDesign& design, double lambda,
                                  const Standardization& standardization);

std::vector<double> default_lambda_grid();  // 17 points, log-spaced 1e-3..1e5

// Squared sample Pearson correlation. Throws DataError when either side is
// constant.
double pearson_r2(const Eigen::VectorXd& observed, const Eigen::VectorXd& predicted);
// Coefficient of determination (1 - SSE/SST), shipped alongside pearson_r2
// because "R2" is reported both ways in the literature.
double r2_score(const Eigen::VectorXd& observed, const Eigen::VectorXd& predicted);
double bin_accuracy(const std::vector<int>& true_bins, const std::vector<int>& predicted_bins);

// Mean inner-fold pearson_r2 per lambda; the winner breaks ties toward the
// larger lambda. Degenerate folds (constant observations or predictions)
// score 0 with a warning.
double inner_select_lambda(const RegressionDesign& design, const labeling::FoldPlan& inner_folds,
                           const std::vector<double>& grid, WarningList* warnings = nullptr);

struct NoiseEstimate {
  double alpha_res = 0.0;  // squared residual norm of the averaged model
  double sigma = 0.0;      // sqrt(alpha_res / N)
};

struct RidgeEnsemble {
  std::vector<RidgeModel> members;  // one per outer fold
  Eigen::VectorXd mean_w;           // average member weights
  double mean_intercept = 0.0;
  Standardization standardization;  // shared by all members
  NoiseEstimate noise;
  uint64_t fold_plan_checksum = 0;
  long n_train = 0;

  double predict(const Eigen::VectorXd& x) const;
  Eigen::VectorXd predict_many(const Eigen::MatrixXd& X) const;
  // (lower, value, upper) with lower/upper = value -/+ z * sigma.
  std::array<double, 3> predict_interval(const Eigen::VectorXd& x, double z = 1.96) const;
};

// Five outer folds; each member selects its lambda by inner cross-validation
// over the other four folds, then fits on those folds with the shared
// standardization. The noise scale comes from the averaged-weight model's
// residuals over the full training design.
RidgeEnsemble fit_ensemble(const RegressionDesign& design, const labeling::FoldPlan& fold_plan,
                           const std::vector<double>& grid, WarningList* warnings = nullptr);

enum class BaselineFeature { population_density, nightlight };

// Single-feature design: the raster's zonal mean over each cluster's
// 10x10 km box. Same nested-CV ensemble machinery as the CNN features.
RegressionDesign baseline_design(const std::vector<survey::ClusterRecord>& clusters,
                                 BaselineFeature feature, const geo::Raster& raster,
                                 const std::string& metric, double box_km = 10.0);
RidgeEnsemble fit_baseline(const std::vector<survey::ClusterRecord>& clusters,
                           BaselineFeature feature, const geo::Raster& raster,
                           const std::string& metric, const labeling::FoldPlan& fold_plan,
                           const std::vector<double>& grid, WarningList* warnings = nullptr);

struct MetricReportRow {
  std::string id;
  double observed = 0.0;
  double predicted = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

struct MetricReport {
  std::string model;   // e.g. "cnn", "population_density", "nightlight"
  std::string plan;    // "random" or "spatial"
  std::string metric;
  double pearson_r2 = 0.0;
  double r2_score = 0.0;
  double bin_accuracy = 0.0;
  double sigma = 0.0;
  long n = 0;
  std::vector<MetricReportRow> rows;
};

MetricReport evaluate(const RidgeEnsemble& ensemble, const RegressionDesign& validation,
                      const labeling::BinEdges& edges, double z = 1.96);

void write_metric_report_csv(const std::string& path, const MetricReport& report);

void save_ensemble(const std::string& path, const RidgeEnsemble& ensemble);
RidgeEnsemble load_ensemble(const std::string& path);

}  // namespace demandmap::regress

#endif  // DEMANDMAP_REGRESS_HPP_
