#include "demandmap/regress.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <json.hpp>

#include "demandmap/csv.hpp"

namespace demandmap::regress {

void RegressionDesign::validate() const {
  if (X.rows() != y.size() || static_cast<size_t>(X.rows()) != ids.size()) {
    throw ArgumentError("regression design: inconsistent row counts");
  }
  if (X.rows() < 2) throw ArgumentError("regression design: need at least 2 rows");
  if (!X.allFinite() || !y.allFinite()) {
    throw NumericError("regression design: non-finite entries");
  }
}

RegressionDesign RegressionDesign::subset(const std::vector<long>& rows) const {
  RegressionDesign out;
  out.X.resize(static_cast<long>(rows.size()), X.cols());
  out.y.resize(static_cast<long>(rows.size()));
  out.ids.reserve(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    out.X.row(static_cast<long>(i)) = X.row(rows[i]);
    out.y(static_cast<long>(i)) = y(rows[i]);
    out.ids.push_back(ids[static_cast<size_t>(rows[i])]);
  }
  return out;
}

std::vector<long> RegressionDesign::rows_for(const std::vector<std::string>& wanted) const {
  std::map<std::string, long> index;
  for (size_t i = 0; i < ids.size(); ++i) index[ids[i]] = static_cast<long>(i);
  std::vector<long> rows;
  rows.reserve(wanted.size());
  for (const auto& id : wanted) {
    auto it = index.find(id);
    if (it == index.end()) throw ArgumentError("design has no row for id " + id);
    rows.push_back(it->second);
  }
  return rows;
}

Standardization Standardization::fit(const Eigen::MatrixXd& X) {
  Standardization s;
  s.mean = X.colwise().mean();
  Eigen::MatrixXd centered = X.rowwise() - s.mean.transpose();
  s.scale = (centered.array().square().colwise().mean()).sqrt();
  for (long j = 0; j < s.scale.size(); ++j) {
    if (s.scale(j) < 1e-12) s.scale(j) = 1.0;
  }
  return s;
}

Eigen::MatrixXd Standardization::apply(const Eigen::MatrixXd& X) const {
  return (X.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

Eigen::VectorXd Standardization::apply_row(const Eigen::VectorXd& x) const {
  return (x - mean).cwiseQuotient(scale);
}

double RidgeModel::predict(const Eigen::VectorXd& x) const {
  if (x.size() != w.size()) {
    throw ArgumentError(strf("ridge predict: feature length %ld, model expects %ld",
                             static_cast<long>(x.size()), static_cast<long>(w.size())));
  }
  return standardization.apply_row(x).dot(w) + intercept;
}

Eigen::VectorXd RidgeModel::predict_many(const Eigen::MatrixXd& X) const {
  if (X.cols() != w.size()) {
    throw ArgumentError(strf("ridge predict: feature length %ld, model expects %ld",
                             static_cast<long>(X.cols()), static_cast<long>(w.size())));
  }
  return (standardization.apply(X) * w).array() + intercept;
}

Eigen::VectorXd RidgeModel::weights_with_intercept() const {
  Eigen::VectorXd out(w.size() + 1);
  out.head(w.size()) = w;
  out(w.size()) = intercept;
  return out;
}

RidgeModel ridge_fit_standardized(const RegressionDesign& design, double lambda,
                                  const Standardization& standardization) {
  design.validate();
  if (lambda < 0.0) throw ArgumentError("ridge_fit: lambda must be >= 0");
  const long n = design.n();
  const long d = design.d();

  Eigen::MatrixXd Xs = standardization.apply(design.X);
  // Profile out the intercept: centre within the fitting rows.
  Eigen::RowVectorXd col_mean = Xs.colwise().mean();
  Eigen::MatrixXd Xc = Xs.rowwise() - col_mean;
  double y_mean = design.y.mean();
  Eigen::VectorXd yc = design.y.array() - y_mean;

  Eigen::VectorXd w;
  if (lambda == 0.0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xc);
    if (qr.rank() < d) {
      throw NumericError(
          strf("ridge_fit: rank-deficient design (rank %ld of %ld) with lambda = 0; "
               "use lambda > 0",
               static_cast<long>(qr.rank()), d));
    }
    w = qr.solve(yc);
  } else if (d <= n) {
    Eigen::MatrixXd gram = Xc.transpose() * Xc;
    gram.diagonal().array() += lambda;
    w = Eigen::LDLT<Eigen::MatrixXd>(gram).solve(Xc.transpose() * yc);
  } else {
    // Dual form: w = Xc^T (Xc Xc^T + lambda I)^-1 yc, identical to the primal
    // solution but solved in N x N space.
    Eigen::MatrixXd gram = Xc * Xc.transpose();
    gram.diagonal().array() += lambda;
    w = Xc.transpose() * Eigen::LDLT<Eigen::MatrixXd>(gram).solve(yc);
  }

  RidgeModel model;
  model.w = w;
  model.lambda = lambda;
  model.standardization = standardization;
  model.intercept = y_mean - col_mean.transpose().dot(w);
  if (!model.w.allFinite() || !std::isfinite(model.intercept)) {
    throw NumericError("ridge_fit: non-finite solution");
  }
  return model;
}

RidgeModel ridge_fit(const RegressionDesign& design, double lambda) {
  design.validate();
  return ridge_fit_standardized(design, lambda, Standardization::fit(design.X));
}

std::vector<double> default_lambda_grid() {
  std::vector<double> grid;
  for (int i = 0; i < 17; ++i) {
    grid.push_back(std::pow(10.0, -3.0 + 0.5 * i));
  }
  return grid;
}

double pearson_r2(const Eigen::VectorXd& observed, const Eigen::VectorXd& predicted) {
  if (observed.size() != predicted.size()) throw ArgumentError("pearson_r2: length mismatch");
  if (observed.size() < 2) throw ArgumentError("pearson_r2: need at least 2 points");
  Eigen::VectorXd a = observed.array() - observed.mean();
  Eigen::VectorXd b = predicted.array() - predicted.mean();
  double va = a.squaredNorm();
  double vb = b.squaredNorm();
  if (va <= 0.0 || vb <= 0.0) {
    throw DataError("pearson_r2: correlation undefined for a constant series");
  }
  double r = a.dot(b) / std::sqrt(va * vb);
  return r * r;
}

double r2_score(const Eigen::VectorXd& observed, const Eigen::VectorXd& predicted) {
  if (observed.size() != predicted.size()) throw ArgumentError("r2_score: length mismatch");
  double sst = (observed.array() - observed.mean()).square().sum();
  if (sst <= 0.0) throw DataError("r2_score: undefined for constant observations");
  double sse = (observed - predicted).squaredNorm();
  return 1.0 - sse / sst;
}

double bin_accuracy(const std::vector<int>& true_bins, const std::vector<int>& predicted_bins) {
  if (true_bins.size() != predicted_bins.size()) throw ArgumentError("bin_accuracy: length mismatch");
  if (true_bins.empty()) return 0.0;
  size_t hits = 0;
  for (size_t i = 0; i < true_bins.size(); ++i) {
    if (true_bins[i] == predicted_bins[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(true_bins.size());
}

double inner_select_lambda(const RegressionDesign& design, const labeling::FoldPlan& inner_folds,
                           const std::vector<double>& grid, WarningList* warnings) {
  if (grid.empty()) throw ArgumentError("inner_select_lambda: empty lambda grid");
  design.validate();

  const int k = inner_folds.k();
  std::vector<std::vector<long>> held(static_cast<size_t>(k)), kept(static_cast<size_t>(k));
  for (int f = 0; f < k; ++f) {
    held[static_cast<size_t>(f)] = design.rows_for(inner_folds.folds[static_cast<size_t>(f)]);
    std::vector<std::string> others;
    for (int g = 0; g < k; ++g) {
      if (g == f) continue;
      const auto& fold = inner_folds.folds[static_cast<size_t>(g)];
      others.insert(others.end(), fold.begin(), fold.end());
    }
    kept[static_cast<size_t>(f)] = design.rows_for(others);
  }

  double best_lambda = grid.front();
  double best_score = -1.0;
  std::vector<double> sorted_grid = grid;
  std::sort(sorted_grid.begin(), sorted_grid.end());
  for (double lambda : sorted_grid) {
    double sum = 0.0;
    for (int f = 0; f < k; ++f) {
      RegressionDesign train = design.subset(kept[static_cast<size_t>(f)]);
      RegressionDesign val = design.subset(held[static_cast<size_t>(f)]);
      RidgeModel model = ridge_fit(train, lambda);
      Eigen::VectorXd pred = model.predict_many(val.X);
      double score = 0.0;
      try {
        score = pearson_r2(val.y, pred);
      } catch (const DataError&) {
        if (warnings) {
          warnings->push_back(strf("inner fold %d: degenerate fold at lambda %.4g, scored 0", f,
                                   lambda));
        }
      }
      sum += score;
    }
    double mean_score = sum / static_cast<double>(k);
    if (mean_score >= best_score) {  // ties resolve toward the larger lambda
      best_score = mean_score;
      best_lambda = lambda;
    }
  }
  return best_lambda;
}

double RidgeEnsemble::predict(const Eigen::VectorXd& x) const {
  if (members.empty()) throw ArgumentError("ensemble has no members");
  double sum = 0.0;
  for (const auto& m : members) sum += m.predict(x);
  return sum / static_cast<double>(members.size());
}

Eigen::VectorXd RidgeEnsemble::predict_many(const Eigen::MatrixXd& X) const {
  if (members.empty()) throw ArgumentError("ensemble has no members");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(X.rows());
  for (const auto& m : members) sum += m.predict_many(X);
  return sum / static_cast<double>(members.size());
}

std::array<double, 3> RidgeEnsemble::predict_interval(const Eigen::VectorXd& x, double z) const {
  double value = predict(x);
  return {value - z * noise.sigma, value, value + z * noise.sigma};
}

RidgeEnsemble fit_ensemble(const RegressionDesign& design, const labeling::FoldPlan& fold_plan,
                           const std::vector<double>& grid, WarningList* warnings) {
  design.validate();
  const int k = fold_plan.k();
  if (k < 2) throw ArgumentError("fit_ensemble: fold plan needs at least 2 folds");

  RidgeEnsemble ensemble;
  ensemble.standardization = Standardization::fit(design.X);
  ensemble.fold_plan_checksum = fold_plan.checksum();
  ensemble.n_train = design.n();

  for (int held = 0; held < k; ++held) {
    // Inner folds are the remaining k-1 outer folds.
    labeling::FoldPlan inner;
    inner.mode = fold_plan.mode;
    inner.seed = fold_plan.seed;
    std::vector<std::string> train_ids;
    for (int g = 0; g < k; ++g) {
      if (g == held) continue;
      inner.folds.push_back(fold_plan.folds[static_cast<size_t>(g)]);
      const auto& fold = fold_plan.folds[static_cast<size_t>(g)];
      train_ids.insert(train_ids.end(), fold.begin(), fold.end());
    }
    RegressionDesign member_design = design.subset(design.rows_for(train_ids));
    double lambda = inner_select_lambda(member_design, inner, grid, warnings);
    ensemble.members.push_back(
        ridge_fit_standardized(member_design, lambda, ensemble.standardization));
  }

  const long d = design.d();
  ensemble.mean_w = Eigen::VectorXd::Zero(d);
  ensemble.mean_intercept = 0.0;
  for (const auto& m : ensemble.members) {
    ensemble.mean_w += m.w;
    ensemble.mean_intercept += m.intercept;
  }
  ensemble.mean_w /= static_cast<double>(ensemble.members.size());
  ensemble.mean_intercept /= static_cast<double>(ensemble.members.size());

  // Noise from the averaged-weight model over the full training design.
  Eigen::VectorXd fitted =
      (ensemble.standardization.apply(design.X) * ensemble.mean_w).array() +
      ensemble.mean_intercept;
  ensemble.noise.alpha_res = (design.y - fitted).squaredNorm();
  ensemble.noise.sigma = std::sqrt(ensemble.noise.alpha_res / static_cast<double>(design.n()));
  return ensemble;
}

RegressionDesign baseline_design(const std::vector<survey::ClusterRecord>& clusters,
                                 BaselineFeature feature, const geo::Raster& raster,
                                 const std::string& metric, double box_km) {
  RegressionDesign design;
  design.X.resize(static_cast<long>(clusters.size()), 1);
  design.y.resize(static_cast<long>(clusters.size()));
  for (size_t i = 0; i < clusters.size(); ++i) {
    const auto& c = clusters[i];
    geo::BBox box = geo::bbox_around(c.lat, c.lon, box_km);
    design.X(static_cast<long>(i), 0) = geo::zonal_mean(raster, box);
    design.y(static_cast<long>(i)) =
        metric == "penetration" ? c.phone_penetration : c.spend_per_capita;
    design.ids.push_back(c.cluster_id);
  }
  (void)feature;  // both baselines share the zonal-mean design
  return design;
}

RidgeEnsemble fit_baseline(const std::vector<survey::ClusterRecord>& clusters,
                           BaselineFeature feature, const geo::Raster& raster,
                           const std::string& metric, const labeling::FoldPlan& fold_plan,
                           const std::vector<double>& grid, WarningList* warnings) {
  RegressionDesign design = baseline_design(clusters, feature, raster, metric);
  return fit_ensemble(design, fold_plan, grid, warnings);
}

MetricReport evaluate(const RidgeEnsemble& ensemble, const RegressionDesign& validation,
                      const labeling::BinEdges& edges, double z) {
  validation.validate();
  MetricReport report;
  Eigen::VectorXd pred = ensemble.predict_many(validation.X);
  report.n = validation.n();
  report.sigma = ensemble.noise.sigma;
  report.pearson_r2 = pearson_r2(validation.y, pred);
  report.r2_score = r2_score(validation.y, pred);
  std::vector<int> obs_bins, pred_bins;
  for (long i = 0; i < validation.n(); ++i) {
    obs_bins.push_back(labeling::assign_bin(validation.y(i), edges).bin);
    pred_bins.push_back(labeling::assign_bin(pred(i), edges).bin);
    MetricReportRow row;
    row.id = validation.ids[static_cast<size_t>(i)];
    row.observed = validation.y(i);
    row.predicted = pred(i);
    row.lower = pred(i) - z * ensemble.noise.sigma;
    row.upper = pred(i) + z * ensemble.noise.sigma;
    report.rows.push_back(std::move(row));
  }
  report.bin_accuracy = bin_accuracy(obs_bins, pred_bins);
  return report;
}

void write_metric_report_csv(const std::string& path, const MetricReport& report) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : report.rows) {
    rows.push_back({r.id, strf("%.10g", r.observed), strf("%.10g", r.predicted),
                    strf("%.10g", r.lower), strf("%.10g", r.upper)});
  }
  std::vector<std::string> comments = {
      strf("model=%s plan=%s metric=%s", report.model.c_str(), report.plan.c_str(),
           report.metric.c_str()),
      strf("pearson_r2=%.10g", report.pearson_r2),
      strf("r2_score=%.10g", report.r2_score),
      strf("bin_accuracy=%.10g", report.bin_accuracy),
      strf("sigma=%.10g", report.sigma),
      strf("n=%ld", report.n),
  };
  write_csv(path, {"id", "observed", "predicted", "lower", "upper"}, rows, comments);
}

namespace {

using nlohmann::json;

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (long i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Eigen::VectorXd vector_from_json(const json& arr) {
  Eigen::VectorXd v(arr.size());
  for (size_t i = 0; i < arr.size(); ++i) v(static_cast<long>(i)) = arr[i].get<double>();
  return v;
}

}  // namespace

void save_ensemble(const std::string& path, const RidgeEnsemble& ensemble) {
  json doc;
  doc["format_version"] = 1;
  doc["standardization"] = {{"mean", vector_to_json(ensemble.standardization.mean)},
                            {"scale", vector_to_json(ensemble.standardization.scale)}};
  json members = json::array();
  for (const auto& m : ensemble.members) {
    members.push_back({{"w", vector_to_json(m.w)}, {"intercept", m.intercept}, {"lambda", m.lambda}});
  }
  doc["members"] = members;
  doc["mean_w"] = vector_to_json(ensemble.mean_w);
  doc["mean_intercept"] = ensemble.mean_intercept;
  doc["noise"] = {{"alpha_res", ensemble.noise.alpha_res}, {"sigma", ensemble.noise.sigma}};
  doc["fold_plan_checksum"] = ensemble.fold_plan_checksum;
  doc["n_train"] = ensemble.n_train;
  write_text_file(path, doc.dump(1));
}

RidgeEnsemble load_ensemble(const std::string& path) {
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw SchemaError(path + ": invalid ensemble JSON: " + e.what());
  }
  if (doc.value("format_version", 0) != 1) {
    throw SchemaError(path + ": unsupported ensemble format version");
  }
  RidgeEnsemble ensemble;
  ensemble.standardization.mean = vector_from_json(doc.at("standardization").at("mean"));
  ensemble.standardization.scale = vector_from_json(doc.at("standardization").at("scale"));
  for (const auto& m : doc.at("members")) {
    RidgeModel model;
    model.w = vector_from_json(m.at("w"));
    model.intercept = m.at("intercept").get<double>();
    model.lambda = m.at("lambda").get<double>();
    model.standardization = ensemble.standardization;
    ensemble.members.push_back(std::move(model));
  }
  ensemble.mean_w = vector_from_json(doc.at("mean_w"));
  ensemble.mean_intercept = doc.at("mean_intercept").get<double>();
  ensemble.noise.alpha_res = doc.at("noise").at("alpha_res").get<double>();
  ensemble.noise.sigma = doc.at("noise").at("sigma").get<double>();
  ensemble.fold_plan_checksum = doc.at("fold_plan_checksum").get<uint64_t>();
  ensemble.n_train = doc.at("n_train").get<long>();
  return ensemble;
}

}  // namespace demandmap::regress
