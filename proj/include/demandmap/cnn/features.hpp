#ifndef DEMANDMAP_CNN_FEATURES_HPP_
#define DEMANDMAP_CNN_FEATURES_HPP_

#include <Eigen/Core>
#include <string>
#include <vector>

#include "demandmap/cnn/network.hpp"
#include "demandmap/png_io.hpp"

namespace demandmap::cnn {

struct FeatureVector {
  enum class Source { image, cluster_mean, cell_mean };

  std::string owner;
  Eigen::VectorXd values;
  Source source = Source::image;
};

// Evaluation-mode layer-33 outputs (pre-activation), one vector per image.
// 256-pixel tiles are centre-cropped to crop_size first. Deterministic:
// dropout is inactive and normalization uses the frozen running statistics.
std::vector<FeatureVector> extract_features(Network& net, const std::vector<const ImageBuf*>& images,
                                            const std::vector<std::string>& owners, int crop_size,
                                            int feature_layer = BackboneSpec::kFeatureLayer,
                                            int batch_size = 16);

// Element-wise mean per owner, preserving first-seen owner order.
std::vector<FeatureVector> aggregate_features(const std::vector<FeatureVector>& vectors,
                                              FeatureVector::Source source);

}  // namespace demandmap::cnn

#endif  // DEMANDMAP_CNN_FEATURES_HPP_
