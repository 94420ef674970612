#include "demandmap/cnn/features.hpp"

#include <map>

#include "demandmap/cnn/train.hpp"

namespace demandmap::cnn {

std::vector<FeatureVector> extract_features(Network& net, const std::vector<const ImageBuf*>& images,
                                            const std::vector<std::string>& owners, int crop_size,
                                            int feature_layer, int batch_size) {
  if (images.size() != owners.size()) {
    throw ArgumentError("extract_features: one owner per image required");
  }
  std::vector<FeatureVector> out;
  out.reserve(images.size());
  for (size_t start = 0; start < images.size(); start += static_cast<size_t>(batch_size)) {
    size_t n = std::min(static_cast<size_t>(batch_size), images.size() - start);
    Tensor batch({static_cast<long>(n), 3, crop_size, crop_size});
    for (size_t b = 0; b < n; ++b) {
      const ImageBuf& img = *images[start + b];
      if (img.channels != 3) throw ArgumentError("extract_features: images must be RGB");
      standardize_into(batch, static_cast<long>(b), center_crop(img, crop_size));
    }
    Tensor features = net.forward(batch, /*training=*/false, feature_layer);
    long dim = features.dim(1);
    for (size_t b = 0; b < n; ++b) {
      FeatureVector fv;
      fv.owner = owners[start + b];
      fv.source = FeatureVector::Source::image;
      fv.values = features.as_matrix(static_cast<long>(n), dim).row(static_cast<long>(b));
      out.push_back(std::move(fv));
    }
  }
  return out;
}

std::vector<FeatureVector> aggregate_features(const std::vector<FeatureVector>& vectors,
                                              FeatureVector::Source source) {
  if (vectors.empty()) throw ArgumentError("aggregate_features: empty input");
  std::vector<std::string> order;
  std::map<std::string, std::pair<Eigen::VectorXd, long>> groups;
  for (const auto& fv : vectors) {
    auto it = groups.find(fv.owner);
    if (it == groups.end()) {
      order.push_back(fv.owner);
      groups[fv.owner] = {fv.values, 1};
    } else {
      if (it->second.first.size() != fv.values.size()) {
        throw ArgumentError("aggregate_features: mixed vector lengths for owner " + fv.owner);
      }
      it->second.first += fv.values;
      ++it->second.second;
    }
  }
  std::vector<FeatureVector> out;
  out.reserve(order.size());
  for (const auto& owner : order) {
    auto& [sum, count] = groups[owner];
    FeatureVector fv;
    fv.owner = owner;
    fv.source = source;
    fv.values = sum / static_cast<double>(count);
    out.push_back(std::move(fv));
  }
  return out;
}

}  // namespace demandmap::cnn
