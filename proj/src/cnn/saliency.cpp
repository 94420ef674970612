#include "demandmap/cnn/saliency.hpp"

#include <algorithm>
#include <cmath>

#include "demandmap/cnn/train.hpp"

namespace demandmap::cnn {

Tensor input_gradient(Network& net, const Tensor& input, int target_class, SaliencyMode mode) {
  if (input.shape().size() != 4 || input.dim(0) != 1) {
    throw ArgumentError("input_gradient expects a single (1,C,H,W) sample");
  }
  Tensor logits = net.forward(input, /*training=*/false);
  long classes = logits.dim(1);
  if (target_class < 0 || target_class >= classes) {
    throw ArgumentError(strf("target class %d out of range [0,%ld)", target_class, classes));
  }
  Tensor dlogits({1, classes});
  dlogits[target_class] = 1.0;
  net.set_guided_relu(mode == SaliencyMode::guided);
  net.zero_grads();  // parameter gradients from this pass are discarded
  Tensor grad = net.backward(dlogits);
  net.set_guided_relu(false);
  net.zero_grads();
  return grad;
}

ActivationMap activation_map(Network& net, const ImageBuf& tile, int target_class,
                             SaliencyMode mode) {
  if (tile.channels != 3) throw ArgumentError("activation_map expects an RGB tile");
  Tensor input({1, 3, tile.height, tile.width});
  standardize_into(input, 0, tile);
  Tensor grad = input_gradient(net, input, target_class, mode);

  ActivationMap map;
  map.width = tile.width;
  map.height = tile.height;
  map.values.assign(static_cast<size_t>(tile.width) * tile.height, 0.0);
  long plane = static_cast<long>(tile.width) * tile.height;
  for (long c = 0; c < 3; ++c) {
    const double* g = grad.data() + c * plane;
    for (long i = 0; i < plane; ++i) {
      double v = std::max(0.0, g[i]);  // negative gradients removed
      map.values[static_cast<size_t>(i)] = std::max(map.values[static_cast<size_t>(i)], v);
    }
  }
  double peak = *std::max_element(map.values.begin(), map.values.end());
  if (peak > 0.0) {
    for (double& v : map.values) v /= peak;
  }
  return map;
}

void write_activation_png(const std::string& path, const ActivationMap& map) {
  ImageBuf img;
  img.width = map.width;
  img.height = map.height;
  img.channels = 1;
  img.pixels.resize(map.values.size());
  for (size_t i = 0; i < map.values.size(); ++i) {
    img.pixels[i] = static_cast<uint8_t>(std::lround(std::clamp(map.values[i], 0.0, 1.0) * 255.0));
  }
  write_png(path, img);
}

}  // namespace demandmap::cnn
