#ifndef DEMANDMAP_CNN_SALIENCY_HPP_
#define DEMANDMAP_CNN_SALIENCY_HPP_

#include <string>
#include <vector>

#include "demandmap/cnn/network.hpp"
#include "demandmap/png_io.hpp"

namespace demandmap::cnn {

// paper: plain backpropagation of the target logit to the input pixels,
//        negative pixel gradients clamped to zero afterwards.
// guided: additionally masks each rectifier's backward pass where the
//         forward input was negative or the flowing gradient is negative.
enum class SaliencyMode { paper, guided };

struct ActivationMap {
  std::string tile_id;
  int width = 0;
  int height = 0;
  std::vector<double> values;  // in [0,1], >= 0

  double at(int y, int x) const { return values[static_cast<size_t>(y) * width + x]; }
};

// Gradient of logits[target_class] with respect to the (1,C,H,W) input, in
// evaluation mode. Exposed separately so it can be checked against finite
// differences.
Tensor input_gradient(Network& net, const Tensor& input, int target_class,
                      SaliencyMode mode = SaliencyMode::paper);

// Clamp negative gradients to zero, reduce channels by per-pixel maximum and
// normalize by the map maximum (an all-zero map stays all-zero).
ActivationMap activation_map(Network& net, const ImageBuf& tile, int target_class,
                             SaliencyMode mode = SaliencyMode::paper);

void write_activation_png(const std::string& path, const ActivationMap& map);

}  // namespace demandmap::cnn

#endif  // DEMANDMAP_CNN_SALIENCY_HPP_
