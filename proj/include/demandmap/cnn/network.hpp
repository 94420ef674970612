#ifndef DEMANDMAP_CNN_NETWORK_HPP_
#define DEMANDMAP_CNN_NETWORK_HPP_

#include <memory>
#include <string>
#include <vector>

#include "demandmap/cnn/layers.hpp"

namespace demandmap::cnn {

// Image-corpus channel statistics used to standardize inputs before every
// forward pass (pixels first scaled to [0,1]).
inline constexpr double kPretrainMean[3] = {0.485, 0.456, 0.406};
inline constexpr double kPretrainStd[3] = {0.229, 0.224, 0.225};

class Network {
 public:
  Network() = default;
  Network(Network&&) = default;
  Network& operator=(Network&&) = default;

  int add(std::unique_ptr<Layer> layer);
  int layer_count() const { return static_cast<int>(layers_.size()); }
  Layer& layer(int index) { return *layers_.at(static_cast<size_t>(index)); }
  const Layer& layer(int index) const { return *layers_.at(static_cast<size_t>(index)); }

  // Runs layers [0, up_to] (inclusive); -1 means the whole stack. backward
  // walks the layers the last forward traversed and returns the input
  // gradient; parameter gradients accumulate until zero_grads.
  Tensor forward(const Tensor& x, bool training, int up_to = -1);
  Tensor backward(const Tensor& dy);
  void zero_grads();

  std::vector<ParamRef> params_of(int layer_index);
  // Prefixed "layer<i>.<name>" across the whole stack.
  std::vector<std::pair<int, ParamRef>> all_params();
  std::vector<std::pair<int, ParamRef>> all_buffers();

  void set_step_seed(uint64_t seed);
  void set_guided_relu(bool guided);

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
  int last_forward_depth_ = 0;
};

// The 37-layer backbone of the transfer-learning setup: eight 3x3
// convolution blocks with batch-norm and 2x2 max-pools, a 7x7 adaptive
// average pool, and a three-layer classifier head. width_scale shrinks every
// channel/feature width proportionally so tests can run on CPU; layer 33 is
// the feature tap and layer 36 the num_classes output.
struct BackboneSpec {
  double width_scale = 1.0;
  int num_classes = 4;
  std::string weights_path;  // optional pretrained bundle; empty = random init
  uint64_t init_seed = 1;

  static constexpr int kFeatureLayer = 33;
  static constexpr int kFinalLayer = 36;

  long scaled(long base) const;
  long feature_dim() const { return scaled(4096); }
};

Network build_backbone(const BackboneSpec& spec);

// Single-file binary checkpoint: a manifest of (layer index, parameter name,
// shape) entries followed by raw float64 payloads. Buffers (running
// statistics) are stored alongside parameters.
void save_weight_bundle(const Network& net, const std::string& path);

// Loads every entry into the matching layer parameter. Shape mismatches on
// layers before `final_layer` throw DataError naming the first offender; the
// final layer keeps its fresh initialization when the bundle's classifier
// width differs (e.g. a 1000-class pretraining head).
void load_weight_bundle(Network& net, const std::string& path,
                        int final_layer = BackboneSpec::kFinalLayer);

// Checksum of a layer's learnable parameters, for freezing contracts.
uint64_t param_checksum(Network& net, int layer_index);

}  // namespace demandmap::cnn

#endif  // DEMANDMAP_CNN_NETWORK_HPP_
