#ifndef DEMANDMAP_CNN_TRAIN_HPP_
#define DEMANDMAP_CNN_TRAIN_HPP_

#include <string>
#include <vector>

#include "demandmap/cnn/network.hpp"
#include "demandmap/labeling.hpp"
#include "demandmap/png_io.hpp"

namespace demandmap::cnn {

struct TrainingConfig {
  double learning_rate = 3e-6;
  int batch_size = 8;
  int epochs_frozen = 5;  // phase 1: only the final classifier trains
  int epochs_full = 25;   // phase 2: the whole network trains
  double loss_alpha = 0.7;
  int crop_size = 224;
  uint64_t seed = 42;

  void validate() const;
};

struct LabeledTile {
  std::string tile_id;
  ImageBuf image;  // 256x256x3
  labeling::BinAssignment assignment;
};

struct EpochLog {
  int epoch = 0;  // 1-based over both phases
  int phase = 1;
  double mean_loss = 0.0;
  std::string trainable_groups;
};

struct TrainingLog {
  std::vector<EpochLog> epochs;
  void write_csv(const std::string& path) const;
};

// Adam over a fixed parameter set.
class Adam {
 public:
  Adam(std::vector<ParamRef> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);
  void step();

 private:
  struct Slot {
    Tensor* value;
    Tensor* grad;
    std::vector<double> m, v;
  };
  std::vector<Slot> slots_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
};

// Uniform top-left offset in [0, side-size]^2, deterministic per seed.
ImageBuf random_crop(const ImageBuf& tile, int size, uint64_t seed);
ImageBuf center_crop(const ImageBuf& tile, int size);

// Scales to [0,1] then standardizes channel-wise with the pretraining
// statistics; writes sample n of a (N,3,H,W) batch tensor.
void standardize_into(Tensor& batch, long n, const ImageBuf& crop);

// Two-phase fine-tune: epochs_frozen epochs updating only the final layer,
// then epochs_full epochs updating everything. Batches reshuffle per epoch
// and crops are deterministic per (seed, tile, epoch, step).
TrainingLog train(Network& net, const std::vector<LabeledTile>& data, const TrainingConfig& cfg);

}  // namespace demandmap::cnn

#endif  // DEMANDMAP_CNN_TRAIN_HPP_
