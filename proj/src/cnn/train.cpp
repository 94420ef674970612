#include "demandmap/cnn/train.hpp"

#include <cmath>

#include "demandmap/cnn/loss.hpp"
#include "demandmap/csv.hpp"

namespace demandmap::cnn {

void TrainingConfig::validate() const {
  if (learning_rate <= 0.0) throw ArgumentError("learning_rate must be positive");
  if (batch_size <= 0) throw ArgumentError("batch_size must be positive");
  if (epochs_frozen < 0 || epochs_full < 0 || epochs_frozen + epochs_full == 0) {
    throw ArgumentError("epoch counts must be non-negative and not both zero");
  }
  if (loss_alpha <= 0.0 || loss_alpha > 1.0) throw ArgumentError("loss_alpha outside (0, 1]");
  if (crop_size <= 0 || crop_size > 256) throw ArgumentError("crop_size outside (0, 256]");
}

void TrainingLog::write_csv(const std::string& path) const {
  std::vector<std::vector<std::string>> rows;
  for (const auto& e : epochs) {
    rows.push_back({strf("%d", e.epoch), strf("%d", e.phase), strf("%.8f", e.mean_loss),
                    e.trainable_groups});
  }
  demandmap::write_csv(path, {"epoch", "phase", "mean_loss", "trainable_groups"}, rows);
}

Adam::Adam(std::vector<ParamRef> params, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (auto& p : params) {
    Slot s;
    s.value = p.value;
    s.grad = p.grad;
    s.m.assign(static_cast<size_t>(p.value->size()), 0.0);
    s.v.assign(static_cast<size_t>(p.value->size()), 0.0);
    slots_.push_back(std::move(s));
  }
}

void Adam::step() {
  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (auto& s : slots_) {
    double* w = s.value->data();
    const double* g = s.grad->data();
    for (long i = 0; i < s.value->size(); ++i) {
      s.m[static_cast<size_t>(i)] = beta1_ * s.m[static_cast<size_t>(i)] + (1.0 - beta1_) * g[i];
      s.v[static_cast<size_t>(i)] =
          beta2_ * s.v[static_cast<size_t>(i)] + (1.0 - beta2_) * g[i] * g[i];
      double mhat = s.m[static_cast<size_t>(i)] / bc1;
      double vhat = s.v[static_cast<size_t>(i)] / bc2;
      w[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

ImageBuf random_crop(const ImageBuf& tile, int size, uint64_t seed) {
  if (size > tile.width || size > tile.height) {
    throw ArgumentError(strf("crop size %d exceeds tile side %dx%d", size, tile.width, tile.height));
  }
  Rng rng(seed);
  int ox = static_cast<int>(rng.next_below(static_cast<uint64_t>(tile.width - size + 1)));
  int oy = static_cast<int>(rng.next_below(static_cast<uint64_t>(tile.height - size + 1)));
  ImageBuf out;
  out.width = size;
  out.height = size;
  out.channels = tile.channels;
  out.pixels.resize(static_cast<size_t>(size) * size * tile.channels);
  for (int y = 0; y < size; ++y) {
    const uint8_t* src = tile.pixels.data() +
                         (static_cast<size_t>(oy + y) * tile.width + ox) * tile.channels;
    std::copy(src, src + static_cast<size_t>(size) * tile.channels,
              out.pixels.data() + static_cast<size_t>(y) * size * tile.channels);
  }
  return out;
}

ImageBuf center_crop(const ImageBuf& tile, int size) {
  if (size > tile.width || size > tile.height) {
    throw ArgumentError(strf("crop size %d exceeds tile side %dx%d", size, tile.width, tile.height));
  }
  if (size == tile.width && size == tile.height) return tile;
  int ox = (tile.width - size) / 2;
  int oy = (tile.height - size) / 2;
  ImageBuf out;
  out.width = size;
  out.height = size;
  out.channels = tile.channels;
  out.pixels.resize(static_cast<size_t>(size) * size * tile.channels);
  for (int y = 0; y < size; ++y) {
    const uint8_t* src = tile.pixels.data() +
                         (static_cast<size_t>(oy + y) * tile.width + ox) * tile.channels;
    std::copy(src, src + static_cast<size_t>(size) * tile.channels,
              out.pixels.data() + static_cast<size_t>(y) * size * tile.channels);
  }
  return out;
}

void standardize_into(Tensor& batch, long n, const ImageBuf& crop) {
  if (crop.channels != 3) throw ArgumentError("standardize_into expects RGB input");
  long h = batch.dim(2), w = batch.dim(3);
  if (crop.height != h || crop.width != w) {
    throw ArgumentError(strf("crop is %dx%d, batch expects %ldx%ld", crop.width, crop.height, w, h));
  }
  for (long c = 0; c < 3; ++c) {
    double mean = kPretrainMean[c];
    double inv_std = 1.0 / kPretrainStd[c];
    double* dst = batch.data() + ((n * 3 + c) * h) * w;
    for (long y = 0; y < h; ++y) {
      for (long x = 0; x < w; ++x) {
        double v = crop.pixels[(static_cast<size_t>(y) * w + x) * 3 + static_cast<size_t>(c)] / 255.0;
        dst[y * w + x] = (v - mean) * inv_std;
      }
    }
  }
}

namespace {

double run_epoch(Network& net, const std::vector<LabeledTile>& data, const TrainingConfig& cfg,
                 Adam& optimizer, int epoch_index) {
  std::vector<size_t> order(data.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng shuffle_rng(mix_seed(cfg.seed, "epoch.shuffle", static_cast<uint64_t>(epoch_index)));
  shuffle_rng.shuffle(order);

  double loss_sum = 0.0;
  long sample_count = 0;
  int step = 0;
  for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
    size_t batch_n = std::min(static_cast<size_t>(cfg.batch_size), order.size() - start);
    Tensor batch({static_cast<long>(batch_n), 3, cfg.crop_size, cfg.crop_size});
    std::vector<labeling::BinAssignment> assignments(batch_n);
    for (size_t b = 0; b < batch_n; ++b) {
      const LabeledTile& sample = data[order[start + b]];
      uint64_t crop_seed = mix_seed(cfg.seed, "crop", fnv1a64(sample.tile_id),
                                    (static_cast<uint64_t>(epoch_index) << 20) |
                                        static_cast<uint64_t>(step));
      ImageBuf crop = random_crop(sample.image, cfg.crop_size, crop_seed);
      standardize_into(batch, static_cast<long>(b), crop);
      assignments[b] = sample.assignment;
    }
    net.set_step_seed(mix_seed(cfg.seed, "step", static_cast<uint64_t>(epoch_index),
                               static_cast<uint64_t>(step)));
    net.zero_grads();
    Tensor logits = net.forward(batch, /*training=*/true);
    Tensor dlogits;
    double loss = batch_boundary_loss(logits, assignments, cfg.loss_alpha, &dlogits);
    net.backward(dlogits);
    optimizer.step();
    loss_sum += loss * static_cast<double>(batch_n);
    sample_count += static_cast<long>(batch_n);
    ++step;
  }
  return loss_sum / static_cast<double>(sample_count);
}

}  // namespace

TrainingLog train(Network& net, const std::vector<LabeledTile>& data, const TrainingConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw ArgumentError("train: empty dataset");
  for (const auto& d : data) {
    if (d.image.width < cfg.crop_size || d.image.height < cfg.crop_size || d.image.channels != 3) {
      throw ArgumentError("train: tile " + d.tile_id + " is not RGB of at least crop size");
    }
  }

  TrainingLog log;
  int final_layer = net.layer_count() - 1;
  int epoch = 0;

  {
    Adam frozen_opt(net.params_of(final_layer), cfg.learning_rate);
    for (int e = 0; e < cfg.epochs_frozen; ++e) {
      double mean_loss = run_epoch(net, data, cfg, frozen_opt, epoch);
      ++epoch;
      log.epochs.push_back({epoch, 1, mean_loss, strf("layer%d", final_layer)});
    }
  }
  {
    std::vector<ParamRef> all;
    for (auto& [idx, p] : net.all_params()) all.push_back(p);
    Adam full_opt(all, cfg.learning_rate);
    for (int e = 0; e < cfg.epochs_full; ++e) {
      double mean_loss = run_epoch(net, data, cfg, full_opt, epoch);
      ++epoch;
      log.epochs.push_back({epoch, 2, mean_loss, "all"});
    }
  }
  return log;
}

}  // namespace demandmap::cnn
