#ifndef DEMANDMAP_CNN_LAYERS_HPP_
#define DEMANDMAP_CNN_LAYERS_HPP_

#include <memory>
#include <string>
#include <vector>

#include "demandmap/cnn/tensor.hpp"
#include "demandmap/rng.hpp"

namespace demandmap::cnn {

struct ParamRef {
  std::string name;
  Tensor* value = nullptr;
  Tensor* grad = nullptr;  // null for buffers
};

// A layer caches whatever its backward pass needs during forward; backward
// may only be called after a forward with matching shapes.
class Layer {
 public:
  virtual ~Layer() = default;
  virtual const char* kind() const = 0;
  virtual Tensor forward(const Tensor& x, bool training) = 0;
  virtual Tensor backward(const Tensor& dy) = 0;
  virtual std::vector<ParamRef> params() { return {}; }
  virtual std::vector<ParamRef> buffers() { return {}; }
};

class Conv2d : public Layer {
 public:
  Conv2d(long in_channels, long out_channels, long kernel = 3, long stride = 1, long pad = 1);
  const char* kind() const override { return "conv"; }
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& dy) override;
  std::vector<ParamRef> params() override;
  void init(Rng& rng);  // Kaiming-normal weights (fan-out), zero bias

  long in_channels() const { return in_c_; }
  long out_channels() const { return out_c_; }
  Tensor weight, bias, weight_grad, bias_grad;

 private:
  long in_c_, out_c_, k_, stride_, pad_;
  Tensor x_;  // cached input
  long oh_ = 0, ow_ = 0;
};

class BatchNorm2d : public Layer {
 public:
  explicit BatchNorm2d(long channels, double eps = 1e-5, double momentum = 0.1);
  const char* kind() const override { return "batch_norm"; }
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& dy) override;
  std::vector<ParamRef> params() override;
  std::vector<ParamRef> buffers() override;

  long channels() const { return c_; }
  Tensor gamma, beta, gamma_grad, beta_grad;
  Tensor running_mean, running_var;

 private:
  long c_;
  double eps_, momentum_;
  bool trained_forward_ = false;
  Tensor x_hat_;
  Tensor inv_std_;  // per channel, for the cached forward
};

class ReLU : public Layer {
 public:
  const char* kind() const override { return "relu"; }
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& dy) override;
  // Guided mode additionally zeroes positions where the flowing gradient is
  // negative (used by guided backpropagation, never during training).
  void set_guided(bool guided) { guided_ = guided; }

 private:
  Tensor x_;
  bool guided_ = false;
};

class MaxPool2d : public Layer {
 public:
  explicit MaxPool2d(long kernel = 2, long stride = 2);
  const char* kind() const override { return "max_pool"; }
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& dy) override;

 private:
  long k_, stride_;
  std::vector<long> argmax_;
  std::vector<long> in_shape_;
};

class AdaptiveAvgPool2d : public Layer {
 public:
  AdaptiveAvgPool2d(long out_h, long out_w);
  const char* kind() const override { return "adaptive_avg_pool"; }
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& dy) override;

 private:
  long oh_, ow_;
  std::vector<long> in_shape_;
};

// Accepts any input and flattens per sample to (N, in_features).
class Linear : public Layer {
 public:
  Linear(long in_features, long out_features);
  const char* kind() const override { return "linear"; }
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& dy) override;
  std::vector<ParamRef> params() override;
  void init(Rng& rng, double stddev = 0.01);

  long in_features() const { return in_f_; }
  long out_features() const { return out_f_; }
  Tensor weight, bias, weight_grad, bias_grad;  // weight is (out, in)

 private:
  long in_f_, out_f_;
  Tensor x_;
  std::vector<long> in_shape_;
};

class Dropout : public Layer {
 public:
  explicit Dropout(double p = 0.5) : p_(p) {}
  const char* kind() const override { return "dropout"; }
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& dy) override;
  // The trainer reseeds every step so runs are reproducible.
  void set_step_seed(uint64_t seed) { step_seed_ = seed; }

 private:
  double p_;
  uint64_t step_seed_ = 0;
  bool active_ = false;
  Tensor mask_;
};

}  // namespace demandmap::cnn

#endif  // DEMANDMAP_CNN_LAYERS_HPP_
