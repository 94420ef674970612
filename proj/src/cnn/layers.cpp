#include "demandmap/cnn/layers.hpp"

#include <cmath>

namespace demandmap::cnn {

namespace {

// input (C,H,W) slice -> columns (C*k*k, OH*OW), zero-padded borders.
void im2col(const double* x, long c, long h, long w, long k, long stride, long pad, long oh,
            long ow, double* col) {
  for (long ch = 0; ch < c; ++ch) {
    for (long ky = 0; ky < k; ++ky) {
      for (long kx = 0; kx < k; ++kx) {
        double* row = col + ((ch * k + ky) * k + kx) * oh * ow;
        for (long oy = 0; oy < oh; ++oy) {
          long iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= h) {
            for (long ox = 0; ox < ow; ++ox) row[oy * ow + ox] = 0.0;
            continue;
          }
          const double* src = x + (ch * h + iy) * w;
          for (long ox = 0; ox < ow; ++ox) {
            long ix = ox * stride + kx - pad;
            row[oy * ow + ox] = (ix < 0 || ix >= w) ? 0.0 : src[ix];
          }
        }
      }
    }
  }
}

// columns (C*k*k, OH*OW) -> accumulate back into (C,H,W).
void col2im(const double* col, long c, long h, long w, long k, long stride, long pad, long oh,
            long ow, double* x) {
  for (long ch = 0; ch < c; ++ch) {
    for (long ky = 0; ky < k; ++ky) {
      for (long kx = 0; kx < k; ++kx) {
        const double* row = col + ((ch * k + ky) * k + kx) * oh * ow;
        for (long oy = 0; oy < oh; ++oy) {
          long iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= h) continue;
          double* dst = x + (ch * h + iy) * w;
          for (long ox = 0; ox < ow; ++ox) {
            long ix = ox * stride + kx - pad;
            if (ix >= 0 && ix < w) dst[ix] += row[oy * ow + ox];
          }
        }
      }
    }
  }
}

void check_nchw(const Tensor& x, const char* who) {
  if (x.shape().size() != 4) {
    throw ArgumentError(strf("%s expects a (N,C,H,W) tensor, got %s", who,
                             shape_str(x.shape()).c_str()));
  }
}

}  // namespace

Conv2d::Conv2d(long in_channels, long out_channels, long kernel, long stride, long pad)
    : weight(Tensor({out_channels, in_channels, kernel, kernel})),
      bias(Tensor({out_channels})),
      weight_grad(Tensor({out_channels, in_channels, kernel, kernel})),
      bias_grad(Tensor({out_channels})),
      in_c_(in_channels),
      out_c_(out_channels),
      k_(kernel),
      stride_(stride),
      pad_(pad) {}

void Conv2d::init(Rng& rng) {
  double fan_out = static_cast<double>(out_c_ * k_ * k_);
  double stddev = std::sqrt(2.0 / fan_out);
  for (long i = 0; i < weight.size(); ++i) weight[i] = rng.normal() * stddev;
  bias.zero();
}

std::vector<ParamRef> Conv2d::params() {
  return {{"weight", &weight, &weight_grad}, {"bias", &bias, &bias_grad}};
}

Tensor Conv2d::forward(const Tensor& x, bool) {
  check_nchw(x, "Conv2d");
  if (x.dim(1) != in_c_) {
    throw ArgumentError(strf("Conv2d: expected %ld input channels, got %ld", in_c_, x.dim(1)));
  }
  x_ = x;
  long n = x.dim(0), h = x.dim(2), w = x.dim(3);
  oh_ = (h + 2 * pad_ - k_) / stride_ + 1;
  ow_ = (w + 2 * pad_ - k_) / stride_ + 1;
  Tensor y({n, out_c_, oh_, ow_});
  Tensor col({in_c_ * k_ * k_, oh_ * ow_});
  ConstMatMap wmat(weight.data(), out_c_, in_c_ * k_ * k_);
  for (long i = 0; i < n; ++i) {
    im2col(x.data() + i * in_c_ * h * w, in_c_, h, w, k_, stride_, pad_, oh_, ow_, col.data());
    MatMap out(y.data() + i * out_c_ * oh_ * ow_, out_c_, oh_ * ow_);
    out.noalias() = wmat * col.as_matrix(in_c_ * k_ * k_, oh_ * ow_);
    for (long c = 0; c < out_c_; ++c) out.row(c).array() += bias[c];
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& dy) {
  long n = x_.dim(0), h = x_.dim(2), w = x_.dim(3);
  Tensor dx({n, in_c_, h, w});
  Tensor col({in_c_ * k_ * k_, oh_ * ow_});
  Tensor dcol({in_c_ * k_ * k_, oh_ * ow_});
  ConstMatMap wmat(weight.data(), out_c_, in_c_ * k_ * k_);
  MatMap dwmat(weight_grad.data(), out_c_, in_c_ * k_ * k_);
  for (long i = 0; i < n; ++i) {
    ConstMatMap dout(dy.data() + i * out_c_ * oh_ * ow_, out_c_, oh_ * ow_);
    im2col(x_.data() + i * in_c_ * h * w, in_c_, h, w, k_, stride_, pad_, oh_, ow_, col.data());
    dwmat.noalias() += dout * col.as_matrix(in_c_ * k_ * k_, oh_ * ow_).transpose();
    for (long c = 0; c < out_c_; ++c) bias_grad[c] += dout.row(c).sum();
    dcol.as_matrix(in_c_ * k_ * k_, oh_ * ow_).noalias() = wmat.transpose() * dout;
    col2im(dcol.data(), in_c_, h, w, k_, stride_, pad_, oh_, ow_,
           dx.data() + i * in_c_ * h * w);
  }
  return dx;
}

BatchNorm2d::BatchNorm2d(long channels, double eps, double momentum)
    : gamma(Tensor({channels})),
      beta(Tensor({channels})),
      gamma_grad(Tensor({channels})),
      beta_grad(Tensor({channels})),
      running_mean(Tensor({channels})),
      running_var(Tensor({channels})),
      c_(channels),
      eps_(eps),
      momentum_(momentum) {
  gamma.fill(1.0);
  running_var.fill(1.0);
}

std::vector<ParamRef> BatchNorm2d::params() {
  return {{"weight", &gamma, &gamma_grad}, {"bias", &beta, &beta_grad}};
}

std::vector<ParamRef> BatchNorm2d::buffers() {
  return {{"running_mean", &running_mean, nullptr}, {"running_var", &running_var, nullptr}};
}

Tensor BatchNorm2d::forward(const Tensor& x, bool training) {
  check_nchw(x, "BatchNorm2d");
  long n = x.dim(0), h = x.dim(2), w = x.dim(3);
  long plane = h * w;
  long m = n * plane;  // elements per channel
  trained_forward_ = training;
  x_hat_ = Tensor(x.shape());
  inv_std_ = Tensor({c_});
  Tensor mean({c_});
  if (training) {
    for (long c = 0; c < c_; ++c) {
      double sum = 0.0;
      for (long i = 0; i < n; ++i) {
        const double* p = x.data() + (i * c_ + c) * plane;
        for (long j = 0; j < plane; ++j) sum += p[j];
      }
      mean[c] = sum / static_cast<double>(m);
    }
    for (long c = 0; c < c_; ++c) {
      double var = 0.0;
      for (long i = 0; i < n; ++i) {
        const double* p = x.data() + (i * c_ + c) * plane;
        for (long j = 0; j < plane; ++j) {
          double d = p[j] - mean[c];
          var += d * d;
        }
      }
      var /= static_cast<double>(m);
      inv_std_[c] = 1.0 / std::sqrt(var + eps_);
      running_mean[c] = (1.0 - momentum_) * running_mean[c] + momentum_ * mean[c];
      double unbiased = m > 1 ? var * static_cast<double>(m) / static_cast<double>(m - 1) : var;
      running_var[c] = (1.0 - momentum_) * running_var[c] + momentum_ * unbiased;
    }
  } else {
    for (long c = 0; c < c_; ++c) {
      mean[c] = running_mean[c];
      inv_std_[c] = 1.0 / std::sqrt(running_var[c] + eps_);
    }
  }
  Tensor y(x.shape());
  for (long i = 0; i < n; ++i) {
    for (long c = 0; c < c_; ++c) {
      const double* src = x.data() + (i * c_ + c) * plane;
      double* xh = x_hat_.data() + (i * c_ + c) * plane;
      double* dst = y.data() + (i * c_ + c) * plane;
      for (long j = 0; j < plane; ++j) {
        xh[j] = (src[j] - mean[c]) * inv_std_[c];
        dst[j] = xh[j] * gamma[c] + beta[c];
      }
    }
  }
  return y;
}

Tensor BatchNorm2d::backward(const Tensor& dy) {
  long n = dy.dim(0), h = dy.dim(2), w = dy.dim(3);
  long plane = h * w;
  long m = n * plane;
  Tensor dx(dy.shape());
  for (long c = 0; c < c_; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (long i = 0; i < n; ++i) {
      const double* dyp = dy.data() + (i * c_ + c) * plane;
      const double* xh = x_hat_.data() + (i * c_ + c) * plane;
      for (long j = 0; j < plane; ++j) {
        sum_dy += dyp[j];
        sum_dy_xhat += dyp[j] * xh[j];
      }
    }
    gamma_grad[c] += sum_dy_xhat;
    beta_grad[c] += sum_dy;
    double g = gamma[c] * inv_std_[c];
    for (long i = 0; i < n; ++i) {
      const double* dyp = dy.data() + (i * c_ + c) * plane;
      const double* xh = x_hat_.data() + (i * c_ + c) * plane;
      double* dxp = dx.data() + (i * c_ + c) * plane;
      if (trained_forward_) {
        double inv_m = 1.0 / static_cast<double>(m);
        for (long j = 0; j < plane; ++j) {
          dxp[j] = g * (dyp[j] - inv_m * sum_dy - xh[j] * inv_m * sum_dy_xhat);
        }
      } else {
        // Evaluation-mode statistics are constants.
        for (long j = 0; j < plane; ++j) dxp[j] = g * dyp[j];
      }
    }
  }
  return dx;
}

Tensor ReLU::forward(const Tensor& x, bool) {
  x_ = x;
  Tensor y(x.shape());
  for (long i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  return y;
}

Tensor ReLU::backward(const Tensor& dy) {
  Tensor dx(dy.shape());
  if (guided_) {
    for (long i = 0; i < dy.size(); ++i) {
      dx[i] = (x_[i] > 0.0 && dy[i] > 0.0) ? dy[i] : 0.0;
    }
  } else {
    for (long i = 0; i < dy.size(); ++i) dx[i] = x_[i] > 0.0 ? dy[i] : 0.0;
  }
  return dx;
}

MaxPool2d::MaxPool2d(long kernel, long stride) : k_(kernel), stride_(stride) {}

Tensor MaxPool2d::forward(const Tensor& x, bool) {
  check_nchw(x, "MaxPool2d");
  in_shape_ = x.shape();
  long n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  long oh = (h - k_) / stride_ + 1;
  long ow = (w - k_) / stride_ + 1;
  Tensor y({n, c, oh, ow});
  argmax_.assign(static_cast<size_t>(y.size()), 0);
  long idx = 0;
  for (long i = 0; i < n; ++i) {
    for (long ch = 0; ch < c; ++ch) {
      const double* src = x.data() + (i * c + ch) * h * w;
      for (long oy = 0; oy < oh; ++oy) {
        for (long ox = 0; ox < ow; ++ox, ++idx) {
          double best = -std::numeric_limits<double>::infinity();
          long best_at = 0;
          for (long ky = 0; ky < k_; ++ky) {
            for (long kx = 0; kx < k_; ++kx) {
              long iy = oy * stride_ + ky;
              long ix = ox * stride_ + kx;
              double v = src[iy * w + ix];
              if (v > best) {
                best = v;
                best_at = iy * w + ix;
              }
            }
          }
          y[idx] = best;
          argmax_[static_cast<size_t>(idx)] = (i * c + ch) * h * w + best_at;
        }
      }
    }
  }
  return y;
}

Tensor MaxPool2d::backward(const Tensor& dy) {
  Tensor dx(in_shape_);
  for (long i = 0; i < dy.size(); ++i) {
    dx[argmax_[static_cast<size_t>(i)]] += dy[i];
  }
  return dx;
}

AdaptiveAvgPool2d::AdaptiveAvgPool2d(long out_h, long out_w) : oh_(out_h), ow_(out_w) {}

namespace {
inline long region_start(long i, long in, long out) { return i * in / out; }
inline long region_end(long i, long in, long out) { return ((i + 1) * in + out - 1) / out; }
}  // namespace

Tensor AdaptiveAvgPool2d::forward(const Tensor& x, bool) {
  check_nchw(x, "AdaptiveAvgPool2d");
  in_shape_ = x.shape();
  long n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor y({n, c, oh_, ow_});
  long idx = 0;
  for (long i = 0; i < n; ++i) {
    for (long ch = 0; ch < c; ++ch) {
      const double* src = x.data() + (i * c + ch) * h * w;
      for (long oy = 0; oy < oh_; ++oy) {
        long y0 = region_start(oy, h, oh_), y1 = region_end(oy, h, oh_);
        for (long ox = 0; ox < ow_; ++ox, ++idx) {
          long x0 = region_start(ox, w, ow_), x1 = region_end(ox, w, ow_);
          double sum = 0.0;
          for (long iy = y0; iy < y1; ++iy) {
            for (long ix = x0; ix < x1; ++ix) sum += src[iy * w + ix];
          }
          y[idx] = sum / static_cast<double>((y1 - y0) * (x1 - x0));
        }
      }
    }
  }
  return y;
}

Tensor AdaptiveAvgPool2d::backward(const Tensor& dy) {
  Tensor dx(in_shape_);
  long n = in_shape_[0], c = in_shape_[1], h = in_shape_[2], w = in_shape_[3];
  long idx = 0;
  for (long i = 0; i < n; ++i) {
    for (long ch = 0; ch < c; ++ch) {
      double* dst = dx.data() + (i * c + ch) * h * w;
      for (long oy = 0; oy < oh_; ++oy) {
        long y0 = region_start(oy, h, oh_), y1 = region_end(oy, h, oh_);
        for (long ox = 0; ox < ow_; ++ox, ++idx) {
          long x0 = region_start(ox, w, ow_), x1 = region_end(ox, w, ow_);
          double v = dy[idx] / static_cast<double>((y1 - y0) * (x1 - x0));
          for (long iy = y0; iy < y1; ++iy) {
            for (long ix = x0; ix < x1; ++ix) dst[iy * w + ix] += v;
          }
        }
      }
    }
  }
  return dx;
}

Linear::Linear(long in_features, long out_features)
    : weight(Tensor({out_features, in_features})),
      bias(Tensor({out_features})),
      weight_grad(Tensor({out_features, in_features})),
      bias_grad(Tensor({out_features})),
      in_f_(in_features),
      out_f_(out_features) {}

void Linear::init(Rng& rng, double stddev) {
  for (long i = 0; i < weight.size(); ++i) weight[i] = rng.normal() * stddev;
  bias.zero();
}

std::vector<ParamRef> Linear::params() {
  return {{"weight", &weight, &weight_grad}, {"bias", &bias, &bias_grad}};
}

Tensor Linear::forward(const Tensor& x, bool) {
  if (x.shape().empty()) throw ArgumentError("Linear: empty input");
  long n = x.dim(0);
  long features = x.size() / n;
  if (features != in_f_) {
    throw ArgumentError(strf("Linear: expected %ld input features, got %ld", in_f_, features));
  }
  in_shape_ = x.shape();
  x_ = x;
  Tensor y({n, out_f_});
  y.as_matrix(n, out_f_).noalias() =
      x.as_matrix(n, in_f_) * ConstMatMap(weight.data(), out_f_, in_f_).transpose();
  for (long i = 0; i < n; ++i) {
    for (long j = 0; j < out_f_; ++j) y[i * out_f_ + j] += bias[j];
  }
  return y;
}

Tensor Linear::backward(const Tensor& dy) {
  long n = in_shape_[0];
  ConstMatMap dmat(dy.data(), n, out_f_);
  MatMap(weight_grad.data(), out_f_, in_f_).noalias() += dmat.transpose() * x_.as_matrix(n, in_f_);
  for (long j = 0; j < out_f_; ++j) bias_grad[j] += dmat.col(j).sum();
  Tensor dx(in_shape_);
  dx.as_matrix(n, in_f_).noalias() = dmat * ConstMatMap(weight.data(), out_f_, in_f_);
  return dx;
}

Tensor Dropout::forward(const Tensor& x, bool training) {
  active_ = training && p_ > 0.0;
  if (!active_) return x;
  Rng rng(step_seed_);
  double keep = 1.0 - p_;
  double scale = 1.0 / keep;
  mask_ = Tensor(x.shape());
  Tensor y(x.shape());
  for (long i = 0; i < x.size(); ++i) {
    mask_[i] = rng.next_double() < keep ? scale : 0.0;
    y[i] = x[i] * mask_[i];
  }
  return y;
}

Tensor Dropout::backward(const Tensor& dy) {
  if (!active_) return dy;
  Tensor dx(dy.shape());
  for (long i = 0; i < dy.size(); ++i) dx[i] = dy[i] * mask_[i];
  return dx;
}

}  // namespace demandmap::cnn
