#include "demandmap/cnn/loss.hpp"

#include <cmath>

namespace demandmap::cnn {

namespace {

void check_inputs(const Eigen::VectorXd& logits, const labeling::BinAssignment& assignment,
                  double alpha) {
  if (alpha <= 0.0 || alpha > 1.0) {
    throw ArgumentError(strf("loss alpha %.4f outside (0, 1]", alpha));
  }
  if (!logits.allFinite()) throw NumericError("boundary_aware_loss: non-finite logits");
  if (assignment.bin < 0 || assignment.bin >= logits.size()) {
    throw ArgumentError(strf("bin %d out of range for %ld logits", assignment.bin,
                             static_cast<long>(logits.size())));
  }
  int nb = assignment.neighbor();
  if (nb < 0 || nb >= logits.size()) {
    throw ArgumentError(strf("neighbor bin %d out of range", nb));
  }
}

// log(sum(exp(o))) with the max shifted out.
double log_sum_exp(const Eigen::VectorXd& o) {
  double m = o.maxCoeff();
  return m + std::log((o.array() - m).exp().sum());
}

}  // namespace

double boundary_aware_loss(const Eigen::VectorXd& logits, const labeling::BinAssignment& assignment,
                           double alpha) {
  check_inputs(logits, assignment, alpha);
  double lse = log_sum_exp(logits);
  double ce_true = lse - logits(assignment.bin);
  if (assignment.closeness == labeling::Closeness::none || alpha == 1.0) {
    return ce_true;
  }
  double ce_near = lse - logits(assignment.neighbor());
  return alpha * ce_true + (1.0 - alpha) * ce_near;
}

Eigen::VectorXd boundary_aware_loss_grad(const Eigen::VectorXd& logits,
                                         const labeling::BinAssignment& assignment, double alpha) {
  check_inputs(logits, assignment, alpha);
  double lse = log_sum_exp(logits);
  Eigen::VectorXd grad = (logits.array() - lse).exp();  // softmax
  if (assignment.closeness == labeling::Closeness::none || alpha == 1.0) {
    grad(assignment.bin) -= 1.0;
  } else {
    grad(assignment.bin) -= alpha;
    grad(assignment.neighbor()) -= 1.0 - alpha;
  }
  return grad;
}

double batch_boundary_loss(const Tensor& logits,
                           const std::vector<labeling::BinAssignment>& assignments, double alpha,
                           Tensor* grad_out) {
  if (logits.shape().size() != 2) throw ArgumentError("batch loss expects (N, classes) logits");
  long n = logits.dim(0), classes = logits.dim(1);
  if (static_cast<size_t>(n) != assignments.size()) {
    throw ArgumentError("batch loss: one assignment per sample required");
  }
  if (grad_out) *grad_out = Tensor({n, classes});
  double total = 0.0;
  for (long i = 0; i < n; ++i) {
    Eigen::VectorXd o = logits.as_matrix(n, classes).row(i);
    total += boundary_aware_loss(o, assignments[static_cast<size_t>(i)], alpha);
    if (grad_out) {
      Eigen::VectorXd g = boundary_aware_loss_grad(o, assignments[static_cast<size_t>(i)], alpha) /
                          static_cast<double>(n);
      grad_out->as_matrix(n, classes).row(i) = g;
    }
  }
  return total / static_cast<double>(n);
}

}  // namespace demandmap::cnn
