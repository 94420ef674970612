#ifndef DEMANDMAP_CNN_LOSS_HPP_
#define DEMANDMAP_CNN_LOSS_HPP_

#include <Eigen/Core>

#include "demandmap/cnn/tensor.hpp"
#include "demandmap/labeling.hpp"

namespace demandmap::cnn {

// Boundary-aware classification loss. Values flagged close to an adjacent
// bin blend the cross-entropies of the true bin l and its neighbor N(l):
//   L(o, l) = alpha * CE(o, l) + (1 - alpha) * CE(o, N(l))
// and plain cross-entropy applies when no flag is set (or alpha = 1).
double boundary_aware_loss(const Eigen::VectorXd& logits, const labeling::BinAssignment& assignment,
                           double alpha);

// d loss / d logits; softmax(o) - alpha*onehot(l) - (1-alpha)*onehot(N(l)).
Eigen::VectorXd boundary_aware_loss_grad(const Eigen::VectorXd& logits,
                                         const labeling::BinAssignment& assignment, double alpha);

// Mean per-sample loss over a batch of logits (N x num_classes); grad_out,
// when given, receives the gradient of the mean.
double batch_boundary_loss(const Tensor& logits,
                           const std::vector<labeling::BinAssignment>& assignments, double alpha,
                           Tensor* grad_out = nullptr);

}  // namespace demandmap::cnn

#endif  // DEMANDMAP_CNN_LOSS_HPP_
