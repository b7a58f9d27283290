#pragma once

#include "fairgkd/models.hpp"
#include "fairgkd/tensor.hpp"

#include <optional>
#include <span>
#include <vector>

namespace fairgkd {

/// Binary cross-entropy over the masked nodes, mean of
/// -[y ln p + (1 - y) ln(1 - p)]. Probabilities are clamped to
/// [1e-12, 1 - 1e-12] before the logs.
Tensor bce(const Tensor& probabilities, const std::vector<int8_t>& labels,
           std::span<const int> mask);

// ----------------------------------------------------------------------------
// Temperature-scaled contrastive objective over row-aligned representation
// pairs. Similarity is the cosine of the (optionally head-mapped) rows; row i
// of one matrix is the positive partner of row i of the other, every other
// row on either side is a negative.
// ----------------------------------------------------------------------------
struct ContrastiveConfig {
    double tau = 0.5;
    /// Optional learnable map applied to both sides before the cosine.
    /// Identity when absent, which keeps the closed-form values exact.
    std::optional<Linear> sim_head;

    void validate() const;
};

/// Loss of the single positive pair i against its 2n-1 denominators.
/// Forward-only scalar.
double nt_xent_pair(int i, const Tensor& h, const Tensor& h_other, const ContrastiveConfig& cfg);

/// Mean over both pair directions, (1/2n) sum_i [l(h_i, h'_i) + l(h'_i, h_i)].
/// Differentiable through either argument that is grad-active.
Tensor nt_xent(const Tensor& h, const Tensor& h_other, const ContrastiveConfig& cfg);

// ----------------------------------------------------------------------------
// Adaptive two-term coefficient schedule. The loss with the slower relative
// decrease (measured against its epoch-0 value) receives the larger
// coefficient; gradients never flow through the coefficients.
// ----------------------------------------------------------------------------
class LossBalancer {
public:
    /// balance_lr in [0, 1]; gamma > 0.
    LossBalancer(double balance_lr, double gamma);

    /// Epoch 0 records the initial losses and returns (0.5, 0.5); later
    /// epochs apply the update rule. Losses must be positive.
    std::pair<double, double> coefficients(int epoch, double loss_hard, double loss_soft);

    bool initialized() const { return hard0_ > 0.0; }
    double alpha_prev() const { return alpha_prev_; }

private:
    double lr_;
    double gamma_;
    double alpha_prev_ = 0.5;
    double hard0_ = -1.0;
    double soft0_ = -1.0;
};

/// alpha * hard + beta * soft with the coefficients treated as constants.
/// Requires alpha + beta == 1 and both in [0, 1].
Tensor combine_losses(const Tensor& hard, const Tensor& soft, double alpha, double beta);

} // namespace fairgkd
