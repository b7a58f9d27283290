#include "fairgkd/losses.hpp"

#include <cmath>

namespace fairgkd {

namespace {

constexpr double kProbClamp = 1e-12;

double clamp_prob(double p) {
    if (p < kProbClamp) return kProbClamp;
    if (p > 1.0 - kProbClamp) return 1.0 - kProbClamp;
    return p;
}

} // namespace

Tensor bce(const Tensor& probabilities, const std::vector<int8_t>& labels,
           std::span<const int> mask) {
    if (probabilities.cols() != 1)
        throw ContractError("bce: probabilities must be a single column");
    if (static_cast<size_t>(probabilities.rows()) != labels.size())
        throw ContractError("bce: label count does not match probability rows");
    if (mask.empty()) throw ContractError("bce: empty mask");

    const int n = probabilities.rows();
    double acc = 0.0;
    for (int idx : mask) {
        if (idx < 0 || idx >= n) throw ContractError("bce: mask index out of range");
        const int8_t y = labels[static_cast<size_t>(idx)];
        if (y != 0 && y != 1) throw ContractError("bce: unlabeled node in mask");
        const double p = clamp_prob(probabilities(idx, 0));
        acc += y == 1 ? -std::log(p) : -std::log(1.0 - p);
    }
    const double inv = 1.0 / static_cast<double>(mask.size());
    Tensor out = Tensor::scalar(acc * inv);

    Tape* tape = Tape::current();
    if (tape && tape_should_record(tape, {&probabilities})) {
        auto pi = probabilities.impl();
        auto oi = out.impl();
        std::vector<int> mask_copy(mask.begin(), mask.end());
        std::vector<int8_t> label_copy(labels);
        tape->record(out, [pi, oi, mask_copy = std::move(mask_copy),
                           label_copy = std::move(label_copy), inv] {
            const double g = oi->grad[0] * inv;
            for (int idx : mask_copy) {
                const double raw = pi->values[static_cast<size_t>(idx)];
                if (raw < kProbClamp || raw > 1.0 - kProbClamp) continue; // clamp gate
                const int8_t y = label_copy[static_cast<size_t>(idx)];
                pi->grad[static_cast<size_t>(idx)] +=
                    g * (y == 1 ? -1.0 / raw : 1.0 / (1.0 - raw));
            }
        });
    }
    return out;
}

// ------------------------------- NT-Xent --------------------------------------

void ContrastiveConfig::validate() const {
    if (!(tau > 0.0)) throw ContractError("contrastive config: temperature must be positive");
}

namespace {

/// Exponentiated within-side similarity matrix (zero diagonal) and its
/// off-diagonal row sums.
struct SideGram {
    std::shared_ptr<std::vector<double>> mat;
    std::shared_ptr<std::vector<double>> sums;
};

SideGram compute_side_gram(const double* v, int n, int c, double inv_tau) {
    SideGram g;
    g.mat = std::make_shared<std::vector<double>>(static_cast<size_t>(n) * n, 0.0);
    g.sums = std::make_shared<std::vector<double>>(static_cast<size_t>(n), 0.0);
    double* m = g.mat->data();
    for (int i = 0; i < n; ++i) {
        const double* vi = v + static_cast<size_t>(i) * c;
        for (int j = i + 1; j < n; ++j) {
            const double* vj = v + static_cast<size_t>(j) * c;
            double dot = 0.0;
            for (int k = 0; k < c; ++k) dot += vi[k] * vj[k];
            const double e = std::exp(dot * inv_tau);
            m[static_cast<size_t>(i) * n + j] = e;
            m[static_cast<size_t>(j) * n + i] = e;
        }
    }
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        const double* row = m + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) acc += row[j];
        (*g.sums)[static_cast<size_t>(i)] = acc;
    }
    return g;
}

// A frozen partner (the teacher side of the distillation, the reference side
// of projector training) keeps the same values for the whole stage, so its
// within-side gram is reused across epochs. Keyed by buffer identity and a
// content hash; per thread because seeds train in parallel.
struct FrozenGramCache {
    const void* owner = nullptr;
    uint64_t content = 0;
    double inv_tau = 0.0;
    int n = 0;
    SideGram gram;
};
thread_local FrozenGramCache g_frozen_gram;

SideGram side_gram_for(const detail::TensorImpl& impl, int n, int c, double inv_tau,
                       bool frozen) {
    if (!frozen) return compute_side_gram(impl.values.data(), n, c, inv_tau);
    const uint64_t content = fnv1a(impl.values.data(), impl.values.size() * sizeof(double));
    FrozenGramCache& cache = g_frozen_gram;
    if (cache.owner == &impl && cache.content == content && cache.inv_tau == inv_tau &&
        cache.n == n)
        return cache.gram;
    cache.gram = compute_side_gram(impl.values.data(), n, c, inv_tau);
    cache.owner = &impl;
    cache.content = content;
    cache.inv_tau = inv_tau;
    cache.n = n;
    return cache.gram;
}

/// Core objective on already-normalized rows; one fused tape node.
Tensor nt_xent_core(const Tensor& x, const Tensor& y, double tau) {
    const int n = x.rows(), c = x.cols();
    const double* xp = x.data().data();
    const double* yp = y.data().data();
    const double inv_tau = 1.0 / tau;

    auto cross = std::make_shared<std::vector<double>>(static_cast<size_t>(n) * n);
    auto row_sums = std::make_shared<std::vector<double>>(static_cast<size_t>(n), 0.0);
    auto col_sums = std::make_shared<std::vector<double>>(static_cast<size_t>(n), 0.0);
    double positives = 0.0;
    for (int i = 0; i < n; ++i) {
        const double* xi = xp + static_cast<size_t>(i) * c;
        double* arow = cross->data() + static_cast<size_t>(i) * n;
        double racc = 0.0;
        for (int j = 0; j < n; ++j) {
            const double* yj = yp + static_cast<size_t>(j) * c;
            double dot = 0.0;
            for (int k = 0; k < c; ++k) dot += xi[k] * yj[k];
            const double e = std::exp(dot * inv_tau);
            arow[j] = e;
            racc += e;
            (*col_sums)[static_cast<size_t>(j)] += e;
            if (j == i) positives += dot;
        }
        (*row_sums)[static_cast<size_t>(i)] = racc;
    }

    const SideGram gx = side_gram_for(*x.impl(), n, c, inv_tau, !x.grad_active());
    const SideGram gy = side_gram_for(*y.impl(), n, c, inv_tau, !y.grad_active());

    auto denom_x = std::make_shared<std::vector<double>>(static_cast<size_t>(n));
    auto denom_y = std::make_shared<std::vector<double>>(static_cast<size_t>(n));
    double loss = -2.0 * positives * inv_tau;
    for (int i = 0; i < n; ++i) {
        const double dx = (*row_sums)[static_cast<size_t>(i)] + (*gx.sums)[static_cast<size_t>(i)];
        const double dy = (*col_sums)[static_cast<size_t>(i)] + (*gy.sums)[static_cast<size_t>(i)];
        (*denom_x)[static_cast<size_t>(i)] = dx;
        (*denom_y)[static_cast<size_t>(i)] = dy;
        loss += std::log(dx) + std::log(dy);
    }
    loss /= 2.0 * n;
    Tensor out = Tensor::scalar(loss);

    Tape* tape = Tape::current();
    if (tape && tape_should_record(tape, {&x, &y})) {
        auto xi_impl = x.impl(), yi_impl = y.impl(), oi = out.impl();
        auto within_x = gx.mat, within_y = gy.mat;
        tape->record(out, [xi_impl, yi_impl, oi, cross, within_x, within_y, denom_x, denom_y, n, c,
                           inv_tau] {
            const double coef = oi->grad[0] * inv_tau / (2.0 * n);
            const double* xv = xi_impl->values.data();
            const double* yv = yi_impl->values.data();
            std::vector<double> inv_dx(static_cast<size_t>(n)), inv_dy(static_cast<size_t>(n));
            for (int i = 0; i < n; ++i) {
                inv_dx[static_cast<size_t>(i)] = 1.0 / (*denom_x)[static_cast<size_t>(i)];
                inv_dy[static_cast<size_t>(i)] = 1.0 / (*denom_y)[static_cast<size_t>(i)];
            }
            if (xi_impl->grad_active) {
                double* gx_out = xi_impl->grad.data();
                for (int i = 0; i < n; ++i) {
                    double* gxi = gx_out + static_cast<size_t>(i) * c;
                    const double di = inv_dx[static_cast<size_t>(i)];
                    const double* arow = cross->data() + static_cast<size_t>(i) * n;
                    const double* brow = within_x->data() + static_cast<size_t>(i) * n;
                    for (int j = 0; j < n; ++j) {
                        double w = coef * arow[j] * (di + inv_dy[static_cast<size_t>(j)]);
                        if (j == i) w -= 2.0 * coef; // positive-pair numerator term
                        const double wb = coef * brow[j] * (di + inv_dx[static_cast<size_t>(j)]);
                        const double* yj = yv + static_cast<size_t>(j) * c;
                        const double* xj = xv + static_cast<size_t>(j) * c;
                        for (int k = 0; k < c; ++k) gxi[k] += w * yj[k] + wb * xj[k];
                    }
                }
            }
            if (yi_impl->grad_active) {
                double* gy_out = yi_impl->grad.data();
                for (int j = 0; j < n; ++j) {
                    double* gyj = gy_out + static_cast<size_t>(j) * c;
                    const double dj = inv_dy[static_cast<size_t>(j)];
                    const double* crow = within_y->data() + static_cast<size_t>(j) * n;
                    for (int i = 0; i < n; ++i) {
                        double w = coef * (*cross)[static_cast<size_t>(i) * n + j] *
                                   (inv_dx[static_cast<size_t>(i)] + dj);
                        if (i == j) w -= 2.0 * coef;
                        const double wc = coef * crow[i] * (dj + inv_dy[static_cast<size_t>(i)]);
                        const double* xi = xv + static_cast<size_t>(i) * c;
                        const double* yi = yv + static_cast<size_t>(i) * c;
                        for (int k = 0; k < c; ++k) gyj[k] += w * xi[k] + wc * yi[k];
                    }
                }
            }
        });
    }
    return out;
}

} // namespace

Tensor nt_xent(const Tensor& h, const Tensor& h_other, const ContrastiveConfig& cfg) {
    cfg.validate();
    if (h.rows() != h_other.rows() || h.cols() != h_other.cols())
        throw ContractError("nt_xent: representation shapes differ");
    if (h.rows() < 1) throw ContractError("nt_xent: empty representations");
    Tensor a = h, b = h_other;
    if (cfg.sim_head) {
        a = cfg.sim_head->forward(a);
        b = cfg.sim_head->forward(b);
    }
    return nt_xent_core(row_l2_normalize(a), row_l2_normalize(b), cfg.tau);
}

double nt_xent_pair(int i, const Tensor& h, const Tensor& h_other, const ContrastiveConfig& cfg) {
    cfg.validate();
    if (h.rows() != h_other.rows() || h.cols() != h_other.cols())
        throw ContractError("nt_xent_pair: representation shapes differ");
    const int n = h.rows();
    if (i < 0 || i >= n) throw ContractError("nt_xent_pair: index out of range");
    Tape::Scope pure(nullptr); // diagnostic helper, never recorded
    Tensor a = h.detached_copy(), b = h_other.detached_copy();
    if (cfg.sim_head) {
        a = cfg.sim_head->forward(a);
        b = cfg.sim_head->forward(b);
    }
    a = row_l2_normalize(a);
    b = row_l2_normalize(b);
    const int c = a.cols();
    auto dot = [&](const Tensor& u, int r, const Tensor& v, int s) {
        double acc = 0.0;
        for (int k = 0; k < c; ++k) acc += u(r, k) * v(s, k);
        return acc;
    };
    const double inv_tau = 1.0 / cfg.tau;
    double denom = 0.0;
    for (int j = 0; j < n; ++j) denom += std::exp(dot(a, i, b, j) * inv_tau);
    for (int j = 0; j < n; ++j)
        if (j != i) denom += std::exp(dot(a, i, a, j) * inv_tau);
    return -(dot(a, i, b, i) * inv_tau - std::log(denom));
}

// ------------------------------ LossBalancer ----------------------------------

LossBalancer::LossBalancer(double balance_lr, double gamma) : lr_(balance_lr), gamma_(gamma) {
    if (lr_ < 0.0 || lr_ > 1.0) throw ContractError("balancer: lr must lie in [0, 1]");
    if (!(gamma_ > 0.0)) throw ContractError("balancer: gamma must be positive");
}

std::pair<double, double> LossBalancer::coefficients(int epoch, double loss_hard,
                                                     double loss_soft) {
    if (!std::isfinite(loss_hard) || !std::isfinite(loss_soft) || loss_hard <= 0.0 ||
        loss_soft <= 0.0)
        throw TrainError("balancer: loss values must be positive and finite (got " +
                         std::to_string(loss_hard) + ", " + std::to_string(loss_soft) + ")");
    if (epoch == 0) {
        hard0_ = loss_hard;
        soft0_ = loss_soft;
        alpha_prev_ = 0.5;
        return {0.5, 0.5};
    }
    if (!initialized()) throw TrainError("balancer: initial losses not recorded");
    const double rel_hard = std::pow(loss_hard / hard0_, gamma_);
    const double rel_soft = std::pow(loss_soft / soft0_, gamma_);
    const double alpha = lr_ * rel_hard / (rel_hard + rel_soft) + (1.0 - lr_) * alpha_prev_;
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw TrainError("balancer: coefficient left [0, 1]: " + std::to_string(alpha));
    alpha_prev_ = alpha;
    return {alpha, 1.0 - alpha};
}

Tensor combine_losses(const Tensor& hard, const Tensor& soft, double alpha, double beta) {
    if (hard.size() != 1 || soft.size() != 1)
        throw ContractError("combine_losses: loss terms must be scalars");
    if (!(alpha >= 0.0 && alpha <= 1.0 && beta >= 0.0 && beta <= 1.0) || alpha + beta != 1.0)
        throw ContractError("combine_losses: coefficients must be in [0, 1] and sum to 1");
    return add(scale(hard, alpha), scale(soft, beta));
}

} // namespace fairgkd
