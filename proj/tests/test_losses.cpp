#include "doctest.h"
#include "oracles.hpp"

#include "fairgkd/losses.hpp"

#include <cmath>

using namespace fairgkd;

namespace {

/// Rows spanning disjoint 2-D subspaces: every cross similarity is exactly 0
/// and the positive similarity of pair i is cos(theta_i). Lets the positive
/// similarity move while all negatives stay pinned.
std::pair<Tensor, Tensor> orthogonal_pair_instance(const std::vector<double>& thetas) {
    const int n = static_cast<int>(thetas.size());
    Tensor h(n, 2 * n);
    Tensor h_other(n, 2 * n);
    for (int i = 0; i < n; ++i) {
        h(i, 2 * i) = 1.0;
        h_other(i, 2 * i) = std::cos(thetas[static_cast<size_t>(i)]);
        h_other(i, 2 * i + 1) = std::sin(thetas[static_cast<size_t>(i)]);
    }
    return {h, h_other};
}

Tensor constant_rows(int n, std::vector<double> row) {
    Tensor t(n, static_cast<int>(row.size()));
    for (int i = 0; i < n; ++i)
        for (size_t j = 0; j < row.size(); ++j) t(i, static_cast<int>(j)) = row[j];
    return t;
}

} // namespace

TEST_SUITE_BEGIN("losses");

TEST_CASE("bce: 0.5-constant predictor equals ln 2") {
    Tensor p = constant_rows(4, {0.5});
    std::vector<int8_t> labels = {1, 0, 1, 0};
    std::vector<int> mask = {0, 1, 2, 3};
    CHECK(std::abs(bce(p, labels, mask).item() - std::log(2.0)) < 1e-12);
}

TEST_CASE("bce: perfect predictor is (clamped) zero") {
    Tensor p = Tensor::from_rows({{1.0}, {0.0}, {1.0}});
    std::vector<int8_t> labels = {1, 0, 1};
    std::vector<int> mask = {0, 1, 2};
    CHECK(bce(p, labels, mask).item() == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("bce: single node direct evaluation") {
    Tensor p = Tensor::from_rows({{0.9}});
    std::vector<int8_t> labels = {1};
    std::vector<int> mask = {0};
    CHECK(bce(p, labels, mask).item() == doctest::Approx(-std::log(0.9)).epsilon(1e-12));
}

TEST_CASE("bce: mean is over the mask only") {
    Tensor p = Tensor::from_rows({{0.9}, {0.123}, {0.5}});
    std::vector<int8_t> labels = {1, 1, 0};
    std::vector<int> mask = {0, 2};
    const double expected = (-std::log(0.9) - std::log(0.5)) / 2.0;
    CHECK(bce(p, labels, mask).item() == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("bce: empty mask and unlabeled nodes are errors") {
    Tensor p = constant_rows(2, {0.5});
    std::vector<int8_t> labels = {1, -1};
    CHECK_THROWS_AS((void)bce(p, labels, std::vector<int>{}), ContractError);
    CHECK_THROWS_AS((void)bce(p, labels, std::vector<int>{1}), ContractError);
}

TEST_CASE("nt_xent: uniform similarity gives log(2n - 1) for n in {2, 5, 50}") {
    for (int n : {2, 5, 50}) {
        const Tensor h = constant_rows(n, {0.3, 0.4});
        for (double tau : {0.5, 0.9}) {
            ContrastiveConfig cfg{tau, std::nullopt};
            const double loss = nt_xent(h, h, cfg).item();
            CHECK(std::abs(loss - std::log(2.0 * n - 1.0)) < 1e-9);
        }
    }
}

TEST_CASE("nt_xent_pair: n=2 with positive sim 1 and negatives -1 at tau 0.5") {
    // antipodal unit vectors realize sim(+pair) = 1, every negative -1
    Tensor h = Tensor::from_rows({{1.0, 0.0}, {-1.0, 0.0}});
    ContrastiveConfig cfg{0.5, std::nullopt};
    const double expected = std::log(1.0 + 2.0 * std::exp(-4.0)); // 0.035972...
    CHECK(nt_xent_pair(0, h, h, cfg) == doctest::Approx(expected).epsilon(1e-9));
    CHECK(nt_xent_pair(1, h, h, cfg) == doctest::Approx(expected).epsilon(1e-9));
    CHECK(expected == doctest::Approx(0.035972).epsilon(1e-4));
    // every term equals the pair value, so the mean does too
    CHECK(nt_xent(h, h, cfg).item() == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("nt_xent: identical orthonormal rows at tau 1") {
    Tensor h = Tensor::from_rows({{1.0, 0.0}, {0.0, 1.0}});
    ContrastiveConfig cfg{1.0, std::nullopt};
    const double expected = -std::log(std::exp(1.0) / (std::exp(1.0) + 2.0)); // 0.551445...
    CHECK(nt_xent(h, h, cfg).item() == doctest::Approx(expected).epsilon(1e-9));
    CHECK(expected == doctest::Approx(0.551445).epsilon(1e-4));
}

TEST_CASE("nt_xent: symmetric in its arguments") {
    Rng rng(31);
    for (int k = 0; k < 20; ++k) {
        const int n = 2 + static_cast<int>(rng.below(5));
        const int c = 2 + static_cast<int>(rng.below(4));
        const Tensor a = testutil::random_tensor(n, c, rng, false, 0.2, 2.0);
        const Tensor b = testutil::random_tensor(n, c, rng, false, 0.2, 2.0);
        ContrastiveConfig cfg{0.4 + rng.uniform() * 0.6, std::nullopt};
        CHECK(nt_xent(a, b, cfg).item() == doctest::Approx(nt_xent(b, a, cfg).item()).epsilon(1e-12));
    }
}

TEST_CASE("nt_xent: nonnegative on random instances") {
    Rng rng(32);
    for (int k = 0; k < 100; ++k) {
        const int n = 2 + static_cast<int>(rng.below(8));
        const int c = 2 + static_cast<int>(rng.below(6));
        const Tensor a = testutil::random_tensor(n, c, rng, false, 0.2, 2.0);
        const Tensor b = testutil::random_tensor(n, c, rng, false, 0.2, 2.0);
        ContrastiveConfig cfg{0.1 + rng.uniform() * 0.9, std::nullopt};
        CHECK(nt_xent(a, b, cfg).item() >= 0.0);
    }
}

TEST_CASE("nt_xent: decreases as the positive similarity rises, negatives fixed") {
    // theta of pair 0 shrinks -> cos rises -> loss must strictly drop
    ContrastiveConfig cfg{0.5, std::nullopt};
    double previous = std::numeric_limits<double>::infinity();
    for (double theta : {1.2, 0.9, 0.6, 0.3}) {
        const auto [h, h_other] = orthogonal_pair_instance({theta, 0.8, 1.0});
        const double loss = nt_xent(h, h_other, cfg).item();
        CHECK(loss < previous);
        previous = loss;
    }
}

TEST_CASE("nt_xent: zero rows are rejected") {
    Tensor h = Tensor::from_rows({{1.0, 0.0}, {0.0, 0.0}});
    ContrastiveConfig cfg{0.5, std::nullopt};
    CHECK_THROWS_AS((void)nt_xent(h, h, cfg), ContractError);
}

TEST_CASE("nt_xent: invalid temperature is rejected") {
    Tensor h = Tensor::from_rows({{1.0, 0.0}});
    CHECK_THROWS_AS((void)nt_xent(h, h, ContrastiveConfig{0.0, std::nullopt}), ContractError);
    CHECK_THROWS_AS((void)nt_xent(h, h, ContrastiveConfig{-1.0, std::nullopt}), ContractError);
}

TEST_CASE("nt_xent: optional sim head changes the value and stays finite") {
    Rng rng(33);
    const Tensor a = testutil::random_tensor(4, 3, rng, false, 0.2, 2.0);
    const Tensor b = testutil::random_tensor(4, 3, rng, false, 0.2, 2.0);
    ContrastiveConfig plain{0.5, std::nullopt};
    ContrastiveConfig headed{0.5, std::nullopt};
    Rng head_rng(34);
    headed.sim_head = Linear(3, 3, head_rng);
    const double with_head = nt_xent(a, b, headed).item();
    CHECK(std::isfinite(with_head));
    CHECK(with_head != nt_xent(a, b, plain).item());
}

TEST_CASE("balancer: worked example alpha = 1/3") {
    LossBalancer balancer(1.0, 1.0);
    balancer.coefficients(0, 2.0, 3.0); // initial losses
    // relative losses 0.5 and 1.0
    const auto [alpha, beta] = balancer.coefficients(1, 1.0, 3.0);
    CHECK(std::abs(alpha - 1.0 / 3.0) < 1e-12);
    CHECK(std::abs(beta - 2.0 / 3.0) < 1e-12);
    CHECK(alpha + beta == 1.0);
}

TEST_CASE("balancer: equal relative losses with lr 1 give 0.5/0.5") {
    LossBalancer balancer(1.0, 2.0);
    balancer.coefficients(0, 4.0, 0.5);
    const auto [alpha, beta] = balancer.coefficients(1, 2.0, 0.25);
    CHECK(alpha == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(beta == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("balancer: lr 0 keeps alpha constant") {
    LossBalancer balancer(0.0, 1.0);
    balancer.coefficients(0, 1.0, 1.0);
    for (int t = 1; t <= 5; ++t) {
        const auto [alpha, beta] = balancer.coefficients(t, 0.01 * t, 3.0 * t);
        CHECK(alpha == 0.5);
        CHECK(beta == 0.5);
    }
}

TEST_CASE("balancer: epoch 0 returns 0.5/0.5 and records the floors") {
    LossBalancer balancer(1.0, 0.1);
    const auto [alpha, beta] = balancer.coefficients(0, 0.7, 1.3);
    CHECK(alpha == 0.5);
    CHECK(beta == 0.5);
    CHECK(balancer.initialized());
}

TEST_CASE("balancer: monotone disadvantage, alpha nondecreasing in the hard relative loss") {
    // holding the soft term fixed with lr = 1, a slower-decreasing hard loss
    // must never receive a smaller coefficient
    for (double gamma : {0.1, 1.0, 3.0}) {
        double previous = -1.0;
        for (double rel_hard : {0.1, 0.3, 0.5, 0.8, 1.0}) {
            LossBalancer balancer(1.0, gamma);
            balancer.coefficients(0, 1.0, 1.0);
            const auto [alpha, beta] = balancer.coefficients(1, rel_hard, 0.6);
            CHECK(alpha >= previous);
            CHECK(alpha + beta == 1.0);
            previous = alpha;
        }
    }
}

TEST_CASE("balancer: error paths") {
    LossBalancer fresh(1.0, 1.0);
    CHECK_THROWS_AS(fresh.coefficients(1, 1.0, 1.0), TrainError); // floors not set
    LossBalancer balancer(1.0, 1.0);
    balancer.coefficients(0, 1.0, 1.0);
    CHECK_THROWS_AS(balancer.coefficients(1, -0.5, 1.0), TrainError);
    CHECK_THROWS_AS(balancer.coefficients(1, 0.0, 1.0), TrainError);
    CHECK_THROWS_AS(LossBalancer(1.5, 1.0), ContractError);
    CHECK_THROWS_AS(LossBalancer(0.5, 0.0), ContractError);
}

TEST_CASE("combine_losses arithmetic and contract") {
    Tensor hard = Tensor::scalar(0.6);
    Tensor soft = Tensor::scalar(1.0);
    CHECK(combine_losses(hard, soft, 0.5, 0.5).item() == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(combine_losses(hard, soft, 1.0, 0.0).item() == 0.6);
    CHECK(combine_losses(hard, soft, 0.0, 1.0).item() == 1.0);
    CHECK_THROWS_AS((void)combine_losses(hard, soft, 0.7, 0.7), ContractError);
}

TEST_CASE("combine_losses: gradients flow through both terms, scaled") {
    Tensor a = Tensor::scalar(2.0).set_requires_grad(true);
    Tensor b = Tensor::scalar(5.0).set_requires_grad(true);
    Tape tape;
    {
        Tape::Scope scope(tape);
        backward(combine_losses(a, b, 0.25, 0.75));
    }
    CHECK(a.grad()[0] == 0.25);
    CHECK(b.grad()[0] == 0.75);
}

TEST_SUITE_END();
