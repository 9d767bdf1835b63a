#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "afgn/errors.hpp"
#include "afgn/tensor.hpp"

using namespace afgn;

TEST_CASE("forward values") {
    SUBCASE("softmax of (0,0) is (0.5,0.5) and rows sum to one") {
        Tensor x = Tensor::row({0.0, 0.0});
        Tensor s = softmax_row(x);
        CHECK(s.at(0, 0) == doctest::Approx(0.5));
        CHECK(s.at(0, 1) == doctest::Approx(0.5));

        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> dist(-5, 5);
        for (int rep = 0; rep < 20; ++rep) {
            std::vector<double> vals(7);
            for (double& v : vals) v = dist(rng);
            Tensor row = softmax_row(Tensor::row(vals));
            double total = 0.0;
            for (double v : row.values()) {
                CHECK(v > 0.0);
                total += v;
            }
            CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
    SUBCASE("matmul with identity") {
        Tensor x = Tensor::from_values(2, 2, {1, 2, 3, 4});
        Tensor eye = Tensor::from_values(2, 2, {1, 0, 0, 1});
        Tensor y = matmul(eye, x);
        CHECK(y.values() == x.values());
    }
    SUBCASE("gathered log-softmax matches a hand-computed log-probability") {
        // logits (1, 0, -1): p_k = e^{z_k} / (e + 1 + 1/e)
        Tensor z = Tensor::row({1.0, 0.0, -1.0});
        Tensor lp = gather_row(log_softmax_row(z), {1});
        const double denom = std::exp(1.0) + 1.0 + std::exp(-1.0);
        CHECK(lp.item() == doctest::Approx(std::log(1.0 / denom)).epsilon(1e-12));
    }
    SUBCASE("shape mismatch names the op and shapes") {
        Tensor a = Tensor::zeros(2, 3);
        Tensor b = Tensor::zeros(2, 3);
        CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("matmul"), NumericError);
        CHECK_THROWS_WITH_AS(add(a, Tensor::zeros(3, 2)), doctest::Contains("2x3"),
                             NumericError);
    }
}

TEST_CASE("backward basics") {
    SUBCASE("sum gives all-ones gradient") {
        Tensor x = Tensor::from_values(2, 2, {1, 2, 3, 4}, true);
        backward(sum(x));
        for (double g : x.grad()) CHECK(g == 1.0);
    }
    SUBCASE("sum of squares gives 2x") {
        Tensor x = Tensor::from_values(1, 3, {1, -2, 3}, true);
        backward(sum(hadamard(x, x)));
        CHECK(x.grad()[0] == doctest::Approx(2.0));
        CHECK(x.grad()[1] == doctest::Approx(-4.0));
        CHECK(x.grad()[2] == doctest::Approx(6.0));
    }
    SUBCASE("repeated backward without rebuilding is an error") {
        Tensor x = Tensor::from_values(1, 1, {2.0}, true);
        Tensor loss = sum(x);
        backward(loss);
        CHECK_THROWS_AS(backward(loss), NumericError);
    }
    SUBCASE("non-scalar loss is an error") {
        Tensor x = Tensor::from_values(1, 3, {1, 2, 3}, true);
        CHECK_THROWS_AS(backward(x), NumericError);
    }
    SUBCASE("concat splits gradients exactly") {
        Tensor a = Tensor::from_values(1, 2, {1, 2}, true);
        Tensor b = Tensor::from_values(1, 3, {3, 4, 5}, true);
        Tensor weights = Tensor::row({10, 20, 30, 40, 50});
        backward(sum(hadamard(concat_cols(a, b), weights)));
        CHECK(a.grad() == std::vector<double>{10, 20});
        CHECK(b.grad() == std::vector<double>{30, 40, 50});
    }
}

TEST_CASE("finite difference checks") {
    SUBCASE("quadratic is near-exact") {
        Tensor x = Tensor::from_values(1, 4, {0.3, -1.2, 2.0, 0.7}, true);
        auto f = [&] { return sum(hadamard(x, x)); };
        CHECK(finite_diff_check(f, {x}) < 1e-9);
    }
    SUBCASE("composite with nonlinearity") {
        Tensor w = Tensor::from_values(3, 2, {0.1, -0.2, 0.3, 0.4, -0.5, 0.6}, true);
        Tensor b = Tensor::from_values(1, 2, {0.05, -0.1}, true);
        Tensor x = Tensor::row({1.0, -1.0, 0.5});
        auto f = [&] {
            Tensor h = tanh_op(add(matmul(x, w), b));
            Tensor p = log_softmax_row(hadamard(sigmoid(h), exp_op(scale(h, 0.5))));
            return sum(gather_row(p, {1}));
        };
        CHECK(finite_diff_check(f, {w, b}) < 1e-6);
    }
}

TEST_CASE("adam") {
    SUBCASE("zero gradient leaves parameters unchanged") {
        Tensor p = Tensor::from_values(1, 2, {1.0, -2.0}, true);
        AdamOptimizer opt({p}, {});
        opt.zero_grad();
        opt.step();
        CHECK(p.values() == std::vector<double>{1.0, -2.0});
    }
    SUBCASE("first step moves by about lr") {
        Tensor p = Tensor::from_values(1, 1, {1.0}, true);
        AdamOptimizer::Config cfg;
        cfg.learning_rate = 0.1;
        AdamOptimizer opt({p}, cfg);
        opt.zero_grad();
        backward(sum(p));  // gradient 1
        opt.step();
        CHECK(p.values()[0] == doctest::Approx(0.9).epsilon(1e-6));
        CHECK(opt.step_count() == 1);
    }
    SUBCASE("lr=0 is the identity") {
        Tensor p = Tensor::from_values(1, 1, {3.0}, true);
        AdamOptimizer::Config cfg;
        cfg.learning_rate = 0.0;
        AdamOptimizer opt({p}, cfg);
        opt.zero_grad();
        backward(sum(hadamard(p, p)));
        opt.step();
        CHECK(p.values()[0] == 3.0);
    }
    SUBCASE("two identical runs agree bit for bit") {
        auto run = [] {
            Tensor p = Tensor::from_values(1, 3, {0.5, -0.5, 1.5}, true);
            AdamOptimizer opt({p}, {});
            for (int i = 0; i < 25; ++i) {
                opt.zero_grad();
                backward(sum(hadamard(p, p)));
                opt.step();
            }
            return p.values();
        };
        CHECK(run() == run());
    }
}
