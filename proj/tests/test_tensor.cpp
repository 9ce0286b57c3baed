#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "rangan/optimizer.hpp"
#include "rangan/tensor.hpp"
#include "support/gradient_suite.hpp"
#include "support/oracles.hpp"

using namespace rangan;

TEST_CASE("matmul identity and analytic cases") {
    Tape tape;
    Tensor eye({2, 2}, {1, 0, 0, 1});
    Tensor b({2, 2}, {3, 4, 5, 6});
    Tensor out = tape.matmul(eye, b);
    CHECK(out.data()[0] == 3.0);
    CHECK(out.data()[1] == 4.0);
    CHECK(out.data()[2] == 5.0);
    CHECK(out.data()[3] == 6.0);

    Tensor row({1, 2}, {1, 2});
    Tensor col({2, 1}, {3, 4});
    CHECK(tape.matmul(row, col).value() == 11.0);
}

TEST_CASE("matmul shape mismatch names both shapes") {
    Tape tape;
    Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor b({2, 2}, {1, 2, 3, 4});
    try {
        tape.matmul(a, b);
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2x3]") != std::string::npos);
        CHECK(msg.find("[2x2]") != std::string::npos);
    }
}

TEST_CASE("gradient of sum(matmul(A,B)) matches finite differences") {
    Rng rng(11);
    std::vector<Tensor> leaves{gradcheck::random_tensor({3, 3}, rng),
                               gradcheck::random_tensor({3, 3}, rng)};
    const double err = oracle::max_gradient_error(
        leaves, [](Tape& t, std::vector<Tensor>& l) { return t.sum(t.matmul(l[0], l[1])); });
    CHECK(err < 1e-4);
}

TEST_CASE("softmax basics") {
    Tape tape;
    Tensor x({3}, {0, 0, 0});
    Tensor s = tape.softmax(x, 0);
    for (double v : s.data()) CHECK(v == doctest::Approx(1.0 / 3));

    Tensor big({2}, {1000, 0});
    Tensor sb = tape.softmax(big, 0);
    CHECK(std::isfinite(sb.data()[0]));
    CHECK(sb.data()[0] == doctest::Approx(1.0));
    CHECK(sb.data()[1] == doctest::Approx(0.0));
}

TEST_CASE("softmax slices sum to one and shift invariance") {
    Rng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor x = gradcheck::random_tensor({4, 7}, rng, -4, 4, false);
        Tape tape;
        Tensor s = tape.softmax(x, 1);
        for (int i = 0; i < 4; ++i) {
            double total = 0;
            for (int j = 0; j < 7; ++j) total += s.at({i, j});
            CHECK(std::abs(total - 1.0) < 1e-9);
        }
        const double c = rng.uniform(-5, 5);
        Tensor shifted = tape.scale(x, 1.0);
        for (auto& v : shifted.data_mut()) v += c;
        Tensor s2 = tape.softmax(shifted, 1);
        for (std::size_t i = 0; i < s.numel(); ++i)
            CHECK(std::abs(s.data()[i] - s2.data()[i]) < 1e-9);
    }
}

TEST_CASE("layer_norm edge rows") {
    Tape tape;
    Tensor gamma({3}, {1, 1, 1});
    Tensor beta({3}, {0, 0, 0});
    Tensor ones({1, 3}, {1, 1, 1});
    Tensor out = tape.layer_norm(ones, gamma, beta);
    for (double v : out.data()) CHECK(v == doctest::Approx(0.0));

    Tensor gamma2({2}, {1, 1});
    Tensor beta2({2}, {0, 0});
    Tensor pm({1, 2}, {-1, 1});
    Tensor out2 = tape.layer_norm(pm, gamma2, beta2, 1e-5);
    const double factor = 1.0 / std::sqrt(1.0 + 1e-5);
    CHECK(out2.data()[0] == doctest::Approx(-factor));
    CHECK(out2.data()[1] == doctest::Approx(factor));
}

TEST_CASE("elementwise basics and errors") {
    Tape tape;
    CHECK(tape.sigmoid(Tensor::scalar(0.0)).value() == doctest::Approx(0.5));
    Tensor r = tape.relu(Tensor({2}, {-2, 3}));
    CHECK(r.data()[0] == 0.0);
    CHECK(r.data()[1] == 3.0);
    CHECK_THROWS_AS(tape.add(Tensor({2}, {1, 2}), Tensor({3}, {1, 2, 3})), DimensionError);
    // scalar broadcast is the one permitted mismatch
    Tensor s = tape.add(Tensor({2}, {1, 2}), Tensor::scalar(10));
    CHECK(s.data()[1] == 12.0);
}

TEST_CASE("sigmoid is stable for very negative input") {
    Tape tape;
    Tensor out = tape.sigmoid(Tensor({2}, {-745.0, 745.0}));
    CHECK(std::isfinite(out.data()[0]));
    CHECK(out.data()[0] >= 0.0);
    CHECK(out.data()[1] <= 1.0);
}

TEST_CASE("bce analytic values") {
    Tape tape;
    Tensor half = Tensor::scalar(0.5);
    CHECK(tape.bce_loss(half, Tensor::scalar(1.0)).value() == doctest::Approx(std::log(2.0)));
    Tensor p({2}, {0.3, 0.8});
    CHECK(tape.bce_loss(p, p).value() < 1.0);  // matching targets: small, eps-bounded
    Tensor exact({2}, {0.0, 1.0});
    CHECK(tape.bce_loss(exact, exact).value() < 1e-6);
}

TEST_CASE("backward contract errors") {
    Tape tape;
    Tensor x({2}, {1, 2}, true);
    Tensor y = tape.scale(x, 2.0);
    CHECK_THROWS_AS(tape.backward(y), ContractError);  // non-scalar

    Tape other;
    Tensor loss = tape.sum(y);
    CHECK_THROWS_AS(other.backward(loss), ContractError);  // foreign tape

    tape.backward(loss);
    CHECK_THROWS_AS(tape.backward(loss), ContractError);  // second walk
}

TEST_CASE("gradient accumulation across multiple uses") {
    Tensor x({3}, {0.5, -1.0, 2.0}, true);
    {
        Tape tape;
        Tensor loss = tape.add(tape.sum(x), tape.sum(tape.mul(x, x)));
        tape.backward(loss);
    }
    // d/dx (sum x + sum x^2) = 1 + 2x
    CHECK(x.grad()[0] == doctest::Approx(1.0 + 2 * 0.5));
    CHECK(x.grad()[1] == doctest::Approx(1.0 - 2.0));
    CHECK(x.grad()[2] == doctest::Approx(1.0 + 4.0));
}

TEST_CASE("gradient suite: every op vs finite differences") {
    for (const auto& r : gradcheck::run_all(5)) {
        INFO(r.op);
        CHECK(r.worst_err < 1e-4);
    }
}

TEST_CASE("adam first step moves by about lr, zero grad holds still") {
    Tensor p = Tensor::scalar(1.0, true);
    AdamConfig cfg;
    cfg.learning_rate = 0.1;
    AdamOptimizer opt({p}, cfg);
    p.grad_mut()[0] = 1.0;
    opt.step();
    CHECK(p.value() == doctest::Approx(0.9).epsilon(1e-4));
    CHECK(opt.step_count() == 1);

    // zero gradient from a fresh state: both moments stay zero, no movement
    Tensor q = Tensor::scalar(4.0, true);
    AdamOptimizer fresh({q}, cfg);
    fresh.step();
    CHECK(q.value() == 4.0);
}

TEST_CASE("adam converges on a convex quadratic") {
    Tensor p = Tensor::scalar(0.0, true);
    AdamConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.beta1 = 0.9;
    AdamOptimizer opt({p}, cfg);
    for (int i = 0; i < 200; ++i) {
        Tape tape;
        Tensor diff = tape.sub(p, Tensor::scalar(3.0));
        Tensor loss = tape.mul(diff, diff);
        tape.backward(loss);
        opt.step();
    }
    CHECK(std::abs(p.value() - 3.0) < 0.05);
}

TEST_CASE("rng determinism and bit-identical init") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng r1(7), r2(7);
    Tensor w1 = Tensor::glorot_uniform(13, 7, r1);
    Tensor w2 = Tensor::glorot_uniform(13, 7, r2);
    for (std::size_t i = 0; i < w1.numel(); ++i) CHECK(w1.data()[i] == w2.data()[i]);

    Rng c = Rng(9).child(3), d = Rng(9).child(4);
    CHECK(c.next_u64() != d.next_u64());
}

TEST_CASE("tensor invariants") {
    CHECK_THROWS_AS(Tensor({2, 3}, {1.0, 2.0}), DimensionError);
    CHECK_THROWS_AS(Tensor({0}, {}), DimensionError);
    Tensor t({2, 2}, {1, 2, 3, 4});
    CHECK(t.numel() == 4);
    CHECK(t.at({1, 0}) == 3.0);
    Tensor d = t.detach();
    CHECK_FALSE(d.requires_grad());
    d.data_mut()[0] = 99;
    CHECK(t.data()[0] == 1.0);  // detach copies
}
