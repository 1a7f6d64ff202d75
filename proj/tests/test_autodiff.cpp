#include <catch2/catch_amalgamated.hpp>

#include "uafuse/gradcheck.hpp"
#include "uafuse/ops.hpp"

using namespace uafuse;

TEST_CASE("grad of sum(x) is all ones") {
    Tensor<double> x({3, 2, 2}, 0.7);
    Tape<double> tape;
    auto xt = tape.leaf(x);
    auto loss = sum_all(xt);
    tape.backward(loss);
    auto g = tape.grad(xt);
    REQUIRE(g.size() == 12);
    for (double v : g) CHECK(v == 1.0);
}

TEST_CASE("grad of sum(x*x)/2 is x") {
    Tensor<double> x({2, 3}, {0.5, -1.0, 2.0, 0.0, 3.5, -0.25});
    Tape<double> tape;
    auto xt = tape.leaf(x);
    auto loss = scale(sum_all(mul(xt, xt)), 0.5);
    tape.backward(loss);
    auto g = tape.grad(xt);
    for (std::int64_t i = 0; i < x.numel(); ++i) CHECK(g[static_cast<std::size_t>(i)] == Catch::Approx(x[i]));
}

TEST_CASE("backward rejects a non-scalar loss") {
    Tensor<double> x({2, 2}, 1.0);
    Tape<double> tape;
    auto xt = tape.leaf(x);
    auto y = relu(xt);
    REQUIRE_THROWS_AS(tape.backward(y), std::invalid_argument);
}

TEST_CASE("a second backward without a fresh forward is an error") {
    Tensor<double> x({2, 2}, 1.0);
    Tape<double> tape;
    auto xt = tape.leaf(x);
    auto loss = sum_all(xt);
    tape.backward(loss);
    REQUIRE_THROWS_AS(tape.backward(loss), std::logic_error);
}

TEST_CASE("untracked tensors accumulate no gradient") {
    Tensor<double> x({4}, 2.0);
    Tensor<double> c({4}, 3.0); // constant operand
    Tape<double> tape;
    auto xt = tape.leaf(x);
    auto loss = sum_all(mul(xt, c));
    tape.backward(loss);
    CHECK_FALSE(c.requires_grad());
    auto g = tape.grad(xt);
    for (double v : g) CHECK(v == 3.0);
}

TEST_CASE("gradients flow through an op chain") {
    // d/dx sum(sigmoid(relu(x) * 2)) at x = 1: sigmoid'(2) * 2
    Tensor<double> x({1}, {1.0});
    Tape<double> tape;
    auto xt = tape.leaf(x);
    auto loss = sum_all(sigmoid(scale(relu(xt), 2.0)));
    tape.backward(loss);
    const double s = 1.0 / (1.0 + std::exp(-2.0));
    CHECK(tape.grad(xt)[0] == Catch::Approx(2.0 * s * (1.0 - s)).epsilon(1e-12));
}

TEST_CASE("detached tensors share values but drop the tape binding") {
    Tensor<double> x({3}, 1.5);
    Tape<double> tape;
    auto xt = tape.leaf(x);
    auto d = xt.detached();
    CHECK_FALSE(d.requires_grad());
    CHECK(d.data == xt.data);
}

TEST_CASE("every registered op passes central finite differences over 20 seeds") {
    auto reports = run_gradcheck(20, 1e-4, 1e-3);
    REQUIRE(reports.size() >= 15);
    for (const auto& r : reports) {
        INFO(r.op << " max err " << r.max_err);
        CHECK(r.pass);
    }
}
