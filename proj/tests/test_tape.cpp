#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "amodrl/tape.hpp"

#include "helpers.hpp"

using namespace amodrl;

TEST_CASE("forward values of elementwise ops", "[tape]") {
  Tape t;
  Tensor x = Tensor::zeros(1, 3);
  x.data = {-1.0, 0.0, 2.0};
  Var v = t.input(x, false);
  REQUIRE(t.value(t.relu(v)).data == std::vector<double>{0.0, 0.0, 2.0});
  REQUIRE(t.value(t.neg(v)).data == std::vector<double>{1.0, 0.0, -2.0});
  REQUIRE(t.value(t.add_scalar(v, 1.0)).data == std::vector<double>{0.0, 1.0, 3.0});
  REQUIRE(t.value(t.mul_scalar(v, -2.0)).data == std::vector<double>{2.0, 0.0, -4.0});
  REQUIRE(t.value(t.sigmoid(v))(0, 1) == 0.5);
  REQUIRE(t.value(t.tanh(v))(0, 2) == Catch::Approx(std::tanh(2.0)).epsilon(1e-15));
  Tensor lk = t.value(t.leaky_relu(v, 0.2));
  REQUIRE(lk.data == std::vector<double>{-0.2, 0.0, 2.0});
}

TEST_CASE("matmul gradient equals cotangent outer products", "[tape]") {
  // y = sum(A B): dy/dA = 1 B^T, dy/dB = A^T 1.
  Parameter a("a", Tensor::zeros(2, 2)), b("b", Tensor::zeros(2, 2));
  a.value.data = {1, 2, 3, 4};
  b.value.data = {5, 6, 7, 8};
  Tape t;
  Var y = t.sum_all(t.matmul(t.param(a), t.param(b)));
  t.backward(y);
  // rows of B^T summed: dy/dA_ij = sum_k B_jk
  REQUIRE(a.grad.data == std::vector<double>{11, 15, 11, 15});
  REQUIRE(b.grad.data == std::vector<double>{4, 4, 6, 6});
}

TEST_CASE("parameter reuse accumulates gradient over both paths", "[tape]") {
  Parameter x("x", Tensor::scalar(3.0));
  Tape t;
  Var vx = t.param(x);
  Var vx2 = t.param(x);  // memoized: same node
  REQUIRE(vx.id == vx2.id);
  Var y = t.sum_all(t.add(t.mul(vx, vx), vx));  // y = x^2 + x
  t.backward(y);
  REQUIRE(x.grad(0, 0) == Catch::Approx(7.0).epsilon(1e-15));  // 2x + 1
}

TEST_CASE("chain through sigmoid matches the analytic derivative", "[tape]") {
  Parameter x("x", Tensor::scalar(0.3));
  Tape t;
  Var y = t.sum_all(t.sigmoid(t.param(x)));
  t.backward(y);
  const double s = 1.0 / (1.0 + std::exp(-0.3));
  REQUIRE(x.grad(0, 0) == Catch::Approx(s * (1.0 - s)).epsilon(1e-12));
}

TEST_CASE("row_softmax rows are stochastic and respect the mask", "[tape]") {
  Tape t;
  Tensor x = Tensor::zeros(2, 3);
  x.data = {1.0, 2.0, 3.0, -1.0, 0.0, 1.0};
  std::vector<uint8_t> mask = {1, 0, 1, 1, 1, 1};
  Var s = t.row_softmax(t.input(x, false), &mask);
  const Tensor& v = t.value(s);
  REQUIRE(v(0, 1) == 0.0);
  REQUIRE(v(0, 0) + v(0, 2) == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(v(1, 0) + v(1, 1) + v(1, 2) == Catch::Approx(1.0).margin(1e-12));
  // masked entry dominates nothing: softmax over {1,3} only
  REQUIRE(v(0, 2) == Catch::Approx(std::exp(3.0) / (std::exp(1.0) + std::exp(3.0))).epsilon(1e-12));
}

TEST_CASE("fully masked row is degenerate", "[tape]") {
  Tape t;
  Tensor x = Tensor::ones(1, 2);
  std::vector<uint8_t> mask = {0, 0};
  REQUIRE_THROWS_AS(t.row_softmax(t.input(x, false), &mask), DegenerateError);
}

TEST_CASE("sum_pool collapses rows", "[tape]") {
  Tape t;
  Tensor x = Tensor::zeros(3, 2);
  x.data = {1, 2, 3, 4, 5, 6};
  const Tensor& v = t.value(t.sum_pool(t.input(x, false)));
  REQUIRE(v.rows == 1);
  REQUIRE(v.cols == 2);
  REQUIRE(v.data == std::vector<double>{9, 12});
}

TEST_CASE("backward requires a scalar", "[tape]") {
  Tape t;
  Var v = t.input(Tensor::ones(2, 2), true);
  REQUIRE_THROWS_AS(t.backward(v), ContractError);
}

TEST_CASE("finiteness guard raises on overflow to infinity", "[tape]") {
  Tape t;
  t.set_check_finite(true);
  Tensor x = Tensor::scalar(1000.0);  // exp overflows to +inf
  REQUIRE_THROWS_AS(t.exp(t.input(x, false)), NumericError);
  Tape off;  // guard disabled by default: the same op just stores inf
  REQUIRE(std::isinf(off.value(off.exp(off.input(x, false)))(0, 0)));
}

TEST_CASE("add_rowvec broadcasts one row", "[tape]") {
  Tape t;
  Tensor x = Tensor::zeros(2, 3);
  x.data = {1, 2, 3, 4, 5, 6};
  Tensor b = Tensor::zeros(1, 3);
  b.data = {10, 20, 30};
  const Tensor& v = t.value(t.add_rowvec(t.input(x, false), t.input(b, false)));
  REQUIRE(v.data == std::vector<double>{11, 22, 33, 14, 25, 36});
}

TEST_CASE("add_rowvec gradient sums over rows", "[tape]") {
  Parameter b("b", Tensor::zeros(1, 2));
  Tape t;
  Var y = t.sum_all(t.add_rowvec(t.input(Tensor::ones(3, 2), false), t.param(b)));
  t.backward(y);
  REQUIRE(b.grad.data == std::vector<double>{3, 3});
}

TEST_CASE("reshape and transpose roundtrip gradients", "[tape]") {
  Parameter x("x", Tensor::zeros(2, 3));
  x.value.data = {1, 2, 3, 4, 5, 6};
  Tape t;
  Var y = t.sum_all(t.mul(t.transpose(t.reshape(t.param(x), 3, 2)),
                          t.input(Tensor::ones(2, 3), false)));
  t.backward(y);
  REQUIRE(x.grad.data == std::vector<double>(6, 1.0));
}

TEST_CASE("lgamma and digamma ops match the scalar functions", "[tape]") {
  Tape t;
  Tensor x = Tensor::zeros(1, 3);
  x.data = {0.5, 2.0, 7.5};
  Var v = t.input(x, false);
  // Copy out: node creation may reallocate tape storage, so references
  // returned by value() are only valid until the next op.
  const Tensor lg = t.value(t.lgamma(v));
  const Tensor dg = t.value(t.digamma_op(v));
  for (int j = 0; j < 3; ++j) {
    REQUIRE(lg(0, j) == Catch::Approx(log_gamma(x(0, j))).margin(1e-12));
    REQUIRE(dg(0, j) == Catch::Approx(digamma(x(0, j))).margin(1e-12));
  }
}

TEST_CASE("negative control: corrupting a gradient breaks the check", "[tape]") {
  // Guards against the checker itself being vacuous: a deliberately wrong
  // "gradient" must NOT match finite differences.
  Parameter x("x", Tensor::scalar(0.7));
  Tape t;
  Var y = t.sum_all(t.exp(t.param(x)));
  t.backward(y);
  const double correct = x.grad(0, 0);
  REQUIRE(correct == Catch::Approx(std::exp(0.7)).epsilon(1e-12));
  const double h = 1e-6;
  const double fd = (std::exp(0.7 + h) - std::exp(0.7 - h)) / (2.0 * h);
  const double wrong = correct * 1.01;
  REQUIRE(std::abs(correct - fd) / std::abs(fd) < 1e-9);
  REQUIRE(std::abs(wrong - fd) / std::abs(fd) > 1e-3);
}

TEST_CASE("rsqrt forward and backward", "[tape]") {
  Parameter x("x", Tensor::scalar(4.0));
  Tape t;
  Var y = t.sum_all(t.rsqrt(t.param(x)));
  REQUIRE(t.value(y)(0, 0) == 0.5);
  t.backward(y);
  // d(x^-1/2)/dx = -1/2 x^-3/2 = -1/16
  REQUIRE(x.grad(0, 0) == Catch::Approx(-0.0625).epsilon(1e-12));
}
