// Hand-computed oracles and property tests for the autodiff engine: every
// tape op's forward values, backward bookkeeping, and the finite-difference
// harness itself (including a deliberately wrong gradient as a sentinel).

#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "mrst/gradcheck.hpp"
#include "mrst/rng.hpp"
#include "mrst/tape.hpp"

using namespace mrst;

namespace {

Tensor<double> vec4(std::vector<double> v, bool rg = false) {
  return Tensor<double>::from_data({1, 1, 2, 2}, std::move(v), rg);
}

std::vector<double> random_values(size_t n, RngStream& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

}  // namespace

TEST_CASE("tensor handles share storage and detach deep-copies") {
  auto a = Tensor<double>::from_data({2}, {1.0, 2.0});
  Tensor<double> alias = a;
  alias.data()[0] = 9.0;
  CHECK(a.data()[0] == 9.0);
  CHECK(a.id() == alias.id());

  auto copy = a.detached();
  copy.data()[0] = -1.0;
  CHECK(a.data()[0] == 9.0);
  CHECK(a.id() != copy.id());
  CHECK_FALSE(copy.requires_grad());
}

TEST_CASE("accumulate_grad is a no-op without requires_grad") {
  auto a = Tensor<double>::from_data({2}, {1.0, 2.0});
  std::vector<double> g{1.0, 1.0};
  a.accumulate_grad(g);
  CHECK_FALSE(a.has_grad());
  a.set_requires_grad(true);
  a.accumulate_grad(g);
  a.accumulate_grad(g);
  CHECK(a.grad()[0] == 2.0);
}

TEST_CASE("conv2d: 1x1 identity kernel reproduces the input") {
  Tape<double> tape;
  RngStream rng(3);
  auto x = Tensor<double>::from_data({1, 1, 3, 3}, random_values(9, rng));
  auto k = Tensor<double>::from_data({1, 1, 1, 1}, {1.0});
  auto b = Tensor<double>::zeros({1});
  auto y = tape.conv2d(x, k, b, 1, 0);
  REQUIRE(y.shape() == Shape{1, 1, 3, 3});
  for (int i = 0; i < 9; ++i) CHECK(y.data()[i] == doctest::Approx(x.data()[i]));
}

TEST_CASE("conv2d: constant 4x4 image under a 3x3 ones kernel") {
  const double c = 0.75;
  Tape<double> tape;
  auto x = Tensor<double>::full({1, 1, 4, 4}, c);
  auto k = Tensor<double>::full({1, 1, 3, 3}, 1.0);
  auto b = Tensor<double>::zeros({1});
  auto y = tape.conv2d(x, k, b, 1, 0);
  REQUIRE(y.shape() == Shape{1, 1, 2, 2});
  for (int i = 0; i < 4; ++i) CHECK(y.data()[i] == doctest::Approx(9.0 * c));
}

TEST_CASE("conv2d output extents follow the stride/padding formula") {
  RngStream rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const int k = 1 + 2 * int(rng.uniform_int(3));      // 1,3,5
    const int s = 1 + int(rng.uniform_int(3));          // 1..3
    const int p = int(rng.uniform_int(3));              // 0..2
    const int h = k + int(rng.uniform_int(6));
    const int w = k + int(rng.uniform_int(6));
    Tape<double> tape;
    auto x = Tensor<double>::zeros({1, 2, h, w});
    auto kk = Tensor<double>::zeros({3, 2, k, k});
    auto b = Tensor<double>::zeros({3});
    auto y = tape.conv2d(x, kk, b, s, p);
    CHECK(y.dim(2) == (h + 2 * p - k) / s + 1);
    CHECK(y.dim(3) == (w + 2 * p - k) / s + 1);
  }
}

TEST_CASE("conv2d input validation") {
  Tape<double> tape;
  auto x = Tensor<double>::zeros({1, 1, 4, 4});
  auto b = Tensor<double>::zeros({1});
  CHECK_THROWS_AS(tape.conv2d(x, Tensor<double>::zeros({1, 1, 2, 2}), b, 1, 0),
                  ArgumentError);  // even kernel
  CHECK_THROWS_AS(tape.conv2d(x, Tensor<double>::zeros({1, 2, 3, 3}), b, 1, 0),
                  DimensionError);  // channel mismatch
  CHECK_THROWS_AS(tape.conv2d(x, Tensor<double>::zeros({1, 1, 3, 3}), b, 0, 0),
                  ArgumentError);  // stride
  CHECK_THROWS_AS(tape.conv2d(x, Tensor<double>::zeros({1, 1, 3, 3}), b, 1, -1),
                  ArgumentError);  // padding
  CHECK_THROWS_AS(
      tape.conv2d(x, Tensor<double>::zeros({1, 1, 3, 3}),
                  Tensor<double>::zeros({2}), 1, 0),
      DimensionError);  // bias length
}

TEST_CASE("upsample_nearest replicates blocks and sums their gradients") {
  Tape<double> tape;
  auto x = vec4({1.0, 2.0, 3.0, 4.0}, true);
  auto y = tape.upsample_nearest(x, 2);
  const std::vector<double> want{1, 1, 2, 2, 1, 1, 2, 2,
                                 3, 3, 4, 4, 3, 3, 4, 4};
  REQUIRE(y.shape() == Shape{1, 1, 4, 4});
  for (size_t i = 0; i < want.size(); ++i) CHECK(y.data()[i] == want[i]);

  // d/dx mean -> each source pixel collects factor^2 output positions.
  auto loss = tape.reduce_mean(y);
  tape.backward(loss);
  for (int i = 0; i < 4; ++i)
    CHECK(x.grad()[i] == doctest::Approx(4.0 / 16.0));

  Tape<double> t2;
  auto same = t2.upsample_nearest(x, 1);
  for (int i = 0; i < 4; ++i) CHECK(same.data()[i] == x.data()[i]);
  CHECK_THROWS_AS(t2.upsample_nearest(x, 0), ArgumentError);
}

TEST_CASE("instance stats: constant channel and the 1..4 example") {
  Tape<double> tape;
  auto c = Tensor<double>::full({1, 1, 2, 3}, 0.4);
  auto [mc, sc] = tape.instance_stats(c);
  CHECK(mc.data()[0] == doctest::Approx(0.4));
  CHECK(sc.data()[0] == doctest::Approx(std::sqrt(1e-5)));

  auto x = vec4({1.0, 2.0, 3.0, 4.0});
  auto [m, s] = tape.instance_stats(x);
  CHECK(m.data()[0] == doctest::Approx(2.5));
  CHECK(s.data()[0] == doctest::Approx(1.118034).epsilon(1e-4));
}

TEST_CASE("cin: hand example with gamma 2, beta 3") {
  Tape<double> tape;
  auto x = vec4({1.0, 2.0, 3.0, 4.0});
  auto gamma = Tensor<double>::from_data({1}, {2.0});
  auto beta = Tensor<double>::from_data({1}, {3.0});
  auto z = tape.cin(x, gamma, beta);
  const std::vector<double> want{0.31672, 2.10557, 3.89443, 5.68328};
  for (int i = 0; i < 4; ++i)
    CHECK(std::abs(z.data()[i] - want[i]) < 1e-5);
}

TEST_CASE("cin: identity parameters normalize to zero mean, unit std") {
  Tape<double> tape;
  RngStream rng(5);
  auto x = Tensor<double>::from_data({2, 3, 4, 4}, random_values(96, rng));
  auto gamma = Tensor<double>::full({3}, 1.0);
  auto beta = Tensor<double>::zeros({3});
  auto z = tape.cin(x, gamma, beta);
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 3; ++c) {
      double sum = 0, sq = 0;
      for (int i = 0; i < 16; ++i) {
        const double v = z.data()[(n * 3 + c) * 16 + i];
        sum += v;
        sq += v * v;
      }
      CHECK(sum / 16 == doctest::Approx(0.0).epsilon(1e-9));
      CHECK(sq / 16 == doctest::Approx(1.0).epsilon(1e-3));
    }
}

TEST_CASE("elementwise op values at anchor points") {
  Tape<double> tape;
  auto x = vec4({-1.0, 0.0, 0.5, 2.0});
  auto lr = tape.leaky_relu(x, 0.2);
  CHECK(lr.data()[0] == doctest::Approx(-0.2));
  CHECK(lr.data()[1] == 0.0);
  CHECK(lr.data()[2] == 0.5);
  CHECK(lr.data()[3] == 2.0);

  auto nn = tape.leaky_relu(vec4({0.0, 1.0, 2.0, 3.0}), 0.0);
  for (int i = 0; i < 4; ++i) CHECK(nn.data()[i] == double(i));

  auto z = Tensor<double>::zeros({1});
  CHECK(tape.sigmoid(z).data()[0] == doctest::Approx(0.5));
  CHECK(tape.tanh(z).data()[0] == 0.0);
}

TEST_CASE("scalar losses: frozen hand values") {
  Tape<double> tape;
  auto a = Tensor<double>::from_data({2}, {0.0, 0.0});
  auto b = Tensor<double>::from_data({2}, {1.0, 3.0});
  CHECK(tape.mse(a, b).value() == doctest::Approx(5.0));
  CHECK(tape.l1(a, b).value() == doctest::Approx(2.0));
  CHECK(tape.mse(b, b).value() == 0.0);
  CHECK(tape.l1(b, b).value() == 0.0);

  auto logits = Tensor<double>::zeros({1});
  auto targets = Tensor<double>::full({1}, 0.5);
  CHECK(tape.bce_with_logits(logits, targets).value() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));

  CHECK_THROWS_AS(tape.mse(a, Tensor<double>::zeros({3})), DimensionError);
  CHECK_THROWS_AS(
      tape.bce_with_logits(logits, Tensor<double>::full({1}, 1.5)),
      ArgumentError);
}

TEST_CASE("bce_with_logits is stable at extreme logits") {
  Tape<double> tape;
  auto big = Tensor<double>::from_data({2}, {500.0, -500.0});
  auto ones = Tensor<double>::full({2}, 1.0);
  const double v = tape.bce_with_logits(big, ones).value();
  CHECK(std::isfinite(v));
  CHECK(v == doctest::Approx(250.0).epsilon(1e-9));  // mean(0, 500)
}

TEST_CASE("backward: mean gradient, reuse, and ownership errors") {
  Tape<double> tape;
  auto x = Tensor<double>::from_data({4}, {1.0, 2.0, 3.0, 4.0}, true);
  auto loss = tape.reduce_mean(x);
  tape.backward(loss);
  for (int i = 0; i < 4; ++i) CHECK(x.grad()[i] == 0.25);
  CHECK(tape.consumed());
  CHECK_THROWS_AS(tape.backward(loss), StateError);

  Tape<double> t2;
  auto y = t2.scale(x, 2.0);
  CHECK_THROWS_AS(t2.backward(y), ArgumentError);  // non-scalar

  Tape<double> t3;
  auto foreign = Tensor<double>::zeros({1}, true);
  CHECK_THROWS_AS(t3.backward(foreign), ArgumentError);  // not from tape
}

TEST_CASE("backward: no grad buffer without requires_grad") {
  Tape<double> tape;
  auto x = Tensor<double>::from_data({3}, {1.0, 2.0, 3.0});  // constant leaf
  auto y = Tensor<double>::from_data({3}, {1.0, 1.0, 1.0}, true);
  auto loss = tape.mse(x, y);
  tape.backward(loss);
  CHECK_FALSE(x.has_grad());
  CHECK(y.has_grad());
}

TEST_CASE("backward: gradients sum over all paths and scale linearly") {
  auto run = [](double alpha) {
    Tape<double> tape;
    auto x = Tensor<double>::from_data({2}, {0.3, -0.7}, true);
    auto y = tape.add(x, x);  // two paths into the same leaf
    auto loss = tape.scale(tape.mse(y, Tensor<double>::zeros({2})), alpha);
    tape.backward(loss);
    return std::vector<double>(x.grad().begin(), x.grad().end());
  };
  auto g1 = run(1.0);
  auto g3 = run(3.0);
  CHECK(g1[0] == doctest::Approx(4.0 * 0.3));  // d/dx mean((2x)^2) = 4x
  for (int i = 0; i < 2; ++i) CHECK(g3[i] == doctest::Approx(3.0 * g1[i]));
}

TEST_CASE("concat_channels stacks values and splits gradients") {
  Tape<double> tape;
  auto a = Tensor<double>::full({1, 1, 2, 2}, 1.0, true);
  auto b = Tensor<double>::full({1, 2, 2, 2}, 2.0, true);
  auto y = tape.concat_channels(a, b);
  REQUIRE(y.shape() == Shape{1, 3, 2, 2});
  CHECK(y.data()[0] == 1.0);
  CHECK(y.data()[4] == 2.0);
  auto loss = tape.reduce_mean(y);
  tape.backward(loss);
  CHECK(a.grad()[0] == doctest::Approx(1.0 / 12.0));
  CHECK(b.grad()[0] == doctest::Approx(1.0 / 12.0));

  Tape<double> t2;
  CHECK_THROWS_AS(
      t2.concat_channels(a, Tensor<double>::zeros({1, 1, 3, 3})),
      DimensionError);
}

TEST_CASE("grad_check: analytic x^2 matches to 1e-9 and constants vanish") {
  auto square = [](Tape<double>& tape, std::vector<Tensor<double>>& in) {
    return tape.mse(in[0], Tensor<double>::zeros(in[0].shape()));
  };
  RngStream rng(21);
  auto x = Tensor<double>::from_data({5}, random_values(5, rng), true);
  auto report = grad_check(square, {x}, 1e-6, 1e-9);
  CHECK(report.pass);

  auto constant = [](Tape<double>& tape, std::vector<Tensor<double>>& in) {
    auto c = Tensor<double>::full({1}, 7.0);
    return tape.add(c, tape.scale(tape.reduce_mean(in[0]), 0.0));
  };
  auto r2 = grad_check(constant, {x.clone(true)}, 1e-6, 1e-9);
  CHECK(r2.pass);
  CHECK(r2.max_rel_err == doctest::Approx(0.0));
}

TEST_CASE("grad_check flags a deliberately wrong backward rule") {
  // An op that claims d(mean(3x))/dx = 1/n instead of 3/n.
  auto broken = [](Tape<double>& tape, std::vector<Tensor<double>>& in) {
    Tensor<double> x = in[0];
    std::vector<double> tripled(x.data().begin(), x.data().end());
    for (double& v : tripled) v *= 3.0;
    auto out = Tensor<double>::from_data(x.shape(), std::move(tripled));
    auto y = tape.custom({x}, out, [x, out]() {
      std::vector<double> g(out.grad().begin(), out.grad().end());
      x.accumulate_grad(g);  // wrong: forgets the factor 3
    });
    return tape.reduce_mean(y);
  };
  RngStream rng(22);
  auto x = Tensor<double>::from_data({4}, random_values(4, rng), true);
  auto report = grad_check(broken, {x}, 1e-6, 1e-4);
  CHECK_FALSE(report.pass);
  CHECK(report.max_rel_err > 0.1);
}

TEST_CASE("full gradient suite passes at the acceptance threshold") {
  auto results = run_gradient_suite(3, 99);
  int instances = 0;
  for (const auto& e : results) {
    INFO(e.name);
    CHECK(e.report.pass);
    instances += e.instances;
  }
  CHECK(results.size() == 15);
  CHECK(instances == 45);
  CHECK(gradient_suite_passed(results));
}

TEST_CASE("determinism: identical seeds give bitwise identical draws") {
  RngStream a(1234), b(1234);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  RngStream c = a.split(7), d = b.split(7);
  for (int i = 0; i < 10; ++i) CHECK(c.normal() == d.normal());
  CHECK(a.split(1).next_u64() != a.split(2).next_u64());
}
