#include <cmath>
#include <stdexcept>
#include <string>

#include <doctest.h>

#include "avec/optim.hpp"
#include "avec/random.hpp"

using avec::AdamWConfig;
using avec::Parameter;

TEST_CASE("zero gradient shrinks a parameter by exactly lr*wd*theta") {
  Parameter p("theta", avec::Tensor({3}, {2.0, -1.5, 0.25}));
  p.tensor.ensure_grad();  // all-zero gradient
  Parameter* params[] = {&p};
  const double lr = 0.1, wd = 1e-2;
  const double expect[] = {2.0 - lr * wd * 2.0, -1.5 - lr * wd * -1.5,
                           0.25 - lr * wd * 0.25};
  avec::adamw_step(params, lr, {0.9, 0.95, wd, 1e-8});
  for (std::size_t i = 0; i < 3; ++i) CHECK(p.tensor[i] == expect[i]);
  CHECK(p.step == 1);
}

TEST_CASE("single step matches a hand-executed update") {
  Parameter p("theta", avec::Tensor({1}, {1.0}));
  p.tensor.ensure_grad();
  p.tensor.accumulate_grad(std::vector<double>{1.0});
  Parameter* params[] = {&p};
  const double lr = 0.1, b1 = 0.9, b2 = 0.95, wd = 1e-5, eps = 1e-8;
  avec::adamw_step(params, lr, {b1, b2, wd, eps});

  // Hand execution: decoupled decay, moment updates, bias correction.
  double theta = 1.0 - lr * wd * 1.0;
  const double m = (1.0 - b1) * 1.0;
  const double v = (1.0 - b2) * 1.0;
  const double mhat = m / (1.0 - b1);
  const double vhat = v / (1.0 - b2);
  theta -= lr * mhat / (std::sqrt(vhat) + eps);
  CHECK(p.tensor[0] == doctest::Approx(theta).epsilon(1e-15));
}

TEST_CASE("updates are deterministic across identical runs") {
  auto run = [] {
    Parameter p("w", avec::Tensor({4}, {0.5, -0.5, 1.0, 2.0}));
    avec::Rng rng(99);
    Parameter* params[] = {&p};
    for (int step = 0; step < 2; ++step) {
      p.tensor.zero_grad();
      p.tensor.ensure_grad();
      std::vector<double> g(4);
      for (double& x : g) x = rng.normal();
      p.tensor.accumulate_grad(g);
      avec::adamw_step(params, 1e-2);
    }
    return std::vector<double>(p.tensor.values().begin(), p.tensor.values().end());
  };
  const auto a = run();
  const auto b = run();
  CHECK(a == b);
}

TEST_CASE("missing gradients are reported by name") {
  Parameter p1("has.grad", avec::Tensor({1}, {1.0}));
  p1.tensor.ensure_grad();
  Parameter p2("lost.grad", avec::Tensor({1}, {1.0}));
  Parameter* params[] = {&p1, &p2};
  try {
    avec::adamw_step(params, 1e-3);
    FAIL("expected an exception");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("lost.grad") != std::string::npos);
  }
}

TEST_CASE("plain-Adam settings descend a quadratic bowl monotonically") {
  Parameter p("theta", avec::Tensor({4}, {3.0, -2.0, 1.5, -4.0}));
  Parameter* params[] = {&p};
  auto loss = [&] {
    double acc = 0;
    for (std::size_t i = 0; i < 4; ++i) acc += 0.5 * p.tensor[i] * p.tensor[i];
    return acc;
  };
  double prev = loss();
  for (int step = 0; step < 100; ++step) {
    p.tensor.zero_grad();
    p.tensor.ensure_grad();
    p.tensor.accumulate_grad(p.tensor.values());  // grad of the bowl is theta
    avec::adamw_step(params, 0.05, {0.9, 0.999, 0.0, 1e-8});
    const double now = loss();
    CHECK(now < prev);
    prev = now;
  }
}

TEST_CASE("cosine schedule endpoints and ramp") {
  const double init = 1e-6, peak = 1e-4;
  CHECK(avec::cosine_lr(0, 1000, 100, init, peak) == init);
  CHECK(avec::cosine_lr(100, 1000, 100, init, peak) == doctest::Approx(peak).epsilon(1e-15));
  CHECK(avec::cosine_lr(1000, 1000, 100, init, peak) ==
        doctest::Approx(init).epsilon(1e-9));
  // Linear in the warmup region.
  CHECK(avec::cosine_lr(50, 1000, 100, init, peak) ==
        doctest::Approx(init + 0.5 * (peak - init)).epsilon(1e-15));
  // Halfway through the decay the rate sits at the midpoint.
  CHECK(avec::cosine_lr(550, 1000, 100, init, peak) ==
        doctest::Approx(init + 0.5 * (peak - init)).epsilon(1e-12));
}

TEST_CASE("cosine schedule rejects invalid ranges") {
  CHECK_THROWS_AS(avec::cosine_lr(11, 10, 2, 1e-6, 1e-4), std::invalid_argument);
  CHECK_THROWS_AS(avec::cosine_lr(0, 10, 10, 1e-6, 1e-4), std::invalid_argument);
  CHECK_THROWS_AS(avec::cosine_lr(0, 10, 2, 1e-4, 1e-6), std::invalid_argument);
  CHECK_THROWS_AS(avec::cosine_lr(0, 0, 0, 1e-6, 1e-4), std::invalid_argument);
}

TEST_CASE("rng streams replay and serialize") {
  avec::Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  avec::Rng c(7);
  for (int i = 0; i < 17; ++i) c.uniform();
  const std::string state = c.state();
  std::vector<double> tail;
  for (int i = 0; i < 20; ++i) tail.push_back(c.normal());
  avec::Rng d(0);
  d.set_state(state);
  for (int i = 0; i < 20; ++i) CHECK(d.normal() == tail[i]);

  avec::Rng e(5);
  for (int i = 0; i < 1000; ++i) {
    const auto v = e.uniform_index(7);
    CHECK(v < 7);
    const auto w = e.uniform_int(-3, 3);
    CHECK(w >= -3);
    CHECK(w <= 3);
    const double u = e.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}
