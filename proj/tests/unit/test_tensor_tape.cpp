#include <cmath>
#include <random>

#include "doctest.h"
#include "flowvgae/numerics/tape.hpp"
#include "gradcheck.hpp"

using namespace flowvgae::numerics;
using flowvgae::testing::gradcheck;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0,
                     double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(Shape{r, c});
  for (auto& v : t.values()) v = u(rng);
  return t;
}

}  // namespace

TEST_CASE("tensor shape bookkeeping") {
  Tensor t(Shape{2, 3}, 1.5);
  CHECK(t.numel() == 6);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK_THROWS_AS(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  t.set_requires_grad(true);
  CHECK(t.grad().size() == t.numel());
}

TEST_CASE("matmul examples") {
  Tape tape;
  SUBCASE("identity") {
    auto y = tape.matmul(tape.constant(Tensor::matrix(2, 2, {1, 0, 0, 1})),
                         tape.constant(Tensor::matrix(2, 2, {1, 2, 3, 4})));
    CHECK(tape.value(y) == Tensor::matrix(2, 2, {1, 2, 3, 4}));
  }
  SUBCASE("zero product") {
    auto y = tape.matmul(tape.constant(Tensor::matrix(2, 2, {1, 0, 0, 0})),
                         tape.constant(Tensor::matrix(2, 2, {0, 0, 0, 1})));
    CHECK(tape.value(y) == Tensor::matrix(2, 2, {0, 0, 0, 0}));
  }
  SUBCASE("hand multiplication") {
    auto y = tape.matmul(tape.constant(Tensor::matrix(2, 2, {1, 2, 3, 4})),
                         tape.constant(Tensor::matrix(2, 1, {5, 6})));
    CHECK(tape.value(y) == Tensor::matrix(2, 1, {17, 39}));
  }
  SUBCASE("shape mismatch names both shapes") {
    auto a = tape.constant(Tensor(Shape{2, 3}));
    auto b = tape.constant(Tensor(Shape{2, 3}));
    try {
      tape.matmul(a, b);
      FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("[2x3] x [2x3]") != std::string::npos);
    }
  }
}

TEST_CASE("elementwise examples") {
  Tape tape;
  auto r = tape.relu(tape.constant(Tensor(Shape{3}, {-1, 0, 2})));
  CHECK(tape.value(r) == Tensor(Shape{3}, {0, 0, 2}));
  auto s = tape.sigmoid(tape.constant(Tensor(Shape{1}, {0.0})));
  CHECK(tape.value(s)[0] == 0.5);
  auto e = tape.exp(tape.constant(Tensor(Shape{1}, {std::log(2.0)})));
  CHECK(std::abs(tape.value(e)[0] - 2.0) <= 1e-12);

  auto sc = tape.add(tape.constant(Tensor(Shape{2}, {1, 2})), tape.constant(Tensor::scalar(3)));
  CHECK(tape.value(sc) == Tensor(Shape{2}, {4, 5}));
  CHECK_THROWS_AS(tape.add(tape.constant(Tensor(Shape{2})), tape.constant(Tensor(Shape{3}))),
                  DimensionError);
}

TEST_CASE("bce_with_logits") {
  Tape tape;
  auto one = [&](double logit, double target) {
    return tape.value(tape.bce_with_logits(tape.constant(Tensor(Shape{1}, {logit})),
                                           Tensor(Shape{1}, {target})))
        .item();
  };
  CHECK(std::abs(one(0.0, 1.0) - std::log(2.0)) <= 1e-12);
  const double sat = one(50.0, 1.0);
  CHECK(sat >= 0.0);
  CHECK(sat <= 1e-9);
  CHECK(std::isfinite(one(-800.0, 1.0)));
  auto pair = tape.bce_with_logits(tape.constant(Tensor(Shape{2}, {0, 0})),
                                   Tensor(Shape{2}, {1, 0}));
  CHECK(std::abs(tape.value(pair).item() - std::log(2.0)) <= 1e-12);
  CHECK_THROWS_AS(one(0.0, 0.5), std::invalid_argument);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-60, 60);
  for (int i = 0; i < 500; ++i) CHECK(one(u(rng), static_cast<double>(i % 2)) >= 0.0);
}

TEST_CASE("mse and per-row mse") {
  Tape tape;
  auto x = tape.constant(Tensor(Shape{1, 2}, {0, 0}));
  auto y = tape.constant(Tensor(Shape{1, 2}, {1, 1}));
  CHECK(tape.value(tape.mse(x, x)).item() == 0.0);
  CHECK(tape.value(tape.mse(x, y)).item() == 1.0);
  auto rows = tape.mse_rows(tape.constant(Tensor::matrix(2, 2, {0, 0, 3, 4})),
                            tape.constant(Tensor(Shape{2, 2})));
  CHECK(tape.value(rows) == Tensor(Shape{2, 1}, {0.0, 12.5}));
  CHECK_THROWS_AS(tape.mse(x, tape.constant(Tensor(Shape{2, 1}))), DimensionError);
}

TEST_CASE("cosine embedding loss") {
  Tape tape;
  auto loss = [&](std::initializer_list<double> a, std::initializer_list<double> b) {
    return tape
        .value(tape.cosine_rows(tape.constant(Tensor::matrix(1, 2, a)),
                                tape.constant(Tensor::matrix(1, 2, b))))
        .item();
  };
  CHECK(loss({1, 0}, {0, 1}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(loss({1, 0}, {-1, 0}) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(loss({0, 0}, {1, 1}) == 1.0);

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  for (int i = 0; i < 200; ++i) {
    Tensor a = random_matrix(1, 5, rng);
    Tensor b = random_matrix(1, 5, rng);
    Tensor b_scaled = b;
    const double s = scale(rng);
    for (auto& v : b_scaled.values()) v *= s;
    const double base = tape.value(tape.cosine_rows(tape.constant(a), tape.constant(b))).item();
    const double scaled =
        tape.value(tape.cosine_rows(tape.constant(a), tape.constant(b_scaled))).item();
    CHECK(base >= 0.0);
    CHECK(base <= 2.0);
    CHECK(scaled == doctest::Approx(base).epsilon(1e-12));
    Tensor a2 = a;
    for (auto& v : a2.values()) v *= 2.0;
    CHECK(tape.value(tape.cosine_rows(tape.constant(a), tape.constant(a2))).item() ==
          doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("backward basics") {
  SUBCASE("sum gives all-ones") {
    Tensor x(Shape{2, 3}, 0.7);
    x.set_requires_grad(true);
    Tape tape;
    tape.backward(tape.sum(tape.input(x)));
    for (double g : x.grad()) CHECK(g == 1.0);
    CHECK(tape.size() == 0);
  }
  SUBCASE("mse against zero") {
    Tensor x(Shape{1}, {2.0});
    x.set_requires_grad(true);
    Tape tape;
    auto xv = tape.input(x);
    tape.backward(tape.mse(xv, tape.constant(Tensor(Shape{1}))));
    CHECK(x.grad()[0] == 4.0);
  }
  SUBCASE("fan-out accumulates") {
    Tensor x(Shape{1}, {3.0});
    x.set_requires_grad(true);
    Tape tape;
    auto xv = tape.input(x);
    tape.backward(tape.sum(tape.add(xv, xv)));
    CHECK(x.grad()[0] == 2.0);
  }
  SUBCASE("non-scalar root") {
    Tensor x(Shape{2}, 1.0);
    x.set_requires_grad(true);
    Tape tape;
    auto xv = tape.input(x);
    CHECK_THROWS_AS(tape.backward(tape.relu(xv)), DimensionError);
  }
}

TEST_CASE("finite-difference gradient check per op") {
  std::mt19937_64 rng(2024);
  Tensor a = random_matrix(3, 4, rng);
  Tensor b = random_matrix(4, 2, rng);
  Tensor c = random_matrix(3, 4, rng);
  Tensor s = random_matrix(1, 1, rng);
  Tensor tok = random_matrix(1, 4, rng);
  std::vector<Tensor*> params{&a, &b, &c, &s, &tok};
  auto adj = std::make_shared<const kernels::Adjacency>(
      kernels::Adjacency::build(3, 2, {{0, 0}, {1, 0}, {2, 1}, {0, 1}}));
  Tensor targets(Shape{3, 2}, {1, 0, 0, 1, 1, 1});

  const std::vector<std::pair<const char*, std::function<Var(Tape&)>>> cases = {
      {"matmul+sigmoid",
       [&](Tape& t) { return t.sum(t.sigmoid(t.matmul(t.input(a), t.input(b)))); }},
      {"exp*mul", [&](Tape& t) { return t.mean(t.mul(t.exp(t.input(a)), t.input(c))); }},
      {"sub+relu", [&](Tape& t) { return t.sum(t.relu(t.sub(t.input(a), t.input(c)))); }},
      {"scalar broadcast",
       [&](Tape& t) { return t.sum(t.mul(t.input(s), t.exp(t.input(a)))); }},
      {"clamp", [&](Tape& t) { return t.sum(t.exp(t.clamp(t.input(a), -0.5, 0.5))); }},
      {"row_sum", [&](Tape& t) { return t.sum(t.exp(t.row_sum(t.input(a)))); }},
      {"gather",
       [&](Tape& t) { return t.sum(t.exp(t.gather_rows(t.input(a), {2, 0, 2, 1}))); }},
      {"aggregate",
       [&](Tape& t) { return t.sum(t.exp(t.mean_aggregate(t.input(a), adj))); }},
      {"replace_rows",
       [&](Tape& t) {
         return t.sum(t.exp(t.replace_rows(t.input(a), {1}, t.input(tok))));
       }},
      {"bce",
       [&](Tape& t) {
         return t.bce_with_logits(t.matmul(t.input(a), t.input(b)), targets);
       }},
      {"mse", [&](Tape& t) { return t.mse(t.input(a), t.input(c)); }},
      {"mse_rows", [&](Tape& t) { return t.sum(t.mse_rows(t.input(a), t.input(c))); }},
      {"cosine", [&](Tape& t) { return t.cosine_embedding_loss(t.input(a), t.input(c)); }},
  };
  for (const auto& [name, fn] : cases) {
    CAPTURE(name);
    for (auto* p : params) p->set_requires_grad(true);
    const auto res = gradcheck(params, fn);
    CHECK(res.max_rel_error < 1e-4);
  }
}
