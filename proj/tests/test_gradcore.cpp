#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "op_cases.hpp"
#include "slogan/error.hpp"
#include "slogan/gradcheck.hpp"
#include "slogan/param_store.hpp"

using namespace slogan;
using slogan::test::away_from_zero;
using slogan::test::random_tensor;

namespace {

Tensor row(std::vector<real> v) {
  const std::size_t n = v.size();
  return Tensor::from({1, n}, std::move(v));
}

}  // namespace

TEST_SUITE("gradcore") {
  TEST_CASE("relu, softmax and matmul basic values") {
    const Tensor r = relu(row({-1, 0, 2}));
    CHECK(r.values()[0] == 0);
    CHECK(r.values()[1] == 0);
    CHECK(r.values()[2] == 2);

    const Tensor s = softmax_rows(row({0, 0, 0}));
    for (auto v : s.values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    const Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
    const Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
    const Tensor p = matmul(a, eye);
    for (std::size_t i = 0; i < 4; ++i) CHECK(p.values()[i] == a.values()[i]);
  }

  TEST_CASE("backward of sum(x*x) and mean(x)") {
    Tensor x = Tensor::from({1, 1}, {3}, true);
    sum_all(mul(x, x)).backward();
    CHECK(x.grad()[0] == doctest::Approx(6.0));

    Tensor y = Tensor::from({1, 4}, {1, 2, 3, 4}, true);
    mean_all(y).backward();
    for (auto g : y.grad()) CHECK(g == doctest::Approx(0.25));
  }

  TEST_CASE("repeated backward accumulates into leaves") {
    Tensor x = Tensor::from({1, 2}, {1.5, -2}, true);
    const Tensor root = sum_all(mul(x, x));
    root.backward();
    root.backward();
    CHECK(x.grad()[0] == doctest::Approx(4 * 1.5));
    CHECK(x.grad()[1] == doctest::Approx(4 * -2.0));
  }

  TEST_CASE("diamond graph accumulates both consumers") {
    // y = sum(2x * exp(x)); dy/dx = 2 exp(x) + 2x exp(x)
    Rng rng(3);
    Tensor x = random_tensor({2, 3}, rng, -1, 1, true);
    sum_all(mul(scale(x, 2), exp(x))).backward();
    for (std::size_t i = 0; i < x.numel(); ++i) {
      const double v = x.values()[i];
      CHECK(x.grad()[i] == doctest::Approx(2 * std::exp(v) + 2 * v * std::exp(v)).epsilon(1e-12));
    }
  }

  TEST_CASE("non-scalar backward root is rejected") {
    Tensor x = Tensor::from({1, 2}, {1, 2}, true);
    CHECK_THROWS_AS(relu(x).backward(), ShapeError);
  }

  TEST_CASE("shape mismatch names both shapes") {
    const Tensor a = Tensor::zeros({2, 3});
    const Tensor b = Tensor::zeros({3, 2});
    try {
      (void)add(a, b);
      FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("(2, 3)") != std::string::npos);
      CHECK(msg.find("(3, 2)") != std::string::npos);
    }
    CHECK_THROWS_AS(matmul(a, a), ShapeError);
  }

  TEST_CASE("log of non-positive input is rejected") {
    CHECK_THROWS_AS(log(row({1, 0})), Error);
    CHECK_THROWS_AS(log(row({-1})), Error);
    CHECK(log(clamp(row({0}), real(1e-12), real(1))).values()[0] == doctest::Approx(std::log(1e-12)));
  }

  TEST_CASE("broadcasting is limited to bias rows and a leading batch dimension") {
    const Tensor a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    const Tensor bias = row({10, 20, 30});
    const Tensor s = add(a, bias);
    CHECK(s.at(1, 2) == 36);
    const Tensor t = Tensor::zeros({2, 2, 3});
    CHECK(add(t, a).shape() == Shape{2, 2, 3});
    CHECK_THROWS_AS(add(a, Tensor::zeros({2, 1})), ShapeError);
  }

  TEST_CASE("no-grad guard stops graph recording") {
    Tensor x = Tensor::from({1, 1}, {2}, true);
    {
      NoGradGuard guard;
      CHECK_FALSE(grad_enabled());
      CHECK_FALSE(mul(x, x).requires_grad());
    }
    CHECK(grad_enabled());
    CHECK(mul(x, x).requires_grad());
  }

  TEST_CASE("every op matches central differences on 20 random inputs") {
    Rng rng(11);
    for (auto& [name, c] : test::all_op_cases(rng)) {
      const double worst = test::op_case_worst_error(c, rng, 20);
      INFO("op " << name << " worst relative error " << worst);
      CHECK(worst < 1e-3);
    }
  }

  TEST_CASE("softmax rows sum to one with entries in (0, 1)") {
    Rng rng(5);
    for (int t = 0; t < 20; ++t) {
      const Tensor s = softmax_rows(random_tensor({6, 5}, rng, -20, 20));
      for (std::size_t r = 0; r < 6; ++r) {
        double total = 0;
        for (std::size_t c = 0; c < 5; ++c) {
          const double v = s.at(r, c);
          CHECK(v > 0);
          CHECK(v < 1);
          total += v;
        }
        CHECK(std::abs(total - 1) < 1e-9);
      }
    }
  }

  TEST_CASE("matmul chain gradient matches finite differences") {
    Rng rng(8);
    const Tensor b = random_tensor({4, 3}, rng);
    const Tensor c = random_tensor({3, 2}, rng);
    const auto rep = finite_diff_check([&](const Tensor& a) { return sum_all(matmul(matmul(a, b), c)); },
                                       random_tensor({2, 4}, rng), 1e-3);
    CHECK(rep.passed);
  }

  TEST_CASE("finite_diff_check examples") {
    Rng rng(9);
    const auto r1 = finite_diff_check([](const Tensor& x) { return sum_all(relu(x)); },
                                      away_from_zero({3, 3}, rng, 0.05), 1e-3);
    CHECK(r1.max_rel_error < 1e-6);

    const auto r2 =
        finite_diff_check([](const Tensor& x) { return sum_all(scale(x, 0)); }, random_tensor({2, 2}, rng), 1e-3);
    CHECK(r2.passed);
    CHECK(r2.max_rel_error == 0);

    const std::vector<int> y{1, 0, 2, 2};
    const auto r3 = finite_diff_check([&](const Tensor& x) { return mean_all(nll_log_softmax(x, y)); },
                                      random_tensor({4, 3}, rng, -3, 3), 1e-3);
    CHECK(r3.max_rel_error < 1e-3);

    CHECK_THROWS_AS(finite_diff_check([](const Tensor& x) { return sum_all(log(x)); }, row({-1, 1}), 1e-3), Error);
    CHECK_THROWS_AS(finite_diff_check([](const Tensor& x) { return sum_all(scale(x, real(INFINITY))); },
                                      row({1, 1}), 1e-3),
                    Error);
  }

  TEST_CASE("adam step with zero gradient leaves the parameter unchanged") {
    ParamStore store;
    Tensor p = store.add("p", Tensor::from({1, 2}, {0.5, -1.5}));
    sum_all(scale(p, 0)).backward();
    store.adam_step(0.1);
    CHECK(p.values()[0] == 0.5);
    CHECK(p.values()[1] == -1.5);
  }

  TEST_CASE("first adam step has magnitude lr * g / (|g| + eps)") {
    ParamStore store;
    Tensor p = store.add("p", Tensor::from({1, 3}, {1.0, 2.0, -3.0}));
    const std::vector<double> g{0.3, -2.0, 1e-3};
    sum_all(mul(p, Tensor::from({1, 3}, {g[0], g[1], g[2]}))).backward();
    const double lr = 0.01;
    const std::vector<double> before{1.0, 2.0, -3.0};
    store.adam_step(lr);
    for (std::size_t i = 0; i < 3; ++i) {
      // closed form at t = 1: m_hat = g, v_hat = g^2
      const double expected = before[i] - lr * g[i] / (std::abs(g[i]) + 1e-8);
      CHECK(p.values()[i] == doctest::Approx(expected).epsilon(1e-12));
      CHECK(std::abs(p.values()[i] - before[i]) == doctest::Approx(lr).epsilon(1e-4));
    }
    CHECK(store.step_count() == 1);
    CHECK_FALSE(p.has_grad());
  }

  TEST_CASE("adam: identical parameters stay identical, lr = 0 is bit-exact") {
    ParamStore store;
    Tensor a = store.add("a", Tensor::from({1, 2}, {0.1, 0.2}));
    Tensor b = store.add("b", Tensor::from({1, 2}, {0.1, 0.2}));
    for (int step = 0; step < 3; ++step) {
      add(sum_all(mul(a, a)), sum_all(mul(b, b))).backward();
      store.adam_step(0.05);
    }
    CHECK(a.values()[0] == b.values()[0]);
    CHECK(a.values()[1] == b.values()[1]);

    const auto snapshot = store.flat_values();
    add(sum_all(exp(a)), sum_all(exp(b))).backward();
    store.adam_step(0);
    CHECK(store.flat_values() == snapshot);
  }

  TEST_CASE("adam rejects a missing gradient by name") {
    ParamStore store;
    Tensor a = store.add("encoder.weight", Tensor::zeros({1, 1}));
    store.add("lonely", Tensor::zeros({1, 1}));
    sum_all(a).backward();
    try {
      store.adam_step(0.1);
      FAIL("expected rejection");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("'lonely'") != std::string::npos);
    }
  }

  TEST_CASE("param store rejects duplicate names and deep copies independently") {
    ParamStore store;
    store.add("w", Tensor::zeros({1, 1}));
    CHECK_THROWS_AS(store.add("w", Tensor::zeros({1, 1})), Error);
    ParamStore copy = store.deep_copy();
    copy.get("w").mutable_values()[0] = 5;
    CHECK(store.get("w").values()[0] == 0);
  }

  TEST_CASE("glorot init stays inside its bound") {
    Rng rng(1);
    const Tensor w = glorot_uniform(30, 10, rng);
    const double bound = std::sqrt(6.0 / 40.0);
    for (auto v : w.values()) CHECK(std::abs(v) <= bound);
  }

  TEST_CASE("rng: same seed same draws, derangements have no fixed points") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng c(7);
    for (std::size_t n = 2; n < 30; ++n) {
      const auto d = c.derangement(n);
      std::vector<bool> seen(n, false);
      for (std::size_t i = 0; i < n; ++i) {
        CHECK(d[i] != i);
        seen[d[i]] = true;
      }
      CHECK(std::all_of(seen.begin(), seen.end(), [](bool s) { return s; }));
    }
    Rng base(5);
    Rng f1 = base.fork(1), f2 = base.fork(2), f1b = base.fork(1);
    CHECK(f1.next_u64() == f1b.next_u64());
    CHECK(f1.next_u64() != f2.next_u64());
  }

  TEST_CASE("rng: below is unbiased over a small range") {
    Rng rng(123);
    std::vector<int> counts(3, 0);
    const int n = 30000;
    for (int i = 0; i < n; ++i) ++counts[rng.below(3)];
    // binomial sd ~ sqrt(n p (1-p)) ~ 82; allow 5 sd
    for (int c : counts) CHECK(std::abs(c - n / 3) < 410);
  }
}
