#include <doctest.h>

#include <cmath>
#include <vector>

#include "miarn/gradcheck.hpp"
#include "miarn/ops.hpp"
#include "miarn/rng.hpp"
#include "support/oracles.hpp"

using namespace miarn;
using num::Graph;
using num::Mask;
using num::Tensor;

namespace {

Tensor<double> random_tensor(Rng& rng, num::Shape shape, bool grad = true) {
  Tensor<double> t(std::move(shape), grad);
  for (auto& x : t.data()) x = rng.uniform(-1.0, 1.0);
  return t;
}

// Weighted sum against fixed random coefficients, so every output entry
// contributes a distinct gradient.
Tensor<double> probe(Graph<double>& g, const Tensor<double>& out, const Tensor<double>& coeffs) {
  auto flat = num::reshape(g, out, {out.size()});
  return num::sum(g, num::mul(g, flat, coeffs));
}

}  // namespace

TEST_SUITE("numerics") {
  TEST_CASE("matmul examples") {
    Graph<double> g(false);
    Tensor<double> eye({2, 2}, {1, 0, 0, 1});
    Tensor<double> m({2, 2}, {1, 2, 3, 4});
    auto r = num::matmul(g, eye, m);
    CHECK(std::vector<double>(r.data().begin(), r.data().end()) == std::vector<double>{1, 2, 3, 4});

    auto dot = num::matmul(g, Tensor<double>({1, 2}, {1, 2}), Tensor<double>({2, 1}, {3, 4}));
    CHECK(dot.shape() == num::Shape{1, 1});
    CHECK(dot[0] == 11.0);
  }

  TEST_CASE("matmul matches triple loop for random shapes up to 16x16") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      Rng rng(seed);
      const std::size_t m = 1 + rng.below(16), k = 1 + rng.below(16), n = 1 + rng.below(16);
      auto a = random_tensor(rng, {m, k}, false);
      auto b = random_tensor(rng, {k, n}, false);
      Graph<double> g(false);
      auto c = oracle::to_matrix(num::matmul(g, a, b));
      auto want = oracle::triple_loop(oracle::to_matrix(a), oracle::to_matrix(b));
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) CHECK(std::abs(c[i][j] - want[i][j]) < 1e-10);
    }
  }

  TEST_CASE("matmul shape error names both shapes") {
    Graph<double> g;
    Tensor<double> a({2, 3}), b({2, 3});
    try {
      (void)num::matmul(g, a, b);
      FAIL("expected ShapeError");
    } catch (const num::ShapeError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("[2x3]") != std::string::npos);
      CHECK(msg.find("[2x3]", msg.find("[2x3]") + 1) != std::string::npos);
    }
  }

  TEST_CASE("concat") {
    Graph<double> g;
    auto ab = num::concat(g, Tensor<double>({2}, {1, 2}), Tensor<double>({1}, std::vector<double>{3}));
    CHECK(ab.shape() == num::Shape{3});
    CHECK(ab[2] == 3.0);
  }

  TEST_CASE("concat with an empty right operand is the identity") {
    Graph<double> g;
    Tensor<double> x({2, 3}, {1, 2, 3, 4, 5, 6});
    auto y = num::concat(g, x, Tensor<double>({2, 0}));
    CHECK(y.shape() == x.shape());
    CHECK(std::equal(y.data().begin(), y.data().end(), x.data().begin()));
  }

  TEST_CASE("concat backward splits the gradient") {
    Graph<double> g;
    Tensor<double> a({1, 2}, {1, 2}, true), b({1, 3}, {3, 4, 5}, true);
    auto loss = num::sum(g, num::concat(g, a, b));
    g.backward(loss);
    for (double v : a.grad()) CHECK(v == 1.0);
    for (double v : b.grad()) CHECK(v == 1.0);
  }

  TEST_CASE("concat rejects mismatched leading dimensions") {
    Graph<double> g;
    CHECK_THROWS_AS(num::concat(g, Tensor<double>({2, 2}), Tensor<double>({3, 1})), num::ShapeError);
  }

  TEST_CASE("elementwise values") {
    Graph<double> g;
    auto r = num::relu(g, Tensor<double>({3}, {-1, 0, 2}));
    CHECK(r[0] == 0.0);
    CHECK(r[1] == 0.0);
    CHECK(r[2] == 2.0);
    CHECK(num::sigmoid(g, Tensor<double>::scalar(0.0))[0] == 0.5);
    CHECK(num::tanh(g, Tensor<double>::scalar(1.0))[0] == doctest::Approx(0.7615941559557649).epsilon(1e-15));
    CHECK_THROWS_AS(num::add(g, Tensor<double>({2}), Tensor<double>({3})), num::ShapeError);
    CHECK_THROWS_AS(num::mul(g, Tensor<double>({2}), Tensor<double>({2, 1})), num::ShapeError);
  }

  TEST_CASE("relu gradient at exactly zero is zero") {
    Graph<double> g;
    Tensor<double> x({3}, {-1, 0, 2}, true);
    auto loss = num::sum(g, num::relu(g, x));
    g.backward(loss);
    CHECK(x.grad()[0] == 0.0);
    CHECK(x.grad()[1] == 0.0);
    CHECK(x.grad()[2] == 1.0);
  }

  TEST_CASE("masked_row_max examples") {
    Graph<double> g;
    Mask offdiag2{0, 1, 1, 0};
    auto r2 = num::masked_row_max(g, Tensor<double>({2, 2}, {9, 2, 2, 9}), offdiag2);
    CHECK(r2.values[0] == 2.0);
    CHECK(r2.values[1] == 2.0);

    Mask offdiag3{0, 1, 1, 1, 0, 1, 1, 1, 0};
    auto r3 = num::masked_row_max(g, Tensor<double>({3, 3}, {99, 1, 0, 1, 99, 5, 0, 5, 99}), offdiag3);
    CHECK(r3.values[0] == 1.0);
    CHECK(r3.values[1] == 5.0);
    CHECK(r3.values[2] == 5.0);

    auto r1 = num::masked_row_max(g, Tensor<double>({1, 1}, std::vector<double>{3}), Mask{0});
    CHECK(r1.row_valid[0] == 0);
  }

  TEST_CASE("masked_row_max routes gradient to the first arg-max") {
    Graph<double> g;
    Tensor<double> s({1, 3}, {4, 4, 1}, true);
    auto r = num::masked_row_max(g, s, Mask{1, 1, 1});
    auto loss = num::sum(g, r.values);
    g.backward(loss);
    CHECK(s.grad()[0] == 1.0);
    CHECK(s.grad()[1] == 0.0);
    CHECK(s.grad()[2] == 0.0);
  }

  TEST_CASE("masked_row_max equals a brute-force scan") {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      Rng rng(seed);
      const std::size_t ell = 1 + rng.below(10);
      auto s = random_tensor(rng, {ell, ell}, false);
      Mask mask(ell * ell);
      for (auto& m : mask) m = rng.below(3) != 0;
      Graph<double> g;
      auto r = num::masked_row_max(g, s, mask);
      for (std::size_t i = 0; i < ell; ++i) {
        bool any = false;
        double best = 0;
        for (std::size_t j = 0; j < ell; ++j) {
          if (!mask[i * ell + j]) continue;
          if (!any || s.at(i, j) > best) best = s.at(i, j);
          any = true;
        }
        CHECK(static_cast<bool>(r.row_valid[i]) == any);
        if (any) CHECK(r.values[i] == best);
      }
    }
  }

  TEST_CASE("masked_softmax examples") {
    Graph<double> g;
    auto u = num::masked_softmax(g, Tensor<double>({2}, {0, 0}), Mask{1, 1});
    CHECK(u[0] == 0.5);
    CHECK(u[1] == 0.5);

    auto p = num::masked_softmax(g, Tensor<double>({2}, {1, 0}), Mask{1, 1});
    CHECK(p[0] == doctest::Approx(0.73106).epsilon(1e-5));
    CHECK(p[1] == doctest::Approx(0.26894).epsilon(1e-5));

    auto q = num::masked_softmax(g, Tensor<double>({3}, {5, 9, 9}), Mask{1, 1, 0});
    CHECK(std::abs(q[0] - 0.01799) < 1e-5);
    CHECK(std::abs(q[1] - 0.98201) < 1e-5);
    CHECK(q[2] == 0.0);
  }

  TEST_CASE("masked_softmax degenerate input falls back to the flagged positions") {
    Graph<double> g;
    auto a = num::masked_softmax(g, Tensor<double>({3}, {1, 2, 3}), Mask{0, 0, 0}, Mask{1, 0, 0});
    CHECK(a[0] == 1.0);
    CHECK(a[1] == 0.0);
    CHECK_THROWS_AS(num::masked_softmax(g, Tensor<double>({2}), Mask{0, 0}), num::ContractError);
  }

  TEST_CASE("masked_softmax is a distribution on valid entries") {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      Rng rng(seed);
      const std::size_t n = 1 + rng.below(12);
      Tensor<double> v({n});
      for (auto& x : v.data()) x = rng.uniform(-30, 30);
      Mask valid(n);
      for (auto& m : valid) m = rng.below(4) != 0;
      valid[rng.below(n)] = 1;
      Graph<double> g;
      auto a = num::masked_softmax(g, v, valid);
      double total = 0;
      for (std::size_t i = 0; i < n; ++i) {
        CHECK(a[i] >= 0.0);
        if (!valid[i]) CHECK(a[i] == 0.0);
        total += a[i];
      }
      CHECK(std::abs(total - 1.0) < 1e-9);
    }
  }

  TEST_CASE("backward of sum and of x*x") {
    Graph<double> g;
    Tensor<double> x({3}, {1, -2, 3}, true);
    auto s = num::sum(g, x);
    g.backward(s);
    for (double v : x.grad()) CHECK(v == 1.0);

    x.zero_grad();
    Graph<double> g2;
    auto sq = num::sum(g2, num::mul(g2, x, x));
    g2.backward(sq);
    CHECK(x.grad()[0] == 2.0);
    CHECK(x.grad()[1] == -4.0);
    CHECK(x.grad()[2] == 6.0);
  }

  TEST_CASE("backward rejects a non-scalar loss") {
    Graph<double> g;
    Tensor<double> x({2}, {1, 2}, true);
    auto y = num::scale(g, x, 2.0);
    CHECK_THROWS_AS(g.backward(y), num::ContractError);
  }

  TEST_CASE("backward visits operations in reverse execution order") {
    Graph<double> g;
    std::vector<int> visits;
    for (int i = 0; i < 5; ++i) g.record([&visits, i] { visits.push_back(i); });
    Tensor<double> loss = Tensor<double>::scalar(0.0, true);
    g.backward(loss);
    CHECK(visits == std::vector<int>{4, 3, 2, 1, 0});
  }

  TEST_CASE("no-grad graphs record nothing") {
    Graph<double> g(false);
    Tensor<double> x({2, 2}, {1, 2, 3, 4}, true);
    auto y = num::matmul(g, x, x);
    CHECK_FALSE(y.requires_grad());
    CHECK(g.size() == 0);
  }

  TEST_CASE("grad_check on a quadratic form is exact to rounding") {
    Rng rng(7);
    auto a = random_tensor(rng, {4, 4}, false);
    std::vector<Tensor<double>> params{random_tensor(rng, {1, 4})};
    auto f = [&](Graph<double>& g) {
      auto x = params[0];
      auto xa = num::matmul(g, x, a);
      return num::sum(g, num::mul(g, xa, x));
    };
    CHECK(num::grad_check(f, params, 1e-4) < 1e-8);
  }

  TEST_CASE("grad_check rejects non-positive eps") {
    std::vector<Tensor<double>> params{Tensor<double>({1}, std::vector<double>{1.0})};
    auto f = [&](Graph<double>& g) { return num::sum(g, params[0]); };
    CHECK_THROWS_AS(num::grad_check(f, params, 0.0), num::ContractError);
    CHECK_THROWS_AS(num::grad_check(f, params, -1.0), num::ContractError);
  }

  TEST_CASE("every differentiable op agrees with central differences over 100 seeds") {
    const double eps = 1e-6;
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      Rng rng(1000 + seed);
      const std::size_t m = 1 + rng.below(4), k = 1 + rng.below(4), n = 1 + rng.below(4);
      std::vector<Tensor<double>> p{random_tensor(rng, {m, k}), random_tensor(rng, {k, n}),
                                    random_tensor(rng, {m, n}), random_tensor(rng, {n}),
                                    random_tensor(rng, {m, m})};
      // Keep relu inputs away from the kink.
      for (auto& x : p[2].data())
        if (std::abs(x) < 0.05) x = 0.3;
      auto coeff_mn = random_tensor(rng, {m * n}, false);
      auto coeff_m = random_tensor(rng, {m}, false);
      auto coeff_cat = random_tensor(rng, {m * (k + n)}, false);
      auto coeff_mm = random_tensor(rng, {m * m}, false);
      auto coeff_n = random_tensor(rng, {n}, false);
      Mask mask(m * m);
      for (auto& b : mask) b = rng.below(3) != 0;
      std::vector<std::int32_t> ids;
      for (std::size_t i = 0; i < 5; ++i) ids.push_back(static_cast<std::int32_t>(rng.below(k)));
      const std::vector<int> labels{1, 0};

      const std::vector<std::function<Tensor<double>(Graph<double>&)>> cases = {
          [&](Graph<double>& g) { return probe(g, num::matmul(g, p[0], p[1]), coeff_mn); },
          [&](Graph<double>& g) {
            return probe(g, num::concat(g, p[0], p[2]), coeff_cat);
          },
          [&](Graph<double>& g) { return probe(g, num::add(g, p[2], p[2]), coeff_mn); },
          [&](Graph<double>& g) { return probe(g, num::mul(g, p[2], num::tanh(g, p[2])), coeff_mn); },
          [&](Graph<double>& g) { return probe(g, num::scale(g, p[2], -1.5), coeff_mn); },
          [&](Graph<double>& g) { return probe(g, num::add_bias(g, p[2], p[3]), coeff_mn); },
          [&](Graph<double>& g) { return probe(g, num::relu(g, p[2]), coeff_mn); },
          [&](Graph<double>& g) { return probe(g, num::sigmoid(g, p[2]), coeff_mn); },
          [&](Graph<double>& g) { return probe(g, num::tanh(g, p[2]), coeff_mn); },
          [&](Graph<double>& g) { return num::sum_squares(g, p[0], 1); },
          [&](Graph<double>& g) { return probe(g, num::masked_row_max(g, p[4], mask).values, coeff_m); },
          [&](Graph<double>& g) {
            return probe(g, num::masked_softmax(g, num::reshape(g, p[4], {m * m}), Mask(m * m, 1)),
                         coeff_mm);
          },
          [&](Graph<double>& g) {
            auto rows = num::gather_rows(g, p[1], ids, 0);
            return num::sum(g, num::mul(g, rows, rows));
          },
          [&](Graph<double>& g) { return probe(g, num::row(g, p[2], m - 1), coeff_n); },
          [&](Graph<double>& g) { return num::sum_squares(g, num::slice_rows(g, p[0], 0, m), 0); },
          [&](Graph<double>& g) {
            std::vector<Tensor<double>> rs{num::row(g, p[2], 0), num::row(g, p[2], m - 1)};
            return num::sum_squares(g, num::stack_rows<double>(g, rs), 0);
          },
          [&](Graph<double>& g) {
            auto pc = num::pair_combine(g, p[0], num::scale(g, p[0], 0.5), m);
            return num::sum(g, num::mul(g, pc, pc));
          },
          [&](Graph<double>& g) {
            auto probs = num::sigmoid(g, num::reshape(g, num::slice_rows(g, p[4], 0, 1), {m}));
            std::vector<int> ls(m);
            for (std::size_t i = 0; i < m; ++i) ls[i] = labels[i % 2];
            return num::binary_cross_entropy(g, probs, ls, 1e-7);
          },
          [&](Graph<double>& g) { return num::sum(g, num::select(g, num::tanh(g, p[2]), 0)); },
      };
      for (std::size_t c = 0; c < cases.size(); ++c) {
        const double err = num::grad_check(cases[c], p, eps);
        INFO("seed " << seed << " case " << c);
        CHECK(err < 1e-4);
        worst = std::max(worst, err);
      }
    }
    MESSAGE("worst relative error across ops: " << worst);
  }

  TEST_CASE("forward passes are deterministic") {
    auto run = [] {
      Rng rng(3);
      auto a = random_tensor(rng, {5, 7});
      auto b = random_tensor(rng, {7, 3});
      Graph<double> g;
      auto y = num::softmax(g, num::reshape(g, num::tanh(g, num::matmul(g, a, b)), {15}));
      return std::vector<double>(y.data().begin(), y.data().end());
    };
    CHECK(run() == run());
  }
}
