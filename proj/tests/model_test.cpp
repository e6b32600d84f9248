#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "miarn/gradcheck.hpp"
#include "miarn/model.hpp"
#include "support/oracles.hpp"
#include "support/params.hpp"

using namespace miarn;
using namespace miarn::model;

namespace {

ModelParams<double> make_params(ModelKind kind, std::uint64_t seed, std::size_t vocab = 30,
                                std::size_t n = 6, std::size_t d = 5, std::size_t k = 3) {
  ModelConfig cfg{kind, vocab, n, d, kind == ModelKind::miarn ? k : 0};
  Rng rng = Rng::stream(seed, "init");
  return init_params(cfg, rng).cast<double>();
}

Tensor<double> random_matrix(Rng& rng, std::size_t r, std::size_t c, double range = 1.0) {
  Tensor<double> t({r, c});
  for (auto& x : t.data()) x = rng.uniform(-range, range);
  return t;
}

std::vector<std::int32_t> random_ids(Rng& rng, std::size_t valid, std::size_t max_len,
                                     std::size_t vocab) {
  std::vector<std::int32_t> ids(max_len, corpus::Vocabulary::kPad);
  for (std::size_t i = 0; i < valid; ++i) ids[i] = static_cast<std::int32_t>(2 + rng.below(vocab - 2));
  return ids;
}

std::vector<double> values(const Tensor<double>& t) { return {t.data().begin(), t.data().end()}; }

void fill(Tensor<double>& t, double v) { std::fill(t.data().begin(), t.data().end(), v); }

std::vector<double> row_of(const Tensor<double>& m, std::size_t r) {
  return {m.data().begin() + r * m.cols(), m.data().begin() + (r + 1) * m.cols()};
}

std::vector<double> softmax2(double z0, double z1) {
  const double m = std::max(z0, z1);
  const double e0 = std::exp(z0 - m), e1 = std::exp(z1 - m);
  return {e0 / (e0 + e1), e1 / (e0 + e1)};
}

/// Logistic layer on a row vector, evaluated with plain loops.
std::vector<double> logistic(const std::vector<double>& x, const ModelParams<double>& p) {
  auto z = oracle::row_times(x, oracle::to_matrix(p.get("output.w")));
  return softmax2(z[0] + p.get("output.b")[0], z[1] + p.get("output.b")[1]);
}

Affinity<double> manual_affinity(std::size_t ell, std::size_t valid, std::vector<double> s) {
  return {Tensor<double>({ell, ell}, std::move(s)), affinity_mask(ell, valid), valid};
}

corpus::Batch one_doc_batch(std::vector<std::int32_t> ids, std::size_t valid, int label) {
  corpus::EncodedDoc doc{std::move(ids), valid, label};
  return corpus::make_batch(std::span<const corpus::EncodedDoc>(&doc, 1));
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("embed examples") {
    Graph<double> g;
    Rng rng(1);
    auto e = random_matrix(rng, 5, 3);
    std::vector<std::int32_t> ids{2, 0};
    auto w = embed(g, e, ids);
    CHECK(row_of(w, 0) == row_of(e, 2));
    CHECK(row_of(w, 1) == std::vector<double>(3, 0.0));

    std::vector<std::int32_t> pads{0, 0, 0};
    auto z = embed(g, e, pads);
    CHECK(values(z) == std::vector<double>(9, 0.0));

    std::vector<std::int32_t> bad{7};
    CHECK_THROWS(embed(g, e, bad));
  }

  TEST_CASE("embedding gradient accumulates per occurrence") {
    Rng rng(2);
    std::vector<Tensor<double>> p{random_matrix(rng, 5, 3)};
    p[0].set_requires_grad(true);
    std::vector<std::int32_t> ids{2, 3, 2, 0};
    Graph<double> g;
    g.backward(num::sum(g, embed(g, p[0], ids)));
    for (std::size_t c = 0; c < 3; ++c) {
      CHECK(p[0].grad()[2 * 3 + c] == 2.0);
      CHECK(p[0].grad()[3 * 3 + c] == 1.0);
      CHECK(p[0].grad()[0 * 3 + c] == 0.0);
    }
    auto f = [&](Graph<double>& gg) {
      auto w = embed(gg, p[0], ids);
      return num::sum(gg, num::mul(gg, w, num::tanh(gg, w)));
    };
    CHECK(num::grad_check(f, p, 1e-6) < 1e-6);
  }

  TEST_CASE("affinity_single examples") {
    Graph<double> g;
    Tensor<double> words({2, 2}, {1, 0, 0, 1});
    SingleAffinityParams<double> ones{Tensor<double>({4, 1}, {1, 1, 1, 1}), Tensor<double>({1}, std::vector<double>{0})};
    auto s = affinity_single(g, words, ones, 2);
    CHECK(s.scores.at(0, 1) == 2.0);
    CHECK(s.scores.at(1, 0) == 2.0);
    CHECK(s.mask == Mask{0, 1, 1, 0});

    Tensor<double> w4({4, 2}, {1, 2, 3, 4, 5, 6, 0, 0});
    SingleAffinityParams<double> bias_only{Tensor<double>({4, 1}), Tensor<double>({1}, std::vector<double>{5})};
    auto b = affinity_single(g, w4, bias_only, 3);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) {
        const bool valid = i != j && i < 3 && j < 3;
        CHECK(static_cast<bool>(b.mask[i * 4 + j]) == valid);
        if (valid) CHECK(b.scores.at(i, j) == 5.0);
      }
  }

  TEST_CASE("affinity_single matches a per-pair loop") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      Rng rng(seed);
      const std::size_t n = 1 + rng.below(6), ell = 2 + rng.below(8), valid = 1 + rng.below(ell);
      auto words = random_matrix(rng, ell, n);
      SingleAffinityParams<double> p{random_matrix(rng, 2 * n, 1), random_matrix(rng, 1, 1)};
      Graph<double> g;
      auto s = affinity_single(g, words, p, valid);
      auto wa = oracle::to_matrix(p.w);
      for (std::size_t i = 0; i < valid; ++i)
        for (std::size_t j = i + 1; j < valid; ++j) {
          const double want = oracle::pair_single(row_of(words, i), row_of(words, j), wa, p.b[0]);
          CHECK(std::abs(s.scores.at(i, j) - want) < 1e-12);
          CHECK(s.scores.at(j, i) == s.scores.at(i, j));
        }
    }
  }

  TEST_CASE("affinity_multi examples") {
    Graph<double> g;
    Rng rng(4);
    const std::size_t k = 4;
    auto words = random_matrix(rng, 3, 2);
    MultiAffinityParams<double> p{Tensor<double>({4, k}), Tensor<double>({k}, std::vector<double>(k, 1.0)),
                                  Tensor<double>({k, 1}, std::vector<double>(k, 1.0)),
                                  Tensor<double>({1}, std::vector<double>{0})};
    auto s = affinity_multi(g, words, p, 3);
    for (std::size_t c = 0; c < 9; ++c)
      if (s.mask[c]) CHECK(s.scores[c] == 4.0);

    auto q = random_matrix(rng, 4, k);
    MultiAffinityParams<double> saturated{q, Tensor<double>({k}, std::vector<double>(k, -1e3)),
                                          random_matrix(rng, k, 1), Tensor<double>({1}, std::vector<double>{0.25})};
    auto t = affinity_multi(g, words, saturated, 3);
    for (std::size_t c = 0; c < 9; ++c)
      if (t.mask[c]) CHECK(t.scores[c] == 0.25);
  }

  TEST_CASE("affinity_multi matches a per-pair loop") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      Rng rng(100 + seed);
      const std::size_t n = 1 + rng.below(6), k = 1 + rng.below(5), ell = 2 + rng.below(8);
      const std::size_t valid = 1 + rng.below(ell);
      auto words = random_matrix(rng, ell, n);
      MultiAffinityParams<double> p{random_matrix(rng, 2 * n, k), Tensor<double>({k}), random_matrix(rng, k, 1),
                                    random_matrix(rng, 1, 1)};
      for (auto& x : p.b_q.data()) x = rng.uniform(-1, 1);
      Graph<double> g;
      auto s = affinity_multi(g, words, p, valid);
      auto wq = oracle::to_matrix(p.w_q), wp = oracle::to_matrix(p.w_p);
      for (std::size_t i = 0; i < valid; ++i)
        for (std::size_t j = i + 1; j < valid; ++j) {
          const double want =
              oracle::pair_multi(row_of(words, i), row_of(words, j), wq, values(p.b_q), wp, p.b_p[0]);
          CHECK(std::abs(s.scores.at(i, j) - want) < 1e-12);
          CHECK(s.scores.at(j, i) == s.scores.at(i, j));
        }
    }
  }

  TEST_CASE("intra_attention examples") {
    Graph<double> g;
    auto sym = intra_attention(g, manual_affinity(3, 2, {0, 0.7, 0, 0.7, 0, 0, 0, 0, 0}));
    CHECK(values(sym) == std::vector<double>{0.5, 0.5, 0.0});

    // Row maxima [1, 0] (a hand-built non-symmetric matrix isolates the softmax).
    auto a = intra_attention(g, manual_affinity(2, 2, {0, 1, 0, 0}));
    CHECK(std::abs(a[0] - 0.73106) < 1e-5);
    CHECK(std::abs(a[1] - 0.26894) < 1e-5);

    auto lone = intra_attention(g, manual_affinity(3, 1, std::vector<double>(9, 3.0)));
    CHECK(values(lone) == std::vector<double>{1.0, 0.0, 0.0});
  }

  TEST_CASE("masked cells never influence attention") {
    Rng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t ell = 2 + rng.below(8), valid = 1 + rng.below(ell);
      std::vector<double> s(ell * ell);
      for (auto& x : s) x = rng.uniform(-2, 2);
      Graph<double> g;
      auto base = intra_attention(g, manual_affinity(ell, valid, s));
      auto mask = affinity_mask(ell, valid);
      for (std::size_t c = 0; c < s.size(); ++c)
        if (!mask[c]) s[c] = 1e6;
      auto poisoned = intra_attention(g, manual_affinity(ell, valid, s));
      CHECK(values(base) == values(poisoned));
      for (std::size_t i = valid; i < ell; ++i) CHECK(base[i] == 0.0);
    }
  }

  TEST_CASE("attentive_rep examples") {
    Graph<double> g;
    Tensor<double> words({3, 2}, {1, 2, 3, 4, 5, 6});
    auto one_hot = attentive_rep(g, words, Tensor<double>({3}, {0, 1, 0}));
    CHECK(values(one_hot) == std::vector<double>{3, 4});
    auto mid = attentive_rep(g, words, Tensor<double>({3}, {0.5, 0, 0.5}));
    CHECK(values(mid) == std::vector<double>{3, 4});
    CHECK(mid.shape() == num::Shape{1, 2});

    Rng rng(9);
    auto w = random_matrix(rng, 6, 4);
    Tensor<double> a({6});
    for (auto& x : a.data()) x = rng.unit();
    auto v = attentive_rep(g, w, a);
    for (std::size_t c = 0; c < 4; ++c) {
      double want = 0;
      for (std::size_t i = 0; i < 6; ++i) want += a[i] * w.at(i, c);
      CHECK(std::abs(v[c] - want) < 1e-12);
    }
  }

  TEST_CASE("lstm_encode examples") {
    auto p = make_params(ModelKind::siarn, 1, 20, 4, 3);
    for (auto& e : p.entries())
      if (e.name.rfind("lstm.", 0) == 0) fill(e.value, 0.0);
    Graph<double> g;
    auto zero = lstm_encode(g, Tensor<double>({5, 4}), lstm(p), 5);
    CHECK(values(zero) == std::vector<double>(3, 0.0));

    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      auto q = make_params(ModelKind::siarn, seed, 20, 4, 3);
      for (auto& e : q.entries())
        if (e.name.rfind("lstm.b", 0) == 0)
          for (auto& x : e.value.data()) x += 0.1 * static_cast<double>(seed % 3);
      Rng rng(seed);
      auto x = random_matrix(rng, 6, 4);
      auto xs = oracle::to_matrix(x);
      for (std::size_t steps : {1u, 3u, 6u}) {
        Graph<double> gg;
        auto h = lstm_encode(gg, x, lstm(q), steps);
        auto want = oracle::lstm_last(xs, oracle::lstm_weights(q), steps);
        for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(h[j] - want[j]) < 1e-12);
      }
    }
  }

  TEST_CASE("lstm never runs past the valid length") {
    auto p = make_params(ModelKind::miarn, 5);
    Rng rng(5);
    auto x = random_matrix(rng, 8, 6);
    Graph<double> g;
    CHECK(lstm_states(g, x, lstm(p), 3).size() == 3);
  }

  TEST_CASE("fuse_predict examples") {
    auto p = make_params(ModelKind::siarn, 3, 20, 4, 3);
    auto f = fusion(p);
    Rng rng(3);
    auto va = random_matrix(rng, 1, 4), vc = random_matrix(rng, 1, 3);
    fill(f.w_f, 0.0);
    fill(f.b_f, 0.0);
    Graph<double> g;
    CHECK(values(fuse_predict(g, va, vc, f)) == std::vector<double>{0.5, 0.5});

    f.b_f[0] = std::log(3.0);
    auto y = fuse_predict(g, va, vc, f);
    CHECK(std::abs(y[0] - 0.75) < 1e-12);
    CHECK(std::abs(y[1] - 0.25) < 1e-12);

    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      auto q = make_params(ModelKind::siarn, seed, 20, 4, 3);
      Rng r(seed);
      auto out = fuse_predict(g, random_matrix(r, 1, 4, 5), random_matrix(r, 1, 3, 5), fusion(q));
      CHECK(out[0] >= 0.0);
      CHECK(out[1] >= 0.0);
      CHECK(std::abs(out[0] + out[1] - 1.0) < 1e-7);
    }
  }

  TEST_CASE("loss examples") {
    auto p = make_params(ModelKind::siarn, 1);
    Graph<double> g;
    std::vector<Tensor<double>> perfect{Tensor<double>({2}, {0, 1}), Tensor<double>({2}, {1, 0})};
    std::vector<int> labels{1, 0};
    auto j = loss<double>(g, perfect, labels, 0.0, p);
    CHECK(std::abs(j[0] - (-2.0 * std::log(1.0 - 1e-7))) < 1e-15);

    std::vector<Tensor<double>> half{Tensor<double>({2}, {0.5, 0.5})};
    std::vector<int> one{1};
    CHECK(std::abs(loss<double>(g, half, one, 0.0, p)[0] - 0.6931471805599453) < 1e-12);

    auto zero = p.clone();
    for (auto& e : zero.entries()) fill(e.value, 0.0);
    CHECK(std::abs(loss<double>(g, half, one, 1.0, zero)[0] - 0.6931471805599453) < 1e-12);
  }

  TEST_CASE("regularizer covers weights only and skips the PAD row") {
    auto p = make_params(ModelKind::miarn, 2);
    for (auto& e : p.entries()) fill(e.value, 1.0);
    double want = 0;
    for (const auto& e : p.entries()) {
      if (e.name.find(".b") != std::string::npos) continue;
      want += static_cast<double>(e.value.size());
      if (e.name == "embedding") want -= static_cast<double>(e.value.cols());
    }
    std::vector<Tensor<double>> half{Tensor<double>({2}, {0.5, 0.5})};
    std::vector<int> one{1};
    Graph<double> g;
    const double lambda = 0.01;
    CHECK(std::abs(loss<double>(g, half, one, lambda, p)[0] - (std::log(2.0) + lambda * want)) < 1e-9);
  }

  TEST_CASE("every model yields valid distributions on random documents") {
    for (auto kind : {ModelKind::siarn, ModelKind::miarn, ModelKind::nbow, ModelKind::lstm, ModelKind::attlstm}) {
      auto p = make_params(kind, 7);
      Rng rng(7);
      for (int trial = 0; trial < 50; ++trial) {
        auto ids = random_ids(rng, 1 + rng.below(10), 10, 30);
        const auto valid = static_cast<std::size_t>(std::count_if(ids.begin(), ids.end(), [](auto i) { return i != 0; }));
        Graph<double> g(false);
        auto r = forward_doc(g, p, ids, valid);
        CHECK(r.probs[0] >= 0.0);
        CHECK(r.probs[1] >= 0.0);
        CHECK(std::abs(r.probs[0] + r.probs[1] - 1.0) < 1e-12);
        CHECK(r.attention.has_value() == has_attention(kind));
        if (r.attention) {
          const auto& a = r.attention->attention;
          CHECK(std::abs(std::accumulate(a.begin(), a.end(), 0.0) - 1.0) < 1e-12);
          for (std::size_t i = valid; i < a.size(); ++i) CHECK(a[i] == 0.0);
        }
      }
    }
  }

  TEST_CASE("kind-checked entry points reject other models") {
    auto p = make_params(ModelKind::miarn, 1);
    auto batch = one_doc_batch({2, 3, 4, 0}, 3, 1);
    Graph<double> g(false);
    CHECK_THROWS_AS(forward_siarn(g, p, batch), std::invalid_argument);
    CHECK_THROWS_AS(forward_nbow(g, p, batch), std::invalid_argument);
    CHECK_THROWS_AS(forward_attlstm(g, p, batch), std::invalid_argument);
    CHECK(forward_miarn(g, p, batch).probs.size() == 1);
  }

  TEST_CASE("MIARN built to emulate SIARN ranks tokens identically") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      auto si = make_params(ModelKind::siarn, seed);
      auto mi = make_params(ModelKind::miarn, seed, 30, 6, 5, 1);
      for (auto& e : si.entries())
        if (mi.has(e.name)) std::copy(e.value.data().begin(), e.value.data().end(), mi.get(e.name).data().begin());
      // relu(W_a x + B) - B + b_a equals W_a x + b_a whenever W_a x > -B.
      const double big = 100.0;
      auto& wq = mi.get("affinity.w_q");
      std::copy(si.get("affinity.w").data().begin(), si.get("affinity.w").data().end(), wq.data().begin());
      mi.get("affinity.b_q")[0] = big;
      mi.get("affinity.w_p")[0] = 1.0;
      mi.get("affinity.b_p")[0] = si.get("affinity.b")[0] - big;

      Rng rng(seed);
      const std::size_t valid = 3 + rng.below(8);
      auto ids = random_ids(rng, valid, 12, 30);
      Graph<double> g(false);
      auto a = forward_doc(g, si, ids, valid).attention->attention;
      auto b = forward_doc(g, mi, ids, valid).attention->attention;
      CHECK(std::max_element(a.begin(), a.end()) - a.begin() == std::max_element(b.begin(), b.end()) - b.begin());
      for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-9);
    }
  }

  TEST_CASE("appending padding leaves every output unchanged") {
    for (auto kind : {ModelKind::siarn, ModelKind::miarn}) {
      ModelConfig cfg{kind, 40, 8, 8, kind == ModelKind::miarn ? 4u : 0u};
      Rng init = Rng::stream(3, "init");
      auto p = init_params(cfg, init);
      Rng rng(3);
      for (int trial = 0; trial < 30; ++trial) {
        const std::size_t valid = 1 + rng.below(12);
        auto ids = random_ids(rng, valid, 12, 40);
        auto longer = ids;
        longer.resize(22, 0);
        Graph<float> g(false);
        auto a = forward_doc(g, p, ids, valid);
        auto b = forward_doc(g, p, longer, valid);
        for (std::size_t c = 0; c < 2; ++c) CHECK(std::abs(a.probs[c] - b.probs[c]) <= 1e-6f);
        for (std::size_t c = 0; c < 8; ++c) {
          CHECK(std::abs((*a.v_a)[c] - (*b.v_a)[c]) <= 1e-6f);
          CHECK(std::abs((*a.v_c)[c] - (*b.v_c)[c]) <= 1e-6f);
        }
      }
    }
  }

  TEST_CASE("affinity is symmetric on every unmasked cell") {
    for (auto kind : {ModelKind::siarn, ModelKind::miarn}) {
      auto p = make_params(kind, 11);
      Rng rng(11);
      for (int trial = 0; trial < 20; ++trial) {
        const std::size_t valid = 1 + rng.below(10);
        auto ids = random_ids(rng, valid, 10, 30);
        Graph<double> g(false);
        auto rec = *forward_doc(g, p, ids, valid).attention;
        for (std::size_t i = 0; i < 10; ++i)
          for (std::size_t j = 0; j < 10; ++j) {
            CHECK(rec.affinity_mask[i * 10 + j] == rec.affinity_mask[j * 10 + i]);
            if (rec.affinity_mask[i * 10 + j]) CHECK(rec.affinity[i * 10 + j] == rec.affinity[j * 10 + i]);
          }
        for (std::size_t i = 0; i < 10; ++i) CHECK(rec.affinity_mask[i * 10 + i] == 0);
      }
    }
  }

  TEST_CASE("v_a ignores token order under a symmetric scoring head while v_c does not") {
    // Scores come from the upper triangle, so a pair is scored as [w_i; w_j]
    // with i < j. Tying the two halves of the head makes that order irrelevant.
    auto p = make_params(ModelKind::miarn, 13);
    auto& wq = p.get("affinity.w_q");
    const std::size_t n = wq.rows() / 2;
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < wq.cols(); ++c) wq.at(n + r, c) = wq.at(r, c);
    Rng rng(13);
    bool lstm_changed = false;
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t valid = 3 + rng.below(7);
      auto ids = random_ids(rng, valid, 10, 30);
      auto perm = ids;
      std::reverse(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(valid));
      std::swap(perm[0], perm[valid / 2]);
      Graph<double> g(false);
      auto a = forward_doc(g, p, ids, valid);
      auto b = forward_doc(g, p, perm, valid);
      for (std::size_t c = 0; c < 6; ++c) CHECK(std::abs((*a.v_a)[c] - (*b.v_a)[c]) < 1e-12);
      for (std::size_t c = 0; c < 5; ++c) lstm_changed = lstm_changed || std::abs((*a.v_c)[c] - (*b.v_c)[c]) > 1e-6;
    }
    CHECK(lstm_changed);
  }

  TEST_CASE("with an untied head the pair score depends on position order") {
    auto p = make_params(ModelKind::siarn, 13);
    Graph<double> g(false);
    std::vector<std::int32_t> ab{2, 3}, ba{3, 2};
    auto s1 = affinity_single(g, embed(g, p.get("embedding"), ab), single_affinity(p), 2);
    auto s2 = affinity_single(g, embed(g, p.get("embedding"), ba), single_affinity(p), 2);
    CHECK(s1.scores.at(0, 1) != s2.scores.at(0, 1));
  }

  TEST_CASE("nbow examples") {
    auto p = make_params(ModelKind::nbow, 17);
    const auto& e = p.get("embedding");
    Graph<double> g(false);

    std::vector<std::int32_t> single{5, 0, 0, 0};
    auto one = forward_doc(g, p, single, 1).probs;
    auto want = logistic(row_of(e, 5), p);
    CHECK(std::abs(one[0] - want[0]) < 1e-12);

    std::vector<std::int32_t> twice{5, 5, 0, 0};
    auto doubled = row_of(e, 5);
    for (auto& x : doubled) x *= 2;
    CHECK(std::abs(forward_doc(g, p, twice, 2).probs[1] - logistic(doubled, p)[1]) < 1e-12);

    Rng rng(17);
    for (int trial = 0; trial < 30; ++trial) {
      const std::size_t valid = 1 + rng.below(8);
      auto ids = random_ids(rng, valid, 8, 30);
      std::vector<double> sum(e.cols(), 0.0);
      for (std::size_t i = 0; i < valid; ++i)
        for (std::size_t c = 0; c < sum.size(); ++c) sum[c] += e.at(static_cast<std::size_t>(ids[i]), c);
      CHECK(std::abs(forward_doc(g, p, ids, valid).probs[1] - logistic(sum, p)[1]) < 1e-12);
    }
  }

  TEST_CASE("attention pooling over hidden states") {
    const std::size_t d = 3;
    std::vector<Tensor<double>> hs{Tensor<double>({1, d}, {0, 1, 0}), Tensor<double>({1, d}, {1, 0, 0}),
                                   Tensor<double>({1, d}, {0, 1, 0.5}), Tensor<double>({1, d}, {0, 0.5, 1})};
    Tensor<double> eye({d, d}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    Graph<double> g(false);

    SUBCASE("uniform scores average the hidden states") {
      AttentionPoolParams<double> p{eye, Tensor<double>({d}), Tensor<double>({d, 1})};
      auto r = attend_states<double>(g, hs, p);
      for (std::size_t i = 0; i < 4; ++i) CHECK(r.attention[i] == 0.25);
      for (std::size_t c = 0; c < d; ++c) {
        double mean = 0;
        for (const auto& h : hs) mean += h[c] / 4.0;
        CHECK(std::abs(r.context[c] - mean) < 1e-15);
      }
    }
    SUBCASE("a dominant score selects one hidden state") {
      // tanh(10 h) . [20, -20, -20]: about +20 for h_2, at most about -10 elsewhere.
      Tensor<double> w = eye;
      for (auto& x : w.data()) x *= 10;
      AttentionPoolParams<double> p{w, Tensor<double>({d}), Tensor<double>({d, 1}, {20, -20, -20})};
      auto r = attend_states<double>(g, hs, p);
      CHECK(r.attention[1] > 1 - 1e-12);
      for (std::size_t c = 0; c < d; ++c) CHECK(std::abs(r.context[c] - hs[1][c]) < 1e-12);
    }
  }

  TEST_CASE("attention-LSTM records a distribution over valid steps") {
    auto p = make_params(ModelKind::attlstm, 19);
    Rng rng(19);
    auto ids = random_ids(rng, 5, 8, 30);
    Graph<double> g(false);
    auto r = forward_doc(g, p, ids, 5);
    const auto& a = r.attention->attention;
    CHECK(std::abs(std::accumulate(a.begin(), a.end(), 0.0) - 1.0) < 1e-12);
    CHECK(a[5] == 0.0);
    CHECK(r.attention->affinity.empty());

    auto hs = lstm_states(g, embed(g, p.get("embedding"), ids), lstm(p), 5);
    auto pooled = attend_states<double>(g, hs, attention_pool(p));
    CHECK(std::abs(r.probs[1] - logistic(values(pooled.context), p)[1]) < 1e-12);
  }

  TEST_CASE("end-to-end gradients for SIARN and MIARN") {
    for (auto kind : {ModelKind::siarn, ModelKind::miarn}) {
      for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto p = make_params(kind, seed, 12, 8, 8, 4);
        Rng rng(seed);
        support::redraw(p, rng, 0.5);
        std::vector<corpus::EncodedDoc> docs;
        for (int d = 0; d < 2; ++d) {
          const std::size_t valid = 2 + rng.below(5);
          docs.push_back({random_ids(rng, valid, 6, 12), valid, d % 2});
        }
        auto batch = corpus::make_batch(docs);
        auto tensors = p.tensors();
        auto f = [&](Graph<double>& g) { return batch_loss(g, p, batch, 1e-3); };
        auto report = num::grad_check_report(f, tensors, 1e-4);
        INFO(std::string(to_string(kind)) << " seed " << seed << " worst param "
                                          << p.entries()[report.worst_param].name << " analytic "
                                          << report.analytic << " numeric " << report.numeric);
        CHECK(report.max_relative_error < 1e-4);
      }
    }
  }
}
