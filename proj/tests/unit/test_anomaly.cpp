#include <algorithm>
#include <random>

#include "doctest.h"
#include "flowvgae/anomaly/anomaly.hpp"

using namespace flowvgae::anomaly;

namespace {

std::vector<double> iota_values(int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = i;
  return v;
}

NodeLosses one_graph(std::vector<double> feat, std::vector<double> st, std::vector<double> kl,
                     std::vector<std::uint8_t> labels) {
  NodeLosses n;
  n.feat_mse = feat;
  n.feat_cosine = feat;
  n.structure = std::move(st);
  n.kl = std::move(kl);
  n.labels = std::move(labels);
  return n;
}

}  // namespace

TEST_CASE("robust scaling") {
  const std::vector<double> x = {1, 2, 3, 4, 5};
  const auto s = robust_scale(x);
  const std::vector<double> expect = {-1.0, -0.5, 0.0, 0.5, 1.0};
  for (std::size_t i = 0; i < 5; ++i) CHECK(s[i] == doctest::Approx(expect[i]).epsilon(1e-12));
  const std::vector<double> flat = {7, 7, 7};
  for (double v : robust_scale(flat)) CHECK(v == 0.0);
  CHECK_THROWS(robust_scale(std::vector<double>{}));
}

TEST_CASE("quantile interpolates linearly") {
  const auto v = iota_values(100);
  CHECK(quantile(v, 0.95) == doctest::Approx(94.05));
  CHECK(quantile(v, 0.0) == 0.0);
  CHECK(quantile(v, 1.0) == 99.0);
  CHECK(quantile(std::vector<double>{3.0}, 0.5) == 3.0);
  CHECK_THROWS(quantile(std::vector<double>{}, 0.5));
}

TEST_CASE("weighted score") {
  auto n = one_graph({1}, {2}, {3}, {0});
  ScoreConfig cfg{0.5, 0.1, 1.0, true, 95};
  CHECK(anomaly_score(n, cfg)[0] == doctest::Approx(3.7));
  n.feat_cosine = {10};
  cfg.use_mse = false;
  CHECK(anomaly_score(n, cfg)[0] == doctest::Approx(8.2));
}

TEST_CASE("threshold and strict classification") {
  const auto v = iota_values(100);
  const auto t = fit_threshold(v, 95);
  CHECK(t.value == doctest::Approx(94.05));
  const auto flags = classify(v, t);
  CHECK(std::count(flags.begin(), flags.end(), 1) == 5);
  const std::vector<double> same(10, 2.5);
  const auto t2 = fit_threshold(same, 95);
  CHECK(t2.value == 2.5);
  const auto none = classify(same, t2);
  CHECK(std::count(none.begin(), none.end(), 1) == 0);
  CHECK_THROWS(fit_threshold(std::vector<double>{}, 95));
}

TEST_CASE("metrics on an all-benign prediction") {
  std::vector<std::uint8_t> labels(100, 0), flags(100, 0);
  std::fill(labels.begin(), labels.begin() + 50, 1);
  const auto m = compute_metrics(flags, labels);
  CHECK(m.accuracy == 0.5);
  CHECK(m.recall_macro == 0.5);
  CHECK(m.f1_macro == doctest::Approx(1.0 / 3.0));
  CHECK(m.fn == 50);
  CHECK(m.tn == 50);
}

TEST_CASE("metrics edge cases") {
  std::vector<std::uint8_t> labels = {0, 1, 1, 0, 1};
  const auto perfect = compute_metrics(labels, labels);
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.f1_macro == 1.0);
  CHECK(perfect.recall_macro == 1.0);

  // swapping the class names leaves the macro means unchanged
  std::vector<std::uint8_t> flags = {0, 1, 0, 1, 1};
  auto inv = [](std::vector<std::uint8_t> v) {
    for (auto& x : v) x = static_cast<std::uint8_t>(1 - x);
    return v;
  };
  const auto a = compute_metrics(flags, labels);
  const auto b = compute_metrics(inv(flags), inv(labels));
  CHECK(a.f1_macro == doctest::Approx(b.f1_macro));
  CHECK(a.recall_macro == doctest::Approx(b.recall_macro));
  CHECK(a.accuracy == b.accuracy);

  // only benign present and predicted: the empty class is left out
  std::vector<std::uint8_t> zeros(4, 0);
  const auto z = compute_metrics(zeros, zeros);
  CHECK(z.f1_macro == 1.0);
  CHECK(z.recall_macro == 1.0);

  CHECK_THROWS_AS(compute_metrics(flags, std::vector<std::uint8_t>{0, 1}), std::invalid_argument);
  CHECK_THROWS_AS(compute_metrics(std::vector<std::uint8_t>{}, std::vector<std::uint8_t>{}),
                  std::invalid_argument);
  CHECK_THROWS_AS(compute_metrics(std::vector<std::uint8_t>{2}, std::vector<std::uint8_t>{2}),
                  std::invalid_argument);
}

TEST_CASE("roc auc") {
  CHECK(roc_auc(std::vector<double>{0.1, 0.2, 0.9, 0.8}, std::vector<std::uint8_t>{0, 0, 1, 1}) == 1.0);
  CHECK(roc_auc(std::vector<double>{0.9, 0.8, 0.1, 0.2}, std::vector<std::uint8_t>{0, 0, 1, 1}) == 0.0);
  CHECK(roc_auc(std::vector<double>{1, 1, 1, 1}, std::vector<std::uint8_t>{0, 1, 0, 1}) == 0.5);
  CHECK(roc_auc(std::vector<double>{0.1, 0.5, 0.4, 0.9}, std::vector<std::uint8_t>{0, 0, 1, 1}) ==
        0.75);
}

TEST_CASE("default grid") {
  const auto g = default_grid();
  CHECK(g.size() == 216);
  auto sorted = g;
  std::sort(sorted.begin(), sorted.end());
  CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
}

TEST_CASE("grid search picks the best entry") {
  // anomalies show up only in the KL channel
  std::mt19937_64 rng(3);
  std::normal_distribution<double> noise;
  auto make = [&](int n) {
    NodeLosses g;
    for (int i = 0; i < n; ++i) {
      const bool a = i % 10 == 0;
      g.feat_mse.push_back(noise(rng));
      g.feat_cosine.push_back(noise(rng));
      g.structure.push_back(noise(rng));
      g.kl.push_back(noise(rng) + (a ? 8.0 : 0.0));
      g.labels.push_back(a ? 1 : 0);
    }
    return scale_channels(g);
  };
  std::vector<NodeLosses> fit = {make(200), make(200)};
  std::vector<NodeLosses> eval = {make(200)};
  const auto r = grid_search(fit, eval, default_grid());
  CHECK(r.entries.size() == 216);
  for (const auto& e : r.entries) CHECK(e.metrics.f1_macro <= r.best.metrics.f1_macro);
  CHECK(r.best.config.gamma == 1.0);
  CHECK(r.best.config.alpha < r.best.config.gamma);
  CHECK(r.best.metrics.f1_macro > 0.9);
}

TEST_CASE("scaling is per graph and channel") {
  auto g = one_graph({1, 2, 3, 4, 5}, {10, 20, 30, 40, 50}, {5, 5, 5, 5, 5}, {0, 0, 0, 0, 1});
  const auto s = scale_channels(g);
  CHECK(s.feat_mse == s.structure);
  CHECK(s.kl == std::vector<double>(5, 0.0));
  CHECK(s.labels == g.labels);
}
