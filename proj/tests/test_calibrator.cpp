#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "helpers.hpp"
#include "slogan/calibrator.hpp"
#include "slogan/error.hpp"
#include "slogan/model.hpp"

using namespace slogan;

namespace {

bool contains(const ConfidentSet& set, std::int64_t id) {
  for (const auto& m : set.members)
    if (m.id == id) return true;
  return false;
}

std::vector<PredictionRecord> random_pool(std::size_t n, std::size_t classes, Rng& rng) {
  std::vector<PredictionRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<real> p(classes);
    real total = 0;
    for (auto& v : p) total += v = static_cast<real>(std::exp(3 * rng.normal()));
    for (auto& v : p) v /= total;
    out.push_back(make_record(std::int64_t(i), i, p));
  }
  return out;
}

void check_members_clear_threshold(const ConfidentSet& set, const ThresholdTable& t) {
  for (const auto& m : set.members) CHECK(m.confidence > t.thresholds[std::size_t(m.pseudo_label)]);
}

}  // namespace

TEST_SUITE("calibrator") {
  TEST_CASE("prediction records take the max with lowest-index ties") {
    const auto u = make_record(0, 0, {0.25, 0.25, 0.25, 0.25});
    CHECK(u.confidence == 0.25);
    CHECK(u.predicted == 0);
    const auto r = make_record(1, 1, {0.1, 0.7, 0.7});
    CHECK(r.predicted == 1);
    const auto s = make_record(2, 2, {0.7, 0.2, 0.1});
    CHECK(s.confidence == real(0.7));
    CHECK(s.predicted == 0);
    CHECK_THROWS_AS(make_record(3, 3, {}), Error);
  }

  TEST_CASE("threshold and membership example") {
    const auto pool = test::threshold_example_pool();
    const auto t = build_thresholds(pool, 2, real(0.95));
    CHECK(t.max_confidence[0] == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(t.max_confidence[1] == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(t.thresholds[0] == doctest::Approx(0.76).epsilon(1e-12));
    CHECK(t.thresholds[1] == doctest::Approx(0.855).epsilon(1e-12));
    const auto set = select_confident(pool, t);
    CHECK(contains(set, 0));
    CHECK_FALSE(contains(set, 1));
    CHECK(contains(set, 2));
    CHECK(set.size() == 2);
    for (const auto& m : set.members) CHECK(m.pseudo_label == pool[m.index].predicted);
  }

  TEST_CASE("threshold fallbacks and edge cases") {
    const std::vector<PredictionRecord> one{make_record(0, 0, {1, 0, 0})};
    const auto t = build_thresholds(one, 3, real(0.95));
    CHECK(t.thresholds[0] == doctest::Approx(0.95));
    CHECK(t.thresholds[1] == real(0.95));
    CHECK(t.thresholds[2] == real(0.95));
    CHECK_FALSE(t.observed[2]);
    CHECK_THROWS_AS(build_thresholds(std::vector<PredictionRecord>{}, 2, real(0.95)), Error);
    CHECK_THROWS_AS(build_thresholds(one, 3, 0), ConfigError);
    CHECK_THROWS_AS(build_thresholds(one, 3, real(1.5)), ConfigError);
  }

  TEST_CASE("tau = 1 admits nothing and the class maximum is admitted below 1") {
    Rng rng(1);
    const auto pool = random_pool(200, 3, rng);
    CHECK(select_confident(pool, build_thresholds(pool, 3, 1)).empty());
    const auto t = build_thresholds(pool, 3, real(0.99));
    const auto set = select_confident(pool, t);
    for (std::size_t c = 0; c < 3; ++c) {
      if (!t.observed[c]) continue;
      bool found = false;
      for (const auto& m : set.members) found = found || (m.pseudo_label == int(c) && m.confidence == t.max_confidence[c]);
      CHECK(found);
    }
  }

  TEST_CASE("confident set grows monotonically as tau falls") {
    Rng rng(2);
    for (int trial = 0; trial < 5; ++trial) {
      const auto pool = random_pool(300, 4, rng);
      std::vector<std::int64_t> previous;
      for (int step = 99; step >= 50; --step) {
        const real tau = static_cast<real>(step / 100.0);
        const auto t = build_thresholds(pool, 4, tau);
        const auto set = select_confident(pool, t);
        check_members_clear_threshold(set, t);
        std::vector<std::int64_t> ids;
        for (const auto& m : set.members) ids.push_back(m.id);
        CHECK(std::includes(ids.begin(), ids.end(), previous.begin(), previous.end()));
        previous = ids;
      }
    }
  }

  TEST_CASE("adaptive thresholds admit both classes on a skewed pool") {
    const auto pool = test::skewed_pool();
    const auto adaptive = select_confident(pool, build_thresholds(pool, 2, real(0.95)));
    std::set<int> adaptive_classes, fixed_classes;
    for (const auto& m : adaptive.members) adaptive_classes.insert(m.pseudo_label);
    for (const auto& r : pool)
      if (r.confidence > real(0.95)) fixed_classes.insert(r.predicted);
    CHECK(adaptive_classes == std::set<int>{0, 1});
    CHECK(fixed_classes == std::set<int>{0});
  }

  TEST_CASE("supervised loss examples") {
    const std::vector<int> y0{0};
    CHECK(nll_from_probs(Tensor::from({1, 2}, {1, 0}), y0).item() == 0);
    CHECK(nll_from_probs(Tensor::from({1, 2}, {std::exp(-1.0), 1 - std::exp(-1.0)}), y0).item() ==
          doctest::Approx(1.0).epsilon(1e-12));
    const std::vector<int> y2{0, 1};
    CHECK(nll_from_probs(Tensor::from({2, 2}, {1, 0, 1 - std::exp(-2.0), std::exp(-2.0)}), y2).item() ==
          doctest::Approx(1.0).epsilon(1e-12));

    // logits [a, a] give p = 0.5
    CHECK(target_loss(Tensor::from({1, 2}, {0.3, 0.3}), y0).item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(target_loss(Tensor::zeros({0, 2}), std::vector<int>{}).item() == 0);
    CHECK(target_loss(Tensor::from({1, 2}, {50, -50}), y0).item() < 1e-12);
    CHECK(source_loss(Tensor::from({1, 3}, {1, 1, 1}), y0).item() == doctest::Approx(std::log(3.0)).epsilon(1e-12));

    CHECK(sup_loss(Tensor::scalar(0), Tensor::scalar(0)).item() == 0);
    CHECK(sup_loss(Tensor::scalar(1.0), Tensor::scalar(0.5)).item() == 1.5);
    CHECK(sup_loss(Tensor::scalar(0.7), target_loss(Tensor::zeros({0, 2}), std::vector<int>{})).item() == real(0.7));
  }

  TEST_CASE("score_target is deterministic and covers the dataset") {
    Rng rng(3);
    Dataset ds = test::random_dataset(37, 4, rng);
    const SloganModel model = SloganModel::init(4, 2, DisentangleConfig{}, rng);
    const auto a = score_target(ds, model, 8);
    const auto b = score_target(ds, model);
    REQUIRE(a.size() == ds.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].index == i);
      CHECK(a[i].id == ds.graphs[i].id);
      CHECK(a[i].probs == b[i].probs);
      real total = 0;
      for (auto p : a[i].probs) total += p;
      CHECK(std::abs(total - 1) < 1e-6);
    }
    // probabilities come from the causal head alone
    const auto out = model.forward(make_batch(ds, std::vector<std::size_t>{0, 1, 2}));
    const Tensor probs = softmax_rows(out.logits);
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(probs.at(i, 1) - a[i].probs[1]) < 1e-12);
    CHECK_THROWS_AS(score_target(Dataset{}, model), DataError);
  }

  TEST_CASE("confident csv lists every record with its admission flag") {
    const auto pool = test::threshold_example_pool();
    const auto t = build_thresholds(pool, 2, real(0.95));
    const auto dir = std::filesystem::temp_directory_path() / "slogan_calibrator_test";
    std::filesystem::create_directories(dir);
    write_confident_csv(dir / "c.csv", pool, t);
    std::ifstream in(dir / "c.csv");
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line)) lines.push_back(line);
    std::filesystem::remove_all(dir);
    REQUIRE(lines.size() == 4);
    CHECK(lines[0] == "id,predicted,confidence,admitted");
    CHECK(lines[1] == "0,0,0.8,1");
    CHECK(lines[2] == "1,0,0.6,0");
    CHECK(lines[3] == "2,1,0.9,1");
  }
}
