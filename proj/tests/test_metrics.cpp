#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "segmicro/metrics.hpp"
#include "segmicro/ops.hpp"
#include "support/oracles.hpp"

using namespace segmicro;
using namespace segmicro::test;

TEST_CASE("cross entropy on a perfect one-hot prediction is ~0") {
  Tensor4<double> probs({1, 2, 2, 3});
  Tensor4<double> targets({1, 2, 2, 3});
  for (int y = 0; y < 2; ++y) {
    for (int x = 0; x < 2; ++x) {
      probs.at(0, y, x, (y + x) % 3) = 1.0;
      targets.at(0, y, x, (y + x) % 3) = 1.0;
    }
  }
  const auto out = cross_entropy(probs, targets);
  CHECK(std::abs(out.loss) < 1e-6);
}

TEST_CASE("uniform prediction over 3 classes costs ln 3") {
  Tensor4<double> probs({1, 2, 2, 3}, 1.0 / 3.0);
  Tensor4<double> targets({1, 2, 2, 3});
  for (int y = 0; y < 2; ++y) {
    for (int x = 0; x < 2; ++x) targets.at(0, y, x, 1) = 1.0;
  }
  const auto out = cross_entropy(probs, targets);
  CHECK(out.loss == doctest::Approx(std::log(3.0)).epsilon(1e-9));
}

TEST_CASE("fused gradient matches finite differences through the softmax") {
  Rng rng(12);
  const auto logits = random_tensor<double>({1, 3, 3, 3}, rng, -2.0, 2.0);
  Tensor4<double> targets({1, 3, 3, 3});
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 3; ++x) {
      targets.at(0, y, x, static_cast<int>(rng.index(3))) = 1.0;
    }
  }

  const auto probs = softmax_channels(logits);
  const auto fused = cross_entropy(probs, targets);

  auto loss_of_logits = [&](const Tensor4<double>& probe) {
    return cross_entropy(softmax_channels(probe), targets).loss;
  };
  const auto numeric = fd_gradient<double>(logits, loss_of_logits);
  CHECK(max_rel_err(fused.grad, numeric) < 1e-4);
}

TEST_CASE("fused gradient sums to zero over channels per pixel") {
  Rng rng(13);
  const auto logits = random_tensor<double>({2, 4, 4, 3}, rng, -3.0, 3.0);
  Tensor4<double> targets({2, 4, 4, 3});
  for (int b = 0; b < 2; ++b) {
    for (int y = 0; y < 4; ++y) {
      for (int x = 0; x < 4; ++x) {
        targets.at(b, y, x, static_cast<int>(rng.index(3))) = 1.0;
      }
    }
  }
  const auto out = cross_entropy(softmax_channels(logits), targets);
  for (std::size_t px = 0; px < out.grad.size() / 3; ++px) {
    double sum = 0.0;
    for (int c = 0; c < 3; ++c) sum += out.grad[px * 3 + c];
    CHECK(std::abs(sum) < 1e-6);
  }
}

TEST_CASE("cross entropy validates its preconditions") {
  Tensor4<double> probs({1, 1, 1, 3}, {0.5, 0.2, 0.3});
  Tensor4<double> bad_shape({1, 1, 1, 2});
  CHECK_THROWS_AS(cross_entropy(probs, bad_shape), ShapeError);

  Tensor4<double> two_hot({1, 1, 1, 3}, {1.0, 1.0, 0.0});
  CHECK_THROWS_AS(cross_entropy(probs, two_hot), DataError);

  Tensor4<double> not_normalized({1, 1, 1, 3}, {0.9, 0.9, 0.9});
  Tensor4<double> one_hot_t({1, 1, 1, 3}, {1.0, 0.0, 0.0});
  CHECK_THROWS_AS(cross_entropy(not_normalized, one_hot_t), DataError);
}

TEST_CASE("pixel accuracy counting") {
  LabelMap a(2, 2, 2);
  LabelMap b(2, 2, 2);
  CHECK(pixel_accuracy(a, b) == 1.0);

  for (std::size_t i = 0; i < b.size(); ++i) b.labels[i] = 1;
  CHECK(pixel_accuracy(a, b) == 0.0);

  b.labels = {0, 1, 1, 0};
  a.labels = {0, 0, 1, 1};
  CHECK(pixel_accuracy(a, b) == 0.5);

  LabelMap c(2, 3, 2);
  CHECK_THROWS_AS(pixel_accuracy(a, c), ShapeError);
}

TEST_CASE("dice spot values") {
  SUBCASE("identical masks with the class present") {
    LabelMap a(2, 3, 3);
    a.labels = {0, 1, 1, 0, 2, 1};
    CHECK(dice(a, a, 1) == 1.0);
    CHECK(dice(a, a, 2) == 1.0);
  }
  SUBCASE("disjoint nonempty masks") {
    LabelMap a(1, 4, 2), b(1, 4, 2);
    a.labels = {1, 1, 0, 0};
    b.labels = {0, 0, 1, 1};
    CHECK(dice(a, b, 1) == 0.0);
  }
  SUBCASE("TP=2 FP=1 FN=1 gives 4/6") {
    LabelMap pred(2, 3, 2), truth(2, 3, 2);
    // Constructed confusion: pred 1s at {0,1,2}, truth 1s at {0,1,3}.
    pred.labels = {1, 1, 1, 0, 0, 0};
    truth.labels = {1, 1, 0, 1, 0, 0};
    CHECK(dice(pred, truth, 1) == doctest::Approx(4.0 / 6.0).epsilon(1e-12));
  }
  SUBCASE("class absent from both maps scores 1.0") {
    LabelMap a(2, 2, 3), b(2, 2, 3);
    CHECK(dice(a, b, 2) == 1.0);
  }
  SUBCASE("class id outside the domain") {
    LabelMap a(2, 2, 3);
    CHECK_THROWS_AS(dice(a, a, 3), DomainError);
    CHECK_THROWS_AS(dice(a, a, -1), DomainError);
  }
}

TEST_CASE("dice properties: symmetry, range and the counting identity") {
  Rng rng(14);
  for (int trial = 0; trial < 25; ++trial) {
    LabelMap a(8, 8, 3), b(8, 8, 3);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a.labels[i] = static_cast<std::uint8_t>(rng.index(3));
      b.labels[i] = static_cast<std::uint8_t>(rng.index(3));
    }
    for (int cls = 0; cls < 3; ++cls) {
      const double d = dice(a, b, cls);
      CHECK(d == dice(b, a, cls));
      CHECK(d >= 0.0);
      CHECK(d <= 1.0);

      // 2TP + FP + FN = |pred positives| + |truth positives|.
      std::int64_t tp = 0, fp = 0, fn = 0, pa = 0, pb = 0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        const bool ia = a.labels[i] == cls;
        const bool ib = b.labels[i] == cls;
        tp += ia && ib;
        fp += ia && !ib;
        fn += !ia && ib;
        pa += ia;
        pb += ib;
      }
      CHECK(2 * tp + fp + fn == pa + pb);
    }
  }
}

TEST_CASE("dice_report pools global confusion counts") {
  SUBCASE("single pair equals the per-pair ops") {
    LabelMap pred(2, 3, 3), truth(2, 3, 3);
    pred.labels = {0, 1, 2, 1, 0, 2};
    truth.labels = {0, 1, 1, 1, 2, 2};
    const auto report = dice_report({pred}, {truth}, 3);
    CHECK(report.sample_count == 1);
    CHECK(report.test_accuracy == pixel_accuracy(pred, truth));
    for (int c = 0; c < 3; ++c) {
      CHECK(report.per_class_dice.at(c) == dice(pred, truth, c));
    }
  }
  SUBCASE("duplicating a pair does not change the report") {
    LabelMap pred(4, 4, 3), truth(4, 4, 3);
    Rng rng(15);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      pred.labels[i] = static_cast<std::uint8_t>(rng.index(3));
      truth.labels[i] = static_cast<std::uint8_t>(rng.index(3));
    }
    const auto once = dice_report({pred}, {truth}, 3);
    const auto twice = dice_report({pred, pred}, {truth, truth}, 3);
    CHECK(once.test_accuracy == twice.test_accuracy);
    for (int c = 0; c < 3; ++c) {
      CHECK(once.per_class_dice.at(c) == twice.per_class_dice.at(c));
    }
  }
  SUBCASE("two unequal samples match the brute-force global tally") {
    Rng rng(16);
    std::vector<LabelMap> preds, truths;
    for (int s = 0; s < 2; ++s) {
      LabelMap p(5, 7, 3), t(5, 7, 3);
      for (std::size_t i = 0; i < p.size(); ++i) {
        p.labels[i] = static_cast<std::uint8_t>(rng.index(3));
        t.labels[i] = static_cast<std::uint8_t>(rng.index(3));
      }
      preds.push_back(p);
      truths.push_back(t);
    }
    const auto report = dice_report(preds, truths, 3);
    const auto tally = confusion_tally(preds, truths, 3);
    CHECK(report.test_accuracy ==
          static_cast<double>(tally.correct) /
              static_cast<double>(tally.total));
    for (int c = 0; c < 3; ++c) {
      const auto denom = 2 * tally.tp[c] + tally.fp[c] + tally.fn[c];
      const double expect =
          denom == 0 ? 1.0 : 2.0 * static_cast<double>(tally.tp[c]) / denom;
      CHECK(report.per_class_dice.at(c) == expect);
    }
  }
  SUBCASE("length mismatch is a shape error") {
    LabelMap p(2, 2, 2);
    CHECK_THROWS_AS(dice_report({p, p}, {p}, 2), ShapeError);
  }
  SUBCASE("per-image averaging mode means the per-pair scores") {
    LabelMap perfect(2, 2, 2);
    LabelMap half_pred(2, 2, 2), half_truth(2, 2, 2);
    half_pred.labels = {1, 1, 0, 0};
    half_truth.labels = {1, 0, 1, 0};
    const auto averaged = dice_report({perfect, half_pred},
                                      {perfect, half_truth}, 2, true);
    CHECK(averaged.test_accuracy ==
          doctest::Approx((1.0 + 0.5) / 2.0));
    CHECK(averaged.per_class_dice.at(1) ==
          doctest::Approx((1.0 + 0.5) / 2.0));

    const auto pooled =
        dice_report({perfect, half_pred}, {perfect, half_truth}, 2, false);
    CHECK(pooled.test_accuracy == doctest::Approx(6.0 / 8.0));
  }
}

TEST_CASE("report serializes foreground dice entries") {
  MetricsReport report;
  report.test_accuracy = 0.875;
  report.per_class_dice = {{0, 0.99}, {1, 0.9}, {2, 0.8}};
  report.sample_count = 4;
  const std::string json = report.to_json();
  CHECK(json.find("\"accuracy\": 0.875") != std::string::npos);
  CHECK(json.find("\"dice.1\": 0.9") != std::string::npos);
  CHECK(json.find("\"dice.2\": 0.8") != std::string::npos);
  CHECK(json.find("dice.0") == std::string::npos);
  CHECK(json.find("\"samples\": 4") != std::string::npos);
}
