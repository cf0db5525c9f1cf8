#include <cmath>
#include <random>

#include <doctest.h>

#include "oracles.hpp"
#include "sparsevit/errors.hpp"
#include "sparsevit/eval.hpp"

using namespace sparsevit;

namespace {

FeatureSet random_features(int count, int dim, int num_classes, std::uint32_t seed) {
    std::mt19937 gen(seed);
    FeatureSet fs;
    std::vector<float> row(dim);
    for (int i = 0; i < count; ++i) {
        for (float& v : row) v = float(gen() >> 8) * (2.0f / 16777216.0f) - 1.0f;
        fs.push(row, int(gen() % std::uint32_t(num_classes)));
    }
    return fs;
}

}  // namespace

TEST_CASE("knn trivial cases") {
    FeatureSet train;
    train.push(std::vector<float>{0.0f, 0.0f}, 3);
    train.push(std::vector<float>{1.0f, 0.0f}, 1);
    train.push(std::vector<float>{0.0f, 1.0f}, 1);
    train.push(std::vector<float>{5.0f, 5.0f}, 3);
    train.push(std::vector<float>{5.0f, 6.0f}, 3);

    // exact hit at k=1
    CHECK(knn_classify(train, std::vector<float>{1.0f, 0.0f}, 1) == 1);
    // k = M: majority class wins (3 appears three times, 1 twice)
    CHECK(knn_classify(train, std::vector<float>{0.0f, 0.0f}, 5) == 3);
    // k beyond M clamps
    CHECK(knn_classify(train, std::vector<float>{0.0f, 0.0f}, 50) == 3);
}

TEST_CASE("knn tie rules: equidistant keeps the lower row index, vote ties the smaller label") {
    FeatureSet train;
    train.push(std::vector<float>{1.0f}, 7);   // index 0, distance 1
    train.push(std::vector<float>{-1.0f}, 2);  // index 1, distance 1
    train.push(std::vector<float>{9.0f}, 7);
    // k=1: both at distance 1, the lower index (label 7) wins
    CHECK(knn_classify(train, std::vector<float>{0.0f}, 1) == 7);
    // k=2: one vote each, the smaller label wins
    CHECK(knn_classify(train, std::vector<float>{0.0f}, 2) == 2);
}

TEST_CASE("knn matches the exhaustive-sort oracle on random data") {
    const FeatureSet train = random_features(50, 8, 4, 99);
    std::mt19937 gen(100);
    std::vector<float> query(8);
    for (int it = 0; it < 40; ++it) {
        for (float& v : query) v = float(gen() >> 8) * (2.0f / 16777216.0f) - 1.0f;
        CHECK(knn_classify(train, query, 20) == oracles::knn(train, query, 20));
    }
}

TEST_CASE("knn is invariant under common positive feature scaling") {
    const FeatureSet train = random_features(30, 6, 3, 101);
    FeatureSet scaled = train;
    for (float& v : scaled.data) v *= 4.0f;  // exact in float
    std::mt19937 gen(102);
    std::vector<float> query(6), scaled_query(6);
    for (int it = 0; it < 20; ++it) {
        for (int j = 0; j < 6; ++j) {
            query[j] = float(gen() >> 8) * (2.0f / 16777216.0f) - 1.0f;
            scaled_query[j] = query[j] * 4.0f;
        }
        CHECK(knn_classify(train, query, 5) == knn_classify(scaled, scaled_query, 5));
    }
}

TEST_CASE("knn validation errors") {
    FeatureSet empty;
    CHECK_THROWS_AS(knn_classify(empty, std::vector<float>{1.0f}, 1), ValidationError);
    FeatureSet train;
    train.push(std::vector<float>{1.0f, 2.0f}, 0);
    CHECK_THROWS_AS(knn_classify(train, std::vector<float>{1.0f}, 1), ShapeError);
    CHECK_THROWS_AS(knn_classify(train, std::vector<float>{1.0f, 2.0f}, 0),
                    ValidationError);
}

TEST_CASE("metrics on perfect and half-wrong predictions") {
    const std::vector<int> labels{0, 0, 1, 1};
    const Metrics perfect = compute_metrics(labels, labels, 2);
    CHECK(perfect.accuracy == 1.0);
    CHECK(perfect.balanced_accuracy == 1.0);
    CHECK(perfect.weighted_f1 == 1.0);

    // one of two balanced classes fully misclassified
    const std::vector<int> preds{0, 0, 0, 0};
    const Metrics half = compute_metrics(preds, labels, 2);
    CHECK(half.accuracy == 0.5);
    CHECK(half.balanced_accuracy == 0.5);
}

TEST_CASE("metrics match the confusion-matrix oracle on random predictions") {
    std::mt19937 gen(103);
    std::vector<int> labels(100), preds(100);
    for (int i = 0; i < 100; ++i) {
        labels[i] = int(gen() % 5);
        preds[i] = int(gen() % 5);
    }
    const Metrics got = compute_metrics(preds, labels, 5);
    const oracles::MetricsOracle expected = oracles::metrics_from_confusion(preds, labels, 5);
    CHECK(std::abs(got.accuracy - expected.accuracy) < 1e-9);
    CHECK(std::abs(got.balanced_accuracy - expected.balanced_accuracy) < 1e-9);
    CHECK(std::abs(got.weighted_f1 - expected.weighted_f1) < 1e-9);
    CHECK(got.accuracy >= 0.0);
    CHECK(got.accuracy <= 1.0);
    CHECK(got.balanced_accuracy >= 0.0);
    CHECK(got.balanced_accuracy <= 1.0);
    CHECK(got.weighted_f1 >= 0.0);
    CHECK(got.weighted_f1 <= 1.0);
}

TEST_CASE("accuracy equals balanced accuracy on balanced classes") {
    std::mt19937 gen(104);
    std::vector<int> labels, preds;
    for (int c = 0; c < 4; ++c)
        for (int i = 0; i < 25; ++i) {
            labels.push_back(c);
            preds.push_back(int(gen() % 4));
        }
    const Metrics m = compute_metrics(preds, labels, 4);
    CHECK(m.accuracy == doctest::Approx(m.balanced_accuracy).epsilon(1e-12));
}

TEST_CASE("metrics validation errors") {
    const std::vector<int> labels{0, 1};
    CHECK_THROWS_AS(compute_metrics(std::vector<int>{0}, labels, 2), ShapeError);
    CHECK_THROWS_AS(compute_metrics(std::vector<int>{0, 2}, labels, 2), ValidationError);
    CHECK_THROWS_AS(compute_metrics(std::vector<int>{}, std::vector<int>{}, 2),
                    ValidationError);
}

TEST_CASE("feature set validation") {
    FeatureSet fs;
    fs.push(std::vector<float>{1.0f, 2.0f}, 0);
    CHECK_THROWS_AS(fs.push(std::vector<float>{1.0f}, 0), ShapeError);
    fs.data[0] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(fs.validate(), ValidationError);
}
