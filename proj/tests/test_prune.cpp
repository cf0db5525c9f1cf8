#include <algorithm>
#include <cmath>
#include <random>

#include <doctest.h>

#include "sparsevit/errors.hpp"
#include "sparsevit/prune.hpp"

using namespace sparsevit;

namespace {

CapturedGlobalRows make_captured(int heads, int num_global,
                                 const std::vector<std::vector<float>>& rows) {
    CapturedGlobalRows cap;
    cap.heads = heads;
    cap.num_global = num_global;
    cap.rows = Tensor2D(heads * num_global, int(rows[0].size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        std::copy(rows[r].begin(), rows[r].end(), cap.rows.row_ptr(int(r)));
    return cap;
}

}  // namespace

TEST_CASE("plan validation") {
    PruningPlan plan;
    CHECK_NOTHROW(plan.validate(6));
    plan.ratio = 1.0f;
    CHECK_THROWS_AS(plan.validate(6), ValidationError);
    plan.ratio = 0.5f;
    plan.layer = 0;
    CHECK_THROWS_AS(plan.validate(6), ValidationError);
    plan.layer = 7;
    CHECK_THROWS_AS(plan.validate(6), ValidationError);
}

TEST_CASE("importance scores: uniform row gives 1/N, globals get the sentinel") {
    const int n = 5;
    const std::vector<float> uniform(n, 1.0f / n);
    const auto cap = make_captured(1, 1, {uniform});
    const ImportanceScores s = importance_scores(cap, PruningPlan{});
    CHECK(std::isinf(s.scores[0]));
    for (int j = 1; j < n; ++j) CHECK(s.scores[j] == 1.0f / n);
}

TEST_CASE("importance scores average over heads") {
    const auto cap = make_captured(2, 1, {{0.0f, 0.6f, 0.4f}, {0.0f, 0.2f, 0.8f}});
    const ImportanceScores s = importance_scores(cap, PruningPlan{});
    CHECK(s.scores[1] == doctest::Approx(0.4).epsilon(1e-7));
    CHECK(s.scores[2] == doctest::Approx(0.6).epsilon(1e-7));
}

TEST_CASE("importance scores match a scalar-loop average over three heads") {
    std::mt19937 gen(5);
    const int n = 9, heads = 3;
    std::vector<std::vector<float>> rows(heads, std::vector<float>(n));
    for (auto& row : rows)
        for (float& v : row) v = float(gen() >> 8) * (1.0f / 16777216.0f);
    const auto cap = make_captured(heads, 1, rows);
    const ImportanceScores s = importance_scores(cap, PruningPlan{});
    for (int j = 1; j < n; ++j) {
        double sum = 0.0;
        for (int h = 0; h < heads; ++h) sum += double(rows[h][j]);
        CHECK(std::abs(double(s.scores[j]) - sum / heads) < 1e-7);
    }
}

TEST_CASE("patch scores keep the softmax mass not assigned to globals") {
    std::mt19937 gen(6);
    for (int heads : {1, 3}) {
        const int n = 12, g = 2;
        std::vector<std::vector<float>> rows(heads * g, std::vector<float>(n));
        double global_mass = 0.0;
        for (auto& row : rows) {
            double sum = 0.0;
            for (float& v : row) {
                v = float(gen() >> 8) * (1.0f / 16777216.0f);
                sum += v;
            }
            for (float& v : row) v = float(v / sum);  // softmax-shaped row
        }
        // mean CLS-row mass on the global positions, over heads
        for (int h = 0; h < heads; ++h)
            for (int j = 0; j < g; ++j) global_mass += double(rows[h * g][j]);
        global_mass /= heads;
        const auto cap = make_captured(heads, g, rows);
        const ImportanceScores s = importance_scores(cap, PruningPlan{});
        double patch_sum = 0.0;
        for (int j = g; j < n; ++j) {
            CHECK(s.scores[j] >= 0.0f);
            patch_sum += double(s.scores[j]);
        }
        CHECK(patch_sum == doctest::Approx(1.0 - global_mass).epsilon(1e-6));
    }
}

TEST_CASE("importance scores can average all global rows") {
    const auto cap = make_captured(1, 2, {{0.1f, 0.1f, 0.8f}, {0.3f, 0.3f, 0.4f}});
    PruningPlan plan;
    plan.score_source = ScoreSource::AllGlobalRowsMean;
    const ImportanceScores s = importance_scores(cap, plan);
    CHECK(std::isinf(s.scores[0]));
    CHECK(std::isinf(s.scores[1]));
    CHECK(s.scores[2] == doctest::Approx(0.6).epsilon(1e-7));
}

TEST_CASE("prune keeps the top patches and all globals") {
    const int n = 11;  // CLS + 10 patches
    Tensor2D seq(n, 2);
    for (int i = 0; i < n; ++i) seq.at(i, 0) = float(i);
    ImportanceScores scores;
    scores.scores = {std::numeric_limits<float>::infinity(), 0.1f, 0.9f, 0.2f, 0.8f, 0.3f,
                     0.7f, 0.4f, 0.6f, 0.05f, 0.5f};
    PruningPlan plan;
    plan.ratio = 0.6f;  // floor(0.6*10)=6 dropped, 4 kept
    const PruneResult r = prune_tokens(seq, scores, plan, 1);
    CHECK(r.kept == std::vector<int>{0, 2, 4, 6, 8});
    CHECK(r.reduced.rows() == 5);
    CHECK(r.reduced.at(1, 0) == 2.0f);  // rows follow original order
}

TEST_CASE("prune ratio zero keeps everything") {
    Tensor2D seq(6, 1);
    ImportanceScores scores;
    scores.scores.assign(6, 0.25f);
    scores.scores[0] = std::numeric_limits<float>::infinity();
    PruningPlan plan;
    plan.ratio = 0.0f;
    const PruneResult r = prune_tokens(seq, scores, plan, 1);
    CHECK(r.kept == std::vector<int>{0, 1, 2, 3, 4, 5});
}

TEST_CASE("score ties keep the lower original index") {
    Tensor2D seq(9, 1);  // CLS + 8 patches
    ImportanceScores scores;
    scores.scores.assign(9, 0.125f);
    scores.scores[0] = std::numeric_limits<float>::infinity();
    PruningPlan plan;
    plan.ratio = 0.5f;  // drop 4 of 8
    const PruneResult r = prune_tokens(seq, scores, plan, 1);
    CHECK(r.kept == std::vector<int>{0, 1, 2, 3, 4});
}

TEST_CASE("surviving count follows the floor rule across the ratio grid") {
    for (float p : {0.0f, 0.4f, 0.5f, 0.6f, 0.7f, 0.8f}) {
        for (int patches : {16, 256, 50176}) {
            const int n = 1 + patches;
            Tensor2D seq(n, 1);
            ImportanceScores scores;
            scores.scores.resize(n);
            scores.scores[0] = std::numeric_limits<float>::infinity();
            std::mt19937 gen(std::uint32_t(patches) + std::uint32_t(p * 100));
            for (int i = 1; i < n; ++i)
                scores.scores[i] = float(gen() >> 8) * (1.0f / 16777216.0f);
            PruningPlan plan;
            plan.ratio = p;
            const PruneResult r = prune_tokens(seq, scores, plan, 1);
            const int expected = 1 + patches - int(std::floor(double(p) * patches));
            CHECK(int(r.kept.size()) == expected);
            CHECK(r.reduced.rows() == expected);
        }
    }
}

TEST_CASE("kept set is invariant under positive score rescaling") {
    std::mt19937 gen(17);
    for (int iter = 0; iter < 20; ++iter) {
        const int patches = 12 + int(gen() % 20);
        const int n = 1 + patches;
        ImportanceScores scores;
        scores.scores.resize(n);
        scores.scores[0] = std::numeric_limits<float>::infinity();
        // distinct score levels so rescaling in float cannot create ties
        std::vector<int> levels(patches);
        for (int i = 0; i < patches; ++i) levels[i] = i;
        std::shuffle(levels.begin(), levels.end(), gen);
        for (int i = 0; i < patches; ++i)
            scores.scores[1 + i] = float(1 + levels[i]) / float(patches + 1);
        Tensor2D seq(n, 1);
        PruningPlan plan;
        plan.ratio = 0.4f;
        const PruneResult base = prune_tokens(seq, scores, plan, 1);
        for (float factor : {4.0f, 0.5f, 3.0f}) {
            ImportanceScores scaled;
            scaled.scores = scores.scores;
            for (float& s : scaled.scores) s *= factor;
            const PruneResult r = prune_tokens(seq, scaled, plan, 1);
            CHECK(r.kept == base.kept);
        }
    }
}

TEST_CASE("prune map marks exactly the complement of the kept set") {
    const TokenLayout layout(4, 4, 1);
    // kept patch indices {0, 5, 10, 15} -> token indices {1, 6, 11, 16}
    const std::vector<int> kept{0, 1, 6, 11, 16};
    const PruneMap map = prune_map(kept, layout, 14);
    CHECK(map.pruned_count() == 12);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) CHECK(map.at(r, c) == (r != c));

    std::vector<int> all(layout.total());
    for (int i = 0; i < layout.total(); ++i) all[i] = i;
    CHECK(prune_map(all, layout, 14).pruned_count() == 0);

    const std::vector<int> globals_only{0};
    CHECK(prune_map(globals_only, layout, 14).pruned_count() == 16);

    CHECK_THROWS_AS(prune_map(std::vector<int>{17}, layout, 14), std::out_of_range);
}

TEST_CASE("scores misaligned with the sequence are rejected") {
    Tensor2D seq(5, 1);
    ImportanceScores scores;
    scores.scores.assign(4, 0.0f);
    CHECK_THROWS_AS(prune_tokens(seq, scores, PruningPlan{}, 1), ShapeError);
}
