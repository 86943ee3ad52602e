#include <doctest.h>

#include <cmath>
#include <random>

#include "boxseg/ast.hpp"
#include "boxseg/synth.hpp"
#include "support.hpp"

using namespace boxseg;
using testing::uniform;

namespace {

Matrix row_matrix(std::initializer_list<double> v) {
    Matrix m(1, v.size());
    std::size_t c = 0;
    for (double x : v) m(0, c++) = x;
    return m;
}

struct Trained {
    Scene scene;
    PartitionMap partition;
    PseudoLabelMap initial;
    SegTrainResult result;
};

Trained train_small(std::uint64_t seed, int epochs) {
    SynthSpec spec;
    spec.rooms = 2;
    spec.objects_per_room = 4;
    spec.seed = seed;
    Trained t;
    t.scene = generate_synthetic_scene(spec);
    t.partition = partition_points(t.scene);
    t.initial = box_prior_labels(t.scene, t.partition);
    // A few floor points as background supervision.
    for (std::size_t i = 0; i < t.scene.points.size(); i += 7)
        if (t.partition.category[i] == Category::Background && (*t.scene.ground_truth)[i] == 0)
            t.initial[i] = PseudoLabel{0, 1.0, Provenance::RefinedPcam};
    NetConfig net;
    net.widths = {3, 16, 16, 16};
    net.class_count = t.scene.class_count;
    TrainConfig cfg;
    cfg.optimizer = Optimizer::Adam;
    cfg.epochs = epochs;
    cfg.seed = seed;
    const auto batches = make_batches(t.scene, BatchOptions{});
    t.result = train_segmentation(t.scene, t.partition, t.initial, batches, net, cfg);
    return t;
}

}  // namespace

TEST_CASE("attention loss hand values") {
    const std::vector<std::uint32_t> row{0};
    const std::vector<ClassId> box{0};
    CHECK(attention_loss(row_matrix({0.5, 0.5}), row_matrix({0.25, 0.75}), row, box) ==
          doctest::Approx(0.5 * -std::log(0.25)));
    CHECK(attention_loss(row_matrix({0.5, 0.5}), row_matrix({0.25, 0.75}), row, box) == doctest::Approx(0.6931).epsilon(1e-4));
    CHECK(attention_loss(row_matrix({1.0, 0.2}), row_matrix({1.0, 0.0}), row, box) == 0.0);
    CHECK(attention_loss(row_matrix({1, 1}), row_matrix({1, 0}), std::vector<std::uint32_t>{}, std::vector<ClassId>{}) == 0.0);
    CHECK_THROWS_AS(attention_loss(row_matrix({1, 1}), row_matrix({1, 0, 0}), row, box), Error);
}

TEST_CASE("attention loss with unit attention is cross entropy and never negative") {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 6, c = 4;
        Matrix probs(n, c), ones(n, c, 1.0), att(n, c);
        for (std::size_t i = 0; i < n; ++i) {
            double sum = 0.0;
            for (std::size_t k = 0; k < c; ++k) sum += probs(i, k) = uniform(rng, 0.01, 1);
            for (std::size_t k = 0; k < c; ++k) {
                probs(i, k) /= sum;
                att(i, k) = uniform(rng, 0, 1);
            }
        }
        std::vector<std::uint32_t> rows{0, 2, 3, 5};
        std::vector<ClassId> box{1, 0, 3, 1};
        CHECK(attention_loss(ones, probs, rows, box) == doctest::Approx(cross_entropy_loss(probs, rows, box, nullptr)));
        CHECK(attention_loss(att, probs, rows, box) >= 0.0);
    }
}

TEST_CASE("ambiguous pseudo labels") {
    // chair 0.9, table 0.05 among five classes; candidates {chair, table}.
    const std::vector<double> y{0.02, 0.01, 0.05, 0.9, 0.02};
    const std::vector<ClassId> cand{2, 3};
    const auto l = pseudo_label_ambiguous(y, cand, 0.8);
    REQUIRE(l.has_value());
    CHECK(l->class_id == 3);
    CHECK(l->provenance == Provenance::AstPseudo);
    CHECK(l->confidence == doctest::Approx(0.9 / 0.95));

    // Renormalized maximum 0.79.
    const std::vector<double> close{0.0, 0.79, 0.21};
    CHECK_FALSE(pseudo_label_ambiguous(close, std::vector<ClassId>{1, 2}, 0.8).has_value());
    CHECK(pseudo_label_ambiguous(close, std::vector<ClassId>{1, 2}, 0.79).has_value());

    const std::vector<double> low{0.9, 0.05, 0.05};
    const auto single = pseudo_label_ambiguous(low, std::vector<ClassId>{2}, 0.8);
    REQUIRE(single.has_value());
    CHECK(single->class_id == 2);
    CHECK(single->confidence == 1.0);

    const std::vector<double> tie{0.0, 0.5, 0.5};
    CHECK(pseudo_label_ambiguous(tie, std::vector<ClassId>{2, 1}, 0.5)->class_id == 1);
}

TEST_CASE("pseudo label gate never emits below tau") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 2000; ++trial) {
        std::vector<double> y(5);
        double sum = 0.0;
        for (auto& v : y) sum += v = uniform(rng, 0, 1);
        for (auto& v : y) v /= sum;
        std::vector<ClassId> cand;
        for (ClassId c = 0; c < 5; ++c)
            if (uniform(rng, 0, 1) < 0.5) cand.push_back(c);
        if (cand.empty()) cand.push_back(0);
        const double tau = uniform(rng, 0, 1);
        const auto l = pseudo_label_ambiguous(y, cand, tau);
        double total = 0.0, best = 0.0;
        for (ClassId c : cand) {
            total += y[c];
            best = std::max(best, y[c]);
        }
        CHECK(l.has_value() == (best / total >= tau));
        if (l) CHECK(l->confidence >= tau);
    }
}

TEST_CASE("combined loss") {
    CHECK(combined_loss(1.0, 2.0, 0.001) == doctest::Approx(1.002));
    CHECK(combined_loss(1.5, 7.0, 0.0) == 1.5);
    CHECK(combined_loss(1.5, 0.0, 0.3) == 1.5);
}

TEST_CASE("box prior and candidate classes") {
    Scene s;
    s.class_count = 4;
    s.points = {{{0.5, 0.5, 0.5}, {}}, {{1.5, 0.5, 0.5}, {}}, {{5, 5, 5}, {}}};
    s.boxes = {{{0, 0, 0}, {2, 1, 1}, 2}, {{1, 0, 0}, {2, 1, 1}, 3}, {{1, 0, 0}, {3, 1, 1}, 3}};
    const auto part = partition_points(s);
    const auto prior = box_prior_labels(s, part);
    CHECK(prior[0]->class_id == 2);
    CHECK(prior[0]->provenance == Provenance::BoxPrior);
    CHECK_FALSE(prior[1].has_value());
    CHECK_FALSE(prior[2].has_value());
    CHECK(candidate_classes(s, part, 1) == std::vector<ClassId>{2, 3});
}

TEST_CASE("zero epochs return the initial labels and an untrained net") {
    const auto t = train_small(1, 0);
    CHECK(same_labels(t.result.labels, t.initial));
    CHECK(t.result.loss_history.empty());
    NetConfig net;
    net.widths = {3, 16, 16, 16};
    net.class_count = t.scene.class_count;
    CHECK(t.result.net == PointNetLite(net, 1));
}

TEST_CASE("self training keeps initial labels and gates ambiguous ones") {
    const auto t = train_small(2, 25);
    REQUIRE(t.result.loss_history.size() == 25);
    CHECK(t.result.loss_history.back() < t.result.loss_history.front());
    std::size_t ast = 0;
    for (std::size_t i = 0; i < t.initial.size(); ++i) {
        const auto& out = t.result.labels[i];
        if (t.initial[i]) {
            REQUIRE(out.has_value());
            CHECK(out->class_id == t.initial[i]->class_id);
            CHECK(out->provenance == t.initial[i]->provenance);
            continue;
        }
        if (!out) continue;
        CHECK(t.partition.category[i] == Category::Ambiguous);
        CHECK(out->provenance == Provenance::AstPseudo);
        CHECK(out->confidence >= 0.8);
        const auto cand = candidate_classes(t.scene, t.partition, i);
        CHECK(std::find(cand.begin(), cand.end(), out->class_id) != cand.end());
        ++ast;
    }
    MESSAGE(ast << " ambiguous points pseudo-labeled");
}

TEST_CASE("predictions cover batched points only") {
    const auto t = train_small(3, 2);
    auto batches = make_batches(t.scene, BatchOptions{});
    const auto pred = predict_labels(t.result.net, batches, t.scene.points.size());
    for (const auto& p : pred) {
        REQUIRE(p.has_value());
        CHECK(p->provenance == Provenance::Predicted);
        CHECK(p->class_id < t.scene.class_count);
    }
    batches.pop_back();
    const auto partial = predict_labels(t.result.net, batches, t.scene.points.size() + 3);
    CHECK_FALSE(partial.back().has_value());
}

TEST_CASE("segmentation training input checks") {
    const auto t = train_small(4, 0);
    const auto batches = make_batches(t.scene, BatchOptions{});
    NetConfig net;
    net.class_count = t.scene.class_count;
    TrainConfig cfg;
    cfg.tau = 1.01;
    CHECK_THROWS_AS(train_segmentation(t.scene, t.partition, t.initial, batches, net, cfg), Error);
    cfg.tau = 0.8;
    CHECK_THROWS_AS(train_segmentation(t.scene, t.partition, PseudoLabelMap(t.scene.points.size()), batches, net, cfg),
                    Error);
}
