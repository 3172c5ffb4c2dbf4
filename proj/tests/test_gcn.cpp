#include <cmath>
#include <cstdio>
#include <vector>

#include "doctest.h"
#include "mlgcn/autodiff.hpp"
#include "mlgcn/errors.hpp"
#include "mlgcn/gcn.hpp"
#include "mlgcn/label_graph.hpp"
#include "mlgcn/rng.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace mlgcn;

namespace {

Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(shape_numel(shape));
    for (double& x : v) x = rng.uniform(lo, hi);
    return Tensor(std::move(shape), std::move(v));
}

EmbeddingMatrix random_embeddings(Rng& rng, std::size_t c, std::size_t d) {
    EmbeddingMatrix z;
    z.values = random_tensor(rng, {c, d});
    z.source = EmbeddingSource::word_vectors;
    return z;
}

// A normalized adjacency mined from a random corpus, so model tests run on
// graph structure shaped like real input rather than hand-picked matrices.
CorrelationMatrix random_adjacency(Rng& rng, std::size_t c, double tau = 0.2, double p = 0.25) {
    std::vector<std::vector<std::size_t>> corpus(60);
    for (auto& s : corpus)
        for (std::size_t l = 0; l < c; ++l)
            if (rng.bernoulli(0.35)) s.push_back(l);
    const auto cond = conditional_probability(count_cooccurrence(corpus, c));
    return normalize_adjacency(reweight(binarize(cond, tau), p));
}

CorrelationMatrix identity_adjacency(std::size_t c) {
    CorrelationMatrix a;
    a.values = Tensor::identity(c);
    a.stage = GraphStage::normalized;
    return a;
}

}  // namespace

TEST_CASE("model: initialization shapes and determinism") {
    Rng rng(7);
    SUBCASE("default stack, d = 300") {
        auto model = MlGcnModel::init(identity_adjacency(80), random_embeddings(rng, 80, 300),
                                      ModelConfig{});
        REQUIRE(model.layer_count() == 2);
        CHECK(model.weight(0).shape() == Shape{300, 1024});
        CHECK(model.weight(1).shape() == Shape{1024, 2048});
        CHECK(model.feature_dim() == 2048);
        const auto w = model.generate_classifiers();
        CHECK(w.shape() == Shape{80, 2048});
    }
    SUBCASE("same seed is bitwise reproducible") {
        const auto z = random_embeddings(rng, 5, 16);
        ModelConfig cfg;
        cfg.layer_dims = {8, 12};
        cfg.seed = 99;
        const auto a = MlGcnModel::init(identity_adjacency(5), z, cfg);
        const auto b = MlGcnModel::init(identity_adjacency(5), z, cfg);
        CHECK(a.weight(0).bit_equal(b.weight(0)));
        CHECK(a.weight(1).bit_equal(b.weight(1)));
        cfg.seed = 100;
        const auto c = MlGcnModel::init(identity_adjacency(5), z, cfg);
        CHECK_FALSE(a.weight(0).bit_equal(c.weight(0)));
    }
    SUBCASE("three-layer stack") {
        ModelConfig cfg;
        cfg.layer_dims = {1024, 1024, 2048};
        auto model =
            MlGcnModel::init(identity_adjacency(4), random_embeddings(rng, 4, 300), cfg);
        REQUIRE(model.layer_count() == 3);
        CHECK(model.weight(1).shape() == Shape{1024, 1024});
        CHECK(model.weight(2).shape() == Shape{1024, 2048});
    }
    SUBCASE("weights stay inside the fan-in bound") {
        ModelConfig cfg;
        cfg.layer_dims = {9, 4};
        auto model = MlGcnModel::init(identity_adjacency(3), random_embeddings(rng, 3, 16), cfg);
        const double bound0 = 1.0 / std::sqrt(16.0);
        for (std::size_t i = 0; i < model.weight(0).numel(); ++i)
            CHECK(std::fabs(model.weight(0)[i]) <= bound0);
        const double bound1 = 1.0 / std::sqrt(9.0);
        for (std::size_t i = 0; i < model.weight(1).numel(); ++i)
            CHECK(std::fabs(model.weight(1)[i]) <= bound1);
    }
    SUBCASE("construction validation") {
        const auto z = random_embeddings(rng, 3, 4);
        ModelConfig cfg;
        cfg.layer_dims = {};
        CHECK_THROWS_AS(MlGcnModel::init(identity_adjacency(3), z, cfg), ConfigError);
        cfg.layer_dims = {4, 0};
        CHECK_THROWS_AS(MlGcnModel::init(identity_adjacency(3), z, cfg), ConfigError);
        cfg.layer_dims = {4, 4};
        CHECK_THROWS_AS(MlGcnModel::init(identity_adjacency(5), z, cfg), ConfigError);
        cfg.slope = 1.0;
        CHECK_THROWS_AS(MlGcnModel::init(identity_adjacency(3), z, cfg), ConfigError);
        // Conditional-stage adjacency is not a propagation matrix.
        Rng r2(1);
        auto cond = random_adjacency(r2, 3);
        cond.stage = GraphStage::conditional;
        cfg.slope = 0.2;
        CHECK_THROWS_AS(MlGcnModel::init(cond, z, cfg), ConfigError);
    }
}

TEST_CASE("model: identity adjacency collapses to a per-label MLP") {
    // All-positive inputs and weights keep LeakyReLU in its linear region, so
    // the stack is exactly Z * W0 * W1.
    Rng rng(11);
    Tensor zpos = random_tensor(rng, {3, 4}, 0.1, 1.0);
    EmbeddingMatrix emb;
    emb.values = zpos;
    ModelConfig cfg;
    cfg.layer_dims = {5, 6};
    auto model = MlGcnModel::init(identity_adjacency(3), emb, cfg);
    const Tensor w0 = random_tensor(rng, {4, 5}, 0.1, 1.0);
    const Tensor w1 = random_tensor(rng, {5, 6}, 0.1, 1.0);
    model.set_weights({w0, w1});
    const auto got = model.generate_classifiers();
    const auto want = linalg::matmul(linalg::matmul(zpos, w0), w1);
    CHECK(got.bit_equal(want));
}

TEST_CASE("model: single-layer hand example") {
    EmbeddingMatrix z;
    z.values = Tensor::from_rows({{1}, {2}});
    CorrelationMatrix a;
    a.values = Tensor::from_rows({{0.5, 0.5}, {0.5, 0.5}});
    a.stage = GraphStage::normalized;
    ModelConfig cfg;
    cfg.layer_dims = {1};
    MlGcnModel model(a, z, cfg, {GcnLayer{Tensor::from_rows({{2}})}});
    const auto w = model.generate_classifiers();
    REQUIRE(w.shape() == Shape{2, 1});
    CHECK(w(0, 0) == 3.0);
    CHECK(w(1, 0) == 3.0);
}

TEST_CASE("model: prediction") {
    SUBCASE("identity classifiers pass features through") {
        const Tensor w = Tensor::identity(4);
        const Tensor x = Tensor::from_values({0.5, -2.0, 3.25, 0.0});
        CHECK(predict(w, x).bit_equal(x));
    }
    SUBCASE("hand product") {
        const Tensor w = Tensor::from_rows({{1, 0}, {0, 2}});
        const auto y = predict(w, Tensor::from_values({3, 4}));
        REQUIRE(y.shape() == Shape{2});
        CHECK(y(0) == 3.0);
        CHECK(y(1) == 8.0);
    }
    SUBCASE("batched scores agree with per-row prediction") {
        Rng rng(3);
        const Tensor w = random_tensor(rng, {5, 7});
        const Tensor x = random_tensor(rng, {4, 7});
        const auto scores = predict_batch(w, x);
        REQUIRE(scores.shape() == Shape{4, 5});
        for (std::size_t b = 0; b < 4; ++b) {
            const auto one = predict(w, x.row(b));
            for (std::size_t c = 0; c < 5; ++c)
                CHECK(std::fabs(scores(b, c) - one(c)) <= 1e-15);
        }
    }
    SUBCASE("shape validation") {
        const Tensor w = Tensor::identity(4);
        CHECK_THROWS_AS(predict(w, Tensor::from_values({1, 2})), ShapeError);
        CHECK_THROWS_AS(predict(w, Tensor::zeros({2, 4})), ShapeError);
        CHECK_THROWS_AS(predict_batch(w, Tensor::from_values({1, 2, 3, 4})), ShapeError);
        CHECK_THROWS_AS(predict_batch(w, Tensor::zeros({3, 5})), ShapeError);
    }
}

TEST_CASE("model: loss on logits") {
    SUBCASE("all-zero scores cost ln 2 per class") {
        const auto loss = bce_loss(Tensor::zeros({1, 4}),
                                   Tensor::from_rows({{1, 0, 1, 0}}));
        CHECK(std::fabs(loss - 4.0 * std::log(2.0)) <= 1e-14);
    }
    SUBCASE("saturated-correct scores cost nearly nothing") {
        const auto loss = bce_loss(Tensor::from_rows({{50, -50, 50}}),
                                   Tensor::from_rows({{1, 0, 1}}));
        CHECK(loss < 1e-6);
        CHECK(loss >= 0.0);
    }
    SUBCASE("single-logit closed form") {
        const auto loss = bce_loss(Tensor::from_rows({{std::log(3.0)}}),
                                   Tensor::from_rows({{1}}));
        CHECK(std::fabs(loss - (-std::log(0.75))) <= 1e-12);
    }
    SUBCASE("loss is non-negative and decreases as correct logits saturate") {
        const Tensor targets = Tensor::from_rows({{1, 0}, {0, 1}});
        double prev = -1.0;
        bool first = true;
        for (double s : {0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0}) {
            const Tensor scores = Tensor::from_rows({{s, -s}, {-s, s}});
            const double loss = bce_loss(scores, targets);
            CHECK(loss >= 0.0);
            if (!first) CHECK(loss < prev);
            prev = loss;
            first = false;
        }
    }
    SUBCASE("non-binary targets rejected") {
        CHECK_THROWS_AS(bce_loss(Tensor::zeros({1, 2}), Tensor::from_rows({{0.5, 1}})),
                        DataError);
    }
}

TEST_CASE("model: end-to-end gradients match finite differences") {
    constexpr std::size_t kC = 6, kD0 = 8, kFeat = 12, kBatch = 4;
    Rng rng(2024);
    auto adjacency = random_adjacency(rng, kC);
    auto embeddings = random_embeddings(rng, kC, kD0);
    ModelConfig cfg;
    cfg.layer_dims = {10, kFeat};
    cfg.seed = 5;
    auto model = MlGcnModel::init(adjacency, embeddings, cfg);

    const Tensor features = random_tensor(rng, {kBatch, kFeat});
    std::vector<double> tvals(kBatch * kC);
    for (double& t : tvals) t = rng.bernoulli(0.4) ? 1.0 : 0.0;
    const Tensor targets(Shape{kBatch, kC}, std::move(tvals));

    // Analytic gradients off the tape.
    Tape tape;
    const auto fwd = model.forward(tape);
    const Var x = tape.input(features);
    const Var scores = tape.matmul(x, tape.transpose(fwd.classifiers));
    const Var loss = tape.bce_with_logits(scores, targets);
    tape.backward(loss);

    // Numeric gradients through the plain (non-tape) forward path.
    for (std::size_t layer = 0; layer < model.layer_count(); ++layer) {
        const auto analytic = tape.grad(fwd.weights[layer]);
        const auto loss_at = [&](const std::vector<double>& flat) {
            std::vector<Tensor> ws;
            for (std::size_t l = 0; l < model.layer_count(); ++l)
                ws.push_back(l == layer ? Tensor(model.weight(l).shape(),
                                                 std::vector<double>(flat))
                                        : model.weight(l));
            MlGcnModel copy = model;
            copy.set_weights(std::move(ws));
            return bce_loss(predict_batch(copy.generate_classifiers(), features), targets);
        };
        const std::vector<double> at(model.weight(layer).data().begin(),
                                     model.weight(layer).data().end());
        const auto numeric = oracle::finite_diff(loss_at, at, 1e-5);
        for (std::size_t i = 0; i < numeric.size(); ++i)
            CHECK(oracle::rel_err(analytic[i], numeric[i]) <= 1e-4);
    }
}

TEST_CASE("model: p = 0 removes all label mixing") {
    Rng rng(17);
    const std::size_t c = 5, d = 6;
    std::vector<std::vector<std::size_t>> corpus(40);
    for (auto& s : corpus)
        for (std::size_t l = 0; l < c; ++l)
            if (rng.bernoulli(0.4)) s.push_back(l);
    const auto cond = conditional_probability(count_cooccurrence(corpus, c));
    const auto isolated = reweight(binarize(cond, 0.2), 0.0);  // A' = I by construction

    const auto z = random_embeddings(rng, c, d);
    ModelConfig cfg;
    cfg.layer_dims = {7, 9};
    cfg.seed = 21;
    auto model = MlGcnModel::init(isolated, z, cfg);
    const auto graph_out = model.generate_classifiers();

    // Reference: the same stack with the adjacency application deleted.
    Tensor h = z.values;
    h = linalg::leaky_relu(linalg::matmul(h, model.weight(0)), cfg.slope);
    h = linalg::matmul(h, model.weight(1));

    for (std::size_t i = 0; i < h.numel(); ++i)
        CHECK(std::fabs(graph_out[i] - h[i]) <= 1e-10);
}

TEST_CASE("model: permuting labels permutes classifier rows") {
    Rng rng(29);
    const std::size_t c = 6, d = 5;
    auto adjacency = random_adjacency(rng, c);
    auto embeddings = random_embeddings(rng, c, d);
    ModelConfig cfg;
    cfg.layer_dims = {8, 7};
    cfg.seed = 3;
    auto model = MlGcnModel::init(adjacency, embeddings, cfg);
    const auto base = model.generate_classifiers();

    std::vector<std::size_t> perm(c);
    for (std::size_t i = 0; i < c; ++i) perm[i] = i;
    rng.shuffle(perm);

    std::vector<double> pa(c * c), pz(c * d);
    for (std::size_t i = 0; i < c; ++i) {
        for (std::size_t j = 0; j < c; ++j) pa[i * c + j] = adjacency.values(perm[i], perm[j]);
        for (std::size_t k = 0; k < d; ++k) pz[i * d + k] = embeddings.values(perm[i], k);
    }
    CorrelationMatrix adj_perm = adjacency;
    adj_perm.values = Tensor(Shape{c, c}, std::move(pa));
    EmbeddingMatrix emb_perm = embeddings;
    emb_perm.values = Tensor(Shape{c, d}, std::move(pz));

    std::vector<GcnLayer> layers;
    for (std::size_t l = 0; l < model.layer_count(); ++l) layers.push_back(GcnLayer{model.weight(l)});
    MlGcnModel permuted(adj_perm, emb_perm, cfg, std::move(layers));
    const auto out = permuted.generate_classifiers();

    for (std::size_t i = 0; i < c; ++i)
        for (std::size_t j = 0; j < out.dim(1); ++j)
            CHECK(std::fabs(out(i, j) - base(perm[i], j)) <= 1e-12);
}

TEST_CASE("model: taped forward equals the plain forward") {
    Rng rng(31);
    auto model = MlGcnModel::init(random_adjacency(rng, 4), random_embeddings(rng, 4, 6),
                                  ModelConfig{{5, 8}, 0.2, false, 77});
    Tape tape;
    const auto fwd = model.forward(tape);
    CHECK(tape.value(fwd.classifiers).bit_equal(model.generate_classifiers()));
}

TEST_CASE("model: checkpoint round-trip is bitwise") {
    testutil::TempDir tmp;
    Rng rng(41);
    auto adjacency = random_adjacency(rng, 4, 0.3, 0.2);
    auto embeddings = random_embeddings(rng, 4, 3);
    ModelConfig cfg;
    cfg.layer_dims = {5, 6};
    cfg.slope = 0.25;
    cfg.final_activation = true;
    cfg.seed = 12345;
    const auto model = MlGcnModel::init(adjacency, embeddings, cfg);
    const auto vocab =
        LabelVocabulary::from_names({"dog", "traffic light", "sea lion", "kite"});

    const auto dir = tmp.path() / "ckpt";
    save_checkpoint(dir, model, vocab);
    const auto loaded = load_checkpoint(dir);

    CHECK(loaded.model.layer_count() == 2);
    CHECK(loaded.model.weight(0).bit_equal(model.weight(0)));
    CHECK(loaded.model.weight(1).bit_equal(model.weight(1)));
    CHECK(loaded.model.adjacency().values.bit_equal(adjacency.values));
    CHECK(loaded.model.adjacency().stage == GraphStage::normalized);
    CHECK(loaded.model.adjacency().tau == adjacency.tau);
    CHECK(loaded.model.adjacency().p == adjacency.p);
    CHECK(loaded.model.embeddings().values.bit_equal(embeddings.values));
    CHECK(loaded.model.embeddings().source == EmbeddingSource::word_vectors);
    CHECK(loaded.model.config().layer_dims == cfg.layer_dims);
    CHECK(loaded.model.config().slope == cfg.slope);
    CHECK(loaded.model.config().final_activation == cfg.final_activation);
    CHECK(loaded.model.config().seed == cfg.seed);
    CHECK(loaded.vocabulary.names() == vocab.names());
    // The reloaded model computes the same classifiers bit for bit.
    CHECK(loaded.model.generate_classifiers().bit_equal(model.generate_classifiers()));

    SUBCASE("missing directory") {
        CHECK_THROWS_AS(load_checkpoint(tmp.path() / "absent"), IoError);
    }
    SUBCASE("mangled manifest header") {
        tmp.write("ckpt/manifest.txt", "something else\n");
        CHECK_THROWS_AS(load_checkpoint(dir), FormatError);
    }
    SUBCASE("missing layer file") {
        std::filesystem::remove(dir / "layer_1.mlgf");
        CHECK_THROWS_AS(load_checkpoint(dir), IoError);
    }
    SUBCASE("vocabulary mismatch on save") {
        CHECK_THROWS_AS(save_checkpoint(tmp.path() / "bad", model,
                                        LabelVocabulary::from_names({"a", "b"})),
                        UsageError);
    }
}
