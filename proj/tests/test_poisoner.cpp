#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "doctest.h"
#include "pld/classifier.hpp"
#include "pld/poisoner.hpp"
#include "pld/rng.hpp"
#include "pld/semantics.hpp"

using namespace pld;

namespace {

std::vector<LayerSpec> tiny_spec() {
    return {gate_spec(0.07, 0.008, 3.0, 1), conv_spec(3, 4, 3), relu_spec(),
            pool_spec(4),                   dense_spec(256, 16), relu_spec(),
            readout_spec(16, 10)};
}

// Config small enough for unit-test budgets but exercising both loss paths
// (gradient matching needs the directional second-order machinery).
PoisonConfig quick_cfg() {
    PoisonConfig cfg;
    cfg.n_iter = 10;
    cfg.stop_margin = 0.0;  // run every iteration
    return cfg;
}

int max_channel_delta(const ImageRecord& a, const ImageRecord& b) {
    int worst = 0;
    for (int i = 0; i < kImageValues; ++i)
        worst = std::max(worst, std::abs(int(a.data[std::size_t(i)]) -
                                         int(b.data[std::size_t(i)])));
    return worst;
}

// Gradient set for a tiny one-parameter-layer model shape: only the first
// layer's weights are populated.
GradientSet weights_only(const std::vector<double>& w) {
    GradientSet g;
    g.weights = {w, {}};
    g.biases = {{}, {}};
    return g;
}

}  // namespace

TEST_CASE("budget clipping clamps to the epsilon box intersected with [0,1]") {
    const std::vector<double> clean = {0.5, 0.02, 0.98, 0.4};
    const std::vector<double> cand = {0.9, -0.5, 2.0, 0.41};
    const double eps = 0.1;
    const std::vector<double> out = clip_to_budget(cand, clean, eps);
    CHECK(out[0] == doctest::Approx(0.6).epsilon(1e-12));   // clamped to clean + eps
    CHECK(out[1] == doctest::Approx(0.0).epsilon(1e-12));   // clean - eps < 0 -> 0
    CHECK(out[2] == doctest::Approx(1.0).epsilon(1e-12));   // clean + eps > 1 -> 1
    CHECK(out[3] == doctest::Approx(0.41).epsilon(1e-12));  // already inside
    CHECK_THROWS_AS((void)clip_to_budget({0.1}, clean, eps), ShapeMismatch);
}

TEST_CASE("quantization rounds half away from zero and clamps") {
    std::vector<double> v(kImageValues, 0.0);
    v[0] = 0.5 / 255.0;    // exact half step -> 1
    v[1] = 2.5 / 255.0;    // -> 3
    v[2] = 0.49 / 255.0;   // -> 0
    v[3] = 1.0;            // -> 255
    v[4] = 1.2;            // above range -> 255
    v[5] = -0.3;           // below range -> 0
    v[6] = 200.49 / 255.0; // -> 200
    const ImageRecord img = quantize(v);
    CHECK(img.data[0] == 1);
    CHECK(img.data[1] == 3);
    CHECK(img.data[2] == 0);
    CHECK(img.data[3] == 255);
    CHECK(img.data[4] == 255);
    CHECK(img.data[5] == 0);
    CHECK(img.data[6] == 200);
    CHECK_THROWS_AS((void)quantize(std::vector<double>(10, 0.0)), ShapeMismatch);
}

TEST_CASE("quantization inverts normalization on clean images") {
    const ImageDatabase db = generate_synthetic_dataset(1, kImageSide, 3);
    const ImageRecord& img = db.classes[7][0];
    CHECK(quantize(normalize_image(img)).data == img.data);
}

TEST_CASE("gradient-matching loss is a negated cosine similarity") {
    const std::vector<double> g = {1.0, -2.0, 3.0};
    const std::vector<double> orth = {2.0, 1.0, 0.0};
    const std::vector<double> opposite = {-1.0, 2.0, -3.0};
    const std::vector<double> scaled = {2.0, -4.0, 6.0};

    CHECK(loss_match(weights_only(g), weights_only(g)) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(loss_match(weights_only(g), weights_only(opposite)) ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK(loss_match(weights_only(g), weights_only(orth)) ==
          doctest::Approx(0.0).epsilon(1e-12));
    // cosine is scale-free
    CHECK(loss_match(weights_only(g), weights_only(scaled)) ==
          doctest::Approx(-1.0).epsilon(1e-12));
    // a zero gradient on either side contributes nothing
    CHECK(loss_match(weights_only(std::vector<double>(3, 0.0)), weights_only(g)) == 0.0);
}

TEST_CASE("gradient-norm penalty is the summed squared euclidean norm") {
    GradientSet g;
    g.weights = {{3.0, 4.0}, {1.0}};
    g.biases = {{2.0}, {}};
    CHECK(loss_norm(g) == doctest::Approx(9.0 + 16.0 + 1.0 + 4.0).epsilon(1e-12));

    PoisonConfig cfg;
    cfg.lambda1 = 0.5;
    cfg.lambda2 = 2.0;
    cfg.lambda3 = 0.1;
    CHECK(loss_total(-0.8, 1.5, 30.0, cfg) ==
          doctest::Approx(0.5 * -0.8 + 2.0 * 1.5 + 0.1 * 30.0).epsilon(1e-12));
}

TEST_CASE("poisoning rejects inconsistent configurations") {
    const ModelParams model = init_model(tiny_spec(), 1);
    const ImageDatabase db = generate_synthetic_dataset(1, kImageSide, 4);
    const ImageRecord& original = db.classes[2][0];

    CHECK_THROWS_AS((void)gma_poison(model, original, SemanticTag::bird, quick_cfg()),
                    std::invalid_argument);  // target equals the original's class

    PoisonConfig bad = quick_cfg();
    bad.epsilon = 0.0;
    CHECK_THROWS_AS((void)gma_poison(model, original, SemanticTag::cat, bad),
                    std::invalid_argument);
    bad = quick_cfg();
    bad.n_iter = 0;
    CHECK_THROWS_AS((void)gma_poison(model, original, SemanticTag::cat, bad),
                    std::invalid_argument);
    bad = quick_cfg();
    bad.step_size = -0.1;
    CHECK_THROWS_AS((void)gma_poison(model, original, SemanticTag::cat, bad),
                    std::invalid_argument);
    bad = quick_cfg();
    bad.lambda1 = bad.lambda2 = bad.lambda3 = 0.0;
    CHECK_THROWS_AS((void)gma_poison(model, original, SemanticTag::cat, bad),
                    std::invalid_argument);
    bad = quick_cfg();
    bad.break_ber = 1.0;
    CHECK_THROWS_AS((void)gma_poison(model, original, SemanticTag::cat, bad),
                    std::invalid_argument);
    bad = quick_cfg();
    bad.inner_train = true;
    CHECK_THROWS_AS((void)gma_poison(model, original, SemanticTag::cat, bad),
                    std::invalid_argument);  // no dataset supplied
}

TEST_CASE("poisoned images respect the perturbation budget after quantization") {
    const ModelParams model = init_model(tiny_spec(), 2);
    const ImageDatabase db = generate_synthetic_dataset(2, kImageSide, 5);
    PoisonConfig cfg = quick_cfg();

    for (int rep = 0; rep < 4; ++rep) {
        const ImageRecord& original = db.classes[std::size_t(rep)][0];
        const SemanticTag target = tag_from_index(rep + 4);
        const PoisonResult r = gma_poison(model, original, target, cfg);
        CHECK(max_channel_delta(r.poisoned, original) <= 16);  // 16/255 budget in 8-bit steps
        REQUIRE(r.poisoned_continuous.size() == std::size_t(kImageValues));
        const std::vector<double> clean = normalize_image(original);
        for (int i = 0; i < kImageValues; ++i) {
            CHECK(std::fabs(r.poisoned_continuous[std::size_t(i)] - clean[std::size_t(i)]) <=
                  cfg.epsilon + 1e-12);
            CHECK(r.poisoned_continuous[std::size_t(i)] >= 0.0);
            CHECK(r.poisoned_continuous[std::size_t(i)] <= 1.0);
        }
    }
}

TEST_CASE("poisoning runs the configured number of iterations and is deterministic") {
    const ModelParams model = init_model(tiny_spec(), 3);
    const ImageDatabase db = generate_synthetic_dataset(1, kImageSide, 6);
    const ImageRecord& original = db.classes[1][0];
    PoisonConfig cfg = quick_cfg();

    const PoisonResult a = gma_poison(model, original, SemanticTag::ship, cfg);
    const PoisonResult b = gma_poison(model, original, SemanticTag::ship, cfg);
    CHECK(a.loss_trace.size() == std::size_t(cfg.n_iter));  // stop_margin 0 disables early exit
    CHECK(a.poisoned.data == b.poisoned.data);
    CHECK(a.success == b.success);
    REQUIRE(b.loss_trace.size() == a.loss_trace.size());
    for (std::size_t i = 0; i < a.loss_trace.size(); ++i)
        CHECK(a.loss_trace[i].total == b.loss_trace[i].total);

    // every trace entry recombines into its recorded total
    for (const LossTraceEntry& e : a.loss_trace)
        CHECK(e.total ==
              doctest::Approx(loss_total(e.match, e.classification, e.norm, cfg)).epsilon(1e-9));

    // a zero step size leaves the image untouched
    cfg.step_size = 0.0;
    const PoisonResult frozen = gma_poison(model, original, SemanticTag::ship, cfg);
    CHECK(frozen.poisoned.data == original.data);
}

TEST_CASE("success means the quantized poison classifies as the target") {
    const ModelParams model = init_model(tiny_spec(), 4);
    const ImageDatabase db = generate_synthetic_dataset(1, kImageSide, 7);
    const ImageRecord& original = db.classes[0][0];
    PoisonConfig cfg = quick_cfg();
    cfg.n_iter = 40;
    const PoisonResult r = gma_poison(model, original, SemanticTag::deer, cfg);
    CHECK(r.success == (forward(model, r.poisoned).top_tag == SemanticTag::deer));
}

TEST_CASE("poison cache cycles ordered class pairs in scan order") {
    const ModelParams model = init_model(tiny_spec(), 5);
    const ImageDatabase db = generate_synthetic_dataset(2, kImageSide, 8);
    PoisonConfig cfg = quick_cfg();
    cfg.n_iter = 4;

    const PoisonCache cache = PoisonCache::build(model, db, 12, cfg, 99);
    REQUIRE(cache.entries.size() == 12);
    CHECK(cache.entries[0].src_tag == SemanticTag(0));
    CHECK(cache.entries[0].dst_tag == SemanticTag(1));
    CHECK(cache.entries[8].src_tag == SemanticTag(0));
    CHECK(cache.entries[8].dst_tag == SemanticTag(9));
    CHECK(cache.entries[9].src_tag == SemanticTag(1));
    CHECK(cache.entries[9].dst_tag == SemanticTag(0));
    CHECK(cache.entries[10].src_tag == SemanticTag(1));
    CHECK(cache.entries[10].dst_tag == SemanticTag(2));
    CHECK(cache.entries[11].dst_tag == SemanticTag(3));

    for (const PoisonCacheEntry& e : cache.entries) {
        CHECK(e.original.tag == e.src_tag);
        CHECK(max_channel_delta(e.poisoned, e.original) <= 16);
    }
    CHECK(cache.success_rate() >= 0.0);
    CHECK(cache.success_rate() <= 1.0);
    CHECK(cache.config_hash == PoisonCache::expected_hash(model, db, cfg, 12, 99));

    CHECK_THROWS_AS((void)PoisonCache::build(model, db, 0, cfg, 99), std::invalid_argument);
    const ImageDatabase empty;
    CHECK_THROWS_AS((void)PoisonCache::build(model, empty, 4, cfg, 99), EmptyClassBucket);
}

TEST_CASE("poison cache sampling covers present pairs and rejects absent ones") {
    const ModelParams model = init_model(tiny_spec(), 6);
    const ImageDatabase db = generate_synthetic_dataset(3, kImageSide, 9);
    PoisonConfig cfg = quick_cfg();
    cfg.n_iter = 3;

    const PoisonCache cache = PoisonCache::build(model, db, 11, cfg, 100);
    RandomSource rng(1);
    const PoisonCacheEntry& e = cache.sample(SemanticTag(0), SemanticTag(3), rng);
    CHECK(e.src_tag == SemanticTag(0));
    CHECK(e.dst_tag == SemanticTag(3));
    // pair (5, 0) is beyond the 11 built entries
    CHECK_THROWS_AS((void)cache.sample(SemanticTag(5), SemanticTag(0), rng), EmptyClassBucket);
}

TEST_CASE("poison cache files round-trip and reject stale configurations") {
    const std::string path = "test_poison_cache.bin";
    const ModelParams model = init_model(tiny_spec(), 7);
    const ImageDatabase db = generate_synthetic_dataset(2, kImageSide, 10);
    PoisonConfig cfg = quick_cfg();
    cfg.n_iter = 3;

    const PoisonCache cache = PoisonCache::build(model, db, 6, cfg, 101);
    cache.save(path);

    const PoisonCache loaded = PoisonCache::load(path);
    REQUIRE(loaded.entries.size() == cache.entries.size());
    CHECK(loaded.config_hash == cache.config_hash);
    CHECK(loaded.epsilon == cache.epsilon);
    for (std::size_t i = 0; i < cache.entries.size(); ++i) {
        CHECK(loaded.entries[i].original.data == cache.entries[i].original.data);
        CHECK(loaded.entries[i].poisoned.data == cache.entries[i].poisoned.data);
        CHECK(loaded.entries[i].success == cache.entries[i].success);
        CHECK(loaded.entries[i].src_index == cache.entries[i].src_index);
    }

    CHECK(PoisonCache::try_load(path, cache.config_hash).has_value());
    CHECK_FALSE(PoisonCache::try_load(path, cache.config_hash + 1).has_value());
    CHECK_FALSE(PoisonCache::try_load("no_such_cache.bin", cache.config_hash).has_value());

    // different configs, seeds, entry counts, or corpora hash differently
    PoisonConfig other = cfg;
    other.epsilon = 8.0 / 255.0;
    CHECK(PoisonCache::expected_hash(model, db, other, 6, 101) != cache.config_hash);
    CHECK(PoisonCache::expected_hash(model, db, cfg, 7, 101) != cache.config_hash);
    CHECK(PoisonCache::expected_hash(model, db, cfg, 6, 102) != cache.config_hash);

    std::remove(path.c_str());
}

TEST_CASE("masks translate between original and poisoned serializations") {
    const ImageDatabase db = generate_synthetic_dataset(1, kImageSide, 11);
    const ImageRecord& original = db.classes[4][0];
    ImageRecord poisoned = original;
    poisoned.at(0, 3, 3) = std::uint8_t(poisoned.at(0, 3, 3) ^ 0x44);
    poisoned.at(2, 30, 1) = std::uint8_t(poisoned.at(2, 30, 1) ^ 0x01);

    const BitVector ob = image_to_bits(original);
    const BitVector pb = image_to_bits(poisoned);
    const PoisonMask mask = compute_mask(ob, pb);
    CHECK(mask.bits.count_ones() == 3);  // 0x44 has two set bits, 0x01 has one
    CHECK(apply_mask(ob, mask) == pb);
    CHECK(bits_to_image(apply_mask(ob, mask)).data == poisoned.data);
    CHECK_THROWS_AS((void)compute_mask(ob, BitVector(8)), LengthMismatch);
}
