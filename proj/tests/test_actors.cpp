#include <cmath>
#include <optional>
#include <vector>

#include "doctest.h"
#include "pld/actors.hpp"
#include "pld/harness.hpp"
#include "pld/rng.hpp"

using namespace pld;

namespace {

// Shared fixture: a small corpus, an untrained victim (the exactness
// properties below hold for any fixed model), and a poisoned-pair cache
// covering every ordered class pair so trials never poison inline.
struct ActorFixture {
    ImageDatabase db;
    ModelParams model;
    PoisonConfig cfg;
    PoisonCache cache;
    PipelineContext ctx;

    ActorFixture()
        : db(generate_synthetic_dataset(3, kImageSide, 21)),
          model(init_model(desk_classifier_spec(), 17)) {
        cfg.n_iter = 2;  // cheap; the equalities hold whether or not poisoning lands
        cache = PoisonCache::build(model, db, 90, cfg, 4);
        ctx.db = &db;
        ctx.model = &model;
        ctx.cache = &cache;
        ctx.poison_cfg = cfg;
    }

    static const ActorFixture& instance() {
        static const ActorFixture fixture;
        return fixture;
    }
};

SceneConfig noiseless_scene() {
    SceneConfig s;  // scene-1 geometry
    s.noise_psd = 1e-300;  // valid budget; every bit decision is exact
    s.fading = FadingModel::Static;
    s.label = "noiseless";
    return s;
}

Message classify_as_message(const ModelParams& model, const ImageRecord& img,
                            const MappingTable& table) {
    return tag_to_message(forward(model, img).top_tag, table);
}

}  // namespace

TEST_CASE("scheme tokens and budgets carry the scheme parameters") {
    const SceneConfig scene = scene_preset(1);

    CHECK(Scheme::venena(0.6).token() == "venena");
    CHECK(Scheme::nve_full_power().token() == "nve-full-power");
    CHECK(Scheme::nve_fixed_power(0.75).token() == "nve-fixed-power");
    CHECK(Scheme::nve_pls_baseline(0.02).token() == "nve-pls-baseline");

    const LinkBudget venena = Scheme::venena(0.6).budget_for(scene);
    CHECK(venena.alpha == 0.6);
    CHECK(venena.total_power == scene.total_power);

    const LinkBudget full = Scheme::nve_full_power().budget_for(scene);
    CHECK(full.alpha == 1.0);
    CHECK(full.total_power == scene.total_power);

    const LinkBudget fixed = Scheme::nve_fixed_power(0.75).budget_for(scene);
    CHECK(fixed.alpha == 1.0);
    CHECK(fixed.total_power == doctest::Approx(0.075).epsilon(1e-12));

    const LinkBudget pls = Scheme::nve_pls_baseline(0.0123).budget_for(scene);
    CHECK(pls.alpha == 1.0);
    CHECK(pls.total_power == doctest::Approx(0.0123).epsilon(1e-12));
}

TEST_CASE("scheme parameter invariants are enforced") {
    const SceneConfig scene = scene_preset(1);
    CHECK_THROWS_AS((void)Scheme::venena(1.0).budget_for(scene), std::invalid_argument);
    CHECK_THROWS_AS((void)Scheme::venena(0.0).budget_for(scene), std::invalid_argument);
    CHECK_THROWS_AS((void)Scheme::nve_fixed_power(0.0).budget_for(scene),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)Scheme::nve_fixed_power(1.5).budget_for(scene),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)Scheme::nve_pls_baseline(-1.0).budget_for(scene),
                    std::invalid_argument);

    PipelineContext empty;
    RandomSource rng(1);
    CHECK_THROWS_AS((void)alice_transmit(Message(1), Scheme::venena(0.75), empty,
                                         scene.budget(0.75, scene.total_power), rng),
                    std::invalid_argument);
}

TEST_CASE("scene presets carry the published constants") {
    const SceneConfig s1 = scene_preset(1);
    CHECK(s1.total_power == doctest::Approx(0.1));
    CHECK(s1.bob_mean_gain_db == -85.0);
    CHECK(s1.eve_mean_gain_db == -95.0);
    const SceneConfig s2 = scene_preset(2);
    CHECK(s2.total_power == doctest::Approx(0.2));
    CHECK(s2.eve_mean_gain_db == -95.0);
    const SceneConfig s3 = scene_preset(3);
    CHECK(s3.total_power == doctest::Approx(0.1));
    CHECK(s3.eve_mean_gain_db == -90.0);
    CHECK_THROWS_AS((void)scene_preset(0), std::invalid_argument);
    CHECK_THROWS_AS((void)scene_preset(4), std::invalid_argument);
}

TEST_CASE("transmissions carry the advertised structure") {
    const ActorFixture& fx = ActorFixture::instance();
    const SceneConfig scene = scene_preset(1);
    RandomSource rng(5);

    const LinkBudget vb = Scheme::venena(0.75).budget_for(scene);
    const Transmission tx = alice_transmit(Message(2), Scheme::venena(0.75), fx.ctx, vb, rng);
    CHECK(tx.strong_bits.size() == std::size_t(kImageBits));
    CHECK(tx.weak_bits.size() == std::size_t(kImageBits));
    CHECK(tx.samples.size() == std::size_t(kImageBits));
    CHECK(tx.record.true_message == 2);
    CHECK(tx.record.falsified_message != 2);
    // mask consistency: strong XOR weak reconstructs the poisoned image, and
    // the recorded success flag is that image's transmitter-side verdict
    const MappingTable table;
    const ImageRecord recon = bits_to_image(apply_mask(tx.strong_bits, PoisonMask{tx.weak_bits}));
    CHECK(tx.record.tx_success ==
          (forward(fx.model, recon).top_tag == table.tag_of(Message(2))));

    double power = 0.0;
    for (double s : tx.samples) power += s * s;
    power /= double(tx.samples.size());
    CHECK(power == doctest::Approx(vb.total_power).epsilon(0.02));

    const LinkBudget nb = Scheme::nve_full_power().budget_for(scene);
    const Transmission ntx =
        alice_transmit(Message(4), Scheme::nve_full_power(), fx.ctx, nb, rng);
    CHECK(ntx.weak_bits.empty());
    CHECK(ntx.record.falsified_message == -1);
    const double amplitude = std::sqrt(nb.total_power);
    for (std::size_t k = 0; k < 32; ++k)
        CHECK(std::fabs(std::fabs(ntx.samples[k]) - amplitude) < 1e-12);
}

TEST_CASE("noiseless venena trials recover exactly what the transmitter classified") {
    const ActorFixture& fx = ActorFixture::instance();
    const SceneConfig scene = noiseless_scene();
    const Scheme scheme = Scheme::venena(0.75);
    const MappingTable table;

    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        const TrialRecord rec = run_trial(std::nullopt, scheme, scene, fx.ctx, seed);

        CHECK(rec.falsified_message != rec.true_message);
        CHECK(rec.perceived_bob >= 0);
        CHECK(rec.perceived_bob <= 9);
        // a noise-free link makes Bob's perception equal the transmitter-side
        // classification outcome: success iff he perceives the true message
        CHECK((rec.perceived_bob == rec.true_message) == rec.tx_success);
        // full-knowledge Eve runs the identical pipeline; noiseless, she
        // reconstructs the same image
        CHECK(rec.perceived_eve_full == rec.perceived_bob);
        CHECK(rec.bob_mask_errors == 0);
        CHECK(rec.eve_mask_errors == 0);

        // white-box replay of the trial's draws pins every perception to a
        // transmitter-side classification
        RandomSource mirror(seed);
        const Message m(int(mirror.uniform_index(kNumClasses)));
        CHECK(m.value == rec.true_message);
        const Message falsified = choose_falsified(m, mirror);
        CHECK(falsified.value == rec.falsified_message);
        const PoisonCacheEntry& entry =
            fx.cache.sample(table.tag_of(falsified), table.tag_of(m), mirror);
        CHECK(rec.tx_success == entry.success);
        CHECK(rec.perceived_bob ==
              classify_as_message(fx.model, entry.poisoned, table).value);
        CHECK(rec.perceived_eve_partial ==
              classify_as_message(fx.model, entry.original, table).value);
    }
}

TEST_CASE("noiseless nve trials perceive the transmitted image identically everywhere") {
    const ActorFixture& fx = ActorFixture::instance();
    const SceneConfig scene = noiseless_scene();

    for (const Scheme& scheme : {Scheme::nve_full_power(), Scheme::nve_fixed_power(0.75)}) {
        for (std::uint64_t seed = 40; seed < 55; ++seed) {
            const TrialRecord rec = run_trial(std::nullopt, scheme, scene, fx.ctx, seed);
            CHECK(rec.falsified_message == -1);
            CHECK((rec.perceived_bob == rec.true_message) == rec.tx_success);
            // no mask, no deception: everyone decodes the same image exactly
            CHECK(rec.perceived_eve_full == rec.perceived_bob);
            CHECK(rec.perceived_eve_partial == rec.perceived_bob);
        }
    }
}

TEST_CASE("trials are deterministic in the seed") {
    const ActorFixture& fx = ActorFixture::instance();
    const SceneConfig scene = scene_preset(1);

    for (const Scheme& scheme : {Scheme::venena(0.75), Scheme::nve_full_power()}) {
        const TrialRecord a = run_trial(std::nullopt, scheme, scene, fx.ctx, 1234);
        const TrialRecord b = run_trial(std::nullopt, scheme, scene, fx.ctx, 1234);
        CHECK(a.true_message == b.true_message);
        CHECK(a.falsified_message == b.falsified_message);
        CHECK(a.perceived_bob == b.perceived_bob);
        CHECK(a.perceived_eve_full == b.perceived_eve_full);
        CHECK(a.perceived_eve_partial == b.perceived_eve_partial);
        CHECK(a.bob_gain == b.bob_gain);
        CHECK(a.eve_gain == b.eve_gain);
        CHECK(a.bob_mask_errors == b.bob_mask_errors);
        CHECK(a.eve_mask_errors == b.eve_mask_errors);

        const TrialRecord c = run_trial(std::nullopt, scheme, scene, fx.ctx, 1235);
        CHECK((c.true_message != a.true_message || c.bob_gain != a.bob_gain));
    }
}

TEST_CASE("a fixed message pins the trial's content") {
    const ActorFixture& fx = ActorFixture::instance();
    const SceneConfig scene = noiseless_scene();
    for (std::uint64_t seed = 60; seed < 70; ++seed) {
        const TrialRecord rec =
            run_trial(Message(7), Scheme::venena(0.75), scene, fx.ctx, seed);
        CHECK(rec.true_message == 7);
        CHECK(rec.falsified_message != 7);
    }
}

TEST_CASE("the channel advantage shows up as fewer mask bit errors for bob") {
    const ActorFixture& fx = ActorFixture::instance();
    const SceneConfig scene = scene_preset(1);  // bob -85 dB, eve -95 dB
    const Scheme scheme = Scheme::venena(0.75);

    double bob_errors = 0.0, eve_errors = 0.0;
    const int n = 400;
    for (int i = 0; i < n; ++i) {
        const TrialRecord rec =
            run_trial(std::nullopt, scheme, scene, fx.ctx, 9000 + std::uint64_t(i));
        bob_errors += double(rec.bob_mask_errors);
        eve_errors += double(rec.eve_mask_errors);
    }
    CHECK(bob_errors / n < eve_errors / n);
    // the gap is large: eve's mean gain is 10 dB below bob's
    CHECK(bob_errors / n < 0.5 * eve_errors / n);
}

TEST_CASE("full-knowledge eve runs bob's exact pipeline") {
    const ActorFixture& fx = ActorFixture::instance();
    const SceneConfig scene = scene_preset(1);
    const Scheme scheme = Scheme::venena(0.75);
    const LinkBudget budget = scheme.budget_for(scene);
    RandomSource rng(77);

    const Transmission tx = alice_transmit(Message(3), scheme, fx.ctx, budget, rng);
    const ChannelRealization h = draw_channel(scene.bob_channel(), tx.samples.size(), rng);
    const ReceivedFrame y = transmit(tx.samples, h, budget, rng);

    CHECK(eve_perceive(y, KnowledgeLevel::Full, scheme, fx.ctx, budget).value ==
          bob_perceive(y, scheme, fx.ctx, budget).value);
}
