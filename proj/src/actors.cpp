#include "pld/actors.hpp"

namespace pld {

Scheme Scheme::venena(double alpha) {
    Scheme s;
    s.kind = SchemeKind::Venena;
    s.alpha = alpha;
    return s;
}

Scheme Scheme::nve_full_power() {
    Scheme s;
    s.kind = SchemeKind::NveFullPower;
    s.alpha = 1.0;
    return s;
}

Scheme Scheme::nve_fixed_power(double scale) {
    Scheme s;
    s.kind = SchemeKind::NveFixedPower;
    s.alpha = 1.0;
    s.power_scale = scale;
    return s;
}

Scheme Scheme::nve_pls_baseline(double watts) {
    Scheme s;
    s.kind = SchemeKind::NvePlsBaseline;
    s.alpha = 1.0;
    s.power_watts = watts;
    return s;
}

std::string Scheme::token() const {
    switch (kind) {
        case SchemeKind::Venena: return "venena";
        case SchemeKind::NveFullPower: return "nve-full-power";
        case SchemeKind::NveFixedPower: return "nve-fixed-power";
        case SchemeKind::NvePlsBaseline: return "nve-pls-baseline";
    }
    return "unknown";
}

LinkBudget Scheme::budget_for(const SceneConfig& scene) const {
    double power = scene.total_power;
    double a = 1.0;
    switch (kind) {
        case SchemeKind::Venena:
            if (!(alpha > 0.0 && alpha < 1.0))
                throw std::invalid_argument("Scheme: venena requires alpha in (0, 1)");
            a = alpha;
            break;
        case SchemeKind::NveFullPower:
            break;
        case SchemeKind::NveFixedPower:
            if (!(power_scale > 0.0 && power_scale <= 1.0))
                throw std::invalid_argument("Scheme: power_scale must be in (0, 1]");
            power *= power_scale;
            break;
        case SchemeKind::NvePlsBaseline:
            if (!(power_watts > 0.0))
                throw std::invalid_argument(
                    "Scheme: pls baseline power not calibrated (power_watts unset)");
            power = power_watts;
            break;
    }
    LinkBudget budget = scene.budget(a, power);
    validate_budget(budget);
    return budget;
}

namespace {

// Per-stream channel interleavers: fixed public permutations mapping logical
// bit positions to symbol positions, a different one for each superposed
// stream. Interleaving decorrelates the two streams' symbol-error positions:
// without it, a stage-1 decision error and the stage-2 error it propagates
// share a symbol slot and cancel in the XOR reconstruction, which would let
// the mask survive an undecodable strong stream. Both ends derive the same
// permutation from a public constant; no key material is involved.
constexpr std::uint64_t kStrongStream = 0;
constexpr std::uint64_t kWeakStream = 1;

std::vector<std::uint32_t> interleaver_permutation(std::size_t n, std::uint64_t stream) {
    std::vector<std::uint32_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = std::uint32_t(i);
    RandomSource rng(derive_seed(fnv1a64("channel-interleaver"), stream, n));
    for (std::size_t i = n; i > 1; --i)
        std::swap(perm[i - 1], perm[rng.uniform_index(i)]);
    return perm;
}

// logical position i transmits at symbol position perm[i]
BitVector interleave_bits(const BitVector& in, const std::vector<std::uint32_t>& perm) {
    BitVector out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) out.set(perm[i], in.get(i));
    return out;
}

BitVector deinterleave_bits(const BitVector& in, const std::vector<std::uint32_t>& perm) {
    BitVector out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) out.set(i, in.get(perm[i]));
    return out;
}

}  // namespace

Transmission alice_transmit(Message m, const Scheme& scheme, const PipelineContext& ctx,
                            const LinkBudget& budget, RandomSource& rng) {
    if (ctx.db == nullptr || ctx.model == nullptr)
        throw std::invalid_argument("alice_transmit: pipeline context incomplete");

    Transmission tx;
    tx.record.true_message = m.value;

    if (scheme.is_venena()) {
        const Message falsified = choose_falsified(m, rng);
        tx.record.falsified_message = falsified.value;
        const SemanticTag src = ctx.table.tag_of(falsified);  // decoy carries the false tag
        const SemanticTag dst = ctx.table.tag_of(m);          // poison steers to the true tag

        ImageRecord original, poisoned;
        if (ctx.cache != nullptr) {
            const PoisonCacheEntry& entry = ctx.cache->sample(src, dst, rng);
            original = entry.original;
            poisoned = entry.poisoned;
            tx.record.tx_success = entry.success;
        } else {
            original = encode_visual(falsified, *ctx.db, ctx.table, rng);
            const PoisonResult result = gma_poison(*ctx.model, original, dst, ctx.poison_cfg);
            poisoned = result.poisoned;
            tx.record.tx_success = result.success;
        }

        tx.strong_bits = image_to_bits(original);
        const BitVector poisoned_bits = image_to_bits(poisoned);
        tx.weak_bits = compute_mask(tx.strong_bits, poisoned_bits).bits;

        const SymbolFrame s_i = bpsk_modulate(
            interleave_bits(tx.strong_bits,
                            interleaver_permutation(tx.strong_bits.size(), kStrongStream)));
        const SymbolFrame s_p = bpsk_modulate(
            interleave_bits(tx.weak_bits,
                            interleaver_permutation(tx.weak_bits.size(), kWeakStream)));
        tx.samples = superpose(s_i, s_p, budget);
    } else {
        const ImageRecord& image = encode_visual(m, *ctx.db, ctx.table, rng);
        tx.record.tx_success = forward(*ctx.model, image).top_tag == ctx.table.tag_of(m);
        tx.strong_bits = image_to_bits(image);
        const SymbolFrame s_i = bpsk_modulate(
            interleave_bits(tx.strong_bits,
                            interleaver_permutation(tx.strong_bits.size(), kStrongStream)));
        const double amplitude = std::sqrt(budget.total_power);
        tx.samples.resize(s_i.symbols.size());
        for (std::size_t k = 0; k < tx.samples.size(); ++k)
            tx.samples[k] = amplitude * s_i.symbols[k];
    }
    return tx;
}

namespace {

// The one reconstruction pipeline both Bob and full-knowledge Eve run.
Message perceive_reconstructing(const ReceivedFrame& y, const Scheme& scheme,
                                const PipelineContext& ctx, const LinkBudget& budget,
                                BitVector* weak_bits_out) {
    ImageRecord img;
    if (scheme.is_venena()) {
        auto [strong_sym, weak_sym] = sic_receive(y, budget);
        const BitVector strong = deinterleave_bits(
            strong_sym, interleaver_permutation(strong_sym.size(), kStrongStream));
        const BitVector weak = deinterleave_bits(
            weak_sym, interleaver_permutation(weak_sym.size(), kWeakStream));
        if (weak_bits_out) *weak_bits_out = weak;
        img = bits_to_image(apply_mask(strong, PoisonMask{weak}));
    } else {
        const BitVector direct_sym = direct_receive(y, budget);
        img = bits_to_image(deinterleave_bits(
            direct_sym, interleaver_permutation(direct_sym.size(), kStrongStream)));
    }
    return tag_to_message(forward(*ctx.model, img).top_tag, ctx.table);
}

Message perceive_direct(const ReceivedFrame& y, const PipelineContext& ctx,
                        const LinkBudget& budget) {
    const BitVector direct_sym = direct_receive(y, budget);
    const ImageRecord img = bits_to_image(deinterleave_bits(
        direct_sym, interleaver_permutation(direct_sym.size(), kStrongStream)));
    return tag_to_message(forward(*ctx.model, img).top_tag, ctx.table);
}

}  // namespace

Message bob_perceive(const ReceivedFrame& y, const Scheme& scheme, const PipelineContext& ctx,
                     const LinkBudget& budget) {
    return perceive_reconstructing(y, scheme, ctx, budget, nullptr);
}

Message eve_perceive(const ReceivedFrame& y, KnowledgeLevel level, const Scheme& scheme,
                     const PipelineContext& ctx, const LinkBudget& budget) {
    if (level == KnowledgeLevel::Full)
        return perceive_reconstructing(y, scheme, ctx, budget, nullptr);
    return perceive_direct(y, ctx, budget);
}

TrialRecord run_trial(std::optional<Message> m, const Scheme& scheme, const SceneConfig& scene,
                      const PipelineContext& ctx, std::uint64_t seed) {
    RandomSource rng(seed);
    const Message message = m.has_value() ? *m : Message(int(rng.uniform_index(kNumClasses)));
    const LinkBudget budget = scheme.budget_for(scene);

    Transmission tx = alice_transmit(message, scheme, ctx, budget, rng);
    const std::size_t n = tx.samples.size();

    const ChannelRealization h_bob = draw_channel(scene.bob_channel(), n, rng);
    const ChannelRealization h_eve = draw_channel(scene.eve_channel(), n, rng);
    const ReceivedFrame y_bob = transmit(tx.samples, h_bob, budget, rng);
    const ReceivedFrame y_eve = transmit(tx.samples, h_eve, budget, rng);

    TrialRecord rec = tx.record;
    rec.bob_gain = h_bob.block_gain();
    rec.eve_gain = h_eve.block_gain();

    if (scheme.is_venena()) {
        BitVector bob_weak, eve_weak;
        rec.perceived_bob =
            perceive_reconstructing(y_bob, scheme, ctx, budget, &bob_weak).value;
        rec.perceived_eve_full =
            perceive_reconstructing(y_eve, scheme, ctx, budget, &eve_weak).value;
        rec.bob_mask_errors = bob_weak.count_differing(tx.weak_bits);
        rec.eve_mask_errors = eve_weak.count_differing(tx.weak_bits);
    } else {
        rec.perceived_bob = bob_perceive(y_bob, scheme, ctx, budget).value;
        rec.perceived_eve_full =
            eve_perceive(y_eve, KnowledgeLevel::Full, scheme, ctx, budget).value;
    }
    rec.perceived_eve_partial =
        eve_perceive(y_eve, KnowledgeLevel::Partial, scheme, ctx, budget).value;
    return rec;
}

}  // namespace pld
