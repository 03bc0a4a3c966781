#include "pld/poisoner.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "pld/dual.hpp"
#include "pld/parallel.hpp"
#include "pld/rng.hpp"

namespace pld {

namespace {

struct LayerDots {
    double dot = 0.0;
    double norm_t = 0.0;  // |g_t^l|_2
    double norm_p = 0.0;  // |g_p^l|_2
};

// Per-layer inner products over the concatenated (weights, biases) gradient.
std::vector<LayerDots> layer_dots(const GradientSet& g_t, const GradientSet& g_p) {
    if (g_t.weights.size() != g_p.weights.size())
        throw ShapeMismatch("loss_match: gradient sets have different layer counts");
    std::vector<LayerDots> dots;
    dots.reserve(g_t.weights.size());
    for (std::size_t l = 0; l < g_t.weights.size(); ++l) {
        if (g_t.weights[l].size() != g_p.weights[l].size() ||
            g_t.biases[l].size() != g_p.biases[l].size())
            throw ShapeMismatch("loss_match: layer " + std::to_string(l) +
                                " shapes are not congruent");
        if (g_t.weights[l].empty() && g_t.biases[l].empty()) continue;  // parameter-free layer
        LayerDots d;
        double tt = 0.0, pp = 0.0;
        for (std::size_t i = 0; i < g_t.weights[l].size(); ++i) {
            const double a = g_t.weights[l][i], b = g_p.weights[l][i];
            d.dot += a * b;
            tt += a * a;
            pp += b * b;
        }
        for (std::size_t i = 0; i < g_t.biases[l].size(); ++i) {
            const double a = g_t.biases[l][i], b = g_p.biases[l][i];
            d.dot += a * b;
            tt += a * a;
            pp += b * b;
        }
        d.norm_t = std::sqrt(tt);
        d.norm_p = std::sqrt(pp);
        dots.push_back(d);
    }
    return dots;
}

}  // namespace

double best_other_logit(const std::array<double, kNumClasses>& logits, SemanticTag y_t) {
    double best = -1e300;
    for (std::size_t c = 0; c < logits.size(); ++c)
        if (int(c) != int(y_t)) best = std::max(best, logits[c]);
    return best;
}

double target_margin(const std::vector<double>& logits, SemanticTag y_t) {
    double best_other = -1e300;
    for (std::size_t c = 0; c < logits.size(); ++c)
        if (int(c) != int(y_t)) best_other = std::max(best_other, logits[c]);
    return logits[std::size_t(y_t)] - best_other;
}

double loss_match(const GradientSet& g_t, const GradientSet& g_p) {
    double loss = 0.0;
    for (const LayerDots& d : layer_dots(g_t, g_p)) {
        if (d.norm_t == 0.0 || d.norm_p == 0.0) continue;
        loss -= d.dot / (d.norm_t * d.norm_p);
    }
    return loss;
}

double loss_norm(const GradientSet& g_p) {
    double acc = 0.0;
    for (const auto& layer : g_p.weights)
        for (double v : layer) acc += v * v;
    for (const auto& layer : g_p.biases)
        for (double v : layer) acc += v * v;
    return acc;
}

double loss_total(double match, double classification, double norm, const PoisonConfig& cfg) {
    return cfg.lambda1 * match + cfg.lambda2 * classification + cfg.lambda3 * norm;
}

std::vector<double> clip_to_budget(const std::vector<double>& candidate,
                                   const std::vector<double>& clean, double epsilon) {
    if (candidate.size() != clean.size())
        throw ShapeMismatch("clip_to_budget: tensor sizes differ");
    std::vector<double> out(candidate.size());
    for (std::size_t i = 0; i < candidate.size(); ++i) {
        const double lo = std::max(0.0, clean[i] - epsilon);
        const double hi = std::min(1.0, clean[i] + epsilon);
        out[i] = std::clamp(candidate[i], lo, hi);
    }
    return out;
}

ImageRecord quantize(const std::vector<double>& continuous) {
    if (continuous.size() != std::size_t(kImageValues))
        throw ShapeMismatch("quantize: expected " + std::to_string(kImageValues) + " values");
    ImageRecord img;
    for (int i = 0; i < kImageValues; ++i) {
        const double v = std::round(continuous[std::size_t(i)] * 255.0);
        img.data[std::size_t(i)] = std::uint8_t(std::clamp(v, 0.0, 255.0));
    }
    return img;
}

PoisonMask compute_mask(const BitVector& original_bits, const BitVector& poisoned_bits) {
    return PoisonMask{original_bits.xor_with(poisoned_bits)};
}

BitVector apply_mask(const BitVector& bits, const PoisonMask& mask) {
    return bits.xor_with(mask.bits);
}

namespace {

// dL_match/dg_p plus the L_norm contribution, laid out like the parameters:
// the tangent vector for the dual differentiation pass.
GradientSet matching_tangent(const ModelParams& model, const GradientSet& g_t,
                             const GradientSet& g_p, double lambda1, double lambda3) {
    GradientSet v = GradientSet::zeros_like(model);
    for (std::size_t l = 0; l < v.weights.size(); ++l) {
        if (v.weights[l].empty() && v.biases[l].empty()) continue;
        double dot = 0.0, tt = 0.0, pp = 0.0;
        for (std::size_t i = 0; i < v.weights[l].size(); ++i) {
            dot += g_t.weights[l][i] * g_p.weights[l][i];
            tt += g_t.weights[l][i] * g_t.weights[l][i];
            pp += g_p.weights[l][i] * g_p.weights[l][i];
        }
        for (std::size_t i = 0; i < v.biases[l].size(); ++i) {
            dot += g_t.biases[l][i] * g_p.biases[l][i];
            tt += g_t.biases[l][i] * g_t.biases[l][i];
            pp += g_p.biases[l][i] * g_p.biases[l][i];
        }
        const double norm_t = std::sqrt(tt);
        const double norm_p = std::sqrt(pp);
        double c1 = 0.0;  // coefficient of g_t^l in dL_match/dg_p^l
        double c2 = 0.0;  // coefficient of g_p^l
        if (lambda1 != 0.0 && norm_t > 0.0 && norm_p > 0.0) {
            const double cosine = dot / (norm_t * norm_p);
            c1 = -lambda1 / (norm_t * norm_p);
            c2 = lambda1 * cosine / (norm_p * norm_p);
        }
        const double c3 = 2.0 * lambda3;  // d(|g_p|^2)/dg_p = 2 g_p
        for (std::size_t i = 0; i < v.weights[l].size(); ++i)
            v.weights[l][i] = c1 * g_t.weights[l][i] + (c2 + c3) * g_p.weights[l][i];
        for (std::size_t i = 0; i < v.biases[l].size(); ++i)
            v.biases[l][i] = c1 * g_t.biases[l][i] + (c2 + c3) * g_p.biases[l][i];
    }
    return v;
}

}  // namespace

PoisonResult gma_poison(const ModelParams& model_in, const ImageRecord& original,
                        SemanticTag target_tag, const PoisonConfig& cfg,
                        const ImageDatabase* inner_dataset) {
    if (target_tag == original.tag)
        throw std::invalid_argument("gma_poison: target tag equals the original's tag");
    if (cfg.epsilon <= 0.0 || cfg.n_iter < 1 || cfg.step_size < 0.0)
        throw std::invalid_argument(
            "gma_poison: need epsilon > 0, n_iter >= 1, step_size >= 0");
    if (cfg.lambda1 < 0.0 || cfg.lambda2 < 0.0 || cfg.lambda3 < 0.0 ||
        (cfg.lambda1 == 0.0 && cfg.lambda2 == 0.0 && cfg.lambda3 == 0.0))
        throw std::invalid_argument("gma_poison: loss weights must be >= 0 and not all zero");
    if (cfg.break_ber < 0.0 || cfg.break_ber >= 1.0 || cfg.calib_samples < 1 ||
        cfg.margin_floor < 0.0)
        throw std::invalid_argument(
            "gma_poison: need 0 <= break_ber < 1, calib_samples >= 1, margin_floor >= 0");
    if (cfg.inner_train && inner_dataset == nullptr)
        throw std::invalid_argument("gma_poison: inner_train needs a clean dataset");

    // private copy only when the literal in-loop update mutates the victim
    ModelParams local;
    const ModelParams* model = &model_in;
    if (cfg.inner_train) {
        local = model_in;
        model = &local;
    }

    const SemanticTag y_p = original.tag;
    const SemanticTag y_t = target_tag;
    const std::vector<double> clean = normalize_image(original);
    std::vector<double> P = clean;

    RandomSource rng(derive_seed(cfg.seed, fnv1a64("gma-inner")));
    std::vector<const ImageRecord*> inner_pool;
    if (cfg.inner_train) {
        for (const auto& bucket : inner_dataset->classes)
            for (const auto& img : bucket) inner_pool.push_back(&img);
        if (inner_pool.empty())
            throw std::invalid_argument("gma_poison: inner_train dataset is empty");
    }

    // buffers reused across iterations
    EngineBuffers<double> real_buf;
    EngineBuffers<Dual> dual_buf;
    GradientSet g_p = GradientSet::zeros_like(*model);
    std::vector<double> dlogits;
    std::vector<Dual> dual_dlogits;
    std::vector<std::vector<Dual>> dual_weights(model->layers.size());
    std::vector<std::vector<Dual>> dual_biases(model->layers.size());
    std::vector<Dual> dual_dinput;

    const bool need_dual = cfg.lambda1 != 0.0 || cfg.lambda3 != 0.0;
    GradientSet g_t;
    if (!cfg.inner_train) g_t = backward_values(*model, clean, y_t);

    PoisonResult result;
    result.loss_trace.reserve(std::size_t(cfg.n_iter));
    std::vector<double> prev_P;
    bool landed = false;

    for (int iter = 0; iter < cfg.n_iter; ++iter) {
        if (cfg.inner_train) {
            // literal pseudocode line: one victim SGD step on a clean batch
            GradientSet batch_grads = GradientSet::zeros_like(local);
            GradientSet one = GradientSet::zeros_like(local);
            const auto views = views_of(local);
            for (int b = 0; b < cfg.inner_batch; ++b) {
                const ImageRecord& img = *inner_pool[rng.uniform_index(inner_pool.size())];
                const std::vector<double> values = normalize_image(img);
                engine_forward(local, views, values.data(), real_buf);
                softmax_cross_entropy(real_buf.acts.back(), int(img.tag), &dlogits);
                engine_backward<double>(local, views, real_buf, dlogits, &one.weights, &one.biases,
                                nullptr);
                for (std::size_t l = 0; l < batch_grads.weights.size(); ++l) {
                    for (std::size_t i = 0; i < batch_grads.weights[l].size(); ++i)
                        batch_grads.weights[l][i] += one.weights[l][i] / cfg.inner_batch;
                    for (std::size_t i = 0; i < batch_grads.biases[l].size(); ++i)
                        batch_grads.biases[l][i] += one.biases[l][i] / cfg.inner_batch;
                }
            }
            local = sgd_step(std::move(local), batch_grads, cfg.inner_lr);
            g_t = backward_values(local, clean, y_t);  // theta moved; refresh target gradient
        }

        const auto views = views_of(*model);

        // one real forward at P, then two backward passes off the same logits
        engine_forward(*model, views, P.data(), real_buf);
        const double l_class =
            softmax_cross_entropy(real_buf.acts.back(), int(y_t), &dlogits);
        if (cfg.stop_margin > 0.0 &&
            target_margin(real_buf.acts.back(), y_t) >= cfg.stop_margin) {
            // The crossing step usually overshoots; walk back along the last
            // update to land just past the requested margin.
            if (!prev_P.empty()) {
                double lo = 0.0, hi = 1.0;  // margin(prev_P)<kappa, margin(P)>=kappa
                std::vector<double> probe(P.size());
                for (int b = 0; b < 12; ++b) {
                    const double mid = 0.5 * (lo + hi);
                    for (std::size_t i = 0; i < P.size(); ++i)
                        probe[i] = prev_P[i] + mid * (P[i] - prev_P[i]);
                    engine_forward(*model, views, probe.data(), real_buf);
                    if (target_margin(real_buf.acts.back(), y_t) >= cfg.stop_margin)
                        hi = mid;
                    else
                        lo = mid;
                }
                for (std::size_t i = 0; i < P.size(); ++i)
                    P[i] = prev_P[i] + hi * (P[i] - prev_P[i]);
            }
            landed = true;
            break;
        }
        if (cfg.stop_margin > 0.0) prev_P = P;
        std::vector<double> grad_class;
        if (cfg.lambda2 != 0.0)
            engine_backward<double>(*model, views, real_buf, dlogits, nullptr, nullptr, &grad_class);

        softmax_cross_entropy(real_buf.acts.back(), int(y_p), &dlogits);
        engine_backward<double>(*model, views, real_buf, dlogits, &g_p.weights, &g_p.biases, nullptr);

        const double l_match = loss_match(g_t, g_p);
        const double l_norm = loss_norm(g_p);
        const double l_total = loss_total(l_match, l_class, l_norm, cfg);
        if (!std::isfinite(l_total))
            throw Diverged("gma_poison: non-finite loss at iteration " + std::to_string(iter));
        result.loss_trace.push_back({l_match, l_class, l_norm, l_total});

        // gradient of the matching + norm terms via one dual pass: parameters
        // carry tangent v, and the tangent slot of the input gradient is
        // d/dP (v . dL/dtheta)
        std::vector<double> grad_match_norm;
        if (need_dual) {
            const GradientSet v =
                matching_tangent(*model, g_t, g_p, cfg.lambda1, cfg.lambda3);
            std::vector<ParamView<Dual>> dviews(model->layers.size());
            for (std::size_t l = 0; l < model->layers.size(); ++l) {
                const auto& layer = model->layers[l];
                dual_weights[l].resize(layer.weights.size());
                dual_biases[l].resize(layer.biases.size());
                for (std::size_t i = 0; i < layer.weights.size(); ++i)
                    dual_weights[l][i] = Dual(layer.weights[i], v.weights[l][i]);
                for (std::size_t i = 0; i < layer.biases.size(); ++i)
                    dual_biases[l][i] = Dual(layer.biases[i], v.biases[l][i]);
                if (!layer.weights.empty()) {
                    dviews[l].w = dual_weights[l].data();
                    dviews[l].b = dual_biases[l].data();
                }
            }
            engine_forward(*model, dviews, P.data(), dual_buf);
            softmax_cross_entropy(dual_buf.acts.back(), int(y_p), &dual_dlogits);
            engine_backward<Dual>(*model, dviews, dual_buf, dual_dlogits, nullptr, nullptr,
                            &dual_dinput);
            grad_match_norm.resize(dual_dinput.size());
            for (std::size_t i = 0; i < dual_dinput.size(); ++i)
                grad_match_norm[i] = dual_dinput[i].t;
        }

        std::vector<double> g(P.size(), 0.0);
        double g_inf = 0.0;
        for (std::size_t i = 0; i < P.size(); ++i) {
            if (need_dual) g[i] += grad_match_norm[i];
            if (cfg.lambda2 != 0.0) g[i] += cfg.lambda2 * grad_class[i];
            g_inf = std::max(g_inf, std::fabs(g[i]));
        }
        // Steps are normalized so no channel value moves more than
        // step_size * epsilon per iteration. Raw gradient steps overshoot:
        // one oversized update turns the iterate into dense impulse noise,
        // the victim's front end squelches it, and the gradient signal dies.
        if (g_inf > 0.0) {
            const double scale = cfg.step_size * cfg.epsilon / g_inf;
            for (std::size_t i = 0; i < P.size(); ++i) P[i] -= scale * g[i];
        }
        P = clip_to_budget(P, clean, cfg.epsilon);
    }

    if (landed && cfg.break_ber > 0.0) {
        // Break-even calibration: measure what the break-rate corruption costs
        // in logit margin, then re-land the confidence at exactly that cost
        // (clamped to the floor) so corruption at break_ber is the tipping
        // point. Logit shifts from serialized-bit noise are additive to first
        // order, so the cost measured here transfers to the re-landed point.
        RandomSource crng(derive_seed(cfg.seed, fnv1a64("gma-calib")));
        const auto views = views_of(*model);
        const ImageRecord q0 = quantize(P);
        const BitVector base_bits = image_to_bits(q0);
        const PredictOutcome ref = forward(*model, q0);
        std::vector<double> drops;
        drops.reserve(std::size_t(cfg.calib_samples));
        for (int k = 0; k < cfg.calib_samples; ++k) {
            BitVector noisy = base_bits;
            for (std::size_t i = 0; i < noisy.size(); ++i)
                if (crng.uniform() < cfg.break_ber) noisy.set(i, !noisy.get(i));
            const PredictOutcome hit = forward(*model, bits_to_image(noisy));
            const double m_ref = ref.logits[std::size_t(y_t)] -
                                 best_other_logit(ref.logits, y_t);
            const double m_hit = hit.logits[std::size_t(y_t)] -
                                 best_other_logit(hit.logits, y_t);
            drops.push_back(m_ref - m_hit);
        }
        std::nth_element(drops.begin(), drops.begin() + drops.size() / 2, drops.end());
        const double cost = drops[drops.size() / 2];
        const double ceiling =
            std::max(cfg.margin_floor, cfg.stop_margin - 0.05);
        const double target = std::clamp(cost, cfg.margin_floor, ceiling);
        double lo = 0.0, hi = 1.0;  // margin(clean) < 0 <= target <= margin(P)
        std::vector<double> probe(P.size());
        for (int b = 0; b < 14; ++b) {
            const double mid = 0.5 * (lo + hi);
            for (std::size_t i = 0; i < P.size(); ++i)
                probe[i] = clean[i] + mid * (P[i] - clean[i]);
            engine_forward(*model, views, probe.data(), real_buf);
            if (target_margin(real_buf.acts.back(), y_t) >= target)
                hi = mid;
            else
                lo = mid;
        }
        for (std::size_t i = 0; i < P.size(); ++i)
            P[i] = clean[i] + hi * (P[i] - clean[i]);
    }

    result.poisoned_continuous = P;
    result.poisoned = quantize(P);
    result.poisoned.tag = original.tag;  // content provenance stays the decoy class
    result.success = forward(*model, result.poisoned).top_tag == target_tag;
    return result;
}

// ---------------------------------------------------------------------------
// Poison cache
// ---------------------------------------------------------------------------

std::uint64_t PoisonCache::expected_hash(const ModelParams& model, const ImageDatabase& db,
                                         const PoisonConfig& cfg, std::size_t total_entries,
                                         std::uint64_t seed) {
    std::uint64_t h = fnv1a64("cache-v1");
    auto mix_u64 = [&h](std::uint64_t x) {
        for (int i = 0; i < 8; ++i) {
            h ^= (x >> (8 * i)) & 0xff;
            h *= 0x100000001b3ull;
        }
    };
    auto mix_f64 = [&](double x) {
        std::uint64_t bits;
        std::memcpy(&bits, &x, sizeof(bits));
        mix_u64(bits);
    };
    mix_u64(model_fingerprint(model));
    h = fnv1a64(db.provenance, h);
    mix_u64(db.total_images());
    mix_f64(cfg.epsilon);
    mix_f64(cfg.lambda1);
    mix_f64(cfg.lambda2);
    mix_f64(cfg.lambda3);
    mix_u64(std::uint64_t(cfg.n_iter));
    mix_f64(cfg.step_size);
    mix_f64(cfg.stop_margin);
    mix_f64(cfg.break_ber);
    mix_u64(std::uint64_t(cfg.calib_samples));
    mix_f64(cfg.margin_floor);
    mix_u64(total_entries);
    mix_u64(seed);
    return h;
}

PoisonCache PoisonCache::build(const ModelParams& model, const ImageDatabase& db,
                               std::size_t total_entries, const PoisonConfig& cfg,
                               std::uint64_t seed,
                               const std::function<void(std::size_t, std::size_t)>& progress) {
    if (total_entries == 0)
        throw std::invalid_argument("PoisonCache::build: need at least one entry");

    // ordered class pairs in a fixed scan order, cycled until total_entries
    std::vector<std::pair<int, int>> pairs;
    for (int s = 0; s < kNumClasses; ++s)
        for (int d = 0; d < kNumClasses; ++d)
            if (s != d) pairs.emplace_back(s, d);

    PoisonCache cache;
    cache.epsilon = cfg.epsilon;
    cache.config_hash = expected_hash(model, db, cfg, total_entries, seed);
    cache.entries.resize(total_entries);

    for (std::size_t i = 0; i < total_entries; ++i) {
        const auto [s, d] = pairs[i % pairs.size()];
        auto& e = cache.entries[i];
        e.src_tag = SemanticTag(s);
        e.dst_tag = SemanticTag(d);
        const auto& bucket = db.classes[std::size_t(s)];
        if (bucket.empty())
            throw EmptyClassBucket("PoisonCache::build: empty bucket for class " +
                                   std::to_string(s));
        RandomSource pick(derive_seed(seed, fnv1a64("cache-pick"), i));
        e.src_index = std::uint32_t(pick.uniform_index(bucket.size()));
        e.original = bucket[e.src_index];
    }

    parallel_for(total_entries, [&](std::size_t i) {
        auto& e = cache.entries[i];
        PoisonConfig entry_cfg = cfg;
        entry_cfg.seed = derive_seed(seed, fnv1a64("cache-poison"), i);
        const PoisonResult r = gma_poison(model, e.original, e.dst_tag, entry_cfg);
        e.poisoned = r.poisoned;
        e.success = r.success;
        if (progress) progress(i + 1, total_entries);
    });

    cache.rebuild_index();
    return cache;
}

void PoisonCache::rebuild_index() {
    for (auto& row : index_)
        for (auto& cell : row) cell.clear();
    for (std::size_t i = 0; i < entries.size(); ++i)
        index_[std::size_t(entries[i].src_tag)][std::size_t(entries[i].dst_tag)].push_back(i);
}

const PoisonCacheEntry& PoisonCache::sample(SemanticTag src, SemanticTag dst,
                                            RandomSource& rng) const {
    const auto& cell = index_[std::size_t(src)][std::size_t(dst)];
    if (cell.empty())
        throw EmptyClassBucket("PoisonCache::sample: no entries for pair " +
                               std::string(tag_name(src)) + " -> " +
                               std::string(tag_name(dst)));
    return entries[cell[rng.uniform_index(cell.size())]];
}

double PoisonCache::success_rate() const {
    if (entries.empty()) return 0.0;
    std::size_t ok = 0;
    for (const auto& e : entries) ok += e.success ? 1u : 0u;
    return double(ok) / double(entries.size());
}

namespace {
constexpr char kCacheMagic[8] = {'P', 'L', 'D', 'P', 'C', 'H', '1', '\n'};
}

void PoisonCache::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("PoisonCache::save: cannot open '" + path + "'");
    out.write(kCacheMagic, sizeof(kCacheMagic));
    out.write(reinterpret_cast<const char*>(&config_hash), sizeof(config_hash));
    out.write(reinterpret_cast<const char*>(&epsilon), sizeof(epsilon));
    const auto n = std::uint32_t(entries.size());
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    for (const auto& e : entries) {
        const std::uint8_t src = std::uint8_t(e.src_tag), dst = std::uint8_t(e.dst_tag);
        const std::uint8_t ok = e.success ? 1 : 0;
        out.write(reinterpret_cast<const char*>(&src), 1);
        out.write(reinterpret_cast<const char*>(&dst), 1);
        out.write(reinterpret_cast<const char*>(&e.src_index), sizeof(e.src_index));
        out.write(reinterpret_cast<const char*>(&ok), 1);
        out.write(reinterpret_cast<const char*>(e.original.data.data()), kImageValues);
        out.write(reinterpret_cast<const char*>(e.poisoned.data.data()), kImageValues);
    }
    if (!out) throw IoError("PoisonCache::save: write failed for '" + path + "'");
}

PoisonCache PoisonCache::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("PoisonCache::load: cannot open '" + path + "'");
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCacheMagic, sizeof(magic)) != 0)
        throw MalformedRecord("PoisonCache::load: bad magic in '" + path + "'");
    PoisonCache cache;
    in.read(reinterpret_cast<char*>(&cache.config_hash), sizeof(cache.config_hash));
    in.read(reinterpret_cast<char*>(&cache.epsilon), sizeof(cache.epsilon));
    std::uint32_t n = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof(n));
    if (!in) throw MalformedRecord("PoisonCache::load: truncated header in '" + path + "'");
    cache.entries.resize(n);
    for (auto& e : cache.entries) {
        std::uint8_t src = 0, dst = 0, ok = 0;
        in.read(reinterpret_cast<char*>(&src), 1);
        in.read(reinterpret_cast<char*>(&dst), 1);
        in.read(reinterpret_cast<char*>(&e.src_index), sizeof(e.src_index));
        in.read(reinterpret_cast<char*>(&ok), 1);
        in.read(reinterpret_cast<char*>(e.original.data.data()), kImageValues);
        in.read(reinterpret_cast<char*>(e.poisoned.data.data()), kImageValues);
        if (src >= kNumClasses || dst >= kNumClasses)
            throw MalformedRecord("PoisonCache::load: tag byte out of range");
        e.src_tag = SemanticTag(int(src));
        e.dst_tag = SemanticTag(int(dst));
        e.success = ok != 0;
        e.original.tag = e.src_tag;
        e.poisoned.tag = e.src_tag;
    }
    if (!in) throw MalformedRecord("PoisonCache::load: truncated entries in '" + path + "'");
    cache.rebuild_index();
    return cache;
}

std::optional<PoisonCache> PoisonCache::try_load(const std::string& path,
                                                 std::uint64_t expected) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) return std::nullopt;
    probe.close();
    try {
        PoisonCache cache = load(path);
        if (cache.config_hash != expected) return std::nullopt;
        return cache;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

}  // namespace pld
