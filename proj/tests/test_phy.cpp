#include <cmath>
#include <complex>
#include <vector>

#include "doctest.h"
#include "pld/phy.hpp"
#include "pld/rng.hpp"
#include "pld/stats.hpp"

using namespace pld;

namespace {

BitVector random_bits(std::size_t n, RandomSource& rng) {
    BitVector b(n);
    for (std::size_t i = 0; i < n; ++i) b.set(i, rng.uniform_index(2) == 1);
    return b;
}

// Unit mean gain, 1 W noise power: total_power then equals the SNR directly.
LinkBudget unit_noise_budget(double total_power, double alpha) {
    LinkBudget b;
    b.total_power = total_power;
    b.alpha = alpha;
    b.bandwidth = 1e6;
    b.noise_psd = 1e-6;
    b.bit_rate = 1e6;
    return b;
}

LinkBudget noiseless_budget(double alpha) {
    LinkBudget b = unit_noise_budget(0.1, alpha);
    b.noise_psd = 1e-300;  // keeps the budget valid while every BER rounds to 0
    return b;
}

// Single-stream frame at the budget's full power (no superposition).
std::vector<double> scale_frame(const SymbolFrame& frame, double power) {
    std::vector<double> out(frame.symbols.size());
    const double amplitude = std::sqrt(power);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = amplitude * frame.symbols[k];
    return out;
}

}  // namespace

TEST_CASE("decibel conversions invert each other") {
    CHECK(db_to_linear(0.0) == doctest::Approx(1.0));
    CHECK(db_to_linear(10.0) == doctest::Approx(10.0));
    CHECK(db_to_linear(-30.0) == doctest::Approx(1e-3));
    for (double db : {-95.0, -12.5, 0.0, 7.25, 40.0})
        CHECK(linear_to_db(db_to_linear(db)) == doctest::Approx(db).epsilon(1e-12));
}

TEST_CASE("link budgets reject non-physical parameters") {
    CHECK_NOTHROW(validate_budget(LinkBudget{}));
    LinkBudget b;
    b.total_power = 0.0;
    CHECK_THROWS_AS(validate_budget(b), std::invalid_argument);
    b = LinkBudget{};
    b.alpha = 0.0;
    CHECK_THROWS_AS(validate_budget(b), std::invalid_argument);
    b.alpha = 1.5;
    CHECK_THROWS_AS(validate_budget(b), std::invalid_argument);
    b = LinkBudget{};
    b.bandwidth = -1.0;
    CHECK_THROWS_AS(validate_budget(b), std::invalid_argument);
    b = LinkBudget{};
    b.noise_psd = 0.0;
    CHECK_THROWS_AS(validate_budget(b), std::invalid_argument);
    b = LinkBudget{};
    b.bit_rate = 0.0;
    CHECK_THROWS_AS(validate_budget(b), std::invalid_argument);
}

TEST_CASE("bpsk maps bit 0 to +1 and bit 1 to -1") {
    BitVector bits(4);
    bits.set(1, true);
    bits.set(2, true);
    const SymbolFrame frame = bpsk_modulate(bits);
    REQUIRE(frame.symbols.size() == 4);
    CHECK(frame.symbols[0] == 1.0);
    CHECK(frame.symbols[1] == -1.0);
    CHECK(frame.symbols[2] == -1.0);
    CHECK(frame.symbols[3] == 1.0);
    CHECK_THROWS_AS((void)bpsk_modulate(BitVector()), std::invalid_argument);
}

TEST_CASE("superposition weights components by the power split") {
    const LinkBudget budget = unit_noise_budget(2.0, 0.64);
    BitVector strong(2), weak(2);
    strong.set(1, true);
    weak.set(0, true);
    const auto samples = superpose(bpsk_modulate(strong), bpsk_modulate(weak), budget);
    const double a_i = std::sqrt(0.64 * 2.0);
    const double a_p = std::sqrt(0.36 * 2.0);
    REQUIRE(samples.size() == 2);
    CHECK(samples[0] == doctest::Approx(a_i - a_p).epsilon(1e-12));
    CHECK(samples[1] == doctest::Approx(-a_i + a_p).epsilon(1e-12));

    SymbolFrame longer;
    longer.symbols = {1.0, -1.0, 1.0};
    CHECK_THROWS_AS((void)superpose(bpsk_modulate(strong), longer, budget), LengthMismatch);
}

TEST_CASE("superposed frames carry the configured mean power") {
    const LinkBudget budget = unit_noise_budget(0.1, 0.75);
    RandomSource rng(101);
    double acc = 0.0;
    std::size_t count = 0;
    for (int rep = 0; rep < 200; ++rep) {
        const BitVector a = random_bits(1024, rng);
        const BitVector b = random_bits(1024, rng);
        const auto samples = superpose(bpsk_modulate(a), bpsk_modulate(b), budget);
        for (double s : samples) acc += s * s;
        count += samples.size();
    }
    const double mean_power = acc / double(count);
    CHECK(mean_power == doctest::Approx(budget.total_power).epsilon(0.01));
}

TEST_CASE("channel draws match their fading model") {
    RandomSource rng(202);

    SUBCASE("static channels are a deterministic real coefficient") {
        const ChannelRealization h = draw_channel({-20.0, FadingModel::Static}, 64, rng);
        REQUIRE(h.coeff.size() == 1);
        CHECK(h.coeff[0].imag() == 0.0);
        CHECK(h.block_gain() == doctest::Approx(db_to_linear(-20.0)).epsilon(1e-12));
    }
    SUBCASE("block fading draws one coefficient per frame") {
        const ChannelRealization h = draw_channel({-85.0, FadingModel::RayleighBlock}, 64, rng);
        CHECK(h.coeff.size() == 1);
        CHECK(h.at(0) == h.at(63));
    }
    SUBCASE("per-symbol fading draws one coefficient per symbol") {
        const ChannelRealization h =
            draw_channel({-85.0, FadingModel::RayleighPerSymbol}, 64, rng);
        CHECK(h.coeff.size() == 64);
        CHECK(h.at(0) != h.at(1));
    }
    SUBCASE("block gains are exponential with the configured mean") {
        const double mean = db_to_linear(-3.0);
        std::vector<double> gains;
        for (int i = 0; i < 4000; ++i)
            gains.push_back(draw_channel({-3.0, FadingModel::RayleighBlock}, 1, rng).block_gain());
        CHECK(ks_statistic_exponential(gains, mean) < ks_critical_1pct(gains.size()));
    }
}

TEST_CASE("transmission is deterministic given the random source") {
    const LinkBudget budget = unit_noise_budget(1.0, 0.75);
    RandomSource bits_rng(303);
    const BitVector bits = random_bits(256, bits_rng);
    const auto samples = scale_frame(bpsk_modulate(bits), budget.total_power);

    RandomSource rng_a(7), rng_b(7);
    const ChannelRealization h_a = draw_channel({-10.0, FadingModel::RayleighBlock}, 256, rng_a);
    const ChannelRealization h_b = draw_channel({-10.0, FadingModel::RayleighBlock}, 256, rng_b);
    const ReceivedFrame y_a = transmit(samples, h_a, budget, rng_a);
    const ReceivedFrame y_b = transmit(samples, h_b, budget, rng_b);
    CHECK(h_a.coeff == h_b.coeff);
    CHECK(y_a.samples == y_b.samples);
}

TEST_CASE("static-channel bit error rate follows the gaussian tail formula") {
    RandomSource rng(404);
    const std::size_t n_bits = 200000;
    for (double snr_db : {0.0, 6.0}) {
        const double snr = db_to_linear(snr_db);
        const LinkBudget budget = unit_noise_budget(snr, 0.75);
        const ChannelRealization h = draw_channel({0.0, FadingModel::Static}, n_bits, rng);

        const BitVector bits = random_bits(n_bits, rng);
        const ReceivedFrame y =
            transmit(scale_frame(bpsk_modulate(bits), budget.total_power), h, budget, rng);
        const BitVector decoded = direct_receive(y, budget);

        const double expected = bpsk_ber_awgn(snr);
        const double measured = double(decoded.count_differing(bits)) / double(n_bits);
        const double sigma = std::sqrt(expected * (1.0 - expected) / double(n_bits));
        CHECK(std::fabs(measured - expected) < 3.0 * sigma);
    }
}

TEST_CASE("block-fading bit error rate follows the rayleigh average formula") {
    RandomSource rng(505);
    const std::size_t frame_len = 512;
    const std::size_t n_frames = 400;
    for (double snr_db : {0.0, 10.0}) {
        const double mean_snr = db_to_linear(snr_db);
        const LinkBudget budget = unit_noise_budget(mean_snr, 0.75);

        std::size_t errors = 0;
        for (std::size_t f = 0; f < n_frames; ++f) {
            const ChannelRealization h =
                draw_channel({0.0, FadingModel::RayleighBlock}, frame_len, rng);
            const BitVector bits = random_bits(frame_len, rng);
            const ReceivedFrame y =
                transmit(scale_frame(bpsk_modulate(bits), budget.total_power), h, budget, rng);
            errors += direct_receive(y, budget).count_differing(bits);
        }
        const double n_bits = double(frame_len * n_frames);
        const double expected = bpsk_ber_rayleigh(mean_snr);
        const double measured = double(errors) / n_bits;
        // block fading correlates errors within a frame; the effective sample
        // count for the variance is the number of frames, not of bits
        const double sigma = std::sqrt(expected * (1.0 - expected) / double(n_frames));
        CHECK(std::fabs(measured - expected) < 3.0 * sigma);
    }
}

TEST_CASE("noiseless sic recovers both streams exactly") {
    RandomSource rng(606);
    for (double alpha : {0.6, 0.75, 0.9}) {
        const LinkBudget budget = noiseless_budget(alpha);
        const BitVector strong = random_bits(4096, rng);
        const BitVector weak = random_bits(4096, rng);
        const auto samples = superpose(bpsk_modulate(strong), bpsk_modulate(weak), budget);

        const ChannelRealization h = draw_channel({-85.0, FadingModel::RayleighBlock}, 4096, rng);
        const ReceivedFrame y = transmit(samples, h, budget, rng);
        const auto [strong_hat, weak_hat] = sic_receive(y, budget);
        CHECK(strong_hat.count_differing(strong) == 0);
        CHECK(weak_hat.count_differing(weak) == 0);
    }
}

TEST_CASE("sic refuses a degenerate power split") {
    const LinkBudget budget = unit_noise_budget(1.0, 1.0);
    ReceivedFrame y;
    y.samples = {std::complex<double>(1.0, 0.0)};
    y.channel.coeff = {std::complex<double>(1.0, 0.0)};
    CHECK_THROWS_AS((void)sic_receive(y, budget), DegenerateAlpha);
}

TEST_CASE("sinr summaries match their closed forms") {
    LinkBudget b = unit_noise_budget(0.1, 0.75);
    b.noise_psd = db_to_linear(-174.0);
    const double gain = db_to_linear(-85.0);
    const double n0b = b.noise_psd * b.bandwidth;

    const double strong_expected =
        10.0 * std::log10((0.75 * 0.1 * gain) / ((0.25 * 0.1 * gain) + n0b));
    const double weak_expected = 10.0 * std::log10((0.25 * 0.1 * gain) / n0b);
    CHECK(sinr_strong(b, gain) == doctest::Approx(strong_expected).epsilon(1e-12));
    CHECK(sinr_weak_post_sic(b, gain) == doctest::Approx(weak_expected).epsilon(1e-12));

    // the strong stream saturates at the interference-limited ceiling
    CHECK(sinr_strong(b, gain * 1e6) < 10.0 * std::log10(3.0) + 1e-9);
}

TEST_CASE("received frames carry the channel state used to form them") {
    const LinkBudget budget = unit_noise_budget(1.0, 0.75);
    RandomSource rng(707);
    const ChannelRealization h = draw_channel({-10.0, FadingModel::RayleighBlock}, 8, rng);
    const ReceivedFrame y = transmit(std::vector<double>(8, 1.0), h, budget, rng);
    CHECK(y.channel.coeff == h.coeff);
    CHECK(y.samples.size() == 8);
}
