#include "pld/phy.hpp"

#include <cmath>

namespace pld {

void validate_budget(const LinkBudget& budget) {
    if (!(budget.total_power > 0.0))
        throw std::invalid_argument("LinkBudget: total_power must be > 0");
    if (!(budget.alpha > 0.0 && budget.alpha <= 1.0))
        throw std::invalid_argument("LinkBudget: alpha must be in (0, 1]");
    if (!(budget.bandwidth > 0.0))
        throw std::invalid_argument("LinkBudget: bandwidth must be > 0");
    if (!(budget.noise_psd > 0.0))
        throw std::invalid_argument("LinkBudget: noise_psd must be > 0");
    if (!(budget.bit_rate > 0.0))
        throw std::invalid_argument("LinkBudget: bit_rate must be > 0");
}

SymbolFrame bpsk_modulate(const BitVector& bits) {
    if (bits.empty()) throw std::invalid_argument("bpsk_modulate: empty bit vector");
    SymbolFrame frame;
    frame.symbols.resize(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) frame.symbols[i] = bits.get(i) ? -1.0 : 1.0;
    return frame;
}

std::vector<double> superpose(const SymbolFrame& s_i, const SymbolFrame& s_p,
                              const LinkBudget& budget) {
    if (s_i.symbols.size() != s_p.symbols.size())
        throw LengthMismatch("superpose: component frames have different lengths");
    const double a_i = std::sqrt(budget.alpha * budget.total_power);
    const double a_p = std::sqrt((1.0 - budget.alpha) * budget.total_power);
    std::vector<double> out(s_i.symbols.size());
    for (std::size_t k = 0; k < out.size(); ++k)
        out[k] = a_i * s_i.symbols[k] + a_p * s_p.symbols[k];
    return out;
}

ChannelRealization draw_channel(const ChannelSpec& spec, std::size_t n_symbols,
                                RandomSource& rng) {
    const double amplitude = std::sqrt(db_to_linear(spec.mean_gain_db));
    ChannelRealization h;
    auto rayleigh_coeff = [&]() {
        const double scale = amplitude * std::sqrt(0.5);
        return std::complex<double>(scale * rng.normal(), scale * rng.normal());
    };
    switch (spec.fading) {
        case FadingModel::Static:
            h.coeff.assign(1, std::complex<double>(amplitude, 0.0));
            break;
        case FadingModel::RayleighBlock:
            h.coeff.assign(1, rayleigh_coeff());
            break;
        case FadingModel::RayleighPerSymbol:
            h.coeff.resize(n_symbols);
            for (auto& c : h.coeff) c = rayleigh_coeff();
            break;
    }
    return h;
}

ReceivedFrame transmit(const std::vector<double>& samples, const ChannelRealization& h,
                       const LinkBudget& budget, RandomSource& rng) {
    ReceivedFrame out;
    out.channel = h;
    out.samples.resize(samples.size());
    const double sigma = std::sqrt(budget.noise_power() * 0.5);  // per real dimension
    for (std::size_t k = 0; k < samples.size(); ++k) {
        const std::complex<double> noise(sigma * rng.normal(), sigma * rng.normal());
        out.samples[k] = h.at(k) * samples[k] + noise;
    }
    return out;
}

namespace {

// Coherent hard decision on the strong component: sign of Re(y conj(h)).
BitVector stage1_decode(const ReceivedFrame& y) {
    BitVector bits(y.samples.size());
    for (std::size_t k = 0; k < y.samples.size(); ++k) {
        const double metric = (y.samples[k] * std::conj(y.channel.at(k))).real();
        bits.set(k, metric < 0.0);
    }
    return bits;
}

}  // namespace

std::pair<BitVector, BitVector> sic_receive(const ReceivedFrame& y, const LinkBudget& budget) {
    if (budget.alpha >= 1.0)
        throw DegenerateAlpha("sic_receive: alpha = 1 leaves no weak component to decode");
    const BitVector strong = stage1_decode(y);
    const double a_i = std::sqrt(budget.alpha * budget.total_power);
    BitVector weak(y.samples.size());
    for (std::size_t k = 0; k < y.samples.size(); ++k) {
        const std::complex<double>& h = y.channel.at(k);
        const double s_hat = strong.get(k) ? -1.0 : 1.0;
        const std::complex<double> residual = y.samples[k] - h * (a_i * s_hat);
        weak.set(k, (residual * std::conj(h)).real() < 0.0);
    }
    return {strong, weak};
}

BitVector direct_receive(const ReceivedFrame& y, const LinkBudget& budget) {
    (void)budget;  // decision metric needs only the CSI carried by the frame
    return stage1_decode(y);
}

double sinr_strong(const LinkBudget& budget, double gain_linear) {
    const double signal = budget.alpha * budget.total_power * gain_linear;
    const double interference = (1.0 - budget.alpha) * budget.total_power * gain_linear;
    return linear_to_db(signal / (interference + budget.noise_power()));
}

double sinr_weak_post_sic(const LinkBudget& budget, double gain_linear) {
    const double signal = (1.0 - budget.alpha) * budget.total_power * gain_linear;
    return linear_to_db(signal / budget.noise_power());
}

}  // namespace pld
