#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <utility>
#include <vector>

#include "pld/common.hpp"
#include "pld/rng.hpp"
#include "pld/semantics.hpp"

namespace pld {

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double linear) { return 10.0 * std::log10(linear); }

// Link budget of one transmission: total power split alpha:(1-alpha) between
// the strong (image) and weak (mask) components.
struct LinkBudget {
    double total_power = 0.1;  // watts
    double alpha = 0.75;       // (0, 1]
    double bandwidth = 1e6;    // hertz
    double noise_psd = db_to_linear(-174.0);  // watts/hertz
    double bit_rate = 1e6;     // bits/second (symbol rate: one sample per bit)

    double noise_power() const { return noise_psd * bandwidth; }
};

// Throws invalid_argument unless all physical-positivity constraints hold.
void validate_budget(const LinkBudget& budget);

enum class FadingModel : int { Static = 0, RayleighBlock = 1, RayleighPerSymbol = 2 };

struct ChannelSpec {
    double mean_gain_db = -85.0;  // expected power attenuation
    FadingModel fading = FadingModel::RayleighBlock;
};

// Concrete channel draw: one coefficient per frame (static/block) or per
// symbol.
struct ChannelRealization {
    std::vector<std::complex<double>> coeff;

    const std::complex<double>& at(std::size_t i) const {
        return coeff.size() == 1 ? coeff[0] : coeff[i];
    }
    double block_gain() const { return std::norm(coeff[0]); }
};

// BPSK waveform: unit-power antipodal symbols.
struct SymbolFrame {
    std::vector<double> symbols;
};

struct ReceivedFrame {
    std::vector<std::complex<double>> samples;
    ChannelRealization channel;  // perfect CSI at the receiver
};

// bit 0 -> +1, bit 1 -> -1
SymbolFrame bpsk_modulate(const BitVector& bits);

// sqrt(alpha P) s_i + sqrt((1-alpha) P) s_p, componentwise
std::vector<double> superpose(const SymbolFrame& s_i, const SymbolFrame& s_p,
                              const LinkBudget& budget);

ChannelRealization draw_channel(const ChannelSpec& spec, std::size_t n_symbols,
                                RandomSource& rng);

// y = h s + n, with complex AWGN of per-sample power noise_psd * bandwidth
ReceivedFrame transmit(const std::vector<double>& samples, const ChannelRealization& h,
                       const LinkBudget& budget, RandomSource& rng);

// Stage 1 decodes the strong component treating the weak one as interference;
// stage 2 remodulates the stage-1 decisions, subtracts, and decodes the
// residual. Throws DegenerateAlpha when alpha = 1 (no weak component exists).
std::pair<BitVector, BitVector> sic_receive(const ReceivedFrame& y, const LinkBudget& budget);

// Stage-1 demodulation only.
BitVector direct_receive(const ReceivedFrame& y, const LinkBudget& budget);

// 10 log10( alpha P g / ((1-alpha) P g + N0 B) )
double sinr_strong(const LinkBudget& budget, double gain_linear);

// 10 log10( (1-alpha) P g / (N0 B) ); -inf as alpha -> 1
double sinr_weak_post_sic(const LinkBudget& budget, double gain_linear);

}  // namespace pld
