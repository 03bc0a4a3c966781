#pragma once

#include <string>

#include "pld/phy.hpp"

namespace pld {

// Radio scenario preset: total power, per-receiver mean channel gains, and
// noise parameters. Scenes 1-3 carry the published constants verbatim.
struct SceneConfig {
    double total_power = 0.1;       // watts
    double bob_mean_gain_db = -85.0;
    double eve_mean_gain_db = -95.0;
    double bandwidth = 1e6;         // hertz
    double noise_psd = db_to_linear(-174.0);  // watts/hertz
    double bit_rate = 1e6;          // bits/second
    std::string label = "scene1";
    FadingModel fading = FadingModel::RayleighBlock;

    LinkBudget budget(double alpha, double power_watts) const {
        LinkBudget b;
        b.total_power = power_watts;
        b.alpha = alpha;
        b.bandwidth = bandwidth;
        b.noise_psd = noise_psd;
        b.bit_rate = bit_rate;
        return b;
    }

    ChannelSpec bob_channel() const { return {bob_mean_gain_db, fading}; }
    ChannelSpec eve_channel() const { return {eve_mean_gain_db, fading}; }
};

inline SceneConfig scene_preset(int n) {
    SceneConfig s;
    switch (n) {
        case 1:
            break;  // defaults: 100 mW, Eve at -95 dB
        case 2:
            s.total_power = 0.2;
            s.label = "scene2";
            break;
        case 3:
            s.eve_mean_gain_db = -90.0;
            s.label = "scene3";
            break;
        default:
            throw std::invalid_argument("scene_preset: scenes are numbered 1..3");
    }
    return s;
}

}  // namespace pld
