#include "pld/net.hpp"

namespace pld {

std::vector<TensorShape> infer_boundaries(const std::vector<LayerSpec>& specs) {
    if (specs.empty()) throw ShapeMismatch("infer_boundaries: empty layer stack");
    std::vector<TensorShape> bounds;
    bounds.reserve(specs.size() + 1);
    TensorShape cur;
    cur.flat = false;
    cur.channels = kImageChannels;
    cur.side = kImageSide;
    bounds.push_back(cur);
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const LayerSpec& s = specs[i];
        switch (s.kind) {
            case LayerKind::Convolution:
                if (cur.flat)
                    throw ShapeMismatch("layer " + std::to_string(i) +
                                        ": convolution after flatten");
                if (s.in_channels != cur.channels)
                    throw ShapeMismatch("layer " + std::to_string(i) +
                                        ": convolution expects " +
                                        std::to_string(s.in_channels) + " channels, has " +
                                        std::to_string(cur.channels));
                if (s.kernel < 1 || s.kernel % 2 == 0 || s.kernel > cur.side)
                    throw ShapeMismatch("layer " + std::to_string(i) +
                                        ": kernel must be odd and fit the input");
                if (s.out_channels < 1)
                    throw ShapeMismatch("layer " + std::to_string(i) + ": need out channels");
                cur.channels = s.out_channels;
                break;
            case LayerKind::Nonlinearity:
                break;
            case LayerKind::Pooling:
                if (cur.flat)
                    throw ShapeMismatch("layer " + std::to_string(i) +
                                        ": pooling after flatten");
                if (s.window < 1 || cur.side % s.window != 0)
                    throw ShapeMismatch("layer " + std::to_string(i) +
                                        ": pool window must divide side " +
                                        std::to_string(cur.side));
                cur.side /= s.window;
                break;
            case LayerKind::OutlierGate:
                if (cur.flat)
                    throw ShapeMismatch("layer " + std::to_string(i) +
                                        ": outlier gate after flatten");
                if (s.window < 1 || s.gate_slope <= 0.0 || s.gate_beta < 0.0 ||
                    s.gate_tau < 0.0)
                    throw ShapeMismatch("layer " + std::to_string(i) +
                                        ": gate needs window >= 1, slope > 0, tau/beta >= 0");
                break;
            case LayerKind::Dense:
            case LayerKind::SoftmaxReadout: {
                const int have = cur.count();
                if (s.in_features != have)
                    throw ShapeMismatch("layer " + std::to_string(i) + ": dense expects " +
                                        std::to_string(s.in_features) + " inputs, has " +
                                        std::to_string(have));
                if (s.out_features < 1)
                    throw ShapeMismatch("layer " + std::to_string(i) + ": need out features");
                cur.flat = true;
                cur.features = s.out_features;
                cur.channels = 0;
                cur.side = 0;
                break;
            }
        }
        bounds.push_back(cur);
    }
    if (specs.back().kind != LayerKind::SoftmaxReadout || !cur.flat ||
        cur.features != kNumClasses)
        throw ShapeMismatch("infer_boundaries: stack must end in a softmax readout of " +
                            std::to_string(kNumClasses) + " logits");
    return bounds;
}

}  // namespace pld
