#include "pld/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "pld/rng.hpp"

namespace pld {

namespace {

thread_local EngineBuffers<double> tl_buffers;

void check_congruent(const ModelParams& model, const GradientSet& grads, const char* who) {
    if (grads.weights.size() != model.layers.size() ||
        grads.biases.size() != model.layers.size())
        throw ShapeMismatch(std::string(who) + ": layer count mismatch");
    for (std::size_t i = 0; i < model.layers.size(); ++i)
        if (grads.weights[i].size() != model.layers[i].weights.size() ||
            grads.biases[i].size() != model.layers[i].biases.size())
            throw ShapeMismatch(std::string(who) + ": size mismatch at layer " +
                                std::to_string(i));
}

PredictOutcome outcome_from_logits(const std::vector<double>& logits) {
    PredictOutcome out;
    int best = 0;
    for (int i = 1; i < kNumClasses; ++i)
        if (logits[std::size_t(i)] > logits[std::size_t(best)]) best = i;
    double maxv = logits[std::size_t(best)];
    double sum = 0.0;
    for (int i = 0; i < kNumClasses; ++i) {
        out.logits[std::size_t(i)] = logits[std::size_t(i)];
        sum += std::exp(logits[std::size_t(i)] - maxv);
    }
    out.top_tag = SemanticTag(best);
    out.confidence = 1.0 / sum;  // exp(0) over the sum
    return out;
}

}  // namespace

TrainConfig paper_scale_train_config() {
    TrainConfig cfg;
    cfg.learning_rate = 0.03;
    cfg.schedule = LrSchedule::CosineDecay;
    cfg.warmup_steps = 500;
    cfg.total_steps = 10000;
    cfg.batch_size = 64;
    cfg.gradient_clip_norm = 1.0;
    return cfg;
}

std::vector<LayerSpec> desk_classifier_spec() {
    return {
        gate_spec(0.07, 0.008, 3.0, 3),
        conv_spec(3, 10, 3),  relu_spec(), pool_spec(2),
        conv_spec(10, 20, 3), relu_spec(), pool_spec(2),
        dense_spec(20 * 8 * 8, 64), relu_spec(),
        readout_spec(64, kNumClasses),
    };
}

ModelParams init_model(const std::vector<LayerSpec>& specs, std::uint64_t seed) {
    ModelParams model;
    model.boundaries = infer_boundaries(specs);
    model.layers.reserve(specs.size());
    for (std::size_t i = 0; i < specs.size(); ++i) {
        Layer layer;
        layer.spec = specs[i];
        if (has_params(specs[i].kind)) {
            int fan_in = 0, n_w = 0, n_b = 0;
            if (specs[i].kind == LayerKind::Convolution) {
                fan_in = specs[i].in_channels * specs[i].kernel * specs[i].kernel;
                n_w = specs[i].out_channels * fan_in;
                n_b = specs[i].out_channels;
            } else {
                fan_in = specs[i].in_features;
                n_w = specs[i].out_features * fan_in;
                n_b = specs[i].out_features;
            }
            RandomSource rng(derive_seed(seed, fnv1a64("init-layer"), i));
            const double scale = std::sqrt(2.0 / double(fan_in));
            layer.weights.resize(std::size_t(n_w));
            for (auto& w : layer.weights) w = scale * rng.normal();
            layer.biases.assign(std::size_t(n_b), 0.0);
        }
        model.layers.push_back(std::move(layer));
    }
    return model;
}

std::vector<double> normalize_image(const ImageRecord& image) {
    std::vector<double> values(kImageValues);
    for (int i = 0; i < kImageValues; ++i)
        values[std::size_t(i)] = double(image.data[std::size_t(i)]) / 255.0;
    return values;
}

PredictOutcome forward_values(const ModelParams& model, const std::vector<double>& values) {
    if (values.size() != std::size_t(kImageValues))
        throw ShapeMismatch("forward_values: expected " + std::to_string(kImageValues) +
                            " values");
    engine_forward(model, views_of(model), values.data(), tl_buffers);
    return outcome_from_logits(tl_buffers.acts.back());
}

PredictOutcome forward(const ModelParams& model, const ImageRecord& image) {
    return forward_values(model, normalize_image(image));
}

double loss_crossentropy(const std::array<double, kNumClasses>& logits, SemanticTag label) {
    std::vector<double> l(logits.begin(), logits.end());
    return softmax_cross_entropy<double>(l, int(label), nullptr);
}

GradientSet backward_values(const ModelParams& model, const std::vector<double>& values,
                            SemanticTag label) {
    if (values.size() != std::size_t(kImageValues))
        throw ShapeMismatch("backward_values: expected " + std::to_string(kImageValues) +
                            " values");
    const auto views = views_of(model);
    engine_forward(model, views, values.data(), tl_buffers);
    std::vector<double> dlogits;
    softmax_cross_entropy(tl_buffers.acts.back(), int(label), &dlogits);
    GradientSet grads = GradientSet::zeros_like(model);
    engine_backward<double>(model, views, tl_buffers, dlogits, &grads.weights, &grads.biases,
                    nullptr);
    return grads;
}

GradientSet backward(const ModelParams& model, const ImageRecord& image, SemanticTag label) {
    return backward_values(model, normalize_image(image), label);
}

std::vector<double> grad_wrt_input(const ModelParams& model, const std::vector<double>& values,
                                   SemanticTag label, LossSelector loss) {
    if (values.size() != std::size_t(kImageValues))
        throw ShapeMismatch("grad_wrt_input: expected " + std::to_string(kImageValues) +
                            " values");
    (void)loss;  // CrossEntropy is the only selector
    const auto views = views_of(model);
    engine_forward(model, views, values.data(), tl_buffers);
    std::vector<double> dlogits;
    softmax_cross_entropy(tl_buffers.acts.back(), int(label), &dlogits);
    std::vector<double> dinput;
    engine_backward<double>(model, views, tl_buffers, dlogits, nullptr, nullptr, &dinput);
    return dinput;
}

ModelParams sgd_step(ModelParams model, const GradientSet& grads, double lr) {
    check_congruent(model, grads, "sgd_step");
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        auto& layer = model.layers[l];
        for (std::size_t i = 0; i < layer.weights.size(); ++i)
            layer.weights[i] -= lr * grads.weights[l][i];
        for (std::size_t i = 0; i < layer.biases.size(); ++i)
            layer.biases[i] -= lr * grads.biases[l][i];
    }
    return model;
}

double schedule_lr(int step, const TrainConfig& cfg) {
    if (step < 0 || step > cfg.total_steps)
        throw std::invalid_argument("schedule_lr: step out of range");
    if (cfg.warmup_steps > 0 && step <= cfg.warmup_steps)
        return cfg.learning_rate * double(step) / double(cfg.warmup_steps);
    if (cfg.schedule == LrSchedule::Constant) return cfg.learning_rate;
    const double span = double(cfg.total_steps - cfg.warmup_steps);
    if (span <= 0.0) return 0.0;
    const double progress = double(step - cfg.warmup_steps) / span;
    const double pi = 3.14159265358979323846;
    return cfg.learning_rate * 0.5 * (1.0 + std::cos(pi * progress));
}

namespace {

void flip_random_bits(ImageRecord& img, double rate, RandomSource& rng) {
    if (rate <= 0.0) return;
    const double expected = rate * double(kImageBits);
    const double sigma = std::sqrt(double(kImageBits) * rate * (1.0 - rate));
    const long n = std::lround(expected + sigma * rng.normal());
    for (long f = 0; f < n; ++f) {
        const auto byte = rng.uniform_index(std::uint64_t(kImageValues));
        const auto bit = rng.uniform_index(8);
        img.data[byte] ^= std::uint8_t(1u << bit);
    }
}

double gradient_global_norm(const GradientSet& g) {
    double acc = 0.0;
    for (const auto& layer : g.weights)
        for (double v : layer) acc += v * v;
    for (const auto& layer : g.biases)
        for (double v : layer) acc += v * v;
    return std::sqrt(acc);
}

}  // namespace

TrainResult train(const std::vector<LayerSpec>& specs, const ImageDatabase& dataset,
                  const TrainConfig& cfg) {
    if (cfg.learning_rate <= 0.0) throw std::invalid_argument("train: learning_rate must be > 0");
    if (cfg.warmup_steps > cfg.total_steps)
        throw std::invalid_argument("train: warmup_steps must not exceed total_steps");

    // deterministic split: per class, shuffle indices and hold out every k-th
    std::vector<const ImageRecord*> train_set;
    std::vector<ImageRecord> heldout;
    {
        RandomSource split_rng(derive_seed(cfg.seed, fnv1a64("train-split")));
        for (int k = 0; k < kNumClasses; ++k) {
            const auto& bucket = dataset.classes[std::size_t(k)];
            std::vector<std::size_t> idx(bucket.size());
            for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
            for (std::size_t i = idx.size(); i > 1; --i)
                std::swap(idx[i - 1], idx[split_rng.uniform_index(i)]);
            for (std::size_t i = 0; i < idx.size(); ++i) {
                if (cfg.heldout_every > 0 && i % std::size_t(cfg.heldout_every) == 0)
                    heldout.push_back(bucket[idx[i]]);
                else
                    train_set.push_back(&bucket[idx[i]]);
            }
        }
    }
    if (train_set.empty()) throw std::invalid_argument("train: empty training split");

    ModelParams model = init_model(specs, cfg.seed);
    TrainResult result;
    result.n_train = train_set.size();
    result.n_heldout = heldout.size();

    RandomSource rng(derive_seed(cfg.seed, fnv1a64("train-loop")));
    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::size_t cursor = order.size();  // forces a shuffle before the first batch

    GradientSet acc = GradientSet::zeros_like(model);
    GradientSet sample_grads = GradientSet::zeros_like(model);
    const auto views = views_of(model);  // pointers stay valid: layer storage is never resized
    std::vector<double> dlogits;

    for (int step = 0; step < cfg.total_steps; ++step) {
        for (auto& layer : acc.weights) std::fill(layer.begin(), layer.end(), 0.0);
        for (auto& layer : acc.biases) std::fill(layer.begin(), layer.end(), 0.0);

        for (int s = 0; s < cfg.batch_size; ++s) {
            if (cursor == order.size()) {
                for (std::size_t i = order.size(); i > 1; --i)
                    std::swap(order[i - 1], order[rng.uniform_index(i)]);
                cursor = 0;
            }
            ImageRecord img = *train_set[order[cursor++]];
            if (cfg.augment_max_bitflip > 0.0 && rng.uniform() < 0.5)
                flip_random_bits(img, rng.uniform(0.0, cfg.augment_max_bitflip), rng);

            const std::vector<double> values = normalize_image(img);
            engine_forward(model, views, values.data(), tl_buffers);
            softmax_cross_entropy(tl_buffers.acts.back(), int(img.tag), &dlogits);
            engine_backward<double>(model, views, tl_buffers, dlogits, &sample_grads.weights,
                            &sample_grads.biases, nullptr);
            for (std::size_t l = 0; l < acc.weights.size(); ++l) {
                for (std::size_t i = 0; i < acc.weights[l].size(); ++i)
                    acc.weights[l][i] += sample_grads.weights[l][i];
                for (std::size_t i = 0; i < acc.biases[l].size(); ++i)
                    acc.biases[l][i] += sample_grads.biases[l][i];
            }
        }

        const double inv_batch = 1.0 / double(cfg.batch_size);
        for (auto& layer : acc.weights)
            for (double& v : layer) v *= inv_batch;
        for (auto& layer : acc.biases)
            for (double& v : layer) v *= inv_batch;

        if (cfg.gradient_clip_norm > 0.0) {
            const double norm = gradient_global_norm(acc);
            if (norm > cfg.gradient_clip_norm) {
                const double scale = cfg.gradient_clip_norm / norm;
                for (auto& layer : acc.weights)
                    for (double& v : layer) v *= scale;
                for (auto& layer : acc.biases)
                    for (double& v : layer) v *= scale;
            }
        }

        const double lr = schedule_lr(step + 1, cfg);
        for (std::size_t l = 0; l < model.layers.size(); ++l) {
            auto& layer = model.layers[l];
            for (std::size_t i = 0; i < layer.weights.size(); ++i)
                layer.weights[i] -= lr * acc.weights[l][i];
            for (std::size_t i = 0; i < layer.biases.size(); ++i)
                layer.biases[i] -= lr * acc.biases[l][i];
        }
    }

    result.heldout_accuracy = heldout.empty() ? 0.0 : evaluate_accuracy(model, heldout);
    result.model = std::move(model);
    return result;
}

double evaluate_accuracy(const ModelParams& model, const std::vector<ImageRecord>& images) {
    if (images.empty()) return 0.0;
    std::size_t correct = 0;
    for (const auto& img : images)
        if (forward(model, img).top_tag == img.tag) ++correct;
    return double(correct) / double(images.size());
}

namespace {

constexpr char kModelMagic[8] = {'P', 'L', 'D', 'M', 'D', 'L', '2', '\n'};

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

}  // namespace

void save_model(const ModelParams& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_model: cannot open '" + path + "'");
    out.write(kModelMagic, sizeof(kModelMagic));
    write_pod(out, std::uint32_t(model.layers.size()));
    for (const auto& layer : model.layers) {
        const LayerSpec& s = layer.spec;
        write_pod(out, std::int32_t(s.kind));
        write_pod(out, std::int32_t(s.in_channels));
        write_pod(out, std::int32_t(s.out_channels));
        write_pod(out, std::int32_t(s.kernel));
        write_pod(out, std::int32_t(s.in_features));
        write_pod(out, std::int32_t(s.out_features));
        write_pod(out, std::int32_t(s.window));
        write_pod(out, s.gate_tau);
        write_pod(out, s.gate_slope);
        write_pod(out, s.gate_beta);
    }
    for (const auto& layer : model.layers) {
        write_pod(out, std::uint64_t(layer.weights.size()));
        out.write(reinterpret_cast<const char*>(layer.weights.data()),
                  std::streamsize(layer.weights.size() * sizeof(double)));
        write_pod(out, std::uint64_t(layer.biases.size()));
        out.write(reinterpret_cast<const char*>(layer.biases.data()),
                  std::streamsize(layer.biases.size() * sizeof(double)));
    }
    if (!out) throw IoError("save_model: write failed for '" + path + "'");
}

ModelParams load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_model: cannot open '" + path + "'");
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kModelMagic, sizeof(magic)) != 0)
        throw MalformedRecord("load_model: bad magic in '" + path + "'");
    const auto n_layers = read_pod<std::uint32_t>(in);
    std::vector<LayerSpec> specs(n_layers);
    for (auto& s : specs) {
        s.kind = LayerKind(read_pod<std::int32_t>(in));
        s.in_channels = read_pod<std::int32_t>(in);
        s.out_channels = read_pod<std::int32_t>(in);
        s.kernel = read_pod<std::int32_t>(in);
        s.in_features = read_pod<std::int32_t>(in);
        s.out_features = read_pod<std::int32_t>(in);
        s.window = read_pod<std::int32_t>(in);
        s.gate_tau = read_pod<double>(in);
        s.gate_slope = read_pod<double>(in);
        s.gate_beta = read_pod<double>(in);
    }
    if (!in) throw MalformedRecord("load_model: truncated header in '" + path + "'");

    ModelParams model;
    model.boundaries = infer_boundaries(specs);
    model.layers.resize(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l) {
        model.layers[l].spec = specs[l];
        const auto n_w = read_pod<std::uint64_t>(in);
        model.layers[l].weights.resize(n_w);
        in.read(reinterpret_cast<char*>(model.layers[l].weights.data()),
                std::streamsize(n_w * sizeof(double)));
        const auto n_b = read_pod<std::uint64_t>(in);
        model.layers[l].biases.resize(n_b);
        in.read(reinterpret_cast<char*>(model.layers[l].biases.data()),
                std::streamsize(n_b * sizeof(double)));
    }
    if (!in) throw MalformedRecord("load_model: truncated parameters in '" + path + "'");
    return model;
}

std::uint64_t model_fingerprint(const ModelParams& model) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix_bytes = [&h](const void* p, std::size_t n) {
        const auto* bytes = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 0x100000001b3ull;
        }
    };
    for (const auto& layer : model.layers) {
        const std::int32_t kind = std::int32_t(layer.spec.kind);
        mix_bytes(&kind, sizeof(kind));
        const double gate[3] = {layer.spec.gate_tau, layer.spec.gate_slope,
                                layer.spec.gate_beta};
        mix_bytes(gate, sizeof(gate));
        mix_bytes(layer.weights.data(), layer.weights.size() * sizeof(double));
        mix_bytes(layer.biases.data(), layer.biases.size() * sizeof(double));
    }
    return h;
}

}  // namespace pld
