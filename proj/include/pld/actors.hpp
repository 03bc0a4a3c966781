#pragma once

#include <optional>
#include <string>

#include "pld/classifier.hpp"
#include "pld/phy.hpp"
#include "pld/poisoner.hpp"
#include "pld/scene.hpp"
#include "pld/semantics.hpp"

namespace pld {

enum class SchemeKind : int {
    Venena = 0,       // falsified decoy at alpha, poison mask at 1-alpha
    NveFullPower,     // true image alone at scene power
    NveFixedPower,    // true image alone at a fraction of scene power
    NvePlsBaseline,   // true image alone at an externally calibrated power
};

struct Scheme {
    SchemeKind kind = SchemeKind::Venena;
    double alpha = 0.75;       // venena only; must be in (0, 1)
    double power_scale = 0.75; // nve-fixed-power: fraction of scene power
    double power_watts = -1.0; // nve-pls-baseline: calibrated power, set by the harness

    static Scheme venena(double alpha = 0.75);
    static Scheme nve_full_power();
    static Scheme nve_fixed_power(double scale = 0.75);
    static Scheme nve_pls_baseline(double watts);

    std::string token() const;  // stable identifier used in seeds and CSV
    bool is_venena() const { return kind == SchemeKind::Venena; }

    // Effective link budget under a scene (validates the scheme invariants).
    LinkBudget budget_for(const SceneConfig& scene) const;
};

enum class KnowledgeLevel : int { Full = 0, Partial = 1 };

struct TrialRecord {
    int true_message = 0;
    int falsified_message = -1;  // -1 when the scheme carries no deception content
    int perceived_bob = -1;
    int perceived_eve_full = -1;
    int perceived_eve_partial = -1;
    double bob_gain = 0.0;  // |h|^2 of the block draw
    double eve_gain = 0.0;
    bool tx_success = false;  // transmitter-side classification of the sent content
    std::size_t bob_mask_errors = 0;  // weak-stream bit errors (venena only)
    std::size_t eve_mask_errors = 0;
};

// Shared read-only pipeline state: corpus, mapping, victim model, and the
// poisoned-pair lookup (transmissions poison on the fly when absent).
struct PipelineContext {
    const ImageDatabase* db = nullptr;
    MappingTable table;
    const ModelParams* model = nullptr;
    const PoisonCache* cache = nullptr;
    PoisonConfig poison_cfg;
};

struct Transmission {
    std::vector<double> samples;  // superposed baseband samples
    BitVector strong_bits;        // serialized transmitted image
    BitVector weak_bits;          // serialized poison mask (venena), else empty
    TrialRecord record;           // messages and transmitter-side success prefilled
};

Transmission alice_transmit(Message m, const Scheme& scheme, const PipelineContext& ctx,
                            const LinkBudget& budget, RandomSource& rng);

// Bob: SIC, mask application, image reconstruction, classification.
Message bob_perceive(const ReceivedFrame& y, const Scheme& scheme, const PipelineContext& ctx,
                     const LinkBudget& budget);

// Full knowledge runs Bob's exact pipeline on Eve's frame; partial knowledge
// decodes only the strong component and classifies the decoy.
Message eve_perceive(const ReceivedFrame& y, KnowledgeLevel level, const Scheme& scheme,
                     const PipelineContext& ctx, const LinkBudget& budget);

// One full Monte-Carlo trial: message, transmission, two independent channel
// draws, three perceptions. Fully deterministic in `seed`.
TrialRecord run_trial(std::optional<Message> m, const Scheme& scheme, const SceneConfig& scene,
                      const PipelineContext& ctx, std::uint64_t seed);

}  // namespace pld
