#pragma once

// End-to-end per-image re-activation: CAM -> EM from the learned
// embeddings -> polarity calibration -> fusion with the CAM.

#include "cream/calibration.hpp"
#include "cream/cam.hpp"
#include "cream/context.hpp"
#include "cream/em.hpp"

#include <optional>

namespace cream {

struct ReactivationConfig {
    EmConfig em;
    /// CAM foreground threshold for calibration, as a fraction of the
    /// normalized CAM's max.
    double delta_fraction = 0.2;
};

struct Reactivation {
    /// Raw signed CAM of the requested class.
    ActivationMap cam;
    /// Min-max normalized CAM.
    ActivationMap cam_normalized;
    /// Absent when EM was disabled (zero iterations).
    std::optional<EmResult> em;
    std::optional<CalibrationResult> calibration;
    /// Normalized re-activation map; the normalized CAM when EM is disabled.
    ActivationMap final;
};

Reactivation reactivate(const FeatureMap& features, const ClassifierHead& head,
                        const ContextStore& store, int c, const ReactivationConfig& cfg = {});

} // namespace cream
