#pragma once

#include "cream/em.hpp"
#include "cream/maps.hpp"

namespace cream {

/// Polarity decision for the EM posteriors.
struct CalibrationResult {
    bool chose_fg = true;
    /// Mean of z_fg / z_bg over the CAM foreground pixels.
    double zbar_fg = 0.0;
    double zbar_bg = 0.0;
    /// z_fg if chose_fg, else z_bg.
    ActivationMap calibrated;
};

/// Picks whichever posterior map has the larger average over the CAM
/// foreground; ties go to z_fg. Throws std::invalid_argument if the mask
/// is empty or its shape differs from the latent maps.
CalibrationResult calibrate(const LatentMaps& latent, const BinaryMask& cam_fg_mask);

/// normalize(normalize(calibrated) + normalize(cam)).
ActivationMap final_map(const ActivationMap& calibrated, const ActivationMap& cam);

} // namespace cream
