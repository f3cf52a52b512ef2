#include "cream/pipeline.hpp"

#include <stdexcept>

namespace cream {

Reactivation reactivate(const FeatureMap& features, const ClassifierHead& head,
                        const ContextStore& store, int c, const ReactivationConfig& cfg)
{
    if (store.dim() != features.channels()) {
        throw std::invalid_argument("context store dim does not match feature channels");
    }
    Reactivation out;
    out.cam = compute_cam(features, head, c);
    out.cam_normalized = min_max_normalize(out.cam);
    out.em = run_em(features, store, c, cfg.em);
    if (!out.em) {
        out.final = out.cam_normalized;
        return out;
    }
    const MaskPair masks = cam_guided_masks(out.cam, cfg.delta_fraction);
    out.calibration = calibrate(out.em->latent, masks.fg);
    out.final = final_map(out.calibration->calibrated, out.cam);
    return out;
}

} // namespace cream
