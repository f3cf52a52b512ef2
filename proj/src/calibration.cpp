#include "cream/calibration.hpp"

#include <stdexcept>

namespace cream {

CalibrationResult calibrate(const LatentMaps& latent, const BinaryMask& cam_fg_mask)
{
    if (cam_fg_mask.height() != latent.fg.height() || cam_fg_mask.width() != latent.fg.width() ||
        !latent.fg.same_shape(latent.bg)) {
        throw std::invalid_argument("calibrate: mask and latent map shapes differ");
    }
    const std::size_t n = cam_fg_mask.count();
    if (n == 0) {
        throw std::invalid_argument("calibrate: CAM foreground mask is empty");
    }

    double sum_fg = 0.0;
    double sum_bg = 0.0;
    for (std::size_t p = 0; p < cam_fg_mask.size(); ++p) {
        if (cam_fg_mask[p]) {
            sum_fg += latent.fg[p];
            sum_bg += latent.bg[p];
        }
    }
    CalibrationResult result;
    result.zbar_fg = sum_fg / static_cast<double>(n);
    result.zbar_bg = sum_bg / static_cast<double>(n);
    result.chose_fg = result.zbar_fg >= result.zbar_bg;
    result.calibrated = result.chose_fg ? latent.fg : latent.bg;
    return result;
}

ActivationMap final_map(const ActivationMap& calibrated, const ActivationMap& cam)
{
    if (!calibrated.same_shape(cam)) {
        throw std::invalid_argument("final_map: shape mismatch");
    }
    return min_max_normalize(add_maps(min_max_normalize(calibrated), min_max_normalize(cam)));
}

} // namespace cream
