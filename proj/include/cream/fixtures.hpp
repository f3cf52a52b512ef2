#pragma once

// Synthetic WSOL datasets in which plain CAM localizes only a
// discriminative part of each object while foreground and background
// features still form separable clusters.
//
// Per class, pixel features are drawn around a few prototypes:
//   part  = s * (sqrt(k) * o + sqrt(1 - k) * p)
//   body  = s * (sqrt(k) * o + sqrt(1 - k) * b)
//   bg_m  = s * g_m                     (one per background mode)
// with o, p, b, g_m orthonormal (rejection-sampled directions with a
// minimum pairwise angle, then Gram-Schmidt). The classifier row for the
// class is the vector in the prototypes' span with response s on the
// part, body_response * s on the body and 0 on every background mode, so
// the CAM peaks on the part and barely registers the rest of the object.

#include "cream/cam.hpp"
#include "cream/em.hpp"
#include "cream/localization.hpp"
#include "cream/maps.hpp"
#include "cream/metrics.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace cream {

struct FeatureDump;

enum class ObjectShape { rectangle, ellipse, mixed };

ObjectShape parse_object_shape(std::string_view name);

struct FixtureSpec {
    int num_classes = 10;
    int dim = 16;
    int height = 28;
    int width = 28;
    ObjectShape shape = ObjectShape::mixed;
    /// Object bounding extents are drawn uniformly from [min_extent, max_extent].
    int min_extent = 10;
    int max_extent = 18;
    /// Fraction of object pixels (topmost rows first) that form the part.
    double part_fraction = 0.25;
    /// Per-pixel isotropic noise; the expected noise norm is this
    /// fraction of the smallest prototype separation.
    double noise = 0.05;
    /// Prototype norm s.
    double feature_scale = 14.0;
    /// Squared weight k of the direction shared by part and body.
    double shared_object = 0.12;
    /// CAM response on body pixels relative to part pixels.
    double body_response = 0.1;
    int background_modes = 2;
    double min_angle_degrees = 60.0;
    /// Feature-grid to image-coordinate scale for exported ground truth.
    int stride = 8;
    std::uint64_t seed = 20220607;

    /// Throws std::invalid_argument on inconsistent fields.
    void validate() const;
};

struct Fixture {
    std::string image_id;
    int label = 0;
    FeatureMap features;
    /// Object mask at feature resolution.
    BinaryMask gt_mask;
    /// Tight box of gt_mask at feature resolution.
    BoundingBox gt_box;
    BinaryMask part_mask;
};

struct FixtureSet {
    ClassifierHead head;
    std::vector<Fixture> fixtures;
};

enum class Split { train, eval };

std::string_view to_string(Split split);

/// per_class images for every class, class-major. Prototypes and head
/// depend only on spec.seed; images depend on (spec.seed, split), so the
/// two splits share one class geometry.
FixtureSet generate(const FixtureSpec& spec, int per_class, Split split = Split::eval);

/// Ground truth in image coordinates (stride-scaled box, nearest-upsampled mask).
GroundTruth ground_truth(const Fixture& fixture, const FixtureSpec& spec);

/// Interchange dump of a fixture set, with ranked predictions from the
/// head's class scores (up to top_k entries).
FeatureDump to_dump(const FixtureSet& set, const FixtureSpec& spec, int top_k = 5);

/// What EM would find if it knew the object mask.
struct OracleClusters {
    std::vector<double> mean_fg;
    std::vector<double> mean_bg;
    /// Mask-fraction weights with the masked means.
    MixtureParams params;
    /// Posterior of every pixel under params.
    LatentMaps bayes_z;
};

/// Throws std::invalid_argument if either side of gt_mask is empty.
OracleClusters oracle_cluster(const FeatureMap& features, const BinaryMask& gt_mask,
                              double sigma = 8.0);

} // namespace cream
