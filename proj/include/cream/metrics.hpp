#pragma once

// WSOL evaluation: box accuracies (GT-Known, Top-k Loc, MaxBoxAccV2,
// per-threshold BoxAcc curves) and pixel average precision.
//
// Maps live at feature resolution; ground truth lives at image
// resolution. Boxes are extracted from the map and brought to image
// coordinates (see EvalGeometry), pixel metrics upsample the map to the
// mask's resolution.

#include "cream/localization.hpp"
#include "cream/maps.hpp"

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cream {

struct GroundTruth {
    std::string image_id;
    int class_label = 0;
    /// Image-coordinate boxes; a prediction matching any of them counts.
    std::vector<BoundingBox> boxes;
    /// Image-resolution foreground mask, when annotated.
    std::optional<BinaryMask> mask;
};

/// Strictly ascending thresholds in [0, 1].
class ThresholdGrid {
public:
    ThresholdGrid() = default;
    /// Throws std::invalid_argument if not strictly ascending within [0, 1].
    explicit ThresholdGrid(std::vector<double> taus);

    /// {0, 0.01, ..., 1}.
    static ThresholdGrid standard();
    /// "start:stop:step" (inclusive of stop) or a comma-separated list.
    static ThresholdGrid parse(std::string_view text);

    const std::vector<double>& taus() const { return taus_; }
    bool empty() const { return taus_.empty(); }

private:
    std::vector<double> taus_;
};

enum class UpsampleMode { nearest, bilinear };

UpsampleMode parse_upsample_mode(std::string_view name);
std::string_view to_string(UpsampleMode mode);

struct EvalGeometry {
    int image_height = 224;
    int image_width = 224;
    UpsampleMode upsample = UpsampleMode::nearest;
    BoxMode box_mode = BoxMode::largest_cc;
};

/// Resamples map to height x width. Nearest uses src = floor(dst * from / to);
/// bilinear samples at pixel centres with edge clamping.
ActivationMap upsample(const ActivationMap& map, int height, int width, UpsampleMode mode);

/// Box for map at tau, in image coordinates.
std::optional<BoundingBox> predict_box(const ActivationMap& map, double tau,
                                       const EvalGeometry& geometry);

/// Largest IoU between box and any ground-truth box; 0 when box is absent.
double best_iou(const std::optional<BoundingBox>& box, const GroundTruth& gt);

using RankedPredictions = std::vector<int>;

/// Fraction of images whose box at tau has IoU >= 0.5 with a GT box.
double gt_known(std::span<const ActivationMap> maps, std::span<const GroundTruth> gts, double tau,
                const EvalGeometry& geometry = {});

/// Fraction of images whose GT class is among the first k predictions and
/// whose box at tau has IoU >= 0.5. Throws std::invalid_argument if a
/// ranked list is shorter than k.
double topk_loc(std::span<const ActivationMap> maps, std::span<const GroundTruth> gts,
                std::span<const RankedPredictions> predictions, int k, double tau,
                const EvalGeometry& geometry = {});

inline constexpr std::array<double, 3> kMaxBoxAccIouLevels{0.3, 0.5, 0.7};

struct MaxBoxAccResult {
    /// Mean of the per-level maxima.
    double score = 0.0;
    std::array<double, 3> per_level{};
    /// First threshold attaining each level's maximum.
    std::array<double, 3> best_tau{};
};

/// For each IoU level, max over the grid of BoxAcc(tau, level); averaged.
/// Throws std::invalid_argument on an empty grid.
MaxBoxAccResult max_box_acc_v2(std::span<const ActivationMap> maps, std::span<const GroundTruth> gts,
                               const ThresholdGrid& grid, const EvalGeometry& geometry = {});

/// Average precision of the pixel scores against the GT masks, pooled
/// over the dataset, with a threshold at every distinct score:
/// sum_n (R_n - R_{n-1}) P_n. Throws std::invalid_argument if a mask is
/// missing or there are no foreground pixels.
double px_ap(std::span<const ActivationMap> maps, std::span<const GroundTruth> gts,
             const EvalGeometry& geometry = {});

using Curve = std::vector<std::pair<double, double>>;

/// (tau, BoxAcc(tau, delta)) for every tau of the grid.
Curve box_acc_curve(std::span<const ActivationMap> maps, std::span<const GroundTruth> gts,
                    const ThresholdGrid& grid, double delta, const EvalGeometry& geometry = {});

struct ImageRecord {
    std::string image_id;
    std::optional<BoundingBox> box;
    double best_iou = 0.0;
    bool gt_known = false;
    std::optional<bool> top1;
    std::optional<bool> top5;
};

struct EvalOptions {
    double tau = 0.2;
    ThresholdGrid grid = ThresholdGrid::standard();
    double curve_delta = 0.5;
    EvalGeometry geometry;
};

struct EvalReport {
    std::size_t images = 0;
    double tau = 0.2;
    double gt_known = 0.0;
    std::optional<double> top1_loc;
    std::optional<double> top5_loc;
    MaxBoxAccResult max_box_acc;
    std::optional<double> px_ap;
    double curve_delta = 0.5;
    Curve curve;
    std::vector<ImageRecord> records;
};

/// Every metric the inputs support: Top-k needs predictions of length
/// >= k for every image, PxAP needs every mask.
EvalReport evaluate(std::span<const ActivationMap> maps, std::span<const GroundTruth> gts,
                    std::span<const RankedPredictions> predictions, const EvalOptions& options);

/// key=value lines; scalars first, then one `image.<n>.*` group per image.
void write_report(std::ostream& out, const EvalReport& report);
/// One "tau accuracy" pair per line.
void write_curve(std::ostream& out, const Curve& curve);

} // namespace cream
