#include "cream/metrics.hpp"

#include "cream/format.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace cream {

namespace {

void check_aligned(std::span<const ActivationMap> maps, std::span<const GroundTruth> gts)
{
    if (maps.size() != gts.size()) {
        throw std::invalid_argument("got " + std::to_string(maps.size()) + " maps for " +
                                    std::to_string(gts.size()) + " ground-truth records");
    }
    if (gts.empty()) {
        throw std::invalid_argument("evaluation needs at least one image");
    }
}

double parse_double(std::string_view text)
{
    double value = 0.0;
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    while (first != last && *first == ' ') {
        ++first;
    }
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) {
        throw std::invalid_argument("not a number: '" + std::string(text) + "'");
    }
    return value;
}

// Best IoU per (tau, image), the common input of every box metric.
std::vector<std::vector<double>> iou_table(std::span<const ActivationMap> maps,
                                           std::span<const GroundTruth> gts,
                                           const ThresholdGrid& grid, const EvalGeometry& geometry)
{
    const auto& taus = grid.taus();
    std::vector<std::vector<double>> table(taus.size(), std::vector<double>(maps.size(), 0.0));
    for (std::size_t n = 0; n < maps.size(); ++n) {
        if (geometry.upsample == UpsampleMode::bilinear) {
            // Boxes come from the upsampled map, so resample once per image.
            const ActivationMap big =
                upsample(maps[n], geometry.image_height, geometry.image_width, geometry.upsample);
            for (std::size_t t = 0; t < taus.size(); ++t) {
                table[t][n] = best_iou(extract_box(big, taus[t], geometry.box_mode), gts[n]);
            }
        } else {
            for (std::size_t t = 0; t < taus.size(); ++t) {
                table[t][n] = best_iou(predict_box(maps[n], taus[t], geometry), gts[n]);
            }
        }
    }
    return table;
}

double fraction_at_least(const std::vector<double>& ious, double level)
{
    const auto hits = std::count_if(ious.begin(), ious.end(), [&](double v) { return v >= level; });
    return static_cast<double>(hits) / static_cast<double>(ious.size());
}

} // namespace

ThresholdGrid::ThresholdGrid(std::vector<double> taus) : taus_(std::move(taus))
{
    for (std::size_t t = 0; t < taus_.size(); ++t) {
        if (!(taus_[t] >= 0.0 && taus_[t] <= 1.0)) {
            throw std::invalid_argument("threshold " + format_real(taus_[t]) + " outside [0, 1]");
        }
        if (t > 0 && !(taus_[t] > taus_[t - 1])) {
            throw std::invalid_argument("threshold grid must be strictly ascending");
        }
    }
}

ThresholdGrid ThresholdGrid::standard()
{
    std::vector<double> taus(101);
    for (int i = 0; i <= 100; ++i) {
        taus[i] = i / 100.0;
    }
    return ThresholdGrid(std::move(taus));
}

ThresholdGrid ThresholdGrid::parse(std::string_view text)
{
    if (text.find(':') != std::string_view::npos) {
        const auto c1 = text.find(':');
        const auto c2 = text.find(':', c1 + 1);
        if (c2 == std::string_view::npos) {
            throw std::invalid_argument("threshold range must be start:stop:step");
        }
        const double start = parse_double(text.substr(0, c1));
        const double stop = parse_double(text.substr(c1 + 1, c2 - c1 - 1));
        const double step = parse_double(text.substr(c2 + 1));
        if (!(step > 0.0) || stop < start) {
            throw std::invalid_argument("threshold range needs step > 0 and stop >= start");
        }
        const auto count = static_cast<long>(std::floor((stop - start) / step + 1e-9));
        std::vector<double> taus;
        for (long i = 0; i <= count; ++i) {
            taus.push_back(std::round((start + static_cast<double>(i) * step) * 1e12) / 1e12);
        }
        return ThresholdGrid(std::move(taus));
    }
    std::vector<double> taus;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto comma = std::min(text.find(',', pos), text.size());
        taus.push_back(parse_double(text.substr(pos, comma - pos)));
        pos = comma + 1;
    }
    return ThresholdGrid(std::move(taus));
}

UpsampleMode parse_upsample_mode(std::string_view name)
{
    if (name == "nearest") {
        return UpsampleMode::nearest;
    }
    if (name == "bilinear") {
        return UpsampleMode::bilinear;
    }
    throw std::invalid_argument("unknown upsample mode '" + std::string(name) +
                                "' (expected nearest or bilinear)");
}

std::string_view to_string(UpsampleMode mode)
{
    return mode == UpsampleMode::nearest ? "nearest" : "bilinear";
}

ActivationMap upsample(const ActivationMap& map, int height, int width, UpsampleMode mode)
{
    if (height < 1 || width < 1) {
        throw std::invalid_argument("upsample target must be positive");
    }
    const int h = map.height();
    const int w = map.width();
    ActivationMap out(height, width);
    if (mode == UpsampleMode::nearest) {
        for (int y = 0; y < height; ++y) {
            const int sy = static_cast<int>(static_cast<long long>(y) * h / height);
            for (int x = 0; x < width; ++x) {
                const int sx = static_cast<int>(static_cast<long long>(x) * w / width);
                out.at(y, x) = map.at(sy, sx);
            }
        }
        return out;
    }
    auto source = [](int dst, int from, int to, int& lo, int& hi, double& frac) {
        double s = (dst + 0.5) * from / to - 0.5;
        s = std::clamp(s, 0.0, static_cast<double>(from - 1));
        lo = static_cast<int>(std::floor(s));
        hi = std::min(lo + 1, from - 1);
        frac = s - lo;
    };
    for (int y = 0; y < height; ++y) {
        int y0 = 0, y1 = 0;
        double fy = 0.0;
        source(y, h, height, y0, y1, fy);
        for (int x = 0; x < width; ++x) {
            int x0 = 0, x1 = 0;
            double fx = 0.0;
            source(x, w, width, x0, x1, fx);
            const double top = map.at(y0, x0) * (1.0 - fx) + map.at(y0, x1) * fx;
            const double bottom = map.at(y1, x0) * (1.0 - fx) + map.at(y1, x1) * fx;
            out.at(y, x) = top * (1.0 - fy) + bottom * fy;
        }
    }
    return out;
}

std::optional<BoundingBox> predict_box(const ActivationMap& map, double tau,
                                       const EvalGeometry& geometry)
{
    if (geometry.upsample == UpsampleMode::bilinear) {
        return extract_box(
            upsample(map, geometry.image_height, geometry.image_width, geometry.upsample), tau,
            geometry.box_mode);
    }
    // Nearest upsampling replicates pixels into blocks, which maps
    // components and their tight boxes one-to-one, so boxing at feature
    // resolution and scaling is exact.
    const auto box = extract_box(map, tau, geometry.box_mode);
    if (!box) {
        return std::nullopt;
    }
    return scale_box(*box, map.height(), map.width(), geometry.image_height, geometry.image_width);
}

double best_iou(const std::optional<BoundingBox>& box, const GroundTruth& gt)
{
    if (!box) {
        return 0.0;
    }
    double best = 0.0;
    for (const auto& g : gt.boxes) {
        best = std::max(best, iou(*box, g));
    }
    return best;
}

double gt_known(std::span<const ActivationMap> maps, std::span<const GroundTruth> gts, double tau,
                const EvalGeometry& geometry)
{
    check_aligned(maps, gts);
    std::size_t hits = 0;
    for (std::size_t n = 0; n < maps.size(); ++n) {
        if (best_iou(predict_box(maps[n], tau, geometry), gts[n]) >= 0.5) {
            ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(maps.size());
}

double topk_loc(std::span<const ActivationMap> maps, std::span<const GroundTruth> gts,
                std::span<const RankedPredictions> predictions, int k, double tau,
                const EvalGeometry& geometry)
{
    check_aligned(maps, gts);
    if (predictions.size() != gts.size()) {
        throw std::invalid_argument("prediction lists are not aligned with ground truth");
    }
    if (k < 1) {
        throw std::invalid_argument("k must be positive");
    }
    std::size_t hits = 0;
    for (std::size_t n = 0; n < maps.size(); ++n) {
        if (predictions[n].size() < static_cast<std::size_t>(k)) {
            throw std::invalid_argument("ranked predictions for '" + gts[n].image_id +
                                        "' are shorter than k=" + std::to_string(k));
        }
        const auto first = predictions[n].begin();
        const bool class_ok = std::find(first, first + k, gts[n].class_label) != first + k;
        if (class_ok && best_iou(predict_box(maps[n], tau, geometry), gts[n]) >= 0.5) {
            ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(maps.size());
}

MaxBoxAccResult max_box_acc_v2(std::span<const ActivationMap> maps, std::span<const GroundTruth> gts,
                               const ThresholdGrid& grid, const EvalGeometry& geometry)
{
    check_aligned(maps, gts);
    if (grid.empty()) {
        throw std::invalid_argument("max_box_acc_v2 needs a non-empty threshold grid");
    }
    for (const auto& gt : gts) {
        if (gt.boxes.empty()) {
            throw std::invalid_argument("image '" + gt.image_id + "' has no ground-truth box");
        }
    }
    const auto table = iou_table(maps, gts, grid, geometry);
    MaxBoxAccResult result;
    for (std::size_t l = 0; l < kMaxBoxAccIouLevels.size(); ++l) {
        double best = -1.0;
        for (std::size_t t = 0; t < table.size(); ++t) {
            const double acc = fraction_at_least(table[t], kMaxBoxAccIouLevels[l]);
            if (acc > best) {
                best = acc;
                result.best_tau[l] = grid.taus()[t];
            }
        }
        result.per_level[l] = best;
    }
    result.score = (result.per_level[0] + result.per_level[1] + result.per_level[2]) / 3.0;
    return result;
}

double px_ap(std::span<const ActivationMap> maps, std::span<const GroundTruth> gts,
             const EvalGeometry& geometry)
{
    check_aligned(maps, gts);

    struct Bin {
        double score;
        std::size_t positives;
        std::size_t negatives;
    };
    std::vector<Bin> bins;
    std::size_t total_positive = 0;

    for (std::size_t n = 0; n < maps.size(); ++n) {
        if (!gts[n].mask) {
            throw std::invalid_argument("image '" + gts[n].image_id + "' has no ground-truth mask");
        }
        const BinaryMask& mask = *gts[n].mask;
        const ActivationMap& map = maps[n];
        const int mh = mask.height();
        const int mw = mask.width();
        if (geometry.upsample == UpsampleMode::nearest) {
            // Every mask pixel inherits its source pixel's score, so count
            // labels per source pixel instead of materialising the upsampled map.
            std::vector<Bin> local(map.size());
            for (std::size_t p = 0; p < map.size(); ++p) {
                local[p] = {map[p], 0, 0};
            }
            for (int y = 0; y < mh; ++y) {
                const int sy = static_cast<int>(static_cast<long long>(y) * map.height() / mh);
                for (int x = 0; x < mw; ++x) {
                    const int sx = static_cast<int>(static_cast<long long>(x) * map.width() / mw);
                    Bin& bin = local[static_cast<std::size_t>(sy) * map.width() + sx];
                    (mask.at(y, x) ? bin.positives : bin.negatives) += 1;
                }
            }
            for (const auto& bin : local) {
                if (bin.positives + bin.negatives > 0) {
                    bins.push_back(bin);
                }
            }
        } else {
            const ActivationMap big = upsample(map, mh, mw, geometry.upsample);
            for (std::size_t p = 0; p < big.size(); ++p) {
                bins.push_back({big[p], mask[p] ? 1u : 0u, mask[p] ? 0u : 1u});
            }
        }
        total_positive += mask.count();
    }
    if (total_positive == 0) {
        throw std::invalid_argument("px_ap: ground-truth masks contain no foreground pixel");
    }

    std::sort(bins.begin(), bins.end(), [](const Bin& a, const Bin& b) { return a.score > b.score; });
    // Recall steps are whole positives, so sum (new positives x precision)
    // and divide by the positive count once. The sum is carried as an
    // unevaluated hi + lo pair so small worked cases come out correctly rounded.
    double hi = 0.0;
    double lo = 0.0;
    std::size_t tp = 0;
    std::size_t fp = 0;
    for (std::size_t i = 0; i < bins.size();) {
        const double score = bins[i].score;
        const std::size_t before = tp;
        for (; i < bins.size() && bins[i].score == score; ++i) {
            tp += bins[i].positives;
            fp += bins[i].negatives;
        }
        if (tp > before) {
            const double num = static_cast<double>(tp - before) * static_cast<double>(tp);
            const double den = static_cast<double>(tp + fp);
            const double q = num / den;
            const double q_err = std::fma(-q, den, num) / den;
            const double sum = hi + q;
            const double bv = sum - hi;
            lo += (hi - (sum - bv)) + (q - bv) + q_err;
            hi = sum;
        }
    }
    const double p = static_cast<double>(total_positive);
    const double r = hi / p;
    return r + (std::fma(-r, p, hi) + lo) / p;
}

Curve box_acc_curve(std::span<const ActivationMap> maps, std::span<const GroundTruth> gts,
                    const ThresholdGrid& grid, double delta, const EvalGeometry& geometry)
{
    Curve curve;
    if (grid.empty()) {
        return curve;
    }
    check_aligned(maps, gts);
    const auto table = iou_table(maps, gts, grid, geometry);
    for (std::size_t t = 0; t < table.size(); ++t) {
        curve.emplace_back(grid.taus()[t], fraction_at_least(table[t], delta));
    }
    return curve;
}

EvalReport evaluate(std::span<const ActivationMap> maps, std::span<const GroundTruth> gts,
                    std::span<const RankedPredictions> predictions, const EvalOptions& options)
{
    check_aligned(maps, gts);
    EvalReport report;
    report.images = maps.size();
    report.tau = options.tau;
    report.curve_delta = options.curve_delta;

    const bool have_predictions = predictions.size() == gts.size();
    auto predicted_within = [&](std::size_t n, std::size_t k) {
        const auto& ranked = predictions[n];
        const auto last = ranked.begin() + static_cast<std::ptrdiff_t>(std::min(k, ranked.size()));
        return std::find(ranked.begin(), last, gts[n].class_label) != last;
    };
    auto all_have = [&](std::size_t k) {
        return have_predictions && std::all_of(predictions.begin(), predictions.end(),
                                               [&](const auto& r) { return r.size() >= k; });
    };
    const bool top1 = all_have(1);
    const bool top5 = all_have(5);

    std::size_t known = 0, top1_hits = 0, top5_hits = 0;
    for (std::size_t n = 0; n < maps.size(); ++n) {
        ImageRecord record;
        record.image_id = gts[n].image_id;
        record.box = predict_box(maps[n], options.tau, options.geometry);
        record.best_iou = best_iou(record.box, gts[n]);
        record.gt_known = record.best_iou >= 0.5;
        known += record.gt_known;
        if (top1) {
            record.top1 = record.gt_known && predicted_within(n, 1);
            top1_hits += *record.top1;
        }
        if (top5) {
            record.top5 = record.gt_known && predicted_within(n, 5);
            top5_hits += *record.top5;
        }
        report.records.push_back(std::move(record));
    }
    const double count = static_cast<double>(maps.size());
    report.gt_known = static_cast<double>(known) / count;
    if (top1) {
        report.top1_loc = static_cast<double>(top1_hits) / count;
    }
    if (top5) {
        report.top5_loc = static_cast<double>(top5_hits) / count;
    }
    report.max_box_acc = max_box_acc_v2(maps, gts, options.grid, options.geometry);
    report.curve = box_acc_curve(maps, gts, options.grid, options.curve_delta, options.geometry);
    if (std::all_of(gts.begin(), gts.end(), [](const GroundTruth& g) { return g.mask.has_value(); })) {
        report.px_ap = px_ap(maps, gts, options.geometry);
    }
    return report;
}

void write_report(std::ostream& out, const EvalReport& report)
{
    out << "images=" << report.images << '\n';
    out << "tau=" << format_real(report.tau) << '\n';
    out << "gt_known=" << format_real(report.gt_known) << '\n';
    if (report.top1_loc) {
        out << "top1_loc=" << format_real(*report.top1_loc) << '\n';
    }
    if (report.top5_loc) {
        out << "top5_loc=" << format_real(*report.top5_loc) << '\n';
    }
    out << "max_box_acc_v2=" << format_real(report.max_box_acc.score) << '\n';
    for (std::size_t l = 0; l < kMaxBoxAccIouLevels.size(); ++l) {
        const std::string level = format_real(kMaxBoxAccIouLevels[l]);
        out << "max_box_acc_v2.iou_" << level << '=' << format_real(report.max_box_acc.per_level[l])
            << '\n';
        out << "max_box_acc_v2.iou_" << level
            << ".best_tau=" << format_real(report.max_box_acc.best_tau[l]) << '\n';
    }
    if (report.px_ap) {
        out << "px_ap=" << format_real(*report.px_ap) << '\n';
    }
    out << "curve_delta=" << format_real(report.curve_delta) << '\n';
    for (std::size_t n = 0; n < report.records.size(); ++n) {
        const auto& r = report.records[n];
        const std::string key = "image." + std::to_string(n) + '.';
        out << key << "id=" << r.image_id << '\n';
        if (r.box) {
            out << key << "box=" << r.box->x0 << ',' << r.box->y0 << ',' << r.box->x1 << ','
                << r.box->y1 << '\n';
        } else {
            out << key << "box=none\n";
        }
        out << key << "best_iou=" << format_real(r.best_iou) << '\n';
        out << key << "gt_known=" << (r.gt_known ? 1 : 0) << '\n';
        if (r.top1) {
            out << key << "top1=" << (*r.top1 ? 1 : 0) << '\n';
        }
        if (r.top5) {
            out << key << "top5=" << (*r.top5 ? 1 : 0) << '\n';
        }
    }
}

void write_curve(std::ostream& out, const Curve& curve)
{
    for (const auto& [tau, acc] : curve) {
        out << format_real(tau) << ' ' << format_real(acc) << '\n';
    }
}

} // namespace cream
