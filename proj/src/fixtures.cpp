#include "cream/fixtures.hpp"

#include "cream/io.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace cream {

namespace {

using Vec = std::vector<double>;

double dot(const Vec& a, const Vec& b)
{
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        s += a[k] * b[k];
    }
    return s;
}

void scale_to_unit(Vec& v)
{
    const double n = std::sqrt(dot(v, v));
    for (auto& x : v) {
        x /= n;
    }
}

struct ClassPrototypes {
    Vec part;
    Vec body;
    std::vector<Vec> background;
};

// count orthonormal directions. Candidates are rejection-sampled until
// no pair has |cos| >= max_cos, then Gram-Schmidt'd.
std::vector<Vec> sample_directions(std::mt19937_64& rng, int count, int dim, double max_cos)
{
    std::normal_distribution<double> normal;
    std::vector<Vec> dirs;
    for (;;) {
        dirs.clear();
        for (int n = 0; n < count; ++n) {
            Vec v(static_cast<std::size_t>(dim));
            for (auto& x : v) {
                x = normal(rng);
            }
            scale_to_unit(v);
            dirs.push_back(std::move(v));
        }
        bool ok = true;
        for (int a = 0; a < count && ok; ++a) {
            for (int b = 0; b < a && ok; ++b) {
                ok = std::abs(dot(dirs[a], dirs[b])) < max_cos;
            }
        }
        if (ok) {
            break;
        }
    }
    for (int a = 0; a < count; ++a) {
        for (int b = 0; b < a; ++b) {
            const double proj = dot(dirs[a], dirs[b]);
            for (int k = 0; k < dim; ++k) {
                dirs[a][k] -= proj * dirs[b][k];
            }
        }
        scale_to_unit(dirs[a]);
    }
    return dirs;
}

ClassPrototypes make_prototypes(std::mt19937_64& rng, const FixtureSpec& spec)
{
    const double max_cos = std::cos(spec.min_angle_degrees * std::numbers::pi / 180.0);
    const auto dirs = sample_directions(rng, 3 + spec.background_modes, spec.dim, max_cos);
    const double s = spec.feature_scale;
    const double shared = std::sqrt(spec.shared_object);
    const double own = std::sqrt(1.0 - spec.shared_object);
    ClassPrototypes p;
    p.part.resize(spec.dim);
    p.body.resize(spec.dim);
    for (int k = 0; k < spec.dim; ++k) {
        p.part[k] = s * (shared * dirs[0][k] + own * dirs[1][k]);
        p.body[k] = s * (shared * dirs[0][k] + own * dirs[2][k]);
    }
    for (int m = 0; m < spec.background_modes; ++m) {
        Vec g = dirs[3 + m];
        for (auto& x : g) {
            x *= s;
        }
        p.background.push_back(std::move(g));
    }
    return p;
}

// Minimum-norm classifier row with response s on the part,
// body_response * s on the body and 0 on every background mode.
Vec head_row(const ClassPrototypes& p, const FixtureSpec& spec)
{
    std::vector<const Vec*> basis{&p.part, &p.body};
    for (const auto& g : p.background) {
        basis.push_back(&g);
    }
    const auto n = static_cast<Eigen::Index>(basis.size());
    Eigen::MatrixXd gram(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
        for (Eigen::Index b = 0; b < n; ++b) {
            gram(a, b) = dot(*basis[a], *basis[b]);
        }
    }
    Eigen::VectorXd target = Eigen::VectorXd::Zero(n);
    target(0) = spec.feature_scale;
    target(1) = spec.body_response * spec.feature_scale;
    const Eigen::VectorXd coef = gram.ldlt().solve(target);
    Vec row(static_cast<std::size_t>(spec.dim), 0.0);
    for (Eigen::Index a = 0; a < n; ++a) {
        for (int k = 0; k < spec.dim; ++k) {
            row[k] += coef(a) * (*basis[a])[k];
        }
    }
    return row;
}

std::string make_id(Split split, int c, int i)
{
    std::ostringstream os;
    os << to_string(split) << "_c" << std::setw(2) << std::setfill('0') << c << "_i" << std::setw(4)
       << std::setfill('0') << i;
    return os.str();
}

Fixture make_image(std::mt19937_64& rng, const FixtureSpec& spec, const ClassPrototypes& proto)
{
    const int H = spec.height;
    const int W = spec.width;
    std::uniform_int_distribution<int> extent(spec.min_extent, spec.max_extent);
    const int h = extent(rng);
    const int w = extent(rng);
    const int y0 = std::uniform_int_distribution<int>(0, H - h)(rng);
    const int x0 = std::uniform_int_distribution<int>(0, W - w)(rng);
    bool ellipse = spec.shape == ObjectShape::ellipse;
    if (spec.shape == ObjectShape::mixed) {
        ellipse = std::bernoulli_distribution(0.5)(rng);
    }

    BinaryMask object(H, W);
    const double cy = y0 + (h - 1) / 2.0;
    const double cx = x0 + (w - 1) / 2.0;
    for (int i = 0; i < H; ++i) {
        for (int j = 0; j < W; ++j) {
            bool inside = i >= y0 && i < y0 + h && j >= x0 && j < x0 + w;
            if (ellipse) {
                const double dy = (i - cy) / (h / 2.0);
                const double dx = (j - cx) / (w / 2.0);
                inside = dy * dy + dx * dx <= 1.0;
            }
            object.set(i, j, inside);
        }
    }

    const auto part_pixels =
        static_cast<std::size_t>(std::ceil(spec.part_fraction * static_cast<double>(object.count())));
    BinaryMask part(H, W);
    std::size_t taken = 0;
    for (int i = 0; i < H && taken < part_pixels; ++i) {
        for (int j = 0; j < W && taken < part_pixels; ++j) {
            if (object.at(i, j)) {
                part.set(i, j, true);
                ++taken;
            }
        }
    }

    // Background modes: Voronoi cells of random sites, ties to the lower mode.
    std::uniform_real_distribution<double> ry(0.0, H);
    std::uniform_real_distribution<double> rx(0.0, W);
    std::vector<std::pair<double, double>> sites;
    for (int m = 0; m < spec.background_modes; ++m) {
        const double sy = ry(rng);
        sites.emplace_back(sy, rx(rng));
    }

    const double separation = spec.feature_scale * std::sqrt(2.0 * (1.0 - spec.shared_object));
    const double sd = spec.noise * separation / std::sqrt(static_cast<double>(spec.dim));
    std::normal_distribution<double> noise(0.0, 1.0);

    std::vector<float> values(static_cast<std::size_t>(spec.dim) * H * W);
    for (int i = 0; i < H; ++i) {
        for (int j = 0; j < W; ++j) {
            const Vec* mean = nullptr;
            if (part.at(i, j)) {
                mean = &proto.part;
            } else if (object.at(i, j)) {
                mean = &proto.body;
            } else {
                std::size_t best = 0;
                double best_d = INFINITY;
                for (std::size_t m = 0; m < sites.size(); ++m) {
                    const double d = (i - sites[m].first) * (i - sites[m].first) +
                                     (j - sites[m].second) * (j - sites[m].second);
                    if (d < best_d) {
                        best_d = d;
                        best = m;
                    }
                }
                mean = &proto.background[best];
            }
            for (int k = 0; k < spec.dim; ++k) {
                const double v = (*mean)[k] + (sd > 0.0 ? sd * noise(rng) : 0.0);
                values[(static_cast<std::size_t>(k) * H + i) * W + j] = static_cast<float>(v);
            }
        }
    }

    Fixture f;
    f.features = FeatureMap(spec.dim, H, W, std::move(values));
    f.gt_box = {W, H, 0, 0};
    for (int i = 0; i < H; ++i) {
        for (int j = 0; j < W; ++j) {
            if (object.at(i, j)) {
                f.gt_box = {std::min(f.gt_box.x0, j), std::min(f.gt_box.y0, i),
                            std::max(f.gt_box.x1, j + 1), std::max(f.gt_box.y1, i + 1)};
            }
        }
    }
    f.gt_mask = std::move(object);
    f.part_mask = std::move(part);
    return f;
}

} // namespace

ObjectShape parse_object_shape(std::string_view name)
{
    if (name == "rectangle") {
        return ObjectShape::rectangle;
    }
    if (name == "ellipse") {
        return ObjectShape::ellipse;
    }
    if (name == "mixed") {
        return ObjectShape::mixed;
    }
    throw std::invalid_argument("unknown object shape '" + std::string(name) +
                                "' (expected rectangle, ellipse or mixed)");
}

void FixtureSpec::validate() const
{
    auto require = [](bool ok, const char* what) {
        if (!ok) {
            throw std::invalid_argument(std::string("fixture spec: ") + what);
        }
    };
    require(num_classes >= 1, "num_classes must be positive");
    require(height >= 1 && width >= 1, "grid extents must be positive");
    require(min_extent >= 1 && min_extent <= max_extent, "need 1 <= min_extent <= max_extent");
    require(max_extent <= height && max_extent <= width, "max_extent exceeds the grid");
    require(part_fraction > 0.0 && part_fraction <= 1.0, "part_fraction must be in (0, 1]");
    require(noise >= 0.0 && std::isfinite(noise), "noise must be finite and non-negative");
    require(feature_scale > 0.0 && std::isfinite(feature_scale), "feature_scale must be positive");
    require(shared_object >= 0.0 && shared_object < 1.0, "shared_object must be in [0, 1)");
    require(std::isfinite(body_response), "body_response must be finite");
    require(background_modes >= 1, "background_modes must be positive");
    require(3 + background_modes <= dim, "dim must be at least 3 + background_modes");
    require(min_angle_degrees >= 0.0 && min_angle_degrees < 90.0,
            "min_angle_degrees must be in [0, 90)");
    require(stride >= 1, "stride must be positive");
}

std::string_view to_string(Split split) { return split == Split::train ? "train" : "eval"; }

FixtureSet generate(const FixtureSpec& spec, int per_class, Split split)
{
    spec.validate();
    if (per_class < 0) {
        throw std::invalid_argument("per_class must be non-negative");
    }
    std::mt19937_64 proto_rng(spec.seed);
    std::vector<ClassPrototypes> protos;
    std::vector<float> weights;
    for (int c = 0; c < spec.num_classes; ++c) {
        protos.push_back(make_prototypes(proto_rng, spec));
        for (double v : head_row(protos.back(), spec)) {
            weights.push_back(static_cast<float>(v));
        }
    }

    FixtureSet set{ClassifierHead(spec.num_classes, spec.dim, std::move(weights)), {}};
    std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                      static_cast<std::uint32_t>(split == Split::train ? 1 : 2)};
    std::mt19937_64 rng(seq);
    for (int c = 0; c < spec.num_classes; ++c) {
        for (int i = 0; i < per_class; ++i) {
            Fixture f = make_image(rng, spec, protos[c]);
            f.image_id = make_id(split, c, i);
            f.label = c;
            set.fixtures.push_back(std::move(f));
        }
    }
    return set;
}

GroundTruth ground_truth(const Fixture& fixture, const FixtureSpec& spec)
{
    const int s = spec.stride;
    const int H = fixture.gt_mask.height();
    const int W = fixture.gt_mask.width();
    GroundTruth gt;
    gt.image_id = fixture.image_id;
    gt.class_label = fixture.label;
    gt.boxes.push_back(scale_box(fixture.gt_box, H, W, H * s, W * s));
    BinaryMask mask(H * s, W * s);
    for (int i = 0; i < H * s; ++i) {
        for (int j = 0; j < W * s; ++j) {
            mask.set(i, j, fixture.gt_mask.at(i / s, j / s));
        }
    }
    gt.mask = std::move(mask);
    return gt;
}

FeatureDump to_dump(const FixtureSet& set, const FixtureSpec& spec, int top_k)
{
    FeatureDump dump;
    dump.num_classes = spec.num_classes;
    dump.channels = spec.dim;
    dump.height = spec.height;
    dump.width = spec.width;
    const int k = std::clamp(top_k, 0, spec.num_classes);
    for (const auto& f : set.fixtures) {
        DumpRecord r;
        r.image_id = f.image_id;
        r.label = static_cast<std::uint32_t>(f.label);
        r.features = f.features;
        auto gt = ground_truth(f, spec);
        r.boxes = gt.boxes;
        r.mask = std::move(gt.mask);
        if (k > 0) {
            std::vector<std::uint32_t> ranked;
            for (int c : top_k_classes(class_scores(f.features, set.head), k)) {
                ranked.push_back(static_cast<std::uint32_t>(c));
            }
            r.predictions = std::move(ranked);
        }
        dump.records.push_back(std::move(r));
    }
    return dump;
}

OracleClusters oracle_cluster(const FeatureMap& features, const BinaryMask& gt_mask, double sigma)
{
    if (gt_mask.height() != features.height() || gt_mask.width() != features.width()) {
        throw std::invalid_argument("oracle_cluster: mask and feature shapes differ");
    }
    const std::size_t n_fg = gt_mask.count();
    const std::size_t n = gt_mask.size();
    if (n_fg == 0 || n_fg == n) {
        throw std::invalid_argument("oracle_cluster: mask must have both sides non-empty");
    }
    const int d = features.channels();
    OracleClusters out;
    out.mean_fg.assign(d, 0.0);
    out.mean_bg.assign(d, 0.0);
    for (int k = 0; k < d; ++k) {
        const auto plane = features.channel(k);
        for (std::size_t p = 0; p < n; ++p) {
            (gt_mask[p] ? out.mean_fg : out.mean_bg)[k] += plane[p];
        }
        out.mean_fg[k] /= static_cast<double>(n_fg);
        out.mean_bg[k] /= static_cast<double>(n - n_fg);
    }
    out.params.a_fg = static_cast<double>(n_fg) / static_cast<double>(n);
    out.params.a_bg = 1.0 - out.params.a_fg;
    out.params.v_fg = out.mean_fg;
    out.params.v_bg = out.mean_bg;

    // Two-class posterior as a logistic of the logit difference.
    const double bias = std::log(out.params.a_fg / out.params.a_bg);
    ActivationMap zf(features.height(), features.width());
    ActivationMap zb(features.height(), features.width());
    for (std::size_t p = 0; p < n; ++p) {
        double diff = bias;
        for (int k = 0; k < d; ++k) {
            diff += (out.mean_fg[k] - out.mean_bg[k]) * features.channel(k)[p] / sigma;
        }
        const double fg = diff >= 0 ? 1.0 / (1.0 + std::exp(-diff))
                                    : std::exp(diff) / (1.0 + std::exp(diff));
        zf[p] = fg;
        zb[p] = 1.0 - fg;
    }
    out.bayes_z = {std::move(zf), std::move(zb)};
    return out;
}

} // namespace cream
