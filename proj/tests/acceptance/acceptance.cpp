// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
// and exits non-zero if any fails.

#include "cream/batch.hpp"
#include "cream/cli.hpp"
#include "cream/fixtures.hpp"
#include "cream/io.hpp"
#include "cream/suite.hpp"

#include "oracles.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>

using namespace cream;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// The default suite, learned embeddings and helpers to score it.
struct Suite {
    FixtureSpec spec = suite::default_spec();
    FeatureDump train;
    FeatureDump eval;
    ClassifierHead head;
    EvalGeometry geometry;

    Suite()
    {
        const auto t = generate(spec, suite::kPerClass, Split::train);
        const auto e = generate(spec, suite::kPerClass, Split::eval);
        train = to_dump(t, spec);
        eval = to_dump(e, spec);
        head = e.head;
        geometry = resolve_geometry(eval, std::nullopt, spec.stride, UpsampleMode::nearest, BoxMode::largest_cc);
    }

    ContextStore store(float lambda) const { return learn_embeddings(train, head, suite::kStoreSeed, lambda); }

    MapSet maps(const ContextStore& st, int iterations) const
    {
        ReactivationConfig rc;
        rc.em.iterations = iterations;
        return reactivate_dump(eval, head, st, rc, ClassPolicy::gt, 4);
    }

    EvalReport report(const MapSet& m, const ThresholdGrid& grid = ThresholdGrid::standard()) const
    {
        EvalOptions opts;
        opts.grid = grid;
        opts.geometry = geometry;
        return evaluate_maps(m, eval, opts);
    }
};

const Suite& the_suite()
{
    static const Suite s;
    return s;
}

Outcome em_correctness()
{
    const auto t0 = Clock::now();
    const auto& s = the_suite();
    auto spec = s.spec;
    spec.seed += 1;
    const auto set = generate(spec, 10);
    const auto store = s.store(suite::kLambda);
    EmConfig cfg;
    cfg.iterations = 4;
    cfg.record_trace = true;
    double worst_drop = 0, worst_sum = 0;
    int violations = 0, n = 0;
    for (const auto& fx : set.fixtures) {
        ++n;
        const auto em = run_em(fx.features, store, fx.label, cfg);
        for (std::size_t t = 1; t < em->trace.size(); ++t) {
            const double rel = (em->trace[t] - em->trace[t - 1]) / std::max(1.0, std::abs(em->trace[t - 1]));
            worst_drop = std::min(worst_drop, rel);
            violations += rel < -1e-6;
        }
        // Re-walk the iterations to check normalization at every step.
        MixtureParams p{cfg.a_init, 1.0 - cfg.a_init,
                        std::vector<double>(store.fg(fx.label).begin(), store.fg(fx.label).end()),
                        std::vector<double>(store.bg(fx.label).begin(), store.bg(fx.label).end())};
        for (int it = 0; it < cfg.iterations; ++it) {
            const auto z = e_step(fx.features, p, cfg.sigma);
            for (std::size_t q = 0; q < z.fg.size(); ++q) {
                worst_sum = std::max(worst_sum, std::abs(z.fg[q] + z.bg[q] - 1.0));
            }
            p = m_step(fx.features, z, p);
            worst_sum = std::max(worst_sum, std::abs(p.a_fg + p.a_bg - 1.0));
        }
    }
    const double secs = seconds_since(t0);
    return {violations == 0 && worst_sum <= 1e-6 && secs < 10.0,
            fmt("%d fixtures, T=4: %d log-likelihood drops beyond -1e-6 (worst relative change %.3g), "
                "max |sum-1| %.2g, %.2fs",
                n, violations, worst_drop, worst_sum, secs)};
}

Outcome oracle_equivalence()
{
    const auto t0 = Clock::now();
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> dim(1, 8);
    std::uniform_real_distribution<double> weight(0.05, 0.95);
    double worst = 0;
    int instances = 0;
    for (int g = 2; g <= 8; ++g) {
        for (int k = 0; k < 50; ++k, ++instances) {
            const int d = dim(rng);
            const auto f = oracle::random_features(rng, d, g, g, 2.0);
            MixtureParams p;
            p.a_fg = weight(rng);
            p.a_bg = 1.0 - p.a_fg;
            p.v_fg = oracle::random_vector(rng, d, 2.0);
            p.v_bg = oracle::random_vector(rng, d, 2.0);
            const auto t = oracle::tensor_of(f);
            const auto z = e_step(f, p, 8.0);
            const auto ze = oracle::e_step(t, p.a_fg, p.v_fg, p.a_bg, p.v_bg, 8.0);
            for (int i = 0; i < g; ++i) {
                for (int j = 0; j < g; ++j) {
                    worst = std::max({worst, std::abs(z.fg.at(i, j) - ze.fg[i][j]),
                                      std::abs(z.bg.at(i, j) - ze.bg[i][j])});
                }
            }
            const auto m = m_step(f, z, p);
            const auto me = oracle::m_step(t, {oracle::grid_of(z.fg), oracle::grid_of(z.bg)});
            worst = std::max({worst, std::abs(m.a_fg - me.a_fg), std::abs(m.a_bg - me.a_bg)});
            for (int c = 0; c < d; ++c) {
                worst = std::max({worst, std::abs(m.v_fg[c] - me.v_fg[c]), std::abs(m.v_bg[c] - me.v_bg[c])});
            }
        }
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-6 && secs < 5.0,
            fmt("%d instances on 2x2..8x8 grids, max deviation %.2g, %.2fs", instances, worst, secs)};
}

Outcome gap_identity()
{
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> size(1, 12), dim(1, 32), classes(1, 10);
    double worst = 0;
    for (int pair = 0; pair < 100; ++pair) {
        const int d = dim(rng), h = size(rng), w = size(rng), c = classes(rng);
        const auto f = oracle::random_features(rng, d, h, w);
        const auto head = oracle::random_head(rng, c, d, pair % 2 == 0);
        const auto scores = class_scores(f, head);
        for (int k = 0; k < c; ++k) {
            const auto cam = compute_cam(f, head, k);
            double sum = 0;
            for (double v : cam.values()) {
                sum += v;
            }
            const double bias = head.bias() ? (*head.bias())[k] : 0.0;
            worst = std::max(worst, std::abs(sum - (scores[k] - bias) * h * w));
        }
    }
    return {worst <= 1e-5, fmt("100 random (F, head) pairs, max |sum(CAM) - (S - b)hw| = %.2g", worst)};
}

struct SuiteRuns {
    double cam, t1, t2, t4, lambda_one;
    Curve cam_curve, cream_curve;
    double seconds;
};

const SuiteRuns& suite_runs()
{
    static const SuiteRuns runs = [] {
        const auto t0 = Clock::now();
        const auto& s = the_suite();
        const auto store = s.store(suite::kLambda);
        const auto frozen = s.store(1.0f);
        const auto curve_grid = ThresholdGrid::parse("0.1:0.5:0.01");
        SuiteRuns r{};
        const auto cam = s.report(s.maps(store, 0), curve_grid);
        const auto t2 = s.report(s.maps(store, 2), curve_grid);
        r.cam = cam.gt_known;
        r.t2 = t2.gt_known;
        r.cam_curve = cam.curve;
        r.cream_curve = t2.curve;
        r.t1 = s.report(s.maps(store, 1)).gt_known;
        r.t4 = s.report(s.maps(store, 4)).gt_known;
        r.lambda_one = s.report(s.maps(frozen, 2)).gt_known;
        r.seconds = seconds_since(t0);
        return r;
    }();
    return runs;
}

Outcome incomplete_localization()
{
    const auto& r = suite_runs();
    return {r.cam < 0.5 && r.t2 > 0.9 && r.seconds < 60.0,
            fmt("GT-Known at tau=0.2: CAM %.3f, CREAM %.3f (all suite runs %.1fs)", r.cam, r.t2, r.seconds)};
}

Outcome iteration_ordering()
{
    const auto& r = suite_runs();
    return {r.t2 > r.t1 && r.t1 > r.cam,
            fmt("GT-Known T=0 %.3f, T=1 %.3f, T=2 %.3f (T=4 %.3f, not gated)", r.cam, r.t1, r.t2, r.t4)};
}

Outcome momentum_gap()
{
    const auto& r = suite_runs();
    return {r.t2 - r.lambda_one >= 0.1,
            fmt("GT-Known lambda=0.8 %.3f, lambda=1.0 %.3f", r.t2, r.lambda_one)};
}

double variance(const Curve& c)
{
    double mean = 0, sq = 0;
    for (const auto& [tau, acc] : c) {
        mean += acc;
    }
    mean /= double(c.size());
    for (const auto& [tau, acc] : c) {
        sq += (acc - mean) * (acc - mean);
    }
    return sq / double(c.size());
}

Outcome threshold_robustness()
{
    const auto& r = suite_runs();
    const double vc = variance(r.cam_curve), vr = variance(r.cream_curve);
    return {r.cream_curve.size() == 41 && vr < vc,
            fmt("variance of BoxAcc(tau, 0.5) over tau in [0.1, 0.5]: CAM %.4g, CREAM %.4g", vc, vr)};
}

Outcome metric_examples()
{
    EvalGeometry g2;
    g2.image_height = g2.image_width = 2;
    const std::vector<ActivationMap> scores{ActivationMap(2, 2, {0.9, 0.8, 0.2, 0.1})};
    const std::vector<GroundTruth> gts{
        {"a", 0, {{0, 0, 1, 2}}, BinaryMask(2, 2, std::vector<std::uint8_t>{1, 0, 1, 0})}};
    const double ap = px_ap(scores, gts, g2);

    EvalGeometry g20;
    g20.image_height = g20.image_width = 20;
    ActivationMap m(20, 20, 0.0);
    for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 10; ++j) {
            m.at(i, j) = 1.0;
        }
    }
    const std::vector<ActivationMap> one{m};
    const std::vector<GroundTruth> box{{"b", 0, {{0, 0, 10, 10}}, std::nullopt}};
    const double mba = max_box_acc_v2(one, box, ThresholdGrid::standard(), g20).score;
    return {ap == 5.0 / 6.0 && mba == 2.0 / 3.0,
            fmt("PxAP %.17g (expect 5/6), MaxBoxAccV2 %.17g (expect 2/3)", ap, mba)};
}

Outcome cli_determinism()
{
    const auto root = fs::temp_directory_path() / "cream_acceptance";
    fs::remove_all(root);
    std::vector<std::string> files{"train.crmf", "eval.crmf", "head.crmh", "manifest.json",
                                   "store.crms", "maps.crmm", "report.txt"};
    std::vector<std::vector<std::uint8_t>> first;
    for (int run = 0; run < 2; ++run) {
        const auto dir = root / ("run" + std::to_string(run));
        const auto p = [&](const char* name) { return (dir / name).string(); };
        std::ostringstream out, err;
        const std::vector<std::vector<std::string>> steps{
            {"synth", "--out-dir", dir.string()},
            {"--manifest", p("manifest.json"), "embed-learn", "--out", p("store.crms")},
            {"--manifest", p("manifest.json"), "reactivate", "--store", p("store.crms"), "--jobs",
             run == 0 ? "1" : "4", "--out", p("maps.crmm")},
            {"--manifest", p("manifest.json"), "eval", "--maps", p("maps.crmm"), "--out", p("report.txt")}};
        for (const auto& step : steps) {
            if (run_cli(step, out, err) != 0) {
                return {false, "pipeline step failed: " + err.str()};
            }
        }
        for (std::size_t k = 0; k < files.size(); ++k) {
            auto bytes = read_file(dir / files[k]);
            if (run == 0) {
                first.push_back(std::move(bytes));
            } else if (bytes != first[k]) {
                return {false, files[k] + " differs between runs"};
            }
        }
    }
    fs::remove_all(root);
    return {true, "synth, embed-learn, reactivate, eval twice: all 7 outputs bit-identical"};
}

} // namespace

int main()
{
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"em-correctness", em_correctness},
        {"oracle-equivalence", oracle_equivalence},
        {"gap-identity", gap_identity},
        {"incomplete-localization", incomplete_localization},
        {"iteration-ordering", iteration_ordering},
        {"momentum-gap", momentum_gap},
        {"threshold-robustness", threshold_robustness},
        {"metric-examples", metric_examples},
        {"cli-determinism", cli_determinism},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
