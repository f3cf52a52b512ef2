#include "cream/calibration.hpp"
#include "cream/pipeline.hpp"

#include "oracles.hpp"

#include <doctest.h>

using namespace cream;

namespace {

LatentMaps latent_from(const ActivationMap& fg)
{
    ActivationMap bg(fg.height(), fg.width());
    for (std::size_t p = 0; p < fg.size(); ++p) {
        bg[p] = 1.0 - fg[p];
    }
    return {fg, bg};
}

} // namespace

TEST_CASE("calibration picks the map with the larger masked mean")
{
    const auto z = latent_from(ActivationMap(1, 2, {0.9, 0.2}));
    const BinaryMask first(1, 2, std::vector<std::uint8_t>{1, 0});
    auto r = calibrate(z, first);
    CHECK(r.chose_fg);
    CHECK(r.zbar_fg == doctest::Approx(0.9));
    CHECK(r.zbar_bg == doctest::Approx(0.1));
    CHECK(r.calibrated == z.fg);

    const BinaryMask second(1, 2, std::vector<std::uint8_t>{0, 1});
    r = calibrate(z, second);
    CHECK_FALSE(r.chose_fg);
    CHECK(r.calibrated == z.bg);
    // Complementarity: 1 - chosen equals z_fg.
    for (std::size_t p = 0; p < z.fg.size(); ++p) {
        CHECK(1.0 - r.calibrated[p] == doctest::Approx(z.fg[p]));
    }
}

TEST_CASE("a tie goes to the foreground posterior")
{
    const auto z = latent_from(ActivationMap(1, 2, {0.5, 0.5}));
    const auto r = calibrate(z, BinaryMask(1, 2, true));
    CHECK(r.chose_fg);
}

TEST_CASE("calibration errors")
{
    const auto z = latent_from(ActivationMap(2, 2, 0.3));
    CHECK_THROWS_AS(calibrate(z, BinaryMask(2, 2, false)), std::invalid_argument);
    CHECK_THROWS_AS(calibrate(z, BinaryMask(3, 2, true)), std::invalid_argument);
    CHECK_THROWS_AS(final_map(ActivationMap(2, 2), ActivationMap(2, 3)), std::invalid_argument);
}

TEST_CASE("masked means match the scalar oracle")
{
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 30; ++trial) {
        const auto z = latent_from(oracle::random_map(rng, 6, 7));
        auto mask = oracle::random_mask(rng, 6, 7, 0.4);
        mask.set(0, 0, true);
        double sf = 0, sb = 0, n = 0;
        for (int i = 0; i < 6; ++i) {
            for (int j = 0; j < 7; ++j) {
                if (mask.at(i, j)) {
                    sf += z.fg.at(i, j);
                    sb += z.bg.at(i, j);
                    n += 1;
                }
            }
        }
        const auto r = calibrate(z, mask);
        CHECK(std::abs(r.zbar_fg - sf / n) <= 1e-6);
        CHECK(std::abs(r.zbar_bg - sb / n) <= 1e-6);
        CHECK(r.chose_fg == (r.zbar_fg >= r.zbar_bg));
    }
}

TEST_CASE("final map examples")
{
    std::mt19937_64 rng(2);
    const auto cam = oracle::random_map(rng, 5, 5);
    const auto ncam = min_max_normalize(cam);
    const auto a = final_map(ActivationMap(5, 5, 0.0), cam);
    const auto b = final_map(cam, cam);
    for (std::size_t p = 0; p < cam.size(); ++p) {
        CHECK(a[p] == doctest::Approx(ncam[p]).epsilon(1e-12));
        CHECK(b[p] == doctest::Approx(ncam[p]).epsilon(1e-12));
    }
}

TEST_CASE("final map matches add-then-normalize and keeps its range properties")
{
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        auto cal = oracle::random_map(rng, 4, 6);
        auto cam = oracle::random_map(rng, 4, 6);
        // Share a minimum pixel so the suppression property is exercised.
        cal[5] = -1.0;
        cam[5] = -5.0;
        const auto out = final_map(cal, cam);
        const auto gc = oracle::normalize(oracle::grid_of(cal));
        const auto gm = oracle::normalize(oracle::grid_of(cam));
        oracle::Grid sum = gc;
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < 6; ++j) {
                sum[i][j] += gm[i][j];
            }
        }
        const auto expect = oracle::normalize(sum);
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < 6; ++j) {
                CHECK(out.at(i, j) == doctest::Approx(expect[i][j]).epsilon(1e-12));
            }
        }
        CHECK(out.min() == 0.0);
        CHECK(out.max() == 1.0);
        CHECK(out[5] == 0.0);
    }
}

TEST_CASE("reactivate at T=0 falls back to the normalized CAM")
{
    std::mt19937_64 rng(4);
    const auto f = oracle::random_features(rng, 3, 6, 6);
    const auto head = oracle::random_head(rng, 2, 3);
    ReactivationConfig cfg;
    cfg.em.iterations = 0;
    const auto r = reactivate(f, head, init_store(2, 3, 1), 1, cfg);
    CHECK_FALSE(r.em.has_value());
    CHECK_FALSE(r.calibration.has_value());
    CHECK(r.final == min_max_normalize(compute_cam(f, head, 1)));
}

TEST_CASE("reactivate composes CAM, EM, calibration and fusion")
{
    std::mt19937_64 rng(5);
    const auto f = oracle::random_features(rng, 3, 6, 6, 4.0);
    const auto head = oracle::random_head(rng, 2, 3);
    const auto store = init_store(2, 3, 9);
    const auto r = reactivate(f, head, store, 0, {});
    REQUIRE(r.em.has_value());
    const auto em = run_em(f, store, 0, EmConfig{});
    CHECK(r.em->latent.fg == em->latent.fg);
    const auto cal = calibrate(em->latent, cam_guided_masks(compute_cam(f, head, 0), 0.2).fg);
    CHECK(r.calibration->chose_fg == cal.chose_fg);
    CHECK(r.final == final_map(cal.calibrated, compute_cam(f, head, 0)));
}
