#pragma once

// The standard synthetic suite used by the acceptance checks and as the
// CLI's synth defaults.

#include "cream/fixtures.hpp"

#include <cstdint>

namespace cream::suite {

inline constexpr int kPerClass = 20;
inline constexpr std::uint64_t kFixtureSeed = 20220607;
inline constexpr std::uint64_t kStoreSeed = 17;
inline constexpr float kLambda = 0.8f;

inline FixtureSpec default_spec()
{
    FixtureSpec spec;
    spec.seed = kFixtureSeed;
    return spec;
}

} // namespace cream::suite
