#pragma once

// JSON dataset manifest: file locations plus configuration overrides.
//
//   {
//     "train_dump": "train.crmf", "dump": "eval.crmf",
//     "head": "head.crmh", "store": "store.crms", "maps": "maps.crmm",
//     "config": { "sigma": 8, "iters": 2, "lambda": 0.8, "delta_frac": 0.2,
//                 "tau": 0.2, "tau_grid": "0:1:0.01", "box_mode": "largest_cc",
//                 "upsample": "nearest", "image_size": 224, "stride": 8,
//                 "class_policy": "gt", "seed": 17, "jobs": 1, "epochs": 1 }
//   }
//
// Every key is optional. Relative paths resolve against the manifest's
// directory. Unknown keys are rejected so typos do not pass silently.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace cream {

struct ManifestConfig {
    std::optional<double> sigma;
    std::optional<int> iters;
    std::optional<double> lambda;
    std::optional<double> delta_frac;
    std::optional<double> tau;
    std::optional<std::string> tau_grid;
    std::optional<std::string> box_mode;
    std::optional<std::string> upsample;
    std::optional<int> image_size;
    std::optional<int> stride;
    std::optional<std::string> class_policy;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    std::optional<int> epochs;
};

struct Manifest {
    std::optional<std::filesystem::path> train_dump;
    std::optional<std::filesystem::path> dump;
    std::optional<std::filesystem::path> head;
    std::optional<std::filesystem::path> store;
    std::optional<std::filesystem::path> maps;
    ManifestConfig config;
};

/// Parses a manifest from JSON text; relative paths are joined onto base.
/// Throws std::invalid_argument on malformed JSON, wrong types or unknown keys.
Manifest parse_manifest(const std::string& text, const std::filesystem::path& base = {});

/// Reads and parses path. Every referenced file must exist.
Manifest read_manifest(const std::filesystem::path& path);

/// Serializes with paths as given (callers pass paths relative to the
/// manifest's directory).
std::string manifest_json(const Manifest& manifest);

} // namespace cream
