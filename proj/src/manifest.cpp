#include "cream/manifest.hpp"

#include "cream/io.hpp"

#include <json.hpp>

#include <set>
#include <stdexcept>

namespace cream {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where)
{
    for (const auto& [key, value] : obj.items()) {
        if (!known.contains(key)) {
            throw std::invalid_argument("manifest: unknown key '" + key + "' in " + where);
        }
    }
}

template <typename T>
void read_field(const json& obj, const char* key, std::optional<T>& out)
{
    const auto it = obj.find(key);
    if (it == obj.end()) {
        return;
    }
    try {
        out = it->get<T>();
    } catch (const json::exception&) {
        throw std::invalid_argument(std::string("manifest: '") + key + "' has the wrong type");
    }
}

void read_int(const json& obj, const char* key, std::optional<int>& out)
{
    const auto it = obj.find(key);
    if (it == obj.end()) {
        return;
    }
    if (!it->is_number_integer()) {
        throw std::invalid_argument(std::string("manifest: '") + key + "' must be an integer");
    }
    out = it->get<int>();
}

void read_path(const json& obj, const char* key, const std::filesystem::path& base,
               std::optional<std::filesystem::path>& out)
{
    std::optional<std::string> text;
    read_field(obj, key, text);
    if (text) {
        const std::filesystem::path p(*text);
        out = p.is_absolute() ? p : base / p;
    }
}

template <typename T>
void write_field(json& obj, const char* key, const std::optional<T>& v)
{
    if (v) {
        obj[key] = *v;
    }
}

} // namespace

Manifest parse_manifest(const std::string& text, const std::filesystem::path& base)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("manifest: ") + e.what());
    }
    if (!doc.is_object()) {
        throw std::invalid_argument("manifest: top level must be an object");
    }
    reject_unknown(doc, {"train_dump", "dump", "head", "store", "maps", "config"}, "manifest");

    Manifest m;
    read_path(doc, "train_dump", base, m.train_dump);
    read_path(doc, "dump", base, m.dump);
    read_path(doc, "head", base, m.head);
    read_path(doc, "store", base, m.store);
    read_path(doc, "maps", base, m.maps);

    if (const auto it = doc.find("config"); it != doc.end()) {
        const json& c = *it;
        if (!c.is_object()) {
            throw std::invalid_argument("manifest: 'config' must be an object");
        }
        reject_unknown(c,
                       {"sigma", "iters", "lambda", "delta_frac", "tau", "tau_grid", "box_mode",
                        "upsample", "image_size", "stride", "class_policy", "seed", "jobs", "epochs"},
                       "config");
        auto& cfg = m.config;
        read_field(c, "sigma", cfg.sigma);
        read_int(c, "iters", cfg.iters);
        read_field(c, "lambda", cfg.lambda);
        read_field(c, "delta_frac", cfg.delta_frac);
        read_field(c, "tau", cfg.tau);
        read_field(c, "tau_grid", cfg.tau_grid);
        read_field(c, "box_mode", cfg.box_mode);
        read_field(c, "upsample", cfg.upsample);
        read_int(c, "image_size", cfg.image_size);
        read_int(c, "stride", cfg.stride);
        read_field(c, "class_policy", cfg.class_policy);
        if (const auto s = c.find("seed"); s != c.end()) {
            if (!s->is_number_unsigned()) {
                throw std::invalid_argument("manifest: 'seed' must be a non-negative integer");
            }
            cfg.seed = s->get<std::uint64_t>();
        }
        read_int(c, "jobs", cfg.jobs);
        read_int(c, "epochs", cfg.epochs);
    }
    return m;
}

Manifest read_manifest(const std::filesystem::path& path)
{
    const auto bytes = read_file(path);
    Manifest m = parse_manifest(std::string(bytes.begin(), bytes.end()), path.parent_path());
    for (const auto* p : {&m.train_dump, &m.dump, &m.head, &m.store, &m.maps}) {
        if (*p && !std::filesystem::exists(**p)) {
            throw std::invalid_argument("manifest: referenced file '" + (*p)->string() +
                                        "' does not exist");
        }
    }
    return m;
}

std::string manifest_json(const Manifest& manifest)
{
    json doc = json::object();
    auto put_path = [&](const char* key, const std::optional<std::filesystem::path>& p) {
        if (p) {
            doc[key] = p->generic_string();
        }
    };
    put_path("train_dump", manifest.train_dump);
    put_path("dump", manifest.dump);
    put_path("head", manifest.head);
    put_path("store", manifest.store);
    put_path("maps", manifest.maps);

    json c = json::object();
    const auto& cfg = manifest.config;
    write_field(c, "sigma", cfg.sigma);
    write_field(c, "iters", cfg.iters);
    write_field(c, "lambda", cfg.lambda);
    write_field(c, "delta_frac", cfg.delta_frac);
    write_field(c, "tau", cfg.tau);
    write_field(c, "tau_grid", cfg.tau_grid);
    write_field(c, "box_mode", cfg.box_mode);
    write_field(c, "upsample", cfg.upsample);
    write_field(c, "image_size", cfg.image_size);
    write_field(c, "stride", cfg.stride);
    write_field(c, "class_policy", cfg.class_policy);
    write_field(c, "seed", cfg.seed);
    write_field(c, "jobs", cfg.jobs);
    write_field(c, "epochs", cfg.epochs);
    if (!c.empty()) {
        doc["config"] = c;
    }
    return doc.dump(2) + "\n";
}

} // namespace cream
