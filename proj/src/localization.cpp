#include "cream/localization.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace cream {

std::vector<Component> connected_components(const BinaryMask& mask)
{
    const int h = mask.height();
    const int w = mask.width();
    std::vector<std::uint8_t> seen(mask.size(), 0);
    std::vector<Component> components;
    std::vector<std::size_t> stack;

    for (std::size_t start = 0; start < mask.size(); ++start) {
        if (!mask[start] || seen[start]) {
            continue;
        }
        Component component;
        seen[start] = 1;
        stack.push_back(start);
        while (!stack.empty()) {
            const std::size_t p = stack.back();
            stack.pop_back();
            component.push_back(p);
            const int i = static_cast<int>(p / w);
            const int j = static_cast<int>(p % w);
            for (int di = -1; di <= 1; ++di) {
                for (int dj = -1; dj <= 1; ++dj) {
                    const int ni = i + di;
                    const int nj = j + dj;
                    if (ni < 0 || nj < 0 || ni >= h || nj >= w) {
                        continue;
                    }
                    const std::size_t q = static_cast<std::size_t>(ni) * w + nj;
                    if (mask[q] && !seen[q]) {
                        seen[q] = 1;
                        stack.push_back(q);
                    }
                }
            }
        }
        std::sort(component.begin(), component.end());
        components.push_back(std::move(component));
    }
    return components;
}

BoundingBox component_box(const Component& component, int width)
{
    if (component.empty()) {
        throw std::invalid_argument("component_box: empty component");
    }
    BoundingBox box{width, static_cast<int>(component.front() / width), -1, -1};
    for (std::size_t p : component) {
        const int i = static_cast<int>(p / width);
        const int j = static_cast<int>(p % width);
        box.x0 = std::min(box.x0, j);
        box.y0 = std::min(box.y0, i);
        box.x1 = std::max(box.x1, j + 1);
        box.y1 = std::max(box.y1, i + 1);
    }
    return box;
}

BoxMode parse_box_mode(std::string_view name)
{
    if (name == "largest_cc") {
        return BoxMode::largest_cc;
    }
    if (name == "union") {
        return BoxMode::union_all;
    }
    throw std::invalid_argument("unknown box mode '" + std::string(name) +
                                "' (expected largest_cc or union)");
}

std::string_view to_string(BoxMode mode)
{
    return mode == BoxMode::largest_cc ? "largest_cc" : "union";
}

std::optional<BoundingBox> extract_box(const ActivationMap& map, double tau, BoxMode mode)
{
    const BinaryMask mask = threshold_fg_bg(map, tau).fg;
    if (mode == BoxMode::union_all) {
        Component all;
        for (std::size_t p = 0; p < mask.size(); ++p) {
            if (mask[p]) {
                all.push_back(p);
            }
        }
        if (all.empty()) {
            return std::nullopt;
        }
        return component_box(all, map.width());
    }

    const auto components = connected_components(mask);
    if (components.empty()) {
        return std::nullopt;
    }
    const Component* best = &components.front();
    for (const auto& component : components) {
        if (component.size() > best->size()) {
            best = &component;
        }
    }
    return component_box(*best, map.width());
}

double iou(const BoundingBox& a, const BoundingBox& b)
{
    const long long iw = std::max(0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
    const long long ih = std::max(0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
    const long long inter = iw * ih;
    const long long uni = a.area() + b.area() - inter;
    return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

namespace {

// Smallest destination index whose nearest-neighbour source index is >= src.
int scale_edge(int src, int from, int to)
{
    const long long num = static_cast<long long>(src) * to;
    return static_cast<int>((num + from - 1) / from);
}

} // namespace

BoundingBox scale_box(const BoundingBox& box, int from_h, int from_w, int to_h, int to_w)
{
    return {scale_edge(box.x0, from_w, to_w), scale_edge(box.y0, from_h, to_h),
            scale_edge(box.x1, from_w, to_w), scale_edge(box.y1, from_h, to_h)};
}

} // namespace cream
