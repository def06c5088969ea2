#include "intrakd/scene.hpp"

#include <algorithm>
#include <cmath>

#include "intrakd/errors.hpp"
#include "intrakd/rng.hpp"

namespace intrakd {

SceneSpec default_scene_spec() {
    SceneSpec spec;
    spec.h = 64;
    spec.w = 64;
    spec.n = 4;
    spec.noise = 0.06;

    ElementSpec left;
    left.geometry = Geometry::SolidLane;
    left.x_bottom = {0.08, 0.35};
    left.x_top = {0.38, 0.47};
    left.width = {2.5, 4.0};
    left.color = {0.88, 0.88, 0.82};
    left.texture = 0.05;

    ElementSpec right = left;
    right.geometry = Geometry::DashedLane;
    right.x_bottom = {0.65, 0.92};
    right.x_top = {0.53, 0.62};
    right.color = {0.86, 0.88, 0.84};
    right.dash_on = 10.0;
    right.dash_off = 6.0;

    ElementSpec crossing;
    crossing.geometry = Geometry::CrossingBars;
    crossing.x_bottom = {0.15, 0.30};  // band left edge
    crossing.x_top = {0.70, 0.85};     // band right edge
    crossing.width = {3.0, 3.0};
    crossing.band_rows = {0.60, 0.85};
    crossing.dash_on = 3.0;
    crossing.dash_off = 3.0;
    crossing.color = {0.85, 0.80, 0.45};
    crossing.texture = 0.04;

    spec.elements = {left, right, crossing};
    return spec;
}

namespace {

void check_range(const Range& r, const char* what, double lo, double hi) {
    if (!(r.lo <= r.hi) || r.lo < lo || r.hi > hi) {
        throw ConfigError(std::string("scene spec: invalid range for ") + what);
    }
}

double sample(Rng& rng, const Range& r) { return r.lo == r.hi ? r.lo : rng.uniform(r.lo, r.hi); }

// Distance from point p to segment ab, and the arc-length parameter of the
// projection measured from a.
struct SegmentHit {
    double dist;
    double along;
};

SegmentHit segment_distance(double px, double py, double ax, double ay, double bx, double by) {
    const double dx = bx - ax, dy = by - ay;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0.0 ? ((px - ax) * dx + (py - ay) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double cx = ax + t * dx - px, cy = ay + t * dy - py;
    return {std::sqrt(cx * cx + cy * cy), t * std::sqrt(len2)};
}

struct Canvas {
    std::size_t h, w;
    std::vector<int> label;     // -1 = background
    std::vector<double> shade;  // per-pixel texture factor of the owning element
};

void draw_element(Canvas& cv, const ElementSpec& e, int cls, double horizon_row, Rng& rng) {
    const double fw = static_cast<double>(cv.w), fh = static_cast<double>(cv.h);
    const double phase = rng.uniform(0.0, e.dash_on + e.dash_off);
    const double ripple = rng.uniform(0.0, 6.283185307179586);
    if (e.geometry == Geometry::CrossingBars) {
        const double x0 = sample(rng, e.x_bottom) * fw;
        const double x1 = sample(rng, e.x_top) * fw;
        double r0 = e.band_rows.lo * fh, r1 = e.band_rows.hi * fh;
        const double band_h = rng.uniform(0.35, 0.6) * (r1 - r0);
        const double top = rng.uniform(r0, r1 - band_h);
        for (std::size_t i = 0; i < cv.h; ++i) {
            const double y = static_cast<double>(i) + 0.5;
            if (y < top || y > top + band_h) continue;
            for (std::size_t j = 0; j < cv.w; ++j) {
                const double x = static_cast<double>(j) + 0.5;
                if (x < x0 || x > x1) continue;
                if (std::fmod(x - x0 + phase, e.dash_on + e.dash_off) >= e.dash_on) continue;
                cv.label[i * cv.w + j] = cls;
                cv.shade[i * cv.w + j] = 1.0 + e.texture * std::sin(0.9 * y + ripple);
            }
        }
        return;
    }
    const double ax = sample(rng, e.x_bottom) * fw, ay = fh;
    const double bx = sample(rng, e.x_top) * fw, by = horizon_row;
    const double half = sample(rng, e.width) / 2.0;
    for (std::size_t i = 0; i < cv.h; ++i) {
        const double y = static_cast<double>(i) + 0.5;
        if (y < by) continue;
        for (std::size_t j = 0; j < cv.w; ++j) {
            const double x = static_cast<double>(j) + 0.5;
            const auto hit = segment_distance(x, y, ax, ay, bx, by);
            if (hit.dist > half) continue;
            if (e.geometry == Geometry::DashedLane &&
                std::fmod(hit.along + phase, e.dash_on + e.dash_off) >= e.dash_on) {
                continue;
            }
            cv.label[i * cv.w + j] = cls;
            cv.shade[i * cv.w + j] = 1.0 + e.texture * std::sin(0.7 * hit.along + ripple);
        }
    }
}

}  // namespace

void validate_scene_spec(const SceneSpec& spec) {
    if (spec.n < 2 || spec.n > 8) throw ConfigError("scene spec: n must be in [2, 8]");
    if (spec.elements.size() != spec.n - 1) throw ConfigError("scene spec: need one element per foreground class");
    if (spec.h < 8 || spec.w < 8) throw ConfigError("scene spec: frame must be at least 8 x 8");
    if (spec.noise < 0.0) throw ConfigError("scene spec: noise must be non-negative");
    check_range(spec.horizon, "horizon", 0.0, 0.9);
    check_range(spec.background, "background", -1e9, 1e9);
    for (const auto& e : spec.elements) {
        check_range(e.x_bottom, "x_bottom", 0.0, 1.0);
        check_range(e.x_top, "x_top", 0.0, 1.0);
        if (e.dash_on <= 0.0 || e.dash_off < 0.0) throw ConfigError("scene spec: dash lengths must be positive");
        if (e.geometry == Geometry::CrossingBars) {
            check_range(e.band_rows, "band_rows", 0.0, 1.0);
            if (e.band_rows.hi - e.band_rows.lo <= 0.0 || e.x_bottom.hi >= e.x_top.lo) {
                throw ConfigError("scene spec: crossing band does not fit in the frame");
            }
        } else {
            check_range(e.width, "width", 0.5, static_cast<double>(std::min(spec.h, spec.w)) / 2.0);
        }
    }
}

SceneSample generate_scene(const SceneSpec& spec, std::uint64_t seed) {
    validate_scene_spec(spec);
    constexpr int kMaxAttempts = 64;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(attempt)));
        Canvas cv{spec.h, spec.w, std::vector<int>(spec.h * spec.w, -1), std::vector<double>(spec.h * spec.w, 1.0)};
        const double horizon_row = sample(rng, spec.horizon) * static_cast<double>(spec.h);
        for (std::size_t k = 1; k < spec.n; ++k) draw_element(cv, spec.elements[k - 1], static_cast<int>(k), horizon_row, rng);

        std::vector<bool> seen(spec.n, false);
        for (int l : cv.label)
            if (l >= 0) seen[static_cast<std::size_t>(l)] = true;
        if (!std::all_of(seen.begin() + 1, seen.end(), [](bool b) { return b; })) continue;

        SceneSample out{Tensor({spec.h, spec.w, 3}), ClassMap(spec.h, spec.w)};
        const double bottom = sample(rng, spec.background);
        for (std::size_t i = 0; i < spec.h; ++i) {
            const double frac = spec.h > 1 ? static_cast<double>(i) / static_cast<double>(spec.h - 1) : 0.0;
            const double bg = spec.background.lo + frac * (bottom - spec.background.lo);
            for (std::size_t j = 0; j < spec.w; ++j) {
                const std::size_t p = i * spec.w + j;
                const int l = cv.label[p];
                for (std::size_t ch = 0; ch < 3; ++ch) {
                    double v = l < 0 ? bg * spec.background_tint[ch]
                                     : spec.elements[static_cast<std::size_t>(l) - 1].color[ch] * cv.shade[p];
                    if (spec.noise > 0.0) v += rng.uniform(-spec.noise, spec.noise);
                    out.image.at(i, j, ch) = v;
                }
                out.target.labels()[p] = static_cast<std::uint8_t>(l < 0 ? 0 : l);
            }
        }
        return out;
    }
    throw ConfigError("scene spec: could not place every class after " + std::to_string(kMaxAttempts) + " attempts");
}

std::vector<SceneSample> generate_scenes(const SceneSpec& spec, std::size_t count, std::uint64_t base_seed) {
    std::vector<SceneSample> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(generate_scene(spec, base_seed ^ static_cast<std::uint64_t>(i)));
    return out;
}

ClassMap downsample_target(const ClassMap& target, std::size_t h_o, std::size_t w_o) {
    const std::size_t h = target.height(), w = target.width();
    if (h_o == 0 || w_o == 0 || h_o > h || w_o > w) throw ConfigError("downsample_target: invalid output extents");
    if (h_o == h && w_o == w) return target;
    std::vector<std::size_t> votes(h_o * w_o * 256, 0);
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j)
            ++votes[((i * h_o / h) * w_o + (j * w_o / w)) * 256 + target.at(i, j)];
    ClassMap out(h_o, w_o);
    for (std::size_t c = 0; c < h_o * w_o; ++c) {
        const std::size_t* v = votes.data() + c * 256;
        const std::size_t best = *std::max_element(v, v + 256);
        std::size_t winner = 0;
        for (std::size_t k = 1; k < 256; ++k) {
            if (v[k] == best) {
                winner = k;
                break;
            }
        }
        out.labels()[c] = static_cast<std::uint8_t>(winner);
    }
    return out;
}

}  // namespace intrakd
