#include "crisisfilter/corpus.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "crisisfilter/dataset.hpp"
#include "crisisfilter/netpbm.hpp"
#include "crisisfilter/phash.hpp"
#include "crisisfilter/pipeline.hpp"
#include "crisisfilter/rng.hpp"

namespace crisisfilter {

namespace {

using Rgb = std::array<double, 3>;

Rgb lerp(const Rgb& a, const Rgb& b, double t)
{
    return {a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t};
}

// Scene pixel values stay inside this band, and brightness perturbations keep
// them inside histogram bins 3..12. Banners and overlaid text live in the
// outer bins 0..1 and 14..15 and brightness moves them by at most one bin.
constexpr double kSceneLo = 52.0;
constexpr double kSceneHi = 194.0;

struct Building {
    double x0, x1, height;  // unit coordinates; height above the horizon
    Rgb color;
    std::vector<double> jag;  // per-column top offsets, unit coordinates
    bool windows;
};

struct Crack {
    std::vector<std::pair<double, double>> points;
};

struct Debris {
    double x0, y0, x1, y1;
    Rgb color;
};

struct Scene {
    double severity = 0;
    Rgb sky{}, ground{};
    double horizon = 0.5;
    std::vector<Building> buildings;
    std::vector<Crack> cracks;
    std::vector<Debris> debris;
    double noise_amp = 5;
    std::uint64_t noise_seed = 0;
    double haze = 0;
};

Crack make_crack(Rng& rng)
{
    Crack c;
    double x = rng.uniform(0.05, 0.95);
    double y = rng.uniform(0.2, 0.9);
    double angle = rng.uniform(0, 6.283185307179586);
    const int steps = static_cast<int>(rng.uniform_int(4, 9));
    c.points.emplace_back(x, y);
    for (int s = 0; s < steps; ++s) {
        angle += rng.uniform(-0.8, 0.8);
        x += 0.04 * std::cos(angle);
        y += 0.04 * std::sin(angle);
        c.points.emplace_back(x, y);
    }
    return c;
}

Debris make_debris(Rng& rng, double horizon)
{
    const double w = rng.uniform(0.03, 0.11);
    const double h = rng.uniform(0.03, 0.09);
    const double x = rng.uniform(-0.02, 1.0);
    const double y = rng.uniform(horizon - 0.15, 1.0);
    const double shade = rng.uniform(60, 190);
    const Rgb color{shade + rng.uniform(0, 25), shade + rng.uniform(-5, 12), shade - rng.uniform(0, 25)};
    return {x, y, x + w, y + h, color};
}

Scene make_scene(double severity, std::uint64_t seed)
{
    Rng rng(seed);
    Scene s;
    s.severity = severity;
    const Rgb clean_sky{rng.uniform(90, 140), rng.uniform(140, 180), rng.uniform(195, 215)};
    const Rgb dusty_sky{rng.uniform(140, 165), rng.uniform(132, 152), rng.uniform(118, 138)};
    s.sky = lerp(clean_sky, dusty_sky, std::clamp(severity * 0.9 + rng.uniform(-0.1, 0.1), 0.0, 1.0));
    const Rgb clean_ground = rng.bernoulli(0.5) ? Rgb{rng.uniform(70, 100), rng.uniform(110, 140), rng.uniform(55, 80)}
                                                : Rgb{rng.uniform(95, 120), rng.uniform(95, 120), rng.uniform(95, 125)};
    const Rgb rubble_ground{rng.uniform(110, 140), rng.uniform(95, 115), rng.uniform(70, 90)};
    s.ground = lerp(clean_ground, rubble_ground, std::clamp(severity + rng.uniform(-0.1, 0.1), 0.0, 1.0));
    s.horizon = rng.uniform(0.35, 0.7);

    const int n_buildings = static_cast<int>(rng.uniform_int(1, 3));
    for (int b = 0; b < n_buildings; ++b) {
        Building bl;
        const double w = rng.uniform(0.15, 0.45);
        bl.x0 = rng.uniform(-0.1, 0.95 - w);
        bl.x1 = bl.x0 + w;
        bl.height = rng.uniform(0.2, 0.5) * (1.0 - 0.65 * severity);
        const double tone = rng.uniform(150, 205);
        bl.color = rng.bernoulli(0.3) ? Rgb{rng.uniform(150, 185), rng.uniform(70, 95), rng.uniform(55, 75)}
                                      : Rgb{tone, tone - rng.uniform(0, 20), tone - rng.uniform(10, 40)};
        const int cols = 12;
        for (int c = 0; c < cols; ++c) {
            bl.jag.push_back(rng.uniform(0, 1) * severity * bl.height * 0.9);
        }
        bl.windows = rng.uniform() > severity;
        s.buildings.push_back(std::move(bl));
    }
    const int n_cracks = static_cast<int>(std::lround(severity * 12 * rng.uniform(0.5, 1.5)));
    for (int c = 0; c < n_cracks; ++c) {
        s.cracks.push_back(make_crack(rng));
    }
    const int n_debris = static_cast<int>(std::lround(severity * 70 * rng.uniform(0.7, 1.3)));
    for (int d = 0; d < n_debris; ++d) {
        s.debris.push_back(make_debris(rng, s.horizon));
    }
    s.noise_amp = 5 + 18 * severity;
    s.noise_seed = rng.next();
    s.haze = std::clamp(0.45 * severity + rng.uniform(-0.05, 0.05), 0.0, 1.0);
    return s;
}

// Same place, different photograph: buildings and horizon shift a little and
// part of the rubble is rearranged. `strength` in [0, 1].
Scene jitter_scene(const Scene& base, double strength, std::uint64_t seed)
{
    Rng rng(seed);
    Scene s = base;
    s.horizon = std::clamp(base.horizon + rng.uniform(-0.06, 0.06) * strength, 0.3, 0.75);
    for (auto& b : s.buildings) {
        const double dx = rng.uniform(-0.12, 0.12) * strength;
        b.x0 += dx;
        b.x1 += dx;
        b.height *= 1.0 + rng.uniform(-0.25, 0.25) * strength;
        for (auto& j : b.jag) {
            if (rng.bernoulli(strength * 0.5)) {
                j = rng.uniform(0, 1) * s.severity * b.height * 0.9;
            }
        }
    }
    for (auto& c : s.cracks) {
        if (rng.bernoulli(strength * 0.6)) {
            c = make_crack(rng);
        }
    }
    for (auto& d : s.debris) {
        if (rng.bernoulli(strength * 0.6)) {
            d = make_debris(rng, s.horizon);
        }
    }
    if (rng.bernoulli(strength * 0.5)) {
        Building extra;
        const double w = rng.uniform(0.08, 0.2);
        extra.x0 = rng.uniform(0.0, 0.9 - w);
        extra.x1 = extra.x0 + w;
        extra.height = rng.uniform(0.1, 0.3) * (1.0 - 0.65 * s.severity);
        const double tone = rng.uniform(140, 200);
        extra.color = Rgb{tone, tone - 10, tone - 25};
        extra.jag.assign(12, 0.0);
        extra.windows = false;
        s.buildings.push_back(std::move(extra));
    }
    s.noise_seed = rng.next();
    return s;
}

Raster render(const Scene& s, int size)
{
    std::vector<Rgb> px(static_cast<std::size_t>(size) * size);
    auto at = [&](int x, int y) -> Rgb& { return px[static_cast<std::size_t>(y) * size + x]; };
    const double n = size;
    for (int y = 0; y < size; ++y) {
        const double t = (y + 0.5) / n;
        for (int x = 0; x < size; ++x) {
            if (t < s.horizon) {
                at(x, y) = lerp(s.sky, Rgb{s.sky[0] + 25, s.sky[1] + 20, s.sky[2] + 10}, t / s.horizon);
            } else {
                at(x, y) = lerp(s.ground, Rgb{s.ground[0] * 0.8, s.ground[1] * 0.8, s.ground[2] * 0.8},
                                (t - s.horizon) / (1.0 - s.horizon));
            }
        }
    }
    for (const auto& b : s.buildings) {
        const int xa = std::max(0, static_cast<int>(std::floor(b.x0 * n)));
        const int xb = std::min(size, static_cast<int>(std::ceil(b.x1 * n)));
        for (int x = xa; x < xb; ++x) {
            const double u = ((x + 0.5) / n - b.x0) / (b.x1 - b.x0);
            const int col = std::clamp(static_cast<int>(u * b.jag.size()), 0, static_cast<int>(b.jag.size()) - 1);
            const double top = s.horizon - b.height + b.jag[col];
            const double bottom = s.horizon + 0.04;
            for (int y = std::max(0, static_cast<int>(top * n)); y < std::min(size, static_cast<int>(bottom * n)); ++y) {
                Rgb c = b.color;
                if (b.windows) {
                    const int wx = static_cast<int>((x - xa) * 64 / n) % 6;
                    const int wy = static_cast<int>((y - top * n) * 64 / n) % 7;
                    if (wx >= 2 && wx <= 4 && wy >= 2 && wy <= 4) {
                        c = Rgb{c[0] * 0.35, c[1] * 0.4, c[2] * 0.5};
                    }
                }
                at(x, y) = c;
            }
        }
    }
    for (const auto& d : s.debris) {
        for (int y = std::max(0, static_cast<int>(d.y0 * n)); y < std::min(size, static_cast<int>(d.y1 * n)); ++y) {
            for (int x = std::max(0, static_cast<int>(d.x0 * n)); x < std::min(size, static_cast<int>(d.x1 * n)); ++x) {
                at(x, y) = d.color;
            }
        }
    }
    for (const auto& c : s.cracks) {
        for (std::size_t i = 1; i < c.points.size(); ++i) {
            const auto [xa, ya] = c.points[i - 1];
            const auto [xb, yb] = c.points[i];
            const int steps = std::max(1, static_cast<int>(std::hypot(xb - xa, yb - ya) * n * 2));
            for (int k = 0; k <= steps; ++k) {
                const double f = static_cast<double>(k) / steps;
                const int x = static_cast<int>((xa + (xb - xa) * f) * n);
                const int y = static_cast<int>((ya + (yb - ya) * f) * n);
                if (x >= 0 && y >= 0 && x < size && y < size) {
                    at(x, y) = Rgb{45, 40, 36};
                }
            }
        }
    }
    Rng noise(s.noise_seed);
    const Rgb dust{165, 155, 140};
    Raster img(size, size, 3);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const Rgb c = lerp(at(x, y), dust, s.haze);
            const double common = noise.normal() * s.noise_amp;
            for (int ch = 0; ch < 3; ++ch) {
                const double v = c[ch] + common + noise.normal() * 0.3 * s.noise_amp;
                img.at(x, y, ch) = static_cast<std::uint8_t>(std::lround(std::clamp(v, kSceneLo, kSceneHi)));
            }
        }
    }
    return img;
}

// 3x5 glyph blocks drawn as random bit patterns.
void draw_text(Raster& img, int x0, int y0, int x1, int y1, const Rgb& color, Rng& rng)
{
    const int scale = std::max(1, img.width() / 64);
    for (int y = y0; y + 5 * scale <= y1; y += 7 * scale) {
        for (int x = x0; x + 3 * scale <= x1; x += 4 * scale) {
            if (rng.bernoulli(0.15)) {
                continue;  // word gap
            }
            const auto bits = rng.below(1 << 15);
            for (int gy = 0; gy < 5 * scale; ++gy) {
                for (int gx = 0; gx < 3 * scale; ++gx) {
                    if ((bits >> ((gy / scale) * 3 + gx / scale)) & 1u) {
                        for (int ch = 0; ch < img.channels(); ++ch) {
                            img.at(x + gx, y + gy, ch) = static_cast<std::uint8_t>(color[ch]);
                        }
                    }
                }
            }
        }
    }
}

// Web-style palette: every channel sits in an extreme histogram bin.
Rgb palette_color(Rng& rng)
{
    static const Rgb colors[] = {{255, 255, 255}, {0, 0, 0},     {230, 0, 0},   {0, 70, 200},  {255, 215, 0},
                                 {0, 160, 70},    {245, 245, 245}, {255, 0, 255}, {0, 200, 230}, {20, 20, 20},
                                 {250, 110, 0},   {0, 0, 0}};
    Rgb c = colors[rng.below(std::size(colors))];
    for (auto& v : c) {
        v = v >= 128 ? 255 - static_cast<double>(rng.below(32)) : static_cast<double>(rng.below(32));
    }
    return c;
}

double luminance(const Rgb& c)
{
    return 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2];
}

void fill(Raster& img, int x0, int y0, int x1, int y1, const Rgb& c)
{
    for (int y = std::max(0, y0); y < std::min(img.height(), y1); ++y) {
        for (int x = std::max(0, x0); x < std::min(img.width(), x1); ++x) {
            for (int ch = 0; ch < 3; ++ch) {
                img.at(x, y, ch) = static_cast<std::uint8_t>(c[ch]);
            }
        }
    }
}

Raster resize_rgb(const Raster& img, int w, int h)
{
    Raster out(w, h, img.channels());
    for (int ch = 0; ch < img.channels(); ++ch) {
        LumaPlane p(img.width(), img.height());
        for (int y = 0; y < img.height(); ++y) {
            for (int x = 0; x < img.width(); ++x) {
                p.at(x, y) = img.at(x, y, ch);
            }
        }
        const auto r = resize_area(p, w, h);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                out.at(x, y, ch) = static_cast<std::uint8_t>(std::lround(std::clamp(r.at(x, y), 0.0, 255.0)));
            }
        }
    }
    return out;
}

const std::vector<std::string>& neutral_tags()
{
    static const std::vector<std::string> tags{"building", "rubble", "street", "house", "car",
                                               "tree",     "debris", "bridge", "road",  "roof"};
    return tags;
}

}  // namespace

namespace synth {

Raster damage_scene(double severity, std::uint64_t seed, int size)
{
    return render(make_scene(severity, seed), size);
}

Raster banner(std::uint64_t seed, int size)
{
    Rng rng(seed);
    Raster img(size, size, 3);
    const Rgb bg = palette_color(rng);
    fill(img, 0, 0, size, size, bg);
    const int n_blocks = static_cast<int>(rng.uniform_int(1, 3));
    for (int b = 0; b < n_blocks; ++b) {
        const int x0 = static_cast<int>(rng.below(size * 3 / 4));
        const int y0 = static_cast<int>(rng.below(size * 3 / 4));
        fill(img, x0, y0, x0 + static_cast<int>(rng.uniform_int(size / 6, size / 2)),
             y0 + static_cast<int>(rng.uniform_int(size / 10, size / 3)), palette_color(rng));
    }
    if (rng.bernoulli(0.4)) {
        const double cx = rng.uniform(0.2, 0.8) * size, cy = rng.uniform(0.2, 0.8) * size;
        const double r = rng.uniform(0.08, 0.2) * size;
        const Rgb c = palette_color(rng);
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) {
                    fill(img, x, y, x + 1, y + 1, c);
                }
            }
        }
    }
    const Rgb ink = luminance(bg) > 128 ? Rgb{10, 10, 10} : Rgb{250, 250, 250};
    const int rows = static_cast<int>(rng.uniform_int(1, 3));
    for (int r = 0; r < rows; ++r) {
        const int y0 = static_cast<int>(rng.below(size - size / 5));
        const int x0 = static_cast<int>(rng.below(size / 4));
        draw_text(img, x0, y0, size - static_cast<int>(rng.below(size / 4)), y0 + size / 5, ink, rng);
    }
    return img;
}

Raster perturb(const Raster& img, Perturbation p, std::uint64_t seed)
{
    Rng rng(seed);
    const int w = img.width();
    const int h = img.height();
    switch (p) {
    case Perturbation::Resize: {
        const double f = rng.bernoulli(0.5) ? rng.uniform(0.9, 0.95) : rng.uniform(1.05, 1.1);
        return resize_rgb(img, std::max(1, static_cast<int>(std::lround(w * f))),
                          std::max(1, static_cast<int>(std::lround(h * f))));
    }
    case Perturbation::Crop: {
        const int l = static_cast<int>(rng.below(w / 20 + 1));
        const int r = static_cast<int>(rng.below(w / 20 + 1));
        const int t = static_cast<int>(rng.below(h / 20 + 1));
        const int b = std::max(static_cast<int>(rng.below(h / 20 + 1)), (l + r + t) == 0 ? 1 : 0);
        Raster out(w - l - r, h - t - b, img.channels());
        for (int y = 0; y < out.height(); ++y) {
            for (int x = 0; x < out.width(); ++x) {
                for (int ch = 0; ch < img.channels(); ++ch) {
                    out.at(x, y, ch) = img.at(x + l, y + t, ch);
                }
            }
        }
        return out;
    }
    case Perturbation::Brightness: {
        const double f = rng.bernoulli(0.5) ? rng.uniform(0.93, 0.97) : rng.uniform(1.03, 1.07);
        Raster out = img;
        for (auto& v : out.data()) {
            v = static_cast<std::uint8_t>(std::lround(std::clamp(v * f, 0.0, 255.0)));
        }
        return out;
    }
    case Perturbation::TextBand: {
        Raster out = img;
        const int band = std::max(2, static_cast<int>(std::lround(h * rng.uniform(0.09, 0.14))));
        const bool top = rng.bernoulli(0.5);
        const int y0 = top ? 0 : h - band;
        const Rgb bg = rng.bernoulli(0.5) ? Rgb{250, 250, 250} : Rgb{8, 8, 8};
        fill(out, 0, y0, w, y0 + band, bg);
        const Rgb ink = bg[0] > 128 ? Rgb{10, 10, 10} : Rgb{250, 250, 250};
        draw_text(out, 1, y0 + 1, w - 1, y0 + band, ink, rng);
        return out;
    }
    case Perturbation::Blur: {
        Raster out = img;
        const int r = 1;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                for (int ch = 0; ch < img.channels(); ++ch) {
                    int sum = 0, count = 0;
                    for (int dy = -r; dy <= r; ++dy) {
                        for (int dx = -r; dx <= r; ++dx) {
                            const int xx = x + dx, yy = y + dy;
                            if (xx >= 0 && yy >= 0 && xx < w && yy < h) {
                                sum += img.at(xx, yy, ch);
                                ++count;
                            }
                        }
                    }
                    out.at(x, y, ch) = static_cast<std::uint8_t>((sum + count / 2) / count);
                }
            }
        }
        return out;
    }
    }
    return img;
}

}  // namespace synth

std::string_view to_string(Perturbation p)
{
    switch (p) {
    case Perturbation::Resize: return "resize";
    case Perturbation::Crop: return "crop";
    case Perturbation::Brightness: return "brightness";
    case Perturbation::TextBand: return "text-band";
    case Perturbation::Blur: return "blur";
    }
    return "?";
}

std::optional<Perturbation> parse_perturbation(std::string_view s)
{
    for (auto p : all_perturbations()) {
        if (to_string(p) == s) {
            return p;
        }
    }
    return std::nullopt;
}

const std::vector<Perturbation>& all_perturbations()
{
    static const std::vector<Perturbation> all{Perturbation::Resize, Perturbation::Crop, Perturbation::Brightness,
                                               Perturbation::TextBand, Perturbation::Blur};
    return all;
}

void CorpusSpec::validate() const
{
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (n_severe < 0 || n_mild < 0 || n_none < 0 || n_irrelevant < 0 || n_truncated < 0 || n_missing < 0) {
        throw std::invalid_argument("corpus counts must be non-negative");
    }
    if (!in_unit(duplicate_rate) || duplicate_rate >= 1.0 || !in_unit(exact_repost_share) || !in_unit(sibling_rate)) {
        throw std::invalid_argument("corpus rates must lie in [0, 1] (duplicate_rate below 1)");
    }
    if (image_size < 32 || image_size > 1024) {
        throw std::invalid_argument("image_size must lie in [32, 1024]");
    }
    if (threshold_d < 1 || threshold_d > 44) {
        throw std::invalid_argument("threshold_d must lie in [1, 44]");
    }
    if (n_severe + n_mild + n_none + n_irrelevant == 0 && duplicate_rate > 0.0) {
        throw std::invalid_argument("duplicates need at least one distinct image");
    }
}

nlohmann::json to_json(const CorpusSpec& s)
{
    nlohmann::json p = nlohmann::json::array();
    for (auto x : s.perturbations) {
        p.push_back(std::string(to_string(x)));
    }
    return {{"seed", s.seed},
            {"n_severe", s.n_severe},
            {"n_mild", s.n_mild},
            {"n_none", s.n_none},
            {"n_irrelevant", s.n_irrelevant},
            {"duplicate_rate", s.duplicate_rate},
            {"perturbations", p},
            {"exact_repost_share", s.exact_repost_share},
            {"sibling_rate", s.sibling_rate},
            {"n_truncated", s.n_truncated},
            {"n_missing", s.n_missing},
            {"image_size", s.image_size},
            {"threshold_d", s.threshold_d}};
}

CorpusSpec corpus_spec_from_json(const nlohmann::json& j)
{
    if (!j.is_object()) {
        throw std::invalid_argument("corpus spec must be a JSON object");
    }
    static const std::vector<std::string> known{"seed",        "n_severe",           "n_mild",       "n_none",
                                                "n_irrelevant", "duplicate_rate",     "perturbations", "exact_repost_share",
                                                "sibling_rate", "n_truncated",        "n_missing",    "image_size",
                                                "threshold_d"};
    for (const auto& [key, value] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw std::invalid_argument("unknown corpus spec field '" + key + "'");
        }
    }
    CorpusSpec s;
    s.seed = j.value("seed", s.seed);
    s.n_severe = j.value("n_severe", s.n_severe);
    s.n_mild = j.value("n_mild", s.n_mild);
    s.n_none = j.value("n_none", s.n_none);
    s.n_irrelevant = j.value("n_irrelevant", s.n_irrelevant);
    s.duplicate_rate = j.value("duplicate_rate", s.duplicate_rate);
    s.exact_repost_share = j.value("exact_repost_share", s.exact_repost_share);
    s.sibling_rate = j.value("sibling_rate", s.sibling_rate);
    s.n_truncated = j.value("n_truncated", s.n_truncated);
    s.n_missing = j.value("n_missing", s.n_missing);
    s.image_size = j.value("image_size", s.image_size);
    s.threshold_d = j.value("threshold_d", s.threshold_d);
    if (j.contains("perturbations")) {
        s.perturbations.clear();
        for (const auto& p : j["perturbations"]) {
            const auto parsed = parse_perturbation(p.get<std::string>());
            if (!parsed) {
                throw std::invalid_argument("unknown perturbation '" + p.get<std::string>() + "'");
            }
            s.perturbations.push_back(*parsed);
        }
    }
    s.validate();
    return s;
}

namespace {

struct Draft {
    Raster image;
    PerceptualHash hash;
    std::optional<DamageLabel> damage;
    Relevance relevance = Relevance::Relevant;
    std::vector<std::string> tags;
    CorpusTruth truth;
    int base = -1;  // index into the distinct-image list, or -1
    double time = 0;
    Corruption corruption = Corruption::None;
};

constexpr int kMaxDraws = 200;

}  // namespace

Corpus generate_corpus(const CorpusSpec& spec)
{
    spec.validate();
    Rng rng(spec.seed);
    const int size = spec.image_size;
    const int td = spec.threshold_d;

    // Distinct images, class order shuffled so arrival mixes classes.
    std::vector<int> kinds;  // 0 severe, 1 mild, 2 none, 3 irrelevant
    kinds.insert(kinds.end(), spec.n_severe, 0);
    kinds.insert(kinds.end(), spec.n_mild, 1);
    kinds.insert(kinds.end(), spec.n_none, 2);
    kinds.insert(kinds.end(), spec.n_irrelevant, 3);
    rng.shuffle(std::span<int>(kinds));

    static constexpr double kPrototype[3] = {0.85, 0.5, 0.12};
    std::vector<Draft> bases;
    std::vector<std::uint64_t> base_hashes;
    std::vector<Scene> scenes;  // per base; empty severity for banners
    auto far_from_bases = [&](PerceptualHash h, int except, int min_distance) {
        for (std::size_t i = 0; i < base_hashes.size(); ++i) {
            if (static_cast<int>(i) != except && std::popcount(base_hashes[i] ^ h.bits) < min_distance) {
                return false;
            }
        }
        return true;
    };

    for (std::size_t b = 0; b < kinds.size(); ++b) {
        const int kind = kinds[b];
        Draft d;
        d.truth.group = [&] {
            char buf[32];
            std::snprintf(buf, sizeof buf, "g%05zu", b);
            return std::string(buf);
        }();
        d.truth.clarity = rng.uniform(0.3, 1.0);
        Scene scene;
        bool placed = false;

        // Similar-but-distinct view of an earlier scene of the same class.
        if (kind < 3 && rng.bernoulli(spec.sibling_rate)) {
            std::vector<int> candidates;
            for (std::size_t i = 0; i < bases.size(); ++i) {
                if (kinds[i] == kind && !bases[i].truth.sibling) {
                    candidates.push_back(static_cast<int>(i));
                }
            }
            if (!candidates.empty()) {
                const int parent = candidates[rng.below(candidates.size())];
                double strength = 0.5;
                for (int attempt = 0; attempt < 40 && !placed; ++attempt) {
                    Scene s = jitter_scene(scenes[parent], strength, rng.next());
                    Raster img = render(s, size);
                    const auto h = phash(img);
                    const int dist = hamming(h, bases[parent].hash);
                    if (dist <= td) {
                        strength = std::min(1.0, strength * 1.3);
                    } else if (dist > 2 * td) {
                        strength *= 0.75;
                    } else if (far_from_bases(h, parent, td + 1)) {
                        d.image = std::move(img);
                        d.hash = h;
                        d.truth.sibling = true;
                        d.truth.distance = dist;
                        d.truth.clarity = bases[parent].truth.clarity;
                        scene = s;
                        placed = true;
                    }
                }
            }
        }
        for (int attempt = 0; attempt < kMaxDraws && !placed; ++attempt) {
            if (kind < 3) {
                // Atypical images borrow part of their look from another class.
                const int other = (kind + 1 + static_cast<int>(rng.below(2))) % 3;
                const double q = d.truth.clarity;
                const double severity =
                    std::clamp(q * kPrototype[kind] + (1 - q) * kPrototype[other] + rng.normal() * 0.04, 0.0, 1.0);
                scene = make_scene(severity, rng.next());
                d.image = render(scene, size);
            } else {
                d.image = synth::banner(rng.next(), size);
            }
            d.hash = phash(d.image);
            placed = far_from_bases(d.hash, -1, td + 1);
        }
        if (!placed) {
            throw std::runtime_error("corpus generation could not place a distinct image; lower the counts");
        }
        if (kind < 3) {
            d.damage = static_cast<DamageLabel>(kind);
            d.relevance = Relevance::Relevant;
            const auto& tags = neutral_tags();
            d.tags = {tags[rng.below(tags.size())]};
        } else {
            d.damage = DamageLabel::None;
            d.relevance = Relevance::Irrelevant;
            const auto& tags = default_irrelevant_categories();
            d.tags = {tags[rng.below(tags.size())]};
            if (rng.bernoulli(0.3)) {
                const auto& extra = tags[rng.below(tags.size())];
                if (extra != d.tags.front()) {
                    d.tags.push_back(extra);
                }
            }
        }
        d.base = static_cast<int>(b);
        d.time = rng.uniform();
        base_hashes.push_back(d.hash.bits);
        scenes.push_back(scene);
        bases.push_back(std::move(d));
    }

    // Near-duplicates: iconic (high-clarity) images are reposted more often.
    const std::size_t n_base = bases.size();
    const auto n_dups = n_base == 0 ? std::size_t{0}
                                    : static_cast<std::size_t>(std::llround(static_cast<double>(n_base) * spec.duplicate_rate /
                                                                            (1.0 - spec.duplicate_rate)));
    std::vector<double> cumulative(n_base);
    double total_weight = 0;
    for (std::size_t i = 0; i < n_base; ++i) {
        total_weight += std::pow(bases[i].truth.clarity, 3.0);
        cumulative[i] = total_weight;
    }
    std::vector<Draft> dups;
    int violations = 0;
    for (std::size_t k = 0; k < n_dups; ++k) {
        const double u = rng.uniform() * total_weight;
        const auto parent = static_cast<std::size_t>(
            std::min<std::ptrdiff_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin(),
                                     static_cast<std::ptrdiff_t>(n_base) - 1));
        const Draft& src = bases[parent];
        Draft d;
        d.damage = src.damage;
        d.relevance = src.relevance;
        d.tags = src.tags;
        d.truth.group = src.truth.group;
        d.truth.original = false;
        d.truth.clarity = src.truth.clarity;
        d.time = src.time + (1.0 - src.time) * rng.uniform();
        bool placed = false;
        if (!spec.perturbations.empty() && !rng.bernoulli(spec.exact_repost_share)) {
            for (int attempt = 0; attempt < 30 && !placed; ++attempt) {
                std::vector<Perturbation> chosen;
                const int count = rng.bernoulli(0.3) ? 2 : 1;
                for (int c = 0; c < count; ++c) {
                    const auto p = spec.perturbations[rng.below(spec.perturbations.size())];
                    if (std::find(chosen.begin(), chosen.end(), p) == chosen.end()) {
                        chosen.push_back(p);
                    }
                }
                Raster img = src.image;
                for (auto p : chosen) {
                    img = synth::perturb(img, p, rng.next());
                }
                const auto h = phash(img);
                const int dist = hamming(h, src.hash);
                if (dist <= td && far_from_bases(h, static_cast<int>(parent), td + 1)) {
                    d.image = std::move(img);
                    d.hash = h;
                    d.truth.applied = std::move(chosen);
                    d.truth.distance = dist;
                    placed = true;
                }
            }
            if (!placed) {
                ++violations;
            }
        }
        if (!placed) {
            d.image = src.image;
            d.hash = src.hash;
        }
        d.base = static_cast<int>(parent);
        dups.push_back(std::move(d));
    }

    // Unusable records: truncated payloads and dangling locators.
    std::vector<Draft> broken;
    for (int i = 0; i < spec.n_truncated + spec.n_missing; ++i) {
        Draft d;
        const int kind = static_cast<int>(rng.below(3));
        d.damage = static_cast<DamageLabel>(kind);
        d.tags = {neutral_tags()[rng.below(neutral_tags().size())]};
        d.image = synth::damage_scene(kPrototype[kind], rng.next(), size);
        d.corruption = i < spec.n_truncated ? Corruption::Truncated : Corruption::Missing;
        d.truth.corruption = d.corruption;
        d.time = rng.uniform();
        broken.push_back(std::move(d));
    }

    // Arrival order: by time, originals before their copies on ties.
    struct Slot {
        double time;
        int tier;  // 0 distinct, 1 duplicate, 2 broken
        std::size_t index;
    };
    std::vector<Slot> order;
    for (std::size_t i = 0; i < bases.size(); ++i) {
        order.push_back({bases[i].time, 0, i});
    }
    for (std::size_t i = 0; i < dups.size(); ++i) {
        order.push_back({dups[i].time, 1, i});
    }
    for (std::size_t i = 0; i < broken.size(); ++i) {
        order.push_back({broken[i].time, 2, i});
    }
    std::stable_sort(order.begin(), order.end(), [](const Slot& a, const Slot& b) {
        return a.time != b.time ? a.time < b.time : a.tier < b.tier;
    });

    Corpus corpus;
    corpus.spec = spec;
    corpus.violations = violations;
    std::vector<int> base_position(bases.size(), -1);
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        const auto& slot = order[pos];
        Draft& d = slot.tier == 0 ? bases[slot.index] : (slot.tier == 1 ? dups[slot.index] : broken[slot.index]);
        char id[32];
        std::snprintf(id, sizeof id, "r%06zu", pos);
        ImageRecord rec;
        rec.id = id;
        rec.post_id = "p" + std::string(id + 1);
        rec.url = "images/" + rec.id + ".ppm";
        rec.received_at = 1500000000000LL + static_cast<std::int64_t>(pos) * 1000;
        rec.damage = d.damage;
        rec.relevance = d.corruption == Corruption::None ? std::optional(d.relevance) : std::nullopt;
        rec.object_tags = d.tags;
        CorpusTruth truth = d.truth;
        if (slot.tier == 0) {
            base_position[slot.index] = static_cast<int>(pos);
        } else if (slot.tier == 1) {
            truth.source = base_position[d.base];
        } else {
            char g[32];
            std::snprintf(g, sizeof g, "x%05zu", slot.index);
            truth.group = g;
        }
        if (d.corruption != Corruption::Missing) {
            rec.payload = encode_netpbm(d.image);
            if (d.corruption == Corruption::Truncated) {
                rec.payload.resize(rec.payload.size() / 2);
            }
        }
        if (d.corruption == Corruption::None) {
            rec.dup_group = truth.group;
        }
        corpus.records.push_back(std::move(rec));
        corpus.truth.push_back(std::move(truth));
    }
    return corpus;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir / "images");
    std::ofstream manifest(dir / "manifest.jsonl", std::ios::binary);
    if (!manifest) {
        throw std::runtime_error("cannot write " + (dir / "manifest.jsonl").string());
    }
    for (std::size_t i = 0; i < corpus.records.size(); ++i) {
        const auto& r = corpus.records[i];
        if (corpus.truth[i].corruption != Corruption::Missing) {
            std::ofstream img(dir / r.url, std::ios::binary);
            img.write(reinterpret_cast<const char*>(r.payload.data()), static_cast<std::streamsize>(r.payload.size()));
            if (!img) {
                throw std::runtime_error("cannot write " + (dir / r.url).string());
            }
        }
        auto j = record_to_json(r);
        j.erase("url");
        j["path"] = r.url;
        manifest << j.dump() << '\n';
    }
    std::ofstream(dir / "spec.json") << to_json(corpus.spec).dump(2) << '\n';
}

Corpus load_corpus(const std::filesystem::path& manifest)
{
    auto ingested = ingest_file(manifest);
    const FileFetcher fetcher(manifest.parent_path());
    Corpus corpus;
    const auto spec_path = manifest.parent_path() / "spec.json";
    if (std::filesystem::exists(spec_path)) {
        std::ifstream in(spec_path);
        corpus.spec = corpus_spec_from_json(nlohmann::json::parse(in));
    }
    std::unordered_map<std::string, int> first_of_group;
    for (auto& r : ingested.records) {
        CorpusTruth t;
        auto fetched = fetcher.fetch(r.url);
        if (fetched.ok) {
            r.payload = std::move(fetched.bytes);
        } else {
            t.corruption = Corruption::Missing;
        }
        const int pos = static_cast<int>(corpus.records.size());
        t.group = r.dup_group.value_or("solo-" + r.id);
        const auto [it, inserted] = first_of_group.emplace(t.group, pos);
        t.original = inserted;
        t.source = inserted ? -1 : it->second;
        corpus.records.push_back(std::move(r));
        corpus.truth.push_back(std::move(t));
    }
    return corpus;
}

std::vector<ExpectedRetention> expected_retention(const Corpus& corpus)
{
    std::vector<ExpectedRetention> rows;
    for (const auto& name : damage_classes()) {
        rows.push_back({name});
    }
    bool unlabeled = false;
    for (std::size_t i = 0; i < corpus.records.size(); ++i) {
        const auto& r = corpus.records[i];
        const auto& t = corpus.truth[i];
        if (!r.damage) {
            if (!unlabeled) {
                rows.push_back({"unlabeled"});
                unlabeled = true;
            }
        }
        auto& row = r.damage ? rows[static_cast<int>(*r.damage)] : rows.back();
        ++row.raw;
        if (t.corruption == Corruption::Missing) {
            ++row.fetch_failed;
            continue;
        }
        if (t.corruption == Corruption::Truncated) {
            ++row.decode_failed;
            continue;
        }
        if (r.relevance != Relevance::Relevant) {
            continue;
        }
        ++row.after_relevancy;
        if (t.original) {
            ++row.after_dedup;
        }
    }
    return rows;
}

}  // namespace crisisfilter
