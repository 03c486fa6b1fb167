#include "missmarple/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "missmarple/error.hpp"
#include "missmarple/rng.hpp"

namespace fs = std::filesystem;

namespace mm {

std::string to_string(Regime r) { return r == Regime::Coarse ? "coarse" : "fine"; }

Regime regime_from_string(const std::string& s) {
    if (s == "coarse") return Regime::Coarse;
    if (s == "fine") return Regime::Fine;
    throw validation_error("unknown regime '" + s + "' (expected coarse|fine)");
}

void SynthConfig::validate() const {
    if (count_per_role < 1) throw validation_error("synth config: count_per_role must be >= 1");
    if (image_size < 2 * patch_size)
        throw validation_error("synth config: image size " + std::to_string(image_size) +
                               " must be >= 2x patch size " + std::to_string(patch_size));
    if (!(min_area_frac > 0.0f && min_area_frac < max_area_frac && max_area_frac <= 1.0f))
        throw validation_error("synth config: donor area bounds must satisfy 0 < min < max <= 1");
    if (regime == Regime::Fine && (feather_min < 1 || feather_max < feather_min))
        throw validation_error("synth config: fine regime needs feather radius >= 1");
}

namespace {

// Bilinear value noise over a coarse random lattice.
struct NoiseField {
    int cell = 16;
    int grid = 0;
    std::vector<float> lattice;

    static NoiseField make(int image_size, int cell, Rng& rng) {
        NoiseField f;
        f.cell = cell;
        f.grid = image_size / cell + 2;
        f.lattice.resize(static_cast<size_t>(f.grid) * f.grid);
        for (auto& v : f.lattice) v = rng.uniform();
        return f;
    }

    float at(int r, int c) const {
        float fr = static_cast<float>(r) / static_cast<float>(cell);
        float fc = static_cast<float>(c) / static_cast<float>(cell);
        int r0 = static_cast<int>(fr), c0 = static_cast<int>(fc);
        float tr = fr - static_cast<float>(r0), tc = fc - static_cast<float>(c0);
        auto v = [this](int y, int x) { return lattice[static_cast<size_t>(y) * grid + x]; };
        float top = v(r0, c0) * (1 - tc) + v(r0, c0 + 1) * tc;
        float bot = v(r0 + 1, c0) * (1 - tc) + v(r0 + 1, c0 + 1) * tc;
        return top * (1 - tr) + bot * tr;
    }
};

uint8_t clamp_byte(float v) {
    return static_cast<uint8_t>(std::clamp(v, 0.0f, 255.0f) + 0.5f);
}

// Smooth gradient + two octaves of band-limited noise per channel. Donor
// textures (alternate palette) invert the palette and shift their noise
// energy into a finer grain, so pasted regions differ from any host by
// texture spectrum even after channel means are matched.
Image make_background(int size, Rng& rng, bool alternate_palette) {
    float c0[3], c1[3];
    for (int ch = 0; ch < 3; ++ch) {
        c0[ch] = 40.0f + rng.uniform() * 160.0f;
        c1[ch] = 40.0f + rng.uniform() * 160.0f;
        if (alternate_palette) {
            c0[ch] = 255.0f - c0[ch];
            c1[ch] = 255.0f - c1[ch];
        }
    }
    float angle = rng.uniform() * 6.2831853f;
    float dy = std::sin(angle), dx = std::cos(angle);
    NoiseField coarse = NoiseField::make(size, alternate_palette ? 6 : 24, rng);
    NoiseField detail = NoiseField::make(size, alternate_palette ? 2 : 8, rng);
    float amp_coarse = alternate_palette ? 16.0f + rng.uniform() * 16.0f
                                         : 24.0f + rng.uniform() * 24.0f;
    float amp_detail = alternate_palette ? 24.0f + rng.uniform() * 16.0f
                                         : 8.0f + rng.uniform() * 8.0f;
    Image img(size, size, 3);
    const float norm = 1.0f / (std::abs(dy) + std::abs(dx) + 1e-6f) / static_cast<float>(size);
    for (int r = 0; r < size; ++r) {
        for (int c = 0; c < size; ++c) {
            float t = 0.5f + (dy * (r - size / 2) + dx * (c - size / 2)) * norm;
            t = std::clamp(t, 0.0f, 1.0f);
            float n = (coarse.at(r, c) - 0.5f) * amp_coarse + (detail.at(r, c) - 0.5f) * amp_detail;
            for (int ch = 0; ch < 3; ++ch)
                img.at(r, c, ch) = clamp_byte(c0[ch] * (1 - t) + c1[ch] * t + n);
        }
    }
    return img;
}

struct DonorShape {
    bool ellipse = false;
    // rect: [top, left, bottom, right); ellipse: center + semi-axes
    float cy = 0, cx = 0, ay = 0, ax = 0;
    int top = 0, left = 0, bottom = 0, right = 0;

    // Depth inside the shape in pixels; <= 0 outside.
    float depth(int r, int c) const {
        if (!ellipse) {
            float d = std::min(
                std::min(static_cast<float>(r) - top, static_cast<float>(bottom - 1 - r)),
                std::min(static_cast<float>(c) - left, static_cast<float>(right - 1 - c)));
            return d + 1.0f;  // boundary pixel counts as depth 1
        }
        float qy = (static_cast<float>(r) - cy) / ay;
        float qx = (static_cast<float>(c) - cx) / ax;
        float q = std::sqrt(qy * qy + qx * qx);
        return (1.0f - q) * std::min(ay, ax);
    }
};

DonorShape sample_shape(const SynthConfig& cfg, Rng& rng) {
    const int size = cfg.image_size;
    const float area = static_cast<float>(size) * static_cast<float>(size);
    DonorShape s;
    s.ellipse = rng.uniform() < 0.5f;
    float target = cfg.min_area_frac +
                   rng.uniform() * (cfg.max_area_frac - cfg.min_area_frac) * 0.8f;
    float target_px = target * area;
    if (!s.ellipse) {
        float aspect = 0.5f + rng.uniform();  // [0.5, 1.5)
        int h = std::max(8, static_cast<int>(std::sqrt(target_px * aspect)));
        int w = std::max(8, static_cast<int>(target_px / static_cast<float>(h)));
        h = std::min(h, size - 4);
        w = std::min(w, size - 4);
        s.top = 2 + rng.uniform_int(size - h - 3);
        s.left = 2 + rng.uniform_int(size - w - 3);
        s.bottom = s.top + h;
        s.right = s.left + w;
    } else {
        float aspect = 0.6f + rng.uniform() * 0.8f;
        float ay = std::sqrt(target_px * aspect / 3.14159265f);
        float ax = target_px / (3.14159265f * ay);
        ay = std::clamp(ay, 5.0f, static_cast<float>(size) / 2.0f - 3.0f);
        ax = std::clamp(ax, 5.0f, static_cast<float>(size) / 2.0f - 3.0f);
        s.ay = ay;
        s.ax = ax;
        s.cy = ay + 2 + rng.uniform() * (size - 2 * ay - 4);
        s.cx = ax + 2 + rng.uniform() * (size - 2 * ax - 4);
    }
    return s;
}

} // namespace

SplicePair generate_pair(const SynthConfig& config, uint32_t index) {
    config.validate();
    const int size = config.image_size;
    const long min_px = static_cast<long>(config.min_area_frac * size * size);
    const long max_px = static_cast<long>(config.max_area_frac * size * size);
    Rng rng(config.seed, hash_combine(hash_str("pair"), index));

    SplicePair out;
    out.authentic = make_background(size, rng, /*alternate_palette=*/false);
    Image donor_texture = make_background(size, rng, /*alternate_palette=*/true);

    for (int attempt = 0;; ++attempt) {
        if (attempt >= 100)
            throw runtime_error("donor shape degenerate after 100 attempts (pair " +
                                std::to_string(index) + ")");
        DonorShape shape = sample_shape(config, rng);
        int feather = 0;
        if (config.regime == Regime::Fine)
            feather = config.feather_min +
                      rng.uniform_int(config.feather_max - config.feather_min + 1);

        // The mask marks the substantive pasted region: full donor coverage
        // in the coarse regime, the >= half-covered core under feathering.
        Image mask(size, size, 1, 0);
        long area = 0;
        for (int r = 0; r < size; ++r)
            for (int c = 0; c < size; ++c) {
                float d = shape.depth(r, c);
                bool core = config.regime == Regime::Coarse
                                ? d > 0.0f
                                : d >= static_cast<float>(feather) * 0.5f;
                if (core) {
                    mask.at(r, c, 0) = 255;
                    ++area;
                }
            }
        if (area < std::max(1L, min_px) || area > max_px) continue;

        Image spliced = out.authentic;
        if (config.regime == Regime::Coarse) {
            for (int r = 0; r < size; ++r)
                for (int c = 0; c < size; ++c) {
                    if (mask.at(r, c, 0) != 255) continue;
                    for (int ch = 0; ch < 3; ++ch) {
                        uint8_t v = donor_texture.at(r, c, ch);
                        // hard contract: every masked pixel must differ
                        if (v == out.authentic.at(r, c, ch)) v = v >= 128 ? v - 16 : v + 16;
                        spliced.at(r, c, ch) = v;
                    }
                }
        } else {
            // Match donor channel means to the host background over the
            // donor's core, then alpha-composite with a feathered edge.
            double donor_mean[3] = {0, 0, 0}, bg_mean[3] = {0, 0, 0};
            for (int r = 0; r < size; ++r)
                for (int c = 0; c < size; ++c) {
                    if (mask.at(r, c, 0) != 255) continue;
                    for (int ch = 0; ch < 3; ++ch) {
                        donor_mean[ch] += donor_texture.at(r, c, ch);
                        bg_mean[ch] += out.authentic.at(r, c, ch);
                    }
                }
            float shift[3];
            for (int ch = 0; ch < 3; ++ch)
                shift[ch] = static_cast<float>((bg_mean[ch] - donor_mean[ch]) /
                                               static_cast<double>(area));
            for (int r = 0; r < size; ++r)
                for (int c = 0; c < size; ++c) {
                    float d = shape.depth(r, c);
                    float alpha = std::clamp(d / static_cast<float>(feather), 0.0f, 1.0f);
                    if (alpha <= 0.0f) continue;
                    for (int ch = 0; ch < 3; ++ch) {
                        float dv = std::clamp(
                            static_cast<float>(donor_texture.at(r, c, ch)) + shift[ch], 0.0f,
                            255.0f);
                        float base = out.authentic.at(r, c, ch);
                        spliced.at(r, c, ch) = clamp_byte(alpha * dv + (1 - alpha) * base);
                    }
                }
        }
        out.spliced = std::move(spliced);
        out.mask = std::move(mask);
        return out;
    }
}

DatasetManifest generate_dataset(const SynthConfig& config, const std::string& out_dir) {
    config.validate();
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw runtime_error("cannot create output directory " + out_dir + ": " + ec.message());

    DatasetManifest manifest;
    manifest.name = "synth-" + to_string(config.regime);
    manifest.patch_size = config.patch_size;

    char buf[64];
    // Authentic images come from their own salt so no spliced twin leaks in.
    for (int i = 0; i < config.count_per_role; ++i) {
        Rng rng(config.seed, hash_combine(hash_str("authentic-image"), static_cast<uint64_t>(i)));
        Image img = make_background(config.image_size, rng, false);
        std::snprintf(buf, sizeof(buf), "auth_%03d.ppm", i);
        std::string path = (fs::path(out_dir) / buf).string();
        write_image(img, path);
        manifest.entries.push_back({Role::Authentic, path, ""});
    }
    for (int i = 0; i < config.count_per_role; ++i) {
        SplicePair pair = generate_pair(config, static_cast<uint32_t>(i));
        std::snprintf(buf, sizeof(buf), "splice_%03d.ppm", i);
        std::string image_path = (fs::path(out_dir) / buf).string();
        std::snprintf(buf, sizeof(buf), "splice_%03d_mask.pgm", i);
        std::string mask_path = (fs::path(out_dir) / buf).string();
        write_image(pair.spliced, image_path);
        write_image(pair.mask, mask_path);
        manifest.entries.push_back({Role::Spliced, image_path, mask_path});
    }
    save_manifest(manifest, (fs::path(out_dir) / "manifest.txt").string());
    return manifest;
}

} // namespace mm
