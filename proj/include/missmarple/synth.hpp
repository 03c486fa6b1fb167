#ifndef MISSMARPLE_SYNTH_HPP
#define MISSMARPLE_SYNTH_HPP

#include <cstdint>
#include <string>

#include "missmarple/image.hpp"
#include "missmarple/manifest.hpp"

namespace mm {

// Coarse splices have hard edges and clashing color statistics; fine splices
// get feathered edges and a donor whose channel means are matched to the
// host background.
enum class Regime { Coarse, Fine };

std::string to_string(Regime r);
Regime regime_from_string(const std::string& s);

struct SynthConfig {
    int count_per_role = 10;   // authentic images and spliced images each
    int image_size = 128;
    int patch_size = 64;       // image_size must be >= 2 * patch_size
    Regime regime = Regime::Coarse;
    uint64_t seed = 1;

    float min_area_frac = 0.01f;  // donor area bounds relative to image area
    float max_area_frac = 0.40f;
    int feather_min = 3;          // fine-regime edge feather radius range
    int feather_max = 7;
    float color_match_eps = 8.0f; // fine regime: max |donor mean - bg mean|

    void validate() const;
};

struct SplicePair {
    Image authentic;
    Image spliced;
    Image mask;  // single channel, values exactly {0, 255}
};

// Deterministic in (config.seed, index). Coarse pairs differ from their
// authentic twin on exactly the mask-positive pixels.
SplicePair generate_pair(const SynthConfig& config, uint32_t index);

// Writes count_per_role authentic images (independent backgrounds, not the
// twins of the spliced set) plus count_per_role spliced images with masks,
// and a manifest listing all of them. Returns the manifest.
DatasetManifest generate_dataset(const SynthConfig& config, const std::string& out_dir);

} // namespace mm

#endif
