#ifndef MISSMARPLE_PATCHES_HPP
#define MISSMARPLE_PATCHES_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "missmarple/image.hpp"
#include "missmarple/manifest.hpp"
#include "missmarple/rng.hpp"
#include "missmarple/tensor.hpp"

namespace mm {

// One square patch. Raw bytes are kept so corpus files round-trip exactly;
// to_tensor() produces the [0,1]-normalized float view the network consumes.
struct PatchSample {
    uint8_t label = 0;      // 0 authentic, 1 spliced
    uint32_t image_id = 0;  // index into the source manifest
    uint32_t row = 0;       // top-left corner
    uint32_t col = 0;
    std::vector<uint8_t> pixels;  // size * size * 3, interleaved RGB

    Tensor to_tensor(int size) const;
};

struct CorpusImage {
    uint32_t id = 0;
    Role role = Role::Authentic;
    std::string image_path;
    std::string mask_path;
    bool test = false;  // held out of patch extraction
};

struct PatchCorpus {
    int patch_size = 64;
    std::vector<PatchSample> train;
    std::vector<PatchSample> val;
    std::vector<CorpusImage> images;

    std::vector<uint32_t> test_image_ids() const;
    size_t count(const std::vector<PatchSample>& split, uint8_t label) const;
};

struct CorpusConfig {
    float test_image_frac = 0.20f;  // images held out, stratified by role
    float train_frac = 0.70f;       // patch-level train share, stratified by label
};

// Every stride-aligned window whose mask-positive fraction (pixel > 127)
// is >= overlap_frac, labeled spliced. Windows are ordered by (row, col).
std::vector<PatchSample> extract_fake_patches(const Image& image, const Image& mask,
                                              uint32_t image_id, int size,
                                              float overlap_frac, int stride);

// `count` uniformly random fully-inside windows, labeled authentic.
std::vector<PatchSample> extract_authentic_patches(const Image& image, uint32_t image_id,
                                                   int count, int size, Rng& rng);

// Full pipeline: hold out ~test_image_frac of images per role, extract fake
// patches from the remaining spliced images, balance with per-image-capped
// authentic patches, split 70/30 by label. Pure in (manifest, config, seed).
PatchCorpus build_corpus(const DatasetManifest& manifest, const CorpusConfig& config,
                         uint64_t seed);

// Binary split file: magic "MMPC", version u16, patch size u16, count u32;
// per patch: label u8, image-id u32, row u32, col u32, raw pixels.
void save_mmpc(const std::vector<PatchSample>& samples, int patch_size, const std::string& path);
std::vector<PatchSample> load_mmpc(const std::string& path, int* patch_size_out = nullptr);

// Corpus = <prefix>.train.mmpc + <prefix>.val.mmpc + <prefix>.images.tsv.
void save_corpus(const PatchCorpus& corpus, const std::string& prefix);
PatchCorpus load_corpus(const std::string& prefix);

// Assemble samples[indices] into a [B,size,size,3] batch plus labels.
void make_batch(const std::vector<PatchSample>& samples, const std::vector<size_t>& indices,
                int size, Tensor& batch, std::vector<float>& labels);

} // namespace mm

#endif
