#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "missmarple/error.hpp"
#include "missmarple/patches.hpp"
#include "missmarple/synth.hpp"

#include "helpers.hpp"

using namespace mm;

namespace {

Image noise_rgb(int side, uint64_t seed) {
    Rng rng(seed);
    Image img(side, side, 3);
    for (auto& p : img.pixels) p = static_cast<uint8_t>(rng.uniform_int(256));
    return img;
}

Image rect_mask(int side, int top, int left, int h, int w) {
    Image mask(side, side, 1);
    for (int r = top; r < top + h; ++r)
        for (int c = left; c < left + w; ++c) mask.at(r, c, 0) = 255;
    return mask;
}

// Independent oracle: enumerate stride-aligned windows and count positive
// mask pixels directly.
std::vector<std::pair<int, int>> oracle_fake_corners(const Image& mask, int size,
                                                     float overlap, int stride) {
    std::vector<std::pair<int, int>> corners;
    for (int r = 0; r + size <= mask.height; r += stride)
        for (int c = 0; c + size <= mask.width; c += stride) {
            long count = 0;
            for (int y = r; y < r + size; ++y)
                for (int x = c; x < c + size; ++x)
                    if (mask.at(y, x, 0) > 127) ++count;
            if (static_cast<double>(count) >=
                static_cast<double>(overlap) * size * size)
                corners.emplace_back(r, c);
        }
    return corners;
}

// Ten-image manifest written from generated synthetic data.
DatasetManifest small_dataset(const mmtest::ScratchDir& dir, int per_role, uint64_t seed) {
    SynthConfig config;
    config.count_per_role = per_role;
    config.image_size = 128;
    config.regime = Regime::Coarse;
    config.seed = seed;
    return generate_dataset(config, dir.path().string());
}

} // namespace

TEST_CASE("saturated mask marks every window as fake") {
    Image img = noise_rgb(128, 1);
    Image mask(128, 128, 1, 255);
    auto patches = extract_fake_patches(img, mask, 7, 64, 0.4f, 32);
    CHECK(patches.size() == 9);  // 3x3 grid of 64px windows at stride 32
    for (const auto& p : patches) {
        CHECK(p.label == 1);
        CHECK(p.image_id == 7);
        CHECK(p.pixels.size() == 64u * 64u * 3u);
    }
    // ordered by (row, col)
    CHECK(patches.front().row == 0);
    CHECK(patches.front().col == 0);
    CHECK(patches.back().row == 64);
    CHECK(patches.back().col == 64);
}

TEST_CASE("empty mask yields no fake patches") {
    Image img = noise_rgb(128, 2);
    Image mask(128, 128, 1, 0);
    CHECK(extract_fake_patches(img, mask, 0, 64, 0.4f, 32).empty());
}

TEST_CASE("fake extraction matches the window-intersection oracle") {
    Image img = noise_rgb(128, 3);
    // centered 64x64 square: offsets chosen so fractional overlaps vary
    Image mask = rect_mask(128, 32, 32, 64, 64);

    for (float overlap : {0.15f, 0.25f, 0.4f, 0.6f, 1.0f}) {
        auto oracle = oracle_fake_corners(mask, 64, overlap, 32);
        auto got = extract_fake_patches(img, mask, 0, 64, overlap, 32);
        REQUIRE(got.size() == oracle.size());
        for (size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].row == static_cast<uint32_t>(oracle[i].first));
            CHECK(got[i].col == static_cast<uint32_t>(oracle[i].second));
        }
    }
}

TEST_CASE("fake patch pixels are verbatim crops") {
    Image img = noise_rgb(128, 4);
    Image mask = rect_mask(128, 0, 0, 64, 64);
    auto patches = extract_fake_patches(img, mask, 0, 64, 0.9f, 32);
    REQUIRE(!patches.empty());
    const PatchSample& p = patches.front();
    for (int r = 0; r < 64; ++r)
        for (int c = 0; c < 64; ++c)
            for (int ch = 0; ch < 3; ++ch)
                REQUIRE(p.pixels[(static_cast<size_t>(r) * 64 + c) * 3 + ch] ==
                        img.at(static_cast<int>(p.row) + r, static_cast<int>(p.col) + c, ch));
}

TEST_CASE("irregular mask shapes follow the oracle too") {
    Image img = noise_rgb(96, 5);
    Image mask(96, 96, 1);
    Rng rng(6);
    // sprinkle random blobs
    for (int i = 0; i < 12; ++i) {
        int top = rng.uniform_int(80), left = rng.uniform_int(80);
        int h = 4 + rng.uniform_int(16), w = 4 + rng.uniform_int(16);
        for (int r = top; r < std::min(96, top + h); ++r)
            for (int c = left; c < std::min(96, left + w); ++c) mask.at(r, c, 0) = 255;
    }
    auto oracle = oracle_fake_corners(mask, 32, 0.2f, 16);
    auto got = extract_fake_patches(img, mask, 0, 32, 0.2f, 16);
    REQUIRE(got.size() == oracle.size());
    for (size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].row == static_cast<uint32_t>(oracle[i].first));
        CHECK(got[i].col == static_cast<uint32_t>(oracle[i].second));
    }
}

TEST_CASE("extraction validates dimensions") {
    Image img = noise_rgb(64, 7);
    Image mask(32, 32, 1, 255);  // mismatched mask size
    CHECK_THROWS_AS(extract_fake_patches(img, mask, 0, 64, 0.4f, 32), Error);

    Image small = noise_rgb(32, 8);
    Image small_mask(32, 32, 1, 255);
    CHECK_THROWS_AS(extract_fake_patches(small, small_mask, 0, 64, 0.4f, 32), Error);
    CHECK_THROWS_AS(extract_fake_patches(img, mask, 0, 64, 1.5f, 32), Error);
}

TEST_CASE("authentic patches are uniform, in-bounds, deterministic") {
    Image img = noise_rgb(128, 9);
    Rng a(10), b(10);
    auto first = extract_authentic_patches(img, 3, 24, 64, a);
    auto second = extract_authentic_patches(img, 3, 24, 64, b);
    REQUIRE(first.size() == 24);
    std::set<std::pair<uint32_t, uint32_t>> corners;
    for (size_t i = 0; i < first.size(); ++i) {
        CHECK(first[i].label == 0);
        CHECK(first[i].row <= 64);
        CHECK(first[i].col <= 64);
        CHECK(first[i].row == second[i].row);
        CHECK(first[i].col == second[i].col);
        corners.insert({first[i].row, first[i].col});
    }
    CHECK(corners.size() > 8);  // corners actually vary
}

TEST_CASE("corpus build balances labels and splits 70/30") {
    mmtest::ScratchDir dir("corpus_balance");
    DatasetManifest manifest = small_dataset(dir, 10, 77);
    manifest.overlap_frac = 0.3f;

    PatchCorpus corpus = build_corpus(manifest, CorpusConfig{}, 5);

    size_t fake = corpus.count(corpus.train, 1) + corpus.count(corpus.val, 1);
    size_t auth = corpus.count(corpus.train, 0) + corpus.count(corpus.val, 0);
    REQUIRE(fake > 0);

    // authentic capped per image at ceil(fake / n_authentic_images)
    size_t n_auth_images = 0;
    for (const auto& im : corpus.images)
        if (im.role == Role::Authentic && !im.test) ++n_auth_images;
    size_t cap = (fake + n_auth_images - 1) / n_auth_images;
    CHECK(auth == cap * n_auth_images);
    CHECK(auth >= fake);
    CHECK(auth < fake + n_auth_images);

    // 70/30 split per label, rounded to nearest
    for (uint8_t label : {uint8_t{0}, uint8_t{1}}) {
        size_t train_n = corpus.count(corpus.train, label);
        size_t total = train_n + corpus.count(corpus.val, label);
        CHECK(train_n == static_cast<size_t>(std::lround(0.7 * static_cast<double>(total))));
    }
}

TEST_CASE("test images contribute no patches") {
    mmtest::ScratchDir dir("corpus_leak");
    DatasetManifest manifest = small_dataset(dir, 10, 78);
    PatchCorpus corpus = build_corpus(manifest, CorpusConfig{}, 6);

    auto test_ids = corpus.test_image_ids();
    CHECK(test_ids.size() == 4);  // 20% of 10+10, stratified: 2 per role
    std::set<uint32_t> held(test_ids.begin(), test_ids.end());
    for (const auto* split : {&corpus.train, &corpus.val})
        for (const auto& p : *split) CHECK(held.count(p.image_id) == 0);

    // stratified by role
    int spliced_held = 0, authentic_held = 0;
    for (const auto& im : corpus.images)
        if (im.test) (im.role == Role::Spliced ? spliced_held : authentic_held)++;
    CHECK(spliced_held == 2);
    CHECK(authentic_held == 2);
}

TEST_CASE("corpus build is pure in (manifest, config, seed)") {
    mmtest::ScratchDir dir("corpus_pure");
    DatasetManifest manifest = small_dataset(dir, 6, 79);
    PatchCorpus a = build_corpus(manifest, CorpusConfig{}, 9);
    PatchCorpus b = build_corpus(manifest, CorpusConfig{}, 9);
    REQUIRE(a.train.size() == b.train.size());
    for (size_t i = 0; i < a.train.size(); ++i) {
        CHECK(a.train[i].image_id == b.train[i].image_id);
        CHECK(a.train[i].row == b.train[i].row);
        CHECK(a.train[i].pixels == b.train[i].pixels);
    }

    PatchCorpus c = build_corpus(manifest, CorpusConfig{}, 10);
    bool differs = a.train.size() != c.train.size();
    for (size_t i = 0; !differs && i < a.train.size(); ++i)
        differs = !(a.train[i].image_id == c.train[i].image_id && a.train[i].row == c.train[i].row &&
                    a.train[i].col == c.train[i].col);
    CHECK(differs);
}

TEST_CASE("splits come back sorted by origin") {
    mmtest::ScratchDir dir("corpus_sorted");
    DatasetManifest manifest = small_dataset(dir, 8, 80);
    PatchCorpus corpus = build_corpus(manifest, CorpusConfig{}, 11);
    for (const auto* split : {&corpus.train, &corpus.val}) {
        for (size_t i = 1; i < split->size(); ++i) {
            const auto& a = (*split)[i - 1];
            const auto& b = (*split)[i];
            auto ka = std::make_tuple(a.image_id, a.row, a.col);
            auto kb = std::make_tuple(b.image_id, b.row, b.col);
            CHECK(ka <= kb);
        }
    }
}

TEST_CASE("mmpc files round-trip and validate") {
    mmtest::ScratchDir dir("mmpc");
    Image img = noise_rgb(128, 12);
    Image mask(128, 128, 1, 255);
    auto patches = extract_fake_patches(img, mask, 3, 64, 0.4f, 32);

    save_mmpc(patches, 64, dir / "p.mmpc");
    int size = 0;
    auto back = load_mmpc(dir / "p.mmpc", &size);
    CHECK(size == 64);
    REQUIRE(back.size() == patches.size());
    for (size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].label == patches[i].label);
        CHECK(back[i].image_id == patches[i].image_id);
        CHECK(back[i].row == patches[i].row);
        CHECK(back[i].col == patches[i].col);
        CHECK(back[i].pixels == patches[i].pixels);
    }

    // corrupted magic
    std::string bytes = mmtest::read_file_bytes(dir / "p.mmpc");
    bytes[0] = 'X';
    {
        std::ofstream out(dir / "bad.mmpc", std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    CHECK_THROWS_AS(load_mmpc(dir / "bad.mmpc"), Error);

    // trailing bytes
    bytes[0] = 'M';
    bytes += '\0';
    {
        std::ofstream out(dir / "fat.mmpc", std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    CHECK_THROWS_AS(load_mmpc(dir / "fat.mmpc"), Error);
}

TEST_CASE("whole corpus round-trips through its three files") {
    mmtest::ScratchDir dir("corpus_rt");
    DatasetManifest manifest = small_dataset(dir, 6, 81);
    PatchCorpus corpus = build_corpus(manifest, CorpusConfig{}, 13);
    save_corpus(corpus, dir / "corpus");
    PatchCorpus back = load_corpus(dir / "corpus");
    CHECK(back.patch_size == corpus.patch_size);
    CHECK(back.train.size() == corpus.train.size());
    CHECK(back.val.size() == corpus.val.size());
    REQUIRE(back.images.size() == corpus.images.size());
    for (size_t i = 0; i < back.images.size(); ++i) {
        CHECK(back.images[i].id == corpus.images[i].id);
        CHECK(back.images[i].role == corpus.images[i].role);
        CHECK(back.images[i].test == corpus.images[i].test);
        CHECK(back.images[i].image_path == corpus.images[i].image_path);
    }
}

TEST_CASE("corpus writes are byte-stable") {
    mmtest::ScratchDir dir("corpus_stable");
    DatasetManifest manifest = small_dataset(dir, 6, 82);
    PatchCorpus corpus = build_corpus(manifest, CorpusConfig{}, 14);
    save_corpus(corpus, dir / "one");
    save_corpus(corpus, dir / "two");
    for (const char* suffix : {".train.mmpc", ".val.mmpc", ".images.tsv"})
        CHECK(mmtest::file_bytes_equal(dir / (std::string("one") + suffix),
                                       dir / (std::string("two") + suffix)));
}

TEST_CASE("patch tensors are [0,1] normalized") {
    PatchSample p;
    p.pixels.assign(4 * 4 * 3, 0);
    p.pixels[0] = 255;
    p.pixels[1] = 51;
    Tensor t = p.to_tensor(4);
    REQUIRE(t.shape() == std::vector<int>{4, 4, 3});
    CHECK(t[0] == doctest::Approx(1.0f));
    CHECK(t[1] == doctest::Approx(0.2f));
    CHECK(t[2] == 0.0f);
}

TEST_CASE("make_batch assembles the requested samples") {
    Image img = noise_rgb(128, 15);
    Image mask(128, 128, 1, 255);
    auto patches = extract_fake_patches(img, mask, 0, 64, 0.4f, 32);
    REQUIRE(patches.size() >= 3);

    Tensor batch;
    std::vector<float> labels;
    make_batch(patches, {2, 0}, 64, batch, labels);
    REQUIRE(batch.shape() == std::vector<int>{2, 64, 64, 3});
    CHECK(labels == std::vector<float>{1.0f, 1.0f});
    Tensor expect = patches[2].to_tensor(64);
    for (size_t i = 0; i < expect.size(); ++i) REQUIRE(batch[i] == expect[i]);
}

TEST_CASE("corpus build rejects manifests without both roles") {
    DatasetManifest empty;
    CHECK_THROWS_AS(build_corpus(empty, CorpusConfig{}, 1), Error);
}
