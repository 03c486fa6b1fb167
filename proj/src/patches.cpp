#include "missmarple/patches.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "missmarple/error.hpp"

namespace mm {

namespace {

constexpr char kMagic[4] = {'M', 'M', 'P', 'C'};
constexpr uint16_t kVersion = 1;

void write_u16(std::ostream& os, uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 2);
}

void write_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}

uint16_t read_u16(std::istream& is, const std::string& path) {
    unsigned char b[2];
    if (!is.read(reinterpret_cast<char*>(b), 2))
        throw validation_error("truncated corpus file: " + path);
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

uint32_t read_u32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw validation_error("truncated corpus file: " + path);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
}

void copy_window(const Image& image, int row, int col, int size, std::vector<uint8_t>& out) {
    out.resize(static_cast<size_t>(size) * size * 3);
    for (int r = 0; r < size; ++r)
        std::memcpy(out.data() + static_cast<size_t>(r) * size * 3,
                    image.pixels.data() +
                        ((static_cast<size_t>(row + r) * image.width) + col) * 3,
                    static_cast<size_t>(size) * 3);
}

} // namespace

Tensor PatchSample::to_tensor(int size) const {
    Tensor t({size, size, 3});
    for (size_t i = 0; i < pixels.size(); ++i) t[i] = static_cast<float>(pixels[i]) / 255.0f;
    return t;
}

std::vector<uint32_t> PatchCorpus::test_image_ids() const {
    std::vector<uint32_t> ids;
    for (const auto& im : images)
        if (im.test) ids.push_back(im.id);
    return ids;
}

size_t PatchCorpus::count(const std::vector<PatchSample>& split, uint8_t label) const {
    size_t n = 0;
    for (const auto& s : split)
        if (s.label == label) ++n;
    return n;
}

std::vector<PatchSample> extract_fake_patches(const Image& image, const Image& mask,
                                              uint32_t image_id, int size,
                                              float overlap_frac, int stride) {
    if (image.channels != 3)
        throw validation_error("fake-patch extraction expects RGB, got " +
                               std::to_string(image.channels) + " channels");
    if (mask.channels != 1)
        throw validation_error("mask must be single-channel, got " +
                               std::to_string(mask.channels));
    if (mask.width != image.width || mask.height != image.height)
        throw validation_error("mask " + std::to_string(mask.width) + "x" +
                               std::to_string(mask.height) + " does not match image " +
                               std::to_string(image.width) + "x" + std::to_string(image.height));
    if (size > image.width || size > image.height)
        throw validation_error("patch size " + std::to_string(size) + " exceeds image " +
                               std::to_string(image.width) + "x" + std::to_string(image.height));
    if (!(overlap_frac > 0.0f && overlap_frac <= 1.0f))
        throw validation_error("overlap fraction must be in (0,1]");
    if (stride < 1) throw validation_error("stride must be >= 1");

    const double needed = static_cast<double>(overlap_frac) * size * size;
    std::vector<PatchSample> out;
    for (int row = 0; row + size <= image.height; row += stride) {
        for (int col = 0; col + size <= image.width; col += stride) {
            long positive = 0;
            for (int r = 0; r < size; ++r)
                for (int c = 0; c < size; ++c)
                    if (mask.at(row + r, col + c, 0) > 127) ++positive;
            if (static_cast<double>(positive) >= needed) {
                PatchSample p;
                p.label = 1;
                p.image_id = image_id;
                p.row = static_cast<uint32_t>(row);
                p.col = static_cast<uint32_t>(col);
                copy_window(image, row, col, size, p.pixels);
                out.push_back(std::move(p));
            }
        }
    }
    return out;
}

std::vector<PatchSample> extract_authentic_patches(const Image& image, uint32_t image_id,
                                                   int count, int size, Rng& rng) {
    if (image.channels != 3)
        throw validation_error("authentic-patch extraction expects RGB, got " +
                               std::to_string(image.channels) + " channels");
    if (size > image.width || size > image.height)
        throw validation_error("patch size " + std::to_string(size) + " exceeds image " +
                               std::to_string(image.width) + "x" + std::to_string(image.height));
    if (count < 0) throw validation_error("patch count must be >= 0");
    std::vector<PatchSample> out;
    out.reserve(static_cast<size_t>(count));
    const int max_row = image.height - size;
    const int max_col = image.width - size;
    for (int i = 0; i < count; ++i) {
        PatchSample p;
        p.label = 0;
        p.image_id = image_id;
        p.row = static_cast<uint32_t>(max_row == 0 ? 0 : rng.uniform_int(max_row + 1));
        p.col = static_cast<uint32_t>(max_col == 0 ? 0 : rng.uniform_int(max_col + 1));
        copy_window(image, static_cast<int>(p.row), static_cast<int>(p.col), size, p.pixels);
        out.push_back(std::move(p));
    }
    return out;
}

namespace {

void sort_by_origin(std::vector<PatchSample>& v) {
    std::stable_sort(v.begin(), v.end(), [](const PatchSample& a, const PatchSample& b) {
        if (a.image_id != b.image_id) return a.image_id < b.image_id;
        if (a.row != b.row) return a.row < b.row;
        return a.col < b.col;
    });
}

// Stratified split of one label pool into train/val.
void split_pool(std::vector<PatchSample>& pool, float train_frac, Rng& rng,
                std::vector<PatchSample>& train, std::vector<PatchSample>& val) {
    rng.shuffle(pool);
    size_t n_train = static_cast<size_t>(std::lround(train_frac * static_cast<double>(pool.size())));
    n_train = std::min(n_train, pool.size());
    for (size_t i = 0; i < pool.size(); ++i)
        (i < n_train ? train : val).push_back(std::move(pool[i]));
}

} // namespace

PatchCorpus build_corpus(const DatasetManifest& manifest, const CorpusConfig& config,
                         uint64_t seed) {
    if (manifest.count(Role::Authentic) == 0)
        throw validation_error("manifest has no authentic images");
    if (manifest.count(Role::Spliced) == 0)
        throw validation_error("manifest has no spliced images");
    if (!(config.test_image_frac >= 0.0f && config.test_image_frac < 1.0f))
        throw validation_error("test image fraction must be in [0,1)");
    if (!(config.train_frac > 0.0f && config.train_frac < 1.0f))
        throw validation_error("train fraction must be in (0,1)");

    PatchCorpus corpus;
    corpus.patch_size = manifest.patch_size;
    for (size_t i = 0; i < manifest.entries.size(); ++i) {
        const auto& e = manifest.entries[i];
        CorpusImage im;
        im.id = static_cast<uint32_t>(i);
        im.role = e.role;
        im.image_path = e.image_path;
        im.mask_path = e.mask_path;
        corpus.images.push_back(std::move(im));
    }

    // Test holdout, stratified by role.
    Rng split_rng(seed, hash_str("test-split"));
    for (Role role : {Role::Authentic, Role::Spliced}) {
        std::vector<size_t> ids;
        for (size_t i = 0; i < corpus.images.size(); ++i)
            if (corpus.images[i].role == role) ids.push_back(i);
        split_rng.shuffle(ids);
        size_t n_test = static_cast<size_t>(
            std::lround(config.test_image_frac * static_cast<double>(ids.size())));
        n_test = std::min(n_test, ids.size() - 1);  // keep at least one for training
        for (size_t i = 0; i < n_test; ++i) corpus.images[ids[i]].test = true;
    }

    // Fake patches from every non-test spliced image.
    std::vector<PatchSample> fake;
    size_t n_auth_images = 0;
    for (const auto& im : corpus.images) {
        if (im.test) continue;
        if (im.role == Role::Authentic) {
            ++n_auth_images;
            continue;
        }
        Image image = read_image(im.image_path);
        Image mask = read_image(im.mask_path);
        auto patches = extract_fake_patches(image, mask, im.id, manifest.patch_size,
                                            manifest.overlap_frac, manifest.stride);
        for (auto& p : patches) fake.push_back(std::move(p));
    }
    if (fake.empty())
        throw validation_error("no fake patches cleared the " +
                               std::to_string(manifest.overlap_frac) + " overlap threshold");

    // Balance: cap authentic patches per image so totals are near-equal.
    size_t cap = (fake.size() + n_auth_images - 1) / n_auth_images;
    std::vector<PatchSample> authentic;
    for (const auto& im : corpus.images) {
        if (im.test || im.role != Role::Authentic) continue;
        Image image = read_image(im.image_path);
        Rng rng(seed, hash_combine(hash_str("authentic-patches"), im.id));
        auto patches = extract_authentic_patches(image, im.id, static_cast<int>(cap),
                                                 manifest.patch_size, rng);
        for (auto& p : patches) authentic.push_back(std::move(p));
    }

    // 70/30 by label, then a deterministic (image, row, col) ordering.
    Rng fake_rng(seed, hash_str("split-fake"));
    Rng auth_rng(seed, hash_str("split-authentic"));
    split_pool(fake, config.train_frac, fake_rng, corpus.train, corpus.val);
    split_pool(authentic, config.train_frac, auth_rng, corpus.train, corpus.val);
    sort_by_origin(corpus.train);
    sort_by_origin(corpus.val);
    return corpus;
}

void save_mmpc(const std::vector<PatchSample>& samples, int patch_size, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw runtime_error("cannot open for writing: " + path);
    os.write(kMagic, 4);
    write_u16(os, kVersion);
    write_u16(os, static_cast<uint16_t>(patch_size));
    write_u32(os, static_cast<uint32_t>(samples.size()));
    const size_t pixel_bytes = static_cast<size_t>(patch_size) * patch_size * 3;
    for (const auto& s : samples) {
        if (s.pixels.size() != pixel_bytes)
            throw validation_error("patch byte count " + std::to_string(s.pixels.size()) +
                                   " does not match patch size " + std::to_string(patch_size));
        os.put(static_cast<char>(s.label));
        write_u32(os, s.image_id);
        write_u32(os, s.row);
        write_u32(os, s.col);
        os.write(reinterpret_cast<const char*>(s.pixels.data()),
                 static_cast<std::streamsize>(pixel_bytes));
    }
    if (!os) throw runtime_error("write failed: " + path);
}

std::vector<PatchSample> load_mmpc(const std::string& path, int* patch_size_out) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw runtime_error("cannot open corpus file: " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw validation_error("not a corpus file (bad magic): " + path);
    uint16_t version = read_u16(is, path);
    if (version != kVersion)
        throw validation_error("unsupported corpus version " + std::to_string(version) + ": " + path);
    uint16_t patch_size = read_u16(is, path);
    if (patch_size == 0) throw validation_error("corpus declares patch size 0: " + path);
    uint32_t count = read_u32(is, path);
    const size_t pixel_bytes = static_cast<size_t>(patch_size) * patch_size * 3;
    std::vector<PatchSample> samples;
    samples.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        PatchSample s;
        int label = is.get();
        if (label == EOF) throw validation_error("truncated corpus file: " + path);
        if (label != 0 && label != 1)
            throw validation_error("corpus patch " + std::to_string(i) + " has label " +
                                   std::to_string(label) + ": " + path);
        s.label = static_cast<uint8_t>(label);
        s.image_id = read_u32(is, path);
        s.row = read_u32(is, path);
        s.col = read_u32(is, path);
        s.pixels.resize(pixel_bytes);
        if (!is.read(reinterpret_cast<char*>(s.pixels.data()),
                     static_cast<std::streamsize>(pixel_bytes)))
            throw validation_error("truncated corpus file: " + path);
        samples.push_back(std::move(s));
    }
    char extra;
    if (is.read(&extra, 1))
        throw validation_error("trailing bytes after last patch: " + path);
    if (patch_size_out) *patch_size_out = patch_size;
    return samples;
}

void save_corpus(const PatchCorpus& corpus, const std::string& prefix) {
    save_mmpc(corpus.train, corpus.patch_size, prefix + ".train.mmpc");
    save_mmpc(corpus.val, corpus.patch_size, prefix + ".val.mmpc");
    std::ofstream os(prefix + ".images.tsv");
    if (!os) throw runtime_error("cannot open for writing: " + prefix + ".images.tsv");
    os << "#id\tsplit\trole\timage\tmask\n";
    for (const auto& im : corpus.images) {
        os << im.id << "\t" << (im.test ? "test" : "trainval") << "\t" << to_string(im.role)
           << "\t" << im.image_path << "\t" << im.mask_path << "\n";
    }
    if (!os) throw runtime_error("write failed: " + prefix + ".images.tsv");
}

PatchCorpus load_corpus(const std::string& prefix) {
    PatchCorpus corpus;
    int train_size = 0, val_size = 0;
    corpus.train = load_mmpc(prefix + ".train.mmpc", &train_size);
    corpus.val = load_mmpc(prefix + ".val.mmpc", &val_size);
    if (train_size != val_size)
        throw validation_error("train/val patch sizes differ (" + std::to_string(train_size) +
                               " vs " + std::to_string(val_size) + "): " + prefix);
    corpus.patch_size = train_size;
    const std::string tsv = prefix + ".images.tsv";
    std::ifstream is(tsv);
    if (!is) throw runtime_error("cannot open corpus image table: " + tsv);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        size_t start = 0;
        while (true) {
            size_t tab = line.find('\t', start);
            fields.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        if (fields.size() < 4)
            throw validation_error("corpus image table line " + std::to_string(lineno) +
                                   " is malformed: " + tsv);
        CorpusImage im;
        im.id = static_cast<uint32_t>(std::stoul(fields[0]));
        im.test = fields[1] == "test";
        im.role = role_from_string(fields[2]);
        im.image_path = fields[3];
        if (fields.size() > 4) im.mask_path = fields[4];
        corpus.images.push_back(std::move(im));
    }
    return corpus;
}

void make_batch(const std::vector<PatchSample>& samples, const std::vector<size_t>& indices,
                int size, Tensor& batch, std::vector<float>& labels) {
    const int B = static_cast<int>(indices.size());
    batch = Tensor({B, size, size, 3});
    labels.resize(indices.size());
    const size_t pixel_count = static_cast<size_t>(size) * size * 3;
    for (int b = 0; b < B; ++b) {
        const PatchSample& s = samples[indices[static_cast<size_t>(b)]];
        if (s.pixels.size() != pixel_count)
            throw validation_error("patch byte count mismatch in batch assembly");
        float* dst = batch.data() + static_cast<size_t>(b) * pixel_count;
        for (size_t i = 0; i < pixel_count; ++i) dst[i] = static_cast<float>(s.pixels[i]) / 255.0f;
        labels[static_cast<size_t>(b)] = static_cast<float>(s.label);
    }
}

} // namespace mm
