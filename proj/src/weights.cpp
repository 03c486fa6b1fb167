#include "missmarple/weights.hpp"

#include <cstring>
#include <fstream>

#include "missmarple/error.hpp"
#include "missmarple/network.hpp"

namespace mm {

namespace {

constexpr char kMagic[4] = {'M', 'M', 'W', 'T'};
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

void write_f32(std::ostream& os, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_u32(os, bits);
}

uint16_t read_u16(std::istream& is, const std::string& path) {
    unsigned char b[2];
    if (!is.read(reinterpret_cast<char*>(b), 2))
        throw validation_error("truncated weights file: " + path);
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

uint32_t read_u32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw validation_error("truncated weights file: " + path);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
}

float read_f32(std::istream& is, const std::string& path) {
    uint32_t bits = read_u32(is, path);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

} // namespace

void WeightStore::put(const std::string& name, Tensor value) {
    if (!tensors_.count(name)) names_.push_back(name);
    tensors_[name] = std::move(value);
}

const Tensor& WeightStore::get(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw validation_error("weights have no tensor named '" + name + "'");
    return it->second;
}

const Tensor* WeightStore::find(const std::string& name) const {
    auto it = tensors_.find(name);
    return it == tensors_.end() ? nullptr : &it->second;
}

bool WeightStore::contains(const std::string& name) const { return tensors_.count(name) > 0; }

void WeightStore::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw runtime_error("cannot open for writing: " + path);
    os.write(kMagic, 4);
    write_u16(os, kVersion);
    write_u32(os, static_cast<uint32_t>(names_.size()));
    for (const auto& name : names_) {
        const Tensor& t = tensors_.at(name);
        write_u32(os, static_cast<uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(os, static_cast<uint32_t>(t.rank()));
        for (int i = 0; i < t.rank(); ++i) write_u32(os, static_cast<uint32_t>(t.dim(i)));
        for (size_t i = 0; i < t.size(); ++i) write_f32(os, t[i]);
    }
    if (!os) throw runtime_error("write failed: " + path);
}

WeightStore WeightStore::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw runtime_error("cannot open weights file: " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw validation_error("not a weights file (bad magic): " + path);
    uint16_t version = read_u16(is, path);
    if (version != kVersion)
        throw validation_error("unsupported weights version " + std::to_string(version) + ": " + path);
    uint32_t count = read_u32(is, path);
    WeightStore store;
    for (uint32_t e = 0; e < count; ++e) {
        uint32_t name_len = read_u32(is, path);
        std::string name(name_len, '\0');
        if (name_len > 0 && !is.read(name.data(), name_len))
            throw validation_error("truncated weights file: " + path);
        uint32_t rank = read_u32(is, path);
        if (rank == 0 || rank > 8)
            throw validation_error("tensor '" + name + "' has implausible rank " +
                                   std::to_string(rank) + ": " + path);
        std::vector<int> dims(rank);
        size_t n = 1;
        for (uint32_t i = 0; i < rank; ++i) {
            uint32_t d = read_u32(is, path);
            if (d == 0 || d > (1u << 24))
                throw validation_error("tensor '" + name + "' has implausible dim " +
                                       std::to_string(d) + ": " + path);
            dims[i] = static_cast<int>(d);
            n *= d;
        }
        Tensor t(dims);
        for (size_t i = 0; i < n; ++i) t[i] = read_f32(is, path);
        if (store.contains(name))
            throw validation_error("duplicate tensor '" + name + "': " + path);
        store.put(name, std::move(t));
    }
    // anything after the declared entries is corruption
    char extra;
    if (is.read(&extra, 1))
        throw validation_error("trailing bytes after last tensor: " + path);
    return store;
}

WeightStore WeightStore::from_network(Network& net) {
    WeightStore store;
    for (Param* p : net.params()) store.put(p->name, p->value);
    return store;
}

void WeightStore::apply_to(Network& net) const {
    for (Param* p : net.params()) {
        const Tensor* t = find(p->name);
        if (!t) throw validation_error("weights are missing tensor '" + p->name + "'");
        if (t->shape() != p->value.shape())
            throw validation_error("tensor '" + p->name + "' has shape " + t->shape_str() +
                                   ", network expects " + p->value.shape_str());
        p->value = *t;
    }
}

bool WeightStore::operator==(const WeightStore& other) const {
    if (names_ != other.names_) return false;
    for (const auto& name : names_)
        if (!(tensors_.at(name) == other.tensors_.at(name))) return false;
    return true;
}

} // namespace mm
