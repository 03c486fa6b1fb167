#include "missmarple/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "missmarple/error.hpp"

namespace fs = std::filesystem;

namespace mm {

namespace {

constexpr const char* kHeader = "#missmarple-manifest v1";

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, '\t')) out.push_back(field);
    return out;
}

std::string resolve(const fs::path& dir, const std::string& p) {
    fs::path path(p);
    if (path.is_absolute()) return path.string();
    return (dir / path).lexically_normal().string();
}

} // namespace

std::string to_string(Role r) { return r == Role::Authentic ? "authentic" : "spliced"; }

Role role_from_string(const std::string& s) {
    if (s == "authentic") return Role::Authentic;
    if (s == "spliced") return Role::Spliced;
    throw validation_error("unknown role '" + s + "' (expected authentic|spliced)");
}

size_t DatasetManifest::count(Role r) const {
    size_t n = 0;
    for (const auto& e : entries)
        if (e.role == r) ++n;
    return n;
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw runtime_error("cannot open manifest: " + path);
    fs::path dir = fs::path(path).parent_path();
    std::string line;
    if (!std::getline(is, line))
        throw validation_error("empty manifest: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kHeader)
        throw validation_error("manifest missing '" + std::string(kHeader) + "' header: " + path);
    DatasetManifest m;
    m.name = fs::path(path).stem().string();
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_tabs(line);
        if (fields.size() < 2 || fields.size() > 3)
            throw validation_error("manifest line " + std::to_string(lineno) +
                                   ": expected role<TAB>image[<TAB>mask]: " + path);
        ManifestEntry e;
        e.role = role_from_string(fields[0]);
        e.image_path = resolve(dir, fields[1]);
        if (fields.size() == 3 && !fields[2].empty()) e.mask_path = resolve(dir, fields[2]);
        if (e.role == Role::Spliced && e.mask_path.empty())
            throw validation_error("manifest line " + std::to_string(lineno) +
                                   ": spliced entry has no mask: " + path);
        m.entries.push_back(std::move(e));
    }
    return m;
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw runtime_error("cannot open for writing: " + path);
    fs::path dir = fs::path(path).parent_path();
    os << kHeader << "\n";
    for (const auto& e : manifest.entries) {
        // store paths relative to the manifest when they live beneath it
        auto rel = [&dir](const std::string& p) {
            fs::path rp = fs::path(p).lexically_relative(dir.empty() ? "." : dir);
            if (rp.empty() || rp.string().rfind("..", 0) == 0) return p;
            return rp.string();
        };
        os << to_string(e.role) << "\t" << rel(e.image_path);
        if (!e.mask_path.empty()) os << "\t" << rel(e.mask_path);
        os << "\n";
    }
    if (!os) throw runtime_error("write failed: " + path);
}

} // namespace mm
