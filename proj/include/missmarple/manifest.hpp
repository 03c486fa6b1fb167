#ifndef MISSMARPLE_MANIFEST_HPP
#define MISSMARPLE_MANIFEST_HPP

#include <string>
#include <vector>

namespace mm {

enum class Role { Authentic, Spliced };

std::string to_string(Role r);
Role role_from_string(const std::string& s);

struct ManifestEntry {
    Role role = Role::Authentic;
    std::string image_path;
    std::string mask_path;  // required for spliced entries
};

// Dataset listing plus the extraction knobs that travel with it.
struct DatasetManifest {
    std::string name = "dataset";
    std::vector<ManifestEntry> entries;
    int patch_size = 64;
    float overlap_frac = 0.40f;
    int stride = 32;

    size_t count(Role r) const;
};

// Text format, one record per line after the `#missmarple-manifest v1`
// header: role <tab> image-path <tab> [mask-path]. Relative paths are
// resolved against the manifest's directory on load.
DatasetManifest load_manifest(const std::string& path);
void save_manifest(const DatasetManifest& manifest, const std::string& path);

} // namespace mm

#endif
