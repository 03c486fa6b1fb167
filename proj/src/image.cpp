#include "missmarple/image.hpp"

#include <fstream>

#include "missmarple/error.hpp"

namespace mm {

namespace {

// Reads one whitespace-delimited token, skipping '#' comment lines.
std::string next_token(std::istream& is, const std::string& path) {
    std::string tok;
    int ch;
    while ((ch = is.get()) != EOF) {
        if (ch == '#') {
            while ((ch = is.get()) != EOF && ch != '\n') {}
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    if (tok.empty()) throw validation_error("truncated netpbm header: " + path);
    return tok;
}

int parse_dim(const std::string& tok, const std::string& what, const std::string& path) {
    try {
        size_t pos = 0;
        int v = std::stoi(tok, &pos);
        if (pos != tok.size() || v <= 0) throw std::invalid_argument("bad");
        return v;
    } catch (const std::exception&) {
        throw validation_error("bad netpbm " + what + " '" + tok + "': " + path);
    }
}

} // namespace

Image read_image(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw runtime_error("cannot open image: " + path);
    std::string magic = next_token(is, path);
    int channels;
    if (magic == "P6")
        channels = 3;
    else if (magic == "P5")
        channels = 1;
    else
        throw validation_error("unsupported image format '" + magic + "' (expected P5/P6): " + path);
    int width = parse_dim(next_token(is, path), "width", path);
    int height = parse_dim(next_token(is, path), "height", path);
    int maxval = parse_dim(next_token(is, path), "maxval", path);
    if (maxval != 255)
        throw validation_error("unsupported maxval " + std::to_string(maxval) + " (expected 255): " + path);
    // exactly one whitespace byte separates header and raster
    Image img(width, height, channels);
    is.read(reinterpret_cast<char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
    if (static_cast<size_t>(is.gcount()) != img.pixels.size())
        throw validation_error("truncated raster data: " + path);
    return img;
}

void write_image(const Image& img, const std::string& path) {
    if (img.channels != 1 && img.channels != 3)
        throw validation_error("cannot write " + std::to_string(img.channels) + "-channel image: " + path);
    if (img.width <= 0 || img.height <= 0 ||
        img.pixels.size() != static_cast<size_t>(img.width) * img.height * img.channels)
        throw validation_error("inconsistent image dimensions: " + path);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw runtime_error("cannot open for writing: " + path);
    os << (img.channels == 3 ? "P6" : "P5") << "\n"
       << img.width << " " << img.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(img.pixels.data()),
             static_cast<std::streamsize>(img.pixels.size()));
    if (!os) throw runtime_error("write failed: " + path);
}

} // namespace mm
