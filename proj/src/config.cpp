#include "missmarple/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "missmarple/error.hpp"

namespace mm {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

} // namespace

void KvFile::set(const std::string& key, const std::string& value) {
    for (auto& e : entries_)
        if (e.first == key) {
            e.second = value;
            return;
        }
    entries_.emplace_back(key, value);
}

void KvFile::set_int(const std::string& key, long long v) { set(key, std::to_string(v)); }

void KvFile::set_float(const std::string& key, double v) { set(key, format_float_compact(v)); }

bool KvFile::contains(const std::string& key) const {
    for (const auto& e : entries_)
        if (e.first == key) return true;
    return false;
}

std::optional<std::string> KvFile::get(const std::string& key) const {
    for (const auto& e : entries_)
        if (e.first == key) return e.second;
    return std::nullopt;
}

std::string KvFile::get_string(const std::string& key, const std::string& fallback) const {
    auto v = get(key);
    return v ? *v : fallback;
}

long long KvFile::get_int(const std::string& key, long long fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    try {
        size_t pos = 0;
        long long n = std::stoll(*v, &pos);
        if (pos != v->size()) throw std::invalid_argument("trailing");
        return n;
    } catch (const std::exception&) {
        throw validation_error("config key '" + key + "': expected integer, got '" + *v + "'");
    }
}

double KvFile::get_float(const std::string& key, double fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    try {
        size_t pos = 0;
        double d = std::stod(*v, &pos);
        if (pos != v->size()) throw std::invalid_argument("trailing");
        return d;
    } catch (const std::exception&) {
        throw validation_error("config key '" + key + "': expected number, got '" + *v + "'");
    }
}

bool KvFile::get_bool(const std::string& key, bool fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw validation_error("config key '" + key + "': expected boolean, got '" + *v + "'");
}

std::vector<int> KvFile::get_int_list(const std::string& key, const std::vector<int>& fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    std::vector<int> out;
    std::stringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        try {
            out.push_back(std::stoi(item));
        } catch (const std::exception&) {
            throw validation_error("config key '" + key + "': expected integer list, got '" + *v + "'");
        }
    }
    if (out.empty())
        throw validation_error("config key '" + key + "': empty list");
    return out;
}

KvFile KvFile::parse(const std::string& text) {
    KvFile kv;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw validation_error("config line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw validation_error("config line " + std::to_string(lineno) + ": empty key");
        kv.set(key, value);
    }
    return kv;
}

KvFile KvFile::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw runtime_error("cannot open config file: " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse(ss.str());
}

void KvFile::save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw runtime_error("cannot open for writing: " + path);
    os << to_text();
    if (!os) throw runtime_error("write failed: " + path);
}

std::string KvFile::to_text() const {
    std::string out;
    for (const auto& e : entries_) {
        out += e.first;
        out += " = ";
        out += e.second;
        out += "\n";
    }
    return out;
}

std::string format_float(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

std::string format_float_compact(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

} // namespace mm
