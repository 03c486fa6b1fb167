#ifndef MISSMARPLE_CONFIG_HPP
#define MISSMARPLE_CONFIG_HPP

#include <optional>
#include <string>
#include <vector>

namespace mm {

// Ordered key=value text store. Lines are `key = value`; '#' starts a
// comment; blank lines ignored. Insertion order is preserved so writes are
// byte-stable.
class KvFile {
public:
    void set(const std::string& key, const std::string& value);
    void set_int(const std::string& key, long long v);
    void set_float(const std::string& key, double v);

    bool contains(const std::string& key) const;
    std::optional<std::string> get(const std::string& key) const;

    // Typed access; throws a validation error naming the key on bad syntax.
    std::string get_string(const std::string& key, const std::string& fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    double get_float(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    // Comma-separated integer list.
    std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const;

    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

    static KvFile parse(const std::string& text);
    static KvFile load(const std::string& path);
    void save(const std::string& path) const;
    std::string to_text() const;

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

// Fixed-point float formatting helpers shared by reports (deterministic,
// locale-independent).
std::string format_float(double v, int decimals);
std::string format_float_compact(double v);

} // namespace mm
#endif
