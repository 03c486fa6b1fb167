#ifndef MISSMARPLE_WEIGHTS_HPP
#define MISSMARPLE_WEIGHTS_HPP

#include <map>
#include <string>
#include <vector>

#include "missmarple/tensor.hpp"

namespace mm {

class Network;

// Named tensor collection with a binary file format:
//   magic "MMWT" | version u16 | count u32
//   per entry: name_len u32 | name bytes | rank u32 | dims u32[rank] | f32 values
// All integers and floats little-endian. Entries keep insertion order so
// writes are byte-stable.
class WeightStore {
public:
    void put(const std::string& name, Tensor value);
    const Tensor& get(const std::string& name) const;      // throws if absent
    const Tensor* find(const std::string& name) const;     // nullptr if absent
    bool contains(const std::string& name) const;
    size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }

    void save(const std::string& path) const;
    static WeightStore load(const std::string& path);

    // Snapshot every parameter of a network / write them back by name.
    static WeightStore from_network(Network& net);
    void apply_to(Network& net) const;

    bool operator==(const WeightStore& other) const;

private:
    std::vector<std::string> names_;
    std::map<std::string, Tensor> tensors_;
};

} // namespace mm
#endif
