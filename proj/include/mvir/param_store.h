#pragma once

#include <string>
#include <vector>

#include "mvir/error.h"
#include "mvir/rng.h"

namespace mvir {

// Flat storage for every optimizable scalar, partitioned into named groups
// (spatial-mlp, hash-table, brdf-mlp, shadow-mlp, sharpness, light-dirs,
// light-log-intensity). Gradients live in a same-length accumulator so a
// backward pass can scatter into plain offsets.
class ParamStore {
public:
    struct Group {
        std::string name;
        size_t offset = 0;
        size_t length = 0;
        double lr = 1e-3;
        double weight_decay = 0.0;
    };

    size_t add_group(const std::string& name, size_t length, double lr, double weight_decay) {
        for (const auto& g : groups_)
            check(g.name != name, "duplicate parameter group '", name, "'");
        Group g;
        g.name = name;
        g.offset = values.size();
        g.length = length;
        g.lr = lr;
        g.weight_decay = weight_decay;
        groups_.push_back(g);
        values.resize(values.size() + length, 0.0);
        grads.resize(values.size(), 0.0);
        return g.offset;
    }

    const Group& group(const std::string& name) const {
        for (const auto& g : groups_)
            if (g.name == name)
                return g;
        fail("unknown parameter group '", name, "'");
    }
    bool has_group(const std::string& name) const {
        for (const auto& g : groups_)
            if (g.name == name)
                return true;
        return false;
    }
    const std::vector<Group>& groups() const { return groups_; }

    size_t size() const { return values.size(); }
    void zero_grad() { std::fill(grads.begin(), grads.end(), 0.0); }

    double* group_values(const std::string& name) { return values.data() + group(name).offset; }
    const double* group_values(const std::string& name) const {
        return values.data() + group(name).offset;
    }

    // Kaiming-style uniform fan-in init for a weight matrix stored at
    // [offset, offset + out*in), row-major (out x in).
    void init_kaiming(size_t offset, int out, int in, Rng& rng) {
        double bound = std::sqrt(6.0 / in);
        for (int i = 0; i < out * in; ++i)
            values[offset + i] = rng.uniform(-bound, bound);
    }

    std::vector<double> values;
    std::vector<double> grads;

private:
    std::vector<Group> groups_;
};

} // namespace mvir
