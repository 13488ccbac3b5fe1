#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace covrl {

// One logged transition tuple with its provenance (generation index, e.g.
// the iteration or sample number that produced it).
struct Sample {
    int x = 0;
    int a = 0;
    double r = 0.0;
    int next_x = 0;
    int origin = 0;
    bool operator==(const Sample&) const = default;
};

// Per-layer ordered multisets of transition tuples.
struct LayeredDataset {
    std::vector<std::vector<Sample>> layers; // [h][i]

    explicit LayeredDataset(int horizon = 0) : layers(horizon) {}

    int horizon() const { return static_cast<int>(layers.size()); }

    std::size_t layer_size(int h) const { return layers[h].size(); }

    // Uniform per-layer cardinality, or throws if layers disagree.
    std::size_t uniform_size() const {
        if (layers.empty()) return 0;
        const std::size_t n = layers[0].size();
        for (const auto& l : layers)
            if (l.size() != n) throw std::logic_error("LayeredDataset: ragged layers");
        return n;
    }

    void push(int h, Sample s) { layers[h].push_back(s); }

    // First n tuples of every layer, in stored (generation) order.
    LayeredDataset prefix(std::size_t n) const {
        LayeredDataset out(horizon());
        for (int h = 0; h < horizon(); ++h) {
            if (layers[h].size() < n) throw std::out_of_range("LayeredDataset: prefix too long");
            out.layers[h].assign(layers[h].begin(), layers[h].begin() + n);
        }
        return out;
    }

    // Multiset union per layer; this dataset's tuples first.
    LayeredDataset merged_with(const LayeredDataset& other) const {
        if (other.horizon() != horizon()) throw std::invalid_argument("merge: horizon mismatch");
        LayeredDataset out = *this;
        for (int h = 0; h < horizon(); ++h)
            out.layers[h].insert(out.layers[h].end(), other.layers[h].begin(), other.layers[h].end());
        return out;
    }

    bool operator==(const LayeredDataset&) const = default;
};

} // namespace covrl
