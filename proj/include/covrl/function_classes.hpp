#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "covrl/coverage.hpp"
#include "covrl/ext_real.hpp"
#include "covrl/mdp.hpp"
#include "covrl/rng.hpp"

namespace covrl {

// Finite value-function class F, optionally tracking where Q* sits.
struct ValueClass {
    std::vector<ValueFunction> members;
    double nominal_log_size = 0.0;
    int qstar_index = -1; // -1 when unknown

    std::size_t size() const { return members.size(); }
    const ValueFunction& operator[](std::size_t i) const { return members[i]; }
};

/// F = {Q*} plus `extras` random perturbations of Q*, entrywise clamped to
/// [0,1]. Q* sits at index 0 unless `shuffle`, in which case its position is
/// recorded in qstar_index.
inline ValueClass tabular_value_class(const TabularMdp& mdp, int extras, Rng& rng,
                                      bool shuffle = false, double perturb_scale = 0.3) {
    if (extras < 0) throw std::invalid_argument("tabular_value_class: extras must be >= 0");
    ValueClass cls;
    cls.members.push_back(q_star(mdp));
    for (int i = 0; i < extras; ++i) {
        ValueFunction f = cls.members[0];
        for (auto& layer : f.q)
            for (auto& row : layer)
                for (double& v : row)
                    v = std::clamp(v + rng.uniform(-perturb_scale, perturb_scale), 0.0, 1.0);
        cls.members.push_back(std::move(f));
    }
    cls.qstar_index = 0;
    if (shuffle) {
        for (std::size_t i = cls.members.size(); i > 1; --i)
            std::swap(cls.members[i - 1], cls.members[rng.uniform_int(i)]);
        // locate Q* after the shuffle
        ValueFunction qs = q_star(mdp);
        for (std::size_t i = 0; i < cls.members.size(); ++i)
            if (cls.members[i] == qs) { cls.qstar_index = static_cast<int>(i); break; }
    }
    cls.nominal_log_size = std::log(static_cast<double>(cls.members.size()));
    return cls;
}

// Weight function: layered nonnegative (possibly +inf) base tables, an
// optional sign and an optional single active layer. Signed and masked
// variants evaluate as sign * clip(base, gamma) on the active layer and 0
// elsewhere; the sign applies after clipping.
struct WeightFunction {
    std::vector<LayerDist> layers; // [h][x][a], base values >= 0 or +inf
    int sign = +1;
    int active_layer = -1; // -1: all layers active

    double eval(int h, int x, int a, double gamma) const {
        if (active_layer >= 0 && h != active_layer) return 0.0;
        return sign * clip(layers[h][x][a], gamma);
    }

    bool operator==(const WeightFunction&) const = default;
};

/// Exact clipped ratios clip(d^pi_h / rho_h, gamma) for every pi in the
/// class, under the inf and 0/0 conventions. One weight function per policy.
inline std::vector<WeightFunction> oracle_weights(const TabularMdp& mdp, const PolicyClass& pis,
                                                  const Occupancy& rho, double gamma_t) {
    if (!(gamma_t > 0.0)) throw std::invalid_argument("oracle_weights: gamma must be > 0");
    std::vector<WeightFunction> out;
    out.reserve(pis.size());
    for (const auto& pi : pis.policies) {
        const Occupancy d = occupancy(mdp, pi);
        WeightFunction w;
        w.layers.assign(mdp.horizon,
                        LayerDist(mdp.num_states, std::vector<double>(mdp.num_actions, 0.0)));
        for (int h = 0; h < mdp.horizon; ++h)
            for (int x = 0; x < mdp.num_states; ++x)
                for (int a = 0; a < mdp.num_actions; ++a)
                    w.layers[h][x][a] = clip(ratio(d.layers[h][x][a], rho.layers[h][x][a]), gamma_t);
        out.push_back(std::move(w));
    }
    return out;
}

// Finite weight-function class. Static mode holds an explicit member list;
// oracle mode holds the simulator handles needed to materialize, for any
// reference occupancy and scale, the exact clipped policy ratios.
struct WeightClass {
    enum class Mode { Static, Oracle };
    Mode mode = Mode::Static;
    std::vector<WeightFunction> members; // static mode
    TabularMdp mdp;                      // oracle mode
    PolicyClass policies;                // oracle mode
    double nominal_log_size = 0.0;

    static WeightClass make_static(std::vector<WeightFunction> ws) {
        WeightClass w;
        w.mode = Mode::Static;
        w.members = std::move(ws);
        w.nominal_log_size = std::log(static_cast<double>(std::max<std::size_t>(1, w.members.size())));
        return w;
    }

    static WeightClass make_oracle(TabularMdp m, PolicyClass pis, double nominal_log_size) {
        WeightClass w;
        w.mode = Mode::Oracle;
        w.mdp = std::move(m);
        w.policies = std::move(pis);
        w.nominal_log_size = nominal_log_size;
        return w;
    }

    std::size_t size() const { return members.size(); }

    std::vector<WeightFunction> materialize(const Occupancy& rho, double gamma) const {
        if (mode != Mode::Oracle) throw std::logic_error("materialize: not an oracle class");
        return oracle_weights(mdp, policies, rho, gamma);
    }
};

namespace detail {

inline double inf_aware_mean(const std::vector<double>& vals) {
    double sum = 0.0;
    for (double v : vals) {
        if (v == kInf) return kInf;
        sum += v;
    }
    return sum / static_cast<double>(vals.size());
}

} // namespace detail

/// Reciprocal-of-average mixture of a weight tuple:
/// out_h(x,a) = 1 / mean_s w^s_h(x,a), under the extended conventions.
inline WeightFunction mixture_of(const std::vector<const WeightFunction*>& tuple) {
    if (tuple.empty()) throw std::invalid_argument("mixture_of: empty tuple");
    WeightFunction out;
    out.layers = tuple[0]->layers;
    std::vector<double> vals(tuple.size());
    for (std::size_t h = 0; h < out.layers.size(); ++h)
        for (std::size_t x = 0; x < out.layers[h].size(); ++x)
            for (std::size_t a = 0; a < out.layers[h][x].size(); ++a) {
                for (std::size_t s = 0; s < tuple.size(); ++s) vals[s] = tuple[s]->layers[h][x][a];
                out.layers[h][x][a] = ext_reciprocal(detail::inf_aware_mean(vals));
            }
    return out;
}

/// Number of candidate tuples sum_{t<=max_t} n^t the mixture closure visits;
/// throws past `budget`.
inline std::uint64_t mixture_candidate_count(std::uint64_t n, int max_t,
                                             std::uint64_t budget = 1'000'000) {
    std::uint64_t total = 0, pow = 1;
    for (int t = 1; t <= max_t; ++t) {
        if (pow > budget / n) throw std::runtime_error("mixture_augment: budget exceeded");
        pow *= n;
        total += pow;
        if (total > budget) throw std::runtime_error("mixture_augment: budget exceeded");
    }
    return total;
}

/// Mixture closure over all tuples of length t <= max_t from a static class,
/// duplicates removed. Refuses to materialize past `budget` candidate tuples.
inline WeightClass mixture_augment(const WeightClass& base, int max_t,
                                   std::uint64_t budget = 1'000'000) {
    if (base.mode != WeightClass::Mode::Static)
        throw std::invalid_argument("mixture_augment: base class must be static");
    if (max_t < 1) throw std::invalid_argument("mixture_augment: need max_t >= 1");
    for (const auto& w : base.members)
        if (w.sign != +1 || w.active_layer != -1)
            throw std::invalid_argument("mixture_augment: base members must be plain");
    const std::uint64_t n = base.members.size();
    mixture_candidate_count(n, max_t, budget);

    std::vector<WeightFunction> out;
    std::vector<std::size_t> idx;
    std::vector<const WeightFunction*> tuple;
    for (int t = 1; t <= max_t; ++t) {
        idx.assign(t, 0);
        while (true) {
            tuple.clear();
            for (int s = 0; s < t; ++s) tuple.push_back(&base.members[idx[s]]);
            WeightFunction w = mixture_of(tuple);
            if (std::find(out.begin(), out.end(), w) == out.end()) out.push_back(std::move(w));
            int pos = t - 1;
            while (pos >= 0 && ++idx[pos] == n) idx[pos--] = 0;
            if (pos < 0) break;
        }
    }
    WeightClass cls = WeightClass::make_static(std::move(out));
    cls.nominal_log_size = max_t * std::log(2.0 * static_cast<double>(n));
    return cls;
}

/// Signed and layer-masked closure W u (-W) u_h (W^(h) u (-W^(h))) used by
/// the clipped-regularized minimax estimator; at most 2(H+1)|W| members.
inline WeightClass mabo_augment(const WeightClass& base) {
    if (base.mode != WeightClass::Mode::Static)
        throw std::invalid_argument("mabo_augment: base class must be static");
    std::vector<WeightFunction> out;
    const int H = base.members.empty() ? 0 : static_cast<int>(base.members[0].layers.size());
    out.reserve(2 * (H + 1) * base.members.size());
    for (const auto& w : base.members)
        for (int layer = -1; layer < H; ++layer)
            for (int sign : {+1, -1}) {
                WeightFunction v = w;
                v.sign = sign;
                v.active_layer = layer;
                out.push_back(std::move(v));
            }
    WeightClass cls = WeightClass::make_static(std::move(out));
    cls.nominal_log_size = std::log(4.0 * std::max(1, H) * std::max<std::size_t>(1, base.members.size()));
    return cls;
}

} // namespace covrl
