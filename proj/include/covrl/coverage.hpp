#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "covrl/ext_real.hpp"
#include "covrl/mdp.hpp"

namespace covrl {

// Per-layer distribution over state-action cells.
using LayerDist = SaTable<double>;

// Exact layered state-action visitation distribution d^pi_h.
struct Occupancy {
    std::vector<LayerDist> layers; // [h][x][a]
    std::string tag;

    int horizon() const { return static_cast<int>(layers.size()); }

    double layer_sum(int h) const {
        double s = 0.0;
        for (const auto& row : layers[h])
            for (double v : row) s += v;
        return s;
    }

    bool operator==(const Occupancy&) const = default;
};

/// d^pi by exact forward recursion:
/// d_0(x,a) = d_1(x) pi_0(a|x), d_{h+1}(x',a') = sum_{x,a} d_h(x,a) P_h(x'|x,a) pi_{h+1}(a'|x').
inline Occupancy occupancy(const TabularMdp& mdp, const Policy& pi, std::string tag = {}) {
    Occupancy occ;
    occ.tag = std::move(tag);
    occ.layers.assign(mdp.horizon,
                      LayerDist(mdp.num_states, std::vector<double>(mdp.num_actions, 0.0)));
    std::vector<double> state_dist = mdp.initial_dist;
    for (int h = 0; h < mdp.horizon; ++h) {
        for (int x = 0; x < mdp.num_states; ++x) {
            if (state_dist[x] == 0.0) continue;
            for (int a = 0; a < mdp.num_actions; ++a)
                occ.layers[h][x][a] = state_dist[x] * pi.prob(h, x, a);
        }
        if (h + 1 == mdp.horizon) break;
        std::vector<double> next(mdp.num_states, 0.0);
        for (int x = 0; x < mdp.num_states; ++x)
            for (int a = 0; a < mdp.num_actions; ++a) {
                const double w = occ.layers[h][x][a];
                if (w == 0.0) continue;
                for (int xn = 0; xn < mdp.num_states; ++xn)
                    next[xn] += w * mdp.transitions[h][x][a][xn];
            }
        state_dist.swap(next);
    }
    return occ;
}

/// Arithmetic mean of occupancies, layer by layer.
inline Occupancy mixture_occupancy(const std::vector<Occupancy>& occs, std::string tag = {}) {
    if (occs.empty()) throw std::invalid_argument("mixture_occupancy: empty list");
    Occupancy out = occs[0];
    out.tag = std::move(tag);
    for (std::size_t i = 1; i < occs.size(); ++i) {
        if (occs[i].layers.size() != out.layers.size())
            throw std::invalid_argument("mixture_occupancy: shape mismatch");
        for (std::size_t h = 0; h < out.layers.size(); ++h)
            for (std::size_t x = 0; x < out.layers[h].size(); ++x)
                for (std::size_t a = 0; a < out.layers[h][x].size(); ++a)
                    out.layers[h][x][a] += occs[i].layers[h][x][a];
    }
    const double inv = 1.0 / static_cast<double>(occs.size());
    for (auto& layer : out.layers)
        for (auto& row : layer)
            for (double& v : row) v *= inv;
    return out;
}

/// max over layers and cells of d_h/mu_h under the inf / 0-0 conventions;
/// +inf whenever d places mass where mu has none.
inline double concentrability_inf(const Occupancy& d, const Occupancy& mu) {
    if (d.layers.size() != mu.layers.size())
        throw std::invalid_argument("concentrability_inf: shape mismatch");
    double worst = 0.0;
    for (std::size_t h = 0; h < d.layers.size(); ++h)
        for (std::size_t x = 0; x < d.layers[h].size(); ++x)
            for (std::size_t a = 0; a < d.layers[h][x].size(); ++a)
                worst = std::max(worst, ratio(d.layers[h][x][a], mu.layers[h][x][a]));
    return worst;
}

/// Clipped concentrability at scale gamma for layer h:
/// E_{(x,a) ~ d^pi_h}[ min(d^pi_h/mu_h, gamma) ].
inline double clipped_concentrability(const LayerDist& d_pi_h, const LayerDist& mu_h,
                                      double gamma_scale) {
    if (!(gamma_scale > 0.0))
        throw std::invalid_argument("clipped_concentrability: gamma must be > 0");
    double acc = 0.0;
    for (std::size_t x = 0; x < d_pi_h.size(); ++x)
        for (std::size_t a = 0; a < d_pi_h[x].size(); ++a) {
            const double mass = d_pi_h[x][a];
            if (mass == 0.0) continue;
            acc += mass * clip(ratio(mass, mu_h[x][a]), gamma_scale);
        }
    return acc;
}

inline double clipped_concentrability(const Occupancy& d_pi, const Occupancy& mu,
                                      double gamma_scale, int h) {
    return clipped_concentrability(d_pi.layers[h], mu.layers[h], gamma_scale);
}

/// ||u||_{1,rho} or ||u||_{2,rho} over a single layer.
inline double weighted_norm(const LayerDist& u, const LayerDist& rho, int order) {
    if (order != 1 && order != 2) throw std::invalid_argument("weighted_norm: order must be 1 or 2");
    double acc = 0.0;
    for (std::size_t x = 0; x < u.size(); ++x)
        for (std::size_t a = 0; a < u[x].size(); ++a) {
            const double w = rho[x][a];
            if (w == 0.0) continue;
            acc += order == 1 ? w * std::abs(u[x][a]) : w * u[x][a] * u[x][a];
        }
    return order == 1 ? acc : std::sqrt(acc);
}

struct CoverageReport {
    double c_cov = 0.0;                    // max over layers of per-layer value
    std::vector<double> layer_values;      // ||max_pi d^pi_h||_1 per layer
    Occupancy mu_star;                     // per-layer optimal data distribution
    std::vector<double> policy_sup_ratios; // sup_h ||d^pi_h / mu*_h||_inf per policy
};

/// Coverability coefficient and its attaining distribution. Per layer,
/// m_h(x,a) = max_pi d^pi_h(x,a), mu*_h = m_h/||m_h||_1 and the layer value
/// is ||m_h||_1; c_cov is the max over layers. The report records per-policy
/// sup ratios against mu* as the optimality certificate.
inline CoverageReport coverability(const TabularMdp& mdp, const PolicyClass& pi_class) {
    if (pi_class.policies.empty()) throw std::invalid_argument("coverability: empty policy class");
    std::vector<Occupancy> occs;
    occs.reserve(pi_class.size());
    for (const auto& pi : pi_class.policies) occs.push_back(occupancy(mdp, pi));

    CoverageReport rep;
    rep.mu_star.tag = "mu_star";
    rep.mu_star.layers.assign(mdp.horizon,
                              LayerDist(mdp.num_states, std::vector<double>(mdp.num_actions, 0.0)));
    rep.layer_values.resize(mdp.horizon);
    for (int h = 0; h < mdp.horizon; ++h) {
        LayerDist m(mdp.num_states, std::vector<double>(mdp.num_actions, 0.0));
        for (const auto& occ : occs)
            for (int x = 0; x < mdp.num_states; ++x)
                for (int a = 0; a < mdp.num_actions; ++a)
                    m[x][a] = std::max(m[x][a], occ.layers[h][x][a]);
        double norm1 = 0.0;
        for (const auto& row : m)
            for (double v : row) norm1 += v;
        rep.layer_values[h] = norm1;
        for (int x = 0; x < mdp.num_states; ++x)
            for (int a = 0; a < mdp.num_actions; ++a)
                rep.mu_star.layers[h][x][a] = m[x][a] / norm1;
    }
    rep.c_cov = *std::max_element(rep.layer_values.begin(), rep.layer_values.end());
    rep.policy_sup_ratios.reserve(occs.size());
    for (const auto& occ : occs)
        rep.policy_sup_ratios.push_back(concentrability_inf(occ, rep.mu_star));
    return rep;
}

} // namespace covrl
