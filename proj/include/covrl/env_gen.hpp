#pragma once

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "covrl/mdp.hpp"
#include "covrl/rng.hpp"

namespace covrl {

// Dirichlet(1) draw over k cells via normalized exponentials; renormalized
// so the row sums to 1 exactly up to float addition.
inline std::vector<double> random_simplex(int k, Rng& rng) {
    std::vector<double> v(k);
    double sum = 0.0;
    for (int i = 0; i < k; ++i) {
        v[i] = -std::log(1.0 - rng.uniform01());
        sum += v[i];
    }
    for (int i = 0; i < k; ++i) v[i] /= sum;
    // push residual into the heaviest cell so validate() sees an exact simplex
    double s = std::accumulate(v.begin(), v.end(), 0.0);
    auto it = std::max_element(v.begin(), v.end());
    *it += 1.0 - s;
    return v;
}

/// Random layered MDP. `sparsity` in [0,1) is the approximate fraction of
/// zeroed transition targets per row; rewards are two-point distributions
/// supported in [0, 1/H].
inline TabularMdp make_random_mdp(int num_states, int num_actions, int horizon,
                                  double sparsity, Rng& rng) {
    if (num_states <= 0 || num_actions <= 0 || horizon <= 0)
        throw std::invalid_argument("make_random_mdp: sizes must be positive");
    if (sparsity < 0.0 || sparsity >= 1.0)
        throw std::invalid_argument("make_random_mdp: sparsity must be in [0,1)");
    TabularMdp m;
    m.num_states = num_states;
    m.num_actions = num_actions;
    m.horizon = horizon;
    m.initial_dist = random_simplex(num_states, rng);
    m.transitions.resize(horizon);
    m.rewards.resize(horizon);
    const int support = std::max(1, static_cast<int>(std::lround((1.0 - sparsity) * num_states)));
    for (int h = 0; h < horizon; ++h) {
        m.transitions[h].assign(num_states, std::vector<std::vector<double>>(num_actions));
        m.rewards[h].assign(num_states, std::vector<RewardDist>(num_actions));
        for (int x = 0; x < num_states; ++x)
            for (int a = 0; a < num_actions; ++a) {
                std::vector<double> row(num_states, 0.0);
                std::vector<int> idx(num_states);
                std::iota(idx.begin(), idx.end(), 0);
                for (int i = 0; i < support; ++i) {
                    const int j = i + static_cast<int>(rng.uniform_int(num_states - i));
                    std::swap(idx[i], idx[j]);
                }
                const std::vector<double> mass = random_simplex(support, rng);
                for (int i = 0; i < support; ++i) row[idx[i]] = mass[i];
                m.transitions[h][x][a] = std::move(row);
                const double v = rng.uniform01() / horizon;
                const double p = rng.uniform01();
                m.rewards[h][x][a] = {{0.0, 1.0 - p}, {v, p}};
            }
    }
    m.validate();
    return m;
}

/// Hard-exploration chain of length `horizon`: state 0 is on-chain, state 1
/// absorbing off-chain. Exactly one action sequence (the code) keeps the
/// agent on-chain; reward 1 arrives at the last layer for the final correct
/// action. J(optimal) = 1 and J(uniform) = num_actions^-horizon.
inline TabularMdp make_combination_lock(int horizon, Rng& rng, int num_actions = 2) {
    if (horizon <= 0 || num_actions < 2)
        throw std::invalid_argument("make_combination_lock: need horizon >= 1, actions >= 2");
    TabularMdp m;
    m.num_states = 2;
    m.num_actions = num_actions;
    m.horizon = horizon;
    m.initial_dist = {1.0, 0.0};
    m.transitions.resize(horizon);
    m.rewards.resize(horizon);
    for (int h = 0; h < horizon; ++h) {
        const int code = static_cast<int>(rng.uniform_int(num_actions));
        m.transitions[h].assign(2, std::vector<std::vector<double>>(num_actions));
        m.rewards[h].assign(2, std::vector<RewardDist>(num_actions));
        for (int x = 0; x < 2; ++x)
            for (int a = 0; a < num_actions; ++a) {
                std::vector<double> row(2, 0.0);
                row[(x == 0 && a == code) ? 0 : 1] = 1.0;
                m.transitions[h][x][a] = std::move(row);
                const double r = (h == horizon - 1 && x == 0 && a == code) ? 1.0 : 0.0;
                m.rewards[h][x][a] = {{r, 1.0}};
            }
    }
    m.validate();
    return m;
}

/// Lifts a latent MDP to observation space by partitioning observation
/// indices across latent states (disjoint supports, uniform emission within
/// each block). `emissions[s]` is the block size for latent state s.
inline TabularMdp make_block_lift(const TabularMdp& latent, const std::vector<int>& emissions) {
    if (static_cast<int>(emissions.size()) != latent.num_states)
        throw std::invalid_argument("make_block_lift: one emission count per latent state");
    for (int e : emissions)
        if (e <= 0) throw std::invalid_argument("make_block_lift: emission counts must be >= 1");
    std::vector<int> offset(latent.num_states + 1, 0);
    for (int s = 0; s < latent.num_states; ++s) offset[s + 1] = offset[s] + emissions[s];
    const int num_obs = offset.back();
    std::vector<int> decode(num_obs);
    for (int s = 0; s < latent.num_states; ++s)
        for (int i = offset[s]; i < offset[s + 1]; ++i) decode[i] = s;

    TabularMdp m;
    m.num_states = num_obs;
    m.num_actions = latent.num_actions;
    m.horizon = latent.horizon;
    m.initial_dist.assign(num_obs, 0.0);
    for (int x = 0; x < num_obs; ++x) {
        const int s = decode[x];
        m.initial_dist[x] = latent.initial_dist[s] / emissions[s];
    }
    m.transitions.resize(m.horizon);
    m.rewards.resize(m.horizon);
    for (int h = 0; h < m.horizon; ++h) {
        m.transitions[h].assign(num_obs, std::vector<std::vector<double>>(m.num_actions));
        m.rewards[h].assign(num_obs, std::vector<RewardDist>(m.num_actions));
        for (int x = 0; x < num_obs; ++x) {
            const int s = decode[x];
            for (int a = 0; a < m.num_actions; ++a) {
                std::vector<double> row(num_obs, 0.0);
                for (int xn = 0; xn < num_obs; ++xn) {
                    const int sn = decode[xn];
                    row[xn] = latent.transitions[h][s][a][sn] / emissions[sn];
                }
                m.transitions[h][x][a] = std::move(row);
                m.rewards[h][x][a] = latent.rewards[h][s][a];
            }
        }
    }
    m.validate();
    return m;
}

} // namespace covrl
