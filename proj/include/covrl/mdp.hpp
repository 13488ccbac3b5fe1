#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "covrl/rng.hpp"

namespace covrl {

// State-action table, indexed [x][a].
template <class T>
using SaTable = std::vector<std::vector<T>>;

struct RewardAtom {
    double value = 0.0;
    double prob = 0.0;
    bool operator==(const RewardAtom&) const = default;
};

// Finite discrete reward distribution.
using RewardDist = std::vector<RewardAtom>;

inline double mean_of(const RewardDist& d) {
    double m = 0.0;
    for (const auto& a : d) m += a.value * a.prob;
    return m;
}

inline double second_moment_of(const RewardDist& d) {
    double m = 0.0;
    for (const auto& a : d) m += a.value * a.value * a.prob;
    return m;
}

inline double max_value_of(const RewardDist& d) {
    double m = 0.0;
    for (const auto& a : d)
        if (a.prob > 0.0) m = std::max(m, a.value);
    return m;
}

// Finite episodic MDP with layered transitions and rewards. Layers are
// 0-based: h in [0, horizon). The trajectory-terminal index is num_states.
struct TabularMdp {
    int num_states = 0;
    int num_actions = 0;
    int horizon = 0;
    std::vector<double> initial_dist;                    // [x]
    std::vector<SaTable<std::vector<double>>> transitions; // [h][x][a] -> next-state probs
    std::vector<SaTable<RewardDist>> rewards;            // [h][x][a]

    int terminal_state() const { return num_states; }

    double mean_reward(int h, int x, int a) const { return mean_of(rewards[h][x][a]); }

    bool operator==(const TabularMdp&) const = default;

    // Checks shapes, simplex rows (tol 1e-12) and the trajectory reward
    // normalization: sum over layers of the largest supported reward value
    // must not exceed 1. This is a conservative sufficient condition for
    // sum_h r_h <= 1 almost surely.
    void validate() const {
        if (num_states <= 0 || num_actions <= 0 || horizon <= 0)
            throw std::invalid_argument("TabularMdp: sizes must be positive");
        const auto S = static_cast<std::size_t>(num_states);
        const auto A = static_cast<std::size_t>(num_actions);
        const auto H = static_cast<std::size_t>(horizon);
        if (initial_dist.size() != S || transitions.size() != H || rewards.size() != H)
            throw std::invalid_argument("TabularMdp: shape mismatch");
        check_simplex(initial_dist, "initial_dist");
        double total_max_reward = 0.0;
        for (std::size_t h = 0; h < H; ++h) {
            if (transitions[h].size() != S || rewards[h].size() != S)
                throw std::invalid_argument("TabularMdp: shape mismatch");
            double layer_max = 0.0;
            for (std::size_t x = 0; x < S; ++x) {
                if (transitions[h][x].size() != A || rewards[h][x].size() != A)
                    throw std::invalid_argument("TabularMdp: shape mismatch");
                for (std::size_t a = 0; a < A; ++a) {
                    if (transitions[h][x][a].size() != S)
                        throw std::invalid_argument("TabularMdp: transition row size");
                    check_simplex(transitions[h][x][a], "transition row");
                    double psum = 0.0;
                    for (const auto& atom : rewards[h][x][a]) {
                        if (atom.value < 0.0 || atom.value > 1.0 || atom.prob < 0.0)
                            throw std::invalid_argument("TabularMdp: reward atom out of range");
                        psum += atom.prob;
                    }
                    if (std::abs(psum - 1.0) > 1e-12)
                        throw std::invalid_argument("TabularMdp: reward probs must sum to 1");
                    layer_max = std::max(layer_max, max_value_of(rewards[h][x][a]));
                }
            }
            total_max_reward += layer_max;
        }
        if (total_max_reward > 1.0 + 1e-9)
            throw std::invalid_argument("TabularMdp: per-trajectory reward can exceed 1");
    }

private:
    static void check_simplex(std::span<const double> p, const char* what) {
        double sum = 0.0;
        for (double v : p) {
            if (v < 0.0) throw std::invalid_argument(std::string(what) + ": negative probability");
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-12)
            throw std::invalid_argument(std::string(what) + ": does not sum to 1");
    }
};

// Layered policy; deterministic policies carry an action table, randomized
// ones a per-state distribution over actions.
struct Policy {
    bool deterministic = true;
    std::vector<std::vector<int>> actions;              // [h][x], deterministic only
    std::vector<SaTable<double>> action_probs;          // [h][x][a], randomized only

    static Policy make_deterministic(std::vector<std::vector<int>> acts) {
        Policy p;
        p.deterministic = true;
        p.actions = std::move(acts);
        return p;
    }

    static Policy make_randomized(std::vector<SaTable<double>> probs) {
        Policy p;
        p.deterministic = false;
        p.action_probs = std::move(probs);
        for (const auto& layer : p.action_probs)
            for (const auto& row : layer) {
                double s = 0.0;
                for (double v : row) s += v;
                if (std::abs(s - 1.0) > 1e-12)
                    throw std::invalid_argument("Policy: action probs must sum to 1");
            }
        return p;
    }

    static Policy uniform(int num_states, int num_actions, int horizon) {
        std::vector<SaTable<double>> probs(
            horizon, SaTable<double>(num_states,
                                     std::vector<double>(num_actions, 1.0 / num_actions)));
        return make_randomized(std::move(probs));
    }

    double prob(int h, int x, int a) const {
        if (deterministic) return actions[h][x] == a ? 1.0 : 0.0;
        return action_probs[h][x][a];
    }

    int sample_action(int h, int x, Rng& rng) const {
        if (deterministic) return actions[h][x];
        return static_cast<int>(rng.categorical(action_probs[h][x]));
    }

    // Point-mass randomized representation of a deterministic policy.
    Policy as_randomized(int num_actions) const {
        if (!deterministic) return *this;
        std::vector<SaTable<double>> probs(actions.size());
        for (std::size_t h = 0; h < actions.size(); ++h) {
            probs[h].assign(actions[h].size(), std::vector<double>(num_actions, 0.0));
            for (std::size_t x = 0; x < actions[h].size(); ++x)
                probs[h][x][actions[h][x]] = 1.0;
        }
        return make_randomized(std::move(probs));
    }

    bool operator==(const Policy&) const = default;
};

// Layered state-action value table; entries live in [0,1] and f_{H} (the
// layer past the end) is identically zero.
struct ValueFunction {
    std::vector<SaTable<double>> q; // [h][x][a]

    static ValueFunction zeros(int num_states, int num_actions, int horizon) {
        ValueFunction f;
        f.q.assign(horizon, SaTable<double>(num_states, std::vector<double>(num_actions, 0.0)));
        return f;
    }

    double value(int h, int x, int a) const { return q[h][x][a]; }
    int horizon() const { return static_cast<int>(q.size()); }

    double max_over_actions(int h, int x) const {
        // layer == horizon means the implicit zero function past the end
        if (h == horizon()) return 0.0;
        const auto& row = q[h][x];
        return *std::max_element(row.begin(), row.end());
    }

    int argmax_action(int h, int x) const {
        const auto& row = q[h][x];
        int best = 0;
        for (int a = 1; a < static_cast<int>(row.size()); ++a)
            if (row[a] > row[best]) best = a; // ties keep the lowest index
        return best;
    }

    bool operator==(const ValueFunction&) const = default;
};

struct TrajectoryStep {
    int x = 0;
    int a = 0;
    double r = 0.0;
    int next_x = 0;
    bool operator==(const TrajectoryStep&) const = default;
};

// Exactly horizon steps; the last step's next_x is the terminal index.
struct Trajectory {
    std::vector<TrajectoryStep> steps;
    bool operator==(const Trajectory&) const = default;
};

// Ordered list of deterministic policies.
struct PolicyClass {
    std::vector<Policy> policies;
    bool induced_from_values = false;

    std::size_t size() const { return policies.size(); }
};

// ---------------------------------------------------------------------------
// Planning and simulation
// ---------------------------------------------------------------------------

/// One application of the Bellman optimality operator at layer h (0-based):
/// out(x,a) = E[r_h] + sum_{x'} P_h(x'|x,a) max_{a'} f_{h+1}(x',a').
inline SaTable<double> bellman_apply(const TabularMdp& mdp, const ValueFunction& f, int h) {
    if (h < 0 || h >= mdp.horizon) throw std::out_of_range("bellman_apply: layer out of range");
    SaTable<double> out(mdp.num_states, std::vector<double>(mdp.num_actions, 0.0));
    std::vector<double> next_max(mdp.num_states, 0.0);
    if (h + 1 < mdp.horizon)
        for (int x = 0; x < mdp.num_states; ++x) next_max[x] = f.max_over_actions(h + 1, x);
    for (int x = 0; x < mdp.num_states; ++x)
        for (int a = 0; a < mdp.num_actions; ++a) {
            double v = mdp.mean_reward(h, x, a);
            if (h + 1 < mdp.horizon)
                for (int xn = 0; xn < mdp.num_states; ++xn)
                    v += mdp.transitions[h][x][a][xn] * next_max[xn];
            out[x][a] = v;
        }
    return out;
}

/// Optimal state-action values by backward induction.
inline ValueFunction q_star(const TabularMdp& mdp) {
    ValueFunction f = ValueFunction::zeros(mdp.num_states, mdp.num_actions, mdp.horizon);
    for (int h = mdp.horizon - 1; h >= 0; --h) f.q[h] = bellman_apply(mdp, f, h);
    return f;
}

/// Greedy deterministic policy of f; argmax ties go to the lowest action.
inline Policy greedy_policy(const ValueFunction& f) {
    std::vector<std::vector<int>> acts(f.q.size());
    for (std::size_t h = 0; h < f.q.size(); ++h) {
        acts[h].resize(f.q[h].size());
        for (std::size_t x = 0; x < f.q[h].size(); ++x)
            acts[h][x] = f.argmax_action(static_cast<int>(h), static_cast<int>(x));
    }
    return Policy::make_deterministic(std::move(acts));
}

/// Exact expected total reward J(pi) by forward distribution propagation.
inline double j_value(const TabularMdp& mdp, const Policy& pi) {
    std::vector<double> dist = mdp.initial_dist; // state distribution at layer h
    double total = 0.0;
    for (int h = 0; h < mdp.horizon; ++h) {
        std::vector<double> next(mdp.num_states, 0.0);
        for (int x = 0; x < mdp.num_states; ++x) {
            if (dist[x] == 0.0) continue;
            for (int a = 0; a < mdp.num_actions; ++a) {
                const double w = dist[x] * pi.prob(h, x, a);
                if (w == 0.0) continue;
                total += w * mdp.mean_reward(h, x, a);
                for (int xn = 0; xn < mdp.num_states; ++xn)
                    next[xn] += w * mdp.transitions[h][x][a][xn];
            }
        }
        dist.swap(next);
    }
    return total;
}

/// One episode under pi; fully determined by the rng stream. The final
/// step records the designated terminal index as its successor.
inline Trajectory sample_trajectory(const TabularMdp& mdp, const Policy& pi, Rng& rng) {
    Trajectory traj;
    traj.steps.reserve(mdp.horizon);
    int x = static_cast<int>(rng.categorical(mdp.initial_dist));
    for (int h = 0; h < mdp.horizon; ++h) {
        const int a = pi.sample_action(h, x, rng);
        const RewardDist& rd = mdp.rewards[h][x][a];
        double r = 0.0;
        if (rd.size() == 1) {
            r = rd[0].value;
        } else {
            std::vector<double> probs(rd.size());
            for (std::size_t i = 0; i < rd.size(); ++i) probs[i] = rd[i].prob;
            r = rd[rng.categorical(probs)].value;
        }
        int xn;
        if (h + 1 < mdp.horizon) {
            xn = static_cast<int>(rng.categorical(mdp.transitions[h][x][a]));
        } else {
            xn = mdp.terminal_state();
        }
        traj.steps.push_back({x, a, r, xn});
        x = xn;
    }
    return traj;
}

/// Policies induced by a list of value functions, duplicates removed,
/// ordered by the first inducing index.
inline PolicyClass induced_policies(const std::vector<ValueFunction>& values) {
    PolicyClass pc;
    pc.induced_from_values = true;
    for (const auto& f : values) {
        Policy p = greedy_policy(f);
        bool dup = false;
        for (const auto& q : pc.policies)
            if (q == p) { dup = true; break; }
        if (!dup) pc.policies.push_back(std::move(p));
    }
    return pc;
}

} // namespace covrl
