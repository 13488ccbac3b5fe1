#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "covrl/coverage.hpp"
#include "covrl/dataset.hpp"
#include "covrl/function_classes.hpp"
#include "covrl/mdp.hpp"
#include "covrl/rng.hpp"

namespace covrl {

enum class GlowPreset { manual, thm1, thm2 };

struct GlowConfig {
    int T = 1;
    int K = 1;
    double gamma = 0.5;   // clip base, in (0,1]
    double delta = 0.05;  // failure probability
    double log_f = 0.0;   // log |F|
    double log_w = 0.0;   // log |W|
    GlowPreset preset = GlowPreset::manual;
    double epsilon = 0.0; // target suboptimality for presets
    bool exact_expectation = false;

    void validate() const {
        if (T < 1 || K < 1) throw std::invalid_argument("GlowConfig: T and K must be >= 1");
        if (!(gamma > 0.0) || gamma > 1.0) throw std::invalid_argument("GlowConfig: gamma in (0,1]");
        if (!(delta > 0.0) || delta >= 1.0) throw std::invalid_argument("GlowConfig: delta in (0,1)");
    }
};

struct ScheduleValues {
    double gamma_t = 0.0;
    double alpha_t = 0.0;
    std::optional<double> beta_t; // absent for t = 1
};

/// Per-iteration parameters (t is 1-based):
/// gamma^t = gamma*t, alpha^t = 8/gamma^t,
/// beta^t  = (36 gamma^t / (K(t-1))) * log(6|F||W|TH/delta) for t >= 2.
inline ScheduleValues schedule(const GlowConfig& cfg, int horizon, int t) {
    if (t < 1 || t > cfg.T) throw std::out_of_range("schedule: t out of range");
    ScheduleValues s;
    s.gamma_t = cfg.gamma * t;
    s.alpha_t = 8.0 / s.gamma_t;
    if (t >= 2) {
        const double log_term =
            cfg.log_f + cfg.log_w + std::log(6.0 * cfg.T * horizon / cfg.delta);
        s.beta_t = (36.0 * s.gamma_t / (cfg.K * (t - 1))) * log_term;
    }
    return s;
}

/// Empirical regularized statistic over one data layer:
/// mean_i [ Dhat_f(x,a,r,x') * w~(x,a) - alpha * w~(x,a)^2 ],
/// with w~ the clip-evaluated weight at gamma_t and f_{H} = 0 implicit.
inline double residual_statistic(const std::vector<Sample>& data_h, const ValueFunction& f,
                                 const WeightFunction& w, int h, double gamma_t, double alpha_t) {
    if (data_h.empty()) throw std::invalid_argument("residual_statistic: empty dataset");
    double acc = 0.0;
    for (const Sample& s : data_h) {
        const double next = (h + 1 < f.horizon()) ? f.max_over_actions(h + 1, s.next_x) : 0.0;
        const double dhat = f.value(h, s.x, s.a) - s.r - next;
        const double wt = w.eval(h, s.x, s.a, gamma_t);
        acc += dhat * wt - alpha_t * wt * wt;
    }
    return acc / static_cast<double>(data_h.size());
}

/// Exact-expectation counterpart: the empirical mean is replaced by the
/// expectation under rho_h, so Dhat_f collapses to the Bellman residual
/// f_h - T_h f_{h+1} (precomputed in bellman_row).
inline double residual_statistic_exact(const LayerDist& rho_h, const SaTable<double>& f_h,
                                       const SaTable<double>& bellman_row, const WeightFunction& w,
                                       int h, double gamma_t, double alpha_t) {
    double acc = 0.0;
    for (std::size_t x = 0; x < rho_h.size(); ++x)
        for (std::size_t a = 0; a < rho_h[x].size(); ++a) {
            const double mass = rho_h[x][a];
            if (mass == 0.0) continue;
            const double delta = f_h[x][a] - bellman_row[x][a];
            const double wt = w.eval(h, static_cast<int>(x), static_cast<int>(a), gamma_t);
            acc += mass * (delta * wt - alpha_t * wt * wt);
        }
    return acc;
}

// Expectation backend shared by the confidence set and optimistic selection:
// either an empirical dataset or the exact data law (mdp + per-layer rho).
struct GlowEvalContext {
    const LayeredDataset* data = nullptr;   // empirical mode
    const TabularMdp* mdp = nullptr;        // exact mode
    const Occupancy* rho = nullptr;         // exact mode data law
    bool exact() const { return mdp != nullptr; }
};

/// Indices of F^(t) = { f : for all h, sup_w statistic <= beta_t }.
/// For t = 1 (no data) the whole class is returned.
inline std::vector<std::size_t> confidence_set(const ValueClass& F,
                                               const std::vector<WeightFunction>& weights,
                                               const GlowEvalContext& ctx, const GlowConfig& cfg,
                                               int horizon, int t) {
    std::vector<std::size_t> out;
    if (t <= 1) {
        for (std::size_t i = 0; i < F.size(); ++i) out.push_back(i);
        return out;
    }
    const ScheduleValues sch = schedule(cfg, horizon, t);
    const double beta = *sch.beta_t;
    for (std::size_t fi = 0; fi < F.size(); ++fi) {
        const ValueFunction& f = F[fi];
        std::vector<SaTable<double>> bellman_rows;
        if (ctx.exact()) {
            bellman_rows.resize(horizon);
            for (int h = 0; h < horizon; ++h) bellman_rows[h] = bellman_apply(*ctx.mdp, f, h);
        }
        bool ok = true;
        for (int h = 0; h < horizon && ok; ++h)
            for (const WeightFunction& w : weights) {
                const double stat =
                    ctx.exact()
                        ? residual_statistic_exact(ctx.rho->layers[h], f.q[h], bellman_rows[h], w,
                                                   h, sch.gamma_t, sch.alpha_t)
                        : residual_statistic(ctx.data->layers[h], f, w, h, sch.gamma_t, sch.alpha_t);
                if (stat > beta) { ok = false; break; }
            }
        if (ok) out.push_back(fi);
    }
    return out;
}

/// Empirical initial value of f under the layer-0 states of D_1.
inline double empirical_initial_value(const ValueFunction& f, const Policy& pi_f,
                                      const GlowEvalContext& ctx) {
    if (ctx.exact()) {
        double acc = 0.0;
        for (int x = 0; x < ctx.mdp->num_states; ++x) {
            const double mass = ctx.mdp->initial_dist[x];
            if (mass > 0.0) acc += mass * f.value(0, x, pi_f.actions[0][x]);
        }
        return acc;
    }
    const auto& d1 = ctx.data->layers[0];
    if (d1.empty()) throw std::logic_error("empirical_initial_value: no layer-0 data");
    double acc = 0.0;
    for (const Sample& s : d1) acc += f.value(0, s.x, pi_f.actions[0][s.x]);
    return acc / static_cast<double>(d1.size());
}

/// argmax over candidate indices of the empirical initial value, ties to the
/// lowest index. With no data yet (t = 1) the lowest index of F is returned.
inline std::size_t optimistic_select(const std::vector<std::size_t>& candidates,
                                     const ValueClass& F, const std::vector<Policy>& greedy,
                                     const GlowEvalContext& ctx, bool have_data) {
    if (candidates.empty())
        throw std::runtime_error("optimistic_select: empty confidence set (beta schedule broken)");
    if (!have_data) return candidates.front();
    std::size_t best = candidates.front();
    double best_val = empirical_initial_value(F[best], greedy[best], ctx);
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        const std::size_t c = candidates[i];
        const double v = empirical_initial_value(F[c], greedy[c], ctx);
        if (v > best_val) { best = c; best_val = v; }
    }
    return best;
}

struct IterationRow {
    int t = 0;
    int f_index = 0;
    double j_pi = 0.0;
    double inst_regret = 0.0;
    double cum_regret = 0.0;
    int confset_size = 0;
    bool optimism_ok = true;
    bool qstar_in_set = true;    // meaningful only when F tracks Q*
    int offline_size = 0;        // hybrid runs only
    int hybrid_size = 0;         // hybrid runs only
    double solver_objective = 0; // hybrid runs only
    bool operator==(const IterationRow&) const = default;
};

// Full trace of one run; the output policy is Unif(pi^1..pi^T).
struct RunRecord {
    std::vector<IterationRow> rows;
    std::vector<int> policy_indices; // member index chosen at each t
    std::vector<Policy> policies;    // pi^(t) per iteration
    double j_star = 0.0;
    double cum_regret = 0.0;
    double final_risk = 0.0; // (1/T) sum_t (J* - J(pi^t))
    bool operator==(const RunRecord&) const = default;
};

/// Full online loop: confidence set -> optimistic policy -> K trajectories.
/// With oracle W, the weight list at iteration t holds, for every candidate
/// pi, the clipped ratio of d^pi against the mixture of the executed
/// occupancies with pi itself included — so the analysis weight
/// clip(d^{pi^t}/dbar^{t+1}, gamma^t) is always materialized.
inline RunRecord glow_run(const TabularMdp& mdp, const ValueClass& F, const WeightClass& W,
                          const GlowConfig& cfg, Rng& rng) {
    cfg.validate();
    const int H = mdp.horizon;
    const ValueFunction qs = q_star(mdp);
    const Policy pi_star = greedy_policy(qs);
    const double j_star = j_value(mdp, pi_star);

    std::vector<Policy> greedy(F.size());
    std::vector<double> j_of(F.size());
    std::vector<Occupancy> occ_of(F.size());
    for (std::size_t i = 0; i < F.size(); ++i) {
        greedy[i] = greedy_policy(F[i]);
        j_of[i] = j_value(mdp, greedy[i]);
        occ_of[i] = occupancy(mdp, greedy[i]);
    }

    LayeredDataset data(H);
    Occupancy occ_sum; // unnormalized sum of executed occupancies
    occ_sum.layers.assign(H, LayerDist(mdp.num_states, std::vector<double>(mdp.num_actions, 0.0)));
    Occupancy rho_exact; // d-bar^(t), exact-mode data law

    RunRecord rec;
    rec.j_star = j_star;
    double cum = 0.0;
    for (int t = 1; t <= cfg.T; ++t) {
        // weight list for this iteration
        std::vector<WeightFunction> weights;
        if (t >= 2) {
            if (W.mode == WeightClass::Mode::Static) {
                weights = W.members;
            } else {
                const double gamma_t = cfg.gamma * t;
                weights.reserve(F.size());
                for (std::size_t i = 0; i < F.size(); ++i) {
                    WeightFunction w;
                    w.layers.assign(H, LayerDist(mdp.num_states,
                                                 std::vector<double>(mdp.num_actions, 0.0)));
                    for (int h = 0; h < H; ++h)
                        for (int x = 0; x < mdp.num_states; ++x)
                            for (int a = 0; a < mdp.num_actions; ++a) {
                                const double mix =
                                    (occ_sum.layers[h][x][a] + occ_of[i].layers[h][x][a]) / t;
                                w.layers[h][x][a] =
                                    clip(ratio(occ_of[i].layers[h][x][a], mix), gamma_t);
                            }
                    weights.push_back(std::move(w));
                }
            }
        }

        GlowEvalContext ctx;
        if (cfg.exact_expectation) {
            ctx.mdp = &mdp;
            ctx.rho = &rho_exact;
        } else {
            ctx.data = &data;
        }

        const std::vector<std::size_t> confset = confidence_set(F, weights, ctx, cfg, H, t);
        const std::size_t chosen = optimistic_select(confset, F, greedy, ctx, t >= 2);

        // optimism check against Q* whenever Q* is known to be in the set
        bool optimism_ok = true;
        bool qstar_in_set = true;
        if (F.qstar_index >= 0) {
            const auto qi = static_cast<std::size_t>(F.qstar_index);
            qstar_in_set = std::find(confset.begin(), confset.end(), qi) != confset.end();
            if (t >= 2 && qstar_in_set) {
                const double v_sel = empirical_initial_value(F[chosen], greedy[chosen], ctx);
                const double v_q = empirical_initial_value(F[qi], greedy[qi], ctx);
                optimism_ok = v_sel >= v_q - 1e-12;
            }
        }

        // oracle-mode realizability assert: the chosen policy's analysis
        // weight must be present in the materialized list
        if (t >= 2 && W.mode == WeightClass::Mode::Oracle) {
            bool found = false;
            const double gamma_t = cfg.gamma * t;
            WeightFunction expect;
            expect.layers.assign(H, LayerDist(mdp.num_states,
                                              std::vector<double>(mdp.num_actions, 0.0)));
            for (int h = 0; h < H; ++h)
                for (int x = 0; x < mdp.num_states; ++x)
                    for (int a = 0; a < mdp.num_actions; ++a) {
                        const double mix =
                            (occ_sum.layers[h][x][a] + occ_of[chosen].layers[h][x][a]) / t;
                        expect.layers[h][x][a] =
                            clip(ratio(occ_of[chosen].layers[h][x][a], mix), gamma_t);
                    }
            for (const auto& w : weights)
                if (w == expect) { found = true; break; }
            if (!found) throw std::logic_error("glow_run: analysis weight not materialized");
        }

        const double j_pi = j_of[chosen];
        cum += j_star - j_pi;
        IterationRow row;
        row.t = t;
        row.f_index = static_cast<int>(chosen);
        row.j_pi = j_pi;
        row.inst_regret = j_star - j_pi;
        row.cum_regret = cum;
        row.confset_size = static_cast<int>(confset.size());
        row.optimism_ok = optimism_ok;
        row.qstar_in_set = qstar_in_set;
        rec.rows.push_back(row);
        rec.policy_indices.push_back(static_cast<int>(chosen));
        rec.policies.push_back(greedy[chosen]);

        // data collection
        for (int h = 0; h < H; ++h)
            for (int x = 0; x < mdp.num_states; ++x)
                for (int a = 0; a < mdp.num_actions; ++a)
                    occ_sum.layers[h][x][a] += occ_of[chosen].layers[h][x][a];
        if (cfg.exact_expectation) {
            rho_exact = occ_sum;
            const double inv = 1.0 / t;
            for (auto& layer : rho_exact.layers)
                for (auto& row2 : layer)
                    for (double& v : row2) v *= inv;
        } else {
            for (int k = 0; k < cfg.K; ++k) {
                const Trajectory traj = sample_trajectory(mdp, greedy[chosen], rng);
                for (int h = 0; h < H; ++h)
                    data.push(h, {traj.steps[h].x, traj.steps[h].a, traj.steps[h].r,
                                  traj.steps[h].next_x, t});
            }
            for (int h = 0; h < H; ++h)
                if (data.layers[h].size() != static_cast<std::size_t>(cfg.K) * t)
                    throw std::logic_error("glow_run: dataset size invariant broken");
        }
    }
    rec.cum_regret = cum;
    rec.final_risk = cum / cfg.T;
    return rec;
}

/// T, K and gamma for the strong (mixture) realizability regime:
/// T = c (H^2 C_cov / eps^2) L, K = 1, gamma = sqrt(C_cov / (T L)),
/// L = log|F| + log|W| + log(1/delta). gamma is clamped into (0,1].
inline GlowConfig preset_thm1(double epsilon, double c_cov, double log_f, double log_w,
                              double delta, int horizon, double constant = 1.0) {
    if (!(epsilon > 0.0) || !(c_cov > 0.0) || !(delta > 0.0) || delta >= 1.0 || horizon < 1 ||
        !(constant > 0.0))
        throw std::invalid_argument("preset_thm1: inputs must be positive");
    GlowConfig cfg;
    cfg.preset = GlowPreset::thm1;
    cfg.epsilon = epsilon;
    cfg.delta = delta;
    cfg.log_f = log_f;
    cfg.log_w = log_w;
    const double L = log_f + log_w + std::log(1.0 / delta);
    cfg.T = static_cast<int>(
        std::ceil(constant * horizon * horizon * c_cov / (epsilon * epsilon) * L));
    cfg.T = std::max(cfg.T, 1);
    cfg.K = 1;
    cfg.gamma = std::min(1.0, std::sqrt(c_cov / (cfg.T * L)));
    return cfg;
}

/// T, K and gamma for the pure-policy realizability regime (mixture-augmented
/// class): T = c H^2 C_cov / eps^2, K = c T L, gamma = sqrt(C_cov / T).
inline GlowConfig preset_thm2(double epsilon, double c_cov, double log_f, double log_w,
                              double delta, int horizon, double constant = 1.0) {
    if (!(epsilon > 0.0) || !(c_cov > 0.0) || !(delta > 0.0) || delta >= 1.0 || horizon < 1 ||
        !(constant > 0.0))
        throw std::invalid_argument("preset_thm2: inputs must be positive");
    GlowConfig cfg;
    cfg.preset = GlowPreset::thm2;
    cfg.epsilon = epsilon;
    cfg.delta = delta;
    cfg.log_f = log_f;
    cfg.log_w = log_w;
    const double L = log_f + log_w + std::log(1.0 / delta);
    cfg.T = std::max(1, static_cast<int>(std::ceil(
                            constant * horizon * horizon * c_cov / (epsilon * epsilon))));
    cfg.K = std::max(1, static_cast<int>(std::ceil(constant * cfg.T * L)));
    cfg.gamma = std::min(1.0, std::sqrt(c_cov / cfg.T));
    return cfg;
}

} // namespace covrl
