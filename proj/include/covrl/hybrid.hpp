#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "covrl/glow.hpp"
#include "covrl/offline.hpp"

namespace covrl {

enum class SolverKind { mabo_cr, fqi, mle };

struct HybridConfig {
    int T = 1;
    SolverKind solver = SolverKind::mabo_cr;
    double gamma = 0.5;   // clip base for the minimax solver
    double delta = 0.05;
    bool exact_expectation = false;
    bool allow_empty_offline = false; // pure-online reduction (no offline data)

    void validate() const {
        if (T < 1) throw std::invalid_argument("HybridConfig: T must be >= 1");
        if (!(gamma > 0.0) || gamma > 1.0)
            throw std::invalid_argument("HybridConfig: gamma in (0,1]");
    }
};

// Everything an offline solver may look at when invoked inside the hybrid
// loop at iteration t. `mix` is the exact average occupancy of the policies
// executed so far (simulator privilege; null at t = 1).
struct HybridStepContext {
    int t = 1;
    const LayeredDataset* hybrid = nullptr; // empirical mode
    const ExactOffline* exact = nullptr;    // exact-expectation mode
    const Occupancy* mix = nullptr;
};

using HybridSolverFn = std::function<SolverResult(const HybridStepContext&)>;

/// Hybrid-to-offline reduction: at each iteration the black-box offline
/// solver runs on the first t-1 offline tuples per layer merged with all
/// online data, then one trajectory is collected with its output policy.
/// The empty first call is answered by `default_policy` (recorded with
/// f_index = default_index). Output policy is Unif(pi^1..pi^T).
inline RunRecord h2o_run(const TabularMdp& mdp, const HybridSolverFn& solve,
                         const Policy& default_policy, int default_index,
                         const LayeredDataset& d_off, const DataDistribution* nu,
                         const HybridConfig& cfg, Rng& rng) {
    cfg.validate();
    const int H = mdp.horizon;
    const int T = cfg.T;
    if (!cfg.allow_empty_offline) {
        for (int h = 0; h < H; ++h)
            if (static_cast<int>(d_off.layer_size(h)) < T)
                throw std::invalid_argument("h2o_run: offline data undersized (need T per layer)");
    }
    if (cfg.exact_expectation && nu == nullptr && !cfg.allow_empty_offline)
        throw std::invalid_argument("h2o_run: exact mode needs the offline data law");

    const ValueFunction qs = q_star(mdp);
    const double j_star = j_value(mdp, greedy_policy(qs));

    RunRecord rec;
    rec.j_star = j_star;
    LayeredDataset d_on(H);
    LayeredDataset d_hybrid(H);
    Occupancy occ_sum;
    occ_sum.layers.assign(H, LayerDist(mdp.num_states, std::vector<double>(mdp.num_actions, 0.0)));
    Occupancy mix;       // occ_sum / (t-1)
    DataDistribution mu; // exact-mode hybrid law 0.5(nu + mix)
    double cum = 0.0;

    for (int t = 1; t <= T; ++t) {
        Policy pi_t = default_policy;
        int f_index = default_index;
        double objective = 0.0;
        const std::size_t hybrid_n =
            cfg.exact_expectation ? 2 * static_cast<std::size_t>(t - 1) : d_hybrid.uniform_size();
        if (hybrid_n > 0) {
            HybridStepContext ctx;
            ctx.t = t;
            ctx.mix = &mix;
            ExactOffline exact;
            if (cfg.exact_expectation) {
                mu.layers.assign(H, LayerDist(mdp.num_states,
                                              std::vector<double>(mdp.num_actions, 0.0)));
                for (int h = 0; h < H; ++h)
                    for (int x = 0; x < mdp.num_states; ++x)
                        for (int a = 0; a < mdp.num_actions; ++a) {
                            const double off = cfg.allow_empty_offline ? 0.0 : nu->layers[h][x][a];
                            const double on = mix.layers[h][x][a];
                            mu.layers[h][x][a] =
                                cfg.allow_empty_offline ? on : 0.5 * (off + on);
                        }
                mu.tag = "hybrid_mix";
                exact.mdp = &mdp;
                exact.mu = &mu;
                exact.nominal_n = hybrid_n;
                ctx.exact = &exact;
            } else {
                ctx.hybrid = &d_hybrid;
            }
            SolverResult res = solve(ctx);
            pi_t = std::move(res.pi_hat);
            f_index = static_cast<int>(res.chosen_index);
            objective = res.objective;
        }

        const double j_pi = j_value(mdp, pi_t);
        cum += j_star - j_pi;
        IterationRow row;
        row.t = t;
        row.f_index = f_index;
        row.j_pi = j_pi;
        row.inst_regret = j_star - j_pi;
        row.cum_regret = cum;
        row.offline_size = cfg.allow_empty_offline ? 0 : t - 1;
        row.hybrid_size = static_cast<int>(hybrid_n);
        row.solver_objective = objective;
        rec.rows.push_back(row);
        rec.policy_indices.push_back(f_index);
        rec.policies.push_back(pi_t);

        // bookkeeping for the next iteration
        const Occupancy d_t = occupancy(mdp, pi_t);
        for (int h = 0; h < H; ++h)
            for (int x = 0; x < mdp.num_states; ++x)
                for (int a = 0; a < mdp.num_actions; ++a)
                    occ_sum.layers[h][x][a] += d_t.layers[h][x][a];
        mix = occ_sum;
        for (auto& layer : mix.layers)
            for (auto& row2 : layer)
                for (double& v : row2) v /= t;

        if (!cfg.exact_expectation) {
            const Trajectory traj = sample_trajectory(mdp, pi_t, rng);
            for (int h = 0; h < H; ++h)
                d_on.push(h, {traj.steps[h].x, traj.steps[h].a, traj.steps[h].r,
                              traj.steps[h].next_x, t});
            d_hybrid = cfg.allow_empty_offline ? d_on : d_off.prefix(t).merged_with(d_on);
        }
    }
    rec.cum_regret = cum;
    rec.final_risk = cum / T;
    return rec;
}

/// Minimax solver step for the hybrid loop. With an oracle weight class the
/// base ratios d^pi / mu^(t) are materialized against the realized hybrid
/// law mu^(t) = 0.5(nu + mix) before the signed/masked augmentation.
inline HybridSolverFn make_mabo_solver(const ValueClass& F, const WeightClass& W, double gamma,
                                       const DataDistribution* nu, bool per_iteration_scale) {
    WeightClass static_aug;
    if (W.mode == WeightClass::Mode::Static) static_aug = mabo_augment(W);
    return [&F, W, gamma, nu, per_iteration_scale,
            static_aug](const HybridStepContext& ctx) -> SolverResult {
        std::optional<double> scale;
        if (per_iteration_scale) scale = gamma * ctx.t;
        const WeightClass* aug = &static_aug;
        WeightClass local;
        if (W.mode == WeightClass::Mode::Oracle) {
            Occupancy mu_t;
            mu_t.tag = "mu_t";
            mu_t.layers = ctx.mix->layers;
            if (nu != nullptr)
                for (std::size_t h = 0; h < mu_t.layers.size(); ++h)
                    for (std::size_t x = 0; x < mu_t.layers[h].size(); ++x)
                        for (std::size_t a = 0; a < mu_t.layers[h][x].size(); ++a)
                            mu_t.layers[h][x][a] =
                                0.5 * (nu->layers[h][x][a] + mu_t.layers[h][x][a]);
            const std::size_t n = ctx.exact ? ctx.exact->nominal_n : ctx.hybrid->uniform_size();
            const double gamma_n = scale.value_or(gamma * static_cast<double>(n));
            local = mabo_augment(
                WeightClass::make_static(W.materialize(mu_t, gamma_n)));
            aug = &local;
        }
        if (ctx.exact) return mabo_cr_exact(*ctx.exact, F, *aug, gamma, scale);
        return mabo_cr(*ctx.hybrid, F, *aug, gamma, scale);
    };
}

inline HybridSolverFn make_fqi_solver(const ValueClass& F) {
    return [&F](const HybridStepContext& ctx) -> SolverResult {
        if (ctx.exact) return fqi_exact(*ctx.exact, F);
        return fqi(*ctx.hybrid, F);
    };
}

inline HybridSolverFn make_mle_solver(const ModelClass& M) {
    return [&M](const HybridStepContext& ctx) -> SolverResult {
        if (ctx.exact) return mle_model_exact(*ctx.exact, M);
        return mle_model(*ctx.hybrid, M);
    };
}

/// The hybrid loop specialized with the clipped-regularized minimax solver
/// at per-iteration scale gamma^t = gamma*t.
inline RunRecord hyglow_run(const TabularMdp& mdp, const ValueClass& F, const WeightClass& W,
                            const LayeredDataset& d_off, const DataDistribution* nu,
                            const HybridConfig& cfg, Rng& rng) {
    const Policy default_policy = greedy_policy(F[0]);
    const HybridSolverFn solver =
        make_mabo_solver(F, W, cfg.gamma, nu, /*per_iteration_scale=*/true);
    return h2o_run(mdp, solver, default_policy, 0, d_off, nu, cfg, rng);
}

/// T and gamma for the hybrid preset:
/// T = c (H^4 (C_cov + C*) / eps^2) L, gamma = sqrt((C* + C_cov)/(T H^2 L)),
/// L = log|F| + log|W| + log(1/delta); gamma clamped into (0,1].
inline HybridConfig preset_hyglow(double epsilon, double c_cov, double c_star, int horizon,
                                  double log_f, double log_w, double delta,
                                  double constant = 1.0) {
    if (!(epsilon > 0.0) || !(c_cov > 0.0) || c_star < 0.0 || horizon < 1 || !(delta > 0.0) ||
        delta >= 1.0 || !(constant > 0.0))
        throw std::invalid_argument("preset_hyglow: inputs must be positive");
    HybridConfig cfg;
    cfg.solver = SolverKind::mabo_cr;
    cfg.delta = delta;
    const double L = log_f + log_w + std::log(1.0 / delta);
    const double h2 = static_cast<double>(horizon) * horizon;
    cfg.T = std::max(1, static_cast<int>(std::ceil(constant * h2 * h2 * (c_cov + c_star) /
                                                   (epsilon * epsilon) * L)));
    cfg.gamma = std::min(1.0, std::sqrt((c_star + c_cov) / (cfg.T * h2 * L)));
    return cfg;
}

} // namespace covrl
