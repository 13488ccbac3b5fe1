#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "covrl/coverage.hpp"
#include "covrl/dataset.hpp"
#include "covrl/function_classes.hpp"
#include "covrl/glow.hpp"
#include "covrl/mdp.hpp"
#include "covrl/rng.hpp"

namespace covrl {

// Per-layer sampling distribution over state-action cells.
struct DataDistribution {
    std::vector<LayerDist> layers; // [h][x][a]
    std::string tag;

    int horizon() const { return static_cast<int>(layers.size()); }

    static DataDistribution from_occupancy(const Occupancy& occ, std::string tag = {}) {
        DataDistribution d;
        d.layers = occ.layers;
        d.tag = tag.empty() ? occ.tag : std::move(tag);
        return d;
    }

    static DataDistribution make_explicit(std::vector<LayerDist> layers, std::string tag = {}) {
        DataDistribution d;
        d.layers = std::move(layers);
        d.tag = std::move(tag);
        d.validate();
        return d;
    }

    // Uniform over the cells (x,a) whose state is reachable at layer h under
    // some action sequence.
    static DataDistribution uniform_over_reachable(const TabularMdp& mdp) {
        DataDistribution d;
        d.tag = "uniform_reachable";
        d.layers.assign(mdp.horizon,
                        LayerDist(mdp.num_states, std::vector<double>(mdp.num_actions, 0.0)));
        std::vector<bool> reach(mdp.num_states, false);
        for (int x = 0; x < mdp.num_states; ++x) reach[x] = mdp.initial_dist[x] > 0.0;
        for (int h = 0; h < mdp.horizon; ++h) {
            int cells = 0;
            for (int x = 0; x < mdp.num_states; ++x)
                if (reach[x]) cells += mdp.num_actions;
            for (int x = 0; x < mdp.num_states; ++x)
                if (reach[x])
                    for (int a = 0; a < mdp.num_actions; ++a)
                        d.layers[h][x][a] = 1.0 / cells;
            if (h + 1 == mdp.horizon) break;
            std::vector<bool> next(mdp.num_states, false);
            for (int x = 0; x < mdp.num_states; ++x)
                if (reach[x])
                    for (int a = 0; a < mdp.num_actions; ++a)
                        for (int xn = 0; xn < mdp.num_states; ++xn)
                            if (mdp.transitions[h][x][a][xn] > 0.0) next[xn] = true;
            reach.swap(next);
        }
        return d;
    }

    void validate() const {
        for (const auto& layer : layers) {
            double sum = 0.0;
            for (const auto& row : layer)
                for (double v : row) {
                    if (v < 0.0) throw std::invalid_argument("DataDistribution: negative mass");
                    sum += v;
                }
            if (std::abs(sum - 1.0) > 1e-10)
                throw std::invalid_argument("DataDistribution: layer does not sum to 1");
        }
    }
};

/// n i.i.d. tuples per layer: (x,a) ~ mu_h, r ~ R_h(x,a), x' ~ P_h(x,a).
/// Tuple origins record the sample index.
inline LayeredDataset sample_offline(const TabularMdp& mdp, const DataDistribution& mu,
                                     std::size_t n, Rng& rng) {
    if (n < 1) throw std::invalid_argument("sample_offline: n must be >= 1");
    LayeredDataset data(mdp.horizon);
    std::vector<double> flat(static_cast<std::size_t>(mdp.num_states) * mdp.num_actions);
    for (int h = 0; h < mdp.horizon; ++h) {
        for (int x = 0; x < mdp.num_states; ++x)
            for (int a = 0; a < mdp.num_actions; ++a)
                flat[static_cast<std::size_t>(x) * mdp.num_actions + a] = mu.layers[h][x][a];
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t cell = rng.categorical(flat);
            const int x = static_cast<int>(cell) / mdp.num_actions;
            const int a = static_cast<int>(cell) % mdp.num_actions;
            const RewardDist& rd = mdp.rewards[h][x][a];
            double r = rd[0].value;
            if (rd.size() > 1) {
                std::vector<double> probs(rd.size());
                for (std::size_t k = 0; k < rd.size(); ++k) probs[k] = rd[k].prob;
                r = rd[rng.categorical(probs)].value;
            }
            const int xn = (h + 1 < mdp.horizon)
                               ? static_cast<int>(rng.categorical(mdp.transitions[h][x][a]))
                               : mdp.terminal_state();
            data.push(h, {x, a, r, xn, static_cast<int>(i)});
        }
    }
    return data;
}

// Exact-expectation substitute for an offline dataset: the data law plus the
// nominal sample count that drives the gamma^(n) schedule.
struct ExactOffline {
    const TabularMdp* mdp = nullptr;
    const DataDistribution* mu = nullptr;
    std::size_t nominal_n = 0;
};

struct SolverResult {
    std::size_t chosen_index = 0;    // value-function or model index
    ValueFunction f_hat;             // estimate (Q*-hat of the model for MLE)
    Policy pi_hat;
    double objective = 0.0;          // solver-specific objective of the choice
    std::vector<int> layer_choices;  // per-layer member picks (FQI / MLE)
};

namespace detail {

// Minimax objective of f at clip scale gamma_n:
// sum_h |E[w~ Dhat_f]| - alpha E[w~^2], maximized over the weight list.
// Returns the max value and the first witness index attaining it.
inline std::pair<double, std::size_t> mabo_objective(
    const ValueFunction& f, const std::vector<WeightFunction>& weights, double gamma_n,
    double alpha_n, const LayeredDataset* data, const ExactOffline* exact) {
    const int H = data ? data->horizon() : exact->mdp->horizon;
    std::vector<SaTable<double>> bellman_rows;
    if (exact) {
        bellman_rows.resize(H);
        for (int h = 0; h < H; ++h) bellman_rows[h] = bellman_apply(*exact->mdp, f, h);
    }
    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_w = 0;
    for (std::size_t wi = 0; wi < weights.size(); ++wi) {
        const WeightFunction& w = weights[wi];
        double total = 0.0;
        for (int h = 0; h < H; ++h) {
            double cross = 0.0, sq = 0.0;
            if (exact) {
                const LayerDist& mu_h = exact->mu->layers[h];
                for (std::size_t x = 0; x < mu_h.size(); ++x)
                    for (std::size_t a = 0; a < mu_h[x].size(); ++a) {
                        const double mass = mu_h[x][a];
                        if (mass == 0.0) continue;
                        const double wt = w.eval(h, static_cast<int>(x), static_cast<int>(a), gamma_n);
                        cross += mass * wt * (f.q[h][x][a] - bellman_rows[h][x][a]);
                        sq += mass * wt * wt;
                    }
            } else {
                const auto& layer = data->layers[h];
                for (const Sample& s : layer) {
                    const double next =
                        (h + 1 < f.horizon()) ? f.max_over_actions(h + 1, s.next_x) : 0.0;
                    const double dhat = f.value(h, s.x, s.a) - s.r - next;
                    const double wt = w.eval(h, s.x, s.a, gamma_n);
                    cross += dhat * wt;
                    sq += wt * wt;
                }
                cross /= static_cast<double>(layer.size());
                sq /= static_cast<double>(layer.size());
            }
            total += std::abs(cross) - alpha_n * sq;
        }
        if (total > best) { best = total; best_w = wi; }
    }
    return {best, best_w};
}

} // namespace detail

/// Clipped-regularized minimax average-Bellman estimator:
/// f_hat = argmin_f max_w sum_h |E_D[w~_h Dhat_f]| - alpha^n E_D[w~_h^2],
/// with gamma^n = gamma*n, alpha^n = 8/gamma^n and w~ = sign*clip(w, gamma^n).
/// `W_aug` is expected to be the signed/masked augmented class. Ties go to
/// the lowest f index. `gamma_scale` overrides gamma^n (the hybrid loop
/// passes gamma*t). Exactly one of `data`/`exact` supplies expectations.
inline SolverResult mabo_cr(const LayeredDataset* data, const ExactOffline* exact,
                            const ValueClass& F, const WeightClass& W_aug, double gamma,
                            std::optional<double> gamma_scale = {}) {
    if ((data == nullptr) == (exact == nullptr))
        throw std::invalid_argument("mabo_cr: need exactly one expectation source");
    const std::size_t n = data ? data->uniform_size() : exact->nominal_n;
    if (n == 0) throw std::invalid_argument("mabo_cr: empty dataset");
    if (W_aug.mode != WeightClass::Mode::Static)
        throw std::invalid_argument("mabo_cr: weight class must be materialized/static");
    const double gamma_n = gamma_scale.value_or(gamma * static_cast<double>(n));
    const double alpha_n = 8.0 / gamma_n;

    std::size_t best_f = 0;
    double best_obj = std::numeric_limits<double>::infinity();
    for (std::size_t fi = 0; fi < F.size(); ++fi) {
        const auto [obj, wi] =
            detail::mabo_objective(F[fi], W_aug.members, gamma_n, alpha_n, data, exact);
        (void)wi;
        if (obj < best_obj) { best_obj = obj; best_f = fi; }
    }
    SolverResult res;
    res.chosen_index = best_f;
    res.f_hat = F[best_f];
    res.pi_hat = greedy_policy(res.f_hat);
    res.objective = best_obj;
    return res;
}

inline SolverResult mabo_cr(const LayeredDataset& data, const ValueClass& F,
                            const WeightClass& W_aug, double gamma,
                            std::optional<double> gamma_scale = {}) {
    return mabo_cr(&data, nullptr, F, W_aug, gamma, gamma_scale);
}

inline SolverResult mabo_cr_exact(const ExactOffline& exact, const ValueClass& F,
                                  const WeightClass& W_aug, double gamma,
                                  std::optional<double> gamma_scale = {}) {
    return mabo_cr(nullptr, &exact, F, W_aug, gamma, gamma_scale);
}

/// Fitted Q-iteration over the per-layer slices of F: backward from
/// f_hat_H = 0, each layer picks the slice minimizing the empirical squared
/// error against r + max_a' f_hat_{h+1}(x',a'). Ties go to the lowest index.
inline SolverResult fqi(const LayeredDataset* data, const ExactOffline* exact,
                        const ValueClass& F) {
    if ((data == nullptr) == (exact == nullptr))
        throw std::invalid_argument("fqi: need exactly one expectation source");
    const int H = data ? data->horizon() : exact->mdp->horizon;
    if (data)
        for (int h = 0; h < H; ++h)
            if (data->layers[h].empty()) throw std::invalid_argument("fqi: empty layer");

    const int S = exact ? exact->mdp->num_states : 0;
    const int A = exact ? exact->mdp->num_actions : 0;
    SolverResult res;
    res.layer_choices.assign(H, 0);
    ValueFunction f_hat;
    f_hat.q.resize(H);
    for (int h = H - 1; h >= 0; --h) {
        double best_err = std::numeric_limits<double>::infinity();
        std::size_t best_j = 0;
        for (std::size_t j = 0; j < F.size(); ++j) {
            const auto& slice = F[j].q[h];
            double err = 0.0;
            if (exact) {
                const LayerDist& mu_h = exact->mu->layers[h];
                for (int x = 0; x < S; ++x)
                    for (int a = 0; a < A; ++a) {
                        const double mass = mu_h[x][a];
                        if (mass == 0.0) continue;
                        const RewardDist& rd = exact->mdp->rewards[h][x][a];
                        const double m1r = mean_of(rd);
                        const double m2r = second_moment_of(rd);
                        double m1v = 0.0, m2v = 0.0;
                        if (h + 1 < H)
                            for (int xn = 0; xn < S; ++xn) {
                                const double p = exact->mdp->transitions[h][x][a][xn];
                                if (p == 0.0) continue;
                                double v = 0.0;
                                for (int an = 0; an < A; ++an) v = std::max(v, f_hat.q[h + 1][xn][an]);
                                m1v += p * v;
                                m2v += p * v * v;
                            }
                        const double c = slice[x][a];
                        err += mass * (c * c - 2.0 * c * (m1r + m1v) + m2r + 2.0 * m1r * m1v + m2v);
                    }
            } else {
                for (const Sample& s : data->layers[h]) {
                    double next = 0.0;
                    if (h + 1 < H) {
                        const auto& row = f_hat.q[h + 1][s.next_x];
                        next = *std::max_element(row.begin(), row.end());
                    }
                    const double d = slice[s.x][s.a] - s.r - next;
                    err += d * d;
                }
                err /= static_cast<double>(data->layers[h].size());
            }
            if (err < best_err) { best_err = err; best_j = j; }
        }
        res.layer_choices[h] = static_cast<int>(best_j);
        f_hat.q[h] = F[best_j].q[h];
    }
    res.f_hat = std::move(f_hat);
    res.pi_hat = greedy_policy(res.f_hat);
    res.chosen_index = static_cast<std::size_t>(res.layer_choices[0]);
    return res;
}

inline SolverResult fqi(const LayeredDataset& data, const ValueClass& F) {
    return fqi(&data, nullptr, F);
}

inline SolverResult fqi_exact(const ExactOffline& exact, const ValueClass& F) {
    return fqi(nullptr, &exact, F);
}

// Finite model class: candidate MDPs sharing shape and initial distribution.
struct ModelClass {
    std::vector<TabularMdp> members;
    double nominal_log_size = 0.0;
    int truth_index = -1;

    static ModelClass with_truth(std::vector<TabularMdp> ms, int truth_idx) {
        ModelClass m;
        m.members = std::move(ms);
        m.truth_index = truth_idx;
        m.nominal_log_size = std::log(static_cast<double>(m.members.size()));
        for (const auto& cand : m.members)
            if (cand.num_states != m.members[0].num_states ||
                cand.num_actions != m.members[0].num_actions ||
                cand.horizon != m.members[0].horizon ||
                cand.initial_dist != m.members[0].initial_dist)
                throw std::invalid_argument("ModelClass: members must share shape and d1");
        return m;
    }

    std::size_t size() const { return members.size(); }
};

namespace detail {

// log M_h(r, x' | x, a); the last layer has a deterministic terminal
// successor, so only the reward factor counts there.
inline double log_likelihood(const TabularMdp& m, int h, const Sample& s) {
    double rp = 0.0;
    for (const auto& atom : m.rewards[h][s.x][s.a])
        if (atom.value == s.r) rp += atom.prob;
    if (rp <= 0.0) return -kInf;
    double lp = std::log(rp);
    if (h + 1 < m.horizon) {
        const double tp = m.transitions[h][s.x][s.a][s.next_x];
        if (tp <= 0.0) return -kInf;
        lp += std::log(tp);
    }
    return lp;
}

// Population (exact) log-likelihood of candidate layer h under the truth.
inline double exact_log_likelihood(const TabularMdp& cand, const TabularMdp& truth,
                                   const LayerDist& mu_h, int h) {
    double acc = 0.0;
    for (std::size_t x = 0; x < mu_h.size(); ++x)
        for (std::size_t a = 0; a < mu_h[x].size(); ++a) {
            const double mass = mu_h[x][a];
            if (mass == 0.0) continue;
            for (const auto& atom : truth.rewards[h][x][a]) {
                if (atom.prob == 0.0) continue;
                double rp = 0.0;
                for (const auto& c : cand.rewards[h][x][a])
                    if (c.value == atom.value) rp += c.prob;
                if (rp <= 0.0) return -kInf;
                acc += mass * atom.prob * std::log(rp);
            }
            if (h + 1 < truth.horizon)
                for (std::size_t xn = 0; xn < mu_h.size(); ++xn) {
                    const double tp = truth.transitions[h][x][a][xn];
                    if (tp == 0.0) continue;
                    const double cp = cand.transitions[h][x][a][xn];
                    if (cp <= 0.0) return -kInf;
                    acc += mass * tp * std::log(cp);
                }
        }
    return acc;
}

} // namespace detail

/// Per-layer maximum-likelihood model selection followed by exact planning
/// in the assembled model. Ties go to the lowest member index.
inline SolverResult mle_model(const LayeredDataset* data, const ExactOffline* exact,
                              const ModelClass& M) {
    if ((data == nullptr) == (exact == nullptr))
        throw std::invalid_argument("mle_model: need exactly one expectation source");
    if (M.members.empty()) throw std::invalid_argument("mle_model: empty model class");
    const int H = M.members[0].horizon;
    SolverResult res;
    res.layer_choices.assign(H, 0);
    TabularMdp assembled = M.members[0];
    for (int h = 0; h < H; ++h) {
        double best_ll = -kInf;
        std::size_t best_j = 0;
        bool any_finite = false;
        for (std::size_t j = 0; j < M.members.size(); ++j) {
            double ll = 0.0;
            if (exact) {
                ll = detail::exact_log_likelihood(M.members[j], *exact->mdp,
                                                  exact->mu->layers[h], h);
            } else {
                for (const Sample& s : data->layers[h]) {
                    ll += detail::log_likelihood(M.members[j], h, s);
                    if (ll == -kInf) break;
                }
            }
            if (ll > -kInf) any_finite = true;
            if (ll > best_ll) { best_ll = ll; best_j = j; }
        }
        if (!any_finite)
            throw std::runtime_error("mle_model: data outside the support of every model");
        res.layer_choices[h] = static_cast<int>(best_j);
        assembled.transitions[h] = M.members[best_j].transitions[h];
        assembled.rewards[h] = M.members[best_j].rewards[h];
    }
    res.chosen_index = static_cast<std::size_t>(res.layer_choices[0]);
    res.f_hat = q_star(assembled);
    res.pi_hat = greedy_policy(res.f_hat);
    return res;
}

inline SolverResult mle_model(const LayeredDataset& data, const ModelClass& M) {
    return mle_model(&data, nullptr, M);
}

inline SolverResult mle_model_exact(const ExactOffline& exact, const ModelClass& M) {
    return mle_model(nullptr, &exact, M);
}

// Risk certificate for the clipped-concentrability bound.
enum class CcSource { mabo_cr, fqi, mle, custom };

struct CcBound {
    double gamma = 0.0;
    double a_gamma = 0.0;
    double b_gamma = 0.0;
    CcSource source = CcSource::custom;

    void validate() const {
        if (a_gamma < 0.0 || b_gamma < 0.0)
            throw std::invalid_argument("CcBound: coefficients must be nonnegative");
    }
};

/// Proof constants for the minimax estimator: a = 40/gamma,
/// b = 56 H^2 gamma log(24|F||W|H^2/delta).
inline CcBound mabo_cc_bound(double gamma, double log_f, double log_w, int horizon, double delta) {
    CcBound b;
    b.gamma = gamma;
    b.source = CcSource::mabo_cr;
    b.a_gamma = 40.0 / gamma;
    b.b_gamma = 56.0 * horizon * horizon * gamma *
                (std::log(24.0) + log_f + log_w + 2.0 * std::log(horizon) + std::log(1.0 / delta));
    return b;
}

/// Proof constants for fitted Q-iteration: a = 2/gamma, b = 2048 log(2|F|H) gamma.
inline CcBound fqi_cc_bound(double gamma, double log_f, int horizon) {
    CcBound b;
    b.gamma = gamma;
    b.source = CcSource::fqi;
    b.a_gamma = 2.0 / gamma;
    b.b_gamma = 2048.0 * (std::log(2.0) + log_f + std::log(horizon)) * gamma;
    return b;
}

/// Stated constants for the likelihood planner: a = 6/gamma,
/// b = 8 log(|M|H/delta) gamma.
inline CcBound mle_cc_bound(double gamma, double log_m, int horizon, double delta) {
    CcBound b;
    b.gamma = gamma;
    b.source = CcSource::mle;
    b.a_gamma = 6.0 / gamma;
    b.b_gamma = 8.0 * (log_m + std::log(horizon) + std::log(1.0 / delta)) * gamma;
    return b;
}

struct CertificateReport {
    double risk = 0.0;  // left side
    double bound = 0.0; // right side
    double slack = 0.0; // bound - risk
    bool pass = false;
    std::vector<double> per_layer_terms;
};

/// Evaluates both sides of the clipped-concentrability risk bound exactly:
/// Risk_off <= sum_h (a/n)(CC_h(pi*) + E_{pi~p} CC_h(pi)) + b, with clip
/// scale gamma^n = gamma*n against the mixture data distribution.
inline CertificateReport cc_certificate(const TabularMdp& mdp, const std::vector<Policy>& support,
                                        const std::vector<double>& probs,
                                        const DataDistribution& mu_mix, std::size_t n,
                                        const CcBound& bound) {
    bound.validate();
    if (support.size() != probs.size() || support.empty())
        throw std::invalid_argument("cc_certificate: bad output-policy distribution");
    const ValueFunction qs = q_star(mdp);
    const Policy pi_star = greedy_policy(qs);
    const double j_star = j_value(mdp, pi_star);
    const Occupancy d_star = occupancy(mdp, pi_star);

    CertificateReport rep;
    for (std::size_t i = 0; i < support.size(); ++i)
        rep.risk += probs[i] * (j_star - j_value(mdp, support[i]));

    const double gamma_n = bound.gamma * static_cast<double>(n);
    std::vector<Occupancy> occs;
    occs.reserve(support.size());
    for (const auto& pi : support) occs.push_back(occupancy(mdp, pi));
    rep.per_layer_terms.resize(mdp.horizon);
    for (int h = 0; h < mdp.horizon; ++h) {
        double cc_star = clipped_concentrability(d_star.layers[h], mu_mix.layers[h], gamma_n);
        double cc_out = 0.0;
        for (std::size_t i = 0; i < support.size(); ++i)
            cc_out += probs[i] *
                      clipped_concentrability(occs[i].layers[h], mu_mix.layers[h], gamma_n);
        rep.per_layer_terms[h] = bound.a_gamma / static_cast<double>(n) * (cc_star + cc_out);
        rep.bound += rep.per_layer_terms[h];
    }
    rep.bound += bound.b_gamma;
    rep.slack = rep.bound - rep.risk;
    rep.pass = rep.risk <= rep.bound + 1e-12;
    return rep;
}

inline CertificateReport cc_certificate(const TabularMdp& mdp, const Policy& pi_hat,
                                        const DataDistribution& mu_mix, std::size_t n,
                                        const CcBound& bound) {
    return cc_certificate(mdp, std::vector<Policy>{pi_hat}, std::vector<double>{1.0}, mu_mix, n,
                          bound);
}

} // namespace covrl
