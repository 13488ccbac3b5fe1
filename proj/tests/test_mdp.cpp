#include <catch2/catch_amalgamated.hpp>

#include "covrl/env_gen.hpp"
#include "covrl/io.hpp"
#include "covrl/mdp.hpp"
#include "test_helpers.hpp"

using namespace covrl;

namespace {

// 2-state deterministic chain: action 0 advances 0 -> 0, action 1 derails to
// state 1 (absorbing); unit reward at the last layer in state 0 / action 0.
TabularMdp two_state_chain(int horizon) {
    TabularMdp m;
    m.num_states = 2;
    m.num_actions = 2;
    m.horizon = horizon;
    m.initial_dist = {1.0, 0.0};
    m.transitions.resize(horizon);
    m.rewards.resize(horizon);
    for (int h = 0; h < horizon; ++h) {
        m.transitions[h].assign(2, std::vector<std::vector<double>>(2));
        m.rewards[h].assign(2, std::vector<RewardDist>(2));
        for (int x = 0; x < 2; ++x)
            for (int a = 0; a < 2; ++a) {
                std::vector<double> row(2, 0.0);
                row[(x == 0 && a == 0) ? 0 : 1] = 1.0;
                m.transitions[h][x][a] = row;
                const double r = (h == horizon - 1 && x == 0 && a == 0) ? 1.0 : 0.0;
                m.rewards[h][x][a] = {{r, 1.0}};
            }
    }
    m.validate();
    return m;
}

TabularMdp single_state_mdp(int horizon) {
    TabularMdp m;
    m.num_states = 1;
    m.num_actions = 1;
    m.horizon = horizon;
    m.initial_dist = {1.0};
    m.transitions.assign(horizon, {{std::vector<double>{1.0}}});
    m.rewards.assign(horizon, {{RewardDist{{1.0 / horizon, 1.0}}}});
    m.validate();
    return m;
}

} // namespace

TEST_CASE("TabularMdp validation rejects malformed inputs") {
    TabularMdp m = two_state_chain(3);
    SECTION("broken transition row") {
        m.transitions[0][0][0] = {0.5, 0.4};
        REQUIRE_THROWS_AS(m.validate(), std::invalid_argument);
    }
    SECTION("initial dist off-simplex") {
        m.initial_dist = {0.9, 0.2};
        REQUIRE_THROWS_AS(m.validate(), std::invalid_argument);
    }
    SECTION("trajectory reward normalization") {
        // unit reward at two layers can stack past 1
        m.rewards[0][0][0] = {{1.0, 1.0}};
        REQUIRE_THROWS_AS(m.validate(), std::invalid_argument);
    }
}

TEST_CASE("bellman_apply terminal layer returns mean rewards") {
    Rng rng(11);
    const TabularMdp m = make_random_mdp(4, 2, 3, 0.0, rng);
    const ValueFunction f = oracle::random_value_function(4, 2, 3, rng);
    const SaTable<double> out = bellman_apply(m, f, m.horizon - 1);
    for (int x = 0; x < 4; ++x)
        for (int a = 0; a < 2; ++a)
            REQUIRE(out[x][a] == Catch::Approx(m.mean_reward(m.horizon - 1, x, a)).margin(0));
}

TEST_CASE("bellman_apply of the zero function is the mean reward at every layer") {
    Rng rng(12);
    const TabularMdp m = make_random_mdp(3, 2, 4, 0.3, rng);
    const ValueFunction zero = ValueFunction::zeros(3, 2, 4);
    for (int h = 0; h < m.horizon; ++h) {
        const SaTable<double> out = bellman_apply(m, zero, h);
        for (int x = 0; x < 3; ++x)
            for (int a = 0; a < 2; ++a)
                REQUIRE(out[x][a] == Catch::Approx(m.mean_reward(h, x, a)).margin(1e-15));
    }
}

TEST_CASE("bellman_apply matches a hand-rolled backward recursion on the chain") {
    const TabularMdp m = two_state_chain(4);
    // independent oracle: value-to-go of the chain is 1 exactly while on it
    ValueFunction f = ValueFunction::zeros(2, 2, 4);
    for (int h = m.horizon - 1; h >= 0; --h) {
        const SaTable<double> row = bellman_apply(m, f, h);
        f.q[h] = row;
    }
    for (int h = 0; h < m.horizon; ++h) {
        REQUIRE(f.q[h][0][0] == 1.0);  // stay on chain
        REQUIRE(f.q[h][1][0] == 0.0);  // derailed
        REQUIRE(f.q[h][1][1] == 0.0);
        if (h < m.horizon - 1) REQUIRE(f.q[h][0][1] == 0.0);
    }
    REQUIRE(bellman_apply(m, f, 0) == f.q[0]);
    REQUIRE_THROWS_AS(bellman_apply(m, f, m.horizon), std::out_of_range);
    REQUIRE_THROWS_AS(bellman_apply(m, f, -1), std::out_of_range);
}

TEST_CASE("q_star: zero rewards give the zero function") {
    TabularMdp m = two_state_chain(3);
    for (auto& layer : m.rewards)
        for (auto& row : layer)
            for (auto& dist : row) dist = {{0.0, 1.0}};
    const ValueFunction qs = q_star(m);
    for (const auto& layer : qs.q)
        for (const auto& row : layer)
            for (double v : row) REQUIRE(v == 0.0);
}

TEST_CASE("q_star closed form on the single-state MDP") {
    const int H = 5;
    const TabularMdp m = single_state_mdp(H);
    const ValueFunction qs = q_star(m);
    for (int h = 0; h < H; ++h)
        REQUIRE(qs.q[h][0][0] == Catch::Approx(static_cast<double>(H - h) / H).epsilon(1e-13));
}

TEST_CASE("q_star matches exhaustive policy enumeration on a random MDP") {
    Rng rng(21);
    const TabularMdp m = make_random_mdp(4, 2, 3, 0.0, rng);
    const ValueFunction qs = q_star(m);
    // oracle: max over all A^(S*H) deterministic policies of Q^pi
    const std::vector<Policy> all = oracle::all_deterministic_policies(m);
    double best_j = 0.0;
    for (const auto& pi : all) best_j = std::max(best_j, oracle::j_of_policy(m, pi));
    double qs_j = 0.0;
    const Policy pi_star = greedy_policy(qs);
    for (int x = 0; x < m.num_states; ++x)
        qs_j += m.initial_dist[x] * qs.q[0][x][pi_star.actions[0][x]];
    REQUIRE(qs_j == Catch::Approx(best_j).margin(1e-10));
    REQUIRE(j_value(m, pi_star) == Catch::Approx(best_j).margin(1e-10));
    // fixed point: max-norm residual of one more backup is ~0
    for (int h = 0; h < m.horizon; ++h) {
        const SaTable<double> back = bellman_apply(m, qs, h);
        for (int x = 0; x < m.num_states; ++x)
            for (int a = 0; a < m.num_actions; ++a)
                REQUIRE(std::abs(back[x][a] - qs.q[h][x][a]) <= 1e-12);
    }
}

TEST_CASE("greedy_policy breaks ties toward the lowest action") {
    ValueFunction f = ValueFunction::zeros(2, 3, 2);
    const Policy p0 = greedy_policy(f);
    for (const auto& layer : p0.actions)
        for (int a : layer) REQUIRE(a == 0);

    f.q[0][0] = {0.1, 0.9, 0.9};
    REQUIRE(greedy_policy(f).actions[0][0] == 1);

    // random tie mask against a direct scan oracle
    Rng rng(5);
    ValueFunction g = oracle::random_value_function(3, 3, 2, rng);
    g.q[1][2][0] = g.q[1][2][2] = 0.75;
    const Policy pg = greedy_policy(g);
    for (int h = 0; h < 2; ++h)
        for (int x = 0; x < 3; ++x) {
            int best = 0;
            for (int a = 1; a < 3; ++a)
                if (g.q[h][x][a] > g.q[h][x][best]) best = a;
            REQUIRE(pg.actions[h][x] == best);
        }
}

TEST_CASE("j_value basics") {
    TabularMdp m = two_state_chain(3);
    SECTION("zero rewards give zero value") {
        for (auto& layer : m.rewards)
            for (auto& row : layer)
                for (auto& dist : row) dist = {{0.0, 1.0}};
        REQUIRE(j_value(m, Policy::uniform(2, 2, 3)) == 0.0);
    }
    SECTION("deterministic single-state MDP with reward 1/H per step") {
        const TabularMdp s = single_state_mdp(4);
        const Policy pi = Policy::make_deterministic({{0}, {0}, {0}, {0}});
        REQUIRE(j_value(s, pi) == Catch::Approx(1.0).epsilon(1e-14));
    }
}

TEST_CASE("j_value agrees with a Monte-Carlo estimate on a random MDP") {
    Rng rng(31);
    const TabularMdp m = make_random_mdp(4, 2, 3, 0.2, rng);
    const Policy pi = Policy::uniform(4, 2, 3);
    const double exact = j_value(m, pi);
    const int n = 1'000'000;
    double sum = 0.0, sumsq = 0.0;
    Rng sample_rng(77);
    for (int i = 0; i < n; ++i) {
        const Trajectory tr = sample_trajectory(m, pi, sample_rng);
        double total = 0.0;
        for (const auto& s : tr.steps) total += s.r;
        sum += total;
        sumsq += total * total;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sumsq / n - mean * mean) / n);
    REQUIRE(std::abs(mean - exact) <= 3.0 * se + 1e-12);
}

TEST_CASE("sample_trajectory determinism and shape") {
    Rng rng(41);
    const TabularMdp m = make_random_mdp(3, 2, 4, 0.0, rng);
    const Policy pi = Policy::uniform(3, 2, 4);
    Rng r1(99), r2(99);
    const Trajectory t1 = sample_trajectory(m, pi, r1);
    const Trajectory t2 = sample_trajectory(m, pi, r2);
    REQUIRE(t1 == t2);
    REQUIRE(t1.steps.size() == 4);
    REQUIRE(t1.steps.back().next_x == m.terminal_state());

    // deterministic MDP + deterministic policy: seed-independent
    const TabularMdp chain = two_state_chain(3);
    const Policy stay = Policy::make_deterministic({{0, 0}, {0, 0}, {0, 0}});
    Rng ra(1), rb(123456);
    REQUIRE(sample_trajectory(chain, stay, ra) == sample_trajectory(chain, stay, rb));
    double total = 0.0;
    for (const auto& s : sample_trajectory(chain, stay, ra).steps) total += s.r;
    REQUIRE(total == 1.0);
}

TEST_CASE("combination lock values are exact") {
    Rng rng(7);
    const TabularMdp lock = make_combination_lock(3, rng);
    const ValueFunction qs = q_star(lock);
    const Policy pi_star = greedy_policy(qs);
    REQUIRE(j_value(lock, pi_star) == Catch::Approx(1.0).margin(1e-14));
    REQUIRE(j_value(lock, Policy::uniform(2, 2, 3)) == Catch::Approx(0.125).margin(1e-14));
}

TEST_CASE("block lift of a single latent state preserves J for all policies") {
    const TabularMdp latent = single_state_mdp(3);
    const TabularMdp lifted = make_block_lift(latent, {4});
    REQUIRE(lifted.num_states == 4);
    const Policy pi = Policy::uniform(4, 1, 3);
    REQUIRE(j_value(lifted, pi) == Catch::Approx(j_value(latent, Policy::uniform(1, 1, 3)))
                                       .epsilon(1e-13));
}

TEST_CASE("block lift rejects bad emission counts") {
    const TabularMdp latent = single_state_mdp(2);
    REQUIRE_THROWS_AS(make_block_lift(latent, {0}), std::invalid_argument);
    REQUIRE_THROWS_AS(make_block_lift(latent, {1, 2}), std::invalid_argument);
}

TEST_CASE("random generator is deterministic given the seed") {
    Rng a(13), b(13);
    const TabularMdp m1 = make_random_mdp(4, 2, 3, 0.25, a);
    const TabularMdp m2 = make_random_mdp(4, 2, 3, 0.25, b);
    REQUIRE(m1 == m2);
    REQUIRE(mdp_to_json(m1).dump() == mdp_to_json(m2).dump());
}

TEST_CASE("MDP JSON round-trip is value-exact") {
    Rng rng(17);
    const TabularMdp m = make_random_mdp(5, 3, 4, 0.4, rng);
    const nlohmann::json j = mdp_to_json(m);
    const TabularMdp back = mdp_from_json(nlohmann::json::parse(j.dump()));
    REQUIRE(back == m);
}

TEST_CASE("induced policy class dedups and keeps first-inducing order") {
    Rng rng(3);
    const TabularMdp m = make_random_mdp(3, 2, 2, 0.0, rng);
    const ValueFunction qs = q_star(m);
    std::vector<ValueFunction> fs = {qs, qs, qs};
    const PolicyClass pc = induced_policies(fs);
    REQUIRE(pc.size() == 1);
    REQUIRE(pc.induced_from_values);
}

TEST_CASE("optimal policy dominates every enumerable policy") {
    Rng rng(53);
    for (int trial = 0; trial < 10; ++trial) {
        const TabularMdp m = make_random_mdp(3, 2, 2, 0.2, rng);
        const double j_star = j_value(m, greedy_policy(q_star(m)));
        for (const auto& pi : oracle::all_deterministic_policies(m))
            REQUIRE(j_value(m, pi) <= j_star + 1e-10);
    }
}

TEST_CASE("performance-difference identity and telescoped bound") {
    Rng rng(61);
    for (int trial = 0; trial < 50; ++trial) {
        const int S = 2 + static_cast<int>(rng.uniform_int(5));
        const int A = 2 + static_cast<int>(rng.uniform_int(2));
        const int H = 2 + static_cast<int>(rng.uniform_int(4));
        const TabularMdp m = make_random_mdp(S, A, H, 0.0, rng);
        const ValueFunction f = oracle::random_value_function(S, A, H, rng);
        const Policy pi_f = greedy_policy(f);
        const Occupancy d_f = occupancy(m, pi_f);

        double initial = 0.0;
        for (int x = 0; x < S; ++x)
            initial += m.initial_dist[x] * f.q[0][x][pi_f.actions[0][x]];

        double residual_sum = 0.0;
        for (int h = 0; h < H; ++h) {
            const SaTable<double> delta = oracle::bellman_residual(m, f, h);
            for (int x = 0; x < S; ++x)
                for (int a = 0; a < A; ++a) residual_sum += d_f.layers[h][x][a] * delta[x][a];
        }
        REQUIRE(initial - j_value(m, pi_f) == Catch::Approx(residual_sum).margin(1e-10));

        // telescoped bound against the optimal policy
        const Policy pi_star = greedy_policy(q_star(m));
        const Occupancy d_star = occupancy(m, pi_star);
        double rhs = 0.0;
        for (int h = 0; h < H; ++h) {
            const SaTable<double> delta = oracle::bellman_residual(m, f, h);
            for (int x = 0; x < S; ++x)
                for (int a = 0; a < A; ++a) {
                    rhs += d_star.layers[h][x][a] * -delta[x][a];
                    rhs += d_f.layers[h][x][a] * delta[x][a];
                }
        }
        REQUIRE(j_value(m, pi_star) - j_value(m, pi_f) <= rhs + 1e-10);
    }
}
