#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "covrl/coverage.hpp"
#include "covrl/function_classes.hpp"
#include "covrl/glow.hpp"
#include "covrl/mdp.hpp"
#include "covrl/offline.hpp"

namespace covrl {

// Shortest round-trip decimal form; identical bytes on every run.
inline std::string format_double(double v) {
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

// ---------------------------------------------------------------------------
// MDP JSON (value-exact round trip for binary64)
// ---------------------------------------------------------------------------

inline nlohmann::json mdp_to_json(const TabularMdp& mdp) {
    nlohmann::json j;
    j["num_states"] = mdp.num_states;
    j["num_actions"] = mdp.num_actions;
    j["horizon"] = mdp.horizon;
    j["initial_dist"] = mdp.initial_dist;
    j["transitions"] = mdp.transitions;
    nlohmann::json rew = nlohmann::json::array();
    for (const auto& layer : mdp.rewards) {
        nlohmann::json jl = nlohmann::json::array();
        for (const auto& row : layer) {
            nlohmann::json jr = nlohmann::json::array();
            for (const auto& dist : row) {
                nlohmann::json jd = nlohmann::json::array();
                for (const auto& atom : dist)
                    jd.push_back({{"value", atom.value}, {"prob", atom.prob}});
                jr.push_back(std::move(jd));
            }
            jl.push_back(std::move(jr));
        }
        rew.push_back(std::move(jl));
    }
    j["rewards"] = std::move(rew);
    return j;
}

inline TabularMdp mdp_from_json(const nlohmann::json& j) {
    TabularMdp mdp;
    mdp.num_states = j.at("num_states").get<int>();
    mdp.num_actions = j.at("num_actions").get<int>();
    mdp.horizon = j.at("horizon").get<int>();
    mdp.initial_dist = j.at("initial_dist").get<std::vector<double>>();
    mdp.transitions = j.at("transitions").get<std::vector<SaTable<std::vector<double>>>>();
    mdp.rewards.clear();
    for (const auto& jl : j.at("rewards")) {
        SaTable<RewardDist> layer;
        for (const auto& jr : jl) {
            std::vector<RewardDist> row;
            for (const auto& jd : jr) {
                RewardDist dist;
                for (const auto& ja : jd)
                    dist.push_back({ja.at("value").get<double>(), ja.at("prob").get<double>()});
                row.push_back(std::move(dist));
            }
            layer.push_back(std::move(row));
        }
        mdp.rewards.push_back(std::move(layer));
    }
    mdp.validate();
    return mdp;
}

// ---------------------------------------------------------------------------
// Value / weight classes
// ---------------------------------------------------------------------------

inline nlohmann::json value_class_to_json(const ValueClass& cls) {
    nlohmann::json j;
    j["nominal_log_size"] = cls.nominal_log_size;
    j["qstar_index"] = cls.qstar_index;
    nlohmann::json members = nlohmann::json::array();
    for (const auto& f : cls.members) members.push_back(f.q);
    j["members"] = std::move(members);
    return j;
}

inline ValueClass value_class_from_json(const nlohmann::json& j) {
    ValueClass cls;
    cls.nominal_log_size = j.at("nominal_log_size").get<double>();
    cls.qstar_index = j.at("qstar_index").get<int>();
    for (const auto& jm : j.at("members")) {
        ValueFunction f;
        f.q = jm.get<std::vector<SaTable<double>>>();
        cls.members.push_back(std::move(f));
    }
    return cls;
}

inline nlohmann::json weight_class_to_json(const WeightClass& cls) {
    nlohmann::json j;
    j["mode"] = cls.mode == WeightClass::Mode::Static ? "static" : "oracle";
    j["nominal_log_size"] = cls.nominal_log_size;
    nlohmann::json members = nlohmann::json::array();
    for (const auto& w : cls.members) {
        nlohmann::json jm;
        jm["sign"] = w.sign;
        jm["active_layer"] = w.active_layer;
        nlohmann::json layers = nlohmann::json::array();
        for (const auto& layer : w.layers) {
            nlohmann::json jl = nlohmann::json::array();
            for (const auto& row : layer) {
                nlohmann::json jr = nlohmann::json::array();
                // +inf has no JSON literal; encode as the string "inf"
                for (double v : row)
                    if (v == kInf) jr.push_back("inf");
                    else jr.push_back(v);
                jl.push_back(std::move(jr));
            }
            layers.push_back(std::move(jl));
        }
        jm["layers"] = std::move(layers);
        members.push_back(std::move(jm));
    }
    j["members"] = std::move(members);
    return j;
}

// ---------------------------------------------------------------------------
// Occupancy / coverage exports
// ---------------------------------------------------------------------------

inline std::string occupancy_to_csv(const Occupancy& occ) {
    std::ostringstream out;
    out << "layer,state,action,mass\n";
    for (std::size_t h = 0; h < occ.layers.size(); ++h)
        for (std::size_t x = 0; x < occ.layers[h].size(); ++x)
            for (std::size_t a = 0; a < occ.layers[h][x].size(); ++a)
                out << h << ',' << x << ',' << a << ',' << format_double(occ.layers[h][x][a])
                    << '\n';
    return out.str();
}

inline nlohmann::json occupancy_to_json(const Occupancy& occ) {
    nlohmann::json j;
    j["tag"] = occ.tag;
    j["layers"] = occ.layers;
    return j;
}

inline nlohmann::json coverage_report_to_json(const CoverageReport& rep) {
    nlohmann::json j;
    j["c_cov"] = rep.c_cov;
    j["layer_values"] = rep.layer_values;
    j["mu_star"] = occupancy_to_json(rep.mu_star);
    j["policy_sup_ratios"] = rep.policy_sup_ratios;
    return j;
}

// ---------------------------------------------------------------------------
// Run records
// ---------------------------------------------------------------------------

inline constexpr const char* kRunCsvHeader =
    "run_id,t,f_index,j_pi_t,inst_regret,cum_regret,confset_size,optimism_ok";
inline constexpr const char* kHybridCsvExtra = ",offline_size,hybrid_size,solver_objective";

inline std::string run_record_to_csv(const RunRecord& rec, const std::string& run_id,
                                     bool hybrid_columns) {
    std::ostringstream out;
    out << kRunCsvHeader << (hybrid_columns ? kHybridCsvExtra : "") << '\n';
    for (const auto& row : rec.rows) {
        out << run_id << ',' << row.t << ',' << row.f_index << ',' << format_double(row.j_pi)
            << ',' << format_double(row.inst_regret) << ',' << format_double(row.cum_regret)
            << ',' << row.confset_size << ',' << (row.optimism_ok ? 1 : 0);
        if (hybrid_columns)
            out << ',' << row.offline_size << ',' << row.hybrid_size << ','
                << format_double(row.solver_objective);
        out << '\n';
    }
    return out.str();
}

inline nlohmann::json run_record_summary(const RunRecord& rec) {
    nlohmann::json j;
    j["iterations"] = rec.rows.size();
    j["j_star"] = rec.j_star;
    j["cum_regret"] = rec.cum_regret;
    j["final_risk"] = rec.final_risk;
    j["policy_indices"] = rec.policy_indices;
    return j;
}

inline nlohmann::json solver_result_to_json(const SolverResult& res) {
    nlohmann::json j;
    j["chosen_index"] = res.chosen_index;
    j["objective"] = res.objective;
    j["layer_choices"] = res.layer_choices;
    return j;
}

inline nlohmann::json certificate_report_to_json(const CertificateReport& rep) {
    nlohmann::json j;
    j["risk"] = rep.risk;
    j["bound"] = rep.bound == kInf ? nlohmann::json("inf") : nlohmann::json(rep.bound);
    j["slack"] = rep.slack == kInf ? nlohmann::json("inf") : nlohmann::json(rep.slack);
    j["pass"] = rep.pass;
    j["per_layer_terms"] = rep.per_layer_terms;
    return j;
}

// ---------------------------------------------------------------------------
// Small file helpers and a content hash for manifests
// ---------------------------------------------------------------------------

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// SHA-256 (FIPS 180-4), enough for manifest content hashes.
class Sha256 {
public:
    Sha256() { reset(); }

    void update(const void* data, std::size_t len) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        total_ += len;
        while (len > 0) {
            const std::size_t take = std::min<std::size_t>(64 - fill_, len);
            std::memcpy(buf_.data() + fill_, p, take);
            fill_ += take;
            p += take;
            len -= take;
            if (fill_ == 64) { compress(buf_.data()); fill_ = 0; }
        }
    }

    std::string hex_digest() {
        std::array<std::uint8_t, 64> pad{};
        pad[0] = 0x80;
        const std::uint64_t bits = total_ * 8;
        const std::size_t pad_len = (fill_ < 56) ? 56 - fill_ : 120 - fill_;
        update_raw(pad.data(), pad_len);
        std::array<std::uint8_t, 8> len_be{};
        for (int i = 0; i < 8; ++i) len_be[i] = static_cast<std::uint8_t>(bits >> (56 - 8 * i));
        update_raw(len_be.data(), 8);
        static constexpr char hexd[] = "0123456789abcdef";
        std::string out(64, '0');
        for (int i = 0; i < 8; ++i)
            for (int b = 0; b < 4; ++b) {
                const std::uint8_t byte = static_cast<std::uint8_t>(h_[i] >> (24 - 8 * b));
                out[8 * i + 2 * b] = hexd[byte >> 4];
                out[8 * i + 2 * b + 1] = hexd[byte & 0xf];
            }
        reset();
        return out;
    }

    static std::string of(const std::string& s) {
        Sha256 h;
        h.update(s.data(), s.size());
        return h.hex_digest();
    }

private:
    void reset() {
        h_ = {0x6a09e667u, 0xbb67ae85u, 0x3c6ef372u, 0xa54ff53au,
              0x510e527fu, 0x9b05688cu, 0x1f83d9abu, 0x5be0cd19u};
        fill_ = 0;
        total_ = 0;
    }

    void update_raw(const std::uint8_t* p, std::size_t len) {
        while (len > 0) {
            const std::size_t take = std::min<std::size_t>(64 - fill_, len);
            std::memcpy(buf_.data() + fill_, p, take);
            fill_ += take;
            p += take;
            len -= take;
            if (fill_ == 64) { compress(buf_.data()); fill_ = 0; }
        }
    }

    static std::uint32_t rotr(std::uint32_t v, int n) { return (v >> n) | (v << (32 - n)); }

    void compress(const std::uint8_t* block) {
        static constexpr std::uint32_t K[64] = {
            0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4,
            0xab1c5ed5, 0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe,
            0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f,
            0x4a7484aa, 0x5cb0a9dc, 0x76f988da, 0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7,
            0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc,
            0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b,
            0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070, 0x19a4c116,
            0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
            0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7,
            0xc67178f2};
        std::uint32_t w[64];
        for (int i = 0; i < 16; ++i)
            w[i] = (std::uint32_t(block[4 * i]) << 24) | (std::uint32_t(block[4 * i + 1]) << 16) |
                   (std::uint32_t(block[4 * i + 2]) << 8) | std::uint32_t(block[4 * i + 3]);
        for (int i = 16; i < 64; ++i) {
            const std::uint32_t s0 = rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
            const std::uint32_t s1 = rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
            w[i] = w[i - 16] + s0 + w[i - 7] + s1;
        }
        auto [a, b, c, d, e, f, g, h] = h_;
        for (int i = 0; i < 64; ++i) {
            const std::uint32_t s1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
            const std::uint32_t ch = (e & f) ^ (~e & g);
            const std::uint32_t t1 = h + s1 + ch + K[i] + w[i];
            const std::uint32_t s0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
            const std::uint32_t maj = (a & b) ^ (a & c) ^ (b & c);
            const std::uint32_t t2 = s0 + maj;
            h = g; g = f; f = e; e = d + t1;
            d = c; c = b; b = a; a = t1 + t2;
        }
        h_[0] += a; h_[1] += b; h_[2] += c; h_[3] += d;
        h_[4] += e; h_[5] += f; h_[6] += g; h_[7] += h;
    }

    std::array<std::uint32_t, 8> h_{};
    std::array<std::uint8_t, 64> buf_{};
    std::size_t fill_ = 0;
    std::uint64_t total_ = 0;
};

} // namespace covrl
