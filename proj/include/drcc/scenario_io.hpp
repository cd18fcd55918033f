#pragma once

// Scenario config files, run manifests and result writers.
//
// Configs are JSON with // and /* */ comments allowed. Keys carry their units
// as suffixes. An empty document yields the default conjunction scenario.
// Unknown keys are rejected and every error names the offending key path.

#include "drcc/mpc.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace drcc {

inline constexpr std::string_view kCodeVersion = "0.1.0";

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Json = nlohmann::json;

namespace io_detail {

class Reader {
public:
    Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail("expected an object");
    }

    std::string key(std::string_view k) const { return path_.empty() ? std::string(k) : path_ + "." + std::string(k); }

    [[noreturn]] void fail(const std::string& msg, std::string_view k = {}) const {
        const std::string where = k.empty() ? (path_.empty() ? std::string("<root>") : path_) : key(k);
        throw ConfigError(where + ": " + msg);
    }

    bool has(std::string_view k) const { return j_.contains(std::string(k)); }

    const Json& at(std::string_view k) const {
        used_.emplace_back(k);
        return j_.at(std::string(k));
    }

    double number(std::string_view k, double def) const {
        if (!has(k)) return def;
        const Json& v = at(k);
        if (!v.is_number()) fail("expected a number", k);
        const double d = v.get<double>();
        if (!std::isfinite(d)) fail("must be finite", k);
        return d;
    }

    long long integer(std::string_view k, long long def) const {
        if (!has(k)) return def;
        const Json& v = at(k);
        if (!v.is_number_integer()) fail("expected an integer", k);
        return v.get<long long>();
    }

    std::uint64_t uinteger(std::string_view k, std::uint64_t def) const {
        if (!has(k)) return def;
        const Json& v = at(k);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
            fail("expected a non-negative integer", k);
        return v.get<std::uint64_t>();
    }

    bool boolean(std::string_view k, bool def) const {
        if (!has(k)) return def;
        const Json& v = at(k);
        if (!v.is_boolean()) fail("expected true or false", k);
        return v.get<bool>();
    }

    std::string string(std::string_view k, std::string def) const {
        if (!has(k)) return def;
        const Json& v = at(k);
        if (!v.is_string()) fail("expected a string", k);
        return v.get<std::string>();
    }

    template <int N>
    Eigen::Matrix<double, N, 1> vector(std::string_view k, const Eigen::Matrix<double, N, 1>& def) const {
        if (!has(k)) return def;
        const Json& v = at(k);
        if (!v.is_array() || v.size() != static_cast<std::size_t>(N))
            fail("expected an array of " + std::to_string(N) + " numbers", k);
        Eigen::Matrix<double, N, 1> out;
        for (int i = 0; i < N; ++i) {
            if (!v[static_cast<std::size_t>(i)].is_number()) fail("expected numbers", k);
            out(i) = v[static_cast<std::size_t>(i)].get<double>();
        }
        if (!out.allFinite()) fail("must be finite", k);
        return out;
    }

    template <int N>
    Eigen::Matrix<double, N, N> matrix(std::string_view k, const Eigen::Matrix<double, N, N>& def) const {
        if (!has(k)) return def;
        const Json& v = at(k);
        const std::string shape = std::to_string(N) + "x" + std::to_string(N);
        if (!v.is_array() || v.size() != static_cast<std::size_t>(N)) fail("expected a " + shape + " matrix", k);
        Eigen::Matrix<double, N, N> out;
        for (int i = 0; i < N; ++i) {
            const Json& row = v[static_cast<std::size_t>(i)];
            if (!row.is_array() || row.size() != static_cast<std::size_t>(N))
                fail("expected a " + shape + " matrix", k);
            for (int c = 0; c < N; ++c) {
                if (!row[static_cast<std::size_t>(c)].is_number()) fail("expected numbers", k);
                out(i, c) = row[static_cast<std::size_t>(c)].get<double>();
            }
        }
        if (!out.allFinite()) fail("must be finite", k);
        return out;
    }

    Reader section(std::string_view k) const {
        if (!has(k)) return Reader(empty(), key(k));
        return Reader(at(k), key(k));
    }

    void reject_unknown() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            bool known = false;
            for (const auto& u : used_) known = known || u == it.key();
            if (!known) fail("unknown key", it.key());
        }
    }

    void require(bool ok, std::string_view k, const std::string& msg) const {
        if (!ok) fail(msg, k);
    }

private:
    static const Json& empty() {
        static const Json e = Json::object();
        return e;
    }

    const Json& j_;
    std::string path_;
    mutable std::vector<std::string> used_;
};

template <int N>
Json to_json(const Eigen::Matrix<double, N, 1>& v) {
    Json a = Json::array();
    for (int i = 0; i < N; ++i) a.push_back(v(i));
    return a;
}

template <int N>
Json to_json(const Eigen::Matrix<double, N, N>& m) {
    Json a = Json::array();
    for (int i = 0; i < N; ++i) {
        Json row = Json::array();
        for (int c = 0; c < N; ++c) row.push_back(m(i, c));
        a.push_back(row);
    }
    return a;
}

}  // namespace io_detail

/// Builds a validated Scenario from a parsed document. Absent keys take the
/// default conjunction scenario values.
inline Scenario scenario_from_json(const Json& doc) {
    using io_detail::Reader;
    const Scenario def;
    Scenario sc;
    const Reader root(doc, "");
    sc.seed = root.uinteger("seed", def.seed);

    {
        const Reader s = root.section("satellite");
        const Vec3 r = s.vector<3>("r_km", def.satellite_x0.r());
        const Vec3 v = s.vector<3>("v_km_s", def.satellite_x0.v());
        s.require(r.norm() > 0.0, "r_km", "position must be nonzero");
        sc.satellite_x0 = StateVector(r, v);
        sc.satellite_body.mass_kg = s.number("mass_kg", def.satellite_body.mass_kg);
        sc.satellite_body.drag_area_m2 = s.number("drag_area_m2", def.satellite_body.drag_area_m2);
        sc.satellite_body.drag_coeff = s.number("drag_coeff", def.satellite_body.drag_coeff);
        s.require(sc.satellite_body.mass_kg > 0.0, "mass_kg", "must be > 0");
        s.require(sc.satellite_body.drag_area_m2 >= 0.0, "drag_area_m2", "must be >= 0");
        s.require(sc.satellite_body.drag_coeff >= 0.0, "drag_coeff", "must be >= 0");
        s.reject_unknown();
    }
    {
        const Reader s = root.section("debris");
        Vec6 mean;
        mean << s.vector<3>("mean_r_km", def.debris_belief0.mean.head<3>()),
            s.vector<3>("mean_v_km_s", def.debris_belief0.mean.tail<3>());
        s.require(mean.head<3>().norm() > 0.0, "mean_r_km", "position must be nonzero");
        Mat6 cov = def.debris_belief0.cov;
        s.require(!(s.has("cov") && s.has("cov_diag")), "cov", "give either cov or cov_diag, not both");
        if (s.has("cov_diag")) cov = Mat6(s.vector<6>("cov_diag", Vec6::Zero()).asDiagonal());
        cov = s.matrix<6>("cov", cov);
        s.require(is_symmetric_psd<6>(cov), s.has("cov") ? "cov" : "cov_diag", "must be symmetric PSD");
        sc.debris_belief0 = StateBelief(mean, cov);

        sc.debris_body.mass_kg = s.number("mass_kg", def.debris_body.mass_kg);
        sc.debris_body.drag_area_m2 = s.number("drag_area_m2", def.debris_body.drag_area_m2);
        sc.debris_body.drag_coeff = s.number("drag_coeff", def.debris_body.drag_coeff);
        s.require(sc.debris_body.mass_kg > 0.0, "mass_kg", "must be > 0");
        s.require(sc.debris_body.drag_area_m2 >= 0.0, "drag_area_m2", "must be >= 0");
        s.require(sc.debris_body.drag_coeff >= 0.0, "drag_coeff", "must be >= 0");

        s.require(!(s.has("q_scale") && s.has("q_km")), "q_scale", "give either q_scale or q_km, not both");
        Mat6 q = def.noise.q();
        if (s.has("q_scale")) {
            const double qs = s.number("q_scale", 0.0);
            s.require(qs >= 0.0, "q_scale", "must be >= 0");
            q = defaults::process_noise(qs);
        }
        q = s.matrix<6>("q_km", q);
        s.require(is_symmetric_psd<6>(q), "q_km", "must be symmetric PSD");
        sc.noise = ProcessNoise(q);
        s.reject_unknown();
    }
    {
        const Reader s = root.section("environment");
        auto& env = sc.sim.env;
        env.mu_earth = s.number("mu_km3_s2", def.sim.env.mu_earth);
        env.omega_earth = s.vector<3>("omega_rad_s", def.sim.env.omega_earth);
        env.rho0 = s.number("rho0_kg_m3", def.sim.env.rho0);
        env.r0 = s.number("r0_km", def.sim.env.r0);
        env.scale_height = s.number("scale_height_km", def.sim.env.scale_height);
        s.require(env.mu_earth > 0.0, "mu_km3_s2", "must be > 0");
        s.require(env.rho0 >= 0.0, "rho0_kg_m3", "must be >= 0");
        s.require(env.r0 > 0.0, "r0_km", "must be > 0");
        s.require(env.scale_height > 0.0, "scale_height_km", "must be > 0");
        s.reject_unknown();
    }
    {
        const Reader s = root.section("risk");
        sc.risk.epsilon = s.number("epsilon", def.risk.epsilon);
        sc.risk.d_thres = s.number("d_thres_km", def.risk.d_thres);
        sc.risk.gamma = s.number("gamma", def.risk.gamma);
        s.require(sc.risk.epsilon > 0.0 && sc.risk.epsilon < 1.0, "epsilon", "must be in (0, 1)");
        s.require(sc.risk.d_thres > 0.0, "d_thres_km", "must be > 0");
        s.require(sc.risk.gamma > 0.0 && sc.risk.gamma <= 1.0, "gamma", "must be in (0, 1]");
        s.reject_unknown();
    }
    {
        const Reader s = root.section("mpc");
        const long long k = s.integer("horizon_steps", def.horizon);
        s.require(k >= 1 && k <= 100000, "horizon_steps", "must be >= 1");
        sc.horizon = static_cast<int>(k);
        sc.sim.control_period = s.number("control_period_s", def.sim.control_period);
        sc.sim.dt = s.number("dt_s", def.sim.dt);
        s.require(sc.sim.control_period > 0.0, "control_period_s", "must be > 0");
        s.require(sc.sim.dt > 0.0, "dt_s", "must be > 0");
        try {
            (void)sc.sim.substeps();
        } catch (const std::domain_error&) {
            s.fail("must divide control_period_s", "dt_s");
        }
        sc.sim_duration = s.number("sim_duration_s", def.sim_duration);
        s.require(sc.sim_duration >= sc.sim.control_period, "sim_duration_s", "must be >= control_period_s");
        sc.bounds.lower = s.vector<3>("u_min_km_s2", def.bounds.lower);
        sc.bounds.upper = s.vector<3>("u_max_km_s2", def.bounds.upper);
        s.require((sc.bounds.lower.array() <= sc.bounds.upper.array()).all(), "u_max_km_s2",
                  "must be >= u_min_km_s2 componentwise");
        sc.control_weight = s.matrix<3>("control_weight", def.control_weight);
        {
            const Mat3& r = sc.control_weight;
            Eigen::LLT<Mat3> llt(r);
            s.require((r - r.transpose()).norm() <= 1e-12 && llt.info() == Eigen::Success, "control_weight",
                      "must be symmetric positive definite");
        }
        sc.control_enabled = s.boolean("control_enabled", def.control_enabled);
        s.reject_unknown();
    }
    {
        const Reader s = root.section("propagator");
        try {
            sc.propagator.kind = parse_propagator(s.string("kind", std::string(to_string(def.propagator.kind))));
        } catch (const std::invalid_argument&) {
            s.fail("expected one of linear, ut, mc", "kind");
        }
        const long long n = s.integer("mc_samples", def.propagator.mc_samples);
        s.require(n >= 2 && n <= 100000000, "mc_samples", "must be >= 2");
        sc.propagator.mc_samples = static_cast<int>(n);
        s.reject_unknown();
    }
    {
        const Reader s = root.section("cem");
        auto& c = sc.cem;
        const long long pop = s.integer("population", def.cem.population);
        const long long elite = s.integer("elite_count", def.cem.elite_count);
        const long long iters = s.integer("max_iterations", def.cem.max_iterations);
        s.require(pop >= 2 && pop <= 10000000, "population", "must be >= 2");
        s.require(elite >= 2 && elite <= pop, "elite_count", "must be in [2, population]");
        s.require(iters >= 1 && iters <= 1000000, "max_iterations", "must be >= 1");
        c.population = static_cast<int>(pop);
        c.elite_count = static_cast<int>(elite);
        c.max_iterations = static_cast<int>(iters);
        // u_max / 2.5 unless given explicitly
        const double default_std = sc.bounds.upper.cwiseAbs().cwiseMax(sc.bounds.lower.cwiseAbs()).maxCoeff() / 2.5;
        c.init_std = s.number("init_std_km_s2", default_std > 0.0 ? default_std : def.cem.init_std);
        c.std_floor = s.number("std_floor_km_s2", def.cem.std_floor);
        c.smoothing = s.number("smoothing", def.cem.smoothing);
        s.require(c.init_std > 0.0, "init_std_km_s2", "must be > 0");
        s.require(c.std_floor > 0.0, "std_floor_km_s2", "must be > 0");
        s.require(c.smoothing >= 0.0 && c.smoothing < 1.0, "smoothing", "must be in [0, 1)");
        s.reject_unknown();
    }
    root.reject_unknown();
    sc.validate();
    return sc;
}

/// Parses config text. Empty or whitespace-only text is the default scenario.
inline Scenario parse_config(std::string_view text) {
    if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) return scenario_from_json(Json::object());
    Json doc;
    try {
        doc = Json::parse(text, nullptr, /*allow_exceptions=*/true, /*ignore_comments=*/true);
    } catch (const Json::parse_error& e) {
        throw ConfigError(std::string("parse error: ") + e.what());
    }
    return scenario_from_json(doc);
}

inline Scenario load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_config(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

/// Full explicit document; scenario_from_json(serialize_config(s)) == s.
inline Json serialize_config(const Scenario& sc) {
    using io_detail::to_json;
    Json j;
    j["seed"] = sc.seed;
    j["satellite"] = {{"r_km", to_json<3>(sc.satellite_x0.r())},
                      {"v_km_s", to_json<3>(sc.satellite_x0.v())},
                      {"mass_kg", sc.satellite_body.mass_kg},
                      {"drag_area_m2", sc.satellite_body.drag_area_m2},
                      {"drag_coeff", sc.satellite_body.drag_coeff}};
    j["debris"] = {{"mean_r_km", to_json<3>(Vec3(sc.debris_belief0.mean.head<3>()))},
                   {"mean_v_km_s", to_json<3>(Vec3(sc.debris_belief0.mean.tail<3>()))},
                   {"cov", to_json<6>(sc.debris_belief0.cov)},
                   {"mass_kg", sc.debris_body.mass_kg},
                   {"drag_area_m2", sc.debris_body.drag_area_m2},
                   {"drag_coeff", sc.debris_body.drag_coeff},
                   {"q_km", to_json<6>(sc.noise.q())}};
    j["environment"] = {{"mu_km3_s2", sc.sim.env.mu_earth},
                        {"omega_rad_s", to_json<3>(sc.sim.env.omega_earth)},
                        {"rho0_kg_m3", sc.sim.env.rho0},
                        {"r0_km", sc.sim.env.r0},
                        {"scale_height_km", sc.sim.env.scale_height}};
    j["risk"] = {{"epsilon", sc.risk.epsilon}, {"d_thres_km", sc.risk.d_thres}, {"gamma", sc.risk.gamma}};
    j["mpc"] = {{"horizon_steps", sc.horizon},
                {"control_period_s", sc.sim.control_period},
                {"dt_s", sc.sim.dt},
                {"sim_duration_s", sc.sim_duration},
                {"u_min_km_s2", to_json<3>(sc.bounds.lower)},
                {"u_max_km_s2", to_json<3>(sc.bounds.upper)},
                {"control_weight", to_json<3>(sc.control_weight)},
                {"control_enabled", sc.control_enabled}};
    j["propagator"] = {{"kind", std::string(to_string(sc.propagator.kind))}, {"mc_samples", sc.propagator.mc_samples}};
    j["cem"] = {{"population", sc.cem.population},
                {"elite_count", sc.cem.elite_count},
                {"max_iterations", sc.cem.max_iterations},
                {"init_std_km_s2", sc.cem.init_std},
                {"std_floor_km_s2", sc.cem.std_floor},
                {"smoothing", sc.cem.smoothing}};
    return j;
}

/// FNV-1a 64 of the canonical serialized config, as 16 hex digits.
inline std::string config_hash(const Scenario& sc) {
    const std::string text = serialize_config(sc).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// Result writers
// ---------------------------------------------------------------------------

inline std::string format_number(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

inline constexpr std::string_view kTrajectoryHeader =
    "t_s,rs_x_km,rs_y_km,rs_z_km,vs_x_km_s,vs_y_km_s,vs_z_km_s,rd_x_km,rd_y_km,rd_z_km,vd_x_km_s,vd_y_km_s,"
    "vd_z_km_s,u_x_km_s2,u_y_km_s2,u_z_km_s2,distance_km,risk_max,feasible";

/// One row per control step plus the terminal state. `risk_max` is the
/// largest planned per-horizon risk (<= 0 iff the plan is feasible); risk and
/// feasibility are empty on the terminal row.
inline void write_trajectory_csv(std::ostream& os, const EpisodeRecord& rec) {
    os << kTrajectoryHeader << '\n';
    for (const auto& s : rec.steps) {
        os << format_number(s.time);
        for (int i = 0; i < 6; ++i) os << ',' << format_number(s.satellite(i));
        for (int i = 0; i < 6; ++i) os << ',' << format_number(s.debris(i));
        for (int i = 0; i < 3; ++i) os << ',' << format_number(s.control(i));
        os << ',' << format_number((s.satellite.head<3>() - s.debris.head<3>()).norm());
        if (s.planned) {
            double worst = -std::numeric_limits<double>::infinity();
            for (double r : s.risks) worst = std::max(worst, r);
            os << ',' << (s.risks.empty() ? std::string() : format_number(worst)) << ',' << (s.feasible ? 1 : 0);
        } else {
            os << ",,";
        }
        os << '\n';
    }
}

inline Json episode_summary(const EpisodeRecord& rec, const Scenario& sc) {
    Json j;
    j["min_distance_km"] = rec.min_distance;
    j["total_delta_v_kms"] = rec.total_delta_v;
    j["collision"] = rec.collision;
    j["seeds"] = Json::array({rec.seed});
    j["config_hash"] = config_hash(sc);
    return j;
}

inline constexpr std::string_view kSweepHeader =
    "axis,value,propagator,runs,failed,collisions,min_distance_mean_km,min_distance_std_km,delta_v_mean_kms,"
    "delta_v_std_kms,failed_seeds";

inline void write_sweep_csv(std::ostream& os, std::span<const BatchRow> rows) {
    os << kSweepHeader << '\n';
    for (const auto& r : rows) {
        os << to_string(r.point.axis) << ',' << r.point.value_label() << ',' << to_string(r.point.propagator) << ','
           << r.runs << ',' << r.failed << ',' << r.collisions << ',' << format_number(r.min_distance_mean) << ','
           << format_number(r.min_distance_std) << ',' << format_number(r.delta_v_mean) << ','
           << format_number(r.delta_v_std) << ',';
        for (std::size_t i = 0; i < r.failed_seeds.size(); ++i) os << (i ? ";" : "") << r.failed_seeds[i];
        os << '\n';
    }
}

struct RunManifest {
    std::string config_hash;
    std::uint64_t master_seed = 0;
    std::string code_version{kCodeVersion};
    std::string timestamp;
    std::vector<std::pair<std::string, std::string>> outputs;  // role -> path

    Json to_json() const {
        Json j;
        j["config_hash"] = config_hash;
        j["master_seed"] = master_seed;
        j["code_version"] = code_version;
        j["timestamp"] = timestamp;
        Json o = Json::object();
        for (const auto& [role, path] : outputs) o[role] = path;
        j["outputs"] = o;
        return j;
    }
};

}  // namespace drcc
