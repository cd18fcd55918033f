#pragma once

// Command implementations behind the `drcc` executable. Argument parsing
// lives in tools/drcc_cli.cpp; these functions take parsed options and
// return the process exit code.

#include "drcc/scenario_io.hpp"

#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace drcc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitCollision = 2;

namespace fs = std::filesystem;

inline constexpr const char* kTrajectoryFile = "trajectory.csv";
inline constexpr const char* kSummaryFile = "summary.json";
inline constexpr const char* kConfigFile = "config.json";
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kSweepFile = "sweep.csv";
inline constexpr const char* kEpisodesFile = "episodes.csv";

/// UTC ISO-8601. SOURCE_DATE_EPOCH, when set, pins the value so that
/// manifests are reproducible too.
inline std::string utc_timestamp() {
    std::time_t t = std::time(nullptr);
    if (const char* sde = std::getenv("SOURCE_DATE_EPOCH"); sde && *sde) {
        char* end = nullptr;
        const long long v = std::strtoll(sde, &end, 10);
        if (end && *end == '\0') t = static_cast<std::time_t>(v);
    }
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    out << content;
    out.close();
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw std::runtime_error("cannot create output directory '" + dir.string() + "': " + ec.message());
}

/// Reads a config document (empty text means all defaults).
inline Json read_config_doc(const std::optional<std::string>& path) {
    if (!path) return Json::object();
    const std::string text = read_file(*path);
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) return Json::object();
    try {
        return Json::parse(text, nullptr, true, true);
    } catch (const Json::parse_error& e) {
        throw ConfigError(*path + ": parse error: " + e.what());
    }
}

struct RunOptions {
    std::optional<std::string> config_path;
    std::optional<std::string> manifest_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> propagator;
    std::optional<double> epsilon;
    std::string out_dir = "out";
    bool no_control = false;
};

/// Overrides go into the document before validation so their errors name
/// the same key paths as the config file.
inline Scenario scenario_for_run(const RunOptions& o) {
    Json doc;
    if (o.manifest_path) {
        if (o.config_path) throw ConfigError("give either --config or --manifest, not both");
        const Json man = Json::parse(read_file(*o.manifest_path), nullptr, true, true);
        if (!man.contains("config") || !man.contains("config_hash"))
            throw ConfigError(*o.manifest_path + ": not a run manifest");
        doc = man.at("config");
        const Scenario check = scenario_from_json(doc);
        if (config_hash(check) != man.at("config_hash").get<std::string>())
            throw ConfigError(*o.manifest_path + ": config does not match config_hash");
    } else {
        doc = read_config_doc(o.config_path);
    }
    if (!doc.is_object()) throw ConfigError("<root>: expected an object");
    if (o.seed) doc["seed"] = *o.seed;
    if (o.propagator) doc["propagator"]["kind"] = *o.propagator;
    if (o.epsilon) doc["risk"]["epsilon"] = *o.epsilon;
    if (o.no_control) doc["mpc"]["control_enabled"] = false;
    return scenario_from_json(doc);
}

inline int cmd_run(const RunOptions& o, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    try {
        const fs::path dir(o.out_dir);
        // Stale results from an earlier run must not survive a failed one.
        fs::remove(dir / kTrajectoryFile);
        fs::remove(dir / kSummaryFile);
        const Scenario sc = scenario_for_run(o);
        ensure_dir(dir);

        RunManifest man;
        man.config_hash = config_hash(sc);
        man.master_seed = sc.seed;
        man.timestamp = utc_timestamp();
        man.outputs = {{"config", (dir / kConfigFile).string()},
                       {"trajectory", (dir / kTrajectoryFile).string()},
                       {"summary", (dir / kSummaryFile).string()}};
        Json mj = man.to_json();
        mj["command"] = "run";
        mj["config"] = serialize_config(sc);
        write_file(dir / kConfigFile, serialize_config(sc).dump(2) + "\n");
        write_file(dir / kManifestFile, mj.dump(2) + "\n");

        const EpisodeRecord rec = run_episode(sc);

        std::ostringstream csv;
        write_trajectory_csv(csv, rec);
        const Json summary = episode_summary(rec, sc);
        write_file(dir / kTrajectoryFile, csv.str());
        write_file(dir / kSummaryFile, summary.dump(2) + "\n");

        out << "min_distance_km=" << format_number(rec.min_distance)
            << " total_delta_v_kms=" << format_number(rec.total_delta_v)
            << " collision=" << (rec.collision ? "true" : "false") << " out=" << dir.string() << "\n";
        return rec.collision ? kExitCollision : kExitOk;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitError;
    }
}

struct SweepOptions {
    std::optional<std::string> config_path;
    std::string axis;
    std::vector<std::string> values;
    std::vector<std::string> propagators{"mc"};
    int runs = 10;
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    bool quiet = false;
};

inline std::vector<SweepPoint> sweep_points(const SweepOptions& o) {
    if (o.values.empty()) throw std::invalid_argument("--values must not be empty");
    const SweepAxis axis = parse_sweep_axis(o.axis);
    std::vector<SweepPoint> pts;
    if (axis == SweepAxis::Propagator) {
        for (const auto& v : o.values) pts.push_back({axis, 0.0, parse_propagator(v)});
        return pts;
    }
    if (o.propagators.empty()) throw std::invalid_argument("--propagators must not be empty");
    std::vector<double> nums;
    for (const auto& v : o.values) {
        std::size_t used = 0;
        double x = 0.0;
        try {
            x = std::stod(v, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != v.size() || !std::isfinite(x))
            throw std::invalid_argument("--values: '" + v + "' is not a number");
        if (axis == SweepAxis::Epsilon && !(x > 0.0 && x < 1.0))
            throw std::invalid_argument("--values: epsilon " + v + " must be in (0, 1)");
        if (axis == SweepAxis::QScale && !(x >= 0.0))
            throw std::invalid_argument("--values: q_scale " + v + " must be >= 0");
        nums.push_back(x);
    }
    for (const auto& p : o.propagators) {
        const PropagatorKind kind = parse_propagator(p);
        for (double x : nums) pts.push_back({axis, x, kind});
    }
    return pts;
}

inline int cmd_sweep(const SweepOptions& o, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    try {
        const fs::path dir(o.out_dir);
        fs::remove(dir / kSweepFile);
        fs::remove(dir / kEpisodesFile);
        if (o.runs < 1) throw std::invalid_argument("--runs must be >= 1");
        Json doc = read_config_doc(o.config_path);
        const Scenario base = scenario_from_json(doc);
        const auto points = sweep_points(o);
        ensure_dir(dir);

        RunManifest man;
        man.config_hash = config_hash(base);
        man.master_seed = o.seed;
        man.timestamp = utc_timestamp();
        man.outputs = {{"sweep", (dir / kSweepFile).string()}, {"episodes", (dir / kEpisodesFile).string()}};
        Json mj = man.to_json();
        mj["command"] = "sweep";
        mj["config"] = serialize_config(base);
        mj["sweep"] = {{"axis", o.axis}, {"values", o.values}, {"propagators", o.propagators}, {"runs", o.runs}};
        write_file(dir / kManifestFile, mj.dump(2) + "\n");

        const BatchProgress progress = [&](const SweepPoint& p, int run, const EpisodeRecord* rec) {
            if (o.quiet) return;
            err << to_string(p.axis) << '=' << p.value_label() << " [" << to_string(p.propagator) << "] run "
                << run + 1 << '/' << o.runs << ": ";
            if (rec)
                err << "min_distance_km=" << format_number(rec->min_distance)
                    << " delta_v_kms=" << format_number(rec->total_delta_v) << "\n";
            else
                err << "FAILED\n";
        };
        const auto rows = run_batch(base, o.runs, points, o.seed, progress);

        std::ostringstream agg;
        write_sweep_csv(agg, rows);
        std::ostringstream eps;
        eps << "axis,value,propagator,run,seed,min_distance_km,delta_v_kms,collision\n";
        for (const auto& r : rows) {
            std::size_t ok = 0;
            for (std::size_t j = 0; j < r.seeds.size(); ++j) {
                eps << to_string(r.point.axis) << ',' << r.point.value_label() << ',' << to_string(r.point.propagator)
                    << ',' << j << ',' << r.seeds[j] << ',';
                const bool failed =
                    std::find(r.failed_seeds.begin(), r.failed_seeds.end(), r.seeds[j]) != r.failed_seeds.end();
                if (failed) {
                    eps << ",,failed\n";
                } else {
                    const double md = r.min_distances[ok];
                    eps << format_number(md) << ',' << format_number(r.delta_vs[ok]) << ','
                        << (md < base.risk.d_thres ? 1 : 0) << '\n';
                    ++ok;
                }
            }
        }
        write_file(dir / kEpisodesFile, eps.str());
        write_file(dir / kSweepFile, agg.str());
        out << agg.str();
        int failed = 0;
        for (const auto& r : rows) failed += r.failed;
        if (failed > 0) err << "warning: " << failed << " episode(s) failed; see failed_seeds in " << kSweepFile << "\n";
        return kExitOk;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitError;
    }
}

inline int cmd_validate(const std::optional<std::string>& config_path, bool dump, std::ostream& out = std::cout,
                        std::ostream& err = std::cerr) {
    try {
        const Scenario sc = scenario_from_json(read_config_doc(config_path));
        if (dump)
            out << serialize_config(sc).dump(2) << "\n";
        else
            out << "ok config_hash=" << config_hash(sc) << "\n";
        return kExitOk;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitError;
    }
}

}  // namespace drcc::cli
