#pragma once

// Run-directory persistence: CSV and snapshot writers/readers, atomic staging.

#include "hemiflow/discretization.hpp"
#include "hemiflow/estimates.hpp"
#include "hemiflow/solver.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace hemiflow::harness {

namespace fs = std::filesystem;

/// Fixed 17-significant-digit decimal.
inline std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Write to a sibling temporary, then rename over the target.
inline void atomic_write(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        if (!out.flush()) throw std::runtime_error("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

/// A run directory built under "<target>.partial" and renamed into place on commit.
/// An uncommitted stage is removed on destruction.
class StagedDirectory {
public:
    explicit StagedDirectory(fs::path target) : target_(std::move(target)), stage_(target_.string() + ".partial") {
        fs::remove_all(stage_);
        fs::create_directories(stage_);
    }
    StagedDirectory(const StagedDirectory&) = delete;
    StagedDirectory& operator=(const StagedDirectory&) = delete;
    ~StagedDirectory() {
        if (!committed_) {
            std::error_code ec;
            fs::remove_all(stage_, ec);
        }
    }

    const fs::path& path() const { return stage_; }
    void write(const fs::path& relative, const std::string& content) {
        const auto full = stage_ / relative;
        fs::create_directories(full.parent_path());
        atomic_write(full, content);
    }
    void commit() {
        fs::remove_all(target_);
        if (target_.has_parent_path()) fs::create_directories(target_.parent_path());
        fs::rename(stage_, target_);
        committed_ = true;
    }

private:
    fs::path target_;
    fs::path stage_;
    bool committed_ = false;
};

// ---------------------------------------------------------------------------
// trajectory.csv

inline std::string trajectory_header(ProblemKind kind) {
    return kind == ProblemKind::Boundary ? "t,l2_sq,v_sq,lp_p,trace,fp_iters,halvings" : "t,l2_sq,v_sq,lp_p,fp_iters,halvings";
}

inline std::string trajectory_csv(const Trajectory& traj) {
    std::string out = trajectory_header(traj.kind) + "\n";
    for (const auto& r : traj.records) {
        out += fmt(r.t) + ',' + fmt(r.l2_sq) + ',' + fmt(r.v_sq) + ',' + fmt(r.lp_p) + ',';
        if (traj.kind == ProblemKind::Boundary) out += fmt(r.trace) + ',';
        out += std::to_string(r.fp_iters) + ',' + std::to_string(r.halvings) + '\n';
    }
    return out;
}

namespace detail {

inline std::vector<std::string> split(const std::string& line, char sep = ',') {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, sep)) out.push_back(cell);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

inline double parse_double(const std::string& s, const std::string& where) {
    std::size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(s, &used);
    } catch (const std::exception&) {
        throw std::runtime_error(where + ": not a number: '" + s + "'");
    }
    if (used != s.size()) throw std::runtime_error(where + ": trailing characters in '" + s + "'");
    return x;
}

inline int parse_int(const std::string& s, const std::string& where) {
    const double x = parse_double(s, where);
    if (x != std::floor(x)) throw std::runtime_error(where + ": not an integer: '" + s + "'");
    return static_cast<int>(x);
}

}  // namespace detail

/// Parse and schema-check a trajectory.csv body.
inline std::vector<StepRecord> parse_trajectory_csv(const std::string& body, ProblemKind kind) {
    std::istringstream in(body);
    std::string line;
    if (!std::getline(in, line) || line != trajectory_header(kind))
        throw std::runtime_error("trajectory.csv: unexpected header '" + line + "'");
    const bool boundary = kind == ProblemKind::Boundary;
    const std::size_t width = boundary ? 7 : 6;
    std::vector<StepRecord> out;
    for (std::size_t row = 1; std::getline(in, line); ++row) {
        const auto cells = detail::split(line);
        const std::string where = "trajectory.csv row " + std::to_string(row);
        if (cells.size() != width) throw std::runtime_error(where + ": expected " + std::to_string(width) + " columns");
        StepRecord r;
        std::size_t c = 0;
        r.t = detail::parse_double(cells[c++], where);
        r.l2_sq = detail::parse_double(cells[c++], where);
        r.v_sq = detail::parse_double(cells[c++], where);
        r.lp_p = detail::parse_double(cells[c++], where);
        if (boundary) r.trace = detail::parse_double(cells[c++], where);
        r.fp_iters = detail::parse_int(cells[c++], where);
        r.halvings = detail::parse_int(cells[c++], where);
        out.push_back(r);
    }
    if (out.empty()) throw std::runtime_error("trajectory.csv: no rows");
    return out;
}

// ---------------------------------------------------------------------------
// states.txt and xi.csv

inline std::string states_text(const DiscreteSpace& space, const std::vector<Field>& states,
                               const std::vector<double>& times) {
    std::ostringstream os;
    for (std::size_t i = 0; i < states.size(); ++i) write_snapshot(os, space, states[i], times[i]);
    return os.str();
}

inline std::vector<Snapshot> parse_states(const std::string& body) {
    std::istringstream in(body);
    std::vector<Snapshot> out;
    while (in >> std::ws && in.peek() != EOF) out.push_back(read_snapshot(in));
    return out;
}

/// One row per stored state: t then the recorded slopes.
inline std::string xi_csv(const Trajectory& traj) {
    std::string out = "t";
    const auto width = traj.xi.empty() ? 0 : traj.xi.front().size();
    for (Eigen::Index k = 0; k < width; ++k) out += ",xi" + std::to_string(k);
    out += '\n';
    for (std::size_t i = 0; i < traj.xi.size(); ++i) {
        out += fmt(traj.times[i]);
        for (Eigen::Index k = 0; k < traj.xi[i].size(); ++k) out += ',' + fmt(traj.xi[i][k]);
        out += '\n';
    }
    return out;
}

inline std::vector<Eigen::VectorXd> parse_xi_csv(const std::string& body, Eigen::Index width) {
    std::istringstream in(body);
    std::string line;
    if (!std::getline(in, line) || detail::split(line).size() != static_cast<std::size_t>(width) + 1)
        throw std::runtime_error("xi.csv: unexpected header");
    std::vector<Eigen::VectorXd> out;
    for (std::size_t row = 1; std::getline(in, line); ++row) {
        const auto cells = detail::split(line);
        const std::string where = "xi.csv row " + std::to_string(row);
        if (cells.size() != static_cast<std::size_t>(width) + 1) throw std::runtime_error(where + ": wrong width");
        Eigen::VectorXd xi(width);
        for (Eigen::Index k = 0; k < width; ++k) xi[k] = detail::parse_double(cells[k + 1], where);
        out.push_back(std::move(xi));
    }
    return out;
}

/// Files of one trajectory inside a run directory (prefix "" or "member_007/").
inline void write_trajectory(StagedDirectory& dir, const std::string& prefix, const DiscreteSpace& space,
                             const Trajectory& traj) {
    dir.write(prefix + "trajectory.csv", trajectory_csv(traj));
    dir.write(prefix + "states.txt", states_text(space, traj.states, traj.times));
    dir.write(prefix + "xi.csv", xi_csv(traj));
}

/// Rebuild a trajectory from its files; dt, stride, level and offset come from the manifest.
inline Trajectory load_trajectory(const fs::path& dir, const DiscreteSpace& space, ProblemKind kind, double dt,
                                  int stride, unsigned level, double offset) {
    Trajectory traj;
    traj.kind = kind;
    traj.dt = dt;
    traj.stride = stride;
    traj.level = level;
    traj.offset = offset;
    traj.records = parse_trajectory_csv(read_file(dir / "trajectory.csv"), kind);
    for (const auto& snap : parse_states(read_file(dir / "states.txt"))) {
        traj.times.push_back(snap.time);
        const auto k = static_cast<std::size_t>(std::llround(snap.time / dt));
        if (k >= traj.records.size()) throw std::runtime_error("states.txt: time beyond the trajectory records");
        traj.step_index.push_back(k);
        traj.states.push_back(field_from_snapshot(space, snap));
    }
    traj.xi = parse_xi_csv(read_file(dir / "xi.csv"), kind == ProblemKind::Boundary ? 1 : space.dofs());
    if (traj.xi.size() != traj.states.size()) throw std::runtime_error("xi.csv: row count differs from states.txt");
    if (traj.states.empty()) throw std::runtime_error("states.txt: no snapshots");
    return traj;
}

// ---------------------------------------------------------------------------
// Reports and manifests

inline std::string reports_header() { return "member,id,samples,min_margin,violations,skipped,slack,asserted,note"; }

inline std::string report_row(long member, const InequalityReport& r) {
    std::string note = r.note;
    for (auto& ch : note)
        if (ch == ',' || ch == '\n') ch = ';';
    return std::to_string(member) + ',' + r.id + ',' + std::to_string(r.margins.size()) + ',' +
           fmt(r.margins.empty() ? 0.0 : r.min_margin) + ',' + std::to_string(r.violations) + ',' +
           std::to_string(r.skipped) + ',' + fmt(r.slack) + ',' + (r.asserted ? "1" : "0") + ',' + note + '\n';
}

inline nlohmann::json to_json(const HypothesisConstants& h) {
    return {{"a", h.a}, {"b", h.b}, {"c", h.c}, {"d", h.d}, {"p", h.p}, {"kind", to_string(h.kind)},
            {"scan_error", h.scan_error}};
}

inline nlohmann::json to_json(const ConstantSet& k) {
    nlohmann::json j = {{"kind", to_string(k.kind)}, {"a", k.a}, {"b", k.b}, {"c", k.c}, {"d", k.d}, {"p", k.p},
                        {"lambda1", k.lambda1}, {"m_omega", k.m_omega}, {"F_h_sq", k.F_h_sq},
                        {"F_dual_sq", k.F_dual_sq}, {"kappa", k.kappa}, {"offset", k.offset}, {"R0", k.R0}};
    if (k.kind == ProblemKind::Boundary) {
        j["trace_norm_sq"] = k.trace_norm_sq;
        j["m_gamma"] = k.m_gamma;
        j["C1"] = k.C1;
        j["C2"] = k.C2;
        j["C3"] = k.C3;
        j["C4"] = k.C4;
        j["C5"] = k.C5;
        j["C6"] = k.C6;
        j["D1"] = k.D1;
        j["D2"] = k.D2;
        j["C2_nonpositive"] = k.c2_nonpositive;
        j["expressions"] = {
            {"C1", "1 - d*trace_norm_sq"},
            {"C2", "F_dual_sq/C1 - 2*c*m_gamma"},
            {"R0", "C2/(C1*lambda1) + 1"},
            {"C3", "sqrt(F_dual_sq) + a*sqrt(trace_norm_sq)*sqrt(m_gamma)"},
            {"C4", "1 + b*trace_norm_sq"},
            {"C5", "(C2 + R0^2)/C1"},
            {"C6", "2*C3^2 + 2*C4^2*C5"},
            {"D1", "2*F_dual_sq + 4*trace_norm_sq*a^2*m_gamma"},
            {"D2", "4*trace_norm_sq*b^2"},
        };
    } else {
        j["forcing_factor"] = k.forcing_factor;
        j["threshold_M"] = k.threshold_M;
    }
    return j;
}

}  // namespace hemiflow::harness
