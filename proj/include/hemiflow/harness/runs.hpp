#pragma once

// The four CLI operations: simulate, ensemble, verify, convergence.

#include "hemiflow/estimates.hpp"
#include "hemiflow/harness/config.hpp"
#include "hemiflow/harness/io.hpp"
#include "hemiflow/semiflow.hpp"

#include <chrono>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace hemiflow::harness {

inline constexpr const char* tool_version = "0.1.0";

enum ExitCode : int { ExitOk = 0, ExitConfig = 2, ExitSolver = 3, ExitVerification = 4 };

struct RunOptions {
    fs::path out;
    unsigned threads = 1;
    std::optional<std::uint64_t> seed_override;
};

/// --seed-override replaces the selection seed and the ensemble sampling seed.
inline RunConfig apply_overrides(RunConfig cfg, const RunOptions& opts) {
    if (!opts.seed_override) return cfg;
    const auto k = *opts.seed_override;
    cfg.integrator.seed = k;
    cfg.ensemble_seed = k;
    cfg.selection_seeds.clear();
    cfg.raw["integrator"]["seed"] = k;
    if (cfg.raw.contains("ensemble")) {
        cfg.raw["ensemble"]["seed"] = k;
        cfg.raw["ensemble"].erase("selection_seeds");
    }
    return cfg;
}

/// Resolved diagnostic settings shared by ensemble and verify.
struct CheckSettings {
    ConstantSet k;
    double R = 0.0;  ///< bound on ||v0||_H
    double c_slack = 0.0;
    double slack = 0.0;
    double t_min = 0.0;
    std::optional<double> truncation_M;  ///< choose_M(epsilon, R), SOURCE with p > 2
    double flattening_M = 0.0;           ///< SOURCE: diagnostics.M or the threshold
    std::vector<Eigen::Index> flattening_m;
    std::string note;
};

inline double mesh_size(const Problem& pr) { return pr.spec.space->mesh().max_size(); }

inline CheckSettings resolve_checks(const RunConfig& cfg, const Problem& pr, double R,
                                    std::optional<double> c_slack = std::nullopt) {
    CheckSettings s;
    s.k = derive_constants(pr.spec, cfg.forcing_factor);
    s.R = R;
    const double h = mesh_size(pr);
    s.c_slack = c_slack ? *c_slack : cfg.c_slack ? *cfg.c_slack : calibrate_slack(std::max(R, 1.0), cfg.integrator.dt, h);
    s.slack = discretization_slack(s.c_slack, cfg.integrator.dt, h);
    s.t_min = cfg.t_min ? *cfg.t_min : 0.5 * cfg.integrator.horizon;
    s.flattening_m = cfg.m_list;
    if (cfg.kind == ProblemKind::Source && s.k.d > 0.0) {
        if (s.k.p > 2.0) s.truncation_M = choose_M(s.k, cfg.epsilon, R);
        s.flattening_M = cfg.M ? *cfg.M : s.k.threshold_M;
        if (s.flattening_M < s.k.threshold_M) throw ConfigError("diagnostics.M", "below the threshold (-2c/d)^{1/p}");
        const auto m = flattening_dimension(s.k, *pr.spec.space, cfg.delta, s.flattening_M, R, s.t_min,
                                            cfg.flattening_target);
        if (m) {
            if (std::find(s.flattening_m.begin(), s.flattening_m.end(), *m) == s.flattening_m.end())
                s.flattening_m.push_back(*m);
        } else {
            s.note = "no m reaches the flattening target on this mesh";
        }
    }
    return s;
}

// ---------------------------------------------------------------------------
// Per-trajectory checks

/// Stored states reproduce the recorded scalars.
inline InequalityReport record_consistency(const Trajectory& traj, const ProblemSpec& spec) {
    InequalityReport r;
    r.id = "record_consistency";
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
        const auto fresh = hemiflow::detail::make_record(spec, traj.states[i], traj.times[i]);
        const auto& kept = traj.records.at(traj.step_index[i]);
        double worst = 0.0;
        auto cmp = [&](double a, double b) { worst = std::max(worst, std::abs(a - b) / (1.0 + std::abs(b))); };
        cmp(fresh.l2_sq, kept.l2_sq);
        cmp(fresh.v_sq, kept.v_sq);
        cmp(fresh.lp_p, kept.lp_p);
        if (spec.kind == ProblemKind::Boundary) cmp(fresh.trace, kept.trace);
        cmp(traj.times[i], kept.t);
        r.add(traj.times[i], 1e-9 - worst);
    }
    return r;
}

/// Recorded slopes lie in the slope range of j over the kernel reach of each state value.
inline InequalityReport selection_report(const Trajectory& traj, const ProblemSpec& spec, double reach) {
    InequalityReport r;
    r.id = "selection";
    constexpr double tol = 1e-8;
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
        const auto& v = traj.states[i];
        double worst = 0.0;
        if (spec.kind == ProblemKind::Boundary) {
            worst = slope_envelope(spec.potential, v[v.size() - 1], reach).distance(traj.xi[i][0]);
        } else {
            for (Eigen::Index k = 0; k < v.size(); ++k)
                worst = std::max(worst, slope_envelope(spec.potential, v[k], reach).distance(traj.xi[i][k]));
        }
        r.add(traj.times[i], tol - worst);
    }
    return r;
}

inline InequalityReport residual_report(const Trajectory& traj, const ProblemSpec& spec, double tolerance) {
    InequalityReport r;
    r.id = "residual";
    if (traj.stride != 1) {
        r.asserted = false;
        r.note = "refused: residual check needs a stride-1 trajectory";
        return r;
    }
    r.add(traj.times.back(), std::max(10.0 * tolerance, 1e-8) - residual_check(traj, spec));
    return r;
}

/// ||(I - P_m) v||_H^2 non-increasing in m at every stored state.
inline InequalityReport tail_monotone_report(const Trajectory& traj, const DiscreteSpace& space) {
    InequalityReport r;
    r.id = "tail_monotone";
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
        const auto tails = tail_spectrum(space, traj.states[i]);
        double worst = 0.0;
        for (std::size_t m = 1; m < tails.size(); ++m) worst = std::max(worst, tails[m] - tails[m - 1]);
        r.add(traj.times[i], 1e-12 * (1.0 + tails.front()) - worst);
    }
    return r;
}

inline std::vector<InequalityReport> trajectory_checks(const RunConfig& cfg, const Problem& pr,
                                                       const CheckSettings& s, const Trajectory& traj) {
    const auto& spec = pr.spec;
    std::vector<InequalityReport> out;
    out.push_back(record_consistency(traj, spec));
    out.push_back(residual_report(traj, spec, cfg.integrator.tolerance));
    out.push_back(selection_report(traj, spec, (1.0 + std::abs(traj.offset)) / static_cast<double>(traj.level)));
    out.push_back(tail_monotone_report(traj, *spec.space));
    out.push_back(check_decay_bound(traj, s.k, s.slack));
    if (spec.kind == ProblemKind::Source) {
        out.push_back(check_energy_inequality(traj, s.k, s.slack));
        if (s.truncation_M)
            for (auto& r : check_truncation_bounds(traj, spec, s.k, *s.truncation_M, cfg.epsilon, s.slack))
                out.push_back(std::move(r));
    } else {
        for (auto& r : check_boundary_chain(traj, spec, s.k, s.slack, s.t_min)) out.push_back(std::move(r));
    }
    if (traj.times.back() >= s.t_min + 2.0 - 1e-12) {
        for (auto m : s.flattening_m) {
            auto r = flattening_tail_bound(s.k, spec, m, cfg.delta, s.flattening_M, traj, s.t_min, s.R, s.slack);
            r.id += "_m" + std::to_string(m);
            out.push_back(std::move(r));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Manifest

inline nlohmann::json resolved_json(const RunConfig& cfg, const Problem& pr) {
    const auto& ic = pr.integrator;
    return {{"cells", cfg.cells},
            {"h", mesh_size(pr)},
            {"bc", to_string(cfg.bc)},
            {"dofs", pr.spec.space->dofs()},
            {"lambda1", pr.spec.space->lambda1()},
            {"dt", ic.dt},
            {"T", ic.horizon},
            {"steps", ic.steps()},
            {"stride", ic.stride},
            {"n", ic.level},
            {"policy", to_string(ic.policy)},
            {"seed", ic.seed},
            {"tolerance", ic.tolerance},
            {"max_iterations", ic.max_iterations},
            {"max_halvings", ic.max_halvings},
            {"quad_points", ic.quad_points}};
}

inline nlohmann::json settings_json(const CheckSettings& s) {
    nlohmann::json j = {{"R", s.R},           {"c_slack", s.c_slack},       {"slack", s.slack},
                        {"t_min", s.t_min},   {"flattening_m", s.flattening_m}};
    if (s.k.kind == ProblemKind::Source) j["flattening_M"] = s.flattening_M;
    if (s.truncation_M) j["truncation_M"] = *s.truncation_M;
    if (!s.note.empty()) j["note"] = s.note;
    return j;
}

inline nlohmann::json base_manifest(const std::string& mode, const RunConfig& cfg, const Problem& pr) {
    return {{"tool", "hemiflow"},
            {"version", tool_version},
            {"mode", mode},
            {"config", cfg.raw},
            {"resolved", resolved_json(cfg, pr)},
            {"hypotheses", {{"base", to_json(pr.base_constants)}, {"certified", to_json(pr.spec.constants)}}}};
}

inline double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---------------------------------------------------------------------------
// simulate

/// Single trajectory from problem.initial: trajectory.csv, states.txt, xi.csv, manifest.json.
inline int simulate(const RunConfig& config, const RunOptions& opts, std::ostream& log) {
    const auto start = std::chrono::steady_clock::now();
    const auto cfg = apply_overrides(config, opts);
    const auto pr = build_problem(cfg);
    const auto k = derive_constants(pr.spec, cfg.forcing_factor);

    auto manifest = base_manifest("simulate", cfg, pr);
    manifest["constants"] = to_json(k);
    Trajectory traj;
    int code = ExitOk;
    try {
        traj = integrate(pr.spec, pr.v0, pr.integrator);
        manifest["stages"] = {{"integrate", "ok"}};
    } catch (const NonConvergence& e) {
        manifest["stages"] = {{"integrate", std::string("aborted: ") + e.what()}};
        log << "solver aborted: " << e.what() << '\n';
        code = ExitSolver;
    }

    StagedDirectory dir(opts.out);
    if (code == ExitOk) {
        write_trajectory(dir, "", *pr.spec.space, traj);
        manifest["offset"] = traj.offset;
        manifest["records"] = traj.records.size();
        manifest["stored_states"] = traj.states.size();
    }
    manifest["wall_clock_seconds"] = seconds_since(start);
    dir.write("manifest.json", manifest.dump(2) + "\n");
    dir.commit();
    if (code == ExitOk) {
        const auto& last = traj.records.back();
        log << "simulate: " << traj.records.size() - 1 << " steps, t=" << fmt(last.t) << " l2=" << fmt(std::sqrt(last.l2_sq))
            << " -> " << opts.out.string() << '\n';
    }
    return code;
}

// ---------------------------------------------------------------------------
// ensemble

inline std::string member_prefix(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "member_%03zu/", i);
    return buf;
}

inline std::vector<std::uint64_t> member_seeds(const RunConfig& cfg) {
    return cfg.selection_seeds.empty() ? std::vector<std::uint64_t>{cfg.integrator.seed} : cfg.selection_seeds;
}

/// N sampled initials evolved in parallel, with set diagnostics and per-member reports.
inline int ensemble(const RunConfig& config, const RunOptions& opts, std::ostream& log) {
    const auto start = std::chrono::steady_clock::now();
    const auto cfg = apply_overrides(config, opts);
    const auto pr = build_problem(cfg);
    const auto& space = *pr.spec.space;
    const auto settings = resolve_checks(cfg, pr, cfg.R);
    const auto& k = settings.k;

    const auto initials = sample_initials(space, cfg.R, cfg.N, cfg.ensemble_seed);
    const auto run = evolve_ensemble(pr.spec, initials, pr.integrator, member_seeds(cfg), opts.threads);

    auto manifest = base_manifest("ensemble", cfg, pr);
    manifest["constants"] = to_json(k);
    manifest["diagnostics"] = settings_json(settings);
    StagedDirectory dir(opts.out);

    nlohmann::json members = nlohmann::json::array();
    std::string reports = reports_header() + "\n";
    std::size_t violated = 0;
    for (std::size_t i = 0; i < run.members.size(); ++i) {
        const auto& m = run.members[i];
        members.push_back({{"index", i}, {"seed", m.seed}, {"status", m.ok() ? "ok" : "aborted: " + m.error},
                           {"offset", m.ok() ? m.trajectory.offset : 0.0}});
        if (!m.ok()) continue;
        write_trajectory(dir, member_prefix(i), space, m.trajectory);
        for (const auto& r : trajectory_checks(cfg, pr, settings, m.trajectory)) {
            reports += report_row(static_cast<long>(i), r);
            if (!r.holds()) ++violated;
        }
    }
    manifest["members"] = members;
    dir.write("reports.csv", reports);

    nlohmann::json stages = {{"integrate", run.successful() == run.members.size() ? "ok" : "partial"},
                             {"report_violations", violated}};
    if (run.successful() > 0) {
        const auto& times = run.times();
        // Absorbing entry: measured vs formula-inverted prediction.
        const auto entry = absorbing_entry(run, k.R0);
        std::string absorbing = "member,v0_l2_sq,predicted_entry,measured_entry\n";
        for (std::size_t i = 0; i < run.members.size(); ++i) {
            if (!run.members[i].ok()) continue;
            const double y0 = run.members[i].trajectory.records.front().l2_sq;
            absorbing += std::to_string(i) + ',' + fmt(y0) + ',' + fmt(predicted_entry_time(k, y0)) + ',' +
                         (entry[i] ? fmt(*entry[i]) : std::string("nan")) + '\n';
        }
        dir.write("absorbing.csv", absorbing);

        // Spectral tails, max over members.
        std::vector<Eigen::Index> m_all = settings.flattening_m;
        if (m_all.empty()) m_all = {1};
        const auto profile = flattening_profile(run, m_all);
        std::string flat = "t";
        for (auto m : m_all) flat += ",tail_m" + std::to_string(m);
        flat += '\n';
        for (std::size_t t = 0; t < times.size(); ++t) {
            flat += fmt(times[t]);
            for (std::size_t j = 0; j < m_all.size(); ++j) flat += ',' + fmt(profile.max_tail(t, j));
            flat += '\n';
        }
        dir.write("flattening.csv", flat);

        // Greedy k-cover diameters of each slice.
        std::string cover = "t";
        std::vector<std::vector<double>> series;
        for (auto kk : cfg.k_list) {
            cover += ",k" + std::to_string(kk);
            series.push_back(covering_series(run, kk));
        }
        cover += '\n';
        for (std::size_t t = 0; t < times.size(); ++t) {
            cover += fmt(times[t]);
            for (const auto& s : series) cover += ',' + fmt(s[t]);
            cover += '\n';
        }
        dir.write("covering.csv", cover);

        // omega-limit estimate of the sample and its attraction curve.
        const double merge_tol = cfg.merge_tol ? *cfg.merge_tol : 1e-4 * k.R0;
        const auto omega = omega_limit_estimate(run, settings.t_min, merge_tol);
        dir.write("omega.txt", states_text(space, omega.points, std::vector<double>(omega.points.size(), omega.time)));
        const auto curve = attraction_curve(run, omega);
        std::string attraction = "t,dist_to_omega\n";
        for (std::size_t t = 0; t < times.size(); ++t) attraction += fmt(times[t]) + ',' + fmt(curve[t]) + '\n';
        dir.write("attraction.csv", attraction);
        manifest["omega"] = {{"points", omega.points.size()}, {"merge_tol", merge_tol}, {"t_min", settings.t_min}};
        stages["diagnostics"] = "ok";
    }
    manifest["stages"] = stages;
    manifest["wall_clock_seconds"] = seconds_since(start);
    dir.write("manifest.json", manifest.dump(2) + "\n");
    dir.commit();
    log << "ensemble: " << run.successful() << "/" << run.members.size() << " members, " << violated
        << " violated reports -> " << opts.out.string() << '\n';
    return run.successful() == run.members.size() ? ExitOk : ExitSolver;
}

// ---------------------------------------------------------------------------
// verify

struct VerifyResult {
    std::vector<std::pair<long, InequalityReport>> reports;
    bool passed() const {
        for (const auto& [m, r] : reports)
            if (!r.holds()) return false;
        return true;
    }
};

/// Re-derive the problem from a run directory's manifest and rerun every check on the stored data.
inline VerifyResult verify_run(const fs::path& run_dir) {
    const auto manifest = nlohmann::json::parse(read_file(run_dir / "manifest.json"));
    const auto cfg = parse_config(manifest.at("config"));
    const auto pr = build_problem(cfg);
    const auto& res = manifest.at("resolved");
    const double offset_default = manifest.value("offset", 0.0);
    const std::string mode = manifest.at("mode").get<std::string>();

    std::vector<std::pair<long, Trajectory>> trajs;
    auto load = [&](const fs::path& dir, double offset) {
        return load_trajectory(dir, *pr.spec.space, cfg.kind, res.at("dt").get<double>(), res.at("stride").get<int>(),
                               res.at("n").get<unsigned>(), offset);
    };
    if (mode == "ensemble") {
        const auto& members = manifest.at("members");
        for (std::size_t i = 0; i < members.size(); ++i)
            if (members[i].at("status").get<std::string>() == "ok")
                trajs.emplace_back(static_cast<long>(i), load(run_dir / member_prefix(i), members[i].at("offset").get<double>()));
    } else {
        trajs.emplace_back(-1, load(run_dir, offset_default));
    }
    if (trajs.empty()) throw std::runtime_error("verify: no completed trajectories in " + run_dir.string());

    double R = cfg.R;
    if (mode != "ensemble") R = std::sqrt(trajs.front().second.records.front().l2_sq);
    std::optional<double> c_slack;
    if (manifest.contains("diagnostics")) c_slack = manifest["diagnostics"].at("c_slack").get<double>();
    const auto settings = resolve_checks(cfg, pr, R, c_slack);

    VerifyResult out;
    // Constants in the manifest agree with the re-derivation.
    InequalityReport constants;
    constants.id = "manifest_constants";
    const auto fresh = to_json(settings.k);
    double worst = 0.0;
    for (const auto& [key, value] : fresh.items())
        if (value.is_number_float()) {
            const double kept = manifest.at("constants").at(key).get<double>();
            worst = std::max(worst, std::abs(kept - value.get<double>()) / (1.0 + std::abs(kept)));
        }
    constants.add(0.0, 1e-12 - worst);
    out.reports.emplace_back(-1, constants);

    for (const auto& [member, traj] : trajs)
        for (auto& r : trajectory_checks(cfg, pr, settings, traj)) out.reports.emplace_back(member, std::move(r));
    return out;
}

inline int verify(const fs::path& run_dir, const RunOptions& opts, std::ostream& log) {
    const auto result = verify_run(run_dir);
    std::string csv = reports_header() + "\n";
    std::size_t failed = 0;
    for (const auto& [member, r] : result.reports) {
        csv += report_row(member, r);
        if (!r.holds()) {
            ++failed;
            log << "FAIL member=" << member << ' ';
            write_report(log, r);
        }
    }
    if (!opts.out.empty()) {
        fs::create_directories(opts.out);
        atomic_write(opts.out / "verify.csv", csv);
    }
    log << "verify: " << result.reports.size() << " reports, " << failed << " violated\n";
    return failed == 0 ? ExitOk : ExitVerification;
}

// ---------------------------------------------------------------------------
// convergence

struct ConvergenceRow {
    double h = 0.0;
    double dt = 0.0;
    double l2_final = 0.0;
    double diff_to_next = std::numeric_limits<double>::quiet_NaN();  ///< ||u_h - u_{h/2}||_H on the coarsest mesh
    double ratio = std::numeric_limits<double>::quiet_NaN();
    double exact_error = std::numeric_limits<double>::quiet_NaN();   ///< max nodal error vs the exact solution
};

/// Decay rate of the sine initial profile when the problem is linear and the
/// profile is an exact eigenfunction (j = 0 or s^2/2 with zero offset, F = 0).
inline std::optional<double> exact_rate(const RunConfig& cfg) {
    if (cfg.kind != ProblemKind::Source || cfg.initial.type != "sine" || cfg.forcing.type != "zero") return std::nullopt;
    const double base = std::pow(cfg.initial.mode * M_PI, 2.0);
    if (cfg.potential.name == "zero") return base;
    if (cfg.potential.name == "quadratic" && selection_offset(cfg.integrator.policy, cfg.integrator.seed) == 0.0)
        return base + 1.0;
    return std::nullopt;
}

/// Runs h in {1/64, 1/128, 1/256} at the configured dt; differences are compared
/// on the 1/64 mesh by nodal injection.
inline std::vector<ConvergenceRow> convergence_table(const RunConfig& cfg) {
    const std::vector<std::size_t> cells{64, 128, 256};
    std::vector<ConvergenceRow> rows;
    std::vector<std::shared_ptr<const DiscreteSpace>> spaces;
    std::vector<Field> finals;
    const auto rate = exact_rate(cfg);
    for (auto c : cells) {
        RunConfig rc = cfg;
        rc.cells = c;
        const auto pr = build_problem(rc);
        const auto traj = integrate(pr.spec, pr.v0, pr.integrator);
        ConvergenceRow row;
        row.h = 1.0 / static_cast<double>(c);
        row.dt = pr.integrator.dt;
        row.l2_final = std::sqrt(traj.records.back().l2_sq);
        if (rate) {
            const double T = traj.records.back().t;
            const double amp = cfg.initial.amplitude * std::exp(-*rate * T);
            const auto nodal = pr.spec.space->nodal_values(traj.states.back());
            const auto& x = pr.spec.space->mesh().nodes();
            double err = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i)
                err = std::max(err, std::abs(nodal[i] - amp * std::sin(cfg.initial.mode * M_PI * x[i])));
            row.exact_error = err;
        }
        rows.push_back(row);
        spaces.push_back(pr.spec.space);
        finals.push_back(traj.states.back());
    }
    const auto& coarse = *spaces.front();
    std::vector<Field> on_coarse;
    for (std::size_t i = 0; i < finals.size(); ++i) on_coarse.push_back(transfer(*spaces[i], finals[i], coarse));
    for (std::size_t i = 0; i + 1 < rows.size(); ++i)
        rows[i].diff_to_next = std::sqrt(coarse.mass().quadratic_form(on_coarse[i] - on_coarse[i + 1]));
    for (std::size_t i = 0; i + 2 < rows.size(); ++i) rows[i].ratio = rows[i].diff_to_next / rows[i + 1].diff_to_next;
    return rows;
}

inline int convergence(const RunConfig& config, const RunOptions& opts, std::ostream& log) {
    const auto start = std::chrono::steady_clock::now();
    const auto cfg = apply_overrides(config, opts);
    const auto rows = convergence_table(cfg);
    std::string csv = "h,dt,l2_final,diff_to_next,ratio,exact_error\n";
    for (const auto& r : rows)
        csv += fmt(r.h) + ',' + fmt(r.dt) + ',' + fmt(r.l2_final) + ',' + fmt(r.diff_to_next) + ',' + fmt(r.ratio) +
               ',' + fmt(r.exact_error) + '\n';
    nlohmann::json manifest = {{"tool", "hemiflow"},
                               {"version", tool_version},
                               {"mode", "convergence"},
                               {"config", cfg.raw},
                               {"cells", {64, 128, 256}},
                               {"richardson_ratio", rows.front().ratio},
                               {"wall_clock_seconds", seconds_since(start)}};
    StagedDirectory dir(opts.out);
    dir.write("convergence.csv", csv);
    dir.write("manifest.json", manifest.dump(2) + "\n");
    dir.commit();
    log << csv << "richardson ratio " << fmt(rows.front().ratio) << '\n';
    return ExitOk;
}

}  // namespace hemiflow::harness
