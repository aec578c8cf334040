#pragma once

// JSON run configuration: parsing, validation and problem assembly.
// The grammar is documented in docs/config.md.

#include "hemiflow/discretization.hpp"
#include "hemiflow/errors.hpp"
#include "hemiflow/nonsmooth.hpp"
#include "hemiflow/solver.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace hemiflow::harness {

using json = nlohmann::json;

/// Scalar profile on (0, 1) used for F and v0.
struct ProfileSpec {
    std::string type = "zero";  ///< zero | constant | sine | poly
    double value = 0.0;         ///< constant
    double amplitude = 1.0;     ///< sine
    int mode = 1;               ///< sine: A sin(mode pi x)
    std::vector<double> coefficients;  ///< poly, ascending in x

    double operator()(double x) const {
        if (type == "constant") return value;
        if (type == "sine") return amplitude * std::sin(mode * M_PI * x);
        if (type == "poly") return poly::eval(coefficients, x);
        return 0.0;
    }
};

inline ProfileSpec sine_profile() {
    ProfileSpec s;
    s.type = "sine";
    return s;
}

struct PotentialSpec {
    std::string name;  ///< empty for an explicit potential
    std::vector<double> breakpoints;
    std::vector<poly::Coeffs> pieces;
    double p = 2.0;
};

struct RunConfig {
    // problem
    ProblemKind kind = ProblemKind::Source;
    PotentialSpec potential;
    ProfileSpec forcing;
    ProfileSpec initial = sine_profile();
    std::size_t cells = 128;
    BoundaryCondition bc = BoundaryCondition::DirichletBoth;
    double d_fraction = 0.5;
    double scan_radius = 4.0;
    // integrator
    IntegratorConfig integrator;
    // ensemble
    double R = 1.0;
    std::size_t N = 1;
    std::uint64_t ensemble_seed = 0;
    std::vector<std::uint64_t> selection_seeds;  ///< empty: integrator.seed for every member
    // diagnostics
    std::vector<Eigen::Index> m_list;
    std::vector<std::size_t> k_list{1, 2, 4};
    std::optional<double> M;            ///< truncation level; default choose_M(epsilon, R)
    double delta = 1e-6;                ///< SOURCE: truncation premise level; BOUNDARY: window length
    double epsilon = 1e-2;
    double flattening_target = 1e-2;
    std::optional<double> t_min;        ///< default T/2
    std::optional<double> merge_tol;    ///< default 1e-4 R0
    std::optional<double> c_slack;      ///< default calibrated
    double forcing_factor = 4.0;

    json raw;  ///< the input document, echoed into manifests
};

namespace detail {

inline const json& require(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.is_object() || !obj.contains(key)) throw ConfigError(path + "." + key, "missing required field");
    return obj.at(key);
}

inline double number(const json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError(path, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(path, "must be finite");
    return x;
}

inline double number_or(const json& obj, const std::string& key, const std::string& path, double fallback) {
    return obj.contains(key) ? number(obj.at(key), path + "." + key) : fallback;
}

inline std::int64_t integer(const json& v, const std::string& path) {
    if (!v.is_number_integer()) throw ConfigError(path, "expected an integer");
    return v.get<std::int64_t>();
}

inline std::string text(const json& v, const std::string& path) {
    if (!v.is_string()) throw ConfigError(path, "expected a string");
    return v.get<std::string>();
}

inline std::vector<double> numbers(const json& v, const std::string& path) {
    if (!v.is_array()) throw ConfigError(path, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

inline ProfileSpec parse_profile(const json& v, const std::string& path) {
    ProfileSpec s;
    if (v.is_number()) {
        s.type = "constant";
        s.value = number(v, path);
        return s;
    }
    if (v.is_string()) {
        s.type = text(v, path);
        if (s.type != "zero" && s.type != "sine") throw ConfigError(path, "unknown profile '" + s.type + "'");
        return s;
    }
    if (!v.is_object()) throw ConfigError(path, "expected a profile object");
    s.type = text(require(v, "type", path), path + ".type");
    if (s.type == "zero") return s;
    if (s.type == "constant") {
        s.value = number(require(v, "value", path), path + ".value");
    } else if (s.type == "sine") {
        s.amplitude = number_or(v, "amplitude", path, 1.0);
        s.mode = v.contains("mode") ? static_cast<int>(integer(v.at("mode"), path + ".mode")) : 1;
        if (s.mode < 1) throw ConfigError(path + ".mode", "must be >= 1");
    } else if (s.type == "poly") {
        s.coefficients = numbers(require(v, "coefficients", path), path + ".coefficients");
    } else {
        throw ConfigError(path + ".type", "unknown profile '" + s.type + "' (zero, constant, sine, poly)");
    }
    return s;
}

inline PotentialSpec parse_potential(const json& v, const std::string& path) {
    PotentialSpec s;
    if (v.is_string()) {
        s.name = text(v, path);
    } else if (v.is_object() && v.contains("name")) {
        s.name = text(v.at("name"), path + ".name");
    } else if (v.is_object()) {
        if (v.contains("breakpoints")) s.breakpoints = numbers(v.at("breakpoints"), path + ".breakpoints");
        const auto& pieces = require(v, "pieces", path);
        if (!pieces.is_array()) throw ConfigError(path + ".pieces", "expected an array of coefficient arrays");
        for (std::size_t i = 0; i < pieces.size(); ++i)
            s.pieces.push_back(numbers(pieces[i], path + ".pieces[" + std::to_string(i) + "]"));
        s.p = number_or(v, "p", path, 2.0);
        return s;
    } else {
        throw ConfigError(path, "expected a potential name or object");
    }
    static const char* known[] = {"zero", "abs", "quadratic", "pot_a", "pot_b"};
    if (std::find(std::begin(known), std::end(known), s.name) == std::end(known))
        throw ConfigError(path, "unknown potential '" + s.name + "' (zero, abs, quadratic, pot_a, pot_b)");
    return s;
}

inline SelectionPolicy parse_policy(const std::string& s, const std::string& path) {
    if (s == "MIN") return SelectionPolicy::Min;
    if (s == "MAX") return SelectionPolicy::Max;
    if (s == "MID") return SelectionPolicy::Mid;
    if (s == "UNIFORM") return SelectionPolicy::Uniform;
    throw ConfigError(path, "unknown policy '" + s + "' (MIN, MAX, MID, UNIFORM)");
}

}  // namespace detail

inline PiecewisePotential make_potential(const PotentialSpec& s) {
    if (s.name == "zero") return PiecewisePotential::zero();
    if (s.name == "abs") return PiecewisePotential::absolute();
    if (s.name == "quadratic") return PiecewisePotential::quadratic();
    if (s.name == "pot_a") return PiecewisePotential::pot_a();
    if (s.name == "pot_b") return PiecewisePotential::pot_b();
    return PiecewisePotential(s.breakpoints, s.pieces, s.p);
}

/// Parse and validate; every error names the offending field.
inline RunConfig parse_config(const json& doc) {
    using namespace detail;
    if (!doc.is_object()) throw ConfigError("$", "configuration must be a JSON object");
    RunConfig cfg;
    cfg.raw = doc;

    const auto& pb = require(doc, "problem", "$");
    const std::string kind = text(require(pb, "kind", "problem"), "problem.kind");
    if (kind == "SOURCE") cfg.kind = ProblemKind::Source;
    else if (kind == "BOUNDARY") cfg.kind = ProblemKind::Boundary;
    else throw ConfigError("problem.kind", "must be SOURCE or BOUNDARY");
    cfg.potential = parse_potential(require(pb, "potential", "problem"), "problem.potential");
    try {
        (void)make_potential(cfg.potential);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("problem.potential", e.what());
    }
    if (pb.contains("forcing")) cfg.forcing = parse_profile(pb.at("forcing"), "problem.forcing");
    if (pb.contains("initial")) cfg.initial = parse_profile(pb.at("initial"), "problem.initial");
    if (pb.contains("cells")) {
        const auto cells = integer(pb.at("cells"), "problem.cells");
        if (cells < 2) throw ConfigError("problem.cells", "must be >= 2");
        cfg.cells = static_cast<std::size_t>(cells);
    } else if (pb.contains("h")) {
        const double h = number(pb.at("h"), "problem.h");
        if (!(h > 0.0) || std::abs(std::round(1.0 / h) * h - 1.0) > 1e-9 || std::round(1.0 / h) < 2)
            throw ConfigError("problem.h", "must be 1/N with integer N >= 2");
        cfg.cells = static_cast<std::size_t>(std::round(1.0 / h));
    }
    cfg.bc = cfg.kind == ProblemKind::Source ? BoundaryCondition::DirichletBoth : BoundaryCondition::DirichletLeft;
    if (pb.contains("bc")) {
        const std::string bc = text(pb.at("bc"), "problem.bc");
        const auto want = cfg.kind == ProblemKind::Source ? "DIRICHLET_BOTH" : "DIRICHLET_LEFT";
        if (bc != want) throw ConfigError("problem.bc", kind + " problems use " + want);
    }
    if (cfg.kind == ProblemKind::Boundary && make_potential(cfg.potential).growth_exponent() != 2.0)
        throw ConfigError("problem.potential.p", "BOUNDARY problems require p = 2");
    cfg.d_fraction = number_or(pb, "d_fraction", "problem", 0.5);
    if (!(cfg.d_fraction > 0.0 && cfg.d_fraction < 1.0)) throw ConfigError("problem.d_fraction", "must lie in (0, 1)");
    cfg.scan_radius = number_or(pb, "scan_radius", "problem", 4.0);
    if (!(cfg.scan_radius > 0.0)) throw ConfigError("problem.scan_radius", "must be > 0");

    const auto& ib = require(doc, "integrator", "$");
    auto& ic = cfg.integrator;
    ic.dt = number(require(ib, "dt", "integrator"), "integrator.dt");
    ic.horizon = number(require(ib, "T", "integrator"), "integrator.T");
    if (!(ic.dt > 0.0)) throw ConfigError("integrator.dt", "must be > 0");
    if (!(ic.horizon > 0.0)) throw ConfigError("integrator.T", "must be > 0");
    if (ic.dt > ic.horizon) throw ConfigError("integrator.dt", "must not exceed integrator.T");
    if (ib.contains("n")) {
        const auto n = integer(ib.at("n"), "integrator.n");
        if (n < 1) throw ConfigError("integrator.n", "must be >= 1");
        ic.level = static_cast<unsigned>(n);
    }
    if (ib.contains("policy")) ic.policy = parse_policy(text(ib.at("policy"), "integrator.policy"), "integrator.policy");
    if (ib.contains("seed")) ic.seed = static_cast<std::uint64_t>(integer(ib.at("seed"), "integrator.seed"));
    if (ib.contains("stride")) {
        const auto s = integer(ib.at("stride"), "integrator.stride");
        if (s < 1) throw ConfigError("integrator.stride", "must be >= 1");
        ic.stride = static_cast<int>(s);
    }
    ic.tolerance = number_or(ib, "tolerance", "integrator", 1e-10);
    if (!(ic.tolerance > 0.0)) throw ConfigError("integrator.tolerance", "must be > 0");
    if (ib.contains("max_iterations")) {
        ic.max_iterations = static_cast<int>(integer(ib.at("max_iterations"), "integrator.max_iterations"));
        if (ic.max_iterations < 1) throw ConfigError("integrator.max_iterations", "must be >= 1");
    }
    if (ib.contains("quad_points")) {
        const auto q = integer(ib.at("quad_points"), "integrator.quad_points");
        if (q < 16) throw ConfigError("integrator.quad_points", "must be >= 16");
        ic.quad_points = static_cast<unsigned>(q);
    }

    if (doc.contains("ensemble")) {
        const auto& eb = doc.at("ensemble");
        cfg.R = number_or(eb, "R", "ensemble", 1.0);
        if (!(cfg.R >= 0.0)) throw ConfigError("ensemble.R", "must be >= 0");
        if (eb.contains("N")) {
            const auto N = integer(eb.at("N"), "ensemble.N");
            if (N < 1) throw ConfigError("ensemble.N", "must be >= 1");
            cfg.N = static_cast<std::size_t>(N);
        }
        if (eb.contains("seed")) cfg.ensemble_seed = static_cast<std::uint64_t>(integer(eb.at("seed"), "ensemble.seed"));
        if (eb.contains("selection_seeds")) {
            const auto& s = eb.at("selection_seeds");
            if (!s.is_array()) throw ConfigError("ensemble.selection_seeds", "expected an array of integers");
            for (std::size_t i = 0; i < s.size(); ++i)
                cfg.selection_seeds.push_back(static_cast<std::uint64_t>(
                    integer(s[i], "ensemble.selection_seeds[" + std::to_string(i) + "]")));
            if (cfg.selection_seeds.size() != cfg.N && cfg.selection_seeds.size() != 1)
                throw ConfigError("ensemble.selection_seeds", "needs 1 or ensemble.N entries");
        }
    }

    if (doc.contains("diagnostics")) {
        const auto& db = doc.at("diagnostics");
        const std::size_t dofs = cfg.bc == BoundaryCondition::DirichletBoth ? cfg.cells - 1 : cfg.cells;
        if (db.contains("m_list")) {
            for (double m : numbers(db.at("m_list"), "diagnostics.m_list")) {
                if (m < 1 || m > static_cast<double>(dofs) || m != std::floor(m))
                    throw ConfigError("diagnostics.m_list", "entries must be integers in [1, " + std::to_string(dofs) + "]");
                cfg.m_list.push_back(static_cast<Eigen::Index>(m));
            }
        }
        if (db.contains("k_list")) {
            cfg.k_list.clear();
            for (double k : numbers(db.at("k_list"), "diagnostics.k_list")) {
                if (k < 1 || k != std::floor(k)) throw ConfigError("diagnostics.k_list", "entries must be integers >= 1");
                cfg.k_list.push_back(static_cast<std::size_t>(k));
            }
        }
        if (db.contains("M") && !db.at("M").is_null()) {
            cfg.M = number(db.at("M"), "diagnostics.M");
            if (!(*cfg.M > 0.0)) throw ConfigError("diagnostics.M", "must be > 0");
        }
        cfg.delta = number_or(db, "delta", "diagnostics", cfg.kind == ProblemKind::Source ? 1e-6 : 0.5);
        if (!(cfg.delta > 0.0)) throw ConfigError("diagnostics.delta", "must be > 0");
        if (cfg.kind == ProblemKind::Boundary && !(cfg.delta < 2.0))
            throw ConfigError("diagnostics.delta", "BOUNDARY window length must lie in (0, 2)");
        cfg.epsilon = number_or(db, "epsilon", "diagnostics", 1e-2);
        if (!(cfg.epsilon > 0.0)) throw ConfigError("diagnostics.epsilon", "must be > 0");
        cfg.flattening_target = number_or(db, "flattening_target", "diagnostics", 1e-2);
        if (db.contains("t_min")) cfg.t_min = number(db.at("t_min"), "diagnostics.t_min");
        if (db.contains("merge_tol")) cfg.merge_tol = number(db.at("merge_tol"), "diagnostics.merge_tol");
        if (db.contains("c_slack")) cfg.c_slack = number(db.at("c_slack"), "diagnostics.c_slack");
        cfg.forcing_factor = number_or(db, "forcing_factor", "diagnostics", 4.0);
        if (!(cfg.forcing_factor >= 1.0)) throw ConfigError("diagnostics.forcing_factor", "must be >= 1");
        if (cfg.t_min && !(*cfg.t_min < ic.horizon)) throw ConfigError("diagnostics.t_min", "must be < integrator.T");
    }

    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("$", "cannot open config file " + path);
    json doc;
    try {
        doc = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError("$", std::string("malformed JSON: ") + e.what());
    }
    return parse_config(doc);
}

/// Everything needed to run: spec with certified constants, initial field, integrator.
struct Problem {
    ProblemSpec spec;
    Field v0;
    IntegratorConfig integrator;
    HypothesisConstants base_constants;  ///< constants of j itself
};

/// Builds the space, certifies constants valid for both j and j_n (same d),
/// and interpolates F and v0.
inline Problem build_problem(const RunConfig& cfg) {
    Problem pr;
    pr.integrator = cfg.integrator;
    auto& spec = pr.spec;
    spec.kind = cfg.kind;
    spec.potential = make_potential(cfg.potential);
    spec.space = build_space(Mesh1D::uniform(cfg.cells), cfg.bc);
    spec.F = spec.space->interpolate(cfg.forcing);
    pr.v0 = spec.space->interpolate(cfg.initial);
    const double trace_sq = cfg.kind == ProblemKind::Boundary ? spec.space->trace_norm_sq() : 1.0;
    const bool linear = std::all_of(spec.potential.slope_pieces().begin(), spec.potential.slope_pieces().end(),
                                    [](const poly::Coeffs& c) {
                                        return std::all_of(c.begin(), c.end(), [](double x) { return x == 0.0; });
                                    });
    if (linear) {
        // j' = 0: growth and dissipativity hold with a = b = c = d = 0 (no L^p gain).
        pr.base_constants.kind = cfg.kind;
        pr.base_constants.p = spec.potential.growth_exponent();
        spec.constants = pr.base_constants;
        return pr;
    }
    try {
        pr.base_constants = verify_hypotheses(spec.potential, cfg.kind, trace_sq, cfg.scan_radius, cfg.d_fraction);
        const auto mp = mollify(spec.potential, cfg.integrator.level, cfg.integrator.quad_points,
                                selection_offset(cfg.integrator.policy, cfg.integrator.seed));
        spec.constants = certify_mollified(pr.base_constants, mp, trace_sq, cfg.scan_radius);
        // Offsets of other seeds (UNIFORM) stay inside [-1, 1]: widen over both extremes.
        for (double theta : {-1.0, 1.0}) {
            const auto edge = mollify(spec.potential, cfg.integrator.level, cfg.integrator.quad_points, theta);
            const auto h = certify_mollified(pr.base_constants, edge, trace_sq, cfg.scan_radius);
            spec.constants.a = std::max(spec.constants.a, h.a);
            spec.constants.b = std::max(spec.constants.b, h.b);
            spec.constants.c = std::min(spec.constants.c, h.c);
        }
    } catch (const HypothesisViolation& e) {
        throw ConfigError("problem.potential", e.what());
    }
    return pr;
}

}  // namespace hemiflow::harness
