#pragma once

#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "zlab/errors.hpp"
#include "zlab/expmap.hpp"
#include "zlab/family.hpp"
#include "zlab/group.hpp"
#include "zlab/version.hpp"
#include "zlab/zalcman.hpp"

namespace zlab {

using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Configuration: flat key-value text with dotted section keys.

struct ScenarioConfig {
    std::map<std::string, std::string> entries; // canonical, sorted by key

    bool has(const std::string& key) const { return entries.count(key) != 0; }

    const std::string& raw(const std::string& key) const {
        auto it = entries.find(key);
        if (it == entries.end()) throw config_error("missing config key '" + key + "'");
        return it->second;
    }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        auto it = entries.find(key);
        return it == entries.end() ? fallback : it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        auto it = entries.find(key);
        if (it == entries.end()) return fallback;
        return parse_double(key, it->second);
    }

    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
        auto it = entries.find(key);
        if (it == entries.end()) return fallback;
        try {
            return std::stoull(it->second);
        } catch (const std::exception&) {
            throw config_error("config key '" + key + "' is not an unsigned integer: " + it->second);
        }
    }

    bool get_bool(const std::string& key, bool fallback) const {
        auto it = entries.find(key);
        if (it == entries.end()) return fallback;
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        throw config_error("config key '" + key + "' is not a boolean: " + it->second);
    }

    static double parse_double(const std::string& key, const std::string& text) {
        std::size_t pos = 0;
        double v = 0.0;
        try {
            v = std::stod(text, &pos);
        } catch (const std::exception&) {
            throw config_error("config key '" + key + "' is not a number: " + text);
        }
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
        if (pos != text.size())
            throw config_error("config key '" + key + "' has trailing junk: " + text);
        return v;
    }

    std::vector<double> get_double_list(const std::string& key) const {
        std::istringstream is(raw(key));
        std::vector<double> out;
        std::string tok;
        while (is >> tok) out.push_back(parse_double(key, tok));
        if (out.empty()) throw config_error("config key '" + key + "' is empty");
        return out;
    }

    /// Index lists: whitespace/comma separated tokens, each "a", "a..b" or
    /// "a..b:step"; the combined list must be strictly increasing.
    std::vector<int> get_indices(const std::string& key = "indices") const {
        std::string text = raw(key);
        for (char& c : text)
            if (c == ',') c = ' ';
        std::istringstream is(text);
        std::vector<int> out;
        std::string tok;
        while (is >> tok) {
            const std::size_t dots = tok.find("..");
            if (dots == std::string::npos) {
                out.push_back(parse_int(key, tok));
                continue;
            }
            const std::size_t colon = tok.find(':', dots + 2);
            const int a = parse_int(key, tok.substr(0, dots));
            const int b = parse_int(key, colon == std::string::npos
                                              ? tok.substr(dots + 2)
                                              : tok.substr(dots + 2, colon - dots - 2));
            const int s = colon == std::string::npos ? 1 : parse_int(key, tok.substr(colon + 1));
            if (s <= 0 || b < a) throw config_error("bad index range '" + tok + "'");
            for (int v = a; v <= b; v += s) out.push_back(v);
        }
        if (out.empty()) throw config_error("config key '" + key + "' lists no indices");
        for (std::size_t k = 0; k + 1 < out.size(); ++k)
            if (out[k + 1] <= out[k])
                throw config_error("indices must be strictly increasing");
        return out;
    }

private:
    static int parse_int(const std::string& key, const std::string& text) {
        try {
            std::size_t pos = 0;
            const int v = std::stoi(text, &pos);
            if (pos != text.size()) throw std::invalid_argument(text);
            return v;
        } catch (const std::exception&) {
            throw config_error("config key '" + key + "' has a bad integer token: " + text);
        }
    }
};

namespace detail {

inline bool known_config_key(const std::string& key) {
    static const char* exact[] = {
        "task",          "group.name",           "group.dim",
        "family.name",   "region.center",        "region.radius",
        "region.grid",   "indices",              "seed",
        "output.dir",    "marty.cap",            "zalcman.grid",
        "zalcman.snap_unit_roots",               "zalcman.converge_radius",
        "zalcman.converge_grid",                 "zalcman.cauchy_tol",
        "verify.samples",                        "verify.structure_samples",
    };
    for (const char* k : exact)
        if (key == k) return true;
    return key.rfind("family.param.", 0) == 0;
}

} // namespace detail

inline ScenarioConfig parse_config_text(const std::string& text) {
    ScenarioConfig cfg;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    auto trim = [](std::string s) {
        const char* ws = " \t\r\n";
        const std::size_t b = s.find_first_not_of(ws);
        if (b == std::string::npos) return std::string();
        const std::size_t e = s.find_last_not_of(ws);
        return s.substr(b, e - b + 1);
    };
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw config_error("config line " + std::to_string(lineno) + " has no '='");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty()) throw config_error("config line " + std::to_string(lineno) + ": empty key");
        if (!detail::known_config_key(key))
            throw config_error("unknown config key '" + key + "'");
        cfg.entries[key] = value; // duplicates: last one wins
    }
    return cfg;
}

inline ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path);
    std::ostringstream body;
    body << in.rdbuf();
    return parse_config_text(body.str());
}

/// Canonical text form of a config; reparsing it yields an equal config.
inline std::string canonical_config_text(const ScenarioConfig& cfg) {
    std::ostringstream os;
    for (const auto& [k, v] : cfg.entries) os << k << " = " << v << "\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// Built-in registries.

namespace detail {

inline cdouble cpow_int(cdouble z, int n) {
    if (n < 0) throw invalid_input("cpow_int: negative exponent");
    cdouble r = 1.0;
    cdouble base = z;
    unsigned e = static_cast<unsigned>(n);
    while (e) {
        if (e & 1u) r *= base;
        base *= base;
        e >>= 1u;
    }
    return r;
}

} // namespace detail

struct FamilySpec {
    std::string name;
    std::string group;   // expected instance name
    std::string summary;
    std::function<HoloFamily(const GroupInstance&, const ScenarioConfig&)> make;
};

inline const std::vector<FamilySpec>& family_registry() {
    static const std::vector<FamilySpec> specs = [] {
        std::vector<FamilySpec> v;

        v.push_back({"linear-family", "additive", "f_j(z) = j*scale*z into P^1 on C",
                     [](const GroupInstance& g, const ScenarioConfig& cfg) {
                         if (g.dim() != 1) throw config_error("linear-family needs additive dim 1");
                         const double scale = cfg.get_double("family.param.scale", 1.0);
                         HoloFamily fam;
                         fam.source = &g;
                         fam.target_dim = 1;
                         fam.description = "linear-family";
                         fam.eval = [scale](int j, const GroupElement& p) {
                             const cdouble z = p.value()(0, 0);
                             return ProjectivePoint({1.0, scale * double(j) * z});
                         };
                         fam.frame_differential = [scale](int j, const GroupElement& p) {
                             const cdouble z = p.value()(0, 0);
                             return p1_frame_row(1.0, scale * double(j) * z, {0.0},
                                                 {scale * double(j)});
                         };
                         fam.in_domain = [](const GroupElement&) { return true; };
                         return fam;
                     }});

        v.push_back({"power-family", "additive", "f_j(z) = z^j into P^1 on a disk",
                     [](const GroupInstance& g, const ScenarioConfig& cfg) {
                         if (g.dim() != 1) throw config_error("power-family needs additive dim 1");
                         const double R = cfg.get_double("family.param.domain_radius", 1.0);
                         if (!(R > 0.0)) throw config_error("power-family: domain_radius must be > 0");
                         HoloFamily fam;
                         fam.source = &g;
                         fam.target_dim = 1;
                         fam.description = "power-family";
                         fam.eval = [](int j, const GroupElement& p) {
                             const cdouble z = p.value()(0, 0);
                             return ProjectivePoint({1.0, detail::cpow_int(z, j)});
                         };
                         fam.frame_differential = [](int j, const GroupElement& p) {
                             const cdouble z = p.value()(0, 0);
                             const cdouble d = double(j) * detail::cpow_int(z, j - 1);
                             return p1_frame_row(1.0, detail::cpow_int(z, j), {0.0}, {d});
                         };
                         fam.in_domain = [R](const GroupElement& p) {
                             return std::abs(p.value()(0, 0)) < R;
                         };
                         return fam;
                     }});

        v.push_back({"exp-family", "additive", "f_j(z) = e^{jz} into P^1 on C",
                     [](const GroupInstance& g, const ScenarioConfig&) {
                         if (g.dim() != 1) throw config_error("exp-family needs additive dim 1");
                         HoloFamily fam;
                         fam.source = &g;
                         fam.target_dim = 1;
                         fam.description = "exp-family";
                         // [1 : e^{jz}] = [e^{-jz} : 1]; pick the branch whose
                         // exponent has nonpositive real part to stay finite
                         fam.eval = [](int j, const GroupElement& p) {
                             const cdouble w = double(j) * p.value()(0, 0);
                             if (w.real() > 0.0)
                                 return ProjectivePoint({std::exp(-w), 1.0});
                             return ProjectivePoint({1.0, std::exp(w)});
                         };
                         fam.frame_differential = [](int j, const GroupElement& p) {
                             const cdouble w = double(j) * p.value()(0, 0);
                             if (w.real() > 0.0) {
                                 const cdouble e = std::exp(-w);
                                 return p1_frame_row(e, 1.0, {-double(j) * e}, {0.0});
                             }
                             const cdouble e = std::exp(w);
                             return p1_frame_row(1.0, e, {0.0}, {double(j) * e});
                         };
                         fam.in_domain = [](const GroupElement&) { return true; };
                         return fam;
                     }});

        v.push_back({"torus-power-family", "torus", "f_j(w) = w^j into P^1 on an annulus",
                     [](const GroupInstance& g, const ScenarioConfig& cfg) {
                         if (g.dim() != 1) throw config_error("torus-power-family needs torus dim 1");
                         const double lo = cfg.get_double("family.param.annulus_lo", 0.9);
                         const double hi = cfg.get_double("family.param.annulus_hi", 1.1);
                         if (!(0.0 < lo && lo < hi))
                             throw config_error("torus-power-family: need 0 < annulus_lo < annulus_hi");
                         HoloFamily fam;
                         fam.source = &g;
                         fam.target_dim = 1;
                         fam.description = "torus-power-family";
                         fam.eval = [](int j, const GroupElement& p) {
                             const cdouble w = p.value()(0, 0);
                             return ProjectivePoint({1.0, detail::cpow_int(w, j)});
                         };
                         // left-trivialized coordinate: dw/dzeta = w, so
                         // d(w^j)/dzeta = j w^j
                         fam.frame_differential = [](int j, const GroupElement& p) {
                             const cdouble w = p.value()(0, 0);
                             const cdouble wj = detail::cpow_int(w, j);
                             return p1_frame_row(1.0, wj, {0.0}, {double(j) * wj});
                         };
                         fam.in_domain = [lo, hi](const GroupElement& p) {
                             const double a = std::abs(p.value()(0, 0));
                             return lo < a && a < hi;
                         };
                         return fam;
                     }});

        v.push_back({"sl2-entry-family", "sl2", "f_j(g) = (g_11)^j into P^1 on SL(2,C)",
                     [](const GroupInstance& g, const ScenarioConfig&) {
                         const auto* sl2 = dynamic_cast<const SpecialLinearGroup2*>(&g);
                         if (sl2 == nullptr) throw config_error("sl2-entry-family needs the sl2 group");
                         HoloFamily fam;
                         fam.source = &g;
                         fam.target_dim = 1;
                         fam.description = "sl2-entry-family";
                         fam.eval = [](int j, const GroupElement& p) {
                             return ProjectivePoint({1.0, detail::cpow_int(p.value()(0, 0), j)});
                         };
                         fam.frame_differential = [sl2](int j, const GroupElement& p) {
                             const cdouble a = p.value()(0, 0);
                             const cdouble aj = detail::cpow_int(a, j);
                             const cdouble ajm1 = detail::cpow_int(a, j - 1);
                             std::vector<cdouble> zero(sl2->dim(), cdouble(0.0, 0.0));
                             std::vector<cdouble> row(sl2->dim());
                             for (std::size_t b = 0; b < sl2->dim(); ++b) {
                                 const ComplexMatrix v = p.value() * sl2->basis_matrix(b);
                                 row[b] = double(j) * ajm1 * v(0, 0);
                             }
                             return p1_frame_row(1.0, aj, zero, row);
                         };
                         fam.in_domain = [](const GroupElement&) { return true; };
                         return fam;
                     }});

        return v;
    }();
    return specs;
}

struct GroupSpec {
    std::string name;
    std::string summary;
    std::function<const GroupInstance&(std::size_t dim)> get;
    std::size_t default_dim;
};

inline const std::vector<GroupSpec>& group_registry() {
    static const std::vector<GroupSpec> specs = {
        {"additive", "additive group C^m (group.dim = m)",
         [](std::size_t m) -> const GroupInstance& { return additive_group(m); }, 1},
        {"torus", "torus (C*)^m, componentwise products (group.dim = m)",
         [](std::size_t m) -> const GroupInstance& { return torus_group(m); }, 1},
        {"gl", "general linear group GL(n,C) (group.dim = matrix size n)",
         [](std::size_t n) -> const GroupInstance& { return gl_group(n); }, 2},
        {"sl2", "special linear group SL(2,C) (group.dim ignored)",
         [](std::size_t) -> const GroupInstance& { return sl2_group(); }, 2},
    };
    return specs;
}

namespace detail {

inline std::string registry_names(const std::vector<FamilySpec>& fams) {
    std::string s;
    for (const auto& f : fams) s += (s.empty() ? "" : ", ") + f.name;
    return s;
}

inline std::string registry_names(const std::vector<GroupSpec>& groups) {
    std::string s;
    for (const auto& g : groups) s += (s.empty() ? "" : ", ") + g.name;
    return s;
}

} // namespace detail

inline const GroupInstance& resolve_group(const ScenarioConfig& cfg) {
    const std::string name = cfg.get_string("group.name", "");
    if (name.empty()) throw config_error("config needs group.name");
    for (const GroupSpec& spec : group_registry()) {
        if (spec.name == name) {
            const std::uint64_t dim = cfg.get_u64("group.dim", spec.default_dim);
            if (dim == 0) throw config_error("group.dim must be >= 1");
            return spec.get(static_cast<std::size_t>(dim));
        }
    }
    throw config_error("unknown group '" + name + "'; known groups: " +
                       detail::registry_names(group_registry()));
}

inline HoloFamily resolve_family(const ScenarioConfig& cfg, const GroupInstance& group) {
    const std::string name = cfg.get_string("family.name", "");
    if (name.empty()) throw config_error("config needs family.name");
    for (const FamilySpec& spec : family_registry()) {
        if (spec.name == name) {
            if (spec.group != group.name())
                throw config_error("family '" + name + "' expects group '" + spec.group +
                                   "', got '" + group.name() + "'");
            return spec.make(group, cfg);
        }
    }
    throw config_error("unknown family '" + name + "'; known families: " +
                       detail::registry_names(family_registry()));
}

inline GroupElement resolve_center(const ScenarioConfig& cfg, const GroupInstance& group) {
    const std::vector<double> raw = cfg.get_double_list("region.center");
    std::size_t rows = 1, cols = group.dim();
    if (const auto* mg = dynamic_cast<const MatrixGroupBase*>(&group)) {
        rows = mg->matrix_size();
        cols = mg->matrix_size();
    }
    if (raw.size() != 2 * rows * cols)
        throw config_error("region.center needs " + std::to_string(2 * rows * cols) +
                           " numbers (re im per coordinate)");
    ComplexMatrix value(rows, cols);
    for (std::size_t k = 0; k < rows * cols; ++k)
        value(k / cols, k % cols) = cdouble(raw[2 * k], raw[2 * k + 1]);
    return group.make_element(std::move(value));
}

// ---------------------------------------------------------------------------
// Report serialization.

namespace detail {

inline ordered_json json_complex(cdouble z) { return ordered_json::array({z.real(), z.imag()}); }

inline ordered_json json_complex_list(const std::vector<cdouble>& v) {
    ordered_json a = ordered_json::array();
    for (cdouble z : v) a.push_back(json_complex(z));
    return a;
}

inline ordered_json json_finite(double v) {
    if (std::isfinite(v)) return ordered_json(v);
    return ordered_json(); // null for NaN/inf (failed diagnostics)
}

inline std::string csv_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

class CsvWriter {
public:
    explicit CsvWriter(const std::filesystem::path& path) : out_(path, std::ios::binary) {
        if (!out_) throw error("cannot open csv file for writing: " + path.string());
    }

    void row(const std::vector<std::string>& fields) {
        for (std::size_t k = 0; k < fields.size(); ++k) {
            if (k) out_ << ',';
            out_ << csv_field(fields[k]);
        }
        out_ << "\r\n";
    }

private:
    std::ofstream out_;
};

inline ordered_json marty_payload(const NormalityReport& rep) {
    ordered_json maxima = ordered_json::array();
    for (const IndexMax& im : rep.maxima) {
        ordered_json row;
        row["index"] = im.index;
        row["max_norm"] = im.max_norm;
        row["argmax_offset"] = json_complex_list(im.argmax_offset);
        row["failed_nodes"] = im.failed_nodes;
        row["nodes"] = im.nodes;
        maxima.push_back(std::move(row));
    }
    ordered_json payload;
    payload["verdict"] = rep.verdict;
    payload["bounded"] = rep.bounded;
    payload["growth_exponent"] = rep.growth_exponent;
    payload["cap"] = rep.cap;
    payload["grid"] = rep.grid;
    payload["maxima"] = std::move(maxima);
    return payload;
}

inline ordered_json zalcman_payload(const ZalcmanRun& run) {
    ordered_json steps = ordered_json::array();
    for (std::size_t k = 0; k < run.steps.size(); ++k) {
        const RescalingStep& s = run.steps[k];
        ordered_json row;
        row["j"] = s.j;
        row["M"] = s.M;
        row["rho"] = s.rho;
        row["dist_p0"] = s.dist_p0;
        row["radius_ball"] = s.radius_ball;
        row["radius_omega"] = s.radius_omega;
        row["radius"] = s.radius;
        row["witness"] = json_finite(run.witnesses[k]);
        row["p"] = json_complex_list(s.p.value().data());
        row["xi"] = json_complex_list(s.xi.coords());
        steps.push_back(std::move(row));
    }
    ordered_json payload;
    payload["steps"] = std::move(steps);
    if (run.convergence) {
        const ConvergenceReport& c = *run.convergence;
        ordered_json conv;
        conv["radius"] = c.radius;
        conv["grid"] = c.grid;
        conv["tolerance"] = c.tolerance;
        conv["cauchy"] = c.cauchy;
        ordered_json dists = ordered_json::array();
        for (const ConvergencePair& d : c.distances) {
            ordered_json row;
            row["j_from"] = d.j_from;
            row["j_to"] = d.j_to;
            row["sup_dist"] = d.sup_dist;
            dists.push_back(std::move(row));
        }
        conv["distances"] = std::move(dists);
        conv["witness_last"] = json_finite(c.witness_last);
        ordered_json samples = ordered_json::array();
        for (const LimitSample& ls : c.limit_samples) {
            ordered_json row;
            row["z"] = json_complex_list(ls.z);
            row["value"] = json_complex_list(ls.value.coords());
            samples.push_back(std::move(row));
        }
        conv["limit_samples"] = std::move(samples);
        payload["convergence"] = std::move(conv);
    } else {
        payload["convergence"] = nullptr;
    }
    return payload;
}

inline ordered_json verify_payload(const ExpVerifyReport& rep) {
    ordered_json props = ordered_json::array();
    for (const PropertyResult& p : rep.properties) {
        ordered_json row;
        row["name"] = p.name;
        row["max_residual"] = p.max_residual;
        row["tolerance"] = p.tolerance;
        row["pass"] = p.pass;
        props.push_back(std::move(row));
    }
    ordered_json payload;
    payload["all_pass"] = rep.all_pass;
    payload["properties"] = std::move(props);
    ordered_json sc;
    sc["sampled_max"] = rep.structure.sampled_max;
    sc["upper_bound"] = rep.structure.upper_bound;
    sc["samples"] = rep.structure.samples;
    sc["seed"] = rep.structure.seed;
    payload["structure_constant"] = std::move(sc);
    return payload;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Scenario runner.

struct ReportBundle {
    ordered_json report;      // what report.json holds (no timing, for byte-stable reruns)
    double elapsed_seconds = 0.0;
    std::string output_dir;
    std::string verdict_note; // one-line human summary
};

/// Executes the configured task deterministically and writes report.json
/// plus plot-ready CSV tables under the output directory. Timing stays out
/// of report.json so reruns with the same config are byte-identical.
inline ReportBundle run_scenario(const ScenarioConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::string task = cfg.get_string("task", "");
    if (task.empty()) throw config_error("config needs a task (marty-scan | zalcman | exp-verify)");

    const std::uint64_t seed = cfg.get_u64("seed", 20240809);
    const GroupInstance& group = resolve_group(cfg);

    ReportBundle bundle;
    bundle.output_dir = cfg.get_string("output.dir", "out");
    const std::filesystem::path outdir(bundle.output_dir);
    std::filesystem::create_directories(outdir / "grids");

    ordered_json payload;

    bool verify_failed = false;

    if (task == "marty-scan") {
        const HoloFamily fam = resolve_family(cfg, group);
        const GroupElement center = resolve_center(cfg, group);
        if (!cfg.has("region.radius")) throw config_error("marty-scan needs region.radius");
        Region region{center, cfg.get_double("region.radius", 0.0),
                      static_cast<std::size_t>(cfg.get_u64("region.grid", 41))};
        spot_check_differential(fam, region, 20, 1e-6, seed);
        MartyOptions opts;
        opts.cap = cfg.get_double("marty.cap", 1e6);
        opts.seed = seed;
        const NormalityReport rep = marty_scan(fam, region, cfg.get_indices(), opts);
        payload = detail::marty_payload(rep);
        bundle.verdict_note = "marty-scan verdict: " + rep.verdict;

        detail::CsvWriter csv(outdir / "grids" / "marty_maxima.csv");
        std::vector<std::string> head = {"index", "max_norm"};
        for (std::size_t d = 0; d < group.dim(); ++d) {
            head.push_back("argmax_re" + std::to_string(d));
            head.push_back("argmax_im" + std::to_string(d));
        }
        head.push_back("failed_nodes");
        head.push_back("nodes");
        csv.row(head);
        for (const IndexMax& im : rep.maxima) {
            std::vector<std::string> row = {std::to_string(im.index),
                                            detail::csv_number(im.max_norm)};
            for (cdouble z : im.argmax_offset) {
                row.push_back(detail::csv_number(z.real()));
                row.push_back(detail::csv_number(z.imag()));
            }
            row.push_back(std::to_string(im.failed_nodes));
            row.push_back(std::to_string(im.nodes));
            csv.row(row);
        }
    } else if (task == "zalcman") {
        const HoloFamily fam = resolve_family(cfg, group);
        const GroupElement p0 = resolve_center(cfg, group);
        const std::vector<int> indices = cfg.get_indices();

        Region spot{p0, 1.0 / double(indices.front()),
                    static_cast<std::size_t>(cfg.get_u64("zalcman.grid", 41))};
        spot_check_differential(fam, spot, 20, 1e-6, seed, indices.front());

        ZalcmanOptions opts;
        opts.argmax.grid_per_axis = static_cast<std::size_t>(cfg.get_u64("zalcman.grid", 41));
        opts.argmax.seed = seed;
        opts.snap_unit_roots = cfg.get_bool("zalcman.snap_unit_roots", false);
        opts.converge_radius = cfg.get_double("zalcman.converge_radius", -1.0);
        opts.converge_grid = static_cast<std::size_t>(cfg.get_u64("zalcman.converge_grid", 21));
        opts.cauchy_tolerance = cfg.get_double("zalcman.cauchy_tol", 1e-6);
        const ZalcmanRun run = run_zalcman(fam, p0, indices, opts);
        payload = detail::zalcman_payload(run);
        bundle.verdict_note = run.convergence
                                  ? std::string("zalcman cauchy verdict: ") +
                                        (run.convergence->cauchy ? "true" : "false")
                                  : std::string("zalcman: convergence check skipped");

        {
            detail::CsvWriter csv(outdir / "grids" / "zalcman_steps.csv");
            csv.row({"j", "M", "rho", "dist_p0", "radius_ball", "radius_omega", "radius",
                     "witness"});
            for (std::size_t k = 0; k < run.steps.size(); ++k) {
                const RescalingStep& s = run.steps[k];
                csv.row({std::to_string(s.j), detail::csv_number(s.M), detail::csv_number(s.rho),
                         detail::csv_number(s.dist_p0), detail::csv_number(s.radius_ball),
                         detail::csv_number(s.radius_omega), detail::csv_number(s.radius),
                         detail::csv_number(run.witnesses[k])});
            }
        }
        if (run.convergence) {
            detail::CsvWriter csv(outdir / "grids" / "sup_distances.csv");
            csv.row({"j_from", "j_to", "sup_dist"});
            for (const ConvergencePair& d : run.convergence->distances)
                csv.row({std::to_string(d.j_from), std::to_string(d.j_to),
                         detail::csv_number(d.sup_dist)});
        }
    } else if (task == "exp-verify") {
        const std::size_t samples = static_cast<std::size_t>(cfg.get_u64("verify.samples", 1000));
        const std::uint64_t ssamples = cfg.get_u64("verify.structure_samples", 1000000);
        const ExpVerifyReport rep = verify_exp_properties(group, samples, seed, ssamples);
        payload = detail::verify_payload(rep);
        bundle.verdict_note =
            std::string("exp-verify: ") + (rep.all_pass ? "all properties pass" : "FAILURES");
        if (!rep.all_pass)
            bundle.verdict_note += " (see report.json)";

        detail::CsvWriter csv(outdir / "grids" / "residuals.csv");
        csv.row({"property", "max_residual", "tolerance", "pass"});
        for (const PropertyResult& p : rep.properties)
            csv.row({p.name, detail::csv_number(p.max_residual), detail::csv_number(p.tolerance),
                     p.pass ? "true" : "false"});
        verify_failed = !rep.all_pass;
    } else {
        throw config_error("unknown task '" + task + "' (marty-scan | zalcman | exp-verify)");
    }

    ordered_json report;
    report["version"] = kVersionTag;
    report["task"] = task;
    ordered_json echo;
    for (const auto& [k, v] : cfg.entries) echo[k] = v;
    report["config"] = std::move(echo);
    report["payload"] = std::move(payload);

    {
        std::ofstream out(outdir / "report.json", std::ios::binary);
        if (!out) throw error("cannot write report.json under " + bundle.output_dir);
        out << report.dump(2) << "\n";
    }

    if (verify_failed)
        throw scan_failure("exp-verify: at least one property check failed (see report.json)");

    bundle.report = std::move(report);
    bundle.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return bundle;
}

} // namespace zlab
