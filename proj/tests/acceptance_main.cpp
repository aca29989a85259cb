// Acceptance suite: one criterion per line, pass/fail, nonzero exit when
// anything fails. Tolerances are pinned here, not configurable.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "test_families.hpp"
#include "zlab/expmap.hpp"
#include "zlab/family.hpp"
#include "zlab/scenario.hpp"
#include "zlab/zalcman.hpp"

using zlab::AlgebraVector;
using zlab::cdouble;
using zlab::ComplexMatrix;
using zlab::GroupElement;
using zlab::HoloFamily;

namespace {

struct CriterionFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
    if (!ok) throw CriterionFailure(what);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

int failures = 0;

void criterion(int id, const std::string& label, double time_limit_s,
               const std::function<std::string()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = true;
    try {
        detail = body();
    } catch (const std::exception& e) {
        ok = false;
        detail = e.what();
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (ok && time_limit_s > 0.0 && dt > time_limit_s) {
        ok = false;
        detail = "exceeded the runtime limit of " + fmt(time_limit_s) + " s";
    }
    std::printf("criterion %d: %s — %s [%s; %.1f s]\n", id, ok ? "PASS" : "FAIL", label.c_str(),
                detail.c_str(), dt);
    std::fflush(stdout);
    if (!ok) ++failures;
}

AlgebraVector random_vec(zlab::detail::GaussianStream& gs, std::size_t m, double scale) {
    std::vector<cdouble> c(m);
    for (auto& z : c) z = cdouble(gs(), gs()) * scale;
    return AlgebraVector(std::move(c));
}

GroupElement additive_point(cdouble z) {
    return zlab::additive_group(1).make_element(ComplexMatrix(1, 1, {z}));
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw CriterionFailure("missing file " + p.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

const std::vector<const zlab::GroupInstance*>& suite_instances() {
    static const std::vector<const zlab::GroupInstance*> v = {
        &zlab::gl_group(2), &zlab::sl2_group(), &zlab::torus_group(1), &zlab::additive_group(2)};
    return v;
}

// --------------------------------------------------------------------------

std::string run_property_suite() {
    double worst = 0.0;
    for (const zlab::GroupInstance* inst : suite_instances()) {
        const zlab::ExpVerifyReport rep = zlab::verify_exp_properties(*inst, 1000, 20240809, 1000);
        for (const zlab::PropertyResult& p : rep.properties) {
            const bool gate = p.name == "one_param_law" || p.name == "exp_base_scaling" ||
                              p.name == "exp_base_decomposition" ||
                              p.name == "one_param_derivative_fd" ||
                              p.name == "dexp_at_zero_isometry";
            if (!gate) continue;
            require(p.pass, inst->name() + "/" + p.name + " residual " + fmt(p.max_residual) +
                                " exceeds " + fmt(p.tolerance));
            worst = std::max(worst, p.max_residual / p.tolerance);
        }
    }
    return "4 instances x 1000 samples, worst residual at " + fmt(worst * 100.0) + "% of tolerance";
}

std::string run_duhamel_oracle() {
    const auto& sl2 = zlab::sl2_group();
    zlab::detail::GaussianStream gs(424242);
    double worst = 0.0;
    for (int s = 0; s < 10000; ++s) {
        const GroupElement g = sl2.one_param(random_vec(gs, 3, 0.5), 1.0);
        AlgebraVector xi = random_vec(gs, 3, 1.0);
        if (xi.norm() > 2.0) xi = xi.normalized().scaled(2.0);
        const double d =
            zlab::spectral_norm(zlab::dexp_at(g, xi).matrix - zlab::dexp_numeric(g, xi)).value;
        worst = std::max(worst, d);
        require(d <= 1e-6, "discrepancy " + fmt(d) + " > 1e-6 at sample " + std::to_string(s));
    }
    return "10^4 samples on sl2, worst discrepancy " + fmt(worst);
}

std::string run_norm_bound() {
    const auto& sl2 = zlab::sl2_group();
    zlab::detail::GaussianStream gs(5150);
    double worst_excess = -1e300;
    for (int s = 0; s < 10000; ++s) {
        const GroupElement g = sl2.one_param(random_vec(gs, 3, 0.5), 1.0);
        AlgebraVector xi = random_vec(gs, 3, 1.2);
        if (xi.norm() > 3.0) xi = xi.normalized().scaled(3.0);
        const double norm = zlab::spectral_norm(zlab::dexp_at(g, xi).matrix).value;
        const double bound = zlab::dexp_norm_bound(sl2, xi);
        worst_excess = std::max(worst_excess, norm - bound);
        require(norm <= bound + 1e-9,
                "bound violated by " + fmt(norm - bound) + " at sample " + std::to_string(s));
    }

    // abelian instances: the operator and its bound are exactly one
    for (const zlab::GroupInstance* inst :
         {static_cast<const zlab::GroupInstance*>(&zlab::additive_group(2)),
          static_cast<const zlab::GroupInstance*>(&zlab::torus_group(1))}) {
        zlab::detail::GaussianStream gg(7);
        for (int s = 0; s < 100; ++s) {
            const AlgebraVector xi = random_vec(gg, inst->dim(), 2.0);
            require(zlab::dexp_norm_bound(*inst, xi) == 1.0, "abelian bound not exactly 1");
            const GroupElement g = inst->one_param(random_vec(gg, inst->dim(), 0.5), 1.0);
            require(zlab::spectral_norm(zlab::dexp_at(g, xi).matrix).value == 1.0,
                    "abelian dexp norm not exactly 1");
        }
    }
    return "10^4 sl2 samples under the certified bound (worst slack " + fmt(-worst_excess) +
           "), abelian equality exact";
}

std::string run_ode_oracle() {
    double worst = 0.0;
    for (const zlab::GroupInstance* inst : suite_instances()) {
        zlab::detail::GaussianStream gs(900 + inst->dim());
        for (int s = 0; s < 200; ++s) {
            AlgebraVector x = random_vec(gs, inst->dim(), 0.5);
            if (x.norm() > 1.0) x = x.normalized();
            const cdouble z = cdouble(gs(), gs());
            const double d = zlab::element_distance(zlab::one_param(*inst, x, z),
                                                    zlab::ode_exp_oracle(*inst, x, z, 1000));
            worst = std::max(worst, d);
            require(d <= 1e-8, inst->name() + ": oracle disagrees by " + fmt(d));
        }
    }

    // additive: no truncation error at all
    {
        zlab::detail::GaussianStream gs(3);
        const auto& a2 = zlab::additive_group(2);
        const AlgebraVector x = random_vec(gs, 2, 0.7);
        const cdouble z(1.2, -0.4);
        require(zlab::element_distance(zlab::one_param(a2, x, z),
                                       zlab::ode_exp_oracle(a2, x, z, 100)) <= 1e-13,
                "additive oracle not exact");
    }

    // fourth order: halving the step shrinks the error 16x (within 25%)
    std::string ratios;
    for (const zlab::GroupInstance* inst :
         {static_cast<const zlab::GroupInstance*>(&zlab::torus_group(1)),
          static_cast<const zlab::GroupInstance*>(&zlab::gl_group(2)),
          static_cast<const zlab::GroupInstance*>(&zlab::sl2_group())}) {
        zlab::detail::GaussianStream gs(77);
        const AlgebraVector x = random_vec(gs, inst->dim(), 1.0).normalized().scaled(2.0);
        const GroupElement exact = zlab::one_param(*inst, x, 1.0);
        const double e1 = zlab::element_distance(exact, zlab::ode_exp_oracle(*inst, x, 1.0, 100));
        const double e2 = zlab::element_distance(exact, zlab::ode_exp_oracle(*inst, x, 1.0, 200));
        require(e1 > 1e-13, inst->name() + ": error too close to roundoff for the ratio test");
        const double ratio = e1 / e2;
        require(ratio >= 12.0 && ratio <= 20.0,
                inst->name() + ": error ratio " + fmt(ratio) + " outside 16 +/- 25%");
        ratios += (ratios.empty() ? "" : ", ") + inst->name() + " " + fmt(ratio);
    }
    return "agreement to 1e-8 at 1000 steps (worst " + fmt(worst) + "); ratios " + ratios;
}

std::string run_classic_zalcman() {
    const HoloFamily fam = make_builtin_family("linear-family", zlab::additive_group(1));
    std::vector<int> indices;
    for (int j = 1; j <= 50; ++j) indices.push_back(j);
    zlab::ZalcmanOptions opts;
    opts.argmax.grid_per_axis = 81;
    opts.converge_radius = 1.0;
    opts.converge_grid = 21;
    const zlab::ZalcmanRun run = zlab::run_zalcman(fam, additive_point(0.0), indices, opts);

    const auto identity_map = [](const std::vector<cdouble>& z) {
        return zlab::ProjectivePoint({cdouble(1.0), z[0]});
    };
    double worst_m = 0.0, worst_w = 0.0, worst_d = 0.0;
    for (std::size_t k = 0; k < run.steps.size(); ++k) {
        const zlab::RescalingStep& s = run.steps[k];
        const double mdev = std::abs(s.M / double(s.j) - 1.0);
        worst_m = std::max(worst_m, mdev);
        require(mdev <= 0.01, "M_" + std::to_string(s.j) + " off by " + fmt(mdev));
        require(s.M == 1.0 / s.rho, "rho_j M_j = 1 construction identity broken");
        const double wdev = std::abs(run.witnesses[k] - 1.0);
        worst_w = std::max(worst_w, wdev);
        require(wdev <= 1e-6, "witness off by " + fmt(wdev) + " at j=" + std::to_string(s.j));
        const double d = zlab::sup_distance([&](const std::vector<cdouble>& z) { return s.phi(z); },
                                            identity_map, 1, 2.0, 21);
        worst_d = std::max(worst_d, d);
        require(d <= 1e-6,
                "sup distance to the identity " + fmt(d) + " at j=" + std::to_string(s.j));
    }
    require(run.convergence.has_value() && run.convergence->cauchy, "cauchy verdict false");
    return "50 steps: max |M_j/j-1| " + fmt(worst_m) + ", max witness dev " + fmt(worst_w) +
           ", max distance to identity " + fmt(worst_d);
}

std::string run_torus_scenario() {
    const HoloFamily fam = make_builtin_family("torus-power-family", zlab::torus_group(1));
    const GroupElement p0 = zlab::torus_group(1).make_element(ComplexMatrix(1, 1, {cdouble(1.0)}));

    // marty scan over the annulus: monotone growth, non-normal verdict
    std::vector<int> scan_indices;
    for (int j = 10; j <= 200; j += 10) scan_indices.push_back(j);
    zlab::MartyOptions mopts;
    mopts.cap = 10.0;
    const zlab::NormalityReport rep =
        zlab::marty_scan(fam, zlab::Region{p0, 0.09, 41}, scan_indices, mopts);
    require(rep.verdict == "non-normal", "marty verdict was " + rep.verdict);
    for (std::size_t k = 0; k + 1 < rep.maxima.size(); ++k)
        require(rep.maxima[k + 1].max_norm > rep.maxima[k].max_norm, "M_j growth not monotone");

    // rescaling with snapped basepoints
    zlab::ZalcmanOptions opts;
    opts.snap_unit_roots = true;
    opts.converge_radius = 0.5;
    opts.converge_grid = 21;
    const std::vector<int> indices = {20, 40, 80, 120, 160, 200};
    const zlab::ZalcmanRun run = zlab::run_zalcman(fam, p0, indices, opts);
    double worst_w = 0.0;
    for (double w : run.witnesses) {
        worst_w = std::max(worst_w, std::abs(w - 1.0));
        require(std::abs(w - 1.0) <= 1e-4, "witness off by " + fmt(std::abs(w - 1.0)));
    }
    require(run.convergence.has_value() && run.convergence->cauchy, "cauchy verdict false");

    // distance to the closed-form limit z -> exp(2z), decreasing tail
    const auto limit_map = [](const std::vector<cdouble>& z) {
        return zlab::ProjectivePoint({cdouble(1.0), std::exp(2.0 * z[0])});
    };
    std::vector<double> dist;
    for (const zlab::RescalingStep& s : run.steps)
        dist.push_back(zlab::sup_distance(
            [&](const std::vector<cdouble>& z) { return s.phi(z); }, limit_map, 1, 0.5, 21));
    for (std::size_t k = dist.size() - 5; k + 1 < dist.size(); ++k)
        require(dist[k + 1] <= dist[k] + 1e-12, "limit distance not decreasing over the last 5");
    require(dist.back() <= 1e-2, "limit distance at j=200 is " + fmt(dist.back()));
    return "non-normal with M growth; witnesses within " + fmt(worst_w) +
           "; distance to exp(2z) at j=200: " + fmt(dist.back());
}

std::string run_negative_control() {
    const HoloFamily fam = make_builtin_family("power-family", zlab::additive_group(1));
    std::vector<int> indices;
    for (int j = 1; j <= 40; ++j) indices.push_back(j);
    zlab::MartyOptions mopts;
    mopts.cap = 10.0;
    const zlab::NormalityReport rep =
        zlab::marty_scan(fam, zlab::Region{additive_point(0.0), 0.9, 41}, indices, mopts);
    require(rep.verdict == "normal", "marty verdict was " + rep.verdict);

    // forcing the rescaling engine: rho_j must not tend to zero
    const zlab::ZalcmanRun run =
        zlab::run_zalcman(fam, additive_point(0.0), {2, 3, 4, 6, 8, 10, 12}, {});
    std::string rhos;
    for (std::size_t k = 0; k < run.steps.size(); ++k) {
        if (k) {
            require(run.steps[k].rho > run.steps[k - 1].rho,
                    "rho did not grow between forced steps");
        }
        rhos += (rhos.empty() ? "" : ", ") + fmt(run.steps[k].rho);
    }
    require(run.steps.back().rho > 1.0, "forced rho stayed below 1");
    return "normal verdict; forced rho_j grow: " + rhos + " (witnesses reported, not asserted)";
}

std::string run_structure_constant() {
    const auto& sl2 = zlab::sl2_group();
    const zlab::StructureConstant a = zlab::structure_constant(sl2, 10000000, 1001);
    const zlab::StructureConstant b = zlab::structure_constant(sl2, 10000000, 2002);
    require(fmt(a.sampled_max) == fmt(b.sampled_max),
            "3-significant-figure mismatch: " + fmt(a.sampled_max) + " vs " + fmt(b.sampled_max));
    const double sqrt2 = std::sqrt(2.0);
    require(a.sampled_max <= sqrt2 + 1e-12 && a.sampled_max >= sqrt2 - 1e-3,
            "sampled value " + fmt(a.sampled_max) + " away from the pinned reference sqrt(2)");

    require(zlab::structure_constant(zlab::additive_group(3), 100).sampled_max == 0.0 &&
                zlab::structure_constant(zlab::torus_group(2), 100).sampled_max == 0.0,
            "abelian structure constant not exactly zero");
    return "two 10^7-sample runs agree at 3 significant figures: " + fmt(a.sampled_max) +
           " (upper bound " + fmt(a.upper_bound) + "); abelian exactly 0";
}

std::string run_determinism() {
    const std::filesystem::path scenarios = std::filesystem::path(ZLAB_SOURCE_DIR) / "scenarios";
    const char* names[] = {"classic_zalcman_linear.cfg", "torus_power_zalcman.cfg",
                           "power_forced_zalcman.cfg", "additive_exp_verify.cfg"};
    for (const char* name : names) {
        zlab::ScenarioConfig cfg = zlab::load_config((scenarios / name).string());
        const std::string outdir = std::string("acceptance_out/") +
                                   std::filesystem::path(name).stem().string();
        cfg.entries["output.dir"] = outdir; // same config for both runs
        zlab::run_scenario(cfg);
        const std::string first = slurp(outdir + "/report.json");
        const std::string first_csv = slurp(outdir + "/grids/" +
                                            (cfg.raw("task") == "zalcman"       ? "zalcman_steps.csv"
                                             : cfg.raw("task") == "marty-scan" ? "marty_maxima.csv"
                                                                               : "residuals.csv"));
        zlab::run_scenario(cfg);
        require(slurp(outdir + "/report.json") == first, std::string(name) + ": reruns differ");
        require(slurp(outdir + "/grids/" + (cfg.raw("task") == "zalcman" ? "zalcman_steps.csv"
                                            : cfg.raw("task") == "marty-scan"
                                                ? "marty_maxima.csv"
                                                : "residuals.csv")) == first_csv,
                std::string(name) + ": csv reruns differ");
    }
    return "4 shipped scenarios rerun byte-identically";
}

} // namespace

int main() {
    std::printf("acceptance suite (%s)\n", zlab::kVersionTag);
    criterion(1, "one-parameter/exponential property suite", 30.0, run_property_suite);
    criterion(2, "Duhamel series vs finite-difference oracle", 60.0, run_duhamel_oracle);
    criterion(3, "d-exp operator norm bound", 60.0, run_norm_bound);
    criterion(4, "ODE oracle agreement and 4th-order convergence", 0.0, run_ode_oracle);
    criterion(5, "classical rescaling recovery on the additive line", 120.0, run_classic_zalcman);
    criterion(6, "torus annulus scenario (scan + snapped rescaling)", 300.0, run_torus_scenario);
    criterion(7, "normal-family negative control", 0.0, run_negative_control);
    criterion(8, "structure constant stability", 0.0, run_structure_constant);
    criterion(9, "byte-identical scenario reruns", 0.0, run_determinism);
    if (failures) {
        std::printf("%d criterion(s) FAILED\n", failures);
        return 1;
    }
    std::printf("all criteria passed\n");
    return 0;
}
