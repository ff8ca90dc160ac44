// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Runs the full pipeline at desk scale with fixed seeds.

#include "varimatch/experiments.hpp"
#include "varimatch/io.hpp"
#include "varimatch/linalg.hpp"
#include "varimatch/parallel.hpp"
#include "varimatch/quantize.hpp"
#include "varimatch/registration.hpp"
#include "varimatch/rng.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

using namespace varimatch;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int index, const char* name, bool pass, const std::string& detail,
            double seconds) {
    std::printf("%s [%d] %-28s %s (%.1fs)\n", pass ? "PASS" : "FAIL", index, name,
                detail.c_str(), seconds);
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

void run_criterion(int index, const char* name,
                   const std::function<bool(std::string&)>& body) {
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    bool pass = false;
    try {
        pass = body(detail);
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report(index, name, pass, detail, seconds);
}

DiscreteVarifold random_varifold(Rng& rng, int n, int d, int atoms, double pos_scale = 1.0,
                                 double frame_scale = 1.0) {
    DiscreteVarifold mu(n, d);
    std::vector<double> x(n), u(static_cast<std::size_t>(n) * d);
    for (int i = 0; i < atoms; ++i) {
        for (auto& v : x) v = pos_scale * rng.normal();
        for (auto& v : u) v = frame_scale * rng.normal();
        mu.add_atom(x, u);
    }
    return mu;
}

ShootingState random_state(Rng& rng, int n, int d, int atoms, double momentum_scale) {
    ShootingState s(n, d, atoms);
    for (auto& v : s.q) v = rng.normal();
    for (auto& v : s.p) v = momentum_scale * rng.normal();
    return s;
}

double gradient_vs_fd(const std::function<double(std::span<const double>)>& value,
                      std::span<const double> x0, std::span<const double> grad, double h) {
    double scale = 1e-8;
    for (double g : grad) scale = std::max(scale, std::abs(g));
    std::vector<double> x(x0.begin(), x0.end());
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double fp = value(x);
        x[i] = keep - h;
        const double fm = value(x);
        x[i] = keep;
        worst = std::max(worst, std::abs((fp - fm) / (2.0 * h) - grad[i]) / scale);
    }
    return worst;
}

// ---------------------------------------------------------------- criterion 1
bool gradient_gates(std::string& detail) {
    Rng rng(1001);
    const SpatialKernel kp{1.0};
    const GrassmannKernel kg{GrassmannKind::oriented_gaussian, 1.0};
    double worst_quant = 0.0, worst_fid = 0.0, worst_energy = 0.0;

    for (int inst = 0; inst < 20; ++inst) {
        const int n = inst % 2 ? 3 : 2;
        const int d = 1 + inst % 2;
        const int atoms = 1 + inst % 4;
        const DiscreteVarifold target = random_varifold(rng, n, d, atoms + 1);
        const DiscreteVarifold start = random_varifold(rng, n, d, atoms);
        const auto q = flat_from_varifold(start);
        std::vector<double> grad(q.size());

        quantize_objective_and_grad(n, d, atoms, q, target, kp, kg, grad);
        worst_quant = std::max(
            worst_quant, gradient_vs_fd(
                             [&](std::span<const double> qq) {
                                 std::vector<double> s(qq.size());
                                 return quantize_objective_and_grad(n, d, atoms, qq, target,
                                                                    kp, kg, s);
                             },
                             q, grad, 1e-6));

        fidelity(n, d, atoms, q, target, kp, kg, 3.0, grad);
        worst_fid = std::max(
            worst_fid, gradient_vs_fd(
                           [&](std::span<const double> qq) {
                               std::vector<double> s(qq.size());
                               return fidelity(n, d, atoms, qq, target, kp, kg, 3.0, s);
                           },
                           q, grad, 1e-6));
    }

    for (int inst = 0; inst < 20; ++inst) {
        const int n = inst % 2 ? 3 : 2;
        const int d = 1 + inst % 2;
        const int atoms = 2 + inst % 3;
        RunConfig cfg;
        cfg.steps = 8;
        cfg.lambda = 2.0;
        cfg.reduce_momentum = inst % 2 == 0;
        const DiscreteVarifold src = random_varifold(rng, n, d, atoms);
        const DiscreteVarifold tar = random_varifold(rng, n, d, atoms);
        const double tn = inner_product(tar, tar, cfg.spatial, cfg.grassmann);
        const MomentumParameterization param(src, cfg.reduce_momentum);

        std::vector<double> params(param.param_count());
        for (auto& v : params) v = 0.2 * rng.normal();
        std::vector<double> p(static_cast<std::size_t>(atoms) * n * (d + 1)), pg(p.size()),
            grad(params.size());
        param.to_state(params, p);
        energy_and_grad(p, src, tar, cfg, pg, tn);
        param.to_params_grad(pg, grad);
        worst_energy = std::max(
            worst_energy, gradient_vs_fd(
                              [&](std::span<const double> prm) {
                                  std::vector<double> pl(p.size()), s(p.size());
                                  param.to_state(prm, pl);
                                  return energy_and_grad(pl, src, tar, cfg, s, tn).energy;
                              },
                              params, grad, 1e-5));
    }

    std::ostringstream os;
    os << "max rel err: quantize " << worst_quant << ", fidelity " << worst_fid
       << ", energy " << worst_energy;
    detail = os.str();
    return worst_quant < 1e-5 && worst_fid < 1e-5 && worst_energy < 1e-5;
}

// ---------------------------------------------------------------- criterion 2
bool conservation(std::string& detail) {
    Rng rng(1002);
    const DeformationKernel kv{1.5};
    double worst_h = 0.0, worst_gram = 0.0;
    std::vector<double> ratios;
    for (int trial = 0; trial < 50; ++trial) {
        const int n = trial % 2 ? 3 : 2;
        const int d = 1 + trial % 2;
        const ShootingState s0 = random_state(rng, n, d, 3, 0.08);
        const Trajectory t32 = rk4_forward(s0, 32, kv);
        worst_h = std::max(worst_h, t32.hamiltonian_drift());
        worst_gram = std::max(worst_gram, t32.gram_drift());
        const Trajectory t16 = rk4_forward(s0, 16, kv);
        // only trajectories whose coarse drift clears the round-off floor
        // carry usable order-of-convergence information
        if (t16.hamiltonian_drift() > 1e-10)
            ratios.push_back(t16.hamiltonian_drift() / t32.hamiltonian_drift());
    }
    std::sort(ratios.begin(), ratios.end());
    const double median = ratios.empty() ? 0.0 : ratios[ratios.size() / 2];
    std::ostringstream os;
    os << "H drift " << worst_h << ", gram drift " << worst_gram << ", median step ratio "
       << median << " over " << ratios.size() << " resolved pairs";
    detail = os.str();
    return worst_h <= 1e-8 && worst_gram <= 1e-7 && ratios.size() >= 10 && median >= 8.0 &&
           median <= 32.0;
}

// ---------------------------------------------------------------- criterion 3
bool metric_properties(std::string& detail) {
    Rng rng(1003);
    const SpatialKernel kp{1.0};
    const GrassmannKernel og{GrassmannKind::oriented_gaussian, 1.0};
    const GrassmannKernel binet{GrassmannKind::binet};
    const GrassmannKernel lin{GrassmannKind::linear};

    double worst_identity = 0.0, worst_symmetry = 0.0, worst_triangle = 0.0,
           worst_cauchy = 0.0, worst_gauge = 0.0, worst_rigid = 0.0;

    for (int trial = 0; trial < 100; ++trial) {
        const int n = trial % 2 ? 3 : 2;
        const int d = (trial % 4 == 0 && n == 3) ? 2 : 1;
        const DiscreteVarifold a = random_varifold(rng, n, d, 4);
        const DiscreteVarifold b = random_varifold(rng, n, d, 3);
        const DiscreteVarifold c = random_varifold(rng, n, d, 3);

        for (const auto* kg : {&og, &binet, &lin}) {
            worst_identity = std::max(worst_identity, distance_sq(a, a, kp, *kg));
            const double ab = inner_product(a, b, kp, *kg);
            worst_symmetry = std::max(
                worst_symmetry, std::abs(ab - inner_product(b, a, kp, *kg)) /
                                    std::max(1.0, std::abs(ab)));
        }
        for (const auto* kg : {&og, &binet}) {
            const double na = std::sqrt(inner_product(a, a, kp, *kg));
            const double nb = std::sqrt(inner_product(b, b, kp, *kg));
            const double ip = std::abs(inner_product(a, b, kp, *kg));
            worst_cauchy = std::max(worst_cauchy,
                                    (ip - na * nb) / std::max(1.0, na * nb));
            const double dab = std::sqrt(distance_sq(a, b, kp, *kg));
            const double dac = std::sqrt(distance_sq(a, c, kp, *kg));
            const double dcb = std::sqrt(distance_sq(c, b, kp, *kg));
            worst_triangle = std::max(worst_triangle, dab - (dac + dcb));
        }

        // gauge move: add a multiple of another frame vector (unit determinant)
        if (d == 2) {
            DiscreteVarifold sheared(n, d);
            for (int i = 0; i < a.atom_count(); ++i) {
                auto atom = a.atom(i);
                if (i == 0)
                    for (int cc = 0; cc < n; ++cc) atom.frame[cc] += 0.6 * atom.frame[n + cc];
                sheared.add_atom(atom);
            }
            for (const auto* kg : {&og, &binet, &lin}) {
                const double base = inner_product(a, b, kp, *kg);
                worst_gauge =
                    std::max(worst_gauge, std::abs(inner_product(sheared, b, kp, *kg) - base) /
                                              std::max(1.0, std::abs(base)));
            }
        }

        const auto rot = la::random_rotation(rng, n);
        std::vector<double> shift(n);
        for (auto& v : shift) v = rng.normal();
        const DiscreteVarifold ar = rigid_transport(a, rot, shift);
        const DiscreteVarifold br = rigid_transport(b, rot, shift);
        for (const auto* kg : {&og, &binet, &lin}) {
            const double before = distance_sq(a, b, kp, *kg);
            const double after = distance_sq(ar, br, kp, *kg);
            worst_rigid = std::max(worst_rigid,
                                   std::abs(after - before) / std::max(1.0, before));
        }
    }

    std::ostringstream os;
    os << "identity " << worst_identity << ", symmetry " << worst_symmetry << ", triangle "
       << worst_triangle << ", cauchy " << worst_cauchy << ", gauge " << worst_gauge
       << ", rigid " << worst_rigid;
    detail = os.str();
    return worst_identity <= 1e-12 && worst_symmetry <= 1e-12 && worst_triangle <= 1e-10 &&
           worst_cauchy <= 1e-10 && worst_gauge <= 1e-12 && worst_rigid <= 1e-10;
}

// ---------------------------------------------------------------- criterion 4
bool quantization_optimality(std::string& detail) {
    const SpatialKernel kp{0.5};
    const GrassmannKernel kg{GrassmannKind::oriented_gaussian, 1.0};
    const DiscreteVarifold target = make_wavy_curve(200, 1.0, 0.3, 3, 0.15, 5);

    double worst_gap = 0.0, worst_norm = 0.0;
    for (int count : {8, 32, 64}) {
        QuantizeConfig cfg;
        cfg.target_count = count;
        cfg.restarts = 3;
        cfg.seed = 17 + count;
        cfg.optimizer.grad_tol = 1e-9;
        cfg.optimizer.max_iters = 800;
        const QuantizeReport rep = quantize(target, cfg, kp, kg);
        worst_gap = std::max(worst_gap, rep.stationarity_gap);
        worst_norm = std::max(worst_norm, rep.norm_ratio);
    }

    // exact recovery with the identity restart
    Rng rng(1004);
    const DiscreteVarifold small = random_varifold(rng, 2, 1, 12);
    QuantizeConfig cfg;
    cfg.target_count = 16;
    cfg.restarts = 2;
    const QuantizeReport exact = quantize(small, cfg, SpatialKernel{1.0}, kg);

    std::ostringstream os;
    os << "max stationarity gap " << worst_gap << ", max |mu_N|/|mu*| " << worst_norm
       << ", recovery rel err " << exact.rel_error;
    detail = os.str();
    return worst_gap <= 1e-5 && worst_norm <= 1.0 + 1e-8 && exact.rel_error < 1e-8;
}

// ---------------------------------------------------------------- criterion 5
bool one_atom_geodesic(std::string& detail) {
    RunConfig cfg;
    cfg.lambda = 1e4;
    cfg.steps = 16;
    cfg.deformation.sigma_v = 1.0;
    cfg.optimizer.grad_tol = 1e-10;
    cfg.optimizer.max_iters = 2000;

    double worst = 0.0;
    for (const double bx : {0.25, 0.6, 1.0}) {
        DiscreteVarifold src(2, 1), tar(2, 1);
        src.add_atom(std::vector<double>{0.0, 0.0}, std::vector<double>{1.0, 0.0});
        tar.add_atom(std::vector<double>{bx, 0.0}, std::vector<double>{1.0, 0.0});
        const RegistrationReport rep = register_varifolds(src, tar, cfg);
        const auto end = rep.deformed.position(0);
        const double miss = std::hypot(end[0] - bx, end[1]) / bx;

        // closed form: the translating one-atom flow has x(1) = x0 + p^x
        const ShootingState s0 = make_state(src, rep.p0);
        const double closed_form = std::abs(end[0] - s0.px(0)[0]) + std::abs(end[1] - s0.px(0)[1]);
        worst = std::max({worst, miss, closed_form / bx});
    }
    std::ostringstream os;
    os << "worst relative end-point miss " << worst;
    detail = os.str();
    return worst <= 1e-3;
}

// ---------------------------------------------------------------- criterion 6
bool costate_scalar_matrices(std::string& detail) {
    Rng rng(1006);
    RunConfig cfg;
    cfg.lambda = 2.0;
    cfg.steps = 12;
    cfg.optimizer.grad_tol = 2e-7;
    cfg.optimizer.max_iters = 3000;
    cfg.optimizer.memory = 20;

    // The check applies to converged solves; draw problems until enough solves
    // reach the gate (some random instances floor out above it).
    int converged = 0, passed = 0, attempts = 0;
    double worst_ratio = 0.0;
    while (converged < 12 && attempts < 24) {
        ++attempts;
        const DiscreteVarifold src = random_varifold(rng, 3, 2, 2, 0.8, 1.0);
        DiscreteVarifold tar(3, 2);
        for (int i = 0; i < src.atom_count(); ++i) {
            auto atom = src.atom(i);
            for (auto& c : atom.x) c += 0.15 * rng.normal();
            for (auto& c : atom.frame) c += 0.05 * rng.normal();
            tar.add_atom(atom);
        }
        const RegistrationReport rep = register_varifolds(src, tar, cfg);
        if (rep.grad_norm > 1e-6 * std::max(1.0, rep.energy)) continue;
        ++converged;
        const double bound = std::max(1e-4, 10.0 * rep.grad_norm);
        if (rep.costate_gram_offdiag <= bound) ++passed;
        worst_ratio = std::max(worst_ratio, rep.costate_gram_offdiag / bound);
    }
    std::ostringstream os;
    os << converged << "/" << attempts << " attempts converged, " << passed
       << " passed, worst offdiag/bound " << worst_ratio;
    detail = os.str();
    return converged >= 10 && passed == converged;
}

// ---------------------------------------------------------------- criterion 7
bool quant_curve_analogue(std::string& detail) {
    RunConfig cfg;
    cfg.spatial.sigma_rho = 0.5;
    cfg.grassmann = {GrassmannKind::oriented_gaussian, 1.0};
    cfg.seed = 7;
    const DiscreteVarifold target = make_wavy_curve(200, 1.0, 0.3, 3, 0.15, 5);
    const QuantCurveResult result =
        quant_curve(target, {10, 20, 40, 80, 160}, cfg, 3);

    int wins = 0;
    std::ostringstream os;
    for (const auto& row : result.rows) {
        if (row.rel_err_quantize <= row.rel_err_subsample) ++wins;
        os << " N=" << row.count << ": " << row.rel_err_quantize << " vs "
           << row.rel_err_subsample << ";";
    }
    detail = "quantize-vs-subsample" + os.str();
    return wins * 10 >= static_cast<int>(result.rows.size()) * 9;
}

// ---------------------------------------------------------------- criterion 8
bool gamma_conv_analogue(std::string& detail) {
    RunConfig cfg;
    cfg.spatial.sigma_rho = 0.6;
    cfg.grassmann = {GrassmannKind::oriented_gaussian, 1.0};
    cfg.deformation.sigma_v = 1.0;
    cfg.lambda = 20.0;
    cfg.steps = 12;
    cfg.optimizer.max_iters = 400;
    cfg.seed = 11;

    const DiscreteVarifold source = make_wavy_curve(100, 1.0, 0.25, 3, 0.0, 1);
    const DiscreteVarifold target = make_wavy_curve(110, 1.12, 0.12, 2, 0.06, 4);

    const GammaConvResult result =
        gamma_conv(source, target, {6, 10, 16, 26, 40}, cfg, 3);

    std::vector<double> ns, gaps, gaps_sub;
    std::ostringstream rowtext;
    for (const auto& row : result.rows) {
        ns.push_back(row.count);
        gaps.push_back(row.gap_quantize);
        gaps_sub.push_back(row.gap_subsample);
        rowtext << " N=" << row.count << ": " << row.gap_quantize << "/"
                << row.gap_subsample << ";";
    }
    const double corr = spearman(ns, gaps);
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        const std::size_t m = v.size() / 2;
        return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
    };
    const double med_q = median(gaps);
    const double med_s = median(gaps_sub);

    std::ostringstream os;
    os << "spearman(N, gap) = " << corr << ", median gap " << med_q << " (quantize) vs "
       << med_s << " (subsample), E* = " << result.e_star << ", gaps q/s:" << rowtext.str();
    detail = os.str();
    return corr <= -0.8 && med_q <= med_s;
}

// ---------------------------------------------------------------- criterion 9
bool determinism(std::string& detail) {
    const fs::path work = fs::temp_directory_path() / "varimatch_acceptance";
    fs::remove_all(work);
    fs::create_directories(work);

    const DiscreteVarifold target = make_wavy_curve(24, 1.0, 0.25, 3, 0.1, 5);
    write_varifold(target, work / "target.json");
    DiscreteVarifold src(2, 1), tar(2, 1);
    src.add_atom(std::vector<double>{0.0, 0.0}, std::vector<double>{1.0, 0.2});
    src.add_atom(std::vector<double>{0.5, 0.0}, std::vector<double>{0.8, -0.1});
    tar.add_atom(std::vector<double>{0.1, 0.2}, std::vector<double>{1.0, 0.3});
    tar.add_atom(std::vector<double>{0.6, 0.1}, std::vector<double>{0.9, 0.0});
    write_varifold(src, work / "src.json");
    write_varifold(tar, work / "tar.json");
    {
        std::ofstream cfg(work / "cfg.json");
        cfg << R"({"seed":9,"steps":8,"lambda":10.0,"optimizer":{"max_iters":200}})";
    }

    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    auto run = [&](const std::string& args, const fs::path& out) {
        const std::string cmd = std::string(VARIMATCH_CLI_BIN) + " " + args + " > " +
                                out.string() + " 2> " + (work / "err.txt").string();
        return std::system(cmd.c_str()) == 0;
    };

    // two identical invocations of each subcommand, plus a thread-count change
    for (int rep = 0; rep < 2; ++rep) {
        const std::string sfx = std::to_string(rep);
        if (!run("--threads 2 dist " + (work / "target.json").string() + " " +
                     (work / "src.json").string() + " --config " + (work / "cfg.json").string(),
                 work / ("dist" + sfx)))
            return false;
        if (!run("--threads 2 quantize " + (work / "target.json").string() +
                     " -N 6 --restarts 2 --config " + (work / "cfg.json").string() + " -o " +
                     (work / ("q" + sfx + ".json")).string() + " --report " +
                     (work / ("qr" + sfx + ".json")).string(),
                 work / ("qout" + sfx)))
            return false;
        if (!run("--threads 2 register " + (work / "src.json").string() + " " +
                     (work / "tar.json").string() + " --config " + (work / "cfg.json").string() +
                     " -o " + (work / ("reg" + sfx)).string(),
                 work / ("regout" + sfx)))
            return false;
    }
    if (!run("--threads 1 quantize " + (work / "target.json").string() +
                 " -N 6 --restarts 2 --config " + (work / "cfg.json").string() + " -o " +
                 (work / "q_t1.json").string(),
             work / "qout_t1"))
        return false;

    const bool same_dist = slurp(work / "dist0") == slurp(work / "dist1");
    const bool same_quant = slurp(work / "q0.json") == slurp(work / "q1.json") &&
                            slurp(work / "qr0.json") == slurp(work / "qr1.json");
    const bool same_reg =
        slurp(work / "reg0" / "deformed.json") == slurp(work / "reg1" / "deformed.json") &&
        slurp(work / "reg0" / "trajectory.json") == slurp(work / "reg1" / "trajectory.json") &&
        slurp(work / "reg0" / "report.json") == slurp(work / "reg1" / "report.json");
    const bool same_threads = slurp(work / "q0.json") == slurp(work / "q_t1.json");

    std::ostringstream os;
    os << "dist " << (same_dist ? "ok" : "DIFFERS") << ", quantize "
       << (same_quant ? "ok" : "DIFFERS") << ", register " << (same_reg ? "ok" : "DIFFERS")
       << ", thread-count invariance " << (same_threads ? "ok" : "DIFFERS");
    detail = os.str();
    return same_dist && same_quant && same_reg && same_threads;
}

} // namespace

int main() {
    set_thread_count(0);
    std::printf("varimatch acceptance suite\n");
    run_criterion(1, "gradient gates", gradient_gates);
    run_criterion(2, "RK4 conservation", conservation);
    run_criterion(3, "metric properties", metric_properties);
    run_criterion(4, "quantization optimality", quantization_optimality);
    run_criterion(5, "one-atom geodesic", one_atom_geodesic);
    run_criterion(6, "costate scalar matrices", costate_scalar_matrices);
    run_criterion(7, "quantization error curve", quant_curve_analogue);
    run_criterion(8, "registration energy gaps", gamma_conv_analogue);
    run_criterion(9, "bit-exact determinism", determinism);
    if (g_failures) {
        std::printf("%d criterion(s) FAILED\n", g_failures);
        return 1;
    }
    std::printf("all 9 criteria passed\n");
    return 0;
}
