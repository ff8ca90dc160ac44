#include "varimatch/common.hpp"
#include "varimatch/experiments.hpp"
#include "varimatch/io.hpp"
#include "varimatch/parallel.hpp"
#include "varimatch/quantize.hpp"
#include "varimatch/registration.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace vm = varimatch;
namespace fs = std::filesystem;

namespace {

vm::RunConfig load_config(const std::string& path) {
    if (path.empty()) return vm::RunConfig{};
    return vm::read_config(path);
}

std::vector<int> parse_counts(const std::string& text) {
    std::vector<int> out;
    std::istringstream is(text);
    std::string tok;
    while (std::getline(is, tok, ',')) {
        if (tok.empty()) continue;
        out.push_back(std::stoi(tok));
    }
    if (out.empty()) throw vm::ValidationError("expected a comma-separated list of N values");
    return out;
}

vm::QuantizeBox parse_box(const std::string& text, int n) {
    const auto colon = text.find(':');
    if (colon == std::string::npos)
        throw vm::ValidationError("box must be 'auto' or 'x0,y0,..:x1,y1,..'");
    auto parse_list = [&](const std::string& part) {
        std::vector<double> vals;
        std::istringstream is(part);
        std::string tok;
        while (std::getline(is, tok, ',')) vals.push_back(std::stod(tok));
        if (vals.size() != static_cast<std::size_t>(n))
            throw vm::ValidationError("box corner needs " + std::to_string(n) + " coordinates");
        return vals;
    };
    vm::QuantizeBox box;
    box.lo = parse_list(text.substr(0, colon));
    box.hi = parse_list(text.substr(colon + 1));
    for (int c = 0; c < n; ++c)
        if (box.lo[c] > box.hi[c])
            throw vm::ValidationError("box lower corner exceeds upper corner");
    return box;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw vm::ParseError("cannot open '" + path.string() + "' for writing");
    out << text;
}

int run(int argc, char** argv) {
    CLI::App app{"discrete varifold metrics, quantization and registration"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "worker threads (0 = all cores)")
        ->envname("VARIMATCH_THREADS");

    // dist
    auto* dist = app.add_subcommand("dist", "kernel distance between two varifolds");
    std::string dist_a, dist_b, dist_cfg;
    dist->add_option("A", dist_a, "first varifold JSON")->required();
    dist->add_option("B", dist_b, "second varifold JSON")->required();
    dist->add_option("--config", dist_cfg, "run configuration JSON");

    // quantize
    auto* quant = app.add_subcommand("quantize", "project onto at most N Diracs");
    std::string quant_target, quant_out, quant_report, quant_box, quant_cfg;
    int quant_n = 0, quant_restarts = 5;
    quant->add_option("target", quant_target, "target varifold JSON")->required();
    quant->add_option("-N,--count", quant_n, "Dirac budget")->required();
    quant->add_option("--restarts", quant_restarts, "restart count (default 5)");
    quant->add_option("--box", quant_box, "'auto' or 'x0,y0,..:x1,y1,..'");
    quant->add_option("--config", quant_cfg, "run configuration JSON");
    quant->add_option("-o,--output", quant_out, "output varifold JSON")->required();
    quant->add_option("--report", quant_report, "optional report JSON");

    // register
    auto* reg = app.add_subcommand("register", "geodesic-shooting registration");
    std::string reg_src, reg_tgt, reg_cfg, reg_out;
    reg->add_option("source", reg_src, "source varifold JSON")->required();
    reg->add_option("target", reg_tgt, "target varifold JSON")->required();
    reg->add_option("--config", reg_cfg, "run configuration JSON");
    reg->add_option("-o,--output", reg_out, "output directory")->required();

    // convert
    auto* conv = app.add_subcommand("convert", "mesh/polyline to varifold JSON");
    std::string conv_in, conv_out;
    conv->add_option("mesh", conv_in, "input .obj (triangles) or .csv (polylines)")
        ->required();
    conv->add_option("-o,--output", conv_out, "output varifold JSON")->required();

    // experiment
    auto* exp = app.add_subcommand("experiment", "study protocols");
    exp->require_subcommand(1);
    auto* curve = exp->add_subcommand("quant-curve", "quantization error curve vs subsampling");
    std::string curve_target, curve_ns, curve_cfg, curve_out;
    int curve_restarts = 5;
    curve->add_option("--target", curve_target, "target varifold JSON")->required();
    curve->add_option("--ns", curve_ns, "comma-separated N values")->required();
    curve->add_option("--config", curve_cfg, "run configuration JSON");
    curve->add_option("--restarts", curve_restarts, "restart count");
    curve->add_option("-o,--output", curve_out, "output CSV")->required();

    auto* gamma = exp->add_subcommand("gamma-conv", "registration energy convergence in N");
    std::string gamma_src, gamma_tgt, gamma_ns, gamma_cfg, gamma_out;
    int gamma_restarts = 5;
    gamma->add_option("--source", gamma_src, "full-resolution source varifold")->required();
    gamma->add_option("--target", gamma_tgt, "target varifold")->required();
    gamma->add_option("--ns", gamma_ns, "comma-separated N values")->required();
    gamma->add_option("--config", gamma_cfg, "run configuration JSON");
    gamma->add_option("--restarts", gamma_restarts, "restart count");
    gamma->add_option("-o,--output", gamma_out, "output CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << std::flush;
        return 1;
    }

    vm::set_thread_count(threads);

    if (dist->parsed()) {
        const vm::RunConfig cfg = load_config(dist_cfg);
        const auto a = vm::read_varifold(dist_a);
        const auto b = vm::read_varifold(dist_b);
        const double d2 = vm::distance_sq(a, b, cfg.spatial, cfg.grassmann);
        const double inner = vm::inner_product(a, b, cfg.spatial, cfg.grassmann);
        std::cout << "distance " << vm::format_double(std::sqrt(d2)) << "\n"
                  << "inner " << vm::format_double(inner) << "\n";
        return 0;
    }

    if (quant->parsed()) {
        const vm::RunConfig cfg = load_config(quant_cfg);
        const auto target = vm::read_varifold(quant_target);
        vm::QuantizeConfig qc;
        qc.target_count = quant_n;
        qc.restarts = quant_restarts;
        qc.seed = cfg.seed;
        qc.optimizer = cfg.optimizer;
        if (!quant_box.empty()) {
            if (quant_box == "auto") {
                qc.box_mode = vm::BoxMode::automatic;
            } else {
                qc.box_mode = vm::BoxMode::fixed;
                qc.box = parse_box(quant_box, target.ambient_dim());
            }
        }
        const vm::QuantizeReport report = vm::quantize(target, qc, cfg.spatial, cfg.grassmann);
        vm::write_varifold(report.result, quant_out);
        if (!quant_report.empty()) {
            std::string text = "{\"objective\":" + vm::format_double(report.objective) +
                               ",\"rel_error\":" + vm::format_double(report.rel_error) +
                               ",\"stationarity_gap\":" +
                               vm::format_double(report.stationarity_gap) +
                               ",\"norm_ratio\":" + vm::format_double(report.norm_ratio) +
                               ",\"best_restart\":" + std::to_string(report.best_restart) +
                               ",\"atoms\":" + std::to_string(report.result.atom_count()) +
                               ",\"iterations\":[";
            for (std::size_t i = 0; i < report.iterations.size(); ++i) {
                if (i) text += ',';
                text += std::to_string(report.iterations[i]);
            }
            text += "]}\n";
            write_text(quant_report, text);
        }
        return 0;
    }

    if (reg->parsed()) {
        const vm::RunConfig cfg = load_config(reg_cfg);
        const auto source = vm::read_varifold(reg_src);
        const auto target = vm::read_varifold(reg_tgt);
        const vm::RegistrationReport report = vm::register_varifolds(source, target, cfg);
        fs::create_directories(reg_out);
        vm::write_varifold(report.deformed, fs::path(reg_out) / "deformed.json");
        vm::write_trajectory(report.trajectory, fs::path(reg_out) / "trajectory.json");
        std::string text =
            "{\"energy\":" + vm::format_double(report.energy) +
            ",\"reg_term\":" + vm::format_double(report.reg_term) +
            ",\"fid_term\":" + vm::format_double(report.fid_term) +
            ",\"grad_norm\":" + vm::format_double(report.grad_norm) +
            ",\"iterations\":" + std::to_string(report.iterations) +
            ",\"converged\":" + (report.converged ? "true" : "false") +
            ",\"status\":\"" + report.status + "\"" +
            ",\"hamiltonian_drift\":" + vm::format_double(report.hamiltonian_drift) +
            ",\"costate_gram_offdiag\":" + vm::format_double(report.costate_gram_offdiag) + "}\n";
        write_text(fs::path(reg_out) / "report.json", text);
        return 0;
    }

    if (conv->parsed()) {
        const auto mu = vm::mesh_to_varifold(conv_in);
        vm::write_varifold(mu, conv_out);
        return 0;
    }

    if (curve->parsed()) {
        const vm::RunConfig cfg = load_config(curve_cfg);
        const auto target = vm::read_varifold(curve_target);
        const auto result =
            vm::quant_curve(target, parse_counts(curve_ns), cfg, curve_restarts);
        write_text(curve_out, result.to_csv());
        return 0;
    }

    if (gamma->parsed()) {
        const vm::RunConfig cfg = load_config(gamma_cfg);
        const auto source = vm::read_varifold(gamma_src);
        const auto target = vm::read_varifold(gamma_tgt);
        const auto result =
            vm::gamma_conv(source, target, parse_counts(gamma_ns), cfg, gamma_restarts);
        write_text(gamma_out, result.to_csv());
        return 0;
    }

    std::cerr << app.help();
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const vm::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const vm::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const vm::SchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        // ValidationError, DimensionMismatchError, DegenerateFrameError, stoi/stod
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    }
}
