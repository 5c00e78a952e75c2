// hgtlab: command-line laboratory for the horizontal-gene-transfer
// selection-mutation model and its constrained Hamilton-Jacobi limit.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "hgt/cross_check.hpp"
#include "hgt/diagnostics.hpp"
#include "hgt/eps_solver.hpp"
#include "hgt/limit_solver.hpp"
#include "hgt/model.hpp"
#include "hgt/oracle.hpp"
#include "hgt/run_record.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitHypothesis = 2;
constexpr int kExitNumerical = 3;

struct CommonArgs {
    std::string config_path;
    std::string out_dir = ".";
    std::vector<std::string> overrides;
    int snapshots = 0;
};

hgt::ModelConfig load_config(const CommonArgs& args) {
    hgt::ModelConfig cfg;
    if (!args.config_path.empty()) cfg = hgt::parse_config_file(args.config_path);
    for (const auto& ov : args.overrides) hgt::apply_override(cfg, ov);
    return cfg;
}

// temp file + rename so partially written outputs never appear
void write_atomic(const fs::path& path, const std::string& contents) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw hgt::error("cannot open output file: " + tmp.string());
        os << contents;
    }
    fs::rename(tmp, path);
}

void check_kernel_hypotheses(const hgt::ModelConfig& cfg) {
    const double l = cfg.half_width();
    const auto rep = hgt::verify_hypotheses(cfg.kernel, cfg.growth(), -l, l, 2001, cfg.tau);
    std::string failed;
    for (const auto& c : rep.checks)
        if (!c.passed && c.name.rfind("kernel.", 0) == 0)
            failed += (failed.empty() ? "" : ", ") + c.name;
    if (!failed.empty())
        throw hgt::hypothesis_error("kernel hypothesis check failed: " + failed);
}

int cmd_thresholds(const CommonArgs& args) {
    const hgt::ModelConfig cfg = load_config(args);
    check_kernel_hypotheses(cfg);
    const auto rep = hgt::classify_regime(cfg);
    std::ostringstream os;
    os.precision(12);
    os << "kernel: " << cfg.kernel.name() << '\n'
       << "z_H: " << cfg.kernel.z_inflection() << '\n'
       << "d1: " << rep.d1 << '\n'
       << "mu1: " << rep.mu1 << '\n'
       << "mu: " << rep.mu << '\n'
       << "2*sqrt(g): " << 2.0 * std::sqrt(cfg.g) << '\n'
       << "regime: " << hgt::to_string(rep.regime) << '\n';
    if (rep.predicted_limit_trait) os << "predicted_limit_trait: " << *rep.predicted_limit_trait << '\n';
    if (rep.predicted_extinction_trait)
        os << "predicted_extinction_trait: " << *rep.predicted_extinction_trait << '\n';
    std::cout << os.str();
    return kExitOk;
}

int cmd_classify(const CommonArgs& args) {
    const hgt::ModelConfig cfg = load_config(args);
    check_kernel_hypotheses(cfg);
    const auto rep = hgt::classify_regime(cfg);
    std::cout.precision(12);
    std::cout << "mu: " << rep.mu << '\n'
              << "mu1: " << rep.mu1 << '\n'
              << "d1: " << rep.d1 << '\n'
              << "regime: " << hgt::to_string(rep.regime) << '\n'
              << "at_tau_boundary: " << (rep.at_tau_boundary ? "yes" : "no") << '\n';
    if (rep.regime != hgt::Regime::BeyondMu1)
        std::cout << "initial_fitness_type: "
                  << hgt::to_string(hgt::classify_initial_fitness_type(cfg)) << '\n';
    return kExitOk;
}

int cmd_hypotheses(const CommonArgs& args) {
    const hgt::ModelConfig cfg = load_config(args);
    const double l = cfg.half_width();
    const auto rep = hgt::verify_hypotheses(cfg.kernel, cfg.growth(), -l, l, 2001, cfg.tau);
    std::cout.precision(12);
    for (const auto& c : rep.checks) {
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << "  (" << c.detail << ")";
        if (!c.passed) std::cout << "  worst at z=" << c.worst_z << " margin=" << c.worst_value;
        std::cout << '\n';
    }
    std::cout << "all: " << (rep.all_passed() ? "PASS" : "FAIL") << '\n';
    return kExitOk;
}

int write_outputs(const hgt::RunRecord& rec, const CommonArgs& args,
                  const std::string& prefix, const hgt::limit::SandwichReport* sandwich) {
    fs::create_directories(args.out_dir);
    std::ostringstream os;
    hgt::write_run_record(os, rec);
    hgt::write_monomorphism_report(os, hgt::monomorphism_monitor(rec));
    if (sandwich) hgt::limit::write_sandwich_report(os, *sandwich);
    write_atomic(fs::path(args.out_dir) / (prefix + "_record.tsv"), os.str());

    int k = 0;
    for (const auto& snap : rec.snapshots) {
        std::ostringstream ss;
        hgt::write_snapshot(ss, snap, rec.eps, rec.config_hash);
        char name[64];
        std::snprintf(name, sizeof name, "%s_snapshot_%04d.tsv", prefix.c_str(), k++);
        write_atomic(fs::path(args.out_dir) / name, ss.str());
    }

    switch (rec.status) {
        case hgt::RunStatus::NumericalAbort:
        case hgt::RunStatus::BoundaryArgmax:
            return kExitNumerical;
        default:
            return kExitOk;
    }
}

int cmd_simulate_eps(const CommonArgs& args) {
    const hgt::ModelConfig cfg = load_config(args);
    cfg.validate();
    hgt::eps::RunOptions opt;
    opt.snapshot_every = args.snapshots;
    const auto rec = hgt::eps::run(cfg, opt);
    return write_outputs(rec, args, "eps", nullptr);
}

int cmd_simulate_limit(const CommonArgs& args) {
    const hgt::ModelConfig cfg = load_config(args);
    cfg.validate();
    hgt::limit::RunOptions opt;
    opt.snapshot_every = args.snapshots;
    const auto rec = hgt::limit::run(cfg, opt);
    std::optional<hgt::limit::SandwichReport> sandwich;
    if (!rec.samples.empty() && rec.samples.front().zbar <= cfg.mu() + 1e-12)
        sandwich = hgt::limit::sandwich_check(rec, cfg);
    std::cout << "status: " << hgt::to_string(rec.status) << '\n';
    if (rec.extinction_time)
        std::cout << "extinction at t=" << *rec.extinction_time
                  << " trait=" << *rec.extinction_trait << '\n';
    else if (!rec.samples.empty())
        std::cout << "final trait: " << rec.final_zbar() << '\n';
    return write_outputs(rec, args, "limit", sandwich ? &*sandwich : nullptr);
}

int cmd_cross_check(const CommonArgs& args) {
    const hgt::ModelConfig cfg = load_config(args);
    cfg.validate();
    std::ostringstream report;
    report.precision(8);
    hgt::crosscheck::Report rep;
    try {
        rep = hgt::crosscheck::run(cfg, &report);
    } catch (const hgt::error&) {
        std::cout << report.str();
        throw;
    }
    std::cout << report.str();
    fs::create_directories(args.out_dir);
    write_atomic(fs::path(args.out_dir) / "cross_check.txt", report.str());
    {
        std::ostringstream os;
        hgt::write_snapshot(os, rep.dp_final, 0.0, cfg.hash());
        write_atomic(fs::path(args.out_dir) / "cross_check_dp_final.tsv", os.str());
        std::ostringstream os2;
        hgt::write_snapshot(os2, rep.limit_final, 0.0, cfg.hash());
        write_atomic(fs::path(args.out_dir) / "cross_check_limit_final.tsv", os2.str());
    }
    return rep.all_pass() ? kExitOk : kExitNumerical;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"hgtlab: horizontal-gene-transfer evolution laboratory"};
    app.require_subcommand(1);

    CommonArgs args;
    const std::vector<std::pair<std::string, std::string>> subs = {
        {"thresholds", "print d1, mu1, z_H and the regime classification"},
        {"classify", "classify the configured regime"},
        {"hypotheses", "verify the structural hypotheses on kernel and growth"},
        {"simulate-eps", "integrate the eps-model (Hopf-Cole form)"},
        {"simulate-limit", "integrate the constrained limit system"},
        {"cross-check", "validate the solvers against the variational oracles"},
    };
    for (const auto& [name, desc] : subs) {
        auto* sc = app.add_subcommand(name, desc);
        sc->add_option("--config", args.config_path, "plain-text key=value config file");
        sc->add_option("--out", args.out_dir, "output directory");
        sc->add_option("--set", args.overrides, "override KEY=VALUE (repeatable)");
        sc->add_option("--snapshots", args.snapshots, "field snapshot stride (0 = off)");
    }

    CLI11_PARSE(app, argc, argv);
    const std::string sub = app.get_subcommands().front()->get_name();

    try {
        if (sub == "thresholds") return cmd_thresholds(args);
        if (sub == "classify") return cmd_classify(args);
        if (sub == "hypotheses") return cmd_hypotheses(args);
        if (sub == "simulate-eps") return cmd_simulate_eps(args);
        if (sub == "simulate-limit") return cmd_simulate_limit(args);
        if (sub == "cross-check") return cmd_cross_check(args);
    } catch (const hgt::config_error& e) {
        std::cerr << "config error";
        if (e.line > 0) std::cerr << " at line " << e.line;
        std::cerr << ": " << e.what() << '\n';
        return kExitConfig;
    } catch (const hgt::hypothesis_error& e) {
        std::cerr << "hypothesis violation: " << e.what() << '\n';
        return kExitHypothesis;
    } catch (const hgt::numerical_abort& e) {
        std::cerr << "numerical abort: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const hgt::boundary_argmax& e) {
        std::cerr << "numerical abort: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const hgt::error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    }
    return kExitOk;
}
