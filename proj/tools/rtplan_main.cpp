// Command-line front end: phantom/dose-matrix export, plan optimization,
// brute-force value surfaces, parameter sweeps, and baseline courses.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "rtplan/bench.hpp"
#include "rtplan/config.hpp"
#include "rtplan/sparse_io.hpp"

namespace fs = std::filesystem;
using namespace rtplan;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir = "out";
    std::vector<std::string> overrides;
    int jobs = 1;
    long seed = 0;  // reserved for randomized test instances; solvers are deterministic
    int verbosity = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "Problem configuration file");
    cmd->add_option("--out", args.out_dir, "Output directory");
    cmd->add_option("--override", args.overrides, "Config override key=value (repeatable)");
    cmd->add_option("--jobs", args.jobs, "Parallel solver jobs");
    cmd->add_option("--seed", args.seed, "Seed for randomized instance generation");
    cmd->add_flag("-v,--verbose", args.verbosity, "Verbose progress output");
}

Config load_config(const CommonArgs& args) {
    Config cfg = args.config_path.empty() ? default_config()
                                          : Config::parse_file(args.config_path);
    for (const auto& ov : args.overrides) cfg.apply_override(ov);
    return cfg;
}

std::string config_dir(const CommonArgs& args) {
    if (args.config_path.empty()) return ".";
    const auto parent = fs::path(args.config_path).parent_path();
    return parent.empty() ? "." : parent.string();
}

fs::path ensure_out(const CommonArgs& args) {
    fs::path dir(args.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + args.out_dir + "'");
    return dir;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot write '" + path.string() + "'");
    os << content;
}

void write_manifest(const fs::path& dir, const Config& cfg, const CommonArgs& args,
                    const std::string& command) {
    std::ostringstream os;
    os << "command = " << command << "\n";
    os << "jobs = " << args.jobs << "\n";
    os << "seed = " << args.seed << "\n";
    for (const auto& ov : args.overrides) os << "override = " << ov << "\n";
    os << cfg.manifest();
    write_file(dir / "run_manifest.txt", os.str());
}

std::map<std::string, std::string> plan_summary(const ProblemSpec& spec,
                                                const PlanResult& res) {
    std::map<std::string, std::string> kv;
    std::ostringstream plan;
    for (int m = 0; m < res.N.size(); ++m)
        plan << (m ? " " : "") << static_cast<int>(std::lround(res.N[m]));
    kv["plan"] = plan.str();
    kv["total_fractions"] = std::to_string(static_cast<int>(std::lround(res.N.sum())));
    kv["objective"] = format_double(res.objective);
    kv["tumor_be"] = format_double(res.tumor_be);
    kv["feasible"] = res.diag.feasible ? "1" : "0";
    kv["lower_solves"] = std::to_string(res.diag.lower_solves);
    kv["bcd_sweeps"] = std::to_string(res.diag.bcd_sweeps);
    kv["value_evals"] = std::to_string(res.diag.value_evals);

    const GeneralizedSystem sys = assemble(spec, FractionationPlan{res.N});
    for (const auto& g : sys.groups()) {
        double worst = 0.0;
        if (g.kind == ConstraintKind::Mean) {
            worst = res.constraint_values[g.first_flat];
        } else {
            for (int j = 0; j < g.rows(); ++j)
                worst = std::max(worst, res.constraint_values[g.first_flat + j]);
        }
        kv["constraint." + g.name + ".be"] = format_double(worst);
        kv["constraint." + g.name + ".tolerance"] = format_double(g.C);
    }
    return kv;
}

std::string constraints_csv(const ProblemSpec& spec, const PlanResult& res) {
    const GeneralizedSystem sys = assemble(spec, FractionationPlan{res.N});
    std::ostringstream os;
    os << "index,oar,kind,voxel,be,tolerance\n";
    for (int i = 0; i < sys.constraint_count(); ++i) {
        const auto& c = sys.constraints()[i];
        os << i << "," << c.oar << ","
           << (c.kind == ConstraintKind::Mean ? "mean" : "max") << "," << c.voxel << ","
           << format_double(res.constraint_values[i]) << "," << format_double(c.C) << "\n";
    }
    return os.str();
}

std::string fluence_csv(const ProblemSpec& spec, const Vec& u) {
    std::ostringstream os;
    os << "modality,beamlet,intensity\n";
    int off = 0;
    for (const auto& md : spec.modalities) {
        for (int b = 0; b < md.beamlets(); ++b)
            os << md.name << "," << b << "," << format_double(u[off + b]) << "\n";
        off += md.beamlets();
    }
    return os.str();
}

std::string traces_csv(const PlanResult& res) {
    std::ostringstream os;
    os << "start,step";
    const int M = res.traces.empty() ? 0 : static_cast<int>(res.traces[0].start.size());
    for (int m = 0; m < M; ++m) os << ",N" << m + 1;
    os << ",V\n";
    for (size_t s = 0; s < res.traces.size(); ++s) {
        const auto& tr = res.traces[s];
        for (size_t k = 0; k < tr.iterates.size(); ++k) {
            os << s << "," << k;
            for (int m = 0; m < M; ++m) os << "," << format_double(tr.iterates[k][m]);
            os << "," << format_double(tr.values[k]) << "\n";
        }
    }
    return os.str();
}

IterationSink make_sink(int verbosity) {
    if (verbosity < 2) return {};
    return [](int sweep, double obj, double viol) {
        std::cerr << "    sweep " << sweep << "  obj " << obj << "  viol " << viol << "\n";
    };
}

int cmd_phantom(const CommonArgs& args) {
    const Config cfg = load_config(args);
    const fs::path dir = ensure_out(args);
    const ScenarioConfig sc = scenario_from_config(cfg);
    const ProblemSpec spec = scenario(sc, scenario_overrides_from_config(cfg));

    std::ofstream labels(dir / "phantom_labels.csv");
    write_phantom_labels(labels, spec.phantom);
    for (const auto& md : spec.modalities) {
        write_sparse_file((dir / (md.name + "_tumor.txt")).string(), md.T);
        for (const auto& [oar, H] : md.H)
            write_sparse_file((dir / (md.name + "_" + oar + ".txt")).string(), H);
    }
    write_manifest(dir, cfg, args, "phantom");
    if (args.verbosity)
        std::cerr << "phantom: " << spec.phantom.masks.size() << " structures, "
                  << spec.total_beamlets() << " beamlets\n";
    return 0;
}

int cmd_plan(const CommonArgs& args) {
    const Config cfg = load_config(args);
    const fs::path dir = ensure_out(args);
    const ProblemSpec spec = problem_from_config(cfg, config_dir(args));
    UpperConfig up = upper_from_config(cfg);
    up.jobs = args.jobs;
    up.lower.sink = make_sink(args.verbosity);

    const Vec u0 = initial_fluence(spec);
    const PlanResult res = optimize_fractionation(spec, up, u0);

    std::ofstream summary(dir / "plan_summary.txt");
    write_kv(summary, plan_summary(spec, res));
    write_file(dir / "fluence.csv", fluence_csv(spec, res.u));
    write_file(dir / "constraints.csv", constraints_csv(spec, res));
    write_file(dir / "trace.csv", traces_csv(res));
    write_manifest(dir, cfg, args, "plan");

    std::cout << "plan:";
    for (int m = 0; m < res.N.size(); ++m) std::cout << " " << res.N[m];
    std::cout << "  objective " << res.objective << "  tumor BE " << res.tumor_be << "\n";
    return 0;
}

int cmd_brute_force(const CommonArgs& args, const std::string& compare_path) {
    const Config cfg = load_config(args);
    const fs::path dir = ensure_out(args);
    const ProblemSpec spec = problem_from_config(cfg, config_dir(args));
    UpperConfig up = upper_from_config(cfg);
    up.jobs = args.jobs;

    const Vec u0 = initial_fluence(spec);
    const ValueSurface surf = brute_force(spec, u0, up);
    write_file(dir / "value_surface.csv", surface_to_csv(surf));

    const auto& opt = surf.optimum();
    std::map<std::string, std::string> kv;
    std::ostringstream plan;
    for (int m = 0; m < opt.N.size(); ++m) plan << (m ? " " : "") << opt.N[m];
    kv["optimum_plan"] = plan.str();
    kv["optimum_value"] = format_double(opt.value);
    kv["samples"] = std::to_string(surf.samples.size());

    if (!compare_path.empty()) {
        std::ifstream is(compare_path);
        if (!is) throw ConfigError("cannot read comparison plan '" + compare_path + "'");
        const auto plan_kv = read_kv(is);
        const auto it = plan_kv.find("objective");
        if (it == plan_kv.end())
            throw ConfigError("comparison file lacks an 'objective' entry");
        const double obj = std::stod(it->second);
        kv["compare_objective"] = format_double(obj);
        kv["optimality_gap"] = format_double(obj - opt.value);
        kv["optimality_gap_relative"] =
            format_double((obj - opt.value) / std::abs(opt.value));
    }
    std::ofstream os(dir / "optimum.txt");
    write_kv(os, kv);
    write_manifest(dir, cfg, args, "brute-force");
    std::cout << "surface: " << surf.samples.size() << " samples, optimum at ("
              << plan.str() << ") value " << opt.value << "\n";
    return 0;
}

int cmd_sweep(const CommonArgs& args) {
    const Config cfg = load_config(args);
    const fs::path dir = ensure_out(args);
    const ScenarioConfig sc = scenario_from_config(cfg);
    UpperConfig up = upper_from_config(cfg);
    up.jobs = args.jobs;
    const SweepSpec sweep = sweep_from_config(cfg);

    const auto reports = run_sweep(sc, sweep, up);
    write_file(dir / "sweep.csv", reports_to_csv(reports));
    write_file(dir / "sweep.txt", render_table(reports));
    write_file(dir / "runtimes.csv", runtimes_to_csv(reports));
    write_manifest(dir, cfg, args, "sweep");
    std::cout << render_table(reports);
    for (const auto& r : reports)
        if (!r.ok()) return 3;
    return 0;
}

int cmd_baselines(const CommonArgs& args) {
    const Config cfg = load_config(args);
    const fs::path dir = ensure_out(args);
    const ProblemSpec spec = problem_from_config(cfg, config_dir(args));
    UpperConfig up = upper_from_config(cfg);
    up.jobs = args.jobs;

    const Vec u0 = initial_fluence(spec);
    const auto baselines = run_baselines(spec, u0, up);

    std::ofstream conv(dir / "baseline_conv.txt");
    write_kv(conv, plan_summary(spec, baselines.conv));
    std::ofstream single(dir / "baseline_single.txt");
    write_kv(single, plan_summary(spec, baselines.single));
    write_manifest(dir, cfg, args, "baselines");
    std::cout << "conventional: objective " << baselines.conv.objective
              << "\nsingle-modality optimum: N1 " << baselines.single.N[0] << " objective "
              << baselines.single.objective << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-modality fluence and fractionation planning"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string compare_path;

    auto* phantom = app.add_subcommand("phantom", "Write phantom masks and dose matrices");
    add_common(phantom, args);
    auto* plan = app.add_subcommand("plan", "Optimize the fractionation schedule");
    add_common(plan, args);
    auto* brute = app.add_subcommand("brute-force", "Sample the value function grid");
    add_common(brute, args);
    brute->add_option("--compare", compare_path, "plan_summary.txt to report the gap against");
    auto* sweep = app.add_subcommand("sweep", "Run a parameter sweep");
    add_common(sweep, args);
    auto* baselines = app.add_subcommand("baselines", "Conventional and single-modality courses");
    add_common(baselines, args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (phantom->parsed()) return cmd_phantom(args);
        if (plan->parsed()) return cmd_plan(args);
        if (brute->parsed()) return cmd_brute_force(args, compare_path);
        if (sweep->parsed()) return cmd_sweep(args);
        if (baselines->parsed()) return cmd_baselines(args);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
