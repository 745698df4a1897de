#pragma once

#include <string>
#include <vector>

#include "rtplan/phantom.hpp"
#include "rtplan/upper.hpp"

namespace rtplan {

/// Percentage improvement of the optimal course over the single-modality
/// and conventional baselines: (100 be*/be_single, 100 be*/be_conv).
std::pair<double, double> pobj_metrics(double be_star, double be_single, double be_conv);

/// Average BE per voxel of `eval_mask`: per-voxel linear-quadratic effect
/// summed over modalities minus the proliferation term. On the full tumor
/// mask this equals -F / l.
double avg_be_per_voxel(const ProblemSpec& spec, const PlanResult& result,
                        const std::vector<int>& eval_mask);

struct BaselineResults {
    PlanResult conv;    // fixed N = (N_max, 0, ...)
    PlanResult single;  // optimal single-modality course (N1, 0, ...)
};

/// Conventional and single-modality-optimal photon courses, both evaluated
/// through the same lower-level path as the dual optimization. The single
/// course is found by enumerating N1 = 1..N_max.
BaselineResults run_baselines(const ProblemSpec& spec, const Vec& u_init,
                              const UpperConfig& cfg);

enum class SweepParam { Td, Alpha2, R, MarginR };

std::string sweep_param_name(SweepParam p);

struct SweepSpec {
    SweepParam param = SweepParam::Td;
    std::vector<double> values;
    int margin_voxels = 2;  // used by MarginR
};

/// One sweep row comparing the dual-modality optimum against the baselines.
struct ComparisonReport {
    std::string sweep_param;
    double sweep_value = 0.0;
    IVec dual_plan;
    int single_plan = 0;
    double pobj_single = 0.0;
    double pobj_conv = 0.0;
    double be_dual = 0.0, be_single = 0.0, be_conv = 0.0;  // avg BE per voxel
    Vec dual_constraints, single_constraints, conv_constraints;
    double runtime_s = 0.0;
    std::vector<std::string> flags;  // solver-quality observations
    std::string error;               // non-empty marks a failed row
    SolveDiagnostics diag;

    bool ok() const { return error.empty(); }
};

/// Run one parameter sweep: per value build the scenario, optimize the dual
/// course (default starts plus the single-modality optimum as a seed),
/// compute baselines and metrics. Failures are recorded per row and the
/// sweep continues.
std::vector<ComparisonReport> run_sweep(const ScenarioConfig& base, const SweepSpec& sweep,
                                        const UpperConfig& cfg);

/// CSV serialization of sweep reports (runtime kept out; see runtimes_csv).
std::string reports_to_csv(const std::vector<ComparisonReport>& reports);
std::string runtimes_to_csv(const std::vector<ComparisonReport>& reports);

/// Plain-text rendering in the style of the comparison tables.
std::string render_table(const std::vector<ComparisonReport>& reports);

}  // namespace rtplan
