#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rtplan/model.hpp"

namespace rtplan {

/// Circular structure, centered in cm from the grid origin (x along
/// columns, y along rows). Radius <= 0 omits the structure.
struct Disk {
    double x_cm = 0.0;
    double y_cm = 0.0;
    double radius_cm = 0.0;
};

/// Head-and-neck-like 2D layout: tumor centered between the parotids with
/// the cord behind it, a circular external contour, and an unspecified
/// tissue band just inside the contour.
struct PhantomConfig {
    int rows = 60;
    int cols = 60;
    double voxel_size = 0.25;  // cm

    Disk body{7.5, 7.5, 7.0};
    Disk tumor{7.5, 7.0, 2.0};
    Disk cord{7.5, 10.5, 1.0};
    Disk parotid_left{3.5, 7.0, 1.25};
    Disk parotid_right{11.5, 7.0, 1.25};
    double skin_thickness_cm = 1.0;  // unspecified band inside the contour
};

/// Synthetic beam description for one modality.
struct BeamModel {
    enum class Kind { Photon, Proton };
    Kind kind = Kind::Photon;

    // photon: broad beams from several gantry angles, exponential decay
    // past a linear buildup region
    double mu = 0.05;        // attenuation, cm^-1
    double buildup_cm = 1.5;
    double lateral_sigma_vox = 1.0;
    std::vector<double> gantry_angles_deg = {0, 51, 103, 153, 206, 257, 309};
    int beamlets_per_angle = 28;
    double beamlet_spacing_cm = 0.25;

    // proton: spot scanning from one angle, Gaussian peak at the end of
    // range with a sharp distal falloff
    double proton_angle_deg = 0.0;
    int spot_count = 40;
    double peak_width_cm = 0.4;
    double entrance_plateau = 0.3;     // plateau dose as a fraction of peak
    double distal_sigma_factor = 0.5;  // distal width relative to peak width
    double spot_lateral_sigma_cm = 0.4;
    /// Explicit spot positions in cm; auto-placed inside the target when empty.
    std::vector<std::pair<double, double>> spot_positions;
};

/// Rasterize the configured structures into disjoint masks. Boundary voxels
/// go to the higher-priority structure: tumor > cord > parotids > unspecified.
Phantom build_phantom(const PhantomConfig& cfg);

/// Dose matrices produced against one phantom's masks.
struct GeneratedMatrices {
    std::vector<int> target_voxels;  // rows of T
    SpMat T;
    std::map<std::string, SpMat> H;  // rows follow the phantom masks
};

/// Photon kernel: per beamlet, linear buildup then exponential decay along
/// the ray, Gaussian lateral spread; columns L-inf normalized to 1 Gy.
GeneratedMatrices photon_dose_matrices(const Phantom& phantom, const BeamModel& beam);

/// Proton kernel: per spot, entrance plateau up to the Bragg depth, Gaussian
/// peak, near-zero distal dose; columns L-inf normalized to 1 Gy.
GeneratedMatrices proton_dose_matrices(const Phantom& phantom, const BeamModel& beam);

/// 1-D depth-dose profiles behind the generators (exposed for testing).
double photon_depth_dose(double depth_cm, const BeamModel& beam);
double proton_depth_profile(double depth_cm, double bragg_depth_cm, const BeamModel& beam);

/// Morphological dilation of one structure by a Euclidean disk of
/// `radius` voxels; claimed voxels are removed from other structures.
/// Dilation is clipped at the grid boundary.
Phantom expand_margin(const Phantom& phantom, const std::string& structure, int radius);

/// Everything needed to instantiate the default two-modality problem.
struct ScenarioConfig {
    PhantomConfig phantom;
    BeamModel photon_beam;
    BeamModel proton_beam;

    double alpha1 = 0.35;                 // Gy^-1, tumor linear, modality 1
    double tumor_alpha_beta_ratio = 10.0;  // Gy
    double gamma1 = 0.35;                 // Gy^-1, OAR linear
    std::map<std::string, double> oar_gamma_delta_ratio = {
        {"cord", 2.0}, {"parotid_l", 5.0}, {"parotid_r", 5.0}, {"unspecified", 2.0}};
    std::vector<ConstraintSpec> constraints = {
        {"cord", ConstraintKind::Max, 35.0},
        {"parotid_l", ConstraintKind::Mean, 12.0},
        {"parotid_r", ConstraintKind::Mean, 12.0},
        {"unspecified", ConstraintKind::Max, 13.125}};

    double T_d = 5.0;
    int N_max = 25;
    double feas_tol = 1e-6;

    double alpha2 = 0.35;  // modality-2 tumor linear coefficient
    double r = 1.0;        // modality-2 OAR quadratic scaling (relative damage)
    int margin = 0;        // extra target margin for modality 2, voxels

    ScenarioConfig() {
        photon_beam.kind = BeamModel::Kind::Photon;
        proton_beam.kind = BeamModel::Kind::Proton;
    }
};

/// Sweep-style parameter overrides applied on top of a base scenario.
struct ScenarioOverrides {
    std::optional<double> T_d;
    std::optional<double> alpha2;
    std::optional<double> r;
    std::optional<int> margin;
};

/// Parse a textual override ("t_d", "alpha2", "r", "margin"); unknown keys
/// raise ConfigError.
void apply_scenario_override(ScenarioOverrides& o, const std::string& key,
                             const std::string& value);

/// Build the full two-modality ProblemSpec for a scenario. Modality 2's
/// matrices are generated against the margin-expanded target when margin > 0
/// and re-aligned to the base phantom's masks (claimed OAR voxels get zero
/// rows and zero coefficients for modality 2 only).
ProblemSpec scenario(const ScenarioConfig& base, const ScenarioOverrides& overrides = {});

/// Problem restricted to a single modality (baseline courses).
ProblemSpec restrict_to_modality(const ProblemSpec& spec, int modality);

/// Stacked initial fluence: per modality an unconstrained NNLS fit of a
/// uniform prescription over its target, scaled by 1/M.
Vec initial_fluence(const ProblemSpec& spec, double prescription_gy = 70.0);

}  // namespace rtplan
