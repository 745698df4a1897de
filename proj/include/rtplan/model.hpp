#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rtplan/errors.hpp"
#include "rtplan/linalg.hpp"

namespace rtplan {

/// 2D voxel phantom with disjoint named structure masks.
struct Phantom {
    int rows = 0;
    int cols = 0;
    double voxel_size = 0.0;  // cm per voxel side
    /// structure name -> sorted grid indices (index = row * cols + col)
    std::map<std::string, std::vector<int>> masks;
    std::string tumor_name = "tumor";

    int grid_size() const { return rows * cols; }
    const std::vector<int>& mask(const std::string& name) const;
    bool has_mask(const std::string& name) const { return masks.count(name) != 0; }
    int tumor_voxel_count() const { return static_cast<int>(mask(tumor_name).size()); }

    /// Throws ConfigError if masks overlap, exceed the grid, or the tumor is empty.
    void validate() const;
};

/// Dose mapping matrices and LQ coefficients for one radiation modality.
///
/// T maps beamlet intensities to tumor-voxel dose (Gy per unit intensity);
/// H[oar] maps to that OAR's voxels in the phantom mask order. The tumor
/// voxel set may differ from the phantom's tumor mask (target margins), so
/// the row->grid mapping is kept explicitly.
struct ModalityData {
    std::string name;
    std::vector<int> tumor_voxels;  // grid index per row of T
    SpMat T;
    Vec alpha, beta;  // per tumor row, Gy^-1 / Gy^-2, strictly positive
    std::map<std::string, SpMat> H;
    std::map<std::string, Vec> gamma, delta;  // per OAR row

    int beamlets() const { return static_cast<int>(T.cols()); }
    void validate() const;
};

enum class ConstraintKind { Mean, Max };

/// One organ-at-risk tolerance: mean or per-voxel-max biological effect.
struct ConstraintSpec {
    std::string oar_name;
    ConstraintKind kind = ConstraintKind::Mean;
    double tolerance = 0.0;  // BE units, > 0
};

/// Full problem statement: phantom, modalities, constraints, and the
/// fractionation bounds.
struct ProblemSpec {
    Phantom phantom;
    std::vector<ModalityData> modalities;
    std::vector<ConstraintSpec> constraints;
    double T_d = 5.0;    // tumor doubling time, days
    int N_max = 25;      // max total fractions
    double feas_tol = 1e-6;  // relative constraint-satisfaction tolerance

    int modality_count() const { return static_cast<int>(modalities.size()); }
    int total_beamlets() const;
    void validate() const;
};

/// Fraction counts per modality. Continuous during the upper-level
/// relaxation, integer after rounding.
struct FractionationPlan {
    Vec N;

    static FractionationPlan of(std::initializer_list<double> n);
    int size() const { return static_cast<int>(N.size()); }
    double total() const { return N.sum(); }
    bool is_integer(double tol = 1e-9) const;
    /// N >= 0 and 1 <= sum(N) <= N_max (with a small fp slack).
    void validate(int N_max) const;
};

/// One generalized constraint entry after max-dose expansion: a mean OAR
/// contributes one entry, a max OAR one entry per voxel.
struct GenConstraintRef {
    ConstraintKind kind;
    std::string oar;
    int voxel = -1;  // grid index for max entries, -1 for mean entries
    int group = 0;   // index into GeneralizedSystem::groups
    int row = -1;    // voxel row within the group (max entries)
    double C = 0.0;
};

/// Fixed-N block-diagonal assembly consumed by the lower level.
///
/// The per-modality dose matrices are referenced from the owning
/// ProblemSpec (they do not depend on N); only the coefficient stacks are
/// materialized here. The spec must outlive the system.
class GeneralizedSystem {
public:
    /// Per constrained OAR: rows follow the phantom mask order.
    struct OarGroup {
        std::string name;
        ConstraintKind kind;
        double C = 0.0;
        std::vector<int> voxels;                  // phantom mask
        std::vector<const SpMat*> H;              // per modality
        std::vector<Vec> gamma_scaled, delta_scaled;  // per modality, N_m-scaled
        int first_flat = 0;                       // flat index of first entry
        int rows() const { return static_cast<int>(voxels.size()); }
    };

    GeneralizedSystem(const ProblemSpec& spec, const FractionationPlan& plan);

    const ProblemSpec& spec() const { return *spec_; }
    const Vec& plan() const { return N_; }
    int modality_count() const { return static_cast<int>(N_.size()); }
    int total_beamlets() const { return u_offsets_.back(); }
    int beamlet_offset(int m) const { return u_offsets_[m]; }
    int beamlet_count(int m) const { return u_offsets_[m + 1] - u_offsets_[m]; }

    /// Stacked -N_m * alpha_m over all modality tumor rows.
    const Vec& alpha_tilde() const { return alpha_tilde_; }
    /// Diagonal of B: stacked N_m * beta_m.
    const Vec& B_diag() const { return B_diag_; }
    int tumor_rows() const { return static_cast<int>(alpha_tilde_.size()); }
    int tumor_row_offset(int m) const { return t_offsets_[m]; }
    int tumor_row_count(int m) const { return t_offsets_[m + 1] - t_offsets_[m]; }

    const std::vector<OarGroup>& groups() const { return groups_; }
    /// Flat generalized-constraint list, size n_tilde.
    const std::vector<GenConstraintRef>& constraints() const { return constraints_; }
    int constraint_count() const { return static_cast<int>(constraints_.size()); }

    /// Stacked tumor dose T u (block-diagonal application).
    Vec apply_T(const Vec& u) const;
    /// Per-modality dose blocks H^k_m u_m for one OAR group.
    std::vector<Vec> apply_H(const OarGroup& g, const Vec& u) const;

    /// Generalized gamma_tilde / D diagonal for one flat constraint entry.
    /// Mean entries have dimension sum_m rows(H_m); max entries dimension M.
    void constraint_coeffs(int flat, Vec& gamma_tilde, Vec& D_diag) const;

    Eigen::VectorBlock<const Vec> u_block(const Vec& u, int m) const {
        return u.segment(u_offsets_[m], beamlet_count(m));
    }

private:
    const ProblemSpec* spec_;
    Vec N_;
    std::vector<int> u_offsets_;  // size M+1
    std::vector<int> t_offsets_;  // tumor row offsets, size M+1
    Vec alpha_tilde_, B_diag_;
    std::vector<OarGroup> groups_;
    std::vector<GenConstraintRef> constraints_;
};

/// Tumor proliferation penalty: l * (N_total - 1) * ln2 / T_d.
double proliferation(double N_total, double T_d, int tumor_voxels);

/// Total tumor biological effect -alpha_tilde^T (Tu) + (Tu)^T B (Tu).
double tumor_be(const Vec& u, const GeneralizedSystem& sys);

/// Minimization objective F = -tumor_be + proliferation(sum N).
double objective_F(const Vec& u, const GeneralizedSystem& sys);

/// Per-constraint biological effect, one entry per generalized constraint.
Vec constraint_be(const Vec& u, const GeneralizedSystem& sys);

/// True when every entry of `values` is <= C * (1 + feas_tol).
bool all_constraints_satisfied(const Vec& values, const GeneralizedSystem& sys,
                               double feas_tol);

/// Build the fixed-N generalized system.
GeneralizedSystem assemble(const ProblemSpec& spec, const FractionationPlan& plan);

/// Diagnostics accumulated across lower/upper level solves.
struct SolveDiagnostics {
    long bcd_sweeps = 0;
    int lower_solves = 0;
    int feasibility_rounds = 0;
    int optimality_rounds = 0;
    int value_evals = 0;
    double final_eta0 = 0.0;
    double min_eta = 0.0;
    bool feasible = false;
    bool hit_sweep_cap = false;
    /// Largest relative P4-objective increase seen across BCD sweeps
    /// (monotonicity audit; should stay at fp-noise level).
    double max_rel_obj_increase = 0.0;
    std::vector<std::string> warnings;

    void absorb(const SolveDiagnostics& other);
};

/// Final plan: integer fraction counts, stacked fluence, achieved effects.
struct PlanResult {
    Vec N;
    Vec u;
    double objective = 0.0;
    double tumor_be = 0.0;
    Vec constraint_values;
    SolveDiagnostics diag;

    struct StartTrace {
        Vec start;
        std::vector<Vec> iterates;
        std::vector<double> values;
        Vec rounded;
        double rounded_value = 0.0;
    };
    std::vector<StartTrace> traces;
};

}  // namespace rtplan
