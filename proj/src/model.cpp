#include "rtplan/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace rtplan {

namespace {

std::string shape_msg(const std::string& what, long got, long want) {
    std::ostringstream os;
    os << what << ": got " << got << ", expected " << want;
    return os.str();
}

}  // namespace

const std::vector<int>& Phantom::mask(const std::string& name) const {
    auto it = masks.find(name);
    if (it == masks.end()) throw ConfigError("unknown structure '" + name + "'");
    return it->second;
}

void Phantom::validate() const {
    if (rows <= 0 || cols <= 0 || voxel_size <= 0)
        throw ConfigError("phantom grid must be positive-sized");
    std::set<int> seen;
    for (const auto& [name, mask] : masks) {
        for (int v : mask) {
            if (v < 0 || v >= grid_size())
                throw ConfigError("mask '" + name + "' exceeds the grid");
            if (!seen.insert(v).second)
                throw ConfigError("structure masks overlap at voxel " + std::to_string(v));
        }
    }
    if (!has_mask(tumor_name) || mask(tumor_name).empty())
        throw ConfigError("tumor mask '" + tumor_name + "' is missing or empty");
}

void ModalityData::validate() const {
    auto check_matrix = [&](const SpMat& A, const std::string& what) {
        if (A.cols() != T.cols())
            throw DimensionError("modality '" + name + "' " +
                                 shape_msg(what + " columns", A.cols(), T.cols()));
        for (int k = 0; k < A.outerSize(); ++k)
            for (SpMat::InnerIterator it(A, k); it; ++it)
                if (!(it.value() >= 0) || !std::isfinite(it.value()))
                    throw DomainError("modality '" + name + "' " + what +
                                      " has a negative or non-finite entry");
    };
    if (T.rows() != static_cast<long>(tumor_voxels.size()))
        throw DimensionError("modality '" + name + "' " +
                             shape_msg("tumor rows", T.rows(), tumor_voxels.size()));
    check_matrix(T, "tumor matrix");
    if (alpha.size() != T.rows() || beta.size() != T.rows())
        throw DimensionError("modality '" + name + "' alpha/beta length mismatch");
    if ((alpha.array() <= 0).any() || (beta.array() <= 0).any())
        throw DomainError("modality '" + name + "' alpha/beta must be strictly positive");
    for (const auto& [oar, Hm] : H) {
        check_matrix(Hm, "matrix for '" + oar + "'");
        auto g = gamma.find(oar);
        auto d = delta.find(oar);
        if (g == gamma.end() || d == delta.end())
            throw ConfigError("modality '" + name + "' missing gamma/delta for '" + oar + "'");
        if (g->second.size() != Hm.rows() || d->second.size() != Hm.rows())
            throw DimensionError("modality '" + name + "' gamma/delta length mismatch for '" +
                                 oar + "'");
        if ((g->second.array() < 0).any() || (d->second.array() < 0).any())
            throw DomainError("modality '" + name + "' gamma/delta must be nonnegative");
    }
}

int ProblemSpec::total_beamlets() const {
    int n = 0;
    for (const auto& m : modalities) n += m.beamlets();
    return n;
}

void ProblemSpec::validate() const {
    phantom.validate();
    if (modalities.empty()) throw ConfigError("need at least one modality");
    if (N_max < 1) throw ConfigError("N_max must be >= 1");
    if (T_d <= 0) throw ConfigError("T_d must be positive");
    for (const auto& m : modalities) m.validate();
    for (const auto& c : constraints) {
        if (c.tolerance <= 0)
            throw ConfigError("constraint '" + c.oar_name + "' tolerance must be positive");
        if (!phantom.has_mask(c.oar_name))
            throw ConfigError("constraint references unknown structure '" + c.oar_name + "'");
        for (const auto& m : modalities) {
            if (!m.H.count(c.oar_name))
                throw ConfigError("modality '" + m.name + "' has no dose matrix for '" +
                                  c.oar_name + "'");
            if (m.H.at(c.oar_name).rows() !=
                static_cast<long>(phantom.mask(c.oar_name).size()))
                throw DimensionError("modality '" + m.name + "' matrix for '" + c.oar_name +
                                     "' does not cover the mask");
        }
    }
}

FractionationPlan FractionationPlan::of(std::initializer_list<double> n) {
    FractionationPlan p;
    p.N.resize(static_cast<long>(n.size()));
    int i = 0;
    for (double v : n) p.N[i++] = v;
    return p;
}

bool FractionationPlan::is_integer(double tol) const {
    for (int i = 0; i < N.size(); ++i)
        if (std::abs(N[i] - std::round(N[i])) > tol) return false;
    return true;
}

void FractionationPlan::validate(int N_max) const {
    constexpr double slack = 1e-9;
    if ((N.array() < -slack).any())
        throw DomainError("fraction counts must be nonnegative");
    const double s = N.sum();
    if (s < 1.0 - slack || s > N_max + slack)
        throw DomainError("total fractions " + std::to_string(s) + " outside [1, " +
                          std::to_string(N_max) + "]");
}

GeneralizedSystem::GeneralizedSystem(const ProblemSpec& spec, const FractionationPlan& plan)
    : spec_(&spec) {
    if (plan.size() != spec.modality_count())
        throw DimensionError(shape_msg("plan length", plan.size(), spec.modality_count()));
    plan.validate(spec.N_max);
    N_ = plan.N.cwiseMax(0.0);  // clip fp slack

    const int M = spec.modality_count();
    u_offsets_.assign(M + 1, 0);
    t_offsets_.assign(M + 1, 0);
    for (int m = 0; m < M; ++m) {
        u_offsets_[m + 1] = u_offsets_[m] + spec.modalities[m].beamlets();
        t_offsets_[m + 1] = t_offsets_[m] + static_cast<int>(spec.modalities[m].T.rows());
    }
    alpha_tilde_.resize(t_offsets_[M]);
    B_diag_.resize(t_offsets_[M]);
    for (int m = 0; m < M; ++m) {
        const auto& md = spec.modalities[m];
        alpha_tilde_.segment(t_offsets_[m], md.T.rows()) = -N_[m] * md.alpha;
        B_diag_.segment(t_offsets_[m], md.T.rows()) = N_[m] * md.beta;
    }

    int flat = 0;
    for (const auto& c : spec.constraints) {
        OarGroup g;
        g.name = c.oar_name;
        g.kind = c.kind;
        g.C = c.tolerance;
        g.voxels = spec.phantom.mask(c.oar_name);
        g.first_flat = flat;
        for (int m = 0; m < M; ++m) {
            const auto& md = spec.modalities[m];
            g.H.push_back(&md.H.at(c.oar_name));
            g.gamma_scaled.push_back(N_[m] * md.gamma.at(c.oar_name));
            g.delta_scaled.push_back(N_[m] * md.delta.at(c.oar_name));
        }
        const int gi = static_cast<int>(groups_.size());
        if (c.kind == ConstraintKind::Mean) {
            constraints_.push_back({c.kind, c.oar_name, -1, gi, -1, c.tolerance});
            ++flat;
        } else {
            for (int j = 0; j < g.rows(); ++j) {
                constraints_.push_back({c.kind, c.oar_name, g.voxels[j], gi, j, c.tolerance});
                ++flat;
            }
        }
        groups_.push_back(std::move(g));
    }
}

Vec GeneralizedSystem::apply_T(const Vec& u) const {
    if (u.size() != total_beamlets())
        throw DimensionError(shape_msg("fluence length", u.size(), total_beamlets()));
    Vec out(tumor_rows());
    for (int m = 0; m < modality_count(); ++m)
        out.segment(t_offsets_[m], tumor_row_count(m)) =
            spec_->modalities[m].T * u_block(u, m);
    return out;
}

std::vector<Vec> GeneralizedSystem::apply_H(const OarGroup& g, const Vec& u) const {
    if (u.size() != total_beamlets())
        throw DimensionError(shape_msg("fluence length", u.size(), total_beamlets()));
    std::vector<Vec> doses(modality_count());
    for (int m = 0; m < modality_count(); ++m) doses[m] = *g.H[m] * u_block(u, m);
    return doses;
}

void GeneralizedSystem::constraint_coeffs(int flat, Vec& gamma_tilde, Vec& D_diag) const {
    const auto& ref = constraints_.at(flat);
    const auto& g = groups_[ref.group];
    const int M = modality_count();
    if (ref.kind == ConstraintKind::Mean) {
        const int dim = g.rows() * M;
        gamma_tilde.resize(dim);
        D_diag.resize(dim);
        for (int m = 0; m < M; ++m) {
            gamma_tilde.segment(m * g.rows(), g.rows()) = g.gamma_scaled[m];
            D_diag.segment(m * g.rows(), g.rows()) = g.delta_scaled[m];
        }
    } else {
        gamma_tilde.resize(M);
        D_diag.resize(M);
        for (int m = 0; m < M; ++m) {
            gamma_tilde[m] = g.gamma_scaled[m][ref.row];
            D_diag[m] = g.delta_scaled[m][ref.row];
        }
    }
}

double proliferation(double N_total, double T_d, int tumor_voxels) {
    if (N_total < 1.0 - 1e-9) throw DomainError("total fractions below 1");
    if (T_d <= 0) throw DomainError("doubling time must be positive");
    if (tumor_voxels < 1) throw DomainError("tumor must have at least one voxel");
    return tumor_voxels * (N_total - 1.0) * M_LN2 / T_d;
}

double tumor_be(const Vec& u, const GeneralizedSystem& sys) {
    const Vec d = sys.apply_T(u);
    return -sys.alpha_tilde().dot(d) + d.dot(sys.B_diag().cwiseProduct(d));
}

double objective_F(const Vec& u, const GeneralizedSystem& sys) {
    return -tumor_be(u, sys) +
           proliferation(sys.plan().sum(), sys.spec().T_d,
                         sys.spec().phantom.tumor_voxel_count());
}

Vec constraint_be(const Vec& u, const GeneralizedSystem& sys) {
    Vec out(sys.constraint_count());
    const int M = sys.modality_count();
    for (const auto& g : sys.groups()) {
        const auto doses = sys.apply_H(g, u);
        if (g.kind == ConstraintKind::Mean) {
            double be = 0.0;
            for (int m = 0; m < M; ++m)
                be += g.gamma_scaled[m].dot(doses[m]) +
                      doses[m].dot(g.delta_scaled[m].cwiseProduct(doses[m]));
            out[g.first_flat] = be;
        } else {
            for (int j = 0; j < g.rows(); ++j) {
                double be = 0.0;
                for (int m = 0; m < M; ++m) {
                    const double d = doses[m][j];
                    be += g.gamma_scaled[m][j] * d + g.delta_scaled[m][j] * d * d;
                }
                out[g.first_flat + j] = be;
            }
        }
    }
    return out;
}

bool all_constraints_satisfied(const Vec& values, const GeneralizedSystem& sys,
                               double feas_tol) {
    for (int i = 0; i < sys.constraint_count(); ++i)
        if (values[i] > sys.constraints()[i].C * (1.0 + feas_tol)) return false;
    return true;
}

GeneralizedSystem assemble(const ProblemSpec& spec, const FractionationPlan& plan) {
    return GeneralizedSystem(spec, plan);
}

void SolveDiagnostics::absorb(const SolveDiagnostics& other) {
    bcd_sweeps += other.bcd_sweeps;
    lower_solves += other.lower_solves;
    feasibility_rounds += other.feasibility_rounds;
    optimality_rounds += other.optimality_rounds;
    value_evals += other.value_evals;
    hit_sweep_cap = hit_sweep_cap || other.hit_sweep_cap;
    max_rel_obj_increase = std::max(max_rel_obj_increase, other.max_rel_obj_increase);
    warnings.insert(warnings.end(), other.warnings.begin(), other.warnings.end());
}

}  // namespace rtplan
