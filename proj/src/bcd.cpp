#include "rtplan/bcd.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "rtplan/project.hpp"
#include "rtplan/prox.hpp"

namespace rtplan {

BcdWorkspace::BcdWorkspace(const GeneralizedSystem& sys) : sys_(&sys) {
    const int M = sys.modality_count();
    tumor_gram_.reserve(M);
    for (int m = 0; m < M; ++m) {
        const SpMat& T = sys.spec().modalities[m].T;
        tumor_gram_.push_back(Mat(SpMat(T.transpose() * T)));
    }
    mean_gram_.resize(sys.groups().size());
    for (size_t g = 0; g < sys.groups().size(); ++g) {
        if (sys.groups()[g].kind != ConstraintKind::Mean) continue;
        for (int m = 0; m < M; ++m) {
            const SpMat& H = *sys.groups()[g].H[m];
            mean_gram_[g].push_back(Mat(SpMat(H.transpose() * H)));
        }
    }
    normal_.resize(M);
    nnls_.resize(M);
}

void BcdWorkspace::refresh(const RelaxationParams& params) {
    if (eta0_cache_ == params.eta0 && eta_cache_.size() == params.eta.size() &&
        eta_cache_ == params.eta)
        return;
    const int M = sys_->modality_count();
    for (int m = 0; m < M; ++m) {
        if (sys_->plan()[m] == 0.0) continue;  // block frozen, never solved
        Mat G = tumor_gram_[m] / params.eta0;
        for (size_t g = 0; g < sys_->groups().size(); ++g) {
            const auto& grp = sys_->groups()[g];
            if (grp.kind == ConstraintKind::Mean) {
                G += mean_gram_[g][m] / params.eta[grp.first_flat];
            } else {
                Vec wts(grp.rows());
                for (int j = 0; j < grp.rows(); ++j)
                    wts[j] = 1.0 / params.eta[grp.first_flat + j];
                const SpMat& H = *grp.H[m];
                SpMat Hw = wts.asDiagonal() * H;
                G += Mat(SpMat(H.transpose() * Hw));
            }
        }
        normal_[m] = std::move(G);
    }
    eta0_cache_ = params.eta0;
    eta_cache_ = params.eta;
    ++version_;
}

Vec BcdWorkspace::update_u(const LowerState& state, const RelaxationParams& params,
                           const Vec& u_prev) {
    refresh(params);
    const int M = sys_->modality_count();
    Vec u(sys_->total_beamlets());
    for (int m = 0; m < M; ++m) {
        if (sys_->plan()[m] == 0.0) {
            // Zero-fraction modality: its auxiliaries stay consistent with
            // the frozen block, so keeping it is an exact block minimizer.
            u.segment(sys_->beamlet_offset(m), sys_->beamlet_count(m)) =
                sys_->u_block(u_prev, m);
            continue;
        }
        const auto& md = sys_->spec().modalities[m];
        Vec c = md.T.transpose() *
                (state.w0.segment(sys_->tumor_row_offset(m), sys_->tumor_row_count(m)) /
                 params.eta0);
        for (size_t g = 0; g < sys_->groups().size(); ++g) {
            const auto& grp = sys_->groups()[g];
            if (grp.kind == ConstraintKind::Mean) {
                const Vec& wg = state.w[grp.first_flat];
                c += grp.H[m]->transpose() *
                     (wg.segment(m * grp.rows(), grp.rows()) / params.eta[grp.first_flat]);
            } else {
                Vec target(grp.rows());
                for (int j = 0; j < grp.rows(); ++j)
                    target[j] =
                        state.w[grp.first_flat + j][m] / params.eta[grp.first_flat + j];
                c += grp.H[m]->transpose() * target;
            }
        }
        u.segment(sys_->beamlet_offset(m), sys_->beamlet_count(m)) =
            nnls_[m].solve_gram(normal_[m], c, version_);
    }
    return u;
}

double BcdWorkspace::p4_objective(const LowerState& state,
                                  const RelaxationParams& params) const {
    const Vec Tu = sys_->apply_T(state.u);
    double obj = sys_->alpha_tilde().dot(state.w0) -
                 state.w0.dot(sys_->B_diag().cwiseProduct(state.w0)) +
                 (state.w0 - Tu).squaredNorm() / (2.0 * params.eta0);
    for (const auto& grp : sys_->groups()) {
        const auto doses = sys_->apply_H(grp, state.u);
        if (grp.kind == ConstraintKind::Mean) {
            const Vec& wg = state.w[grp.first_flat];
            double ssq = 0.0;
            for (int m = 0; m < sys_->modality_count(); ++m)
                ssq += (wg.segment(m * grp.rows(), grp.rows()) - doses[m]).squaredNorm();
            obj += ssq / (2.0 * params.eta[grp.first_flat]);
        } else {
            for (int j = 0; j < grp.rows(); ++j) {
                const Vec& wj = state.w[grp.first_flat + j];
                double ssq = 0.0;
                for (int m = 0; m < sys_->modality_count(); ++m)
                    ssq += (wj[m] - doses[m][j]) * (wj[m] - doses[m][j]);
                obj += ssq / (2.0 * params.eta[grp.first_flat + j]);
            }
        }
    }
    return obj;
}

namespace {

void validate_params(const GeneralizedSystem& sys, const RelaxationParams& params) {
    if (params.eta0 <= 0) throw DomainError("eta0 must be positive");
    if (params.eta.size() != sys.constraint_count())
        throw DimensionError("eta vector does not match the constraint count");
    if ((params.eta.array() <= 0).any()) throw DomainError("eta entries must be positive");
    if (params.delta_eta <= 0 || params.delta_eta >= 1)
        throw DomainError("delta_eta must lie in (0, 1)");
}

void project_group(const GeneralizedSystem& sys, const GeneralizedSystem::OarGroup& grp,
                   const std::vector<Vec>& doses, std::vector<Vec>& w) {
    const int M = sys.modality_count();
    if (grp.kind == ConstraintKind::Mean) {
        const int rows = grp.rows();
        Vec v(M * rows), gamma(M * rows), D(M * rows);
        for (int m = 0; m < M; ++m) {
            v.segment(m * rows, rows) = doses[m];
            gamma.segment(m * rows, rows) = grp.gamma_scaled[m];
            D.segment(m * rows, rows) = grp.delta_scaled[m];
        }
        w[grp.first_flat] = project_constraint(v, gamma, D, grp.C);
    } else {
        Vec v(M), gamma(M), D(M);
        for (int j = 0; j < grp.rows(); ++j) {
            for (int m = 0; m < M; ++m) {
                v[m] = doses[m][j];
                gamma[m] = grp.gamma_scaled[m][j];
                D[m] = grp.delta_scaled[m][j];
            }
            w[grp.first_flat + j] = project_constraint(v, gamma, D, grp.C);
        }
    }
}

// Doses at the current u, shared by the auxiliary updates and the objective.
struct DoseCache {
    Vec Tu;
    std::vector<std::vector<Vec>> group;  // [group][modality]
};

void compute_doses(const GeneralizedSystem& sys, const Vec& u, DoseCache& cache) {
    cache.Tu = sys.apply_T(u);
    cache.group.resize(sys.groups().size());
    for (size_t g = 0; g < sys.groups().size(); ++g)
        cache.group[g] = sys.apply_H(sys.groups()[g], u);
}

double p4_objective_cached(const GeneralizedSystem& sys, const LowerState& st,
                           const RelaxationParams& params, const DoseCache& cache) {
    double obj = sys.alpha_tilde().dot(st.w0) -
                 st.w0.dot(sys.B_diag().cwiseProduct(st.w0)) +
                 (st.w0 - cache.Tu).squaredNorm() / (2.0 * params.eta0);
    const int M = sys.modality_count();
    for (size_t g = 0; g < sys.groups().size(); ++g) {
        const auto& grp = sys.groups()[g];
        const auto& doses = cache.group[g];
        if (grp.kind == ConstraintKind::Mean) {
            const Vec& wg = st.w[grp.first_flat];
            double ssq = 0.0;
            for (int m = 0; m < M; ++m)
                ssq += (wg.segment(m * grp.rows(), grp.rows()) - doses[m]).squaredNorm();
            obj += ssq / (2.0 * params.eta[grp.first_flat]);
        } else {
            for (int j = 0; j < grp.rows(); ++j) {
                const Vec& wj = st.w[grp.first_flat + j];
                double ssq = 0.0;
                for (int m = 0; m < M; ++m)
                    ssq += (wj[m] - doses[m][j]) * (wj[m] - doses[m][j]);
                obj += ssq / (2.0 * params.eta[grp.first_flat + j]);
            }
        }
    }
    return obj;
}

}  // namespace

BcdResult bcd_solve(const GeneralizedSystem& sys, const RelaxationParams& params,
                    const Vec& u_init, BcdWorkspace* workspace, const IterationSink& sink) {
    validate_params(sys, params);
    if (u_init.size() != sys.total_beamlets())
        throw DimensionError("u_init does not match the beamlet count");
    if ((u_init.array() < -1e-12).any())
        throw DomainError("u_init must be nonnegative");

    std::optional<BcdWorkspace> local_ws;
    if (!workspace) local_ws.emplace(sys);
    BcdWorkspace& ws = workspace ? *workspace : *local_ws;

    BcdResult res;
    LowerState& st = res.state;
    st.u = u_init.cwiseMax(0.0);
    st.w0.resize(sys.tumor_rows());
    st.w.resize(sys.constraint_count());

    // Orders of magnitude above any physical dose scale: the relaxation is
    // unbounded at the current penalties, so hand control back for a
    // penalty update instead of chasing it.
    constexpr double kRunaway = 1e12;
    DoseCache cache;
    compute_doses(sys, st.u, cache);
    double prev_obj = 0.0;
    for (int sweep = 1; sweep <= params.bcd_max_iters; ++sweep) {
        st.w0 = prox_neg_quadratic(cache.Tu - params.eta0 * sys.alpha_tilde(),
                                   sys.B_diag(), params.eta0);
        if (st.w0.lpNorm<Eigen::Infinity>() > kRunaway) {
            res.diag.diverged = true;
            res.diag.hit_cap = true;
            res.diag.final_objective = prev_obj;
            return res;
        }
        for (size_t g = 0; g < sys.groups().size(); ++g)
            project_group(sys, sys.groups()[g], cache.group[g], st.w);
        try {
            st.u = ws.update_u(st, params, st.u);
        } catch (const NumericalError&) {
            res.diag.diverged = true;
            res.diag.hit_cap = true;
            res.diag.final_objective = prev_obj;
            return res;
        }
        compute_doses(sys, st.u, cache);

        const double obj = p4_objective_cached(sys, st, params, cache);
        if (!std::isfinite(obj) || std::abs(obj) > kRunaway * kRunaway) {
            res.diag.diverged = true;
            res.diag.hit_cap = true;
            res.diag.sweeps = sweep;
            res.diag.final_objective = obj;
            return res;
        }
        res.diag.objectives.push_back(obj);
        res.diag.sweeps = sweep;
        if (sink) {
            const Vec be = constraint_be(st.u, sys);
            double viol = 0.0;
            for (int i = 0; i < sys.constraint_count(); ++i)
                viol = std::max(viol, (be[i] - sys.constraints()[i].C) /
                                          sys.constraints()[i].C);
            sink(sweep, obj, viol);
        }
        if (sweep > 1) {
            const double denom = std::max(1.0, std::abs(prev_obj));
            res.diag.max_rel_increase =
                std::max(res.diag.max_rel_increase, (obj - prev_obj) / denom);
            if (std::abs(obj - prev_obj) <= params.bcd_tol * denom) {
                res.diag.converged = true;
                res.diag.final_objective = obj;
                return res;
            }
        }
        prev_obj = obj;
    }
    res.diag.hit_cap = true;
    res.diag.final_objective = prev_obj;
    return res;
}

Vec u_update(const LowerState& state, const GeneralizedSystem& sys,
             const RelaxationParams& params) {
    validate_params(sys, params);
    BcdWorkspace ws(sys);
    return ws.update_u(state, params, state.u);
}

RelaxationParams initial_params(const GeneralizedSystem& sys, double scale,
                                double delta_eta, double bcd_tol, int bcd_max_iters) {
    const double max_b = sys.B_diag().size() ? sys.B_diag().maxCoeff() : 0.0;
    if (max_b <= 0)
        throw DomainError("curvature diagonal is identically zero; no eta threshold");
    RelaxationParams p;
    p.eta0 = scale / (2.0 * max_b);
    p.eta = Vec::Constant(sys.constraint_count(), p.eta0);
    p.delta_eta = delta_eta;
    p.bcd_tol = bcd_tol;
    p.bcd_max_iters = bcd_max_iters;
    return p;
}

}  // namespace rtplan
