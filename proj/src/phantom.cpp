#include "rtplan/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "rtplan/nnls.hpp"

namespace rtplan {

namespace {

struct Pos {
    double x, y;
};

Pos voxel_center(int v, int cols, double vs) {
    const int r = v / cols;
    const int c = v % cols;
    return {(c + 0.5) * vs, (r + 0.5) * vs};
}

double dist(const Pos& a, double x, double y) {
    return std::hypot(a.x - x, a.y - y);
}

void check_inside_grid(const Disk& d, const PhantomConfig& cfg, const std::string& name) {
    const double w = cfg.cols * cfg.voxel_size;
    const double h = cfg.rows * cfg.voxel_size;
    if (d.x_cm - d.radius_cm < 0 || d.x_cm + d.radius_cm > w || d.y_cm - d.radius_cm < 0 ||
        d.y_cm + d.radius_cm > h)
        throw ConfigError("structure '" + name + "' does not fit inside the grid");
}

}  // namespace

Phantom build_phantom(const PhantomConfig& cfg) {
    if (cfg.rows <= 0 || cfg.cols <= 0 || cfg.voxel_size <= 0)
        throw ConfigError("phantom grid must be positive-sized");

    Phantom ph;
    ph.rows = cfg.rows;
    ph.cols = cfg.cols;
    ph.voxel_size = cfg.voxel_size;
    ph.tumor_name = "tumor";

    struct Entry {
        std::string name;
        const Disk* disk;
    };
    // Priority order resolves boundary voxels.
    const std::vector<Entry> order = {{"tumor", &cfg.tumor},
                                      {"cord", &cfg.cord},
                                      {"parotid_l", &cfg.parotid_left},
                                      {"parotid_r", &cfg.parotid_right}};
    for (const auto& e : order)
        if (e.disk->radius_cm > 0) check_inside_grid(*e.disk, cfg, e.name);
    if (cfg.body.radius_cm > 0) check_inside_grid(cfg.body, cfg, "body");

    std::vector<char> taken(cfg.rows * cfg.cols, 0);
    for (const auto& e : order) {
        if (e.disk->radius_cm <= 0) continue;
        std::vector<int> mask;
        for (int v = 0; v < cfg.rows * cfg.cols; ++v) {
            if (taken[v]) continue;
            const Pos p = voxel_center(v, cfg.cols, cfg.voxel_size);
            if (dist(p, e.disk->x_cm, e.disk->y_cm) <= e.disk->radius_cm) {
                mask.push_back(v);
                taken[v] = 1;
            }
        }
        if (!mask.empty()) ph.masks[e.name] = std::move(mask);
    }

    if (cfg.body.radius_cm > 0 && cfg.skin_thickness_cm > 0) {
        const double inner = cfg.body.radius_cm - cfg.skin_thickness_cm;
        std::vector<int> skin;
        for (int v = 0; v < cfg.rows * cfg.cols; ++v) {
            if (taken[v]) continue;
            const Pos p = voxel_center(v, cfg.cols, cfg.voxel_size);
            const double d = dist(p, cfg.body.x_cm, cfg.body.y_cm);
            if (d >= inner && d <= cfg.body.radius_cm) {
                skin.push_back(v);
                taken[v] = 1;
            }
        }
        if (!skin.empty()) ph.masks["unspecified"] = std::move(skin);
    }

    ph.validate();
    return ph;
}

double photon_depth_dose(double depth_cm, const BeamModel& beam) {
    if (depth_cm < 0) return 0.0;
    const double buildup =
        beam.buildup_cm > 0 ? std::min(depth_cm / beam.buildup_cm, 1.0) : 1.0;
    return buildup * std::exp(-beam.mu * std::max(0.0, depth_cm - beam.buildup_cm));
}

double proton_depth_profile(double depth_cm, double bragg_depth_cm, const BeamModel& beam) {
    if (depth_cm < 0) return 0.0;
    const double w = beam.peak_width_cm;
    const double delta = depth_cm - bragg_depth_cm;
    if (delta <= 0) {
        const double peak = std::exp(-delta * delta / (2.0 * w * w));
        return std::max(beam.entrance_plateau, peak);
    }
    const double wd = beam.distal_sigma_factor * w;
    return std::exp(-delta * delta / (2.0 * wd * wd));
}

namespace {

struct BodyGeometry {
    Pos center;
    double radius;
    std::vector<int> voxels;       // inside the external contour
    std::vector<Pos> rel;          // voxel center minus body center
};

BodyGeometry body_geometry(const Phantom& phantom, const PhantomConfig* cfg_hint) {
    BodyGeometry g;
    if (cfg_hint) {
        g.center = {cfg_hint->body.x_cm, cfg_hint->body.y_cm};
        g.radius = cfg_hint->body.radius_cm;
    } else {
        g.center = {phantom.cols * phantom.voxel_size * 0.5,
                    phantom.rows * phantom.voxel_size * 0.5};
        g.radius = 0.5 * std::min(phantom.cols, phantom.rows) * phantom.voxel_size;
    }
    for (int v = 0; v < phantom.grid_size(); ++v) {
        const Pos p = voxel_center(v, phantom.cols, phantom.voxel_size);
        if (dist(p, g.center.x, g.center.y) <= g.radius) {
            g.voxels.push_back(v);
            g.rel.push_back({p.x - g.center.x, p.y - g.center.y});
        }
    }
    return g;
}

GeneratedMatrices slice_columns(const Phantom& phantom,
                                const std::vector<Vec>& columns,  // per beamlet, grid-sized
                                const std::string& target_name) {
    GeneratedMatrices out;
    out.target_voxels = phantom.mask(target_name);
    const int n = static_cast<int>(columns.size());

    auto build = [&](const std::vector<int>& voxels) {
        std::vector<Triplet> trips;
        for (int b = 0; b < n; ++b)
            for (size_t i = 0; i < voxels.size(); ++i) {
                const double val = columns[b][voxels[i]];
                if (val > 1e-12) trips.emplace_back(static_cast<int>(i), b, val);
            }
        SpMat A(static_cast<long>(voxels.size()), n);
        A.setFromTriplets(trips.begin(), trips.end());
        A.makeCompressed();
        return A;
    };

    out.T = build(out.target_voxels);
    for (const auto& [name, mask] : phantom.masks)
        if (name != target_name) out.H[name] = build(mask);
    return out;
}

}  // namespace

GeneratedMatrices photon_dose_matrices(const Phantom& phantom, const BeamModel& beam) {
    if (beam.kind != BeamModel::Kind::Photon)
        throw ConfigError("photon generator called with a non-photon beam model");
    const BodyGeometry body = body_geometry(phantom, nullptr);
    const double sigma = beam.lateral_sigma_vox * phantom.voxel_size;
    const int per_angle = beam.beamlets_per_angle;

    std::vector<Vec> columns;
    for (const double angle_deg : beam.gantry_angles_deg) {
        const double a = angle_deg * M_PI / 180.0;
        const double dx = std::sin(a), dy = std::cos(a);    // beam direction
        const double px = std::cos(a), py = -std::sin(a);   // lateral axis
        int deposited = 0;
        for (int k = 0; k < per_angle; ++k) {
            const double t = (k - (per_angle - 1) / 2.0) * beam.beamlet_spacing_cm;
            if (std::abs(t) >= body.radius) continue;  // beamlet misses the contour
            const double half_chord =
                std::sqrt(body.radius * body.radius - t * t);
            Vec col = Vec::Zero(phantom.grid_size());
            double peak = 0.0;
            for (size_t i = 0; i < body.voxels.size(); ++i) {
                const Pos& rel = body.rel[i];
                const double lateral = rel.x * px + rel.y * py - t;
                if (std::abs(lateral) > 4.0 * sigma) continue;
                const double depth = rel.x * dx + rel.y * dy + half_chord;
                const double dose = photon_depth_dose(depth, beam) *
                                    std::exp(-lateral * lateral / (2.0 * sigma * sigma));
                if (dose > 0) {
                    col[body.voxels[i]] = dose;
                    peak = std::max(peak, dose);
                }
            }
            if (peak > 0) {
                col /= peak;
                columns.push_back(std::move(col));
                ++deposited;
            }
        }
        if (deposited == 0)
            throw ConfigError("photon beam at " + std::to_string(angle_deg) +
                              " deg misses the phantom entirely");
    }
    return slice_columns(phantom, columns, phantom.tumor_name);
}

GeneratedMatrices proton_dose_matrices(const Phantom& phantom, const BeamModel& beam) {
    if (beam.kind != BeamModel::Kind::Proton)
        throw ConfigError("proton generator called with a non-proton beam model");
    const BodyGeometry body = body_geometry(phantom, nullptr);
    const double a = beam.proton_angle_deg * M_PI / 180.0;
    const double dx = std::sin(a), dy = std::cos(a);
    const double px = std::cos(a), py = -std::sin(a);
    const double sigma = beam.spot_lateral_sigma_cm;

    std::vector<std::pair<double, double>> spots = beam.spot_positions;
    if (spots.empty()) {
        // Evenly strided voxels of the target mask.
        const auto& mask = phantom.mask(phantom.tumor_name);
        const int n = std::min<int>(beam.spot_count, static_cast<int>(mask.size()));
        for (int s = 0; s < n; ++s) {
            const size_t idx = static_cast<size_t>(
                (s + 0.5) * static_cast<double>(mask.size()) / n);
            const Pos p = voxel_center(mask[std::min(idx, mask.size() - 1)], phantom.cols,
                                       phantom.voxel_size);
            spots.emplace_back(p.x, p.y);
        }
    }

    std::vector<Vec> columns;
    for (const auto& [sx, sy] : spots) {
        if (sx < 0 || sy < 0 || sx > phantom.cols * phantom.voxel_size ||
            sy > phantom.rows * phantom.voxel_size)
            throw ConfigError("proton spot outside the grid");
        const double rx = sx - body.center.x, ry = sy - body.center.y;
        const double t_spot = rx * px + ry * py;
        if (std::abs(t_spot) >= body.radius)
            throw ConfigError("proton spot outside the external contour");
        const double half_chord = std::sqrt(body.radius * body.radius - t_spot * t_spot);
        const double bragg = rx * dx + ry * dy + half_chord;

        Vec col = Vec::Zero(phantom.grid_size());
        double peak = 0.0;
        for (size_t i = 0; i < body.voxels.size(); ++i) {
            const Pos& rel = body.rel[i];
            const double lateral = rel.x * px + rel.y * py - t_spot;
            if (std::abs(lateral) > 4.0 * sigma) continue;
            const double depth = rel.x * dx + rel.y * dy + half_chord;
            const double dose = proton_depth_profile(depth, bragg, beam) *
                                std::exp(-lateral * lateral / (2.0 * sigma * sigma));
            if (dose > 1e-12) {
                col[body.voxels[i]] = dose;
                peak = std::max(peak, dose);
            }
        }
        if (peak <= 0) throw ConfigError("proton spot deposits no dose");
        col /= peak;
        columns.push_back(std::move(col));
    }
    return slice_columns(phantom, columns, phantom.tumor_name);
}

Phantom expand_margin(const Phantom& phantom, const std::string& structure, int radius) {
    if (radius < 0) throw DomainError("margin radius must be nonnegative");
    const auto& base = phantom.mask(structure);
    if (radius == 0) return phantom;

    std::set<int> dilated(base.begin(), base.end());
    for (int v : base) {
        const int r = v / phantom.cols, c = v % phantom.cols;
        for (int dr = -radius; dr <= radius; ++dr)
            for (int dc = -radius; dc <= radius; ++dc) {
                if (dr * dr + dc * dc > radius * radius) continue;
                const int rr = r + dr, cc = c + dc;
                if (rr < 0 || rr >= phantom.rows || cc < 0 || cc >= phantom.cols) continue;
                dilated.insert(rr * phantom.cols + cc);
            }
    }

    Phantom out = phantom;
    for (auto& [name, mask] : out.masks) {
        if (name == structure) continue;
        std::vector<int> kept;
        kept.reserve(mask.size());
        for (int v : mask)
            if (!dilated.count(v)) kept.push_back(v);
        mask = std::move(kept);
    }
    out.masks[structure].assign(dilated.begin(), dilated.end());
    return out;
}

void apply_scenario_override(ScenarioOverrides& o, const std::string& key,
                             const std::string& value) {
    try {
        if (key == "t_d" || key == "T_d")
            o.T_d = std::stod(value);
        else if (key == "alpha2")
            o.alpha2 = std::stod(value);
        else if (key == "r")
            o.r = std::stod(value);
        else if (key == "margin")
            o.margin = std::stoi(value);
        else
            throw ConfigError("unknown scenario override '" + key + "'");
    } catch (const std::invalid_argument&) {
        throw ConfigError("bad value '" + value + "' for override '" + key + "'");
    }
}

namespace {

// Re-align matrices generated on a (possibly margin-expanded) phantom to the
// base phantom's mask: missing voxels become zero rows.
SpMat align_rows(const SpMat& A, const std::vector<int>& from_voxels,
                 const std::vector<int>& to_voxels) {
    std::map<int, int> to_row;
    for (size_t i = 0; i < to_voxels.size(); ++i)
        to_row[to_voxels[i]] = static_cast<int>(i);
    std::vector<int> row_map(A.rows(), -1);
    for (size_t i = 0; i < from_voxels.size(); ++i) {
        auto it = to_row.find(from_voxels[i]);
        if (it != to_row.end()) row_map[i] = it->second;
    }
    std::vector<Triplet> trips;
    for (int k = 0; k < A.outerSize(); ++k)
        for (SpMat::InnerIterator jt(A, k); jt; ++jt)
            if (row_map[jt.row()] >= 0)
                trips.emplace_back(row_map[jt.row()], jt.col(), jt.value());
    SpMat out(static_cast<long>(to_voxels.size()), A.cols());
    out.setFromTriplets(trips.begin(), trips.end());
    out.makeCompressed();
    return out;
}

Vec mean_normalized(double value, int count, bool mean_kind) {
    return Vec::Constant(count, mean_kind ? value / count : value);
}

}  // namespace

ProblemSpec scenario(const ScenarioConfig& base, const ScenarioOverrides& overrides) {
    ScenarioConfig cfg = base;
    if (overrides.T_d) cfg.T_d = *overrides.T_d;
    if (overrides.alpha2) cfg.alpha2 = *overrides.alpha2;
    if (overrides.r) cfg.r = *overrides.r;
    if (overrides.margin) cfg.margin = *overrides.margin;
    if (cfg.T_d <= 0) throw ConfigError("T_d must be positive");
    if (cfg.alpha2 <= 0) throw ConfigError("alpha2 must be positive");
    if (cfg.r <= 0) throw ConfigError("r must be positive");
    if (cfg.margin < 0) throw ConfigError("margin must be nonnegative");

    const Phantom phantom = build_phantom(cfg.phantom);

    std::map<std::string, ConstraintKind> kinds;
    for (const auto& c : cfg.constraints) kinds[c.oar_name] = c.kind;

    auto make_modality = [&](const std::string& name, const GeneratedMatrices& gm,
                             const Phantom& gen_phantom, double alpha, double oar_quad_scale) {
        ModalityData md;
        md.name = name;
        md.tumor_voxels = gm.target_voxels;
        md.T = gm.T;
        md.alpha = Vec::Constant(md.T.rows(), alpha);
        md.beta = Vec::Constant(md.T.rows(), alpha / cfg.tumor_alpha_beta_ratio);
        for (const auto& [oar, H_gen] : gm.H) {
            const auto& full_mask = phantom.mask(oar);
            const bool mean_kind =
                kinds.count(oar) && kinds[oar] == ConstraintKind::Mean;
            const auto ratio_it = cfg.oar_gamma_delta_ratio.find(oar);
            if (ratio_it == cfg.oar_gamma_delta_ratio.end())
                throw ConfigError("no gamma/delta ratio configured for '" + oar + "'");
            const double delta_base = cfg.gamma1 / ratio_it->second;
            SpMat H = align_rows(H_gen, gen_phantom.mask(oar), full_mask);
            Vec g = mean_normalized(cfg.gamma1, static_cast<int>(full_mask.size()), mean_kind);
            Vec d = mean_normalized(oar_quad_scale * delta_base,
                                    static_cast<int>(full_mask.size()), mean_kind);
            // Voxels claimed by the margin target are not OAR voxels for
            // this modality: zero coefficients.
            std::set<int> present(gen_phantom.mask(oar).begin(),
                                  gen_phantom.mask(oar).end());
            for (size_t i = 0; i < full_mask.size(); ++i)
                if (!present.count(full_mask[i])) {
                    g[static_cast<long>(i)] = 0.0;
                    d[static_cast<long>(i)] = 0.0;
                }
            md.H[oar] = std::move(H);
            md.gamma[oar] = std::move(g);
            md.delta[oar] = std::move(d);
        }
        return md;
    };

    ProblemSpec spec;
    spec.phantom = phantom;
    spec.constraints = cfg.constraints;
    spec.T_d = cfg.T_d;
    spec.N_max = cfg.N_max;
    spec.feas_tol = cfg.feas_tol;

    const GeneratedMatrices m1 = photon_dose_matrices(phantom, cfg.photon_beam);
    spec.modalities.push_back(make_modality("M1", m1, phantom, cfg.alpha1, 1.0));

    const Phantom gen2 =
        cfg.margin > 0 ? expand_margin(phantom, phantom.tumor_name, cfg.margin) : phantom;
    const GeneratedMatrices m2 = proton_dose_matrices(gen2, cfg.proton_beam);
    spec.modalities.push_back(make_modality("M2", m2, gen2, cfg.alpha2, cfg.r));

    spec.validate();
    return spec;
}

ProblemSpec restrict_to_modality(const ProblemSpec& spec, int modality) {
    if (modality < 0 || modality >= spec.modality_count())
        throw DomainError("modality index out of range");
    ProblemSpec out = spec;
    out.modalities = {spec.modalities[modality]};
    return out;
}

Vec initial_fluence(const ProblemSpec& spec, double prescription_gy) {
    const int M = spec.modality_count();
    Vec u(spec.total_beamlets());
    int off = 0;
    for (const auto& md : spec.modalities) {
        const Mat T = Mat(md.T);
        const Vec target = Vec::Constant(T.rows(), prescription_gy);
        Mat G = T.transpose() * T;
        // Near-duplicate neighboring beamlets make the plain fit spiky; a
        // small ridge picks the least-norm fit instead.
        G.diagonal().array() += 1e-6 * G.trace() / static_cast<double>(G.rows());
        const Vec c = T.transpose() * target;
        NnlsSolver solver;
        u.segment(off, md.beamlets()) = solver.solve_gram(G, c, 0) / M;
        off += md.beamlets();
    }
    return u;
}

}  // namespace rtplan
