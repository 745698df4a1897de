#include "rtplan/config.hpp"

#include <fstream>
#include <sstream>

#include "rtplan/sparse_io.hpp"

namespace rtplan {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

std::string strip_comment(const std::string& s) {
    const auto h = s.find('#');
    return h == std::string::npos ? s : s.substr(0, h);
}

}  // namespace

Config Config::parse(std::istream& is) {
    Config cfg;
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        line = trim(strip_comment(line));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("line " + std::to_string(lineno) + ": unterminated section");
            section = trim(line.substr(1, line.size() - 2));
            cfg.sections_[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        cfg.sections_[section][key] = value;
    }
    return cfg;
}

Config Config::parse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config '" + path + "'");
    try {
        return parse(is);
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

bool Config::has(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    return s != sections_.end() && s->second.count(key);
}

std::string Config::get_str(const std::string& section, const std::string& key,
                            const std::string& fallback) const {
    auto s = sections_.find(section);
    if (s == sections_.end()) return fallback;
    auto k = s->second.find(key);
    return k == s->second.end() ? fallback : k->second;
}

double Config::get_num(const std::string& section, const std::string& key,
                       double fallback) const {
    if (!has(section, key)) return fallback;
    const std::string raw = get_str(section, key, "");
    try {
        size_t used = 0;
        const double v = std::stod(raw, &used);
        if (trim(raw.substr(used)).empty()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError("bad number '" + raw + "' for " + section + "." + key);
}

int Config::get_int(const std::string& section, const std::string& key, int fallback) const {
    const double v = get_num(section, key, fallback);
    const int i = static_cast<int>(v);
    if (v != i) throw ConfigError(section + "." + key + " must be an integer");
    return i;
}

std::vector<double> Config::get_list(const std::string& section, const std::string& key,
                                     const std::vector<double>& fallback) const {
    if (!has(section, key)) return fallback;
    std::string raw = get_str(section, key, "");
    for (char& c : raw)
        if (c == ',') c = ' ';
    std::istringstream is(raw);
    std::vector<double> out;
    double v;
    while (is >> v) out.push_back(v);
    if (!is.eof())
        throw ConfigError("bad list '" + raw + "' for " + section + "." + key);
    return out;
}

void Config::set(const std::string& section, const std::string& key,
                 const std::string& value) {
    sections_[section][key] = value;
}

void Config::apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("override must look like key=value: '" + assignment + "'");
    std::string key = trim(assignment.substr(0, eq));
    const std::string value = trim(assignment.substr(eq + 1));
    const auto dot = key.find('.');
    if (dot != std::string::npos) {
        set(key.substr(0, dot), key.substr(dot + 1), value);
        return;
    }
    // Bare scenario keys land in [problem].
    if (key == "T_d") key = "t_d";
    if (key == "N_max") key = "n_max";
    static const char* known[] = {"t_d", "n_max", "alpha2", "r", "margin", "feas_tol"};
    for (const char* k : known)
        if (key == k) {
            set("problem", key, value);
            return;
        }
    throw ConfigError("unknown override key '" + key + "'");
}

std::string Config::manifest() const {
    std::ostringstream os;
    for (const auto& [section, kv] : sections_)
        for (const auto& [key, value] : kv)
            os << (section.empty() ? "" : section + ".") << key << " = " << value << "\n";
    return os.str();
}

Config default_config() {
    static const char* text = R"cfg(
[problem]
t_d = 5
n_max = 25
feas_tol = 1e-6
alpha2 = 0.35
r = 1.0
margin = 0

[phantom]
rows = 60
cols = 60
voxel_size = 0.25
body = 7.5 7.5 7.0
tumor = 7.5 7.0 2.0
cord = 7.5 10.5 1.0
parotid_left = 3.5 7.0 1.25
parotid_right = 11.5 7.0 1.25
skin_thickness = 1.0

[photon]
mu = 0.05
buildup = 1.5
lateral_sigma_vox = 1.0
angles = 0 51 103 153 206 257 309
beamlets_per_angle = 28
beamlet_spacing = 0.25

[proton]
angle = 0
spots = 40
peak_width = 0.4
entrance_plateau = 0.3
distal_sigma_factor = 0.5
lateral_sigma = 0.4

[radiobiology]
alpha1 = 0.35
tumor_alpha_beta_ratio = 10
gamma1 = 0.35
gd_ratio.cord = 2
gd_ratio.parotid_l = 5
gd_ratio.parotid_r = 5
gd_ratio.unspecified = 2

[constraint cord]
kind = max
tolerance = 35

[constraint parotid_l]
kind = mean
tolerance = 12

[constraint parotid_r]
kind = mean
tolerance = 12

[constraint unspecified]
kind = max
tolerance = 13.125

[lower]
delta_eta = 0.5
init_eta_scale = 0.5
bcd_tol = 1e-6
bcd_max_iters = 2000
feas_bcd_max_iters = 300
feas_max_rounds = 60
opt_max_rounds = 30
opt_stall_rounds = 3
opt_stall_tol = 1e-4

[upper]
fd_step = 0.25
tr_max_iters = 8
tr_radius_init = 2.0
tr_shrink = 0.5
tr_grow = 2.0
tr_accept = 0.1
tr_radius_min = 0.1
grid_cap = 5000

[sweep]
param = td
values = 2 5 10 50 100
margin_voxels = 2
)cfg";
    std::istringstream is(text);
    return Config::parse(is);
}

namespace {

Disk disk_from(const Config& cfg, const std::string& key, const Disk& fallback) {
    const auto v = cfg.get_list("phantom", key,
                                {fallback.x_cm, fallback.y_cm, fallback.radius_cm});
    if (v.size() != 3)
        throw ConfigError("phantom." + key + " must be 'x_cm y_cm radius_cm'");
    return {v[0], v[1], v[2]};
}

}  // namespace

ScenarioConfig scenario_from_config(const Config& cfg) {
    ScenarioConfig sc;
    sc.phantom.rows = cfg.get_int("phantom", "rows", sc.phantom.rows);
    sc.phantom.cols = cfg.get_int("phantom", "cols", sc.phantom.cols);
    sc.phantom.voxel_size = cfg.get_num("phantom", "voxel_size", sc.phantom.voxel_size);
    sc.phantom.body = disk_from(cfg, "body", sc.phantom.body);
    sc.phantom.tumor = disk_from(cfg, "tumor", sc.phantom.tumor);
    sc.phantom.cord = disk_from(cfg, "cord", sc.phantom.cord);
    sc.phantom.parotid_left = disk_from(cfg, "parotid_left", sc.phantom.parotid_left);
    sc.phantom.parotid_right = disk_from(cfg, "parotid_right", sc.phantom.parotid_right);
    sc.phantom.skin_thickness_cm =
        cfg.get_num("phantom", "skin_thickness", sc.phantom.skin_thickness_cm);

    auto& ph = sc.photon_beam;
    ph.mu = cfg.get_num("photon", "mu", ph.mu);
    ph.buildup_cm = cfg.get_num("photon", "buildup", ph.buildup_cm);
    ph.lateral_sigma_vox = cfg.get_num("photon", "lateral_sigma_vox", ph.lateral_sigma_vox);
    ph.gantry_angles_deg = cfg.get_list("photon", "angles", ph.gantry_angles_deg);
    ph.beamlets_per_angle = cfg.get_int("photon", "beamlets_per_angle", ph.beamlets_per_angle);
    ph.beamlet_spacing_cm = cfg.get_num("photon", "beamlet_spacing", ph.beamlet_spacing_cm);

    auto& pr = sc.proton_beam;
    pr.proton_angle_deg = cfg.get_num("proton", "angle", pr.proton_angle_deg);
    pr.spot_count = cfg.get_int("proton", "spots", pr.spot_count);
    pr.peak_width_cm = cfg.get_num("proton", "peak_width", pr.peak_width_cm);
    pr.entrance_plateau = cfg.get_num("proton", "entrance_plateau", pr.entrance_plateau);
    pr.distal_sigma_factor =
        cfg.get_num("proton", "distal_sigma_factor", pr.distal_sigma_factor);
    pr.spot_lateral_sigma_cm = cfg.get_num("proton", "lateral_sigma", pr.spot_lateral_sigma_cm);

    sc.alpha1 = cfg.get_num("radiobiology", "alpha1", sc.alpha1);
    sc.tumor_alpha_beta_ratio =
        cfg.get_num("radiobiology", "tumor_alpha_beta_ratio", sc.tumor_alpha_beta_ratio);
    sc.gamma1 = cfg.get_num("radiobiology", "gamma1", sc.gamma1);
    for (const auto& [key, value] : cfg.sections().count("radiobiology")
                                        ? cfg.sections().at("radiobiology")
                                        : std::map<std::string, std::string>{}) {
        if (key.rfind("gd_ratio.", 0) == 0)
            sc.oar_gamma_delta_ratio[key.substr(9)] =
                cfg.get_num("radiobiology", key, 2.0);
    }

    std::vector<ConstraintSpec> constraints;
    for (const auto& [section, kv] : cfg.sections()) {
        if (section.rfind("constraint ", 0) != 0) continue;
        ConstraintSpec c;
        c.oar_name = trim(section.substr(11));
        const std::string kind = cfg.get_str(section, "kind", "");
        if (kind == "mean")
            c.kind = ConstraintKind::Mean;
        else if (kind == "max")
            c.kind = ConstraintKind::Max;
        else
            throw ConfigError(section + ".kind must be 'mean' or 'max'");
        c.tolerance = cfg.get_num(section, "tolerance", 0.0);
        if (c.tolerance <= 0) throw ConfigError(section + ".tolerance must be positive");
        constraints.push_back(std::move(c));
    }
    if (!constraints.empty()) sc.constraints = std::move(constraints);

    sc.T_d = cfg.get_num("problem", "t_d", sc.T_d);
    sc.N_max = cfg.get_int("problem", "n_max", sc.N_max);
    sc.feas_tol = cfg.get_num("problem", "feas_tol", sc.feas_tol);
    sc.alpha2 = cfg.get_num("problem", "alpha2", sc.alpha2);
    sc.r = cfg.get_num("problem", "r", sc.r);
    sc.margin = cfg.get_int("problem", "margin", sc.margin);
    return sc;
}

ScenarioOverrides scenario_overrides_from_config(const Config& cfg) {
    ScenarioOverrides o;
    if (cfg.has("scenario", "t_d")) o.T_d = cfg.get_num("scenario", "t_d", 0);
    if (cfg.has("scenario", "alpha2")) o.alpha2 = cfg.get_num("scenario", "alpha2", 0);
    if (cfg.has("scenario", "r")) o.r = cfg.get_num("scenario", "r", 0);
    if (cfg.has("scenario", "margin")) o.margin = cfg.get_int("scenario", "margin", 0);
    return o;
}

AutoParamOptions lower_options_from_config(const Config& cfg) {
    AutoParamOptions lo;
    lo.delta_eta = cfg.get_num("lower", "delta_eta", lo.delta_eta);
    lo.init_eta_scale = cfg.get_num("lower", "init_eta_scale", lo.init_eta_scale);
    lo.bcd_tol = cfg.get_num("lower", "bcd_tol", lo.bcd_tol);
    lo.bcd_max_iters = cfg.get_int("lower", "bcd_max_iters", lo.bcd_max_iters);
    lo.feas_bcd_max_iters = cfg.get_int("lower", "feas_bcd_max_iters", lo.feas_bcd_max_iters);
    lo.feas_tol = cfg.get_num("problem", "feas_tol", lo.feas_tol);
    lo.feas_max_rounds = cfg.get_int("lower", "feas_max_rounds", lo.feas_max_rounds);
    lo.opt_max_rounds = cfg.get_int("lower", "opt_max_rounds", lo.opt_max_rounds);
    lo.opt_stall_rounds = cfg.get_int("lower", "opt_stall_rounds", lo.opt_stall_rounds);
    lo.opt_stall_tol = cfg.get_num("lower", "opt_stall_tol", lo.opt_stall_tol);
    if (lo.delta_eta <= 0 || lo.delta_eta >= 1)
        throw ConfigError("lower.delta_eta must lie in (0,1)");
    if (lo.init_eta_scale <= 0 || lo.init_eta_scale >= 1)
        throw ConfigError("lower.init_eta_scale must lie in (0,1)");
    return lo;
}

UpperConfig upper_from_config(const Config& cfg) {
    UpperConfig up;
    up.fd_step = cfg.get_num("upper", "fd_step", up.fd_step);
    up.tr_max_iters = cfg.get_int("upper", "tr_max_iters", up.tr_max_iters);
    up.tr_radius_init = cfg.get_num("upper", "tr_radius_init", up.tr_radius_init);
    up.tr_shrink = cfg.get_num("upper", "tr_shrink", up.tr_shrink);
    up.tr_grow = cfg.get_num("upper", "tr_grow", up.tr_grow);
    up.tr_accept = cfg.get_num("upper", "tr_accept", up.tr_accept);
    up.tr_radius_min = cfg.get_num("upper", "tr_radius_min", up.tr_radius_min);
    up.grid_cap = cfg.get_int("upper", "grid_cap", static_cast<int>(up.grid_cap));
    up.lower = lower_options_from_config(cfg);
    return up;
}

bool has_imported_modalities(const Config& cfg) {
    for (const auto& [section, kv] : cfg.sections())
        if (section.rfind("modality ", 0) == 0) return true;
    return false;
}

namespace {

// Coefficient vector for one structure: explicit per-structure value, a
// ratio of the linear coefficient, or the scalar broadcast.
Vec coefficient_vector(const Config& cfg, const std::string& section,
                       const std::string& key, const std::string& structure, long rows,
                       double fallback) {
    double value = fallback;
    if (cfg.has(section, key + "." + structure))
        value = cfg.get_num(section, key + "." + structure, fallback);
    else if (cfg.has(section, key))
        value = cfg.get_num(section, key, fallback);
    if (value < 0)
        throw ConfigError(section + ": " + key + " for '" + structure +
                          "' must be nonnegative");
    return Vec::Constant(rows, value);
}

std::string resolve_path(const std::string& base_dir, const std::string& path) {
    if (path.empty() || path.front() == '/') return path;
    return base_dir + "/" + path;
}

}  // namespace

ProblemSpec problem_from_config(const Config& cfg, const std::string& base_dir) {
    const ScenarioConfig sc = scenario_from_config(cfg);
    if (!has_imported_modalities(cfg))
        return scenario(sc, scenario_overrides_from_config(cfg));

    ProblemSpec spec;
    spec.phantom = build_phantom(sc.phantom);
    spec.constraints = sc.constraints;
    spec.T_d = sc.T_d;
    spec.N_max = sc.N_max;
    spec.feas_tol = sc.feas_tol;

    for (const auto& [section, kv] : cfg.sections()) {
        if (section.rfind("modality ", 0) != 0) continue;
        ModalityData md;
        md.name = section.substr(9);
        const std::string tumor_path = cfg.get_str(section, "tumor_matrix", "");
        if (tumor_path.empty())
            throw ConfigError(section + " needs a tumor_matrix file");
        md.T = read_sparse_file(resolve_path(base_dir, tumor_path));
        md.tumor_voxels = spec.phantom.mask(spec.phantom.tumor_name);
        if (md.T.rows() != static_cast<long>(md.tumor_voxels.size()))
            throw ConfigError(section + ": tumor matrix rows do not match the mask");
        const double alpha = cfg.get_num(section, "alpha", 0.35);
        const double beta = cfg.has(section, "beta")
                                ? cfg.get_num(section, "beta", 0.035)
                                : alpha / cfg.get_num(section, "alpha_beta_ratio", 10.0);
        md.alpha = Vec::Constant(md.T.rows(), alpha);
        md.beta = Vec::Constant(md.T.rows(), beta);
        for (const auto& [key, value] : kv) {
            if (key.rfind("matrix.", 0) != 0) continue;
            const std::string oar = key.substr(7);
            const auto& mask = spec.phantom.mask(oar);
            SpMat H = read_sparse_file(resolve_path(base_dir, value));
            if (H.rows() != static_cast<long>(mask.size()))
                throw ConfigError(section + ": matrix for '" + oar +
                                  "' does not match the mask");
            md.H[oar] = std::move(H);
            md.gamma[oar] =
                coefficient_vector(cfg, section, "gamma", oar, mask.size(), 0.35);
            md.delta[oar] =
                coefficient_vector(cfg, section, "delta", oar, mask.size(), 0.175);
        }
        spec.modalities.push_back(std::move(md));
    }
    if (spec.modalities.empty()) throw ConfigError("no modality sections found");
    spec.validate();
    return spec;
}

SweepSpec sweep_from_config(const Config& cfg) {
    SweepSpec sweep;
    const std::string p = cfg.get_str("sweep", "param", "td");
    if (p == "td" || p == "t_d")
        sweep.param = SweepParam::Td;
    else if (p == "alpha2")
        sweep.param = SweepParam::Alpha2;
    else if (p == "r")
        sweep.param = SweepParam::R;
    else if (p == "margin_r" || p == "margin-r")
        sweep.param = SweepParam::MarginR;
    else
        throw ConfigError("sweep.param must be td, alpha2, r, or margin_r");
    sweep.values = cfg.get_list("sweep", "values", {2, 5, 10, 50, 100});
    sweep.margin_voxels = cfg.get_int("sweep", "margin_voxels", sweep.margin_voxels);
    if (sweep.values.empty()) throw ConfigError("sweep.values is empty");
    return sweep;
}

}  // namespace rtplan
