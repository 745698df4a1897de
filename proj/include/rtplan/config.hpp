#pragma once

#include <map>
#include <string>
#include <vector>

#include "rtplan/bench.hpp"

namespace rtplan {

/// Sectioned key-value configuration:
///   [section name]
///   key = value        # comment
/// Values stay raw strings until typed access.
class Config {
public:
    static Config parse(std::istream& is);
    static Config parse_file(const std::string& path);

    bool has(const std::string& section, const std::string& key) const;
    std::string get_str(const std::string& section, const std::string& key,
                        const std::string& fallback) const;
    double get_num(const std::string& section, const std::string& key,
                   double fallback) const;
    int get_int(const std::string& section, const std::string& key, int fallback) const;
    std::vector<double> get_list(const std::string& section, const std::string& key,
                                 const std::vector<double>& fallback) const;
    void set(const std::string& section, const std::string& key, const std::string& value);

    /// "section.key=value" or a bare scenario key ("t_d=5", "r=0.5", ...).
    void apply_override(const std::string& assignment);

    /// Sorted "section.key = value" dump of every resolved entry.
    std::string manifest() const;

    const std::map<std::string, std::map<std::string, std::string>>& sections() const {
        return sections_;
    }

private:
    std::map<std::string, std::map<std::string, std::string>> sections_;
};

/// Built-in default configuration (the head-and-neck scenario).
Config default_config();

/// Builders from configuration.
ScenarioConfig scenario_from_config(const Config& cfg);
ScenarioOverrides scenario_overrides_from_config(const Config& cfg);
AutoParamOptions lower_options_from_config(const Config& cfg);
UpperConfig upper_from_config(const Config& cfg);
SweepSpec sweep_from_config(const Config& cfg);

/// Build the problem either from `[modality <name>]` sections that import
/// externally computed dose matrices (sparse triplet files, with
/// per-structure or scalar-broadcast coefficients), or from the synthetic
/// scenario pipeline when no such sections exist. Relative matrix paths
/// resolve against `base_dir`.
ProblemSpec problem_from_config(const Config& cfg, const std::string& base_dir = ".");

/// True when the config carries imported-modality sections.
bool has_imported_modalities(const Config& cfg);

}  // namespace rtplan
