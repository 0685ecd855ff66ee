#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "hybridsens/integrator.hpp"
#include "hybridsens/models.hpp"
#include "hybridsens/oracle.hpp"

namespace hybridsens {

struct OutputConfig {
    std::string dir = "out";
    std::string prefix;  // defaults to the model type
    bool multipliers = true;
};

struct CompareConfig {
    std::string method = "fd";  // fd | complex
    double eps = 0.0;           // 0: 1e-5 (1 + |rho_i|) for fd, 1e-20 for complex
    double threshold = 1e-3;
    double t_end = 0.0;         // complex span end; 0: just before the first event
    double exclusion_factor = 5.0;
};

/// Model parameters keep the JSON form so that a dumped scenario re-parses
/// to the same configuration.
struct Scenario {
    std::string model_type;
    nlohmann::ordered_json model_params;
    Formulation formulation;
    IntegratorConfig integrator;
    double t0 = 0.0;
    double tf = 1.0;
    OutputConfig outputs;
    CompareConfig compare;
};

Scenario parse_scenario(const nlohmann::ordered_json& j);
Scenario load_scenario(const std::string& path);
nlohmann::ordered_json scenario_to_json(const Scenario& s);
nlohmann::ordered_json default_scenario(const std::string& model_type);

/// Overrides "key=value": a bare key addresses the model parameters,
/// "section.key" any other section.
void apply_override(Scenario& s, const std::string& assignment);

ModelDefinition build_model(const Scenario& s);
BallConfig ball_config_from_json(const nlohmann::ordered_json& j);
FiveBarConfig five_bar_config_from_json(const nlohmann::ordered_json& j);
PendulumConfig pendulum_config_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json to_json(const FiveBarConfig& c);

/// Column count: 2 + 2n + 1 + 2np + p (+ m with multipliers).
void write_trajectory_csv(std::ostream& os, const TrajectoryArchive& arc, int m_columns);
void write_events_csv(std::ostream& os, const TrajectoryArchive& arc);

/// Command bodies; the return value is the process exit code.
int run_command(const Scenario& s, std::ostream& out);
int compare_command(const Scenario& s, std::ostream& out);
int validate_command(const Scenario& s, std::ostream& out);

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitCompareFailed = 3;

}  // namespace hybridsens
