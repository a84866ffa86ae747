#pragma once

#include "harmonica/energy.hpp"
#include "harmonica/knowledge.hpp"
#include "harmonica/mape.hpp"
#include "harmonica/pipeline.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace harmonica {

using Json = nlohmann::json;

/// Everything needed to replay one experiment.
struct RunConfig {
    std::string dataset_id;
    /// Dataset file, used by the CLI when no service-side id applies.
    std::string dataset_path;
    /// Absent: the service's active approach.
    std::optional<AdaptationPolicy> policy;
    /// Absent: the service's current goal set.
    std::optional<std::vector<SustainabilityGoal>> goals;
    mape::MapeConfig mape;
    std::vector<DriftSpec> drift_specs;
    std::uint64_t seed = 42;
    energy::EnergyConfig energy;
    ModelId initial_model = ModelId::lin;
    double split_fraction = 0.6;
    double ridge_lambda = 1.0;
    int mlp_epochs = 200;
    double mlp_step = 0.2;

    models::FitOptions fit_options() const;
};

/// Built-in approaches: `static:<model>`, `switch`, `harmone`.
/// Throws Error{not_found} for other names.
AdaptationPolicy builtin_policy(const std::string& name, int switch_interval = 50);
/// Goal set that accompanies the harmone approach in the default scenario.
std::vector<SustainabilityGoal> harmone_default_goals();

// JSON <-> domain types. Parsers throw Error{validation} naming the field path.
SustainabilityGoal goal_from_json(const Json& j, const std::string& path = "");
std::vector<SustainabilityGoal> goals_from_json(const Json& j);
Json to_json(const SustainabilityGoal& g);
Json to_json(std::span<const SustainabilityGoal> goals);

/// Accepts a built-in name (JSON string) or a policy document.
AdaptationPolicy policy_from_json(const Json& j);
Json to_json(const AdaptationPolicy& p);

energy::EnergyConfig energy_from_json(const Json& j, const std::string& path = "energy");
Json to_json(const energy::EnergyConfig& e);

DriftSpec drift_from_json(const Json& j, const std::string& path);
Json to_json(const DriftSpec& d);

RunConfig run_config_from_json(const Json& j);
Json to_json(const RunConfig& c);

Json to_json(const TelemetryRecord& r);
Json to_json(const AdaptationEvent& e);

/// Parses text as JSON, mapping syntax errors to Error{validation}.
Json parse_json(std::string_view text);

} // namespace harmonica
