#pragma once

#include "harmonica/model_types.hpp"

#include <optional>

namespace harmonica::energy {

enum class Mode { cost_model, wall_clock_informational };

/// Joule-proxy configuration. In cost_model mode every reading is a pure
/// function of the model descriptor, so whole runs are reproducible.
struct EnergyConfig {
    Mode mode = Mode::cost_model;
    double joules_per_unit = 0.1;
    /// Power draw assumed when converting elapsed time to pseudo-joules
    /// (wall_clock_informational only).
    double nominal_watts = 15.0;
    /// Deterministic latency proxy used in cost_model mode.
    double latency_ms_per_unit = 0.002;
};

/// Throws Error{validation} when joules_per_unit (or another positive field) is not > 0.
void validate(const EnergyConfig& cfg);

/// In cost_model mode: inference_cost_units * joules_per_unit, exactly.
/// In wall_clock_informational mode `elapsed_seconds` is converted with nominal_watts
/// (falls back to the cost model when no timing is supplied).
double measure_inference(const ModelDescriptor& descriptor, const EnergyConfig& cfg,
                         std::optional<double> elapsed_seconds = std::nullopt);

/// training_cost_units_per_sample * n_samples * epochs * joules_per_unit.
/// Requires n_samples >= 1 and epochs >= 1.
double measure_training(const ModelDescriptor& descriptor, long n_samples, int epochs,
                        const EnergyConfig& cfg);

/// Latency attributed to one inference. cost_model mode uses the proxy so
/// telemetry stays byte-reproducible; wall-clock mode reports the measurement.
double inference_latency_ms(const ModelDescriptor& descriptor, const EnergyConfig& cfg,
                            double measured_ms);

std::string_view to_string(Mode mode) noexcept;
std::optional<Mode> parse_mode(std::string_view text) noexcept;

} // namespace harmonica::energy
