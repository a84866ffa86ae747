#include "harmonica/energy.hpp"

#include "harmonica/error.hpp"

#include <cmath>
#include <string>

namespace harmonica::energy {

void validate(const EnergyConfig& cfg) {
    if (!(cfg.joules_per_unit > 0.0) || !std::isfinite(cfg.joules_per_unit)) {
        throw Error(ErrorKind::validation, "joules_per_unit must be a finite value > 0",
                    "energy.joules_per_unit");
    }
    if (!(cfg.nominal_watts > 0.0) || !std::isfinite(cfg.nominal_watts)) {
        throw Error(ErrorKind::validation, "nominal_watts must be a finite value > 0",
                    "energy.nominal_watts");
    }
    if (!(cfg.latency_ms_per_unit >= 0.0) || !std::isfinite(cfg.latency_ms_per_unit)) {
        throw Error(ErrorKind::validation, "latency_ms_per_unit must be finite and >= 0",
                    "energy.latency_ms_per_unit");
    }
}

double measure_inference(const ModelDescriptor& descriptor, const EnergyConfig& cfg,
                         std::optional<double> elapsed_seconds) {
    if (cfg.mode == Mode::wall_clock_informational && elapsed_seconds) {
        return *elapsed_seconds * cfg.nominal_watts;
    }
    return static_cast<double>(descriptor.inference_cost_units) * cfg.joules_per_unit;
}

double measure_training(const ModelDescriptor& descriptor, long n_samples, int epochs,
                        const EnergyConfig& cfg) {
    if (n_samples < 1) {
        throw Error(ErrorKind::input, "training energy needs n_samples >= 1");
    }
    if (epochs < 1) {
        throw Error(ErrorKind::input, "training energy needs epochs >= 1");
    }
    return static_cast<double>(descriptor.training_cost_units_per_sample) *
           static_cast<double>(n_samples) * static_cast<double>(epochs) * cfg.joules_per_unit;
}

double inference_latency_ms(const ModelDescriptor& descriptor, const EnergyConfig& cfg,
                            double measured_ms) {
    if (cfg.mode == Mode::wall_clock_informational) {
        return measured_ms;
    }
    return static_cast<double>(descriptor.inference_cost_units) * cfg.latency_ms_per_unit;
}

std::string_view to_string(Mode mode) noexcept {
    return mode == Mode::cost_model ? "cost_model" : "wall_clock_informational";
}

std::optional<Mode> parse_mode(std::string_view text) noexcept {
    if (text == "cost_model") return Mode::cost_model;
    if (text == "wall_clock_informational") return Mode::wall_clock_informational;
    return std::nullopt;
}

} // namespace harmonica::energy
