#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace harmonica {

/// Members of the model spectrum, in tier order.
enum class ModelId : std::uint8_t { lin = 0, ridge2 = 1, mlp = 2 };

inline constexpr int kModelCount = 3;
inline constexpr std::size_t kLags = 5;

constexpr std::string_view to_string(ModelId id) noexcept {
    switch (id) {
        case ModelId::lin: return "lin";
        case ModelId::ridge2: return "ridge2";
        case ModelId::mlp: return "mlp";
    }
    return "unknown";
}

std::optional<ModelId> parse_model_id(std::string_view text) noexcept;

/// Static properties of a spectrum member. Cost units are multiply-accumulate
/// counts; the energy meter converts them into joules.
struct ModelDescriptor {
    ModelId model_id;
    int tier;
    int inference_cost_units;
    /// Units per training sample per epoch.
    int training_cost_units_per_sample;
    /// Passes over the data made by fit(); 1 for the closed-form models.
    int training_epochs;
};

using Lags = std::array<double, kLags>;

/// Five consecutive flow readings (oldest first) and the reading that follows them.
struct WindowSample {
    Lags lags{};
    double target = 0.0;
};

/// Statistical fingerprint of a set of input windows.
struct DataSignature {
    double mean = 0.0;
    double std = 0.0;
    double p10 = 0.0;
    double p50 = 0.0;
    double p90 = 0.0;
    std::int64_t n = 0;

    friend bool operator==(const DataSignature&, const DataSignature&) = default;
};

} // namespace harmonica
