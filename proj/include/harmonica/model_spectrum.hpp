#pragma once

#include "harmonica/energy.hpp"
#include "harmonica/kernels.hpp"
#include "harmonica/model_types.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

namespace harmonica::models {

inline constexpr std::size_t kRidgeFeatures = 20;
inline constexpr std::size_t kMlpHidden = 32;

/// Ordinary least squares on the raw lags.
struct LinearParams {
    std::array<double, kLags> coef{};
    double intercept = 0.0;
};

/// Ridge regression on the 5 lags plus the 15 products lag_i * lag_j (i <= j).
/// Coefficients live in standardized feature space; `intercept` is the
/// training-target mean and is not penalized.
struct Ridge2Params {
    std::array<double, kRidgeFeatures> mean{};
    std::array<double, kRidgeFeatures> scale{};
    std::array<double, kRidgeFeatures> coef{};
    double intercept = 0.0;
};

/// One-hidden-layer tanh regressor. The network sees the window relative to its
/// last reading (lag_i - lag_5 for i < 5, then lag_5), standardized, and predicts
/// the standardized one-step change; prediction = lag_5 + change.
struct MlpParams {
    std::array<double, kLags> in_mean{};
    std::array<double, kLags> in_scale{};
    double out_mean = 0.0;
    double out_scale = 1.0;
    kernels::MlpLayers net;
};

using ModelParams = std::variant<LinearParams, Ridge2Params, MlpParams>;

/// A trained spectrum member plus the fingerprint of the data it was trained on.
struct ModelVersion {
    std::int64_t version_id = 0;
    ModelId model_id = ModelId::lin;
    /// Telemetry sequence number at training time; -1 for warm-up training.
    std::int64_t trained_at_seq = -1;
    DataSignature signature;
    /// Serialized parameters, see serialize().
    std::vector<std::uint8_t> weights;
    double training_cost_j = 0.0;
};

struct FitOptions {
    double ridge_lambda = 1.0;
    int mlp_epochs = 200;
    double mlp_step = 0.2;
    energy::EnergyConfig energy;
};

/// The three spectrum members in tier order.
const std::array<ModelDescriptor, kModelCount>& spectrum();
const ModelDescriptor& descriptor(ModelId id);

/// Minimum number of samples accepted by fit().
inline constexpr std::size_t kMinFitSamples = 10;

/// Trains `model_id` on `samples`. The returned version has version_id 0 (the
/// knowledge store assigns ids) and trained_at_seq -1.
/// Throws Error{insufficient_data} for fewer than kMinFitSamples samples and
/// Error{input} for non-finite values.
ModelVersion fit(ModelId model_id, std::span<const WindowSample> samples, std::uint64_t seed,
                 const FitOptions& options = {});

ModelParams fit_params(ModelId model_id, std::span<const WindowSample> samples,
                       std::uint64_t seed, const FitOptions& options = {});

/// Full-batch gradient-descent training; `loss_history`, when given, receives
/// the loss evaluated before each epoch's update followed by the final loss.
MlpParams train_mlp(std::span<const WindowSample> samples, std::uint64_t seed,
                    const FitOptions& options, std::vector<double>* loss_history = nullptr);

ModelId model_of(const ModelParams& params) noexcept;

double predict(const ModelParams& params, const Lags& lags);
/// Decodes the version's weights and predicts. Throws Error{input} on a
/// non-finite lag and Error{validation} on undecodable weights.
double predict(const ModelVersion& version, const Lags& lags);

/// Weight block layout (all integers and reals little-endian):
///   8 bytes   model tag, ASCII model id padded with NUL
///   uint32    number of shape dimensions d
///   d*uint32  shape (lin: [5], ridge2: [5, 20], mlp: [5, 32])
///   float64*  parameters in declaration order
std::vector<std::uint8_t> serialize(const ModelParams& params);
/// Throws Error{validation} when the block is malformed or holds non-finite reals.
ModelParams deserialize(std::span<const std::uint8_t> bytes);

/// Pooled statistics over every lag value of every sample; quantiles use the
/// nearest-rank definition and std is the population standard deviation.
DataSignature signature(std::span<const WindowSample> samples);

/// max(|a.mean - b.mean| / max(b.std, eps), |ln((a.std + eps) / (b.std + eps))|), eps = 1e-6.
double signature_distance(const DataSignature& a, const DataSignature& b);

std::array<double, kRidgeFeatures> ridge2_features(const Lags& lags);

/// Ridge coefficients mapped back to raw feature units.
struct RawCoefficients {
    std::array<double, kRidgeFeatures> coef{};
    double intercept = 0.0;
};
RawCoefficients raw_coefficients(const Ridge2Params& params);

} // namespace harmonica::models
