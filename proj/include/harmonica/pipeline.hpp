#pragma once

#include "harmonica/energy.hpp"
#include "harmonica/knowledge.hpp"
#include "harmonica/model_spectrum.hpp"

#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace harmonica {

struct TimePoint {
    std::string timestamp;
    double flow = 0.0;
};

/// flow -> scale * flow + shift for dataset indices in [start_index, end_index).
struct DriftSpec {
    std::int64_t start_index = 0;
    std::int64_t end_index = 1;
    double scale = 1.0;
    double shift = 0.0;
};

/// Applies the drift specs. Throws Error{validation} for empty, out-of-range or
/// overlapping ranges.
std::vector<TimePoint> ingest(std::span<const TimePoint> points, std::span<const DriftSpec> drifts);

/// Sample j: lags = flow[j..j+5), target = flow[j+5]. Needs at least 6 points.
std::vector<WindowSample> make_windows(std::span<const TimePoint> points);

/// Parses the `timestamp,flow` upload format. Errors cite the 1-based line.
std::vector<TimePoint> parse_dataset_csv(std::string_view text);
std::vector<TimePoint> load_dataset_csv(const std::string& path);
std::string dataset_csv(std::span<const TimePoint> points);

struct DeployedModel {
    models::ModelVersion version;
    std::int64_t deployed_at_seq = 0;
};

/// The managed system: runs the deployed model over replayed samples and
/// writes telemetry into the knowledge store.
class ManagedPipeline {
public:
    ManagedPipeline(KnowledgeStore& store, models::FitOptions fit_options, std::uint64_t seed);

    /// One inference. Back-fills the previous record with its ground truth (the
    /// previous sample's target), then appends this sample's record with actual empty.
    TelemetryRecord step(const WindowSample& sample, const std::string& timestamp);

    /// Back-fills the newest record with the ground truth that arrived with the
    /// current sample. step() does this itself when it has not been done yet.
    void complete_previous();

    /// Returns the previously deployed version id (0 when nothing was deployed).
    std::int64_t swap_model(const models::ModelVersion& version);

    /// Fits `model_id` on `samples`, stores the version and queues its training
    /// energy for the next telemetry record.
    models::ModelVersion retrain(ModelId model_id, std::span<const WindowSample> samples);

    /// Training outside the replay (warm-up); stored but never charged to telemetry.
    models::ModelVersion train_offline(ModelId model_id, std::span<const WindowSample> samples);

    std::optional<DeployedModel> deployed() const;
    /// Training energy not yet absorbed by a telemetry record.
    double pending_training_j() const { return pending_j_; }

private:
    struct Pending {
        std::int64_t version_id;
        ModelId model_id;
        double joules;
    };

    models::ModelVersion train(ModelId model_id, std::span<const WindowSample> samples);

    KnowledgeStore& store_;
    models::FitOptions fit_options_;
    std::uint64_t seed_;

    mutable std::mutex deploy_mutex_;
    std::optional<DeployedModel> deployed_;
    std::optional<models::ModelParams> params_;

    std::optional<double> pending_truth_;
    std::vector<Pending> pending_charges_;
    double pending_j_ = 0.0;
    double cumulative_j_ = 0.0;
};

} // namespace harmonica
