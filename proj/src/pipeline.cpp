#include "harmonica/pipeline.hpp"

#include "harmonica/error.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

namespace harmonica {

std::vector<TimePoint> ingest(std::span<const TimePoint> points, std::span<const DriftSpec> drifts) {
    const auto n = static_cast<std::int64_t>(points.size());
    std::vector<DriftSpec> sorted(drifts.begin(), drifts.end());
    std::sort(sorted.begin(), sorted.end(),
              [](const DriftSpec& a, const DriftSpec& b) { return a.start_index < b.start_index; });
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const auto& d = sorted[i];
        if (d.start_index < 0 || d.end_index <= d.start_index || d.end_index > n) {
            throw Error(ErrorKind::validation,
                        "drift range [" + std::to_string(d.start_index) + ", " +
                            std::to_string(d.end_index) + ") is outside the dataset",
                        "drift_specs");
        }
        if (!std::isfinite(d.scale) || !std::isfinite(d.shift)) {
            throw Error(ErrorKind::validation, "drift scale and shift must be finite", "drift_specs");
        }
        if (i > 0 && d.start_index < sorted[i - 1].end_index) {
            throw Error(ErrorKind::validation, "drift ranges overlap", "drift_specs");
        }
    }
    std::vector<TimePoint> out(points.begin(), points.end());
    for (const auto& d : sorted) {
        for (auto i = d.start_index; i < d.end_index; ++i) {
            auto& f = out[static_cast<std::size_t>(i)].flow;
            f = d.scale * f + d.shift;
        }
    }
    return out;
}

std::vector<WindowSample> make_windows(std::span<const TimePoint> points) {
    if (points.size() < kLags + 1) {
        throw Error(ErrorKind::insufficient_data, "windowing needs at least 6 points, got " +
                                                      std::to_string(points.size()));
    }
    std::vector<WindowSample> out(points.size() - kLags);
    for (std::size_t j = 0; j < out.size(); ++j) {
        for (std::size_t i = 0; i < kLags; ++i) out[j].lags[i] = points[j + i].flow;
        out[j].target = points[j + kLags].flow;
    }
    return out;
}

std::vector<TimePoint> parse_dataset_csv(std::string_view text) {
    std::vector<TimePoint> points;
    std::size_t pos = 0;
    std::size_t line = 0;
    bool header_seen = false;
    while (pos < text.size()) {
        ++line;
        auto eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        auto row = text.substr(pos, eol - pos);
        pos = eol + 1;
        if (!row.empty() && row.back() == '\r') row.remove_suffix(1);
        if (!header_seen) {
            if (row != "timestamp,flow") {
                throw Error(ErrorKind::input, "line 1: expected header 'timestamp,flow'");
            }
            header_seen = true;
            continue;
        }
        if (row.empty()) continue;
        const auto comma = row.rfind(',');
        if (comma == std::string_view::npos) {
            throw Error(ErrorKind::input, "line " + std::to_string(line) + ": expected 'timestamp,flow'");
        }
        auto ts = row.substr(0, comma);
        const auto value = row.substr(comma + 1);
        double flow = 0.0;
        const auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), flow);
        if (value.empty() || ec != std::errc{} || end != value.data() + value.size() ||
            !std::isfinite(flow)) {
            throw Error(ErrorKind::input, "line " + std::to_string(line) + ": flow '" +
                                              std::string(value) + "' is not a finite number");
        }
        if (ts.size() >= 2 && ts.front() == '"' && ts.back() == '"') ts = ts.substr(1, ts.size() - 2);
        points.push_back({std::string(ts), flow});
    }
    if (!header_seen) throw Error(ErrorKind::input, "line 1: expected header 'timestamp,flow'");
    if (points.size() < kLags + 1) {
        throw Error(ErrorKind::insufficient_data,
                    "dataset needs at least 6 rows, got " + std::to_string(points.size()));
    }
    return points;
}

std::vector<TimePoint> load_dataset_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::not_found, "cannot open dataset " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_dataset_csv(buf.str());
}

std::string dataset_csv(std::span<const TimePoint> points) {
    std::string out = "timestamp,flow\n";
    for (const auto& p : points) {
        out += p.timestamp;
        out += ',';
        out += format_real(p.flow);
        out += '\n';
    }
    return out;
}

// --- ManagedPipeline --------------------------------------------------------

ManagedPipeline::ManagedPipeline(KnowledgeStore& store, models::FitOptions fit_options,
                                 std::uint64_t seed)
    : store_(store), fit_options_(std::move(fit_options)), seed_(seed) {
    energy::validate(fit_options_.energy);
    if (const auto last = store_.last_record()) cumulative_j_ = last->cumulative_energy_j;
}

TelemetryRecord ManagedPipeline::step(const WindowSample& sample, const std::string& timestamp) {
    std::unique_lock lock(deploy_mutex_);
    if (!deployed_) throw Error(ErrorKind::runtime, "no model deployed");
    const auto& desc = models::descriptor(deployed_->version.model_id);

    const auto t0 = std::chrono::steady_clock::now();
    const double prediction = models::predict(*params_, sample.lags);
    const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (pending_truth_) {
        store_.backfill_last(*pending_truth_);
        pending_truth_.reset();
    }

    TelemetryRecord r;
    r.seq = store_.telemetry_size();
    r.timestamp = timestamp;
    r.model_id = deployed_->version.model_id;
    r.prediction = prediction;
    r.latency_ms = energy::inference_latency_ms(desc, fit_options_.energy, elapsed * 1e3);
    r.energy_j = energy::measure_inference(desc, fit_options_.energy, elapsed);
    cumulative_j_ += r.energy_j + pending_j_;
    r.cumulative_energy_j = cumulative_j_;
    store_.add_replayed_sample(sample);
    store_.append_telemetry(r);
    for (const auto& c : pending_charges_) {
        store_.add_training_charge({r.seq, c.version_id, c.model_id, c.joules});
    }
    pending_charges_.clear();
    pending_j_ = 0.0;
    pending_truth_ = sample.target;
    return r;
}

void ManagedPipeline::complete_previous() {
    std::unique_lock lock(deploy_mutex_);
    if (pending_truth_) {
        store_.backfill_last(*pending_truth_);
        pending_truth_.reset();
    }
}

std::int64_t ManagedPipeline::swap_model(const models::ModelVersion& version) {
    auto params = models::deserialize(version.weights);
    if (models::model_of(params) != version.model_id) {
        throw Error(ErrorKind::validation, "weights do not match model id");
    }
    std::unique_lock lock(deploy_mutex_);
    const std::int64_t previous = deployed_ ? deployed_->version.version_id : 0;
    if (deployed_ && previous == version.version_id) return previous;
    deployed_ = DeployedModel{version, store_.telemetry_size()};
    params_ = std::move(params);
    return previous;
}

models::ModelVersion ManagedPipeline::train(ModelId model_id, std::span<const WindowSample> samples) {
    auto v = models::fit(model_id, samples, seed_, fit_options_);
    v.trained_at_seq = store_.telemetry_size() > 0 ? store_.telemetry_size() : -1;
    v.version_id = store_.store_version(v);
    return v;
}

models::ModelVersion ManagedPipeline::retrain(ModelId model_id, std::span<const WindowSample> samples) {
    auto v = train(model_id, samples);
    pending_charges_.push_back({v.version_id, model_id, v.training_cost_j});
    pending_j_ += v.training_cost_j;
    return v;
}

models::ModelVersion ManagedPipeline::train_offline(ModelId model_id,
                                                    std::span<const WindowSample> samples) {
    auto v = models::fit(model_id, samples, seed_, fit_options_);
    v.version_id = store_.store_version(v);
    return v;
}

std::optional<DeployedModel> ManagedPipeline::deployed() const {
    std::unique_lock lock(deploy_mutex_);
    return deployed_;
}

} // namespace harmonica
