#include "harmonica/knowledge.hpp"

#include "harmonica/error.hpp"

#include <charconv>
#include <cmath>
#include <mutex>
#include <set>
#include <utility>

namespace harmonica {

namespace {

constexpr std::string_view kMetricNames[] = {"rolling_mae", "energy_per_inference_j", "latency_ms",
                                             "drift_score"};
constexpr std::string_view kTacticNames[] = {"SwitchUp", "SwitchDown", "SwitchTo",
                                             "Retrain",  "ReuseVersion", "NoOp"};
constexpr std::string_view kOutcomeNames[] = {"applied", "reuse_hit", "retrained", "noop"};

template <typename Enum, std::size_t N>
std::optional<Enum> lookup(const std::string_view (&names)[N], std::string_view text) {
    for (std::size_t i = 0; i < N; ++i) {
        if (names[i] == text) return static_cast<Enum>(i);
    }
    return std::nullopt;
}

} // namespace

std::string_view to_string(Metric m) noexcept { return kMetricNames[static_cast<int>(m)]; }
std::string_view to_string(Direction d) noexcept { return d == Direction::upper ? "upper" : "lower"; }
std::string_view to_string(TacticKind k) noexcept { return kTacticNames[static_cast<int>(k)]; }
std::string_view to_string(Outcome o) noexcept { return kOutcomeNames[static_cast<int>(o)]; }

std::optional<Metric> parse_metric(std::string_view text) noexcept {
    return lookup<Metric>(kMetricNames, text);
}
std::optional<Direction> parse_direction(std::string_view text) noexcept {
    if (text == "upper") return Direction::upper;
    if (text == "lower") return Direction::lower;
    return std::nullopt;
}
std::optional<TacticKind> parse_tactic(std::string_view text) noexcept {
    return lookup<TacticKind>(kTacticNames, text);
}
std::optional<Outcome> parse_outcome(std::string_view text) noexcept {
    return lookup<Outcome>(kOutcomeNames, text);
}

void validate_goal(const SustainabilityGoal& goal, const std::string& field) {
    auto at = [&](std::string_view name) { return field.empty() ? std::string(name) : field + "." + std::string(name); };
    if (!std::isfinite(goal.static_threshold)) {
        throw Error(ErrorKind::validation, "static_threshold must be finite", at("static_threshold"));
    }
    if (goal.hysteresis_n < 1) {
        throw Error(ErrorKind::validation, "hysteresis_n must be >= 1", at("hysteresis_n"));
    }
    if (goal.dynamic) {
        if (!(goal.ewma_alpha > 0.0 && goal.ewma_alpha <= 1.0)) {
            throw Error(ErrorKind::validation, "ewma_alpha must lie in (0, 1]", at("ewma_alpha"));
        }
        if (!(goal.band_k >= 0.0) || !std::isfinite(goal.band_k)) {
            throw Error(ErrorKind::validation, "band_k must be finite and >= 0", at("band_k"));
        }
    }
}

void validate_goals(std::span<const SustainabilityGoal> goals) {
    std::set<std::pair<Metric, Direction>> seen;
    for (std::size_t i = 0; i < goals.size(); ++i) {
        const auto field = "goals[" + std::to_string(i) + "]";
        validate_goal(goals[i], field);
        if (!seen.emplace(goals[i].metric, goals[i].direction).second) {
            throw Error(ErrorKind::validation,
                        "duplicate goal for (" + std::string(to_string(goals[i].metric)) + ", " +
                            std::string(to_string(goals[i].direction)) + ")",
                        field + ".metric");
        }
    }
}

void validate_policy(const AdaptationPolicy& policy) {
    if (policy.name.empty()) throw Error(ErrorKind::validation, "policy name is empty", "name");
    if (policy.switch_interval < 1) {
        throw Error(ErrorKind::validation, "switch_interval must be >= 1", "switch_interval");
    }
    for (std::size_t i = 0; i < policy.rules.size(); ++i) {
        const auto& t = policy.rules[i].tactic;
        if (t.kind == TacticKind::SwitchTo && !t.model) {
            throw Error(ErrorKind::validation, "SwitchTo needs a model",
                        "rules[" + std::to_string(i) + "].tactic_arg");
        }
    }
}

// --- KnowledgeStore ---------------------------------------------------------

void KnowledgeStore::put_goals(std::vector<SustainabilityGoal> goals) {
    validate_goals(goals);
    std::unique_lock lock(mutex_);
    goals_ = std::move(goals);
    ++goals_generation_;
}

std::vector<SustainabilityGoal> KnowledgeStore::goals() const {
    std::shared_lock lock(mutex_);
    return goals_;
}

std::uint64_t KnowledgeStore::goals_generation() const {
    std::shared_lock lock(mutex_);
    return goals_generation_;
}

void KnowledgeStore::put_policy(AdaptationPolicy policy) {
    validate_policy(policy);
    std::unique_lock lock(mutex_);
    policy_ = std::move(policy);
}

AdaptationPolicy KnowledgeStore::policy() const {
    std::shared_lock lock(mutex_);
    return policy_;
}

std::int64_t KnowledgeStore::store_version(models::ModelVersion version) {
    if (static_cast<int>(version.model_id) >= kModelCount) {
        throw Error(ErrorKind::validation, "unknown model id");
    }
    const auto params = models::deserialize(version.weights);
    if (models::model_of(params) != version.model_id) {
        throw Error(ErrorKind::validation, "weights do not belong to model " +
                                               std::string(to_string(version.model_id)));
    }
    std::unique_lock lock(mutex_);
    version.version_id = versions_.empty() ? 1 : versions_.rbegin()->first + 1;
    const auto id = version.version_id;
    versions_.emplace(id, std::move(version));
    return id;
}

std::optional<models::ModelVersion> KnowledgeStore::version(std::int64_t version_id) const {
    std::shared_lock lock(mutex_);
    const auto it = versions_.find(version_id);
    if (it == versions_.end()) return std::nullopt;
    return it->second;
}

std::optional<models::ModelVersion> KnowledgeStore::latest_version(ModelId model_id) const {
    std::shared_lock lock(mutex_);
    for (auto it = versions_.rbegin(); it != versions_.rend(); ++it) {
        if (it->second.model_id == model_id) return it->second;
    }
    return std::nullopt;
}

std::vector<models::ModelVersion> KnowledgeStore::versions() const {
    std::shared_lock lock(mutex_);
    std::vector<models::ModelVersion> out;
    out.reserve(versions_.size());
    for (const auto& [id, v] : versions_) out.push_back(v);
    return out;
}

std::optional<models::ModelVersion> KnowledgeStore::find_similar_version(const DataSignature& sig,
                                                                        ModelId model_id,
                                                                        double max_distance) const {
    std::shared_lock lock(mutex_);
    const models::ModelVersion* best = nullptr;
    double best_distance = 0.0;
    // Ascending id order with <= keeps the most recent among equal distances.
    for (const auto& [id, v] : versions_) {
        if (v.model_id != model_id) continue;
        const double d = models::signature_distance(sig, v.signature);
        if (d <= max_distance && (!best || d <= best_distance)) {
            best = &v;
            best_distance = d;
        }
    }
    if (!best) return std::nullopt;
    return *best;
}

void KnowledgeStore::set_training_data(std::vector<WindowSample> samples) {
    std::unique_lock lock(mutex_);
    training_ = std::move(samples);
}

std::vector<WindowSample> KnowledgeStore::training_data() const {
    std::shared_lock lock(mutex_);
    return training_;
}

void KnowledgeStore::add_replayed_sample(const WindowSample& sample) {
    std::unique_lock lock(mutex_);
    replayed_.push_back(sample);
}

std::vector<WindowSample> KnowledgeStore::replayed_samples(std::int64_t begin, std::int64_t end) const {
    std::shared_lock lock(mutex_);
    const auto n = static_cast<std::int64_t>(replayed_.size());
    begin = std::clamp<std::int64_t>(begin, 0, n);
    end = std::clamp<std::int64_t>(end, begin, n);
    return {replayed_.begin() + begin, replayed_.begin() + end};
}

std::vector<WindowSample> KnowledgeStore::recent_completed(std::size_t count) const {
    std::shared_lock lock(mutex_);
    const auto done = static_cast<std::size_t>(std::min<std::int64_t>(
        completed_, static_cast<std::int64_t>(replayed_.size())));
    std::vector<WindowSample> out;
    const std::size_t from_replay = std::min(count, done);
    const std::size_t from_training = std::min(count - from_replay, training_.size());
    out.reserve(from_replay + from_training);
    out.insert(out.end(), training_.end() - static_cast<std::ptrdiff_t>(from_training), training_.end());
    out.insert(out.end(), replayed_.begin() + static_cast<std::ptrdiff_t>(done - from_replay),
               replayed_.begin() + static_cast<std::ptrdiff_t>(done));
    return out;
}

std::int64_t KnowledgeStore::append_telemetry(const TelemetryRecord& record) {
    std::unique_lock lock(mutex_);
    const auto expected = static_cast<std::int64_t>(telemetry_.size());
    if (record.seq != expected) {
        throw Error(ErrorKind::sequencing, "telemetry seq " + std::to_string(record.seq) +
                                               " does not follow log length " + std::to_string(expected));
    }
    if (!telemetry_.empty() && record.cumulative_energy_j < telemetry_.back().cumulative_energy_j) {
        throw Error(ErrorKind::sequencing, "cumulative energy decreased at seq " + std::to_string(record.seq));
    }
    telemetry_.push_back(record);
    return record.seq;
}

void KnowledgeStore::backfill_last(double actual) {
    std::unique_lock lock(mutex_);
    if (telemetry_.empty()) throw Error(ErrorKind::sequencing, "no record to back-fill");
    auto& r = telemetry_.back();
    if (r.actual) throw Error(ErrorKind::sequencing, "record " + std::to_string(r.seq) + " already completed");
    r.actual = actual;
    r.abs_error = std::abs(r.prediction - actual);
    completed_ = static_cast<std::int64_t>(telemetry_.size());
}

std::vector<TelemetryRecord> KnowledgeStore::read_telemetry(std::int64_t since_seq,
                                                            std::int64_t limit) const {
    std::shared_lock lock(mutex_);
    const auto n = static_cast<std::int64_t>(telemetry_.size());
    const auto begin = std::clamp<std::int64_t>(since_seq, 0, n);
    const auto end = limit <= 0 ? begin : std::min(n, begin + limit);
    return {telemetry_.begin() + begin, telemetry_.begin() + end};
}

std::int64_t KnowledgeStore::telemetry_size() const {
    std::shared_lock lock(mutex_);
    return static_cast<std::int64_t>(telemetry_.size());
}

std::int64_t KnowledgeStore::completed_size() const {
    std::shared_lock lock(mutex_);
    return completed_;
}

std::optional<TelemetryRecord> KnowledgeStore::last_record() const {
    std::shared_lock lock(mutex_);
    if (telemetry_.empty()) return std::nullopt;
    return telemetry_.back();
}

void KnowledgeStore::append_event(AdaptationEvent event) {
    std::unique_lock lock(mutex_);
    events_.push_back(std::move(event));
}

std::vector<AdaptationEvent> KnowledgeStore::read_events(std::int64_t since_seq) const {
    std::shared_lock lock(mutex_);
    std::vector<AdaptationEvent> out;
    for (const auto& e : events_) {
        if (e.seq >= since_seq) out.push_back(e);
    }
    return out;
}

void KnowledgeStore::add_training_charge(const TrainingCharge& charge) {
    std::unique_lock lock(mutex_);
    charges_.push_back(charge);
}

std::vector<TrainingCharge> KnowledgeStore::training_charges() const {
    std::shared_lock lock(mutex_);
    return charges_;
}

std::string KnowledgeStore::export_csv(CsvKind kind) const {
    std::shared_lock lock(mutex_);
    return kind == CsvKind::telemetry ? telemetry_csv(telemetry_) : adaptations_csv(events_);
}

// --- CSV --------------------------------------------------------------------

namespace {

void put_field(std::string& out, std::string_view text) {
    if (text.find_first_of(",\"\n\r") == std::string_view::npos) {
        out += text;
        return;
    }
    out += '"';
    for (char c : text) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
}

void put_real(std::string& out, std::optional<double> v) {
    if (v) out += format_real(*v);
}

// Splits one CSV record starting at `pos`; advances `pos` past the line end.
std::vector<std::string> split_record(std::string_view text, std::size_t& pos, std::size_t line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    bool was_quoted = false;
    while (pos < text.size()) {
        const char c = text[pos];
        if (quoted) {
            if (c == '"') {
                if (pos + 1 < text.size() && text[pos + 1] == '"') {
                    cur += '"';
                    ++pos;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
            ++pos;
            continue;
        }
        if (c == '"' && cur.empty() && !was_quoted) {
            quoted = was_quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
            was_quoted = false;
        } else if (c == '\n') {
            ++pos;
            break;
        } else if (c != '\r') {
            cur += c;
        }
        ++pos;
    }
    if (quoted) throw Error(ErrorKind::input, "unterminated quote on line " + std::to_string(line));
    fields.push_back(std::move(cur));
    return fields;
}

template <typename Row>
std::vector<Row> parse_rows(std::string_view text, std::string_view header, std::size_t columns,
                            Row (*convert)(const std::vector<std::string>&, std::size_t)) {
    std::size_t pos = 0;
    std::size_t line = 1;
    const auto head = split_record(text, pos, line);
    std::string joined;
    for (std::size_t i = 0; i < head.size(); ++i) joined += (i ? "," : "") + head[i];
    if (joined != header) throw Error(ErrorKind::input, "unexpected header on line 1");
    std::vector<Row> rows;
    while (pos < text.size()) {
        ++line;
        const auto fields = split_record(text, pos, line);
        if (fields.size() != columns) {
            throw Error(ErrorKind::input, "expected " + std::to_string(columns) + " fields on line " +
                                              std::to_string(line));
        }
        rows.push_back(convert(fields, line));
    }
    return rows;
}

double parse_real(const std::string& s, std::size_t line) {
    double v = 0.0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || end != s.data() + s.size() || s.empty()) {
        throw Error(ErrorKind::input, "invalid number '" + s + "' on line " + std::to_string(line));
    }
    return v;
}

std::optional<double> parse_optional_real(const std::string& s, std::size_t line) {
    if (s.empty()) return std::nullopt;
    return parse_real(s, line);
}

std::int64_t parse_int(const std::string& s, std::size_t line) {
    std::int64_t v = 0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || end != s.data() + s.size() || s.empty()) {
        throw Error(ErrorKind::input, "invalid integer '" + s + "' on line " + std::to_string(line));
    }
    return v;
}

ModelId parse_model_field(const std::string& s, std::size_t line) {
    const auto id = parse_model_id(s);
    if (!id) throw Error(ErrorKind::input, "unknown model '" + s + "' on line " + std::to_string(line));
    return *id;
}

TelemetryRecord telemetry_row(const std::vector<std::string>& f, std::size_t line) {
    TelemetryRecord r;
    r.seq = parse_int(f[0], line);
    r.timestamp = f[1];
    r.model_id = parse_model_field(f[2], line);
    r.prediction = parse_real(f[3], line);
    r.actual = parse_optional_real(f[4], line);
    r.abs_error = parse_optional_real(f[5], line);
    r.latency_ms = parse_real(f[6], line);
    r.energy_j = parse_real(f[7], line);
    r.cumulative_energy_j = parse_real(f[8], line);
    return r;
}

AdaptationEvent adaptation_row(const std::vector<std::string>& f, std::size_t line) {
    AdaptationEvent e;
    e.seq = parse_int(f[0], line);
    e.timestamp = f[1];
    e.goal = f[2];
    e.metric_value = parse_optional_real(f[3], line);
    e.threshold = parse_optional_real(f[4], line);
    const auto tactic = parse_tactic(f[5]);
    if (!tactic) throw Error(ErrorKind::input, "unknown tactic on line " + std::to_string(line));
    e.tactic = *tactic;
    e.model_before = parse_model_field(f[6], line);
    e.model_after = parse_model_field(f[7], line);
    if (!f[8].empty()) e.version_used = parse_int(f[8], line);
    const auto outcome = parse_outcome(f[9]);
    if (!outcome) throw Error(ErrorKind::input, "unknown outcome on line " + std::to_string(line));
    e.outcome = *outcome;
    return e;
}

} // namespace

std::string format_real(double v) {
    char buf[32];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ec == std::errc{} ? end : buf);
}

std::string telemetry_csv(std::span<const TelemetryRecord> records) {
    std::string out(kTelemetryHeader);
    out += '\n';
    for (const auto& r : records) {
        out += std::to_string(r.seq);
        out += ',';
        put_field(out, r.timestamp);
        out += ',';
        out += to_string(r.model_id);
        out += ',';
        out += format_real(r.prediction);
        out += ',';
        put_real(out, r.actual);
        out += ',';
        put_real(out, r.abs_error);
        out += ',';
        out += format_real(r.latency_ms);
        out += ',';
        out += format_real(r.energy_j);
        out += ',';
        out += format_real(r.cumulative_energy_j);
        out += '\n';
    }
    return out;
}

std::string adaptations_csv(std::span<const AdaptationEvent> events) {
    std::string out(kAdaptationsHeader);
    out += '\n';
    for (const auto& e : events) {
        out += std::to_string(e.seq);
        out += ',';
        put_field(out, e.timestamp);
        out += ',';
        put_field(out, e.goal);
        out += ',';
        put_real(out, e.metric_value);
        out += ',';
        put_real(out, e.threshold);
        out += ',';
        out += to_string(e.tactic);
        out += ',';
        out += to_string(e.model_before);
        out += ',';
        out += to_string(e.model_after);
        out += ',';
        if (e.version_used) out += std::to_string(*e.version_used);
        out += ',';
        out += to_string(e.outcome);
        out += '\n';
    }
    return out;
}

std::vector<TelemetryRecord> parse_telemetry_csv(std::string_view text) {
    return parse_rows<TelemetryRecord>(text, kTelemetryHeader, 9, &telemetry_row);
}

std::vector<AdaptationEvent> parse_adaptations_csv(std::string_view text) {
    return parse_rows<AdaptationEvent>(text, kAdaptationsHeader, 10, &adaptation_row);
}

} // namespace harmonica
