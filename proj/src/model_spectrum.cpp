#include "harmonica/model_spectrum.hpp"

#include "harmonica/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <random>
#include <string>

namespace harmonica {

std::optional<ModelId> parse_model_id(std::string_view text) noexcept {
    if (text == "lin") return ModelId::lin;
    if (text == "ridge2") return ModelId::ridge2;
    if (text == "mlp") return ModelId::mlp;
    return std::nullopt;
}

} // namespace harmonica

namespace harmonica::models {

namespace {

// MAC counts: lin 5 multiplies + intercept; ridge2 20 features + intercept;
// mlp 5*32 input weights + 32 activations + 32 output weights + bias.
// An mlp training pass (forward + backward) is counted as three forwards.
constexpr std::array<ModelDescriptor, kModelCount> kSpectrum{{
    {ModelId::lin, 0, 6, 6, 1},
    {ModelId::ridge2, 1, 21, 21, 1},
    {ModelId::mlp, 2, 225, 675, 200},
}};

constexpr double kSignatureEps = 1e-6;
constexpr double kMinScale = 1e-12;

void require_samples(std::span<const WindowSample> samples) {
    if (samples.size() < kMinFitSamples) {
        throw Error(ErrorKind::insufficient_data,
                    "fit needs at least " + std::to_string(kMinFitSamples) + " samples, got " +
                        std::to_string(samples.size()));
    }
    for (const auto& s : samples) {
        for (double v : s.lags) {
            if (!std::isfinite(v)) throw Error(ErrorKind::input, "non-finite lag in training data");
        }
        if (!std::isfinite(s.target)) {
            throw Error(ErrorKind::input, "non-finite target in training data");
        }
    }
}

void require_finite(const Lags& lags) {
    for (double v : lags) {
        if (!std::isfinite(v)) throw Error(ErrorKind::input, "non-finite lag value");
    }
}

// Least-squares solve with a minimum-norm answer when the system is rank deficient.
Eigen::VectorXd min_norm_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
    cod.setThreshold(1e-12);
    return cod.solve(b);
}

LinearParams fit_linear(std::span<const WindowSample> samples) {
    const auto n = static_cast<Eigen::Index>(samples.size());
    Eigen::MatrixXd design(n, static_cast<Eigen::Index>(kLags + 1));
    Eigen::VectorXd y(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto& s = samples[static_cast<std::size_t>(r)];
        for (std::size_t i = 0; i < kLags; ++i) design(r, static_cast<Eigen::Index>(i)) = s.lags[i];
        design(r, static_cast<Eigen::Index>(kLags)) = 1.0;
        y(r) = s.target;
    }
    const Eigen::VectorXd w = min_norm_solve(design, y);
    LinearParams p;
    for (std::size_t i = 0; i < kLags; ++i) p.coef[i] = w(static_cast<Eigen::Index>(i));
    p.intercept = w(static_cast<Eigen::Index>(kLags));
    return p;
}

Ridge2Params fit_ridge2(std::span<const WindowSample> samples, double lambda) {
    const std::size_t n = samples.size();
    constexpr std::size_t d = kRidgeFeatures;
    std::vector<double> rows(n * d);
    std::vector<double> y(n);
    for (std::size_t r = 0; r < n; ++r) {
        const auto f = ridge2_features(samples[r].lags);
        std::copy(f.begin(), f.end(), rows.begin() + static_cast<std::ptrdiff_t>(r * d));
        y[r] = samples[r].target;
    }

    Ridge2Params p;
    for (std::size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (std::size_t r = 0; r < n; ++r) mean += rows[r * d + j];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            const double c = rows[r * d + j] - mean;
            var += c * c;
        }
        const double sd = std::sqrt(var / static_cast<double>(n));
        p.mean[j] = mean;
        p.scale[j] = sd > kMinScale * std::max(1.0, std::abs(mean)) ? sd : 1.0;
    }
    double ybar = 0.0;
    for (double v : y) ybar += v;
    ybar /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < d; ++j) {
            rows[r * d + j] = (rows[r * d + j] - p.mean[j]) / p.scale[j];
        }
        y[r] -= ybar;
    }

    const auto eq = kernels::accumulate_normal_equations(rows, y, d);
    Eigen::MatrixXd gram(d, d);
    Eigen::VectorXd rhs(d);
    for (std::size_t i = 0; i < d; ++i) {
        rhs(static_cast<Eigen::Index>(i)) = eq.rhs[i];
        for (std::size_t j = 0; j < d; ++j) {
            gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = eq.gram[i * d + j];
        }
        gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += lambda;
    }
    const Eigen::VectorXd beta = min_norm_solve(gram, rhs);
    for (std::size_t j = 0; j < d; ++j) p.coef[j] = beta(static_cast<Eigen::Index>(j));
    p.intercept = ybar;
    return p;
}

std::array<double, kLags> mlp_inputs(const Lags& lags) {
    std::array<double, kLags> x{};
    const double last = lags[kLags - 1];
    for (std::size_t i = 0; i + 1 < kLags; ++i) x[i] = lags[i] - last;
    x[kLags - 1] = last;
    return x;
}

// Uniform in [-1, 1) from the top 53 bits; avoids library-defined distributions.
double unit_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

// --- little-endian encoding -------------------------------------------------

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }

    double f64() {
        need(8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 8;
        const double v = std::bit_cast<double>(bits);
        if (!std::isfinite(v)) throw Error(ErrorKind::validation, "weight block holds a non-finite value");
        return v;
    }

    std::string tag() {
        need(8);
        std::string t;
        for (std::size_t i = 0; i < 8 && bytes_[pos_ + i] != 0; ++i) {
            t.push_back(static_cast<char>(bytes_[pos_ + i]));
        }
        pos_ += 8;
        return t;
    }

    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t k) const {
        if (pos_ + k > bytes_.size()) throw Error(ErrorKind::validation, "weight block truncated");
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

void put_header(std::vector<std::uint8_t>& out, ModelId id, std::initializer_list<std::uint32_t> shape) {
    const auto name = to_string(id);
    for (std::size_t i = 0; i < 8; ++i) {
        out.push_back(i < name.size() ? static_cast<std::uint8_t>(name[i]) : 0);
    }
    put_u32(out, static_cast<std::uint32_t>(shape.size()));
    for (auto d : shape) put_u32(out, d);
}

template <std::size_t N>
void read_into(Reader& in, std::array<double, N>& dst) {
    for (auto& v : dst) v = in.f64();
}

void read_into(Reader& in, std::vector<double>& dst, std::size_t n) {
    dst.resize(n);
    for (auto& v : dst) v = in.f64();
}

} // namespace

const std::array<ModelDescriptor, kModelCount>& spectrum() { return kSpectrum; }

const ModelDescriptor& descriptor(ModelId id) { return kSpectrum[static_cast<std::size_t>(id)]; }

std::array<double, kRidgeFeatures> ridge2_features(const Lags& lags) {
    std::array<double, kRidgeFeatures> f{};
    std::size_t k = 0;
    for (double v : lags) f[k++] = v;
    for (std::size_t i = 0; i < kLags; ++i) {
        for (std::size_t j = i; j < kLags; ++j) f[k++] = lags[i] * lags[j];
    }
    return f;
}

RawCoefficients raw_coefficients(const Ridge2Params& params) {
    RawCoefficients raw;
    raw.intercept = params.intercept;
    for (std::size_t j = 0; j < kRidgeFeatures; ++j) {
        raw.coef[j] = params.coef[j] / params.scale[j];
        raw.intercept -= raw.coef[j] * params.mean[j];
    }
    return raw;
}

MlpParams train_mlp(std::span<const WindowSample> samples, std::uint64_t seed,
                    const FitOptions& options, std::vector<double>* loss_history) {
    require_samples(samples);
    const std::size_t n = samples.size();
    MlpParams p;

    std::vector<double> inputs(n * kLags);
    std::vector<double> targets(n);
    for (std::size_t r = 0; r < n; ++r) {
        const auto x = mlp_inputs(samples[r].lags);
        std::copy(x.begin(), x.end(), inputs.begin() + static_cast<std::ptrdiff_t>(r * kLags));
        targets[r] = samples[r].target - samples[r].lags[kLags - 1];
    }

    // Standardize inputs and the change target with training statistics.
    for (std::size_t i = 0; i < kLags; ++i) {
        double mean = 0.0;
        for (std::size_t r = 0; r < n; ++r) mean += inputs[r * kLags + i];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            const double c = inputs[r * kLags + i] - mean;
            var += c * c;
        }
        const double sd = std::sqrt(var / static_cast<double>(n));
        p.in_mean[i] = mean;
        p.in_scale[i] = sd > kMinScale * std::max(1.0, std::abs(mean)) ? sd : 1.0;
        for (std::size_t r = 0; r < n; ++r) {
            inputs[r * kLags + i] = (inputs[r * kLags + i] - mean) / p.in_scale[i];
        }
    }
    {
        double mean = 0.0;
        for (double t : targets) mean += t;
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (double t : targets) var += (t - mean) * (t - mean);
        const double sd = std::sqrt(var / static_cast<double>(n));
        p.out_mean = mean;
        p.out_scale = sd > kMinScale * std::max(1.0, std::abs(mean)) ? sd : 1.0;
        for (double& t : targets) t = (t - mean) / p.out_scale;
    }

    auto& net = p.net;
    net.inputs = kLags;
    net.hidden = kMlpHidden;
    net.w1.resize(kMlpHidden * kLags);
    net.b1.resize(kMlpHidden);
    net.w2.resize(kMlpHidden);
    std::mt19937_64 rng(seed);
    const double in_gain = 1.0 / std::sqrt(static_cast<double>(kLags));
    const double out_gain = 1.0 / std::sqrt(static_cast<double>(kMlpHidden));
    for (auto& w : net.w1) w = unit_uniform(rng) * in_gain;
    for (auto& b : net.b1) b = unit_uniform(rng);
    for (auto& w : net.w2) w = unit_uniform(rng) * out_gain;
    net.b2 = 0.0;

    if (loss_history) loss_history->clear();
    const double step = options.mlp_step;
    for (int epoch = 0; epoch < options.mlp_epochs; ++epoch) {
        const auto g = kernels::mlp_loss_gradient(net, inputs, targets);
        if (loss_history) loss_history->push_back(g.loss);
        for (std::size_t i = 0; i < net.w1.size(); ++i) net.w1[i] -= step * g.w1[i];
        for (std::size_t i = 0; i < net.hidden; ++i) {
            net.b1[i] -= step * g.b1[i];
            net.w2[i] -= step * g.w2[i];
        }
        net.b2 -= step * g.b2;
    }
    if (loss_history) loss_history->push_back(kernels::mlp_loss(net, inputs, targets));
    return p;
}

ModelParams fit_params(ModelId model_id, std::span<const WindowSample> samples,
                       std::uint64_t seed, const FitOptions& options) {
    require_samples(samples);
    switch (model_id) {
        case ModelId::lin: return fit_linear(samples);
        case ModelId::ridge2: return fit_ridge2(samples, options.ridge_lambda);
        case ModelId::mlp: return train_mlp(samples, seed, options);
    }
    throw Error(ErrorKind::validation, "unknown model id");
}

ModelVersion fit(ModelId model_id, std::span<const WindowSample> samples, std::uint64_t seed,
                 const FitOptions& options) {
    const auto params = fit_params(model_id, samples, seed, options);
    const auto& desc = descriptor(model_id);
    const int epochs = model_id == ModelId::mlp ? options.mlp_epochs : desc.training_epochs;

    ModelVersion v;
    v.model_id = model_id;
    v.signature = signature(samples);
    v.weights = serialize(params);
    v.training_cost_j = energy::measure_training(desc, static_cast<long>(samples.size()),
                                                 std::max(epochs, 1), options.energy);
    return v;
}

ModelId model_of(const ModelParams& params) noexcept {
    return static_cast<ModelId>(params.index());
}

double predict(const ModelParams& params, const Lags& lags) {
    require_finite(lags);
    if (const auto* lin = std::get_if<LinearParams>(&params)) {
        double y = lin->intercept;
        for (std::size_t i = 0; i < kLags; ++i) y += lin->coef[i] * lags[i];
        return y;
    }
    if (const auto* ridge = std::get_if<Ridge2Params>(&params)) {
        const auto f = ridge2_features(lags);
        double y = ridge->intercept;
        for (std::size_t j = 0; j < kRidgeFeatures; ++j) {
            y += ridge->coef[j] * ((f[j] - ridge->mean[j]) / ridge->scale[j]);
        }
        return y;
    }
    const auto& mlp = std::get<MlpParams>(params);
    auto x = mlp_inputs(lags);
    for (std::size_t i = 0; i < kLags; ++i) x[i] = (x[i] - mlp.in_mean[i]) / mlp.in_scale[i];
    const double change = kernels::mlp_forward(mlp.net, x) * mlp.out_scale + mlp.out_mean;
    return lags[kLags - 1] + change;
}

double predict(const ModelVersion& version, const Lags& lags) {
    require_finite(lags);
    return predict(deserialize(version.weights), lags);
}

std::vector<std::uint8_t> serialize(const ModelParams& params) {
    std::vector<std::uint8_t> out;
    if (const auto* lin = std::get_if<LinearParams>(&params)) {
        put_header(out, ModelId::lin, {static_cast<std::uint32_t>(kLags)});
        for (double v : lin->coef) put_f64(out, v);
        put_f64(out, lin->intercept);
        return out;
    }
    if (const auto* ridge = std::get_if<Ridge2Params>(&params)) {
        put_header(out, ModelId::ridge2,
                   {static_cast<std::uint32_t>(kLags), static_cast<std::uint32_t>(kRidgeFeatures)});
        for (double v : ridge->mean) put_f64(out, v);
        for (double v : ridge->scale) put_f64(out, v);
        for (double v : ridge->coef) put_f64(out, v);
        put_f64(out, ridge->intercept);
        return out;
    }
    const auto& mlp = std::get<MlpParams>(params);
    put_header(out, ModelId::mlp,
               {static_cast<std::uint32_t>(mlp.net.inputs), static_cast<std::uint32_t>(mlp.net.hidden)});
    for (double v : mlp.in_mean) put_f64(out, v);
    for (double v : mlp.in_scale) put_f64(out, v);
    put_f64(out, mlp.out_mean);
    put_f64(out, mlp.out_scale);
    for (double v : mlp.net.w1) put_f64(out, v);
    for (double v : mlp.net.b1) put_f64(out, v);
    for (double v : mlp.net.w2) put_f64(out, v);
    put_f64(out, mlp.net.b2);
    return out;
}

ModelParams deserialize(std::span<const std::uint8_t> bytes) {
    Reader in(bytes);
    const auto tag = in.tag();
    const auto id = parse_model_id(tag);
    if (!id) throw Error(ErrorKind::validation, "unknown model tag '" + tag + "'");
    const auto rank = in.u32();
    if (rank > 4) throw Error(ErrorKind::validation, "implausible shape rank");
    std::vector<std::uint32_t> shape(rank);
    for (auto& d : shape) d = in.u32();

    auto expect_shape = [&](std::vector<std::uint32_t> want) {
        if (shape != want) throw Error(ErrorKind::validation, "unexpected shape for " + tag);
    };

    ModelParams result;
    switch (*id) {
        case ModelId::lin: {
            expect_shape({static_cast<std::uint32_t>(kLags)});
            LinearParams p;
            read_into(in, p.coef);
            p.intercept = in.f64();
            result = p;
            break;
        }
        case ModelId::ridge2: {
            expect_shape({static_cast<std::uint32_t>(kLags), static_cast<std::uint32_t>(kRidgeFeatures)});
            Ridge2Params p;
            read_into(in, p.mean);
            read_into(in, p.scale);
            read_into(in, p.coef);
            p.intercept = in.f64();
            for (double s : p.scale) {
                if (!(s > 0.0)) throw Error(ErrorKind::validation, "ridge2 scale must be positive");
            }
            result = p;
            break;
        }
        case ModelId::mlp: {
            expect_shape({static_cast<std::uint32_t>(kLags), static_cast<std::uint32_t>(kMlpHidden)});
            MlpParams p;
            read_into(in, p.in_mean);
            read_into(in, p.in_scale);
            p.out_mean = in.f64();
            p.out_scale = in.f64();
            p.net.inputs = kLags;
            p.net.hidden = kMlpHidden;
            read_into(in, p.net.w1, kLags * kMlpHidden);
            read_into(in, p.net.b1, kMlpHidden);
            read_into(in, p.net.w2, kMlpHidden);
            p.net.b2 = in.f64();
            for (double s : p.in_scale) {
                if (!(s > 0.0)) throw Error(ErrorKind::validation, "mlp input scale must be positive");
            }
            if (!(p.out_scale > 0.0)) throw Error(ErrorKind::validation, "mlp output scale must be positive");
            result = std::move(p);
            break;
        }
    }
    if (!in.done()) throw Error(ErrorKind::validation, "trailing bytes after weight block");
    return result;
}

DataSignature signature(std::span<const WindowSample> samples) {
    if (samples.empty()) throw Error(ErrorKind::insufficient_data, "signature of an empty sample set");
    std::vector<double> values;
    values.reserve(samples.size() * kLags);
    for (const auto& s : samples) values.insert(values.end(), s.lags.begin(), s.lags.end());

    const double count = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= count;
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);

    std::sort(values.begin(), values.end());
    // Nearest rank: the ceil(p * N)-th smallest value, computed in integer percent.
    auto quantile = [&](std::size_t percent) {
        const std::size_t rank = std::max<std::size_t>(1, (percent * values.size() + 99) / 100);
        return values[rank - 1];
    };

    DataSignature sig;
    sig.mean = mean;
    sig.std = std::sqrt(var / count);
    sig.p10 = quantile(10);
    sig.p50 = quantile(50);
    sig.p90 = quantile(90);
    sig.n = static_cast<std::int64_t>(values.size());
    return sig;
}

double signature_distance(const DataSignature& a, const DataSignature& b) {
    const double location = std::abs(a.mean - b.mean) / std::max(b.std, kSignatureEps);
    const double spread = std::abs(std::log((a.std + kSignatureEps) / (b.std + kSignatureEps)));
    return std::max(location, spread);
}

} // namespace harmonica::models
