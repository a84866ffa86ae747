#include "harmonica/trace.hpp"

#include "harmonica/error.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <optional>
#include <random>

namespace harmonica {

namespace {

constexpr int kPointsPerDay = 288;

std::string timestamp_at(std::int64_t index) {
    using namespace std::chrono;
    const sys_seconds t = sys_days{year{2024} / January / 1} + minutes{5 * index};
    const auto day = floor<days>(t);
    const year_month_day ymd{day};
    const hh_mm_ss hms{t - day};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u %02lld:%02lld:%02lld", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<long long>(hms.hours().count()),
                  static_cast<long long>(hms.minutes().count()),
                  static_cast<long long>(hms.seconds().count()));
    return buf;
}

// Box-Muller on 53-bit uniforms, so the trace does not depend on the
// standard library's distribution implementation.
class Gaussian {
public:
    explicit Gaussian(std::uint64_t seed) : rng_(seed) {}

    double operator()() {
        if (spare_) {
            const double v = *spare_;
            spare_.reset();
            return v;
        }
        const double u1 = (static_cast<double>(rng_() >> 11) + 1.0) * 0x1.0p-53;
        const double u2 = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
        return r * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::mt19937_64 rng_;
    std::optional<double> spare_;
};

} // namespace

std::vector<TimePoint> generate_trace(const TraceParams& p) {
    if (p.days < 1) throw Error(ErrorKind::validation, "days must be >= 1", "days");
    const std::int64_t n = static_cast<std::int64_t>(p.days) * kPointsPerDay;
    auto level = [&](std::int64_t t) {
        const double tod = static_cast<double>(t % kPointsPerDay) / kPointsPerDay;
        return p.mean + p.amplitude * std::sin(2.0 * std::numbers::pi * (tod - 0.3));
    };
    Gaussian gauss(p.seed);
    std::vector<double> f(static_cast<std::size_t>(n));
    for (std::int64_t t = 0; t < std::min<std::int64_t>(n, 3); ++t) f[t] = level(t);
    for (std::int64_t t = 2; t + 1 < n; ++t) {
        const double a = (f[t] - f[t - 1]) / p.step_scale;
        const double b = (f[t - 1] - f[t - 2]) / p.step_scale;
        const double response = 0.2 * a + 0.8 * (std::exp(-2.0 * a * a) - 0.5) - 0.2 * b;
        const double next = f[t] + p.reversion * (level(t + 1) - f[t]) + p.step_scale * response +
                            p.step_scale * p.noise * gauss();
        f[t + 1] = std::max(0.0, next);
    }
    std::vector<TimePoint> out(static_cast<std::size_t>(n));
    for (std::int64_t t = 0; t < n; ++t) out[t] = {timestamp_at(t), f[t]};
    return out;
}

} // namespace harmonica
