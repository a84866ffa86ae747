#pragma once

#include "harmonica/pipeline.hpp"

#include <cstdint>
#include <vector>

namespace harmonica {

/// Synthetic 5-minute traffic trace: a flow that relaxes toward a sinusoidal
/// daily level, plus a nonlinear response to its own recent changes and noise.
///
///   level(t)  = mean + amplitude * sin(2*pi*(time_of_day - 0.3))
///   a, b      = last two one-step changes divided by step_scale
///   f(t+1)    = f(t) + reversion * (level(t+1) - f(t))
///               + step_scale * (0.2a + 0.8(exp(-2a^2) - 0.5) - 0.2b)
///               + step_scale * noise * N(0, 1)
struct TraceParams {
    int days = 14;
    std::uint64_t seed = 7;
    double mean = 300.0;
    double amplitude = 20.0;
    double step_scale = 40.0;
    double noise = 0.5;
    double reversion = 0.5;
};

/// Timestamps start at 2024-01-01 00:00:00 and advance 5 minutes per point.
std::vector<TimePoint> generate_trace(const TraceParams& params);

} // namespace harmonica
