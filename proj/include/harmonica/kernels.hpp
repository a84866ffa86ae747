#pragma once

// Data-parallel inner loops used by model fitting.
//
// Each kernel has an OpenMP implementation and a `_serial` reference. The
// parallel versions reduce over fixed-size row blocks and then combine the
// block partials in block order, so their output does not depend on the
// thread count. They are not bit-identical to the serial references (the
// summation order differs); tests compare the two within a relative tolerance.

#include <cstddef>
#include <span>
#include <vector>

namespace harmonica::kernels {

/// Rows per reduction block. Changing it changes results in the last bits.
inline constexpr std::size_t kBlockRows = 256;

/// Symmetric Gram matrix X'X (dim x dim, row-major) and X'y.
struct NormalEquations {
    std::size_t dim = 0;
    std::vector<double> gram;
    std::vector<double> rhs;
};

/// `rows` holds n x dim values, row-major; `targets` holds n values.
NormalEquations accumulate_normal_equations(std::span<const double> rows,
                                            std::span<const double> targets, std::size_t dim);
NormalEquations accumulate_normal_equations_serial(std::span<const double> rows,
                                                   std::span<const double> targets,
                                                   std::size_t dim);

/// One-hidden-layer tanh network, w1 is hidden x inputs row-major.
struct MlpLayers {
    std::size_t inputs = 0;
    std::size_t hidden = 0;
    std::vector<double> w1;
    std::vector<double> b1;
    std::vector<double> w2;
    double b2 = 0.0;
};

/// Gradient of the loss 0.5 * mean((out - target)^2) with respect to every parameter.
struct MlpGradient {
    double loss = 0.0;
    std::vector<double> w1;
    std::vector<double> b1;
    std::vector<double> w2;
    double b2 = 0.0;
};

MlpGradient mlp_loss_gradient(const MlpLayers& net, std::span<const double> inputs,
                              std::span<const double> targets);
MlpGradient mlp_loss_gradient_serial(const MlpLayers& net, std::span<const double> inputs,
                                     std::span<const double> targets);

/// Loss only (no gradient); used for monitoring and tests.
double mlp_loss(const MlpLayers& net, std::span<const double> inputs,
                std::span<const double> targets);

/// Forward pass for a single row.
double mlp_forward(const MlpLayers& net, std::span<const double> input);

/// Forward pass over n rows. Rows are independent, so parallel and serial agree bit-for-bit.
std::vector<double> mlp_forward_batch(const MlpLayers& net, std::span<const double> inputs);
std::vector<double> mlp_forward_batch_serial(const MlpLayers& net,
                                             std::span<const double> inputs);

/// Worker count reported by the OpenMP runtime.
int max_threads();
/// Sets the OpenMP worker count for subsequent parallel regions.
void set_threads(int n);

} // namespace harmonica::kernels
