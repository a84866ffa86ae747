#include "harmonica/kernels.hpp"

#include "harmonica/error.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>

namespace harmonica::kernels {

namespace {

std::size_t row_count(std::span<const double> rows, std::span<const double> targets,
                      std::size_t dim) {
    if (dim == 0 || rows.size() != targets.size() * dim) {
        throw Error(ErrorKind::input, "kernel input shape mismatch");
    }
    return targets.size();
}

std::size_t block_count(std::size_t n) { return (n + kBlockRows - 1) / kBlockRows; }

// Upper triangle of X'X and X'y for rows [begin, end).
void accumulate_rows(std::span<const double> rows, std::span<const double> targets,
                     std::size_t dim, std::size_t begin, std::size_t end, double* gram,
                     double* rhs) {
    for (std::size_t r = begin; r < end; ++r) {
        const double* x = rows.data() + r * dim;
        const double y = targets[r];
        for (std::size_t i = 0; i < dim; ++i) {
            const double xi = x[i];
            rhs[i] += xi * y;
            double* g = gram + i * dim;
            for (std::size_t j = i; j < dim; ++j) {
                g[j] += xi * x[j];
            }
        }
    }
}

void mirror_upper(NormalEquations& eq) {
    for (std::size_t i = 0; i < eq.dim; ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            eq.gram[i * eq.dim + j] = eq.gram[j * eq.dim + i];
        }
    }
}

void check_net(const MlpLayers& net) {
    if (net.w1.size() != net.inputs * net.hidden || net.b1.size() != net.hidden ||
        net.w2.size() != net.hidden) {
        throw Error(ErrorKind::input, "mlp parameter shape mismatch");
    }
}

// Unscaled sums for rows [begin, end): gradient fields hold sum(r * dout/dparam),
// loss holds sum(0.5 * r^2).
void mlp_accumulate(const MlpLayers& net, std::span<const double> inputs,
                    std::span<const double> targets, std::size_t begin, std::size_t end,
                    MlpGradient& acc, std::vector<double>& hidden) {
    const std::size_t in = net.inputs;
    const std::size_t hid = net.hidden;
    for (std::size_t r = begin; r < end; ++r) {
        const double* x = inputs.data() + r * in;
        double out = net.b2;
        for (std::size_t h = 0; h < hid; ++h) {
            const double* w = net.w1.data() + h * in;
            double a = net.b1[h];
            for (std::size_t i = 0; i < in; ++i) a += w[i] * x[i];
            hidden[h] = std::tanh(a);
            out += net.w2[h] * hidden[h];
        }
        const double resid = out - targets[r];
        acc.loss += 0.5 * resid * resid;
        acc.b2 += resid;
        for (std::size_t h = 0; h < hid; ++h) {
            const double z = hidden[h];
            acc.w2[h] += resid * z;
            const double delta = resid * net.w2[h] * (1.0 - z * z);
            acc.b1[h] += delta;
            double* gw = acc.w1.data() + h * in;
            for (std::size_t i = 0; i < in; ++i) gw[i] += delta * x[i];
        }
    }
}

MlpGradient zero_gradient(const MlpLayers& net) {
    MlpGradient g;
    g.w1.assign(net.w1.size(), 0.0);
    g.b1.assign(net.hidden, 0.0);
    g.w2.assign(net.hidden, 0.0);
    return g;
}

void add_into(MlpGradient& dst, const MlpGradient& src) {
    dst.loss += src.loss;
    dst.b2 += src.b2;
    for (std::size_t i = 0; i < dst.w1.size(); ++i) dst.w1[i] += src.w1[i];
    for (std::size_t i = 0; i < dst.b1.size(); ++i) dst.b1[i] += src.b1[i];
    for (std::size_t i = 0; i < dst.w2.size(); ++i) dst.w2[i] += src.w2[i];
}

void scale(MlpGradient& g, double factor) {
    g.loss *= factor;
    g.b2 *= factor;
    for (auto& v : g.w1) v *= factor;
    for (auto& v : g.b1) v *= factor;
    for (auto& v : g.w2) v *= factor;
}

std::size_t mlp_rows(const MlpLayers& net, std::span<const double> inputs,
                     std::span<const double> targets) {
    check_net(net);
    const std::size_t n = row_count(inputs, targets, net.inputs);
    if (n == 0) throw Error(ErrorKind::insufficient_data, "mlp gradient over zero rows");
    return n;
}

} // namespace

NormalEquations accumulate_normal_equations_serial(std::span<const double> rows,
                                                   std::span<const double> targets,
                                                   std::size_t dim) {
    const std::size_t n = row_count(rows, targets, dim);
    NormalEquations eq{dim, std::vector<double>(dim * dim, 0.0), std::vector<double>(dim, 0.0)};
    accumulate_rows(rows, targets, dim, 0, n, eq.gram.data(), eq.rhs.data());
    mirror_upper(eq);
    return eq;
}

NormalEquations accumulate_normal_equations(std::span<const double> rows,
                                            std::span<const double> targets, std::size_t dim) {
    const std::size_t n = row_count(rows, targets, dim);
    const std::size_t blocks = block_count(n);
    const std::size_t stride = dim * dim + dim;
    std::vector<double> partial(blocks * stride, 0.0);

#pragma omp parallel for schedule(static)
    for (long b = 0; b < static_cast<long>(blocks); ++b) {
        const std::size_t begin = static_cast<std::size_t>(b) * kBlockRows;
        const std::size_t end = std::min(n, begin + kBlockRows);
        double* slot = partial.data() + static_cast<std::size_t>(b) * stride;
        accumulate_rows(rows, targets, dim, begin, end, slot, slot + dim * dim);
    }

    NormalEquations eq{dim, std::vector<double>(dim * dim, 0.0), std::vector<double>(dim, 0.0)};
    for (std::size_t b = 0; b < blocks; ++b) {
        const double* slot = partial.data() + b * stride;
        for (std::size_t i = 0; i < dim * dim; ++i) eq.gram[i] += slot[i];
        for (std::size_t i = 0; i < dim; ++i) eq.rhs[i] += slot[dim * dim + i];
    }
    mirror_upper(eq);
    return eq;
}

MlpGradient mlp_loss_gradient_serial(const MlpLayers& net, std::span<const double> inputs,
                                     std::span<const double> targets) {
    const std::size_t n = mlp_rows(net, inputs, targets);
    MlpGradient g = zero_gradient(net);
    std::vector<double> hidden(net.hidden);
    mlp_accumulate(net, inputs, targets, 0, n, g, hidden);
    scale(g, 1.0 / static_cast<double>(n));
    return g;
}

MlpGradient mlp_loss_gradient(const MlpLayers& net, std::span<const double> inputs,
                              std::span<const double> targets) {
    const std::size_t n = mlp_rows(net, inputs, targets);
    const std::size_t blocks = block_count(n);
    std::vector<MlpGradient> partial(blocks, zero_gradient(net));

#pragma omp parallel
    {
        std::vector<double> hidden(net.hidden);
#pragma omp for schedule(static)
        for (long b = 0; b < static_cast<long>(blocks); ++b) {
            const std::size_t begin = static_cast<std::size_t>(b) * kBlockRows;
            const std::size_t end = std::min(n, begin + kBlockRows);
            mlp_accumulate(net, inputs, targets, begin, end, partial[static_cast<std::size_t>(b)],
                           hidden);
        }
    }

    MlpGradient g = zero_gradient(net);
    for (const auto& p : partial) add_into(g, p);
    scale(g, 1.0 / static_cast<double>(n));
    return g;
}

double mlp_forward(const MlpLayers& net, std::span<const double> input) {
    double out = net.b2;
    for (std::size_t h = 0; h < net.hidden; ++h) {
        const double* w = net.w1.data() + h * net.inputs;
        double a = net.b1[h];
        for (std::size_t i = 0; i < net.inputs; ++i) a += w[i] * input[i];
        out += net.w2[h] * std::tanh(a);
    }
    return out;
}

double mlp_loss(const MlpLayers& net, std::span<const double> inputs,
                std::span<const double> targets) {
    const auto out = mlp_forward_batch(net, inputs);
    double loss = 0.0;
    for (std::size_t r = 0; r < out.size(); ++r) {
        const double resid = out[r] - targets[r];
        loss += 0.5 * resid * resid;
    }
    return loss / static_cast<double>(out.size());
}

std::vector<double> mlp_forward_batch_serial(const MlpLayers& net,
                                             std::span<const double> inputs) {
    check_net(net);
    const std::size_t n = inputs.size() / net.inputs;
    std::vector<double> out(n);
    for (std::size_t r = 0; r < n; ++r) {
        out[r] = mlp_forward(net, inputs.subspan(r * net.inputs, net.inputs));
    }
    return out;
}

std::vector<double> mlp_forward_batch(const MlpLayers& net, std::span<const double> inputs) {
    check_net(net);
    const std::size_t n = inputs.size() / net.inputs;
    std::vector<double> out(n);
#pragma omp parallel for schedule(static)
    for (long r = 0; r < static_cast<long>(n); ++r) {
        const auto row = static_cast<std::size_t>(r);
        out[row] = mlp_forward(net, inputs.subspan(row * net.inputs, net.inputs));
    }
    return out;
}

int max_threads() { return omp_get_max_threads(); }

void set_threads(int n) {
    if (n >= 1) omp_set_num_threads(n);
}

} // namespace harmonica::kernels
