#include "clbench/layers.hpp"

#include <cmath>

namespace clbench {

void init_uniform_fan_in(Matrix& m, std::int64_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::int64_t>(fan_in, 1)));
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = (2.0 * uniform_unit(rng) - 1.0) * bound;
    }
}

Dense::Dense(std::int64_t in, std::int64_t out, Rng& rng, const std::string& name) {
    weight.name = name + ".weight";
    weight.value.resize(in, out);
    init_uniform_fan_in(weight.value, in, rng);
    weight.grad = Matrix::Zero(in, out);
    bias.name = name + ".bias";
    bias.value.resize(1, out);
    init_uniform_fan_in(bias.value, in, rng);
    bias.grad = Matrix::Zero(1, out);
}

Matrix Dense::apply(const Matrix& x) const {
    Matrix y = x * weight.value;
    y.rowwise() += bias.value.row(0);
    return y;
}

Matrix Dense::forward(const Matrix& x) {
    input_ = x;
    return apply(x);
}

Matrix Dense::backward(const Matrix& grad_out, bool input_grad) {
    weight.grad.noalias() = input_.transpose() * grad_out;
    bias.grad = grad_out.colwise().sum();
    if (!input_grad) return {};
    return grad_out * weight.value.transpose();
}

Conv2d::Conv2d(ConvGeometry geometry, Rng& rng, const std::string& name) : geometry_(geometry) {
    if (geometry.out_height() <= 0 || geometry.out_width() <= 0) {
        throw ShapeError("convolution output would be empty for input " + std::to_string(geometry.height) + "x" +
                         std::to_string(geometry.width));
    }
    const auto fan_in = geometry.patch_size();
    weight.name = name + ".weight";
    weight.value.resize(fan_in, geometry.out_channels);
    init_uniform_fan_in(weight.value, fan_in, rng);
    weight.grad = Matrix::Zero(fan_in, geometry.out_channels);
    bias.name = name + ".bias";
    bias.value.resize(1, geometry.out_channels);
    init_uniform_fan_in(bias.value, fan_in, rng);
    bias.grad = Matrix::Zero(1, geometry.out_channels);
}

Matrix Conv2d::im2col(const Matrix& x) const {
    const auto& g = geometry_;
    if (x.cols() != g.height * g.width * g.channels) {
        throw ShapeError("conv input has " + std::to_string(x.cols()) + " values per sample, expected " +
                         std::to_string(g.height * g.width * g.channels));
    }
    const auto oh = g.out_height();
    const auto ow = g.out_width();
    Matrix patches = Matrix::Zero(x.rows() * oh * ow, g.patch_size());
    for (Eigen::Index n = 0; n < x.rows(); ++n) {
        for (std::int64_t oy = 0; oy < oh; ++oy) {
            for (std::int64_t ox = 0; ox < ow; ++ox) {
                const Eigen::Index row = (n * oh + oy) * ow + ox;
                for (std::int64_t ky = 0; ky < g.kernel; ++ky) {
                    const std::int64_t iy = oy * g.stride + ky - g.padding;
                    if (iy < 0 || iy >= g.height) continue;
                    for (std::int64_t kx = 0; kx < g.kernel; ++kx) {
                        const std::int64_t ix = ox * g.stride + kx - g.padding;
                        if (ix < 0 || ix >= g.width) continue;
                        for (std::int64_t c = 0; c < g.channels; ++c) {
                            patches(row, (ky * g.kernel + kx) * g.channels + c) =
                                x(n, (iy * g.width + ix) * g.channels + c);
                        }
                    }
                }
            }
        }
    }
    return patches;
}

Matrix Conv2d::to_rows(const Matrix& per_patch, Eigen::Index samples) const {
    const auto positions = geometry_.out_height() * geometry_.out_width();
    const auto channels = geometry_.out_channels;
    Matrix out(samples, positions * channels);
    for (Eigen::Index n = 0; n < samples; ++n) {
        for (std::int64_t p = 0; p < positions; ++p) {
            out.row(n).segment(p * channels, channels) = per_patch.row(n * positions + p);
        }
    }
    return out;
}

Matrix Conv2d::apply(const Matrix& x) const {
    Matrix per_patch = im2col(x) * weight.value;
    per_patch.rowwise() += bias.value.row(0);
    return to_rows(per_patch, x.rows());
}

Matrix Conv2d::forward(const Matrix& x) {
    patches_ = im2col(x);
    batch_ = x.rows();
    Matrix per_patch = patches_ * weight.value;
    per_patch.rowwise() += bias.value.row(0);
    return to_rows(per_patch, batch_);
}

Matrix Conv2d::backward(const Matrix& grad_out, bool input_grad) {
    const auto& g = geometry_;
    const auto oh = g.out_height();
    const auto ow = g.out_width();
    const auto positions = oh * ow;
    Matrix grad_patch(batch_ * positions, g.out_channels);
    for (Eigen::Index n = 0; n < batch_; ++n) {
        for (std::int64_t p = 0; p < positions; ++p) {
            grad_patch.row(n * positions + p) = grad_out.row(n).segment(p * g.out_channels, g.out_channels);
        }
    }
    weight.grad.noalias() = patches_.transpose() * grad_patch;
    bias.grad = grad_patch.colwise().sum();
    if (!input_grad) return {};
    const Matrix grad_cols = grad_patch * weight.value.transpose();

    Matrix grad_in = Matrix::Zero(batch_, g.height * g.width * g.channels);
    for (Eigen::Index n = 0; n < batch_; ++n) {
        for (std::int64_t oy = 0; oy < oh; ++oy) {
            for (std::int64_t ox = 0; ox < ow; ++ox) {
                const Eigen::Index row = (n * oh + oy) * ow + ox;
                for (std::int64_t ky = 0; ky < g.kernel; ++ky) {
                    const std::int64_t iy = oy * g.stride + ky - g.padding;
                    if (iy < 0 || iy >= g.height) continue;
                    for (std::int64_t kx = 0; kx < g.kernel; ++kx) {
                        const std::int64_t ix = ox * g.stride + kx - g.padding;
                        if (ix < 0 || ix >= g.width) continue;
                        for (std::int64_t c = 0; c < g.channels; ++c) {
                            grad_in(n, (iy * g.width + ix) * g.channels + c) +=
                                grad_cols(row, (ky * g.kernel + kx) * g.channels + c);
                        }
                    }
                }
            }
        }
    }
    return grad_in;
}

Matrix Relu::forward(const Matrix& x) {
    mask_ = (x.array() > 0.0).cast<double>().matrix();
    return x.cwiseProduct(mask_);
}

Matrix Relu::backward(const Matrix& grad_out) const { return grad_out.cwiseProduct(mask_); }

}  // namespace clbench
