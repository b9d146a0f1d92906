#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "clbench/common.hpp"

namespace clbench {

struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;
    bool trainable = true;

    [[nodiscard]] std::int64_t size() const noexcept { return value.size(); }
};

/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)), the init rule shared by every layer and the head.
void init_uniform_fan_in(Matrix& m, std::int64_t fan_in, Rng& rng);

/// Affine layers see their input as rows `X` and compute `X W + b`, with
/// W stored (in x out). Projection methods act on the row space of W.
class Dense {
public:
    Dense(std::int64_t in, std::int64_t out, Rng& rng, const std::string& name);

    [[nodiscard]] Matrix apply(const Matrix& x) const;
    Matrix forward(const Matrix& x);
    /// Returns dL/dx, or an empty matrix when `input_grad` is false.
    Matrix backward(const Matrix& grad_out, bool input_grad = true);

    [[nodiscard]] std::int64_t in_dim() const noexcept { return weight.value.rows(); }
    [[nodiscard]] std::int64_t out_dim() const noexcept { return weight.value.cols(); }
    /// Rows fed to `X W` during the last forward.
    [[nodiscard]] const Matrix& layer_input() const noexcept { return input_; }

    Parameter weight;
    Parameter bias;

private:
    Matrix input_;
};

struct ConvGeometry {
    std::int64_t height = 0;
    std::int64_t width = 0;
    std::int64_t channels = 0;
    std::int64_t out_channels = 0;
    std::int64_t kernel = 3;
    std::int64_t stride = 2;
    std::int64_t padding = 1;

    [[nodiscard]] std::int64_t out_height() const noexcept { return (height + 2 * padding - kernel) / stride + 1; }
    [[nodiscard]] std::int64_t out_width() const noexcept { return (width + 2 * padding - kernel) / stride + 1; }
    [[nodiscard]] std::int64_t patch_size() const noexcept { return kernel * kernel * channels; }
};

/// 2-D convolution over HWC-flattened rows, lowered to an affine map on
/// im2col patches, so the "layer input" is the patch matrix.
class Conv2d {
public:
    Conv2d(ConvGeometry geometry, Rng& rng, const std::string& name);

    [[nodiscard]] Matrix apply(const Matrix& x) const;
    Matrix forward(const Matrix& x);
    /// Returns dL/dx, or an empty matrix when `input_grad` is false.
    Matrix backward(const Matrix& grad_out, bool input_grad = true);

    [[nodiscard]] const ConvGeometry& geometry() const noexcept { return geometry_; }
    [[nodiscard]] std::int64_t in_dim() const noexcept { return geometry_.patch_size(); }
    [[nodiscard]] std::int64_t out_dim() const noexcept { return geometry_.out_channels; }
    [[nodiscard]] const Matrix& layer_input() const noexcept { return patches_; }
    [[nodiscard]] std::int64_t output_size() const noexcept {
        return geometry_.out_height() * geometry_.out_width() * geometry_.out_channels;
    }

    [[nodiscard]] Matrix im2col(const Matrix& x) const;

    Parameter weight;
    Parameter bias;

private:
    [[nodiscard]] Matrix to_rows(const Matrix& per_patch, Eigen::Index samples) const;

    ConvGeometry geometry_;
    Matrix patches_;
    Eigen::Index batch_ = 0;
};

class Relu {
public:
    [[nodiscard]] static Matrix apply(const Matrix& x) { return x.cwiseMax(0.0); }
    Matrix forward(const Matrix& x);
    Matrix backward(const Matrix& grad_out) const;

private:
    Matrix mask_;
};

using Layer = std::variant<Dense, Conv2d, Relu>;

}  // namespace clbench
