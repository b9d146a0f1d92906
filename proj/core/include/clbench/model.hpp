#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "clbench/common.hpp"
#include "clbench/config.hpp"
#include "clbench/images.hpp"
#include "clbench/layers.hpp"

namespace clbench {

enum class Arch { mlp2, smallconv };

[[nodiscard]] Arch parse_arch(const std::string& name);

/// Non-owning view of an affine layer (Dense or Conv2d): its weight, bias and
/// the row inputs it saw in the last training forward.
struct AffineView {
    std::string name;
    Parameter* weight = nullptr;
    Parameter* bias = nullptr;
    const Matrix* layer_input = nullptr;
};

/// Feature encoder x -> f in R^d.
class Backbone {
public:
    /// mlp2: two hidden Dense+ReLU layers, d = hidden[1]. smallconv: three
    /// stride-2 3x3 conv blocks (channels from `hidden` when it has three
    /// entries, else 16/32/32) and a Dense+ReLU neck of size feature_dim.
    static Backbone build(Arch arch, ImageShape input_shape, const BackboneConfig& cfg, std::uint64_t seed);

    [[nodiscard]] Matrix apply(const Matrix& x) const;
    Matrix forward(const Matrix& x);
    /// Backpropagates dL/df; fills parameter gradients. Returns dL/dx, or an
    /// empty matrix when `input_grad` is false.
    Matrix backward(const Matrix& grad_features, bool input_grad = true);

    [[nodiscard]] std::int64_t input_dim() const noexcept { return input_dim_; }
    [[nodiscard]] std::int64_t feature_dim() const noexcept { return feature_dim_; }
    [[nodiscard]] Arch arch() const noexcept { return arch_; }

    [[nodiscard]] std::vector<Parameter*> parameters();
    [[nodiscard]] std::vector<const Parameter*> parameters() const;
    [[nodiscard]] std::vector<AffineView> affine_layers();
    /// Input rows of every affine layer for `x`, without touching training caches.
    [[nodiscard]] std::vector<Matrix> layer_inputs(const Matrix& x) const;
    /// Row width of each affine layer's input.
    [[nodiscard]] std::vector<std::int64_t> affine_input_dims() const;

    void freeze();
    [[nodiscard]] bool frozen() const noexcept { return frozen_; }

    /// While enabled, each training forward appends its per-layer inputs.
    void set_capture(bool enabled);
    [[nodiscard]] bool capture_enabled() const noexcept { return capture_; }
    [[nodiscard]] const std::vector<Matrix>& captured() const noexcept { return captured_; }
    void clear_capture();

private:
    Arch arch_ = Arch::mlp2;
    std::int64_t input_dim_ = 0;
    std::int64_t feature_dim_ = 0;
    std::vector<Layer> layers_;
    bool frozen_ = false;
    bool capture_ = false;
    std::vector<Matrix> captured_;
};

/// Linear classifier over features, one row per learner label.
class ClassifierHead {
public:
    explicit ClassifierHead(std::int64_t feature_dim = 0);

    [[nodiscard]] std::int64_t classes() const noexcept { return weight.value.rows(); }
    [[nodiscard]] std::int64_t feature_dim() const noexcept { return weight.value.cols(); }

    /// Appends rows initialised with the layer init rule; existing rows are untouched.
    void expand(std::int64_t new_classes, Rng& rng);

    [[nodiscard]] Matrix apply(const Matrix& features) const;
    Matrix forward(const Matrix& features);
    Matrix backward(const Matrix& grad_logits);
    [[nodiscard]] const Matrix& layer_input() const noexcept { return input_; }

    Parameter weight;  // (C x d)
    Parameter bias;    // (1 x C)

private:
    Matrix input_;
};

[[nodiscard]] ClassifierHead expand_head(ClassifierHead head, std::int64_t new_class_count, Rng& rng);

/// Backbone plus head; the unit of training and snapshotting.
class Model {
public:
    Model(Backbone backbone, std::uint64_t seed);

    [[nodiscard]] Matrix logits(const Matrix& x) const;
    [[nodiscard]] Matrix features(const Matrix& x) const;
    Matrix forward(const Matrix& x);
    void backward(const Matrix& grad_logits);

    void expand_head(std::int64_t new_classes);

    [[nodiscard]] std::vector<Parameter*> parameters();
    [[nodiscard]] std::vector<const Parameter*> parameters() const;
    [[nodiscard]] std::vector<Parameter*> trainable_parameters();
    [[nodiscard]] std::int64_t parameter_count() const;

    [[nodiscard]] Vector flat_parameters() const;
    void set_flat_parameters(const Vector& flat);
    [[nodiscard]] Vector flat_gradients() const;
    void zero_grad();

    [[nodiscard]] std::map<std::string, Matrix> state() const;
    void load_state(const std::map<std::string, Matrix>& state);

    Backbone backbone;
    ClassifierHead head;

private:
    Rng init_rng_;
};

struct ComponentCensus {
    std::string name;
    std::int64_t trainable = 0;
    std::int64_t frozen = 0;
};

struct ParameterCensus {
    std::vector<ComponentCensus> components;
    /// (layer name, input width) for each capture-enabled affine layer.
    std::vector<std::pair<std::string, std::int64_t>> activation_dims;

    [[nodiscard]] std::int64_t trainable() const noexcept;
    [[nodiscard]] std::int64_t frozen() const noexcept;
    [[nodiscard]] nlohmann::json to_json() const;
};

/// A named group of parameters to count.
struct CensusComponent {
    std::string name;
    std::vector<const Parameter*> parameters;
};

[[nodiscard]] ParameterCensus census(std::span<const CensusComponent> components);
[[nodiscard]] ParameterCensus census(const Model& model);

/// Frozen random projection P (M x d), ReLU, then ridge decoding of class sums.
class RandomProjectionHead {
public:
    RandomProjectionHead(std::int64_t feature_dim, std::int64_t projection_dim, double ridge, std::uint64_t seed);

    /// Accumulates G += H^T H and per-class sums of H for H = max(0, F P^T).
    void fit(const Matrix& features, std::span<const std::int64_t> labels);
    /// Ridge scores (n x C) over every class fitted so far.
    [[nodiscard]] Matrix scores(const Matrix& features) const;
    [[nodiscard]] std::int64_t classify(const RowVector& feature) const;

    [[nodiscard]] Matrix project(const Matrix& features) const;
    [[nodiscard]] const Matrix& gram() const noexcept { return gram_; }
    /// (M x C) column c is the sum of projected features of class c.
    [[nodiscard]] const Matrix& class_sums() const noexcept { return class_sums_; }
    [[nodiscard]] const Parameter& projection() const noexcept { return projection_; }
    [[nodiscard]] std::int64_t classes() const noexcept { return class_sums_.cols(); }
    [[nodiscard]] std::int64_t projection_dim() const noexcept { return projection_.value.rows(); }
    [[nodiscard]] double ridge() const noexcept { return ridge_; }

private:
    Parameter projection_;
    double ridge_;
    Matrix gram_;
    Matrix class_sums_;
    bool fitted_ = false;
    mutable Matrix decoder_;
    mutable bool decoder_valid_ = false;
};

/// Flat map of named arrays stored as float32 little-endian, plus census.json.
void save_checkpoint(const std::map<std::string, Matrix>& arrays, const ParameterCensus& census_info,
                     const std::filesystem::path& directory);
[[nodiscard]] std::map<std::string, Matrix> load_checkpoint_arrays(const std::filesystem::path& directory);

}  // namespace clbench
