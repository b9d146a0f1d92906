#include "clbench/model.hpp"

#include <algorithm>
#include <iterator>
#include <type_traits>

namespace clbench {

Arch parse_arch(const std::string& name) {
    if (name == "mlp2") return Arch::mlp2;
    if (name == "smallconv") return Arch::smallconv;
    throw ConfigError("backbone.arch", "unsupported architecture '" + name + "' (accepted: mlp2, smallconv)");
}

Backbone Backbone::build(Arch arch, ImageShape input_shape, const BackboneConfig& cfg, std::uint64_t seed) {
    if (input_shape.size() <= 0) {
        throw ShapeError("backbone input shape must be non-empty");
    }
    Rng rng(derive_seed(seed, "backbone"));
    Backbone backbone;
    backbone.arch_ = arch;
    backbone.input_dim_ = input_shape.size();
    switch (arch) {
        case Arch::mlp2: {
            if (cfg.hidden.size() != 2) {
                throw ConfigError("backbone.hidden", "mlp2 needs exactly two hidden sizes");
            }
            backbone.layers_.emplace_back(Dense(input_shape.size(), cfg.hidden[0], rng, "encoder.fc1"));
            backbone.layers_.emplace_back(Relu{});
            backbone.layers_.emplace_back(Dense(cfg.hidden[0], cfg.hidden[1], rng, "encoder.fc2"));
            backbone.layers_.emplace_back(Relu{});
            backbone.feature_dim_ = cfg.hidden[1];
            break;
        }
        case Arch::smallconv: {
            std::vector<std::int64_t> channels = {16, 32, 32};
            if (cfg.hidden.size() == 3) {
                channels = cfg.hidden;
            }
            ConvGeometry geometry{input_shape.height, input_shape.width, input_shape.channels, 0, 3, 2, 1};
            for (std::size_t block = 0; block < 3; ++block) {
                geometry.out_channels = channels[block];
                backbone.layers_.emplace_back(Conv2d(geometry, rng, "encoder.conv" + std::to_string(block + 1)));
                backbone.layers_.emplace_back(Relu{});
                geometry = {geometry.out_height(), geometry.out_width(), geometry.out_channels, 0, 3, 2, 1};
            }
            const auto flat = geometry.height * geometry.width * geometry.channels;
            backbone.layers_.emplace_back(Dense(flat, cfg.feature_dim, rng, "encoder.neck"));
            backbone.layers_.emplace_back(Relu{});
            backbone.feature_dim_ = cfg.feature_dim;
            break;
        }
    }
    return backbone;
}

Matrix Backbone::apply(const Matrix& x) const {
    if (x.cols() != input_dim_) {
        throw ShapeError("backbone expects " + std::to_string(input_dim_) + " inputs, got " + std::to_string(x.cols()));
    }
    Matrix h = x;
    for (const auto& layer : layers_) {
        h = std::visit([&](const auto& l) { return Matrix(l.apply(h)); }, layer);
    }
    return h;
}

Matrix Backbone::forward(const Matrix& x) {
    if (x.cols() != input_dim_) {
        throw ShapeError("backbone expects " + std::to_string(input_dim_) + " inputs, got " + std::to_string(x.cols()));
    }
    Matrix h = x;
    std::size_t affine = 0;
    for (auto& layer : layers_) {
        h = std::visit([&](auto& l) { return Matrix(l.forward(h)); }, layer);
        if (capture_) {
            if (const auto* dense = std::get_if<Dense>(&layer)) {
                auto& store = captured_.at(affine++);
                store.conservativeResize(store.rows() + dense->layer_input().rows(), dense->in_dim());
                store.bottomRows(dense->layer_input().rows()) = dense->layer_input();
            } else if (const auto* conv = std::get_if<Conv2d>(&layer)) {
                auto& store = captured_.at(affine++);
                store.conservativeResize(store.rows() + conv->layer_input().rows(), conv->in_dim());
                store.bottomRows(conv->layer_input().rows()) = conv->layer_input();
            }
        }
    }
    return h;
}

Matrix Backbone::backward(const Matrix& grad_features, bool input_grad) {
    Matrix g = grad_features;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
        const bool first = std::next(it) == layers_.rend();
        g = std::visit(
            [&](auto& l) {
                if constexpr (std::is_same_v<std::decay_t<decltype(l)>, Relu>) {
                    return Matrix(l.backward(g));
                } else {
                    return Matrix(l.backward(g, input_grad || !first));
                }
            },
            *it);
    }
    return g;
}

std::vector<Parameter*> Backbone::parameters() {
    std::vector<Parameter*> out;
    for (auto& layer : layers_) {
        if (auto* dense = std::get_if<Dense>(&layer)) {
            out.push_back(&dense->weight);
            out.push_back(&dense->bias);
        } else if (auto* conv = std::get_if<Conv2d>(&layer)) {
            out.push_back(&conv->weight);
            out.push_back(&conv->bias);
        }
    }
    return out;
}

std::vector<const Parameter*> Backbone::parameters() const {
    std::vector<const Parameter*> out;
    for (auto* p : const_cast<Backbone*>(this)->parameters()) {
        out.push_back(p);
    }
    return out;
}

std::vector<AffineView> Backbone::affine_layers() {
    std::vector<AffineView> out;
    for (auto& layer : layers_) {
        if (auto* dense = std::get_if<Dense>(&layer)) {
            const auto name = dense->weight.name.substr(0, dense->weight.name.rfind('.'));
            out.push_back({name, &dense->weight, &dense->bias, &dense->layer_input()});
        } else if (auto* conv = std::get_if<Conv2d>(&layer)) {
            const auto name = conv->weight.name.substr(0, conv->weight.name.rfind('.'));
            out.push_back({name, &conv->weight, &conv->bias, &conv->layer_input()});
        }
    }
    return out;
}

std::vector<Matrix> Backbone::layer_inputs(const Matrix& x) const {
    std::vector<Matrix> inputs;
    Matrix h = x;
    for (const auto& layer : layers_) {
        if (const auto* conv = std::get_if<Conv2d>(&layer)) {
            inputs.push_back(conv->im2col(h));
        } else if (std::holds_alternative<Dense>(layer)) {
            inputs.push_back(h);
        }
        h = std::visit([&](const auto& l) { return Matrix(l.apply(h)); }, layer);
    }
    return inputs;
}

std::vector<std::int64_t> Backbone::affine_input_dims() const {
    std::vector<std::int64_t> dims;
    for (const auto& layer : layers_) {
        if (const auto* dense = std::get_if<Dense>(&layer)) {
            dims.push_back(dense->in_dim());
        } else if (const auto* conv = std::get_if<Conv2d>(&layer)) {
            dims.push_back(conv->in_dim());
        }
    }
    return dims;
}

void Backbone::freeze() {
    frozen_ = true;
    for (auto* p : parameters()) {
        p->trainable = false;
        p->grad.setZero();
    }
}

void Backbone::set_capture(bool enabled) {
    capture_ = enabled;
    if (enabled && captured_.empty()) {
        clear_capture();
    }
}

void Backbone::clear_capture() {
    captured_.clear();
    for (const auto dim : affine_input_dims()) {
        captured_.emplace_back(0, dim);
    }
}

ClassifierHead::ClassifierHead(std::int64_t feature_dim) {
    weight.name = "head.weight";
    weight.value.resize(0, feature_dim);
    weight.grad.resize(0, feature_dim);
    bias.name = "head.bias";
    bias.value.resize(1, 0);
    bias.grad.resize(1, 0);
}

void ClassifierHead::expand(std::int64_t new_classes, Rng& rng) {
    if (new_classes <= 0) {
        throw Error("head expansion needs a positive class count, got " + std::to_string(new_classes));
    }
    const auto old = classes();
    const auto d = feature_dim();
    Matrix rows(new_classes, d);
    init_uniform_fan_in(rows, d, rng);
    Matrix bias_rows(1, new_classes);
    init_uniform_fan_in(bias_rows, d, rng);

    weight.value.conservativeResize(old + new_classes, d);
    weight.value.bottomRows(new_classes) = rows;
    bias.value.conservativeResize(1, old + new_classes);
    bias.value.rightCols(new_classes) = bias_rows;
    weight.grad = Matrix::Zero(old + new_classes, d);
    bias.grad = Matrix::Zero(1, old + new_classes);
}

Matrix ClassifierHead::apply(const Matrix& features) const {
    Matrix logits = features * weight.value.transpose();
    logits.rowwise() += bias.value.row(0);
    return logits;
}

Matrix ClassifierHead::forward(const Matrix& features) {
    input_ = features;
    return apply(features);
}

Matrix ClassifierHead::backward(const Matrix& grad_logits) {
    weight.grad.noalias() = grad_logits.transpose() * input_;
    bias.grad = grad_logits.colwise().sum();
    return grad_logits * weight.value;
}

ClassifierHead expand_head(ClassifierHead head, std::int64_t new_class_count, Rng& rng) {
    head.expand(new_class_count, rng);
    return head;
}

Model::Model(Backbone backbone_in, std::uint64_t seed)
    : backbone(std::move(backbone_in)), head(backbone.feature_dim()), init_rng_(derive_seed(seed, "head")) {}

Matrix Model::logits(const Matrix& x) const { return head.apply(backbone.apply(x)); }

Matrix Model::features(const Matrix& x) const { return backbone.apply(x); }

Matrix Model::forward(const Matrix& x) { return head.forward(backbone.forward(x)); }

void Model::backward(const Matrix& grad_logits) {
    const Matrix grad_features = head.backward(grad_logits);
    if (!backbone.frozen()) {
        backbone.backward(grad_features, false);
    }
}

void Model::expand_head(std::int64_t new_classes) { head.expand(new_classes, init_rng_); }

std::vector<Parameter*> Model::parameters() {
    auto out = backbone.parameters();
    out.push_back(&head.weight);
    out.push_back(&head.bias);
    return out;
}

std::vector<const Parameter*> Model::parameters() const {
    auto out = backbone.parameters();
    out.push_back(&head.weight);
    out.push_back(&head.bias);
    return out;
}

std::vector<Parameter*> Model::trainable_parameters() {
    std::vector<Parameter*> out;
    for (auto* p : parameters()) {
        if (p->trainable) {
            out.push_back(p);
        }
    }
    return out;
}

std::int64_t Model::parameter_count() const {
    std::int64_t total = 0;
    for (const auto* p : parameters()) {
        total += p->size();
    }
    return total;
}

Vector Model::flat_parameters() const {
    Vector flat(parameter_count());
    Eigen::Index offset = 0;
    for (const auto* p : parameters()) {
        flat.segment(offset, p->size()) = Eigen::Map<const Vector>(p->value.data(), p->size());
        offset += p->size();
    }
    return flat;
}

void Model::set_flat_parameters(const Vector& flat) {
    if (flat.size() != parameter_count()) {
        throw ShapeError("flat parameter vector has " + std::to_string(flat.size()) + " entries, model has " +
                         std::to_string(parameter_count()));
    }
    Eigen::Index offset = 0;
    for (auto* p : parameters()) {
        Eigen::Map<Vector>(p->value.data(), p->size()) = flat.segment(offset, p->size());
        offset += p->size();
    }
}

Vector Model::flat_gradients() const {
    Vector flat(parameter_count());
    Eigen::Index offset = 0;
    for (const auto* p : parameters()) {
        if (p->grad.size() == p->size()) {
            flat.segment(offset, p->size()) = Eigen::Map<const Vector>(p->grad.data(), p->size());
        } else {
            flat.segment(offset, p->size()).setZero();
        }
        offset += p->size();
    }
    return flat;
}

void Model::zero_grad() {
    for (auto* p : parameters()) {
        p->grad = Matrix::Zero(p->value.rows(), p->value.cols());
    }
}

std::map<std::string, Matrix> Model::state() const {
    std::map<std::string, Matrix> out;
    for (const auto* p : parameters()) {
        out[p->name] = p->value;
    }
    return out;
}

void Model::load_state(const std::map<std::string, Matrix>& state) {
    const auto head_it = state.find("head.weight");
    if (head_it != state.end() && head_it->second.rows() > head.classes()) {
        expand_head(head_it->second.rows() - head.classes());
    }
    for (auto* p : parameters()) {
        const auto it = state.find(p->name);
        if (it == state.end()) {
            throw ShapeError("checkpoint lacks array '" + p->name + "'");
        }
        if (it->second.rows() != p->value.rows() || it->second.cols() != p->value.cols()) {
            throw ShapeError("checkpoint array '" + p->name + "' has the wrong shape");
        }
        p->value = it->second;
    }
}

std::int64_t ParameterCensus::trainable() const noexcept {
    std::int64_t total = 0;
    for (const auto& c : components) total += c.trainable;
    return total;
}

std::int64_t ParameterCensus::frozen() const noexcept {
    std::int64_t total = 0;
    for (const auto& c : components) total += c.frozen;
    return total;
}

nlohmann::json ParameterCensus::to_json() const {
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& c : components) {
        comps.push_back({{"name", c.name}, {"trainable", c.trainable}, {"frozen", c.frozen}});
    }
    nlohmann::json dims = nlohmann::json::array();
    for (const auto& [name, dim] : activation_dims) {
        dims.push_back({{"layer", name}, {"input_dim", dim}});
    }
    return {{"components", comps},
            {"trainable", trainable()},
            {"frozen", frozen()},
            {"activation_dims", dims}};
}

ParameterCensus census(std::span<const CensusComponent> components) {
    ParameterCensus out;
    for (const auto& component : components) {
        ComponentCensus counts{component.name, 0, 0};
        for (const auto* p : component.parameters) {
            (p->trainable ? counts.trainable : counts.frozen) += p->size();
        }
        out.components.push_back(counts);
    }
    return out;
}

ParameterCensus census(const Model& model) {
    const std::vector<CensusComponent> components = {
        {"encoder", model.backbone.parameters()},
        {"head", {&model.head.weight, &model.head.bias}},
    };
    ParameterCensus out = census(components);
    if (model.backbone.capture_enabled()) {
        auto& backbone = const_cast<Backbone&>(model.backbone);
        const auto dims = backbone.affine_input_dims();
        const auto layers = backbone.affine_layers();
        for (std::size_t i = 0; i < layers.size(); ++i) {
            out.activation_dims.emplace_back(layers[i].name, dims[i]);
        }
    }
    return out;
}

}  // namespace clbench
