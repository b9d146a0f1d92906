#include "clbench/learners.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <unordered_set>

#include "clbench/projection.hpp"
#include "clbench/rebalancing.hpp"
#include "clbench/regularizers.hpp"

namespace clbench {

namespace {

Matrix vstack(const Matrix& top, const Matrix& bottom) {
    if (bottom.rows() == 0) {
        return top;
    }
    if (top.rows() == 0) {
        return bottom;
    }
    Matrix out(top.rows() + bottom.rows(), top.cols());
    out.topRows(top.rows()) = top;
    out.bottomRows(bottom.rows()) = bottom;
    return out;
}

std::vector<std::int64_t> label_range(std::int64_t begin, std::int64_t end) {
    std::vector<std::int64_t> out(static_cast<std::size_t>(std::max<std::int64_t>(end - begin, 0)));
    std::iota(out.begin(), out.end(), begin);
    return out;
}

Matrix pad_to(const Matrix& m, Eigen::Index rows, Eigen::Index cols) {
    if (m.rows() == rows && m.cols() == cols) {
        return m;
    }
    Matrix out = Matrix::Zero(rows, cols);
    const auto r = std::min(rows, m.rows());
    const auto c = std::min(cols, m.cols());
    out.topLeftCorner(r, c) = m.topLeftCorner(r, c);
    return out;
}

bool is_encoder_bias(const std::string& name) {
    return name.starts_with("encoder.") && name.ends_with(".bias");
}

std::string layer_of(const std::string& param_name) { return param_name.substr(0, param_name.rfind('.')); }

/// Row i of `features` divided by its norm.
Matrix normalise_rows(Matrix features) {
    for (Eigen::Index r = 0; r < features.rows(); ++r) {
        const double norm = features.row(r).norm();
        if (norm > 0.0) {
            features.row(r) /= norm;
        }
    }
    return features;
}

/// Layer inputs with a constant 1 appended, so weight and bias share one projector.
Matrix augment_ones(const Matrix& rows) {
    Matrix out(rows.rows(), rows.cols() + 1);
    out.leftCols(rows.cols()) = rows;
    out.col(rows.cols()).setOnes();
    return out;
}

// ---------------------------------------------------------------- finetune

class FinetuneLearner : public Learner {
public:
    using Learner::Learner;

protected:
    ObserveResult on_observe(const StreamBatch& batch) override {
        const auto step = train_step(batch.inputs, [&](const Matrix& logits) { return cross_entropy(logits, batch.labels); });
        return summarize(step.logits, batch.labels, step.loss);
    }
};

// ---------------------------------------------------------------- ewc

class EwcLearner : public Learner {
public:
    explicit EwcLearner(const LearnerSetup& setup)
        : Learner(setup),
          strength_(params().get_double("lambda", 100.0)),
          samples_(params().get_int("fisher_samples", 1024)),
          mode_(parse_fisher_mode(params().get_string("fisher", "sampled"))) {}

    [[nodiscard]] std::vector<StateDescriptor> state_descriptors() const override {
        std::int64_t elements = 0;
        for (const auto& [name, f] : fisher_) {
            elements += f.size();
        }
        if (elements == 0) {
            return {};
        }
        return {{"snapshot", "ewc.anchor", elements}, {"statistic", "ewc.fisher", elements}};
    }

    [[nodiscard]] std::map<std::string, Matrix> checkpoint_arrays() const override {
        auto out = Learner::checkpoint_arrays();
        for (const auto& [name, f] : fisher_) {
            out["ewc.fisher." + name] = f;
            out["ewc.anchor." + name] = anchor_.at(name);
        }
        return out;
    }

protected:
    ObserveResult on_observe(const StreamBatch& batch) override {
        const auto step = train_step(batch.inputs, [&](const Matrix& logits) { return cross_entropy(logits, batch.labels); });
        return summarize(step.logits, batch.labels, step.loss);
    }

    double add_penalty_gradients() override {
        double penalty = 0.0;
        for (auto* p : model_.trainable_parameters()) {
            const auto it = fisher_.find(p->name);
            if (it == fisher_.end()) {
                continue;
            }
            it->second = pad_to(it->second, p->value.rows(), p->value.cols());
            auto& anchor = anchor_[p->name];
            anchor = pad_to(anchor, p->value.rows(), p->value.cols());
            EwcState state{it->second.reshaped(), anchor.reshaped(), strength_};
            const Vector theta = p->value.reshaped();
            penalty += ewc_penalty(theta, state);
            p->grad += ewc_penalty_gradient(theta, state).reshaped(p->value.rows(), p->value.cols());
        }
        return penalty;
    }

    void on_after_task(const TaskSpec& task) override {
        const auto data = task_data(task, samples_);
        const auto fresh = estimate_fisher_diag(model_, data.inputs, data.labels, samples_, mode_, rng_);
        for (const auto* p : std::as_const(model_).parameters()) {
            if (!p->trainable) {
                continue;
            }
            Matrix total = fresh.at(p->name);
            if (const auto it = fisher_.find(p->name); it != fisher_.end()) {
                total += pad_to(it->second, total.rows(), total.cols());
            }
            fisher_[p->name] = std::move(total);
            anchor_[p->name] = p->value;
        }
    }

private:
    double strength_;
    std::int64_t samples_;
    FisherMode mode_;
    std::map<std::string, Matrix> fisher_;
    std::map<std::string, Matrix> anchor_;
};

// ---------------------------------------------------------------- lwf

/// Shared distillation machinery: a frozen copy of the model taken at the
/// start of every task after the first.
class DistillMixin {
protected:
    DistillMixin(const MethodParams& p)
        : tau_(p.get_double("temperature", 2.0)), weight_(p.get_double("distill_weight", 1.0)) {}

    void snapshot(const Model& model, std::int64_t tasks_learned) {
        if (tasks_learned > 0) {
            snapshot_.emplace(model);
        }
    }

    /// Adds weight * distill over the first `old_classes` columns to `out`.
    void add_distill(const Matrix& inputs, const Matrix& logits, std::int64_t old_classes, LossGrad& out) const {
        if (!snapshot_ || old_classes <= 0) {
            return;
        }
        const Matrix old_logits = snapshot_->logits(inputs).leftCols(old_classes);
        const auto kd = distill_loss(logits.leftCols(old_classes), old_logits, tau_);
        out.loss += weight_ * kd.loss;
        out.grad.leftCols(old_classes) += weight_ * kd.grad;
    }

    [[nodiscard]] std::int64_t snapshot_elements() const {
        return snapshot_ ? snapshot_->parameter_count() : 0;
    }

    double tau_;
    double weight_;
    std::optional<Model> snapshot_;
};

class LwfLearner : public Learner, private DistillMixin {
public:
    explicit LwfLearner(const LearnerSetup& setup) : Learner(setup), DistillMixin(setup.cfg.method_params) {}

    [[nodiscard]] std::vector<StateDescriptor> state_descriptors() const override {
        if (snapshot_elements() == 0) {
            return {};
        }
        return {{"snapshot", "lwf.previous_model", snapshot_elements()}};
    }

protected:
    void on_before_task(const TaskSpec&) override { snapshot(model_, tasks_learned_); }

    ObserveResult on_observe(const StreamBatch& batch) override {
        const auto step = train_step(batch.inputs, [&](const Matrix& logits) {
            auto out = cross_entropy(logits, batch.labels);
            add_distill(batch.inputs, logits, seen_, out);
            return out;
        });
        return summarize(step.logits, batch.labels, step.loss);
    }
};

// ---------------------------------------------------------------- replay family

std::int64_t buffer_capacity(const LearnerSetup& setup) {
    if (setup.cfg.buffer.budget_bytes) {
        return *setup.cfg.buffer.budget_bytes / std::max<std::int64_t>(setup.input_shape.size(), 1);
    }
    return setup.cfg.buffer.capacity;
}

class ReplayLearner : public Learner {
public:
    ReplayLearner(const LearnerSetup& setup, BufferStrategy fallback)
        : Learner(setup),
          buffer_(buffer_capacity(setup), setup.cfg.buffer.strategy.value_or(fallback), setup.cfg.seed),
          replay_k_(params().get_int("replay_batch", setup.cfg.batch_size)),
          beta_(params().get_double("beta", 1.0)) {}

    [[nodiscard]] const ExemplarBuffer* buffer() const override { return &buffer_; }

protected:
    /// Rows [0, n) are stream rows, the rest memory rows; the memory term is
    /// weighted by beta.
    [[nodiscard]] LossGrad composite_ce(const Matrix& logits, const std::vector<std::int64_t>& stream_labels,
                                        const std::vector<std::int64_t>& memory_labels) const {
        const auto n = static_cast<Eigen::Index>(stream_labels.size());
        const auto m = static_cast<Eigen::Index>(memory_labels.size());
        LossGrad out{0.0, Matrix::Zero(logits.rows(), logits.cols())};
        double loss_new = 0.0;
        double loss_mem = 0.0;
        if (n > 0) {
            const auto a = cross_entropy(logits.topRows(n), stream_labels);
            loss_new = a.loss;
            out.grad.topRows(n) = a.grad;
        }
        if (m > 0) {
            const auto b = cross_entropy(logits.bottomRows(m), memory_labels);
            loss_mem = b.loss;
            out.grad.bottomRows(m) = beta_ * b.grad;
        }
        out.loss = replay_loss(loss_new, loss_mem, beta_);
        return out;
    }

    /// Feature map used for herding: L2-normalised encoder features.
    [[nodiscard]] FeatureFn herding_features() const {
        return [this](const Matrix& inputs) { return normalise_rows(model_.features(inputs)); };
    }

    void store_task(const TaskSpec& task) {
        const auto entries = make_entries(*setup_.pool, task, task.train_refs);
        buffer_.update(entries, herding_features());
    }

    ExemplarBuffer buffer_;
    std::int64_t replay_k_;
    double beta_;
};

class ErLearner : public ReplayLearner {
public:
    explicit ErLearner(const LearnerSetup& setup) : ReplayLearner(setup, BufferStrategy::reservoir) {}

protected:
    ObserveResult on_observe(const StreamBatch& batch) override {
        const auto memory = sample_batch(buffer_, replay_k_, rng_);
        const auto step = train_step(vstack(batch.inputs, memory.inputs), [&](const Matrix& logits) {
            return memory_loss(logits, batch, memory);
        });
        if (buffer_.strategy() == BufferStrategy::reservoir && batch.epoch == 0) {
            const auto entries = make_entries(*setup_.pool, current_task(), batch.refs);
            buffer_.update(entries);
        }
        return summarize(step.logits, batch.labels, step.loss);
    }

    void on_after_task(const TaskSpec& task) override {
        if (buffer_.strategy() != BufferStrategy::reservoir) {
            store_task(task);
        }
    }

    [[nodiscard]] virtual LossGrad memory_loss(const Matrix& logits, const StreamBatch& batch,
                                               const ReplayBatch& memory) const {
        return composite_ce(logits, batch.labels, memory.labels);
    }
};

class EraceLearner : public ErLearner {
public:
    using ErLearner::ErLearner;

protected:
    [[nodiscard]] LossGrad memory_loss(const Matrix& logits, const StreamBatch& batch,
                                       const ReplayBatch& memory) const override {
        const auto n = static_cast<Eigen::Index>(batch.size());
        const auto m = static_cast<Eigen::Index>(memory.size());
        const auto& task = current_task();
        LossGrad out{0.0, Matrix::Zero(logits.rows(), logits.cols())};
        const auto a = erace_masked_loss(logits.topRows(n), batch.labels, task.label_begin, task.label_end(),
                                         SampleOrigin::stream);
        out.grad.topRows(n) = a.grad;
        double loss_mem = 0.0;
        if (m > 0) {
            const auto b = erace_masked_loss(logits.bottomRows(m), memory.labels, task.label_begin,
                                             task.label_end(), SampleOrigin::buffer);
            loss_mem = b.loss;
            out.grad.bottomRows(m) = beta_ * b.grad;
        }
        out.loss = replay_loss(a.loss, loss_mem, beta_);
        return out;
    }
};

/// Replay with a frozen-snapshot distillation term on old-class logits.
class DistillReplayLearner : public ReplayLearner, protected DistillMixin {
public:
    explicit DistillReplayLearner(const LearnerSetup& setup)
        : ReplayLearner(setup, BufferStrategy::herding), DistillMixin(setup.cfg.method_params) {}

    [[nodiscard]] std::vector<StateDescriptor> state_descriptors() const override {
        auto out = extra_descriptors();
        if (snapshot_elements() > 0) {
            out.push_back({"snapshot", method() + ".previous_model", snapshot_elements()});
        }
        return out;
    }

protected:
    [[nodiscard]] virtual std::vector<StateDescriptor> extra_descriptors() const { return {}; }

    void on_before_task(const TaskSpec&) override { snapshot(model_, tasks_learned_); }

    ObserveResult on_observe(const StreamBatch& batch) override {
        const auto memory = sample_batch(buffer_, replay_k_, rng_);
        return distill_step(batch.inputs, batch.labels, memory);
    }

    ObserveResult distill_step(const Matrix& stream_inputs, const std::vector<std::int64_t>& stream_labels,
                               const ReplayBatch& memory) {
        const Matrix inputs = vstack(stream_inputs, memory.inputs);
        const auto step = train_step(inputs, [&](const Matrix& logits) {
            auto out = composite_ce(logits, stream_labels, memory.labels);
            add_distill(inputs, logits, seen_, out);
            return out;
        });
        return summarize(step.logits, stream_labels, step.loss);
    }
};

class IcarlLearner : public DistillReplayLearner {
public:
    using DistillReplayLearner::DistillReplayLearner;

protected:
    [[nodiscard]] std::vector<StateDescriptor> extra_descriptors() const override {
        if (class_means_.size() == 0) {
            return {};
        }
        return {{"statistic", "icarl.class_means", class_means_.size()}};
    }

    void on_after_task(const TaskSpec& task) override {
        store_task(task);
        std::vector<Matrix> features(static_cast<std::size_t>(task.label_end()));
        for (std::int64_t label = 0; label < task.label_end(); ++label) {
            std::vector<std::size_t> indices;
            for (std::size_t i = 0; i < buffer_.size(); ++i) {
                if (buffer_.entries()[i].label == label) {
                    indices.push_back(i);
                }
            }
            features[static_cast<std::size_t>(label)] =
                indices.empty() ? Matrix(0, model_.backbone.feature_dim()) : model_.features(buffer_.inputs(indices));
        }
        class_means_ = exemplar_class_means(features);
    }

    [[nodiscard]] Matrix on_inference(const Matrix& inputs) const override {
        if (class_means_.rows() != model_.head.classes()) {
            return model_.logits(inputs);
        }
        return nme_scores(model_.features(inputs), class_means_);
    }

private:
    Matrix class_means_;
};

class BicLearner : public DistillReplayLearner {
public:
    explicit BicLearner(const LearnerSetup& setup)
        : DistillReplayLearner(setup), val_fraction_(params().get_double("val_fraction", 0.1)) {}

protected:
    [[nodiscard]] std::vector<StateDescriptor> extra_descriptors() const override {
        if (corrections_.empty()) {
            return {};
        }
        return {{"bias_correction", "bic.alpha_beta", 2 * static_cast<std::int64_t>(corrections_.size())}};
    }

    void on_before_task(const TaskSpec& task) override {
        DistillReplayLearner::on_before_task(task);
        held_out_refs_.clear();
        val_buffer_.clear();
        train_buffer_.clear();
        if (tasks_learned_ == 0) {
            for (std::size_t i = 0; i < buffer_.size(); ++i) train_buffer_.push_back(i);
            return;
        }
        // Stratified hold-out: a fraction of every class, at least one sample.
        Rng split_rng(derive_seed(setup_.cfg.seed ^ static_cast<std::uint64_t>(task.index), "bic_split"));
        std::map<std::int64_t, std::vector<SampleRef>> by_class;
        for (const auto ref : task.train_refs) {
            by_class[setup_.pool->global_class(ref)].push_back(ref);
        }
        for (auto& [cls, refs] : by_class) {
            shuffle_in_place(refs, split_rng);
            const auto take = hold_out_count(refs.size());
            held_out_refs_.insert(refs.begin(), refs.begin() + static_cast<std::ptrdiff_t>(take));
        }
        std::map<std::int64_t, std::vector<std::size_t>> stored;
        for (std::size_t i = 0; i < buffer_.size(); ++i) {
            stored[buffer_.entries()[i].label].push_back(i);
        }
        for (auto& [label, indices] : stored) {
            shuffle_in_place(indices, split_rng);
            const auto take = indices.size() > 1 ? hold_out_count(indices.size()) : 0;
            val_buffer_.insert(val_buffer_.end(), indices.begin(), indices.begin() + static_cast<std::ptrdiff_t>(take));
            train_buffer_.insert(train_buffer_.end(), indices.begin() + static_cast<std::ptrdiff_t>(take), indices.end());
        }
        std::sort(train_buffer_.begin(), train_buffer_.end());
    }

    ObserveResult on_observe(const StreamBatch& batch) override {
        std::vector<Eigen::Index> keep;
        for (std::size_t i = 0; i < batch.refs.size(); ++i) {
            if (!held_out_refs_.contains(batch.refs[i])) {
                keep.push_back(static_cast<Eigen::Index>(i));
            }
        }
        Matrix inputs(static_cast<Eigen::Index>(keep.size()), batch.inputs.cols());
        std::vector<std::int64_t> labels;
        for (std::size_t r = 0; r < keep.size(); ++r) {
            inputs.row(static_cast<Eigen::Index>(r)) = batch.inputs.row(keep[r]);
            labels.push_back(batch.labels[static_cast<std::size_t>(keep[r])]);
        }
        const auto memory = sample_training_exemplars();
        if (labels.empty() && memory.empty()) {
            return {};
        }
        return distill_step(inputs, labels, memory);
    }

    void on_after_task(const TaskSpec& task) override {
        if (tasks_learned_ > 0) {
            std::vector<SampleRef> refs(held_out_refs_.begin(), held_out_refs_.end());
            std::sort(refs.begin(), refs.end());
            const auto task_val = materialize(*setup_.pool, task, refs);
            std::vector<std::int64_t> labels = task_val.labels;
            for (const auto i : val_buffer_) {
                labels.push_back(buffer_.entries()[i].label);
            }
            const Matrix inputs = vstack(task_val.inputs, buffer_.inputs(val_buffer_));
            corrections_.push_back(bic_fit(corrected_logits(inputs), labels, task.label_begin, task.label_end()));
        }
        store_task(task);
    }

    [[nodiscard]] Matrix on_inference(const Matrix& inputs) const override { return corrected_logits(inputs); }

private:
    [[nodiscard]] std::size_t hold_out_count(std::size_t n) const {
        return std::max<std::size_t>(1, static_cast<std::size_t>(val_fraction_ * static_cast<double>(n)));
    }

    [[nodiscard]] Matrix corrected_logits(const Matrix& inputs) const {
        Matrix logits = model_.logits(inputs);
        for (const auto& correction : corrections_) {
            logits = bic_apply(logits, correction);
        }
        return logits;
    }

    ReplayBatch sample_training_exemplars() {
        ReplayBatch batch;
        const auto n = train_buffer_.size();
        if (n == 0 || replay_k_ <= 0) {
            return batch;
        }
        std::vector<std::size_t> table = train_buffer_;
        const auto k = static_cast<std::size_t>(replay_k_);
        for (std::size_t i = 0; i < k; ++i) {
            if (k > n) {
                batch.indices.push_back(table[uniform_index(rng_, n)]);
            } else {
                const auto j = i + static_cast<std::size_t>(uniform_index(rng_, n - i));
                std::swap(table[i], table[j]);
                batch.indices.push_back(table[i]);
            }
        }
        batch.inputs = buffer_.inputs(batch.indices);
        for (const auto i : batch.indices) {
            batch.labels.push_back(buffer_.entries()[i].label);
        }
        return batch;
    }

    double val_fraction_;
    std::unordered_set<SampleRef> held_out_refs_;
    std::vector<std::size_t> val_buffer_;
    std::vector<std::size_t> train_buffer_;
    std::vector<BiasCorrection> corrections_;
};

class WaLearner : public DistillReplayLearner {
public:
    using DistillReplayLearner::DistillReplayLearner;

protected:
    void on_after_task(const TaskSpec& task) override {
        if (tasks_learned_ > 0) {
            const auto old_labels = label_range(0, task.label_begin);
            const auto new_labels = label_range(task.label_begin, task.label_end());
            model_.head = wa_align(model_.head, old_labels, new_labels);
        }
        store_task(task);
    }
};

// ---------------------------------------------------------------- projection family

class ProjectionLearner : public Learner, public ProjectionDiagnostics {
public:
    explicit ProjectionLearner(const LearnerSetup& setup)
        : Learner(setup), activation_samples_(params().get_int("activation_samples", 300)) {}

    [[nodiscard]] double max_projection_residual() const override { return residual_; }
    void reset_projection_residual() override { residual_ = 0.0; }

protected:
    ObserveResult on_observe(const StreamBatch& batch) override {
        const auto step = train_step(batch.inputs, [&](const Matrix& logits) { return cross_entropy(logits, batch.labels); });
        return summarize(step.logits, batch.labels, step.loss);
    }

    /// (weight name, input rows) for every encoder affine layer on a task sample.
    [[nodiscard]] std::vector<std::pair<std::string, Matrix>> task_layer_inputs(const TaskSpec& task) {
        const auto data = task_data(task, activation_samples_);
        auto inputs = model_.backbone.layer_inputs(data.inputs);
        const auto layers = model_.backbone.affine_layers();
        std::vector<std::pair<std::string, Matrix>> out;
        for (std::size_t l = 0; l < layers.size(); ++l) {
            out.emplace_back(layers[l].weight->name, std::move(inputs[l]));
        }
        return out;
    }

    void track_residual(const Matrix& basis, const Matrix& projected) {
        if (basis.cols() > 0) {
            residual_ = std::max(residual_, (basis.transpose() * projected).cwiseAbs().maxCoeff());
        }
    }

    std::int64_t activation_samples_;
    double residual_ = 0.0;
};

/// GPM: weight gradients of encoder layers are projected off the stored
/// input subspaces; encoder biases stay fixed after the first task.
class GpmLearner : public ProjectionLearner {
public:
    explicit GpmLearner(const LearnerSetup& setup)
        : ProjectionLearner(setup),
          eps_th_(params().get_double("eps_th", 0.965)),
          basis_cap_(params().get_int("basis_cap", 0)) {}

    [[nodiscard]] std::vector<StateDescriptor> state_descriptors() const override {
        std::vector<StateDescriptor> out;
        for (const auto& [name, basis] : bases_) {
            if (basis.size() > 0) {
                out.push_back({"basis", "gpm." + layer_of(name), basis.size()});
            }
        }
        return out;
    }

    [[nodiscard]] std::map<std::string, Matrix> checkpoint_arrays() const override {
        auto out = Learner::checkpoint_arrays();
        for (const auto& [name, basis] : bases_) {
            if (basis.size() > 0) {
                out["gpm.basis." + name] = basis;
            }
        }
        return out;
    }

protected:
    void transform_gradients(const std::vector<Parameter*>& params, std::vector<Matrix>& grads) override {
        for (std::size_t i = 0; i < params.size(); ++i) {
            const auto& name = params[i]->name;
            if (const auto it = bases_.find(name); it != bases_.end()) {
                grads[i] = gpm_project_gradient(grads[i], it->second);
                track_residual(it->second, grads[i]);
            } else if (tasks_learned_ > 0 && is_encoder_bias(name)) {
                grads[i].setZero();
            }
        }
    }

    void transform_updates(const std::vector<Parameter*>& params, std::vector<Matrix>& updates) override {
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (const auto it = bases_.find(params[i]->name); it != bases_.end()) {
                updates[i] = gpm_project_gradient(updates[i], it->second);
            }
        }
    }

    void on_after_task(const TaskSpec& task) override {
        for (auto& [name, rows] : task_layer_inputs(task)) {
            auto& basis = bases_[name];
            if (basis.size() == 0) {
                basis = Matrix(rows.cols(), 0);
            }
            basis = gpm_update_subspace(basis, rows.transpose(), eps_th_);
            if (basis_cap_ > 0 && basis.cols() > basis_cap_) {
                basis = Matrix(basis.leftCols(basis_cap_));
            }
        }
    }

    double eps_th_;
    std::int64_t basis_cap_;  // 0 = layer width
    std::map<std::string, Matrix> bases_;
};

/// Shared per-layer covariance of augmented inputs [x, 1] for NSCL and AdaBOP.
class CovarianceLearner : public ProjectionLearner {
public:
    using ProjectionLearner::ProjectionLearner;

    [[nodiscard]] std::vector<StateDescriptor> state_descriptors() const override {
        std::vector<StateDescriptor> out;
        for (const auto& [name, cache] : caches_) {
            out.push_back({"statistic", method() + "." + layer_of(name) + ".covariance", cache.width() * cache.width()});
        }
        return out;
    }

protected:
    void on_before_task(const TaskSpec&) override {
        projectors_.clear();
        for (const auto& [name, cache] : caches_) {
            projectors_[name] = make_projector(cache.covariance());
        }
    }

    void on_after_task(const TaskSpec& task) override {
        for (auto& [name, rows] : task_layer_inputs(task)) {
            caches_.try_emplace(name, rows.cols() + 1).first->second.add_rows(augment_ones(rows));
        }
    }

    [[nodiscard]] virtual Matrix make_projector(const Matrix& covariance) const = 0;

    /// Applies each layer's projector to the stacked [weight; bias] matrices.
    void project_stacked(const std::vector<Parameter*>& params, std::vector<Matrix>& mats) const {
        std::map<std::string, std::size_t> index;
        for (std::size_t i = 0; i < params.size(); ++i) {
            index[params[i]->name] = i;
        }
        for (const auto& [weight_name, projector] : projectors_) {
            const auto w = index.find(weight_name);
            const auto b = index.find(layer_of(weight_name) + ".bias");
            if (w == index.end() || b == index.end()) {
                continue;
            }
            Matrix& dw = mats[w->second];
            Matrix& db = mats[b->second];
            Matrix stacked(dw.rows() + 1, dw.cols());
            stacked.topRows(dw.rows()) = dw;
            stacked.bottomRows(1) = db;
            const Matrix projected = projector * stacked;
            dw = projected.topRows(dw.rows());
            db = projected.bottomRows(1);
        }
    }

    std::map<std::string, CovarianceCache> caches_;
    std::map<std::string, Matrix> projectors_;
};

/// Null-space projection of the optimizer update.
class NsclLearner : public CovarianceLearner {
public:
    explicit NsclLearner(const LearnerSetup& setup)
        : CovarianceLearner(setup), a_(params().get_double("a", 10.0)) {}

protected:
    [[nodiscard]] Matrix make_projector(const Matrix& covariance) const override {
        return nscl_projector(covariance, a_);
    }

    void transform_updates(const std::vector<Parameter*>& params, std::vector<Matrix>& updates) override {
        project_stacked(params, updates);
    }

    double a_;
};

/// Closed-form (I + lambda C)^{-1} preconditioning of the gradient, C the
/// mean augmented input covariance of past tasks.
class AdabopLearner : public CovarianceLearner {
public:
    explicit AdabopLearner(const LearnerSetup& setup)
        : CovarianceLearner(setup), lambda_(params().get_double("lambda", 100.0)) {}

protected:
    [[nodiscard]] Matrix make_projector(const Matrix& covariance) const override {
        return adabop_projection_from_gram(covariance, lambda_);
    }

    void transform_gradients(const std::vector<Parameter*>& params, std::vector<Matrix>& grads) override {
        project_stacked(params, grads);
    }

    double lambda_;
};

/// TRGP: GPM-projected weight updates plus, for past tasks inside the trust
/// region, a learnable scaling Q_j of the weight's component in span(S_j).
class TrgpLearner : public ProjectionLearner {
public:
    explicit TrgpLearner(const LearnerSetup& setup)
        : ProjectionLearner(setup),
          eps_th_(params().get_double("eps_th", 0.965)),
          trust_eps_(params().get_double("trust_eps", 0.5)) {}

    [[nodiscard]] std::vector<StateDescriptor> state_descriptors() const override {
        std::vector<StateDescriptor> out;
        for (const auto& [name, layer] : layers_) {
            if (layer.basis.size() > 0) {
                out.push_back({"basis", "trgp." + layer_of(name), layer.basis.size()});
            }
            for (std::size_t j = 0; j < layer.task_bases.size(); ++j) {
                if (layer.task_bases[j].size() > 0) {
                    out.push_back({"basis", "trgp." + layer_of(name) + ".task" + std::to_string(j),
                                   layer.task_bases[j].size()});
                }
            }
        }
        return out;
    }

protected:
    struct LayerState {
        Matrix basis;                     // union of past-task subspaces
        std::vector<Matrix> task_bases;   // S_j, one per past task
        std::vector<std::size_t> selected;
        std::vector<Matrix> scales;       // Q_j, indexed like task_bases
        Matrix base_weight;               // storage convention (in x out)
        Matrix pending;
    };

    void on_before_task(const TaskSpec&) override {
        selection_done_ = false;
        for (auto* p : model_.parameters()) {
            if (const auto it = layers_.find(p->name); it != layers_.end()) {
                auto& layer = it->second;
                layer.base_weight = p->value;
                layer.selected.clear();
                layer.scales.clear();
                for (const auto& s : layer.task_bases) {
                    layer.scales.push_back(Matrix::Identity(s.cols(), s.cols()));
                }
            }
        }
    }

    void transform_gradients(const std::vector<Parameter*>& params, std::vector<Matrix>& grads) override {
        const double lr = optimizer_.current_learning_rate();
        for (std::size_t i = 0; i < params.size(); ++i) {
            const auto& name = params[i]->name;
            const auto it = layers_.find(name);
            if (it == layers_.end()) {
                if (tasks_learned_ > 0 && is_encoder_bias(name)) {
                    grads[i].setZero();
                }
                continue;
            }
            auto& layer = it->second;
            if (!selection_done_) {
                layer.selected = trgp_trust_region(grads[i], layer.task_bases, trust_eps_);
            }
            // Row convention: W = base^T, G = grad^T; dL/dQ_j = (W S_j)^T G S_j.
            for (const auto j : layer.selected) {
                const auto& s = layer.task_bases[j];
                const Matrix ws = layer.base_weight.transpose() * s;
                const Matrix gs = grads[i].transpose() * s;
                layer.scales[j] -= lr * (ws.transpose() * gs);
            }
            grads[i] = gpm_project_gradient(grads[i], layer.basis);
            track_residual(layer.basis, grads[i]);
        }
        selection_done_ = true;
    }

    void transform_updates(const std::vector<Parameter*>& params, std::vector<Matrix>& updates) override {
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (const auto it = layers_.find(params[i]->name); it != layers_.end()) {
                updates[i] = gpm_project_gradient(updates[i], it->second.basis);
                it->second.pending = updates[i];
            }
        }
    }

    void after_update() override {
        for (auto* p : model_.parameters()) {
            const auto it = layers_.find(p->name);
            if (it == layers_.end() || it->second.pending.size() == 0) {
                continue;
            }
            auto& layer = it->second;
            layer.base_weight += layer.pending;
            layer.pending.resize(0, 0);
            p->value = trgp_effective_weight(layer.base_weight.transpose(), layer.selected, layer.task_bases,
                                             layer.scales)
                           .transpose();
        }
    }

    void on_after_task(const TaskSpec& task) override {
        // The effective weight is folded into W; Q_j are not kept across tasks.
        for (auto& [name, rows] : task_layer_inputs(task)) {
            auto& layer = layers_[name];
            const Matrix activations = rows.transpose();
            if (layer.basis.size() == 0) {
                layer.basis = Matrix(rows.cols(), 0);
            }
            layer.task_bases.push_back(gpm_update_subspace(Matrix(rows.cols(), 0), activations, eps_th_));
            layer.basis = gpm_update_subspace(layer.basis, activations, eps_th_);
            layer.selected.clear();
            layer.scales.clear();
        }
    }

    double eps_th_;
    double trust_eps_;
    bool selection_done_ = false;
    std::map<std::string, LayerState> layers_;
};

// ---------------------------------------------------------------- ranpac

/// Trains the encoder on the first task, then freezes it and classifies
/// with a random-projection ridge head fitted on every task.
class RanpacLearner : public Learner {
public:
    explicit RanpacLearner(const LearnerSetup& setup)
        : Learner(setup),
          projection_dim_(params().get_int("projection_dim", 1000)),
          ridge_(params().get_double("ridge", 1e-3)) {}

    [[nodiscard]] std::vector<StateDescriptor> state_descriptors() const override {
        if (!rp_) {
            return {};
        }
        return {{"head", "ranpac.projection", rp_->projection().size()},
                {"statistic", "ranpac.gram", rp_->gram().size()},
                {"statistic", "ranpac.class_sums", rp_->class_sums().size()}};
    }

    [[nodiscard]] ParameterCensus parameter_census() const override {
        const std::vector<CensusComponent> components = {
            {"encoder", model_.backbone.parameters()},
            {"head", {&model_.head.weight, &model_.head.bias}},
            {"rp_head", rp_ ? std::vector<const Parameter*>{&rp_->projection()} : std::vector<const Parameter*>{}},
        };
        return census(components);
    }

    [[nodiscard]] std::map<std::string, Matrix> checkpoint_arrays() const override {
        auto out = Learner::checkpoint_arrays();
        if (rp_) {
            out["rp.projection"] = rp_->projection().value;
            out["rp.gram"] = rp_->gram();
            out["rp.class_sums"] = rp_->class_sums();
        }
        return out;
    }

protected:
    ObserveResult on_observe(const StreamBatch& batch) override {
        if (!model_.backbone.frozen()) {
            const auto step = train_step(batch.inputs, [&](const Matrix& logits) { return cross_entropy(logits, batch.labels); });
            return summarize(step.logits, batch.labels, step.loss);
        }
        const Matrix logits = model_.logits(batch.inputs);
        return summarize(logits, batch.labels, cross_entropy(logits, batch.labels).loss);
    }

    void on_after_task(const TaskSpec& task) override {
        if (!model_.backbone.frozen()) {
            model_.backbone.freeze();
            rp_.emplace(model_.backbone.feature_dim(), projection_dim_, ridge_, setup_.cfg.seed);
        }
        const auto data = task_data(task);
        rp_->fit(model_.features(data.inputs), data.labels);
    }

    [[nodiscard]] Matrix on_inference(const Matrix& inputs) const override {
        if (!rp_ || rp_->classes() == 0) {
            return model_.logits(inputs);
        }
        const Matrix scores = rp_->scores(model_.features(inputs));
        if (scores.cols() >= model_.head.classes()) {
            return scores;
        }
        Matrix padded = Matrix::Constant(scores.rows(), model_.head.classes(), std::numeric_limits<double>::lowest());
        padded.leftCols(scores.cols()) = scores;
        return padded;
    }

private:
    std::int64_t projection_dim_;
    double ridge_;
    std::optional<RandomProjectionHead> rp_;
};

struct StubInfo {
    const char* name;
    const char* reason;
};

constexpr StubInfo kStubs[] = {
    {"l2p", "prompt-pool method on a pretrained ViT"},
    {"dualprompt", "prompt-pool method on a pretrained ViT"},
    {"codaprompt", "prompt-pool method on a pretrained ViT"},
    {"ocm", "online contrastive method needing a large augmentation pipeline"},
    {"api", "adaptive expansion of a pretrained backbone"},
    {"inflora", "low-rank adaptation of a pretrained ViT"},
    {"moe_adapter4cl", "mixture-of-adapters on a pretrained CLIP model"},
    {"rapf", "adaptation of a pretrained CLIP model"},
    {"sd_lora", "low-rank adaptation of a pretrained ViT"},
    {"lucir", "cosine-normalised classifier whose details are not specified here"},
};

}  // namespace

const std::vector<std::string>& implemented_methods() {
    static const std::vector<std::string> names = {"finetune", "ewc",  "lwf",  "er",   "erace", "icarl", "bic",
                                                   "wa",       "gpm",  "nscl", "trgp", "adabop", "ranpac"};
    return names;
}

const std::vector<std::string>& stub_methods() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto& stub : kStubs) {
            out.emplace_back(stub.name);
        }
        return out;
    }();
    return names;
}

bool is_registered(const std::string& method) {
    const auto& a = implemented_methods();
    const auto& b = stub_methods();
    return std::find(a.begin(), a.end(), method) != a.end() || std::find(b.begin(), b.end(), method) != b.end();
}

bool uses_buffer(const std::string& method) {
    return method == "er" || method == "erace" || method == "icarl" || method == "bic" || method == "wa";
}

BufferStrategy default_buffer_strategy(const std::string& method) {
    return method == "er" || method == "erace" ? BufferStrategy::reservoir : BufferStrategy::herding;
}

std::unique_ptr<Learner> make_learner(const LearnerSetup& setup) {
    const auto& method = setup.cfg.method;
    for (const auto& stub : kStubs) {
        if (method == stub.name) {
            throw UnsupportedMethod("method '" + method + "' is registered but not implemented: " + stub.reason +
                                    "; only its storage manifest is available to the memory budget");
        }
    }
    if (method == "finetune") return std::make_unique<FinetuneLearner>(setup);
    if (method == "ewc") return std::make_unique<EwcLearner>(setup);
    if (method == "lwf") return std::make_unique<LwfLearner>(setup);
    if (method == "er") return std::make_unique<ErLearner>(setup);
    if (method == "erace") return std::make_unique<EraceLearner>(setup);
    if (method == "icarl") return std::make_unique<IcarlLearner>(setup);
    if (method == "bic") return std::make_unique<BicLearner>(setup);
    if (method == "wa") return std::make_unique<WaLearner>(setup);
    if (method == "gpm") return std::make_unique<GpmLearner>(setup);
    if (method == "nscl") return std::make_unique<NsclLearner>(setup);
    if (method == "trgp") return std::make_unique<TrgpLearner>(setup);
    if (method == "adabop") return std::make_unique<AdabopLearner>(setup);
    if (method == "ranpac") return std::make_unique<RanpacLearner>(setup);
    std::string known;
    for (const auto& name : implemented_methods()) {
        known += (known.empty() ? "" : ", ") + name;
    }
    throw ConfigError("method", "unknown method '" + method + "' (implemented: " + known + ")");
}

}  // namespace clbench
