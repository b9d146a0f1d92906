#include "clbench/learner.hpp"

#include <numeric>

namespace clbench {

nlohmann::json StateDescriptor::to_json() const {
    return {{"kind", kind}, {"name", name}, {"elements", elements}};
}

namespace {

Model build_model(const LearnerSetup& setup) {
    if (setup.pool == nullptr) {
        throw Error("learner setup lacks a sample pool");
    }
    auto backbone = Backbone::build(parse_arch(setup.cfg.backbone.arch), setup.input_shape, setup.cfg.backbone,
                                    setup.cfg.seed);
    return Model(std::move(backbone), setup.cfg.seed);
}

}  // namespace

Learner::Learner(const LearnerSetup& setup)
    : setup_(setup), model_(build_model(setup)), optimizer_(setup.cfg.optimizer),
      rng_(derive_seed(setup.cfg.seed, "learner")) {}

void Learner::record(const char* hook) {
    if (tracing_) {
        trace_.emplace_back(hook);
    }
}

void Learner::before_task(const TaskSpec& task) {
    if (task_) {
        throw ContractViolation("before_task(" + std::to_string(task.index) + ") while task " +
                                std::to_string(task_->index) + " is still open");
    }
    if (task.index != tasks_learned_) {
        throw ContractViolation("before_task expected task " + std::to_string(tasks_learned_) + ", got " +
                                std::to_string(task.index));
    }
    if (task.label_begin != seen_) {
        throw ContractViolation("task " + std::to_string(task.index) + " labels start at " +
                                std::to_string(task.label_begin) + ", expected " + std::to_string(seen_));
    }
    task_ = task;
    const auto needed = task.label_end() - model_.head.classes();
    if (needed > 0) {
        model_.expand_head(needed);
    }
    optimizer_.reset();
    on_before_task(task);
    record("before_task");
}

ObserveResult Learner::observe(const StreamBatch& batch) {
    if (!task_) {
        throw ContractViolation("observe called outside before_task/after_task");
    }
    if (batch.task_index != task_->index) {
        throw ContractViolation("observe got a batch of task " + std::to_string(batch.task_index) +
                                " during task " + std::to_string(task_->index));
    }
    optimizer_.set_epoch(batch.epoch);
    auto result = on_observe(batch);
    record("observe");
    return result;
}

void Learner::after_task(const TaskSpec& task) {
    if (!task_) {
        throw ContractViolation("after_task called without before_task");
    }
    if (task.index != task_->index) {
        throw ContractViolation("after_task(" + std::to_string(task.index) + ") does not match open task " +
                                std::to_string(task_->index));
    }
    on_after_task(task);
    seen_ = task.label_end();
    ++tasks_learned_;
    task_.reset();
    record("after_task");
}

Matrix Learner::inference(const Matrix& inputs) const { return on_inference(inputs); }

Matrix Learner::on_inference(const Matrix& inputs) const { return model_.logits(inputs); }

const TaskSpec& Learner::current_task() const {
    if (!task_) {
        throw ContractViolation("no open task");
    }
    return *task_;
}

Learner::StepResult Learner::train_step(const Matrix& inputs, const LossFn& loss_fn) {
    model_.zero_grad();
    StepResult result;
    result.logits = model_.forward(inputs);
    const LossGrad lg = loss_fn(result.logits);
    model_.backward(lg.grad);
    result.loss = lg.loss + add_penalty_gradients();
    apply_update();
    return result;
}

void Learner::apply_update() {
    const auto params = model_.trainable_parameters();
    const double decay = setup_.cfg.optimizer.weight_decay;
    std::vector<Matrix> grads;
    grads.reserve(params.size());
    for (const auto* p : params) {
        grads.push_back(decay == 0.0 ? p->grad : Matrix(p->grad + decay * p->value));
    }
    transform_gradients(params, grads);
    std::vector<Matrix> updates;
    updates.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        updates.push_back(optimizer_.update(params[i]->name, grads[i]));
    }
    transform_updates(params, updates);
    for (std::size_t i = 0; i < params.size(); ++i) {
        params[i]->value += updates[i];
    }
    after_update();
}

ObserveResult Learner::summarize(const Matrix& logits, std::span<const std::int64_t> labels, double loss) {
    ObserveResult out;
    out.loss = loss;
    if (labels.empty()) {
        return out;
    }
    const Matrix head_rows = logits.topRows(static_cast<Eigen::Index>(labels.size()));
    out.predictions = argmax_rows(head_rows);
    std::int64_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        correct += out.predictions[i] == labels[i] ? 1 : 0;
    }
    out.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
    return out;
}

StreamBatch Learner::task_data(const TaskSpec& task, std::int64_t limit) {
    std::vector<SampleRef> refs = task.train_refs;
    if (limit >= 0 && static_cast<std::int64_t>(refs.size()) > limit) {
        Rng rng(derive_seed(setup_.cfg.seed ^ static_cast<std::uint64_t>(task.index), "task_subset"));
        shuffle_in_place(refs, rng);
        refs.resize(static_cast<std::size_t>(limit));
    }
    return materialize(*setup_.pool, task, refs);
}

ParameterCensus Learner::parameter_census() const { return census(model_); }

std::map<std::string, Matrix> Learner::checkpoint_arrays() const { return model_.state(); }

}  // namespace clbench
