#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "clbench/buffer.hpp"
#include "clbench/common.hpp"
#include "clbench/config.hpp"
#include "clbench/datastream.hpp"
#include "clbench/losses.hpp"
#include "clbench/model.hpp"
#include "clbench/optimizer.hpp"

namespace clbench {

struct LearnerSetup {
    /// Backing store of every TaskSpec the learner will see; must outlive it.
    const SamplePool* pool = nullptr;
    ImageShape input_shape;
    ExperimentConfig cfg;
};

struct ObserveResult {
    std::vector<std::int64_t> predictions;
    double accuracy = 0.0;
    double loss = 0.0;
};

/// Named piece of method state, priced by the memory budget module.
/// kind: snapshot | basis | statistic | head | bias_correction | prompt.
struct StateDescriptor {
    std::string kind;
    std::string name;
    std::int64_t elements = 0;

    [[nodiscard]] nlohmann::json to_json() const;
};

/// Lifecycle per task: before_task, then any number of observe calls, then
/// after_task. Any other order throws ContractViolation. inference is const.
class Learner {
public:
    explicit Learner(const LearnerSetup& setup);
    virtual ~Learner() = default;

    Learner(const Learner&) = delete;
    Learner& operator=(const Learner&) = delete;

    void before_task(const TaskSpec& task);
    ObserveResult observe(const StreamBatch& batch);
    void after_task(const TaskSpec& task);

    /// Scores (n x seen labels); argmax gives the prediction.
    [[nodiscard]] Matrix inference(const Matrix& inputs) const;

    /// Records hook names ("before_task", "observe", "after_task") when enabled.
    void enable_trace(bool enabled) { tracing_ = enabled; }
    [[nodiscard]] const std::vector<std::string>& trace() const noexcept { return trace_; }

    [[nodiscard]] Model& model() noexcept { return model_; }
    [[nodiscard]] const Model& model() const noexcept { return model_; }
    [[nodiscard]] const std::string& method() const noexcept { return setup_.cfg.method; }
    [[nodiscard]] std::int64_t seen_classes() const noexcept { return seen_; }
    [[nodiscard]] std::int64_t tasks_learned() const noexcept { return tasks_learned_; }

    [[nodiscard]] virtual const ExemplarBuffer* buffer() const { return nullptr; }
    [[nodiscard]] virtual std::vector<StateDescriptor> state_descriptors() const { return {}; }
    [[nodiscard]] virtual ParameterCensus parameter_census() const;
    [[nodiscard]] virtual std::map<std::string, Matrix> checkpoint_arrays() const;

protected:
    virtual void on_before_task(const TaskSpec&) {}
    virtual ObserveResult on_observe(const StreamBatch& batch) = 0;
    virtual void on_after_task(const TaskSpec&) {}
    [[nodiscard]] virtual Matrix on_inference(const Matrix& inputs) const;

    /// Hooks around the update of every trainable parameter, in parameter order.
    virtual void transform_gradients(const std::vector<Parameter*>&, std::vector<Matrix>&) {}
    virtual void transform_updates(const std::vector<Parameter*>&, std::vector<Matrix>&) {}
    virtual void after_update() {}
    /// Adds regulariser gradients after backward; returns the penalty value.
    virtual double add_penalty_gradients() { return 0.0; }

    using LossFn = std::function<LossGrad(const Matrix& logits)>;
    struct StepResult {
        Matrix logits;
        double loss = 0.0;
    };
    /// zero_grad, forward, loss, backward, penalties, update.
    StepResult train_step(const Matrix& inputs, const LossFn& loss_fn);
    void apply_update();

    /// Predictions and accuracy of the first `labels.size()` rows of `logits`.
    [[nodiscard]] static ObserveResult summarize(const Matrix& logits, std::span<const std::int64_t> labels,
                                                 double loss);

    /// Inputs and labels of (up to `limit`, seeded subset of) the task's training data.
    [[nodiscard]] StreamBatch task_data(const TaskSpec& task, std::int64_t limit = -1);

    [[nodiscard]] const TaskSpec& current_task() const;
    [[nodiscard]] const MethodParams& params() const noexcept { return setup_.cfg.method_params; }

    LearnerSetup setup_;
    Model model_;
    Optimizer optimizer_;
    Rng rng_;
    std::int64_t seen_ = 0;
    std::int64_t tasks_learned_ = 0;

private:
    void record(const char* hook);

    std::optional<TaskSpec> task_;
    bool tracing_ = false;
    std::vector<std::string> trace_;
};

}  // namespace clbench
