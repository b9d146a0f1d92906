#pragma once

#include <memory>
#include <string>
#include <vector>

#include "clbench/learner.hpp"

namespace clbench {

/// Methods with a working implementation.
[[nodiscard]] const std::vector<std::string>& implemented_methods();
/// Registered names that fail fast with UnsupportedMethod.
[[nodiscard]] const std::vector<std::string>& stub_methods();
[[nodiscard]] bool is_registered(const std::string& method);

/// True for methods that keep an exemplar buffer.
[[nodiscard]] bool uses_buffer(const std::string& method);
/// The method's own selection convention when the config leaves it unset.
[[nodiscard]] BufferStrategy default_buffer_strategy(const std::string& method);

/// Looks up setup.cfg.method. Throws ConfigError for unknown names and
/// UnsupportedMethod for stubs, before any training state is built.
[[nodiscard]] std::unique_ptr<Learner> make_learner(const LearnerSetup& setup);

/// Implemented by projection learners: largest |M^T g'| seen by a projected
/// weight gradient since the last reset.
class ProjectionDiagnostics {
public:
    virtual ~ProjectionDiagnostics() = default;
    [[nodiscard]] virtual double max_projection_residual() const = 0;
    virtual void reset_projection_residual() = 0;
};

}  // namespace clbench
