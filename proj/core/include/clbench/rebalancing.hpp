#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "clbench/common.hpp"
#include "clbench/model.hpp"

namespace clbench {

/// Affine correction of the logits of labels [new_begin, new_end): z -> alpha z + beta.
struct BiasCorrection {
    double alpha = 1.0;
    double beta = 0.0;
    std::int64_t new_begin = 0;
    std::int64_t new_end = 0;
};

/// Fits (alpha, beta) by minimising mean cross-entropy of the corrected logits
/// (Newton's method; the objective is convex in the two parameters). The
/// validation labels must include at least one old and one new label.
[[nodiscard]] BiasCorrection bic_fit(const Matrix& logits, std::span<const std::int64_t> labels,
                                     std::int64_t new_begin, std::int64_t new_end);
[[nodiscard]] Matrix bic_apply(const Matrix& logits, const BiasCorrection& state);

/// mean ||w_old|| / mean ||w_new|| over head rows.
[[nodiscard]] double wa_gamma(const ClassifierHead& head, std::span<const std::int64_t> old_labels,
                              std::span<const std::int64_t> new_labels);
/// Scales new-class rows and biases by wa_gamma; old rows untouched.
[[nodiscard]] ClassifierHead wa_align(ClassifierHead head, std::span<const std::int64_t> old_labels,
                                      std::span<const std::int64_t> new_labels);

/// Rows of `class_means` are per-class exemplar feature means, one per label.
/// Returns argmin_c || f/||f|| - mu_c/||mu_c|| ||, lowest label on ties.
[[nodiscard]] std::int64_t icarl_classify_nme(const RowVector& feature, const Matrix& class_means);

/// Per-class means of exemplar features; throws for a class with no exemplars.
[[nodiscard]] Matrix exemplar_class_means(const std::vector<Matrix>& features_by_class);

/// Scores with the NME ordering: minus the normalised distance, one column per class.
[[nodiscard]] Matrix nme_scores(const Matrix& features, const Matrix& class_means);

}  // namespace clbench
