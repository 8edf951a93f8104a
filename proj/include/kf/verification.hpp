#pragma once

#include "kf/framework_config.hpp"
#include "kf/task_model.hpp"
#include "kf/tensor.hpp"
#include "kf/transport.hpp"
#include "kf/workspace.hpp"

#include <cstddef>
#include <limits>
#include <optional>
#include <string>

namespace kf {

inline constexpr double kDefaultTolerance = 1e-4;
inline constexpr double kMismatchSentinel = std::numeric_limits<double>::infinity();

enum class ToleranceMode {
    // |actual - expected| <= tol
    Absolute,
    // |actual - expected| <= tol * max(1, |expected|)
    Relative,
};

struct VerifyResult {
    bool passed = false;
    double max_abs_diff = 0.0;
    double tolerance = kDefaultTolerance;
    std::size_t mismatch_count = 0;
    std::optional<std::size_t> first_mismatch_index;
    bool shape_mismatch = false;
    std::string detail;
};

// Element-wise differential check. Shape or dtype disagreement fails with the
// +inf sentinel; integer and bool tensors compare exactly (any difference
// counts as 1). A NaN on one side only is an infinite difference.
VerifyResult compare_tensors(const Tensor& actual, const Tensor& expected, double tolerance = kDefaultTolerance,
                             ToleranceMode mode = ToleranceMode::Absolute);

struct VerifyOptions {
    double tolerance = kDefaultTolerance;
    ToleranceMode mode = ToleranceMode::Absolute;
    double timeout_s = 300.0;
};

// Runs the built operator on the task's reference inputs through `transport`
// and compares every produced output with its reference.
// Throws ExecutionFailure (nonzero exit, crash, timeout) or OutputMissing.
VerifyResult run_verification(const Workspace& ws, const FrameworkConfig& config, const TaskSpec& task,
                              Transport& transport, const VerifyOptions& options = {});

}  // namespace kf
