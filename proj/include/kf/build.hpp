#pragma once

#include "kf/framework_config.hpp"
#include "kf/workspace.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace kf {

enum class BuildMode { Full, Incremental };

struct BuildResult {
    bool success = false;
    // Combined stdout/stderr in arrival order, plus harness marker lines.
    std::string log_text;
    double duration_s = 0.0;
    bool incremental = false;
    bool timed_out = false;
    int exit_code = -1;
};

inline constexpr double kDefaultBuildTimeoutS = 600.0;
inline constexpr std::string_view kTimeoutMarker = "[kf-build] timed out after ";

// Substitutes {root} and {jobs} in a build command template.
std::string expand_build_template(std::string_view tmpl, const std::filesystem::path& root, int jobs);

// Runs the recipe's full or incremental command in the workspace. A failed or
// timed-out build is reported through BuildResult, never thrown.
// Throws BuildSystemMissing when the marker file or command is absent.
BuildResult build(const Workspace& ws, const BuildRecipe& recipe, BuildMode mode,
                  std::optional<double> timeout_s = std::nullopt);

// Full build of a clean tree so later candidates can build incrementally.
BuildResult precompile_base(const Workspace& ws, const BuildRecipe& recipe);

}  // namespace kf
