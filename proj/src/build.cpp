#include "kf/build.hpp"

#include "kf/error.hpp"
#include "kf/process.hpp"

#include <cstdio>

namespace fs = std::filesystem;

namespace kf {

std::string expand_build_template(std::string_view tmpl, const fs::path& root, int jobs) {
    std::string out;
    out.reserve(tmpl.size() + 64);
    for (size_t i = 0; i < tmpl.size();) {
        if (tmpl.compare(i, 6, "{root}") == 0) {
            out += shell_quote(root.string());
            i += 6;
        } else if (tmpl.compare(i, 6, "{jobs}") == 0) {
            out += std::to_string(jobs);
            i += 6;
        } else {
            out += tmpl[i++];
        }
    }
    return out;
}

BuildResult build(const Workspace& ws, const BuildRecipe& recipe, BuildMode mode, std::optional<double> timeout_s) {
    if (recipe.marker.empty() || !fs::exists(ws.root() / recipe.marker))
        fail(ErrorCode::BuildSystemMissing, "no build configuration (" + recipe.marker + ") in " + ws.root().string());
    const std::string& tmpl = mode == BuildMode::Full ? recipe.full_command : recipe.incremental_command;
    if (tmpl.empty()) fail(ErrorCode::BuildSystemMissing, "build recipe has no command for this mode");

    const double limit = timeout_s.value_or(recipe.timeout_s > 0 ? recipe.timeout_s : kDefaultBuildTimeoutS);
    ProcessOptions opts;
    opts.cwd = ws.root();
    opts.env = environment_subset(recipe.env_passthrough);
    opts.timeout = std::chrono::duration<double>(limit);
    opts.merge_output = true;

    auto proc = run_shell(expand_build_template(tmpl, ws.root(), recipe.jobs), opts);

    BuildResult r;
    r.incremental = mode == BuildMode::Incremental;
    r.duration_s = proc.duration_s;
    r.exit_code = proc.exit_code;
    r.timed_out = proc.timed_out;
    r.log_text = std::move(proc.out);
    r.success = proc.ok();
    if (r.timed_out) {
        if (!r.log_text.empty() && r.log_text.back() != '\n') r.log_text += '\n';
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.1f s", limit);
        r.log_text += std::string(kTimeoutMarker) + buf + "\n";
    } else if (!r.success && r.log_text.empty()) {
        r.log_text = "[kf-build] build command exited with status " + std::to_string(r.exit_code) + "\n";
    }
    return r;
}

BuildResult precompile_base(const Workspace& ws, const BuildRecipe& recipe) {
    if (ws.is_injected()) fail(ErrorCode::InvalidArgument, "precompile_base needs a clean workspace");
    return build(ws, recipe, BuildMode::Full);
}

}  // namespace kf
