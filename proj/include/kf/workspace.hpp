#pragma once

#include "kf/framework_config.hpp"
#include "kf/task_model.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace kf {

enum class CandidateStage { Generated, Compiled, Verified, Benchmarked, Failed };

std::string_view to_string(CandidateStage s);
std::optional<CandidateStage> parse_stage(std::string_view name);

// One generated source bundle for a task at one iteration.
struct KernelCandidate {
    std::string task_id;
    int iteration = 0;
    // file name -> source text, ordered like the task's target_file_names.
    std::vector<std::pair<std::string, std::string>> files;
    CandidateStage stage = CandidateStage::Generated;

    const std::string* file(std::string_view name) const;

    // Generated -> Compiled -> Verified -> Benchmarked, or -> Failed from any
    // non-failed stage. Anything else throws InvalidArgument.
    void advance(CandidateStage next);
};

bool is_valid_transition(CandidateStage from, CandidateStage to);

// File names must equal the task's target_file_names exactly (as sets).
void validate_candidate(const KernelCandidate& candidate, const TaskSpec& task);

// Reads every target file of `task` from `dir`. MissingFile when one is absent.
KernelCandidate load_candidate_dir(const std::filesystem::path& dir, const TaskSpec& task, int iteration = 0);

struct Injection {
    std::string task_id;
    // relative target path -> absolute backup path
    std::map<std::string, std::filesystem::path> backups;
};

// A framework checkout the harness owns. Single owner: callers must not run
// two operations on the same workspace at once.
class Workspace {
public:
    // Opens an existing tree, picking up an injection left by an earlier process.
    static Workspace open(const std::filesystem::path& root, std::string label = {});

    const std::filesystem::path& root() const { return root_; }
    const std::string& label() const { return label_; }
    const std::optional<Injection>& injected() const { return injected_; }
    bool is_injected() const { return injected_.has_value(); }

    std::filesystem::path backup_dir() const { return root_ / kBackupDirName; }

    static constexpr const char* kBackupDirName = ".kf_backup";

private:
    friend void inject(Workspace&, const TaskSpec&, const KernelCandidate&, const FrameworkConfig&);
    friend void restore(Workspace&);

    std::filesystem::path root_;
    std::string label_;
    std::optional<Injection> injected_;
};

// Backs up the task's operator sources and writes the candidate in their place.
// Errors: AlreadyInjected, TargetNotFound, IoError (the tree is rolled back).
void inject(Workspace& ws, const TaskSpec& task, const KernelCandidate& candidate, const FrameworkConfig& config);

// Moves the backups back and clears the injection. NothingInjected when clean.
void restore(Workspace& ws);

// Full copy of a clean workspace at `<parent>/<root-name>.<label>`; an existing
// destination gets a numeric suffix. parent defaults to src.root()'s parent.
Workspace clone_workspace(const Workspace& src, const std::string& label,
                          const std::optional<std::filesystem::path>& parent = std::nullopt);

// Relative source paths the candidate's files are written to, in target order.
std::vector<std::string> resolve_targets(const TaskSpec& task, const FrameworkConfig& config,
                                         const std::filesystem::path& root);

// Restores on scope exit unless already restored.
class InjectionGuard {
public:
    InjectionGuard(Workspace& ws, const TaskSpec& task, const KernelCandidate& candidate, const FrameworkConfig& config);
    ~InjectionGuard();
    InjectionGuard(const InjectionGuard&) = delete;
    InjectionGuard& operator=(const InjectionGuard&) = delete;

    void restore_now();

private:
    Workspace& ws_;
    bool active_ = false;
};

}  // namespace kf
