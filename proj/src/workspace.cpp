#include "kf/workspace.hpp"

#include "kf/error.hpp"
#include "kf/fsutil.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <set>

namespace fs = std::filesystem;
using nlohmann::json;

namespace kf {

namespace {

constexpr const char* kStateFile = "state.json";

fs::path state_path(const fs::path& root) { return root / Workspace::kBackupDirName / kStateFile; }

void write_state(const fs::path& root, const Injection& inj) {
    json j;
    j["task_id"] = inj.task_id;
    j["files"] = json::object();
    for (const auto& [rel, backup] : inj.backups) j["files"][rel] = fs::relative(backup, root / Workspace::kBackupDirName).generic_string();
    write_text_file(state_path(root), j.dump(2));
}

std::optional<Injection> read_state(const fs::path& root) {
    auto path = state_path(root);
    if (!fs::exists(path)) return std::nullopt;
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        fail(ErrorCode::IoError, "corrupt injection state " + path.string() + ": " + e.what());
    }
    Injection inj;
    inj.task_id = j.value("task_id", "");
    for (const auto& [rel, backup] : j.at("files").items())
        inj.backups[rel] = root / Workspace::kBackupDirName / backup.get<std::string>();
    return inj;
}

std::string sanitize_label(const std::string& label) {
    std::string out;
    for (char c : label) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
    return out.empty() ? "clone" : out;
}

}  // namespace

std::string_view to_string(CandidateStage s) {
    switch (s) {
        case CandidateStage::Generated: return "Generated";
        case CandidateStage::Compiled: return "Compiled";
        case CandidateStage::Verified: return "Verified";
        case CandidateStage::Benchmarked: return "Benchmarked";
        case CandidateStage::Failed: return "Failed";
    }
    return "Failed";
}

std::optional<CandidateStage> parse_stage(std::string_view name) {
    for (auto s : {CandidateStage::Generated, CandidateStage::Compiled, CandidateStage::Verified,
                   CandidateStage::Benchmarked, CandidateStage::Failed}) {
        if (to_string(s) == name) return s;
    }
    return std::nullopt;
}

const std::string* KernelCandidate::file(std::string_view name) const {
    for (const auto& [n, text] : files)
        if (n == name) return &text;
    return nullptr;
}

bool is_valid_transition(CandidateStage from, CandidateStage to) {
    if (from == CandidateStage::Failed) return false;
    if (to == CandidateStage::Failed) return true;
    return static_cast<int>(to) == static_cast<int>(from) + 1;
}

void KernelCandidate::advance(CandidateStage next) {
    if (!is_valid_transition(stage, next)) {
        fail(ErrorCode::InvalidArgument, "illegal candidate stage transition " + std::string(to_string(stage)) + " -> " +
                                             std::string(to_string(next)));
    }
    stage = next;
}

void validate_candidate(const KernelCandidate& candidate, const TaskSpec& task) {
    std::set<std::string> expected(task.target_file_names.begin(), task.target_file_names.end());
    std::set<std::string> got;
    for (const auto& [name, _] : candidate.files) {
        if (!expected.count(name)) fail(ErrorCode::ExtraneousFile, "candidate file '" + name + "' is not a target of " + task.id);
        if (!got.insert(name).second) fail(ErrorCode::ValidationError, "candidate repeats file '" + name + "'");
    }
    for (const auto& name : task.target_file_names) {
        if (!got.count(name)) fail(ErrorCode::MissingFile, "candidate lacks target file '" + name + "'");
    }
}

KernelCandidate load_candidate_dir(const fs::path& dir, const TaskSpec& task, int iteration) {
    if (!fs::is_directory(dir)) fail(ErrorCode::IoError, "candidate directory not found: " + dir.string());
    KernelCandidate c;
    c.task_id = task.id;
    c.iteration = iteration;
    for (const auto& name : task.target_file_names) {
        auto p = dir / name;
        if (!fs::is_regular_file(p)) fail(ErrorCode::MissingFile, "candidate file missing: " + p.string());
        c.files.emplace_back(name, read_text_file(p));
    }
    return c;
}

Workspace Workspace::open(const fs::path& root, std::string label) {
    if (!fs::is_directory(root)) fail(ErrorCode::IoError, "workspace root not found: " + root.string());
    Workspace ws;
    ws.root_ = fs::canonical(root);
    ws.label_ = label.empty() ? ws.root_.filename().string() : std::move(label);
    ws.injected_ = read_state(ws.root_);
    if (ws.injected_) {
        for (const auto& [rel, backup] : ws.injected_->backups) {
            if (!fs::exists(backup)) fail(ErrorCode::IoError, "injection state references missing backup " + backup.string());
        }
    }
    return ws;
}

std::vector<std::string> resolve_targets(const TaskSpec& task, const FrameworkConfig& config, const fs::path& root) {
    auto mapped = config.locate(task.operator_name);
    if (!mapped) fail(ErrorCode::TargetNotFound, "operator '" + task.operator_name + "' has no entry in the location map");
    std::vector<std::string> out;
    for (const auto& name : task.target_file_names) {
        auto it = std::find_if(mapped->begin(), mapped->end(), [&](const std::string& p) { return basename_of(p) == name; });
        if (it == mapped->end())
            fail(ErrorCode::TargetNotFound, "operator '" + task.operator_name + "' maps no path for file '" + name + "'");
        if (!fs::is_regular_file(root / *it))
            fail(ErrorCode::TargetNotFound, "operator source missing in framework tree: " + (root / *it).string());
        out.push_back(*it);
    }
    return out;
}

void inject(Workspace& ws, const TaskSpec& task, const KernelCandidate& candidate, const FrameworkConfig& config) {
    if (ws.injected_)
        fail(ErrorCode::AlreadyInjected, "workspace " + ws.root_.string() + " already holds task '" + ws.injected_->task_id + "'");
    validate_candidate(candidate, task);
    auto targets = resolve_targets(task, config, ws.root_);

    const fs::path backup_root = ws.backup_dir();
    const fs::path files_root = backup_root / "files";
    Injection inj;
    inj.task_id = task.id;
    try {
        fs::create_directories(files_root);
        for (const auto& rel : targets) {
            fs::path backup = files_root / rel;
            fs::create_directories(backup.parent_path());
            fs::copy_file(ws.root_ / rel, backup, fs::copy_options::overwrite_existing);
            inj.backups[rel] = backup;
        }
        write_state(ws.root_, inj);
        for (size_t i = 0; i < targets.size(); ++i) {
            const std::string& text = *candidate.file(task.target_file_names[i]);
            write_text_file(ws.root_ / targets[i], text);
        }
    } catch (const std::exception& e) {
        // Put back whatever was already swapped, then drop the backup area.
        std::error_code ec;
        for (const auto& [rel, backup] : inj.backups) fs::copy_file(backup, ws.root_ / rel, fs::copy_options::overwrite_existing, ec);
        fs::remove_all(backup_root, ec);
        fail(ErrorCode::IoError, std::string("inject failed: ") + e.what());
    }
    ws.injected_ = std::move(inj);
}

void restore(Workspace& ws) {
    if (!ws.injected_) fail(ErrorCode::NothingInjected, "workspace " + ws.root_.string() + " has no active injection");
    try {
        for (const auto& [rel, backup] : ws.injected_->backups) {
            if (!fs::exists(backup)) fail(ErrorCode::IoError, "backup vanished: " + backup.string());
            fs::rename(backup, ws.root_ / rel);
            // Newer than any object built from the candidate, so incremental builds pick it up.
            fs::last_write_time(ws.root_ / rel, fs::file_time_type::clock::now());
        }
        fs::remove_all(ws.backup_dir());
    } catch (const fs::filesystem_error& e) {
        fail(ErrorCode::IoError, std::string("restore failed: ") + e.what());
    }
    ws.injected_.reset();
}

Workspace clone_workspace(const Workspace& src, const std::string& label, const std::optional<fs::path>& parent) {
    if (src.is_injected()) fail(ErrorCode::CloneOfInjected, "cannot clone " + src.root().string() + " while injected");
    fs::path base = parent ? *parent : src.root().parent_path();
    std::string stem = src.root().filename().string() + "." + sanitize_label(label);
    fs::path dest = base / stem;
    for (int n = 2; fs::exists(dest); ++n) dest = base / (stem + "-" + std::to_string(n));
    try {
        fs::create_directories(base);
        fs::copy(src.root(), dest, fs::copy_options::recursive | fs::copy_options::copy_symlinks);
    } catch (const fs::filesystem_error& e) {
        std::error_code ec;
        fs::remove_all(dest, ec);
        fail(ErrorCode::IoError, std::string("clone failed: ") + e.what());
    }
    return Workspace::open(dest, dest.filename().string());
}

InjectionGuard::InjectionGuard(Workspace& ws, const TaskSpec& task, const KernelCandidate& candidate,
                               const FrameworkConfig& config)
    : ws_(ws) {
    inject(ws_, task, candidate, config);
    active_ = true;
}

InjectionGuard::~InjectionGuard() {
    if (!active_) return;
    try {
        restore(ws_);
    } catch (...) {
    }
}

void InjectionGuard::restore_now() {
    if (!active_) return;
    active_ = false;
    restore(ws_);
}

}  // namespace kf
