#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace kf {

// ---------------------------------------------------------------------------
// Repository tree
// ---------------------------------------------------------------------------

enum class NodeKind { File, Dir };

struct RepoNode {
    std::string name;
    NodeKind kind = NodeKind::File;
    // Placeholder standing in for the contents of a directory past max_depth.
    bool is_marker = false;
    std::vector<RepoNode> children;
};

struct RepoTree {
    std::filesystem::path root;
    RepoNode top;  // kind Dir, name = root directory name
};

inline constexpr std::string_view kElidedMarker = "...";

// Children are sorted by name. Directories at depth >= max_depth (root's
// children are depth 1) keep only a marker child. A non-empty include_exts
// keeps matching files and the directories leading to them. Hidden entries
// (leading '.') are skipped.
RepoTree build_repo_tree(const std::filesystem::path& root, int max_depth, const std::set<std::string>& include_exts = {});

std::string render_repo_tree(const RepoTree& tree);
std::size_t count_files(const RepoNode& node);

// ---------------------------------------------------------------------------
// Compiler diagnostics
// ---------------------------------------------------------------------------

enum class ErrorClass { Local, CrossFile };

std::string_view to_string(ErrorClass c);

struct ErrorRecord {
    std::string file;  // as reported by the compiler
    int line = 0;
    std::optional<int> column;
    std::string message;  // first line is the diagnostic, following lines are attached notes
    std::string context;
    ErrorClass classification = ErrorClass::CrossFile;

    friend bool operator==(const ErrorRecord&, const ErrorRecord&) = default;
};

struct ErrorExtraction {
    std::vector<ErrorRecord> records;
    // File-less failures (linker errors), one entry per distinct line.
    std::vector<std::string> other_errors;
    // Lines mentioning "error:" that matched neither grammar.
    std::size_t dropped = 0;
    // Distinct compiler errors found before the record cap was applied.
    std::size_t total_found = 0;
};

inline constexpr std::size_t kMaxErrorRecords = 20;

// Parses `path:line[:col]: error: message` diagnostics (warnings ignored) in
// log order, de-duplicated. A record is Local when its file name (ignoring
// directories) is one of `candidate_files`.
ErrorExtraction extract_errors(std::string_view log_text, const std::set<std::string>& candidate_files,
                               std::size_t max_records = kMaxErrorRecords);

// ---------------------------------------------------------------------------
// Enclosing-scope context
// ---------------------------------------------------------------------------

enum class ScopeKind { Function, Class, Fallback };

struct ContextSpan {
    int first_line = 0;  // 1-based, inclusive
    int last_line = 0;
    ScopeKind kind = ScopeKind::Fallback;
    std::string text;
};

inline constexpr int kContextFallbackRadius = 10;

// Smallest function or class definition containing `line`; otherwise the
// lines within +-10 of it. LineOutOfRange when line is outside the source.
ContextSpan find_enclosing_scope(std::string_view source, int line);

// Reads `file` and returns find_enclosing_scope(...).text. IoError, LineOutOfRange.
std::string extract_context(const std::filesystem::path& file, int line);

// Fills each record's context from the file under `search_root`. Paths that do
// not resolve directly are matched by file name; unreadable files leave the
// context empty.
void attach_contexts(std::vector<ErrorRecord>& records, const std::filesystem::path& search_root);

// ---------------------------------------------------------------------------
// Diagnosis document
// ---------------------------------------------------------------------------

// {"opname", "local_error": [...], "crossfile_error": [...], "other_error": [...]},
// entries carrying error_file / error_line / error_message / error_context.
nlohmann::ordered_json group_errors(const std::vector<ErrorRecord>& records, std::string_view opname = {},
                                    const std::vector<std::string>& other_errors = {});

}  // namespace kf
