#include "kf/diagnostics.hpp"

#include "kf/error.hpp"
#include "kf/fsutil.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <tuple>

namespace fs = std::filesystem;

namespace kf {

// ---------------------------------------------------------------------------
// Repository tree
// ---------------------------------------------------------------------------

namespace {

bool wanted_file(const fs::path& p, const std::set<std::string>& exts) {
    return exts.empty() || exts.count(p.extension().string()) != 0;
}

// Returns false when the directory ends up with nothing worth listing.
bool fill_dir(RepoNode& node, const fs::path& dir, int depth, int max_depth, const std::set<std::string>& exts) {
    std::vector<fs::directory_entry> entries;
    std::error_code ec;
    for (const auto& e : fs::directory_iterator(dir, ec)) {
        if (e.path().filename().string().rfind('.', 0) == 0) continue;
        entries.push_back(e);
    }
    if (ec) fail(ErrorCode::IoError, "cannot list " + dir.string() + ": " + ec.message());
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.path().filename().string() < b.path().filename().string(); });

    if (depth >= max_depth) {
        if (entries.empty()) return exts.empty();
        node.children.push_back(RepoNode{std::string(kElidedMarker), NodeKind::File, true, {}});
        return true;
    }
    for (const auto& e : entries) {
        RepoNode child;
        child.name = e.path().filename().string();
        if (e.is_directory()) {
            child.kind = NodeKind::Dir;
            if (fill_dir(child, e.path(), depth + 1, max_depth, exts) || exts.empty()) node.children.push_back(std::move(child));
        } else if (wanted_file(e.path(), exts)) {
            child.kind = NodeKind::File;
            node.children.push_back(std::move(child));
        }
    }
    return !node.children.empty();
}

void render(const RepoNode& node, const std::string& prefix, std::string& out) {
    for (size_t i = 0; i < node.children.size(); ++i) {
        const auto& c = node.children[i];
        bool last = i + 1 == node.children.size();
        out += prefix + (last ? "`-- " : "|-- ") + c.name + (c.kind == NodeKind::Dir ? "/" : "") + "\n";
        if (!c.children.empty()) render(c, prefix + (last ? "    " : "|   "), out);
    }
}

}  // namespace

RepoTree build_repo_tree(const fs::path& root, int max_depth, const std::set<std::string>& include_exts) {
    if (!fs::is_directory(root)) fail(ErrorCode::IoError, "repository root not found: " + root.string());
    if (max_depth < 1) fail(ErrorCode::InvalidArgument, "max_depth must be positive");
    RepoTree tree;
    tree.root = root;
    tree.top.name = fs::absolute(root).lexically_normal().filename().string();
    if (tree.top.name.empty()) tree.top.name = fs::absolute(root).parent_path().filename().string();
    tree.top.kind = NodeKind::Dir;
    fill_dir(tree.top, root, 0, max_depth, include_exts);
    return tree;
}

std::string render_repo_tree(const RepoTree& tree) {
    std::string out = tree.top.name + "/\n";
    render(tree.top, "", out);
    return out;
}

std::size_t count_files(const RepoNode& node) {
    std::size_t n = (node.kind == NodeKind::File && !node.is_marker) ? 1 : 0;
    for (const auto& c : node.children) n += count_files(c);
    return n;
}

// ---------------------------------------------------------------------------
// Compiler diagnostics
// ---------------------------------------------------------------------------

std::string_view to_string(ErrorClass c) { return c == ErrorClass::Local ? "Local" : "CrossFile"; }

namespace {

enum class Severity { Error, Warning, Note };

struct Diagnostic {
    std::string file;
    int line = 0;
    std::optional<int> column;
    Severity severity = Severity::Error;
    std::string message;
};

std::string strip_ansi(std::string_view line) {
    std::string out;
    out.reserve(line.size());
    for (size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '\x1b' && i + 1 < line.size() && line[i + 1] == '[') {
            i += 2;
            while (i < line.size() && !std::isalpha(static_cast<unsigned char>(line[i]))) ++i;
            continue;
        }
        if (line[i] != '\r') out += line[i];
    }
    return out;
}

std::optional<int> to_positive_int(std::string_view s) {
    if (s.empty() || s.size() > 9) return std::nullopt;
    int v = 0;
    for (char c : s) {
        if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
        v = v * 10 + (c - '0');
    }
    if (v <= 0) return std::nullopt;
    return v;
}

// "path:line" or "path:line:col".
bool parse_location(std::string_view loc, Diagnostic& d) {
    size_t last = loc.rfind(':');
    if (last == std::string_view::npos) return false;
    auto tail = to_positive_int(loc.substr(last + 1));
    if (!tail) return false;
    std::string_view rest = loc.substr(0, last);
    size_t prev = rest.rfind(':');
    if (prev != std::string_view::npos) {
        if (auto mid = to_positive_int(rest.substr(prev + 1))) {
            std::string_view path = rest.substr(0, prev);
            if (path.empty()) return false;
            d.file = std::string(path);
            d.line = *mid;
            d.column = *tail;
            return true;
        }
    }
    if (rest.empty()) return false;
    d.file = std::string(rest);
    d.line = *tail;
    return true;
}

std::optional<Diagnostic> parse_diagnostic(std::string_view line) {
    static constexpr std::pair<std::string_view, Severity> kTags[] = {
        {"fatal error: ", Severity::Error},
        {"error: ", Severity::Error},
        {"warning: ", Severity::Warning},
        {"note: ", Severity::Note},
    };
    for (size_t pos = line.find(": "); pos != std::string_view::npos; pos = line.find(": ", pos + 1)) {
        std::string_view after = line.substr(pos + 2);
        for (const auto& [tag, sev] : kTags) {
            if (after.substr(0, tag.size()) != tag) continue;
            Diagnostic d;
            std::string_view loc = line.substr(0, pos);
            size_t lead = loc.find_first_not_of(" \t");
            if (lead == std::string_view::npos) return std::nullopt;
            if (!parse_location(loc.substr(lead), d)) return std::nullopt;
            d.severity = sev;
            std::string_view msg = after.substr(tag.size());
            while (!msg.empty() && std::isspace(static_cast<unsigned char>(msg.back()))) msg.remove_suffix(1);
            d.message = std::string(msg);
            return d;
        }
    }
    return std::nullopt;
}

bool is_linker_error(std::string_view line) {
    for (std::string_view needle : {"undefined reference to", "undefined symbol", "ld returned", "linker command failed",
                                    "multiple definition of"}) {
        if (line.find(needle) != std::string_view::npos) return true;
    }
    return false;
}

std::string trim_copy(std::string_view s) {
    size_t b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    size_t e = s.find_last_not_of(" \t");
    return std::string(s.substr(b, e - b + 1));
}

std::string location_text(const Diagnostic& d) {
    std::string s = d.file + ":" + std::to_string(d.line);
    if (d.column) s += ":" + std::to_string(*d.column);
    return s;
}

}  // namespace

ErrorExtraction extract_errors(std::string_view log_text, const std::set<std::string>& candidate_files,
                               std::size_t max_records) {
    std::set<std::string> candidate_names;
    for (const auto& f : candidate_files) candidate_names.insert(basename_of(f));

    ErrorExtraction out;
    std::set<std::tuple<std::string, int, int, std::string>> seen;
    std::set<std::string> seen_other;
    std::vector<ErrorRecord> all;
    // Index into `all` of the error that trailing notes attach to; -1 when the
    // previous diagnostic was a warning or a duplicate.
    long attach_to = -1;

    size_t start = 0;
    while (start < log_text.size()) {
        size_t end = log_text.find('\n', start);
        if (end == std::string_view::npos) end = log_text.size();
        std::string line = strip_ansi(log_text.substr(start, end - start));
        start = end + 1;

        if (auto d = parse_diagnostic(line)) {
            if (d->severity == Severity::Note) {
                if (attach_to >= 0) all[static_cast<size_t>(attach_to)].message += "\n  note: " + location_text(*d) + ": " + d->message;
                continue;
            }
            if (d->severity == Severity::Warning) {
                attach_to = -1;
                continue;
            }
            auto key = std::make_tuple(d->file, d->line, d->column.value_or(0), d->message);
            if (!seen.insert(key).second) {
                attach_to = -1;
                continue;
            }
            ErrorRecord r;
            r.file = d->file;
            r.line = d->line;
            r.column = d->column;
            r.message = d->message;
            r.classification = candidate_names.count(basename_of(r.file)) ? ErrorClass::Local : ErrorClass::CrossFile;
            all.push_back(std::move(r));
            attach_to = static_cast<long>(all.size()) - 1;
            continue;
        }
        if (is_linker_error(line)) {
            std::string t = trim_copy(line);
            if (seen_other.insert(t).second) out.other_errors.push_back(std::move(t));
            attach_to = -1;
            continue;
        }
        if (line.find("error:") != std::string::npos) ++out.dropped;
    }

    out.total_found = all.size();
    if (all.size() > max_records) all.resize(max_records);
    out.records = std::move(all);
    return out;
}

// ---------------------------------------------------------------------------
// Diagnosis document
// ---------------------------------------------------------------------------

nlohmann::ordered_json group_errors(const std::vector<ErrorRecord>& records, std::string_view opname,
                                    const std::vector<std::string>& other_errors) {
    nlohmann::ordered_json doc;
    doc["opname"] = std::string(opname);
    doc["local_error"] = nlohmann::ordered_json::array();
    doc["crossfile_error"] = nlohmann::ordered_json::array();
    for (const auto& r : records) {
        nlohmann::ordered_json e;
        e["error_file"] = r.file;
        e["error_line"] = r.line;
        e["error_message"] = r.message;
        e["error_context"] = r.context;
        doc[r.classification == ErrorClass::Local ? "local_error" : "crossfile_error"].push_back(std::move(e));
    }
    doc["other_error"] = other_errors;
    return doc;
}

void attach_contexts(std::vector<ErrorRecord>& records, const fs::path& search_root) {
    std::map<std::string, std::optional<fs::path>> by_name;
    auto resolve = [&](const std::string& reported) -> std::optional<fs::path> {
        fs::path p(reported);
        if (p.is_absolute() && fs::is_regular_file(p)) return p;
        if (!p.is_absolute() && fs::is_regular_file(search_root / p)) return search_root / p;
        std::string name = basename_of(reported);
        auto it = by_name.find(name);
        if (it != by_name.end()) return it->second;
        std::optional<fs::path> found;
        std::error_code ec;
        for (auto rit = fs::recursive_directory_iterator(search_root, ec); rit != fs::recursive_directory_iterator();
             rit.increment(ec)) {
            if (ec) break;
            // Skip hidden trees (backups, VCS metadata).
            if (rit->path().filename().string().rfind('.', 0) == 0) {
                if (rit->is_directory()) rit.disable_recursion_pending();
                continue;
            }
            if (rit->is_regular_file() && rit->path().filename().string() == name) {
                if (!found || rit->path().string() < found->string()) found = rit->path();
            }
        }
        by_name[name] = found;
        return found;
    };
    for (auto& r : records) {
        auto path = resolve(r.file);
        if (!path) continue;
        try {
            r.context = extract_context(*path, r.line);
        } catch (const Error&) {
        }
    }
}

}  // namespace kf
