#include "kf/fsutil.hpp"

#include "kf/error.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

namespace fs = std::filesystem;

namespace kf {

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const fs::path& path, std::string_view content) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) fail(ErrorCode::IoError, "short write to " + path.string());
}

void append_text_file(const fs::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) fail(ErrorCode::IoError, "cannot append to " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) fail(ErrorCode::IoError, "short write to " + path.string());
}

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void fnv(std::uint64_t& h, std::string_view bytes) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= kFnvPrime;
    }
}

}  // namespace

std::uint64_t tree_hash(const fs::path& root, std::initializer_list<std::string_view> skip_top_level) {
    if (!fs::is_directory(root)) fail(ErrorCode::IoError, "not a directory: " + root.string());
    std::vector<std::pair<std::string, fs::path>> entries;
    for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator(); ++it) {
        std::string rel = fs::relative(it->path(), root).generic_string();
        std::string first = rel.substr(0, rel.find('/'));
        if (std::find(skip_top_level.begin(), skip_top_level.end(), first) != skip_top_level.end()) {
            if (it->is_directory()) it.disable_recursion_pending();
            continue;
        }
        entries.emplace_back(std::move(rel), it->path());
    }
    std::sort(entries.begin(), entries.end());
    std::uint64_t h = kFnvOffset;
    for (const auto& [rel, path] : entries) {
        fnv(h, rel);
        auto status = fs::symlink_status(path);
        if (fs::is_symlink(status)) {
            fnv(h, "\x01L");
            fnv(h, fs::read_symlink(path).string());
        } else if (fs::is_directory(status)) {
            fnv(h, "\x01" "D");
        } else {
            fnv(h, "\x01" "F");
            fnv(h, read_text_file(path));
        }
        fnv(h, std::string_view("\0", 1));
    }
    return h;
}

fs::path make_temp_dir(std::string_view prefix) {
    fs::path base = fs::temp_directory_path();
    std::string pattern = (base / (std::string(prefix) + "XXXXXX")).string();
    std::vector<char> buf(pattern.begin(), pattern.end());
    buf.push_back('\0');
    if (!::mkdtemp(buf.data())) fail(ErrorCode::IoError, "mkdtemp failed for " + pattern);
    return fs::path(buf.data());
}

std::string basename_of(std::string_view path) {
    size_t pos = path.find_last_of("/\\");
    return std::string(pos == std::string_view::npos ? path : path.substr(pos + 1));
}

}  // namespace kf
