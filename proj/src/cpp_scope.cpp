// Lightweight C++ scope scanner used to pull the enclosing function or class
// around a compiler diagnostic. It tokenizes enough of the language to skip
// comments, literals and preprocessor lines, tracks brace nesting, and
// classifies each brace block from the tokens that precede it.

#include "kf/diagnostics.hpp"

#include "kf/error.hpp"
#include "kf/fsutil.hpp"

#include <algorithm>
#include <cctype>

namespace kf {

namespace {

enum class TokKind { Ident, Number, Punct, String, Directive };

struct Tok {
    TokKind kind;
    std::string text;
    int line;
};

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

class Lexer {
public:
    explicit Lexer(std::string_view src) : s_(src) {}

    std::vector<Tok> run() {
        std::vector<Tok> out;
        bool line_start = true;
        while (i_ < s_.size()) {
            char c = s_[i_];
            if (c == '\n') {
                ++line_;
                ++i_;
                line_start = true;
                continue;
            }
            if (std::isspace(static_cast<unsigned char>(c))) {
                ++i_;
                continue;
            }
            if (c == '/' && peek(1) == '/') {
                skip_line_comment();
                continue;
            }
            if (c == '/' && peek(1) == '*') {
                skip_block_comment();
                continue;
            }
            if (c == '#' && line_start) {
                int l = line_;
                skip_directive();
                out.push_back({TokKind::Directive, "#", l});
                continue;
            }
            line_start = false;
            if (ident_start(c)) {
                size_t b = i_;
                while (i_ < s_.size() && ident_char(s_[i_])) ++i_;
                std::string word(s_.substr(b, i_ - b));
                if (i_ < s_.size() && (s_[i_] == '"' || s_[i_] == '\'') && is_literal_prefix(word)) {
                    int l = line_;
                    if (word.back() == 'R' && s_[i_] == '"') skip_raw_string();
                    else skip_quoted(s_[i_]);
                    out.push_back({TokKind::String, "\"\"", l});
                    continue;
                }
                out.push_back({TokKind::Ident, std::move(word), line_});
                continue;
            }
            if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
                size_t b = i_;
                while (i_ < s_.size()) {
                    char d = s_[i_];
                    if (ident_char(d) || d == '.' || (d == '\'' && i_ + 1 < s_.size() && ident_char(s_[i_ + 1]))) {
                        ++i_;
                    } else if ((d == '+' || d == '-') && i_ > b && std::strchr("eEpP", s_[i_ - 1])) {
                        ++i_;
                    } else {
                        break;
                    }
                }
                out.push_back({TokKind::Number, std::string(s_.substr(b, i_ - b)), line_});
                continue;
            }
            if (c == '"' || c == '\'') {
                int l = line_;
                skip_quoted(c);
                out.push_back({TokKind::String, "\"\"", l});
                continue;
            }
            for (std::string_view two : {"::", "->", "&&"}) {
                if (s_.substr(i_, 2) == two) {
                    out.push_back({TokKind::Punct, std::string(two), line_});
                    i_ += 2;
                    goto next;
                }
            }
            out.push_back({TokKind::Punct, std::string(1, c), line_});
            ++i_;
        next:;
        }
        return out;
    }

private:
    char peek(size_t k) const { return i_ + k < s_.size() ? s_[i_ + k] : '\0'; }

    static bool is_literal_prefix(const std::string& w) {
        return w == "L" || w == "u" || w == "U" || w == "u8" || w == "R" || w == "LR" || w == "uR" || w == "UR" || w == "u8R";
    }

    void skip_line_comment() {
        while (i_ < s_.size() && s_[i_] != '\n') {
            if (s_[i_] == '\\' && peek(1) == '\n') {
                ++line_;
                i_ += 2;
                continue;
            }
            ++i_;
        }
    }

    void skip_block_comment() {
        i_ += 2;
        while (i_ < s_.size() && !(s_[i_] == '*' && peek(1) == '/')) {
            if (s_[i_] == '\n') ++line_;
            ++i_;
        }
        i_ = std::min(s_.size(), i_ + 2);
    }

    void skip_directive() {
        while (i_ < s_.size() && s_[i_] != '\n') {
            if (s_[i_] == '\\' && peek(1) == '\n') {
                ++line_;
                i_ += 2;
                continue;
            }
            if (s_[i_] == '/' && peek(1) == '*') {
                skip_block_comment();
                continue;
            }
            if (s_[i_] == '/' && peek(1) == '/') {
                skip_line_comment();
                return;
            }
            ++i_;
        }
    }

    void skip_quoted(char quote) {
        ++i_;
        while (i_ < s_.size() && s_[i_] != quote) {
            if (s_[i_] == '\\') {
                if (peek(1) == '\n') ++line_;
                i_ += 2;
                continue;
            }
            if (s_[i_] == '\n') {
                // Unterminated literal; stop at end of line.
                return;
            }
            ++i_;
        }
        ++i_;
    }

    void skip_raw_string() {
        size_t open = s_.find('(', i_);
        if (open == std::string_view::npos) {
            i_ = s_.size();
            return;
        }
        std::string close = ")" + std::string(s_.substr(i_ + 1, open - i_ - 1)) + "\"";
        size_t end = s_.find(close, open);
        size_t stop = end == std::string_view::npos ? s_.size() : end + close.size();
        line_ += static_cast<int>(std::count(s_.begin() + static_cast<long>(i_), s_.begin() + static_cast<long>(stop), '\n'));
        i_ = stop;
    }

    std::string_view s_;
    size_t i_ = 0;
    int line_ = 1;
};

enum class BlockKind { Function, Class, Namespace, Control, Other };

struct Frame {
    BlockKind kind;
    int start_line;
    std::vector<Tok> saved_header;
    int saved_depth;
    bool expression_level;
};

struct Block {
    BlockKind kind;
    int first_line;
    int last_line;
    int depth;
};

bool is_one_of(const std::string& s, std::initializer_list<std::string_view> words) {
    return std::find(words.begin(), words.end(), s) != words.end();
}

// Index of the first header token after any leading template<...> groups and
// [[attributes]].
size_t skip_prefix(const std::vector<Tok>& h) {
    size_t i = 0;
    while (i < h.size()) {
        if (h[i].text == "template" && i + 1 < h.size() && h[i + 1].text == "<") {
            int depth = 0;
            for (++i; i < h.size(); ++i) {
                if (h[i].text == "<") ++depth;
                else if (h[i].text == ">" && --depth == 0) break;
            }
            ++i;
            continue;
        }
        if (h[i].text == "[" && i + 1 < h.size() && h[i + 1].text == "[") {
            while (i < h.size() && !(h[i].text == "]" && i + 1 < h.size() && h[i + 1].text == "]")) ++i;
            i += 2;
            continue;
        }
        break;
    }
    return i;
}

std::pair<BlockKind, bool> classify(const std::vector<Tok>& h, int paren_depth) {
    if (h.empty()) return {BlockKind::Other, false};
    if (paren_depth > 0) return {BlockKind::Other, true};
    size_t b = skip_prefix(h);
    if (b >= h.size()) return {BlockKind::Other, false};
    const std::string& first = h[b].text;

    if (is_one_of(first, {"if", "else", "for", "while", "switch", "catch", "do", "try"})) return {BlockKind::Control, false};
    if (is_one_of(first, {"return", "throw", "co_return", "co_yield", "case", "default"})) return {BlockKind::Other, true};
    if (first == "[") return {BlockKind::Other, true};  // immediately-invoked lambda

    bool has_top_paren = false;
    bool has_assign = false;
    bool has_arrow_after_paren = false;
    bool has_colon_after_key = false;
    std::optional<size_t> class_key;
    bool has_enum = false;
    bool has_namespace = false;
    int depth = 0;
    for (size_t i = b; i < h.size(); ++i) {
        const std::string& t = h[i].text;
        if (t == "(") {
            if (depth == 0) has_top_paren = true;
            ++depth;
            continue;
        }
        if (t == ")") {
            --depth;
            continue;
        }
        if (depth != 0) continue;
        if (t == "=" && !(i > 0 && h[i - 1].text == "operator") && !(i > 0 && h[i - 1].text == "=")) has_assign = true;
        if (t == "->" && has_top_paren) has_arrow_after_paren = true;
        if (t == "namespace") has_namespace = true;
        if (t == "enum") has_enum = true;
        if (!class_key && is_one_of(t, {"class", "struct", "union"})) class_key = i;
        if (class_key && t == ":" && i > *class_key) has_colon_after_key = true;
    }
    if (first == "extern" && b + 1 < h.size() && h[b + 1].kind == TokKind::String) return {BlockKind::Namespace, false};
    if (has_namespace) return {BlockKind::Namespace, false};
    if (has_assign) return {BlockKind::Other, true};
    if (has_enum) return {BlockKind::Other, false};

    const std::string& last = h.back().text;
    if (class_key && (last != ")" || has_colon_after_key)) return {BlockKind::Class, false};

    if (has_top_paren && h[b].text != "(") {
        bool tail_ok = is_one_of(last, {")", "{}", "const", "override", "final", "noexcept", "volatile", "&", "&&", "mutable"}) ||
                       has_arrow_after_paren;
        if (tail_ok) return {BlockKind::Function, false};
    }
    if (h.back().kind == TokKind::Ident || is_one_of(last, {">", "]", ",", "(", "{}"})) return {BlockKind::Other, true};
    return {BlockKind::Other, false};
}

std::vector<Block> scan_blocks(std::string_view source) {
    std::vector<Tok> toks = Lexer(source).run();
    std::vector<Block> blocks;
    std::vector<Frame> stack;
    std::vector<Tok> header;
    int paren_depth = 0;

    for (const Tok& t : toks) {
        if (t.kind == TokKind::Directive) {
            if (paren_depth == 0) header.clear();
            continue;
        }
        if (t.kind == TokKind::Punct) {
            if (t.text == ";" && paren_depth == 0) {
                header.clear();
                continue;
            }
            if (t.text == "(") ++paren_depth;
            if (t.text == ")" && paren_depth > 0) --paren_depth;
            if (t.text == ":" && paren_depth == 0 && !header.empty()) {
                const std::string& f = header.front().text;
                if ((header.size() == 1 && is_one_of(f, {"public", "private", "protected", "signals", "slots"})) ||
                    is_one_of(f, {"case", "default"})) {
                    header.clear();
                    continue;
                }
            }
            if (t.text == "{") {
                auto [kind, expr] = classify(header, paren_depth);
                int start = header.empty() ? t.line : header.front().line;
                stack.push_back({kind, start, std::move(header), paren_depth, expr});
                header.clear();
                paren_depth = 0;
                continue;
            }
            if (t.text == "}") {
                if (stack.empty()) {
                    header.clear();
                    continue;
                }
                Frame f = std::move(stack.back());
                stack.pop_back();
                blocks.push_back({f.kind, f.start_line, t.line, static_cast<int>(stack.size())});
                if (f.expression_level) {
                    header = std::move(f.saved_header);
                    header.push_back({TokKind::Punct, "{}", t.line});
                    paren_depth = f.saved_depth;
                } else {
                    header.clear();
                    paren_depth = 0;
                }
                continue;
            }
        }
        header.push_back(t);
    }
    return blocks;
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    size_t start = 0;
    while (start < text.size()) {
        size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        lines.push_back(text.substr(start, end - start));
        start = end + 1;
    }
    return lines;
}

}  // namespace

ContextSpan find_enclosing_scope(std::string_view source, int line) {
    auto lines = split_lines(source);
    const int n = static_cast<int>(lines.size());
    if (line < 1 || line > n)
        fail(ErrorCode::LineOutOfRange, "line " + std::to_string(line) + " outside 1.." + std::to_string(n));

    ContextSpan span;
    const Block* best = nullptr;
    auto blocks = scan_blocks(source);
    for (const auto& b : blocks) {
        if (b.kind != BlockKind::Function && b.kind != BlockKind::Class) continue;
        if (line < b.first_line || line > b.last_line) continue;
        if (!best || (b.last_line - b.first_line) < (best->last_line - best->first_line) ||
            ((b.last_line - b.first_line) == (best->last_line - best->first_line) && b.depth > best->depth)) {
            best = &b;
        }
    }
    if (best) {
        span.first_line = best->first_line;
        span.last_line = best->last_line;
        span.kind = best->kind == BlockKind::Function ? ScopeKind::Function : ScopeKind::Class;
    } else {
        span.first_line = std::max(1, line - kContextFallbackRadius);
        span.last_line = std::min(n, line + kContextFallbackRadius);
        span.kind = ScopeKind::Fallback;
    }
    for (int i = span.first_line; i <= span.last_line; ++i) {
        span.text += lines[static_cast<size_t>(i - 1)];
        span.text += '\n';
    }
    return span;
}

std::string extract_context(const std::filesystem::path& file, int line) {
    return find_enclosing_scope(read_text_file(file), line).text;
}

}  // namespace kf
