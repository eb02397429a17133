// SPDX-License-Identifier: Apache-2.0
#include "crashfl/reponav.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <regex>
#include <sstream>

namespace fs = std::filesystem;

namespace crashfl {

const char* to_string(NavErrorKind kind) {
    switch (kind) {
        case NavErrorKind::FileNotFound: return "FileNotFound";
        case NavErrorKind::InvalidLine: return "InvalidLine";
        case NavErrorKind::TermNotInLine: return "TermNotInLine";
        case NavErrorKind::NavigationFailed: return "NavigationFailed";
        case NavErrorKind::InvalidArgument: return "InvalidArgument";
    }
    return "InvalidArgument";
}

std::string CodeSnippet::render() const {
    std::string out;
    for (const auto& [number, text] : lines) {
        out += std::to_string(number);
        out += '|';
        out += text;
        out += '\n';
    }
    if (!out.empty()) out.pop_back();
    return out;
}

RepoSnapshot::RepoSnapshot(fs::path root, std::optional<std::string> revision)
    : root_(std::move(root)), revision_(std::move(revision)) {
    if (!fs::is_directory(root_)) {
        throw std::invalid_argument("repository root is not a directory: " + root_.string());
    }
}

const std::vector<std::string>& RepoSnapshot::file_index() const {
    std::call_once(index_once_, [this] {
        for (const auto& entry : fs::recursive_directory_iterator(root_)) {
            if (!entry.is_regular_file()) continue;
            index_.push_back(fs::relative(entry.path(), root_).generic_string());
        }
        std::sort(index_.begin(), index_.end());
    });
    return index_;
}

bool RepoSnapshot::contains(const std::string& rel_path) const {
    const auto& idx = file_index();
    return std::binary_search(idx.begin(), idx.end(), rel_path);
}

NavResult<std::vector<std::string>> RepoSnapshot::read_lines(const std::string& rel_path) const {
    if (!contains(rel_path)) {
        return NavError{NavErrorKind::FileNotFound, "not in snapshot: " + rel_path};
    }
    std::ifstream in(root_ / fs::path(rel_path), std::ios::binary);
    if (!in) {
        return NavError{NavErrorKind::FileNotFound, "unreadable: " + rel_path};
    }
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

NavResult<std::string> resolve_path(const RepoSnapshot& repo, const std::string& raw) {
    if (raw.empty()) {
        return NavError{NavErrorKind::FileNotFound, "empty path"};
    }
    std::string candidate = fs::path(raw).lexically_normal().generic_string();
    const bool was_absolute = !candidate.empty() && candidate.front() == '/';
    while (!candidate.empty() && candidate.front() == '/') candidate.erase(0, 1);

    if (repo.contains(candidate)) return candidate;

    // Leading components may come from a build tree; drop them one by one.
    std::string_view suffix = candidate;
    while (true) {
        auto slash = suffix.find('/');
        if (slash == std::string_view::npos) break;
        suffix.remove_prefix(slash + 1);
        if (repo.contains(std::string(suffix))) return std::string(suffix);
    }

    // Unique basename match.
    const std::string base = fs::path(candidate).filename().generic_string();
    if (!base.empty()) {
        std::vector<const std::string*> matches;
        for (const auto& rel : repo.file_index()) {
            if (fs::path(rel).filename().generic_string() == base) matches.push_back(&rel);
        }
        if (matches.size() == 1) return *matches.front();
        if (matches.size() > 1) {
            return NavError{NavErrorKind::FileNotFound,
                            "ambiguous basename '" + base + "' (" +
                                std::to_string(matches.size()) + " candidates)"};
        }
    }

    const char* reason = was_absolute               ? "absolute path not in repository"
                         : raw.find('/') != std::string::npos ? "relative path not in repository"
                                                              : "unknown file";
    return NavError{NavErrorKind::FileNotFound, std::string(reason) + ": " + raw};
}

NavResult<CodeSnippet> get_nearby_code(const RepoSnapshot& repo, const std::string& path,
                                       long long line) {
    auto resolved = resolve_path(repo, path);
    if (!resolved.ok()) return resolved.error();

    auto lines = repo.read_lines(resolved.value());
    if (!lines.ok()) return lines.error();
    const auto& content = lines.value();

    if (line < 1 || line > static_cast<long long>(content.size())) {
        return NavError{NavErrorKind::InvalidLine,
                        "line " + std::to_string(line) + " outside 1.." +
                            std::to_string(content.size()) + " in " + resolved.value()};
    }

    const int center = static_cast<int>(line);
    const int first = std::max(1, center - kContextLines);
    const int last = std::min(static_cast<int>(content.size()), center + kContextLines);

    CodeSnippet snippet;
    snippet.path = resolved.value();
    snippet.center_line = center;
    for (int n = first; n <= last; ++n) {
        snippet.lines.emplace_back(n, content[static_cast<std::size_t>(n - 1)]);
    }
    return snippet;
}

namespace {

std::string regex_escape(const std::string& text) {
    static const std::regex special(R"([.^$|()\[\]{}*+?\\])");
    return std::regex_replace(text, special, R"(\$&)");
}

bool contains_token(const std::string& line, const std::string& term) {
    std::size_t pos = 0;
    auto is_ident = [](unsigned char c) { return std::isalnum(c) || c == '_'; };
    while ((pos = line.find(term, pos)) != std::string::npos) {
        const bool left_ok = pos == 0 || !is_ident(static_cast<unsigned char>(line[pos - 1]));
        const std::size_t end = pos + term.size();
        const bool right_ok = end >= line.size() || !is_ident(static_cast<unsigned char>(line[end]));
        if (left_ok && right_ok) return true;
        pos = end;
    }
    return false;
}

}  // namespace

NavResult<DefinitionLocation> LexicalResolver::definition(const RepoSnapshot& repo,
                                                          const std::string& rel_path, int line,
                                                          int column, const std::string& term) {
    (void)rel_path;
    (void)line;
    (void)column;
    const std::string t = regex_escape(term);
    // Declaration-shaped lines, most specific first.
    const std::array<std::regex, 5> patterns = {
        std::regex(R"(^\s*(?:template\s*<[^>]*>\s*)?(?:struct|class|union|enum(?:\s+(?:class|struct))?)\s+)" +
                   t + R"(\s*(?:final\s*)?[:{])"),
        std::regex(R"(^\s*#\s*define\s+)" + t + R"((?:[\s(]|$))"),
        std::regex(R"(^\s*using\s+)" + t + R"(\s*=)"),
        std::regex(R"(^\s*typedef\s+.*\b)" + t + R"(\s*;)"),
        // Function or variable definition with a return/value type in front.
        std::regex(R"(^\s*(?:[A-Za-z_][A-Za-z0-9_:<>,]*(?:\s+[A-Za-z_][A-Za-z0-9_:<>,]*)*[\s*&]+))" + t +
                   R"(\s*(?:\([^;]*$|\([^;]*\)\s*\{|=))"),
    };

    for (const auto& rel : repo.file_index()) {
        auto lines = repo.read_lines(rel);
        if (!lines.ok()) continue;
        const auto& content = lines.value();
        for (std::size_t i = 0; i < content.size(); ++i) {
            for (const auto& re : patterns) {
                if (std::regex_search(content[i], re)) {
                    return DefinitionLocation{rel, static_cast<int>(i) + 1, content[i]};
                }
            }
        }
    }
    return NavError{NavErrorKind::NavigationFailed, "no definition found for '" + term + "'"};
}

NavResult<DefinitionLocation> get_term_definition(const RepoSnapshot& repo,
                                                  SymbolResolver& resolver,
                                                  const std::string& path, long long line,
                                                  const std::string& term,
                                                  bool strict_term_check) {
    if (path.empty() || term.empty() || line <= 0) {
        return NavError{NavErrorKind::InvalidArgument,
                        "expected non-empty path, positive line and non-empty term"};
    }

    std::string needle = term;
    if (!strict_term_check) {
        // Models sometimes echo the rendered "N|" prefix back into the term.
        static const std::regex echoed_prefix(R"(^\s*\d+\s*\|\s*)");
        needle = std::regex_replace(needle, echoed_prefix, "");
        // And occasionally the whole numbered line; keep just the first token.
        if (auto ws = needle.find_first_of(" \t"); ws != std::string::npos) {
            needle = needle.substr(0, ws);
        }
        if (needle.empty()) {
            return NavError{NavErrorKind::InvalidArgument, "term reduces to nothing: " + term};
        }
    }

    auto resolved = resolve_path(repo, path);
    if (!resolved.ok()) return resolved.error();

    auto lines = repo.read_lines(resolved.value());
    if (!lines.ok()) return lines.error();
    const auto& content = lines.value();
    if (line < 1 || line > static_cast<long long>(content.size())) {
        return NavError{NavErrorKind::InvalidLine,
                        "line " + std::to_string(line) + " outside 1.." +
                            std::to_string(content.size()) + " in " + resolved.value()};
    }

    const std::string& text = content[static_cast<std::size_t>(line - 1)];
    if (!contains_token(text, needle)) {
        return NavError{NavErrorKind::TermNotInLine,
                        "'" + needle + "' does not appear on line " + std::to_string(line) +
                            " of " + resolved.value()};
    }

    const int column = static_cast<int>(text.find(needle));
    auto result = resolver.definition(repo, resolved.value(), static_cast<int>(line), column, needle);
    if (!result.ok()) return result.error();

    // Targets outside the snapshot (system headers and the like) are not
    // fault-localization candidates.
    if (!repo.contains(result.value().path)) {
        return NavError{NavErrorKind::NavigationFailed,
                        "definition outside repository: " + result.value().path};
    }
    return result;
}

}  // namespace crashfl
