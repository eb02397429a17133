// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace crashfl {

enum class NavErrorKind { FileNotFound, InvalidLine, TermNotInLine, NavigationFailed, InvalidArgument };

const char* to_string(NavErrorKind kind);

struct NavError {
    NavErrorKind kind;
    std::string detail;
};

/// Success-or-NavError. Navigation failures are data, not exceptions: the
/// agent loop forwards them to the model and keeps going.
template <typename T>
class NavResult {
public:
    NavResult(T value) : v_(std::move(value)) {}
    NavResult(NavError error) : v_(std::move(error)) {}

    bool ok() const { return std::holds_alternative<T>(v_); }
    explicit operator bool() const { return ok(); }

    const T& value() const { return std::get<T>(v_); }
    T& value() { return std::get<T>(v_); }
    const NavError& error() const { return std::get<NavError>(v_); }

private:
    std::variant<T, NavError> v_;
};

struct CodeSnippet {
    std::string path;
    int center_line = 0;
    std::vector<std::pair<int, std::string>> lines;  // consecutive, <= 21 entries

    /// Tool-facing rendering with "N|" line-number prefixes.
    std::string render() const;
};

struct DefinitionLocation {
    std::string path;
    int line = 0;
    std::string defining_text;

    bool operator==(const DefinitionLocation&) const = default;
};

/// Immutable view of a source tree checked out at the dump's revision.
/// Safe to share across concurrent agent runs.
class RepoSnapshot {
public:
    explicit RepoSnapshot(std::filesystem::path root,
                          std::optional<std::string> revision = std::nullopt);

    const std::filesystem::path& root() const { return root_; }
    const std::optional<std::string>& revision() const { return revision_; }

    /// Sorted repo-relative paths of all regular files, built lazily once.
    const std::vector<std::string>& file_index() const;

    bool contains(const std::string& rel_path) const;
    NavResult<std::vector<std::string>> read_lines(const std::string& rel_path) const;

private:
    std::filesystem::path root_;
    std::optional<std::string> revision_;
    mutable std::once_flag index_once_;
    mutable std::vector<std::string> index_;
};

/// Map a model-supplied path onto the snapshot: as given, then by stripping
/// leading components of absolute paths, then by unique basename. Failures
/// carry a sub-reason (absolute / relative / unknown / ambiguous).
NavResult<std::string> resolve_path(const RepoSnapshot& repo, const std::string& raw);

inline constexpr int kContextLines = 10;

/// Window of the 10 lines before, the target line, and the 10 after,
/// clamped at file boundaries.
NavResult<CodeSnippet> get_nearby_code(const RepoSnapshot& repo, const std::string& path,
                                       long long line);

/// Where an identifier is defined. The LSP-backed implementation lives in
/// lsp.hpp; the lexical one scans the snapshot for declaration-shaped lines.
class SymbolResolver {
public:
    virtual ~SymbolResolver() = default;
    /// `line` is 1-based, `column` a 0-based character offset of the term.
    virtual NavResult<DefinitionLocation> definition(const RepoSnapshot& repo,
                                                     const std::string& rel_path, int line,
                                                     int column, const std::string& term) = 0;
};

class LexicalResolver : public SymbolResolver {
public:
    NavResult<DefinitionLocation> definition(const RepoSnapshot& repo, const std::string& rel_path,
                                             int line, int column, const std::string& term) override;
};

/// Verify the term really occurs on the given line, then ask the resolver.
/// Lenient mode strips a leading "N|" line-number prefix the model may have
/// echoed into the term; strict mode reproduces the unforgiving behavior.
NavResult<DefinitionLocation> get_term_definition(const RepoSnapshot& repo,
                                                  SymbolResolver& resolver,
                                                  const std::string& path, long long line,
                                                  const std::string& term,
                                                  bool strict_term_check = false);

}  // namespace crashfl
