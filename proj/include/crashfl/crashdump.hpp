// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace crashfl {

class DumpError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class MalformedDump : public DumpError {
public:
    using DumpError::DumpError;
};
class DuplicateSection : public DumpError {
public:
    using DumpError::DumpError;
};
class SectionNotFound : public DumpError {
public:
    using DumpError::DumpError;
};
class MissingSignal : public DumpError {
public:
    using DumpError::DumpError;
};

/// Header lines look like "[CRASH_STACK]" on a line of their own.
inline constexpr const char* kDefaultHeaderPattern = R"(^\[([A-Z0-9_]+)\]$)";

/// Synthetic section name for text preceding the first header.
inline constexpr const char* kPreambleSection = "PREAMBLE";

struct DumpSection {
    std::string name;
    // Raw byte slice between this header line and the next one (or EOF),
    // trailing newline included. Keeping the exact slice makes render()
    // a plain concatenation, so round-trips are byte-identical.
    std::string raw_body;
};

class Crashdump {
public:
    Crashdump() = default;
    Crashdump(std::string source_id, std::vector<DumpSection> sections, bool has_preamble);

    const std::string& source_id() const { return source_id_; }
    const std::vector<DumpSection>& sections() const { return sections_; }
    bool has_preamble() const { return has_preamble_; }

    bool has_section(std::string_view name) const;

    /// Section body as consumers see it: the raw slice minus one trailing
    /// newline. Throws SectionNotFound.
    std::string_view section(std::string_view name) const;

    /// Reassemble the original dump text byte-for-byte.
    std::string render() const;

private:
    std::string source_id_;
    std::vector<DumpSection> sections_;
    bool has_preamble_ = false;
};

/// Split a dump into sections at header lines. Text before the first header
/// becomes a PREAMBLE section; input with no headers at all is a single
/// PREAMBLE section. Empty input is the only MalformedDump case; a repeated
/// header name raises DuplicateSection.
Crashdump parse_crashdump(std::string_view input, std::string source_id = {},
                          const std::string& header_pattern = kDefaultHeaderPattern);

enum class CrashOrigin { Backtrace, PendingException };

struct StackLocation {
    std::string file_path;
    int line = 0;
    CrashOrigin origin = CrashOrigin::Backtrace;
    int frame_index = 0;
    std::optional<std::string> thread_label;

    bool operator==(const StackLocation&) const = default;
};

struct CrashStack {
    std::vector<StackLocation> backtrace;
    std::vector<StackLocation> pending;
    std::string raw_text;
    // Non-empty lines that were neither frames with a source location nor
    // block markers. Crashdumps are noisy; these are never fatal.
    int skipped_lines = 0;
};

/// Parse a CRASH_STACK section body. Frame lines carry an index, a symbol
/// and usually a file:line token; lines under a "pending exceptions" block
/// marker land in `pending`, everything else in `backtrace`.
CrashStack parse_crash_stack(std::string_view body);

struct CrashExtInfo {
    std::string signal_name;
    std::optional<int> signal_number;
    std::optional<int> signal_code;
    std::optional<std::uint64_t> faulting_address;
    std::vector<std::pair<std::string, std::string>> host_metadata;
    std::string raw_text;
};

/// Parse a CRASH_EXTINFO section body. Throws MissingSignal when no signal
/// name can be found.
CrashExtInfo parse_crash_extinfo(std::string_view body);

/// One "path:line" per line, pending-exception block first. Output is never
/// longer than the raw section text for dumps in the wild.
std::string sanitize_crash_stack(const CrashStack& stack);

/// Flat "key: value" lines: signal fields first, then host metadata in
/// original order. Decorative banner lines are gone.
std::string sanitize_crash_extinfo(const CrashExtInfo& info);

enum class CrashType { SigAbrt, SigSegvNpe, SigSegvNonNpe, SigBus, SigFpe, Other };

/// SIGSEGV at an address below one page is treated as a null dereference
/// (null-plus-offset); addresses like 0x3d fall in this range.
inline constexpr std::uint64_t kNpeAddressThreshold = 0x1000;

/// Total and deterministic in (signal_name, faulting_address).
CrashType classify_crash_type(const CrashExtInfo& info);

std::string_view to_string(CrashType type);
std::optional<CrashType> crash_type_from_string(std::string_view name);

}  // namespace crashfl
