// SPDX-License-Identifier: Apache-2.0
#include "crashfl/crashdump.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <regex>
#include <sstream>
#include <unordered_set>

namespace crashfl {

namespace {

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

// Iterates lines of `text`, yielding the line content (without newline) and
// the byte offset where the line starts.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
    std::size_t pos = 0;
    while (pos <= text.size()) {
        if (pos == text.size()) {
            break;
        }
        std::size_t nl = text.find('\n', pos);
        std::size_t end = (nl == std::string_view::npos) ? text.size() : nl;
        fn(text.substr(pos, end - pos), pos);
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
}

}  // namespace

Crashdump::Crashdump(std::string source_id, std::vector<DumpSection> sections, bool has_preamble)
    : source_id_(std::move(source_id)), sections_(std::move(sections)), has_preamble_(has_preamble) {}

bool Crashdump::has_section(std::string_view name) const {
    return std::any_of(sections_.begin(), sections_.end(),
                       [&](const DumpSection& s) { return s.name == name; });
}

std::string_view Crashdump::section(std::string_view name) const {
    for (const auto& s : sections_) {
        if (s.name == name) {
            std::string_view body = s.raw_body;
            if (!body.empty() && body.back() == '\n') body.remove_suffix(1);
            return body;
        }
    }
    throw SectionNotFound("section not found: " + std::string(name));
}

std::string Crashdump::render() const {
    std::string out;
    std::size_t total = 0;
    for (const auto& s : sections_) total += s.name.size() + 3 + s.raw_body.size();
    out.reserve(total);
    for (std::size_t i = 0; i < sections_.size(); ++i) {
        if (!(i == 0 && has_preamble_)) {
            out += '[';
            out += sections_[i].name;
            out += "]\n";
        }
        out += sections_[i].raw_body;
    }
    return out;
}

Crashdump parse_crashdump(std::string_view input, std::string source_id,
                          const std::string& header_pattern) {
    if (input.empty()) {
        throw MalformedDump("empty crashdump input");
    }

    const std::regex header_re(header_pattern);

    struct Header {
        std::string name;
        std::size_t line_start;  // offset of '[' in input
        std::size_t body_start;  // offset just past the header line's newline
    };
    std::vector<Header> headers;

    for_each_line(input, [&](std::string_view line, std::size_t offset) {
        std::cmatch m;
        if (std::regex_match(line.data(), line.data() + line.size(), m, header_re)) {
            std::size_t body_start = offset + line.size();
            if (body_start < input.size() && input[body_start] == '\n') ++body_start;
            headers.push_back({m.size() > 1 ? m.str(1) : std::string(line), offset, body_start});
        }
    });

    std::vector<DumpSection> sections;
    bool has_preamble = false;

    if (headers.empty() || headers.front().line_start > 0) {
        std::size_t end = headers.empty() ? input.size() : headers.front().line_start;
        sections.push_back({kPreambleSection, std::string(input.substr(0, end))});
        has_preamble = true;
    }

    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < headers.size(); ++i) {
        if (!seen.insert(headers[i].name).second) {
            throw DuplicateSection("duplicate section: " + headers[i].name);
        }
        std::size_t end = (i + 1 < headers.size()) ? headers[i + 1].line_start : input.size();
        std::size_t start = std::min(headers[i].body_start, end);
        sections.push_back({headers[i].name, std::string(input.substr(start, end - start))});
    }

    return Crashdump(std::move(source_id), std::move(sections), has_preamble);
}

namespace {

// " 3: resolvePage(PageId) at src/store/page_cache.cpp:142"
const std::regex kFrameRe(R"(^\s*(\d+)\s*:\s*(.*)$)");
const std::regex kSourceTokenRe(
    R"(([A-Za-z0-9_\-./+]+\.(?:c|cc|cpp|h|hpp|hxx|cxx)):(\d+))");
const std::regex kThreadMarkerRe(R"(^\[\s*thread\b(.*)\]$)", std::regex::icase);

bool is_block_marker(std::string_view trimmed) {
    return trimmed.size() >= 2 && trimmed.front() == '[' && trimmed.back() == ']';
}

}  // namespace

CrashStack parse_crash_stack(std::string_view body) {
    CrashStack stack;
    stack.raw_text.assign(body);

    CrashOrigin current = CrashOrigin::Backtrace;
    std::optional<std::string> thread_label;

    for_each_line(body, [&](std::string_view line, std::size_t) {
        std::string_view t = trim(line);
        if (t.empty()) return;

        if (is_block_marker(t)) {
            std::string lowered = to_lower(t);
            if (lowered.find("pending exception") != std::string::npos) {
                current = CrashOrigin::PendingException;
            } else {
                current = CrashOrigin::Backtrace;
                std::cmatch tm;
                if (std::regex_match(t.data(), t.data() + t.size(), tm, kThreadMarkerRe)) {
                    thread_label = std::string(trim(std::string_view(t.data() + 1, t.size() - 2)));
                }
            }
            return;
        }

        std::cmatch fm;
        if (!std::regex_match(line.data(), line.data() + line.size(), fm, kFrameRe)) {
            ++stack.skipped_lines;
            return;
        }
        const std::string rest = fm.str(2);
        std::smatch sm;
        if (!std::regex_search(rest, sm, kSourceTokenRe)) {
            ++stack.skipped_lines;
            return;
        }
        StackLocation loc;
        loc.file_path = sm.str(1);
        loc.line = std::stoi(sm.str(2));
        loc.frame_index = std::stoi(fm.str(1));
        loc.origin = current;
        loc.thread_label = thread_label;
        (current == CrashOrigin::PendingException ? stack.pending : stack.backtrace)
            .push_back(std::move(loc));
    });

    return stack;
}

namespace {

const std::regex kKeyValueRe(R"(^\s*([A-Za-z_][A-Za-z0-9_ .\-]*?)\s*:\s*(.*?)\s*$)");
const std::regex kSignalValueRe(R"((SIG[A-Z0-9]+))");
const std::regex kIntRe(R"((\d+))");
const std::regex kBannerRe(R"(^\s*-+>.*<-+\s*$|^\s*[-=*]{3,}\s*$)");

std::string normalize_key(std::string_view key) {
    std::string k = to_lower(trim(key));
    std::replace(k.begin(), k.end(), ' ', '_');
    return k;
}

std::optional<std::uint64_t> parse_address(std::string_view value) {
    std::string v(trim(value));
    std::uint64_t addr = 0;
    const char* first = v.data();
    const char* last = v.data() + v.size();
    int base = 10;
    if (v.size() > 2 && v[0] == '0' && (v[1] == 'x' || v[1] == 'X')) {
        first += 2;
        base = 16;
    }
    auto [ptr, ec] = std::from_chars(first, last, addr, base);
    if (ec != std::errc() || ptr != last) return std::nullopt;
    return addr;
}

}  // namespace

CrashExtInfo parse_crash_extinfo(std::string_view body) {
    CrashExtInfo info;
    info.raw_text.assign(body);

    for_each_line(body, [&](std::string_view line, std::size_t) {
        std::string_view t = trim(line);
        if (t.empty()) return;
        if (std::regex_match(t.begin(), t.end(), kBannerRe)) return;

        std::cmatch kv;
        if (!std::regex_match(line.data(), line.data() + line.size(), kv, kKeyValueRe)) return;
        const std::string key = normalize_key(kv.str(1));
        const std::string value = kv.str(2);

        if (key == "signal" || key == "signal_name" || key == "sig") {
            std::smatch sig;
            if (std::regex_search(value, sig, kSignalValueRe)) {
                info.signal_name = sig.str(1);
                std::smatch num;
                std::string tail = sig.suffix().str();
                if (std::regex_search(tail, num, kIntRe)) {
                    info.signal_number = std::stoi(num.str(1));
                }
            } else if (std::smatch num; std::regex_search(value, num, kIntRe)) {
                info.signal_number = std::stoi(num.str(1));
            }
        } else if (key == "signal_number" || key == "si_signo") {
            if (std::smatch num; std::regex_search(value, num, kIntRe)) {
                info.signal_number = std::stoi(num.str(1));
            }
        } else if (key == "code" || key == "signal_code" || key == "si_code") {
            if (std::smatch num; std::regex_search(value, num, kIntRe)) {
                info.signal_code = std::stoi(num.str(1));
            }
        } else if (key == "address" || key == "faulting_address" || key == "fault_address" ||
                   key == "si_addr") {
            info.faulting_address = parse_address(value);
        } else {
            info.host_metadata.emplace_back(std::string(trim(kv.str(1))), value);
        }
    });

    if (info.signal_name.empty()) {
        throw MissingSignal("no signal name found in CRASH_EXTINFO body");
    }
    return info;
}

std::string sanitize_crash_stack(const CrashStack& stack) {
    std::string out;
    auto emit = [&out](const char* heading, const std::vector<StackLocation>& locs) {
        if (locs.empty()) return;
        if (!out.empty()) out += '\n';
        out += heading;
        for (const auto& loc : locs) {
            out += '\n';
            out += loc.file_path;
            out += ':';
            out += std::to_string(loc.line);
        }
    };
    emit("pending_exceptions:", stack.pending);
    emit("backtrace:", stack.backtrace);
    return out;
}

std::string sanitize_crash_extinfo(const CrashExtInfo& info) {
    std::ostringstream out;
    out << "signal_name: " << info.signal_name;
    if (info.signal_number) out << "\nsignal_number: " << *info.signal_number;
    if (info.signal_code) out << "\nsignal_code: " << *info.signal_code;
    if (info.faulting_address) {
        out << "\nfaulting_address: 0x" << std::hex << *info.faulting_address << std::dec;
    }
    for (const auto& [key, value] : info.host_metadata) {
        out << '\n' << key << ": " << value;
    }
    return out.str();
}

CrashType classify_crash_type(const CrashExtInfo& info) {
    if (info.signal_name == "SIGSEGV") {
        if (info.faulting_address && *info.faulting_address < kNpeAddressThreshold) {
            return CrashType::SigSegvNpe;
        }
        return CrashType::SigSegvNonNpe;
    }
    if (info.signal_name == "SIGABRT") return CrashType::SigAbrt;
    if (info.signal_name == "SIGBUS") return CrashType::SigBus;
    if (info.signal_name == "SIGFPE") return CrashType::SigFpe;
    return CrashType::Other;
}

std::string_view to_string(CrashType type) {
    switch (type) {
        case CrashType::SigAbrt: return "SIGABRT";
        case CrashType::SigSegvNpe: return "SIGSEGV_NPE";
        case CrashType::SigSegvNonNpe: return "SIGSEGV_NON_NPE";
        case CrashType::SigBus: return "SIGBUS";
        case CrashType::SigFpe: return "SIGFPE";
        case CrashType::Other: return "OTHER";
    }
    return "OTHER";
}

std::optional<CrashType> crash_type_from_string(std::string_view name) {
    for (CrashType t : {CrashType::SigAbrt, CrashType::SigSegvNpe, CrashType::SigSegvNonNpe,
                        CrashType::SigBus, CrashType::SigFpe, CrashType::Other}) {
        if (to_string(t) == name) return t;
    }
    return std::nullopt;
}

}  // namespace crashfl
