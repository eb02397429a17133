// SPDX-License-Identifier: Apache-2.0
#include "crashfl/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace crashfl {

std::string_view to_string(Difficulty difficulty) {
    switch (difficulty) {
        case Difficulty::StackTop: return "stack_top";
        case Difficulty::PendingOnly: return "pending_only";
        case Difficulty::DeepSearch: return "deep_search";
    }
    return "stack_top";
}

std::vector<MixEntry> default_crash_mix() {
    return {{CrashType::SigAbrt, 0.637},
            {CrashType::SigSegvNpe, 0.260},
            {CrashType::SigSegvNonNpe, 0.095},
            {CrashType::SigBus, 0.006},
            {CrashType::SigFpe, 0.002}};
}

std::vector<std::pair<CrashType, int>> mix_counts(const std::vector<MixEntry>& mix, int n) {
    double sum = 0.0;
    for (const auto& m : mix) sum += m.ratio;
    if (std::abs(sum - 1.0) > 1e-9) {
        throw CorpusError("crash mix ratios sum to " + std::to_string(sum) + ", expected 1");
    }

    std::vector<std::pair<CrashType, int>> counts;
    std::vector<std::pair<double, std::size_t>> remainders;
    int assigned = 0;
    for (std::size_t i = 0; i < mix.size(); ++i) {
        const double exact = mix[i].ratio * n;
        const int whole = static_cast<int>(exact);
        counts.emplace_back(mix[i].type, whole);
        remainders.emplace_back(exact - whole, i);
        assigned += whole;
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (int i = 0; i < n - assigned; ++i) {
        ++counts[remainders[static_cast<std::size_t>(i) % remainders.size()].second].second;
    }
    return counts;
}

namespace {

// Thin deterministic randomness layer. Distribution helpers are hand-rolled
// because the standard distributions are not bit-stable across library
// implementations.
struct Rng {
    std::mt19937_64 eng;

    explicit Rng(std::uint64_t seed) : eng(seed) {}

    std::uint64_t next() { return eng(); }
    int range(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(next() % static_cast<std::uint64_t>(hi - lo + 1));
    }
    bool chance(int percent) { return range(0, 99) < percent; }

    template <typename T>
    const T& pick(const std::vector<T>& from) {
        return from[static_cast<std::size_t>(range(0, static_cast<int>(from.size()) - 1))];
    }
};

const std::vector<std::string> kComponents = {
    "store", "txn", "net", "exec", "index", "buffer", "catalog", "repl"};
const std::vector<std::string> kNouns = {
    "page",  "cache",   "cursor", "segment", "ledger",  "socket", "channel", "plan",
    "merge", "snapshot", "lock",  "queue",   "journal", "bucket", "column",  "row"};
const std::vector<std::string> kVerbs = {
    "resolve", "acquire", "flush", "evict", "advance", "rebalance", "commit",
    "dispatch", "scan",   "probe", "attach", "release", "validate", "compact"};
const std::vector<std::string> kHosts = {"vm-hana-03", "vm-hana-07", "vm-hana-12", "ld-9471",
                                         "ld-2206"};

std::string capitalize(std::string word) {
    if (!word.empty()) word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
    return word;
}

std::string hex_string(Rng& rng, int digits) {
    static const char* kHex = "0123456789abcdef";
    std::string out;
    for (int i = 0; i < digits; ++i) out += kHex[rng.range(0, 15)];
    return out;
}

struct NamePool {
    std::set<std::string> used;

    std::string unique(std::string candidate) {
        if (used.insert(candidate).second) return candidate;
        for (int i = 2;; ++i) {
            std::string alt = candidate + std::to_string(i);
            if (used.insert(alt).second) return alt;
        }
    }

    std::string file_stem(Rng& rng) {
        return unique(rng.pick(kNouns) + "_" + rng.pick(kNouns));
    }
    std::string function(Rng& rng) {
        return unique(rng.pick(kVerbs) + capitalize(rng.pick(kNouns)));
    }
    std::string type(Rng& rng) {
        return unique(capitalize(rng.pick(kNouns)) + capitalize(rng.pick(kNouns)));
    }
};

struct SrcFile {
    std::string rel_path;
    std::vector<std::string> lines;
    std::vector<std::pair<int, std::string>> stmts;  // (1-based line, enclosing function)
};

void append_function(SrcFile& f, Rng& rng, NamePool& names) {
    const std::string fn = names.function(rng);
    auto push = [&](std::string s) { f.lines.push_back(std::move(s)); };
    push("int " + fn + "(int value) {");
    push("    int acc = value + " + std::to_string(rng.range(1, 97)) + ";");
    f.stmts.emplace_back(static_cast<int>(f.lines.size()), fn);
    const int body = rng.range(1, 4);
    for (int i = 0; i < body; ++i) {
        push("    acc += (acc >> " + std::to_string(rng.range(1, 5)) + ") + " +
             std::to_string(rng.range(1, 31)) + ";");
        f.stmts.emplace_back(static_cast<int>(f.lines.size()), fn);
    }
    push("    return acc;");
    f.stmts.emplace_back(static_cast<int>(f.lines.size()), fn);
    push("}");
    push("");
}

SrcFile make_cpp_file(Rng& rng, NamePool& names, const std::string& comp,
                      const std::string& stem) {
    SrcFile f;
    f.rel_path = "src/" + comp + "/" + stem + ".cpp";
    f.lines = {"#include <cstdint>", "", "namespace " + comp + " {", ""};
    const int n_funcs = rng.range(2, 5);
    for (int i = 0; i < n_funcs; ++i) append_function(f, rng, names);
    f.lines.push_back("}  // namespace " + comp);
    return f;
}

SrcFile make_header_file(Rng& rng, NamePool& names, const std::string& comp,
                         const std::string& stem) {
    SrcFile f;
    f.rel_path = "include/" + comp + "/" + stem + ".h";
    const std::string type = names.type(rng);
    f.lines = {"#pragma once",
               "",
               "namespace " + comp + " {",
               "",
               "struct " + type + " {",
               "    int capacity = " + std::to_string(rng.range(8, 4096)) + ";",
               "    int flags = " + std::to_string(rng.range(0, 15)) + ";",
               "};",
               "",
               "inline int " + names.function(rng) + "(int value) { return value + " +
                   std::to_string(rng.range(1, 9)) + "; }",
               "",
               "}  // namespace " + comp};
    return f;
}

struct Mechanism {
    std::vector<std::string> fn_lines;  // {fn} substituted later
    int defect_offset;                  // index into fn_lines of the faulty statement
    std::string explanation;            // {buggy}, {fn}
    std::string postmortem;
};

const std::vector<Mechanism>& mechanisms() {
    static const std::vector<Mechanism> list = {
        {{"int {fn}(int key) {",
          "    Entry* entry = lookupEntry(key);",
          "    return entry->weight;",
          "}"},
         2,
         "The root cause is in {buggy}: {fn} dereferences the entry returned by lookupEntry "
         "without a null check, so a concurrently evicted key crashes the caller.",
         "The crash was caused by a null entry dereference in {buggy}. {fn} trusted lookupEntry "
         "to succeed; when the entry had been evicted the returned pointer was null and the "
         "field access faulted."},
        {{"int {fn}(int cursor) {",
          "    return slots_[cursor];",
          "}"},
         1,
         "The defect lives in {buggy}: {fn} indexes slots_ with an unvalidated cursor, and a "
         "cursor one past the end corrupts the read that crashes here.",
         "The crash was caused by an out-of-bounds slot access in {buggy}. {fn} accepted a "
         "cursor beyond the slot array, so the read touched unmapped memory."},
        {{"void {fn}(int slot) {",
          "    releaseSlot(slot);",
          "    releaseSlot(slot);",
          "}"},
         2,
         "The fault is in {buggy}: {fn} releases the same slot twice, and the second release "
         "frees memory a reader still references.",
         "The crash was caused by a double release in {buggy}. {fn} released a slot twice; the "
         "second release invalidated state still in use, aborting the process."},
        {{"int {fn}(int depth) {",
          "    pending_ = pending_ - depth;",
          "    return queue_[pending_];",
          "}"},
         2,
         "The bug is in {buggy}: {fn} updates pending_ without holding the queue lock, so a "
         "racing consumer sees a negative index and the access crashes.",
         "The crash was caused by a race on the job queue in {buggy}. {fn} adjusted pending_ "
         "unsynchronized while workers drained the queue, which produced an invalid index."},
        {{"int {fn}(int pages) {",
          "    int offset = pages * 4096 * scale_;",
          "    return base_[offset];",
          "}"},
         2,
         "The root cause is in {buggy}: the offset arithmetic in {fn} overflows for large page "
         "counts, so the computed address lands outside the mapping.",
         "The crash was caused by an integer overflow in the offset computation in {buggy}. "
         "For large inputs {fn} wrapped the offset and dereferenced an unmapped address."}};
    return list;
}

std::string substitute(std::string text, const std::string& key, const std::string& value) {
    const std::string needle = "{" + key + "}";
    std::size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
        text.replace(pos, needle.size(), value);
        pos += value.size();
    }
    return text;
}

// Insert mechanism function into an otherwise ordinary file, right after the
// namespace opener. Returns (defect line, defect function name).
std::pair<int, std::string> plant_defect(SrcFile& f, Rng& rng, NamePool& names,
                                         const Mechanism& mech) {
    const std::string fn = names.function(rng);
    std::vector<std::string> block;
    for (const auto& line : mech.fn_lines) block.push_back(substitute(line, "fn", fn));
    block.push_back("");

    const auto anchor = static_cast<std::size_t>(4);  // after "namespace X {" + blank
    f.lines.insert(f.lines.begin() + static_cast<long>(anchor), block.begin(), block.end());
    for (auto& [line, _] : f.stmts) {
        if (line > static_cast<int>(anchor)) line += static_cast<int>(block.size());
    }
    const int defect_line = static_cast<int>(anchor) + mech.defect_offset + 1;
    return {defect_line, fn};
}

// Plant "struct <Symbol> { ... };" into the buggy file; returns the line of
// the struct opener.
int plant_symbol_definition(SrcFile& f, const std::string& symbol) {
    const std::vector<std::string> block = {
        "struct " + symbol + " {",
        "    explicit " + symbol + "(int slot) : slot_(slot) {}",
        "    int slot_ = 0;",
        "};",
        ""};
    const auto anchor = static_cast<std::size_t>(4);
    f.lines.insert(f.lines.begin() + static_cast<long>(anchor), block.begin(), block.end());
    for (auto& [line, _] : f.stmts) {
        if (line > static_cast<int>(anchor)) line += static_cast<int>(block.size());
    }
    return static_cast<int>(anchor) + 1;
}

// Plant a use of the symbol in a carrier file; returns (use line, fn name).
std::pair<int, std::string> plant_symbol_use(SrcFile& f, Rng& rng, NamePool& names,
                                             const std::string& symbol) {
    const std::string fn = names.function(rng);
    const std::vector<std::string> block = {
        "int " + fn + "(int value) {",
        "    int acc = value + " + std::to_string(rng.range(1, 9)) + ";",
        "    " + symbol + " guard(acc);",
        "    acc += guard.slot_;",
        "    return acc;",
        "}",
        ""};
    const auto anchor = static_cast<std::size_t>(4);
    f.lines.insert(f.lines.begin() + static_cast<long>(anchor), block.begin(), block.end());
    for (auto& [line, _] : f.stmts) {
        if (line > static_cast<int>(anchor)) line += static_cast<int>(block.size());
    }
    const int use_line = static_cast<int>(anchor) + 3;
    f.stmts.emplace_back(use_line, fn);
    return {use_line, fn};
}

void write_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CorpusError("cannot write " + path.string());
    out << content;
    if (!out) throw CorpusError("write failed for " + path.string());
}

std::string join_lines(const std::vector<std::string>& lines) {
    std::string out;
    for (const auto& line : lines) {
        out += line;
        out += '\n';
    }
    return out;
}

struct Frame {
    std::string file;
    int line;
    std::string fn;
    std::string comp;
};

std::string frame_text(int index, const Frame& frame) {
    return " " + std::to_string(index) + ": " + frame.comp + "::" + frame.fn + "(int) at " +
           frame.file + ":" + std::to_string(frame.line);
}

const std::vector<std::string>& generic_section_names() {
    static const std::vector<std::string> names = {
        "SYSTEMINFO",     "THREADS",        "MOUNTINFO",      "ENVIRONMENT",  "CMDLINE",
        "LIMITS",         "MEMMAP",         "MEMINFO",        "CPUINFO",      "VMSTAT",
        "DISKSTATS",      "NETSTAT",        "OPEN_FILES",     "LOADED_MODULES",
        "SIGNAL_HANDLERS", "SCHEDULER",     "PROCESS_TREE",   "UPTIME",       "OSRELEASE",
        "NUMA_TOPOLOGY",  "HUGEPAGES",      "SWAPINFO",       "IOSTATS",      "INTERRUPTS",
        "FILESYSTEMS",    "QUOTAS",         "SERVICES",       "PACKAGES",     "KERNEL_PARAMS",
        "CLOCK",          "LOCALE",         "USERS",          "GROUPS",       "SECURITY",
        "WATCHDOG",       "HEAP_SUMMARY",   "ALLOCATOR_STATS", "THREAD_REGISTRY",
        "LOCK_REGISTRY",  "TRANSACTION_LOG", "SESSION_REGISTRY", "JOB_QUEUE", "STATISTICS",
        "TRACE_CONFIG",   "PLUGIN_REGISTRY", "LICENSE",       "FEATURE_FLAGS",
        "SHUTDOWN_HOOKS"};
    return names;
}

std::string generic_section_body(Rng& rng) {
    std::vector<std::string> lines;
    const int n = rng.range(2, 6);
    for (int i = 0; i < n; ++i) {
        lines.push_back(rng.pick(kNouns) + "_" + rng.pick(kNouns) + ": " +
                        std::to_string(rng.next() % 100000));
    }
    return join_lines(lines);
}

int signal_number_of(CrashType type) {
    switch (type) {
        case CrashType::SigAbrt: return 6;
        case CrashType::SigSegvNpe:
        case CrashType::SigSegvNonNpe: return 11;
        case CrashType::SigBus: return 7;
        case CrashType::SigFpe: return 8;
        case CrashType::Other: return 0;
    }
    return 0;
}

std::string signal_name_of(CrashType type) {
    switch (type) {
        case CrashType::SigAbrt: return "SIGABRT";
        case CrashType::SigSegvNpe:
        case CrashType::SigSegvNonNpe: return "SIGSEGV";
        case CrashType::SigBus: return "SIGBUS";
        case CrashType::SigFpe: return "SIGFPE";
        case CrashType::Other: return "SIGTERM";
    }
    return "SIGTERM";
}

}  // namespace

CorpusManifest generate_corpus(std::uint64_t seed, int n_crashes,
                               const std::vector<MixEntry>& mix, const fs::path& out_dir) {
    if (n_crashes < 1) throw CorpusError("n_crashes must be >= 1");

    // Interleave the per-type quota deterministically.
    const auto counts = mix_counts(mix, n_crashes);
    std::vector<CrashType> types;
    for (const auto& [type, count] : counts) {
        for (int i = 0; i < count; ++i) types.push_back(type);
    }
    Rng master(seed);
    for (std::size_t i = types.size(); i > 1; --i) {
        std::swap(types[i - 1], types[master.next() % i]);
    }

    CorpusManifest manifest;
    manifest.seed = seed;

    int abrt_seq = 0;
    int nonnpe_seq = 0;

    for (int idx = 0; idx < n_crashes; ++idx) {
        Rng rng(seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(idx) + 1);
        NamePool names;

        const CrashType type = types[static_cast<std::size_t>(idx)];
        Difficulty difficulty = Difficulty::StackTop;
        switch (type) {
            case CrashType::SigAbrt: {
                const int slot = abrt_seq++ % 5;
                difficulty = slot <= 2   ? Difficulty::PendingOnly
                             : slot == 3 ? Difficulty::DeepSearch
                                         : Difficulty::StackTop;
                break;
            }
            case CrashType::SigSegvNpe:
                difficulty = Difficulty::StackTop;
                break;
            case CrashType::SigSegvNonNpe:
                difficulty = nonnpe_seq++ % 2 == 0 ? Difficulty::StackTop : Difficulty::DeepSearch;
                break;
            default:
                difficulty = Difficulty::StackTop;
                break;
        }

        char id_buf[32];
        std::snprintf(id_buf, sizeof(id_buf), "crash_%03d", idx);
        const std::string crash_id = id_buf;
        const fs::path crash_dir = out_dir / crash_id;

        // --- repository ---
        const int n_cpp = rng.range(6, 34);
        const int n_hdr = rng.range(2, 10);

        std::vector<std::string> comps;
        const int n_comps = rng.range(2, 4);
        for (int i = 0; i < n_comps; ++i) comps.push_back(names.unique(rng.pick(kComponents)));

        std::vector<SrcFile> files;
        for (int i = 0; i < n_cpp; ++i) {
            const std::string& comp = comps[static_cast<std::size_t>(rng.range(0, n_comps - 1))];
            files.push_back(make_cpp_file(rng, names, comp, names.file_stem(rng)));
        }

        const int buggy_idx = rng.range(0, n_cpp - 1);
        int carrier_idx = 0;
        if (n_cpp > 1) {
            do {
                carrier_idx = rng.range(0, n_cpp - 1);
            } while (carrier_idx == buggy_idx);
        }

        const Mechanism& mech = rng.pick(mechanisms());
        auto [defect_line, defect_fn] = plant_defect(files[static_cast<std::size_t>(buggy_idx)],
                                                     rng, names, mech);

        std::string symbol;
        int symbol_def_line = 0;
        int symbol_use_line = 0;
        std::string carrier_fn;
        if (difficulty == Difficulty::DeepSearch) {
            symbol = names.type(rng) + "Guard";
            symbol_def_line = plant_symbol_definition(files[static_cast<std::size_t>(buggy_idx)],
                                                      symbol);
            defect_line += 5;  // definition block sits above the defect function
            std::tie(symbol_use_line, carrier_fn) =
                plant_symbol_use(files[static_cast<std::size_t>(carrier_idx)], rng, names, symbol);
        }

        for (int i = 0; i < n_hdr; ++i) {
            const std::string& comp = comps[static_cast<std::size_t>(rng.range(0, n_comps - 1))];
            files.push_back(make_header_file(rng, names, comp, names.file_stem(rng)));
        }

        for (const auto& f : files) {
            write_file(crash_dir / "repo" / f.rel_path, join_lines(f.lines));
        }

        const SrcFile& buggy = files[static_cast<std::size_t>(buggy_idx)];
        const SrcFile& carrier = files[static_cast<std::size_t>(carrier_idx)];

        auto comp_of = [](const SrcFile& f) {
            // src/<comp>/<stem>.cpp
            const auto first = f.rel_path.find('/');
            const auto second = f.rel_path.find('/', first + 1);
            return f.rel_path.substr(first + 1, second - first - 1);
        };

        auto random_frame = [&](int exclude_a, int exclude_b) {
            int pick;
            do {
                pick = rng.range(0, n_cpp - 1);
            } while (pick == exclude_a || pick == exclude_b);
            const SrcFile& f = files[static_cast<std::size_t>(pick)];
            const auto& [line, fn] = f.stmts[static_cast<std::size_t>(
                rng.range(0, static_cast<int>(f.stmts.size()) - 1))];
            return Frame{f.rel_path, line, fn, comp_of(f)};
        };

        // --- crash stack ---
        std::vector<Frame> pending_frames;
        std::vector<Frame> backtrace_frames;

        const Frame buggy_frame{buggy.rel_path, defect_line, defect_fn, comp_of(buggy)};
        switch (difficulty) {
            case Difficulty::StackTop: {
                backtrace_frames.push_back(buggy_frame);
                const int depth = rng.range(3, 7);
                for (int i = 0; i < depth; ++i)
                    backtrace_frames.push_back(random_frame(buggy_idx, -1));
                break;
            }
            case Difficulty::PendingOnly: {
                pending_frames.push_back(buggy_frame);
                const int pdepth = rng.range(1, 3);
                for (int i = 0; i < pdepth; ++i)
                    pending_frames.push_back(random_frame(buggy_idx, -1));
                const int depth = rng.range(3, 7);
                for (int i = 0; i < depth; ++i)
                    backtrace_frames.push_back(random_frame(buggy_idx, -1));
                break;
            }
            case Difficulty::DeepSearch: {
                backtrace_frames.push_back(
                    Frame{carrier.rel_path, symbol_use_line, carrier_fn, comp_of(carrier)});
                const int depth = rng.range(3, 6);
                for (int i = 0; i < depth; ++i)
                    backtrace_frames.push_back(random_frame(buggy_idx, carrier_idx));
                if (rng.chance(50)) {
                    const int pdepth = rng.range(1, 2);
                    for (int i = 0; i < pdepth; ++i)
                        pending_frames.push_back(random_frame(buggy_idx, carrier_idx));
                }
                break;
            }
        }

        std::vector<std::string> stack_lines;
        if (!pending_frames.empty()) {
            stack_lines.push_back("[pending exceptions]");
            stack_lines.push_back(" exception 1: " + names.type(rng) + "Exception pending");
            for (std::size_t i = 0; i < pending_frames.size(); ++i) {
                stack_lines.push_back(frame_text(static_cast<int>(i), pending_frames[i]));
            }
            stack_lines.push_back("[call stack]");
        }
        stack_lines.push_back("[thread " + std::to_string(rng.range(1, 64)) + ": crashed]");
        for (std::size_t i = 0; i < backtrace_frames.size(); ++i) {
            stack_lines.push_back(frame_text(static_cast<int>(i), backtrace_frames[i]));
        }
        stack_lines.push_back(" " + std::to_string(backtrace_frames.size()) +
                              ": __libc_start_main + 0x" + hex_string(rng, 2));
        if (rng.chance(40)) {
            stack_lines.push_back("[thread " + std::to_string(rng.range(65, 128)) + ": waiting]");
            const Frame extra = random_frame(buggy_idx, carrier_idx);
            stack_lines.push_back(frame_text(0, extra));
            stack_lines.push_back(" 1: epoll_wait + 0x" + hex_string(rng, 2));
        }
        const std::string crash_stack_body = join_lines(stack_lines);

        // --- extinfo ---
        std::uint64_t address = 0;
        bool has_address = false;
        if (type == CrashType::SigSegvNpe) {
            static const std::vector<std::uint64_t> npe_addresses = {0x0, 0x3d, 0x8, 0x40};
            address = rng.chance(50) ? rng.pick(npe_addresses)
                                     : rng.next() % kNpeAddressThreshold;
            has_address = true;
        } else if (type == CrashType::SigSegvNonNpe) {
            address = 0x10000 + (rng.next() % 0x7fffff0000ULL);
            has_address = true;
        }

        std::vector<std::string> ext_lines;
        ext_lines.push_back("--> Dump of siginfo contents <--");
        {
            std::ostringstream sig;
            sig << "signal: " << signal_name_of(type) << " (" << signal_number_of(type) << ")";
            ext_lines.push_back(sig.str());
        }
        ext_lines.push_back("code: " + std::to_string(rng.range(1, 2)));
        if (has_address) {
            std::ostringstream addr;
            addr << "address: 0x" << std::hex << address;
            ext_lines.push_back(addr.str());
        }
        ext_lines.push_back("sender_pid: 0");
        ext_lines.push_back("--> End of siginfo <--");
        ext_lines.push_back("host: " + rng.pick(kHosts));
        ext_lines.push_back("os: Linux");
        ext_lines.push_back("kernel: 5." + std::to_string(rng.range(4, 15)) + ".0-" +
                            std::to_string(rng.range(100, 400)) + ".el9.x86_64");
        ext_lines.push_back("cpu: x86_64");
        ext_lines.push_back("cores: " + std::to_string(1 << rng.range(4, 7)));
        const std::string crash_extinfo_body = join_lines(ext_lines);

        // --- assemble the dump: 52 sections, fixed order ---
        const std::string revision = hex_string(rng, 40);
        std::string dump_text;
        auto add_section = [&dump_text](const std::string& name, const std::string& body) {
            dump_text += "[" + name + "]\n" + body;
        };
        add_section("BUILD", "git: " + revision + "\nbranch: rel/" +
                                 std::to_string(rng.range(20, 28)) + "." +
                                 std::to_string(rng.range(0, 9)) + "\nbuilt: 2024-" +
                                 (rng.chance(50) ? "02" : "07") + "-" +
                                 std::to_string(rng.range(10, 28)) + "\n");
        add_section("CRASH_SHORTINFO", signal_name_of(type) + " in " +
                                           backtrace_frames.front().comp +
                                           "::" + backtrace_frames.front().fn + "\n");
        add_section("CRASH_EXTINFO", crash_extinfo_body);
        add_section("CRASH_STACK", crash_stack_body);
        for (const auto& name : generic_section_names()) {
            add_section(name, generic_section_body(rng));
        }

        write_file(crash_dir / "dump.txt", dump_text);

        // --- scripted trajectory ---
        const bool hit = rng.chance(75);
        int buggy_rank = 1;
        if (!hit) buggy_rank = rng.chance(60) ? 2 : 3;
        int answer_size = hit ? rng.range(1, 3) : buggy_rank;

        std::vector<std::string> distractors;
        for (int i = 0; i < answer_size - 1; ++i) {
            distractors.push_back(random_frame(buggy_idx, carrier_idx).file);
        }
        std::sort(distractors.begin(), distractors.end());
        distractors.erase(std::unique(distractors.begin(), distractors.end()), distractors.end());
        answer_size = static_cast<int>(distractors.size()) + 1;
        if (!hit) buggy_rank = answer_size;  // distractor dedup may shrink the set

        std::vector<std::string> answer;
        if (hit) {
            answer.push_back(buggy.rel_path);
            answer.insert(answer.end(), distractors.begin(), distractors.end());
        } else {
            answer = distractors;
            answer.push_back(buggy.rel_path);
        }

        const std::string explanation =
            substitute(substitute(mech.explanation, "buggy", buggy.rel_path), "fn", defect_fn);
        const std::string postmortem =
            substitute(substitute(mech.postmortem, "buggy", buggy.rel_path), "fn", defect_fn) +
            "\n";

        std::vector<std::string> script_lines;
        auto tool_line = [](const std::string& name, const json& args) {
            return json{{"tool", name}, {"args", args}}.dump();
        };
        script_lines.push_back(tool_line("get_crash_extinfo", json::object()));
        script_lines.push_back(tool_line("get_crash_stack", json::object()));
        switch (difficulty) {
            case Difficulty::StackTop:
                script_lines.push_back(tool_line(
                    "get_nearby_code", {{"path", buggy.rel_path}, {"line", defect_line}}));
                break;
            case Difficulty::PendingOnly:
                script_lines.push_back(tool_line(
                    "get_nearby_code", {{"path", buggy.rel_path}, {"line", defect_line}}));
                break;
            case Difficulty::DeepSearch:
                script_lines.push_back(tool_line(
                    "get_nearby_code", {{"path", carrier.rel_path}, {"line", symbol_use_line}}));
                script_lines.push_back(tool_line("get_term_definition",
                                                 {{"path", carrier.rel_path},
                                                  {"line", symbol_use_line},
                                                  {"term", symbol}}));
                script_lines.push_back(tool_line(
                    "get_nearby_code", {{"path", buggy.rel_path}, {"line", symbol_def_line}}));
                break;
        }
        script_lines.push_back(json{{"final", explanation}}.dump());
        script_lines.push_back(json{{"files", answer}}.dump());

        write_file(crash_dir / "script.jsonl", join_lines(script_lines));
        write_file(crash_dir / "postmortem.txt", postmortem);

        CorpusEntry entry;
        entry.crash_id = crash_id;
        entry.dump_path = crash_id + "/dump.txt";
        entry.repo_path = crash_id + "/repo";
        entry.revision = revision;
        entry.buggy_files = {buggy.rel_path};
        entry.crash_type = std::string(to_string(type));
        entry.script_path = crash_id + "/script.jsonl";
        entry.postmortem_path = crash_id + "/postmortem.txt";
        entry.difficulty = std::string(to_string(difficulty));
        entry.buggy_rank = buggy_rank;
        entry.answer_size = answer_size;
        entry.expect_b1_top1 = difficulty == Difficulty::StackTop;
        entry.expect_b2_top1 =
            difficulty == Difficulty::StackTop || difficulty == Difficulty::PendingOnly;
        manifest.entries.push_back(std::move(entry));
    }

    save_manifest(manifest, out_dir / "corpus.json");
    return manifest;
}

std::vector<std::string> validate_manifest(const CorpusManifest& manifest,
                                           const fs::path& base_dir) {
    std::vector<std::string> diagnostics;
    auto complain = [&diagnostics](const std::string& crash_id, const std::string& what) {
        diagnostics.push_back(crash_id + ": " + what);
    };

    for (const auto& entry : manifest.entries) {
        const fs::path dump_path = base_dir / entry.dump_path;
        const fs::path repo_path = base_dir / entry.repo_path;

        if (!fs::is_regular_file(dump_path)) {
            complain(entry.crash_id, "missing dump file " + entry.dump_path);
            continue;
        }
        if (!fs::is_directory(repo_path)) {
            complain(entry.crash_id, "missing repo directory " + entry.repo_path);
            continue;
        }
        for (const auto& buggy : entry.buggy_files) {
            if (!fs::is_regular_file(repo_path / buggy)) {
                complain(entry.crash_id, "buggy file not in repo: " + buggy);
            }
        }
        for (const std::string* optional_path : {&entry.script_path, &entry.postmortem_path}) {
            if (!optional_path->empty() && !fs::is_regular_file(base_dir / *optional_path)) {
                complain(entry.crash_id, "missing referenced file " + *optional_path);
            }
        }

        std::ifstream in(dump_path, std::ios::binary);
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        try {
            const Crashdump dump = parse_crashdump(text, entry.crash_id);
            const std::string build(dump.section("BUILD"));
            if (build.find(entry.revision) == std::string::npos) {
                complain(entry.crash_id, "BUILD section does not carry revision " + entry.revision);
            }
            const CrashExtInfo info = parse_crash_extinfo(dump.section("CRASH_EXTINFO"));
            if (to_string(classify_crash_type(info)) != entry.crash_type) {
                complain(entry.crash_id, "crash type mismatch: dump says " +
                                             std::string(to_string(classify_crash_type(info))) +
                                             ", manifest says " + entry.crash_type);
            }
        } catch (const DumpError& e) {
            complain(entry.crash_id, std::string("dump does not parse: ") + e.what());
        }
    }
    return diagnostics;
}

nlohmann::json manifest_to_json(const CorpusManifest& manifest) {
    json entries = json::array();
    for (const auto& e : manifest.entries) {
        entries.push_back({{"crash_id", e.crash_id},
                           {"dump", e.dump_path},
                           {"repo", e.repo_path},
                           {"revision", e.revision},
                           {"buggy_files", e.buggy_files},
                           {"crash_type", e.crash_type},
                           {"script", e.script_path},
                           {"postmortem", e.postmortem_path},
                           {"difficulty", e.difficulty},
                           {"buggy_rank", e.buggy_rank},
                           {"answer_size", e.answer_size},
                           {"expect_b1_top1", e.expect_b1_top1},
                           {"expect_b2_top1", e.expect_b2_top1}});
    }
    return json{{"seed", manifest.seed}, {"entries", entries}};
}

CorpusManifest manifest_from_json(const json& doc) {
    CorpusManifest manifest;
    manifest.seed = doc.at("seed").get<std::uint64_t>();
    for (const auto& e : doc.at("entries")) {
        CorpusEntry entry;
        entry.crash_id = e.at("crash_id").get<std::string>();
        entry.dump_path = e.at("dump").get<std::string>();
        entry.repo_path = e.at("repo").get<std::string>();
        entry.revision = e.at("revision").get<std::string>();
        entry.buggy_files = e.at("buggy_files").get<std::vector<std::string>>();
        entry.crash_type = e.at("crash_type").get<std::string>();
        entry.script_path = e.value("script", "");
        entry.postmortem_path = e.value("postmortem", "");
        entry.difficulty = e.value("difficulty", "");
        entry.buggy_rank = e.value("buggy_rank", 1);
        entry.answer_size = e.value("answer_size", 1);
        entry.expect_b1_top1 = e.value("expect_b1_top1", false);
        entry.expect_b2_top1 = e.value("expect_b2_top1", false);
        manifest.entries.push_back(std::move(entry));
    }
    return manifest;
}

CorpusManifest load_manifest(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CorpusError("cannot open manifest: " + path.string());
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw CorpusError("manifest is not valid JSON: " + path.string());
    return manifest_from_json(doc);
}

void save_manifest(const CorpusManifest& manifest, const fs::path& path) {
    write_file(path, manifest_to_json(manifest).dump(2) + "\n");
}

}  // namespace crashfl
