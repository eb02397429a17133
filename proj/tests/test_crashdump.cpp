// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>

#include "crashfl/crashdump.hpp"

using namespace crashfl;

TEST_CASE("parse_crashdump splits at header lines") {
    const std::string input = "[BUILD]\ngit: abc\n[CRASH_STACK]\n 0: f() at a.cpp:3\n";
    const Crashdump dump = parse_crashdump(input);

    REQUIRE(dump.sections().size() == 2);
    CHECK(dump.sections()[0].name == "BUILD");
    CHECK(dump.sections()[1].name == "CRASH_STACK");
    CHECK(dump.section("BUILD") == "git: abc");
    CHECK(dump.section("CRASH_STACK") == " 0: f() at a.cpp:3");
}

TEST_CASE("parse_crashdump rejects empty input") {
    CHECK_THROWS_AS(parse_crashdump(""), MalformedDump);
}

TEST_CASE("input without headers becomes a single PREAMBLE section") {
    const Crashdump dump = parse_crashdump("just some text\nwith two lines\n");
    REQUIRE(dump.sections().size() == 1);
    CHECK(dump.sections()[0].name == kPreambleSection);
    CHECK(dump.section(kPreambleSection) == "just some text\nwith two lines");
}

TEST_CASE("preamble before the first header is preserved") {
    const std::string input = "banner line\n[BUILD]\ngit: abc\n";
    const Crashdump dump = parse_crashdump(input);
    REQUIRE(dump.sections().size() == 2);
    CHECK(dump.sections()[0].name == kPreambleSection);
    CHECK(dump.section("BUILD") == "git: abc");
    CHECK(dump.render() == input);
}

TEST_CASE("duplicate section names are a hard error") {
    CHECK_THROWS_AS(parse_crashdump("[A]\nx\n[A]\ny\n"), DuplicateSection);
}

TEST_CASE("get_section on an absent name throws SectionNotFound") {
    const Crashdump dump = parse_crashdump("[BUILD]\ngit: abc\n");
    CHECK_THROWS_AS(dump.section("MOUNTINFO"), SectionNotFound);
}

TEST_CASE("render reassembles the input byte for byte") {
    for (const std::string input : {
             std::string("[BUILD]\ngit: abc\n[CRASH_STACK]\n 0: f() at a.cpp:3\n"),
             std::string("preamble\n[A]\nbody\n\nmore\n[B_2]\nx\n"),
             std::string("[ONLY]\nno trailing newline"),
             std::string("[A]\n\n[B]\nafter empty body line\n"),
         }) {
        CAPTURE(input);
        CHECK(parse_crashdump(input).render() == input);
    }
}

TEST_CASE("round-trip over randomized section soup") {
    std::mt19937_64 rng(20240809);
    const std::vector<std::string> names = {"ALPHA", "BRAVO_2", "CHARLIE", "DELTA_X", "ECHO"};
    for (int trial = 0; trial < 200; ++trial) {
        std::string input;
        if (rng() % 4 == 0) input += "loose preamble text\n";
        std::vector<std::string> shuffled = names;
        for (std::size_t i = shuffled.size(); i > 1; --i) {
            std::swap(shuffled[i - 1], shuffled[rng() % i]);
        }
        const std::size_t n = 1 + rng() % shuffled.size();
        for (std::size_t s = 0; s < n; ++s) {
            input += "[" + shuffled[s] + "]\n";
            const int lines = static_cast<int>(rng() % 4);
            for (int l = 0; l < lines; ++l) {
                input += "key_" + std::to_string(rng() % 100) + ": value\n";
            }
        }
        const Crashdump dump = parse_crashdump(input);
        CHECK(dump.render() == input);
        CHECK(dump.sections().size() == n + (input.rfind("loose", 0) == 0 ? 1 : 0));
    }
}

TEST_CASE("parse_crash_stack reads frames with file:line tokens") {
    const CrashStack stack =
        parse_crash_stack(" 0: foo() at src/a.cpp:10\n 1: bar() at src/b.cpp:20");
    REQUIRE(stack.backtrace.size() == 2);
    CHECK(stack.backtrace[0].file_path == "src/a.cpp");
    CHECK(stack.backtrace[0].line == 10);
    CHECK(stack.backtrace[0].frame_index == 0);
    CHECK(stack.backtrace[1].file_path == "src/b.cpp");
    CHECK(stack.backtrace[1].frame_index == 1);
    CHECK(stack.pending.empty());
    CHECK(stack.skipped_lines == 0);
}

TEST_CASE("pending exception block feeds the pending list") {
    const CrashStack stack = parse_crash_stack(
        "[pending exceptions]\n 0: baz() at src/c.cpp:5\n[call stack]\n 0: foo() at src/a.cpp:10");
    REQUIRE(stack.pending.size() == 1);
    CHECK(stack.pending[0].file_path == "src/c.cpp");
    CHECK(stack.pending[0].origin == CrashOrigin::PendingException);
    REQUIRE(stack.backtrace.size() == 1);
    CHECK(stack.backtrace[0].file_path == "src/a.cpp");
    CHECK(stack.backtrace[0].origin == CrashOrigin::Backtrace);
}

TEST_CASE("frames without a source location are skipped, not fatal") {
    const CrashStack stack = parse_crash_stack(" 0: ??? (no source)");
    CHECK(stack.backtrace.empty());
    CHECK(stack.pending.empty());
    CHECK(stack.skipped_lines == 1);
}

TEST_CASE("thread markers label subsequent frames") {
    const CrashStack stack = parse_crash_stack(
        "[thread 7: crashed]\n 0: f() at a.cpp:1\n[thread 9: waiting]\n 0: g() at b.cpp:2");
    REQUIRE(stack.backtrace.size() == 2);
    REQUIRE(stack.backtrace[0].thread_label.has_value());
    CHECK(*stack.backtrace[0].thread_label == "thread 7: crashed");
    CHECK(*stack.backtrace[1].thread_label == "thread 9: waiting");
}

TEST_CASE("frame indices increase within each block") {
    const CrashStack stack = parse_crash_stack(
        "[pending exceptions]\n 0: a() at x.cpp:1\n 1: b() at y.cpp:2\n"
        "[call stack]\n 0: c() at z.cpp:3\n 1: d() at w.cpp:4\n 2: e() at v.cpp:5");
    for (std::size_t i = 1; i < stack.pending.size(); ++i) {
        CHECK(stack.pending[i].frame_index > stack.pending[i - 1].frame_index);
    }
    for (std::size_t i = 1; i < stack.backtrace.size(); ++i) {
        CHECK(stack.backtrace[i].frame_index > stack.backtrace[i - 1].frame_index);
    }
}

TEST_CASE("parse_crash_extinfo extracts signal and address") {
    const CrashExtInfo info = parse_crash_extinfo(
        "--> Dump of siginfo contents <--\nsignal: SIGSEGV (11)\ncode: 1\naddress: 0x3d\n"
        "host: vm-01\nos: Linux");
    CHECK(info.signal_name == "SIGSEGV");
    REQUIRE(info.signal_number.has_value());
    CHECK(*info.signal_number == 11);
    REQUIRE(info.signal_code.has_value());
    CHECK(*info.signal_code == 1);
    REQUIRE(info.faulting_address.has_value());
    CHECK(*info.faulting_address == 0x3d);
    REQUIRE(info.host_metadata.size() == 2);
    CHECK(info.host_metadata[0].first == "host");
    CHECK(info.host_metadata[0].second == "vm-01");
    CHECK(info.host_metadata[1].first == "os");
}

TEST_CASE("abort dumps carry no faulting address") {
    const CrashExtInfo info = parse_crash_extinfo("signal: SIGABRT (6)");
    CHECK(info.signal_name == "SIGABRT");
    CHECK(!info.faulting_address.has_value());
}

TEST_CASE("extinfo without a signal line is MissingSignal") {
    CHECK_THROWS_AS(parse_crash_extinfo("host: vm-01\nos: Linux"), MissingSignal);
}

TEST_CASE("sanitize_crash_stack keeps only path:line pairs in order") {
    CrashStack stack;
    stack.backtrace = {{"a.cpp", 10, CrashOrigin::Backtrace, 0, {}},
                       {"b.cpp", 20, CrashOrigin::Backtrace, 1, {}}};
    CHECK(sanitize_crash_stack(stack) == "backtrace:\na.cpp:10\nb.cpp:20");

    stack.pending = {{"c.cpp", 5, CrashOrigin::PendingException, 0, {}}};
    const std::string sanitized = sanitize_crash_stack(stack);
    CHECK(sanitized == "pending_exceptions:\nc.cpp:5\nbacktrace:\na.cpp:10\nb.cpp:20");
    CHECK(sanitized.find("pending_exceptions:") < sanitized.find("backtrace:"));
}

TEST_CASE("sanitized stack covers exactly the structured locations") {
    const CrashStack stack = parse_crash_stack(
        "[pending exceptions]\n 0: p() at p1.cpp:1\n 1: q() at p2.cpp:2\n"
        "[call stack]\n 0: f() at b1.cpp:3\n 1: g() at b2.cpp:4\n 2: noise line");
    const std::string sanitized = sanitize_crash_stack(stack);

    std::vector<std::string> expected = {"pending_exceptions:", "p1.cpp:1", "p2.cpp:2",
                                         "backtrace:", "b1.cpp:3", "b2.cpp:4"};
    std::string joined;
    for (const auto& line : expected) joined += line + "\n";
    joined.pop_back();
    CHECK(sanitized == joined);
}

TEST_CASE("sanitize_crash_extinfo flattens to key: value lines") {
    CrashExtInfo info;
    info.signal_name = "SIGSEGV";
    info.signal_number = 11;
    info.faulting_address = 0x3d;
    info.host_metadata = {{"host", "vm-01"}};
    info.raw_text = "--> Dump of siginfo contents <--\n...";

    const std::string sanitized = sanitize_crash_extinfo(info);
    CHECK(sanitized ==
          "signal_name: SIGSEGV\nsignal_number: 11\nfaulting_address: 0x3d\nhost: vm-01");
    CHECK(sanitized.find("-->") == std::string::npos);
}

TEST_CASE("sanitize_crash_extinfo with empty metadata emits only signal lines") {
    CrashExtInfo info;
    info.signal_name = "SIGABRT";
    info.signal_number = 6;
    CHECK(sanitize_crash_extinfo(info) == "signal_name: SIGABRT\nsignal_number: 6");
}

namespace {

CrashExtInfo segv_at(std::optional<std::uint64_t> address) {
    CrashExtInfo info;
    info.signal_name = "SIGSEGV";
    info.faulting_address = address;
    return info;
}

}  // namespace

TEST_CASE("classify_crash_type follows the faulting-address heuristic") {
    CHECK(classify_crash_type(segv_at(0x00)) == CrashType::SigSegvNpe);
    CHECK(classify_crash_type(segv_at(0x3d)) == CrashType::SigSegvNpe);
    CHECK(classify_crash_type(segv_at(0xfff)) == CrashType::SigSegvNpe);
    CHECK(classify_crash_type(segv_at(0x1000)) == CrashType::SigSegvNonNpe);
    CHECK(classify_crash_type(segv_at(0x7f8a12340000ULL)) == CrashType::SigSegvNonNpe);
    CHECK(classify_crash_type(segv_at(std::nullopt)) == CrashType::SigSegvNonNpe);

    CrashExtInfo info;
    info.signal_name = "SIGABRT";
    CHECK(classify_crash_type(info) == CrashType::SigAbrt);
    info.signal_name = "SIGBUS";
    CHECK(classify_crash_type(info) == CrashType::SigBus);
    info.signal_name = "SIGFPE";
    CHECK(classify_crash_type(info) == CrashType::SigFpe);
    info.signal_name = "SIGTERM";
    CHECK(classify_crash_type(info) == CrashType::Other);
}

TEST_CASE("classification is deterministic in (signal, address)") {
    std::mt19937_64 rng(99);
    for (int i = 0; i < 500; ++i) {
        const std::uint64_t address = rng() % 0x100000;
        CHECK(classify_crash_type(segv_at(address)) == classify_crash_type(segv_at(address)));
        CHECK(classify_crash_type(segv_at(address)) ==
              (address < kNpeAddressThreshold ? CrashType::SigSegvNpe : CrashType::SigSegvNonNpe));
    }
}

TEST_CASE("crash type names round-trip") {
    for (CrashType t : {CrashType::SigAbrt, CrashType::SigSegvNpe, CrashType::SigSegvNonNpe,
                        CrashType::SigBus, CrashType::SigFpe, CrashType::Other}) {
        CHECK(crash_type_from_string(to_string(t)) == t);
    }
    CHECK(!crash_type_from_string("SIGWEIRD").has_value());
}
