// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>

#include "crashfl/reponav.hpp"
#include "test_fixtures.hpp"

using namespace crashfl;
namespace fs = std::filesystem;

namespace {

struct RepoFixture {
    fs::path dir;
    RepoFixture() : dir(testfx::make_fixture_repo(testfx::make_temp_dir("repo"))) {}
    ~RepoFixture() { fs::remove_all(dir); }
};

}  // namespace

TEST_CASE("get_nearby_code returns a 21-line window around the target") {
    RepoFixture fixture;
    RepoSnapshot repo(fixture.dir);

    auto mid = get_nearby_code(repo, "src/a.cpp", 15);
    REQUIRE(mid.ok());
    CHECK(mid.value().lines.size() == 21);
    CHECK(mid.value().lines.front().first == 5);
    CHECK(mid.value().lines.back().first == 25);
    CHECK(mid.value().center_line == 15);

    auto low = get_nearby_code(repo, "src/a.cpp", 3);
    REQUIRE(low.ok());
    CHECK(low.value().lines.front().first == 1);
    CHECK(low.value().lines.back().first == 13);

    auto high = get_nearby_code(repo, "src/a.cpp", 30);
    REQUIRE(high.ok());
    CHECK(high.value().lines.front().first == 20);
    CHECK(high.value().lines.back().first == 30);
}

TEST_CASE("snippet rendering carries N| prefixes") {
    RepoFixture fixture;
    RepoSnapshot repo(fixture.dir);
    auto snippet = get_nearby_code(repo, "src/a.cpp", 10);
    REQUIRE(snippet.ok());
    const std::string rendered = snippet.value().render();
    CHECK(rendered.find("10|Widget w;") != std::string::npos);
    CHECK(rendered.find("1|// filler line 1") != std::string::npos);
}

TEST_CASE("get_nearby_code error taxonomy") {
    RepoFixture fixture;
    RepoSnapshot repo(fixture.dir);

    auto missing = get_nearby_code(repo, "src/ghost.cpp", 1);
    REQUIRE(!missing.ok());
    CHECK(missing.error().kind == NavErrorKind::FileNotFound);

    auto far = get_nearby_code(repo, "src/a.cpp", 4000);
    REQUIRE(!far.ok());
    CHECK(far.error().kind == NavErrorKind::InvalidLine);

    auto zero = get_nearby_code(repo, "src/a.cpp", 0);
    REQUIRE(!zero.ok());
    CHECK(zero.error().kind == NavErrorKind::InvalidLine);
}

TEST_CASE("resolve_path strips foreign absolute prefixes") {
    RepoFixture fixture;
    RepoSnapshot repo(fixture.dir);

    auto direct = resolve_path(repo, "src/b.cpp");
    REQUIRE(direct.ok());
    CHECK(direct.value() == "src/b.cpp");

    auto absolute = resolve_path(repo, "/build/workdir/src/b.cpp");
    REQUIRE(absolute.ok());
    CHECK(absolute.value() == "src/b.cpp");

    auto unique_base = resolve_path(repo, "widget.h");
    REQUIRE(unique_base.ok());
    CHECK(unique_base.value() == "include/widget.h");

    // Two a.cpp files exist: src/a.cpp and src/nested/a.cpp.
    auto ambiguous = resolve_path(repo, "a.cpp");
    REQUIRE(!ambiguous.ok());
    CHECK(ambiguous.error().kind == NavErrorKind::FileNotFound);
    CHECK(ambiguous.error().detail.find("ambiguous") != std::string::npos);

    auto unknown = resolve_path(repo, "no_such_file.cpp");
    REQUIRE(!unknown.ok());
    CHECK(unknown.error().kind == NavErrorKind::FileNotFound);
}

TEST_CASE("lexical resolver finds the planted definition") {
    RepoFixture fixture;
    RepoSnapshot repo(fixture.dir);
    LexicalResolver resolver;

    auto result = get_term_definition(repo, resolver, "src/a.cpp", 10, "Widget");
    REQUIRE(result.ok());
    CHECK(result.value().path == "include/widget.h");
    CHECK(result.value().line == 42);
    CHECK(result.value().defining_text.find("struct Widget") != std::string::npos);
}

TEST_CASE("get_term_definition error taxonomy") {
    RepoFixture fixture;
    RepoSnapshot repo(fixture.dir);
    LexicalResolver resolver;

    auto not_in_line = get_term_definition(repo, resolver, "src/a.cpp", 10, "Gizmo");
    REQUIRE(!not_in_line.ok());
    CHECK(not_in_line.error().kind == NavErrorKind::TermNotInLine);

    auto missing = get_term_definition(repo, resolver, "ghost.cpp", 1, "x");
    REQUIRE(!missing.ok());
    CHECK(missing.error().kind == NavErrorKind::FileNotFound);

    auto bad_line = get_term_definition(repo, resolver, "src/a.cpp", 4000, "Widget");
    REQUIRE(!bad_line.ok());
    CHECK(bad_line.error().kind == NavErrorKind::InvalidLine);

    auto bad_args = get_term_definition(repo, resolver, "src/a.cpp", 10, "");
    REQUIRE(!bad_args.ok());
    CHECK(bad_args.error().kind == NavErrorKind::InvalidArgument);

    // "filler" appears on line 1 but is never declared anywhere.
    auto no_def = get_term_definition(repo, resolver, "src/a.cpp", 1, "filler");
    REQUIRE(!no_def.ok());
    CHECK(no_def.error().kind == NavErrorKind::NavigationFailed);
}

TEST_CASE("lenient term check strips an echoed line-number prefix") {
    RepoFixture fixture;
    RepoSnapshot repo(fixture.dir);
    LexicalResolver resolver;

    auto lenient = get_term_definition(repo, resolver, "src/a.cpp", 10, "10| Widget");
    REQUIRE(lenient.ok());
    CHECK(lenient.value().path == "include/widget.h");

    auto strict = get_term_definition(repo, resolver, "src/a.cpp", 10, "10| Widget",
                                      /*strict_term_check=*/true);
    REQUIRE(!strict.ok());
    CHECK(strict.error().kind == NavErrorKind::TermNotInLine);
}

TEST_CASE("term matching is token-wise, not substring") {
    RepoFixture fixture;
    // "Widgets" on the line must not satisfy term "Widget".
    testfx::write_file(fixture.dir / "src/tokens.cpp", "int Widgets = 2;\nint Widget = 3;\n");
    RepoSnapshot repo(fixture.dir);
    LexicalResolver resolver;

    auto plural_line = get_term_definition(repo, resolver, "src/tokens.cpp", 1, "Widget");
    REQUIRE(!plural_line.ok());
    CHECK(plural_line.error().kind == NavErrorKind::TermNotInLine);

    auto exact = get_term_definition(repo, resolver, "src/tokens.cpp", 2, "Widget");
    CHECK(exact.ok());
}

TEST_CASE("fuzzing navigation never yields a phantom location") {
    RepoFixture fixture;
    RepoSnapshot repo(fixture.dir);
    LexicalResolver resolver;
    std::mt19937_64 rng(13579);

    const std::vector<std::string> paths = {"src/a.cpp", "src/b.cpp",   "ghost.cpp",
                                            "/abs/a.cpp", "widget.h",   "",
                                            "a.cpp",      "no/dir.xpp", "include/widget.h"};
    const std::vector<std::string> terms = {"Widget", "Gizmo", "int", "", "12| Widget", "w"};

    for (int i = 0; i < 300; ++i) {
        const std::string& path = paths[rng() % paths.size()];
        const long long line = static_cast<long long>(rng() % 100) - 5;
        const std::string& term = terms[rng() % terms.size()];

        auto snippet = get_nearby_code(repo, path, line);
        if (snippet.ok()) {
            CHECK(repo.contains(snippet.value().path));
            CHECK(snippet.value().lines.size() <= 21);
            bool has_center = false;
            for (const auto& [n, _] : snippet.value().lines) {
                if (n == snippet.value().center_line) has_center = true;
            }
            CHECK(has_center);
        }

        auto definition = get_term_definition(repo, resolver, path, line, term);
        if (definition.ok()) {
            CHECK(repo.contains(definition.value().path));
            auto lines = repo.read_lines(definition.value().path);
            REQUIRE(lines.ok());
            CHECK(definition.value().line >= 1);
            CHECK(definition.value().line <= static_cast<int>(lines.value().size()));
        }
    }
}

TEST_CASE("snapshot file index is sorted and complete") {
    RepoFixture fixture;
    RepoSnapshot repo(fixture.dir);
    const auto& index = repo.file_index();
    CHECK(std::is_sorted(index.begin(), index.end()));
    CHECK(repo.contains("src/a.cpp"));
    CHECK(repo.contains("include/widget.h"));
    CHECK(!repo.contains("missing.cpp"));

    CHECK_THROWS(RepoSnapshot(fixture.dir / "nonexistent"));
}
