#include <catch2/catch_amalgamated.hpp>

#include <unistd.h>

#include <filesystem>

#include "rhetor/prompts.hpp"

using namespace rhetor;

TEST_CASE("render substitutes every occurrence of a placeholder") {
    const std::string tpl = "A {{X}} and another {{X}} plus {{Y}}.";
    CHECK(prompts::render(tpl, {{"X", "one"}, {"Y", "two"}}) ==
          "A one and another one plus two.");
}

TEST_CASE("render rejects unresolved placeholders") {
    CHECK_THROWS_AS(prompts::render("hello {{Missing Name}}", {}), std::invalid_argument);
}

TEST_CASE("render leaves plain JSON braces alone") {
    const std::string tpl = R"({"result": [{"index": 0, "content": "{{Body}}"}]})";
    CHECK(prompts::render(tpl, {{"Body", "x"}}) ==
          R"({"result": [{"index": 0, "content": "x"}]})");
}

TEST_CASE("builtin library carries the pipeline templates") {
    const prompts::Library lib = prompts::Library::builtin();
    CHECK(lib.get("section_segmentation").find("{{Judicial Opinion}}") != std::string::npos);
    CHECK(lib.get("section_segmentation").find("{{Section Label Definitions}}") !=
          std::string::npos);
    CHECK(lib.get("section_labeling").find("{{Section Content}}") != std::string::npos);
    CHECK(lib.get("section_labeling").find("\"Analysis of Default Judgment\"") !=
          std::string::npos);
    CHECK(lib.get("verdict_tod").find("Relevant Sections:") != std::string::npos);
    CHECK(lib.get("verdict_tod").find("{{Linearized Tree-Of-Discourse}}") != std::string::npos);
    CHECK(lib.get("verdict_cot").find("Let's think step by step.") != std::string::npos);
    CHECK(lib.get("path_verbalization").find("{{Target Text Span}}") != std::string::npos);
    CHECK(lib.get("path_verbalization").find("should not exceed 150 words") !=
          std::string::npos);
    CHECK_THROWS_AS(lib.get("no_such_template"), std::invalid_argument);

    // All 13 labels appear in the definitions block.
    const std::string& defs = lib.get("section_label_definitions");
    for (const char* label : {"Introduction", "Procedural History", "Background Facts",
                              "Analysis of the Infringement", "Analysis of the Liability",
                              "Analysis of the Relief and Damages", "Analysis of Attorneys' Fees",
                              "Interpretation of the Law", "Analysis of Defenses",
                              "Jurisdiction and Standing", "Order/Summary",
                              "Supplementary Description or Case Information",
                              "Analysis of Default Judgment"})
        CHECK(defs.find(label) != std::string::npos);
}

TEST_CASE("template files round-trip through a directory") {
    const fs::path dir =
        fs::temp_directory_path() / ("rhetor_tpl_" + std::to_string(::getpid()));
    prompts::write_templates(dir);
    const prompts::Library from_files = prompts::Library::from_directory(dir);
    const prompts::Library builtin = prompts::Library::builtin();
    for (const auto& t : prompts::all_templates())
        CHECK(from_files.get(t.name) == builtin.get(t.name));
    fs::remove_all(dir);
}

TEST_CASE("directory templates shadow the embedded ones") {
    const fs::path dir =
        fs::temp_directory_path() / ("rhetor_tpl_shadow_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    atomic_write_text(dir / "plan_seed.txt", "custom plan prompt {{Feature Definition}}\n");
    const prompts::Library lib = prompts::Library::from_directory(dir);
    CHECK(lib.get("plan_seed") == "custom plan prompt {{Feature Definition}}");
    CHECK(lib.get("verdict_vanilla") == prompts::Library::builtin().get("verdict_vanilla"));
    fs::remove_all(dir);
}

TEST_CASE("repository prompt files match the embedded templates") {
    const fs::path repo_prompts = fs::path(RHETOR_SOURCE_DIR) / "prompts";
    REQUIRE(fs::is_directory(repo_prompts));
    const prompts::Library from_repo = prompts::Library::from_directory(repo_prompts);
    const prompts::Library builtin = prompts::Library::builtin();
    for (const auto& t : prompts::all_templates())
        CHECK(from_repo.get(t.name) == builtin.get(t.name));
}
