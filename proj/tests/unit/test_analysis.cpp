#include "check_error.hpp"
#include "test_support.hpp"

#include "kf/build.hpp"
#include "kf/diagnostics.hpp"
#include "kf/fsutil.hpp"
#include "kf/graph_diff.hpp"
#include "kf/verification.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace kf;
namespace fs = std::filesystem;
using nlohmann::json;

TEST_SUITE("repo_tree") {

TEST_CASE("depth limit, filter and hidden entries") {
    kft::TempDir d;
    fs::path r = d.path() / "fw";
    write_text_file(r / "CMakeLists.txt", "");
    write_text_file(r / "source" / "core" / "Tensor.hpp", "");
    write_text_file(r / "source" / "core" / "deep" / "x.cpp", "");
    write_text_file(r / "source" / "README.md", "");
    write_text_file(r / ".git" / "HEAD", "");

    auto full = build_repo_tree(r, 8);
    CHECK(render_repo_tree(full) ==
          "fw/\n"
          "|-- CMakeLists.txt\n"
          "`-- source/\n"
          "    |-- README.md\n"
          "    `-- core/\n"
          "        |-- Tensor.hpp\n"
          "        `-- deep/\n"
          "            `-- x.cpp\n");
    CHECK(count_files(full.top) == 4);

    auto shallow = build_repo_tree(r, 2);
    CHECK(render_repo_tree(shallow) ==
          "fw/\n"
          "|-- CMakeLists.txt\n"
          "`-- source/\n"
          "    |-- README.md\n"
          "    `-- core/\n"
          "        `-- ...\n");
    CHECK(count_files(shallow.top) == 2);

    auto cpp_only = build_repo_tree(r, 8, {".hpp", ".cpp"});
    CHECK(count_files(cpp_only.top) == 2);
    CHECK(render_repo_tree(cpp_only).find("README") == std::string::npos);

    CHECK_KF_ERROR(build_repo_tree(r / "missing", 2), ErrorCode::IoError);
    CHECK_KF_ERROR(build_repo_tree(r, 0), ErrorCode::InvalidArgument);
}

}

TEST_SUITE("error_extraction") {

TEST_CASE("classifies by file name and ignores warnings") {
    std::string log =
        "[ 10%] Building CXX object CMakeFiles/x.dir/source/backend/cpu/CPURelu.cpp.o\n"
        "source/backend/cpu/CPURelu.cpp:12:5: warning: unused variable 'k'\n"
        "source/backend/cpu/CPURelu.cpp:14:9: error: 'foo' was not declared in this scope\n"
        "source/core/Tensor.hpp:30:1: error: redefinition of 'struct Tensor'\n"
        "source/backend/cpu/CPURelu.cpp:14:9: error: 'foo' was not declared in this scope\n"
        "make[2]: *** [x] Error 1\n";
    auto ex = extract_errors(log, {"CPURelu.cpp", "CPURelu.hpp"});
    REQUIRE(ex.records.size() == 2);
    CHECK(ex.records[0].file == "source/backend/cpu/CPURelu.cpp");
    CHECK(ex.records[0].line == 14);
    CHECK(ex.records[0].column == 9);
    CHECK(ex.records[0].message == "'foo' was not declared in this scope");
    CHECK(ex.records[0].classification == ErrorClass::Local);
    CHECK(ex.records[1].classification == ErrorClass::CrossFile);
    CHECK(ex.total_found == 2);
    CHECK(ex.other_errors.empty());
}

TEST_CASE("linker errors go to other_errors") {
    std::string log = "/usr/bin/ld: CPURelu.cpp.o: undefined reference to `toy::helper()'\n"
                      "collect2: error: ld returned 1 exit status\n";
    auto ex = extract_errors(log, {"CPURelu.cpp"});
    CHECK(ex.records.empty());
    CHECK(ex.other_errors.size() == 2);
}

TEST_CASE("record cap") {
    std::string log;
    for (int i = 1; i <= 30; ++i) log += "a.cpp:" + std::to_string(i) + ":1: error: e" + std::to_string(i) + "\n";
    auto ex = extract_errors(log, {"a.cpp"});
    CHECK(ex.records.size() == kMaxErrorRecords);
    CHECK(ex.total_found == 30);
    CHECK(ex.records.back().line == 20);
    CHECK(extract_errors(log, {"a.cpp"}, 3).records.size() == 3);
}

TEST_CASE("line without column") {
    auto ex = extract_errors("b.hpp:7: error: oops\n", {});
    REQUIRE(ex.records.size() == 1);
    CHECK_FALSE(ex.records[0].column.has_value());
    CHECK(ex.records[0].classification == ErrorClass::CrossFile);
}

TEST_CASE("grouped document") {
    ErrorRecord a{"x/CPURelu.cpp", 3, 1, "bad", "int f() {}", ErrorClass::Local};
    ErrorRecord b{"Tensor.hpp", 9, std::nullopt, "worse", "", ErrorClass::CrossFile};
    auto doc = group_errors({a, b}, "Relu", {"collect2: error: ld returned 1 exit status"});
    CHECK(doc["opname"] == "Relu");
    REQUIRE(doc["local_error"].size() == 1);
    CHECK(doc["local_error"][0]["error_file"] == "x/CPURelu.cpp");
    CHECK(doc["local_error"][0]["error_line"] == 3);
    CHECK(doc["local_error"][0]["error_context"] == "int f() {}");
    CHECK(doc["crossfile_error"][0]["error_message"] == "worse");
    CHECK(doc["other_error"].size() == 1);
    std::vector<std::string> keys;
    for (auto& [k, v] : doc.items()) keys.push_back(k);
    CHECK(keys == std::vector<std::string>{"opname", "local_error", "crossfile_error", "other_error"});
}

}

TEST_SUITE("scope_context") {

const char* kSource =
    "#include <x>\n"             // 1
    "\n"                         // 2
    "struct S {\n"               // 3
    "    int a;\n"               // 4
    "    int get() const {\n"    // 5
    "        return a;\n"        // 6
    "    }\n"                    // 7
    "};\n"                       // 8
    "\n"                         // 9
    "int twice(int v) {\n"       // 10
    "    // } in a comment\n"    // 11
    "    const char* s = \"}\";\n"  // 12
    "    return 2 * v;\n"        // 13
    "}\n";                       // 14

TEST_CASE("smallest enclosing definition") {
    auto m = find_enclosing_scope(kSource, 6);
    CHECK(m.kind == ScopeKind::Function);
    CHECK(m.first_line == 5);
    CHECK(m.last_line == 7);

    auto c = find_enclosing_scope(kSource, 4);
    CHECK(c.kind == ScopeKind::Class);
    CHECK(c.first_line == 3);
    CHECK(c.last_line == 8);

    auto f = find_enclosing_scope(kSource, 13);
    CHECK(f.kind == ScopeKind::Function);
    CHECK(f.first_line == 10);
    CHECK(f.last_line == 14);
    CHECK(f.text.rfind("int twice", 0) == 0);
}

TEST_CASE("fallback window is clamped") {
    auto w = find_enclosing_scope(kSource, 1);
    CHECK(w.kind == ScopeKind::Fallback);
    CHECK(w.first_line == 1);
    CHECK(w.last_line == 11);
}

TEST_CASE("out of range") {
    CHECK_KF_ERROR(find_enclosing_scope(kSource, 0), ErrorCode::LineOutOfRange);
    CHECK_KF_ERROR(find_enclosing_scope(kSource, 15), ErrorCode::LineOutOfRange);
    CHECK_KF_ERROR(extract_context("/nonexistent.cpp", 1), ErrorCode::IoError);
}

TEST_CASE("attach_contexts resolves by file name") {
    kft::TempDir d;
    write_text_file(d.path() / "src" / "a.cpp", kSource);
    write_text_file(d.path() / ".kf_backup" / "a.cpp", "int hidden() {\n  return 0;\n}\n");
    std::vector<ErrorRecord> recs = {{"/elsewhere/build/../src/a.cpp", 13, 5, "m", "", ErrorClass::Local},
                                     {"src/a.cpp", 4, 5, "m", "", ErrorClass::Local},
                                     {"gone.cpp", 1, 1, "m", "", ErrorClass::CrossFile}};
    attach_contexts(recs, d.path());
    CHECK(recs[0].context.rfind("int twice", 0) == 0);
    CHECK(recs[1].context.rfind("struct S", 0) == 0);
    CHECK(recs[2].context.empty());
}

}

TEST_SUITE("verification") {

TEST_CASE("absolute tolerance boundary") {
    auto e = Tensor::f32({3}, {0.0f, 1.0f, -2.0f});
    CHECK(compare_tensors(Tensor::f32({3}, {1e-4f, 1.0f, -2.0f}), e).passed);
    auto r = compare_tensors(Tensor::f32({3}, {0.0f, 1.0f, -2.0003f}), e);
    CHECK_FALSE(r.passed);
    CHECK(r.mismatch_count == 1);
    CHECK(r.first_mismatch_index == 2);
    CHECK(r.max_abs_diff == doctest::Approx(3e-4).epsilon(1e-3));
}

TEST_CASE("relative mode scales with magnitude") {
    auto e = Tensor::f32({2}, {1000.0f, 0.5f});
    auto a = Tensor::f32({2}, {1000.05f, 0.50005f});
    CHECK_FALSE(compare_tensors(a, e).passed);
    CHECK(compare_tensors(a, e, 1e-4, ToleranceMode::Relative).passed);
    // below 1 in magnitude the bound stays absolute
    CHECK_FALSE(compare_tensors(Tensor::f32({1}, {0.5003f}), Tensor::f32({1}, {0.5f}), 1e-4, ToleranceMode::Relative).passed);
}

TEST_CASE("integral tensors compare exactly") {
    auto e = Tensor::i32({3}, {1, 2, 3});
    CHECK(compare_tensors(Tensor::i32({3}, {1, 2, 3}), e, 10.0).passed);
    auto r = compare_tensors(Tensor::i32({3}, {1, 5, 3}), e, 10.0);
    CHECK_FALSE(r.passed);
    CHECK(r.max_abs_diff == 1.0);
    CHECK_FALSE(compare_tensors(Tensor::boolean({1}, {1}), Tensor::boolean({1}, {0})).passed);
}

TEST_CASE("shape and dtype mismatch use the sentinel") {
    auto r = compare_tensors(Tensor::f32({2, 2}, {0, 0, 0, 0}), Tensor::f32({4}, {0, 0, 0, 0}));
    CHECK(r.shape_mismatch);
    CHECK(r.max_abs_diff == kMismatchSentinel);
    auto t = compare_tensors(Tensor::i32({1}, {0}), Tensor::f32({1}, {0}));
    CHECK_FALSE(t.passed);
    CHECK(t.max_abs_diff == kMismatchSentinel);
}

TEST_CASE("NaN and infinity") {
    const float nan = std::numeric_limits<float>::quiet_NaN();
    const float inf = std::numeric_limits<float>::infinity();
    CHECK(compare_tensors(Tensor::f32({1}, {nan}), Tensor::f32({1}, {nan})).passed);
    auto r = compare_tensors(Tensor::f32({1}, {nan}), Tensor::f32({1}, {0}));
    CHECK_FALSE(r.passed);
    CHECK(std::isinf(r.max_abs_diff));
    CHECK(compare_tensors(Tensor::f32({1}, {inf}), Tensor::f32({1}, {inf})).passed);
    CHECK_FALSE(compare_tensors(Tensor::f32({1}, {-inf}), Tensor::f32({1}, {inf})).passed);
}

TEST_CASE("toy operator end to end") {
    auto toy = kft::make_toy_framework();
    auto ws = Workspace::open(toy->root);
    kft::MockTransport t;

    REQUIRE(build(ws, toy->config.build, BuildMode::Full).success);
    CHECK(run_verification(ws, toy->config, toy->relu(), t).passed);

    {
        InjectionGuard g(ws, toy->relu(), kft::relu_candidate(toy->relu(), "wrong", 100), toy->config);
        REQUIRE(build(ws, toy->config.build, BuildMode::Incremental).success);
        auto r = run_verification(ws, toy->config, toy->relu(), t);
        CHECK_FALSE(r.passed);
        CHECK(r.mismatch_count > 0);
    }
    {
        InjectionGuard g(ws, toy->relu(), kft::relu_candidate(toy->relu(), "crash", 100), toy->config);
        REQUIRE(build(ws, toy->config.build, BuildMode::Incremental).success);
        CHECK_KF_ERROR(run_verification(ws, toy->config, toy->relu(), t), ErrorCode::ExecutionFailure);
    }
}

TEST_CASE("missing output") {
    auto toy = kft::make_toy_framework();
    fs::remove(toy->root / "data" / "Relu" / "correct_0.tensor");
    auto ws = Workspace::open(toy->root);
    REQUIRE(build(ws, toy->config.build, BuildMode::Full).success);
    kft::MockTransport t;
    CHECK_KF_ERROR(run_verification(ws, toy->config, toy->relu(), t), ErrorCode::OutputMissing);
}

}

TEST_SUITE("graph_diff") {

GraphDesc load_graph(const std::string& name) { return parse_graph(read_text_file(kft::fixture("graphs/" + name))); }

TEST_CASE("fixture diffs") {
    auto ref = load_graph("argmax_ref.json");
    CHECK(diff_graphs(ref, ref).empty());
    CHECK(diff_graphs(ref, load_graph("argmax_same.json")).empty());
    for (std::string name : {"argmax_attrs", "argmax_shapes", "argmax_topology"}) {
        CAPTURE(name);
        auto expected = json::parse(read_text_file(kft::fixture("graphs/" + name + ".expected.json")));
        CHECK(to_json(diff_graphs(ref, load_graph(name + ".json"))) == expected);
    }
}

TEST_CASE("json round trip") {
    auto ref = load_graph("argmax_ref.json");
    CHECK(diff_graphs(ref, parse_graph_json(to_json(ref))).empty());
    CHECK(to_json(parse_graph_json(to_json(ref))) == to_json(ref));
}

TEST_CASE("type change") {
    auto ref = load_graph("argmax_ref.json");
    auto tgt = ref;
    tgt.nodes[1].op_type = "ArgMin";
    auto m = diff_graphs(ref, tgt);
    REQUIRE(m.size() == 1);
    CHECK(m[0].path == "node[1].op_type");
    CHECK(m[0].severity == MismatchSeverity::NodeType);
    CHECK(m[0].reference_value == "ArgMax");
}

TEST_CASE("parse errors carry a path") {
    CHECK_KF_ERROR(parse_graph("{"), ErrorCode::ParseError);
    CHECK_KF_ERROR(parse_graph("{\"nodes\": 3}"), ErrorCode::ParseError);
    try {
        parse_graph(R"({"nodes": [{"op_type": "A", "name": "a", "input_shapes": [[1, "x"]]}]})");
        FAIL("no throw");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("nodes[0].input_shapes") != std::string::npos);
    }
}

}
