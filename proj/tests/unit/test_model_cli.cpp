#include "check_error.hpp"
#include "test_support.hpp"

#include "kf/framework_config.hpp"
#include "kf/fsutil.hpp"
#include "kf/process.hpp"
#include "kf/task_model.hpp"
#include "kf/workspace.hpp"

#include <doctest.h>

using namespace kf;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Minimal valid task whose reference files live in `dir`.
json task_json(const fs::path& dir, const std::string& id, const std::string& category = "Unary") {
    for (const char* f : {"g.json", "in.tensor", "out.tensor"})
        if (!fs::exists(dir / f)) write_text_file(dir / f, "x");
    return {{"id", id},
            {"operator_name", "Op" + id},
            {"category", category},
            {"mechanism", "geometric"},
            {"reference_graph", "g.json"},
            {"reference_inputs", {"in.tensor"}},
            {"reference_outputs", {"out.tensor"}},
            {"target_file_names", {"Geometry" + id + ".cpp"}}};
}

Manifest parse_tasks(const fs::path& dir, json tasks) {
    return parse_manifest(json{{"schema_version", "1"}, {"tasks", std::move(tasks)}}.dump(), dir);
}

ProcessResult kfh(std::vector<std::string> args) {
    args.insert(args.begin(), KFH_BINARY);
    return run_process(args);
}

}  // namespace

TEST_SUITE("task_model") {

TEST_CASE("category and mechanism names") {
    for (auto c : kAllCategories) CHECK(parse_category(to_string(c)) == c);
    CHECK_FALSE(parse_category("Nope").has_value());
    CHECK(parse_mechanism("atomic") == Mechanism::Atomic);
    CHECK(file_count(Mechanism::Atomic) == 2);
    CHECK(file_count(Mechanism::Composite) == 1);
}

TEST_CASE("attributes") {
    kft::TempDir d;
    auto t = task_json(d.path(), "a");
    t["attributes"] = {{"axis", -1}, {"keep", true}, {"dims", {1, 2, 3}}, {"eps", 1e-5}, {"mode", "max"}};
    auto m = parse_tasks(d.path(), {t});
    const auto& a = m.at("a").attributes;
    CHECK(a.get_int("axis") == -1);
    CHECK(a.get_bool("keep"));
    CHECK(a.get_int_list("dims") == std::vector<std::int64_t>{1, 2, 3});
    CHECK(a.get_float("eps") == doctest::Approx(1e-5));
    CHECK(a.get("mode") == "max");
    CHECK_KF_ERROR(a.get("missing"), ErrorCode::ValidationError);
    CHECK_KF_ERROR(a.get_int("mode"), ErrorCode::ValidationError);
    CHECK_KF_ERROR(a.get_bool("axis"), ErrorCode::ValidationError);
}

TEST_CASE("manifest errors") {
    kft::TempDir d;
    auto ok = task_json(d.path(), "a");
    CHECK(parse_tasks(d.path(), {ok}).tasks.size() == 1);

    CHECK_KF_ERROR(parse_manifest("{", d.path()), ErrorCode::ParseError);
    CHECK_KF_ERROR(parse_manifest(R"({"schema_version": "9", "tasks": []})", d.path()), ErrorCode::ValidationError);
    CHECK_KF_ERROR(parse_tasks(d.path(), {ok, ok}), ErrorCode::ValidationError);

    auto t = ok;
    t["category"] = "Quantum";
    CHECK_KF_ERROR(parse_tasks(d.path(), {t}), ErrorCode::ValidationError);
    t = ok;
    t["mechanism"] = "atomic";  // needs two files
    CHECK_KF_ERROR(parse_tasks(d.path(), {t}), ErrorCode::ValidationError);
    t = ok;
    t["target_file_names"] = {"sub/X.cpp"};
    CHECK_KF_ERROR(parse_tasks(d.path(), {t}), ErrorCode::ValidationError);
    t = ok;
    t["reference_inputs"] = {"missing.tensor"};
    CHECK_KF_ERROR(parse_tasks(d.path(), {t}), ErrorCode::ValidationError);
    t = ok;
    t["baseline_latency_ms"] = 0;
    CHECK_KF_ERROR(parse_tasks(d.path(), {t}), ErrorCode::ValidationError);
    t = ok;
    t["colour"] = "red";
    CHECK_KF_ERROR(parse_tasks(d.path(), {t}), ErrorCode::ValidationError);
    t = ok;
    t["reference_inputs"] = "in.tensor";
    CHECK_KF_ERROR(parse_tasks(d.path(), {t}), ErrorCode::ParseError);

    CHECK_KF_ERROR(parse_tasks(d.path(), {ok}).at("zzz"), ErrorCode::ValidationError);
    CHECK_KF_ERROR(load_manifest(d.path() / "none.json"), ErrorCode::IoError);
}

TEST_CASE("190-task histogram") {
    const std::vector<std::pair<std::string, std::size_t>> counts = {
        {"Unary", 11},   {"Binary", 8},    {"Trigonometry", 12}, {"Activation", 12}, {"Normalization", 12},
        {"Pooling", 15}, {"Convolution", 21}, {"Matrix", 19},    {"Reduction", 35},  {"Tensor", 28},
        {"Logic", 13},   {"Others", 4}};
    kft::TempDir d;
    json tasks = json::array();
    for (const auto& [cat, n] : counts)
        for (std::size_t i = 0; i < n; ++i) tasks.push_back(task_json(d.path(), cat + std::to_string(i), cat));
    write_text_file(d.path() / "manifest.json", json{{"schema_version", "1"}, {"tasks", tasks}}.dump());
    auto m = load_manifest(d.path() / "manifest.json");
    CHECK(m.tasks.size() == 190);
    auto h = category_histogram(m);
    for (const auto& [cat, n] : counts) CHECK(h.at(*parse_category(cat)) == n);
    // relative paths were anchored at the manifest
    CHECK(m.tasks[0].reference_graph == d.path() / "g.json");
}

}

TEST_SUITE("framework_config") {

TEST_CASE("toy config") {
    auto cfg = load_framework_config_for(kft::fixture("toyfw"));
    CHECK(cfg.locate("Relu")->size() == 2);
    CHECK(cfg.locate("relu") == cfg.locate("Relu"));
    CHECK_FALSE(cfg.locate("Conv").has_value());
    CHECK(cfg.build.timeout_s == 60);
    CHECK(cfg.runner.binary == "build/kf_runner");
}

TEST_CASE("config errors") {
    CHECK_KF_ERROR(parse_framework_config("["), ErrorCode::ParseError);
    CHECK_KF_ERROR(parse_framework_config(R"({"operators": {"A": ["../x.cpp"]}})"), ErrorCode::ValidationError);
    CHECK_KF_ERROR(parse_framework_config(R"({"build": {"jobs": 0}})"), ErrorCode::ValidationError);
    CHECK_KF_ERROR(parse_framework_config(R"({"build": {"timeout_s": -1}})"), ErrorCode::ValidationError);
    CHECK_KF_ERROR(parse_framework_config(R"({"bogus": 1})"), ErrorCode::ValidationError);
    CHECK_KF_ERROR(load_framework_config_for("/nonexistent"), ErrorCode::IoError);
}

}

TEST_SUITE("workspace") {

TEST_CASE("candidate stages") {
    KernelCandidate c;
    c.advance(CandidateStage::Compiled);
    c.advance(CandidateStage::Verified);
    CHECK_KF_ERROR(c.advance(CandidateStage::Compiled), ErrorCode::InvalidArgument);
    c.advance(CandidateStage::Failed);
    CHECK_KF_ERROR(c.advance(CandidateStage::Failed), ErrorCode::InvalidArgument);
    CHECK(is_valid_transition(CandidateStage::Generated, CandidateStage::Failed));
    CHECK_FALSE(is_valid_transition(CandidateStage::Generated, CandidateStage::Verified));
    CHECK(parse_stage("Benchmarked") == CandidateStage::Benchmarked);
}

TEST_CASE("candidate file set") {
    auto toy = kft::make_toy_framework();
    auto c = kft::relu_candidate(toy->relu(), "correct", 1);
    CHECK_NOTHROW(validate_candidate(c, toy->relu()));
    auto extra = c;
    extra.files.emplace_back("Other.cpp", "");
    CHECK_KF_ERROR(validate_candidate(extra, toy->relu()), ErrorCode::ExtraneousFile);
    auto dup = c;
    dup.files[1].first = "CPURelu.hpp";
    CHECK_KF_ERROR(validate_candidate(dup, toy->relu()), ErrorCode::ValidationError);
    auto missing = c;
    missing.files.pop_back();
    CHECK_KF_ERROR(validate_candidate(missing, toy->relu()), ErrorCode::MissingFile);
}

TEST_CASE("load_candidate_dir") {
    auto toy = kft::make_toy_framework();
    kft::TempDir d;
    write_text_file(d.path() / "CPURelu.hpp", "h");
    CHECK_KF_ERROR(load_candidate_dir(d.path(), toy->relu()), ErrorCode::MissingFile);
    write_text_file(d.path() / "CPURelu.cpp", "c");
    auto c = load_candidate_dir(d.path(), toy->relu(), 3);
    CHECK(c.iteration == 3);
    CHECK(*c.file("CPURelu.cpp") == "c");
    CHECK_KF_ERROR(load_candidate_dir(d.path() / "none", toy->relu()), ErrorCode::IoError);
}

TEST_CASE("inject and restore") {
    auto toy = kft::make_toy_framework();
    auto ws = Workspace::open(toy->root);
    auto before = kft::snapshot(toy->root);
    auto c = kft::relu_candidate(toy->relu(), "wrong", 5);
    inject(ws, toy->relu(), c, toy->config);
    CHECK(ws.is_injected());
    CHECK(read_text_file(toy->root / "source/backend/cpu/CPURelu.cpp") == c.files[1].second);
    CHECK_KF_ERROR(inject(ws, toy->relu(), c, toy->config), ErrorCode::AlreadyInjected);
    CHECK_KF_ERROR(clone_workspace(ws, "x"), ErrorCode::CloneOfInjected);

    // a second process sees the injection
    auto again = Workspace::open(toy->root);
    CHECK(again.is_injected());
    CHECK(again.injected()->task_id == "relu");
    restore(again);
    CHECK(kft::snapshot(toy->root) == before);
    CHECK_KF_ERROR(restore(again), ErrorCode::NothingInjected);
}

TEST_CASE("guard restores on exceptions") {
    auto toy = kft::make_toy_framework();
    auto ws = Workspace::open(toy->root);
    auto before = kft::snapshot(toy->root);
    try {
        InjectionGuard g(ws, toy->relu(), kft::relu_candidate(toy->relu(), "crash", 1), toy->config);
        throw std::runtime_error("midway");
    } catch (const std::runtime_error&) {
    }
    CHECK_FALSE(ws.is_injected());
    CHECK(kft::snapshot(toy->root) == before);
}

TEST_CASE("target resolution") {
    auto toy = kft::make_toy_framework();
    CHECK(resolve_targets(toy->relu(), toy->config, toy->root) ==
          std::vector<std::string>{"source/backend/cpu/CPURelu.hpp", "source/backend/cpu/CPURelu.cpp"});
    auto t = toy->relu();
    t.operator_name = "Conv";
    CHECK_KF_ERROR(resolve_targets(t, toy->config, toy->root), ErrorCode::TargetNotFound);
    fs::remove(toy->root / "source/geometry/GeometrySoftmax.cpp");
    CHECK_KF_ERROR(resolve_targets(toy->softmax(), toy->config, toy->root), ErrorCode::TargetNotFound);
    auto ws = Workspace::open(toy->root);
    CHECK_KF_ERROR(inject(ws, toy->softmax(), KernelCandidate{"softmax", 0, {{"GeometrySoftmax.cpp", ""}}}, toy->config),
                   ErrorCode::TargetNotFound);
    CHECK_FALSE(ws.is_injected());
}

TEST_CASE("clones get unique names") {
    auto toy = kft::make_toy_framework();
    auto ws = Workspace::open(toy->root);
    kft::TempDir parent;
    auto a = clone_workspace(ws, "w 1", parent.path());
    auto b = clone_workspace(ws, "w 1", parent.path());
    CHECK(a.root() != b.root());
    CHECK(a.root().parent_path() == parent.path());
    CHECK(kft::snapshot(a.root()) == kft::snapshot(toy->root));
}

}

TEST_SUITE("cli") {

TEST_CASE("reward") {
    auto r = kfh({"reward", "--compiled", "--correct", "--baseline-ms", "0.409", "--generated-ms", "0.06"});
    CHECK(r.exit_code == 0);
    CHECK(r.out == "7.416667\n");
    CHECK(kfh({"reward", "--compiled"}).out == "0.300000\n");
    CHECK(kfh({"reward", "--correct", "--baseline-ms", "1", "--generated-ms", "1"}).exit_code == 4);
}

TEST_CASE("bad arguments exit 4") {
    CHECK(kfh({"eval"}).exit_code == 4);
    CHECK(kfh({"nonsense"}).exit_code == 4);
    CHECK(kfh({"--help"}).exit_code == 0);
}

TEST_CASE("validate") {
    auto toy = kft::make_toy_framework();
    auto r = kfh({"validate", "--manifest", toy->manifest_path.string(), "--framework-root", toy->root.string()});
    CHECK(r.exit_code == 0);
    auto j = json::parse(r.out);
    CHECK(j["tasks"] == 2);
    CHECK(j["categories"]["Activation"] == 2);
    CHECK(j["unresolved"].empty());

    fs::remove(toy->root / "source/geometry/GeometrySoftmax.cpp");
    r = kfh({"validate", "--manifest", toy->manifest_path.string(), "--framework-root", toy->root.string()});
    CHECK(r.exit_code == 4);
    CHECK(json::parse(r.out)["unresolved"][0]["task"] == "softmax");
}

TEST_CASE("eval exit codes and report") {
    auto toy = kft::make_toy_framework(0.8);
    kft::TempDir d;
    auto write_cand = [&](const std::string& name, const std::string& behavior, int us, const std::string& err = {}) {
        write_text_file(d.path() / name / "CPURelu.hpp", kft::relu_header());
        write_text_file(d.path() / name / "CPURelu.cpp", kft::relu_source(behavior, us, err));
        return (d.path() / name).string();
    };
    auto good = write_cand("good", "correct", 400);
    auto wrong = write_cand("wrong", "wrong", 400);
    auto broken = write_cand("broken", "correct", 400, "here:here: boom");
    const std::string results = (d.path() / "results.jsonl").string();
    std::vector<std::string> common = {"--manifest", toy->manifest_path.string(), "--framework-root", toy->root.string(),
                                       "--task", "relu", "--iters", "3", "--busy-threshold", "1.0", "-q",
                                       "--results", results};
    auto with = [&](std::vector<std::string> extra) {
        std::vector<std::string> a = {"eval"};
        a.insert(a.end(), common.begin(), common.end());
        a.insert(a.end(), extra.begin(), extra.end());
        return kfh(a);
    };

    auto ok = with({"--candidate", good});
    CHECK(ok.exit_code == 0);
    CHECK(json::parse(ok.out)["speedup"].get<double>() == doctest::Approx(2.0));
    CHECK(with({"--candidate", broken}).exit_code == 2);
    CHECK(with({"--candidate", wrong}).exit_code == 3);
    auto many = with({"--candidate", good, "--candidate", wrong, "--no-bench"});
    CHECK(many.exit_code == 3);
    CHECK(json::parse(many.out).size() == 2);

    auto rep = kfh({"report", "--results", results, "--out", (d.path() / "rep.json").string()});
    CHECK(rep.exit_code == 0);
    CHECK(rep.out.find("Overall") != std::string::npos);
    auto j = json::parse(read_text_file(d.path() / "rep.json"));
    CHECK(j["n_tasks"] == 1);
    CHECK(fs::exists(d.path() / "rep.txt"));

    write_text_file(d.path() / "empty.jsonl", "");
    CHECK(kfh({"report", "--results", (d.path() / "empty.jsonl").string()}).exit_code == 4);
}

TEST_CASE("agent replays a transcript") {
    auto toy = kft::make_toy_framework(0.8);
    kft::TempDir d;
    write_text_file(d.path() / "t.json", json{kft::answer_relu("correct", 400)}.dump());
    auto r = kfh({"agent", "--manifest", toy->manifest_path.string(), "--framework-root", toy->root.string(),
                  "--task", "relu", "--banks", kft::fixture("banks/banks.json").string(), "--transcript",
                  (d.path() / "t.json").string(), "--max-iters", "1", "--iters", "3", "--busy-threshold", "1.0",
                  "-q", "--memory", (d.path() / "mem.json").string()});
    CHECK(r.exit_code == 0);
    auto j = json::parse(r.out);
    CHECK(j["candidates"].size() == 1);
    CHECK(fs::exists(d.path() / "mem.json"));
}

TEST_CASE("workspace commands") {
    auto toy = kft::make_toy_framework();
    kft::TempDir parent;
    auto r = kfh({"workspace", "clone", "--root", toy->root.string(), "--label", "a", "--parent",
                  parent.path().string()});
    CHECK(r.exit_code == 0);
    fs::path clone = r.out.substr(0, r.out.size() - 1);
    CHECK(fs::is_directory(clone));

    CHECK(kfh({"workspace", "restore", "--root", clone.string()}).exit_code == 4);
    auto ws = Workspace::open(clone);
    inject(ws, toy->relu(), kft::relu_candidate(toy->relu(), "wrong", 1), toy->config);
    CHECK(kfh({"workspace", "restore", "--root", clone.string()}).exit_code == 0);
    CHECK_FALSE(Workspace::open(clone).is_injected());
}

}
