#include "check_error.hpp"
#include "test_support.hpp"

#include "kf/agents/episode.hpp"
#include "kf/agents/llm_client.hpp"
#include "kf/agents/plan.hpp"
#include "kf/agents/prompts.hpp"
#include "kf/fsutil.hpp"

#include <doctest.h>
#include <httplib.h>

#include <cstdlib>
#include <thread>

using namespace kf;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool has(const std::string& hay, const std::string& needle) { return hay.find(needle) != std::string::npos; }

EpisodeOptions quick_episode() {
    EpisodeOptions o;
    o.pipeline.bench.iters = 3;
    o.pipeline.bench.warmup = 0;
    o.pipeline.bench.gate.sleep = [](double) {};
    return o;
}

}  // namespace

TEST_SUITE("plans") {

TEST_CASE("fenced blocks") {
    auto blocks = find_fenced_blocks("intro\nCPURelu.cpp\n```cpp\nint x;\n```\ntext\n```json\n{}\n");
    REQUIRE(blocks.size() == 2);
    CHECK(blocks[0].tag == "cpp");
    CHECK(blocks[0].body == "int x;\n");
    CHECK(blocks[0].preceding_line == "CPURelu.cpp");
    CHECK(blocks[0].closed);
    CHECK(blocks[1].tag == "json");
    CHECK_FALSE(blocks[1].closed);
}

TEST_CASE("lenient json") {
    auto j = parse_lenient_json("{{\n# note\n\"a\": [1, 2,],\n\"b\": \"x\",\n}}");
    CHECK(j["a"].size() == 2);
    CHECK(j["b"] == "x");
    CHECK(parse_lenient_json("{ {\"k\": 1} }")["k"] == 1);
    CHECK_THROWS(parse_lenient_json("{\"k\": }"));
}

TEST_CASE("repair plan") {
    auto p = parse_plan(kft::answer_repair_plan("declare foo"), PlanKind::Repair);
    CHECK(p.kind == PlanKind::Repair);
    REQUIRE(p.repair.has_value());
    CHECK(p.repair->local_suggestions == std::vector<std::string>{"declare foo"});
    CHECK(p.repair->crossfile_suggestions.empty());
    CHECK_FALSE(p.correction.has_value());
    CHECK(plan_from_json(to_json(p)) == p);
    CHECK(has(render_plan(p), "declare foo"));
}

TEST_CASE("correction plan keeps step order") {
    auto p = parse_plan("```functionality_suggestion\n{\"step1\": \"a\", \"step2\": [\"b\", \"c\"]}\n```",
                        PlanKind::Correction);
    CHECK(*p.correction == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("acceleration plan normalises keys") {
    auto p = parse_plan("```json\n{\"Bottleneck\": \"scalar loop\", \"optimization_method\": \"NEON\","
                        " \"modification-plan\": \"vectorise by 4\"}\n```",
                        PlanKind::Acceleration);
    CHECK(p.acceleration->bottleneck == "scalar loop");
    CHECK(p.acceleration->method == "NEON");
    CHECK(p.acceleration->plan == "vectorise by 4");
}

TEST_CASE("last matching block wins") {
    std::string text = kft::answer_repair_plan("first") + "\nrevised:\n" + kft::answer_repair_plan("second");
    CHECK(parse_plan(text, PlanKind::Repair).repair->local_suggestions[0] == "second");
}

TEST_CASE("plan errors") {
    CHECK_KF_ERROR(parse_plan("no blocks here", PlanKind::Repair), ErrorCode::NoBlockFound);
    CHECK_KF_ERROR(parse_plan(kft::answer_repair_plan("x"), PlanKind::Correction), ErrorCode::NoBlockFound);
    CHECK_KF_ERROR(parse_plan("```error_suggestion\n{\"unrelated\": 1}\n```", PlanKind::Repair), ErrorCode::MalformedPlan);
    CHECK_KF_ERROR(parse_plan("```json\n{\"bottleneck\": \"a\", \"optimisation method\": [\"b\", \"c\"],"
                              " \"modification plan\": \"d\"}\n```",
                              PlanKind::Acceleration),
                   ErrorCode::MalformedPlan);
    CHECK_KF_ERROR(parse_plan("```functionality_suggestion\n{}\n```", PlanKind::Correction), ErrorCode::MalformedPlan);
    try {
        parse_plan("```json\n{not json\n```", PlanKind::Acceleration);
        FAIL("no throw");
    } catch (const PlanParseError& e) {
        CHECK(has(e.raw_block(), "{not json"));
    }
}

TEST_CASE("candidate parsing") {
    auto toy = kft::make_toy_framework();
    auto c = parse_candidate(kft::answer_relu("correct", 100), toy->relu(), 4);
    CHECK(c.iteration == 4);
    REQUIRE(c.files.size() == 2);
    CHECK(c.files[0].first == "CPURelu.hpp");
    CHECK(c.files[1].first == "CPURelu.cpp");
    CHECK(has(c.files[1].second, "@behavior correct"));

    // name on the line before the fence
    auto alt = parse_candidate("CPURelu.hpp:\n```cpp\nA\n```\n**CPURelu.cpp**\n```cpp\nB\n```\n", toy->relu());
    CHECK(alt.files[0].second == "A\n");
    CHECK(alt.files[1].second == "B\n");

    // later blocks override earlier ones
    auto twice = parse_candidate("```cpp\n// CPURelu.hpp\nA\n```\n```cpp\n// CPURelu.cpp\nB\n```\n"
                                 "```cpp\n// CPURelu.cpp\nC\n```\n",
                                 toy->relu());
    CHECK(has(twice.files[1].second, "C"));

    CHECK_KF_ERROR(parse_candidate("```cpp\n// CPURelu.hpp\nA\n```\n", toy->relu()), ErrorCode::MissingFile);
    CHECK_KF_ERROR(parse_candidate(kft::answer_relu("correct", 1) + "```cpp\n// Other.cpp\nX\n```\n", toy->relu()),
                   ErrorCode::ExtraneousFile);
}

}

TEST_SUITE("prompts") {

TEST_CASE("banks load from files and inline entries") {
    auto banks = kft::load_test_banks();
    CHECK(banks.headers.at(OperatorCategory::Activation).size() == 3);
    CHECK(banks.examples.count(Mechanism::Composite) == 1);
    CHECK_FALSE(banks.examples.at(Mechanism::Atomic).text.empty());

    CHECK_KF_ERROR(parse_banks(json{{"headers", {{"Bogus", json::array()}}}}, "."), ErrorCode::ParseError);
    CHECK_KF_ERROR(parse_banks(json{{"examples", {{"atomic", 3}}}}, "."), ErrorCode::ParseError);
    CHECK_KF_ERROR(parse_banks(json::array(), "."), ErrorCode::ParseError);
}

TEST_CASE("initial prompt sections and missing entries") {
    auto toy = kft::make_toy_framework();
    auto banks = kft::load_test_banks();
    auto p = build_initial_prompt(toy->relu(), banks);
    CHECK(has(p, "Relu"));
    CHECK(has(p, "CPURelu.hpp and CPURelu.cpp"));
    CHECK(p.find("Relu") < p.find("CPURelu.hpp and CPURelu.cpp"));
    CHECK(has(file_instruction(toy->softmax()), "GeometrySoftmax.cpp"));

    PromptBanks empty;
    CHECK_KF_ERROR(build_initial_prompt(toy->relu(), empty), ErrorCode::MissingBankEntry);
    auto no_example = banks;
    no_example.examples.erase(Mechanism::Geometric);
    CHECK_KF_ERROR(build_initial_prompt(toy->softmax(), no_example), ErrorCode::MissingBankEntry);
}

TEST_CASE("follow-up prompts carry their inputs") {
    auto toy = kft::make_toy_framework();
    auto cand = kft::relu_candidate(toy->relu(), "correct", 100);

    ErrorRecord e{"CPURelu.cpp", 14, 5, "'foo' was not declared", "ctx", ErrorClass::Local};
    auto repair = build_repair_prompt(toy->relu(), cand, group_errors({e}, "Relu"));
    CHECK(has(repair, "'foo' was not declared"));
    CHECK(has(repair, "error_suggestion"));

    auto corr = build_correction_prompt(toy->relu(), cand, "output mismatch", json{{"nodes", json::array()}},
                                        std::nullopt);
    CHECK(has(corr, "output mismatch"));
    CHECK(has(corr, "functionality_suggestion"));

    OptimisationRecord past{"other", 2, {"b", "unroll", "unroll by 8"}, "Benchmarked, 1.31x"};
    auto acc = build_acceleration_prompt(toy->relu(), cand, std::nullopt, 1.2, {past});
    CHECK(has(acc, "method \"unroll\""));
    CHECK(has(acc, "1.31x"));

    AgentPlan plan;
    plan.kind = PlanKind::Correction;
    plan.correction = std::vector<std::string>{"clamp negatives to zero"};
    auto refine = build_refinement_prompt(toy->relu(), cand, plan, "NOTE-XYZ");
    CHECK(has(refine, "clamp negatives to zero"));
    CHECK(has(refine, "NOTE-XYZ"));
    CHECK(has(refine, "@behavior correct"));

    CHECK(has(format_reminder(PlanKind::Acceleration), "```json"));
    CHECK(has(candidate_format_reminder(toy->relu()), "CPURelu.cpp"));
}

}

TEST_SUITE("llm_client") {

TEST_CASE("scripted client") {
    ScriptedClient c({"a", "b"});
    CHECK(c.complete("p1") == "a");
    CHECK(c.complete("p2") == "b");
    CHECK(c.calls() == 2);
    CHECK(c.prompts() == std::vector<std::string>{"p1", "p2"});
    CHECK_KF_ERROR(c.complete("p3"), ErrorCode::ClientError);
}

TEST_CASE("transcript files") {
    kft::TempDir d;
    write_text_file(d.path() / "a.json", R"(["x", "y"])");
    write_text_file(d.path() / "b.json", R"({"responses": ["z"]})");
    write_text_file(d.path() / "c.json", R"([1])");
    CHECK(ScriptedClient::from_file(d.path() / "a.json")->complete("") == "x");
    CHECK(ScriptedClient::from_file(d.path() / "b.json")->complete("") == "z");
    CHECK_KF_ERROR(ScriptedClient::from_file(d.path() / "c.json"), ErrorCode::ClientError);
    CHECK_KF_ERROR(ScriptedClient::from_file(d.path() / "none.json"), ErrorCode::ClientError);
}

TEST_CASE("split_endpoint") {
    auto p = split_endpoint("http://127.0.0.1:8080/v1/chat/completions");
    CHECK(p.scheme_host_port == "http://127.0.0.1:8080");
    CHECK(p.path == "/v1/chat/completions");
    CHECK(split_endpoint("https://host").path == "/");
    CHECK_KF_ERROR(split_endpoint("host/v1"), ErrorCode::InvalidArgument);
}

TEST_CASE("http client against a local server") {
    httplib::Server srv;
    json seen;
    std::string auth;
    srv.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        seen = json::parse(req.body);
        auth = req.get_header_value("Authorization");
        json reply = {{"choices", {{{"message", {{"role", "assistant"}, {"content", "hello back"}}}}}}};
        res.set_content(reply.dump(), "application/json");
    });
    srv.Post("/broken", [](const httplib::Request&, httplib::Response& res) {
        res.status = 500;
        res.set_content("boom", "text/plain");
    });
    srv.Post("/odd", [](const httplib::Request&, httplib::Response& res) { res.set_content("{}", "application/json"); });
    int port = srv.bind_to_any_port("127.0.0.1");
    std::thread th([&] { srv.listen_after_bind(); });
    srv.wait_until_ready();
    const std::string base = "http://127.0.0.1:" + std::to_string(port);

    HttpClient c(base + "/v1/chat/completions", "sk-test", "m1", 10);
    CHECK(c.complete("hi") == "hello back");
    CHECK(seen["model"] == "m1");
    CHECK(seen["messages"][0]["content"] == "hi");
    CHECK(auth == "Bearer sk-test");

    CHECK_KF_ERROR(HttpClient(base + "/broken", "", "m", 10).complete("x"), ErrorCode::ClientError);
    CHECK_KF_ERROR(HttpClient(base + "/odd", "", "m", 10).complete("x"), ErrorCode::ClientError);
    srv.stop();
    th.join();
    CHECK_KF_ERROR(HttpClient(base + "/v1/chat/completions", "", "m", 2).complete("x"), ErrorCode::ClientError);
}

TEST_CASE("from_env") {
    ::setenv("KF_LLM_ENDPOINT", "http://127.0.0.1:1/v1/chat/completions", 1);
    CHECK(HttpClient::from_env().endpoint() == "http://127.0.0.1:1/v1/chat/completions");
    ::unsetenv("KF_LLM_ENDPOINT");
    CHECK_KF_ERROR(HttpClient::from_env(), ErrorCode::ClientError);
}

}

TEST_SUITE("episode") {

TEST_CASE("routing") {
    EvaluationResult r;
    CHECK(next_role(r) == AgentRole::Debugger);
    CHECK(next_plan_kind(r) == PlanKind::Repair);
    r.compiled = true;
    CHECK(next_plan_kind(r) == PlanKind::Correction);
    r.correct = true;
    CHECK(next_role(r) == AgentRole::Accelerator);
    CHECK(next_plan_kind(r) == PlanKind::Acceleration);
}

TEST_CASE("acceleration loop, memory and repetition warning") {
    auto toy = kft::make_toy_framework(0.8);
    auto ws = Workspace::open(toy->root);
    kft::MockTransport t;
    auto banks = kft::load_test_banks();
    auto plan = kft::answer_acceleration_plan("scalar loop", "unroll", "unroll by 4");
    ScriptedClient client({kft::answer_relu("correct", 400),
                           plan, kft::answer_relu("correct", 200),
                           plan, kft::answer_relu("correct", 100)});
    ReflectiveMemory memory;
    kft::TempDir d;
    auto opts = quick_episode();
    opts.max_iters = 3;
    opts.memory = &memory;
    opts.log_path = d.path() / "episode.jsonl";
    auto res = run_episode(toy->relu(), ws, toy->config, t, client, banks, opts);

    REQUIRE(res.candidates.size() == 3);
    CHECK(res.best == 2);
    CHECK(res.best_result().speedup == doctest::Approx(8.0));
    CHECK(res.history[0].plan == std::nullopt);
    CHECK(res.history[1].plan->kind == PlanKind::Acceleration);
    REQUIRE(res.warnings.size() == 1);
    CHECK(has(res.warnings[0], "repeats iteration 1"));
    // the refinement prompt of iteration 2 carries the note
    CHECK(has(client.prompts()[4], "already tried"));

    auto similar = memory.similar(OperatorCategory::Activation);
    REQUIRE(similar.size() == 2);
    CHECK(similar[0].plan.method == "unroll");
    ReflectiveMemory copy;
    copy.merge_json(memory.to_json());
    CHECK(copy.similar(OperatorCategory::Activation).size() == 2);
    CHECK(copy.similar(OperatorCategory::Unary).empty());

    auto lines = read_text_file(d.path() / "episode.jsonl");
    std::size_t n = 0, pos = 0;
    json last;
    while ((pos = lines.find('\n')) != std::string::npos) {
        last = json::parse(lines.substr(0, pos));
        lines.erase(0, pos + 1);
        ++n;
    }
    CHECK(n == 4);
    CHECK(last["record"] == "episode");
    CHECK_FALSE(ws.is_injected());
}

TEST_CASE("unparseable answers yield a placeholder") {
    auto toy = kft::make_toy_framework(0.8);
    auto ws = Workspace::open(toy->root);
    kft::MockTransport t;
    ScriptedClient client({"no code", "still no code", kft::answer_relu("correct", 800)});
    auto opts = quick_episode();
    opts.max_iters = 2;
    opts.pipeline.skip_benchmark = true;
    auto res = run_episode(toy->relu(), ws, toy->config, t, client, kft::load_test_banks(), opts);
    REQUIRE(res.candidates.size() == 2);
    CHECK(res.candidates[0].first.files.empty());
    CHECK(res.candidates[0].first.stage == CandidateStage::Failed);
    CHECK(res.history[0].notes.size() == 2);
    // with no real candidate yet the coder starts over
    CHECK(res.candidates[1].second.correct);
    CHECK(res.best == 1);
    CHECK(has(client.prompts()[1], "CPURelu.cpp"));
}

TEST_CASE("stop_at ends the episode early") {
    auto toy = kft::make_toy_framework(0.8);
    auto ws = Workspace::open(toy->root);
    kft::MockTransport t;
    ScriptedClient client({kft::answer_relu("wrong", 800), kft::answer_correction_plan("clamp at zero"),
                           kft::answer_relu("correct", 800)});
    auto opts = quick_episode();
    opts.stop_at = CandidateStage::Verified;
    opts.pipeline.skip_benchmark = true;
    auto res = run_episode(toy->relu(), ws, toy->config, t, client, kft::load_test_banks(), opts);
    CHECK(res.candidates.size() == 2);
    CHECK(client.calls() == 3);
    CHECK(has(client.prompts()[1], "functionality_suggestion"));
    CHECK(res.history[1].plan->correction->at(0) == "clamp at zero");
}

TEST_CASE("client failure aborts with the partial result") {
    auto toy = kft::make_toy_framework(0.8);
    auto ws = Workspace::open(toy->root);
    kft::MockTransport t;
    ScriptedClient client({kft::answer_relu("wrong", 800)});
    auto opts = quick_episode();
    opts.pipeline.skip_benchmark = true;
    try {
        run_episode(toy->relu(), ws, toy->config, t, client, kft::load_test_banks(), opts);
        FAIL("no throw");
    } catch (const EpisodeAborted& e) {
        CHECK(e.code() == ErrorCode::ClientError);
        CHECK(e.partial().candidates.size() == 1);
    }
    CHECK_FALSE(ws.is_injected());
}

TEST_CASE("masked json is stable") {
    auto run_once = [] {
        auto toy = kft::make_toy_framework(0.8);
        auto ws = Workspace::open(toy->root);
        kft::MockTransport t;
        ScriptedClient client({kft::answer_relu("correct", 400)});
        auto opts = quick_episode();
        opts.max_iters = 1;
        auto j = to_json(run_episode(toy->relu(), ws, toy->config, t, client, kft::load_test_banks(), opts), true);
        return j;
    };
    auto a = run_once();
    auto b = run_once();
    CHECK(a == b);
    CHECK(a["candidates"][0]["result"]["total_duration_s"] == 0.0);
    CHECK(a["candidates"][0]["result"]["build_duration_s"] == 0.0);
}

}
