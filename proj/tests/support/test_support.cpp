#include "test_support.hpp"

#include "kf/fsutil.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <random>

namespace kft {

using nlohmann::json;

fs::path fixture(const std::string& rel) { return fs::path(KF_TEST_FIXTURES) / rel; }

TempDir::TempDir(const std::string& prefix) : path_(kf::make_temp_dir(prefix)) {}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

namespace oracle {

std::vector<float> relu(const std::vector<float>& x) {
    std::vector<float> y;
    for (float v : x) y.push_back(v < 0.0f ? 0.0f : v);
    return y;
}

std::vector<float> leaky_relu(const std::vector<float>& x, float slope) {
    std::vector<float> y;
    for (float v : x) y.push_back(v < 0.0f ? v * slope : v);
    return y;
}

std::vector<float> softmax_rows(const std::vector<float>& x, std::size_t cols) {
    std::vector<float> y(x.size());
    for (std::size_t r = 0; r * cols < x.size(); ++r) {
        double peak = x[r * cols];
        for (std::size_t c = 1; c < cols; ++c) peak = std::max<double>(peak, x[r * cols + c]);
        double total = 0;
        for (std::size_t c = 0; c < cols; ++c) total += std::exp(x[r * cols + c] - peak);
        for (std::size_t c = 0; c < cols; ++c) y[r * cols + c] = static_cast<float>(std::exp(x[r * cols + c] - peak) / total);
    }
    return y;
}

double reward(bool compiled, bool correct, double tb, double tg, bool shaped) {
    double r = 0;
    if (shaped && compiled) r += 0.3;
    if (correct) r += 0.3 + tb / tg;
    return r;
}

}  // namespace oracle

namespace {

std::vector<float> random_values(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(-2.0f, 2.0f);
    std::vector<float> v(n);
    for (auto& x : v) x = dist(rng);
    return v;
}

const char* kReluPreamble = "#include \"backend/cpu/CPURelu.hpp\"\n";

}  // namespace

std::unique_ptr<ToyFramework> make_toy_framework(double baseline_ms) {
    auto t = std::make_unique<ToyFramework>();
    t->root = t->dir.path() / "toyfw";
    fs::copy(fixture("toyfw"), t->root, fs::copy_options::recursive);

    const fs::path data = t->root / "data";
    const fs::path refs = t->dir.path() / "refs";
    fs::create_directories(refs);

    auto x = random_values(16, 7);
    kf::write_tensor(refs / "relu_in.tensor", kf::Tensor::f32({2, 8}, x));
    kf::write_tensor(refs / "relu_out.tensor", kf::Tensor::f32({2, 8}, oracle::relu(x)));
    kf::write_tensor(data / "Relu" / "correct_0.tensor", kf::Tensor::f32({2, 8}, oracle::relu(x)));
    kf::write_tensor(data / "Relu" / "wrong_0.tensor", kf::Tensor::f32({2, 8}, oracle::leaky_relu(x, 0.1f)));
    fs::copy_file(data / "Relu" / "graph.json", refs / "relu_graph.json");

    auto s = random_values(12, 11);
    kf::write_tensor(refs / "softmax_in.tensor", kf::Tensor::f32({3, 4}, s));
    kf::write_tensor(refs / "softmax_out.tensor", kf::Tensor::f32({3, 4}, oracle::softmax_rows(s, 4)));
    kf::write_tensor(data / "Softmax" / "correct_0.tensor", kf::Tensor::f32({3, 4}, oracle::softmax_rows(s, 4)));
    fs::copy_file(data / "Softmax" / "graph.json", refs / "softmax_graph.json");

    json relu = {{"id", "relu"},
                 {"operator_name", "Relu"},
                 {"category", "Activation"},
                 {"mechanism", "atomic"},
                 {"attributes", {{"slope", 0.0}}},
                 {"reference_graph", "refs/relu_graph.json"},
                 {"reference_inputs", {"refs/relu_in.tensor"}},
                 {"reference_outputs", {"refs/relu_out.tensor"}},
                 {"target_file_names", {"CPURelu.hpp", "CPURelu.cpp"}},
                 {"description", "y = max(x, 0) elementwise"}};
    json softmax = {{"id", "softmax"},
                    {"operator_name", "Softmax"},
                    {"category", "Activation"},
                    {"mechanism", "geometric"},
                    {"attributes", {{"axis", -1}}},
                    {"reference_graph", "refs/softmax_graph.json"},
                    {"reference_inputs", {"refs/softmax_in.tensor"}},
                    {"reference_outputs", {"refs/softmax_out.tensor"}},
                    {"target_file_names", {"GeometrySoftmax.cpp"}}};
    if (baseline_ms > 0) {
        relu["baseline_latency_ms"] = baseline_ms;
        softmax["baseline_latency_ms"] = baseline_ms;
    }
    t->manifest_path = t->dir.path() / "manifest.json";
    kf::write_text_file(t->manifest_path, json{{"schema_version", "1"}, {"tasks", {relu, softmax}}}.dump(2));
    t->manifest = kf::load_manifest(t->manifest_path);
    t->config = kf::load_framework_config_for(t->root);
    return t;
}

std::string relu_header() { return kf::read_text_file(fixture("toyfw/source/backend/cpu/CPURelu.hpp")); }

std::string relu_source(const std::string& behavior, int latency_us, const std::string& error_directive) {
    std::string s = "// @op Relu\n// @behavior " + behavior + "\n// @latency_us " + std::to_string(latency_us) + "\n";
    s += kReluPreamble;
    s += "\nnamespace toy {\n\n"
         "int CPURelu::onResize(const std::vector<Tensor*>& inputs, const std::vector<Tensor*>& outputs) {\n"
         "    outputs[0]->shape = inputs[0]->shape;\n"
         "    outputs[0]->data.resize(inputs[0]->elementSize());\n"
         "    return 0;\n"
         "}\n\n"
         "int CPURelu::onExecute(const std::vector<Tensor*>& inputs, const std::vector<Tensor*>& outputs) {\n"
         "    const float* src = inputs[0]->host();\n"
         "    float* dst = outputs[0]->host();\n";
    if (!error_directive.empty()) s += "    dst[0] = src[0];  // @error " + error_directive + "\n";
    s += "    for (std::size_t i = 0; i < inputs[0]->elementSize(); ++i) {\n"
         "        dst[i] = src[i] > 0.0f ? src[i] : 0.0f;\n"
         "    }\n"
         "    return 0;\n"
         "}\n\n"
         "}  // namespace toy\n";
    return s;
}

kf::KernelCandidate relu_candidate(const kf::TaskSpec& task, const std::string& behavior, int latency_us,
                                   const std::string& error_directive, int iteration) {
    kf::KernelCandidate c;
    c.task_id = task.id;
    c.iteration = iteration;
    c.files = {{"CPURelu.hpp", relu_header()}, {"CPURelu.cpp", relu_source(behavior, latency_us, error_directive)}};
    return c;
}

std::string answer_relu(const std::string& behavior, int latency_us, const std::string& error_directive) {
    return "Here is the implementation.\n\n```cpp\n// CPURelu.hpp\n" + relu_header() + "```\n\n```cpp\n// CPURelu.cpp\n" +
           relu_source(behavior, latency_us, error_directive) + "```\n";
}

std::string answer_repair_plan(const std::string& suggestion) {
    json j = {{"local_error_suggestion", {suggestion}}, {"crossfile_error_suggestion", json::array()}};
    return "```error_suggestion\n" + j.dump(2) + "\n```\n";
}

std::string answer_correction_plan(const std::string& suggestion) {
    json j = {{"step1", suggestion}};
    return "```functionality_suggestion\n" + j.dump(2) + "\n```\n";
}

std::string answer_acceleration_plan(const std::string& bottleneck, const std::string& method, const std::string& plan) {
    json j = {{"bottleneck", bottleneck}, {"optimisation method", method}, {"modification plan", plan}};
    return "```json\n" + j.dump(2) + "\n```\n";
}

kf::PromptBanks load_test_banks() { return kf::load_banks(fixture("banks/banks.json")); }

void MockTransport::script_utilization(std::vector<double> readings) {
    std::lock_guard lk(mu_);
    readings_.assign(readings.begin(), readings.end());
}

double MockTransport::utilization() {
    std::lock_guard lk(mu_);
    ++calls_;
    if (readings_.empty()) return 0.0;
    double v = readings_.front();
    readings_.pop_front();
    return v;
}

int MockTransport::utilization_calls() const {
    std::lock_guard lk(mu_);
    return calls_;
}

std::map<std::string, std::string> snapshot(const fs::path& root, const std::vector<std::string>& skip) {
    std::map<std::string, std::string> out;
    for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator(); ++it) {
        std::string rel = fs::relative(it->path(), root).generic_string();
        std::string first = rel.substr(0, rel.find('/'));
        if (std::find(skip.begin(), skip.end(), first) != skip.end()) {
            if (it->is_directory()) it.disable_recursion_pending();
            continue;
        }
        if (it->is_regular_file()) out[rel] = kf::read_text_file(it->path());
    }
    return out;
}

}  // namespace kft
