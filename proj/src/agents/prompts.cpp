#include "kf/agents/prompts.hpp"

#include "kf/error.hpp"
#include "kf/fsutil.hpp"

#include <cstdio>
#include <sstream>

namespace fs = std::filesystem;

namespace kf {

using nlohmann::json;

namespace {

BankEntry load_entry(const json& j, const fs::path& base, const std::string& where) {
    if (j.is_string()) {
        fs::path p = j.get<std::string>();
        if (p.is_relative()) p = base / p;
        try {
            return {p.filename().string(), read_text_file(p)};
        } catch (const Error& e) {
            fail(ErrorCode::ParseError, where + ": " + e.detail());
        }
    }
    if (j.is_object() && j.contains("name") && j.contains("text") && j["name"].is_string() && j["text"].is_string())
        return {j["name"].get<std::string>(), j["text"].get<std::string>()};
    fail(ErrorCode::ParseError, where + ": entry must be a path or {\"name\", \"text\"}");
}

}  // namespace

PromptBanks parse_banks(const json& doc, const fs::path& base_dir) {
    if (!doc.is_object()) fail(ErrorCode::ParseError, "prompt banks must be an object");
    PromptBanks banks;
    if (doc.contains("headers")) {
        for (const auto& [name, entries] : doc["headers"].items()) {
            auto c = parse_category(name);
            if (!c) fail(ErrorCode::ParseError, "prompt banks: unknown category '" + name + "'");
            if (!entries.is_array()) fail(ErrorCode::ParseError, "prompt banks: headers." + name + " must be a list");
            auto& list = banks.headers[*c];
            for (size_t i = 0; i < entries.size(); ++i)
                list.push_back(load_entry(entries[i], base_dir, "headers." + name + "[" + std::to_string(i) + "]"));
        }
    }
    if (doc.contains("examples")) {
        for (const auto& [name, entry] : doc["examples"].items()) {
            auto m = parse_mechanism(name);
            if (!m) fail(ErrorCode::ParseError, "prompt banks: unknown mechanism '" + name + "'");
            banks.examples[*m] = load_entry(entry, base_dir, "examples." + name);
        }
    }
    return banks;
}

PromptBanks load_banks(const fs::path& path) {
    json doc;
    try {
        doc = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        fail(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
    return parse_banks(doc, path.parent_path());
}

std::string operator_info(const TaskSpec& task) {
    std::ostringstream out;
    out << "name: " << task.operator_name << "\n";
    out << "category: " << to_string(task.category) << "\n";
    out << "implementation type: " << to_string(task.mechanism) << "\n";
    if (!task.attributes.empty()) {
        out << "attributes:";
        for (const auto& [k, v] : task.attributes.values()) out << " " << k << "=" << v;
        out << "\n";
    }
    if (!task.description.empty()) out << "description: " << task.description << "\n";
    if (task.reference_model) {
        std::string src;
        try {
            src = read_text_file(*task.reference_model);
        } catch (const Error&) {
        }
        if (!src.empty()) out << "reference model:\n```python\n" << src << (src.back() == '\n' ? "" : "\n") << "```\n";
    }
    return out.str();
}

std::string file_instruction(const TaskSpec& task) {
    const auto& names = task.target_file_names;
    std::string list;
    for (size_t i = 0; i < names.size(); ++i) {
        if (i > 0) list += i + 1 == names.size() ? " and " : ", ";
        list += names[i];
    }
    if (names.size() == 1) return "Please write the " + list + " file as a single code block.";
    return "Please write the " + list + " files separately, each in its own code block.";
}

std::string render_code_book(const KernelCandidate& candidate) {
    std::string out;
    for (const auto& [name, text] : candidate.files) {
        out += "```cpp\n// " + name + "\n" + text;
        if (!text.empty() && text.back() != '\n') out += "\n";
        out += "```\n";
    }
    return out;
}

namespace {

const char* mechanism_guidance(Mechanism m) {
    switch (m) {
        case Mechanism::Atomic:
            return "- This is a CPU backend kernel: provide a header with the execution class declaration and a "
                   "source file with its implementation. Implement onResize (acquire and release scratch buffers "
                   "through the backend) and onExecute (validate inputs, compute, return NO_ERROR). Register the "
                   "creator at the end of the source file.\n";
        case Mechanism::Geometric:
            return "- This is a geometry operator: implement onCompute so that it describes how output regions are "
                   "assembled from input regions, using virtual tensors for intermediates.\n";
        case Mechanism::Composite:
            return "- This is a composite operator: implement onExecute so that it rebuilds the node as a subgraph "
                   "of existing operators through the expression API.\n";
    }
    return "";
}

}  // namespace

std::string build_initial_prompt(const TaskSpec& task, const PromptBanks& banks) {
    auto h = banks.headers.find(task.category);
    if (h == banks.headers.end() || h->second.empty())
        fail(ErrorCode::MissingBankEntry, "no header context for category " + std::string(to_string(task.category)));
    auto ex = banks.examples.find(task.mechanism);
    if (ex == banks.examples.end())
        fail(ErrorCode::MissingBankEntry, "no one-shot example for mechanism " + std::string(to_string(task.mechanism)));

    std::ostringstream out;
    out << "## Role\n"
        << "You are a model-deployment engineer fluent in PyTorch and C++ and in the conventions of the target "
           "inference framework. The reference model below is exported to an operator graph and run by the "
           "framework's CPU backend. Write the C++ operator that implements it, correctly first and then fast.\n\n";

    out << "## Constraints\n"
        << "- Answer with code only: no explanations, no commentary outside the code blocks.\n"
        << "- Call only the framework's public APIs (tensor, math and expression helpers); do not invent members.\n"
        << "- The file name must be the very first line inside each code block.\n"
        << "- Keep the kernel self-contained; avoid third-party libraries and unnecessary framework coupling.\n"
        << mechanism_guidance(task.mechanism) << "\n";

    out << "## Framework headers for " << to_string(task.category) << " operators\n";
    for (const auto& e : h->second) {
        out << "```cpp\n// " << e.name << "\n" << e.text;
        if (!e.text.empty() && e.text.back() != '\n') out << "\n";
        out << "```\n";
    }
    out << "\n";

    out << "## Example (" << to_string(task.mechanism) << " operator)\n"
        << "----- example begin -----\n"
        << ex->second.text << (ex->second.text.empty() || ex->second.text.back() == '\n' ? "" : "\n")
        << "----- example end -----\n\n";

    out << "## Your task\n" << operator_info(task) << "\n";
    out << "Implement the " << to_string(task.mechanism) << " version of " << task.operator_name
        << " for the CPU backend. " << file_instruction(task) << "\n";
    return out.str();
}

std::string build_repair_prompt(const TaskSpec& task, const KernelCandidate& candidate,
                                const nlohmann::ordered_json& diagnosis) {
    std::ostringstream out;
    out << "## Operator\n" << operator_info(task) << "\n";
    out << "## Current implementation\n" << render_code_book(candidate) << "\n";
    out << "## Compilation errors\n"
        << "local_error entries point into the files above; crossfile_error entries point into framework files "
           "that the current code uses incorrectly.\n"
        << "```json\n" << diagnosis.dump(2) << "\n```\n\n";
    out << "## What to do\n"
        << "Work out why the build failed and describe how to change the current code so that it compiles.\n"
        << "- Give suggestions in plain text, no code.\n"
        << "- Cover every error listed above.\n"
        << "- Keep each suggestion short and direct.\n"
        << "- Only the current files may change. Framework files are correct and serve as reference.\n"
        << "- For local errors, fix the code shown in the error context.\n"
        << "- For cross-file errors, read the referenced declarations and adapt the calls in the current code.\n\n"
        << "Reply with this block:\n"
        << "```error_suggestion\n"
        << "{\n"
        << "  \"local_error_suggestion\": [\"...\"],\n"
        << "  \"crossfile_error_suggestion\": [\"...\"]\n"
        << "}\n"
        << "```\n";
    return out.str();
}

std::string build_correction_prompt(const TaskSpec& task, const KernelCandidate& candidate,
                                    const std::string& exec_error, const json& reference_graph,
                                    const std::optional<json>& target_graph,
                                    const std::vector<GraphMismatch>& mismatches) {
    std::ostringstream out;
    out << "## Operator\n" << operator_info(task) << "\n";
    out << "## Current implementation\n" << render_code_book(candidate) << "\n";
    out << "## Test failure\n"
        << "The code compiles, but its results do not match the reference.\n"
        << "```\n" << exec_error << (exec_error.empty() || exec_error.back() == '\n' ? "" : "\n") << "```\n\n";
    out << "## Reference graph\n```json\n" << reference_graph.dump(2) << "\n```\n\n";
    out << "## Graph reported by the built operator\n```json\n"
        << (target_graph ? target_graph->dump(2) : std::string("{\"unavailable\": true}")) << "\n```\n\n";
    if (!mismatches.empty()) {
        out << "## Graph differences\n";
        for (const auto& m : mismatches)
            out << "- " << m.path << ": reference " << m.reference_value << ", built " << m.target_value << " ("
                << to_string(m.severity) << ")\n";
        out << "\n";
    }
    out << "## What to do\n"
        << "Compare the two graphs and the failure above, find the logic error, and describe how to fix the "
           "current code.\n"
        << "- Give suggestions in plain text, no code.\n"
        << "- Keep each suggestion short and direct.\n"
        << "- Only the current files may change. Framework files are correct and serve as reference.\n\n"
        << "Reply with this block:\n"
        << "```functionality_suggestion\n"
        << "{\n"
        << "  \"suggestion1\": \"...\",\n"
        << "  \"suggestion2\": \"...\"\n"
        << "}\n"
        << "```\n";
    return out.str();
}

std::string build_acceleration_prompt(const TaskSpec& task, const KernelCandidate& candidate,
                                      const std::optional<PerfProfile>& perf, std::optional<double> sp,
                                      const std::vector<OptimisationRecord>& history) {
    std::ostringstream out;
    out << "## Role\n"
        << "You are a performance engineer for mobile inference kernels. The operator below is correct; make it "
           "faster.\n\n";
    out << "## Operator\n" << operator_info(task) << "\n";
    out << "## Current implementation\n" << render_code_book(candidate) << "\n";
    out << "## Measured performance\n";
    if (perf) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "mean latency: %.4f ms\nmedian latency: %.4f ms\niterations: %zu (after %d warm-up)\n",
                      perf->mean_ms, perf->median_ms, perf->samples_us.size(), perf->warmup_count);
        out << buf << "backend: " << perf->backend << "\nthreads: " << perf->threads << "\n";
    } else {
        out << "latency not measured in this run\n";
    }
    if (sp) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "speedup over the native kernel: %.2fx\n", *sp);
        out << buf;
    }
    out << "\n## Earlier optimisation attempts on " << to_string(task.category) << " operators\n";
    if (history.empty()) out << "(none yet)\n";
    for (const auto& h : history)
        out << "- " << h.task_id << " iteration " << h.iteration << ": method \"" << h.plan.method
            << "\" (bottleneck: " << h.plan.bottleneck << ") -> " << h.outcome << "\n";
    out << "\n## What to do\n"
        << "Identify exactly one bottleneck, the one with the highest impact on speed, and propose exactly one "
           "optimisation method for it together with a modification plan.\n"
        << "- Return one and only one method: the one with the largest expected speedup.\n"
        << "- Keep every field brief and technical; no alternatives, caveats or generic advice.\n"
        << "- Do not repeat a method already listed in the earlier attempts.\n\n"
        << "Reply with this block:\n"
        << "```json\n"
        << "{\n"
        << "  \"bottleneck\": \"<at most 100 words>\",\n"
        << "  \"optimisation method\": \"<at most 100 words>\",\n"
        << "  \"modification plan\": \"<at most 100 words>\"\n"
        << "}\n"
        << "```\n";
    return out.str();
}

std::string build_refinement_prompt(const TaskSpec& task, const KernelCandidate& candidate, const AgentPlan& plan,
                                    const std::string& note) {
    std::ostringstream out;
    out << "## Operator\n" << operator_info(task) << "\n";
    out << "## Current implementation\n" << render_code_book(candidate) << "\n";
    if (plan.kind == PlanKind::Acceleration) {
        out << "## Optimisation plan\n"
            << "The code is correct. Apply the plan below to reduce latency without changing results.\n"
            << render_plan(plan) << "\n";
    } else {
        out << "## Repair suggestions\n"
            << "The code is broken. Apply the suggestions below so that it "
            << (plan.kind == PlanKind::Repair ? "compiles" : "produces correct results") << ".\n"
            << render_plan(plan) << "\n";
    }
    if (!note.empty()) out << "## Note\n" << note << "\n\n";
    out << "## Output\n"
        << "Return only the complete updated code, no explanations. The file name must be the very first line "
           "inside each code block. "
        << file_instruction(task) << "\n";
    return out.str();
}

std::string format_reminder(PlanKind kind) {
    return "\n\nYour previous answer could not be parsed. Reply again with exactly one ```" +
           std::string(block_tag(kind)) + " block containing valid JSON in the requested shape.\n";
}

std::string candidate_format_reminder(const TaskSpec& task) {
    return "\n\nYour previous answer could not be parsed. Reply again with one fenced code block per file whose "
           "first line is the file name. " +
           file_instruction(task) + "\n";
}

}  // namespace kf
