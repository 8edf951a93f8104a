#include "kf/verification.hpp"

#include "kf/error.hpp"
#include "kf/fsutil.hpp"
#include "kf/operator_runner.hpp"

#include <cmath>
#include <sstream>

namespace fs = std::filesystem;

namespace kf {

namespace {

std::string shape_text(const Shape& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
    return out + "]";
}

double element_diff(const Tensor& a, const Tensor& e, std::size_t i) {
    if (a.is_integral()) return a.as_int(i) == e.as_int(i) ? 0.0 : 1.0;
    double x = a.as_double(i);
    double y = e.as_double(i);
    if (std::isnan(x) || std::isnan(y)) return (std::isnan(x) && std::isnan(y)) ? 0.0 : kMismatchSentinel;
    if (std::isinf(x) || std::isinf(y)) return x == y ? 0.0 : kMismatchSentinel;
    return std::fabs(x - y);
}

}  // namespace

VerifyResult compare_tensors(const Tensor& actual, const Tensor& expected, double tolerance, ToleranceMode mode) {
    if (!(tolerance > 0.0)) fail(ErrorCode::InvalidArgument, "tolerance must be positive");
    VerifyResult r;
    r.tolerance = tolerance;
    if (actual.dtype() != expected.dtype() || actual.shape() != expected.shape()) {
        r.passed = false;
        r.shape_mismatch = true;
        r.max_abs_diff = kMismatchSentinel;
        r.mismatch_count = std::max(actual.size(), expected.size());
        r.detail = "expected " + std::string(to_string(expected.dtype())) + shape_text(expected.shape()) + ", got " +
                   std::string(to_string(actual.dtype())) + shape_text(actual.shape());
        return r;
    }
    for (std::size_t i = 0; i < expected.size(); ++i) {
        double d = element_diff(actual, expected, i);
        r.max_abs_diff = std::max(r.max_abs_diff, d);
        double allowed = tolerance;
        if (mode == ToleranceMode::Relative) allowed = tolerance * std::max(1.0, std::fabs(expected.as_double(i)));
        // Float tensors are judged at their own precision: 1e-4 itself is not a float.
        bool exceeds = expected.is_integral() ? d > 0.0 : static_cast<float>(d) > static_cast<float>(allowed);
        if (exceeds) {
            ++r.mismatch_count;
            if (!r.first_mismatch_index) r.first_mismatch_index = i;
        }
    }
    r.passed = r.mismatch_count == 0;
    if (!r.passed) {
        std::ostringstream ss;
        ss << r.mismatch_count << " of " << expected.size() << " elements exceed tolerance " << tolerance
           << " (max |diff| " << r.max_abs_diff << ", first at index " << *r.first_mismatch_index << ")";
        r.detail = ss.str();
    }
    return r;
}

VerifyResult run_verification(const Workspace& ws, const FrameworkConfig& config, const TaskSpec& task,
                              Transport& transport, const VerifyOptions& options) {
    StagedOperator op(ws, config, task, transport);
    auto exec = op.run(1, 0, options.timeout_s);
    if (exec.timed_out || exec.exit_code != 0) {
        std::string status = exec.timed_out ? "timed out" : "exit status " + std::to_string(exec.exit_code);
        fail(ErrorCode::ExecutionFailure, "operator runner " + status + "\n" + exec.err + exec.out);
    }

    fs::path local = make_temp_dir("kf-verify-");
    struct Cleanup {
        fs::path p;
        ~Cleanup() {
            std::error_code ec;
            fs::remove_all(p, ec);
        }
    } cleanup{local};

    VerifyResult total;
    total.tolerance = options.tolerance;
    total.passed = true;
    std::size_t offset = 0;
    for (std::size_t k = 0; k < task.reference_outputs.size(); ++k) {
        const std::string name = StagedOperator::output_name(k);
        try {
            transport.pull(op.out_dir() + "/" + name, local / name);
        } catch (const Error& e) {
            fail(ErrorCode::OutputMissing, "runner produced no " + name + ": " + e.detail());
        }
        Tensor actual = read_tensor(local / name);
        Tensor expected = read_tensor(task.reference_outputs[k]);
        VerifyResult r = compare_tensors(actual, expected, options.tolerance, options.mode);
        total.max_abs_diff = std::max(total.max_abs_diff, r.max_abs_diff);
        total.mismatch_count += r.mismatch_count;
        total.shape_mismatch = total.shape_mismatch || r.shape_mismatch;
        if (!r.passed) {
            if (total.passed) {
                total.detail = name + ": " + r.detail;
                if (r.first_mismatch_index) total.first_mismatch_index = offset + *r.first_mismatch_index;
            }
            total.passed = false;
        }
        offset += expected.size();
    }
    return total;
}

}  // namespace kf
