#include "kf/transport.hpp"

#include "kf/error.hpp"
#include "kf/fsutil.hpp"
#include "kf/process.hpp"

#include <sstream>
#include <thread>

namespace fs = std::filesystem;

namespace kf {

std::string_view to_string(TransportKind k) { return k == TransportKind::LocalProcess ? "LocalProcess" : "RemoteDevice"; }

void Transport::reset_dir(const std::string& remote) {
    auto rm = exec({"rm", "-rf", remote}, 60.0);
    auto mk = exec({"mkdir", "-p", remote}, 60.0);
    if (mk.exit_code != 0) fail(ErrorCode::IoError, "cannot create " + remote + ": " + mk.err + rm.err);
}

std::string Transport::stage_executable(const fs::path& local, const std::string& name) {
    std::string remote = staging_dir() + "/" + name;
    push(local, remote);
    auto r = exec({"chmod", "755", remote}, 60.0);
    if (r.exit_code != 0) fail(ErrorCode::IoError, "chmod failed for " + remote + ": " + r.err);
    return remote;
}

namespace {

struct CpuTimes {
    unsigned long long busy = 0;
    unsigned long long total = 0;
};

std::optional<CpuTimes> parse_cpu_line(std::string_view stat) {
    std::istringstream in{std::string(stat)};
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("cpu ", 0) != 0) continue;
        std::istringstream fields(line.substr(4));
        std::vector<unsigned long long> v;
        unsigned long long x;
        while (fields >> x) v.push_back(x);
        if (v.size() < 4) return std::nullopt;
        CpuTimes t;
        // user nice system idle iowait irq softirq steal (guest fields are already in user)
        for (size_t i = 0; i < v.size() && i < 8; ++i) t.total += v[i];
        unsigned long long idle = v[3] + (v.size() > 4 ? v[4] : 0);
        t.busy = t.total - idle;
        return t;
    }
    return std::nullopt;
}

}  // namespace

double cpu_busy_fraction(std::string_view stat_before, std::string_view stat_after) {
    auto a = parse_cpu_line(stat_before);
    auto b = parse_cpu_line(stat_after);
    if (!a || !b) fail(ErrorCode::ParseError, "no aggregate cpu line in /proc/stat snapshot");
    if (b->total <= a->total) return 0.0;
    double frac = static_cast<double>(b->busy - a->busy) / static_cast<double>(b->total - a->total);
    return std::clamp(frac, 0.0, 1.0);
}

// ---------------------------------------------------------------------------

LocalTransport::LocalTransport(fs::path staging) : staging_(std::move(staging)) {
    if (staging_.empty()) {
        staging_ = make_temp_dir("kf-local-");
        owns_staging_ = true;
    } else {
        fs::create_directories(staging_);
    }
}

LocalTransport::~LocalTransport() {
    if (owns_staging_) {
        std::error_code ec;
        fs::remove_all(staging_, ec);
    }
}

void LocalTransport::push(const fs::path& local, const std::string& remote) {
    std::error_code ec;
    fs::path dst(remote);
    if (dst.has_parent_path()) fs::create_directories(dst.parent_path(), ec);
    if (fs::equivalent(local, dst, ec)) return;
    fs::copy_file(local, dst, fs::copy_options::overwrite_existing, ec);
    if (ec) fail(ErrorCode::IoError, "push " + local.string() + " -> " + remote + ": " + ec.message());
}

ExecResult LocalTransport::exec(const std::vector<std::string>& argv, double timeout_s) {
    ProcessOptions opts;
    opts.timeout = std::chrono::duration<double>(timeout_s);
    auto p = run_process(argv, opts);
    return {p.exit_code, std::move(p.out), std::move(p.err), p.timed_out};
}

void LocalTransport::pull(const std::string& remote, const fs::path& local) {
    std::error_code ec;
    if (!fs::is_regular_file(remote)) fail(ErrorCode::IoError, "pull: no such file " + remote);
    if (local.has_parent_path()) fs::create_directories(local.parent_path(), ec);
    fs::copy_file(remote, local, fs::copy_options::overwrite_existing, ec);
    if (ec) fail(ErrorCode::IoError, "pull " + remote + " -> " + local.string() + ": " + ec.message());
}

double LocalTransport::utilization() {
    std::string before = read_text_file("/proc/stat");
    std::this_thread::sleep_for(std::chrono::milliseconds(200));
    std::string after = read_text_file("/proc/stat");
    return cpu_busy_fraction(before, after);
}

void LocalTransport::reset_dir(const std::string& remote) {
    std::error_code ec;
    fs::remove_all(remote, ec);
    fs::create_directories(remote, ec);
    if (ec) fail(ErrorCode::IoError, "cannot create " + remote + ": " + ec.message());
}

std::string LocalTransport::stage_executable(const fs::path& local, const std::string&) {
    if (!fs::is_regular_file(local)) fail(ErrorCode::IoError, "executable not found: " + local.string());
    return fs::absolute(local).string();
}

// ---------------------------------------------------------------------------

BridgeTransport::BridgeTransport(std::string bridge_executable, std::string serial, std::string staging_dir,
                                 double sample_interval_s)
    : executable_(std::move(bridge_executable)),
      serial_(std::move(serial)),
      staging_(std::move(staging_dir)),
      sample_interval_s_(sample_interval_s) {}

ExecResult BridgeTransport::bridge(const std::vector<std::string>& verb_args, double timeout_s) {
    std::vector<std::string> argv = {executable_, "-s", serial_};
    argv.insert(argv.end(), verb_args.begin(), verb_args.end());
    ProcessOptions opts;
    opts.timeout = std::chrono::duration<double>(timeout_s);
    auto p = run_process(argv, opts);
    return {p.exit_code, std::move(p.out), std::move(p.err), p.timed_out};
}

void BridgeTransport::push(const fs::path& local, const std::string& remote) {
    auto r = bridge({"push", local.string(), remote}, 300.0);
    if (r.exit_code != 0) fail(ErrorCode::IoError, "bridge push failed: " + r.err + r.out);
}

ExecResult BridgeTransport::exec(const std::vector<std::string>& argv, double timeout_s) {
    std::string cmd;
    for (const auto& a : argv) {
        if (!cmd.empty()) cmd += ' ';
        cmd += shell_quote(a);
    }
    return bridge({"shell", cmd}, timeout_s);
}

void BridgeTransport::pull(const std::string& remote, const fs::path& local) {
    if (local.has_parent_path()) fs::create_directories(local.parent_path());
    auto r = bridge({"pull", remote, local.string()}, 300.0);
    if (r.exit_code != 0 || !fs::exists(local)) fail(ErrorCode::IoError, "bridge pull failed: " + r.err + r.out);
}

double BridgeTransport::utilization() {
    auto a = exec({"cat", "/proc/stat"}, 30.0);
    std::this_thread::sleep_for(std::chrono::duration<double>(sample_interval_s_));
    auto b = exec({"cat", "/proc/stat"}, 30.0);
    if (a.exit_code != 0 || b.exit_code != 0) fail(ErrorCode::IoError, "cannot sample device /proc/stat");
    return cpu_busy_fraction(a.out, b.out);
}

std::unique_ptr<Transport> make_transport(std::string_view spec, const DeviceBridgeConfig& bridge,
                                          std::string_view staging_suffix) {
    if (spec == "local") return std::make_unique<LocalTransport>();
    constexpr std::string_view prefix = "device:";
    if (spec.substr(0, prefix.size()) == prefix && spec.size() > prefix.size()) {
        std::string staging = bridge.staging_dir;
        if (!staging_suffix.empty()) staging += "/" + std::string(staging_suffix);
        return std::make_unique<BridgeTransport>(bridge.executable, std::string(spec.substr(prefix.size())), staging);
    }
    fail(ErrorCode::InvalidArgument, "transport must be 'local' or 'device:<id>', got '" + std::string(spec) + "'");
}

}  // namespace kf
