#pragma once

#include "kf/framework_config.hpp"

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace kf {

enum class TransportKind { LocalProcess, RemoteDevice };

std::string_view to_string(TransportKind k);

struct ExecResult {
    int exit_code = -1;
    std::string out;
    std::string err;
    bool timed_out = false;
};

// Where operator binaries run. Implementations are synchronous; a transport
// endpoint serves one benchmark at a time.
class Transport {
public:
    virtual ~Transport() = default;

    virtual TransportKind kind() const = 0;
    // Stable identity of the endpoint (baseline cache key).
    virtual std::string endpoint() const = 0;
    // Scratch directory on the target side.
    virtual std::string staging_dir() const = 0;

    virtual void push(const std::filesystem::path& local, const std::string& remote) = 0;
    virtual ExecResult exec(const std::vector<std::string>& argv, double timeout_s) = 0;
    virtual void pull(const std::string& remote, const std::filesystem::path& local) = 0;
    // Busy fraction of total CPU capacity in [0, 1].
    virtual double utilization() = 0;

    // Removes and recreates a target-side directory.
    virtual void reset_dir(const std::string& remote);
    // Makes an executable available on the target; returns its target path.
    virtual std::string stage_executable(const std::filesystem::path& local, const std::string& name);
};

// Parses the aggregate "cpu" line of two /proc/stat snapshots into a busy
// fraction. Returns 0 when the counters did not advance.
double cpu_busy_fraction(std::string_view stat_before, std::string_view stat_after);

// Runs on this host. push/pull are file copies under a private staging directory.
class LocalTransport : public Transport {
public:
    // Empty staging creates a fresh temp directory owned (and removed) by this object.
    explicit LocalTransport(std::filesystem::path staging = {});
    ~LocalTransport() override;

    TransportKind kind() const override { return TransportKind::LocalProcess; }
    std::string endpoint() const override { return "local"; }
    std::string staging_dir() const override { return staging_.string(); }

    void push(const std::filesystem::path& local, const std::string& remote) override;
    ExecResult exec(const std::vector<std::string>& argv, double timeout_s) override;
    void pull(const std::string& remote, const std::filesystem::path& local) override;
    double utilization() override;
    void reset_dir(const std::string& remote) override;
    std::string stage_executable(const std::filesystem::path& local, const std::string& name) override;

private:
    std::filesystem::path staging_;
    bool owns_staging_ = false;
};

// Thin wrapper over a device-bridge executable with adb-style verbs:
//   <bridge> -s <serial> push <local> <remote>
//   <bridge> -s <serial> shell <command>
//   <bridge> -s <serial> pull <remote> <local>
class BridgeTransport : public Transport {
public:
    BridgeTransport(std::string bridge_executable, std::string serial, std::string staging_dir,
                    double sample_interval_s = 0.2);

    TransportKind kind() const override { return TransportKind::RemoteDevice; }
    std::string endpoint() const override { return "device:" + serial_; }
    std::string staging_dir() const override { return staging_; }

    void push(const std::filesystem::path& local, const std::string& remote) override;
    ExecResult exec(const std::vector<std::string>& argv, double timeout_s) override;
    void pull(const std::string& remote, const std::filesystem::path& local) override;
    double utilization() override;

private:
    ExecResult bridge(const std::vector<std::string>& verb_args, double timeout_s);

    std::string executable_;
    std::string serial_;
    std::string staging_;
    double sample_interval_s_;
};

// "local" or "device:<serial>". Device transports take the bridge settings
// from the framework config.
std::unique_ptr<Transport> make_transport(std::string_view spec, const DeviceBridgeConfig& bridge,
                                          std::string_view staging_suffix = {});

}  // namespace kf
