#include "kf/process.hpp"

#include "kf/error.hpp"

#include <cerrno>
#include <csignal>
#include <cstdlib>
#include <cstring>
#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

extern char** environ;

namespace fs = std::filesystem;

namespace kf {

namespace {

struct Fd {
    int fd = -1;
    Fd() = default;
    explicit Fd(int f) : fd(f) {}
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;
    ~Fd() { reset(); }
    void reset() {
        if (fd >= 0) ::close(fd);
        fd = -1;
    }
};

void make_pipe(Fd& read_end, Fd& write_end) {
    int fds[2];
    if (::pipe2(fds, O_CLOEXEC) != 0) fail(ErrorCode::IoError, std::string("pipe2: ") + std::strerror(errno));
    read_end.fd = fds[0];
    write_end.fd = fds[1];
}

std::vector<char*> as_cstrings(std::vector<std::string>& strings) {
    std::vector<char*> out;
    out.reserve(strings.size() + 1);
    for (auto& s : strings) out.push_back(s.data());
    out.push_back(nullptr);
    return out;
}

}  // namespace

std::optional<fs::path> find_program(std::string_view name) {
    if (name.empty()) return std::nullopt;
    if (name.find('/') != std::string_view::npos) {
        fs::path p(name);
        if (::access(p.c_str(), X_OK) == 0) return p;
        return std::nullopt;
    }
    const char* path_env = std::getenv("PATH");
    std::string path = path_env ? path_env : "/usr/local/bin:/usr/bin:/bin";
    size_t start = 0;
    while (start <= path.size()) {
        size_t end = path.find(':', start);
        if (end == std::string::npos) end = path.size();
        std::string dir = path.substr(start, end - start);
        if (dir.empty()) dir = ".";
        fs::path candidate = fs::path(dir) / std::string(name);
        if (::access(candidate.c_str(), X_OK) == 0 && !fs::is_directory(candidate)) return candidate;
        start = end + 1;
    }
    return std::nullopt;
}

std::vector<std::string> environment_subset(const std::vector<std::string>& names) {
    std::vector<std::string> out;
    for (const auto& name : names) {
        if (const char* v = std::getenv(name.c_str())) out.push_back(name + "=" + v);
    }
    return out;
}

std::string shell_quote(std::string_view arg) {
    if (!arg.empty() && arg.find_first_not_of("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-./=:,+@%") ==
                            std::string_view::npos) {
        return std::string(arg);
    }
    std::string out = "'";
    for (char c : arg) {
        if (c == '\'') out += "'\\''";
        else out += c;
    }
    out += "'";
    return out;
}

ProcessResult run_process(const std::vector<std::string>& argv, const ProcessOptions& options) {
    if (argv.empty()) fail(ErrorCode::InvalidArgument, "run_process: empty argv");
    auto exe = find_program(argv[0]);
    if (!exe) fail(ErrorCode::IoError, "program not found: " + argv[0]);

    std::vector<std::string> args = argv;
    std::vector<char*> c_args = as_cstrings(args);
    std::vector<std::string> env_storage;
    std::vector<char*> c_env;
    char** envp = environ;
    if (options.env) {
        env_storage = *options.env;
        c_env = as_cstrings(env_storage);
        envp = c_env.data();
    }
    std::string exe_path = exe->string();
    std::string cwd = options.cwd.empty() ? std::string() : options.cwd.string();

    Fd out_r, out_w, err_r, err_w, null_in;
    make_pipe(out_r, out_w);
    if (!options.merge_output) make_pipe(err_r, err_w);
    null_in.fd = ::open("/dev/null", O_RDONLY | O_CLOEXEC);

    auto started = std::chrono::steady_clock::now();
    pid_t pid = ::fork();
    if (pid < 0) fail(ErrorCode::IoError, std::string("fork: ") + std::strerror(errno));
    if (pid == 0) {
        ::setpgid(0, 0);
        if (null_in.fd >= 0) ::dup2(null_in.fd, STDIN_FILENO);
        ::dup2(out_w.fd, STDOUT_FILENO);
        ::dup2(options.merge_output ? out_w.fd : err_w.fd, STDERR_FILENO);
        if (!cwd.empty() && ::chdir(cwd.c_str()) != 0) _exit(127);
        ::execve(exe_path.c_str(), c_args.data(), envp);
        _exit(127);
    }
    ::setpgid(pid, pid);
    out_w.reset();
    err_w.reset();

    ProcessResult result;
    const bool bounded = options.timeout.count() > 0;
    const auto deadline = started + std::chrono::duration_cast<std::chrono::steady_clock::duration>(options.timeout);

    char buf[8192];
    while (out_r.fd >= 0 || err_r.fd >= 0) {
        pollfd fds[2];
        int n = 0;
        if (out_r.fd >= 0) fds[n++] = {out_r.fd, POLLIN, 0};
        if (err_r.fd >= 0) fds[n++] = {err_r.fd, POLLIN, 0};
        int wait_ms = -1;
        if (bounded) {
            auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
            if (left.count() <= 0) {
                result.timed_out = true;
                break;
            }
            wait_ms = static_cast<int>(left.count()) + 1;
        }
        int rc = ::poll(fds, n, wait_ms);
        if (rc < 0) {
            if (errno == EINTR) continue;
            break;
        }
        if (rc == 0) continue;
        for (int i = 0; i < n; ++i) {
            if (!(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
            ssize_t got = ::read(fds[i].fd, buf, sizeof buf);
            bool is_out = fds[i].fd == out_r.fd;
            if (got > 0) {
                (is_out ? result.out : result.err).append(buf, static_cast<size_t>(got));
            } else if (got == 0 || errno != EINTR) {
                (is_out ? out_r : err_r).reset();
            }
        }
    }

    if (result.timed_out) ::kill(-pid, SIGKILL);
    int status = 0;
    while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    if (result.timed_out) {
        // Drain whatever the killed group left in the pipes.
        for (Fd* fd : {&out_r, &err_r}) {
            if (fd->fd < 0) continue;
            ::fcntl(fd->fd, F_SETFL, O_NONBLOCK);
            ssize_t got;
            while ((got = ::read(fd->fd, buf, sizeof buf)) > 0)
                (fd == &out_r ? result.out : result.err).append(buf, static_cast<size_t>(got));
        }
    }
    if (WIFEXITED(status)) {
        result.exit_code = WEXITSTATUS(status);
    } else if (WIFSIGNALED(status)) {
        result.term_signal = WTERMSIG(status);
        result.exit_code = 128 + result.term_signal;
    }
    result.duration_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

ProcessResult run_shell(const std::string& command, const ProcessOptions& options) {
    return run_process({"/bin/sh", "-c", command}, options);
}

}  // namespace kf
