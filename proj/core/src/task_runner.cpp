#include <fcntl.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <linux/capability.h>
#include <new>
#include <regex>
#include <sstream>

#include "armorcage/limits.hpp"
#include "armorcage/path.hpp"
#include "armorcage/task.hpp"
#include "capabilities.hpp"

namespace armorcage {

namespace fs = std::filesystem;

std::string expand_task_path(std::string_view path) {
  if (!path.empty() && path.front() == '~' && (path.size() == 1 || path[1] == '/')) {
    std::string home = home_directory();
    if (!home.empty() && home.back() == '/') home.pop_back();
    return normalize_path(home + std::string(path.substr(1)));
  }
  return normalize_path(path);
}

namespace {

// Thrown inside the runner to stop the script.
struct Stop {
  TaskStatus status;
  std::string report;
};

using Check = std::function<void(Operation, const std::string&, AccessModeSet)>;

std::string read_whole(const std::string& path, std::size_t index) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Stop{TaskStatus::error, "step " + std::to_string(index) + ": cannot open file '" + path +
                                      "': " + std::strerror(errno)};
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void scan_walk(const std::string& path, const std::regex& re, std::uint64_t size_cap,
               const Check& check, std::vector<ScanMatch>& out) {
  std::error_code ec;
  const auto st = fs::symlink_status(path, ec);
  if (ec) {
    check(Operation::list, path.back() == '/' ? path : path + "/", AccessModeSet::read());
    throw Error("cannot stat '" + path + "': " + ec.message());
  }
  if (fs::is_directory(st)) {
    const std::string dir = path.back() == '/' ? path : path + "/";
    check(Operation::list, dir, AccessModeSet::read());
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(dir, ec)) names.push_back(e.path().filename());
    if (ec) throw Error("cannot list '" + dir + "': " + ec.message());
    std::sort(names.begin(), names.end());
    for (const auto& n : names) scan_walk(dir + n, re, size_cap, check, out);
    return;
  }
  if (fs::is_symlink(st)) {
    const auto target = fs::status(path, ec);
    if (ec || !fs::is_regular_file(target)) return;
  } else if (!fs::is_regular_file(st)) {
    return;
  }
  const auto size = fs::file_size(path, ec);
  if (ec || size > size_cap) return;
  check(Operation::read, path, AccessModeSet::read());
  std::ifstream in(path, std::ios::binary);
  if (!in) return;
  std::string line;
  while (std::getline(in, line)) {
    for (auto it = std::sregex_iterator(line.begin(), line.end(), re); it != std::sregex_iterator();
         ++it) {
      out.push_back({path, it->str()});
    }
  }
}

std::string format_mb(std::uint64_t bytes) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f Mb", static_cast<double>(bytes) / (1024.0 * 1024.0));
  return buf;
}

double process_cpu_seconds() {
  timespec ts{};
  clock_gettime(CLOCK_PROCESS_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) + static_cast<double>(ts.tv_nsec) / 1e9;
}

void burn_cpu(double seconds) {
  const double until = process_cpu_seconds() + seconds;
  volatile double sink = 1.0;
  while (process_cpu_seconds() < until) {
    for (int i = 0; i < 100000; ++i) sink = std::sqrt(sink * 1.0000001 + 1.0);
  }
}

void sleep_for(double seconds) {
  timespec ts{static_cast<time_t>(seconds),
              static_cast<long>((seconds - std::floor(seconds)) * 1e9)};
  while (nanosleep(&ts, &ts) != 0 && errno == EINTR) {
  }
}

// NPROC only binds processes without CAP_SYS_RESOURCE or CAP_SYS_ADMIN, and
// some kernels exempt root outright.
bool nproc_limit_effective() {
  if (::geteuid() == 0) return false;
  if (detail::has_capability(CAP_SYS_RESOURCE) || detail::has_capability(CAP_SYS_ADMIN)) {
    return false;
  }
  return get_rlimit(RlimitKind::nproc).soft != RlimitValue::kInfinity;
}

class Runner {
 public:
  Runner(const SubjectContext& ctx, const ProfileSet& set, const RunOptions& options)
      : ctx_(ctx), set_(set), options_(options) {}

  TaskOutcome run(const TaskScript& script) {
    try {
      script.validate();
      for (index_ = 0; index_ < script.steps.size(); ++index_) {
        std::visit([this](const auto& s) { exec_step(s); }, script.steps[index_]);
      }
    } catch (const Stop& stop) {
      out_.status = stop.status;
      out_.report = stop.report;
    } catch (const Error& e) {
      out_.status = TaskStatus::error;
      out_.report = "step " + std::to_string(index_) + ": " + e.what();
    }
    out_.final_context = ctx_;
    return std::move(out_);
  }

 private:
  bool executing() const { return options_.mode == RunMode::execute; }

  std::string where() const { return "step " + std::to_string(index_) + ": "; }

  std::string resolve(const std::string& raw) {
    try {
      return expand_task_path(raw);
    } catch (const Error& e) {
      throw Stop{TaskStatus::error, where() + e.what()};
    }
  }

  void mediate(Operation op, const std::string& path, AccessModeSet requested) {
    const AccessRequest req{path, requested, op};
    const Decision d = check_access(ctx_, set_, req);
    const DecisionTrace t{index_, op, path, requested, d.allowed, d.effective};
    out_.trace.push_back(t);
    if (options_.on_decision) options_.on_decision(t);
    if (d.audit) emit_audit(*d.audit);
    if (!d.effective) {
      AccessModeSet missing = requested.without_exec() - d.granted;
      if (requested.has_exec() && !d.granted.has_exec()) missing |= requested.exec_part();
      throw Stop{TaskStatus::denied, where() + std::string(to_string(op)) + " " + path +
                                         " denied for " + ctx_.label() + " (missing " +
                                         missing.to_string() + ")"};
    }
  }

  void emit_audit(const AuditRecord& r) {
    out_.audit.push_back(r);
    if (options_.on_audit) options_.on_audit(r);
  }

  void exec_step(const step::ReadFile& s) {
    const auto path = resolve(s.path);
    mediate(Operation::read, path, AccessModeSet::read());
    out_.payload += read_whole(path, index_);
  }

  void exec_step(const step::WriteFile& s) {
    const auto path = resolve(s.path);
    mediate(Operation::write, path, AccessModeSet::write());
    if (!executing()) return;
    const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) {
      throw Stop{TaskStatus::error,
                 where() + "cannot open '" + path + "' for writing: " + std::strerror(errno)};
    }
    std::size_t done = 0;
    while (done < s.bytes.size()) {
      const ssize_t n = ::write(fd, s.bytes.data() + done, s.bytes.size() - done);
      if (n < 0 && errno == EINTR) continue;
      if (n < 0) {
        const int err = errno;
        ::close(fd);
        throw Stop{TaskStatus::error, where() + "write to '" + path + "' failed: " + std::strerror(err)};
      }
      done += static_cast<std::size_t>(n);
    }
    ::close(fd);
  }

  void exec_step(const step::ListDir& s) {
    auto path = resolve(s.path);
    if (path.back() != '/') path += '/';
    mediate(Operation::list, path, AccessModeSet::read());
    std::error_code ec;
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(path, ec)) names.push_back(e.path().filename());
    if (ec) throw Stop{TaskStatus::error, where() + "cannot list '" + path + "': " + ec.message()};
    std::sort(names.begin(), names.end());
    for (const auto& n : names) out_.payload += n + "\n";
  }

  void exec_step(const step::Exec& s) {
    const auto path = resolve(s.path);
    mediate(Operation::exec, path, AccessModeSet::exec(ExecMode::inherit));
    ExecTransition next;
    try {
      next = exec_transition(ctx_, set_, path);
    } catch (const PolicyError& e) {
      throw Stop{TaskStatus::denied, where() + e.what()};
    }
    if (next.mode == ExecMode::unconfined) {
      AuditRecord r;
      r.profile = ctx_.profile.value_or("unconfined");
      r.hat = ctx_.hat;
      r.operation = Operation::exec;
      r.path = path;
      r.requested = AccessModeSet::exec(ExecMode::unconfined);
      r.allowed = r.effective = true;
      emit_audit(r);
    }
    if (executing()) run_program(path, s.args);
    ctx_ = next.context;
  }

  void run_program(const std::string& path, const std::vector<std::string>& args) {
    int fds[2];
    if (::pipe2(fds, O_CLOEXEC) != 0) {
      throw Stop{TaskStatus::error, where() + "pipe: " + std::strerror(errno)};
    }
    const pid_t pid = ::fork();
    if (pid < 0) {
      const int err = errno;
      ::close(fds[0]);
      ::close(fds[1]);
      throw Stop{TaskStatus::error, where() + "unable to fork, possible reason: " + std::strerror(err)};
    }
    if (pid == 0) {
      ::dup2(fds[1], STDOUT_FILENO);
      std::vector<char*> argv;
      argv.push_back(const_cast<char*>(path.c_str()));
      for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
      argv.push_back(nullptr);
      ::execv(path.c_str(), argv.data());
      _exit(127);
    }
    ::close(fds[1]);
    char buf[65536];
    for (;;) {
      const ssize_t n = ::read(fds[0], buf, sizeof buf);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) break;
      out_.payload.append(buf, static_cast<std::size_t>(n));
    }
    ::close(fds[0]);
    int status = 0;
    while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    if (WIFEXITED(status) && WEXITSTATUS(status) == 0) return;
    std::string why = WIFEXITED(status) ? "exited with status " + std::to_string(WEXITSTATUS(status))
                                        : "killed by signal " + std::to_string(WTERMSIG(status));
    throw Stop{TaskStatus::error, where() + path + " " + why};
  }

  void exec_step(const step::AllocBytes& s) {
    if (!executing()) return;
    char* block = new (std::nothrow) char[s.bytes];
    if (!block) {
      throw Stop{TaskStatus::error, where() + "cannot allocate vector of size " + format_mb(s.bytes)};
    }
    volatile char* touch = block;
    const long page = ::sysconf(_SC_PAGESIZE);
    for (std::uint64_t i = 0; i < s.bytes; i += static_cast<std::uint64_t>(page)) touch[i] = 1;
    touch[s.bytes - 1] = 1;
    delete[] block;
  }

  void exec_step(const step::BurnCpu& s) {
    if (executing()) burn_cpu(s.seconds);
  }

  void exec_step(const step::Sleep& s) {
    if (executing()) sleep_for(s.seconds);
  }

  void exec_step(const step::ForkN& s) {
    if (!executing()) return;
    if (!s.budget && !options_.allow_unbounded_fork && !nproc_limit_effective()) {
      throw Stop{TaskStatus::error,
                 where() + "refusing an unbounded fork loop without an effective NPROC limit"};
    }
    std::uint64_t remaining = s.budget ? *s.budget : UINT64_MAX;
    bool root = true;
    std::uint64_t forked = 0;
    while (remaining > 0) {
      const pid_t pid = ::fork();
      if (pid < 0) {
        if (errno == EINTR) continue;
        if (root) {
          throw Stop{TaskStatus::error, where() + "unable to fork, possible reason: " +
                                            std::strerror(errno)};
        }
        break;
      }
      --remaining;
      if (pid == 0) {
        root = false;
        if (options_.on_fork_child) options_.on_fork_child();
        continue;
      }
      if (root) ++forked;
    }
    if (!root) {
      for (;;) ::pause();
    }
    out_.payload += "forked " + std::to_string(forked) + "\n";
  }

  void exec_step(const step::ScanPattern& s) {
    const auto root = resolve(s.root);
    std::regex re;
    try {
      re = std::regex(s.regex);
    } catch (const std::regex_error& e) {
      throw Stop{TaskStatus::error, where() + "bad regex: " + e.what()};
    }
    std::vector<ScanMatch> matches;
    const Check check = [this](Operation op, const std::string& p, AccessModeSet m) {
      mediate(op, p, m);
    };
    try {
      scan_walk(root, re, s.size_cap, check, matches);
    } catch (const Error& e) {
      throw Stop{TaskStatus::error, where() + e.what()};
    }
    for (const auto& m : matches) out_.payload += m.path + " : " + m.match + "\n";
  }

  void exec_step(const step::Emit& s) { out_.payload += s.bytes; }

  SubjectContext ctx_;
  const ProfileSet& set_;
  const RunOptions& options_;
  TaskOutcome out_;
  std::size_t index_ = 0;
};

}  // namespace

TaskOutcome run_task(const TaskScript& script, const SubjectContext& ctx, const ProfileSet& set,
                     const RunOptions& options) {
  return Runner(ctx, set, options).run(script);
}

std::vector<ScanMatch> scan_pattern(std::string_view root, std::string_view regex,
                                    std::uint64_t size_cap, const SubjectContext& ctx,
                                    const ProfileSet& set) {
  const std::string start = expand_task_path(root);
  std::regex re;
  try {
    re = std::regex(std::string(regex));
  } catch (const std::regex_error& e) {
    throw Error("bad regex '" + std::string(regex) + "': " + e.what());
  }
  const Check check = [&](Operation op, const std::string& path, AccessModeSet modes) {
    const Decision d = check_access(ctx, set, AccessRequest{path, modes, op});
    if (!d.effective) {
      throw AccessDenied(std::string(to_string(op)) + " " + path + " denied for " + ctx.label(),
                         DecisionTrace{0, op, path, modes, d.allowed, d.effective});
    }
  };
  std::vector<ScanMatch> out;
  scan_walk(start, re, size_cap, check, out);
  return out;
}

}  // namespace armorcage
