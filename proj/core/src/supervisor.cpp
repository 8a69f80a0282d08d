#include "armorcage/supervisor.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/prctl.h>
#include <sys/resource.h>
#include <sys/syscall.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <thread>

#include "armorcage/audit.hpp"
#include "armorcage/engine.hpp"
#include "armorcage/path.hpp"

namespace armorcage {

namespace {

using Clock = std::chrono::steady_clock;

constexpr struct {
  int number;
  const char* name;
} kSignals[] = {
    {SIGHUP, "SIGHUP"},   {SIGINT, "SIGINT"},       {SIGQUIT, "SIGQUIT"}, {SIGILL, "SIGILL"},
    {SIGTRAP, "SIGTRAP"}, {SIGABRT, "SIGABRT"},     {SIGBUS, "SIGBUS"},   {SIGFPE, "SIGFPE"},
    {SIGKILL, "SIGKILL"}, {SIGUSR1, "SIGUSR1"},     {SIGSEGV, "SIGSEGV"}, {SIGUSR2, "SIGUSR2"},
    {SIGPIPE, "SIGPIPE"}, {SIGALRM, "SIGALRM"},     {SIGTERM, "SIGTERM"}, {SIGCHLD, "SIGCHLD"},
    {SIGCONT, "SIGCONT"}, {SIGSTOP, "SIGSTOP"},     {SIGTSTP, "SIGTSTP"}, {SIGTTIN, "SIGTTIN"},
    {SIGTTOU, "SIGTTOU"}, {SIGURG, "SIGURG"},       {SIGXCPU, "SIGXCPU"}, {SIGXFSZ, "SIGXFSZ"},
    {SIGVTALRM, "SIGVTALRM"}, {SIGPROF, "SIGPROF"}, {SIGWINCH, "SIGWINCH"}, {SIGIO, "SIGIO"},
    {SIGPWR, "SIGPWR"},   {SIGSYS, "SIGSYS"},
};

void write_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const ssize_t n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      return;
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

void send_tagged(int fd, char tag, std::string_view body) {
  std::string framed;
  framed.reserve(body.size() + 1);
  framed += tag;
  framed.append(body);
  write_all(fd, encode_frame(framed));
}

std::string encode_trace(const DecisionTrace& t) {
  return std::to_string(t.step) + "\t" + std::string(to_string(t.operation)) + "\t" +
         t.requested.to_string() + "\t" + (t.allowed ? "1" : "0") + "\t" + (t.effective ? "1" : "0") +
         "\t" + t.path;
}

std::optional<DecisionTrace> decode_trace(std::string_view s) {
  std::vector<std::string_view> f;
  for (int i = 0; i < 5; ++i) {
    const auto tab = s.find('\t');
    if (tab == std::string_view::npos) return std::nullopt;
    f.push_back(s.substr(0, tab));
    s.remove_prefix(tab + 1);
  }
  DecisionTrace t;
  t.step = std::strtoull(std::string(f[0]).c_str(), nullptr, 10);
  const auto op = parse_operation(f[1]);
  if (!op) return std::nullopt;
  t.operation = *op;
  try {
    t.requested = AccessModeSet::parse(f[2]);
  } catch (const ModeError&) {
    return std::nullopt;
  }
  t.allowed = f[3] == "1";
  t.effective = f[4] == "1";
  t.path = std::string(s);
  return t;
}

void close_other_fds(int keep_a, int keep_b) {
  const int lo = std::min(keep_a, keep_b), hi = std::max(keep_a, keep_b);
  auto close_span = [](unsigned first, unsigned last) {
    if (first > last) return;
    if (::syscall(SYS_close_range, first, last, 0) == 0) return;
    const long max_fd = std::min<long>(::sysconf(_SC_OPEN_MAX), 65536);
    for (long fd = first; fd <= std::min<long>(last, max_fd); ++fd) ::close(static_cast<int>(fd));
  };
  close_span(3, static_cast<unsigned>(lo) - 1);
  close_span(static_cast<unsigned>(lo) + 1, static_cast<unsigned>(hi) - 1);
  close_span(static_cast<unsigned>(hi) + 1, ~0u);
}

void reset_signals() {
  struct sigaction dfl {};
  dfl.sa_handler = SIG_DFL;
  sigemptyset(&dfl.sa_mask);
  for (int sig = 1; sig < NSIG; ++sig) {
    if (sig == SIGKILL || sig == SIGSTOP) continue;
    ::sigaction(sig, &dfl, nullptr);
  }
  sigset_t none;
  sigemptyset(&none);
  ::sigprocmask(SIG_SETMASK, &none, nullptr);
}

std::optional<std::string> find_program(const std::string& name) {
  if (name.find('/') != std::string::npos) return name;
  const char* env = std::getenv("PATH");
  std::string path = env ? env : "/usr/local/bin:/usr/bin:/bin";
  std::size_t start = 0;
  while (start <= path.size()) {
    auto end = path.find(':', start);
    if (end == std::string::npos) end = path.size();
    std::string dir = path.substr(start, end - start);
    if (dir.empty()) dir = ".";
    const std::string candidate = dir + "/" + name;
    if (::access(candidate.c_str(), X_OK) == 0) return candidate;
    start = end + 1;
  }
  return std::nullopt;
}

void enter_native_profile(const std::string& profile) {
  const std::string cmd = "changeprofile " + profile;
  for (const char* attr : {"/proc/self/attr/apparmor/current", "/proc/self/attr/current"}) {
    const int fd = ::open(attr, O_WRONLY | O_CLOEXEC);
    if (fd < 0) continue;
    const ssize_t n = ::write(fd, cmd.data(), cmd.size());
    const int err = errno;
    ::close(fd);
    if (n == static_cast<ssize_t>(cmd.size())) return;
    throw Error("changeprofile " + profile + ": " + std::strerror(err));
  }
  throw Error("kernel change-profile interface unavailable");
}

struct ChildChannels {
  int payload;
  int control;
};

[[noreturn]] void child_main(const Job& job, const SandboxSpec& spec, const ProfileSet& set,
                             Backend backend, bool allow_unbounded_fork, ChildChannels ch) {
  ::setpgid(0, 0);
  close_other_fds(ch.payload, ch.control);
  reset_signals();

  const char* step = "rlimits";
  SubjectContext ctx = SubjectContext::unconfined();
  try {
    for (const auto& [kind, value] : spec.rlimits) {
      if (kind == RlimitKind::nproc) continue;
      set_rlimit(kind, value.hard, value.soft);
    }
    if (spec.identity) {
      step = "identity";
      set_identity(*spec.identity);
    }
    if (auto it = spec.rlimits.find(RlimitKind::nproc); it != spec.rlimits.end()) {
      step = "rlimits";
      set_rlimit(RlimitKind::nproc, it->second.hard, it->second.soft);
    }
    if (spec.priority) {
      step = "priority";
      set_priority(*spec.priority);
    }
    if (spec.profile) {
      step = "profile";
      if (backend == Backend::native) {
        enter_native_profile(*spec.profile);
      } else {
        ctx = change_profile(ctx, set, *spec.profile);
      }
    }
    if (spec.workdir) {
      step = "workdir";
      if (::chdir(spec.workdir->c_str()) != 0) {
        throw Error("chdir " + *spec.workdir + ": " + std::strerror(errno));
      }
    }
  } catch (const std::exception& e) {
    send_tagged(ch.control, 'E', std::string("setup failed at ") + step + ": " + e.what());
    _exit(kExitSetupFailure);
  }

  try {
    if (const auto* cmd = std::get_if<ExecCommand>(&job)) {
      if (cmd->argv.empty()) {
        send_tagged(ch.control, 'E', "empty command");
        _exit(kExitSetupFailure);
      }
      const auto program = find_program(cmd->argv.front());
      if (!program) {
        send_tagged(ch.control, 'E', "command not found: " + cmd->argv.front());
        _exit(kExitTaskError);
      }
      if (spec.profile && backend == Backend::simulated) {
        std::string abs = *program;
        if (abs.front() != '/') abs = std::filesystem::absolute(abs).string();
        const Decision d = check_access(ctx, set, AccessRequest::exec(normalize_path(abs)));
        if (d.audit) send_tagged(ch.control, 'A', format_record(*d.audit));
        if (!d.effective) {
          send_tagged(ch.control, 'E', "exec " + abs + " denied for " + ctx.label());
          _exit(kExitDenied);
        }
      }
      if (::dup2(ch.payload, STDOUT_FILENO) < 0) _exit(kExitSetupFailure);
      std::vector<char*> argv;
      for (const auto& a : cmd->argv) argv.push_back(const_cast<char*>(a.c_str()));
      argv.push_back(nullptr);
      ::execv(program->c_str(), argv.data());
      send_tagged(ch.control, 'E', "exec " + *program + ": " + std::strerror(errno));
      _exit(kExitTaskError);
    }

    const auto& script = std::get<TaskScript>(job);
    RunOptions opts;
    opts.mode = RunMode::execute;
    opts.allow_unbounded_fork = allow_unbounded_fork;
    opts.on_fork_child = [ch] {
      ::close(ch.payload);
      ::close(ch.control);
    };
    opts.on_audit = [ch](const AuditRecord& r) { send_tagged(ch.control, 'A', format_record(r)); };
    opts.on_decision = [ch](const DecisionTrace& t) {
      send_tagged(ch.control, 'D', encode_trace(t));
    };
    const TaskOutcome out = run_task(script, ctx, set, opts);
    write_all(ch.payload, encode_frame(out.payload));
    switch (out.status) {
      case TaskStatus::ok:
        _exit(kExitOk);
      case TaskStatus::denied:
        send_tagged(ch.control, 'E', out.report);
        _exit(kExitDenied);
      case TaskStatus::error:
        send_tagged(ch.control, 'E', out.report);
        _exit(kExitTaskError);
    }
  } catch (const std::exception& e) {
    send_tagged(ch.control, 'E', std::string("task failed: ") + e.what());
  }
  _exit(kExitTaskError);
}

int pidfd_open(pid_t pid) {
#ifdef SYS_pidfd_open
  return static_cast<int>(::syscall(SYS_pidfd_open, pid, 0));
#else
  (void)pid;
  errno = ENOSYS;
  return -1;
#endif
}

bool drain_fd(int& fd, std::string& buf) {
  char chunk[65536];
  const ssize_t n = ::read(fd, chunk, sizeof chunk);
  if (n > 0) {
    buf.append(chunk, static_cast<std::size_t>(n));
    return true;
  }
  if (n < 0 && (errno == EINTR || errno == EAGAIN)) return true;
  ::close(fd);
  fd = -1;
  return false;
}

std::string format_seconds_text(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%gs", s);
  return buf;
}

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

}  // namespace

std::string_view to_string(EvalStatus status) {
  switch (status) {
    case EvalStatus::ok:
      return "ok";
    case EvalStatus::timeout:
      return "timeout";
    case EvalStatus::limit_killed:
      return "limit_killed";
    case EvalStatus::denied:
      return "denied";
    case EvalStatus::task_error:
      return "task_error";
    case EvalStatus::setup_error:
      return "setup_error";
  }
  return "setup_error";
}

std::optional<EvalStatus> parse_eval_status(std::string_view text) {
  for (auto s : {EvalStatus::ok, EvalStatus::timeout, EvalStatus::limit_killed, EvalStatus::denied,
                 EvalStatus::task_error, EvalStatus::setup_error}) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

std::string signal_name(int signal) {
  for (const auto& s : kSignals) {
    if (s.number == signal) return s.name;
  }
  return "SIG" + std::to_string(signal);
}

std::optional<int> parse_signal_name(std::string_view name) {
  for (const auto& s : kSignals) {
    if (name == s.name) return s.number;
  }
  return std::nullopt;
}

std::string_view to_string(Backend backend) {
  switch (backend) {
    case Backend::automatic:
      return "auto";
    case Backend::native:
      return "native";
    case Backend::simulated:
      return "simulated";
  }
  return "auto";
}

std::optional<Backend> parse_backend(std::string_view text) {
  if (text == "auto") return Backend::automatic;
  if (text == "native") return Backend::native;
  if (text == "simulated") return Backend::simulated;
  return std::nullopt;
}

Backend detect_backend() {
  std::error_code ec;
  if (std::filesystem::exists("/sys/kernel/security/apparmor/profiles", ec) &&
      ::access("/proc/self/attr/current", W_OK) == 0) {
    return Backend::native;
  }
  return Backend::simulated;
}

void SandboxSpec::validate(const ProfileSet& set) const {
  if (timeout && !(*timeout > 0)) throw Error("timeout must be positive");
  if (priority && (*priority < -20 || *priority > 19)) {
    throw Error("priority " + std::to_string(*priority) + " outside [-20, 19]");
  }
  for (const auto& [kind, value] : rlimits) {
    if (!value.valid()) {
      throw Error(std::string(to_string(kind)) + ": soft limit exceeds hard limit");
    }
  }
  if (profile && !set.contains(*profile)) throw Error("unknown profile '" + *profile + "'");
  if (workdir && (workdir->empty() || workdir->front() != '/')) {
    throw Error("workdir must be an absolute path");
  }
}

Supervisor::Supervisor(ProfileSet set, SupervisorOptions options)
    : set_(std::move(set)),
      options_(options),
      backend_(options.backend == Backend::automatic ? detect_backend() : options.backend) {
  ::prctl(PR_SET_CHILD_SUBREAPER, 1);
}

SupervisorStats Supervisor::stats() const {
  std::lock_guard lock(mutex_);
  return stats_;
}

std::size_t Supervisor::drain_group(pid_t pgid, bool block) {
  std::size_t collected = 0;
  const auto give_up = Clock::now() + std::chrono::seconds(block ? 5 : 0);
  for (;;) {
    ::kill(-pgid, SIGKILL);
    for (;;) {
      int status = 0;
      const pid_t got = ::waitpid(-pgid, &status, WNOHANG);
      if (got <= 0) break;
      ++collected;
    }
    if (::kill(-pgid, 0) != 0 && errno == ESRCH) break;
    if (Clock::now() >= give_up) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  const bool empty = ::kill(-pgid, 0) != 0 && errno == ESRCH;
  std::lock_guard lock(mutex_);
  stats_.reaped_descendants += collected;
  live_groups_.erase(std::remove(live_groups_.begin(), live_groups_.end(), pgid),
                     live_groups_.end());
  if (!empty) live_groups_.push_back(pgid);
  return collected;
}

std::size_t Supervisor::reap() {
  std::vector<pid_t> groups;
  {
    std::lock_guard lock(mutex_);
    groups = live_groups_;
  }
  std::size_t total = 0;
  for (const pid_t g : groups) total += drain_group(g, false);
  std::lock_guard lock(mutex_);
  if (in_flight_ == 0) {
    int status = 0;
    while (::waitpid(-1, &status, WNOHANG) > 0) {
      ++total;
      ++stats_.reaped_descendants;
    }
  }
  return total;
}

EvalResult Supervisor::secure_eval(const Job& job, const SandboxSpec& spec) {
  EvalResult result;
  try {
    spec.validate(set_);
    if (const auto* script = std::get_if<TaskScript>(&job)) script->validate();
  } catch (const Error& e) {
    result.status = EvalStatus::setup_error;
    result.message = e.what();
    return result;
  }

  int payload[2], control[2];
  if (::pipe2(payload, O_CLOEXEC) != 0) {
    result.message = std::string("pipe: ") + std::strerror(errno);
    return result;
  }
  if (::pipe2(control, O_CLOEXEC) != 0) {
    result.message = std::string("pipe: ") + std::strerror(errno);
    ::close(payload[0]);
    ::close(payload[1]);
    return result;
  }

  const auto start = Clock::now();
  pid_t pid;
  {
    std::lock_guard lock(mutex_);
    pid = ::fork();
    if (pid == 0) {
      ::close(payload[0]);
      ::close(control[0]);
      child_main(job, spec, set_, backend_, options_.allow_unbounded_fork,
                 ChildChannels{payload[1], control[1]});
    }
    if (pid > 0) {
      ++stats_.spawned;
      ++in_flight_;
    }
  }
  ::close(payload[1]);
  ::close(control[1]);
  if (pid < 0) {
    result.message = std::string("fork: ") + std::strerror(errno);
    ::close(payload[0]);
    ::close(control[0]);
    return result;
  }
  ::setpgid(pid, pid);

  int pfd = pidfd_open(pid);
  int payload_fd = payload[0], control_fd = control[0];
  std::string payload_buf, control_buf;
  bool exited = false, timed_out = false, killed_by_us = false;
  int status = 0;
  rusage usage{};
  std::optional<Clock::time_point> kill_at;
  const std::optional<Clock::time_point> deadline =
      spec.timeout ? std::optional(start + std::chrono::duration_cast<Clock::duration>(
                                               std::chrono::duration<double>(*spec.timeout)))
                   : std::nullopt;

  auto try_wait = [&] {
    const pid_t got = ::wait4(pid, &status, WNOHANG, &usage);
    if (got == pid) exited = true;
  };

  while (!exited) {
    const auto now = Clock::now();
    if (deadline && !timed_out && now >= *deadline) {
      timed_out = true;
      ::kill(-pid, SIGTERM);
      kill_at = now + std::chrono::duration_cast<Clock::duration>(
                          std::chrono::duration<double>(options_.kill_grace));
    }
    if (kill_at && now >= *kill_at && !killed_by_us) {
      killed_by_us = true;
      ::kill(-pid, SIGKILL);
    }
    int wait_ms = pfd >= 0 ? 1000 : 10;
    auto clamp_to = [&](Clock::time_point t) {
      const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(t - now).count() + 1;
      wait_ms = std::min<int>(wait_ms, static_cast<int>(std::max<long long>(ms, 0)));
    };
    if (deadline && !timed_out) clamp_to(*deadline);
    if (kill_at && !killed_by_us) clamp_to(*kill_at);

    pollfd fds[3];
    int n = 0;
    const int payload_slot = payload_fd >= 0 ? n : -1;
    if (payload_fd >= 0) fds[n++] = {payload_fd, POLLIN, 0};
    const int control_slot = control_fd >= 0 ? n : -1;
    if (control_fd >= 0) fds[n++] = {control_fd, POLLIN, 0};
    const int pid_slot = pfd >= 0 ? n : -1;
    if (pfd >= 0) fds[n++] = {pfd, POLLIN, 0};
    const int rc = ::poll(fds, static_cast<nfds_t>(n), wait_ms);
    if (rc < 0 && errno != EINTR) break;
    if (rc > 0) {
      if (payload_slot >= 0 && fds[payload_slot].revents) drain_fd(payload_fd, payload_buf);
      if (control_slot >= 0 && fds[control_slot].revents) drain_fd(control_fd, control_buf);
    }
    if (pfd < 0 || (pid_slot >= 0 && rc > 0 && fds[pid_slot].revents)) try_wait();
  }
  if (!exited) {
    ::kill(-pid, SIGKILL);
    while (::wait4(pid, &status, 0, &usage) < 0 && errno == EINTR) {
    }
  }
  result.duration = seconds_since(start);
  if (pfd >= 0) ::close(pfd);
  {
    std::lock_guard lock(mutex_);
    ++stats_.reaped_children;
  }

  // Whatever the job left behind dies with its group; the pipes then hit EOF
  // unless a process escaped the group while holding them.
  ::kill(-pid, SIGKILL);
  const auto drain_until = Clock::now() + std::chrono::seconds(1);
  for (;;) {
    pollfd fds[2];
    int n = 0;
    if (payload_fd >= 0) fds[n++] = {payload_fd, POLLIN, 0};
    if (control_fd >= 0) fds[n++] = {control_fd, POLLIN, 0};
    if (n == 0) break;
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(drain_until - Clock::now()).count();
    if (left <= 0) break;
    if (::poll(fds, static_cast<nfds_t>(n), static_cast<int>(left)) <= 0) continue;
    for (int i = 0; i < n; ++i) {
      if (!fds[i].revents) continue;
      if (fds[i].fd == payload_fd) {
        drain_fd(payload_fd, payload_buf);
      } else {
        drain_fd(control_fd, control_buf);
      }
    }
  }
  if (payload_fd >= 0) ::close(payload_fd);
  if (control_fd >= 0) ::close(control_fd);
  drain_group(pid, true);
  {
    std::lock_guard lock(mutex_);
    --in_flight_;
  }

  result.usage.cpu_seconds = static_cast<double>(usage.ru_utime.tv_sec + usage.ru_stime.tv_sec) +
                             static_cast<double>(usage.ru_utime.tv_usec + usage.ru_stime.tv_usec) / 1e6;
  result.usage.max_rss_bytes = static_cast<std::uint64_t>(usage.ru_maxrss) * 1024;

  std::vector<std::string> control_frames;
  decode_frames(control_buf, control_frames);
  std::string error_text;
  bool have_error = false;
  for (const auto& f : control_frames) {
    if (f.empty()) continue;
    const std::string_view body(f.data() + 1, f.size() - 1);
    switch (f.front()) {
      case 'E':
        have_error = true;
        if (!error_text.empty()) error_text += "; ";
        error_text += body;
        break;
      case 'A':
        try {
          std::string_view line = body;
          if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
          result.audit.push_back(parse_record(line));
        } catch (const Error&) {
        }
        break;
      case 'D':
        if (auto t = decode_trace(body)) result.decisions.push_back(std::move(*t));
        break;
      default:
        break;
    }
  }
  result.message = error_text;

  bool payload_complete = true;
  if (std::holds_alternative<TaskScript>(job)) {
    std::vector<std::string> frames;
    payload_complete = decode_frames(payload_buf, frames) && frames.size() == 1;
    if (!frames.empty()) result.payload = std::move(frames.front());
  } else {
    result.payload = std::move(payload_buf);
  }

  if (WIFEXITED(status)) {
    result.exit_code = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    result.signal = WTERMSIG(status);
  }

  if (timed_out) {
    result.status = EvalStatus::timeout;
    result.message = "terminated after " + format_seconds_text(*spec.timeout) + " (timeout)";
  } else if (result.signal) {
    const int sig = *result.signal;
    const bool limit = sig == SIGXCPU || sig == SIGXFSZ || sig == SIGKILL || sig == SIGSEGV ||
                       sig == SIGBUS;
    result.status = limit ? EvalStatus::limit_killed : EvalStatus::task_error;
    if (result.message.empty()) result.message = "killed by " + signal_name(sig);
  } else if (result.exit_code == kExitOk) {
    result.status = payload_complete ? EvalStatus::ok : EvalStatus::task_error;
    if (!payload_complete) result.message = "incomplete payload frame";
  } else if (have_error && result.exit_code == kExitSetupFailure) {
    result.status = EvalStatus::setup_error;
  } else if (have_error && result.exit_code == kExitDenied) {
    result.status = EvalStatus::denied;
  } else {
    result.status = EvalStatus::task_error;
    if (result.message.empty()) {
      result.message = "exited with status " + std::to_string(result.exit_code.value_or(-1));
    }
  }
  return result;
}

EvalResult secure_eval(const Job& job, const SandboxSpec& spec, const ProfileSet& set,
                       SupervisorOptions options) {
  Supervisor supervisor(set, options);
  return supervisor.secure_eval(job, spec);
}

}  // namespace armorcage
