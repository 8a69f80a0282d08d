#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "armorcage/audit.hpp"
#include "armorcage/engine.hpp"
#include "armorcage/limits.hpp"
#include "armorcage/lint.hpp"
#include "armorcage/parser.hpp"
#include "armorcage/path.hpp"
#include "armorcage/sanitize.hpp"
#include "armorcage/supervisor.hpp"
#include "armorcage/task.hpp"
#include "result_json.hpp"

namespace armorcage::cli {

namespace {

struct Globals {
  std::vector<std::string> roots;
  std::string backend = "auto";
  std::string audit_log;
  std::string includes;
  int verbose = 0;
};

struct UsageError : Error {
  using Error::Error;
};

IncludeMode include_mode(const Globals& g, IncludeMode fallback) {
  if (g.includes == "strict") return IncludeMode::strict;
  if (g.includes == "lenient") return IncludeMode::lenient;
  return fallback;
}

std::vector<std::filesystem::path> search_roots(const Globals& g) {
  std::vector<std::filesystem::path> explicit_roots(g.roots.begin(), g.roots.end());
  return profile_search_roots(explicit_roots);
}

ProfileSet load_library(const Globals& g, IncludeMode fallback, std::ostream& err) {
  auto lib = load_profile_library(search_roots(g), include_mode(g, fallback));
  if (g.verbose > 0) {
    for (const auto& d : lib.diagnostics) err << "armorcage: " << d << "\n";
  }
  return std::move(lib.set);
}

std::optional<AuditSink> open_sink(const Globals& g) {
  return AuditSink::from_environment(g.audit_log.empty() ? std::nullopt
                                                         : std::optional(g.audit_log));
}

std::string read_text(const std::string& path) {
  if (path == "-") {
    std::ostringstream buf;
    buf << std::cin.rdbuf();
    return buf.str();
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

TaskScript load_task(const std::string& spec) {
  std::error_code ec;
  if (std::filesystem::is_regular_file(spec, ec)) {
    try {
      return parse_task(read_text(spec));
    } catch (const TaskError& e) {
      throw UsageError(spec + (e.line() ? ":" + std::to_string(e.line()) : std::string()) + ": " +
                       e.what());
    }
  }
  const auto names = builtin_fixture_names();
  if (std::find(names.begin(), names.end(), spec) != names.end()) return builtin_fixture(spec);
  throw UsageError("no task file or fixture named '" + spec + "'");
}

bool all_digits(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::pair<RlimitKind, RlimitValue> parse_rlimit_flag(const std::string& flag) {
  const auto eq = flag.find('=');
  if (eq == std::string::npos) throw UsageError("--rlimit expects KIND=SOFT[:HARD], got '" + flag + "'");
  const auto kind = parse_rlimit_kind(flag.substr(0, eq));
  if (!kind) throw UsageError("unknown rlimit kind '" + flag.substr(0, eq) + "'");
  const std::string values = flag.substr(eq + 1);
  const auto colon = values.find(':');
  try {
    const auto soft = parse_limit_value(values.substr(0, colon), *kind);
    const auto hard =
        colon == std::string::npos ? soft : parse_limit_value(values.substr(colon + 1), *kind);
    if (soft > hard) throw UsageError("--rlimit " + flag + ": soft exceeds hard");
    return {*kind, RlimitValue{soft, hard}};
  } catch (const OsError& e) {
    throw UsageError(e.what());
  }
}

int run_exit_code(EvalStatus s) {
  switch (s) {
    case EvalStatus::ok:
      return kRunOk;
    case EvalStatus::denied:
      return kRunDenied;
    case EvalStatus::timeout:
      return kRunTimeout;
    case EvalStatus::limit_killed:
      return kRunLimitKilled;
    case EvalStatus::task_error:
      return kRunTaskError;
    case EvalStatus::setup_error:
      return kRunSetupError;
  }
  return kRunSetupError;
}

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

void print_result(const EvalResult& r, std::ostream& out) {
  out << r.payload;
  if (!r.payload.empty() && r.payload.back() != '\n') out << "\n";
  out << "status: " << to_string(r.status);
  if (r.signal) out << " (" << signal_name(*r.signal) << ")";
  out << "\n";
  if (!r.message.empty()) out << "message: " << r.message << "\n";
  out << "cpu: " << fixed(r.usage.cpu_seconds, 3) << " s, max rss: " << r.usage.max_rss_bytes
      << " bytes, elapsed: " << fixed(r.duration, 3) << " s\n";
}

struct RunArgs {
  std::string profile;
  std::string uid;
  std::string gid;
  std::optional<int> priority;
  std::vector<std::string> rlimits;
  std::optional<double> timeout;
  std::string task;
  std::string workdir;
  bool json = false;
  int jobs = 1;
  bool dangerous = false;
  std::vector<std::string> command;
};

int cmd_run(const Globals& g, const RunArgs& a, std::ostream& out, std::ostream& err) {
  if (a.task.empty() == a.command.empty()) {
    throw UsageError("run needs exactly one of --task or -- COMMAND");
  }
  if (a.jobs < 1) throw UsageError("--jobs must be at least 1");
  const Job job = a.task.empty() ? Job(ExecCommand{a.command}) : Job(load_task(a.task));

  SandboxSpec spec;
  if (!a.profile.empty()) spec.profile = a.profile;
  if (!a.uid.empty() || !a.gid.empty()) {
    Identity id;
    if (!a.uid.empty()) {
      id.uid = all_digits(a.uid) ? UserRef(static_cast<uid_t>(std::stoul(a.uid))) : UserRef(a.uid);
    }
    if (!a.gid.empty()) {
      id.gid = all_digits(a.gid) ? GroupRef(static_cast<gid_t>(std::stoul(a.gid))) : GroupRef(a.gid);
    }
    spec.identity = id;
  }
  spec.priority = a.priority;
  spec.timeout = a.timeout;
  if (!a.workdir.empty()) spec.workdir = a.workdir;
  for (const auto& flag : a.rlimits) {
    const auto [kind, value] = parse_rlimit_flag(flag);
    spec.rlimits[kind] = value;
  }

  ProfileSet set = load_library(g, IncludeMode::strict, err);
  SupervisorOptions options;
  options.backend = *parse_backend(g.backend);
  options.allow_unbounded_fork = a.dangerous;
  Supervisor supervisor(std::move(set), options);
  if (g.verbose > 0) err << "armorcage: backend " << to_string(supervisor.backend()) << "\n";

  std::vector<EvalResult> results(static_cast<std::size_t>(a.jobs));
  if (a.jobs == 1) {
    results[0] = supervisor.secure_eval(job, spec);
  } else {
    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < results.size(); ++i) {
      threads.emplace_back([&, i] { results[i] = supervisor.secure_eval(job, spec); });
    }
    for (auto& t : threads) t.join();
  }

  std::optional<AuditSink> sink;
  int code = kRunOk;
  for (const auto& r : results) {
    if (!r.audit.empty()) {
      if (!sink) sink = open_sink(g);
      for (const auto& rec : r.audit) sink->append(rec);
    }
    if (a.json) {
      out << result_to_json(r).dump() << "\n";
    } else {
      print_result(r, out);
    }
    if (code == kRunOk) code = run_exit_code(r.status);
  }
  return code;
}

std::string expand_home(std::string path) {
  const char* env = std::getenv("HOME");
  std::string home = env ? env : "/";
  while (home.size() > 1 && home.back() == '/') home.pop_back();
  if (home == "/") home.clear();
  const std::string var = "@{HOME}";
  for (auto pos = path.find(var); pos != std::string::npos; pos = path.find(var, pos)) {
    path.replace(pos, var.size(), home);
    pos += home.size();
  }
  if (!path.empty() && path.front() == '~' && (path.size() == 1 || path[1] == '/')) {
    path = home + path.substr(1);
  }
  return path;
}

int cmd_check(const Globals& g, const std::string& profile, const std::string& raw_path,
              const std::string& modes_text, std::ostream& out, std::ostream& err) {
  AccessModeSet modes;
  try {
    modes = AccessModeSet::parse(modes_text);
  } catch (const ModeError& e) {
    throw UsageError(e.what());
  }
  if (modes.empty() || modes.exec_count() > 1) throw UsageError("invalid mode string '" + modes_text + "'");
  std::string path;
  try {
    path = normalize_path(expand_home(raw_path));
  } catch (const PathError& e) {
    throw UsageError(e.what());
  }

  const ProfileSet set = load_library(g, IncludeMode::strict, err);
  SubjectContext ctx;
  const auto caret = profile.find('^');
  ctx.profile = profile.substr(0, caret);
  if (caret != std::string::npos) ctx.hat = profile.substr(caret + 1);
  const Profile* p = set.find(*ctx.profile);
  if (!p || (ctx.hat && !p->find_hat(*ctx.hat))) {
    err << "armorcage: unknown profile '" << profile << "'\n";
    return kRunSetupError;
  }

  Operation op = Operation::read;
  if (modes.has_exec()) {
    op = Operation::exec;
  } else if (modes == AccessModeSet::read() && is_directory_path(path)) {
    op = Operation::list;
  } else if (modes.has(AccessModeSet::kWrite)) {
    op = Operation::write;
  } else if (modes == AccessModeSet::mmap()) {
    op = Operation::mmap;
  }
  const Decision d = check_access(ctx, set, AccessRequest{path, modes, op});
  out << ctx.label() << " " << path << " " << modes.to_string() << ": "
      << (d.allowed ? "allowed" : "denied");
  if (d.allowed != d.effective) out << " (not enforced: " << to_string(p->mode) << ")";
  out << "\n";
  for (const auto& m : d.matched) {
    out << "  matched: " << m.pattern << " " << m.modes.to_string()
        << (m.included ? " (included)" : "") << "\n";
  }
  if (!d.allowed) {
    const auto missing = modes.without_exec() - d.granted;
    if (!missing.empty()) out << "  missing: " << missing.to_string() << "\n";
  }
  return d.allowed ? kRunOk : kRunDenied;
}

int cmd_simulate(const Globals& g, const std::string& profile, const std::string& task,
                 bool complain, std::ostream& out, std::ostream& err) {
  if (task.empty()) throw UsageError("simulate needs --task");
  const TaskScript script = load_task(task);
  ProfileSet set = load_library(g, IncludeMode::strict, err);
  SubjectContext ctx;
  if (!profile.empty()) {
    if (!set.contains(profile)) throw UsageError("unknown profile '" + profile + "'");
    if (complain) set = set_mode(set, profile, ProfileMode::complain);
    ctx = SubjectContext::confined(profile);
  }
  RunOptions opts;
  opts.mode = RunMode::simulate;
  const TaskOutcome outcome = run_task(script, ctx, set, opts);
  bool findings = outcome.status != TaskStatus::ok;
  for (const auto& t : outcome.trace) {
    out << "step " << t.step << " " << to_string(t.operation) << " " << t.path << " "
        << t.requested.to_string() << " " << (t.allowed ? "allowed" : "denied");
    if (t.allowed != t.effective) out << " (complain)";
    out << "\n";
    findings = findings || !t.allowed;
  }
  if (!outcome.report.empty()) out << outcome.report << "\n";
  if (!outcome.audit.empty()) {
    auto sink = open_sink(g);
    for (const auto& rec : outcome.audit) {
      if (!rec.allowed) sink->append(rec);
    }
  }
  return findings ? kFindings : kClean;
}

int cmd_lint(const Globals& g, const std::vector<std::string>& files, std::ostream& out,
             std::ostream& err) {
  std::vector<Diagnostic> diags;
  bool failed = false;
  const auto mode = include_mode(g, IncludeMode::lenient);
  if (files.empty()) {
    const auto lib = load_profile_library(search_roots(g), mode);
    for (const auto& d : lib.diagnostics) {
      err << d << "\n";
      failed = true;
    }
    diags = lint_profiles(lib.set);
  } else {
    const auto roots = search_roots(g);
    for (const auto& f : files) {
      std::error_code ec;
      if (!std::filesystem::is_regular_file(f, ec)) throw UsageError("cannot read " + f);
      try {
        const auto set = parse_profile_file(f, roots, mode);
        auto found = lint_profiles(set);
        diags.insert(diags.end(), found.begin(), found.end());
      } catch (const ParseError& e) {
        out << e.what() << "\n";
        failed = true;
      }
    }
  }
  for (const auto& d : diags) out << format_diagnostic(d) << "\n";
  return failed || !diags.empty() ? kFindings : kClean;
}

int cmd_logprof(const Globals& g, const std::string& log, bool generalize, std::ostream& out,
                std::ostream& err) {
  const ParsedLog parsed = parse_log(read_text(log));
  for (const auto& d : parsed.diagnostics) {
    err << log << ":" << d.line << ": " << d.message << "\n";
  }
  const ProfileSet set = load_library(g, IncludeMode::strict, err);
  SuggestOptions options;
  options.generalize = generalize;
  const auto suggestions = suggest_rules(parsed.records, set, options);
  out << format_suggestions(suggestions);
  return suggestions.empty() ? kClean : kFindings;
}

int cmd_limits(std::optional<int> pid, std::ostream& out) {
  out << std::left << std::setw(12) << "KIND" << std::setw(22) << "SOFT" << std::setw(22)
      << "HARD"
      << "UNIT\n";
  for (const auto kind : kAllRlimitKinds) {
    const auto v = get_rlimit(kind, pid ? std::optional<pid_t>(*pid) : std::nullopt);
    out << std::left << std::setw(12) << to_string(kind) << std::setw(22) << format_limit(v.soft)
        << std::setw(22) << format_limit(v.hard) << to_string(unit_of(kind)) << "\n";
  }
  return kClean;
}

int cmd_sanitize(const std::vector<std::string>& inputs, std::ostream& out) {
  if (inputs.empty()) {
    std::string line;
    while (std::getline(std::cin, line)) out << sanitize_identifier(line) << "\n";
  }
  for (const auto& s : inputs) out << sanitize_identifier(s) << "\n";
  return kClean;
}

}  // namespace

int main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sandboxed execution under AppArmor-style profiles and resource limits",
               "armorcage"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", "armorcage 0.4.0");

  Globals g;
  app.add_option("--profile-root", g.roots, "Profile search root (repeatable)");
  app.add_option("--backend", g.backend, "auto, native or simulated")
      ->check(CLI::IsMember({"auto", "native", "simulated"}));
  app.add_option("--audit-log", g.audit_log, "Audit log file (default: $ARMORCAGE_AUDIT_LOG, then stderr)");
  app.add_option("--includes", g.includes, "Unresolved includes: strict or lenient")
      ->check(CLI::IsMember({"strict", "lenient"}));
  app.add_flag("-v,--verbose", g.verbose, "More diagnostics");

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Run a task or command in a supervised child");
  run->add_option("--profile", run_args.profile, "Profile to enter");
  run->add_option("--uid", run_args.uid, "User name or id");
  run->add_option("--gid", run_args.gid, "Group name or id");
  run->add_option("--priority", run_args.priority, "Niceness in [-20, 19]");
  run->add_option("--rlimit", run_args.rlimits, "KIND=SOFT[:HARD] (repeatable)");
  run->add_option("--timeout", run_args.timeout, "Wall-clock limit in seconds");
  run->add_option("--task", run_args.task, "Task file or fixture name");
  run->add_option("--workdir", run_args.workdir, "Working directory for the job");
  run->add_flag("--json", run_args.json, "Print the result as JSON");
  run->add_option("--jobs", run_args.jobs, "Run N copies concurrently");
  run->add_flag("--dangerous", run_args.dangerous, "Allow unbounded fork loops");
  run->add_option("command", run_args.command, "Command after --");

  std::string check_profile, check_path, check_modes;
  auto* check = app.add_subcommand("check", "Decide one access request");
  check->add_option("profile", check_profile)->required();
  check->add_option("path", check_path)->required();
  check->add_option("modes", check_modes)->required();

  std::string sim_profile, sim_task;
  bool sim_complain = false;
  auto* simulate = app.add_subcommand("simulate", "Replay a task through the engine only");
  simulate->add_option("--profile", sim_profile, "Profile to evaluate against");
  simulate->add_option("--task", sim_task, "Task file or fixture name")->required();
  simulate->add_flag("--complain", sim_complain, "Treat the profile as complain mode");

  std::vector<std::string> lint_files;
  auto* lint = app.add_subcommand("lint", "Report policy hazards");
  lint->add_option("files", lint_files, "Profile files (default: the whole library)");

  std::string logprof_file;
  bool generalize = false;
  auto* logprof = app.add_subcommand("logprof", "Suggest rules from an audit log");
  logprof->add_option("log", logprof_file, "Audit log ('-' for stdin)")->required();
  logprof->add_flag("--generalize", generalize, "Collapse sibling files into dir/*");

  std::optional<int> limits_pid;
  auto* limits = app.add_subcommand("limits", "Show resource limits");
  limits->add_option("--pid", limits_pid, "Read limits of another process");

  std::vector<std::string> sanitize_inputs;
  auto* sanitize = app.add_subcommand("sanitize", "Strip everything outside [a-zA-Z0-9]");
  sanitize->add_option("input", sanitize_inputs);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (run->parsed()) return cmd_run(g, run_args, out, err);
    if (check->parsed()) return cmd_check(g, check_profile, check_path, check_modes, out, err);
    if (simulate->parsed()) return cmd_simulate(g, sim_profile, sim_task, sim_complain, out, err);
    if (lint->parsed()) return cmd_lint(g, lint_files, out, err);
    if (logprof->parsed()) return cmd_logprof(g, logprof_file, generalize, out, err);
    if (limits->parsed()) return cmd_limits(limits_pid, out);
    if (sanitize->parsed()) return cmd_sanitize(sanitize_inputs, out);
  } catch (const UsageError& e) {
    err << "armorcage: " << e.what() << "\n";
    return kUsage;
  } catch (const OsError& e) {
    err << "armorcage: " << e.what() << "\n";
    return run->parsed() ? kRunSetupError : kUsage;
  } catch (const Error& e) {
    err << "armorcage: " << e.what() << "\n";
    return run->parsed() || check->parsed() ? kRunSetupError : kUsage;
  }
  return kUsage;
}

}  // namespace armorcage::cli
