#include "testing.hpp"

#include <dirent.h>
#include <grp.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace armorcage::testing {

std::filesystem::path profile_dir() { return ARMORCAGE_TEST_PROFILES; }
std::filesystem::path task_dir() { return ARMORCAGE_TEST_TASKS; }

ProfileSet corpus() {
  auto lib = load_profile_library({profile_dir()}, IncludeMode::strict);
  if (!lib.diagnostics.empty()) throw Error("corpus did not load cleanly: " + lib.diagnostics.front());
  return std::move(lib.set);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ProfileSet parse_text(std::string_view text, IncludeMode mode) {
  const DirectoryResolver resolver({profile_dir()});
  ParseOptions options;
  options.include_mode = mode;
  return parse_profiles(text, "<test>", resolver, options);
}

std::uint64_t test_seed() {
  if (const char* s = std::getenv("ARMORCAGE_TEST_SEED")) return std::strtoull(s, nullptr, 10);
  return 20260415;
}

std::mt19937_64 make_rng(std::uint64_t salt) { return std::mt19937_64(test_seed() * 1000003 + salt); }

ChildOutcome run_in_child(const std::function<int(std::string&)>& body, bool drop) {
  int fds[2];
  if (::pipe(fds) != 0) throw Error("pipe failed");
  const pid_t pid = ::fork();
  if (pid < 0) throw Error("fork failed");
  if (pid == 0) {
    ::close(fds[0]);
    std::string message;
    int code = 0;
    if (drop && (::setgroups(0, nullptr) != 0 || ::setresgid(kNogroup, kNogroup, kNogroup) != 0 ||
                 ::setresuid(kNobody, kNobody, kNobody) != 0)) {
      message = "could not drop to nobody";
      code = 120;
    } else {
      try {
        code = body(message);
      } catch (const std::exception& e) {
        message += std::string("uncaught: ") + e.what();
        code = 121;
      }
    }
    if (!message.empty()) (void)!::write(fds[1], message.data(), message.size());
    ::_exit(code);
  }
  ::close(fds[1]);
  ChildOutcome out;
  char buf[4096];
  ssize_t n;
  while ((n = ::read(fds[0], buf, sizeof buf)) > 0) out.message.append(buf, static_cast<std::size_t>(n));
  ::close(fds[0]);
  int status = 0;
  ::waitpid(pid, &status, 0);
  if (WIFEXITED(status)) out.exit_code = WEXITSTATUS(status);
  if (WIFSIGNALED(status)) out.signal = WTERMSIG(status);
  return out;
}

std::size_t count_processes(uid_t uid) {
  std::size_t count = 0;
  DIR* dir = ::opendir("/proc");
  if (!dir) return 0;
  while (const dirent* e = ::readdir(dir)) {
    if (e->d_name[0] < '0' || e->d_name[0] > '9') continue;
    std::ifstream status(std::string("/proc/") + e->d_name + "/status");
    std::string line;
    while (std::getline(status, line)) {
      if (line.rfind("Uid:", 0) == 0) {
        std::istringstream fields(line.substr(4));
        uid_t real = 0;
        if (fields >> real && real == uid) ++count;
        break;
      }
    }
  }
  ::closedir(dir);
  return count;
}

TempDir::TempDir() {
  std::string tmpl = (std::filesystem::temp_directory_path() / "armorcage-test-XXXXXX").string();
  if (!::mkdtemp(tmpl.data())) throw Error("mkdtemp failed");
  path_ = tmpl;
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::filesystem::path TempDir::write(const std::string& name, std::string_view content) const {
  const auto p = path_ / name;
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << content;
  return p;
}

}  // namespace armorcage::testing
