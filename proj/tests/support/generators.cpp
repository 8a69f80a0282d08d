#include "generators.hpp"

#include <algorithm>

#include "armorcage/audit.hpp"

namespace armorcage::testing {

namespace {
const std::vector<std::string> kNames = {"a", "b", "c.pdf"};

std::vector<std::string> split(const std::string& path) {
  std::vector<std::string> out;
  std::string cur;
  for (std::size_t i = 1; i < path.size(); ++i) {
    if (path[i] == '/') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += path[i];
    }
  }
  out.push_back(cur);
  return out;
}
}  // namespace

SegPattern random_seg_pattern(std::mt19937_64& rng) {
  SegPattern p;
  const int depth = 1 + static_cast<int>(rng() % 3);
  for (int i = 0; i < depth; ++i) {
    const auto kind = rng() % 5;
    std::vector<std::string> alts;
    std::string src;
    if (kind == 0) {
      alts = {"*"};
      src = "*";
    } else if (kind == 1 && i == depth - 1) {
      alts = {"**"};
      src = "**";
    } else if (kind == 2) {
      alts = {kNames[rng() % 3], kNames[rng() % 3]};
      src = "{" + alts[0] + "," + alts[1] + "}";
    } else {
      alts = {kNames[rng() % 3]};
      src = alts[0];
    }
    p.segs.push_back(alts);
    p.source += "/" + src;
  }
  if (rng() % 4 == 0 && p.segs.back()[0] != "**") {
    p.source += "/";
    p.segs.push_back({""});
  }
  return p;
}

bool seg_match(const SegPattern& p, const std::string& path) {
  const auto segs = split(path);
  for (std::size_t i = 0; i < p.segs.size(); ++i) {
    const auto& alts = p.segs[i];
    if (alts[0] == "**") return i < segs.size() && !segs[i].empty();
    if (i >= segs.size()) return false;
    if (alts[0] == "*") {
      if (segs[i].empty()) return false;
      continue;
    }
    if (std::find(alts.begin(), alts.end(), segs[i]) == alts.end()) return false;
  }
  return segs.size() == p.segs.size();
}

std::vector<std::string> seg_universe() {
  std::vector<std::string> out;
  for (const auto& a : kNames) {
    out.push_back("/" + a);
    out.push_back("/" + a + "/");
    for (const auto& b : kNames) {
      out.push_back("/" + a + "/" + b);
      out.push_back("/" + a + "/" + b + "/");
      for (const auto& c : kNames) {
        out.push_back("/" + a + "/" + b + "/" + c);
        out.push_back("/" + a + "/" + b + "/" + c + "/");
      }
    }
  }
  return out;
}

OracleReport run_engine_oracle(std::mt19937_64& rng, int rounds) {
  OracleReport report;
  const auto paths = seg_universe();
  const std::vector<std::string> rule_modes = {"r", "w", "rw", "m", "rm", "rix", "px", "rwm", "ux", "cs"};
  const std::vector<std::string> requests = {"r", "w", "rw", "m", "x"};
  for (int round = 0; round < rounds; ++round) {
    const int n = static_cast<int>(rng() % 5);
    std::vector<SegPattern> pats;
    std::vector<AccessModeSet> modes;
    std::string text = "profile o {\n";
    for (int i = 0; i < n; ++i) {
      pats.push_back(random_seg_pattern(rng));
      modes.push_back(AccessModeSet::parse(rule_modes[rng() % rule_modes.size()]));
      text += "  " + pats.back().source + " " + modes.back().to_string() + ",\n";
    }
    text += "}\n";
    const auto set = parse_text(text);
    const auto ctx = SubjectContext::confined("o");
    for (const auto& path : paths) {
      AccessModeSet granted;
      std::size_t hits = 0;
      for (std::size_t i = 0; i < pats.size(); ++i) {
        if (seg_match(pats[i], path)) {
          granted |= modes[i];
          ++hits;
        }
      }
      for (const auto& r : requests) {
        AccessRequest req;
        bool expected;
        if (r == "x") {
          req = AccessRequest::exec(path);
          expected = granted.has_exec();
        } else {
          const auto m = AccessModeSet::parse(r);
          req = AccessRequest{path, m, m.has(AccessModeSet::kWrite) ? Operation::write : Operation::read};
          expected = granted.contains(m);
        }
        const auto d = check_access(ctx, set, req);
        ++report.cases;
        if (d.allowed != expected || d.effective != expected || d.granted != granted ||
            d.matched.size() != hits || d.audit.has_value() == expected) {
          report.mismatch = text + path + " " + r + ": engine " + (d.allowed ? "allowed" : "denied") +
                            " granted " + d.granted.to_string() + ", oracle " +
                            (expected ? "allowed" : "denied") + " granted " + granted.to_string();
          return report;
        }
      }
    }
  }
  return report;
}

ScriptSandbox::ScriptSandbox() {
  for (const char* f : {"d1/a.txt", "d1/b.txt", "d1/c.txt", "d2/x.dat", "d2/deep/y.dat", "top.txt"}) {
    files.push_back(dir.write(f, "1234 5678 9012 3456\n").string());
  }
  const std::string root = dir.path().string();
  dirs = {root + "/", root + "/d1/", root + "/d2/", root + "/d2/deep/"};
}

std::string random_script(std::mt19937_64& rng, const ScriptSandbox& box) {
  std::string s;
  const std::string root = box.dir.path().string();
  for (int i = 0; i < 2 + static_cast<int>(rng() % 7); ++i) {
    switch (rng() % 6) {
      case 0:
        s += "read " + box.files[rng() % box.files.size()] + "\n";
        break;
      case 1:
        s += "write " + root + "/out" + std::to_string(rng() % 4) + " 00\n";
        break;
      case 2:
        s += "list " + box.dirs[rng() % box.dirs.size()] + "\n";
        break;
      case 3:
        s += std::string("exec ") + (rng() % 2 ? "/bin/true" : "/usr/bin/env") + "\n";
        break;
      case 4:
        s += "scan " + box.dirs[1 + rng() % 3] + " \"[0-9]{4}\" 1000\n";
        break;
      default:
        s += "emit 0a\n";
    }
  }
  return s;
}

std::string random_sim_profile(std::mt19937_64& rng, const ScriptSandbox& box) {
  const std::string root = box.dir.path().string();
  const std::vector<std::string> pats = {root + "/d1/*", root + "/**", root + "/d2/", root + "/top.txt",
                                         "/bin/true", "/etc/group"};
  const std::vector<std::string> modes = {"r", "w", "rw", "m", "rix"};
  std::string text = "profile sim {\n";
  for (int i = 0; i < static_cast<int>(rng() % 4); ++i) {
    text += "  " + pats[rng() % pats.size()] + " " + modes[rng() % modes.size()] + ",\n";
  }
  return text + "}\n";
}

LogprofReport run_logprof_roundtrip(std::mt19937_64& rng, int scripts) {
  LogprofReport report;
  const ScriptSandbox box;
  RunOptions sim;
  sim.mode = RunMode::simulate;
  for (int i = 0; i < scripts; ++i) {
    const auto profile_text = random_sim_profile(rng, box);
    const auto script = parse_task_text(random_script(rng, box));
    const auto base = parse_text(profile_text);
    const auto learn =
        run_task(script, SubjectContext::confined("sim"), set_mode(base, "sim", ProfileMode::complain), sim);
    if (learn.status != TaskStatus::ok) {
      report.failure = "complain run stopped: " + learn.report;
      return report;
    }
    std::string log;
    for (const auto& r : learn.audit) log += format_record(r);
    const auto parsed = parse_log(log);
    SuggestOptions opts;
    opts.generalize = i % 2 == 1;
    const auto suggestions = suggest_rules(parsed.records, base, opts);
    report.suggestions += suggestions.size();
    const auto merged = apply_suggestions(base, suggestions);
    const auto replay = run_task(script, SubjectContext::confined("sim"), merged, sim);
    for (const auto& t : replay.trace) report.replay_denials += t.allowed ? 0 : 1;
    if (replay.status != TaskStatus::ok && report.failure.empty()) {
      report.failure = "script " + std::to_string(i) + ": " + replay.report + "\n" + profile_text +
                       format_suggestions(suggestions) + to_task_text(script);
    }
    ++report.scripts;
  }
  return report;
}

}  // namespace armorcage::testing
