#include "armorcage/engine.hpp"

#include <random>

#include "armorcage/path.hpp"

namespace armorcage {

std::string_view to_string(Operation op) {
  switch (op) {
    case Operation::read:
      return "read";
    case Operation::write:
      return "write";
    case Operation::mmap:
      return "mmap";
    case Operation::exec:
      return "exec";
    case Operation::list:
      return "list";
  }
  return "read";
}

std::optional<Operation> parse_operation(std::string_view text) {
  for (auto op : {Operation::read, Operation::write, Operation::mmap, Operation::exec,
                  Operation::list}) {
    if (to_string(op) == text) return op;
  }
  return std::nullopt;
}

std::string SubjectContext::label() const {
  if (!profile) return "unconfined";
  return hat ? *profile + "^" + *hat : *profile;
}

AccessRequest AccessRequest::read(std::string path) {
  return {std::move(path), AccessModeSet::read(), Operation::read};
}

AccessRequest AccessRequest::write(std::string path) {
  return {std::move(path), AccessModeSet::write(), Operation::write};
}

AccessRequest AccessRequest::mmap(std::string path) {
  return {std::move(path), AccessModeSet::mmap(), Operation::mmap};
}

AccessRequest AccessRequest::exec(std::string path) {
  return {std::move(path), AccessModeSet::exec(ExecMode::inherit), Operation::exec};
}

AccessRequest AccessRequest::list(std::string path) {
  if (path.empty() || path.back() != '/') path += '/';
  return {std::move(path), AccessModeSet::read(), Operation::list};
}

void AccessRequest::validate() const {
  if (requested.empty()) throw Error("empty access request for " + path);
  if (normalize_path(path) != path) throw Error("request path is not normalized: " + path);
  if (operation == Operation::list &&
      (requested != AccessModeSet::read() || !is_directory_path(path))) {
    throw Error("list request must be r on a directory path: " + path);
  }
  if (operation == Operation::exec && requested.exec_count() != 1) {
    throw Error("exec request needs exactly one exec mode: " + path);
  }
}

namespace {

const Profile& resolve_active(const SubjectContext& ctx, const ProfileSet& set,
                              const Profile** top) {
  const Profile* p = set.find(*ctx.profile);
  if (!p) throw PolicyError(PolicyErrc::unknown_profile, "unknown profile '" + *ctx.profile + "'");
  *top = p;
  if (!ctx.hat) return *p;
  const Profile* h = p->find_hat(*ctx.hat);
  if (!h) {
    throw PolicyError(PolicyErrc::unknown_hat,
                      "no hat '" + *ctx.hat + "' in profile " + *ctx.profile);
  }
  return *h;
}

bool satisfied(const AccessRequest& req, AccessModeSet granted) {
  if (!granted.without_exec().contains(req.requested.without_exec())) return false;
  if (!req.requested.has_exec()) return true;
  if (req.operation == Operation::exec) return granted.has_exec();
  return granted.contains(req.requested.exec_part());
}

AuditRecord make_record(const SubjectContext& ctx, const AccessRequest& req, bool effective) {
  AuditRecord rec;
  rec.profile = ctx.profile.value_or("unconfined");
  rec.hat = ctx.hat;
  rec.operation = req.operation;
  rec.path = req.path;
  rec.requested = req.requested;
  rec.allowed = false;
  rec.effective = effective;
  return rec;
}

// Exec modes granted to `exec_path` by the active rules.
AccessModeSet exec_grants(const Profile& active, std::string_view exec_path) {
  AccessModeSet u;
  for (const auto* rule : active.effective_rules()) {
    if (rule->pattern.matches(exec_path)) u |= rule->modes.exec_part();
  }
  return u;
}

HatToken random_token() {
  static thread_local std::mt19937_64 gen{std::random_device{}()};
  return HatToken{gen()};
}

bool tokens_equal(HatToken a, HatToken b) {
  volatile std::uint64_t diff = a.value ^ b.value;
  std::uint64_t folded = 0;
  for (int i = 0; i < 8; ++i) folded |= (diff >> (8 * i)) & 0xffu;
  return folded == 0;
}

void reject_poisoned(const SubjectContext& ctx) {
  if (ctx.poisoned) {
    throw PolicyError(PolicyErrc::poisoned, "context " + ctx.label() + " is poisoned");
  }
}

}  // namespace

Decision check_access(const SubjectContext& ctx, const ProfileSet& set,
                      const AccessRequest& req) {
  req.validate();
  Decision d;
  if (ctx.poisoned) {
    d.audit = make_record(ctx, req, false);
    return d;
  }
  if (ctx.is_unconfined()) {
    d.allowed = d.effective = true;
    d.granted = AccessModeSet(AccessModeSet::kAllMask);
    return d;
  }
  const Profile* top = set.find(*ctx.profile);
  const Profile* active = top;
  if (top && ctx.hat) active = top->find_hat(*ctx.hat);
  if (!active) {
    d.audit = make_record(ctx, req, false);
    return d;
  }
  if (top->mode == ProfileMode::disabled) {
    d.allowed = d.effective = true;
    return d;
  }
  std::size_t own = 0;
  for (const auto& rule : active->rules) {
    if (rule.pattern.matches(req.path)) {
      d.granted |= rule.modes;
      d.matched.push_back({*ctx.profile, ctx.hat, own, false, rule.pattern.source(), rule.modes});
    }
    ++own;
  }
  std::size_t inc = 0;
  for (const auto& rule : active->included_rules) {
    if (rule.pattern.matches(req.path)) {
      d.granted |= rule.modes;
      d.matched.push_back({*ctx.profile, ctx.hat, inc, true, rule.pattern.source(), rule.modes});
    }
    ++inc;
  }
  d.allowed = satisfied(req, d.granted);
  d.effective = top->mode == ProfileMode::complain ? true : d.allowed;
  if (!d.allowed) d.audit = make_record(ctx, req, d.effective);
  return d;
}

bool check_capability(const SubjectContext& ctx, const ProfileSet& set,
                      std::string_view capability) {
  if (ctx.poisoned) return false;
  if (ctx.is_unconfined()) return true;
  const Profile* top = set.find(*ctx.profile);
  if (!top) return false;
  if (top->mode != ProfileMode::enforce) return true;
  const Profile* active = ctx.hat ? top->find_hat(*ctx.hat) : top;
  return active && active->has_capability(capability);
}

ExecTransition exec_transition(const SubjectContext& ctx, const ProfileSet& set,
                               std::string_view exec_path) {
  reject_poisoned(ctx);
  if (ctx.is_unconfined()) return {ctx, std::nullopt, std::nullopt};
  const Profile* top = nullptr;
  const Profile& active = resolve_active(ctx, set, &top);
  if (top->mode == ProfileMode::disabled) return {ctx, std::nullopt, std::nullopt};
  const auto grants = exec_grants(active, exec_path);
  const std::string path(exec_path);
  if (grants.exec_count() == 0) {
    if (top->mode == ProfileMode::complain) return {ctx, std::nullopt, std::nullopt};
    throw PolicyError(PolicyErrc::not_executable,
                      ctx.label() + " has no exec permission for " + path);
  }
  if (grants.exec_count() > 1) {
    throw PolicyError(PolicyErrc::conflicting_exec_modes,
                      "conflicting exec modes " + grants.to_string() + " for " + path + " in " +
                          ctx.label());
  }
  const ExecMode mode = *grants.exec_mode();
  switch (mode) {
    case ExecMode::inherit:
      return {ctx, mode, std::nullopt};
    case ExecMode::discrete: {
      const auto attached = set.attached_to(exec_path);
      if (attached.empty()) {
        throw PolicyError(PolicyErrc::no_attached_profile, "no profile attached to " + path);
      }
      return {SubjectContext::confined(attached.front()->name), mode, std::nullopt};
    }
    case ExecMode::child: {
      const std::string hat(last_segment(exec_path));
      if (ctx.hat || !top->find_hat(hat)) {
        throw PolicyError(PolicyErrc::unknown_hat,
                          "no hat '" + hat + "' in profile " + top->name + " for " + path);
      }
      SubjectContext next = SubjectContext::confined(top->name);
      next.hat = hat;
      next.token = random_token();
      return {next, mode, std::nullopt};
    }
    case ExecMode::unconfined:
      return {SubjectContext::unconfined(), mode,
              "dangerous: " + path + " executes unconfined (ux) from " + ctx.label()};
  }
  return {ctx, mode, std::nullopt};
}

SubjectContext change_profile(const SubjectContext& ctx, const ProfileSet& set,
                              std::string_view target) {
  reject_poisoned(ctx);
  const std::string to(target);
  if (!set.contains(target)) {
    throw PolicyError(PolicyErrc::unknown_profile, "unknown profile '" + to + "'");
  }
  if (ctx.is_unconfined()) return SubjectContext::confined(to);
  const Profile* source = set.find(*ctx.profile);
  if (source && (source->mode != ProfileMode::enforce || source->allows_transition_to(target))) {
    return SubjectContext::confined(to);
  }
  throw PolicyError(PolicyErrc::denied_transition,
                    "Failed to change profile from: " + *ctx.profile + " to: " + to);
}

void change_hat(SubjectContext& ctx, const ProfileSet& set, std::string_view hat,
                HatToken token) {
  reject_poisoned(ctx);
  if (ctx.is_unconfined()) {
    throw PolicyError(PolicyErrc::unconfined, "change_hat requires a confined context");
  }
  if (ctx.hat) {
    throw PolicyError(PolicyErrc::already_in_hat, "already in hat '" + *ctx.hat + "'");
  }
  const Profile* p = set.find(*ctx.profile);
  if (!p) throw PolicyError(PolicyErrc::unknown_profile, "unknown profile '" + *ctx.profile + "'");
  if (!p->find_hat(hat)) {
    throw PolicyError(PolicyErrc::unknown_hat,
                      "no hat '" + std::string(hat) + "' in profile " + p->name);
  }
  ctx.hat = std::string(hat);
  ctx.token = token;
}

void revert_hat(SubjectContext& ctx, HatToken token) {
  reject_poisoned(ctx);
  if (!ctx.hat || !ctx.token) {
    throw PolicyError(PolicyErrc::no_active_hat, "no active hat to revert in " + ctx.label());
  }
  if (!tokens_equal(*ctx.token, token)) {
    ctx.poisoned = true;
    throw SecurityViolation("hat token mismatch in " + ctx.label() + "; context poisoned");
  }
  ctx.hat.reset();
  ctx.token.reset();
}

ProfileSet set_mode(const ProfileSet& set, std::string_view profile, ProfileMode mode) {
  ProfileSet out = set;
  Profile* p = out.find_mutable(profile);
  if (!p) {
    throw PolicyError(PolicyErrc::unknown_profile, "unknown profile '" + std::string(profile) + "'");
  }
  p->mode = mode;
  for (auto& hat : p->hats) hat.mode = mode;
  return out;
}

}  // namespace armorcage
