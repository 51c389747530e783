#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstring>
#include <sstream>

#include "pdnf/solver.hpp"

namespace pdnf {

namespace {

std::string smt_int(int64_t v) { return v < 0 ? "(- " + std::to_string(-v) + ")" : std::to_string(v); }

std::string smt_term(const Lin& t, const std::map<int, bool>& vars) {
  std::vector<std::string> parts;
  for (auto& [v, c] : t.c) {
    bool b = vars.count(v) && vars.at(v);
    std::string x = "k" + std::to_string(v);
    if (b) x = "(ite " + x + " 1 0)";
    parts.push_back(c == 1 ? x : "(* " + smt_int(c) + " " + x + ")");
  }
  if (t.k || parts.empty()) parts.push_back(smt_int(t.k));
  if (parts.size() == 1) return parts[0];
  std::string s = "(+";
  for (auto& p : parts) s += " " + p;
  return s + ")";
}

// minimal s-expression reader for get-model output
struct Sx {
  std::string atom;
  std::vector<Sx> list;
  bool is_list = false;
};

bool parse_sx(const std::string& s, size_t& i, Sx& out) {
  while (i < s.size() && isspace(static_cast<unsigned char>(s[i]))) ++i;
  if (i >= s.size()) return false;
  if (s[i] == '(') {
    ++i;
    out.is_list = true;
    for (;;) {
      while (i < s.size() && isspace(static_cast<unsigned char>(s[i]))) ++i;
      if (i >= s.size()) return false;
      if (s[i] == ')') {
        ++i;
        return true;
      }
      Sx k;
      if (!parse_sx(s, i, k)) return false;
      out.list.push_back(std::move(k));
    }
  }
  if (s[i] == ')') return false;
  size_t j = i;
  if (s[i] == '|') {
    j = s.find('|', i + 1);
    if (j == std::string::npos) return false;
    out.atom = s.substr(i + 1, j - i - 1);
    i = j + 1;
    return true;
  }
  while (j < s.size() && !isspace(static_cast<unsigned char>(s[j])) && s[j] != '(' && s[j] != ')') ++j;
  out.atom = s.substr(i, j - i);
  i = j;
  return true;
}

bool sx_value(const Sx& x, int64_t& v) {
  if (!x.is_list) {
    if (x.atom == "true") return v = 1, true;
    if (x.atom == "false") return v = 0, true;
    try {
      size_t n;
      v = std::stoll(x.atom, &n);
      return n == x.atom.size();
    } catch (...) {
      return false;
    }
  }
  if (x.list.size() == 2 && !x.list[0].is_list && x.list[0].atom == "-") {
    if (!sx_value(x.list[1], v)) return false;
    v = -v;
    return true;
  }
  return false;
}

}  // namespace

std::string to_smtlib(const SymEnv& s) {
  std::ostringstream o;
  std::map<int, bool> vars = s.vars;
  for (auto& a : s.atoms)
    for (auto& [v, c] : a.t.c)
      if (!vars.count(v)) vars[v] = false;
  for (auto& [v, b] : vars) o << "(declare-const k" << v << (b ? " Bool)" : " Int)") << "\n";
  for (auto& a : s.atoms) {
    std::string t = smt_term(a.t, vars);
    switch (a.r) {
      case Rel::Eq: o << "(assert (= " << t << " 0))\n"; break;
      case Rel::Ne: o << "(assert (not (= " << t << " 0)))\n"; break;
      case Rel::Le: o << "(assert (<= " << t << " 0))\n"; break;
      case Rel::Lt: o << "(assert (< " << t << " 0))\n"; break;
    }
  }
  return o.str();
}

SmtLibSolver::SmtLibSolver(std::string command) : cmd_(std::move(command)) {}
SmtLibSolver::~SmtLibSolver() { stop(); }

bool SmtLibSolver::start() {
  if (pid_ > 0) return true;
  int to_child[2], from_child[2];
  if (pipe(to_child) != 0) return false;
  if (pipe(from_child) != 0) {
    close(to_child[0]);
    close(to_child[1]);
    return false;
  }
  pid_t pid = fork();
  if (pid < 0) return false;
  if (pid == 0) {
    dup2(to_child[0], 0);
    dup2(from_child[1], 1);
    int devnull = open("/dev/null", O_WRONLY);
    if (devnull >= 0) dup2(devnull, 2);
    close(to_child[1]);
    close(from_child[0]);
    execl("/bin/sh", "sh", "-c", cmd_.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(to_child[0]);
  close(from_child[1]);
  pid_ = pid;
  in_fd_ = to_child[1];
  out_fd_ = from_child[0];
  buf_.clear();
  signal(SIGPIPE, SIG_IGN);
  return send("(set-option :print-success false)\n(set-option :produce-models true)\n");
}

void SmtLibSolver::stop() {
  if (pid_ <= 0) return;
  close(in_fd_);
  close(out_fd_);
  kill(pid_, SIGKILL);
  waitpid(pid_, nullptr, 0);
  pid_ = in_fd_ = out_fd_ = -1;
  buf_.clear();
}

bool SmtLibSolver::send(const std::string& s) {
  size_t off = 0;
  while (off < s.size()) {
    ssize_t n = write(in_fd_, s.data() + off, s.size() - off);
    if (n <= 0) return false;
    off += static_cast<size_t>(n);
  }
  return true;
}

bool SmtLibSolver::read_line(std::string& line) {
  for (;;) {
    size_t nl = buf_.find('\n');
    if (nl != std::string::npos) {
      line = buf_.substr(0, nl);
      buf_.erase(0, nl + 1);
      return true;
    }
    pollfd p{out_fd_, POLLIN, 0};
    if (poll(&p, 1, 30000) <= 0) return false;
    char tmp[4096];
    ssize_t n = read(out_fd_, tmp, sizeof tmp);
    if (n <= 0) return false;
    buf_.append(tmp, static_cast<size_t>(n));
  }
}

bool SmtLibSolver::read_sexpr(std::string& out) {
  out.clear();
  int depth = 0;
  bool started = false;
  for (;;) {
    std::string line;
    if (!read_line(line)) return false;
    for (char ch : line) {
      if (ch == '(') {
        ++depth;
        started = true;
      } else if (ch == ')') {
        --depth;
      }
    }
    out += line + "\n";
    if (started && depth <= 0) return true;
  }
}

SatResult SmtLibSolver::check(const SymEnv& s) {
  std::lock_guard<std::mutex> g(mu_);
  SatResult res;
  for (int attempt = 0; attempt < 2; ++attempt) {
    if (!start()) {
      res.diag = "cannot start '" + cmd_ + "'";
      return res;
    }
    std::string script = "(set-logic QF_LIA)\n" + to_smtlib(s) + "(check-sat)\n";
    std::string line;
    if (!send(script) || !read_line(line)) {
      stop();
      continue;
    }
    while (!line.empty() && isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
    if (line == "unsat") {
      res.kind = SatKind::Unsat;
    } else if (line == "sat") {
      std::string model;
      if (!send("(get-model)\n") || !read_sexpr(model)) {
        stop();
        continue;
      }
      size_t i = 0;
      Sx root;
      res.kind = SatKind::Sat;
      if (parse_sx(model, i, root)) {
        for (auto& d : root.list) {
          // (define-fun kN () Int v)
          if (!d.is_list || d.list.size() != 5 || d.list[0].atom != "define-fun") continue;
          const std::string& nm = d.list[1].atom;
          if (nm.size() < 2 || nm[0] != 'k') continue;
          int64_t v;
          if (sx_value(d.list[4], v)) res.model[std::stoi(nm.substr(1))] = v;
        }
      }
      for (auto& [v, b] : s.vars)
        if (!res.model.count(v)) res.model[v] = 0;
      for (auto& a : s.atoms)
        for (auto& [v, c] : a.t.c)
          if (!res.model.count(v)) res.model[v] = 0;
    } else {
      res.kind = SatKind::Unknown;
      res.diag = line;
    }
    if (!send("(reset)\n(set-option :print-success false)\n(set-option :produce-models true)\n")) stop();
    return res;
  }
  res.kind = SatKind::Unknown;
  res.diag = "solver process failed";
  return res;
}

}  // namespace pdnf
