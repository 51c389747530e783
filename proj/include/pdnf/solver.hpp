#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <vector>

namespace pdnf {

// Linear term: sum c_i * k_i + k
struct Lin {
  std::map<int, int64_t> c;
  int64_t k = 0;

  static Lin constant(int64_t v);
  static Lin var(int id, int64_t coef = 1);
  Lin operator+(const Lin& o) const;
  Lin operator-(const Lin& o) const;
  Lin scale(int64_t s) const;
  bool ground() const { return c.empty(); }
  bool operator==(const Lin& o) const = default;
};

enum class Rel { Eq, Ne, Le, Lt };  // term rel 0

struct Atom {
  Lin t;
  Rel r = Rel::Eq;
  bool operator==(const Atom& o) const = default;
};

Atom negate(const Atom& a);
std::string atom_str(const Atom& a);
bool eval_atom(const Atom& a, const std::map<int, int64_t>& m);

// Conjunction of atoms over symbolic constants; Bool constants range over {0,1}.
struct SymEnv {
  std::vector<Atom> atoms;
  std::map<int, bool> vars;  // id -> is_bool
  int next = 0;

  int fresh(bool is_bool);
  std::set<int> consts() const;
};

SymEnv assert_constraint(SymEnv s, const Atom& a);
std::string sym_env_str(const SymEnv& s);

enum class SatKind { Sat, Unsat, Unknown };

struct SatResult {
  SatKind kind = SatKind::Unknown;
  std::map<int, int64_t> model;
  std::string diag;
};

class Solver {
 public:
  virtual ~Solver() = default;
  virtual SatResult check(const SymEnv& s) = 0;
  virtual std::string name() const = 0;
};

struct InternalOptions {
  int64_t bound = int64_t{1} << 16;  // search domain |k| <= bound
  int64_t node_limit = 200000;
  int propagate_rounds = 64;
  size_t fm_limit = 4000;
};

class InternalSolver : public Solver {
 public:
  explicit InternalSolver(InternalOptions o = {}) : o_(o) {}
  SatResult check(const SymEnv& s) override;
  std::string name() const override { return "internal"; }

 private:
  InternalOptions o_;
};

// SMT-LIB2 over a child process (one process per instance, restarted on failure)
class SmtLibSolver : public Solver {
 public:
  explicit SmtLibSolver(std::string command);
  ~SmtLibSolver() override;
  SatResult check(const SymEnv& s) override;
  std::string name() const override { return "smtlib:" + cmd_; }

 private:
  bool start();
  void stop();
  bool send(const std::string& s);
  bool read_line(std::string& line);
  bool read_sexpr(std::string& out);
  std::string cmd_;
  int pid_ = -1, in_fd_ = -1, out_fd_ = -1;
  std::string buf_;
  std::mutex mu_;
};

std::string to_smtlib(const SymEnv& s);

// Memoizing wrapper; verdict caching keyed by the printed constraint set.
class CachedSolver : public Solver {
 public:
  explicit CachedSolver(std::shared_ptr<Solver> inner) : inner_(std::move(inner)) {}
  SatResult check(const SymEnv& s) override;
  std::string name() const override { return inner_->name(); }

 private:
  std::shared_ptr<Solver> inner_;
  std::map<std::string, SatResult> cache_;
  std::mutex mu_;
};

std::shared_ptr<Solver> make_solver(const std::string& name);

// Drop constants unrelated to `live`: satisfiable dead components vanish,
// dead constants are eliminated where the projection is exact.
SymEnv simplify(const SymEnv& s, const std::set<int>& live, Solver& solver);

}  // namespace pdnf
