#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <regex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "pdnf/checker.hpp"

namespace fs = std::filesystem;
using namespace pdnf;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int exit_code(Verdict v) {
  switch (v) {
    case Verdict::Equivalent: return 0;
    case Verdict::Inequivalent: return 1;
    case Verdict::Unknown: return 2;
  }
  return 2;
}

std::optional<std::string> expectation(const std::string& text) {
  static const std::regex re(R"(\(\*\s*EXPECT:\s*(eq|ineq|unknown)\s*\*\))");
  std::smatch m;
  if (std::regex_search(text, m, re)) return m[1].str();
  return std::nullopt;
}

const char* short_verdict(Verdict v) {
  return v == Verdict::Equivalent ? "eq" : v == Verdict::Inequivalent ? "ineq" : "unknown";
}

CheckResult run_pair(const E& m, const E& n, const CheckOptions& o, bool oracle) {
  return oracle ? check_stacked(m, n, o) : check_equivalence(m, n, o);
}

void print_report(const CheckResult& r, std::ostream& os) {
  os << verdict_str(r.verdict);
  if (!r.reason.empty()) os << " (" << r.reason << ")";
  os << "\n";
  os << "engine: " << r.engine << "\n";
  os << "states: " << r.stats.nodes << ", memo hits: " << r.stats.memo_hits
     << ", name-reuse hits: " << r.stats.nr_hits << ", separations: " << r.stats.separations << "\n";
  os << "sigma edges (non-⋄): " << non_diamond_edges(r.sigma) << "\n";
  os << std::fixed << std::setprecision(3) << "time: " << r.seconds << " s\n";
  if (r.cex) {
    os << "counterexample (accepted by the " << (r.cex->witness == 0 ? "left" : "right")
       << " program, rejected by the other at step " << r.cex->reject_step << ": " << r.cex->reason << "):\n";
    for (auto& m : r.cex->trace) os << "  " << move_str(m) << "\n";
  }
}

struct Row {
  std::string file, expect, got, reason;
  double seconds = 0;
  bool ok = false;
  bool skipped = false;
};

int run_corpus(const std::string& dir, const CheckOptions& o, bool oracle, int jobs, bool json) {
  std::vector<std::string> files;
  for (auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".prog") files.push_back(e.path().string());
  std::sort(files.begin(), files.end());
  std::vector<Row> rows(files.size());
  std::atomic<size_t> next{0};
  auto work = [&]() {
    for (size_t i; (i = next++) < files.size();) {
      Row& r = rows[i];
      r.file = fs::path(files[i]).filename().string();
      try {
        std::string text = slurp(files[i]);
        auto ex = expectation(text);
        if (!ex) {
          r.skipped = true;
          continue;
        }
        r.expect = *ex;
        auto [a, b] = split_pair(text);
        auto res = run_pair(parse_program(a), parse_program(b), o, oracle);
        r.got = short_verdict(res.verdict);
        r.reason = res.reason;
        r.seconds = res.seconds;
        r.ok = r.got == r.expect;
      } catch (const std::exception& ex) {
        r.got = "error";
        r.reason = ex.what();
      }
    }
  };
  int n = std::max(1, jobs);
  std::vector<std::thread> pool;
  for (int k = 0; k < n; ++k) pool.emplace_back(work);
  for (auto& t : pool) t.join();

  int met = 0, total = 0;
  for (auto& r : rows) {
    if (r.skipped) {
      std::cerr << "warning: " << r.file << ": no EXPECT header, skipped\n";
      continue;
    }
    ++total;
    met += r.ok;
  }
  if (json) {
    nlohmann::json j = nlohmann::json::array();
    for (auto& r : rows)
      if (!r.skipped)
        j.push_back({{"file", r.file}, {"expect", r.expect}, {"verdict", r.got}, {"reason", r.reason},
                     {"seconds", r.seconds}, {"ok", r.ok}});
    std::cout << nlohmann::json{{"results", j}, {"met", met}, {"total", total}}.dump(2) << "\n";
  } else {
    std::cout << std::left << std::setw(36) << "file" << std::setw(9) << "expect" << std::setw(9) << "verdict"
              << std::setw(10) << "time(s)" << "note\n";
    for (auto& r : rows) {
      if (r.skipped) continue;
      std::cout << std::left << std::setw(36) << r.file << std::setw(9) << r.expect << std::setw(9) << r.got
                << std::setw(10) << std::fixed << std::setprecision(3) << r.seconds << (r.ok ? "" : "MISMATCH ")
                << r.reason << "\n";
    }
    std::cout << "expectations met: " << met << "/" << total << "\n";
  }
  return met == total ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contextual equivalence checker for higher-order stateful programs"};
  CheckOptions o;
  std::string left, right, corpus, dot, trace_out, replay_file;
  std::vector<std::string> inputs;
  bool json = false, oracle = false, deterministic = false;
  bool no_gc = false, no_norm = false, no_beta = false, no_nr = false, no_sep = false, no_memo = false,
       no_widen = false;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

  app.add_option("input", inputs, "pair file (two programs separated by a '|||' line) or a corpus directory");
  app.add_option("--left", left, "left program file");
  app.add_option("--right", right, "right program file");
  app.add_option("--corpus", corpus, "directory of .prog files with EXPECT headers");
  app.add_option("--bound-call", o.k_call, "proponent call bound")->check(CLI::NonNegativeNumber);
  app.add_option("--bound-ret", o.k_ret, "opponent call and return bound")->check(CLI::NonNegativeNumber);
  app.add_option("--bound-int", o.k_int, "internal step bound per collapse")->check(CLI::NonNegativeNumber);
  app.add_flag("--no-gc", no_gc, "disable garbage collection");
  app.add_flag("--no-normalize", no_norm, "use raw names in memo keys");
  app.add_flag("--no-beta", no_beta, "disable eager internal steps");
  app.add_flag("--no-name-reuse", no_nr, "disable name reuse");
  app.add_flag("--no-separation", no_sep, "disable separation");
  app.add_flag("--no-memo", no_memo, "disable memoisation");
  app.add_flag("--no-widen", no_widen, "keep each state's own continuation graph");
  app.add_option("--solver", o.solver, "internal or smtlib:<command>");
  app.add_option("--dot", dot, "write the saturated continuation graph in DOT");
  app.add_option("--trace", trace_out, "write the counterexample trace");
  app.add_option("--replay", replay_file, "replay a trace file on both programs instead of checking");
  app.add_flag("--json", json, "machine-readable report");
  app.add_option("--timeout", o.timeout_s, "seconds per check")->check(CLI::NonNegativeNumber);
  app.add_flag("--deterministic", deterministic, "single-threaded corpus runs");
  app.add_option("--jobs", jobs, "corpus worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--oracle", oracle, "use the stacked game");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 3;
  }
  o.gc = !no_gc;
  o.normalize = !no_norm;
  o.beta = !no_beta;
  o.name_reuse = !no_nr;
  o.separation = !no_sep;
  o.memo = !no_memo;
  o.widen = !no_widen;
  if (deterministic) jobs = 1;

  try {
    if (corpus.empty() && inputs.size() == 1 && fs::is_directory(inputs[0])) corpus = inputs[0];
    if (!corpus.empty()) return run_corpus(corpus, o, oracle, jobs, json);

    std::string a, b;
    if (!left.empty() || !right.empty()) {
      if (left.empty() || right.empty() || !inputs.empty()) throw CLI::ValidationError("--left and --right go together");
      a = slurp(left);
      b = slurp(right);
    } else if (inputs.size() == 1) {
      std::tie(a, b) = split_pair(slurp(inputs[0]));
    } else {
      std::cerr << app.help();
      return 3;
    }
    E m = parse_program(a), n = parse_program(b);

    if (!replay_file.empty()) {
      auto t = parse_trace(slurp(replay_file));
      const char* side[2] = {"left", "right"};
      const E prog[2] = {m, n};
      for (int j = 0; j < 2; ++j)
        for (Engine en : {Engine::Stackless, Engine::Stacked}) {
          auto r = replay(t, prog[j], en);
          std::cout << side[j] << " " << (en == Engine::Stackless ? "stackless" : "stacked") << ": "
                    << (r.accepted ? (r.terminated ? "accepted, terminated" : "accepted") : "rejected at step " +
                                                                                             std::to_string(r.reject_step) +
                                                                                             ": " + r.reason)
                    << "\n";
        }
      return 0;
    }

    CheckResult r = run_pair(m, n, o, oracle);
    if (json)
      std::cout << result_json(r) << "\n";
    else
      print_report(r, std::cout);
    if (!dot.empty()) std::ofstream(dot) << export_dot(r.sigma);
    if (!trace_out.empty() && r.cex) std::ofstream(trace_out) << trace_str(r.cex->trace);
    return exit_code(r.verdict);
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
  } catch (const TypeError& e) {
    std::cerr << "type error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
  }
  return 3;
}
