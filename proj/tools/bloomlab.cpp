// bloomlab command-line front end.
//
//   bloomlab <identities|lemmas|bloom|lower-bound|extremize|duality|norms>
//            [--config file.json] [--depth L] [--p P] [--seed S] [--trials N]
//            [--mode auto|exact|greedy|rect] [--out report.json] [--csv rows.csv]
//            [--reproducible]
//
// Exit status: 0 ok, 1 an exact check failed, 2 bad configuration.

#include <omp.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>
#include <string>

#include "bloomlab/experiments.hpp"
#include "bloomlab/kernels.hpp"

namespace fs = std::filesystem;
using bloomlab::ConfigError;
using nlohmann::json;

namespace {

void write_atomic(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

int thread_env() {
  const char* s = std::getenv("BLOOMLAB_THREADS");
  if (!s || !*s) return 0;
  char* end = nullptr;
  const long v = std::strtol(s, &end, 10);
  if (*end != '\0' || v < 1) throw ConfigError("BLOOMLAB_THREADS must be a positive integer");
  return static_cast<int>(v);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bloomlab: bi-parameter Bloom commutator experiments on a finite dyadic grid"};
  app.require_subcommand(1, 1);

  std::string config_path, out_path, csv_path, mode;
  std::optional<int> depth, trials;
  std::optional<double> p;
  std::optional<std::uint64_t> seed;
  bool reproducible = false;

  const char* names[] = {"identities", "lemmas", "bloom", "lower-bound",
                         "extremize",  "duality", "norms"};
  const char* about[] = {"exact decomposition identities",
                         "square / maximal function and A_i ratio studies",
                         "nested commutator norm over product BMO ratios",
                         "Gamma functional and the median-method checks",
                         "search b maximizing the Bloom ratio",
                         "weighted H1-BMO duality ratios",
                         "operator norm calibration"};
  for (int i = 0; i < 7; ++i) {
    auto* sc = app.add_subcommand(names[i], about[i]);
    sc->add_option("--config", config_path, "JSON config file");
    sc->add_option("--depth", depth, "grid depth L");
    sc->add_option("--p", p, "exponent p");
    sc->add_option("--seed", seed, "master seed");
    sc->add_option("--trials", trials, "number of trials");
    sc->add_option("--mode", mode, "product BMO mode");
    sc->add_option("--out", out_path, "JSON report path (stdout if omitted)");
    sc->add_option("--csv", csv_path, "CSV rows path");
    sc->add_flag("--reproducible", reproducible, "omit timing so reruns are byte-identical");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  const std::string cmd = app.get_subcommands().front()->get_name();

  bloomlab::ExperimentConfig cfg;
  try {
    if (const int t = thread_env(); t > 0) {
      bloomlab::kernels::set_thread_cap(t);
      omp_set_num_threads(t);
    }
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("cannot open config file " + config_path);
      json j;
      try {
        j = json::parse(in);
      } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
      }
      cfg = bloomlab::config_from_json(j);
    }
    if (depth) cfg.depth = *depth;
    if (p) cfg.p = *p;
    if (seed) cfg.seed = *seed;
    if (trials) cfg.trials = *trials;
    if (!mode.empty()) cfg.mode = mode;
    bloomlab::validate(cfg);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }

  bloomlab::ExperimentReport rep;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    rep = bloomlab::run_experiment(cmd, cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const bloomlab::PreconditionError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const bloomlab::CapabilityError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << '\n';
    return 1;
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  json j = bloomlab::to_json(rep);
  j["header"]["reproducible"] = reproducible;
  if (!reproducible) {
    j["header"]["elapsed_seconds"] = secs;
    j["header"]["threads"] = bloomlab::kernels::thread_cap() > 0 ? bloomlab::kernels::thread_cap()
                                                                 : omp_get_max_threads();
  }
  const std::string text = j.dump(2) + '\n';
  try {
    if (out_path.empty())
      std::cout << text;
    else
      write_atomic(out_path, text);
    if (!csv_path.empty()) write_atomic(csv_path, bloomlab::to_csv(rep));
  } catch (const std::exception& e) {
    std::cerr << "output error: " << e.what() << '\n';
    return 2;
  }
  for (const auto& f : rep.failures) std::cerr << "FAILED: " << f << '\n';
  std::cerr << cmd << ": " << rep.rows.size() << " rows, " << rep.excluded.size()
            << " excluded, " << rep.failures.size() << " failures\n";
  return rep.passed() ? 0 : 1;
}
