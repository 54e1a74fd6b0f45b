// dftphys: preprocess, estimate, simulate, validate.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "dftphys/cli.hpp"

using namespace dftphys;

namespace {

struct Flags {
  std::string config, data, out, signals, events, fixations;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::int64_t> draws;
  std::optional<double> tol;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "JSON run configuration");
  sub->add_option("--out", f.out, "output directory");
  sub->add_option("--seed", f.seed, "base random seed");
  sub->add_option("--workers", f.workers, "worker threads")->check(CLI::PositiveNumber);
  sub->add_option("--tol", f.tol, "target absolute error of the orthant quadrature")->check(CLI::PositiveNumber);
}

cli::RunConfig resolve(const Flags& f) {
  cli::RunConfig c = f.config.empty() ? cli::RunConfig{} : cli::parse_config(cli::read_json(f.config));
  if (!f.data.empty()) c.data = f.data;
  if (!f.out.empty()) c.out = f.out;
  if (!f.signals.empty()) c.signals = f.signals;
  if (!f.events.empty()) c.events = f.events;
  if (!f.fixations.empty()) c.fixations = f.fixations;
  if (f.seed) c.seed = *f.seed;
  if (f.workers) c.workers = *f.workers;
  if (f.draws) c.draws = *f.draws;
  if (f.tol) c.tol = *f.tol;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decision field theory choice models with physiological links"};
  app.require_subcommand(1);
  Flags f;

  auto* pre = app.add_subcommand("preprocess", "derive model features from raw signals and fixations");
  add_common(pre, f);
  pre->add_option("--signals", f.signals, "per-sample signal CSV");
  pre->add_option("--events", f.events, "gap event CSV");
  pre->add_option("--fixations", f.fixations, "fixation CSV");

  auto* est = app.add_subcommand("estimate", "maximum likelihood estimation");
  add_common(est, f);
  est->add_option("--data", f.data, "choice dataset CSV");

  auto* sim = app.add_subcommand("simulate", "generate a synthetic dataset");
  add_common(sim, f);

  auto* val = app.add_subcommand("validate", "analytic probabilities against brute-force simulation");
  add_common(val, f);
  val->add_option("--draws", f.draws, "simulated runs per case")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : cli::kExitInput;
  }

  try {
    const cli::RunConfig c = resolve(f);
    if (*pre) return cli::cmd_preprocess(c, std::cout);
    if (*est) return cli::cmd_estimate(c, std::cout);
    if (*sim) return cli::cmd_simulate(c, std::cout);
    return cli::cmd_validate(c, std::cout);
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kExitInput;
  } catch (const SpecError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kExitInput;
  } catch (const StartValueError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kExitInput;
  } catch (const InvalidTaskError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kExitInput;
  } catch (const Error& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return cli::kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kExitInput;
  }
}
