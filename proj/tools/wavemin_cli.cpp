// Copyright 2026 The wavemin Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <iostream>
#include <string>

#include <Eigen/Core>

#include "CLI11.hpp"
#include "wavemin/run.hpp"

namespace {

void apply_thread_env() {
  const char* env = std::getenv("WAVEMIN_THREADS");
  if (!env) return;
  try {
    const int n = std::stoi(env);
    if (n > 0) Eigen::setNbThreads(n);
  } catch (const std::exception&) {
    std::cerr << "ignoring WAVEMIN_THREADS='" << env << "'\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wavemin: variational solvers for time-harmonic wave problems in lossy media"};
  app.require_subcommand(1);

  std::string config;
  std::string out_dir = ".";
  wavemin::RunOverrides ov;
  double tolerance = 0.0;
  int max_iters = 0;
  int order = 0;
  std::uint64_t seed = 0;

  const std::pair<wavemin::Subcommand, const char*> subs[] = {
      {wavemin::Subcommand::solve, "Minimize the functional and write fields and a summary"},
      {wavemin::Subcommand::validate, "Check the configuration and the passivity of every region"},
      {wavemin::Subcommand::tomography, "Evaluate the boundary-measurement bound on trial fields"},
      {wavemin::Subcommand::hs_bound, "Hashin-Shtrikman bounds with a comparison medium"},
      {wavemin::Subcommand::greens_table, "Tabulate the infinite-medium Green's function"}};
  std::vector<std::pair<CLI::App*, wavemin::Subcommand>> registered;
  for (const auto& [sub, help] : subs) {
    CLI::App* s = app.add_subcommand(wavemin::to_string(sub), help);
    s->add_option("--config", config, "JSON run configuration")->required()->check(CLI::ExistingFile);
    s->add_option("--out-dir", out_dir, "Directory for tables and the summary");
    s->add_option("--tolerance", tolerance, "Relative residual tolerance of conjugate gradients");
    s->add_option("--max-iters", max_iters, "Iteration limit of conjugate gradients");
    s->add_option("--quadrature-order", order, "Sphere quadrature order for Green's functions");
    s->add_option("--seed", seed, "Seed for random trial fields and polarizations");
    registered.emplace_back(s, sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  apply_thread_env();

  wavemin::Subcommand chosen = wavemin::Subcommand::solve;
  for (const auto& [s, sub] : registered) {
    if (!s->parsed()) continue;
    chosen = sub;
    if (s->count("--tolerance")) ov.tolerance = tolerance;
    if (s->count("--max-iters")) ov.max_iterations = max_iters;
    if (s->count("--quadrature-order")) ov.quadrature_order = order;
    if (s->count("--seed")) ov.seed = seed;
  }

  const wavemin::RunResult r = wavemin::run(config, chosen, out_dir, ov);
  if (chosen == wavemin::Subcommand::validate && r.code == wavemin::ExitCode::success)
    std::cout << r.summary.dump(2) << "\n";
  for (const auto& f : r.files) std::cout << f << "\n";
  if (!r.message.empty()) std::cerr << r.message << "\n";
  return static_cast<int>(r.code);
}
