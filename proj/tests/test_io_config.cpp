// Copyright 2026 The wavemin Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "test_util.hpp"
#include "wavemin/run.hpp"

#ifndef WAVEMIN_CONFIG_DIR
#define WAVEMIN_CONFIG_DIR "configs"
#endif

namespace wavemin {
namespace {

using namespace wavemin::testing;
namespace fs = std::filesystem;

fs::path config_path(const std::string& name) { return fs::path(WAVEMIN_CONFIG_DIR) / (name + ".json"); }

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("wavemin_test_" + name);
  fs::remove_all(p);
  return p;
}

Json base_config() { return Json::parse(io::read_text(config_path("rod_elastic").string())); }

std::vector<std::string> issue_paths(const Json& j) {
  try {
    parse_config(j);
  } catch (const ConfigError& e) {
    std::vector<std::string> out;
    for (const auto& i : e.issues()) out.push_back(i.path);
    return out;
  }
  return {};
}

bool has_path(const std::vector<std::string>& v, const std::string& p) {
  return std::find(v.begin(), v.end(), p) != v.end();
}

TEST(FieldTable, RoundTripIsBitExact) {
  std::mt19937_64 rng(21);
  for (Physics ph : {Physics::elastic, Physics::acoustic, Physics::electromagnetic}) {
    const DiscreteProblem p(rod(ph, ph == Physics::elastic ? rod_elastic() : ph == Physics::acoustic ? rod_acoustic() : rod_em(),
                                7, RodBc::neumann));
    Vector v = random_vector(rng, p.layout().size());
    v(0) = 1.0 / 3.0;
    v(1) = -0.0;
    v(2) = 1e-300;
    for (bool dual : {false, true}) {
      const Vector back = io::parse_field_table(io::field_table(p.layout(), v, dual), p.layout(), dual);
      for (Eigen::Index i = 0; i < v.size(); ++i)
        EXPECT_EQ(std::memcmp(&v(i), &back(i), sizeof(double)), 0) << "entry " << i;
    }
  }
}

TEST(FieldTable, RejectsMalformedTables) {
  const DiscreteProblem p(rod(Physics::acoustic, rod_acoustic(), 3, RodBc::neumann));
  const std::string good = io::field_table(p.layout(), Vector::Ones(p.layout().size()));
  const auto first_row = good.find('\n') + 1;
  const std::string row = good.substr(first_row, good.find('\n', first_row) - first_row + 1);
  EXPECT_THROW(io::parse_field_table(good + row, p.layout()), ValidationError);  // duplicate
  std::string missing = good;
  missing.erase(first_row, row.size());
  EXPECT_THROW(io::parse_field_table(missing, p.layout()), ValidationError);
  std::string garbled = good;
  garbled.replace(garbled.rfind(',') + 1, 1, "x");
  EXPECT_THROW(io::parse_field_table(garbled, p.layout()), ValidationError);
  EXPECT_THROW(io::parse_field_table("entity,component,value\n0,nope[0],1\n", p.layout()), ValidationError);
  EXPECT_THROW(io::field_table(p.layout(), Vector::Ones(2)), ValidationError);
}

TEST(GreensCsv, RoundTrip) {
  std::vector<GreensTableRow> rows{{Vector3(0.1, 0.2, 1.0 / 3.0), 0, 1, -0.0292749158}, {Vector3(2, 0, 0), 1, 1, 1e-17}};
  const auto back = io::parse_greens_csv(io::greens_csv(rows));
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    EXPECT_EQ(back[k].x, rows[k].x);
    EXPECT_EQ(back[k].row, rows[k].row);
    EXPECT_EQ(back[k].col, rows[k].col);
    EXPECT_EQ(back[k].value, rows[k].value);
  }
  EXPECT_THROW(io::parse_greens_csv("x,y,z,row,col,value\n1,2,3\n"), ValidationError);
}

TEST(Config, ShippedConfigsParse) {
  for (const char* name : {"rod_elastic", "rod_acoustic", "slab_em", "plate_elastic_2d", "greens_scalar",
                           "greens_isotropic", "rod_selection", "invalid_stiffness"})
    EXPECT_NO_THROW(load_config(config_path(name))) << name;
  const RunConfig c = load_config(config_path("rod_elastic"));
  EXPECT_EQ(c.physics, Physics::elastic);
  EXPECT_DOUBLE_EQ(c.omega, 2.0);
  EXPECT_EQ(build_mesh(c)->num_cells(), 100);
}

TEST(Config, ErrorsCarryKeyPaths) {
  Json j = base_config();
  j["omega"] = -1.0;
  EXPECT_TRUE(has_path(issue_paths(j), "omega"));

  j = base_config();
  j.erase("units");
  EXPECT_TRUE(has_path(issue_paths(j), "units"));

  j = base_config();
  j["regions"][0]["stiffness"] = "soft";
  EXPECT_TRUE(has_path(issue_paths(j), "regions[0].stiffness"));

  j = base_config();
  j["solver"]["preconditioner"] = "ilu";
  EXPECT_TRUE(has_path(issue_paths(j), "solver.preconditioner"));

  j = base_config();
  j["boundary"]["left"]["type"] = "robin";
  const auto paths = issue_paths(j);
  ASSERT_FALSE(paths.empty());
  EXPECT_NE(paths.front().find("boundary.left"), std::string::npos) << paths.front();

  // Several problems are reported together.
  j = base_config();
  j["omega"] = 0.0;
  j["geometry"]["cells"] = 0;
  EXPECT_GE(issue_paths(j).size(), 2u);
}

TEST(Config, ActivePassivityIsReported) {
  const RunConfig c = load_config(config_path("invalid_stiffness"));
  const auto issues = passivity_issues(c);
  ASSERT_FALSE(issues.empty());
  EXPECT_NE(issues.front().path.find("regions[1]"), std::string::npos) << issues.front().path;
  EXPECT_NE(issues.front().message.find("stiffness"), std::string::npos) << issues.front().message;
}

TEST(Config, MissingFileIsAValidationError) {
  EXPECT_THROW(load_config("/nonexistent/wavemin.json"), ValidationError);
}

TEST(Run, SummaryIsDeterministic) {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  const RunResult ra = run(config_path("rod_acoustic"), Subcommand::solve, a);
  const RunResult rb = run(config_path("rod_acoustic"), Subcommand::solve, b);
  ASSERT_EQ(ra.code, ExitCode::success) << ra.message;
  ASSERT_EQ(rb.code, ExitCode::success) << rb.message;
  ASSERT_EQ(ra.files.size(), rb.files.size());
  for (std::size_t k = 0; k < ra.files.size(); ++k) {
    EXPECT_EQ(fs::path(ra.files[k]).filename(), fs::path(rb.files[k]).filename());
    if (fs::path(ra.files[k]).filename().string().find("history") != std::string::npos) continue;
    EXPECT_EQ(io::read_text(ra.files[k]), io::read_text(rb.files[k])) << ra.files[k];
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Run, SolvedFieldsRoundTripThroughTables) {
  const fs::path dir = scratch("round");
  const RunResult r = run(config_path("rod_elastic"), Subcommand::solve, dir);
  ASSERT_EQ(r.code, ExitCode::success) << r.message;
  const RunConfig c = load_config(config_path("rod_elastic"));
  const DiscreteProblem p(build_problem_spec(c));
  const auto fields = std::find_if(r.files.begin(), r.files.end(),
                                   [](const std::string& f) { return f.find("_fields.csv") != std::string::npos; });
  ASSERT_NE(fields, r.files.end());
  const Vector F = io::parse_field_table(io::read_text(*fields), p.layout());
  EXPECT_LE(p.gradient(p.unknowns_of(FieldState{p.layout(), F})).norm(),
            1e-6 * std::max(1.0, p.rhs().norm()));
  const Json s = Json::parse(io::read_text((dir / "rod_elastic_solve_summary.json").string()));
  EXPECT_EQ(s["exit_code"], 0);
  fs::remove_all(dir);
}

TEST(Run, ExitCodes) {
  const fs::path dir = scratch("codes");
  EXPECT_EQ(run(config_path("invalid_stiffness"), Subcommand::solve, dir).code, ExitCode::validation);
  RunOverrides ov;
  ov.max_iterations = 2;
  EXPECT_EQ(run(config_path("rod_elastic"), Subcommand::solve, dir, ov).code, ExitCode::not_converged);
  EXPECT_EQ(run(config_path("rod_elastic"), Subcommand::validate, dir).code, ExitCode::success);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace wavemin
