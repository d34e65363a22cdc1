#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "tlsuff/io.hpp"
#include "tlsuff/rng.hpp"

using namespace tlsuff;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("tlsuff_io_test_" + std::to_string(RngStream(reinterpret_cast<std::uintptr_t>(this))
                                                   .next_u64()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_text(const std::string& path, const std::string& contents) {
  std::ofstream out(path);
  out << contents;
}

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, RngStream& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      m(i, j) = rng.next_normal() * std::exp(4.0 * (rng.next_unit() - 0.5));
    }
  }
  return m;
}

}  // namespace

TEST_CASE("target CSV round trip is lossless") {
  TempDir tmp;
  RngStream rng(901);
  TargetDataset d;
  d.X = random_matrix(17, 5, rng);
  d.y.resize(17);
  for (int i = 0; i < 17; ++i) d.y[i] = i % 2;

  const std::string path = tmp.file("target.csv");
  write_target_csv(path, d);
  const TargetDataset back = read_target_csv(path);
  REQUIRE(back.X.rows() == 17);
  REQUIRE(back.X.cols() == 5);
  CHECK((back.X - d.X).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((back.y - d.y).lpNorm<Eigen::Infinity>() == 0);
}

TEST_CASE("source CSV round trip infers K") {
  TempDir tmp;
  RngStream rng(902);
  SourceDataset d;
  d.K = 3;
  d.Xs = random_matrix(20, 4, rng);
  d.ys.resize(20);
  for (int i = 0; i < 20; ++i) d.ys[i] = i % 4;

  const std::string path = tmp.file("source.csv");
  write_source_csv(path, d);
  const SourceDataset back = read_source_csv(path);
  CHECK(back.K == 3);
  CHECK((back.Xs - d.Xs).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((back.ys - d.ys).lpNorm<Eigen::Infinity>() == 0);
}

TEST_CASE("centering subtracts the column means") {
  TempDir tmp;
  RngStream rng(903);
  TargetDataset d;
  d.X = random_matrix(40, 3, rng).array() + 5.0;
  d.y.resize(40);
  for (int i = 0; i < 40; ++i) d.y[i] = i % 2;

  const std::string path = tmp.file("target.csv");
  write_target_csv(path, d);
  const TargetDataset centered = read_target_csv(path, true);
  for (int j = 0; j < 3; ++j) {
    CHECK(std::fabs(centered.X.col(j).mean()) < 1e-12);
    CHECK((centered.X.col(j).array() - (d.X.col(j).array() - d.X.col(j).mean()))
              .abs()
              .maxCoeff() < 1e-12);
  }
}

TEST_CASE("malformed CSV inputs report the offending location") {
  TempDir tmp;

  SUBCASE("wrong header") {
    const std::string path = tmp.file("bad_header.csv");
    write_text(path, "y,a,b\n1,0.5,0.5\n0,0.1,0.2\n");
    CHECK_THROWS_WITH_AS(read_target_csv(path),
                         doctest::Contains("must be 'x1'"), ParseError);
  }
  SUBCASE("missing y column") {
    const std::string path = tmp.file("no_y.csv");
    write_text(path, "x1,x2\n0.5,0.5\n");
    CHECK_THROWS_WITH_AS(read_target_csv(path), doctest::Contains("'y'"), ParseError);
  }
  SUBCASE("ragged row names the line") {
    const std::string path = tmp.file("ragged.csv");
    write_text(path, "y,x1,x2\n1,0.5,0.5\n0,0.1\n");
    CHECK_THROWS_WITH_AS(read_target_csv(path), doctest::Contains("line 3"), ParseError);
  }
  SUBCASE("non-numeric cell") {
    const std::string path = tmp.file("nan_cell.csv");
    write_text(path, "y,x1\n1,0.5\n0,oops\n");
    CHECK_THROWS_AS(read_target_csv(path), ParseError);
  }
  SUBCASE("non-binary target label") {
    const std::string path = tmp.file("bad_label.csv");
    write_text(path, "y,x1\n1,0.5\n2,0.1\n");
    CHECK_THROWS_AS(read_target_csv(path), Error);
  }
  SUBCASE("negative source label") {
    const std::string path = tmp.file("neg_label.csv");
    write_text(path, "y,x1\n1,0.5\n-1,0.1\n");
    CHECK_THROWS_AS(read_source_csv(path), ParseError);
  }
  SUBCASE("empty file") {
    const std::string path = tmp.file("empty.csv");
    write_text(path, "");
    CHECK_THROWS_AS(read_target_csv(path), ParseError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(read_target_csv(tmp.file("nope.csv")), ParseError);
  }
}

TEST_CASE("model CSV round trip with sidecar diagnostics") {
  TempDir tmp;
  RngStream rng(904);
  SourceModel m;
  m.B = random_matrix(6, 3, rng);
  m.n_source = 1234;
  m.diagnostics.iterations = 7;
  m.diagnostics.converged = true;
  m.diagnostics.final_grad_norm = 3.5e-9;
  m.diagnostics.final_loglik = -456.25;

  const std::string path = tmp.file("model.csv");
  write_model(path, m);
  CHECK(fs::exists(path + ".meta.json"));

  const SourceModel back = read_model(path);
  CHECK((back.B - m.B).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(back.n_source == 1234);
  CHECK(back.diagnostics.iterations == 7);
  CHECK(back.diagnostics.converged);
  CHECK(back.diagnostics.final_grad_norm == 3.5e-9);
  CHECK(back.diagnostics.final_loglik == -456.25);

  SUBCASE("the bare matrix still loads without a sidecar") {
    fs::remove(path + ".meta.json");
    const SourceModel bare = read_model(path);
    CHECK((bare.B - m.B).lpNorm<Eigen::Infinity>() == 0.0);
  }
  SUBCASE("wrong header is rejected") {
    write_text(path, "beta_1,gamma_2\n0.5,0.5\n");
    CHECK_THROWS_WITH_AS(read_model_csv(path), doctest::Contains("beta_2"), ParseError);
  }
}

TEST_CASE("sufficiency result serializes to parseable JSON") {
  SufficiencyResult r;
  r.n = 100;
  r.p = 40;
  r.K = 3;
  r.T1 = 0.5;
  r.T2 = 0.25;
  r.trace_sigma = 25.0;
  r.trace_sigma_sq = 12.5;
  r.T4 = 1.75;
  r.p_value = 0.040059156863817086;
  r.alpha = 0.05;
  r.reject = true;

  const auto j = nlohmann::json::parse(sufficiency_result_json(r, true));
  CHECK(j.at("n") == 100);
  CHECK(j.at("p") == 40);
  CHECK(j.at("K") == 3);
  CHECK(j.at("T4") == 1.75);
  CHECK(j.at("p_value").get<double>() == r.p_value);
  CHECK(j.at("reject") == true);
  CHECK(j.at("centered") == true);
}

TEST_CASE("experiment config parsing") {
  TempDir tmp;
  const std::string path = tmp.file("exp.conf");
  write_text(path,
             "# comment line\n"
             "kind = power\n"
             "n = 200\n"
             "p = 400\n"
             "N = 100000\n"
             "K = 4\n"
             "B_reps = 300\n"
             "alpha = 0.05\n"
             "seed = 42\n"
             "rho = 0.5\n"
             "delta_grid = 1, 3, 5\n"
             "gamma = 0.5, 0.5, 0.5, 0.5\n"
             "source_solver = lbfgs\n"
             "source_grad_tol = 1e-5\n"
             "experiment_id = power-n200\n");
  const ExperimentConfig c = parse_experiment_config(path);
  CHECK(c.kind == ExperimentKind::power);
  CHECK(c.n == 200);
  CHECK(c.p == 400);
  CHECK(c.N == 100000);
  CHECK(c.K == 4);
  CHECK(c.B_reps == 300);
  CHECK(c.base_seed == 42);
  REQUIRE(c.delta_grid.size() == 3);
  CHECK(c.delta_grid[1] == 3.0);
  REQUIRE(c.gamma_override.size() == 4);
  CHECK(c.gamma_override[3] == 0.5);
  CHECK(c.source_fit.solver == Solver::lbfgs);
  CHECK(c.source_fit.grad_tol == 1e-5);
  CHECK(c.experiment_id == "power-n200");
  CHECK(c.id() == "power-n200");
  CHECK_NOTHROW(c.validate());

  SUBCASE("unknown keys are rejected") {
    write_text(path, "kind = size\nn = 50\nbogus = 1\n");
    CHECK_THROWS_WITH_AS(parse_experiment_config(path), doctest::Contains("bogus"),
                         ConfigError);
  }
  SUBCASE("kind is mandatory") {
    write_text(path, "n = 50\np = 10\n");
    CHECK_THROWS_WITH_AS(parse_experiment_config(path), doctest::Contains("kind"),
                         ConfigError);
  }
  SUBCASE("lines without an equals sign are rejected") {
    write_text(path, "kind = size\nnonsense\n");
    CHECK_THROWS_WITH_AS(parse_experiment_config(path), doctest::Contains("line 2"),
                         ConfigError);
  }
}

TEST_CASE("experiment outputs include a CSV and a JSON summary") {
  TempDir tmp;
  ExperimentConfig c;
  c.kind = ExperimentKind::size;
  c.n = 80;
  c.p = 30;
  c.N = 2000;
  c.K = 3;
  c.B_reps = 5;
  c.base_seed = 7;
  const ExperimentResult r = run_size(c, 1);

  const std::string prefix = tmp.file("size_run");
  write_experiment_result(prefix, r);

  std::ifstream csv(prefix + ".csv");
  REQUIRE(csv.good());
  std::string header;
  std::getline(csv, header);
  CHECK(header == "rep,ok,t4,p_value,reject,t4_oracle,reject_oracle,t3,error");
  int rows = 0;
  for (std::string line; std::getline(csv, line);) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 5);

  std::ifstream jf(prefix + ".json");
  REQUIRE(jf.good());
  const auto j = nlohmann::json::parse(jf);
  CHECK(j.at("kind") == "size");
  CHECK(j.at("config").at("B_reps") == 5);
  CHECK(j.at("failures") == 0);
  CHECK(j.contains("ejp"));
  CHECK(j.contains("t4_mean"));
}

TEST_CASE("atomic write leaves no temp files behind") {
  TempDir tmp;
  const std::string path = tmp.file("out.txt");
  atomic_write_file(path, "hello\n");
  std::ifstream in(path);
  std::string s;
  std::getline(in, s);
  CHECK(s == "hello");

  int entries = 0;
  for (const auto& e : fs::directory_iterator(tmp.path)) {
    (void)e;
    ++entries;
  }
  CHECK(entries == 1);

  atomic_write_file(path, "replaced\n");
  std::ifstream in2(path);
  std::getline(in2, s);
  CHECK(s == "replaced");
}
