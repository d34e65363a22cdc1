#include "tlsuff/io.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace tlsuff {

namespace {

using nlohmann::json;

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  for (;;) {
    const size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& tok, const std::string& where) {
  const std::string t = trim(tok);
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw ParseError(where + ": cannot parse '" + tok + "' as a number");
  }
  return v;
}

long long parse_int(const std::string& tok, const std::string& where) {
  const std::string t = trim(tok);
  long long v = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw ParseError(where + ": cannot parse '" + tok + "' as an integer");
  }
  return v;
}

struct RawTable {
  std::vector<long long> labels;
  Matrix X;
};

// Shared reader for the y,x1..xp layout.
RawTable read_labeled_csv(const std::string& path, bool center) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open '" + path + "' for reading");
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError(path + ": empty file");
  }
  const auto header = split(trim(line), ',');
  if (header.empty() || trim(header[0]) != "y") {
    throw ParseError(path + ": first header column must be 'y'");
  }
  const size_t p = header.size() - 1;
  if (p < 1) {
    throw ParseError(path + ": no feature columns");
  }
  for (size_t j = 1; j < header.size(); ++j) {
    const std::string expect = "x" + std::to_string(j);
    if (trim(header[j]) != expect) {
      throw ParseError(path + ": header column " + std::to_string(j + 1) + " must be '" +
                       expect + "', got '" + trim(header[j]) + "'");
    }
  }

  std::vector<long long> labels;
  std::vector<double> values;
  long long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto toks = split(line, ',');
    if (toks.size() != p + 1) {
      throw ParseError(path + ": line " + std::to_string(lineno) + " has " +
                       std::to_string(toks.size()) + " columns, expected " +
                       std::to_string(p + 1));
    }
    const std::string where = path + ": line " + std::to_string(lineno);
    labels.push_back(parse_int(toks[0], where));
    for (size_t j = 1; j <= p; ++j) {
      values.push_back(parse_double(toks[j], where));
    }
  }
  if (labels.empty()) {
    throw ParseError(path + ": no data rows");
  }

  RawTable t;
  t.labels = std::move(labels);
  const Eigen::Index n = static_cast<Eigen::Index>(t.labels.size());
  t.X.resize(n, static_cast<Eigen::Index>(p));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < t.X.cols(); ++j) {
      t.X(i, j) = values[static_cast<size_t>(i) * p + static_cast<size_t>(j)];
    }
  }
  if (center) {
    t.X.rowwise() -= t.X.colwise().mean();
  }
  return t;
}

std::string table_csv(const IntVector& y, const Matrix& X) {
  std::ostringstream out;
  out << "y";
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    out << ",x" << (j + 1);
  }
  out << "\n";
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    out << y[i];
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      out << ',' << fmt17(X(i, j));
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace

void atomic_write_file(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
    if (!out) {
      throw ParseError("cannot open '" + tmp.string() + "' for writing");
    }
    out << contents;
    out.flush();
    if (!out) {
      throw ParseError("write to '" + tmp.string() + "' failed");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw ParseError("rename to '" + path + "' failed: " + ec.message());
  }
}

TargetDataset read_target_csv(const std::string& path, bool center) {
  RawTable t = read_labeled_csv(path, center);
  TargetDataset data;
  data.X = std::move(t.X);
  data.y.resize(static_cast<Eigen::Index>(t.labels.size()));
  for (Eigen::Index i = 0; i < data.y.size(); ++i) {
    data.y[i] = static_cast<int>(t.labels[static_cast<size_t>(i)]);
  }
  data.validate();
  return data;
}

SourceDataset read_source_csv(const std::string& path, bool center) {
  RawTable t = read_labeled_csv(path, center);
  SourceDataset data;
  data.Xs = std::move(t.X);
  data.ys.resize(static_cast<Eigen::Index>(t.labels.size()));
  long long maxlab = 0;
  for (Eigen::Index i = 0; i < data.ys.size(); ++i) {
    const long long lab = t.labels[static_cast<size_t>(i)];
    if (lab < 0) {
      throw ParseError(path + ": negative class label " + std::to_string(lab));
    }
    maxlab = std::max(maxlab, lab);
    data.ys[i] = static_cast<int>(lab);
  }
  data.K = static_cast<int>(maxlab);
  data.validate();
  return data;
}

void write_target_csv(const std::string& path, const TargetDataset& data) {
  atomic_write_file(path, table_csv(data.y, data.X));
}

void write_source_csv(const std::string& path, const SourceDataset& data) {
  atomic_write_file(path, table_csv(data.ys, data.Xs));
}

Matrix read_model_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open '" + path + "' for reading");
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError(path + ": empty file");
  }
  const auto header = split(trim(line), ',');
  const size_t K = header.size();
  for (size_t k = 0; k < K; ++k) {
    const std::string expect = "beta_" + std::to_string(k + 1);
    if (trim(header[k]) != expect) {
      throw ParseError(path + ": header column " + std::to_string(k + 1) + " must be '" +
                       expect + "'");
    }
  }
  std::vector<double> values;
  long long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto toks = split(line, ',');
    if (toks.size() != K) {
      throw ParseError(path + ": line " + std::to_string(lineno) + " has " +
                       std::to_string(toks.size()) + " columns, expected " + std::to_string(K));
    }
    for (const auto& tok : toks) {
      values.push_back(parse_double(tok, path + ": line " + std::to_string(lineno)));
    }
  }
  const Eigen::Index p = static_cast<Eigen::Index>(values.size() / K);
  if (p == 0) {
    throw ParseError(path + ": no coefficient rows");
  }
  Matrix B(p, static_cast<Eigen::Index>(K));
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index k = 0; k < B.cols(); ++k) {
      B(i, k) = values[static_cast<size_t>(i) * K + static_cast<size_t>(k)];
    }
  }
  return B;
}

void write_model_csv(const std::string& path, const Matrix& B) {
  std::ostringstream out;
  for (Eigen::Index k = 0; k < B.cols(); ++k) {
    out << (k ? "," : "") << "beta_" << (k + 1);
  }
  out << "\n";
  for (Eigen::Index i = 0; i < B.rows(); ++i) {
    for (Eigen::Index k = 0; k < B.cols(); ++k) {
      out << (k ? "," : "") << fmt17(B(i, k));
    }
    out << "\n";
  }
  atomic_write_file(path, out.str());
}

namespace {
std::string sidecar_path(const std::string& model_path) { return model_path + ".meta.json"; }
}  // namespace

void write_model_sidecar(const std::string& model_path, const SourceModel& model) {
  json j;
  j["schema_version"] = 1;
  j["p"] = model.p();
  j["K"] = model.K();
  j["n_source"] = model.n_source;
  j["diagnostics"] = {{"iterations", model.diagnostics.iterations},
                      {"final_grad_norm", model.diagnostics.final_grad_norm},
                      {"final_loglik", model.diagnostics.final_loglik},
                      {"converged", model.diagnostics.converged}};
  atomic_write_file(sidecar_path(model_path), j.dump(2) + "\n");
}

SourceModel read_model(const std::string& model_path) {
  SourceModel model;
  model.B = read_model_csv(model_path);
  std::ifstream in(sidecar_path(model_path));
  if (in) {
    try {
      json j = json::parse(in);
      model.n_source = j.value("n_source", 0LL);
      if (j.contains("diagnostics")) {
        const auto& d = j["diagnostics"];
        model.diagnostics.iterations = d.value("iterations", 0);
        model.diagnostics.final_grad_norm = d.value("final_grad_norm", 0.0);
        model.diagnostics.final_loglik = d.value("final_loglik", 0.0);
        model.diagnostics.converged = d.value("converged", false);
      }
    } catch (const json::exception& e) {
      throw ParseError(sidecar_path(model_path) + ": " + e.what());
    }
  }
  return model;
}

void write_model(const std::string& model_path, const SourceModel& model) {
  write_model_csv(model_path, model.B);
  write_model_sidecar(model_path, model);
}

std::string sufficiency_result_json(const SufficiencyResult& r, bool centered) {
  json j;
  j["schema_version"] = 1;
  j["n"] = r.n;
  j["p"] = r.p;
  j["K"] = r.K;
  j["T1"] = r.T1;
  j["T2"] = r.T2;
  j["trace_sigma"] = r.trace_sigma;
  j["trace_sigma_sq"] = r.trace_sigma_sq;
  j["T4"] = r.T4;
  j["p_value"] = r.p_value;
  j["alpha"] = r.alpha;
  j["reject"] = r.reject;
  j["centered"] = centered;
  return j.dump(2) + "\n";
}

void write_sufficiency_result(const std::string& path, const SufficiencyResult& r,
                              bool centered) {
  atomic_write_file(path, sufficiency_result_json(r, centered));
}

namespace {

Solver parse_solver(const std::string& v) {
  if (v == "auto" || v == "automatic") return Solver::automatic;
  if (v == "newton" || v == "exact-newton") return Solver::exact_newton;
  if (v == "lbfgs" || v == "limited-memory" || v == "quasi-newton") return Solver::lbfgs;
  throw ConfigError("solver must be one of auto, exact-newton, lbfgs; got '" + v + "'");
}

std::vector<double> parse_double_list(const std::string& v, const std::string& key) {
  std::vector<double> out;
  for (const auto& tok : split(v, ',')) {
    out.push_back(parse_double(tok, "config key '" + key + "'"));
  }
  return out;
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + key + "' must be a boolean, got '" + v + "'");
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file '" + path + "'");
  }
  ExperimentConfig c;
  bool have_kind = false, have_estimators = false;
  std::string line;
  long long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ": line " + std::to_string(lineno) +
                        " is not of the form 'key = value'");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string val = trim(t.substr(eq + 1));
    const std::string where = "config key '" + key + "'";

    if (key == "kind") {
      if (val == "mse") {
        c.kind = ExperimentKind::mse;
      } else if (val == "size") {
        c.kind = ExperimentKind::size;
      } else if (val == "power") {
        c.kind = ExperimentKind::power;
      } else {
        throw ConfigError("kind must be one of mse, size, power; got '" + val + "'");
      }
      have_kind = true;
    } else if (key == "n") {
      c.n = parse_int(val, where);
    } else if (key == "p") {
      c.p = parse_int(val, where);
    } else if (key == "N") {
      c.N = parse_int(val, where);
    } else if (key == "K") {
      c.K = static_cast<int>(parse_int(val, where));
    } else if (key == "B_reps") {
      c.B_reps = static_cast<int>(parse_int(val, where));
    } else if (key == "alpha") {
      c.alpha = parse_double(val, where);
    } else if (key == "base_seed" || key == "seed") {
      c.base_seed = static_cast<std::uint64_t>(parse_int(val, where));
    } else if (key == "rho") {
      c.rho = parse_double(val, where);
    } else if (key == "delta_grid") {
      c.delta_grid = parse_double_list(val, key);
    } else if (key == "gamma") {
      const auto vals = parse_double_list(val, key);
      c.gamma_override = Eigen::Map<const Vector>(vals.data(),
                                                  static_cast<Eigen::Index>(vals.size()));
    } else if (key == "estimators") {
      c.est_mle = c.est_transfer = c.est_oracle = false;
      for (const auto& tok : split(val, ',')) {
        const std::string e = trim(tok);
        if (e == "mle") {
          c.est_mle = true;
        } else if (e == "transfer") {
          c.est_transfer = true;
        } else if (e == "oracle") {
          c.est_oracle = true;
        } else {
          throw ConfigError("estimators: unknown estimator '" + e + "'");
        }
      }
      have_estimators = true;
    } else if (key == "oracle_t3") {
      c.oracle_t3 = parse_bool(val, key);
    } else if (key == "experiment_id") {
      c.experiment_id = val;
    } else if (key == "target_grad_tol") {
      c.target_fit.grad_tol = parse_double(val, where);
    } else if (key == "target_rel_tol") {
      c.target_fit.rel_tol = parse_double(val, where);
    } else if (key == "target_max_iter") {
      c.target_fit.max_iter = static_cast<int>(parse_int(val, where));
    } else if (key == "target_ridge") {
      c.target_fit.ridge = parse_double(val, where);
    } else if (key == "source_grad_tol") {
      c.source_fit.grad_tol = parse_double(val, where);
    } else if (key == "source_rel_tol") {
      c.source_fit.rel_tol = parse_double(val, where);
    } else if (key == "source_max_iter") {
      c.source_fit.max_iter = static_cast<int>(parse_int(val, where));
    } else if (key == "source_ridge") {
      c.source_fit.ridge = parse_double(val, where);
    } else if (key == "source_solver") {
      c.source_fit.solver = parse_solver(val);
    } else if (key == "source_dense_hessian_cap") {
      c.source_fit.dense_hessian_cap = static_cast<int>(parse_int(val, where));
    } else {
      throw ConfigError(path + ": unknown config key '" + key + "'");
    }
  }
  if (!have_kind) {
    throw ConfigError(path + ": missing required key 'kind'");
  }
  if (c.kind == ExperimentKind::mse && !have_estimators) {
    c.est_mle = false;
    c.est_transfer = true;
    c.est_oracle = true;
  }
  c.validate();
  return c;
}

namespace {

const char* kind_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::mse:
      return "mse";
    case ExperimentKind::size:
      return "size";
    case ExperimentKind::power:
      return "power";
  }
  return "unknown";
}

std::string num_or_empty(double v) {
  return std::isfinite(v) ? fmt17(v) : std::string();
}

}  // namespace

std::string experiment_result_json(const ExperimentResult& result) {
  const ExperimentConfig& c = result.config;
  json j;
  j["schema_version"] = 1;
  j["kind"] = kind_name(c.kind);
  j["config"] = {{"n", c.n},       {"p", c.p},
                 {"N", c.N},       {"K", c.K},
                 {"B_reps", c.B_reps}, {"alpha", c.alpha},
                 {"rho", c.rho},   {"base_seed", c.base_seed},
                 {"experiment_id", c.id()}};
  j["failures"] = result.failures;
  j["records"] = static_cast<long long>(result.records.size());
  switch (c.kind) {
    case ExperimentKind::size:
      j["ejp"] = result.ejp;
      j["ejp_oracle"] = result.ejp_oracle;
      j["t4_mean"] = result.t4_mean;
      j["t4_var"] = result.t4_var;
      break;
    case ExperimentKind::power: {
      json arr = json::array();
      for (const auto& pt : result.power) {
        arr.push_back({{"delta", pt.delta},
                       {"ejp", pt.ejp},
                       {"rejected", pt.rejected},
                       {"total", pt.total}});
      }
      j["power"] = arr;
      break;
    }
    case ExperimentKind::mse: {
      json arr = json::array();
      for (const auto& s : result.log_mse) {
        arr.push_back({{"estimator", s.estimator},
                       {"median_log_mse", s.median},
                       {"q1_log_mse", s.q1},
                       {"q3_log_mse", s.q3},
                       {"count", s.count}});
      }
      j["log_mse"] = arr;
      break;
    }
  }
  return j.dump(2) + "\n";
}

void write_experiment_result(const std::string& prefix, const ExperimentResult& result) {
  const ExperimentConfig& c = result.config;
  std::ostringstream csv;
  switch (c.kind) {
    case ExperimentKind::size:
      csv << "rep,ok,t4,p_value,reject,t4_oracle,reject_oracle,t3,error\n";
      for (const auto& r : result.records) {
        csv << r.rep << ',' << (r.ok ? 1 : 0) << ',' << num_or_empty(r.t4) << ','
            << num_or_empty(r.p_value) << ',' << (r.reject < 0 ? "" : std::to_string(r.reject))
            << ',' << num_or_empty(r.t4_oracle) << ','
            << (r.reject_oracle < 0 ? "" : std::to_string(r.reject_oracle)) << ','
            << num_or_empty(r.t3) << ',' << r.error << "\n";
      }
      break;
    case ExperimentKind::power:
      csv << "rep,delta,ok,t4,p_value,reject,error\n";
      for (const auto& r : result.records) {
        csv << r.rep << ',' << num_or_empty(r.delta) << ',' << (r.ok ? 1 : 0) << ','
            << num_or_empty(r.t4) << ',' << num_or_empty(r.p_value) << ','
            << (r.reject < 0 ? "" : std::to_string(r.reject)) << ',' << r.error << "\n";
      }
      break;
    case ExperimentKind::mse:
      csv << "rep,ok,mse_mle,mse_transfer,mse_oracle,error\n";
      for (const auto& r : result.records) {
        csv << r.rep << ',' << (r.ok ? 1 : 0) << ',' << num_or_empty(r.mse_mle) << ','
            << num_or_empty(r.mse_transfer) << ',' << num_or_empty(r.mse_oracle) << ','
            << r.error << "\n";
      }
      break;
  }
  atomic_write_file(prefix + ".csv", csv.str());
  atomic_write_file(prefix + ".json", experiment_result_json(result));
}

}  // namespace tlsuff
