#include "zoomctl/scenario.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace zoomctl {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& message) {
  throw ConfigError(path + ": " + message);
}

const json& require(const json& obj, const std::string& key,
                    const std::string& path) {
  if (!obj.is_object()) fail(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) fail(path + "/" + key, "missing required field");
  return *it;
}

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

int as_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<int>();
}

std::uint64_t as_seed(const json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(j.get<std::int64_t>());
  }
  if (j.is_string()) {
    const std::string& s = j.get_ref<const std::string&>();
    if (!s.empty() && s.find_first_not_of("0123456789") == std::string::npos) {
      try {
        return std::stoull(s);
      } catch (const std::exception&) {
        fail(path, "seed out of 64-bit range");
      }
    }
  }
  fail(path, "expected an unsigned 64-bit decimal (number or string)");
}

Matrix parse_matrix(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty 2-D array");
  const std::size_t rows = j.size();
  if (!j[0].is_array() || j[0].empty()) {
    fail(path + "/0", "expected a non-empty row array");
  }
  const std::size_t cols = j[0].size();
  Matrix out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::string row_path = path + "/" + std::to_string(r);
    if (!j[r].is_array() || j[r].size() != cols) {
      fail(row_path, "ragged matrix row");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      out(r, c) = as_number(j[r][c], row_path + "/" + std::to_string(c));
    }
  }
  return out;
}

Vector parse_vector(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array");
  Vector out(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    out(i) = as_number(j[i], path + "/" + std::to_string(i));
  }
  return out;
}

std::vector<int> parse_int_list(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of integers");
  std::vector<int> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(as_int(j[i], path + "/" + std::to_string(i)));
  }
  return out;
}

json matrix_json(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

json vector_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

LinearSystem parse_system(const json& j) {
  const std::string path = "/system";
  const Matrix A = parse_matrix(require(j, "A", path), path + "/A");
  const Matrix B = parse_matrix(require(j, "B", path), path + "/B");
  const json& sensors = require(j, "sensors", path);
  if (!sensors.is_array() || sensors.empty()) {
    fail(path + "/sensors", "expected a non-empty array of sensors");
  }
  std::vector<Matrix> C;
  std::vector<Matrix> Sigma_v;
  for (std::size_t s = 0; s < sensors.size(); ++s) {
    const std::string spath = path + "/sensors/" + std::to_string(s);
    const Matrix Cs = parse_matrix(require(sensors[s], "C", spath),
                                   spath + "/C");
    Matrix Sv = Matrix::Identity(Cs.rows(), Cs.rows());
    if (sensors[s].contains("sigma_v")) {
      Sv = parse_matrix(sensors[s]["sigma_v"], spath + "/sigma_v");
    }
    C.push_back(Cs);
    Sigma_v.push_back(Sv);
  }
  const int n = static_cast<int>(A.rows());
  Matrix Sw = Matrix::Identity(n, n);
  if (j.contains("sigma_w")) Sw = parse_matrix(j["sigma_w"], path + "/sigma_w");
  Vector mu = Vector::Zero(n);
  Matrix S0 = Matrix::Identity(n, n);
  if (j.contains("x0")) {
    const json& x0 = j["x0"];
    if (x0.contains("mean")) mu = parse_vector(x0["mean"], path + "/x0/mean");
    if (x0.contains("sigma")) {
      S0 = parse_matrix(x0["sigma"], path + "/x0/sigma");
    }
  }
  try {
    return LinearSystem(A, B, std::move(C), Sw, std::move(Sigma_v), mu, S0);
  } catch (const InputError& err) {
    fail(path, err.what());
  }
}

}  // namespace

Scenario Scenario::from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& err) {
    throw ConfigError(std::string("/: JSON parse error: ") + err.what());
  }
  if (!doc.is_object()) fail("/", "expected a JSON object");

  Scenario sc;
  if (doc.contains("name")) {
    if (!doc["name"].is_string()) fail("/name", "expected a string");
    sc.name = doc["name"].get<std::string>();
  }
  if (doc.contains("version")) {
    sc.schema_version = as_int(doc["version"], "/version");
    if (sc.schema_version != 1) fail("/version", "unsupported schema version");
  }
  sc.system = parse_system(require(doc, "system", "/"));

  if (doc.contains("zoom")) {
    const json& z = doc["zoom"];
    const std::string zp = "/zoom";
    if (!z.is_object()) fail(zp, "expected an object");
    if (z.contains("rho")) sc.loop.zoom.rho = as_number(z["rho"], zp + "/rho");
    if (z.contains("epsilon")) {
      sc.loop.zoom.epsilon = as_number(z["epsilon"], zp + "/epsilon");
    }
    if (z.contains("eta")) sc.loop.zoom.eta = as_number(z["eta"], zp + "/eta");
    if (z.contains("delta")) {
      sc.loop.zoom.delta_ratio = as_number(z["delta"], zp + "/delta");
    }
    if (z.contains("c")) {
      sc.loop.zoom.floor_scale = as_number(z["c"], zp + "/c");
    }
    try {
      sc.loop.zoom.validate();
    } catch (const ConfigError& err) {
      fail(zp, err.what());
    }
  }

  if (doc.contains("lattice")) {
    const json& l = doc["lattice"];
    if (!l.is_object()) fail("/lattice", "expected an object");
    if (l.contains("enabled")) {
      if (!l["enabled"].is_boolean()) {
        fail("/lattice/enabled", "expected a boolean");
      }
      sc.loop.lattice = l["enabled"].get<bool>();
    }
    if (l.contains("ell")) {
      sc.loop.ell = as_number(l["ell"], "/lattice/ell");
      if (!(sc.loop.ell > 0.0)) fail("/lattice/ell", "must be positive");
    }
  }

  if (doc.contains("run")) {
    const json& r = doc["run"];
    const std::string rp = "/run";
    if (!r.is_object()) fail(rp, "expected an object");
    if (r.contains("horizon")) {
      sc.loop.horizon = as_int(r["horizon"], rp + "/horizon");
      if (sc.loop.horizon < 0) fail(rp + "/horizon", "must be non-negative");
    }
    if (r.contains("trials")) {
      sc.trials = as_int(r["trials"], rp + "/trials");
      if (sc.trials < 1) fail(rp + "/trials", "must be at least 1");
    }
    if (r.contains("seed")) sc.seed = as_seed(r["seed"], rp + "/seed");
    if (r.contains("mode")) {
      const std::string mode = r["mode"].is_string()
                                   ? r["mode"].get<std::string>()
                                   : std::string();
      if (mode == "single") {
        sc.loop.multi_sensor = false;
      } else if (mode == "multi") {
        sc.loop.multi_sensor = true;
      } else {
        fail(rp + "/mode", "expected \"single\" or \"multi\"");
      }
    }
    if (r.contains("estimator")) {
      const std::string est = r["estimator"].is_string()
                                  ? r["estimator"].get<std::string>()
                                  : std::string();
      if (est == "subset") {
        sc.loop.estimator = EstimatorKind::kSubset;
      } else if (est == "lsq") {
        sc.loop.estimator = EstimatorKind::kLeastSquares;
      } else {
        fail(rp + "/estimator", "expected \"subset\" or \"lsq\"");
      }
    }
    if (r.contains("control")) {
      const std::string ctl = r["control"].is_string()
                                  ? r["control"].get<std::string>()
                                  : std::string();
      if (ctl == "closed") {
        sc.loop.control = ControlMode::kClosedLoop;
      } else if (ctl == "open") {
        sc.loop.control = ControlMode::kOpenLoop;
      } else {
        fail(rp + "/control", "expected \"closed\" or \"open\"");
      }
    }
    if (r.contains("coverage")) {
      sc.loop.coverage = as_number(r["coverage"], rp + "/coverage");
      if (!(sc.loop.coverage > 0.0 && sc.loop.coverage < 1.0)) {
        fail(rp + "/coverage", "must lie in (0, 1)");
      }
    }
    if (r.contains("delta1")) {
      sc.loop.delta1 = as_number(r["delta1"], rp + "/delta1");
      if (sc.loop.delta1 < 0.0) fail(rp + "/delta1", "must be non-negative");
    }
    if (r.contains("F")) {
      sc.loop.small_set_radius = as_number(r["F"], rp + "/F");
      if (sc.loop.small_set_radius < 0.0) {
        fail(rp + "/F", "must be non-negative");
      }
    }
    if (r.contains("K")) {
      sc.loop.K = parse_int_list(r["K"], rp + "/K");
    }
    if (r.contains("feedback_period")) {
      sc.loop.feedback_period = as_int(r["feedback_period"],
                                       rp + "/feedback_period");
    }
    if (r.contains("sensor_order")) {
      sc.sensor_order = parse_int_list(r["sensor_order"], rp + "/sensor_order");
    }
  }

  if (doc.contains("diagnostics")) {
    const json& d = doc["diagnostics"];
    const std::string dp = "/diagnostics";
    if (!d.is_object()) fail(dp, "expected an object");
    if (d.contains("tail_fit_start")) {
      sc.tail_fit_start = as_int(d["tail_fit_start"], dp + "/tail_fit_start");
      if (sc.tail_fit_start < 0) fail(dp + "/tail_fit_start", "must be >= 0");
    }
    if (d.contains("bounded_factor")) {
      sc.bounded_factor = as_number(d["bounded_factor"],
                                    dp + "/bounded_factor");
      if (!(sc.bounded_factor > 1.0)) {
        fail(dp + "/bounded_factor", "must exceed 1");
      }
    }
    if (d.contains("s1")) sc.dist_s1 = as_int(d["s1"], dp + "/s1");
    if (d.contains("s2")) sc.dist_s2 = as_int(d["s2"], dp + "/s2");
  }
  return sc;
}

Scenario Scenario::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

std::string Scenario::resolved_json() const {
  json doc;
  doc["name"] = name;
  doc["version"] = schema_version;
  json sys;
  sys["A"] = matrix_json(system.A);
  sys["B"] = matrix_json(system.B);
  sys["sigma_w"] = matrix_json(system.Sigma_w);
  json sensors = json::array();
  for (std::size_t j = 0; j < system.C.size(); ++j) {
    json s;
    s["C"] = matrix_json(system.C[j]);
    s["sigma_v"] = matrix_json(system.Sigma_v[j]);
    sensors.push_back(std::move(s));
  }
  sys["sensors"] = std::move(sensors);
  sys["x0"] = {{"mean", vector_json(system.mu_x0)},
               {"sigma", matrix_json(system.Sigma_x0)}};
  doc["system"] = std::move(sys);
  doc["zoom"] = {{"rho", loop.zoom.rho},
                 {"epsilon", loop.zoom.epsilon},
                 {"eta", loop.zoom.eta},
                 {"delta", loop.zoom.delta_ratio},
                 {"c", loop.zoom.floor_scale}};
  doc["lattice"] = {{"enabled", loop.lattice}, {"ell", loop.ell}};
  json run;
  run["horizon"] = loop.horizon;
  run["trials"] = trials;
  run["seed"] = seed;
  run["mode"] = loop.multi_sensor ? "multi" : "single";
  run["estimator"] =
      loop.estimator == EstimatorKind::kSubset ? "subset" : "lsq";
  run["control"] =
      loop.control == ControlMode::kClosedLoop ? "closed" : "open";
  run["coverage"] = loop.coverage;
  run["delta1"] = loop.delta1;
  run["F"] = loop.small_set_radius;
  run["feedback_period"] = loop.feedback_period;
  if (!loop.K.empty()) run["K"] = loop.K;
  if (!sensor_order.empty()) run["sensor_order"] = sensor_order;
  doc["run"] = std::move(run);
  doc["diagnostics"] = {{"tail_fit_start", tail_fit_start},
                        {"bounded_factor", bounded_factor},
                        {"s1", dist_s1},
                        {"s2", dist_s2}};
  return doc.dump(2);
}

}  // namespace zoomctl
