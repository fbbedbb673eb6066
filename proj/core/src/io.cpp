#include "affine/io.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace affine {

using nlohmann::json;

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kConfig, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kConfig, "cannot write " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

namespace {

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::kConfig, what); }

json parse(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    config_error(std::string("malformed JSON: ") + e.what());
  }
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) config_error(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) config_error("unknown key '" + k + "' in " + where);
  }
}

const json& need(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) config_error("missing key '" + key + "' in " + where);
  return j.at(key);
}

double to_number(const json& j, const std::string& where) {
  if (!j.is_number()) config_error(where + " must be a number");
  return j.get<double>();
}

Vector to_vector(const json& j, const std::string& where) {
  if (!j.is_array()) config_error(where + " must be an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = to_number(j[i], where);
  return v;
}

/// Nested rows or a flat row-major array of rows*cols numbers.
Matrix to_matrix(const json& j, int rows, int cols, const std::string& where) {
  if (!j.is_array()) config_error(where + " must be an array");
  Matrix m(rows, cols);
  if (!j.empty() && j[0].is_array()) {
    if (static_cast<int>(j.size()) != rows) config_error(where + " has the wrong row count");
    for (int r = 0; r < rows; ++r) {
      const Vector row = to_vector(j[r], where);
      if (row.size() != cols) config_error(where + " has the wrong column count");
      m.row(r) = row.transpose();
    }
    return m;
  }
  const Vector flat = to_vector(j, where);
  if (flat.size() != static_cast<Eigen::Index>(rows) * cols) {
    config_error(where + " needs " + std::to_string(rows * cols) + " entries");
  }
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = flat(r * cols + c);
  }
  return m;
}

int to_int(const json& j, const std::string& where) {
  if (!j.is_number_integer()) config_error(where + " must be an integer");
  return j.get<int>();
}

SymElement to_sym(const json& j, int n, const std::string& where) {
  try {
    return SymElement(to_matrix(j, n, n, where));
  } catch (const Error& e) {
    config_error(where + ": " + e.what());
  }
}

ConeElement to_cone(const json& j, int n, const std::string& where) {
  const SymElement s = to_sym(j, n, where);
  if (!is_in_cone(s)) config_error(where + " is not positive semidefinite");
  return ConeElement(s);
}

json to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

AdmissibleParams params_from(const json& j) {
  const std::string where = "x_params";
  check_keys(j, {"dim", "b", "B", "m", "mu"}, where);
  const int n = to_int(need(j, "dim", where), "dim");
  if (n < 1) config_error("dim must be positive");
  const int big_n = sym_dim(n);
  const SymElement b = j.contains("b") ? to_sym(j["b"], n, "b") : SymElement(n);
  AtomicMeasure m;
  if (j.contains("m")) {
    if (!j["m"].is_array()) config_error("m must be an array");
    for (const auto& a : j["m"]) {
      check_keys(a, {"w", "xi"}, "m atom");
      const double w = to_number(need(a, "w", "m atom"), "m.w");
      if (!(w > 0.0)) config_error("m weights must be positive");
      m.atoms.push_back({w, to_cone(need(a, "xi", "m atom"), n, "m.xi")});
    }
  }
  OperatorMeasure mu;
  if (j.contains("mu")) {
    if (!j["mu"].is_array()) config_error("mu must be an array");
    for (const auto& a : j["mu"]) {
      check_keys(a, {"M", "xi"}, "mu atom");
      mu.atoms.push_back(
          {to_cone(need(a, "M", "mu atom"), n, "mu.M"), to_cone(need(a, "xi", "mu atom"), n, "mu.xi")});
    }
  }
  const json& bj = need(j, "B", where);
  if (bj.is_object()) {
    check_keys(bj, {"lyapunov", "add"}, "B");
    const Matrix g = to_matrix(need(bj, "lyapunov", "B"), n, n, "B.lyapunov");
    if (!bj.contains("add")) return AdmissibleParams::ou(g, b, std::move(m), std::move(mu));
    SuperOperator op = lyapunov_superop(g);
    op += SuperOperator(n, to_matrix(bj["add"], big_n, big_n, "B.add"));
    return AdmissibleParams(b, op, std::move(m), std::move(mu));
  }
  return AdmissibleParams(b, SuperOperator(n, to_matrix(bj, big_n, big_n, "B")), std::move(m),
                          std::move(mu));
}

}  // namespace

AdmissibleParams params_from_json(std::string_view text) { return params_from(parse(text)); }

std::string params_to_json(const AdmissibleParams& p) {
  json j;
  j["dim"] = p.dim();
  j["b"] = to_json(p.b().matrix());
  if (p.lyapunov_generator()) {
    j["B"] = {{"lyapunov", to_json(*p.lyapunov_generator())}};
  } else {
    j["B"] = to_json(p.B().matrix());
  }
  j["m"] = json::array();
  for (const auto& a : p.m().atoms) j["m"].push_back({{"w", a.w}, {"xi", to_json(a.xi.matrix())}});
  j["mu"] = json::array();
  for (const auto& a : p.mu().atoms) {
    j["mu"].push_back({{"M", to_json(a.mass.matrix())}, {"xi", to_json(a.xi.matrix())}});
  }
  return j.dump(2);
}

namespace {

const std::set<std::string> kJointKeys = {"dim_h", "A", "g0", "Gamma", "D", "Lambda", "x_params"};

struct JointParts {
  int dim_h = 0;
  std::optional<Matrix> a, gamma;
  std::optional<Vector> g0;
  std::optional<Matrix> d, lambda;
  AdmissibleParams x;
};

JointParts joint_parts(const json& j) {
  JointParts p;
  p.x = params_from(need(j, "x_params", "model"));
  const int n = p.x.dim();
  p.dim_h = to_int(need(j, "dim_h", "model"), "dim_h");
  if (p.dim_h < 1) config_error("dim_h must be positive");
  if (j.contains("A")) p.a = to_matrix(j["A"], p.dim_h, p.dim_h, "A");
  if (j.contains("g0")) {
    p.g0 = to_vector(j["g0"], "g0");
    if (p.g0->size() != p.dim_h) config_error("g0 must have dim_h entries");
  }
  if (j.contains("Gamma")) p.gamma = to_matrix(j["Gamma"], p.dim_h, sym_dim(n), "Gamma");
  if (j.contains("D") == j.contains("Lambda")) config_error("give exactly one of D and Lambda");
  if (j.contains("D")) p.d = to_matrix(j["D"], p.dim_h, p.dim_h, "D");
  if (j.contains("Lambda")) p.lambda = to_matrix(j["Lambda"], p.dim_h, n, "Lambda");
  return p;
}

JointModelSpec assemble(JointParts p, const Matrix& a_default, const Matrix& gamma_default) {
  const Matrix a = p.a ? *p.a : a_default;
  const Vector g0 = p.g0 ? *p.g0 : Vector(Vector::Zero(p.dim_h));
  const Matrix gamma = p.gamma ? *p.gamma : gamma_default;
  try {
    if (p.d) return JointModelSpec::with_d(a, g0, gamma, *p.d, std::move(p.x));
    return JointModelSpec::with_loading(a, g0, gamma, *p.lambda, std::move(p.x));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfig) throw;
    config_error(std::string("model: ") + e.what());
  }
}

}  // namespace

JointModelSpec joint_spec_from_json(std::string_view text) {
  const json j = parse(text);
  check_keys(j, kJointKeys, "model");
  JointParts p = joint_parts(j);
  if (!p.a) config_error("missing key 'A' in model");
  const Matrix gamma_default = Matrix::Zero(p.dim_h, sym_dim(p.x.dim()));
  return assemble(std::move(p), Matrix(), gamma_default);
}

PricingModel pricing_model_from_json(std::string_view text) {
  const json j = parse(text);
  std::set<std::string> keys = kJointKeys;
  keys.insert({"beta", "anchors", "r", "x0", "y0", "stationary_start"});
  check_keys(j, keys, "pricing model");
  JointParts p = joint_parts(j);
  const double beta = to_number(need(j, "beta", "pricing model"), "beta");
  const Vector anchors = to_vector(need(j, "anchors", "pricing model"), "anchors");
  if (anchors.size() != p.dim_h) config_error("need one anchor per dim_h coordinate");
  PricingModel model;
  try {
    model.space = FilipovicSpace(beta, std::vector<double>(anchors.begin(), anchors.end()));
  } catch (const Error& e) {
    config_error(std::string("anchors: ") + e.what());
  }
  const int n = p.x.dim();
  Matrix lambda;
  if (p.lambda) {
    lambda = *p.lambda;
  } else {
    if (p.dim_h != n) config_error("D requires dim_h equal to x_params.dim");
    lambda = psd_sqrt(*p.d);
  }
  const Matrix gamma_default = risk_neutral_gamma(model.space, lambda);
  model.spec = assemble(std::move(p), model.space.shift_generator(), gamma_default);
  model.r = j.contains("r") ? to_number(j["r"], "r") : 0.0;
  bool stationary = false;
  if (j.contains("stationary_start")) {
    if (!j["stationary_start"].is_boolean()) config_error("stationary_start must be a boolean");
    stationary = j["stationary_start"].get<bool>();
  }
  if (stationary) {
    if (j.contains("x0")) config_error("x0 and stationary_start are exclusive");
    model.start = Regime::invariant();
  } else {
    const ConeElement x0 = to_cone(need(j, "x0", "pricing model"), n, "x0");
    Vector y0;
    if (j.contains("y0")) {
      y0 = to_vector(j["y0"], "y0");
      if (y0.size() != model.spec.dim_h) config_error("y0 must have dim_h entries");
    }
    model.start = Regime::point(x0, y0);
  }
  return model;
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) s[i] = digits[h & 0xf];
  return s;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(std::ostream& os, std::uint64_t config_hash,
                     const std::vector<std::string>& header)
    : os_(os), width_(header.size()) {
  os_ << "# config-hash " << hex64(config_hash) << '\n';
  row(header);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  require(cells.size() == width_, ErrorCode::kSizeMismatch, "CSV row width differs from header");
  for (std::size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << cells[i];
  os_ << '\n';
}

void CsvWriter::row(const std::vector<double>& values) {
  std::vector<std::string> cells;
  cells.reserve(values.size());
  for (double v : values) cells.push_back(format_double(v));
  row(cells);
}

std::vector<Vector> read_csv_rows(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::vector<Vector> out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> vals;
    std::stringstream ls(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ls, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str()) {
        numeric = false;
        break;
      }
      vals.push_back(v);
    }
    if (!numeric) {
      if (first) {
        first = false;
        continue;
      }
      config_error("non-numeric row in " + path);
    }
    first = false;
    if (!out.empty() && static_cast<std::size_t>(out.front().size()) != vals.size()) {
      config_error("ragged rows in " + path);
    }
    out.push_back(Eigen::Map<const Vector>(vals.data(), static_cast<Eigen::Index>(vals.size())));
  }
  return out;
}

}  // namespace affine
