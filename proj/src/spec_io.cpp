#include "rdde/spec_io.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "rdde/error.hpp"

namespace rdde {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& msg) { throw Error(ErrorCode::kConfig, msg); }

void only_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) bad(where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items()) {
    if (!ok.count(key)) bad("unknown key '" + key + "' in " + where);
  }
}

double number(const json& j, const std::string& what) {
  if (!j.is_number()) bad(what + " must be a number");
  return j.get<double>();
}

int integer(const json& j, const std::string& what) {
  if (!j.is_number_integer()) bad(what + " must be an integer");
  return j.get<int>();
}

Eigen::VectorXd parse_vector(const json& j, int size, const std::string& what) {
  if (j.is_number()) return Eigen::VectorXd::Constant(size, j.get<double>());
  if (!j.is_array() || static_cast<int>(j.size()) != size) bad(what + " must be a list of " + std::to_string(size));
  Eigen::VectorXd v(size);
  for (int i = 0; i < size; ++i) v(i) = number(j[static_cast<std::size_t>(i)], what);
  return v;
}

}  // namespace

Eigen::MatrixXd parse_matrix(const json& j, int rows, int cols, const std::string& what) {
  if (j.is_number()) {
    if (rows != cols) bad(what + ": a scalar is only accepted for square blocks");
    return j.get<double>() * Eigen::MatrixXd::Identity(rows, cols);
  }
  if (!j.is_array() || static_cast<int>(j.size()) != rows) bad(what + " must have " + std::to_string(rows) + " rows");
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<int>(row.size()) != cols) {
      bad(what + " rows must have " + std::to_string(cols) + " entries");
    }
    for (int c = 0; c < cols; ++c) m(i, c) = number(row[static_cast<std::size_t>(c)], what);
  }
  return m;
}

SpecDocument parse_spec(const json& doc) {
  only_keys(doc, {"schema", "n", "d", "delay", "drift", "measure", "diffusion", "initial"}, "spec");
  if (doc.contains("schema") && doc["schema"] != "rdde.spec/1") bad("unsupported spec schema");
  SpecDocument out;
  out.source = doc;
  EquationSpec& s = out.spec;
  s.n = doc.contains("n") ? integer(doc["n"], "n") : 1;
  s.d = doc.contains("d") ? integer(doc["d"], "d") : 1;
  if (s.n < 1 || s.d < 1) bad("n and d must be positive");
  if (!doc.contains("delay")) bad("spec needs 'delay'");
  s.delay = number(doc["delay"], "delay");
  if (!(s.delay > 0.0)) bad("delay must be positive");
  const int n = s.n;

  const json drift = doc.value("drift", json::object());
  only_keys(drift, {"A0", "A1"}, "drift");
  s.drift_state = drift.contains("A0") ? parse_matrix(drift["A0"], n, n, "A0") : Eigen::MatrixXd::Zero(n, n);
  s.drift_delay = drift.contains("A1") ? parse_matrix(drift["A1"], n, n, "A1") : Eigen::MatrixXd::Identity(n, n);

  if (doc.contains("measure")) {
    const json& m = doc["measure"];
    only_keys(m, {"atoms", "density"}, "measure");
    for (const json& a : m.value("atoms", json::array())) {
      only_keys(a, {"theta", "weight"}, "measure atom");
      if (!a.contains("theta") || !a.contains("weight")) bad("atoms need 'theta' and 'weight'");
      s.measure.atoms.push_back({number(a["theta"], "theta"), parse_matrix(a["weight"], n, n, "atom weight")});
    }
    if (m.contains("density")) {
      if (!m["density"].is_array() || m["density"].empty()) bad("density must be a non-empty list of cells");
      for (const json& c : m["density"]) s.measure.density_cells.push_back(parse_matrix(c, n, n, "density cell"));
    }
  }

  const json diff = doc.value("diffusion", json{{"kind", "zero"}});
  only_keys(diff, {"kind", "scale", "columns", "a1", "a2"}, "diffusion");
  out.diffusion_kind = diff.value("kind", std::string("zero"));
  if (out.diffusion_kind == "zero") {
    s.diffusion = SmoothMapG::zero(n, s.d);
  } else {
    Saturation kind;
    if (out.diffusion_kind == "linear") {
      kind = Saturation::kLinear;
    } else if (out.diffusion_kind == "tanh") {
      kind = Saturation::kTanh;
    } else if (out.diffusion_kind == "bounded-polynomial") {
      kind = Saturation::kBoundedPolynomial;
    } else {
      bad("unknown diffusion kind '" + out.diffusion_kind + "'");
    }
    if (!diff.contains("columns") || !diff["columns"].is_array() || static_cast<int>(diff["columns"].size()) != s.d) {
      bad("diffusion needs one column entry per noise dimension");
    }
    std::vector<ColumnMap> cols;
    for (const json& c : diff["columns"]) {
      only_keys(c, {"offset", "L", "K"}, "diffusion column");
      ColumnMap cm;
      cm.offset = c.contains("offset") ? parse_vector(c["offset"], n, "offset") : Eigen::VectorXd::Zero(n);
      cm.L = c.contains("L") ? parse_matrix(c["L"], n, n, "L") : Eigen::MatrixXd::Zero(n, n);
      cm.K = c.contains("K") ? parse_matrix(c["K"], n, n, "K") : Eigen::MatrixXd::Zero(n, n);
      cols.push_back(std::move(cm));
    }
    const double scale = diff.contains("scale") ? number(diff["scale"], "scale") : 1.0;
    const double a1 = diff.contains("a1") ? number(diff["a1"], "a1") : 1.0;
    const double a2 = diff.contains("a2") ? number(diff["a2"], "a2") : 0.0;
    s.diffusion = column_map(kind, std::move(cols), scale, a1, a2);
  }

  const json init = doc.value("initial", json{{"constant", 1.0}});
  only_keys(init, {"constant"}, "initial");
  out.initial = parse_vector(init.value("constant", json(1.0)), n, "initial constant");

  try {
    s.validate();
  } catch (const Error& e) {
    bad(std::string("invalid spec: ") + e.what());
  }
  return out;
}

json read_json_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) bad("cannot open " + file.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    bad(file.string() + ": " + e.what());
  }
}

SpecDocument load_spec(const std::filesystem::path& file) { return parse_spec(read_json_file(file)); }

std::uint64_t fnv1a64(const std::string& bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string spec_hash(const json& doc) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(doc.dump())));
  return buf;
}

ControlledSegment initial_segment(const SpecDocument& doc, int lag, double step) {
  return ControlledSegment::smooth(-lag, step, doc.initial.replicate(1, lag + 1), doc.spec.d);
}

}  // namespace rdde
