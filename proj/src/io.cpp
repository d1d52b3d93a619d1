#include "warpflow/io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace warpflow {

namespace {

void write_header(std::ofstream& out, const char* kind, const ConeParams& c, const char* tkey,
                  double tval) {
  out << "# kind=" << kind << " p=" << c.p << " q=" << c.q << " " << tkey << "=";
  out << std::setprecision(17) << tval << "\n";
}

struct ParsedHeader {
  std::string kind;
  int p = 0, q = 0;
  double t = 0.0;
};

ParsedHeader parse_header(std::istream& in) {
  std::string line;
  std::getline(in, line);
  require(!line.empty() && line[0] == '#', "profile csv: missing header");
  ParsedHeader h;
  std::istringstream ss(line.substr(1));
  std::string tok;
  while (ss >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
    if (key == "kind") h.kind = val;
    if (key == "p") h.p = std::stoi(val);
    if (key == "q") h.q = std::stoi(val);
    if (key == "t" || key == "tau") h.t = std::stod(val);
  }
  require(!h.kind.empty() && h.p >= 2 && h.q >= 2, "profile csv: malformed header");
  return h;
}

std::vector<std::vector<double>> read_columns(std::istream& in, std::size_t ncols) {
  std::vector<std::vector<double>> cols(ncols);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    double v;
    std::size_t c = 0;
    while (c < ncols) {
      char comma;
      if (!(ss >> v)) break;
      cols[c++].push_back(v);
      ss >> comma;
    }
    require(c == ncols, "profile csv: short row");
  }
  return cols;
}

}  // namespace

void write_csv(const std::filesystem::path& path, const WarpedProfile& w) {
  std::ofstream out(path);
  require(out.good(), "write_csv: cannot open output");
  write_header(out, "warped", w.cone, "t", w.t);
  out << std::setprecision(17);
  for (std::size_t i = 0; i < w.x.size(); ++i)
    out << w.x[i] << "," << w.chi[i] << "," << w.phi[i] << "," << w.psi[i] << "\n";
}

void write_csv(const std::filesystem::path& path, const SidewaysProfile& s) {
  std::ofstream out(path);
  require(out.good(), "write_csv: cannot open output");
  write_header(out, "sideways", s.cone, "t", s.t);
  out << std::setprecision(17);
  for (std::size_t i = 0; i < s.psi.size(); ++i)
    out << s.psi[i] << "," << s.z[i] << "," << s.u[i] << "\n";
}

void write_csv(const std::filesystem::path& path, const RescaledProfile& r) {
  std::ofstream out(path);
  require(out.good(), "write_csv: cannot open output");
  write_header(out, "rescaled", r.cone, "tau", r.tau);
  out << std::setprecision(17);
  for (std::size_t i = 0; i < r.gamma.size(); ++i)
    out << r.gamma[i] << "," << r.Z[i] << "," << r.U[i] << "\n";
}

ProfileKind peek_profile_kind(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), "peek_profile_kind: cannot open input");
  const auto h = parse_header(in);
  if (h.kind == "warped") return ProfileKind::warped;
  if (h.kind == "sideways") return ProfileKind::sideways;
  if (h.kind == "rescaled") return ProfileKind::rescaled;
  throw std::invalid_argument("peek_profile_kind: unknown kind " + h.kind);
}

WarpedProfile read_warped_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), "read_warped_csv: cannot open input");
  const auto h = parse_header(in);
  require(h.kind == "warped", "read_warped_csv: wrong kind");
  auto cols = read_columns(in, 4);
  WarpedProfile w;
  w.cone = cone_constants(h.p, h.q);
  w.t = h.t;
  w.x = std::move(cols[0]);
  w.chi = std::move(cols[1]);
  w.phi = std::move(cols[2]);
  w.psi = std::move(cols[3]);
  return w;
}

SidewaysProfile read_sideways_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), "read_sideways_csv: cannot open input");
  const auto h = parse_header(in);
  require(h.kind == "sideways", "read_sideways_csv: wrong kind");
  auto cols = read_columns(in, 3);
  SidewaysProfile s;
  s.cone = cone_constants(h.p, h.q);
  s.t = h.t;
  s.psi = std::move(cols[0]);
  s.z = std::move(cols[1]);
  s.u = std::move(cols[2]);
  return s;
}

RescaledProfile read_rescaled_csv(const std::filesystem::path& path, double T) {
  std::ifstream in(path);
  require(in.good(), "read_rescaled_csv: cannot open input");
  const auto h = parse_header(in);
  require(h.kind == "rescaled", "read_rescaled_csv: wrong kind");
  auto cols = read_columns(in, 3);
  RescaledProfile r;
  r.cone = cone_constants(h.p, h.q);
  r.tau = h.t;
  r.T = T;
  r.gamma = std::move(cols[0]);
  r.Z = std::move(cols[1]);
  r.U = std::move(cols[2]);
  return r;
}

std::string to_json(const BarrierReport& rep) {
  nlohmann::json j;
  j["lemma"] = rep.lemma;
  j["params"] = rep.params;
  j["grid"] = {{"n_space", rep.n_space}, {"n_tau", rep.n_tau}};
  j["required_sign"] = rep.required_sign;
  j["min_residual"] = rep.min_residual;
  j["max_residual"] = rep.max_residual;
  j["violation_fraction"] = rep.violation_fraction;
  j["worst_point"] = {{"x", rep.worst.x}, {"tau", rep.worst.tau}};
  j["coefficient_checks"] = rep.coefficient_checks;
  j["coefficients_ok"] = rep.coefficients_ok;
  j["pass"] = rep.pass();
  return j.dump(2);
}

std::string to_json(const MembershipReport& rep) {
  nlohmann::json j;
  j["all_pass"] = rep.all_pass;
  auto items = nlohmann::json::array();
  for (const auto& it : rep.items) {
    items.push_back({{"name", it.name},
                     {"pass", it.pass},
                     {"max_violation", it.max_violation},
                     {"margin", it.margin},
                     {"worst", {{"x", it.worst.x}, {"tau", it.worst.tau}}}});
  }
  j["items"] = items;
  return j.dump(2);
}

}  // namespace warpflow
