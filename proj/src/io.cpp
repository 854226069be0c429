#include "ltsim/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace ltsim::io {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, fmt::format("cannot open {} for writing", path.string()));
  return out;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto a = s.find_first_not_of(" \t\r");
  const auto b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

double parse_double(const std::string& s, const std::filesystem::path& path, std::size_t line) {
  const std::string t = trim(s);
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size())
    fail(ErrorCode::IoError, fmt::format("{}:{}: '{}' is not a number", path.string(), line, t));
  return v;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

const std::vector<double>& CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return columns[i];
  fail(ErrorCode::IoError, fmt::format("missing column '{}'", name));
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{:.17g}", v);
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::span<const double>>& columns) {
  if (header.size() != columns.size()) fail(ErrorCode::InvalidArgument, "header and column counts differ");
  const std::size_t rows = columns.empty() ? 0 : columns.front().size();
  for (const auto& c : columns)
    if (c.size() != rows) fail(ErrorCode::InvalidArgument, "CSV columns have different lengths");
  std::ofstream out = open_out(path);
  std::string buf;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) buf += ',';
    buf += header[i];
  }
  buf += '\n';
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (c) buf += ',';
      buf += format_double(columns[c][r]);
    }
    buf += '\n';
    if (buf.size() > (1u << 20)) {
      out << buf;
      buf.clear();
    }
  }
  out << buf;
  if (!out) fail(ErrorCode::IoError, fmt::format("write to {} failed", path.string()));
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, fmt::format("cannot open {}", path.string()));
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::IoError, fmt::format("{} is empty", path.string()));
  for (auto& h : split(line, ',')) t.header.push_back(trim(h));
  t.columns.resize(t.header.size());
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != t.header.size())
      fail(ErrorCode::IoError, fmt::format("{}:{}: expected {} fields, got {}", path.string(), lineno,
                                           t.header.size(), cells.size()));
    for (std::size_t c = 0; c < cells.size(); ++c) t.columns[c].push_back(parse_double(cells[c], path, lineno));
  }
  return t;
}

void write_json(const std::filesystem::path& path, const json& value) {
  std::ofstream out = open_out(path);
  out << value.dump(2) << '\n';
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, fmt::format("cannot open {}", path.string()));
  return json::parse(in);
}

void write_ell_path(const std::filesystem::path& path, const EllPath& ell) {
  write_csv(path, {"t", "ell", "atom_mass"}, {ell.times, ell.ell, ell.atom_mass});
}

json ell_breakdown_json(const EllPath& ell) {
  return json{{"T", finite_or_null(ell.T_breakdown)},
              {"alpha", ell.alpha},
              {"M", ell.M},
              {"dt", ell.dt},
              {"epsilon0", ell.epsilon0}};
}

void write_trajectory(const std::filesystem::path& path, const SystemTrajectory& tr) {
  std::vector<std::string> header{"t"};
  const std::size_t rows = tr.times.size();
  std::vector<std::vector<double>> owned;
  const bool with_x = tr.X.size() == rows * tr.n && rows > 0 && !tr.X.empty();
  const bool with_l = tr.L.size() == rows * tr.n && rows > 0 && !tr.L.empty();
  auto add_block = [&](const std::vector<double>& data, const char* prefix) {
    for (std::size_t i = 0; i < tr.n; ++i) {
      header.push_back(fmt::format("{}_{}", prefix, i + 1));
      std::vector<double> col(rows);
      for (std::size_t r = 0; r < rows; ++r) col[r] = data[r * tr.n + i];
      owned.push_back(std::move(col));
    }
  };
  if (with_x) add_block(tr.X, "X");
  if (with_l) add_block(tr.L, "L");
  header.emplace_back("zero_count");
  header.emplace_back("rho_active");
  std::vector<double> zc(tr.zero_count.begin(), tr.zero_count.end());
  std::vector<std::span<const double>> cols{tr.times};
  for (const auto& c : owned) cols.emplace_back(c);
  cols.emplace_back(zc);
  cols.emplace_back(tr.rho_active);
  write_csv(path, header, cols);
}

json breakdown_json(const BreakdownEvent& ev) {
  return json{{"occurred", ev.occurred},
              {"tau", ev.occurred ? json(ev.tau) : json(nullptr)},
              {"trigger", ev.occurred ? json(std::string(to_string(ev.trigger))) : json(nullptr)},
              {"zero_set", ev.zero_set_at_tau.indices()},
              {"rho", finite_or_null(ev.rho_at_tau)}};
}

json regime_report_json(const RegimeReport& rep) {
  json w = json::array();
  for (const auto& x : rep.witnesses) {
    std::vector<double> v(x.vector.data(), x.vector.data() + x.vector.size());
    w.push_back({{"subset", x.subset.indices()}, {"vector", v}, {"quadratic", x.quadratic}});
  }
  json deg = json::array();
  for (const auto& s : rep.degenerate_subsets) deg.push_back(s.indices());
  return json{{"regime", std::string(to_string(rep.regime))},
              {"rho_active", finite_or_null(rep.rho_active)},
              {"finite_breakdown", std::string(to_string(rep.finite_breakdown))},
              {"condition_a", rep.condition_a},
              {"condition_b", rep.condition_b},
              {"condition_c", rep.condition_c},
              {"rho_initial", finite_or_null(rep.rho_initial)},
              {"degenerate_subsets", deg},
              {"witnesses", w},
              {"tolerance", rep.tolerance},
              {"subsets_scanned", rep.subsets_scanned}};
}

Eigen::MatrixXd read_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, fmt::format("cannot open {}", path.string()));
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::IoError, fmt::format("{} is empty", path.string()));
  const std::string head = trim(line);
  if (head.rfind("n=", 0) != 0) fail(ErrorCode::IoError, fmt::format("{}:1: expected header 'n=<N>'", path.string()));
  const long n = std::strtol(head.c_str() + 2, nullptr, 10);
  if (n <= 0) fail(ErrorCode::IoError, fmt::format("{}:1: invalid dimension", path.string()));
  Eigen::MatrixXd m(n, n);
  for (long r = 0; r < n; ++r) {
    if (!std::getline(in, line)) fail(ErrorCode::IoError, fmt::format("{}: expected {} rows", path.string(), n));
    const auto cells = split(line, ',');
    if (static_cast<long>(cells.size()) != n)
      fail(ErrorCode::IoError, fmt::format("{}:{}: expected {} values", path.string(), r + 2, n));
    for (long c = 0; c < n; ++c) m(r, c) = parse_double(cells[static_cast<std::size_t>(c)], path, static_cast<std::size_t>(r + 2));
  }
  return m;
}

void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  std::ofstream out = open_out(path);
  out << "n=" << m.rows() << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << format_double(m(r, c));
    out << '\n';
  }
}

void write_profile_table(const std::filesystem::path& path, const AnalyticLaw& law, double x_max,
                         std::size_t n_points) {
  if (n_points < 2) fail(ErrorCode::InvalidArgument, "profile table needs at least 2 points");
  std::vector<double> x(n_points), d(n_points), f(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    x[i] = x_max * static_cast<double>(i) / static_cast<double>(n_points - 1);
    d[i] = law.density(x[i]);
    f[i] = law.cdf(x[i]);
  }
  write_csv(path, {"x", "density", "cdf"}, {x, d, f});
}

void write_density(const std::filesystem::path& path, const Grid1D& grid, const DensityField& field) {
  std::vector<double> x(field.mu.size());
  for (std::size_t j = 0; j < x.size(); ++j) x[j] = grid.center(j);
  write_csv(path, {"x", "mu"}, {x, field.mu});
}

void write_flux_record(const std::filesystem::path& path, const FluxRecord& rec) {
  write_csv(path, {"t", "mu0", "ell"}, {rec.times, rec.mu0, rec.ell});
}

void write_sample(const std::filesystem::path& path, std::span<const double> values) {
  write_csv(path, {"x"}, {values});
}

std::vector<double> read_sample(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  if (t.header.empty()) fail(ErrorCode::IoError, fmt::format("{} has no columns", path.string()));
  return t.columns.front();
}

}  // namespace ltsim::io
