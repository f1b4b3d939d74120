#include "oamtomo/io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace oamtomo {

namespace {

using nlohmann::json;

constexpr int kCsvDigits = std::numeric_limits<double>::max_digits10;

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::invalid_argument("cannot open " + path.string() + " for reading");
  }
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::invalid_argument("cannot open " + path.string() + " for writing");
  }
  return out;
}

void finish_write(std::ostream& out, const std::string& what) {
  out.flush();
  if (!out) {
    throw std::runtime_error("failed while writing " + what);
  }
}

json parse_json(std::istream& in, const std::string& what) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(what + ": " + e.what());
  }
  return j;
}

void require_keys(const json& j, std::initializer_list<const char*> keys,
                  const std::string& what) {
  if (!j.is_object()) {
    throw std::invalid_argument(what + ": expected a JSON object");
  }
  for (const char* key : keys) {
    if (!j.contains(key)) {
      throw std::invalid_argument(what + ": missing key \"" + key + "\"");
    }
  }
}

double finite_number(const json& j, const char* key, const std::string& what) {
  if (!j.at(key).is_number()) {
    throw std::invalid_argument(what + ": \"" + std::string(key) + "\" must be a number");
  }
  const double v = j.at(key).get<double>();
  if (!std::isfinite(v)) {
    throw std::invalid_argument(what + ": \"" + std::string(key) + "\" must be finite");
  }
  return v;
}

std::string strip_cr(std::string line) {
  while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) {
    line.pop_back();
  }
  return line;
}

}  // namespace

void write_density_matrix(const DensityMatrix9& rho, std::ostream& out) {
  const Mat9& m = rho.matrix();
  std::vector<double> re;
  std::vector<double> im;
  re.reserve(81);
  im.reserve(81);
  for (int r = 0; r < 9; ++r) {
    for (int c = 0; c < 9; ++c) {
      re.push_back(m(r, c).real());
      im.push_back(m(r, c).imag());
    }
  }
  json j;
  j["dim"] = 9;
  j["re"] = re;
  j["im"] = im;
  out << j.dump(2) << '\n';
  finish_write(out, "density matrix");
}

void write_density_matrix(const DensityMatrix9& rho, const std::filesystem::path& path) {
  auto out = open_output(path);
  write_density_matrix(rho, out);
}

DensityMatrix9 read_density_matrix(std::istream& in) {
  const json j = parse_json(in, "density matrix");
  require_keys(j, {"dim", "re", "im"}, "density matrix");
  if (!j.at("dim").is_number_integer() || j.at("dim").get<int>() != 9) {
    throw std::invalid_argument("density matrix: dim must be 9");
  }
  const auto& re = j.at("re");
  const auto& im = j.at("im");
  if (!re.is_array() || !im.is_array() || re.size() != 81 || im.size() != 81) {
    throw std::invalid_argument("density matrix: re and im must hold 81 entries");
  }
  Mat9 m;
  for (int r = 0; r < 9; ++r) {
    for (int c = 0; c < 9; ++c) {
      const auto idx = static_cast<std::size_t>(9 * r + c);
      if (!re[idx].is_number() || !im[idx].is_number()) {
        throw std::invalid_argument("density matrix: entries must be numbers");
      }
      const double vr = re[idx].get<double>();
      const double vi = im[idx].get<double>();
      if (!std::isfinite(vr) || !std::isfinite(vi)) {
        throw std::invalid_argument("density matrix: entries must be finite");
      }
      m(r, c) = C64(vr, vi);
    }
  }
  return DensityMatrix9::from(m);
}

DensityMatrix9 read_density_matrix(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_density_matrix(in);
}

void write_counts_csv(const CoincidenceTable& table, std::ostream& out) {
  out << "i,j,counts\n";
  for (int i = 0; i < 9; ++i) {
    for (int j = 0; j < 9; ++j) {
      out << i << ',' << j << ',' << table.counts[static_cast<std::size_t>(9 * i + j)]
          << '\n';
    }
  }
  finish_write(out, "counts CSV");
}

void write_counts_metadata(const CoincidenceTable& table, std::ostream& out) {
  json j;
  j["duration_s"] = table.duration_s;
  j["total_trials"] = table.total_trials;
  j["background_per_setting"] = table.background;
  out << j.dump(2) << '\n';
  finish_write(out, "counts metadata");
}

void write_counts(const CoincidenceTable& table, const std::filesystem::path& csv_path,
                  const std::filesystem::path& metadata_path) {
  auto csv = open_output(csv_path);
  write_counts_csv(table, csv);
  auto meta = open_output(metadata_path);
  write_counts_metadata(table, meta);
}

CoincidenceTable read_counts_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != "i,j,counts") {
    throw std::invalid_argument("counts CSV: expected header \"i,j,counts\"");
  }
  CoincidenceTable table;
  std::array<bool, 81> seen{};
  int rows = 0;
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (line.empty()) continue;
    std::istringstream ss(line);
    long long i = -1;
    long long j = -1;
    long long counts = -1;
    char c1 = 0;
    char c2 = 0;
    ss >> i >> c1 >> j >> c2 >> counts;
    if (!ss || c1 != ',' || c2 != ',' || !(ss >> std::ws).eof()) {
      throw std::invalid_argument("counts CSV: malformed row \"" + line + "\"");
    }
    if (i < 0 || i > 8 || j < 0 || j > 8) {
      throw std::invalid_argument("counts CSV: setting index out of range in \"" + line + "\"");
    }
    if (counts < 0) {
      throw std::invalid_argument("counts CSV: negative count in \"" + line + "\"");
    }
    const auto flat = static_cast<std::size_t>(9 * i + j);
    if (seen[flat]) {
      throw std::invalid_argument("counts CSV: duplicate setting (" + std::to_string(i) +
                                  ", " + std::to_string(j) + ")");
    }
    seen[flat] = true;
    table.counts[flat] = counts;
    ++rows;
  }
  if (rows != 81) {
    throw std::invalid_argument("counts CSV: expected 81 rows, got " + std::to_string(rows));
  }
  return table;
}

void read_counts_metadata(std::istream& in, CoincidenceTable& table) {
  const json j = parse_json(in, "counts metadata");
  require_keys(j, {"duration_s", "total_trials", "background_per_setting"},
               "counts metadata");
  for (const auto& item : j.items()) {
    if (item.key() != "duration_s" && item.key() != "total_trials" &&
        item.key() != "background_per_setting") {
      throw std::invalid_argument("counts metadata: unknown key \"" + item.key() + "\"");
    }
  }
  const double duration = finite_number(j, "duration_s", "counts metadata");
  if (duration < 0.0) {
    throw std::invalid_argument("counts metadata: duration_s must be nonnegative");
  }
  if (!j.at("total_trials").is_number_integer()) {
    throw std::invalid_argument("counts metadata: total_trials must be an integer");
  }
  const auto trials = j.at("total_trials").get<std::int64_t>();
  if (trials < 0) {
    throw std::invalid_argument("counts metadata: total_trials must be nonnegative");
  }
  const auto& bg = j.at("background_per_setting");
  if (!bg.is_array() || (!bg.empty() && bg.size() != 81)) {
    throw std::invalid_argument(
        "counts metadata: background_per_setting must hold 0 or 81 entries");
  }
  std::vector<double> background;
  background.reserve(bg.size());
  for (const auto& v : bg) {
    if (!v.is_number() || !std::isfinite(v.get<double>()) || v.get<double>() < 0.0) {
      throw std::invalid_argument(
          "counts metadata: background entries must be nonnegative numbers");
    }
    background.push_back(v.get<double>());
  }
  table.duration_s = duration;
  table.total_trials = trials;
  table.background = std::move(background);
}

CoincidenceTable read_counts(const std::filesystem::path& csv_path) {
  auto in = open_input(csv_path);
  return read_counts_csv(in);
}

CoincidenceTable read_counts(const std::filesystem::path& csv_path,
                             const std::filesystem::path& metadata_path) {
  CoincidenceTable table = read_counts(csv_path);
  auto meta = open_input(metadata_path);
  read_counts_metadata(meta, table);
  return table;
}

void write_witness_report(const WitnessReport& report, std::ostream& out) {
  json j;
  j["alpha"] = report.alpha;
  j["beta"] = report.beta;
  j["fidelity"] = report.fidelity;
  j["witness"] = report.witness;
  j["certified"] = report.certified;
  if (report.ci.has_value()) {
    j["ci_low"] = report.ci->low;
    j["ci_high"] = report.ci->high;
  } else {
    j["ci_low"] = nullptr;
    j["ci_high"] = nullptr;
  }
  out << j.dump(2) << '\n';
  finish_write(out, "witness report");
}

void write_witness_report(const WitnessReport& report, const std::filesystem::path& path) {
  auto out = open_output(path);
  write_witness_report(report, out);
}

WitnessReport read_witness_report(std::istream& in) {
  const json j = parse_json(in, "witness report");
  require_keys(j, {"alpha", "beta", "fidelity", "witness", "certified", "ci_low", "ci_high"},
               "witness report");
  WitnessReport report;
  report.alpha = finite_number(j, "alpha", "witness report");
  report.beta = finite_number(j, "beta", "witness report");
  report.fidelity = finite_number(j, "fidelity", "witness report");
  report.witness = finite_number(j, "witness", "witness report");
  if (!j.at("certified").is_boolean()) {
    throw std::invalid_argument("witness report: certified must be a boolean");
  }
  report.certified = j.at("certified").get<bool>();
  const bool low_null = j.at("ci_low").is_null();
  const bool high_null = j.at("ci_high").is_null();
  if (low_null != high_null) {
    throw std::invalid_argument("witness report: ci_low and ci_high must both be set or both null");
  }
  if (!low_null) {
    report.ci = ConfidenceInterval{finite_number(j, "ci_low", "witness report"),
                                   finite_number(j, "ci_high", "witness report")};
  }
  return report;
}

WitnessReport read_witness_report(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_witness_report(in);
}

void write_scan_csv(const std::vector<ScanPoint>& scan, std::ostream& out) {
  out << "s,gaussian_component\n";
  out << std::setprecision(kCsvDigits);
  for (const ScanPoint& pt : scan) {
    out << pt.s << ',' << pt.gaussian_component << '\n';
  }
  finish_write(out, "scan CSV");
}

void write_scan_csv(const std::vector<ScanPoint>& scan, const std::filesystem::path& path) {
  auto out = open_output(path);
  write_scan_csv(scan, out);
}

std::vector<ScanPoint> read_scan_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != "s,gaussian_component") {
    throw std::invalid_argument("scan CSV: expected header \"s,gaussian_component\"");
  }
  std::vector<ScanPoint> scan;
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (line.empty()) continue;
    std::istringstream ss(line);
    double s = 0.0;
    double comp = 0.0;
    char c1 = 0;
    ss >> s >> c1 >> comp;
    if (!ss || c1 != ',' || !(ss >> std::ws).eof()) {
      throw std::invalid_argument("scan CSV: malformed row \"" + line + "\"");
    }
    scan.push_back(ScanPoint{s, comp});
  }
  return scan;
}

std::vector<ScanPoint> read_scan_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_scan_csv(in);
}

void write_field_map_csv(const Field& field, double ref_w0,
                         const QuadratureGrid& grid, std::ostream& out) {
  grid.validate();
  if (!field) throw std::invalid_argument("write_field_map_csv: empty field");
  if (!(ref_w0 > 0.0)) {
    throw std::invalid_argument("write_field_map_csv: reference waist must be positive");
  }
  const double half = grid.half_extent * ref_w0;
  const double h = 2.0 * half / grid.samples_per_axis;
  out << "x,y,intensity,phase\n";
  out << std::setprecision(kCsvDigits);
  for (int jy = 0; jy <= grid.samples_per_axis; ++jy) {
    const double y = -half + h * jy;
    for (int ix = 0; ix <= grid.samples_per_axis; ++ix) {
      const double x = -half + h * ix;
      const C64 v = field(x, y);
      out << x << ',' << y << ',' << std::norm(v) << ','
          << std::atan2(v.imag(), v.real()) << '\n';
    }
  }
  finish_write(out, "field map CSV");
}

}  // namespace oamtomo
