#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "bbope/bench.hpp"
#include "bbope/errors.hpp"

namespace bbope::bench {

std::string format_number(double value) {
  if (value == 0.0) return "0";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", value);
  return buf;
}

std::string to_csv(const std::vector<ResultRow>& rows) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += r.experiment + ',' + r.method + ',' + format_number(r.setting) + ',' + format_number(r.rmse) + ',' +
           format_number(r.bias) + ',' + format_number(r.std) + ',' + format_number(r.median) + ',' +
           format_number(r.q25) + ',' + format_number(r.q75) + ',' + std::to_string(r.runs) + ',' +
           std::to_string(r.seed) + '\n';
  }
  return out;
}

std::string to_svg(const std::vector<ResultRow>& rows, std::string_view title) {
  constexpr double W = 640, H = 400, left = 70, right = 150, top = 40, bottom = 50;
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

  std::set<double> setting_set;
  std::map<std::string, std::vector<std::pair<double, double>>> series;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& r : rows) {
    const double y = std::log10(std::max(r.rmse, 1e-16));
    setting_set.insert(r.setting);
    series[r.method].emplace_back(r.setting, y);
    lo = std::min(lo, y);
    hi = std::max(hi, y);
  }
  if (rows.empty()) lo = hi = 0.0;
  if (hi - lo < 1e-9) {
    lo -= 0.5;
    hi += 0.5;
  }
  const std::vector<double> settings(setting_set.begin(), setting_set.end());
  auto xpos = [&](double s) {
    const auto i = static_cast<double>(std::lower_bound(settings.begin(), settings.end(), s) - settings.begin());
    const double span = settings.size() > 1 ? static_cast<double>(settings.size() - 1) : 1.0;
    return left + (W - left - right) * (settings.size() > 1 ? i / span : 0.5);
  };
  auto ypos = [&](double y) { return top + (H - top - bottom) * (hi - y) / (hi - lo); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<!-- data: method,setting,rmse -->\n";
  for (const auto& r : rows) os << "<!-- " << r.method << "," << format_number(r.setting) << "," << format_number(r.rmse) << " -->\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
     << title << "</text>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << H - bottom << "\" x2=\"" << W - right << "\" y2=\"" << H - bottom
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << H - bottom
     << "\" stroke=\"black\"/>\n";
  for (double s : settings)
    os << "<text x=\"" << xpos(s) << "\" y=\"" << H - bottom + 18 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       << "font-size=\"11\">" << format_number(s) << "</text>\n";
  for (int k = 0; k <= 4; ++k) {
    const double y = lo + (hi - lo) * k / 4.0;
    char label[32];
    std::snprintf(label, sizeof label, "%.2f", y);
    os << "<text x=\"" << left - 6 << "\" y=\"" << ypos(y) + 4 << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
       << "font-size=\"11\">" << label << "</text>\n";
  }
  os << "<text x=\"16\" y=\"" << H / 2 << "\" transform=\"rotate(-90 16 " << H / 2
     << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">log10 RMSE</text>\n";
  std::size_t c = 0;
  for (auto& [method, pts] : series) {
    std::sort(pts.begin(), pts.end());
    const char* color = palette[c % std::size(palette)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) os << (i ? " " : "") << xpos(pts[i].first) << "," << ypos(pts[i].second);
    os << "\"/>\n";
    for (const auto& [s, y] : pts)
      os << "<circle cx=\"" << xpos(s) << "\" cy=\"" << ypos(y) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    const double ly = top + 18.0 * static_cast<double>(c);
    os << "<line x1=\"" << W - right + 15 << "\" y1=\"" << ly << "\" x2=\"" << W - right + 35 << "\" y2=\"" << ly
       << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << W - right + 40 << "\" y=\"" << ly + 4 << "\" font-family=\"sans-serif\" font-size=\"12\">"
       << method << "</text>\n";
    ++c;
  }
  os << "</svg>\n";
  return os.str();
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
  out.close();
  if (!out) throw Error("write to " + path.string() + " failed");
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

OutputPaths emit_outputs(const std::vector<ResultRow>& rows, const ExperimentConfig& config,
                         const nlohmann::json& timing) {
  if (rows.empty()) throw InvalidArgument("emit_outputs: no rows");
  std::error_code ec;
  std::filesystem::create_directories(config.output_dir, ec);
  if (ec) throw Error("cannot create " + config.output_dir.string() + ": " + ec.message());

  std::string stem = config.id();
  std::replace(stem.begin(), stem.end(), '/', '_');
  OutputPaths paths;
  paths.csv = config.output_dir / (stem + ".csv");
  paths.manifest = config.output_dir / (stem + ".manifest.json");
  write_file(paths.csv, to_csv(rows));
  if (config.svg) {
    paths.svg = config.output_dir / (stem + ".svg");
    write_file(paths.svg, to_svg(rows, config.id()));
  }

  nlohmann::json manifest;
  manifest["config"] = config_to_json(config);
  manifest["version"] = std::string(kVersion);
  manifest["written_at"] = utc_now();
  manifest["timing"] = timing;
  manifest["outputs"] = {{"csv", paths.csv.string()}, {"svg", paths.svg.string()}};
  manifest["rows"] = rows.size();
  write_file(paths.manifest, manifest.dump(2) + "\n");
  return paths;
}

}  // namespace bbope::bench
