#pragma once

// File formats: model and raw CSVs, JSON reports, posterior tables and
// run manifests.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "grangerglm/mcmc.hpp"
#include "grangerglm/mle.hpp"
#include "grangerglm/model.hpp"
#include "grangerglm/preprocess.hpp"

namespace grangerglm {

using json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.1.0";

class IoError : public std::runtime_error {
 public:
  IoError(const std::string& what, std::filesystem::path path)
      : std::runtime_error(what + ": " + path.string()), path_(std::move(path)) {}
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// ---------------------------------------------------------------------------
// text helpers

/// Shortest decimal form that reads back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s == "nan") return std::nan("");
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  double v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw std::invalid_argument("not a number: '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read", path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write", path);
  out << text;
  if (!out) throw IoError("write failed", path);
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw std::invalid_argument("missing CSV column: " + name);
  }
};

inline CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    if (first) {
      t.header = std::move(cells);
      first = false;
      continue;
    }
    if (cells.size() != t.header.size())
      throw std::invalid_argument("CSV row " + std::to_string(t.rows.size() + 1) + " has " +
                                  std::to_string(cells.size()) + " cells, header has " +
                                  std::to_string(t.header.size()));
    t.rows.push_back(std::move(cells));
  }
  if (first) throw std::invalid_argument("empty CSV");
  return t;
}

inline CsvTable read_csv(const std::filesystem::path& path) {
  const auto text = read_text(path);
  try {
    return parse_csv(text);
  } catch (const std::invalid_argument& e) {
    throw IoError(e.what(), path);
  }
}

inline std::string to_csv(const CsvTable& t) {
  std::string out;
  auto row = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  row(t.header);
  for (const auto& r : t.rows) row(r);
  return out;
}

// ---------------------------------------------------------------------------
// series

inline std::string series_to_csv(const BivariateSeries& s) {
  CsvTable t{{"t", "y1", "y2"}, {}};
  t.rows.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i)
    t.rows.push_back({std::to_string(i + 1), format_double(s.y1[i]), format_double(s.y2[i])});
  return to_csv(t);
}

/// Support tags follow the spec's families.
inline BivariateSeries series_from_csv(const CsvTable& t, const ModelSpec& spec) {
  const auto c1 = t.column("y1"), c2 = t.column("y2");
  BivariateSeries s;
  s.support1 = support_of(spec.family1);
  s.support2 = support_of(spec.family2);
  for (const auto& r : t.rows) {
    s.y1.push_back(parse_double(r[c1]));
    s.y2.push_back(parse_double(r[c2]));
  }
  return s;
}

inline BivariateSeries read_series(const std::filesystem::path& path, const ModelSpec& spec) {
  try {
    return series_from_csv(read_csv(path), spec);
  } catch (const IoError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw IoError(e.what(), path);
  }
}

inline void write_series(const std::filesystem::path& path, const BivariateSeries& s) {
  write_text(path, series_to_csv(s));
}

/// Several count series side by side: one column per series, optional `t`.
struct NamedSeries {
  std::vector<std::string> names;
  std::vector<std::vector<double>> values;
};

inline NamedSeries read_multi_series(const std::filesystem::path& path) {
  const auto t = read_csv(path);
  NamedSeries out;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (t.header[c] == "t") continue;
    out.names.push_back(t.header[c]);
    std::vector<double> v;
    v.reserve(t.rows.size());
    try {
      for (const auto& r : t.rows) v.push_back(parse_double(r[c]));
    } catch (const std::invalid_argument& e) {
      throw IoError(e.what(), path);
    }
    out.values.push_back(std::move(v));
  }
  return out;
}

inline std::string multi_series_to_csv(const NamedSeries& s) {
  CsvTable t;
  t.header = {"t"};
  t.header.insert(t.header.end(), s.names.begin(), s.names.end());
  const std::size_t n = s.values.empty() ? 0 : s.values.front().size();
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::string> r{std::to_string(i + 1)};
    for (const auto& v : s.values) r.push_back(format_double(v[i]));
    t.rows.push_back(std::move(r));
  }
  return to_csv(t);
}

/// Raw recording: CSV `sample,lfp,spike`; the sample rate comes from the
/// sidecar JSON `{"sample_rate": ...}`, by default `<csv>.json`.
inline RawRecording read_raw(const std::filesystem::path& csv,
                             std::optional<double> sample_rate = std::nullopt,
                             std::filesystem::path sidecar = {}) {
  const auto t = read_csv(csv);
  RawRecording rec;
  if (sample_rate) {
    rec.sample_rate = *sample_rate;
  } else {
    if (sidecar.empty()) sidecar = csv.string() + ".json";
    json j;
    try {
      j = json::parse(read_text(sidecar));
    } catch (const json::exception& e) {
      throw IoError(std::string("bad sidecar: ") + e.what(), sidecar);
    }
    if (!j.contains("sample_rate")) throw IoError("sidecar lacks sample_rate", sidecar);
    rec.sample_rate = j.at("sample_rate").get<double>();
  }
  const auto cl = t.column("lfp"), cs = t.column("spike");
  try {
    for (const auto& r : t.rows) {
      rec.lfp.push_back(parse_double(r[cl]));
      const double s = parse_double(r[cs]);
      if (s != 0 && s != 1) throw std::invalid_argument("spike column must be 0/1");
      rec.spikes.push_back(int(s));
    }
  } catch (const std::invalid_argument& e) {
    throw IoError(e.what(), csv);
  }
  return rec;
}

inline void write_raw(const std::filesystem::path& csv, const RawRecording& rec) {
  CsvTable t{{"sample", "lfp", "spike"}, {}};
  for (std::size_t i = 0; i < rec.size(); ++i)
    t.rows.push_back({std::to_string(i), format_double(rec.lfp[i]),
                      std::to_string(rec.spikes.empty() ? 0 : rec.spikes[i])});
  write_text(csv, to_csv(t));
  write_text(csv.string() + ".json", json{{"sample_rate", rec.sample_rate}}.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// spec and parameters

/// Non-finite doubles travel as strings so the JSON stays valid.
inline json number(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

inline double to_number(const json& j) {
  if (j.is_string()) return parse_double(j.get<std::string>());
  if (j.is_null()) return std::nan("");
  return j.get<double>();
}

inline json to_json(const ModelSpec& s) {
  return {{"family1", to_string(s.family1)},
          {"family2", to_string(s.family2)},
          {"link1", to_string(s.link1.link)},
          {"transform1", to_string(s.link1.transform)},
          {"link2", to_string(s.link2.link)},
          {"transform2", to_string(s.link2.transform)},
          {"coupling", to_string(s.coupling)},
          {"orders",
           {{"p", s.orders.p}, {"q", s.orders.q}, {"r", s.orders.r}, {"s", s.orders.s},
            {"k", s.orders.k}}}};
}

inline ModelSpec spec_from_json(const json& j) {
  ModelSpec s;
  auto str = [&](const char* key) { return j.at(key).get<std::string>(); };
  s.family1 = parse_family(str("family1"));
  s.family2 = parse_family(str("family2"));
  s.link1 = {parse_link(str("link1")), parse_transform(str("transform1"))};
  s.link2 = {parse_link(str("link2")), parse_transform(str("transform2"))};
  s.coupling = parse_coupling(str("coupling"));
  const auto& o = j.at("orders");
  s.orders = {.p = o.at("p").get<std::size_t>(), .q = o.at("q").get<std::size_t>(),
              .r = o.at("r").get<std::size_t>(), .s = o.at("s").get<std::size_t>(),
              .k = o.at("k").get<std::size_t>()};
  return s;
}

/// Named parameters in layout order.
inline json to_json(const ModelSpec& spec, const ParamVector& th) {
  json j = json::object();
  for (const auto& s : parameter_layout(spec)) j[s.name] = number(slot_value(th, s));
  return j;
}

/// Dispersions of fixed-dispersion families are not in the layout and keep
/// their default of 1.
inline ParamVector theta_from_json(const ModelSpec& spec, const json& j) {
  ParamVector th = zero_params(spec);
  for (const auto& s : parameter_layout(spec)) {
    if (!j.contains(s.name)) throw std::invalid_argument("theta lacks " + s.name);
    slot_ref(th, s) = to_number(j.at(s.name));
  }
  for (const auto& [key, value] : j.items())
    if (!find_slot(parameter_layout(spec), key))
      throw std::invalid_argument("unknown parameter in theta: " + key);
  return th;
}

inline json to_json(const FitResult& f) {
  json j{{"spec", to_json(f.spec)},
         {"theta_hat", to_json(f.spec, f.theta_hat)},
         {"loglik", number(f.loglik)},
         {"converged", f.converged},
         {"iterations", f.iterations}};
  const auto layout = parameter_layout(f.spec);
  if (f.std_errors) {
    json se = json::object();
    for (std::size_t i = 0; i < layout.size(); ++i)
      if (std::isfinite((*f.std_errors)[i])) se[layout[i].name] = (*f.std_errors)[i];
    j["std_errors"] = se;
  } else {
    j["std_errors"] = nullptr;
  }
  j["hessian_condition"] = f.hessian_condition ? number(*f.hessian_condition) : json(nullptr);
  json fixed = json::array();
  for (std::size_t i = 0; i < f.fixed.size() && i < layout.size(); ++i)
    if (f.fixed[i]) fixed.push_back(layout[i].name);
  j["fixed"] = fixed;
  j["warnings"] = f.warnings;
  return j;
}

inline json to_json(const TestReport& r) {
  return {{"spec", to_json(r.fit_alt.spec)},
          {"cause", r.cause},
          {"effect", r.effect},
          {"tested", r.tested},
          {"theta_hat", to_json(r.fit_alt.spec, r.fit_alt.theta_hat)},
          {"theta_hat_null", to_json(r.fit_null.spec, r.fit_null.theta_hat)},
          {"loglik", number(r.fit_alt.loglik)},
          {"loglik_null", number(r.fit_null.loglik)},
          {"lr_stat", number(r.lr_stat)},
          {"lr_raw", number(r.lr_raw)},
          {"df", r.df},
          {"p_value", number(r.p_value)},
          {"convergence_defect", r.convergence_defect},
          {"warnings", r.warnings}};
}

// ---------------------------------------------------------------------------
// posterior

/// One row per stored draw: parameters, then delta_1..k, then omega.
inline std::string posterior_to_csv(const PosteriorSamples& s) {
  CsvTable t;
  t.header = s.names;
  const std::size_t k = s.delta.empty() ? 0 : s.delta.front().size();
  for (std::size_t l = 0; l < k; ++l) t.header.push_back("delta_" + std::to_string(l + 1));
  t.header.push_back("omega");
  for (std::size_t d = 0; d < s.draws.size(); ++d) {
    std::vector<std::string> r;
    r.reserve(t.header.size());
    for (double v : s.draws[d]) r.push_back(format_double(v));
    for (int v : s.delta[d]) r.push_back(std::to_string(v));
    r.push_back(format_double(s.omega[d]));
    t.rows.push_back(std::move(r));
  }
  return to_csv(t);
}

inline json to_json(const PosteriorSummary& s, const PosteriorSamples& samples) {
  json params = json::array();
  for (const auto& p : s.params)
    params.push_back({{"name", p.name},
                      {"mean", number(p.mean)},
                      {"sd", number(p.sd)},
                      {"ci_lo", number(p.lo)},
                      {"ci_hi", number(p.hi)},
                      {"prob_negative", number(p.prob_negative)},
                      {"acceptance", number(p.acceptance)}});
  json inc = json::array();
  for (double v : s.inclusion) inc.push_back(v);
  return {{"draws", s.draws},
          {"iterations", samples.iterations},
          {"burn_in", samples.burn_in},
          {"thinning", samples.thinning},
          {"spike_slab", samples.spike_slab},
          {"params", params},
          {"inclusion", inc},
          {"omega_mean", number(s.omega_mean)},
          {"warnings", samples.diagnostics}};
}

inline std::string joint_effect_to_csv(const JointEffect& je, std::size_t first_t) {
  CsvTable t{{"t", "mean", "lo", "hi"}, {}};
  for (std::size_t i = 0; i < je.mean.size(); ++i)
    t.rows.push_back({std::to_string(first_t + i + 1), format_double(je.mean[i]),
                      format_double(je.lo[i]), format_double(je.hi[i])});
  return to_csv(t);
}

inline std::string joint_histogram_to_csv(const JointEffect& je) {
  CsvTable t{{"lo", "hi", "count"}, {}};
  for (std::size_t b = 0; b < je.histogram_counts.size(); ++b)
    t.rows.push_back({format_double(je.histogram_edges[b]), format_double(je.histogram_edges[b + 1]),
                      std::to_string(je.histogram_counts[b])});
  return to_csv(t);
}

// ---------------------------------------------------------------------------
// hashing

/// 64-bit FNV-1a, printed as 16 hex digits.
inline std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace grangerglm
