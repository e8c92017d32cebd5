#pragma once

// Panel ingestion, pseudo-observations, synthetic panels, run configuration
// and the CSV/JSON artifacts written by the command-line tool.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "rotamix/assessment.hpp"
#include "rotamix/mixture.hpp"
#include "rotamix/point_set.hpp"
#include "rotamix/prior.hpp"
#include "rotamix/random.hpp"
#include "rotamix/rotation.hpp"
#include "rotamix/sampler.hpp"

#ifndef ROTAMIX_VERSION
#define ROTAMIX_VERSION "0.1.0"
#endif

namespace rotamix {

inline constexpr const char* kVersion = ROTAMIX_VERSION;

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

inline std::optional<double> parse_double(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

inline std::optional<long long> parse_int(std::string_view s) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

/// Shortest round-trip text is not needed; %.17g is exact for doubles.
inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

}  // namespace detail

/// Rows of (time label, unit id, m measurements) as read from disk.
struct RawPanel {
  int m = 0;
  bool pseudo_observations = false;  // header used u1..um
  std::vector<long long> time;
  std::vector<std::string> id;
  std::vector<double> values;  // row-major

  std::size_t rows() const { return time.size(); }
  double value(std::size_t row, int l) const { return values[row * static_cast<std::size_t>(m) + static_cast<std::size_t>(l)]; }
};

/// Parses `t,id,x1..xm` (raw) or `t,id,u1..um` (pseudo-observations).
inline RawPanel read_raw_panel(std::istream& in, const std::string& source = "input") {
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& msg) { throw CsvError(source + ":" + std::to_string(line_no) + ": " + msg); };
  RawPanel raw;
  while (std::getline(in, line)) {
    ++line_no;
    if (!detail::trim(line).empty()) break;
  }
  if (line_no == 0 || detail::trim(line).empty()) throw CsvError(source + ": empty file");
  std::vector<std::string> header;
  for (auto f : detail::split_csv(line)) header.emplace_back(f);
  if (header.size() < 3 || header[0] != "t" || header[1] != "id") {
    fail("header must start with t,id followed by x1..xm or u1..um");
  }
  raw.m = static_cast<int>(header.size()) - 2;
  const char prefix = header[2].empty() ? '\0' : header[2][0];
  if (prefix != 'x' && prefix != 'u') fail("measurement columns must be named x1..xm or u1..um");
  raw.pseudo_observations = prefix == 'u';
  for (int l = 0; l < raw.m; ++l) {
    const std::string expected = std::string(1, prefix) + std::to_string(l + 1);
    if (header[static_cast<std::size_t>(l) + 2] != expected) {
      fail("missing column " + expected + " (found '" + std::string(header[static_cast<std::size_t>(l) + 2]) + "')");
    }
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv(line);
    if (fields.size() != header.size()) {
      fail("expected " + std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()));
    }
    const auto t = detail::parse_int(fields[0]);
    if (!t) fail("time '" + std::string(fields[0]) + "' is not an integer");
    raw.time.push_back(*t);
    raw.id.emplace_back(fields[1]);
    for (int l = 0; l < raw.m; ++l) {
      const auto v = detail::parse_double(fields[static_cast<std::size_t>(l) + 2]);
      if (!v || !std::isfinite(*v)) {
        fail("column " + std::string(header[static_cast<std::size_t>(l) + 2]) + " value '" +
             std::string(fields[static_cast<std::size_t>(l) + 2]) + "' is not a finite number");
      }
      raw.values.push_back(*v);
    }
  }
  if (raw.rows() == 0) throw CsvError(source + ": no data rows");
  return raw;
}

inline RawPanel read_raw_panel(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  return read_raw_panel(in, path.string());
}

/// Sorted distinct time labels; label k maps to 0-based time k.
inline std::vector<long long> time_labels(const RawPanel& raw) {
  std::vector<long long> labels = raw.time;
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  return labels;
}

namespace detail {

// Average ranks / (n + 1) of the selected rows of one variable.
inline void rank_rows(const RawPanel& raw, int l, const std::vector<std::size_t>& rows, std::vector<double>& out) {
  const std::size_t n = rows.size();
  std::vector<std::size_t> order(n);
  for (std::size_t k = 0; k < n; ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return raw.value(rows[a], l) < raw.value(rows[b], l); });
  if (n < 2 || raw.value(rows[order.front()], l) == raw.value(rows[order.back()], l)) {
    throw std::invalid_argument("rank_transform: variable x" + std::to_string(l + 1) +
                                " has fewer than two distinct values");
  }
  std::size_t k = 0;
  while (k < n) {
    std::size_t e = k;
    while (e + 1 < n && raw.value(rows[order[e + 1]], l) == raw.value(rows[order[k]], l)) ++e;
    const double avg_rank = 0.5 * static_cast<double>(k + e) + 1.0;
    for (std::size_t q = k; q <= e; ++q) {
      out[rows[order[q]] * static_cast<std::size_t>(raw.m) + static_cast<std::size_t>(l)] =
          avg_rank / static_cast<double>(n + 1);
    }
    k = e + 1;
  }
}

inline PanelData group_by_time(const RawPanel& raw, const std::vector<double>& values) {
  const std::vector<long long> labels = time_labels(raw);
  PanelData panel{raw.m, std::vector<PointSet>(labels.size(), PointSet(raw.m))};
  for (std::size_t r = 0; r < raw.rows(); ++r) {
    const auto t = static_cast<std::size_t>(std::lower_bound(labels.begin(), labels.end(), raw.time[r]) - labels.begin());
    panel.slices[t].push_back(std::span<const double>(values.data() + r * static_cast<std::size_t>(raw.m),
                                                      static_cast<std::size_t>(raw.m)));
  }
  return panel;
}

}  // namespace detail

enum class RankScope { global, per_time };

inline RankScope parse_rank_scope(const std::string& s) {
  if (s == "global") return RankScope::global;
  if (s == "per-time" || s == "per_time") return RankScope::per_time;
  throw std::invalid_argument("unknown rank scope '" + s + "' (expected global or per-time)");
}

/// Pseudo-observations rank / (n + 1) per variable, ties sharing their average
/// rank, ranked over all rows or within each time.
inline PanelData rank_transform(const RawPanel& raw, RankScope scope = RankScope::global) {
  if (raw.rows() == 0) throw std::invalid_argument("rank_transform: empty panel");
  std::vector<double> out(raw.values.size());
  std::vector<std::vector<std::size_t>> groups;
  if (scope == RankScope::global) {
    groups.emplace_back(raw.rows());
    for (std::size_t r = 0; r < raw.rows(); ++r) groups[0][r] = r;
  } else {
    const std::vector<long long> labels = time_labels(raw);
    groups.resize(labels.size());
    for (std::size_t r = 0; r < raw.rows(); ++r) {
      const auto t = std::lower_bound(labels.begin(), labels.end(), raw.time[r]) - labels.begin();
      groups[static_cast<std::size_t>(t)].push_back(r);
    }
  }
  for (const auto& rows : groups) {
    for (int l = 0; l < raw.m; ++l) detail::rank_rows(raw, l, rows, out);
  }
  return detail::group_by_time(raw, out);
}

/// Panel from rows that are already pseudo-observations (validated interior).
inline PanelData panel_from_raw(const RawPanel& raw) {
  PanelData panel = detail::group_by_time(raw, raw.values);
  panel.validate();
  return panel;
}

inline void write_panel_csv(const PanelData& panel, std::ostream& out) {
  out << "t,id";
  for (int l = 0; l < panel.m; ++l) out << ",u" << l + 1;
  out << '\n';
  for (int t = 0; t < panel.horizon(); ++t) {
    const auto& s = panel.slices[static_cast<std::size_t>(t)];
    for (std::size_t i = 0; i < s.size(); ++i) {
      out << t + 1 << ',' << i + 1;
      for (double v : s.row(i)) out << ',' << detail::fmt(v);
      out << '\n';
    }
  }
}

inline void write_panel_csv(const PanelData& panel, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  write_panel_csv(panel, out);
}

inline PanelData read_panel_csv(const std::filesystem::path& path) { return panel_from_raw(read_raw_panel(path)); }

/// Mixture parameters per time of the reference simulation design:
/// theta = (5, 3, 4, 3) throughout, pi_1 = (0.4, 0.25, 0.25, 0.1), then
/// pi_{t,00} = 0.95 pi_{t-1,00}, pi_{t,10} = 1.05 pi_{t-1,10}, pi_{t,11} = 0.1
/// and pi_{t,01} the remainder.
inline std::vector<MixtureParams> simulation_study_truth(int horizon) {
  if (horizon < 1) throw std::invalid_argument("simulation_study_truth: horizon must be >= 1");
  std::vector<MixtureParams> out;
  std::vector<double> pi{0.4, 0.25, 0.25, 0.1};
  for (int t = 0; t < horizon; ++t) {
    if (t > 0) {
      pi[0] *= 0.95;
      pi[1] *= 1.05;
      pi[3] = 0.1;
      pi[2] = 1.0 - pi[0] - pi[1] - pi[3];
    }
    out.push_back({2, pi, {5.0, 3.0, 4.0, 3.0}});
  }
  return out;
}

struct SimulatedPanel {
  PanelData data;
  std::vector<MixtureParams> truth;
};

/// n_t points per time from the given per-time mixtures, reproducible from `seed`.
inline SimulatedPanel simulate_panel(const std::vector<MixtureParams>& truth, const std::vector<std::size_t>& n_t,
                                     std::uint64_t seed) {
  if (truth.empty()) throw std::invalid_argument("simulate_panel: empty truth");
  if (n_t.size() != truth.size()) throw std::invalid_argument("simulate_panel: need one sample size per time");
  Rng rng(seed);
  SimulatedPanel out{{truth.front().m, {}}, truth};
  for (std::size_t t = 0; t < truth.size(); ++t) {
    try {
      truth[t].validate();
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("simulate_panel: invalid mixture at time " + std::to_string(t + 1) + ": " + e.what());
    }
    if (truth[t].m != out.data.m) throw std::invalid_argument("simulate_panel: inconsistent dimension");
    out.data.slices.push_back(sample_mixture(truth[t], n_t[t], rng).points);
  }
  return out;
}

inline SimulatedPanel simulate_panel(const std::vector<MixtureParams>& truth, std::size_t n_t, std::uint64_t seed) {
  return simulate_panel(truth, std::vector<std::size_t>(truth.size(), n_t), seed);
}

inline void write_truth_csv(const std::vector<MixtureParams>& truth, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << "t,component,pi,theta\n";
  for (std::size_t t = 0; t < truth.size(); ++t) {
    for (int j = 0; j < truth[t].components(); ++j) {
      out << t + 1 << ',' << RotationIndex(truth[t].m, static_cast<unsigned>(j)).to_string() << ','
          << detail::fmt(truth[t].weights[static_cast<std::size_t>(j)]) << ','
          << detail::fmt(truth[t].thetas[static_cast<std::size_t>(j)]) << '\n';
    }
  }
}

/// Everything needed to reproduce a run. Field names double as JSON keys and
/// command-line flag names.
struct RunConfig {
  int m = 2;
  int T = 0;  // 0: take the horizon from the data
  // prior
  double a0 = 1.0;
  std::vector<double> p_vec;  // empty: uniform
  int at = 0;
  int q = 0;
  int p = 0;
  int s = 1;
  // hyper
  double d = 1.0;
  double e = 1.0;
  double g = 1.0;
  // mcmc
  int iterations = 7000;
  int burn_in = 3000;
  std::uint64_t seed = 1;
  double theta_min = 1e-4;
  double theta_max = 50.0;
  int batch_size = 50;
  int chains = 1;
  // io
  std::string input;
  std::string output = "rotamix_out";
  bool rank_transform = false;
  std::string rank_scope = "global";
  std::vector<std::string> mask;  // active rotations as bit strings; empty: all
  // simulate / predict / assess
  int n = 100;
  int train_per_time = 0;
  int lps_start = 0;
  int thin = 200;

  std::string model_label() const { return rotamix::model_label(at, q, p); }

  PriorConfig prior(int horizon) const {
    PriorConfig cfg = PriorConfig::standard(m, horizon, at);
    cfg.a0 = a0;
    if (!p_vec.empty()) cfg.p = p_vec;
    std::fill(cfg.d.begin(), cfg.d.end(), d);
    std::fill(cfg.e.begin(), cfg.e.end(), e);
    std::fill(cfg.g.begin(), cfg.g.end(), g);
    if (!mask.empty()) {
      cfg.mask.assign(static_cast<std::size_t>(cfg.components()), false);
      for (const auto& bits : mask) {
        const RotationIndex j = RotationIndex::parse(bits);
        if (j.dim() != m) throw std::invalid_argument("mask entry '" + bits + "' does not have m bits");
        cfg.mask[j.code()] = true;
      }
    }
    cfg.validate();
    return cfg;
  }

  LagStructure lags(int horizon) const { return LagStructure::build(horizon, q, p, s); }

  McmcConfig mcmc() const {
    McmcConfig cfg;
    cfg.iterations = iterations;
    cfg.burn_in = burn_in;
    cfg.batch_size = batch_size;
    cfg.seed = seed;
    cfg.chains = chains;
    cfg.theta_bounds = {theta_min, theta_max};
    cfg.validate();
    return cfg;
  }
};

inline nlohmann::json to_json(const RunConfig& c) {
  using nlohmann::json;
  return json{{"m", c.m},
              {"T", c.T},
              {"prior", {{"a0", c.a0}, {"p_vec", c.p_vec}, {"at", c.at}, {"q", c.q}, {"p", c.p}, {"s", c.s}}},
              {"hyper", {{"d", c.d}, {"e", c.e}, {"g", c.g}}},
              {"mcmc",
               {{"iterations", c.iterations},
                {"burn_in", c.burn_in},
                {"seed", c.seed},
                {"theta_min", c.theta_min},
                {"theta_max", c.theta_max},
                {"batch_size", c.batch_size},
                {"chains", c.chains}}},
              {"io",
               {{"input", c.input},
                {"output", c.output},
                {"rank_transform", c.rank_transform},
                {"rank_scope", c.rank_scope},
                {"mask", c.mask}}},
              {"simulate", {{"n", c.n}}},
              {"predict", {{"train_per_time", c.train_per_time}, {"thin", c.thin}}},
              {"assess", {{"lps_start", c.lps_start}}}};
}

/// Fields present in `j` override those in `base`; unknown keys are ignored.
inline RunConfig from_json(const nlohmann::json& j, RunConfig base = {}) {
  auto take = [](const nlohmann::json& obj, const char* key, auto& field) {
    if (obj.is_object() && obj.contains(key) && !obj.at(key).is_null()) {
      obj.at(key).get_to(field);
    }
  };
  auto section = [&](const char* key) { return j.contains(key) ? j.at(key) : nlohmann::json::object(); };
  take(j, "m", base.m);
  take(j, "T", base.T);
  const auto prior = section("prior");
  take(prior, "a0", base.a0);
  take(prior, "p_vec", base.p_vec);
  take(prior, "at", base.at);
  take(prior, "q", base.q);
  take(prior, "p", base.p);
  take(prior, "s", base.s);
  const auto hyper = section("hyper");
  take(hyper, "d", base.d);
  take(hyper, "e", base.e);
  take(hyper, "g", base.g);
  const auto mcmc = section("mcmc");
  take(mcmc, "iterations", base.iterations);
  take(mcmc, "burn_in", base.burn_in);
  take(mcmc, "seed", base.seed);
  take(mcmc, "theta_min", base.theta_min);
  take(mcmc, "theta_max", base.theta_max);
  take(mcmc, "batch_size", base.batch_size);
  take(mcmc, "chains", base.chains);
  const auto io = section("io");
  take(io, "input", base.input);
  take(io, "output", base.output);
  take(io, "rank_transform", base.rank_transform);
  take(io, "rank_scope", base.rank_scope);
  take(io, "mask", base.mask);
  take(section("simulate"), "n", base.n);
  const auto predict = section("predict");
  take(predict, "train_per_time", base.train_per_time);
  take(predict, "thin", base.thin);
  take(section("assess"), "lps_start", base.lps_start);
  return base;
}

inline RunConfig read_run_config(const std::filesystem::path& path, RunConfig base = {}) {
  auto in = detail::open_input(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  // a manifest carries the configuration under "config"
  if (j.contains("config") && j.contains("version")) return from_json(j.at("config"), std::move(base));
  return from_json(j, std::move(base));
}

/// FNV-1a of the canonical configuration JSON, as 16 hex digits.
inline std::string config_hash(const RunConfig& c) {
  const std::string text = to_json(c).dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline void write_manifest(const RunConfig& c, const std::string& command, const std::filesystem::path& path) {
  nlohmann::json j = {{"command", command},
                      {"version", kVersion},
                      {"config_hash", config_hash(c)},
                      {"seed", c.seed},
                      {"config", to_json(c)}};
  auto out = detail::open_output(path);
  out << j.dump(2) << '\n';
}

/// Configuration stored in a manifest written by write_manifest.
inline RunConfig read_manifest(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  nlohmann::json j;
  in >> j;
  if (!j.contains("config")) throw std::runtime_error(path.string() + ": not a manifest");
  return from_json(j.at("config"));
}

// Draw tables.

inline void write_draws(const PosteriorDraws& draws, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> labels;
  for (int j = 0; j < draws.components; ++j) labels.push_back(RotationIndex(draws.m, static_cast<unsigned>(j)).to_string());
  {
    auto out = detail::open_output(dir / "draws.csv");
    out << "iteration,chain,t,component,pi,theta\n";
    for (std::size_t r = 0; r < draws.size(); ++r) {
      for (int t = 0; t < draws.horizon; ++t) {
        const auto pi = draws.pi(r, t);
        const auto th = draws.theta(r, t);
        for (std::size_t j = 0; j < labels.size(); ++j) {
          out << draws.iteration[r] << ',' << draws.chain[r] << ',' << t + 1 << ',' << labels[j] << ','
              << detail::fmt(pi[j]) << ',' << detail::fmt(th[j]) << '\n';
        }
      }
    }
  }
  {
    auto out = detail::open_output(dir / "eta.csv");
    out << "iteration,chain,t,component,eta\n";
    for (std::size_t r = 0; r < draws.size(); ++r) {
      for (int t = 0; t < draws.horizon; ++t) {
        const auto eta = draws.eta_at(r, t);
        for (std::size_t j = 0; j < labels.size(); ++j) {
          out << draws.iteration[r] << ',' << draws.chain[r] << ',' << t + 1 << ',' << labels[j] << ',' << eta[j]
              << '\n';
        }
      }
    }
  }
  {
    auto betas = detail::open_output(dir / "betas.csv");
    auto omega = detail::open_output(dir / "omega.csv");
    betas << "iteration,chain,component,beta\n";
    omega << "iteration,chain,component,omega\n";
    for (std::size_t r = 0; r < draws.size(); ++r) {
      const auto b = draws.beta(r);
      const auto w = draws.omega_at(r);
      for (std::size_t j = 0; j < labels.size(); ++j) {
        betas << draws.iteration[r] << ',' << draws.chain[r] << ',' << labels[j] << ',' << detail::fmt(b[j]) << '\n';
        omega << draws.iteration[r] << ',' << draws.chain[r] << ',' << labels[j] << ',' << detail::fmt(w[j]) << '\n';
      }
    }
  }
  std::map<int, std::vector<const BatchDiagnostic*>> by_chain;
  for (const auto& d : draws.diagnostics) by_chain[d.chain].push_back(&d);
  if (by_chain.empty()) by_chain[0];
  for (const auto& [chain, rows] : by_chain) {
    const std::string name = chain == 0 ? "diagnostics.csv" : "diagnostics.chain" + std::to_string(chain) + ".csv";
    auto out = detail::open_output(dir / name);
    out << "batch,kappa,acceptance_rate\n";
    for (const auto* d : rows) out << d->batch << ',' << detail::fmt(d->kappa) << ',' << detail::fmt(d->acceptance_rate) << '\n';
  }
}

namespace detail {

// Reads a draw table, calling fn(fields, line_no) for each data row.
inline void for_each_row(const std::filesystem::path& path, std::size_t columns,
                         const std::function<void(const std::vector<std::string_view>&, std::size_t)>& fn) {
  auto in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    const auto fields = split_csv(line);
    if (fields.size() != columns) {
      throw CsvError(path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(columns) +
                     " fields");
    }
    fn(fields, line_no);
  }
}

inline long long need_int(std::string_view s, const std::filesystem::path& path, std::size_t line) {
  const auto v = parse_int(s);
  if (!v) throw CsvError(path.string() + ":" + std::to_string(line) + ": bad integer '" + std::string(s) + "'");
  return *v;
}

inline double need_double(std::string_view s, const std::filesystem::path& path, std::size_t line) {
  const auto v = parse_double(s);
  if (!v) throw CsvError(path.string() + ":" + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  return *v;
}

}  // namespace detail

/// Reassembles draws written by write_draws (diagnostics are not read back).
inline PosteriorDraws read_draws(const std::filesystem::path& dir) {
  PosteriorDraws draws;
  std::map<std::pair<int, int>, std::size_t> index;  // (chain, iteration) -> r
  struct Cell {
    std::size_t r;
    int t;
    unsigned j;
    double pi;
    double theta;
  };
  std::vector<Cell> cells;
  const auto path = dir / "draws.csv";
  detail::for_each_row(path, 6, [&](const auto& f, std::size_t line) {
    const int it = static_cast<int>(detail::need_int(f[0], path, line));
    const int ch = static_cast<int>(detail::need_int(f[1], path, line));
    const int t = static_cast<int>(detail::need_int(f[2], path, line));
    const RotationIndex j = RotationIndex::parse(std::string(f[3]));
    if (draws.components == 0) {
      draws.m = j.dim();
      draws.components = component_count(j.dim());
    } else if (j.dim() != draws.m) {
      throw CsvError(path.string() + ":" + std::to_string(line) + ": inconsistent component length");
    }
    auto [pos, inserted] = index.try_emplace({ch, it}, draws.iteration.size());
    if (inserted) {
      draws.iteration.push_back(it);
      draws.chain.push_back(ch);
    }
    draws.horizon = std::max(draws.horizon, t);
    cells.push_back({pos->second, t - 1, j.code(), detail::need_double(f[4], path, line),
                     detail::need_double(f[5], path, line)});
  });
  if (draws.size() == 0) throw CsvError(path.string() + ": no draws");
  const std::size_t per_draw = static_cast<std::size_t>(draws.horizon * draws.components);
  draws.pis.assign(draws.size() * per_draw, 0.0);
  draws.thetas.assign(draws.size() * per_draw, 0.0);
  draws.eta.assign(draws.size() * per_draw, 0);
  draws.omega.assign(draws.size() * static_cast<std::size_t>(draws.components), 0.0);
  draws.betas.assign(draws.size() * static_cast<std::size_t>(draws.components), 0.0);
  for (const auto& c : cells) {
    if (c.t < 0) throw CsvError(path.string() + ": time indices must start at 1");
    draws.pis[draws.slot(c.r, c.t) + c.j] = c.pi;
    draws.thetas[draws.slot(c.r, c.t) + c.j] = c.theta;
  }
  auto lookup = [&](int ch, int it, const std::filesystem::path& p, std::size_t line) {
    const auto found = index.find({ch, it});
    if (found == index.end()) throw CsvError(p.string() + ":" + std::to_string(line) + ": unknown draw");
    return found->second;
  };
  if (std::filesystem::exists(dir / "eta.csv")) {
    const auto p = dir / "eta.csv";
    detail::for_each_row(p, 5, [&](const auto& f, std::size_t line) {
      const std::size_t r = lookup(static_cast<int>(detail::need_int(f[1], p, line)),
                                   static_cast<int>(detail::need_int(f[0], p, line)), p, line);
      const int t = static_cast<int>(detail::need_int(f[2], p, line)) - 1;
      draws.eta[draws.slot(r, t) + RotationIndex::parse(std::string(f[3])).code()] =
          static_cast<int>(detail::need_int(f[4], p, line));
    });
  }
  for (const auto& [file, target] : {std::pair{"betas.csv", &draws.betas}, std::pair{"omega.csv", &draws.omega}}) {
    const auto p = dir / file;
    if (!std::filesystem::exists(p)) continue;
    detail::for_each_row(p, 4, [&, target = target](const auto& f, std::size_t line) {
      const std::size_t r = lookup(static_cast<int>(detail::need_int(f[1], p, line)),
                                   static_cast<int>(detail::need_int(f[0], p, line)), p, line);
      (*target)[r * static_cast<std::size_t>(draws.components) + RotationIndex::parse(std::string(f[2])).code()] =
          detail::need_double(f[3], p, line);
    });
  }
  return draws;
}

inline void write_summary_csv(const std::vector<SummaryRow>& rows, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << "t,component,statistic,mean,q025,q975\n";
  for (const auto& r : rows) {
    out << r.t << ',' << r.component << ',' << r.statistic << ',' << detail::fmt(r.mean) << ','
        << detail::fmt(r.q025) << ',' << detail::fmt(r.q975) << '\n';
  }
}

inline void write_density_grids_csv(const std::vector<DensityGrid>& grids, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << "t,pair,x,y,value\n";
  for (const auto& g : grids) {
    const std::string pair = std::to_string(g.first + 1) + "-" + std::to_string(g.second + 1);
    for (int ix = 0; ix < g.grid_n; ++ix) {
      for (int iy = 0; iy < g.grid_n; ++iy) {
        out << g.t << ',' << pair << ',' << detail::fmt(g.coords[static_cast<std::size_t>(ix)]) << ','
            << detail::fmt(g.coords[static_cast<std::size_t>(iy)]) << ',' << detail::fmt(g.at(ix, iy)) << '\n';
      }
    }
  }
}

inline nlohmann::json to_json(const GofReport& r) {
  nlohmann::json lps = nlohmann::json::array();
  for (const auto& e : r.lps) lps.push_back({{"t", e.t}, {"value", e.value}});
  nlohmann::json j = {{"model", r.model}, {"lpml", r.lpml}, {"waic", r.waic}, {"lps", lps}};
  j["mse"] = r.mse ? nlohmann::json(*r.mse) : nlohmann::json(nullptr);
  return j;
}

inline void write_gof_json(const GofReport& r, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << to_json(r).dump(2) << '\n';
}

}  // namespace rotamix
