// Experiment configuration (JSON) and the three analysis runs behind the CLI:
// quadrature entropy profiles, Monte-Carlo estimates and fixed-point diagrams.
//
// Outputs are CSV (UTF-8, ',' separated, 17 significant digits) preceded by
// '#' comment lines carrying the tool version and a hash of the configuration.
#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "infotransfer/bifurcation.hpp"
#include "infotransfer/core.hpp"
#include "infotransfer/entropy.hpp"
#include "infotransfer/error.hpp"
#include "infotransfer/svg.hpp"
#include "infotransfer/tracker.hpp"

namespace infotransfer {

inline constexpr const char* kVersion = "0.1.0";

struct MixtureSpec {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> variances;
  friend bool operator==(const MixtureSpec&, const MixtureSpec&) = default;
};

struct ScheduleSpec {
  std::size_t steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  /// When non-empty, used verbatim instead of the linear range.
  std::vector<double> betas;
  friend bool operator==(const ScheduleSpec&, const ScheduleSpec&) = default;
};

/// A decision problem: explicit index sets or one of the named presets
/// "one-vs-one" (a, b), "one-vs-rest" (target), "group-vs-group" (threshold on means).
struct PartitionSpec {
  std::string name;
  std::string preset;  ///< empty for explicit z0/z1
  IndexSet z0;
  IndexSet z1;
  std::size_t a = 0;
  std::size_t b = 0;
  std::size_t target = 0;
  double threshold = 0.0;
  friend bool operator==(const PartitionSpec&, const PartitionSpec&) = default;
};

struct ExperimentConfig {
  MixtureSpec mixture;
  ScheduleSpec schedule;
  std::vector<PartitionSpec> partitions;
  std::string method;  ///< optional: quadrature | montecarlo | fixedpoints
  std::string out_dir = "out";
  bool svg = false;
  std::uint64_t seed = 42;
  std::size_t samples_z0 = 1000;
  std::size_t samples_z1 = 1000;
  std::size_t grid = kDefaultGridPoints;
  std::size_t stride = 1;
  std::size_t threads = 1;
  std::string complement = "exact";               ///< exact | null
  std::string exponent = "transition-variance";   ///< transition-variance | literal
  std::string drift = "own-label";                ///< own-label | z0-only
  std::string replay;                             ///< replay score CSV, optional
  double drift_coefficient = kDefaultDriftCoefficient;
  std::size_t starts = 256;
  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

namespace detail {

using nlohmann::json;

template <class T>
void read(const json& j, const char* key, T& into) {
  if (!j.contains(key)) return;
  try {
    into = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

inline void reject_unknown(const json& j, std::initializer_list<const char*> known,
                           const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || item.key() == k;
    if (!ok) throw ConfigError("unknown key '" + item.key() + "' in " + where);
  }
}

}  // namespace detail

inline nlohmann::json to_json(const ExperimentConfig& c) {
  using nlohmann::json;
  json parts = json::array();
  for (const auto& p : c.partitions) {
    json jp = {{"name", p.name}};
    if (p.preset.empty()) {
      jp["z0"] = p.z0;
      jp["z1"] = p.z1;
    } else {
      jp["preset"] = p.preset;
      if (p.preset == "one-vs-one") {
        jp["a"] = p.a;
        jp["b"] = p.b;
      } else if (p.preset == "one-vs-rest") {
        jp["target"] = p.target;
      } else {
        jp["threshold"] = p.threshold;
      }
    }
    parts.push_back(std::move(jp));
  }
  json schedule = {{"T", c.schedule.steps},
                   {"beta_start", c.schedule.beta_start},
                   {"beta_end", c.schedule.beta_end}};
  if (!c.schedule.betas.empty()) schedule["betas"] = c.schedule.betas;
  return json{
      {"mixture",
       {{"weights", c.mixture.weights}, {"means", c.mixture.means}, {"variances", c.mixture.variances}}},
      {"schedule", schedule},
      {"partitions", parts},
      {"method", c.method},
      {"output", {{"dir", c.out_dir}, {"svg", c.svg}}},
      {"seed", c.seed},
      {"samples", {{"z0", c.samples_z0}, {"z1", c.samples_z1}}},
      {"grid", c.grid},
      {"stride", c.stride},
      {"threads", c.threads},
      {"tracker",
       {{"complement", c.complement}, {"exponent", c.exponent}, {"drift", c.drift}, {"replay", c.replay}}},
      {"fixed_points", {{"drift_coefficient", c.drift_coefficient}, {"starts", c.starts}}},
  };
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  using detail::read;
  using detail::reject_unknown;
  ExperimentConfig c;
  reject_unknown(j,
                 {"mixture", "schedule", "partitions", "method", "output", "seed", "samples", "grid",
                  "stride", "threads", "tracker", "fixed_points"},
                 "config");
  if (!j.contains("mixture")) throw ConfigError("config needs a 'mixture' section");
  const auto& m = j.at("mixture");
  reject_unknown(m, {"weights", "means", "variances", "deltas"}, "mixture");
  if (m.contains("deltas")) {
    std::vector<double> locations;
    read(m, "deltas", locations);
    if (locations.empty()) throw ConfigError("mixture.deltas is empty");
    c.mixture.means = locations;
    c.mixture.weights.assign(locations.size(), 1.0 / static_cast<double>(locations.size()));
    c.mixture.variances.assign(locations.size(), 0.0);
  }
  read(m, "weights", c.mixture.weights);
  read(m, "means", c.mixture.means);
  read(m, "variances", c.mixture.variances);
  if (!m.contains("variances") && !m.contains("deltas")) {
    c.mixture.variances.assign(c.mixture.means.size(), 0.0);
  }

  if (j.contains("schedule")) {
    const auto& s = j.at("schedule");
    reject_unknown(s, {"T", "beta_start", "beta_end", "betas"}, "schedule");
    read(s, "T", c.schedule.steps);
    read(s, "beta_start", c.schedule.beta_start);
    read(s, "beta_end", c.schedule.beta_end);
    read(s, "betas", c.schedule.betas);
    if (!c.schedule.betas.empty() && !s.contains("T")) c.schedule.steps = c.schedule.betas.size();
  }

  if (j.contains("partitions")) {
    const auto& parts = j.at("partitions");
    if (!parts.is_array()) throw ConfigError("'partitions' must be an array");
    for (const auto& jp : parts) {
      reject_unknown(jp, {"name", "preset", "z0", "z1", "a", "b", "target", "threshold"}, "partition");
      PartitionSpec p;
      read(jp, "name", p.name);
      read(jp, "preset", p.preset);
      if (p.preset.empty()) {
        if (!jp.contains("z0") || !jp.contains("z1")) {
          throw ConfigError("partition without preset needs 'z0' and 'z1'");
        }
        read(jp, "z0", p.z0);
        read(jp, "z1", p.z1);
        if (p.name.empty()) {
          auto join = [](const IndexSet& s) {
            std::string out;
            for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "+" : "") + std::to_string(s[i]);
            return out;
          };
          p.name = join(p.z0) + "-vs-" + join(p.z1);
        }
      } else if (p.preset == "one-vs-one") {
        if (!jp.contains("a") || !jp.contains("b")) throw ConfigError("one-vs-one needs 'a' and 'b'");
        read(jp, "a", p.a);
        read(jp, "b", p.b);
        if (p.name.empty()) p.name = std::to_string(p.a) + "-vs-" + std::to_string(p.b);
      } else if (p.preset == "one-vs-rest") {
        if (!jp.contains("target")) throw ConfigError("one-vs-rest needs 'target'");
        read(jp, "target", p.target);
        if (p.name.empty()) p.name = std::to_string(p.target) + "-vs-rest";
      } else if (p.preset == "group-vs-group") {
        if (!jp.contains("threshold")) throw ConfigError("group-vs-group needs 'threshold'");
        read(jp, "threshold", p.threshold);
        if (p.name.empty()) {
          char buf[48];
          std::snprintf(buf, sizeof buf, "split-at-%g", p.threshold);
          p.name = buf;
        }
      } else {
        throw ConfigError("unknown partition preset '" + p.preset + "'");
      }
      c.partitions.push_back(std::move(p));
    }
  }

  read(j, "method", c.method);
  if (j.contains("output")) {
    const auto& o = j.at("output");
    reject_unknown(o, {"dir", "svg"}, "output");
    read(o, "dir", c.out_dir);
    read(o, "svg", c.svg);
  }
  read(j, "seed", c.seed);
  if (j.contains("samples")) {
    const auto& s = j.at("samples");
    if (s.is_number_unsigned()) {
      c.samples_z0 = c.samples_z1 = s.get<std::size_t>();
    } else {
      reject_unknown(s, {"z0", "z1"}, "samples");
      read(s, "z0", c.samples_z0);
      read(s, "z1", c.samples_z1);
    }
  }
  read(j, "grid", c.grid);
  read(j, "stride", c.stride);
  read(j, "threads", c.threads);
  if (j.contains("tracker")) {
    const auto& t = j.at("tracker");
    reject_unknown(t, {"complement", "exponent", "drift", "replay"}, "tracker");
    read(t, "complement", c.complement);
    read(t, "exponent", c.exponent);
    read(t, "drift", c.drift);
    read(t, "replay", c.replay);
  }
  if (j.contains("fixed_points")) {
    const auto& f = j.at("fixed_points");
    reject_unknown(f, {"drift_coefficient", "starts"}, "fixed_points");
    read(f, "drift_coefficient", c.drift_coefficient);
    read(f, "starts", c.starts);
  }
  return c;
}

inline ExperimentConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

inline std::string serialize_config(const ExperimentConfig& c) { return to_json(c).dump(2) + "\n"; }

/// FNV-1a 64 of the canonical serialization, without the output section
/// (where results go does not change them).
inline std::string config_hash(const ExperimentConfig& c) {
  auto j = to_json(c);
  j.erase("output");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct NamedPartition {
  std::string name;
  Partition partition;
};

/// Domain objects built from a config; construction validates everything.
struct Experiment {
  MixtureModel mixture;
  NoiseSchedule schedule;
  std::vector<NamedPartition> partitions;
};

inline Experiment resolve(const ExperimentConfig& c) {
  try {
    MixtureModel mixture(c.mixture.weights, c.mixture.means, c.mixture.variances);
    NoiseSchedule schedule = c.schedule.betas.empty()
                                 ? linear_schedule(c.schedule.steps, c.schedule.beta_start, c.schedule.beta_end)
                                 : NoiseSchedule(c.schedule.betas);
    if (!c.schedule.betas.empty() && c.schedule.betas.size() != c.schedule.steps) {
      throw ConfigError("schedule.T = " + std::to_string(c.schedule.steps) + " but " +
                        std::to_string(c.schedule.betas.size()) + " betas given");
    }
    std::vector<NamedPartition> parts;
    for (const auto& p : c.partitions) {
      Partition part = p.preset.empty()          ? make_partition(mixture, p.z0, p.z1)
                       : p.preset == "one-vs-one"  ? one_vs_one(mixture, p.a, p.b)
                       : p.preset == "one-vs-rest" ? one_vs_rest(mixture, p.target)
                                                   : split_at(mixture, p.threshold);
      for (const auto& seen : parts) {
        if (seen.name == p.name) throw ConfigError("duplicate partition name '" + p.name + "'");
      }
      parts.push_back({p.name, std::move(part)});
    }
    if (!c.method.empty() && c.method != "quadrature" && c.method != "montecarlo" &&
        c.method != "fixedpoints") {
      throw ConfigError("unknown method '" + c.method + "'");
    }
    if (c.complement != "exact" && c.complement != "null") {
      throw ConfigError("tracker.complement must be 'exact' or 'null'");
    }
    if (c.exponent != "transition-variance" && c.exponent != "literal") {
      throw ConfigError("tracker.exponent must be 'transition-variance' or 'literal'");
    }
    if (c.drift != "own-label" && c.drift != "z0-only") {
      throw ConfigError("tracker.drift must be 'own-label' or 'z0-only'");
    }
    if (c.samples_z0 == 0 || c.samples_z1 == 0) throw ConfigError("sample counts must be at least 1");
    if (c.grid < 64) throw ConfigError("grid must have at least 64 points");
    if (c.stride == 0 || c.stride > schedule.steps()) {
      throw ConfigError("stride must lie in 1..T");
    }
    if (c.starts < 2) throw ConfigError("fixed_points.starts must be at least 2");
    return {std::move(mixture), std::move(schedule), std::move(parts)};
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

namespace detail {

inline std::string fmt17(double v) {
  if (!std::isfinite(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string file_stem(const std::string& name) {
  std::string out;
  for (char ch : name) {
    const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') ||
                    ch == '-' || ch == '_' || ch == '+' || ch == '.';
    out += ok ? ch : '_';
  }
  return out;
}

inline std::string join_indices(std::span<const std::size_t> s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? ";" : "") + std::to_string(s[i]);
  return out;
}

inline std::string preamble(const ExperimentConfig& c) {
  return std::string("# infotransfer ") + kVersion + "\n# config-hash fnv1a64:" + config_hash(c) + "\n";
}

inline std::string partition_comment(const NamedPartition& p) {
  return "# partition " + p.name + " z0=" + join_indices(p.partition.z0()) +
         " z1=" + join_indices(p.partition.z1()) + " prior_z0=" + fmt17(p.partition.prior_z0()) + "\n";
}

inline void require_method(const ExperimentConfig& c, const char* method) {
  if (!c.method.empty() && c.method != method) {
    throw ConfigError("config method '" + c.method + "' does not match '" + method + "'");
  }
}

inline void require_partitions(const Experiment& e) {
  if (e.partitions.empty()) throw ConfigError("config defines no partitions");
}

}  // namespace detail

/// Writes `content` to `path` through a temporary file and rename.
inline void write_atomically(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw OutputError("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw OutputError("failed writing '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw OutputError("cannot move output into '" + path.string() + "'");
  }
}

/// Profile CSV body: t,s,H_bits,dH_ds,transfer_bits.
inline std::string profile_csv(const ExperimentConfig& c, const NamedPartition& p,
                               const EntropyProfile& profile) {
  std::string out = detail::preamble(c) + detail::partition_comment(p);
  out += "t,s,H_bits,dH_ds,transfer_bits\n";
  for (std::size_t i = 0; i < profile.times.size(); ++i) {
    out += std::to_string(profile.times.step(i)) + "," + detail::fmt17(profile.times.s(i)) + "," +
           detail::fmt17(profile.H_bits[i]) + "," + detail::fmt17(profile.rate_bits[i]) + "," +
           detail::fmt17(profile.transfer_bits[i]) + "\n";
  }
  return out;
}

/// MC CSV body: t,s,H_bits,H_z0_mean,H_z1_mean,N_z0,N_z1,seed, rows t = T..0.
inline std::string estimate_csv(const ExperimentConfig& c, const NamedPartition& p,
                                const McEntropyEstimate& est, std::size_t steps) {
  std::string out = detail::preamble(c) + detail::partition_comment(p);
  out += "t,s,H_bits,H_z0_mean,H_z1_mean,N_z0,N_z1,seed\n";
  const std::string tail = "," + std::to_string(est.N_z0) + "," + std::to_string(est.N_z1) + "," +
                           std::to_string(est.seed) + "\n";
  for (std::size_t t = steps + 1; t-- > 0;) {
    out += std::to_string(t) + "," + detail::fmt17(static_cast<double>(t) / static_cast<double>(steps)) +
           "," + detail::fmt17(est.H_bits[t]) + "," + detail::fmt17(est.H_z0_mean[t]) + "," +
           detail::fmt17(est.H_z1_mean[t]) + tail;
  }
  return out;
}

/// Diagram CSV body: s,alpha_bar,x_star,stability.
inline std::string fixed_points_csv(const ExperimentConfig& c, const BifurcationDiagram& d) {
  std::string out = detail::preamble(c);
  out += "s,alpha_bar,x_star,stability\n";
  for (const auto& level : d.levels) {
    for (const auto& p : level.points) {
      out += detail::fmt17(level.s) + "," + detail::fmt17(level.alpha_bar) + "," +
             detail::fmt17(static_cast<double>(p.x_star)) + "," + to_string(p.stability) + "\n";
    }
  }
  return out;
}

inline std::string critical_levels_csv(const ExperimentConfig& c, const BifurcationDiagram& d) {
  std::string out = detail::preamble(c);
  out += "t_low_noise,t_high_noise,s,count_low_noise,count_high_noise\n";
  for (const auto& k : d.critical) {
    out += std::to_string(k.t_low_noise) + "," + std::to_string(k.t_high_noise) + "," +
           detail::fmt17(k.s) + "," + std::to_string(k.count_low_noise) + "," +
           std::to_string(k.count_high_noise) + "\n";
  }
  return out;
}

struct RunResult {
  std::vector<std::filesystem::path> files;
};

inline RunResult run_profile(const ExperimentConfig& c) {
  detail::require_method(c, "quadrature");
  const Experiment e = resolve(c);
  detail::require_partitions(e);
  const std::filesystem::path dir(c.out_dir);
  RunResult result;
  std::vector<svg::Series> curves;
  for (const auto& p : e.partitions) {
    const auto profile = entropy_profile(e.mixture, p.partition, e.schedule, {c.stride, c.grid});
    const auto path = dir / ("profile_" + detail::file_stem(p.name) + ".csv");
    write_atomically(path, profile_csv(c, p, profile));
    result.files.push_back(path);
    svg::Series s{p.name, {}, profile.rate_bits};
    for (std::size_t i = 0; i < profile.times.size(); ++i) s.x.push_back(profile.times.s(i));
    curves.push_back(std::move(s));
  }
  if (c.svg) {
    const auto path = dir / "profile.svg";
    write_atomically(path, svg::line_chart(curves, "entropy rate dH/ds", "normalized time s", "bits per unit s"));
    result.files.push_back(path);
  }
  return result;
}

/// Score model for a partition: the replay file when configured, else the exact GMM.
inline std::unique_ptr<ScoreModel> make_score_model(const ExperimentConfig& c, const Experiment& e,
                                                    const Partition& partition) {
  if (!c.replay.empty()) {
    return std::make_unique<ReplayScoreModel>(ReplayScoreModel::load_file(c.replay));
  }
  return std::make_unique<GmmScoreModel>(e.mixture, partition, e.schedule,
                                         c.complement == "null" ? Complement::null : Complement::exact);
}

inline TrackerOptions tracker_options(const ExperimentConfig& c) {
  TrackerOptions o;
  o.exponent = c.exponent == "literal" ? ExponentScale::literal : ExponentScale::transition_variance;
  o.drift = c.drift == "z0-only" ? BranchDrift::z0_only : BranchDrift::own_label;
  o.threads = c.threads;
  return o;
}

inline RunResult run_estimate(const ExperimentConfig& c) {
  detail::require_method(c, "montecarlo");
  const Experiment e = resolve(c);
  detail::require_partitions(e);
  const std::filesystem::path dir(c.out_dir);
  RunResult result;
  for (const auto& p : e.partitions) {
    const auto model = make_score_model(c, e, p.partition);
    const auto est = estimate_conditional_entropy(*model, e.schedule, p.partition.prior_z0(), c.samples_z0,
                                                  c.samples_z1, c.seed, tracker_options(c));
    const auto path = dir / ("estimate_" + detail::file_stem(p.name) + ".csv");
    write_atomically(path, estimate_csv(c, p, est, e.schedule.steps()));
    result.files.push_back(path);
  }
  return result;
}

inline RunResult run_fixed_points(const ExperimentConfig& c) {
  detail::require_method(c, "fixedpoints");
  const Experiment e = resolve(c);
  FixedPointOptions options;
  options.drift_coefficient = c.drift_coefficient;
  options.n_starts = c.starts;
  const auto diagram = trace_bifurcations(e.mixture, e.schedule, c.stride, options);
  const std::filesystem::path dir(c.out_dir);
  RunResult result;
  write_atomically(dir / "fixed_points.csv", fixed_points_csv(c, diagram));
  result.files.push_back(dir / "fixed_points.csv");
  write_atomically(dir / "critical_levels.csv", critical_levels_csv(c, diagram));
  result.files.push_back(dir / "critical_levels.csv");
  if (c.svg) {
    std::vector<svg::Marker> markers;
    for (const auto& level : diagram.levels) {
      for (const auto& p : level.points) {
        markers.push_back({level.s, static_cast<double>(p.x_star), p.stability == Stability::stable});
      }
    }
    const auto path = dir / "fixed_points.svg";
    write_atomically(path, svg::scatter_chart(markers, "fixed points of the reverse drift",
                                              "normalized time s", "x*"));
    result.files.push_back(path);
  }
  return result;
}

}  // namespace infotransfer
