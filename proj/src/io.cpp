#include "quditcal/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace quditcal::io {

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_pulse_json(const std::filesystem::path& path, const PulseSet& pulse, const nlohmann::json& meta) {
  nlohmann::json j = meta.is_object() ? meta : nlohmann::json::object();
  j["n_slices"] = pulse.n_slices();
  j["dt"] = pulse.dt;
  j["total_time"] = pulse.total_time();
  j["amp_bound"] = pulse.amp_bound;
  j["epsilon1"] = pulse.channels[0];
  j["epsilon2"] = pulse.channels[1];
  write_text(path, j.dump(2) + "\n");
}

PulseSet read_pulse_json(const std::filesystem::path& path, nlohmann::json* meta) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
    PulseSet pulse;
    pulse.dt = j.at("dt").get<double>();
    pulse.amp_bound = j.at("amp_bound").get<double>();
    pulse.channels[0] = j.at("epsilon1").get<std::vector<double>>();
    pulse.channels[1] = j.at("epsilon2").get<std::vector<double>>();
    if (j.at("n_slices").get<int>() != pulse.n_slices()) throw ConfigError("n_slices does not match epsilon length");
    pulse.validate();
    if (meta) *meta = std::move(j);
    return pulse;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string grape_history_csv(const GrapeResult& result) {
  std::string s = "iteration,infidelity\n";
  for (std::size_t i = 0; i < result.infidelity_history.size(); ++i)
    s += std::to_string(i) + "," + format_double(result.infidelity_history[i]) + "\n";
  return s;
}

std::string noise_samples_csv(const std::vector<DeviceOffsets>& samples) {
  std::string s = "index,d_omega1,d_omega2,d_g\n";
  for (std::size_t i = 0; i < samples.size(); ++i)
    s += std::to_string(i) + "," + format_double(samples[i].d_omega1) + "," + format_double(samples[i].d_omega2) +
         "," + format_double(samples[i].d_g) + "\n";
  return s;
}

std::string noise_hist_csv(const std::array<Histogram, 3>& histograms) {
  std::string s = "parameter,bin_left,bin_right,count\n";
  for (const auto& h : histograms)
    for (std::size_t b = 0; b < h.counts.size(); ++b)
      s += h.parameter + "," + format_double(h.edges[b]) + "," + format_double(h.edges[b + 1]) + "," +
           std::to_string(h.counts[b]) + "\n";
  return s;
}

std::string noise_summary_csv(const std::array<Histogram, 3>& histograms, const std::vector<DeviceOffsets>& samples) {
  std::string s = "parameter,mean,sigma,marker_lo,marker_hi,sample_std,outside_3sigma_fraction\n";
  for (int p = 0; p < 3; ++p) {
    const auto& h = histograms[p];
    auto value = [p](const DeviceOffsets& d) { return p == 0 ? d.d_omega1 : p == 1 ? d.d_omega2 : d.d_g; };
    double sum = 0.0;
    for (const auto& d : samples) sum += value(d);
    const double n = static_cast<double>(samples.size());
    const double mean = samples.empty() ? 0.0 : sum / n;
    double sq = 0.0;
    std::size_t outside = 0;
    for (const auto& d : samples) {
      const double x = value(d);
      sq += (x - mean) * (x - mean);
      if (std::abs(x) > 3.0 * h.sigma) ++outside;
    }
    const double sd = samples.empty() ? 0.0 : std::sqrt(sq / n);
    const double frac = samples.empty() ? 0.0 : static_cast<double>(outside) / n;
    s += h.parameter + "," + format_double(h.mean) + "," + format_double(h.sigma) + "," + format_double(h.marker_lo) +
         "," + format_double(h.marker_hi) + "," + format_double(sd) + "," + format_double(frac) + "\n";
  }
  return s;
}

std::string learning_curve_csv(const LearningCurve& curve) {
  std::string s = "episode,f_rl,running_best\n";
  for (std::size_t i = 0; i < curve.size(); ++i)
    s += std::to_string(curve.episode[i]) + "," + format_double(curve.f_rl[i]) + "," +
         format_double(curve.running_best[i]) + "\n";
  return s;
}

std::string episodes_header() { return "episode,d_omega1,d_omega2,d_g,o1,o2,o3,f_oct,f_rl,reward\n"; }

std::string episode_row(std::uint64_t episode, const EpisodeRecord& r) {
  return std::to_string(episode) + "," + format_double(r.offsets.d_omega1) + "," + format_double(r.offsets.d_omega2) +
         "," + format_double(r.offsets.d_g) + "," + format_double(r.observation.o[0]) + "," +
         format_double(r.observation.o[1]) + "," + format_double(r.observation.o[2]) + "," + format_double(r.f_oct) +
         "," + format_double(r.f_rl) + "," + format_double(r.reward) + "\n";
}

std::string stats_csv(const std::vector<EnsembleStats>& stats) {
  std::string s = "method,M,seed,mean,std\n";
  for (const auto& st : stats)
    s += st.method + "," + std::to_string(st.m()) + "," + std::to_string(st.seed) + "," + format_double(st.mean) +
         "," + format_double(st.std) + "\n";
  return s;
}

std::string devices_csv(const std::vector<EnsembleStats>& stats) {
  std::string s = "method,device_index,d_omega1,d_omega2,d_g,fidelity\n";
  for (const auto& st : stats)
    for (std::size_t d = 0; d < st.fidelities.size(); ++d) {
      const DeviceOffsets off = d < st.devices.size() ? st.devices[d] : DeviceOffsets{};
      s += st.method + "," + std::to_string(d) + "," + format_double(off.d_omega1) + "," +
           format_double(off.d_omega2) + "," + format_double(off.d_g) + "," + format_double(st.fidelities[d]) + "\n";
    }
  return s;
}

std::string sweep_csv(const std::vector<SweepResult>& sweeps) {
  std::string s = "method,axis,level,M,seed,mean,std\n";
  for (const auto& sw : sweeps)
    for (std::size_t i = 0; i < sw.levels.size(); ++i) {
      const auto& st = sw.per_level[i];
      s += st.method + "," + axis_name(sw.axis) + "," + format_double(sw.levels[i]) + "," + std::to_string(st.m()) +
           "," + std::to_string(st.seed) + "," + format_double(st.mean) + "," + format_double(st.std) + "\n";
    }
  return s;
}

std::string pulse_overlay_csv(const PulseOverlay& overlay) {
  std::string s = "time,baseline";
  for (const auto& [name, values] : overlay.methods) s += "," + name;
  s += "\n";
  for (std::size_t j = 0; j < overlay.time.size(); ++j) {
    s += format_double(overlay.time[j]) + "," + format_double(overlay.baseline[j]);
    for (const auto& [name, values] : overlay.methods) s += "," + format_double(values[j]);
    s += "\n";
  }
  return s;
}

}  // namespace quditcal::io
