#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "quditcal/ensemble.hpp"
#include "quditcal/evaluation.hpp"
#include "quditcal/grape.hpp"
#include "quditcal/training.hpp"

namespace quditcal::io {

/// Shortest round-tripping text for a double ("%.17g").
std::string format_double(double value);

/// Writes `content` to `path`, creating parent directories. Throws std::runtime_error on failure.
void write_text(const std::filesystem::path& path, const std::string& content);
std::string read_text(const std::filesystem::path& path);

// oct_pulse.json: {"n_slices", "dt", "total_time", "amp_bound", "epsilon1", "epsilon2", ...meta}
void write_pulse_json(const std::filesystem::path& path, const PulseSet& pulse,
                      const nlohmann::json& meta = nlohmann::json::object());
PulseSet read_pulse_json(const std::filesystem::path& path, nlohmann::json* meta = nullptr);

// iteration,infidelity
std::string grape_history_csv(const GrapeResult& result);
// index,d_omega1,d_omega2,d_g
std::string noise_samples_csv(const std::vector<DeviceOffsets>& samples);
// parameter,bin_left,bin_right,count
std::string noise_hist_csv(const std::array<Histogram, 3>& histograms);
// parameter,mean,sigma,marker_lo,marker_hi,sample_std,outside_3sigma_fraction
std::string noise_summary_csv(const std::array<Histogram, 3>& histograms, const std::vector<DeviceOffsets>& samples);
// episode,f_rl,running_best
std::string learning_curve_csv(const LearningCurve& curve);
// episode,d_omega1,d_omega2,d_g,o1,o2,o3,f_oct,f_rl,reward
std::string episodes_header();
std::string episode_row(std::uint64_t episode, const EpisodeRecord& rec);
// method,M,seed,mean,std (std is the population standard deviation)
std::string stats_csv(const std::vector<EnsembleStats>& stats);
// method,device_index,d_omega1,d_omega2,d_g,fidelity
std::string devices_csv(const std::vector<EnsembleStats>& stats);
// method,axis,level,M,seed,mean,std
std::string sweep_csv(const std::vector<SweepResult>& sweeps);
// time,baseline,<method>...
std::string pulse_overlay_csv(const PulseOverlay& overlay);

}  // namespace quditcal::io
