#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "kws/common.hpp"

namespace kws {

inline constexpr double kEarthRadiusM = 6371000.0;

struct GeoSample {
  double timestamp_s = 0.0;
  double lat_deg = 0.0;
  double lng_deg = 0.0;
  double alt_m = 0.0;  // carried but unused in kinematics
};

struct VehicleState {
  double timestamp_s = 0.0;
  double speed_mps = 0.0;
  double bearing_deg = 0.0;  // [0, 360)
};

struct ManeuverThresholds {
  double speed_delta_mps = 0.5;   // s_thd
  double bearing_delta_deg = 10.0;  // d_thd
};

struct ManeuverState {
  double timestamp_s = 0.0;
  DriveState state = DriveState::normal;
  double delta_speed_mps = 0.0;
  double delta_bearing_deg = 0.0;
};

class UndefinedBearing : public std::runtime_error {
 public:
  UndefinedBearing() : std::runtime_error("bearing undefined for coincident points") {}
};

class InvalidTrace : public std::runtime_error {
 public:
  InvalidTrace(std::size_t index, const std::string& what)
      : std::runtime_error(what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

// Great-circle distance on a spherical Earth.
double haversine_distance_m(const GeoSample& a, const GeoSample& b);

// Forward azimuth from a to b in [0, 360). Throws UndefinedBearing when the
// coordinates coincide.
double initial_bearing_deg(const GeoSample& a, const GeoSample& b);

// Minimal angular difference in [0, 180].
double angular_difference_deg(double a_deg, double b_deg);

// Consecutive-pair kinematics: output[i] covers samples (i, i+1], stamped with
// the later timestamp. Pairs closer than 0.1 m reuse the previous bearing
// (0 for the first pair). Throws InvalidTrace on non-increasing timestamps.
std::vector<VehicleState> derive_states(std::span<const GeoSample> trace);

// Consecutive-sample deltas vs both thresholds; sensitive requires both to be
// strictly exceeded. The first state is normal by definition. smoothing_window
// > 1 averages speed (arithmetic) and bearing (circular) over a trailing
// window before differencing.
std::vector<ManeuverState> classify_maneuver(std::span<const VehicleState> states,
                                             const ManeuverThresholds& thresholds,
                                             int smoothing_window = 1);

enum class TrajectoryKind { straight, turn, u_turn, roundabout };

TrajectoryKind trajectory_kind_from_string(const std::string& name);
const char* to_string(TrajectoryKind kind);

struct TrajectoryParams {
  double cruise_speed_mps = 10.0;
  // Negative values pick the per-kind default:
  //   turn: min 4 m/s, 90 deg, 6 s; u_turn: 1 m/s, 180 deg, 12 s;
  //   roundabout: 3 m/s, 270 deg, 18 s.
  double min_speed_mps = -1.0;
  double turn_angle_deg = -1.0;
  double maneuver_duration_s = -1.0;
  double approach_s = 40.0;
  double exit_s = 40.0;
  double initial_heading_deg = 90.0;  // due east
  double sample_period_s = 1.0;
  double noise_sigma_m = 0.0;  // Gaussian position noise, seeded
  double origin_lat_deg = 0.0;
  double origin_lng_deg = 0.0;
};

struct Trajectory {
  std::vector<GeoSample> samples;        // 1 per sample_period, starting at t=0
  std::vector<std::uint8_t> in_maneuver;  // ground-truth labels, same length
  double window_start_s = 0.0;           // maneuver window (start, end]
  double window_end_s = 0.0;
};

// Synthesizes a drive: straight approach at cruise speed, the maneuver window
// (heading sweeps turn_angle at a constant rate while speed ramps linearly
// down to min_speed at mid-window and back up), then a straight exit.
Trajectory generate_trajectory(TrajectoryKind kind, const TrajectoryParams& params,
                               std::uint64_t seed);

// CSV with header timestamp_s,lat_deg,lng_deg,alt_m.
void write_trace_csv(const std::filesystem::path& path, std::span<const GeoSample> trace);
std::vector<GeoSample> read_trace_csv(const std::filesystem::path& path);

// CSV with header timestamp_s,in_maneuver.
void write_truth_csv(const std::filesystem::path& path, const Trajectory& trajectory);

// One JSON object per line with timestamp, state and both deltas.
void write_maneuvers_jsonl(const std::filesystem::path& path,
                           std::span<const ManeuverState> states);

}  // namespace kws
