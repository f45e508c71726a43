#include "kws/telemetry.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace kws {

namespace {

constexpr double kDeg2Rad = std::numbers::pi / 180.0;
constexpr double kMetersPerDegree = kEarthRadiusM * kDeg2Rad;
constexpr double kStationaryDistanceM = 0.1;

double normalize_deg(double deg) {
  double d = std::fmod(deg, 360.0);
  if (d < 0.0) d += 360.0;
  return d;
}

}  // namespace

double haversine_distance_m(const GeoSample& a, const GeoSample& b) {
  const double lat1 = a.lat_deg * kDeg2Rad, lat2 = b.lat_deg * kDeg2Rad;
  const double dlat = (b.lat_deg - a.lat_deg) * kDeg2Rad;
  const double dlng = (b.lng_deg - a.lng_deg) * kDeg2Rad;
  const double s1 = std::sin(dlat / 2.0), s2 = std::sin(dlng / 2.0);
  const double h = s1 * s1 + std::cos(lat1) * std::cos(lat2) * s2 * s2;
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

double initial_bearing_deg(const GeoSample& a, const GeoSample& b) {
  if (a.lat_deg == b.lat_deg && a.lng_deg == b.lng_deg) throw UndefinedBearing();
  const double lat1 = a.lat_deg * kDeg2Rad, lat2 = b.lat_deg * kDeg2Rad;
  const double dlng = (b.lng_deg - a.lng_deg) * kDeg2Rad;
  const double y = std::sin(dlng) * std::cos(lat2);
  const double x = std::cos(lat1) * std::sin(lat2) - std::sin(lat1) * std::cos(lat2) * std::cos(dlng);
  return normalize_deg(std::atan2(y, x) / kDeg2Rad);
}

double angular_difference_deg(double a_deg, double b_deg) {
  const double d = std::abs(normalize_deg(a_deg) - normalize_deg(b_deg));
  return d > 180.0 ? 360.0 - d : d;
}

std::vector<VehicleState> derive_states(std::span<const GeoSample> trace) {
  if (trace.size() < 2)
    throw std::invalid_argument("derive_states: need at least 2 samples");

  std::vector<VehicleState> states;
  states.reserve(trace.size() - 1);
  double prev_bearing = 0.0;
  for (std::size_t i = 1; i < trace.size(); ++i) {
    const double dt = trace[i].timestamp_s - trace[i - 1].timestamp_s;
    if (dt <= 0.0)
      throw InvalidTrace(i, "derive_states: non-increasing timestamp at sample " +
                                std::to_string(i));
    const double dist = haversine_distance_m(trace[i - 1], trace[i]);
    double bearing = prev_bearing;
    if (dist >= kStationaryDistanceM) bearing = initial_bearing_deg(trace[i - 1], trace[i]);
    states.push_back({trace[i].timestamp_s, dist / dt, bearing});
    prev_bearing = bearing;
  }
  return states;
}

std::vector<ManeuverState> classify_maneuver(std::span<const VehicleState> states,
                                             const ManeuverThresholds& thresholds,
                                             int smoothing_window) {
  if (states.size() < 2)
    throw std::invalid_argument("classify_maneuver: need at least 2 states");
  if (smoothing_window < 1)
    throw std::invalid_argument("classify_maneuver: smoothing window must be >= 1");

  const std::size_t n = states.size();
  std::vector<double> speed(n), bearing(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (smoothing_window == 1) {
      speed[i] = states[i].speed_mps;
      bearing[i] = states[i].bearing_deg;
      continue;
    }
    const std::size_t start = i + 1 >= static_cast<std::size_t>(smoothing_window)
                                  ? i + 1 - static_cast<std::size_t>(smoothing_window)
                                  : 0;
    double v = 0.0, sin_acc = 0.0, cos_acc = 0.0;
    for (std::size_t k = start; k <= i; ++k) {
      v += states[k].speed_mps;
      sin_acc += std::sin(states[k].bearing_deg * kDeg2Rad);
      cos_acc += std::cos(states[k].bearing_deg * kDeg2Rad);
    }
    speed[i] = v / static_cast<double>(i - start + 1);
    bearing[i] = normalize_deg(std::atan2(sin_acc, cos_acc) / kDeg2Rad);
  }

  std::vector<ManeuverState> out(n);
  out[0] = {states[0].timestamp_s, DriveState::normal, 0.0, 0.0};
  for (std::size_t i = 1; i < n; ++i) {
    const double ds = std::abs(speed[i] - speed[i - 1]);
    const double dd = angular_difference_deg(bearing[i], bearing[i - 1]);
    const bool sensitive = ds > thresholds.speed_delta_mps && dd > thresholds.bearing_delta_deg;
    out[i] = {states[i].timestamp_s, sensitive ? DriveState::sensitive : DriveState::normal, ds, dd};
  }
  return out;
}

TrajectoryKind trajectory_kind_from_string(const std::string& name) {
  if (name == "straight") return TrajectoryKind::straight;
  if (name == "turn") return TrajectoryKind::turn;
  if (name == "u_turn") return TrajectoryKind::u_turn;
  if (name == "roundabout") return TrajectoryKind::roundabout;
  throw std::invalid_argument("unknown trajectory kind: " + name);
}

const char* to_string(TrajectoryKind kind) {
  switch (kind) {
    case TrajectoryKind::straight: return "straight";
    case TrajectoryKind::turn: return "turn";
    case TrajectoryKind::u_turn: return "u_turn";
    case TrajectoryKind::roundabout: return "roundabout";
  }
  return "?";
}

namespace {

struct ManeuverShape {
  double min_speed;
  double turn_angle;
  double duration;
};

ManeuverShape shape_defaults(TrajectoryKind kind, const TrajectoryParams& p) {
  ManeuverShape s{};
  switch (kind) {
    case TrajectoryKind::straight: s = {p.cruise_speed_mps, 0.0, 0.0}; break;
    case TrajectoryKind::turn: s = {4.0, 90.0, 6.0}; break;
    case TrajectoryKind::u_turn: s = {1.0, 180.0, 12.0}; break;
    case TrajectoryKind::roundabout: s = {3.0, 270.0, 18.0}; break;
  }
  if (p.min_speed_mps >= 0.0) s.min_speed = p.min_speed_mps;
  if (p.turn_angle_deg >= 0.0) s.turn_angle = p.turn_angle_deg;
  if (p.maneuver_duration_s >= 0.0) s.duration = p.maneuver_duration_s;
  if (kind == TrajectoryKind::straight) s = {p.cruise_speed_mps, 0.0, s.duration};
  return s;
}

}  // namespace

Trajectory generate_trajectory(TrajectoryKind kind, const TrajectoryParams& params,
                               std::uint64_t seed) {
  if (params.cruise_speed_mps <= 0.0)
    throw std::invalid_argument("generate_trajectory: cruise speed must be positive");
  if (params.sample_period_s <= 0.0)
    throw std::invalid_argument("generate_trajectory: sample period must be positive");

  const ManeuverShape shape = shape_defaults(kind, params);
  const double t1 = params.approach_s;
  const double t2 = t1 + shape.duration;
  const double total = t2 + params.exit_s;

  auto speed_at = [&](double t) {
    if (kind == TrajectoryKind::straight || t <= t1 || t > t2) return params.cruise_speed_mps;
    const double half = shape.duration / 2.0;
    const double into = t - t1;
    const double frac = into <= half ? into / half : (shape.duration - into) / half;
    return params.cruise_speed_mps + frac * (shape.min_speed - params.cruise_speed_mps);
  };
  auto heading_at = [&](double t) {
    if (kind == TrajectoryKind::straight || t <= t1) return params.initial_heading_deg;
    if (t >= t2) return params.initial_heading_deg + shape.turn_angle;
    return params.initial_heading_deg + shape.turn_angle * (t - t1) / shape.duration;
  };

  const double dt = params.sample_period_s / 100.0;
  const std::size_t n_samples = static_cast<std::size_t>(std::floor(total / params.sample_period_s)) + 1;

  std::mt19937_64 rng(mix_seed(seed, 0x747261));
  std::normal_distribution<double> noise(0.0, 1.0);

  Trajectory out;
  out.window_start_s = t1;
  out.window_end_s = t2;
  out.samples.reserve(n_samples);
  out.in_maneuver.reserve(n_samples);

  const double coslat = std::cos(params.origin_lat_deg * kDeg2Rad);
  double x = 0.0, y = 0.0;  // east, north in meters
  double t = 0.0;
  std::size_t emitted = 0;

  auto emit = [&](double now) {
    double ex = x, ey = y;
    if (params.noise_sigma_m > 0.0) {
      ex += params.noise_sigma_m * noise(rng);
      ey += params.noise_sigma_m * noise(rng);
    }
    GeoSample g;
    g.timestamp_s = now;
    g.lat_deg = params.origin_lat_deg + ey / kMetersPerDegree;
    g.lng_deg = params.origin_lng_deg + ex / (kMetersPerDegree * coslat);
    g.alt_m = 50.0;
    out.samples.push_back(g);
    out.in_maneuver.push_back(kind != TrajectoryKind::straight && now > t1 && now <= t2 ? 1 : 0);
    ++emitted;
  };

  emit(0.0);
  while (emitted < n_samples) {
    const double target = static_cast<double>(emitted) * params.sample_period_s;
    while (t < target - dt / 2.0) {
      // midpoint rule
      const double tm = t + dt / 2.0;
      const double v = speed_at(tm);
      const double h = heading_at(tm) * kDeg2Rad;
      x += v * std::sin(h) * dt;
      y += v * std::cos(h) * dt;
      t += dt;
    }
    emit(target);
  }
  return out;
}

void write_trace_csv(const std::filesystem::path& path, std::span<const GeoSample> trace) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write trace file: " + path.string());
  f << "timestamp_s,lat_deg,lng_deg,alt_m\n";
  char buf[160];
  for (const auto& g : trace) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", g.timestamp_s, g.lat_deg,
                  g.lng_deg, g.alt_m);
    f << buf;
  }
}

std::vector<GeoSample> read_trace_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open trace file: " + path.string());
  std::string line;
  if (!std::getline(f, line) || line.rfind("timestamp_s,lat_deg,lng_deg,alt_m", 0) != 0)
    throw std::runtime_error("trace file missing expected header: " + path.string());

  std::vector<GeoSample> trace;
  std::size_t line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    GeoSample g;
    char* end = nullptr;
    const char* p = line.c_str();
    g.timestamp_s = std::strtod(p, &end);
    if (end == p || *end != ',')
      throw std::runtime_error("trace file parse error at line " + std::to_string(line_no));
    p = end + 1;
    g.lat_deg = std::strtod(p, &end);
    if (end == p || *end != ',')
      throw std::runtime_error("trace file parse error at line " + std::to_string(line_no));
    p = end + 1;
    g.lng_deg = std::strtod(p, &end);
    if (end == p || *end != ',')
      throw std::runtime_error("trace file parse error at line " + std::to_string(line_no));
    p = end + 1;
    g.alt_m = std::strtod(p, &end);
    if (end == p)
      throw std::runtime_error("trace file parse error at line " + std::to_string(line_no));
    trace.push_back(g);
  }
  return trace;
}

void write_truth_csv(const std::filesystem::path& path, const Trajectory& trajectory) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write truth file: " + path.string());
  f << "timestamp_s,in_maneuver\n";
  char buf[64];
  for (std::size_t i = 0; i < trajectory.samples.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%d\n", trajectory.samples[i].timestamp_s,
                  trajectory.in_maneuver[i] ? 1 : 0);
    f << buf;
  }
}

void write_maneuvers_jsonl(const std::filesystem::path& path,
                           std::span<const ManeuverState> states) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write maneuver file: " + path.string());
  char buf[192];
  for (const auto& m : states) {
    std::snprintf(buf, sizeof buf,
                  "{\"timestamp_s\":%.9g,\"state\":\"%s\",\"delta_speed_mps\":%.9g,"
                  "\"delta_bearing_deg\":%.9g}\n",
                  m.timestamp_s, to_string(m.state), m.delta_speed_mps, m.delta_bearing_deg);
    f << buf;
  }
}

}  // namespace kws
