#include "hef/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "hef/binary_io.hpp"

namespace hef {

namespace {

using nlohmann::json;

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw std::invalid_argument(where + ": unknown field '" + it.key() + "'");
  }
}

double finite(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw std::invalid_argument(where + ": missing field '" + key + "'");
  const json& v = j.at(key);
  if (!v.is_number()) throw std::invalid_argument(where + ": field '" + key + "' must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw std::invalid_argument(where + ": field '" + key + "' is not finite");
  return x;
}

json pose_json(const Pose& p) { return {{"x", p.x}, {"y", p.y}, {"theta", p.theta}}; }

Pose pose_from(const json& j, const std::string& where) {
  check_keys(j, {"x", "y", "theta"}, where);
  return Pose(finite(j, "x", where), finite(j, "y", where), finite(j, "theta", where));
}

std::array<double, 4> bounds_from(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 4) throw std::invalid_argument(where + ": expected 4 numbers");
  std::array<double, 4> b{};
  for (int i = 0; i < 4; ++i) {
    if (!j[i].is_number() || !std::isfinite(j[i].get<double>())) {
      throw std::invalid_argument(where + ": non-finite bound");
    }
    b[i] = j[i].get<double>();
  }
  if (!(b[1] > b[0]) || !(b[3] > b[2])) throw std::invalid_argument(where + ": inverted bounds");
  return b;
}

double overlap(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

}  // namespace

// ---- MapTransform ----

MapTransform MapTransform::fit(const std::array<double, 4>& region, const GridSpec& grid, double margin) {
  if (!(margin >= 0.0 && margin < 0.5)) throw std::invalid_argument("map transform: margin must be in [0, 0.5)");
  MapTransform t;
  const double sx = (grid.x_max - grid.x_min) / (region[1] - region[0]);
  const double sy = (grid.y_max - grid.y_min) / (region[3] - region[2]);
  t.scale = (1.0 - 2.0 * margin) * std::min(sx, sy);
  t.map_cx = 0.5 * (region[0] + region[1]);
  t.map_cy = 0.5 * (region[2] + region[3]);
  t.grid_cx = 0.5 * (grid.x_min + grid.x_max);
  t.grid_cy = 0.5 * (grid.y_min + grid.y_max);
  return t;
}

Pose MapTransform::to_grid(const Pose& p) const {
  return Pose(grid_cx + scale * (p.x - map_cx), grid_cy + scale * (p.y - map_cy), p.theta);
}

Pose MapTransform::to_map(const Pose& p) const {
  return Pose(map_cx + (p.x - grid_cx) / scale, map_cy + (p.y - grid_cy) / scale, p.theta);
}

LandmarkMap MapTransform::to_grid(const LandmarkMap& m) const {
  LandmarkMap out = m;
  for (auto& l : out.landmarks) {
    l.x = grid_cx + scale * (l.x - map_cx);
    l.y = grid_cy + scale * (l.y - map_cy);
  }
  return out;
}

ControlInput MapTransform::to_grid(const ControlInput& u) const { return {u.dx * scale, u.dy * scale, u.dtheta}; }

Measurement MapTransform::to_grid(const Measurement& z) const {
  Measurement out = z;
  if (z.kind == MeasurementKind::Range) {
    out.value *= scale;
    out.sigma *= scale;
  }
  return out;
}

// ---- PriorSpec ----

void PriorSpec::validate() const {
  if (kind == Kind::Gaussian) {
    if (!(sigma_xy > 0.0) || !(sigma_theta > 0.0)) throw std::invalid_argument("prior: sigmas must be positive");
  } else {
    if (!(rect[1] > rect[0]) || !(rect[3] > rect[2]) || !(rect[5] > rect[4]) || rect[5] - rect[4] > kTwoPi) {
      throw std::invalid_argument("prior: rect bounds must be increasing and span at most 2π in θ");
    }
  }
}

PriorSpec PriorSpec::to_grid(const MapTransform& mt) const {
  PriorSpec p = *this;
  p.mean = mt.to_grid(mean);
  p.sigma_xy = sigma_xy * mt.scale;
  const Pose lo = mt.to_grid(Pose(rect[0], rect[2], 0.0));
  const Pose hi = mt.to_grid(Pose(rect[1], rect[3], 0.0));
  p.rect = {lo.x, hi.x, lo.y, hi.y, rect[4], rect[5]};
  return p;
}

DensityGrid PriorSpec::density(const GridSpec& g) const {
  validate();
  DensityGrid out(g);
  if (kind == Kind::Gaussian) {
    const double ixy = 1.0 / (2.0 * sigma_xy * sigma_xy), it2 = 1.0 / (2.0 * sigma_theta * sigma_theta);
    for (int ix = 0; ix < g.nx; ++ix) {
      for (int iy = 0; iy < g.ny; ++iy) {
        const double ex = g.x(ix) - mean.x, ey = g.y(iy) - mean.y;
        for (int it = 0; it < g.ntheta; ++it) {
          const double et = angdiff(g.theta(it), mean.theta);
          out.at(ix, iy, it) = std::exp(-(ex * ex + ey * ey) * ixy - et * et * it2);
        }
      }
    }
  } else {
    const double hx = 0.5 * g.dx(), hy = 0.5 * g.dy(), ht = 0.5 * g.dtheta();
    std::vector<double> fx(g.nx), fy(g.ny), ft(g.ntheta, 0.0);
    for (int ix = 0; ix < g.nx; ++ix) fx[ix] = overlap(g.x(ix) - hx, g.x(ix) + hx, rect[0], rect[1]);
    for (int iy = 0; iy < g.ny; ++iy) fy[iy] = overlap(g.y(iy) - hy, g.y(iy) + hy, rect[2], rect[3]);
    for (int it = 0; it < g.ntheta; ++it) {
      for (int k = -2; k <= 2; ++k) {
        ft[it] += overlap(g.theta(it) - ht + k * kTwoPi, g.theta(it) + ht + k * kTwoPi, rect[4], rect[5]);
      }
    }
    for (int ix = 0; ix < g.nx; ++ix) {
      for (int iy = 0; iy < g.ny; ++iy) {
        for (int it = 0; it < g.ntheta; ++it) out.at(ix, iy, it) = fx[ix] * fy[iy] * ft[it];
      }
    }
  }
  out.normalize();
  return out;
}

std::vector<Pose> PriorSpec::sample(std::mt19937_64& rng, std::size_t n) const {
  validate();
  std::vector<Pose> out;
  out.reserve(n);
  if (kind == Kind::Gaussian) {
    std::normal_distribution<double> n01(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = mean.x + sigma_xy * n01(rng);
      const double y = mean.y + sigma_xy * n01(rng);
      out.emplace_back(x, y, mean.theta + sigma_theta * n01(rng));
    }
  } else {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = rect[0] + (rect[1] - rect[0]) * u01(rng);
      const double y = rect[2] + (rect[3] - rect[2]) * u01(rng);
      out.emplace_back(x, y, rect[4] + (rect[5] - rect[4]) * u01(rng));
    }
  }
  return out;
}

GaussianBelief PriorSpec::gaussian() const {
  validate();
  GaussianBelief b;
  b.cov.setZero();
  if (kind == Kind::Gaussian) {
    b.mean = mean;
    b.cov(0, 0) = b.cov(1, 1) = sigma_xy * sigma_xy;
    b.cov(2, 2) = sigma_theta * sigma_theta;
  } else {
    b.mean = Pose(0.5 * (rect[0] + rect[1]), 0.5 * (rect[2] + rect[3]), 0.5 * (rect[4] + rect[5]));
    auto var = [](double a, double c) { return (c - a) * (c - a) / 12.0; };
    b.cov(0, 0) = var(rect[0], rect[1]);
    b.cov(1, 1) = var(rect[2], rect[3]);
    b.cov(2, 2) = var(rect[4], rect[5]);
  }
  return b;
}

json to_json(const PriorSpec& p) {
  if (p.kind == PriorSpec::Kind::Gaussian) {
    return {{"kind", "gaussian"}, {"mean", pose_json(p.mean)}, {"sigma_xy", p.sigma_xy}, {"sigma_theta", p.sigma_theta}};
  }
  return {{"kind", "rect"}, {"rect", p.rect}};
}

PriorSpec prior_from_json(const json& j) {
  const std::string where = "prior";
  check_keys(j, {"kind", "mean", "sigma_xy", "sigma_theta", "rect"}, where);
  PriorSpec p;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "gaussian") {
    p.kind = PriorSpec::Kind::Gaussian;
    p.mean = pose_from(j.at("mean"), where + ".mean");
    p.sigma_xy = finite(j, "sigma_xy", where);
    p.sigma_theta = finite(j, "sigma_theta", where);
  } else if (kind == "rect") {
    p.kind = PriorSpec::Kind::Rect;
    const json& r = j.at("rect");
    if (!r.is_array() || r.size() != 6) throw std::invalid_argument("prior.rect: expected 6 numbers");
    for (int i = 0; i < 6; ++i) p.rect[i] = r[i].get<double>();
  } else {
    throw std::invalid_argument("prior: unknown kind '" + kind + "'");
  }
  p.validate();
  return p;
}

// ---- Dataset ----

void Dataset::validate() const {
  grid.validate();
  map.validate();
  prior.validate();
  if (steps.empty()) throw std::invalid_argument("dataset has no steps");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& s = steps[i];
    const std::string where = "dataset step " + std::to_string(s.t);
    if (s.t != static_cast<int>(i) + 1) throw std::invalid_argument(where + ": steps must be numbered 1..T");
    s.u.validate();
    if (s.gt.x < region[0] || s.gt.x > region[1] || s.gt.y < region[2] || s.gt.y > region[3]) {
      throw std::invalid_argument(where + ": ground truth outside the map region");
    }
    for (const auto& z : s.z) {
      if (!(z.sigma > 0.0) || !std::isfinite(z.value)) throw std::invalid_argument(where + ": invalid measurement");
      if (z.landmark_id) map.find(*z.landmark_id);
    }
  }
}

namespace {

json measurement_json(const Measurement& z) {
  json j{{"kind", z.kind == MeasurementKind::Range ? "range" : "bearing"}, {"value", z.value}, {"sigma", z.sigma}};
  if (z.landmark_id) j["landmark_id"] = *z.landmark_id;
  return j;
}

Measurement measurement_from(const json& j, const std::string& where) {
  check_keys(j, {"kind", "value", "sigma", "landmark_id"}, where);
  Measurement z;
  const std::string k = j.at("kind").get<std::string>();
  if (k == "range") {
    z.kind = MeasurementKind::Range;
  } else if (k == "bearing") {
    z.kind = MeasurementKind::Bearing;
  } else {
    throw std::invalid_argument(where + ": unknown measurement kind '" + k + "'");
  }
  z.value = finite(j, "value", where);
  if (z.kind == MeasurementKind::Bearing) z.value = wrap_pi(z.value);
  z.sigma = finite(j, "sigma", where);
  if (!(z.sigma > 0.0)) throw std::invalid_argument(where + ": sigma must be positive");
  if (j.contains("landmark_id")) z.landmark_id = j.at("landmark_id").get<int>();
  return z;
}

}  // namespace

std::string dataset_to_string(const Dataset& d) {
  std::ostringstream os;
  json h{{"format", "hef-dataset-1"},
         {"grid", d.grid},
         {"region", d.region},
         {"map", map_to_json(d.map)},
         {"prior", to_json(d.prior)},
         {"meta", d.meta}};
  os << h.dump() << "\n";
  for (const auto& s : d.steps) {
    json z = json::array();
    for (const auto& m : s.z) z.push_back(measurement_json(m));
    json line{{"t", s.t}, {"u", {{"dx", s.u.dx}, {"dy", s.u.dy}, {"dtheta", s.u.dtheta}}}, {"z", z},
              {"gt", pose_json(s.gt)}};
    os << line.dump() << "\n";
  }
  return os.str();
}

Dataset dataset_from_string(const std::string& text, const std::string& source) {
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  Dataset d;
  bool have_header = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    try {
      const json j = json::parse(line);
      if (!have_header) {
        check_keys(j, {"format", "grid", "region", "map", "prior", "meta"}, where);
        if (j.at("format") != "hef-dataset-1") throw std::invalid_argument(where + ": unsupported format");
        d.grid = j.at("grid").get<GridSpec>();
        d.region = bounds_from(j.at("region"), where + ": region");
        d.map = map_from_json(j.at("map"));
        d.prior = prior_from_json(j.at("prior"));
        if (j.contains("meta")) d.meta = j.at("meta");
        have_header = true;
        continue;
      }
      check_keys(j, {"t", "u", "z", "gt"}, where);
      DatasetStep s;
      s.t = j.at("t").get<int>();
      const json& u = j.at("u");
      check_keys(u, {"dx", "dy", "dtheta"}, where + ": u");
      s.u = {finite(u, "dx", where), finite(u, "dy", where), finite(u, "dtheta", where)};
      for (const auto& z : j.at("z")) s.z.push_back(measurement_from(z, where + ": z"));
      s.gt = pose_from(j.at("gt"), where + ": gt");
      d.steps.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw std::invalid_argument(where + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      const std::string msg = e.what();
      throw std::invalid_argument(msg.rfind(where, 0) == 0 ? msg : where + ": " + msg);
    }
  }
  if (!have_header) throw std::invalid_argument(source + ": missing header line");
  try {
    d.validate();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(source + ": " + e.what());
  }
  return d;
}

void save_dataset(const Dataset& d, const std::string& path) {
  d.validate();
  atomic_write(path, dataset_to_string(d));
}

Dataset load_dataset(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open dataset " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return dataset_from_string(ss.str(), path);
}

// ---- simulator ----

void SimConfig::validate() const {
  if (n_landmarks < 1) throw std::invalid_argument("sim.n_landmarks: must be at least 1");
  if (n_steps < 1) throw std::invalid_argument("sim.n_steps: must be at least 1");
  if (steps_per_loop < 1) throw std::invalid_argument("sim.steps_per_loop: must be at least 1");
  if (!(radius > 0.0)) throw std::invalid_argument("sim.radius: must be positive");
  if (!(landmark_half_span >= 0.0)) throw std::invalid_argument("sim.landmark_half_span: must be non-negative");
  if (!(odom_sigma_trans >= 0.0) || !(odom_sigma_rot >= 0.0) || !(range_sigma > 0.0)) {
    throw std::invalid_argument("sim: noise sigmas must be non-negative (range_sigma positive)");
  }
  if (!(prior_sigma_xy > 0.0) || !(prior_sigma_theta > 0.0)) {
    throw std::invalid_argument("sim: prior sigmas must be positive");
  }
  grid.validate();
  const double cx = 0.5 * (region[0] + region[1]), cy = 0.5 * (region[2] + region[3]);
  if (cx - radius < region[0] || cx + radius > region[1] || cy - radius < region[2] || cy + radius > region[3]) {
    throw std::invalid_argument("sim.radius: trajectory leaves the map region");
  }
  if (landmark_half_span > 0.5 * (region[1] - region[0])) {
    throw std::invalid_argument("sim.landmark_half_span: landmarks leave the map region");
  }
}

json to_json(const SimConfig& c) {
  return {{"n_landmarks", c.n_landmarks},
          {"n_steps", c.n_steps},
          {"steps_per_loop", c.steps_per_loop},
          {"radius", c.radius},
          {"landmark_half_span", c.landmark_half_span},
          {"odom_sigma_trans", c.odom_sigma_trans},
          {"odom_sigma_rot", c.odom_sigma_rot},
          {"range_sigma", c.range_sigma},
          {"prior_sigma_xy", c.prior_sigma_xy},
          {"prior_sigma_theta", c.prior_sigma_theta},
          {"grid", c.grid},
          {"region", c.region}};
}

SimConfig sim_config_from_json(const json& j) {
  check_keys(j,
             {"n_landmarks", "n_steps", "steps_per_loop", "radius", "landmark_half_span", "odom_sigma_trans",
              "odom_sigma_rot", "range_sigma", "prior_sigma_xy", "prior_sigma_theta", "grid", "region"},
             "sim");
  SimConfig c;
  if (j.contains("n_landmarks")) c.n_landmarks = j.at("n_landmarks").get<int>();
  if (j.contains("n_steps")) c.n_steps = j.at("n_steps").get<int>();
  if (j.contains("steps_per_loop")) c.steps_per_loop = j.at("steps_per_loop").get<int>();
  for (auto [key, dst] : {std::pair{"radius", &c.radius},
                          {"landmark_half_span", &c.landmark_half_span},
                          {"odom_sigma_trans", &c.odom_sigma_trans},
                          {"odom_sigma_rot", &c.odom_sigma_rot},
                          {"range_sigma", &c.range_sigma},
                          {"prior_sigma_xy", &c.prior_sigma_xy},
                          {"prior_sigma_theta", &c.prior_sigma_theta}}) {
    if (j.contains(key)) *dst = finite(j, key, "sim");
  }
  if (j.contains("grid")) c.grid = j.at("grid").get<GridSpec>();
  if (j.contains("region")) c.region = bounds_from(j.at("region"), "sim.region");
  c.validate();
  return c;
}

Dataset simulate_range_world(const SimConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  Dataset d;
  d.grid = cfg.grid;
  d.region = cfg.region;
  const double cx = 0.5 * (cfg.region[0] + cfg.region[1]), cy = 0.5 * (cfg.region[2] + cfg.region[3]);
  for (int i = 0; i < cfg.n_landmarks; ++i) {
    const double f = cfg.n_landmarks == 1 ? 0.5 : static_cast<double>(i) / (cfg.n_landmarks - 1);
    d.map.landmarks.push_back({i, cx - cfg.landmark_half_span + 2.0 * cfg.landmark_half_span * f, cy});
  }
  const double dphi = kTwoPi / cfg.steps_per_loop;
  auto on_circle = [&](int k) {
    const double phi = -0.5 * M_PI + k * dphi;
    return Pose(cx + cfg.radius * std::cos(phi), cy + cfg.radius * std::sin(phi), phi + 0.5 * M_PI);
  };
  const Pose start = on_circle(0);
  d.prior.kind = PriorSpec::Kind::Gaussian;
  // the true start is a draw from the prior, so the prior centre is offset from it
  d.prior.mean = Pose(start.x + cfg.prior_sigma_xy * n01(rng), start.y + cfg.prior_sigma_xy * n01(rng),
                      start.theta + cfg.prior_sigma_theta * n01(rng));
  d.prior.sigma_xy = cfg.prior_sigma_xy;
  d.prior.sigma_theta = cfg.prior_sigma_theta;
  // exact chord between consecutive circle poses, in the body frame
  const ControlInput chord{cfg.radius * std::sin(dphi), cfg.radius * (1.0 - std::cos(dphi)), dphi};
  Pose gt = start;
  for (int t = 1; t <= cfg.n_steps; ++t) {
    DatasetStep s;
    s.t = t;
    gt = compose(gt, chord.as_pose());
    s.gt = gt;
    s.u = {chord.dx + cfg.odom_sigma_trans * n01(rng), chord.dy + cfg.odom_sigma_trans * n01(rng),
           chord.dtheta + cfg.odom_sigma_rot * n01(rng)};
    const Landmark& L = d.map.landmarks[(t - 1) % cfg.n_landmarks];
    Measurement z;
    z.kind = MeasurementKind::Range;
    z.landmark_id = L.id;
    z.sigma = cfg.range_sigma;
    z.value = std::hypot(gt.x - L.x, gt.y - L.y) + cfg.range_sigma * n01(rng);
    s.z.push_back(z);
    d.steps.push_back(std::move(s));
  }
  d.meta = {{"generator", "range_world"}, {"seed", seed}, {"config", to_json(cfg)}};
  d.validate();
  return d;
}

Dataset banana_scenario(const BananaConfig& cfg) {
  if (cfg.n_steps < 0) throw std::invalid_argument("banana: n_steps must be non-negative");
  Dataset d;
  d.grid = cfg.grid;
  d.region = cfg.region;
  d.prior.kind = PriorSpec::Kind::Rect;
  d.prior.rect = cfg.prior_rect;
  if (d.prior.rect[4] == d.prior.rect[5]) {
    d.prior.rect[4] = -0.5 * cfg.grid.dtheta();
    d.prior.rect[5] = 0.5 * cfg.grid.dtheta();
  }
  d.prior.validate();
  const double end_x = cfg.prior_rect[1] + cfg.n_steps * cfg.step + 3.0 * cfg.sigma_trans * std::sqrt(cfg.n_steps);
  if (end_x > cfg.region[1]) throw std::invalid_argument("banana: total displacement leaves the map region");
  Pose gt(0.5 * (cfg.prior_rect[0] + cfg.prior_rect[1]), 0.5 * (cfg.prior_rect[2] + cfg.prior_rect[3]), 0.0);
  for (int t = 1; t <= cfg.n_steps; ++t) {
    DatasetStep s;
    s.t = t;
    s.u = {cfg.step, 0.0, 0.0};
    gt = compose(gt, s.u.as_pose());
    s.gt = gt;
    d.steps.push_back(std::move(s));
  }
  d.meta = {{"generator", "banana"}, {"sigma_trans", cfg.sigma_trans}, {"sigma_rot", cfg.sigma_rot}};
  if (cfg.n_steps > 0) d.validate();
  return d;
}

// ---- runner ----

const char* filter_name(FilterKind k) {
  switch (k) {
    case FilterKind::HEF: return "hef";
    case FilterKind::EKF: return "ekf";
    case FilterKind::HistF: return "histf";
    case FilterKind::PF: return "pf";
  }
  return "?";
}

FilterKind parse_filter(const std::string& s) {
  std::string l;
  for (char c : s) l.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (l == "hef") return FilterKind::HEF;
  if (l == "ekf") return FilterKind::EKF;
  if (l == "histf") return FilterKind::HistF;
  if (l == "pf") return FilterKind::PF;
  throw std::invalid_argument("unknown filter '" + s + "' (expected hef, ekf, histf or pf)");
}

json to_json(const FilterParams& p) {
  return {{"sigma_trans", p.sigma_trans},
          {"sigma_rot", p.sigma_rot},
          {"n_particles", p.n_particles},
          {"pad", p.transform.pad},
          {"node_spacing", p.transform.node_spacing}};
}

FilterParams filter_params_from_json(const json& j) {
  check_keys(j, {"sigma_trans", "sigma_rot", "n_particles", "pad", "node_spacing"}, "filter");
  FilterParams p;
  if (j.contains("sigma_trans")) p.sigma_trans = finite(j, "sigma_trans", "filter");
  if (j.contains("sigma_rot")) p.sigma_rot = finite(j, "sigma_rot", "filter");
  if (j.contains("n_particles")) {
    const long long n = j.at("n_particles").get<long long>();
    if (n < 1) throw std::invalid_argument("filter.n_particles: must be at least 1");
    p.n_particles = static_cast<std::size_t>(n);
  }
  if (j.contains("pad")) p.transform.pad = j.at("pad").get<int>();
  if (j.contains("node_spacing")) p.transform.node_spacing = finite(j, "node_spacing", "filter");
  if (!(p.sigma_trans > 0.0) || !(p.sigma_rot > 0.0)) throw std::invalid_argument("filter: sigmas must be positive");
  if (p.transform.pad < 1) throw std::invalid_argument("filter.pad: must be at least 1");
  if (!(p.transform.node_spacing > 0.0 && p.transform.node_spacing <= 1.0)) {
    throw std::invalid_argument("filter.node_spacing: must be in (0, 1]");
  }
  return p;
}

json to_json(const StepRecord& r) {
  json j{{"t", r.t}, {"mode", pose_json(r.mode)}, {"mean", pose_json(r.mean)}, {"nll_gt", nll_term(r.density_at_gt)}};
  if (r.log_z) j["log_z"] = *r.log_z;
  if (r.entropy) j["entropy"] = *r.entropy;
  if (r.flagged) j["degenerate_reset"] = true;
  return j;
}

double nll_term(double density_at_gt) { return -std::log(std::max(density_at_gt, kDensityFloor)); }

MetricsReport compute_metrics(const std::vector<StepRecord>& records, const Dataset& d) {
  if (records.size() != d.steps.size()) throw std::invalid_argument("metrics: run log and dataset lengths differ");
  if (records.empty()) throw std::invalid_argument("metrics: empty run");
  const std::size_t n = records.size();
  std::vector<double> em(n), en(n);
  double nll = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Pose& g = d.steps[i].gt;
    em[i] = std::hypot(records[i].mode.x - g.x, records[i].mode.y - g.y);
    en[i] = std::hypot(records[i].mean.x - g.x, records[i].mean.y - g.y);
    nll += nll_term(records[i].density_at_gt);
  }
  auto stats = [n](const std::vector<double>& v, double& mean, double& sd) {
    mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    sd = n > 1 ? std::sqrt(s / (n - 1)) : 0.0;
  };
  MetricsReport m;
  stats(em, m.ate_mode, m.ate_mode_std);
  stats(en, m.ate_mean, m.ate_mean_std);
  m.nll = nll / n;
  return m;
}

RunResult run_filter(FilterKind kind, const Dataset& d, const FilterParams& p, std::uint64_t seed, TransformPtr tr,
                     const BeliefSink& sink) {
  const MapTransform mt = d.transform();
  const GridSpec& grid = d.grid;
  const LandmarkMap map = mt.to_grid(d.map);
  const PriorSpec prior = d.prior.to_grid(mt);
  DiffDriveModel model{p.sigma_trans * mt.scale, p.sigma_rot};
  model.validate();
  std::mt19937_64 rng(seed);

  std::optional<HarmonicFilter> hef;
  GaussianBelief ekf;
  DensityGrid hist;
  ParticleSet pf;
  switch (kind) {
    case FilterKind::HEF: {
      if (!tr) tr = std::make_shared<const Se2Fourier>(grid, p.transform);
      if (!(tr->grid() == grid)) throw std::invalid_argument("run: transform grid does not match the dataset");
      hef.emplace(tr, model, fit_from_log_density(tr, floored_log(prior.density(grid))));
      if (sink) sink(0, hef->belief().evaluate());
      break;
    }
    case FilterKind::EKF:
      ekf = prior.gaussian();
      if (sink) sink(0, gaussian_on_grid(ekf, grid));
      break;
    case FilterKind::HistF:
      hist = prior.density(grid);
      if (sink) sink(0, hist);
      break;
    case FilterKind::PF:
      pf = pf_from_samples(prior.sample(rng, p.n_particles));
      if (sink) sink(0, pf_histogram(pf, grid));
      break;
  }

  RunResult res;
  for (const auto& s : d.steps) {
    const ControlInput u = mt.to_grid(s.u);
    std::vector<Measurement> zs;
    for (const auto& z : s.z) zs.push_back(mt.to_grid(z));
    const Pose gt = mt.to_grid(s.gt);
    StepRecord r;
    r.t = s.t;
    r.gt = s.gt;
    DensityGrid density;
    Pose mode, mean;
    try {
      switch (kind) {
        case FilterKind::HEF: {
          const StepDiagnostics diag = hef->step(u, zs, map);
          density = hef->belief().evaluate();
          mode = diag.mode;
          mean = diag.mean.pose;
          r.log_z = diag.log_z;
          r.entropy = diag.entropy;
          break;
        }
        case FilterKind::EKF:
          ekf = ekf_step(ekf, model, u, zs, map);
          density = gaussian_on_grid(ekf, grid);
          mode = mean = ekf.mean;
          break;
        case FilterKind::HistF:
          hist = histf_step(hist, model, u, zs, map);
          density = hist;
          mode = grid.pose(mode_index(hist));
          mean = mean_pose(hist).pose;
          break;
        case FilterKind::PF:
          pf_step(pf, model, u, zs, map, rng, &grid);
          density = pf_histogram(pf, grid);
          mode = pf.mode;
          mean = pf_mean(pf);
          r.flagged = pf.degenerate_reset;
          break;
      }
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(std::string(filter_name(kind)) + " step " + std::to_string(s.t) + ": " + e.what());
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string(filter_name(kind)) + " step " + std::to_string(s.t) + ": " + e.what());
    }
    r.mode = mt.to_map(mode);
    r.mean = mt.to_map(mean);
    r.density_at_gt = density[grid.nearest_index(gt)];
    if (!r.entropy) r.entropy = entropy(density);
    if (sink) sink(s.t, density);
    res.records.push_back(r);
  }
  if (!res.records.empty()) res.metrics = compute_metrics(res.records, d);
  return res;
}

DensityGrid particle_oracle(const Dataset& d, const DiffDriveModel& grid_model, std::size_t n, std::uint64_t seed) {
  const MapTransform mt = d.transform();
  std::mt19937_64 rng(seed);
  ParticleSet ps = pf_from_samples(d.prior.to_grid(mt).sample(rng, n));
  for (const auto& s : d.steps) pf_predict(ps, grid_model, mt.to_grid(s.u), rng);
  return pf_histogram(ps, d.grid);
}

}  // namespace hef
