#include "bee/sim/tabletop.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bee {

namespace {

double clamp(double v, double lo, double hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

double quantize_255(double v) { return std::round(clamp(v, 0.0, 1.0) * 255.0) / 255.0; }

bool is_block(ObjectKind k) {
  return k == ObjectKind::block || k == ObjectKind::distractor_block;
}

double point_segment_distance(const Vector2d& p, const Vector2d& a,
                              const Vector2d& b) {
  const Vector2d ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 <= 0.0) return (p - a).norm();
  const double t = clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

}  // namespace

ObjectKind object_kind_from_string(const std::string& s) {
  if (s == "block") return ObjectKind::block;
  if (s == "door") return ObjectKind::door;
  if (s == "drawer") return ObjectKind::drawer;
  if (s == "distractor_block") return ObjectKind::distractor_block;
  throw std::invalid_argument("unknown object kind: " + s);
}

std::string to_string(ObjectKind kind) {
  switch (kind) {
    case ObjectKind::block: return "block";
    case ObjectKind::door: return "door";
    case ObjectKind::drawer: return "drawer";
    case ObjectKind::distractor_block: return "distractor_block";
  }
  return "?";
}

double MetricThresholds::threshold_for(ObjectKind kind) const {
  switch (kind) {
    case ObjectKind::door: return door;
    case ObjectKind::drawer: return drawer;
    default: return block;
  }
}

void LayoutSpec::validate() const {
  if (objects.empty()) throw std::invalid_argument("layout: no objects");
  if (target_ids.empty()) throw std::invalid_argument("layout: no target ids");
  for (int id : target_ids)
    if (id < 0 || id >= static_cast<int>(objects.size()))
      throw std::invalid_argument("layout: target id " + std::to_string(id) +
                                  " does not refer to an existing object");
  if (horizon <= 0) throw std::invalid_argument("layout: horizon must be > 0");
  if (max_step <= 0.0) throw std::invalid_argument("layout: max_step must be > 0");
  if (gripper_radius <= 0.0)
    throw std::invalid_argument("layout: gripper_radius must be > 0");
  if (gripper_start.x() < 0.0 || gripper_start.x() > 1.0 ||
      gripper_start.y() < 0.0 || gripper_start.y() > 1.0)
    throw std::invalid_argument("layout: gripper_start outside the table");
  for (const auto& o : objects) {
    if (o.intensity <= 0.0 || o.intensity > 1.0)
      throw std::invalid_argument("layout: object intensity must be in (0, 1]");
    if (o.kind == ObjectKind::door && o.min_angle > o.max_angle)
      throw std::invalid_argument("layout: door angle limits inverted");
    if (o.kind == ObjectKind::drawer && o.max_extension <= 0.0)
      throw std::invalid_argument("layout: drawer max_extension must be > 0");
  }
}

LayoutSpec LayoutSpec::preset(const std::string& name) {
  LayoutSpec layout;
  layout.gripper_start = Vector2d(0.50, 0.75);
  layout.max_step = 0.10;
  layout.example_radius = 0.08;
  if (name == "blocks") {
    ObjectSpec target;
    target.kind = ObjectKind::block;
    target.name = "target_block";
    target.intensity = 0.45;
    target.radius = 0.06;
    target.init_position = Vector2d(0.25, 0.35);
    ObjectSpec d1 = target;
    d1.kind = ObjectKind::distractor_block;
    d1.name = "distractor_1";
    d1.intensity = 0.65;
    d1.init_position = Vector2d(0.52, 0.30);
    ObjectSpec d2 = target;
    d2.kind = ObjectKind::distractor_block;
    d2.name = "distractor_2";
    d2.intensity = 0.25;
    d2.init_position = Vector2d(0.78, 0.38);
    layout.objects = {target, d1, d2};
    layout.target_ids = {0};
  } else if (name == "door") {
    ObjectSpec door;
    door.kind = ObjectKind::door;
    door.name = "door";
    door.intensity = 0.55;
    door.radius = 0.055;
    door.hinge = Vector2d(0.18, 0.38);
    door.arm_length = 0.22;
    door.init_angle = 0.0;
    door.min_angle = -1.2;
    door.max_angle = 1.2;
    ObjectSpec d1;
    d1.kind = ObjectKind::distractor_block;
    d1.name = "distractor_1";
    d1.intensity = 0.30;
    d1.radius = 0.06;
    d1.init_position = Vector2d(0.68, 0.30);
    ObjectSpec d2 = d1;
    d2.name = "distractor_2";
    d2.intensity = 0.80;
    d2.init_position = Vector2d(0.82, 0.52);
    layout.objects = {door, d1, d2};
    layout.target_ids = {0};
  } else if (name == "drawer") {
    ObjectSpec drawer;
    drawer.kind = ObjectKind::drawer;
    drawer.name = "drawer";
    drawer.intensity = 0.50;
    drawer.radius = 0.06;
    drawer.base = Vector2d(0.42, 0.06);
    drawer.axis = Vector2d(0.0, 1.0);
    drawer.handle_offset = 0.10;
    drawer.init_extension = 0.10;  // begins slightly open
    drawer.max_extension = 0.28;
    ObjectSpec d1;
    d1.kind = ObjectKind::distractor_block;
    d1.name = "distractor_1";
    d1.intensity = 0.30;
    d1.radius = 0.06;
    d1.init_position = Vector2d(0.15, 0.60);
    ObjectSpec d2 = d1;
    d2.name = "distractor_2";
    d2.intensity = 0.75;
    d2.init_position = Vector2d(0.80, 0.55);
    layout.objects = {drawer, d1, d2};
    layout.target_ids = {0};
  } else {
    throw std::invalid_argument("unknown layout preset: " + name);
  }
  layout.validate();
  return layout;
}

nlohmann::json LayoutSpec::to_json() const {
  nlohmann::json j;
  j["horizon"] = horizon;
  j["gripper_start"] = {gripper_start.x(), gripper_start.y()};
  j["gripper_radius"] = gripper_radius;
  j["max_step"] = max_step;
  j["example_radius"] = example_radius;
  j["target_ids"] = target_ids;
  j["objects"] = nlohmann::json::array();
  for (const auto& o : objects) {
    nlohmann::json jo;
    jo["kind"] = to_string(o.kind);
    jo["name"] = o.name;
    jo["intensity"] = o.intensity;
    jo["radius"] = o.radius;
    switch (o.kind) {
      case ObjectKind::block:
      case ObjectKind::distractor_block:
        jo["position"] = {o.init_position.x(), o.init_position.y()};
        break;
      case ObjectKind::door:
        jo["hinge"] = {o.hinge.x(), o.hinge.y()};
        jo["arm_length"] = o.arm_length;
        jo["angle"] = o.init_angle;
        jo["min_angle"] = o.min_angle;
        jo["max_angle"] = o.max_angle;
        break;
      case ObjectKind::drawer:
        jo["base"] = {o.base.x(), o.base.y()};
        jo["axis"] = {o.axis.x(), o.axis.y()};
        jo["handle_offset"] = o.handle_offset;
        jo["extension"] = o.init_extension;
        jo["max_extension"] = o.max_extension;
        break;
    }
    j["objects"].push_back(jo);
  }
  return j;
}

LayoutSpec LayoutSpec::from_json(const nlohmann::json& j) {
  LayoutSpec layout;
  layout.horizon = j.value("horizon", 50);
  if (j.contains("gripper_start"))
    layout.gripper_start =
        Vector2d(j["gripper_start"][0].get<double>(), j["gripper_start"][1].get<double>());
  layout.gripper_radius = j.value("gripper_radius", 0.05);
  layout.max_step = j.value("max_step", 0.05);
  layout.example_radius = j.value("example_radius", 0.06);
  layout.target_ids = j.at("target_ids").get<std::vector<int>>();
  for (const auto& jo : j.at("objects")) {
    ObjectSpec o;
    o.kind = object_kind_from_string(jo.at("kind").get<std::string>());
    o.name = jo.value("name", to_string(o.kind));
    o.intensity = jo.value("intensity", 0.5);
    o.radius = jo.value("radius", 0.06);
    switch (o.kind) {
      case ObjectKind::block:
      case ObjectKind::distractor_block:
        o.init_position = Vector2d(jo.at("position")[0].get<double>(),
                                   jo.at("position")[1].get<double>());
        break;
      case ObjectKind::door:
        o.hinge = Vector2d(jo.at("hinge")[0].get<double>(),
                           jo.at("hinge")[1].get<double>());
        o.arm_length = jo.value("arm_length", 0.22);
        o.init_angle = jo.value("angle", 0.0);
        o.min_angle = jo.value("min_angle", -1.2);
        o.max_angle = jo.value("max_angle", 1.2);
        break;
      case ObjectKind::drawer:
        o.base = Vector2d(jo.at("base")[0].get<double>(),
                          jo.at("base")[1].get<double>());
        if (jo.contains("axis"))
          o.axis = Vector2d(jo["axis"][0].get<double>(), jo["axis"][1].get<double>())
                       .normalized();
        o.handle_offset = jo.value("handle_offset", 0.10);
        o.init_extension = jo.value("extension", 0.10);
        o.max_extension = jo.value("max_extension", 0.28);
        break;
    }
    layout.objects.push_back(o);
  }
  layout.validate();
  return layout;
}

Vector2d handle_position(const ObjectSpec& spec, const ObjectPose& pose) {
  switch (spec.kind) {
    case ObjectKind::block:
    case ObjectKind::distractor_block:
      return pose.position;
    case ObjectKind::door:
      return spec.hinge +
             spec.arm_length * Vector2d(std::cos(pose.angle), std::sin(pose.angle));
    case ObjectKind::drawer:
      return spec.base + (spec.handle_offset + pose.extension) * spec.axis;
  }
  return pose.position;
}

double pose_distance(const ObjectSpec& spec, const ObjectPose& a,
                     const ObjectPose& b) {
  switch (spec.kind) {
    case ObjectKind::block:
    case ObjectKind::distractor_block:
      return (a.position - b.position).norm();
    case ObjectKind::door:
      return std::abs(a.angle - b.angle);
    case ObjectKind::drawer:
      return std::abs(a.extension - b.extension);
  }
  return 0.0;
}

TabletopEnv::TabletopEnv(LayoutSpec layout, int image_hw)
    : layout_(std::move(layout)), hw_(image_hw) {
  layout_.validate();
  if (hw_ < 4) throw std::invalid_argument("TabletopEnv: image too small");
  state_ = initial_state();
}

SimState TabletopEnv::initial_state() const {
  SimState s;
  s.gripper = layout_.gripper_start;
  s.time = 0;
  for (const auto& o : layout_.objects) {
    ObjectPose p;
    p.position = o.init_position;
    p.angle = o.init_angle;
    p.extension = o.init_extension;
    s.objects.push_back(p);
  }
  return s;
}

Observation TabletopEnv::reset() {
  state_ = initial_state();
  return observe(state_);
}

Observation TabletopEnv::step(const Action& action) {
  if (state_.time >= layout_.horizon)
    throw std::logic_error("TabletopEnv::step after episode horizon");

  const Vector2d old_pos = state_.gripper;
  const double dx = clamp(action.dx, -1.0, 1.0) * layout_.max_step;
  const double dy = clamp(action.dy, -1.0, 1.0) * layout_.max_step;
  Vector2d new_pos(clamp(old_pos.x() + dx, 0.0, 1.0),
                   clamp(old_pos.y() + dy, 0.0, 1.0));
  const Vector2d motion = new_pos - old_pos;
  state_.gripper = new_pos;

  for (size_t i = 0; i < layout_.objects.size(); ++i) {
    const ObjectSpec& spec = layout_.objects[i];
    ObjectPose& pose = state_.objects[i];
    if (is_block(spec.kind)) {
      const double contact = layout_.gripper_radius + spec.radius;
      const Vector2d delta = pose.position - new_pos;
      const double dist = delta.norm();
      const double penetration = contact - dist;
      if (penetration > 0.0) {
        Vector2d dir;
        if (dist > 1e-12) {
          dir = delta / dist;
        } else if (motion.norm() > 1e-12) {
          dir = motion.normalized();
        } else {
          dir = Vector2d(1.0, 0.0);
        }
        pose.position += penetration * dir;
        pose.position.x() = clamp(pose.position.x(), spec.radius, 1.0 - spec.radius);
        pose.position.y() = clamp(pose.position.y(), spec.radius, 1.0 - spec.radius);
      }
    } else if (spec.kind == ObjectKind::door) {
      const Vector2d handle = handle_position(spec, pose);
      const double contact = layout_.gripper_radius + spec.radius;
      if ((new_pos - handle).norm() < contact) {
        const Vector2d tangent(-std::sin(pose.angle), std::cos(pose.angle));
        const double dtheta = motion.dot(tangent) / spec.arm_length;
        pose.angle = clamp(pose.angle + dtheta, spec.min_angle, spec.max_angle);
      }
    } else if (spec.kind == ObjectKind::drawer) {
      const Vector2d handle = handle_position(spec, pose);
      const double contact = layout_.gripper_radius + spec.radius;
      if ((new_pos - handle).norm() < contact) {
        const double de = motion.dot(spec.axis);
        pose.extension = clamp(pose.extension + de, 0.0, spec.max_extension);
      }
    }
  }

  ++state_.time;
  return observe(state_);
}

VectorXd TabletopEnv::render(const SimState& state) const {
  const int n = hw_;
  VectorXd img = VectorXd::Zero(n * n);
  auto paint_disc = [&](const Vector2d& center, double radius, double value) {
    for (int row = 0; row < n; ++row) {
      const double py = (row + 0.5) / n;
      for (int col = 0; col < n; ++col) {
        const double px = (col + 0.5) / n;
        if ((Vector2d(px, py) - center).norm() <= radius)
          img(row * n + col) = value;
      }
    }
  };

  for (size_t i = 0; i < layout_.objects.size(); ++i) {
    const ObjectSpec& spec = layout_.objects[i];
    const ObjectPose& pose = state.objects[i];
    const double handle_value = std::min(1.0, spec.intensity + 0.25);
    if (is_block(spec.kind)) {
      paint_disc(pose.position, spec.radius, spec.intensity);
    } else if (spec.kind == ObjectKind::door) {
      const Vector2d tip = handle_position(spec, pose);
      const double thickness = 0.030;
      for (int row = 0; row < n; ++row) {
        const double py = (row + 0.5) / n;
        for (int col = 0; col < n; ++col) {
          const double px = (col + 0.5) / n;
          if (point_segment_distance(Vector2d(px, py), spec.hinge, tip) <= thickness)
            img(row * n + col) = spec.intensity;
        }
      }
      paint_disc(tip, spec.radius, handle_value);
    } else if (spec.kind == ObjectKind::drawer) {
      const double depth = spec.handle_offset + pose.extension;
      const Vector2d perp(-spec.axis.y(), spec.axis.x());
      const double half_width = 0.065;
      for (int row = 0; row < n; ++row) {
        const double py = (row + 0.5) / n;
        for (int col = 0; col < n; ++col) {
          const double px = (col + 0.5) / n;
          const Vector2d rel = Vector2d(px, py) - spec.base;
          const double along = rel.dot(spec.axis);
          const double across = std::abs(rel.dot(perp));
          if (along >= 0.0 && along <= depth && across <= half_width)
            img(row * n + col) = spec.intensity;
        }
      }
      paint_disc(handle_position(spec, pose), spec.radius, handle_value);
    }
  }
  paint_disc(state.gripper, layout_.gripper_radius, 1.0);

  for (int i = 0; i < img.size(); ++i) img(i) = quantize_255(img(i));
  return img;
}

Observation TabletopEnv::observe(const SimState& state) const {
  Observation obs;
  obs.image = render(state);
  obs.truth = state;
  return obs;
}

InteractionReport interaction_report(const std::vector<Observation>& episode_obs,
                                     const LayoutSpec& layout,
                                     const MetricThresholds& thresholds) {
  if (episode_obs.empty())
    throw std::invalid_argument("interaction_report: empty episode");
  const size_t n_obj = layout.objects.size();
  InteractionReport report;
  report.max_displacement.assign(n_obj, 0.0);
  report.moved.assign(n_obj, false);
  const SimState& first = episode_obs.front().truth;
  for (const auto& obs : episode_obs) {
    for (size_t i = 0; i < n_obj; ++i) {
      const double d =
          pose_distance(layout.objects[i], obs.truth.objects[i], first.objects[i]);
      report.max_displacement[i] = std::max(report.max_displacement[i], d);
    }
  }
  for (size_t i = 0; i < n_obj; ++i)
    report.moved[i] = report.max_displacement[i] >
                      thresholds.threshold_for(layout.objects[i].kind);
  for (int id : layout.target_ids) report.target_moved = report.target_moved || report.moved[id];
  return report;
}

std::vector<Observation> generate_relevant_examples(const TabletopEnv& env,
                                                    int count, Rng& rng) {
  if (count < 1)
    throw std::invalid_argument("generate_relevant_examples: count must be >= 1");
  const LayoutSpec& layout = env.layout();
  std::vector<Observation> out;
  out.reserve(count);
  for (int k = 0; k < count; ++k) {
    SimState state = env.initial_state();
    const int target =
        layout.target_ids[rng.uniform_int(static_cast<int>(layout.target_ids.size()))];
    const ObjectSpec& spec = layout.objects[target];
    ObjectPose& pose = state.objects[target];
    switch (spec.kind) {
      case ObjectKind::block:
      case ObjectKind::distractor_block:
        break;  // the gripper placement alone marks the state as relevant
      case ObjectKind::door: {
        const double magnitude = rng.uniform(0.1, 0.8);
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        pose.angle = clamp(spec.init_angle + sign * magnitude, spec.min_angle,
                           spec.max_angle);
        break;
      }
      case ObjectKind::drawer:
        pose.extension = rng.uniform(0.0, spec.max_extension);
        break;
    }
    const Vector2d center = handle_position(spec, pose);
    const double r = layout.example_radius * std::sqrt(rng.uniform());
    const double phi = rng.uniform(0.0, 2.0 * M_PI);
    state.gripper = center + r * Vector2d(std::cos(phi), std::sin(phi));
    out.push_back(env.observe(state));
  }
  return out;
}

}  // namespace bee
