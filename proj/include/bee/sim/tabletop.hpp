#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "bee/core/rng.hpp"
#include "json.hpp"

namespace bee {

using Eigen::Vector2d;
using Eigen::VectorXd;

enum class ObjectKind { block, door, drawer, distractor_block };

ObjectKind object_kind_from_string(const std::string& s);
std::string to_string(ObjectKind kind);

/// Static description of one scene object. Blocks use init_position; the
/// door uses hinge/arm_length/angle limits; the drawer slides along `axis`
/// from `base` with its handle at base + axis * (handle_offset + extension).
struct ObjectSpec {
  ObjectKind kind = ObjectKind::block;
  std::string name;
  double intensity = 0.5;  // render brightness in (0, 1]
  double radius = 0.06;    // block radius / handle contact radius

  Vector2d init_position{0.5, 0.5};

  Vector2d hinge{0.0, 0.5};
  double arm_length = 0.22;
  double init_angle = 0.0;
  double min_angle = -1.2;
  double max_angle = 1.2;

  Vector2d base{0.5, 0.0};
  Vector2d axis{0.0, 1.0};
  double handle_offset = 0.10;
  double init_extension = 0.0;
  double max_extension = 0.28;
};

/// Mutable pose of one object; which fields apply depends on the kind.
struct ObjectPose {
  Vector2d position{0.0, 0.0};  // blocks
  double angle = 0.0;           // door
  double extension = 0.0;       // drawer
};

struct SimState {
  Vector2d gripper{0.5, 0.5};
  std::vector<ObjectPose> objects;
  int time = 0;
};

/// Gripper velocity command; each component is clipped to [-1, 1] and then
/// scaled by the layout's max_step.
struct Action {
  double dx = 0.0;
  double dy = 0.0;
};

struct Observation {
  VectorXd image;  // h*w grayscale, row-major, values on the 1/255 grid
  SimState truth;  // metrics and example generation only; never agent input
};

struct LayoutSpec {
  std::vector<ObjectSpec> objects;
  std::vector<int> target_ids;
  int horizon = 50;
  Vector2d gripper_start{0.5, 0.85};
  double gripper_radius = 0.05;
  double max_step = 0.05;
  double example_radius = 0.06;  // gripper-to-target distance in examples

  void validate() const;

  /// Built-in scenes: "blocks" (one target block, two distractors),
  /// "door" (hinged door, two distractor blocks),
  /// "drawer" (prismatic drawer, two distractor blocks).
  static LayoutSpec preset(const std::string& name);
  static LayoutSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Position of the graspable region of an object at a given pose: block
/// center, door handle, or drawer handle.
Vector2d handle_position(const ObjectSpec& spec, const ObjectPose& pose);

/// Scalar pose distance used by interaction metrics: block position
/// distance, |angle delta| for doors, |extension delta| for drawers.
double pose_distance(const ObjectSpec& spec, const ObjectPose& a,
                     const ObjectPose& b);

struct MetricThresholds {
  double block = 0.08;    // table units
  double door = 0.15;     // radians
  double drawer = 0.06;   // extension units
  double threshold_for(ObjectKind kind) const;
};

class Env {
 public:
  virtual ~Env() = default;
  virtual Observation reset() = 0;
  virtual Observation step(const Action& action) = 0;
  virtual int horizon() const = 0;
  virtual const LayoutSpec& layout() const = 0;
};

/// Deterministic 2-D tabletop: a point gripper pushes blocks by overlap
/// resolution and drags the door/drawer handles along their one degree of
/// freedom. Rendering is a pure function of the state.
class TabletopEnv : public Env {
 public:
  explicit TabletopEnv(LayoutSpec layout, int image_hw = 16);

  Observation reset() override;
  Observation step(const Action& action) override;
  int horizon() const override { return layout_.horizon; }
  const LayoutSpec& layout() const override { return layout_; }

  int image_hw() const { return hw_; }
  const SimState& state() const { return state_; }

  VectorXd render(const SimState& state) const;
  Observation observe(const SimState& state) const;

  SimState initial_state() const;

 private:
  LayoutSpec layout_;
  int hw_;
  SimState state_;
};

struct InteractionReport {
  std::vector<double> max_displacement;  // per object
  std::vector<bool> moved;               // displacement > threshold
  bool target_moved = false;             // any target object moved
};

/// Episode-level interaction metrics from the ground-truth pose
/// trajectories recorded in the observations.
InteractionReport interaction_report(const std::vector<Observation>& episode_obs,
                                     const LayoutSpec& layout,
                                     const MetricThresholds& thresholds = {});

/// Procedural stand-in for the human: states with the gripper within
/// example_radius of a target's handle and the target's own pose drawn from
/// its relevant range (blocks stay put; the door angle is drawn from
/// +/-[0.1, 0.8] rad; the drawer extension from [0, max]). Distractors stay
/// at their initial poses.
std::vector<Observation> generate_relevant_examples(const TabletopEnv& env,
                                                    int count, Rng& rng);

}  // namespace bee
