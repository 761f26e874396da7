#pragma once

#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "mvplan/model.hpp"

namespace mvplan {

/// One vehicle as seen by the decision layer.
struct FlowVehicle {
  int id = 0;
  bool controlled = false;
  VehicleGeometry geometry;
  DecisionState state;
  int target_lane = 0;
  double gamma = 0.5;
  double desired_speed = 16.7;
  Action last_action = Action::KS;
  double target_progress = 0.0;  ///< distance already driven inside the target lane
};

/// Joint decision-level snapshot at one decision step.
struct FlowState {
  int step = 0;
  std::vector<FlowVehicle> vehicles;  ///< sorted by id

  std::vector<std::size_t> controlled_indices() const;
  const FlowVehicle& vehicle(int id) const;  ///< throws UnknownVehicle
};

/// One action per controlled vehicle, in the order of controlled_indices().
using JointAction = std::vector<Action>;

struct Combination {
  JointAction actions;
  FlowState next;
};

/// Road and parameters shared by every decision-level predicate.
struct FlowModel {
  const Road* road = nullptr;
  ActionParams actions;
  SafetyParams safety;

  double speed_limit() const { return road->speed_limit; }
  bool in_lane(double d, int lane) const;

  /// Feasible single-vehicle actions (border, ramp end and safe-speed checks
  /// against the other vehicles' one-step predictions). Never empty: when
  /// nothing passes, or the safe-speed window is empty, only DC is returned.
  std::vector<Action> enumerate_vehicle_actions(const FlowState& flow, int vehicle_id) const;

  /// One-step KL successor of an uncontrolled vehicle (car-following law,
  /// 0.1 s integration over the decision step, others at constant speed).
  DecisionState advance_uncontrolled(const FlowState& flow, std::size_t index) const;

  /// Pairwise admissibility of two successor states: no rectangle overlap,
  /// safe following distance when sharing a lane, and no transition conflict.
  bool pair_admissible(const FlowVehicle& a, const DecisionState& a_next, const FlowVehicle& b,
                       const DecisionState& b_next) const;

  /// Rectangle overlap of two decision-level poses.
  static bool overlaps(const FlowVehicle& a, const DecisionState& sa, const FlowVehicle& b, const DecisionState& sb);
  /// Lane-claim conflict during the step (swap or unsafe cut-in).
  bool transition_conflict(const FlowVehicle& a, const DecisionState& a_next, const FlowVehicle& b,
                           const DecisionState& b_next) const;
  /// Safe following between two successor states that share a lane.
  bool following_safe(const FlowVehicle& a, const DecisionState& sa, const FlowVehicle& b,
                      const DecisionState& sb) const;

  /// Joint successor of `flow` under `joint` (uncontrolled vehicles advance by KL).
  FlowState successor(const FlowState& flow, const JointAction& joint) const;

  /// Valid joint actions with their successors, in lexicographic order of
  /// the per-vehicle action sets. An empty result means no valid combination.
  std::vector<Combination> expand_combinations(const FlowState& flow,
                                               const std::vector<std::vector<Action>>& action_sets) const;

  /// Valid joint actions only (same filter and order as expand_combinations).
  std::vector<JointAction> valid_joint_actions(const FlowState& flow,
                                               const std::vector<std::vector<Action>>& action_sets) const;

  /// Per-vehicle valid action sets for all controlled vehicles.
  std::vector<std::vector<Action>> action_sets(const FlowState& flow) const;

 private:
  std::vector<DecisionState> one_step_predictions(const FlowState& flow) const;
  std::vector<Action> valid_actions(const FlowState& flow, std::size_t index,
                                    const std::vector<DecisionState>& predicted) const;
};

struct RewardParams {
  int horizon_steps = 7;  ///< T_max in the completion-time term
  double w_target = 0.4;
  double w_center = 0.3;
  double w_consistency = 0.3;
};

/// Incremental per-vehicle reward bookkeeping along a chain of states.
struct ChainStats {
  int states = 0;
  double center_sum = 0.0;
  int actions = 0;
  int switches = 0;
  Action last_action = Action::KS;
  int streak_start = -1;  ///< first index of the current in-target streak, -1 if outside
  double target_distance = 0.0;
  double last_s = 0.0;

  void add_state(const FlowModel& model, const DecisionState& st, int target_lane);
  void add_action(Action a);
  /// Extends a completed chain with `steps` lane-keeping KS steps on the lane center.
  void pad_completed(int steps);
  double reward(const RewardParams& p) const;
};

/// R_i = 0.4 r_target + 0.3 r_center + 0.3 r_consistency for a chain of
/// states (n + 1 entries) and the actions between them (n entries).
double vehicle_reward(const FlowModel& model, const std::vector<DecisionState>& states,
                      const std::vector<Action>& actions, int target_lane, const RewardParams& p = {});

/// Cooperation-weighted flow reward
///   X = 1/K sum_i (R_i + gamma_i sum_{j != i} R_j) / (1 + (K - 1) gamma_i).
double flow_reward(const std::vector<double>& rewards, const std::vector<double>& gammas);

/// mean + 2 C_p sqrt(2 ln n / n_j).
double uct_value(double mean, int parent_visits, int child_visits, double cp);

struct MctsConfig {
  double cp = 1.0 / std::numbers::sqrt2;
  int max_iterations = 3000;
  int max_depth = 7;
  double termination_distance = 20.0;
  std::uint64_t seed = 0;
  bool pruning = true;  ///< false: expand the full 5^K product without any filtering
  /// Search-level restriction on top of the valid sets: lane changes only
  /// toward the target lane, and a vehicle on a lane boundary must finish or
  /// revert its lane change.
  bool intention_masking = true;
};

/// The masked subset of `valid` for vehicle `v` (falls back to `valid` when
/// the mask would leave nothing).
std::vector<Action> intention_mask(const FlowModel& model, const FlowVehicle& v, const std::vector<Action>& valid);

struct Metanode {
  FlowState state;
  JointAction incoming;  ///< empty at the root
  int parent = -1;
  int depth = 0;
  int visits = 0;
  double total_reward = 0.0;
  std::vector<int> children;
  std::vector<JointAction> untried;
  bool initialized = false;
  bool terminal = false;
  bool completed = false;  ///< terminal because every intention is complete
  std::vector<ChainStats> stats;  ///< one per controlled vehicle, root .. this node

  double mean() const { return visits > 0 ? total_reward / visits : 0.0; }
};

/// Selects among the children of a fully expanded node by the UCT rule,
/// lowest index on ties. Throws NotFullyExpanded.
int uct_select(const std::vector<Metanode>& tree, int node, double cp);

/// Adds `reward` to every node on the root-to-leaf `path`.
void backpropagate(std::vector<Metanode>& tree, const std::vector<int>& path, double reward);

struct SearchStats {
  int expanded_nodes = 0;  ///< metanodes created, root included
  int iterations = 0;
  int root_combinations = 0;
};

struct DecisionOutput {
  std::vector<int> vehicle_ids;               ///< controlled ids
  std::vector<std::vector<Action>> sequences;  ///< per controlled vehicle
  std::vector<FlowState> chain;               ///< states along the sequence, chain[0] = input
  bool emergency = false;                     ///< no valid combination at the root
  SearchStats stats;
};

std::string_view signal_annotation(Action a);

/// Builds the search tree and extracts the greedy max-mean action sequence.
class MctsSearch {
 public:
  MctsSearch(FlowModel model, MctsConfig config, RewardParams reward = {});

  DecisionOutput search(const FlowState& root);

  /// Random playout from `node` until termination; returns the flow reward.
  double rollout(int node, std::uint64_t stream);

  const std::vector<Metanode>& tree() const { return tree_; }
  /// Root-only tree for unit tests of rollout and expansion.
  void reset(const FlowState& root);
  int expand_one(int node);
  void initialize(int node);
  /// Flow reward of a chain ending at `depth`; chains that end because every
  /// intention is complete are padded with KS steps up to the horizon.
  double terminal_reward(std::vector<ChainStats> stats, int depth) const;

 private:
  bool all_complete(const std::vector<ChainStats>& stats) const;
  std::vector<JointAction> joint_actions(const FlowState& flow) const;

  FlowModel model_;
  MctsConfig config_;
  RewardParams reward_;
  std::vector<Metanode> tree_;
  std::vector<double> gammas_;
  std::vector<int> targets_;
};

/// DecisionOutput as a JSON document: per-vehicle tags, signal annotations, stats.
std::string serialize_decision(const DecisionOutput& out);
/// Reads back ids, sequences, emergency flag and stats (the chain is not serialized).
DecisionOutput parse_decision(std::string_view text);

/// Decision-level view of a scenario's initial state.
FlowState initial_flow(const Scenario& scenario);
FlowModel flow_model(const Scenario& scenario);

}  // namespace mvplan
