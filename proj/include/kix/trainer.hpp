#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kix/env.hpp"
#include "kix/graphs.hpp"
#include "kix/nets.hpp"
#include "kix/ppo.hpp"
#include "kix/rng.hpp"

namespace kix {

// --- Hierarchical rollout collection and the training loop ---
//
// The hierarchy runs in segments: the meta policy activates an object and
// picks an interaction, then a grid-level policy takes primitive actions
// until the interaction's effect is observed, the episode ends, or a step
// budget runs out. Collection merges segment trajectories from several
// deterministic workers; the training loop alternates collection with PPO
// updates and writes CSV logs plus checkpoints.

// One grid-level decision: the chosen primitive action with its log
// probability and the state value behind it.
struct PolicyDecision {
    int action = 0;
    double log_prob = 0.0;
    double value = 0.0;
};

// A grid-level policy as a callable, so tests can script exact action
// sequences while training plugs in networks. The observation tensor is the
// encoded view the decision must be based on.
using GridPolicy = std::function<PolicyDecision(const Tensor& obs, Rng& rng)>;

// Wraps a grid net as a GridPolicy: sample from the actor distribution or
// take its argmax (first index on ties). Runs without gradient tracking.
GridPolicy net_policy(const ParamSet& params, ChoiceMode mode);

// Called after every environment step with the post-step world, so callers
// can trace positions without re-running rollouts.
using StepHook = std::function<void(const WorldState&)>;

// What the meta level asked a segment to do: apply `lambda` to the world
// object `object_id`.
struct InteractionGoal {
    int object_id = -1;
    int lambda = -1;  // MetaAction
};

struct InteractionResult {
    InteractionGoal goal;
    bool success = false;    // goal predicate flipped from false to true
    int steps = 0;           // env steps the segment consumed (reach included)
    double env_reward = 0.0;  // env reward accumulated inside the segment
    bool env_done = false;
    bool env_won = false;
};

// True when the world currently satisfies the goal's effect: the object is
// carried (pickup), placed on the grid (drop), a destroyed box (reveal), or
// an open door (open / open-with-key).
bool goal_predicate(const WorldState& world, const InteractionGoal& goal);

// A goal object that no longer exists or sits inside a box cannot be
// interacted with; such segments fail immediately with zero steps.
bool goal_is_stale(const WorldState& world, int object_id);

// Runs one interaction segment. Success requires the goal predicate to flip
// from false at segment start to true, so repeating an already-achieved
// effect never counts; open-with-key additionally requires the door to start
// locked. Each step's record carries reward 1 on the success step and 0
// otherwise; the final record is marked done (segments are episodes for the
// grid-level learner). Throws on a finished world or an invalid lambda.
std::pair<InteractionResult, Trajectory> run_interaction_segment(
    WorldState& world, const InteractionGoal& goal, const GridPolicy& policy, int budget,
    Rng& rng, const StepHook& on_step = {});

struct ReachOutcome {
    InteractionResult result;  // combined over both phases
    bool reach_success = false;
    Trajectory reach;        // empty when the target was already faced
    Trajectory interaction;  // empty unless the reach phase succeeded
};

// Reach-then-interact segment: a reach policy first walks until the agent
// faces the goal object (carried objects count as reached, and facing it at
// step zero succeeds without consuming steps), earning reward 1 on the step
// that reaches it. Only a successful reach runs the interaction phase.
ReachOutcome run_reach_then_interact(WorldState& world, const InteractionGoal& goal,
                                     const GridPolicy& reach_policy,
                                     const GridPolicy& interaction_policy, int reach_budget,
                                     int interaction_budget, Rng& rng,
                                     const StepHook& on_step = {});

// Uniform-random actions for states where the scene offers no candidate
// objects; stops early when the episode ends. Returns the steps taken and
// the env reward collected.
std::pair<int, double> exploration_fallback(WorldState& world, int budget, Rng& rng,
                                            const StepHook& on_step = {});

// Meta-level reward for one completed segment: 0.1 for the achieved
// interaction plus, when the env goal was reached inside the segment, 1 and
// the env's own terminal reward.
double meta_reward(bool segment_success, bool env_won, double env_reward);

// --- Batch collection ---

struct VariantConfig {
    Variant variant = Variant::KIX1;
    int task = 0;
    LayoutConfig layout;           // see layout_full() / layout_mini()
    int meta_batch = 128;          // meta records per collection round (split across workers)
    int interaction_budget = 64;   // env-step budget per interaction segment
    int reach_budget = 64;         // env-step budget per reach phase
    int fallback_budget = 16;      // env-step budget per no-candidate fallback
    int base_horizon = 256;        // grid records per round for the flat agent (split across workers)
    long total_env_steps = 200000;
    int workers = 4;
    int eval_cadence = 10;   // rounds between eval snapshots and checkpoints
    int eval_episodes = 20;  // episodes per eval snapshot

    // Throws ConfigError on non-positive budgets, batch sizes, worker counts,
    // cadences, or a negative step total.
    void validate() const;
};

// A worker's episode stream survives across collection rounds. Episode seeds
// derive from (root seed, worker index, episode ordinal), so a worker always
// replays the same episode sequence regardless of how many rounds ran or how
// many other workers exist.
struct WorkerState {
    int index = 0;
    std::uint64_t episodes_started = 0;
    bool world_live = false;
    WorldState world;
    Rng rng;  // per-episode sampling stream
};

std::vector<WorkerState> make_workers(int count);

struct CollectStats {
    long env_steps = 0;  // == interaction + reach + fallback steps
    long interaction_steps = 0;
    long reach_steps = 0;
    long fallback_steps = 0;
    long segments = 0;
    long segment_successes = 0;
    long episodes_finished = 0;
    long env_wins = 0;
    double env_return = 0.0;  // env reward summed over the round

    CollectStats& operator+=(const CollectStats& o);
};

// One collection round: the merged meta trajectory plus the grid-level
// trajectories its segments produced, grouped per interaction policy.
struct MetaBatch {
    Trajectory meta;
    std::array<Trajectory, kNumMetaActions> interaction;
    Trajectory reach;  // KIX2 only
    Trajectory base;   // flat agent only
    CollectStats stats;
};

// Collects exactly cfg.meta_batch meta records across cfg.workers threads
// (worker w takes the w-th share of the batch). Each worker runs
// recommend -> segment -> meta record; scenes with no candidates fall back
// to exploration without producing a record. Results merge in worker order,
// so the outcome is independent of thread scheduling. Unfinished trailing
// records are cut with the next state's value as bootstrap. Throws
// ConfigError for the flat variant.
MetaBatch collect_meta_batch(const PolicyRepository& repo, const VariantConfig& cfg,
                             std::vector<WorkerState>& workers, std::uint64_t root_seed);

// Flat-agent counterpart: exactly cfg.base_horizon grid records per round,
// split across workers the same way. Throws ConfigError for hierarchical
// variants.
MetaBatch collect_base_batch(const PolicyRepository& repo, const VariantConfig& cfg,
                             std::vector<WorkerState>& workers, std::uint64_t root_seed);

// --- Evaluation rollouts ---

struct EpisodeOutcome {
    double env_return = 0.0;
    bool success = false;
    long steps = 0;
};

// Plays one full episode with the variant's decision loop (meta
// recommendations driving segments, or the flat policy). Greedy mode makes
// the episode a pure function of the world and rng seeds.
EpisodeOutcome play_episode(const PolicyRepository& repo, const VariantConfig& cfg,
                            WorldState& world, Rng& rng, ChoiceMode mode,
                            const StepHook& on_step = {});

struct EvalSummary {
    int episodes = 0;
    double success_rate = 0.0;
    double mean_return = 0.0;
    double mean_steps = 0.0;
};

// Greedy evaluation over `episodes` fresh worlds seeded from `seed`.
EvalSummary evaluate_repository(const PolicyRepository& repo, const VariantConfig& cfg,
                                int episodes, std::uint64_t seed);

// --- Checkpoints ---

struct Checkpoint {
    PolicyRepository repo;
    VariantConfig config;
    PpoConfig meta_ppo;
    PpoConfig prim_ppo;
};

// Binary checkpoint: a version line, the configuration as key=value text,
// one parameter blob per repository role, and a trailing checksum over
// everything before it. Loading verifies the checksum, the version, and
// that the stored roles match the variant exactly; parameters round-trip
// bit-identically. Optimizer state is not stored. Throws IoError on any
// mismatch.
void save_checkpoint(const std::string& path, const PolicyRepository& repo,
                     const VariantConfig& config, const PpoConfig& meta_ppo,
                     const PpoConfig& prim_ppo);
Checkpoint load_checkpoint(const std::string& path);

// --- Training loop ---

// PPO settings tuned per level: the meta policy updates in small minibatches
// with a higher learning rate; grid-level policies use the plain defaults.
PpoConfig default_meta_ppo();
PpoConfig default_prim_ppo();

struct TrainConfig {
    VariantConfig variant;
    PpoConfig meta_ppo = default_meta_ppo();
    PpoConfig prim_ppo = default_prim_ppo();
    std::uint64_t seed = 1;
    std::string out_dir = "runs/default";
};

struct TrainOutcome {
    long env_steps = 0;
    int updates = 0;
    long episodes = 0;
    std::string final_checkpoint;
    EvalSummary final_eval;
};

// Runs collect/update rounds until the env-step total is met, then a final
// greedy evaluation. Writes to cfg.out_dir:
//   train_log.csv   one row per round (steps, episodes, success rates)
//   losses.csv      one row per level update (losses, entropy, grad norm)
//   eval_log.csv    one row per eval snapshot
//   checkpoints/    ckpt_init.kix, periodic ckpt_<round>.kix, ckpt_final.kix
// A numeric failure during updates aborts the run; the last written
// checkpoint stays valid. With total_env_steps == 0 only the initialization
// checkpoint and CSV headers are produced. Identical configs and seeds
// produce byte-identical logs and checkpoints.
TrainOutcome train(const TrainConfig& cfg);

}  // namespace kix
