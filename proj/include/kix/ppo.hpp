#pragma once

#include <string>
#include <vector>

#include "kix/layers.hpp"
#include "kix/optim.hpp"
#include "kix/rng.hpp"
#include "kix/tensor.hpp"

namespace kix {

// --- Experience and PPO updates ---
//
// One PPO implementation serves every policy level. A trajectory stores, per
// step, the state needed to re-run the policy (an encoded graph for the meta
// level, an observation tensor otherwise) together with the action, the
// behavior log-prob and value at collection time, the reward, and the done
// flag.

enum class Level { Meta = 0, Interaction = 1, Reach = 2, Base = 3 };

const char* level_name(Level level);

struct StepRecord {
    GraphBatch graph;   // meta-level state (ignored on grid levels)
    Tensor obs;         // grid-level state (undefined on the meta level)
    int action = -1;
    double log_prob = 0.0;   // log pi(action | state) at collection; <= 0
    double value = 0.0;      // V(state) at collection
    double next_value = 0.0; // V(successor state) at collection; masked when done
    double reward = 0.0;
    bool done = false;       // marks a segment end
    // True when collection stopped here mid-segment (end of a worker's chunk
    // or of the collection horizon): the successor exists but is not in this
    // trajectory, so returns bootstrap from next_value. A trajectory merged
    // from several workers carries one cut per unfinished chunk.
    bool cut = false;
};

struct Trajectory {
    Level level = Level::Interaction;
    double gamma = 0.99;
    std::vector<StepRecord> steps;

    size_t size() const { return steps.size(); }
    bool empty() const { return steps.empty(); }
};

struct PpoConfig {
    double clip_eps = 0.2;
    double entropy_coef = 0.01;  // zeta^h
    double value_coef = 0.5;     // zeta^c
    double lr = 2.5e-4;
    int epochs = 4;
    int minibatch = 64;
    double gamma_meta = 0.99;
    double gamma_prim = 0.99;
    double grad_clip = 0.5;
    bool normalize_advantages = true;

    // Throws ConfigError unless clip_eps is in (0,1), coefficients and rates
    // are >= 0, and epochs/minibatch are >= 1.
    void validate() const;
};

// One-step advantage estimates A_t = r_t + gamma * next_value_t * (1 -
// done_t) - value_t, using the successor values recorded at collection.
// Throws NumericError on an empty trajectory.
std::vector<double> one_step_advantage(const Trajectory& traj);

// Discounted returns by backward recursion R_t = r_t + gamma * R_{t+1} * (1 -
// done_t); cut records (including an unflagged final record) bootstrap
// R_{t+1} from their recorded next_value. Empty trajectories yield an empty
// vector.
std::vector<double> discounted_returns(const Trajectory& traj);

// Shifts to mean zero and scales to unit standard deviation (population form),
// with the divisor floored at std_floor.
std::vector<double> normalize_advantage_batch(const std::vector<double>& adv, double std_floor = 1e-8);

// -mean(min(ratio * A, clip(ratio, 1-eps, 1+eps) * A)) with ratio =
// exp(new - old). Differentiable through new_log_probs. Throws NumericError on
// length mismatch or a non-finite ratio.
Tensor clipped_actor_loss(const Tensor& new_log_probs, const std::vector<double>& old_log_probs,
                          const std::vector<double>& advantages, double clip_eps);

// mean(0.5 * (V - R)^2), differentiable through values.
Tensor critic_loss(const Tensor& values, const std::vector<double>& returns);

// Mean Shannon entropy (natural log) over a batch of distributions, with
// 0 * log 0 treated as zero. Each input is a 1-D probability vector.
Tensor entropy_bonus(const std::vector<Tensor>& distributions);

// What one update did, for the training CSV. Losses and entropy are averaged
// over all minibatch steps; grad_norm is the pre-clip global norm average.
struct LossReport {
    double actor_loss = 0.0;
    double critic_loss = 0.0;
    double entropy = 0.0;
    double grad_norm = 0.0;
    int minibatches = 0;
};

// Runs `epochs` passes of shuffled minibatches over the trajectory. Each
// minibatch re-runs the policy on its states, assembles
//   L = L_actor - entropy_coef * H + value_coef * L_critic
// on advantages normalized per update, and takes one clipped-gradient Adam
// step. Any numeric failure restores parameters and optimizer state to the
// pre-update snapshot and rethrows.
LossReport ppo_update(ParamSet& params, const Trajectory& traj, const PpoConfig& cfg, Rng& rng);

}  // namespace kix
