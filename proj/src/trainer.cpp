#include "kix/trainer.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <utility>

#include "kix/errors.hpp"
#include "kix/textio.hpp"

namespace kix {

namespace {

void faced_cell(const WorldState& world, int& fx, int& fy) {
    int dx = 0, dy = 0;
    switch (world.heading) {
        case kNorth: dy = -1; break;
        case kEast: dx = 1; break;
        case kSouth: dy = 1; break;
        default: dx = -1; break;
    }
    fx = world.agent_x + dx;
    fy = world.agent_y + dy;
}

void check_lambda(int lambda) {
    if (lambda < 0 || lambda >= kNumMetaActions)
        throw ConfigError("segment goal holds an invalid interaction index " + std::to_string(lambda));
}

// The reach phase targets the cell the object occupies; a carried object
// needs no travel at all.
bool target_reached(const WorldState& world, int object_id) {
    ObjectLocation loc = find_object(world, object_id);
    if (loc.where == ObjectLocation::Carried) return true;
    if (loc.where != ObjectLocation::OnGrid) return false;
    int fx = 0, fy = 0;
    faced_cell(world, fx, fy);
    return loc.x == fx && loc.y == fy;
}

}  // namespace

GridPolicy net_policy(const ParamSet& params, ChoiceMode mode) {
    // Callers keep the owning repository alive for the policy's lifetime.
    const ParamSet* p = &params;
    return [p, mode](const Tensor& obs, Rng& rng) {
        NoGradGuard guard;
        PolicyOutput out = grid_forward(*p, obs);
        PolicyDecision d;
        if (mode == ChoiceMode::Sample) {
            auto [action, log_prob] = categorical_sample(out.probs.value(), rng);
            d.action = action;
            d.log_prob = log_prob;
        } else {
            const std::vector<double>& probs = out.probs.value();
            int best = 0;
            for (int i = 1; i < static_cast<int>(probs.size()); ++i)
                if (probs[i] > probs[best]) best = i;
            d.action = best;
            d.log_prob = out.log_probs.value()[static_cast<size_t>(best)];
        }
        d.value = out.value.item();
        return d;
    };
}

// --- Segment execution ---

bool goal_predicate(const WorldState& world, const InteractionGoal& goal) {
    check_lambda(goal.lambda);
    ObjectLocation loc = find_object(world, goal.object_id);
    switch (goal.lambda) {
        case kMetaPickup:
            return loc.where == ObjectLocation::Carried;
        case kMetaDrop:
            return loc.where == ObjectLocation::OnGrid;
        case kMetaReveal: {
            const auto& ids = world.destroyed_box_ids;
            return std::find(ids.begin(), ids.end(), goal.object_id) != ids.end();
        }
        default:  // kMetaOpen, kMetaOpenWithKey
            return loc.where == ObjectLocation::OnGrid && loc.type == kCellDoor &&
                   loc.door_state == kDoorOpen;
    }
}

bool goal_is_stale(const WorldState& world, int object_id) {
    ObjectLocation loc = find_object(world, object_id);
    return loc.where == ObjectLocation::Gone || loc.where == ObjectLocation::InBox;
}

std::pair<InteractionResult, Trajectory> run_interaction_segment(
    WorldState& world, const InteractionGoal& goal, const GridPolicy& policy, int budget, Rng& rng,
    const StepHook& on_step) {
    check_lambda(goal.lambda);
    if (budget < 1) throw ConfigError("interaction segment budget must be positive");
    if (world.done) throw std::logic_error("interaction segment started on a finished episode");

    InteractionResult res;
    res.goal = goal;
    Trajectory traj;
    traj.level = Level::Interaction;

    // Reveal destroys its box, so a revealed goal reads as gone; every other
    // stale id simply cannot be acted on any more.
    if (goal_is_stale(world, goal.object_id)) return {res, traj};

    const bool start_pred = goal_predicate(world, goal);
    bool start_locked = false;
    if (goal.lambda == kMetaOpenWithKey) {
        ObjectLocation loc = find_object(world, goal.object_id);
        start_locked = loc.type == kCellDoor && loc.door_state == kDoorLocked;
    }

    for (int t = 0; t < budget; ++t) {
        Tensor x = encode_observation(render_observation(world), goal.object_id);
        PolicyDecision d = policy(x, rng);
        StepResult sr = step(world, d.action);
        res.steps += 1;
        res.env_reward += sr.reward;
        if (on_step) on_step(world);

        // Success means the effect appeared during this segment; open-with-key
        // only counts when the door actually started locked.
        const bool achieved = !start_pred && goal_predicate(world, goal) &&
                              (goal.lambda != kMetaOpenWithKey || start_locked);
        StepRecord r;
        r.obs = x;
        r.action = d.action;
        r.log_prob = d.log_prob;
        r.value = d.value;
        r.reward = achieved ? 1.0 : 0.0;
        if (!traj.steps.empty()) traj.steps.back().next_value = d.value;
        traj.steps.push_back(std::move(r));
        if (achieved) {
            res.success = true;
            break;
        }
        if (world.done) break;
    }
    // Segments are complete episodes for the grid-level learner.
    if (!traj.steps.empty()) traj.steps.back().done = true;
    res.env_done = world.done;
    res.env_won = world.success;
    return {res, traj};
}

ReachOutcome run_reach_then_interact(WorldState& world, const InteractionGoal& goal,
                                     const GridPolicy& reach_policy,
                                     const GridPolicy& interaction_policy, int reach_budget,
                                     int interaction_budget, Rng& rng, const StepHook& on_step) {
    check_lambda(goal.lambda);
    if (reach_budget < 1) throw ConfigError("reach budget must be positive");
    if (world.done) throw std::logic_error("reach segment started on a finished episode");

    ReachOutcome out;
    out.result.goal = goal;
    out.reach.level = Level::Reach;
    out.interaction.level = Level::Interaction;
    if (goal_is_stale(world, goal.object_id)) return out;

    if (target_reached(world, goal.object_id)) {
        out.reach_success = true;
    } else {
        for (int t = 0; t < reach_budget; ++t) {
            Tensor x = encode_observation(render_observation(world), goal.object_id);
            PolicyDecision d = reach_policy(x, rng);
            StepResult sr = step(world, d.action);
            out.result.steps += 1;
            out.result.env_reward += sr.reward;
            if (on_step) on_step(world);

            const bool reached = target_reached(world, goal.object_id);
            StepRecord r;
            r.obs = x;
            r.action = d.action;
            r.log_prob = d.log_prob;
            r.value = d.value;
            r.reward = reached ? 1.0 : 0.0;
            if (!out.reach.steps.empty()) out.reach.steps.back().next_value = d.value;
            out.reach.steps.push_back(std::move(r));
            if (reached) {
                out.reach_success = true;
                break;
            }
            if (world.done) break;
        }
        if (!out.reach.steps.empty()) out.reach.steps.back().done = true;
    }

    if (out.reach_success && !world.done) {
        auto [ires, itraj] =
            run_interaction_segment(world, goal, interaction_policy, interaction_budget, rng, on_step);
        out.result.success = ires.success;
        out.result.steps += ires.steps;
        out.result.env_reward += ires.env_reward;
        out.interaction = std::move(itraj);
    }
    out.result.env_done = world.done;
    out.result.env_won = world.success;
    return out;
}

std::pair<int, double> exploration_fallback(WorldState& world, int budget, Rng& rng,
                                            const StepHook& on_step) {
    if (world.done) throw std::logic_error("exploration fallback started on a finished episode");
    int taken = 0;
    double reward = 0.0;
    for (int t = 0; t < budget && !world.done; ++t) {
        StepResult sr = step(world, static_cast<int>(rng.below(kNumActions)));
        taken += 1;
        reward += sr.reward;
        if (on_step) on_step(world);
    }
    return {taken, reward};
}

double meta_reward(bool segment_success, bool env_won, double env_reward) {
    double r = segment_success ? 0.1 : 0.0;
    if (env_won) r += 1.0 + env_reward;
    return r;
}

// --- Batch collection ---

void VariantConfig::validate() const {
    if (task < 0 || task > 3) throw ConfigError("task must be 0..3");
    if (meta_batch < 1) throw ConfigError("meta_batch must be positive");
    if (interaction_budget < 1) throw ConfigError("interaction_budget must be positive");
    if (reach_budget < 1) throw ConfigError("reach_budget must be positive");
    if (fallback_budget < 1) throw ConfigError("fallback_budget must be positive");
    if (base_horizon < 1) throw ConfigError("base_horizon must be positive");
    if (total_env_steps < 0) throw ConfigError("total_env_steps must be non-negative");
    if (workers < 1) throw ConfigError("workers must be positive");
    if (eval_cadence < 1) throw ConfigError("eval_cadence must be positive");
    if (eval_episodes < 0) throw ConfigError("eval_episodes must be non-negative");
}

std::vector<WorkerState> make_workers(int count) {
    if (count < 1) throw ConfigError("workers must be positive");
    std::vector<WorkerState> out(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) out[static_cast<size_t>(i)].index = i;
    return out;
}

CollectStats& CollectStats::operator+=(const CollectStats& o) {
    env_steps += o.env_steps;
    interaction_steps += o.interaction_steps;
    reach_steps += o.reach_steps;
    fallback_steps += o.fallback_steps;
    segments += o.segments;
    segment_successes += o.segment_successes;
    episodes_finished += o.episodes_finished;
    env_wins += o.env_wins;
    env_return += o.env_return;
    return *this;
}

namespace {

struct WorkerChunk {
    std::vector<StepRecord> meta;
    std::array<std::vector<StepRecord>, kNumMetaActions> interaction;
    std::vector<StepRecord> reach;
    std::vector<StepRecord> base;
    CollectStats stats;
};

int worker_quota(int total, int workers, int w) {
    return total / workers + (w < total % workers ? 1 : 0);
}

// Episode seeds depend only on (root, worker, ordinal); rounds and worker
// counts never shift the stream a given worker slot replays.
void ensure_episode(WorkerState& ws, const VariantConfig& cfg, std::uint64_t root) {
    if (ws.world_live) return;
    const std::uint64_t e = ws.episodes_started;
    const std::uint64_t w = static_cast<std::uint64_t>(ws.index);
    ws.world = generate_world(derive_seed(root, w, 2 * e), cfg.task, cfg.layout);
    ws.rng = Rng(derive_seed(root, w, 2 * e + 1));
    ws.world_live = true;
    ws.episodes_started = e + 1;
}

void finish_episode(WorkerState& ws, WorkerChunk& out) {
    out.stats.episodes_finished += 1;
    if (ws.world.success) out.stats.env_wins += 1;
    // An episode that ends outside a recorded segment (exploration fallback)
    // leaves its last meta record open; the meta-level episode ended here.
    if (!out.meta.empty() && !out.meta.back().done) out.meta.back().done = true;
    ws.world_live = false;
}

// Value bootstrap for a batch cut: what the meta critic assigns to the state
// the next record would have been collected from. Probes with a copied rng so
// the live sampling stream is untouched.
double peek_meta_value(const WorkerState& ws, const MetaEvaluator& eval) {
    Observation obs = render_observation(ws.world);
    InstanceGraph gi = build_instance_graph(obs, ws.world.inventory);
    TypeGraph gk = map_to_type_graph(gi);
    Rng probe = ws.rng;
    auto rec = recommend(gi, gk, eval, ChoiceMode::Sample, probe);
    return rec ? rec->value : 0.0;
}

void worker_collect_hier(const PolicyRepository& repo, const VariantConfig& cfg, WorkerState& ws,
                         std::uint64_t root, int quota, WorkerChunk& out) {
    NoGradGuard guard;
    MetaEvaluator eval = make_meta_evaluator(repo.meta);
    std::array<GridPolicy, kNumMetaActions> inter;
    for (int l = 0; l < kNumMetaActions; ++l)
        inter[static_cast<size_t>(l)] = net_policy(repo.interaction[static_cast<size_t>(l)], ChoiceMode::Sample);
    GridPolicy reach_policy;
    if (repo.has_reach()) reach_policy = net_policy(repo.reach, ChoiceMode::Sample);

    while (static_cast<int>(out.meta.size()) < quota) {
        ensure_episode(ws, cfg, root);
        Observation obs = render_observation(ws.world);
        InstanceGraph gi = build_instance_graph(obs, ws.world.inventory);
        TypeGraph gk = map_to_type_graph(gi);
        auto rec = recommend(gi, gk, eval, ChoiceMode::Sample, ws.rng);
        if (!rec) {
            auto [taken, reward] = exploration_fallback(ws.world, cfg.fallback_budget, ws.rng);
            out.stats.fallback_steps += taken;
            out.stats.env_steps += taken;
            out.stats.env_return += reward;
            if (ws.world.done) finish_episode(ws, out);
            continue;
        }

        InteractionGoal goal{rec->target_object_id, rec->lambda};
        InteractionResult res;
        if (repo.has_reach()) {
            ReachOutcome ro =
                run_reach_then_interact(ws.world, goal, reach_policy, inter[static_cast<size_t>(goal.lambda)],
                                        cfg.reach_budget, cfg.interaction_budget, ws.rng);
            res = ro.result;
            out.stats.reach_steps += static_cast<long>(ro.reach.size());
            out.stats.interaction_steps += static_cast<long>(ro.interaction.size());
            auto& dst = out.interaction[static_cast<size_t>(goal.lambda)];
            for (auto& r : ro.reach.steps) out.reach.push_back(std::move(r));
            for (auto& r : ro.interaction.steps) dst.push_back(std::move(r));
        } else {
            auto [ires, traj] = run_interaction_segment(
                ws.world, goal, inter[static_cast<size_t>(goal.lambda)], cfg.interaction_budget, ws.rng);
            res = ires;
            out.stats.interaction_steps += static_cast<long>(traj.size());
            auto& dst = out.interaction[static_cast<size_t>(goal.lambda)];
            for (auto& r : traj.steps) dst.push_back(std::move(r));
        }
        out.stats.env_steps += res.steps;
        out.stats.env_return += res.env_reward;
        out.stats.segments += 1;
        if (res.success) out.stats.segment_successes += 1;

        StepRecord m;
        m.graph = rec->meta_state;
        m.action = rec->lambda;
        m.log_prob = rec->lambda_log_prob;
        m.value = rec->value;
        m.reward = meta_reward(res.success, res.env_won, res.env_reward);
        m.done = ws.world.done;
        if (!out.meta.empty() && !out.meta.back().done) out.meta.back().next_value = m.value;
        out.meta.push_back(std::move(m));
        if (ws.world.done) finish_episode(ws, out);
    }

    if (!out.meta.empty() && !out.meta.back().done) {
        out.meta.back().cut = true;
        out.meta.back().next_value = peek_meta_value(ws, eval);
    }
}

void worker_collect_base(const PolicyRepository& repo, const VariantConfig& cfg, WorkerState& ws,
                         std::uint64_t root, int quota, WorkerChunk& out) {
    NoGradGuard guard;
    while (static_cast<int>(out.base.size()) < quota) {
        ensure_episode(ws, cfg, root);
        Tensor x = encode_observation(render_observation(ws.world));
        PolicyOutput po = grid_forward(repo.base, x);
        auto [action, log_prob] = categorical_sample(po.probs.value(), ws.rng);
        StepResult sr = step(ws.world, action);

        StepRecord r;
        r.obs = x;
        r.action = action;
        r.log_prob = log_prob;
        r.value = po.value.item();
        r.reward = sr.reward;
        r.done = ws.world.done;
        if (!out.base.empty() && !out.base.back().done) out.base.back().next_value = r.value;
        out.base.push_back(std::move(r));
        out.stats.env_steps += 1;
        out.stats.env_return += sr.reward;
        if (ws.world.done) finish_episode(ws, out);
    }
    if (!out.base.empty() && !out.base.back().done) {
        Tensor x = encode_observation(render_observation(ws.world));
        out.base.back().cut = true;
        out.base.back().next_value = grid_forward(repo.base, x).value.item();
    }
}

// Runs one body per worker on its own thread and rethrows the first failure
// in worker order, so errors are as deterministic as results.
void run_workers(int count, std::vector<WorkerChunk>& chunks,
                 const std::function<void(int, WorkerChunk&)>& body) {
    std::vector<std::exception_ptr> errors(static_cast<size_t>(count));
    std::vector<std::thread> threads;
    threads.reserve(static_cast<size_t>(count));
    for (int w = 0; w < count; ++w) {
        threads.emplace_back([&, w] {
            try {
                body(w, chunks[static_cast<size_t>(w)]);
            } catch (...) {
                errors[static_cast<size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

MetaBatch merge_chunks(std::vector<WorkerChunk>& chunks) {
    MetaBatch batch;
    batch.meta.level = Level::Meta;
    for (auto& traj : batch.interaction) traj.level = Level::Interaction;
    batch.reach.level = Level::Reach;
    batch.base.level = Level::Base;
    for (auto& chunk : chunks) {
        for (auto& r : chunk.meta) batch.meta.steps.push_back(std::move(r));
        for (int l = 0; l < kNumMetaActions; ++l) {
            auto& dst = batch.interaction[static_cast<size_t>(l)].steps;
            for (auto& r : chunk.interaction[static_cast<size_t>(l)]) dst.push_back(std::move(r));
        }
        for (auto& r : chunk.reach) batch.reach.steps.push_back(std::move(r));
        for (auto& r : chunk.base) batch.base.steps.push_back(std::move(r));
        batch.stats += chunk.stats;
    }
    return batch;
}

void check_collect_args(const PolicyRepository& repo, const VariantConfig& cfg,
                        const std::vector<WorkerState>& workers) {
    cfg.validate();
    if (repo.variant != cfg.variant)
        throw ConfigError("repository variant does not match the collection config");
    if (static_cast<int>(workers.size()) != cfg.workers)
        throw ConfigError("worker state count does not match the configured worker count");
}

}  // namespace

MetaBatch collect_meta_batch(const PolicyRepository& repo, const VariantConfig& cfg,
                             std::vector<WorkerState>& workers, std::uint64_t root_seed) {
    check_collect_args(repo, cfg, workers);
    if (repo.variant == Variant::BASE)
        throw ConfigError("meta collection needs a hierarchical repository");
    std::vector<WorkerChunk> chunks(workers.size());
    run_workers(cfg.workers, chunks, [&](int w, WorkerChunk& chunk) {
        worker_collect_hier(repo, cfg, workers[static_cast<size_t>(w)], root_seed,
                            worker_quota(cfg.meta_batch, cfg.workers, w), chunk);
    });
    return merge_chunks(chunks);
}

MetaBatch collect_base_batch(const PolicyRepository& repo, const VariantConfig& cfg,
                             std::vector<WorkerState>& workers, std::uint64_t root_seed) {
    check_collect_args(repo, cfg, workers);
    if (repo.variant != Variant::BASE)
        throw ConfigError("flat collection needs the flat repository");
    std::vector<WorkerChunk> chunks(workers.size());
    run_workers(cfg.workers, chunks, [&](int w, WorkerChunk& chunk) {
        worker_collect_base(repo, cfg, workers[static_cast<size_t>(w)], root_seed,
                            worker_quota(cfg.base_horizon, cfg.workers, w), chunk);
    });
    return merge_chunks(chunks);
}

// --- Evaluation rollouts ---

EpisodeOutcome play_episode(const PolicyRepository& repo, const VariantConfig& cfg,
                            WorldState& world, Rng& rng, ChoiceMode mode, const StepHook& on_step) {
    if (repo.variant != cfg.variant)
        throw ConfigError("repository variant does not match the rollout config");
    if (world.done) throw std::logic_error("rollout started on a finished episode");
    NoGradGuard guard;
    EpisodeOutcome out;

    if (repo.has_base()) {
        GridPolicy policy = net_policy(repo.base, mode);
        while (!world.done) {
            Tensor x = encode_observation(render_observation(world));
            PolicyDecision d = policy(x, rng);
            StepResult sr = step(world, d.action);
            out.env_return += sr.reward;
            if (on_step) on_step(world);
        }
    } else {
        MetaEvaluator eval = make_meta_evaluator(repo.meta);
        std::array<GridPolicy, kNumMetaActions> inter;
        for (int l = 0; l < kNumMetaActions; ++l)
            inter[static_cast<size_t>(l)] = net_policy(repo.interaction[static_cast<size_t>(l)], mode);
        GridPolicy reach_policy;
        if (repo.has_reach()) reach_policy = net_policy(repo.reach, mode);

        while (!world.done) {
            Observation obs = render_observation(world);
            InstanceGraph gi = build_instance_graph(obs, world.inventory);
            TypeGraph gk = map_to_type_graph(gi);
            auto rec = recommend(gi, gk, eval, mode, rng);
            if (!rec) {
                auto [taken, reward] = exploration_fallback(world, cfg.fallback_budget, rng, on_step);
                (void)taken;
                out.env_return += reward;
                continue;
            }
            InteractionGoal goal{rec->target_object_id, rec->lambda};
            if (repo.has_reach()) {
                ReachOutcome ro =
                    run_reach_then_interact(world, goal, reach_policy, inter[static_cast<size_t>(goal.lambda)],
                                            cfg.reach_budget, cfg.interaction_budget, rng, on_step);
                out.env_return += ro.result.env_reward;
            } else {
                auto [res, traj] = run_interaction_segment(
                    world, goal, inter[static_cast<size_t>(goal.lambda)], cfg.interaction_budget, rng, on_step);
                out.env_return += res.env_reward;
            }
        }
    }
    out.success = world.success;
    out.steps = world.c;
    return out;
}

EvalSummary evaluate_repository(const PolicyRepository& repo, const VariantConfig& cfg,
                                int episodes, std::uint64_t seed) {
    EvalSummary s;
    s.episodes = episodes;
    for (int i = 0; i < episodes; ++i) {
        const std::uint64_t e = static_cast<std::uint64_t>(i);
        WorldState world = generate_world(derive_seed(seed, e, 0), cfg.task, cfg.layout);
        Rng rng(derive_seed(seed, e, 1));
        EpisodeOutcome o = play_episode(repo, cfg, world, rng, ChoiceMode::Greedy);
        s.success_rate += o.success ? 1.0 : 0.0;
        s.mean_return += o.env_return;
        s.mean_steps += static_cast<double>(o.steps);
    }
    if (episodes > 0) {
        s.success_rate /= episodes;
        s.mean_return /= episodes;
        s.mean_steps /= episodes;
    }
    return s;
}

// --- Checkpoints ---

namespace {

constexpr const char* kCkptMagic = "KIXCKPT 1";

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

double parse_double(const std::string& s) { return kix::parse_double(s, "checkpoint"); }
long long parse_int(const std::string& s) { return kix::parse_int(s, "checkpoint"); }

void write_ppo_config(std::ostream& os, const char* prefix, const PpoConfig& c) {
    os << prefix << "clip_eps=" << fmt_double(c.clip_eps) << '\n';
    os << prefix << "entropy_coef=" << fmt_double(c.entropy_coef) << '\n';
    os << prefix << "value_coef=" << fmt_double(c.value_coef) << '\n';
    os << prefix << "lr=" << fmt_double(c.lr) << '\n';
    os << prefix << "epochs=" << c.epochs << '\n';
    os << prefix << "minibatch=" << c.minibatch << '\n';
    os << prefix << "gamma_meta=" << fmt_double(c.gamma_meta) << '\n';
    os << prefix << "gamma_prim=" << fmt_double(c.gamma_prim) << '\n';
    os << prefix << "grad_clip=" << fmt_double(c.grad_clip) << '\n';
    os << prefix << "normalize_advantages=" << (c.normalize_advantages ? 1 : 0) << '\n';
}

// Reads the next line, which must be "<key>=<value>", and returns the value.
std::string expect_kv(std::istream& is, const std::string& key) {
    std::string line;
    if (!std::getline(is, line)) throw IoError("checkpoint truncated in the configuration section");
    const auto eq = line.find('=');
    if (eq == std::string::npos || line.substr(0, eq) != key)
        throw IoError("checkpoint expected key '" + key + "', found '" + line + "'");
    return line.substr(eq + 1);
}

void read_ppo_config(std::istream& is, const std::string& prefix, PpoConfig& c) {
    c.clip_eps = parse_double(expect_kv(is, prefix + "clip_eps"));
    c.entropy_coef = parse_double(expect_kv(is, prefix + "entropy_coef"));
    c.value_coef = parse_double(expect_kv(is, prefix + "value_coef"));
    c.lr = parse_double(expect_kv(is, prefix + "lr"));
    c.epochs = static_cast<int>(parse_int(expect_kv(is, prefix + "epochs")));
    c.minibatch = static_cast<int>(parse_int(expect_kv(is, prefix + "minibatch")));
    c.gamma_meta = parse_double(expect_kv(is, prefix + "gamma_meta"));
    c.gamma_prim = parse_double(expect_kv(is, prefix + "gamma_prim"));
    c.grad_clip = parse_double(expect_kv(is, prefix + "grad_clip"));
    c.normalize_advantages = parse_int(expect_kv(is, prefix + "normalize_advantages")) != 0;
}

}  // namespace

void save_checkpoint(const std::string& path, const PolicyRepository& repo,
                     const VariantConfig& config, const PpoConfig& meta_ppo,
                     const PpoConfig& prim_ppo) {
    if (repo.variant != config.variant)
        throw ConfigError("checkpoint config variant does not match the repository");
    std::ostringstream os(std::ios::binary);
    os << kCkptMagic << '\n';
    os << "variant=" << variant_name(config.variant) << '\n';
    os << "task=" << config.task << '\n';
    os << "layout.rooms_rows=" << config.layout.rooms_rows << '\n';
    os << "layout.rooms_cols=" << config.layout.rooms_cols << '\n';
    os << "layout.interior=" << config.layout.interior << '\n';
    os << "layout.blockers=" << (config.layout.blockers ? 1 : 0) << '\n';
    os << "meta_batch=" << config.meta_batch << '\n';
    os << "interaction_budget=" << config.interaction_budget << '\n';
    os << "reach_budget=" << config.reach_budget << '\n';
    os << "fallback_budget=" << config.fallback_budget << '\n';
    os << "base_horizon=" << config.base_horizon << '\n';
    os << "total_env_steps=" << config.total_env_steps << '\n';
    os << "workers=" << config.workers << '\n';
    os << "eval_cadence=" << config.eval_cadence << '\n';
    os << "eval_episodes=" << config.eval_episodes << '\n';
    write_ppo_config(os, "meta_ppo.", meta_ppo);
    write_ppo_config(os, "prim_ppo.", prim_ppo);

    const std::vector<std::string> keys = repository_keys(config.variant);
    os << "params=" << keys.size() << '\n';
    for (const auto& key : keys) {
        os << "role " << key << '\n';
        write_param_blob(os, repository_net(repo, key));
    }

    std::string payload = std::move(os).str();
    const std::uint64_t sum = fnv1a(payload);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    char tail[8];
    for (int i = 0; i < 8; ++i) tail[i] = static_cast<char>((sum >> (8 * i)) & 0xFF);
    out.write(tail, 8);
    out.flush();
    if (!out) throw IoError("cannot write checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string file = std::move(buf).str();
    if (file.size() < 9) throw IoError("checkpoint truncated: " + path);

    std::uint64_t stored = 0;
    for (int i = 0; i < 8; ++i)
        stored |= static_cast<std::uint64_t>(static_cast<unsigned char>(file[file.size() - 8 + i]))
                  << (8 * i);
    std::string payload = file.substr(0, file.size() - 8);
    if (fnv1a(payload) != stored) throw IoError("checkpoint checksum mismatch: " + path);

    std::istringstream is(payload, std::ios::binary);
    std::string magic;
    std::getline(is, magic);
    if (magic != kCkptMagic) throw IoError("unsupported checkpoint version line '" + magic + "'");

    Checkpoint ck;
    const std::string vname = expect_kv(is, "variant");
    try {
        ck.config.variant = variant_from_name(vname);
    } catch (const ConfigError&) {
        throw IoError("checkpoint names unknown variant '" + vname + "'");
    }
    ck.config.task = static_cast<int>(parse_int(expect_kv(is, "task")));
    ck.config.layout.rooms_rows = static_cast<int>(parse_int(expect_kv(is, "layout.rooms_rows")));
    ck.config.layout.rooms_cols = static_cast<int>(parse_int(expect_kv(is, "layout.rooms_cols")));
    ck.config.layout.interior = static_cast<int>(parse_int(expect_kv(is, "layout.interior")));
    ck.config.layout.blockers = parse_int(expect_kv(is, "layout.blockers")) != 0;
    ck.config.meta_batch = static_cast<int>(parse_int(expect_kv(is, "meta_batch")));
    ck.config.interaction_budget = static_cast<int>(parse_int(expect_kv(is, "interaction_budget")));
    ck.config.reach_budget = static_cast<int>(parse_int(expect_kv(is, "reach_budget")));
    ck.config.fallback_budget = static_cast<int>(parse_int(expect_kv(is, "fallback_budget")));
    ck.config.base_horizon = static_cast<int>(parse_int(expect_kv(is, "base_horizon")));
    ck.config.total_env_steps = static_cast<long>(parse_int(expect_kv(is, "total_env_steps")));
    ck.config.workers = static_cast<int>(parse_int(expect_kv(is, "workers")));
    ck.config.eval_cadence = static_cast<int>(parse_int(expect_kv(is, "eval_cadence")));
    ck.config.eval_episodes = static_cast<int>(parse_int(expect_kv(is, "eval_episodes")));
    read_ppo_config(is, "meta_ppo.", ck.meta_ppo);
    read_ppo_config(is, "prim_ppo.", ck.prim_ppo);

    const std::vector<std::string> keys = repository_keys(ck.config.variant);
    const long long count = parse_int(expect_kv(is, "params"));
    if (count != static_cast<long long>(keys.size()))
        throw IoError("checkpoint manifest mismatch: file holds " + std::to_string(count) +
                      " roles, variant " + variant_name(ck.config.variant) + " needs " +
                      std::to_string(keys.size()));

    ck.repo = make_repository(ck.config.variant, 0);
    for (const auto& key : keys) {
        std::string line;
        if (!std::getline(is, line)) throw IoError("checkpoint truncated before role " + key);
        if (line != "role " + key)
            throw IoError("checkpoint manifest mismatch: expected role '" + key + "', found '" +
                          line + "'");
        read_param_blob(is, repository_net(ck.repo, key));
    }
    if (is.peek() != std::char_traits<char>::eof())
        throw IoError("checkpoint has trailing bytes after the last parameter blob");
    return ck;
}

// --- Training loop ---

PpoConfig default_meta_ppo() {
    PpoConfig c;
    c.lr = 1e-3;
    c.minibatch = 16;
    return c;
}

PpoConfig default_prim_ppo() { return PpoConfig{}; }

namespace {

// CSV cell for a double: shortest representation that parses back exactly,
// so logs are byte-stable across runs.
std::string csv(double v) { return fmt_double(v); }

}  // namespace

TrainOutcome train(const TrainConfig& cfg) {
    cfg.variant.validate();
    cfg.meta_ppo.validate();
    cfg.prim_ppo.validate();

    namespace fs = std::filesystem;
    const fs::path out_dir(cfg.out_dir);
    const fs::path ckpt_dir = out_dir / "checkpoints";
    fs::create_directories(ckpt_dir);

    std::ofstream train_log(out_dir / "train_log.csv", std::ios::trunc);
    std::ofstream losses(out_dir / "losses.csv", std::ios::trunc);
    std::ofstream eval_log(out_dir / "eval_log.csv", std::ios::trunc);
    if (!train_log || !losses || !eval_log)
        throw IoError("cannot open training logs under " + out_dir.string());
    train_log << "round,env_steps_total,episodes_total,round_env_steps,interaction_steps,"
                 "reach_steps,fallback_steps,segments,segment_successes,episodes_finished,"
                 "env_wins,env_return,meta_records,base_records\n";
    losses << "round,level,actor_loss,critic_loss,entropy,grad_norm,minibatches\n";
    eval_log << "round,kind,env_steps_total,episodes,success_rate,mean_return,mean_steps\n";

    PolicyRepository repo = make_repository(cfg.variant.variant, cfg.seed);
    const std::string init_path = (ckpt_dir / "ckpt_init.kix").string();
    save_checkpoint(init_path, repo, cfg.variant, cfg.meta_ppo, cfg.prim_ppo);

    std::vector<WorkerState> workers = make_workers(cfg.variant.workers);
    const std::uint64_t collect_root = derive_seed(cfg.seed, 424243, 1);
    Rng update_rng(derive_seed(cfg.seed, 999983, 17));

    TrainOutcome out;
    out.final_checkpoint = init_path;

    auto run_update = [&](int round, ParamSet& net, Trajectory& traj, double gamma,
                          const PpoConfig& ppo, const std::string& label) {
        if (traj.empty()) return;
        traj.gamma = gamma;
        LossReport rep = ppo_update(net, traj, ppo, update_rng);
        losses << round << ',' << label << ',' << csv(rep.actor_loss) << ',' << csv(rep.critic_loss)
               << ',' << csv(rep.entropy) << ',' << csv(rep.grad_norm) << ',' << rep.minibatches
               << '\n';
    };

    int round = 0;
    while (out.env_steps < cfg.variant.total_env_steps) {
        ++round;
        MetaBatch batch = repo.has_base()
                              ? collect_base_batch(repo, cfg.variant, workers, collect_root)
                              : collect_meta_batch(repo, cfg.variant, workers, collect_root);
        out.env_steps += batch.stats.env_steps;
        out.episodes += batch.stats.episodes_finished;

        if (repo.has_base()) {
            run_update(round, repo.base, batch.base, cfg.prim_ppo.gamma_prim, cfg.prim_ppo, "base");
        } else {
            run_update(round, repo.meta, batch.meta, cfg.meta_ppo.gamma_meta, cfg.meta_ppo, "meta");
            for (int l = 0; l < kNumMetaActions; ++l)
                run_update(round, repo.interaction[static_cast<size_t>(l)],
                           batch.interaction[static_cast<size_t>(l)], cfg.prim_ppo.gamma_prim,
                           cfg.prim_ppo, std::string("interaction.") + meta_action_name(l));
            if (repo.has_reach())
                run_update(round, repo.reach, batch.reach, cfg.prim_ppo.gamma_prim, cfg.prim_ppo,
                           "reach");
        }
        out.updates = round;

        train_log << round << ',' << out.env_steps << ',' << out.episodes << ','
                  << batch.stats.env_steps << ',' << batch.stats.interaction_steps << ','
                  << batch.stats.reach_steps << ',' << batch.stats.fallback_steps << ','
                  << batch.stats.segments << ',' << batch.stats.segment_successes << ','
                  << batch.stats.episodes_finished << ',' << batch.stats.env_wins << ','
                  << csv(batch.stats.env_return) << ',' << batch.meta.size() << ','
                  << batch.base.size() << '\n';

        if (round % cfg.variant.eval_cadence == 0) {
            EvalSummary es = evaluate_repository(repo, cfg.variant, cfg.variant.eval_episodes,
                                                 derive_seed(cfg.seed, 5150, static_cast<std::uint64_t>(round)));
            eval_log << round << ",periodic," << out.env_steps << ',' << es.episodes << ','
                     << csv(es.success_rate) << ',' << csv(es.mean_return) << ','
                     << csv(es.mean_steps) << '\n';
            const std::string path = (ckpt_dir / ("ckpt_" + std::to_string(round) + ".kix")).string();
            save_checkpoint(path, repo, cfg.variant, cfg.meta_ppo, cfg.prim_ppo);
            out.final_checkpoint = path;
        }
    }

    if (out.updates > 0) {
        out.final_eval = evaluate_repository(repo, cfg.variant, cfg.variant.eval_episodes,
                                             derive_seed(cfg.seed, 5151, 0));
        eval_log << round << ",final," << out.env_steps << ',' << out.final_eval.episodes << ','
                 << csv(out.final_eval.success_rate) << ',' << csv(out.final_eval.mean_return)
                 << ',' << csv(out.final_eval.mean_steps) << '\n';
        const std::string final_path = (ckpt_dir / "ckpt_final.kix").string();
        save_checkpoint(final_path, repo, cfg.variant, cfg.meta_ppo, cfg.prim_ppo);
        out.final_checkpoint = final_path;
    }
    return out;
}

}  // namespace kix
