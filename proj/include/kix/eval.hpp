#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "kix/graphs.hpp"
#include "kix/nets.hpp"
#include "kix/trainer.hpp"

namespace kix {

// --- Evaluation rollouts, return profiles, and room-visit statistics ---
//
// Trained agents replay evaluation episodes; each episode records its return
// and how often the agent stood in each room. Return profiles compare agents
// by their k best episodes, and visit distributions compare how task changes
// shift where an agent spends its time.

// One evaluated episode. Room visits count steps whose post-step position is
// a room interior cell (door and wall cells belong to no single room), so
// the visit total never exceeds the step count.
struct EpisodeRecord {
    int task = 0;
    std::uint64_t seed = 0;  // world seed behind this episode
    double env_return = 0.0;
    bool success = false;
    long steps = 0;
    std::vector<long> room_visits;  // row-major over the room grid
};

// A batch of evaluated episodes for one agent on one task.
struct EpisodeLog {
    Variant variant = Variant::KIX1;
    int task = 0;
    std::uint64_t seed = 0;  // root seed of the rollout
    int rooms_rows = 0;
    int rooms_cols = 0;
    std::vector<EpisodeRecord> episodes;
};

// Plays `episodes` evaluation episodes of the checkpointed agent on `task`
// under the checkpoint's layout. Episode i runs on world seed
// derive_seed(seed, i, 0) with policy stream derive_seed(seed, i, 1), so the
// log is a pure function of (checkpoint, task, episodes, seed, mode); the
// worker count only spreads independent episodes across threads and never
// changes the result. Throws ConfigError on a task outside the environment's
// range or non-positive episode or worker counts.
EpisodeLog rollout_eval(const Checkpoint& ckpt, int task, int episodes, std::uint64_t seed,
                        ChoiceMode mode = ChoiceMode::Greedy, int workers = 1);

// The k highest returns in descending order, length min(k, N); ties keep
// episode order. k <= 0 yields an empty list.
std::vector<double> top_k_returns(const EpisodeLog& log, int k);

// Report-scale k: profiles use the k best episodes, but small logs scale the
// cut down to a tenth of the episode count so the profile never covers the
// whole log. Never below 1 while any episode exists.
int report_k(int episodes, int k = 100);

// Per-room visit distribution plus the room-grid coordinates that define the
// transport ground metric.
struct VisitDistribution {
    std::vector<double> prob;                // non-negative, sums to 1
    std::vector<std::array<int, 2>> coords;  // (row, col) per room, row-major
};

// Aggregates room visits over all episodes and normalizes. Throws
// ConfigError on an empty room grid, a record whose visit vector does not
// match the grid, or a log with no interior-cell steps to count.
VisitDistribution visit_distribution(const EpisodeLog& log);

// Exact 1-Wasserstein distance between distributions on the same room grid,
// with ground metric = Manhattan distance between room coordinates. Solved
// as a small optimal-transport problem by the transportation simplex, so the
// result is exact up to rounding. Throws ConfigError when the supports
// differ and NumericError if the pivot loop fails to converge.
double wasserstein_exact(const VisitDistribution& p, const VisitDistribution& q);

// --- Persisted logs and reports ---

// Writes the log as episodes_<variant>_task<t>_seed<s>.csv under dir and
// returns the path. One row per episode; the trailing visit_<r> block has
// one column per room. read_episode_log round-trips exactly and throws
// IoError on malformed files.
std::string write_episode_log(const std::string& dir, const EpisodeLog& log);
EpisodeLog read_episode_log(const std::string& path);

// Emits four report files under dir and returns their paths:
//   profiles_<stem>.csv/.svg   one row per log: top-k return summary
//   distances_<stem>.csv/.svg  per variant, W1 distance between each
//                              task's visit distribution and that variant's
//                              task-0 distribution (first by seed)
// Rows sort by (variant, task, seed); emission is a pure function of the
// logs, so emitting twice writes byte-identical files. Logs without a
// matching task-0 reference or without countable visits produce no distance
// row. Empty input emits header-only tables.
std::vector<std::string> emit_report(const std::vector<EpisodeLog>& logs, const std::string& dir,
                                     const std::string& stem, int k = 100);

}  // namespace kix
