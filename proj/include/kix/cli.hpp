#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "kix/eval.hpp"
#include "kix/trainer.hpp"

namespace kix {

// --- Command-line driver ---
//
// One binary, four subcommands (train, eval, compare, inspect-graph), all
// configured through a flat key=value format: an optional config file plus
// ordered overrides, resolved into a RunConfig. Every run directory receives
// an echo of the resolved config, and re-running a command from its echo
// reproduces the run's logs byte-for-byte (fixed seed, fixed worker count).

// The resolved settings of one command invocation. Training consumes the
// variant/ppo/seed/out_dir block; evaluation additionally needs `checkpoint`
// and uses `episodes`, `mode`, and `eval_workers` for its rollouts; compare
// evaluates one RunConfig per checkpoint across the `tasks` list.
struct RunConfig {
    std::string command;  // set by the subcommand that runs the config
    VariantConfig run;
    PpoConfig meta_ppo = default_meta_ppo();
    PpoConfig prim_ppo = default_prim_ppo();
    std::uint64_t seed = 1;
    std::string out_dir = "runs/default";
    std::string checkpoint;               // model evaluated by eval/compare
    int episodes = 200;                   // evaluation rollout count
    ChoiceMode mode = ChoiceMode::Greedy; // evaluation action selection
    int eval_workers = 1;                 // evaluation rollout threads
    std::string tasks = "0,1,2,3";        // tasks compared by cmd_compare
};

// The documented key set in canonical echo order. "layout" is an extra
// input-only convenience key (a layout name expanding to the layout.* keys).
std::vector<std::string> config_keys();

// One help line per key ("name  default  description"), for --help output.
std::string describe_keys();

// Applies one assignment. Throws ConfigError naming the key for an unknown
// key or a value of the wrong shape. Numeric ranges are checked where the
// value is used, mirroring VariantConfig/PpoConfig validation.
void apply_override(RunConfig& cfg, const std::string& key, const std::string& value);

// Resolves a config: defaults, then the file's assignments in order, then
// `overrides` ("key=value") in order; the last assignment of a key wins.
// The file holds one assignment per line; blank lines and lines starting
// with '#' are skipped. Throws IoError when the file cannot be read and
// ConfigError for malformed lines or assignments.
RunConfig parse_config(const std::optional<std::string>& file,
                       const std::vector<std::string>& overrides);

// Canonical text form covering every key in config_keys() order. Doubles use
// the shortest round-tripping form, so parsing the rendered text reproduces
// the config exactly. Paths must not hold newlines or edge whitespace.
std::string render_config(const RunConfig& cfg);

// Writes render_config(cfg) to <dir>/<filename>, creating the directory.
// Returns the written path; throws IoError on failure.
std::string echo_config(const RunConfig& cfg, const std::string& dir,
                        const std::string& filename = "config.txt");

// --- Subcommands ---
//
// Each echoes its resolved config into the run directory before doing work
// and writes fixed-format progress lines to `out`. Errors surface as the
// library's exception categories; run_cli maps them to exit codes.

// Trains per the config and reports the outcome.
TrainOutcome cmd_train(RunConfig cfg, std::ostream& out);

// Rolls out `episodes` evaluation episodes of the checkpoint on the config's
// task and writes the episode log CSV. Requires the `checkpoint` key; the
// variant always comes from the checkpoint itself. Returns the log path.
std::string cmd_eval(RunConfig cfg, std::ostream& out);

// Evaluates each config's checkpoint on each task in its `tasks` list,
// writes all episode logs plus the comparison report (return profiles and
// task-distance tables) into the first config's out_dir, and echoes the
// configs as config_0.txt, config_1.txt, ... Returns the report file paths.
std::vector<std::string> cmd_compare(std::vector<RunConfig> cfgs, std::ostream& out);

// Builds the config's world, replays a step sequence (action names or codes,
// comma-separated tokens allowed), then prints the world summary and the
// canonical instance/type graph serializations of the final observation.
// Throws ConfigError for junk tokens or steps past the episode's end.
void cmd_inspect_graph(const RunConfig& cfg, const std::vector<std::string>& steps,
                       std::ostream& out);

// Full argv-to-exit-code driver used by the binary and the tests. Prints
// errors to `err` prefixed with their category. Exit codes: 0 success,
// 2 configuration errors (bad flags, keys, values), 3 I/O errors, 4 numeric
// failures, 1 anything else.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace kix
