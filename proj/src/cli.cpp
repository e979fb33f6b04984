#include "kix/cli.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "kix/errors.hpp"
#include "kix/textio.hpp"

namespace kix {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

// Config values parse with the key name in every failure message.
[[noreturn]] void bad_value(const std::string& key, const char* need, const std::string& got) {
    throw ConfigError("configuration key '" + key + "' needs " + need + ", got '" + got + "'");
}

long long parse_ll(const std::string& v, const std::string& key) {
    long long out = 0;
    const char* end = v.data() + v.size();
    auto res = std::from_chars(v.data(), end, out);
    if (res.ec != std::errc() || res.ptr != end) bad_value(key, "an integer", v);
    return out;
}

int parse_i(const std::string& v, const std::string& key) {
    long long raw = parse_ll(v, key);
    if (raw < std::numeric_limits<int>::min() || raw > std::numeric_limits<int>::max())
        bad_value(key, "an integer in int range", v);
    return static_cast<int>(raw);
}

std::uint64_t parse_u64(const std::string& v, const std::string& key) {
    std::uint64_t out = 0;
    const char* end = v.data() + v.size();
    auto res = std::from_chars(v.data(), end, out);
    if (res.ec != std::errc() || res.ptr != end) bad_value(key, "an unsigned integer", v);
    return out;
}

double parse_d(const std::string& v, const std::string& key) {
    double out = 0.0;
    const char* end = v.data() + v.size();
    auto res = std::from_chars(v.data(), end, out);
    if (res.ec != std::errc() || res.ptr != end) bad_value(key, "a number", v);
    return out;
}

bool parse_b(const std::string& v, const std::string& key) {
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    bad_value(key, "a boolean (0/1/true/false)", v);
}

struct KeySpec {
    std::string name;
    std::string desc;
    std::function<void(RunConfig&, const std::string& value, const std::string& key)> set;
    std::function<std::string(const RunConfig&)> get;  // empty for input-only keys
};

const std::vector<KeySpec>& key_table() {
    static const std::vector<KeySpec> table = [] {
        std::vector<KeySpec> t;
        auto add = [&t](std::string name, std::string desc,
                        std::function<void(RunConfig&, const std::string&, const std::string&)> set,
                        std::function<std::string(const RunConfig&)> get) {
            t.push_back({std::move(name), std::move(desc), std::move(set), std::move(get)});
        };

        add("command", "subcommand that produced this config (informational)",
            [](RunConfig& c, const std::string& v, const std::string& k) {
                if (v != "" && v != "train" && v != "eval" && v != "compare" &&
                    v != "inspect-graph")
                    bad_value(k, "train, eval, compare, or inspect-graph", v);
                c.command = v;
            },
            [](const RunConfig& c) { return c.command; });
        add("variant", "agent variant: kix1, kix2, or base",
            [](RunConfig& c, const std::string& v, const std::string& k) {
                try {
                    c.run.variant = variant_from_name(v);
                } catch (const ConfigError&) {
                    bad_value(k, "kix1, kix2, or base", v);
                }
            },
            [](const RunConfig& c) { return std::string(variant_name(c.run.variant)); });
        add("task", "task id trained or evaluated (0..3)",
            [](RunConfig& c, const std::string& v, const std::string& k) {
                c.run.task = parse_i(v, k);
            },
            [](const RunConfig& c) { return std::to_string(c.run.task); });
        add("layout", "layout name expanding to the layout.* keys: full or mini",
            [](RunConfig& c, const std::string& v, const std::string& k) {
                try {
                    c.run.layout = layout_by_name(v);
                } catch (const ConfigError&) {
                    bad_value(k, "full or mini", v);
                }
            },
            nullptr);
        add("layout.rooms_rows", "room grid rows",
            [](RunConfig& c, const std::string& v, const std::string& k) {
                c.run.layout.rooms_rows = parse_i(v, k);
            },
            [](const RunConfig& c) { return std::to_string(c.run.layout.rooms_rows); });
        add("layout.rooms_cols", "room grid columns",
            [](RunConfig& c, const std::string& v, const std::string& k) {
                c.run.layout.rooms_cols = parse_i(v, k);
            },
            [](const RunConfig& c) { return std::to_string(c.run.layout.rooms_cols); });
        add("layout.interior", "interior side length of each room",
            [](RunConfig& c, const std::string& v, const std::string& k) {
                c.run.layout.interior = parse_i(v, k);
            },
            [](const RunConfig& c) { return std::to_string(c.run.layout.interior); });
        add("layout.blockers", "drop blocking balls in front of locked doors",
            [](RunConfig& c, const std::string& v, const std::string& k) {
                c.run.layout.blockers = parse_b(v, k);
            },
            [](const RunConfig& c) { return std::string(c.run.layout.blockers ? "1" : "0"); });
        add("meta_batch", "meta records collected per training round",
            [](RunConfig& c, const std::string& v, const std::string& k) {
                c.run.meta_batch = parse_i(v, k);
            },
            [](const RunConfig& c) { return std::to_string(c.run.meta_batch); });
        add("interaction_budget", "env-step budget per interaction segment",
            [](RunConfig& c, const std::string& v, const std::string& k) {
                c.run.interaction_budget = parse_i(v, k);
            },
            [](const RunConfig& c) { return std::to_string(c.run.interaction_budget); });
        add("reach_budget", "env-step budget per reach phase (kix2)",
            [](RunConfig& c, const std::string& v, const std::string& k) {
                c.run.reach_budget = parse_i(v, k);
            },
            [](const RunConfig& c) { return std::to_string(c.run.reach_budget); });
        add("fallback_budget", "env-step budget per no-candidate fallback",
            [](RunConfig& c, const std::string& v, const std::string& k) {
                c.run.fallback_budget = parse_i(v, k);
            },
            [](const RunConfig& c) { return std::to_string(c.run.fallback_budget); });
        add("base_horizon", "grid records per round for the flat agent",
            [](RunConfig& c, const std::string& v, const std::string& k) {
                c.run.base_horizon = parse_i(v, k);
            },
            [](const RunConfig& c) { return std::to_string(c.run.base_horizon); });
        add("total_env_steps", "env-step budget for the whole training run",
            [](RunConfig& c, const std::string& v, const std::string& k) {
                c.run.total_env_steps = parse_ll(v, k);
            },
            [](const RunConfig& c) { return std::to_string(c.run.total_env_steps); });
        add("workers", "deterministic collection workers",
            [](RunConfig& c, const std::string& v, const std::string& k) {
                c.run.workers = parse_i(v, k);
            },
            [](const RunConfig& c) { return std::to_string(c.run.workers); });
        add("eval_cadence", "training rounds between eval snapshots",
            [](RunConfig& c, const std::string& v, const std::string& k) {
                c.run.eval_cadence = parse_i(v, k);
            },
            [](const RunConfig& c) { return std::to_string(c.run.eval_cadence); });
        add("eval_episodes", "episodes per in-training eval snapshot",
            [](RunConfig& c, const std::string& v, const std::string& k) {
                c.run.eval_episodes = parse_i(v, k);
            },
            [](const RunConfig& c) { return std::to_string(c.run.eval_episodes); });

        auto add_ppo = [&add](const std::string& prefix, PpoConfig RunConfig::* mem,
                              const std::string& which) {
            auto fld = [mem](RunConfig& c) -> PpoConfig& { return c.*mem; };
            auto cfld = [mem](const RunConfig& c) -> const PpoConfig& { return c.*mem; };
            add(prefix + ".clip_eps", which + " PPO clip radius",
                [fld](RunConfig& c, const std::string& v, const std::string& k) {
                    fld(c).clip_eps = parse_d(v, k);
                },
                [cfld](const RunConfig& c) { return fmt_double(cfld(c).clip_eps); });
            add(prefix + ".entropy_coef", which + " PPO entropy bonus weight",
                [fld](RunConfig& c, const std::string& v, const std::string& k) {
                    fld(c).entropy_coef = parse_d(v, k);
                },
                [cfld](const RunConfig& c) { return fmt_double(cfld(c).entropy_coef); });
            add(prefix + ".value_coef", which + " PPO value loss weight",
                [fld](RunConfig& c, const std::string& v, const std::string& k) {
                    fld(c).value_coef = parse_d(v, k);
                },
                [cfld](const RunConfig& c) { return fmt_double(cfld(c).value_coef); });
            add(prefix + ".lr", which + " learning rate",
                [fld](RunConfig& c, const std::string& v, const std::string& k) {
                    fld(c).lr = parse_d(v, k);
                },
                [cfld](const RunConfig& c) { return fmt_double(cfld(c).lr); });
            add(prefix + ".epochs", which + " PPO epochs per update",
                [fld](RunConfig& c, const std::string& v, const std::string& k) {
                    fld(c).epochs = parse_i(v, k);
                },
                [cfld](const RunConfig& c) { return std::to_string(cfld(c).epochs); });
            add(prefix + ".minibatch", which + " PPO minibatch size",
                [fld](RunConfig& c, const std::string& v, const std::string& k) {
                    fld(c).minibatch = parse_i(v, k);
                },
                [cfld](const RunConfig& c) { return std::to_string(cfld(c).minibatch); });
            add(prefix + ".gamma_meta", which + " discount for meta records",
                [fld](RunConfig& c, const std::string& v, const std::string& k) {
                    fld(c).gamma_meta = parse_d(v, k);
                },
                [cfld](const RunConfig& c) { return fmt_double(cfld(c).gamma_meta); });
            add(prefix + ".gamma_prim", which + " discount for grid records",
                [fld](RunConfig& c, const std::string& v, const std::string& k) {
                    fld(c).gamma_prim = parse_d(v, k);
                },
                [cfld](const RunConfig& c) { return fmt_double(cfld(c).gamma_prim); });
            add(prefix + ".grad_clip", which + " gradient norm clip (0 disables)",
                [fld](RunConfig& c, const std::string& v, const std::string& k) {
                    fld(c).grad_clip = parse_d(v, k);
                },
                [cfld](const RunConfig& c) { return fmt_double(cfld(c).grad_clip); });
            add(prefix + ".normalize_advantages", which + " advantage normalization switch",
                [fld](RunConfig& c, const std::string& v, const std::string& k) {
                    fld(c).normalize_advantages = parse_b(v, k);
                },
                [cfld](const RunConfig& c) {
                    return std::string(cfld(c).normalize_advantages ? "1" : "0");
                });
        };
        add_ppo("meta_ppo", &RunConfig::meta_ppo, "meta-level");
        add_ppo("prim_ppo", &RunConfig::prim_ppo, "grid-level");

        add("seed", "root seed for training and evaluation streams",
            [](RunConfig& c, const std::string& v, const std::string& k) {
                c.seed = parse_u64(v, k);
            },
            [](const RunConfig& c) { return std::to_string(c.seed); });
        add("out_dir", "run directory for logs, checkpoints, and the config echo",
            [](RunConfig& c, const std::string& v, const std::string&) { c.out_dir = v; },
            [](const RunConfig& c) { return c.out_dir; });
        add("checkpoint", "checkpoint path evaluated by eval/compare",
            [](RunConfig& c, const std::string& v, const std::string&) { c.checkpoint = v; },
            [](const RunConfig& c) { return c.checkpoint; });
        add("episodes", "evaluation rollout episode count",
            [](RunConfig& c, const std::string& v, const std::string& k) {
                c.episodes = parse_i(v, k);
            },
            [](const RunConfig& c) { return std::to_string(c.episodes); });
        add("mode", "evaluation action selection: greedy or sample",
            [](RunConfig& c, const std::string& v, const std::string& k) {
                if (v == "greedy")
                    c.mode = ChoiceMode::Greedy;
                else if (v == "sample")
                    c.mode = ChoiceMode::Sample;
                else
                    bad_value(k, "greedy or sample", v);
            },
            [](const RunConfig& c) {
                return std::string(c.mode == ChoiceMode::Greedy ? "greedy" : "sample");
            });
        add("eval_workers", "evaluation rollout threads",
            [](RunConfig& c, const std::string& v, const std::string& k) {
                c.eval_workers = parse_i(v, k);
            },
            [](const RunConfig& c) { return std::to_string(c.eval_workers); });
        add("tasks", "comma-separated task ids compared by cmd_compare",
            [](RunConfig& c, const std::string& v, const std::string&) { c.tasks = v; },
            [](const RunConfig& c) { return c.tasks; });
        return t;
    }();
    return table;
}

std::vector<int> parse_task_list(const std::string& tasks) {
    std::vector<int> out;
    std::string token;
    std::istringstream in(tasks);
    while (std::getline(in, token, ',')) {
        token = trim(token);
        int id = 0;
        const char* end = token.data() + token.size();
        auto res = std::from_chars(token.data(), end, id);
        if (token.empty() || res.ec != std::errc() || res.ptr != end)
            bad_value("tasks", "comma-separated task ids", tasks);
        out.push_back(id);
    }
    if (out.empty()) bad_value("tasks", "at least one task id", tasks);
    return out;
}

// A step token is a primitive action name or its code.
Action parse_action_token(const std::string& token) {
    if (!token.empty() && (std::isdigit(static_cast<unsigned char>(token[0])) != 0)) {
        int code = 0;
        const char* end = token.data() + token.size();
        auto res = std::from_chars(token.data(), end, code);
        if (res.ec == std::errc() && res.ptr == end) {
            if (code < 0 || code >= kNumActions)
                throw ConfigError("step token '" + token + "' is not an action code (0.." +
                                  std::to_string(kNumActions - 1) + ")");
            return static_cast<Action>(code);
        }
    }
    return action_from_name(token);
}

}  // namespace

std::vector<std::string> config_keys() {
    std::vector<std::string> names;
    for (const KeySpec& spec : key_table()) names.push_back(spec.name);
    return names;
}

std::string describe_keys() {
    const RunConfig defaults;
    size_t width = 0;
    for (const KeySpec& spec : key_table()) width = std::max(width, spec.name.size());
    std::string out = "Configuration keys (key=value; defaults shown, '-' = input-only):\n";
    for (const KeySpec& spec : key_table()) {
        std::string value = spec.get ? spec.get(defaults) : std::string("-");
        if (value.empty()) value = "''";
        out += "  " + spec.name + std::string(width - spec.name.size() + 2, ' ') + value;
        if (value.size() < 14) out += std::string(14 - value.size(), ' ');
        out += "  " + spec.desc + "\n";
    }
    return out;
}

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
    for (const KeySpec& spec : key_table()) {
        if (spec.name == key) {
            spec.set(cfg, value, key);
            return;
        }
    }
    throw ConfigError("unknown configuration key '" + key + "'");
}

RunConfig parse_config(const std::optional<std::string>& file,
                       const std::vector<std::string>& overrides) {
    RunConfig cfg;
    if (file) {
        std::ifstream in(*file, std::ios::binary);
        if (!in) throw IoError("cannot open config file '" + *file + "'");
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            const std::string text = trim(line);
            if (text.empty() || text[0] == '#') continue;
            const size_t eq = text.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config file '" + *file + "' line " + std::to_string(lineno) +
                                  " is not of the form key=value: '" + text + "'");
            apply_override(cfg, trim(text.substr(0, eq)), trim(text.substr(eq + 1)));
        }
    }
    for (const std::string& assignment : overrides) {
        const size_t eq = assignment.find('=');
        if (eq == std::string::npos)
            throw ConfigError("override '" + assignment + "' is not of the form key=value");
        apply_override(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
    }
    return cfg;
}

std::string render_config(const RunConfig& cfg) {
    std::string out;
    for (const KeySpec& spec : key_table())
        if (spec.get) out += spec.name + "=" + spec.get(cfg) + "\n";
    return out;
}

std::string echo_config(const RunConfig& cfg, const std::string& dir,
                        const std::string& filename) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create run directory '" + dir + "': " + ec.message());
    const std::string path = (std::filesystem::path(dir) / filename).string();
    std::ofstream out(path, std::ios::binary);
    out << render_config(cfg);
    out.flush();
    if (!out) throw IoError("cannot write resolved config '" + path + "'");
    return path;
}

// --- Subcommands ---

TrainOutcome cmd_train(RunConfig cfg, std::ostream& out) {
    cfg.command = "train";
    cfg.run.validate();
    cfg.meta_ppo.validate();
    cfg.prim_ppo.validate();
    // Echo before the run so an aborted training still leaves its config.
    out << "config: " << echo_config(cfg, cfg.out_dir) << "\n";
    TrainConfig tc;
    tc.variant = cfg.run;
    tc.meta_ppo = cfg.meta_ppo;
    tc.prim_ppo = cfg.prim_ppo;
    tc.seed = cfg.seed;
    tc.out_dir = cfg.out_dir;
    const TrainOutcome res = train(tc);
    out << "train: variant=" << variant_name(cfg.run.variant) << " task=" << cfg.run.task
        << " seed=" << cfg.seed << " env_steps=" << res.env_steps << " updates=" << res.updates
        << " episodes=" << res.episodes << "\n";
    out << "eval: episodes=" << res.final_eval.episodes
        << " success_rate=" << fmt_double(res.final_eval.success_rate)
        << " mean_return=" << fmt_double(res.final_eval.mean_return) << "\n";
    if (!res.final_checkpoint.empty()) out << "checkpoint: " << res.final_checkpoint << "\n";
    return res;
}

std::string cmd_eval(RunConfig cfg, std::ostream& out) {
    cfg.command = "eval";
    if (cfg.checkpoint.empty())
        throw ConfigError(
            "eval needs configuration key 'checkpoint' (path of the model to evaluate)");
    const Checkpoint ck = load_checkpoint(cfg.checkpoint);
    const EpisodeLog log =
        rollout_eval(ck, cfg.run.task, cfg.episodes, cfg.seed, cfg.mode, cfg.eval_workers);
    out << "config: " << echo_config(cfg, cfg.out_dir) << "\n";
    const std::string path = write_episode_log(cfg.out_dir, log);
    double successes = 0.0;
    double total_return = 0.0;
    for (const EpisodeRecord& r : log.episodes) {
        successes += r.success ? 1.0 : 0.0;
        total_return += r.env_return;
    }
    const double n = log.episodes.empty() ? 1.0 : static_cast<double>(log.episodes.size());
    out << "eval: variant=" << variant_name(log.variant) << " task=" << log.task
        << " episodes=" << log.episodes.size() << " success_rate=" << fmt_double(successes / n)
        << " mean_return=" << fmt_double(total_return / n) << "\n";
    out << "log: " << path << "\n";
    return path;
}

std::vector<std::string> cmd_compare(std::vector<RunConfig> cfgs, std::ostream& out) {
    if (cfgs.empty()) throw ConfigError("compare needs at least one configuration");
    const std::string dir = cfgs.front().out_dir;
    std::vector<EpisodeLog> logs;
    for (size_t i = 0; i < cfgs.size(); ++i) {
        RunConfig& cfg = cfgs[i];
        cfg.command = "compare";
        if (cfg.checkpoint.empty())
            throw ConfigError("compare config " + std::to_string(i) +
                              " needs configuration key 'checkpoint'");
        out << "config: " << echo_config(cfg, dir, "config_" + std::to_string(i) + ".txt")
            << "\n";
        const Checkpoint ck = load_checkpoint(cfg.checkpoint);
        for (int task : parse_task_list(cfg.tasks)) {
            EpisodeLog log =
                rollout_eval(ck, task, cfg.episodes, cfg.seed, cfg.mode, cfg.eval_workers);
            out << "cell: variant=" << variant_name(log.variant) << " task=" << task
                << " episodes=" << log.episodes.size() << " log=" << write_episode_log(dir, log)
                << "\n";
            logs.push_back(std::move(log));
        }
    }
    const std::vector<std::string> files = emit_report(logs, dir, "compare");
    for (const std::string& f : files) out << "report: " << f << "\n";
    return files;
}

void cmd_inspect_graph(const RunConfig& cfg, const std::vector<std::string>& steps,
                       std::ostream& out) {
    WorldState world = generate_world(cfg.seed, cfg.run.task, cfg.run.layout);
    int applied = 0;
    for (const std::string& arg : steps) {
        std::string token;
        std::istringstream in(arg);
        while (std::getline(in, token, ',')) {
            token = trim(token);
            if (token.empty()) continue;
            if (world.done)
                throw ConfigError("step " + std::to_string(applied) + " '" + token +
                                  "' comes after the episode already ended");
            step(world, parse_action_token(token));
            ++applied;
        }
    }
    const Observation obs = render_observation(world);
    const InstanceGraph gi = build_instance_graph(obs, world.inventory);
    const TypeGraph gk = map_to_type_graph(gi);
    out << "world: task=" << world.task << " seed=" << cfg.seed << " layout="
        << world.layout.rooms_rows << "x" << world.layout.rooms_cols << " steps=" << applied
        << " agent=(" << world.agent_x << "," << world.agent_y << ") heading="
        << heading_name(world.heading) << " done=" << (world.done ? 1 : 0) << "\n";
    out << serialize_instance_graph(gi);
    out << serialize_type_graph(gk);
}

// --- Driver ---

namespace {

// Per-subcommand argument capture. Named convenience flags resolve to plain
// key=value assignments applied in registration order, before --set pairs.
struct SubArgs {
    std::optional<std::string> config;
    std::vector<std::string> files;  // compare: one config file per agent
    std::vector<std::string> steps;  // inspect-graph: step tokens
    std::vector<std::string> sets;
    std::map<std::string, std::string> named;
    std::vector<std::pair<std::string, CLI::Option*>> named_opts;

    std::vector<std::string> overrides() const {
        std::vector<std::string> out;
        for (const auto& [key, opt] : named_opts)
            if (opt->count() > 0) out.push_back(key + "=" + named.at(key));
        out.insert(out.end(), sets.begin(), sets.end());
        return out;
    }
};

void add_named(CLI::App* sub, SubArgs& args, const std::string& flag, const std::string& key,
               const std::string& help) {
    CLI::Option* opt = sub->add_option(flag, args.named[key], help);
    args.named_opts.emplace_back(key, opt);
}

void add_set(CLI::App* sub, SubArgs& args) {
    sub->add_option("--set", args.sets,
                    "extra key=value override, repeatable; applied after named flags");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"kix: graph-guided hierarchical agents on a multi-room gridworld"};
    app.require_subcommand(1);
    app.footer(describe_keys() +
               "\nResolution order: config file, then named flags, then --set pairs;\n"
               "the last assignment of a key wins. Every run directory receives the\n"
               "resolved config as config.txt; re-running a command from that echo\n"
               "reproduces its logs byte-for-byte.");

    SubArgs ta, ea, ca, ia;

    CLI::App* tr = app.add_subcommand("train", "train an agent; writes logs and checkpoints");
    tr->add_option("--config", ta.config, "flat key=value config file");
    add_named(tr, ta, "--variant", "variant", "agent variant: kix1, kix2, or base");
    add_named(tr, ta, "--task", "task", "task id (0..3)");
    add_named(tr, ta, "--layout", "layout", "layout name: full or mini");
    add_named(tr, ta, "--seed", "seed", "root seed");
    add_named(tr, ta, "--out-dir", "out_dir", "run directory");
    add_named(tr, ta, "--env-steps", "total_env_steps", "training env-step budget");
    add_named(tr, ta, "--workers", "workers", "collection workers");
    add_set(tr, ta);

    CLI::App* ev = app.add_subcommand("eval", "roll out a checkpoint and write an episode log");
    ev->add_option("--config", ea.config, "flat key=value config file");
    add_named(ev, ea, "--checkpoint", "checkpoint", "checkpoint to evaluate");
    add_named(ev, ea, "--task", "task", "task id to evaluate on (0..3)");
    add_named(ev, ea, "--seed", "seed", "root seed for evaluation worlds");
    add_named(ev, ea, "--out-dir", "out_dir", "run directory");
    add_named(ev, ea, "--episodes", "episodes", "evaluation episode count");
    add_named(ev, ea, "--mode", "mode", "action selection: greedy or sample");
    add_named(ev, ea, "--eval-workers", "eval_workers", "evaluation rollout threads");
    add_set(ev, ea);

    CLI::App* cp = app.add_subcommand(
        "compare", "evaluate several checkpoints across tasks and emit the comparison report");
    cp->add_option("configs", ca.files, "one config file per agent (defaults when omitted)");
    add_named(cp, ca, "--seed", "seed", "root seed applied to every config");
    add_named(cp, ca, "--out-dir", "out_dir", "report directory (first config's out_dir)");
    add_named(cp, ca, "--episodes", "episodes", "evaluation episodes per cell");
    add_named(cp, ca, "--mode", "mode", "action selection: greedy or sample");
    add_named(cp, ca, "--tasks", "tasks", "comma-separated task ids");
    add_set(cp, ca);

    CLI::App* ig = app.add_subcommand(
        "inspect-graph", "replay steps on a fresh world and print its instance/type graphs");
    ig->add_option("--config", ia.config, "flat key=value config file");
    add_named(ig, ia, "--task", "task", "task id (0..3)");
    add_named(ig, ia, "--layout", "layout", "layout name: full or mini");
    add_named(ig, ia, "--seed", "seed", "world seed");
    ig->add_option("steps", ia.steps,
                   "primitive actions to replay: names (left right forward pickup drop toggle) "
                   "or codes 0..5, comma lists allowed");
    add_set(ig, ia);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (tr->parsed()) {
            cmd_train(parse_config(ta.config, ta.overrides()), out);
        } else if (ev->parsed()) {
            cmd_eval(parse_config(ea.config, ea.overrides()), out);
        } else if (cp->parsed()) {
            std::vector<RunConfig> cfgs;
            if (ca.files.empty()) {
                cfgs.push_back(parse_config(std::nullopt, ca.overrides()));
            } else {
                for (const std::string& f : ca.files)
                    cfgs.push_back(parse_config(f, ca.overrides()));
            }
            cmd_compare(std::move(cfgs), out);
        } else if (ig->parsed()) {
            cmd_inspect_graph(parse_config(ia.config, ia.overrides()), ia.steps, out);
        }
        return 0;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        err << "io error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace kix
