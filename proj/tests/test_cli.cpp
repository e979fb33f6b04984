#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "kix/cli.hpp"
#include "kix/env.hpp"
#include "kix/errors.hpp"
#include "kix/eval.hpp"
#include "kix/graphs.hpp"
#include "kix/nets.hpp"
#include "kix/trainer.hpp"

using namespace kix;

namespace {

std::filesystem::path tmp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("kix_cli_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is.good());
    std::ostringstream os;
    os << is.rdbuf();
    return std::move(os).str();
}

std::filesystem::path write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    REQUIRE(os.good());
    os << text;
    os.close();
    return path;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::istringstream is(text);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(is, line)) lines.push_back(line);
    return lines;
}

// Tiny untrained checkpoint; enough for eval/compare plumbing tests.
std::string save_mini_checkpoint(const std::filesystem::path& dir, Variant v,
                                 std::uint64_t net_seed) {
    VariantConfig cfg;
    cfg.variant = v;
    cfg.task = 0;
    cfg.layout = layout_mini();
    cfg.meta_batch = 10;
    cfg.interaction_budget = 8;
    cfg.reach_budget = 8;
    cfg.fallback_budget = 4;
    cfg.base_horizon = 12;
    cfg.workers = 1;
    const std::string path = (dir / ("ckpt_" + std::string(variant_name(v)) + ".kix")).string();
    save_checkpoint(path, make_repository(v, net_seed), cfg, default_meta_ppo(),
                    default_prim_ppo());
    return path;
}

// Shared training shrink for the rerun tests: a few hundred env steps.
std::vector<std::string> tiny_train_overrides(const std::string& out_dir) {
    return {"variant=kix1",          "task=0",
            "layout=mini",           "seed=5",
            "total_env_steps=200",   "workers=2",
            "meta_batch=8",          "interaction_budget=6",
            "reach_budget=6",        "fallback_budget=4",
            "eval_cadence=1",        "eval_episodes=2",
            "meta_ppo.minibatch=4",  "episodes=4",
            "out_dir=" + out_dir};
}

int run_argv(const std::vector<std::string>& args, std::string* out_text = nullptr,
             std::string* err_text = nullptr) {
    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const std::string& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    if (out_text) *out_text = out.str();
    if (err_text) *err_text = err.str();
    return code;
}

}  // namespace

TEST_CASE("the key table is duplicate-free and fully rendered") {
    const std::vector<std::string> keys = config_keys();
    const std::set<std::string> unique(keys.begin(), keys.end());
    CHECK_EQ(unique.size(), keys.size());

    const RunConfig defaults;
    const std::string rendered = render_config(defaults);
    int rendered_keys = 0;
    for (const std::string& key : keys) {
        // Every key except the input-only "layout" macro appears in the echo.
        const bool in_echo = rendered.find("\n" + key + "=") != std::string::npos ||
                             rendered.rfind(key + "=", 0) == 0;
        if (key == "layout") {
            CHECK_FALSE(in_echo);
        } else {
            CHECK(in_echo);
            ++rendered_keys;
        }
    }
    CHECK_EQ(lines_of(rendered).size(), static_cast<size_t>(rendered_keys));

    const std::string help = describe_keys();
    for (const std::string& key : keys) CHECK(help.find(key) != std::string::npos);
}

TEST_CASE("defaults render the documented values") {
    const std::string text = render_config(RunConfig{});
    CHECK(text.find("command=\n") != std::string::npos);
    CHECK(text.find("variant=kix1\n") != std::string::npos);
    CHECK(text.find("task=0\n") != std::string::npos);
    CHECK(text.find("layout.rooms_rows=3\n") != std::string::npos);
    CHECK(text.find("layout.rooms_cols=3\n") != std::string::npos);
    CHECK(text.find("layout.interior=5\n") != std::string::npos);
    CHECK(text.find("layout.blockers=1\n") != std::string::npos);
    CHECK(text.find("total_env_steps=200000\n") != std::string::npos);
    CHECK(text.find("meta_ppo.lr=0.001\n") != std::string::npos);
    CHECK(text.find("meta_ppo.minibatch=16\n") != std::string::npos);
    CHECK(text.find("prim_ppo.lr=0.00025\n") != std::string::npos);
    CHECK(text.find("prim_ppo.minibatch=64\n") != std::string::npos);
    CHECK(text.find("seed=1\n") != std::string::npos);
    CHECK(text.find("out_dir=runs/default\n") != std::string::npos);
    CHECK(text.find("checkpoint=\n") != std::string::npos);
    CHECK(text.find("episodes=200\n") != std::string::npos);
    CHECK(text.find("mode=greedy\n") != std::string::npos);
    CHECK(text.find("eval_workers=1\n") != std::string::npos);
    CHECK(text.find("tasks=0,1,2,3\n") != std::string::npos);
}

TEST_CASE("overrides beat the file and later assignments win") {
    const auto dir = tmp_dir("precedence");
    const auto file = write_file(dir / "run.txt", "seed=1\nseed=3\n");

    CHECK_EQ(parse_config(file.string(), {}).seed, 3);
    CHECK_EQ(parse_config(file.string(), {"seed=2"}).seed, 2);
    CHECK_EQ(parse_config(file.string(), {"seed=2", "seed=9"}).seed, 9);
    CHECK_EQ(parse_config(std::nullopt, {"seed=7"}).seed, 7);
}

TEST_CASE("file parsing skips comments and tolerates whitespace and CRLF") {
    const auto dir = tmp_dir("format");
    const auto file = write_file(dir / "run.txt",
                                 "# a comment line\n"
                                 "\n"
                                 "  seed = 7  \n"
                                 "variant=kix2\r\n"
                                 "out_dir=runs/a b\n");
    const RunConfig cfg = parse_config(file.string(), {});
    CHECK_EQ(cfg.seed, 7);
    CHECK_EQ(cfg.run.variant, Variant::KIX2);
    CHECK_EQ(cfg.out_dir, "runs/a b");
}

TEST_CASE("errors name the offending key") {
    RunConfig cfg;
    CHECK_THROWS_WITH_AS(apply_override(cfg, "gama", "0.9"),
                         doctest::Contains("gama"), ConfigError);
    CHECK_THROWS_WITH_AS(apply_override(cfg, "seed", "abc"),
                         doctest::Contains("seed"), ConfigError);
    CHECK_THROWS_WITH_AS(apply_override(cfg, "task", "1.5"),
                         doctest::Contains("task"), ConfigError);
    CHECK_THROWS_WITH_AS(apply_override(cfg, "meta_ppo.lr", "fast"),
                         doctest::Contains("meta_ppo.lr"), ConfigError);
    CHECK_THROWS_WITH_AS(apply_override(cfg, "layout", "huge"),
                         doctest::Contains("layout"), ConfigError);
    CHECK_THROWS_WITH_AS(apply_override(cfg, "layout.blockers", "maybe"),
                         doctest::Contains("layout.blockers"), ConfigError);
    CHECK_THROWS_WITH_AS(apply_override(cfg, "variant", "kix9"),
                         doctest::Contains("variant"), ConfigError);
    CHECK_THROWS_WITH_AS(apply_override(cfg, "mode", "fast"),
                         doctest::Contains("mode"), ConfigError);
    CHECK_THROWS_WITH_AS(apply_override(cfg, "command", "serve"),
                         doctest::Contains("command"), ConfigError);
    CHECK_THROWS_WITH_AS(apply_override(cfg, "episodes", "99999999999999999999"),
                         doctest::Contains("episodes"), ConfigError);

    const auto dir = tmp_dir("badfile");
    const auto junk = write_file(dir / "junk.txt", "seed 7\n");
    CHECK_THROWS_WITH_AS(parse_config(junk.string(), {}),
                         doctest::Contains("key=value"), ConfigError);
    const auto unknown = write_file(dir / "unknown.txt", "gama=0.9\n");
    CHECK_THROWS_WITH_AS(parse_config(unknown.string(), {}),
                         doctest::Contains("gama"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config(std::nullopt, {"seed"}),
                         doctest::Contains("key=value"), ConfigError);
    CHECK_THROWS_AS(parse_config((dir / "missing.txt").string(), {}), IoError);
}

TEST_CASE("the resolved-config echo re-parses to an identical config") {
    RunConfig cfg;
    cfg.command = "eval";
    cfg.run.variant = Variant::BASE;
    cfg.run.task = 3;
    cfg.run.layout = layout_mini();
    cfg.run.layout.blockers = false;
    cfg.run.meta_batch = 24;
    cfg.run.interaction_budget = 9;
    cfg.run.reach_budget = 7;
    cfg.run.fallback_budget = 5;
    cfg.run.base_horizon = 48;
    cfg.run.total_env_steps = 12345;
    cfg.run.workers = 3;
    cfg.run.eval_cadence = 2;
    cfg.run.eval_episodes = 6;
    cfg.meta_ppo.lr = 1e-5;
    cfg.meta_ppo.clip_eps = 0.15;
    cfg.meta_ppo.normalize_advantages = false;
    cfg.prim_ppo.gamma_prim = 0.875;
    cfg.prim_ppo.epochs = 7;
    cfg.seed = 18446744073709551615ULL;
    cfg.out_dir = "runs/a b";
    cfg.checkpoint = "ckpts/model.kix";
    cfg.episodes = 77;
    cfg.mode = ChoiceMode::Sample;
    cfg.eval_workers = 4;
    cfg.tasks = "2,0";

    const auto dir = tmp_dir("roundtrip");
    const std::string echoed = echo_config(cfg, dir.string());
    CHECK_EQ(echoed, (dir / "config.txt").string());
    CHECK_EQ(read_file(echoed), render_config(cfg));

    const RunConfig back = parse_config(echoed, {});
    CHECK_EQ(render_config(back), render_config(cfg));

    // A second round through the echo stays fixed.
    const std::string echoed2 = echo_config(back, dir.string(), "config2.txt");
    CHECK_EQ(read_file(echoed2), read_file(echoed));
}

// --- inspect-graph ---

TEST_CASE("fresh task-0 scenes expose visible type edges to the door type only") {
    RunConfig cfg;
    cfg.run.task = 0;
    cfg.run.layout = layout_full();
    int scenes_with_edges = 0;
    for (std::uint64_t seed = 1; seed <= 12; ++seed) {
        cfg.seed = seed;
        std::ostringstream out;
        cmd_inspect_graph(cfg, {}, out);
        const std::string text = out.str();
        CHECK(text.find("world: task=0 seed=" + std::to_string(seed)) == 0);
        CHECK(text.find("node 0 agent") != std::string::npos);
        bool in_type_graph = false;
        int visible_edges = 0;
        for (const std::string& line : lines_of(text)) {
            if (line.rfind("type-graph", 0) == 0) in_type_graph = true;
            if (!in_type_graph || line.rfind("edge visible ", 0) != 0) continue;
            CHECK_EQ(line, "edge visible agent -> door");
            ++visible_edges;
        }
        if (visible_edges > 0) ++scenes_with_edges;
    }
    // The hand-check is only meaningful when some scene actually sees a door.
    CHECK(scenes_with_edges > 0);
}

TEST_CASE("inspect-graph replays named, coded, and comma-joined steps") {
    RunConfig cfg;
    cfg.seed = 3;
    cfg.run.task = 0;
    cfg.run.layout = layout_full();

    std::ostringstream out;
    cmd_inspect_graph(cfg, {"forward", "2,left"}, out);

    WorldState world = generate_world(3, 0, layout_full());
    step(world, Action::Forward);
    step(world, Action::Forward);
    step(world, Action::Left);
    const Observation obs = render_observation(world);
    const InstanceGraph gi = build_instance_graph(obs, world.inventory);
    std::ostringstream want;
    want << "world: task=0 seed=3 layout=3x3 steps=3 agent=(" << world.agent_x << ","
         << world.agent_y << ") heading=" << heading_name(world.heading) << " done=0\n"
         << serialize_instance_graph(gi) << serialize_type_graph(map_to_type_graph(gi));
    CHECK_EQ(out.str(), want.str());
}

TEST_CASE("inspect-graph rejects junk tokens and steps past the episode end") {
    RunConfig cfg;
    cfg.seed = 3;
    std::ostringstream out;
    CHECK_THROWS_WITH_AS(cmd_inspect_graph(cfg, {"sideways"}, out),
                         doctest::Contains("sideways"), ConfigError);
    CHECK_THROWS_WITH_AS(cmd_inspect_graph(cfg, {"7"}, out),
                         doctest::Contains("action code"), ConfigError);

    // Mini episodes time out after c_t steps; one more token must fail.
    cfg.run.layout = layout_mini();
    WorldState world = generate_world(3, 0, layout_mini());
    std::vector<std::string> spins(static_cast<size_t>(world.c_t) + 1, "left");
    CHECK_THROWS_WITH_AS(cmd_inspect_graph(cfg, spins, out),
                         doctest::Contains("after the episode"), ConfigError);
}

// --- eval ---

TEST_CASE("cmd_eval writes the echo and a log matching a direct rollout") {
    const auto dir = tmp_dir("eval");
    const std::string ckpt = save_mini_checkpoint(dir, Variant::KIX1, 11);

    RunConfig cfg;
    cfg.checkpoint = ckpt;
    cfg.run.task = 1;
    cfg.episodes = 3;
    cfg.seed = 9;
    cfg.eval_workers = 2;
    cfg.out_dir = (dir / "run").string();

    std::ostringstream out;
    const std::string log_path = cmd_eval(cfg, out);
    CHECK_EQ(log_path, (dir / "run" / "episodes_kix1_task1_seed9.csv").string());
    CHECK(out.str().find("eval: variant=kix1 task=1 episodes=3") != std::string::npos);
    CHECK(out.str().find("log: " + log_path) != std::string::npos);

    const RunConfig echoed = parse_config((dir / "run" / "config.txt").string(), {});
    CHECK_EQ(echoed.command, "eval");
    CHECK_EQ(echoed.checkpoint, ckpt);

    const EpisodeLog direct = rollout_eval(load_checkpoint(ckpt), 1, 3, 9);
    const EpisodeLog logged = read_episode_log(log_path);
    REQUIRE_EQ(logged.episodes.size(), direct.episodes.size());
    for (size_t i = 0; i < direct.episodes.size(); ++i) {
        CHECK_EQ(logged.episodes[i].seed, direct.episodes[i].seed);
        CHECK_EQ(logged.episodes[i].env_return, direct.episodes[i].env_return);
        CHECK_EQ(logged.episodes[i].steps, direct.episodes[i].steps);
        CHECK_EQ(logged.episodes[i].room_visits, direct.episodes[i].room_visits);
    }
}

TEST_CASE("cmd_eval fails without a checkpoint and on a bad task id") {
    const auto dir = tmp_dir("evalbad");
    RunConfig cfg;
    cfg.out_dir = (dir / "run").string();
    std::ostringstream out;
    CHECK_THROWS_WITH_AS(cmd_eval(cfg, out), doctest::Contains("checkpoint"), ConfigError);

    cfg.checkpoint = (dir / "missing.kix").string();
    CHECK_THROWS_AS(cmd_eval(cfg, out), IoError);

    cfg.checkpoint = save_mini_checkpoint(dir, Variant::KIX1, 11);
    cfg.run.task = 7;
    CHECK_THROWS_WITH_AS(cmd_eval(cfg, out), doctest::Contains("task"), ConfigError);
    // Failed evals leave no run directory behind.
    CHECK_FALSE(std::filesystem::exists(dir / "run"));
}

// --- compare ---

TEST_CASE("cmd_compare emits one profile row per variant and task") {
    const auto dir = tmp_dir("compare");
    std::vector<RunConfig> cfgs;
    for (Variant v : {Variant::KIX1, Variant::KIX2, Variant::BASE}) {
        RunConfig cfg;
        cfg.checkpoint = save_mini_checkpoint(dir, v, 21);
        cfg.episodes = 2;
        cfg.seed = 4;
        cfg.out_dir = (dir / "report").string();
        cfgs.push_back(cfg);
    }

    std::ostringstream out;
    const std::vector<std::string> files = cmd_compare(cfgs, out);
    REQUIRE_EQ(files.size(), 4);

    // 3 variants x 4 tasks: the header plus 12 profile cells, grouped by
    // variant in enum order with tasks ascending.
    const std::string profiles = read_file(files[0]);
    const std::vector<std::string> rows = lines_of(profiles);
    REQUIRE_EQ(rows.size(), 13);
    int row = 1;
    for (const char* variant : {"kix1", "kix2", "base"})
        for (int task = 0; task < 4; ++task, ++row)
            CHECK(rows[static_cast<size_t>(row)].rfind(
                      std::string(variant) + "," + std::to_string(task) + ",", 0) == 0);

    for (size_t i = 0; i < cfgs.size(); ++i) {
        const auto echo = dir / "report" / ("config_" + std::to_string(i) + ".txt");
        CHECK_EQ(parse_config(echo.string(), {}).command, "compare");
    }
    for (const char* variant : {"kix1", "kix2", "base"})
        for (int task = 0; task < 4; ++task)
            CHECK(std::filesystem::exists(dir / "report" /
                                          ("episodes_" + std::string(variant) + "_task" +
                                           std::to_string(task) + "_seed4.csv")));
    CHECK(out.str().find("report: " + files[3]) != std::string::npos);
}

TEST_CASE("cmd_compare validates its inputs") {
    const auto dir = tmp_dir("comparebad");
    std::ostringstream out;
    CHECK_THROWS_WITH_AS(cmd_compare({}, out), doctest::Contains("at least one"), ConfigError);

    RunConfig ok;
    ok.checkpoint = save_mini_checkpoint(dir, Variant::KIX1, 11);
    ok.out_dir = (dir / "report").string();
    RunConfig hollow = ok;
    hollow.checkpoint = "";
    CHECK_THROWS_WITH_AS(cmd_compare({ok, hollow}, out),
                         doctest::Contains("checkpoint"), ConfigError);

    RunConfig junk_tasks = ok;
    junk_tasks.tasks = "0,junk";
    CHECK_THROWS_WITH_AS(cmd_compare({junk_tasks}, out),
                         doctest::Contains("tasks"), ConfigError);
    RunConfig no_tasks = ok;
    no_tasks.tasks = "";
    CHECK_THROWS_WITH_AS(cmd_compare({no_tasks}, out),
                         doctest::Contains("tasks"), ConfigError);
}

// --- the argv driver ---

TEST_CASE("run_cli maps outcomes to categorized exit codes") {
    std::string out, err;

    CHECK_EQ(run_argv({"kix"}, &out, &err), 2);
    CHECK_FALSE(err.empty());

    CHECK_EQ(run_argv({"kix", "--help"}, &out, &err), 0);
    CHECK(out.find("train") != std::string::npos);
    CHECK(out.find("Configuration keys") != std::string::npos);
    CHECK(out.find("inspect-graph") != std::string::npos);

    CHECK_EQ(run_argv({"kix", "train", "--bogus"}, &out, &err), 2);

    CHECK_EQ(run_argv({"kix", "eval", "--task", "0"}, &out, &err), 2);
    CHECK(err.find("checkpoint") != std::string::npos);

    CHECK_EQ(run_argv({"kix", "eval", "--checkpoint", "/nonexistent.kix"}, &out, &err), 3);
    CHECK(err.find("checkpoint") != std::string::npos);

    CHECK_EQ(run_argv({"kix", "train", "--set", "gama=0.9"}, &out, &err), 2);
    CHECK(err.find("gama") != std::string::npos);

    CHECK_EQ(run_argv({"kix", "inspect-graph", "--seed", "3", "forward"}, &out, &err), 0);
    CHECK(out.find("type-graph") != std::string::npos);
}

TEST_CASE("run_cli applies file, named flags, and --set pairs in order") {
    const auto dir = tmp_dir("argv");
    const auto file = write_file(dir / "run.txt", "seed=1\ntask=2\n");
    std::string out;

    CHECK_EQ(run_argv({"kix", "inspect-graph", "--config", file.string(), "--seed", "2"}, &out),
             0);
    CHECK(out.find("world: task=2 seed=2") == 0);

    // --set wins over the named flag for the same key.
    CHECK_EQ(run_argv({"kix", "inspect-graph", "--config", file.string(), "--seed", "2",
                       "--set", "seed=5", "--set", "task=0"},
                      &out),
             0);
    CHECK(out.find("world: task=0 seed=5") == 0);
}

TEST_CASE("training driven from its own echo reproduces logs byte-identically") {
    const auto dir = tmp_dir("rerun");
    const std::string run_a = (dir / "a").string();
    const std::string run_b = (dir / "b").string();

    std::ostringstream out_a;
    cmd_train(parse_config(std::nullopt, tiny_train_overrides(run_a)), out_a);
    CHECK(out_a.str().find("config: " + run_a) != std::string::npos);

    // Re-run from the echo, redirected into a fresh directory.
    std::ostringstream out_b;
    cmd_train(parse_config(run_a + "/config.txt", {"out_dir=" + run_b}), out_b);

    for (const char* name : {"train_log.csv", "losses.csv", "eval_log.csv"}) {
        CAPTURE(name);
        CHECK_EQ(read_file(run_a + "/" + name), read_file(run_b + "/" + name));
    }
    CHECK_EQ(read_file(run_a + "/checkpoints/ckpt_final.kix"),
             read_file(run_b + "/checkpoints/ckpt_final.kix"));

    // The eval command is reproducible from its echo the same way.
    RunConfig ev;
    ev.checkpoint = run_a + "/checkpoints/ckpt_final.kix";
    ev.run.task = 0;
    ev.episodes = 4;
    ev.seed = 13;
    ev.out_dir = (dir / "e1").string();
    std::ostringstream eval_out;
    const std::string log1 = cmd_eval(ev, eval_out);
    const RunConfig again = parse_config((dir / "e1" / "config.txt").string(),
                                         {"out_dir=" + (dir / "e2").string()});
    const std::string log2 = cmd_eval(again, eval_out);
    CHECK_EQ(read_file(log1), read_file(log2));
}
