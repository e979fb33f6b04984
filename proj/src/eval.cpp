#include "kix/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include "kix/errors.hpp"
#include "kix/textio.hpp"

namespace kix {

// --- Evaluation rollouts ---

EpisodeLog rollout_eval(const Checkpoint& ckpt, int task, int episodes, std::uint64_t seed,
                        ChoiceMode mode, int workers) {
    if (episodes < 1) throw ConfigError("evaluation needs at least one episode");
    if (workers < 1) throw ConfigError("evaluation needs at least one worker");
    if (ckpt.repo.variant != ckpt.config.variant)
        throw ConfigError("checkpoint repository does not match its configuration");

    VariantConfig cfg = ckpt.config;
    cfg.task = task;
    cfg.validate();

    const int rooms = cfg.layout.rooms_rows * cfg.layout.rooms_cols;
    const int pitch = cfg.layout.interior + 1;

    EpisodeLog log;
    log.variant = cfg.variant;
    log.task = task;
    log.seed = seed;
    log.rooms_rows = cfg.layout.rooms_rows;
    log.rooms_cols = cfg.layout.rooms_cols;
    log.episodes.resize(static_cast<size_t>(episodes));

    // Episodes are mutually independent and land in their own slots, so any
    // worker count produces the same log.
    auto run_slice = [&](int first, int stride) {
        for (int i = first; i < episodes; i += stride) {
            EpisodeRecord& rec = log.episodes[static_cast<size_t>(i)];
            rec.task = task;
            rec.seed = derive_seed(seed, static_cast<std::uint64_t>(i), 0);
            rec.room_visits.assign(static_cast<size_t>(rooms), 0);
            WorldState world = generate_world(rec.seed, task, cfg.layout);
            Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i), 1));
            auto hook = [&](const WorldState& ws) {
                if (ws.agent_x % pitch != 0 && ws.agent_y % pitch != 0)
                    rec.room_visits[static_cast<size_t>(
                        room_index(ws, ws.agent_x, ws.agent_y))]++;
            };
            EpisodeOutcome out = play_episode(ckpt.repo, cfg, world, rng, mode, hook);
            rec.env_return = out.env_return;
            rec.success = out.success;
            rec.steps = out.steps;
        }
    };

    const int pool = std::min(workers, episodes);
    if (pool == 1) {
        run_slice(0, 1);
    } else {
        std::vector<std::exception_ptr> errors(static_cast<size_t>(pool));
        std::vector<std::thread> threads;
        threads.reserve(static_cast<size_t>(pool));
        for (int w = 0; w < pool; ++w)
            threads.emplace_back([&, w] {
                try {
                    run_slice(w, pool);
                } catch (...) {
                    errors[static_cast<size_t>(w)] = std::current_exception();
                }
            });
        for (auto& t : threads) t.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }
    return log;
}

// --- Return profiles ---

std::vector<double> top_k_returns(const EpisodeLog& log, int k) {
    const int n = static_cast<int>(log.episodes.size());
    const int take = std::min(std::max(k, 0), n);
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return log.episodes[static_cast<size_t>(a)].env_return >
               log.episodes[static_cast<size_t>(b)].env_return;
    });
    std::vector<double> out;
    out.reserve(static_cast<size_t>(take));
    for (int i = 0; i < take; ++i)
        out.push_back(log.episodes[static_cast<size_t>(order[static_cast<size_t>(i)])].env_return);
    return out;
}

int report_k(int episodes, int k) {
    if (episodes <= 0) return 0;
    return std::max(1, std::min(k, episodes / 10));
}

// --- Visit distributions ---

VisitDistribution visit_distribution(const EpisodeLog& log) {
    if (log.rooms_rows < 1 || log.rooms_cols < 1)
        throw ConfigError("episode log has an empty room grid");
    const int rooms = log.rooms_rows * log.rooms_cols;
    std::vector<long> counts(static_cast<size_t>(rooms), 0);
    long total = 0;
    for (const EpisodeRecord& rec : log.episodes) {
        if (static_cast<int>(rec.room_visits.size()) != rooms)
            throw ConfigError("episode visit vector does not match the room grid");
        for (int r = 0; r < rooms; ++r) {
            const long v = rec.room_visits[static_cast<size_t>(r)];
            if (v < 0) throw ConfigError("episode log holds a negative visit count");
            counts[static_cast<size_t>(r)] += v;
            total += v;
        }
    }
    if (total <= 0) throw ConfigError("episode log has no interior-cell steps to distribute");

    VisitDistribution d;
    d.prob.resize(static_cast<size_t>(rooms));
    d.coords.resize(static_cast<size_t>(rooms));
    for (int r = 0; r < rooms; ++r) {
        d.prob[static_cast<size_t>(r)] =
            static_cast<double>(counts[static_cast<size_t>(r)]) / static_cast<double>(total);
        d.coords[static_cast<size_t>(r)] = {r / log.rooms_cols, r % log.rooms_cols};
    }
    return d;
}

// --- Exact transport ---

namespace {

double ground_cost(const std::array<int, 2>& a, const std::array<int, 2>& b) {
    return static_cast<double>(std::abs(a[0] - b[0]) + std::abs(a[1] - b[1]));
}

}  // namespace

double wasserstein_exact(const VisitDistribution& p, const VisitDistribution& q) {
    const int n = static_cast<int>(p.prob.size());
    const int m = static_cast<int>(q.prob.size());
    if (n == 0 || m == 0) throw ConfigError("transport needs non-empty distributions");
    if (static_cast<int>(p.coords.size()) != n || static_cast<int>(q.coords.size()) != m)
        throw ConfigError("distribution coordinates do not match its probability vector");
    if (n != m || p.coords != q.coords) throw ConfigError("transport requires matching room grids");
    for (double v : p.prob)
        if (v < -1e-9) throw ConfigError("distribution holds negative mass");
    for (double v : q.prob)
        if (v < -1e-9) throw ConfigError("distribution holds negative mass");

    const double sa = std::accumulate(p.prob.begin(), p.prob.end(), 0.0);
    const double sb = std::accumulate(q.prob.begin(), q.prob.end(), 0.0);
    if (!(sa > 0.0) || !(sb > 0.0)) throw ConfigError("transport requires positive total mass");

    // Balance the marginals exactly; both sides are distributions, so the
    // rescale only absorbs rounding in their sums.
    std::vector<double> a = p.prob, b = q.prob;
    const double scale = sa / sb;
    for (double& v : b) v *= scale;

    std::vector<double> cost(static_cast<size_t>(n) * m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
            cost[static_cast<size_t>(i) * m + j] = ground_cost(p.coords[static_cast<size_t>(i)],
                                                               q.coords[static_cast<size_t>(j)]);

    // North-west-corner start: a staircase from (0,0) to (n-1,m-1) marks
    // exactly n+m-1 basic cells and spans every row and column.
    std::vector<double> x(static_cast<size_t>(n) * m, 0.0);
    std::vector<char> basic(static_cast<size_t>(n) * m, 0);
    {
        std::vector<double> da = a, db = b;
        int i = 0, j = 0;
        while (true) {
            const double t = std::min(da[static_cast<size_t>(i)], db[static_cast<size_t>(j)]);
            x[static_cast<size_t>(i) * m + j] += t;
            basic[static_cast<size_t>(i) * m + j] = 1;
            da[static_cast<size_t>(i)] -= t;
            db[static_cast<size_t>(j)] -= t;
            if (i == n - 1 && j == m - 1) break;
            if (j == m - 1) ++i;
            else if (i == n - 1) ++j;
            else if (da[static_cast<size_t>(i)] <= db[static_cast<size_t>(j)]) ++i;
            else ++j;
        }
    }

    // Transportation simplex. Entering cell: first negative reduced cost in
    // row-major order; leaving cell: smallest index among the cycle minima.
    // Both picks follow the smallest-index rule, so pivoting cannot cycle;
    // the iteration cap only guards against rounding pathologies.
    const double tol = 1e-12;
    std::vector<double> u(static_cast<size_t>(n)), v(static_cast<size_t>(m));
    std::vector<char> uk(static_cast<size_t>(n)), vk(static_cast<size_t>(m));
    for (long iter = 0;; ++iter) {
        if (iter > 100000) throw NumericError("transport pivoting failed to converge");

        // Potentials off the basis tree: u[0] anchors, the rest propagate.
        std::fill(uk.begin(), uk.end(), 0);
        std::fill(vk.begin(), vk.end(), 0);
        uk[0] = 1;
        u[0] = 0.0;
        int known = 1;
        bool progress = true;
        while (known < n + m && progress) {
            progress = false;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < m; ++j) {
                    if (!basic[static_cast<size_t>(i) * m + j]) continue;
                    if (uk[static_cast<size_t>(i)] && !vk[static_cast<size_t>(j)]) {
                        v[static_cast<size_t>(j)] =
                            cost[static_cast<size_t>(i) * m + j] - u[static_cast<size_t>(i)];
                        vk[static_cast<size_t>(j)] = 1;
                        ++known;
                        progress = true;
                    } else if (!uk[static_cast<size_t>(i)] && vk[static_cast<size_t>(j)]) {
                        u[static_cast<size_t>(i)] =
                            cost[static_cast<size_t>(i) * m + j] - v[static_cast<size_t>(j)];
                        uk[static_cast<size_t>(i)] = 1;
                        ++known;
                        progress = true;
                    }
                }
        }
        if (known < n + m) throw NumericError("transport basis lost connectivity");

        int ei = -1, ej = -1;
        for (int i = 0; i < n && ei < 0; ++i)
            for (int j = 0; j < m; ++j)
                if (!basic[static_cast<size_t>(i) * m + j] &&
                    cost[static_cast<size_t>(i) * m + j] - u[static_cast<size_t>(i)] -
                            v[static_cast<size_t>(j)] <
                        -tol) {
                    ei = i;
                    ej = j;
                    break;
                }
        if (ei < 0) break;

        // The entering cell closes one cycle with the tree path from row ei
        // to column ej. Nodes 0..n-1 are rows, n..n+m-1 are columns.
        std::vector<int> parent(static_cast<size_t>(n + m), -1);
        std::vector<int> parent_cell(static_cast<size_t>(n + m), -1);
        std::vector<char> seen(static_cast<size_t>(n + m), 0);
        std::vector<int> queue{ei};
        seen[static_cast<size_t>(ei)] = 1;
        for (size_t qh = 0; qh < queue.size(); ++qh) {
            const int node = queue[qh];
            if (node < n) {
                for (int j = 0; j < m; ++j)
                    if (basic[static_cast<size_t>(node) * m + j] && !seen[static_cast<size_t>(n + j)]) {
                        seen[static_cast<size_t>(n + j)] = 1;
                        parent[static_cast<size_t>(n + j)] = node;
                        parent_cell[static_cast<size_t>(n + j)] = node * m + j;
                        queue.push_back(n + j);
                    }
            } else {
                const int j = node - n;
                for (int i = 0; i < n; ++i)
                    if (basic[static_cast<size_t>(i) * m + j] && !seen[static_cast<size_t>(i)]) {
                        seen[static_cast<size_t>(i)] = 1;
                        parent[static_cast<size_t>(i)] = node;
                        parent_cell[static_cast<size_t>(i)] = i * m + j;
                        queue.push_back(i);
                    }
            }
        }
        if (!seen[static_cast<size_t>(n + ej)])
            throw NumericError("transport basis lost connectivity");

        // Walk the path back from column ej; signs alternate and the
        // entering cell itself gains flow.
        std::vector<int> plus{ei * m + ej}, minus;
        int node = n + ej;
        bool neg = true;
        while (node != ei) {
            (neg ? minus : plus).push_back(parent_cell[static_cast<size_t>(node)]);
            node = parent[static_cast<size_t>(node)];
            neg = !neg;
        }

        double theta = std::numeric_limits<double>::infinity();
        int leave = -1;
        for (int c : minus)
            if (leave < 0 || x[static_cast<size_t>(c)] < theta ||
                (x[static_cast<size_t>(c)] == theta && c < leave)) {
                theta = x[static_cast<size_t>(c)];
                leave = c;
            }
        for (int c : plus) x[static_cast<size_t>(c)] += theta;
        for (int c : minus) x[static_cast<size_t>(c)] -= theta;
        x[static_cast<size_t>(leave)] = 0.0;
        basic[static_cast<size_t>(leave)] = 0;
        basic[static_cast<size_t>(ei) * m + ej] = 1;
    }

    double w = 0.0;
    for (size_t c = 0; c < x.size(); ++c) w += x[c] * cost[c];
    return w;
}

// --- Persisted logs ---

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        const size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

constexpr const char* kLogColumns[] = {"variant", "task",    "seed",    "rooms_rows",
                                       "rooms_cols", "episode", "ep_task", "ep_seed",
                                       "return",  "success", "steps"};
constexpr int kLogFixed = 11;

Variant log_variant(const std::string& name, const std::string& path) {
    try {
        return variant_from_name(name);
    } catch (const ConfigError&) {
        throw IoError("episode log " + path + " names unknown variant '" + name + "'");
    }
}

}  // namespace

std::string write_episode_log(const std::string& dir, const EpisodeLog& log) {
    namespace fs = std::filesystem;
    if (log.rooms_rows < 1 || log.rooms_cols < 1)
        throw ConfigError("episode log has an empty room grid");
    const int rooms = log.rooms_rows * log.rooms_cols;

    fs::create_directories(dir);
    const std::string name = std::string("episodes_") + variant_name(log.variant) + "_task" +
                             std::to_string(log.task) + "_seed" + std::to_string(log.seed) +
                             ".csv";
    const fs::path path = fs::path(dir) / name;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write episode log " + path.string());

    for (int c = 0; c < kLogFixed; ++c) os << (c ? "," : "") << kLogColumns[c];
    for (int r = 0; r < rooms; ++r) os << ",visit_" << r;
    os << '\n';
    for (size_t i = 0; i < log.episodes.size(); ++i) {
        const EpisodeRecord& rec = log.episodes[i];
        if (static_cast<int>(rec.room_visits.size()) != rooms)
            throw ConfigError("episode visit vector does not match the room grid");
        os << variant_name(log.variant) << ',' << log.task << ',' << log.seed << ','
           << log.rooms_rows << ',' << log.rooms_cols << ',' << i << ',' << rec.task << ','
           << rec.seed << ',' << fmt_double(rec.env_return) << ',' << (rec.success ? 1 : 0) << ','
           << rec.steps;
        for (long v : rec.room_visits) os << ',' << v;
        os << '\n';
    }
    if (!os) throw IoError("failed while writing episode log " + path.string());
    return path.string();
}

EpisodeLog read_episode_log(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open episode log " + path);

    std::string line;
    if (!std::getline(is, line)) throw IoError("episode log " + path + " is empty");
    const std::vector<std::string> head = split_csv(line);
    if (static_cast<int>(head.size()) < kLogFixed + 1)
        throw IoError("episode log " + path + " header is too short");
    for (int c = 0; c < kLogFixed; ++c)
        if (head[static_cast<size_t>(c)] != kLogColumns[c])
            throw IoError("episode log " + path + " header names column '" +
                          head[static_cast<size_t>(c)] + "' where '" + kLogColumns[c] +
                          "' belongs");
    const int rooms = static_cast<int>(head.size()) - kLogFixed;
    for (int r = 0; r < rooms; ++r)
        if (head[static_cast<size_t>(kLogFixed + r)] != "visit_" + std::to_string(r))
            throw IoError("episode log " + path + " has a malformed visit column block");

    EpisodeLog log;
    size_t row = 0;
    while (std::getline(is, line)) {
        const std::vector<std::string> f = split_csv(line);
        if (f.size() != head.size())
            throw IoError("episode log " + path + " row " + std::to_string(row) + " has " +
                          std::to_string(f.size()) + " fields, header lists " +
                          std::to_string(head.size()));
        const Variant variant = log_variant(f[0], path);
        const int task = static_cast<int>(parse_int(f[1], "episode log"));
        const std::uint64_t seed = parse_uint(f[2], "episode log");
        const int rr = static_cast<int>(parse_int(f[3], "episode log"));
        const int rc = static_cast<int>(parse_int(f[4], "episode log"));
        if (row == 0) {
            log.variant = variant;
            log.task = task;
            log.seed = seed;
            log.rooms_rows = rr;
            log.rooms_cols = rc;
            if (rr * rc != rooms)
                throw IoError("episode log " + path + " room grid does not match its columns");
        } else if (variant != log.variant || task != log.task || seed != log.seed ||
                   rr != log.rooms_rows || rc != log.rooms_cols) {
            throw IoError("episode log " + path + " row " + std::to_string(row) +
                          " changes the log header fields");
        }
        if (parse_int(f[5], "episode log") != static_cast<long long>(row))
            throw IoError("episode log " + path + " row " + std::to_string(row) +
                          " is out of order");
        EpisodeRecord rec;
        rec.task = static_cast<int>(parse_int(f[6], "episode log"));
        rec.seed = parse_uint(f[7], "episode log");
        rec.env_return = parse_double(f[8], "episode log");
        const long long success = parse_int(f[9], "episode log");
        if (success != 0 && success != 1)
            throw IoError("episode log " + path + " success flag must be 0 or 1");
        rec.success = success == 1;
        rec.steps = static_cast<long>(parse_int(f[10], "episode log"));
        rec.room_visits.resize(static_cast<size_t>(rooms));
        for (int r = 0; r < rooms; ++r)
            rec.room_visits[static_cast<size_t>(r)] =
                static_cast<long>(parse_int(f[static_cast<size_t>(kLogFixed + r)], "episode log"));
        log.episodes.push_back(std::move(rec));
        ++row;
    }
    if (log.episodes.empty()) throw IoError("episode log " + path + " has no rows");
    return log;
}

// --- Reports ---

namespace {

// Hand-rolled histogram so reports stay dependency-free and byte-stable:
// fixed canvas, bars scaled against the max value, labels under the axis.
std::string svg_histogram(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<double>& values) {
    constexpr double kWidth = 640.0, kHeight = 360.0;
    constexpr double kLeft = 56.0, kRight = 16.0, kTop = 36.0, kBottom = 56.0;
    const double plot_w = kWidth - kLeft - kRight;
    const double plot_h = kHeight - kTop - kBottom;
    double vmax = 0.0;
    for (double v : values) vmax = std::max(vmax, v);
    if (vmax <= 0.0) vmax = 1.0;

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"360\" "
          "viewBox=\"0 0 640 360\">\n";
    os << "  <rect x=\"0\" y=\"0\" width=\"640\" height=\"360\" fill=\"white\"/>\n";
    os << "  <text x=\"320\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" "
          "font-size=\"14\">"
       << title << "</text>\n";
    os << "  <line x1=\"" << fmt_double(kLeft) << "\" y1=\"" << fmt_double(kTop) << "\" x2=\""
       << fmt_double(kLeft) << "\" y2=\"" << fmt_double(kHeight - kBottom)
       << "\" stroke=\"black\"/>\n";
    os << "  <line x1=\"" << fmt_double(kLeft) << "\" y1=\"" << fmt_double(kHeight - kBottom)
       << "\" x2=\"" << fmt_double(kWidth - kRight) << "\" y2=\""
       << fmt_double(kHeight - kBottom) << "\" stroke=\"black\"/>\n";
    os << "  <text x=\"" << fmt_double(kLeft - 6.0) << "\" y=\"" << fmt_double(kTop + 4.0)
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">"
       << fmt_double(vmax) << "</text>\n";
    os << "  <text x=\"" << fmt_double(kLeft - 6.0) << "\" y=\""
       << fmt_double(kHeight - kBottom + 4.0)
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">0</text>\n";

    const size_t count = labels.size();
    for (size_t i = 0; i < count; ++i) {
        const double slot = plot_w / static_cast<double>(count);
        const double bx = kLeft + slot * static_cast<double>(i) + slot * 0.15;
        const double bw = slot * 0.7;
        const double bh = plot_h * std::max(values[i], 0.0) / vmax;
        const double by = kHeight - kBottom - bh;
        os << "  <rect x=\"" << fmt_double(bx) << "\" y=\"" << fmt_double(by) << "\" width=\""
           << fmt_double(bw) << "\" height=\"" << fmt_double(bh) << "\" fill=\"#4477aa\"/>\n";
        os << "  <text x=\"" << fmt_double(bx + bw / 2.0) << "\" y=\""
           << fmt_double(std::max(by - 4.0, kTop + 10.0))
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">"
           << fmt_double(values[i]) << "</text>\n";
        os << "  <text x=\"" << fmt_double(bx + bw / 2.0) << "\" y=\""
           << fmt_double(kHeight - kBottom + 16.0)
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << labels[i]
           << "</text>\n";
    }
    os << "</svg>\n";
    return std::move(os).str();
}

void write_report_file(const std::filesystem::path& path, const std::string& body) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write report file " + path.string());
    os << body;
    if (!os) throw IoError("failed while writing report file " + path.string());
}

}  // namespace

std::vector<std::string> emit_report(const std::vector<EpisodeLog>& logs, const std::string& dir,
                                     const std::string& stem, int k) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    std::vector<const EpisodeLog*> order;
    order.reserve(logs.size());
    for (const EpisodeLog& l : logs) order.push_back(&l);
    std::stable_sort(order.begin(), order.end(), [](const EpisodeLog* a, const EpisodeLog* b) {
        if (a->variant != b->variant) return static_cast<int>(a->variant) < static_cast<int>(b->variant);
        if (a->task != b->task) return a->task < b->task;
        return a->seed < b->seed;
    });

    // Return profiles: one row per log.
    std::ostringstream profiles;
    profiles << "variant,task,seed,episodes,k,mean_topk,min_topk,max_topk,success_rate,"
                "mean_return\n";
    std::vector<std::string> bar_labels;
    std::vector<double> bar_values;
    for (const EpisodeLog* l : order) {
        const int n = static_cast<int>(l->episodes.size());
        const int kk = report_k(n, k);
        const std::vector<double> top = top_k_returns(*l, kk);
        double mean_topk = 0.0;
        for (double v : top) mean_topk += v;
        if (!top.empty()) mean_topk /= static_cast<double>(top.size());
        double mean_return = 0.0, success_rate = 0.0;
        for (const EpisodeRecord& rec : l->episodes) {
            mean_return += rec.env_return;
            success_rate += rec.success ? 1.0 : 0.0;
        }
        if (n > 0) {
            mean_return /= n;
            success_rate /= n;
        }
        profiles << variant_name(l->variant) << ',' << l->task << ',' << l->seed << ',' << n << ','
                 << kk << ',' << fmt_double(mean_topk) << ','
                 << fmt_double(top.empty() ? 0.0 : top.back()) << ','
                 << fmt_double(top.empty() ? 0.0 : top.front()) << ',' << fmt_double(success_rate)
                 << ',' << fmt_double(mean_return) << '\n';
        bar_labels.push_back(std::string(variant_name(l->variant)) + " t" +
                             std::to_string(l->task));
        bar_values.push_back(mean_topk);
    }

    // Distances: each non-zero task against its variant's first task-0 log.
    // Logs whose visit distribution is undefined (no interior steps) or whose
    // grid differs from the reference contribute no row.
    std::ostringstream distances;
    distances << "variant,task,seed,seed0,wasserstein\n";
    std::vector<std::string> dist_labels;
    std::vector<double> dist_values;
    for (const EpisodeLog* l : order) {
        if (l->task == 0) continue;
        const EpisodeLog* ref = nullptr;
        for (const EpisodeLog* c : order)
            if (c->variant == l->variant && c->task == 0) {
                ref = c;
                break;
            }
        if (!ref) continue;
        double w = 0.0;
        try {
            w = wasserstein_exact(visit_distribution(*l), visit_distribution(*ref));
        } catch (const ConfigError&) {
            continue;
        }
        distances << variant_name(l->variant) << ',' << l->task << ',' << l->seed << ','
                  << ref->seed << ',' << fmt_double(w) << '\n';
        dist_labels.push_back(std::string(variant_name(l->variant)) + " t" +
                              std::to_string(l->task));
        dist_values.push_back(w);
    }

    const fs::path profiles_csv = fs::path(dir) / ("profiles_" + stem + ".csv");
    const fs::path profiles_svg = fs::path(dir) / ("profiles_" + stem + ".svg");
    const fs::path distances_csv = fs::path(dir) / ("distances_" + stem + ".csv");
    const fs::path distances_svg = fs::path(dir) / ("distances_" + stem + ".svg");
    write_report_file(profiles_csv, std::move(profiles).str());
    write_report_file(profiles_svg,
                      svg_histogram("mean top-k return by agent and task", bar_labels, bar_values));
    write_report_file(distances_csv, std::move(distances).str());
    write_report_file(distances_svg,
                      svg_histogram("visit-shift distance to the trained task", dist_labels,
                                    dist_values));
    return {profiles_csv.string(), profiles_svg.string(), distances_csv.string(),
            distances_svg.string()};
}

}  // namespace kix
