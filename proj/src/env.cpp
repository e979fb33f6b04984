#include "kix/env.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kix/errors.hpp"

namespace kix {

namespace {

// Draws palette colors without replacement, reshuffling once exhausted.
class ColorDeck {
  public:
    explicit ColorDeck(Rng& rng) : rng_(rng) { reshuffle(); }

    int draw() {
        if (pos_ == kNumColors) reshuffle();
        return order_[pos_++];
    }

  private:
    void reshuffle() {
        for (int i = 0; i < kNumColors; ++i) order_[i] = i;
        for (int i = kNumColors - 1; i > 0; --i) {
            int j = static_cast<int>(rng_.below(static_cast<std::uint64_t>(i) + 1));
            std::swap(order_[i], order_[j]);
        }
        pos_ = 0;
    }

    Rng& rng_;
    std::array<int, kNumColors> order_{};
    int pos_ = 0;
};

struct DoorSite {
    int x = 0;
    int y = 0;
    int room_a = 0;  // row-major room ids on each side
    int room_b = 0;
};

int pitch(const LayoutConfig& l) { return l.interior + 1; }

// Horizontal-pair doors in row-major order, then vertical-pair doors.
std::vector<DoorSite> door_sites(const LayoutConfig& l) {
    std::vector<DoorSite> sites;
    const int p = pitch(l);
    for (int r = 0; r < l.rooms_rows; ++r)
        for (int c = 0; c + 1 < l.rooms_cols; ++c)
            sites.push_back({(c + 1) * p, r * p + 1 + l.interior / 2, r * l.rooms_cols + c,
                             r * l.rooms_cols + c + 1});
    for (int r = 0; r + 1 < l.rooms_rows; ++r)
        for (int c = 0; c < l.rooms_cols; ++c)
            sites.push_back({c * p + 1 + l.interior / 2, (r + 1) * p, r * l.rooms_cols + c,
                             (r + 1) * l.rooms_cols + c});
    return sites;
}

std::pair<int, int> room_of_id(const LayoutConfig& l, int room) {
    return {room / l.rooms_cols, room % l.rooms_cols};
}

// Row-major free interior cells of a room.
std::vector<std::pair<int, int>> free_cells(const WorldState& w, int room) {
    auto [r, c] = room_of_id(w.layout, room);
    const int p = pitch(w.layout);
    std::vector<std::pair<int, int>> out;
    for (int y = r * p + 1; y <= r * p + w.layout.interior; ++y)
        for (int x = c * p + 1; x <= c * p + w.layout.interior; ++x)
            if (w.at(x, y).type == kCellEmpty) out.push_back({x, y});
    return out;
}

std::pair<int, int> pick_free_cell(const WorldState& w, int room, Rng& rng) {
    auto cells = free_cells(w, room);
    if (cells.empty())
        throw std::runtime_error("world generation failed: no free cell left in room " +
                                 std::to_string(room));
    return cells[rng.below(cells.size())];
}

int place_object(WorldState& w, int x, int y, int type, int color) {
    Cell& cell = w.at(x, y);
    if (cell.type != kCellEmpty)
        throw std::runtime_error("world generation failed: cell (" + std::to_string(x) + "," +
                                 std::to_string(y) + ") already occupied");
    cell.type = type;
    cell.color = color;
    cell.id = w.next_object_id++;
    return cell.id;
}

const std::array<int, 5> kNonBlueColors = {kColorRed, kColorGreen, kColorPurple, kColorYellow,
                                           kColorGrey};

bool door_passable(const Cell& cell) {
    return cell.type == kCellDoor && cell.door_state == kDoorOpen;
}

void forward_delta(int heading, int& dx, int& dy) {
    switch (heading) {
        case kNorth: dx = 0; dy = -1; break;
        case kEast: dx = 1; dy = 0; break;
        case kSouth: dx = 0; dy = 1; break;
        default: dx = -1; dy = 0; break;
    }
}

}  // namespace

LayoutConfig layout_full() { return {3, 3, 5, true}; }
LayoutConfig layout_mini() { return {1, 2, 4, false}; }

LayoutConfig layout_by_name(const std::string& name) {
    if (name == "full") return layout_full();
    if (name == "mini") return layout_mini();
    throw ConfigError("unknown layout '" + name + "' (expected 'full' or 'mini')");
}

bool WorldState::operator==(const WorldState& o) const {
    return width == o.width && height == o.height && layout.rooms_rows == o.layout.rooms_rows &&
           layout.rooms_cols == o.layout.rooms_cols && layout.interior == o.layout.interior &&
           layout.blockers == o.layout.blockers && task == o.task && grid == o.grid &&
           agent_x == o.agent_x && agent_y == o.agent_y && heading == o.heading &&
           inventory == o.inventory && c == o.c && c_t == o.c_t && last_room == o.last_room &&
           relocated == o.relocated && done == o.done && success == o.success &&
           next_object_id == o.next_object_id && destroyed_box_ids == o.destroyed_box_ids &&
           rng.state() == o.rng.state();
}

int num_rooms(const WorldState& w) { return w.layout.rooms_rows * w.layout.rooms_cols; }

WorldState generate_world(std::uint64_t seed, int task, const LayoutConfig& layout) {
    if (task < 0 || task > 3) throw ConfigError("task must be in [0, 3]");
    if (layout.rooms_rows < 1 || layout.rooms_cols < 1 || layout.interior < 2)
        throw ConfigError("layout needs rooms >= 1x1 and interior >= 2");
    if (layout.rooms_rows * layout.rooms_cols < 2)
        throw ConfigError("layout needs at least two rooms");

    WorldState w;
    w.layout = layout;
    w.task = task;
    const int p = pitch(layout);
    w.width = layout.rooms_cols * p + 1;
    w.height = layout.rooms_rows * p + 1;
    w.c_t = 40L * layout.rooms_rows * layout.rooms_cols * layout.interior * layout.interior;
    w.rng = Rng(seed);

    // Walls on every lattice line, empty interiors.
    w.grid.assign(static_cast<size_t>(w.width) * w.height, Cell{});
    for (int y = 0; y < w.height; ++y)
        for (int x = 0; x < w.width; ++x)
            if (x % p == 0 || y % p == 0) w.at(x, y).type = kCellWall;

    // Doors: one per adjacent room pair, closed, random color.
    const auto sites = door_sites(layout);
    for (const auto& s : sites) {
        Cell& cell = w.at(s.x, s.y);
        cell.type = kCellDoor;
        cell.color = static_cast<int>(w.rng.below(kNumColors));
        cell.door_state = kDoorClosed;
        cell.id = w.next_object_id++;
    }

    const int middle = (layout.rooms_rows / 2) * layout.rooms_cols + layout.rooms_cols / 2;
    std::vector<int> corners;
    for (int r : {0, layout.rooms_rows - 1})
        for (int c : {0, layout.rooms_cols - 1}) {
            int room = r * layout.rooms_cols + c;
            if (room != middle && std::find(corners.begin(), corners.end(), room) == corners.end())
                corners.push_back(room);
        }
    std::sort(corners.begin(), corners.end());
    if (corners.empty()) throw ConfigError("layout has no corner room distinct from the middle");

    // Goal: blue ball in a random corner room, boxed for task 1.
    const int goal_room = corners[w.rng.below(corners.size())];
    {
        auto [gx, gy] = pick_free_cell(w, goal_room, w.rng);
        if (task == 1) {
            int box_color = static_cast<int>(w.rng.below(kNumColors));
            place_object(w, gx, gy, kCellBox, box_color);
            Cell& box = w.at(gx, gy);
            box.has_content = true;
            box.content = {kCellBall, kColorBlue, w.next_object_id++};
        } else {
            place_object(w, gx, gy, kCellBall, kColorBlue);
        }
    }

    // Lock every door that touches a corner room, distinct colors while the
    // palette lasts.
    ColorDeck corner_deck(w.rng);
    std::vector<const DoorSite*> locked_corner;
    for (const auto& s : sites) {
        bool a_corner = std::find(corners.begin(), corners.end(), s.room_a) != corners.end();
        bool b_corner = std::find(corners.begin(), corners.end(), s.room_b) != corners.end();
        if (!a_corner && !b_corner) continue;
        Cell& cell = w.at(s.x, s.y);
        cell.door_state = kDoorLocked;
        cell.color = corner_deck.draw();
        locked_corner.push_back(&s);
    }

    // Blocking balls sit on the non-corner side of each locked corner door.
    if (layout.blockers) {
        for (const DoorSite* s : locked_corner) {
            bool a_corner = std::find(corners.begin(), corners.end(), s->room_a) != corners.end();
            int outside = a_corner ? s->room_b : s->room_a;
            auto [r, c] = room_of_id(layout, outside);
            int bx = s->x, by = s->y;
            if (s->x % p == 0)  // vertical wall: step into the outside room
                bx = (s->x == c * p) ? s->x + 1 : s->x - 1;
            else
                by = (s->y == r * p) ? s->y + 1 : s->y - 1;
            int color = kNonBlueColors[w.rng.below(kNonBlueColors.size())];
            place_object(w, bx, by, kCellBall, color);
        }
    }

    // Each locked corner door's key hides in a box in the room it opens from.
    for (const DoorSite* s : locked_corner) {
        bool a_corner = std::find(corners.begin(), corners.end(), s->room_a) != corners.end();
        int outside = a_corner ? s->room_b : s->room_a;
        auto [kx, ky] = pick_free_cell(w, outside, w.rng);
        int box_color = static_cast<int>(w.rng.below(kNumColors));
        place_object(w, kx, ky, kCellBox, box_color);
        Cell& box = w.at(kx, ky);
        box.has_content = true;
        box.content = {kCellKey, w.at(s->x, s->y).color, w.next_object_id++};
    }

    // Task 2: the middle room's doors lock too, their keys lie on its floor.
    if (task == 2) {
        ColorDeck middle_deck(w.rng);
        std::vector<const DoorSite*> middle_doors;
        for (const auto& s : sites)
            if (s.room_a == middle || s.room_b == middle) middle_doors.push_back(&s);
        for (const DoorSite* s : middle_doors) {
            Cell& cell = w.at(s->x, s->y);
            if (cell.door_state != kDoorLocked) {
                cell.door_state = kDoorLocked;
                cell.color = middle_deck.draw();
            }
        }
        for (const DoorSite* s : middle_doors) {
            auto [kx, ky] = pick_free_cell(w, middle, w.rng);
            place_object(w, kx, ky, kCellKey, w.at(s->x, s->y).color);
        }
    }

    // Agent starts in the middle room with a random heading.
    auto [ax, ay] = pick_free_cell(w, middle, w.rng);
    w.agent_x = ax;
    w.agent_y = ay;
    w.heading = static_cast<int>(w.rng.below(4));
    w.last_room = middle;
    return w;
}

int room_index(const WorldState& w, int x, int y) {
    if (!w.in_grid(x, y)) throw std::runtime_error("room_index: position outside the grid");
    const int p = pitch(w.layout);
    if (x % p != 0 && y % p != 0)
        return (y / p) * w.layout.rooms_cols + (x / p);
    if (w.at(x, y).type == kCellDoor) return w.last_room;
    throw std::runtime_error("room_index: wall cell has no room");
}

void apply_task3_dynamics(WorldState& w) {
    if (w.task != 3 || w.relocated) return;
    int bx = -1, by = -1;
    for (int y = 0; y < w.height && bx < 0; ++y)
        for (int x = 0; x < w.width; ++x)
            if (w.at(x, y).type == kCellBall && w.at(x, y).color == kColorBlue) {
                bx = x;
                by = y;
                break;
            }
    if (bx < 0) return;  // goal already carried
    int goal_room = room_index(w, bx, by);
    if (room_index(w, w.agent_x, w.agent_y) != goal_room) return;

    auto [r, c] = room_of_id(w.layout, goal_room);
    std::vector<int> neighbors;
    if (r > 0) neighbors.push_back((r - 1) * w.layout.rooms_cols + c);
    if (r + 1 < w.layout.rooms_rows) neighbors.push_back((r + 1) * w.layout.rooms_cols + c);
    if (c > 0) neighbors.push_back(r * w.layout.rooms_cols + c - 1);
    if (c + 1 < w.layout.rooms_cols) neighbors.push_back(r * w.layout.rooms_cols + c + 1);
    int target = neighbors[w.rng.below(neighbors.size())];

    auto [nx, ny] = pick_free_cell(w, target, w.rng);
    w.at(nx, ny) = w.at(bx, by);
    w.at(bx, by) = Cell{};
    w.relocated = true;
}

StepResult step(WorldState& w, int action_code) {
    if (action_code < 0 || action_code >= kNumActions)
        throw ConfigError("invalid action code " + std::to_string(action_code));
    return step(w, static_cast<Action>(action_code));
}

StepResult step(WorldState& w, Action action) {
    if (w.done) throw std::logic_error("step called on a finished episode");
    w.c += 1;

    StepResult res;
    int fx, fy;
    {
        int dx, dy;
        forward_delta(w.heading, dx, dy);
        fx = w.agent_x + dx;
        fy = w.agent_y + dy;
    }

    switch (action) {
        case Action::Left:
            w.heading = (w.heading + 3) % 4;
            break;
        case Action::Right:
            w.heading = (w.heading + 1) % 4;
            break;
        case Action::Forward:
            if (w.in_grid(fx, fy)) {
                const Cell& target = w.at(fx, fy);
                if (target.type == kCellEmpty || door_passable(target)) {
                    w.agent_x = fx;
                    w.agent_y = fy;
                }
            }
            break;
        case Action::Pickup:
            if (!w.inventory.present && w.in_grid(fx, fy)) {
                Cell& target = w.at(fx, fy);
                if (target.type == kCellKey || target.type == kCellBall) {
                    w.inventory = {true, target.type, target.color, target.id};
                    target = Cell{};
                    if (w.inventory.type == kCellBall && w.inventory.color == kColorBlue)
                        w.success = true;
                }
            }
            break;
        case Action::Drop:
            if (w.inventory.present && w.in_grid(fx, fy) && w.at(fx, fy).type == kCellEmpty) {
                Cell& target = w.at(fx, fy);
                target.type = w.inventory.type;
                target.color = w.inventory.color;
                target.id = w.inventory.id;
                w.inventory = Inventory{};
            }
            break;
        case Action::Toggle:
            if (w.in_grid(fx, fy)) {
                Cell& target = w.at(fx, fy);
                if (target.type == kCellDoor) {
                    if (target.door_state == kDoorClosed) {
                        target.door_state = kDoorOpen;
                    } else if (target.door_state == kDoorLocked && w.inventory.present &&
                               w.inventory.type == kCellKey &&
                               w.inventory.color == target.color) {
                        target.door_state = kDoorOpen;
                    }
                } else if (target.type == kCellBox) {
                    w.destroyed_box_ids.push_back(target.id);
                    Cell replacement;
                    if (target.has_content) {
                        replacement.type = target.content.type;
                        replacement.color = target.content.color;
                        replacement.id = target.content.id;
                    }
                    target = replacement;
                    res.info.objects_delta = -1;
                }
            }
            break;
    }

    if (w.success) {
        w.done = true;
        res.reward = 1.0 - static_cast<double>(w.c) / static_cast<double>(w.c_t);
    } else if (w.c >= w.c_t) {
        w.done = true;
    }

    const int pch = pitch(w.layout);
    if (w.agent_x % pch != 0 && w.agent_y % pch != 0)
        w.last_room = room_index(w, w.agent_x, w.agent_y);
    if (!w.done) apply_task3_dynamics(w);

    res.done = w.done;
    res.info.success = w.success;
    res.info.room_index = room_index(w, w.agent_x, w.agent_y);
    res.obs = render_observation(w);
    return res;
}

Observation render_observation(const WorldState& w) {
    constexpr int n = Observation::kSize;
    Observation obs;

    // View cell (vr, vc) sits `ahead` cells in front of the agent and
    // `lateral` to its right; the agent occupies (6, 3) facing the top row.
    std::array<bool, n * n> in_grid{};
    std::array<int, n * n> wx{}, wy{};
    for (int vr = 0; vr < n; ++vr)
        for (int vc = 0; vc < n; ++vc) {
            int ahead = (n - 1) - vr;
            int lateral = vc - n / 2;
            int dx = 0, dy = 0;
            switch (w.heading) {
                case kNorth: dx = lateral; dy = -ahead; break;
                case kEast: dx = ahead; dy = lateral; break;
                case kSouth: dx = -lateral; dy = ahead; break;
                default: dx = -ahead; dy = -lateral; break;
            }
            int i = vr * n + vc;
            wx[i] = w.agent_x + dx;
            wy[i] = w.agent_y + dy;
            in_grid[i] = w.in_grid(wx[i], wy[i]);
        }

    // Light propagation: a cell is visible when any of its 8 neighbours is a
    // visible transparent cell; walls and shut doors absorb.
    std::array<bool, n * n> transparent{};
    for (int i = 0; i < n * n; ++i) {
        if (!in_grid[i]) continue;
        const Cell& cell = w.at(wx[i], wy[i]);
        transparent[i] =
            cell.type != kCellWall && !(cell.type == kCellDoor && cell.door_state != kDoorOpen);
    }
    std::array<bool, n * n> vis{};
    vis[(n - 1) * n + n / 2] = true;
    for (bool changed = true; changed;) {
        changed = false;
        for (int vr = 0; vr < n; ++vr)
            for (int vc = 0; vc < n; ++vc) {
                int i = vr * n + vc;
                if (vis[i] || !in_grid[i]) continue;
                for (int dr = -1; dr <= 1 && !vis[i]; ++dr)
                    for (int dc = -1; dc <= 1; ++dc) {
                        int rr = vr + dr, cc = vc + dc;
                        if (rr < 0 || rr >= n || cc < 0 || cc >= n) continue;
                        int j = rr * n + cc;
                        if (vis[j] && transparent[j]) {
                            vis[i] = true;
                            changed = true;
                            break;
                        }
                    }
            }
    }

    for (int i = 0; i < n * n; ++i) {
        if (!vis[i]) continue;
        obs.visible[i] = true;
        const Cell& cell = w.at(wx[i], wy[i]);
        ObsCell& oc = obs.cells[i];
        oc.type = cell.type;
        oc.color = cell.color;
        oc.state = cell.type == kCellDoor ? cell.door_state : 0;
        oc.object_id = cell.id;
    }
    return obs;
}

Tensor encode_observation(const Observation& obs, int activation_target_id) {
    constexpr int n = Observation::kSize;
    bool with_target = activation_target_id >= 0;
    int channels = with_target ? 4 : 3;
    std::vector<double> data(static_cast<size_t>(channels) * n * n, 0.0);
    for (int i = 0; i < n * n; ++i) {
        const ObsCell& oc = obs.cells[i];
        data[i] = static_cast<double>(oc.type);
        data[n * n + i] = static_cast<double>(oc.color);
        data[2 * n * n + i] = static_cast<double>(oc.state);
        if (with_target && oc.object_id == activation_target_id) data[3 * n * n + i] = 1.0;
    }
    return Tensor::from_data({channels, n, n}, data);
}

Tensor encode_observation(const Observation& obs) { return encode_observation(obs, -1); }

ObjectLocation find_object(const WorldState& w, int id) {
    ObjectLocation loc;
    if (id < 0) return loc;
    if (w.inventory.present && w.inventory.id == id) {
        loc.where = ObjectLocation::Carried;
        loc.type = w.inventory.type;
        loc.color = w.inventory.color;
        return loc;
    }
    for (int y = 0; y < w.height; ++y)
        for (int x = 0; x < w.width; ++x) {
            const Cell& cell = w.at(x, y);
            if (cell.id == id) {
                loc.where = ObjectLocation::OnGrid;
                loc.x = x;
                loc.y = y;
                loc.type = cell.type;
                loc.color = cell.color;
                loc.door_state = cell.type == kCellDoor ? cell.door_state : 0;
                return loc;
            }
            if (cell.has_content && cell.content.id == id) {
                loc.where = ObjectLocation::InBox;
                loc.x = x;
                loc.y = y;
                loc.type = cell.content.type;
                loc.color = cell.content.color;
                return loc;
            }
        }
    return loc;
}

std::vector<std::array<int, 3>> object_census(const WorldState& w) {
    std::vector<std::array<int, 3>> out;
    for (const Cell& cell : w.grid) {
        if (cell.id >= 0) out.push_back({cell.type, cell.color, cell.id});
        if (cell.has_content) out.push_back({cell.content.type, cell.content.color, cell.content.id});
    }
    if (w.inventory.present)
        out.push_back({w.inventory.type, w.inventory.color, w.inventory.id});
    std::sort(out.begin(), out.end());
    return out;
}

// --- Snapshot text format ---

namespace {

constexpr const char* kMagic = "KIXWORLD 1";

char kind_glyph(int type) {
    switch (type) {
        case kCellEmpty: return '.';
        case kCellWall: return '#';
        case kCellDoor: return 'D';
        case kCellKey: return 'K';
        case kCellBall: return 'O';
        case kCellBox: return 'B';
        default: throw IoError("snapshot: unencodable cell type");
    }
}

int type_from_glyph(char g) {
    switch (g) {
        case '.': return kCellEmpty;
        case '#': return kCellWall;
        case 'D': return kCellDoor;
        case 'K': return kCellKey;
        case 'O': return kCellBall;
        case 'B': return kCellBox;
        default: throw IoError(std::string("snapshot: unknown cell glyph '") + g + "'");
    }
}

const char kColorGlyphs[] = "rgbpye";

char color_glyph(int color) {
    if (color == kColorNone) return '-';
    if (color < 0 || color >= kNumColors) throw IoError("snapshot: unencodable color");
    return kColorGlyphs[color];
}

int color_from_glyph(char g) {
    if (g == '-') return kColorNone;
    for (int i = 0; i < kNumColors; ++i)
        if (kColorGlyphs[i] == g) return i;
    throw IoError(std::string("snapshot: unknown color glyph '") + g + "'");
}

const char kStateGlyphs[] = "OCL";

void expect_word(std::istringstream& in, const char* word) {
    std::string got;
    in >> got;
    if (got != word) throw IoError("snapshot: expected '" + std::string(word) + "', got '" + got + "'");
}

template <typename T>
T read_value(std::istringstream& in, const char* what) {
    T v;
    if (!(in >> v)) throw IoError("snapshot: failed to read " + std::string(what));
    return v;
}

}  // namespace

std::string serialize_world(const WorldState& w) {
    std::ostringstream out;
    out << kMagic << "\n";
    out << "layout " << w.layout.rooms_rows << " " << w.layout.rooms_cols << " "
        << w.layout.interior << " " << (w.layout.blockers ? 1 : 0) << "\n";
    out << "task " << w.task << "\n";
    out << "counters " << w.c << " " << w.c_t << "\n";
    out << "agent " << w.agent_x << " " << w.agent_y << " " << w.heading << "\n";
    out << "lastroom " << w.last_room << "\n";
    out << "flags " << (w.relocated ? 1 : 0) << " " << (w.done ? 1 : 0) << " "
        << (w.success ? 1 : 0) << "\n";
    out << "nextid " << w.next_object_id << "\n";
    out << "rng " << w.rng.state() << "\n";
    if (w.inventory.present)
        out << "inv " << w.inventory.type << " " << w.inventory.color << " " << w.inventory.id
            << "\n";
    else
        out << "inv none\n";
    out << "destroyed " << w.destroyed_box_ids.size();
    for (int id : w.destroyed_box_ids) out << " " << id;
    out << "\n";
    out << "grid " << w.width << " " << w.height << "\n";
    for (int y = 0; y < w.height; ++y) {
        for (int x = 0; x < w.width; ++x) {
            const Cell& cell = w.at(x, y);
            out << kind_glyph(cell.type) << color_glyph(cell.color)
                << (cell.type == kCellDoor ? kStateGlyphs[cell.door_state] : '-');
        }
        out << "\n";
    }
    std::ostringstream objects;
    int count = 0;
    for (int y = 0; y < w.height; ++y)
        for (int x = 0; x < w.width; ++x) {
            const Cell& cell = w.at(x, y);
            if (cell.id < 0 && !cell.has_content) continue;
            objects << x << " " << y << " " << cell.id;
            if (cell.has_content)
                objects << " content " << cell.content.type << " " << cell.content.color << " "
                        << cell.content.id;
            objects << "\n";
            ++count;
        }
    out << "objects " << count << "\n" << objects.str();
    return out.str();
}

WorldState parse_world(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kMagic)
        throw IoError("snapshot: bad magic line (expected '" + std::string(kMagic) + "')");
    std::istringstream& body = in;

    WorldState w;
    expect_word(body, "layout");
    w.layout.rooms_rows = read_value<int>(body, "rooms_rows");
    w.layout.rooms_cols = read_value<int>(body, "rooms_cols");
    w.layout.interior = read_value<int>(body, "interior");
    w.layout.blockers = read_value<int>(body, "blockers") != 0;
    expect_word(body, "task");
    w.task = read_value<int>(body, "task");
    expect_word(body, "counters");
    w.c = read_value<long>(body, "c");
    w.c_t = read_value<long>(body, "c_t");
    expect_word(body, "agent");
    w.agent_x = read_value<int>(body, "agent_x");
    w.agent_y = read_value<int>(body, "agent_y");
    w.heading = read_value<int>(body, "heading");
    expect_word(body, "lastroom");
    w.last_room = read_value<int>(body, "last_room");
    expect_word(body, "flags");
    w.relocated = read_value<int>(body, "relocated") != 0;
    w.done = read_value<int>(body, "done") != 0;
    w.success = read_value<int>(body, "success") != 0;
    expect_word(body, "nextid");
    w.next_object_id = read_value<int>(body, "next_object_id");
    expect_word(body, "rng");
    w.rng.set_state(read_value<std::uint64_t>(body, "rng state"));
    expect_word(body, "inv");
    {
        std::string tok = read_value<std::string>(body, "inventory");
        if (tok != "none") {
            w.inventory.present = true;
            w.inventory.type = std::stoi(tok);
            w.inventory.color = read_value<int>(body, "inventory color");
            w.inventory.id = read_value<int>(body, "inventory id");
        }
    }
    expect_word(body, "destroyed");
    {
        int count = read_value<int>(body, "destroyed count");
        if (count < 0) throw IoError("snapshot: negative destroyed count");
        w.destroyed_box_ids.resize(count);
        for (int i = 0; i < count; ++i)
            w.destroyed_box_ids[i] = read_value<int>(body, "destroyed id");
    }
    expect_word(body, "grid");
    w.width = read_value<int>(body, "width");
    w.height = read_value<int>(body, "height");
    if (w.width != w.layout.rooms_cols * (w.layout.interior + 1) + 1 ||
        w.height != w.layout.rooms_rows * (w.layout.interior + 1) + 1)
        throw IoError("snapshot: grid size does not match layout");
    w.grid.assign(static_cast<size_t>(w.width) * w.height, Cell{});
    for (int y = 0; y < w.height; ++y) {
        std::string row = read_value<std::string>(body, "grid row");
        if (static_cast<int>(row.size()) != w.width * 3)
            throw IoError("snapshot: grid row " + std::to_string(y) + " has wrong length");
        for (int x = 0; x < w.width; ++x) {
            Cell& cell = w.at(x, y);
            cell.type = type_from_glyph(row[x * 3]);
            cell.color = color_from_glyph(row[x * 3 + 1]);
            char st = row[x * 3 + 2];
            if (cell.type == kCellDoor) {
                const char* pos = std::char_traits<char>::find(kStateGlyphs, 3, st);
                if (!pos) throw IoError("snapshot: bad door state glyph");
                cell.door_state = static_cast<int>(pos - kStateGlyphs);
            } else if (st != '-') {
                throw IoError("snapshot: state glyph on a non-door cell");
            }
        }
    }
    expect_word(body, "objects");
    {
        int count = read_value<int>(body, "object count");
        for (int i = 0; i < count; ++i) {
            int x = read_value<int>(body, "object x");
            int y = read_value<int>(body, "object y");
            if (!w.in_grid(x, y)) throw IoError("snapshot: object outside the grid");
            Cell& cell = w.at(x, y);
            cell.id = read_value<int>(body, "object id");
            std::string maybe;
            auto pos = body.tellg();
            if (body >> maybe && maybe == "content") {
                cell.has_content = true;
                cell.content.type = read_value<int>(body, "content type");
                cell.content.color = read_value<int>(body, "content color");
                cell.content.id = read_value<int>(body, "content id");
            } else {
                body.clear();
                body.seekg(pos);
            }
        }
    }
    return w;
}

const char* color_name(int color) {
    switch (color) {
        case kColorRed: return "red";
        case kColorGreen: return "green";
        case kColorBlue: return "blue";
        case kColorPurple: return "purple";
        case kColorYellow: return "yellow";
        case kColorGrey: return "grey";
        default: return "none";
    }
}

const char* heading_name(int heading) {
    switch (heading) {
        case kNorth: return "north";
        case kEast: return "east";
        case kSouth: return "south";
        default: return "west";
    }
}

const char* action_name(Action a) {
    switch (a) {
        case Action::Left: return "left";
        case Action::Right: return "right";
        case Action::Forward: return "forward";
        case Action::Pickup: return "pickup";
        case Action::Drop: return "drop";
        default: return "toggle";
    }
}

Action action_from_name(const std::string& name) {
    for (int i = 0; i < kNumActions; ++i)
        if (name == action_name(static_cast<Action>(i))) return static_cast<Action>(i);
    throw ConfigError("unknown action '" + name + "'");
}

}  // namespace kix
