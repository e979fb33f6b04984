#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "kix/rng.hpp"
#include "kix/tensor.hpp"

namespace kix {

// Multi-room gridworld with locked doors, keys hidden in boxes, and a blue
// goal ball. Partially observable through a 7x7 egocentric view.

enum class Action : int { Left = 0, Right = 1, Forward = 2, Pickup = 3, Drop = 4, Toggle = 5 };
constexpr int kNumActions = 6;

enum CellType : int {
    kCellUnseen = 0,  // observation-only code
    kCellEmpty = 1,
    kCellWall = 2,
    kCellDoor = 3,
    kCellKey = 4,
    kCellBall = 5,
    kCellBox = 6,
};

enum ColorCode : int {
    kColorRed = 0,
    kColorGreen = 1,
    kColorBlue = 2,
    kColorPurple = 3,
    kColorYellow = 4,
    kColorGrey = 5,
    kColorNone = 6,
};
constexpr int kNumColors = 6;  // palette size (excludes the "none" code)

enum DoorState : int { kDoorOpen = 0, kDoorClosed = 1, kDoorLocked = 2 };

enum Heading : int { kNorth = 0, kEast = 1, kSouth = 2, kWest = 3 };

struct BoxContent {
    int type = kCellEmpty;  // kCellKey or kCellBall
    int color = kColorNone;
    int id = -1;

    bool operator==(const BoxContent&) const = default;
};

struct Cell {
    int type = kCellEmpty;
    int color = kColorNone;
    int door_state = 0;
    int id = -1;  // object id; -1 for empty/wall
    bool has_content = false;
    BoxContent content;  // meaningful only for boxes

    bool operator==(const Cell&) const = default;
};

struct Inventory {
    bool present = false;
    int type = kCellEmpty;
    int color = kColorNone;
    int id = -1;

    bool operator==(const Inventory&) const = default;
};

struct LayoutConfig {
    int rooms_rows = 3;
    int rooms_cols = 3;
    int interior = 5;      // interior side length of each room
    bool blockers = true;  // balls dropped in front of locked doors
};

LayoutConfig layout_full();
LayoutConfig layout_mini();
// Named lookup for config files: "full" or "mini".
LayoutConfig layout_by_name(const std::string& name);

struct WorldState {
    int width = 0;
    int height = 0;
    LayoutConfig layout;
    int task = 0;
    std::vector<Cell> grid;
    int agent_x = 0;
    int agent_y = 0;
    int heading = kNorth;
    Inventory inventory;
    long c = 0;    // step counter
    long c_t = 0;  // step limit
    int last_room = 0;
    bool relocated = false;
    bool done = false;
    bool success = false;
    int next_object_id = 0;
    std::vector<int> destroyed_box_ids;
    Rng rng;  // consumed only by task-3 relocation after generation

    Cell& at(int x, int y) { return grid[static_cast<size_t>(y) * width + x]; }
    const Cell& at(int x, int y) const { return grid[static_cast<size_t>(y) * width + x]; }
    bool in_grid(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }

    bool operator==(const WorldState& o) const;
};

struct ObsCell {
    int type = kCellUnseen;
    int color = kColorNone;
    int state = 0;
    int object_id = -1;  // world binding for visible objects; not part of the tensor encoding
};

struct Observation {
    static constexpr int kSize = 7;
    std::array<ObsCell, 49> cells;
    std::array<bool, 49> visible{};

    const ObsCell& at(int row, int col) const { return cells[static_cast<size_t>(row) * kSize + col]; }
    ObsCell& at(int row, int col) { return cells[static_cast<size_t>(row) * kSize + col]; }
};

struct StepInfo {
    bool success = false;
    int room_index = 0;
    int objects_delta = 0;  // net object count change (box toggles only)
};

struct StepResult {
    Observation obs;
    double reward = 0.0;
    bool done = false;
    StepInfo info;
};

// Builds a world for (seed, task, layout). Tasks:
//   0: goal ball in a random corner room behind locked, key-in-box doors
//   1: as 0, but the goal ball is hidden inside a box
//   2: as 0, plus the central room's doors are locked with keys on its floor
//   3: as 0, with one-shot goal relocation armed
// Throws std::runtime_error when the layout cannot host the required objects.
WorldState generate_world(std::uint64_t seed, int task, const LayoutConfig& layout);

// Advances the world by one action. Throws on a finished episode.
StepResult step(WorldState& world, Action action);
StepResult step(WorldState& world, int action_code);

// One-shot goal relocation for task 3; called by step after movement.
void apply_task3_dynamics(WorldState& world);

Observation render_observation(const WorldState& world);

// Row-major room id for a position. Door cells map to the room the agent most
// recently occupied; wall cells are an error.
int room_index(const WorldState& world, int x, int y);
int num_rooms(const WorldState& world);

// Encodes an observation as a [channels, 7, 7] tensor with raw type/color/
// state codes. With activation_target_id >= 0 a fourth channel marks the cell
// holding that object (all zero when the target is not in view).
Tensor encode_observation(const Observation& obs, int activation_target_id);
// Three-channel variant for the flat base agent.
Tensor encode_observation(const Observation& obs);

struct ObjectLocation {
    enum Where { OnGrid, InBox, Carried, Gone } where = Gone;
    int x = -1, y = -1;
    int type = kCellEmpty;
    int color = kColorNone;
    int door_state = 0;
};

// Scans grid, box contents, and inventory for an object id.
ObjectLocation find_object(const WorldState& world, int id);

// Sorted (type, color, id) census across grid, box contents, and inventory;
// used by conservation checks.
std::vector<std::array<int, 3>> object_census(const WorldState& world);

// Versioned text snapshot (round-trips exactly).
std::string serialize_world(const WorldState& world);
WorldState parse_world(const std::string& text);

const char* color_name(int color);
const char* heading_name(int heading);
const char* action_name(Action a);
// Parses an action name ("left", "forward", ...); throws ConfigError on junk.
Action action_from_name(const std::string& name);

}  // namespace kix
