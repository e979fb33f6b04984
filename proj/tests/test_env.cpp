#include <algorithm>
#include <array>
#include <cstdlib>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "doctest.h"
#include "kix/env.hpp"
#include "kix/errors.hpp"
#include "kix/rng.hpp"

using namespace kix;

namespace {

// Hand-built worlds keep the generator out of the loop so each scenario pins
// exactly the cells it cares about.
WorldState blank_world(int rooms_rows, int rooms_cols, int interior) {
    WorldState w;
    w.layout = {rooms_rows, rooms_cols, interior, false};
    const int p = interior + 1;
    w.width = rooms_cols * p + 1;
    w.height = rooms_rows * p + 1;
    w.c_t = 40L * rooms_rows * rooms_cols * interior * interior;
    w.rng = Rng(0);
    w.grid.assign(static_cast<size_t>(w.width) * w.height, Cell{});
    for (int y = 0; y < w.height; ++y)
        for (int x = 0; x < w.width; ++x)
            if (x % p == 0 || y % p == 0) w.at(x, y).type = kCellWall;
    return w;
}

void set_agent(WorldState& w, int x, int y, int heading) {
    w.agent_x = x;
    w.agent_y = y;
    w.heading = heading;
    w.last_room = room_index(w, x, y);
}

int add_thing(WorldState& w, int x, int y, int type, int color) {
    Cell& cell = w.at(x, y);
    cell.type = type;
    cell.color = color;
    cell.id = w.next_object_id++;
    return cell.id;
}

int add_door(WorldState& w, int x, int y, int color, int state) {
    int id = add_thing(w, x, y, kCellDoor, color);
    w.at(x, y).door_state = state;
    return id;
}

int add_box(WorldState& w, int x, int y, int box_color, int content_type, int content_color) {
    add_thing(w, x, y, kCellBox, box_color);
    Cell& box = w.at(x, y);
    box.has_content = true;
    box.content = {content_type, content_color, w.next_object_id++};
    return box.content.id;
}

// Independent room arithmetic for generator checks.
int room_of_interior(const LayoutConfig& l, int x, int y) {
    const int p = l.interior + 1;
    REQUIRE(x % p != 0);
    REQUIRE(y % p != 0);
    return (y / p) * l.rooms_cols + (x / p);
}

struct DoorView {
    int x, y, color, state;
    int room_a, room_b;  // row-major neighbours
};

std::vector<DoorView> scan_doors(const WorldState& w) {
    std::vector<DoorView> out;
    const int p = w.layout.interior + 1;
    for (int y = 0; y < w.height; ++y)
        for (int x = 0; x < w.width; ++x) {
            const Cell& cell = w.at(x, y);
            if (cell.type != kCellDoor) continue;
            DoorView d{x, y, cell.color, cell.door_state, 0, 0};
            if (x % p == 0) {
                d.room_a = (y / p) * w.layout.rooms_cols + (x / p - 1);
                d.room_b = (y / p) * w.layout.rooms_cols + (x / p);
            } else {
                d.room_a = (y / p - 1) * w.layout.rooms_cols + (x / p);
                d.room_b = (y / p) * w.layout.rooms_cols + (x / p);
            }
            out.push_back(d);
        }
    return out;
}

std::set<int> corner_rooms(const LayoutConfig& l) {
    int middle = (l.rooms_rows / 2) * l.rooms_cols + l.rooms_cols / 2;
    std::set<int> corners;
    for (int r : {0, l.rooms_rows - 1})
        for (int c : {0, l.rooms_cols - 1}) {
            int room = r * l.rooms_cols + c;
            if (room != middle) corners.insert(room);
        }
    return corners;
}

int count_blue_balls(const WorldState& w) {
    int n = 0;
    for (const auto& entry : object_census(w))
        if (entry[0] == kCellBall && entry[1] == kColorBlue) ++n;
    return n;
}

// Interior cells of a room, row-major (oracle-side duplicate on purpose).
std::vector<std::pair<int, int>> room_cells(const WorldState& w, int room) {
    const int p = w.layout.interior + 1;
    int r = room / w.layout.rooms_cols, c = room % w.layout.rooms_cols;
    std::vector<std::pair<int, int>> out;
    for (int y = r * p + 1; y <= r * p + w.layout.interior; ++y)
        for (int x = c * p + 1; x <= c * p + w.layout.interior; ++x) out.push_back({x, y});
    return out;
}

void teleport_into_room(WorldState& w, int room) {
    for (auto [x, y] : room_cells(w, room))
        if (w.at(x, y).type == kCellEmpty) {
            w.agent_x = x;
            w.agent_y = y;
            w.last_room = room;
            return;
        }
    FAIL("no free cell to teleport to");
}

}  // namespace

TEST_CASE("world generation is deterministic per seed, task, and layout") {
    for (int task = 0; task <= 3; ++task)
        for (std::uint64_t seed : {1ULL, 7ULL, 42ULL}) {
            WorldState a = generate_world(seed, task, layout_full());
            WorldState b = generate_world(seed, task, layout_full());
            CHECK(a == b);
            CHECK_EQ(serialize_world(a), serialize_world(b));
        }
    WorldState a = generate_world(5, 0, layout_full());
    WorldState b = generate_world(6, 0, layout_full());
    CHECK_FALSE(a == b);
}

TEST_CASE("generated corner-goal worlds satisfy their structural contract") {
    const LayoutConfig layout = layout_full();
    const std::set<int> corners = corner_rooms(layout);
    const int middle = 4;
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
        WorldState w = generate_world(seed, 0, layout);
        CAPTURE(seed);
        CHECK_EQ(w.c, 0);
        CHECK_EQ(w.c_t, 40L * 9 * 25);
        CHECK_FALSE(w.done);
        CHECK_FALSE(w.inventory.present);

        // Exactly one blue ball, on the floor of a corner room.
        CHECK_EQ(count_blue_balls(w), 1);
        int ball_room = -1;
        for (int y = 0; y < w.height; ++y)
            for (int x = 0; x < w.width; ++x)
                if (w.at(x, y).type == kCellBall && w.at(x, y).color == kColorBlue)
                    ball_room = room_of_interior(layout, x, y);
        REQUIRE(ball_room >= 0);
        CHECK(corners.count(ball_room) == 1);

        // Agent in the middle room on an empty cell.
        CHECK_EQ(room_of_interior(layout, w.agent_x, w.agent_y), middle);
        CHECK_EQ(w.at(w.agent_x, w.agent_y).type, kCellEmpty);

        auto doors = scan_doors(w);
        CHECK_EQ(doors.size(), 12);
        std::vector<int> corner_colors;
        for (const auto& d : doors) {
            bool touches_corner = corners.count(d.room_a) || corners.count(d.room_b);
            if (!touches_corner) {
                CHECK_EQ(d.state, kDoorClosed);
                continue;
            }
            CHECK_EQ(d.state, kDoorLocked);
            corner_colors.push_back(d.color);
            int outside = corners.count(d.room_a) ? d.room_b : d.room_a;

            // A box in the outside room holds the matching key.
            bool key_found = false;
            for (auto [x, y] : room_cells(w, outside)) {
                const Cell& cell = w.at(x, y);
                if (cell.type == kCellBox && cell.has_content &&
                    cell.content.type == kCellKey && cell.content.color == d.color)
                    key_found = true;
            }
            CHECK(key_found);

            // A non-blue blocking ball sits right outside the door.
            int bx = d.x, by = d.y;
            const int p = layout.interior + 1;
            if (d.x % p == 0)
                bx += (room_of_interior(layout, d.x + 1, d.y) == outside) ? 1 : -1;
            else
                by += (room_of_interior(layout, d.x, d.y + 1) == outside) ? 1 : -1;
            CHECK_EQ(w.at(bx, by).type, kCellBall);
            CHECK_NE(w.at(bx, by).color, kColorBlue);
        }
        // Eight corner doors share the six-color palette: full coverage, no
        // color more than twice.
        CHECK_EQ(corner_colors.size(), 8);
        std::set<int> distinct(corner_colors.begin(), corner_colors.end());
        CHECK_EQ(distinct.size(), 6);
        for (int color : distinct)
            CHECK_LE(std::count(corner_colors.begin(), corner_colors.end(), color), 2);
    }
}

TEST_CASE("goal corner selection covers all corners over seeds") {
    std::set<int> seen;
    for (std::uint64_t seed = 0; seed < 80; ++seed) {
        WorldState w = generate_world(seed, 0, layout_full());
        for (int y = 0; y < w.height; ++y)
            for (int x = 0; x < w.width; ++x)
                if (w.at(x, y).type == kCellBall && w.at(x, y).color == kColorBlue)
                    seen.insert(room_of_interior(w.layout, x, y));
    }
    CHECK_EQ(seen, std::set<int>{0, 2, 6, 8});
}

TEST_CASE("boxed-goal worlds hide the blue ball inside exactly one box") {
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
        WorldState w = generate_world(seed, 1, layout_full());
        CAPTURE(seed);
        int boxed_goals = 0;
        for (int y = 0; y < w.height; ++y)
            for (int x = 0; x < w.width; ++x) {
                const Cell& cell = w.at(x, y);
                CHECK_FALSE((cell.type == kCellBall && cell.color == kColorBlue));
                if (cell.type == kCellBox && cell.has_content &&
                    cell.content.type == kCellBall && cell.content.color == kColorBlue) {
                    ++boxed_goals;
                    CHECK(corner_rooms(w.layout).count(room_of_interior(w.layout, x, y)));
                }
            }
        CHECK_EQ(boxed_goals, 1);
        CHECK_EQ(count_blue_balls(w), 1);
    }
}

TEST_CASE("central-lock worlds key every middle door from the middle floor") {
    const int middle = 4;
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
        WorldState w = generate_world(seed, 2, layout_full());
        CAPTURE(seed);
        auto doors = scan_doors(w);
        std::vector<int> middle_colors;
        for (const auto& d : doors) {
            if (d.room_a != middle && d.room_b != middle) continue;
            CHECK_EQ(d.state, kDoorLocked);
            middle_colors.push_back(d.color);
            bool floor_key = false;
            for (auto [x, y] : room_cells(w, middle)) {
                const Cell& cell = w.at(x, y);
                if (cell.type == kCellKey && cell.color == d.color) floor_key = true;
            }
            CHECK(floor_key);
        }
        CHECK_EQ(middle_colors.size(), 4);
        std::set<int> distinct(middle_colors.begin(), middle_colors.end());
        CHECK_EQ(distinct.size(), 4);  // drawn without replacement
    }
}

TEST_CASE("every locked door has a matching key somewhere in the world") {
    for (int task = 0; task <= 3; ++task)
        for (std::uint64_t seed = 0; seed < 30; ++seed) {
            WorldState w = generate_world(seed, task, layout_full());
            auto census = object_census(w);
            for (const auto& d : scan_doors(w)) {
                if (d.state != kDoorLocked) continue;
                bool key = false;
                for (const auto& entry : census)
                    if (entry[0] == kCellKey && entry[1] == d.color) key = true;
                CAPTURE(task);
                CAPTURE(seed);
                CHECK(key);
            }
        }
}

TEST_CASE("relocation worlds move the goal once when its room is entered") {
    int moved_to_distinct_rooms = 0;
    std::set<int> relocation_rooms;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        WorldState w = generate_world(seed, 3, layout_full());
        CAPTURE(seed);
        CHECK_FALSE(w.relocated);

        auto find_ball = [&]() {
            for (int y = 0; y < w.height; ++y)
                for (int x = 0; x < w.width; ++x)
                    if (w.at(x, y).type == kCellBall && w.at(x, y).color == kColorBlue)
                        return std::pair<int, int>{x, y};
            return std::pair<int, int>{-1, -1};
        };

        auto [bx, by] = find_ball();
        int goal_room = room_of_interior(w.layout, bx, by);

        // Agent elsewhere: no relocation.
        apply_task3_dynamics(w);
        CHECK_FALSE(w.relocated);
        CHECK_EQ(find_ball(), std::pair<int, int>{bx, by});

        // Agent in the goal room: ball jumps to a neighbouring room.
        teleport_into_room(w, goal_room);
        apply_task3_dynamics(w);
        CHECK(w.relocated);
        auto [nx, ny] = find_ball();
        int new_room = room_of_interior(w.layout, nx, ny);
        CHECK_NE(new_room, goal_room);
        int gr = goal_room / 3, gc = goal_room % 3;
        int nr = new_room / 3, nc = new_room % 3;
        CHECK_EQ(std::abs(gr - nr) + std::abs(gc - nc), 1);
        relocation_rooms.insert(new_room);

        // Entering the new room does not relocate again.
        teleport_into_room(w, new_room);
        apply_task3_dynamics(w);
        CHECK_EQ(find_ball(), std::pair<int, int>{nx, ny});
        ++moved_to_distinct_rooms;
    }
    CHECK_EQ(moved_to_distinct_rooms, 40);
    CHECK_GE(relocation_rooms.size(), 2);  // both corner neighbours show up
}

TEST_CASE("relocation fires through step as soon as the agent stands in the goal room") {
    WorldState w = generate_world(11, 3, layout_full());
    int goal_room = -1;
    for (int y = 0; y < w.height; ++y)
        for (int x = 0; x < w.width; ++x)
            if (w.at(x, y).type == kCellBall && w.at(x, y).color == kColorBlue)
                goal_room = room_of_interior(w.layout, x, y);
    teleport_into_room(w, goal_room);
    StepResult res = step(w, Action::Left);
    CHECK(w.relocated);
    CHECK_FALSE(res.done);
    for (int y = 0; y < w.height; ++y)
        for (int x = 0; x < w.width; ++x)
            if (w.at(x, y).type == kCellBall && w.at(x, y).color == kColorBlue)
                CHECK_NE(room_of_interior(w.layout, x, y), goal_room);
}

TEST_CASE("rotations spin in place and four rights make a full turn") {
    WorldState w = blank_world(1, 2, 4);
    set_agent(w, 2, 2, kNorth);
    step(w, Action::Left);
    CHECK_EQ(w.heading, kWest);
    step(w, Action::Right);
    CHECK_EQ(w.heading, kNorth);
    for (int i = 0; i < 4; ++i) step(w, Action::Right);
    CHECK_EQ(w.heading, kNorth);
    CHECK_EQ(w.agent_x, 2);
    CHECK_EQ(w.agent_y, 2);
    CHECK_EQ(w.c, 6);  // every call counted
}

TEST_CASE("forward moves into empty cells and through open doors only") {
    WorldState w = blank_world(1, 2, 4);
    add_door(w, 5, 3, kColorRed, kDoorClosed);
    set_agent(w, 3, 3, kEast);

    step(w, Action::Forward);
    CHECK_EQ(w.agent_x, 4);

    SUBCASE("closed door blocks") {
        step(w, Action::Forward);
        CHECK_EQ(w.agent_x, 4);
    }
    SUBCASE("locked door blocks") {
        w.at(5, 3).door_state = kDoorLocked;
        step(w, Action::Forward);
        CHECK_EQ(w.agent_x, 4);
    }
    SUBCASE("open door lets the agent stand on the door cell, then pass") {
        w.at(5, 3).door_state = kDoorOpen;
        StepResult on_door = step(w, Action::Forward);
        CHECK_EQ(w.agent_x, 5);
        CHECK_EQ(on_door.info.room_index, 0);  // door cell keeps the last room
        StepResult through = step(w, Action::Forward);
        CHECK_EQ(w.agent_x, 6);
        CHECK_EQ(through.info.room_index, 1);
        CHECK_EQ(w.last_room, 1);
    }
    SUBCASE("wall blocks") {
        set_agent(w, 1, 1, kNorth);
        step(w, Action::Forward);
        CHECK_EQ(w.agent_x, 1);
        CHECK_EQ(w.agent_y, 1);
    }
}

TEST_CASE("pickup takes only faced carryables into an empty hand") {
    WorldState w = blank_world(1, 2, 4);
    int key_id = add_thing(w, 3, 2, kCellKey, kColorRed);
    int ball_id = add_thing(w, 3, 4, kCellBall, kColorGreen);
    add_thing(w, 2, 3, kCellBox, kColorGrey);
    set_agent(w, 3, 3, kNorth);

    step(w, Action::Pickup);
    CHECK(w.inventory.present);
    CHECK_EQ(w.inventory.type, kCellKey);
    CHECK_EQ(w.inventory.id, key_id);
    CHECK_EQ(w.at(3, 2).type, kCellEmpty);
    CHECK_EQ(w.at(3, 2).id, -1);

    // Full inventory: nothing happens.
    step(w, Action::Right);
    step(w, Action::Right);  // face the green ball
    step(w, Action::Pickup);
    CHECK_EQ(w.inventory.id, key_id);
    CHECK_EQ(w.at(3, 4).id, ball_id);

    // Boxes are not carryable.
    WorldState v = blank_world(1, 2, 4);
    add_thing(v, 2, 3, kCellBox, kColorGrey);
    set_agent(v, 3, 3, kWest);
    step(v, Action::Pickup);
    CHECK_FALSE(v.inventory.present);
    CHECK_EQ(v.at(2, 3).type, kCellBox);

    // Empty faced cell: no-op.
    WorldState u = blank_world(1, 2, 4);
    set_agent(u, 3, 3, kNorth);
    step(u, Action::Pickup);
    CHECK_FALSE(u.inventory.present);
}

TEST_CASE("drop places the carried object on the faced empty cell only") {
    WorldState w = blank_world(1, 2, 4);
    int key_id = add_thing(w, 3, 2, kCellKey, kColorRed);
    add_thing(w, 4, 3, kCellBall, kColorGreen);
    add_door(w, 5, 3, kColorRed, kDoorOpen);
    set_agent(w, 3, 3, kNorth);
    step(w, Action::Pickup);
    REQUIRE(w.inventory.present);

    // Occupied cell: still carrying.
    step(w, Action::Right);  // face (4,3) ball
    step(w, Action::Drop);
    CHECK(w.inventory.present);
    CHECK_EQ(w.at(4, 3).type, kCellBall);

    // Door cell is not an empty cell, even when open.
    set_agent(w, 6, 3, kWest);  // face the open door at (5,3)
    step(w, Action::Drop);
    CHECK(w.inventory.present);

    // Empty cell: object lands with identity intact.
    set_agent(w, 3, 3, kNorth);
    step(w, Action::Drop);
    CHECK_FALSE(w.inventory.present);
    CHECK_EQ(w.at(3, 2).type, kCellKey);
    CHECK_EQ(w.at(3, 2).color, kColorRed);
    CHECK_EQ(w.at(3, 2).id, key_id);

    // Empty hand: no-op.
    step(w, Action::Drop);
    CHECK_EQ(w.at(3, 2).type, kCellKey);
}

TEST_CASE("toggle handles doors by state and pops boxes open") {
    WorldState w = blank_world(1, 2, 4);
    add_door(w, 5, 3, kColorRed, kDoorClosed);
    set_agent(w, 4, 3, kEast);

    SUBCASE("closed door opens") {
        step(w, Action::Toggle);
        CHECK_EQ(w.at(5, 3).door_state, kDoorOpen);
    }
    SUBCASE("open door stays open") {
        w.at(5, 3).door_state = kDoorOpen;
        step(w, Action::Toggle);
        CHECK_EQ(w.at(5, 3).door_state, kDoorOpen);
    }
    SUBCASE("locked door needs the same-color key") {
        w.at(5, 3).door_state = kDoorLocked;
        step(w, Action::Toggle);
        CHECK_EQ(w.at(5, 3).door_state, kDoorLocked);

        w.inventory = {true, kCellKey, kColorBlue, 77};
        step(w, Action::Toggle);
        CHECK_EQ(w.at(5, 3).door_state, kDoorLocked);

        w.inventory = {true, kCellKey, kColorRed, 77};
        step(w, Action::Toggle);
        CHECK_EQ(w.at(5, 3).door_state, kDoorOpen);
        CHECK(w.inventory.present);  // key stays in hand
    }
    SUBCASE("box releases its content where it stood") {
        WorldState v = blank_world(1, 2, 4);
        int key_id = add_box(v, 3, 2, kColorGrey, kCellKey, kColorYellow);
        int box_id = v.at(3, 2).id;
        set_agent(v, 3, 3, kNorth);
        StepResult res = step(v, Action::Toggle);
        CHECK_EQ(v.at(3, 2).type, kCellKey);
        CHECK_EQ(v.at(3, 2).color, kColorYellow);
        CHECK_EQ(v.at(3, 2).id, key_id);
        CHECK_FALSE(v.at(3, 2).has_content);
        CHECK_EQ(res.info.objects_delta, -1);
        REQUIRE_EQ(v.destroyed_box_ids.size(), 1);
        CHECK_EQ(v.destroyed_box_ids[0], box_id);
    }
    SUBCASE("empty box leaves an empty cell") {
        WorldState v = blank_world(1, 2, 4);
        add_thing(v, 3, 2, kCellBox, kColorGrey);
        set_agent(v, 3, 3, kNorth);
        StepResult res = step(v, Action::Toggle);
        CHECK_EQ(v.at(3, 2).type, kCellEmpty);
        CHECK_EQ(res.info.objects_delta, -1);
    }
    SUBCASE("toggling walls, floors, keys, and balls does nothing") {
        WorldState v = blank_world(1, 2, 4);
        add_thing(v, 3, 2, kCellBall, kColorGreen);
        set_agent(v, 3, 3, kNorth);
        step(v, Action::Toggle);
        CHECK_EQ(v.at(3, 2).type, kCellBall);
        set_agent(v, 1, 1, kNorth);  // face the outer wall
        step(v, Action::Toggle);
        CHECK_EQ(v.at(1, 0).type, kCellWall);
    }
}

TEST_CASE("grabbing the blue ball ends the episode with the formula reward") {
    WorldState w = blank_world(1, 2, 4);
    add_thing(w, 3, 2, kCellBall, kColorBlue);
    set_agent(w, 3, 3, kNorth);
    w.c = w.c_t / 2 - 1;  // success lands exactly at half budget

    StepResult res = step(w, Action::Pickup);
    CHECK(res.done);
    CHECK(res.info.success);
    CHECK(w.success);
    CHECK_EQ(w.c, w.c_t / 2);
    CHECK_EQ(res.reward, 1.0 - static_cast<double>(w.c) / static_cast<double>(w.c_t));
    CHECK_EQ(res.reward, doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("episodes time out with zero reward") {
    WorldState w = blank_world(1, 2, 4);
    set_agent(w, 3, 3, kNorth);
    w.c = w.c_t - 1;
    StepResult res = step(w, Action::Left);
    CHECK(res.done);
    CHECK_FALSE(res.info.success);
    CHECK_EQ(res.reward, 0.0);
    CHECK_THROWS_AS(step(w, Action::Left), std::logic_error);
}

TEST_CASE("success on the last allowed step keeps the reward at zero") {
    WorldState w = blank_world(1, 2, 4);
    add_thing(w, 3, 2, kCellBall, kColorBlue);
    set_agent(w, 3, 3, kNorth);
    w.c = w.c_t - 1;
    StepResult res = step(w, Action::Pickup);
    CHECK(res.done);
    CHECK(res.info.success);
    CHECK_EQ(res.reward, 0.0);
}

TEST_CASE("out-of-range action codes are rejected") {
    WorldState w = blank_world(1, 2, 4);
    set_agent(w, 3, 3, kNorth);
    CHECK_THROWS_AS(step(w, -1), ConfigError);
    CHECK_THROWS_AS(step(w, 6), ConfigError);
    CHECK_EQ(w.c, 0);  // rejected calls do not consume budget
}

TEST_CASE("object multiset is conserved except when boxes pop") {
    for (int task : {0, 1}) {
        WorldState w = generate_world(123, task, layout_full());
        Rng actions(999 + task);
        auto before = object_census(w);
        for (int i = 0; i < 1500 && !w.done; ++i) {
            StepResult res = step(w, static_cast<int>(actions.below(kNumActions)));
            auto after = object_census(w);
            if (res.info.objects_delta == 0) {
                CHECK(before == after);
            } else {
                CHECK_EQ(res.info.objects_delta, -1);
                REQUIRE_FALSE(w.destroyed_box_ids.empty());
                int box_id = w.destroyed_box_ids.back();
                auto expected = before;
                auto it = std::find_if(expected.begin(), expected.end(),
                                       [&](const std::array<int, 3>& e) {
                                           return e[0] == kCellBox && e[2] == box_id;
                                       });
                REQUIRE(it != expected.end());
                expected.erase(it);
                CHECK(expected == after);
            }
            before = std::move(after);
        }
    }
}

TEST_CASE("identical seeds and action sequences replay identically") {
    auto run = [](std::vector<std::string>* snapshots, std::vector<double>* rewards) {
        WorldState w = generate_world(77, 3, layout_full());
        Rng actions(31337);
        for (int i = 0; i < 400 && !w.done; ++i) {
            StepResult res = step(w, static_cast<int>(actions.below(kNumActions)));
            rewards->push_back(res.reward);
            if (i % 100 == 0) snapshots->push_back(serialize_world(w));
        }
        snapshots->push_back(serialize_world(w));
    };
    std::vector<std::string> snap_a, snap_b;
    std::vector<double> rew_a, rew_b;
    run(&snap_a, &rew_a);
    run(&snap_b, &rew_b);
    CHECK(snap_a == snap_b);
    CHECK(rew_a == rew_b);
}

TEST_CASE("a wall one cell ahead blacks out everything beyond it") {
    WorldState w = blank_world(1, 1, 5);
    // Width-1 corridor along x=3: walls on both sides, cap one cell ahead.
    for (int y = 1; y <= 5; ++y) {
        w.at(2, y).type = kCellWall;
        w.at(4, y).type = kCellWall;
    }
    w.at(3, 3).type = kCellWall;
    set_agent(w, 3, 4, kNorth);

    Observation obs = render_observation(w);
    std::set<std::pair<int, int>> expected = {{6, 3}, {6, 2}, {6, 4}, {5, 3}, {5, 2}, {5, 4}};
    for (int vr = 0; vr < 7; ++vr)
        for (int vc = 0; vc < 7; ++vc) {
            CAPTURE(vr);
            CAPTURE(vc);
            bool want = expected.count({vr, vc}) > 0;
            CHECK_EQ(obs.visible[vr * 7 + vc], want);
            if (!want) {
                CHECK_EQ(obs.at(vr, vc).type, kCellUnseen);
                CHECK_EQ(obs.at(vr, vc).object_id, -1);
            }
        }
    CHECK_EQ(obs.at(5, 3).type, kCellWall);  // the cap itself is seen
}

TEST_CASE("an open room is fully visible") {
    WorldState w = blank_world(1, 1, 7);
    set_agent(w, 4, 7, kNorth);
    Observation obs = render_observation(w);
    for (int i = 0; i < 49; ++i) CHECK(obs.visible[i]);
}

TEST_CASE("closed doors hide the next room, open doors reveal it") {
    WorldState w = blank_world(1, 2, 4);
    add_door(w, 5, 3, kColorRed, kDoorClosed);
    int key_id = add_thing(w, 7, 3, kCellKey, kColorYellow);
    set_agent(w, 3, 3, kEast);

    Observation closed = render_observation(w);
    CHECK_EQ(closed.at(4, 3).type, kCellDoor);
    CHECK_EQ(closed.at(4, 3).state, kDoorClosed);
    CHECK_FALSE(closed.visible[2 * 7 + 3]);
    CHECK_EQ(closed.at(2, 3).type, kCellUnseen);

    w.at(5, 3).door_state = kDoorOpen;
    Observation open = render_observation(w);
    CHECK_EQ(open.at(4, 3).state, kDoorOpen);
    CHECK(open.visible[2 * 7 + 3]);
    CHECK_EQ(open.at(2, 3).type, kCellKey);
    CHECK_EQ(open.at(2, 3).object_id, key_id);
}

TEST_CASE("the egocentric frame rotates with the agent") {
    WorldState w = blank_world(1, 1, 5);
    int key_id = add_thing(w, 3, 2, kCellKey, kColorRed);  // one cell world-north

    auto key_view = [&](int heading) {
        set_agent(w, 3, 3, heading);
        Observation obs = render_observation(w);
        for (int i = 0; i < 49; ++i)
            if (obs.cells[i].object_id == key_id) return i;
        return -1;
    };
    CHECK_EQ(key_view(kNorth), 5 * 7 + 3);  // straight ahead
    CHECK_EQ(key_view(kEast), 6 * 7 + 2);   // on the left
    CHECK_EQ(key_view(kWest), 6 * 7 + 4);   // on the right
    CHECK_EQ(key_view(kSouth), -1);         // behind, outside the window
}

TEST_CASE("a carried object is in no observation cell") {
    WorldState w = blank_world(1, 1, 5);
    int key_id = add_thing(w, 3, 2, kCellKey, kColorRed);
    set_agent(w, 3, 3, kNorth);
    step(w, Action::Pickup);
    REQUIRE_EQ(w.inventory.id, key_id);
    Observation obs = render_observation(w);
    for (int i = 0; i < 49; ++i) CHECK_NE(obs.cells[i].object_id, key_id);
    // The agent's own footing renders as the floor it stands on.
    CHECK_EQ(obs.at(6, 3).type, kCellEmpty);
    CHECK(obs.visible[6 * 7 + 3]);
}

TEST_CASE("room lookup partitions interiors and tracks doors by history") {
    WorldState w = generate_world(9, 0, layout_full());
    std::vector<int> counts(9, 0);
    int door_cells = 0, wall_throws = 0;
    for (int y = 0; y < w.height; ++y)
        for (int x = 0; x < w.width; ++x) {
            const int p = w.layout.interior + 1;
            if (x % p != 0 && y % p != 0) {
                counts[room_index(w, x, y)]++;
            } else if (w.at(x, y).type == kCellDoor) {
                CHECK_EQ(room_index(w, x, y), w.last_room);
                ++door_cells;
            } else {
                CHECK_THROWS_AS(room_index(w, x, y), std::runtime_error);
                ++wall_throws;
            }
        }
    for (int room = 0; room < 9; ++room) CHECK_EQ(counts[room], 25);
    CHECK_EQ(door_cells, 12);
    CHECK_GT(wall_throws, 0);

    // Row-major anchors: top-left interior is room 0, the grid center room 4.
    CHECK_EQ(room_index(w, 1, 1), 0);
    CHECK_EQ(room_index(w, 9, 9), 4);
    CHECK_THROWS_AS(room_index(w, -1, 0), std::runtime_error);
}

TEST_CASE("world snapshots round-trip exactly") {
    WorldState w = generate_world(21, 2, layout_full());
    Rng actions(5);
    for (int i = 0; i < 120 && !w.done; ++i) step(w, static_cast<int>(actions.below(kNumActions)));

    std::string text = serialize_world(w);
    WorldState back = parse_world(text);
    CHECK(back == w);
    CHECK_EQ(serialize_world(back), text);

    // The restored world continues exactly like the original.
    if (!w.done) {
        StepResult a = step(w, Action::Forward);
        StepResult b = step(back, Action::Forward);
        CHECK_EQ(serialize_world(w), serialize_world(back));
        CHECK_EQ(a.reward, b.reward);
    }
}

TEST_CASE("snapshot parsing rejects corrupted text") {
    WorldState w = generate_world(3, 0, layout_mini());
    std::string good = serialize_world(w);

    CHECK_THROWS_AS(parse_world("KIXWORLD 2\n" + good.substr(good.find('\n') + 1)), IoError);
    CHECK_THROWS_AS(parse_world(good.substr(0, good.size() / 2)), IoError);

    std::string vandal = good;
    size_t grid_pos = vandal.find("\ngrid ");
    size_t dot = vandal.find(".--", grid_pos);  // an empty cell's glyph triple
    REQUIRE(dot != std::string::npos);
    vandal[dot] = 'Z';
    CHECK_THROWS_AS(parse_world(vandal), IoError);
}

TEST_CASE("observations encode to channel tensors with raw codes") {
    WorldState w = blank_world(1, 1, 5);
    int key_id = add_thing(w, 3, 2, kCellKey, kColorPurple);
    set_agent(w, 3, 3, kNorth);
    Observation obs = render_observation(w);

    Tensor plain = encode_observation(obs);
    REQUIRE(plain.shape() == std::vector<int>{3, 7, 7});
    int key_cell = 5 * 7 + 3;
    CHECK_EQ(plain.value()[key_cell], static_cast<double>(kCellKey));
    CHECK_EQ(plain.value()[49 + key_cell], static_cast<double>(kColorPurple));
    CHECK_EQ(plain.value()[2 * 49 + key_cell], 0.0);

    Tensor marked = encode_observation(obs, key_id);
    REQUIRE(marked.shape() == std::vector<int>{4, 7, 7});
    double marks = 0;
    for (int i = 0; i < 49; ++i) marks += marked.value()[3 * 49 + i];
    CHECK_EQ(marks, 1.0);
    CHECK_EQ(marked.value()[3 * 49 + key_cell], 1.0);

    Tensor unmarked = encode_observation(obs, key_id + 500);  // target out of view
    for (int i = 0; i < 49; ++i) CHECK_EQ(unmarked.value()[3 * 49 + i], 0.0);
}

TEST_CASE("generation rejects impossible layouts with a reason") {
    CHECK_THROWS_AS(generate_world(0, 4, layout_full()), ConfigError);
    CHECK_THROWS_AS(generate_world(0, -1, layout_full()), ConfigError);
    CHECK_THROWS_AS(generate_world(0, 0, LayoutConfig{1, 1, 5, false}), ConfigError);
    CHECK_THROWS_AS(generate_world(0, 0, LayoutConfig{1, 2, 1, false}), ConfigError);

    // Two-cell-wide rooms cannot hold two blockers, two key boxes, two floor
    // keys, and the agent all in the middle room.
    LayoutConfig cramped{1, 3, 2, true};
    CHECK_THROWS_WITH_AS(generate_world(0, 2, cramped),
                         doctest::Contains("generation failed"), std::runtime_error);
}

TEST_CASE("the mini layout is a two-room world with one locked door") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        WorldState w = generate_world(seed, 0, layout_mini());
        CAPTURE(seed);
        CHECK_EQ(w.c_t, 40L * 2 * 16);
        auto doors = scan_doors(w);
        REQUIRE_EQ(doors.size(), 1);
        CHECK_EQ(doors[0].state, kDoorLocked);

        // Goal ball in the far room, key box and agent in the start room.
        int balls = 0, boxes = 0;
        for (int y = 0; y < w.height; ++y)
            for (int x = 0; x < w.width; ++x) {
                const Cell& cell = w.at(x, y);
                if (cell.type == kCellBall) {
                    ++balls;
                    CHECK_EQ(cell.color, kColorBlue);
                    CHECK_EQ(room_of_interior(w.layout, x, y), 0);
                }
                if (cell.type == kCellBox) {
                    ++boxes;
                    CHECK_EQ(room_of_interior(w.layout, x, y), 1);
                    REQUIRE(cell.has_content);
                    CHECK_EQ(cell.content.type, kCellKey);
                    CHECK_EQ(cell.content.color, doors[0].color);
                }
            }
        CHECK_EQ(balls, 1);  // no blockers in the mini layout
        CHECK_EQ(boxes, 1);
        CHECK_EQ(room_of_interior(w.layout, w.agent_x, w.agent_y), 1);
    }
}

TEST_CASE("a scripted mini episode can be solved by hand") {
    // Keys in boxes: toggle the box, take the key, unlock, fetch the ball.
    WorldState w = blank_world(1, 2, 4);
    add_door(w, 5, 2, kColorGreen, kDoorLocked);
    add_box(w, 7, 2, kColorGrey, kCellKey, kColorGreen);
    int ball_id = add_thing(w, 2, 2, kCellBall, kColorBlue);
    set_agent(w, 8, 2, kWest);

    step(w, Action::Toggle);   // pop the box
    CHECK_EQ(w.at(7, 2).type, kCellKey);
    step(w, Action::Pickup);   // take the key
    CHECK(w.inventory.present);
    step(w, Action::Forward);  // to (7,2)
    step(w, Action::Forward);  // to (6,2)
    step(w, Action::Toggle);   // unlock
    CHECK_EQ(w.at(5, 2).door_state, kDoorOpen);
    step(w, Action::Forward);  // onto the door
    step(w, Action::Forward);  // (4,2)
    // Hands full: set the key down on a side cell, then grab the ball.
    step(w, Action::Left);     // face south, cell (4,3) is free
    step(w, Action::Drop);
    CHECK_FALSE(w.inventory.present);
    CHECK_EQ(w.at(4, 3).type, kCellKey);
    step(w, Action::Right);    // face west again
    step(w, Action::Forward);  // (3,2)
    StepResult last = step(w, Action::Pickup);
    CHECK(last.done);
    CHECK(last.info.success);
    CHECK_EQ(w.inventory.id, ball_id);
    CHECK_GT(last.reward, 0.0);
}

TEST_CASE("find_object tracks grid, box, and inventory locations") {
    WorldState w = blank_world(1, 2, 4);
    int key_id = add_thing(w, 3, 2, kCellKey, kColorRed);
    int boxed_id = add_box(w, 2, 2, kColorGrey, kCellBall, kColorGreen);
    set_agent(w, 3, 3, kNorth);

    auto on_grid = find_object(w, key_id);
    CHECK_EQ(on_grid.where, ObjectLocation::OnGrid);
    CHECK_EQ(on_grid.x, 3);
    CHECK_EQ(on_grid.y, 2);

    auto boxed = find_object(w, boxed_id);
    CHECK_EQ(boxed.where, ObjectLocation::InBox);
    CHECK_EQ(boxed.type, kCellBall);

    step(w, Action::Pickup);
    CHECK_EQ(find_object(w, key_id).where, ObjectLocation::Carried);
    CHECK_EQ(find_object(w, 12345).where, ObjectLocation::Gone);
}

TEST_CASE("action and layout names round-trip") {
    for (int i = 0; i < kNumActions; ++i) {
        Action a = static_cast<Action>(i);
        CHECK_EQ(action_from_name(action_name(a)), a);
    }
    CHECK_THROWS_AS(action_from_name("sprint"), ConfigError);
    CHECK_EQ(layout_by_name("mini").rooms_cols, 2);
    CHECK_EQ(layout_by_name("full").rooms_rows, 3);
    CHECK_THROWS_AS(layout_by_name("medium"), ConfigError);
}
