#pragma once

#include <array>
#include <stdexcept>
#include <vector>

#include "grid.hpp"
#include "rng.hpp"

namespace gridtalk {

// Movement actions are absolute (grid-aligned), not relative to heading.
enum class ListenerAction : std::uint8_t { move_up, move_down, move_right, move_left, stay };
inline constexpr int kActionCount = 5;

inline const char* to_string(ListenerAction a) {
    switch (a) {
        case ListenerAction::move_up: return "move_up";
        case ListenerAction::move_down: return "move_down";
        case ListenerAction::move_right: return "move_right";
        case ListenerAction::move_left: return "move_left";
        case ListenerAction::stay: return "stay";
    }
    throw std::logic_error("bad ListenerAction");
}

inline ListenerAction action_from_string(std::string_view s) {
    for (int i = 0; i < kActionCount; ++i)
        if (s == to_string(static_cast<ListenerAction>(i)))
            return static_cast<ListenerAction>(i);
    throw std::runtime_error("unknown action: " + std::string(s));
}

enum class Heading : std::uint8_t { up, down, right, left };

inline const char* to_string(Heading h) {
    switch (h) {
        case Heading::up: return "up";
        case Heading::down: return "down";
        case Heading::right: return "right";
        case Heading::left: return "left";
    }
    throw std::logic_error("bad Heading");
}

inline Heading heading_from_string(std::string_view s) {
    for (int i = 0; i < 4; ++i)
        if (s == to_string(static_cast<Heading>(i)))
            return static_cast<Heading>(i);
    throw std::runtime_error("unknown heading: " + std::string(s));
}

// Direction index into kDirOffsets for each movement action / heading.
// Actions and headings share the up, down, right, left order.
inline int direction_index(ListenerAction a) {
    if (a == ListenerAction::stay) throw std::logic_error("stay has no direction");
    return static_cast<int>(a);
}
inline int direction_index(Heading h) { return static_cast<int>(h); }
inline Heading heading_from_direction(int dir) {
    if (dir < 0 || dir >= 4) throw std::logic_error("bad direction index");
    return static_cast<Heading>(dir);
}

inline constexpr int kEpisodeTimeout = 100;

struct EnvState {
    Cell agent_pos;
    Heading heading = Heading::up;
    Cell goal_pos;
    int step_count = 0;
    bool done = false;
};

// Goal drawn uniformly from the layout's candidates; agent at the start cell
// facing up.
inline EnvState reset(const MazeLayout& m, RngStream& rng) {
    EnvState s;
    s.agent_pos = m.start;
    s.heading = Heading::up;
    s.goal_pos = m.goal_candidates[rng.next_index(static_cast<int>(m.goal_candidates.size()))];
    s.step_count = 0;
    s.done = false;
    return s;
}

struct StepResult {
    EnvState state;
    double reward = 0.0;
    bool done = false;
};

// One transition. Movement into a wall keeps the position but still turns the
// agent toward the attempted direction; stay keeps the heading. Reward is 1
// exactly when the new position is the goal. Episodes end on goal arrival or
// after kEpisodeTimeout steps.
inline StepResult apply_action(const MazeLayout& m, const EnvState& state, ListenerAction a) {
    if (state.done) throw std::logic_error("apply_action: episode already finished");
    EnvState s = state;
    if (a != ListenerAction::stay) {
        int dir = direction_index(a);
        s.heading = heading_from_direction(dir);
        Cell target{s.agent_pos.x + kDirOffsets[dir].x, s.agent_pos.y + kDirOffsets[dir].y};
        if (m.is_floor(target)) s.agent_pos = target;
    }
    s.step_count += 1;
    double reward = (s.agent_pos == s.goal_pos) ? 1.0 : 0.0;
    s.done = (reward == 1.0) || (s.step_count >= kEpisodeTimeout);
    return StepResult{s, reward, s.done};
}

// --- observations ----------------------------------------------------------

using CellColor = std::array<double, 3>;

inline constexpr CellColor kWallColor{1.0, 1.0, 1.0};
inline constexpr CellColor kFloorColor{0.0, 0.0, 0.0};
inline constexpr CellColor kAgentColor{0.0, 1.0, 0.0};
inline constexpr CellColor kGoalColor{0.0, 0.0, 1.0};

enum class Visibility : std::uint8_t { none, partial };

inline const char* to_string(Visibility v) {
    return v == Visibility::none ? "none" : "partial";
}

inline Visibility visibility_from_string(std::string_view s) {
    if (s == "none") return Visibility::none;
    if (s == "partial") return Visibility::partial;
    throw std::runtime_error("unknown visibility: " + std::string(s));
}

// Color of one cell with goal and agent overlays; out-of-grid renders as wall.
inline CellColor render_cell(const MazeLayout& m, const EnvState& s, Cell c) {
    if (!m.in_bounds(c)) return kWallColor;
    if (c == s.goal_pos) return kGoalColor;
    if (c == s.agent_pos) return kAgentColor;
    return m.is_floor(c) ? kFloorColor : kWallColor;
}

// Three pixels in front of the listener: front-left, front, front-right
// relative to its heading. Empty under Visibility::none.
struct ListenerView {
    std::vector<CellColor> pixels;
};

inline ListenerView listener_view(const MazeLayout& m, const EnvState& s, Visibility vis) {
    ListenerView v;
    if (vis == Visibility::none) return v;
    int d = direction_index(s.heading);
    Cell f = kDirOffsets[d];
    // Left of a heading is its 90-degree counterclockwise rotation; with
    // y down, (x, y) rotated CCW is (y, -x).
    Cell l{f.y, -f.x};
    Cell p = s.agent_pos;
    v.pixels = {
        render_cell(m, s, {p.x + f.x + l.x, p.y + f.y + l.y}),
        render_cell(m, s, {p.x + f.x, p.y + f.y}),
        render_cell(m, s, {p.x + f.x - l.x, p.y + f.y - l.y}),
    };
    return v;
}

// Full map, rotated so the listener's heading points up. Row-major, 81 pixels.
struct SpeakerView {
    std::array<CellColor, kGridSide * kGridSide> pixels{};
};

inline SpeakerView speaker_view(const MazeLayout& m, const EnvState& s) {
    std::array<CellColor, kGridSide * kGridSide> img;
    for (int y = 0; y < kGridSide; ++y)
        for (int x = 0; x < kGridSide; ++x)
            img[y * kGridSide + x] = render_cell(m, s, {x, y});

    // Quarter turns counterclockwise needed to bring the heading to "up".
    int turns = 0;
    switch (s.heading) {
        case Heading::up: turns = 0; break;
        case Heading::right: turns = 1; break;
        case Heading::down: turns = 2; break;
        case Heading::left: turns = 3; break;
    }
    for (int t = 0; t < turns; ++t) {
        std::array<CellColor, kGridSide * kGridSide> rot;
        // One CCW turn: out[y][x] = in[x][N-1-y]
        for (int y = 0; y < kGridSide; ++y)
            for (int x = 0; x < kGridSide; ++x)
                rot[y * kGridSide + x] = img[x * kGridSide + (kGridSide - 1 - y)];
        img = rot;
    }
    SpeakerView v;
    v.pixels = img;
    return v;
}

}  // namespace gridtalk
