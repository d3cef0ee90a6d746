#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gridtalk {

inline constexpr int kGridSide = 9;

enum class CellKind : std::uint8_t { wall, floor };

// x is the column, y is the row; y = 0 is the top row.
struct Cell {
    int x = 0;
    int y = 0;
    friend constexpr bool operator==(Cell a, Cell b) { return a.x == b.x && a.y == b.y; }
    friend constexpr bool operator!=(Cell a, Cell b) { return !(a == b); }
};

enum class LayoutId { tmaze, dead_ends, four_rooms };

inline const char* to_string(LayoutId id) {
    switch (id) {
        case LayoutId::tmaze: return "tmaze";
        case LayoutId::dead_ends: return "dead_ends";
        case LayoutId::four_rooms: return "four_rooms";
    }
    throw std::logic_error("bad LayoutId");
}

inline LayoutId layout_id_from_string(std::string_view s) {
    if (s == "tmaze") return LayoutId::tmaze;
    if (s == "dead_ends") return LayoutId::dead_ends;
    if (s == "four_rooms") return LayoutId::four_rooms;
    throw std::runtime_error("unknown layout id: " + std::string(s));
}

struct MazeLayout {
    LayoutId id = LayoutId::tmaze;
    std::array<std::array<CellKind, kGridSide>, kGridSide> grid{};  // grid[y][x]
    Cell start;
    std::vector<Cell> goal_candidates;  // in text order: top to bottom, left to right
    int s_opt = 0;

    bool in_bounds(Cell c) const {
        return c.x >= 0 && c.x < kGridSide && c.y >= 0 && c.y < kGridSide;
    }
    // Cells outside the grid count as wall.
    bool is_floor(Cell c) const {
        return in_bounds(c) && grid[c.y][c.x] == CellKind::floor;
    }
    bool is_goal_candidate(Cell c) const {
        for (Cell g : goal_candidates)
            if (g == c) return true;
        return false;
    }
};

// The four orthogonal neighbor offsets, in the same order the listener's
// movement actions use: up, down, right, left.
inline constexpr std::array<Cell, 4> kDirOffsets{{{0, -1}, {0, 1}, {1, 0}, {-1, 0}}};

inline int floor_neighbor_count(const MazeLayout& m, Cell c) {
    int n = 0;
    for (Cell d : kDirOffsets)
        if (m.is_floor({c.x + d.x, c.y + d.y})) ++n;
    return n;
}

// A junction is a floor cell with three or more floor neighbors.
inline bool is_junction(const MazeLayout& m, Cell c) {
    return m.is_floor(c) && floor_neighbor_count(m, c) >= 3;
}

// --- text fixture format -------------------------------------------------
//
// Header line "layout <id> s_opt <n>" followed by nine rows of nine
// characters: '#' wall, '.' floor, 'S' start (floor), 'G' goal candidate
// (floor). Serialization reproduces the canonical fixtures byte for byte.

inline std::string serialize_layout(const MazeLayout& m) {
    std::string out = "layout ";
    out += to_string(m.id);
    out += " s_opt ";
    out += std::to_string(m.s_opt);
    out += '\n';
    for (int y = 0; y < kGridSide; ++y) {
        for (int x = 0; x < kGridSide; ++x) {
            Cell c{x, y};
            char ch = '#';
            if (m.grid[y][x] == CellKind::floor) {
                ch = '.';
                if (c == m.start) ch = 'S';
                else if (m.is_goal_candidate(c)) ch = 'G';
            }
            out += ch;
        }
        out += '\n';
    }
    return out;
}

inline MazeLayout parse_layout(std::string_view text) {
    MazeLayout m;
    // header
    std::size_t eol = text.find('\n');
    if (eol == std::string_view::npos) throw std::runtime_error("layout: missing header");
    {
        std::string head(text.substr(0, eol));
        char idbuf[32];
        int sopt = -1;
        if (std::sscanf(head.c_str(), "layout %31s s_opt %d", idbuf, &sopt) != 2 || sopt < 0)
            throw std::runtime_error("layout: bad header: " + head);
        m.id = layout_id_from_string(idbuf);
        m.s_opt = sopt;
    }
    std::size_t pos = eol + 1;
    bool start_seen = false;
    for (int y = 0; y < kGridSide; ++y) {
        std::size_t rowend = text.find('\n', pos);
        std::string_view row = text.substr(pos, rowend == std::string_view::npos
                                                    ? std::string_view::npos
                                                    : rowend - pos);
        if (row.size() != kGridSide)
            throw std::runtime_error("layout: row " + std::to_string(y) + " has wrong width");
        for (int x = 0; x < kGridSide; ++x) {
            switch (row[x]) {
                case '#': m.grid[y][x] = CellKind::wall; break;
                case '.': m.grid[y][x] = CellKind::floor; break;
                case 'S':
                    m.grid[y][x] = CellKind::floor;
                    if (start_seen) throw std::runtime_error("layout: multiple starts");
                    m.start = {x, y};
                    start_seen = true;
                    break;
                case 'G':
                    m.grid[y][x] = CellKind::floor;
                    m.goal_candidates.push_back({x, y});
                    break;
                default:
                    throw std::runtime_error("layout: bad cell character");
            }
        }
        if (rowend == std::string_view::npos) {
            if (y != kGridSide - 1) throw std::runtime_error("layout: truncated");
            pos = text.size();
        } else {
            pos = rowend + 1;
        }
    }
    if (!start_seen) throw std::runtime_error("layout: no start cell");
    if (m.goal_candidates.empty()) throw std::runtime_error("layout: no goal candidates");
    return m;
}

// --- BFS -----------------------------------------------------------------

// Distances from `from` to every cell; -1 for walls and unreachable cells.
inline std::array<int, kGridSide * kGridSide> bfs_distances(const MazeLayout& m, Cell from) {
    std::array<int, kGridSide * kGridSide> dist;
    dist.fill(-1);
    if (!m.is_floor(from)) return dist;
    std::vector<Cell> frontier{from};
    dist[from.y * kGridSide + from.x] = 0;
    while (!frontier.empty()) {
        std::vector<Cell> next;
        for (Cell c : frontier) {
            int d = dist[c.y * kGridSide + c.x];
            for (Cell off : kDirOffsets) {
                Cell n{c.x + off.x, c.y + off.y};
                if (!m.is_floor(n)) continue;
                int& dn = dist[n.y * kGridSide + n.x];
                if (dn < 0) {
                    dn = d + 1;
                    next.push_back(n);
                }
            }
        }
        frontier = std::move(next);
    }
    return dist;
}

// Shortest path length in steps; nullopt when no path exists.
inline std::optional<int> shortest_path(const MazeLayout& m, Cell from, Cell to) {
    if (!m.is_floor(from) || !m.is_floor(to)) return std::nullopt;
    auto dist = bfs_distances(m, to);
    int d = dist[from.y * kGridSide + from.x];
    if (d < 0) return std::nullopt;
    return d;
}

// First move of a shortest path from `from` to `to`: the direction index into
// kDirOffsets (up, down, right, left; first match wins on ties). nullopt when
// already there or unreachable.
inline std::optional<int> bfs_first_step(const MazeLayout& m, Cell from, Cell to) {
    if (from == to) return std::nullopt;
    auto dist = bfs_distances(m, to);
    int d0 = m.in_bounds(from) ? dist[from.y * kGridSide + from.x] : -1;
    if (d0 < 0) return std::nullopt;
    for (int i = 0; i < 4; ++i) {
        Cell n{from.x + kDirOffsets[i].x, from.y + kDirOffsets[i].y};
        if (m.is_floor(n) && dist[n.y * kGridSide + n.x] == d0 - 1) return i;
    }
    throw std::logic_error("bfs_first_step: inconsistent distance field");
}

// --- canonical layouts ---------------------------------------------------

namespace detail {

inline constexpr std::string_view kTmazeText =
    "layout tmaze s_opt 9\n"
    "#########\n"
    "#G#####G#\n"
    "#.#####.#\n"
    "#.#####.#\n"
    "#.......#\n"
    "#.##.##.#\n"
    "#.##.##.#\n"
    "#G##S##G#\n"
    "#########\n";

inline constexpr std::string_view kDeadEndsText =
    "layout dead_ends s_opt 4\n"
    "#########\n"
    "####G####\n"
    "####...G#\n"
    "#G...####\n"
    "####.####\n"
    "####...G#\n"
    "#G...####\n"
    "####S####\n"
    "#########\n";

inline constexpr std::string_view kFourRoomsText =
    "layout four_rooms s_opt 2\n"
    "#########\n"
    "#GGG#GGG#\n"
    "#GGG.GGG#\n"
    "#GGG#GGG#\n"
    "##.###.##\n"
    "#GGG#GGG#\n"
    "#..G.GGG#\n"
    "#S.G#GGG#\n"
    "#########\n";

}  // namespace detail

inline std::string_view layout_fixture_text(LayoutId id) {
    switch (id) {
        case LayoutId::tmaze: return detail::kTmazeText;
        case LayoutId::dead_ends: return detail::kDeadEndsText;
        case LayoutId::four_rooms: return detail::kFourRoomsText;
    }
    throw std::logic_error("bad LayoutId");
}

// Structural checks shared by all layouts plus per-layout expectations.
inline void validate_layout(const MazeLayout& m) {
    for (int i = 0; i < kGridSide; ++i) {
        if (m.grid[0][i] != CellKind::wall || m.grid[kGridSide - 1][i] != CellKind::wall ||
            m.grid[i][0] != CellKind::wall || m.grid[i][kGridSide - 1] != CellKind::wall)
            throw std::runtime_error("layout: border must be wall");
    }
    if (!m.is_floor(m.start)) throw std::runtime_error("layout: start not on floor");
    auto dist = bfs_distances(m, m.start);
    int min_goal = -1;
    for (Cell g : m.goal_candidates) {
        if (!m.is_floor(g)) throw std::runtime_error("layout: goal not on floor");
        if (g == m.start) throw std::runtime_error("layout: goal at start");
        int d = dist[g.y * kGridSide + g.x];
        if (d < 0) throw std::runtime_error("layout: unreachable goal");
        if (min_goal < 0 || d < min_goal) min_goal = d;
    }
    // s_opt is the shortest-path length from start to the nearest candidate.
    if (min_goal != m.s_opt) throw std::runtime_error("layout: s_opt mismatch");

    std::size_t expected_goals = 0;
    switch (m.id) {
        case LayoutId::tmaze: expected_goals = 4; break;
        case LayoutId::dead_ends: expected_goals = 5; break;
        case LayoutId::four_rooms: expected_goals = 32; break;
    }
    if (m.goal_candidates.size() != expected_goals)
        throw std::runtime_error("layout: wrong goal count");
    if (m.id == LayoutId::tmaze) {
        for (Cell g : m.goal_candidates)
            if (dist[g.y * kGridSide + g.x] != 9)
                throw std::runtime_error("tmaze: all goals must sit at distance 9");
    }
}

inline MazeLayout build_layout(LayoutId id) {
    MazeLayout m = parse_layout(layout_fixture_text(id));
    validate_layout(m);
    return m;
}

}  // namespace gridtalk
