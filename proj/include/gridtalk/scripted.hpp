#pragma once

#include <stdexcept>
#include <vector>

#include "env.hpp"
#include "trace.hpp"

namespace gridtalk {

// Hand-written reference pair used as a ground-truth protocol: the speaker
// names the first move of a shortest path with symbols 1..4 (up, down,
// right, left; 0 stays reserved for silence) and the listener executes it.
//
// Unsituated, the speaker talks every step. Situated, the listener solicits
// by staying exactly where it cannot act on its own: at junctions or with a
// blocked front (or, with no visibility, everywhere), and the message lands
// on the following step.

struct ScriptedCondition {
    bool situated = false;
    Visibility visibility = Visibility::partial;
};

inline int direction_to_symbol(int dir) { return dir + 1; }

inline ListenerAction symbol_to_action(int symbol) {
    if (symbol <= 0 || symbol > 4) return ListenerAction::stay;
    return static_cast<ListenerAction>(symbol - 1);
}

inline int scripted_speak(const MazeLayout& m, const EnvState& s) {
    auto dir = bfs_first_step(m, s.agent_pos, s.goal_pos);
    if (!dir) throw std::logic_error("scripted_speak: no path to goal");
    return direction_to_symbol(*dir);
}

inline bool front_blocked(const MazeLayout& m, const EnvState& s) {
    const Cell d = kDirOffsets[direction_index(s.heading)];
    return !m.is_floor({s.agent_pos.x + d.x, s.agent_pos.y + d.y});
}

inline EpisodeTrace run_scripted_episode(const MazeLayout& m, ScriptedCondition cond, Cell goal,
                                         std::int64_t episode_index = 0) {
    if (!m.is_goal_candidate(goal)) throw std::logic_error("scripted episode: not a goal cell");
    EnvState state;
    state.agent_pos = m.start;
    state.heading = Heading::up;
    state.goal_pos = goal;

    EpisodeTrace trace;
    trace.layout = m.id;
    trace.episode = episode_index;

    bool pending = false;
    while (!state.done) {
        int symbol = -1;
        if (!cond.situated || pending) symbol = scripted_speak(m, state);

        ListenerAction a = ListenerAction::stay;
        if (symbol >= 0) {
            a = symbol_to_action(symbol);
        } else if (cond.situated) {
            if (cond.visibility == Visibility::none ||
                is_junction(m, state.agent_pos) || front_blocked(m, state)) {
                a = ListenerAction::stay;
            } else {
                a = static_cast<ListenerAction>(direction_index(state.heading));
            }
        }

        TraceStep ts;
        ts.step = state.step_count;
        ts.cell = state.agent_pos;
        ts.heading = state.heading;
        ts.symbol = symbol;
        ts.action = a;
        ts.solicited = cond.situated && symbol >= 0;

        StepResult sr = apply_action(m, state, a);
        state = sr.state;
        ts.env_reward = sr.reward;
        trace.steps.push_back(ts);
        trace.total_reward += sr.reward;

        pending = cond.situated && a == ListenerAction::stay;
    }
    trace.step_count = static_cast<int>(trace.steps.size());
    trace.nonzero_messages = count_nonzero_messages(trace);
    return trace;
}

// One episode per goal candidate, in candidate order.
inline std::vector<EpisodeTrace> run_scripted_goal_sweep(const MazeLayout& m,
                                                         ScriptedCondition cond) {
    std::vector<EpisodeTrace> traces;
    for (std::size_t i = 0; i < m.goal_candidates.size(); ++i)
        traces.push_back(run_scripted_episode(m, cond, m.goal_candidates[i],
                                              static_cast<std::int64_t>(i)));
    return traces;
}

}  // namespace gridtalk
