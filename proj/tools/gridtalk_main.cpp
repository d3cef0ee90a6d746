#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gridtalk/gridtalk.hpp"

namespace fs = std::filesystem;
using namespace gridtalk;

namespace {

std::string read_text_file(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

// Pulls the experiment config back out of a run directory's log.
ExperimentConfig config_from_run_log(const fs::path& log_path) {
    std::ifstream f(log_path);
    if (!f) throw std::runtime_error("cannot open " + log_path.string());
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        if (j.value("kind", "") == "config" && j.contains("config"))
            return config_from_json(j["config"]);
    }
    throw std::runtime_error("no config line in " + log_path.string());
}

void print_metrics_row(const char* label, const RunningMetrics& m, double mean_steps,
                       double mean_msgs) {
    std::printf("%-20s %8lld %8.4f %8.4f %9.4f %7.1f %9.1f\n", label,
                static_cast<long long>(m.episodes), m.task_success(), m.optimality(),
                m.sparsity(), mean_steps, mean_msgs);
}

int cmd_train(const std::string& config_path, std::optional<std::uint64_t> seed,
              std::string out_dir, const std::string& resume) {
    ExperimentConfig cfg = load_config_file(config_path);
    if (seed) cfg.seed = *seed;
    if (out_dir.empty())
        out_dir = std::string("runs/") + to_string(cfg.mode.kind) + "_" + to_string(cfg.layout) +
                  "_s" + std::to_string(cfg.seed);
    std::optional<fs::path> resume_path;
    if (!resume.empty()) resume_path = resume;
    TrainResult tr = train(cfg, out_dir, resume_path);
    std::printf("run dir    %s\n", tr.out_dir.string().c_str());
    std::printf("episodes   %lld\n", static_cast<long long>(tr.episodes));
    std::printf("env steps  %lld\n", static_cast<long long>(tr.env_steps));
    std::printf("stage      %d\n", tr.final_stage);
    std::printf("window     M_t %.4f  M_o %.4f  M_s %.4f\n", tr.win_Mt, tr.win_Mo, tr.win_Ms);
    return 0;
}

int cmd_sweep(const std::string& grid_path, std::optional<std::uint64_t> seed,
              std::string out_dir) {
    SweepGrid grid = load_sweep_file(grid_path);
    if (seed) grid.base.seed = *seed;
    if (out_dir.empty()) out_dir = "sweep";
    SweepResult sr = sweep(grid, out_dir);
    std::printf("%4s %10s %10s %4s %8s %8s %s\n", "cell", "alpha_sp", "alpha_li", "rep",
                "mean_Mo", "se_Mo", "ok");
    for (std::size_t i = 0; i < sr.cells.size(); ++i) {
        const SweepCell& c = sr.cells[i];
        std::printf("%4zu %10.2e %10.2e %4d %8.4f %8s %d/%zu\n", i, c.alpha_speaker,
                    c.alpha_listener, c.rep_size, c.mean_Mo,
                    c.se_Mo ? format_double(*c.se_Mo).c_str() : "-", c.ok_count, c.seeds.size());
    }
    if (sr.best_cell >= 0)
        std::printf("best cell  %d (mean M_o %.4f)\n", sr.best_cell,
                    sr.cells[sr.best_cell].mean_Mo);
    if (sr.best_pair_cell >= 0)
        std::printf("best pair  cell %d seed %llu M_o %.4f (%s)\n", sr.best_pair_cell,
                    static_cast<unsigned long long>(sr.best_pair_seed), sr.best_pair_Mo,
                    sr.best_pair_dir.c_str());
    return 0;
}

int cmd_eval(const std::string& ckpt_path, int episodes, const std::string& config_path,
             std::optional<std::uint64_t> seed, const std::string& out_dir) {
    ExperimentConfig cfg = config_path.empty()
                               ? config_from_run_log(fs::path(ckpt_path).parent_path() / "run.log")
                               : load_config_file(config_path);
    RunState rs = load_run_checkpoint(ckpt_path, config_hash(cfg));
    const MazeLayout m = build_layout(cfg.layout);
    RngBundle eval_rng = seed ? make_eval_rng(*seed) : rs.eval_rng;
    std::vector<EpisodeTrace> traces;
    RunningMetrics em = evaluate(m, cfg.mode, rs.stage, rs.speaker, rs.listener, eval_rng,
                                 episodes, m.s_opt, &traces);
    double steps = 0.0, msgs = 0.0;
    for (const auto& t : traces) {
        steps += t.step_count;
        msgs += t.nonzero_messages;
    }
    std::printf("%-20s %8s %8s %8s %9s %7s %9s\n", "checkpoint", "episodes", "M_t", "M_o", "M_s",
                "steps", "messages");
    print_metrics_row(fs::path(ckpt_path).filename().string().c_str(), em,
                      steps / traces.size(), msgs / traces.size());
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        for (const auto& t : traces) {
            char name[32];
            std::snprintf(name, sizeof name, "trace_ep%04lld.txt",
                          static_cast<long long>(t.episode));
            std::ofstream f(fs::path(out_dir) / name, std::ios::binary);
            f << serialize_trace(t);
        }
        ProtocolHeatmap h = protocol_heatmap(traces);
        write_heatmap_csv(h, fs::path(out_dir) / "heatmap.csv");
        write_heatmap_svg(h, m, fs::path(out_dir) / "heatmap.svg");
        std::printf("wrote %zu traces + heatmap to %s\n", traces.size(), out_dir.c_str());
    }
    return 0;
}

int cmd_heatmap(const std::vector<std::string>& paths, std::string out_dir) {
    if (out_dir.empty()) out_dir = ".";
    std::vector<EpisodeTrace> traces;
    for (const auto& p : paths) traces.push_back(parse_trace(read_text_file(p)));
    ProtocolHeatmap h = protocol_heatmap(traces);
    fs::create_directories(out_dir);
    const fs::path csv = fs::path(out_dir) / "heatmap.csv";
    const fs::path svg = fs::path(out_dir) / "heatmap.svg";
    write_heatmap_csv(h, csv);
    write_heatmap_svg(h, build_layout(h.layout), svg);
    std::printf("%lld episodes, %lld steps on %s\n", static_cast<long long>(h.episodes),
                static_cast<long long>(h.steps), to_string(h.layout));
    std::printf("wrote %s and %s\n", csv.string().c_str(), svg.string().c_str());
    return 0;
}

int cmd_curves(const std::vector<std::string>& paths, const std::string& metric, int window,
               std::string out_dir) {
    if (out_dir.empty()) out_dir = ".";
    std::vector<RunLogEpisodes> runs;
    for (const auto& p : paths) runs.push_back(parse_run_log(p));
    CurveSeries cs = learning_curves(runs, metric, window);
    fs::create_directories(out_dir);
    const fs::path csv = fs::path(out_dir) / (metric + ".csv");
    const fs::path svg = fs::path(out_dir) / (metric + ".svg");
    write_curves_csv(cs, csv);
    write_curves_svg({{metric, cs}}, metric, svg);
    std::printf("%s over %zu runs: final %.4f +/- %.4f at %.0f env steps\n", metric.c_str(),
                runs.size(), cs.mean.back(), cs.se.back(), cs.x.back());
    std::printf("wrote %s and %s\n", csv.string().c_str(), svg.string().c_str());
    return 0;
}

int cmd_compare(const std::vector<std::string>& set_args, int window, std::string out_dir) {
    if (out_dir.empty()) out_dir = "compare";
    std::vector<LabeledRuns> sets;
    for (const auto& arg : set_args) {
        auto eq = arg.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == arg.size())
            throw std::runtime_error("compare: expected label=log[,log...], got " + arg);
        LabeledRuns set;
        set.label = arg.substr(0, eq);
        std::string rest = arg.substr(eq + 1);
        std::size_t pos = 0;
        while (pos <= rest.size()) {
            auto comma = rest.find(',', pos);
            if (comma == std::string::npos) comma = rest.size();
            set.runs.push_back(parse_run_log(rest.substr(pos, comma - pos)));
            pos = comma + 1;
        }
        sets.push_back(std::move(set));
    }
    CompareReport rep = compare_report(sets, out_dir, window);
    std::printf("%-16s %-4s %10s %10s\n", "label", "", "mean", "stderr");
    for (const auto& c : rep.finals) {
        if (c.available)
            std::printf("%-16s %-4s %10.4f %10s\n", c.label.c_str(), c.metric.c_str(), c.mean,
                        c.se ? format_double(*c.se).c_str() : "undefined");
        else
            std::printf("%-16s %-4s %10s %10s\n", c.label.c_str(), c.metric.c_str(), "missing",
                        "missing");
    }
    for (const auto& f : rep.files) std::printf("wrote %s\n", f.string().c_str());
    return 0;
}

int cmd_oracle(const std::string& layout_name) {
    const MazeLayout m = build_layout(layout_id_from_string(layout_name));
    std::printf("%-20s %8s %8s %8s %9s %7s %9s\n", "condition", "episodes", "M_t", "M_o", "M_s",
                "steps", "messages");
    for (bool situated : {false, true})
        for (Visibility vis : {Visibility::none, Visibility::partial}) {
            ScriptedCondition cond;
            cond.situated = situated;
            cond.visibility = vis;
            std::vector<EpisodeTrace> traces = run_scripted_goal_sweep(m, cond);
            RunningMetrics rm;
            rm.s_opt = m.s_opt;
            double steps = 0.0, msgs = 0.0;
            for (const auto& t : traces) {
                rm.record_episode(t.total_reward, t.step_count, t.nonzero_messages);
                steps += t.step_count;
                msgs += t.nonzero_messages;
            }
            std::string label = std::string(situated ? "situated" : "unsituated") + "/" +
                                (vis == Visibility::none ? "none" : "partial");
            print_metrics_row(label.c_str(), rm, steps / traces.size(), msgs / traces.size());
        }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gridtalk: speaker/listener maze communication experiments"};
    app.require_subcommand(1);

    std::optional<std::uint64_t> seed;
    std::string out_dir;
    app.add_option("--seed", seed, "override the config seed");
    app.add_option("--out-dir", out_dir, "output directory");

    std::string train_config, train_resume;
    CLI::App* train_cmd = app.add_subcommand("train", "train one agent pair from a JSON config");
    train_cmd->fallthrough();
    train_cmd->add_option("config", train_config, "experiment config JSON")->required();
    train_cmd->add_option("--resume", train_resume, "checkpoint to resume from");

    std::string sweep_grid;
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "grid of runs over alphas, rep size, seeds");
    sweep_cmd->fallthrough();
    sweep_cmd->add_option("grid", sweep_grid, "sweep grid JSON")->required();

    std::string eval_ckpt, eval_config;
    int eval_episodes = 20;
    CLI::App* eval_cmd = app.add_subcommand("eval", "greedy evaluation from a checkpoint");
    eval_cmd->fallthrough();
    eval_cmd->add_option("checkpoint", eval_ckpt, "run checkpoint file")->required();
    eval_cmd->add_option("--episodes", eval_episodes, "evaluation episodes")
        ->check(CLI::PositiveNumber);
    eval_cmd->add_option("--config", eval_config,
                         "config JSON (default: run.log next to the checkpoint)");

    CLI::App* analyze_cmd = app.add_subcommand("analyze", "post-hoc analysis of traces and logs");
    analyze_cmd->require_subcommand(1);
    analyze_cmd->fallthrough();

    std::vector<std::string> heatmap_paths;
    CLI::App* heatmap_cmd =
        analyze_cmd->add_subcommand("heatmap", "per-cell protocol counts from trace files");
    heatmap_cmd->fallthrough();
    heatmap_cmd->add_option("traces", heatmap_paths, "trace text files")->required();

    std::vector<std::string> curve_paths;
    std::string curve_metric = "M_t";
    int curve_window = 100;
    CLI::App* curves_cmd =
        analyze_cmd->add_subcommand("curves", "seed-averaged learning curve from run logs");
    curves_cmd->fallthrough();
    curves_cmd->add_option("logs", curve_paths, "run.log files, one per seed")->required();
    curves_cmd->add_option("--metric", curve_metric, "M_t, M_o or M_s")
        ->check(CLI::IsMember({"M_t", "M_o", "M_s"}));
    curves_cmd->add_option("--window", curve_window, "episode smoothing window")
        ->check(CLI::PositiveNumber);

    std::vector<std::string> compare_sets;
    int compare_window = 100;
    CLI::App* compare_cmd =
        analyze_cmd->add_subcommand("compare", "cross-regime metric comparison");
    compare_cmd->fallthrough();
    compare_cmd->add_option("sets", compare_sets, "labeled run sets: label=log[,log...]")
        ->required();
    compare_cmd->add_option("--window", compare_window, "episode smoothing window")
        ->check(CLI::PositiveNumber);

    std::string oracle_layout;
    CLI::App* oracle_cmd =
        app.add_subcommand("oracle", "scripted-pair metric table for one layout");
    oracle_cmd->fallthrough();
    oracle_cmd->add_option("layout", oracle_layout, "tmaze, dead_ends or four_rooms")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*train_cmd) return cmd_train(train_config, seed, out_dir, train_resume);
        if (*sweep_cmd) return cmd_sweep(sweep_grid, seed, out_dir);
        if (*eval_cmd) return cmd_eval(eval_ckpt, eval_episodes, eval_config, seed, out_dir);
        if (*heatmap_cmd) return cmd_heatmap(heatmap_paths, out_dir);
        if (*curves_cmd) return cmd_curves(curve_paths, curve_metric, curve_window, out_dir);
        if (*compare_cmd) return cmd_compare(compare_sets, compare_window, out_dir);
        if (*oracle_cmd) return cmd_oracle(oracle_layout);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
