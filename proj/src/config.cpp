#include "imoc/config.hpp"

#include "imoc/rng.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace imoc::cli {

using nlohmann::json;

namespace {

void apply_overrides(json& j, const std::vector<std::string>& overrides) {
    for (const auto& kv : overrides) {
        auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("override must be key=value: " + kv);
        std::string key = kv.substr(0, eq);
        std::string value = kv.substr(eq + 1);
        std::string pointer = "/" + key;
        for (auto& c : pointer)
            if (c == '.') c = '/';
        json parsed;
        try {
            parsed = json::parse(value);
        } catch (const json::exception&) {
            parsed = value;  // bare strings
        }
        j[json::json_pointer(pointer)] = parsed;
    }
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void RunConfig::validate() const {
    std::vector<std::string> errors;
    if (total_env_steps <= 0) errors.push_back("total_env_steps must be > 0");
    if (eval_interval <= 0) errors.push_back("eval_interval must be > 0");
    if (eval_episodes <= 0) errors.push_back("eval_episodes must be > 0");
    if (out_dir.empty()) errors.push_back("out_dir must be set");
    try {
        agent.validate();
    } catch (const std::exception& e) {
        errors.push_back(e.what());
    }
    if (env.kind != EnvKind::four_rooms && env.size < 2) errors.push_back("env.size must be >= 2");
    if (!errors.empty()) {
        std::string joined = "invalid config:";
        for (const auto& e : errors) joined += "\n  - " + e;
        throw std::invalid_argument(joined);
    }
}

RunConfig parse_run_config(const std::string& json_text,
                           const std::vector<std::string>& overrides) {
    json j = json::parse(json_text);
    apply_overrides(j, overrides);

    RunConfig cfg;
    read_field(j, "total_env_steps", cfg.total_env_steps);
    read_field(j, "eval_interval", cfg.eval_interval);
    read_field(j, "eval_episodes", cfg.eval_episodes);
    read_field(j, "seed", cfg.seed);
    read_field(j, "out_dir", cfg.out_dir);
    read_field(j, "oracle_attach", cfg.oracle_attach);

    if (j.contains("algorithm"))
        cfg.agent.algorithm = agent::algorithm_from_string(j.at("algorithm").get<std::string>());

    if (j.contains("agent")) {
        const json& a = j.at("agent");
        read_field(a, "gamma", cfg.agent.gamma);
        read_field(a, "rollout_len", cfg.agent.rollout_len);
        read_field(a, "n_actors", cfg.agent.n_actors);
        read_field(a, "c_mu", cfg.agent.c_mu);
        read_field(a, "c_h_mu", cfg.agent.c_h_mu);
        read_field(a, "c_h", cfg.agent.c_h);
        read_field(a, "c_h_beta", cfg.agent.c_h_beta);
        read_field(a, "max_grad_norm", cfg.agent.max_grad_norm);
        read_field(a, "eps_opt", cfg.agent.eps_opt);
        read_field(a, "eps_greedy", cfg.agent.eps_greedy);
        read_field(a, "buffer_capacity", cfg.agent.buffer_capacity);
        read_field(a, "classifier_batch", cfg.agent.classifier_batch);
        read_field(a, "n_options", cfg.agent.n_options);
        read_field(a, "hidden", cfg.agent.hidden);
        read_field(a, "value_loss_coef", cfg.agent.value_loss_coef);
        read_field(a, "eps_greedy_selection", cfg.agent.eps_greedy_selection);
        read_field(a, "disable_mi_reg", cfg.agent.disable_mi_reg);
        read_field(a, "value_mixture_mu_hat", cfg.agent.value_mixture_mu_hat);
        read_field(a, "termination_beta_factor", cfg.agent.termination_beta_factor);
        read_field(a, "split_encoder", cfg.agent.split_encoder);
        if (a.contains("advantage_mode"))
            cfg.agent.advantage_mode =
                agent::advantage_mode_from_string(a.at("advantage_mode").get<std::string>());
        if (a.contains("optimizer")) {
            std::string kind = a.at("optimizer").get<std::string>();
            if (kind == "rmsprop")
                cfg.agent.optimizer.kind = nn::OptimizerKind::rmsprop;
            else if (kind == "adam")
                cfg.agent.optimizer.kind = nn::OptimizerKind::adam;
            else
                throw std::invalid_argument("unknown optimizer: " + kind);
        }
        read_field(a, "learning_rate", cfg.agent.optimizer.learning_rate);
    }

    if (j.contains("environment")) {
        const json& e = j.at("environment");
        std::string type = e.value("type", std::string("four_rooms"));
        if (type == "four_rooms") {
            cfg.env.kind = EnvKind::four_rooms;
            cfg.env.four_rooms = mdp::default_four_rooms();
            if (e.contains("layout")) {
                cfg.env.four_rooms.layout = e.at("layout").get<std::vector<std::string>>();
                cfg.env.four_rooms.goals.clear();  // take goals from the layout digits
                cfg.env.four_rooms.start_row = cfg.env.four_rooms.start_col = -1;
            }
            if (e.contains("goal_rewards"))
                cfg.env.four_rooms.goal_rewards = e.at("goal_rewards").get<std::vector<double>>();
            if (e.contains("goals")) {
                cfg.env.four_rooms.goals.clear();
                for (const auto& g : e.at("goals"))
                    cfg.env.four_rooms.goals.push_back(
                        {g.at(0).get<int>(), g.at(1).get<int>(), g.at(2).get<double>()});
            }
            if (e.contains("start")) {
                cfg.env.four_rooms.start_row = e.at("start").at(0).get<int>();
                cfg.env.four_rooms.start_col = e.at("start").at(1).get<int>();
            }
            read_field(e, "action_noise", cfg.env.four_rooms.action_noise);
            read_field(e, "step_penalty", cfg.env.four_rooms.step_penalty);
            read_field(e, "max_episode_len", cfg.env.four_rooms.max_episode_len);
            read_field(e, "goal_relocation_period", cfg.env.goal_relocation_period);
        } else if (type == "chain" || type == "random") {
            cfg.env.kind = type == "chain" ? EnvKind::chain : EnvKind::random;
            read_field(e, "size", cfg.env.size);
        } else {
            throw std::invalid_argument("unknown environment type: " + type);
        }
    } else {
        cfg.env.four_rooms = mdp::default_four_rooms();
    }

    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str(), overrides);
}

std::string dump_run_config(const RunConfig& cfg) {
    json a{
        {"gamma", cfg.agent.gamma},
        {"rollout_len", cfg.agent.rollout_len},
        {"n_actors", cfg.agent.n_actors},
        {"c_mu", cfg.agent.c_mu},
        {"c_h_mu", cfg.agent.c_h_mu},
        {"c_h", cfg.agent.c_h},
        {"c_h_beta", cfg.agent.c_h_beta},
        {"max_grad_norm", cfg.agent.max_grad_norm},
        {"eps_opt", cfg.agent.eps_opt},
        {"eps_greedy", cfg.agent.eps_greedy},
        {"buffer_capacity", cfg.agent.buffer_capacity},
        {"classifier_batch", cfg.agent.classifier_batch},
        {"n_options", cfg.agent.n_options},
        {"hidden", cfg.agent.hidden},
        {"value_loss_coef", cfg.agent.value_loss_coef},
        {"eps_greedy_selection", cfg.agent.eps_greedy_selection},
        {"disable_mi_reg", cfg.agent.disable_mi_reg},
        {"value_mixture_mu_hat", cfg.agent.value_mixture_mu_hat},
        {"termination_beta_factor", cfg.agent.termination_beta_factor},
        {"split_encoder", cfg.agent.split_encoder},
        {"advantage_mode", agent::to_string(cfg.agent.advantage_mode)},
        {"optimizer", cfg.agent.optimizer.kind == nn::OptimizerKind::rmsprop ? "rmsprop" : "adam"},
        {"learning_rate", cfg.agent.optimizer.learning_rate},
    };

    json e;
    if (cfg.env.kind == EnvKind::four_rooms) {
        e["type"] = "four_rooms";
        e["layout"] = cfg.env.four_rooms.layout;
        json goals = json::array();
        for (const auto& g : cfg.env.four_rooms.goals)
            goals.push_back(json::array({g.row, g.col, g.reward}));
        e["goals"] = goals;
        if (cfg.env.four_rooms.start_row >= 0)
            e["start"] = json::array({cfg.env.four_rooms.start_row, cfg.env.four_rooms.start_col});
        e["action_noise"] = cfg.env.four_rooms.action_noise;
        e["step_penalty"] = cfg.env.four_rooms.step_penalty;
        e["max_episode_len"] = cfg.env.four_rooms.max_episode_len;
        e["goal_relocation_period"] = cfg.env.goal_relocation_period;
    } else {
        e["type"] = cfg.env.kind == EnvKind::chain ? "chain" : "random";
        e["size"] = cfg.env.size;
    }

    json j{
        {"algorithm", agent::to_string(cfg.agent.algorithm)},
        {"seed", cfg.seed},
        {"total_env_steps", cfg.total_env_steps},
        {"eval_interval", cfg.eval_interval},
        {"eval_episodes", cfg.eval_episodes},
        {"out_dir", cfg.out_dir},
        {"oracle_attach", cfg.oracle_attach},
        {"agent", a},
        {"environment", e},
    };
    return j.dump(2) + "\n";
}

BuiltEnv build_environment(const RunConfig& cfg) {
    BuiltEnv out;
    if (cfg.env.kind == EnvKind::four_rooms) {
        out.grid.emplace(cfg.env.four_rooms);
        out.mdp = out.grid->mdp();
        if (cfg.env.goal_relocation_period > 0)
            out.relocation = mdp::rotating_goal_schedule(
                out.grid->config(), cfg.env.goal_relocation_period, cfg.total_env_steps);
        else
            out.relocation = cfg.env.four_rooms.relocation;
    } else {
        std::mt19937_64 rng = make_rng(cfg.seed, 7);
        out.mdp = mdp::build_test_mdp(
            cfg.env.kind == EnvKind::chain ? mdp::TestMdpKind::chain : mdp::TestMdpKind::random,
            cfg.env.size, rng);
        out.mdp.max_episode_len = 100;
    }
    return out;
}

}  // namespace imoc::cli
