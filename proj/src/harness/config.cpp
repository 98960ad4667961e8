#include "uasrl/harness/config.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace uasrl::harness {

AlgoVariant parse_algorithm(const std::string& name) {
    AlgoVariant v;
    v.name = name;
    std::string base = name;
    std::string suffix;
    if (auto pos = name.find('+'); pos != std::string::npos) {
        base = name.substr(0, pos);
        suffix = name.substr(pos + 1);
    }
    if (base == "u-mappo" || base == "u-qmix") {
        v.family = base == "u-mappo" ? AlgoFamily::Mappo : AlgoFamily::Qmix;
        v.flags = {.use_uas = true, .use_cgi = true};
        if (!suffix.empty()) throw ConfigError("algorithm '" + name + "': u-* takes no suffix");
        return v;
    }
    if (base == "mappo") {
        v.family = AlgoFamily::Mappo;
    } else if (base == "qmix") {
        v.family = AlgoFamily::Qmix;
    } else {
        throw ConfigError("unknown algorithm '" + name +
                          "' (mappo|qmix[+uas|+cgi]|u-mappo|u-qmix)");
    }
    if (suffix.empty()) {
        v.flags = {.use_uas = false, .use_cgi = false};
    } else if (suffix == "uas") {
        v.flags = {.use_uas = true, .use_cgi = false};
    } else if (suffix == "cgi") {
        v.flags = {.use_uas = false, .use_cgi = true};
    } else {
        throw ConfigError("algorithm '" + name + "': unknown suffix '+" + suffix + "'");
    }
    return v;
}

namespace {

// Minimal TOML-style subset: [sections], key = value with strings, numbers,
// booleans and flat [a, b, c] lists. '#' starts a comment.
struct RawValue {
    std::string text;
    bool is_list = false;
    std::vector<std::string> list;
};

using Section = std::map<std::string, RawValue>;

std::string strip(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& line) {
    bool in_quote = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_quote = !in_quote;
        if (line[i] == '#' && !in_quote) return line.substr(0, i);
    }
    return line;
}

std::string unquote(const std::string& s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
    return s;
}

std::map<std::string, Section> parse_sections(const std::string& text) {
    std::map<std::string, Section> out;
    std::string current = "";
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        line = strip(strip_comment(line));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError("config line " + std::to_string(lineno) + ": bad section header");
            }
            current = strip(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = strip(line.substr(0, eq));
        std::string value = strip(line.substr(eq + 1));
        RawValue rv;
        if (!value.empty() && value.front() == '[') {
            if (value.back() != ']') {
                throw ConfigError("config line " + std::to_string(lineno) + ": unterminated list");
            }
            rv.is_list = true;
            std::string inner = value.substr(1, value.size() - 2);
            std::string item;
            std::istringstream items(inner);
            while (std::getline(items, item, ',')) {
                item = strip(item);
                if (!item.empty()) rv.list.push_back(unquote(item));
            }
        } else {
            rv.text = unquote(value);
        }
        out[current][key] = std::move(rv);
    }
    return out;
}

struct Reader {
    const std::map<std::string, Section>& sections;
    std::vector<std::string>* errors;

    const RawValue* find(const std::string& sec, const std::string& key) const {
        auto s = sections.find(sec);
        if (s == sections.end()) return nullptr;
        auto k = s->second.find(key);
        return k == s->second.end() ? nullptr : &k->second;
    }

    template <typename T, typename F>
    void get(const std::string& sec, const std::string& key, T& out, F parse) const {
        const RawValue* rv = find(sec, key);
        if (!rv) return;
        try {
            out = parse(rv->text);
        } catch (const std::exception&) {
            errors->push_back("[" + sec + "] " + key + ": cannot parse '" + rv->text + "'");
        }
    }

    void get_u64(const std::string& sec, const std::string& key, std::uint64_t& out) const {
        get(sec, key, out, [](const std::string& s) { return std::stoull(s); });
    }
    void get_size(const std::string& sec, const std::string& key, std::size_t& out) const {
        get(sec, key, out, [](const std::string& s) { return static_cast<std::size_t>(std::stoull(s)); });
    }
    void get_int(const std::string& sec, const std::string& key, int& out) const {
        get(sec, key, out, [](const std::string& s) { return std::stoi(s); });
    }
    void get_double(const std::string& sec, const std::string& key, double& out) const {
        get(sec, key, out, [](const std::string& s) { return std::stod(s); });
    }
    void get_string(const std::string& sec, const std::string& key, std::string& out) const {
        get(sec, key, out, [](const std::string& s) { return s; });
    }
    void get_bool(const std::string& sec, const std::string& key, bool& out) const {
        get(sec, key, out, [](const std::string& s) {
            if (s == "true") return true;
            if (s == "false") return false;
            throw ConfigError("expected true/false");
        });
    }
};

} // namespace

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << is.rdbuf();
    return from_string(buf.str());
}

ExperimentConfig ExperimentConfig::from_string(const std::string& text) {
    auto sections = parse_sections(text);
    std::vector<std::string> errors;
    Reader r{sections, &errors};

    ExperimentConfig cfg;
    r.get_string("env", "name", cfg.env_name);
    r.get_size("env", "n", cfg.prop_agents_per_group);
    r.get_size("env", "a0", cfg.prop_a0);
    r.get_size("env", "a1", cfg.prop_a1);
    r.get_string("env", "obs_mode", cfg.obs_mode);
    r.get_size("env", "width", cfg.skirmish.width);
    r.get_size("env", "height", cfg.skirmish.height);
    r.get_size("env", "attackers", cfg.skirmish.n_attackers);
    r.get_size("env", "healers", cfg.skirmish.n_healers);
    r.get_size("env", "enemies", cfg.skirmish.n_enemies);
    r.get_int("env", "attacker_hp", cfg.skirmish.attacker_hp);
    r.get_int("env", "attacker_damage", cfg.skirmish.attacker_damage);
    r.get_size("env", "attack_range", cfg.skirmish.attack_range);
    r.get_int("env", "healer_hp", cfg.skirmish.healer_hp);
    r.get_int("env", "heal_amount", cfg.skirmish.heal_amount);
    r.get_size("env", "heal_range", cfg.skirmish.heal_range);
    r.get_size("env", "sight_range", cfg.skirmish.sight_range);
    r.get_size("env", "episode_limit", cfg.skirmish.episode_limit);

    if (const RawValue* rv = r.find("algo", "matrix")) {
        if (!rv->is_list) {
            errors.push_back("[algo] matrix must be a list");
        } else {
            cfg.algorithms = rv->list;
        }
    }
    std::string single;
    r.get_string("algo", "name", single);
    if (!single.empty()) cfg.algorithms.insert(cfg.algorithms.begin(), single);

    r.get_double("algo", "lr_mappo", cfg.umappo.lr);
    r.get_double("algo", "lr_qmix", cfg.uqmix.lr);
    r.get_double("algo", "eps_p", cfg.umappo.eps_p);
    r.get_double("algo", "eps_v", cfg.umappo.eps_v);
    r.get_double("algo", "lambda_e", cfg.umappo.lambda_e);
    r.get_double("algo", "lambda_v", cfg.umappo.lambda_v);
    r.get_double("algo", "lambda_i_mappo", cfg.umappo.lambda_i);
    r.get_double("algo", "lambda_i_qmix", cfg.uqmix.lambda_i);
    double gamma = -1.0;
    r.get_double("algo", "gamma", gamma);
    if (gamma >= 0.0) {
        cfg.umappo.gamma = gamma;
        cfg.uqmix.gamma = gamma;
    }
    r.get_double("algo", "gae_lambda", cfg.umappo.gae_lambda);
    r.get_size("algo", "ppo_updates", cfg.umappo.ppo_updates);
    r.get_size("algo", "buffer_size", cfg.uqmix.buffer_size);
    r.get_size("algo", "batch_size", cfg.uqmix.batch_size);
    r.get_double("algo", "eps_start", cfg.uqmix.eps_start);
    r.get_double("algo", "eps_end", cfg.uqmix.eps_end);
    r.get_u64("algo", "eps_anneal_steps", cfg.uqmix.eps_anneal_steps);
    r.get_double("algo", "lr_decay_factor", cfg.uqmix.lr_decay_factor);
    r.get_u64("algo", "lr_decay_episodes", cfg.uqmix.lr_decay_episodes);
    r.get_u64("algo", "target_sync_interval", cfg.uqmix.target_sync_interval);
    double grad_clip = -1.0;
    r.get_double("algo", "grad_clip", grad_clip);
    if (grad_clip >= 0.0) {
        cfg.umappo.grad_clip = grad_clip;
        cfg.uqmix.grad_clip = grad_clip;
    }

    r.get_u64("train", "total_steps", cfg.total_steps);
    if (const RawValue* rv = r.find("train", "seeds")) {
        if (!rv->is_list) {
            errors.push_back("[train] seeds must be a list");
        } else {
            cfg.seeds.clear();
            for (const auto& s : rv->list) {
                try {
                    cfg.seeds.push_back(std::stoull(s));
                } catch (const std::exception&) {
                    errors.push_back("[train] seeds: cannot parse '" + s + "'");
                }
            }
        }
    }
    r.get_u64("train", "eval_interval", cfg.eval_interval);
    r.get_size("train", "eval_episodes", cfg.eval_episodes);
    r.get_string("train", "out", cfg.out_dir);
    r.get_u64("train", "checkpoint_interval", cfg.checkpoint_interval);
    r.get_bool("train", "export_replays", cfg.export_replays);

    if (!errors.empty()) {
        std::string msg = "config validation failed:";
        for (const auto& e : errors) msg += "\n  - " + e;
        throw ConfigError(msg);
    }
    cfg.umappo.total_steps = cfg.total_steps;
    cfg.uqmix.total_steps = cfg.total_steps;
    return cfg;
}

void ExperimentConfig::validate() const {
    std::vector<std::string> errors;
    if (env_name != "proposition" && env_name != "skirmish") {
        errors.push_back("[env] name must be 'proposition' or 'skirmish'");
    }
    if (algorithms.empty()) errors.push_back("[algo] name or matrix required");
    for (const auto& a : algorithms) {
        try {
            parse_algorithm(a);
        } catch (const ConfigError& e) {
            errors.push_back(e.what());
        }
    }
    if (seeds.empty()) errors.push_back("[train] seeds must be non-empty");
    if (total_steps == 0) errors.push_back("[train] total_steps must be >= 1");
    if (eval_episodes == 0) errors.push_back("[train] eval_episodes must be >= 1");
    if (out_dir.empty()) errors.push_back("[train] out must be set");
    try {
        if (env_name == "proposition") {
            envs::PropositionConfig pc{prop_agents_per_group, prop_a0, prop_a1,
                                       envs::obs_mode_from_string(obs_mode), act::Layout::Unified};
            pc.validate();
        } else if (env_name == "skirmish") {
            skirmish.validate();
        }
    } catch (const std::exception& e) {
        errors.push_back(e.what());
    }
    try {
        umappo.validate();
        uqmix.validate();
    } catch (const std::exception& e) {
        errors.push_back(e.what());
    }
    if (!errors.empty()) {
        std::string msg = "config validation failed:";
        for (const auto& e : errors) msg += "\n  - " + e;
        throw ConfigError(msg);
    }
}

nlohmann::json ExperimentConfig::canonical() const {
    nlohmann::json j;
    j["env"]["name"] = env_name;
    if (env_name == "proposition") {
        j["env"]["n"] = prop_agents_per_group;
        j["env"]["a0"] = prop_a0;
        j["env"]["a1"] = prop_a1;
        j["env"]["obs_mode"] = obs_mode;
    } else {
        j["env"]["width"] = skirmish.width;
        j["env"]["height"] = skirmish.height;
        j["env"]["attackers"] = skirmish.n_attackers;
        j["env"]["healers"] = skirmish.n_healers;
        j["env"]["enemies"] = skirmish.n_enemies;
        j["env"]["attacker_hp"] = skirmish.attacker_hp;
        j["env"]["attacker_damage"] = skirmish.attacker_damage;
        j["env"]["attack_range"] = skirmish.attack_range;
        j["env"]["healer_hp"] = skirmish.healer_hp;
        j["env"]["heal_amount"] = skirmish.heal_amount;
        j["env"]["heal_range"] = skirmish.heal_range;
        j["env"]["sight_range"] = skirmish.sight_range;
        j["env"]["episode_limit"] = skirmish.episode_limit;
    }
    j["algo"]["algorithms"] = algorithms;
    j["algo"]["umappo"] = {
        {"lr", umappo.lr},           {"eps_p", umappo.eps_p},
        {"eps_v", umappo.eps_v},     {"lambda_e", umappo.lambda_e},
        {"lambda_v", umappo.lambda_v}, {"lambda_i", umappo.lambda_i},
        {"gamma", umappo.gamma},     {"gae_lambda", umappo.gae_lambda},
        {"ppo_updates", umappo.ppo_updates}, {"grad_clip", umappo.grad_clip},
    };
    j["algo"]["uqmix"] = {
        {"lr", uqmix.lr},
        {"lambda_i", uqmix.lambda_i},
        {"gamma", uqmix.gamma},
        {"buffer_size", uqmix.buffer_size},
        {"batch_size", uqmix.batch_size},
        {"eps_start", uqmix.eps_start},
        {"eps_end", uqmix.eps_end},
        {"eps_anneal_steps", uqmix.eps_anneal_steps},
        {"lr_decay_factor", uqmix.lr_decay_factor},
        {"lr_decay_episodes", uqmix.lr_decay_episodes},
        {"target_sync_interval", uqmix.target_sync_interval},
        {"grad_clip", uqmix.grad_clip},
    };
    j["train"]["total_steps"] = total_steps;
    j["train"]["seeds"] = seeds;
    j["train"]["eval_interval"] = eval_interval;
    j["train"]["eval_episodes"] = eval_episodes;
    return j;
}

std::string ExperimentConfig::hash() const {
    const std::string dump = canonical().dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : dump) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

algos::EnvFactory ExperimentConfig::env_factory(const algos::AblationFlags& flags) const {
    const act::Layout layout = flags.use_uas ? act::Layout::Unified : act::Layout::Overlapped;
    if (env_name == "proposition") {
        envs::PropositionConfig pc{prop_agents_per_group, prop_a0, prop_a1,
                                   envs::obs_mode_from_string(obs_mode), layout};
        pc.validate();
        return [pc]() { return std::make_unique<envs::PropositionGame>(pc); };
    }
    envs::SkirmishConfig sc = skirmish;
    sc.layout = layout;
    // both layouts carry the agent-id one-hot (common parity convention)
    sc.append_agent_id = true;
    sc.validate();
    return [sc]() { return std::make_unique<envs::Skirmish>(sc); };
}

} // namespace uasrl::harness
