#include "refinerl/config.hpp"

#include <fstream>
#include <set>
#include <vector>

namespace rfl {

using ordered_json = nlohmann::ordered_json;

namespace {

// Pulls known keys out of an object and rejects whatever is left, so typos
// fail loudly with the offending key path.
class Section {
  public:
    Section(const ordered_json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError("config section " + path_ + " must be an object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const std::exception& e) {
            throw ConfigError("config key " + join(key) + ": " + e.what());
        }
    }

    const ordered_json* child(const char* key) {
        seen_.insert(key);
        if (!j_.contains(key)) return nullptr;
        return &j_.at(key);
    }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (!seen_.count(key)) throw ConfigError("unknown config key: " + join(key));
        }
    }

    std::string join(const std::string& key) const {
        return path_.empty() ? key : path_ + "." + key;
    }

  private:
    const ordered_json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

TrainMode parse_mode(const std::string& s) {
    if (s == "two_phase") return TrainMode::two_phase;
    if (s == "grpo_only") return TrainMode::grpo_only;
    throw ConfigError("unknown train.mode: " + s);
}

const char* mode_name(TrainMode m) {
    return m == TrainMode::two_phase ? "two_phase" : "grpo_only";
}

Variant parse_variant(const std::string& s) {
    if (s == "grpo") return Variant::grpo;
    if (s == "dr_grpo") return Variant::dr_grpo;
    if (s == "dapo") return Variant::dapo;
    throw ConfigError("unknown update.variant: " + s);
}

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::grpo: return "grpo";
        case Variant::dr_grpo: return "dr_grpo";
        case Variant::dapo: return "dapo";
    }
    return "grpo";
}

Aggregation parse_aggregation(const std::string& s) {
    if (s == "token_mean") return Aggregation::token_mean;
    if (s == "seq_mean_then_group_mean") return Aggregation::seq_mean_then_group_mean;
    throw ConfigError("unknown update.aggregation: " + s);
}

const char* aggregation_name(Aggregation a) {
    return a == Aggregation::token_mean ? "token_mean" : "seq_mean_then_group_mean";
}

DecodeConfig parse_decode(const ordered_json& j, const std::string& path,
                          const DecodeConfig& defaults) {
    Section s(j, path);
    DecodeConfig d = defaults;
    s.get("temperature", d.temperature);
    s.get("top_p", d.top_p);
    s.get("top_k", d.top_k);
    if (d.top_k < 0) d.top_k = 0;  // -1 and 0 both mean unlimited
    s.get("max_len", d.max_len);
    s.finish();
    return d;
}

ordered_json decode_json(const DecodeConfig& d) {
    return ordered_json{{"temperature", d.temperature},
                        {"top_p", d.top_p},
                        {"top_k", d.top_k},
                        {"max_len", d.max_len}};
}

}  // namespace

RunConfig parse_run_config(const ordered_json& j) {
    RunConfig cfg;
    // Reference-task defaults; decode defaults follow the usual split of
    // temperature 1.0 for training and 0.7 / top-p 0.8 / top-k 20 for
    // evaluation-time base sampling.
    cfg.train.decode_train = DecodeConfig{1.0, 1.0, 0, 8};
    cfg.eval.decode = DecodeConfig{0.7, 0.8, 20, 8};
    cfg.train.context_budget = 22;

    Section root(j, "");
    if (const auto* t = root.child("task")) {
        Section s(*t, "task");
        s.get("modulus", cfg.task.modulus);
        s.get("chain_length", cfg.task.chain_length);
        s.get("operand_lo", cfg.task.operand_lo);
        s.get("operand_hi", cfg.task.operand_hi);
        s.finish();
    }
    root.get("problems", cfg.problems_file);
    if (const auto* p = root.child("policy")) {
        Section s(*p, "policy");
        s.get("d_emb", cfg.policy.d_emb);
        s.get("d_hid", cfg.policy.d_hid);
        s.get("window", cfg.policy.window);
        s.get("init_scale", cfg.init_scale);
        s.finish();
    }
    if (const auto* t = root.child("train")) {
        Section s(*t, "train");
        std::string mode = mode_name(cfg.train.mode);
        s.get("mode", mode);
        cfg.train.mode = parse_mode(mode);
        s.get("iterations", cfg.train.total_iterations);
        s.get("batch_size", cfg.train.batch_size);
        s.get("checkpoint_every", cfg.train.checkpoint_every);
        s.get("context_budget", cfg.train.context_budget);
        std::string selection = "random";
        s.get("selection", selection);
        if (selection != "random") throw ConfigError("unknown train.selection: " + selection);
        cfg.train.selection_mode = SelectionMode::random;
        if (const auto* u = s.child("update")) {
            Section us(*u, "train.update");
            std::string variant = variant_name(cfg.train.update.variant);
            us.get("variant", variant);
            cfg.train.update.variant = parse_variant(variant);
            us.get("group_size", cfg.train.update.group_size);
            us.get("learning_rate", cfg.train.update.learning_rate);
            us.get("eps_low", cfg.train.update.eps_low);
            us.get("eps_high", cfg.train.update.eps_high);
            us.get("kl_beta", cfg.train.update.kl_beta);
            us.get("minibatch_size", cfg.train.update.minibatch_size);
            std::string agg = aggregation_name(cfg.train.update.aggregation);
            us.get("aggregation", agg);
            cfg.train.update.aggregation = parse_aggregation(agg);
            us.get("std_epsilon", cfg.train.update.std_epsilon);
            us.get("dynamic_filter", cfg.train.update.dynamic_filter);
            us.finish();
        }
        if (const auto* d = s.child("decode"))
            cfg.train.decode_train = parse_decode(*d, "train.decode", cfg.train.decode_train);
        s.finish();
    }
    if (const auto* e = root.child("eval")) {
        Section s(*e, "eval");
        s.get("n", cfg.eval.n);
        s.get("k_list", cfg.eval.k_list);
        s.get("eval_every", cfg.eval.eval_every);
        s.get("problem_count", cfg.eval.problem_count);
        if (const auto* d = s.child("decode"))
            cfg.eval.decode = parse_decode(*d, "eval.decode", cfg.eval.decode);
        s.finish();
    }
    root.get("output_dir", cfg.output_dir);
    root.get("master_seed", cfg.train.master_seed);
    root.finish();

    try {
        cfg.task.validate();
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config " + path.string());
    ordered_json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    return parse_run_config(j);
}

ordered_json serialize_run_config(const RunConfig& cfg) {
    return ordered_json{
        {"task",
         {{"modulus", cfg.task.modulus},
          {"chain_length", cfg.task.chain_length},
          {"operand_lo", cfg.task.operand_lo},
          {"operand_hi", cfg.task.operand_hi}}},
        {"problems", cfg.problems_file},
        {"policy",
         {{"d_emb", cfg.policy.d_emb},
          {"d_hid", cfg.policy.d_hid},
          {"window", cfg.policy.window},
          {"init_scale", cfg.init_scale}}},
        {"train",
         {{"mode", mode_name(cfg.train.mode)},
          {"iterations", cfg.train.total_iterations},
          {"batch_size", cfg.train.batch_size},
          {"checkpoint_every", cfg.train.checkpoint_every},
          {"context_budget", cfg.train.context_budget},
          {"selection", "random"},
          {"update",
           {{"variant", variant_name(cfg.train.update.variant)},
            {"group_size", cfg.train.update.group_size},
            {"learning_rate", cfg.train.update.learning_rate},
            {"eps_low", cfg.train.update.eps_low},
            {"eps_high", cfg.train.update.eps_high},
            {"kl_beta", cfg.train.update.kl_beta},
            {"minibatch_size", cfg.train.update.minibatch_size},
            {"aggregation", aggregation_name(cfg.train.update.aggregation)},
            {"std_epsilon", cfg.train.update.std_epsilon},
            {"dynamic_filter", cfg.train.update.dynamic_filter}}},
          {"decode", decode_json(cfg.train.decode_train)}}},
        {"eval",
         {{"n", cfg.eval.n},
          {"k_list", cfg.eval.k_list},
          {"eval_every", cfg.eval.eval_every},
          {"problem_count", cfg.eval.problem_count},
          {"decode", decode_json(cfg.eval.decode)}}},
        {"output_dir", cfg.output_dir},
        {"master_seed", cfg.train.master_seed}};
}

void save_run_config(const RunConfig& cfg, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write config " + path.string());
    out << serialize_run_config(cfg).dump(2) << '\n';
}

void apply_override(ordered_json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("override must look like key.path=value: " + assignment);
    const std::string path = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);

    ordered_json* node = &j;
    size_t begin = 0;
    while (true) {
        const size_t dot = path.find('.', begin);
        const std::string key = path.substr(begin, dot - begin);
        if (key.empty()) throw ConfigError("bad override path: " + path);
        if (dot == std::string::npos) {
            ordered_json parsed = ordered_json::parse(value, nullptr, false);
            (*node)[key] = parsed.is_discarded() ? ordered_json(value) : parsed;
            return;
        }
        node = &(*node)[key];
        begin = dot + 1;
    }
}

}  // namespace rfl
