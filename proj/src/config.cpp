#include "ssfnet/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

#include "ssfnet/error.hpp"

namespace ssfnet {

using nlohmann::ordered_json;

namespace {

// Binds a JSON key to a struct member for both directions.
template <class S>
struct Field {
    std::string key;
    std::function<ordered_json(const S&)> get;
    std::function<void(S&, const ordered_json&)> set;
};

template <class S, class T>
Field<S> field(std::string key, T S::*member) {
    return Field<S>{key, [member](const S& s) { return ordered_json(s.*member); },
                    [member, key](S& s, const ordered_json& j) {
                        try {
                            if constexpr (std::is_same_v<T, double>) {
                                if (!j.is_number()) throw ConfigError("");
                            } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
                                if (!j.is_number_integer()) throw ConfigError("");
                            } else if constexpr (std::is_same_v<T, bool>) {
                                if (!j.is_boolean()) throw ConfigError("");
                            } else if constexpr (std::is_same_v<T, std::string>) {
                                if (!j.is_string()) throw ConfigError("");
                            }
                            s.*member = j.get<T>();
                        } catch (const std::exception&) {
                            throw ConfigError("config key '" + key + "' has an invalid value: " + j.dump());
                        }
                    }};
}

template <class S>
ordered_json write_section(const S& s, const std::vector<Field<S>>& fields) {
    ordered_json j = ordered_json::object();
    for (const auto& f : fields) j[f.key] = f.get(s);
    return j;
}

template <class S>
void read_section(S& s, const ordered_json& j, const std::vector<Field<S>>& fields, const std::string& name) {
    if (!j.is_object()) throw ConfigError("config section '" + name + "' must be an object");
    for (const auto& [key, value] : j.items()) {
        auto it = std::find_if(fields.begin(), fields.end(), [&](const Field<S>& f) { return f.key == key; });
        if (it == fields.end()) throw ConfigError("unknown config key '" + name + "." + key + "'");
        it->set(s, value);
    }
}

std::vector<Field<ModelConfig>> model_fields() {
    return {field("bands", &ModelConfig::bands),
            field("channels", &ModelConfig::channels),
            field("blocks_per_stage", &ModelConfig::blocks_per_stage),
            field("spectral_filters", &ModelConfig::spectral_filters),
            field("safm_kernel", &ModelConfig::safm_kernel),
            field("head_width", &ModelConfig::head_width),
            field("embed_dim", &ModelConfig::embed_dim),
            field("loc_cap", &ModelConfig::loc_cap),
            field("rgb_frozen", &ModelConfig::rgb_frozen),
            field("rgb_checkpoint", &ModelConfig::rgb_checkpoint)};
}

std::vector<Field<SynthConfig>> synth_fields() {
    std::vector<Field<SynthConfig>> f = {
        field("frames", &SynthConfig::frames),
        field("height", &SynthConfig::height),
        field("width", &SynthConfig::width),
        field("bands", &SynthConfig::bands),
        field("object_w", &SynthConfig::object_w),
        field("object_h", &SynthConfig::object_h),
        field("object_signature", &SynthConfig::object_signature),
        field("background_signatures", &SynthConfig::background_signatures),
        field("velocity_x", &SynthConfig::velocity_x),
        field("velocity_y", &SynthConfig::velocity_y),
        field("noise", &SynthConfig::noise),
        field("texture", &SynthConfig::texture),
        field("distractor", &SynthConfig::distractor),
        field("distractor_radius", &SynthConfig::distractor_radius),
        field("distractor_angular_speed", &SynthConfig::distractor_angular_speed),
        field("attributes", &SynthConfig::attributes),
        field("name", &SynthConfig::name),
        field("seed", &SynthConfig::seed),
    };
    f.push_back(Field<SynthConfig>{"motion", [](const SynthConfig& s) { return ordered_json(to_string(s.motion)); },
                                   [](SynthConfig& s, const ordered_json& j) {
                                       if (!j.is_string()) throw ConfigError("config key 'motion' must be a string");
                                       s.motion = motion_from_string(j.get<std::string>());
                                   }});
    return f;
}

std::vector<Field<TrainConfig>> train_fields() {
    std::vector<Field<TrainConfig>> f = {
        field("lr", &TrainConfig::lr),
        field("momentum", &TrainConfig::momentum),
        field("weight_decay", &TrainConfig::weight_decay),
        field("batch", &TrainConfig::batch),
        field("steps", &TrainConfig::steps),
        field("warmup_steps", &TrainConfig::warmup_steps),
        field("cosine_schedule", &TrainConfig::cosine_schedule),
        field("grad_clip", &TrainConfig::grad_clip),
        field("max_frame_gap", &TrainConfig::max_frame_gap),
        field("shift_jitter", &TrainConfig::shift_jitter),
        field("scale_jitter", &TrainConfig::scale_jitter),
        field("log_every", &TrainConfig::log_every),
    };
    auto weight = [](std::string key, double LossWeights::*m) {
        return Field<TrainConfig>{key, [m](const TrainConfig& t) { return ordered_json(t.weights.*m); },
                                  [m, key](TrainConfig& t, const ordered_json& j) {
                                      if (!j.is_number()) throw ConfigError("config key '" + key + "' must be a number");
                                      t.weights.*m = j.get<double>();
                                  }};
    };
    f.push_back(weight("alpha", &LossWeights::alpha));
    f.push_back(weight("beta", &LossWeights::beta));
    f.push_back(weight("gamma", &LossWeights::gamma));
    return f;
}

std::vector<Field<TrackerConfig>> track_fields() {
    std::vector<Field<TrackerConfig>> f = {field("cosine_window", &TrackerConfig::cosine_window),
                                           field("window_influence", &TrackerConfig::window_influence),
                                           field("size_ema", &TrackerConfig::size_ema)};
    // "running" uses stored statistics, "batch" normalises each search crop by its own
    f.push_back(Field<TrackerConfig>{
        "norm",
        [](const TrackerConfig& t) {
            return ordered_json(t.norm == ops::NormMode::Running ? "running" : "batch");
        },
        [](TrackerConfig& t, const ordered_json& j) {
            const std::string v = j.is_string() ? j.get<std::string>() : "";
            if (v == "running") t.norm = ops::NormMode::Running;
            else if (v == "batch") t.norm = ops::NormMode::BatchNoUpdate;
            else throw ConfigError("config key 'norm' must be \"running\" or \"batch\"");
        }});
    return f;
}

std::vector<Field<CropConfig>> crop_fields() {
    return {field("template_size", &CropConfig::template_size), field("search_size", &CropConfig::search_size),
            field("context", &CropConfig::context)};
}

std::vector<Field<PathsConfig>> path_fields() {
    return {field("data_root", &PathsConfig::data_root), field("checkpoint", &PathsConfig::checkpoint),
            field("train_log", &PathsConfig::train_log), field("results", &PathsConfig::results),
            field("report", &PathsConfig::report)};
}

ordered_json to_tree(const AppConfig& cfg) {
    ordered_json j;
    j["seed"] = cfg.seed;
    j["model"] = write_section(cfg.model, model_fields());
    ordered_json data;
    data["sequences"] = cfg.synth_sequences;
    data["crop"] = write_section(cfg.track.crop, crop_fields());
    data["synth"] = write_section(cfg.synth, synth_fields());
    j["data"] = data;
    j["train"] = write_section(cfg.train, train_fields());
    j["track"] = write_section(cfg.track, track_fields());
    j["paths"] = write_section(cfg.paths, path_fields());
    return j;
}

AppConfig from_tree(const ordered_json& j) {
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    AppConfig cfg;
    for (const auto& [key, value] : j.items()) {
        if (key == "seed") {
            if (!value.is_number_unsigned() && !(value.is_number_integer() && value.get<long long>() >= 0)) {
                throw ConfigError("config key 'seed' must be a non-negative integer");
            }
            cfg.seed = value.get<std::uint64_t>();
        } else if (key == "model") {
            read_section(cfg.model, value, model_fields(), "model");
        } else if (key == "data") {
            if (!value.is_object()) throw ConfigError("config section 'data' must be an object");
            for (const auto& [dk, dv] : value.items()) {
                if (dk == "sequences") {
                    if (!dv.is_number_integer()) throw ConfigError("config key 'data.sequences' must be an integer");
                    cfg.synth_sequences = dv.get<int>();
                } else if (dk == "crop") {
                    read_section(cfg.track.crop, dv, crop_fields(), "data.crop");
                } else if (dk == "synth") {
                    read_section(cfg.synth, dv, synth_fields(), "data.synth");
                } else {
                    throw ConfigError("unknown config key 'data." + dk + "'");
                }
            }
        } else if (key == "train") {
            read_section(cfg.train, value, train_fields(), "train");
        } else if (key == "track") {
            read_section(cfg.track, value, track_fields(), "track");
        } else if (key == "paths") {
            read_section(cfg.paths, value, path_fields(), "paths");
        } else {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }
    return cfg;
}

}  // namespace

std::string to_json(const AppConfig& cfg) { return to_tree(cfg).dump(2); }

AppConfig config_from_json(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    AppConfig cfg = from_tree(j);
    validate(cfg);
    return cfg;
}

AppConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return config_from_json(ss.str());
}

void apply_override(AppConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like section.key=value: " + assignment);
    const std::string path = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    ordered_json value;
    try {
        value = ordered_json::parse(raw);
    } catch (const nlohmann::json::parse_error&) {
        value = raw;
    }
    ordered_json tree = to_tree(cfg);
    ordered_json* node = &tree;
    std::stringstream ss(path);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (!node->is_object() || !node->contains(parts[i])) throw ConfigError("unknown config key '" + path + "'");
        node = &(*node)[parts[i]];
    }
    *node = value;
    cfg = from_tree(tree);
    validate(cfg);
}

void save_model(const Model& model, const AppConfig& cfg, const std::filesystem::path& path) {
    Checkpoint ckpt;
    ckpt.metadata = to_json(cfg);
    export_params(model.params(), ckpt, true);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    ckpt.save(path);
}

Model load_model(const std::filesystem::path& path, AppConfig* cfg_out) {
    const Checkpoint ckpt = Checkpoint::load(path);
    const AppConfig cfg = config_from_json(ckpt.metadata);
    ModelConfig mc = cfg.model;
    mc.rgb_checkpoint.clear();  // RGB arrays come from this checkpoint
    Model model(mc, cfg.seed);
    import_params(model.params(), ckpt, false);
    if (cfg_out) *cfg_out = cfg;
    return model;
}

void validate(const AppConfig& c) {
    auto need = [](bool ok, const std::string& what) {
        if (!ok) throw ConfigError("invalid config: " + what);
    };
    const ModelConfig& m = c.model;
    need(m.bands >= 1, "model.bands must be >= 1");
    need(m.channels >= 1, "model.channels must be >= 1");
    need(m.blocks_per_stage >= 1, "model.blocks_per_stage must be >= 1");
    need(m.spectral_filters >= 1, "model.spectral_filters must be >= 1");
    need(m.safm_kernel >= 1 && m.safm_kernel % 2 == 1, "model.safm_kernel must be a positive odd number");
    need(m.head_width >= 1 && m.embed_dim >= 1, "model.head_width and model.embed_dim must be >= 1");
    need(m.loc_cap > 0.0, "model.loc_cap must be positive");
    need(c.synth.bands == m.bands, "data.synth.bands must equal model.bands");
    need(c.synth.frames >= 1 && c.synth.height >= 8 && c.synth.width >= 8, "data.synth frame count and size");
    need(c.synth.object_w >= 1 && c.synth.object_h >= 1, "data.synth object size must be positive");
    need(c.synth.noise >= 0.0, "data.synth.noise must be >= 0");
    need(c.synth_sequences >= 1, "data.sequences must be >= 1");
    const CropConfig& cr = c.track.crop;
    need(cr.template_size >= 4 && cr.search_size > cr.template_size, "data.crop sizes (search must exceed template)");
    need(cr.context >= 0.0, "data.crop.context must be >= 0");
    const TrainConfig& t = c.train;
    need(t.lr > 0.0, "train.lr must be positive");
    need(t.momentum >= 0.0 && t.momentum < 1.0, "train.momentum must be in [0, 1)");
    need(t.weight_decay >= 0.0, "train.weight_decay must be >= 0");
    need(t.batch >= 1, "train.batch must be >= 1");
    need(t.steps >= 0 && t.warmup_steps >= 0, "train.steps and train.warmup_steps must be >= 0");
    need(t.grad_clip >= 0.0, "train.grad_clip must be >= 0");
    need(t.max_frame_gap >= 0, "train.max_frame_gap must be >= 0");
    need(t.shift_jitter >= 0.0 && t.scale_jitter >= 0.0, "train jitter must be >= 0");
    need(t.weights.alpha >= 0.0 && t.weights.beta >= 0.0 && t.weights.gamma >= 0.0, "loss weights must be >= 0");
    need(t.log_every >= 1, "train.log_every must be >= 1");
    need(c.track.size_ema >= 0.0 && c.track.size_ema <= 1.0, "track.size_ema must be in [0, 1]");
    need(c.track.window_influence >= 0.0 && c.track.window_influence <= 1.0, "track.window_influence must be in [0, 1]");
}

}  // namespace ssfnet
