#include "interpconv/config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "interpconv/errors.hpp"
#include "interpconv/checkpoint.hpp"

namespace interpconv {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string strip_comment(std::string_view line) {
    bool quoted = false;
    for (std::size_t k = 0; k < line.size(); ++k) {
        if (line[k] == '"') quoted = !quoted;
        if (line[k] == '#' && !quoted) return std::string(line.substr(0, k));
    }
    return std::string(line);
}

std::string unquote(std::string_view v, std::string_view where) {
    if (!v.empty() && v.front() == '"') {
        if (v.size() < 2 || v.back() != '"') throw ConfigError("unterminated string in " + std::string(where));
        return std::string(v.substr(1, v.size() - 2));
    }
    return std::string(v);
}

bool valid_key(std::string_view k) {
    if (k.empty()) return false;
    for (char c : k) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.')) return false;
    }
    return true;
}

}  // namespace

KeyValues parse_key_values(std::string_view text) {
    KeyValues kv;
    std::string section;
    std::istringstream in{std::string(text)};
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = strip_comment(raw);
        const auto t = trim(line);
        if (t.empty()) continue;
        const std::string where = "line " + std::to_string(line_no);
        if (t.front() == '[') {
            if (t.back() != ']') throw ConfigError("malformed section header at " + where);
            section = std::string(trim(t.substr(1, t.size() - 2)));
            if (!valid_key(section)) throw ConfigError("bad section name at " + where);
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string_view::npos) throw ConfigError("expected key = value at " + where);
        const auto key = trim(t.substr(0, eq));
        if (!valid_key(key)) throw ConfigError("bad key at " + where);
        const std::string full = section.empty() ? std::string(key) : section + "." + std::string(key);
        if (kv.count(full)) throw ConfigError("duplicate key " + full + " at " + where);
        kv[full] = unquote(trim(t.substr(eq + 1)), where);
    }
    return kv;
}

void apply_override(KeyValues& kv, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) throw ConfigError("override '" + std::string(assignment) + "' lacks '='");
    const auto key = trim(assignment.substr(0, eq));
    if (!valid_key(key)) throw ConfigError("bad override key '" + std::string(key) + "'");
    kv[std::string(key)] = unquote(trim(assignment.substr(eq + 1)), "override " + std::string(key));
}

namespace {

class Resolver {
public:
    explicit Resolver(const KeyValues& kv) : kv_(kv) {}

    bool has(const std::string& key) { return used(key); }

    std::string str(const std::string& key, std::string fallback) {
        return used(key) ? kv_.at(key) : fallback;
    }

    template <typename T>
    T number(const std::string& key, T fallback) {
        if (!used(key)) return fallback;
        const std::string& v = kv_.at(key);
        T out{};
        const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc{} || ptr != v.data() + v.size()) {
            throw ConfigError("key " + key + ": '" + v + "' is not a valid number");
        }
        return out;
    }

    bool boolean(const std::string& key, bool fallback) {
        if (!used(key)) return fallback;
        const std::string& v = kv_.at(key);
        if (v == "true") return true;
        if (v == "false") return false;
        throw ConfigError("key " + key + ": expected true or false, got '" + v + "'");
    }

    void reject_unknown() const {
        for (const auto& [k, v] : kv_) {
            if (!seen_.count(k)) throw ConfigError("unknown config key '" + k + "'");
        }
    }

private:
    bool used(const std::string& key) {
        seen_.insert(key);
        return kv_.count(key) > 0;
    }

    const KeyValues& kv_;
    std::set<std::string> seen_;
};

std::string to_string(MaskMode m) {
    switch (m) {
        case MaskMode::automatic: return "auto";
        case MaskMode::on: return "on";
        case MaskMode::off: return "off";
    }
    return "?";
}

}  // namespace

RunConfig resolve_run_config(const KeyValues& kv) {
    Resolver r(kv);
    RunConfig c;
    if (!r.has("seed")) throw ConfigError("seed is mandatory");
    c.seed = r.number<std::uint64_t>("seed", 0);
    c.output = r.str("output", "run");

    c.data.path = r.str("data.path", "data");
    c.data.categories = r.number<int>("data.categories", 4);
    c.data.train_per_category = r.number<int>("data.train_per_category", 400);
    c.data.test_per_category = r.number<int>("data.test_per_category", 100);
    c.data.image_size = r.number<int>("data.image_size", 64);
    c.data.seed = r.number<std::uint64_t>("data.seed", c.seed);
    if (c.data.categories < 2 || c.data.categories > 4) throw ConfigError("data.categories must be in [2, 4]");
    if (c.data.train_per_category < 1 || c.data.test_per_category < 1) {
        throw ConfigError("per-category sample counts must be >= 1");
    }
    if (c.data.image_size < 32) throw ConfigError("data.image_size must be >= 32");

    const std::string layers = r.str("network.layers", nn::format_layers(nn::NetworkConfig::reference_layers()));
    c.network.layers = nn::parse_layers(layers);
    c.network.loss = nn::parse_loss_kind(r.str("network.loss", "softmax"));
    c.network.input = {1, c.data.image_size, c.data.image_size};
    c.network.categories = c.data.categories;
    c.network.positive_category = r.number<int>("network.positive_category", 0);
    if (c.network.loss == nn::LossKind::logistic && c.network.categories != 2) {
        throw ConfigError("the logistic loss needs exactly 2 categories");
    }
    if (c.network.positive_category < 0 || c.network.positive_category >= c.network.categories) {
        throw ConfigError("network.positive_category out of range");
    }
    if (r.has("network.tau")) c.network.tau = r.number<double>("network.tau", 0.0);
    if (r.has("network.beta")) c.network.beta = r.number<double>("network.beta", 0.0);
    if (r.has("network.alpha")) c.network.alpha = r.number<double>("network.alpha", 0.0);
    c.network.unit_mask_gain = r.boolean("network.unit_mask_gain", true);
    const std::string mask = r.str("network.mask", "auto");
    if (mask == "auto") {
        c.mask = MaskMode::automatic;
    } else if (mask == "on") {
        c.mask = MaskMode::on;
    } else if (mask == "off") {
        c.mask = MaskMode::off;
    } else {
        throw ConfigError("network.mask must be auto, on or off");
    }

    auto& t = c.train;
    t.seed = c.seed;
    t.epochs = r.number<int>("train.epochs", 20);
    t.learning_rate = r.number<double>("train.lr", 0.01);
    t.momentum = r.number<double>("train.momentum", 0.9);
    t.batch_size = r.number<int>("train.batch", 16);
    t.warmup_epochs = r.number<int>("train.warmup_epochs", 1);
    t.lr_decay_epochs = r.number<int>("train.lr_decay_epochs", 0);
    t.lr_decay = r.number<double>("train.lr_decay", 0.1);
    t.filter.lambda_coefficient = r.number<double>("train.lambda_coef", LambdaSchedule::kDefaultCoefficient);
    t.filter.ema_rate = r.number<double>("train.ema_rate", 0.1);
    const std::string px = r.str("train.px_mode", "dataset_mean");
    if (px == "dataset_mean") {
        t.filter.likelihood = LikelihoodMode::dataset_mean;
    } else if (px == "per_sample") {
        t.filter.likelihood = LikelihoodMode::per_sample;
    } else {
        throw ConfigError("train.px_mode must be dataset_mean or per_sample");
    }
    const std::string scope = r.str("train.lambda_scope", "layer");
    if (scope == "layer") {
        t.filter.lambda_scope = nn::LambdaScope::layer;
    } else if (scope == "filter") {
        t.filter.lambda_scope = nn::LambdaScope::filter;
    } else {
        throw ConfigError("train.lambda_scope must be layer or filter");
    }
    if (t.epochs < 0 || t.batch_size < 1 || !(t.learning_rate > 0.0) || t.momentum < 0.0 || t.momentum >= 1.0 ||
        t.warmup_epochs < 0 || t.lr_decay_epochs < 0 || !(t.lr_decay > 0.0)) {
        throw ConfigError("invalid training hyper-parameters");
    }
    if (t.filter.lambda_coefficient < 0.0) throw ConfigError("train.lambda_coef must be >= 0");
    if (!(t.filter.ema_rate > 0.0 && t.filter.ema_rate <= 1.0)) throw ConfigError("train.ema_rate must be in (0, 1]");

    c.network.interpretable = c.mask == MaskMode::on ||
                              (c.mask == MaskMode::automatic && t.filter.lambda_coefficient > 0.0);

    c.eval.iou_threshold = r.number<double>("eval.iou_threshold", 0.2);
    c.eval.top_n = r.number<std::size_t>("eval.top_n", 100);
    c.eval.dilation_radius = r.number<int>("eval.dilation_radius", 0);
    c.eval.layer = r.number<int>("eval.layer", -1);
    if (c.eval.top_n < 2) throw ConfigError("eval.top_n must be >= 2");
    if (c.eval.dilation_radius < 0) throw ConfigError("eval.dilation_radius must be >= 0");
    if (!(c.eval.iou_threshold >= 0.0 && c.eval.iou_threshold < 1.0)) {
        throw ConfigError("eval.iou_threshold must be in [0, 1)");
    }
    c.checkpoint = r.str("eval.checkpoint", "");

    r.reject_unknown();
    // Building once checks layer/shape compatibility before any work starts.
    (void)nn::Network(c.network, c.seed);
    return c;
}

RunConfig load_run_config(const std::filesystem::path& file, const std::vector<std::string>& overrides) {
    KeyValues kv;
    if (!file.empty()) {
        std::ifstream in(file);
        if (!in) throw ConfigError("cannot read config file " + file.string());
        std::stringstream ss;
        ss << in.rdbuf();
        kv = parse_key_values(ss.str());
    }
    for (const auto& o : overrides) apply_override(kv, o);
    return resolve_run_config(kv);
}

nlohmann::json to_json(const RunConfig& c) {
    using nlohmann::json;
    const auto& t = c.train;
    return {{"seed", c.seed},
            {"output", c.output.generic_string()},
            {"data",
             {{"path", c.data.path.generic_string()},
              {"categories", c.data.categories},
              {"train_per_category", c.data.train_per_category},
              {"test_per_category", c.data.test_per_category},
              {"image_size", c.data.image_size},
              {"seed", c.data.seed}}},
            {"mask", to_string(c.mask)},
            {"network", network_config_to_json(c.network)},
            {"train",
             {{"epochs", t.epochs},
              {"lr", t.learning_rate},
              {"momentum", t.momentum},
              {"batch", t.batch_size},
              {"warmup_epochs", t.warmup_epochs},
              {"lr_decay_epochs", t.lr_decay_epochs},
              {"lr_decay", t.lr_decay},
              {"lambda_coef", t.filter.lambda_coefficient},
              {"ema_rate", t.filter.ema_rate},
              {"px_mode", t.filter.likelihood == LikelihoodMode::dataset_mean ? "dataset_mean" : "per_sample"},
              {"lambda_scope", t.filter.lambda_scope == nn::LambdaScope::layer ? "layer" : "filter"}}},
            {"eval",
             {{"iou_threshold", c.eval.iou_threshold},
              {"top_n", c.eval.top_n},
              {"dilation_radius", c.eval.dilation_radius},
              {"layer", c.eval.layer},
              {"checkpoint", c.checkpoint_path().generic_string()}}}};
}

}  // namespace interpconv
