#include "interpconv/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "interpconv/errors.hpp"

namespace interpconv {

using nlohmann::json;

json network_config_to_json(const nn::NetworkConfig& c) {
    json j = {{"layers", nn::format_layers(c.layers)},
              {"loss", nn::to_string(c.loss)},
              {"input", {c.input.channels, c.input.height, c.input.width}},
              {"categories", c.categories},
              {"positive_category", c.positive_category},
              {"interpretable", c.interpretable},
              {"unit_mask_gain", c.unit_mask_gain}};
    j["tau"] = c.tau ? json(*c.tau) : json(nullptr);
    j["beta"] = c.beta ? json(*c.beta) : json(nullptr);
    j["alpha"] = c.alpha ? json(*c.alpha) : json(nullptr);
    return j;
}

nn::NetworkConfig network_config_from_json(const json& j) {
    nn::NetworkConfig c;
    c.layers = nn::parse_layers(j.at("layers").get<std::string>());
    c.loss = nn::parse_loss_kind(j.at("loss").get<std::string>());
    const auto& in = j.at("input");
    c.input = {in.at(0).get<int>(), in.at(1).get<int>(), in.at(2).get<int>()};
    c.categories = j.at("categories").get<int>();
    c.positive_category = j.at("positive_category").get<int>();
    c.interpretable = j.at("interpretable").get<bool>();
    c.unit_mask_gain = j.value("unit_mask_gain", true);
    auto opt = [&](const char* key) -> std::optional<double> {
        if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
        return j.at(key).get<double>();
    };
    c.tau = opt("tau");
    c.beta = opt("beta");
    c.alpha = opt("alpha");
    return c;
}

namespace {

class Writer {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out_.insert(out_.end(), b, b + n);
    }
    template <typename T>
    void le(T v) {
        using U = std::make_unsigned_t<T>;
        const auto u = static_cast<U>(v);
        for (std::size_t k = 0; k < sizeof(T); ++k) out_.push_back(static_cast<std::uint8_t>(u >> (8 * k)));
    }
    void u8(std::uint8_t v) { out_.push_back(v); }
    void f64(double v) { le(std::bit_cast<std::uint64_t>(v)); }
    void str(const std::string& s) {
        le(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}

    void need(std::size_t n) const {
        if (in_.size() - pos_ < n) throw DataError("checkpoint is truncated");
    }
    template <typename T>
    T le() {
        need(sizeof(T));
        using U = std::make_unsigned_t<T>;
        U u = 0;
        for (std::size_t k = 0; k < sizeof(T); ++k) u |= static_cast<U>(static_cast<U>(in_[pos_ + k]) << (8 * k));
        pos_ += sizeof(T);
        return static_cast<T>(u);
    }
    std::uint8_t u8() { return le<std::uint8_t>(); }
    double f64() { return std::bit_cast<double>(le<std::uint64_t>()); }
    std::string str() {
        const auto n = le<std::uint32_t>();
        need(n);
        std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == in_.size(); }

private:
    const std::vector<std::uint8_t>& in_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(nn::Network& network, const json& run_config) {
    Writer w;
    w.bytes("ICNN", 4);
    w.le(kCheckpointVersion);
    json config = run_config;
    config["network"] = network_config_to_json(network.config());
    w.str(config.dump());

    const auto params = network.named_params();
    w.le(static_cast<std::uint32_t>(params.size()));
    for (const auto& [name, p] : params) {
        w.str(name);
        w.le(static_cast<std::uint32_t>(p->value.rank()));
        for (auto d : p->value.shape()) w.le(static_cast<std::uint64_t>(d));
        for (double v : p->value.values()) w.f64(v);
    }

    const auto layers = network.interp_layers();
    const auto indices = network.interp_layer_indices();
    w.le(static_cast<std::uint32_t>(layers.size()));
    for (std::size_t k = 0; k < layers.size(); ++k) {
        const auto* l = layers[k];
        w.le(static_cast<std::uint64_t>(indices[k]));
        w.le(static_cast<std::uint32_t>(l->states().size()));
        w.f64(l->layer_lambda().running_mean());
        w.u8(l->layer_lambda().initialized() ? 1 : 0);
        for (std::size_t f = 0; f < l->states().size(); ++f) {
            const auto& s = l->states()[f];
            const auto& fl = l->filter_lambdas()[f];
            w.u8(s.initialized ? 1 : 0);
            w.le(static_cast<std::int32_t>(s.assigned_category.value_or(-1)));
            w.f64(s.mean_px);
            w.f64(s.lambda);
            w.f64(fl.running_mean());
            w.u8(fl.initialized() ? 1 : 0);
            w.le(static_cast<std::uint32_t>(s.z_estimates.size()));
            for (double z : s.z_estimates) w.f64(z);
        }
    }
    return w.take();
}

void save_checkpoint(const std::filesystem::path& path, nn::Network& network, const json& run_config) {
    const auto bytes = serialize_checkpoint(network, run_config);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed for checkpoint " + path.string());
}

LoadedCheckpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
    Reader r(bytes);
    r.need(4);
    if (std::memcmp(bytes.data(), "ICNN", 4) != 0) throw DataError("not an ICNN checkpoint");
    r.le<std::uint32_t>();  // skip magic
    const auto version = r.le<std::uint32_t>();
    if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
    json config;
    try {
        config = json::parse(r.str());
    } catch (const json::exception& e) {
        throw DataError(std::string("corrupt checkpoint config: ") + e.what());
    }
    nn::NetworkConfig net_config;
    try {
        net_config = network_config_from_json(config.at("network"));
    } catch (const json::exception& e) {
        throw DataError(std::string("corrupt network config in checkpoint: ") + e.what());
    }
    LoadedCheckpoint out{nn::Network(net_config, 0), config};
    auto& net = out.network;

    const auto params = net.named_params();
    const auto count = r.le<std::uint32_t>();
    if (count != params.size()) throw DataError("checkpoint tensor count does not match the network");
    for (const auto& [name, p] : params) {
        if (r.str() != name) throw DataError("checkpoint tensor order does not match the network at " + name);
        const auto rank = r.le<std::uint32_t>();
        std::vector<std::size_t> shape(rank);
        for (auto& d : shape) d = static_cast<std::size_t>(r.le<std::uint64_t>());
        if (shape != p->value.shape()) throw DataError("checkpoint tensor " + name + " has the wrong shape");
        r.need(p->value.size() * 8);
        for (auto& v : p->value.values()) v = r.f64();
    }

    auto layers = net.interp_layers();
    const auto indices = net.interp_layer_indices();
    if (r.le<std::uint32_t>() != layers.size()) throw DataError("checkpoint interp layer count mismatch");
    for (std::size_t k = 0; k < layers.size(); ++k) {
        auto* l = layers[k];
        if (r.le<std::uint64_t>() != indices[k]) throw DataError("checkpoint interp layer index mismatch");
        if (r.le<std::uint32_t>() != l->states().size()) throw DataError("checkpoint filter count mismatch");
        const double mean = r.f64();
        l->layer_lambda().restore(mean, r.u8() != 0);
        for (std::size_t f = 0; f < l->states().size(); ++f) {
            auto& s = l->states()[f];
            s.initialized = r.u8() != 0;
            const auto assigned = r.le<std::int32_t>();
            s.assigned_category = assigned < 0 ? std::nullopt : std::optional<int>(assigned);
            s.mean_px = r.f64();
            s.lambda = r.f64();
            const double fmean = r.f64();
            l->filter_lambdas()[f].restore(fmean, r.u8() != 0);
            const auto nz = r.le<std::uint32_t>();
            if (nz != 0 && nz != l->bank().size()) throw DataError("checkpoint template count mismatch");
            s.z_estimates.resize(nz);
            for (auto& z : s.z_estimates) z = r.f64();
        }
    }
    if (!r.done()) throw DataError("checkpoint has trailing bytes");
    return out;
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("missing checkpoint " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_checkpoint(bytes);
}

}  // namespace interpconv
