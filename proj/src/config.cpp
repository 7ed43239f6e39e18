#include "crn/config.hpp"

#include "crn/errors.hpp"
#include "crn/io.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <sstream>

namespace crn {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
    throw ValueError("config key '" + std::string(key) + "': cannot use '" + std::string(value) + "' (" +
                     std::string(expected) + ")");
}

std::uint64_t to_uint(std::string_view key, std::string_view v) {
    std::uint64_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size() || v.empty()) bad_value(key, v, "expected a non-negative integer");
    return out;
}

double to_real(std::string_view key, std::string_view v) {
    double out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size() || v.empty()) bad_value(key, v, "expected a real number");
    if (!std::isfinite(out)) bad_value(key, v, "expected a finite value");
    return out;
}

bool to_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "off" || v == "no") return false;
    bad_value(key, v, "expected true or false");
}

std::vector<std::string_view> split_list(std::string_view v) {
    std::vector<std::string_view> out;
    while (true) {
        const auto comma = v.find(',');
        out.push_back(trim(v.substr(0, comma)));
        if (comma == std::string_view::npos) break;
        v.remove_prefix(comma + 1);
    }
    return out;
}

Widths to_widths(std::string_view key, std::string_view v) {
    Widths w;
    for (auto item : split_list(v)) w.push_back(to_uint(key, item));
    return w;
}

std::string from_widths(const Widths& w) {
    std::string s;
    for (std::size_t i = 0; i < w.size(); ++i) s += (i ? "," : "") + std::to_string(w[i]);
    return s;
}

// Shortest text that parses back to the same double.
std::string from_real(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

std::string from_bool(bool b) { return b ? "true" : "false"; }

using Setter = std::function<void(RunConfig&, std::string_view key, std::string_view value)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct KeyDef {
    std::string name;
    bool net;
    Setter set;
    Getter get;
};

template <typename Section, typename Field>
KeyDef uint_key(std::string name, Section RunConfig::*section, Field Section::*field) {
    const bool net = std::is_same_v<Section, NetConfig>;
    return {std::move(name), net,
            [=](RunConfig& c, std::string_view k, std::string_view v) {
                (c.*section).*field = static_cast<Field>(to_uint(k, v));
            },
            [=](const RunConfig& c) { return std::to_string((c.*section).*field); }};
}

template <typename Section>
KeyDef real_key(std::string name, Section RunConfig::*section, double Section::*field) {
    const bool net = std::is_same_v<Section, NetConfig>;
    return {std::move(name), net,
            [=](RunConfig& c, std::string_view k, std::string_view v) { (c.*section).*field = to_real(k, v); },
            [=](const RunConfig& c) { return from_real((c.*section).*field); }};
}

template <typename Section>
KeyDef bool_key(std::string name, Section RunConfig::*section, bool Section::*field) {
    const bool net = std::is_same_v<Section, NetConfig>;
    return {std::move(name), net,
            [=](RunConfig& c, std::string_view k, std::string_view v) { (c.*section).*field = to_bool(k, v); },
            [=](const RunConfig& c) { return from_bool((c.*section).*field); }};
}

KeyDef widths_key(std::string name, Widths NetConfig::*field) {
    return {std::move(name), true,
            [=](RunConfig& c, std::string_view k, std::string_view v) { c.net.*field = to_widths(k, v); },
            [=](const RunConfig& c) { return from_widths(c.net.*field); }};
}

KeyDef string_key(std::string name, std::string RunConfig::*field) {
    return {std::move(name), false, [=](RunConfig& c, std::string_view, std::string_view v) { c.*field = v; },
            [=](const RunConfig& c) { return c.*field; }};
}

std::string_view plane_name(MirrorPlane p) {
    switch (p) {
        case MirrorPlane::XY: return "xy";
        case MirrorPlane::YZ: return "yz";
        case MirrorPlane::XZ: return "xz";
    }
    return "xy";
}

std::string_view removal_mode_name(RemovalSpec::Mode m) {
    switch (m) {
        case RemovalSpec::Mode::FixedCount: return "count";
        case RemovalSpec::Mode::Fraction: return "fraction";
        case RemovalSpec::Mode::Radius: return "radius";
    }
    return "fraction";
}

std::vector<KeyDef> build_table() {
    using R = RunConfig;
    std::vector<KeyDef> t;
    // network
    t.push_back(uint_key("input_points", &R::net, &NetConfig::input_points));
    t.push_back(uint_key("coarse_points", &R::net, &NetConfig::coarse_points));
    t.push_back(uint_key("feature_dim", &R::net, &NetConfig::feature_dim));
    t.push_back(widths_key("encoder_stage1", &NetConfig::encoder_stage1));
    t.push_back(widths_key("encoder_stage2", &NetConfig::encoder_stage2));
    t.push_back(widths_key("coarse_hidden", &NetConfig::coarse_hidden));
    t.push_back(widths_key("lifting_pre", &NetConfig::lifting_pre));
    t.push_back(widths_key("contraction", &NetConfig::contraction));
    t.push_back(widths_key("expansion", &NetConfig::expansion));
    t.push_back(widths_key("offset_hidden", &NetConfig::offset_hidden));
    t.push_back(uint_key("iterations", &R::net, &NetConfig::iterations));
    t.push_back(bool_key("mirror", &R::net, &NetConfig::mirror));
    t.push_back(bool_key("contraction_expansion", &R::net, &NetConfig::contraction_expansion));
    t.push_back(bool_key("discriminator", &R::net, &NetConfig::discriminator));
    t.push_back(real_key("grid_lo", &R::net, &NetConfig::grid_lo));
    t.push_back(real_key("grid_hi", &R::net, &NetConfig::grid_hi));
    t.push_back({"mirror_plane", true,
                 [](R& c, std::string_view k, std::string_view v) {
                     if (v == "xy") c.net.mirror_plane = MirrorPlane::XY;
                     else if (v == "yz") c.net.mirror_plane = MirrorPlane::YZ;
                     else if (v == "xz") c.net.mirror_plane = MirrorPlane::XZ;
                     else bad_value(k, v, "expected xy, yz or xz");
                 },
                 [](const R& c) { return std::string(plane_name(c.net.mirror_plane)); }});
    t.push_back(uint_key("disc_seeds", &R::net, &NetConfig::disc_seeds));
    t.push_back({"disc_radii", true,
                 [](R& c, std::string_view k, std::string_view v) {
                     const auto items = split_list(v);
                     if (items.size() != 3) bad_value(k, v, "expected three comma-separated radii");
                     for (std::size_t s = 0; s < 3; ++s) c.net.disc_radii[s] = to_real(k, items[s]);
                 },
                 [](const R& c) {
                     return from_real(c.net.disc_radii[0]) + "," + from_real(c.net.disc_radii[1]) + "," +
                            from_real(c.net.disc_radii[2]);
                 }});
    t.push_back({"disc_neighbors", true,
                 [](R& c, std::string_view k, std::string_view v) {
                     const auto w = to_widths(k, v);
                     if (w.size() != 3) bad_value(k, v, "expected three comma-separated counts");
                     for (std::size_t s = 0; s < 3; ++s) c.net.disc_neighbors[s] = w[s];
                 },
                 [](const R& c) {
                     return from_widths({c.net.disc_neighbors[0], c.net.disc_neighbors[1], c.net.disc_neighbors[2]});
                 }});
    for (std::size_t s = 0; s < 3; ++s) {
        t.push_back({"disc_mlp" + std::to_string(s), true,
                     [s](R& c, std::string_view k, std::string_view v) { c.net.disc_mlps[s] = to_widths(k, v); },
                     [s](const R& c) { return from_widths(c.net.disc_mlps[s]); }});
    }

    // training
    t.push_back(real_key("lr_g", &R::train, &TrainConfig::lr_g));
    t.push_back(real_key("lr_d", &R::train, &TrainConfig::lr_d));
    t.push_back(real_key("lr_decay", &R::train, &TrainConfig::lr_decay));
    t.push_back(uint_key("lr_decay_epochs", &R::train, &TrainConfig::lr_decay_epochs));
    t.push_back(real_key("lr_floor", &R::train, &TrainConfig::lr_floor));
    t.push_back(real_key("lambda_gan", &R::train, &TrainConfig::lambda_gan));
    t.push_back(real_key("lambda_ae", &R::train, &TrainConfig::lambda_ae));
    t.push_back(real_key("beta_rec", &R::train, &TrainConfig::beta_rec));
    t.push_back(real_key("lambda_f_start", &R::train, &TrainConfig::lambda_f_start));
    t.push_back(real_key("lambda_f_end", &R::train, &TrainConfig::lambda_f_end));
    t.push_back(uint_key("lambda_f_ramp", &R::train, &TrainConfig::lambda_f_ramp));
    t.push_back(real_key("adam_beta1", &R::train, &TrainConfig::adam_beta1));
    t.push_back(real_key("adam_beta2", &R::train, &TrainConfig::adam_beta2));
    t.push_back(real_key("adam_eps", &R::train, &TrainConfig::adam_eps));
    t.push_back(uint_key("epochs", &R::train, &TrainConfig::epochs));
    t.push_back(uint_key("batch_size", &R::train, &TrainConfig::batch_size));
    t.push_back(uint_key("max_iterations", &R::train, &TrainConfig::max_iterations));
    t.push_back(uint_key("seed", &R::train, &TrainConfig::seed));
    t.push_back(uint_key("d_steps", &R::train, &TrainConfig::d_steps));
    t.push_back({"chamfer", false,
                 [](R& c, std::string_view k, std::string_view v) {
                     try {
                         c.train.chamfer = parse_chamfer_variant(v);
                     } catch (const ValueError&) {
                         bad_value(k, v, "expected CD1 or CD2");
                     }
                 },
                 [](const R& c) { return std::string(to_string(c.train.chamfer)); }});
    t.push_back(real_key("labeled_ratio", &R::train, &TrainConfig::labeled_ratio));
    t.push_back(bool_key("resampling", &R::train, &TrainConfig::resampling));
    t.push_back(bool_key("mixup", &R::train, &TrainConfig::mixup));
    t.push_back(bool_key("partial_ae", &R::train, &TrainConfig::partial_ae));
    t.push_back(bool_key("regenerate_each_epoch", &R::train, &TrainConfig::regenerate_each_epoch));
    t.push_back({"removal_mode", false,
                 [](R& c, std::string_view k, std::string_view v) {
                     if (v == "count") c.train.removal.mode = RemovalSpec::Mode::FixedCount;
                     else if (v == "fraction") c.train.removal.mode = RemovalSpec::Mode::Fraction;
                     else if (v == "radius") c.train.removal.mode = RemovalSpec::Mode::Radius;
                     else bad_value(k, v, "expected count, fraction or radius");
                 },
                 [](const R& c) { return std::string(removal_mode_name(c.train.removal.mode)); }});
    t.push_back({"removal_center", false,
                 [](R& c, std::string_view k, std::string_view v) {
                     if (v == "direction") c.train.removal.center = RemovalSpec::Center::UnitSphereDirection;
                     else if (v == "point") c.train.removal.center = RemovalSpec::Center::CloudPoint;
                     else bad_value(k, v, "expected direction or point");
                 },
                 [](const R& c) {
                     return std::string(c.train.removal.center == RemovalSpec::Center::CloudPoint ? "point"
                                                                                                 : "direction");
                 }});
    t.push_back({"removal_count", false,
                 [](R& c, std::string_view k, std::string_view v) { c.train.removal.n_remove = to_uint(k, v); },
                 [](const R& c) { return std::to_string(c.train.removal.n_remove); }});
    t.push_back({"removal_fraction", false,
                 [](R& c, std::string_view k, std::string_view v) { c.train.removal.fraction = to_real(k, v); },
                 [](const R& c) { return from_real(c.train.removal.fraction); }});
    t.push_back({"removal_radius", false,
                 [](R& c, std::string_view k, std::string_view v) { c.train.removal.radius = to_real(k, v); },
                 [](const R& c) { return from_real(c.train.removal.radius); }});
    t.push_back(real_key("mixup_beta_a", &R::train, &TrainConfig::mixup_beta_a));
    t.push_back(real_key("mixup_beta_b", &R::train, &TrainConfig::mixup_beta_b));
    t.push_back(bool_key("mean_shape", &R::train, &TrainConfig::mean_shape));
    t.push_back(uint_key("mean_shape_refresh", &R::train, &TrainConfig::mean_shape_refresh));
    t.push_back(real_key("match_threshold", &R::train, &TrainConfig::match_threshold));
    t.push_back(bool_key("eval_emd", &R::train, &TrainConfig::eval_emd));

    // paths
    t.push_back(string_key("train_data", &R::train_data));
    t.push_back(string_key("test_data", &R::test_data));
    t.push_back(string_key("out_dir", &R::out_dir));
    return t;
}

const std::vector<KeyDef>& table() {
    static const std::vector<KeyDef> t = build_table();
    return t;
}

const KeyDef* find_key(std::string_view name) {
    for (const auto& k : table()) {
        if (k.name == name) return &k;
    }
    return nullptr;
}

void check_invariants(const RunConfig& c) {
    try {
        c.net.validate();
        c.train.validate();
    } catch (const ContractError& e) {
        throw ValueError(std::string("invalid configuration: ") + e.what());
    }
    const auto& r = c.train.removal;
    if (r.mode == RemovalSpec::Mode::Fraction && !(r.fraction >= 0 && r.fraction < 1)) {
        throw ValueError("invalid configuration: removal_fraction must lie in [0, 1)");
    }
    if (r.mode == RemovalSpec::Mode::Radius && !(r.radius >= 0)) {
        throw ValueError("invalid configuration: removal_radius must be non-negative");
    }
}

// Applies each line of `text`; when `net_only` is set, training keys are rejected.
void apply_text(RunConfig& config, std::string_view text, bool net_only) {
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ParseError("config line " + std::to_string(line_no) + ": expected key=value");
        }
        const auto key = trim(line.substr(0, eq));
        const KeyDef* def = find_key(key);
        if (def == nullptr || (net_only && !def->net)) {
            throw ParseError("config line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
        }
        def->set(config, key, trim(line.substr(eq + 1)));
    }
}

std::string dump(const RunConfig& config, bool net_only) {
    std::ostringstream out;
    for (const auto& k : table()) {
        if (net_only && !k.net) continue;
        out << k.name << '=' << k.get(config) << '\n';
    }
    return out.str();
}

}  // namespace

void apply_config_value(RunConfig& config, std::string_view key, std::string_view value) {
    const KeyDef* def = find_key(key);
    if (def == nullptr) throw ParseError("unknown config key '" + std::string(key) + "'");
    def->set(config, key, trim(value));
}

RunConfig parse_config(std::string_view text) {
    RunConfig c;
    apply_text(c, text, false);
    check_invariants(c);
    return c;
}

RunConfig load_config(const std::filesystem::path& path) { return parse_config(read_text_file(path)); }

std::string dump_config(const RunConfig& config) { return dump(config, false); }

NetConfig parse_net_config(std::string_view text) {
    RunConfig c;
    apply_text(c, text, true);
    try {
        c.net.validate();
    } catch (const ContractError& e) {
        throw ValueError(std::string("invalid configuration: ") + e.what());
    }
    return c.net;
}

std::string dump_net_config(const NetConfig& config) {
    RunConfig c;
    c.net = config;
    return dump(c, true);
}

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const auto& k : table()) out.push_back(k.name);
    return out;
}

}  // namespace crn
