#include "crn/checkpoint.hpp"

#include "crn/config.hpp"
#include "crn/errors.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace crn {

namespace {

class Writer {
public:
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void bytes(std::string_view s) { out_.append(s); }
    void reals(std::span<const double> v) {
        u64(v.size());
        for (double x : v) f64(x);
    }
    std::string take() { return std::move(out_); }

private:
    void put(std::uint64_t v, int width) {
        for (int i = 0; i < width; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
    }
    std::string out_;
};

class Reader {
public:
    Reader(std::string_view data, std::string what) : data_(data), what_(std::move(what)) {}

    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string_view bytes(std::uint64_t n) {
        need(n);
        const auto s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::vector<double> reals() {
        const std::uint64_t n = u64();
        need(n * 8);
        std::vector<double> v(n);
        for (double& x : v) x = f64();
        return v;
    }
    bool done() const { return pos_ == data_.size(); }
    void expect_done() const {
        if (!done()) throw FormatError("checkpoint: trailing bytes in section " + what_);
    }

private:
    void need(std::uint64_t n) const {
        if (n > data_.size() - pos_) throw FormatError("checkpoint: truncated " + what_);
    }
    std::uint64_t get(int width) {
        need(static_cast<std::uint64_t>(width));
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        pos_ += static_cast<std::size_t>(width);
        return v;
    }
    std::string_view data_;
    std::size_t pos_ = 0;
    std::string what_;
};

std::string params_payload(const NamedParameters& params) {
    Writer w;
    w.u64(params.size());
    for (const auto& [name, t] : params) w.reals(t.values());
    return w.take();
}

void load_params(std::string_view payload, const NamedParameters& params, const std::string& section) {
    Reader r(payload, section);
    if (r.u64() != params.size()) throw FormatError("checkpoint: parameter count mismatch in " + section);
    for (const auto& [name, t] : params) {
        const auto values = r.reals();
        Tensor handle = t;
        auto dst = handle.mutable_values();
        if (values.size() != dst.size()) throw FormatError("checkpoint: size mismatch for " + name);
        std::copy(values.begin(), values.end(), dst.begin());
    }
    r.expect_done();
}

std::string adam_payload(const std::vector<AdamState>& states) {
    Writer w;
    w.u64(states.size());
    for (const auto& s : states) {
        w.u64(s.step);
        w.reals(s.first_moment);
        w.reals(s.second_moment);
    }
    return w.take();
}

std::vector<AdamState> load_adam(std::string_view payload, std::size_t expected, const std::string& section) {
    Reader r(payload, section);
    if (r.u64() != expected) throw FormatError("checkpoint: optimizer state count mismatch in " + section);
    std::vector<AdamState> out(expected);
    for (auto& s : out) {
        s.step = r.u64();
        s.first_moment = r.reals();
        s.second_moment = r.reals();
    }
    r.expect_done();
    return out;
}

std::span<const double> span_of(const Eigen::VectorXd& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::string mean_shape_payload(const MeanShapeTable& table) {
    Writer w;
    w.u64(table.by_category().size());
    for (const auto& [name, v] : table.by_category()) {
        w.u32(static_cast<std::uint32_t>(name.size()));
        w.bytes(name);
        w.reals(span_of(v));
    }
    w.reals(span_of(table.global()));
    return w.take();
}

MeanShapeTable load_mean_shapes(std::string_view payload) {
    Reader r(payload, "mean_shapes");
    const std::uint64_t n = r.u64();
    std::map<std::string, Eigen::VectorXd> by_category;
    for (std::uint64_t i = 0; i < n; ++i) {
        const std::string name(r.bytes(r.u32()));
        by_category.emplace(name, to_vector(r.reals()));
    }
    Eigen::VectorXd global = to_vector(r.reals());
    r.expect_done();
    if (global.size() == 0 && by_category.empty()) return {};
    return MeanShapeTable(std::move(by_category), std::move(global));
}

}  // namespace

std::string serialize_checkpoint(const TrainingState& state) {
    std::vector<std::pair<std::string, std::string>> sections;
    sections.emplace_back("net", dump_net_config(state.net));
    sections.emplace_back("generator", params_payload(state.generator.named_parameters()));
    sections.emplace_back("discriminator", params_payload(state.discriminator.named_parameters()));
    sections.emplace_back("adam.generator", adam_payload(state.adam_generator));
    sections.emplace_back("adam.discriminator", adam_payload(state.adam_discriminator));
    sections.emplace_back("mean_shapes", mean_shape_payload(state.mean_shapes));
    {
        Writer w;
        w.u64(state.iteration);
        w.u64(state.epoch);
        sections.emplace_back("counters", w.take());
    }
    {
        std::ostringstream rng;
        rng << state.rng;
        sections.emplace_back("rng", rng.str());
    }

    Writer w;
    w.bytes(std::string_view(kCheckpointMagic, 8));
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(sections.size()));
    for (const auto& [name, payload] : sections) {
        w.u32(static_cast<std::uint32_t>(name.size()));
        w.bytes(name);
        w.u64(payload.size());
        w.bytes(payload);
    }
    return w.take();
}

TrainingState deserialize_checkpoint(std::string_view bytes) {
    Reader r(bytes, "header");
    if (bytes.size() < 8 || bytes.substr(0, 8) != std::string_view(kCheckpointMagic, 8)) {
        throw FormatError("checkpoint: bad magic header");
    }
    r.bytes(8);
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    }
    const std::uint32_t count = r.u32();
    std::map<std::string, std::string_view> sections;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::string name(r.bytes(r.u32()));
        sections[name] = r.bytes(r.u64());
    }
    r.expect_done();
    auto section = [&](const std::string& name) {
        const auto it = sections.find(name);
        if (it == sections.end()) throw FormatError("checkpoint: missing section " + name);
        return it->second;
    };

    NetConfig net;
    try {
        net = parse_net_config(section("net"));
    } catch (const std::runtime_error& e) {
        throw FormatError(std::string("checkpoint: bad net section: ") + e.what());
    }
    TrainingState state = TrainingState::initialize(net, 0);
    const auto gen = state.generator.named_parameters();
    const auto disc = state.discriminator.named_parameters();
    load_params(section("generator"), gen, "generator");
    load_params(section("discriminator"), disc, "discriminator");
    state.adam_generator = load_adam(section("adam.generator"), gen.size(), "adam.generator");
    state.adam_discriminator = load_adam(section("adam.discriminator"), disc.size(), "adam.discriminator");
    state.mean_shapes = load_mean_shapes(section("mean_shapes"));
    {
        Reader c(section("counters"), "counters");
        state.iteration = c.u64();
        state.epoch = c.u64();
        c.expect_done();
    }
    std::istringstream rng{std::string(section("rng"))};
    rng >> state.rng;
    if (rng.fail()) throw FormatError("checkpoint: bad rng section");
    return state;
}

void save_checkpoint(const std::filesystem::path& path, const TrainingState& state) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const std::string bytes = serialize_checkpoint(state);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("cannot write checkpoint " + path.string());
}

TrainingState load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read checkpoint " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize_checkpoint(buf.str());
}

}  // namespace crn
