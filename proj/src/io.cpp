#include "crn/io.hpp"

#include "crn/errors.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace crn {

namespace fs = std::filesystem;

std::string format_real(double value) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 17);
    return {buf, res.ptr};
}

CloudFormat format_for_path(const fs::path& path) {
    auto ext = path.extension().string();
    for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return ext == ".ply" ? CloudFormat::Ply : CloudFormat::Xyz;
}

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        const std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

double parse_real(std::string_view tok, std::size_t line_no) {
    double v = 0.0;
    const auto* first = tok.data();
    const auto* last = tok.data() + tok.size();
    if (!tok.empty() && *first == '+') ++first;
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) {
        throw ParseError("line " + std::to_string(line_no) + ": '" + std::string(tok) + "' is not a real number");
    }
    if (!std::isfinite(v)) {
        throw ValueError("line " + std::to_string(line_no) + ": non-finite coordinate '" + std::string(tok) + "'");
    }
    return v;
}

struct LineReader {
    std::string_view text;
    std::size_t pos = 0;
    std::size_t line_no = 0;

    bool next(std::string_view& line) {
        if (pos >= text.size()) return false;
        const std::size_t end = text.find('\n', pos);
        line = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        pos = end == std::string_view::npos ? text.size() : end + 1;
        ++line_no;
        return true;
    }
};

void append_point(std::vector<double>& coords, const std::vector<std::string_view>& tok, std::size_t line_no) {
    if (tok.size() != 3) {
        throw ParseError("line " + std::to_string(line_no) + ": expected 3 values, found " +
                         std::to_string(tok.size()));
    }
    for (const auto& t : tok) coords.push_back(parse_real(t, line_no));
}

PointCloud to_cloud(const std::vector<double>& coords) {
    PointCloud cloud(static_cast<Eigen::Index>(coords.size() / 3), 3);
    std::copy(coords.begin(), coords.end(), cloud.data());
    return cloud;
}

PointCloud parse_xyz(std::string_view text) {
    LineReader reader{text};
    std::string_view line;
    std::vector<double> coords;
    while (reader.next(line)) {
        const auto tok = split_ws(line);
        if (tok.empty()) continue;
        append_point(coords, tok, reader.line_no);
    }
    return to_cloud(coords);
}

PointCloud parse_ply(std::string_view text) {
    LineReader reader{text};
    std::string_view line;
    auto header_error = [&reader](const std::string& what) {
        return ParseError("line " + std::to_string(reader.line_no) + ": " + what);
    };
    if (!reader.next(line) || split_ws(line) != std::vector<std::string_view>{"ply"}) {
        throw header_error("missing 'ply' magic");
    }
    bool format_seen = false;
    long long vertices = -1;
    std::vector<std::string> props;
    while (true) {
        if (!reader.next(line)) throw header_error("unterminated header");
        const auto tok = split_ws(line);
        if (tok.empty() || tok[0] == "comment" || tok[0] == "obj_info") continue;
        if (tok[0] == "end_header") break;
        if (tok[0] == "format") {
            if (tok.size() != 3 || tok[1] != "ascii") throw header_error("only 'format ascii 1.0' is supported");
            format_seen = true;
        } else if (tok[0] == "element") {
            if (tok.size() != 3 || tok[1] != "vertex" || vertices >= 0) {
                throw header_error("only a single 'element vertex' is supported");
            }
            const auto res = std::from_chars(tok[2].data(), tok[2].data() + tok[2].size(), vertices);
            if (res.ec != std::errc() || vertices < 0) throw header_error("bad vertex count");
        } else if (tok[0] == "property") {
            if (tok.size() != 3 || !(tok[1] == "float" || tok[1] == "double" || tok[1] == "float32" || tok[1] == "float64")) {
                throw header_error("only float/double vertex properties are supported");
            }
            props.emplace_back(tok[2]);
        } else {
            throw header_error("unsupported header line '" + std::string(line) + "'");
        }
    }
    if (!format_seen || vertices < 0) throw header_error("header lacks format or vertex element");
    if (props != std::vector<std::string>{"x", "y", "z"}) throw header_error("vertex properties must be exactly x y z");

    std::vector<double> coords;
    coords.reserve(static_cast<std::size_t>(vertices) * 3);
    while (static_cast<long long>(coords.size() / 3) < vertices) {
        if (!reader.next(line)) throw header_error("file ends before all vertices were read");
        const auto tok = split_ws(line);
        if (tok.empty()) continue;
        append_point(coords, tok, reader.line_no);
    }
    while (reader.next(line)) {
        if (!split_ws(line).empty()) throw header_error("unexpected data after the last vertex");
    }
    return to_cloud(coords);
}

}  // namespace

PointCloud parse_cloud(std::string_view text, CloudFormat format) {
    return format == CloudFormat::Ply ? parse_ply(text) : parse_xyz(text);
}

std::string format_cloud(const PointCloud& cloud, CloudFormat format) {
    std::string out;
    if (format == CloudFormat::Ply) {
        out += "ply\nformat ascii 1.0\nelement vertex " + std::to_string(cloud.rows()) +
               "\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
    }
    for (Eigen::Index i = 0; i < cloud.rows(); ++i) {
        out += format_real(cloud(i, 0));
        out += ' ';
        out += format_real(cloud(i, 1));
        out += ' ';
        out += format_real(cloud(i, 2));
        out += '\n';
    }
    return out;
}

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const fs::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

PointCloud read_cloud(const fs::path& path) {
    try {
        return parse_cloud(read_text_file(path), format_for_path(path));
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    } catch (const ValueError& e) {
        throw ValueError(path.string() + ": " + e.what());
    }
}

void write_cloud(const PointCloud& cloud, const fs::path& path) { write_cloud(cloud, path, format_for_path(path)); }

void write_cloud(const PointCloud& cloud, const fs::path& path, CloudFormat format) {
    if (fs::is_directory(path)) throw IoError("cannot write cloud: '" + path.string() + "' is a directory");
    write_text_file(path, format_cloud(cloud, format));
}

void write_dataset(const fs::path& dir, const std::vector<TrainingPair>& pairs) {
    fs::create_directories(dir);
    std::string manifest;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        char stem[32];
        std::snprintf(stem, sizeof stem, "%05zu", i);
        const std::string in_name = std::string("input_") + stem + ".xyz";
        const std::string tgt_name = std::string("target_") + stem + ".xyz";
        write_cloud(pairs[i].input, dir / in_name);
        write_cloud(pairs[i].target, dir / tgt_name);
        const std::string category = pairs[i].category.empty() ? "-" : pairs[i].category;
        manifest += in_name + ' ' + tgt_name + ' ' + std::string(to_string(pairs[i].source)) + ' ' + category + '\n';
    }
    write_text_file(dir / "manifest.txt", manifest);
}

std::vector<TrainingPair> read_manifest(const fs::path& manifest) {
    const fs::path base = manifest.parent_path();
    const std::string text = read_text_file(manifest);
    LineReader reader{text};
    std::string_view line;
    std::vector<TrainingPair> pairs;
    while (reader.next(line)) {
        const auto tok = split_ws(line);
        if (tok.empty() || tok[0].front() == '#') continue;
        if (tok.size() != 4) {
            throw ParseError(manifest.string() + ": line " + std::to_string(reader.line_no) +
                             ": expected '<input> <target> <source> <category>'");
        }
        TrainingPair p;
        p.input = read_cloud(base / std::string(tok[0]));
        p.target = read_cloud(base / std::string(tok[1]));
        p.source = parse_pair_source(tok[2]);
        p.category = tok[3] == "-" ? std::string() : std::string(tok[3]);
        if (p.input.rows() == 0 || p.target.rows() == 0) {
            throw ValueError(manifest.string() + ": line " + std::to_string(reader.line_no) + ": empty cloud");
        }
        pairs.push_back(std::move(p));
    }
    return pairs;
}

}  // namespace crn
