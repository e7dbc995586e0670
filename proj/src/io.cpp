#include "voxreg/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "voxreg/detail/trilinear.hpp"

namespace voxreg {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void write_atomic(const fs::path& path, const std::string& bytes) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("short write to " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

std::string read_all(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    if (!in && !in.eof()) throw IoError("read failure on " + path.string());
    return std::move(buf).str();
}

json parse_json(const fs::path& path) {
    try {
        return json::parse(read_all(path));
    } catch (const json::exception& e) {
        throw IoError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

void write_json(const fs::path& path, const json& j) {
    write_atomic(path, j.dump(2) + "\n");
}

std::string number_to_string(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_number(std::string_view field, const fs::path& path) {
    double v = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{} || res.ptr != last) {
        throw IoError("non-numeric field '" + std::string(field) + "' in " + path.string());
    }
    return v;
}

std::string encode_f32le(std::span<const double> values, const fs::path& path) {
    std::string bytes;
    bytes.resize(values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const float f = static_cast<float>(values[i]);
        if (!std::isfinite(f)) {
            throw IoError("value " + number_to_string(values[i]) +
                          " not representable as f32 while writing " + path.string());
        }
        const std::uint32_t u = std::bit_cast<std::uint32_t>(f);
        bytes[i * 4 + 0] = static_cast<char>(u & 0xff);
        bytes[i * 4 + 1] = static_cast<char>((u >> 8) & 0xff);
        bytes[i * 4 + 2] = static_cast<char>((u >> 16) & 0xff);
        bytes[i * 4 + 3] = static_cast<char>((u >> 24) & 0xff);
    }
    return bytes;
}

std::vector<double> decode_f32le(const std::string& bytes) {
    std::vector<double> values(bytes.size() / 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const std::uint32_t u = static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i * 4 + 0])) |
                                static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i * 4 + 1])) << 8 |
                                static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i * 4 + 2])) << 16 |
                                static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i * 4 + 3])) << 24;
        values[i] = std::bit_cast<float>(u);
    }
    return values;
}

fs::path sidecar_path(const fs::path& path) { return path.string() + ".json"; }

fs::path channel_path(const fs::path& prefix, int axis) {
    static constexpr const char* kSuffix[3] = {".z.f32", ".y.f32", ".x.f32"};
    return prefix.string() + kSuffix[axis];
}

} // namespace

Volume3 read_volume(const fs::path& path) {
    const json side = parse_json(sidecar_path(path));
    if (!side.contains("dims")) {
        throw IoError("sidecar " + sidecar_path(path).string() + " missing \"dims\"");
    }
    const json& jd = side.at("dims");
    if (!jd.is_array() || jd.size() != 3 || !jd[0].is_number_integer()) {
        throw IoError("sidecar " + sidecar_path(path).string() +
                      " \"dims\" must be three integers");
    }
    const Dims3 dims{jd[0].get<int>(), jd[1].get<int>(), jd[2].get<int>()};
    Spacing3 spacing;
    if (side.contains("spacing")) {
        const json& js = side.at("spacing");
        if (!js.is_array() || js.size() != 3) {
            throw IoError("sidecar " + sidecar_path(path).string() +
                          " \"spacing\" must be three numbers");
        }
        spacing = {js[0].get<double>(), js[1].get<double>(), js[2].get<double>()};
    }
    if (side.value("dtype", "f32le") != "f32le") {
        throw IoError("unsupported dtype in " + sidecar_path(path).string());
    }

    const std::string bytes = read_all(path);
    const std::size_t expect = static_cast<std::size_t>(dims.voxel_count()) * 4;
    if (bytes.size() != expect) {
        throw IoError("payload " + path.string() + " holds " +
                      std::to_string(bytes.size()) + " bytes, sidecar dims need " +
                      std::to_string(expect));
    }
    return Volume3::from_data(dims, spacing, decode_f32le(bytes));
}

void write_volume(const fs::path& path, const Volume3& v) {
    write_atomic(path, encode_f32le(v.data(), path));
    const json side = {{"dims", {v.dims().nz, v.dims().ny, v.dims().nx}},
                       {"spacing", {v.spacing().sz, v.spacing().sy, v.spacing().sx}},
                       {"dtype", "f32le"}};
    write_json(sidecar_path(path), side);
}

Mask3 read_mask(const fs::path& path) { return Mask3::from_volume(read_volume(path)); }

void write_mask(const fs::path& path, const Mask3& m) { write_volume(path, m.volume()); }

Field3 read_field(const fs::path& prefix) {
    Volume3 z = read_volume(channel_path(prefix, kAxisZ));
    Volume3 y = read_volume(channel_path(prefix, kAxisY));
    Volume3 x = read_volume(channel_path(prefix, kAxisX));
    if (!(z.dims() == y.dims()) || !(z.dims() == x.dims())) {
        throw IoError("channel files of " + prefix.string() + " disagree on dims");
    }
    auto take = [](Volume3& v) {
        return std::vector<double>(v.data().begin(), v.data().end());
    };
    return Field3::from_channels(z.dims(), take(z), take(y), take(x));
}

void write_field(const fs::path& prefix, const Field3& f) {
    for (int axis = 0; axis < 3; ++axis) {
        std::vector<double> ch(f.channel(axis).begin(), f.channel(axis).end());
        write_volume(channel_path(prefix, axis), Volume3::from_data(f.dims(), {}, std::move(ch)));
    }
}

DeformationGrid read_grid(const fs::path& prefix) {
    return DeformationGrid::from_field(read_field(prefix));
}

void write_grid(const fs::path& prefix, const DeformationGrid& g) {
    write_field(prefix, g.field());
}

GradientField read_gradient_field(const fs::path& prefix) {
    return GradientField::from_field(read_field(prefix));
}

void write_gradient_field(const fs::path& prefix, const GradientField& phi) {
    write_field(prefix, phi.field());
}

LandmarkSet read_landmarks(const fs::path& path) {
    std::istringstream in(read_all(path));
    std::string line;
    auto next_line = [&]() -> bool {
        if (!std::getline(in, line)) return false;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
    };
    if (!next_line() || line != "label,z,y,x") {
        throw IoError("landmark file " + path.string() + " must start with 'label,z,y,x'");
    }
    std::vector<Landmark> points;
    while (next_line()) {
        if (line.empty()) continue;
        std::array<std::string, 4> fields;
        std::size_t start = 0;
        for (int f = 0; f < 4; ++f) {
            const std::size_t comma = line.find(',', start);
            const bool last = f == 3;
            if (last != (comma == std::string::npos)) {
                throw IoError("landmark row '" + line + "' in " + path.string() +
                              " must have exactly 4 fields");
            }
            fields[f] = line.substr(start, comma == std::string::npos ? comma : comma - start);
            start = comma + 1;
        }
        if (fields[0].empty()) {
            throw IoError("empty landmark label in " + path.string());
        }
        points.push_back({fields[0], parse_number(fields[1], path),
                          parse_number(fields[2], path), parse_number(fields[3], path)});
    }
    return LandmarkSet::from_points(std::move(points));
}

void write_landmarks(const fs::path& path, const LandmarkSet& pts) {
    std::string out = "label,z,y,x\n";
    for (const Landmark& p : pts.points()) {
        if (p.label.find_first_of(",\r\n") != std::string::npos) {
            throw IoError("landmark label '" + p.label + "' contains a delimiter");
        }
        out += p.label;
        out += ',';
        out += number_to_string(p.z);
        out += ',';
        out += number_to_string(p.y);
        out += ',';
        out += number_to_string(p.x);
        out += '\n';
    }
    write_atomic(path, out);
}

AffineParams read_affine(const fs::path& path) {
    const json j = parse_json(path);
    if (!j.contains("coeffs") || !j.at("coeffs").is_array() || j.at("coeffs").size() != 12) {
        throw IoError("affine file " + path.string() + " needs \"coeffs\" with 12 numbers");
    }
    std::array<double, 12> c;
    for (int i = 0; i < 12; ++i) c[i] = j.at("coeffs")[i].get<double>();
    return AffineParams::from_array(c);
}

void write_affine(const fs::path& path, const AffineParams& a) {
    write_json(path, json{{"coeffs", a.coeffs()}});
}

OptimConfig read_config(const fs::path& path) {
    const json j = parse_json(path);
    if (!j.is_object()) throw IoError("config " + path.string() + " must be a JSON object");
    OptimConfig cfg;
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "lr0") cfg.lr0 = value.get<double>();
            else if (key == "lr_drop_factor") cfg.lr_drop_factor = value.get<double>();
            else if (key == "patience_drop") cfg.patience_drop = value.get<int>();
            else if (key == "patience_stop") cfg.patience_stop = value.get<int>();
            else if (key == "eval_every") cfg.eval_every = value.get<int>();
            else if (key == "alpha") cfg.alpha = value.get<double>();
            else if (key == "beta") cfg.beta = value.get<double>();
            else if (key == "max_iters") cfg.max_iters = value.get<int>();
            else if (key == "adam_beta1") cfg.adam_beta1 = value.get<double>();
            else if (key == "adam_beta2") cfg.adam_beta2 = value.get<double>();
            else if (key == "adam_eps") cfg.adam_eps = value.get<double>();
            else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
            else if (key == "pyramid_levels") cfg.pyramid_levels = value.get<std::vector<int>>();
            else if (key == "enable_affine") cfg.enable_affine = value.get<bool>();
            else throw IoError("unknown config key \"" + key + "\" in " + path.string());
        } catch (const json::exception& e) {
            throw IoError("bad value for config key \"" + key + "\" in " + path.string() +
                          ": " + e.what());
        }
    }
    cfg.validate();
    return cfg;
}

void write_config(const fs::path& path, const OptimConfig& cfg) {
    write_json(path, json{{"lr0", cfg.lr0},
                          {"lr_drop_factor", cfg.lr_drop_factor},
                          {"patience_drop", cfg.patience_drop},
                          {"patience_stop", cfg.patience_stop},
                          {"eval_every", cfg.eval_every},
                          {"alpha", cfg.alpha},
                          {"beta", cfg.beta},
                          {"max_iters", cfg.max_iters},
                          {"adam_beta1", cfg.adam_beta1},
                          {"adam_beta2", cfg.adam_beta2},
                          {"adam_eps", cfg.adam_eps},
                          {"seed", cfg.seed},
                          {"pyramid_levels", cfg.pyramid_levels},
                          {"enable_affine", cfg.enable_affine}});
}

Volume3 preprocess(const Volume3& v, double window_lo, double window_hi,
                   double scale_factor) {
    if (!(window_hi > window_lo)) {
        throw ValidationError("preprocess window_hi must exceed window_lo");
    }
    if (!(scale_factor > 0.0) || !(scale_factor <= 1.0)) {
        throw ValidationError("preprocess scale_factor must lie in (0, 1]");
    }
    const Dims3 d = v.dims();
    const double span = window_hi - window_lo;
    std::vector<double> windowed(v.data().begin(), v.data().end());
    for (double& x : windowed) {
        x = (std::clamp(x, window_lo, window_hi) - window_lo) / span;
    }
    if (scale_factor == 1.0) {
        return Volume3::from_data(d, v.spacing(), std::move(windowed));
    }

    const Dims3 nd{std::max(2, static_cast<int>(std::llround(d.nz * scale_factor))),
                   std::max(2, static_cast<int>(std::llround(d.ny * scale_factor))),
                   std::max(2, static_cast<int>(std::llround(d.nx * scale_factor)))};
    const double rz = static_cast<double>(d.nz - 1) / (nd.nz - 1);
    const double ry = static_cast<double>(d.ny - 1) / (nd.ny - 1);
    const double rx = static_cast<double>(d.nx - 1) / (nd.nx - 1);
    const Spacing3 ns{v.spacing().sz * rz, v.spacing().sy * ry, v.spacing().sx * rx};

    std::vector<double> out(static_cast<std::size_t>(nd.voxel_count()));
    std::size_t i = 0;
    for (int z = 0; z < nd.nz; ++z)
        for (int y = 0; y < nd.ny; ++y)
            for (int x = 0; x < nd.nx; ++x, ++i)
                out[i] = detail::sample_zero_pad(windowed.data(), d, z * rz, y * ry, x * rx);
    return Volume3::from_data(nd, ns, std::move(out));
}

} // namespace voxreg
