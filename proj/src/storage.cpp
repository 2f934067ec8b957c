#include "petkin/storage.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "petkin/error.hpp"

namespace petkin {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char *kMetaFile = "meta.json";
constexpr const char *kDataFile = "data.f32";

std::uint32_t byteswap32(std::uint32_t v) {
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
}

void to_little_endian(std::vector<std::uint32_t> &words) {
    if constexpr (std::endian::native == std::endian::big)
        for (auto &w : words)
            w = byteswap32(w);
}

VolumeKind kind_from_string(const std::string &s) {
    if (s == "dynamic") return VolumeKind::Dynamic;
    if (s == "maps") return VolumeKind::Maps;
    if (s == "labels") return VolumeKind::Labels;
    if (s == "scalar") return VolumeKind::Scalar;
    throw ValidationError("unknown volume kind '" + s + "'");
}

void ensure_dir(const fs::path &dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw ValidationError("cannot create directory " + dir.string());
}

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

} // namespace

std::string_view to_string(VolumeKind k) {
    switch (k) {
    case VolumeKind::Dynamic: return "dynamic";
    case VolumeKind::Maps: return "maps";
    case VolumeKind::Labels: return "labels";
    case VolumeKind::Scalar: return "scalar";
    }
    return "unknown";
}

void VolumeHeader::validate() const {
    for (std::size_t d : dims)
        if (d == 0)
            throw ValidationError("volume dims must be positive");
    switch (kind) {
    case VolumeKind::Dynamic:
        if (!schedule)
            throw ValidationError("dynamic volume requires a frame schedule");
        if (schedule->size() != dims[0]) {
            std::ostringstream msg;
            msg << "frame schedule has " << schedule->size() << " frames but the t dimension is " << dims[0];
            throw ValidationError(msg.str());
        }
        break;
    case VolumeKind::Maps:
        if (dims[0] != kChannelNames.size() || channels.size() != kChannelNames.size())
            throw ValidationError("parameter maps need exactly 4 channels");
        for (std::size_t c = 0; c < kChannelNames.size(); ++c)
            if (channels[c] != kChannelNames[c])
                throw ValidationError("parameter map channels must be ordered K1, k2, k3, Vb");
        break;
    case VolumeKind::Labels:
    case VolumeKind::Scalar:
        if (dims[0] != 1)
            throw ValidationError(std::string(to_string(kind)) + " volume needs a leading dimension of 1");
        break;
    }
}

void write_text_file(const fs::path &path, std::string_view text) {
    if (path.has_parent_path())
        ensure_dir(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw ValidationError("cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out)
        throw ValidationError("failed writing " + path.string());
}

std::string read_text_file(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ValidationError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_volume(const fs::path &dir, const VolumeHeader &header, std::span<const float> data) {
    header.validate();
    if (data.size() != header.count()) {
        std::ostringstream msg;
        msg << "volume payload has " << data.size() << " values, dims require " << header.count();
        throw ValidationError(msg.str());
    }
    json meta;
    meta["magic"] = kVolumeMagic;
    meta["kind"] = to_string(header.kind);
    meta["dims"] = header.dims;
    meta["dtype"] = "float32";
    meta["endianness"] = "little";
    meta["units"] = header.units;
    if (!header.channels.empty())
        meta["channels"] = header.channels;
    if (header.schedule) {
        meta["frame_start_s"] = header.schedule->starts();
        meta["frame_duration_s"] = header.schedule->durations();
    }
    ensure_dir(dir);
    write_text_file(dir / kMetaFile, meta.dump(2) + "\n");

    std::vector<std::uint32_t> words(data.size());
    std::memcpy(words.data(), data.data(), data.size() * sizeof(float));
    to_little_endian(words);
    std::ofstream out(dir / kDataFile, std::ios::binary | std::ios::trunc);
    if (!out)
        throw ValidationError("cannot write " + (dir / kDataFile).string());
    out.write(reinterpret_cast<const char *>(words.data()), static_cast<std::streamsize>(words.size() * 4));
    if (!out)
        throw ValidationError("failed writing " + (dir / kDataFile).string());
}

VolumeFile read_volume(const fs::path &dir) {
    json meta;
    try {
        meta = json::parse(read_text_file(dir / kMetaFile));
    } catch (const json::exception &e) {
        throw ValidationError("malformed " + (dir / kMetaFile).string() + ": " + e.what());
    }
    VolumeFile vf;
    try {
        if (meta.value("magic", std::string{}) != kVolumeMagic)
            throw ValidationError("not a PETKIN1 volume: " + dir.string());
        if (meta.value("endianness", std::string{"little"}) != "little")
            throw ValidationError("unsupported endianness in " + dir.string());
        if (meta.value("dtype", std::string{"float32"}) != "float32")
            throw ValidationError("unsupported dtype in " + dir.string());
        VolumeHeader &h = vf.header;
        h.kind = kind_from_string(meta.at("kind").get<std::string>());
        const auto dims = meta.at("dims").get<std::vector<std::size_t>>();
        if (dims.size() != 4)
            throw ValidationError("volume dims must have 4 entries");
        std::copy(dims.begin(), dims.end(), h.dims.begin());
        h.units = meta.value("units", std::string{});
        if (meta.contains("channels"))
            h.channels = meta["channels"].get<std::vector<std::string>>();
        if (meta.contains("frame_start_s") || meta.contains("frame_duration_s"))
            h.schedule = FrameSchedule(meta.at("frame_start_s").get<std::vector<double>>(),
                                       meta.at("frame_duration_s").get<std::vector<double>>());
        h.validate();
    } catch (const json::exception &e) {
        throw ValidationError("invalid volume header in " + dir.string() + ": " + e.what());
    }

    const fs::path data_path = dir / kDataFile;
    std::error_code ec;
    const auto bytes = fs::file_size(data_path, ec);
    if (ec)
        throw ValidationError("cannot read " + data_path.string());
    const std::uintmax_t expected = static_cast<std::uintmax_t>(vf.header.count()) * 4;
    if (bytes != expected) {
        std::ostringstream msg;
        msg << "truncated or oversized payload " << data_path.string() << ": expected " << expected << " bytes, found "
            << bytes;
        throw ValidationError(msg.str());
    }
    std::vector<std::uint32_t> words(vf.header.count());
    std::ifstream in(data_path, std::ios::binary);
    in.read(reinterpret_cast<char *>(words.data()), static_cast<std::streamsize>(expected));
    if (!in)
        throw ValidationError("failed reading " + data_path.string());
    to_little_endian(words);
    vf.data.resize(words.size());
    std::memcpy(vf.data.data(), words.data(), words.size() * 4);
    for (std::size_t i = 0; i < vf.data.size(); ++i)
        if (!std::isfinite(vf.data[i])) {
            std::ostringstream msg;
            msg << "non-finite value at element " << i << " of " << data_path.string();
            throw ValidationError(msg.str());
        }
    return vf;
}

void write_dynamic(const fs::path &dir, const DynamicImage &img) {
    VolumeHeader h;
    h.kind = VolumeKind::Dynamic;
    h.dims = {img.frames(), img.dims.z, img.dims.y, img.dims.x};
    h.schedule = img.schedule;
    h.units = "kBq/mL";
    const std::vector<float> data(img.values.begin(), img.values.end());
    write_volume(dir, h, data);
}

DynamicImage read_dynamic(const fs::path &dir) {
    VolumeFile vf = read_volume(dir);
    if (vf.header.kind != VolumeKind::Dynamic)
        throw ValidationError(dir.string() + " is not a dynamic volume");
    DynamicImage img(*vf.header.schedule, vf.header.spatial());
    img.values.assign(vf.data.begin(), vf.data.end());
    return img;
}

void write_maps(const fs::path &dir, const ParametricMaps &maps) {
    VolumeHeader h;
    h.kind = VolumeKind::Maps;
    h.dims = {4, maps.dims.z, maps.dims.y, maps.dims.x};
    h.channels.assign(kChannelNames.begin(), kChannelNames.end());
    h.units = "K1: mL/min/mL; k2, k3: 1/min; Vb: fraction";
    std::vector<float> data;
    data.reserve(4 * maps.voxels());
    for (const auto &c : maps.channels)
        data.insert(data.end(), c.begin(), c.end());
    write_volume(dir, h, data);
}

ParametricMaps read_maps(const fs::path &dir) {
    VolumeFile vf = read_volume(dir);
    if (vf.header.kind != VolumeKind::Maps)
        throw ValidationError(dir.string() + " is not a parameter-map volume");
    ParametricMaps maps(vf.header.spatial());
    const std::size_t n = maps.voxels();
    for (std::size_t c = 0; c < 4; ++c)
        maps.channels[c].assign(vf.data.begin() + static_cast<std::ptrdiff_t>(c * n),
                                vf.data.begin() + static_cast<std::ptrdiff_t>((c + 1) * n));
    return maps;
}

void write_labels(const fs::path &dir, Dims3 dims, std::span<const std::int32_t> labels) {
    VolumeHeader h;
    h.kind = VolumeKind::Labels;
    h.dims = {1, dims.z, dims.y, dims.x};
    h.units = "label";
    const std::vector<float> data(labels.begin(), labels.end());
    write_volume(dir, h, data);
}

LabelVolume read_labels(const fs::path &dir) {
    VolumeFile vf = read_volume(dir);
    if (vf.header.kind != VolumeKind::Labels)
        throw ValidationError(dir.string() + " is not a label volume");
    LabelVolume lv;
    lv.dims = vf.header.spatial();
    lv.labels.reserve(vf.data.size());
    for (float f : vf.data) {
        if (f != std::round(f))
            throw ValidationError("label volume contains non-integer values: " + dir.string());
        lv.labels.push_back(static_cast<std::int32_t>(f));
    }
    return lv;
}

void write_scalar(const fs::path &dir, std::string_view name, std::string_view units, Dims3 dims,
                  std::span<const double> values) {
    VolumeHeader h;
    h.kind = VolumeKind::Scalar;
    h.dims = {1, dims.z, dims.y, dims.x};
    h.channels = {std::string(name)};
    h.units = std::string(units);
    const std::vector<float> data(values.begin(), values.end());
    write_volume(dir, h, data);
}

void write_aif_csv(const fs::path &path, const SampledCurve &c) {
    std::string text = "time_s,value_kbq_ml\n";
    for (std::size_t i = 0; i < c.size(); ++i)
        text += format_number(c.times()[i]) + "," + format_number(c.values()[i]) + "\n";
    write_text_file(path, text);
}

SampledCurve read_aif_csv(const fs::path &path) {
    std::istringstream in(read_text_file(path));
    std::string line;
    if (!std::getline(in, line))
        throw ValidationError("empty AIF file " + path.string());
    if (!line.empty() && line.back() == '\r')
        line.pop_back();
    if (line != "time_s,value_kbq_ml")
        throw ValidationError("AIF file " + path.string() + " must start with header time_s,value_kbq_ml");
    std::vector<double> t, v;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        const auto comma = line.find(',');
        try {
            if (comma == std::string::npos)
                throw std::invalid_argument("missing comma");
            std::size_t used = 0;
            const double tv = std::stod(line.substr(0, comma), &used);
            const std::string rest = line.substr(comma + 1);
            std::size_t used2 = 0;
            const double vv = std::stod(rest, &used2);
            if (used2 != rest.size())
                throw std::invalid_argument("trailing characters");
            t.push_back(tv);
            v.push_back(vv);
        } catch (const std::exception &) {
            std::ostringstream msg;
            msg << "malformed AIF row " << row << " in " << path.string();
            throw ValidationError(msg.str());
        }
    }
    return SampledCurve(std::move(t), std::move(v));
}

} // namespace petkin
