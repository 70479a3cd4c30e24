#include "airfuse/ply.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace airfuse {
namespace {

enum class ScalarType { int8, uint8, int16, uint16, int32, uint32, float32, float64 };

ScalarType parse_type(const std::string& name, const std::string& path, std::size_t line) {
    static const std::map<std::string, ScalarType> types = {
        {"char", ScalarType::int8},     {"int8", ScalarType::int8},       {"uchar", ScalarType::uint8},
        {"uint8", ScalarType::uint8},   {"short", ScalarType::int16},     {"int16", ScalarType::int16},
        {"ushort", ScalarType::uint16}, {"uint16", ScalarType::uint16},   {"int", ScalarType::int32},
        {"int32", ScalarType::int32},   {"uint", ScalarType::uint32},     {"uint32", ScalarType::uint32},
        {"float", ScalarType::float32}, {"float32", ScalarType::float32}, {"double", ScalarType::float64},
        {"float64", ScalarType::float64}};
    auto it = types.find(name);
    if (it == types.end())
        throw ParseError(path, line, "unknown property type '" + name + "'");
    return it->second;
}

std::size_t type_size(ScalarType t) {
    switch (t) {
    case ScalarType::int8:
    case ScalarType::uint8: return 1;
    case ScalarType::int16:
    case ScalarType::uint16: return 2;
    case ScalarType::int32:
    case ScalarType::uint32:
    case ScalarType::float32: return 4;
    case ScalarType::float64: return 8;
    }
    return 0;
}

struct Property {
    std::string name;
    ScalarType type;
    bool is_list = false;
    ScalarType count_type = ScalarType::uint8;
};

struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<Property> properties;
};

enum class Encoding { ascii, binary_le, binary_be };

/// Decoded element data: scalar columns and integer list columns by property name.
struct ElementData {
    std::map<std::string, std::vector<double>> scalars;
    std::map<std::string, std::vector<std::vector<std::uint32_t>>> lists;

    bool has(const std::string& name) const { return scalars.count(name) != 0; }
};

class PlyReader {
public:
    explicit PlyReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_)
            throw Error("cannot open '" + path + "'");
        read_header();
    }

    std::map<std::string, ElementData> read_all() {
        std::map<std::string, ElementData> out;
        for (const auto& el : elements_)
            out[el.name] = read_element(el);
        return out;
    }

private:
    void read_header() {
        std::string line;
        if (!std::getline(in_, line) || trim(line) != "ply")
            throw ParseError(path_, 1, "missing 'ply' magic");
        std::size_t lineno = 1;
        bool have_format = false;
        while (std::getline(in_, line)) {
            ++lineno;
            std::istringstream ss(trim(line));
            std::string key;
            ss >> key;
            if (key.empty() || key == "comment" || key == "obj_info")
                continue;
            if (key == "format") {
                std::string fmt, version;
                ss >> fmt >> version;
                if (fmt == "ascii")
                    encoding_ = Encoding::ascii;
                else if (fmt == "binary_little_endian")
                    encoding_ = Encoding::binary_le;
                else if (fmt == "binary_big_endian")
                    encoding_ = Encoding::binary_be;
                else
                    throw ParseError(path_, lineno, "unsupported format '" + fmt + "'");
                have_format = true;
            } else if (key == "element") {
                Element el;
                long long count = -1;
                ss >> el.name >> count;
                if (el.name.empty() || count < 0)
                    throw ParseError(path_, lineno, "malformed element declaration");
                el.count = static_cast<std::size_t>(count);
                elements_.push_back(std::move(el));
            } else if (key == "property") {
                if (elements_.empty())
                    throw ParseError(path_, lineno, "property before any element");
                std::string type;
                ss >> type;
                Property prop;
                if (type == "list") {
                    std::string count_type, item_type;
                    ss >> count_type >> item_type >> prop.name;
                    prop.is_list = true;
                    prop.count_type = parse_type(count_type, path_, lineno);
                    prop.type = parse_type(item_type, path_, lineno);
                } else {
                    prop.type = parse_type(type, path_, lineno);
                    ss >> prop.name;
                }
                if (prop.name.empty())
                    throw ParseError(path_, lineno, "property without a name");
                elements_.back().properties.push_back(std::move(prop));
            } else if (key == "end_header") {
                if (!have_format)
                    throw ParseError(path_, lineno, "missing format line");
                header_lines_ = lineno;
                return;
            } else {
                throw ParseError(path_, lineno, "unexpected header keyword '" + key + "'");
            }
        }
        throw ParseError(path_, lineno, "missing end_header");
    }

    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos)
            return {};
        const auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }

    ElementData read_element(const Element& el) {
        ElementData data;
        for (const auto& p : el.properties) {
            if (p.is_list)
                data.lists[p.name].resize(el.count);
            else
                data.scalars[p.name].resize(el.count);
        }
        for (std::size_t r = 0; r < el.count; ++r) {
            if (encoding_ == Encoding::ascii)
                read_ascii_record(el, data, r);
            else
                read_binary_record(el, data, r);
        }
        return data;
    }

    void read_ascii_record(const Element& el, ElementData& data, std::size_t r) {
        std::string line;
        do {
            if (!std::getline(in_, line))
                throw ParseError(path_, header_lines_ + ascii_lines_ + 1,
                                 "unexpected end of file in element '" + el.name + "'");
            ++ascii_lines_;
        } while (trim(line).empty());
        const std::size_t lineno = header_lines_ + ascii_lines_;
        const char* cur = line.data();
        const char* end = line.data() + line.size();
        auto next = [&](double& v) {
            while (cur < end && (*cur == ' ' || *cur == '\t' || *cur == '\r'))
                ++cur;
            auto [ptr, ec] = std::from_chars(cur, end, v);
            if (ec != std::errc())
                throw ParseError(path_, lineno, "expected a number in element '" + el.name + "'");
            cur = ptr;
        };
        for (const auto& p : el.properties) {
            double v = 0.0;
            next(v);
            if (!p.is_list) {
                data.scalars[p.name][r] = v;
                continue;
            }
            if (v < 0 || v != std::floor(v))
                throw ParseError(path_, lineno, "invalid list length for '" + p.name + "'");
            auto& list = data.lists[p.name][r];
            list.resize(static_cast<std::size_t>(v));
            for (auto& item : list) {
                double x = 0.0;
                next(x);
                if (x < 0 || x != std::floor(x) || x > 4294967295.0)
                    throw ParseError(path_, lineno, "list '" + p.name + "' holds a non-index value");
                item = static_cast<std::uint32_t>(x);
            }
        }
    }

    double read_binary_scalar(ScalarType t, std::size_t record, const std::string& el) {
        unsigned char buf[8];
        const std::size_t n = type_size(t);
        if (!in_.read(reinterpret_cast<char*>(buf), static_cast<std::streamsize>(n)))
            throw ParseError(path_, record, "unexpected end of file in element '" + el + "'");
        const bool swap = (encoding_ == Encoding::binary_be) == (std::endian::native == std::endian::little);
        if (swap)
            std::reverse(buf, buf + n);
        switch (t) {
        case ScalarType::int8: return static_cast<double>(static_cast<std::int8_t>(buf[0]));
        case ScalarType::uint8: return static_cast<double>(buf[0]);
        case ScalarType::int16: return decode<std::int16_t>(buf);
        case ScalarType::uint16: return decode<std::uint16_t>(buf);
        case ScalarType::int32: return decode<std::int32_t>(buf);
        case ScalarType::uint32: return decode<std::uint32_t>(buf);
        case ScalarType::float32: return decode<float>(buf);
        case ScalarType::float64: return decode<double>(buf);
        }
        return 0.0;
    }

    template <typename T>
    static double decode(const unsigned char* buf) {
        T v;
        std::memcpy(&v, buf, sizeof(T));
        return static_cast<double>(v);
    }

    void read_binary_record(const Element& el, ElementData& data, std::size_t r) {
        for (const auto& p : el.properties) {
            if (!p.is_list) {
                data.scalars[p.name][r] = read_binary_scalar(p.type, r, el.name);
                continue;
            }
            const double n = read_binary_scalar(p.count_type, r, el.name);
            if (n < 0)
                throw ParseError(path_, r, "negative list length for '" + p.name + "'");
            auto& list = data.lists[p.name][r];
            list.resize(static_cast<std::size_t>(n));
            for (auto& item : list) {
                const double x = read_binary_scalar(p.type, r, el.name);
                if (x < 0)
                    throw ParseError(path_, r, "list '" + p.name + "' holds a negative index");
                item = static_cast<std::uint32_t>(x);
            }
        }
    }

    std::string path_;
    std::ifstream in_;
    Encoding encoding_ = Encoding::ascii;
    std::vector<Element> elements_;
    std::size_t header_lines_ = 0;
    std::size_t ascii_lines_ = 0;
};

class PlyWriter {
public:
    PlyWriter(const std::string& path, PlyFormat format)
        : path_(path), format_(format), out_(path, std::ios::binary | std::ios::trunc) {
        if (!out_)
            throw Error("cannot write '" + path + "'");
        out_.precision(17);
    }

    void header(const std::string& body) {
        out_ << "ply\nformat " << (format_ == PlyFormat::ascii ? "ascii" : "binary_little_endian")
             << " 1.0\n"
             << body << "end_header\n";
    }

    template <typename T>
    void put(T v) {
        if (format_ == PlyFormat::ascii) {
            if (!first_in_line_)
                out_ << ' ';
            if constexpr (sizeof(T) == 1)
                out_ << static_cast<unsigned>(v);
            else
                out_ << v;
            first_in_line_ = false;
        } else {
            static_assert(std::endian::native == std::endian::little);
            out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
        }
    }

    void end_record() {
        if (format_ == PlyFormat::ascii)
            out_ << '\n';
        first_in_line_ = true;
    }

    void close() {
        out_.close();
        if (!out_)
            throw Error("failed writing '" + path_ + "'");
    }

private:
    std::string path_;
    PlyFormat format_;
    std::ofstream out_;
    bool first_in_line_ = true;
};

const ElementData& require_element(const std::map<std::string, ElementData>& data, const std::string& name,
                                   const std::string& path) {
    auto it = data.find(name);
    if (it == data.end())
        throw ParseError(path, 0, "missing element '" + name + "'");
    return it->second;
}

}  // namespace

PointCloud load_point_cloud(const std::string& path, Source tag, const SensorSet& sensors) {
    PlyReader reader(path);
    const auto data = reader.read_all();
    const auto& vertex = require_element(data, "vertex", path);
    for (const char* axis : {"x", "y", "z"})
        if (!vertex.has(axis))
            throw ParseError(path, 0, std::string("vertex element lacks property '") + axis + "'");
    auto vis_it = vertex.lists.find("visibility");
    if (vis_it == vertex.lists.end())
        throw ParseError(path, 0, "vertex element lacks the 'visibility' list (lines of sight are required)");
    const auto& xs = vertex.scalars.at("x");
    const auto& ys = vertex.scalars.at("y");
    const auto& zs = vertex.scalars.at("z");
    const bool normals = vertex.has("nx") && vertex.has("ny") && vertex.has("nz");

    PointCloud cloud;
    cloud.reserve(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const auto& vis = vis_it->second[i];
        if (vis.empty())
            throw ParseError(path, i, "point has an empty visibility list");
        for (std::uint32_t s : vis)
            if (s >= sensors.size())
                throw ParseError(path, i,
                                 "sensor index out of range (" + std::to_string(s) + " >= " +
                                     std::to_string(sensors.size()) + ")");
        cloud.push_back(Point3(xs[i], ys[i], zs[i]), tag, vis);
        if (!cloud.points.back().allFinite())
            throw ParseError(path, i, "non-finite coordinate");
    }
    if (normals) {
        const auto& nx = vertex.scalars.at("nx");
        const auto& ny = vertex.scalars.at("ny");
        const auto& nz = vertex.scalars.at("nz");
        cloud.normals.resize(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) {
            Vec3 n(nx[i], ny[i], nz[i]);
            const double len = n.norm();
            cloud.normals[i] = len > 0.0 ? Vec3(n / len) : Vec3::Zero();
        }
    }
    return cloud;
}

void save_point_cloud(const std::string& path, const PointCloud& cloud, PlyFormat format) {
    PlyWriter w(path, format);
    std::string header = "element vertex " + std::to_string(cloud.size()) +
                         "\nproperty double x\nproperty double y\nproperty double z\n";
    if (cloud.has_normals())
        header += "property double nx\nproperty double ny\nproperty double nz\n";
    header += "property uchar source\nproperty list uint uint visibility\n";
    w.header(header);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        for (int k = 0; k < 3; ++k)
            w.put<double>(cloud.points[i][k]);
        if (cloud.has_normals())
            for (int k = 0; k < 3; ++k)
                w.put<double>(cloud.normals[i][k]);
        w.put<std::uint8_t>(static_cast<std::uint8_t>(cloud.source[i]));
        w.put<std::uint32_t>(static_cast<std::uint32_t>(cloud.visibility[i].size()));
        for (std::uint32_t s : cloud.visibility[i])
            w.put<std::uint32_t>(s);
        w.end_record();
    }
    w.close();
}

SensorSet load_sensors(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw Error("cannot open '" + path + "'");
    SensorSet sensors;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos || line[b] == '#')
            continue;
        std::istringstream ss(line);
        Point3 p;
        std::string extra;
        if (!(ss >> p.x() >> p.y() >> p.z()) || (ss >> extra))
            throw ParseError(path, lineno, "expected 'x y z'");
        if (!p.allFinite())
            throw ParseError(path, lineno, "non-finite sensor coordinate");
        sensors.positions.push_back(p);
    }
    return sensors;
}

void save_sensors(const std::string& path, const SensorSet& sensors) {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw Error("cannot write '" + path + "'");
    out.precision(17);
    for (const auto& p : sensors.positions)
        out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
    if (!out)
        throw Error("failed writing '" + path + "'");
}

TriangleMesh load_mesh(const std::string& path) {
    PlyReader reader(path);
    const auto data = reader.read_all();
    const auto& vertex = require_element(data, "vertex", path);
    for (const char* axis : {"x", "y", "z"})
        if (!vertex.has(axis))
            throw ParseError(path, 0, std::string("vertex element lacks property '") + axis + "'");
    TriangleMesh mesh;
    const auto& xs = vertex.scalars.at("x");
    const auto& ys = vertex.scalars.at("y");
    const auto& zs = vertex.scalars.at("z");
    const std::vector<double>* tags = vertex.has("source") ? &vertex.scalars.at("source") : nullptr;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mesh.vertices.emplace_back(xs[i], ys[i], zs[i]);
        mesh.source.push_back(tags && (*tags)[i] != 0.0 ? Source::street : Source::aerial);
    }
    auto face_it = data.find("face");
    if (face_it != data.end()) {
        const auto& lists = face_it->second.lists;
        auto idx = lists.find("vertex_indices");
        if (idx == lists.end())
            idx = lists.find("vertex_index");
        if (idx == lists.end())
            throw ParseError(path, 0, "face element lacks 'vertex_indices'");
        for (std::size_t f = 0; f < idx->second.size(); ++f) {
            const auto& poly = idx->second[f];
            if (poly.size() < 3)
                throw ParseError(path, f, "face with fewer than 3 vertices");
            for (auto v : poly)
                if (v >= mesh.vertices.size())
                    throw ParseError(path, f, "face references a missing vertex");
            for (std::size_t k = 1; k + 1 < poly.size(); ++k)
                mesh.triangles.push_back({poly[0], poly[k], poly[k + 1]});
        }
    }
    return mesh;
}

void save_mesh(const std::string& path, const TriangleMesh& mesh, PlyFormat format, bool colors) {
    PlyWriter w(path, format);
    std::string header = "element vertex " + std::to_string(mesh.vertex_count()) +
                         "\nproperty double x\nproperty double y\nproperty double z\nproperty uchar source\n";
    if (colors)
        header += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    header += "element face " + std::to_string(mesh.triangle_count()) + "\nproperty list uchar uint vertex_indices\n";
    w.header(header);
    for (std::size_t i = 0; i < mesh.vertex_count(); ++i) {
        for (int k = 0; k < 3; ++k)
            w.put<double>(mesh.vertices[i][k]);
        const bool street = mesh.source[i] == Source::street;
        w.put<std::uint8_t>(street ? 1 : 0);
        if (colors) {
            w.put<std::uint8_t>(street ? 255 : 200);
            w.put<std::uint8_t>(street ? 140 : 200);
            w.put<std::uint8_t>(street ? 0 : 200);
        }
        w.end_record();
    }
    for (const auto& tri : mesh.triangles) {
        w.put<std::uint8_t>(3);
        for (auto v : tri)
            w.put<std::uint32_t>(v);
        w.end_record();
    }
    w.close();
}

}  // namespace airfuse
