#include "shapedis/geometry/io.hpp"

#include "shapedis/common/error.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace shapedis::geometry {
namespace {

std::ofstream open_out(const std::filesystem::path& path, bool binary = false) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    if (!out) {
        throw InputError("cannot write " + path.string());
    }
    return out;
}

std::ifstream open_in(const std::filesystem::path& path, bool binary = false) {
    std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
    if (!in) {
        throw InputError("cannot read " + path.string());
    }
    return in;
}

TriangleMesh assemble(const std::vector<Vec3>& v, const std::vector<std::array<std::int32_t, 3>>& f,
                      const std::filesystem::path& path) {
    TriangleMesh m;
    m.vertices.resize(static_cast<Eigen::Index>(v.size()), 3);
    for (std::size_t i = 0; i < v.size(); ++i) m.vertices.row(static_cast<Eigen::Index>(i)) = v[i].transpose();
    m.faces.resize(static_cast<Eigen::Index>(f.size()), 3);
    for (std::size_t i = 0; i < f.size(); ++i) {
        for (int k = 0; k < 3; ++k) {
            if (f[i][k] < 0 || f[i][k] >= static_cast<std::int32_t>(v.size())) {
                throw FormatError(path.string() + ": face index out of range");
            }
            m.faces(static_cast<Eigen::Index>(i), k) = f[i][k];
        }
    }
    m.shape_id = path.stem().string();
    return m;
}

void put_u32(std::ostream& out, std::uint32_t v) {
    const std::array<char, 4> b{static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                                static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
    out.write(b.data(), 4);
}

std::uint32_t get_u32(const unsigned char* b) {
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh) {
    auto out = open_out(path);
    out << std::setprecision(9);
    for (Eigen::Index i = 0; i < mesh.vertices.rows(); ++i) {
        out << "v " << static_cast<float>(mesh.vertices(i, 0)) << ' ' << static_cast<float>(mesh.vertices(i, 1))
            << ' ' << static_cast<float>(mesh.vertices(i, 2)) << '\n';
    }
    for (Eigen::Index f = 0; f < mesh.faces.rows(); ++f) {
        out << "f " << mesh.faces(f, 0) + 1 << ' ' << mesh.faces(f, 1) + 1 << ' ' << mesh.faces(f, 2) + 1 << '\n';
    }
}

TriangleMesh read_obj(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::vector<Vec3> v;
    std::vector<std::array<std::int32_t, 3>> f;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "v") {
            Vec3 p;
            if (!(ss >> p.x() >> p.y() >> p.z())) throw FormatError(path.string() + ": bad vertex line");
            v.push_back(p);
        } else if (tag == "f") {
            std::vector<std::int32_t> idx;
            std::string tok;
            while (ss >> tok) {
                // Accept "i", "i/t", "i/t/n"; negative indices are relative.
                const auto slash = tok.find('/');
                long k = std::stol(tok.substr(0, slash));
                k = k < 0 ? static_cast<long>(v.size()) + k : k - 1;
                idx.push_back(static_cast<std::int32_t>(k));
            }
            if (idx.size() < 3) throw FormatError(path.string() + ": face with < 3 vertices");
            for (std::size_t k = 1; k + 1 < idx.size(); ++k) f.push_back({idx[0], idx[k], idx[k + 1]});
        }
    }
    return assemble(v, f, path);
}

void write_ply(const std::filesystem::path& path, const TriangleMesh& mesh) {
    auto out = open_out(path);
    out << "ply\nformat ascii 1.0\n"
        << "element vertex " << mesh.vertices.rows() << "\n"
        << "property float x\nproperty float y\nproperty float z\n"
        << "element face " << mesh.faces.rows() << "\n"
        << "property list uchar int vertex_indices\nend_header\n";
    out << std::setprecision(9);
    for (Eigen::Index i = 0; i < mesh.vertices.rows(); ++i) {
        out << static_cast<float>(mesh.vertices(i, 0)) << ' ' << static_cast<float>(mesh.vertices(i, 1)) << ' '
            << static_cast<float>(mesh.vertices(i, 2)) << '\n';
    }
    for (Eigen::Index f = 0; f < mesh.faces.rows(); ++f) {
        out << "3 " << mesh.faces(f, 0) << ' ' << mesh.faces(f, 1) << ' ' << mesh.faces(f, 2) << '\n';
    }
}

TriangleMesh read_ply(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::string line;
    std::getline(in, line);
    if (line.rfind("ply", 0) != 0) throw FormatError(path.string() + ": not a PLY file");
    long nv = -1, nf = -1;
    int vertex_props = 0;
    std::string current;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "format") {
            std::string fmt;
            ss >> fmt;
            if (fmt != "ascii") throw FormatError(path.string() + ": only ASCII PLY is supported");
        } else if (tag == "element") {
            long count = 0;
            ss >> current >> count;
            if (current == "vertex") nv = count;
            if (current == "face") nf = count;
        } else if (tag == "property" && current == "vertex") {
            ++vertex_props;
        } else if (tag == "end_header") {
            break;
        }
    }
    if (nv < 0 || nf < 0) throw FormatError(path.string() + ": missing vertex/face elements");
    std::vector<Vec3> v(static_cast<std::size_t>(nv));
    for (auto& p : v) {
        if (!std::getline(in, line)) throw FormatError(path.string() + ": truncated vertex list");
        std::istringstream ss(line);
        if (!(ss >> p.x() >> p.y() >> p.z())) throw FormatError(path.string() + ": bad vertex");
    }
    (void)vertex_props;
    std::vector<std::array<std::int32_t, 3>> f;
    for (long i = 0; i < nf; ++i) {
        if (!std::getline(in, line)) throw FormatError(path.string() + ": truncated face list");
        std::istringstream ss(line);
        int k = 0;
        ss >> k;
        std::vector<std::int32_t> idx(static_cast<std::size_t>(std::max(k, 0)));
        for (auto& x : idx) ss >> x;
        if (!ss || k < 3) throw FormatError(path.string() + ": bad face");
        for (std::size_t j = 1; j + 1 < idx.size(); ++j) f.push_back({idx[0], idx[j], idx[j + 1]});
    }
    return assemble(v, f, path);
}

TriangleMesh read_mesh(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".obj" || ext == ".OBJ") return read_obj(path);
    if (ext == ".ply" || ext == ".PLY") return read_ply(path);
    throw FormatError("unsupported mesh extension: " + ext);
}

void write_metadata(const std::filesystem::path& path, const std::vector<ShapeMeta>& metas) {
    auto out = open_out(path);
    out << "shape_id,age,diagnosis,split\n" << std::setprecision(17);
    for (const auto& m : metas) {
        out << m.shape_id << ',' << m.age << ',';
        if (m.diagnosis) out << *m.diagnosis;
        out << ',' << to_string(m.split) << '\n';
    }
}

std::vector<ShapeMeta> read_metadata(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line) || split_csv(line) != std::vector<std::string>{"shape_id", "age", "diagnosis", "split"}) {
        throw FormatError(path.string() + ": expected header shape_id,age,diagnosis,split");
    }
    std::vector<ShapeMeta> metas;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto cols = split_csv(line);
        if (cols.size() != 4) throw FormatError(path.string() + ": expected 4 columns: " + line);
        ShapeMeta m;
        m.shape_id = cols[0];
        try {
            m.age = std::stod(cols[1]);
            if (!cols[2].empty()) {
                m.diagnosis = std::stoi(cols[2]);
                if (*m.diagnosis != 0 && *m.diagnosis != 1) throw FormatError("diagnosis must be 0/1");
            }
        } catch (const std::logic_error&) {
            throw FormatError(path.string() + ": bad numeric field: " + line);
        }
        m.split = parse_split(cols[3]);
        metas.push_back(std::move(m));
    }
    normalize_ages(metas);
    return metas;
}

void write_sample_cache(const std::filesystem::path& path, const SampleSet& samples) {
    auto out = open_out(path, true);
    out.write("SDF1", 4);
    put_u32(out, static_cast<std::uint32_t>(samples.size()));
    put_u32(out, 0);
    put_u32(out, 0);
    for (Eigen::Index i = 0; i < samples.rows.rows(); ++i) {
        for (int k = 0; k < 4; ++k) put_u32(out, std::bit_cast<std::uint32_t>(samples.rows(i, k)));
    }
}

SampleSet read_sample_cache(const std::filesystem::path& path, std::string shape_id) {
    auto in = open_in(path, true);
    std::array<unsigned char, 16> header{};
    in.read(reinterpret_cast<char*>(header.data()), header.size());
    if (in.gcount() != 16 || std::memcmp(header.data(), "SDF1", 4) != 0) {
        throw FormatError(path.string() + ": not an SDF1 sample cache");
    }
    const std::uint32_t m = get_u32(header.data() + 4);
    std::vector<unsigned char> body(static_cast<std::size_t>(m) * 16);
    in.read(reinterpret_cast<char*>(body.data()), static_cast<std::streamsize>(body.size()));
    if (static_cast<std::size_t>(in.gcount()) != body.size()) {
        throw FormatError(path.string() + ": truncated sample cache");
    }
    SampleSet s;
    s.shape_id = shape_id.empty() ? path.stem().string() : std::move(shape_id);
    s.rows.resize(m, 4);
    for (std::uint32_t i = 0; i < m; ++i) {
        for (int k = 0; k < 4; ++k) {
            s.rows(i, k) = std::bit_cast<float>(get_u32(body.data() + 16 * i + 4 * k));
        }
    }
    return s;
}

}  // namespace shapedis::geometry
