#pragma once

// OBJ / PLY ingestion and binary PLY output for point clouds.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "mmrecon/geometry.hpp"

namespace mmrecon {

namespace detail {

enum class PlyFormat { Ascii, BinaryLittle, BinaryBig };

struct PlyProperty {
  std::string name;
  std::string type;        // scalar type, or list item type
  std::string count_type;  // non-empty for list properties
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

inline std::size_t ply_type_size(const std::string& t) {
  if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
  if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
  if (t == "int" || t == "uint" || t == "float" || t == "int32" || t == "uint32" || t == "float32") return 4;
  if (t == "double" || t == "float64") return 8;
  fail(ErrorCode::ParseError, "unknown PLY type '" + t + "'");
}

template <typename T>
T load_bytes(const char* p, bool swap) {
  T v;
  char buf[sizeof(T)];
  std::memcpy(buf, p, sizeof(T));
  if (swap) std::reverse(buf, buf + sizeof(T));
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

/// Cursor over a binary PLY body.
class PlyBinaryReader {
 public:
  PlyBinaryReader(std::string data, bool big_endian)
      : data_(std::move(data)), swap_(big_endian != (std::endian::native == std::endian::big)) {}

  double read(const std::string& t) {
    const std::size_t n = ply_type_size(t);
    if (pos_ + n > data_.size()) fail(ErrorCode::ParseError, "truncated PLY body");
    const char* p = data_.data() + pos_;
    pos_ += n;
    if (t == "char" || t == "int8") return load_bytes<std::int8_t>(p, swap_);
    if (t == "uchar" || t == "uint8") return load_bytes<std::uint8_t>(p, swap_);
    if (t == "short" || t == "int16") return load_bytes<std::int16_t>(p, swap_);
    if (t == "ushort" || t == "uint16") return load_bytes<std::uint16_t>(p, swap_);
    if (t == "int" || t == "int32") return load_bytes<std::int32_t>(p, swap_);
    if (t == "uint" || t == "uint32") return load_bytes<std::uint32_t>(p, swap_);
    if (t == "float" || t == "float32") return load_bytes<float>(p, swap_);
    return load_bytes<double>(p, swap_);
  }

 private:
  std::string data_;
  std::size_t pos_ = 0;
  bool swap_;
};

/// Parsed PLY content: per element, per item, the flattened property values.
struct PlyData {
  std::vector<PlyElement> elements;
  // values[e][i] = concatenated values of item i of element e (lists inlined after their count)
  std::vector<std::vector<std::vector<double>>> values;

  const PlyElement* find(const std::string& name, std::size_t* index = nullptr) const {
    for (std::size_t e = 0; e < elements.size(); ++e) {
      if (elements[e].name == name) {
        if (index) *index = e;
        return &elements[e];
      }
    }
    return nullptr;
  }
};

inline PlyData read_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) fail(ErrorCode::ParseError, path.string() + ": missing 'ply' magic");

  PlyData ply;
  PlyFormat format = PlyFormat::Ascii;
  bool have_format = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "format") {
      std::string f;
      ls >> f;
      if (f == "ascii") format = PlyFormat::Ascii;
      else if (f == "binary_little_endian") format = PlyFormat::BinaryLittle;
      else if (f == "binary_big_endian") format = PlyFormat::BinaryBig;
      else fail(ErrorCode::ParseError, "unknown PLY format '" + f + "'");
      have_format = true;
    } else if (word == "element") {
      PlyElement el;
      long long count = -1;
      ls >> el.name >> count;
      if (count < 0) fail(ErrorCode::ParseError, "bad element line: " + line);
      el.count = static_cast<std::size_t>(count);
      ply.elements.push_back(el);
    } else if (word == "property") {
      if (ply.elements.empty()) fail(ErrorCode::ParseError, "property before element");
      PlyProperty prop;
      std::string t;
      ls >> t;
      if (t == "list") {
        ls >> prop.count_type >> prop.type >> prop.name;
        ply_type_size(prop.count_type);
      } else {
        prop.type = t;
        ls >> prop.name;
      }
      ply_type_size(prop.type);
      if (prop.name.empty()) fail(ErrorCode::ParseError, "bad property line: " + line);
      ply.elements.back().properties.push_back(prop);
    } else if (word == "end_header") {
      break;
    } else if (word == "comment" || word == "obj_info" || word.empty()) {
      continue;
    } else {
      fail(ErrorCode::ParseError, "unexpected PLY header line: " + line);
    }
  }
  if (!have_format) fail(ErrorCode::ParseError, path.string() + ": missing format line");

  ply.values.resize(ply.elements.size());
  if (format == PlyFormat::Ascii) {
    for (std::size_t e = 0; e < ply.elements.size(); ++e) {
      const auto& el = ply.elements[e];
      ply.values[e].resize(el.count);
      for (std::size_t i = 0; i < el.count; ++i) {
        auto& item = ply.values[e][i];
        for (const auto& prop : el.properties) {
          double v;
          if (!(in >> v)) fail(ErrorCode::ParseError, "truncated ASCII PLY body");
          item.push_back(v);
          if (!prop.count_type.empty()) {
            if (v < 0) fail(ErrorCode::ParseError, "negative list length");
            for (long long k = 0; k < static_cast<long long>(v); ++k) {
              double x;
              if (!(in >> x)) fail(ErrorCode::ParseError, "truncated ASCII PLY list");
              item.push_back(x);
            }
          }
        }
      }
    }
  } else {
    std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    PlyBinaryReader reader(std::move(body), format == PlyFormat::BinaryBig);
    for (std::size_t e = 0; e < ply.elements.size(); ++e) {
      const auto& el = ply.elements[e];
      ply.values[e].resize(el.count);
      for (std::size_t i = 0; i < el.count; ++i) {
        auto& item = ply.values[e][i];
        for (const auto& prop : el.properties) {
          if (prop.count_type.empty()) {
            item.push_back(reader.read(prop.type));
          } else {
            const double len = reader.read(prop.count_type);
            if (len < 0) fail(ErrorCode::ParseError, "negative list length");
            item.push_back(len);
            for (long long k = 0; k < static_cast<long long>(len); ++k) item.push_back(reader.read(prop.type));
          }
        }
      }
    }
  }
  return ply;
}

/// Position of a scalar property within an item, or -1. Only valid before any list property.
inline int scalar_offset(const PlyElement& el, const std::string& name) {
  int offset = 0;
  for (const auto& p : el.properties) {
    if (!p.count_type.empty()) return -1;
    if (p.name == name) return offset;
    ++offset;
  }
  return -1;
}

inline bool is_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[3] = {0, 0, 0};
  in.read(magic, 3);
  return in.gcount() == 3 && std::string(magic, 3) == "ply";
}

inline TriangleMesh read_mesh_ply(const std::filesystem::path& path) {
  const PlyData ply = read_ply(path);
  std::size_t ve = 0, fe = 0;
  const PlyElement* vertex = ply.find("vertex", &ve);
  const PlyElement* face = ply.find("face", &fe);
  if (!vertex) fail(ErrorCode::ParseError, path.string() + ": no vertex element");
  const int ox = scalar_offset(*vertex, "x"), oy = scalar_offset(*vertex, "y"), oz = scalar_offset(*vertex, "z");
  if (ox < 0 || oy < 0 || oz < 0) fail(ErrorCode::ParseError, path.string() + ": vertex lacks x/y/z");

  TriangleMesh mesh;
  for (const auto& item : ply.values[ve]) mesh.vertices.emplace_back(item[ox], item[oy], item[oz]);
  if (face) {
    // first list property holds the indices (vertex_indices / vertex_index)
    int list_at = -1, offset = 0;
    for (const auto& p : face->properties) {
      if (!p.count_type.empty()) {
        list_at = offset;
        break;
      }
      ++offset;
    }
    if (list_at < 0) fail(ErrorCode::ParseError, path.string() + ": face element has no index list");
    for (const auto& item : ply.values[fe]) {
      const auto len = static_cast<std::size_t>(item[list_at]);
      if (len < 3) continue;
      for (std::size_t k = 1; k + 1 < len; ++k) {
        const double a = item[list_at + 1], b = item[list_at + 1 + k], c = item[list_at + 2 + k];
        const auto nv = static_cast<double>(mesh.vertices.size());
        if (a < 0 || b < 0 || c < 0 || a >= nv || b >= nv || c >= nv) {
          fail(ErrorCode::ParseError, path.string() + ": face index out of range");
        }
        mesh.faces.push_back({static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(c)});
      }
    }
  }
  return mesh;
}

inline TriangleMesh parse_obj(std::istream& in, const std::string& label) {
  TriangleMesh mesh;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) fail(ErrorCode::ParseError, label + ":" + std::to_string(lineno) + ": bad vertex");
      mesh.vertices.emplace_back(x, y, z);
    } else if (tag == "f") {
      std::vector<std::uint32_t> idx;
      std::string tok;
      while (ls >> tok) {
        const std::string head = tok.substr(0, tok.find('/'));
        long long v = 0;
        try {
          std::size_t used = 0;
          v = std::stoll(head, &used);
          if (used != head.size()) throw std::invalid_argument(head);
        } catch (const std::exception&) {
          fail(ErrorCode::ParseError, label + ":" + std::to_string(lineno) + ": bad face index '" + tok + "'");
        }
        const auto nv = static_cast<long long>(mesh.vertices.size());
        const long long resolved = v < 0 ? nv + v : v - 1;
        if (v == 0 || resolved < 0 || resolved >= nv) {
          fail(ErrorCode::ParseError, label + ":" + std::to_string(lineno) + ": face index out of range");
        }
        idx.push_back(static_cast<std::uint32_t>(resolved));
      }
      if (idx.size() < 3) fail(ErrorCode::ParseError, label + ":" + std::to_string(lineno) + ": face needs 3 indices");
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) mesh.faces.push_back({idx[0], idx[k], idx[k + 1]});
    }
    // vt, vn, g, o, s, usemtl, mtllib: ignored
  }
  return mesh;
}

}  // namespace detail

/// Merges vertices closer than `tolerance` and drops zero-area or index-repeating faces.
inline TriangleMesh clean_mesh(const TriangleMesh& raw, double tolerance = 1e-9) {
  TriangleMesh mesh;
  std::vector<std::uint32_t> remap(raw.vertices.size());
  using Key = std::tuple<long long, long long, long long>;
  std::map<Key, std::vector<std::uint32_t>> cells;
  const auto key_of = [&](const Vec3& p) {
    return Key{static_cast<long long>(std::floor(p.x() / tolerance)), static_cast<long long>(std::floor(p.y() / tolerance)),
               static_cast<long long>(std::floor(p.z() / tolerance))};
  };
  for (std::size_t i = 0; i < raw.vertices.size(); ++i) {
    const Vec3& p = raw.vertices[i];
    if (!is_finite(p)) fail(ErrorCode::ParseError, "non-finite vertex coordinate");
    const auto [kx, ky, kz] = key_of(p);
    std::optional<std::uint32_t> match;
    for (long long dx = -1; dx <= 1 && !match; ++dx) {
      for (long long dy = -1; dy <= 1 && !match; ++dy) {
        for (long long dz = -1; dz <= 1 && !match; ++dz) {
          auto it = cells.find(Key{kx + dx, ky + dy, kz + dz});
          if (it == cells.end()) continue;
          for (std::uint32_t j : it->second) {
            if ((mesh.vertices[j] - p).norm() <= tolerance) {
              match = j;
              break;
            }
          }
        }
      }
    }
    if (match) {
      remap[i] = *match;
    } else {
      remap[i] = static_cast<std::uint32_t>(mesh.vertices.size());
      cells[Key{kx, ky, kz}].push_back(remap[i]);
      mesh.vertices.push_back(p);
    }
  }

  const double diag = bounding_diameter(mesh.vertices);
  const double min_area = 1e-12 * diag * diag;
  for (const auto& f : raw.faces) {
    const std::array<std::uint32_t, 3> t{remap[f[0]], remap[f[1]], remap[f[2]]};
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) continue;
    const double twice_area =
        (mesh.vertices[t[1]] - mesh.vertices[t[0]]).cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]).norm();
    if (!(0.5 * twice_area > min_area)) continue;
    mesh.faces.push_back(t);
  }
  // drop vertices no longer referenced
  std::vector<std::int64_t> used(mesh.vertices.size(), -1);
  TriangleMesh compact;
  for (auto& f : mesh.faces) {
    for (auto& v : f) {
      if (used[v] < 0) {
        used[v] = static_cast<std::int64_t>(compact.vertices.size());
        compact.vertices.push_back(mesh.vertices[v]);
      }
      v = static_cast<std::uint32_t>(used[v]);
    }
  }
  compact.faces = std::move(mesh.faces);
  return compact;
}

/// Loads an ASCII OBJ or ASCII/binary PLY mesh and cleans it.
inline TriangleMesh load_mesh(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorCode::IoError, "no such file: " + path.string());
  TriangleMesh raw;
  if (detail::is_ply(path)) {
    raw = detail::read_mesh_ply(path);
  } else {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
    raw = detail::parse_obj(in, path.string());
  }
  TriangleMesh mesh = clean_mesh(raw);
  if (mesh.faces.empty()) fail(ErrorCode::EmptyMesh, path.string() + ": no valid faces");
  return mesh;
}

inline void write_mesh_obj(const TriangleMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out.precision(17);
  for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& f : mesh.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  if (!out) fail(ErrorCode::IoError, "write failed: " + path.string());
}

/// Binary little-endian PLY, float32 x,y,z[,nx,ny,nz].
inline std::string encode_cloud_ply(const OrientedPointCloud& pc) {
  static_assert(std::endian::native == std::endian::little, "PLY writer assumes a little-endian host");
  const bool normals = pc.has_normals();
  std::ostringstream out;
  out << "ply\nformat binary_little_endian 1.0\nelement vertex " << pc.size()
      << "\nproperty float x\nproperty float y\nproperty float z\n";
  if (normals) out << "property float nx\nproperty float ny\nproperty float nz\n";
  out << "end_header\n";
  std::string body;
  body.reserve(pc.size() * (normals ? 24 : 12));
  const auto put = [&](double v) {
    const auto f = static_cast<float>(v);
    body.append(reinterpret_cast<const char*>(&f), sizeof f);
  };
  for (std::size_t i = 0; i < pc.size(); ++i) {
    put(pc.points[i].x());
    put(pc.points[i].y());
    put(pc.points[i].z());
    if (normals) {
      put(pc.normals[i].x());
      put(pc.normals[i].y());
      put(pc.normals[i].z());
    }
  }
  return out.str() + body;
}

inline void write_cloud_ply(const OrientedPointCloud& pc, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  const std::string bytes = encode_cloud_ply(pc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::IoError, "write failed: " + path.string());
}

/// Reads any PLY vertex element; normals are kept only when all three are present,
/// and are renormalized (float storage loses the unit-norm guarantee at ~1e-7).
inline OrientedPointCloud read_cloud_ply(const std::filesystem::path& path) {
  const detail::PlyData ply = detail::read_ply(path);
  std::size_t ve = 0;
  const detail::PlyElement* vertex = ply.find("vertex", &ve);
  if (!vertex) fail(ErrorCode::ParseError, path.string() + ": no vertex element");
  const int ox = detail::scalar_offset(*vertex, "x"), oy = detail::scalar_offset(*vertex, "y"),
            oz = detail::scalar_offset(*vertex, "z");
  if (ox < 0 || oy < 0 || oz < 0) fail(ErrorCode::ParseError, path.string() + ": vertex lacks x/y/z");
  const int nx = detail::scalar_offset(*vertex, "nx"), ny = detail::scalar_offset(*vertex, "ny"),
            nz = detail::scalar_offset(*vertex, "nz");
  const bool normals = nx >= 0 && ny >= 0 && nz >= 0;

  OrientedPointCloud pc;
  for (const auto& item : ply.values[ve]) {
    const Vec3 p(item[ox], item[oy], item[oz]);
    if (!is_finite(p)) fail(ErrorCode::ParseError, path.string() + ": non-finite coordinate");
    pc.points.push_back(p);
    if (normals) {
      const Vec3 n(item[nx], item[ny], item[nz]);
      const double len = n.norm();
      if (!(len > 0.0) || !std::isfinite(len)) fail(ErrorCode::ParseError, path.string() + ": zero normal");
      pc.normals.push_back(n / len);
    }
  }
  return pc;
}

}  // namespace mmrecon
