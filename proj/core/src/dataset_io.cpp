#include "remul/dataset_io.hpp"

#include <fstream>
#include <string>

#include "json.hpp"
#include "remul/errors.hpp"

namespace remul {

namespace {

using nlohmann::json;

json vec3_list(const std::vector<Vec3>& v) {
  json out = json::array();
  for (const auto& p : v) out.push_back({p[0], p[1], p[2]});
  return out;
}

std::vector<Vec3> parse_vec3_list(const json& j, const char* key) {
  if (!j.is_array()) throw ValidationError(std::string("'") + key + "' must be an array");
  std::vector<Vec3> out;
  out.reserve(j.size());
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 3) throw ValidationError(std::string("'") + key + "' entries must be [x,y,z]");
    out.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
  }
  return out;
}

PointSample parse_record(const std::string& line) {
  const json j = json::parse(line);
  if (!j.is_object()) throw ValidationError("record is not an object");
  PointSample s;
  s.positions = parse_vec3_list(j.at("positions"), "positions");
  s.velocities = parse_vec3_list(j.at("velocities"), "velocities");
  s.target_positions = parse_vec3_list(j.at("targets"), "targets");
  if (j.contains("scalars")) {
    const auto& rows = j.at("scalars");
    s.scalar_width = rows.empty() ? 0 : rows[0].size();
    for (const auto& row : rows) {
      if (row.size() != s.scalar_width) throw ValidationError("ragged 'scalars'");
      for (const auto& v : row) s.scalars.push_back(v.get<double>());
    }
  } else if (j.contains("masses")) {
    s.scalar_width = 1;
    s.scalars = j.at("masses").get<std::vector<double>>();
  }
  s.validate();
  return s;
}

}  // namespace

void write_dataset(std::ostream& out, std::span<const PointSample> samples) {
  for (const auto& s : samples) {
    json j;
    j["positions"] = vec3_list(s.positions);
    j["velocities"] = vec3_list(s.velocities);
    if (s.scalar_width == 1) {
      j["masses"] = s.scalars;
    } else if (s.scalar_width > 1) {
      json rows = json::array();
      for (std::size_t i = 0; i < s.node_count(); ++i) {
        rows.push_back(std::vector<double>(s.scalars.begin() + static_cast<std::ptrdiff_t>(i * s.scalar_width),
                                           s.scalars.begin() + static_cast<std::ptrdiff_t>((i + 1) * s.scalar_width)));
      }
      j["scalars"] = std::move(rows);
    }
    j["targets"] = vec3_list(s.target_positions);
    out << j.dump() << '\n';
  }
}

void write_dataset(const std::filesystem::path& path, std::span<const PointSample> samples) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  write_dataset(out, samples);
  if (!out) throw ValidationError("write failed for " + path.string());
}

std::vector<PointSample> read_dataset(std::istream& in) {
  std::vector<PointSample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_record(line));
    } catch (const json::exception& e) {
      throw ValidationError("line " + std::to_string(lineno) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<PointSample> read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset " + path.string());
  return read_dataset(in);
}

}  // namespace remul
