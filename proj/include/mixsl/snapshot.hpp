#pragma once

// Field snapshot file:
//   bytes [0, data_offset)   UTF-8 JSON object on one line, right-padded with
//                            spaces and terminated by '\n' at data_offset-1
//   bytes [data_offset, ...) count little-endian IEEE-754 binary64 values in
//                            grid order (last axis fastest)
// data_offset is a multiple of 64.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mixsl/errors.hpp"
#include "mixsl/grid.hpp"

namespace mixsl {

struct Snapshot {
  std::string name;
  double time = 0.0;
  Field field;
  nlohmann::json meta = nlohmann::json::object();
};

namespace detail {

inline nlohmann::json grid_to_json(const Grid& g) {
  auto axes = nlohmann::json::array();
  for (const auto& a : g.axes()) {
    axes.push_back({{"name", a.name()},
                    {"min", a.min()},
                    {"max", a.max()},
                    {"n", a.n()},
                    {"periodic", a.is_periodic()}});
  }
  return axes;
}

inline Grid grid_from_json(const nlohmann::json& axes) {
  std::vector<Axis> out;
  for (const auto& a : axes) {
    out.emplace_back(a.at("name").get<std::string>(), a.at("min").get<double>(),
                     a.at("max").get<double>(), a.at("n").get<std::size_t>(),
                     a.at("periodic").get<bool>());
  }
  return Grid(std::move(out));
}

inline std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t r = 0;
    for (int b = 0; b < 8; ++b) r |= ((v >> (8 * b)) & 0xffu) << (8 * (7 - b));
    return r;
  }
}

}  // namespace detail

inline std::string snapshot_header(const Snapshot& s, std::size_t& data_offset) {
  nlohmann::json h = {{"format", "mixsl-field"},
                      {"version", 1},
                      {"name", s.name},
                      {"time", s.time},
                      {"axes", detail::grid_to_json(s.field.grid())},
                      {"layout", "row-major, last axis fastest"},
                      {"dtype", "float64-le"},
                      {"count", s.field.size()},
                      {"meta", s.meta}};
  std::size_t offset = 64;
  for (;;) {
    h["data_offset"] = offset;
    std::string text = h.dump();
    if (text.size() + 1 <= offset) {
      text.append(offset - 1 - text.size(), ' ');
      text.push_back('\n');
      data_offset = offset;
      return text;
    }
    offset = (text.size() + 1 + 63) / 64 * 64;
  }
}

inline void write_snapshot(const std::string& path, const Snapshot& s) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open snapshot for writing: " + path);
  std::size_t offset = 0;
  const std::string header = snapshot_header(s, offset);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  std::vector<std::uint64_t> raw(s.field.size());
  for (std::size_t i = 0; i < raw.size(); ++i)
    raw[i] = detail::to_le(std::bit_cast<std::uint64_t>(s.field[i]));
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size() * sizeof(std::uint64_t)));
  if (!out) throw IoError("failed writing snapshot: " + path);
}

inline Snapshot read_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open snapshot: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty snapshot: " + path);
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad snapshot header in " + path + ": " + e.what());
  }
  if (h.value("format", "") != "mixsl-field")
    throw IoError("not a mixsl field snapshot: " + path);
  Snapshot s;
  s.name = h.at("name").get<std::string>();
  s.time = h.at("time").get<double>();
  s.meta = h.value("meta", nlohmann::json::object());
  Grid g = detail::grid_from_json(h.at("axes"));
  const auto count = h.at("count").get<std::size_t>();
  if (count != g.size()) throw IoError("snapshot count does not match axes: " + path);
  in.seekg(static_cast<std::streamoff>(h.at("data_offset").get<std::size_t>()));
  std::vector<std::uint64_t> raw(count);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(count * sizeof(std::uint64_t)));
  if (!in) throw IoError("truncated snapshot data: " + path);
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i)
    values[i] = std::bit_cast<double>(detail::to_le(raw[i]));
  s.field = Field(std::move(g), std::move(values));
  return s;
}

}  // namespace mixsl
