#include "hcq/dataset_io.hpp"

#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>
#include <zlib.h>

namespace hcq {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string sample_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "sample_%06zu", i);
  return buf;
}

void write_bytes(const fs::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DatasetError("cannot write " + p.string());
}

std::vector<unsigned char> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DatasetError("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw DatasetError("cannot read " + p.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DatasetError("malformed " + p.string() + ": " + e.what());
  }
}

}  // namespace

std::uint32_t crc32_of(const std::vector<unsigned char>& bytes) {
  return static_cast<std::uint32_t>(::crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
}

void export_dataset(const std::string& dir, const std::vector<SceneSample>& samples) {
  fs::create_directories(dir);
  json index = {{"version", 1}, {"count", samples.size()}, {"samples", json::array()}};
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const auto id = sample_id(i);
    json ann = {{"seed", s.seed}, {"height", s.height}, {"width", s.width}, {"instances", json::array()}};
    for (const auto& inst : s.instances) {
      json joints = json::array();
      for (const auto& p : inst.joints) joints.push_back({p.x, p.y});
      ann["instances"].push_back({{"box", {inst.box.x0, inst.box.y0, inst.box.x1, inst.box.y1}}, {"joints", joints}});
    }
    std::ofstream(fs::path(dir) / (id + ".json")) << ann.dump(1) << '\n';

    std::vector<unsigned char> image;
    image.reserve(s.image.size() * 4);
    for (double v : s.image) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      for (int b = 0; b < 4; ++b) image.push_back(static_cast<unsigned char>((bits >> (8 * b)) & 0xff));
    }
    std::vector<unsigned char> masks;
    for (const auto& inst : s.instances) masks.insert(masks.end(), inst.mask.begin(), inst.mask.end());
    write_bytes(fs::path(dir) / (id + ".image.f32"), image);
    write_bytes(fs::path(dir) / (id + ".masks.u8"), masks);
    index["samples"].push_back(
        {{"id", id}, {"seed", s.seed}, {"image_crc32", crc32_of(image)}, {"masks_crc32", crc32_of(masks)}});
  }
  std::ofstream(fs::path(dir) / "index.json") << index.dump(1) << '\n';
}

std::vector<SceneSample> import_dataset(const std::string& dir) {
  const auto index = read_json(fs::path(dir) / "index.json");
  std::vector<SceneSample> out;
  try {
    for (const auto& entry : index.at("samples")) {
      const auto id = entry.at("id").get<std::string>();
      const auto ann = read_json(fs::path(dir) / (id + ".json"));
      SceneSample s;
      s.seed = ann.at("seed").get<std::uint64_t>();
      s.height = ann.at("height").get<std::size_t>();
      s.width = ann.at("width").get<std::size_t>();
      const auto image = read_bytes(fs::path(dir) / (id + ".image.f32"));
      const auto masks = read_bytes(fs::path(dir) / (id + ".masks.u8"));
      if (crc32_of(image) != entry.at("image_crc32").get<std::uint32_t>() ||
          crc32_of(masks) != entry.at("masks_crc32").get<std::uint32_t>()) {
        throw DatasetError("checksum mismatch for " + id);
      }
      const std::size_t pixels = s.height * s.width;
      if (image.size() != pixels * 3 * 4) throw DatasetError("image blob size mismatch for " + id);
      s.image.resize(pixels * 3);
      for (std::size_t k = 0; k < s.image.size(); ++k) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(image[4 * k + b]) << (8 * b);
        s.image[k] = std::bit_cast<float>(bits);
      }
      const auto& insts = ann.at("instances");
      if (masks.size() != insts.size() * pixels) throw DatasetError("mask blob size mismatch for " + id);
      for (std::size_t n = 0; n < insts.size(); ++n) {
        Instance inst;
        const auto& b = insts[n].at("box");
        inst.box = {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(), b.at(3).get<double>()};
        for (const auto& p : insts[n].at("joints")) inst.joints.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        inst.mask.assign(masks.begin() + static_cast<long>(n * pixels), masks.begin() + static_cast<long>((n + 1) * pixels));
        s.instances.push_back(std::move(inst));
      }
      out.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw DatasetError(std::string("malformed dataset: ") + e.what());
  }
  return out;
}

}  // namespace hcq
