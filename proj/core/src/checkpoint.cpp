#include "hcq/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace hcq {

namespace {

constexpr const char* kMagic = "hcq-checkpoint";

void put_le(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double get_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

const NamedArray* Checkpoint::find(const std::string& name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

Checkpoint capture_checkpoint(const ParameterStore& store, const AdamW* optimizer, const nlohmann::json& config,
                              std::size_t iteration) {
  Checkpoint c;
  c.iteration = iteration;
  c.config = config;
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& t = store.tensor(i);
    c.arrays.push_back({store.name(i), t.shape(), {t.data().begin(), t.data().end()}});
  }
  if (optimizer) {
    const auto& states = optimizer->states();
    if (states.size() != store.size()) throw CheckpointError("optimizer does not cover the parameter store");
    for (std::size_t i = 0; i < store.size(); ++i) {
      const auto& s = states[i];
      const auto n = store.tensor(i).numel();
      const auto shape = store.tensor(i).shape();
      c.arrays.push_back({"adam.m/" + store.name(i), shape, s.m.empty() ? std::vector<double>(n, 0.0) : s.m});
      c.arrays.push_back({"adam.v/" + store.name(i), shape, s.v.empty() ? std::vector<double>(n, 0.0) : s.v});
      c.optimizer_steps.emplace_back(store.name(i), s.step);
    }
  }
  return c;
}

void write_checkpoint(const Checkpoint& c, const std::string& path) {
  std::ostringstream header;
  header << kMagic << ' ' << c.version << '\n';
  header << "iteration " << c.iteration << '\n';
  header << "config " << c.config.dump() << '\n';
  header << "arrays " << c.arrays.size() << '\n';
  std::size_t offset = 0;
  for (const auto& a : c.arrays) {
    if (a.name.find_first_of(" \n") != std::string::npos) throw CheckpointError("array name contains whitespace");
    if (numel_of(a.shape) != a.values.size()) throw CheckpointError("array '" + a.name + "' shape mismatch");
    header << a.name << ' ' << offset << ' ' << a.shape.size();
    for (auto s : a.shape) header << ' ' << s;
    header << '\n';
    offset += a.values.size() * 8;
  }
  header << "steps " << c.optimizer_steps.size() << '\n';
  for (const auto& [name, step] : c.optimizer_steps) header << name << ' ' << step << '\n';
  header << "payload " << offset << '\n';

  std::string payload;
  payload.reserve(offset);
  for (const auto& a : c.arrays) {
    for (double v : a.values) put_le(payload, v);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint '" + path + "'");
  const auto h = header.str();
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw CheckpointError("short write to '" + path + "'");
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
  auto expect_line = [&](const std::string& key) {
    std::string line;
    if (!std::getline(in, line)) throw CheckpointError("truncated checkpoint header");
    if (line.rfind(key + ' ', 0) != 0) throw CheckpointError("expected '" + key + "' in checkpoint header");
    return line.substr(key.size() + 1);
  };
  Checkpoint c;
  c.version = std::stoi(expect_line(kMagic));
  if (c.version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(c.version));
  }
  c.iteration = std::stoull(expect_line("iteration"));
  c.config = nlohmann::json::parse(expect_line("config"));
  const auto n_arrays = std::stoull(expect_line("arrays"));
  std::vector<std::size_t> offsets;
  for (std::size_t i = 0; i < n_arrays; ++i) {
    std::string line;
    if (!std::getline(in, line)) throw CheckpointError("truncated array table");
    std::istringstream ls(line);
    NamedArray a;
    std::size_t offset = 0, ndim = 0;
    if (!(ls >> a.name >> offset >> ndim)) throw CheckpointError("malformed array entry: " + line);
    a.shape.resize(ndim);
    for (auto& s : a.shape) {
      if (!(ls >> s)) throw CheckpointError("malformed shape in: " + line);
    }
    offsets.push_back(offset);
    c.arrays.push_back(std::move(a));
  }
  const auto n_steps = std::stoull(expect_line("steps"));
  for (std::size_t i = 0; i < n_steps; ++i) {
    std::string line;
    if (!std::getline(in, line)) throw CheckpointError("truncated step table");
    std::istringstream ls(line);
    std::string name;
    std::int64_t step = 0;
    if (!(ls >> name >> step)) throw CheckpointError("malformed step entry: " + line);
    c.optimizer_steps.emplace_back(name, step);
  }
  const auto payload_size = std::stoull(expect_line("payload"));
  std::vector<unsigned char> payload(payload_size);
  in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload_size));
  if (static_cast<std::size_t>(in.gcount()) != payload_size) throw CheckpointError("truncated checkpoint payload");
  for (std::size_t i = 0; i < c.arrays.size(); ++i) {
    auto& a = c.arrays[i];
    const auto n = numel_of(a.shape);
    if (offsets[i] + n * 8 > payload_size) throw CheckpointError("array '" + a.name + "' exceeds payload");
    a.values.resize(n);
    for (std::size_t k = 0; k < n; ++k) a.values[k] = get_le(payload.data() + offsets[i] + 8 * k);
  }
  return c;
}

void restore_parameters(const Checkpoint& c, ParameterStore& store) {
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto* a = c.find(store.name(i));
    if (!a) throw CheckpointError("checkpoint lacks parameter '" + store.name(i) + "'");
    auto t = store.tensor(i);
    if (a->shape != t.shape()) {
      throw CheckpointError("shape mismatch for '" + store.name(i) + "': " + shape_str(a->shape) + " vs " +
                            shape_str(t.shape()));
    }
    auto dst = t.mutable_data();
    std::memcpy(dst.data(), a->values.data(), a->values.size() * sizeof(double));
  }
}

void restore_optimizer(const Checkpoint& c, const ParameterStore& store, AdamW& optimizer) {
  auto& states = optimizer.states();
  if (states.size() != store.size()) throw CheckpointError("optimizer does not cover the parameter store");
  if (c.optimizer_steps.size() != store.size()) throw CheckpointError("checkpoint lacks optimizer state");
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto* m = c.find("adam.m/" + store.name(i));
    const auto* v = c.find("adam.v/" + store.name(i));
    if (!m || !v || c.optimizer_steps[i].first != store.name(i)) {
      throw CheckpointError("optimizer state missing for '" + store.name(i) + "'");
    }
    states[i].m = m->values;
    states[i].v = v->values;
    states[i].step = c.optimizer_steps[i].second;
  }
}

}  // namespace hcq
