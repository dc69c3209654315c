#include "turbo/ad/checkpoint.hpp"

#include <fmt/format.h>
#include <fstream>
#include <sstream>

#include "turbo/util/format.hpp"

namespace turbo::ad {

void Checkpoint::put_list(const std::string& name, const std::vector<Tensor>& list) {
  counters[name + ".count"] = list.size();
  for (std::size_t i = 0; i < list.size(); ++i) tensors[fmt::format("{}.{}", name, i)] = list[i];
}

std::vector<Tensor> Checkpoint::get_list(const std::string& name) const {
  auto it = counters.find(name + ".count");
  if (it == counters.end()) return {};
  std::vector<Tensor> out;
  for (std::uint64_t i = 0; i < it->second; ++i) out.push_back(tensor(fmt::format("{}.{}", name, i)));
  return out;
}

const Tensor& Checkpoint::tensor(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw CheckpointError("checkpoint: missing tensor " + name);
  return it->second;
}

std::uint64_t Checkpoint::counter(const std::string& name) const {
  auto it = counters.find(name);
  if (it == counters.end()) throw CheckpointError("checkpoint: missing counter " + name);
  return it->second;
}

std::string serialize_checkpoint(const Checkpoint& ck) {
  std::string out = "turbo-checkpoint 1\n";
  for (const auto& [name, value] : ck.counters) out += fmt::format("counter {} {}\n", name, value);
  for (const auto& [name, t] : ck.tensors) {
    out += fmt::format("tensor {} {}", name, t.rank());
    for (std::size_t e : t.shape()) out += fmt::format(" {}", e);
    out += '\n';
    const auto data = t.data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      out += format_exact(data[i]);
      out += (i + 1 == data.size() || (i + 1) % 8 == 0) ? '\n' : ' ';
    }
  }
  out += "end\n";
  return out;
}

Checkpoint parse_checkpoint(const std::string& text) {
  std::istringstream in(text);
  std::string word;
  int version = 0;
  if (!(in >> word >> version) || word != "turbo-checkpoint" || version != 1) {
    throw CheckpointError("checkpoint: bad header");
  }
  Checkpoint ck;
  bool ended = false;
  while (in >> word) {
    if (word == "end") {
      ended = true;
      break;
    }
    std::string name;
    if (!(in >> name)) throw CheckpointError("checkpoint: truncated record");
    if (word == "counter") {
      std::uint64_t v = 0;
      if (!(in >> v)) throw CheckpointError("checkpoint: bad counter " + name);
      ck.counters[name] = v;
    } else if (word == "tensor") {
      std::size_t rank = 0;
      if (!(in >> rank)) throw CheckpointError("checkpoint: bad rank for " + name);
      Shape shape(rank);
      for (auto& e : shape)
        if (!(in >> e) || e == 0) throw CheckpointError("checkpoint: bad extent for " + name);
      std::vector<double> values(numel(shape));
      for (double& v : values) {
        std::string tok;
        if (!(in >> tok)) throw CheckpointError("checkpoint: truncated values for " + name);
        try {
          v = parse_double(tok);
        } catch (const std::invalid_argument&) {
          throw CheckpointError(fmt::format("checkpoint: bad value '{}' in {}", tok, name));
        }
      }
      ck.tensors[name] = Tensor(std::move(shape), std::move(values));
    } else {
      throw CheckpointError("checkpoint: unknown record " + word);
    }
  }
  if (!ended) throw CheckpointError("checkpoint: missing end marker");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("checkpoint: cannot write " + tmp.string());
    out << serialize_checkpoint(ck);
    if (!out) throw CheckpointError("checkpoint: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint: cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_checkpoint(buf.str());
}

}  // namespace turbo::ad
