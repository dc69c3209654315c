#pragma once

// Text checkpoint layout:
//
//   turbo-checkpoint 1
//   counter <name> <unsigned integer>
//   tensor <name> <rank> <extent>...
//   <numel values, 17 significant digits, whitespace separated>
//   end
//
// Counters and tensors may appear in any order; names carry no spaces.
// Doubles are written with enough digits to round-trip exactly.

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "turbo/ad/tensor.hpp"

namespace turbo::ad {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  std::map<std::string, std::uint64_t> counters;
  std::map<std::string, Tensor> tensors;

  /// Stores `list` as name.0, name.1, ...
  void put_list(const std::string& name, const std::vector<Tensor>& list);
  /// Reads back a list written by put_list; missing entries are an error
  /// unless the list is absent entirely (then empty).
  std::vector<Tensor> get_list(const std::string& name) const;
  const Tensor& tensor(const std::string& name) const;
  std::uint64_t counter(const std::string& name) const;
};

std::string serialize_checkpoint(const Checkpoint& ck);
Checkpoint parse_checkpoint(const std::string& text);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace turbo::ad
