#pragma once

// Text format for a discrete system. Blank lines and '#' comments are
// ignored; keywords start a block:
//
//   turbo-system 1
//   nx <n_x>
//   nz <n_z>
//   joint          followed by n_x rows of n_z probabilities
//   encoder        followed by n_x rows of n_z probabilities, q(z|x)
//   decoder        followed by n_z rows of n_x probabilities, p(x|z)
//   sensitive <n_s>  optional; n_x*n_z rows of n_s values, p(x,z,s), row (x,z)
//                    in x-major order
//   attacker       optional (requires sensitive); n_z rows of n_s values
//   turbo-weights <lambda_D> <lambda_R> <lambda_T>     optional
//   ibn-weights <lambda_B> <lambda_Info> <lambda_S>    optional
//
// Values are written with 17 significant digits so a save/load cycle is exact.

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "turbo/oracle/objectives.hpp"
#include "turbo/oracle/terms.hpp"

namespace turbo::oracle {

class SystemFileError : public std::runtime_error {
 public:
  SystemFileError(std::size_t line, const std::string& message);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct DiscreteSystemSpec {
  TurboSystem system;
  std::optional<prob::FiniteJointWithSensitive> sensitive;
  std::optional<prob::StochasticKernel> attacker;
  TurboWeights turbo_weights;
  IbnWeights ibn_weights;
};

DiscreteSystemSpec parse_system(const std::string& text);
DiscreteSystemSpec load_system(const std::filesystem::path& path);
std::string serialize_system(const DiscreteSystemSpec& spec);
void save_system(const DiscreteSystemSpec& spec, const std::filesystem::path& path);

}  // namespace turbo::oracle
