#include "turbo/oracle/system_file.hpp"

#include <fmt/format.h>

#include <fstream>
#include <sstream>

#include "turbo/util/format.hpp"

namespace turbo::oracle {

SystemFileError::SystemFileError(std::size_t line, const std::string& message)
    : std::runtime_error(line == 0 ? message : fmt::format("line {}: {}", line, message)), line_(line) {}

namespace {

struct Line {
  std::size_t number;
  std::vector<std::string> tokens;
};

class Reader {
 public:
  explicit Reader(const std::string& text) {
    std::istringstream in(text);
    std::string raw;
    std::size_t number = 0;
    while (std::getline(in, raw)) {
      ++number;
      const auto hash = raw.find('#');
      if (hash != std::string::npos) raw.resize(hash);
      auto tokens = split_ws(raw);
      if (!tokens.empty()) lines_.push_back({number, std::move(tokens)});
    }
  }

  bool done() const { return pos_ >= lines_.size(); }
  const Line& next() {
    if (done()) throw SystemFileError(last_line(), "unexpected end of file");
    return lines_[pos_++];
  }
  std::size_t last_line() const { return lines_.empty() ? 0 : lines_.back().number; }

  std::vector<double> rows(std::size_t n_rows, std::size_t n_cols, const char* block) {
    std::vector<double> out;
    out.reserve(n_rows * n_cols);
    for (std::size_t r = 0; r < n_rows; ++r) {
      const Line& l = next();
      if (l.tokens.size() != n_cols) {
        throw SystemFileError(l.number, fmt::format("{}: expected {} values in row {}, found {}", block, n_cols, r,
                                                    l.tokens.size()));
      }
      for (const auto& tok : l.tokens) out.push_back(number(l.number, tok));
    }
    return out;
  }

  static double number(std::size_t line, const std::string& tok) {
    try {
      return parse_double(tok);
    } catch (const std::invalid_argument& e) {
      throw SystemFileError(line, e.what());
    }
  }

  static std::size_t count(std::size_t line, const std::string& tok) {
    long long v = 0;
    try {
      v = parse_int(tok);
    } catch (const std::invalid_argument& e) {
      throw SystemFileError(line, e.what());
    }
    if (v < 1) throw SystemFileError(line, "alphabet size must be >= 1");
    return static_cast<std::size_t>(v);
  }

 private:
  std::vector<Line> lines_;
  std::size_t pos_ = 0;
};

template <typename F>
auto at_line(std::size_t line, F&& make) {
  try {
    return make();
  } catch (const SystemFileError&) {
    throw;
  } catch (const std::exception& e) {
    throw SystemFileError(line, e.what());
  }
}

void write_rows(std::ostream& out, std::span<const double> data, std::size_t n_cols) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << format_exact(data[i]) << ((i + 1) % n_cols == 0 ? '\n' : ' ');
  }
}

}  // namespace

DiscreteSystemSpec parse_system(const std::string& text) {
  Reader r(text);
  std::size_t n_x = 0, n_z = 0, n_s = 0;
  std::optional<prob::FiniteJoint> joint;
  std::optional<prob::StochasticKernel> enc, dec, attacker;
  std::optional<prob::FiniteJointWithSensitive> sensitive;
  TurboWeights tw;
  IbnWeights iw;

  const Line& header = r.next();
  if (header.tokens.size() != 2 || header.tokens[0] != "turbo-system" || header.tokens[1] != "1") {
    throw SystemFileError(header.number, "expected header 'turbo-system 1'");
  }

  while (!r.done()) {
    const Line& l = r.next();
    const std::string& key = l.tokens[0];
    auto need_sizes = [&] {
      if (n_x == 0 || n_z == 0) throw SystemFileError(l.number, key + " before nx/nz");
    };
    auto expect_args = [&](std::size_t n) {
      if (l.tokens.size() != n + 1) throw SystemFileError(l.number, fmt::format("{} takes {} argument(s)", key, n));
    };
    if (key == "nx") {
      expect_args(1);
      n_x = Reader::count(l.number, l.tokens[1]);
    } else if (key == "nz") {
      expect_args(1);
      n_z = Reader::count(l.number, l.tokens[1]);
    } else if (key == "joint") {
      expect_args(0);
      need_sizes();
      auto d = r.rows(n_x, n_z, "joint");
      joint = at_line(l.number, [&] { return prob::FiniteJoint(n_x, n_z, std::move(d)); });
    } else if (key == "encoder") {
      expect_args(0);
      need_sizes();
      auto d = r.rows(n_x, n_z, "encoder");
      enc = at_line(l.number, [&] { return prob::StochasticKernel(n_x, n_z, std::move(d)); });
    } else if (key == "decoder") {
      expect_args(0);
      need_sizes();
      auto d = r.rows(n_z, n_x, "decoder");
      dec = at_line(l.number, [&] { return prob::StochasticKernel(n_z, n_x, std::move(d)); });
    } else if (key == "sensitive") {
      expect_args(1);
      need_sizes();
      n_s = Reader::count(l.number, l.tokens[1]);
      auto d = r.rows(n_x * n_z, n_s, "sensitive");
      sensitive = at_line(l.number, [&] { return prob::FiniteJointWithSensitive(n_x, n_z, n_s, std::move(d)); });
    } else if (key == "attacker") {
      expect_args(0);
      if (n_s == 0) throw SystemFileError(l.number, "attacker must follow the sensitive block");
      auto d = r.rows(n_z, n_s, "attacker");
      attacker = at_line(l.number, [&] { return prob::StochasticKernel(n_z, n_s, std::move(d)); });
    } else if (key == "turbo-weights") {
      expect_args(3);
      tw = {Reader::number(l.number, l.tokens[1]), Reader::number(l.number, l.tokens[2]),
            Reader::number(l.number, l.tokens[3])};
      at_line(l.number, [&] { tw.validate(); return 0; });
    } else if (key == "ibn-weights") {
      expect_args(3);
      iw = {Reader::number(l.number, l.tokens[1]), Reader::number(l.number, l.tokens[2]),
            Reader::number(l.number, l.tokens[3])};
      at_line(l.number, [&] { iw.validate(); return 0; });
    } else {
      throw SystemFileError(l.number, "unknown keyword '" + key + "'");
    }
  }

  if (!joint) throw SystemFileError(r.last_line(), "missing joint block");
  if (!enc) throw SystemFileError(r.last_line(), "missing encoder block");
  if (!dec) throw SystemFileError(r.last_line(), "missing decoder block");
  return DiscreteSystemSpec{TurboSystem(std::move(*joint), std::move(*enc), std::move(*dec)), std::move(sensitive),
                            std::move(attacker), tw, iw};
}

DiscreteSystemSpec load_system(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SystemFileError(0, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_system(buf.str());
}

std::string serialize_system(const DiscreteSystemSpec& spec) {
  std::ostringstream out;
  const TurboSystem& s = spec.system;
  out << "turbo-system 1\n";
  out << "nx " << s.n_x() << "\nnz " << s.n_z() << "\n";
  out << "joint\n";
  write_rows(out, s.joint().data(), s.n_z());
  out << "encoder\n";
  write_rows(out, s.encoder().data(), s.n_z());
  out << "decoder\n";
  write_rows(out, s.decoder().data(), s.n_x());
  if (spec.sensitive) {
    out << "sensitive " << spec.sensitive->n_s() << "\n";
    write_rows(out, spec.sensitive->data(), spec.sensitive->n_s());
    if (spec.attacker) {
      out << "attacker\n";
      write_rows(out, spec.attacker->data(), spec.attacker->n_out());
    }
  }
  const auto& tw = spec.turbo_weights;
  out << "turbo-weights " << format_exact(tw.lambda_d) << ' ' << format_exact(tw.lambda_r) << ' '
      << format_exact(tw.lambda_t) << "\n";
  const auto& iw = spec.ibn_weights;
  out << "ibn-weights " << format_exact(iw.lambda_b) << ' ' << format_exact(iw.lambda_info) << ' '
      << format_exact(iw.lambda_s) << "\n";
  return out.str();
}

void save_system(const DiscreteSystemSpec& spec, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw SystemFileError(0, "cannot write " + path.string());
  out << serialize_system(spec);
}

}  // namespace turbo::oracle
