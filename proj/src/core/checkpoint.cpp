#include "failprompt/checkpoint.hpp"

#include "failprompt/error.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace failprompt {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

bool parse_double(std::string_view token, double& out) {
  if (token.empty()) return false;
  const char* first = token.data();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, token.data() + token.size(), out);
  return res.ec == std::errc() && res.ptr == token.data() + token.size();
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

void Checkpoint::put(const std::string& name, const Matrix& value) {
  if (name.empty() || name.find_first_of(" \t\n") != std::string::npos) {
    throw Error(ErrorCode::BadConfig, "invalid array name '" + name + "'");
  }
  arrays_[name] = value;
}

void Checkpoint::put_vector(const std::string& name, const Vector& value) { put(name, Matrix(value)); }

void Checkpoint::put_scalar(const std::string& name, double value) { put(name, Matrix::Constant(1, 1, value)); }

const Matrix& Checkpoint::get(const std::string& name) const {
  auto it = arrays_.find(name);
  if (it == arrays_.end()) throw Error(ErrorCode::CorruptFile, "checkpoint has no array '" + name + "'");
  return it->second;
}

Vector Checkpoint::get_vector(const std::string& name) const {
  const Matrix& m = get(name);
  if (m.cols() != 1) throw Error(ErrorCode::CorruptFile, "array '" + name + "' is not a vector");
  return m.col(0);
}

double Checkpoint::get_scalar(const std::string& name) const {
  const Matrix& m = get(name);
  if (m.size() != 1) throw Error(ErrorCode::CorruptFile, "array '" + name + "' is not a scalar");
  return m(0, 0);
}

std::string Checkpoint::serialize() const {
  std::string out = "failprompt-params " + std::to_string(kCheckpointFormatVersion) + " " +
                    std::to_string(arrays_.size()) + "\n";
  for (const auto& [name, m] : arrays_) {
    out += name + " " + std::to_string(m.rows()) + " " + std::to_string(m.cols());
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        out += ' ';
        out += format_double(m(r, c));
      }
    }
    out += '\n';
  }
  out += "end\n";
  return out;
}

Checkpoint Checkpoint::parse(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line, magic;
  int version = 0;
  std::size_t count = 0;
  if (!std::getline(in, line)) throw Error(ErrorCode::CorruptFile, "empty checkpoint");
  std::istringstream head(line);
  if (!(head >> magic) || magic != "failprompt-params") throw Error(ErrorCode::CorruptFile, "missing checkpoint header");
  if (!(head >> version)) throw Error(ErrorCode::CorruptFile, "missing checkpoint version");
  if (version != kCheckpointFormatVersion) {
    throw Error(ErrorCode::VersionMismatch, "checkpoint version " + std::to_string(version));
  }
  if (!(head >> count)) throw Error(ErrorCode::CorruptFile, "missing array count");
  Checkpoint ck;
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw Error(ErrorCode::CorruptFile, "truncated checkpoint");
    std::istringstream rec(line);
    std::string name, token;
    long rows = -1, cols = -1;
    if (!(rec >> name >> rows >> cols) || rows < 0 || cols < 0) {
      throw Error(ErrorCode::CorruptFile, "bad array record " + std::to_string(i));
    }
    Matrix m(rows, cols);
    for (long r = 0; r < rows; ++r) {
      for (long c = 0; c < cols; ++c) {
        double v = 0.0;
        if (!(rec >> token) || !parse_double(token, v)) {
          throw Error(ErrorCode::CorruptFile, "array '" + name + "' has a bad or missing value");
        }
        m(r, c) = v;
      }
    }
    if (rec >> token) throw Error(ErrorCode::CorruptFile, "array '" + name + "' has trailing values");
    if (ck.arrays_.count(name)) throw Error(ErrorCode::CorruptFile, "duplicate array '" + name + "'");
    ck.arrays_[name] = std::move(m);
  }
  if (!std::getline(in, line) || line != "end") throw Error(ErrorCode::CorruptFile, "missing end marker");
  while (std::getline(in, line))
    if (!line.empty()) throw Error(ErrorCode::CorruptFile, "content after end marker");
  return ck;
}

void Checkpoint::save(const std::string& path) const { write_text_file(path, serialize()); }

Checkpoint Checkpoint::load(const std::string& path) { return parse(read_text_file(path)); }

}  // namespace failprompt
