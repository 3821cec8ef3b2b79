#pragma once

#include "failprompt/embedding.hpp"

#include <map>
#include <string>
#include <string_view>

namespace failprompt {

inline constexpr int kCheckpointFormatVersion = 1;

/// Named 2-D arrays. Text layout:
///   failprompt-params <version> <count>
///   <name> <rows> <cols> v v v ...   (row-major)
///   end
class Checkpoint {
 public:
  void put(const std::string& name, const Matrix& value);
  void put_vector(const std::string& name, const Vector& value);
  void put_scalar(const std::string& name, double value);

  bool has(const std::string& name) const { return arrays_.count(name) != 0; }
  /// Throws CorruptFile when the entry is missing.
  const Matrix& get(const std::string& name) const;
  /// Throws CorruptFile when missing or not a single column.
  Vector get_vector(const std::string& name) const;
  double get_scalar(const std::string& name) const;

  const std::map<std::string, Matrix>& arrays() const { return arrays_; }

  std::string serialize() const;
  /// Throws CorruptFile, VersionMismatch.
  static Checkpoint parse(std::string_view text);

  /// Throws IoError.
  void save(const std::string& path) const;
  /// Throws IoError, CorruptFile, VersionMismatch.
  static Checkpoint load(const std::string& path);

  bool operator==(const Checkpoint&) const = default;

 private:
  std::map<std::string, Matrix> arrays_;
};

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);
/// Strict parse of a full token; returns false on any trailing garbage.
bool parse_double(std::string_view token, double& out);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

}  // namespace failprompt
