#pragma once

#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace tsopt {

/// Shortest round-trip decimal representation (locale independent, deterministic).
std::string format_number(double value);

/**
 * Minimal CSV writer. Every file starts with a schema comment line
 * ("# <schema> v<version>") followed by the header row.
 */
class CsvWriter {
 public:
  CsvWriter(const std::string& path, std::string_view schema, int version,
            const std::vector<std::string>& header);

  CsvWriter& cell(double value);
  CsvWriter& cell(long long value);
  CsvWriter& cell(std::string_view text);
  void end_row();

 private:
  void separator();

  std::ofstream out_;
  bool row_started_ = false;
  std::string path_;
};

}  // namespace tsopt
