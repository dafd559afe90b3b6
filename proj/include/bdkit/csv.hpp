#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace bdkit {

// RFC 4180 style: quote when the field has a comma, quote or newline.
std::string csv_escape(std::string_view field);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column; throws ArgumentError when absent.
  std::size_t column(std::string_view name) const;
};

CsvTable parse_csv(std::string_view text);

}  // namespace bdkit
