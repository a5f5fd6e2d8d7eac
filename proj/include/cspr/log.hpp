#pragma once

#include <string>
#include <vector>

namespace cspr {

// Shortest decimal form that round-trips the double; deterministic across
// runs so identical episodes serialize to identical bytes.
std::string csv_num(double v);

// Header entries are "name [unit]" (or bare names); every row must match the
// header width. Throws std::runtime_error on IO failure.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

// Reads a CSV written by write_csv. Returns rows; the header goes to
// *header when requested. Non-numeric cells parse as NaN.
std::vector<std::vector<double>> read_csv(const std::string& path,
                                          std::vector<std::string>* header = nullptr);

// Column index for "name" or "name [unit]"; -1 when absent.
int csv_column(const std::vector<std::string>& header, const std::string& name);

}  // namespace cspr
