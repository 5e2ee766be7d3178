#pragma once

#include "dpi/engine.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace dpi {

inline constexpr const char* kCsvHeader = "t,irradiance,temperature,p_set,p_pv,p_load,p_batt,soc,mode,duty";

/// One CSV record (no newline): numbers with 6 significant digits, mode as
/// its literal name.
std::string csv_row(const SimSample& s);

void write_csv(std::ostream& out, const std::vector<SimSample>& samples);

/// Parses a CSV produced by write_csv. Fields outside the CSV record are
/// left at their defaults except p_pv_available, which is set to p_pv.
/// Throws ParseError on a bad header or record.
std::vector<SimSample> read_csv(std::istream& in);

/// Lossless single-line encoding used for spilling samples to disk.
std::string encode_exact(const SimSample& s);
SimSample decode_exact(const std::string& line);

} // namespace dpi
