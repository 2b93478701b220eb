#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cvote {

/// Bit-exact textual encoding of an IEEE-754 double: 16 lowercase hex digits,
/// most significant nibble first.
std::string double_to_hex(double x);
double hex_to_double(const std::string& hex);

/// Shortest fixed-format rendering used in every CSV this library writes.
/// "%.17g" round-trips any double and renders identically on every run.
std::string fmt_double(double x);

/// One parsed CSV record.
using CsvRow = std::vector<std::string>;

/// RFC-4180 CSV reader: quoted fields, embedded commas/quotes/newlines, CRLF.
std::vector<CsvRow> read_csv(const std::filesystem::path& path);

/// Minimal CSV writer with RFC-4180 quoting.
class CsvWriter {
public:
    explicit CsvWriter(const std::filesystem::path& path);
    ~CsvWriter();
    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;

    void write_row(const CsvRow& cells);

private:
    struct Impl;
    Impl* impl_;
};

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

/// FNV-1a 64-bit hash, rendered as 16 hex digits. Used for config fingerprints.
std::string fnv1a_hex(const std::string& data);

}  // namespace cvote
