#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fame {

// FNV-1a 64-bit, hex-encoded; used as the config hash embedded in artifacts.
std::string fnv1a64_hex(const std::string& text);

std::vector<std::string> split_str(const std::string& s, char delim);
std::string trim_str(const std::string& s);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

std::string format_double(double v);  // shortest round-trippable decimal

}  // namespace fame
