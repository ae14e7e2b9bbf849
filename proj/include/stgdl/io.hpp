#pragma once

#include <filesystem>
#include <string>

#include "stgdl/autodiff.hpp"

namespace stgdl::io {

/// 17 significant digits, enough to read back exactly `v`.
std::string format_real(double v);

/// Headerless CSV, one matrix row per line.
void write_matrix_csv(const std::filesystem::path& path, const ad::Tensor& matrix);

/// Reads a headerless CSV of reals into a rows×cols tensor. Throws ParseError
/// naming the file and line on missing files, ragged rows or bad numbers.
ad::Tensor read_matrix_csv(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace stgdl::io
