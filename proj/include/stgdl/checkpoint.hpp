#pragma once

// Single-file JSON checkpoint of a DlnModel.
//
// Key order:
//   format, variant, k, nodes, window, features, hidden,
//   norm_mean, norm_scale, base {shape, values}, fixed_subgraphs [...],
//   params [{name, shape, values}] in DlnModel::parameters() order.
//
// Doubles are written with shortest round-trip formatting, so save → load
// reproduces every parameter bit-for-bit.

#include <filesystem>
#include <string>

#include "stgdl/dln.hpp"

namespace stgdl::checkpoint {

inline constexpr const char* kFormat = "stgdl-checkpoint-1";

std::string to_json(dln::DlnModel& model);
dln::DlnModel from_json(const std::string& text, const std::string& source = "<memory>");

void save(dln::DlnModel& model, const std::filesystem::path& path);
/// Throws ParseError on unreadable or malformed files.
dln::DlnModel load(const std::filesystem::path& path);

}  // namespace stgdl::checkpoint
