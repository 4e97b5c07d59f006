#pragma once

#include "colloc/stgl/model.hpp"

#include <filesystem>
#include <iosfwd>
#include <vector>

namespace colloc::stgl {

/// Trained learner ensemble plus the delay-compensation ensemble, sharing one
/// architecture and history length.
struct ModelBundle {
  ModelDims dims;
  double input_scale = 10.0;
  std::size_t history_length = 8;
  std::vector<StglModel> learner;
  std::vector<StglModel> compensator;

  /// Throws if either ensemble is empty or a member disagrees with the header.
  void validate() const;
};

/// Text bundle: header lines with the architecture, then each member's
/// parameter checkpoint. Reading rejects widths other than the reference
/// architecture unless `allow_custom_dims` is set.
void write_bundle(std::ostream& out, const ModelBundle& bundle);
ModelBundle read_bundle(std::istream& in, bool allow_custom_dims = false);
void save_bundle(const std::filesystem::path& path, const ModelBundle& bundle);
ModelBundle load_bundle(const std::filesystem::path& path, bool allow_custom_dims = false);

}  // namespace colloc::stgl
