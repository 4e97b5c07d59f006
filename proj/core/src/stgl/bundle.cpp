#include "colloc/stgl/bundle.hpp"

#include "colloc/error.hpp"
#include "colloc/io.hpp"
#include "colloc/nn/matrix.hpp"

#include <fmt/format.h>

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace colloc::stgl {

namespace {
constexpr std::string_view kMagic = "colloc-bundle";
constexpr int kVersion = 1;

void expect_key(std::istream& in, std::string_view key) {
  std::string got;
  if (!(in >> got) || got != key) throw ConfigError(fmt::format("bundle: expected '{}', got '{}'", key, got));
}
}  // namespace

void ModelBundle::validate() const {
  dims.validate();
  if (history_length < 3) throw ConfigError("bundle: history length must be >= 3");
  if (learner.empty()) throw ConfigError("bundle: learner ensemble is empty");
  if (compensator.empty()) throw ConfigError("bundle: compensation ensemble is empty");
  for (const auto* group : {&learner, &compensator}) {
    for (const auto& m : *group) {
      if (!(m.dims() == dims) || m.input_scale() != input_scale) {
        throw ConfigError("bundle: member architecture disagrees with the header");
      }
    }
  }
}

void write_bundle(std::ostream& out, const ModelBundle& bundle) {
  bundle.validate();
  const ModelDims& d = bundle.dims;
  out << kMagic << ' ' << kVersion << '\n';
  out << "dims " << d.input << ' ' << d.encoder_hidden << ' ' << d.gat_hidden << ' ' << d.embedding << ' '
      << d.decoder_hidden << ' ' << d.head << '\n';
  out << "input_scale " << fmt::format("{:.17g}", bundle.input_scale) << '\n';
  out << "history " << bundle.history_length << '\n';
  out << "learner " << bundle.learner.size() << '\n';
  out << "compensator " << bundle.compensator.size() << '\n';
  for (std::size_t i = 0; i < bundle.learner.size(); ++i) {
    out << "member learner " << i << '\n';
    nn::write_params(out, bundle.learner[i].params());
  }
  for (std::size_t i = 0; i < bundle.compensator.size(); ++i) {
    out << "member compensator " << i << '\n';
    nn::write_params(out, bundle.compensator[i].params());
  }
}

ModelBundle read_bundle(std::istream& in, bool allow_custom_dims) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kMagic) throw ConfigError("bundle: bad header");
  if (version != kVersion) throw ConfigError(fmt::format("bundle: unsupported version {}", version));
  ModelBundle b;
  ModelDims& d = b.dims;
  expect_key(in, "dims");
  if (!(in >> d.input >> d.encoder_hidden >> d.gat_hidden >> d.embedding >> d.decoder_hidden >> d.head)) {
    throw ConfigError("bundle: malformed dims");
  }
  d.validate();
  if (!allow_custom_dims && !d.is_standard()) {
    throw ConfigError(fmt::format("bundle: widths {}/{}/{}/{}/{}/{} differ from the reference 3/32/64/32/64/6",
                                  d.input, d.encoder_hidden, d.gat_hidden, d.embedding, d.decoder_hidden, d.head));
  }
  std::string scale_token;
  expect_key(in, "input_scale");
  in >> scale_token;
  b.input_scale = std::stod(scale_token);
  expect_key(in, "history");
  in >> b.history_length;
  std::size_t n_learner = 0, n_comp = 0;
  expect_key(in, "learner");
  in >> n_learner;
  expect_key(in, "compensator");
  in >> n_comp;
  if (!in) throw ConfigError("bundle: malformed header");
  auto read_members = [&](std::string_view role, std::size_t n, std::vector<StglModel>& dest) {
    for (std::size_t i = 0; i < n; ++i) {
      std::string key, got_role;
      std::size_t idx = 0;
      if (!(in >> key >> got_role >> idx) || key != "member" || got_role != role || idx != i) {
        throw ConfigError(fmt::format("bundle: expected {} member {}", role, i));
      }
      dest.push_back(StglModel::from_params(d, nn::read_params(in), b.input_scale));
    }
  };
  read_members("learner", n_learner, b.learner);
  read_members("compensator", n_comp, b.compensator);
  b.validate();
  return b;
}

void save_bundle(const std::filesystem::path& path, const ModelBundle& bundle) {
  write_file_atomic(path, [&](std::ostream& out) { write_bundle(out, bundle); });
}

ModelBundle load_bundle(const std::filesystem::path& path, bool allow_custom_dims) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open bundle '{}'", path.string()));
  return read_bundle(in, allow_custom_dims);
}

}  // namespace colloc::stgl
