#include "stgdl/checkpoint.hpp"

#include <json.hpp>

#include "stgdl/errors.hpp"
#include "stgdl/io.hpp"

namespace stgdl::checkpoint {

using nlohmann::ordered_json;
using ad::Shape;
using ad::Tensor;

namespace {

ordered_json tensor_json(const Tensor& t) {
  ordered_json j;
  j["shape"] = t.shape();
  j["values"] = t.values();
  return j;
}

Tensor tensor_from(const ordered_json& j) {
  return Tensor(j.at("shape").get<Shape>(), j.at("values").get<std::vector<double>>());
}

}  // namespace

std::string to_json(dln::DlnModel& model) {
  const auto& c = model.config;
  ordered_json j;
  j["format"] = kFormat;
  j["variant"] = dln::to_string(c.variant);
  j["k"] = c.k;
  j["nodes"] = c.nodes;
  j["window"] = c.block.window;
  j["features"] = c.block.features;
  j["hidden"] = c.block.hidden;
  j["norm_mean"] = model.norm_mean;
  j["norm_scale"] = model.norm_scale;
  j["base"] = tensor_json(model.mask_set.base);
  j["fixed_subgraphs"] = ordered_json::array();
  for (const auto& s : model.fixed_subgraphs) j["fixed_subgraphs"].push_back(tensor_json(s));
  j["params"] = ordered_json::array();
  for (const auto& p : model.parameters()) {
    ordered_json e = tensor_json(*p.value);
    e["name"] = p.name;
    j["params"].push_back(std::move(e));
  }
  return j.dump(1);
}

dln::DlnModel from_json(const std::string& text, const std::string& source) {
  try {
    const ordered_json j = ordered_json::parse(text);
    if (j.at("format").get<std::string>() != kFormat) throw ParseError(source, 0, "unknown checkpoint format");
    dln::ModelConfig c;
    c.variant = dln::variant_from_string(j.at("variant").get<std::string>());
    c.k = j.at("k").get<std::size_t>();
    c.nodes = j.at("nodes").get<std::size_t>();
    c.block.window = j.at("window").get<std::size_t>();
    c.block.features = j.at("features").get<std::size_t>();
    c.block.hidden = j.at("hidden").get<std::size_t>();

    dln::DlnModel model = dln::init_model(c, tensor_from(j.at("base")), 0);
    model.norm_mean = j.at("norm_mean").get<double>();
    model.norm_scale = j.at("norm_scale").get<double>();
    for (const auto& s : j.at("fixed_subgraphs")) model.fixed_subgraphs.push_back(tensor_from(s));
    if (c.variant == dln::Variant::ted && model.fixed_subgraphs.size() != c.k)
      throw ParseError(source, 0, "ted checkpoint needs K fixed subgraphs");

    auto refs = model.parameters();
    const auto& params = j.at("params");
    if (params.size() != refs.size())
      throw ParseError(source, 0, "expected " + std::to_string(refs.size()) + " parameters, found " +
                                      std::to_string(params.size()));
    for (std::size_t i = 0; i < refs.size(); ++i) {
      const auto& e = params[i];
      if (e.at("name").get<std::string>() != refs[i].name)
        throw ParseError(source, 0, "parameter " + std::to_string(i) + " should be " + refs[i].name);
      Tensor t = tensor_from(e);
      if (t.shape() != refs[i].value->shape())
        throw ParseError(source, 0, "parameter " + refs[i].name + " has shape " + ad::to_string(t.shape()));
      *refs[i].value = std::move(t);
    }
    return model;
  } catch (const ordered_json::exception& e) {
    throw ParseError(source, 0, std::string("malformed checkpoint: ") + e.what());
  } catch (const ShapeError& e) {
    throw ParseError(source, 0, std::string("malformed checkpoint: ") + e.what());
  } catch (const DomainError& e) {
    throw ParseError(source, 0, std::string("malformed checkpoint: ") + e.what());
  }
}

void save(dln::DlnModel& model, const std::filesystem::path& path) { io::write_text(path, to_json(model)); }

dln::DlnModel load(const std::filesystem::path& path) { return from_json(io::read_text(path), path.string()); }

}  // namespace stgdl::checkpoint
