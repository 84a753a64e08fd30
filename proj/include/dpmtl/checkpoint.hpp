#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpmtl/errors.hpp"
#include "dpmtl/models.hpp"
#include "dpmtl/train.hpp"

namespace dpmtl {

using json = nlohmann::ordered_json;

// Versioned JSON container with shapes, seeds, hyperparameters and all
// tensors. Values round-trip bit-exactly (the serializer emits
// shortest-round-trip decimals). `training` is an opaque block the trainer
// fills with lambda, split spec and anything else evaluation needs.
inline json checkpoint_to_json(const Model& model, const Dataset& shape, std::uint64_t init_seed,
                               json training = json::object()) {
  json j;
  j["format"] = "dpmtl-checkpoint";
  j["version"] = 1;
  j["family"] = family_name(model.family());
  j["hyper"] = {{"dim", model.hyper().dim},
                {"layers", model.hyper().layers},
                {"irt_bias", model.hyper().irt_bias}};
  j["shape"] = {{"num_users", shape.num_users},
                {"num_items", shape.num_items},
                {"options_per_item", shape.options_per_item}};
  j["init_seed"] = init_seed;
  j["training"] = std::move(training);
  json tensors = json::array();
  const ParameterStore& params = model.params();
  for (std::size_t i = 0; i < params.count(); ++i) {
    const Tensor& t = params.tensor(i);
    tensors.push_back({{"name", params.name(i)},
                       {"rank", t.rank()},
                       {"rows", t.rows()},
                       {"cols", t.cols()},
                       {"values", t.values()}});
  }
  j["tensors"] = std::move(tensors);
  return j;
}

struct LoadedCheckpoint {
  std::unique_ptr<Model> model;
  Dataset shape;  // index space only: no interactions
  std::uint64_t init_seed{0};
  json training;
};

inline LoadedCheckpoint checkpoint_from_json(const json& j) {
  if (!j.contains("format") || j["format"] != "dpmtl-checkpoint" || j.value("version", 0) != 1)
    throw ParseError("not a version-1 dpmtl checkpoint");
  LoadedCheckpoint out;
  out.shape.num_users = j["shape"]["num_users"].get<std::size_t>();
  out.shape.num_items = j["shape"]["num_items"].get<std::size_t>();
  out.shape.options_per_item = j["shape"]["options_per_item"].get<std::vector<std::size_t>>();
  out.init_seed = j["init_seed"].get<std::uint64_t>();
  out.training = j.value("training", json::object());

  ModelHyper hyper;
  hyper.dim = j["hyper"]["dim"].get<std::size_t>();
  hyper.layers = j["hyper"]["layers"].get<std::size_t>();
  hyper.irt_bias = j["hyper"]["irt_bias"].get<bool>();
  out.model = make_model(parse_family(j["family"].get<std::string>()), out.shape, hyper,
                         out.init_seed);

  ParameterStore& params = out.model->params();
  const json& tensors = j["tensors"];
  if (tensors.size() != params.count())
    throw ParseError("checkpoint tensor count mismatch: file has " +
                     std::to_string(tensors.size()) + ", model expects " +
                     std::to_string(params.count()));
  for (std::size_t i = 0; i < params.count(); ++i) {
    const json& tj = tensors[i];
    if (tj["name"].get<std::string>() != params.name(i))
      throw ParseError("checkpoint tensor " + std::to_string(i) + " is '" +
                       tj["name"].get<std::string>() + "', expected '" + params.name(i) + "'");
    std::vector<double> values = tj["values"].get<std::vector<double>>();
    Tensor& t = params.tensor(i);
    if (values.size() != t.size())
      throw ParseError("checkpoint tensor '" + params.name(i) + "' has " +
                       std::to_string(values.size()) + " values, expected " +
                       std::to_string(t.size()));
    t.values() = std::move(values);
  }
  return out;
}

inline json train_report_to_json(const TrainReport& r) {
  json epochs = json::array();
  for (const EpochStats& e : r.epochs) {
    json je = {{"train_loss", e.train_loss}, {"val_loss", e.val_loss}, {"val_acc", e.val_acc}};
    if (e.val_auc)
      je["val_auc"] = *e.val_auc;
    else
      je["val_auc"] = nullptr;
    epochs.push_back(std::move(je));
  }
  return json{{"epochs", std::move(epochs)},
              {"best_epoch", r.best_epoch},
              {"best_metric", r.best_metric},
              {"wall_seconds", r.wall_seconds}};
}

}  // namespace dpmtl
