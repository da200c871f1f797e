#include "vrc/checkpoint.hpp"

#include <cmath>

#include "json_support.hpp"
#include "vrc/errors.hpp"
#include "vrc/records.hpp"

namespace vrc {

using detail::json;

bool same_weights(const Checkpoint& a, const Checkpoint& b) {
  const auto& ea = a.embedder;
  const auto& eb = b.embedder;
  return a.layout == b.layout && ea.kind == eb.kind && ea.feature_dim == eb.feature_dim &&
         ea.params.shared == eb.params.shared &&
         ea.params.subject_proj == eb.params.subject_proj &&
         ea.params.object_proj == eb.params.object_proj &&
         ea.params.classifier == eb.params.classifier &&
         ea.params.classifier_bias == eb.params.classifier_bias &&
         a.relation.w1 == b.relation.w1 && a.relation.w2 == b.relation.w2 &&
         a.relation.b1 == b.relation.b1 && a.relation.b2 == b.relation.b2 &&
         a.relation.w == b.relation.w && a.relation.b == b.relation.b;
}

namespace {

template <typename Derived>
json tensor_to_json(const Eigen::PlainObjectBase<Derived>& t) {
  const auto data = flat(t);
  return {{"shape", {t.rows(), t.cols()}},
          {"data", std::vector<double>(data.begin(), data.end())}};
}

Matrix matrix_from_json(const json& j, const std::string& name) {
  const auto shape = j.at("shape").get<std::vector<Eigen::Index>>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (shape.size() != 2 || shape[0] < 0 || shape[1] < 0 ||
      static_cast<std::size_t>(shape[0] * shape[1]) != data.size()) {
    throw ValidationError("tensor '" + name + "' has a shape that does not match its data");
  }
  for (const double v : data) {
    if (!std::isfinite(v)) throw ValidationError("tensor '" + name + "' is not finite");
  }
  Matrix m(shape[0], shape[1]);
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

Vector vector_from_json(const json& j, const std::string& name) {
  const Matrix m = matrix_from_json(j, name);
  if (m.cols() != 1) throw ValidationError("tensor '" + name + "' must be a column vector");
  return m.col(0);
}

void expect_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols,
                  const std::string& name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ValidationError("tensor '" + name + "' has shape " + std::to_string(m.rows()) +
                          "x" + std::to_string(m.cols()) + ", expected " +
                          std::to_string(rows) + "x" + std::to_string(cols));
  }
}

json adam_to_json(const Adam& adam) {
  json slots = json::object();
  for (const auto& [name, slot] : adam.slots()) slots[name] = {{"m", slot.m}, {"v", slot.v}};
  const auto& c = adam.config();
  return {{"learning_rate", c.learning_rate},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"epsilon", c.epsilon},
          {"step", adam.step()},
          {"slots", std::move(slots)}};
}

Adam adam_from_json(const json& j) {
  AdamConfig c;
  c.learning_rate = j.at("learning_rate").get<double>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.epsilon = j.at("epsilon").get<double>();
  std::map<std::string, Adam::Slot> slots;
  for (const auto& [name, s] : j.at("slots").items()) {
    Adam::Slot slot{s.at("m").get<std::vector<double>>(), s.at("v").get<std::vector<double>>()};
    if (slot.m.size() != slot.v.size()) {
      throw ValidationError("optimizer slot '" + name + "' has mismatched moments");
    }
    slots.emplace(name, std::move(slot));
  }
  Adam adam(c);
  adam.restore(j.at("step").get<std::int64_t>(), std::move(slots));
  return adam;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ck) {
  json tensors = json::object();
  const auto& e = ck.embedder;
  if (e.kind == EmbeddingKind::kTranslation) {
    tensors["embedder.W_s"] = tensor_to_json(e.params.subject_proj);
    if (!e.params.shared) tensors["embedder.W_o"] = tensor_to_json(e.params.object_proj);
    tensors["embedder.W_p"] = tensor_to_json(e.params.classifier);
    tensors["embedder.c_p"] = tensor_to_json(e.params.classifier_bias);
  }
  tensors["relation.W1"] = tensor_to_json(ck.relation.w1);
  tensors["relation.W2"] = tensor_to_json(ck.relation.w2);
  tensors["relation.b1"] = tensor_to_json(ck.relation.b1);
  tensors["relation.b2"] = tensor_to_json(ck.relation.b2);
  tensors["relation.w"] = tensor_to_json(ck.relation.w);
  json doc = {{"format", "vrc-checkpoint"},
              {"schema_version", kCheckpointSchemaVersion},
              {"appearance_dim", ck.layout.appearance_dim},
              {"class_dim", ck.layout.class_dim},
              {"feature_dim", ck.layout.dim()},
              {"embedding", to_string(e.kind)},
              {"embed_dim", e.output_dim()},
              {"shared_projection", e.params.shared},
              {"seed", ck.seed},
              {"train_predicates", ck.train_predicates},
              {"pretrain_steps", ck.pretrain_steps},
              {"episodes_done", ck.episodes_done},
              {"episodes_skipped", ck.episodes_skipped},
              {"config", ck.config},
              {"relation_bias", ck.relation.b},
              {"tensors", std::move(tensors)},
              {"pretrain_optimizer", adam_to_json(ck.pretrain_optimizer)},
              {"metric_optimizer", adam_to_json(ck.metric_optimizer)},
              {"pretrain_loss_history", ck.pretrain_loss_history},
              {"loss_history", ck.loss_history}};
  return doc.dump(1) + "\n";
}

Checkpoint parse_checkpoint(std::string_view text) {
  const json doc = detail::parse_json(text);
  detail::check_header(doc, "vrc-checkpoint", kCheckpointSchemaVersion);
  return detail::guarded([&] {
    Checkpoint ck;
    ck.layout.appearance_dim = doc.at("appearance_dim").get<std::size_t>();
    ck.layout.class_dim = doc.at("class_dim").get<std::size_t>();
    if (doc.at("feature_dim").get<std::size_t>() != ck.layout.dim()) {
      throw ValidationError("checkpoint feature_dim disagrees with its layout");
    }
    ck.seed = doc.at("seed").get<std::uint64_t>();
    ck.train_predicates = doc.at("train_predicates").get<std::vector<int>>();
    ck.pretrain_steps = doc.at("pretrain_steps").get<std::int64_t>();
    ck.episodes_done = doc.at("episodes_done").get<std::int64_t>();
    ck.episodes_skipped = doc.at("episodes_skipped").get<std::int64_t>();
    ck.config = doc.at("config").get<std::map<std::string, std::string>>();
    ck.pretrain_optimizer = adam_from_json(doc.at("pretrain_optimizer"));
    ck.metric_optimizer = adam_from_json(doc.at("metric_optimizer"));
    ck.pretrain_loss_history = doc.at("pretrain_loss_history").get<std::vector<double>>();
    ck.loss_history = doc.at("loss_history").get<std::vector<double>>();

    const auto& t = doc.at("tensors");
    auto& e = ck.embedder;
    e.kind = parse_embedding_kind(doc.at("embedding").get<std::string>());
    e.feature_dim = ck.layout.dim();
    const auto d_x = static_cast<Eigen::Index>(ck.layout.dim());
    const auto width = static_cast<Eigen::Index>(doc.at("embed_dim").get<std::size_t>());
    if (e.kind == EmbeddingKind::kTranslation) {
      e.params.shared = doc.at("shared_projection").get<bool>();
      e.params.subject_proj = matrix_from_json(t.at("embedder.W_s"), "embedder.W_s");
      expect_shape(e.params.subject_proj, width, d_x, "embedder.W_s");
      if (!e.params.shared) {
        e.params.object_proj = matrix_from_json(t.at("embedder.W_o"), "embedder.W_o");
        expect_shape(e.params.object_proj, width, d_x, "embedder.W_o");
      }
      const auto classes = static_cast<Eigen::Index>(ck.train_predicates.size());
      e.params.classifier = matrix_from_json(t.at("embedder.W_p"), "embedder.W_p");
      expect_shape(e.params.classifier, classes, width, "embedder.W_p");
      e.params.classifier_bias = vector_from_json(t.at("embedder.c_p"), "embedder.c_p");
      expect_shape(e.params.classifier_bias, classes, 1, "embedder.c_p");
    } else if (width != 2 * d_x) {
      throw ValidationError("concat checkpoint must have embed_dim = 2 * feature_dim");
    }
    auto& r = ck.relation;
    r.w1 = matrix_from_json(t.at("relation.W1"), "relation.W1");
    r.w2 = matrix_from_json(t.at("relation.W2"), "relation.W2");
    r.b1 = vector_from_json(t.at("relation.b1"), "relation.b1");
    r.b2 = vector_from_json(t.at("relation.b2"), "relation.b2");
    r.w = vector_from_json(t.at("relation.w"), "relation.w");
    r.b = doc.at("relation_bias").get<double>();
    r.check();
    if (static_cast<Eigen::Index>(r.dim()) != width) {
      throw ValidationError("relation network width does not match the embedder");
    }
    return ck;
  });
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(read_file(path));
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(checkpoint));
}

}  // namespace vrc
