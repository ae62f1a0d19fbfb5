#include "slogan/model.hpp"

namespace slogan {

SloganModel SloganModel::init(std::size_t feature_dim, int num_classes, const DisentangleConfig& cfg, Rng& rng) {
  SloganModel m;
  m.dis_cfg = cfg;
  m.num_classes = num_classes;
  m.encoder = EncoderParams::init(feature_dim, kHiddenDim, rng);
  m.heads = ProjectionHeads::init(kHiddenDim, cfg, rng);
  m.classifier = Linear::glorot(cfg.causal_dim, static_cast<std::size_t>(num_classes), rng);
  m.generator = GeneratorParams::init(cfg.causal_dim + cfg.spurious_dim, kHiddenDim, kHiddenDim, rng);
  m.critic = CriticParams::init(cfg, kHiddenDim, num_classes, rng);

  m.encoder.register_in(m.backbone);
  m.heads.causal.register_in(m.backbone, "heads.causal");
  m.classifier.register_in(m.backbone, "classifier");
  m.heads.spurious.register_in(m.spurious, "heads.spurious");
  m.generator.register_in(m.generator_store);
  m.critic.register_in(m.critic_store);
  return m;
}

void SloganModel::rebind() {
  auto lin = [](Linear& l, const ParamStore& s, const std::string& prefix) {
    l.weight = s.get(prefix + ".weight");
    l.bias = s.get(prefix + ".bias");
  };
  lin(encoder.layer1, backbone, "encoder.layer1");
  lin(encoder.layer2, backbone, "encoder.layer2");
  lin(heads.causal, backbone, "heads.causal");
  lin(classifier, backbone, "classifier");
  lin(heads.spurious, spurious, "heads.spurious");
  lin(generator.hidden, generator_store, "generator.hidden");
  lin(generator.output, generator_store, "generator.output");
  critic.w_causal = critic_store.get("critic.w_causal");
  critic.w_psi = critic_store.get("critic.w_psi");
  lin(critic.variational, critic_store, "critic.variational");
}

SloganModel SloganModel::clone() const {
  SloganModel m;
  m.dis_cfg = dis_cfg;
  m.num_classes = num_classes;
  m.backbone = backbone.deep_copy();
  m.spurious = spurious.deep_copy();
  m.generator_store = generator_store.deep_copy();
  m.critic_store = critic_store.deep_copy();
  m.rebind();
  return m;
}

SloganModel::Output SloganModel::forward(const GraphBatch& batch) const {
  const GraphRepr repr = encode(batch, encoder);
  DisentangledFeatures feats = split_features(repr.z, heads);
  Tensor logits = head_logits(feats.z_c, classifier);
  return {std::move(feats), std::move(logits)};
}

std::vector<real> SloganModel::flat_parameters() const {
  std::vector<real> out;
  for (const ParamStore* s : {&backbone, &spurious, &generator_store, &critic_store}) {
    const auto v = s->flat_values();
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

}  // namespace slogan
