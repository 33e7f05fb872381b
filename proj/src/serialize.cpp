#include "fowlerlab/serialize.hpp"

#include <cmath>

#include "fowlerlab/error.hpp"

namespace fl {

namespace {

nlohmann::json k_to_json(const KParams& k) {
  return {{"kInf", k.kInf}, {"amp", k.amp}, {"eta", k.eta}, {"gamma", k.gamma}};
}

KParams k_from_json(const nlohmann::json& j) {
  KParams k;
  if (!j.is_object()) fail(ErrorCode::InvalidArgument, "k parameters must be an object");
  k.kInf = j.value("kInf", k.kInf);
  k.amp = j.value("amp", k.amp);
  k.eta = j.value("eta", k.eta);
  k.gamma = j.value("gamma", k.gamma);
  return k;
}

}  // namespace

nlohmann::json number_json(double x) {
  if (std::isnan(x)) return nullptr;
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

nlohmann::json spec_to_json(const PotentialSpec& s) {
  nlohmann::json j = {{"family", family_name(s.family)}, {"q", s.q}, {"delta", s.delta}, {"k", k_to_json(s.k)}};
  if (s.family == Family::TwoPower) {
    j["q2"] = s.q2;
    j["delta2"] = s.delta2;
    j["k2"] = k_to_json(s.k2);
  }
  j["describe"] = s.describe();
  return j;
}

PotentialSpec spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorCode::InvalidArgument, "potential spec must be a JSON object");
  try {
    PotentialSpec s;
    s.family = family_from_name(j.value("family", std::string("PurePower")));
    s.q = j.value("q", s.q);
    s.delta = j.value("delta", s.delta);
    if (j.contains("k")) s.k = k_from_json(j["k"]);
    s.q2 = j.value("q2", s.q2);
    s.delta2 = j.value("delta2", s.delta2);
    if (j.contains("k2")) s.k2 = k_from_json(j["k2"]);
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidArgument, std::string("potential spec: ") + e.what());
  }
}

nlohmann::json exponents_to_json(const ExponentTable& t) {
  return {
      {"n", t.n},
      {"twoStar", number_json(t.twoStar)},
      {"sigmaStarPaperFormula", number_json(t.sigmaStarPaper)},
      {"sigmaStarLower", number_json(t.sigmaStarLower)},
      {"sigmaStarUpper", number_json(t.sigmaStarUpper)},
      {"l_s", t.l_s},
      {"l_u", t.l_u},
      {"m_s", t.m_s},
      {"m_u", t.m_u},
      {"A", t.A},
      {"B", t.B},
      {"A_u", t.A_u},
      {"B_u", t.B_u},
      {"P1plus", t.P1plus},
      {"P1minus", t.P1minus},
      {"dgPlus", t.dgPlus},
      {"dgMinus", t.dgMinus},
      {"discriminant", t.discriminant},
      {"discriminantMinus", t.discriminantMinus},
      {"lambda1", t.lambda1},
      {"lambda2", t.lambda2},
      {"lambdaImag", t.lambdaImag},
      {"regime", regime_name(t.regime)},
      {"regimeMinus", regime_name(t.regimeMinus)},
      {"qBar", t.qBar},
      {"deltaBar", t.deltaBar},
  };
}

nlohmann::json hypotheses_to_json(const HypothesisReport& r) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& it : r.items) {
    nlohmann::json e = {{"name", it.name}, {"verdict", verdict_name(it.verdict)}, {"note", it.note}};
    if (it.verdict == Verdict::Fail) e["witness"] = {{"y1", it.witnessY1}, {"s", it.witnessS}};
    items.push_back(e);
  }
  return {{"items", items},
          {"allPass", r.all_pass()},
          {"meta",
           {{"varpiPlus", number_json(r.meta.varpiPlus)},
            {"varpiMinus", number_json(r.meta.varpiMinus)},
            {"gamma", number_json(r.meta.gamma)},
            {"c", number_json(r.meta.c)},
            {"scriptGZero", r.meta.scriptGZero}}}};
}

}  // namespace fl
