#pragma once

// Named model variants and their binding to a dataset.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "dftphys/dataset.hpp"
#include "dftphys/dft.hpp"
#include "dftphys/error.hpp"
#include "dftphys/link.hpp"
#include "dftphys/mnl.hpp"
#include "dftphys/normal.hpp"
#include "dftphys/params.hpp"

namespace dftphys {

inline const char* to_string(BaseKind b) {
  switch (b) {
    case BaseKind::StaticMnl: return "static_mnl";
    case BaseKind::GapMnl: return "gap_mnl";
    case BaseKind::StaticDft: return "static_dft";
    case BaseKind::GapDft: return "gap_dft";
  }
  return "?";
}

inline BaseKind parse_base_kind(const std::string& s) {
  for (auto b : {BaseKind::StaticMnl, BaseKind::GapMnl, BaseKind::StaticDft, BaseKind::GapDft})
    if (s == to_string(b)) return b;
  throw SpecError(fmt::format("unknown base model '{}' (static_mnl, static_dft, gap_mnl, gap_dft)", s));
}

inline Application application_of(BaseKind b) {
  return b == BaseKind::StaticMnl || b == BaseKind::StaticDft ? Application::Static : Application::Gap;
}

struct Variant {
  std::string name;
  BaseKind base = BaseKind::StaticMnl;
  ParamSpace space;
  LinkSpec link;

  Application application() const { return application_of(base); }
};

/// Attribute names of the apartment-choice design.
inline const std::vector<std::string>& default_static_attributes() {
  static const std::vector<std::string> a{"kitchen", "condition", "size", "transport"};
  return a;
}

namespace detail {

inline ParamDef linear(const std::string& name, double start = 0.0, bool fixed = false) {
  return ParamDef{name, start, fixed, Transform::Identity, 0.0, 1.0};
}

inline ParamDef positive(const std::string& name, double start, bool fixed = false) {
  return ParamDef{name, start, fixed, Transform::Exp, 0.0, 1.0};
}

inline ParamSpace static_mnl_space(const std::vector<std::string>& attrs) {
  ParamSpace s;
  for (const auto& a : attrs) s.add(linear("beta_" + a));
  return s;
}

/// Static DFT: beta, gamma, phi1, phi2, sigma_eps, tau. The first attribute is
/// the reference for both beta and gamma.
inline ParamSpace static_dft_space(const std::vector<std::string>& attrs, int J, bool free_beta,
                                   bool free_gamma) {
  ParamSpace s;
  for (std::size_t k = 0; k < attrs.size(); ++k)
    s.add(linear("beta_" + attrs[k], 1.0, !(free_beta && k > 0)));
  for (std::size_t k = 0; k < attrs.size(); ++k)
    s.add(linear("gamma_" + attrs[k], 0.0, !(free_gamma && k > 0)));
  s.add(positive("phi1", 1e-4));
  s.add(ParamDef{"phi2", 1.0 / J, true, Transform::ScaledLogistic, 0.0, 1.0 / J});
  s.add(positive("sigma_eps", 1.0));
  s.add(positive("tau", 1000.0, true));
  return s;
}

inline ParamSpace gap_base_space(bool dft) {
  ParamSpace s;
  for (const char* n : {"delta_G", "beta_gap", "beta_gapn", "beta_speed", "beta_pos", "alpha_age", "alpha_reg"})
    s.add(linear(n));
  if (dft) {
    s.add(linear("delta_bias"));
    s.add(positive("phi1", 1e-4, true));
    s.at("phi1").start = 0.0;
    s.add(ParamDef{"phi2", 0.0, true, Transform::ScaledLogistic, 0.0, 0.5});
    s.add(positive("sigma_eps", 1.0, true));
    s.add(positive("tau", 20.0));
  }
  return s;
}

inline void add_gaze_share_rows(Variant& v, LinkTarget target, bool count, bool time) {
  v.space.add(linear("alpha_gaze_count", 0.0, !count));
  v.space.add(linear("alpha_gaze_time", 0.0, !time));
  if (count) v.link.terms.push_back({target, "count_share", "alpha_gaze_count"});
  if (time) v.link.terms.push_back({target, "time_share", "alpha_gaze_time"});
}

inline void add_stress(Variant& v, LinkTarget target) {
  const char* features[] = {"x_scen", "z_hr", "z_scr"};
  const char* coefs[] = {"delta_stress", "alpha_hr", "alpha_scr"};
  for (int i = 0; i < 3; ++i) {
    v.space.add(linear(coefs[i]));
    v.link.terms.push_back({target, features[i], coefs[i]});
  }
  if (target == LinkTarget::ProcessNoise) v.link.override_fixed_noise = true;
}

inline void add_gaze(Variant& v, LinkTarget target) {
  const char* features[] = {"y_gaze_left", "y_gaze_yaw_sd", "y_gaze_pitch_sd"};
  const char* coefs[] = {"alpha_gaze_left", "alpha_gaze_yaw_sd", "alpha_gaze_pitch_sd"};
  for (int i = 0; i < 3; ++i) {
    v.space.add(linear(coefs[i]));
    v.link.terms.push_back({target, features[i], coefs[i]});
  }
}

}  // namespace detail

inline std::vector<std::string> variant_names(Application app) {
  if (app == Application::Static)
    return {"MNL-B", "DFT-B1", "DFT-B2", "DFT-E1", "DFT-E2", "DFT-E3",
            "DFT-E4", "DFT-E5", "DFT-E6", "MNL-E"};
  return {"MNL-B", "DFT-B", "MNL-S", "DFT-S1", "DFT-S2", "MNL-E", "DFT-E1", "DFT-E2", "DFT-E3"};
}

/// Empty variant of a base kind with its default parameter space (for custom models).
inline Variant base_variant(BaseKind base, const std::vector<std::string>& attrs = default_static_attributes(),
                            int J = 3) {
  Variant v;
  v.name = "custom";
  v.base = base;
  switch (base) {
    case BaseKind::StaticMnl: v.space = detail::static_mnl_space(attrs); break;
    case BaseKind::StaticDft: v.space = detail::static_dft_space(attrs, J, true, false); break;
    case BaseKind::GapMnl: v.space = detail::gap_base_space(false); break;
    case BaseKind::GapDft: v.space = detail::gap_base_space(true); break;
  }
  return v;
}

/// Predefined variant by application and table column name.
inline Variant make_variant(Application app, const std::string& name,
                            const std::vector<std::string>& attrs = default_static_attributes(),
                            int J = 3) {
  using detail::add_gaze;
  using detail::add_gaze_share_rows;
  using detail::add_stress;
  Variant v;
  v.name = name;
  if (app == Application::Static) {
    const bool b1 = name == "DFT-B1" || name == "DFT-E4" || name == "DFT-E6";
    if (name == "MNL-B" || name == "MNL-E") {
      v.base = BaseKind::StaticMnl;
      v.space = detail::static_mnl_space(attrs);
      if (name == "MNL-E") add_gaze_share_rows(v, LinkTarget::Scalings, true, false);
      return v;
    }
    v.base = BaseKind::StaticDft;
    if (name == "DFT-B1" || name == "DFT-B2") {
      v.space = detail::static_dft_space(attrs, J, !b1, b1);
      return v;
    }
    v.space = detail::static_dft_space(attrs, J, !b1, b1);
    if (name == "DFT-E1" || name == "DFT-E4") add_gaze_share_rows(v, LinkTarget::AttentionLogits, true, false);
    else if (name == "DFT-E2") add_gaze_share_rows(v, LinkTarget::AttentionLogits, false, true);
    else if (name == "DFT-E3") add_gaze_share_rows(v, LinkTarget::AttentionLogits, true, true);
    else if (name == "DFT-E5" || name == "DFT-E6") add_gaze_share_rows(v, LinkTarget::Scalings, true, false);
    else
      throw SpecError(fmt::format("unknown static variant '{}'; known: {}", name,
                                  fmt::join(variant_names(app), ", ")));
    return v;
  }

  if (name == "MNL-B" || name == "MNL-S" || name == "MNL-E") {
    v.base = BaseKind::GapMnl;
    v.space = detail::gap_base_space(false);
    if (name != "MNL-B") add_stress(v, LinkTarget::InitialPreference);
    if (name == "MNL-E") add_gaze(v, LinkTarget::InitialPreference);
    return v;
  }
  v.base = BaseKind::GapDft;
  v.space = detail::gap_base_space(true);
  if (name == "DFT-B") return v;
  if (name == "DFT-S1") {
    add_stress(v, LinkTarget::InitialPreference);
    return v;
  }
  if (name == "DFT-S2" || name == "DFT-E1" || name == "DFT-E2" || name == "DFT-E3") {
    add_stress(v, LinkTarget::ProcessNoise);
    if (name == "DFT-E1") add_gaze(v, LinkTarget::InitialPreference);
    if (name == "DFT-E2") add_gaze(v, LinkTarget::Scalings);
    if (name == "DFT-E3") add_gaze(v, LinkTarget::GapAttentionWeight);
    return v;
  }
  throw SpecError(fmt::format("unknown gap variant '{}'; known: {}", name,
                              fmt::join(variant_names(app), ", ")));
}

/// A variant bound to one dataset: per-observation choice probabilities.
class Model {
public:
  Model(Variant variant, const Dataset& data, OrthantOptions quadrature = {})
      : variant_(std::move(variant)),
        data_(&data),
        resolver_(variant_.base, variant_.link, variant_.space, data),
        quadrature_(quadrature) {
    if (variant_.base == BaseKind::StaticMnl) mnl_ = static_utility_spec(data.attribute_names, data.alternatives);
    if (variant_.base == BaseKind::GapMnl) mnl_ = gap_utility_spec(data);
    if (!is_dft(variant_.base)) binding_ = mnl_.bind(variant_.space.names());
    for (const auto& t : variant_.link.terms)
      if (data.vector_index(t.feature)) {
        validate_share_features(data);
        break;
      }
  }

  const Variant& variant() const { return variant_; }
  const ParamSpace& space() const { return variant_.space; }
  const Dataset& data() const { return *data_; }
  std::size_t size() const { return data_->size(); }

  /// Choice probabilities of every alternative for observation i.
  Eigen::VectorXd probabilities(std::size_t i, std::span<const double> theta) const {
    const Observation& o = data_->rows[i];
    if (is_dft(variant_.base)) {
      auto [task, params] = resolver_.resolve_dft(o, theta);
      return choice_probabilities(dft_moments(task, params), quadrature_);
    }
    const Eigen::VectorXd adjusted = resolver_.resolve_mnl(o, theta);
    return mnl_probability(utility(o, mnl_, binding_,
                                   std::span<const double>(adjusted.data(), static_cast<std::size_t>(adjusted.size()))));
  }

  double chosen_probability(std::size_t i, std::span<const double> theta) const {
    const Observation& o = data_->rows[i];
    if (is_dft(variant_.base)) {
      auto [task, params] = resolver_.resolve_dft(o, theta);
      return choice_probability(dft_moments(task, params), o.chosen, quadrature_);
    }
    return probabilities(i, theta)(o.chosen);
  }

  const Resolver& resolver() const { return resolver_; }

private:
  Variant variant_;
  const Dataset* data_;
  Resolver resolver_;
  OrthantOptions quadrature_;
  UtilitySpec mnl_;
  std::vector<int> binding_;
};

inline std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace dftphys
