#pragma once

// Named parameter vectors with optional fixing and monotone transforms used by
// the optimizer.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "dftphys/error.hpp"

namespace dftphys {

enum class Transform { Identity, Exp, ScaledLogistic };

inline const char* to_string(Transform t) {
  switch (t) {
    case Transform::Identity: return "identity";
    case Transform::Exp: return "exp";
    case Transform::ScaledLogistic: return "logistic";
  }
  return "?";
}

inline Transform parse_transform(const std::string& s) {
  if (s == "identity") return Transform::Identity;
  if (s == "exp") return Transform::Exp;
  if (s == "logistic") return Transform::ScaledLogistic;
  throw SpecError(fmt::format("unknown transform '{}' (identity, exp, logistic)", s));
}

struct ParamDef {
  std::string name;
  double start = 0.0;
  bool fixed = false;
  Transform transform = Transform::Identity;
  double lower = 0.0;  ///< bounds of the scaled logistic
  double upper = 1.0;

  /// Natural-scale value from the optimizer's unconstrained coordinate.
  double forward(double u) const {
    switch (transform) {
      case Transform::Identity: return u;
      case Transform::Exp: return std::exp(u);
      case Transform::ScaledLogistic: return lower + (upper - lower) / (1.0 + std::exp(-u));
    }
    return u;
  }

  double inverse(double v) const {
    switch (transform) {
      case Transform::Identity: return v;
      case Transform::Exp:
        if (!(v > 0.0))
          throw StartValueError(fmt::format("{} = {} must be > 0 under the exp transform", name, v));
        return std::log(v);
      case Transform::ScaledLogistic:
        if (!(v > lower && v < upper))
          throw StartValueError(fmt::format("{} = {} must lie strictly inside ({}, {})", name, v,
                                            lower, upper));
        return std::log((v - lower) / (upper - v));
    }
    return v;
  }

  /// d forward / du.
  double derivative(double u) const {
    switch (transform) {
      case Transform::Identity: return 1.0;
      case Transform::Exp: return std::exp(u);
      case Transform::ScaledLogistic: {
        const double s = 1.0 / (1.0 + std::exp(-u));
        return (upper - lower) * s * (1.0 - s);
      }
    }
    return 1.0;
  }
};

/// Ordered set of named parameters.
class ParamSpace {
public:
  ParamSpace() = default;
  explicit ParamSpace(std::vector<ParamDef> defs) : defs_(std::move(defs)) {}

  void add(ParamDef def) {
    if (index(def.name))
      throw SpecError(fmt::format("parameter '{}' defined twice", def.name));
    defs_.push_back(std::move(def));
  }

  std::size_t size() const { return defs_.size(); }
  const std::vector<ParamDef>& defs() const { return defs_; }
  const ParamDef& operator[](std::size_t i) const { return defs_[i]; }

  std::optional<std::size_t> index(const std::string& name) const {
    for (std::size_t i = 0; i < defs_.size(); ++i)
      if (defs_[i].name == name) return i;
    return std::nullopt;
  }

  std::size_t require(const std::string& name) const {
    if (auto i = index(name)) return *i;
    throw SpecError(fmt::format("unknown parameter '{}'", name));
  }

  ParamDef& at(const std::string& name) { return defs_[require(name)]; }
  const ParamDef& at(const std::string& name) const { return defs_[require(name)]; }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& d : defs_) out.push_back(d.name);
    return out;
  }

  Eigen::VectorXd starts() const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(defs_.size()));
    for (std::size_t i = 0; i < defs_.size(); ++i) v(static_cast<Eigen::Index>(i)) = defs_[i].start;
    return v;
  }

  std::vector<std::size_t> free_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < defs_.size(); ++i)
      if (!defs_[i].fixed) out.push_back(i);
    return out;
  }

  std::size_t free_count() const { return free_indices().size(); }

  /// Full natural-scale vector: fixed entries from `base`, free ones from u.
  Eigen::VectorXd expand(const Eigen::VectorXd& u, const Eigen::VectorXd& base) const {
    Eigen::VectorXd theta = base;
    const auto fi = free_indices();
    for (std::size_t k = 0; k < fi.size(); ++k)
      theta(static_cast<Eigen::Index>(fi[k])) = defs_[fi[k]].forward(u(static_cast<Eigen::Index>(k)));
    return theta;
  }

  /// Unconstrained coordinates of the free entries of theta.
  Eigen::VectorXd contract(const Eigen::VectorXd& theta) const {
    const auto fi = free_indices();
    Eigen::VectorXd u(static_cast<Eigen::Index>(fi.size()));
    for (std::size_t k = 0; k < fi.size(); ++k)
      u(static_cast<Eigen::Index>(k)) = defs_[fi[k]].inverse(theta(static_cast<Eigen::Index>(fi[k])));
    return u;
  }

private:
  std::vector<ParamDef> defs_;
};

}  // namespace dftphys
