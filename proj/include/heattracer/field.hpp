/*
 * Copyright 2026 The heattracer Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace heattracer {

/// Value of a scalar field and its first two spatial derivatives.
struct FieldJet {
  double u = 0.0;
  double ux = 0.0;
  double uxx = 0.0;
};

/// A velocity field u(t, x) that can be evaluated pointwise.
///
/// Implementations are immutable and safe to share between threads.
class VelocityField {
 public:
  virtual ~VelocityField() = default;

  virtual FieldJet jet(double t, double x) const = 0;
  virtual double value(double t, double x) const { return jet(t, x).u; }

  /// Jets at several positions sharing one time.
  virtual std::vector<FieldJet> jets(double t, std::span<const double> xs) const {
    std::vector<FieldJet> out;
    out.reserve(xs.size());
    for (double x : xs) out.push_back(jet(t, x));
    return out;
  }

  /// Smallest time at which the field is resolved. Queries below it throw.
  virtual double time_floor() const { return 0.0; }

  /// Spatial period, if the field lives on a torus.
  virtual std::optional<double> period() const { return std::nullopt; }

  /// Evaluation below the floor, used only by the short-time quadrature
  /// which flags such contributions as extrapolated.
  virtual double value_unchecked(double t, double x) const {
    return value(t, x);
  }
};

/// Field given by a closed-form expression. Used for synthetic checks.
class AnalyticField final : public VelocityField {
 public:
  using JetFn = std::function<FieldJet(double, double)>;

  explicit AnalyticField(JetFn fn, std::optional<double> period = {})
      : fn_(std::move(fn)), period_(period) {}

  FieldJet jet(double t, double x) const override { return fn_(t, x); }
  std::optional<double> period() const override { return period_; }

 private:
  JetFn fn_;
  std::optional<double> period_;
};

/// c * u for a fixed multiplier c.
class AmplifiedField final : public VelocityField {
 public:
  AmplifiedField(const VelocityField& base, double factor)
      : base_(&base), factor_(factor) {}

  FieldJet jet(double t, double x) const override {
    const FieldJet j = base_->jet(t, x);
    return {factor_ * j.u, factor_ * j.ux, factor_ * j.uxx};
  }
  double value(double t, double x) const override {
    return factor_ * base_->value(t, x);
  }
  double time_floor() const override { return base_->time_floor(); }
  std::optional<double> period() const override { return base_->period(); }
  double value_unchecked(double t, double x) const override {
    return factor_ * base_->value_unchecked(t, x);
  }

 private:
  const VelocityField* base_;  // not owned
  double factor_;
};

}  // namespace heattracer
