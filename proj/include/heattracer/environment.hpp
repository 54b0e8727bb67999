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

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "heattracer/field.hpp"

namespace heattracer {

/// \f$\partial_x^n P_t(x)\f$ for the heat kernel
/// \f$P_t(x) = e^{-x^2/4t} / \sqrt{4\pi t}\f$. Orders 0 through 4.
/// Throws std::domain_error for t <= 0 or an unsupported order.
double heat_kernel(double t, double x, int d_order = 0);

enum class PairOrder { kUU, kDxuDxu, kDtuDtu };

struct SpaceTimePoint {
  double t = 0.0;
  double x = 0.0;
};

struct CovarianceRequest {
  SpaceTimePoint a;
  SpaceTimePoint b;
  PairOrder pair_order = PairOrder::kUU;
};

struct Periodization {
  double period = 0.0;
  /// Drop the k = 0 Fourier component, i.e. return the covariance of the
  /// spatially mean-free torus field.
  bool zero_mean = false;
};

/// Covariance of the pair requested. Without periodization this is the
/// infinite-line formula (P_{t+s}, -P''_{t+s}, P''''_{t+s}); with it, the
/// wrapped sum over images x - y + n * period.
double covariance(const CovarianceRequest& request,
                  std::optional<Periodization> periodization = {});

enum class Backend { kSpectral, kExactOracle };

enum class ZeroMode { kIncluded, kExcluded };

struct EnvironmentSpec {
  double domain_length = 50.0;
  int mode_count = 512;
  std::uint64_t seed = 0;
  Backend backend = Backend::kSpectral;
  ZeroMode zero_mode = ZeroMode::kIncluded;

  double lattice_spacing() const { return domain_length / mode_count; }
  double time_floor() const { return lattice_spacing() * lattice_spacing(); }
  void validate() const;
};

/// One sampled realization of u(t, x) = -d/dx (P_t * B)(x) on a torus of
/// circumference Λ, stored as Gaussian Fourier amplitudes. Mode m carries
/// wave number k_m = 2πm/Λ and decays as exp(-k_m² t).
class Environment final : public VelocityField {
 public:
  explicit Environment(const EnvironmentSpec& spec);

  const EnvironmentSpec& spec() const { return spec_; }

  FieldJet jet(double t, double x) const override;
  double value(double t, double x) const override;
  double time_floor() const override { return spec_.time_floor(); }
  std::optional<double> period() const override {
    return spec_.domain_length;
  }
  double value_unchecked(double t, double x) const override;

  /// d^order/dx^order u(t, x) for order in {0, 1, 2}.
  double eval_u(double t, double x, int d_order) const;

  /// Jets at many positions sharing one time; amortizes the decay factors.
  std::vector<FieldJet> jets(double t,
                              std::span<const double> xs) const override;
  std::vector<double> values(double t, std::span<const double> xs) const;

  /// Closed-form time integral of u(s, x) over s in [0, theta], mode by mode.
  double time_integral(double x, double theta) const;

  /// Value of the k = 0 component (constant in space and time).
  double zero_mode_value() const { return zero_mode_; }

  /// Number of Fourier modes that contribute at time t.
  int active_modes(double t) const;

 private:
  void check_time(double t) const;
  void decay_factors(double t, int count, double* out) const;

  EnvironmentSpec spec_;
  double k1_ = 0.0;
  double zero_mode_ = 0.0;
  std::vector<double> cos_amp_;  // sqrt(2/Λ) a_m, m = 1..M/2
  std::vector<double> sin_amp_;  // sqrt(2/Λ) b_m
};

/// Builds the spectral realization for spec.seed. Throws ConfigError for an
/// invalid spec or for the exact-oracle backend, which does not produce a
/// full realization (use sample_points instead).
Environment sample_environment(const EnvironmentSpec& spec);

struct GaussSample {
  std::vector<double> values;
  bool regularized = false;
};

/// One joint draw of (u(t_i, x_i))_i on the infinite line by Cholesky
/// factorization of Σ_ij = P_{t_i + t_j}(x_i - x_j). Coincident points share
/// a value. At most 2000 points.
GaussSample exact_gauss_sample(std::span<const SpaceTimePoint> points,
                               std::uint64_t seed);

/// Joint draw of u at the given points using the backend named in spec.
std::vector<double> sample_points(const EnvironmentSpec& spec,
                                  std::span<const SpaceTimePoint> points);

/// v(t, x) = α^{1/4} u(α t, α^{1/2} x). Equal in law to u.
/// Holds a non-owning reference to the base field.
class ScaledField final : public VelocityField {
 public:
  ScaledField(const VelocityField& base, double alpha);

  FieldJet jet(double t, double x) const override;
  double value(double t, double x) const override;
  double time_floor() const override;
  std::optional<double> period() const override;
  double value_unchecked(double t, double x) const override;

  double alpha() const { return alpha_; }

 private:
  const VelocityField* base_;
  double alpha_;
  double amp_;
  double space_;
};

ScaledField scaling_view(const VelocityField& field, double alpha);

/// Deterministic 64-bit seed for stream `index` derived from `base`.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

}  // namespace heattracer
