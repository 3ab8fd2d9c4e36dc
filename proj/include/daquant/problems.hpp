// SPDX-License-Identifier: Apache-2.0
//
// Learning tasks: per-sample loss/gradient, exact full-dataset risk (test
// oracle), finite-difference checking, and smoothness constants.
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "daquant/dataq.hpp"
#include "daquant/random.hpp"

namespace daquant {

enum class TaskKind { LeastSquares, Logistic, PolyLogistic, Mlp2 };

// How the label travels next to the quantized features. Packed labels are
// quantized jointly as the last coordinate of z; exempt labels are sent
// losslessly and charged to the meter.
enum class LabelTransport { Packed, ClassBits, Float64 };

class Task {
 public:
  virtual ~Task() = default;

  TaskKind kind() const { return kind_; }
  int data_dim() const { return data_dim_; }    // d of the quantized vector
  int model_dim() const { return model_dim_; }  // h
  double bound() const { return bound_; }       // B for the quantized vector
  double hypothesis_radius() const { return w_radius_; }
  LabelTransport label_transport() const { return label_transport_; }
  int num_classes() const { return num_classes_; }
  std::int64_t label_bits() const;

  std::size_t dataset_size() const { return rows_.size(); }
  // The vector handed to the quantizer for sample i.
  DataPoint data_vector(std::size_t i) const;
  double label_value(std::size_t i) const;  // exempt-label tasks

  // Evaluation on (possibly reconstructed) data. Packed tasks ignore the
  // label argument; the label is the last coordinate of zdata.
  virtual double loss(std::span<const double> w, std::span<const double> zdata,
                      double label) const = 0;
  virtual std::vector<double> grad(std::span<const double> w,
                                   std::span<const double> zdata,
                                   double label) const = 0;

  double sample_loss(std::size_t i, std::span<const double> w) const;
  std::vector<double> sample_grad(std::size_t i,
                                  std::span<const double> w) const;

  // Exact average over the N dataset points: (L(w), grad L(w)).
  std::pair<double, std::vector<double>> full_risk(
      std::span<const double> w) const;

  std::optional<double> analytic_cw() const { return c_w_; }
  std::optional<double> analytic_cz() const { return c_z_; }

 protected:
  TaskKind kind_{};
  int data_dim_ = 0;
  int model_dim_ = 0;
  double bound_ = 1.0;
  double w_radius_ = 1.0;
  LabelTransport label_transport_ = LabelTransport::Packed;
  int num_classes_ = 0;
  std::optional<double> c_w_, c_z_;
  std::vector<std::vector<double>> rows_;  // [features..., label]
};

struct TaskConfig {
  TaskKind kind = TaskKind::LeastSquares;
  int dx = 2;             // feature dimension
  int degree = 3;         // PolyLogistic: polynomial degree k (h = k+1)
  int hidden = 8;         // Mlp2: hidden width
  std::size_t n_samples = 100;
  double bound = 1.0;     // B
  double noise = 0.1;     // regression label noise
  double flip_rate = 0.0; // classification label flips
  double margin = 0.0;     // logistic: reject points inside the teacher margin
  double margin_cap = 0.0; // logistic: reject points beyond this margin (0: off)
  double w_radius = 0.0;  // 0 -> task default
  std::uint64_t seed = 1;
  std::string dataset_path;  // when set, rows are loaded instead of generated
};

std::unique_ptr<Task> make_task(const TaskConfig& cfg);

// Rows of comma-separated reals, last column = label.
std::vector<std::vector<double>> load_dataset_csv(const std::string& path);

// Central finite differences of the loss w.r.t. w.
std::vector<double> fd_gradient(const Task& task, std::span<const double> w,
                                std::span<const double> zdata, double label,
                                double step = 1e-5);

// Empirical Lipschitz probe: max over sampled (w, z, z_Q) of
// ||g_z(w) - g_zQ(w)|| / ||z - z_Q||. Degenerate draws (z_Q == z) are
// skipped.
double estimate_cz(const Task& task, const QuantConfig& qcfg,
                   const SetSizeTable& table, int trials, RandomStream& rng);

// Example-1 style 1-bit baseline for the linear loss (z/sqrt(h)) 1^T w:
// transmits one stochastic bit, reconstructs ghat = (z_Q/sqrt(h)) 1.
struct Example1Result {
  bool bit = false;
  std::vector<double> ghat;
};
Example1Result example1_baseline(std::span<const double> w, double z,
                                 RandomStream& rng);

// Derivative of the logistic link used by the polynomial-feature example:
// f_y'(u) = -y * sigmoid(-y u); |f'| <= 1 for y in {-1, +1}.
double poly_logistic_fprime(double u, double y);

}  // namespace daquant
