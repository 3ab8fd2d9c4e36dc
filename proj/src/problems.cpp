// SPDX-License-Identifier: Apache-2.0
#include "daquant/problems.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "daquant/errors.hpp"
#include "daquant/scalar_code.hpp"

namespace daquant {

namespace {

double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// log(1 + exp(t)) without overflow.
double softplus(double t) {
  if (t > 0) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}

void check_dims(const Task& task, std::span<const double> w,
                std::span<const double> zdata) {
  if (static_cast<int>(w.size()) != task.model_dim())
    throw DomainError("task: model vector has wrong dimension");
  if (static_cast<int>(zdata.size()) != task.data_dim())
    throw DomainError("task: data vector has wrong dimension");
}

// Scale rows so the max norm of the quantized vector equals B exactly.
void normalize_rows(std::vector<std::vector<double>>& rows, double bound,
                    bool include_label) {
  double max_norm = 0;
  for (const auto& row : rows) {
    double s = 0;
    const std::size_t n = include_label ? row.size() : row.size() - 1;
    for (std::size_t j = 0; j < n; ++j) s += row[j] * row[j];
    max_norm = std::max(max_norm, std::sqrt(s));
  }
  if (max_norm == 0) return;
  const double c = bound / max_norm;
  for (auto& row : rows) {
    const std::size_t n = include_label ? row.size() : row.size() - 1;
    for (std::size_t j = 0; j < n; ++j) row[j] *= c;
  }
}

double max_abs_label(const std::vector<std::vector<double>>& rows) {
  double m = 0;
  for (const auto& row : rows) m = std::max(m, std::abs(row.back()));
  return m;
}

class LeastSquaresTask final : public Task {
 public:
  LeastSquaresTask(std::vector<std::vector<double>> rows, double bound,
                   double w_radius) {
    kind_ = TaskKind::LeastSquares;
    rows_ = std::move(rows);
    bound_ = bound;
    w_radius_ = w_radius;
    data_dim_ = static_cast<int>(rows_.front().size()) - 1;
    model_dim_ = data_dim_ + 1;  // [x; 1] with bias
    label_transport_ = LabelTransport::Float64;
    const double bx = std::sqrt(bound_ * bound_ + 1.0);
    c_w_ = bx * bx;
    c_z_ = 2.0 * w_radius_ * bx + max_abs_label(rows_);
  }

  double loss(std::span<const double> w, std::span<const double> x,
              double y) const override {
    check_dims(*this, w, x);
    const double r = residual(w, x, y);
    return 0.5 * r * r;
  }

  std::vector<double> grad(std::span<const double> w,
                           std::span<const double> x,
                           double y) const override {
    check_dims(*this, w, x);
    const double r = residual(w, x, y);
    std::vector<double> g(w.size());
    for (std::size_t j = 0; j < x.size(); ++j) g[j] = r * x[j];
    g.back() = r;  // bias feature
    return g;
  }

 private:
  double residual(std::span<const double> w, std::span<const double> x,
                  double y) const {
    double u = w.back();
    for (std::size_t j = 0; j < x.size(); ++j) u += w[j] * x[j];
    return u - y;
  }
};

class LogisticTask final : public Task {
 public:
  LogisticTask(std::vector<std::vector<double>> rows, double bound,
               double w_radius) {
    kind_ = TaskKind::Logistic;
    rows_ = std::move(rows);
    bound_ = bound;
    w_radius_ = w_radius;
    data_dim_ = static_cast<int>(rows_.front().size()) - 1;
    model_dim_ = data_dim_ + 1;
    label_transport_ = LabelTransport::ClassBits;
    num_classes_ = 2;
    const double bx2 = bound_ * bound_ + 1.0;
    c_w_ = bx2 / 4.0;
    c_z_ = 1.0 + std::sqrt(bx2) * w_radius_ / 4.0;
  }

  double loss(std::span<const double> w, std::span<const double> x,
              double y) const override {
    check_dims(*this, w, x);
    return softplus(-y * margin(w, x));
  }

  std::vector<double> grad(std::span<const double> w,
                           std::span<const double> x,
                           double y) const override {
    check_dims(*this, w, x);
    const double s = -y * sigmoid(-y * margin(w, x));
    std::vector<double> g(w.size());
    for (std::size_t j = 0; j < x.size(); ++j) g[j] = s * x[j];
    g.back() = s;
    return g;
  }

 private:
  double margin(std::span<const double> w, std::span<const double> x) const {
    double u = w.back();
    for (std::size_t j = 0; j < x.size(); ++j) u += w[j] * x[j];
    return u;
  }
};

class PolyLogisticTask final : public Task {
 public:
  PolyLogisticTask(std::vector<std::vector<double>> rows, int degree,
                   double w_radius) {
    kind_ = TaskKind::PolyLogistic;
    rows_ = std::move(rows);
    bound_ = 1.0;
    w_radius_ = w_radius;
    data_dim_ = 1;
    degree_ = degree;
    model_dim_ = degree + 1;
    label_transport_ = LabelTransport::ClassBits;
    num_classes_ = 2;
    c_w_ = std::sqrt(static_cast<double>(model_dim_)) / 4.0;
  }

  double loss(std::span<const double> w, std::span<const double> z,
              double y) const override {
    check_dims(*this, w, z);
    const double u = feature_dot(w, z[0]);
    return softplus(-y * u) / std::sqrt(static_cast<double>(model_dim_));
  }

  std::vector<double> grad(std::span<const double> w,
                           std::span<const double> z,
                           double y) const override {
    check_dims(*this, w, z);
    const double u = feature_dot(w, z[0]);
    const double s =
        poly_logistic_fprime(u, y) / std::sqrt(static_cast<double>(model_dim_));
    std::vector<double> g(w.size());
    double zp = 1.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
      g[j] = s * zp;
      zp *= z[0];
    }
    return g;
  }

 private:
  double feature_dot(std::span<const double> w, double z) const {
    double u = 0, zp = 1.0;
    for (std::size_t j = 0; j < w.size(); ++j) {
      u += w[j] * zp;
      zp *= z;
    }
    return u;
  }

  int degree_;
};

// Two-layer perceptron with tanh hidden units, scalar output, squared loss.
// Parameters pack as [vec(W1) row-major, w2]; the label is the last
// coordinate of the packed data vector.
class Mlp2Task final : public Task {
 public:
  Mlp2Task(std::vector<std::vector<double>> rows, int hidden, double bound,
           double w_radius) {
    kind_ = TaskKind::Mlp2;
    rows_ = std::move(rows);
    bound_ = bound;
    w_radius_ = w_radius;
    hidden_ = hidden;
    data_dim_ = static_cast<int>(rows_.front().size());  // label packed
    dx_ = data_dim_ - 1;
    model_dim_ = hidden_ * dx_ + hidden_;
    label_transport_ = LabelTransport::Packed;
  }

  double loss(std::span<const double> w, std::span<const double> z,
              double) const override {
    check_dims(*this, w, z);
    const double r = forward(w, z) - z.back();
    return 0.5 * r * r;
  }

  std::vector<double> grad(std::span<const double> w,
                           std::span<const double> z,
                           double) const override {
    check_dims(*this, w, z);
    std::vector<double> act(static_cast<std::size_t>(hidden_));
    double pred = 0;
    for (int r = 0; r < hidden_; ++r) {
      double u = 0;
      for (int j = 0; j < dx_; ++j)
        u += w[static_cast<std::size_t>(r * dx_ + j)] * z[static_cast<std::size_t>(j)];
      act[static_cast<std::size_t>(r)] = std::tanh(u);
      pred += w[static_cast<std::size_t>(hidden_ * dx_ + r)] *
              act[static_cast<std::size_t>(r)];
    }
    const double err = pred - z.back();
    std::vector<double> g(w.size());
    for (int r = 0; r < hidden_; ++r) {
      const double a = act[static_cast<std::size_t>(r)];
      const double back =
          err * w[static_cast<std::size_t>(hidden_ * dx_ + r)] * (1.0 - a * a);
      for (int j = 0; j < dx_; ++j)
        g[static_cast<std::size_t>(r * dx_ + j)] = back * z[static_cast<std::size_t>(j)];
      g[static_cast<std::size_t>(hidden_ * dx_ + r)] = err * a;
    }
    return g;
  }

 private:
  double forward(std::span<const double> w, std::span<const double> z) const {
    double pred = 0;
    for (int r = 0; r < hidden_; ++r) {
      double u = 0;
      for (int j = 0; j < dx_; ++j)
        u += w[static_cast<std::size_t>(r * dx_ + j)] * z[static_cast<std::size_t>(j)];
      pred += w[static_cast<std::size_t>(hidden_ * dx_ + r)] * std::tanh(u);
    }
    return pred;
  }

  int hidden_, dx_;
};

std::vector<std::vector<double>> generate_rows(const TaskConfig& cfg) {
  RandomStream rng = RandomStream::derive(cfg.seed, StreamPurpose::Dataset);
  std::vector<std::vector<double>> rows;
  rows.reserve(cfg.n_samples);
  switch (cfg.kind) {
    case TaskKind::LeastSquares: {
      std::vector<double> wt(static_cast<std::size_t>(cfg.dx) + 1);
      for (auto& v : wt) v = rng.normal();
      for (std::size_t i = 0; i < cfg.n_samples; ++i) {
        std::vector<double> row(static_cast<std::size_t>(cfg.dx) + 1);
        for (int j = 0; j < cfg.dx; ++j)
          row[static_cast<std::size_t>(j)] = rng.normal();
        rows.push_back(std::move(row));
      }
      normalize_rows(rows, cfg.bound, false);
      for (auto& row : rows) {
        double y = wt.back();
        for (int j = 0; j < cfg.dx; ++j)
          y += wt[static_cast<std::size_t>(j)] * row[static_cast<std::size_t>(j)];
        row.back() = y + cfg.noise * rng.normal();
      }
      break;
    }
    case TaskKind::Logistic: {
      // unit-norm teacher with a small bias; features drawn uniformly in the
      // B-ball, optionally resampled until they clear the teacher margin
      std::vector<double> wt(static_cast<std::size_t>(cfg.dx) + 1);
      double n2 = 0;
      for (auto& v : wt) {
        v = rng.normal();
        n2 += v * v;
      }
      for (auto& v : wt) v /= std::sqrt(n2);
      wt.back() *= 0.1;
      for (std::size_t i = 0; i < cfg.n_samples; ++i) {
        std::vector<double> row(static_cast<std::size_t>(cfg.dx) + 1);
        double u = 0;
        do {
          double x2 = 0;
          for (int j = 0; j < cfg.dx; ++j) {
            row[static_cast<std::size_t>(j)] = rng.normal();
            x2 += row[static_cast<std::size_t>(j)] * row[static_cast<std::size_t>(j)];
          }
          const double radius =
              cfg.bound *
              std::pow(rng.uniform(), 1.0 / static_cast<double>(cfg.dx));
          for (int j = 0; j < cfg.dx; ++j)
            row[static_cast<std::size_t>(j)] *= radius / std::sqrt(x2);
          u = wt.back();
          for (int j = 0; j < cfg.dx; ++j)
            u += wt[static_cast<std::size_t>(j)] * row[static_cast<std::size_t>(j)];
        } while (std::abs(u) < cfg.margin ||
                 (cfg.margin_cap > 0 && std::abs(u) > cfg.margin_cap));
        double y;
        if (cfg.noise > 0) {
          // probabilistic teacher: P(y=+1) = sigmoid(u / noise)
          const double p = 1.0 / (1.0 + std::exp(-u / cfg.noise));
          y = rng.uniform() < p ? 1.0 : -1.0;
        } else {
          y = u >= 0 ? 1.0 : -1.0;
        }
        if (rng.uniform() < cfg.flip_rate) y = -y;
        row.back() = y;
        rows.push_back(std::move(row));
      }
      break;
    }
    case TaskKind::PolyLogistic: {
      std::vector<double> wt(static_cast<std::size_t>(cfg.degree) + 1);
      double n2 = 0;
      for (auto& v : wt) {
        v = rng.normal();
        n2 += v * v;
      }
      for (auto& v : wt) v /= std::sqrt(n2);
      for (std::size_t i = 0; i < cfg.n_samples; ++i) {
        const double z = 2.0 * rng.uniform() - 1.0;
        double u = 0, zp = 1.0;
        for (std::size_t j = 0; j < wt.size(); ++j) {
          u += wt[j] * zp;
          zp *= z;
        }
        double y = u >= 0 ? 1.0 : -1.0;
        if (rng.uniform() < cfg.flip_rate) y = -y;
        rows.push_back({z, y});
      }
      break;
    }
    case TaskKind::Mlp2: {
      const int dx = cfg.dx;
      const int hid = cfg.hidden;
      std::vector<double> w1(static_cast<std::size_t>(hid * dx)), w2(static_cast<std::size_t>(hid));
      for (auto& v : w1) v = rng.normal() / std::sqrt(static_cast<double>(dx));
      for (auto& v : w2) v = rng.normal() / std::sqrt(static_cast<double>(hid));
      for (std::size_t i = 0; i < cfg.n_samples; ++i) {
        std::vector<double> row(static_cast<std::size_t>(dx) + 1);
        for (int j = 0; j < dx; ++j)
          row[static_cast<std::size_t>(j)] = rng.normal();
        double pred = 0;
        for (int r = 0; r < hid; ++r) {
          double u = 0;
          for (int j = 0; j < dx; ++j)
            u += w1[static_cast<std::size_t>(r * dx + j)] * row[static_cast<std::size_t>(j)];
          pred += w2[static_cast<std::size_t>(r)] * std::tanh(u);
        }
        row.back() = pred + cfg.noise * rng.normal();
        rows.push_back(std::move(row));
      }
      normalize_rows(rows, cfg.bound, true);
      break;
    }
  }
  return rows;
}

double default_radius(TaskKind kind) {
  return kind == TaskKind::PolyLogistic ? 1.0 : 5.0;
}

}  // namespace

std::int64_t Task::label_bits() const {
  switch (label_transport_) {
    case LabelTransport::Packed:
      return 0;
    case LabelTransport::ClassBits:
      return ceil_log2_u64(static_cast<std::uint64_t>(num_classes_));
    case LabelTransport::Float64:
      return 64;
  }
  return 0;
}

DataPoint Task::data_vector(std::size_t i) const {
  const auto& row = rows_.at(i);
  if (label_transport_ == LabelTransport::Packed)
    return DataPoint(row);
  return DataPoint(std::vector<double>(row.begin(), row.end() - 1));
}

double Task::label_value(std::size_t i) const { return rows_.at(i).back(); }

double Task::sample_loss(std::size_t i, std::span<const double> w) const {
  const DataPoint z = data_vector(i);
  return loss(w, z.values, label_value(i));
}

std::vector<double> Task::sample_grad(std::size_t i,
                                      std::span<const double> w) const {
  const DataPoint z = data_vector(i);
  return grad(w, z.values, label_value(i));
}

std::pair<double, std::vector<double>> Task::full_risk(
    std::span<const double> w) const {
  if (rows_.empty()) throw DomainError("full_risk: empty dataset");
  double total = 0;
  std::vector<double> g(w.size(), 0.0);
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    total += sample_loss(i, w);
    const auto gi = sample_grad(i, w);
    for (std::size_t j = 0; j < g.size(); ++j) g[j] += gi[j];
  }
  const double inv = 1.0 / static_cast<double>(rows_.size());
  total *= inv;
  for (auto& v : g) v *= inv;
  return {total, std::move(g)};
}

std::unique_ptr<Task> make_task(const TaskConfig& cfg) {
  if (cfg.n_samples == 0 && cfg.dataset_path.empty())
    throw ConfigError("task.n: dataset must be nonempty");
  auto rows = cfg.dataset_path.empty() ? generate_rows(cfg)
                                       : load_dataset_csv(cfg.dataset_path);
  if (rows.empty()) throw ConfigError("task: dataset must be nonempty");
  const double radius =
      cfg.w_radius > 0 ? cfg.w_radius : default_radius(cfg.kind);
  switch (cfg.kind) {
    case TaskKind::LeastSquares:
      return std::make_unique<LeastSquaresTask>(std::move(rows), cfg.bound,
                                                radius);
    case TaskKind::Logistic:
      return std::make_unique<LogisticTask>(std::move(rows), cfg.bound,
                                            radius);
    case TaskKind::PolyLogistic:
      return std::make_unique<PolyLogisticTask>(std::move(rows), cfg.degree,
                                                radius);
    case TaskKind::Mlp2:
      return std::make_unique<Mlp2Task>(std::move(rows), cfg.hidden, cfg.bound,
                                        radius);
  }
  throw ConfigError("task.kind: unknown kind");
}

std::vector<std::vector<double>> load_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("task.dataset: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() < 2)
      throw ConfigError("task.dataset: rows need >= 2 columns");
    if (!rows.empty() && rows.front().size() != row.size())
      throw ConfigError("task.dataset: ragged rows");
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<double> fd_gradient(const Task& task, std::span<const double> w,
                                std::span<const double> zdata, double label,
                                double step) {
  std::vector<double> wp(w.begin(), w.end());
  std::vector<double> g(w.size());
  for (std::size_t j = 0; j < w.size(); ++j) {
    const double orig = wp[j];
    wp[j] = orig + step;
    const double up = task.loss(wp, zdata, label);
    wp[j] = orig - step;
    const double dn = task.loss(wp, zdata, label);
    wp[j] = orig;
    g[j] = (up - dn) / (2.0 * step);
  }
  return g;
}

double estimate_cz(const Task& task, const QuantConfig& qcfg,
                   const SetSizeTable& table, int trials, RandomStream& rng) {
  if (trials < 1) throw DomainError("estimate_cz: trials must be >= 1");
  double best = 0;
  std::vector<double> w(static_cast<std::size_t>(task.model_dim()));
  for (int t = 0; t < trials; ++t) {
    double n2 = 0;
    for (auto& v : w) {
      v = rng.normal();
      n2 += v * v;
    }
    const double scale =
        task.hypothesis_radius() * rng.uniform() / std::sqrt(std::max(n2, 1e-300));
    for (auto& v : w) v *= scale;

    const std::size_t i = rng.uniform_int(task.dataset_size());
    const DataPoint z = task.data_vector(i);
    const auto enc = dataq_encode(z, qcfg, table);
    const DataPoint zq = dataq_decode(enc.enc, qcfg, table);

    double dz2 = 0;
    for (int j = 0; j < task.data_dim(); ++j) {
      const double dv = z.values[static_cast<std::size_t>(j)] -
                        zq.values[static_cast<std::size_t>(j)];
      dz2 += dv * dv;
    }
    if (dz2 == 0) continue;  // 0/0 guard: degenerate draw skipped

    const double label = task.label_value(i);
    const auto gz = task.grad(w, z.values, label);
    const auto gq = task.grad(w, zq.values, label);
    double dg2 = 0;
    for (std::size_t j = 0; j < gz.size(); ++j) {
      const double dv = gz[j] - gq[j];
      dg2 += dv * dv;
    }
    best = std::max(best, std::sqrt(dg2 / dz2));
  }
  return best;
}

Example1Result example1_baseline(std::span<const double> w, double z,
                                 RandomStream& rng) {
  if (!std::isfinite(z) || std::abs(z) > 1.0)
    throw DomainError("example1_baseline: |z| must be <= 1");
  const auto h = static_cast<double>(w.size());
  Example1Result res;
  res.bit = scalar_1bit_encode(z, rng);
  const double zq = scalar_1bit_decode(res.bit);
  res.ghat.assign(w.size(), zq / std::sqrt(h));
  return res;
}

double poly_logistic_fprime(double u, double y) {
  return -y * sigmoid(-y * u);
}

}  // namespace daquant
