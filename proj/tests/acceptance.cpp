// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Run a single criterion with --criterion N.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "daquant/config.hpp"
#include "daquant/dataq.hpp"
#include "daquant/gradcorr.hpp"
#include "daquant/problems.hpp"
#include "daquant/scalar_code.hpp"
#include "daquant/selection.hpp"
#include "daquant/sim.hpp"

using namespace daquant;

namespace {

struct Failure {
  std::string what;
};

void expect(bool ok, const std::string& what) {
  if (!ok) throw Failure{what};
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Codec exactness: brute-force enumerate S, match set_size, rank/unrank
//    bijection. Exact, zero tolerance.
// ---------------------------------------------------------------------------
void criterion1(std::string& note) {
  const std::vector<std::pair<int, int>> cases{{1, 2}, {1, 3}, {2, 2},
                                               {2, 3}, {3, 3}, {2, 5}};
  std::size_t total = 0;
  for (const auto& [d, m] : cases) {
    std::vector<std::vector<std::uint32_t>> members;
    std::vector<std::uint32_t> t(static_cast<std::size_t>(2 * d), 0);
    const std::uint64_t qmax =
        static_cast<std::uint64_t>(m - 1) * static_cast<std::uint64_t>(m - 1);
    std::function<void(std::size_t, std::uint64_t)> rec =
        [&](std::size_t pos, std::uint64_t rem) {
          if (pos == t.size()) {
            members.push_back(t);
            return;
          }
          for (std::uint64_t v = 0; v <= rem; ++v) {
            t[pos] = static_cast<std::uint32_t>(v);
            rec(pos + 1, rem - v);
            t[pos] = 0;
          }
        };
    rec(0, qmax);

    SetSizeTable table(d, m);
    expect(table.size() == BigInt(static_cast<unsigned long>(members.size())),
           "set_size mismatch at d=" + std::to_string(d) +
               " m=" + std::to_string(m));
    std::vector<bool> seen(members.size(), false);
    for (const auto& tv : members) {
      LevelPair p;
      p.plus.assign(tv.begin(), tv.begin() + d);
      p.minus.assign(tv.begin() + d, tv.end());
      const BigInt r = rank_pair(p, table);
      expect(r >= 0 && r < table.size(), "rank out of range");
      const auto back = unrank_pair(r, table);
      expect(back.plus == p.plus && back.minus == p.minus,
             "unrank(rank(p)) != p");
      const auto ri = r.get_ui();
      expect(!seen[ri], "rank collision");
      seen[ri] = true;
    }
    total += members.size();
  }
  note = std::to_string(total) + " members across 6 alphabets, all bijective";
}

// ---------------------------------------------------------------------------
// 2. Theorem-1 suite: membership, error bounds, payload bits vs the bound,
//    1e4 random points per configuration. Zero violations.
// ---------------------------------------------------------------------------
void criterion2(std::string& note) {
  const double bound = 3.0;
  for (const auto& [d, m] : std::vector<std::pair<int, int>>{
           {4, 8}, {16, 33}, {64, 129}}) {
    SetSizeTable table(d, m);
    QuantConfig cfg;
    cfg.d = d;
    cfg.m = m;
    cfg.bound = bound;
    const int payload = table.payload_bits();
    expect(payload <= std::ceil(bits_bound(d, m)),
           "payload bits exceed the Theorem-1 bound");
    RandomStream rng = RandomStream::derive(2024, StreamPurpose::Probe,
                                            static_cast<std::uint64_t>(d),
                                            static_cast<std::uint64_t>(m));
    for (int trial = 0; trial < 10000; ++trial) {
      DataPoint z;
      z.values.resize(static_cast<std::size_t>(d));
      double n2 = 0;
      for (auto& v : z.values) {
        v = rng.normal();
        n2 += v * v;
      }
      const double target = bound * rng.uniform();
      for (auto& v : z.values) v *= target / std::sqrt(n2);

      const auto res = dataq_encode(z, cfg, table);
      expect(in_set(res.pair, table), "membership violation");
      expect(res.enc.bit_length == payload, "bit length drifted");
      const auto zq = dataq_decode(res.enc, cfg, table);
      double linf = 0, q2 = 0;
      for (int j = 0; j < d; ++j) {
        linf = std::max(linf, std::abs(z.values[static_cast<std::size_t>(j)] -
                                       zq.values[static_cast<std::size_t>(j)]));
        q2 += zq.values[static_cast<std::size_t>(j)] *
              zq.values[static_cast<std::size_t>(j)];
      }
      expect(linf <= bound / (m - 1), "infinity error bound violation");
      expect(std::sqrt(q2) <=
                 (1.0 + std::sqrt(static_cast<double>(d)) / (m - 1)) * bound,
             "l2 norm bound violation");
    }
  }
  note = "3 configurations x 1e4 points, zero violations";
}

// ---------------------------------------------------------------------------
// 3. Exhaustive unbiasedness: GradCorrQ h<=8, Example 1, Example 2 (h=4),
//    scalar one-bit codec; probability-weighted expectations within 1e-12.
// ---------------------------------------------------------------------------
void criterion3(std::string& note) {
  // GradCorrQ
  for (int h = 1; h <= 8; ++h) {
    CorrectionParams p;
    p.c_z = 1.3;
    p.bound = 0.9;
    p.d = 5;
    p.h = h;
    p.m = 6;
    const double cap = p.delta_cap();
    RandomStream rng(static_cast<std::uint64_t>(100 + h));
    std::vector<double> delta(static_cast<std::size_t>(h));
    for (auto& v : delta) v = cap * (2 * rng.uniform() - 1);
    std::vector<double> mean(delta.size(), 0.0);
    for (int istar = 0; istar < h; ++istar) {
      const double pe = delta[static_cast<std::size_t>(istar)] / (2 * cap) + 0.5;
      for (int eg = 0; eg <= 1; ++eg) {
        CorrectionMsg msg;
        msg.istar = istar;
        msg.e_g = eg == 1;
        const auto dh = gradcorr_decode(msg, p);
        const double prob = (eg == 1 ? pe : 1 - pe) / h;
        for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += prob * dh[j];
      }
    }
    for (std::size_t j = 0; j < mean.size(); ++j)
      expect(std::abs(mean[j] - delta[j]) <= 1e-12,
             "GradCorrQ expectation off at h=" + std::to_string(h));
  }

  // scalar one-bit codec: E[2b-1] = x
  for (const double x : {-1.0, -0.4, 0.0, 0.7, 1.0}) {
    const double mean = (x + 1) / 2 * 1.0 + (1 - x) / 2 * (-1.0);
    expect(std::abs(mean - x) <= 1e-12, "scalar codec expectation off");
  }

  // Example 1: two outcomes, ghat = (z_Q/sqrt(h)) 1
  {
    const int h = 9;
    const double z = 0.4;
    const double p1 = (z + 1) / 2;
    const double mean = (p1 - (1 - p1)) / std::sqrt(static_cast<double>(h));
    expect(std::abs(mean - z / std::sqrt(static_cast<double>(h))) <= 1e-12,
           "Example-1 expectation off");
  }

  // Example 2 with h = 4 (k = 3): full outcome enumeration
  {
    const int k = 3;
    const double z = 0.5, fprime = -0.37;
    const int nbits = poly_example_bits(k);
    const int npow = nbits - 1;
    std::vector<double> powers{z, z * z};
    std::vector<double> mean(static_cast<std::size_t>(k) + 1, 0.0);
    for (int outcome = 0; outcome < (1 << nbits); ++outcome) {
      PolyExampleCode code;
      code.grad_bit = (outcome >> npow) & 1;
      double prob = code.grad_bit ? (fprime + 1) / 2 : (1 - fprime) / 2;
      for (int j = 0; j < npow; ++j) {
        const bool bit = (outcome >> j) & 1;
        code.power_bits.push_back(bit);
        const double p1 = (powers[static_cast<std::size_t>(j)] + 1) / 2;
        prob *= bit ? p1 : 1 - p1;
      }
      const auto ghat = poly_example_decode(code, k);
      for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += prob * ghat[i];
    }
    for (int i = 0; i <= k; ++i)
      expect(std::abs(mean[static_cast<std::size_t>(i)] -
                      fprime / 2.0 * std::pow(z, i)) <= 1e-12,
             "Example-2 expectation off at coordinate " + std::to_string(i));
  }
  note = "all enumerated expectations within 1e-12";
}

// ---------------------------------------------------------------------------
// 4. Monte-Carlo unbiasedness: stochastic DataQ and end-to-end DaQuFull ghat
//    at frozen w on least squares (d=10, h=11), 1e5 draws, 5 sigma.
// ---------------------------------------------------------------------------
void criterion4(std::string& note) {
  TaskConfig tc;
  tc.kind = TaskKind::LeastSquares;
  tc.dx = 10;
  tc.n_samples = 200;
  tc.noise = 0.3;
  tc.seed = 404;
  const auto task = make_task(tc);
  expect(task->data_dim() == 10 && task->model_dim() == 11,
         "least-squares dims are not (d=10, h=11)");

  const int d = 10;
  const int m = default_levels(task->model_dim(), d);  // ceil(11 sqrt(10))
  QuantConfig qcfg;
  qcfg.d = d;
  qcfg.m = m;
  qcfg.bound = task->bound();
  SetSizeTable table(d, m);
  const int n = 100000;

  // (a) stochastic DataQ on a fixed point
  {
    RandomStream gen(405);
    DataPoint z;
    z.values.resize(d);
    double n2 = 0;
    for (auto& v : z.values) {
      v = gen.normal();
      n2 += v * v;
    }
    for (auto& v : z.values) v *= 0.8 * task->bound() / std::sqrt(n2);

    std::vector<double> sum(d, 0.0), sumsq(d, 0.0);
    RandomStream rng(406);
    for (int t = 0; t < n; ++t) {
      const auto res = dataq_stochastic(z, qcfg, table, rng);
      const auto zq = dataq_decode(res.enc, qcfg, table);
      for (int j = 0; j < d; ++j) {
        const double v = zq.values[static_cast<std::size_t>(j)];
        sum[static_cast<std::size_t>(j)] += v;
        sumsq[static_cast<std::size_t>(j)] += v * v;
      }
    }
    for (int j = 0; j < d; ++j) {
      const double mean = sum[static_cast<std::size_t>(j)] / n;
      const double var =
          sumsq[static_cast<std::size_t>(j)] / n - mean * mean;
      const double tol = 5.0 * std::sqrt(std::max(var, 1e-18) / n);
      expect(std::abs(mean - z.values[static_cast<std::size_t>(j)]) <= tol,
             "stochastic DataQ coordinate mean outside 5 sigma");
    }
  }

  // (b) end-to-end DaQuFull gradient estimate at frozen w
  {
    RandomStream wrng(407);
    std::vector<double> w(static_cast<std::size_t>(task->model_dim()));
    double n2 = 0;
    for (auto& v : w) {
      v = wrng.normal();
      n2 += v * v;
    }
    for (auto& v : w) v *= task->hypothesis_radius() / std::sqrt(n2);

    CorrectionParams corr;
    corr.c_z = *task->analytic_cz();
    corr.bound = task->bound();
    corr.d = d;
    corr.h = task->model_dim();
    corr.m = m;

    const auto [risk, grad_l] = task->full_risk(w);
    const int h = task->model_dim();
    std::vector<double> sum(static_cast<std::size_t>(h), 0.0),
        sumsq(static_cast<std::size_t>(h), 0.0);
    RandomStream rng(408);
    int clamped = 0;
    for (int t = 0; t < n; ++t) {
      const std::size_t i = rng.uniform_int(task->dataset_size());
      const DataPoint z = task->data_vector(i);
      const double label = task->label_value(i);
      const auto enc = dataq_encode(z, qcfg, table);
      const auto zq = dataq_decode(enc.enc, qcfg, table);
      const auto g_true = task->grad(w, z.values, label);
      const auto g_q = task->grad(w, zq.values, label);
      std::vector<double> delta(g_true.size());
      for (std::size_t j = 0; j < delta.size(); ++j)
        delta[j] = g_true[j] - g_q[j];
      const auto res = gradcorr_encode(delta, corr, rng);
      if (res.cap_exceeded) ++clamped;
      const auto ghat = assemble_gradient(g_q, gradcorr_decode(res.msg, corr));
      for (int j = 0; j < h; ++j) {
        sum[static_cast<std::size_t>(j)] += ghat[static_cast<std::size_t>(j)];
        sumsq[static_cast<std::size_t>(j)] +=
            ghat[static_cast<std::size_t>(j)] * ghat[static_cast<std::size_t>(j)];
      }
    }
    expect(clamped == 0, "analytic C_z cap was exceeded");
    for (int j = 0; j < h; ++j) {
      const double mean = sum[static_cast<std::size_t>(j)] / n;
      const double var =
          sumsq[static_cast<std::size_t>(j)] / n - mean * mean;
      const double tol = 5.0 * std::sqrt(std::max(var, 1e-18) / n);
      expect(std::abs(mean - grad_l[static_cast<std::size_t>(j)]) <= tol,
             "DaQuFull ghat coordinate mean outside 5 sigma");
    }
  }
  note = "1e5 draws, all coordinates within 5 sigma";
}

// ---------------------------------------------------------------------------
// 5. Communication ratio at desk scale: MLP2 h = 1e4, d = 20, m = ceil(h
//    sqrt(d)); DaQuFull and GradQBaseline meters within their bounds, ratio
//    >= 20.
// ---------------------------------------------------------------------------
void criterion5(std::string& note) {
  ExperimentConfig cfg;
  cfg.task.kind = TaskKind::Mlp2;
  cfg.task.dx = 19;  // packed data vector: d = 20
  cfg.task.hidden = 500;
  cfg.task.n_samples = 64;
  cfg.task.noise = 0.1;
  cfg.task.seed = 505;
  cfg.scheme = Scheme::DaQuFull;
  cfg.m = 0;  // ceil(h sqrt(d))
  cfg.quant_mode = QuantMode::PerSampleNormScaled;
  cfg.iterations = 10;
  cfg.lr = 0.01;
  cfg.seed = 506;
  cfg.cz_probe_trials = 300;

  const auto task = make_task(cfg.task);
  const int h = task->model_dim();
  const int d = task->data_dim();
  expect(h == 10000 && d == 20, "MLP2 dims are not (h=1e4, d=20)");

  const auto daqu = run_experiment(cfg, *task);
  const auto daqu_meter = meter_report(daqu.records);
  const double hh = h, dd = d;
  const double cor2 = 1 + std::log2(hh) + 2 * std::log2(hh * std::sqrt(dd)) +
                      2 * dd * std::log2(std::exp(1.0) * (1 + hh * hh / 2));
  expect(daqu_meter.bits_per_iteration <= cor2 + 64,
         "DaQuFull meter " + fmt(daqu_meter.bits_per_iteration) +
             " exceeds bound " + fmt(cor2 + 64));

  cfg.scheme = Scheme::GradQBaseline;
  const auto gradq = run_experiment(cfg, *task);
  const auto gradq_meter = meter_report(gradq.records);
  const double rem3 = std::log2(2 * hh) + 2 * hh * std::log2(3 * std::exp(1.0));
  expect(gradq_meter.bits_per_iteration <= rem3,
         "GradQBaseline meter " + fmt(gradq_meter.bits_per_iteration) +
             " exceeds bound " + fmt(rem3));

  const double ratio =
      gradq_meter.bits_per_iteration / daqu_meter.bits_per_iteration;
  expect(ratio >= 20.0, "savings ratio " + fmt(ratio) + " below 20");
  note = "DaQuFull " + fmt(daqu_meter.bits_per_iteration) + " b/it (bound " +
         fmt(cor2 + 64) + "), GradQ " + fmt(gradq_meter.bits_per_iteration) +
         " b/it (bound " + fmt(rem3) + "), ratio " + fmt(ratio);
}

// ---------------------------------------------------------------------------
// 6. Convergence parity on logistic regression (d=10, N=1000, n=2e4, 10
//    seeds): DaQuFull gap <= 1.5x unquantized, DataQOnly gap <= 2x.
// ---------------------------------------------------------------------------

// Newton oracle for the logistic optimum (with bias feature).
double logistic_optimum(const Task& task, double radius) {
  const int h = task.model_dim();
  std::vector<double> w(static_cast<std::size_t>(h), 0.0);
  for (int it = 0; it < 100; ++it) {
    std::vector<double> grad(static_cast<std::size_t>(h), 0.0);
    std::vector<std::vector<double>> hess(
        static_cast<std::size_t>(h),
        std::vector<double>(static_cast<std::size_t>(h), 0.0));
    for (std::size_t i = 0; i < task.dataset_size(); ++i) {
      const auto z = task.data_vector(i);
      const double y = task.label_value(i);
      std::vector<double> x(z.values);
      x.push_back(1.0);
      double u = 0;
      for (int j = 0; j < h; ++j)
        u += w[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(j)];
      const double s = 1.0 / (1.0 + std::exp(y * u));  // sigmoid(-y u)
      for (int r = 0; r < h; ++r) {
        grad[static_cast<std::size_t>(r)] +=
            -y * s * x[static_cast<std::size_t>(r)];
        for (int c = 0; c < h; ++c)
          hess[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] +=
              s * (1 - s) * x[static_cast<std::size_t>(r)] *
              x[static_cast<std::size_t>(c)];
      }
    }
    const double inv_n = 1.0 / static_cast<double>(task.dataset_size());
    double gnorm = 0;
    for (int r = 0; r < h; ++r) {
      grad[static_cast<std::size_t>(r)] *= inv_n;
      gnorm += grad[static_cast<std::size_t>(r)] * grad[static_cast<std::size_t>(r)];
      for (int c = 0; c < h; ++c)
        hess[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] *= inv_n;
      hess[static_cast<std::size_t>(r)][static_cast<std::size_t>(r)] += 1e-12;
    }
    if (std::sqrt(gnorm) < 1e-13) break;
    // solve H step = grad
    std::vector<std::vector<double>> a(hess);
    for (int r = 0; r < h; ++r)
      a[static_cast<std::size_t>(r)].push_back(grad[static_cast<std::size_t>(r)]);
    for (int col = 0; col < h; ++col) {
      int piv = col;
      for (int r = col + 1; r < h; ++r)
        if (std::abs(a[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)]) >
            std::abs(a[static_cast<std::size_t>(piv)][static_cast<std::size_t>(col)]))
          piv = r;
      std::swap(a[static_cast<std::size_t>(col)], a[static_cast<std::size_t>(piv)]);
      for (int r = 0; r < h; ++r) {
        if (r == col) continue;
        const double f =
            a[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)] /
            a[static_cast<std::size_t>(col)][static_cast<std::size_t>(col)];
        for (int c = col; c <= h; ++c)
          a[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] -=
              f * a[static_cast<std::size_t>(col)][static_cast<std::size_t>(c)];
      }
    }
    double step2 = 0;
    for (int r = 0; r < h; ++r) {
      const double step =
          a[static_cast<std::size_t>(r)][static_cast<std::size_t>(h)] /
          a[static_cast<std::size_t>(r)][static_cast<std::size_t>(r)];
      w[static_cast<std::size_t>(r)] -= step;
      step2 += step * step;
    }
    // keep the oracle inside the same feasible ball as the runs
    double wn = 0;
    for (double v : w) wn += v * v;
    wn = std::sqrt(wn);
    if (wn > radius)
      for (auto& v : w) v *= radius / wn;
    if (std::sqrt(step2) < 1e-13) break;
  }
  return task.full_risk(w).first;
}

void criterion6(std::string& note) {
  ExperimentConfig base;
  base.task.kind = TaskKind::Logistic;
  base.task.dx = 10;
  base.task.n_samples = 1000;
  base.task.flip_rate = 0.15;  // separable-ish
  base.task.seed = 606;
  base.task.w_radius = 2.0;
  base.m = static_cast<int>(
      std::ceil(10.0 * 11.0 * std::sqrt(10.0)));  // 10 h sqrt(d)
  base.quant_mode = QuantMode::AbsoluteBound;
  base.iterations = 20000;
  base.lr = 0.5;
  base.momentum = 0.0;
  base.lr_boundaries = {12000, 16000};
  base.lr_decay = 0.2;
  base.d_radius = 2.0;
  base.record_every = 20000;

  const auto task = make_task(base.task);
  expect(task->data_dim() == 10 && task->model_dim() == 11,
         "logistic dims are not (d=10, h=11)");
  const double lstar = logistic_optimum(*task, 2.0);

  auto mean_gap = [&](Scheme scheme) {
    double total = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      ExperimentConfig cfg = base;
      cfg.scheme = scheme;
      cfg.seed = 600 + seed;
      const auto res = run_experiment(cfg, *task);
      total += task->full_risk(res.model.w).first - lstar;
    }
    return total / 10.0;
  };

  const double gap_unq = mean_gap(Scheme::Unquantized);
  const double gap_full = mean_gap(Scheme::DaQuFull);
  const double gap_dataq = mean_gap(Scheme::DataQOnly);
  expect(gap_unq > 0, "unquantized gap must be positive");
  expect(gap_full <= 1.5 * gap_unq,
         "DaQuFull gap " + fmt(gap_full) + " > 1.5 x " + fmt(gap_unq));
  expect(gap_dataq <= 2.0 * gap_unq,
         "DataQOnly gap " + fmt(gap_dataq) + " > 2 x " + fmt(gap_unq));
  note = "gaps: unquantized " + fmt(gap_unq) + ", daqu_full " + fmt(gap_full) +
         " (<=1.5x), dataq_only " + fmt(gap_dataq) + " (<=2x)";
}

// ---------------------------------------------------------------------------
// 7. Sample selection: adaptive thresholding thins transmissions without
//    hurting the final loss; theory schedule satisfies its constraint.
// ---------------------------------------------------------------------------
void criterion7(std::string& note) {
  ExperimentConfig base;
  base.task.kind = TaskKind::Logistic;
  base.task.dx = 10;
  base.task.n_samples = 1000;
  base.task.noise = 0.08;  // probabilistic teacher labels
  base.task.seed = 606;
  base.scheme = Scheme::DataQOnly;
  base.m = static_cast<int>(std::ceil(10.0 * 11.0 * std::sqrt(10.0)));
  base.quant_mode = QuantMode::AbsoluteBound;
  base.iterations = 20000;  // 20 epochs of N=1000
  base.order = SampleOrder::Shuffle;
  base.lr = 0.02;  // warmup, then x10 after 5 epochs
  base.momentum = 0.0;
  base.lr_boundaries = {5000};
  base.lr_decay = 10.0;
  base.record_every = 1000;
  base.seed = 707;

  const auto task = make_task(base.task);

  ExperimentConfig gated = base;
  gated.selection_kind = SelectionKind::AdaptiveEpoch;
  gated.selection_alpha = 0.2;
  const auto sel = run_experiment(gated, *task);
  const auto plain = run_experiment(base, *task);

  expect(sel.epochs.size() == 20, "expected 20 epoch summaries");
  auto fraction = [&](std::size_t first, std::size_t last) {
    double tx = 0, total = 0;
    for (std::size_t e = first; e < last; ++e) {
      tx += static_cast<double>(sel.epochs[e].transmitted);
      total += static_cast<double>(sel.epochs[e].transmitted +
                                   sel.epochs[e].skipped);
    }
    return tx / total;
  };
  const double early = fraction(0, 5);
  const double late = fraction(15, 20);
  expect(late <= 0.7 * early, "late transmitted fraction " + fmt(late) +
                                  " not <= 0.7 x early " + fmt(early));

  const double loss_sel = task->full_risk(sel.model.w).first;
  const double loss_plain = task->full_risk(plain.model.w).first;
  expect(std::abs(loss_sel - loss_plain) <= 0.05 * loss_plain,
         "final loss " + fmt(loss_sel) + " not within 5% of " +
             fmt(loss_plain));

  for (const std::int64_t n : {100ll, 10000ll}) {
    double s = 0;
    for (std::int64_t i = 1; i <= n; ++i)
      s += std::sqrt(theory_threshold(i, 0.25));
    expect(s <= std::sqrt(static_cast<double>(n)),
           "theory schedule infeasible at n=" + std::to_string(n));
  }
  note = "fractions early " + fmt(early) + " -> late " + fmt(late) +
         ", losses " + fmt(loss_plain) + " vs " + fmt(loss_sel);
}

// ---------------------------------------------------------------------------
// 8. Determinism: identical seeds give byte-identical CSV output.
// ---------------------------------------------------------------------------
void criterion8(std::string& note) {
  for (const Scheme scheme : {Scheme::Unquantized, Scheme::DataQOnly,
                              Scheme::DaQuFull, Scheme::GradQBaseline}) {
    ExperimentConfig cfg;
    cfg.task.kind = TaskKind::Logistic;
    cfg.task.dx = 5;
    cfg.task.n_samples = 100;
    cfg.task.flip_rate = 0.1;
    cfg.task.seed = 808;
    cfg.scheme = scheme;
    cfg.m = 64;
    cfg.quant_mode = QuantMode::PerSampleNormScaled;
    cfg.selection_kind = SelectionKind::AdaptiveEpoch;
    cfg.iterations = 400;
    cfg.lr = 0.2;
    cfg.seed = 809;
    const auto a = run_experiment(cfg);
    const auto b = run_experiment(cfg);
    expect(metrics_csv(a.records) == metrics_csv(b.records),
           "trace differs for scheme " + scheme_name(scheme));
  }
  note = "4 schemes re-run, byte-identical CSVs";
}

// ---------------------------------------------------------------------------
// 9. Gradient oracle: analytic gradients vs central finite differences,
//    100 probes per task, max relative coordinate error <= 1e-4.
// ---------------------------------------------------------------------------
void criterion9(std::string& note) {
  for (const auto kind : {TaskKind::LeastSquares, TaskKind::Logistic,
                          TaskKind::PolyLogistic, TaskKind::Mlp2}) {
    TaskConfig tc;
    tc.kind = kind;
    tc.dx = 5;
    tc.degree = 7;
    tc.hidden = 8;
    tc.n_samples = 50;
    tc.noise = 0.25;
    tc.flip_rate = 0.1;
    tc.seed = 909;
    const auto task = make_task(tc);
    RandomStream rng(910);
    for (int t = 0; t < 100; ++t) {
      std::vector<double> w(static_cast<std::size_t>(task->model_dim()));
      for (auto& v : w) v = 0.5 * rng.normal();
      const std::size_t i = rng.uniform_int(task->dataset_size());
      const auto z = task->data_vector(i);
      const double y = task->label_value(i);
      const auto g = task->grad(w, z.values, y);
      const auto fd = fd_gradient(*task, w, z.values, y, 1e-5);
      double scale = 1e-8, err = 0;
      for (std::size_t j = 0; j < g.size(); ++j) {
        scale = std::max(scale, std::abs(fd[j]));
        err = std::max(err, std::abs(g[j] - fd[j]));
      }
      expect(err / scale <= 1e-4, "finite-difference mismatch");
    }
  }
  note = "4 tasks x 100 probes within 1e-4";
}

struct Criterion {
  int id;
  const char* name;
  void (*fn)(std::string&);
};

const Criterion kCriteria[] = {
    {1, "codec exactness (brute-force alphabets)", criterion1},
    {2, "quantizer membership, error bounds, bit budget", criterion2},
    {3, "exhaustive unbiasedness (corrections and scalar codecs)", criterion3},
    {4, "Monte-Carlo unbiasedness (stochastic and end-to-end)", criterion4},
    {5, "communication ratio at desk scale", criterion5},
    {6, "convergence parity on logistic regression", criterion6},
    {7, "sample selection thins traffic without hurting loss", criterion7},
    {8, "determinism of traces", criterion8},
    {9, "gradient oracle (finite differences)", criterion9},
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc)
      only = std::atoi(argv[i + 1]);
  }
  int failures = 0;
  for (const auto& c : kCriteria) {
    if (only != 0 && c.id != only) continue;
    const auto start = std::chrono::steady_clock::now();
    std::string note;
    bool passed = true;
    try {
      c.fn(note);
    } catch (const Failure& f) {
      passed = false;
      note = f.what;
    } catch (const std::exception& e) {
      passed = false;
      note = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    std::printf("[%s] criterion %d: %s (%.1fs) %s\n",
                passed ? "PASS" : "FAIL", c.id, c.name, secs, note.c_str());
    std::fflush(stdout);
    if (!passed) ++failures;
  }
  return failures;
}
