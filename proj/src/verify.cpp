// SPDX-License-Identifier: Apache-2.0
#include "daquant/verify.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>

#include "daquant/config.hpp"
#include "daquant/dataq.hpp"
#include "daquant/errors.hpp"
#include "daquant/gradcorr.hpp"
#include "daquant/problems.hpp"
#include "daquant/scalar_code.hpp"
#include "daquant/selection.hpp"
#include "daquant/sim.hpp"

namespace daquant {

namespace {

struct Harness {
  std::vector<VerifyCheck>& out;
  std::string module;

  void check(const std::string& name, const std::function<bool(std::string&)>& fn) {
    VerifyCheck c;
    c.module = module;
    c.name = name;
    try {
      std::string detail;
      c.passed = fn(detail);
      c.detail = detail;
    } catch (const std::exception& e) {
      c.passed = false;
      c.detail = std::string("exception: ") + e.what();
    }
    out.push_back(c);
  }
};

// Brute-force enumeration of S ordered by (weight, colex), used as the
// independent oracle for the codec bijection.
void enumerate_set(int d, int m, std::vector<std::vector<std::uint32_t>>& out) {
  const std::uint64_t qmax =
      static_cast<std::uint64_t>(m - 1) * static_cast<std::uint64_t>(m - 1);
  std::vector<std::uint32_t> t(static_cast<std::size_t>(2 * d), 0);
  std::function<void(std::size_t, std::uint64_t)> rec =
      [&](std::size_t pos, std::uint64_t rem) {
        if (pos == t.size()) {
          out.push_back(t);
          return;
        }
        for (std::uint64_t v = 0; v <= rem; ++v) {
          t[pos] = static_cast<std::uint32_t>(v);
          rec(pos + 1, rem - v);
          t[pos] = 0;
        }
      };
  rec(0, qmax);
}

std::vector<std::uint8_t> read_fixture(const std::string& dir,
                                       const std::string& name) {
  std::ifstream in(dir + "/" + name, std::ios::binary);
  if (!in) throw ConfigError("missing fixture: " + name);
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                  std::istreambuf_iterator<char>()};
  return bytes;
}

void verify_quant_core(Harness& h, const std::string& fixtures_dir) {
  h.check("codec_bijection_exhaustive", [](std::string& detail) {
    for (int d = 1; d <= 3; ++d) {
      for (int m = 2; m <= 4; ++m) {
        std::vector<std::vector<std::uint32_t>> members;
        enumerate_set(d, m, members);
        SetSizeTable table(d, m);
        if (table.size() != static_cast<unsigned long>(members.size())) {
          detail = "set_size mismatch";
          return false;
        }
        std::vector<bool> seen(members.size(), false);
        for (const auto& t : members) {
          LevelPair p;
          p.plus.assign(t.begin(), t.begin() + d);
          p.minus.assign(t.begin() + d, t.end());
          const BigInt r = rank_pair(p, table);
          const auto back = unrank_pair(r, table);
          if (back.plus != p.plus || back.minus != p.minus) {
            detail = "rank/unrank not inverse";
            return false;
          }
          const auto ri = r.get_ui();
          if (ri >= seen.size() || seen[ri]) {
            detail = "rank not a bijection";
            return false;
          }
          seen[ri] = true;
        }
      }
    }
    return true;
  });

  h.check("membership_and_error_bounds", [](std::string& detail) {
    for (const auto [d, m] : {std::pair{4, 8}, std::pair{16, 33}}) {
      SetSizeTable table(d, m);
      QuantConfig cfg;
      cfg.d = d;
      cfg.m = m;
      cfg.bound = 2.0;
      cfg.mode = QuantMode::AbsoluteBound;
      RandomStream rng = RandomStream::derive(7, StreamPurpose::Probe, d, m);
      for (int t = 0; t < 500; ++t) {
        DataPoint z;
        z.values.resize(d);
        double n2 = 0;
        for (auto& v : z.values) {
          v = rng.normal();
          n2 += v * v;
        }
        const double target = cfg.bound * rng.uniform();
        for (auto& v : z.values) v *= target / std::sqrt(n2);
        const auto res = dataq_encode(z, cfg, table);
        if (!in_set(res.pair, table)) {
          detail = "membership violated";
          return false;
        }
        const auto zq = dataq_decode(res.enc, cfg, table);
        double linf = 0, l2q = 0;
        for (int j = 0; j < d; ++j) {
          linf = std::max(linf, std::abs(z.values[j] - zq.values[j]));
          l2q += zq.values[j] * zq.values[j];
        }
        if (linf > cfg.bound / (m - 1) + 1e-12) {
          detail = "infinity error bound violated";
          return false;
        }
        if (std::sqrt(l2q) >
            (1.0 + std::sqrt(static_cast<double>(d)) / (m - 1)) * cfg.bound + 1e-12) {
          detail = "l2 bound violated";
          return false;
        }
      }
    }
    return true;
  });

  h.check("bit_budget_sweep", [](std::string& detail) {
    for (int d = 1; d <= 16; ++d) {
      for (int m = 2; m <= 8; ++m) {
        const int actual = ceil_log2(set_size(d, m));
        if (actual > std::ceil(bits_bound(d, m))) {
          detail = "payload bits exceed the bound at d=" + std::to_string(d) +
                   " m=" + std::to_string(m);
          return false;
        }
      }
    }
    return true;
  });

  h.check("golden_sample_payload", [fixtures_dir](std::string& detail) {
    SetSizeTable table(2, 5);
    QuantConfig cfg;
    cfg.d = 2;
    cfg.m = 5;
    cfg.bound = 1.0;
    const auto res = dataq_encode(DataPoint({0.6, -0.3}), cfg, table);
    const auto payload = pack_sample_payload(res.enc);
    const auto expect = read_fixture(fixtures_dir, "sample_payload_d2_m5.bin");
    if (payload != expect) {
      detail = "fixture sample_payload_d2_m5.bin does not match";
      return false;
    }
    return true;
  });

  h.check("scalar_codec_boundaries", [](std::string& detail) {
    RandomStream rng(3);
    for (int t = 0; t < 100; ++t) {
      if (!scalar_1bit_encode(1.0, rng) || scalar_1bit_encode(-1.0, rng)) {
        detail = "deterministic boundary broken";
        return false;
      }
    }
    return true;
  });
}

void verify_grad_correct(Harness& h) {
  h.check("exhaustive_unbiasedness", [](std::string& detail) {
    for (int hh = 1; hh <= 8; ++hh) {
      CorrectionParams p;
      p.c_z = 1.0;
      p.bound = 1.0;
      p.d = 4;
      p.h = hh;
      p.m = 5;
      const double cap = p.delta_cap();
      RandomStream rng(11);
      std::vector<double> delta(hh);
      for (auto& v : delta) v = cap * (2.0 * rng.uniform() - 1.0);
      for (int i = 0; i < hh; ++i) {
        double mean = 0;
        const double prob_i = 1.0 / hh;
        for (int istar = 0; istar < hh; ++istar) {
          const double pe = delta[istar] / (2 * cap) + 0.5;
          for (int eg = 0; eg <= 1; ++eg) {
            CorrectionMsg msg;
            msg.istar = istar;
            msg.e_g = eg == 1;
            const auto dh = gradcorr_decode(msg, p);
            mean += prob_i * (eg == 1 ? pe : 1.0 - pe) * dh[i];
          }
        }
        if (std::abs(mean - delta[i]) > 1e-12) {
          detail = "expectation mismatch at h=" + std::to_string(hh);
          return false;
        }
      }
    }
    return true;
  });

  h.check("support_and_magnitude", [](std::string& detail) {
    CorrectionParams p;
    p.c_z = 0.7;
    p.bound = 2.0;
    p.d = 9;
    p.h = 6;
    p.m = 4;
    RandomStream rng(5);
    std::vector<double> delta(6, 0.0);
    for (int t = 0; t < 200; ++t) {
      const auto enc = gradcorr_encode(delta, p, rng);
      const auto dh = gradcorr_decode(enc.msg, p);
      int nz = 0;
      for (auto v : dh)
        if (v != 0) ++nz;
      if (nz != 1 || std::abs(dh[enc.msg.istar]) != p.h * p.delta_cap()) {
        detail = "support/magnitude broken";
        return false;
      }
    }
    return true;
  });

  h.check("wire_cost", [](std::string& detail) {
    CorrectionMsg msg;
    msg.istar = 3;
    msg.e_g = true;
    if (msg.wire_bits(16) != 5 || msg.wire_bits(1024) != 11) {
      detail = "non-shared wire cost wrong";
      return false;
    }
    msg.uses_shared_randomness = true;
    if (msg.wire_bits(16) != 1) {
      detail = "shared wire cost wrong";
      return false;
    }
    return true;
  });

  h.check("shared_istar_reproducible", [](std::string& detail) {
    for (int t = 0; t < 10000; ++t) {
      RandomStream a = RandomStream::derive(99, StreamPurpose::Correction, t);
      RandomStream b = RandomStream::derive(99, StreamPurpose::Correction, t);
      if (a.uniform_int(1024) != b.uniform_int(1024)) {
        detail = "istar streams diverge";
        return false;
      }
    }
    return true;
  });
}

void verify_sample_select(Harness& h) {
  h.check("theory_schedule_feasible", [](std::string& detail) {
    for (const std::int64_t n : {100, 10000}) {
      double s = 0;
      for (std::int64_t i = 1; i <= n; ++i)
        s += std::sqrt(theory_threshold(i, 0.25));
      if (s > std::sqrt(static_cast<double>(n))) {
        detail = "schedule infeasible at n=" + std::to_string(n);
        return false;
      }
    }
    return true;
  });

  h.check("gate_semantics", [](std::string& detail) {
    ThresholdPolicy p;
    p.kind = SelectionKind::TheorySchedule;
    p.current = 0.3;
    if (should_transmit(0.3, p) || !should_transmit(0.30001, p) ||
        should_transmit(0.0, p)) {
      detail = "strict-inequality gate broken";
      return false;
    }
    p.kind = SelectionKind::Disabled;
    p.current = 0.0;
    if (!should_transmit(0.0, p)) {
      detail = "disabled gate must transmit";
      return false;
    }
    return true;
  });

  h.check("adaptive_reopen", [](std::string& detail) {
    EpochStats prev;
    prev.transmitted = 0;
    prev.skipped = 50;
    if (adaptive_threshold(prev, 0.2) != 0.0) {
      detail = "all-skipped epoch must reset the threshold";
      return false;
    }
    prev.transmitted = 4;
    prev.transmitted_loss_sum = 8.0;
    if (std::abs(adaptive_threshold(prev, 0.2) - 0.4) > 1e-15) {
      detail = "0.2 * mean rule broken";
      return false;
    }
    return true;
  });
}

void verify_problems(Harness& h) {
  h.check("finite_difference_gradients", [](std::string& detail) {
    for (const auto kind : {TaskKind::LeastSquares, TaskKind::Logistic,
                            TaskKind::PolyLogistic, TaskKind::Mlp2}) {
      TaskConfig tc;
      tc.kind = kind;
      tc.dx = 4;
      tc.degree = 5;
      tc.hidden = 6;
      tc.n_samples = 20;
      tc.noise = 0.2;
      tc.flip_rate = 0.1;
      tc.seed = 17;
      const auto task = make_task(tc);
      RandomStream rng(23);
      for (int t = 0; t < 10; ++t) {
        std::vector<double> w(task->model_dim());
        for (auto& v : w) v = rng.normal() * 0.5;
        const std::size_t i = rng.uniform_int(task->dataset_size());
        const auto z = task->data_vector(i);
        const double y = task->label_value(i);
        const auto g = task->grad(w, z.values, y);
        const auto fd = fd_gradient(*task, w, z.values, y);
        double scale = 1e-8, err = 0;
        for (std::size_t j = 0; j < g.size(); ++j) {
          scale = std::max(scale, std::abs(fd[j]));
          err = std::max(err, std::abs(g[j] - fd[j]));
        }
        if (err / scale > 1e-4) {
          detail = "finite differences disagree";
          return false;
        }
      }
    }
    return true;
  });

  h.check("loss_nonnegative", [](std::string& detail) {
    for (const auto kind : {TaskKind::LeastSquares, TaskKind::Logistic,
                            TaskKind::PolyLogistic, TaskKind::Mlp2}) {
      TaskConfig tc;
      tc.kind = kind;
      tc.dx = 3;
      tc.n_samples = 30;
      tc.flip_rate = 0.2;
      tc.seed = 31;
      const auto task = make_task(tc);
      RandomStream rng(37);
      for (int t = 0; t < 50; ++t) {
        std::vector<double> w(task->model_dim());
        for (auto& v : w) v = rng.normal();
        const std::size_t i = rng.uniform_int(task->dataset_size());
        if (task->sample_loss(i, w) < 0) {
          detail = "negative loss";
          return false;
        }
      }
    }
    return true;
  });
}

void verify_sim(Harness& h, const std::string& fixtures_dir) {
  h.check("frame_roundtrip", [](std::string& detail) {
    WireMessage msg;
    msg.type = MsgType::SampleEnc;
    msg.payload = {0x00, 0xC0};
    msg.bit_cost = 13;
    const auto framed = frame_message(msg);
    std::size_t off = 0;
    const auto back = parse_frame(framed, off);
    if (back.type != msg.type || back.payload != msg.payload ||
        back.bit_cost != msg.bit_cost || off != framed.size()) {
      detail = "frame roundtrip broken";
      return false;
    }
    return true;
  });

  h.check("golden_framed_sample", [fixtures_dir](std::string& detail) {
    SetSizeTable table(2, 5);
    QuantConfig cfg;
    cfg.d = 2;
    cfg.m = 5;
    cfg.bound = 1.0;
    const auto res = dataq_encode(DataPoint({0.6, -0.3}), cfg, table);
    WireMessage msg;
    msg.type = MsgType::SampleEnc;
    msg.payload = pack_sample_payload(res.enc);
    msg.bit_cost = res.enc.total_bits();
    const auto framed = frame_message(msg);
    const auto expect = read_fixture(fixtures_dir, "framed_sample_d2_m5.bin");
    if (framed != expect) {
      detail = "fixture framed_sample_d2_m5.bin does not match";
      return false;
    }
    return true;
  });

  h.check("determinism", [](std::string& detail) {
    ExperimentConfig cfg;
    cfg.task.kind = TaskKind::LeastSquares;
    cfg.task.dx = 3;
    cfg.task.n_samples = 40;
    cfg.task.seed = 5;
    cfg.scheme = Scheme::DaQuFull;
    cfg.m = 32;
    cfg.iterations = 50;
    cfg.lr = 0.05;
    const auto a = run_experiment(cfg);
    const auto b = run_experiment(cfg);
    if (metrics_csv(a.records) != metrics_csv(b.records)) {
      detail = "identical seeds produced different traces";
      return false;
    }
    return true;
  });

  h.check("skip_is_free", [](std::string& detail) {
    ExperimentConfig cfg;
    cfg.task.kind = TaskKind::Logistic;
    cfg.task.dx = 3;
    cfg.task.n_samples = 30;
    cfg.task.flip_rate = 0.0;
    cfg.scheme = Scheme::DataQOnly;
    cfg.m = 16;
    cfg.iterations = 20;
    cfg.selection_kind = SelectionKind::TheorySchedule;
    cfg.selection_c = 0.25;
    const auto res = run_experiment(cfg);
    std::int64_t bits_at_skip = -1;
    for (std::size_t i = 1; i < res.records.size(); ++i) {
      if (res.records[i].skipped > res.records[i - 1].skipped &&
          res.records[i].transmitted == res.records[i - 1].transmitted) {
        bits_at_skip = res.records[i].cumulative_bits -
                       res.records[i - 1].cumulative_bits;
        if (bits_at_skip != 0) {
          detail = "skipped sample cost bits";
          return false;
        }
      }
    }
    return true;
  });
}

}  // namespace

std::vector<VerifyCheck> run_verify(const std::string& module_filter,
                                    const std::string& fixtures_dir) {
  std::vector<VerifyCheck> out;
  Harness h{out, ""};
  const auto want = [&](const std::string& m) {
    return module_filter.empty() || module_filter == m;
  };
  if (want("quant-core")) {
    h.module = "quant-core";
    verify_quant_core(h, fixtures_dir);
  }
  if (want("grad-correct")) {
    h.module = "grad-correct";
    verify_grad_correct(h);
  }
  if (want("sample-select")) {
    h.module = "sample-select";
    verify_sample_select(h);
  }
  if (want("problems")) {
    h.module = "problems";
    verify_problems(h);
  }
  if (want("sim")) {
    h.module = "sim";
    verify_sim(h, fixtures_dir);
  }
  return out;
}

}  // namespace daquant
