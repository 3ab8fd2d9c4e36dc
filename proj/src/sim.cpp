// SPDX-License-Identifier: Apache-2.0
#include "daquant/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <future>
#include <numeric>

#include "daquant/bits.hpp"
#include "daquant/errors.hpp"
#include "daquant/scalar_code.hpp"

namespace daquant {

namespace {

double l2(std::span<const double> v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void append_label_bits(BitWriter& w, const Task& task, double label) {
  switch (task.label_transport()) {
    case LabelTransport::Packed:
      break;
    case LabelTransport::ClassBits: {
      // Binary labels ride as one bit: +1 -> 1, -1 -> 0.
      const int bits = static_cast<int>(task.label_bits());
      const std::uint64_t idx = label > 0 ? 1 : 0;
      w.put_uint(idx, bits);
      break;
    }
    case LabelTransport::Float64:
      w.put_f64(label);
      break;
  }
}

double read_label_bits(BitReader& r, const Task& task) {
  switch (task.label_transport()) {
    case LabelTransport::Packed:
      return 0.0;
    case LabelTransport::ClassBits: {
      const int bits = static_cast<int>(task.label_bits());
      return r.get_uint(bits) ? 1.0 : -1.0;
    }
    case LabelTransport::Float64:
      return r.get_f64();
  }
  return 0.0;
}

WireMessage make_message(MsgType type, BitWriter&& w) {
  WireMessage msg;
  msg.type = type;
  msg.bit_cost = w.bit_count();
  msg.payload = w.take();
  return msg;
}

}  // namespace

std::vector<std::uint8_t> frame_message(const WireMessage& msg) {
  std::vector<std::uint8_t> out;
  out.reserve(5 + msg.payload.size());
  out.push_back(static_cast<std::uint8_t>(msg.type));
  const auto n = static_cast<std::uint32_t>(msg.bit_cost);
  out.push_back(static_cast<std::uint8_t>(n >> 24));
  out.push_back(static_cast<std::uint8_t>(n >> 16));
  out.push_back(static_cast<std::uint8_t>(n >> 8));
  out.push_back(static_cast<std::uint8_t>(n));
  out.insert(out.end(), msg.payload.begin(), msg.payload.end());
  return out;
}

WireMessage parse_frame(std::span<const std::uint8_t> bytes,
                        std::size_t& offset) {
  if (offset + 5 > bytes.size()) throw CorruptMessage("frame header truncated");
  WireMessage msg;
  const std::uint8_t t = bytes[offset];
  if (t < 1 || t > 5) throw CorruptMessage("unknown message type byte");
  msg.type = static_cast<MsgType>(t);
  msg.bit_cost = (static_cast<std::int64_t>(bytes[offset + 1]) << 24) |
                 (static_cast<std::int64_t>(bytes[offset + 2]) << 16) |
                 (static_cast<std::int64_t>(bytes[offset + 3]) << 8) |
                 static_cast<std::int64_t>(bytes[offset + 4]);
  offset += 5;
  const std::size_t nbytes = static_cast<std::size_t>((msg.bit_cost + 7) / 8);
  if (offset + nbytes > bytes.size())
    throw CorruptMessage("frame payload truncated");
  msg.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset),
                     bytes.begin() + static_cast<std::ptrdiff_t>(offset + nbytes));
  offset += nbytes;
  return msg;
}

double LrSchedule::at(std::int64_t step) const {
  double rate = base;
  for (auto b : boundaries)
    if (step >= b) rate *= decay;
  return rate;
}

void ModelState::apply_update(std::span<const double> ghat) {
  const double rate = lr.at(step);
  for (std::size_t j = 0; j < w.size(); ++j) {
    momentum_buf[j] = momentum * momentum_buf[j] + ghat[j];
    w[j] -= rate * momentum_buf[j];
  }
  if (d_radius) {
    const double n = l2(w);
    if (n > *d_radius) {
      const double c = *d_radius / n;
      for (auto& v : w) v *= c;
    }
  }
}

void ExperimentConfig::validate() const {
  if (iterations < 0) throw ConfigError("run.iterations: must be >= 0");
  if (nodes < 1) throw ConfigError("run.nodes: must be >= 1");
  if (batch_size < 1) throw ConfigError("run.batch_size: must be >= 1");
  if (record_every < 1) throw ConfigError("run.record_every: must be >= 1");
  if (!(lr > 0)) throw ConfigError("opt.lr: must be > 0");
  if (momentum < 0 || momentum >= 1)
    throw ConfigError("opt.momentum: must be in [0, 1)");
  if (m < 0 || m == 1) throw ConfigError("quant.m: must be 0 (auto) or >= 2");
  ThresholdPolicy p;
  p.kind = selection_kind;
  p.c = selection_c;
  p.alpha = selection_alpha;
  p.validate();
}

int default_levels(int h, int d) {
  const double v = std::ceil(h * std::sqrt(static_cast<double>(d)));
  return static_cast<int>(v);
}

SimContext SimContext::prepare(const ExperimentConfig& cfg, const Task& task) {
  cfg.validate();
  SimContext ctx;
  ctx.task = &task;
  ctx.cfg = cfg;
  const int d = task.data_dim();
  const int h = task.model_dim();
  ctx.m = cfg.m > 0 ? cfg.m : default_levels(h, d);

  if (cfg.scheme == Scheme::DataQOnly || cfg.scheme == Scheme::DaQuFull) {
    ctx.data_qcfg.m = ctx.m;
    ctx.data_qcfg.d = d;
    ctx.data_qcfg.bound = task.bound();
    ctx.data_qcfg.mode = cfg.quant_mode;
    ctx.data_qcfg.validate();
    ctx.data_table.emplace(d, ctx.m);
  }
  if (cfg.scheme == Scheme::GradQBaseline) {
    ctx.grad_qcfg.m =
        static_cast<int>(std::ceil(std::sqrt(static_cast<double>(h)))) + 1;
    ctx.grad_qcfg.d = h;
    ctx.grad_qcfg.bound = 1.0;
    ctx.grad_qcfg.mode = QuantMode::PerSampleNormScaled;
    ctx.grad_qcfg.validate();
    ctx.grad_table.emplace(h, ctx.grad_qcfg.m);
  }
  if (cfg.scheme == Scheme::DaQuFull) {
    double cz;
    if (cfg.cz_override) {
      cz = *cfg.cz_override;
    } else if (task.analytic_cz()) {
      cz = *task.analytic_cz();
    } else {
      RandomStream probe = RandomStream::derive(cfg.seed, StreamPurpose::Probe);
      cz = estimate_cz(task, ctx.data_qcfg, *ctx.data_table,
                       cfg.cz_probe_trials, probe);
      if (cz <= 0) cz = 1.0;
    }
    CorrectionParams p;
    p.c_z = cz;
    p.bound = task.bound();
    p.d = d;
    p.h = h;
    p.m = ctx.m;
    p.validate();
    ctx.corr = p;
    ctx.resolved_cz = cz;
  }
  return ctx;
}

namespace {

struct SlotResult {
  std::vector<WireMessage> msgs;
  bool transmitted = false;
  double loss = 0;
  int cap_exceeded = 0;
  int fallback_coords = 0;
};

// Work for one sample slot; pure given the derived streams, so slots may run
// on any thread. `batch_scale`/`charge_header` only apply to BatchMaxScaled.
SlotResult run_slot(const SimContext& ctx, std::span<const double> w,
                    std::size_t idx, std::size_t slot, std::int64_t iteration,
                    const ThresholdPolicy& policy, double batch_scale,
                    bool charge_header) {
  const Task& task = *ctx.task;
  SlotResult out;
  out.loss = task.sample_loss(idx, w);
  if (!should_transmit(out.loss, policy)) {
    out.msgs.push_back(WireMessage{MsgType::Skip, {}, 0});
    return out;
  }
  out.transmitted = true;

  switch (ctx.cfg.scheme) {
    case Scheme::Unquantized: {
      const auto g = task.sample_grad(idx, w);
      BitWriter bw;
      for (double v : g) bw.put_f64(v);
      out.msgs.push_back(make_message(MsgType::Unquantized, std::move(bw)));
      break;
    }
    case Scheme::GradQBaseline: {
      const auto g = task.sample_grad(idx, w);
      RandomStream rng =
          RandomStream::derive(ctx.cfg.seed, StreamPurpose::EncodeStoch,
                               static_cast<std::uint64_t>(iteration), slot);
      const auto enc =
          dataq_stochastic(DataPoint(g), ctx.grad_qcfg, *ctx.grad_table, rng);
      out.fallback_coords += enc.fallback_coords;
      BitWriter bw;
      bw.put_f64(*enc.enc.scale);
      bw.put_bigint(enc.enc.rank, enc.enc.bit_length);
      out.msgs.push_back(make_message(MsgType::GradQBaseline, std::move(bw)));
      break;
    }
    case Scheme::DataQOnly:
    case Scheme::DaQuFull: {
      const DataPoint z = task.data_vector(idx);
      EncodeResult enc;
      if (ctx.cfg.quant_mode == QuantMode::BatchMaxScaled) {
        enc = dataq_encode_batch(z, ctx.data_qcfg, *ctx.data_table,
                                 batch_scale, charge_header);
      } else {
        enc = dataq_encode(z, ctx.data_qcfg, *ctx.data_table);
      }
      BitWriter bw;
      if (enc.enc.header_bits == 64) bw.put_f64(*enc.enc.scale);
      bw.put_bigint(enc.enc.rank, enc.enc.bit_length);
      append_label_bits(bw, task, task.label_value(idx));
      out.msgs.push_back(make_message(MsgType::SampleEnc, std::move(bw)));

      if (ctx.cfg.scheme == Scheme::DaQuFull) {
        const auto g_true = task.sample_grad(idx, w);
        const double scale =
            ctx.cfg.quant_mode == QuantMode::BatchMaxScaled ? batch_scale
            : enc.enc.scale ? *enc.enc.scale
                            : 1.0;
        const DataPoint zq = reconstruct(enc.pair, ctx.data_qcfg, scale);
        const auto g_q = task.grad(w, zq.values, task.label_value(idx));
        std::vector<double> delta(g_true.size());
        for (std::size_t j = 0; j < delta.size(); ++j)
          delta[j] = g_true[j] - g_q[j];
        RandomStream rng =
            RandomStream::derive(ctx.cfg.seed, StreamPurpose::Correction,
                                 static_cast<std::uint64_t>(iteration), slot);
        const auto corr =
            gradcorr_encode(delta, *ctx.corr, rng, ctx.cfg.shared_randomness);
        if (corr.cap_exceeded) ++out.cap_exceeded;
        WireMessage msg;
        msg.type = MsgType::Correction;
        msg.payload = pack_correction_payload(corr.msg, task.model_dim());
        msg.bit_cost = corr.msg.wire_bits(task.model_dim());
        out.msgs.push_back(std::move(msg));
      }
      break;
    }
  }
  return out;
}

int thread_cap() {
  const char* env = std::getenv("DAQUANT_THREADS");
  if (!env) return 1;
  const int v = std::atoi(env);
  return v > 0 ? v : 1;
}

}  // namespace

NodeOutput node_step(const SimContext& ctx, std::span<const double> w,
                     std::span<const std::size_t> sample_indices,
                     std::int64_t iteration, const ThresholdPolicy& policy) {
  const Task& task = *ctx.task;
  const std::size_t n = sample_indices.size();

  // BatchMaxScaled couples slots through the shared header; it always runs
  // sequentially. The scale is the max feature magnitude across the batch.
  double batch_scale = 0;
  const bool batch_scaled = ctx.cfg.quant_mode == QuantMode::BatchMaxScaled;
  if (batch_scaled) {
    for (auto idx : sample_indices) {
      const DataPoint z = task.data_vector(idx);
      for (double v : z.values) batch_scale = std::max(batch_scale, std::abs(v));
    }
  }

  std::vector<SlotResult> slots(n);
  const int threads = batch_scaled ? 1 : std::min<int>(thread_cap(), static_cast<int>(n));
  if (threads > 1) {
    std::vector<std::future<void>> futs;
    std::atomic<std::size_t> next{0};
    for (int t = 0; t < threads; ++t) {
      futs.push_back(std::async(std::launch::async, [&] {
        for (std::size_t s = next.fetch_add(1); s < n; s = next.fetch_add(1))
          slots[s] = run_slot(ctx, w, sample_indices[s], s, iteration, policy,
                              0.0, false);
      }));
    }
    for (auto& f : futs) f.get();
  } else {
    bool header_pending = batch_scaled;
    for (std::size_t s = 0; s < n; ++s) {
      slots[s] = run_slot(ctx, w, sample_indices[s], s, iteration, policy,
                          batch_scale, header_pending);
      if (slots[s].transmitted) header_pending = false;
    }
  }

  // Merge in slot order; all accumulation is deterministic.
  NodeOutput out;
  for (auto& s : slots) {
    out.sampled_loss_sum += s.loss;
    if (s.transmitted) {
      ++out.transmitted;
      out.transmitted_loss_sum += s.loss;
    } else {
      ++out.skipped;
    }
    out.cap_exceeded += s.cap_exceeded;
    out.fallback_coords += s.fallback_coords;
    for (auto& m : s.msgs) out.msgs.push_back(std::move(m));
  }
  return out;
}

AgentOutput agent_step(const SimContext& ctx, ModelState& model,
                       const std::vector<WireMessage>& msgs,
                       std::int64_t iteration) {
  const Task& task = *ctx.task;
  const int h = task.model_dim();
  std::vector<double> acc(static_cast<std::size_t>(h), 0.0);
  std::size_t slot = 0;
  std::size_t samples = 0;
  bool any = false;
  double batch_scale = 0;
  std::vector<double> g_zq;  // pending gradient awaiting its correction

  for (std::size_t k = 0; k < msgs.size(); ++k) {
    const WireMessage& msg = msgs[k];
    switch (msg.type) {
      case MsgType::Skip:
        ++slot;
        ++samples;
        break;
      case MsgType::Unquantized: {
        BitReader r(msg.payload);
        for (int j = 0; j < h; ++j) acc[static_cast<std::size_t>(j)] += r.get_f64();
        any = true;
        ++slot;
        ++samples;
        break;
      }
      case MsgType::GradQBaseline: {
        const auto enc = unpack_sample_payload(msg.payload, *ctx.grad_table,
                                               /*has_header=*/true);
        const DataPoint ghat = dataq_decode(enc, ctx.grad_qcfg, *ctx.grad_table);
        for (int j = 0; j < h; ++j)
          acc[static_cast<std::size_t>(j)] += ghat.values[static_cast<std::size_t>(j)];
        any = true;
        ++slot;
        ++samples;
        break;
      }
      case MsgType::SampleEnc: {
        BitReader r(msg.payload);
        EncodedSample enc;
        bool has_header = false;
        if (ctx.cfg.quant_mode == QuantMode::PerSampleNormScaled) {
          has_header = true;
        } else if (ctx.cfg.quant_mode == QuantMode::BatchMaxScaled) {
          // only the first transmitted sample of the batch carries the scale
          has_header = msg.bit_cost >=
                       64 + ctx.data_table->payload_bits() + task.label_bits();
        }
        if (has_header) {
          enc.scale = r.get_f64();
          enc.header_bits = 64;
          if (ctx.cfg.quant_mode == QuantMode::BatchMaxScaled)
            batch_scale = *enc.scale;
        }
        enc.bit_length = ctx.data_table->payload_bits();
        enc.rank = r.get_bigint(enc.bit_length);
        const double label = read_label_bits(r, task);
        const DataPoint zq =
            dataq_decode(enc, ctx.data_qcfg, *ctx.data_table,
                         ctx.cfg.quant_mode == QuantMode::BatchMaxScaled
                             ? std::optional<double>(batch_scale)
                             : std::nullopt);
        g_zq = task.grad(model.w, zq.values, label);
        if (ctx.cfg.scheme == Scheme::DaQuFull) {
          // the paired Correction message finishes this sample
          break;
        }
        for (int j = 0; j < h; ++j)
          acc[static_cast<std::size_t>(j)] += g_zq[static_cast<std::size_t>(j)];
        g_zq.clear();
        any = true;
        ++slot;
        ++samples;
        break;
      }
      case MsgType::Correction: {
        if (g_zq.empty())
          throw CorruptMessage("correction without preceding sample");
        int shared_istar = 0;
        if (ctx.cfg.shared_randomness) {
          RandomStream rng = RandomStream::derive(
              ctx.cfg.seed, StreamPurpose::Correction, static_cast<std::uint64_t>(iteration), slot);
          shared_istar = static_cast<int>(
              rng.uniform_int(static_cast<std::uint64_t>(h)));
        }
        const CorrectionMsg corr = unpack_correction_payload(
            msg.payload, h, ctx.cfg.shared_randomness, shared_istar);
        const auto deltahat = gradcorr_decode(corr, *ctx.corr);
        const auto ghat = assemble_gradient(g_zq, deltahat);
        for (int j = 0; j < h; ++j)
          acc[static_cast<std::size_t>(j)] += ghat[static_cast<std::size_t>(j)];
        g_zq.clear();
        any = true;
        ++slot;
        ++samples;
        break;
      }
    }
  }
  if (ctx.cfg.scheme == Scheme::DaQuFull && !g_zq.empty())
    throw CorruptMessage("sample encoding without its correction");

  AgentOutput out;
  if (any && samples > 0) {
    const double inv = 1.0 / static_cast<double>(samples);
    for (auto& v : acc) v *= inv;
    out.grad_norm = l2(acc);
    model.apply_update(acc);
    out.updated = true;
  }
  ++model.step;
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const Task& task) {
  const SimContext ctx = SimContext::prepare(cfg, task);
  const std::size_t n_data = task.dataset_size();
  const std::int64_t iters_per_epoch = std::max<std::int64_t>(
      1, static_cast<std::int64_t>((n_data + cfg.batch_size - 1) /
                                   static_cast<std::size_t>(cfg.batch_size)));

  ExperimentResult res;
  res.resolved_cz = ctx.resolved_cz;
  res.resolved_m = ctx.m;
  res.model.w.assign(static_cast<std::size_t>(task.model_dim()), 0.0);
  if (cfg.init_scale > 0) {
    RandomStream irng = RandomStream::derive(cfg.seed, StreamPurpose::Init);
    for (auto& v : res.model.w) v = cfg.init_scale * irng.normal();
  }
  res.model.momentum_buf.assign(static_cast<std::size_t>(task.model_dim()), 0.0);
  res.model.momentum = cfg.momentum;
  res.model.lr.base = cfg.lr;
  res.model.lr.boundaries = cfg.lr_boundaries;
  res.model.lr.decay = cfg.lr_decay;
  res.model.d_radius = cfg.d_radius;

  ThresholdPolicy policy;
  policy.kind = cfg.selection_kind;
  policy.c = cfg.selection_c;
  policy.alpha = cfg.selection_alpha;
  policy.current = 0.0;
  policy.validate();

  std::int64_t cumulative_bits = 0, transmitted = 0, skipped = 0;
  std::int64_t cap_exceeded = 0, fallback = 0;
  double window_loss_sum = 0;
  std::int64_t window_samples = 0;
  double last_grad_norm = 0;

  EpochStats epoch_stats;
  std::int64_t epoch = 0;
  std::vector<std::size_t> perm;

  for (std::int64_t iter = 1; iter <= cfg.iterations; ++iter) {
    const std::int64_t epoch_pos = (iter - 1) % iters_per_epoch;
    if (epoch_pos == 0) {
      epoch = (iter - 1) / iters_per_epoch;
      if (cfg.selection_kind == SelectionKind::AdaptiveEpoch) {
        if (epoch > 0)
          policy.current = adaptive_threshold(epoch_stats, cfg.selection_alpha);
        epoch_stats = EpochStats{};
      }
      if (cfg.order == SampleOrder::Shuffle) {
        perm.resize(n_data);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        RandomStream srng = RandomStream::derive(
            cfg.seed, StreamPurpose::Shuffle, static_cast<std::uint64_t>(epoch));
        for (std::size_t i = n_data; i > 1; --i) {
          const std::size_t j = srng.uniform_int(i);
          std::swap(perm[i - 1], perm[j]);
        }
      }
    }
    if (cfg.selection_kind == SelectionKind::TheorySchedule)
      policy.current = theory_threshold(iter, cfg.selection_c);

    std::vector<std::size_t> batch(static_cast<std::size_t>(cfg.batch_size));
    if (cfg.order == SampleOrder::Shuffle) {
      for (std::size_t s = 0; s < batch.size(); ++s)
        batch[s] = perm[(static_cast<std::size_t>(epoch_pos) * batch.size() + s) % n_data];
    } else {
      RandomStream srng = RandomStream::derive(
          cfg.seed, StreamPurpose::Sample, static_cast<std::uint64_t>(iter));
      if (cfg.nodes == 1) {
        for (auto& s : batch) s = srng.uniform_int(n_data);
      } else {
        // data is sharded round-robin; the iteration's node draws from its
        // own shard only
        const auto nodes = static_cast<std::uint64_t>(cfg.nodes);
        const std::uint64_t node = srng.uniform_int(nodes);
        const std::uint64_t shard =
            n_data / nodes + (node < n_data % nodes ? 1 : 0);
        for (auto& s : batch)
          s = node + nodes * srng.uniform_int(std::max<std::uint64_t>(shard, 1));
      }
    }

    const NodeOutput node = node_step(ctx, res.model.w, batch, iter, policy);
    for (const auto& m : node.msgs) cumulative_bits += m.bit_cost;
    transmitted += node.transmitted;
    skipped += node.skipped;
    cap_exceeded += node.cap_exceeded;
    fallback += node.fallback_coords;
    window_loss_sum += node.sampled_loss_sum;
    window_samples += cfg.batch_size;
    epoch_stats.transmitted += node.transmitted;
    epoch_stats.skipped += node.skipped;
    epoch_stats.transmitted_loss_sum += node.transmitted_loss_sum;

    const AgentOutput agent = agent_step(ctx, res.model, node.msgs, iter);
    last_grad_norm = agent.updated ? agent.grad_norm : 0.0;

    if (epoch_pos == iters_per_epoch - 1 || iter == cfg.iterations) {
      EpochSummary es;
      es.epoch = epoch;
      es.transmitted = epoch_stats.transmitted;
      es.skipped = epoch_stats.skipped;
      es.mean_transmitted_loss = epoch_stats.mean_transmitted_loss();
      es.threshold = policy.current;
      if (epoch_pos == iters_per_epoch - 1) res.epochs.push_back(es);
    }

    if (iter % cfg.record_every == 0 || iter == cfg.iterations) {
      MetricsRecord rec;
      rec.iteration = iter;
      rec.cumulative_bits = cumulative_bits;
      rec.train_loss =
          window_samples > 0 ? window_loss_sum / static_cast<double>(window_samples) : 0.0;
      rec.grad_norm = last_grad_norm;
      rec.transmitted_fraction =
          (transmitted + skipped) > 0
              ? static_cast<double>(transmitted) /
                    static_cast<double>(transmitted + skipped)
              : 0.0;
      rec.cap_exceeded_count = cap_exceeded;
      rec.transmitted = transmitted;
      rec.skipped = skipped;
      rec.threshold = policy.current;
      res.records.push_back(rec);
      window_loss_sum = 0;
      window_samples = 0;
    }
  }
  res.total_bits = cumulative_bits;
  res.cap_exceeded = cap_exceeded;
  res.fallback_coords = fallback;
  return res;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const auto task = make_task(cfg.task);
  return run_experiment(cfg, *task);
}

MeterSummary meter_report(const std::vector<MetricsRecord>& trace) {
  MeterSummary s;
  if (trace.empty()) return s;
  s.total_bits = trace.back().cumulative_bits;
  s.iterations = trace.back().iteration;
  s.bits_per_iteration =
      s.iterations > 0
          ? static_cast<double>(s.total_bits) / static_cast<double>(s.iterations)
          : 0.0;
  return s;
}

}  // namespace daquant
