// SPDX-License-Identifier: Apache-2.0
//
// Distributed-training simulator: node and agent state machines exchanging
// the bit-exact wire format, one logical iteration per sampled batch, with a
// communication meter that counts exact unpadded payload bits.
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "daquant/dataq.hpp"
#include "daquant/gradcorr.hpp"
#include "daquant/problems.hpp"
#include "daquant/selection.hpp"

namespace daquant {

enum class Scheme { DaQuFull, DataQOnly, GradQBaseline, Unquantized };
enum class SampleOrder { Uniform, Shuffle };

enum class MsgType : std::uint8_t {
  SampleEnc = 1,
  Correction = 2,
  Skip = 3,
  GradQBaseline = 4,
  Unquantized = 5,
};

struct WireMessage {
  MsgType type = MsgType::Skip;
  std::vector<std::uint8_t> payload;
  std::int64_t bit_cost = 0;  // exact unpadded payload bits; Skip costs 0
};

// Frame: 1 type byte, 4-byte big-endian payload bit count, payload bytes
// (zero-padded to a byte boundary). The meter counts the bit-count value,
// never the framing.
std::vector<std::uint8_t> frame_message(const WireMessage& msg);
WireMessage parse_frame(std::span<const std::uint8_t> bytes,
                        std::size_t& offset);

struct LrSchedule {
  double base = 0.1;
  std::vector<std::int64_t> boundaries;  // decay applied at step >= boundary
  double decay = 0.1;

  double at(std::int64_t step) const;
};

struct ModelState {
  std::vector<double> w;
  std::vector<double> momentum_buf;
  std::int64_t step = 0;
  double momentum = 0.9;
  LrSchedule lr;
  std::optional<double> d_radius;

  // Momentum SGD step with the scheduled rate, then Euclidean projection
  // onto the hypothesis ball when a radius is set.
  void apply_update(std::span<const double> ghat);
};

struct MetricsRecord {
  std::int64_t iteration = 0;
  std::int64_t cumulative_bits = 0;
  double train_loss = 0;  // mean sampled forward loss since last record
  double grad_norm = 0;   // ||ghat|| of the last update
  double transmitted_fraction = 0;
  std::int64_t cap_exceeded_count = 0;
  std::int64_t transmitted = 0;  // cumulative
  std::int64_t skipped = 0;      // cumulative
  double threshold = 0;
};

struct ExperimentConfig {
  TaskConfig task;
  Scheme scheme = Scheme::Unquantized;
  int m = 0;  // quantizer levels; 0 resolves to ceil(h * sqrt(d))
  QuantMode quant_mode = QuantMode::PerSampleNormScaled;

  SelectionKind selection_kind = SelectionKind::Disabled;
  double selection_alpha = 0.2;
  double selection_c = 0.25;
  std::int64_t selection_horizon = 0;  // 0 -> run.iterations

  std::uint64_t seed = 1;
  std::int64_t iterations = 0;
  int nodes = 1;
  int batch_size = 1;
  bool shared_randomness = false;
  SampleOrder order = SampleOrder::Uniform;

  double lr = 0.1;
  double momentum = 0.9;
  std::vector<std::int64_t> lr_boundaries;
  double lr_decay = 0.1;
  std::optional<double> d_radius;
  double init_scale = 0.0;  // w0 ~ init_scale * N(0,1); 0 keeps w0 = 0

  std::optional<double> cz_override;  // skip the empirical probe
  int cz_probe_trials = 2000;
  std::int64_t record_every = 1;

  void validate() const;
};

// Immutable per-run context: resolved quantizer tables and constants.
struct SimContext {
  const Task* task = nullptr;
  ExperimentConfig cfg;
  int m = 0;  // resolved levels for the data quantizer
  QuantConfig data_qcfg;
  std::optional<SetSizeTable> data_table;
  QuantConfig grad_qcfg;  // GradQBaseline
  std::optional<SetSizeTable> grad_table;
  std::optional<CorrectionParams> corr;  // DaQuFull
  double resolved_cz = 0;

  static SimContext prepare(const ExperimentConfig& cfg, const Task& task);
};

struct NodeOutput {
  std::vector<WireMessage> msgs;
  int transmitted = 0;
  int skipped = 0;
  double sampled_loss_sum = 0;
  double transmitted_loss_sum = 0;
  int cap_exceeded = 0;
  int fallback_coords = 0;
};

// One node turn: gate each sample by its forward loss, then quantize and
// emit the scheme's messages. Skipped samples emit a zero-bit Skip and
// trigger no gradient computation.
NodeOutput node_step(const SimContext& ctx, std::span<const double> w,
                     std::span<const std::size_t> sample_indices,
                     std::int64_t iteration, const ThresholdPolicy& policy);

struct AgentOutput {
  double grad_norm = 0;
  bool updated = false;
};

// Agent turn: decode payloads, recompute gradients at the reconstructed
// points, assemble ghat, apply the model update. An all-skip iteration
// leaves the model unchanged but still advances the step counter.
AgentOutput agent_step(const SimContext& ctx, ModelState& model,
                       const std::vector<WireMessage>& msgs,
                       std::int64_t iteration);

struct EpochSummary {
  std::int64_t epoch = 0;
  std::int64_t transmitted = 0;
  std::int64_t skipped = 0;
  double mean_transmitted_loss = 0;
  double threshold = 0;
};

struct ExperimentResult {
  std::vector<MetricsRecord> records;
  ModelState model;
  std::vector<EpochSummary> epochs;
  std::int64_t total_bits = 0;
  std::int64_t cap_exceeded = 0;
  std::int64_t fallback_coords = 0;
  double resolved_cz = 0;
  int resolved_m = 0;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg, const Task& task);
ExperimentResult run_experiment(const ExperimentConfig& cfg);

struct MeterSummary {
  std::int64_t total_bits = 0;
  std::int64_t iterations = 0;
  double bits_per_iteration = 0;
};

MeterSummary meter_report(const std::vector<MetricsRecord>& trace);

// Resolved default for the level count: ceil(h * sqrt(d)).
int default_levels(int h, int d);

}  // namespace daquant
