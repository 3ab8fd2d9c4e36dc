// SPDX-License-Identifier: Apache-2.0
//
// Python bindings for the main operations: the data-point codec, the
// one-coordinate gradient correction, selection thresholds, and the
// experiment runner.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>

#include "daquant/config.hpp"
#include "daquant/dataq.hpp"
#include "daquant/errors.hpp"
#include "daquant/gradcorr.hpp"
#include "daquant/problems.hpp"
#include "daquant/scalar_code.hpp"
#include "daquant/selection.hpp"
#include "daquant/sim.hpp"

namespace py = pybind11;
using namespace daquant;

namespace {

py::int_ to_py_int(const BigInt& v) {
  const std::string s = v.get_str();
  PyObject* obj = PyLong_FromString(s.c_str(), nullptr, 10);
  if (!obj) throw py::error_already_set();
  return py::reinterpret_steal<py::int_>(obj);
}

BigInt from_py_int(const py::int_& v) {
  py::object s = py::reinterpret_steal<py::object>(PyObject_Str(v.ptr()));
  if (!s) throw py::error_already_set();
  return BigInt(py::cast<std::string>(s), 10);
}

QuantMode mode_from_name(const std::string& name) {
  if (name == "absolute") return QuantMode::AbsoluteBound;
  if (name == "per_sample_norm") return QuantMode::PerSampleNormScaled;
  if (name == "batch_max") return QuantMode::BatchMaxScaled;
  throw ConfigError("unknown quantizer mode: " + name);
}

// Data-point codec bound to one (d, m, B, mode) configuration.
class Codec {
 public:
  Codec(int d, int m, double bound, const std::string& mode)
      : table_(d, m) {
    cfg_.d = d;
    cfg_.m = m;
    cfg_.bound = bound;
    cfg_.mode = mode_from_name(mode);
    cfg_.validate();
  }

  py::dict encode(const std::vector<double>& z) const {
    return result_dict(dataq_encode(DataPoint(z), cfg_, table_));
  }

  py::dict encode_stochastic(const std::vector<double>& z,
                             std::uint64_t seed) const {
    RandomStream rng(seed);
    return result_dict(dataq_stochastic(DataPoint(z), cfg_, table_, rng));
  }

  std::vector<double> decode(const py::int_& rank,
                             std::optional<double> scale) const {
    EncodedSample enc;
    enc.rank = from_py_int(rank);
    enc.bit_length = table_.payload_bits();
    if (scale && cfg_.mode == QuantMode::PerSampleNormScaled) {
      enc.scale = scale;
      enc.header_bits = 64;
    }
    return dataq_decode(enc, cfg_, table_,
                        cfg_.mode == QuantMode::BatchMaxScaled ? scale
                                                               : std::nullopt)
        .values;
  }

  py::int_ set_size() const { return to_py_int(table_.size()); }
  int payload_bits() const { return table_.payload_bits(); }

  py::int_ rank(const std::vector<std::uint32_t>& a,
                const std::vector<std::uint32_t>& b) const {
    return to_py_int(rank_pair(LevelPair{a, b}, table_));
  }

  py::tuple unrank(const py::int_& r) const {
    const auto p = unrank_pair(from_py_int(r), table_);
    return py::make_tuple(p.plus, p.minus);
  }

 private:
  py::dict result_dict(const EncodeResult& res) const {
    const auto payload = pack_sample_payload(res.enc);
    py::dict out;
    out["a"] = res.pair.plus;
    out["b"] = res.pair.minus;
    out["rank"] = to_py_int(res.enc.rank);
    out["bit_length"] = res.enc.bit_length;
    out["header_bits"] = res.enc.header_bits;
    out["scale"] = res.enc.scale ? py::cast(*res.enc.scale) : py::none();
    out["total_bits"] = res.enc.total_bits();
    out["payload"] = py::bytes(reinterpret_cast<const char*>(payload.data()),
                               static_cast<py::ssize_t>(payload.size()));
    out["fallback_coords"] = res.fallback_coords;
    return out;
  }

  QuantConfig cfg_;
  SetSizeTable table_;
};

class Correction {
 public:
  Correction(double c_z, double bound, int d, int h, int m) {
    params_.c_z = c_z;
    params_.bound = bound;
    params_.d = d;
    params_.h = h;
    params_.m = m;
    params_.validate();
  }

  double delta_cap() const { return params_.delta_cap(); }
  std::int64_t wire_bits(bool shared) const {
    CorrectionMsg msg;
    msg.uses_shared_randomness = shared;
    return msg.wire_bits(params_.h);
  }

  py::dict encode(const std::vector<double>& delta, std::uint64_t seed,
                  bool shared) const {
    RandomStream rng(seed);
    const auto res = gradcorr_encode(delta, params_, rng, shared);
    py::dict out;
    out["istar"] = res.msg.istar;
    out["e_g"] = res.msg.e_g;
    out["cap_exceeded"] = res.cap_exceeded;
    out["wire_bits"] = res.msg.wire_bits(params_.h);
    return out;
  }

  std::vector<double> decode(int istar, bool e_g) const {
    CorrectionMsg msg;
    msg.istar = istar;
    msg.e_g = e_g;
    return gradcorr_decode(msg, params_);
  }

 private:
  CorrectionParams params_;
};

py::dict run_from_map(const py::dict& config) {
  ConfigMap map;
  for (const auto& item : config)
    map[py::str(item.first)] = py::str(item.second);
  const ExperimentConfig cfg = config_from_map(map);
  const ExperimentResult res = run_experiment(cfg);

  py::list records;
  for (const auto& r : res.records) {
    py::dict row;
    row["iteration"] = r.iteration;
    row["cumulative_bits"] = r.cumulative_bits;
    row["train_loss"] = r.train_loss;
    row["grad_norm"] = r.grad_norm;
    row["transmitted_fraction"] = r.transmitted_fraction;
    row["cap_exceeded_count"] = r.cap_exceeded_count;
    row["transmitted"] = r.transmitted;
    row["skipped"] = r.skipped;
    row["threshold"] = r.threshold;
    records.append(row);
  }
  py::dict out;
  out["records"] = records;
  out["w"] = res.model.w;
  out["total_bits"] = res.total_bits;
  out["cap_exceeded"] = res.cap_exceeded;
  out["resolved_m"] = res.resolved_m;
  out["csv"] = metrics_csv(res.records);
  return out;
}

}  // namespace

PYBIND11_MODULE(_daquant, m) {
  m.doc() = "dataset-quantized SGD: exact data-point codec and simulator";

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<BoundViolation>(m, "BoundViolation", PyExc_ValueError);
  py::register_exception<MembershipError>(m, "MembershipError", PyExc_ValueError);
  py::register_exception<CorruptMessage>(m, "CorruptMessage", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("set_size", [](int d, int mm) { return to_py_int(set_size(d, mm)); },
        py::arg("d"), py::arg("m"),
        "Exact alphabet size |S(d, m)| as a Python int.");
  m.def("payload_bits",
        [](int d, int mm) { return ceil_log2(set_size(d, mm)); },
        py::arg("d"), py::arg("m"), "ceil(log2 |S(d, m)|).");
  m.def("bits_bound", &bits_bound, py::arg("d"), py::arg("m"),
        "Analytic upper bound on the per-sample bit cost.");

  py::class_<Codec>(m, "Codec")
      .def(py::init<int, int, double, const std::string&>(), py::arg("d"),
           py::arg("m"), py::arg("bound") = 1.0, py::arg("mode") = "absolute")
      .def("encode", &Codec::encode, py::arg("z"))
      .def("encode_stochastic", &Codec::encode_stochastic, py::arg("z"),
           py::arg("seed"))
      .def("decode", &Codec::decode, py::arg("rank"),
           py::arg("scale") = py::none())
      .def("rank", &Codec::rank, py::arg("a"), py::arg("b"))
      .def("unrank", &Codec::unrank, py::arg("rank"))
      .def_property_readonly("set_size", &Codec::set_size)
      .def_property_readonly("payload_bits", &Codec::payload_bits);

  py::class_<Correction>(m, "Correction")
      .def(py::init<double, double, int, int, int>(), py::arg("c_z"),
           py::arg("bound"), py::arg("d"), py::arg("h"), py::arg("m"))
      .def("encode", &Correction::encode, py::arg("delta"), py::arg("seed"),
           py::arg("shared") = false)
      .def("decode", &Correction::decode, py::arg("istar"), py::arg("e_g"))
      .def("wire_bits", &Correction::wire_bits, py::arg("shared") = false)
      .def_property_readonly("delta_cap", &Correction::delta_cap);

  m.def("scalar_encode",
        [](double x, std::uint64_t seed) {
          RandomStream rng(seed);
          return scalar_1bit_encode(x, rng);
        },
        py::arg("x"), py::arg("seed"),
        "One stochastic bit with P(1) = (x+1)/2.");
  m.def("scalar_decode", &scalar_1bit_decode, py::arg("bit"));

  m.def("should_transmit",
        [](double loss, double threshold) {
          ThresholdPolicy p;
          p.kind = SelectionKind::TheorySchedule;
          p.current = threshold;
          return should_transmit(loss, p);
        },
        py::arg("loss"), py::arg("threshold"),
        "Strict loss-threshold transmit gate.");
  m.def("theory_threshold", &theory_threshold, py::arg("i"),
        py::arg("c") = 0.25);

  m.def("run_experiment", &run_from_map, py::arg("config"),
        "Run one experiment from a {key: value} config mapping; returns "
        "records, the final model, and the exact bit meter.");
}
