#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "quditcal/cli.hpp"
#include "quditcal/evaluation.hpp"
#include "quditcal/grape.hpp"
#include "quditcal/io.hpp"
#include "quditcal/training.hpp"

namespace py = pybind11;
using namespace quditcal;

namespace {

PulseSet make_pulse(const std::vector<double>& eps1, const std::vector<double>& eps2, double dt, double bound) {
  PulseSet p;
  p.dt = dt;
  p.amp_bound = bound;
  p.channels = {eps1, eps2};
  p.validate();
  return p;
}

EnvConfig make_env(const PulseSet& baseline, const DeviceParams& nominal, const std::string& gate, int modes,
                   double alpha, double eta_omega, double eta_g) {
  EnvConfig e;
  e.baseline = baseline;
  e.nominal = nominal;
  e.target = target_gate(parse_gate(gate));
  e.modes = modes;
  e.alpha = alpha;
  e.est_eta_omega = eta_omega;
  e.est_eta_g = eta_g;
  e.validate();
  return e;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Two-qutrit gate synthesis and residual RL calibration";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_IOError);

  py::class_<DeviceParams>(m, "DeviceParams")
      .def(py::init<>())
      .def(py::init([](double w1, double w2, double c1, double c2, double g) {
             DeviceParams p{w1, w2, c1, c2, g};
             p.validate();
             return p;
           }),
           py::arg("omega1"), py::arg("omega2"), py::arg("chi1"), py::arg("chi2"), py::arg("g"))
      .def_readwrite("omega1", &DeviceParams::omega1)
      .def_readwrite("omega2", &DeviceParams::omega2)
      .def_readwrite("chi1", &DeviceParams::chi1)
      .def_readwrite("chi2", &DeviceParams::chi2)
      .def_readwrite("g", &DeviceParams::g);

  py::class_<PulseSet>(m, "PulseSet")
      .def(py::init(&make_pulse), py::arg("epsilon1"), py::arg("epsilon2"), py::arg("dt"), py::arg("amp_bound") = 0.3)
      .def_readonly("dt", &PulseSet::dt)
      .def_readonly("amp_bound", &PulseSet::amp_bound)
      .def_property_readonly("epsilon1", [](const PulseSet& p) { return p.channels[0]; })
      .def_property_readonly("epsilon2", [](const PulseSet& p) { return p.channels[1]; })
      .def_property_readonly("n_slices", &PulseSet::n_slices)
      .def_property_readonly("total_time", &PulseSet::total_time);

  py::class_<DeviceOffsets>(m, "DeviceOffsets")
      .def(py::init<>())
      .def(py::init([](double a, double b, double c) { return DeviceOffsets{a, b, c}; }), py::arg("d_omega1"),
           py::arg("d_omega2"), py::arg("d_g"))
      .def_readwrite("d_omega1", &DeviceOffsets::d_omega1)
      .def_readwrite("d_omega2", &DeviceOffsets::d_omega2)
      .def_readwrite("d_g", &DeviceOffsets::d_g);

  m.def("target_gate", [](const std::string& name) { return target_gate(parse_gate(name)); }, py::arg("name"));
  m.def("build_drift", &build_drift, py::arg("params"));
  m.def("build_control_ops", &build_control_ops);
  m.def("propagate", &propagate, py::arg("pulse"), py::arg("params"));
  m.def("avg_gate_fidelity", &avg_gate_fidelity, py::arg("u"), py::arg("target"));
  m.def("unitarity_error", &unitarity_error, py::arg("u"));
  m.def(
      "grape_gradient",
      [](const PulseSet& p, const DeviceParams& d, const std::string& gate) {
        return grape_gradient(p, d, target_gate(parse_gate(gate)));
      },
      py::arg("pulse"), py::arg("params"), py::arg("gate") = "cz3");

  py::class_<GrapeResult>(m, "GrapeResult")
      .def_readonly("pulse", &GrapeResult::pulse)
      .def_readonly("infidelity_history", &GrapeResult::infidelity_history)
      .def_readonly("final_infidelity", &GrapeResult::final_infidelity)
      .def_readonly("converged", &GrapeResult::converged)
      .def_readonly("iterations_used", &GrapeResult::iterations_used)
      .def_readonly("stop_reason", &GrapeResult::stop_reason);

  m.def(
      "grape_optimize",
      [](const DeviceParams& d, const std::string& gate, int n_slices, double total_time, double amp_bound,
         double target_infidelity, int max_iterations, std::uint64_t seed, int restarts) {
        GrapeConfig c;
        c.n_slices = n_slices;
        c.total_time = total_time;
        c.amp_bound = amp_bound;
        c.target_infidelity = target_infidelity;
        c.max_iterations = max_iterations;
        c.seed = seed;
        py::gil_scoped_release release;
        return grape_optimize_best(c, d, target_gate(parse_gate(gate)), restarts);
      },
      py::arg("params") = DeviceParams{}, py::arg("gate") = "cz3", py::arg("n_slices") = 160,
      py::arg("total_time") = 1600.0, py::arg("amp_bound") = 0.3, py::arg("target_infidelity") = 1e-10,
      py::arg("max_iterations") = 5000, py::arg("seed") = 0, py::arg("restarts") = 1);

  m.def(
      "sample_offsets",
      [](int count, std::uint64_t seed, double sigma_omega, double sigma_g) {
        NoiseConfig c{sigma_omega, sigma_g, seed};
        c.validate();
        Rng rng(stream_seed(seed, Stream::kDevices));
        std::vector<DeviceOffsets> out(count);
        for (auto& o : out) o = sample_offsets(rng, c);
        return out;
      },
      py::arg("count"), py::arg("seed") = 0, py::arg("sigma_omega") = 1e-3, py::arg("sigma_g") = 5e-5);
  m.def("fixed_single_device", &fixed_single_device);

  m.def(
      "cosine_basis", [](int n, int k) { return cosine_basis(n, k).matrix; }, py::arg("n"), py::arg("k"));

  m.def(
      "device_fidelity",
      [](const PulseSet& pulse, const DeviceOffsets& offsets, const DeviceParams& nominal, const std::string& gate) {
        return avg_gate_fidelity(propagate(pulse, apply_offsets(nominal, offsets)), target_gate(parse_gate(gate)));
      },
      py::arg("pulse"), py::arg("offsets"), py::arg("nominal") = DeviceParams{}, py::arg("gate") = "cz3");

  m.def(
      "residual_pulse",
      [](const PulseSet& baseline, const std::vector<double>& action, int modes, double alpha) {
        const CosineBasis basis = cosine_basis(baseline.n_slices(), modes);
        return compose_pulse(baseline, residual_from_action(action, basis, alpha).channels, baseline.amp_bound);
      },
      py::arg("baseline"), py::arg("action"), py::arg("modes") = 20, py::arg("alpha") = 0.03);

  py::class_<EnsembleStats>(m, "EnsembleStats")
      .def_readonly("method", &EnsembleStats::method)
      .def_readonly("seed", &EnsembleStats::seed)
      .def_readonly("devices", &EnsembleStats::devices)
      .def_readonly("fidelities", &EnsembleStats::fidelities)
      .def_readonly("mean", &EnsembleStats::mean)
      .def_readonly("std", &EnsembleStats::std);

  py::class_<Policy>(m, "Policy")
      .def_property_readonly("algorithm", [](const Policy& p) { return algorithm_name(p.algorithm()); })
      .def_property_readonly("action_dim", &Policy::action_dim)
      .def("act", [](const Policy& p, const std::array<double, 3>& o) { return p.act(Observation{o}); },
           py::arg("observation"));
  m.def("policy_import", py::overload_cast<const std::filesystem::path&>(&policy_import), py::arg("checkpoint_dir"));

  m.def(
      "eval_ensemble",
      [](const PulseSet& baseline, const std::optional<Policy>& policy, int m_devices, std::uint64_t seed,
         const DeviceParams& nominal, const std::string& gate, int modes, double alpha, double eta_omega,
         double eta_g) {
        const EnvConfig e = make_env(baseline, nominal, gate, modes, alpha, eta_omega, eta_g);
        if (!policy) return eval_ensemble("oct", zero_policy(e.action_dim()), e, m_devices, seed);
        const Policy p = *policy;
        py::gil_scoped_release release;
        return eval_ensemble(algorithm_name(p.algorithm()), [&p](const Observation& o) { return p.act(o); }, e,
                             m_devices, seed);
      },
      py::arg("baseline"), py::arg("policy") = py::none(), py::arg("m") = 100, py::arg("seed") = 1000,
      py::arg("nominal") = DeviceParams{}, py::arg("gate") = "cz3", py::arg("modes") = 20, py::arg("alpha") = 0.03,
      py::arg("eta_omega") = 0.0, py::arg("eta_g") = 0.0);

  m.def(
      "read_pulse_json", [](const std::string& path) { return io::read_pulse_json(path); }, py::arg("path"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        py::gil_scoped_release release;
        return run_cli(args);
      },
      py::arg("args"));
  m.attr("__version__") = kToolVersion;
}
