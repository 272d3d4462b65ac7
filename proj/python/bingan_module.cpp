// Python bindings for the core operations: tensors with reverse-mode
// gradients, binary neurons, adversarial losses, model builders and the
// training harness.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bingan/harness.hpp"
#include "bingan/image.hpp"
#include "bingan/objectives.hpp"

namespace py = pybind11;
using bingan::Tensor;
using TensorF = bingan::Tensor<float>;

namespace {

TensorF tensor_from_numpy(py::array_t<float, py::array::c_style | py::array::forcecast> arr) {
  bingan::Shape shape;
  for (py::ssize_t i = 0; i < arr.ndim(); ++i)
    shape.push_back(static_cast<int>(arr.shape(i)));
  std::vector<float> values(arr.data(), arr.data() + arr.size());
  return TensorF::from(std::move(shape), std::move(values));
}

py::array_t<float> tensor_to_numpy(const TensorF& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<float> out(shape);
  std::copy(t.vec().begin(), t.vec().end(), out.mutable_data());
  return out;
}

bingan::ExperimentConfig config_from_dict(const py::dict& kv) {
  bingan::ExperimentConfig cfg;
  for (auto item : kv)
    cfg.apply(py::str(item.first).cast<std::string>(), py::str(item.second).cast<std::string>());
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_bingan, m) {
  m.doc() = "adversarial training with binary output neurons";

  py::register_exception<bingan::TensorError>(m, "TensorError");
  py::register_exception<bingan::IoError>(m, "IoError");

  py::class_<TensorF>(m, "Tensor")
      .def(py::init(&tensor_from_numpy), py::arg("array"))
      .def("numpy", &tensor_to_numpy)
      .def("item", &TensorF::item)
      .def_property_readonly("shape", [](const TensorF& t) { return t.shape(); })
      .def_property("requires_grad", &TensorF::requires_grad,
                    [](TensorF& t, bool v) { t.set_requires_grad(v); })
      .def("grad",
           [](const TensorF& t) -> py::object {
             if (!t.has_grad()) return py::none();
             return tensor_to_numpy(t.grad());
           })
      .def("zero_grad", &TensorF::zero_grad)
      .def("detach", &TensorF::detach);

  // a curated slice of the op set
  m.def("add", &bingan::add<float>);
  m.def("mul", &bingan::mul<float>);
  m.def("matmul", &bingan::matmul<float>);
  m.def("sigmoid", &bingan::sigmoid<float>);
  m.def("relu", &bingan::relu<float>);
  m.def("leaky_relu", &bingan::leaky_relu<float>, py::arg("x"), py::arg("slope") = 0.2);
  m.def("log", &bingan::log_e<float>);
  m.def("mean", &bingan::mean_all<float>);
  m.def("sum", &bingan::sum_all<float>);
  m.def("backward", [](const TensorF& loss) { bingan::backward(loss); });

  // binary neurons
  m.def(
      "dbn_forward",
      [](const TensorF& x, double tau) {
        auto [out, rec] = bingan::dbn_forward(x, tau);
        return py::make_tuple(tensor_to_numpy(out), tensor_to_numpy(rec.preact));
      },
      py::arg("x"), py::arg("tau") = 1.0);
  m.def(
      "sbn_forward",
      [](const TensorF& x, double tau, std::uint64_t seed) {
        bingan::RngStream rng(seed);
        auto [out, rec] = bingan::sbn_forward(x, tau, rng);
        return py::make_tuple(tensor_to_numpy(out), tensor_to_numpy(rec.preact));
      },
      py::arg("x"), py::arg("tau") = 1.0, py::arg("seed") = 0);
  m.def(
      "ste_backward",
      [](const TensorF& upstream, const TensorF& preact, double tau) {
        bingan::PreactivationRecord<float> rec{preact};
        return tensor_to_numpy(bingan::ste_backward(upstream, rec, tau));
      },
      py::arg("upstream"), py::arg("preact"), py::arg("tau") = 1.0);

  // objectives
  m.def("gan_losses", [](const TensorF& d_real, const TensorF& d_fake) {
    auto losses = bingan::gan_losses(d_real, d_fake);
    return py::make_tuple(losses.g_loss, losses.d_loss);
  });
  m.def("wgan_losses", [](const TensorF& d_real, const TensorF& d_fake) {
    auto losses = bingan::wgan_losses(d_real, d_fake);
    return py::make_tuple(losses.g_loss, losses.d_loss);
  });
  m.def(
      "sample_interpolates",
      [](const TensorF& real, const TensorF& fake, std::uint64_t seed) {
        bingan::RngStream rng(seed);
        return bingan::sample_interpolates(real, fake, rng);
      },
      py::arg("real"), py::arg("fake"), py::arg("seed") = 0);

  // networks
  py::class_<bingan::Network<float>>(m, "Network")
      .def(
          "forward",
          [](bingan::Network<float>& net, const TensorF& x, bool train) {
            return net.forward(x, train ? bingan::Mode::kTrain : bingan::Mode::kEval);
          },
          py::arg("x"), py::arg("train") = true)
      .def("parameter_count", &bingan::Network<float>::parameter_count)
      .def_property_readonly("sigmoid_head", &bingan::Network<float>::sigmoid_head)
      .def_property_readonly("tau",
                             [](bingan::Network<float>& net) {
                               return net.binary_output() ? net.binary_output()->tau() : 1.0;
                             })
      .def("anneal_slope",
           [](bingan::Network<float>& net) {
             if (net.binary_output()) net.binary_output()->anneal_slope();
           })
      .def("last_preactivations", [](bingan::Network<float>& net) -> py::object {
        if (!net.binary_output() || !net.binary_output()->last_record().preact.defined())
          return py::none();
        return tensor_to_numpy(net.binary_output()->last_record().preact);
      });

  auto make_spec = [](const std::string& family, const std::string& neurons,
                      const std::string& objective, int latent_dim) {
    bingan::ModelSpec spec = bingan::ModelSpec::make(bingan::parse_family(family),
                                                     bingan::parse_neurons(neurons),
                                                     bingan::parse_objective(objective));
    spec.latent_dim = latent_dim;
    return spec;
  };
  m.def(
      "build_generator",
      [make_spec](const std::string& family, const std::string& neurons,
                  const std::string& objective, int latent_dim, std::uint64_t seed) {
        return bingan::build_generator<float>(make_spec(family, neurons, objective, latent_dim),
                                              bingan::RngStream::derive(seed, "init.g"));
      },
      py::arg("family") = "mlp", py::arg("neurons") = "deterministic",
      py::arg("objective") = "wgan-gp", py::arg("latent_dim") = 128, py::arg("seed") = 0);
  m.def(
      "build_discriminator",
      [make_spec](const std::string& family, const std::string& neurons,
                  const std::string& objective, int latent_dim, std::uint64_t seed) {
        return bingan::build_discriminator<float>(make_spec(family, neurons, objective, latent_dim),
                                                  bingan::RngStream::derive(seed, "init.d"));
      },
      py::arg("family") = "mlp", py::arg("neurons") = "deterministic",
      py::arg("objective") = "wgan-gp", py::arg("latent_dim") = 128, py::arg("seed") = 0);
  m.def(
      "sample_latent",
      [](int count, int latent_dim, std::uint64_t seed) {
        bingan::RngStream rng = bingan::RngStream::derive(seed, "z");
        return bingan::sample_latent<float>(count, latent_dim, rng);
      },
      py::arg("count"), py::arg("latent_dim") = 128, py::arg("seed") = 0);
  m.def(
      "gradient_penalty",
      [](bingan::Network<float>& critic, const TensorF& x_hat, double lam) {
        return bingan::gradient_penalty<float>(
            [&critic](const TensorF& x) { return critic.forward(x, bingan::Mode::kTrain); }, x_hat,
            lam);
      },
      py::arg("critic"), py::arg("x_hat"), py::arg("lambda") = 10.0);

  // data
  m.def("parse_idx", [](const std::string& path) {
    bingan::RawImages raw = bingan::parse_idx(path);
    py::array_t<std::uint8_t> out({raw.count, raw.rows, raw.cols});
    std::copy(raw.pixels.begin(), raw.pixels.end(), out.mutable_data());
    return out;
  });
  m.def("binarize",
        [](py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> arr) {
          if (arr.ndim() != 3 || arr.shape(1) != 28 || arr.shape(2) != 28)
            throw bingan::IoError("binarize: expected [n, 28, 28] uint8");
          bingan::RawImages raw;
          raw.count = static_cast<int>(arr.shape(0));
          raw.rows = 28;
          raw.cols = 28;
          raw.pixels.assign(arr.data(), arr.data() + arr.size());
          bingan::BinarizedDataset data = bingan::binarize(raw);
          py::array_t<float> out({raw.count, 28, 28});
          std::copy(data.images.begin(), data.images.end(), out.mutable_data());
          return out;
        });
  m.def("write_idx",
        [](const std::string& path,
           py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> arr) {
          if (arr.ndim() != 3) throw bingan::IoError("write_idx: expected [n, rows, cols] uint8");
          bingan::RawImages raw;
          raw.count = static_cast<int>(arr.shape(0));
          raw.rows = static_cast<int>(arr.shape(1));
          raw.cols = static_cast<int>(arr.shape(2));
          raw.pixels.assign(arr.data(), arr.data() + arr.size());
          bingan::write_idx(path, raw);
        });

  // harness
  m.def(
      "train",
      [](const py::dict& kv) {
        bingan::ExperimentConfig cfg = config_from_dict(kv);
        bingan::BinarizedDataset data = bingan::load_dataset(cfg);
        bingan::Trainer trainer(cfg, data);
        bingan::RunArtifacts arts = trainer.run();
        py::dict out;
        out["run_id"] = arts.run_id;
        out["run_dir"] = arts.run_dir;
        out["loss_csv"] = arts.loss_csv;
        out["checkpoints"] = arts.checkpoints;
        out["sample_grids"] = arts.sample_grids;
        out["preact_grids"] = arts.preact_grids;
        out["histograms"] = arts.histograms;
        out["gen_steps"] = arts.gen_steps;
        out["epochs_completed"] = arts.epochs_completed;
        return out;
      },
      py::arg("config"));
  m.def(
      "generate",
      [](const std::string& checkpoint, int count, std::uint64_t seed) {
        bingan::SampleBatch batch = bingan::generate_samples(checkpoint, count, seed);
        return py::make_tuple(tensor_to_numpy(batch.images), tensor_to_numpy(batch.preacts));
      },
      py::arg("checkpoint"), py::arg("count") = 64, py::arg("seed") = 7);
  m.def(
      "postprocess",
      [](py::array_t<float, py::array::c_style | py::array::forcecast> probs,
         const std::string& strategy, std::uint64_t seed) {
        TensorF t = tensor_from_numpy(probs);
        bingan::RngStream rng = bingan::RngStream::derive(seed, "postprocess");
        return tensor_to_numpy(bingan::postprocess_real(t, bingan::parse_strategy(strategy), rng));
      },
      py::arg("probs"), py::arg("strategy") = "threshold", py::arg("seed") = 0);
  m.def(
      "preactivation_histogram",
      [](py::array_t<float, py::array::c_style | py::array::forcecast> values) {
        TensorF t = tensor_from_numpy(values);
        bingan::Histogram h = bingan::compute_preactivation_histogram(t);
        py::array_t<std::uint64_t> counts(static_cast<py::ssize_t>(bingan::Histogram::kBins));
        std::copy(h.counts.begin(), h.counts.end(), counts.mutable_data());
        return counts;
      });
  m.def("emit_sample_grid", [](const TensorF& images, const std::string& path) {
    bingan::emit_sample_grid(images, path);
  });
}
