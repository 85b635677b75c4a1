#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "vsegan/corpus.hpp"
#include "vsegan/gradient_suite.hpp"
#include "vsegan/metrics.hpp"
#include "vsegan/trainer.hpp"

namespace py = pybind11;
using namespace vsegan;

namespace {

using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

dsp::Waveform to_wave(const F64Array& a) {
  require(a.ndim() == 1, "waveform must be one-dimensional");
  return dsp::Waveform{std::vector<double>(a.data(), a.data() + a.size())};
}

py::array_t<double> to_array(const std::vector<double>& v) {
  py::array_t<double> out(std::vector<py::ssize_t>{py::ssize_t(v.size())});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

std::vector<io::GrayImage> to_frames(const U8Array& a) {
  require(a.ndim() == 3, "frames must have shape (n, height, width)");
  std::vector<io::GrayImage> out(std::size_t(a.shape(0)));
  const std::size_t h = std::size_t(a.shape(1)), w = std::size_t(a.shape(2));
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].height = h;
    out[i].width = w;
    const auto* p = a.data() + i * h * w;
    out[i].pixels.assign(p, p + h * w);
  }
  return out;
}

py::dict report_dict(const metrics::EvalReport& r) {
  py::list rows, summary;
  for (const auto& x : r.rows)
    rows.append(py::dict(py::arg("utterance") = x.utterance, py::arg("snr_db") = x.snr_db,
                         py::arg("condition") = x.condition, py::arg("stoi") = x.stoi,
                         py::arg("sisdr_db") = x.sisdr_db, py::arg("lsd_db") = x.lsd_db));
  for (const auto& s : r.summary)
    summary.append(py::dict(py::arg("snr_db") = s.snr_db, py::arg("utterances") = s.utterances,
                            py::arg("noisy_stoi") = s.noisy_stoi, py::arg("enhanced_stoi") = s.enhanced_stoi,
                            py::arg("noisy_sisdr_db") = s.noisy_sisdr_db,
                            py::arg("enhanced_sisdr_db") = s.enhanced_sisdr_db,
                            py::arg("median_stoi_gain") = s.median_stoi_gain,
                            py::arg("median_sisdr_gain_db") = s.median_sisdr_gain_db));
  return py::dict(py::arg("rows") = rows, py::arg("summary") = summary, py::arg("csv") = r.csv());
}

}  // namespace

PYBIND11_MODULE(_vsegan, m) {
  m.doc() = "Audio-visual speech enhancement GAN";
  m.attr("__version__") = "0.1.0";
  py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_ValueError);
  py::register_exception<IntegrityError>(m, "IntegrityError", PyExc_IOError);
  py::register_exception<NonFiniteError>(m, "NonFiniteError", PyExc_ArithmeticError);

  m.def(
      "log_mel",
      [](const F64Array& samples) {
        const auto segs = dsp::log_mel(dsp::segment_aligned_stft(to_wave(samples)));
        py::array_t<double> out({py::ssize_t(segs.size()), py::ssize_t(dsp::kMelBands), py::ssize_t(dsp::kSegmentFrames)});
        auto v = out.mutable_unchecked<3>();
        for (std::size_t s = 0; s < segs.size(); ++s)
          for (std::size_t b = 0; b < dsp::kMelBands; ++b)
            for (std::size_t f = 0; f < dsp::kSegmentFrames; ++f) v(s, b, f) = segs[s].values(long(b), long(f));
        return out;
      },
      py::arg("samples"), "Log-mel segments of shape (n, 80, 20); trailing partial segments are dropped.");
  m.def(
      "mix_at_snr",
      [](const F64Array& clean, const F64Array& noise, double snr_db) {
        return to_array(dsp::mix_at_snr(to_wave(clean), to_wave(noise), snr_db).samples);
      },
      py::arg("clean"), py::arg("noise"), py::arg("snr_db"));

  m.def(
      "stoi", [](const F64Array& c, const F64Array& d) { return metrics::stoi(to_wave(c), to_wave(d)); },
      py::arg("clean"), py::arg("degraded"));
  m.def(
      "si_sdr",
      [](const F64Array& r, const F64Array& e) { return metrics::si_sdr(to_wave(r).samples, to_wave(e).samples); },
      py::arg("reference"), py::arg("estimate"));
  m.def(
      "lsd",
      [](const F64Array& a, const F64Array& b) {
        return metrics::lsd(dsp::magnitude(dsp::stft(to_wave(a))), dsp::magnitude(dsp::stft(to_wave(b))));
      },
      py::arg("clean"), py::arg("other"), "Log-spectral distance in dB between two equal-length waveforms.");

  m.def(
      "build_corpus",
      [](const std::filesystem::path& out_dir, std::size_t n_train, std::size_t n_val, std::size_t n_test,
         std::uint64_t seed, double min_duration_s, double max_duration_s) {
        corpus::CorpusConfig c;
        c.out_dir = out_dir;
        c.n_train = n_train;
        c.n_val = n_val;
        c.n_test = n_test;
        c.seed = seed;
        c.min_duration_s = min_duration_s;
        c.max_duration_s = max_duration_s;
        corpus::build_corpus(c);
        return py::dict(py::arg("train") = out_dir / "train.json", py::arg("val") = out_dir / "val.json",
                        py::arg("test") = out_dir / "test.json");
      },
      py::arg("out_dir"), py::arg("n_train") = 200, py::arg("n_val") = 20, py::arg("n_test") = 20,
      py::arg("seed") = 1, py::arg("min_duration_s") = 2.0, py::arg("max_duration_s") = 3.0);

  m.def(
      "train",
      [](const std::string& config_json, std::optional<std::filesystem::path> resume) {
        train::TrainOptions opt;
        opt.resume = resume;
        train::TrainResult r;
        {
          py::gil_scoped_release nogil;
          r = train::train(train::config_from_json(config_json), opt);
        }
        return py::dict(py::arg("final_checkpoint") = r.final_checkpoint, py::arg("metrics_path") = r.metrics_path,
                        py::arg("epochs") = r.epochs.size(), py::arg("seconds") = r.seconds);
      },
      py::arg("config_json"), py::arg("resume") = py::none(),
      "Train from a JSON config (same keys as the command-line tool).");

  m.def(
      "evaluate",
      [](const std::filesystem::path& ckpt, const std::filesystem::path& manifest, std::vector<double> snrs) {
        metrics::EvalReport r;
        {
          py::gil_scoped_release nogil;
          r = train::evaluate(ckpt, corpus::load_manifest(manifest), snrs);
        }
        return report_dict(r);
      },
      py::arg("checkpoint"), py::arg("manifest"), py::arg("snrs") = std::vector<double>{0.0});

  m.def(
      "gradient_suite",
      [](unsigned width_shift, std::uint64_t seed, std::size_t per_group) {
        const auto rep = run_gradient_suite(width_shift, seed, per_group);
        py::list entries;
        for (const auto& e : rep.entries)
          entries.append(py::dict(py::arg("name") = e.name, py::arg("max_rel_error") = e.max_rel_error,
                                  py::arg("tolerance") = e.tolerance, py::arg("passed") = e.passed()));
        return py::dict(py::arg("passed") = rep.passed(), py::arg("seconds") = rep.seconds,
                        py::arg("entries") = entries);
      },
      py::arg("width_shift") = 8, py::arg("seed") = 1, py::arg("per_group") = 20);

  py::class_<train::Enhancer>(m, "Enhancer")
      .def(py::init<const std::filesystem::path&>(), py::arg("checkpoint"))
      .def(
          "enhance",
          [](train::Enhancer& e, const F64Array& noisy, const U8Array& frames) {
            return to_array(e.enhance(to_wave(noisy), to_frames(frames)).samples);
          },
          py::arg("noisy"), py::arg("frames"),
          "Enhance 16 kHz audio given 25 fps 80x80 uint8 lip frames of shape (n, 80, 80).")
      .def_property_readonly("config", [](const train::Enhancer& e) { return train::to_json(e.config()); });
}
