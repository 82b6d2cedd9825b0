#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <optional>

#include "evimpact/accumulate.hpp"
#include "evimpact/eval.hpp"
#include "evimpact/impact.hpp"
#include "evimpact/loss.hpp"
#include "evimpact/refine.hpp"
#include "evimpact/sim.hpp"
#include "evimpact/types.hpp"

namespace py = pybind11;
using namespace evimpact;

namespace {

template <typename T>
using arr = py::array_t<T, py::array::c_style | py::array::forcecast>;

FrameStack framestack_from_array(const arr<float> &a, std::int64_t dt_us) {
  if (a.ndim() != 3) throw DimensionError("expected a (K, H, W) array");
  FrameStack s;
  s.k_count = int(a.shape(0));
  s.height = int(a.shape(1));
  s.width = int(a.shape(2));
  s.dt_us = dt_us;
  s.values.assign(a.data(), a.data() + a.size());
  return s;
}

py::array_t<float> framestack_to_array(const FrameStack &s) {
  py::array_t<float> a({s.k_count, s.height, s.width});
  std::memcpy(a.mutable_data(), s.values.data(), s.values.size() * sizeof(float));
  return a;
}

PlaneStack planestack_from_array(const arr<float> &a) {
  if (a.ndim() != 4) throw DimensionError("expected a (K, C, H, W) array");
  PlaneStack s;
  s.k_count = int(a.shape(0));
  s.channels = int(a.shape(1));
  s.height = int(a.shape(2));
  s.width = int(a.shape(3));
  s.values.assign(a.data(), a.data() + a.size());
  return s;
}

py::array_t<float> planestack_to_array(const PlaneStack &s) {
  py::array_t<float> a({s.k_count, s.channels, s.height, s.width});
  std::memcpy(a.mutable_data(), s.values.data(), s.values.size() * sizeof(float));
  return a;
}

LabelStack labelstack_from_array(const arr<std::uint8_t> &a) {
  if (a.ndim() != 3) throw DimensionError("expected a (K, H, W) uint8 array");
  LabelStack s;
  s.k_count = int(a.shape(0));
  s.height = int(a.shape(1));
  s.width = int(a.shape(2));
  s.values.assign(a.data(), a.data() + a.size());
  return s;
}

py::array_t<std::uint8_t> labelstack_to_array(const LabelStack &s) {
  py::array_t<std::uint8_t> a({s.k_count, s.height, s.width});
  std::memcpy(a.mutable_data(), s.values.data(), s.values.size());
  return a;
}

// Events travel as (N, 4) int64 rows [t_us, x, y, p] with p in {-1, +1}.
EventStream stream_from_array(const arr<std::int64_t> &events, int width,
                              int height, std::int64_t duration_us) {
  if (events.ndim() != 2 || events.shape(1) != 4)
    throw DimensionError("expected an (N, 4) event array");
  EventStream s;
  s.width = width;
  s.height = height;
  s.duration_us = duration_us;
  const auto e = events.unchecked<2>();
  s.events.reserve(std::size_t(e.shape(0)));
  for (py::ssize_t i = 0; i < e.shape(0); ++i)
    s.events.push_back({e(i, 0), int(e(i, 1)), int(e(i, 2)), int(e(i, 3))});
  return s;
}

py::array_t<std::int64_t> stream_to_array(const EventStream &s) {
  py::array_t<std::int64_t> a({py::ssize_t(s.events.size()), py::ssize_t(4)});
  auto m = a.mutable_unchecked<2>();
  for (std::size_t i = 0; i < s.events.size(); ++i) {
    const Event &e = s.events[i];
    m(i, 0) = e.t_us;
    m(i, 1) = e.x;
    m(i, 2) = e.y;
    m(i, 3) = e.p;
  }
  return a;
}

std::vector<eval::ClipEval> evals_from_arrays(const arr<double> &est_ms,
                                              const arr<double> &gt_ms) {
  if (est_ms.ndim() != 1 || gt_ms.ndim() != 1 || est_ms.size() != gt_ms.size())
    throw DimensionError("est_ms and gt_ms must be 1-D arrays of equal length");
  std::vector<eval::ClipEval> evals(std::size_t(est_ms.size()));
  for (py::ssize_t i = 0; i < est_ms.size(); ++i) {
    evals[std::size_t(i)].clip_id = std::to_string(i);
    evals[std::size_t(i)].scenario_id = "py";
    evals[std::size_t(i)].t_est_ms = est_ms.data()[i];
    evals[std::size_t(i)].t_gt_ms = gt_ms.data()[i];
  }
  return evals;
}

}  // namespace

PYBIND11_MODULE(_evimpact, m) {
  m.doc() = "Event-camera bat-ball impact timing: core operations";

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);

  m.attr("CLASS_BACKGROUND") = kClassBackground;
  m.attr("CLASS_BAT") = kClassBat;
  m.attr("CLASS_BALL") = kClassBall;
  m.attr("COARSE_BALL") = kCoarseBall;
  m.attr("COARSE_BAT") = kCoarseBat;

  // ---- configuration structs -------------------------------------------
  py::class_<AccumConfig>(m, "AccumConfig")
      .def(py::init<>())
      .def_readwrite("dt_us", &AccumConfig::dt_us)
      .def_readwrite("window_frames", &AccumConfig::window_frames)
      .def_readwrite("saturation", &AccumConfig::saturation);

  py::class_<loss::LossWeights>(m, "LossWeights")
      .def(py::init<>())
      .def_readwrite("lambda_ce", &loss::LossWeights::lambda_ce)
      .def_readwrite("lambda_dice", &loss::LossWeights::lambda_dice)
      .def_readwrite("lambda_smooth", &loss::LossWeights::lambda_smooth)
      .def_readwrite("lambda_circ", &loss::LossWeights::lambda_circ)
      .def_readwrite("w_background", &loss::LossWeights::w_background)
      .def_readwrite("w_bat", &loss::LossWeights::w_bat)
      .def_readwrite("w_ball", &loss::LossWeights::w_ball)
      .def_readwrite("eps_circ", &loss::LossWeights::eps_circ)
      .def_readwrite("eps_log", &loss::LossWeights::eps_log)
      .def_readwrite("dice_smooth", &loss::LossWeights::dice_smooth)
      .def_readwrite("eps_grad", &loss::LossWeights::eps_grad);

  py::class_<refine::RefinerConfig>(m, "RefinerConfig")
      .def(py::init<>())
      .def_readwrite("lambda_fid", &refine::RefinerConfig::lambda_fid)
      .def_readwrite("step", &refine::RefinerConfig::step)
      .def_readwrite("max_iters", &refine::RefinerConfig::max_iters)
      .def_readwrite("rel_tol", &refine::RefinerConfig::rel_tol)
      .def_readwrite("mass_tau", &refine::RefinerConfig::mass_tau);

  py::class_<sim::SceneConfig>(m, "SceneConfig")
      .def(py::init<>())
      .def_readwrite("width", &sim::SceneConfig::width)
      .def_readwrite("height", &sim::SceneConfig::height)
      .def_readwrite("ball_radius", &sim::SceneConfig::ball_radius)
      .def_readwrite("ball_speed", &sim::SceneConfig::ball_speed)
      .def_property(
          "ball_start",
          [](const sim::SceneConfig &c) {
            return py::make_tuple(c.ball_start.x, c.ball_start.y);
          },
          [](sim::SceneConfig &c, std::pair<double, double> v) {
            c.ball_start = {v.first, v.second};
          })
      .def_property(
          "ball_dir",
          [](const sim::SceneConfig &c) {
            return py::make_tuple(c.ball_dir.x, c.ball_dir.y);
          },
          [](sim::SceneConfig &c, std::pair<double, double> v) {
            c.ball_dir = {v.first, v.second};
          })
      .def_property(
          "bat_pivot",
          [](const sim::SceneConfig &c) {
            return py::make_tuple(c.bat_pivot.x, c.bat_pivot.y);
          },
          [](sim::SceneConfig &c, std::pair<double, double> v) {
            c.bat_pivot = {v.first, v.second};
          })
      .def_readwrite("bat_length", &sim::SceneConfig::bat_length)
      .def_readwrite("bat_half_width", &sim::SceneConfig::bat_half_width)
      .def_readwrite("bat_angle0", &sim::SceneConfig::bat_angle0)
      .def_readwrite("bat_omega", &sim::SceneConfig::bat_omega)
      .def_readwrite("bat_alpha", &sim::SceneConfig::bat_alpha)
      .def_readwrite("restitution", &sim::SceneConfig::restitution)
      .def_readwrite("noise_rate", &sim::SceneConfig::noise_rate)
      .def_readwrite("micro_step_us", &sim::SceneConfig::micro_step_us)
      .def_readwrite("seed", &sim::SceneConfig::seed)
      .def_readwrite("clip_duration_us", &sim::SceneConfig::clip_duration_us);

  py::class_<sim::DegradeConfig>(m, "DegradeConfig")
      .def(py::init<>())
      .def_readwrite("jitter_sigma", &sim::DegradeConfig::jitter_sigma)
      .def_readwrite("dropout_prob", &sim::DegradeConfig::dropout_prob)
      .def_readwrite("morph_range", &sim::DegradeConfig::morph_range)
      .def_readwrite("blur_radius", &sim::DegradeConfig::blur_radius)
      .def_readwrite("merge_window", &sim::DegradeConfig::merge_window)
      .def_readwrite("merge_dilate", &sim::DegradeConfig::merge_dilate)
      .def_readwrite("seed", &sim::DegradeConfig::seed);

  // ---- accumulation -----------------------------------------------------
  m.def(
      "accumulate",
      [](const arr<std::int64_t> &events, int width, int height,
         std::int64_t duration_us, const AccumConfig &cfg) {
        const EventStream s = stream_from_array(events, width, height, duration_us);
        return framestack_to_array(accumulate(s, cfg));
      },
      py::arg("events"), py::arg("width"), py::arg("height"),
      py::arg("duration_us"), py::arg("config") = AccumConfig{},
      "Sliding-window event accumulation; events is an (N, 4) int64 array of "
      "[t_us, x, y, p] rows with p in {-1, +1}. Returns a (K, H, W) float32 "
      "frame stack.");

  // ---- loss kernels ------------------------------------------------------
  m.def(
      "ce_weighted",
      [](const arr<double> &prob, const arr<std::uint8_t> &labels,
         const loss::LossWeights &w) {
        if (prob.ndim() != 3 || prob.shape(0) != 3 || labels.ndim() != 2)
          throw DimensionError("expected (3, H, W) prob and (H, W) labels");
        const int h = int(prob.shape(1)), wd = int(prob.shape(2));
        return loss::ce_weighted({prob.data(), std::size_t(prob.size())},
                                 {labels.data(), std::size_t(labels.size())},
                                 h, wd, w);
      },
      py::arg("prob"), py::arg("labels"),
      py::arg("weights") = loss::LossWeights{});

  m.def(
      "dice",
      [](const arr<double> &prob, const arr<std::uint8_t> &labels, double smooth) {
        if (prob.ndim() != 3 || prob.shape(0) != 3 || labels.ndim() != 2)
          throw DimensionError("expected (3, H, W) prob and (H, W) labels");
        return loss::dice({prob.data(), std::size_t(prob.size())},
                          {labels.data(), std::size_t(labels.size())},
                          int(prob.shape(1)), int(prob.shape(2)), smooth);
      },
      py::arg("prob"), py::arg("labels"), py::arg("smooth") = 1.0);

  m.def(
      "smooth_tv",
      [](const arr<double> &prob) {
        if (prob.ndim() != 3 || prob.shape(0) != 3)
          throw DimensionError("expected a (3, H, W) prob array");
        return loss::smooth_tv({prob.data(), std::size_t(prob.size())},
                               int(prob.shape(1)), int(prob.shape(2)));
      },
      py::arg("prob"));

  m.def(
      "circ",
      [](const arr<double> &ball, double eps_circ, double eps_grad) {
        if (ball.ndim() != 2) throw DimensionError("expected an (H, W) channel");
        return loss::circ({ball.data(), std::size_t(ball.size())},
                          int(ball.shape(0)), int(ball.shape(1)), eps_circ,
                          eps_grad);
      },
      py::arg("ball"), py::arg("eps_circ") = 1e-6, py::arg("eps_grad") = 1e-8);

  m.def(
      "composite",
      [](const arr<double> &prob, const arr<std::uint8_t> &labels,
         const loss::LossWeights &w) {
        if (prob.ndim() != 3 || prob.shape(0) != 3 || labels.ndim() != 2)
          throw DimensionError("expected (3, H, W) prob and (H, W) labels");
        return loss::composite({prob.data(), std::size_t(prob.size())},
                               {labels.data(), std::size_t(labels.size())},
                               int(prob.shape(1)), int(prob.shape(2)), w);
      },
      py::arg("prob"), py::arg("labels"),
      py::arg("weights") = loss::LossWeights{});

  // ---- fusion and refinement --------------------------------------------
  m.def(
      "fuse_bidirectional",
      [](const arr<float> &fwd, const arr<float> &bwd, double mass_tau) {
        const refine::FusedClip fused = refine::fuse_bidirectional(
            planestack_from_array(fwd), planestack_from_array(bwd), mass_tau);
        return py::make_tuple(planestack_to_array(fused.q), fused.flagged_frames);
      },
      py::arg("coarse_fwd"), py::arg("coarse_bwd"), py::arg("mass_tau") = 0.2,
      "Fuses (K, 2, H, W) forward/backward coarse stacks into a (K, 3, H, W) "
      "simplex stack; returns (fused, flagged_frames).");

  m.def(
      "refine",
      [](const arr<float> &fwd, const arr<float> &bwd,
         const refine::RefinerConfig &cfg, const loss::LossWeights &w) {
        const refine::FusedClip fused = refine::fuse_bidirectional(
            planestack_from_array(fwd), planestack_from_array(bwd), cfg.mass_tau);
        const refine::RefineOutput out = refine::refine_fused(fused, cfg, w);
        py::dict d;
        d["probs"] = planestack_to_array(out.probs);
        d["invalid_frames"] = out.invalid_frames;
        d["final_energy"] = out.final_energy;
        d["iterations"] = out.iterations;
        return d;
      },
      py::arg("coarse_fwd"), py::arg("coarse_bwd"),
      py::arg("config") = refine::RefinerConfig{},
      py::arg("weights") = loss::LossWeights{},
      "Fusion followed by variational refinement; returns a dict with the "
      "refined (K, 3, H, W) stack and per-frame diagnostics.");

  // ---- impact estimation -------------------------------------------------
  m.def(
      "weighted_centroid",
      [](const arr<double> &channel, double mass_min)
          -> std::optional<std::pair<double, double>> {
        if (channel.ndim() != 2) throw DimensionError("expected an (H, W) channel");
        const auto c = impact::weighted_centroid(
            std::span<const double>{channel.data(), std::size_t(channel.size())},
            int(channel.shape(0)), int(channel.shape(1)), mass_min);
        if (!c) return std::nullopt;
        return std::make_pair(c->x, c->y);
      },
      py::arg("channel"), py::arg("mass_min") = 1.0,
      "Mass-weighted mean pixel position (x, y), or None below mass_min.");

  m.def(
      "estimate_impact",
      [](const arr<float> &probs, std::int64_t dt_us,
         const std::vector<int> &invalid_frames) {
        impact::ImpactResult r =
            impact::distance_series(planestack_from_array(probs), dt_us);
        impact::invalidate_frames(r, invalid_frames);
        impact::estimate_impact(r);
        py::list d_px;
        for (const auto &f : r.frames)
          d_px.append(f.valid ? py::cast(*f.d_px) : py::none());
        py::dict out;
        out["frame_index"] = r.frame_index;
        out["t_impact_us"] = r.t_impact_us;
        out["d_px"] = d_px;
        return out;
      },
      py::arg("probs"), py::arg("dt_us") = 100,
      py::arg("invalid_frames") = std::vector<int>{},
      "Ball-bat centroid distance argmin over a (K, 3, H, W) simplex stack.");

  m.def(
      "imu_detect",
      [](const arr<double> &samples, double rate_hz) {
        if (samples.ndim() != 2 || samples.shape(1) != 3)
          throw DimensionError("expected an (N, 3) acceleration array");
        impact::ImuTrace trace;
        trace.rate_hz = rate_hz;
        const auto s = samples.unchecked<2>();
        for (py::ssize_t i = 0; i < s.shape(0); ++i)
          trace.samples.push_back({s(i, 0), s(i, 1), s(i, 2)});
        return impact::imu_detect(trace);
      },
      py::arg("samples"), py::arg("rate_hz") = 1000.0);

  // ---- simulator ---------------------------------------------------------
  m.def(
      "simulate_clip",
      [](const sim::SceneConfig &cfg, std::int64_t frame_dt_us) {
        const sim::ClipBundle clip = sim::simulate_clip(cfg, frame_dt_us);
        py::dict d;
        d["events"] = stream_to_array(clip.stream);
        d["duration_us"] = clip.stream.duration_us;
        d["gt_masks"] = labelstack_to_array(clip.gt_masks);
        d["gt_impact_us"] = clip.gt_impact_us
                                ? py::cast(*clip.gt_impact_us)
                                : py::none();
        d["frame_dt_us"] = clip.frame_dt_us;
        return d;
      },
      py::arg("scene"), py::arg("frame_dt_us") = 100,
      "Synthesizes one clip: event array, (K, H, W) ground-truth label masks "
      "and the analytic impact time (None when the ball misses).");

  m.def(
      "degrade_coarse",
      [](const arr<std::uint8_t> &gt_masks, py::object gt_impact_us,
         std::int64_t frame_dt_us, const sim::DegradeConfig &cfg, bool forward) {
        std::optional<std::int64_t> impact_us;
        if (!gt_impact_us.is_none()) impact_us = gt_impact_us.cast<std::int64_t>();
        return planestack_to_array(sim::degrade_coarse(
            labelstack_from_array(gt_masks), impact_us, frame_dt_us, cfg,
            forward ? sim::Direction::Forward : sim::Direction::Backward));
      },
      py::arg("gt_masks"), py::arg("gt_impact_us") = py::none(),
      py::arg("frame_dt_us") = 100,
      py::arg("config") = sim::DegradeConfig{}, py::arg("forward") = true,
      "Degrades (K, H, W) label masks into a coarse (K, 2, H, W) stack "
      "(channel 0 = ball, 1 = bat).");

  // ---- evaluation --------------------------------------------------------
  m.def(
      "mae",
      [](const arr<double> &est_ms, const arr<double> &gt_ms) {
        return eval::mae(evals_from_arrays(est_ms, gt_ms));
      },
      py::arg("est_ms"), py::arg("gt_ms"));

  m.def(
      "success_rate",
      [](const arr<double> &est_ms, const arr<double> &gt_ms, double threshold_ms) {
        return eval::success_rate(evals_from_arrays(est_ms, gt_ms), threshold_ms);
      },
      py::arg("est_ms"), py::arg("gt_ms"), py::arg("threshold_ms") = 0.513);
}
