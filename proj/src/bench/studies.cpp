#include "sprkit/bench/studies.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <memory>
#include <mutex>
#include <thread>

#include "sprkit/core/error.hpp"
#include "sprkit/core/io.hpp"
#include "sprkit/core/seed.hpp"

namespace sprkit::bench {

using model::FeatureTrajectory;

std::string study_csv(const std::vector<StudyRow>& rows) {
  std::string out = std::string(kStudyHeader) + "\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{:.6f},{:.6f},{},{},{:016x}\n", r.study, r.paradigm, r.variant, r.train_setting,
                       r.eval_setting, r.te_m, r.re_deg, r.flag, r.seed, r.config_hash);
  }
  return out;
}

void write_study(const std::filesystem::path& file, const std::vector<StudyRow>& rows) {
  write_text(file, study_csv(rows));
}

namespace {

const char* variant_column(const TrainedModel& m) {
  return m.paradigm() == Paradigm::SPR ? model::variant_name(m.spec().spr.variant) : "-";
}

StudyRow make_row(const std::string& study, const TrainedModel& m, std::string train, std::string eval,
                  const std::vector<Query>& queries) {
  StudyRow row{study, paradigm_label(m.paradigm()), variant_column(m), std::move(train), std::move(eval), 0.0, 0.0, "-"};
  const auto summary = summarize(queries, {row.paradigm, row.variant, sim::kSplitUnseen, 0, 0});
  const auto& agg = aggregate_row(summary, "median");
  row.te_m = agg.te_m;
  row.re_deg = agg.re_deg;
  row.seed = m.spec().master_seed;
  row.config_hash = m.spec().hash();
  return row;
}

std::string height_label(double h) { return fmt::format("{:.1f}", h); }

}  // namespace

std::vector<FeatureTrajectory> drift_trajectories(const BenchData& data, int per_scene, int points) {
  if (per_scene < 1) throw ContractError("drift study needs at least one trajectory per scene");
  const sim::DatasetConfig& config = data.manifest.config;
  if (points < config.min_points || points > 20) throw ContractError("drift trajectories need 5..20 points");
  ad::NoGradGuard guard;
  std::vector<FeatureTrajectory> out;
  for (const auto& se : data.manifest.scenes) {
    if (se.split != sim::kSplitUnseen) continue;
    const sim::Scene scene = sim::generate_scene(se.seed, config.scene);
    for (int t = 0; t < per_scene; ++t) {
      const std::uint64_t seed = derive_seed(se.seed, 0xD41F7000ull + static_cast<std::uint64_t>(t));
      sim::Trajectory traj;
      bool ok = false;
      for (int attempt = 0; attempt < 20 && !ok; ++attempt) {
        sim::TrajectorySpec spec = sim::draw_spec(config, seed, attempt);
        spec.num_points = points;
        try {
          traj = sim::sample_trajectory(scene, spec);
          ok = true;
        } catch (const GenerationError&) {
        }
      }
      if (!ok) throw GenerationError(fmt::format("could not place drift trajectory {} in {}", t, se.id));
      std::vector<sim::Image> frames;
      for (const auto& pose : traj.poses) {
        frames.push_back(sim::render_observation(scene, pose, data.manifest.pano_height, data.manifest.channels).pano);
        sim::quantize(frames.back());
      }
      out.push_back({se.id, fmt::format("drift_{:03d}", t), sim::kSplitUnseen, traj.spec.height_m, traj.poses,
                     data.extractor.extract_sequence(frames)});
    }
  }
  if (out.empty()) throw ContractError("dataset has no unseen scenes for the drift study");
  return out;
}

std::vector<Query> prefix_queries(const TrainedModel& m, const std::vector<FeatureTrajectory>& trajs, std::size_t len) {
  if (m.paradigm() != Paradigm::VO && m.paradigm() != Paradigm::SPR)
    throw ContractError("prefix queries need a sequence paradigm");
  if (len < 2) throw ContractError("prefix queries need at least two frames");
  std::vector<Query> out;
  for (const auto& t : trajs) {
    if (t.size() < len) continue;
    out.push_back({t.scene_id, t.id, m.sequence_model().predict(t.window(0, len)), geo::relative(t.poses[0], t.poses[len - 1])});
  }
  return out;
}

std::vector<StudyRow> drift_study(const TrainedModel& vo, const TrainedModel& spr, const std::vector<FeatureTrajectory>& trajs,
                                  const std::vector<int>& lengths) {
  std::vector<StudyRow> rows;
  double last_vo = -std::numeric_limits<double>::infinity();
  for (int len : lengths) {
    if (len < 2) throw ContractError("drift lengths must be at least 2");
    const auto n = static_cast<std::size_t>(len);
    const std::string setting = fmt::format("len{}", len);
    StudyRow v = make_row("drift", vo, "len5", setting, prefix_queries(vo, trajs, n));
    v.flag = v.te_m + 1e-12 < last_vo ? "trend-violation" : "ok";
    last_vo = v.te_m;
    rows.push_back(std::move(v));
    rows.push_back(make_row("drift", spr, "len5", setting, prefix_queries(spr, trajs, n)));
  }
  return rows;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ContractError("log-log fit needs two or more matching points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0 && y[i] > 0)) throw NumericDomainError("log-log fit needs positive values");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0) throw ContractError("log-log fit needs distinct x values");
  return sxy / sxx;
}

DriftLaw drift_law(const std::vector<int>& lengths, double sigma, int rollouts, std::uint64_t seed) {
  if (lengths.empty() || rollouts < 1 || !(sigma > 0)) throw ContractError("drift law needs lengths, rollouts and sigma > 0");
  const int max_len = *std::max_element(lengths.begin(), lengths.end());
  if (*std::min_element(lengths.begin(), lengths.end()) < 2) throw ContractError("drift lengths must be at least 2");

  DriftLaw out;
  out.lengths = lengths;
  out.mean_te.assign(lengths.size(), 0.0);
  out.spr_oracle_te.assign(lengths.size(), 0.0);
  for (int r = 0; r < rollouts; ++r) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    // gt walk in world coordinates from a random start
    std::vector<geo::Pose> gt(static_cast<std::size_t>(max_len));
    const geo::Vec3 axis(gaussian(rng), gaussian(rng), gaussian(rng));
    gt[0].q = geo::UnitQuaternion::from_axis_angle(axis, uniform(rng, -M_PI, M_PI));
    gt[0].t = geo::Vec3(uniform(rng, 0, 16), uniform(rng, 0, 16), uniform(rng, 0, 2));
    for (std::size_t i = 1; i < gt.size(); ++i) {
      gt[i].t = gt[i - 1].t + gt[i - 1].q.rotate(geo::Vec3(uniform(rng, 0.5, 1.0), 0, 0));
      gt[i].q = gt[i - 1].q * geo::UnitQuaternion::from_yaw(uniform(rng, -0.5, 0.5));
    }
    geo::Pose exact, noisy;
    for (int q = 2; q <= max_len; ++q) {
      const auto i = static_cast<std::size_t>(q - 1);
      const geo::Pose step = geo::relative(gt[i - 1], gt[i]);
      geo::Pose perturbed = step;
      perturbed.t += geo::Vec3(gaussian(rng, 0, sigma), gaussian(rng, 0, sigma), gaussian(rng, 0, sigma));
      exact = geo::compose(exact, step);
      noisy = geo::compose(noisy, perturbed);
      for (std::size_t k = 0; k < lengths.size(); ++k) {
        if (lengths[k] != q) continue;
        const geo::Pose target = geo::relative(gt[0], gt[i]);
        out.mean_te[k] += geo::pose_error(noisy, target).te;
        out.spr_oracle_te[k] = std::max(out.spr_oracle_te[k], geo::pose_error(target, exact).te);
      }
    }
  }
  std::vector<double> xs;
  for (std::size_t k = 0; k < lengths.size(); ++k) {
    out.mean_te[k] /= rollouts;
    xs.push_back(lengths[k]);
    out.composition_residual = std::max(out.composition_residual, out.spr_oracle_te[k]);
  }
  out.exponent = lengths.size() >= 2 ? loglog_slope(xs, out.mean_te) : 0.0;
  out.monotone = true;
  for (std::size_t k = 1; k < lengths.size(); ++k)
    if (lengths[k] > lengths[k - 1] && out.mean_te[k] < out.mean_te[k - 1]) out.monotone = false;
  return out;
}

std::vector<StudyRow> fov_study(const TrainedModel& m, const BenchData& data, const std::vector<double>& fovs) {
  std::vector<StudyRow> rows;
  double last = std::numeric_limits<double>::infinity();
  for (double fov : fovs) {
    if (!(fov > 0 && fov <= 360)) throw ContractError(fmt::format("FoV {} outside (0, 360]", fov));
    std::vector<FeatureTrajectory> cropped;
    if (fov < 360) {
      model::FeatureOptions options;
      options.fov_deg = fov;
      cropped = model::load_features(data.root, data.manifest, sim::kSplitUnseen, data.extractor, options);
    }
    const auto& eval = fov < 360 ? cropped : data.unseen;
    const RetrievalDatabase db = data.database_for(eval);
    StudyRow row = make_row("fov", m, "360", fmt::format("{:g}", fov),
                            run_queries(m, eval, m.paradigm() == Paradigm::RPR ? &db : nullptr, {}));
    row.flag = row.te_m > last + 1e-12 ? "trend-violation" : "ok";
    last = row.te_m;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<FeatureTrajectory> filter_height(const std::vector<FeatureTrajectory>& trajs, const std::string& mix) {
  if (mix == kMixedHeights) return trajs;
  double h = 0;
  try {
    h = std::stod(mix);
  } catch (const std::exception&) {
    throw ContractError("unknown height mix '" + mix + "'");
  }
  if (std::none_of(sim::kSensorHeights.begin(), sim::kSensorHeights.end(), [&](double s) { return std::abs(s - h) < 1e-9; }))
    throw ContractError("unknown height mix '" + mix + "'");
  std::vector<FeatureTrajectory> out;
  for (const auto& t : trajs)
    if (std::abs(t.height_m - h) < 1e-9) out.push_back(t);
  return out;
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

namespace {

StudyLog serialized(const StudyLog& log) {
  if (!log) return {};
  auto mutex = std::make_shared<std::mutex>();
  return [log, mutex](const std::string& line) {
    std::lock_guard lock(*mutex);
    log(line);
  };
}

}  // namespace

std::vector<StudyRow> height_study(const BenchData& data, const ModelSpec& base, const model::TrainConfig& train,
                                   const StudyLog& log, int jobs) {
  std::vector<std::string> mixes;
  for (double h : sim::kSensorHeights) mixes.push_back(height_label(h));
  mixes.push_back(kMixedHeights);
  for (const auto& mix : mixes)
    if (filter_height(data.train, mix).empty()) throw ContractError("no training trajectories at height " + mix);

  const std::size_t cols = sim::kSensorHeights.size();
  std::vector<StudyRow> rows(mixes.size() * cols);
  const StudyLog say = serialized(log);
  parallel_for(mixes.size(), jobs, [&](std::size_t r) {
    const std::string& mix = mixes[r];
    ModelSpec spec = base;
    spec.paradigm = Paradigm::SPR;
    TrainedModel m(spec);
    const auto train_set = filter_height(data.train, mix);
    if (say) say(fmt::format("height: training on {} ({} trajectories)", mix, train_set.size()));
    train_model(m, train_set, filter_height(data.seen, mix), train);
    const std::uint64_t hash = fnv1a(m.spec().canonical() + ";train_height=" + mix);
    for (std::size_t c = 0; c < cols; ++c) {
      const std::string h = height_label(sim::kSensorHeights[c]);
      const auto eval = filter_height(data.unseen, h);
      StudyRow row;
      if (eval.empty()) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        row = {"height", "SPR", variant_column(m), mix, h, nan, nan, "empty", spec.master_seed, 0};
      } else {
        row = make_row("height", m, mix, h, run_queries(m, eval, nullptr, {}));
      }
      row.config_hash = hash;
      rows[r * cols + c] = std::move(row);
    }
  });
  // mixed row against the worst single-height row of each column
  for (std::size_t c = 0; c < cols; ++c) {
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r + 1 < mixes.size(); ++r) worst = std::max(worst, rows[r * cols + c].te_m);
    StudyRow& mixed = rows[(mixes.size() - 1) * cols + c];
    if (mixed.flag != "empty") mixed.flag = mixed.te_m <= worst ? "ok" : "trend-violation";
  }
  return rows;
}

std::vector<StudyRow> ablation_study(const BenchData& data, const ModelSpec& base, const model::TrainConfig& train,
                                     const StudyLog& log, int jobs) {
  const std::vector<model::Variant> variants = {model::Variant::NoGlobal, model::Variant::GlobalOnly,
                                                model::Variant::NoAux, model::Variant::Full};
  std::vector<StudyRow> rows(variants.size());
  const StudyLog say = serialized(log);
  parallel_for(variants.size(), jobs, [&](std::size_t i) {
    ModelSpec spec = base;
    spec.paradigm = Paradigm::SPR;
    spec.spr.variant = variants[i];
    TrainedModel m(spec);
    if (say) say(fmt::format("ablation: training {}", model::variant_name(variants[i])));
    train_model(m, data.train, data.seen, train);
    rows[i] = make_row("ablation", m, "-", sim::kSplitUnseen, run_queries(m, data.unseen, nullptr, {}));
  });
  const double best_other = std::min({rows[0].te_m, rows[1].te_m, rows[2].te_m});
  rows[3].flag = rows[3].te_m <= best_other ? "ok" : "trend-violation";
  return rows;
}

namespace {

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Round step of roughly range/5 from {1, 2, 5} x 10^k.
double tick_step(double range) {
  if (!(range > 0)) return 1.0;
  const double raw = range / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0})
    if (raw <= m * mag) return m * mag;
  return 10.0 * mag;
}

}  // namespace

std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series, const std::string& note) {
  constexpr double W = 640, H = 400, L = 70, R = 150, T = 40, B = 60;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y1 = -x0;
  double y0 = 0.0;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw ContractError("series '" + s.name + "' has mismatched x and y");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  const double ys = tick_step(y1 - y0);
  y1 = std::ceil(y1 / ys) * ys;
  if (y1 == y0) y1 = y0 + ys;
  const double xs = tick_step(x1 - x0);
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::string out = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      W, H);
  if (!note.empty()) out += "<!-- " + escape(note) + " -->\n";
  out += fmt::format("<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n", (L + W - R) / 2,
                     escape(title));
  out += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n", L, H - B, W - R);
  out += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", L, T, H - B);
  for (double v = std::ceil(x0 / xs) * xs; v <= x1 + 1e-9 * xs; v += xs) {
    out += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1}\" x2=\"{0:.1f}\" y2=\"{2}\" stroke=\"black\"/>"
                       "<text x=\"{0:.1f}\" y=\"{3}\" text-anchor=\"middle\">{4:g}</text>\n",
                       px(v), H - B, H - B + 5, H - B + 19, v);
  }
  for (double v = y0; v <= y1 + 1e-9 * ys; v += ys) {
    out += fmt::format("<line x1=\"{0}\" y1=\"{1:.1f}\" x2=\"{2}\" y2=\"{1:.1f}\" stroke=\"#ddd\"/>"
                       "<text x=\"{3}\" y=\"{4:.1f}\" text-anchor=\"end\">{5:g}</text>\n",
                       L, py(v), W - R, L - 6, py(v) + 4, v);
  }
  out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", (L + W - R) / 2, H - 18,
                     escape(x_label));
  out += fmt::format("<text x=\"18\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {0})\">{1}</text>\n",
                     (T + H - B) / 2, escape(y_label));
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = colors[k % std::size(colors)];
    std::string points;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      points += fmt::format("{}{:.1f},{:.1f}", points.empty() ? "" : " ", px(s.x[i]), py(s.y[i]));
      out += fmt::format("<circle cx=\"{:.1f}\" cy=\"{:.1f}\" r=\"3\" fill=\"{}\"/>\n", px(s.x[i]), py(s.y[i]), color);
    }
    out += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>\n", points, color);
    const double ly = T + 10 + 20 * static_cast<double>(k);
    out += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"{3}\" stroke-width=\"2\"/>"
                       "<text x=\"{4}\" y=\"{5}\">{6}</text>\n",
                       W - R + 15, ly, W - R + 40, color, W - R + 46, ly + 4, escape(s.name));
  }
  return out + "</svg>\n";
}

}  // namespace sprkit::bench
