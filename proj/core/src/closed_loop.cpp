#include "zoomctl/closed_loop.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace zoomctl {

namespace {

constexpr double kAbortMagnitude = 1e150;

// Plant-noise map into one sensor stack's observation window: stage t sees
// C * sum_{i < t} A^{t-1-i} w_i.
Matrix window_plant_noise_map(const Matrix& C, const Matrix& A) {
  const int n = static_cast<int>(A.rows());
  const int p = static_cast<int>(C.rows());
  Matrix out = Matrix::Zero(n * p, std::max(0, n - 1) * n);
  std::vector<Matrix> pows(n);
  pows[0] = Matrix::Identity(n, n);
  for (int k = 1; k < n; ++k) pows[k] = A * pows[k - 1];
  for (int t = 1; t < n; ++t) {
    for (int i = 0; i < t; ++i) {
      out.block(t * p, i * n, p, n) = C * pows[t - 1 - i];
    }
  }
  return out;
}

// Coefficient rows reproducing the requested targets from a sensor stack's
// observability rows: row r of the result satisfies row * O = targets.row(r).
// kSubset restricts support to a greedy independent row set; kLeastSquares
// takes the min-norm solution over every row.
Matrix coefficient_rows(const Matrix& O, const Matrix& targets,
                        EstimatorKind kind) {
  const int n = static_cast<int>(O.cols());
  Matrix out = Matrix::Zero(targets.rows(), O.rows());
  if (kind == EstimatorKind::kSubset) {
    std::vector<int> selected;
    Matrix sel_rows(0, n);
    int rank = 0;
    for (int r = 0; r < O.rows(); ++r) {
      Matrix candidate(sel_rows.rows() + 1, n);
      candidate.topRows(sel_rows.rows()) = sel_rows;
      candidate.bottomRows(1) = O.row(r);
      if (numeric_rank(candidate) > rank) {
        sel_rows = std::move(candidate);
        selected.push_back(r);
        ++rank;
      }
    }
    const auto cod = sel_rows.transpose().completeOrthogonalDecomposition();
    for (int r = 0; r < targets.rows(); ++r) {
      const Vector c = cod.solve(targets.row(r).transpose());
      if ((c.transpose() * sel_rows - targets.row(r)).norm() >
          1e-8 * std::max(1.0, targets.row(r).norm())) {
        throw StructuralError(
            "coefficient_rows: target is not in the sensor's observable "
            "row space");
      }
      for (std::size_t k = 0; k < selected.size(); ++k) {
        out(r, selected[k]) = c(static_cast<int>(k));
      }
    }
    return out;
  }
  const auto cod = O.transpose().completeOrthogonalDecomposition();
  for (int r = 0; r < targets.rows(); ++r) {
    const Vector c = cod.solve(targets.row(r).transpose());
    if ((c.transpose() * O - targets.row(r)).norm() >
        1e-8 * std::max(1.0, targets.row(r).norm())) {
      throw StructuralError(
          "coefficient_rows: target is not in the sensor's observable row "
          "space");
    }
    out.row(r) = c.transpose();
  }
  return out;
}

// Covariance of a channel's estimate noise.
Matrix channel_noise_covariance(const TrialSetup::Channel& ch,
                                const LinearSystem& sys) {
  Matrix cov = Matrix::Zero(ch.dim, ch.dim);
  const int n = sys.n();
  if (ch.noise_from_w.cols() > 0) {
    for (int i = 0; i + 1 < n; ++i) {
      const Matrix blk = ch.noise_from_w.middleCols(i * n, n);
      cov += blk * sys.Sigma_w * blk.transpose();
    }
  }
  // Window is stage-major; contributors are laid out inside each stage.
  int stage_width = 0;
  for (int d : ch.v_dims) stage_width += d;
  for (int t = 0; t < n; ++t) {
    int off = 0;
    for (std::size_t k = 0; k < ch.v_streams.size(); ++k) {
      const int pj = ch.v_dims[k];
      const Matrix blk = ch.noise_from_v.middleCols(t * stage_width + off, pj);
      cov += blk * sys.Sigma_v[ch.v_streams[k]] * blk.transpose();
      off += pj;
    }
  }
  return cov;
}

Matrix sampled_plant_covariance(const TrialSetup& setup,
                                const LinearSystem& sys) {
  const int n = setup.n;
  Matrix cov = Matrix::Zero(n, n);
  for (int i = 0; i < 2 * n; ++i) {
    const Matrix blk = setup.window_noise_w.middleCols(i * n, n);
    cov += blk * sys.Sigma_w * blk.transpose();
  }
  return cov;
}

std::int64_t channel_symbol_space(const std::vector<int>& K, int offset,
                                  int dim) {
  std::int64_t space = 1;
  for (int i = 0; i < dim; ++i) {
    if (space > (std::int64_t{1} << 62) / K[offset + i]) {
      throw ConfigError("channel symbol space exceeds 2^62");
    }
    space *= K[offset + i];
  }
  return space;
}

void resolve_quantizer(TrialSetup& setup, const LinearSystem& sys,
                       const LoopConfig& cfg) {
  const int n = setup.n;
  for (int i = 0; i < n; ++i) {
    if (!(setup.lam_abs(i) > 1.0)) {
      throw StructuralError(
          "prepare_trial: sampled eigenvalue magnitude must exceed 1");
    }
  }

  ZoomParams zoom = cfg.zoom;
  zoom.validate();
  if (cfg.lattice) {
    const double lam0 = setup.lam_abs(0);
    for (int i = 1; i < n; ++i) {
      if (std::abs(setup.lam_abs(i) - lam0) > 1e-9 * lam0) {
        throw ConfigError(
            "lattice mode supports a single eigenvalue magnitude only");
      }
    }
    zoom = snap_to_lattice(zoom, lam0, cfg.ell);
  }

  setup.K = cfg.K;
  if (setup.K.empty()) {
    setup.K.resize(n);
    for (int i = 0; i < n; ++i) {
      setup.K[i] = forced_even_bin_count(setup.lam_abs(i), zoom.epsilon);
    }
  }
  if (static_cast<int>(setup.K.size()) != n) {
    throw ConfigError("prepare_trial: K must have one entry per component");
  }
  for (int k : setup.K) {
    if (k < 2 || k % 2 != 0) {
      throw ConfigError("prepare_trial: bin counts must be even, at least 2");
    }
  }

  Vector y0_var = setup.y0_sd;  // holds variances until the sqrt below
  setup.y0_sd = y0_var.cwiseMax(0.0).cwiseSqrt();

  // Sustainable overflow-rate budget per component: misses grow every bin
  // by rho |lambda| while granular steps shrink it by beta, so the log-size
  // drift cancels at p* = ln(1/beta) / ln(grow/beta). Blocks with unequal
  // magnitudes have unequal budgets, and the shared feedback branch taxes
  // everyone at the same rate: the fastest-shrinking block self-regulates
  // at its own (larger) rate and would grow the slow block's bins without
  // bound. Their bin floors must therefore sit high enough that at the
  // floor the worst-case miss rate stays below the smallest budget.
  double p_min = 1.0, p_max = 0.0;
  for (int i = 0; i < n; ++i) {
    const double beta = zoom.shrink_factor(setup.lam_abs(i));
    const double grow = zoom.grow_factor(setup.lam_abs(i));
    const double p_star = std::log(1.0 / beta) / std::log(grow / beta);
    p_min = std::min(p_min, p_star);
    p_max = std::max(p_max, p_star);
  }
  const bool heterogeneous = p_max > p_min * (1.0 + 1e-9);

  Vector y0_required = Vector::Zero(n);
  if (cfg.delta1 <= 0.0) {
    if (!(cfg.coverage > 0.0 && cfg.coverage < 1.0)) {
      throw ConfigError("prepare_trial: coverage must lie in (0, 1)");
    }
    const double z = normal_upper_quantile((1.0 - cfg.coverage) / (2.0 * n));
    for (int i = 0; i < n; ++i) {
      y0_required(i) = 2.0 / setup.K[i] *
                       (std::abs(setup.y0_mean(i)) + z * setup.y0_sd(i));
    }
  }

  Vector sd_loop = Vector::Zero(n);
  double z_floor = 0.0;
  if (cfg.delta1 <= 0.0 && heterogeneous) {
    const Matrix fed_back =
        setup.A_bar * setup.est_noise_cov * setup.A_bar.transpose();
    for (int i = 0; i < n; ++i) {
      sd_loop(i) =
          std::sqrt(std::max(0.0, fed_back(i, i))) +
          std::sqrt(std::max(0.0, setup.sampled_plant_cov(i, i))) +
          std::sqrt(std::max(0.0, setup.est_noise_cov(i, i)));
    }
    // Per-component worst-case miss rate at the floor: p_min / (4n) split
    // two-sided. The extra factor 4 keeps the summed rate clear of the
    // budget.
    z_floor = normal_upper_quantile(
        std::min(0.2499, p_min / (8.0 * n)));
  }

  setup.bins0.delta.resize(n);
  for (const auto& blk : setup.blocks) {
    double leading = cfg.delta1;
    if (cfg.delta1 <= 0.0) {
      for (int r = 0; r < blk.size; ++r) {
        const int level = blk.complex_pair ? r / 2 : r;
        const double ladder = std::pow(zoom.delta_ratio, level);
        leading = std::max(leading, y0_required(blk.offset + r) / ladder);
      }
      if (heterogeneous) {
        for (int r = 0; r < blk.size; ++r) {
          const int gi = blk.offset + r;
          const int level = blk.complex_pair ? r / 2 : r;
          const double ladder_i = std::pow(zoom.delta_ratio, level);
          // Granular slack per unit of leading bin size after the
          // worst-case in-cell estimation error is fed through the block
          // row.
          double slack = setup.K[gi] * ladder_i;
          for (int c = 0; c < blk.size; ++c) {
            const int lc = blk.complex_pair ? c / 2 : c;
            slack -= std::abs(setup.A_bar(gi, blk.offset + c)) *
                     std::pow(zoom.delta_ratio, lc);
          }
          if (!(slack > 0.0)) {
            throw ConfigError(
                "prepare_trial: bin counts leave no granular slack for the "
                "worst-case estimation error; increase epsilon or K");
          }
          leading = std::max(leading, 2.0 * z_floor * sd_loop(gi) / slack);
        }
      }
      if (!(leading > 0.0) || !std::isfinite(leading)) {
        throw ConfigError(
            "prepare_trial: degenerate initial spread; set delta1 "
            "explicitly");
      }
    }
    for (int r = 0; r < blk.size; ++r) {
      const int level = blk.complex_pair ? r / 2 : r;
      setup.bins0.delta(blk.offset + r) =
          leading * std::pow(zoom.delta_ratio, level);
    }
  }
  if (cfg.lattice) {
    setup.bins0 = snap_bins_to_lattice(setup.bins0, cfg.ell);
  }
  zoom.L = zoom.floor_scale * setup.bins0.delta;
  setup.zoom = zoom;

  setup.F = cfg.small_set_radius > 0.0 ? cfg.small_set_radius
                                       : 2.0 * zoom.L(0);
  if (!(setup.F > zoom.L(0))) {
    throw ConfigError("prepare_trial: F must exceed the leading bin floor");
  }

  double bits = setup.multi_sensor ? static_cast<double>(sys.sensor_count())
                                   : 0.0;
  for (auto& ch : setup.channels) {
    ch.symbol_space = channel_symbol_space(setup.K, ch.offset, ch.dim);
    bits += std::log2(static_cast<double>(ch.symbol_space) + 1.0);
  }
  setup.bits_per_period = bits;
}

TrialSetup prepare_single(const LinearSystem& sys, const LoopConfig& cfg) {
  TrialSetup setup;
  const SampledSystem samp = build_sampled_system(sys, {}, cfg.estimator);
  const int n = samp.n;
  setup.n = n;
  setup.raw_state_dim = n;
  setup.multi_sensor = false;
  setup.A_bar = samp.A_bar();
  setup.state_transform = samp.P();
  setup.lam_abs = samp.lam_abs();
  setup.blocks = samp.jordan.blocks;
  setup.window_noise_w = samp.window_noise_w;
  setup.x0_mean = samp.x0_mean_bar;
  setup.x0_chol = psd_sqrt(samp.x0_cov_bar);
  setup.plant_chol = psd_sqrt(sys.Sigma_w);

  TrialSetup::Channel ch;
  ch.offset = 0;
  ch.dim = n;
  ch.window_rows = samp.window_rows;
  const Matrix O = observability_matrix(sys.stacked_C(), sys.A);
  const Matrix coeff =
      coefficient_rows(O, samp.jordan_base.P, cfg.estimator);
  ch.noise_from_v = samp.local_transform * coeff;
  ch.noise_from_w =
      n > 1 ? Matrix(ch.noise_from_v *
                     window_plant_noise_map(sys.stacked_C(), sys.A))
            : Matrix::Zero(n, 0);
  for (int j = 0; j < sys.sensor_count(); ++j) {
    ch.v_streams.push_back(j);
    ch.v_dims.push_back(sys.sensor_dim(j));
    ch.v_chol.push_back(psd_sqrt(sys.Sigma_v[j]));
  }
  setup.channels.push_back(std::move(ch));

  setup.est_noise_cov = channel_noise_covariance(setup.channels[0], sys);
  setup.sampled_plant_cov = sampled_plant_covariance(setup, sys);
  setup.y0_mean = setup.x0_mean;
  Vector var = setup.x0_chol.rowwise().squaredNorm();
  var += setup.est_noise_cov.diagonal();
  setup.y0_sd = var;  // variances; resolve_quantizer takes the sqrt
  resolve_quantizer(setup, sys, cfg);
  return setup;
}

TrialSetup prepare_multi(const LinearSystem& sys, const LoopConfig& cfg) {
  const int n = sys.n();
  EigenspaceAssignment asg = check_eigenspace_assumption(sys);
  if (!asg.satisfied) {
    std::string msg =
        "prepare_trial: eigenspace assignment failed for Jordan block(s)";
    for (int b : asg.unassigned_blocks) msg += " " + std::to_string(b);
    throw StructuralError(msg);
  }

  // Permute the Jordan basis into per-sensor groups (highest sensor index on
  // top), then re-chain each block's 2n-th power in place.
  const auto& jb = asg.jordan.blocks;
  RealJordanForm perm;
  perm.P = Matrix::Zero(n, n);
  perm.J = Matrix::Zero(n, n);
  struct GroupEntry {
    int block_index;
    int new_offset;
  };
  std::vector<std::vector<GroupEntry>> per_sensor(sys.sensor_count());
  {
    int row = 0;
    for (int j = sys.sensor_count() - 1; j >= 0; --j) {
      for (std::size_t bi = 0; bi < jb.size(); ++bi) {
        if (asg.block_sensor[bi] != j) continue;
        perm.P.middleRows(row, jb[bi].size) =
            asg.jordan.P.middleRows(jb[bi].offset, jb[bi].size);
        perm.J.block(row, row, jb[bi].size, jb[bi].size) =
            asg.jordan.J.block(jb[bi].offset, jb[bi].offset, jb[bi].size,
                               jb[bi].size);
        JordanBlock nb = jb[bi];
        nb.offset = row;
        perm.blocks.push_back(nb);
        per_sensor[j].push_back({static_cast<int>(bi), row});
        row += jb[bi].size;
      }
    }
  }
  const Matrix Q0 = perm.P;

  RealJordanForm perm_coords;
  perm_coords.P = Matrix::Identity(n, n);
  perm_coords.J = perm.J;
  perm_coords.blocks = perm.blocks;
  const RealJordanForm pw = power_jordan(perm_coords, 2 * n);

  TrialSetup setup;
  setup.n = n;
  setup.raw_state_dim = n;
  setup.multi_sensor = true;
  setup.A_bar = pw.J;
  setup.state_transform = pw.P * Q0;
  setup.lam_abs = pw.lam_abs_per_component();
  setup.blocks = pw.blocks;
  setup.plant_chol = psd_sqrt(sys.Sigma_w);
  setup.x0_mean = setup.state_transform * sys.mu_x0;
  setup.x0_chol = psd_sqrt(setup.state_transform * sys.Sigma_x0 *
                           setup.state_transform.transpose());
  {
    std::vector<Matrix> pows(2 * n);
    pows[0] = Matrix::Identity(n, n);
    for (int k = 1; k < 2 * n; ++k) pows[k] = sys.A * pows[k - 1];
    Matrix Ww(n, 2 * n * n);
    for (int i = 0; i < 2 * n; ++i) {
      Ww.middleCols(i * n, n) = pows[2 * n - 1 - i];
    }
    setup.window_noise_w = setup.state_transform * Ww;
  }

  Vector y0_var = setup.x0_chol.rowwise().squaredNorm();
  setup.est_noise_cov = Matrix::Zero(n, n);
  for (int j = sys.sensor_count() - 1; j >= 0; --j) {
    if (per_sensor[j].empty()) continue;
    const int offset = per_sensor[j].front().new_offset;
    int dim = 0;
    for (const auto& e : per_sensor[j]) dim += jb[e.block_index].size;

    Matrix targets(dim, n);
    {
      int r = 0;
      for (const auto& e : per_sensor[j]) {
        const auto& blk = jb[e.block_index];
        targets.middleRows(r, blk.size) =
            asg.jordan.P.middleRows(blk.offset, blk.size);
        r += blk.size;
      }
    }
    const Matrix O = observability_matrix(sys.C[j], sys.A);
    const Matrix coeff = coefficient_rows(O, targets, cfg.estimator);

    TrialSetup::Channel ch;
    ch.offset = offset;
    ch.dim = dim;
    ch.window_rows = static_cast<int>(O.rows());
    const Matrix T_local = pw.P.block(offset, offset, dim, dim);
    ch.noise_from_v = T_local * coeff;
    ch.noise_from_w =
        n > 1 ? Matrix(ch.noise_from_v *
                       window_plant_noise_map(sys.C[j], sys.A))
              : Matrix::Zero(dim, 0);
    ch.v_streams.push_back(j);
    ch.v_dims.push_back(sys.sensor_dim(j));
    ch.v_chol.push_back(psd_sqrt(sys.Sigma_v[j]));
    const Matrix est_cov = channel_noise_covariance(ch, sys);
    setup.est_noise_cov.block(offset, offset, dim, dim) = est_cov;
    y0_var.segment(offset, dim) += est_cov.diagonal();
    setup.channels.push_back(std::move(ch));
  }
  setup.sampled_plant_cov = sampled_plant_covariance(setup, sys);
  setup.y0_mean = setup.x0_mean;
  setup.y0_sd = y0_var;
  resolve_quantizer(setup, sys, cfg);
  return setup;
}

RunReport simulate_trial(const LinearSystem& sys, const TrialSetup& setup,
                         const LoopConfig& cfg, std::uint64_t seed,
                         int trial) {
  const int n = setup.n;
  const int S = cfg.horizon;
  RunReport rep;
  rep.trial = trial;
  rep.seed = seed;
  rep.n = n;
  rep.multi_sensor = setup.multi_sensor;
  rep.K = setup.K;
  for (const auto& ch : setup.channels) rep.channel_dims.push_back(ch.dim);
  rep.feedback_links = setup.multi_sensor ? sys.sensor_count() : 0;
  rep.lam_abs = setup.lam_abs;
  rep.F = setup.F;
  rep.bits_per_period = setup.bits_per_period;

  const std::uint64_t sub = mix_seed(seed, static_cast<std::uint64_t>(trial));
  GaussianSource src_x0(sub, 0);
  GaussianSource src_w(sub, 1);
  std::vector<GaussianSource> src_v;
  src_v.reserve(sys.sensor_count());
  for (int j = 0; j < sys.sensor_count(); ++j) {
    src_v.emplace_back(sub, 2 + static_cast<std::uint64_t>(j));
  }

  ClosedLoopState state;
  state.x = setup.x0_mean + setup.x0_chol * src_x0.normal_vector(n);
  state.bins = setup.bins0;
  state.x_hat = Vector::Zero(n);

  rep.x_hist.resize(S + 1, n);
  rep.delta_hist.resize(S + 1, n);
  rep.x_hist.row(0) = state.x.transpose();
  rep.delta_hist.row(0) = state.bins.delta.transpose();
  rep.symbols.assign(setup.channels.size(), {});
  rep.feedback.reserve(S);
  rep.zoomed.reserve(S);

  const int est_cols = std::max(0, n - 1) * n;
  Vector w_stack(2 * n * n);
  for (int s = 0; s < S; ++s) {
    for (int t = 0; t < 2 * n; ++t) {
      w_stack.segment(t * n, n) = setup.plant_chol * src_w.normal_vector(n);
    }
    const Vector w_bar = setup.window_noise_w * w_stack;

    std::vector<Vector> v_bars;
    v_bars.reserve(setup.channels.size());
    for (const auto& ch : setup.channels) {
      int stage_width = 0;
      for (int d : ch.v_dims) stage_width += d;
      Vector v_window(ch.window_rows);
      int col_off = 0;
      for (std::size_t k = 0; k < ch.v_streams.size(); ++k) {
        const int pj = ch.v_dims[k];
        auto& src = src_v[ch.v_streams[k]];
        for (int t = 0; t < n; ++t) {
          v_window.segment(t * stage_width + col_off, pj) =
              ch.v_chol[k] * src.normal_vector(pj);
        }
        col_off += pj;
      }
      Vector v_bar = ch.noise_from_v * v_window;
      if (ch.noise_from_w.cols() > 0) {
        v_bar += ch.noise_from_w * w_stack.head(est_cols);
      }
      v_bars.push_back(std::move(v_bar));
    }

    state = loop_step(state, setup, cfg, w_bar, v_bars);

    if (s == 0) rep.initial_zoom_ok = state.zoomed;
    for (std::size_t c = 0; c < setup.channels.size(); ++c) {
      rep.symbols[c].push_back(state.symbols[c]);
    }
    rep.feedback.push_back(state.zoomed ? 1 : 0);
    rep.zoomed.push_back(state.zoomed ? 1 : 0);
    rep.steps = s + 1;

    const bool bad = !state.x.allFinite() ||
                     state.x.cwiseAbs().maxCoeff() > kAbortMagnitude ||
                     !state.bins.delta.allFinite();
    if (bad) {
      rep.aborted = true;
      rep.x_hist.conservativeResize(s + 1, n);
      rep.delta_hist.conservativeResize(s + 1, n);
      return rep;
    }
    rep.x_hist.row(s + 1) = state.x.transpose();
    rep.delta_hist.row(s + 1) = state.bins.delta.transpose();
  }
  return rep;
}

}  // namespace

TrialSetup prepare_trial(const LinearSystem& sys, const LoopConfig& cfg) {
  if (cfg.horizon < 0) throw ConfigError("prepare_trial: negative horizon");
  if (cfg.feedback_period != 1) {
    throw ConfigError(
        "prepare_trial: feedback is emitted every sampled step; "
        "feedback_period must be 1");
  }
  const AssumptionReport report = check_assumptions(sys);
  if (!report.controllable) {
    throw StructuralError("prepare_trial: (A, B) is not controllable");
  }
  if (!report.jointly_observable) {
    throw StructuralError("prepare_trial: sensors are not jointly observable");
  }
  if (!report.all_modes_unstable) {
    throw StructuralError(
        "prepare_trial: the policy requires every eigenvalue strictly "
        "outside the unit circle; stable or mixed spectra are rejected");
  }
  return cfg.multi_sensor ? prepare_multi(sys, cfg) : prepare_single(sys, cfg);
}

ClosedLoopState loop_step(const ClosedLoopState& state,
                          const TrialSetup& setup, const LoopConfig& cfg,
                          const Vector& w_bar,
                          const std::vector<Vector>& v_bar_per_channel) {
  const int n = setup.n;
  if (state.x.size() != n || w_bar.size() != n ||
      v_bar_per_channel.size() != setup.channels.size()) {
    throw InputError("loop_step: dimension mismatch");
  }

  ClosedLoopState next;
  next.symbols.resize(setup.channels.size());

  bool all_zoomed = true;
  for (std::size_t c = 0; c < setup.channels.size(); ++c) {
    const auto& ch = setup.channels[c];
    if (static_cast<int>(v_bar_per_channel[c].size()) != ch.dim) {
      throw InputError("loop_step: channel noise dimension mismatch");
    }
    std::int64_t index = 0;
    bool overflow = false;
    for (int i = 0; i < ch.dim; ++i) {
      const int gi = ch.offset + i;
      const double y = state.x(gi) + v_bar_per_channel[c](i);
      const int qi = scalar_encode(y, state.bins.delta(gi), setup.K[gi]);
      if (qi == setup.K[gi] + 1) {
        overflow = true;
        break;
      }
      index = index * setup.K[gi] + (qi - 1);
    }
    next.symbols[c] = overflow ? 0 : index + 1;
    if (overflow) all_zoomed = false;
  }
  next.zoomed = all_zoomed;

  // The estimate is the per-channel decode when every channel is granular;
  // any overflow zeroes the whole estimate and grows every bin.
  next.x_hat = Vector::Zero(n);
  if (all_zoomed) {
    for (std::size_t c = 0; c < setup.channels.size(); ++c) {
      const auto& ch = setup.channels[c];
      std::int64_t t = next.symbols[c] - 1;
      for (int i = ch.dim - 1; i >= 0; --i) {
        const int gi = ch.offset + i;
        const int qi = static_cast<int>(t % setup.K[gi]) + 1;
        t /= setup.K[gi];
        next.x_hat(gi) = scalar_decode(qi, state.bins.delta(gi), setup.K[gi]);
      }
    }
  }

  if (cfg.control == ControlMode::kOpenLoop) {
    next.bins = state.bins;
    next.x = setup.A_bar * state.x + w_bar;
  } else {
    next.bins = update_bins(all_zoomed ? 1 : 0, state.bins, setup.zoom,
                            setup.lam_abs);
    next.x = setup.A_bar * (state.x - next.x_hat) + w_bar;
  }
  return next;
}

RunReport run_trial(const LinearSystem& sys, const LoopConfig& cfg,
                    std::uint64_t seed, int trial_index) {
  LoopConfig single = cfg;
  single.multi_sensor = false;
  const TrialSetup setup = prepare_trial(sys, single);
  return simulate_trial(sys, setup, single, seed, trial_index);
}

RunReport run_multi_sensor(const LinearSystem& sys, const LoopConfig& cfg,
                           std::uint64_t seed, int trial_index) {
  LoopConfig multi = cfg;
  multi.multi_sensor = true;
  const TrialSetup setup = prepare_trial(sys, multi);
  return simulate_trial(sys, setup, multi, seed, trial_index);
}

std::vector<RunReport> run_batch(const LinearSystem& sys,
                                 const LoopConfig& cfg, std::uint64_t seed,
                                 int trials, int threads) {
  if (trials < 0) throw ConfigError("run_batch: negative trial count");
  const TrialSetup setup = prepare_trial(sys, cfg);
  std::vector<RunReport> out(trials);
  if (trials == 0) return out;

  int workers = threads > 0
                    ? threads
                    : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, trials);

  std::atomic<int> cursor{0};
  auto work = [&]() {
    for (int i = cursor.fetch_add(1); i < trials; i = cursor.fetch_add(1)) {
      out[i] = simulate_trial(sys, setup, cfg, seed, i);
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  return out;
}

std::vector<int> stopping_times(const RunReport& report) {
  std::vector<int> out;
  out.push_back(0);
  for (int s = 1; s < static_cast<int>(report.zoomed.size()); ++s) {
    if (report.zoomed[s]) out.push_back(s);
  }
  return out;
}

}  // namespace zoomctl
