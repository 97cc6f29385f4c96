#pragma once

#include <cstdint>
#include <vector>

#include "zoomctl/decomposition.hpp"
#include "zoomctl/linear_system.hpp"
#include "zoomctl/quantizer.hpp"
#include "zoomctl/random.hpp"
#include "zoomctl/transforms.hpp"

namespace zoomctl {

enum class ControlMode {
  kClosedLoop,
  // Open-loop contrast runs: zero input, bin state frozen at its initial
  // value so the records stay finite as long as the state does.
  kOpenLoop,
};

struct LoopConfig {
  ZoomParams zoom;
  std::vector<int> K;  // per-component bin counts; empty = derive from epsilon
  int horizon = 1000;  // sampled steps
  bool multi_sensor = false;
  ControlMode control = ControlMode::kClosedLoop;
  EstimatorKind estimator = EstimatorKind::kSubset;
  bool lattice = false;
  double ell = 1.0;
  // Initial bins are sized so the first observation is perfectly zoomed
  // with at least this probability; trials where it still misses are
  // flagged, not aborted.
  double coverage = 0.999;
  double delta1 = 0.0;            // explicit leading bin size; 0 = coverage
  double small_set_radius = 0.0;  // F for diagnostics; 0 = 2 * L first entry
  int feedback_period = 1;        // sampled steps per feedback bit (fixed 1)
};

/// Everything a trial needs, precomputed once and shared read-only across
/// parallel trials.
struct TrialSetup {
  int n = 0;
  int raw_state_dim = 0;
  Matrix A_bar;           // sampled dynamics in (block) Jordan coordinates
  Matrix state_transform;  // raw state -> loop coordinates
  Vector lam_abs;         // per component, sampled eigenvalue magnitudes
  std::vector<int> K;
  ZoomParams zoom;  // with L resolved
  BinState bins0;
  double F = 0.0;
  Vector x0_mean;  // loop coordinates
  Matrix x0_chol;
  Matrix plant_chol;       // chol of Sigma_w (raw coordinates)
  Matrix window_noise_w;   // raw [w_0..w_{2n-1}] -> sampled plant noise
  std::vector<JordanBlock> blocks;  // loop-coordinate block layout
  double bits_per_period = 0.0;
  bool multi_sensor = false;

  /// One per transmitting channel: the whole stack for single-sensor runs,
  /// one per sensor with assigned coordinates for multi-sensor runs.
  struct Channel {
    int offset = 0;  // first loop coordinate
    int dim = 0;
    int window_rows = 0;         // stacked observation rows per window
    Matrix noise_from_w;         // raw [w_0..w_{n-2}] -> estimate noise
    Matrix noise_from_v;         // stacked window noise -> estimate noise
    std::vector<int> v_streams;  // contributing sensors, stacked order
    std::vector<int> v_dims;
    std::vector<Matrix> v_chol;
    std::int64_t symbol_space = 1;
  };
  std::vector<Channel> channels;
  Vector y0_mean;          // first-observation statistics, loop coordinates
  Vector y0_sd;
  Matrix est_noise_cov;    // estimate-noise covariance, loop coordinates
  Matrix sampled_plant_cov;  // sampled plant-noise covariance, loop coords
};

struct ClosedLoopState {
  Vector x;  // loop (Jordan) coordinates
  BinState bins;
  Vector x_hat;
  std::vector<std::int64_t> symbols;  // per channel
  bool zoomed = false;                // feedback bit of the last step
};

struct RunReport {
  int trial = 0;
  std::uint64_t seed = 0;
  int n = 0;
  bool multi_sensor = false;
  std::vector<int> K;
  std::vector<int> channel_dims;  // contiguous component counts per channel
  int feedback_links = 0;         // sensors receiving the feedback bit
  Vector lam_abs;
  double F = 0.0;
  double bits_per_period = 0.0;
  bool initial_zoom_ok = true;
  bool aborted = false;
  int steps = 0;       // completed loop steps
  Matrix x_hist;       // (steps+1) x n, row s = state entering step s
  Matrix delta_hist;   // (steps+1) x n
  std::vector<std::vector<std::int64_t>> symbols;  // [channel][step]
  std::vector<std::uint8_t> feedback;              // b per step
  std::vector<std::uint8_t> zoomed;                // perfectly-zoomed flags
};

/// Resolves the quantizer configuration against a system. Single-sensor
/// setups stack every sensor into one channel; multi-sensor setups require
/// the eigenspace assignment to hold and give each sensor its own channel.
TrialSetup prepare_trial(const LinearSystem& sys, const LoopConfig& cfg);

/// One sampled step of the coding/control loop. Pure in (state, noise):
/// encode the observation, decode the estimate, update bins, advance the
/// state. The estimate is zeroed and every bin grows whenever any channel
/// overflows; otherwise bins shrink (or hold at their floor).
ClosedLoopState loop_step(const ClosedLoopState& state, const TrialSetup& setup,
                          const LoopConfig& cfg, const Vector& w_bar,
                          const std::vector<Vector>& v_bar_per_channel);

RunReport run_trial(const LinearSystem& sys, const LoopConfig& cfg,
                    std::uint64_t seed, int trial_index = 0);

RunReport run_multi_sensor(const LinearSystem& sys, const LoopConfig& cfg,
                           std::uint64_t seed, int trial_index = 0);

/// Deterministic parallel batch: trial i uses streams derived from
/// (seed, i) only, so results are byte-identical for any thread count.
std::vector<RunReport> run_batch(const LinearSystem& sys, const LoopConfig& cfg,
                                 std::uint64_t seed, int trials,
                                 int threads = 0);

/// Sampled instants where every quantizer was perfectly zoomed: tau_0 = 0,
/// tau_{z+1} = first later step with the zoomed flag set.
std::vector<int> stopping_times(const RunReport& report);

}  // namespace zoomctl
