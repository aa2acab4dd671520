//! Behavioral model of the SRAM array executing NOMF in filter mode.
//!
//! The bitline discharge race is modeled at the level of a constant-current
//! linear discharge: each cell storing 0 pulls BL down, each cell storing 1
//! pulls BLB down, and the side with the larger aggregate current-to-
//! capacitance ratio wins and imposes its value on the whole kernel. Device
//! mismatch enters as per-cell Gaussian current variation plus optional
//! BL/BLB capacitance variation; with all sigmas at zero the race reduces
//! exactly to the majority vote of the software NOMF.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as GaussCdf};
use thiserror::Error;

use crate::filters;
use crate::framer::EbbiFrame;

#[derive(Debug, Error)]
pub enum ImcError {
    #[error("frame is {fw}x{fh} but the array is {aw}x{ah}")]
    GeometryMismatch { fw: u16, fh: u16, aw: u16, ah: u16 },
    #[error("kernel side must be 3 or 5, got {0}")]
    UnsupportedKernel(usize),
    #[error("calibration targets are infeasible: {0}")]
    InfeasibleTargets(String),
    #[error("trial count must be at least 1")]
    ZeroTrials,
}

/// Structural and electrical parameters of the array.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ArrayConfig {
    pub rows: u16,
    pub cols: u16,
    pub banks: u16,
    /// Columns per bank; divisible by both supported kernel sides, so bank
    /// boundaries always align with kernel tiling.
    pub bank_cols: u16,
    pub n: usize,
    /// Supply voltage, volts.
    pub vdd: f64,
    /// Bitline capacitance, farads.
    pub c_bl: f64,
    /// Clock frequency, hertz.
    pub f_clk: f64,
    /// Quantification of the "much less than" margin in the transmission
    /// gate sizing criterion.
    pub tg_margin_factor: f64,
}

impl ArrayConfig {
    pub fn new(n: usize, vdd: f64) -> Result<Self, ImcError> {
        if !filters::SUPPORTED_KERNELS.contains(&n) {
            return Err(ImcError::UnsupportedKernel(n));
        }
        Ok(Self { n, vdd, ..Self::default() })
    }

    pub fn cycles_per_frame(&self) -> u64 {
        // one precharge + one race per n-row band
        2 * (self.rows as u64).div_ceil(self.n as u64)
    }

    pub fn frame_latency_s(&self) -> f64 {
        self.cycles_per_frame() as f64 / self.f_clk
    }
}

impl Default for ArrayConfig {
    fn default() -> Self {
        Self {
            rows: 240,
            cols: 320,
            banks: 22,
            bank_cols: 15,
            n: 3,
            vdd: 1.2,
            c_bl: 140e-15,
            f_clk: 200e6,
            tg_margin_factor: 10.0,
        }
    }
}

/// Per-cell discharge-current and bitline-capacitance variation.
///
/// The nominal cell current follows an overdrive law `K * (vdd - v_t)^a`;
/// the absolute current spread is held constant across supply, so relative
/// mismatch grows as the supply (and with it the overdrive) drops.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MismatchModel {
    /// Current scale, amperes per volt^exponent.
    pub current_scale: f64,
    /// Threshold voltage of the overdrive law, volts.
    pub v_t: f64,
    /// Overdrive exponent.
    pub exponent: f64,
    /// Absolute per-cell current standard deviation, amperes.
    pub sigma_i_abs: f64,
    /// Relative standard deviation of BL/BLB capacitance.
    pub sigma_c_rel: f64,
    pub seed: u64,
}

/// Nominal cell current at 1.2 V is 50 uA; the scale only fixes absolute
/// units (timing criteria), decision statistics depend on ratios alone.
pub const DEFAULT_CURRENT_SCALE: f64 = 50e-6 / 0.748_204_374_451_816_6;
pub const DEFAULT_V_T: f64 = 0.4;
pub const DEFAULT_EXPONENT: f64 = 1.3;

impl MismatchModel {
    pub fn ideal(seed: u64) -> Self {
        Self {
            current_scale: DEFAULT_CURRENT_SCALE,
            v_t: DEFAULT_V_T,
            exponent: DEFAULT_EXPONENT,
            sigma_i_abs: 0.0,
            sigma_c_rel: 0.0,
            seed,
        }
    }

    /// Nominal per-cell discharge current at the given supply.
    pub fn mu_i(&self, vdd: f64) -> f64 {
        self.current_scale * (vdd - self.v_t).max(0.0).powf(self.exponent)
    }

    pub fn sigma_i_rel(&self, vdd: f64) -> f64 {
        let mu = self.mu_i(vdd);
        if mu > 0.0 {
            self.sigma_i_abs / mu
        } else {
            0.0
        }
    }

    pub fn is_ideal(&self) -> bool {
        self.sigma_i_abs == 0.0 && self.sigma_c_rel == 0.0
    }
}

/// Outcome of one kernel discharge race.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaceOutcome {
    pub decided_bit: u8,
    /// Slope of the BL minus BLB voltage difference, volts per second;
    /// positive means BLB discharges faster, deciding 1.
    pub delta_v_rate: f64,
    /// Absolute difference between the ones and zeros counts.
    pub margin: u32,
}

fn sample_current_sum(rng: &mut impl Rng, cells: u32, mu: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return cells as f64 * mu;
    }
    let normal = Normal::new(mu, sigma).expect("finite current parameters");
    // physical currents are non-negative; negative samples truncate at 0
    (0..cells).map(|_| normal.sample(rng).max(0.0)).sum()
}

fn sample_capacitance(rng: &mut impl Rng, nominal: f64, sigma_rel: f64) -> f64 {
    if sigma_rel == 0.0 {
        return nominal;
    }
    let normal = Normal::new(1.0, sigma_rel).expect("finite capacitance sigma");
    (nominal * normal.sample(rng)).max(nominal * 1e-3)
}

/// Simulate one discharge race for a kernel holding `ones` 1-cells and
/// `zeros` 0-cells. Equal rates resolve to 1, matching the ceiling majority
/// threshold of the software NOMF.
pub fn kernel_race(
    ones: u32,
    zeros: u32,
    mm: &MismatchModel,
    cfg: &ArrayConfig,
    rng: &mut impl Rng,
) -> RaceOutcome {
    let mu = mm.mu_i(cfg.vdd);
    let sum_i0 = sample_current_sum(rng, zeros, mu, mm.sigma_i_abs);
    let sum_i1 = sample_current_sum(rng, ones, mu, mm.sigma_i_abs);
    let c_bl = sample_capacitance(rng, cfg.c_bl, mm.sigma_c_rel);
    let c_blb = sample_capacitance(rng, cfg.c_bl, mm.sigma_c_rel);
    let delta_v_rate = sum_i1 / c_blb - sum_i0 / c_bl;
    RaceOutcome {
        decided_bit: (delta_v_rate >= 0.0) as u8,
        delta_v_rate,
        margin: ones.abs_diff(zeros),
    }
}

/// Statistics of one in-memory filter pass.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FlipStats {
    /// Pixels whose value changed relative to the input frame.
    pub flipped_pixels: usize,
    /// `flipped_pixels` over the pixel count (measured alpha).
    pub alpha_measured: f64,
    /// Pixels disagreeing with the ideal software NOMF.
    pub unintended_flips: usize,
    pub cycles: u64,
    pub latency_s: f64,
}

/// Deterministic per-kernel random substream, so parallel and serial
/// execution of a frame give identical results.
fn kernel_rng(seed: u64, band: u32, kernel: u32) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..12].copy_from_slice(&band.to_le_bytes());
    key[12..16].copy_from_slice(&kernel.to_le_bytes());
    key[16..24].copy_from_slice(&0x4e4f_4d46_5241_4345u64.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Run NOMF through the discharge-race model over a whole frame.
///
/// Bands of `n` rows are processed one after another (two cycles each); all
/// kernels within a band race independently, which is where the hardware
/// parallelism comes from. With an ideal mismatch model the output equals
/// `filters::nomf` bit for bit.
pub fn filter_frame_imc(
    frame: &EbbiFrame,
    cfg: &ArrayConfig,
    mm: &MismatchModel,
) -> Result<(EbbiFrame, FlipStats), ImcError> {
    if frame.width() != cfg.cols || frame.height() != cfg.rows {
        return Err(ImcError::GeometryMismatch {
            fw: frame.width(),
            fh: frame.height(),
            aw: cfg.cols,
            ah: cfg.rows,
        });
    }
    if !filters::SUPPORTED_KERNELS.contains(&cfg.n) {
        return Err(ImcError::UnsupportedKernel(cfg.n));
    }
    // (x0, y0, tile width, tile height, decided bit)
    type TileDecision = (u16, u16, u16, u16, u8);
    let n = cfg.n as u16;
    let bands: Vec<u16> = (0..frame.height()).step_by(cfg.n).collect();
    let band_decisions: Vec<Vec<TileDecision>> = bands
        .par_iter()
        .enumerate()
        .map(|(band_idx, &y0)| {
            let th = (y0 + n).min(frame.height()) - y0;
            let mut decisions = Vec::new();
            let mut kernel_idx = 0u32;
            // bank_cols is divisible by n, so walking kernels bank by bank
            // visits the same column tiles as a plain n-stride scan
            let mut x0 = 0u16;
            while x0 < frame.width() {
                let tw = (x0 + n).min(frame.width()) - x0;
                let ones = filters::count_tile_ones(frame, x0, y0, tw, th) as u32;
                let zeros = (tw as u32) * (th as u32) - ones;
                let mut rng = kernel_rng(mm.seed, band_idx as u32, kernel_idx);
                let outcome = kernel_race(ones, zeros, mm, cfg, &mut rng);
                decisions.push((x0, y0, tw, th, outcome.decided_bit));
                kernel_idx += 1;
                x0 += n;
            }
            decisions
        })
        .collect();

    let mut out = EbbiFrame::zeros(frame.geometry(), frame.window_start, frame.window_len);
    for decisions in &band_decisions {
        for &(x0, y0, tw, th, bit) in decisions {
            if bit == 1 {
                for y in y0..y0 + th {
                    for x in x0..x0 + tw {
                        out.set(x, y, 1);
                    }
                }
            }
        }
    }

    let ideal = filters::nomf(frame, cfg.n).expect("kernel side validated above");
    let flipped_pixels = frame.diff_count(&out).expect("same geometry");
    let unintended_flips = ideal.diff_count(&out).expect("same geometry");
    let stats = FlipStats {
        flipped_pixels,
        alpha_measured: flipped_pixels as f64 / frame.geometry().pixel_count() as f64,
        unintended_flips,
        cycles: cfg.cycles_per_frame(),
        latency_s: cfg.frame_latency_s(),
    };
    Ok((out, stats))
}

/// Monte-Carlo result for a fixed kernel composition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McResult {
    pub flip_rate: f64,
    pub trials: u64,
    /// Sampled aggregate BL discharge currents (from the stored zeros).
    pub bl_currents: Vec<f64>,
    /// Sampled aggregate BLB discharge currents (from the stored ones).
    pub blb_currents: Vec<f64>,
}

/// Fraction of races whose decision differs from the true majority, plus
/// the two aggregate-current samples. A tied composition counts 1 as the
/// majority, matching the ceiling threshold.
pub fn monte_carlo_flip_rate(
    ones: u32,
    zeros: u32,
    vdd: f64,
    trials: u64,
    mm: &MismatchModel,
    cfg: &ArrayConfig,
) -> Result<McResult, ImcError> {
    if trials == 0 {
        return Err(ImcError::ZeroTrials);
    }
    let cfg = ArrayConfig { vdd, ..*cfg };
    let majority = (ones >= zeros) as u8;
    let vdd_bits = vdd.to_bits();
    let mut rng =
        kernel_rng(mm.seed ^ 0x6d63, ones ^ (zeros << 8), (vdd_bits ^ (vdd_bits >> 32)) as u32);
    let mut wrong = 0u64;
    let keep = trials.min(100_000) as usize;
    let mut bl = Vec::with_capacity(keep);
    let mut blb = Vec::with_capacity(keep);
    let mu = mm.mu_i(vdd);
    for _ in 0..trials {
        let sum_i0 = sample_current_sum(&mut rng, zeros, mu, mm.sigma_i_abs);
        let sum_i1 = sample_current_sum(&mut rng, ones, mu, mm.sigma_i_abs);
        let c_bl = sample_capacitance(&mut rng, cfg.c_bl, mm.sigma_c_rel);
        let c_blb = sample_capacitance(&mut rng, cfg.c_bl, mm.sigma_c_rel);
        let decided = (sum_i1 / c_blb - sum_i0 / c_bl >= 0.0) as u8;
        if decided != majority {
            wrong += 1;
        }
        if bl.len() < keep {
            bl.push(sum_i0);
            blb.push(sum_i1);
        }
    }
    Ok(McResult {
        flip_rate: wrong as f64 / trials as f64,
        trials,
        bl_currents: bl,
        blb_currents: blb,
    })
}

/// Check the transmission-gate sizing criterion: the RC constant of the gate
/// must be much smaller than the bitline discharge time `C_BL * VDD / i_s`.
/// Returns the ratio of the two time constants and whether it clears the
/// configured margin factor (boundary inclusive).
pub fn validate_tg_constraint(r_tg: f64, cfg: &ArrayConfig, mm: &MismatchModel) -> (bool, f64) {
    let i_s = mm.mu_i(cfg.vdd);
    // (C_BL * VDD / i_s) / (R_tg * C_BL) = VDD / (i_s * R_tg)
    let ratio = cfg.vdd / (i_s * r_tg);
    (ratio >= cfg.tg_margin_factor, ratio)
}

/// One calibration target: a wrong-decision rate at a supply and margin for
/// a kernel of `cells` total pixels.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CalibrationTarget {
    pub vdd: f64,
    pub margin: u32,
    pub cells: u32,
    pub kind: TargetKind,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum TargetKind {
    Exact(f64),
    AtMost(f64),
}

/// The published worst-case flip rates for a 3x3 kernel at margin 1.
pub fn reference_targets() -> Vec<CalibrationTarget> {
    vec![
        CalibrationTarget { vdd: 1.0, margin: 1, cells: 9, kind: TargetKind::Exact(0.025) },
        CalibrationTarget { vdd: 1.2, margin: 1, cells: 9, kind: TargetKind::AtMost(0.005) },
    ]
}

/// Analytic wrong-decision probability at zero capacitance mismatch: the
/// current difference of the two sides is Normal with mean `margin * mu` and
/// variance `cells * sigma^2`, and the race goes wrong when it crosses zero.
pub fn analytic_flip_probability(
    mm: &MismatchModel,
    vdd: f64,
    margin: u32,
    cells: u32,
) -> f64 {
    if margin == 0 {
        return 0.0; // ties have no wrong side under the >= convention
    }
    if mm.sigma_i_abs == 0.0 {
        return 0.0;
    }
    let mu_delta = margin as f64 * mm.mu_i(vdd);
    let sigma_delta = (cells as f64).sqrt() * mm.sigma_i_abs;
    let std_normal = GaussCdf::new(0.0, 1.0).unwrap();
    std_normal.cdf(-mu_delta / sigma_delta)
}

/// Solve for the absolute current mismatch that meets the targets.
///
/// Bisection over `sigma_i_abs` against the analytic flip probability; the
/// capacitance mismatch is held at zero during calibration. Exact targets
/// must agree on the solution and bound targets must then hold, otherwise
/// the target set is infeasible.
pub fn calibrate_mismatch(
    targets: &[CalibrationTarget],
    seed: u64,
) -> Result<MismatchModel, ImcError> {
    let mut model = MismatchModel::ideal(seed);
    let mut solved: Option<f64> = None;
    for target in targets {
        let TargetKind::Exact(rate) = target.kind else { continue };
        let sigma = if rate <= 0.0 {
            0.0
        } else if rate >= 0.5 {
            return Err(ImcError::InfeasibleTargets(format!(
                "exact rate {rate} not reachable below 0.5"
            )));
        } else {
            let probe = |sigma: f64| {
                analytic_flip_probability(
                    &MismatchModel { sigma_i_abs: sigma, ..model },
                    target.vdd,
                    target.margin,
                    target.cells,
                )
            };
            // flip probability grows monotonically with sigma
            let mut lo = 0.0f64;
            let mut hi = model.mu_i(target.vdd);
            while probe(hi) < rate {
                hi *= 2.0;
                if !hi.is_finite() {
                    return Err(ImcError::InfeasibleTargets(format!(
                        "rate {rate} unreachable at vdd {}",
                        target.vdd
                    )));
                }
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if probe(mid) < rate {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        if let Some(prev) = solved {
            if (prev - sigma).abs() > 1e-9 * prev.max(sigma).max(1e-30) {
                return Err(ImcError::InfeasibleTargets(
                    "exact targets disagree on sigma".to_string(),
                ));
            }
        }
        solved = Some(sigma);
    }
    model.sigma_i_abs = solved.unwrap_or(0.0);
    for target in targets {
        let p = analytic_flip_probability(&model, target.vdd, target.margin, target.cells);
        match target.kind {
            TargetKind::AtMost(bound) if p > bound => {
                return Err(ImcError::InfeasibleTargets(format!(
                    "rate {p:.5} at vdd {} exceeds bound {bound}",
                    target.vdd
                )));
            }
            _ => {}
        }
    }
    Ok(model)
}

/// Mismatch model calibrated to the reference flip-rate targets.
pub fn calibrated_model(seed: u64) -> MismatchModel {
    calibrate_mismatch(&reference_targets(), seed).expect("reference targets are feasible")
}
