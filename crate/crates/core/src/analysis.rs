//! Witness analyses over measurement angles and the precision factor: the
//! standard maximum, passive and active sharing, fixed-angle windows and
//! Werner-noise thresholds.
//!
//! Every reported value comes from the pipeline. Where the closed forms apply
//! (all configurations on the stationary manifold `θ₁ = π/2, θ₂ = 0,
//! θ₄ = -θ₃, θ₆ = -θ₅`) they are checked against it.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use crate::error::{check_unit_interval, Error, Result};
use crate::kgt::{closed_form_r1, closed_form_r2, kgt_values_with, ClosedFormCoefficients, KgtValues, CLASSICAL_BOUND};
use crate::optimize::{
    bisect_indicator, golden_section_max, maximize_min, maximize_min_from, Domain, ObjectiveKind, OptimizationResult,
    SearchOptions,
};
use crate::scenario::{ScenarioConfig, ScenarioEngine};

/// Largest allowed pipeline/closed-form deviation.
pub const ORACLE_TOL: f64 = 1e-9;
/// `|r1 - r2|` below which an active optimum counts as balanced.
pub const BALANCE_TOL: f64 = 1e-6;
/// Final bracket width of every bisection.
pub const BISECTION_WIDTH: f64 = 1e-5;
/// Precision factor at which the active-sharing angles are quoted.
pub const ACTIVE_REFERENCE_G: f64 = 0.91;
/// Default fixed angles `(θ₃, θ₅)` of the fixed-angle analysis.
pub const FIXED_ANGLES: (f64, f64) = (0.2122, 0.2929);

/// `arccos(3/√13)`, the Charlie angle of the standard maximum.
pub fn stationary_theta3() -> f64 {
    (3.0 / 13f64.sqrt()).acos()
}

/// Full angle vector on the stationary manifold.
pub fn stationary_angles(theta3: f64, theta5: f64) -> [f64; 6] {
    [FRAC_PI_2, 0.0, theta3, -theta3, theta5, -theta5]
}

/// One point of a sweep over the precision factor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRecord {
    pub g: f64,
    /// `min(R¹_C-NS, R¹_NS-C)`.
    pub r1: f64,
    /// `min(R²_C-NS, R²_NS-C)`.
    pub r2: f64,
    pub r_m: f64,
    pub angles: [f64; 6],
}

impl SweepRecord {
    pub fn new(g: f64, r1: f64, r2: f64, angles: [f64; 6]) -> Self {
        Self {
            g,
            r1,
            r2,
            r_m: r1.min(r2),
            angles,
        }
    }

    fn from_values(g: f64, values: &KgtValues, angles: [f64; 6]) -> Self {
        Self::new(g, values.r1(), values.r2(), angles)
    }

    pub fn theta3(&self) -> f64 {
        self.angles[2]
    }

    pub fn theta5(&self) -> f64 {
        self.angles[4]
    }

    /// Both observers violate the classical bound.
    pub fn violates(&self) -> bool {
        self.r_m > CLASSICAL_BOUND
    }
}

pub fn closed_form_values(config: &ScenarioConfig) -> KgtValues {
    let (r_cns_1, r_nsc_1) = closed_form_r1(config);
    let (r_cns_2, r_nsc_2) = closed_form_r2(config);
    KgtValues {
        r_cns_1,
        r_nsc_1,
        r_cns_2,
        r_nsc_2,
    }
}

/// Largest deviation between pipeline and closed-form witness values.
pub fn oracle_deviation(engine: &ScenarioEngine, config: &ScenarioConfig) -> Result<f64> {
    Ok(kgt_values_with(engine, config)?.max_abs_diff(&closed_form_values(config)))
}

/// Pipeline values, failing when the closed forms disagree beyond [`ORACLE_TOL`].
pub fn checked_values(engine: &ScenarioEngine, config: &ScenarioConfig) -> Result<KgtValues> {
    let values = kgt_values_with(engine, config)?;
    let deviation = values.max_abs_diff(&closed_form_values(config));
    if deviation > ORACLE_TOL {
        return Err(Error::OracleMismatch {
            deviation,
            context: format!("angles {:?}, G = {}", config.angles(), config.g()),
        });
    }
    Ok(values)
}

fn engine_for(v: f64) -> Result<ScenarioEngine> {
    ScenarioEngine::new(check_unit_interval("visibility", v)?, v)
}

/// Pipeline witness values, or NaN entries (ranked last by the optimizer)
/// if the configuration is rejected.
fn witness(engine: &ScenarioEngine, theta: [f64; 6], g: f64) -> KgtValues {
    let (v1, v2) = engine.visibilities();
    ScenarioConfig::new(theta, g, v1, v2)
        .and_then(|c| kgt_values_with(engine, &c))
        .unwrap_or(KgtValues {
            r_cns_1: f64::NAN,
            r_nsc_1: f64::NAN,
            r_cns_2: f64::NAN,
            r_nsc_2: f64::NAN,
        })
}

// ---------------------------------------------------------------------------
// Standard scenario

/// Standard-scenario witness value `min(R_C-NS, R_NS-C)` with a strong
/// Charlie, for `θ₁..θ₄`.
pub fn standard_value(engine: &ScenarioEngine, theta: [f64; 4]) -> f64 {
    let [t1, t2, t3, t4] = theta;
    witness(engine, [t1, t2, t3, t4, 0.0, 0.0], 1.0).r1()
}

#[derive(Clone, Debug, PartialEq)]
pub struct StandardMax {
    pub visibility: f64,
    /// Free search over `θ₁..θ₄`.
    pub search: OptimizationResult,
    /// Search over `θ₃` with `θ₁ = π/2, θ₂ = 0, θ₄ = -θ₃`.
    pub stationary: OptimizationResult,
    /// Value at `θ₁ = π/2, θ₂ = 0, θ₃ = -θ₄ = arccos(3/√13)`.
    pub at_stationary_angles: f64,
    /// Same `θ₃, θ₄` with `θ₁ = 0, θ₂ = π/2`.
    pub at_swapped_angles: f64,
    /// `θ₁ = π/2, θ₂ = 0, θ₃ = -θ₄ = π/4`.
    pub at_prior_angles: f64,
    /// `θ₁ = 0, θ₂ = π/2, θ₃ = -θ₄ = π/4`.
    pub at_prior_swapped_angles: f64,
}

/// Maximum of the standard-scenario witnesses at source visibility `v`.
pub fn standard_max(v: f64, options: SearchOptions) -> Result<StandardMax> {
    let engine = engine_for(v)?;
    let objective = |x: &[f64]| {
        let k = witness(&engine, [x[0], x[1], x[2], x[3], 0.0, 0.0], 1.0);
        vec![k.r_cns_1, k.r_nsc_1]
    };
    let search = maximize_min(objective, &[Domain::angle(); 4], ObjectiveKind::StandardMax, options);
    let stationary = standard_stationary(&engine, options);
    let t = stationary_theta3();
    Ok(StandardMax {
        visibility: v,
        search,
        stationary,
        at_stationary_angles: standard_value(&engine, [FRAC_PI_2, 0.0, t, -t]),
        at_swapped_angles: standard_value(&engine, [0.0, FRAC_PI_2, t, -t]),
        at_prior_angles: standard_value(&engine, [FRAC_PI_2, 0.0, FRAC_PI_4, -FRAC_PI_4]),
        at_prior_swapped_angles: standard_value(&engine, [0.0, FRAC_PI_2, FRAC_PI_4, -FRAC_PI_4]),
    })
}

impl StandardMax {
    /// The free-search optimum mapped to `cos θ₂ ≥ 0, sin θ₁ ≥ 0` using the
    /// witness symmetries `(θ₁, θ₂, θ₃, θ₄) → (-θ₁, θ₂ + π, θ₃ + π, θ₄ + π)`
    /// and `(θ₁, θ₃, θ₄) → (-θ₁, -θ₃, -θ₄)`.
    pub fn canonical_angles(&self) -> [f64; 4] {
        let [mut t1, mut t2, mut t3, mut t4] = self.search.best_angles[..] else {
            unreachable!("four free angles")
        };
        if t2.cos() < 0.0 {
            (t1, t2, t3, t4) = (-t1, t2 + PI, t3 + PI, t4 + PI);
        }
        if t1.sin() < 0.0 {
            (t1, t3, t4) = (-t1, -t3, -t4);
        }
        [t1, t2, t3, t4].map(|t| Domain::angle().wrap(t))
    }
}

fn standard_stationary(engine: &ScenarioEngine, options: SearchOptions) -> OptimizationResult {
    let objective = |x: &[f64]| {
        let k = witness(engine, [FRAC_PI_2, 0.0, x[0], -x[0], 0.0, 0.0], 1.0);
        vec![k.r_cns_1, k.r_nsc_1]
    };
    maximize_min(objective, &[Domain::angle()], ObjectiveKind::StandardMax, options)
}

// ---------------------------------------------------------------------------
// Passive sharing

/// Charlie₁ keeps the standard optimum `θ₃ = -θ₄ = arccos(3/√13)`, giving
/// `r1 = √13·G`; Charlie₂ then picks `θ₅ = -θ₆` maximizing
/// `K cos θ₅ + T sin θ₅`, giving `r2 = √(K² + T²)`.
///
/// Both stages are checked against the pipeline (and `r2` against a direct
/// search over `θ₅`); the record holds the pipeline values.
pub fn passive_analysis(g: f64) -> Result<SweepRecord> {
    passive_with(&engine_for(1.0)?, g, true)
}

fn passive_with(engine: &ScenarioEngine, g: f64, search_theta5: bool) -> Result<SweepRecord> {
    check_unit_interval("g", g)?;
    let (v1, v2) = engine.visibilities();
    let theta3 = stationary_theta3();
    let coeffs = ClosedFormCoefficients::new((1.0 - g * g).sqrt(), theta3);
    let theta5 = coeffs.t.atan2(coeffs.k);
    let angles = stationary_angles(theta3, theta5);
    let config = ScenarioConfig::new(angles, g, v1, v2)?;
    let values = checked_values(engine, &config)?;

    let scale = v1 * v2;
    let expected = [13f64.sqrt() * g * scale, coeffs.bound() * scale];
    let deviation = (values.r1() - expected[0]).abs().max((values.r2() - expected[1]).abs());
    if deviation > ORACLE_TOL {
        return Err(Error::OracleMismatch {
            deviation,
            context: format!("passive stages at G = {g}"),
        });
    }
    if search_theta5 {
        let objective = |x: &[f64]| {
            let k = witness(engine, stationary_angles(theta3, x[0]), g);
            vec![k.r_cns_2, k.r_nsc_2]
        };
        let best = maximize_min(objective, &[Domain::angle()], ObjectiveKind::Passive, SearchOptions::default());
        if best.best_value > values.r2() + ORACLE_TOL {
            return Err(Error::OracleMismatch {
                deviation: best.best_value - values.r2(),
                context: format!("passive θ₅ search beats arccos(K/√(K²+T²)) at G = {g}"),
            });
        }
    }
    Ok(SweepRecord::from_values(g, &values, angles))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PassiveSummary {
    /// Record maximizing `min(r1, r2)` over `G`.
    pub peak: SweepRecord,
    /// Bracket of the `G` above which `r1 > 3`.
    pub r1_edge: (f64, f64),
    /// Bracket of the `G` below which `r2 > 3`.
    pub r2_edge: (f64, f64),
}

pub fn passive_summary() -> Result<PassiveSummary> {
    let engine = engine_for(1.0)?;
    let record = |g: f64| passive_with(&engine, g, false);
    // r1 rises and r2 falls with G, so min(r1, r2) is unimodal.
    let (g_peak, _, _) = golden_section_max(|g| record(g).map_or(f64::NEG_INFINITY, |r| r.r_m), 0.0, 1.0, 1e-10);
    let peak = passive_with(&engine, g_peak, true)?;
    let r1_edge = bisect_indicator(|g| record(g).is_ok_and(|r| r.r1 > CLASSICAL_BOUND), 0.0, 1.0, BISECTION_WIDTH)?;
    let r2_edge = bisect_indicator(|g| record(g).is_ok_and(|r| r.r2 > CLASSICAL_BOUND), 0.0, 1.0, BISECTION_WIDTH)?;
    Ok(PassiveSummary { peak, r1_edge, r2_edge })
}

// ---------------------------------------------------------------------------
// Active sharing

#[derive(Clone, Debug, PartialEq)]
pub struct ActiveResult {
    pub record: SweepRecord,
    pub search: OptimizationResult,
    /// `|r1 - r2| ≤ BALANCE_TOL` at the optimum.
    pub balanced: bool,
}

fn active_objective(engine: &ScenarioEngine, g: f64) -> impl Fn(&[f64]) -> Vec<f64> + Sync + '_ {
    move |x: &[f64]| witness(engine, stationary_angles(x[0], x[1]), g).as_array().to_vec()
}

/// Maximizes `min` of all four witnesses over `(θ₃, θ₅)` on the stationary
/// manifold.
pub fn active_analysis(g: f64) -> Result<ActiveResult> {
    active_with(&engine_for(1.0)?, g, None)
}

/// Like [`active_analysis`] with sources of visibility `engine`, refining
/// from `warm = (θ₃, θ₅)` instead of a grid search when given.
pub fn active_with(engine: &ScenarioEngine, g: f64, warm: Option<[f64; 2]>) -> Result<ActiveResult> {
    check_unit_interval("g", g)?;
    let objective = active_objective(engine, g);
    let domains = [Domain::angle(); 2];
    let options = SearchOptions::default();
    let search = match warm {
        Some(start) => maximize_min_from(objective, &domains, ObjectiveKind::Active, &start, options),
        None => maximize_min(objective, &domains, ObjectiveKind::Active, options),
    };
    let angles = stationary_angles(search.best_angles[0], search.best_angles[1]);
    let (v1, v2) = engine.visibilities();
    let values = checked_values(engine, &ScenarioConfig::new(angles, g, v1, v2)?)?;
    let record = SweepRecord::from_values(g, &values, angles);
    Ok(ActiveResult {
        balanced: (record.r1 - record.r2).abs() <= BALANCE_TOL,
        record,
        search,
    })
}

/// Active optima over a grid of `G`, in grid order. Each point is solved by
/// a full search.
pub fn active_sweep(grid: &[f64]) -> Result<Vec<ActiveResult>> {
    use rayon::prelude::*;
    let engine = engine_for(1.0)?;
    grid.par_iter().map(|&g| active_with(&engine, g, None)).collect()
}

/// Unconstrained search over all six angles at precision `g`, used to check
/// that the stationary manifold holds the active optimum.
pub fn active_unconstrained(g: f64, options: SearchOptions) -> Result<OptimizationResult> {
    check_unit_interval("g", g)?;
    let engine = engine_for(1.0)?;
    let objective = |x: &[f64]| {
        witness(&engine, [x[0], x[1], x[2], x[3], x[4], x[5]], g)
            .as_array()
            .to_vec()
    };
    Ok(maximize_min(objective, &[Domain::angle(); 6], ObjectiveKind::Active, options))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActiveSummary {
    /// Optimum at `G = ACTIVE_REFERENCE_G`.
    pub reference: ActiveResult,
    /// Optimum over `G` as well.
    pub peak: ActiveResult,
    /// Bracket of the lower end of the violating range of `G`.
    pub lower_edge: (f64, f64),
    /// Optimum at `G = 1`, the upper end of the range.
    pub at_one: ActiveResult,
}

/// Active optimum maximized over `G ∈ [g_lo, g_hi]` as well, by a joint
/// refinement over `(G, θ₃, θ₅)` from `warm`.
fn active_peak(engine: &ScenarioEngine, warm: [f64; 3], g_lo: f64, g_hi: f64) -> Result<ActiveResult> {
    let objective = |x: &[f64]| witness(engine, stationary_angles(x[1], x[2]), x[0]).as_array().to_vec();
    let domains = [Domain::interval(g_lo, g_hi), Domain::angle(), Domain::angle()];
    let joint = maximize_min_from(objective, &domains, ObjectiveKind::Active, &warm, SearchOptions::default());
    let [g, theta3, theta5] = joint.best_angles[..] else {
        unreachable!("three free variables")
    };
    active_with(engine, g, Some([theta3, theta5]))
}

fn angles_of(result: &ActiveResult) -> [f64; 2] {
    [result.record.theta3(), result.record.theta5()]
}

pub fn active_summary() -> Result<ActiveSummary> {
    let engine = engine_for(1.0)?;
    let reference = active_with(&engine, ACTIVE_REFERENCE_G, None)?;
    let warm = angles_of(&reference);
    let peak = active_peak(&engine, [ACTIVE_REFERENCE_G, warm[0], warm[1]], 0.85, 0.97)?;
    let lower_edge = bisect_indicator(
        |g| active_with(&engine, g, Some(warm)).is_ok_and(|r| r.record.violates()),
        0.8,
        ACTIVE_REFERENCE_G,
        BISECTION_WIDTH,
    )?;
    let at_one = active_with(&engine, 1.0, None)?;
    Ok(ActiveSummary {
        reference,
        peak,
        lower_edge,
        at_one,
    })
}

// ---------------------------------------------------------------------------
// Fixed angles

/// Pipeline records at fixed `(θ₃, θ₅)` on the stationary manifold, in grid
/// order.
pub fn fixed_angle_sweep(theta3: f64, theta5: f64, grid: &[f64]) -> Result<Vec<SweepRecord>> {
    use rayon::prelude::*;
    let engine = engine_for(1.0)?;
    let angles = stationary_angles(theta3, theta5);
    grid.par_iter()
        .map(|&g| {
            let values = checked_values(&engine, &ScenarioConfig::pure(angles, g)?)?;
            Ok(SweepRecord::from_values(g, &values, angles))
        })
        .collect()
}

/// Brackets of the two ends of the range of `G` on which `violates` holds,
/// found by scanning `samples` points of `[lo, hi]` and bisecting the first
/// and last sign change. `None` if no sample violates.
pub fn violation_window(
    violates: impl Fn(f64) -> bool,
    lo: f64,
    hi: f64,
    samples: usize,
) -> Result<Option<((f64, f64), (f64, f64))>> {
    let n = samples.max(2);
    let xs: Vec<f64> = (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect();
    let flags: Vec<bool> = xs.iter().map(|&x| violates(x)).collect();
    let (Some(first), Some(last)) = (flags.iter().position(|&f| f), flags.iter().rposition(|&f| f)) else {
        return Ok(None);
    };
    let lower = if first == 0 {
        (lo, lo)
    } else {
        bisect_indicator(&violates, xs[first - 1], xs[first], BISECTION_WIDTH)?
    };
    let upper = if last == n - 1 {
        (hi, hi)
    } else {
        bisect_indicator(&violates, xs[last], xs[last + 1], BISECTION_WIDTH)?
    };
    Ok(Some((lower, upper)))
}

/// Range of `G` on which both observers violate at fixed `(θ₃, θ₅)`.
pub fn fixed_angle_window(theta3: f64, theta5: f64) -> Result<Option<((f64, f64), (f64, f64))>> {
    let engine = engine_for(1.0)?;
    let angles = stationary_angles(theta3, theta5);
    let violates = |g: f64| {
        ScenarioConfig::pure(angles, g)
            .and_then(|c| kgt_values_with(&engine, &c))
            .is_ok_and(|k| k.min_all() > CLASSICAL_BOUND)
    };
    violation_window(violates, 0.0, 1.0, 1001)
}

// ---------------------------------------------------------------------------
// Noise

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NoiseMode {
    /// Standard scenario, strong Charlie.
    Standard,
    /// Active sharing, maximized over `G`.
    Active,
    /// Active sharing at `G = ACTIVE_REFERENCE_G`.
    ActiveReferenceG,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseThreshold {
    pub mode: NoiseMode,
    /// Midpoint of the final bracket.
    pub v_star: f64,
    pub bracket: (f64, f64),
}

impl NoiseThreshold {
    /// Half-width of the final bracket.
    pub fn residual(&self) -> f64 {
        0.5 * (self.bracket.1 - self.bracket.0)
    }
}

/// Evaluator of the optimal witness value(s) at visibility `v = √(V₁V₂)`,
/// with `V₁ = V₂ = v`. The optimal angles do not move with `v`, so active
/// values are refined from the noiseless optimum.
fn noise_evaluator(mode: NoiseMode) -> Result<impl Fn(f64) -> Result<f64>> {
    let (warm, joint_warm) = match mode {
        NoiseMode::Standard => ([0.0; 2], [0.0; 3]),
        _ => {
            let engine = engine_for(1.0)?;
            let reference = angles_of(&active_with(&engine, ACTIVE_REFERENCE_G, None)?);
            let peak = active_peak(&engine, [ACTIVE_REFERENCE_G, reference[0], reference[1]], 0.85, 0.97)?;
            let [t3, t5] = angles_of(&peak);
            (reference, [peak.record.g, t3, t5])
        }
    };
    Ok(move |v: f64| -> Result<f64> {
        let engine = engine_for(v)?;
        Ok(match mode {
            NoiseMode::Standard => standard_stationary(&engine, SearchOptions::default()).best_value,
            NoiseMode::Active => active_peak(&engine, joint_warm, 0.85, 0.97)?.record.r_m,
            NoiseMode::ActiveReferenceG => active_with(&engine, ACTIVE_REFERENCE_G, Some(warm))?.record.r_m,
        })
    })
}

/// Optimal witness value(s) at visibility `v`; see [`noise_threshold`].
pub fn noise_value(mode: NoiseMode, v: f64) -> Result<f64> {
    noise_evaluator(mode)?(v)
}

/// Smallest visibility at which the optimal witness value(s) exceed 3,
/// by bisection on `[0, 1]`.
pub fn noise_threshold(mode: NoiseMode) -> Result<NoiseThreshold> {
    let value = noise_evaluator(mode)?;
    if !value(1.0)?.gt(&CLASSICAL_BOUND) {
        return Err(Error::NonBracketing(format!("no violation at v = 1 in {mode:?} mode")));
    }
    let violates = |v: f64| value(v).is_ok_and(|r| r > CLASSICAL_BOUND);
    let bracket = bisect_indicator(violates, 0.0, 1.0, BISECTION_WIDTH)?;
    Ok(NoiseThreshold {
        mode,
        v_star: 0.5 * (bracket.0 + bracket.1),
        bracket,
    })
}
