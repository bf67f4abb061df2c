//! The extended bilocal measurement pipeline.
//!
//! Register order is (Alice, Bob-left, Bob-right, Charlie). Bob's incomplete
//! BSM acts on positions 1-2, Alice measures position 0 strongly, Charlie₁
//! weakly measures position 3 and hands it to Charlie₂ who measures it
//! strongly. All probabilities are exact traces.

use num_complex::Complex64;

use crate::error::{check_unit_interval, Error, Result};
use crate::linalg::{conjugate_product, kron, partial_trace, ComplexMatrix, DensityOperator};
use crate::states::{
    bsm_elements_pipeline_frame, identity2, observable, projector, weak_update_lifted, werner, ObservableAngle,
    WeakMeasurementParams,
};

/// Tolerance for the m = 1 marginal's independence of Charlie₂'s setting.
const NO_SIGNALING_TOL: f64 = 1e-12;

/// Full parameterization of one network run.
///
/// `theta[0..2]` are Alice's settings, `theta[2..4]` Charlie₁'s and
/// `theta[4..6]` Charlie₂'s.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub theta: [ObservableAngle; 6],
    pub weak: WeakMeasurementParams,
    pub v1: f64,
    pub v2: f64,
}

impl ScenarioConfig {
    pub fn new(theta: [f64; 6], g: f64, v1: f64, v2: f64) -> Result<Self> {
        let mut angles = [ObservableAngle::new(0.0)?; 6];
        for (slot, t) in angles.iter_mut().zip(theta) {
            *slot = ObservableAngle::new(t)?;
        }
        Ok(Self {
            theta: angles,
            weak: WeakMeasurementParams::from_precision(g)?,
            v1: check_unit_interval("v1", v1)?,
            v2: check_unit_interval("v2", v2)?,
        })
    }

    /// Noiseless sources.
    pub fn pure(theta: [f64; 6], g: f64) -> Result<Self> {
        Self::new(theta, g, 1.0, 1.0)
    }

    pub fn angles(&self) -> [f64; 6] {
        self.theta.map(ObservableAngle::radians)
    }

    pub fn g(&self) -> f64 {
        self.weak.precision()
    }

    pub fn f(&self) -> f64 {
        self.weak.quality()
    }

    pub fn with_angles(&self, theta: [f64; 6]) -> Result<Self> {
        Self::new(theta, self.g(), self.v1, self.v2)
    }
}

/// Setting indices `(i, j₁, j₂)` for Alice, Charlie₁ and Charlie₂.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Settings {
    pub i: usize,
    pub j1: usize,
    pub j2: usize,
}

impl Settings {
    pub fn new(i: usize, j1: usize, j2: usize) -> Result<Self> {
        for (name, v) in [("i", i), ("j1", j1), ("j2", j2)] {
            if v > 1 {
                return Err(Error::InvalidParameter {
                    name,
                    value: v as f64,
                    reason: "setting index must be 0 or 1",
                });
            }
        }
        Ok(Self { i, j1, j2 })
    }

    pub fn all() -> impl Iterator<Item = Settings> {
        (0..8).map(|k| Settings {
            i: k >> 2,
            j1: (k >> 1) & 1,
            j2: k & 1,
        })
    }
}

/// `P(a, b, c₁, c₂ | settings)` with `a, c₁, c₂ ∈ {0,1}` and `b ∈ {0,1,2}`.
#[derive(Clone, Debug, PartialEq)]
pub struct JointDistribution {
    pub settings: Settings,
    table: [f64; 24],
}

impl JointDistribution {
    pub fn from_table(settings: Settings, table: [f64; 24]) -> Self {
        Self { settings, table }
    }

    fn index(a: usize, b: usize, c1: usize, c2: usize) -> usize {
        ((a * 3 + b) * 2 + c1) * 2 + c2
    }

    pub fn get(&self, a: usize, b: usize, c1: usize, c2: usize) -> f64 {
        self.table[Self::index(a, b, c1, c2)]
    }

    pub fn table(&self) -> &[f64; 24] {
        &self.table
    }

    pub fn total(&self) -> f64 {
        self.table.iter().sum()
    }
}

/// `P(a, b, c_m | i, j)` for observer Charlie_m.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginalDistribution {
    pub observer: usize,
    pub i: usize,
    pub j: usize,
    table: [f64; 12],
}

impl MarginalDistribution {
    pub fn from_table(observer: usize, i: usize, j: usize, table: [f64; 12]) -> Self {
        Self { observer, i, j, table }
    }

    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.table[(a * 3 + b) * 2 + c]
    }

    pub fn table(&self) -> &[f64; 12] {
        &self.table
    }

    pub fn total(&self) -> f64 {
        self.table.iter().sum()
    }
}

/// Angle-independent prefix of the pipeline: the conditional Alice-Charlie
/// states after Bob's BSM, one per outcome `b`.
#[derive(Clone, Debug)]
pub struct ScenarioEngine {
    v1: f64,
    v2: f64,
    swapped: [DensityOperator; 3],
}

impl ScenarioEngine {
    pub fn new(v1: f64, v2: f64) -> Result<Self> {
        let rho_abc = werner(v1)?.tensor(&werner(v2)?);
        let id = identity2();
        let mut swapped = Vec::with_capacity(3);
        for el in bsm_elements_pipeline_frame() {
            let u = kron(&kron(&id, &el.projector), &id);
            let post = conjugate_product(&u, &rho_abc)?;
            swapped.push(partial_trace(&post, &[0, 3])?);
        }
        let swapped: [DensityOperator; 3] = swapped.try_into().expect("three outcomes");
        Ok(Self { v1, v2, swapped })
    }

    pub fn for_config(config: &ScenarioConfig) -> Result<Self> {
        Self::new(config.v1, config.v2)
    }

    pub fn visibilities(&self) -> (f64, f64) {
        (self.v1, self.v2)
    }

    /// Conditional (unnormalized) Alice-Charlie state for BSM outcome `b`.
    pub fn swapped_state(&self, b: usize) -> &DensityOperator {
        &self.swapped[b]
    }

    fn check_config(&self, config: &ScenarioConfig) -> Result<()> {
        if config.v1 != self.v1 || config.v2 != self.v2 {
            return Err(Error::InvalidParameter {
                name: "visibility",
                value: config.v1 * config.v2,
                reason: "config visibilities differ from the engine's sources",
            });
        }
        Ok(())
    }

    /// Joint distribution for one setting combination.
    ///
    /// Alice's projector is applied and her qubit traced out first, so both
    /// of Charlie's steps act on his 2x2 conditional state. This is exactly
    /// the register-level computation of [`Self::joint_reference`] with the
    /// trace reordered, and is what all analyses use.
    pub fn joint(&self, config: &ScenarioConfig, settings: Settings) -> Result<JointDistribution> {
        self.check_config(config)?;
        let proj = |t: ObservableAngle| -> Result<[Mat2; 2]> {
            let obs = observable(t);
            Ok([mat2(&projector(&obs, 0)?), mat2(&projector(&obs, 1)?)])
        };
        let alice = proj(config.theta[settings.i])?;
        let charlie1 = proj(config.theta[2 + settings.j1])?;
        let charlie2 = proj(config.theta[4 + settings.j2])?;
        let (g, f) = (config.weak.precision(), config.weak.quality());
        let (w_id, w_same, w_other) = (f / 2.0, (1.0 + g - f) / 2.0, (1.0 - g - f) / 2.0);

        let mut table = [0.0; 24];
        for (b, rho_ac) in self.swapped.iter().enumerate() {
            for (a, pa) in alice.iter().enumerate() {
                let sigma = charlie_conditional(rho_ac.matrix(), pa);
                let kept = [
                    sandwich(&charlie1[0], &sigma),
                    sandwich(&charlie1[1], &sigma),
                ];
                for c1 in 0..2 {
                    for (c2, q) in charlie2.iter().enumerate() {
                        let p = w_id * trace_product(q, &sigma)
                            + w_same * trace_product(q, &kept[c1])
                            + w_other * trace_product(q, &kept[1 - c1]);
                        table[JointDistribution::index(a, b, c1, c2)] = p;
                    }
                }
            }
        }
        Ok(JointDistribution { settings, table })
    }

    /// Register-level pipeline: Alice's projector, Charlie₁'s weak update and
    /// Charlie₂'s projector are each applied to the two-qubit Alice-Charlie
    /// state by conjugation, and the final trace recorded.
    pub fn joint_reference(&self, config: &ScenarioConfig, settings: Settings) -> Result<JointDistribution> {
        self.check_config(config)?;
        let id = identity2();
        let obs_a = observable(config.theta[settings.i]);
        let obs_c1 = observable(config.theta[2 + settings.j1]);
        let obs_c2 = observable(config.theta[4 + settings.j2]);

        let alice = [0, 1].map(|a| projector(&obs_a, a).map(|p| kron(&p, &id)));
        let charlie1 = [0, 1].map(|c| projector(&obs_c1, c).map(|p| kron(&id, &p)));
        let charlie2 = [0, 1].map(|c| projector(&obs_c2, c).map(|p| kron(&id, &p)));
        let [a0, a1] = alice;
        let alice = [a0?, a1?];
        let [c0, c1] = charlie1;
        let charlie1 = [c0?, c1?];
        let [d0, d1] = charlie2;
        let charlie2 = [d0?, d1?];

        let mut table = [0.0; 24];
        for (b, rho_ac) in self.swapped.iter().enumerate() {
            for (a, pa) in alice.iter().enumerate() {
                let after_alice = conjugate_product(pa, rho_ac)?;
                for c1 in 0..2 {
                    let after_c1 = weak_update_lifted(&after_alice, &charlie1[c1], &charlie1[1 - c1], config.weak);
                    for (c2, pc) in charlie2.iter().enumerate() {
                        let after_c2 = conjugate_product(pc, &after_c1)?;
                        table[JointDistribution::index(a, b, c1, c2)] = after_c2.trace();
                    }
                }
            }
        }
        Ok(JointDistribution { settings, table })
    }

    pub fn joint_set(&self, config: &ScenarioConfig) -> Result<JointSet> {
        let mut joints = Vec::with_capacity(8);
        for s in Settings::all() {
            joints.push(self.joint(config, s)?);
        }
        Ok(JointSet {
            joints: joints.try_into().expect("eight setting combinations"),
        })
    }
}

type Mat2 = [[Complex64; 2]; 2];

fn mat2(m: &ComplexMatrix) -> Mat2 {
    [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]]
}

/// `Tr_A[(P ⊗ I) ρ]` for a two-qubit `ρ` ordered (Alice, Charlie).
fn charlie_conditional(rho: &ComplexMatrix, p: &Mat2) -> Mat2 {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for (k, row) in out.iter_mut().enumerate() {
        for (l, entry) in row.iter_mut().enumerate() {
            for i in 0..2 {
                for j in 0..2 {
                    *entry += p[j][i] * rho[(2 * i + k, 2 * j + l)];
                }
            }
        }
    }
    out
}

fn mul2(x: &Mat2, y: &Mat2) -> Mat2 {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            *entry = x[i][0] * y[0][j] + x[i][1] * y[1][j];
        }
    }
    out
}

/// `P σ P` for a Hermitian projector `P`.
fn sandwich(p: &Mat2, sigma: &Mat2) -> Mat2 {
    mul2(&mul2(p, sigma), p)
}

/// `Re Tr[x y]`.
fn trace_product(x: &Mat2, y: &Mat2) -> f64 {
    (x[0][0] * y[0][0] + x[0][1] * y[1][0] + x[1][0] * y[0][1] + x[1][1] * y[1][1]).re
}

/// Runs the whole pipeline for one setting combination.
pub fn run_pipeline(config: &ScenarioConfig, i: usize, j1: usize, j2: usize) -> Result<JointDistribution> {
    ScenarioEngine::for_config(config)?.joint(config, Settings::new(i, j1, j2)?)
}

/// Joint distributions for all eight setting combinations of one config.
#[derive(Clone, Debug)]
pub struct JointSet {
    joints: [JointDistribution; 8],
}

impl JointSet {
    /// Collects one joint per setting combination; fails if any is missing.
    pub fn from_joints(joints: &[JointDistribution]) -> Result<Self> {
        let mut ordered = Vec::with_capacity(8);
        for s in Settings::all() {
            let found = joints
                .iter()
                .find(|d| d.settings == s)
                .ok_or_else(|| Error::MissingSettings(format!("{s:?}")))?;
            ordered.push(found.clone());
        }
        Ok(Self {
            joints: ordered.try_into().expect("eight setting combinations"),
        })
    }

    pub fn get(&self, s: Settings) -> &JointDistribution {
        &self.joints[s.i * 4 + s.j1 * 2 + s.j2]
    }

    pub fn iter(&self) -> impl Iterator<Item = &JointDistribution> {
        self.joints.iter()
    }

    /// Marginals for observer `m` at every `(i, j)`.
    pub fn marginal_set(&self, observer: usize) -> Result<MarginalSet> {
        let mut tables = Vec::with_capacity(4);
        for i in 0..2 {
            for j in 0..2 {
                let picked: Vec<JointDistribution> = match observer {
                    1 => vec![self.get(Settings { i, j1: j, j2: 0 }).clone()],
                    _ => vec![
                        self.get(Settings { i, j1: 0, j2: j }).clone(),
                        self.get(Settings { i, j1: 1, j2: j }).clone(),
                    ],
                };
                tables.push(marginal(&picked, observer)?);
            }
        }
        Ok(MarginalSet {
            observer,
            tables: tables.try_into().expect("four setting pairs"),
        })
    }
}

/// Marginals `P(a, b, c_m | i, j)` for every setting pair of one observer.
#[derive(Clone, Debug)]
pub struct MarginalSet {
    pub observer: usize,
    tables: [MarginalDistribution; 4],
}

impl MarginalSet {
    pub fn from_marginals(marginals: &[MarginalDistribution]) -> Result<Self> {
        let observer = marginals
            .first()
            .ok_or_else(|| Error::MissingSettings("no marginals supplied".into()))?
            .observer;
        let mut tables = Vec::with_capacity(4);
        for i in 0..2 {
            for j in 0..2 {
                let found = marginals
                    .iter()
                    .find(|m| m.i == i && m.j == j && m.observer == observer)
                    .ok_or_else(|| Error::MissingSettings(format!("observer {observer}, (i, j) = ({i}, {j})")))?;
                tables.push(found.clone());
            }
        }
        Ok(Self {
            observer,
            tables: tables.try_into().expect("four setting pairs"),
        })
    }

    pub fn get(&self, i: usize, j: usize) -> &MarginalDistribution {
        &self.tables[i * 2 + j]
    }
}

/// Alice-Bob-Charlie_m marginal.
///
/// For `m = 1` every supplied joint must share `(i, j₁)`; Charlie₂'s outcome
/// is summed out and any supplied `j₂` values must agree. For `m = 2` the
/// joints for `(i, 0, j₂)` and `(i, 1, j₂)` are required: Charlie₁'s outcome
/// is summed out and his two settings are averaged with weight 1/2, since he
/// forwards the qubit unbiasedly.
pub fn marginal(joints: &[JointDistribution], observer: usize) -> Result<MarginalDistribution> {
    let first = joints
        .first()
        .ok_or_else(|| Error::MissingSettings("no joint distributions supplied".into()))?;
    let i = first.settings.i;
    match observer {
        1 => {
            let j1 = first.settings.j1;
            let sum_out = |joint: &JointDistribution| {
                let mut t = [0.0; 12];
                for a in 0..2 {
                    for b in 0..3 {
                        for c1 in 0..2 {
                            t[(a * 3 + b) * 2 + c1] = joint.get(a, b, c1, 0) + joint.get(a, b, c1, 1);
                        }
                    }
                }
                t
            };
            let table = sum_out(first);
            for other in &joints[1..] {
                if other.settings.i != i || other.settings.j1 != j1 {
                    return Err(Error::MissingSettings(format!(
                        "observer 1 needs a common (i, j1) = ({i}, {j1}), got {:?}",
                        other.settings
                    )));
                }
                let dev = sum_out(other)
                    .iter()
                    .zip(&table)
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max);
                if dev > NO_SIGNALING_TOL {
                    return Err(Error::Signaling(dev));
                }
            }
            Ok(MarginalDistribution {
                observer,
                i,
                j: j1,
                table,
            })
        }
        2 => {
            let j2 = first.settings.j2;
            let find = |j1| {
                joints
                    .iter()
                    .find(|d| d.settings == Settings { i, j1, j2 })
                    .ok_or_else(|| Error::MissingSettings(format!("(i, j1, j2) = ({i}, {j1}, {j2})")))
            };
            let (d0, d1) = (find(0)?, find(1)?);
            let mut table = [0.0; 12];
            for a in 0..2 {
                for b in 0..3 {
                    for c2 in 0..2 {
                        let s0 = d0.get(a, b, 0, c2) + d0.get(a, b, 1, c2);
                        let s1 = d1.get(a, b, 0, c2) + d1.get(a, b, 1, c2);
                        table[(a * 3 + b) * 2 + c2] = 0.5 * (s0 + s1);
                    }
                }
            }
            Ok(MarginalDistribution {
                observer,
                i,
                j: j2,
                table,
            })
        }
        _ => Err(Error::InvalidParameter {
            name: "observer",
            value: observer as f64,
            reason: "observer must be 1 or 2",
        }),
    }
}

/// The Charlie₁ step replaced by strong projector conjugation; reference path
/// for the `G = 1` limit.
pub fn run_pipeline_strong_charlie1(config: &ScenarioConfig, settings: Settings) -> Result<JointDistribution> {
    let engine = ScenarioEngine::for_config(config)?;
    let id = identity2();
    let mut table = [0.0; 24];
    for b in 0..3 {
        for a in 0..2 {
            let pa = kron(&projector(&observable(config.theta[settings.i]), a)?, &id);
            let after_alice = conjugate_product(&pa, engine.swapped_state(b))?;
            for c1 in 0..2 {
                let p1 = kron(&id, &projector(&observable(config.theta[2 + settings.j1]), c1)?);
                let after_c1 = conjugate_product(&p1, &after_alice)?;
                for c2 in 0..2 {
                    let p2: ComplexMatrix = kron(&id, &projector(&observable(config.theta[4 + settings.j2]), c2)?);
                    table[JointDistribution::index(a, b, c1, c2)] = conjugate_product(&p2, &after_c1)?.trace();
                }
            }
        }
    }
    Ok(JointDistribution { settings, table })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn config(g: f64) -> ScenarioConfig {
        ScenarioConfig::pure([0.3, -1.1, 0.7, 2.0, -0.4, 1.3], g).unwrap()
    }

    #[test]
    fn reduced_path_matches_register_path() {
        for (k, g) in [0.0, 0.25, 0.8208, 1.0].into_iter().enumerate() {
            let t = k as f64;
            let c = ScenarioConfig::new([0.3 + t, -1.1, 0.7 * t, 2.0, -0.4, 1.3 - t], g, 0.9, 0.75).unwrap();
            let engine = ScenarioEngine::for_config(&c).unwrap();
            for s in Settings::all() {
                let fast = engine.joint(&c, s).unwrap();
                let slow = engine.joint_reference(&c, s).unwrap();
                for (x, y) in fast.table().iter().zip(slow.table()) {
                    assert!((x - y).abs() < 1e-12, "{s:?}: {x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn joint_is_normalized_and_in_range() {
        for g in [0.0, 0.37, 0.9, 1.0] {
            for s in Settings::all() {
                let d = run_pipeline(&config(g), s.i, s.j1, s.j2).unwrap();
                assert!((d.total() - 1.0).abs() < 1e-10);
                assert!(d.table().iter().all(|&p| (-1e-12..=1.0 + 1e-12).contains(&p)));
            }
        }
    }

    #[test]
    fn bsm_outcome_two_has_probability_half() {
        let d = run_pipeline(&config(0.6), 1, 0, 1).unwrap();
        let mut p = [0.0; 3];
        for a in 0..2 {
            for b in 0..3 {
                for c1 in 0..2 {
                    for c2 in 0..2 {
                        p[b] += d.get(a, b, c1, c2);
                    }
                }
            }
        }
        // Bob's pair is I/4, so P(b) = Tr(Π_b)/4.
        assert!((p[0] - 0.25).abs() < 1e-12);
        assert!((p[1] - 0.25).abs() < 1e-12);
        assert!((p[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn observer_one_marginal_ignores_charlie2_setting() {
        let c = config(0.7);
        let d0 = run_pipeline(&c, 0, 1, 0).unwrap();
        let d1 = run_pipeline(&c, 0, 1, 1).unwrap();
        let m = marginal(&[d0.clone(), d1.clone()], 1).unwrap();
        let m0 = marginal(&[d0], 1).unwrap();
        let m1 = marginal(&[d1], 1).unwrap();
        for k in 0..12 {
            assert!((m0.table()[k] - m1.table()[k]).abs() < 1e-12);
        }
        assert_eq!(m.j, 1);
    }

    #[test]
    fn uniform_joint_gives_uniform_marginal() {
        let mut joints = Vec::new();
        for j1 in 0..2 {
            joints.push(JointDistribution::from_table(Settings { i: 0, j1, j2: 1 }, [1.0 / 24.0; 24]));
        }
        for m in [1, 2] {
            let marg = marginal(&joints[..m], m).unwrap();
            assert!(marg.table().iter().all(|p| (p - 1.0 / 12.0).abs() < 1e-15));
        }
    }

    #[test]
    fn marginal_errors() {
        let d = JointDistribution::from_table(Settings { i: 0, j1: 0, j2: 0 }, [1.0 / 24.0; 24]);
        assert!(matches!(marginal(&[d.clone()], 2), Err(Error::MissingSettings(_))));
        assert!(matches!(marginal(&[], 1), Err(Error::MissingSettings(_))));
        assert!(marginal(&[d.clone()], 3).is_err());
        let mut skewed = [1.0 / 24.0; 24];
        skewed[0] += 0.01;
        skewed[1] -= 0.01;
        skewed[2] += 0.01;
        skewed[5] -= 0.01;
        let e = JointDistribution::from_table(Settings { i: 0, j1: 0, j2: 1 }, skewed);
        assert!(matches!(marginal(&[d, e], 1), Err(Error::Signaling(_))));
    }

    #[test]
    fn strong_limit_matches_projective_charlie1() {
        let c = config(1.0);
        for s in Settings::all() {
            let weak = run_pipeline(&c, s.i, s.j1, s.j2).unwrap();
            let strong = run_pipeline_strong_charlie1(&c, s).unwrap();
            for k in 0..24 {
                assert!((weak.table()[k] - strong.table()[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn engine_rejects_mismatched_visibility() {
        let engine = ScenarioEngine::new(0.9, 0.9).unwrap();
        assert!(engine.joint(&config(0.5), Settings::new(0, 0, 0).unwrap()).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(ScenarioConfig::new([0.0; 6], 1.2, 1.0, 1.0).is_err());
        assert!(ScenarioConfig::new([0.0; 6], 0.5, 1.0, -0.1).is_err());
        assert!(Settings::new(0, 2, 0).is_err());
        let c = ScenarioConfig::pure([PI, 0.0, 0.0, 0.0, 0.0, 0.0], 0.6).unwrap();
        assert_eq!(c.angles()[0], -PI);
        assert!((c.f() - 0.8).abs() < 1e-15);
    }
}
