//! KGT witness values: from pipeline distributions, and from the closed-form
//! trigonometric expressions used for cross-validation.

use crate::error::Result;
use crate::scenario::{MarginalDistribution, MarginalSet, ScenarioConfig, ScenarioEngine};

/// Bound of both KGT inequalities for correlations with a classical source.
pub const CLASSICAL_BOUND: f64 = 3.0;

/// Sign of outcome `b` in `B₀` (merged outcome counts -1).
const B0_SIGNS: [f64; 3] = [1.0, 1.0, -1.0];
/// Sign of outcome `b` in `B₁` (merged outcome ignored).
const B1_SIGNS: [f64; 3] = [1.0, -1.0, 0.0];

fn parity(x: usize) -> f64 {
    if x % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Every averaged term appearing in the two KGT expressions for one observer.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Correlators {
    /// `⟨A_i B₀ C_j⟩`, indexed `[i][j]`.
    pub abc_b0: [[f64; 2]; 2],
    /// `⟨A_i B₁ C_j⟩`, indexed `[i][j]`.
    pub abc_b1: [[f64; 2]; 2],
    pub a1: f64,
    pub b0: f64,
    /// `⟨C_j⟩`.
    pub c: [f64; 2],
    pub a1b0: f64,
    /// `⟨B₀ C_j⟩`.
    pub b0c: [f64; 2],
}

impl Correlators {
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.abc_b0
            .iter()
            .chain(&self.abc_b1)
            .flatten()
            .copied()
            .chain([self.a1, self.b0, self.c[0], self.c[1], self.a1b0, self.b0c[0], self.b0c[1]])
    }
}

fn three_body(m: &MarginalDistribution, signs: &[f64; 3]) -> f64 {
    let mut acc = 0.0;
    for a in 0..2 {
        for (b, s) in signs.iter().enumerate() {
            for c in 0..2 {
                acc += parity(a + c) * s * m.get(a, b, c);
            }
        }
    }
    acc
}

/// Sums `P(a, b, c)` weighted by `wa(a) · wb(b) · wc(c)`.
fn weighted(m: &MarginalDistribution, wa: impl Fn(usize) -> f64, wb: impl Fn(usize) -> f64, wc: impl Fn(usize) -> f64) -> f64 {
    let mut acc = 0.0;
    for a in 0..2 {
        for b in 0..3 {
            for c in 0..2 {
                acc += wa(a) * wb(b) * wc(c) * m.get(a, b, c);
            }
        }
    }
    acc
}

/// Three-body correlators use the signs `(+,+,-)` over `b` for `B₀` and
/// `(+,-)` over `b ∈ {0,1}` for `B₁`. The lower-order averages are read off
/// the table at `(i, j) = (1, 0)` for Alice's terms and `(0, j)` for the rest;
/// by no-signaling any other choice gives the same value.
pub fn correlators_from_marginal(set: &MarginalSet) -> Correlators {
    let mut out = Correlators::default();
    for i in 0..2 {
        for j in 0..2 {
            out.abc_b0[i][j] = three_body(set.get(i, j), &B0_SIGNS);
            out.abc_b1[i][j] = three_body(set.get(i, j), &B1_SIGNS);
        }
    }
    let one = |_| 1.0;
    let b0 = |b: usize| B0_SIGNS[b];
    let alice = set.get(1, 0);
    out.a1 = weighted(alice, parity, one, one);
    out.a1b0 = weighted(alice, parity, b0, one);
    out.b0 = weighted(set.get(0, 0), one, b0, one);
    for j in 0..2 {
        out.c[j] = weighted(set.get(0, j), one, one, parity);
        out.b0c[j] = weighted(set.get(0, j), one, b0, parity);
    }
    out
}

/// Like [`correlators_from_marginal`] from a loose list of marginals; fails
/// if any `(i, j)` pair is missing.
pub fn correlators_from_marginals(marginals: &[MarginalDistribution]) -> Result<Correlators> {
    Ok(correlators_from_marginal(&MarginalSet::from_marginals(marginals)?))
}

/// `(R_C-NS, R_NS-C)` evaluated from a correlator set.
pub fn kgt_from_correlators(k: &Correlators) -> (f64, f64) {
    let [[_, _], [a1c0, a1c1]] = k.abc_b0;
    let [[a0c0, a0c1], [_, _]] = k.abc_b1;
    let r_cns = 2.0 * a0c0 - 2.0 * a0c1 + 2.0 * a1c0 + a1c1 - k.b0 + k.c[1] * (k.a1b0 + k.b0c[0] - k.c[0]);
    let r_nsc = 2.0 * a0c0 - 2.0 * a0c1 + a1c0 + 2.0 * a1c1 - k.b0
        + k.a1 * k.a1b0
        + k.a1 * k.b0c[1]
        + k.a1 * k.c[0]
        - k.a1 * k.c[1]
        - k.a1 * k.a1;
    (r_cns, r_nsc)
}

/// The four witness values of one configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KgtValues {
    pub r_cns_1: f64,
    pub r_nsc_1: f64,
    pub r_cns_2: f64,
    pub r_nsc_2: f64,
}

impl KgtValues {
    pub fn as_array(&self) -> [f64; 4] {
        [self.r_cns_1, self.r_nsc_1, self.r_cns_2, self.r_nsc_2]
    }

    /// `min(R¹_C-NS, R¹_NS-C)`.
    pub fn r1(&self) -> f64 {
        self.r_cns_1.min(self.r_nsc_1)
    }

    /// `min(R²_C-NS, R²_NS-C)`.
    pub fn r2(&self) -> f64 {
        self.r_cns_2.min(self.r_nsc_2)
    }

    pub fn min_all(&self) -> f64 {
        self.r1().min(self.r2())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.as_array()
            .iter()
            .zip(other.as_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Pipeline evaluation of all four witnesses with a prepared engine.
pub fn kgt_values_with(engine: &ScenarioEngine, config: &ScenarioConfig) -> Result<KgtValues> {
    let joints = engine.joint_set(config)?;
    let (r_cns_1, r_nsc_1) = kgt_from_correlators(&correlators_from_marginal(&joints.marginal_set(1)?));
    let (r_cns_2, r_nsc_2) = kgt_from_correlators(&correlators_from_marginal(&joints.marginal_set(2)?));
    Ok(KgtValues {
        r_cns_1,
        r_nsc_1,
        r_cns_2,
        r_nsc_2,
    })
}

pub fn kgt_values(config: &ScenarioConfig) -> Result<KgtValues> {
    kgt_values_with(&ScenarioEngine::for_config(config)?, config)
}

/// Closed-form `(R¹_C-NS, R¹_NS-C)`, scaled by `G` and `V₁V₂`.
pub fn closed_form_r1(config: &ScenarioConfig) -> (f64, f64) {
    let [t1, t2, t3, t4, _, _] = config.angles();
    let scale = config.g() * config.v1 * config.v2;
    let (s1, s2) = (t1.sin(), t2.sin());
    let c2 = t2.cos();
    let shared = s1 * (t3.sin() - t4.sin());
    let cns = c2 * (2.0 * t3.cos() + t4.cos()) + shared - 0.5 * s2 * (2.0 * t3.sin() + t4.sin());
    let nsc = c2 * (t3.cos() + 2.0 * t4.cos()) + shared - 0.5 * s2 * (t3.sin() + 2.0 * t4.sin());
    (scale * cns, scale * nsc)
}

/// Closed-form `(R²_C-NS, R²_NS-C)`, scaled by `V₁V₂`.
///
/// The two expressions differ only in which of Charlie₂'s settings carries the
/// doubled weight: `w5 = 2, w6 = 1` for C-NS and the reverse for NS-C.
pub fn closed_form_r2(config: &ScenarioConfig) -> (f64, f64) {
    let [t1, t2, t3, t4, t5, t6] = config.angles();
    let f = config.f();
    let (p, q) = (1.0 + f, -1.0 + f);
    let s1 = t1.sin();
    let cos = f64::cos;
    let sin = f64::sin;

    // Cosine block for Charlie₂ angle `t` with weight `w`.
    let block = |t: f64, w: f64| {
        w * (2.0 * p * cos(t2 - t)
            - 3.0 * q * cos(t2 + 2.0 * t3 - t)
            - 3.0 * q * cos(t2 + 2.0 * t4 - t)
            + 6.0 * p * cos(t2 + t)
            - q * (cos(t2 - 2.0 * t3 + t) + cos(t2 - 2.0 * t4 + t)))
    };
    let sine = -4.0 * q * s1 * sin(2.0 * t3 - t5) - 4.0 * q * s1 * sin(2.0 * t4 - t5)
        + 8.0 * p * s1 * sin(t5)
        + 4.0 * q * s1 * sin(2.0 * t3 - t6)
        + 4.0 * q * s1 * sin(2.0 * t4 - t6)
        - 8.0 * p * s1 * sin(t6);

    let scale = config.v1 * config.v2 / 16.0;
    let cns = scale * (block(t5, 2.0) + block(t6, 1.0) + sine);
    let nsc = scale * (block(t5, 1.0) + block(t6, 2.0) + sine);
    (cns, nsc)
}

/// `K` and `T` of the reduced Alice-Bob-Charlie₂ witness under
/// `θ₁ = π/2, θ₂ = 0, θ₄ = -θ₃, θ₆ = -θ₅`, where both witnesses equal
/// `K cos θ₅ + T sin θ₅`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosedFormCoefficients {
    pub k: f64,
    pub t: f64,
}

impl ClosedFormCoefficients {
    pub fn new(f: f64, theta3: f64) -> Self {
        let c = (2.0 * theta3).cos();
        Self {
            k: 1.5 * (1.0 + f - (-1.0 + f) * c),
            t: 1.0 + f + (-1.0 + f) * c,
        }
    }

    pub fn reduced(&self, theta5: f64) -> f64 {
        self.k * theta5.cos() + self.t * theta5.sin()
    }

    /// `√(K² + T²)`.
    pub fn bound(&self) -> f64 {
        self.k.hypot(self.t)
    }

    /// `arccos(K / √(K² + T²))`, the θ₅ attaining the bound when `T ≥ 0`.
    pub fn optimal_theta5(&self) -> f64 {
        (self.k / self.bound()).clamp(-1.0, 1.0).acos()
    }
}
