//! States and measurement elements of the extended bilocal scenario.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;

use crate::error::{check_unit_interval, Error, Result};
use crate::linalg::{kron, ComplexMatrix, DensityOperator, C_ZERO};

const INVOLUTION_TOL: f64 = 1e-12;
const POINTER_TOL: f64 = 1e-12;

pub fn identity2() -> ComplexMatrix {
    ComplexMatrix::identity(2)
}

pub fn sigma_x() -> ComplexMatrix {
    ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).expect("static shape")
}

pub fn sigma_z() -> ComplexMatrix {
    ComplexMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, -1.0]).expect("static shape")
}

pub fn hadamard() -> ComplexMatrix {
    let h = FRAC_1_SQRT_2;
    ComplexMatrix::from_real(2, 2, &[h, h, h, -h]).expect("static shape")
}

/// Measurement direction in the x-z plane, stored in radians and
/// normalized into `[-π, π)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct ObservableAngle(f64);

impl ObservableAngle {
    pub fn new(theta: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::InvalidParameter {
                name: "theta",
                value: theta,
                reason: "angle must be finite",
            });
        }
        let mut t = (theta + PI).rem_euclid(2.0 * PI) - PI;
        if t >= PI {
            t -= 2.0 * PI;
        }
        Ok(Self(t))
    }

    pub fn radians(self) -> f64 {
        self.0
    }
}

/// Precision factor `g` and quality factor `f` of an optimal-pointer weak
/// measurement (`f² + g² = 1`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeakMeasurementParams {
    g: f64,
    f: f64,
}

impl WeakMeasurementParams {
    pub fn from_precision(g: f64) -> Result<Self> {
        let g = check_unit_interval("g", g)?;
        Ok(Self {
            g,
            f: (1.0 - g * g).max(0.0).sqrt(),
        })
    }

    pub fn new(g: f64, f: f64) -> Result<Self> {
        let g = check_unit_interval("g", g)?;
        let f = check_unit_interval("f", f)?;
        if (f * f + g * g - 1.0).abs() > POINTER_TOL {
            return Err(Error::InvalidParameter {
                name: "f",
                value: f,
                reason: "optimal pointer requires f^2 + g^2 = 1",
            });
        }
        Ok(Self { g, f })
    }

    pub fn precision(&self) -> f64 {
        self.g
    }

    pub fn quality(&self) -> f64 {
        self.f
    }
}

/// One outcome of Bob's incomplete Bell-state measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct BsmElement {
    pub label: usize,
    pub projector: ComplexMatrix,
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub fn phi_plus() -> [Complex64; 4] {
    [c(FRAC_1_SQRT_2), C_ZERO, C_ZERO, c(FRAC_1_SQRT_2)]
}

pub fn phi_minus() -> [Complex64; 4] {
    [c(FRAC_1_SQRT_2), C_ZERO, C_ZERO, c(-FRAC_1_SQRT_2)]
}

pub fn psi_plus() -> [Complex64; 4] {
    [C_ZERO, c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2), C_ZERO]
}

pub fn psi_minus() -> [Complex64; 4] {
    [C_ZERO, c(FRAC_1_SQRT_2), c(-FRAC_1_SQRT_2), C_ZERO]
}

/// `|ψ⁻⟩⟨ψ⁻|` on two qubits.
pub fn singlet() -> DensityOperator {
    DensityOperator::new(ComplexMatrix::projector_onto(&psi_minus()), vec![2, 2])
        .expect("singlet is a valid state")
}

/// `v |ψ⁻⟩⟨ψ⁻| + (1 - v)/4 · I`.
pub fn werner(v: f64) -> Result<DensityOperator> {
    let v = check_unit_interval("visibility", v)?;
    let noise = ComplexMatrix::identity(4).scale((1.0 - v) / 4.0);
    let m = &ComplexMatrix::projector_onto(&psi_minus()).scale(v) + &noise;
    DensityOperator::new(m, vec![2, 2])
}

/// `cos θ σx + sin θ σz`.
pub fn observable(angle: ObservableAngle) -> ComplexMatrix {
    let (s, co) = angle.radians().sin_cos();
    ComplexMatrix::from_real(2, 2, &[s, co, co, -s]).expect("static shape")
}

/// `(I + (-1)^outcome · obs) / 2` for a dichotomic observable.
pub fn projector(obs: &ComplexMatrix, outcome: usize) -> Result<ComplexMatrix> {
    if outcome > 1 {
        return Err(Error::InvalidParameter {
            name: "outcome",
            value: outcome as f64,
            reason: "dichotomic outcomes are 0 or 1",
        });
    }
    let n = obs.rows();
    if !obs.is_square() {
        return Err(Error::DimensionMismatch {
            expected: "square observable".into(),
            found: format!("{}x{}", obs.rows(), obs.cols()),
        });
    }
    let herm = obs.hermitian_deviation();
    if herm > INVOLUTION_TOL {
        return Err(Error::NotHermitian(herm));
    }
    let id = ComplexMatrix::identity(n);
    let dev = (obs * obs).max_abs_diff(&id);
    if dev > INVOLUTION_TOL {
        return Err(Error::NotInvolutive(dev));
    }
    let sign = if outcome == 0 { 0.5 } else { -0.5 };
    Ok(&id.scale(0.5) + &obs.scale(sign))
}

/// Bob's three-outcome measurement: `b = 0 → |φ⁺⟩`, `b = 1 → |φ⁻⟩`,
/// `b = 2 → {|ψ⁺⟩, |ψ⁻⟩}`.
pub fn bsm_elements() -> [BsmElement; 3] {
    let merged = &ComplexMatrix::projector_onto(&psi_plus()) + &ComplexMatrix::projector_onto(&psi_minus());
    [
        BsmElement {
            label: 0,
            projector: ComplexMatrix::projector_onto(&phi_plus()),
        },
        BsmElement {
            label: 1,
            projector: ComplexMatrix::projector_onto(&phi_minus()),
        },
        BsmElement {
            label: 2,
            projector: merged,
        },
    ]
}

/// The incomplete BSM as applied by the scenario pipeline: the elements of
/// [`bsm_elements`] expressed in the σx eigenbasis of both of Bob's qubits,
/// `(H⊗H) Π_b (H⊗H)`, i.e. `|φ⁺⟩`, `|ψ⁺⟩` and the merged pair `{|φ⁻⟩, |ψ⁻⟩}`.
///
/// With observables `cos θ σx + sin θ σz`, this frame makes `B₀` correlate
/// the σx components of Alice and Charlie, which is what the closed-form
/// witness expressions assume.
pub fn bsm_elements_pipeline_frame() -> [BsmElement; 3] {
    let hh = kron(&hadamard(), &hadamard());
    bsm_elements().map(|el| BsmElement {
        label: el.label,
        projector: &(&hh * &el.projector) * &hh,
    })
}

/// Unnormalized post-measurement state of Charlie₁'s optimal-pointer weak
/// measurement of `obs` (acting on the last subsystem of `rho`) with outcome
/// `outcome`:
///
/// `F/2 ρ + (1 + G - F)/2 Π^c ρ Π^c + (1 - G - F)/2 Π^{1-c} ρ Π^{1-c}`.
///
/// This is the Kraus map `K ρ K†` with `K = √((1+G)/2) Π^c + √((1-G)/2) Π^{1-c}`,
/// so the result stays positive even though the last weight is ≤ 0 whenever
/// `F² + G² = 1`. Its trace is the outcome probability.
pub fn weak_update(
    rho: &DensityOperator,
    obs: &ComplexMatrix,
    outcome: usize,
    params: WeakMeasurementParams,
) -> Result<DensityOperator> {
    let dims = rho.dims();
    let last = *dims.last().expect("nonempty register");
    if obs.rows() != last {
        return Err(Error::DimensionMismatch {
            expected: format!("{last}x{last} observable on the last subsystem"),
            found: format!("{}x{}", obs.rows(), obs.cols()),
        });
    }
    let same = kron(&ComplexMatrix::identity(rho.dim() / last), &projector(obs, outcome)?);
    let other = kron(&ComplexMatrix::identity(rho.dim() / last), &projector(obs, 1 - outcome)?);
    Ok(weak_update_lifted(rho, &same, &other, params))
}

/// [`weak_update`] with the outcome projectors already lifted to the full register.
pub(crate) fn weak_update_lifted(
    rho: &DensityOperator,
    same: &ComplexMatrix,
    other: &ComplexMatrix,
    params: WeakMeasurementParams,
) -> DensityOperator {
    let (g, f) = (params.g, params.f);
    // Kraus weights (1 ± G)/2 must be nonnegative.
    assert!((-1.0..=1.0).contains(&g), "invalid precision factor {g}");
    let conj = |u: &ComplexMatrix| &(u * rho.matrix()) * u;
    let m = &(&rho.matrix().scale(f / 2.0) + &conj(same).scale((1.0 + g - f) / 2.0))
        + &conj(other).scale((1.0 - g - f) / 2.0);
    DensityOperator::with_dims(m, rho.dims().to_vec()).expect("shape preserved")
}

/// Charlie's strong measurement on the last subsystem.
pub fn strong_update(rho: &DensityOperator, obs: &ComplexMatrix, outcome: usize) -> Result<DensityOperator> {
    let last = *rho.dims().last().expect("nonempty register");
    let u = kron(&ComplexMatrix::identity(rho.dim() / last), &projector(obs, outcome)?);
    crate::linalg::conjugate_product(&u, rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::conjugate_product;
    use crate::linalg::partial_trace;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn angle(t: f64) -> ObservableAngle {
        ObservableAngle::new(t).unwrap()
    }

    #[test]
    fn angle_normalization() {
        assert_eq!(angle(PI).radians(), -PI);
        assert!((angle(3.0 * PI / 2.0).radians() + PI / 2.0).abs() < 1e-15);
        assert!((angle(-0.3).radians() + 0.3).abs() < 1e-15);
        assert!(ObservableAngle::new(f64::INFINITY).is_err());
    }

    #[test]
    fn singlet_correlations() {
        let s = singlet();
        let zz = kron(&sigma_z(), &sigma_z());
        let xx = kron(&sigma_x(), &sigma_x());
        assert!((s.expectation(&zz).unwrap() + 1.0).abs() < 1e-12);
        assert!((s.expectation(&xx).unwrap() + 1.0).abs() < 1e-12);
        assert!((s.purity() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn werner_limits_and_spectrum() {
        assert!(werner(1.0).unwrap().matrix().approx_eq(singlet().matrix(), 1e-15));
        assert!(werner(0.0)
            .unwrap()
            .matrix()
            .approx_eq(&ComplexMatrix::identity(4).scale(0.25), 1e-15));
        let e = werner(0.5).unwrap().eigenvalues().unwrap();
        let expected = [0.125, 0.125, 0.125, 0.625];
        for (a, b) in e.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{e:?}");
        }
        assert!(werner(1.5).is_err());
        assert!(werner(-0.1).is_err());
    }

    #[test]
    fn werner_grid_is_valid() {
        for k in 0..=100 {
            let w = werner(k as f64 / 100.0).unwrap();
            assert!((w.trace() - 1.0).abs() < 1e-12);
            assert!(w.eigenvalues().unwrap()[0] >= -1e-12);
        }
    }

    #[test]
    fn observable_axes_and_involution() {
        assert!(observable(angle(0.0)).approx_eq(&sigma_x(), 1e-15));
        assert!(observable(angle(PI / 2.0)).approx_eq(&sigma_z(), 1e-15));
        for k in 0..50 {
            let o = observable(angle(-PI + k as f64 * 0.13));
            assert!((&o * &o).approx_eq(&identity2(), 1e-12));
            let e = o.hermitian_eigenvalues().unwrap();
            assert!((e[0] + 1.0).abs() < 1e-12 && (e[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn projectors() {
        let p0 = projector(&sigma_z(), 0).unwrap();
        let p1 = projector(&sigma_z(), 1).unwrap();
        assert!(p0.approx_eq(&ComplexMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, 0.0]).unwrap(), 0.0));
        assert!(p1.approx_eq(&ComplexMatrix::from_real(2, 2, &[0.0, 0.0, 0.0, 1.0]).unwrap(), 0.0));
        let px = projector(&sigma_x(), 0).unwrap();
        assert!(px.entries().iter().all(|z| (z - 0.5).norm() < 1e-15));
        assert!(projector(&ComplexMatrix::identity(2).scale(2.0), 0).is_err());
        assert!(projector(&sigma_x(), 2).is_err());
    }

    #[test]
    fn projector_pairs_are_orthogonal_and_complete() {
        for k in 0..64 {
            let o = observable(angle(-PI + k as f64 * 2.0 * PI / 64.0));
            let p0 = projector(&o, 0).unwrap();
            let p1 = projector(&o, 1).unwrap();
            assert!((&p0 * &p1).approx_eq(&ComplexMatrix::zeros(2, 2), 1e-12));
            assert!((&p0 + &p1).approx_eq(&identity2(), 1e-12));
            assert!((&p0 * &p0).approx_eq(&p0, 1e-12));
        }
    }

    fn check_bsm(elements: &[BsmElement; 3]) {
        let sum = elements
            .iter()
            .fold(ComplexMatrix::zeros(4, 4), |acc, el| &acc + &el.projector);
        assert!(sum.approx_eq(&ComplexMatrix::identity(4), 1e-12));
        for (b, el) in elements.iter().enumerate() {
            assert_eq!(el.label, b);
            assert!((&el.projector * &el.projector).approx_eq(&el.projector, 1e-12));
            let rank = el.projector.trace().re.round() as usize;
            assert_eq!(rank, if b == 2 { 2 } else { 1 });
            for other in &elements[b + 1..] {
                assert!((&el.projector * &other.projector).approx_eq(&ComplexMatrix::zeros(4, 4), 1e-12));
            }
        }
    }

    #[test]
    fn bsm_elements_are_a_projective_measurement() {
        check_bsm(&bsm_elements());
        check_bsm(&bsm_elements_pipeline_frame());
    }

    #[test]
    fn bsm_labels() {
        let els = bsm_elements();
        let phi = phi_plus();
        let applied: Vec<Complex64> = (0..4)
            .map(|i| (0..4).map(|j| els[0].projector[(i, j)] * phi[j]).sum())
            .collect();
        for (a, b) in applied.iter().zip(phi) {
            assert!((a - b).norm() < 1e-15);
        }
        assert!((els[2].projector.trace().re - 2.0).abs() < 1e-15);
        assert!(els[1].projector.approx_eq(&ComplexMatrix::projector_onto(&phi_minus()), 1e-15));

        let rotated = bsm_elements_pipeline_frame();
        assert!(rotated[0].projector.approx_eq(&ComplexMatrix::projector_onto(&phi_plus()), 1e-15));
        assert!(rotated[1].projector.approx_eq(&ComplexMatrix::projector_onto(&psi_plus()), 1e-15));
        let merged = &ComplexMatrix::projector_onto(&phi_minus()) + &ComplexMatrix::projector_onto(&psi_minus());
        assert!(rotated[2].projector.approx_eq(&merged, 1e-15));
    }

    #[test]
    fn bsm_on_singlet_pair_trace() {
        // Project qubits 2-3 of singlet⊗singlet onto |Φ⁺⟩; the full trace is 1/4.
        let rho = singlet().tensor(&singlet());
        let u = kron(
            &kron(&identity2(), &ComplexMatrix::projector_onto(&phi_plus())),
            &identity2(),
        );
        let out = conjugate_product(&u, &rho).unwrap();
        assert!((out.trace() - 0.25).abs() < 1e-12);
        let ac = partial_trace(&out, &[0, 3]).unwrap();
        assert!((ac.trace() - 0.25).abs() < 1e-12);
    }

    fn random_state(rng: &mut ChaCha8Rng) -> DensityOperator {
        // A A† / Tr(A A†) for a random complex 4x4 A.
        let data: Vec<Complex64> = (0..16)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let a = ComplexMatrix::new(4, 4, data).unwrap();
        let m = &a * &a.adjoint();
        let tr = m.trace().re;
        DensityOperator::new(m.scale(1.0 / tr), vec![2, 2]).unwrap()
    }

    #[test]
    fn weak_update_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let strong = WeakMeasurementParams::from_precision(1.0).unwrap();
        let blind = WeakMeasurementParams::from_precision(0.0).unwrap();
        for _ in 0..100 {
            let rho = random_state(&mut rng);
            let obs = observable(angle(rng.gen_range(-PI..PI)));
            for c in 0..2 {
                let w = weak_update(&rho, &obs, c, strong).unwrap();
                let s = strong_update(&rho, &obs, c).unwrap();
                assert!(w.matrix().approx_eq(s.matrix(), 1e-12));
                let b = weak_update(&rho, &obs, c, blind).unwrap();
                assert!(b.matrix().approx_eq(&rho.matrix().scale(0.5), 1e-12));
            }
        }
    }

    #[test]
    fn weak_update_matches_kraus_form_and_preserves_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let rho = random_state(&mut rng);
            let obs = observable(angle(rng.gen_range(-PI..PI)));
            let params = WeakMeasurementParams::from_precision(rng.gen_range(0.0..1.0)).unwrap();
            let g = params.precision();
            let mut total = 0.0;
            for c in 0..2 {
                let w = weak_update(&rho, &obs, c, params).unwrap();
                let k = &kron(&identity2(), &projector(&obs, c).unwrap()).scale(((1.0 + g) / 2.0).sqrt())
                    + &kron(&identity2(), &projector(&obs, 1 - c).unwrap()).scale(((1.0 - g) / 2.0).sqrt());
                let kraus = conjugate_product(&k, &rho).unwrap();
                assert!(w.matrix().approx_eq(kraus.matrix(), 1e-12));
                assert!(w.eigenvalues().unwrap()[0] > -1e-12);
                total += w.trace();
            }
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn weak_update_on_maximally_mixed_state() {
        let rho = DensityOperator::new(ComplexMatrix::identity(4).scale(0.25), vec![2, 2]).unwrap();
        for &g in &[0.0, 0.3, 0.8, 1.0] {
            let p = WeakMeasurementParams::from_precision(g).unwrap();
            for c in 0..2 {
                let w = weak_update(&rho, &observable(angle(0.7)), c, p).unwrap();
                assert!((w.trace() - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pointer_params() {
        let p = WeakMeasurementParams::from_precision(0.6).unwrap();
        assert!((p.quality() - 0.8).abs() < 1e-15);
        assert!(WeakMeasurementParams::new(0.6, 0.8).is_ok());
        assert!(WeakMeasurementParams::new(0.6, 0.7).is_err());
        assert!(WeakMeasurementParams::from_precision(1.1).is_err());
    }
}
