use std::f64::consts::PI;

use fnn_core::analysis::closed_form_values;
use fnn_core::kgt::{correlators_from_marginal, kgt_from_correlators, kgt_values_with, KgtValues, CLASSICAL_BOUND};
use fnn_core::scenario::{run_pipeline_strong_charlie1, JointDistribution, JointSet};
use fnn_core::{ScenarioConfig, ScenarioEngine, Settings};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_angles(rng: &mut impl Rng) -> [f64; 6] {
    std::array::from_fn(|_| rng.gen_range(-PI..PI))
}

fn random_config(rng: &mut impl Rng) -> ScenarioConfig {
    let v1 = rng.gen_range(0.0..=1.0);
    let v2 = rng.gen_range(0.0..=1.0);
    ScenarioConfig::new(random_angles(rng), rng.gen_range(0.0..=1.0), v1, v2).unwrap()
}

fn values(config: &ScenarioConfig) -> KgtValues {
    kgt_values_with(&ScenarioEngine::for_config(config).unwrap(), config).unwrap()
}

#[test]
fn pipeline_is_the_theta2_even_part_of_the_closed_forms() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let c = random_config(&mut rng);
        let mut flipped = c.angles();
        flipped[1] = -flipped[1];
        let a = closed_form_values(&c).as_array();
        let b = closed_form_values(&c.with_angles(flipped).unwrap()).as_array();
        let p = values(&c).as_array();
        for k in 0..4 {
            let even = 0.5 * (a[k] + b[k]);
            assert!((p[k] - even).abs() <= 1e-9, "{k}: {} vs {even} at {c:?}", p[k]);
        }
    }
}

#[test]
fn closed_forms_agree_when_alice_second_axis_is_aligned() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for n in 0..200 {
        let mut c = random_config(&mut rng);
        let mut t = c.angles();
        t[1] = if n % 2 == 0 { 0.0 } else { -PI };
        c = c.with_angles(t).unwrap();
        let dev = values(&c).max_abs_diff(&closed_form_values(&c));
        assert!(dev <= 1e-9, "deviation {dev:e} at {c:?}");
    }
}

#[test]
fn distributions_are_normalized() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..50 {
        let c = random_config(&mut rng);
        let joints = ScenarioEngine::for_config(&c).unwrap().joint_set(&c).unwrap();
        for d in joints.iter() {
            assert!((d.total() - 1.0).abs() <= 1e-10);
            assert!(d.table().iter().all(|&p| (-1e-12..=1.0 + 1e-12).contains(&p)));
        }
        for m in [1, 2] {
            let set = joints.marginal_set(m).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    assert!((set.get(i, j).total() - 1.0).abs() <= 1e-10);
                }
            }
        }
    }
}

fn alice_bob(d: &JointDistribution) -> [f64; 6] {
    let mut p = [0.0; 6];
    for a in 0..2 {
        for b in 0..3 {
            for c1 in 0..2 {
                for c2 in 0..2 {
                    p[a * 3 + b] += d.get(a, b, c1, c2);
                }
            }
        }
    }
    p
}

fn charlie1(d: &JointDistribution) -> [f64; 2] {
    let mut p = [0.0; 2];
    for a in 0..2 {
        for b in 0..3 {
            for c1 in 0..2 {
                for c2 in 0..2 {
                    p[c1] += d.get(a, b, c1, c2);
                }
            }
        }
    }
    p
}

fn max_diff(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

#[test]
fn no_signaling() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..50 {
        let c = random_config(&mut rng);
        let joints: JointSet = ScenarioEngine::for_config(&c).unwrap().joint_set(&c).unwrap();
        for i in 0..2 {
            let reference = alice_bob(joints.get(Settings::new(i, 0, 0).unwrap()));
            for j1 in 0..2 {
                for j2 in 0..2 {
                    let p = alice_bob(joints.get(Settings::new(i, j1, j2).unwrap()));
                    assert!(max_diff(&p, &reference) <= 1e-10);
                }
            }
        }
        for j1 in 0..2 {
            let reference = charlie1(joints.get(Settings::new(0, j1, 0).unwrap()));
            for i in 0..2 {
                for j2 in 0..2 {
                    let p = charlie1(joints.get(Settings::new(i, j1, j2).unwrap()));
                    assert!(max_diff(&p, &reference) <= 1e-10);
                }
            }
        }
    }
}

#[test]
fn strong_limit_matches_projective_charlie1() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..20 {
        let c = random_config(&mut rng);
        let c = ScenarioConfig::new(c.angles(), 1.0, c.v1, c.v2).unwrap();
        let engine = ScenarioEngine::for_config(&c).unwrap();
        for s in Settings::all() {
            let weak = engine.joint(&c, s).unwrap();
            let strong = run_pipeline_strong_charlie1(&c, s).unwrap();
            assert!(max_diff(weak.table(), strong.table()) <= 1e-12);
        }
    }
}

#[test]
fn werner_visibility_scales_every_witness() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for _ in 0..50 {
        let noisy = random_config(&mut rng);
        let pure = ScenarioConfig::pure(noisy.angles(), noisy.g()).unwrap();
        let scale = noisy.v1 * noisy.v2;
        let (a, b) = (values(&noisy).as_array(), values(&pure).as_array());
        for k in 0..4 {
            assert!((a[k] - scale * b[k]).abs() <= 1e-10, "{k}: {} vs {}", a[k], scale * b[k]);
        }
    }
}

/// Joint table of a deterministic strategy: Alice answers `fa[i]`, Bob `b`,
/// the Charlies `f1[j1]` and `f2[j2]`.
fn deterministic(fa: [usize; 2], b: usize, f1: [usize; 2], f2: [usize; 2]) -> JointSet {
    let joints: Vec<JointDistribution> = Settings::all()
        .map(|s| {
            let mut t = [0.0; 24];
            t[((fa[s.i] * 3 + b) * 2 + f1[s.j1]) * 2 + f2[s.j2]] = 1.0;
            JointDistribution::from_table(s, t)
        })
        .collect();
    JointSet::from_joints(&joints).unwrap()
}

#[test]
fn deterministic_strategies_respect_the_classical_bound() {
    let funcs = [[0, 0], [0, 1], [1, 0], [1, 1]];
    let mut count = 0;
    let mut best = f64::NEG_INFINITY;
    for fa in funcs {
        for b in 0..3 {
            for f1 in funcs {
                for f2 in funcs {
                    let joints = deterministic(fa, b, f1, f2);
                    for m in [1, 2] {
                        let (cns, nsc) = kgt_from_correlators(&correlators_from_marginal(&joints.marginal_set(m).unwrap()));
                        assert!(cns <= CLASSICAL_BOUND + 1e-12 && nsc <= CLASSICAL_BOUND + 1e-12, "{fa:?} {b} {f1:?} {f2:?}");
                        best = best.max(cns).max(nsc);
                    }
                    count += 1;
                }
            }
        }
    }
    assert_eq!(count, 192);
    // The bound is tight.
    assert_eq!(best, CLASSICAL_BOUND);
}

#[test]
fn swapping_charlie_settings_exchanges_the_witnesses() {
    // Relabeling C₀ <-> C₁ maps R_C-NS to R_NS-C once Alice's first observable
    // is also negated (θ₁ -> θ₁ + π); the product terms vanish because every
    // one-body average of the pipeline is zero.
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..50 {
        let c = random_config(&mut rng);
        let [t1, t2, t3, t4, t5, t6] = c.angles();
        let swapped = c.with_angles([t1 + PI, t2, t4, t3, t6, t5]).unwrap();
        let (a, b) = (values(&c), values(&swapped));
        assert!((a.r_cns_1 - b.r_nsc_1).abs() <= 1e-10);
        assert!((a.r_nsc_1 - b.r_cns_1).abs() <= 1e-10);
        assert!((a.r_cns_2 - b.r_nsc_2).abs() <= 1e-10);
        assert!((a.r_nsc_2 - b.r_cns_2).abs() <= 1e-10);
    }
}

#[test]
fn evaluation_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let c = random_config(&mut rng);
    let first = values(&c).as_array().map(f64::to_bits);
    for _ in 0..3 {
        assert_eq!(values(&c).as_array().map(f64::to_bits), first);
    }
}
