use super::*;
use crate::gates::appe_gate;
use crate::geometry::{canonical_path, initial_state, InitialKind, PathKind};
use crate::influence::{influence_norm, Circuit, GateField};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(s: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(s)
}

fn du_circuit(p: f64, kind: InitialKind, seed: u64) -> Circuit {
    let m = initial_state(kind, 2, &mut rng(seed)).unwrap();
    Circuit::new(GateField::uniform(appe_gate(p).unwrap()).unwrap(), m).unwrap()
}

fn haar_circuit(seed: u64) -> Circuit {
    let m = initial_state(InitialKind::Random, 2, &mut rng(seed + 500)).unwrap();
    Circuit::new(GateField::haar(2, seed), m).unwrap()
}

fn left(circ: &Circuit, path: &str) -> (CircuitSpec, InfluenceState) {
    let spec = CircuitSpec::new(circ.clone(), path.parse().unwrap());
    let s = build_left_influence(&spec).unwrap();
    (spec, s)
}

fn sp(v: Vec<f64>) -> SchmidtSpectrum {
    let n = v.len();
    SchmidtSpectrum::from_weights(v, 1, n + 1).unwrap()
}

#[test]
fn entropy_of_flat_and_pure_spectra() {
    let flat = sp(vec![0.25; 4]);
    for a in [0.0, 0.5, 1.0, 2.0, 3.0, f64::INFINITY] {
        assert!((entropy(&flat, a).unwrap() - 4f64.ln()).abs() < 1e-12);
        assert!(entropy(&sp(vec![1.0]), a).unwrap().abs() < 1e-15);
    }
    assert!(entropy(&flat, -1.0).is_err());
}

#[test]
fn renyi_brackets_von_neumann() {
    let mut r = rng(1);
    for _ in 0..20 {
        let w: Vec<f64> = (0..16).map(|_| rand::Rng::random::<f64>(&mut r)).collect();
        let s = sp(w);
        let vn = entropy(&s, 1.0).unwrap();
        let (lo, hi) = (entropy(&s, 1.0 + 1e-6).unwrap(), entropy(&s, 1.0 - 1e-6).unwrap());
        assert!(lo <= vn + 1e-12 && vn <= hi + 1e-12);
        assert!(hi - lo < 1e-4);
    }
}

proptest! {
    #[test]
    fn renyi_is_monotone_in_alpha(w in proptest::collection::vec(0.001f64..1.0, 2..20)) {
        let s = sp(w);
        let vals: Vec<f64> = [0.0, 0.5, 1.0, 2.0, 3.0, f64::INFINITY].iter().map(|&a| entropy(&s, a).unwrap()).collect();
        for pair in vals.windows(2) {
            prop_assert!(pair[1] <= pair[0] + 1e-12);
        }
    }

    #[test]
    fn merging_schmidt_values_lowers_entropy(w in proptest::collection::vec(0.001f64..1.0, 3..20), i in 0usize..100, j in 0usize..100) {
        let (i, j) = (i % w.len(), j % w.len());
        prop_assume!(i != j);
        let mut merged = w.clone();
        merged[i] += merged[j];
        merged.remove(j);
        for a in [1.0, 2.0, f64::INFINITY] {
            prop_assert!(entropy(&sp(merged.clone()), a).unwrap() <= entropy(&sp(w.clone()), a).unwrap() + 1e-12);
        }
    }
}

#[test]
fn spectrum_matches_reduced_density_matrix() {
    let (_, s) = left(&haar_circuit(3), "+-+-");
    for k in 1..4 {
        let spec = schmidt_spectrum(&s, Cut::new(k, 4).unwrap()).unwrap();
        let m = s.matrix(k);
        let rho = &m * m.adjoint();
        let tr = linalg::trace(&rho).re;
        let ev = linalg::hermitian_eigenvalues(&rho).unwrap();
        for (a, b) in spec.values.iter().zip(&ev) {
            assert!((a - b / tr).abs() < 1e-10);
        }
        let sum: f64 = spec.values.iter().sum();
        assert!((sum - 1.0).abs() < 1e-10);
        // The transposed reshape has the same nonzero spectrum.
        let sv = linalg::singular_values(&m.transpose().to_owned()).unwrap();
        let z: f64 = sv.iter().map(|x| x * x).sum();
        for (a, b) in spec.values.iter().zip(&sv) {
            assert!((a - b * b / z).abs() < 1e-12);
        }
    }
}

#[test]
fn solvable_states_carry_no_temporal_entanglement() {
    let circ = du_circuit(0.6, InitialKind::Unitary, 2);
    let (_, s) = left(&circ, "++-+");
    for a in [1.0, 2.0, f64::INFINITY] {
        assert!(max_entropy_over_cuts(&s, a).unwrap().value < 1e-8);
    }
}

#[test]
fn reduction_preserves_every_cut_spectrum() {
    for field in [
        GateField::uniform(appe_gate(0.53).unwrap()).unwrap(),
        GateField::dressed_du(crate::gates::du_gate(0.53, 2).unwrap(), 4).unwrap(),
    ] {
        let m = initial_state(InitialKind::Random, 2, &mut rng(5)).unwrap();
        let circ = Circuit::new(field, m).unwrap();
        for path in ["+-+-+-", "++-++-", "-+++--"] {
            let (spec, s) = left(&circ, path);
            for k in 1..6 {
                let r = du_reduce(&spec, k).unwrap();
                assert_eq!(r.state.legs(), r.tau_a + 6 - k);
                let before = schmidt_spectrum(&s, Cut::new(k, 6).unwrap()).unwrap();
                match reduced_spectrum(&r).unwrap() {
                    None => assert!(entropy(&before, 1.0).unwrap() < 1e-10, "{path} k = {k}"),
                    Some(after) => {
                        let n = before.values.len().min(after.values.len());
                        let gap = (0..n).map(|i| (before.values[i] - after.values[i]).abs()).fold(0.0, f64::max);
                        assert!(gap < 1e-10, "{path} k = {k}: {gap}");
                    }
                }
            }
        }
    }
}

#[test]
fn reduction_rejects_generic_gates() {
    let (spec, _) = left(&haar_circuit(1), "+-");
    assert!(du_reduce(&spec, 1).is_err());
}

#[test]
fn solvable_reduced_state_stays_product() {
    let circ = du_circuit(0.6, InitialKind::Unitary, 9);
    let (spec, _) = left(&circ, "++-+");
    let r = du_reduce(&spec, 2).unwrap();
    assert!(r.state.product_defect() < 1e-10);
    let pk = pk_decomposition(&r).unwrap();
    assert!((pk.p[0] - 1.0).abs() < 1e-10);
    assert!(pk.p[1..].iter().all(|&x| x < 1e-10));
    assert!(pk.lower.abs() < 1e-8 && pk.upper.abs() < 1e-8);
}

#[test]
fn projectors_are_orthogonal_and_complete() {
    let (_, s) = left(&haar_circuit(2), "+++-");
    let tau_a = 3;
    let mut sum = vec![ZERO; s.amplitudes.len()];
    for i in 0..=tau_a {
        let pi = apply_pk(&s, tau_a, i);
        sum.iter_mut().zip(&pi).for_each(|(a, b)| *a += b);
        let as_state = InfluenceState { amplitudes: pi.clone(), ..s.clone() };
        for j in 0..=tau_a {
            let pj = apply_pk(&as_state, tau_a, j);
            let expect = if i == j { pi.clone() } else { vec![ZERO; pi.len()] };
            let gap = pj.iter().zip(&expect).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(gap < 1e-12, "P{i} P{j}: {gap}");
        }
    }
    let gap = sum.iter().zip(&s.amplitudes).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(gap < 1e-12);
}

#[test]
fn sandwich_bounds_hold() {
    for (p, seed) in [(0.47, 1), (0.6, 2), (0.53, 3)] {
        let circ = du_circuit(p, InitialKind::Random, seed);
        for path in ["++++++", "+++-+-", "++-+++"] {
            let (spec, s) = left(&circ, path);
            for k in 2..6 {
                let r = du_reduce(&spec, k).unwrap();
                if r.tau_a == 0 {
                    continue;
                }
                let pk = pk_decomposition(&r).unwrap();
                let direct = entropy(&schmidt_spectrum(&s, Cut::new(k, 6).unwrap()).unwrap(), 1.0).unwrap();
                assert!((pk.p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
                assert!(pk.lower <= direct + 1e-9 && direct <= pk.upper + 1e-9, "{path} k = {k}");
                assert!(pk.shannon <= ((r.tau_a + 1) as f64).ln() + 1e-12);
                assert!(pk.entropies[0] < 1e-10);
            }
        }
    }
}

#[test]
fn overlap_bound_holds_for_haar_vertical_states() {
    for seed in 0..20 {
        let circ = haar_circuit(100 + seed);
        let spec = CircuitSpec::new(circ, canonical_path(PathKind::Vertical, 3).unwrap());
        let s = build_left_influence(&spec).unwrap();
        let a = build_left_influence(&a_spec(&spec, 3).unwrap()).unwrap();
        let b = build_left_influence(&abar_spec(&spec, 3).unwrap()).unwrap();
        let sp = schmidt_spectrum(&s, Cut::new(3, 6).unwrap()).unwrap();
        for alpha in [2.0, 3.0, f64::INFINITY] {
            let bound = ey_bound_overlap(&s, &a, &b, alpha).unwrap();
            assert!(entropy(&sp, alpha).unwrap() <= bound + 1e-12, "seed {seed}, alpha {alpha}");
        }
    }
}

#[test]
fn loops_on_a_reduce_to_the_abar_state() {
    let circ = du_circuit(0.6, InitialKind::Random, 7);
    for path in ["++++", "+-+-", "++-+", "-+-+"] {
        let (spec, s) = left(&circ, path);
        for k in 1..4 {
            let b = build_left_influence(&abar_spec(&spec, k).unwrap()).unwrap();
            let loops = InfluenceState {
                path: spec.path.segment(0..k).unwrap(),
                amplitudes: crate::influence::loop_product(2, k),
                ..s.clone()
            };
            let bound = ey_bound_overlap(&s, &loops, &b, f64::INFINITY).unwrap();
            let norm_form = ey_bound_norm(influence_norm(&s), influence_norm(&b), f64::INFINITY).unwrap();
            assert!((bound - norm_form).abs() < 1e-9, "{path} k = {k}: {bound} vs {norm_form}");
            let sinf = entropy(&schmidt_spectrum(&s, Cut::new(k, 4).unwrap()).unwrap(), f64::INFINITY).unwrap();
            assert!(sinf <= norm_form + 1e-12);
        }
    }
}

#[test]
fn du_bound_limits() {
    let solvable = |x: usize| Some(2f64.powi(-(x as i32)));
    assert!(du_renyi_bound(2, 6, 2, 2.0, &solvable).unwrap().abs() < 1e-12);
    let c = 0.7;
    let asym = |x: usize| Some(c * (x as f64 / 2.0) * 2f64.powi(-(x as i32)));
    let b = du_renyi_bound(100, 300, 2, f64::INFINITY, &asym).unwrap();
    assert!((b - 1.5f64.ln()).abs() < 1e-12);
    assert!(du_renyi_bound(1, 2, 2, 1.0, &asym).is_err());
    assert!(du_renyi_bound(1, 2, 2, 2.0, &|_| None).is_err());
}

#[test]
fn du_bound_dominates_measured_renyi() {
    for p in [0.47, 0.6] {
        let circ = du_circuit(p, InitialKind::Product { i0: 0, j0: 0 }, 0);
        let purity = |x: usize| crate::influence::spatial_purity(&circ, x, 1 << 24).ok();
        for t in 2..=3 {
            let path = canonical_path(PathKind::Lightcone, t).unwrap();
            let spec = CircuitSpec::new(circ.clone(), path.clone());
            let s = build_left_influence(&spec).unwrap();
            for cut in path.cuts() {
                let s2 = entropy(&schmidt_spectrum(&s, cut).unwrap(), 2.0).unwrap();
                let b = du_renyi_bound(path.tau_top(cut.k), path.count_plus(), 2, 2.0, &purity).unwrap();
                assert!(s2 <= b + 1e-9, "p = {p}, t = {t}, k = {}: {s2} > {b}", cut.k);
            }
        }
    }
}
