use super::*;
use crate::gates::{appe_gate, haar_gate};
use crate::geometry::{canonical_path, initial_state, InitialKind, PathKind};
use crate::linalg::{complex_gaussian, singular_values};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const CAP: u128 = 1 << 24;

fn rng(s: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(s)
}

fn random_m(seed: u64) -> InitialStateMatrix {
    initial_state(InitialKind::Random, 2, &mut rng(seed)).unwrap()
}

fn haar_circuit(seed: u64) -> Circuit {
    Circuit::new(GateField::haar(2, seed), random_m(seed + 1000)).unwrap()
}

fn all_paths(n: usize) -> Vec<Path> {
    (0..1u32 << n)
        .map(|bits| Path::new((0..n).map(|i| if bits >> i & 1 == 1 { 1 } else { -1 }).collect()).unwrap())
        .collect()
}

fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn solvable_dual_unitary_states_are_loop_products() {
    let m = initial_state(InitialKind::Unitary, 2, &mut rng(3)).unwrap();
    let circ = Circuit::new(GateField::uniform(appe_gate(0.6).unwrap()).unwrap(), m).unwrap();
    for path in all_paths(4) {
        let spec = CircuitSpec::new(circ.clone(), path.clone());
        let l = build_left_influence(&spec).unwrap();
        let r = build_right_influence(&spec).unwrap();
        assert!(l.product_defect() < 1e-10, "{path}: {}", l.product_defect());
        assert!(r.product_defect() < 1e-10, "{path}: {}", r.product_defect());
    }
}

#[test]
fn left_state_matches_region_oracle() {
    for seed in 0..4 {
        let circ = haar_circuit(seed);
        for path in all_paths(4).into_iter().step_by(3).chain(all_paths(3)) {
            let anchor = if path.len() % 2 == 0 { 2 * seed as i64 } else { 1 };
            let spec = CircuitSpec::new(circ.clone(), path.clone()).with_anchor(anchor).unwrap();
            let l = build_left_influence(&spec).unwrap();
            let o = influence_oracle(&spec, 0, CAP).unwrap();
            assert!(max_diff(&l.amplitudes, &o) < 1e-10, "{path}: {}", max_diff(&l.amplitudes, &o));
        }
    }
}

#[test]
fn region_oracle_is_window_independent() {
    let circ = haar_circuit(9);
    let spec = CircuitSpec::new(circ, "+-++".parse().unwrap());
    let a = influence_oracle(&spec, 0, CAP).unwrap();
    let b = influence_oracle(&spec, 2, CAP).unwrap();
    assert!(max_diff(&a, &b) < 1e-12);
}

#[test]
fn column_between_influence_states_is_the_trace() {
    let circ = haar_circuit(5);
    let id = crate::linalg::identity(2);
    for q in [-1, 0, 3] {
        for t in 1..=2 {
            let e = expectation(&circ, &id, q, t, CAP).unwrap();
            assert!((e - ONE).norm() < 1e-10, "q = {q}, t = {t}: {e}");
        }
    }
}

#[test]
fn correlators_match_ring_oracle() {
    for seed in 0..3 {
        let circ = haar_circuit(40 + seed);
        let a = complex_gaussian(2, 2, &mut rng(seed));
        let b = complex_gaussian(2, 2, &mut rng(seed + 77));
        let cases: &[(i64, u32, i64, u32)] = &[
            (0, 1, 0, 2),
            (1, 1, 0, 2),
            (3, 1, 0, 2),
            (-2, 1, 1, 2),
            (4, 0, 1, 1),
            (5, 1, 0, 2),
            (6, 1, 0, 2),
            (-5, 1, 0, 2),
            (2, 2, 1, 2),
            (0, 2, 0, 2),
            (5, 2, 0, 2),
            (2, 0, 0, 1),
            (4, 1, 1, 1),
        ];
        for &(qa, t1, qb, t2) in cases {
            let la = Local { op: &a, qudit: qa, t: t1 };
            let lb = Local { op: &b, qudit: qb, t: t2 };
            let e = correlator(&circ, &la, &lb, CAP).unwrap();
            let o = ring_correlator(&circ, &la, &lb, CAP).unwrap();
            assert!((e - o).norm() < 1e-10, "{:?}: engine {e} oracle {o}", (qa, t1, qb, t2));
        }
    }
}

#[test]
fn correlator_plans_cover_both_regimes() {
    let p = plan_correlator(0, 1, 0, 2).unwrap();
    assert_eq!(p.regime, Regime::I);
    assert_eq!(p.column_a, p.column_b);
    let p = plan_correlator(6, 1, 0, 2).unwrap();
    assert_eq!(p.regime, Regime::II);
    assert_ne!(p.column_a, p.column_b);
    assert_eq!(insertion_qudit(p.path.jumps(), p.column_a, 2), 6);
}

#[test]
fn disconnected_correlator_factorises() {
    let circ = haar_circuit(8);
    let a = complex_gaussian(2, 2, &mut rng(1));
    let b = complex_gaussian(2, 2, &mut rng(2));
    let la = Local { op: &a, qudit: 0, t: 1 };
    let lb = Local { op: &b, qudit: 9, t: 1 };
    assert_eq!(classify_regime(0.0, 4.5, 1, 1).unwrap(), Regime::Disconnected);
    let e = correlator(&circ, &la, &lb, CAP).unwrap();
    let o = ring_correlator(&circ, &la, &lb, CAP).unwrap();
    assert!((e - o).norm() < 1e-10);
}

#[test]
fn regime_classification() {
    assert_eq!(classify_regime(0.0, 0.0, 2, 2).unwrap(), Regime::I);
    assert_eq!(classify_regime(0.0, 3.0, 1, 2).unwrap(), Regime::II);
    assert_eq!(classify_regime(0.0, 3.5, 1, 2).unwrap(), Regime::Disconnected);
    assert_eq!(classify_regime(0.0, 1.0, 1, 2).unwrap(), Regime::I);
    assert!(classify_regime(0.0, 0.0, 2, 1).is_err());
}

#[test]
fn column_product_is_rank_one() {
    for seed in 0..3 {
        let circ = haar_circuit(60 + seed);
        for path in ["+-", "++", "+-+-", "-++-"] {
            let spec = CircuitSpec::new(circ.clone(), path.parse().unwrap());
            let rep = rank1_check(&spec).unwrap();
            assert!(rep.ratio < 1e-12, "{path}: {}", rep.ratio);
            assert!(rep.right_overlap > 1.0 - 1e-10);
            assert!(rep.left_overlap > 1.0 - 1e-10);
        }
    }
}

#[test]
fn dual_unitary_norm_is_purity() {
    let circ = Circuit::new(GateField::uniform(appe_gate(0.53).unwrap()).unwrap(), random_m(4)).unwrap();
    for t in 1..=3 {
        for kind in [PathKind::Vertical, PathKind::Lightcone] {
            let path = canonical_path(kind, t).unwrap();
            let tau = path.count_plus();
            let norm = influence_norm(&build_left_influence(&CircuitSpec::new(circ.clone(), path)).unwrap());
            let pur = spatial_purity(&circ, tau, CAP).unwrap();
            let expect = 2f64.powi(tau as i32) * pur;
            assert!((norm / expect - 1.0).abs() < 1e-9, "t = {t} {kind:?}: {norm} vs {expect}");
        }
    }
}

#[test]
fn dual_unitary_norm_depends_only_on_tau() {
    let circ = Circuit::new(GateField::uniform(appe_gate(0.6).unwrap()).unwrap(), random_m(5)).unwrap();
    let norm = |s: &str| influence_norm(&build_left_influence(&CircuitSpec::new(circ.clone(), s.parse().unwrap())).unwrap());
    let base = norm("+++-");
    for s in ["++-+", "+-++", "-+++"] {
        assert!((norm(s) - base).abs() < 1e-10 * base);
    }
}

#[test]
fn purity_window_and_oracle() {
    let g = haar_gate(2, &mut rng(12));
    let circ = Circuit::new(GateField::uniform(g).unwrap(), random_m(13)).unwrap();
    for tau in 1..=4 {
        let p = spatial_purity(&circ, tau, CAP).unwrap();
        let qc = purity::cut_qudit(tau);
        let lo = qc - tau as i64 + 1;
        let lo = lo - lo.rem_euclid(2);
        let hi = qc + tau as i64;
        let hi = hi + 1 - hi.rem_euclid(2);
        let wide = spatial_purity_window(&circ, tau, lo - 2, hi + 2, CAP).unwrap();
        assert!((p - wide).abs() < 1e-12, "tau = {tau}: {p} vs {wide}");
        if tau > 3 {
            continue;
        }
        // Two far-apart translated cuts on a ring give the product of two copies.
        let n = 4 * tau + 4;
        let start = qc + 1 - n as i64 / 2;
        let start = start - start.rem_euclid(2);
        let ring = ring_purity(&circ, tau, start, n + 2, qc + 1, qc + n as i64 / 2, CAP).unwrap();
        assert!((ring.sqrt() - p).abs() < 1e-10, "tau = {tau}: ring {} vs {p}", ring.sqrt());
        assert!(p > 0.0 && p <= 1.0 + 1e-12);
    }
}

#[test]
fn solvable_dual_unitary_purity_is_minimal() {
    let m = initial_state(InitialKind::Unitary, 2, &mut rng(14)).unwrap();
    let circ = Circuit::new(GateField::uniform(appe_gate(0.53).unwrap()).unwrap(), m).unwrap();
    for tau in 1..=6 {
        let p = spatial_purity(&circ, tau, CAP).unwrap();
        assert!((p - 2f64.powi(-(tau as i32))).abs() < 1e-12, "tau = {tau}: {p}");
    }
}

fn spectrum(s: &InfluenceState, k: usize) -> Vec<f64> {
    let sv = singular_values(&s.matrix(k)).unwrap();
    let z: f64 = sv.iter().map(|x| x * x).sum();
    sv.iter().map(|x| x * x / z).collect()
}

#[test]
fn mirror_relates_left_and_right_spectra() {
    for seed in 0..4 {
        let g = haar_gate(2, &mut rng(100 + seed));
        let circ = Circuit::new(GateField::uniform(g).unwrap(), random_m(200 + seed)).unwrap();
        let path: Path = "+-++".parse().unwrap();
        let l = build_left_influence(&CircuitSpec::new(circ.clone(), path.clone())).unwrap();
        let r = build_right_influence(&CircuitSpec::new(circ.reflected(), mirror(&path))).unwrap();
        for k in 1..4 {
            let (a, b) = (spectrum(&l, k), spectrum(&r, k));
            assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-10), "k = {k}: {a:?} vs {b:?}");
        }
    }
}

fn mirror(p: &Path) -> Path {
    crate::geometry::mirror_path(p)
}

#[test]
fn reflected_field_round_trips() {
    let f = GateField::haar(2, 3);
    let back = f.reflected().reflected();
    for (b, l) in [(0, 2), (-3, 1), (5, 3)] {
        assert!(crate::linalg::max_abs_diff(f.gate(b, l).matrix(), back.gate(b, l).matrix()) < 1e-15);
    }
}

#[test]
fn size_cap_is_enforced() {
    let spec = CircuitSpec::new(haar_circuit(1), "+-+-+-".parse().unwrap()).with_cap(1000);
    assert!(matches!(build_left_influence(&spec), Err(Error::Size { required: 4096, .. })));
}

#[test]
fn anchor_parity_is_checked() {
    let spec = CircuitSpec::new(haar_circuit(1), "+-".parse().unwrap());
    assert!(spec.clone().with_anchor(1).is_err());
    assert!(spec.with_anchor(-2).is_ok());
}

#[test]
fn export_round_trip() {
    let spec = CircuitSpec::new(haar_circuit(2), "+-+".parse().unwrap());
    let l = build_left_influence(&spec).unwrap();
    let dir = std::env::temp_dir().join(format!("tilab-export-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let stem = dir.join("left");
    l.export(&stem).unwrap();
    let back = InfluenceState::import(&stem).unwrap();
    assert_eq!(back.amplitudes, l.amplitudes);
    assert_eq!(back.path, l.path);
    assert_eq!(back.side, Side::Left);
    assert_eq!(back.seed, Some(2));
    std::fs::remove_dir_all(&dir).unwrap();
}
