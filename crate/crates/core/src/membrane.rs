//! Closed-form membrane predictions: line tensions, Y-shaped domain walls,
//! the dual-unitary slope `s(r)` and the solvability-gap constants.
//!
//! Line tensions are dimensionless (already divided by `log d`). Velocities
//! returned here are in units of `s_eq = log d` per unit time.

use crate::error::{domain, Result};
use serde::Serialize;

/// Grid used for shape checks and table validation.
const SHAPE_GRID: usize = 201;
const SHAPE_TOL: f64 = 1e-9;
const R0_GRID: usize = 1024;
const GOLDEN_ITERS: usize = 200;

fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

fn check_v(v: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&v) {
        return domain(format!("velocity {v} outside [-1, 1]"));
    }
    Ok(())
}

/// Annealed Haar line tension.
pub fn line_tension_haar(v: f64, d: usize) -> Result<f64> {
    check_v(v)?;
    if d < 2 {
        return domain("local dimension must be at least 2");
    }
    let d = d as f64;
    let v = v.abs();
    Ok((((d * d + 1.0) / d).ln() + xlogx((1.0 + v) / 2.0) + xlogx((1.0 - v) / 2.0)) / d.ln())
}

#[derive(Clone, Debug, Serialize)]
pub enum LineTension {
    Haar(usize),
    /// The dual-unitary case, `E(v) = 1`.
    Constant,
    /// Piecewise-linear interpolation. Knots must be strictly increasing and
    /// cover either `[-1, 1]` or `[0, 1]`; in the latter case the table is
    /// mirrored to make it even.
    Table { v: Vec<f64>, e: Vec<f64> },
}

/// Convexity and parity of a line tension on a fixed grid.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ShapeReport {
    pub min_second_difference: f64,
    pub max_parity_defect: f64,
}

impl ShapeReport {
    pub fn convex(&self) -> bool {
        self.min_second_difference >= -SHAPE_TOL
    }

    pub fn even(&self) -> bool {
        self.max_parity_defect <= SHAPE_TOL
    }

    pub fn ok(&self) -> bool {
        self.convex() && self.even()
    }
}

impl LineTension {
    pub fn haar(d: usize) -> Result<Self> {
        if d < 2 {
            return domain("local dimension must be at least 2");
        }
        Ok(Self::Haar(d))
    }

    pub fn table(v: Vec<f64>, e: Vec<f64>) -> Result<Self> {
        if v.len() != e.len() || v.len() < 2 {
            return domain("line tension table needs at least two matching knots");
        }
        if v.windows(2).any(|w| !(w[1] > w[0])) {
            return domain("line tension knots must be strictly increasing");
        }
        let (lo, hi) = (v[0], v[v.len() - 1]);
        if (lo != -1.0 && lo != 0.0) || hi != 1.0 {
            return domain(format!("line tension table spans [{lo}, {hi}], need [-1, 1] or [0, 1]"));
        }
        if e.iter().any(|x| !x.is_finite()) {
            return domain("line tension values must be finite");
        }
        Ok(Self::Table { v, e })
    }

    pub fn eval(&self, v: f64) -> Result<f64> {
        check_v(v)?;
        match self {
            Self::Haar(d) => line_tension_haar(v, *d),
            Self::Constant => Ok(1.0),
            Self::Table { v: knots, e } => {
                let x = if knots[0] == 0.0 { v.abs() } else { v };
                let i = knots.partition_point(|k| *k <= x).clamp(1, knots.len() - 1);
                let (a, b) = (knots[i - 1], knots[i]);
                let w = (x - a) / (b - a);
                Ok(e[i - 1] * (1.0 - w) + e[i] * w)
            }
        }
    }

    /// Second differences and parity on a 201-point grid.
    pub fn shape(&self) -> ShapeReport {
        let h = 2.0 / (SHAPE_GRID - 1) as f64;
        let vs: Vec<f64> = (0..SHAPE_GRID).map(|i| (-1.0 + i as f64 * h).clamp(-1.0, 1.0)).collect();
        let es: Vec<f64> = vs.iter().map(|&v| self.eval(v).unwrap()).collect();
        let min_second_difference = es
            .windows(3)
            .map(|w| w[0] - 2.0 * w[1] + w[2])
            .fold(f64::INFINITY, f64::min);
        let max_parity_defect = (0..SHAPE_GRID)
            .map(|i| (es[i] - es[SHAPE_GRID - 1 - i]).abs())
            .fold(0.0, f64::max);
        ShapeReport { min_second_difference, max_parity_defect }
    }
}

/// Thresholds of the Haar closed form: `v_d` and `v_d'`.
pub fn haar_thresholds(d: usize) -> (f64, f64) {
    let df = d as f64;
    let vd = (df - 1.0) / (df * df + 1.0).sqrt();
    let vdp = 0.5 * ((df * df + 1.0) / (2.0 * df)).ln() / vd.atanh();
    (vd, vdp)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum VteBranch {
    /// Slow path, Y-shaped walls meet at the top.
    SlowY,
    /// Slow path, vertical walls win.
    SlowVertical,
    /// Fast path, Y-shaped walls with the kink at velocity `v_d`.
    FastY,
    /// Fast path, vertical walls win.
    FastVertical,
}

impl VteBranch {
    /// Position in the four-case table, starting at 1.
    pub fn index(self) -> u8 {
        match self {
            Self::SlowY => 1,
            Self::SlowVertical => 2,
            Self::FastY => 3,
            Self::FastVertical => 4,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Vte {
    pub value: f64,
    pub branch: VteBranch,
}

fn check_r_v(r: f64, v_gamma: f64) -> Result<()> {
    if !(r > 0.0 && r < 1.0) {
        return domain(format!("cut ratio {r} outside (0, 1)"));
    }
    if !(0.0..=1.0).contains(&v_gamma) {
        return domain(format!("path slope {v_gamma} outside [0, 1]"));
    }
    Ok(())
}

/// Rényi-2 temporal entanglement velocity of Haar circuits, closed form.
///
/// The fast-path threshold is `v_gamma <= (2 - r) v_d' / r`. The tabulated
/// condition `r <= 2 v_d' / (v_d + v_d')` only agrees with it at `v_gamma = v_d`.
pub fn vte2_haar(r: f64, v_gamma: f64, d: usize) -> Result<Vte> {
    check_r_v(r, v_gamma)?;
    let e = |v: f64| line_tension_haar(v, d);
    let e0 = e(0.0)?;
    let vertical = 2.0 * (1.0 - r) * e0;
    let (vd, vdp) = haar_thresholds(d);
    let out = if v_gamma < vd {
        let eg = e(v_gamma)?;
        if r <= e0 / eg {
            Vte { value: 2.0 * r * (eg - e0), branch: VteBranch::SlowY }
        } else {
            Vte { value: vertical, branch: VteBranch::SlowVertical }
        }
    } else if v_gamma * r <= (2.0 - r) * vdp {
        let value = 2.0 * r * (e(vd)? * v_gamma / vd - e0 * (vd + v_gamma) / (2.0 * vd));
        Vte { value, branch: VteBranch::FastY }
    } else {
        Vte { value: vertical, branch: VteBranch::FastVertical }
    };
    Ok(out)
}

/// Result of the generic minimisation over the junction height `r0`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GenericVte {
    pub value: f64,
    /// Minimiser of the Y-configuration cost.
    pub r0: f64,
    pub y_min: f64,
    pub vertical: f64,
    /// Set when the line tension failed the convexity or parity check.
    pub flagged: bool,
}

/// Cost of the symmetric Y configuration above the equilibrium, `F(r0)`.
pub fn y_cost(lt: &LineTension, r: f64, r0: f64, v_gamma: f64) -> Result<f64> {
    let s = 1.0 - r;
    if !(0.0..=s).contains(&r0) {
        return domain(format!("junction height {r0} outside [0, {s}]"));
    }
    let t1 = 1.0 - r0;
    let t2 = s - r0;
    let v1 = (r * v_gamma / (t1 + t2)).min(1.0);
    let e1 = lt.eval(v1)?;
    Ok(2.0 * (e1 - lt.eval(0.0)?) * t1 + 2.0 * e1 * t2)
}

fn golden(mut a: f64, mut b: f64, f: &mut dyn FnMut(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut e = a + g * (b - a);
    let (mut fc, mut fe) = (f(c)?, f(e)?);
    for _ in 0..GOLDEN_ITERS {
        if (b - a).abs() <= 1e-14 * (1.0 + a.abs()) {
            break;
        }
        if fc < fe {
            b = e;
            e = c;
            fe = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + g * (b - a);
            fe = f(e)?;
        }
    }
    Ok(if fc < fe { (c, fc) } else { (e, fe) })
}

/// Grid plus golden-section minimum of `f` on `[lo, hi]`, endpoints included.
fn grid_min(lo: f64, hi: f64, n: usize, f: &mut dyn FnMut(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let at = |i: usize| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 };
    let mut best = (lo, f64::INFINITY);
    let mut bi = 0;
    for i in 0..n {
        let x = at(i);
        let y = f(x)?;
        if y < best.1 {
            best = (x, y);
            bi = i;
        }
    }
    let refined = golden(at(bi.saturating_sub(1)), at((bi + 1).min(n - 1)), f)?;
    Ok(if refined.1 < best.1 { refined } else { best })
}

/// Temporal Rényi-2 velocity for an arbitrary line tension.
///
/// The junction height ranges over `[0, 1 - r]`, the full geometric range.
pub fn vte2_generic(lt: &LineTension, r: f64, v_gamma: f64) -> Result<GenericVte> {
    check_r_v(r, v_gamma)?;
    let flagged = !lt.shape().ok();
    let (r0, y_min) = grid_min(0.0, 1.0 - r, R0_GRID, &mut |r0| y_cost(lt, r, r0, v_gamma))?;
    let vertical = 2.0 * (1.0 - r) * lt.eval(0.0)?;
    Ok(GenericVte { value: y_min.min(vertical), r0, y_min, vertical, flagged })
}

/// Direct minimisation over the junction position and height without the
/// symmetric-velocity shortcut. Used as an oracle for the closed forms.
pub fn vte2_numeric(lt: &LineTension, r: f64, v_gamma: f64) -> Result<f64> {
    check_r_v(r, v_gamma)?;
    let e0 = lt.eval(0.0)?;
    let shift = r * v_gamma;
    let e = |v: f64| lt.eval(v.clamp(-1.0, 1.0));
    let mut inner = |r0: f64| -> Result<f64> {
        let t1 = 1.0 - r0;
        let t2 = (1.0 - r) - r0;
        if t2 <= 1e-15 {
            return Ok(2.0 * (e(shift / t1)? * t1 - e0 * t1));
        }
        let lo = (-t1).max(shift - t2);
        let hi = t1.min(shift + t2);
        let (_, y) = golden(lo, hi, &mut |x| Ok(2.0 * (e(x / t1)? * t1 + e((x - shift) / t2)? * t2 + e0 * r0 - e0)))?;
        Ok(y)
    };
    let (_, y) = grid_min(0.0, 1.0 - r, 256, &mut inner)?;
    Ok(y.min(2.0 * (1.0 - r) * e0))
}

/// Free energies per `2 s_eq t` for the symmetric Y, equilibrium and
/// vertical configurations.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FreeEnergies {
    pub f1_y: f64,
    pub f2: f64,
    pub f1_vert: f64,
    /// Wall velocity of the Y legs.
    pub v1: f64,
    /// Junction height, and lengths of the two legs above it, over `t`.
    pub t0: f64,
    pub t1: f64,
    pub t2: f64,
}

pub fn membrane_free_energies(r: f64, r0: f64, v_gamma: f64, lt: &LineTension) -> Result<FreeEnergies> {
    check_r_v(r, v_gamma)?;
    if !(0.0..=1.0 - r).contains(&r0) {
        return domain(format!("junction height {r0} outside [0, {}]", 1.0 - r));
    }
    let t1 = 1.0 - r0;
    let t2 = (1.0 - r) - r0;
    let v1 = (r * v_gamma / (t1 + t2)).min(1.0);
    let e0 = lt.eval(0.0)?;
    Ok(FreeEnergies {
        f1_y: lt.eval(v1)? * (t1 + t2) + e0 * r0,
        f2: e0,
        f1_vert: e0 * (2.0 - r),
        v1,
        t0: r0,
        t1,
        t2,
    })
}

/// Slope `s(r)` of the dual-unitary von Neumann entropy, in units of `log d`.
pub fn du_slope_s(r: f64, v_gamma: f64) -> f64 {
    if r <= 2.0 / (v_gamma + 3.0) {
        (1.0 + v_gamma) * r * r
    } else {
        4.0 * (1.0 - r) * ((2.0 + v_gamma) * r - 1.0) / (1.0 + v_gamma)
    }
}

/// Location and value of the maximum of [`du_slope_s`].
pub fn du_slope_max(v_gamma: f64) -> (f64, f64) {
    ((3.0 + v_gamma) / (2.0 * (2.0 + v_gamma)), (1.0 + v_gamma) / (2.0 + v_gamma))
}

/// Membrane estimate of `S(rho_k)` in nats.
pub fn rhok_membrane_entropy(k: usize, size_abar: usize, d: usize) -> f64 {
    k.min(size_abar) as f64 * 2.0 * (d as f64).ln()
}

/// Asymptotic weight `p_k`, with `t` half the path length. `v_abar` is the
/// slope of the complement; pass `v_gamma` for a constant-slope path.
pub fn pk_asymptotic(k: usize, t: f64, v_gamma: f64, size_abar: usize, v_abar: f64) -> f64 {
    if k == 0 {
        size_abar as f64 * (1.0 + v_abar) / (2.0 * (1.0 + v_gamma) * t)
    } else {
        1.0 / ((1.0 + v_gamma) * t)
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct AppcConstants {
    pub lambda: f64,
    pub a: f64,
    #[serde(rename = "A")]
    pub big_a: f64,
    pub p_bar: f64,
}

/// Decay constants bounding the increments of the averaged norm.
/// `c = tr[(m m^dag)^2] / d` measures how far the initial state is from solvable.
pub fn appc_constants(d: usize, p: f64, c: f64) -> Result<AppcConstants> {
    if d < 2 {
        return domain("local dimension must be at least 2");
    }
    let df = d as f64;
    if !(0.0..=1.0).contains(&p) {
        return domain(format!("entangling power {p} outside [0, 1]"));
    }
    if !(1.0..=df).contains(&c) {
        return domain(format!("state constant {c} outside [1, {d}]"));
    }
    let d2 = df * df;
    let lambda = (1.0 - p).powi(2) + p * p / (d2 - 1.0);
    let a = (df + c) / (df + 1.0) * df * lambda;
    let big_a = (c - 1.0).powi(2) / (df + c).powi(2) * (df + 1.0) / (df - 1.0) * ((d2 - 1.0) / (d2 * lambda.powi(3))).sqrt();
    let p_bar = (d2 - 1.0) / d2 * (1.0 - 1.0 / (2.0 * df + 2.0).sqrt());
    Ok(AppcConstants { lambda, a, big_a, p_bar })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BoundCheck {
    /// The averaged increment stays bounded away from zero.
    Certified,
    NotCertified,
    /// `a >= 1`: the geometric tail does not converge.
    Inconclusive,
}

/// Tests `M_{x0} > A a^{x0+1} / (1 - a)`.
pub fn appc_bound_check(m_x0: f64, x0: u32, k: &AppcConstants) -> BoundCheck {
    if k.a >= 1.0 {
        return BoundCheck::Inconclusive;
    }
    let tail = k.big_a * k.a.powi(x0 as i32 + 1) / (1.0 - k.a);
    if m_x0 > tail {
        BoundCheck::Certified
    } else {
        BoundCheck::NotCertified
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn haar_tension_values() {
        let e0 = line_tension_haar(0.0, 2).unwrap();
        assert!((e0 - (1.25f64).ln() / 2f64.ln()).abs() < 1e-15);
        let e1 = line_tension_haar(1.0, 2).unwrap();
        assert!((e1 - 2.5f64.ln() / 2f64.ln()).abs() < 1e-14);
        assert_eq!(line_tension_haar(-1.0, 2).unwrap(), e1);
        assert!(line_tension_haar(1.0 + 1e-12, 2).is_err());
    }

    #[test]
    fn haar_tension_is_convex_and_even() {
        for d in 2..6 {
            let s = LineTension::haar(d).unwrap().shape();
            assert!(s.convex() && s.even(), "d={d} {s:?}");
        }
        assert_eq!(LineTension::Constant.shape().min_second_difference, 0.0);
    }

    #[test]
    fn tables_interpolate_and_mirror() {
        let lt = LineTension::table(vec![0.0, 0.5, 1.0], vec![0.5, 0.75, 1.5]).unwrap();
        assert!((lt.eval(-0.25).unwrap() - 0.625).abs() < 1e-15);
        assert_eq!(lt.eval(1.0).unwrap(), 1.5);
        assert!(lt.shape().ok());
        let bent = LineTension::table(vec![-1.0, 0.0, 1.0], vec![1.0, 2.0, 1.0]).unwrap();
        assert!(!bent.shape().convex());
        assert!(vte2_generic(&bent, 0.5, 0.5).unwrap().flagged);
        assert!(LineTension::table(vec![0.0, 0.9], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn closed_form_matches_numeric_minimum() {
        // Coarser than the acceptance grid; the full grid runs there.
        for d in [2, 3] {
            let lt = LineTension::haar(d).unwrap();
            let mut worst = 0f64;
            for r in grid(12, 0.02, 0.98) {
                for v in grid(12, 0.0, 1.0) {
                    let c = vte2_haar(r, v, d).unwrap().value;
                    worst = worst.max((c - vte2_numeric(&lt, r, v).unwrap()).abs());
                    worst = worst.max((c - vte2_generic(&lt, r, v).unwrap().value).abs());
                }
            }
            assert!(worst < 1e-6, "d={d} worst={worst}");
        }
    }

    #[test]
    fn half_cut_lightcone_example() {
        let v = vte2_haar(0.5, 1.0, 2).unwrap();
        assert_eq!(v.branch, VteBranch::FastVertical);
        let e0 = line_tension_haar(0.0, 2).unwrap();
        assert!((v.value - e0).abs() < 1e-15);
        let lt = LineTension::haar(2).unwrap();
        assert!((vte2_numeric(&lt, 0.5, 1.0).unwrap() - v.value).abs() < 1e-9);
    }

    #[test]
    fn branches_are_continuous() {
        let eps = 1e-11;
        for d in [2, 3, 4] {
            let (vd, vdp) = haar_thresholds(d);
            let e0 = line_tension_haar(0.0, d).unwrap();
            for r in grid(9, 0.1, 0.9) {
                let jump = (vte2_haar(r, vd, d).unwrap().value - vte2_haar(r, vd - eps, d).unwrap().value).abs();
                assert!(jump < 1e-8, "v_d jump {jump}");
            }
            for v in grid(9, 0.0, vd * 0.999) {
                let rc = e0 / line_tension_haar(v, d).unwrap();
                if rc < 1.0 - eps {
                    let a = vte2_haar(rc, v, d).unwrap().value;
                    let b = vte2_haar(rc + eps, v, d).unwrap().value;
                    assert!((a - b).abs() < 1e-8);
                }
            }
            for v in grid(9, vd, 1.0) {
                let rc = 2.0 * vdp / (v + vdp);
                if rc < 1.0 - eps {
                    let a = vte2_haar(rc - eps, v, d).unwrap();
                    let b = vte2_haar(rc + eps, v, d).unwrap();
                    assert_eq!(a.branch, VteBranch::FastY);
                    assert_eq!(b.branch, VteBranch::FastVertical);
                    assert!((a.value - b.value).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn marginal_cases_vanish_exactly() {
        let haar = LineTension::haar(2).unwrap();
        for r in grid(50, 0.01, 0.99) {
            assert_eq!(vte2_haar(r, 0.0, 2).unwrap().value, 0.0);
            assert_eq!(vte2_generic(&haar, r, 0.0).unwrap().value, 0.0);
            for v in grid(50, 0.0, 1.0) {
                let g = vte2_generic(&LineTension::Constant, r, v).unwrap();
                assert_eq!(g.value, 0.0);
                assert_eq!(g.r0, 1.0 - r);
            }
        }
    }

    #[test]
    fn generic_growth_is_linear_off_the_margin() {
        for d in [2, 3] {
            let lt = LineTension::haar(d).unwrap();
            for r in grid(7, 0.05, 0.95) {
                for v in grid(7, 0.05, 1.0) {
                    assert!(vte2_generic(&lt, r, v).unwrap().value > 0.0);
                }
            }
        }
    }

    #[test]
    fn y_minimum_follows_three_cases() {
        let d = 2;
        let lt = LineTension::haar(d).unwrap();
        let e = |v: f64| line_tension_haar(v, d).unwrap();
        let (vd, _) = haar_thresholds(d);
        for r in grid(11, 0.05, 0.95) {
            for v in grid(11, 0.0, 1.0) {
                let expect = if v < vd {
                    r * (e(v) - e(0.0))
                } else if v <= (2.0 - r) / r * vd {
                    r * (e(vd) * v / vd - e(0.0) * (vd + v) / (2.0 * vd))
                } else {
                    (2.0 - r) * e(r / (2.0 - r) * v) - e(0.0)
                };
                let got = vte2_generic(&lt, r, v).unwrap().y_min / 2.0;
                assert!((got - expect).abs() < 1e-8, "r={r} v={v} {got} {expect}");
            }
        }
    }

    #[test]
    fn free_energy_geometry() {
        let lt = LineTension::haar(2).unwrap();
        let f = membrane_free_energies(0.4, 0.0, 0.7, &lt).unwrap();
        assert!((f.v1 - 0.4 * 0.7 / 1.6).abs() < 1e-15);
        assert!((f.t1 - f.t2 - 0.4).abs() < 1e-15);
        let e0 = lt.eval(0.0).unwrap();
        assert!((f.f1_vert - f.f2 - (1.0 - 0.4) * e0).abs() < 1e-15);
        for r0 in grid(9, 0.0, 0.6) {
            let f = membrane_free_energies(0.4, r0, 0.7, &lt).unwrap();
            let y = y_cost(&lt, 0.4, r0, 0.7).unwrap();
            assert!((2.0 * (f.f1_y - f.f2) - y).abs() < 1e-14);
        }
    }

    #[test]
    fn du_slope_shape() {
        assert_eq!(du_slope_s(0.5, 1.0), 0.5);
        assert_eq!(du_slope_s(0.0, 0.3), 0.0);
        assert_eq!(du_slope_s(1.0, 0.3), 0.0);
        for v in grid(11, 0.0, 1.0) {
            let rb = 2.0 / (v + 3.0);
            let second = 4.0 * (1.0 - rb) * ((2.0 + v) * rb - 1.0) / (1.0 + v);
            assert!(((1.0 + v) * rb * rb - second).abs() < 1e-12);
            let (rs, smax) = du_slope_max(v);
            assert!((du_slope_s(rs, v) - smax).abs() < 1e-14);
            let vals: Vec<f64> = grid(1001, 0.0, 1.0).into_iter().map(|r| du_slope_s(r, v)).collect();
            let peak = vals.iter().cloned().fold(0.0, f64::max);
            assert!(peak <= smax + 1e-15 && smax - peak < 1e-5);
            let im = vals.iter().position(|&x| x == peak).unwrap();
            assert!(vals[..=im].windows(2).all(|w| w[1] >= w[0]));
            assert!(vals[im..].windows(2).all(|w| w[1] <= w[0]));
        }
        assert!((du_slope_max(1.0).1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rhok_ceiling_and_peak() {
        let l2 = 2f64.ln();
        assert_eq!(rhok_membrane_entropy(0, 4, 2), 0.0);
        assert_eq!(rhok_membrane_entropy(9, 4, 2), 8.0 * l2);
        let ell = 10;
        let peak = (0..=ell).map(|k| rhok_membrane_entropy(k, ell - k, 2)).fold(0.0, f64::max);
        assert!((peak - ell as f64 * l2).abs() < 1e-12);
    }

    #[test]
    fn pk_weights() {
        assert!((pk_asymptotic(3, 7.0, 1.0, 4, 1.0) - 1.0 / 14.0).abs() < 1e-15);
        assert!((pk_asymptotic(0, 5.0, 0.0, 5, 0.0) - 0.5).abs() < 1e-15);
        // Constant slope: 2t jumps, |A| + |Abar| = 2t, tau_A = |A|(1+v)/2.
        for (t, v, a) in [(5usize, 1.0, 4usize), (6, 0.0, 6), (4, 0.5, 4)] {
            let n = 2 * t;
            let tau_a = (a as f64 * (1.0 + v) / 2.0).round() as usize;
            let total: f64 = (0..=tau_a).map(|k| pk_asymptotic(k, t as f64, v, n - a, v)).sum();
            assert!((total - 1.0).abs() < 1e-12, "{total}");
        }
    }

    #[test]
    fn appc_values() {
        let k = appc_constants(2, 0.0, 1.5).unwrap();
        assert_eq!(k.lambda, 1.0);
        assert_eq!(appc_constants(2, 0.6, 1.0).unwrap().big_a, 0.0);
        assert!((k.p_bar - 0.4438).abs() < 5e-5);
        assert_eq!(appc_bound_check(0.0, 8, &appc_constants(2, 0.6, 1.0).unwrap()), BoundCheck::NotCertified);
        assert_eq!(appc_bound_check(1.0, 8, &k), BoundCheck::Inconclusive);
        assert!(appc_constants(2, 0.5, 2.5).is_err());
        assert!(appc_constants(2, 1.2, 1.5).is_err());
        // Above p_bar the tail converges for every admissible c.
        for c in grid(5, 1.0, 2.0) {
            assert!(appc_constants(2, 0.45, c).unwrap().a < 1.0);
        }
    }

    proptest! {
        #[test]
        fn haar_tension_parity(v in -1.0f64..=1.0, d in 2usize..8) {
            prop_assert_eq!(line_tension_haar(v, d).unwrap(), line_tension_haar(-v, d).unwrap());
        }

        #[test]
        fn vte_bounded_by_vertical(r in 0.01f64..0.99, v in 0.0f64..=1.0, d in 2usize..6) {
            let x = vte2_haar(r, v, d).unwrap().value;
            let e0 = line_tension_haar(0.0, d).unwrap();
            prop_assert!(x >= 0.0 && x <= 2.0 * (1.0 - r) * e0 + 1e-15);
        }
    }
}
