//! Two-site gates, their folded (doubled) form, and gate diagnostics.
//!
//! Leg convention: `U[(k,l),(i,j)] = u[k*d + l, i*d + j]` with `i, j` the
//! bottom-left and bottom-right inputs and `k, l` the top-left and top-right
//! outputs. A folded leg carries the pair `(a, a')` of a forward and a backward
//! index, flattened as `a*d + a'`.

use crate::error::{domain, Error, Result};
use crate::linalg::{self, CMat, C64, ONE, ZERO};
use faer::Mat;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Tolerance for accepting a gate into a circuit.
pub const UNITARY_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct LocalGate {
    d: usize,
    u: CMat,
}

impl LocalGate {
    /// Wraps a `d^2 x d^2` matrix. No unitarity check; see [`LocalGate::validated`].
    pub fn new(d: usize, u: CMat) -> Result<Self> {
        if d < 2 || u.nrows() != d * d || u.ncols() != d * d {
            return domain(format!(
                "gate must be {0}x{0} for d = {d}, got {1}x{2}",
                d * d,
                u.nrows(),
                u.ncols()
            ));
        }
        Ok(Self { d, u })
    }

    pub fn validated(self) -> Result<Self> {
        let def = linalg::unitary_defect(&self.u);
        if def < UNITARY_TOL {
            Ok(self)
        } else {
            Err(Error::Validation(format!("gate unitary defect {def:.3e}")))
        }
    }

    pub fn identity(d: usize) -> Self {
        Self { d, u: linalg::identity(d * d) }
    }

    pub fn swap(d: usize) -> Self {
        let n = d * d;
        let u = Mat::from_fn(n, n, |r, c| {
            let (k, l, i, j) = (r / d, r % d, c / d, c % d);
            if k == j && l == i {
                ONE
            } else {
                ZERO
            }
        });
        Self { d, u }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn matrix(&self) -> &CMat {
        &self.u
    }

    #[inline]
    pub fn entry(&self, k: usize, l: usize, i: usize, j: usize) -> C64 {
        self.u[(k * self.d + l, i * self.d + j)]
    }

    pub fn unitary_defect(&self) -> f64 {
        linalg::unitary_defect(&self.u)
    }

    /// Left-right mirror image `S U S`.
    pub fn reflect(&self) -> Self {
        let s = Self::swap(self.d);
        Self { d: self.d, u: &s.u * &self.u * &s.u }
    }

    pub fn to_json(&self) -> GateJson {
        let n = self.d * self.d;
        GateJson {
            d: self.d,
            re: (0..n).map(|i| (0..n).map(|j| self.u[(i, j)].re).collect()).collect(),
            im: (0..n).map(|i| (0..n).map(|j| self.u[(i, j)].im).collect()).collect(),
        }
    }

    pub fn from_json(g: &GateJson) -> Result<Self> {
        let n = g.d * g.d;
        if g.re.len() != n || g.im.len() != n || g.re.iter().chain(&g.im).any(|r| r.len() != n) {
            return domain("gate json has wrong shape");
        }
        Self::new(g.d, Mat::from_fn(n, n, |i, j| C64::new(g.re[i][j], g.im[i][j])))
    }
}

/// Row-major JSON form `{ "d", "re", "im" }`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GateJson {
    pub d: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

/// The double gate `W = U (x)_r U*`, stored as `w[((tl*D + tr)*D + bl)*D + br]` with `D = d^2`.
#[derive(Clone, Debug)]
pub struct FoldedGate {
    d: usize,
    w: Vec<C64>,
}

impl FoldedGate {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn dim(&self) -> usize {
        self.d * self.d
    }

    #[inline]
    pub fn at(&self, tl: usize, tr: usize, bl: usize, br: usize) -> C64 {
        let dd = self.dim();
        self.w[((tl * dd + tr) * dd + bl) * dd + br]
    }

    pub fn raw(&self) -> &[C64] {
        &self.w
    }

    /// As a `D^2 x D^2` matrix from (bl, br) to (tl, tr).
    pub fn matrix(&self) -> CMat {
        let dd = self.dim();
        linalg::from_row_major(&self.w, dd * dd, dd * dd)
    }

    /// Max deviation from the unitarity relations `<oo|W = <oo|` and `W|oo> = |oo>`.
    pub fn unitarity_defect(&self) -> f64 {
        let dd = self.dim();
        let lp = loop_state(self.d);
        let mut worst = 0.0f64;
        for a in 0..dd {
            for b in 0..dd {
                let (mut top, mut bot) = (ZERO, ZERO);
                for x in 0..dd {
                    for y in 0..dd {
                        top += lp[x] * lp[y] * self.at(x, y, a, b);
                        bot += self.at(a, b, x, y) * lp[x] * lp[y];
                    }
                }
                worst = worst.max((top - lp[a] * lp[b]).norm());
                worst = worst.max((bot - lp[a] * lp[b]).norm());
            }
        }
        worst
    }

    /// Max deviation from the folded dual-unitarity relations: loops on both
    /// left legs give loops on both right legs, and vice versa.
    pub fn dual_defect(&self) -> f64 {
        let dd = self.dim();
        let lp = loop_state(self.d);
        let mut worst = 0.0f64;
        for a in 0..dd {
            for b in 0..dd {
                let (mut left, mut right) = (ZERO, ZERO);
                for x in 0..dd {
                    for y in 0..dd {
                        left += lp[x] * lp[y] * self.at(x, a, y, b);
                        right += lp[x] * lp[y] * self.at(a, x, b, y);
                    }
                }
                worst = worst.max((left - lp[a] * lp[b]).norm());
                worst = worst.max((right - lp[a] * lp[b]).norm());
            }
        }
        worst
    }
}

/// The loop state: amplitude `d^(-1/2)` on each diagonal pair `(i, i)`.
pub fn loop_state(d: usize) -> Vec<C64> {
    let mut v = vec![ZERO; d * d];
    let a = 1.0 / (d as f64).sqrt();
    for i in 0..d {
        v[i * d + i] = C64::new(a, 0.0);
    }
    v
}

/// `W = U (x)_r U*`. Rejects non-unitary input.
pub fn fold(u: &LocalGate) -> Result<FoldedGate> {
    let def = u.unitary_defect();
    if def >= UNITARY_TOL {
        return Err(Error::Validation(format!("fold: unitary defect {def:.3e}")));
    }
    Ok(fold_unchecked(u))
}

pub(crate) fn fold_unchecked(u: &LocalGate) -> FoldedGate {
    let d = u.d;
    let dd = d * d;
    let mut w = vec![ZERO; dd * dd * dd * dd];
    for (k, kp, l, lp, i, ip, j, jp) in itertools8(d) {
        let v = u.entry(k, l, i, j) * u.entry(kp, lp, ip, jp).conj();
        let (tl, tr, bl, br) = (k * d + kp, l * d + lp, i * d + ip, j * d + jp);
        w[((tl * dd + tr) * dd + bl) * dd + br] = v;
    }
    FoldedGate { d, w }
}

fn itertools8(d: usize) -> impl Iterator<Item = (usize, usize, usize, usize, usize, usize, usize, usize)> {
    let n = d.pow(8);
    (0..n).map(move |mut z| {
        let mut take = || {
            let r = z % d;
            z /= d;
            r
        };
        let jp = take();
        let j = take();
        let ip = take();
        let i = take();
        let lp = take();
        let l = take();
        let kp = take();
        let k = take();
        (k, kp, l, lp, i, ip, j, jp)
    })
}

/// The qubit dual-unitary family `U(p)` with `J(p) = arcsin(sqrt(1 - 3p/2))`.
///
/// The phases carry `J/2`: with the full angle the entangling power is not
/// `p`, and at `p = 0` the gate would not reduce to a phase times SWAP.
pub fn du_gate(p: f64, d: usize) -> Result<LocalGate> {
    if d != 2 {
        return Err(Error::Unsupported(format!("du_gate family is qubit-only, got d = {d}")));
    }
    if !(0.0..=2.0 / 3.0 + 1e-15).contains(&p) {
        return domain(format!("du_gate needs p in [0, 2/3], got {p}"));
    }
    let j = 0.5 * (1.0 - 1.5 * p).max(0.0).sqrt().asin();
    let diag = C64::from_polar(1.0, -j);
    let off = C64::new(0.0, -1.0) * C64::from_polar(1.0, j);
    let mut u = Mat::from_fn(4, 4, |_, _| ZERO);
    u[(0, 0)] = diag;
    u[(3, 3)] = diag;
    u[(1, 2)] = off;
    u[(2, 1)] = off;
    LocalGate::new(2, u)
}

/// `(u+ (x) u-) U (v+ (x) v-)`.
pub fn dressed_gate(base: &LocalGate, u_plus: &CMat, u_minus: &CMat, v_plus: &CMat, v_minus: &CMat) -> Result<LocalGate> {
    let d = base.d;
    for (name, m) in [("u+", u_plus), ("u-", u_minus), ("v+", v_plus), ("v-", v_minus)] {
        if m.nrows() != d || m.ncols() != d {
            return domain(format!("dressing {name} must be {d}x{d}"));
        }
        let def = linalg::unitary_defect(m);
        if def >= UNITARY_TOL {
            return Err(Error::Validation(format!("dressing {name} unitary defect {def:.3e}")));
        }
    }
    let left = linalg::kron(u_plus, u_minus);
    let right = linalg::kron(v_plus, v_minus);
    LocalGate::new(d, &left * base.matrix() * &right)
}

/// The fixed one-site dressings `[u+, u-, v+, v-]` used for the dual-unitary
/// experiments. The printed values carry three decimals, so each one is
/// replaced by its nearest unitary.
pub fn appe_dressings() -> [CMat; 4] {
    let c = C64::new;
    let raw = [
        [[c(0.204, -0.971), c(-0.108, -0.068)], [c(0.125, 0.0254), c(-0.524, 0.842)]],
        [[c(-0.279, -0.921), c(0.238, 0.132)], [c(-0.272, 0.017), c(-0.649, 0.710)]],
        [[c(-0.025, -0.367), c(-0.921, -0.127)], [c(0.908, -0.202), c(0.005, 0.368)]],
        [[c(0.380, -0.321), c(0.436, 0.750)], [c(0.807, 0.318), c(0.260, -0.424)]],
    ];
    raw.map(|m| {
        let a = Mat::from_fn(2, 2, |i, j| m[i][j]);
        linalg::nearest_unitary(&a).expect("2x2 svd")
    })
}

/// `U(p)` dressed with the fixed one-site unitaries of [`appe_dressings`].
pub fn appe_gate(p: f64) -> Result<LocalGate> {
    let [up, um, vp, vm] = appe_dressings();
    dressed_gate(&du_gate(p, 2)?, &up, &um, &vp, &vm)
}

/// Haar-random two-site gate.
pub fn haar_gate(d: usize, rng: &mut impl Rng) -> LocalGate {
    LocalGate { d, u: linalg::haar_unitary(d * d, rng) }
}

/// The gate rotated by a right angle: `<ij|U^R|lk> = <li|U|kj>`.
pub fn rotate(u: &LocalGate) -> LocalGate {
    let d = u.d;
    let n = d * d;
    let m = Mat::from_fn(n, n, |r, c| {
        let (a, b, cc, e) = (r / d, r % d, c / d, c % d);
        u.entry(cc, a, e, b)
    });
    LocalGate { d, u: m }
}

/// Entangling power, reported raw unless within `1e-9` of `[0, 1]`.
pub fn entangling_power(u: &LocalGate) -> f64 {
    let d = u.d as f64;
    let term = |g: &LocalGate| {
        let r = rotate(g);
        let p = r.matrix() * r.matrix().adjoint();
        linalg::trace(&(&p * &p)).re
    };
    let us = LocalGate { d: u.d, u: u.matrix() * LocalGate::swap(u.d).matrix() };
    let d2 = d * d;
    let p = (d2 * d2 + d2 - term(u) - term(&us)) / (d2 * (d2 - 1.0));
    if (-1e-9..0.0).contains(&p) {
        0.0
    } else if (1.0..1.0 + 1e-9).contains(&p) {
        1.0
    } else {
        p
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GateProperties {
    pub unitary_defect: f64,
    pub dual_defect: f64,
    pub entangling_power: f64,
}

impl GateProperties {
    pub fn is_dual_unitary(&self) -> bool {
        self.dual_defect < UNITARY_TOL
    }
}

pub fn gate_properties(u: &LocalGate) -> GateProperties {
    GateProperties {
        unitary_defect: u.unitary_defect(),
        dual_defect: rotate(u).unitary_defect(),
        entangling_power: entangling_power(u),
    }
}
