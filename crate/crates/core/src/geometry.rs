//! Time-like paths, cuts and pair-product initial states.

use crate::error::{domain, Error, Result};
use crate::gates::UNITARY_TOL;
use crate::linalg::{self, CMat, C64, ZERO};
use faer::Mat;
use rand::Rng;
use serde::Serialize;
use std::fmt;
use std::str::FromStr;

/// A sequence of half-step jumps, listed from the observable (top) end.
///
/// `+1` moves one qudit to the right going down, `-1` one to the left.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Path {
    jumps: Vec<i8>,
}

impl Path {
    pub fn new(jumps: Vec<i8>) -> Result<Self> {
        if jumps.is_empty() {
            return domain("a path needs at least one jump");
        }
        if jumps.iter().any(|&j| j != 1 && j != -1) {
            return domain("jumps must be +1 or -1");
        }
        Ok(Self { jumps })
    }

    pub fn jumps(&self) -> &[i8] {
        &self.jumps
    }

    pub fn len(&self) -> usize {
        self.jumps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jumps.is_empty()
    }

    pub fn slope(&self) -> f64 {
        path_slope(self)
    }

    /// Number of up-pointing (`+`) legs.
    pub fn count_plus(&self) -> usize {
        self.jumps.iter().filter(|&&j| j > 0).count()
    }

    /// `tau_A` for the first `k` sites.
    pub fn tau_top(&self, k: usize) -> usize {
        self.jumps[..k].iter().filter(|&&j| j > 0).count()
    }

    /// Sites `range` as a path of their own.
    pub fn segment(&self, range: std::ops::Range<usize>) -> Result<Path> {
        Path::new(self.jumps[range].to_vec())
    }

    pub fn concat(&self, other: &Path) -> Path {
        let mut j = self.jumps.clone();
        j.extend_from_slice(&other.jumps);
        Path { jumps: j }
    }

    /// All proper contiguous bipartitions.
    pub fn cuts(&self) -> impl Iterator<Item = Cut> + '_ {
        (1..self.len()).map(move |k| Cut { k, n: self.len() })
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &j in &self.jumps {
            f.write_str(if j > 0 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

impl FromStr for Path {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let jumps = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c {
                '+' => Ok(1),
                '-' | '\u{2212}' => Ok(-1),
                other => Err(Error::Domain(format!("bad path symbol {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Path::new(jumps)
    }
}

pub fn path_slope(p: &Path) -> f64 {
    p.jumps.iter().map(|&j| j as f64).sum::<f64>() / p.len() as f64
}

pub fn mirror_path(p: &Path) -> Path {
    Path { jumps: p.jumps.iter().map(|&j| -j).collect() }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PathKind {
    Vertical,
    Lightcone,
    ConstantSlope(f64),
}

/// Canonical path with `2t` jumps.
pub fn canonical_path(kind: PathKind, t: usize) -> Result<Path> {
    canonical_path_len(kind, 2 * t)
}

/// Canonical path with `n` jumps; odd `n` gives the half-integer times.
///
/// The vertical path alternates starting with `+`. A constant slope uses the
/// most uniform interleaving, placing each `+` as early as the slope allows.
pub fn canonical_path_len(kind: PathKind, n: usize) -> Result<Path> {
    if n == 0 {
        return domain("path length must be positive");
    }
    let jumps = match kind {
        PathKind::Vertical => (0..n).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect(),
        PathKind::Lightcone => vec![1; n],
        PathKind::ConstantSlope(v) => {
            if !(-1.0..=1.0).contains(&v) {
                return domain(format!("slope {v} outside [-1, 1]"));
            }
            let plus = n as f64 * (1.0 + v) / 2.0;
            let p = plus.round();
            if (plus - p).abs() > 1e-9 {
                let lo = (2.0 * plus.floor() - n as f64) / n as f64;
                let hi = (2.0 * plus.ceil() - n as f64) / n as f64;
                return domain(format!(
                    "slope {v} not reachable with {n} jumps; nearest achievable slopes are {lo} and {hi}"
                ));
            }
            let p = p as usize;
            (1..=n)
                .map(|i| {
                    let c = |m: usize| (m * p).div_ceil(n);
                    if c(i) > c(i - 1) {
                        1
                    } else {
                        -1
                    }
                })
                .collect()
        }
    };
    Path::new(jumps)
}

/// A contiguous bipartition: the first `k` sites (from the observable end) form `A`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cut {
    pub k: usize,
    pub n: usize,
}

impl Cut {
    pub fn new(k: usize, n: usize) -> Result<Self> {
        if k == 0 || k >= n {
            return domain(format!("cut k = {k} is not proper for {n} sites"));
        }
        Ok(Self { k, n })
    }

    pub fn ratio(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    pub fn complement(&self) -> usize {
        self.n - self.k
    }
}

/// The `d x d` matrix `m` of the pair-product state `prod (m_ij / sqrt d) |i j>`.
#[derive(Clone, Debug)]
pub struct InitialStateMatrix {
    d: usize,
    m: CMat,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StateStats {
    pub c: f64,
    pub solvable: bool,
    pub norm_defect: f64,
}

impl InitialStateMatrix {
    pub fn new(d: usize, m: CMat) -> Result<Self> {
        if d < 2 || m.nrows() != d || m.ncols() != d {
            return domain(format!("initial-state matrix must be {d}x{d}"));
        }
        let s = Self { d, m };
        let def = s.norm_defect();
        if def > 1e-10 {
            return Err(Error::Validation(format!("tr[m m^dag] deviates from d by {def:.3e}")));
        }
        Ok(s)
    }

    /// Rescales `m` so that `tr[m m^dag] = d`.
    pub fn normalized(d: usize, m: CMat) -> Result<Self> {
        let n2: f64 = (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| m[(i, j)].norm_sqr()).sum();
        if !(n2 > 1e-300) {
            return Err(Error::Numerical("zero initial-state matrix".into()));
        }
        let s = (d as f64 / n2).sqrt();
        Self::new(d, Mat::from_fn(d, d, |i, j| m[(i, j)] * s))
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn matrix(&self) -> &CMat {
        &self.m
    }

    pub fn transpose(&self) -> Self {
        Self { d: self.d, m: self.m.transpose().to_owned() }
    }

    fn norm_defect(&self) -> f64 {
        let mm = &self.m * self.m.adjoint();
        (linalg::trace(&mm).re - self.d as f64).abs()
    }

    pub fn stats(&self) -> StateStats {
        state_stats(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialKind {
    Product { i0: usize, j0: usize },
    Unitary,
    Random,
    Interpolated { eps: f64 },
}

/// Builds an initial state. Random kinds draw from `rng`.
pub fn initial_state(kind: InitialKind, d: usize, rng: &mut impl Rng) -> Result<InitialStateMatrix> {
    match kind {
        InitialKind::Product { i0, j0 } => {
            if i0 >= d || j0 >= d {
                return domain("product indices out of range");
            }
            let a = C64::new((d as f64).sqrt(), 0.0);
            InitialStateMatrix::new(d, Mat::from_fn(d, d, |i, j| if (i, j) == (i0, j0) { a } else { ZERO }))
        }
        InitialKind::Unitary => InitialStateMatrix::new(d, linalg::haar_unitary(d, rng)),
        InitialKind::Random => {
            for _ in 0..10 {
                if let Ok(s) = InitialStateMatrix::normalized(d, linalg::complex_gaussian(d, d, rng)) {
                    return Ok(s);
                }
            }
            Err(Error::Numerical("ten degenerate Ginibre draws".into()))
        }
        InitialKind::Interpolated { eps } => {
            if !(0.0..=1.0).contains(&eps) {
                return domain(format!("eps = {eps} outside [0, 1]"));
            }
            let u = linalg::haar_unitary(d, rng);
            for _ in 0..10 {
                let g = linalg::complex_gaussian(d, d, rng);
                let m = Mat::from_fn(d, d, |i, j| u[(i, j)] * (1.0 - eps) + g[(i, j)] * eps);
                if let Ok(s) = InitialStateMatrix::normalized(d, m) {
                    return Ok(s);
                }
            }
            Err(Error::Numerical("ten degenerate interpolated draws".into()))
        }
    }
}

/// `c = tr[(m m^dag)^2] / d`, solvability (unitary `m`) and normalization defect.
pub fn state_stats(s: &InitialStateMatrix) -> StateStats {
    let mm = &s.m * s.m.adjoint();
    let c = linalg::trace(&(&mm * &mm)).re / s.d as f64;
    StateStats {
        c,
        solvable: linalg::unitary_defect(&s.m) < UNITARY_TOL,
        norm_defect: s.norm_defect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn slopes() {
        let p: Path = "-++++".parse::<Path>().unwrap().concat(&"+-+".parse().unwrap());
        assert_eq!(p.slope(), 0.5);
        assert_eq!(canonical_path(PathKind::Lightcone, 3).unwrap().to_string(), "++++++");
        assert_eq!(path_slope(&"+-+-".parse().unwrap()), 0.0);
        assert!(Path::new(vec![]).is_err());
    }

    #[test]
    fn canonical_paths() {
        assert_eq!(canonical_path(PathKind::Vertical, 2).unwrap().to_string(), "+-+-");
        let p = canonical_path(PathKind::ConstantSlope(0.5), 2).unwrap();
        assert_eq!(p.to_string(), "+++-");
        assert_eq!(p.slope(), 0.5);
        let p = canonical_path(PathKind::ConstantSlope(0.0), 3).unwrap();
        assert_eq!(p.to_string(), "+-+-+-");
        let e = canonical_path(PathKind::ConstantSlope(0.3), 2).unwrap_err().to_string();
        assert!(e.contains("0.5") && e.contains("0"), "{e}");
    }

    #[test]
    fn constant_slope_is_most_uniform() {
        // Every prefix stays within one jump of the ideal line.
        for n in 1..=12usize {
            for plus in 0..=n {
                let v = (2.0 * plus as f64 - n as f64) / n as f64;
                let p = canonical_path_len(PathKind::ConstantSlope(v), n).unwrap();
                assert_eq!(p.count_plus(), plus);
                let mut count = 0.0;
                for (i, &j) in p.jumps().iter().enumerate() {
                    count += if j > 0 { 1.0 } else { 0.0 };
                    let ideal = (i + 1) as f64 * plus as f64 / n as f64;
                    assert!((count - ideal).abs() < 1.0, "{p} at {i}");
                }
            }
        }
    }

    #[test]
    fn cut_enumeration() {
        let p = canonical_path(PathKind::Vertical, 3).unwrap();
        assert_eq!(p.cuts().count(), 5);
        assert!(Cut::new(0, 6).is_err());
        assert!(Cut::new(6, 6).is_err());
        assert_eq!(p.tau_top(3), 2);
    }

    #[test]
    fn initial_state_kinds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = initial_state(InitialKind::Unitary, 2, &mut rng).unwrap().stats();
        assert!((u.c - 1.0).abs() < 1e-12 && u.solvable);
        let p = initial_state(InitialKind::Product { i0: 0, j0: 0 }, 2, &mut rng).unwrap().stats();
        assert!((p.c - 2.0).abs() < 1e-12 && !p.solvable);
        let id = InitialStateMatrix::new(2, linalg::identity(2)).unwrap().stats();
        assert!((id.c - 1.0).abs() < 1e-15 && id.solvable);
    }

    #[test]
    fn interpolated_approaches_solvable() {
        let mut last = f64::INFINITY;
        for k in (0..=8).rev() {
            let eps = k as f64 / 16.0;
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            let c = initial_state(InitialKind::Interpolated { eps }, 3, &mut rng).unwrap().stats().c;
            assert!(c <= last + 1e-12, "c not monotone at eps = {eps}");
            last = c;
        }
        assert!((last - 1.0).abs() < 1e-12);
    }

    #[test]
    fn c_range_and_solvability_both_ways() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for i in 0..100 {
            let d = 2 + i % 3;
            let kind = if i % 2 == 0 { InitialKind::Unitary } else { InitialKind::Random };
            let s = initial_state(kind, d, &mut rng).unwrap().stats();
            assert!(s.c >= 1.0 - 1e-12 && s.c <= d as f64 + 1e-12);
            assert!(s.norm_defect < 1e-10);
            assert_eq!(s.solvable, (s.c - 1.0).abs() < 1e-9, "draw {i}: c = {}", s.c);
            assert_eq!(s.solvable, kind == InitialKind::Unitary);
        }
    }

    proptest! {
        #[test]
        fn mirror_negates(j in proptest::collection::vec(prop_oneof![Just(1i8), Just(-1i8)], 1..40)) {
            let p = Path::new(j).unwrap();
            let m = mirror_path(&p);
            prop_assert_eq!(m.slope(), -p.slope());
            prop_assert_eq!(mirror_path(&m), p.clone());
            prop_assert!(p.slope().abs() <= 1.0);
            prop_assert_eq!(p.to_string().parse::<Path>().unwrap(), p);
        }
    }
}
