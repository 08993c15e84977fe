//! Arrangements of n+1 hyperspheres in R^n.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::cayley_menger::CmTable;
use crate::error::{Error, Result};
use crate::intersect;

/// Relative threshold below which a determinant sign is not trusted.
pub const SIGN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Arrangement {
    n: usize,
    centers: Vec<DVector<f64>>,
    radii: Vec<f64>,
    dist_sq: DMatrix<f64>,
}

impl Arrangement {
    pub fn from_centers_radii(centers: Vec<Vec<f64>>, radii: Vec<f64>) -> Result<Self> {
        let pts = centers.into_iter().map(DVector::from_vec).collect();
        Self::from_points(pts, radii)
    }

    pub fn from_points(centers: Vec<DVector<f64>>, radii: Vec<f64>) -> Result<Self> {
        let m = centers.len();
        if m < 3 {
            return Err(Error::InvalidInput(format!("need at least 3 spheres, got {m}")));
        }
        let n = m - 1;
        if radii.len() != m {
            return Err(Error::InvalidInput(format!("{m} centers but {} radii", radii.len())));
        }
        if let Some(bad) = centers.iter().position(|c| c.len() != n) {
            return Err(Error::InvalidInput(format!(
                "center {} has dimension {}, expected {n}",
                bad + 1,
                centers[bad].len()
            )));
        }
        if let Some(index) = radii.iter().position(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(Error::NonPositiveRadius { index });
        }
        if centers.iter().any(|c| c.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidInput("non-finite center coordinate".into()));
        }
        let dist_sq = DMatrix::from_fn(m, m, |j, k| (&centers[j] - &centers[k]).norm_squared());
        Ok(Arrangement { n, centers, radii, dist_sq })
    }

    /// Embed the parameters by classical multidimensional scaling, then fix
    /// the gauge: last center at the origin, the one before it on the first
    /// axis, and so on, each with a positive leading coordinate.
    pub fn from_params(p: &ParamVector) -> Result<Self> {
        let n = p.n;
        let m = n + 1;
        let mut d = DMatrix::zeros(m, m);
        let mut radii = vec![0.0; m];
        for (key, value) in &p.entries {
            match *key {
                Param::RadiusSq(j) => {
                    if !(*value > 0.0) {
                        return Err(Error::NonPositiveRadius { index: j });
                    }
                    radii[j] = value.sqrt();
                }
                Param::DistSq(j, k) => {
                    if !(*value > 0.0) {
                        return Err(Error::InvalidInput(format!(
                            "squared distance {},{} must be positive",
                            j + 1,
                            k + 1
                        )));
                    }
                    d[(j, k)] = *value;
                    d[(k, j)] = *value;
                }
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "parameter {key} does not belong to the euclidean model"
                    )))
                }
            }
        }
        let scale = d.iter().fold(0.0f64, |a, v| a.max(*v));
        let centering = DMatrix::from_fn(m, m, |i, j| {
            (if i == j { 1.0 } else { 0.0 }) - 1.0 / m as f64
        });
        let gram = (&centering * &d * &centering) * -0.5;
        let eig = SymmetricEigen::new(gram);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let smallest = eig.eigenvalues[order[m - 1]];
        if smallest < -SIGN_TOL * scale {
            return Err(Error::NonRealizable { eigenvalue: smallest });
        }
        if eig.eigenvalues[order[n - 1]] <= SIGN_TOL * scale {
            return Err(Error::Degenerate(format!(
                "centers span fewer than {n} dimensions"
            )));
        }
        let pts: Vec<DVector<f64>> = (0..m)
            .map(|i| {
                DVector::from_fn(n, |c, _| {
                    let k = order[c];
                    eig.eigenvectors[(i, k)] * eig.eigenvalues[k].sqrt()
                })
            })
            .collect();
        let (frame, origin) = triangular_frame(&pts, 1.0, scale)?;
        let centers = pts.iter().map(|x| &frame * (x - &origin)).collect();
        Self::from_points(centers, radii)
    }

    pub fn params(&self) -> ParamVector {
        let mut entries = Vec::new();
        for j in 0..=self.n {
            entries.push((Param::RadiusSq(j), self.radius_sq(j)));
        }
        for j in 0..=self.n {
            for k in j + 1..=self.n {
                entries.push((Param::DistSq(j, k), self.dist_sq(j, k)));
            }
        }
        ParamVector { n: self.n, entries }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of spheres, n+1.
    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn center(&self, j: usize) -> &DVector<f64> {
        &self.centers[j]
    }

    pub fn centers(&self) -> &[DVector<f64>] {
        &self.centers
    }

    pub fn radius(&self, j: usize) -> f64 {
        self.radii[j]
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn radius_sq(&self, j: usize) -> f64 {
        self.radii[j] * self.radii[j]
    }

    pub fn dist_sq(&self, j: usize, k: usize) -> f64 {
        self.dist_sq[(j, k)]
    }

    pub fn dist(&self, j: usize, k: usize) -> f64 {
        self.dist_sq[(j, k)].sqrt()
    }

    /// Largest squared length in the data; sets the unit for tolerances.
    pub fn scale(&self) -> f64 {
        let r = self.radii.iter().fold(0.0f64, |a, r| a.max(r * r));
        self.dist_sq.iter().fold(r, |a, v| a.max(*v))
    }

    /// f_j(x) = |x - O_j|^2 - r_j^2.
    pub fn f(&self, j: usize, x: &[f64]) -> f64 {
        let c = &self.centers[j];
        let mut s = 0.0;
        for (xi, ci) in x.iter().zip(c.iter()) {
            let d = xi - ci;
            s += d * d;
        }
        s - self.radii[j] * self.radii[j]
    }

    pub fn grad_f(&self, j: usize, x: &[f64]) -> DVector<f64> {
        DVector::from_fn(self.n, |i, _| 2.0 * (x[i] - self.centers[j][i]))
    }

    pub fn chamber_contains(&self, c: &Chamber, x: &[f64]) -> bool {
        (0..=self.n).all(|j| {
            let v = self.f(j, x);
            match c.side(j) {
                Side::Inside => v <= 0.0,
                Side::Outside => v >= 0.0,
            }
        })
    }

    pub fn transformed(&self, motion: &RigidMotion) -> Arrangement {
        let centers = self.centers.iter().map(|c| motion.apply(c)).collect();
        Arrangement::from_points(centers, self.radii.clone()).expect("isometry keeps validity")
    }

    /// Same arrangement with spheres relabeled: new sphere i is old `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Arrangement {
        let centers = perm.iter().map(|&i| self.centers[i].clone()).collect();
        let radii = perm.iter().map(|&i| self.radii[i]).collect();
        Arrangement::from_points(centers, radii).expect("relabeling keeps validity")
    }

    /// Similarity transform taking the last sphere to the unit sphere at the origin.
    pub fn restrict_to_unit_sphere(&self) -> Arrangement {
        let o = self.centers[self.n].clone();
        let s = 1.0 / self.radii[self.n];
        let centers = self.centers.iter().map(|c| (c - &o) * s).collect();
        let radii = self.radii.iter().map(|r| r * s).collect();
        Arrangement::from_points(centers, radii).expect("similarity keeps validity")
    }

    /// Move to the coordinates in which the last center is the origin and
    /// center j has nonzero entries only in its first n+1-j coordinates
    /// (1-based j), with f_j = Q + 2 sum alpha_{j,nu} x_nu + alpha_{j0} and
    /// alpha_{j,n+1-j} > 0.
    pub fn normalize(&self) -> Result<Normalized> {
        let table = CmTable::new(self);
        for p in 2..=self.n + 1 {
            let set: Vec<usize> = (self.n + 1 - p..=self.n).collect();
            let v = sign_pow(p) * table.b0(&set);
            if !(v > SIGN_TOL * self.scale().powi(p as i32 - 1)) {
                return Err(Error::Hypothesis(format!(
                    "(-1)^p B(0 J) > 0 fails for J = {}",
                    set_label(&set)
                )));
            }
        }
        let (frame, origin) = triangular_frame(&self.centers, -1.0, self.scale())?;
        let motion = RigidMotion { rotation: frame, origin };
        Ok(Normalized { arrangement: self.transformed(&motion), motion })
    }

    pub fn check_hypotheses(&self) -> HypothesisReport {
        let table = CmTable::new(self);
        let n = self.n;
        let scale = self.scale();
        let mut subsets = Vec::new();
        for mask in 1u32..(1u32 << (n + 1)) {
            let set: Vec<usize> = (0..=n).filter(|j| mask & (1 << j) != 0).collect();
            let p = set.len();
            let b0 = table.b0(&set);
            let b0_star = table.b0_star(&set);
            subsets.push(SubsetSigns {
                b0_sign: Sign::classify(sign_pow(p) * b0, SIGN_TOL * scale.powi(p as i32 - 1)),
                b0_star_sign: Sign::classify(sign_pow(p + 1) * b0_star, SIGN_TOL * scale.powi(p as i32)),
                set,
                b0,
                b0_star,
            });
        }
        subsets.sort_by(|a, b| a.set.len().cmp(&b.set.len()).then(a.set.cmp(&b.set)));
        let mut lower = Truth::True;
        let mut top_b0 = Truth::True;
        let mut top_star = Sign::Positive;
        for s in &subsets {
            if s.set.len() <= n {
                lower = lower.and(s.b0_sign.truth()).and(s.b0_star_sign.truth());
            } else {
                top_b0 = s.b0_sign.truth();
                top_star = s.b0_star_sign;
            }
        }
        let h1 = lower.and(top_b0).and(top_star.truth());
        let h1_prime = lower.and(top_b0).and(top_star.flipped().truth());
        let (h2, vertex_coords) = self.check_h2();
        HypothesisReport { h1, h1_prime, h2, vertex_coords, subsets }
    }

    fn check_h2(&self) -> (Truth, Vec<Option<f64>>) {
        let n = self.n;
        let norm = match self.normalize() {
            Ok(v) => v,
            Err(_) => return (Truth::Indeterminate, vec![None; n]),
        };
        let b = &norm.arrangement;
        let tol = SIGN_TOL * self.scale().sqrt();
        let mut truth = Truth::True;
        let mut coords = Vec::new();
        for j in 0..n {
            match intersect::vertices(b, j) {
                Ok(pair) => {
                    let v = pair.p[n - 1 - j];
                    coords.push(Some(v));
                    truth = truth.and(Sign::classify(-v, tol).truth());
                }
                Err(_) => {
                    coords.push(None);
                    truth = truth.and(Truth::Indeterminate);
                }
            }
        }
        (truth, coords)
    }

    /// Hypotheses required for the contiguity relations: (H1 and H2) or H1'.
    pub fn hypotheses_hold(&self) -> Truth {
        let r = self.check_hypotheses();
        r.h1.and(r.h2).or(r.h1_prime)
    }
}

/// (-1)^p as a float.
pub fn sign_pow(p: usize) -> f64 {
    if p % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// 1-based label such as "{1,2,4}".
pub fn set_label(set: &[usize]) -> String {
    let inner: Vec<String> = set.iter().map(|j| (j + 1).to_string()).collect();
    format!("{{{}}}", inner.join(","))
}

/// Rows of the returned matrix are orthonormal axes built by Gram-Schmidt
/// on the centers taken from last-but-one down to first, relative to the
/// last. `sign` picks the orientation of each new axis relative to the
/// residual of its center.
fn triangular_frame(
    pts: &[DVector<f64>],
    sign: f64,
    scale: f64,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let n = pts.len() - 1;
    let origin = pts[n].clone();
    let mut axes: Vec<DVector<f64>> = Vec::with_capacity(n);
    for j in (0..n).rev() {
        let mut v = &pts[j] - &origin;
        for _ in 0..2 {
            for e in &axes {
                let c = e.dot(&v);
                v -= e * c;
            }
        }
        let norm = v.norm();
        if norm <= 1e-10 * scale.sqrt() {
            return Err(Error::Degenerate(format!(
                "center {} lies in the span of the later centers",
                j + 1
            )));
        }
        axes.push(v * (sign / norm));
    }
    let frame = DMatrix::from_fn(n, n, |r, c| axes[r][c]);
    Ok((frame, origin))
}

/// x -> rotation * (x - origin).
#[derive(Debug, Clone, PartialEq)]
pub struct RigidMotion {
    pub rotation: DMatrix<f64>,
    pub origin: DVector<f64>,
}

impl RigidMotion {
    pub fn identity(n: usize) -> Self {
        RigidMotion { rotation: DMatrix::identity(n, n), origin: DVector::zeros(n) }
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.rotation * (x - &self.origin)
    }
}

#[derive(Debug, Clone)]
pub struct Normalized {
    pub arrangement: Arrangement,
    pub motion: RigidMotion,
}

impl Normalized {
    /// alpha_{j,nu} for 0-based sphere j and 0-based axis nu.
    pub fn alpha(&self, j: usize, nu: usize) -> f64 {
        -self.arrangement.center(j)[nu]
    }

    pub fn alpha0(&self, j: usize) -> f64 {
        self.arrangement.center(j).norm_squared() - self.arrangement.radius_sq(j)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Truth {
    True,
    False,
    Indeterminate,
}

impl Truth {
    pub fn and(self, other: Truth) -> Truth {
        match (self, other) {
            (Truth::False, _) | (_, Truth::False) => Truth::False,
            (Truth::True, Truth::True) => Truth::True,
            _ => Truth::Indeterminate,
        }
    }

    pub fn or(self, other: Truth) -> Truth {
        match (self, other) {
            (Truth::True, _) | (_, Truth::True) => Truth::True,
            (Truth::False, Truth::False) => Truth::False,
            _ => Truth::Indeterminate,
        }
    }

    pub fn is_true(self) -> bool {
        self == Truth::True
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Positive,
    Negative,
    Indeterminate,
}

impl Sign {
    pub fn classify(v: f64, tol: f64) -> Sign {
        if v.abs() <= tol || !v.is_finite() {
            Sign::Indeterminate
        } else if v > 0.0 {
            Sign::Positive
        } else {
            Sign::Negative
        }
    }

    fn truth(self) -> Truth {
        match self {
            Sign::Positive => Truth::True,
            Sign::Negative => Truth::False,
            Sign::Indeterminate => Truth::Indeterminate,
        }
    }

    fn flipped(self) -> Sign {
        match self {
            Sign::Positive => Sign::Negative,
            Sign::Negative => Sign::Positive,
            Sign::Indeterminate => Sign::Indeterminate,
        }
    }
}

/// Signs of (-1)^p B(0 J) and (-1)^(p+1) B(0* J) for one subset J.
#[derive(Debug, Clone, Serialize)]
pub struct SubsetSigns {
    pub set: Vec<usize>,
    pub b0: f64,
    pub b0_star: f64,
    pub b0_sign: Sign,
    pub b0_star_sign: Sign,
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub h1: Truth,
    pub h1_prime: Truth,
    pub h2: Truth,
    /// Designated coordinate of each vertex P_j in normalized coordinates.
    pub vertex_coords: Vec<Option<f64>>,
    pub subsets: Vec<SubsetSigns>,
}

impl HypothesisReport {
    pub fn verdict(&self) -> Truth {
        self.h1.and(self.h2).or(self.h1_prime)
    }

    /// Subsets whose sign could not be decided.
    pub fn indeterminate_subsets(&self) -> Vec<&SubsetSigns> {
        self.subsets
            .iter()
            .filter(|s| s.b0_sign == Sign::Indeterminate || s.b0_star_sign == Sign::Indeterminate)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Side {
    Inside,
    Outside,
}

/// One sign per sphere: Inside selects f_j <= 0, Outside f_j >= 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Chamber {
    signs: Vec<Side>,
}

impl Chamber {
    pub fn new(signs: Vec<Side>) -> Self {
        Chamber { signs }
    }

    pub fn all_inside(len: usize) -> Self {
        Chamber { signs: vec![Side::Inside; len] }
    }

    pub fn all_outside(len: usize) -> Self {
        Chamber { signs: vec![Side::Outside; len] }
    }

    /// Chamber with the spheres in `inside` taken from the inside.
    pub fn with_inside(len: usize, inside: &[usize]) -> Self {
        let signs = (0..len)
            .map(|j| if inside.contains(&j) { Side::Inside } else { Side::Outside })
            .collect();
        Chamber { signs }
    }

    /// Accepts "--+" or "-,-,+".
    pub fn parse(s: &str, len: usize) -> Result<Self> {
        let signs: Vec<Side> = s
            .chars()
            .filter(|c| !c.is_whitespace() && *c != ',')
            .map(|c| match c {
                '-' => Ok(Side::Inside),
                '+' => Ok(Side::Outside),
                other => Err(Error::InvalidInput(format!("bad chamber sign {other:?}"))),
            })
            .collect::<Result<_>>()?;
        if signs.len() != len {
            return Err(Error::InvalidInput(format!(
                "chamber has {} signs, arrangement has {len} spheres",
                signs.len()
            )));
        }
        Ok(Chamber { signs })
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    pub fn side(&self, j: usize) -> Side {
        self.signs[j]
    }

    pub fn inside_set(&self) -> Vec<usize> {
        (0..self.signs.len()).filter(|&j| self.signs[j] == Side::Inside).collect()
    }

    pub fn is_all_inside(&self) -> bool {
        self.signs.iter().all(|s| *s == Side::Inside)
    }

    pub fn is_all_outside(&self) -> bool {
        self.signs.iter().all(|s| *s == Side::Outside)
    }
}

impl fmt::Display for Chamber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.signs {
            f.write_str(if *s == Side::Inside { "-" } else { "+" })?;
        }
        Ok(())
    }
}

/// Coordinate of a parameter space. Sphere indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Param {
    RadiusSq(usize),
    DistSq(usize, usize),
    /// a'_{j0} of the configuration matrix.
    Offset(usize),
    /// a'_{jk} of the configuration matrix, j < k.
    Coupling(usize, usize),
}

impl Param {
    pub fn dist(j: usize, k: usize) -> Param {
        Param::DistSq(j.min(k), j.max(k))
    }

    pub fn coupling(j: usize, k: usize) -> Param {
        Param::Coupling(j.min(k), j.max(k))
    }

    /// Parse "r2:1", "rho2:1,2", "a:1,0" or "a:1,2" (1-based indices).
    pub fn parse(s: &str) -> Result<Param> {
        let bad = || Error::InvalidInput(format!("bad parameter name {s:?}"));
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        let idx: Vec<usize> = rest
            .split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        match (kind.trim(), idx.as_slice()) {
            ("r2", [j]) if *j >= 1 => Ok(Param::RadiusSq(j - 1)),
            ("rho2", [j, k]) if *j >= 1 && *k >= 1 && j != k => Ok(Param::dist(j - 1, k - 1)),
            ("a", [j, 0]) | ("a", [0, j]) if *j >= 1 => Ok(Param::Offset(j - 1)),
            ("a", [j, k]) if *j >= 1 && *k >= 1 && j != k => Ok(Param::coupling(j - 1, k - 1)),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Param::RadiusSq(j) => write!(f, "r2:{}", j + 1),
            Param::DistSq(j, k) => write!(f, "rho2:{},{}", j + 1, k + 1),
            Param::Offset(j) => write!(f, "a:{},0", j + 1),
            Param::Coupling(j, k) => write!(f, "a:{},{}", j + 1, k + 1),
        }
    }
}

/// Values of r_j^2 and rho_jk^2 in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub n: usize,
    pub entries: Vec<(Param, f64)>,
}

impl ParamVector {
    pub fn get(&self, key: Param) -> Option<f64> {
        self.entries.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
    }

    pub fn keys(&self) -> Vec<Param> {
        self.entries.iter().map(|(k, _)| *k).collect()
    }

    /// Copy with `key` shifted by `delta`.
    pub fn shifted(&self, key: Param, delta: f64) -> Result<ParamVector> {
        let mut out = self.clone();
        let slot = out
            .entries
            .iter_mut()
            .find(|(k, _)| *k == key)
            .ok_or_else(|| Error::InvalidInput(format!("unknown parameter {key}")))?;
        slot.1 += delta;
        Ok(out)
    }
}

/// Serialized arrangement, in either of the two accepted shapes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ArrangementSpec {
    Centers {
        n: usize,
        centers: Vec<Vec<f64>>,
        radii: Vec<f64>,
    },
    Params {
        n: usize,
        radii_sq: Vec<f64>,
        dist_sq: BTreeMap<String, f64>,
    },
}

impl ArrangementSpec {
    pub fn n(&self) -> usize {
        match self {
            ArrangementSpec::Centers { n, .. } | ArrangementSpec::Params { n, .. } => *n,
        }
    }

    pub fn build(&self) -> Result<Arrangement> {
        match self {
            ArrangementSpec::Centers { n, centers, radii } => {
                if centers.len() != n + 1 {
                    return Err(Error::InvalidInput(format!(
                        "n = {n} needs {} centers, got {}",
                        n + 1,
                        centers.len()
                    )));
                }
                Arrangement::from_centers_radii(centers.clone(), radii.clone())
            }
            ArrangementSpec::Params { n, radii_sq, dist_sq } => {
                let pv = parse_param_spec(*n, radii_sq, dist_sq)?;
                Arrangement::from_params(&pv)
            }
        }
    }

    pub fn from_arrangement(a: &Arrangement) -> Self {
        ArrangementSpec::Centers {
            n: a.n(),
            centers: a.centers().iter().map(|c| c.iter().copied().collect()).collect(),
            radii: a.radii().to_vec(),
        }
    }
}

fn parse_param_spec(
    n: usize,
    radii_sq: &[f64],
    dist_sq: &BTreeMap<String, f64>,
) -> Result<ParamVector> {
    if n < 2 {
        return Err(Error::InvalidInput("n must be at least 2".into()));
    }
    if radii_sq.len() != n + 1 {
        return Err(Error::InvalidInput(format!(
            "expected {} radii_sq, got {}",
            n + 1,
            radii_sq.len()
        )));
    }
    let mut pairs: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (key, value) in dist_sq {
        let bad = || Error::InvalidInput(format!("bad dist_sq key {key:?}"));
        let (a, b) = key.split_once(',').ok_or_else(bad)?;
        let j: usize = a.trim().parse().map_err(|_| bad())?;
        let k: usize = b.trim().parse().map_err(|_| bad())?;
        if j == 0 || k == 0 || j > n + 1 || k > n + 1 || j == k {
            return Err(bad());
        }
        if pairs.insert((j.min(k) - 1, j.max(k) - 1), *value).is_some() {
            return Err(Error::InvalidInput(format!("duplicate dist_sq entry {key:?}")));
        }
    }
    let mut entries: Vec<(Param, f64)> =
        radii_sq.iter().enumerate().map(|(j, v)| (Param::RadiusSq(j), *v)).collect();
    for j in 0..=n {
        for k in j + 1..=n {
            let v = pairs.get(&(j, k)).ok_or_else(|| {
                Error::InvalidInput(format!("missing dist_sq entry \"{},{}\"", j + 1, k + 1))
            })?;
            entries.push((Param::DistSq(j, k), *v));
        }
    }
    Ok(ParamVector { n, entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn equilateral(side: f64, r: f64) -> Arrangement {
        Arrangement::from_centers_radii(
            vec![vec![0.0, 0.0], vec![side, 0.0], vec![0.5 * side, side * 3f64.sqrt() / 2.0]],
            vec![r; 3],
        )
        .unwrap()
    }

    #[test]
    fn equilateral_distances() {
        let a = Arrangement::from_centers_radii(
            vec![vec![0.0, 0.0], vec![1.5, 0.0], vec![0.75, 3f64.sqrt() * 0.75]],
            vec![1.0; 3],
        )
        .unwrap();
        for j in 0..3 {
            for k in 0..3 {
                if j != k {
                    assert!((a.dist(j, k) - 1.5).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn right_triangle_distances() {
        let a = Arrangement::from_centers_radii(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![1.0; 3],
        )
        .unwrap();
        assert!((a.dist(0, 1) - 1.0).abs() < 1e-15);
        assert!((a.dist(0, 2) - 1.0).abs() < 1e-15);
        assert!((a.dist(1, 2) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn constructor_rejects_bad_input() {
        assert!(matches!(
            Arrangement::from_centers_radii(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]], vec![1.0, 0.0, 1.0]),
            Err(Error::NonPositiveRadius { index: 1 })
        ));
        assert!(Arrangement::from_centers_radii(vec![vec![0.0], vec![1.0, 0.0], vec![0.0, 1.0]], vec![1.0; 3]).is_err());
    }

    #[test]
    fn params_round_trip_equilateral() {
        let mut entries: Vec<(Param, f64)> = (0..3).map(|j| (Param::RadiusSq(j), 1.0)).collect();
        for (j, k) in [(0, 1), (0, 2), (1, 2)] {
            entries.push((Param::DistSq(j, k), 2.25));
        }
        let a = Arrangement::from_params(&ParamVector { n: 2, entries }).unwrap();
        for (j, k) in [(0, 1), (0, 2), (1, 2)] {
            assert!((a.dist_sq(j, k) - 2.25).abs() < 1e-10);
        }
        // gauge: last center at origin, second on the first axis
        assert!(a.center(2).norm() < 1e-12);
        assert!(a.center(1)[1].abs() < 1e-12 && a.center(1)[0] > 0.0);
        assert!(a.center(0)[1] > 0.0);
    }

    #[test]
    fn params_reject_triangle_violation() {
        let mut entries: Vec<(Param, f64)> = (0..3).map(|j| (Param::RadiusSq(j), 1.0)).collect();
        entries.push((Param::DistSq(0, 1), 1.0));
        entries.push((Param::DistSq(0, 2), 1.0));
        entries.push((Param::DistSq(1, 2), 4.000001));
        let err = Arrangement::from_params(&ParamVector { n: 2, entries }).unwrap_err();
        assert!(matches!(err, Error::NonRealizable { .. } | Error::Degenerate(_)));
    }

    #[test]
    fn tetrahedron_round_trip() {
        let mut entries: Vec<(Param, f64)> = (0..4).map(|j| (Param::RadiusSq(j), 1.0)).collect();
        for j in 0..4 {
            for k in j + 1..4 {
                entries.push((Param::DistSq(j, k), 2.25));
            }
        }
        let a = Arrangement::from_params(&ParamVector { n: 3, entries }).unwrap();
        for j in 0..4 {
            for k in j + 1..4 {
                assert!((a.dist(j, k) - 1.5).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn f_values_for_unit_circle() {
        let a = Arrangement::from_centers_radii(
            vec![vec![0.0, 0.0], vec![5.0, 0.0], vec![0.0, 5.0]],
            vec![1.0; 3],
        )
        .unwrap();
        assert_eq!(a.f(0, &[0.0, 0.0]), -1.0);
        assert_eq!(a.f(0, &[1.0, 0.0]), 0.0);
        assert_eq!(a.f(0, &[2.0, 0.0]), 3.0);
    }

    #[test]
    fn chamber_membership() {
        let a = equilateral(1.5, 1.0);
        let c = Chamber::all_inside(3);
        let circumcenter = [0.75, 1.5 / (2.0 * 3f64.sqrt())];
        assert!(a.chamber_contains(&c, &circumcenter));
        assert!(!a.chamber_contains(&c, &[10.0, 10.0]));
        // (1, 0) lies on S_1
        let on = [1.0, 0.0];
        assert_eq!(a.f(0, &on), 0.0);
        let minus = Chamber::parse("-++", 3).unwrap();
        let plus = Chamber::parse("+++", 3).unwrap();
        assert_eq!(a.chamber_contains(&minus, &on), a.f(1, &on) >= 0.0 && a.f(2, &on) >= 0.0);
        assert_eq!(a.chamber_contains(&plus, &on), a.f(1, &on) >= 0.0 && a.f(2, &on) >= 0.0);
    }

    #[test]
    fn hypotheses_equilateral() {
        let r = equilateral(1.5, 1.0).check_hypotheses();
        assert_eq!(r.h1, Truth::True);
        assert_eq!(r.h2, Truth::True);
        let full = r.subsets.iter().find(|s| s.set.len() == 3).unwrap();
        assert!((-full.b0 - 15.1875).abs() < 1e-12);
        let pair = r.subsets.iter().find(|s| s.set == vec![0, 1]).unwrap();
        assert!((-pair.b0_star - 3.9375).abs() < 1e-12);
        for s in r.subsets.iter().filter(|s| s.set.len() == 1) {
            assert_eq!(s.b0, -1.0);
        }
    }

    #[test]
    fn hypotheses_disjoint() {
        let r = equilateral(3.0, 1.0).check_hypotheses();
        assert_eq!(r.h1, Truth::False);
        assert_eq!(r.verdict(), Truth::False);
    }

    #[test]
    fn hypotheses_prime_fixture() {
        let r = equilateral(1.5, 0.8).check_hypotheses();
        assert_eq!(r.h1, Truth::False);
        assert_eq!(r.h1_prime, Truth::True);
    }

    #[test]
    fn normalize_equilateral() {
        let a = equilateral(1.5, 1.0);
        let norm = a.normalize().unwrap();
        let b = &norm.arrangement;
        assert!(b.center(2).norm() < 1e-12);
        assert!((norm.alpha(1, 0) - 1.5).abs() < 1e-12);
        assert!(b.center(1)[1].abs() < 1e-12);
        assert!(norm.alpha(0, 1) > 0.0);
        let t = CmTable::new(b);
        let rhs = (t.b0(&[1, 2]) / 2.0).sqrt();
        assert!((norm.alpha(1, 0) - rhs).abs() < 1e-12);
    }

    #[test]
    fn normalize_fixed_point() {
        let a = equilateral(1.5, 1.0).normalize().unwrap().arrangement;
        let again = a.normalize().unwrap();
        let id = DMatrix::<f64>::identity(2, 2);
        assert!((&again.motion.rotation - id).norm() < 1e-12);
        assert!(again.motion.origin.norm() < 1e-12);
    }

    #[test]
    fn param_names_round_trip() {
        for p in [Param::RadiusSq(2), Param::DistSq(0, 3), Param::Offset(1), Param::Coupling(0, 2)] {
            assert_eq!(Param::parse(&p.to_string()).unwrap(), p);
        }
        assert!(Param::parse("rho2:1,1").is_err());
    }

    #[test]
    fn spec_forms_parse_to_same_geometry() {
        let a = equilateral(1.5, 1.0);
        let mut d = BTreeMap::new();
        d.insert("1,2".to_string(), 2.25);
        d.insert("1,3".to_string(), 2.25);
        d.insert("3,2".to_string(), 2.25);
        let spec = ArrangementSpec::Params { n: 2, radii_sq: vec![1.0; 3], dist_sq: d };
        let b = spec.build().unwrap();
        for j in 0..3 {
            for k in 0..3 {
                assert!((a.dist_sq(j, k) - b.dist_sq(j, k)).abs() < 1e-10);
            }
        }
    }
}
