//! Numerical checks of the contiguity relations and the pointwise identities.
//! Each check returns a report with the right-hand side split into terms.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::arrangement::{set_label, sign_pow, Arrangement, Chamber, Truth};
use crate::cayley_menger::{CmTable, Header};
use crate::error::{Error, Result};
use crate::intersect::{angles_pair_with, intersection_sphere_with, sphere_angle, triangle_angles_with, vertices_with};
use crate::linalg::{det, factorial, orthogonal_complement};
use crate::mc::{self, Rng};
use crate::restricted::SphereModel;
use crate::volume::{
    cell_volumes_mc, chamber_data, chamber_volume_mc, decomposition_cell_volume, simplex_volume, ChamberData,
    Region, VolumeEstimate,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Term {
    pub label: String,
    pub value: f64,
    pub std_error: f64,
}

impl Term {
    fn exact(label: impl Into<String>, value: f64) -> Self {
        Term { label: label.into(), value, std_error: 0.0 }
    }
}

/// A named comparison inside a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub label: String,
    pub computed: f64,
    pub expected: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub name: String,
    pub lhs: f64,
    pub lhs_std_error: f64,
    pub rhs: f64,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub hypotheses: Truth,
    pub terms: Vec<Term>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<Check>,
}

impl IdentityReport {
    /// rhs is the sum of `terms`; tolerance is three combined standard
    /// errors, at least `floor`.
    pub fn from_terms(name: &str, lhs: VolumeLike, terms: Vec<Term>, floor: f64, hypotheses: Truth) -> Self {
        let rhs: f64 = terms.iter().map(|t| t.value).sum();
        let var = lhs.std_error.powi(2) + terms.iter().map(|t| t.std_error.powi(2)).sum::<f64>();
        let tolerance = (3.0 * var.sqrt()).max(floor);
        let residual = (lhs.value - rhs).abs();
        IdentityReport {
            name: name.to_string(),
            lhs: lhs.value,
            lhs_std_error: lhs.std_error,
            rhs,
            residual,
            tolerance,
            pass: residual <= tolerance,
            hypotheses,
            terms,
            checks: Vec::new(),
        }
    }

    /// Pass only when the identity holds and its hypotheses are known to hold.
    pub fn status(&self) -> Truth {
        match self.hypotheses {
            Truth::False => Truth::False,
            Truth::Indeterminate if self.pass => Truth::Indeterminate,
            _ if self.pass => Truth::True,
            _ => Truth::False,
        }
    }
}

/// A value with a standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeLike {
    pub value: f64,
    pub std_error: f64,
}

impl VolumeLike {
    pub fn exact(value: f64) -> Self {
        VolumeLike { value, std_error: 0.0 }
    }

    fn scaled(v: &VolumeEstimate, k: f64) -> Self {
        VolumeLike { value: k * v.value, std_error: k.abs() * v.std_error }
    }
}

const EXACT_FLOOR: f64 = 1e-9;

/// sqrt((-1)^(p+1) B(0*J) / 2^p).
pub(crate) fn face_coef(t: &CmTable, set: &[usize]) -> f64 {
    let p = set.len();
    (sign_pow(p + 1) * t.b0_star(set) / 2f64.powi(p as i32)).max(0.0).sqrt()
}

/// sqrt((-1)^(n+1) B(0N) / 2^n).
pub(crate) fn top_coef(t: &CmTable) -> f64 {
    let n = t.arrangement().n();
    let all: Vec<usize> = (0..=n).collect();
    (sign_pow(n + 1) * t.b0(&all) / 2f64.powi(n as i32)).max(0.0).sqrt()
}

/// (n-p)!/(n-1)!.
pub(crate) fn level_coef(n: usize, p: usize) -> f64 {
    factorial(n - p) / factorial(n - 1)
}

fn face_terms(t: &CmTable, data: &ChamberData, sign: impl Fn(&[usize]) -> f64) -> Vec<Term> {
    let n = t.arrangement().n();
    let mut out = Vec::new();
    for (set, v) in &data.faces {
        if v.value == 0.0 {
            continue;
        }
        let k = -level_coef(n, set.len()) * sign(set) * face_coef(t, set);
        out.push(Term { label: format!("face {}", set_label(set)), value: k * v.value, std_error: k.abs() * v.std_error });
    }
    out
}

fn require(h: Truth, what: &str) -> Result<()> {
    if h == Truth::False {
        return Err(Error::Hypothesis(format!("{what} does not hold")));
    }
    Ok(())
}

/// n v(D) against the face expansion for the chamber inside every sphere.
pub fn check_theorem_i(a: &Arrangement, samples: u64, rng: &Rng) -> Result<IdentityReport> {
    let h = a.check_hypotheses();
    let hyp = h.h1.and(h.h2);
    require(hyp, "H1 and H2")?;
    let c = Chamber::all_inside(a.len());
    let data = chamber_data(a, &c, samples, rng)?;
    let t = CmTable::new(a);
    let n = a.n();
    let mut terms = face_terms(&t, &data, |s| sign_pow(s.len()));
    terms.push(Term::exact("determinant", sign_pow(n) * top_coef(&t) / factorial(n - 1)));
    Ok(IdentityReport::from_terms("thmI", VolumeLike::scaled(&data.volume, n as f64), terms, EXACT_FLOOR, hyp))
}

/// n v(D) against the face expansion for the bounded chamber outside every sphere.
pub fn check_theorem_ii(a: &Arrangement, samples: u64, rng: &Rng) -> Result<IdentityReport> {
    let hyp = a.check_hypotheses().h1_prime;
    require(hyp, "H1'")?;
    let c = Chamber::all_outside(a.len());
    let data = chamber_data(a, &c, samples, rng)?;
    if data.volume.value == 0.0 {
        return Err(Error::EmptyIntersection { set: (0..a.len()).collect() });
    }
    let t = CmTable::new(a);
    let n = a.n();
    let mut terms = face_terms(&t, &data, |_| 1.0);
    terms.push(Term::exact("determinant", top_coef(&t) / factorial(n - 1)));
    Ok(IdentityReport::from_terms("thmII", VolumeLike::scaled(&data.volume, n as f64), terms, EXACT_FLOOR, hyp))
}

/// Sum over the vertices in the closed chamber of the sign (-1)^{|J cap K|}
/// of their face J times +1 or -1 according to which of the two vertex
/// values 1/f_j takes.
pub(crate) fn vertex_signature(t: &CmTable, region: &Region) -> Result<f64> {
    let a = t.arrangement();
    let n = a.n();
    let inside = region.chamber().inside_set();
    let all: Vec<usize> = (0..=n).collect();
    let mut total = 0.0;
    for j in 0..=n {
        let rest: Vec<usize> = all.iter().copied().filter(|&k| k != j).collect();
        let pair = match vertices_with(t, j) {
            Ok(v) => v,
            Err(Error::EmptyIntersection { .. }) => continue,
            Err(e) => return Err(e),
        };
        let (r14, r15) = vertex_roots(t, j)?;
        let eps = sign_pow(rest.iter().filter(|k| inside.contains(k)).count());
        for x in [&pair.p, &pair.p_prime] {
            if !region.contains_on(x.as_slice(), &rest) {
                continue;
            }
            let v = 1.0 / a.f(j, x.as_slice());
            let pi = if (v - r14).abs() <= (v - r15).abs() { 1.0 } else { -1.0 };
            total += eps * pi;
        }
    }
    Ok(total)
}

/// The two closed-form values of 1/f_j at the vertices of S_{N minus j}.
pub fn vertex_roots(t: &CmTable, j: usize) -> Result<(f64, f64)> {
    let n = t.arrangement().n();
    let all: Vec<usize> = (0..=n).collect();
    let rest: Vec<usize> = all.iter().copied().filter(|&k| k != j).collect();
    let mut cols = vec![j];
    cols.extend(&rest);
    let num = t.b(Header::ZeroStar, &rest, Header::Zero, &cols);
    let prod = t.b0_star(&rest) * t.b0(&all);
    if prod < 0.0 {
        return Err(Error::Degenerate(format!("no real vertices for S_{}", set_label(&rest))));
    }
    let den = t.b0_star(&all);
    if den == 0.0 {
        return Err(Error::Degenerate("B(0*N) vanishes".into()));
    }
    let sq = prod.sqrt();
    Ok(((sign_pow(n + 1) * sq + num) / den, (sign_pow(n) * sq + num) / den))
}

/// The contiguity relation for an arbitrary chamber, inside the spheres
/// flagged '-' and outside the others. Needs only a generic arrangement, so
/// the reported hypotheses are always true.
pub fn check_chamber_identity(a: &Arrangement, c: &Chamber, samples: u64, rng: &Rng) -> Result<IdentityReport> {
    let hyp = Truth::True;
    let region = Region::new(a, c)?;
    let data = chamber_data(a, c, samples, rng)?;
    let t = CmTable::new(a);
    let n = a.n();
    let inside = c.inside_set();
    let eps = |s: &[usize]| sign_pow(s.iter().filter(|k| inside.contains(k)).count());
    let mut terms = face_terms(&t, &data, eps);
    let sig = vertex_signature(&t, &region)?;
    terms.push(Term::exact("determinant", top_coef(&t) * sig / ((n + 1) as f64 * factorial(n - 1))));
    Ok(IdentityReport::from_terms("chamber", VolumeLike::scaled(&data.volume, n as f64), terms, EXACT_FLOOR, hyp))
}

/// The inside-all-spheres expansion applied unchanged to another chamber.
pub fn check_chamber_identity_as_printed(a: &Arrangement, c: &Chamber, samples: u64, rng: &Rng) -> Result<IdentityReport> {
    let data = chamber_data(a, c, samples, rng)?;
    let t = CmTable::new(a);
    let n = a.n();
    let mut terms = face_terms(&t, &data, |s| sign_pow(s.len()));
    terms.push(Term::exact("determinant", sign_pow(n) * top_coef(&t) / factorial(n - 1)));
    Ok(IdentityReport::from_terms(
        "chamber-as-printed",
        VolumeLike::scaled(&data.volume, n as f64),
        terms,
        EXACT_FLOOR,
        a.hypotheses_hold(),
    ))
}

/// The pointwise identity at `points` normal draws around the centroid of
/// the centers, spread by the arrangement scale.
pub fn check_lemma5_random(a: &Arrangement, points: usize, seed: u64) -> Result<Vec<IdentityReport>> {
    use rand::SeedableRng;
    let mut g = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = a.n();
    let mid = a.centers().iter().fold(DVector::zeros(n), |acc, c| acc + c) / (n + 1) as f64;
    (0..points)
        .map(|_| {
            let x: Vec<f64> = crate::fixtures::random_point(&mut g, n)
                .iter()
                .zip(mid.iter())
                .map(|(z, m)| m + a.scale() * z)
                .collect();
            check_lemma5_pointwise(a, &x)
        })
        .collect()
}

/// Pointwise n-form identity at x, evaluated in normalized coordinates.
pub fn check_lemma5_pointwise(a: &Arrangement, x: &[f64]) -> Result<IdentityReport> {
    let n = a.n();
    if x.len() != n {
        return Err(Error::InvalidInput(format!("point has {} coordinates, expected {n}", x.len())));
    }
    for j in 0..=n {
        if a.f(j, x).abs() < 1e-12 * a.scale() {
            return Err(Error::Degenerate(format!("point lies on sphere {}", j + 1)));
        }
    }
    let norm = a.normalize()?;
    let b = &norm.arrangement;
    let y = norm.motion.apply(&DVector::from_column_slice(x));
    let y = y.as_slice();
    let t = CmTable::new(b);
    let all: Vec<usize> = (0..=n).collect();
    let f: Vec<f64> = all.iter().map(|&j| b.f(j, y)).collect();
    let grads: Vec<DVector<f64>> = all.iter().map(|&j| b.grad_f(j, y)).collect();

    let mut lhs = 0.0;
    for nu in 0..=n {
        let rest: Vec<usize> = all.iter().copied().filter(|&k| k != nu).collect();
        let m = DMatrix::from_fn(n, n, |r, c| grads[rest[r]][c]);
        let denom: f64 = rest.iter().map(|&k| f[k]).product();
        lhs += sign_pow(nu) * det(&m) / denom;
    }

    let b0n = sign_pow(n + 1) * 2f64.powi(n as i32) * t.b0(&all);
    if !(b0n > 0.0) {
        return Err(Error::Degenerate("centers are affinely dependent".into()));
    }
    let k = 2f64.powi(n as i32) * sign_pow(n * (n - 1) / 2 + 1) / b0n.sqrt();
    let mut terms = Vec::new();
    for nu in 0..=n {
        let rest: Vec<usize> = all.iter().copied().filter(|&q| q != nu).collect();
        let mut cols = vec![nu];
        cols.extend(&rest);
        let num = t.b(Header::ZeroStar, &rest, Header::Zero, &cols);
        let denom: f64 = rest.iter().map(|&q| f[q]).product();
        terms.push(Term::exact(format!("W0 {}", set_label(&rest)), -k * num / denom));
    }
    let fall: f64 = f.iter().product();
    terms.push(Term::exact(format!("W0 {}", set_label(&all)), k * t.b0_star(&all) / fall));
    let floor = 1e-10 * lhs.abs().max(1.0);
    Ok(IdentityReport::from_terms("lemma5", VolumeLike::exact(lhs), terms, floor, Truth::True))
}

/// Residue constant of df_{j1} ^ ... ^ df_{jp} on S_J at sampled points.
/// For J = {n-p+2, ..., n+1} (1-based) the signed constant is compared in
/// normalized coordinates; for other J only its magnitude.
pub fn check_prop4_residue(a: &Arrangement, set: &[usize], trials: usize, rng: &Rng) -> Result<IdentityReport> {
    let n = a.n();
    let p = set.len();
    let mut sorted = set.to_vec();
    sorted.sort_unstable();
    let canonical = sorted == ((n + 1 - p)..=n).collect::<Vec<usize>>();
    let norm = a.normalize()?;
    let b = &norm.arrangement;
    let t = CmTable::new(b);
    let s = intersection_sphere_with(&t, &sorted)?;
    let bstar = sign_pow(p + 1) * 2f64.powi(p as i32) * t.b0_star(&sorted);
    let signed = canonical;
    let expected = if !signed {
        1.0 / bstar.sqrt()
    } else if p < n {
        sign_pow((p - 1) * (p.saturating_sub(2)) / 2) / bstar.sqrt()
    } else {
        -sign_pow((n - 1) * (n - 2) / 2) / bstar.sqrt()
    };

    let mut points: Vec<DVector<f64>> = Vec::new();
    if let Some(two) = s.points() {
        if signed {
            // vertex where f of the missing sphere is smallest
            let pair = vertices_with(&t, 0)?;
            points.push(pair.p);
        } else {
            points.extend(two);
        }
    } else {
        let mut g = rng.batch(0);
        let mut w = vec![0.0; s.basis.len()];
        for _ in 0..trials.max(1) {
            mc::unit_vector(&mut g, &mut w);
            points.push(s.point(&w));
        }
    }

    let mut values = Vec::with_capacity(points.len());
    for x in &points {
        let rows: Vec<DVector<f64>> = sorted.iter().map(|&j| b.grad_f(j, x.as_slice())).collect();
        let g = DMatrix::from_fn(p, n, |r, c| rows[r][c]);
        let ggt = det(&(&g * g.transpose()));
        let value = if !signed {
            1.0 / ggt.sqrt()
        } else if p == n {
            1.0 / det(&g)
        } else {
            let tan = orthogonal_complement(&rows, n);
            let m = n - p + 1;
            let om = DMatrix::from_fn(m, m, |r, c| {
                if r == 0 {
                    x[p - 1 + c] / s.radius
                } else {
                    tan[r - 1][p - 1 + c]
                }
            });
            let full = DMatrix::from_fn(n, n, |r, c| if r < p { rows[r][c] } else { tan[r - p][c] });
            det(&full) / (ggt * det(&om))
        };
        values.push(value);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let spread = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64).sqrt();
    let worst = values.iter().map(|v| (v - expected).abs()).fold(0.0, f64::max);
    let tolerance = 1e-9 * expected.abs();
    Ok(IdentityReport {
        name: format!("prop4 {}", set_label(&sorted)),
        lhs: mean,
        lhs_std_error: 0.0,
        rhs: expected,
        residual: worst,
        tolerance,
        pass: worst <= tolerance,
        hypotheses: Truth::True,
        terms: vec![Term::exact(if signed { "signed constant" } else { "magnitude" }, expected)],
        checks: vec![Check { label: "spread".into(), computed: spread, expected: 0.0, residual: spread }],
    })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Values of 1/f_j at the two vertices of S_{N minus j} and their product.
pub fn check_prop6_values(a: &Arrangement, j: usize) -> Result<IdentityReport> {
    let n = a.n();
    if j > n {
        return Err(Error::InvalidInput(format!("sphere index {} out of range", j + 1)));
    }
    let t = CmTable::new(a);
    let pair = vertices_with(&t, j)?;
    let v = 1.0 / a.f(j, pair.p.as_slice());
    let vp = 1.0 / a.f(j, pair.p_prime.as_slice());
    let (r14, r15) = vertex_roots(&t, j)?;
    let rest: Vec<usize> = (0..=n).filter(|&k| k != j).collect();
    let all: Vec<usize> = (0..=n).collect();
    let prod = -t.b0(&rest) / t.b0_star(&all);
    let checks = vec![
        Check { label: "at P".into(), computed: v, expected: r14, residual: rel(v, r14) },
        Check { label: "at P'".into(), computed: vp, expected: r15, residual: rel(vp, r15) },
        Check { label: "product".into(), computed: v * vp, expected: prod, residual: rel(v * vp, prod) },
    ];
    let worst = checks.iter().map(|c| c.residual).fold(0.0, f64::max);
    Ok(IdentityReport {
        name: format!("prop6 j={}", j + 1),
        lhs: v,
        lhs_std_error: 0.0,
        rhs: r14,
        residual: worst,
        tolerance: 1e-9,
        pass: worst <= 1e-9,
        hypotheses: a.check_hypotheses().h1,
        terms: vec![Term::exact("closed form at P", r14)],
        checks,
    })
}

/// Area of the three-disk region against its closed form, n = 2. Uses the
/// hole outside all disks when H1' holds.
pub fn check_lemma13(a: &Arrangement, samples: u64, rng: &Rng) -> Result<IdentityReport> {
    let h = a.check_hypotheses();
    let (c, hyp) = if h.h1_prime == Truth::True {
        (Chamber::all_outside(3), h.h1_prime)
    } else {
        (Chamber::all_inside(3), h.h1)
    };
    require(hyp, "H1")?;
    let t = CmTable::new(a);
    let phi = triangle_angles_with(&t)?;
    let mut terms = vec![Term::exact("triangle", 0.25 * (-t.b0(&[0, 1, 2])).sqrt())];
    for (j, ph) in phi.iter().enumerate() {
        terms.push(Term::exact(format!("sector {}", j + 1), -0.5 * a.radius_sq(j) * ph));
    }
    for (j, k) in [(0, 1), (0, 2), (1, 2)] {
        let (p, q) = angles_pair_with(&t, j, k)?;
        let v = 0.25 * a.radius_sq(j) * (p - p.sin()) + 0.25 * a.radius_sq(k) * (q - q.sin());
        terms.push(Term::exact(format!("half lens {}", set_label(&[j, k])), v));
    }
    let mc = chamber_volume_mc(a, &c, samples, rng)?;
    Ok(IdentityReport::from_terms("lemma13", VolumeLike::scaled(&mc, 1.0), terms, EXACT_FLOOR, hyp))
}

/// Spherical triangle area on S^2 against its sides and corner angles.
pub fn check_gauss_bonnet_n3(m: &SphereModel, samples: u64, rng: &Rng) -> Result<IdentityReport> {
    if m.dim() != 3 {
        return Err(Error::InvalidInput("the spherical triangle check needs n = 3".into()));
    }
    let all = Chamber::all_inside(3);
    let mc = m.region_volume_mc(&all, samples, rng)?;
    if mc.value == 0.0 {
        return Err(Error::EmptyIntersection { set: vec![0, 1, 2] });
    }
    let arcs = m.triangle_arcs()?;
    let cfg = m.config();
    let mut terms = vec![Term::exact("2 pi", 2.0 * PI)];
    for (j, arc) in arcs.iter().enumerate() {
        terms.push(Term::exact(format!("side {}", j + 1), -cfg.offset(j) * arc));
    }
    for (j, k) in [(0, 1), (0, 2), (1, 2)] {
        terms.push(Term::exact(format!("corner {}", set_label(&[j, k])), -(PI - sphere_angle(cfg, j, k)?)));
    }
    Ok(IdentityReport::from_terms("gaussbonnet", VolumeLike::scaled(&mc, 1.0), terms, EXACT_FLOOR, Truth::True))
}

/// Simplex of the centers against the cells built on the faces of the
/// bounded chamber outside every sphere, plus that chamber.
pub fn check_decomposition(a: &Arrangement, samples: u64, rng: &Rng) -> Result<IdentityReport> {
    let hyp = a.check_hypotheses().h1_prime;
    require(hyp, "H1'")?;
    let data = chamber_data(a, &Chamber::all_outside(a.len()), samples, rng)?;
    let simplex = simplex_volume(a)?;
    let mut terms = Vec::new();
    for (set, v) in &data.faces {
        let k = decomposition_cell_volume(a, set, 1.0);
        if v.value == 0.0 {
            continue;
        }
        terms.push(Term { label: format!("cell {}", set_label(set)), value: k * v.value, std_error: k * v.std_error });
    }
    terms.push(Term { label: "chamber".into(), value: data.volume.value, std_error: data.volume.std_error });
    Ok(IdentityReport::from_terms("decomposition", VolumeLike::exact(simplex), terms, EXACT_FLOOR, hyp))
}

/// Simplex of the centers against Monte Carlo volumes of the cells and of
/// the chamber, all from one sample set per region.
pub fn check_cell_closure(a: &Arrangement, samples: u64, rng: &Rng) -> Result<IdentityReport> {
    let hyp = a.check_hypotheses().h1_prime;
    require(hyp, "H1'")?;
    let cells = cell_volumes_mc(a, samples, &rng.substream(101))?;
    let hole = chamber_volume_mc(a, &Chamber::all_outside(a.len()), samples, &rng.substream(102))?;
    let mut terms: Vec<Term> = cells
        .iter()
        .map(|(s, v)| Term { label: format!("cell {}", set_label(s)), value: v.value, std_error: v.std_error })
        .collect();
    terms.push(Term { label: "chamber".into(), value: hole.value, std_error: hole.std_error });
    Ok(IdentityReport::from_terms("cell-closure", VolumeLike::exact(simplex_volume(a)?), terms, EXACT_FLOOR, hyp))
}

/// Each cell's Monte Carlo volume against the face-based cell formula.
pub fn check_cell_volumes(a: &Arrangement, samples: u64, rng: &Rng) -> Result<Vec<IdentityReport>> {
    let hyp = a.check_hypotheses().h1_prime;
    require(hyp, "H1'")?;
    let data = chamber_data(a, &Chamber::all_outside(a.len()), samples, &rng.substream(201))?;
    let cells = cell_volumes_mc(a, samples, &rng.substream(202))?;
    let mut out = Vec::new();
    for (set, mc) in cells {
        let v = data.face(&set).copied().unwrap_or(VolumeEstimate::exact(0.0));
        let k = decomposition_cell_volume(a, &set, 1.0);
        let term = Term { label: "formula".into(), value: k * v.value, std_error: k * v.std_error };
        out.push(IdentityReport::from_terms(
            &format!("cell {}", set_label(&set)),
            VolumeLike::scaled(&mc, 1.0),
            vec![term],
            EXACT_FLOOR,
            hyp,
        ));
    }
    Ok(out)
}
