//! Chamber and face volumes: Monte Carlo estimators and closed forms.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::arrangement::{sign_pow, Arrangement, Chamber, Side, Truth};
use crate::cayley_menger::CmTable;
use crate::error::{Error, Result};
use crate::intersect::{angles_pair_with, intersection_sphere_with, triangle_angles_with, SubSphere};
use crate::linalg::{factorial, gamma, integrate};
use crate::mc::{self, PairCount, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VolumeEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: u64,
    pub exact: bool,
}

impl VolumeEstimate {
    pub fn exact(value: f64) -> Self {
        VolumeEstimate { value, std_error: 0.0, samples: 0, exact: true }
    }

    pub fn from_hits(bound: f64, hits: u64, samples: u64) -> Self {
        let f = hits as f64 / samples as f64;
        VolumeEstimate {
            value: bound * f,
            std_error: bound * (f * (1.0 - f) / samples as f64).sqrt(),
            samples,
            exact: false,
        }
    }
}

/// Barycentric test for the simplex spanned by the centers.
#[derive(Debug, Clone)]
struct SimplexClip {
    origin: DVector<f64>,
    inv: DMatrix<f64>,
}

impl SimplexClip {
    fn new(a: &Arrangement) -> Result<Self> {
        let n = a.n();
        let origin = a.center(n).clone();
        let edges = DMatrix::from_fn(n, n, |r, c| a.center(c)[r] - origin[r]);
        let inv = edges
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("centers are affinely dependent".into()))?;
        Ok(SimplexClip { origin, inv })
    }

    fn contains(&self, x: &[f64]) -> bool {
        let n = self.origin.len();
        let mut total = 0.0;
        for r in 0..n {
            let mut l = 0.0;
            for c in 0..n {
                l += self.inv[(r, c)] * (x[c] - self.origin[c]);
            }
            if l < 0.0 {
                return false;
            }
            total += l;
        }
        total <= 1.0
    }
}

/// A chamber as a sampling region. The all-outside chamber is read as its
/// bounded component inside the simplex of the centers.
#[derive(Debug, Clone)]
pub struct Region {
    arr: Arrangement,
    chamber: Chamber,
    clip: Option<SimplexClip>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Region {
    pub fn new(a: &Arrangement, c: &Chamber) -> Result<Self> {
        let n = a.n();
        if c.len() != a.len() {
            return Err(Error::InvalidInput(format!(
                "chamber has {} signs, arrangement has {} spheres",
                c.len(),
                a.len()
            )));
        }
        let inside = c.inside_set();
        let (clip, lo, hi) = if inside.is_empty() {
            let lo = (0..n).map(|i| (0..=n).map(|j| a.center(j)[i]).fold(f64::INFINITY, f64::min)).collect();
            let hi = (0..n).map(|i| (0..=n).map(|j| a.center(j)[i]).fold(f64::NEG_INFINITY, f64::max)).collect();
            (Some(SimplexClip::new(a)?), lo, hi)
        } else {
            let lo = (0..n)
                .map(|i| inside.iter().map(|&j| a.center(j)[i] - a.radius(j)).fold(f64::NEG_INFINITY, f64::max))
                .collect();
            let hi = (0..n)
                .map(|i| inside.iter().map(|&j| a.center(j)[i] + a.radius(j)).fold(f64::INFINITY, f64::min))
                .collect();
            (None, lo, hi)
        };
        Ok(Region { arr: a.clone(), chamber: c.clone(), clip, lo, hi })
    }

    pub fn arrangement(&self) -> &Arrangement {
        &self.arr
    }

    pub fn chamber(&self) -> &Chamber {
        &self.chamber
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.arr.chamber_contains(&self.chamber, x) && self.clip.as_ref().is_none_or(|c| c.contains(x))
    }

    /// Membership for a point known to lie on the spheres in `on`.
    pub fn contains_on(&self, x: &[f64], on: &[usize]) -> bool {
        let ok = (0..self.arr.len()).filter(|k| !on.contains(k)).all(|k| {
            let v = self.arr.f(k, x);
            match self.chamber.side(k) {
                Side::Inside => v <= 0.0,
                Side::Outside => v >= 0.0,
            }
        });
        ok && self.clip.as_ref().is_none_or(|c| c.contains(x))
    }

    pub fn bounds(&self) -> (&[f64], &[f64]) {
        (&self.lo, &self.hi)
    }

    pub fn is_clipped(&self) -> bool {
        self.clip.is_some()
    }
}

fn box_volume(lo: &[f64], hi: &[f64]) -> f64 {
    lo.iter().zip(hi).map(|(l, h)| (h - l).max(0.0)).product()
}

pub fn chamber_volume_mc(a: &Arrangement, c: &Chamber, samples: u64, rng: &Rng) -> Result<VolumeEstimate> {
    let region = Region::new(a, c)?;
    let (lo, hi) = region.bounds();
    Ok(region_volume_mc(&region, lo, hi, samples, rng))
}

/// Hit-or-miss estimate of `region` using the box [lo, hi].
pub fn region_volume_mc(region: &Region, lo: &[f64], hi: &[f64], samples: u64, rng: &Rng) -> VolumeEstimate {
    let samples = samples.max(1);
    let bound = box_volume(lo, hi);
    if bound == 0.0 {
        return VolumeEstimate { value: 0.0, std_error: 0.0, samples, exact: false };
    }
    let n = lo.len();
    let hits = mc::run(rng, samples, |r: &mut ChaCha8Rng, count| {
        let mut x = vec![0.0; n];
        let mut h = 0u64;
        for _ in 0..count {
            mc::uniform_in_box(r, lo, hi, &mut x);
            if region.contains(&x) {
                h += 1;
            }
        }
        h
    });
    VolumeEstimate::from_hits(bound, hits, samples)
}

/// Volumes of two regions from the same sample points, with the standard
/// error of their difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairedEstimate {
    pub plus: VolumeEstimate,
    pub minus: VolumeEstimate,
    pub diff: f64,
    pub diff_std_error: f64,
    pub discordant: u64,
    /// volume represented by one sample
    pub resolution: f64,
}

pub fn paired_volume_mc(plus: &Region, minus: &Region, samples: u64, rng: &Rng) -> PairedEstimate {
    let samples = samples.max(1);
    let n = plus.lo.len();
    let lo: Vec<f64> = (0..n).map(|i| plus.lo[i].min(minus.lo[i])).collect();
    let hi: Vec<f64> = (0..n).map(|i| plus.hi[i].max(minus.hi[i])).collect();
    let bound = box_volume(&lo, &hi);
    let counts = mc::run(rng, samples, |r: &mut ChaCha8Rng, count| {
        let mut x = vec![0.0; n];
        let mut t = PairCount::default();
        for _ in 0..count {
            mc::uniform_in_box(r, &lo, &hi, &mut x);
            let p = plus.contains(&x);
            let m = minus.contains(&x);
            t.plus += p as u64;
            t.minus += m as u64;
            t.discordant += (p != m) as u64;
        }
        t
    });
    let nf = samples as f64;
    let mean_d = (counts.plus as f64 - counts.minus as f64) / nf;
    let mean_d2 = counts.discordant as f64 / nf;
    let var = (mean_d2 - mean_d * mean_d).max(0.0);
    PairedEstimate {
        plus: VolumeEstimate::from_hits(bound, counts.plus, samples),
        minus: VolumeEstimate::from_hits(bound, counts.minus, samples),
        diff: bound * mean_d,
        diff_std_error: bound * (var / nf).sqrt(),
        discordant: counts.discordant,
        resolution: bound / nf,
    }
}

/// Measure of S_J inside the closed chamber; a point count when |J| = n.
pub fn face_volume_mc(a: &Arrangement, c: &Chamber, set: &[usize], samples: u64, rng: &Rng) -> Result<VolumeEstimate> {
    let region = Region::new(a, c)?;
    let s = intersection_sphere_with(&CmTable::new(a), set)?;
    Ok(face_volume_in(&region, &s, samples, rng))
}

pub fn face_volume_in(region: &Region, s: &SubSphere, samples: u64, rng: &Rng) -> VolumeEstimate {
    if let Some(pts) = s.points() {
        let count = pts.iter().filter(|p| region.contains_on(p.as_slice(), &s.set)).count();
        return VolumeEstimate::exact(count as f64);
    }
    let samples = samples.max(1);
    let dim = s.basis.len();
    let n = s.center.len();
    let hits = mc::run(rng, samples, |r: &mut ChaCha8Rng, count| {
        let mut w = vec![0.0; dim];
        let mut x = vec![0.0; n];
        let mut h = 0u64;
        for _ in 0..count {
            mc::unit_vector(r, &mut w);
            for (i, xi) in x.iter_mut().enumerate() {
                let mut v = 0.0;
                for (wk, e) in w.iter().zip(&s.basis) {
                    v += wk * e[i];
                }
                *xi = s.center[i] + s.radius * v;
            }
            if region.contains_on(&x, &s.set) {
                h += 1;
            }
        }
        h
    });
    VolumeEstimate::from_hits(s.measure(), hits, samples)
}

/// A chamber volume with every face volume v_J, 1 <= |J| <= n, in mask order.
#[derive(Debug, Clone, Serialize)]
pub struct ChamberData {
    pub volume: VolumeEstimate,
    pub faces: Vec<(Vec<usize>, VolumeEstimate)>,
}

impl ChamberData {
    pub fn face(&self, set: &[usize]) -> Option<&VolumeEstimate> {
        self.faces.iter().find(|(s, _)| s.as_slice() == set).map(|(_, v)| v)
    }
}

/// Nonempty index sets of size at most n, ordered by bitmask.
pub fn face_sets(n: usize) -> Vec<Vec<usize>> {
    (1u32..(1u32 << (n + 1)))
        .map(|mask| (0..=n).filter(|j| mask & (1 << j) != 0).collect::<Vec<usize>>())
        .filter(|s| s.len() <= n)
        .collect()
}

/// Volume and faces of a chamber; closed forms when available, otherwise
/// Monte Carlo with one substream per quantity. Empty S_J give exact zeros.
pub fn chamber_data(a: &Arrangement, c: &Chamber, samples: u64, rng: &Rng) -> Result<ChamberData> {
    let region = Region::new(a, c)?;
    if let (Some(v), Some(faces)) = (closed_form_volume(a, c), closed_form_faces(a, c)) {
        let mut faces: Vec<_> = faces.into_iter().map(|(s, v)| (s, VolumeEstimate::exact(v))).collect();
        faces.sort_by_key(|(s, _)| s.iter().map(|j| 1u32 << j).sum::<u32>());
        return Ok(ChamberData { volume: VolumeEstimate::exact(v), faces });
    }
    let (lo, hi) = region.bounds();
    let volume = region_volume_mc(&region, lo, hi, samples, &rng.substream(0));
    let t = CmTable::new(a);
    let mut faces = Vec::new();
    for (i, set) in face_sets(a.n()).into_iter().enumerate() {
        let v = match intersection_sphere_with(&t, &set) {
            Ok(s) => face_volume_in(&region, &s, samples, &rng.substream(i as u64 + 1)),
            Err(Error::EmptyIntersection { .. }) => VolumeEstimate::exact(0.0),
            Err(e) => return Err(e),
        };
        faces.push((set, v));
    }
    Ok(ChamberData { volume, faces })
}

/// Both evaluations of the integral of (1 - t^2)^((n-1)/2) over [t0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapIntegral {
    pub quadrature: f64,
    pub expansion: f64,
}

pub fn cap_integral(n: usize, t0: f64) -> CapIntegral {
    let t0 = t0.clamp(-1.0, 1.0);
    let x = t0.acos();
    // t = cos s turns the integrand into sin^n s on [0, acos t0]
    let quadrature = integrate(|s| s.sin().powi(n as i32), 0.0, x, 1e-16);
    CapIntegral { quadrature, expansion: sine_power_integral(n, x) }
}

/// Integral of sin^m over [0, x] by the finite reduction expansion.
pub fn sine_power_integral(m: usize, x: f64) -> f64 {
    if m == 0 {
        return x;
    }
    let (s, c) = x.sin_cos();
    let mut total = 0.0;
    let mut coef = 1.0 / m as f64;
    let mut power = m as i32 - 1;
    let mut k = m;
    while power >= 1 {
        total -= c * coef * s.powi(power);
        // next coefficient picks up (k-1)/(k-2)
        if k < 3 {
            break;
        }
        coef *= (k - 1) as f64 / (k - 2) as f64;
        k -= 2;
        power -= 2;
    }
    let tail = double_factorial_ratio(m);
    if m % 2 == 1 {
        total + tail * (1.0 - c)
    } else {
        total + tail * x
    }
}

/// (m-1)!! / m!!.
fn double_factorial_ratio(m: usize) -> f64 {
    let mut r = 1.0;
    let mut k = m;
    while k >= 2 {
        r *= (k - 1) as f64 / k as f64;
        k -= 2;
    }
    r
}

/// Measure of the unit (n-2)-sphere, 2 pi^((n-1)/2) / Gamma((n-1)/2).
pub fn unit_sphere_constant(n: usize) -> f64 {
    let h = (n as f64 - 1.0) / 2.0;
    2.0 * PI.powf(h) / gamma(h)
}

fn lens_half_angles(r1: f64, r2: f64, rho: f64) -> Result<(f64, f64)> {
    if !(rho > (r1 - r2).abs() && rho < r1 + r2) {
        return Err(Error::InvalidInput(format!(
            "radii {r1}, {r2} at distance {rho} do not form a proper lens"
        )));
    }
    let c1 = (r1 * r1 + rho * rho - r2 * r2) / (2.0 * rho * r1);
    let c2 = (r2 * r2 + rho * rho - r1 * r1) / (2.0 * rho * r2);
    Ok((c1.clamp(-1.0, 1.0).acos(), c2.clamp(-1.0, 1.0).acos()))
}

/// Volume of the intersection of two n-balls.
pub fn lens_volume_closed(n: usize, r1: f64, r2: f64, rho: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidInput("n must be at least 2".into()));
    }
    if rho >= r1 + r2 {
        return Ok(0.0);
    }
    let (h1, h2) = lens_half_angles(r1, r2, rho)?;
    let k = unit_sphere_constant(n) / (n as f64 - 1.0);
    let v1 = k * r1.powi(n as i32) * cap_integral(n, h1.cos()).expansion;
    let v2 = k * r2.powi(n as i32) * cap_integral(n, h2.cos()).expansion;
    Ok(v1 + v2)
}

/// Planar lens area from the arc angles.
pub fn lens_area_2d(r1: f64, r2: f64, rho: f64) -> Result<f64> {
    let (h1, h2) = lens_half_angles(r1, r2, rho)?;
    let (p1, p2) = (2.0 * h1, 2.0 * h2);
    Ok(0.5 * r1 * r1 * (p1 - p1.sin()) + 0.5 * r2 * r2 * (p2 - p2.sin()))
}

/// Spatial lens volume from the cap half-angles.
pub fn lens_volume_3d(r1: f64, r2: f64, rho: f64) -> Result<f64> {
    let (h1, h2) = lens_half_angles(r1, r2, rho)?;
    let cap = |r: f64, c: f64| PI * r.powi(3) * (2.0 / 3.0 - c + c.powi(3) / 3.0);
    Ok(cap(r1, h1.cos()) + cap(r2, h2.cos()))
}

/// Face measures of a lens: (v(S_1 on boundary), v(S_2 on boundary), v(S_1 cap S_2)).
pub fn lens_faces(n: usize, r1: f64, r2: f64, rho: f64) -> Result<(f64, f64, f64)> {
    let (h1, h2) = lens_half_angles(r1, r2, rho)?;
    let c = unit_sphere_constant(n);
    let v1 = c * r1.powi(n as i32 - 1) * sine_power_integral(n - 2, h1);
    let v2 = c * r2.powi(n as i32 - 1) * sine_power_integral(n - 2, h2);
    let h = r1 * h1.sin();
    Ok((v1, v2, c * h.powi(n as i32 - 2)))
}

pub fn ball_volume(n: usize, r: f64) -> f64 {
    let h = n as f64 / 2.0;
    PI.powf(h) / gamma(h + 1.0) * r.powi(n as i32)
}

/// Volume of the simplex of the centers.
pub fn simplex_volume(a: &Arrangement) -> Result<f64> {
    let n = a.n();
    let o = a.center(n);
    let edges = DMatrix::from_fn(n, n, |r, c| a.center(c)[r] - o[r]);
    let d = crate::linalg::det(&edges).abs();
    if d <= 1e-12 * a.scale().powf(n as f64 / 2.0) {
        return Err(Error::Degenerate("centers are affinely dependent".into()));
    }
    Ok(d / factorial(n))
}

/// Pieces of the planar pseudo-triangle computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarPieces {
    pub triangle: f64,
    pub phi: [f64; 3],
    /// psi[j][k] for j != k
    pub psi: [[f64; 3]; 3],
}

fn planar_pieces(a: &Arrangement) -> Result<PlanarPieces> {
    if a.n() != 2 {
        return Err(Error::InvalidInput("closed pseudo-triangle forms need n = 2".into()));
    }
    let t = CmTable::new(a);
    let phi = triangle_angles_with(&t)?;
    let triangle = 0.25 * (-t.b0(&[0, 1, 2])).sqrt();
    let mut psi = [[0.0; 3]; 3];
    for j in 0..3 {
        for k in j + 1..3 {
            let (p, q) = angles_pair_with(&t, j, k)?;
            psi[j][k] = p;
            psi[k][j] = q;
        }
    }
    Ok(PlanarPieces { triangle, phi, psi })
}

fn planar_area(a: &Arrangement, p: &PlanarPieces) -> f64 {
    let mut v = p.triangle;
    for j in 0..3 {
        v -= 0.5 * a.radius_sq(j) * p.phi[j];
    }
    for j in 0..3 {
        for k in 0..3 {
            if j != k {
                let s = p.psi[j][k];
                v += 0.25 * a.radius_sq(j) * (s - s.sin());
            }
        }
    }
    v
}

/// Area of the three-disk intersection, n = 2, under H1.
pub fn pseudo_triangle_area_closed(a: &Arrangement) -> Result<f64> {
    let h = a.check_hypotheses();
    if h.h1 != Truth::True {
        return Err(Error::Hypothesis("H1 does not hold".into()));
    }
    let p = planar_pieces(a)?;
    Ok(planar_area(a, &p))
}

/// Exact arcs v_j of the pseudo-triangle, n = 2, under H1.
pub fn pseudo_triangle_arcs(a: &Arrangement) -> Result<[f64; 3]> {
    let p = planar_pieces(a)?;
    let mut out = [0.0; 3];
    for (j, slot) in out.iter_mut().enumerate() {
        let (k, l) = ((j + 1) % 3, (j + 2) % 3);
        *slot = a.radius(j) * (0.5 * p.psi[j][k] + 0.5 * p.psi[j][l] - p.phi[j]);
    }
    Ok(out)
}

/// Area of the bounded region outside all three circles, n = 2, under H1'.
pub fn hole_area_closed(a: &Arrangement) -> Result<f64> {
    let h = a.check_hypotheses();
    if h.h1_prime != Truth::True {
        return Err(Error::Hypothesis("H1' does not hold".into()));
    }
    let p = planar_pieces(a)?;
    Ok(planar_area(a, &p))
}

/// Exact arcs v_j bounding the hole, n = 2, under H1'.
pub fn hole_arcs(a: &Arrangement) -> Result<[f64; 3]> {
    let p = planar_pieces(a)?;
    let mut out = [0.0; 3];
    for (j, slot) in out.iter_mut().enumerate() {
        let (k, l) = ((j + 1) % 3, (j + 2) % 3);
        *slot = a.radius(j) * (p.phi[j] - 0.5 * p.psi[j][k] - 0.5 * p.psi[j][l]);
    }
    Ok(out)
}

/// Closed-form chamber volume where one is available: a ball or lens cut
/// cleanly by the other spheres, the planar pseudo-triangle and the
/// planar hole.
pub fn closed_form_volume(a: &Arrangement, c: &Chamber) -> Option<f64> {
    let n = a.n();
    let inside = c.inside_set();
    if n == 2 && c.is_all_inside() {
        return pseudo_triangle_area_closed(a).ok();
    }
    if n == 2 && c.is_all_outside() {
        return hole_area_closed(a).ok();
    }
    let disjoint = |j: usize, k: usize| a.dist(j, k) >= a.radius(j) + a.radius(k);
    match inside.as_slice() {
        [j] => {
            let clean = (0..=n).filter(|k| k != j).all(|k| disjoint(*j, k));
            clean.then(|| ball_volume(n, a.radius(*j)))
        }
        [j, k] => {
            let clean = (0..=n)
                .filter(|l| l != j && l != k)
                .all(|l| disjoint(*j, l) || disjoint(*k, l));
            if !clean {
                return None;
            }
            lens_volume_closed(n, a.radius(*j), a.radius(*k), a.dist(*j, *k)).ok()
        }
        _ => None,
    }
}

/// Closed-form face measures matching [`closed_form_volume`], keyed by set.
pub fn closed_form_faces(a: &Arrangement, c: &Chamber) -> Option<Vec<(Vec<usize>, f64)>> {
    let n = a.n();
    let mut out = Vec::new();
    if n == 2 && (c.is_all_inside() || c.is_all_outside()) {
        closed_form_volume(a, c)?;
        let arcs = if c.is_all_inside() { pseudo_triangle_arcs(a).ok()? } else { hole_arcs(a).ok()? };
        for (j, v) in arcs.iter().enumerate() {
            out.push((vec![j], *v));
        }
        for j in 0..3 {
            for k in j + 1..3 {
                out.push((vec![j, k], 1.0));
            }
        }
        return Some(out);
    }
    closed_form_volume(a, c)?;
    let inside = c.inside_set();
    let lens = match inside.as_slice() {
        [j, k] => Some((*j, *k, lens_faces(n, a.radius(*j), a.radius(*k), a.dist(*j, *k)).ok()?)),
        _ => None,
    };
    for mask in 1u32..(1u32 << (n + 1)) {
        let set: Vec<usize> = (0..=n).filter(|j| mask & (1 << j) != 0).collect();
        if set.len() > n {
            continue;
        }
        let v = match (&lens, set.as_slice(), inside.as_slice()) {
            (Some((j, _, f)), [s], _) if s == j => f.0,
            (Some((_, k, f)), [s], _) if s == k => f.1,
            (Some((j, k, f)), [s, t], _) if s == j && t == k => {
                if n == 2 {
                    2.0
                } else {
                    f.2
                }
            }
            (None, [s], [j]) if s == j => crate::intersect::sphere_measure(n - 1, a.radius(*j)),
            _ => 0.0,
        };
        out.push((set, v));
    }
    Some(out)
}

/// Cell of the center simplex attached to the face on S_J:
/// (1/n) ((n-p)!/(n-1)!) sqrt((-1)^(p+1) B(0*J)/2^p) v_J.
pub fn decomposition_cell_volume(a: &Arrangement, set: &[usize], v_face: f64) -> f64 {
    let n = a.n();
    let p = set.len();
    if v_face == 0.0 {
        return 0.0;
    }
    let t = CmTable::new(a);
    let s = (sign_pow(p + 1) * t.b0_star(set) / 2f64.powi(p as i32)).max(0.0).sqrt();
    factorial(n - p) / factorial(n - 1) * s * v_face / n as f64
}

/// Geometry of one decomposition cell, the join of the simplex on O_J with
/// the face piece of S_J.
#[derive(Debug, Clone)]
struct CellShape {
    set: Vec<usize>,
    sphere: SubSphere,
    base: DVector<f64>,
    dirs: Vec<DVector<f64>>,
    gram_inv: DMatrix<f64>,
}

impl CellShape {
    fn new(t: &CmTable, set: &[usize]) -> Option<Self> {
        let a = t.arrangement();
        let sphere = intersection_sphere_with(t, set).ok()?;
        let base = a.center(set[0]).clone();
        let dirs: Vec<DVector<f64>> = set[1..].iter().map(|&k| a.center(k) - &base).collect();
        let q = dirs.len();
        let gram = DMatrix::from_fn(q, q, |i, l| dirs[i].dot(&dirs[l]));
        let gram_inv = if q == 0 { gram } else { gram.try_inverse()? };
        Some(CellShape { set: set.to_vec(), sphere, base, dirs, gram_inv })
    }

    fn contains(&self, region: &Region, x: &DVector<f64>) -> bool {
        let c = &self.sphere.center;
        let d = x - c;
        let mut b = DVector::zeros(d.len());
        for e in &self.sphere.basis {
            b += e * e.dot(&d);
        }
        let bn = b.norm();
        let y0 = bn / self.sphere.radius;
        if y0 > 1.0 || bn == 0.0 {
            return false;
        }
        let xi = c + &b * (self.sphere.radius / bn);
        if !region.contains_on(xi.as_slice(), &self.set) {
            return false;
        }
        if y0 >= 1.0 {
            return true;
        }
        let y = (x - &xi * y0) / (1.0 - y0);
        // barycentric coordinates of y in the simplex on O_J
        let q = self.dirs.len();
        let rel = y - &self.base;
        let rhs = DVector::from_fn(q, |i, _| self.dirs[i].dot(&rel));
        let tv = &self.gram_inv * rhs;
        let mut sum = 0.0;
        for v in tv.iter() {
            if *v < 0.0 {
                return false;
            }
            sum += v;
        }
        sum <= 1.0
    }
}

/// Monte Carlo volumes of the decomposition cells of the center simplex.
/// Returns one estimate per nonempty J with |J| <= n, in mask order.
pub fn cell_volumes_mc(a: &Arrangement, samples: u64, rng: &Rng) -> Result<Vec<(Vec<usize>, VolumeEstimate)>> {
    let n = a.n();
    let region = Region::new(a, &Chamber::all_outside(a.len()))?;
    let t = CmTable::new(a);
    let mut sets = Vec::new();
    for mask in 1u32..(1u32 << (n + 1)) {
        let set: Vec<usize> = (0..=n).filter(|j| mask & (1 << j) != 0).collect();
        if set.len() <= n {
            sets.push(set);
        }
    }
    let shapes: Vec<Option<CellShape>> = sets.iter().map(|s| CellShape::new(&t, s)).collect();
    let clip = SimplexClip::new(a)?;
    let (lo, hi) = region.bounds();
    let bound = box_volume(lo, hi);
    let samples = samples.max(1);
    let counts = mc::run(rng, samples, |r: &mut ChaCha8Rng, count| {
        let mut x = vec![0.0; n];
        let mut h = CellCounts(vec![0; shapes.len()]);
        for _ in 0..count {
            mc::uniform_in_box(r, lo, hi, &mut x);
            if !clip.contains(&x) {
                continue;
            }
            let xv = DVector::from_column_slice(&x);
            for (i, s) in shapes.iter().enumerate() {
                if let Some(shape) = s {
                    if shape.contains(&region, &xv) {
                        h.0[i] += 1;
                    }
                }
            }
        }
        h
    });
    Ok(sets
        .into_iter()
        .zip(counts.0)
        .map(|(s, h)| (s, VolumeEstimate::from_hits(bound, h, samples)))
        .collect())
}

#[derive(Debug, Clone, Default)]
struct CellCounts(Vec<u64>);

impl std::ops::Add for CellCounts {
    type Output = CellCounts;
    fn add(self, o: CellCounts) -> CellCounts {
        if self.0.is_empty() {
            return o;
        }
        CellCounts(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arr(c: Vec<Vec<f64>>, r: Vec<f64>) -> Arrangement {
        Arrangement::from_centers_radii(c, r).unwrap()
    }

    fn equilateral(side: f64, r: f64) -> Arrangement {
        arr(vec![vec![0.0, 0.0], vec![side, 0.0], vec![0.5 * side, side * 3f64.sqrt() / 2.0]], vec![r; 3])
    }

    fn lens2() -> Arrangement {
        arr(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, 6.0]], vec![1.0; 3])
    }

    #[test]
    fn cap_integral_examples() {
        let c = cap_integral(3, 1.0);
        assert!(c.quadrature.abs() < 1e-15 && c.expansion.abs() < 1e-15);
        let c = cap_integral(2, 0.0);
        assert!((c.quadrature - PI / 4.0).abs() < 1e-13);
        assert!((c.expansion - PI / 4.0).abs() < 1e-15);
        let c = cap_integral(3, 0.5);
        assert!((c.quadrature - 5.0 / 24.0).abs() < 1e-13);
        assert!((c.expansion - 5.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn sine_power_small_orders() {
        let x = 0.9f64;
        assert!((sine_power_integral(1, x) - (1.0 - x.cos())).abs() < 1e-15);
        assert!((sine_power_integral(2, x) - (x / 2.0 - (2.0 * x).sin() / 4.0)).abs() < 1e-15);
    }

    #[test]
    fn lens_examples() {
        let classical = 2.0 * (0.5f64).acos() - 0.5 * 3f64.sqrt();
        assert!((lens_volume_closed(2, 1.0, 1.0, 1.0).unwrap() - classical).abs() < 1e-12);
        assert!((lens_area_2d(1.0, 1.0, 1.0).unwrap() - classical).abs() < 1e-12);
        assert!((lens_volume_closed(3, 1.0, 1.0, 1.0).unwrap() - 5.0 * PI / 12.0).abs() < 1e-12);
        assert!((lens_volume_3d(1.0, 1.0, 1.0).unwrap() - 5.0 * PI / 12.0).abs() < 1e-12);
        assert_eq!(lens_volume_closed(3, 1.0, 1.0, 2.0).unwrap(), 0.0);
        assert!(lens_volume_closed(3, 1.0, 1.0, 2.0 - 1e-9).unwrap() < 1e-12);
    }

    #[test]
    fn lens_mc_matches() {
        let a = lens2();
        let c = Chamber::parse("--+", 3).unwrap();
        let v = chamber_volume_mc(&a, &c, 200_000, &Rng::new(1)).unwrap();
        let exact = 2.0 * PI / 3.0 - 3f64.sqrt() / 2.0;
        assert!((v.value - exact).abs() < 4.0 * v.std_error);
        assert!((closed_form_volume(&a, &c).unwrap() - exact).abs() < 1e-12);
    }

    #[test]
    fn disk_mc_matches() {
        let a = arr(vec![vec![0.0, 0.0], vec![5.0, 0.0], vec![0.0, 5.0]], vec![1.0; 3]);
        let c = Chamber::parse("-++", 3).unwrap();
        let v = chamber_volume_mc(&a, &c, 200_000, &Rng::new(2)).unwrap();
        assert!((v.value - PI).abs() < 4.0 * v.std_error);
        assert!((closed_form_volume(&a, &c).unwrap() - PI).abs() < 1e-12);
    }

    #[test]
    fn lens_faces_examples() {
        let a = lens2();
        let c = Chamber::parse("--+", 3).unwrap();
        let arc = face_volume_mc(&a, &c, &[0], 200_000, &Rng::new(3)).unwrap();
        assert!((arc.value - 2.0 * PI / 3.0).abs() < 4.0 * arc.std_error);
        let pts = face_volume_mc(&a, &c, &[0, 1], 10, &Rng::new(3)).unwrap();
        assert!(pts.exact && pts.value == 2.0);
        let (v1, v2, _) = lens_faces(2, 1.0, 1.0, 1.0).unwrap();
        assert!((v1 - 2.0 * PI / 3.0).abs() < 1e-12 && (v2 - v1).abs() < 1e-15);
    }

    #[test]
    fn pseudo_triangle_pieces() {
        let a = equilateral(1.5, 1.0);
        let p = planar_pieces(&a).unwrap();
        assert!((p.triangle - 3f64.sqrt() / 4.0 * 2.25).abs() < 1e-12);
        let v = pseudo_triangle_area_closed(&a).unwrap();
        let mc = chamber_volume_mc(&a, &Chamber::all_inside(3), 400_000, &Rng::new(4)).unwrap();
        assert!((v - mc.value).abs() < 4.0 * mc.std_error);
        for j in 0..2 {
            for k in j + 1..3 {
                let f = face_volume_mc(&a, &Chamber::all_inside(3), &[j, k], 1, &Rng::new(0)).unwrap();
                assert_eq!(f.value, 1.0);
            }
        }
        assert!(pseudo_triangle_area_closed(&equilateral(3.0, 1.0)).is_err());
    }

    #[test]
    fn simplex_volumes() {
        assert!((simplex_volume(&equilateral(1.5, 1.0)).unwrap() - 0.974_278_579_257_493_6).abs() < 1e-12);
        let r = arr(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]], vec![1.0; 3]);
        assert!((simplex_volume(&r).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn hole_matches_mc() {
        let a = equilateral(1.5, 0.8);
        let v = hole_area_closed(&a).unwrap();
        let mc = chamber_volume_mc(&a, &Chamber::all_outside(3), 400_000, &Rng::new(5)).unwrap();
        assert!((v - mc.value).abs() < 4.0 * mc.std_error, "{v} {mc:?}");
    }

    #[test]
    fn zero_face_gives_zero_cell() {
        assert_eq!(decomposition_cell_volume(&equilateral(1.5, 0.8), &[0], 0.0), 0.0);
    }

    #[test]
    fn mc_is_deterministic_across_execution_modes() {
        let a = equilateral(1.5, 1.0);
        let c = Chamber::all_inside(3);
        let x = chamber_volume_mc(&a, &c, 50_000, &Rng::new(9)).unwrap();
        let y = chamber_volume_mc(&a, &c, 50_000, &Rng::new(9).sequential()).unwrap();
        assert_eq!(x, y);
    }
}
