//! Regions cut out on the unit sphere S^{n-1} by the hyperplanes
//! u_j.x + u_{j0} = 0 of a configuration matrix.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Vector3};
use rand_chacha::ChaCha8Rng;

use crate::arrangement::{Arrangement, Chamber, Side};
use crate::cayley_menger::{config_matrix, ConfigMatrix};
use crate::error::{Error, Result};
use crate::intersect::{sphere_angle, sphere_measure};
use crate::linalg::orthogonal_complement;
use crate::mc::{self, PairCount, Rng};
use crate::volume::{PairedEstimate, VolumeEstimate};

#[derive(Debug, Clone)]
pub struct SphereModel {
    config: ConfigMatrix,
    normals: Vec<DVector<f64>>,
    offsets: Vec<f64>,
}

/// A small sphere S_J cut on S^{n-1}: center, radius and a frame of its span.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub set: Vec<usize>,
    pub center: DVector<f64>,
    pub radius: f64,
    pub basis: Vec<DVector<f64>>,
}

impl Trace {
    pub fn dim(&self) -> usize {
        self.basis.len() - 1
    }

    pub fn measure(&self) -> f64 {
        sphere_measure(self.dim(), self.radius)
    }

    fn point(&self, w: &[f64]) -> DVector<f64> {
        let mut x = self.center.clone();
        for (wi, e) in w.iter().zip(&self.basis) {
            x += e * (self.radius * wi);
        }
        x
    }
}

impl SphereModel {
    pub fn new(config: &ConfigMatrix) -> Result<Self> {
        let (normals, offsets) = config.hyperplanes()?;
        Ok(SphereModel { config: config.clone(), normals, offsets })
    }

    /// Model of an arrangement whose last sphere is the unit sphere at the origin.
    pub fn from_arrangement(a: &Arrangement) -> Result<Self> {
        let r = config_matrix(a)?;
        Ok(SphereModel { config: r.config, normals: r.normals, offsets: r.offsets })
    }

    pub fn config(&self) -> &ConfigMatrix {
        &self.config
    }

    /// Ambient dimension n; also the number of hyperplanes.
    pub fn dim(&self) -> usize {
        self.normals.len()
    }

    pub fn normal(&self, j: usize) -> &DVector<f64> {
        &self.normals[j]
    }

    pub fn offset(&self, j: usize) -> f64 {
        self.offsets[j]
    }

    /// u_j.x + u_{j0}; negative inside the cap of sphere j.
    pub fn g(&self, j: usize, x: &[f64]) -> f64 {
        let u = &self.normals[j];
        let mut s = self.offsets[j];
        for i in 0..x.len() {
            s += u[i] * x[i];
        }
        s
    }

    fn side_ok(&self, c: &Chamber, j: usize, x: &[f64]) -> bool {
        let v = self.g(j, x);
        match c.side(j) {
            Side::Inside => v <= 0.0,
            Side::Outside => v >= 0.0,
        }
    }

    pub fn contains(&self, c: &Chamber, x: &[f64]) -> bool {
        (0..self.dim()).all(|j| self.side_ok(c, j, x))
    }

    fn contains_except(&self, c: &Chamber, x: &[f64], on: &[usize]) -> bool {
        (0..self.dim()).filter(|j| !on.contains(j)).all(|j| self.side_ok(c, j, x))
    }

    fn check_chamber(&self, c: &Chamber) -> Result<()> {
        if c.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "chamber has {} signs, model has {} hyperplanes",
                c.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Area of the region on S^{n-1}.
    pub fn region_volume_mc(&self, c: &Chamber, samples: u64, rng: &Rng) -> Result<VolumeEstimate> {
        self.check_chamber(c)?;
        let n = self.dim();
        let samples = samples.max(1);
        let hits = mc::run(rng, samples, |r: &mut ChaCha8Rng, count| {
            let mut x = vec![0.0; n];
            let mut h = 0u64;
            for _ in 0..count {
                mc::unit_vector(r, &mut x);
                h += self.contains(c, &x) as u64;
            }
            h
        });
        Ok(VolumeEstimate::from_hits(sphere_measure(n - 1, 1.0), hits, samples))
    }

    /// Trace of the hyperplanes in `set` on the unit sphere.
    pub fn trace(&self, set: &[usize]) -> Result<Trace> {
        let n = self.dim();
        let p = set.len();
        if p == 0 || p >= n || set.iter().any(|&j| j >= n) {
            return Err(Error::InvalidInput(format!("bad index set {set:?} for n = {n}")));
        }
        let u = DMatrix::from_fn(p, n, |r, c| self.normals[set[r]][c]);
        let rhs = DVector::from_fn(p, |r, _| -self.offsets[set[r]]);
        let gram = &u * u.transpose();
        let y = gram
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Degenerate(format!("hyperplanes {set:?} are dependent")))?;
        let center = u.transpose() * y;
        let rr = 1.0 - center.norm_squared();
        if rr < -1e-12 {
            return Err(Error::EmptyIntersection { set: set.to_vec() });
        }
        if rr <= 1e-12 {
            return Err(Error::Tangency(format!("trace of {set:?} is a point")));
        }
        let rows: Vec<DVector<f64>> = set.iter().map(|&j| self.normals[j].clone()).collect();
        Ok(Trace { set: set.to_vec(), center, radius: rr.sqrt(), basis: orthogonal_complement(&rows, n) })
    }

    /// Measure of the trace of `set` inside the closed region; a point count
    /// when the trace is two points.
    pub fn face_volume_mc(&self, c: &Chamber, set: &[usize], samples: u64, rng: &Rng) -> Result<VolumeEstimate> {
        self.check_chamber(c)?;
        let t = match self.trace(set) {
            Ok(t) => t,
            Err(Error::EmptyIntersection { .. }) => return Ok(VolumeEstimate::exact(0.0)),
            Err(e) => return Err(e),
        };
        if t.dim() == 0 {
            let off = &t.basis[0] * t.radius;
            let count = [&t.center + &off, &t.center - &off]
                .iter()
                .filter(|x| self.contains_except(c, x.as_slice(), set))
                .count();
            return Ok(VolumeEstimate::exact(count as f64));
        }
        let samples = samples.max(1);
        let dim = t.basis.len();
        let hits = mc::run(rng, samples, |r: &mut ChaCha8Rng, count| {
            let mut w = vec![0.0; dim];
            let mut h = 0u64;
            for _ in 0..count {
                mc::unit_vector(r, &mut w);
                let x = t.point(&w);
                h += self.contains_except(c, x.as_slice(), set) as u64;
            }
            h
        });
        Ok(VolumeEstimate::from_hits(t.measure(), hits, samples))
    }

    /// Two models compared on the same sample directions.
    pub fn paired_volume_mc(plus: &SphereModel, minus: &SphereModel, c: &Chamber, samples: u64, rng: &Rng) -> Result<PairedEstimate> {
        plus.check_chamber(c)?;
        minus.check_chamber(c)?;
        let n = plus.dim();
        let samples = samples.max(1);
        let counts = mc::run(rng, samples, |r: &mut ChaCha8Rng, count| {
            let mut x = vec![0.0; n];
            let mut t = PairCount::default();
            for _ in 0..count {
                mc::unit_vector(r, &mut x);
                let p = plus.contains(c, &x);
                let m = minus.contains(c, &x);
                t.plus += p as u64;
                t.minus += m as u64;
                t.discordant += (p != m) as u64;
            }
            t
        });
        let bound = sphere_measure(n - 1, 1.0);
        let nf = samples as f64;
        let mean_d = (counts.plus as f64 - counts.minus as f64) / nf;
        let var = (counts.discordant as f64 / nf - mean_d * mean_d).max(0.0);
        Ok(PairedEstimate {
            plus: VolumeEstimate::from_hits(bound, counts.plus, samples),
            minus: VolumeEstimate::from_hits(bound, counts.minus, samples),
            diff: bound * mean_d,
            diff_std_error: bound * (var / nf).sqrt(),
            discordant: counts.discordant,
            resolution: bound / nf,
        })
    }

    fn require_n3(&self) -> Result<()> {
        if self.dim() != 3 {
            return Err(Error::InvalidInput("closed spherical forms need n = 3".into()));
        }
        Ok(())
    }

    /// Corners of the spherical triangle: entry j is the point of circles k, l
    /// inside cap j.
    pub fn triangle_vertices(&self) -> Result<[Vector3<f64>; 3]> {
        self.require_n3()?;
        let mut out = [Vector3::zeros(); 3];
        for (j, slot) in out.iter_mut().enumerate() {
            let (k, l) = ((j + 1) % 3, (j + 2) % 3);
            let t = self.trace(&[k.min(l), k.max(l)])?;
            let off = &t.basis[0] * t.radius;
            let p = &t.center + &off;
            let q = &t.center - &off;
            let best = if self.g(j, p.as_slice()) < self.g(j, q.as_slice()) { p } else { q };
            *slot = Vector3::new(best[0], best[1], best[2]);
        }
        Ok(out)
    }

    /// Lengths of the three sides of the spherical triangle (all caps inside).
    pub fn triangle_arcs(&self) -> Result<[f64; 3]> {
        let v = self.triangle_vertices()?;
        let all = Chamber::all_inside(3);
        let mut out = [0.0; 3];
        for (j, slot) in out.iter_mut().enumerate() {
            let (k, l) = ((j + 1) % 3, (j + 2) % 3);
            let u = Vector3::new(self.normals[j][0], self.normals[j][1], self.normals[j][2]);
            let nu = u.norm();
            let axis = u / nu;
            let c = -axis * (self.offsets[j] / nu);
            let rad = 1.0 / nu;
            let e1 = (v[k] - c) / rad;
            let e2 = axis.cross(&e1);
            let y = (v[l] - c) / rad;
            let mut ang = y.dot(&e2).atan2(y.dot(&e1)).rem_euclid(2.0 * PI);
            let mid = c + (e1 * (ang / 2.0).cos() + e2 * (ang / 2.0).sin()) * rad;
            if !self.contains_except(&all, mid.as_slice(), &[j]) {
                ang = 2.0 * PI - ang;
            }
            *slot = rad * ang;
        }
        Ok(out)
    }

    /// Area of the spherical triangle from its sides and corner angles.
    pub fn gauss_bonnet_area(&self) -> Result<f64> {
        let arcs = self.triangle_arcs()?;
        let mut v = 2.0 * PI;
        for (j, arc) in arcs.iter().enumerate() {
            v -= self.config.offset(j) * arc;
        }
        for (j, k) in [(0, 1), (0, 2), (1, 2)] {
            v -= PI - sphere_angle(&self.config, j, k)?;
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(a: [f64; 6]) -> ConfigMatrix {
        let mut c = DMatrix::identity(3, 3);
        for (v, (j, k)) in a[3..].iter().zip([(0, 1), (0, 2), (1, 2)]) {
            c[(j, k)] = *v;
            c[(k, j)] = *v;
        }
        ConfigMatrix::from_entries(&a[..3], &c).unwrap()
    }

    #[test]
    fn octant() {
        let m = SphereModel::new(&config([0.0; 6])).unwrap();
        assert!((m.gauss_bonnet_area().unwrap() - PI / 2.0).abs() < 1e-12);
        for a in m.triangle_arcs().unwrap() {
            assert!((a - PI / 2.0).abs() < 1e-12);
        }
        let v = m.region_volume_mc(&Chamber::all_inside(3), 400_000, &Rng::new(1)).unwrap();
        assert!((v.value - PI / 2.0).abs() < 4.0 * v.std_error);
    }

    #[test]
    fn small_circle_triangle() {
        let m = SphereModel::new(&config([0.3, 0.2, 0.25, 0.3, 0.2, 0.35])).unwrap();
        let gb = m.gauss_bonnet_area().unwrap();
        assert!((gb - 1.359_902_637_746_087).abs() < 1e-9);
        let v = m.region_volume_mc(&Chamber::all_inside(3), 1_000_000, &Rng::new(2)).unwrap();
        assert!((v.value - gb).abs() < 4.0 * v.std_error);
        let arcs = m.triangle_arcs().unwrap();
        let all = Chamber::all_inside(3);
        for (j, arc) in arcs.iter().enumerate() {
            let f = m.face_volume_mc(&all, &[j], 400_000, &Rng::new(3)).unwrap();
            assert!((f.value - arc).abs() < 4.0 * f.std_error, "{j} {f:?} {arc}");
        }
        for set in [[0, 1], [0, 2], [1, 2]] {
            assert_eq!(m.face_volume_mc(&all, &set, 1, &Rng::new(0)).unwrap().value, 1.0);
        }
    }

    #[test]
    fn normals_satisfy_normalization() {
        let m = SphereModel::new(&config([0.3, -0.2, 0.25, 0.3, 0.2, -0.35])).unwrap();
        for j in 0..3 {
            let v = m.normal(j).norm_squared() - m.offset(j).powi(2);
            assert!((v - 1.0).abs() < 1e-12);
        }
        let t = m.trace(&[0]).unwrap();
        assert!((t.radius - 1.0 / m.normal(0).norm()).abs() < 1e-12);
    }

    #[test]
    fn model_from_arrangement_agrees() {
        let a = Arrangement::from_centers_radii(
            vec![vec![1.2, 0.0, 0.0], vec![0.0, 1.1, 0.0], vec![0.0, 0.0, 1.3], vec![0.0, 0.0, 0.0]],
            vec![1.3, 1.2, 1.28, 1.0],
        )
        .unwrap();
        let m = SphereModel::from_arrangement(&a).unwrap();
        let rebuilt = SphereModel::new(m.config()).unwrap();
        let all = Chamber::all_inside(3);
        let x = m.region_volume_mc(&all, 200_000, &Rng::new(4)).unwrap();
        let y = rebuilt.region_volume_mc(&all, 200_000, &Rng::new(5)).unwrap();
        assert!((x.value - y.value).abs() < 4.0 * (x.std_error.hypot(y.std_error)));
        assert!((m.gauss_bonnet_area().unwrap() - rebuilt.gauss_bonnet_area().unwrap()).abs() < 1e-10);
    }
}
