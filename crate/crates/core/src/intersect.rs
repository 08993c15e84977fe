//! Intersection spheres S_J, vertex pairs and the angles of the examples.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::arrangement::{set_label, sign_pow, Arrangement, SIGN_TOL};
use crate::cayley_menger::{CmTable, ConfigMatrix, Header};
use crate::error::{Error, Result};
use crate::linalg::{gamma, orthogonal_complement};

/// The (n-p)-sphere S_J: center, radius and an orthonormal frame of the
/// (n-p+1)-dimensional affine space that carries it.
#[derive(Debug, Clone, PartialEq)]
pub struct SubSphere {
    pub set: Vec<usize>,
    pub center: DVector<f64>,
    pub radius: f64,
    pub basis: Vec<DVector<f64>>,
}

impl SubSphere {
    /// Dimension n-p of the sphere itself.
    pub fn dim(&self) -> usize {
        self.basis.len() - 1
    }

    /// center + radius * sum w_i basis_i for a unit vector w.
    pub fn point(&self, w: &[f64]) -> DVector<f64> {
        let mut x = self.center.clone();
        for (wi, e) in w.iter().zip(&self.basis) {
            x += e * (self.radius * wi);
        }
        x
    }

    /// Total Hausdorff measure; for the two-point case this is the count 2.
    pub fn measure(&self) -> f64 {
        sphere_measure(self.dim(), self.radius)
    }

    /// Both points of a 0-dimensional S_J.
    pub fn points(&self) -> Option<[DVector<f64>; 2]> {
        if self.dim() != 0 {
            return None;
        }
        let off = &self.basis[0] * self.radius;
        Some([&self.center + &off, &self.center - &off])
    }
}

/// Measure of the round m-sphere of radius r: 2 pi^((m+1)/2) / Gamma((m+1)/2) r^m.
pub fn sphere_measure(m: usize, r: f64) -> f64 {
    let h = (m as f64 + 1.0) / 2.0;
    2.0 * PI.powf(h) / gamma(h) * r.powi(m as i32)
}

pub fn intersection_sphere(a: &Arrangement, set: &[usize]) -> Result<SubSphere> {
    intersection_sphere_with(&CmTable::new(a), set)
}

pub fn intersection_sphere_with(t: &CmTable, set: &[usize]) -> Result<SubSphere> {
    let a = t.arrangement();
    let n = a.n();
    let p = set.len();
    if p == 0 || p > n {
        return Err(Error::InvalidInput(format!(
            "intersection needs 1..={n} spheres, got {}",
            set_label(set)
        )));
    }
    let mut sorted = set.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) || sorted.iter().any(|&j| j > n) {
        return Err(Error::InvalidInput(format!("bad index set {}", set_label(set))));
    }
    let scale = a.scale();
    let b0 = sign_pow(p) * t.b0(&sorted);
    if !(b0 > SIGN_TOL * scale.powi(p as i32 - 1)) {
        return Err(Error::Degenerate(format!(
            "centers of {} are affinely dependent",
            set_label(set)
        )));
    }
    let bs = sign_pow(p + 1) * t.b0_star(&sorted);
    let tol = SIGN_TOL * scale.powi(p as i32);
    if bs < -tol {
        return Err(Error::EmptyIntersection { set: sorted });
    }
    if bs <= tol {
        return Err(Error::Tangency(format!("spheres {} are tangent", set_label(set))));
    }
    let radius = (-0.5 * t.b0_star(&sorted) / t.b0(&sorted)).sqrt();

    let j0 = sorted[0];
    let o0 = a.center(j0);
    let dirs: Vec<DVector<f64>> = sorted[1..].iter().map(|&k| a.center(k) - o0).collect();
    let q = p - 1;
    let mut center = o0.clone();
    if q > 0 {
        let level = |k: usize| a.center(k).norm_squared() - a.radius_sq(k);
        let g = DMatrix::from_fn(q, q, |i, l| 2.0 * dirs[i].dot(&dirs[l]));
        let rhs = DVector::from_fn(q, |i, _| level(sorted[i + 1]) - level(j0) - 2.0 * dirs[i].dot(o0));
        let tvec = g
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Degenerate("radical system is singular".into()))?;
        for (ti, d) in tvec.iter().zip(&dirs) {
            center += d * *ti;
        }
    }
    let basis = orthogonal_complement(&dirs, n);
    debug_assert_eq!(basis.len(), n - p + 1);
    Ok(SubSphere { set: sorted, center, radius, basis })
}

/// The two points of S_{N minus j}; `p` is the one with the smaller f_j,
/// which under H1 is the point where 1/f_j is negative.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexPair {
    pub j: usize,
    pub p: DVector<f64>,
    pub p_prime: DVector<f64>,
}

pub fn vertices(a: &Arrangement, j: usize) -> Result<VertexPair> {
    vertices_with(&CmTable::new(a), j)
}

pub fn vertices_with(t: &CmTable, j: usize) -> Result<VertexPair> {
    let a = t.arrangement();
    let rest: Vec<usize> = (0..=a.n()).filter(|&k| k != j).collect();
    let s = intersection_sphere_with(t, &rest)?;
    let [x, y] = s.points().expect("0-dimensional intersection");
    let fx = a.f(j, x.as_slice());
    let fy = a.f(j, y.as_slice());
    let tol = 1e-12 * a.scale();
    if fx.abs() < tol || fy.abs() < tol {
        return Err(Error::Tangency(format!(
            "a vertex of S_{} lies on sphere {}",
            set_label(&rest),
            j + 1
        )));
    }
    let (p, p_prime) = if fx <= fy { (x, y) } else { (y, x) };
    Ok(VertexPair { j, p, p_prime })
}

/// (psi_jk, psi_kj): central angles of the arcs of S_j and S_k cut by the other.
pub fn angles_pair(a: &Arrangement, j: usize, k: usize) -> Result<(f64, f64)> {
    angles_pair_with(&CmTable::new(a), j, k)
}

pub fn angles_pair_with(t: &CmTable, j: usize, k: usize) -> Result<(f64, f64)> {
    let a = t.arrangement();
    let s = -t.b0_star(&[j, k]);
    let tol = SIGN_TOL * a.scale().powi(2);
    if s < -tol {
        return Err(Error::EmptyIntersection { set: vec![j.min(k), j.max(k)] });
    }
    if s <= tol {
        return Err(Error::Tangency(format!("spheres {} and {} are tangent", j + 1, k + 1)));
    }
    let h = s.sqrt();
    let cj = t.b(Header::ZeroStar, &[j], Header::Zero, &[k, j]);
    let ck = t.b(Header::ZeroStar, &[k], Header::Zero, &[j, k]);
    Ok((2.0 * h.atan2(cj), 2.0 * h.atan2(ck)))
}

/// Interior angles of the center triangle, n = 2.
pub fn triangle_angles(a: &Arrangement) -> Result<[f64; 3]> {
    triangle_angles_with(&CmTable::new(a))
}

pub fn triangle_angles_with(t: &CmTable) -> Result<[f64; 3]> {
    let a = t.arrangement();
    if a.n() != 2 {
        return Err(Error::InvalidInput("triangle angles need n = 2".into()));
    }
    let d = -t.b0(&[0, 1, 2]);
    if !(d > SIGN_TOL * a.scale().powi(2)) {
        return Err(Error::Degenerate("centers are collinear".into()));
    }
    let h = d.sqrt();
    let mut out = [0.0; 3];
    for (j, slot) in out.iter_mut().enumerate() {
        let k = (j + 1) % 3;
        let l = (j + 2) % 3;
        let c = t.b(Header::Zero, &[k, j], Header::Zero, &[l, j]);
        *slot = h.atan2(c);
    }
    Ok(out)
}

/// Angle <j,k> between the traces of spheres j and k on the unit sphere.
pub fn sphere_angle(m: &ConfigMatrix, j: usize, k: usize) -> Result<f64> {
    let c = -m.coupling(j, k);
    if c.abs() > 1.0 + 1e-12 {
        return Err(Error::EmptyIntersection { set: vec![j.min(k), j.max(k)] });
    }
    Ok(c.clamp(-1.0, 1.0).acos())
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

    #[test]
    fn two_unit_circles_meet_in_two_points() {
        let a = arr(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 5.0]], vec![1.0; 3]);
        let s = intersection_sphere(&a, &[0, 1]).unwrap();
        assert!((s.radius - 3f64.sqrt() / 2.0).abs() < 1e-12);
        assert!((s.center[0] - 0.5).abs() < 1e-12 && s.center[1].abs() < 1e-12);
        let [p, q] = s.points().unwrap();
        for x in [p, q] {
            assert!(a.f(0, x.as_slice()).abs() < 1e-12);
            assert!(a.f(1, x.as_slice()).abs() < 1e-12);
        }
    }

    #[test]
    fn single_sphere_is_itself() {
        let a = equilateral(1.5, 1.2);
        let s = intersection_sphere(&a, &[1]).unwrap();
        assert_eq!(s.center, a.center(1).clone());
        assert!((s.radius - 1.2).abs() < 1e-14);
        assert_eq!(s.basis.len(), 2);
    }

    #[test]
    fn two_spheres_in_space() {
        let a = arr(
            vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 7.0, 0.0], vec![0.0, 0.0, 7.0]],
            vec![1.0; 4],
        );
        let s = intersection_sphere(&a, &[0, 1]).unwrap();
        assert!((s.radius - 3f64.sqrt() / 2.0).abs() < 1e-12);
        assert!((s.center[0] - 0.5).abs() < 1e-12);
        for e in &s.basis {
            assert!(e[0].abs() < 1e-12);
        }
        let x = s.point(&[0.6, 0.8]);
        assert!(a.f(0, x.as_slice()).abs() < 1e-12);
    }

    #[test]
    fn full_set_rejected_and_empty_detected() {
        let a = equilateral(1.5, 1.0);
        assert!(intersection_sphere(&a, &[0, 1, 2]).is_err());
        let far = equilateral(3.0, 1.0);
        assert!(matches!(intersection_sphere(&far, &[0, 1]), Err(Error::EmptyIntersection { .. })));
    }

    #[test]
    fn vertex_product_formula_equilateral() {
        let a = equilateral(1.5, 1.0);
        let t = CmTable::new(&a);
        let v = vertices(&a, 0).unwrap();
        let fp = 1.0 / a.f(0, v.p.as_slice());
        let fq = 1.0 / a.f(0, v.p_prime.as_slice());
        assert!(fp < 0.0 && fq > 0.0);
        let rhs = -t.b0(&[1, 2]) / t.b0_star(&[0, 1, 2]);
        assert!((fp * fq - rhs).abs() < 1e-12 * rhs.abs());
    }

    #[test]
    fn psi_for_unit_circles() {
        let a = arr(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 5.0]], vec![1.0; 3]);
        let (p, q) = angles_pair(&a, 0, 1).unwrap();
        assert!((p - 2.0 * PI / 3.0).abs() < 1e-12);
        assert!((q - 2.0 * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn psi_satisfies_distance_split() {
        let a = arr(vec![vec![0.0, 0.0], vec![1.3, 0.0], vec![0.0, 5.0]], vec![1.0, 0.7, 1.0]);
        let (p, q) = angles_pair(&a, 0, 1).unwrap();
        let rho = a.dist(0, 1);
        assert!((rho - (1.0 * (p / 2.0).cos() + 0.7 * (q / 2.0).cos())).abs() < 1e-12);
    }

    #[test]
    fn tangent_pair_flagged() {
        let a = arr(vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![0.0, 5.0]], vec![1.0; 3]);
        assert!(matches!(angles_pair(&a, 0, 1), Err(Error::Tangency(_))));
    }

    #[test]
    fn triangle_angles_known_cases() {
        let e = triangle_angles(&equilateral(1.5, 1.0)).unwrap();
        for phi in e {
            assert!((phi - PI / 3.0).abs() < 1e-12);
        }
        let r = triangle_angles(&arr(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]], vec![1.0; 3])).unwrap();
        assert!((r[0] - PI / 2.0).abs() < 1e-12);
        assert!((r[1] - PI / 4.0).abs() < 1e-12);
        assert!((r[2] - PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_angle_bounds() {
        let mut c = DMatrix::identity(2, 2);
        let m = ConfigMatrix::from_entries(&[0.0, 0.0], &c).unwrap();
        assert!((sphere_angle(&m, 0, 1).unwrap() - PI / 2.0).abs() < 1e-15);
        c[(0, 1)] = -1.0;
        c[(1, 0)] = -1.0;
        let m = ConfigMatrix::from_entries(&[0.0, 0.0], &c).unwrap();
        assert!(sphere_angle(&m, 0, 1).unwrap().abs() < 1e-7);
        c[(0, 1)] = 1.5;
        c[(1, 0)] = 1.5;
        let m = ConfigMatrix::from_entries(&[0.0, 0.0], &c).unwrap();
        assert!(sphere_angle(&m, 0, 1).is_err());
    }
}
