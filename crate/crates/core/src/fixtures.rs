//! Standard arrangements used by tests, benches and the command line.

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::arrangement::{Arrangement, Truth};
use crate::cayley_menger::ConfigMatrix;
use crate::error::{Error, Result};

/// Three circles of radius r on an equilateral triangle.
pub fn equilateral(side: f64, r: f64) -> Arrangement {
    Arrangement::from_centers_radii(
        vec![vec![0.0, 0.0], vec![side, 0.0], vec![0.5 * side, side * 3f64.sqrt() / 2.0]],
        vec![r; 3],
    )
    .expect("valid equilateral arrangement")
}

/// Four spheres of radius r on a regular tetrahedron.
pub fn regular_tetrahedron(side: f64, r: f64) -> Arrangement {
    let s = side / (2.0 * 2f64.sqrt());
    let centers = [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]]
        .iter()
        .map(|c| c.iter().map(|x| x * s).collect())
        .collect();
    Arrangement::from_centers_radii(centers, vec![r; 4]).expect("valid tetrahedral arrangement")
}

/// Planar arrangement with a bounded hole outside all three disks.
pub fn hole_2d() -> Arrangement {
    equilateral(1.5, 0.8)
}

/// Spatial arrangement with a bounded hole outside all four balls.
pub fn hole_3d() -> Arrangement {
    regular_tetrahedron(1.5, 0.9)
}

/// Unit circles at distance 1, with a third circle far away.
pub fn lens_2d() -> Arrangement {
    Arrangement::from_centers_radii(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, 6.0]], vec![1.0; 3])
        .expect("valid lens arrangement")
}

/// Two overlapping spheres in R^n, radii r1, r2 at distance rho, and n-1
/// further unit spheres far from both.
pub fn lens(n: usize, r1: f64, r2: f64, rho: f64) -> Arrangement {
    let mut centers = vec![vec![0.0; n], vec![0.0; n]];
    centers[1][0] = rho;
    let mut radii = vec![r1, r2];
    for k in 1..n {
        let mut c = vec![0.0; n];
        c[k] = 10.0 * (r1 + r2 + rho);
        c[0] = k as f64;
        centers.push(c);
        radii.push(1.0);
    }
    Arrangement::from_centers_radii(centers, radii).expect("valid lens arrangement")
}

/// Pairwise disjoint circles.
pub fn disjoint_2d() -> Arrangement {
    equilateral(3.0, 1.0)
}

/// Circles touching in pairs.
pub fn tangent_2d() -> Arrangement {
    equilateral(2.0, 1.0)
}

/// Circles whose pairwise overlap is below the sign tolerance.
pub fn near_tangent_2d() -> Arrangement {
    equilateral(2.0, 1.0 + 1e-15)
}

/// Three great circles cutting out an octant.
pub fn octant() -> ConfigMatrix {
    ConfigMatrix::from_entries(&[0.0; 3], &DMatrix::identity(3, 3)).expect("valid configuration")
}

/// Three small circles on the unit sphere bounding a spherical triangle.
pub fn small_circle_triangle() -> ConfigMatrix {
    let mut c = DMatrix::identity(3, 3);
    for (v, (j, k)) in [0.3, 0.2, 0.35].iter().zip([(0, 1), (0, 2), (1, 2)]) {
        c[(j, k)] = *v;
        c[(k, j)] = *v;
    }
    ConfigMatrix::from_entries(&[0.3, 0.2, 0.25], &c).expect("valid configuration")
}

fn circumradius(centers: &[Vec<f64>]) -> f64 {
    let n = centers.len() - 1;
    let m = DMatrix::from_fn(n, n, |i, k| 2.0 * (centers[i + 1][k] - centers[0][k]));
    let rhs = nalgebra::DVector::from_fn(n, |i, _| {
        centers[i + 1].iter().map(|x| x * x).sum::<f64>() - centers[0].iter().map(|x| x * x).sum::<f64>()
    });
    match m.lu().solve(&rhs) {
        Some(x) => x.iter().zip(&centers[0]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt(),
        None => f64::INFINITY,
    }
}

fn random_simplex(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Option<Arrangement> {
    let centers: Vec<Vec<f64>> = (0..=n).map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect()).collect();
    let big = circumradius(&centers);
    if !big.is_finite() || big > 5.0 {
        return None;
    }
    let radii = (0..=n).map(|_| big * rng.random_range(lo..hi)).collect();
    Arrangement::from_centers_radii(centers, radii).ok()
}

/// Random arrangement satisfying H1 and H2, by rejection.
pub fn random_h1(rng: &mut ChaCha8Rng, n: usize) -> Result<Arrangement> {
    for _ in 0..10_000 {
        if let Some(a) = random_simplex(rng, n, 1.02, 1.6) {
            let h = a.check_hypotheses();
            if h.h1.and(h.h2) == Truth::True {
                return Ok(a);
            }
        }
    }
    Err(Error::Hypothesis("no H1 arrangement found".into()))
}

/// Random arrangement satisfying H1', by rejection.
pub fn random_h1_prime(rng: &mut ChaCha8Rng, n: usize) -> Result<Arrangement> {
    for _ in 0..10_000 {
        if let Some(a) = random_simplex(rng, n, 0.6, 0.98) {
            if a.check_hypotheses().h1_prime == Truth::True {
                return Ok(a);
            }
        }
    }
    Err(Error::Hypothesis("no H1' arrangement found".into()))
}

/// Random point drawn from a standard normal around the origin.
pub fn random_point(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    StandardNormal.sample_iter(rng).take(n).collect()
}
