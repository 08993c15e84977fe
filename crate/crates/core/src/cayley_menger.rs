//! Bordered Cayley-Menger determinants and the configuration matrix.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use crate::arrangement::{Arrangement, Param, ParamVector};
use crate::error::{Error, Result};
use crate::linalg::{lu_det, Determinant};

/// Border prefix of a row or column label sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Header {
    /// the `0` border
    Zero,
    /// the `*` border (radii)
    Star,
    /// `0` then `*`
    ZeroStar,
}

impl Header {
    fn len(self) -> usize {
        match self {
            Header::Zero | Header::Star => 1,
            Header::ZeroStar => 2,
        }
    }

    fn labels(self) -> &'static [Label] {
        match self {
            Header::Zero => &[Label::Zero],
            Header::Star => &[Label::Star],
            Header::ZeroStar => &[Label::Zero, Label::Star],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Label {
    Zero,
    Star,
    Sphere(usize),
}

/// B(row_header rows ; col_header cols). Sphere indices are 0-based.
///
/// Besides the square shapes (0,0), (*,0), (0,*), (*,*), (0*,0*), the
/// bordered forms (0*,0) and (0,0*) are accepted when the plain-0 side
/// carries one extra index, e.g. B(0 * J ; 0 nu J).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CmKey {
    pub row_header: Header,
    pub rows: Vec<usize>,
    pub col_header: Header,
    pub cols: Vec<usize>,
}

impl CmKey {
    pub fn new(row_header: Header, rows: &[usize], col_header: Header, cols: &[usize]) -> Result<Self> {
        use Header::*;
        let allowed = matches!(
            (row_header, col_header),
            (Zero, Zero) | (Star, Zero) | (Zero, Star) | (Star, Star) | (ZeroStar, ZeroStar) | (ZeroStar, Zero) | (Zero, ZeroStar)
        );
        if !allowed {
            return Err(Error::InvalidInput(format!(
                "determinant shape {row_header:?}/{col_header:?} is not supported"
            )));
        }
        if row_header.len() + rows.len() != col_header.len() + cols.len() {
            return Err(Error::InvalidInput("row and column label counts differ".into()));
        }
        Ok(CmKey { row_header, rows: rows.to_vec(), col_header, cols: cols.to_vec() })
    }

    /// B(0 J).
    pub fn zero(set: &[usize]) -> Self {
        CmKey { row_header: Header::Zero, rows: set.to_vec(), col_header: Header::Zero, cols: set.to_vec() }
    }

    /// B(* J).
    pub fn star(set: &[usize]) -> Self {
        CmKey { row_header: Header::Star, rows: set.to_vec(), col_header: Header::Star, cols: set.to_vec() }
    }

    /// B(0 * J).
    pub fn zero_star(set: &[usize]) -> Self {
        CmKey {
            row_header: Header::ZeroStar,
            rows: set.to_vec(),
            col_header: Header::ZeroStar,
            cols: set.to_vec(),
        }
    }

    pub fn transposed(&self) -> Self {
        CmKey {
            row_header: self.col_header,
            rows: self.cols.clone(),
            col_header: self.row_header,
            cols: self.rows.clone(),
        }
    }

    fn size(&self) -> usize {
        self.row_header.len() + self.rows.len()
    }
}

/// Sort in place and return the parity of the permutation, or None on a repeat.
fn sort_with_sign(v: &mut [usize]) -> Option<f64> {
    let mut sign = 1.0;
    for i in 1..v.len() {
        let mut k = i;
        while k > 0 && v[k - 1] > v[k] {
            v.swap(k - 1, k);
            sign = -sign;
            k -= 1;
        }
    }
    if v.windows(2).any(|w| w[0] == w[1]) {
        None
    } else {
        Some(sign)
    }
}

/// Memoized evaluator of every determinant of one arrangement.
#[derive(Debug)]
pub struct CmTable {
    arr: Arrangement,
    cache: RwLock<HashMap<CmKey, Determinant>>,
}

impl Clone for CmTable {
    fn clone(&self) -> Self {
        CmTable { arr: self.arr.clone(), cache: RwLock::new(self.cache.read().clone()) }
    }
}

impl CmTable {
    pub fn new(a: &Arrangement) -> Self {
        CmTable { arr: a.clone(), cache: RwLock::new(HashMap::new()) }
    }

    pub fn arrangement(&self) -> &Arrangement {
        &self.arr
    }

    pub fn cm(&self, key: &CmKey) -> f64 {
        self.cm_flagged(key).value
    }

    /// Value plus the pivot-degradation flag.
    pub fn cm_flagged(&self, key: &CmKey) -> Determinant {
        let mut canon = key.clone();
        let sign = match (sort_with_sign(&mut canon.rows), sort_with_sign(&mut canon.cols)) {
            (Some(a), Some(b)) => a * b,
            _ => return Determinant { value: 0.0, ill_conditioned: false },
        };
        if let Some(d) = self.cache.read().get(&canon) {
            return Determinant { value: sign * d.value, ill_conditioned: d.ill_conditioned };
        }
        let d = self.evaluate(&canon);
        self.cache.write().entry(canon).or_insert(d);
        Determinant { value: sign * d.value, ill_conditioned: d.ill_conditioned }
    }

    /// Direct evaluation without the cache.
    pub fn evaluate(&self, key: &CmKey) -> Determinant {
        let rows = labels(key.row_header, &key.rows);
        let cols = labels(key.col_header, &key.cols);
        let m = key.size();
        let mut entries = Vec::with_capacity(m * m);
        for r in &rows {
            for c in &cols {
                entries.push(self.entry(*r, *c));
            }
        }
        lu_det(&entries, m)
    }

    fn entry(&self, r: Label, c: Label) -> f64 {
        match (r, c) {
            (Label::Zero, Label::Zero) => 0.0,
            (Label::Zero, _) | (_, Label::Zero) => 1.0,
            (Label::Star, Label::Star) => 0.0,
            (Label::Star, Label::Sphere(k)) | (Label::Sphere(k), Label::Star) => self.arr.radius_sq(k),
            (Label::Sphere(j), Label::Sphere(k)) => self.arr.dist_sq(j, k),
        }
    }

    /// B(0 J).
    pub fn b0(&self, set: &[usize]) -> f64 {
        self.cm(&CmKey::zero(set))
    }

    /// B(0 * J).
    pub fn b0_star(&self, set: &[usize]) -> f64 {
        self.cm(&CmKey::zero_star(set))
    }

    /// B(* J).
    pub fn b_star(&self, set: &[usize]) -> f64 {
        self.cm(&CmKey::star(set))
    }

    /// General determinant; panics on an unsupported shape.
    pub fn b(&self, row_header: Header, rows: &[usize], col_header: Header, cols: &[usize]) -> f64 {
        let key = CmKey::new(row_header, rows, col_header, cols).expect("supported determinant shape");
        self.cm(&key)
    }

    pub fn cached_len(&self) -> usize {
        self.cache.read().len()
    }
}

fn labels(h: Header, set: &[usize]) -> Vec<Label> {
    let mut out: Vec<Label> = h.labels().to_vec();
    out.extend(set.iter().map(|&j| Label::Sphere(j)));
    out
}

/// Configuration matrix of the spheres restricted to the unit sphere.
/// Matrix index 0 is the border; index k >= 1 is sphere k-1.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigMatrix {
    n: usize,
    a: DMatrix<f64>,
}

impl ConfigMatrix {
    /// Build from a'_{j0} (`offsets[j]`) and a'_{jk} (`couplings[(j,k)]`), 0-based spheres.
    pub fn from_entries(offsets: &[f64], couplings: &DMatrix<f64>) -> Result<Self> {
        let n = offsets.len();
        if n < 2 || couplings.nrows() != n || couplings.ncols() != n {
            return Err(Error::InvalidInput("configuration matrix size mismatch".into()));
        }
        let a = DMatrix::from_fn(n + 1, n + 1, |i, k| match (i, k) {
            (0, 0) => -1.0,
            (0, k) => offsets[k - 1],
            (i, 0) => offsets[i - 1],
            (i, k) if i == k => 1.0,
            (i, k) => 0.5 * (couplings[(i - 1, k - 1)] + couplings[(k - 1, i - 1)]),
        });
        Ok(ConfigMatrix { n, a })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, k: usize) -> f64 {
        self.a[(i, k)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// a'_{j0} for 0-based sphere j.
    pub fn offset(&self, j: usize) -> f64 {
        self.a[(0, j + 1)]
    }

    /// a'_{jk} for 0-based spheres.
    pub fn coupling(&self, j: usize, k: usize) -> f64 {
        self.a[(j + 1, k + 1)]
    }

    /// Minor on the given matrix rows and columns; the empty minor is 1.
    pub fn minor(&self, rows: &[usize], cols: &[usize]) -> f64 {
        assert_eq!(rows.len(), cols.len());
        let m = rows.len();
        let mut entries = Vec::with_capacity(m * m);
        for &r in rows {
            for &c in cols {
                entries.push(self.a[(r, c)]);
            }
        }
        lu_det(&entries, m).value
    }

    /// A'(J) or A'(0 J) for 0-based sphere indices J.
    pub fn config_minor(&self, set: &[usize], with_zero: bool) -> f64 {
        let mut idx: Vec<usize> = Vec::with_capacity(set.len() + 1);
        if with_zero {
            idx.push(0);
        }
        idx.extend(set.iter().map(|j| j + 1));
        self.minor(&idx, &idx)
    }

    /// Offsets a'_{j0} then couplings a'_{jk}, j < k.
    pub fn params(&self) -> ParamVector {
        let n = self.n;
        let mut entries: Vec<(Param, f64)> = (0..n).map(|j| (Param::Offset(j), self.offset(j))).collect();
        for j in 0..n {
            for k in j + 1..n {
                entries.push((Param::Coupling(j, k), self.coupling(j, k)));
            }
        }
        ParamVector { n, entries }
    }

    pub fn from_params(p: &ParamVector) -> Result<Self> {
        let n = p.n;
        let missing = |k: Param| Error::InvalidInput(format!("missing parameter {k}"));
        let offsets = (0..n)
            .map(|j| p.get(Param::Offset(j)).ok_or_else(|| missing(Param::Offset(j))))
            .collect::<Result<Vec<f64>>>()?;
        let mut c = DMatrix::identity(n, n);
        for j in 0..n {
            for k in j + 1..n {
                let key = Param::Coupling(j, k);
                let v = p.get(key).ok_or_else(|| missing(key))?;
                c[(j, k)] = v;
                c[(k, j)] = v;
            }
        }
        ConfigMatrix::from_entries(&offsets, &c)
    }

    /// Normals u_j and offsets u_{j0} with u_j.u_k - u_{j0}u_{k0} = a'_{jk},
    /// recovered by Cholesky; defined up to a rotation.
    pub fn hyperplanes(&self) -> Result<(Vec<DVector<f64>>, Vec<f64>)> {
        let n = self.n;
        let g = DMatrix::from_fn(n, n, |j, k| self.coupling(j, k) + self.offset(j) * self.offset(k));
        let chol = nalgebra::Cholesky::new(g).ok_or_else(|| {
            Error::Degenerate("configuration matrix does not come from real hyperplanes".into())
        })?;
        let l = chol.l();
        let normals = (0..n).map(|j| DVector::from_fn(n, |c, _| l[(j, c)])).collect();
        let offsets = (0..n).map(|j| self.offset(j)).collect();
        Ok((normals, offsets))
    }
}

/// Serialized configuration matrix: offsets a'_{j0} and couplings a'_{jk}
/// keyed "j,k" (1-based). Missing couplings are zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigSpec {
    pub n: usize,
    pub offsets: Vec<f64>,
    #[serde(default)]
    pub couplings: BTreeMap<String, f64>,
}

impl ConfigSpec {
    pub fn build(&self) -> Result<ConfigMatrix> {
        let n = self.n;
        if self.offsets.len() != n {
            return Err(Error::InvalidInput(format!("expected {n} offsets, got {}", self.offsets.len())));
        }
        let mut c = DMatrix::identity(n, n);
        for (key, v) in &self.couplings {
            let bad = || Error::InvalidInput(format!("bad coupling key {key:?}"));
            let (j, k) = key.split_once(',').ok_or_else(bad)?;
            let j: usize = j.trim().parse().map_err(|_| bad())?;
            let k: usize = k.trim().parse().map_err(|_| bad())?;
            if j == 0 || k == 0 || j > n || k > n || j == k {
                return Err(bad());
            }
            c[(j - 1, k - 1)] = *v;
            c[(k - 1, j - 1)] = *v;
        }
        ConfigMatrix::from_entries(&self.offsets, &c)
    }
}

/// Configuration matrix of an arrangement whose last sphere is the unit
/// sphere at the origin, with the normalized hyperplane coefficients.
#[derive(Debug, Clone)]
pub struct Restricted {
    pub config: ConfigMatrix,
    pub normals: Vec<DVector<f64>>,
    pub offsets: Vec<f64>,
}

pub fn config_matrix(a: &Arrangement) -> Result<Restricted> {
    let n = a.n();
    let m = n;
    if (a.radius(m) - 1.0).abs() > 1e-12 || a.center(m).norm() > 1e-12 {
        return Err(Error::InvalidInput(
            "last sphere must be the unit sphere at the origin".into(),
        ));
    }
    let t = CmTable::new(a);
    let mut scale = Vec::with_capacity(n);
    for j in 0..n {
        let v = -t.b0_star(&[j, m]);
        if !(v > 0.0) {
            return Err(Error::Hypothesis(format!(
                "sphere {} does not meet the unit sphere transversally",
                j + 1
            )));
        }
        scale.push(v.sqrt());
    }
    let offsets: Vec<f64> = (0..n)
        .map(|j| t.b(Header::Zero, &[j, m], Header::ZeroStar, &[m]) / scale[j])
        .collect();
    let couplings = DMatrix::from_fn(n, n, |j, k| {
        if j == k {
            1.0
        } else {
            -t.b(Header::ZeroStar, &[j, m], Header::ZeroStar, &[k, m]) / (scale[j] * scale[k])
        }
    });
    let config = ConfigMatrix::from_entries(&offsets, &couplings)?;
    let normals = (0..n).map(|j| a.center(j) * (-2.0 / scale[j])).collect();
    let u0 = (0..n)
        .map(|j| (a.center(j).norm_squared() - a.radius_sq(j) + 1.0) / scale[j])
        .collect();
    Ok(Restricted { config, normals, offsets: u0 })
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
    fn singleton_values() {
        let a = equilateral(1.5, 1.3);
        let t = CmTable::new(&a);
        for j in 0..3 {
            assert_eq!(t.b0(&[j]), -1.0);
            assert!((t.b0_star(&[j]) - 2.0 * 1.3f64.powi(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn two_unit_circles() {
        let a = Arrangement::from_centers_radii(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 9.0]],
            vec![1.0; 3],
        )
        .unwrap();
        let t = CmTable::new(&a);
        assert!((t.b0_star(&[0, 1]) + 3.0).abs() < 1e-12);
    }

    #[test]
    fn equilateral_values() {
        let t = CmTable::new(&equilateral(1.5, 1.0));
        assert!((t.b0(&[0, 1, 2]) + 15.1875).abs() < 1e-12);
        assert!((t.b0_star(&[0, 1]) + 3.9375).abs() < 1e-12);
        assert!((t.b0_star(&[0, 1, 2]) - 7.59375).abs() < 1e-12);
    }

    #[test]
    fn rejects_unsupported_shape() {
        assert!(CmKey::new(Header::Star, &[0, 1], Header::ZeroStar, &[0]).is_err());
        assert!(CmKey::new(Header::Zero, &[0], Header::Zero, &[0, 1]).is_err());
        assert!(CmKey::new(Header::ZeroStar, &[0], Header::Zero, &[1, 0]).is_ok());
    }

    #[test]
    fn cache_matches_fresh_and_signs() {
        let a = equilateral(1.4, 1.1);
        let t = CmTable::new(&a);
        let key = CmKey::new(Header::ZeroStar, &[2, 0], Header::Zero, &[1, 2, 0]).unwrap();
        let first = t.cm(&key);
        assert!((first - t.evaluate(&key).value).abs() < 1e-12);
        assert_eq!(first, t.cm(&key));
        let swapped = CmKey::new(Header::ZeroStar, &[0, 2], Header::Zero, &[1, 2, 0]).unwrap();
        assert_eq!(t.cm(&swapped), -first);
        assert!((t.cm(&key.transposed()) - first).abs() < 1e-12);
    }

    #[test]
    fn config_minor_small_cases() {
        let mut c = DMatrix::identity(3, 3);
        c[(0, 1)] = 0.3;
        c[(1, 0)] = 0.3;
        let m = ConfigMatrix::from_entries(&[0.2, -0.1, 0.4], &c).unwrap();
        assert_eq!(m.config_minor(&[1], false), 1.0);
        assert!((m.config_minor(&[0], true) - (-1.0 - 0.04)).abs() < 1e-15);
        assert!((m.config_minor(&[0, 1], false) - (1.0 - 0.09)).abs() < 1e-15);
    }
}
