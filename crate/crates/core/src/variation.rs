//! Differential 1-forms on parameter space and finite-difference checks of
//! the volume variation formulas.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::arrangement::{sign_pow, Arrangement, Chamber, Param, ParamVector, Truth};
use crate::cayley_menger::{CmKey, CmTable, ConfigMatrix, Header};
use crate::error::{Error, Result};
use crate::identities::{face_coef, level_coef, top_coef, vertex_signature};
use crate::linalg::factorial;
use crate::mc::Rng;
use crate::restricted::SphereModel;
use crate::volume::{chamber_data, closed_form_volume, paired_volume_mc, ChamberData, Region, VolumeEstimate};

/// Covector in a parameter basis, with a standard error per coefficient.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OneForm {
    coeffs: BTreeMap<Param, f64>,
    variances: BTreeMap<Param, f64>,
}

impl OneForm {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn unit(key: Param) -> Self {
        let mut f = Self::new();
        f.add(key, 1.0);
        f
    }

    pub fn add(&mut self, key: Param, value: f64) {
        *self.coeffs.entry(key).or_insert(0.0) += value;
    }

    /// self += k * other, where k carries standard error `k_err`.
    pub fn add_scaled(&mut self, other: &OneForm, k: f64, k_err: f64) {
        for (key, v) in &other.coeffs {
            self.add(*key, k * v);
            let var = (v * k_err).powi(2) + k * k * other.variances.get(key).copied().unwrap_or(0.0);
            if var > 0.0 {
                *self.variances.entry(*key).or_insert(0.0) += var;
            }
        }
    }

    pub fn get(&self, key: Param) -> f64 {
        self.coeffs.get(&key).copied().unwrap_or(0.0)
    }

    pub fn std_error(&self, key: Param) -> f64 {
        self.variances.get(&key).copied().unwrap_or(0.0).sqrt()
    }

    pub fn keys(&self) -> impl Iterator<Item = &Param> {
        self.coeffs.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Param, f64)> + '_ {
        self.coeffs.iter().map(|(k, v)| (*k, *v))
    }

    /// Value on a tangent vector given by its components.
    pub fn pair(&self, direction: &[(Param, f64)]) -> f64 {
        direction.iter().map(|(k, v)| self.get(*k) * v).sum()
    }
}

fn permutations(items: &[usize], len: usize) -> Vec<Vec<usize>> {
    if len == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for (i, &x) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(i);
        for mut tail in permutations(&rest, len - 1) {
            tail.insert(0, x);
            out.push(tail);
        }
    }
    out
}

fn nonzero(v: f64, what: impl FnOnce() -> String) -> Result<f64> {
    if v == 0.0 || !v.is_finite() {
        return Err(Error::Degenerate(format!("{} vanishes", what())));
    }
    Ok(v)
}

/// theta_J in the basis d r_j^2, d rho_jk^2.
pub fn theta(t: &CmTable, set: &[usize]) -> Result<OneForm> {
    let a = t.arrangement();
    let p = set.len();
    let mut out = OneForm::new();
    match set {
        [] => return Err(Error::InvalidInput("theta needs a nonempty set".into())),
        [j] => out.add(Param::RadiusSq(*j), -0.5 / a.radius_sq(*j)),
        [j, k] => out.add(Param::dist(*j, *k), 0.5 / a.dist_sq(*j, *k)),
        _ => {
            let mut sorted = set.to_vec();
            sorted.sort_unstable();
            for x in 0..p {
                for y in x + 1..p {
                    let (j, k) = (sorted[x], sorted[y]);
                    let rest: Vec<usize> = sorted.iter().copied().filter(|&m| m != j && m != k).collect();
                    let mut total = 0.0;
                    for seq in permutations(&rest, p - 2) {
                        let mut prod = 1.0;
                        for nu in 0..p - 2 {
                            let mut tail: Vec<usize> = seq[..nu].iter().rev().copied().collect();
                            tail.extend([j, k]);
                            let mut cols = vec![seq[nu]];
                            cols.extend(&tail);
                            let num = t.b(Header::ZeroStar, &tail, Header::Zero, &cols);
                            let den = nonzero(t.cm(&CmKey::zero(&cols)), || format!("B(0 {cols:?})"))?;
                            prod *= num / den;
                        }
                        total += prod;
                    }
                    out.add(Param::dist(j, k), sign_pow(p) * 0.5 / a.dist_sq(j, k) * total);
                }
            }
        }
    }
    Ok(out)
}

/// The closed expansion of theta_123 for n = 2, one determinant ratio per pair.
pub fn theta_123_expanded(t: &CmTable) -> Result<OneForm> {
    let a = t.arrangement();
    if a.n() != 2 {
        return Err(Error::InvalidInput("needs n = 2".into()));
    }
    let b = nonzero(t.b0(&[0, 1, 2]), || "B(0123)".into())?;
    let mut out = OneForm::new();
    for (j, k, l) in [(0, 1, 2), (0, 2, 1), (1, 2, 0)] {
        let num = t.b(Header::ZeroStar, &[j, k], Header::Zero, &[l, j, k]);
        out.add(Param::dist(j, k), -num / b / (2.0 * a.dist_sq(j, k)));
    }
    Ok(out)
}

/// theta'_J in the basis d a'_{j0}, d a'_{jk}.
pub fn theta_prime(m: &ConfigMatrix, set: &[usize]) -> Result<OneForm> {
    let idx = |s: usize| s + 1;
    match set {
        [] => Err(Error::InvalidInput("theta' needs a nonempty set".into())),
        [j] => Ok(OneForm::unit(Param::Offset(*j))),
        [j, k] => {
            let (j, k) = (*j.min(k), *j.max(k));
            let mut out = OneForm::unit(Param::Coupling(j, k));
            let dk = nonzero(m.minor(&[0, idx(k)], &[0, idx(k)]), || "A'(0 k)".into())?;
            let dj = nonzero(m.minor(&[0, idx(j)], &[0, idx(j)]), || "A'(0 j)".into())?;
            out.add(Param::Offset(k), -m.minor(&[0, idx(k)], &[idx(j), idx(k)]) / dk);
            out.add(Param::Offset(j), -m.minor(&[0, idx(j)], &[idx(k), idx(j)]) / dj);
            Ok(out)
        }
        _ => {
            let mut out = OneForm::new();
            for &nu in set {
                let rest: Vec<usize> = set.iter().copied().filter(|&q| q != nu).collect();
                let mut rows = vec![0];
                rows.extend(rest.iter().map(|&q| idx(q)));
                let mut cols = vec![idx(nu)];
                cols.extend(rest.iter().map(|&q| idx(q)));
                let den = nonzero(m.minor(&rows, &rows), || format!("A'(0 {rest:?})"))?;
                let k = -m.minor(&rows, &cols) / den;
                out.add_scaled(&theta_prime(m, &rest)?, k, 0.0);
            }
            Ok(out)
        }
    }
}

/// Which reading of the volume differential to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reading {
    /// Printed form for inside-all and outside-all chambers, general rule otherwise.
    Auto,
    /// Chamber rule with signs (-1)^{|J cap K|} and vertex signature.
    General,
    /// The inside-all formula applied to any chamber.
    AsPrinted,
}

/// d_B v(chamber) from precomputed face volumes.
pub fn db_volume_form_with(a: &Arrangement, c: &Chamber, data: &ChamberData, reading: Reading) -> Result<OneForm> {
    let n = a.n();
    let t = CmTable::new(a);
    let inside = c.inside_set();
    let reading = match reading {
        Reading::Auto if c.is_all_inside() || c.is_all_outside() => Reading::AsPrinted,
        Reading::Auto => Reading::General,
        r => r,
    };
    let all: Vec<usize> = (0..=n).collect();
    let mut out = OneForm::new();
    for (set, v) in &data.faces {
        if v.value == 0.0 {
            continue;
        }
        let p = set.len();
        let sign = match reading {
            Reading::General => sign_pow(p) * sign_pow(set.iter().filter(|k| inside.contains(k)).count()),
            _ if c.is_all_outside() => sign_pow(p),
            _ => 1.0,
        };
        let k = -level_coef(n, p) * sign * face_coef(&t, set);
        out.add_scaled(&theta(&t, set)?, k * v.value, k.abs() * v.std_error);
    }
    let last = match reading {
        Reading::General => {
            let sig = vertex_signature(&t, &Region::new(a, c)?)?;
            -sign_pow(n) * top_coef(&t) * sig / ((n + 1) as f64 * factorial(n - 1))
        }
        _ if c.is_all_outside() => sign_pow(n + 1) * top_coef(&t) / factorial(n - 1),
        _ => -top_coef(&t) / factorial(n - 1),
    };
    if last != 0.0 {
        out.add_scaled(&theta(&t, &all)?, last, 0.0);
    }
    Ok(out)
}

/// d_B v(chamber) with face volumes from closed forms or Monte Carlo.
pub fn db_volume_form(a: &Arrangement, c: &Chamber, samples: u64, rng: &Rng) -> Result<(OneForm, ChamberData)> {
    let data = chamber_data(a, c, samples, rng)?;
    Ok((db_volume_form_with(a, c, &data, Reading::Auto)?, data))
}

/// Face measures of the region on S^{n-1} inside every cap, keyed by set,
/// |J| <= n-1. Sides of the n = 3 triangle are exact.
pub fn sphere_faces(m: &SphereModel, samples: u64, rng: &Rng) -> Result<Vec<(Vec<usize>, VolumeEstimate)>> {
    let n = m.dim();
    let c = Chamber::all_inside(n);
    let arcs = if n == 3 { Some(m.triangle_arcs()?) } else { None };
    let mut out = Vec::new();
    for mask in 1u32..(1u32 << n) {
        let set: Vec<usize> = (0..n).filter(|j| mask & (1 << j) != 0).collect();
        if set.len() >= n {
            continue;
        }
        let v = match (&arcs, set.as_slice()) {
            (Some(arcs), [j]) => VolumeEstimate::exact(arcs[*j]),
            _ => m.face_volume_mc(&c, &set, samples, &rng.substream(mask as u64))?,
        };
        out.push((set, v));
    }
    Ok(out)
}

/// d_{A'} v of the region inside every cap, from the face measures.
pub fn da_volume_form_theorem_iii(m: &SphereModel, faces: &[(Vec<usize>, VolumeEstimate)]) -> Result<OneForm> {
    let n = m.dim();
    if n < 3 {
        return Err(Error::InvalidInput("the spherical formula needs n >= 3".into()));
    }
    let cfg = m.config();
    let mut out = OneForm::new();
    for (set, v) in faces {
        let p = set.len();
        if v.value == 0.0 || p >= n {
            continue;
        }
        let aj = cfg.config_minor(set, false);
        let a0j = nonzero(cfg.config_minor(set, true), || format!("A'(0 {set:?})"))?;
        let k = -sign_pow(p) * factorial(n - p - 1) / factorial(n - 2) * aj.max(0.0).sqrt() / a0j;
        out.add_scaled(&theta_prime(cfg, set)?, k * v.value, k.abs() * v.std_error);
    }
    let all: Vec<usize> = (0..n).collect();
    let top = -cfg.config_minor(&all, true);
    if !(top > 0.0) {
        return Err(Error::Degenerate("-A'(0 1..n) is not positive".into()));
    }
    out.add_scaled(&theta_prime(cfg, &all)?, sign_pow(n) / factorial(n - 2) / top.sqrt(), 0.0);
    Ok(out)
}

/// d_{A'} v with face measures from [`sphere_faces`].
pub fn da_volume_form(m: &ConfigMatrix, samples: u64, rng: &Rng) -> Result<OneForm> {
    let model = SphereModel::new(m)?;
    da_volume_form_theorem_iii(&model, &sphere_faces(&model, samples, rng)?)
}

/// The three-term n = 3 expression with the triangle's sides and corners.
pub fn eq48_form(m: &SphereModel) -> Result<OneForm> {
    if m.dim() != 3 {
        return Err(Error::InvalidInput("needs n = 3".into()));
    }
    let cfg = m.config();
    let arcs = m.triangle_arcs()?;
    let mut out = OneForm::new();
    for (j, arc) in arcs.iter().enumerate() {
        out.add_scaled(&theta_prime(cfg, &[j])?, arc / cfg.config_minor(&[j], true), 0.0);
    }
    for (j, k) in [(0, 1), (0, 2), (1, 2)] {
        let w = cfg.config_minor(&[j, k], false).sqrt() / cfg.config_minor(&[j, k], true);
        out.add_scaled(&theta_prime(cfg, &[j, k])?, -w, 0.0);
    }
    let top = (-cfg.config_minor(&[0, 1, 2], true)).sqrt();
    out.add_scaled(&theta_prime(cfg, &[0, 1, 2])?, -1.0 / top, 0.0);
    Ok(out)
}

/// d psi_jk in the basis d r^2, d rho^2.
pub fn dpsi_form(a: &Arrangement, j: usize, k: usize) -> Result<OneForm> {
    let t = CmTable::new(a);
    let h = -t.b0_star(&[j, k]);
    if !(h > 1e-9 * a.scale().powi(2)) {
        return Err(Error::Tangency(format!("spheres {} and {} do not cross", j + 1, k + 1)));
    }
    let s = 2.0 / h.sqrt();
    let bjk = t.b(Header::ZeroStar, &[j], Header::ZeroStar, &[k]);
    let bd = t.b(Header::Zero, &[j, k], Header::ZeroStar, &[k]);
    let mut out = OneForm::new();
    out.add(Param::RadiusSq(j), -s * bjk / (2.0 * a.radius_sq(j)));
    out.add(Param::RadiusSq(k), s);
    out.add(Param::dist(j, k), -s * bd / (2.0 * a.dist_sq(j, k)));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariationReport {
    pub parameter: String,
    pub fd_value: f64,
    pub fd_std_error: f64,
    pub formula_value: f64,
    pub formula_std_error: f64,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdOptions {
    pub eps: f64,
    pub samples: u64,
    /// Use paired Monte Carlo even where a closed form exists.
    pub monte_carlo: bool,
}

impl Default for FdOptions {
    fn default() -> Self {
        FdOptions { eps: 1e-4, samples: 1_000_000, monte_carlo: false }
    }
}

const EXACT_TOL: f64 = 1e-6;
const MIN_DISCORDANT: u64 = 30;

fn report(param: Param, fd: f64, fd_se: f64, form: &OneForm, exact: bool) -> VariationReport {
    let f = form.get(param);
    let f_se = form.std_error(param);
    let tolerance = if exact {
        EXACT_TOL.max(3.0 * f_se)
    } else {
        (3.0 * fd_se.hypot(f_se)).max(1e-4 * f.abs())
    };
    let residual = (fd - f).abs();
    VariationReport {
        parameter: param.to_string(),
        fd_value: fd,
        fd_std_error: fd_se,
        formula_value: f,
        formula_std_error: f_se,
        residual,
        tolerance,
        pass: residual <= tolerance,
        exact,
    }
}

fn hypotheses_for(a: &Arrangement, c: &Chamber) -> Truth {
    if c.is_all_inside() {
        let h = a.check_hypotheses();
        h.h1.and(h.h2)
    } else if c.is_all_outside() {
        a.check_hypotheses().h1_prime
    } else {
        Truth::True
    }
}

fn perturbed(base: &ParamVector, param: Param, delta: f64, c: &Chamber) -> Result<Arrangement> {
    let a = Arrangement::from_params(&base.shifted(param, delta)?)?;
    if hypotheses_for(&a, c) == Truth::False {
        return Err(Error::Hypothesis(format!("hypotheses fail after shifting {param} by {delta:e}")));
    }
    Ok(a)
}

fn noise_check(param: Param, fd: f64, fd_se: f64, discordant: u64, formula: f64) -> Result<()> {
    if discordant < MIN_DISCORDANT || (fd_se > fd.abs() && fd_se > formula.abs()) {
        return Err(Error::FdNoise { param: param.to_string(), fd, sigma: fd_se });
    }
    Ok(())
}

/// Central difference of v(chamber) along `param` against the form.
pub fn verify_variation_fd(a: &Arrangement, c: &Chamber, form: &OneForm, param: Param, opts: &FdOptions, rng: &Rng) -> Result<VariationReport> {
    if !(opts.eps > 0.0) {
        return Err(Error::InvalidInput("eps must be positive".into()));
    }
    let base = a.params();
    let ap = perturbed(&base, param, opts.eps, c)?;
    let am = perturbed(&base, param, -opts.eps, c)?;
    if !opts.monte_carlo {
        if let (Some(vp), Some(vm)) = (closed_form_volume(&ap, c), closed_form_volume(&am, c)) {
            return Ok(report(param, (vp - vm) / (2.0 * opts.eps), 0.0, form, true));
        }
    }
    let rp = Region::new(&ap, c)?;
    let rm = Region::new(&am, c)?;
    let est = paired_volume_mc(&rp, &rm, opts.samples, rng);
    let fd = est.diff / (2.0 * opts.eps);
    let fd_se = est.diff_std_error / (2.0 * opts.eps);
    noise_check(param, fd, fd_se, est.discordant, form.get(param))?;
    Ok(report(param, fd, fd_se, form, false))
}

/// Central difference of the spherical area along a configuration parameter.
pub fn verify_variation_fd_sphere(m: &ConfigMatrix, form: &OneForm, param: Param, opts: &FdOptions, rng: &Rng) -> Result<VariationReport> {
    if !(opts.eps > 0.0) {
        return Err(Error::InvalidInput("eps must be positive".into()));
    }
    let base = m.params();
    let mp = SphereModel::new(&ConfigMatrix::from_params(&base.shifted(param, opts.eps)?)?)?;
    let mm = SphereModel::new(&ConfigMatrix::from_params(&base.shifted(param, -opts.eps)?)?)?;
    if !opts.monte_carlo && m.n() == 3 {
        let fd = (mp.gauss_bonnet_area()? - mm.gauss_bonnet_area()?) / (2.0 * opts.eps);
        return Ok(report(param, fd, 0.0, form, true));
    }
    let c = Chamber::all_inside(m.n());
    let est = SphereModel::paired_volume_mc(&mp, &mm, &c, opts.samples, rng)?;
    let fd = est.diff / (2.0 * opts.eps);
    let fd_se = est.diff_std_error / (2.0 * opts.eps);
    noise_check(param, fd, fd_se, est.discordant, form.get(param))?;
    Ok(report(param, fd, fd_se, form, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intersect::angles_pair;

    fn equilateral(side: f64, r: f64) -> Arrangement {
        Arrangement::from_centers_radii(
            vec![vec![0.0, 0.0], vec![side, 0.0], vec![0.5 * side, side * 3f64.sqrt() / 2.0]],
            vec![r; 3],
        )
        .unwrap()
    }

    #[test]
    fn low_order_thetas() {
        let a = Arrangement::from_centers_radii(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 2.0]], vec![1.0; 3]).unwrap();
        let t = CmTable::new(&a);
        assert_eq!(theta(&t, &[0]).unwrap().get(Param::RadiusSq(0)), -0.5);
        assert_eq!(theta(&t, &[0, 1]).unwrap().get(Param::dist(0, 1)), 0.5);
        let th = theta(&t, &[0, 1, 2]).unwrap();
        assert!(th.keys().all(|k| matches!(k, Param::DistSq(..))));
    }

    #[test]
    fn theta_prime_zero_offsets() {
        let mut c = nalgebra::DMatrix::identity(3, 3);
        c[(0, 1)] = 0.2;
        c[(1, 0)] = 0.2;
        let m = ConfigMatrix::from_entries(&[0.0; 3], &c).unwrap();
        let f = theta_prime(&m, &[0, 1]).unwrap();
        assert_eq!(f.get(Param::Coupling(0, 1)), 1.0);
        assert_eq!(f.get(Param::Offset(0)), 0.0);
        assert_eq!(f.get(Param::Offset(1)), 0.0);
        assert_eq!(theta_prime(&m, &[2]).unwrap(), OneForm::unit(Param::Offset(2)));
    }

    #[test]
    fn dpsi_matches_fd() {
        let a = Arrangement::from_centers_radii(vec![vec![0.0, 0.0], vec![1.1, 0.0], vec![0.3, 5.0]], vec![1.0, 1.3, 1.0]).unwrap();
        let form = dpsi_form(&a, 0, 1).unwrap();
        let e = 1e-6;
        for key in [Param::RadiusSq(0), Param::RadiusSq(1), Param::dist(0, 1)] {
            let p = Arrangement::from_params(&a.params().shifted(key, e).unwrap()).unwrap();
            let m = Arrangement::from_params(&a.params().shifted(key, -e).unwrap()).unwrap();
            let fd = (angles_pair(&p, 0, 1).unwrap().0 - angles_pair(&m, 0, 1).unwrap().0) / (2.0 * e);
            assert!((fd - form.get(key)).abs() < 1e-8, "{key} {fd} {}", form.get(key));
        }
    }

    #[test]
    fn theorem_i_form_equilateral() {
        let a = equilateral(1.5, 1.0);
        let c = Chamber::all_inside(3);
        let (form, _) = db_volume_form(&a, &c, 10, &Rng::new(0)).unwrap();
        for key in a.params().keys() {
            let r = verify_variation_fd(&a, &c, &form, key, &FdOptions::default(), &Rng::new(1)).unwrap();
            assert!(r.exact && r.residual < 1e-5, "{r:?}");
        }
    }

    #[test]
    fn gauss_bonnet_form() {
        let mut c = nalgebra::DMatrix::identity(3, 3);
        for (v, (j, k)) in [0.3, 0.2, 0.35].iter().zip([(0, 1), (0, 2), (1, 2)]) {
            c[(j, k)] = *v;
            c[(k, j)] = *v;
        }
        let cfg = ConfigMatrix::from_entries(&[0.3, 0.2, 0.25], &c).unwrap();
        let m = SphereModel::new(&cfg).unwrap();
        let faces = sphere_faces(&m, 10, &Rng::new(0)).unwrap();
        let form = da_volume_form_theorem_iii(&m, &faces).unwrap();
        let e48 = eq48_form(&m).unwrap();
        let expected = [-1.1814797531658208, -0.896317179975507, -1.072498965112601, 0.8015163432599164, 0.8557533517264001, 0.7745750929672719];
        for (key, want) in cfg.params().keys().into_iter().zip(expected) {
            assert!((form.get(key) - want).abs() < 1e-9, "{key}");
            assert!((e48.get(key) - want).abs() < 1e-9, "{key}");
            let r = verify_variation_fd_sphere(&cfg, &form, key, &FdOptions::default(), &Rng::new(0)).unwrap();
            assert!(r.pass, "{r:?}");
        }
    }
}
