use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use sphex_core::arrangement::RigidMotion;
use sphex_core::identities::check_theorem_i;
use sphex_core::variation::theta_prime;
use sphex_core::volume::{cap_integral, closed_form_volume};
use sphex_core::{fixtures, Arrangement, Chamber, ConfigMatrix, Rng};

fn rotation(angle: f64) -> DMatrix<f64> {
    let (s, c) = angle.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

fn jitter(base: &Arrangement, d: &[f64]) -> Arrangement {
    let centers = (0..3).map(|j| vec![base.center(j)[0] + d[2 * j], base.center(j)[1] + d[2 * j + 1]]).collect();
    let radii = (0..3).map(|j| base.radius(j) * (1.0 + d[6 + j])).collect();
    Arrangement::from_centers_radii(centers, radii).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn params_round_trip(d in prop::collection::vec(-0.1f64..0.1, 9)) {
        let a = jitter(&fixtures::equilateral(1.5, 1.0), &d);
        let b = Arrangement::from_params(&a.params()).unwrap();
        for (x, y) in a.params().entries.iter().zip(&b.params().entries) {
            prop_assert_eq!(x.0, y.0);
            prop_assert!((x.1 - y.1).abs() < 1e-10);
        }
    }

    #[test]
    fn rigid_motion_keeps_volume(d in prop::collection::vec(-0.1f64..0.1, 9), angle in 0.0f64..6.3, sx in -3.0f64..3.0, sy in -3.0f64..3.0) {
        let a = jitter(&fixtures::equilateral(1.5, 1.0), &d);
        let m = RigidMotion { rotation: rotation(angle), origin: DVector::from_vec(vec![sx, sy]) };
        let b = a.transformed(&m);
        let c = Chamber::all_inside(3);
        let (va, vb) = (closed_form_volume(&a, &c).unwrap(), closed_form_volume(&b, &c).unwrap());
        prop_assert!((va - vb).abs() < 1e-10);
    }

    #[test]
    fn cap_quadrature_matches_expansion(n in 2usize..=8, t0 in -1.0f64..1.0) {
        let c = cap_integral(n, t0);
        prop_assert!((c.quadrature - c.expansion).abs() < 1e-12, "{:?}", c);
    }

    #[test]
    fn theorem_i_relabel_invariant(d in prop::collection::vec(-0.05f64..0.05, 9), perm in Just([0usize, 1, 2]).prop_shuffle()) {
        let a = jitter(&fixtures::equilateral(1.5, 1.0), &d);
        let base = check_theorem_i(&a, 10, &Rng::new(0)).unwrap();
        let r = check_theorem_i(&a.permuted(&perm), 10, &Rng::new(0)).unwrap();
        prop_assert!((r.lhs - base.lhs).abs() < 1e-10);
        prop_assert!((r.rhs - base.rhs).abs() < 1e-9);
    }

    #[test]
    fn theta_prime_order_free(off in prop::collection::vec(0.0f64..0.3, 3), cpl in prop::collection::vec(-0.3f64..0.3, 3), perm in Just([0usize, 1, 2]).prop_shuffle()) {
        let mut c = DMatrix::identity(3, 3);
        for (v, (j, k)) in cpl.iter().zip([(0, 1), (0, 2), (1, 2)]) {
            c[(j, k)] = *v;
            c[(k, j)] = *v;
        }
        let m = ConfigMatrix::from_entries(&off, &c).unwrap();
        let a = theta_prime(&m, &[0, 1, 2]).unwrap();
        let b = theta_prime(&m, &perm).unwrap();
        for key in a.keys() {
            prop_assert!((a.get(*key) - b.get(*key)).abs() < 1e-12);
        }
    }
}
