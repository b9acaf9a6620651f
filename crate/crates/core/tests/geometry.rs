mod common;

use common::*;
use sepvar::geometry::{
    curvature_residual, levi_civita_residual, riemann_tensor, separability_residuals, sinjukov_residual,
};
use sepvar::jets::Jet2;
use sepvar::killing_stackel::compatible_l;
use sepvar::metric::{metric_diag, ConeMetric, DiagonalMetric, MetricError};
use sepvar::random::{random_momentum, random_point, rng};
use sepvar::scalar::{CRat, Field, Scalar};

#[test]
fn fixtures_have_their_declared_curvature() {
    let cases = [
        (SPHERE, 1),
        (FLAT_CHILD_CHAIN, 1),
        (CURVED_CHILD_CHAIN, 1),
        (ELLIPSOIDAL, 0),
        (CHAIN5, 0),
        (TWO_COMPONENTS, 0),
    ];
    let mut r = rng(11);
    for (json, k) in cases {
        let f = forest(json);
        assert_eq!(f.curvature(), CRat::int(k));
        let x = random_point(&mut r, &f);
        let rep = curvature_residual(&f, &x, &f.curvature()).unwrap();
        assert!(rep.residual.is_zero(), "{json}: {:?}", rep.residual);
        let p = random_momentum(&mut r, f.dim());
        assert!(levi_civita_residual(&f, &x, &p).unwrap().is_zero());
        assert!(separability_residuals(&f, &x).unwrap().is_zero());
    }
}

struct Distorted(sepvar::forest::Forest);

impl DiagonalMetric for Distorted {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn contravariant<R: Field>(&self, x: &[R]) -> Result<Vec<R>, MetricError> {
        let mut g = self.0.contravariant(x)?;
        g[0] = g[0].clone() * (x[0].clone() * x[0].clone() + R::int(1));
        Ok(g)
    }
}

#[test]
fn distorted_metric_is_not_constant_curvature() {
    let m = Distorted(forest(SPHERE));
    let x = [CRat::frac(3, 2), CRat::frac(5, 2)];
    assert!(!curvature_residual(&m, &x, &CRat::int(1)).unwrap().residual.is_zero());
}

#[test]
fn jets_agree_with_finite_differences() {
    let x = [CRat::frac(3, 2), CRat::frac(7, 3)];
    let f = forest(SPHERE);
    let fd = finite_difference(&f, &x, &CRat::frac(1, 100_000));
    let exact = riemann_tensor(&f, &x).unwrap();
    for (a, b) in exact.iter().zip(&fd.riemann) {
        assert!((a.to_c64().re - b).abs() < 1e-6);
    }
}

#[test]
fn compatible_tensor_is_unique_up_to_affine_change() {
    let mut r = rng(5);
    for (json, expected) in [(SPHERE, 2), (CHAIN5, 2), (CURVED_CHILD_CHAIN, 2), (TWO_COMPONENTS, 2)] {
        let f = forest(json);
        let x = random_point(&mut r, &f);
        let res = sinjukov_residual(&f, &x, |s: &[Jet2<CRat>]| Ok(compatible_l(&f, s))).unwrap();
        assert!(res.is_zero(), "{json}");
        let pts: Vec<_> = (0..3).map(|_| random_point(&mut r, &f)).collect();
        assert_eq!(compatible_nullity(&f, &pts), expected, "{json}");
    }
}

#[test]
fn cone_over_the_sphere_is_flat() {
    let f = forest(SPHERE);
    let cone = ConeMetric::new(&f).unwrap();
    let x = [CRat::frac(2, 3), CRat::frac(3, 2), CRat::frac(5, 2)];
    let rep = curvature_residual(&cone, &x, &CRat::int(0)).unwrap();
    assert!(rep.residual.is_zero());
    assert!(ConeMetric::new(&forest(ELLIPSOIDAL)).is_err());
}

#[test]
fn sphere_metric_entries() {
    let f = forest(SPHERE);
    let x = [CRat::frac(3, 2), CRat::frac(5, 2)];
    // g^{11} = P(x1) / (x1 − x2)
    let p = |t: CRat| CRat::int(-4) * (t.clone() - CRat::int(1)) * (t.clone() - CRat::int(2)) * (t - CRat::int(3));
    let g = metric_diag(&f, &x).unwrap();
    assert_eq!(g[0][0], p(x[0].clone()) * (x[0].clone() - x[1].clone()).recip().unwrap());
    assert_eq!(g[0][1], p(x[1].clone()) * (x[1].clone() - x[0].clone()).recip().unwrap());
}
