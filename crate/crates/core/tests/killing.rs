mod common;

use common::*;
use num_complex::Complex64;
use sepvar::geometry::killing_residual;
use sepvar::jets::Jet2;
use sepvar::killing_stackel::*;
use sepvar::metric::DiagonalMetric;
use sepvar::poly::Poly;
use sepvar::random::{random_momentum, random_point, random_rational, rng};
use sepvar::scalar::{CRat, Scalar};

#[test]
fn chain_matrix_matches_displayed_product() {
    let f = forest(CHAIN5);
    let s = StackelMatrix::new(&f);
    let mut r = rng(2);
    let p1 = |t: &CRat| t.clone() * (t.clone() - CRat::int(1)) * (t.clone() - CRat::int(1));
    let p2 = |t: &CRat| CRat::int(2) * (t.clone() - CRat::int(5)) * (t.clone() - CRat::int(6));
    let lambda = CRat::int(1);
    for _ in 0..5 {
        let x = random_point(&mut r, &f);
        let got = s.eval(&f, &x).unwrap();
        let z = CRat::int(0);
        let one = CRat::int(1);
        let mut want = Vec::new();
        for (i, xi) in x.iter().enumerate().take(3) {
            let d = p1(xi).recip().unwrap();
            let coupling = (xi.clone() - lambda.clone()).recip().unwrap();
            let row = [xi.clone() * xi.clone(), xi.clone(), one.clone(), coupling, z.clone()];
            want.push(row.map(|e| e * d.clone()).to_vec());
            assert_eq!(got[i], want[i]);
        }
        for (i, xi) in x.iter().enumerate().skip(3) {
            let d = p2(xi).recip().unwrap();
            let row = [z.clone(), z.clone(), z.clone(), xi.clone(), one.clone()];
            assert_eq!(got[i], row.map(|e| e * d.clone()).to_vec());
        }
    }
}

#[test]
fn stackel_relation_holds_and_fails_when_reordered() {
    let f = forest(CHAIN5);
    let mut r = rng(4);
    let x = random_point(&mut r, &f);
    let p = random_momentum(&mut r, f.dim());
    let order = IntegralOrder::descending(&f);
    assert!(stackel_residual(&f, &x, &p, &order).unwrap().is_zero());
    assert_eq!(calibrate_order(&f, &x, &p).unwrap(), Some(order.clone()));
    let mut swapped = order;
    swapped.degrees[0].swap(0, 1);
    assert!(!stackel_residual(&f, &x, &p, &swapped).unwrap().is_zero());
}

#[test]
fn every_family_is_killing() {
    let mut r = rng(6);
    for json in [CHAIN5, SPHERE, CURVED_CHILD_CHAIN, FLAT_CHILD_CHAIN, TWO_COMPONENTS] {
        let f = forest(json);
        let x = random_point(&mut r, &f);
        for alpha in 0..f.block_count() {
            let t = CRat::real(random_rational(&mut r, 9, 4));
            let res = killing_residual(&f, &x, |s: &[Jet2<CRat>]| {
                Ok(killing_family(&f, alpha, s, &Jet2::constant(t.clone())))
            })
            .unwrap();
            assert!(res.is_zero(), "{json} vertex {alpha}");
        }
    }
}

#[test]
fn one_block_family_is_benenti() {
    let f = forest(SPHERE);
    let x = [CRat::frac(3, 2), CRat::frac(5, 2)];
    let t = CRat::frac(7, 3);
    let l = compatible_l(&f, &x);
    assert_eq!(killing_family(&f, 0, &x, &t), benenti(&l, &t));
}

#[test]
fn integrals_commute() {
    let mut r = rng(8);
    for json in [CHAIN5, CURVED_CHILD_CHAIN, TWO_COMPONENTS] {
        let f = forest(json);
        let x = random_point(&mut r, &f);
        let p = random_momentum(&mut r, f.dim());
        let ints = extracted_integrals(&f, &x, &IntegralOrder::descending(&f)).unwrap();
        for a in &ints {
            for b in &ints {
                assert!(poisson_bracket(a, b, &p).is_zero());
            }
        }
    }
}

#[test]
fn potential_vanishes_without_forcing() {
    let f = forest(CHAIN5);
    let x = random_point(&mut rng(1), &f);
    let zero = vec![Poly::zero(); f.dim()];
    assert_eq!(separable_potential(&f, &zero, &x).unwrap(), CRat::int(0));
}

#[test]
fn modified_integrals_commute_and_extend_the_energy() {
    let f = forest(ELLIPSOIDAL);
    let mut r = rng(9);
    let x = random_point(&mut r, &f);
    let p = random_momentum(&mut r, f.dim());
    let lin = vec![Poly::new(vec![CRat::int(0), CRat::int(1)]); f.dim()];
    let ints = modified_integrals(&f, &lin, &x).unwrap();
    for a in &ints {
        for b in &ints {
            assert!(poisson_bracket(a, b, &p).is_zero());
        }
    }
    let g = f.contravariant(&x).unwrap();
    let kinetic = g.iter().zip(&p).fold(CRat::int(0), |acc, (gi, pi)| acc + gi.clone() * pi.clone() * pi.clone());
    let u = separable_potential(&f, &lin, &x).unwrap();
    assert_eq!(ints[0].eval(&p), kinetic + u);
}

#[test]
fn quadrature_differentiates_back_to_the_integrand() {
    let f = forest(SPHERE);
    let c = [-1.0, 1.0];
    assert_eq!(hj_quadrature(&f, 0, 1.2, 1.8, &[0.0, 0.0]).unwrap(), 0.0);
    let row = |xi: f64| {
        let e = StackelMatrix::new(&f).eval_row(&f, 0, &Complex64::new(xi, 0.0)).unwrap();
        (e[0] * c[0] + e[1] * c[1]).re.sqrt()
    };
    let h = 1e-4;
    let w = |b: f64| hj_quadrature(&f, 0, 1.2, b, &c).unwrap();
    let deriv = (w(1.5 + h) - w(1.5 - h)) / (2.0 * h);
    assert!((deriv - row(1.5)).abs() < 1e-8, "{deriv} vs {}", row(1.5));
    assert!(hj_quadrature(&f, 0, 1.2, 1.8, &[1.0, 0.0]).is_err());
}

#[test]
fn stackel_determinant_is_nonzero() {
    let f = forest(CHAIN5);
    let x = random_point(&mut rng(3), &f);
    let s = StackelMatrix::new(&f).eval(&f, &x).unwrap();
    assert!(sepvar::linalg::inverse(&s).is_some());
}
