mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;

use common::*;
use rand::Rng;
use sepvar::equivalence::{apply_move, equivalent, Move};
use sepvar::flat_coords::{multiblock_chart, phi, phi_relations, verify_chart};
use sepvar::forest::{Forest, ForestSpec};
use sepvar::geometry::*;
use sepvar::jets::Jet2;
use sepvar::killing_stackel::*;
use sepvar::metric::{ConeMetric, DiagonalMetric};
use sepvar::random::*;
use sepvar::scalar::{CRat, Scalar};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn pool() -> Vec<ForestSpec> {
    let mut specs = generated(2026, 50, &GenOptions::default());
    specs.extend(generated(2027, 10, &GenOptions { complex_roots: true, ..GenOptions::default() }));
    specs
}

fn constant_curvature(specs: &[ForestSpec]) -> Outcome {
    let mut r = rng(1);
    let mut worst_float: f64 = 0.0;
    for s in specs {
        let f = Forest::new(s).map_err(|e| e.to_string())?;
        let k = f.curvature();
        for _ in 0..20 {
            let x = random_point(&mut r, &f);
            let exact = curvature_residual(&f, &x, &k).map_err(|e| e.to_string())?;
            ensure(exact.residual.is_zero(), || format!("{} at {x:?}: {:?}", s.to_json(), exact.residual))?;
            let xf = to_float(&x);
            let float = curvature_residual(&f, &xf, &k.to_c64()).map_err(|e| e.to_string())?;
            worst_float = worst_float.max(float.residual.magnitude);
        }
    }
    ensure(worst_float < 1e-8, || format!("float residual {worst_float:e}"))?;
    Ok(format!("{} specs x 20 points exact; float max {worst_float:.1e}", specs.len()))
}

fn separability(specs: &[ForestSpec]) -> Outcome {
    let mut r = rng(2);
    for s in specs {
        let f = Forest::new(s).map_err(|e| e.to_string())?;
        for _ in 0..10 {
            let x = random_point(&mut r, &f);
            let p = random_momentum(&mut r, f.dim());
            let lc = levi_civita_residual(&f, &x, &p).map_err(|e| e.to_string())?;
            ensure(lc.is_zero(), || format!("Levi-Civita {}: {lc:?}", s.to_json()))?;
        }
        let x = random_point(&mut r, &f);
        let rep = separability_residuals(&f, &x).map_err(|e| e.to_string())?;
        ensure(rep.is_zero(), || format!("cleared forms {}: {rep:?}", s.to_json()))?;
    }
    Ok(format!("{} specs x 10 (x,p) exact; cleared forms exact", specs.len()))
}

fn killing(specs: &[ForestSpec]) -> Outcome {
    let mut r = rng(3);
    let mut brackets = 0usize;
    for s in specs {
        let f = Forest::new(s).map_err(|e| e.to_string())?;
        let x = random_point(&mut r, &f);
        for alpha in 0..f.block_count() {
            for _ in 0..5 {
                let t = CRat::real(random_rational(&mut r, 9, 4));
                let res = killing_residual(&f, &x, |s: &[Jet2<CRat>]| {
                    Ok(killing_family(&f, alpha, s, &Jet2::constant(t.clone())))
                })
                .map_err(|e| e.to_string())?;
                ensure(res.is_zero(), || format!("{} vertex {alpha} t={t}", s.to_json()))?;
            }
        }
        let order = IntegralOrder::descending(&f);
        for _ in 0..10 {
            let x = random_point(&mut r, &f);
            let p = random_momentum(&mut r, f.dim());
            let ints = extracted_integrals(&f, &x, &order).map_err(|e| e.to_string())?;
            for a in &ints {
                for b in &ints {
                    ensure(poisson_bracket(a, b, &p).is_zero(), || format!("bracket on {}", s.to_json()))?;
                    brackets += 1;
                }
            }
        }
    }
    Ok(format!("all families Killing at 5 t per vertex; {brackets} brackets vanish"))
}

fn stackel(specs: &[ForestSpec]) -> Outcome {
    let mut r = rng(4);
    for s in specs {
        let f = Forest::new(s).map_err(|e| e.to_string())?;
        let order = IntegralOrder::descending(&f);
        for _ in 0..10 {
            let x = random_point(&mut r, &f);
            let p = random_momentum(&mut r, f.dim());
            let res = stackel_residual(&f, &x, &p, &order).map_err(|e| e.to_string())?;
            ensure(res.is_zero(), || format!("{}: {res:?}", s.to_json()))?;
        }
    }
    let f = forest(CHAIN5);
    let s = StackelMatrix::new(&f);
    let lam = CRat::int(1);
    for _ in 0..5 {
        let x = random_point(&mut r, &f);
        let got = s.eval(&f, &x).map_err(|e| e.to_string())?;
        for (i, xi) in x.iter().enumerate() {
            let one = CRat::int(1);
            let z = CRat::int(0);
            let (den, row) = if i < 3 {
                let p1 = xi.clone() * (xi.clone() - one.clone()) * (xi.clone() - one.clone());
                let coupling = (xi.clone() - lam.clone()).recip().ok_or("singular")?;
                (p1, vec![xi.clone() * xi.clone(), xi.clone(), one.clone(), coupling, z])
            } else {
                let p2 = CRat::int(2) * (xi.clone() - CRat::int(5)) * (xi.clone() - CRat::int(6));
                (p2, vec![z.clone(), z.clone(), z, xi.clone(), one])
            };
            let inv = den.recip().ok_or("singular")?;
            let want: Vec<CRat> = row.into_iter().map(|e| e * inv.clone()).collect();
            ensure(got[i] == want, || format!("row {i} differs from the displayed matrix"))?;
        }
    }
    Ok(format!("S·I = P exact on {} specs; 5x5 display matched at 5 points", specs.len()))
}

fn float_points(f: &Forest, r: &mut impl Rng, count: usize) -> Vec<Vec<f64>> {
    (0..count).map(|_| random_float_point(r, f, -3.0, 6.0, 0.1)).collect()
}

fn flat_charts(specs: &[ForestSpec]) -> Outcome {
    let mut r = rng(5);
    let mut worst: f64 = 0.0;
    let mut all: Vec<(String, Forest)> = SHAPES.iter().map(|(n, j)| (n.to_string(), forest(j))).collect();
    for s in specs {
        all.push((s.to_json(), Forest::new(s).map_err(|e| e.to_string())?));
    }
    for (name, f) in &all {
        let chart = multiblock_chart(f).map_err(|e| format!("{name}: {e}"))?;
        let extra = usize::from(!f.curvature().is_zero());
        ensure(chart.len() == f.dim() + extra, || format!("{name}: chart size {}", chart.len()))?;
        let pts = float_points(f, &mut r, 10);
        let rep = verify_chart(f, &chart, &pts).map_err(|e| format!("{name}: {e}"))?;
        ensure(rep.skipped.len() < pts.len() && rep.full_rank, || format!("{name}: {rep:?}"))?;
        ensure(rep.residual < 1e-8, || format!("{name}: residual {:e}", rep.residual))?;
        worst = worst.max(rep.residual);
    }
    let ell = multiblock_chart(&forest(ELLIPSOIDAL)).map_err(|e| e.to_string())?;
    let gaps = [CRat::int(10), CRat::int(-6), CRat::int(15)];
    for (i, row) in ell.gram.iter().enumerate() {
        for (j, g) in row.iter().enumerate() {
            let want = if i == j { gaps[i].clone() } else { CRat::int(0) };
            ensure(*g == want, || format!("ellipsoidal Gram ({i},{j}) = {g}"))?;
        }
    }
    let mono = multiblock_chart(&forest(r#"{"blocks":[{"id":1,"dim":3,"poly":{"leading":"-4","roots":[["0",3]]}}]}"#))
        .map_err(|e| e.to_string())?;
    for (i, row) in mono.gram.iter().enumerate() {
        for (j, g) in row.iter().enumerate() {
            ensure(*g == CRat::int(i64::from(i + j == 2)), || format!("monomial Gram ({i},{j}) = {g}"))?;
        }
    }
    Ok(format!("{} charts, max residual {worst:.1e}; diagonal and antidiagonal Gram reproduced", all.len()))
}

fn phi_contract(specs: &[ForestSpec]) -> Outcome {
    let mut r = rng(6);
    let mut blocks = 0;
    let mut worst: f64 = 0.0;
    let mut all: Vec<Forest> = SHAPES.iter().map(|(_, j)| forest(j)).collect();
    all.push(forest(ELLIPSOIDAL));
    for s in specs {
        all.push(Forest::new(s).map_err(|e| e.to_string())?);
    }
    for f in &all {
        for v in 0..f.block_count() {
            if phi(f, v).is_none() {
                continue;
            }
            let pts = float_points(f, &mut r, 10);
            let Some(rep) = phi_relations(f, v, &pts).map_err(|e| e.to_string())? else { continue };
            blocks += 1;
            worst = worst.max(rep.against_coordinates).max(rep.self_pairing);
            ensure(worst < 1e-8, || format!("{} block {v}: {rep:?}", f.spec().to_json()))?;
        }
    }
    ensure(blocks > 0, || "no flat block exercised".into())?;
    Ok(format!("{blocks} flat blocks, max residual {worst:.1e}"))
}

fn compatible(specs: &[ForestSpec]) -> Outcome {
    let mut r = rng(7);
    for s in specs {
        let f = Forest::new(s).map_err(|e| e.to_string())?;
        let x = random_point(&mut r, &f);
        let res = sinjukov_residual(&f, &x, |s: &[Jet2<CRat>]| Ok(compatible_l(&f, s))).map_err(|e| e.to_string())?;
        ensure(res.is_zero(), || format!("Sinjukov {}: {res:?}", s.to_json()))?;
        let pts: Vec<_> = (0..3).map(|_| random_point(&mut r, &f)).collect();
        let expected = if f.is_connected() { 2 } else { f.components().len() };
        let nullity = compatible_nullity(&f, &pts);
        ensure(nullity == expected, || format!("{}: nullity {nullity}, expected {expected}", s.to_json()))?;
    }
    Ok(format!("{} specs: Sinjukov exact, solution family of the expected dimension", specs.len()))
}

fn cone() -> Outcome {
    let mut r = rng(8);
    let opts = GenOptions { forests: false, ..GenOptions::default() };
    let mut count = 0;
    let mut tried = 0;
    while count < 10 {
        tried += 1;
        ensure(tried < 10_000, || "too few unit-curvature specs generated".into())?;
        let s = random_spec(&mut r, &opts);
        let f = Forest::new(&s).map_err(|e| e.to_string())?;
        if f.curvature() != CRat::int(1) {
            continue;
        }
        let m = ConeMetric::new(&f).map_err(|e| e.to_string())?;
        for _ in 0..3 {
            let mut x = vec![CRat::real(random_rational(&mut r, 9, 4))];
            if x[0].is_zero() {
                continue;
            }
            x.extend(random_point(&mut r, &f));
            let rep = curvature_residual(&m, &x, &CRat::int(0)).map_err(|e| e.to_string())?;
            ensure(rep.residual.is_zero(), || format!("cone over {}", s.to_json()))?;
        }
        count += 1;
    }
    Ok(format!("{count} unit-curvature specs; lifted metric exactly flat"))
}

fn equivalence() -> Outcome {
    let ok = round_trips(9, 100);
    ensure(ok == 100, || format!("{ok}/100 round trips recognised"))?;
    let negatives = certified_negatives(10, 20);
    for (a, b) in &negatives {
        ensure(equivalent(a, b).map_err(|e| e.to_string())?.is_none(), || format!("accepted {}", b.to_json()))?;
    }
    let mut r = rng(11);
    for _ in 0..20 {
        let s = random_spec(&mut r, &GenOptions::default());
        let f = Forest::new(&s).map_err(|e| e.to_string())?;
        let v = r.gen_range(0..f.block_count());
        let a = loop {
            let a = random_rational(&mut r, 4, 3);
            if a != num_rational::BigRational::from_integer(0.into()) {
                break a;
            }
        };
        let c = random_rational(&mut r, 5, 2);
        let moved = apply_move(&s, &Move::B { block: v + 1, a: a.clone(), c: c.clone() }).map_err(|e| e.to_string())?;
        let g = Forest::new(&moved).map_err(|e| e.to_string())?;
        let x = random_point(&mut r, &f);
        let y: Vec<CRat> = (0..f.dim())
            .map(|i| {
                if f.block_of(i) == v {
                    CRat::real(a.clone()) * x[i].clone() + CRat::real(c.clone())
                } else {
                    x[i].clone()
                }
            })
            .collect();
        let old = f.contravariant(&x).map_err(|e| e.to_string())?;
        let new = g.contravariant(&y).map_err(|e| e.to_string())?;
        let a2 = CRat::real(a.clone() * a.clone());
        for i in 0..f.dim() {
            let want = if f.block_of(i) == v { old[i].clone() * a2.clone() } else { old[i].clone() };
            ensure(new[i] == want, || format!("move B on {} block {v}", s.to_json()))?;
        }
    }
    Ok("100/100 round trips; 20/20 certified negatives rejected; move B isometric on 20 specs".into())
}

fn dynamics(specs: &[ForestSpec]) -> Outcome {
    let mut r = rng(12);
    let mut worst: f64 = 0.0;
    let mut cases = vec![
        (forest(SPHERE), vec![1.4, 2.6], vec![0.3, -0.2]),
        (forest(CURVED_CHILD_CHAIN), vec![1.4, 2.6, 5.5], vec![0.05, -0.04, 0.03]),
    ];
    for s in specs.iter().take(10) {
        let f = Forest::new(s).map_err(|e| e.to_string())?;
        let x = random_float_point(&mut r, &f, -3.0, 6.0, 0.5);
        let p: Vec<f64> = (0..f.dim()).map(|_| r.gen_range(-0.02..0.02)).collect();
        cases.push((f, x, p));
    }
    for (f, x, p) in &cases {
        let d = max_drift(f, x, p, 1e-3, 1000);
        ensure(d < 1e-6, || format!("{}: drift {d:e}", f.spec().to_json()))?;
        worst = worst.max(d);
    }
    let (f, x, p) = &cases[0];
    let ratio = max_drift(f, x, p, 0.1, 10) / max_drift(f, x, p, 0.05, 20);
    ensure((8.0..=32.0).contains(&ratio), || format!("step-halving ratio {ratio:.2}"))?;
    Ok(format!("{} trajectories, max drift {worst:.1e}; step-halving ratio {ratio:.1}", cases.len()))
}

fn finite_differences() -> Outcome {
    let mut r = rng(13);
    let h = CRat::frac(1, 100_000);
    let mut worst: f64 = 0.0;
    for json in [SPHERE, ELLIPSOIDAL, CHAIN5, CURVED_CHILD_CHAIN, TWO_COMPONENTS] {
        let f = forest(json);
        let x: Vec<CRat> = random_float_point(&mut r, &f, -3.0, 6.0, 0.5)
            .iter()
            .map(|v| CRat::frac((v * 64.0).round() as i64, 64))
            .collect();
        if !f.is_regular(&x) {
            return Err(format!("irregular sample for {json}"));
        }
        let fd = finite_difference(&f, &x, &h);
        let (_, cov) = metric_jets(&f, &to_float(&x)).map_err(|e| e.to_string())?;
        let conn = Connection::from_covariant(&cov).map_err(|e| e.to_string())?;
        let n = f.dim();
        let mut idx = 0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    worst = worst.max((conn.gamma(i, j, k).re - fd.gamma[idx]).abs());
                    idx += 1;
                }
            }
        }
        let riem = riemann_tensor(&f, &to_float(&x)).map_err(|e| e.to_string())?;
        for (a, b) in riem.iter().zip(&fd.riemann) {
            worst = worst.max((a.re - b).abs());
        }
    }
    ensure(worst < 1e-6, || format!("max deviation {worst:e}"))?;
    Ok(format!("5 fixtures, max deviation {worst:.1e}"))
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn main() -> ExitCode {
    let specs = pool();
    let criteria: Vec<Criterion> = vec![
        ("constant curvature", Box::new(|| constant_curvature(&specs))),
        ("separability", Box::new(|| separability(&specs))),
        ("Killing tensors and commutation", Box::new(|| killing(&specs))),
        ("Stäckel matrix", Box::new(|| stackel(&specs))),
        ("flat charts", Box::new(|| flat_charts(&specs))),
        ("φ contract", Box::new(|| phi_contract(&specs))),
        ("compatible L", Box::new(|| compatible(&specs))),
        ("cone lift", Box::new(cone)),
        ("equivalence", Box::new(equivalence)),
        ("dynamics", Box::new(|| dynamics(&specs))),
        ("finite-difference oracle", Box::new(finite_differences)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({why})", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
