use std::fmt::Display;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use sha2::{Digest, Sha256};

use sepvar::equivalence::{canon, equivalent};
use sepvar::flat_coords::{multiblock_chart, realify, verify_chart};
use sepvar::forest::{Forest, ForestSpec};
use sepvar::geometry::*;
use sepvar::jets::Jet2;
use sepvar::killing_stackel::*;
use sepvar::metric::metric_diag;
use sepvar::random::{random_float_point, random_momentum, random_point, random_rational, rng};
use sepvar::scalar::{CRat, Scalar, Tag};

use crate::report::{Report, ResidualLine, SpecRef, Sweep, REPORT_VERSION};
use crate::{Cli, Command};

#[derive(Debug, thiserror::Error)]
pub enum InputError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("cannot parse {path}: {source}")]
    Parse { path: String, source: serde_json::Error },
    #[error("{path}: {message}")]
    Spec { path: String, message: String },
    #[error("bad --{flag}: {message}")]
    Flag { flag: &'static str, message: String },
    #[error("{0}")]
    Compute(String),
}

struct Loaded {
    spec: ForestSpec,
    reference: SpecRef,
}

fn load(path: &Path) -> Result<Loaded, InputError> {
    let shown = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| InputError::Read { path: shown.clone(), source })?;
    let spec = ForestSpec::from_json(&text).map_err(|source| InputError::Parse { path: shown.clone(), source })?;
    let sha256 = Sha256::digest(spec.to_json().as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
    Ok(Loaded { spec, reference: SpecRef { path: shown, sha256 } })
}

fn build(l: &Loaded) -> Result<Forest, InputError> {
    Forest::new(&l.spec).map_err(|e| InputError::Spec { path: l.reference.path.clone(), message: e.to_string() })
}

fn compute<T, E: Display>(r: Result<T, E>) -> Result<T, InputError> {
    r.map_err(|e| InputError::Compute(e.to_string()))
}

fn parse_point(flag: &'static str, s: &str, dim: usize) -> Result<Vec<CRat>, InputError> {
    let v = s
        .split(',')
        .map(|p| CRat::parse(p.trim()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|message| InputError::Flag { flag, message })?;
    if v.len() != dim {
        return Err(InputError::Flag { flag, message: format!("expected {dim} entries, got {}", v.len()) });
    }
    Ok(v)
}

fn parse_floats(flag: &'static str, s: &str, dim: usize) -> Result<Vec<f64>, InputError> {
    let v = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| InputError::Flag { flag, message: e.to_string() })?;
    if v.len() != dim {
        return Err(InputError::Flag { flag, message: format!("expected {dim} entries, got {}", v.len()) });
    }
    Ok(v)
}

fn lift<S: Scalar>(x: &[CRat]) -> Vec<S> {
    x.iter().map(S::from_exact).collect()
}

fn report(
    cli: &Cli,
    command: &str,
    specs: Vec<SpecRef>,
    residuals: Vec<ResidualLine>,
    data: serde_json::Value,
) -> Report {
    let ok = residuals.iter().all(|r| r.ok);
    Report {
        report_version: REPORT_VERSION,
        command: command.into(),
        specs,
        seed: cli.seed,
        samples: cli.samples,
        tag: cli.tag,
        tolerance: cli.tol,
        ok,
        residuals,
        data,
    }
}

pub fn run(cli: &Cli) -> Result<Report, InputError> {
    match &cli.command {
        Command::Validate { spec } => {
            let l = load(spec)?;
            let v = l
                .spec
                .validate()
                .map_err(|e| InputError::Spec { path: l.reference.path.clone(), message: e.to_string() })?;
            let mut r = report(cli, "validate", vec![l.reference], Vec::new(), json!({ "violations": v.violations }));
            r.ok = v.is_valid();
            Ok(r)
        }
        Command::Build { spec, point } => {
            let l = load(spec)?;
            let f = build(&l)?;
            let points = match point {
                Some(p) => vec![parse_point("point", p, f.dim())?],
                None => {
                    let mut g = rng(cli.seed);
                    (0..cli.samples).map(|_| random_point(&mut g, &f)).collect()
                }
            };
            let blocks: Vec<_> = (0..f.block_count())
                .map(|v| {
                    json!({
                        "id": v + 1,
                        "coordinates": f.range(v).map(|i| format!("x{}", i + 1)).collect::<Vec<_>>(),
                        "polynomial": f.factored(v).to_string(),
                        "next": f.next(v).map(|p| p + 1),
                    })
                })
                .collect();
            let mut metrics = Vec::new();
            for x in &points {
                let g = compute(metric_diag(&f, x))?;
                metrics.push(json!({
                    "point": x.iter().map(ToString::to_string).collect::<Vec<_>>(),
                    "contravariant": g.iter().map(|b| b.iter().map(ToString::to_string).collect::<Vec<_>>()).collect::<Vec<_>>(),
                }));
            }
            let data =
                json!({ "dim": f.dim(), "curvature": f.curvature().to_string(), "blocks": blocks, "metric": metrics });
            Ok(report(cli, "build", vec![l.reference], Vec::new(), data))
        }
        Command::Curvature { spec } => {
            let l = load(spec)?;
            let f = build(&l)?;
            let lines = match cli.tag {
                Tag::Exact => curvature_lines::<CRat>(cli, &f)?,
                Tag::Float => curvature_lines::<Complex64>(cli, &f)?,
            };
            Ok(report(cli, "curvature", vec![l.reference], lines, json!({ "curvature": f.curvature().to_string() })))
        }
        Command::Verify { spec } => {
            let l = load(spec)?;
            let f = build(&l)?;
            let lines = match cli.tag {
                Tag::Exact => verify_lines::<CRat>(cli, &f)?,
                Tag::Float => verify_lines::<Complex64>(cli, &f)?,
            };
            Ok(report(cli, "verify", vec![l.reference], lines, json!({ "curvature": f.curvature().to_string() })))
        }
        Command::Killing { spec } => {
            let l = load(spec)?;
            let f = build(&l)?;
            let lines = match cli.tag {
                Tag::Exact => killing_lines::<CRat>(cli, &f)?,
                Tag::Float => killing_lines::<Complex64>(cli, &f)?,
            };
            Ok(report(cli, "killing", vec![l.reference], lines, serde_json::Value::Null))
        }
        Command::Stackel { spec, point } => {
            let l = load(spec)?;
            let f = build(&l)?;
            let s = StackelMatrix::new(&f);
            let mut data = json!({ "matrix": s.describe(&f) });
            if let Some(p) = point {
                let x = parse_point("point", p, f.dim())?;
                let m = compute(s.eval(&f, &x))?;
                data["value"] =
                    json!(m.iter().map(|r| r.iter().map(ToString::to_string).collect::<Vec<_>>()).collect::<Vec<_>>());
            }
            let lines = match cli.tag {
                Tag::Exact => stackel_lines::<CRat>(cli, &f)?,
                Tag::Float => stackel_lines::<Complex64>(cli, &f)?,
            };
            Ok(report(cli, "stackel", vec![l.reference], lines, data))
        }
        Command::Flat { spec, real } => {
            let l = load(spec)?;
            let f = build(&l)?;
            let mut g = rng(cli.seed);
            let pts: Vec<Vec<f64>> = if *real {
                // one coordinate region, so that every coordinate keeps its type
                let base = random_float_point(&mut g, &f, -3.0, 6.0, 0.1);
                (0..cli.samples.max(1)).map(|_| base.iter().map(|v| v + g.gen_range(-0.02..0.02)).collect()).collect()
            } else {
                (0..cli.samples.max(1)).map(|_| random_float_point(&mut g, &f, -3.0, 6.0, 0.1)).collect()
            };
            let mut chart = compute(multiblock_chart(&f))?;
            if *real {
                chart = compute(realify(&f, &chart, &pts))?;
            }
            let rep = compute(verify_chart(&f, &chart, &pts))?;
            let line = ResidualLine {
                name: "generalised flat".into(),
                value: format!("{:e}", rep.residual),
                magnitude: rep.residual,
                scale: 0.0,
                index: rep.worst.map(|(i, j, _)| vec![i, j]).unwrap_or_default(),
                point: rep.worst.map(|(_, _, p)| pts[p].iter().map(|v| format!("{v:e}")).collect()),
                ok: rep.residual <= cli.tol && rep.full_rank,
            };
            let data = json!({
                "curvature": chart.curvature.to_string(),
                "descriptors": chart.descriptors,
                "gram": chart.gram.iter().map(|r| r.iter().map(ToString::to_string).collect::<Vec<_>>()).collect::<Vec<_>>(),
                "annotations": chart.annotations,
                "formulas": chart.render().lines().map(str::to_string).collect::<Vec<_>>(),
                "full_rank": rep.full_rank,
                "skipped_points": rep.skipped,
            });
            Ok(report(cli, "flat", vec![l.reference], vec![line], data))
        }
        Command::Equiv { first, second } => {
            let a = load(first)?;
            let b = load(second)?;
            build(&a)?;
            build(&b)?;
            let w = compute(equivalent(&a.spec, &b.spec))?;
            let mut r = report(
                cli,
                "equiv",
                vec![a.reference, b.reference],
                Vec::new(),
                json!({ "equivalent": w.is_some(), "witness": w }),
            );
            r.ok = w.is_some();
            Ok(r)
        }
        Command::Canon { spec } => {
            let l = load(spec)?;
            build(&l)?;
            let (c, moves) = compute(canon(&l.spec))?;
            Ok(report(cli, "canon", vec![l.reference], Vec::new(), json!({ "canonical": c, "moves": moves })))
        }
        Command::Geodesic { spec, point, momentum, step, time } => {
            let l = load(spec)?;
            let f = build(&l)?;
            let mut g = rng(cli.seed);
            let x = match point {
                Some(p) => parse_floats("point", p, f.dim())?,
                None => random_float_point(&mut g, &f, -3.0, 6.0, 0.5),
            };
            let p = match momentum {
                Some(p) => parse_floats("momentum", p, f.dim())?,
                None => (0..f.dim()).map(|_| g.gen_range(-0.05..0.05)).collect(),
            };
            if !(*step > 0.0 && *time > 0.0) {
                return Err(InputError::Flag { flag: "step", message: "step and time must be positive".into() });
            }
            let steps = (time / step).round() as usize;
            geodesic_report(cli, l.reference, &f, &x, &p, *step, steps)
        }
    }
}

fn sample_points<S: Scalar>(g: &mut ChaCha8Rng, f: &Forest, count: usize) -> Vec<(Vec<S>, Vec<S>)> {
    (0..count)
        .map(|_| {
            let x = random_point(g, f);
            let p = random_momentum(g, f.dim());
            (lift(&x), lift(&p))
        })
        .collect()
}

fn curvature_lines<S: Scalar + Display>(cli: &Cli, f: &Forest) -> Result<Vec<ResidualLine>, InputError> {
    let mut g = rng(cli.seed);
    let k = S::from_exact(&f.curvature());
    let mut sweep = Sweep::new("curvature");
    for (x, _) in sample_points::<S>(&mut g, f, cli.samples) {
        sweep.update(compute(curvature_residual(f, &x, &k))?.residual, &x);
    }
    Ok(vec![sweep.line(cli.tol)])
}

fn killing_sweeps<S: Scalar + Display>(
    f: &Forest,
    g: &mut ChaCha8Rng,
    x: &[S],
    p: &[S],
    killing: &mut Sweep<S>,
    brackets: &mut Sweep<S>,
) -> Result<(), InputError> {
    for alpha in 0..f.block_count() {
        let t = S::from_exact(&CRat::real(random_rational(g, 9, 4)));
        let r = compute(killing_residual(f, x, |s: &[Jet2<S>]| {
            Ok(killing_family(f, alpha, s, &Jet2::constant(t.clone())))
        }))?;
        killing.update(r, x);
    }
    let ints = compute(extracted_integrals(f, x, &IntegralOrder::descending(f)))?;
    let mut r = Residual::default();
    for (a, qa) in ints.iter().enumerate() {
        for (b, qb) in ints.iter().enumerate().skip(a + 1) {
            r.record_terms(&poisson_bracket_terms(qa, qb, p), &[a, b]);
        }
    }
    brackets.update(r, x);
    Ok(())
}

fn verify_lines<S: Scalar + Display>(cli: &Cli, f: &Forest) -> Result<Vec<ResidualLine>, InputError> {
    let mut g = rng(cli.seed);
    let k = S::from_exact(&f.curvature());
    let names = [
        "curvature",
        "levi-civita",
        "separability hessian",
        "separability triple",
        "separability pair",
        "killing",
        "brackets",
        "sinjukov",
        "stackel",
    ];
    let mut sweeps: Vec<Sweep<S>> = names.iter().map(|n| Sweep::new(n)).collect();
    let order = IntegralOrder::descending(f);
    for (x, p) in sample_points::<S>(&mut g, f, cli.samples) {
        sweeps[0].update(compute(curvature_residual(f, &x, &k))?.residual, &x);
        sweeps[1].update(compute(levi_civita_residual(f, &x, &p))?, &x);
        let sep = compute(separability_residuals(f, &x))?;
        sweeps[2].update(sep.hessian, &x);
        sweeps[3].update(sep.triple, &x);
        sweeps[4].update(sep.pair, &x);
        let (head, tail) = sweeps.split_at_mut(6);
        killing_sweeps(f, &mut g, &x, &p, &mut head[5], &mut tail[0])?;
        sweeps[7].update(compute(sinjukov_residual(f, &x, |s: &[Jet2<S>]| Ok(compatible_l(f, s))))?, &x);
        sweeps[8].update(compute(stackel_residual(f, &x, &p, &order))?, &x);
    }
    Ok(sweeps.iter().map(|s| s.line(cli.tol)).collect())
}

fn killing_lines<S: Scalar + Display>(cli: &Cli, f: &Forest) -> Result<Vec<ResidualLine>, InputError> {
    let mut g = rng(cli.seed);
    let mut killing = Sweep::new("killing");
    let mut brackets = Sweep::new("brackets");
    for (x, p) in sample_points::<S>(&mut g, f, cli.samples) {
        killing_sweeps(f, &mut g, &x, &p, &mut killing, &mut brackets)?;
    }
    Ok(vec![killing.line(cli.tol), brackets.line(cli.tol)])
}

fn stackel_lines<S: Scalar + Display>(cli: &Cli, f: &Forest) -> Result<Vec<ResidualLine>, InputError> {
    let mut g = rng(cli.seed);
    let order = IntegralOrder::descending(f);
    let mut sweep = Sweep::new("stackel");
    for (x, p) in sample_points::<S>(&mut g, f, cli.samples) {
        sweep.update(compute(stackel_residual(f, &x, &p, &order))?, &x);
    }
    Ok(vec![sweep.line(cli.tol)])
}

fn geodesic_report(
    cli: &Cli,
    spec: SpecRef,
    f: &Forest,
    x: &[f64],
    p: &[f64],
    h: f64,
    steps: usize,
) -> Result<Report, InputError> {
    let c = |v: &[f64]| v.iter().map(|&a| Complex64::new(a, 0.0)).collect::<Vec<_>>();
    let order = IntegralOrder::descending(f);
    let values = |x: &[Complex64], p: &[Complex64]| -> Result<Vec<Complex64>, InputError> {
        let mut v = vec![compute(hamiltonian(f, x, p))?];
        v.extend(compute(extracted_integrals(f, x, &order))?.iter().map(|q| q.eval(p)));
        Ok(v)
    };
    let start = PhasePoint { x: c(x), p: c(p) };
    let v0 = values(&start.x, &start.p)?;
    let traj = compute(geodesic_rk4(f, start, Complex64::new(h, 0.0), steps))?;
    let mut drift = vec![(0.0f64, 0usize); v0.len()];
    for (step, s) in traj.iter().enumerate() {
        for (k, (a, b)) in values(&s.x, &s.p)?.iter().zip(&v0).enumerate() {
            let d = (a - b).norm() / b.norm().max(f64::MIN_POSITIVE);
            if d > drift[k].0 {
                drift[k] = (d, step);
            }
        }
    }
    let lines = drift
        .iter()
        .enumerate()
        .map(|(k, &(d, step))| ResidualLine {
            name: if k == 0 { "H".into() } else { format!("I{k}") },
            value: format!("{d:e}"),
            magnitude: d,
            scale: 0.0,
            index: vec![step],
            point: Some(traj[step].x.iter().map(|v| format!("{:e}", v.re)).collect()),
            ok: d <= cli.tol.max(1e-6),
        })
        .collect();
    let last = traj.last().expect("trajectory is non-empty");
    let data = json!({
        "step": h,
        "steps": steps,
        "start": { "x": x, "p": p },
        "end": { "x": last.x.iter().map(|v| v.re).collect::<Vec<_>>(), "p": last.p.iter().map(|v| v.re).collect::<Vec<_>>() },
    });
    Ok(report(cli, "geodesic", vec![spec], lines, data))
}
