//! Flat and generalised flat coordinates.
//!
//! A chart is a list of [`FlatFn`] trees plus a constant matrix `G` such that
//! `g*(dY^i, dY^j) = G^{ij} - K Y^i Y^j`. For one block with
//! `P = -4c ∏ (t - μ_i)^{k_i}` the functions are Taylor coefficients of
//! `√det(t - L)` at each root and of `√det(1 - tL)` at zero. Several blocks
//! are glued by dropping the coordinate a curved child absorbs, correcting
//! the top coordinate of a multiple root by the children's `φ`, and scaling
//! by the inverse square root of the warp factor.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forest::{BlockSpec, Forest, ForestSpec};
use crate::jets::{Jet2, Series};
use crate::linalg::{rank, rank_float, Matrix};
use crate::metric::{det_shift, DiagonalMetric, MetricError};
use crate::poly::Poly;
use crate::scalar::{CRat, Field, Scalar, Transcendental};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlatError {
    #[error("point lies on a caustic of {0}")]
    Caustic(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("vanishing correction constant on block {0}")]
    ZeroCorrection(usize),
    #[error("degenerate Gram matrix")]
    Degenerate,
}

/// One factor `√det(λ - L_v)` of a warp scaling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WarpFactor {
    pub block: usize,
    pub label: CRat,
}

/// A (generalised) flat coordinate as an expression tree.
/// Block indices are 0-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FlatFn {
    /// `[τ^order] √det((μ + τ) - L_block)`.
    FiniteRoot { block: usize, root: CRat, order: usize },
    /// `[t^order] √det(1 - t L_block) - offset`.
    Infinity { block: usize, order: usize, offset: CRat },
    /// `scale · ([t^order] √det(1 - t L_block) - offset)`.
    Phi { block: usize, order: usize, scale: CRat, offset: CRat },
    /// `base - coefficient · anchor · Σ subtract`.
    ProductModified { base: Box<FlatFn>, coefficient: CRat, anchor: Box<FlatFn>, subtract: Vec<FlatFn> },
    /// `base · ∏ √det(λ - L_v)`.
    WarpScaled { base: Box<FlatFn>, factors: Vec<WarpFactor> },
    /// `Σ w · f`; produced by [`realify`].
    Combination { terms: Vec<(CRat, FlatFn)> },
}

fn block_vars<R: Clone>(forest: &Forest, block: usize, x: &[R]) -> Vec<R> {
    x[forest.range(block)].to_vec()
}

/// Coefficients `[t^0..=t^order]` of `√∏ (a_s + b_s t)`.
fn sqrt_series<R: Field + Transcendental>(factors: Vec<(R, R)>, order: usize, what: &str) -> Result<Vec<R>, FlatError> {
    let mut s = Series::linear(R::int(1), R::int(0), order);
    for (a, b) in factors {
        s = s.mul(&Series::linear(a, b, order));
    }
    s.sqrt().map(|r| r.coeffs).ok_or_else(|| FlatError::Caustic(what.to_string()))
}

impl FlatFn {
    pub fn eval<R: Field + Transcendental>(&self, forest: &Forest, x: &[R]) -> Result<R, FlatError> {
        match self {
            FlatFn::FiniteRoot { block, root, order } => {
                let mu = R::lift(root);
                let f = block_vars(forest, *block, x).into_iter().map(|xs| (mu.clone() - xs, R::int(1))).collect();
                Ok(sqrt_series(f, *order, &self.label())?[*order].clone())
            }
            FlatFn::Infinity { block, order, offset } => {
                Ok(infinity_coeff(forest, *block, x, *order, &self.label())? - R::lift(offset))
            }
            FlatFn::Phi { block, order, scale, offset } => {
                let v = infinity_coeff(forest, *block, x, *order, &self.label())? - R::lift(offset);
                Ok(v * R::lift(scale))
            }
            FlatFn::ProductModified { base, coefficient, anchor, subtract } => {
                let mut sum = R::int(0);
                for f in subtract {
                    sum = sum + f.eval(forest, x)?;
                }
                Ok(base.eval(forest, x)? - anchor.eval(forest, x)? * sum * R::lift(coefficient))
            }
            FlatFn::WarpScaled { base, factors } => {
                let mut v = base.eval(forest, x)?;
                for w in factors {
                    let d = det_shift(forest, w.block, &w.label, x);
                    if d.value().is_zero() {
                        return Err(FlatError::Caustic(format!("√det({} - L{})", w.label, w.block + 1)));
                    }
                    v = v * d.sqrt();
                }
                Ok(v)
            }
            FlatFn::Combination { terms } => {
                let mut acc = R::int(0);
                for (w, f) in terms {
                    acc = acc + f.eval(forest, x)? * R::lift(w);
                }
                Ok(acc)
            }
        }
    }

    fn label(&self) -> String {
        match self {
            FlatFn::FiniteRoot { block, root, order } => format!("Y[{}]_{{{root}}}^{order}", block + 1),
            FlatFn::Infinity { block, order, .. } => format!("Y[{}]_inf^{order}", block + 1),
            FlatFn::Phi { block, .. } => format!("phi[{}]", block + 1),
            _ => self.describe(),
        }
    }

    /// A one-line formula.
    pub fn describe(&self) -> String {
        match self {
            FlatFn::FiniteRoot { block, root, order } => {
                format!("[τ^{order}] sqrt(det(({root} + τ) - L{}))", block + 1)
            }
            FlatFn::Infinity { block, order, offset } => {
                format!("[t^{order}] sqrt(det(1 - t L{})) - ({offset})", block + 1)
            }
            FlatFn::Phi { block, order, scale, offset } => {
                format!("({scale})·([t^{order}] sqrt(det(1 - t L{})) - ({offset}))", block + 1)
            }
            FlatFn::ProductModified { base, coefficient, anchor, subtract } => {
                let phis: Vec<String> = subtract.iter().map(FlatFn::label).collect();
                format!("{} - ({coefficient})·{}·({})", base.describe(), anchor.label(), phis.join(" + "))
            }
            FlatFn::WarpScaled { base, factors } => {
                let mut s = format!("({})", base.describe());
                for w in factors {
                    let _ = write!(s, "·sqrt(det({} - L{}))", w.label, w.block + 1);
                }
                s
            }
            FlatFn::Combination { terms } => {
                let parts: Vec<String> = terms.iter().map(|(w, f)| format!("({w})·[{}]", f.describe())).collect();
                parts.join(" + ")
            }
        }
    }
}

fn infinity_coeff<R: Field + Transcendental>(
    forest: &Forest,
    block: usize,
    x: &[R],
    order: usize,
    what: &str,
) -> Result<R, FlatError> {
    let f = block_vars(forest, block, x).into_iter().map(|xs| (R::int(1), -xs)).collect();
    Ok(sqrt_series(f, order, what)?[order].clone())
}

/// A coordinate system with its constant matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatChart {
    pub descriptors: Vec<FlatFn>,
    pub curvature: CRat,
    pub gram: Matrix<CRat>,
    /// Per-descriptor note, filled by [`realify`].
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub annotations: Vec<String>,
}

impl FlatChart {
    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    pub fn eval<R: Field + Transcendental>(&self, forest: &Forest, x: &[R]) -> Result<Vec<R>, FlatError> {
        self.descriptors.iter().map(|d| d.eval(forest, x)).collect()
    }

    pub fn is_nondegenerate(&self) -> bool {
        rank(&self.gram) == self.len()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (i, d) in self.descriptors.iter().enumerate() {
            let _ = writeln!(s, "Y{} = {}", i + 1, d.describe());
        }
        let _ = writeln!(s, "K = {}", self.curvature);
        for row in &self.gram {
            let r: Vec<String> = row.iter().map(ToString::to_string).collect();
            let _ = writeln!(s, "[{}]", r.join(", "));
        }
        s
    }
}

/// `-leading / 4`.
fn block_c(forest: &Forest, v: usize) -> CRat {
    -(forest.factored(v).leading_crat() * CRat::frac(1, 4))
}

/// Coefficients of `∏ (1 - t μ_s)^{k_s}`.
fn infinity_poly(forest: &Forest, v: usize) -> Poly<CRat> {
    forest
        .factored(v)
        .roots
        .iter()
        .fold(Poly::constant(CRat::int(1)), |acc, (r, k)| acc.mul(&Poly::new(vec![CRat::int(1), -r.clone()]).pow(*k)))
}

/// Descriptors and Gram of the one-block metric `P_v(L_v) g_LC`.
fn block_chart(forest: &Forest, v: usize) -> (Vec<FlatFn>, Matrix<CRat>) {
    let fp = forest.factored(v);
    let c = block_c(forest, v);
    let n = forest.block_dim(v);
    let mut descs = Vec::new();
    let mut blocks: Vec<Matrix<CRat>> = Vec::new();
    for (i, (mu, k)) in fp.roots.iter().enumerate() {
        let k = *k as usize;
        let taylor = fp.cofactor(i).taylor_at(mu);
        let coeff = |m: usize| taylor.get(m).cloned().unwrap_or_else(|| CRat::int(0));
        let mut g = vec![vec![CRat::int(0); k]; k];
        for (a, row) in g.iter_mut().enumerate() {
            for (b, e) in row.iter_mut().enumerate() {
                if a + b + 1 >= k {
                    *e = c.clone() * coeff(a + b + 1 - k);
                }
            }
        }
        blocks.push(g);
        descs.extend((0..k).map(|order| FlatFn::FiniteRoot { block: v, root: mu.clone(), order }));
    }
    let deg = fp.degree();
    if deg < n {
        let d = n - deg;
        let r = infinity_poly(forest, v);
        let mut g = vec![vec![CRat::int(0); d]; d];
        for a in 1..=d {
            for b in 1..=d {
                if a + b > d {
                    g[a - 1][b - 1] = -(c.clone() * r.coeff(a + b - d - 1));
                }
            }
            descs.push(FlatFn::Infinity { block: v, order: a, offset: r.coeff(a) });
        }
        blocks.push(g);
    }
    (descs, block_diag(&blocks))
}

fn block_diag(blocks: &[Matrix<CRat>]) -> Matrix<CRat> {
    let n: usize = blocks.iter().map(Vec::len).sum();
    let mut out = vec![vec![CRat::int(0); n]; n];
    let mut o = 0;
    for b in blocks {
        for (i, row) in b.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                out[o + i][o + j] = e.clone();
            }
        }
        o += b.len();
    }
    out
}

/// The auxiliary function `φ` of a flat block.
pub fn phi(forest: &Forest, v: usize) -> Option<FlatFn> {
    if forest.is_curved_block(v) {
        return None;
    }
    let d = forest.block_dim(v) - forest.factored(v).degree();
    let c = block_c(forest, v);
    Some(FlatFn::Phi {
        block: v,
        order: d + 1,
        scale: c.recip()?,
        offset: infinity_poly(forest, v).coeff(d + 1) * CRat::frac(1, 2),
    })
}

/// The chart of a single-vertex forest.
pub fn single_block_chart(forest: &Forest, v: usize) -> FlatChart {
    let (descriptors, gram) = block_chart(forest, v);
    let curvature = if forest.is_curved_block(v) { block_c(forest, v) } else { CRat::int(0) };
    FlatChart { descriptors, curvature, gram, annotations: Vec::new() }
}

/// A forest made of block `v` alone.
pub fn isolate_block(forest: &Forest, v: usize) -> Forest {
    let b = forest.block(v);
    let spec = ForestSpec {
        blocks: vec![BlockSpec { id: 1, dim: b.dim, poly: b.poly.clone(), parent: None, label: None, sample: None }],
    };
    Forest::new(&spec).expect("a single block is always valid")
}

/// The chart of a whole forest, assembled from the block charts.
pub fn multiblock_chart(forest: &Forest) -> Result<FlatChart, FlatError> {
    let mut descriptors = Vec::new();
    let mut grams = Vec::new();
    for v in 0..forest.block_count() {
        let (descs, gram) = block_chart(forest, v);
        let mut keep = vec![true; descs.len()];
        let mut descs: Vec<FlatFn> = descs;

        let position = |descs: &[FlatFn], label: &CRat, ord: usize| {
            descs
                .iter()
                .position(|d| matches!(d, FlatFn::FiniteRoot { root, order, .. } if root == label && *order == ord))
        };
        let mut groups: BTreeMap<CRat, Vec<usize>> = BTreeMap::new();
        for &ch in forest.children(v) {
            let lambda = forest.label(ch).expect("child has a label").clone();
            if forest.is_curved_block(ch) {
                if let Some(p) = position(&descs, &lambda, 0) {
                    keep[p] = false;
                }
            } else {
                groups.entry(lambda).or_default().push(ch);
            }
        }
        for (lambda, children) in groups {
            let k = forest.factored(v).multiplicity(&lambda) as usize;
            let (Some(p0), Some(top)) = (position(&descs, &lambda, 0), position(&descs, &lambda, k - 1)) else {
                continue;
            };
            let b = gram[p0][top].clone();
            if b.is_zero() {
                return Err(FlatError::ZeroCorrection(v + 1));
            }
            let subtract = children.iter().map(|&ch| phi(forest, ch).expect("flat child")).collect();
            descs[top] = FlatFn::ProductModified {
                base: Box::new(descs[top].clone()),
                coefficient: b,
                anchor: Box::new(descs[p0].clone()),
                subtract,
            };
        }

        let factors: Vec<WarpFactor> = forest
            .path_to_root(v)
            .into_iter()
            .filter_map(|s| Some(WarpFactor { block: forest.next(s)?, label: forest.label(s)?.clone() }))
            .collect();
        let idx: Vec<usize> = (0..descs.len()).filter(|&i| keep[i]).collect();
        for &i in &idx {
            let d = descs[i].clone();
            descriptors.push(if factors.is_empty() {
                d
            } else {
                FlatFn::WarpScaled { base: Box::new(d), factors: factors.clone() }
            });
        }
        grams.push(idx.iter().map(|&i| idx.iter().map(|&j| gram[i][j].clone()).collect()).collect::<Matrix<CRat>>());
    }
    let chart =
        FlatChart { descriptors, curvature: forest.curvature(), gram: block_diag(&grams), annotations: Vec::new() };
    if !chart.is_nondegenerate() {
        return Err(FlatError::Degenerate);
    }
    Ok(chart)
}

fn complex_point(x: &[f64]) -> Vec<Complex64> {
    x.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

/// `g*(dY^i, dY^j)` for all pairs together with the values `Y^i`.
pub fn pairings<M: DiagonalMetric>(
    metric: &M,
    forest: &Forest,
    descs: &[FlatFn],
    x: &[Complex64],
) -> Result<(Vec<Complex64>, Matrix<Complex64>), FlatError> {
    let jets = Jet2::seed(x);
    let ginv: Vec<Complex64> = metric.contravariant(x)?;
    let ys: Vec<Jet2<Complex64>> = descs.iter().map(|d| d.eval(forest, &jets)).collect::<Result<_, _>>()?;
    let m = ys.len();
    let mut out = vec![vec![Complex64::new(0.0, 0.0); m]; m];
    for i in 0..m {
        for j in 0..m {
            out[i][j] = (0..x.len()).map(|k| ginv[k] * ys[i].d(k) * ys[j].d(k)).sum();
        }
    }
    Ok((ys.iter().map(|y| y.value).collect(), out))
}

/// Outcome of [`verify_chart`].
#[derive(Clone, Debug, Default, Serialize)]
pub struct ChartReport {
    pub residual: f64,
    /// `(i, j, point index)` of the worst entry.
    pub worst: Option<(usize, usize, usize)>,
    pub full_rank: bool,
    pub skipped: Vec<usize>,
}

/// Largest `|g*(dY^i, dY^j) - (G^{ij} - K Y^i Y^j)|` over the points, each
/// divided by `1 + |G^{ij}| + |K Y^i Y^j| + |g*(dY^i, dY^j)|`, and
/// whether `[Y | dY]` (just `dY` when flat) has full rank at the first usable point.
pub fn verify_chart(forest: &Forest, chart: &FlatChart, points: &[Vec<f64>]) -> Result<ChartReport, FlatError> {
    let k = chart.curvature.to_c64();
    let gram: Vec<Vec<Complex64>> = chart.gram.iter().map(|r| r.iter().map(CRat::to_c64).collect()).collect();
    let mut rep = ChartReport::default();
    let mut rank_checked = false;
    for (pi, x) in points.iter().enumerate() {
        let xc = complex_point(x);
        let (ys, pg) = match pairings(forest, forest, &chart.descriptors, &xc) {
            Ok(v) => v,
            Err(FlatError::Caustic(_)) => {
                rep.skipped.push(pi);
                continue;
            }
            Err(e) => return Err(e),
        };
        for i in 0..ys.len() {
            for j in 0..ys.len() {
                let model = gram[i][j] - k * ys[i] * ys[j];
                let scale = 1.0 + gram[i][j].norm() + (k * ys[i] * ys[j]).norm() + pg[i][j].norm();
                let r = (pg[i][j] - model).norm() / scale;
                if r > rep.residual || rep.worst.is_none() {
                    rep.residual = rep.residual.max(r);
                    rep.worst = Some((i, j, pi));
                }
            }
        }
        if !rank_checked {
            rep.full_rank = differential_rank(forest, chart, &xc)? == chart.len();
            rank_checked = true;
        }
    }
    Ok(rep)
}

/// Rank of the matrix with rows `(Y^i, ∂Y^i)` (rows `∂Y^i` when flat).
pub fn differential_rank(forest: &Forest, chart: &FlatChart, x: &[Complex64]) -> Result<usize, FlatError> {
    let jets = Jet2::seed(x);
    let curved = !chart.curvature.is_zero();
    let rows: Vec<Vec<Complex64>> = chart
        .descriptors
        .iter()
        .map(|d| {
            let y = d.eval(forest, &jets)?;
            let mut row = if curved { vec![y.value] } else { Vec::new() };
            row.extend((0..x.len()).map(|k| y.d(k)));
            Ok(row)
        })
        .collect::<Result<_, FlatError>>()?;
    Ok(rank_float(&rows, 1e-9))
}

/// Residuals of `g*(dφ, dY) = Y` and `g*(dφ, dφ) = 2φ` for a flat block,
/// taken with respect to its own one-block metric.
#[derive(Clone, Debug, Default, Serialize)]
pub struct PhiReport {
    pub against_coordinates: f64,
    pub self_pairing: f64,
}

pub fn phi_relations(forest: &Forest, v: usize, points: &[Vec<f64>]) -> Result<Option<PhiReport>, FlatError> {
    let single = isolate_block(forest, v);
    let Some(phi) = phi(&single, 0) else { return Ok(None) };
    let chart = single_block_chart(&single, 0);
    let mut descs = chart.descriptors.clone();
    descs.push(phi);
    let m = descs.len() - 1;
    let mut rep = PhiReport::default();
    for x in points {
        let xs = complex_point(&x[forest.range(v)]);
        let (ys, pg) = match pairings(&single, &single, &descs, &xs) {
            Ok(v) => v,
            Err(FlatError::Caustic(_)) => continue,
            Err(e) => return Err(e),
        };
        for i in 0..m {
            rep.against_coordinates = rep.against_coordinates.max((pg[m][i] - ys[i]).norm());
        }
        rep.self_pairing = rep.self_pairing.max((pg[m][m] - ys[m] * 2.0).norm());
    }
    Ok(Some(rep))
}

/// Rewrite purely imaginary coordinates and conjugate pairs as real functions,
/// classifying by their values at the sample points. `G' = M G Mᵀ`.
pub fn realify(forest: &Forest, chart: &FlatChart, points: &[Vec<f64>]) -> Result<FlatChart, FlatError> {
    let values: Vec<Vec<Complex64>> =
        points.iter().map(|x| chart.eval(forest, &complex_point(x))).collect::<Result<_, _>>()?;
    let n = chart.len();
    let tol = 1e-9;
    let close = |a: Complex64, b: Complex64| (a - b).norm() <= tol * (1.0 + a.norm().max(b.norm()));
    let all = |f: &dyn Fn(&[Complex64]) -> bool| values.iter().all(|v| f(v));

    let half = CRat::frac(1, 2);
    let mut rows: Vec<Vec<CRat>> = Vec::new();
    let mut notes = Vec::new();
    let mut used = vec![false; n];
    let unit = |i: usize, w: CRat| {
        let mut r = vec![CRat::int(0); n];
        r[i] = w;
        r
    };
    for i in 0..n {
        if used[i] {
            continue;
        }
        used[i] = true;
        if all(&|v| v[i].im.abs() <= tol * (1.0 + v[i].norm())) {
            rows.push(unit(i, CRat::int(1)));
            notes.push("real".to_string());
        } else if all(&|v| v[i].re.abs() <= tol * (1.0 + v[i].norm())) {
            rows.push(unit(i, -CRat::i()));
            notes.push("imaginary part".to_string());
        } else if let Some(j) = (i + 1..n).find(|&j| !used[j] && all(&|v| close(v[i].conj(), v[j]))) {
            used[j] = true;
            let mut re = unit(i, half.clone());
            re[j] = half.clone();
            let mut im = unit(i, -(CRat::i() * half.clone()));
            im[j] = CRat::i() * half.clone();
            rows.push(re);
            rows.push(im);
            notes.push(format!("real part of Y{} and Y{}", i + 1, j + 1));
            notes.push(format!("imaginary part of Y{}", i + 1));
        } else {
            rows.push(unit(i, CRat::int(1)));
            notes.push("complex".to_string());
        }
    }
    let descriptors = rows
        .iter()
        .map(|r| {
            let terms: Vec<(CRat, FlatFn)> = r
                .iter()
                .zip(&chart.descriptors)
                .filter(|(w, _)| !w.is_zero())
                .map(|(w, d)| (w.clone(), d.clone()))
                .collect();
            match terms.as_slice() {
                [(w, d)] if *w == CRat::int(1) => d.clone(),
                _ => FlatFn::Combination { terms },
            }
        })
        .collect();
    let mg: Matrix<CRat> = rows
        .iter()
        .map(|r| {
            (0..n).map(|j| (0..n).fold(CRat::int(0), |acc, k| acc + r[k].clone() * chart.gram[k][j].clone())).collect()
        })
        .collect();
    let gram = mg
        .iter()
        .map(|r| rows.iter().map(|s| (0..n).fold(CRat::int(0), |acc, k| acc + r[k].clone() * s[k].clone())).collect())
        .collect();
    Ok(FlatChart { descriptors, curvature: chart.curvature.clone(), gram, annotations: notes })
}
