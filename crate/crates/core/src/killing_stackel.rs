//! Killing tensors, commuting quadratic integrals, the Stäckel matrix and
//! separable potentials.
//!
//! For each vertex `α` the family `S^α(t)` is diagonal: on block `α` it is
//! `∏_{j≠i}(t − x_α^j) / f_α`; on a block `β` above `α` it is the constant
//! `(χ_α(t) − χ_α(λ_γ)) / ((t − λ_γ) f_α)`, where `χ_α` is the characteristic
//! polynomial of `L_α` and `γ` is the vertex on the path from `β` whose parent
//! is `α`; on every other block it vanishes.

use num_complex::Complex64;
use thiserror::Error;

use crate::forest::Forest;
use crate::geometry::Residual;
use crate::jets::Jet2;
use crate::linalg::{self, Matrix};
use crate::metric::{det_shift, DiagonalMetric, MetricError};
use crate::poly::Poly;
use crate::scalar::{CRat, Field, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StackelError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("the Stäckel matrix is singular at this point")]
    Singular,
    #[error("integrand is not a non-negative real number at {0}")]
    Integrand(f64),
    #[error("quadrature did not converge on [{0}, {1}]")]
    Quadrature(f64, f64),
    #[error("expected {expected} entries, got {found}")]
    Length { expected: usize, found: usize },
}

/// Mixed entries of the diagonal `(1,1)` tensor compatible with the metric:
/// coordinates on the root block, the label `λ_γ` of the child of the root
/// leading to each other block, and the component number (1, 2, …) on every
/// block when the forest has several components.
pub fn compatible_l<R: Field>(forest: &Forest, x: &[R]) -> Vec<R> {
    let mut out = vec![R::int(0); forest.dim()];
    if forest.is_connected() {
        let root = forest.roots()[0];
        for v in 0..forest.block_count() {
            for i in forest.range(v) {
                out[i] = if v == root {
                    x[i].clone()
                } else {
                    let gamma = forest.child_towards(root, v).expect("vertex lies above the root");
                    R::lift(forest.label(gamma).expect("non-root has a label"))
                };
            }
        }
    } else {
        for (c, comp) in forest.components().iter().enumerate() {
            for &v in comp {
                for i in forest.range(v) {
                    out[i] = R::int(c as i64 + 1);
                }
            }
        }
    }
    out
}

/// Diagonal of `det(t − L) (t − L)^{-1}`: entry `i` is `∏_{j≠i} (t − l_j)`.
pub fn benenti<R: Field>(l: &[R], t: &R) -> Vec<R> {
    (0..l.len())
        .map(|i| {
            l.iter().enumerate().filter(|(j, _)| *j != i).fold(R::int(1), |acc, (_, lj)| acc * (t.clone() - lj.clone()))
        })
        .collect()
}

/// Ascending coefficients of `χ_v(t) = ∏ (t − x_v^i)`.
fn char_coeffs<R: Field>(forest: &Forest, v: usize, x: &[R]) -> Vec<R> {
    let mut c = vec![R::int(1)];
    for xi in &x[forest.range(v)] {
        let mut next = vec![R::int(0); c.len() + 1];
        for (k, a) in c.iter().enumerate() {
            next[k + 1] = next[k + 1].clone() + a.clone();
            next[k] = next[k].clone() - a.clone() * xi.clone();
        }
        c = next;
    }
    c
}

fn horner<R: Field>(c: &[R], t: &R) -> R {
    c.iter().rev().fold(R::int(0), |acc, a| acc * t.clone() + a.clone())
}

/// Quotient of synthetic division by `t − r` (remainder dropped).
fn quotient<R: Field>(c: &[R], r: &R) -> Vec<R> {
    let d = c.len() - 1;
    let mut q = vec![R::int(0); d];
    let mut carry = R::int(0);
    for k in (1..=d).rev() {
        carry = c[k].clone() + carry * r.clone();
        q[k - 1] = carry.clone();
    }
    q
}

/// `1 / f_v = ∏ det(λ_s − L_{next(s)})`.
pub fn inverse_warp<R: Field>(forest: &Forest, v: usize, x: &[R]) -> R {
    let mut acc = R::int(1);
    for s in forest.path_to_root(v) {
        if let (Some(p), Some(l)) = (forest.next(s), forest.label(s)) {
            acc = acc * det_shift(forest, p, l, x);
        }
    }
    acc
}

/// `Φ^{αβ}(t)` for `α ≺ β`.
pub fn phi_poly<R: Field>(forest: &Forest, alpha: usize, beta: usize, x: &[R], t: &R) -> Option<R> {
    let gamma = forest.child_towards(alpha, beta)?;
    let lam = R::lift(forest.label(gamma)?);
    let q = quotient(&char_coeffs(forest, alpha, x), &lam);
    Some(horner(&q, t) * inverse_warp(forest, alpha, x))
}

/// Mixed diagonal entries of `S^α(t)`.
pub fn killing_family<R: Field>(forest: &Forest, alpha: usize, x: &[R], t: &R) -> Vec<R> {
    let inv_f = inverse_warp(forest, alpha, x);
    let own = &x[forest.range(alpha)];
    let mut out = vec![R::int(0); forest.dim()];
    for beta in 0..forest.block_count() {
        if beta == alpha {
            for (k, v) in benenti(own, t).into_iter().enumerate() {
                out[forest.range(alpha).start + k] = v * inv_f.clone();
            }
        } else if forest.precedes(alpha, beta) {
            let phi = phi_poly(forest, alpha, beta, x, t).expect("α precedes β");
            for i in forest.range(beta) {
                out[i] = phi.clone();
            }
        }
    }
    out
}

/// Inverse Vandermonde matrix at the nodes `0, 1, …, m − 1`: row `d` gives the
/// weights extracting the coefficient of `t^d`.
fn vandermonde_weights(m: usize) -> Matrix<CRat> {
    let v: Matrix<CRat> = (0..m).map(|node| (0..m).map(|d| CRat::int(node as i64).pow(d as u32)).collect()).collect();
    linalg::inverse(&v).expect("Vandermonde matrix at distinct nodes is invertible")
}

/// Coefficients of `S^α(t)` in `t`: element `d` holds the mixed entries of
/// the coefficient of `t^d`, for `d = 0 .. n_α − 1`.
pub fn family_coefficients<R: Field>(forest: &Forest, alpha: usize, x: &[R]) -> Vec<Vec<R>> {
    let m = forest.block_dim(alpha);
    let samples: Vec<Vec<R>> = (0..m).map(|node| killing_family(forest, alpha, x, &R::int(node as i64))).collect();
    let w = vandermonde_weights(m);
    (0..m)
        .map(|d| {
            (0..forest.dim())
                .map(|i| (0..m).fold(R::int(0), |acc, node| acc + samples[node][i].clone() * R::lift(&w[d][node])))
                .collect()
        })
        .collect()
}

/// Which coefficient of `S^α(t)` sits in each column of block `α`:
/// `degrees[α][j]` is the power of `t`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntegralOrder {
    pub degrees: Vec<Vec<usize>>,
}

impl IntegralOrder {
    /// Columns run from the top coefficient `t^{n_α − 1}` down to `t^0`.
    pub fn descending(forest: &Forest) -> Self {
        IntegralOrder { degrees: (0..forest.block_count()).map(|v| (0..forest.block_dim(v)).rev().collect()).collect() }
    }

    /// Every ordering of the coefficients inside each block.
    pub fn all(forest: &Forest) -> Vec<Self> {
        let per_block: Vec<Vec<Vec<usize>>> = (0..forest.block_count())
            .map(|v| permutations(&(0..forest.block_dim(v)).rev().collect::<Vec<_>>()))
            .collect();
        let mut out = vec![Vec::new()];
        for choices in per_block {
            out = out
                .into_iter()
                .flat_map(|prefix: Vec<Vec<usize>>| {
                    choices.iter().map(move |c| {
                        let mut p = prefix.clone();
                        p.push(c.clone());
                        p
                    })
                })
                .collect();
        }
        out.into_iter().map(|degrees| IntegralOrder { degrees }).collect()
    }
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// A function `Σ_i a_i(x) p_i² + V(x)` known through jets at a point.
#[derive(Clone, Debug)]
pub struct QuadraticIntegral<S> {
    pub kinetic: Vec<Jet2<S>>,
    pub potential: Jet2<S>,
}

impl<S: Scalar> QuadraticIntegral<S> {
    pub fn eval(&self, p: &[S]) -> S {
        self.kinetic
            .iter()
            .zip(p)
            .fold(self.potential.value.clone(), |acc, (a, pi)| acc.add_ref(&a.value.mul_ref(pi).mul_ref(pi)))
    }

    fn dx(&self, k: usize, p: &[S]) -> S {
        self.kinetic
            .iter()
            .zip(p)
            .fold(self.potential.d(k), |acc, (a, pi)| acc.add_ref(&a.d(k).mul_ref(pi).mul_ref(pi)))
    }

    fn dp(&self, k: usize, p: &[S]) -> S {
        S::from_i64(2).mul_ref(&self.kinetic[k].value).mul_ref(&p[k])
    }
}

/// `{A, B} = Σ_k (∂A/∂p_k ∂B/∂x^k − ∂A/∂x^k ∂B/∂p_k)`.
pub fn poisson_bracket<S: Scalar>(a: &QuadraticIntegral<S>, b: &QuadraticIntegral<S>, p: &[S]) -> S {
    poisson_bracket_terms(a, b, p).iter().fold(S::zero(), |acc, t| acc.add_ref(t))
}

/// The `2n` signed summands of [`poisson_bracket`].
pub fn poisson_bracket_terms<S: Scalar>(a: &QuadraticIntegral<S>, b: &QuadraticIntegral<S>, p: &[S]) -> Vec<S> {
    (0..p.len()).flat_map(|k| [a.dp(k, p).mul_ref(&b.dx(k, p)), -a.dx(k, p).mul_ref(&b.dp(k, p))]).collect()
}

/// The `n` integrals obtained from the coefficients of every family, in
/// Stäckel column order.
pub fn extracted_integrals<S: Scalar>(
    forest: &Forest,
    x: &[S],
    order: &IntegralOrder,
) -> Result<Vec<QuadraticIntegral<S>>, MetricError> {
    let seeds = Jet2::seed(x);
    let g = forest.contravariant(&seeds)?;
    let mut out = Vec::with_capacity(forest.dim());
    for alpha in 0..forest.block_count() {
        let coeffs = family_coefficients(forest, alpha, &seeds);
        for &d in &order.degrees[alpha] {
            let kinetic = coeffs[d].iter().zip(&g).map(|(s, gi)| s.mul_jet(gi)).collect();
            out.push(QuadraticIntegral { kinetic, potential: Jet2::constant(S::zero()) });
        }
    }
    Ok(out)
}

/// Closed form of one Stäckel matrix entry, as a function of the row coordinate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StackelEntry {
    Zero,
    /// `ξ^exponent / P_block(ξ)`.
    Power {
        block: usize,
        exponent: usize,
    },
    /// `1 / (P_block(ξ) (ξ − λ_child))`.
    Coupling {
        block: usize,
        child: usize,
    },
}

impl StackelEntry {
    pub fn eval<R: Field>(&self, forest: &Forest, xi: &R) -> Result<R, MetricError> {
        let singular = || MetricError::Singular("Stäckel entry has a vanishing denominator".into());
        match self {
            StackelEntry::Zero => Ok(R::int(0)),
            StackelEntry::Power { block, exponent } => {
                let num = (0..*exponent).fold(R::int(1), |acc, _| acc * xi.clone());
                num.checked_div(&forest.poly(*block).eval_lifted(xi)).ok_or_else(singular)
            }
            StackelEntry::Coupling { block, child } => {
                let lam = R::lift(forest.label(*child).expect("child has a label"));
                let den = forest.poly(*block).eval_lifted(xi) * (xi.clone() - lam);
                den.recip().ok_or_else(singular)
            }
        }
    }

    pub fn describe(&self, forest: &Forest, coord: usize) -> String {
        let x = format!("x{}", coord + 1);
        match self {
            StackelEntry::Zero => "0".into(),
            StackelEntry::Power { block, exponent: 0 } => format!("1/P{}({x})", block + 1),
            StackelEntry::Power { block, exponent: 1 } => format!("{x}/P{}({x})", block + 1),
            StackelEntry::Power { block, exponent } => format!("{x}^{exponent}/P{}({x})", block + 1),
            StackelEntry::Coupling { block, child } => {
                let lam = forest.label(*child).expect("child has a label");
                format!("1/(P{}({x})*({x} - {lam}))", block + 1)
            }
        }
    }
}

/// The Stäckel matrix in closed form; row `i` depends only on `x^i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StackelMatrix {
    pub entries: Vec<Vec<StackelEntry>>,
}

impl StackelMatrix {
    pub fn new(forest: &Forest) -> Self {
        let n = forest.dim();
        let mut entries = vec![vec![StackelEntry::Zero; n]; n];
        for beta in 0..forest.block_count() {
            for i in forest.range(beta) {
                for alpha in 0..forest.block_count() {
                    let cols = forest.range(alpha);
                    if alpha == beta {
                        let m = forest.block_dim(alpha);
                        for (j, col) in cols.enumerate() {
                            entries[i][col] = StackelEntry::Power { block: beta, exponent: m - 1 - j };
                        }
                    } else if forest.next(alpha) == Some(beta) {
                        entries[i][cols.start] = StackelEntry::Coupling { block: beta, child: alpha };
                    }
                }
            }
        }
        StackelMatrix { entries }
    }

    pub fn eval<R: Field>(&self, forest: &Forest, x: &[R]) -> Result<Matrix<R>, MetricError> {
        self.entries.iter().enumerate().map(|(i, row)| row.iter().map(|e| e.eval(forest, &x[i])).collect()).collect()
    }

    /// Row `i` as functions of a single value `ξ` of its coordinate.
    pub fn eval_row<R: Field>(&self, forest: &Forest, i: usize, xi: &R) -> Result<Vec<R>, MetricError> {
        self.entries[i].iter().map(|e| e.eval(forest, xi)).collect()
    }

    pub fn describe(&self, forest: &Forest) -> Vec<Vec<String>> {
        self.entries.iter().enumerate().map(|(i, row)| row.iter().map(|e| e.describe(forest, i)).collect()).collect()
    }

    /// One bracketed row per line.
    pub fn render(&self, forest: &Forest) -> String {
        self.describe(forest).iter().map(|row| format!("[{}]\n", row.join(", "))).collect()
    }
}

/// Largest entry of `S·I − (p_i²)` at `(x, p)`.
pub fn stackel_residual<S: Scalar>(
    forest: &Forest,
    x: &[S],
    p: &[S],
    order: &IntegralOrder,
) -> Result<Residual<S>, MetricError> {
    let s = StackelMatrix::new(forest).eval(forest, x)?;
    let ints: Vec<S> = extracted_integrals(forest, x, order)?.iter().map(|q| q.eval(p)).collect();
    let mut res = Residual::default();
    for (i, row) in s.iter().enumerate() {
        let mut terms: Vec<S> = row.iter().zip(&ints).map(|(a, b)| a.mul_ref(b)).collect();
        terms.push(-p[i].mul_ref(&p[i]));
        res.record_terms(&terms, &[i]);
    }
    Ok(res)
}

/// First ordering (descending first) for which `S·I = P` holds exactly.
pub fn calibrate_order(forest: &Forest, x: &[CRat], p: &[CRat]) -> Result<Option<IntegralOrder>, MetricError> {
    let mut candidates = vec![IntegralOrder::descending(forest)];
    candidates.extend(IntegralOrder::all(forest));
    for order in candidates {
        if stackel_residual(forest, x, p, &order)?.is_zero() {
            return Ok(Some(order));
        }
    }
    Ok(None)
}

fn check_potentials(forest: &Forest, f: &[Poly<CRat>]) -> Result<(), StackelError> {
    if f.len() != forest.dim() {
        return Err(StackelError::Length { expected: forest.dim(), found: f.len() });
    }
    Ok(())
}

/// `U = Σ_j (S^{-1})_{1j} f_j(x^j)`: the potential added to the first integral
/// when each row of the Stäckel system gains the function `f_j` of its own coordinate.
pub fn separable_potential<R: Field>(forest: &Forest, f: &[Poly<CRat>], x: &[R]) -> Result<R, StackelError> {
    check_potentials(forest, f)?;
    let s = StackelMatrix::new(forest).eval(forest, x)?;
    let inv = linalg::inverse(&s).ok_or(StackelError::Singular)?;
    Ok(inv[0].iter().zip(f).zip(x).fold(R::int(0), |acc, ((w, fj), xj)| acc + w.clone() * fj.eval_lifted(xj)))
}

/// The integrals `S^{-1}(P + F)` with `F_j = f_j(x^j)`, as jets at `x`.
pub fn modified_integrals<S: Scalar>(
    forest: &Forest,
    f: &[Poly<CRat>],
    x: &[S],
) -> Result<Vec<QuadraticIntegral<S>>, StackelError> {
    check_potentials(forest, f)?;
    let seeds = Jet2::seed(x);
    let s = StackelMatrix::new(forest).eval(forest, &seeds)?;
    let inv = linalg::inverse(&s).ok_or(StackelError::Singular)?;
    let fv: Vec<Jet2<S>> = f.iter().zip(&seeds).map(|(fj, xj)| fj.eval_lifted(xj)).collect();
    Ok(inv
        .into_iter()
        .map(|row| {
            let potential = row.iter().zip(&fv).fold(Jet2::constant(S::zero()), |acc, (w, v)| acc + w.mul_jet(v));
            QuadraticIntegral { kinetic: row, potential }
        })
        .collect())
}

/// `W_i(b) − W_i(a) = ∫_a^b √(Σ_s S_{is}(ξ) c_s) dξ` for the row of coordinate `i`.
pub fn hj_quadrature(forest: &Forest, i: usize, a: f64, b: f64, c: &[f64]) -> Result<f64, StackelError> {
    if c.len() != forest.dim() {
        return Err(StackelError::Length { expected: forest.dim(), found: c.len() });
    }
    let s = StackelMatrix::new(forest);
    let integrand = |xi: f64| -> Result<f64, StackelError> {
        let row = s.eval_row(forest, i, &Complex64::new(xi, 0.0))?;
        let v: Complex64 = row.iter().zip(c).map(|(e, ci)| e * ci).sum();
        if v.im.abs() > 1e-12 * v.re.abs().max(1.0) || v.re < 0.0 || !v.re.is_finite() {
            return Err(StackelError::Integrand(xi));
        }
        Ok(v.re.sqrt())
    };
    let rule = GaussLegendre::new(16);
    adaptive(&rule, &integrand, a, b, 1e-10, 40)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    fn new(m: usize) -> Self {
        let mut nodes = Vec::with_capacity(m);
        let mut weights = Vec::with_capacity(m);
        for k in 0..m {
            let mut z = (std::f64::consts::PI * (k as f64 + 0.75) / (m as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, z);
                for j in 2..=m {
                    let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = m as f64 * (z * p1 - p0) / (z * z - 1.0);
                let dz = p1 / dp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            nodes.push(z);
            weights.push(2.0 / ((1.0 - z * z) * dp * dp));
        }
        GaussLegendre { nodes, weights }
    }

    fn apply(&self, f: &impl Fn(f64) -> Result<f64, StackelError>, a: f64, b: f64) -> Result<f64, StackelError> {
        let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
        let mut acc = 0.0;
        for (z, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * z)?;
        }
        Ok(acc * half)
    }
}

fn adaptive(
    rule: &GaussLegendre,
    f: &impl Fn(f64) -> Result<f64, StackelError>,
    a: f64,
    b: f64,
    rel: f64,
    depth: usize,
) -> Result<f64, StackelError> {
    let whole = rule.apply(f, a, b)?;
    let m = (a + b) / 2.0;
    let split = rule.apply(f, a, m)? + rule.apply(f, m, b)?;
    if (whole - split).abs() <= rel * split.abs().max(f64::MIN_POSITIVE) {
        return Ok(split);
    }
    if depth == 0 {
        return Err(StackelError::Quadrature(a, b));
    }
    Ok(adaptive(rule, f, a, m, rel, depth - 1)? + adaptive(rule, f, m, b, rel, depth - 1)?)
}
