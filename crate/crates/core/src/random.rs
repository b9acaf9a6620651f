//! Seeded generation of valid forests and regular sample points.

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::forest::{BlockSpec, Forest, ForestSpec};
use crate::poly::FactoredPoly;
use crate::scalar::{CRat, Scalar};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Shape limits for [`random_spec`].
#[derive(Clone, Debug)]
pub struct GenOptions {
    pub max_blocks: usize,
    pub max_dim: usize,
    pub max_block_dim: usize,
    /// Allow several components.
    pub forests: bool,
    /// Allow non-real conjugate root pairs.
    pub complex_roots: bool,
}

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions { max_blocks: 3, max_dim: 6, max_block_dim: 3, forests: true, complex_roots: false }
    }
}

/// A random rational `p/q` with `|p| ≤ pmax`, `1 ≤ q ≤ qmax`.
pub fn random_rational(rng: &mut impl Rng, pmax: i64, qmax: i64) -> BigRational {
    let p = rng.gen_range(-pmax..=pmax);
    let q = rng.gen_range(1..=qmax);
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

fn fresh_root(rng: &mut impl Rng, taken: &[CRat]) -> CRat {
    loop {
        let c = CRat::real(random_rational(rng, 6, 2));
        if !taken.contains(&c) {
            return c;
        }
    }
}

fn nonzero_leading(rng: &mut impl Rng) -> BigRational {
    let choices = [-4i64, -2, -1, 1, 2, 4];
    let c = *choices.choose(rng).expect("non-empty");
    let d = *[1i64, 1, 2, 3].choose(rng).expect("non-empty");
    BigRational::new(BigInt::from(c), BigInt::from(d))
}

/// How a child hangs from its parent.
#[derive(Clone, Copy, PartialEq)]
enum Attach {
    /// On a simple root: the child is curved with prescribed top coefficient.
    Simple,
    /// On a root of multiplicity at least two: the child is flat.
    Multiple,
}

/// A random valid forest. Generation is by rejection, so it always returns.
pub fn random_spec(rng: &mut impl Rng, opts: &GenOptions) -> ForestSpec {
    loop {
        if let Some(s) = try_random_spec(rng, opts) {
            if Forest::new(&s).is_ok() {
                return s;
            }
        }
    }
}

fn try_random_spec(rng: &mut impl Rng, opts: &GenOptions) -> Option<ForestSpec> {
    let count = rng.gen_range(1..=opts.max_blocks);
    let mut dims = Vec::new();
    let mut left = opts.max_dim;
    for v in 0..count {
        let reserve = count - v - 1;
        if left <= reserve {
            return None;
        }
        let d = rng.gen_range(1..=opts.max_block_dim.min(left - reserve));
        dims.push(d);
        left -= d;
    }
    let mut parents: Vec<Option<usize>> = vec![None];
    for v in 1..count {
        let root = opts.forests && rng.gen_bool(0.25);
        parents.push(if root { None } else { Some(rng.gen_range(0..v)) });
    }
    let connected = parents.iter().filter(|p| p.is_none()).count() == 1;

    let mut polys: Vec<Option<FactoredPoly>> = vec![None; count];
    let mut labels: Vec<Option<CRat>> = vec![None; count];
    let mut attach: Vec<Option<Attach>> = vec![None; count];
    for v in 0..count {
        let n = dims[v];
        let children: Vec<usize> = (0..count).filter(|&c| parents[c] == Some(v)).collect();
        let (cap, exact_top) = match parents[v] {
            None if connected => (n + 1, None),
            None => (n, None),
            Some(p) => match attach[v].expect("parent processed first") {
                Attach::Simple => {
                    let label = labels[v].clone().expect("label assigned with attach");
                    let parent = polys[p].as_ref().expect("parent processed first").expand();
                    (n + 1, Some(parent.derivative().eval(&label)))
                }
                Attach::Multiple => (n, None),
            },
        };
        let mut roots: Vec<(CRat, u32)> = Vec::new();
        let mut used = 0usize;
        let taken = |roots: &Vec<(CRat, u32)>| roots.iter().map(|(r, _)| r.clone()).collect::<Vec<_>>();
        for &c in &children {
            let want_multiple = rng.gen_bool(0.4);
            let shared = roots.iter().filter(|(_, k)| *k >= 2).map(|(r, _)| r.clone()).collect::<Vec<_>>();
            if want_multiple && !shared.is_empty() && rng.gen_bool(0.5) {
                labels[c] = Some(shared.choose(rng).expect("non-empty").clone());
                attach[c] = Some(Attach::Multiple);
            } else if want_multiple && used + 2 <= cap {
                let r = fresh_root(rng, &taken(&roots));
                roots.push((r.clone(), 2));
                used += 2;
                labels[c] = Some(r);
                attach[c] = Some(Attach::Multiple);
            } else if used < cap {
                let r = fresh_root(rng, &taken(&roots));
                roots.push((r.clone(), 1));
                used += 1;
                labels[c] = Some(r);
                attach[c] = Some(Attach::Simple);
            } else {
                return None;
            }
        }
        let target = if exact_top.is_some() { cap } else { rng.gen_range(used..=cap) };
        while used < target {
            if opts.complex_roots && used + 2 <= target && rng.gen_bool(0.3) {
                let re = random_rational(rng, 4, 2);
                let im = BigRational::from_integer(BigInt::from(rng.gen_range(1..=3)));
                let z = CRat::new(re, im);
                if taken(&roots).contains(&z) {
                    continue;
                }
                roots.push((z.clone(), 1));
                roots.push((z.conj(), 1));
                used += 2;
            } else {
                let r = fresh_root(rng, &taken(&roots));
                let k = if used + 2 <= target && rng.gen_bool(0.15) { 2 } else { 1 };
                roots.push((r, k));
                used += k as usize;
            }
        }
        let leading = match exact_top {
            Some(top) => {
                if top.is_zero() || !top.is_real() {
                    return None;
                }
                top.re
            }
            None => nonzero_leading(rng),
        };
        polys[v] = Some(FactoredPoly::new(leading, roots).ok()?);
    }
    let blocks = (0..count)
        .map(|v| BlockSpec {
            id: v + 1,
            dim: dims[v],
            poly: polys[v].clone().expect("every block processed"),
            parent: parents[v].map(|p| p + 1),
            label: labels[v].clone(),
            sample: None,
        })
        .collect();
    Some(ForestSpec { blocks })
}

/// A regular exact point with coordinates `p/q`, `|p|, |q| ≤ 50`.
pub fn random_point(rng: &mut impl Rng, forest: &Forest) -> Vec<CRat> {
    loop {
        let x: Vec<CRat> = (0..forest.dim()).map(|_| CRat::real(random_rational(rng, 50, 50))).collect();
        if forest.is_regular(&x) {
            return x;
        }
    }
}

/// Random exact momenta with small entries.
pub fn random_momentum(rng: &mut impl Rng, n: usize) -> Vec<CRat> {
    (0..n).map(|_| CRat::real(random_rational(rng, 9, 5))).collect()
}

/// A regular floating point with coordinates in `[lo, hi]`, kept at least
/// `gap` away from every singular value.
pub fn random_float_point(rng: &mut impl Rng, forest: &Forest, lo: f64, hi: f64, gap: f64) -> Vec<f64> {
    let mut bad: Vec<Vec<f64>> = vec![Vec::new(); forest.dim()];
    for v in 0..forest.block_count() {
        let roots: Vec<f64> =
            forest.factored(v).roots.iter().filter(|(r, _)| r.is_real()).map(|(r, _)| r.to_c64().re).collect();
        for i in forest.range(v) {
            bad[i].extend(&roots);
        }
        for &c in forest.children(v) {
            let l = forest.label(c).expect("child has a label").to_c64().re;
            for i in forest.range(v) {
                bad[i].push(l);
            }
        }
    }
    'outer: loop {
        let x: Vec<f64> = (0..forest.dim()).map(|_| rng.gen_range(lo..hi)).collect();
        for i in 0..x.len() {
            if bad[i].iter().any(|b| (x[i] - b).abs() < gap) {
                continue 'outer;
            }
            let v = forest.block_of(i);
            if forest.range(v).any(|j| j != i && (x[i] - x[j]).abs() < gap) {
                continue 'outer;
            }
        }
        return x;
    }
}
