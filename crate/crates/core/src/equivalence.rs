//! Moves between forest data that describe the same separating coordinates,
//! a decision procedure for "related by moves", and a canonical representative.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forest::{BlockSpec, Forest, ForestSpec, Sample, SpecError};
use crate::poly::FactoredPoly;
use crate::random::random_rational;
use crate::scalar::{rational_str, CRat};

/// A move on forest data. Block ids are 1-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "move", rename_all = "snake_case")]
pub enum Move {
    /// Renumber the coordinates inside a block; the data is unchanged.
    A { block: usize, permutation: Vec<usize> },
    /// `x_new = a·x_old + c` on one block, compensated on its polynomial,
    /// the labels of its children and the polynomials below it.
    B {
        block: usize,
        #[serde(with = "rational_str")]
        a: BigRational,
        #[serde(with = "rational_str")]
        c: BigRational,
    },
    /// Rename vertices: old id `i` becomes `mapping[i - 1]`.
    C { mapping: Vec<usize> },
    /// Replace the polynomial of a one-dimensional leaf. `sample` is the
    /// reference point for the new coordinate.
    D {
        block: usize,
        poly: FactoredPoly,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sample: Option<Vec<Sample>>,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MoveError {
    #[error("block {0} does not exist")]
    NoBlock(usize),
    #[error("scaling factor must be non-zero")]
    ZeroScale,
    #[error("not a permutation: {0:?}")]
    NotPermutation(Vec<usize>),
    #[error("block {0} is not a one-dimensional leaf")]
    NotLeaf(usize),
    #[error("block {0}: the new polynomial changes sign at the sample point")]
    SignChange(usize),
    #[error("block {0}: polynomial is not real and non-zero at the sample point")]
    SampleValue(usize),
    #[error("result is not a valid forest: {0}")]
    Invalid(#[from] SpecError),
}

fn is_permutation(p: &[usize]) -> bool {
    let mut seen = vec![false; p.len()];
    p.iter().all(|&i| i >= 1 && i <= p.len() && !std::mem::replace(&mut seen[i - 1], true))
}

fn affine(a: &BigRational, c: &BigRational, z: &CRat) -> CRat {
    CRat::new(a * &z.re + c, a * &z.im)
}

fn pow_signed(a: &BigRational, e: i64) -> BigRational {
    if e >= 0 {
        num_traits::pow(a.clone(), e as usize)
    } else {
        num_traits::pow(a.recip(), (-e) as usize)
    }
}

fn sample_sign(poly: &FactoredPoly, x: &BigRational, block: usize) -> Result<bool, MoveError> {
    let v = poly.expand().eval(&CRat::real(x.clone()));
    if !v.im.is_zero() || v.re.is_zero() {
        return Err(MoveError::SampleValue(block));
    }
    Ok(v.re.is_positive())
}

pub fn apply_move(spec: &ForestSpec, mv: &Move) -> Result<ForestSpec, MoveError> {
    let forest = Forest::new(spec)?;
    let mut blocks: Vec<BlockSpec> = forest.spec().blocks;
    let count = blocks.len();
    let check = |b: usize| if b >= 1 && b <= count { Ok(b - 1) } else { Err(MoveError::NoBlock(b)) };
    match mv {
        Move::A { block, permutation } => {
            let v = check(*block)?;
            if permutation.len() != blocks[v].dim || !is_permutation(permutation) {
                return Err(MoveError::NotPermutation(permutation.clone()));
            }
            if let Some(s) = &blocks[v].sample {
                blocks[v].sample = Some(permutation.iter().map(|&i| s[i - 1].clone()).collect());
            }
        }
        Move::B { block, a, c } => {
            let v = check(*block)?;
            if a.is_zero() {
                return Err(MoveError::ZeroScale);
            }
            let n = blocks[v].dim as i64;
            let p = &blocks[v].poly;
            let e = n + 1 - p.degree() as i64;
            let roots = p.roots.iter().map(|(r, k)| (affine(a, c, r), *k)).collect();
            blocks[v].poly =
                FactoredPoly::new(&p.leading * pow_signed(a, e), roots).expect("affine map keeps roots distinct");
            if let Some(s) = &blocks[v].sample {
                blocks[v].sample = Some(s.iter().map(|x| Sample(a * &x.0 + c)).collect());
            }
            for &ch in forest.children(v) {
                blocks[ch].label = blocks[ch].label.as_ref().map(|l| affine(a, c, l));
            }
            let scale = pow_signed(a, n);
            for d in forest.descendants(v) {
                blocks[d].poly.leading = &blocks[d].poly.leading * &scale;
            }
        }
        Move::C { mapping } => {
            if mapping.len() != count || !is_permutation(mapping) {
                return Err(MoveError::NotPermutation(mapping.clone()));
            }
            for b in &mut blocks {
                b.id = mapping[b.id - 1];
                b.parent = b.parent.map(|p| mapping[p - 1]);
            }
            blocks.sort_by_key(|b| b.id);
        }
        Move::D { block, poly, sample } => {
            let v = check(*block)?;
            if blocks[v].dim != 1 || !forest.children(v).is_empty() {
                return Err(MoveError::NotLeaf(*block));
            }
            let new_sample = sample.clone().or_else(|| blocks[v].sample.clone());
            if let (Some(old), Some(new)) = (&blocks[v].sample, &new_sample) {
                if sample_sign(&blocks[v].poly, &old[0].0, *block)? != sample_sign(poly, &new[0].0, *block)? {
                    return Err(MoveError::SignChange(*block));
                }
            }
            blocks[v].poly = poly.clone();
            blocks[v].sample = new_sample;
        }
    }
    let out = ForestSpec { blocks };
    Forest::new(&out)?;
    Ok(out)
}

pub fn apply_moves(spec: &ForestSpec, moves: &[Move]) -> Result<ForestSpec, MoveError> {
    moves.iter().try_fold(spec.clone(), |s, m| apply_move(&s, m))
}

/// Equality of forest data with roots in normal order, ignoring samples.
pub fn same_data(a: &ForestSpec, b: &ForestSpec) -> bool {
    let norm = |s: &ForestSpec| {
        let mut blocks: Vec<BlockSpec> =
            s.blocks.iter().map(|bl| BlockSpec { poly: bl.poly.normalized(), sample: None, ..bl.clone() }).collect();
        blocks.sort_by_key(|bl| bl.id);
        blocks
    };
    norm(a) == norm(b)
}

fn real_ratio(a: &CRat, b: &CRat) -> Option<BigRational> {
    let q = a.clone() * b.recip()?;
    q.im.is_zero().then_some(q.re)
}

/// How block `u` is carried onto its partner.
#[derive(Clone, Debug)]
enum Choice {
    /// Scale and shift pinned by two roots.
    Affine(BigRational, BigRational),
    /// One root `from ↦ to`; the scale is left to the leading coefficients.
    Free { from: CRat, to: CRat },
    /// No roots; only the scale matters.
    Bare,
    /// Replace the polynomial of a one-dimensional leaf.
    Replace,
}

impl Choice {
    fn map_label(&self, l: &CRat) -> Option<CRat> {
        match self {
            Choice::Affine(a, c) => Some(affine(a, c, l)),
            Choice::Free { from, to } => (from == l).then(|| to.clone()),
            Choice::Bare | Choice::Replace => None,
        }
    }
}

fn sorted_roots(p: &FactoredPoly) -> Vec<(CRat, u32)> {
    let mut r = p.roots.clone();
    r.sort();
    r
}

fn vertex_choices(f1: &Forest, u: usize, f2: &Forest, w: usize) -> Vec<Choice> {
    if f1.block_dim(u) != f2.block_dim(w) || f1.children(u).len() != f2.children(w).len() {
        return Vec::new();
    }
    let p1 = f1.factored(u);
    let p2 = f2.factored(w);
    let mut out = Vec::new();
    if p1.roots.len() >= 2 && p1.roots.len() == p2.roots.len() {
        let (a1, k1) = &p1.roots[0];
        let (a2, k2) = &p1.roots[1];
        let target = sorted_roots(p2);
        let mut seen = BTreeSet::new();
        for (b1, l1) in &p2.roots {
            for (b2, l2) in &p2.roots {
                if b1 == b2 || l1 != k1 || l2 != k2 {
                    continue;
                }
                let Some(a) = real_ratio(&(b1.clone() - b2.clone()), &(a1.clone() - a2.clone())) else { continue };
                let c = b1.clone() - CRat::real(a.clone()) * a1.clone();
                if !c.im.is_zero() || !seen.insert((a.clone(), c.re.clone())) {
                    continue;
                }
                let mut mapped: Vec<(CRat, u32)> = p1.roots.iter().map(|(r, k)| (affine(&a, &c.re, r), *k)).collect();
                mapped.sort();
                if mapped == target {
                    out.push(Choice::Affine(a, c.re));
                }
            }
        }
    } else if p1.roots.len() == 1 && p2.roots.len() == 1 && p1.roots[0].1 == p2.roots[0].1 {
        let to = &p2.roots[0].0;
        let from = &p1.roots[0].0;
        if from.im.is_zero() && to.im.is_zero() {
            out.push(Choice::Free { from: from.clone(), to: to.clone() });
        } else if !from.im.is_zero() && !to.im.is_zero() {
            let a = &to.im / &from.im;
            let c = &to.re - &a * &from.re;
            out.push(Choice::Affine(a, c));
        }
    } else if p1.roots.is_empty() && p2.roots.is_empty() {
        out.push(Choice::Bare);
    }
    if f1.block_dim(u) == 1 && f1.children(u).is_empty() {
        out.push(Choice::Replace);
    }
    out
}

/// Factor a positive integer into `(atom, exponent)` pairs by trial
/// division; a leftover cofactor is kept as its own atom.
fn factor(n: &BigInt, out: &mut Vec<(BigInt, i64)>, sign: i64) {
    let mut n = n.abs();
    let add = |p: BigInt, e: i64, out: &mut Vec<(BigInt, i64)>| match out.iter_mut().find(|(q, _)| *q == p) {
        Some(slot) => slot.1 += e,
        None => out.push((p, e)),
    };
    let mut d = BigInt::from(2);
    while &d * &d <= n && d < BigInt::from(100_000) {
        let mut e = 0;
        while (&n % &d).is_zero() {
            n /= &d;
            e += 1;
        }
        if e > 0 {
            add(d.clone(), sign * e, out);
        }
        d += 1;
    }
    if !n.is_one() {
        add(n, sign, out);
    }
}

/// Solve `∏_u A_u^{E[w][u]} = r_w` over the non-zero rationals, searching
/// exponents in a bounded box.
fn solve_scales(exps: &[Vec<i64>], rhs: &[BigRational]) -> Option<Vec<BigRational>> {
    let unknowns = exps.first().map_or(0, Vec::len);
    let mut atoms: Vec<(BigInt, i64)> = Vec::new();
    for r in rhs {
        factor(r.numer(), &mut atoms, 1);
        factor(r.denom(), &mut atoms, -1);
    }
    let atoms: Vec<BigInt> = atoms.into_iter().map(|(p, _)| p).collect();
    let valuation = |r: &BigRational, p: &BigInt| -> i64 {
        let count = |n: &BigInt| {
            let mut n = n.abs();
            let mut e = 0;
            while !n.is_zero() && (&n % p).is_zero() {
                n /= p;
                e += 1;
            }
            e
        };
        count(r.numer()) - count(r.denom())
    };
    let search = |target: &[i64], range: i64, modulus: Option<i64>| -> Option<Vec<i64>> {
        let width = (2 * range + 1) as usize;
        let total = width.checked_pow(unknowns as u32)?;
        for idx in 0..total {
            let mut x = Vec::with_capacity(unknowns);
            let mut k = idx;
            for _ in 0..unknowns {
                x.push((k % width) as i64 - range);
                k /= width;
            }
            let ok = exps.iter().zip(target).all(|(row, t)| {
                let s: i64 = row.iter().zip(&x).map(|(e, v)| e * v).sum();
                match modulus {
                    Some(m) => (s - t).rem_euclid(m) == 0,
                    None => s == *t,
                }
            });
            if ok {
                return Some(x);
            }
        }
        None
    };
    let mut scales = vec![BigRational::one(); unknowns];
    let signs: Vec<i64> = rhs.iter().map(|r| i64::from(r.is_negative())).collect();
    let s = search(&signs, 1, Some(2))?;
    for (i, v) in s.iter().enumerate() {
        if *v % 2 != 0 {
            scales[i] = -scales[i].clone();
        }
    }
    for p in &atoms {
        let target: Vec<i64> = rhs.iter().map(|r| valuation(r, p)).collect();
        if target.iter().all(|&t| t == 0) {
            continue;
        }
        let x = search(&target, 12, None)?;
        for (i, v) in x.iter().enumerate() {
            let f = pow_signed(&BigRational::from_integer(p.clone()), *v);
            scales[i] = &scales[i] * f;
        }
    }
    Some(scales)
}

struct Search<'a> {
    f1: &'a Forest,
    f2: &'a Forest,
    s1: &'a ForestSpec,
    s2: &'a ForestSpec,
}

impl Search<'_> {
    fn run(
        &self,
        pending: &mut Vec<(usize, usize)>,
        map: &mut Vec<Option<usize>>,
        choice: &mut Vec<Option<Choice>>,
    ) -> Option<Vec<Move>> {
        let Some((u, w)) = pending.pop() else { return self.finish(map, choice) };
        for ch in vertex_choices(self.f1, u, self.f2, w) {
            map[u] = Some(w);
            choice[u] = Some(ch.clone());
            let kids1 = self.f1.children(u).to_vec();
            let kids2 = self.f2.children(w).to_vec();
            let mut pairs = Vec::new();
            if let Some(found) =
                self.pair_children(&ch, &kids1, &kids2, &mut vec![false; kids2.len()], &mut pairs, pending, map, choice)
            {
                return Some(found);
            }
        }
        map[u] = None;
        choice[u] = None;
        pending.push((u, w));
        None
    }

    #[allow(clippy::too_many_arguments)]
    fn pair_children(
        &self,
        ch: &Choice,
        kids1: &[usize],
        kids2: &[usize],
        used: &mut Vec<bool>,
        pairs: &mut Vec<(usize, usize)>,
        pending: &mut Vec<(usize, usize)>,
        map: &mut Vec<Option<usize>>,
        choice: &mut Vec<Option<Choice>>,
    ) -> Option<Vec<Move>> {
        let Some((&first, rest)) = kids1.split_first() else {
            let base = pending.len();
            pending.extend(pairs.iter().copied());
            let found = self.run(pending, map, choice);
            pending.truncate(base);
            return found;
        };
        let label = ch.map_label(self.f1.label(first).expect("child has a label"))?;
        for j in 0..kids2.len() {
            if used[j] || self.f2.label(kids2[j]) != Some(&label) {
                continue;
            }
            used[j] = true;
            pairs.push((first, kids2[j]));
            if let Some(found) = self.pair_children(ch, rest, kids2, used, pairs, pending, map, choice) {
                return Some(found);
            }
            pairs.pop();
            used[j] = false;
        }
        None
    }

    fn finish(&self, map: &[Option<usize>], choice: &[Option<Choice>]) -> Option<Vec<Move>> {
        let count = self.f1.block_count();
        let choice: Vec<&Choice> = choice.iter().map(|c| c.as_ref().expect("every vertex matched")).collect();
        let free: Vec<usize> =
            (0..count).filter(|&v| matches!(choice[v], Choice::Free { .. } | Choice::Bare)).collect();
        let known = |v: usize| match choice[v] {
            Choice::Affine(a, _) => Some(a.clone()),
            _ => None,
        };
        let mut exps = Vec::new();
        let mut rhs = Vec::new();
        for w in 0..count {
            if matches!(choice[w], Choice::Replace) {
                continue;
            }
            let e = self.f1.block_dim(w) as i64 + 1 - self.f1.factored(w).degree() as i64;
            let mut r = &self.f2.factored(map[w].expect("matched")).leading / &self.f1.factored(w).leading;
            let mut row = vec![0i64; free.len()];
            let mut contribute = |v: usize, k: i64, r: &mut BigRational| match known(v) {
                Some(a) => *r = &*r / pow_signed(&a, k),
                None => {
                    if let Some(i) = free.iter().position(|&x| x == v) {
                        row[i] += k;
                    }
                }
            };
            contribute(w, e, &mut r);
            for a in self.f1.path_to_root(w).into_iter().filter(|&a| a != w) {
                contribute(a, self.f1.block_dim(a) as i64, &mut r);
            }
            exps.push(row);
            rhs.push(r);
        }
        let scales = solve_scales(&exps, &rhs)?;
        let mut moves = Vec::new();
        for v in 0..count {
            let (a, c) = match choice[v] {
                Choice::Affine(a, c) => (a.clone(), c.clone()),
                Choice::Free { from, to } => {
                    let a = scales[free.iter().position(|&x| x == v).expect("free")].clone();
                    let c = to.clone() - CRat::real(a.clone()) * from.clone();
                    if !c.im.is_zero() {
                        return None;
                    }
                    (a, c.re)
                }
                Choice::Bare => (scales[free.iter().position(|&x| x == v).expect("free")].clone(), BigRational::zero()),
                Choice::Replace => continue,
            };
            if !(a.is_one() && c.is_zero()) {
                moves.push(Move::B { block: v + 1, a, c });
            }
        }
        let mid = apply_moves(self.s1, &moves).ok()?;
        for v in 0..count {
            if matches!(choice[v], Choice::Replace) {
                let w = map[v].expect("matched");
                if mid.blocks[v].poly.normalized() != self.f2.factored(w).normalized() {
                    moves.push(Move::D {
                        block: v + 1,
                        poly: self.f2.factored(w).clone(),
                        sample: self.f2.block(w).sample.clone(),
                    });
                }
            }
        }
        let mapping: Vec<usize> = map.iter().map(|t| t.expect("matched") + 1).collect();
        if mapping.iter().enumerate().any(|(i, &t)| t != i + 1) {
            moves.push(Move::C { mapping });
        }
        match apply_moves(self.s1, &moves) {
            Ok(end) if same_data(&end, self.s2) => Some(moves),
            _ => None,
        }
    }
}

fn root_pairings(r1: &[usize], r2: &[usize]) -> Vec<Vec<(usize, usize)>> {
    if r1.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for j in 0..r2.len() {
        let mut rest2 = r2.to_vec();
        let w = rest2.remove(j);
        for mut tail in root_pairings(&r1[1..], &rest2) {
            tail.push((r1[0], w));
            out.push(tail);
        }
    }
    out
}

/// A witness sequence of moves taking the first forest to the second, or
/// `None` when no sequence of moves relates them.
pub fn equivalent(s1: &ForestSpec, s2: &ForestSpec) -> Result<Option<Vec<Move>>, SpecError> {
    let f1 = Forest::new(s1)?;
    let f2 = Forest::new(s2)?;
    if f1.block_count() != f2.block_count() || f1.dim() != f2.dim() || f1.roots().len() != f2.roots().len() {
        return Ok(None);
    }
    let (a, b) = (f1.spec(), f2.spec());
    let search = Search { f1: &f1, f2: &f2, s1: &a, s2: &b };
    for mut pending in root_pairings(&f1.roots(), &f2.roots()) {
        let mut map = vec![None; f1.block_count()];
        let mut choice = vec![None; f1.block_count()];
        if let Some(moves) = search.run(&mut pending, &mut map, &mut choice) {
            return Ok(Some(moves));
        }
    }
    Ok(None)
}

/// Scales `a` with `r·a^e` an integer free of `e`-th powers, positive when
/// `e` is odd.
fn power_free_scales(r: &BigRational, e: u32) -> Vec<BigRational> {
    if e == 0 {
        return vec![BigRational::one(), -BigRational::one()];
    }
    let q = r.denom().clone();
    let n = r.numer() * num_traits::pow(q.clone(), e as usize - 1);
    let mut atoms = Vec::new();
    factor(&n, &mut atoms, 1);
    let mut a = BigRational::from_integer(q);
    for (p, k) in atoms {
        a *= pow_signed(&BigRational::from_integer(p), -(k / e as i64));
    }
    if e % 2 == 1 {
        if r.is_negative() {
            a = -a;
        }
        vec![a]
    } else {
        vec![a.clone(), -a]
    }
}

/// Normalizing maps for block `u`: two roots sent to `0` and `1`; otherwise
/// a lone root sent to `0` (or `i`) and the leading coefficient reduced
/// modulo powers of the scale.
fn normalizing_maps(f: &Forest, u: usize) -> Vec<(BigRational, BigRational)> {
    let p = f.factored(u);
    let e = f.block_dim(u) as i64 + 1 - p.degree() as i64;
    let mut out = Vec::new();
    for (r1, _) in &p.roots {
        for (r2, _) in &p.roots {
            if r1 == r2 {
                continue;
            }
            let Some(a) = real_ratio(&CRat::int(1), &(r2.clone() - r1.clone())) else { continue };
            let c = -(CRat::real(a.clone()) * r1.clone());
            if c.im.is_zero() {
                out.push((a, c.re));
            }
        }
    }
    if out.is_empty() {
        match p.roots.first() {
            Some((r, _)) if !r.im.is_zero() => {
                let a = r.im.recip();
                out.push((a.clone(), -(&a * &r.re)));
            }
            first => {
                for a in power_free_scales(&p.leading, e as u32) {
                    let c = first.map_or_else(BigRational::zero, |(r, _)| -(&a * &r.re));
                    out.push((a, c));
                }
            }
        }
    }
    out
}

fn encode(f: &Forest, v: usize) -> String {
    let mut kids: Vec<String> = f.children(v).iter().map(|&c| encode(f, c)).collect();
    kids.sort();
    let label = f.label(v).map(ToString::to_string).unwrap_or_default();
    format!("({};{};{};[{}])", f.block_dim(v), f.factored(v).normalized(), label, kids.join(","))
}

/// Normalize the subtree of `u`, returning the best spec and its encoding.
fn canon_subtree(spec: &ForestSpec, u: usize, moves: &mut Vec<Move>) -> (ForestSpec, String) {
    let f = Forest::new(spec).expect("valid during canonicalization");
    let mut best: Option<(String, ForestSpec, Vec<Move>)> = None;
    for (a, c) in normalizing_maps(&f, u) {
        let mv = Move::B { block: u + 1, a, c };
        let Ok(mut cur) = apply_move(spec, &mv) else { continue };
        let mut local = vec![mv];
        let kids = f.children(u).to_vec();
        for k in kids {
            let (next, _) = canon_subtree(&cur, k, &mut local);
            cur = next;
        }
        let code = encode(&Forest::new(&cur).expect("moves keep validity"), u);
        if best.as_ref().is_none_or(|(b, _, _)| code < *b) {
            best = Some((code, cur, local));
        }
    }
    let (code, out, local) = best.expect("the identity-like map always applies");
    moves.extend(local);
    (out, code)
}

/// A canonical representative up to moves B and C, with the moves that
/// produce it. Moves D are not used, so one-dimensional leaves are only
/// normalized affinely. A block whose scale is fixed neither by two roots
/// nor by its own leading coefficient is tried with scale `±1` only, so two
/// equivalent forests with such a block may still get different forms;
/// [`equivalent`] decides those cases.
pub fn canon(spec: &ForestSpec) -> Result<(ForestSpec, Vec<Move>), SpecError> {
    let f = Forest::new(spec)?;
    let mut cur = f.spec();
    let mut moves = Vec::new();
    let mut codes = Vec::new();
    for r in f.roots() {
        let (next, code) = canon_subtree(&cur, r, &mut moves);
        cur = next;
        codes.push((code, r));
    }
    // Number vertices by walking the sorted subtrees depth first.
    let nf = Forest::new(&cur)?;
    codes.sort();
    let mut order = Vec::new();
    fn walk(f: &Forest, v: usize, order: &mut Vec<usize>) {
        order.push(v);
        let mut kids: Vec<(String, usize)> = f.children(v).iter().map(|&c| (encode(f, c), c)).collect();
        kids.sort();
        for (_, c) in kids {
            walk(f, c, order);
        }
    }
    for (_, r) in &codes {
        walk(&nf, *r, &mut order);
    }
    let mut mapping = vec![0; order.len()];
    for (new, &old) in order.iter().enumerate() {
        mapping[old] = new + 1;
    }
    let mv = Move::C { mapping };
    let out = apply_move(&cur, &mv).map_err(|e| match e {
        MoveError::Invalid(s) => s,
        other => unreachable!("renaming a valid forest: {other}"),
    })?;
    moves.push(mv);
    let out =
        ForestSpec { blocks: out.blocks.into_iter().map(|b| BlockSpec { poly: b.poly.normalized(), ..b }).collect() };
    Ok((out, moves))
}

/// Affine shape of each block's roots: invariant under moves B of that block.
pub fn root_shapes(spec: &ForestSpec) -> Result<BTreeSet<String>, SpecError> {
    let f = Forest::new(spec)?;
    let mut out = BTreeSet::new();
    for v in 0..f.block_count() {
        let mut best: Option<String> = None;
        for (a, c) in normalizing_maps(&f, v) {
            let mut roots: Vec<(CRat, u32)> =
                f.factored(v).roots.iter().map(|(r, k)| (affine(&a, &c, r), *k)).collect();
            roots.sort();
            let s = format!("{}:{roots:?}", f.block_dim(v));
            if best.as_ref().is_none_or(|b| s < *b) {
                best = Some(s);
            }
        }
        out.insert(best.unwrap_or_default());
    }
    Ok(out)
}

/// A random valid move for `spec`: mostly affine changes, sometimes a
/// renaming or a new polynomial on a one-dimensional leaf.
pub fn random_move(rng: &mut impl Rng, spec: &ForestSpec) -> Move {
    let f = Forest::new(spec).expect("random moves start from a valid forest");
    let count = f.block_count();
    let leaves: Vec<usize> = (0..count).filter(|&v| f.block_dim(v) == 1 && f.children(v).is_empty()).collect();
    let roll = rng.gen_range(0..10);
    if roll < 2 && count > 1 {
        let mut mapping: Vec<usize> = (1..=count).collect();
        mapping.shuffle(rng);
        return Move::C { mapping };
    }
    if roll < 4 && !leaves.is_empty() {
        let v = *leaves.choose(rng).expect("non-empty");
        fn fresh(rng: &mut impl Rng) -> CRat {
            CRat::real(random_rational(rng, 6, 3))
        }
        let poly = match (f.next(v), f.label(v)) {
            (Some(p), Some(l)) if f.factored(p).multiplicity(l) == 1 => {
                let top = f.poly(p).derivative().eval(l);
                let r1 = fresh(rng);
                let mut r2 = fresh(rng);
                while r2 == r1 {
                    r2 = fresh(rng);
                }
                FactoredPoly::new(top.re, vec![(r1, 1), (r2, 1)])
            }
            _ => {
                let lead = random_rational(rng, 5, 3);
                let lead = if lead.is_zero() { BigRational::one() } else { lead };
                if rng.gen_bool(0.5) {
                    FactoredPoly::new(lead, vec![(fresh(rng), 1)])
                } else {
                    FactoredPoly::constant(lead)
                }
            }
        };
        return Move::D { block: v + 1, poly: poly.expect("fresh roots are distinct"), sample: None };
    }
    let mut a = random_rational(rng, 4, 3);
    while a.is_zero() {
        a = random_rational(rng, 4, 3);
    }
    Move::B { block: rng.gen_range(1..=count), a, c: random_rational(rng, 6, 2) }
}
