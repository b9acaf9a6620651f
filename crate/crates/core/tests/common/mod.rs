#![allow(dead_code, clippy::needless_range_loop)]

use num_complex::Complex64;
use rand::Rng;
use sepvar::forest::{Forest, ForestSpec};
use sepvar::geometry::sinjukov_components;
use sepvar::jets::Jet2;
use sepvar::linalg;
use sepvar::metric::DiagonalMetric;
use sepvar::random::{random_spec, rng, GenOptions};
use sepvar::scalar::{CRat, Field, Scalar};

pub const SPHERE: &str = r#"{"blocks":[{"id":1,"dim":2,"poly":{"leading":"-4","roots":[["1",1],["2",1],["3",1]]}}]}"#;

pub const ELLIPSOIDAL: &str =
    r#"{"blocks":[{"id":1,"dim":3,"poly":{"leading":"-4","roots":[["-1",1],["1",1],["4",1]]}}]}"#;

pub const CHAIN5: &str = r#"{"blocks":[
    {"id":1,"dim":3,"poly":{"leading":"1","roots":[["0",1],["1",2]]}},
    {"id":2,"dim":2,"poly":{"leading":"2","roots":[["5",1],["6",1]]},"parent":1,"label":"1"}]}"#;

pub const FLAT_REPEATED: &str = r#"{"blocks":[{"id":1,"dim":3,"poly":{"leading":"1","roots":[["0",2],["2",1]]}}]}"#;

pub const FLAT_CHILD_CHAIN: &str = r#"{"blocks":[
    {"id":1,"dim":2,"poly":{"leading":"-4","roots":[["0",2],["3",1]]}},
    {"id":2,"dim":2,"poly":{"leading":"1","roots":[["-2",1]]},"parent":1,"label":"0"}]}"#;

pub const CURVED_CHILD_CHAIN: &str = r#"{"blocks":[
    {"id":1,"dim":2,"poly":{"leading":"-4","roots":[["1",1],["2",1],["3",1]]}},
    {"id":2,"dim":1,"poly":{"leading":"-8","roots":[["5",1],["6",1]]},"parent":1,"label":"1"}]}"#;

pub const TWO_COMPONENTS: &str = r#"{"blocks":[
    {"id":1,"dim":2,"poly":{"leading":"1","roots":[["1",1],["2",1]]}},
    {"id":2,"dim":1,"poly":{"leading":"2","roots":[["3",1]]}}]}"#;

/// One fixture per chart shape, with a name.
pub const SHAPES: [(&str, &str); 5] = [
    ("single flat block with repeated root", FLAT_REPEATED),
    ("single curved block", SPHERE),
    ("flat-child chain", FLAT_CHILD_CHAIN),
    ("curved-child chain", CURVED_CHILD_CHAIN),
    ("two-component forest", TWO_COMPONENTS),
];

pub fn spec(json: &str) -> ForestSpec {
    ForestSpec::from_json(json).expect("fixture parses")
}

pub fn forest(json: &str) -> Forest {
    Forest::new(&spec(json)).expect("fixture is valid")
}

pub fn generated(seed: u64, count: usize, opts: &GenOptions) -> Vec<ForestSpec> {
    let mut r = rng(seed);
    (0..count).map(|_| random_spec(&mut r, opts)).collect()
}

pub fn to_float(x: &[CRat]) -> Vec<Complex64> {
    x.iter().map(Scalar::to_c64).collect()
}

pub fn c64(x: &[f64]) -> Vec<Complex64> {
    x.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

/// Affine-invariant description of every block that move D cannot touch:
/// its dimension and the root multiset up to `t ↦ a t + c`, minimised over
/// the choice of the two roots sent to 0 and 1.
pub fn affine_shapes(s: &ForestSpec) -> Vec<String> {
    let f = Forest::new(s).expect("valid spec");
    let mut out = Vec::new();
    for v in 0..f.block_count() {
        if f.block_dim(v) == 1 && f.children(v).is_empty() {
            continue;
        }
        let roots = &f.factored(v).roots;
        let mut best: Option<String> = None;
        for (a, _) in roots {
            for (b, _) in roots {
                if a == b {
                    continue;
                }
                let d = (b.clone() - a.clone()).recip().expect("distinct roots");
                let mut m: Vec<String> =
                    roots.iter().map(|(r, k)| format!("{}^{k}", (r.clone() - a.clone()) * d.clone())).collect();
                m.sort();
                let s = m.join(",");
                if best.as_ref().is_none_or(|x| s < *x) {
                    best = Some(s);
                }
            }
        }
        let tail = best.unwrap_or_else(|| roots.iter().map(|(_, k)| k.to_string()).collect::<Vec<_>>().join(","));
        out.push(format!("{}|{tail}", f.block_dim(v)));
    }
    out.sort();
    out
}

/// Specs obtained by shifting one root that is not a child label, kept only
/// when the affine shapes certify that no move sequence relates them.
pub fn certified_negatives(seed: u64, count: usize) -> Vec<(ForestSpec, ForestSpec)> {
    let mut r = rng(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let spec = random_spec(&mut r, &GenOptions::default());
        let f = Forest::new(&spec).expect("generated spec is valid");
        let v = r.gen_range(0..f.block_count());
        if f.block_dim(v) == 1 && f.children(v).is_empty() {
            continue;
        }
        let labels: Vec<CRat> = f.children(v).iter().map(|&c| f.label(c).expect("child label").clone()).collect();
        let roots = f.factored(v).roots.clone();
        let free: Vec<usize> = (0..roots.len()).filter(|&i| !labels.contains(&roots[i].0)).collect();
        if free.is_empty() {
            continue;
        }
        let i = free[r.gen_range(0..free.len())];
        let shifted = roots[i].0.clone() + CRat::int(1);
        if roots.iter().any(|(x, _)| *x == shifted) {
            continue;
        }
        let mut other = spec.clone();
        other.blocks[v].poly.roots[i].0 = shifted;
        let p = other.blocks[v].poly.expand();
        for &c in f.children(v) {
            if f.is_curved_block(c) {
                other.blocks[c].poly.leading = p.derivative().eval(f.label(c).expect("child label")).re;
            }
        }
        if Forest::new(&other).is_err() || affine_shapes(&spec) == affine_shapes(&other) {
            continue;
        }
        out.push((spec, other));
    }
    out
}

/// Christoffel symbols `Γ^i_{jk}` and `R^i_{jkl}` from central differences of
/// the covariant metric, evaluated exactly at rational offsets so that only
/// the truncation error of the stencil remains.
pub struct FiniteDifference {
    pub gamma: Vec<f64>,
    pub riemann: Vec<f64>,
}

pub fn finite_difference<M: DiagonalMetric>(m: &M, x: &[CRat], h: &CRat) -> FiniteDifference {
    let n = x.len();
    let g = |y: &[CRat]| -> Vec<CRat> { m.covariant(y).expect("regular point") };
    let shifted = |steps: &[(usize, i64)]| -> Vec<CRat> {
        let mut y = x.to_vec();
        for &(i, s) in steps {
            y[i] = y[i].clone() + h.clone() * CRat::int(s);
        }
        g(&y)
    };
    let g0 = g(x);
    let two_h = h.clone() * CRat::int(2);
    let four_h2 = h.clone() * h.clone() * CRat::int(4);
    // dg[a][k] = ∂_k g_aa, ddg[a][k][l] = ∂_k ∂_l g_aa
    let mut dg = vec![vec![CRat::int(0); n]; n];
    let mut ddg = vec![vec![vec![CRat::int(0); n]; n]; n];
    for k in 0..n {
        let (p, q) = (shifted(&[(k, 1)]), shifted(&[(k, -1)]));
        for a in 0..n {
            dg[a][k] = (p[a].clone() - q[a].clone()) * two_h.recip().expect("h ≠ 0");
        }
        for l in 0..n {
            let pp = shifted(&[(k, 1), (l, 1)]);
            let pm = shifted(&[(k, 1), (l, -1)]);
            let mp = shifted(&[(k, -1), (l, 1)]);
            let mm = shifted(&[(k, -1), (l, -1)]);
            for a in 0..n {
                ddg[a][k][l] =
                    (pp[a].clone() - pm[a].clone() - mp[a].clone() + mm[a].clone()) * four_h2.recip().expect("h ≠ 0");
            }
        }
    }
    let f = |v: &CRat| v.to_c64().re;
    let g0f: Vec<f64> = g0.iter().map(f).collect();
    let dgf: Vec<Vec<f64>> = dg.iter().map(|r| r.iter().map(f).collect()).collect();
    let ddgf: Vec<Vec<Vec<f64>>> = ddg.iter().map(|r| r.iter().map(|c| c.iter().map(f).collect()).collect()).collect();
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    // Γ^i_{jk} = ½ g^{ii} (∂_k g_ij + ∂_j g_ik − ∂_i g_jk) for a diagonal metric
    let gam =
        |i: usize, j: usize, k: usize| 0.5 / g0f[i] * (d(i, j) * dgf[i][k] + d(i, k) * dgf[i][j] - d(j, k) * dgf[j][i]);
    let dgam = |l: usize, i: usize, j: usize, k: usize| {
        let t = d(i, j) * dgf[i][k] + d(i, k) * dgf[i][j] - d(j, k) * dgf[j][i];
        let dt = d(i, j) * ddgf[i][k][l] + d(i, k) * ddgf[i][j][l] - d(j, k) * ddgf[j][i][l];
        0.5 * (dt / g0f[i] - t * dgf[i][l] / (g0f[i] * g0f[i]))
    };
    let mut gamma = Vec::with_capacity(n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                gamma.push(gam(i, j, k));
            }
        }
    }
    let mut riemann = Vec::with_capacity(n.pow(4));
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut r = dgam(k, i, l, j) - dgam(l, i, k, j);
                    for m in 0..n {
                        r += gam(i, k, m) * gam(m, l, j) - gam(i, l, m) * gam(m, k, j);
                    }
                    riemann.push(r);
                }
            }
        }
    }
    FiniteDifference { gamma, riemann }
}

/// Dimension of the space of diagonal tensors `L = diag(a_i + b_i x^i)`
/// satisfying the Sinjukov equation at every point of `points`.
pub fn compatible_nullity(f: &Forest, points: &[Vec<CRat>]) -> usize {
    let n = f.dim();
    let mut columns: Vec<Vec<CRat>> = Vec::new();
    for unknown in 0..2 * n {
        let mut col = Vec::new();
        for x in points {
            let comps = sinjukov_components(f, x, |s: &[Jet2<CRat>]| {
                Ok((0..n)
                    .map(|i| {
                        if unknown == i {
                            Jet2::int(1)
                        } else if unknown == n + i {
                            s[i].clone()
                        } else {
                            Jet2::int(0)
                        }
                    })
                    .collect())
            })
            .expect("regular point");
            col.extend(comps);
        }
        columns.push(col);
    }
    let rows = columns[0].len();
    let m: Vec<Vec<CRat>> = (0..rows).map(|r| columns.iter().map(|c| c[r].clone()).collect()).collect();
    2 * n - linalg::rank(&m)
}

/// Applies 1–5 random moves and asks for a witness back; returns the number
/// of specs whose witness reproduces the moved data.
pub fn round_trips(seed: u64, count: usize) -> usize {
    use sepvar::equivalence::{apply_move, apply_moves, equivalent, random_move, same_data};
    let mut r = rng(seed);
    let mut ok = 0;
    for _ in 0..count {
        let s = random_spec(&mut r, &GenOptions::default());
        let mut moved = s.clone();
        for _ in 0..r.gen_range(1..=5) {
            let mv = random_move(&mut r, &moved);
            moved = apply_move(&moved, &mv).expect("random moves are valid");
        }
        if let Ok(Some(w)) = equivalent(&s, &moved) {
            if apply_moves(&s, &w).is_ok_and(|t| same_data(&t, &moved)) {
                ok += 1;
            }
        }
    }
    ok
}

/// Largest relative change of `H` and of every extracted integral along an
/// RK4 trajectory of `steps` steps of size `h`.
pub fn max_drift(f: &Forest, x: &[f64], p: &[f64], h: f64, steps: usize) -> f64 {
    use sepvar::geometry::{geodesic_rk4, hamiltonian, PhasePoint};
    use sepvar::killing_stackel::{extracted_integrals, IntegralOrder};
    let order = IntegralOrder::descending(f);
    let values = |x: &[Complex64], p: &[Complex64]| -> Vec<Complex64> {
        let mut v = vec![hamiltonian(f, x, p).expect("regular point")];
        v.extend(extracted_integrals(f, x, &order).expect("regular point").iter().map(|q| q.eval(p)));
        v
    };
    let start = PhasePoint { x: c64(x), p: c64(p) };
    let v0 = values(&start.x, &start.p);
    let traj = geodesic_rk4(f, start, Complex64::new(h, 0.0), steps).expect("trajectory stays regular");
    let mut worst: f64 = 0.0;
    for s in &traj {
        for (a, b) in values(&s.x, &s.p).iter().zip(&v0) {
            worst = worst.max((a - b).norm() / b.norm().max(1e-300));
        }
    }
    worst
}
