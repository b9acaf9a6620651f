//! Curvature, separability and Killing-type residuals of a diagonal metric,
//! and a Runge–Kutta integrator for its geodesic flow.
//!
//! Everything is computed from order-2 jets of the metric entries, so on the
//! exact tag a residual is zero exactly or not at all.

use crate::jets::Jet2;
use crate::metric::{DiagonalMetric, MetricError};
use crate::scalar::{Scalar, Transcendental};

/// Largest residual component seen, with its index tuple.
///
/// `scale` is the largest magnitude among the terms that were cancelled to
/// form any recorded component, or zero when no scale was given.
#[derive(Clone, Debug, PartialEq)]
pub struct Residual<S> {
    pub worst: S,
    pub magnitude: f64,
    pub index: Vec<usize>,
    pub scale: f64,
}

impl<S: Scalar> Default for Residual<S> {
    fn default() -> Self {
        Residual { worst: S::zero(), magnitude: 0.0, index: Vec::new(), scale: 0.0 }
    }
}

impl<S: Scalar> Residual<S> {
    /// Records `v = Σ terms`.
    pub fn record_terms(&mut self, terms: &[S], index: &[usize]) {
        let scale = terms.iter().map(Scalar::magnitude).fold(0.0, f64::max);
        self.scale = self.scale.max(scale);
        let v = terms.iter().fold(S::zero(), |a, t| a.add_ref(t));
        self.record(v, index);
    }

    /// `magnitude / (1 + scale)`.
    pub fn relative(&self) -> f64 {
        self.magnitude / (1.0 + self.scale)
    }

    pub fn record(&mut self, v: S, index: &[usize]) {
        let m = v.magnitude();
        if m > self.magnitude || (self.worst.is_zero() && !v.is_zero()) {
            self.magnitude = m;
            self.worst = v;
            self.index = index.to_vec();
        }
    }

    pub fn merge(&mut self, o: Residual<S>) {
        self.scale = self.scale.max(o.scale);
        let idx = o.index.clone();
        self.record(o.worst, &idx);
    }

    pub fn is_zero(&self) -> bool {
        self.worst.is_zero()
    }
}

/// Contravariant and covariant entries, in that order.
pub type MetricJets<S> = (Vec<Jet2<S>>, Vec<Jet2<S>>);

/// Contravariant and covariant entries as jets at `x`.
pub fn metric_jets<S: Scalar, M: DiagonalMetric>(m: &M, x: &[S]) -> Result<MetricJets<S>, MetricError> {
    let seeds = Jet2::seed(x);
    let contra = m.contravariant(&seeds)?;
    let cov = contra
        .iter()
        .enumerate()
        .map(|(i, g)| g.recip_jet().ok_or_else(|| MetricError::Singular(format!("g^{{{i}{i}}} vanishes"))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((contra, cov))
}

/// Christoffel symbols `Γ^i_{jk}` and their first derivatives.
#[derive(Clone, Debug)]
pub struct Connection<S> {
    n: usize,
    gamma: Vec<S>,
    dgamma: Vec<S>,
}

impl<S: Scalar> Connection<S> {
    /// Built from the covariant diagonal entries given as jets.
    pub fn from_covariant(cov: &[Jet2<S>]) -> Result<Self, MetricError> {
        let n = cov.len();
        let half = S::one() / S::from_i64(2);
        let inv: Vec<S> = cov
            .iter()
            .map(|g| {
                if g.value.is_zero() {
                    Err(MetricError::Singular("degenerate metric entry".into()))
                } else {
                    Ok(S::one() / g.value.clone())
                }
            })
            .collect::<Result<_, _>>()?;
        let mut gamma = vec![S::zero(); n * n * n];
        let mut dgamma = vec![S::zero(); n * n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut t = S::zero();
                    if i == k {
                        t = t + cov[i].d(j);
                    }
                    if i == j {
                        t = t + cov[i].d(k);
                    }
                    if j == k {
                        t = t - cov[j].d(i);
                    }
                    let idx = (i * n + j) * n + k;
                    gamma[idx] = half.mul_ref(&inv[i]).mul_ref(&t);
                    for l in 0..n {
                        let mut dt = S::zero();
                        if i == k {
                            dt = dt + cov[i].dd(j, l);
                        }
                        if i == j {
                            dt = dt + cov[i].dd(k, l);
                        }
                        if j == k {
                            dt = dt - cov[j].dd(i, l);
                        }
                        let dinv = -(cov[i].d(l).mul_ref(&inv[i]).mul_ref(&inv[i]));
                        dgamma[l * n * n * n + idx] = half.mul_ref(&(dinv.mul_ref(&t).add_ref(&inv[i].mul_ref(&dt))));
                    }
                }
            }
        }
        Ok(Connection { n, gamma, dgamma })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `Γ^i_{jk}`.
    pub fn gamma(&self, i: usize, j: usize, k: usize) -> &S {
        &self.gamma[(i * self.n + j) * self.n + k]
    }

    /// `∂_l Γ^i_{jk}`.
    pub fn dgamma(&self, l: usize, i: usize, j: usize, k: usize) -> &S {
        let n = self.n;
        &self.dgamma[l * n * n * n + (i * n + j) * n + k]
    }

    /// `R^i_{jkl} = ∂_k Γ^i_{lj} − ∂_l Γ^i_{kj} + Γ^i_{km} Γ^m_{lj} − Γ^i_{lm} Γ^m_{kj}`.
    pub fn riemann(&self, i: usize, j: usize, k: usize, l: usize) -> S {
        let mut r = self.dgamma(k, i, l, j).sub_ref(self.dgamma(l, i, k, j));
        for m in 0..self.n {
            r = r.add_ref(&self.gamma(i, k, m).mul_ref(self.gamma(m, l, j)));
            r = r.sub_ref(&self.gamma(i, l, m).mul_ref(self.gamma(m, k, j)));
        }
        r
    }
}

/// All `R^i_{jkl}` at `x`, indexed `((i·n + j)·n + k)·n + l`.
pub fn riemann_tensor<S: Scalar, M: DiagonalMetric>(m: &M, x: &[S]) -> Result<Vec<S>, MetricError> {
    let (_, cov) = metric_jets(m, x)?;
    let conn = Connection::from_covariant(&cov)?;
    let n = cov.len();
    let mut out = Vec::with_capacity(n.pow(4));
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    out.push(conn.riemann(i, j, k, l));
                }
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct CurvatureReport<S> {
    /// Largest component of `R_{ijkl} − K (g_{ik} g_{jl} − g_{il} g_{jk})`.
    pub residual: Residual<S>,
    /// `R_{0101} / (g_{00} g_{11})`; absent in dimension one.
    pub inferred: Option<S>,
}

/// Residual of the constant-curvature identity with curvature `k`.
pub fn curvature_residual<S: Scalar, M: DiagonalMetric>(
    m: &M,
    x: &[S],
    k: &S,
) -> Result<CurvatureReport<S>, MetricError> {
    let (_, cov) = metric_jets(m, x)?;
    let conn = Connection::from_covariant(&cov)?;
    let n = cov.len();
    let g: Vec<S> = cov.iter().map(|c| c.value.clone()).collect();
    let delta = |a: usize, b: usize| if a == b { g[a].clone() } else { S::zero() };
    let mut residual = Residual::default();
    for i in 0..n {
        for j in 0..n {
            for kk in 0..n {
                for l in 0..n {
                    let r = g[i].mul_ref(&conn.riemann(i, j, kk, l));
                    let model =
                        k.mul_ref(&(delta(i, kk).mul_ref(&delta(j, l)).sub_ref(&delta(i, l).mul_ref(&delta(j, kk)))));
                    residual.record_terms(&[r, -model], &[i, j, kk, l]);
                }
            }
        }
    }
    let inferred = (n >= 2).then(|| g[0].mul_ref(&conn.riemann(0, 1, 0, 1)) / (g[0].mul_ref(&g[1])));
    Ok(CurvatureReport { residual, inferred })
}

/// Levi-Civita separability condition for `H = ½ Σ g^{ii} p_i²`, over all `i ≠ j`.
pub fn levi_civita_residual<S: Scalar, M: DiagonalMetric>(m: &M, x: &[S], p: &[S]) -> Result<Residual<S>, MetricError> {
    let (contra, _) = metric_jets(m, x)?;
    let n = contra.len();
    let half = S::one() / S::from_i64(2);
    let p2: Vec<S> = p.iter().map(|v| v.mul_ref(v)).collect();
    let h_p: Vec<S> = (0..n).map(|i| contra[i].value.mul_ref(&p[i])).collect();
    let h_x: Vec<S> = (0..n)
        .map(|i| half.mul_ref(&(0..n).fold(S::zero(), |a, k| a.add_ref(&contra[k].d(i).mul_ref(&p2[k])))))
        .collect();
    let h_xx = |i: usize, j: usize| {
        half.mul_ref(&(0..n).fold(S::zero(), |a, k| a.add_ref(&contra[k].dd(i, j).mul_ref(&p2[k]))))
    };
    // ∂²H/∂p_i∂x^j
    let h_px = |i: usize, j: usize| contra[i].d(j).mul_ref(&p[i]);
    let mut res = Residual::default();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let terms = [
                h_p[i].mul_ref(&h_p[j]).mul_ref(&h_xx(i, j)),
                -h_x[i].mul_ref(&h_p[j]).mul_ref(&h_px(i, j)),
                -h_x[j].mul_ref(&h_p[i]).mul_ref(&h_px(j, i)),
            ];
            res.record_terms(&terms, &[i, j]);
        }
    }
    Ok(res)
}

/// Residuals of the three second-order consequences of separability in
/// constant curvature, written for `g_i = log g_ii`.
#[derive(Clone, Debug)]
pub struct SeparabilityReport<S> {
    /// `∂_i ∂_j g_k = 0` for pairwise distinct `i, j, k`.
    pub hessian: Residual<S>,
    /// `∂_j g_i ∂_i g_k + ∂_j g_k ∂_i g_j − ∂_j g_k ∂_i g_k = 0` for pairwise distinct `i, j, k`.
    pub triple: Residual<S>,
    /// `∂_i ∂_j g_j = −∂_j g_i ∂_i g_j` for `i ≠ j`.
    pub pair: Residual<S>,
}

impl<S: Scalar> SeparabilityReport<S> {
    pub fn is_zero(&self) -> bool {
        self.hessian.is_zero() && self.triple.is_zero() && self.pair.is_zero()
    }
}

/// Log-free forms: each equation multiplied through by the covariant entries
/// it involves, so exact arithmetic applies.
pub fn separability_residuals<S: Scalar, M: DiagonalMetric>(
    m: &M,
    x: &[S],
) -> Result<SeparabilityReport<S>, MetricError> {
    let (_, g) = metric_jets(m, x)?;
    let n = g.len();
    let v = |a: usize| g[a].value.clone();
    let mut hessian = Residual::default();
    let mut triple = Residual::default();
    let mut pair = Residual::default();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let r4 = [
                v(i).mul_ref(&v(j)).mul_ref(&g[j].dd(i, j)),
                -v(i).mul_ref(&g[j].d(i)).mul_ref(&g[j].d(j)),
                v(j).mul_ref(&g[i].d(j)).mul_ref(&g[j].d(i)),
            ];
            pair.record_terms(&r4, &[i, j]);
            for k in 0..n {
                if k == i || k == j {
                    continue;
                }
                let r2 = [v(k).mul_ref(&g[k].dd(i, j)), -g[k].d(i).mul_ref(&g[k].d(j))];
                hessian.record_terms(&r2, &[i, j, k]);
                let r3 = [
                    g[i].d(j).mul_ref(&g[k].d(i)).mul_ref(&v(j)).mul_ref(&v(k)),
                    g[k].d(j).mul_ref(&g[j].d(i)).mul_ref(&v(i)).mul_ref(&v(k)),
                    -g[k].d(j).mul_ref(&g[k].d(i)).mul_ref(&v(i)).mul_ref(&v(j)),
                ];
                triple.record_terms(&r3, &[i, j, k]);
            }
        }
    }
    Ok(SeparabilityReport { hessian, triple, pair })
}

/// The same three equations with `g_i = log g_ii` (principal branch), on the
/// floating tag.
pub fn separability_residuals_log<S, M>(m: &M, x: &[S]) -> Result<SeparabilityReport<S>, MetricError>
where
    S: Scalar + Transcendental,
    M: DiagonalMetric,
{
    let (_, cov) = metric_jets(m, x)?;
    let g: Vec<Jet2<S>> = cov.iter().map(|c| c.ln()).collect();
    let n = g.len();
    let mut hessian = Residual::default();
    let mut triple = Residual::default();
    let mut pair = Residual::default();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            pair.record_terms(&[g[j].dd(i, j), g[i].d(j).mul_ref(&g[j].d(i))], &[i, j]);
            for k in 0..n {
                if k == i || k == j {
                    continue;
                }
                hessian.record(g[k].dd(i, j), &[i, j, k]);
                let r3 = [g[i].d(j).mul_ref(&g[k].d(i)), g[k].d(j).mul_ref(&g[j].d(i)), -g[k].d(j).mul_ref(&g[k].d(i))];
                triple.record_terms(&r3, &[i, j, k]);
            }
        }
    }
    Ok(SeparabilityReport { hessian, triple, pair })
}

/// Covariant derivative `∇_k T_{ij}` of a diagonal symmetric tensor with
/// covariant entries `t`, for all `(k, i, j)`, indexed `(k·n + i)·n + j`.
fn covariant_derivative_diag<S: Scalar>(conn: &Connection<S>, t: &[Jet2<S>]) -> Vec<S> {
    let n = t.len();
    let mut out = vec![S::zero(); n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut v = if i == j { t[i].d(k) } else { S::zero() };
                v = v - conn.gamma(j, k, i).mul_ref(&t[j].value) - conn.gamma(i, k, j).mul_ref(&t[i].value);
                out[(k * n + i) * n + j] = v;
            }
        }
    }
    out
}

/// Killing equation `∇_{(k} K_{ij)} = 0` for the tensor `K_{ij} = g_{ik} S^k_j`,
/// with `S` diagonal given by `mixed` (a function of the seeded coordinate jets).
pub fn killing_residual<S, M, F>(m: &M, x: &[S], mixed: F) -> Result<Residual<S>, MetricError>
where
    S: Scalar,
    M: DiagonalMetric,
    F: FnOnce(&[Jet2<S>]) -> Result<Vec<Jet2<S>>, MetricError>,
{
    let seeds = Jet2::seed(x);
    let (_, cov) = metric_jets(m, x)?;
    let conn = Connection::from_covariant(&cov)?;
    let s = mixed(&seeds)?;
    let k: Vec<Jet2<S>> = s.iter().zip(&cov).map(|(a, g)| a.mul_jet(g)).collect();
    let n = k.len();
    let nabla = covariant_derivative_diag(&conn, &k);
    let at = |k: usize, i: usize, j: usize| &nabla[(k * n + i) * n + j];
    let mut res = Residual::default();
    for i in 0..n {
        for j in i..n {
            for kk in j..n {
                res.record_terms(&[at(kk, i, j).clone(), at(i, j, kk).clone(), at(j, kk, i).clone()], &[i, j, kk]);
            }
        }
    }
    Ok(res)
}

/// Sinjukov equation `∇_k L_{ij} = ℓ_i g_{jk} + ℓ_j g_{ik}` with `ℓ = ½ d tr L`,
/// for `L` diagonal given through its mixed entries.
pub fn sinjukov_residual<S, M, F>(m: &M, x: &[S], mixed: F) -> Result<Residual<S>, MetricError>
where
    S: Scalar,
    M: DiagonalMetric,
    F: FnOnce(&[Jet2<S>]) -> Result<Vec<Jet2<S>>, MetricError>,
{
    let comps = sinjukov_components(m, x, mixed)?;
    let n = x.len();
    let mut res = Residual::default();
    for (idx, v) in comps.into_iter().enumerate() {
        res.record(v, &[idx / (n * n), (idx / n) % n, idx % n]);
    }
    Ok(res)
}

/// Every component of the Sinjukov residual, indexed `(k·n + i)·n + j`.
/// The map from `L` to this vector is linear.
pub fn sinjukov_components<S, M, F>(m: &M, x: &[S], mixed: F) -> Result<Vec<S>, MetricError>
where
    S: Scalar,
    M: DiagonalMetric,
    F: FnOnce(&[Jet2<S>]) -> Result<Vec<Jet2<S>>, MetricError>,
{
    let seeds = Jet2::seed(x);
    let (_, cov) = metric_jets(m, x)?;
    let conn = Connection::from_covariant(&cov)?;
    let l = mixed(&seeds)?;
    let n = l.len();
    let lc: Vec<Jet2<S>> = l.iter().zip(&cov).map(|(a, g)| a.mul_jet(g)).collect();
    let half = S::one() / S::from_i64(2);
    let ell: Vec<S> = (0..n).map(|i| half.mul_ref(&l.iter().fold(S::zero(), |a, e| a.add_ref(&e.d(i))))).collect();
    let mut out = covariant_derivative_diag(&conn, &lc);
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let v = &mut out[(k * n + i) * n + j];
                if j == k {
                    *v = v.sub_ref(&ell[i].mul_ref(&cov[j].value));
                }
                if i == k {
                    *v = v.sub_ref(&ell[j].mul_ref(&cov[i].value));
                }
            }
        }
    }
    Ok(out)
}

/// `H = ½ Σ g^{ii} p_i²`.
pub fn hamiltonian<S: Scalar, M: DiagonalMetric>(m: &M, x: &[S], p: &[S]) -> Result<S, MetricError> {
    let g = m.contravariant(x)?;
    let half = S::one() / S::from_i64(2);
    Ok(half.mul_ref(&g.iter().zip(p).fold(S::zero(), |a, (gi, pi)| a.add_ref(&gi.mul_ref(pi).mul_ref(pi)))))
}

/// Phase-space point.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasePoint<S> {
    pub x: Vec<S>,
    pub p: Vec<S>,
}

fn hamilton_rhs<S: Scalar, M: DiagonalMetric>(m: &M, s: &PhasePoint<S>) -> Result<PhasePoint<S>, MetricError> {
    let seeds = Jet2::seed(&s.x);
    let g = m.contravariant(&seeds)?;
    let n = g.len();
    let half = S::one() / S::from_i64(2);
    let x = (0..n).map(|i| g[i].value.mul_ref(&s.p[i])).collect();
    let p = (0..n)
        .map(|i| {
            let d = (0..n).fold(S::zero(), |a, k| a.add_ref(&g[k].d(i).mul_ref(&s.p[k]).mul_ref(&s.p[k])));
            -(half.mul_ref(&d))
        })
        .collect();
    Ok(PhasePoint { x, p })
}

fn axpy<S: Scalar>(a: &PhasePoint<S>, h: &S, d: &PhasePoint<S>) -> PhasePoint<S> {
    PhasePoint {
        x: a.x.iter().zip(&d.x).map(|(u, v)| u.add_ref(&h.mul_ref(v))).collect(),
        p: a.p.iter().zip(&d.p).map(|(u, v)| u.add_ref(&h.mul_ref(v))).collect(),
    }
}

/// Classical fourth-order Runge–Kutta on Hamilton's equations for `H`;
/// returns the `steps + 1` states including the start.
pub fn geodesic_rk4<S: Scalar, M: DiagonalMetric>(
    m: &M,
    start: PhasePoint<S>,
    h: S,
    steps: usize,
) -> Result<Vec<PhasePoint<S>>, MetricError> {
    let half_h = h.clone() / S::from_i64(2);
    let sixth_h = h.clone() / S::from_i64(6);
    let two = S::from_i64(2);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(start);
    for _ in 0..steps {
        let y = out.last().expect("trajectory is non-empty");
        let k1 = hamilton_rhs(m, y)?;
        let k2 = hamilton_rhs(m, &axpy(y, &half_h, &k1))?;
        let k3 = hamilton_rhs(m, &axpy(y, &half_h, &k2))?;
        let k4 = hamilton_rhs(m, &axpy(y, &h, &k3))?;
        let comb = |a: &Vec<S>, b: &Vec<S>, c: &Vec<S>, d: &Vec<S>| -> Vec<S> {
            (0..a.len())
                .map(|i| a[i].add_ref(&two.mul_ref(&b[i])).add_ref(&two.mul_ref(&c[i])).add_ref(&d[i]))
                .collect()
        };
        let incr = PhasePoint { x: comb(&k1.x, &k2.x, &k3.x, &k4.x), p: comb(&k1.p, &k2.p, &k3.p, &k4.p) };
        let next = axpy(y, &sixth_h, &incr);
        out.push(next);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::{Forest, ForestSpec};
    use crate::scalar::CRat;
    use num_complex::Complex64;

    fn forest(json: &str) -> Forest {
        Forest::new(&ForestSpec::from_json(json).unwrap()).unwrap()
    }

    const SPHERE: &str = r#"{"blocks":[{"id":1,"dim":2,"poly":{"leading":"-4","roots":[["1",1],["2",1],["3",1]]}}]}"#;

    #[test]
    fn sphere_has_unit_curvature_exactly() {
        let f = forest(SPHERE);
        let x = [CRat::frac(3, 2), CRat::frac(5, 2)];
        let r = curvature_residual(&f, &x, &CRat::int(1)).unwrap();
        assert!(r.residual.is_zero(), "{:?}", r.residual);
        assert_eq!(r.inferred, Some(CRat::int(1)));
    }

    #[test]
    fn wrong_curvature_leaves_residual() {
        let f = forest(SPHERE);
        let x = [CRat::frac(3, 2), CRat::frac(5, 2)];
        let r = curvature_residual(&f, &x, &CRat::int(2)).unwrap();
        assert!(!r.residual.is_zero());
    }

    #[test]
    fn sphere_is_separable() {
        let f = forest(SPHERE);
        let x = [CRat::frac(3, 2), CRat::frac(7, 3)];
        let p = [CRat::int(2), CRat::frac(-1, 5)];
        assert!(levi_civita_residual(&f, &x, &p).unwrap().is_zero());
        assert!(separability_residuals(&f, &x).unwrap().is_zero());
        let xf = [Complex64::new(1.5, 0.0), Complex64::new(2.3, 0.0)];
        let log = separability_residuals_log(&f, &xf).unwrap();
        assert!(log.pair.magnitude < 1e-12);
    }

    #[test]
    fn metric_is_killing_and_energy_is_kept() {
        let f = forest(SPHERE);
        let x = [CRat::frac(3, 2), CRat::frac(7, 3)];
        let r = killing_residual(&f, &x, |s| Ok(vec![Jet2::constant(CRat::int(1)); s.len()])).unwrap();
        assert!(r.is_zero());
        let start = PhasePoint {
            x: vec![Complex64::new(1.5, 0.0), Complex64::new(2.5, 0.0)],
            p: vec![Complex64::new(0.1, 0.0), Complex64::new(-0.05, 0.0)],
        };
        let h0 = hamiltonian(&f, &start.x, &start.p).unwrap();
        let traj = geodesic_rk4(&f, start, Complex64::new(0.01, 0.0), 100).unwrap();
        let last = traj.last().unwrap();
        let h1 = hamiltonian(&f, &last.x, &last.p).unwrap();
        assert!((h1 - h0).norm() / h0.norm() < 1e-8);
    }
}
