//! The diagonal metric attached to a block forest, and its cone.
//!
//! In coordinates `x = (x_1, …, x_B)` block by block, the contravariant entry
//! for the `i`-th coordinate of block `α` is
//! `f_α · P_α(x_α^i) / ∏_{j≠i} (x_α^i − x_α^j)`, where `f_α` collects
//! `1 / det(λ_s − L_{next(s)})` over the non-root vertices on the path from `α`.

use thiserror::Error;

use crate::forest::Forest;
use crate::scalar::{CRat, Field};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("expected {expected} coordinates, got {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("singular point: {0}")]
    Singular(String),
    #[error("cone construction needs curvature 1 (root polynomial of degree dim + 1 with leading -4)")]
    NotUnitCurvature,
}

/// A metric that is diagonal in its coordinates, given through its
/// contravariant entries. Generic over the field so that the same formula
/// yields values, exact derivatives and jets.
pub trait DiagonalMetric {
    fn dim(&self) -> usize;
    fn contravariant<R: Field>(&self, x: &[R]) -> Result<Vec<R>, MetricError>;

    /// Covariant entries `g_ii = 1 / g^{ii}`.
    fn covariant<R: Field>(&self, x: &[R]) -> Result<Vec<R>, MetricError> {
        self.contravariant(x)?
            .into_iter()
            .enumerate()
            .map(|(i, g)| g.recip().ok_or_else(|| MetricError::Singular(format!("g^{{{i}{i}}} vanishes"))))
            .collect()
    }
}

fn check_len(expected: usize, found: usize) -> Result<(), MetricError> {
    if expected == found {
        Ok(())
    } else {
        Err(MetricError::DimMismatch { expected, found })
    }
}

/// `det(λ − L_v) = ∏_i (λ − x_v^i)`.
pub fn det_shift<R: Field>(forest: &Forest, v: usize, lambda: &CRat, x: &[R]) -> R {
    let l = R::lift(lambda);
    x[forest.range(v)].iter().fold(R::int(1), |acc, xi| acc * (l.clone() - xi.clone()))
}

/// Warp factor `f_v`; equal to one on roots.
pub fn warp_factor<R: Field>(forest: &Forest, v: usize, x: &[R]) -> Result<R, MetricError> {
    let mut f = R::int(1);
    for s in forest.path_to_root(v) {
        let (Some(p), Some(l)) = (forest.next(s), forest.label(s)) else { continue };
        let d = det_shift(forest, p, l, x);
        f = f
            .checked_div(&d)
            .ok_or_else(|| MetricError::Singular(format!("label {l} of block {} meets block {}", s + 1, p + 1)))?;
    }
    Ok(f)
}

/// Levi-Civita factor of coordinate `i`: `1 / ∏_{j≠i, same block} (x^i − x^j)`.
pub fn lc_factor<R: Field>(forest: &Forest, i: usize, x: &[R]) -> Result<R, MetricError> {
    let v = forest.block_of(i);
    let mut d = R::int(1);
    for j in forest.range(v) {
        if j != i {
            d = d * (x[i].clone() - x[j].clone());
        }
    }
    d.recip().ok_or_else(|| MetricError::Singular(format!("coordinates of block {} collide", v + 1)))
}

impl DiagonalMetric for Forest {
    fn dim(&self) -> usize {
        Forest::dim(self)
    }

    fn contravariant<R: Field>(&self, x: &[R]) -> Result<Vec<R>, MetricError> {
        check_len(Forest::dim(self), x.len())?;
        let mut out = Vec::with_capacity(x.len());
        for v in 0..self.block_count() {
            let f = warp_factor(self, v, x)?;
            let p = self.poly(v);
            for i in self.range(v) {
                out.push(f.clone() * p.eval_lifted(&x[i]) * lc_factor(self, i, x)?);
            }
        }
        Ok(out)
    }
}

/// Contravariant entries grouped by block.
pub fn metric_diag<R: Field>(forest: &Forest, x: &[R]) -> Result<Vec<Vec<R>>, MetricError> {
    let flat = forest.contravariant(x)?;
    Ok((0..forest.block_count()).map(|v| flat[forest.range(v)].to_vec()).collect())
}

/// The cone `dr² + r² g` over a metric of curvature one, in coordinates
/// `(r, x)`; it is flat.
#[derive(Clone, Copy, Debug)]
pub struct ConeMetric<'a> {
    base: &'a Forest,
}

impl<'a> ConeMetric<'a> {
    pub fn new(base: &'a Forest) -> Result<Self, MetricError> {
        if base.curvature() != CRat::int(1) {
            return Err(MetricError::NotUnitCurvature);
        }
        Ok(ConeMetric { base })
    }
}

impl DiagonalMetric for ConeMetric<'_> {
    fn dim(&self) -> usize {
        self.base.dim() + 1
    }

    fn contravariant<R: Field>(&self, x: &[R]) -> Result<Vec<R>, MetricError> {
        check_len(self.dim(), x.len())?;
        let r2 = x[0].clone() * x[0].clone();
        let inv = r2.recip().ok_or_else(|| MetricError::Singular("cone apex".into()))?;
        let mut out = vec![R::int(1)];
        out.extend(self.base.contravariant(&x[1..])?.into_iter().map(|g| g * inv.clone()));
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::ForestSpec;

    fn forest(json: &str) -> Forest {
        Forest::new(&ForestSpec::from_json(json).unwrap()).unwrap()
    }

    #[test]
    fn levi_civita_block() {
        let f = forest(r#"{"blocks":[{"id":1,"dim":2,"poly":{"leading":"-4","roots":[["1",1],["2",1]]}}]}"#);
        let x = [CRat::int(3), CRat::int(5)];
        let g = f.contravariant(&x).unwrap();
        // P(3) = -8, P(5) = -48.
        assert_eq!(g, vec![CRat::int(4), CRat::int(-24)]);
    }

    #[test]
    fn warped_child_entry() {
        let f = forest(
            r#"{"blocks":[
            {"id":1,"dim":1,"poly":{"leading":"1","roots":[["0",1]]}},
            {"id":2,"dim":1,"poly":{"leading":"1","roots":[[{"re":"0","im":"1"},1],[{"re":"0","im":"-1"},1]]},"parent":1,"label":"0"}]}"#,
        );
        let x = [CRat::int(2), CRat::int(3)];
        let g = f.contravariant(&x).unwrap();
        assert_eq!(g[0], CRat::int(2));
        // f_2 = 1/(0 - 2), P_2(3) = 10.
        assert_eq!(g[1], CRat::int(-5));
    }

    #[test]
    fn singular_points_are_errors() {
        let f = forest(r#"{"blocks":[{"id":1,"dim":2,"poly":{"leading":"1"}}]}"#);
        let x = [CRat::int(1), CRat::int(1)];
        assert!(matches!(f.contravariant(&x), Err(MetricError::Singular(_))));
        assert!(!f.is_regular(&x));
    }

    #[test]
    fn cone_entries() {
        let f = forest(r#"{"blocks":[{"id":1,"dim":1,"poly":{"leading":"-4","roots":[["0",1],["1",1]]}}]}"#);
        let c = ConeMetric::new(&f).unwrap();
        let g = c.covariant(&[CRat::int(2), CRat::frac(1, 2)]).unwrap();
        assert_eq!(g, vec![CRat::int(1), CRat::int(4)]);
    }

    #[test]
    fn cone_requires_unit_curvature() {
        let f = forest(r#"{"blocks":[{"id":1,"dim":1,"poly":{"leading":"4","roots":[["0",1],["1",1]]}}]}"#);
        assert_eq!(ConeMetric::new(&f).unwrap_err(), MetricError::NotUnitCurvature);
    }
}
