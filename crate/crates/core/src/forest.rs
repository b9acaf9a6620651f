//! Block forests: the combinatorial data that determines a metric.
//!
//! Each vertex is a block of coordinates with a polynomial. An edge
//! `β → next(β)` carries the label `λ_β`, which must be a root of the parent's
//! polynomial. [`ForestSpec`] holds the raw data; [`Forest`] is the validated
//! form with the derived partial order and coordinate layout.

use std::fmt;

use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::{FactoredPoly, Poly, PolyError};
use crate::scalar::{rational_str, CRat, Scalar};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub id: usize,
    pub dim: usize,
    pub poly: FactoredPoly,
    #[serde(default)]
    pub parent: Option<usize>,
    #[serde(default)]
    pub label: Option<CRat>,
    /// Optional reference point inside the block; only 1-dimensional leaves
    /// use it, as the sign witness when comparing forests.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample: Option<Vec<Sample>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Sample(#[serde(with = "rational_str")] pub BigRational);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestSpec {
    pub blocks: Vec<BlockSpec>,
}

/// Errors in the shape of the input, reported before any semantic check.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("the forest has no blocks")]
    Empty,
    #[error("block ids must be exactly 1..={count}; offending id {id}")]
    IdRange { id: usize, count: usize },
    #[error("block id {0} appears twice")]
    DuplicateId(usize),
    #[error("block {0} has dimension zero")]
    ZeroDim(usize),
    #[error("block {id}: polynomial of degree {degree} exceeds dim + 1 = {max}")]
    DegreeTooHigh { id: usize, degree: usize, max: usize },
    #[error("block {id}: parent {parent} does not exist")]
    BadParent { id: usize, parent: usize },
    #[error("block {0} is its own parent")]
    SelfParent(usize),
    #[error("block {0}: a label must be given exactly when a parent is given")]
    LabelMismatch(usize),
    #[error("block {id}: {source}")]
    Poly { id: usize, source: PolyError },
    #[error("block {id}: sample point has {found} entries, expected {dim}")]
    SampleDim { id: usize, found: usize, dim: usize },
    #[error("invalid forest: {0}")]
    Invalid(ValidationReport),
}

/// A failed semantic condition.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// Parent pointers form a cycle through these block ids.
    Cycle { blocks: Vec<usize> },
    /// A root of a forest with several components has degree above its dimension.
    RootDegree { block: usize, degree: usize, dim: usize },
    /// The label is not a root of the parent polynomial.
    LabelNotRoot { block: usize, parent: usize, label: CRat },
    /// The top coefficient does not equal the parent derivative at the label.
    LeadingMismatch { block: usize, expected: CRat, found: CRat },
    /// Siblings share a label that is only a simple root.
    SharedSimpleLabel { blocks: (usize, usize), parent: usize, label: CRat },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Cycle { blocks } => write!(f, "parent pointers form a cycle through {blocks:?}"),
            Violation::RootDegree { block, degree, dim } => {
                write!(f, "root block {block} has degree {degree} > dim {dim} in a forest with several components")
            }
            Violation::LabelNotRoot { block, parent, label } => {
                write!(f, "label {label} of block {block} is not a root of the polynomial of block {parent}")
            }
            Violation::LeadingMismatch { block, expected, found } => write!(
                f,
                "block {block}: coefficient of t^(dim+1) is {found}, parent derivative at the label is {expected}"
            ),
            Violation::SharedSimpleLabel { blocks, parent, label } => write!(
                f,
                "blocks {} and {} share label {label}, which is a simple root of block {parent}",
                blocks.0, blocks.1
            ),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

impl ForestSpec {
    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("forest spec serializes")
    }

    /// Blocks sorted by id, after the structural checks.
    pub fn check_structure(&self) -> Result<Vec<&BlockSpec>, SpecError> {
        let count = self.blocks.len();
        if count == 0 {
            return Err(SpecError::Empty);
        }
        let mut by_id: Vec<Option<&BlockSpec>> = vec![None; count];
        for b in &self.blocks {
            if b.id == 0 || b.id > count {
                return Err(SpecError::IdRange { id: b.id, count });
            }
            if by_id[b.id - 1].is_some() {
                return Err(SpecError::DuplicateId(b.id));
            }
            by_id[b.id - 1] = Some(b);
        }
        let blocks: Vec<&BlockSpec> = by_id.into_iter().map(|b| b.expect("ids are a permutation")).collect();
        for b in &blocks {
            if b.dim == 0 {
                return Err(SpecError::ZeroDim(b.id));
            }
            b.poly.check().map_err(|source| SpecError::Poly { id: b.id, source })?;
            let degree = b.poly.degree();
            if degree > b.dim + 1 {
                return Err(SpecError::DegreeTooHigh { id: b.id, degree, max: b.dim + 1 });
            }
            match b.parent {
                Some(p) if p == b.id => return Err(SpecError::SelfParent(b.id)),
                Some(p) if p == 0 || p > count => return Err(SpecError::BadParent { id: b.id, parent: p }),
                _ => {}
            }
            if b.parent.is_some() != b.label.is_some() {
                return Err(SpecError::LabelMismatch(b.id));
            }
            if let Some(s) = &b.sample {
                if s.len() != b.dim {
                    return Err(SpecError::SampleDim { id: b.id, found: s.len(), dim: b.dim });
                }
            }
        }
        Ok(blocks)
    }

    /// Structural checks, then acyclicity and the three compatibility conditions.
    pub fn validate(&self) -> Result<ValidationReport, SpecError> {
        let blocks = self.check_structure()?;
        let count = blocks.len();
        let next: Vec<Option<usize>> = blocks.iter().map(|b| b.parent.map(|p| p - 1)).collect();
        let mut report = ValidationReport::default();

        let mut on_cycle = vec![false; count];
        for start in 0..count {
            let mut seen = vec![false; count];
            let mut v = start;
            while let Some(p) = next[v] {
                if seen[p] {
                    break;
                }
                seen[p] = true;
                if p == start {
                    on_cycle[start] = true;
                    break;
                }
                v = p;
            }
        }
        let mut reported = vec![false; count];
        for start in 0..count {
            if on_cycle[start] && !reported[start] {
                let mut cyc = vec![start];
                let mut v = next[start].expect("cycle vertex has a parent");
                while v != start {
                    cyc.push(v);
                    v = next[v].expect("cycle vertex has a parent");
                }
                for &c in &cyc {
                    reported[c] = true;
                }
                report.violations.push(Violation::Cycle { blocks: cyc.iter().map(|c| c + 1).collect() });
            }
        }
        if !report.is_valid() {
            return Ok(report);
        }

        let roots: Vec<usize> = (0..count).filter(|&v| next[v].is_none()).collect();
        if roots.len() > 1 {
            for &r in &roots {
                let degree = blocks[r].poly.degree();
                if degree > blocks[r].dim {
                    report.violations.push(Violation::RootDegree { block: r + 1, degree, dim: blocks[r].dim });
                }
            }
        }

        let expanded: Vec<Poly<CRat>> = blocks.iter().map(|b| b.poly.expand()).collect();
        for (v, b) in blocks.iter().enumerate() {
            let (Some(p), Some(label)) = (next[v], &b.label) else { continue };
            let parent = &blocks[p].poly;
            if parent.multiplicity(label) == 0 {
                report.violations.push(Violation::LabelNotRoot { block: v + 1, parent: p + 1, label: label.clone() });
                continue;
            }
            let expected = expanded[p].derivative().eval(label);
            let found = expanded[v].coeff(b.dim + 1);
            if expected != found {
                report.violations.push(Violation::LeadingMismatch { block: v + 1, expected, found });
            }
        }

        for a in 0..count {
            for b in a + 1..count {
                if next[a].is_none() || next[a] != next[b] || blocks[a].label != blocks[b].label {
                    continue;
                }
                let p = next[a].expect("checked above");
                let label = blocks[a].label.clone().expect("child has a label");
                if blocks[p].poly.multiplicity(&label) == 1 {
                    report.violations.push(Violation::SharedSimpleLabel {
                        blocks: (a + 1, b + 1),
                        parent: p + 1,
                        label,
                    });
                }
            }
        }
        Ok(report)
    }

    pub fn total_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.dim).sum()
    }
}

/// A validated forest. Vertices are indexed `0..B` in id order
/// (vertex `v` has id `v + 1`), and coordinates are laid out block by block.
#[derive(Clone, Debug)]
pub struct Forest {
    blocks: Vec<BlockSpec>,
    next: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    offsets: Vec<usize>,
    polys: Vec<Poly<CRat>>,
    block_of: Vec<usize>,
}

impl Forest {
    pub fn new(spec: &ForestSpec) -> Result<Self, SpecError> {
        let report = spec.validate()?;
        if !report.is_valid() {
            return Err(SpecError::Invalid(report));
        }
        let blocks: Vec<BlockSpec> = spec.check_structure()?.into_iter().cloned().collect();
        let next: Vec<Option<usize>> = blocks.iter().map(|b| b.parent.map(|p| p - 1)).collect();
        let mut children = vec![Vec::new(); blocks.len()];
        for (v, p) in next.iter().enumerate() {
            if let Some(p) = p {
                children[*p].push(v);
            }
        }
        let mut offsets = Vec::with_capacity(blocks.len() + 1);
        let mut block_of = Vec::new();
        let mut acc = 0;
        for (v, b) in blocks.iter().enumerate() {
            offsets.push(acc);
            acc += b.dim;
            block_of.extend(std::iter::repeat_n(v, b.dim));
        }
        offsets.push(acc);
        let polys = blocks.iter().map(|b| b.poly.expand()).collect();
        Ok(Forest { blocks, next, children, offsets, polys, block_of })
    }

    pub fn from_json(s: &str) -> Result<Self, ForestLoadError> {
        let spec = ForestSpec::from_json(s).map_err(|e| ForestLoadError::Parse(e.to_string()))?;
        Forest::new(&spec).map_err(ForestLoadError::Spec)
    }

    pub fn spec(&self) -> ForestSpec {
        ForestSpec { blocks: self.blocks.clone() }
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// Total number of coordinates.
    pub fn dim(&self) -> usize {
        *self.offsets.last().expect("offsets end with the total")
    }

    pub fn block(&self, v: usize) -> &BlockSpec {
        &self.blocks[v]
    }

    pub fn block_dim(&self, v: usize) -> usize {
        self.blocks[v].dim
    }

    pub fn range(&self, v: usize) -> std::ops::Range<usize> {
        self.offsets[v]..self.offsets[v + 1]
    }

    /// Block containing coordinate `i`.
    pub fn block_of(&self, i: usize) -> usize {
        self.block_of[i]
    }

    pub fn poly(&self, v: usize) -> &Poly<CRat> {
        &self.polys[v]
    }

    pub fn factored(&self, v: usize) -> &FactoredPoly {
        &self.blocks[v].poly
    }

    pub fn next(&self, v: usize) -> Option<usize> {
        self.next[v]
    }

    pub fn label(&self, v: usize) -> Option<&CRat> {
        self.blocks[v].label.as_ref()
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn is_root(&self, v: usize) -> bool {
        self.next[v].is_none()
    }

    pub fn roots(&self) -> Vec<usize> {
        (0..self.blocks.len()).filter(|&v| self.is_root(v)).collect()
    }

    pub fn root_of(&self, mut v: usize) -> usize {
        while let Some(p) = self.next[v] {
            v = p;
        }
        v
    }

    /// Vertices from `v` down to its root, inclusive.
    pub fn path_to_root(&self, mut v: usize) -> Vec<usize> {
        let mut out = vec![v];
        while let Some(p) = self.next[v] {
            out.push(p);
            v = p;
        }
        out
    }

    /// `a ≺ b`: `a` lies strictly on the path from `b` to its root.
    pub fn precedes(&self, a: usize, b: usize) -> bool {
        a != b && self.path_to_root(b).contains(&a)
    }

    /// For `a ≺ b`, the vertex `γ` on the path from `b` with `next(γ) = a`.
    pub fn child_towards(&self, a: usize, b: usize) -> Option<usize> {
        let path = self.path_to_root(b);
        path.windows(2).find(|w| w[1] == a).map(|w| w[0])
    }

    /// Connected components, each listed in id order, ordered by smallest id.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut comps: Vec<Vec<usize>> = Vec::new();
        let mut root_index: Vec<Option<usize>> = vec![None; self.blocks.len()];
        for v in 0..self.blocks.len() {
            let r = self.root_of(v);
            match root_index[r] {
                Some(c) => comps[c].push(v),
                None => {
                    root_index[r] = Some(comps.len());
                    comps.push(vec![v]);
                }
            }
        }
        comps
    }

    pub fn is_connected(&self) -> bool {
        self.roots().len() == 1
    }

    /// Vertices reachable upward from `v` (strict descendants), in id order.
    pub fn descendants(&self, v: usize) -> Vec<usize> {
        (0..self.blocks.len()).filter(|&w| self.precedes(v, w)).collect()
    }

    /// Expected constant curvature: `-a_{n+1}/4` of the root polynomial for a
    /// connected forest, zero otherwise.
    pub fn curvature(&self) -> CRat {
        let roots = self.roots();
        if roots.len() != 1 {
            return CRat::int(0);
        }
        let r = roots[0];
        let a = self.polys[r].coeff(self.blocks[r].dim + 1);
        -(a * CRat::frac(1, 4))
    }

    /// Whether the one-block metric of `v` is curved (`deg P = dim + 1`).
    pub fn is_curved_block(&self, v: usize) -> bool {
        self.blocks[v].poly.degree() == self.blocks[v].dim + 1
    }

    /// Regularity at a point: distinct coordinates within each block, `P_v` non-zero
    /// at every coordinate, and no label equal to a coordinate of the parent block.
    pub fn is_regular<S: Scalar>(&self, x: &[S]) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        for v in 0..self.blocks.len() {
            let xs = &x[self.range(v)];
            for (i, a) in xs.iter().enumerate() {
                if xs[..i].iter().any(|b| a.sub_ref(b).is_zero()) {
                    return false;
                }
                let p = self.polys[v].map(S::from_exact);
                if p.eval(a).is_zero() {
                    return false;
                }
            }
            if let (Some(p), Some(l)) = (self.next[v], self.label(v)) {
                let l = S::from_exact(l);
                if x[self.range(p)].iter().any(|a| a.sub_ref(&l).is_zero()) {
                    return false;
                }
            }
        }
        true
    }

    /// `true` when every block polynomial has real coefficients and real labels.
    pub fn is_real(&self) -> bool {
        self.polys.iter().all(|p| p.coeffs().iter().all(|c| c.im.is_zero()))
            && self.blocks.iter().all(|b| b.label.as_ref().is_none_or(|l| l.im.is_zero()))
    }

    pub fn leading_is_zero(&self, v: usize) -> bool {
        self.blocks[v].poly.leading.is_zero()
    }
}

#[derive(Debug, Error)]
pub enum ForestLoadError {
    #[error("cannot parse forest: {0}")]
    Parse(String),
    #[error(transparent)]
    Spec(SpecError),
}
