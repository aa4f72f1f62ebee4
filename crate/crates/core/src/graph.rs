//! The heterogeneous fusion graph: typed objects, inter-relational blocks
//! between types, signed intra-type views, and the bag/instance/label roles.
//!
//! Type ids are zero-based positions in [`FusionGraph::types`]. View indices
//! are zero-based per type; `τ` is one past the largest view index in use.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::linalg::{Block, Mask};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObjectType {
    pub name: String,
    pub cardinality: usize,
}

impl ObjectType {
    pub fn new(name: impl Into<String>, cardinality: usize) -> Self {
        ObjectType {
            name: name.into(),
            cardinality,
        }
    }
}

/// Observed associations `R_ij` between objects of type `source` and `target`.
#[derive(Clone, Debug, PartialEq)]
pub struct InterRelation<T> {
    pub source: usize,
    pub target: usize,
    pub matrix: Block<T>,
    /// `None` means every entry is observed. Unmasked zeros are known negatives.
    pub observed: Option<Mask>,
}

impl<T: Scalar> InterRelation<T> {
    pub fn new(source: usize, target: usize, matrix: impl Into<Block<T>>) -> Self {
        InterRelation {
            source,
            target,
            matrix: matrix.into(),
            observed: None,
        }
    }

    pub fn with_mask(mut self, mask: Mask) -> Self {
        self.observed = Some(mask);
        self
    }

    pub fn is_observed(&self, r: usize, c: usize) -> bool {
        self.observed.as_ref().is_none_or(|m| m.get(r, c))
    }
}

/// Signed intra-type matrix `Θ_p^(t)`: negative entries mark similar pairs,
/// positive entries dissimilar (cannot-link) pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct IntraView<T> {
    pub type_id: usize,
    pub view: usize,
    pub matrix: Block<T>,
}

impl<T: Scalar> IntraView<T> {
    pub fn new(type_id: usize, view: usize, matrix: impl Into<Block<T>>) -> Self {
        IntraView {
            type_id,
            view,
            matrix: matrix.into(),
        }
    }
}

/// Structural designations of the graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Roles {
    pub bag: usize,
    pub instance: usize,
    pub label: usize,
    /// Either `(bag, label)` or `(instance, label)`.
    pub target: (usize, usize),
}

impl Roles {
    /// Roles with the bag-label relation as prediction target.
    pub fn bag_target(bag: usize, instance: usize, label: usize) -> Self {
        Roles {
            bag,
            instance,
            label,
            target: (bag, label),
        }
    }
}

/// Lookup from type pairs to relations and from (type, view) to views.
///
/// Absent blocks are `Ok(None)`; ids outside the declared types are errors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BlockIndex {
    num_types: usize,
    relations: HashMap<(usize, usize), usize>,
    views: HashMap<(usize, usize), usize>,
}

impl BlockIndex {
    fn build<T: Scalar>(num_types: usize, relations: &[InterRelation<T>], views: &[IntraView<T>]) -> Self {
        let mut index = BlockIndex {
            num_types,
            ..Default::default()
        };
        for (pos, r) in relations.iter().enumerate() {
            index.relations.entry((r.source, r.target)).or_insert(pos);
        }
        for (pos, v) in views.iter().enumerate() {
            index.views.entry((v.type_id, v.view)).or_insert(pos);
        }
        index
    }

    fn check(&self, id: usize) -> Result<()> {
        if id < self.num_types {
            Ok(())
        } else {
            Err(Error::UnknownType(id))
        }
    }

    pub fn relation(&self, i: usize, j: usize) -> Result<Option<usize>> {
        self.check(i)?;
        self.check(j)?;
        Ok(self.relations.get(&(i, j)).copied())
    }

    pub fn view(&self, p: usize, t: usize) -> Result<Option<usize>> {
        self.check(p)?;
        Ok(self.views.get(&(p, t)).copied())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FusionGraph<T> {
    types: Vec<ObjectType>,
    relations: Vec<InterRelation<T>>,
    views: Vec<IntraView<T>>,
    roles: Option<Roles>,
    strict_membership: bool,
    index: BlockIndex,
}

impl<T: Scalar> FusionGraph<T> {
    /// Assembles a graph without validating it; see [`FusionGraph::validate`]
    /// and [`FusionGraph::try_new`].
    pub fn new(
        types: Vec<ObjectType>,
        relations: Vec<InterRelation<T>>,
        views: Vec<IntraView<T>>,
        roles: Roles,
    ) -> Self {
        Self::assemble(types, relations, views, Some(roles))
    }

    /// A graph without bag/instance/label structure: plain collective
    /// factorization, with no dispatch term and no prediction target.
    pub fn unstructured(types: Vec<ObjectType>, relations: Vec<InterRelation<T>>, views: Vec<IntraView<T>>) -> Self {
        Self::assemble(types, relations, views, None)
    }

    fn assemble(
        types: Vec<ObjectType>,
        relations: Vec<InterRelation<T>>,
        views: Vec<IntraView<T>>,
        roles: Option<Roles>,
    ) -> Self {
        let index = BlockIndex::build(types.len(), &relations, &views);
        FusionGraph {
            types,
            relations,
            views,
            roles,
            strict_membership: false,
            index,
        }
    }

    /// Assembles and validates, failing with every violation found.
    pub fn try_new(
        types: Vec<ObjectType>,
        relations: Vec<InterRelation<T>>,
        views: Vec<IntraView<T>>,
        roles: Roles,
    ) -> Result<Self> {
        let g = Self::new(types, relations, views, roles);
        g.ensure_valid()?;
        Ok(g)
    }

    /// Requires every instance to belong to exactly one bag.
    pub fn with_strict_membership(mut self, strict: bool) -> Self {
        self.strict_membership = strict;
        self
    }

    pub fn strict_membership(&self) -> bool {
        self.strict_membership
    }

    pub fn types(&self) -> &[ObjectType] {
        &self.types
    }

    pub fn num_types(&self) -> usize {
        self.types.len()
    }

    pub fn cardinality(&self, id: usize) -> Result<usize> {
        self.types
            .get(id)
            .map(|t| t.cardinality)
            .ok_or(Error::UnknownType(id))
    }

    pub fn type_id(&self, name: &str) -> Option<usize> {
        self.types.iter().position(|t| t.name == name)
    }

    pub fn relations(&self) -> &[InterRelation<T>] {
        &self.relations
    }

    pub fn views(&self) -> &[IntraView<T>] {
        &self.views
    }

    pub fn roles(&self) -> Option<Roles> {
        self.roles
    }

    /// The roles, or an error for an unstructured graph.
    pub fn require_roles(&self) -> Result<Roles> {
        self.roles
            .ok_or_else(|| Error::InvalidGraph(vec!["graph declares no bag/instance/label roles".into()]))
    }

    pub fn index(&self) -> &BlockIndex {
        &self.index
    }

    /// `τ`: one past the largest view index of any type (0 without views).
    pub fn max_views(&self) -> usize {
        self.views.iter().map(|v| v.view + 1).max().unwrap_or(0)
    }

    pub fn relation(&self, i: usize, j: usize) -> Result<Option<&InterRelation<T>>> {
        Ok(self.index.relation(i, j)?.map(|p| &self.relations[p]))
    }

    pub fn relation_position(&self, i: usize, j: usize) -> Result<Option<usize>> {
        self.index.relation(i, j)
    }

    pub fn view(&self, p: usize, t: usize) -> Result<Option<&IntraView<T>>> {
        Ok(self.index.view(p, t)?.map(|pos| &self.views[pos]))
    }

    pub fn membership(&self) -> Result<&InterRelation<T>> {
        let roles = self.require_roles()?;
        self.relation(roles.bag, roles.instance)?
            .ok_or_else(|| Error::InvalidGraph(vec!["bag-instance relation missing".into()]))
    }

    pub fn target(&self) -> Result<&InterRelation<T>> {
        let (i, j) = self.require_roles()?.target;
        self.relation(i, j)?
            .ok_or(Error::UndeclaredRelation(i, j))
    }

    /// Copy of the graph with the observed-entry mask of relation `(i, j)` replaced.
    pub fn with_relation_mask(&self, i: usize, j: usize, mask: Option<Mask>) -> Result<Self> {
        let pos = self
            .index
            .relation(i, j)?
            .ok_or(Error::UndeclaredRelation(i, j))?;
        if let Some(m) = &mask {
            let shape = self.relations[pos].matrix.shape();
            if m.shape() != shape {
                return Err(Error::DimensionMismatch {
                    op: "with_relation_mask",
                    left: shape,
                    right: m.shape(),
                });
            }
        }
        let mut g = self.clone();
        g.relations[pos].observed = mask;
        Ok(g)
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidGraph(violations))
        }
    }

    /// Checks every structural invariant and returns one description per violation.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        let m = self.types.len();
        if m == 0 {
            out.push("graph declares no object types".to_string());
        }
        for (id, t) in self.types.iter().enumerate() {
            if t.cardinality == 0 {
                out.push(format!("type {id} ({}) must have cardinality >= 1", t.name));
            }
            if self.types[..id].iter().any(|o| o.name == t.name) {
                out.push(format!("type name {} declared twice", t.name));
            }
        }

        let mut seen = HashMap::new();
        for r in &self.relations {
            let name = format!("R({},{})", r.source, r.target);
            if r.source >= m || r.target >= m {
                out.push(format!("{name}: unknown type"));
                continue;
            }
            if seen.insert((r.source, r.target), ()).is_some() {
                out.push(format!("{name}: declared more than once"));
            }
            let expected = (self.types[r.source].cardinality, self.types[r.target].cardinality);
            if r.matrix.shape() != expected {
                out.push(format!(
                    "{name}: shape {:?} does not match cardinalities {:?}",
                    r.matrix.shape(),
                    expected
                ));
            }
            if let Some(mask) = &r.observed {
                if mask.shape() != r.matrix.shape() {
                    out.push(format!("{name}: mask shape {:?} does not match matrix", mask.shape()));
                }
            }
            let mut bad = None;
            r.matrix.for_each_nonzero(|_, _, v| {
                if bad.is_none() && (!v.is_finite() || v < T::zero()) {
                    bad = Some(v);
                }
            });
            if let Some(v) = bad {
                out.push(format!("{name}: entries must be finite and nonnegative (found {v})"));
            }
        }

        let mut seen_views = HashMap::new();
        for v in &self.views {
            let name = format!("Theta({},{})", v.type_id, v.view);
            if v.type_id >= m {
                out.push(format!("{name}: unknown type"));
                continue;
            }
            if seen_views.insert((v.type_id, v.view), ()).is_some() {
                out.push(format!("{name}: declared more than once"));
            }
            let n = self.types[v.type_id].cardinality;
            if v.matrix.shape() != (n, n) {
                out.push(format!(
                    "{name}: shape {:?} must be square {n}x{n}",
                    v.matrix.shape()
                ));
            }
            let mut finite = true;
            v.matrix.for_each_nonzero(|_, _, x| finite &= x.is_finite());
            if !finite {
                out.push(format!("{name}: entries must be finite"));
            }
        }

        let Some(Roles {
            bag,
            instance,
            label,
            target,
        }) = self.roles
        else {
            return out;
        };
        if bag >= m || instance >= m || label >= m {
            out.push("roles reference unknown type ids".to_string());
            return out;
        }
        if bag == instance || bag == label || instance == label {
            out.push("bag, instance and label roles must be distinct types".to_string());
        }
        match self.relations.iter().find(|r| (r.source, r.target) == (bag, instance)) {
            None => out.push("bag-instance relation R(bag,instance) is missing".to_string()),
            Some(r) => {
                let mut binary = true;
                r.matrix.for_each_nonzero(|_, _, v| binary &= v == T::one());
                if !binary {
                    out.push("bag-instance matrix must be 0/1".to_string());
                }
                if self.strict_membership && r.matrix.shape().1 == self.types[instance].cardinality {
                    let mut counts = vec![0usize; r.matrix.shape().1];
                    r.matrix.for_each_nonzero(|_, c, _| counts[c] += 1);
                    if let Some(c) = counts.iter().position(|&n| n != 1) {
                        out.push(format!(
                            "bag-instance matrix: instance {c} belongs to {} bags (strict mode requires exactly one)",
                            counts[c]
                        ));
                    }
                }
            }
        }
        if !self.relations.iter().any(|r| (r.source, r.target) == (bag, label)) {
            out.push("bag-label relation R(bag,label) is missing".to_string());
        }
        if target != (bag, label) && target != (instance, label) {
            out.push(format!("target {target:?} must be (bag,label) or (instance,label)"));
        } else if !self.relations.iter().any(|r| (r.source, r.target) == target) {
            out.push(format!("target relation {target:?} is not declared"));
        }
        out
    }
}
