//! Dense working copy of a graph prepared for one fit.

use crate::error::{Error, Result};
use crate::graph::FusionGraph;
use crate::linalg::{split_signed, Block, Mask, Matrix};
use crate::scalar::Scalar;
use crate::solver::config::{Mode, SolverConfig};

pub(crate) struct RelationBlock<T> {
    pub source: usize,
    pub target: usize,
    pub data: Matrix<T>,
    pub mask: Option<Mask>,
}

pub(crate) struct ViewBlock<T> {
    pub type_id: usize,
    pub view: usize,
    /// `(Θ + Θᵀ)/2`; the trace form only sees the symmetric part.
    pub sym: Matrix<T>,
    pub plus: Matrix<T>,
    pub minus: Matrix<T>,
}

pub(crate) struct Dispatch<'g, T> {
    pub instance: usize,
    pub label: usize,
    pub membership: &'g Block<T>,
    /// Position of `R_bm` in [`Problem::relations`].
    pub bag_label: usize,
}

pub(crate) struct Problem<'g, T> {
    pub num_types: usize,
    pub max_views: usize,
    pub ranks: Vec<usize>,
    pub relations: Vec<RelationBlock<T>>,
    pub views: Vec<ViewBlock<T>>,
    pub dispatch: Option<Dispatch<'g, T>>,
    pub mode: Mode,
}

impl<'g, T: Scalar> Problem<'g, T> {
    pub fn new(graph: &'g FusionGraph<T>, config: &SolverConfig<T>) -> Result<Self> {
        graph.ensure_valid()?;
        config.validate()?;
        let ranks = config.resolve_ranks(graph)?;
        let relations = graph
            .relations()
            .iter()
            .map(|r| RelationBlock {
                source: r.source,
                target: r.target,
                data: r.matrix.dense().into_owned(),
                mask: r.observed.clone().filter(|m| !m.is_full()),
            })
            .collect();
        let views = graph
            .views()
            .iter()
            .map(|v| {
                let sym = v.matrix.dense().symmetric_part()?;
                let (plus, minus) = split_signed(&sym);
                Ok(ViewBlock {
                    type_id: v.type_id,
                    view: v.view,
                    sym,
                    plus,
                    minus,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        // without roles there is nothing to dispatch
        let dispatch = match graph.roles().filter(|_| config.mode.uses_dispatch()) {
            Some(roles) => {
            let position = |i, j| graph.relation_position(i, j);
                Some(Dispatch {
                    instance: roles.instance,
                    label: roles.label,
                    membership: &graph.membership()?.matrix,
                    bag_label: position(roles.bag, roles.label)?
                        .ok_or(Error::UndeclaredRelation(roles.bag, roles.label))?,
                })
            }
            None => None,
        };
        Ok(Problem {
            num_types: graph.num_types(),
            max_views: graph.max_views(),
            ranks,
            relations,
            views,
            dispatch,
            mode: config.mode,
        })
    }

    /// Keys of every core the model carries.
    pub fn core_keys(&self) -> Vec<(usize, usize)> {
        let mut keys: Vec<_> = self.relations.iter().map(|r| (r.source, r.target)).collect();
        if let Some(d) = &self.dispatch {
            keys.push((d.instance, d.label));
        }
        keys.sort_unstable();
        keys.dedup();
        keys
    }
}

/// Replaces unobserved entries of `data` by the current model value.
///
/// Filling with the current reconstruction turns masked least squares into
/// an unmasked majorizer that touches the masked objective at the current
/// iterate, so every closed-form or multiplicative step on the filled data
/// cannot increase the masked objective.
pub(crate) fn impute<T: Scalar>(data: &Matrix<T>, mask: Option<&Mask>, current: &Matrix<T>) -> Result<Matrix<T>> {
    match mask {
        None => Ok(data.clone()),
        Some(m) => {
            let mut filled = data.clone();
            filled.fill_unobserved(m, current)?;
            Ok(filled)
        }
    }
}
