use std::collections::BTreeSet;

use serde::Serialize;

use crate::model::FoldedBnn;
use crate::poly::VariableId;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Clique {
    pub id: usize,
    /// Sorted by `(layer, index)`.
    pub variables: Vec<VariableId>,
}

impl Clique {
    fn new(id: usize, mut variables: Vec<VariableId>) -> Self {
        variables.sort();
        Self { id, variables }
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn contains(&self, v: VariableId) -> bool {
        self.variables.binary_search(&v).is_ok()
    }

    pub fn position(&self, v: VariableId) -> Option<usize> {
        self.variables.binary_search(&v).ok()
    }
}

fn layer_vars(widths: &[usize], layer: usize) -> impl Iterator<Item = VariableId> {
    (0..widths[layer]).map(move |k| VariableId::new(layer, k))
}

/// Cliques of the order-1 sparse relaxation, listed in an order that satisfies
/// the running intersection property:
///
/// * adjacent hidden-layer pairs `{x_k, x_{k+1}}` for `k = 1..L-2` (when `L >= 3`),
/// * one clique per input coordinate, `{x_{0,k}} ∪ x_1`,
/// * one clique per last-layer neuron, `x_{L-1} ∪ {x_{L,k}}` (when `L >= 2`).
pub fn build_cliques(net: &FoldedBnn) -> Vec<Clique> {
    let widths = net.widths();
    let depth = net.depth();
    let mut sets: Vec<Vec<VariableId>> = Vec::new();
    if depth >= 3 {
        for k in 1..=depth - 2 {
            sets.push(
                layer_vars(widths, k)
                    .chain(layer_vars(widths, k + 1))
                    .collect(),
            );
        }
    }
    for k in 0..widths[0] {
        sets.push(
            std::iter::once(VariableId::new(0, k))
                .chain(layer_vars(widths, 1))
                .collect(),
        );
    }
    if depth >= 2 {
        for k in 0..widths[depth] {
            sets.push(
                layer_vars(widths, depth - 1)
                    .chain(std::iter::once(VariableId::new(depth, k)))
                    .collect(),
            );
        }
    }
    sets.into_iter()
        .enumerate()
        .map(|(id, vs)| Clique::new(id, vs))
        .collect()
}

/// `(count, max size)` predicted from the widths alone.
pub fn expected_clique_shape(widths: &[usize]) -> (usize, usize) {
    let depth = widths.len() - 2;
    match depth {
        1 => (widths[0], widths[1] + 1),
        2 => (widths[0] + widths[2], widths[1] + 1),
        _ => {
            let pair_max = (1..=depth - 2)
                .map(|j| widths[j] + widths[j + 1])
                .max()
                .unwrap_or(0);
            (
                depth - 2 + widths[0] + widths[depth],
                (widths[1] + 1).max(widths[depth - 1] + 1).max(pair_max),
            )
        }
    }
}

/// True iff each clique's overlap with all earlier cliques lies inside a
/// single earlier clique.
pub fn check_rip(cliques: &[Clique]) -> bool {
    let mut seen: BTreeSet<VariableId> = BTreeSet::new();
    for (k, clique) in cliques.iter().enumerate() {
        let overlap: Vec<VariableId> = clique
            .variables
            .iter()
            .copied()
            .filter(|v| seen.contains(v))
            .collect();
        if k > 0
            && !overlap.is_empty()
            && !cliques[..k]
                .iter()
                .any(|c| overlap.iter().all(|&v| c.contains(v)))
        {
            return false;
        }
        seen.extend(clique.variables.iter().copied());
    }
    true
}
