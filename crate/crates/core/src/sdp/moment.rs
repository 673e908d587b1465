use std::collections::{BTreeMap, BTreeSet};

use crate::encode::{Clique, EncodingKind, Family, VerificationInstance};
use crate::poly::{Monomial, MultilinearPoly, VariableId};

use super::SdpError;

/// Canonical ids for the pseudo-moments of the order-1 sparse relaxation.
///
/// Id `0` is the constant monomial (fixed to one). Binary squares reduce to
/// the constant and are never indexed. Ids follow the graded monomial order.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentIndex {
    monomials: Vec<Monomial>,
    ids: BTreeMap<Monomial, usize>,
}

impl MomentIndex {
    pub fn from_cliques(cliques: &[Clique]) -> Self {
        let mut set = BTreeSet::new();
        set.insert(Monomial::one());
        for c in cliques {
            for (i, &u) in c.variables.iter().enumerate() {
                set.insert(Monomial::var(u));
                for &v in &c.variables[i..] {
                    let m = Monomial::from_powers([(u, 1), (v, 1)]).reduce();
                    set.insert(m);
                }
            }
        }
        let monomials: Vec<Monomial> = set.into_iter().collect();
        let ids = monomials
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, m)| (m, i))
            .collect();
        Self { monomials, ids }
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    /// Id of a monomial after binary-square reduction.
    pub fn id(&self, m: &Monomial) -> Option<usize> {
        self.ids.get(&m.reduce()).copied()
    }

    pub fn monomial(&self, id: usize) -> &Monomial {
        &self.monomials[id]
    }

    pub fn monomials(&self) -> &[Monomial] {
        &self.monomials
    }
}

/// Moment matrix of one clique: rows/columns indexed by `(1, x_{I_k})`,
/// entries are moment ids.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentBlock {
    pub clique: usize,
    pub variables: Vec<VariableId>,
    ids: Vec<usize>,
}

impl MomentBlock {
    pub fn size(&self) -> usize {
        self.variables.len() + 1
    }

    pub fn id(&self, i: usize, j: usize) -> usize {
        self.ids[i * self.size() + j]
    }

    /// Monomials `(1, x_1, ..., x_s)` labelling the rows.
    pub fn basis(&self) -> Vec<MultilinearPoly> {
        std::iter::once(MultilinearPoly::constant(1.0))
            .chain(self.variables.iter().map(|&v| MultilinearPoly::var(v)))
            .collect()
    }
}

/// Linear functional `L_y(p) = Σ coef · y_id` over moment ids, sorted by id.
pub type MomentFunctional = Vec<(usize, f64)>;

#[derive(Clone, Debug, PartialEq)]
pub struct MomentInequality {
    /// Position in the instance's inequality list.
    pub source: usize,
    pub family: Family,
    pub layer: usize,
    pub neuron: usize,
    pub functional: MomentFunctional,
}

/// Order-1 sparse moment relaxation: `min L_y(f)` subject to PSD clique
/// blocks and `L_y(g) >= 0` for every inequality.
#[derive(Clone, Debug)]
pub struct MomentSdp {
    pub kind: EncodingKind,
    pub index: MomentIndex,
    pub blocks: Vec<MomentBlock>,
    pub inequalities: Vec<MomentInequality>,
    pub objective: MomentFunctional,
}

impl MomentSdp {
    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(MomentBlock::size).collect()
    }

    /// Number of free moments (all ids except the constant).
    pub fn free_moments(&self) -> usize {
        self.index.len() - 1
    }

    /// Evaluates `L_y` for a full moment vector (`y[0]` must be 1).
    pub fn apply(functional: &MomentFunctional, y: &[f64]) -> f64 {
        functional.iter().map(|&(id, c)| c * y[id]).sum()
    }

    /// Fills block `k` from a moment vector.
    pub fn block_matrix(&self, k: usize, y: &[f64]) -> Vec<Vec<f64>> {
        let b = &self.blocks[k];
        let s = b.size();
        (0..s)
            .map(|i| (0..s).map(|j| y[b.id(i, j)]).collect())
            .collect()
    }
}

/// `L_y(p)` for a polynomial whose monomials are all indexed.
pub fn functional(index: &MomentIndex, p: &MultilinearPoly) -> Result<MomentFunctional, SdpError> {
    let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
    for (m, &c) in p.terms() {
        let id = index
            .id(m)
            .ok_or_else(|| SdpError::Uncovered(m.to_string()))?;
        *acc.entry(id).or_default() += c;
    }
    Ok(acc.into_iter().filter(|&(_, c)| c != 0.0).collect())
}

pub fn assemble_moment_sdp(
    instance: &VerificationInstance,
    cliques: &[Clique],
) -> Result<MomentSdp, SdpError> {
    if !matches!(
        instance.kind,
        EncodingKind::Standard | EncodingKind::Tightened
    ) {
        return Err(SdpError::WrongEncoding(instance.kind));
    }
    let index = MomentIndex::from_cliques(cliques);
    let blocks = cliques
        .iter()
        .map(|c| {
            let basis: Vec<Monomial> = std::iter::once(Monomial::one())
                .chain(c.variables.iter().map(|&v| Monomial::var(v)))
                .collect();
            let mut ids = Vec::with_capacity(basis.len() * basis.len());
            for a in &basis {
                for b in &basis {
                    ids.push(index.id(&a.mul(b)).expect("clique monomials are indexed"));
                }
            }
            MomentBlock {
                clique: c.id,
                variables: c.variables.clone(),
                ids,
            }
        })
        .collect();
    let inequalities = instance
        .constraints
        .inequalities
        .iter()
        .enumerate()
        .map(|(source, c)| {
            Ok(MomentInequality {
                source,
                family: c.family,
                layer: c.layer,
                neuron: c.neuron,
                functional: functional(&index, &c.poly)?,
            })
        })
        .collect::<Result<Vec<_>, SdpError>>()?;
    let objective = functional(&index, instance.objective())?;
    Ok(MomentSdp {
        kind: instance.kind,
        index,
        blocks,
        inequalities,
        objective,
    })
}

/// Moment vector of the point measure at `value` (rank-one moments).
pub fn point_moments(index: &MomentIndex, value: impl Fn(VariableId) -> f64) -> Vec<f64> {
    index
        .monomials()
        .iter()
        .map(|m| m.eval::<f64>(|v| Some(value(v))).expect("total assignment"))
        .collect()
}
