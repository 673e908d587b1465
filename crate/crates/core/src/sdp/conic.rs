use nalgebra::DMatrix;
use serde::Serialize;

use crate::encode::{linear_parts, VerificationInstance};
use crate::poly::{Monomial, VariableId};

use super::{MomentSdp, SdpError};

/// Cone product `{0}^zero × R+^nonneg × S+^{psd[0]} × ...`, in that row order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConeSpec {
    pub zero: usize,
    pub nonneg: usize,
    pub psd: Vec<usize>,
}

impl ConeSpec {
    pub fn rows(&self) -> usize {
        self.zero + self.nonneg + self.psd.iter().map(|&s| svec_len(s)).sum::<usize>()
    }
}

pub fn svec_len(s: usize) -> usize {
    s * (s + 1) / 2
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RowLabel {
    /// Position in the source instance's inequality list.
    Inequality(usize),
    Block {
        block: usize,
        i: usize,
        j: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockInfo {
    pub clique: usize,
    pub variables: Vec<VariableId>,
}

/// `min c'x + c0` subject to `A x + s = b`, `s ∈ K`.
///
/// PSD blocks use the scaled upper-triangular vectorization (column by
/// column, off-diagonals times `sqrt 2`), so inner products are preserved.
#[derive(Clone, Debug, PartialEq)]
pub struct ConicProblem {
    pub c: Vec<f64>,
    pub c0: f64,
    /// `(row, col, value)` sorted by row then column.
    pub a: Vec<(usize, usize, f64)>,
    pub b: Vec<f64>,
    pub cones: ConeSpec,
    /// Monomial carried by each variable.
    pub columns: Vec<Monomial>,
    pub rows: Vec<RowLabel>,
    pub blocks: Vec<BlockInfo>,
}

impl ConicProblem {
    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    pub fn validate(&self) -> Result<(), SdpError> {
        let m = self.cones.rows();
        if self.b.len() != m || self.rows.len() != m {
            return Err(SdpError::Malformed(format!(
                "{} rows for cone dimension {m}",
                self.b.len()
            )));
        }
        if self.columns.len() != self.c.len() {
            return Err(SdpError::Malformed("column bookkeeping length".into()));
        }
        if self.cones.psd.iter().any(|&s| s == 0) {
            return Err(SdpError::Malformed("empty PSD block".into()));
        }
        if let Some(&(r, c, _)) = self
            .a
            .iter()
            .find(|&&(r, c, _)| r >= m || c >= self.c.len())
        {
            return Err(SdpError::Malformed(format!(
                "entry ({r}, {c}) out of range"
            )));
        }
        Ok(())
    }

    /// `A x`
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_rows()];
        for &(r, c, v) in &self.a {
            out[r] += v * x[c];
        }
        out
    }

    /// `A' y`
    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_vars()];
        for &(r, c, v) in &self.a {
            out[c] += v * y[r];
        }
        out
    }

    /// Row ranges of each PSD block.
    pub fn psd_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = self.cones.zero + self.cones.nonneg;
        self.cones
            .psd
            .iter()
            .map(|&s| {
                let r = start..start + svec_len(s);
                start = r.end;
                r
            })
            .collect()
    }
}

/// Position of `(i, j)`, `i <= j`, in the vectorization of a size-`s` block.
pub fn svec_index(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    j * (j + 1) / 2 + i
}

pub fn svec_to_matrix(v: &[f64], s: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(s, s);
    for j in 0..s {
        for i in 0..=j {
            let x = v[svec_index(i, j)];
            if i == j {
                m[(i, i)] = x;
            } else {
                m[(i, j)] = x / std::f64::consts::SQRT_2;
                m[(j, i)] = m[(i, j)];
            }
        }
    }
    m
}

pub fn matrix_to_svec(m: &DMatrix<f64>, out: &mut [f64]) {
    let s = m.nrows();
    for j in 0..s {
        for i in 0..=j {
            out[svec_index(i, j)] = if i == j {
                m[(i, i)]
            } else {
                (m[(i, j)] + m[(j, i)]) * std::f64::consts::FRAC_1_SQRT_2
            };
        }
    }
}

/// Conic form of the moment relaxation. Variables are the moments with ids
/// `1..`; the constant moment is folded into `b`.
pub fn to_conic(msdp: &MomentSdp) -> ConicProblem {
    let n = msdp.free_moments();
    let mut c = vec![0.0; n];
    let mut c0 = 0.0;
    for &(id, v) in &msdp.objective {
        if id == 0 {
            c0 = v;
        } else {
            c[id - 1] = v;
        }
    }
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut rows = Vec::new();
    for g in &msdp.inequalities {
        let r = b.len();
        let mut rhs = 0.0;
        for &(id, v) in &g.functional {
            if id == 0 {
                rhs = v;
            } else {
                a.push((r, id - 1, -v));
            }
        }
        b.push(rhs);
        rows.push(RowLabel::Inequality(g.source));
    }
    let mut blocks = Vec::new();
    for (k, blk) in msdp.blocks.iter().enumerate() {
        let s = blk.size();
        let base = b.len();
        b.resize(base + svec_len(s), 0.0);
        rows.resize(base + svec_len(s), RowLabel::Inequality(usize::MAX));
        for j in 0..s {
            for i in 0..=j {
                let r = base + svec_index(i, j);
                let scale = if i == j {
                    1.0
                } else {
                    std::f64::consts::SQRT_2
                };
                match blk.id(i, j) {
                    0 => b[r] = scale,
                    id => a.push((r, id - 1, -scale)),
                }
                rows[r] = RowLabel::Block { block: k, i, j };
            }
        }
        blocks.push(BlockInfo {
            clique: blk.clique,
            variables: blk.variables.clone(),
        });
    }
    a.sort_by_key(|&(r, col, _)| (r, col));
    ConicProblem {
        c,
        c0,
        a,
        b,
        cones: ConeSpec {
            zero: 0,
            nonneg: msdp.inequalities.len(),
            psd: msdp.block_sizes(),
        },
        columns: msdp.index.monomials()[1..].to_vec(),
        rows,
        blocks,
    }
}

/// Conic form of a linear instance: one variable per network variable and
/// one nonnegative row per inequality.
pub fn linear_conic(instance: &VerificationInstance) -> Result<ConicProblem, SdpError> {
    if !instance.is_linear() {
        return Err(SdpError::WrongEncoding(instance.kind));
    }
    let vars = instance.variables();
    let col = |v: VariableId| vars.binary_search(&v).ok();
    let (obj, c0) = linear_parts(instance.objective());
    let mut c = vec![0.0; vars.len()];
    for (v, coef) in obj {
        c[col(v).ok_or_else(|| SdpError::Uncovered(v.to_string()))?] += coef;
    }
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut rows = Vec::new();
    for (r, g) in instance.constraints.inequalities.iter().enumerate() {
        let (lin, g0) = linear_parts(&g.poly);
        for (v, coef) in lin {
            a.push((
                r,
                col(v).ok_or_else(|| SdpError::Uncovered(v.to_string()))?,
                -coef,
            ));
        }
        b.push(g0);
        rows.push(RowLabel::Inequality(r));
    }
    a.sort_by_key(|&(r, col, _)| (r, col));
    Ok(ConicProblem {
        c,
        c0,
        a,
        b,
        cones: ConeSpec {
            zero: 0,
            nonneg: rows.len(),
            psd: Vec::new(),
        },
        columns: vars.iter().map(|&v| Monomial::var(v)).collect(),
        rows,
        blocks: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svec_round_trip() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0]);
        let mut v = vec![0.0; 6];
        matrix_to_svec(&m, &mut v);
        let back = svec_to_matrix(&v, 3);
        assert!((back - &m).norm() < 1e-14);
        // inner product preserved
        let ip: f64 = v.iter().map(|x| x * x).sum();
        assert!((ip - m.norm_squared()).abs() < 1e-12);
    }

    #[test]
    fn svec_index_layout() {
        assert_eq!(svec_index(0, 0), 0);
        assert_eq!(svec_index(0, 1), 1);
        assert_eq!(svec_index(1, 1), 2);
        assert_eq!(svec_index(2, 0), 3);
    }
}
