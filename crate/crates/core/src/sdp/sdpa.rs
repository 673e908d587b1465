//! Sparse SDPA (`.dat-s`) export of the moment relaxation.
//!
//! The relaxation `min L_y(f)` subject to `M_k(y) ⪰ 0` and `L_y(g) >= 0` is
//! written in SDPA primal form `min c'x` subject to `Σ F_i x_i - F_0 ⪰ 0`, with
//! one PSD block per clique followed by a diagonal block for the inequalities.

use std::io::Write;
use std::path::Path;

use super::{MomentSdp, SdpError};

#[derive(Clone, Debug, PartialEq)]
pub struct SdpaProblem {
    /// Number of free variables `m`.
    pub m: usize,
    /// Positive sizes are symmetric blocks, negative sizes diagonal blocks.
    pub block_sizes: Vec<i64>,
    pub c: Vec<f64>,
    /// `(matrix, block, i, j, value)`, 1-based, `i <= j`, sorted.
    pub entries: Vec<(usize, usize, usize, usize, f64)>,
    /// Constant dropped from the objective.
    pub objective_constant: f64,
}

pub fn to_sdpa(msdp: &MomentSdp) -> Result<SdpaProblem, SdpError> {
    let m = msdp.free_moments();
    if m == 0 {
        return Err(SdpError::NothingToExport);
    }
    let mut c = vec![0.0; m];
    let mut objective_constant = 0.0;
    for &(id, v) in &msdp.objective {
        if id == 0 {
            objective_constant = v;
        } else {
            c[id - 1] = v;
        }
    }
    let mut entries = Vec::new();
    let mut block_sizes = Vec::new();
    for (k, b) in msdp.blocks.iter().enumerate() {
        block_sizes.push(b.size() as i64);
        for i in 0..b.size() {
            for j in i..b.size() {
                match b.id(i, j) {
                    0 => entries.push((0, k + 1, i + 1, j + 1, -1.0)),
                    id => entries.push((id, k + 1, i + 1, j + 1, 1.0)),
                }
            }
        }
    }
    if !msdp.inequalities.is_empty() {
        let blk = msdp.blocks.len() + 1;
        block_sizes.push(-(msdp.inequalities.len() as i64));
        for (r, g) in msdp.inequalities.iter().enumerate() {
            for &(id, v) in &g.functional {
                let v = if id == 0 { -v } else { v };
                entries.push((id, blk, r + 1, r + 1, v));
            }
        }
    }
    entries.sort_by(|a, b| (a.0, a.1, a.2, a.3).cmp(&(b.0, b.1, b.2, b.3)));
    Ok(SdpaProblem {
        m,
        block_sizes,
        c,
        entries,
        objective_constant,
    })
}

pub fn write_sdpa(p: &SdpaProblem, out: &mut impl Write) -> Result<(), SdpError> {
    let mut s = String::new();
    s.push_str("* order-1 sparse moment relaxation; variables are pseudo-moments\n");
    s.push_str(&format!("* objective constant: {}\n", p.objective_constant));
    s.push_str(&format!("{}\n{}\n", p.m, p.block_sizes.len()));
    let sizes: Vec<String> = p.block_sizes.iter().map(i64::to_string).collect();
    s.push_str(&sizes.join(" "));
    s.push('\n');
    let c: Vec<String> = p.c.iter().map(f64::to_string).collect();
    s.push_str(&c.join(" "));
    s.push('\n');
    for &(mat, blk, i, j, v) in &p.entries {
        s.push_str(&format!("{mat} {blk} {i} {j} {v}\n"));
    }
    out.write_all(s.as_bytes())?;
    Ok(())
}

pub fn export_sdpa(msdp: &MomentSdp, path: impl AsRef<Path>) -> Result<(), SdpError> {
    let p = to_sdpa(msdp)?;
    let mut buf = Vec::new();
    write_sdpa(&p, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn read_sdpa(text: &str) -> Result<SdpaProblem, SdpError> {
    let bad = |m: String| SdpError::SdpaParse(m);
    let mut objective_constant = 0.0;
    let mut tokens = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix('*').or_else(|| line.strip_prefix('"')) {
            if let Some(v) = rest.trim().strip_prefix("objective constant:") {
                objective_constant = v.trim().parse().map_err(|e| bad(format!("{v:?}: {e}")))?;
            }
            continue;
        }
        tokens.extend(
            line.split(|ch: char| ch.is_whitespace() || matches!(ch, ',' | '{' | '}' | '(' | ')'))
                .filter(|t| !t.is_empty())
                .map(str::to_string),
        );
    }
    let mut it = tokens.into_iter();
    let mut next = |what: &str| it.next().ok_or_else(|| bad(format!("missing {what}")));
    let m: usize = next("m")?.parse().map_err(|e| bad(format!("m: {e}")))?;
    let nblocks: usize = next("block count")?
        .parse()
        .map_err(|e| bad(format!("block count: {e}")))?;
    let mut block_sizes = Vec::with_capacity(nblocks);
    for _ in 0..nblocks {
        block_sizes.push(
            next("block size")?
                .parse()
                .map_err(|e| bad(format!("block size: {e}")))?,
        );
    }
    let mut c = Vec::with_capacity(m);
    for _ in 0..m {
        c.push(
            next("objective")?
                .parse()
                .map_err(|e| bad(format!("objective: {e}")))?,
        );
    }
    let mut entries = Vec::new();
    loop {
        let Ok(mat) = next("entry") else { break };
        let parse_idx = |t: String| {
            t.parse::<usize>()
                .map_err(|e| bad(format!("index {t:?}: {e}")))
        };
        let mat = parse_idx(mat)?;
        let blk = parse_idx(next("block")?)?;
        let i = parse_idx(next("row")?)?;
        let j = parse_idx(next("column")?)?;
        let v: f64 = next("value")?
            .parse()
            .map_err(|e| bad(format!("value: {e}")))?;
        if mat > m || blk == 0 || blk > nblocks {
            return Err(bad(format!("entry ({mat}, {blk}, {i}, {j}) out of range")));
        }
        entries.push((mat, blk, i.min(j), i.max(j), v));
    }
    entries.sort_by(|a, b| (a.0, a.1, a.2, a.3).cmp(&(b.0, b.1, b.2, b.3)));
    Ok(SdpaProblem {
        m,
        block_sizes,
        c,
        entries,
        objective_constant,
    })
}
