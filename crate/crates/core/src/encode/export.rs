//! MPS and LP-format export of the linear encodings.
//!
//! Hidden variables `x ∈ {-1, 1}` are written as `z ∈ {0, 1}` through
//! `x = 2z - 1`. Input variables keep their names and bounds.

use std::fmt::Write as _;
use std::io::Write;

use super::{linear_parts, EncodeError, EncodingKind, VerificationInstance};
use crate::poly::{MultilinearPoly, VariableId};

fn column_name(v: VariableId) -> String {
    if v.is_binary() {
        format!("z{}_{}", v.layer, v.index + 1)
    } else {
        format!("x0_{}", v.index + 1)
    }
}

/// A linear form rewritten over the exported columns: `(coefficients, constant)`.
fn shifted(
    p: &MultilinearPoly,
    column: &dyn Fn(VariableId) -> usize,
    ncols: usize,
) -> (Vec<f64>, f64) {
    let (lin, mut c0) = linear_parts(p);
    let mut coeffs = vec![0.0; ncols];
    for (v, a) in lin {
        if v.is_binary() {
            coeffs[column(v)] += 2.0 * a;
            c0 -= a;
        } else {
            coeffs[column(v)] += a;
        }
    }
    (coeffs, c0)
}

struct Columns {
    vars: Vec<VariableId>,
    n_inputs: usize,
}

impl Columns {
    fn of(inst: &VerificationInstance) -> Self {
        Self {
            vars: inst.variables(),
            n_inputs: inst.net.input_dim(),
        }
    }

    fn index(&self, v: VariableId) -> usize {
        if v.layer == 0 {
            v.index
        } else {
            self.vars[self.n_inputs..]
                .binary_search(&v)
                .map(|i| i + self.n_inputs)
                .expect("hidden variable")
        }
    }
}

fn header(inst: &VerificationInstance, comment: &str) -> String {
    let mut s = String::new();
    let integral = inst.kind == EncodingKind::Milp;
    let _ = writeln!(s, "{comment} BNN verification {} encoding", inst.kind);
    let _ = writeln!(s, "{comment} hidden variables x in {{-1,1}} are columns z{{layer}}_{{index}} with x = 2*z - 1");
    let _ = writeln!(
        s,
        "{comment} z is {} in [0,1]; input columns x0_k carry the region box",
        if integral { "integer" } else { "continuous" }
    );
    let _ = writeln!(s, "{comment} every row reads  sum(a*col) >= rhs");
    let _ = writeln!(s, "{comment} no sign-determination margin is embedded; external MILP solvers may add one (e.g. 1e-7)");
    s
}

/// Writes free-format MPS. The objective constant `c0` is stored as
/// `-c0` on the objective row's RHS, the usual offset convention.
pub fn write_mps(inst: &VerificationInstance, out: &mut impl Write) -> Result<(), EncodeError> {
    if !inst.is_linear() {
        return Err(EncodeError::NotLinear(inst.kind));
    }
    let cols = Columns::of(inst);
    let n = cols.vars.len();
    let col = |v: VariableId| cols.index(v);
    let rows: Vec<(Vec<f64>, f64)> = inst
        .constraints
        .inequalities
        .iter()
        .map(|c| shifted(&c.poly, &col, n))
        .collect();
    let (obj, obj_const) = shifted(inst.objective(), &col, n);

    let mut s = header(inst, "*");
    s.push_str("NAME BNNVERIFY\nROWS\n N OBJ\n");
    for i in 0..rows.len() {
        let _ = writeln!(s, " G R{}", i + 1);
    }
    s.push_str("COLUMNS\n");
    let integral = inst.kind == EncodingKind::Milp;
    let mut in_marker = false;
    for (j, &v) in cols.vars.iter().enumerate() {
        if integral && v.is_binary() && !in_marker {
            s.push_str(" MARKER 'MARKER' 'INTORG'\n");
            in_marker = true;
        }
        let name = column_name(v);
        let mut any = false;
        if obj[j] != 0.0 {
            let _ = writeln!(s, " {name} OBJ {}", obj[j]);
            any = true;
        }
        for (i, (coeffs, _)) in rows.iter().enumerate() {
            if coeffs[j] != 0.0 {
                let _ = writeln!(s, " {name} R{} {}", i + 1, coeffs[j]);
                any = true;
            }
        }
        if !any {
            let _ = writeln!(s, " {name} OBJ 0");
        }
    }
    if in_marker {
        s.push_str(" MARKER 'MARKER' 'INTEND'\n");
    }
    s.push_str("RHS\n");
    if obj_const != 0.0 {
        let _ = writeln!(s, " RHS OBJ {}", -obj_const);
    }
    for (i, (_, c0)) in rows.iter().enumerate() {
        if *c0 != 0.0 {
            let _ = writeln!(s, " RHS R{} {}", i + 1, -c0);
        }
    }
    s.push_str("BOUNDS\n");
    for &v in &cols.vars {
        let name = column_name(v);
        if v.is_binary() {
            let _ = writeln!(s, " UP BND {name} 1");
        } else {
            let _ = writeln!(s, " LO BND {name} {}", inst.region.lower()[v.index]);
            let _ = writeln!(s, " UP BND {name} {}", inst.region.upper()[v.index]);
        }
    }
    s.push_str("ENDATA\n");
    out.write_all(s.as_bytes())?;
    Ok(())
}

/// Writes CPLEX LP format with the same column mapping as [`write_mps`].
pub fn write_lp_format(
    inst: &VerificationInstance,
    out: &mut impl Write,
) -> Result<(), EncodeError> {
    if !inst.is_linear() {
        return Err(EncodeError::NotLinear(inst.kind));
    }
    let cols = Columns::of(inst);
    let n = cols.vars.len();
    let col = |v: VariableId| cols.index(v);
    let expr = |coeffs: &[f64]| {
        let mut e = String::new();
        for (j, &a) in coeffs.iter().enumerate() {
            if a != 0.0 {
                let sign = if a < 0.0 { "-" } else { "+" };
                let _ = write!(e, " {sign} {} {}", a.abs(), column_name(cols.vars[j]));
            }
        }
        if e.is_empty() {
            e.push_str(" 0 ");
            e.push_str(&column_name(cols.vars[0]));
        }
        e
    };
    let mut s = header(inst, "\\");
    let (obj, obj_const) = shifted(inst.objective(), &col, n);
    let _ = writeln!(s, "\\ objective constant: {obj_const}");
    let _ = writeln!(s, "Minimize\n obj:{}", expr(&obj));
    s.push_str("Subject To\n");
    for (i, c) in inst.constraints.inequalities.iter().enumerate() {
        let (coeffs, c0) = shifted(&c.poly, &col, n);
        let _ = writeln!(s, " r{}:{} >= {}", i + 1, expr(&coeffs), -c0);
    }
    s.push_str("Bounds\n");
    for &v in &cols.vars {
        if v.is_binary() {
            let _ = writeln!(s, " 0 <= {} <= 1", column_name(v));
        } else {
            let _ = writeln!(
                s,
                " {} <= {} <= {}",
                inst.region.lower()[v.index],
                column_name(v),
                inst.region.upper()[v.index]
            );
        }
    }
    if inst.kind == EncodingKind::Milp {
        s.push_str("Binaries\n");
        for &v in cols.vars.iter().filter(|v| v.is_binary()) {
            let _ = writeln!(s, " {}", column_name(v));
        }
    }
    s.push_str("End\n");
    out.write_all(s.as_bytes())?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct MpsRow {
    pub name: String,
    pub sense: char,
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// Free-format MPS as read back: enough structure to audit an export.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct MpsProblem {
    pub columns: Vec<String>,
    pub integer: Vec<bool>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub objective: Vec<(usize, f64)>,
    pub objective_rhs: f64,
    pub rows: Vec<MpsRow>,
}

impl MpsProblem {
    pub fn integer_count(&self) -> usize {
        self.integer.iter().filter(|&&b| b).count()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

pub fn read_mps(text: &str) -> Result<MpsProblem, EncodeError> {
    let err = |m: String| EncodeError::MpsParse(m);
    let mut p = MpsProblem::default();
    let mut section = "";
    let mut objective_row = String::new();
    let mut integral = false;
    let mut row_index = std::collections::HashMap::new();
    let num = |t: &str| t.parse::<f64>().map_err(|e| err(format!("{t:?}: {e}")));
    for line in text.lines() {
        if line.starts_with('*') || line.trim().is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if !line.starts_with(' ') {
            section = match toks[0] {
                "NAME" => "NAME",
                "ROWS" => "ROWS",
                "COLUMNS" => "COLUMNS",
                "RHS" => "RHS",
                "BOUNDS" => "BOUNDS",
                "ENDATA" => break,
                other => return Err(err(format!("unknown section {other}"))),
            };
            continue;
        }
        match section {
            "ROWS" => {
                let sense = toks[0].chars().next().unwrap_or('?');
                if sense == 'N' {
                    objective_row = toks[1].to_string();
                } else {
                    row_index.insert(toks[1].to_string(), p.rows.len());
                    p.rows.push(MpsRow {
                        name: toks[1].to_string(),
                        sense,
                        coeffs: Vec::new(),
                        rhs: 0.0,
                    });
                }
            }
            "COLUMNS" => {
                if toks.len() >= 3 && toks[1] == "'MARKER'" {
                    integral = toks[2] == "'INTORG'";
                    continue;
                }
                let j = match p.column(toks[0]) {
                    Some(j) => j,
                    None => {
                        p.columns.push(toks[0].to_string());
                        p.integer.push(integral);
                        p.lower.push(0.0);
                        p.upper.push(f64::INFINITY);
                        p.columns.len() - 1
                    }
                };
                for pair in toks[1..].chunks(2) {
                    let [row, val] = pair else {
                        return Err(err(format!("dangling entry in {line:?}")));
                    };
                    let v = num(val)?;
                    if *row == objective_row {
                        if v != 0.0 {
                            p.objective.push((j, v));
                        }
                    } else {
                        let &i = row_index
                            .get(*row)
                            .ok_or_else(|| err(format!("unknown row {row}")))?;
                        p.rows[i].coeffs.push((j, v));
                    }
                }
            }
            "RHS" => {
                for pair in toks[1..].chunks(2) {
                    let [row, val] = pair else {
                        return Err(err(format!("dangling entry in {line:?}")));
                    };
                    let v = num(val)?;
                    if *row == objective_row {
                        p.objective_rhs = v;
                    } else {
                        let &i = row_index
                            .get(*row)
                            .ok_or_else(|| err(format!("unknown row {row}")))?;
                        p.rows[i].rhs = v;
                    }
                }
            }
            "BOUNDS" => {
                let j = p
                    .column(toks[2])
                    .ok_or_else(|| err(format!("unknown column {}", toks[2])))?;
                match toks[0] {
                    "LO" => p.lower[j] = num(toks[3])?,
                    "UP" => p.upper[j] = num(toks[3])?,
                    "FR" => {
                        p.lower[j] = f64::NEG_INFINITY;
                        p.upper[j] = f64::INFINITY;
                    }
                    other => return Err(err(format!("unsupported bound type {other}"))),
                }
            }
            _ => return Err(err(format!("data outside a section: {line:?}"))),
        }
    }
    Ok(p)
}
