//! Homogeneous self-dual embedding solved by operator splitting.
//!
//! Iterates `u = (x, y, τ)` and `v = (r, s, κ)` with
//! `ũ = (R + Q)⁻¹ R (u + v)`, `u⁺ = Π(αũ + (1-α)u - v)`, `v⁺ = v - αũ - (1-α)u + u⁺`,
//! where `Q = [[0, A', c], [-A, 0, b], [-c', -b', 0]]` and `Π` projects onto
//! `R^n × K* × R+`, and `R = diag(ρ_x I, r_y I, 1)`. `r_y` is rebalanced from
//! the ratio of primal to dual residuals, with `v_y` rescaled so the implied
//! slack is unchanged. All reductions run in a fixed order.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{meets_tolerance, residuals, SolveOptions, SolveStatus};
use crate::sdp::{matrix_to_svec, svec_to_matrix, ConicProblem};

const ALPHA: f64 = 1.6;
const RHO_X: f64 = 1e-3;
const RUIZ_PASSES: usize = 25;
const CHECK_EVERY: usize = 10;
const SCALE_BOUNDS: (f64, f64) = (1e-4, 1e4);
const ADAPT_MIN_GAP: usize = 100;
const ADAPT_FACTOR: f64 = 3.0;
const RY_BOUNDS: (f64, f64) = (1e-6, 1e6);

struct Sparse {
    rows: Vec<Vec<(usize, f64)>>,
    n: usize,
}

impl Sparse {
    fn mul(&self, x: &[f64], out: &mut [f64]) {
        for (r, row) in self.rows.iter().enumerate() {
            out[r] = row.iter().map(|&(c, v)| v * x[c]).sum();
        }
    }

    fn mul_t(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                out[c] += v * y[r];
            }
        }
    }

    fn gram(&self) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.n, self.n);
        for row in &self.rows {
            for &(i, a) in row {
                for &(j, b) in row {
                    g[(i, j)] += a * b;
                }
            }
        }
        g
    }
}

/// Cone layout in row order: `(start, end, psd size or 0)`.
fn segments(p: &ConicProblem) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    let lin = p.cones.zero + p.cones.nonneg;
    for r in 0..lin {
        out.push((r, r + 1, 0));
    }
    for (range, &s) in p.psd_ranges().into_iter().zip(&p.cones.psd) {
        out.push((range.start, range.end, s));
    }
    out
}

struct Scaled {
    a: Sparse,
    b: Vec<f64>,
    c: Vec<f64>,
    d: Vec<f64>,
    e: Vec<f64>,
    sigma_b: f64,
    sigma_c: f64,
}

fn scale(p: &ConicProblem, segs: &[(usize, usize, usize)], on: bool) -> Scaled {
    let (m, n) = (p.num_rows(), p.num_vars());
    let mut d = vec![1.0; m];
    let mut e = vec![1.0; n];
    let mut entries = p.a.clone();
    let clamp = |x: f64| x.clamp(SCALE_BOUNDS.0, SCALE_BOUNDS.1);
    if on {
        for _ in 0..RUIZ_PASSES {
            let mut row_max = vec![0.0f64; m];
            let mut col_max = vec![0.0f64; n];
            for &(r, c, v) in &entries {
                row_max[r] = row_max[r].max(v.abs());
                col_max[c] = col_max[c].max(v.abs());
            }
            let mut dr = vec![1.0; m];
            for &(start, end, _) in segs {
                let mx = row_max[start..end].iter().cloned().fold(0.0, f64::max);
                if mx > 0.0 {
                    let f = clamp(d[start] / mx.sqrt()) / d[start];
                    for i in start..end {
                        dr[i] = f;
                    }
                }
            }
            let ec: Vec<f64> = (0..n)
                .map(|j| {
                    if col_max[j] > 0.0 {
                        clamp(e[j] / col_max[j].sqrt()) / e[j]
                    } else {
                        1.0
                    }
                })
                .collect();
            for t in entries.iter_mut() {
                t.2 *= dr[t.0] * ec[t.1];
            }
            for i in 0..m {
                d[i] *= dr[i];
            }
            for j in 0..n {
                e[j] *= ec[j];
            }
        }
    }
    let mut rows = vec![Vec::new(); m];
    for &(r, c, v) in &entries {
        rows[r].push((c, v));
    }
    let a = Sparse { rows, n };
    let mut b: Vec<f64> = (0..m).map(|i| d[i] * p.b[i]).collect();
    let mut c: Vec<f64> = (0..n).map(|j| e[j] * p.c[j]).collect();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (sigma_b, sigma_c) = if on {
        let mut row_norm = vec![0.0; m];
        let mut col_norm = vec![0.0; n];
        for &(r, cc, v) in &entries {
            row_norm[r] += v * v;
            col_norm[cc] += v * v;
        }
        let mean = |v: &[f64]| {
            if v.is_empty() {
                1.0
            } else {
                v.iter().map(|x| x.sqrt()).sum::<f64>() / v.len() as f64
            }
        };
        let sb = mean(&row_norm) / norm(&b).max(1e-4);
        let sc = mean(&col_norm) / norm(&c).max(1e-4);
        (clamp(sb), clamp(sc))
    } else {
        (1.0, 1.0)
    };
    b.iter_mut().for_each(|x| *x *= sigma_b);
    c.iter_mut().for_each(|x| *x *= sigma_c);
    Scaled {
        a,
        b,
        c,
        d,
        e,
        sigma_b,
        sigma_c,
    }
}

/// Projection onto `K*` (self-dual cones; zero rows map to free rows).
fn project_dual(y: &mut [f64], segs: &[(usize, usize, usize)], zero: usize) {
    for &(start, end, s) in segs {
        if s == 0 {
            if start >= zero {
                y[start] = y[start].max(0.0);
            }
        } else {
            project_psd(&mut y[start..end], s);
        }
    }
}

fn project_psd(v: &mut [f64], s: usize) {
    if s == 1 {
        v[0] = v[0].max(0.0);
        return;
    }
    let m = svec_to_matrix(v, s);
    let eig = SymmetricEigen::new(m);
    if eig.eigenvalues.iter().all(|&l| l >= 0.0) {
        return;
    }
    let mut out = DMatrix::zeros(s, s);
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        if l > 0.0 {
            let q = eig.eigenvectors.column(k);
            out += l * q * q.transpose();
        }
    }
    matrix_to_svec(&out, v);
}

struct LinearSystem {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    ry: f64,
    g: Vec<f64>,
    hg: f64,
}

impl LinearSystem {
    fn new(sc: &Scaled, gram: &DMatrix<f64>, ry: f64) -> Self {
        let n = sc.c.len();
        let mut k = gram / ry;
        for i in 0..n {
            k[(i, i)] += RHO_X;
        }
        let chol = nalgebra::Cholesky::new(k).expect("rho_x I + A'A / r_y is positive definite");
        let mut sys = Self {
            chol,
            ry,
            g: Vec::new(),
            hg: 0.0,
        };
        let (gx, gy) = sys.solve_m(
            sc,
            &sc.c.iter().map(|v| v / RHO_X).collect::<Vec<_>>(),
            &sc.b.iter().map(|v| v / ry).collect::<Vec<_>>(),
        );
        sys.hg = dot(&sc.c, &gx) + dot(&sc.b, &gy);
        sys.g = gx.into_iter().chain(gy).collect();
        sys
    }

    /// Solves `[[ρI, A'], [-A, r_y I]] (x, y) = (ρ a1, r_y a2)`.
    fn solve_m(&self, sc: &Scaled, a1: &[f64], a2: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = a1.len();
        let mut at = vec![0.0; n];
        sc.a.mul_t(a2, &mut at);
        let rhs = DVector::from_iterator(n, (0..n).map(|j| RHO_X * a1[j] - at[j]));
        let x = self.chol.solve(&rhs);
        let x: Vec<f64> = x.iter().cloned().collect();
        let mut ax = vec![0.0; a2.len()];
        sc.a.mul(&x, &mut ax);
        let y = (0..a2.len()).map(|i| a2[i] + ax[i] / self.ry).collect();
        (x, y)
    }
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

type Iterate = (SolveStatus, usize, Vec<f64>, Vec<f64>, Vec<f64>);

pub(super) fn run(p: &ConicProblem, opts: &SolveOptions) -> Iterate {
    let (m, n) = (p.num_rows(), p.num_vars());
    let segs = segments(p);
    let sc = scale(p, &segs, opts.scaling);
    let gram = sc.a.gram();
    let mut sys = LinearSystem::new(&sc, &gram, 1.0);
    let (mut last_adapt, mut adapt_gap) = (0, ADAPT_MIN_GAP);
    let (mut log_ratio, mut samples) = (0.0, 0usize);
    let l = n + m + 1;

    let mut u = vec![0.0; l];
    let mut v = vec![0.0; l];
    u[l - 1] = 1.0;
    v[l - 1] = 0.0;
    if opts.seed != 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        for x in &mut u[..n + m] {
            *x = rng.random_range(-1e-3..1e-3);
        }
        project_dual(&mut u[n..n + m], &segs, p.cones.zero);
    }

    let unscale = |u: &[f64], v: &[f64], tau: f64, ry: f64| {
        let x: Vec<f64> = (0..n)
            .map(|j| sc.e[j] * u[j] / (tau * sc.sigma_b))
            .collect();
        let y: Vec<f64> = (0..m)
            .map(|i| sc.d[i] * u[n + i] / (tau * sc.sigma_c))
            .collect();
        let s: Vec<f64> = (0..m)
            .map(|i| ry * v[n + i] / (sc.d[i] * tau * sc.sigma_b))
            .collect();
        (x, y, s)
    };

    let mut ut = vec![0.0; l];
    let mut w = vec![0.0; l];
    let mut it = 0;
    while it < opts.max_iter {
        it += 1;
        for k in 0..l {
            w[k] = u[k] + v[k];
        }
        let (px, py) = sys.solve_m(&sc, &w[..n], &w[n..n + m]);
        let hp = dot(&sc.c, &px) + dot(&sc.b, &py);
        let tau = (w[l - 1] + hp) / (1.0 + sys.hg);
        for k in 0..n {
            ut[k] = px[k] - tau * sys.g[k];
        }
        for k in 0..m {
            ut[n + k] = py[k] - tau * sys.g[n + k];
        }
        ut[l - 1] = tau;
        for k in 0..l {
            ut[k] = ALPHA * ut[k] + (1.0 - ALPHA) * u[k];
        }
        for k in 0..l {
            u[k] = ut[k] - v[k];
        }
        project_dual(&mut u[n..n + m], &segs, p.cones.zero);
        u[l - 1] = u[l - 1].max(0.0);
        for k in 0..l {
            v[k] += u[k] - ut[k];
        }

        if it % CHECK_EVERY == 0 || it == opts.max_iter {
            let tau = u[l - 1];
            if tau > 1e-12 {
                let (x, y, s) = unscale(&u, &v, tau, sys.ry);
                let r = residuals(p, &x, &y, &s);
                let pobj = dot(&p.c, &x) + p.c0;
                if meets_tolerance(&r, pobj, opts.tol) {
                    return (SolveStatus::Optimal, it, x, y, s);
                }
                if r.primal > 0.0 && r.dual > 0.0 {
                    log_ratio += 0.5 * (r.primal / r.dual).ln();
                    samples += 1;
                }
            }
            if let Some(status) = infeasibility(p, &sc, &u, &v, sys.ry, n, m, opts.tol) {
                let (x, y, s) = unscale(&u, &v, 1.0, sys.ry);
                return (status, it, x, y, s);
            }
            if it - last_adapt >= adapt_gap && samples > 0 {
                let ratio = (log_ratio / samples as f64).exp();
                if !(1.0 / ADAPT_FACTOR..=ADAPT_FACTOR).contains(&ratio) {
                    let ry = (sys.ry / ratio).clamp(RY_BOUNDS.0, RY_BOUNDS.1);
                    if ry != sys.ry {
                        for x in &mut v[n..n + m] {
                            *x *= sys.ry / ry;
                        }
                        sys = LinearSystem::new(&sc, &gram, ry);
                    }
                    adapt_gap *= 2;
                }
                last_adapt = it;
                log_ratio = 0.0;
                samples = 0;
            }
        }
    }
    let tau = u[l - 1].max(1e-12);
    let (x, y, s) = unscale(&u, &v, tau, sys.ry);
    (SolveStatus::MaxIter, it, x, y, s)
}

/// Certificates from the unnormalized iterate, checked in original units.
fn infeasibility(
    p: &ConicProblem,
    sc: &Scaled,
    u: &[f64],
    v: &[f64],
    ry: f64,
    n: usize,
    m: usize,
    tol: f64,
) -> Option<SolveStatus> {
    let y: Vec<f64> = (0..m).map(|i| sc.d[i] * u[n + i]).collect();
    let by = dot(&p.b, &y);
    if by < 0.0 {
        let aty = p.apply_transpose(&y);
        if norm(&aty) / -by <= tol {
            return Some(SolveStatus::Infeasible);
        }
    }
    let x: Vec<f64> = (0..n).map(|j| sc.e[j] * u[j]).collect();
    let cx = dot(&p.c, &x);
    if cx < 0.0 {
        let s: Vec<f64> = (0..m).map(|i| ry * v[n + i] / sc.d[i]).collect();
        let ax = p.apply(&x);
        let r: Vec<f64> = (0..m).map(|i| ax[i] + s[i]).collect();
        if norm(&r) / -cx <= tol {
            return Some(SolveStatus::Unbounded);
        }
    }
    None
}
