//! Piecewise-polynomial collocation for two-point boundary-value problems.
//!
//! First-order systems `y' = f(x, y)` on `[a, b]` are discretized by
//! three-stage Lobatto IIIA collocation (the classic fourth-order scheme:
//! a C^1 quartic per subinterval satisfying the ODE at both endpoints and
//! the midpoint).  Midpoint values are condensed out, leaving the Simpson
//! relation
//!
//! ```text
//!   y_{i+1} - y_i = h/6 (f_i + 4 f_m + f_{i+1}),
//!   y_m = (y_i + y_{i+1})/2 - h/8 (f_{i+1} - f_i),
//! ```
//!
//! solved by a damped Newton iteration on a banded Jacobian.  After each
//! Newton solve the true residual `S'(x) - f(x, S(x))` of the collocation
//! polynomial is sampled at off-collocation points; intervals whose scaled
//! residual exceeds the tolerance are subdivided and the solve repeats,
//! up to a hard cap on mesh nodes.
//!
//! Boundary conditions are separated: the first `n_left` components of the
//! residual may depend only on `y(a)`, the rest only on `y(b)`.  This keeps
//! the Jacobian inside a band of half-width ~2*dim and the factorization
//! deterministic.

use crate::band::BandMatrix;
use crate::error::{Error, NewtonDiagnostics, Result};
use crate::mesh::Mesh;

/// Callback type for the system right-hand side `f(x, y) -> dy`.
pub type RhsFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;
/// Callback type for the analytic Jacobian `df/dy` (row-major `dim x dim`).
pub type RhsJacFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;
/// Callback type for boundary residuals `g(y(a), y(b)) -> res` (length `dim`).
pub type BcFn = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;

/// A two-point boundary-value problem in first-order form.
pub struct BvpProblem {
    pub dim: usize,
    pub rhs: Box<RhsFn>,
    /// Analytic Jacobian; finite differences are used when absent.
    pub rhs_jac: Option<Box<RhsJacFn>>,
    /// Boundary residual; the first `n_left` components must depend only on
    /// `y(a)` and the remaining `dim - n_left` only on `y(b)`.
    pub bc: Box<BcFn>,
    pub n_left: usize,
}

impl BvpProblem {
    fn eval_rhs(&self, x: f64, y: &[f64], dy: &mut [f64]) {
        (self.rhs)(x, y, dy);
    }

    fn eval_jac(&self, x: f64, y: &[f64], jac: &mut [f64], work: &mut [f64]) {
        if let Some(j) = &self.rhs_jac {
            j(x, y, jac);
            return;
        }
        // Central differences, column by column.
        let d = self.dim;
        let (yp, rest) = work.split_at_mut(d);
        let (fp, fm) = rest.split_at_mut(d);
        yp.copy_from_slice(y);
        for c in 0..d {
            let step = (f64::EPSILON).sqrt() * (1.0 + y[c].abs());
            let saved = yp[c];
            yp[c] = saved + step;
            self.eval_rhs(x, yp, fp);
            yp[c] = saved - step;
            self.eval_rhs(x, yp, fm);
            yp[c] = saved;
            for r in 0..d {
                jac[r * d + c] = (fp[r] - fm[r]) / (2.0 * step);
            }
        }
    }
}

/// Controls for [`solve_bvp`].
#[derive(Debug, Clone)]
pub struct BvpOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_nodes: usize,
    /// Disable to solve on the fixed input mesh (used by order studies).
    pub adaptive: bool,
    pub max_newton_iter: usize,
    pub max_refinements: usize,
    /// Damping halvings allowed per Newton step (8 is a strong line
    /// search; 2 mimics solvers with a weak one, which can hop between
    /// nearby solution basins instead of converging in place).
    pub newton_max_halvings: usize,
}

impl Default for BvpOptions {
    fn default() -> Self {
        BvpOptions {
            rtol: 1e-10,
            atol: 1e-10,
            max_nodes: crate::mesh::DEFAULT_MAX_NODES,
            adaptive: true,
            max_newton_iter: 40,
            max_refinements: 60,
            newton_max_halvings: 8,
        }
    }
}

/// Converged collocation solution with its continuous extension.
#[derive(Debug, Clone)]
pub struct BvpSolution {
    pub dim: usize,
    pub mesh: Mesh,
    /// Node states, `(len) x dim` flattened.
    pub states: Vec<f64>,
    /// `f` at the nodes (same layout).
    pub f_nodes: Vec<f64>,
    /// Condensed midpoint states per interval, `(len-1) x dim`.
    pub y_mid: Vec<f64>,
    /// Max relative residual `|r| / max(1, |y|, |f|)` over sample points.
    pub residual: f64,
    pub newton_iterations: usize,
    pub rtol: f64,
    pub atol: f64,
}

impl BvpSolution {
    pub fn len(&self) -> usize {
        self.mesh.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn component(&self, c: usize) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.states[i * self.dim + c])
            .collect()
    }

    fn interval_of(&self, x: f64) -> usize {
        let nodes = self.mesh.nodes();
        match nodes.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(nodes.len() - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(nodes.len() - 2),
        }
    }

    /// Evaluate the collocation polynomial at `x`.
    pub fn eval(&self, x: f64, out: &mut [f64]) {
        self.eval_with_deriv(x, out, None);
    }

    pub fn eval_vec(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval(x, &mut out);
        out
    }

    /// Evaluate the interpolant and, optionally, its first derivative.
    pub fn eval_with_deriv(&self, x: f64, out: &mut [f64], mut deriv: Option<&mut [f64]>) {
        let i = self.interval_of(x);
        let nodes = self.mesh.nodes();
        let h = nodes[i + 1] - nodes[i];
        let tau = ((x - nodes[i]) / h).clamp(0.0, 1.0);
        let d = self.dim;
        for c in 0..d {
            let a = self.states[i * d + c];
            let b = self.states[(i + 1) * d + c];
            let m = self.y_mid[i * d + c];
            let s0 = h * self.f_nodes[i * d + c];
            let s1 = h * self.f_nodes[(i + 1) * d + c];
            // Quartic through (0,a), (1/2,m), (1,b) with slopes s0, s1.
            let u = 16.0 * m - 11.0 * a - 5.0 * b - 4.0 * s0 + s1;
            let v = -32.0 * m + 18.0 * a + 14.0 * b + 5.0 * s0 - 3.0 * s1;
            let w = 16.0 * m - 8.0 * a - 8.0 * b - 2.0 * s0 + 2.0 * s1;
            out[c] = a + tau * (s0 + tau * (u + tau * (v + tau * w)));
            if let Some(dv) = deriv.as_deref_mut() {
                dv[c] = (s0 + tau * (2.0 * u + tau * (3.0 * v + tau * 4.0 * w))) / h;
            }
        }
    }
}

/// Residual denominators at a sample point: `max(1, |y_c|, |f_c|)` plus the
/// sensitivity of the right-hand side to state perturbations,
/// `sum_q |J_cq| max(1, |y_q|)`.  Residuals below `tol` times this are
/// indistinguishable from the effect of tol-sized state errors, so chasing
/// them (e.g. inside the regularization band of a singular term, where the
/// Jacobian grows like an inverse power of eps) only grinds the mesh.
fn residual_denoms(
    problem: &BvpProblem,
    x: f64,
    y: &[f64],
    f: &[f64],
    jac: &mut [f64],
    work: &mut [f64],
    out: &mut [f64],
) {
    let d = problem.dim;
    problem.eval_jac(x, y, jac, work);
    for c in 0..d {
        let mut sens = 0.0;
        for q in 0..d {
            sens += jac[c * d + q].abs() * 1.0f64.max(y[q].abs());
        }
        out[c] = 1.0f64.max(y[c].abs()).max(f[c].abs()) + sens;
    }
}

struct Workspace {
    dim: usize,
    f_nodes: Vec<f64>,
    y_mid: Vec<f64>,
    f_mid: Vec<f64>,
    residual: Vec<f64>,
}

impl Workspace {
    fn new(dim: usize, n_nodes: usize) -> Self {
        Workspace {
            dim,
            f_nodes: vec![0.0; n_nodes * dim],
            y_mid: vec![0.0; (n_nodes - 1) * dim],
            f_mid: vec![0.0; (n_nodes - 1) * dim],
            residual: vec![0.0; n_nodes * dim],
        }
    }

    /// Fill `f_nodes`, `y_mid`, `f_mid` and the residual vector.
    fn assemble_residual(&mut self, problem: &BvpProblem, nodes: &[f64], x: &[f64]) -> bool {
        let d = self.dim;
        let n = nodes.len();
        for i in 0..n {
            let (lo, hi) = (i * d, (i + 1) * d);
            problem.eval_rhs(nodes[i], &x[lo..hi], &mut self.f_nodes[lo..hi]);
        }
        if self.f_nodes.iter().any(|v| !v.is_finite()) {
            return false;
        }
        let k = problem.n_left;
        {
            let ya = &x[0..d];
            let yb = &x[(n - 1) * d..n * d];
            let mut bc_full = vec![0.0; d];
            (problem.bc)(ya, yb, &mut bc_full);
            self.residual[0..k].copy_from_slice(&bc_full[0..k]);
            self.residual[k + (n - 1) * d..].copy_from_slice(&bc_full[k..]);
        }
        for i in 0..n - 1 {
            let h = nodes[i + 1] - nodes[i];
            let xm = 0.5 * (nodes[i] + nodes[i + 1]);
            let (lo, hi) = (i * d, (i + 1) * d);
            for c in 0..d {
                self.y_mid[lo + c] = 0.5 * (x[lo + c] + x[hi + c])
                    - h / 8.0 * (self.f_nodes[hi + c] - self.f_nodes[lo + c]);
            }
            {
                let (mids, fmids) = (&self.y_mid[lo..hi], &mut self.f_mid[lo..hi]);
                problem.eval_rhs(xm, mids, fmids);
            }
            for c in 0..d {
                self.residual[k + lo + c] = x[hi + c]
                    - x[lo + c]
                    - h / 6.0
                        * (self.f_nodes[lo + c]
                            + 4.0 * self.f_mid[lo + c]
                            + self.f_nodes[hi + c]);
            }
        }
        self.residual.iter().all(|v| v.is_finite())
    }

    /// Scaled max norm of the residual vector; <= 1 means Newton-converged.
    /// Each row's tolerance is floored at the f64 rounding level of its own
    /// assembly so that fine meshes at tight tolerances remain attainable.
    fn scaled_norm(&self, nodes: &[f64], n_left: usize, x: &[f64], rtol: f64, atol: f64) -> f64 {
        let d = self.dim;
        let n = nodes.len();
        let xmax = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let bc_tol = rtol.max(atol).max(64.0 * f64::EPSILON * (1.0 + xmax));
        let mut worst = 0.0f64;
        for j in 0..n_left {
            worst = worst.max(self.residual[j].abs() / bc_tol);
        }
        for j in n_left + (n - 1) * d..n * d {
            worst = worst.max(self.residual[j].abs() / bc_tol);
        }
        for i in 0..n - 1 {
            let h = nodes[i + 1] - nodes[i];
            for c in 0..d {
                let fm = self.f_mid[i * d + c];
                let floor = 16.0
                    * f64::EPSILON
                    * (x[i * d + c].abs() + x[(i + 1) * d + c].abs() + h * fm.abs());
                let tol_r =
                    ((2.0 / 3.0) * h * 0.05 * atol.max(rtol * (1.0 + fm.abs()))).max(floor);
                worst = worst.max(self.residual[n_left + i * d + c].abs() / tol_r);
            }
        }
        worst
    }
}

/// Damped Newton iteration on the collocation equations over a fixed mesh.
fn newton(
    problem: &BvpProblem,
    nodes: &[f64],
    x: &mut Vec<f64>,
    opts: &BvpOptions,
) -> std::result::Result<(Workspace, usize), NewtonDiagnostics> {
    let d = problem.dim;
    let n = nodes.len();
    let k = problem.n_left;
    let kl = k + d - 1;
    let ku = 2 * d - 1 - k.min(d - 1);
    let nun = n * d;
    let mut ws = Workspace::new(d, n);
    let mut jac_i = vec![0.0; d * d];
    let mut jac_m = vec![0.0; d * d];
    let mut jac_i1 = vec![0.0; d * d];
    let mut fd_work = vec![0.0; 3 * d];
    let mut trial = vec![0.0; nun];
    let mut ws_trial = Workspace::new(d, n);
    let mut last_step_norm = f64::NAN;

    let mut ok = ws.assemble_residual(problem, nodes, x);
    for iter in 0..opts.max_newton_iter {
        if !ok {
            return Err(NewtonDiagnostics {
                iterations: iter,
                last_residual: f64::INFINITY,
                last_step_norm,
                mesh_len: n,
            });
        }
        let g0 = ws.scaled_norm(nodes, k, x, opts.rtol, opts.atol);
        if g0 <= 1.0 {
            return Ok((ws, iter));
        }
        // Assemble the banded Jacobian.
        let mut band = BandMatrix::zeros(nun, kl, ku);
        {
            // Boundary rows by finite differences on the bc closure.
            let mut bc0 = vec![0.0; d];
            let mut bc1 = vec![0.0; d];
            let ya: Vec<f64> = x[0..d].to_vec();
            let yb: Vec<f64> = x[(n - 1) * d..].to_vec();
            let mut ya_p = ya.clone();
            let mut yb_p = yb.clone();
            for c in 0..d {
                let step = f64::EPSILON.sqrt() * (1.0 + ya[c].abs());
                ya_p[c] = ya[c] + step;
                (problem.bc)(&ya_p, &yb, &mut bc0);
                ya_p[c] = ya[c] - step;
                (problem.bc)(&ya_p, &yb, &mut bc1);
                ya_p[c] = ya[c];
                for r in 0..k {
                    band.set(r, c, (bc0[r] - bc1[r]) / (2.0 * step));
                }
                let step = f64::EPSILON.sqrt() * (1.0 + yb[c].abs());
                yb_p[c] = yb[c] + step;
                (problem.bc)(&ya, &yb_p, &mut bc0);
                yb_p[c] = yb[c] - step;
                (problem.bc)(&ya, &yb_p, &mut bc1);
                yb_p[c] = yb[c];
                for r in k..d {
                    band.set(
                        k + (n - 1) * d + (r - k),
                        (n - 1) * d + c,
                        (bc0[r] - bc1[r]) / (2.0 * step),
                    );
                }
            }
        }
        for i in 0..n - 1 {
            let h = nodes[i + 1] - nodes[i];
            let xm = 0.5 * (nodes[i] + nodes[i + 1]);
            let (lo, hi) = (i * d, (i + 1) * d);
            problem.eval_jac(nodes[i], &x[lo..hi], &mut jac_i, &mut fd_work);
            problem.eval_jac(nodes[i + 1], &x[hi..hi + d], &mut jac_i1, &mut fd_work);
            problem.eval_jac(xm, &ws.y_mid[lo..hi], &mut jac_m, &mut fd_work);
            // dPhi/dy_i   = -I - h/6 (J_i   + 4 J_m (I/2 + h/8 J_i))
            // dPhi/dy_i+1 =  I - h/6 (J_i+1 + 4 J_m (I/2 - h/8 J_i+1))
            for r in 0..d {
                for c in 0..d {
                    let mut jm_ji = 0.0;
                    let mut jm_ji1 = 0.0;
                    for q in 0..d {
                        jm_ji += jac_m[r * d + q] * jac_i[q * d + c];
                        jm_ji1 += jac_m[r * d + q] * jac_i1[q * d + c];
                    }
                    let eye = if r == c { 1.0 } else { 0.0 };
                    let d_lo = -eye
                        - h / 6.0
                            * (jac_i[r * d + c]
                                + 4.0 * (0.5 * jac_m[r * d + c] + h / 8.0 * jm_ji));
                    let d_hi = eye
                        - h / 6.0
                            * (jac_i1[r * d + c]
                                + 4.0 * (0.5 * jac_m[r * d + c] - h / 8.0 * jm_ji1));
                    band.set(k + lo + r, lo + c, d_lo);
                    band.set(k + lo + r, hi + c, d_hi);
                }
            }
        }
        let lu = match band.lu_factor() {
            Some(lu) => lu,
            None => {
                return Err(NewtonDiagnostics {
                    iterations: iter,
                    last_residual: g0,
                    last_step_norm,
                    mesh_len: n,
                })
            }
        };
        let mut delta = ws.residual.clone();
        for v in delta.iter_mut() {
            *v = -*v;
        }
        lu.solve(&mut delta);
        if delta.iter().any(|v| !v.is_finite()) {
            return Err(NewtonDiagnostics {
                iterations: iter,
                last_residual: g0,
                last_step_norm,
                mesh_len: n,
            });
        }
        // Armijo-style damping with factor halving.  With zero halvings
        // the step is accepted unconditionally (a pure Newton iteration,
        // free to wander between nearby solution basins).
        let unconditional = opts.newton_max_halvings == 0;
        let mut lambda = 1.0f64;
        let mut accepted = false;
        for _ in 0..=opts.newton_max_halvings {
            for j in 0..nun {
                trial[j] = x[j] + lambda * delta[j];
            }
            if ws_trial.assemble_residual(problem, nodes, &trial) {
                let g1 = ws_trial.scaled_norm(nodes, k, &trial, opts.rtol, opts.atol);
                if unconditional || g1 <= (1.0 - 0.25 * lambda) * g0 || g1 <= 1.0 {
                    x.copy_from_slice(&trial);
                    std::mem::swap(&mut ws, &mut ws_trial);
                    last_step_norm = lambda
                        * delta
                            .iter()
                            .zip(x.iter())
                            .fold(0.0f64, |m, (dv, xv)| m.max(dv.abs() / (1.0 + xv.abs())));
                    accepted = true;
                    ok = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(NewtonDiagnostics {
                iterations: iter + 1,
                last_residual: g0,
                last_step_norm,
                mesh_len: n,
            });
        }
    }
    let g = ws.scaled_norm(nodes, k, x, opts.rtol, opts.atol);
    if g <= 1.0 {
        return Ok((ws, opts.max_newton_iter));
    }
    Err(NewtonDiagnostics {
        iterations: opts.max_newton_iter,
        last_residual: g,
        last_step_norm,
        mesh_len: n,
    })
}

/// Interval-wise scaled residual of the collocation polynomial, sampled at
/// the two interior 5-point Lobatto abscissae (not collocation points).
/// An interval counts as resolved when its entry is <= 1.
fn interval_residuals(problem: &BvpProblem, sol: &BvpSolution) -> Vec<f64> {
    let d = sol.dim;
    let nodes = sol.mesh.nodes();
    let s = 0.5 * (3.0f64 / 7.0).sqrt();
    let mut y = vec![0.0; d];
    let mut dy = vec![0.0; d];
    let mut f = vec![0.0; d];
    let mut jac = vec![0.0; d * d];
    let mut work = vec![0.0; 3 * d];
    let mut denoms = vec![0.0; d];
    let mut out = vec![0.0; nodes.len() - 1];
    for i in 0..nodes.len() - 1 {
        let h = nodes[i + 1] - nodes[i];
        let xm = 0.5 * (nodes[i] + nodes[i + 1]);
        let mut worst = 0.0f64;
        for xs in [xm - s * h, xm + s * h] {
            sol.eval_with_deriv(xs, &mut y, Some(&mut dy));
            problem.eval_rhs(xs, &y, &mut f);
            residual_denoms(problem, xs, &y, &f, &mut jac, &mut work, &mut denoms);
            for c in 0..d {
                let r = (dy[c] - f[c]).abs();
                // Roundoff floor: the interpolant derivative cannot be more
                // accurate than eps * state / h.
                let round = 4.0 * f64::EPSILON * 1.0f64.max(y[c].abs()) / h;
                let tol = (sol.atol.max(sol.rtol * denoms[c])).max(round);
                worst = worst.max(r / tol);
            }
        }
        out[i] = worst;
    }
    out
}

/// Per-interval scaled residuals with their left endpoints (diagnostics).
pub fn residual_profile(problem: &BvpProblem, sol: &BvpSolution) -> Vec<(f64, f64)> {
    let eta = interval_residuals(problem, sol);
    sol.mesh.nodes()[..eta.len()]
        .iter()
        .cloned()
        .zip(eta)
        .collect()
}

/// Solve a boundary-value problem by collocation with adaptive refinement.
pub fn solve_bvp(
    problem: &BvpProblem,
    mesh: &Mesh,
    guess: &[f64],
    opts: &BvpOptions,
) -> Result<BvpSolution> {
    if !(opts.rtol > 0.0) || !(opts.atol > 0.0) {
        return Err(Error::Domain("rtol and atol must be positive".into()));
    }
    if guess.len() != mesh.len() * problem.dim {
        return Err(Error::InvalidSpec(format!(
            "guess has {} values for {} nodes x dim {}",
            guess.len(),
            mesh.len(),
            problem.dim
        )));
    }
    if guess.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidSpec("non-finite initial guess".into()));
    }
    let mut nodes = mesh.nodes().to_vec();
    let mut x = guess.to_vec();
    let mut total_iters = 0usize;
    for pass in 0..=opts.max_refinements {
        let (ws, iters) = newton(problem, &nodes, &mut x, opts).map_err(Error::NewtonFailure)?;
        total_iters += iters;
        let sol = build_solution(problem, &nodes, &x, ws, total_iters, opts);
        let eta = interval_residuals(problem, &sol);
        let worst = eta.iter().cloned().fold(0.0f64, f64::max);
        if std::env::var_os("PME4_DEBUG_MESH").is_some() {
            let mut ranked: Vec<(usize, f64)> =
                eta.iter().cloned().enumerate().collect();
            ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
            eprint!("  [mesh pass {pass}] nodes={} iters={iters} top:", nodes.len());
            for (i, e) in ranked.iter().take(4) {
                eprint!("  y={:.6}(h={:.1e})eta={:.2e}", nodes[*i], nodes[*i + 1] - nodes[*i], e);
            }
            eprintln!();
        }
        if worst <= 1.0 || !opts.adaptive {
            return Ok(sol);
        }
        // Equidistribute the residual density (the interior residual of the
        // scheme scales like h^3, so an interval wanting a factor q needs
        // q^{1/3} pieces).  This both refines and coarsens, which keeps the
        // node count from accumulating across warm-started re-solves.  If
        // the redistribution starts cycling near the target, fall back to
        // monotone insert-only splitting, which terminates.
        let new_nodes = if pass < 12 {
            equidistribute(&nodes, &eta, opts.max_nodes)?
        } else {
            let split = split_intervals(&nodes, &eta, 1.0);
            if split.len() > opts.max_nodes {
                return Err(Error::MeshOverflow {
                    needed: split.len(),
                    cap: opts.max_nodes,
                });
            }
            split
        };
        // Interpolate the current solution onto the new mesh.
        let mut xn = vec![0.0; new_nodes.len() * problem.dim];
        for (j, &xj) in new_nodes.iter().enumerate() {
            let d = problem.dim;
            sol.eval(xj, &mut xn[j * d..(j + 1) * d]);
        }
        nodes = new_nodes;
        x = xn;
    }
    Err(Error::Unconverged(format!(
        "adaptive refinement did not settle within {} passes ({} nodes)",
        opts.max_refinements,
        nodes.len()
    )))
}

/// Fresh mesh with node density proportional to the cube root of the
/// per-interval scaled residual, targeting residual 0.5 everywhere.
fn equidistribute(nodes: &[f64], eta: &[f64], max_nodes: usize) -> Result<Vec<f64>> {
    let mut weights: Vec<f64> = eta
        .iter()
        .map(|&e| (e / 0.4).powf(1.0 / 3.0).clamp(0.7, 40.0))
        .collect();
    // Smooth the density a little so neighbouring intervals do not differ
    // wildly (guards the interpolated warm start).
    for _ in 0..2 {
        let prev = weights.clone();
        for i in 0..weights.len() {
            let lo = if i > 0 { prev[i - 1] } else { prev[i] };
            let hi = if i + 1 < prev.len() { prev[i + 1] } else { prev[i] };
            weights[i] = weights[i].max(0.5 * lo).max(0.5 * hi);
        }
    }
    let total: f64 = weights.iter().sum();
    let n_new = (total.ceil() as usize + 1).clamp(nodes.len().min(51), max_nodes + 1);
    if n_new > max_nodes {
        return Err(Error::MeshOverflow {
            needed: n_new,
            cap: max_nodes,
        });
    }
    // Invert the cumulative density at uniform steps.
    let mut out = Vec::with_capacity(n_new);
    out.push(nodes[0]);
    let step = total / (n_new - 1) as f64;
    let mut acc = 0.0;
    let mut i = 0usize;
    for j in 1..n_new - 1 {
        let target = j as f64 * step;
        while i < weights.len() - 1 && acc + weights[i] < target {
            acc += weights[i];
            i += 1;
        }
        let frac = ((target - acc) / weights[i]).clamp(0.0, 1.0);
        out.push(nodes[i] + frac * (nodes[i + 1] - nodes[i]));
    }
    out.push(*nodes.last().unwrap());
    // Guard against degenerate duplicates from rounding.
    out.dedup_by(|a, b| (*a - *b).abs() < 1e-14 * a.abs().max(1.0));
    Ok(out)
}

fn build_solution(
    problem: &BvpProblem,
    nodes: &[f64],
    x: &[f64],
    ws: Workspace,
    newton_iterations: usize,
    opts: &BvpOptions,
) -> BvpSolution {
    let mut sol = BvpSolution {
        dim: ws.dim,
        mesh: Mesh::new(nodes.to_vec(), opts.max_nodes.max(nodes.len())).expect("refined mesh"),
        states: x.to_vec(),
        f_nodes: ws.f_nodes,
        y_mid: ws.y_mid,
        residual: 0.0,
        newton_iterations,
        rtol: opts.rtol,
        atol: opts.atol,
    };
    sol.residual = relative_residual(problem, &sol);
    sol
}

/// Max relative residual `|S' - f| / max(1, |y|, |f|)` sampled at the
/// quarter points of each interval (off-collocation).
pub fn relative_residual(problem: &BvpProblem, sol: &BvpSolution) -> f64 {
    let d = sol.dim;
    let nodes = sol.mesh.nodes();
    let mut y = vec![0.0; d];
    let mut dy = vec![0.0; d];
    let mut f = vec![0.0; d];
    let mut jac = vec![0.0; d * d];
    let mut work = vec![0.0; 3 * d];
    let mut denoms = vec![0.0; d];
    let mut worst = 0.0f64;
    for i in 0..nodes.len() - 1 {
        let h = nodes[i + 1] - nodes[i];
        for tau in [0.25, 0.75] {
            let xs = nodes[i] + tau * h;
            sol.eval_with_deriv(xs, &mut y, Some(&mut dy));
            problem.eval_rhs(xs, &y, &mut f);
            residual_denoms(problem, xs, &y, &f, &mut jac, &mut work, &mut denoms);
            for c in 0..d {
                let round = 4.0 * f64::EPSILON * 1.0f64.max(y[c].abs()) / h;
                let denom = denoms[c].max(round / sol.rtol.max(sol.atol));
                worst = worst.max((dy[c] - f[c]).abs() / denom);
            }
        }
    }
    worst
}

/// Recompute the scaled collocation residual of a solution against a
/// problem at off-collocation sample points (the quarter points).
pub fn residual_norm(solution: &BvpSolution, problem: &BvpProblem) -> f64 {
    relative_residual(problem, solution)
}

fn split_intervals(nodes: &[f64], eta: &[f64], target: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(nodes.len() + eta.len());
    for i in 0..nodes.len() - 1 {
        out.push(nodes[i]);
        if eta[i] > target {
            // The interior residual of the scheme scales like h^3: subdivide
            // enough to bring this interval to target, capped per pass.
            let m = ((eta[i] / target).powf(1.0 / 3.0).ceil() as usize).clamp(2, 4);
            let h = nodes[i + 1] - nodes[i];
            for j in 1..m {
                out.push(nodes[i] + h * j as f64 / m as f64);
            }
        }
    }
    out.push(*nodes.last().unwrap());
    out
}

/// Equidistributing refinement toward `target` (in units of the solution's
/// own scaled-residual criterion).  Old nodes are kept as a subset; an
/// already-resolved solution returns its mesh unchanged.
pub fn refine_mesh(
    solution: &BvpSolution,
    problem: &BvpProblem,
    target: f64,
    max_nodes: usize,
) -> Result<Mesh> {
    let eta = interval_residuals(problem, solution);
    if eta.iter().all(|&e| e <= target) {
        return Ok(solution.mesh.clone());
    }
    let nodes = split_intervals(solution.mesh.nodes(), &eta, target);
    if nodes.len() > max_nodes {
        return Err(Error::MeshOverflow {
            needed: nodes.len(),
            cap: max_nodes,
        });
    }
    Mesh::new(nodes, max_nodes)
}
