//! Blow-up similarity profile boundary-value problems.
//!
//! The profile `f` of `u = (T-t)^{-1/(p-1)} f(x/(T-t)^beta)` satisfies the
//! quasilinear fourth-order ODE
//!
//! ```text
//!     -(|f|^n f)'''' - beta y f' - f/(p-1) + |f|^{p-1} f = 0.
//! ```
//!
//! All solving happens in the transformed variable `F = |f|^n f`, which
//! turns the equation semilinear with singular factors `|F|^{-alpha}`,
//! `alpha = n/(n+1)`.  Those factors are regularized as
//! `(eps^2 + F^2)^{-alpha/2}` so that a damped Newton iteration is
//! well-defined; `eps` defaults to 1e-10 and is caller-adjustable.
//!
//! Four concrete right-hand sides are provided: the variational form at
//! `p = n+1` (fixed equilibria ±1), the general semilinear form, the
//! normalized form with rescaled equilibria ±1 (used to continue into
//! `p < n+1` without the equilibria diverging), and the `n = inf` sign
//! limit.  Even profiles are solved on `[0, R]` with symmetry conditions
//! at the origin; odd (dipole-type) profiles with antisymmetry conditions.
//! Compactly supported profiles get `F(R) = F'(R) = 0`; for `p > n+1` the
//! profile decays algebraically instead and the right boundary pins the
//! log-derivative structure of that tail.

mod energy;
mod farfield;
mod interface;
mod spatial;

pub use energy::{energy, energy_directional_fd, integrate_reflected, EnergyReport};
pub use farfield::{farfield_eval, final_time_profile, FarField};
pub use interface::{classify, classify_negated, fit_lobe_slope, interface_estimate, InterfaceEstimate};
pub use spatial::{periodic_spatial, SpatialOrbit};

use crate::collocation::{self, BvpOptions, BvpProblem, BvpSolution};
use crate::error::{Error, Result};
use crate::mesh::{Mesh, DEFAULT_MAX_NODES};
use crate::multiindex::MultiIndex;
use crate::params::{ProblemParams, Regime};

/// Which presentation of the profile equation is solved.
///
/// The quasilinear `f`-equation itself is always handled through its
/// semilinear `F = |f|^n f` transform; `FProfile` is that same system with
/// profile values reported in `f` units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileForm {
    /// The profile equation in `f` presentation (solved via the transform).
    FProfile,
    /// Variational case `p = n+1`: `F'''' = F - |F|^{-alpha} F`.
    SRegime,
    /// General semilinear form:
    /// `F'''' = -beta(1-alpha)|F|^{-a}F'y - |F|^{-a}F/(p-1) + |F|^{p(1-a)-1}F`.
    General,
    /// Normalized form with equilibria ±1:
    /// `F'''' = -beta(p-1)(1-alpha)|F|^{-a}F'y - |F|^{-a}F + |F|^{p(1-a)-1}F`.
    Normalized,
    /// Sign limit `n = inf`: `F'''' = F - sign F`.
    SignLimit,
}

impl ProfileForm {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProfileForm::FProfile => "f-profile",
            ProfileForm::SRegime => "s",
            ProfileForm::General => "general",
            ProfileForm::Normalized => "normalized",
            ProfileForm::SignLimit => "sign-limit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    Even,
    Odd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RightBc {
    CompactSupport,
    FarFieldAsymptotic,
}

/// Everything needed to assemble one profile boundary-value problem.
#[derive(Debug, Clone)]
pub struct ProfileProblemSpec {
    pub params: ProblemParams,
    pub form: ProfileForm,
    pub symmetry: Symmetry,
    pub radius: f64,
    pub eps: f64,
    pub right_bc: RightBc,
    /// Continuation parameter replacing `beta` when set.
    pub mu_override: Option<f64>,
    /// Relative amplitude below which lobes are treated as interface tail.
    pub tail_threshold: f64,
    pub max_nodes: usize,
}

/// Default regularization magnitude and solver tolerance.
pub const DEFAULT_EPS: f64 = 1e-10;
pub const DEFAULT_TOL: f64 = 1e-10;
/// Relative amplitude separating dominant lobes from the interface tail.
pub const DEFAULT_TAIL_THRESHOLD: f64 = 1e-4;

/// Steepest algebraic tail exponent (in `F` units) that the far-field
/// boundary operator can represent; beyond it the tail is numerically
/// compact and the compact-support conditions are used instead.
pub const FARFIELD_GAMMA_LIMIT: f64 = 40.0;

/// The right boundary condition appropriate for `(n, p)`: far-field
/// asymptotics once `p` exceeds `n+1` by enough for the algebraic tail to
/// be resolvable, compact support otherwise.
pub fn natural_right_bc(params: &ProblemParams) -> RightBc {
    if params.regime == Regime::LS
        && farfield_exponent_f_units(params.n, params.p).abs() <= FARFIELD_GAMMA_LIMIT
    {
        RightBc::FarFieldAsymptotic
    } else {
        RightBc::CompactSupport
    }
}

/// Default half-domain radius: the support `y0 ~ 12 n^{-3/4}` must fit with
/// a factor-two margin.
pub fn default_radius(n: f64) -> f64 {
    if n.is_infinite() {
        return 15.0;
    }
    (2.0 * 12.0 * n.powf(-0.75)).max(15.0)
}

impl ProfileProblemSpec {
    /// Spec for the blow-up profile problem with defaults filled in from
    /// the regime: form and right boundary follow `classify_regime`.
    pub fn new(n: f64, p: f64) -> Result<Self> {
        let params = ProblemParams::new(n, p)?;
        let form = match params.regime {
            Regime::S => ProfileForm::SRegime,
            Regime::LS => ProfileForm::General,
            Regime::HS => ProfileForm::Normalized,
        };
        let right_bc = natural_right_bc(&params);
        Ok(ProfileProblemSpec {
            params,
            form,
            symmetry: Symmetry::Even,
            radius: default_radius(n),
            eps: DEFAULT_EPS,
            right_bc,
            mu_override: None,
            tail_threshold: DEFAULT_TAIL_THRESHOLD,
            max_nodes: DEFAULT_MAX_NODES,
        })
    }

    pub fn with_form(mut self, form: ProfileForm) -> Self {
        self.form = form;
        self
    }

    pub fn with_symmetry(mut self, symmetry: Symmetry) -> Self {
        self.symmetry = symmetry;
        self
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (n, p) = (self.params.n, self.params.p);
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(Error::InvalidSpec(format!("radius {} invalid", self.radius)));
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidSpec(
                "eps must be positive for Newton-based solving of singular forms".into(),
            ));
        }
        match self.right_bc {
            RightBc::CompactSupport => {
                // For p > n+1 the tail is algebraic, but once its exponent
                // is steeper than the representable limit it is numerically
                // compact and the compact conditions remain valid.
                if self.params.regime == Regime::LS
                    && self.mu_override.is_none()
                    && farfield_exponent_f_units(n, p).abs() <= FARFIELD_GAMMA_LIMIT
                {
                    return Err(Error::InvalidSpec(format!(
                        "compact support requires p <= n+1 or a numerically                          compact tail (got n={n}, p={p})"
                    )));
                }
            }
            RightBc::FarFieldAsymptotic => {
                if self.params.regime != Regime::LS {
                    return Err(Error::InvalidSpec(format!(
                        "far-field asymptotics require p > n+1 (got n={n}, p={p})"
                    )));
                }
            }
        }
        if matches!(self.form, ProfileForm::SRegime) && self.params.regime != Regime::S {
            return Err(Error::InvalidSpec(
                "the variational form applies only at p = n+1".into(),
            ));
        }
        Ok(())
    }

    /// Equilibrium `F*` in the units of the solved form.
    pub fn form_equilibrium(&self) -> f64 {
        match self.form {
            ProfileForm::SRegime | ProfileForm::Normalized | ProfileForm::SignLimit => 1.0,
            ProfileForm::General | ProfileForm::FProfile => self.params.cap_f_star(),
        }
    }

    /// Effective `beta` (continuation may override it).
    pub fn effective_beta(&self) -> f64 {
        self.mu_override.unwrap_or(self.params.beta)
    }
}

/// Right-hand-side coefficients of the template
/// `F'''' = c_lin F - b1 q(F) F' y - b2 q(F) F + c_src qs(F) F`
/// with `q = (eps^2+F^2)^{-alpha/2}` and `qs = (eps^2+F^2)^{s/2}`.
#[derive(Debug, Clone, Copy)]
struct FormCoefficients {
    alpha: f64,
    c_lin: f64,
    b1: f64,
    b2: f64,
    c_src: f64,
    s_exp: f64,
}

fn form_coefficients(spec: &ProfileProblemSpec) -> FormCoefficients {
    let p = spec.params.p;
    let alpha = spec.params.alpha;
    let beta = spec.effective_beta();
    match spec.form {
        ProfileForm::SRegime => FormCoefficients {
            alpha,
            c_lin: 1.0,
            b1: 0.0,
            b2: 1.0,
            c_src: 0.0,
            s_exp: 0.0,
        },
        ProfileForm::SignLimit => FormCoefficients {
            alpha: 1.0,
            c_lin: 1.0,
            b1: 0.0,
            b2: 1.0,
            c_src: 0.0,
            s_exp: 0.0,
        },
        ProfileForm::General | ProfileForm::FProfile => FormCoefficients {
            alpha,
            c_lin: 0.0,
            b1: beta * (1.0 - alpha),
            b2: 1.0 / (p - 1.0),
            c_src: 1.0,
            s_exp: p * (1.0 - alpha) - 1.0,
        },
        ProfileForm::Normalized => FormCoefficients {
            alpha,
            c_lin: 0.0,
            b1: beta * (p - 1.0) * (1.0 - alpha),
            b2: 1.0,
            c_src: 1.0,
            s_exp: p * (1.0 - alpha) - 1.0,
        },
    }
}

/// Fourth component of the right-hand side at `(y, F, F')`.
pub fn rhs4(spec: &ProfileProblemSpec, y: f64, f: f64, df: f64) -> f64 {
    let c = form_coefficients(spec);
    let eps2 = spec.eps * spec.eps;
    let w = eps2 + f * f;
    let q = w.powf(-c.alpha / 2.0);
    let qs = if c.c_src != 0.0 { w.powf(c.s_exp / 2.0) } else { 0.0 };
    c.c_lin * f - c.b1 * q * df * y - c.b2 * q * f + c.c_src * qs * f
}

/// Growth exponent of the algebraic far-field tail in `F` units:
/// `F ~ C y^Gamma` with `Gamma = -4(n+1)/(p-(n+1))`.
pub fn farfield_exponent_f_units(n: f64, p: f64) -> f64 {
    -4.0 * (n + 1.0) / (p - (n + 1.0))
}

/// Assemble the first-order boundary-value system for a profile spec.
pub fn build_system(spec: &ProfileProblemSpec) -> Result<BvpProblem> {
    spec.validate()?;
    let c = form_coefficients(spec);
    let eps2 = spec.eps * spec.eps;
    let rhs = {
        let c = c;
        move |y: f64, st: &[f64], dy: &mut [f64]| {
            dy[0] = st[1];
            dy[1] = st[2];
            dy[2] = st[3];
            let f = st[0];
            let w = eps2 + f * f;
            let q = w.powf(-c.alpha / 2.0);
            let qs = if c.c_src != 0.0 { w.powf(c.s_exp / 2.0) } else { 0.0 };
            dy[3] = c.c_lin * f - c.b1 * q * st[1] * y - c.b2 * q * f + c.c_src * qs * f;
        }
    };
    let jac = {
        let c = c;
        move |y: f64, st: &[f64], out: &mut [f64]| {
            for v in out.iter_mut() {
                *v = 0.0;
            }
            out[1] = 1.0; // d(F')/dF'
            out[4 + 2] = 1.0;
            out[2 * 4 + 3] = 1.0;
            let f = st[0];
            let w = eps2 + f * f;
            let q = w.powf(-c.alpha / 2.0);
            let dq = -c.alpha * f / w * q;
            let (qs, dqs) = if c.c_src != 0.0 {
                let qs = w.powf(c.s_exp / 2.0);
                (qs, c.s_exp * f / w * qs)
            } else {
                (0.0, 0.0)
            };
            // d rhs4 / dF
            out[3 * 4] = c.c_lin - c.b1 * dq * st[1] * y - c.b2 * (q + f * dq)
                + c.c_src * (qs + f * dqs);
            // d rhs4 / dF'
            out[3 * 4 + 1] = -c.b1 * q * y;
        }
    };
    let bc_left_even = matches!(spec.symmetry, Symmetry::Even);
    let right_bc = spec.right_bc;
    let gamma_f = if matches!(right_bc, RightBc::FarFieldAsymptotic) {
        farfield_exponent_f_units(spec.params.n, spec.params.p)
    } else {
        0.0
    };
    let radius = spec.radius;
    let bc = move |ya: &[f64], yb: &[f64], r: &mut [f64]| {
        if bc_left_even {
            r[0] = ya[1]; // F'(0) = 0
            r[1] = ya[3]; // F'''(0) = 0
        } else {
            r[0] = ya[0]; // F(0) = 0
            r[1] = ya[2]; // F''(0) = 0
        }
        match right_bc {
            RightBc::CompactSupport => {
                r[2] = yb[0];
                r[3] = yb[1];
            }
            RightBc::FarFieldAsymptotic => {
                // Pin the algebraic tail F ~ C y^Gamma through the first and
                // second log-derivatives; this annihilates both growing
                // far-field modes, and the omitted decaying exponential mode
                // enters only at O(e^{-b0 R^nu}).
                let scale = 1.0 + yb[0].abs();
                r[2] = (radius * yb[1] - gamma_f * yb[0]) / scale;
                r[3] = (radius * radius * yb[2] - gamma_f * (gamma_f - 1.0) * yb[0]) / scale;
            }
        }
    };
    Ok(BvpProblem {
        dim: 4,
        rhs: Box::new(rhs),
        rhs_jac: Some(Box::new(jac)),
        bc: Box::new(bc),
        n_left: 2,
    })
}

/// Initial profile data: a state-vector function of `y` plus metadata.
pub struct ProfileGuess {
    f: Box<dyn Fn(f64) -> [f64; 4] + Send + Sync>,
    pub label: String,
    /// Warm guesses skip the regularization staging.
    pub warm: bool,
    /// Suggested initial mesh carrying the guess's fine structure.
    pub mesh_hint: Option<Vec<f64>>,
}

impl ProfileGuess {
    pub fn from_fn<F: Fn(f64) -> [f64; 4] + Send + Sync + 'static>(f: F, label: &str) -> Self {
        ProfileGuess {
            f: Box::new(f),
            label: label.to_string(),
            warm: false,
            mesh_hint: None,
        }
    }

    pub fn eval(&self, y: f64) -> [f64; 4] {
        (self.f)(y)
    }

    /// Default first guess: the squared-cosine cap
    /// `C max(0, cos(pi y / 2L))^2` with `C = 1.5 F*` and `L` at 60% of the
    /// expected support `~12 n^{-3/4}` (a cap scaled to the padded domain
    /// radius instead lands the Newton iteration on wider multi-bump
    /// patterns).
    pub fn default_cap(spec: &ProfileProblemSpec) -> Self {
        Self::default_cap_scaled(spec, 1.0)
    }

    /// The default cap with its width multiplied by `scale`.
    pub fn default_cap_scaled(spec: &ProfileProblemSpec, scale: f64) -> Self {
        let c = 1.5 * spec.form_equilibrium();
        let support = if spec.params.n.is_infinite() {
            4.0
        } else {
            (12.0 * spec.params.n.powf(-0.75)).max(4.0)
        };
        // The single-bump basin: about five units wide at moderate n (the
        // transition scale of the equation is O(1) there), growing with the
        // quadratic-cap support for small n and shrinking toward the
        // sign-limit support for large n.
        let l = scale * (0.04 * support).max(5.0).min(0.45 * spec.radius.min(support));
        ProfileGuess::from_fn(
            move |y: f64| {
                if y.abs() >= l {
                    return [0.0; 4];
                }
                let pi = std::f64::consts::PI;
                let a = pi * y / (2.0 * l);
                [
                    c * a.cos().powi(2),
                    -c * pi / (2.0 * l) * (2.0 * a).sin(),
                    -c * pi * pi / (2.0 * l * l) * (2.0 * a).cos(),
                    c * pi * pi * pi / (2.0 * l * l * l) * (2.0 * a).sin(),
                ]
            },
            "cos^2 cap",
        )
    }

    /// Dipole variant of the default cap for odd solves: `y/L`-weighted.
    pub fn default_dipole(spec: &ProfileProblemSpec) -> Self {
        let c = 1.5 * spec.form_equilibrium();
        let support = if spec.params.n.is_infinite() {
            4.0
        } else {
            (12.0 * spec.params.n.powf(-0.75)).max(4.0)
        };
        let l = (0.14 * support).max(7.0).min(0.6 * spec.radius.min(support));
        ProfileGuess::from_fn(
            move |y: f64| {
                if y.abs() >= l {
                    return [0.0; 4];
                }
                let pi = std::f64::consts::PI;
                // c sin(pi y / L) cos(pi y / 2L)^2 is odd with support [-L, L].
                let s = (pi * y / l).sin();
                let s1 = pi / l * (pi * y / l).cos();
                let s2 = -(pi / l) * (pi / l) * s;
                let s3 = -(pi / l) * (pi / l) * s1;
                let a = pi * y / (2.0 * l);
                let g = a.cos().powi(2);
                let g1 = -pi / (2.0 * l) * (2.0 * a).sin();
                let g2 = -pi * pi / (2.0 * l * l) * (2.0 * a).cos();
                let g3 = pi * pi * pi / (2.0 * l * l * l) * (2.0 * a).sin();
                [
                    c * s * g,
                    c * (s1 * g + s * g1),
                    c * (s2 * g + 2.0 * s1 * g1 + s * g2),
                    c * (s3 * g + 3.0 * s2 * g1 + 3.0 * s1 * g2 + s * g3),
                ]
            },
            "dipole cap",
        )
    }

    /// Warm guess from a closure plus a mesh hint.
    pub fn warm_with_hint<F: Fn(f64) -> [f64; 4] + Send + Sync + 'static>(
        f: F,
        mesh_hint: Option<Vec<f64>>,
    ) -> Self {
        ProfileGuess {
            f: Box::new(f),
            label: "warm".to_string(),
            warm: true,
            mesh_hint,
        }
    }

    /// Use a converged profile solution (warm start for continuation).
    pub fn from_solution(sol: &ProfileSolution) -> Self {
        let bvp = sol.bvp.clone();
        let symmetry = sol.spec.symmetry;
        let mesh_hint = Some(bvp.mesh.nodes().to_vec());
        ProfileGuess {
            f: Box::new(move |y: f64| eval_reflected(&bvp, symmetry, y)),
            label: "warm".to_string(),
            warm: true,
            mesh_hint,
        }
    }
}

/// Evaluate a half-domain solution at any `y` using parity reflection.
pub(crate) fn eval_reflected(bvp: &BvpSolution, symmetry: Symmetry, y: f64) -> [f64; 4] {
    let mut st = [0.0; 4];
    if y >= 0.0 {
        let mut out = [0.0; 4];
        bvp.eval(y.min(bvp.mesh.last()), &mut out);
        st.copy_from_slice(&out);
    } else {
        let mut out = [0.0; 4];
        bvp.eval((-y).min(bvp.mesh.last()), &mut out);
        match symmetry {
            // F even: (F, -F', F'', -F''')
            Symmetry::Even => {
                st = [out[0], -out[1], out[2], -out[3]];
            }
            // F odd: (-F, F', -F'', F''')
            Symmetry::Odd => {
                st = [-out[0], out[1], -out[2], out[3]];
            }
        }
    }
    st
}

/// A converged profile with its classification attachments.
#[derive(Debug, Clone)]
pub struct ProfileSolution {
    pub spec: ProfileProblemSpec,
    pub bvp: BvpSolution,
    /// Max relative residual (see `collocation::relative_residual`).
    pub residual: f64,
    /// Solver tolerance the solve was run at.
    pub tol: f64,
    /// Interface estimate for compactly supported runs.
    pub y0: Option<f64>,
    /// Interface sign changes above the regularization floor.
    pub zero_count: Option<usize>,
    pub sigma: Option<MultiIndex>,
}

impl ProfileSolution {
    pub fn mesh(&self) -> &Mesh {
        &self.bvp.mesh
    }

    /// Transformed profile `F` at the mesh nodes.
    pub fn f_component(&self, c: usize) -> Vec<f64> {
        self.bvp.component(c)
    }

    /// `F(y)` anywhere on `[-R, R]` (parity reflection).
    pub fn eval_f(&self, y: f64) -> f64 {
        eval_reflected(&self.bvp, self.spec.symmetry, y)[0]
    }

    pub fn eval_state(&self, y: f64) -> [f64; 4] {
        eval_reflected(&self.bvp, self.spec.symmetry, y)
    }

    /// Untransformed profile `f = |F|^{-alpha} F` at `y`.
    pub fn eval_f_untransformed(&self, y: f64) -> f64 {
        let cap_f = self.eval_f(y);
        if cap_f == 0.0 {
            0.0
        } else {
            cap_f.abs().powf(-self.spec.params.alpha) * cap_f
        }
    }

    /// `F(0)` (the origin value used in branch records).
    pub fn f_at_origin(&self) -> f64 {
        self.bvp.state(0)[0]
    }

    pub fn sup_norm(&self) -> f64 {
        self.bvp.component(0).iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `sqrt(∫ F^2)` over the full symmetric domain.
    pub fn l2_norm(&self) -> f64 {
        integrate_reflected(self, 2, |_y, st| st[0] * st[0]).sqrt()
    }
}

/// Controls for [`solve_profile_opts`].
#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub tol: f64,
    /// Starting regularization for the staged solve of cold guesses.
    pub eps_start: f64,
    /// Stage reduction factor.
    pub eps_factor: f64,
    /// Skip attaching interface/multiindex data (used mid-continuation).
    pub skip_classification: bool,
    /// Damping halvings per Newton step (see `BvpOptions`).
    pub newton_max_halvings: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: DEFAULT_TOL,
            eps_start: 1e-3,
            eps_factor: 0.1,
            skip_classification: false,
            newton_max_halvings: 8,
        }
    }
}

fn initial_mesh(spec: &ProfileProblemSpec) -> Result<Mesh> {
    let per_unit = 8.0;
    let n = ((spec.radius * per_unit) as usize).clamp(101, 1201);
    Mesh::uniform(0.0, spec.radius, n, spec.max_nodes)
}

/// Solve one profile problem at the spec's regularization and a tolerance.
///
/// Cold guesses are solved through a staged reduction of the
/// regularization magnitude (each stage warm-starts the next) because the
/// Newton iteration at `eps = 1e-10` has a tiny attraction basin.
pub fn solve_profile(
    spec: &ProfileProblemSpec,
    guess: &ProfileGuess,
    tol: f64,
) -> Result<ProfileSolution> {
    solve_profile_opts(
        spec,
        guess,
        &SolveOptions {
            tol,
            ..Default::default()
        },
    )
}

pub fn solve_profile_opts(
    spec: &ProfileProblemSpec,
    guess: &ProfileGuess,
    opts: &SolveOptions,
) -> Result<ProfileSolution> {
    spec.validate()?;
    // For nearly-linear singular factors (alpha -> 0) the regularization
    // has little bite and a long ladder only churns the Newton basin.
    let eps_start = if spec.params.alpha < 0.1 {
        opts.eps_start.min(1e-6)
    } else {
        opts.eps_start
    };
    let ladder = !(guess.warm || spec.eps >= eps_start);
    let use_hint = !ladder;
    let mesh = match guess.mesh_hint.as_ref().filter(|_| use_hint) {
        Some(hint) => {
            let mut nodes: Vec<f64> = hint
                .iter()
                .cloned()
                .filter(|&y| y >= 0.0 && y <= spec.radius)
                .collect();
            if nodes.first().map(|&v| v > 0.0).unwrap_or(true) {
                nodes.insert(0, 0.0);
            }
            if nodes.last().map(|&v| v < spec.radius).unwrap_or(true) {
                nodes.push(spec.radius);
            }
            nodes.dedup_by(|a, b| (*a - *b) < 1e-9);
            if nodes.len() >= 5 {
                Mesh::new(nodes, spec.max_nodes)?
            } else {
                initial_mesh(spec)?
            }
        }
        None => initial_mesh(spec)?,
    };
    let mut nodes = mesh;
    let mut states: Vec<f64> = nodes
        .nodes()
        .iter()
        .flat_map(|&y| guess.eval(y))
        .collect();
    let last: Option<BvpSolution>;
    let solve_stage = |eps: f64,
                       stage_tol: f64,
                       nodes: &Mesh,
                       states: &[f64]|
     -> Result<BvpSolution> {
        let stage_spec = ProfileProblemSpec {
            eps,
            ..spec.clone()
        };
        let problem = build_system(&stage_spec)?;
        let bvp_opts = BvpOptions {
            rtol: stage_tol,
            atol: stage_tol,
            max_nodes: spec.max_nodes,
            newton_max_halvings: opts.newton_max_halvings,
            ..Default::default()
        };
        collocation::solve_bvp(&problem, nodes, states, &bvp_opts)
    };
    if !ladder {
        last = Some(solve_stage(spec.eps, opts.tol, &nodes, &states)?);
    } else {
        // Adaptive regularization continuation: a fixed factor-10 ladder is
        // too coarse for multi-bump patterns, so halve the decade step in
        // log(eps) whenever a stage's Newton iteration fails.
        let mut eps = eps_start;
        let mut sol = solve_stage(eps, opts.tol.max(eps * 1e-2), &nodes, &states)?;
        nodes = sol.mesh.clone();
        states = sol.states.clone();
        let mut step = 1.0f64; // decades per stage
        let mut fails = 0usize;
        while eps > spec.eps * 1.0000001 {
            let next = (eps * 10f64.powf(-step)).max(spec.eps);
            match solve_stage(next, opts.tol.max(next * 1e-2), &nodes, &states) {
                Ok(s) => {
                    eps = next;
                    nodes = s.mesh.clone();
                    states = s.states.clone();
                    sol = s;
                    step = (step * 1.4).min(1.0);
                }
                Err(e) => {
                    fails += 1;
                    step *= 0.5;
                    if fails > 12 || step < 0.02 {
                        return Err(e);
                    }
                }
            }
        }
        last = Some(sol);
    }
    let bvp = last.expect("at least one stage");
    let residual = bvp.residual;
    let mut out = ProfileSolution {
        spec: spec.clone(),
        bvp,
        residual,
        tol: opts.tol,
        y0: None,
        zero_count: None,
        sigma: None,
    };
    if !opts.skip_classification {
        attach_classification(&mut out);
    }
    Ok(out)
}

/// Solve for the ground profile (multiindex `{+2}`): try the default cap
/// and, if the Newton iteration lands on a different pattern or fails,
/// retry with a deterministic sequence of rescaled cap widths.
pub fn ground_profile(spec: &ProfileProblemSpec, tol: f64) -> Result<ProfileSolution> {
    let mut last_err: Option<Error> = None;
    for scale in [1.0, 0.7, 1.5, 0.5, 2.2, 0.35] {
        let guess = ProfileGuess::default_cap_scaled(spec, scale);
        match solve_profile(spec, &guess, tol) {
            Ok(mut sol) => {
                let notation = sol
                    .sigma
                    .as_ref()
                    .map(|s| s.notation())
                    .unwrap_or_default();
                if notation == "+2" {
                    return Ok(sol);
                }
                if notation == "-2" {
                    // The mirrored solution is equally valid; report the
                    // positive representative.
                    for v in sol.bvp.states.iter_mut() {
                        *v = -*v;
                    }
                    for v in sol.bvp.f_nodes.iter_mut() {
                        *v = -*v;
                    }
                    for v in sol.bvp.y_mid.iter_mut() {
                        *v = -*v;
                    }
                    attach_classification(&mut sol);
                    return Ok(sol);
                }
                last_err = Some(Error::Unconverged(format!(
                    "cap scale {scale} landed on {{{notation}}}"
                )));
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::Unconverged("no attempts".into())))
}

/// Solve a glued multi-bump pattern from a converged base profile.
///
/// The superposed guess is exact away from the bump overlaps, but its
/// defect concentrates at the tail-crossing zeros where the regularized
/// Jacobian is stiff, so the monotone damped iteration rejects many
/// otherwise-convergent starts.  A short deterministic ladder of
/// regularizations with an unconditional Newton step recovers them; every
/// returned solution is still verified by the usual residual criterion.
pub fn glue_profile(
    spec: &ProfileProblemSpec,
    base: &ProfileSolution,
    components: &[(f64, f64)],
    tol: f64,
) -> Result<ProfileSolution> {
    let (guess, symmetry, reach) = glue_guess(components, base)?;
    let mut gspec = spec.clone();
    gspec.symmetry = symmetry;
    gspec.radius = gspec.radius.max(reach + 4.0);
    let mut last_err: Option<Error> = None;
    for (eps, halvings) in [
        (1e-7f64, 0usize),
        (1e-8, 0),
        (1e-6, 0),
        (1e-8, 8),
        (1e-6, 8),
    ] {
        let mut attempt = gspec.clone();
        attempt.eps = eps.max(spec.eps);
        match solve_profile_opts(
            &attempt,
            &guess,
            &SolveOptions {
                tol: tol.max(attempt.eps * 1e-2).min(tol.max(1e-8)),
                newton_max_halvings: halvings,
                ..Default::default()
            },
        ) {
            Ok(sol) => return Ok(sol),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::Unconverged("no gluing attempts".into())))
}

/// Fill `y0`, `zero_count` and `sigma` on a converged solution.
pub fn attach_classification(sol: &mut ProfileSolution) {
    if matches!(sol.spec.right_bc, RightBc::CompactSupport) {
        if let Ok(est) = interface_estimate(sol) {
            sol.y0 = Some(est.y0);
            sol.zero_count = Some(est.zero_count);
        }
    }
    sol.sigma = classify(sol).ok();
}

/// Integrate `f(y, state)` over `[-R, R]` with the reflected interpolant:
/// Gauss panels on every (mirrored, subdivided) mesh interval.
pub(crate) fn integrate_reflected_impl<G: FnMut(f64, &[f64; 4]) -> f64>(
    sol: &ProfileSolution,
    subdivide: usize,
    mut f: G,
) -> f64 {
    let (nodes, weights) = crate::quad::gauss_legendre(7);
    let mesh = sol.bvp.mesh.nodes();
    let mut acc = 0.0;
    let mut handle = |a: f64, b: f64, f: &mut G| {
        for sub in 0..subdivide {
            let lo = a + (b - a) * sub as f64 / subdivide as f64;
            let hi = a + (b - a) * (sub + 1) as f64 / subdivide as f64;
            let mid = 0.5 * (lo + hi);
            let half = 0.5 * (hi - lo);
            for (x, w) in nodes.iter().zip(weights) {
                let y = mid + half * x;
                let st = eval_reflected(&sol.bvp, sol.spec.symmetry, y);
                acc += w * half * f(y, &st);
            }
        }
    };
    for w in mesh.windows(2) {
        handle(-w[1], -w[0], &mut f);
    }
    for w in mesh.windows(2) {
        handle(w[0], w[1], &mut f);
    }
    acc
}

/// Superpose shifted, signed copies of a converged base profile as an
/// initial guess: `sum_i sign_i F_base(y - shift_i)`.
///
/// The component list must be symmetric (even) or antisymmetric (odd)
/// under `y -> -y`; the detected symmetry is returned with the guess.
pub fn glue_guess(
    components: &[(f64, f64)],
    base: &ProfileSolution,
) -> Result<(ProfileGuess, Symmetry, f64)> {
    if components.is_empty() {
        return Err(Error::InvalidSpec("empty gluing component list".into()));
    }
    let mut sorted: Vec<(f64, f64)> = components.to_vec();
    sorted.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    let tol = 1e-9 * (1.0 + sorted.iter().fold(0.0f64, |m, c| m.max(c.1.abs())));
    let is_even = sorted.iter().all(|&(s, d)| {
        sorted
            .iter()
            .any(|&(s2, d2)| (s2 - s).abs() < 1e-12 && (d2 + d).abs() < tol)
    });
    let is_odd = sorted.iter().all(|&(s, d)| {
        sorted
            .iter()
            .any(|&(s2, d2)| (s2 + s).abs() < 1e-12 && (d2 + d).abs() < tol)
    });
    let symmetry = if is_even {
        Symmetry::Even
    } else if is_odd {
        Symmetry::Odd
    } else {
        return Err(Error::InvalidSpec(
            "gluing components are neither even nor odd under reflection".into(),
        ));
    };
    let base_bvp = base.bvp.clone();
    let base_sym = base.spec.symmetry;
    let comps = sorted.clone();
    let base_radius = base.spec.radius;
    let reach = sorted
        .iter()
        .fold(0.0f64, |m, &(_, d)| m.max(d.abs()))
        + base_radius;
    // Initial-mesh hint: shifted copies of the base mesh so the glued
    // guess's interface fine structure is representable from the start.
    let mut hint: Vec<f64> = Vec::new();
    for &(_, shift) in &sorted {
        for &y in base.bvp.mesh.nodes() {
            for v in [shift + y, shift - y] {
                if v >= 0.0 && v <= reach {
                    hint.push(v);
                }
            }
        }
    }
    let mut t = 0.0;
    while t <= reach {
        hint.push(t);
        t += 0.25;
    }
    hint.push(reach);
    hint.sort_by(|a, b| a.partial_cmp(b).unwrap());
    hint.dedup_by(|a, b| (*a - *b) < 1e-7);
    // Exact superposition; solved in one shot at the target regularization
    // (the copies are converged profiles, so the defect is confined to the
    // nonlinear mixing where tails overlap).  Members with wide gaps only
    // exist once the regularization resolves enough interface lobes, so
    // gluing is most reliable at eps <= ~1e-8.
    let guess = ProfileGuess {
        f: Box::new(move |y: f64| {
            let mut acc = [0.0; 4];
            for &(sign, shift) in &comps {
                let st = eval_reflected(&base_bvp, base_sym, y - shift);
                for c in 0..4 {
                    acc[c] += sign * st[c];
                }
            }
            acc
        }),
        label: format!("glue x{}", sorted.len()),
        warm: true,
        mesh_hint: Some(hint),
    };
    Ok((guess, symmetry, reach))
}


/// Test/debug hook: family data of the symmetric spatial orbit with
/// prescribed maximum.
pub fn spatial_debug_family(n: f64, m: f64) -> crate::error::Result<(f64, f64, f64, f64)> {
    spatial::debug_family(n, m)
}
