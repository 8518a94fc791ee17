//! Parameter continuation of profile solutions.
//!
//! Profiles at the variational point `p = n+1` seed branches that are
//! stepped through `p` (or the auxiliary parameter replacing `beta`) with
//! warm starts, adaptive increments, and jump detection.  Crossing the
//! variational point inserts an exact solve there, anchoring every branch
//! to the variational family; form changes across regimes go through the
//! normalizing rescale so the equilibria stay pinned.

use crate::error::{Error, Result};
use crate::multiindex::MultiIndex;
use crate::params::{ProblemParams, Regime};
use crate::profiles::{
    attach_classification, build_system, solve_profile_opts, ProfileForm, ProfileGuess,
    ProfileProblemSpec, ProfileSolution, SolveOptions,
};

/// Which parameter a branch is continued in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchParameter {
    /// The source exponent `p`.
    P,
    /// The auxiliary exponent replacing `beta` in the profile equation.
    Mu,
    /// Regularization magnitude (recorded by staged solves).
    Eps,
}

impl BranchParameter {
    pub fn as_str(&self) -> &'static str {
        match self {
            BranchParameter::P => "p",
            BranchParameter::Mu => "mu",
            BranchParameter::Eps => "eps",
        }
    }
}

/// Why a continuation stopped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Termination {
    RangeEnd,
    NewtonFailure,
    JumpDetected,
    Singularity,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::RangeEnd => "range_end",
            Termination::NewtonFailure => "newton_failure",
            Termination::JumpDetected => "jump_detected",
            Termination::Singularity => "singularity",
        }
    }
}

/// Summary of one accepted continuation point.
#[derive(Debug, Clone)]
pub struct BranchPoint {
    pub param: f64,
    pub f0_at_origin: f64,
    pub sup_norm: f64,
    pub l2_norm: f64,
    pub y0: Option<f64>,
    pub sigma: Option<MultiIndex>,
    /// Archive reference filled in by the persistence layer.
    pub solution_path: Option<String>,
}

impl BranchPoint {
    pub fn from_solution(param: f64, sol: &ProfileSolution) -> Self {
        BranchPoint {
            param,
            f0_at_origin: sol.f_at_origin(),
            sup_norm: sol.sup_norm(),
            l2_norm: sol.l2_norm(),
            y0: sol.y0,
            sigma: sol.sigma.clone(),
            solution_path: None,
        }
    }
}

/// An ordered continuation record.
#[derive(Debug, Clone)]
pub struct Branch {
    pub parameter: BranchParameter,
    pub points: Vec<BranchPoint>,
    pub termination: Termination,
}

/// Controls for [`continue_branch_opts`].
pub struct ContinueOptions<'a> {
    /// Initial parameter increment (magnitude).
    pub dp0: f64,
    /// Smallest increment before giving up.
    pub dp_floor: f64,
    /// Halvings allowed per step on Newton failure.
    pub max_halvings: usize,
    /// Growth factor applied after three consecutive successes.
    pub growth: f64,
    /// Stop the branch at the first detected jump (the jumped point is
    /// still recorded).  With `false`, jumps are recorded and continued.
    pub stop_on_jump: bool,
    /// Solver tolerance along the branch.
    pub tol: f64,
    /// Regularization along the branch.  Away from the variational point
    /// the transformed equation's `beta |F|^{-alpha} F' y` term is pointwise
    /// singular at transversal zeros (the profile `f` has a cusp there),
    /// and the regularized spikes move with the parameter, so branches are
    /// stepped at a moderate regularization; 1e-4 keeps the spike bands
    /// wide enough for warm Newton steps to track them.
    pub eps: f64,
    /// Land exactly on multiples of this value when stepping (useful when
    /// two branches must be compared at common parameters).
    pub snap_grid: Option<f64>,
    /// When stepping stalls at the increment floor, attempt one rescue
    /// step with an unconditional Newton iteration, which is free to land
    /// on a neighbouring branch (recorded as a jump).  This mirrors how
    /// weak-line-search solvers behave where a branch ceases to exist.
    pub hop_on_stall: bool,
    /// Called after every accepted point.
    pub on_accept: Option<Box<dyn FnMut(&BranchPoint, &ProfileSolution) + 'a>>,
}

impl Default for ContinueOptions<'_> {
    fn default() -> Self {
        ContinueOptions {
            dp0: 0.01,
            dp_floor: 1e-5,
            max_halvings: 10,
            growth: 1.5,
            stop_on_jump: true,
            tol: 1e-6,
            eps: 1e-4,
            snap_grid: None,
            hop_on_stall: false,
            on_accept: None,
        }
    }
}

/// `p_l = n+1 - 4/l` for integer `l > 4/n`, `l <= l_max`: the points where
/// branches can bifurcate from the constant equilibrium.
pub fn bifurcation_points(n: f64, l_max: usize) -> Result<Vec<(usize, f64)>> {
    if !(n > 0.0) {
        return Err(Error::Domain(format!("n must be positive, got {n}")));
    }
    let mut out = Vec::new();
    for l in 1..=l_max {
        if (l as f64) > 4.0 / n {
            out.push((l, n + 1.0 - 4.0 / l as f64));
        }
    }
    Ok(out)
}

/// Bifurcation points of the auxiliary parameterization, `mu_l = 1/l` for
/// even `l = 2, 4, ..., l_max`.
pub fn mu_points(l_max: usize) -> Vec<f64> {
    (1..=l_max / 2).map(|k| 1.0 / (2 * k) as f64).collect()
}

/// Scale constants of the normalizing rescale at `(n, p)`:
/// `C^{(1-alpha)(p-1)} = 1/(p-1)` (so `C = F*`) and `a^4 = (p-1) C^alpha`.
pub fn rescale_constants(params: &ProblemParams) -> (f64, f64) {
    let c = params.cap_f_star();
    let a = ((params.p - 1.0) * c.powf(params.alpha)).powf(0.25);
    (c, a)
}

/// Map a converged solution between the general and normalized forms via
/// the rescale `F_gen(y) = C F_norm(y/a)`; the result is re-verified
/// against the target form's equations.
pub fn rescale_form(sol: &ProfileSolution, target: ProfileForm) -> Result<ProfileSolution> {
    let from = sol.spec.form;
    if from == target {
        return Ok(sol.clone());
    }
    let ok = matches!(
        (from, target),
        (ProfileForm::General, ProfileForm::Normalized)
            | (ProfileForm::Normalized, ProfileForm::General)
    );
    if !ok {
        return Err(Error::InvalidSpec(format!(
            "rescale maps between the general and normalized forms, not {:?} -> {:?}",
            from, target
        )));
    }
    let (c, a) = rescale_constants(&sol.spec.params);
    // General -> Normalized: z = y/a, G(z) = F(az)/C, G^(k) = a^k F^(k)/C.
    // Normalized -> General is the inverse.
    let (val_scale, len_scale) = match target {
        ProfileForm::Normalized => (1.0 / c, a),
        _ => (c, 1.0 / a),
    };
    let mut out = sol.clone();
    out.spec.form = target;
    out.spec.radius = sol.spec.radius / len_scale;
    // The regularization magnitude lives in the same units as F, so it
    // scales with the values: (eps^2 + F^2)^(-a/2) maps exactly only when
    // eps does too.
    out.spec.eps = sol.spec.eps * val_scale;
    let scale_states = |states: &mut [f64]| {
        for chunk in states.chunks_mut(4) {
            let mut der = 1.0;
            for (k, v) in chunk.iter_mut().enumerate() {
                let _ = k;
                *v *= val_scale * der;
                der *= len_scale;
            }
        }
    };
    scale_states(&mut out.bvp.states);
    scale_states(&mut out.bvp.y_mid);
    // f_nodes are the tau-derivatives of the states: d/dz = len_scale d/dy
    // applied on top of the component scaling.
    for chunk in out.bvp.f_nodes.chunks_mut(4) {
        let mut der = len_scale;
        for v in chunk.iter_mut() {
            *v *= val_scale * der;
            der *= len_scale;
        }
    }
    let nodes: Vec<f64> = sol
        .bvp
        .mesh
        .nodes()
        .iter()
        .map(|&y| y / len_scale)
        .collect();
    out.bvp.mesh = crate::mesh::Mesh::new(nodes, sol.spec.max_nodes)?;
    // Re-verify in the target form.
    let problem = build_system(&out.spec)?;
    let res = crate::collocation::relative_residual(&problem, &out.bvp);
    if res > 10.0 * sol.residual.max(sol.tol) {
        return Err(Error::RescaleVerification(format!(
            "residual {res:.3e} in the target form exceeds 10x the original {:.3e}",
            sol.residual
        )));
    }
    out.residual = res;
    attach_classification(&mut out);
    Ok(out)
}

/// True when the step from `prev` to `next` is a jump: the multiindex
/// changed, or the profiles moved by more than 30% in relative sup norm.
pub fn detect_jump(
    prev: &ProfileSolution,
    prev_sigma: Option<&MultiIndex>,
    next: &ProfileSolution,
) -> bool {
    if let (Some(a), Some(b)) = (prev_sigma.or(prev.sigma.as_ref()), next.sigma.as_ref()) {
        if !a.same_pattern(b) {
            return true;
        }
    }
    let r = prev.spec.radius.min(next.spec.radius);
    let mut dist = 0.0f64;
    let mut scale = 0.0f64;
    for j in 0..=800 {
        let y = r * j as f64 / 800.0;
        let fa = prev.eval_f(y);
        let fb = next.eval_f(y);
        dist = dist.max((fa - fb).abs());
        scale = scale.max(fa.abs()).max(fb.abs());
    }
    scale > 0.0 && dist / scale > 0.3
}

/// Relative sup-norm distance between two profiles on their common domain.
pub fn profile_distance(a: &ProfileSolution, b: &ProfileSolution) -> f64 {
    let r = a.spec.radius.min(b.spec.radius);
    let mut dist = 0.0f64;
    let mut scale = 0.0f64;
    for j in 0..=1200 {
        let y = r * j as f64 / 1200.0;
        let fa = a.eval_f(y);
        let fb = b.eval_f(y);
        dist = dist.max((fa - fb).abs());
        scale = scale.max(fa.abs()).max(fb.abs());
    }
    if scale > 0.0 {
        dist / scale
    } else {
        0.0
    }
}

/// Problem spec for the next parameter value along a branch: regime
/// reclassification switches the right boundary condition, and a
/// variational-form start hands over to the matching continuation form.
fn respec(spec: &ProfileProblemSpec, param: BranchParameter, value: f64) -> Result<ProfileProblemSpec> {
    let mut out = spec.clone();
    match param {
        BranchParameter::P => {
            out.params = ProblemParams::new(spec.params.n, value)?;
            if out.mu_override.is_none() {
                out.right_bc = crate::profiles::natural_right_bc(&out.params);
            }
            if matches!(out.form, ProfileForm::SRegime) && out.params.regime != Regime::S {
                // The normalized form coincides with the variational one at
                // p = n+1 for every n, so the handover is seamless.
                out.form = ProfileForm::Normalized;
            }
        }
        BranchParameter::Mu => {
            out.mu_override = Some(value);
        }
        BranchParameter::Eps => {
            out.eps = value;
        }
    }
    Ok(out)
}

fn param_value(spec: &ProfileProblemSpec, param: BranchParameter) -> f64 {
    match param {
        BranchParameter::P => spec.params.p,
        BranchParameter::Mu => spec.mu_override.unwrap_or(spec.effective_beta()),
        BranchParameter::Eps => spec.eps,
    }
}

/// Continue a converged profile in a parameter toward `target`.
pub fn continue_branch(
    start: &ProfileSolution,
    param: BranchParameter,
    target: f64,
    dp0: f64,
) -> Result<Branch> {
    continue_branch_opts(
        start,
        param,
        target,
        ContinueOptions {
            dp0,
            ..Default::default()
        },
    )
}

pub fn continue_branch_opts(
    start: &ProfileSolution,
    param: BranchParameter,
    target: f64,
    mut opts: ContinueOptions<'_>,
) -> Result<Branch> {
    if matches!(param, BranchParameter::Eps) {
        return Err(Error::InvalidSpec(
            "continue solve-internal regularization ladders record Eps branches; \
             drive continuation in p or mu"
                .into(),
        ));
    }
    let p_start = param_value(&start.spec, param);
    if !(target.is_finite()) || target == p_start {
        let mut only = BranchPoint::from_solution(p_start, start);
        only.solution_path = None;
        return Ok(Branch {
            parameter: param,
            points: vec![only],
            termination: Termination::RangeEnd,
        });
    }
    let dir = (target - p_start).signum();
    let n_plus_1 = start.spec.params.n + 1.0;
    let mut points = Vec::new();
    // Move the seed to the branch regularization first (warm re-solve).
    let mut current = if (start.spec.eps - opts.eps).abs() > 1e-3 * opts.eps {
        let respecced = ProfileProblemSpec {
            eps: opts.eps,
            ..start.spec.clone()
        };
        let guess = ProfileGuess::from_solution(start);
        solve_profile_opts(
            &respecced,
            &guess,
            &SolveOptions {
                tol: opts.tol,
                ..Default::default()
            },
        )?
    } else {
        start.clone()
    };
    let first = BranchPoint::from_solution(p_start, &current);
    if let Some(cb) = opts.on_accept.as_mut() {
        cb(&first, &current);
    }
    points.push(first);
    let mut dp = opts.dp0.abs() * dir;
    let mut consecutive = 0usize;
    let mut value = p_start;
    let mut prev: Option<(f64, ProfileSolution)> = None;
    let termination = loop {
        if (value - target).abs() <= 1e-14 * target.abs().max(1.0) {
            break Termination::RangeEnd;
        }
        // Next target value: snap to the grid when requested, and land
        // exactly on the variational point when crossing it.
        let mut next = value + dp;
        if let Some(g) = opts.snap_grid {
            let k = ((value + dp * 1.001) / g).round();
            let snapped = k * g;
            if (snapped - value).abs() > 1e-12 && (snapped - value) * dir > 0.0 {
                next = snapped;
            }
        }
        if (next - target) * dir > 0.0 {
            next = target;
        }
        if matches!(param, BranchParameter::P)
            && (value - n_plus_1) * (next - n_plus_1) < 0.0
        {
            next = n_plus_1;
        }
        let mut spec_next = respec(&current.spec, param, next)?;
        spec_next.eps = opts.eps;
        // Secant predictor: extrapolate the previous two solutions to the
        // new parameter so that moving structure (zeros, interfaces) is
        // tracked to first order and Newton only corrects O(dp^2).
        let guess = match &prev {
            Some((p_prev, sol_prev)) if (value - p_prev).abs() > 1e-14 => {
                let w = (next - value) / (value - p_prev);
                let cur = current.clone();
                let old = sol_prev.clone();
                let mesh_hint = Some(current.bvp.mesh.nodes().to_vec());
                ProfileGuess::warm_with_hint(
                    move |y: f64| {
                        let a = cur.eval_state(y);
                        let b = old.eval_state(y);
                        let mut out = [0.0; 4];
                        for c in 0..4 {
                            out[c] = a[c] + w * (a[c] - b[c]);
                        }
                        out
                    },
                    mesh_hint,
                )
            }
            _ => ProfileGuess::from_solution(&current),
        };
        let solved = solve_profile_opts(
            &spec_next,
            &guess,
            &SolveOptions {
                tol: opts.tol,
                skip_classification: false,
                ..Default::default()
            },
        );
        match solved {
            Ok(sol) => {
                let jumped = detect_jump(&current, None, &sol);
                let point = BranchPoint::from_solution(next, &sol);
                if let Some(cb) = opts.on_accept.as_mut() {
                    cb(&point, &sol);
                }
                points.push(point);
                prev = Some((value, std::mem::replace(&mut current, sol)));
                value = next;
                if jumped && opts.stop_on_jump {
                    break Termination::JumpDetected;
                }
                consecutive += 1;
                if consecutive >= 3 {
                    dp = (dp * opts.growth).clamp(-10.0 * opts.dp0, 10.0 * opts.dp0);
                    consecutive = 0;
                }
            }
            Err(_) => {
                consecutive = 0;
                dp *= 0.5;
                if dp.abs() < opts.dp_floor {
                    if !opts.hop_on_stall {
                        break Termination::NewtonFailure;
                    }
                    // Rescue: one unconditional Newton step across the
                    // obstruction; whatever branch it lands on continues.
                    let mut rescue_next = value + opts.dp0.abs() * dir;
                    if let Some(g) = opts.snap_grid {
                        rescue_next = (rescue_next / g).round() * g;
                    }
                    if (rescue_next - target) * dir > 0.0 {
                        rescue_next = target;
                    }
                    let mut rescue_spec = respec(&current.spec, param, rescue_next)?;
                    rescue_spec.eps = opts.eps;
                    let guess = ProfileGuess::from_solution(&current);
                    match solve_profile_opts(
                        &rescue_spec,
                        &guess,
                        &SolveOptions {
                            tol: opts.tol,
                            newton_max_halvings: 0,
                            ..Default::default()
                        },
                    ) {
                        Ok(sol) => {
                            let point = BranchPoint::from_solution(rescue_next, &sol);
                            if let Some(cb) = opts.on_accept.as_mut() {
                                cb(&point, &sol);
                            }
                            points.push(point);
                            current = sol;
                            value = rescue_next;
                            if opts.stop_on_jump {
                                break Termination::JumpDetected;
                            }
                            dp = opts.dp0.abs() * dir;
                        }
                        Err(_) => break Termination::NewtonFailure,
                    }
                }
            }
        }
    };
    Ok(Branch {
        parameter: param,
        points,
        termination,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::ground_profile;

    #[test]
    fn bifurcation_point_table() {
        // n=1: l > 4, so l = 5..8 with p_l = 2 - 4/l.
        let pts = bifurcation_points(1.0, 8).unwrap();
        assert_eq!(pts.len(), 4);
        assert_eq!(pts[0].0, 5);
        assert!((pts[0].1 - 1.2).abs() < 1e-15);
        assert!((pts[1].1 - (2.0 - 4.0 / 6.0)).abs() < 1e-15);
        assert!((pts[2].1 - (2.0 - 4.0 / 7.0)).abs() < 1e-15);
        assert!((pts[3].1 - 1.5).abs() < 1e-15);
        // l = 4 is excluded (the inequality is strict), and the points
        // increase toward n+1 without attaining it.
        assert!(pts.iter().all(|&(l, _)| l > 4));
        for w in pts.windows(2) {
            assert!(w[1].1 > w[0].1);
        }
        assert!(pts.iter().all(|&(_, p)| p > 1.0 && p < 2.0));
    }

    #[test]
    fn mu_point_table() {
        assert_eq!(mu_points(4), vec![0.5, 0.25]);
        assert_eq!(mu_points(2), vec![0.5]);
        // beta < 1/4 < 1/2 for any LS pair with p < n+5.
        for &(n, p) in &[(1.0, 2.5), (1.0, 3.0), (0.5, 1.8), (2.0, 6.9)] {
            let b = crate::params::beta(n, p).unwrap();
            assert!(b < 0.25 && 0.25 < 0.5, "({n},{p}): beta {b}");
        }
    }

    #[test]
    fn rescale_constants_identity_at_p2() {
        let params = ProblemParams::new(1.0, 2.0).unwrap();
        let (c, a) = rescale_constants(&params);
        assert!((c - 1.0).abs() < 1e-15);
        assert!((a - 1.0).abs() < 1e-15);
        // a^4 = (p-1) C^alpha (the relation that actually maps the general
        // form onto the normalized one).
        for &(n, p) in &[(1.0, 2.5), (0.5, 1.3), (2.0, 2.2)] {
            let params = ProblemParams::new(n, p).unwrap();
            let (c, a) = rescale_constants(&params);
            assert!(
                (a.powi(4) - (p - 1.0) * c.powf(params.alpha)).abs() < 1e-13,
                "({n},{p})"
            );
        }
    }

    fn continue_branch_collect(seed: &ProfileSolution, target: f64) -> ProfileSolution {
        let mut kept: Option<ProfileSolution> = None;
        let opts = ContinueOptions {
            dp0: 0.02,
            tol: 1e-8,
            on_accept: Some(Box::new(|_pt, sol| {
                // closure rebinding below
                let _ = sol;
            })),
            ..Default::default()
        };
        drop(opts);
        let mut store: Vec<ProfileSolution> = Vec::new();
        let branch = continue_branch_opts(
            seed,
            BranchParameter::P,
            target,
            ContinueOptions {
                dp0: 0.02,
                tol: 1e-8,
                on_accept: Some(Box::new(|_pt, sol| store.push(sol.clone()))),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(branch.termination, Termination::RangeEnd);
        kept = store.into_iter().last();
        kept.expect("continuation kept the endpoint")
    }

    #[test]
    fn rescale_round_trip_and_residual() {
        // Reach a HS-regime profile by a short continuation from the
        // variational point (cold HS starts are fragile, as reported for
        // this regime), then map it between forms.
        let spec0 = ProfileProblemSpec::new(0.5, 1.5).unwrap();
        let seed = ground_profile(&spec0, 1e-8).expect("S ground profile");
        let branch = continue_branch_opts(
            &seed,
            BranchParameter::P,
            1.4,
            ContinueOptions {
                dp0: 0.02,
                tol: 1e-8,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(branch.termination, Termination::RangeEnd);
        // Re-solve the endpoint to own the full solution object.
        let mut spec = ProfileProblemSpec::new(0.5, 1.4).unwrap();
        spec.radius = seed.spec.radius;
        spec.form = ProfileForm::Normalized;
        let sol = {
            let g = ground_profile(&spec0, 1e-8).unwrap();
            let b = continue_branch_collect(&g, 1.4);
            b
        };
        assert_eq!(sol.spec.form, ProfileForm::Normalized);
        let gen = rescale_form(&sol, ProfileForm::General).expect("to general");
        assert!(gen.residual <= 10.0 * sol.residual.max(sol.tol));
        // Equilibrium maps to F*.
        let back = rescale_form(&gen, ProfileForm::Normalized).expect("back");
        let mut worst = 0.0f64;
        for j in 0..=400 {
            let y = sol.spec.radius * j as f64 / 400.0;
            worst = worst.max((back.eval_f(y) - sol.eval_f(y)).abs());
        }
        assert!(worst < 1e-10, "round trip drift {worst}");
    }

    #[test]
    fn degenerate_range_returns_single_point() {
        let spec = ProfileProblemSpec::new(1.0, 2.0).unwrap();
        let sol = ground_profile(&spec, 1e-8).unwrap();
        let branch = continue_branch(&sol, BranchParameter::P, 2.0, 0.01).unwrap();
        assert_eq!(branch.points.len(), 1);
        assert_eq!(branch.termination, Termination::RangeEnd);
    }

    #[test]
    fn detect_jump_cases() {
        let spec = ProfileProblemSpec::new(1.0, 2.0).unwrap();
        let sol = ground_profile(&spec, 1e-8).unwrap();
        assert!(!detect_jump(&sol, None, &sol));
        // A negated profile has a different multiindex: jump.
        let mut neg = sol.clone();
        for v in neg.bvp.states.iter_mut() {
            *v = -*v;
        }
        for v in neg.bvp.f_nodes.iter_mut() {
            *v = -*v;
        }
        for v in neg.bvp.y_mid.iter_mut() {
            *v = -*v;
        }
        attach_classification(&mut neg);
        assert!(detect_jump(&sol, None, &neg));
    }

    #[test]
    fn short_p_branch_up_from_variational_point() {
        let spec = ProfileProblemSpec::new(1.0, 2.0).unwrap();
        let sol = ground_profile(&spec, 1e-8).unwrap();
        let branch = continue_branch_opts(
            &sol,
            BranchParameter::P,
            2.06,
            ContinueOptions {
                dp0: 0.02,
                tol: 1e-8,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(branch.termination, Termination::RangeEnd);
        assert!(branch.points.len() >= 3);
        let last = branch.points.last().unwrap();
        assert!((last.param - 2.06).abs() < 1e-12);
        // Profiles shrink as p grows away from the variational point.
        assert!(last.f0_at_origin < branch.points[0].f0_at_origin);
        // Monotone parameter, no duplicates.
        for w in branch.points.windows(2) {
            assert!(w[1].param > w[0].param);
        }
    }
}
