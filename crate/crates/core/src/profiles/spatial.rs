//! Spatially periodic solutions of the variational profile equation.
//!
//! `F'''' = F - |F|^{-n/(n+1)} F` admits periodic solutions oscillating
//! about the equilibria ±1.  One distinguished orbit is obtained by
//! shooting from the origin with `F(0) = 1.5`, `F'(0) = F'''(0) = 0` and
//! tuning `F''(0)` by bisection so that the trajectory stays bounded for
//! as long as possible (the orbit is unstable, so the bounded window grows
//! roughly linearly in the number of correct bisection digits).

use crate::error::{Error, Result};
use crate::odeint::{self, FnSystem, IvpOptions};
use crate::oscillatory::sgn;

/// A sampled spatially periodic orbit.
#[derive(Debug, Clone)]
pub struct SpatialOrbit {
    pub n: f64,
    /// Tuned `F''(0)`.
    pub shoot_d2: f64,
    /// Spatial period (spacing of successive maxima).
    pub period: f64,
    /// Largest profile value along the orbit.
    pub max_value: f64,
    /// Mean of `F` over one period.
    pub mean_value: f64,
    /// Length of the bounded window achieved by the final shot.
    pub window: f64,
    /// One-period samples `(y, F, F', F'', F''')`.
    pub samples: Vec<[f64; 5]>,
}

fn s_form_system(n: f64) -> FnSystem<impl Fn(f64, &[f64], &mut [f64])> {
    let alpha = n / (n + 1.0);
    FnSystem {
        dim: 4,
        f: move |_y: f64, st: &[f64], dy: &mut [f64]| {
            dy[0] = st[1];
            dy[1] = st[2];
            dy[2] = st[3];
            let f = st[0];
            let nl = if f == 0.0 {
                0.0
            } else {
                f.abs().powf(1.0 - alpha) * sgn(f)
            };
            dy[3] = f - nl;
        },
    }
}

/// Escape time and escape direction of a shot: integrate until the profile
/// component leaves `|F| <= 4` or `y = y_max`.
fn shoot(n: f64, d2: f64, y_max: f64) -> (f64, f64) {
    let sys = s_form_system(n);
    let opts = IvpOptions {
        rtol: 1e-12,
        atol: 1e-14,
        bound: 1e4,
        ..Default::default()
    };
    match odeint::integrate_opts(&sys, &[1.5, 0.0, d2, 0.0], (0.0, y_max), &opts) {
        Ok(traj) => {
            for i in 0..traj.len() {
                let f = traj.state(i)[0];
                if f.abs() > 4.0 {
                    return (traj.times()[i], sgn(f));
                }
            }
            (traj.t_end(), 0.0)
        }
        Err(_) => (0.0, 0.0),
    }
}

/// Locate the spatially periodic orbit by bisection shooting.
pub fn periodic_spatial(n: f64) -> Result<SpatialOrbit> {
    periodic_spatial_near(n, -0.3787329255, 0.2)
}

/// As [`periodic_spatial`] with a caller-supplied search center and width
/// for `F''(0)`.
pub fn periodic_spatial_near(n: f64, center: f64, width: f64) -> Result<SpatialOrbit> {
    if !(n > 0.0) {
        return Err(Error::Domain(format!("n must be positive, got {n}")));
    }
    let y_max = 200.0;
    // Scan the slope grid; the orbit sits where the escape time peaks, and
    // the escape direction flips across it (several stray flips exist
    // elsewhere, so bracket around the longest-lived shot specifically).
    let scan = 64usize;
    let mut shots: Vec<(f64, f64, f64)> = Vec::with_capacity(scan + 1);
    for j in 0..=scan {
        let c = center - width / 2.0 + width * j as f64 / scan as f64;
        let (t, dir) = shoot(n, c, y_max);
        shots.push((c, t, dir));
    }
    let best = shots
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.partial_cmp(&b.1 .1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let mut bracket: Option<(f64, f64, f64)> = None;
    if best > 0 && shots[best - 1].2 != 0.0 && shots[best - 1].2 != shots[best].2 && shots[best].2 != 0.0 {
        bracket = Some((shots[best - 1].0, shots[best].0, shots[best - 1].2));
    } else if best + 1 < shots.len()
        && shots[best + 1].2 != 0.0
        && shots[best].2 != 0.0
        && shots[best + 1].2 != shots[best].2
    {
        bracket = Some((shots[best].0, shots[best + 1].0, shots[best].2));
    } else if best > 0 && best + 1 < shots.len() && shots[best - 1].2 != shots[best + 1].2 {
        bracket = Some((shots[best - 1].0, shots[best + 1].0, shots[best - 1].2));
    }
    let (mut lo, mut hi, dir_lo) = bracket.ok_or_else(|| {
        Error::NoBoundedWindow(format!(
            "no escape-direction flip around the longest shot (F''(0) ~ {:.6}, window {:.1})",
            shots[best].0, shots[best].1
        ))
    })?;
    for _ in 0..70 {
        let mid = 0.5 * (lo + hi);
        let (_, dir) = shoot(n, mid, y_max);
        if dir == dir_lo || dir == 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let d2 = 0.5 * (lo + hi);
    let (window, _) = shoot(n, d2, y_max);
    if window < 10.0 {
        return Err(Error::NoBoundedWindow(format!(
            "bounded window only {window:.2} despite bisection"
        )));
    }
    // The equation conserves H = F'F''' - F''^2/2 - F^2/2
    // + |F|^{2-alpha}/(2-alpha), and every compactly supported pattern has
    // H = 0 (it vanishes at the interface), so the periodic orbit that the
    // multi-bump patterns hug in their interiors is the zero-energy member
    // of the one-parameter symmetric orbit family.  The tuned shot starts
    // close to that level (H ~ 0.03); extract the orbit itself cleanly as
    // a symmetric half-period boundary-value problem on H = 0.
    let target_h = 0.0;
    let _ = invariant(n, &[1.5, 0.0, d2, 0.0]);
    // Family parameter: the orbit maximum M.  Solve H(orbit(M)) = target_h
    // by secant, seeded just above the equilibrium.
    let mut m0 = 1.50;
    let mut m1 = 1.58;
    let mut h0 = orbit_invariant(n, m0)? - target_h;
    let mut best: Option<HalfOrbit> = None;
    for _ in 0..60 {
        let orb1 = half_period_orbit(n, m1)?;
        let h1 = invariant_at_max(n, m1, orb1.d2_at_max) - target_h;
        if h1.abs() < 1e-12 {
            best = Some(orb1);
            break;
        }
        let m2 = m1 - h1 * (m1 - m0) / (h1 - h0);
        let m2 = m2.clamp(1.0 + 1e-3, 3.0);
        m0 = m1;
        h0 = h1;
        m1 = m2;
        best = Some(orb1);
        if (m1 - m0).abs() < 1e-13 * m1.abs() {
            break;
        }
    }
    let orb = match best {
        Some(o) => o,
        None => half_period_orbit(n, m1)?,
    };
    let period = 2.0 * orb.half_len;
    // One full period by reflecting the half orbit about its endpoint.
    let m = 1024usize;
    let mut samples = Vec::with_capacity(m + 1);
    let mut max_value = f64::NEG_INFINITY;
    let mut mean = 0.0f64;
    for j in 0..=m {
        let y = period * j as f64 / m as f64;
        let st = orb.eval(y);
        max_value = max_value.max(st[0]);
        if j < m {
            mean += st[0];
        }
        samples.push([y, st[0], st[1], st[2], st[3]]);
    }
    mean /= m as f64;
    Ok(SpatialOrbit {
        n,
        shoot_d2: d2,
        period,
        max_value,
        mean_value: mean,
        window,
        samples,
    })
}

/// First integral of `F'''' = F - |F|^{-alpha}F`:
/// `H = F'F''' - F''^2/2 - F^2/2 + (1/(2-alpha))|F|^{2-alpha}`.
pub fn invariant(n: f64, st: &[f64]) -> f64 {
    let alpha = n / (n + 1.0);
    st[1] * st[3] - 0.5 * st[2] * st[2] - 0.5 * st[0] * st[0]
        + st[0].abs().powf(2.0 - alpha) / (2.0 - alpha)
}

fn invariant_at_max(n: f64, m: f64, d2: f64) -> f64 {
    invariant(n, &[m, 0.0, d2, 0.0])
}

fn orbit_invariant(n: f64, m: f64) -> Result<f64> {
    let orb = half_period_orbit(n, m)?;
    Ok(invariant_at_max(n, m, orb.d2_at_max))
}

/// Half of a symmetric periodic orbit, from its maximum to the following
/// minimum, as a collocation solution on the unit interval.
struct HalfOrbit {
    bvp: crate::collocation::BvpSolution,
    half_len: f64,
    d2_at_max: f64,
}

impl HalfOrbit {
    /// Evaluate the full orbit at `y in [0, 2 L]` by reflecting the half.
    fn eval(&self, y: f64) -> [f64; 4] {
        let l = self.half_len;
        let y = y.rem_euclid(2.0 * l);
        let (tau, mirror) = if y <= l {
            (y / l, false)
        } else {
            ((2.0 * l - y) / l, true)
        };
        let mut u = [0.0; 5];
        self.bvp.eval(tau.clamp(0.0, 1.0), &mut u);
        // u_k = L^{k-1} F^{(k-1)}; reflection flips odd derivatives.
        let mut st = [
            u[0],
            u[1] / l,
            u[2] / (l * l),
            u[3] / (l * l * l),
        ];
        if mirror {
            st[1] = -st[1];
            st[3] = -st[3];
        }
        st
    }
}

/// Solve the symmetric half-period orbit with prescribed maximum `m`:
/// scaled state `u_k = L^{k-1} F^{(k-1)}` on `[0, 1]` plus the trivial
/// unknown `u5 = L`, with extremum conditions at both ends.
fn half_period_orbit(n: f64, m: f64) -> Result<HalfOrbit> {
    let alpha = n / (n + 1.0);
    let eps2 = 1e-18;
    let rhs = move |_t: f64, u: &[f64], du: &mut [f64]| {
        let l = u[4];
        du[0] = u[1];
        du[1] = u[2];
        du[2] = u[3];
        let f = u[0];
        let q = (eps2 + f * f).powf(-alpha / 2.0);
        du[3] = l.powi(4) * (f - q * f);
        du[4] = 0.0;
    };
    let bc = move |ua: &[f64], ub: &[f64], r: &mut [f64]| {
        r[0] = ua[0] - m;
        r[1] = ua[1];
        r[2] = ua[3];
        r[3] = ub[1];
        r[4] = ub[3];
    };
    let problem = crate::collocation::BvpProblem {
        dim: 5,
        rhs: Box::new(rhs),
        rhs_jac: None,
        bc: Box::new(bc),
        n_left: 3,
    };
    let mesh = crate::mesh::Mesh::uniform(0.0, 1.0, 41, 8000)?;
    // Half-cosine seed between the prescribed max and an estimated min,
    // with the half length seeded near half the linear period 2*pi/sqrt(2).
    let l0 = 3.7;
    let min0 = 2.0 - m;
    let amp = 0.5 * (m - min0);
    let mid = 0.5 * (m + min0);
    let pi = std::f64::consts::PI;
    let guess: Vec<f64> = mesh
        .nodes()
        .iter()
        .flat_map(|&t| {
            [
                mid + amp * (pi * t).cos(),
                -amp * pi * (pi * t).sin(),
                -amp * pi * pi * (pi * t).cos(),
                amp * pi * pi * pi * (pi * t).sin(),
                l0,
            ]
        })
        .collect();
    let opts = crate::collocation::BvpOptions {
        rtol: 1e-9,
        atol: 1e-9,
        max_nodes: 8000,
        ..Default::default()
    };
    let sol = crate::collocation::solve_bvp(&problem, &mesh, &guess, &opts)?;
    let l = sol.state(0)[4];
    if !(l > 0.5) || !l.is_finite() {
        return Err(Error::NoBoundedWindow(format!(
            "half-period solve collapsed (L = {l})"
        )));
    }
    let d2_at_max = sol.state(0)[2] / (l * l);
    Ok(HalfOrbit {
        bvp: sol,
        half_len: l,
        d2_at_max,
    })
}


/// Debug hook for the family scan: returns (d2_at_max, H, min, half_len).
pub(super) fn debug_family(n: f64, m: f64) -> Result<(f64, f64, f64, f64)> {
    let orb = half_period_orbit(n, m)?;
    let h = invariant_at_max(n, m, orb.d2_at_max);
    let min = orb.eval(orb.half_len)[0];
    Ok((orb.d2_at_max, h, min, orb.half_len))
}
