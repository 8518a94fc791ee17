//! Adaptive explicit Runge–Kutta integration.
//!
//! Dormand–Prince 5(4): fifth-order solution with embedded fourth-order
//! error estimate and a free fourth-order continuous extension.  On top of
//! the raw stepper sit event (zero-crossing) location on the dense output
//! and a Poincaré-section fixed-point search for stable periodic orbits.

use crate::error::{Error, PeriodicFailure, Result};

/// Right-hand side of a first-order system `y' = f(t, y)`.
pub trait IvpSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
}

/// Adapter turning a closure into an [`IvpSystem`].
pub struct FnSystem<F: Fn(f64, &[f64], &mut [f64])> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(f64, &[f64], &mut [f64])> IvpSystem for FnSystem<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        (self.f)(t, y, dy)
    }
}

// Dormand-Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
// Error coefficients (5th minus embedded 4th order).
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Dense-output coefficients for the fifth contribution.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// One accepted step together with its dense-output polynomial.
#[derive(Debug, Clone)]
struct StepRecord {
    t: f64,
    h: f64,
    // rcont[0..5], each of length dim.
    rcont: Vec<f64>,
}

/// Solution of an initial-value problem with continuous extension.
#[derive(Debug, Clone)]
pub struct Trajectory {
    dim: usize,
    times: Vec<f64>,
    states: Vec<f64>, // (len(times)) x dim, flattened
    steps: Vec<StepRecord>,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    /// Evaluate the dense output at `t` (must lie inside the stored span).
    pub fn eval(&self, t: f64, out: &mut [f64]) {
        self.eval_with_deriv(t, out, None);
    }

    /// Evaluate the dense output and, optionally, its time derivative.
    pub fn eval_with_deriv(&self, t: f64, out: &mut [f64], mut deriv: Option<&mut [f64]>) {
        assert!(!self.steps.is_empty(), "empty trajectory");
        let i = match self
            .steps
            .binary_search_by(|s| s.t.partial_cmp(&t).unwrap())
        {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        };
        let step = &self.steps[i.min(self.steps.len() - 1)];
        let theta = ((t - step.t) / step.h).clamp(0.0, 1.0);
        let th1 = 1.0 - theta;
        let d = self.dim;
        let rc = |k: usize, c: usize| step.rcont[k * d + c];
        for c in 0..d {
            out[c] = rc(0, c)
                + theta * (rc(1, c) + th1 * (rc(2, c) + theta * (rc(3, c) + th1 * rc(4, c))));
            if let Some(dv) = deriv.as_deref_mut() {
                // d/dtheta of rc1 + u rc2 + u v rc3 + u^2 v rc4 + u^2 v^2 rc5
                // with u = theta, v = 1 - theta.
                let (u, v) = (theta, th1);
                dv[c] = (rc(1, c)
                    + (v - u) * rc(2, c)
                    + (2.0 * u * v - u * u) * rc(3, c)
                    + (2.0 * u * v * v - 2.0 * u * u * v) * rc(4, c))
                    / step.h;
            }
        }
    }

    pub fn eval_vec(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval(t, &mut out);
        out
    }
}

/// Integration controls; `rtol`/`atol` are the only knobs most callers touch.
#[derive(Debug, Clone)]
pub struct IvpOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h0: Option<f64>,
    /// Optional cap on the step size.
    pub h_max: Option<f64>,
    pub max_steps: usize,
    /// Abort with `Unbounded` semantics if the sup norm exceeds this.
    pub bound: f64,
}

impl Default for IvpOptions {
    fn default() -> Self {
        IvpOptions {
            rtol: 1e-10,
            atol: 1e-12,
            h0: None,
            h_max: None,
            max_steps: 10_000_000,
            bound: f64::INFINITY,
        }
    }
}

struct Stepper<'a, S: IvpSystem> {
    system: &'a S,
    rtol: f64,
    atol: f64,
    t: f64,
    y: Vec<f64>,
    k1: Vec<f64>,
    h: f64,
    h_max: f64,
    dir: f64,
}

impl<'a, S: IvpSystem> Stepper<'a, S> {
    fn new(system: &'a S, t0: f64, y0: &[f64], tf: f64, opts: &IvpOptions) -> Result<Self> {
        let dim = system.dim();
        let mut k1 = vec![0.0; dim];
        system.rhs(t0, y0, &mut k1);
        if k1.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteRhs { t: t0 });
        }
        let dir = (tf - t0).signum();
        let h = opts.h0.map(|h| h.abs()).unwrap_or_else(|| {
            // Hairer-style initial step guess: h = 0.01 d0/d1 in scaled norms.
            let mut d0 = 0.0f64;
            let mut d1 = 0.0f64;
            for (y, f) in y0.iter().zip(&k1) {
                let s = opts.atol + opts.rtol * y.abs();
                d0 += (y / s) * (y / s);
                d1 += (f / s) * (f / s);
            }
            let (d0, d1) = ((d0 / dim as f64).sqrt(), (d1 / dim as f64).sqrt());
            let h = if d0 > 1e-5 && d1 > 1e-5 {
                0.01 * d0 / d1
            } else {
                1e-6 * (tf - t0).abs()
            };
            h.min((tf - t0).abs() * 0.1)
                .max(1e3 * f64::EPSILON * t0.abs().max(1.0))
        });
        Ok(Stepper {
            system,
            rtol: opts.rtol,
            atol: opts.atol,
            t: t0,
            y: y0.to_vec(),
            k1,
            h: h.min(opts.h_max.unwrap_or(f64::INFINITY)) * dir,
            h_max: opts.h_max.unwrap_or(f64::INFINITY),
            dir,
        })
    }

    /// Take one accepted step; returns the dense-output record.
    fn step(&mut self, t_cap: f64) -> Result<StepRecord> {
        let d = self.system.dim();
        let mut k2 = vec![0.0; d];
        let mut k3 = vec![0.0; d];
        let mut k4 = vec![0.0; d];
        let mut k5 = vec![0.0; d];
        let mut k6 = vec![0.0; d];
        let mut k7 = vec![0.0; d];
        let mut yt = vec![0.0; d];
        let mut ynew = vec![0.0; d];
        loop {
            let mut h = self.h;
            if h.abs() > self.h_max {
                h = self.h_max * self.dir;
            }
            // Do not step past the cap.
            if (self.t + h - t_cap) * self.dir > 0.0 {
                h = t_cap - self.t;
            }
            if h.abs() < 1e-14 * self.t.abs().max(1.0) {
                return Err(Error::StepSizeUnderflow { t: self.t });
            }
            let (t, y, k1) = (self.t, &self.y, &self.k1);
            for c in 0..d {
                yt[c] = y[c] + h * A21 * k1[c];
            }
            self.system.rhs(t + C2 * h, &yt, &mut k2);
            for c in 0..d {
                yt[c] = y[c] + h * (A31 * k1[c] + A32 * k2[c]);
            }
            self.system.rhs(t + C3 * h, &yt, &mut k3);
            for c in 0..d {
                yt[c] = y[c] + h * (A41 * k1[c] + A42 * k2[c] + A43 * k3[c]);
            }
            self.system.rhs(t + C4 * h, &yt, &mut k4);
            for c in 0..d {
                yt[c] = y[c] + h * (A51 * k1[c] + A52 * k2[c] + A53 * k3[c] + A54 * k4[c]);
            }
            self.system.rhs(t + C5 * h, &yt, &mut k5);
            for c in 0..d {
                yt[c] = y[c]
                    + h * (A61 * k1[c] + A62 * k2[c] + A63 * k3[c] + A64 * k4[c] + A65 * k5[c]);
            }
            self.system.rhs(t + h, &yt, &mut k6);
            for c in 0..d {
                ynew[c] = y[c]
                    + h * (A71 * k1[c] + A73 * k3[c] + A74 * k4[c] + A75 * k5[c] + A76 * k6[c]);
            }
            self.system.rhs(t + h, &ynew, &mut k7);
            if ynew.iter().any(|v| !v.is_finite()) || k7.iter().any(|v| !v.is_finite()) {
                // Retry with a smaller step before declaring failure.
                self.h = h * 0.25;
                if self.h.abs() < 1e-14 {
                    return Err(Error::NonFiniteRhs { t });
                }
                continue;
            }
            // Embedded error estimate.
            let mut err = 0.0f64;
            for c in 0..d {
                let e = h
                    * (E1 * k1[c] + E3 * k3[c] + E4 * k4[c] + E5 * k5[c] + E6 * k6[c]
                        + E7 * k7[c]);
                let sc = self.atol + self.rtol * y[c].abs().max(ynew[c].abs());
                err += (e / sc) * (e / sc);
            }
            err = (err / d as f64).sqrt();
            let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 5.0);
            if err <= 1.0 {
                // Accept: build dense output.
                let mut rcont = vec![0.0; 5 * d];
                for c in 0..d {
                    let ydiff = ynew[c] - y[c];
                    let bspl = h * k1[c] - ydiff;
                    rcont[c] = y[c];
                    rcont[d + c] = ydiff;
                    rcont[2 * d + c] = bspl;
                    rcont[3 * d + c] = ydiff - h * k7[c] - bspl;
                    rcont[4 * d + c] = h
                        * (D1 * k1[c]
                            + D3 * k3[c]
                            + D4 * k4[c]
                            + D5 * k5[c]
                            + D6 * k6[c]
                            + D7 * k7[c]);
                }
                let rec = StepRecord { t, h, rcont };
                self.t = t + h;
                self.y.copy_from_slice(&ynew);
                self.k1.copy_from_slice(&k7); // FSAL
                self.h = h * fac;
                return Ok(rec);
            }
            self.h = h * fac;
        }
    }
}

/// Integrate `system` from `y0` over `t_span` and keep the full dense output.
pub fn integrate<S: IvpSystem>(
    system: &S,
    y0: &[f64],
    t_span: (f64, f64),
    rtol: f64,
    atol: f64,
) -> Result<Trajectory> {
    integrate_opts(
        system,
        y0,
        t_span,
        &IvpOptions {
            rtol,
            atol,
            ..Default::default()
        },
    )
}

pub fn integrate_opts<S: IvpSystem>(
    system: &S,
    y0: &[f64],
    t_span: (f64, f64),
    opts: &IvpOptions,
) -> Result<Trajectory> {
    let (t0, tf) = t_span;
    if !(tf != t0) || !t0.is_finite() || !tf.is_finite() {
        return Err(Error::Domain(format!("degenerate t_span ({t0}, {tf})")));
    }
    if !(opts.rtol > 0.0) || !(opts.atol > 0.0) {
        return Err(Error::Domain("rtol and atol must be positive".into()));
    }
    let dim = system.dim();
    let mut stepper = Stepper::new(system, t0, y0, tf, opts)?;
    let mut traj = Trajectory {
        dim,
        times: vec![t0],
        states: y0.to_vec(),
        steps: Vec::new(),
    };
    let mut steps = 0usize;
    while (stepper.t - tf) * stepper.dir < -1e-14 * tf.abs().max(1.0) {
        let rec = stepper.step(tf)?;
        traj.steps.push(rec);
        traj.times.push(stepper.t);
        traj.states.extend_from_slice(&stepper.y);
        if stepper.y.iter().any(|v| v.abs() > opts.bound) {
            break;
        }
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::StepSizeUnderflow { t: stepper.t });
        }
    }
    Ok(traj)
}

/// Crossing direction filter for event detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Rising,
    Falling,
    Both,
}

/// Locate zero crossings of `event(t, y)` along a trajectory.
///
/// Each bracketing step is refined by bisection on the dense output until
/// `|event| <= 1e-12 * scale` with `scale` the larger endpoint magnitude
/// (or until the bracket shrinks to rounding).
pub fn detect_events<F: Fn(f64, &[f64]) -> f64>(
    trajectory: &Trajectory,
    event: F,
) -> Vec<(f64, Vec<f64>)> {
    detect_events_dir(trajectory, event, Direction::Both)
}

pub fn detect_events_dir<F: Fn(f64, &[f64]) -> f64>(
    trajectory: &Trajectory,
    event: F,
    direction: Direction,
) -> Vec<(f64, Vec<f64>)> {
    let mut out = Vec::new();
    let mut buf = vec![0.0; trajectory.dim()];
    for i in 0..trajectory.len().saturating_sub(1) {
        let (ta, tb) = (trajectory.times[i], trajectory.times[i + 1]);
        let ga = event(ta, trajectory.state(i));
        let gb = event(tb, trajectory.state(i + 1));
        let crosses = match direction {
            Direction::Rising => ga < 0.0 && gb >= 0.0,
            Direction::Falling => ga > 0.0 && gb <= 0.0,
            Direction::Both => (ga < 0.0 && gb >= 0.0) || (ga > 0.0 && gb <= 0.0),
        };
        if !crosses {
            continue;
        }
        let scale = ga.abs().max(gb.abs()).max(f64::MIN_POSITIVE);
        let (mut lo, mut hi, mut glo) = (ta, tb, ga);
        let mut tm = 0.5 * (lo + hi);
        for _ in 0..200 {
            tm = 0.5 * (lo + hi);
            trajectory.eval(tm, &mut buf);
            let gm = event(tm, &buf);
            if gm.abs() <= 1e-12 * scale || (hi - lo).abs() <= f64::EPSILON * tm.abs().max(1.0) {
                break;
            }
            if (gm > 0.0) == (glo > 0.0) {
                lo = tm;
                glo = gm;
            } else {
                hi = tm;
            }
        }
        trajectory.eval(tm, &mut buf);
        out.push((tm, buf.clone()));
    }
    out
}

/// A periodic orbit located by Poincaré iteration.
#[derive(Debug, Clone)]
pub struct PeriodicOrbit {
    pub period: f64,
    /// State on the section from which `period` returns to itself.
    pub anchor: Vec<f64>,
    /// Sample times over one period, starting at 0.
    pub times: Vec<f64>,
    /// Sample states over one period (row per time).
    pub states: Vec<Vec<f64>>,
    /// Time derivative of the dense trajectory at the sample times; the
    /// amount by which this disagrees with the right-hand side bounds the
    /// residual of the samples.
    pub deriv_states: Vec<Vec<f64>>,
    /// Final successive-return distance achieved.
    pub return_distance: f64,
}

impl PeriodicOrbit {
    /// Periodic cubic-interpolated evaluation of component `c` at phase `s`
    /// (any real; wrapped into `[0, period)`).
    pub fn eval_component(&self, c: usize, s: f64) -> f64 {
        let n = self.times.len() - 1; // last sample repeats the first
        let t = s.rem_euclid(self.period);
        let dt = self.period / n as f64;
        let j = ((t / dt).floor() as usize).min(n - 1);
        let u = t / dt - j as f64;
        let get = |k: isize| -> f64 {
            let idx = (k.rem_euclid(n as isize)) as usize;
            self.states[idx][c]
        };
        // Catmull-Rom through the four surrounding samples.
        let (p0, p1, p2, p3) = (get(j as isize - 1), get(j as isize), get(j as isize + 1), get(j as isize + 2));
        let a = 2.0 * p1;
        let b = p2 - p0;
        let c2 = 2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3;
        let c3 = -p0 + 3.0 * p1 - 3.0 * p2 + p3;
        0.5 * (a + b * u + c2 * u * u + c3 * u * u * u)
    }
}

/// Options for [`find_periodic`].
#[derive(Debug, Clone)]
pub struct PeriodicOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Successive-return convergence tolerance (sup norm).
    pub return_tol: f64,
    /// Hard bound treated as escape to infinity.
    pub bound: f64,
    /// Give up after this much time past the transient.
    pub max_search_time: f64,
    /// Number of samples stored over one period.
    pub samples: usize,
}

impl Default for PeriodicOptions {
    fn default() -> Self {
        PeriodicOptions {
            rtol: 1e-12,
            atol: 1e-14,
            return_tol: 1e-8,
            bound: 1e6,
            max_search_time: 4000.0,
            samples: 2048,
        }
    }
}

/// Find a stable periodic orbit by integrating past a transient and
/// iterating the Poincaré return map (falling crossings of `section`) to a
/// fixed point.
///
/// The orbit is declared found when successive returns agree to
/// `return_tol` in the sup norm (a lag-2 comparison is also accepted, for
/// sections crossed twice per period).  If the trajectory instead settles
/// onto an equilibrium, escapes, or fails to contract, the corresponding
/// [`PeriodicFailure`] diagnostic is returned.
pub fn find_periodic<S: IvpSystem, G: Fn(f64, &[f64]) -> f64>(
    system: &S,
    x0: &[f64],
    transient: f64,
    section: G,
) -> Result<PeriodicOrbit> {
    find_periodic_opts(system, x0, transient, section, &PeriodicOptions::default())
}

pub fn find_periodic_opts<S: IvpSystem, G: Fn(f64, &[f64]) -> f64>(
    system: &S,
    x0: &[f64],
    transient: f64,
    section: G,
    opts: &PeriodicOptions,
) -> Result<PeriodicOrbit> {
    let dim = system.dim();
    let ivp = IvpOptions {
        rtol: opts.rtol,
        atol: opts.atol,
        bound: opts.bound,
        ..Default::default()
    };
    // Transient sweep, keeping only the final state.
    let mut state = x0.to_vec();
    let mut t_now = 0.0;
    if transient > 0.0 {
        let traj = integrate_opts(system, &state, (0.0, transient), &ivp)?;
        state = traj.final_state().to_vec();
        t_now = traj.t_end();
        if state.iter().any(|v| v.abs() > opts.bound) {
            return Err(Error::NoPeriodicOrbit(PeriodicFailure::Unbounded {
                t: t_now,
                norm: state.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            }));
        }
    }
    let window = 50.0f64;
    let mut crossings: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut distances: Vec<f64> = Vec::new();
    let mut windows_without_crossing = 0usize;
    let t_deadline = t_now + opts.max_search_time;
    let mut rhs_buf = vec![0.0; dim];
    while t_now < t_deadline {
        let traj = integrate_opts(system, &state, (t_now, t_now + window), &ivp)?;
        if traj.final_state().iter().any(|v| v.abs() > opts.bound) {
            return Err(Error::NoPeriodicOrbit(PeriodicFailure::Unbounded {
                t: traj.t_end(),
                norm: traj.final_state().iter().fold(0.0f64, |m, v| m.max(v.abs())),
            }));
        }
        let found = detect_events_dir(&traj, &section, Direction::Falling);
        if found.is_empty() {
            windows_without_crossing += 1;
            // Stalled near an equilibrium: rhs and section both quiet.
            system.rhs(traj.t_end(), traj.final_state(), &mut rhs_buf);
            let speed = rhs_buf.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let scale = traj
                .final_state()
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()))
                .max(1e-30);
            if windows_without_crossing >= 2 && speed <= 1e-9 * scale.max(1.0) {
                return Err(Error::NoPeriodicOrbit(
                    PeriodicFailure::ConvergedToEquilibrium {
                        state: traj.final_state().to_vec(),
                    },
                ));
            }
            if windows_without_crossing >= 4 {
                return Err(Error::NoPeriodicOrbit(
                    PeriodicFailure::ConvergedToEquilibrium {
                        state: traj.final_state().to_vec(),
                    },
                ));
            }
        } else {
            windows_without_crossing = 0;
        }
        for (tc, sc) in found {
            if let Some((tp, sp)) = crossings.last() {
                if tc - tp < 1e-9 {
                    continue; // duplicate from window seam
                }
                let d = sc
                    .iter()
                    .zip(sp)
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                distances.push(d);
                let scale = sc.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-30);
                let tol = opts.return_tol * scale.max(1.0);
                let lag2_ok = crossings.len() >= 2 && {
                    let (_, s2) = &crossings[crossings.len() - 2];
                    sc.iter()
                        .zip(s2)
                        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
                        <= tol
                };
                if d <= tol || lag2_ok {
                    let (t_ref, anchor) = if d <= tol {
                        (*tp, sc.clone())
                    } else {
                        (crossings[crossings.len() - 2].0, sc.clone())
                    };
                    let period = tc - t_ref;
                    let dist = d.min(opts.return_tol * scale.max(1.0));
                    return sample_orbit(system, &anchor, period, dist, opts);
                }
            }
            crossings.push((tc, sc));
        }
        state = traj.final_state().to_vec();
        t_now = traj.t_end();
    }
    let tail = distances
        .iter()
        .rev()
        .take(8)
        .cloned()
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    Err(Error::NoPeriodicOrbit(PeriodicFailure::NoConvergence {
        last_distances: tail,
    }))
}

fn sample_orbit<S: IvpSystem>(
    system: &S,
    anchor: &[f64],
    period: f64,
    return_distance: f64,
    opts: &PeriodicOptions,
) -> Result<PeriodicOrbit> {
    let ivp = IvpOptions {
        rtol: opts.rtol,
        atol: opts.atol,
        bound: opts.bound,
        // Step at least as finely as the sample grid so the dense output
        // (hence the reported sample residual) is near integration accuracy.
        h_max: Some(period / (8.0 * opts.samples as f64)),
        ..Default::default()
    };
    let traj = integrate_opts(system, anchor, (0.0, period), &ivp)?;
    let m = opts.samples;
    let mut times = Vec::with_capacity(m + 1);
    let mut states = Vec::with_capacity(m + 1);
    let mut deriv_states = Vec::with_capacity(m + 1);
    let dim = system.dim();
    for j in 0..=m {
        let t = period * j as f64 / m as f64;
        let mut y = vec![0.0; dim];
        let mut dy = vec![0.0; dim];
        traj.eval_with_deriv(t.min(traj.t_end()), &mut y, Some(&mut dy));
        times.push(t);
        states.push(y);
        deriv_states.push(dy);
    }
    // A stable focus also produces converging "returns" as the spiral
    // amplitude decays into noise; a genuine orbit moves macroscopically.
    let scale = anchor.iter().fold(0.0f64, |mx, v| mx.max(v.abs())).max(1.0);
    let wobble = states.iter().fold(0.0f64, |mx, s| {
        mx.max(
            s.iter()
                .zip(anchor)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs())),
        )
    });
    if wobble <= 100.0 * opts.return_tol * scale {
        return Err(Error::NoPeriodicOrbit(
            PeriodicFailure::ConvergedToEquilibrium {
                state: anchor.to_vec(),
            },
        ));
    }
    Ok(PeriodicOrbit {
        period,
        anchor: anchor.to_vec(),
        times,
        states,
        deriv_states,
        return_distance,
    })
}
