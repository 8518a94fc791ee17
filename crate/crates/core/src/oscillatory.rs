//! Local analysis of solutions near interfaces.
//!
//! Near a moving interface the travelling-wave reduction of the equation
//! gives `F''' = -|F|^{-n/(n+1)} F` (forward waves, scaled speed -1).
//! Substituting `F(y) = y^mu phi(ln y)` with `mu = 3(n+1)/n` turns this
//! into an autonomous ODE for the oscillatory component `phi`,
//!
//! ```text
//!     P3(phi) = -|phi|^{-n/(n+1)} phi,
//! ```
//!
//! built from the operator family `P_{k+1} = P_k' + (mu - k) P_k`.  Its
//! bounded orbits are periodic and describe the sign-changing oscillations
//! of profiles at their interfaces.  For the opposite wave direction the
//! sign flips, the equation has constant equilibria instead, and the
//! linearization there has all characteristic roots in the left half
//! plane, so backward waves carry no oscillatory bundle.

use crate::error::{Error, Result};
use crate::odeint::{self, FnSystem, PeriodicOptions};
use num_complex::Complex64;

/// Which equation an interface exponent refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterfaceOrder {
    /// Integrated travelling-wave equation (third order): `mu = 3(n+1)/n`.
    TwThirdOrder,
    /// Full profile equation (fourth order): `mu = 4(n+1)/n`.
    ProfileFourthOrder,
}

/// Wave direction of the local analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveDirection {
    /// Forward waves (scaled speed -1): oscillatory component.
    Oscillatory,
    /// Backward waves (+1): non-oscillatory, monotone approach.
    NonOscillatory,
}

/// `mu` for the requested equation order.  `n = +inf` is accepted and gives
/// the limit exponents 3 and 4.
pub fn interface_exponent(n: f64, order: InterfaceOrder) -> Result<f64> {
    if !(n > 0.0) {
        return Err(Error::Domain(format!("n must be positive, got {n}")));
    }
    let k = match order {
        InterfaceOrder::TwThirdOrder => 3.0,
        InterfaceOrder::ProfileFourthOrder => 4.0,
    };
    if n.is_infinite() {
        return Ok(k);
    }
    Ok(k * (n + 1.0) / n)
}

/// Coefficients of `P_k`, highest derivative first, via the recursion
/// `P_{k+1} = P_k' + (mu - k) P_k`, `P_0 = id`.
pub fn pk_coefficients(k: usize, mu: f64) -> Vec<f64> {
    // coeffs[j] multiplies phi^{(k-j)}.
    let mut coeffs = vec![1.0];
    for step in 0..k {
        let factor = mu - step as f64;
        let mut next = vec![0.0; coeffs.len() + 1];
        // Differentiation shifts every term up one derivative order.
        for (j, c) in coeffs.iter().enumerate() {
            next[j] += c;
        }
        for (j, c) in coeffs.iter().enumerate() {
            next[j + 1] += factor * c;
        }
        coeffs = next;
    }
    coeffs
}

/// Equilibria of the non-oscillatory component equation
/// `P3(phi) = |phi|^{-n/(n+1)} phi` with `mu = 3(n+1)/n`:
/// `phi± = ±[mu(mu-1)(mu-2)]^{-(n+1)/n}`.
pub fn nonosc_equilibria(n: f64) -> Result<(f64, f64)> {
    let mu = interface_exponent(n, InterfaceOrder::TwThirdOrder)?;
    let k = mu * (mu - 1.0) * (mu - 2.0);
    let expo = if n.is_infinite() { 1.0 } else { (n + 1.0) / n };
    let phi = k.powf(-expo);
    Ok((phi, -phi))
}

/// Characteristic data of the linearization about the non-oscillatory
/// equilibria.
#[derive(Debug, Clone)]
pub struct CharSpectrum {
    pub mu: f64,
    /// Monic cubic coefficients `[1, 3(mu-1), 3mu^2-6mu+2, 3(mu-1)(mu-2)]`.
    pub coefficients: [f64; 4],
    pub roots: [Complex64; 3],
    /// Whether all roots satisfy `Re lambda < 0` (expected for mu > 3).
    pub all_stable: bool,
}

/// Solve the characteristic cubic of the linearized operator
/// `P3 - (1/(n+1)) mu(mu-1)(mu-2) I`:
///
/// ```text
///   lambda^3 + 3(mu-1) lambda^2 + (3mu^2 - 6mu + 2) lambda
///            + 3(mu-1)(mu-2) = 0.
/// ```
///
/// Stability of the roots is reported as data, never asserted.
pub fn char_spectrum(mu: f64) -> Result<CharSpectrum> {
    if !(mu > 3.0) {
        return Err(Error::Domain(format!("mu must exceed 3, got {mu}")));
    }
    let b = 3.0 * (mu - 1.0);
    let c = 3.0 * mu * mu - 6.0 * mu + 2.0;
    let d = 3.0 * (mu - 1.0) * (mu - 2.0);
    let roots = cubic_roots(b, c, d);
    let all_stable = roots.iter().all(|r| r.re < 0.0);
    Ok(CharSpectrum {
        mu,
        coefficients: [1.0, b, c, d],
        roots,
        all_stable,
    })
}

/// Roots of the monic cubic `x^3 + b x^2 + c x + d`.
fn cubic_roots(b: f64, c: f64, d: f64) -> [Complex64; 3] {
    // One real root by shifted Cardano plus Newton polishing.
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let disc = (q / 2.0) * (q / 2.0) + (p / 3.0) * (p / 3.0) * (p / 3.0);
    let t = if disc >= 0.0 {
        let s = disc.sqrt();
        (-q / 2.0 + s).cbrt() + (-q / 2.0 - s).cbrt()
    } else {
        // Three real roots; take the trigonometric one.
        let r = (-p / 3.0).sqrt();
        let phi = (-q / (2.0 * r * r * r)).clamp(-1.0, 1.0).acos();
        2.0 * r * (phi / 3.0).cos()
    };
    let mut x = t - b / 3.0;
    for _ in 0..50 {
        let f = ((x + b) * x + c) * x + d;
        let df = (3.0 * x + 2.0 * b) * x + c;
        if df == 0.0 {
            break;
        }
        let dx = f / df;
        x -= dx;
        if dx.abs() <= 1e-16 * x.abs().max(1.0) {
            break;
        }
    }
    // Deflate: x^3 + bx^2 + cx + d = (x - x0)(x^2 + e x + f).
    let e = b + x;
    let f = c + x * e;
    let half = -e / 2.0;
    let disc2 = half * half - f;
    if disc2 >= 0.0 {
        let s = disc2.sqrt();
        [
            Complex64::new(x, 0.0),
            Complex64::new(half - s, 0.0),
            Complex64::new(half + s, 0.0),
        ]
    } else {
        let s = (-disc2).sqrt();
        [
            Complex64::new(x, 0.0),
            Complex64::new(half, -s),
            Complex64::new(half, s),
        ]
    }
}

/// The periodic oscillatory interface component.
#[derive(Debug, Clone)]
pub struct OscComponent {
    pub n: f64,
    /// Exponent of the interface ansatz (here always the TW value).
    pub mu: f64,
    pub direction: WaveDirection,
    pub period: f64,
    /// One-period samples `(s, phi, phi', phi'')`, in original phi units.
    pub samples: Vec<[f64; 4]>,
    /// `max |phi|` over the period.
    pub amplitude: f64,
    /// Max component-equation residual along the samples (finite-difference
    /// check, independent of the integrator's own right-hand side).
    pub residual: f64,
    /// Measured deviation of `-phi(s + T/2)` from `phi(s)` relative to the
    /// amplitude.  Recorded as metadata; half-period antisymmetry is not
    /// asserted anywhere.
    pub half_period_antisymmetry: f64,
}

impl OscComponent {
    /// Periodic evaluation of `phi` at phase `s`.
    pub fn phi(&self, s: f64) -> f64 {
        self.eval(s, 0)
    }

    /// Periodic cubic-interpolated evaluation of component `0..3`
    /// (`phi`, `phi'`, `phi''`).
    pub fn eval(&self, s: f64, component: usize) -> f64 {
        let m = self.samples.len() - 1;
        let t = s.rem_euclid(self.period);
        let dt = self.period / m as f64;
        let j = ((t / dt).floor() as usize).min(m - 1);
        let u = t / dt - j as f64;
        let get = |k: isize| -> f64 {
            let idx = (k.rem_euclid(m as isize)) as usize;
            self.samples[idx][component + 1]
        };
        let (p0, p1, p2, p3) = (
            get(j as isize - 1),
            get(j as isize),
            get(j as isize + 1),
            get(j as isize + 2),
        );
        let a = 2.0 * p1;
        let bb = p2 - p0;
        let c2 = 2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3;
        let c3 = -p0 + 3.0 * p1 - 3.0 * p2 + p3;
        0.5 * (a + bb * u + c2 * u * u + c3 * u * u * u)
    }

    /// Sign changes of `phi` over one period.
    pub fn sign_changes_per_period(&self) -> usize {
        let mut count = 0;
        for w in self.samples.windows(2) {
            if w[0][1] != 0.0 && w[1][1] != 0.0 && (w[0][1] > 0.0) != (w[1][1] > 0.0) {
                count += 1;
            }
        }
        count
    }
}

/// Signum with `sign(0) = 0` (f64::signum maps +-0 to +-1).
#[inline]
pub(crate) fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// The component equation in equilibrium-scaled form.
///
/// With `phi = A psi`, `A = K^{-(n+1)/n}`, `K = mu(mu-1)(mu-2)`, the
/// equation `P3(phi) = sign |phi|^{-alpha} phi` becomes
/// `P3(psi) = sign K |psi|^{1-alpha} sgn(psi)`, whose orbits are O(1) for
/// every n.  This is the extra scaling needed once the component amplitude
/// collapses for small n.
fn component_system(
    n: f64,
    sign: f64,
) -> Result<(FnSystem<impl Fn(f64, &[f64], &mut [f64])>, f64, f64)> {
    let mu = interface_exponent(n, InterfaceOrder::TwThirdOrder)?;
    let k = mu * (mu - 1.0) * (mu - 2.0);
    let scale = if n.is_infinite() {
        1.0 / k
    } else {
        k.powf(-(n + 1.0) / n)
    };
    let c2 = 3.0 * (mu - 1.0);
    let c1 = 3.0 * mu * mu - 6.0 * mu + 2.0;
    let power = if n.is_infinite() { 0.0 } else { 1.0 / (n + 1.0) };
    let sys = FnSystem {
        dim: 3,
        f: move |_s: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = y[2];
            let nl = if y[0] == 0.0 {
                0.0
            } else {
                y[0].abs().powf(power) * sgn(y[0])
            };
            dy[2] = -c2 * y[2] - c1 * y[1] - k * y[0] + sign * k * nl;
        },
    };
    Ok((sys, scale, mu))
}

/// Compute the stable periodic orbit of the oscillatory component equation
/// for the given `n` (use `f64::INFINITY` for the sign-limit equation).
///
/// The Poincaré section is `phi' = 0` crossed downward (maxima of `phi`).
pub fn oscillatory_orbit(n: f64) -> Result<OscComponent> {
    oscillatory_orbit_from(n, &[1.0, 0.0, 0.0])
}

/// As [`oscillatory_orbit`] but from caller-chosen initial data, given in
/// equilibrium-scaled units (O(1) values are good starting points).
pub fn oscillatory_orbit_from(n: f64, x0_scaled: &[f64]) -> Result<OscComponent> {
    let (sys, scale, mu) = component_system(n, -1.0)?;
    let opts = PeriodicOptions {
        rtol: 1e-12,
        atol: 1e-13,
        return_tol: 1e-9,
        bound: 1e4,
        ..Default::default()
    };
    let orbit = odeint::find_periodic_opts(&sys, x0_scaled, 200.0, |_s, y| y[1], &opts)?;
    let m = orbit.times.len();
    let mut samples = Vec::with_capacity(m);
    for j in 0..m {
        let st = &orbit.states[j];
        samples.push([orbit.times[j], scale * st[0], scale * st[1], scale * st[2]]);
    }
    let amplitude = samples.iter().fold(0.0f64, |mx, s| mx.max(s[1].abs()));
    // Residual of the samples: the dense-trajectory derivative of phi''
    // against the component right-hand side.  (A finite-difference check
    // is useless here: the equation has a |phi|^{1/(n+1)} cusp at the sign
    // changes, so high differences of the samples diverge there, while the
    // adaptive integrator resolves the cusp with its own step control.)
    let c2 = 3.0 * (mu - 1.0);
    let c1 = 3.0 * mu * mu - 6.0 * mu + 2.0;
    let c0 = mu * (mu - 1.0) * (mu - 2.0);
    let power = if n.is_infinite() { 0.0 } else { 1.0 / (n + 1.0) };
    let mm = m - 1;
    let amp_scaled = amplitude / scale;
    let mut residual = 0.0f64;
    for j in 0..mm {
        let st = &orbit.states[j];
        // The phi''' equation is checked away from the sign changes, where
        // the right-hand side is non-Lipschitz and a pointwise residual
        // measures representation error rather than solution error; the
        // return-map distance covers the orbit globally.
        if st[0].abs() >= 0.01 * amp_scaled {
            let nl = st[0].abs().powf(power) * sgn(st[0]);
            let rhs3 = -c2 * st[2] - c1 * st[1] - c0 * st[0] - c0 * nl;
            residual = residual.max((orbit.deriv_states[j][2] - rhs3).abs() * scale);
        }
        let r01 = (orbit.deriv_states[j][0] - st[1])
            .abs()
            .max((orbit.deriv_states[j][1] - st[2]).abs());
        residual = residual.max(r01 * scale);
    }
    let comp = OscComponent {
        n,
        mu,
        direction: WaveDirection::Oscillatory,
        period: orbit.period,
        samples,
        amplitude,
        residual,
        half_period_antisymmetry: 0.0,
    };
    // Half-period antisymmetry deviation, relative to amplitude.
    let mut dev = 0.0f64;
    for j in 0..mm {
        let s = comp.period * j as f64 / mm as f64;
        dev = dev.max((comp.phi(s) + comp.phi(s + 0.5 * comp.period)).abs());
    }
    Ok(OscComponent {
        half_period_antisymmetry: dev / amplitude,
        ..comp
    })
}

/// Integrate the non-oscillatory component equation (`lambda = +1`) from
/// scaled initial data; used to confirm equilibrium stability.  Returns the
/// final scaled state.
pub fn nonosc_flow(n: f64, x0_scaled: &[f64], s_end: f64) -> Result<Vec<f64>> {
    let (sys, _scale, _mu) = component_system(n, 1.0)?;
    let traj = odeint::integrate(&sys, x0_scaled, (0.0, s_end), 1e-10, 1e-12)?;
    Ok(traj.final_state().to_vec())
}

/// Attempt a periodic-orbit search on the non-oscillatory equation; the
/// expected outcome near an equilibrium is `ConvergedToEquilibrium`.
pub fn nonosc_periodic_attempt(n: f64, x0_scaled: &[f64]) -> Result<odeint::PeriodicOrbit> {
    let (sys, _scale, _mu) = component_system(n, 1.0)?;
    odeint::find_periodic(&sys, x0_scaled, 100.0, |_s, y| y[1])
}

/// Local interface expansion selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpansionBranch {
    /// Two-parameter oscillatory bundle `F = (y0-y)^mu phi*(ln(y0-y)+s0)`.
    Oscillatory2D,
    /// One-parameter positive bundle
    /// `f = (y-y0)^{3/n} [mu(mu-1)(mu-2)]^{-1/n} (1+o(1))`.
    NonOscillatory1D,
}

/// Evaluator for the local expansions near an interface point `y0`.
///
/// The oscillatory branch describes the transformed profile `F` on the
/// support side (`y < y0`); the non-oscillatory branch describes the
/// untransformed profile `f` on the far side (`y > y0`).
pub struct LocalExpansion {
    pub branch: ExpansionBranch,
    pub y0: f64,
    pub s0: f64,
    pub n: f64,
    /// Half-width of the validity window around `y0`.
    pub window: f64,
    component: Option<OscComponent>,
}

impl LocalExpansion {
    pub fn oscillatory(n: f64, y0: f64, s0: f64, component: OscComponent, window: f64) -> Self {
        LocalExpansion {
            branch: ExpansionBranch::Oscillatory2D,
            y0,
            s0,
            n,
            window,
            component: Some(component),
        }
    }

    pub fn non_oscillatory(n: f64, y0: f64, window: f64) -> Self {
        LocalExpansion {
            branch: ExpansionBranch::NonOscillatory1D,
            y0,
            s0: 0.0,
            n,
            window,
            component: None,
        }
    }

    pub fn eval(&self, y: f64) -> Result<f64> {
        if (y - self.y0).abs() > self.window {
            return Err(Error::Domain(format!(
                "y = {y} outside validity window |y - {}| <= {}",
                self.y0, self.window
            )));
        }
        match self.branch {
            ExpansionBranch::Oscillatory2D => {
                let comp = self
                    .component
                    .as_ref()
                    .expect("oscillatory expansion has component");
                if y >= self.y0 {
                    return Ok(0.0);
                }
                let r = self.y0 - y;
                Ok(r.powf(comp.mu) * comp.phi(r.ln() + self.s0))
            }
            ExpansionBranch::NonOscillatory1D => {
                if y <= self.y0 {
                    return Ok(0.0);
                }
                let mu = interface_exponent(self.n, InterfaceOrder::TwThirdOrder)?;
                let k = mu * (mu - 1.0) * (mu - 2.0);
                Ok((y - self.y0).powf(3.0 / self.n) * k.powf(-1.0 / self.n))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pk_reference_coefficients() {
        let mu = 4.3;
        assert_eq!(pk_coefficients(0, mu), vec![1.0]);
        assert_eq!(pk_coefficients(1, mu), vec![1.0, mu]);
        let p2 = pk_coefficients(2, mu);
        assert!((p2[0] - 1.0).abs() < 1e-15);
        assert!((p2[1] - (2.0 * mu - 1.0)).abs() < 1e-13);
        assert!((p2[2] - mu * (mu - 1.0)).abs() < 1e-13);
        let p3 = pk_coefficients(3, mu);
        assert!((p3[1] - 3.0 * (mu - 1.0)).abs() < 1e-13);
        assert!((p3[2] - (3.0 * mu * mu - 6.0 * mu + 2.0)).abs() < 1e-12);
        assert!((p3[3] - mu * (mu - 1.0) * (mu - 2.0)).abs() < 1e-12);
    }

    #[test]
    fn pk_leading_and_constant_terms() {
        // Leading coefficient 1; constant term is the falling factorial.
        for k in 0..=6usize {
            for &mu in &[3.5, 6.0, 8.0, 11.25] {
                let coeffs = pk_coefficients(k, mu);
                assert_eq!(coeffs.len(), k + 1);
                assert_eq!(coeffs[0], 1.0);
                let mut ff = 1.0;
                for j in 0..k {
                    ff *= mu - j as f64;
                }
                assert!(
                    (coeffs[k] - ff).abs() < 1e-11 * ff.abs().max(1.0),
                    "k={k}, mu={mu}"
                );
            }
        }
    }

    #[test]
    fn interface_exponent_values() {
        assert_eq!(
            interface_exponent(1.0, InterfaceOrder::TwThirdOrder).unwrap(),
            6.0
        );
        assert_eq!(
            interface_exponent(1.0, InterfaceOrder::ProfileFourthOrder).unwrap(),
            8.0
        );
        assert_eq!(
            interface_exponent(3.0, InterfaceOrder::TwThirdOrder).unwrap(),
            4.0
        );
        assert!(interface_exponent(0.0, InterfaceOrder::TwThirdOrder).is_err());
        assert!(interface_exponent(-1.0, InterfaceOrder::TwThirdOrder).is_err());
    }

    #[test]
    fn nonosc_equilibria_values() {
        let (plus, minus) = nonosc_equilibria(1.0).unwrap();
        assert!((plus - 1.0 / (120.0 * 120.0)).abs() < 1e-18);
        assert_eq!(plus, -minus);
        let (plus_inf, _) = nonosc_equilibria(f64::INFINITY).unwrap();
        assert!((plus_inf - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn equilibrium_satisfies_component_equation_exactly() {
        // P3(phi+) = mu(mu-1)(mu-2) phi+ must equal |phi+|^{-alpha} phi+.
        for &n in &[0.75, 1.0, 2.0, 5.0] {
            let mu = interface_exponent(n, InterfaceOrder::TwThirdOrder).unwrap();
            let k = mu * (mu - 1.0) * (mu - 2.0);
            let (phi, _) = nonosc_equilibria(n).unwrap();
            let lhs = k * phi;
            let rhs = phi.abs().powf(-n / (n + 1.0)) * phi;
            assert!(
                (lhs - rhs).abs() <= 1e-12 * lhs.abs(),
                "n={n}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn char_spectrum_mu6() {
        let spec = char_spectrum(6.0).unwrap();
        assert_eq!(spec.coefficients, [1.0, 15.0, 74.0, 60.0]);
        let mut reals: Vec<f64> = spec.roots.iter().map(|r| r.re).collect();
        reals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let s11 = 11f64.sqrt();
        assert!((reals[0] + 7.0).abs() < 1e-10 && (reals[1] + 7.0).abs() < 1e-10);
        assert!((reals[2] + 1.0).abs() < 1e-10);
        let mut ims: Vec<f64> = spec.roots.iter().map(|r| r.im.abs()).collect();
        ims.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(ims[0].abs() < 1e-12);
        assert!((ims[2] - s11).abs() < 1e-10);
        assert!(spec.all_stable);
    }

    #[test]
    fn char_spectrum_vieta_and_stability() {
        for &mu in &[4.0, 6.0, 8.0, 12.0] {
            let spec = char_spectrum(mu).unwrap();
            let sum: Complex64 = spec.roots.iter().sum();
            assert!((sum.re + 3.0 * (mu - 1.0)).abs() < 1e-10 * mu * mu);
            assert!(sum.im.abs() < 1e-10);
            let prod: Complex64 = spec.roots.iter().product();
            assert!(
                (prod.re + 3.0 * (mu - 1.0) * (mu - 2.0)).abs() < 1e-9 * mu * mu * mu,
                "mu={mu}: {prod}"
            );
            assert!(spec.all_stable, "mu={mu}");
        }
        assert!(char_spectrum(3.0).is_err());
    }

    #[test]
    fn oscillatory_orbit_exists_at_n1() {
        let comp = oscillatory_orbit(1.0).unwrap();
        assert!(comp.period.is_finite() && comp.period > 0.0);
        assert!(comp.amplitude.is_finite() && comp.amplitude > 0.0);
        assert!(
            comp.residual <= 1e-6 * comp.amplitude,
            "residual {} vs amplitude {}",
            comp.residual,
            comp.amplitude
        );
        assert_eq!(comp.sign_changes_per_period(), 2);
    }

    #[test]
    fn nonosc_orbit_attempt_reports_equilibrium() {
        // Start near the scaled equilibrium +1 of the backward-wave ODE.
        let err = nonosc_periodic_attempt(5.0, &[1.05, 0.0, 0.0]).unwrap_err();
        match err {
            Error::NoPeriodicOrbit(crate::error::PeriodicFailure::ConvergedToEquilibrium {
                state,
            }) => {
                assert!((state[0] - 1.0).abs() < 1e-3, "settled at {}", state[0]);
            }
            other => panic!("expected equilibrium diagnosis, got {other:?}"),
        }
    }

    #[test]
    fn local_expansion_oscillatory_bounds_and_periodicity() {
        let comp = oscillatory_orbit(1.0).unwrap();
        let period = comp.period;
        let max_phi = comp.amplitude;
        let exp = LocalExpansion::oscillatory(1.0, 2.0, 0.3, comp.clone(), 1.5);
        let exp_shifted = LocalExpansion::oscillatory(1.0, 2.0, 0.3 + period, comp, 1.5);
        for j in 1..200 {
            let y = 2.0 - 1.4 * j as f64 / 200.0;
            let v = exp.eval(y).unwrap();
            let r: f64 = 2.0 - y;
            assert!(v.abs() <= r.powf(6.0) * max_phi * (1.0 + 1e-9));
            // One-period shift of s0 gives the identical evaluator.
            let v2 = exp_shifted.eval(y).unwrap();
            assert!((v - v2).abs() <= 1e-9 * max_phi);
        }
        assert!(exp.eval(0.2).is_err());
    }

    #[test]
    fn local_expansion_nonoscillatory_leading_order() {
        // n=1, y0=0: f(y) = y^3/120 to leading order.
        let exp = LocalExpansion::non_oscillatory(1.0, 0.0, 1.0);
        for &y in &[0.1, 0.3, 0.7] {
            let v = exp.eval(y).unwrap();
            assert!((v - y.powi(3) / 120.0).abs() < 1e-14);
        }
    }
}
