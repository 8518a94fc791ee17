//! Variational energy and fibering functionals at `p = n+1`.
//!
//! Compactly supported profiles of the variational case are critical
//! points of
//!
//! ```text
//!   E(F) = -1/2 ∫ (F'')^2 + 1/2 ∫ F^2 - (1/nu) ∫ |F|^nu,
//!   nu = (n+2)/(n+1),
//! ```
//!
//! whose Euler-Lagrange equation is exactly `F'''' = F - |F|^{-n/(n+1)}F`.
//! The spherical fibering `F = r(v) v` on the constraint `H0(v) = 1` with
//! `H0 = -∫(F'')^2 + ∫F^2` concentrates the functional into
//! `r0(v) = (∫|v|^nu)^{1/(2-nu)}`.

use super::{integrate_reflected_impl, ProfileSolution};
use crate::error::{Error, Result};
use crate::quad::gauss_legendre;

/// Energy and fibering values of a profile.
#[derive(Debug, Clone)]
pub struct EnergyReport {
    pub nu: f64,
    /// `E(F)`.
    pub e: f64,
    /// `H0(F) = -∫(F'')^2 + ∫F^2`.
    pub h0: f64,
    /// `r0(v)` for `v = F/sqrt(H0)`; absent when `H0 <= 0`.
    pub r0: Option<f64>,
    /// `∫|v|^nu` for the same `v`; absent when `H0 <= 0`.
    pub h_tilde: Option<f64>,
}

/// Integrate `f(y, state)` over the full symmetric domain `[-R, R]` using
/// the collocation interpolant with parity reflection.
pub fn integrate_reflected<G: FnMut(f64, &[f64; 4]) -> f64>(
    sol: &ProfileSolution,
    subdivide: usize,
    f: G,
) -> f64 {
    integrate_reflected_impl(sol, subdivide, f)
}

/// Evaluate the energy and fibering functionals of a profile.
pub fn energy(sol: &ProfileSolution, n: f64) -> Result<EnergyReport> {
    if !(n > 0.0) {
        return Err(Error::Domain(format!("n must be positive, got {n}")));
    }
    let nu = (n + 2.0) / (n + 1.0);
    let bend = integrate_reflected(sol, 2, |_y, st| st[2] * st[2]);
    let mass = integrate_reflected(sol, 2, |_y, st| st[0] * st[0]);
    let pot = integrate_reflected(sol, 4, |_y, st| st[0].abs().powf(nu));
    let e = -0.5 * bend + 0.5 * mass - pot / nu;
    let h0 = -bend + mass;
    if h0 > 0.0 {
        let sqrt_h0 = h0.sqrt();
        // v = F / sqrt(H0): ∫|v|^nu = H0^{-nu/2} ∫|F|^nu.
        let h_tilde = pot / sqrt_h0.powf(nu);
        let r0 = h_tilde.powf(1.0 / (2.0 - nu));
        Ok(EnergyReport {
            nu,
            e,
            h0,
            r0: Some(r0),
            h_tilde: Some(h_tilde),
        })
    } else {
        Ok(EnergyReport {
            nu,
            e,
            h0,
            r0: None,
            h_tilde: None,
        })
    }
}

/// Central finite-difference directional derivative of `E` at the profile
/// in the direction `v` (given with its second derivative), step `h`.
pub fn energy_directional_fd(
    sol: &ProfileSolution,
    n: f64,
    v: &dyn Fn(f64) -> (f64, f64),
    h: f64,
) -> f64 {
    let nu = (n + 2.0) / (n + 1.0);
    let e_of = |s: f64| -> f64 {
        let (nodes, weights) = gauss_legendre(7);
        let mesh = sol.bvp.mesh.nodes();
        let mut acc = 0.0;
        // Mirror of the positive-half mesh covers [-R, R].
        let mut intervals: Vec<(f64, f64)> = Vec::with_capacity(2 * mesh.len());
        for w in mesh.windows(2) {
            intervals.push((-w[1], -w[0]));
        }
        for w in mesh.windows(2) {
            intervals.push((w[0], w[1]));
        }
        for (a, b) in intervals {
            for sub in 0..4 {
                let lo = a + (b - a) * sub as f64 / 4.0;
                let hi = a + (b - a) * (sub + 1) as f64 / 4.0;
                let mid = 0.5 * (lo + hi);
                let half = 0.5 * (hi - lo);
                for (x, w) in nodes.iter().zip(weights) {
                    let y = mid + half * x;
                    let st = sol.eval_state(y);
                    let (vv, vpp) = v(y);
                    let fpp = st[2] + s * vpp;
                    let f = st[0] + s * vv;
                    acc += w
                        * half
                        * (-0.5 * fpp * fpp + 0.5 * f * f - f.abs().powf(nu) / nu);
                }
            }
        }
        acc
    };
    (e_of(h) - e_of(-h)) / (2.0 * h)
}

#[cfg(test)]
mod tests {
    use super::super::{ProfileGuess, ProfileProblemSpec, ProfileSolution};
    use super::*;
    use crate::collocation::BvpSolution;
    use crate::mesh::Mesh;

    /// Synthetic profile carrying an analytic function for which the energy
    /// integrals have closed forms.
    fn synthetic(c: f64) -> ProfileSolution {
        let spec = ProfileProblemSpec::new(1.0, 2.0).unwrap().with_radius(10.0);
        let mesh = Mesh::uniform(0.0, 10.0, 401, 20000).unwrap();
        // F = c cos^2(pi y / 20) on [-10, 10] via the cap guess shape.
        let l = 10.0f64;
        let pi = std::f64::consts::PI;
        let f = move |y: f64| -> [f64; 4] {
            let a = pi * y / (2.0 * l);
            [
                c * a.cos().powi(2),
                -c * pi / (2.0 * l) * (2.0 * a).sin(),
                -c * pi * pi / (2.0 * l * l) * (2.0 * a).cos(),
                c * pi * pi * pi / (2.0 * l * l * l) * (2.0 * a).sin(),
            ]
        };
        let states: Vec<f64> = mesh.nodes().iter().flat_map(|&y| f(y)).collect();
        // Derivative states double as f-values for interpolation: the
        // integrals below only read components 0 and 2 at sample points,
        // and the quartic reproduces the shape well on this fine mesh.
        let mut f_nodes = Vec::with_capacity(states.len());
        for &y in mesh.nodes() {
            let st = f(y);
            // d/dy of each component: shift up, last from the analytic form.
            let a = pi * y / (2.0 * l);
            let d4 = c * (pi / (2.0 * l)).powi(4) * 8.0 * (2.0 * a).cos();
            f_nodes.extend_from_slice(&[st[1], st[2], st[3], d4]);
        }
        let mut y_mid = Vec::with_capacity((mesh.len() - 1) * 4);
        for i in 0..mesh.len() - 1 {
            let ym = 0.5 * (mesh.nodes()[i] + mesh.nodes()[i + 1]);
            y_mid.extend_from_slice(&f(ym));
        }
        let bvp = BvpSolution {
            dim: 4,
            mesh,
            states,
            f_nodes,
            y_mid,
            residual: 0.0,
            newton_iterations: 0,
            rtol: 1e-10,
            atol: 1e-10,
        };
        let _ = ProfileGuess::default_cap(&spec);
        ProfileSolution {
            spec,
            bvp,
            residual: 0.0,
            tol: 1e-10,
            y0: None,
            zero_count: None,
            sigma: None,
        }
    }

    #[test]
    fn zero_profile_has_zero_energy() {
        let mut sol = synthetic(0.0);
        for v in sol.bvp.states.iter_mut() {
            *v = 0.0;
        }
        for v in sol.bvp.f_nodes.iter_mut() {
            *v = 0.0;
        }
        for v in sol.bvp.y_mid.iter_mut() {
            *v = 0.0;
        }
        let rep = energy(&sol, 1.0).unwrap();
        assert_eq!(rep.e, 0.0);
        assert_eq!(rep.h0, 0.0);
        assert!(rep.r0.is_none());
    }

    #[test]
    fn nu_value_and_closed_form_integrals() {
        // For F = c cos^2(pi y/20) on [-10,10]:
        //   ∫F^2 = c^2 * 2L * 3/8 with L=10  (mean of cos^4 is 3/8)
        //   ∫(F'')^2 = c^2 (pi/10)^4 /4 * 2L * 1/2 (mean of cos^2 is 1/2)
        let c = 1.3;
        let sol = synthetic(c);
        let rep = energy(&sol, 1.0).unwrap();
        assert!((rep.nu - 1.5).abs() < 1e-15);
        let l = 10.0f64;
        let mass = c * c * 2.0 * l * 3.0 / 8.0;
        let k = std::f64::consts::PI / l; // F'' = -c k^2/2 cos(k y)
        let bend = (c * k * k / 2.0) * (c * k * k / 2.0) * 2.0 * l * 0.5;
        let h0_want = mass - bend;
        assert!(
            (rep.h0 - h0_want).abs() < 1e-6 * h0_want.abs(),
            "{} vs {h0_want}",
            rep.h0
        );
        // r0 and h_tilde are consistent: r0 = h_tilde^{1/(2-nu)}.
        let r0 = rep.r0.unwrap();
        let ht = rep.h_tilde.unwrap();
        assert!((r0 - ht.powf(2.0)).abs() < 1e-10 * r0.abs());
    }
}
