//! Far-field asymptotics of single-point blow-up profiles (`p > n+1`).
//!
//! For `p > n+1` the profile decays algebraically,
//!
//! ```text
//!     f(y) ~ C0 y^gamma + C1 e^{-b0 y^nu},    y -> +inf,
//! ```
//!
//! a two-parameter bundle; passing to the blow-up time gives the finite
//! final-time profile `u(x, T^-) = C0 |x|^{-4/(p-(n+1))}` away from the
//! origin.

use super::ProfileSolution;
use crate::error::{Error, Result};
use crate::params::beta;

/// The algebraic/exponential far-field bundle in `f` units.
#[derive(Debug, Clone)]
pub struct FarField {
    pub c0: f64,
    pub c1: f64,
    /// `-4/(p-(n+1))`.
    pub gamma: f64,
    /// `4(p-1)/(3(p-(n+1)))`.
    pub nu: f64,
    /// `(1/nu) (beta C0^{-n}/(n+1))^{1/3}`.
    pub b0: f64,
}

impl FarField {
    pub fn new(n: f64, p: f64, c0: f64, c1: f64) -> Result<Self> {
        if !(p > n + 1.0) {
            return Err(Error::Domain(format!(
                "far-field bundle requires p > n+1 (got n={n}, p={p})"
            )));
        }
        if c0 == 0.0 {
            return Err(Error::Domain("C0 must be nonzero".into()));
        }
        let gap = p - (n + 1.0);
        let gamma = -4.0 / gap;
        let nu = 4.0 * (p - 1.0) / (3.0 * gap);
        let b = beta(n, p)?;
        let b0 = (b * c0.abs().powf(-n) / (n + 1.0)).powf(1.0 / 3.0) / nu;
        Ok(FarField {
            c0,
            c1,
            gamma,
            nu,
            b0,
        })
    }

    /// Extract the bundle from a converged far-field solve:
    /// `C0 = f(R) R^{-gamma}` (the exponential part is unresolvable at R).
    pub fn from_solution(sol: &ProfileSolution) -> Result<Self> {
        let n = sol.spec.params.n;
        let p = sol.spec.params.p;
        let r = sol.spec.radius;
        let f_r = sol.eval_f_untransformed(r);
        if f_r == 0.0 {
            return Err(Error::Domain("profile vanishes at R; no algebraic tail".into()));
        }
        let gap = p - (n + 1.0);
        let gamma = -4.0 / gap;
        FarField::new(n, p, f_r * r.powf(-gamma), 0.0)
    }

    /// `f(y) ~ C0 y^gamma + C1 e^{-b0 y^nu}`, valid for large `y`.
    pub fn eval_f(&self, y: f64) -> Result<f64> {
        if !(y > 0.0) {
            return Err(Error::Domain(format!("far field needs y > 0, got {y}")));
        }
        Ok(self.c0 * y.powf(self.gamma) + self.c1 * (-self.b0 * y.powf(self.nu)).exp())
    }

    /// Final-time profile `u(x, T^-) = C0 |x|^gamma` for `x != 0`.
    pub fn final_time(&self, x: f64) -> Result<f64> {
        if x == 0.0 {
            return Err(Error::Domain("final-time profile diverges at x = 0".into()));
        }
        Ok(self.c0 * x.abs().powf(self.gamma))
    }
}

/// Convenience: far-field value for given constants.
pub fn farfield_eval(ff: &FarField, y: f64) -> Result<f64> {
    ff.eval_f(y)
}

/// Convenience: the final-time profile evaluator.
pub fn final_time_profile(ff: &FarField, x: f64) -> Result<f64> {
    ff.final_time(x)
}
