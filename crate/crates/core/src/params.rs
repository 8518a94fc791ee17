//! Problem parameters, derived exponents and blow-up regime classification.
//!
//! The equation `u_t = -(|u|^n u)_xxxx + |u|^(p-1) u` admits blow-up
//! similarity solutions `u = (T-t)^(-1/(p-1)) f(x/(T-t)^beta)` with
//! `beta = (p-(n+1))/(4(p-1))`.  The sign of `beta` splits the parameter
//! plane into three regimes with qualitatively different blow-up sets.

use crate::error::{Error, Result};

/// Relative tolerance for deciding `p == n+1`; continuation steps must be
/// able to land exactly on the variational case.
pub const REGIME_TIE_TOL: f64 = 1e-12;

/// Blow-up regime of a parameter pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Regional blow-up, `p = n+1`: unboundedness on a bounded localization
    /// domain.  The profile problem is variational.
    S,
    /// Single-point blow-up, `p > n+1`: finite final-time profile away from
    /// one point.  Profiles are not compactly supported.
    LS,
    /// Global blow-up, `1 < p < n+1`: unboundedness on every compact set.
    HS,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::S => "S",
            Regime::LS => "LS",
            Regime::HS => "HS",
        }
    }
}

/// The `(n, p)` pair together with its derived exponents.
///
/// All derived quantities are computed once at construction.  Values are
/// immutable afterwards and safe to share across threads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemParams {
    pub n: f64,
    pub p: f64,
    /// `n/(n+1)`, the exponent of the singular factor `|F|^{-alpha}`.
    pub alpha: f64,
    /// `(p-(n+1))/(4(p-1))`, the similarity space exponent.
    pub beta: f64,
    /// `(n+2)/(n+1)`, the exponent of the variational energy term.
    pub nu_var: f64,
    pub regime: Regime,
}

fn check_domain(n: f64, p: f64) -> Result<()> {
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::Domain(format!("n must be positive and finite, got {n}")));
    }
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::Domain(format!("p must exceed 1 and be finite, got {p}")));
    }
    Ok(())
}

/// `beta = (p-(n+1))/(4(p-1))`.
pub fn beta(n: f64, p: f64) -> Result<f64> {
    check_domain(n, p)?;
    Ok((p - (n + 1.0)) / (4.0 * (p - 1.0)))
}

/// `alpha = n/(n+1)`.
pub fn alpha(n: f64) -> Result<f64> {
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::Domain(format!("n must be positive and finite, got {n}")));
    }
    Ok(n / (n + 1.0))
}

/// Constant equilibria of the profile equation:
/// `f* = (p-1)^(-1/(p-1))` and its transform `F* = f*^(n+1)`.
pub fn equilibria(n: f64, p: f64) -> Result<(f64, f64)> {
    check_domain(n, p)?;
    let f_star = (p - 1.0).powf(-1.0 / (p - 1.0));
    let cap_f_star = f_star.powf(n + 1.0);
    Ok((f_star, cap_f_star))
}

/// Classify the blow-up regime.  The tie `p = n+1` is decided with relative
/// tolerance [`REGIME_TIE_TOL`].
pub fn classify_regime(n: f64, p: f64) -> Result<Regime> {
    check_domain(n, p)?;
    let scale = (n + 1.0).abs().max(p.abs());
    if (p - (n + 1.0)).abs() <= REGIME_TIE_TOL * scale {
        Ok(Regime::S)
    } else if p > n + 1.0 {
        Ok(Regime::LS)
    } else {
        Ok(Regime::HS)
    }
}

impl ProblemParams {
    pub fn new(n: f64, p: f64) -> Result<Self> {
        let regime = classify_regime(n, p)?;
        // Snap beta to zero on the variational case so that downstream code
        // never sees a stray 1e-17 drift term.
        let beta = match regime {
            Regime::S => 0.0,
            _ => beta(n, p)?,
        };
        Ok(ProblemParams {
            n,
            p,
            alpha: alpha(n)?,
            beta,
            nu_var: (n + 2.0) / (n + 1.0),
            regime,
        })
    }

    /// Equilibrium of the untransformed profile, `f* = (p-1)^{-1/(p-1)}`.
    pub fn f_star(&self) -> f64 {
        (self.p - 1.0).powf(-1.0 / (self.p - 1.0))
    }

    /// Equilibrium of the transformed profile, `F* = f*^{n+1}`.
    pub fn cap_f_star(&self) -> f64 {
        self.f_star().powf(self.n + 1.0)
    }
}
