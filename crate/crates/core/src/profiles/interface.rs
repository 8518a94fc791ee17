//! Interface estimation and multiindex classification of profiles.
//!
//! Compactly supported profiles oscillate infinitely toward their
//! interface with lobe amplitudes decaying like `(y0 - y)^{4(n+1)/n}`,
//! so the free boundary `y0` is extrapolated by fitting the tail lobe
//! maxima against that power law.  Pattern classification counts the
//! transversal crossings of the equilibria `±F*` and of zero, excluding
//! sub-amplitude interface lobes; the result is the multiindex.

use super::{ProfileSolution, RightBc};
use crate::error::{Error, Result};
use crate::multiindex::{MultiIndex, MultiIndexEntry};
use crate::oscillatory::{interface_exponent, InterfaceOrder};

/// Interface data for a compactly supported profile.
#[derive(Debug, Clone)]
pub struct InterfaceEstimate {
    /// Extrapolated interface position.
    pub y0: f64,
    /// Rightmost point where `|F|` still exceeds the tail threshold.
    pub y0_crude: f64,
    /// Sign changes in the interface tail above the regularization floor.
    pub zero_count: usize,
    /// Tail lobe maxima used for the fit: `(position, max |F|)`.
    pub lobes: Vec<(f64, f64)>,
    /// Exponent used for the extrapolation, `4(n+1)/n`.
    pub mu: f64,
}

/// Dense samples of `F` over `[0, R]` (nodes plus interior points).
fn dense_samples(sol: &ProfileSolution, per_interval: usize) -> Vec<(f64, f64)> {
    let nodes = sol.bvp.mesh.nodes();
    let mut out = Vec::with_capacity(nodes.len() * per_interval);
    let mut buf = [0.0; 4];
    for i in 0..nodes.len() - 1 {
        let h = nodes[i + 1] - nodes[i];
        for j in 0..per_interval {
            let y = nodes[i] + h * j as f64 / per_interval as f64;
            let mut st = [0.0; 4];
            sol.bvp.eval(y, &mut st);
            out.push((y, st[0]));
        }
    }
    sol.bvp.eval(nodes[nodes.len() - 1], &mut buf);
    out.push((nodes[nodes.len() - 1], buf[0]));
    out
}

/// Refine a bracketed zero of `F` by bisection on the interpolant.
fn refine_zero(sol: &ProfileSolution, mut lo: f64, mut hi: f64) -> f64 {
    let mut st = [0.0; 4];
    sol.bvp.eval(lo, &mut st);
    let mut flo = st[0];
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        sol.bvp.eval(mid, &mut st);
        let fm = st[0];
        if fm == 0.0 || (hi - lo) < 1e-14 * hi.abs().max(1.0) {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Estimate the interface of a compactly supported profile.
///
/// `y0` is first bracketed as the rightmost point where `|F|` exceeds
/// `tail_threshold * sup|F|`, then extrapolated by fitting the tail lobe
/// maxima `m_j ~ A (y0 - y_j)^mu` with the profile-equation exponent
/// `mu = 4(n+1)/n` fixed.  `zero_count` counts the tail sign changes whose
/// adjacent lobes rise above the regularization floor.
pub fn interface_estimate(sol: &ProfileSolution) -> Result<InterfaceEstimate> {
    if !matches!(sol.spec.right_bc, RightBc::CompactSupport) {
        return Err(Error::InvalidSpec(
            "interface estimation applies to compact-support runs".into(),
        ));
    }
    let samples = dense_samples(sol, 6);
    let sup = samples.iter().fold(0.0f64, |m, s| m.max(s.1.abs()));
    if sup == 0.0 {
        return Err(Error::NoDecayingTail("profile is identically zero".into()));
    }
    let thr = sol.spec.tail_threshold * sup;
    let last = samples.last().unwrap();
    if last.1.abs() >= thr {
        return Err(Error::NoDecayingTail(format!(
            "|F(R)| = {:.3e} still above threshold {:.3e}",
            last.1.abs(),
            thr
        )));
    }
    // Rightmost threshold crossing.
    let mut y0_crude = 0.0;
    for w in samples.windows(2).rev() {
        if w[0].1.abs() >= thr {
            // Refine |F| = thr between w[0] and w[1] on |F| - thr.
            let (mut lo, mut hi) = (w[0].0, w[1].0);
            let mut st = [0.0; 4];
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                sol.bvp.eval(mid, &mut st);
                if st[0].abs() >= thr {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            y0_crude = 0.5 * (lo + hi);
            break;
        }
    }
    if y0_crude == 0.0 {
        return Err(Error::NoDecayingTail("no threshold crossing found".into()));
    }
    // Dominant-zone end: last sample with |F| >= 20% of sup.  Everything to
    // the right is interface tail.
    let mut y_dom = 0.0;
    for s in samples.iter().rev() {
        if s.1.abs() >= 0.2 * sup {
            y_dom = s.0;
            break;
        }
    }
    // Tail zeros and lobes.
    let mut zeros: Vec<f64> = Vec::new();
    for w in samples.windows(2) {
        if w[0].0 < y_dom {
            continue;
        }
        if w[0].1 != 0.0 && w[1].1 != 0.0 && (w[0].1 > 0.0) != (w[1].1 > 0.0) {
            zeros.push(refine_zero(sol, w[0].0, w[1].0));
        }
    }
    let mut lobes: Vec<(f64, f64)> = Vec::new();
    for zw in zeros.windows(2) {
        let (mut best_y, mut best_m) = (zw[0], 0.0f64);
        for s in &samples {
            if s.0 > zw[0] && s.0 < zw[1] && s.1.abs() > best_m {
                best_m = s.1.abs();
                best_y = s.0;
            }
        }
        if best_m > 0.0 {
            lobes.push((best_y, best_m));
        }
    }
    // Regularization floor: lobes below a few eps are linear-regime ripple.
    let floor = 3.0 * sol.spec.eps;
    let zero_count = zeros
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            let left = if *i == 0 {
                sup // lobe before the first tail zero is the dominant body
            } else {
                lobes.get(i - 1).map(|l| l.1).unwrap_or(0.0)
            };
            let right = lobes.get(*i).map(|l| l.1).unwrap_or(0.0);
            left.min(right) >= floor
        })
        .count();
    let fit_lobes: Vec<(f64, f64)> = lobes
        .iter()
        .filter(|l| l.1 >= floor && l.1 <= 0.5 * sup)
        .cloned()
        .collect();
    let mu = interface_exponent(sol.spec.params.n, InterfaceOrder::ProfileFourthOrder)?;
    let y0 = if fit_lobes.len() >= 3 {
        fit_y0(&fit_lobes, mu, y0_crude, sol.spec.radius)
    } else {
        y0_crude
    };
    Ok(InterfaceEstimate {
        y0,
        y0_crude,
        zero_count,
        lobes: fit_lobes,
        mu,
    })
}

/// Least-squares extrapolation of `y0` with the exponent held fixed:
/// minimize over `y0` the variance of `log m_j - mu log(y0 - y_j)`.
fn fit_y0(lobes: &[(f64, f64)], mu: f64, y0_crude: f64, radius: f64) -> f64 {
    let y_last = lobes.iter().fold(0.0f64, |m, l| m.max(l.0));
    let sse = |y0: f64| -> f64 {
        let mut vals: Vec<f64> = Vec::with_capacity(lobes.len());
        for &(y, m) in lobes {
            vals.push(m.ln() - mu * (y0 - y).ln());
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        vals.iter().map(|v| (v - mean) * (v - mean)).sum()
    };
    // Coarse scan then golden-section polish.
    let lo0 = y_last + 1e-6 * radius.max(1.0);
    let hi0 = (y0_crude + 0.5 * (radius - y0_crude)).max(lo0 + 1e-3);
    let mut best = (f64::INFINITY, lo0);
    for j in 0..=400 {
        let y0 = lo0 + (hi0 - lo0) * j as f64 / 400.0;
        let v = sse(y0);
        if v < best.0 {
            best = (v, y0);
        }
    }
    let mut lo = (best.1 - (hi0 - lo0) / 200.0).max(lo0);
    let mut hi = (best.1 + (hi0 - lo0) / 200.0).min(hi0);
    for _ in 0..100 {
        let a = lo + (hi - lo) / 3.0;
        let b = hi - (hi - lo) / 3.0;
        if sse(a) < sse(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    0.5 * (lo + hi)
}

/// Free-slope fit of the tail lobes: regress `log m_j` on `log(y0 - y_j)`.
/// Returns `(slope, intercept)`.
pub fn fit_lobe_slope(est: &InterfaceEstimate) -> Option<(f64, f64)> {
    if est.lobes.len() < 3 {
        return None;
    }
    let xs: Vec<f64> = est.lobes.iter().map(|l| (est.y0 - l.0).ln()).collect();
    let ys: Vec<f64> = est.lobes.iter().map(|l| l.1.ln()).collect();
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|v| v * v).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(a, b)| a * b).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return None;
    }
    let slope = (n * sxy - sx * sy) / denom;
    Some((slope, (sy - slope * sx) / n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CrossKind {
    Plus,
    Minus,
    Zero,
}

/// Classify a converged profile by its multiindex.
///
/// The interpolant is scanned over the full symmetric domain; transversal
/// crossings of `+F*`, `0`, `-F*` are recorded in spatial order.  Zero
/// crossings outside the outermost equilibrium crossings belong to the
/// interface oscillation and are dropped; between equilibrium groups,
/// zero-crossing pairs bounding lobes below `tail_threshold * sup|F|` are
/// removed as sub-amplitude ripple.  Adjacent same-sign groups with no
/// surviving zeros in between merge (so a positive two-bump profile whose
/// valley stays above zero classifies as `{+4}`).
pub fn classify(sol: &ProfileSolution) -> Result<MultiIndex> {
    let f_star = sol.spec.form_equilibrium();
    let thr = sol.spec.tail_threshold;
    let r = sol.spec.radius;
    // Symmetric dense sampling (reflected through the parity rule).
    let n_samples = (sol.bvp.mesh.len() * 6).max(2000);
    let mut samples: Vec<(f64, f64)> = Vec::with_capacity(2 * n_samples);
    // Half-offset grid: never samples y = 0 exactly, where odd profiles
    // vanish and a sign change would otherwise go undetected.
    for j in 0..2 * n_samples {
        let y = -r + 2.0 * r * (j as f64 + 0.5) / (2 * n_samples) as f64;
        samples.push((y, sol.eval_f(y)));
    }
    let sup = samples.iter().fold(0.0f64, |m, s| m.max(s.1.abs()));
    if sup == 0.0 {
        return Ok(MultiIndex::empty(thr));
    }
    let mut events: Vec<(f64, CrossKind)> = Vec::new();
    let push_crossings = |level: f64, kind: CrossKind, events: &mut Vec<(f64, CrossKind)>| {
        for w in samples.windows(2) {
            let a = w[0].1 - level;
            let b = w[1].1 - level;
            if a != 0.0 && b != 0.0 && (a > 0.0) != (b > 0.0) {
                // Linear interpolation is enough for ordering purposes.
                let t = a / (a - b);
                events.push((w[0].0 + t * (w[1].0 - w[0].0), kind));
            }
        }
    };
    push_crossings(f_star, CrossKind::Plus, &mut events);
    push_crossings(-f_star, CrossKind::Minus, &mut events);
    push_crossings(0.0, CrossKind::Zero, &mut events);
    events.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    // Keep only events between the outermost equilibrium crossings.
    let first_eq = events.iter().position(|e| e.1 != CrossKind::Zero);
    let last_eq = events.iter().rposition(|e| e.1 != CrossKind::Zero);
    let (first_eq, last_eq) = match (first_eq, last_eq) {
        (Some(a), Some(b)) => (a, b),
        _ => return Ok(MultiIndex::empty(thr)),
    };
    let events: Vec<(f64, CrossKind)> = events[first_eq..=last_eq].to_vec();
    // Group maximal runs of equal-kind equilibrium events; count zeros
    // in between, dropping pairs around sub-threshold lobes.
    let lobe_max = |a: f64, b: f64| -> f64 {
        samples
            .iter()
            .filter(|s| s.0 > a && s.0 < b)
            .fold(0.0f64, |m, s| m.max(s.1.abs()))
    };
    #[derive(Debug)]
    enum Item {
        Group { sign: i8, count: u32 },
        Zeros { count: u32 },
    }
    let mut items: Vec<Item> = Vec::new();
    let mut i = 0usize;
    while i < events.len() {
        match events[i].1 {
            CrossKind::Zero => {
                // Collect the zero positions of this run.
                let mut zs: Vec<f64> = Vec::new();
                while i < events.len() && events[i].1 == CrossKind::Zero {
                    zs.push(events[i].0);
                    i += 1;
                }
                // Remove zero pairs bounding sub-threshold lobes until
                // stable (removal keeps crossing parity intact).
                let mut changed = true;
                while changed && zs.len() >= 2 {
                    changed = false;
                    let mut j = 0;
                    while j + 1 < zs.len() {
                        if lobe_max(zs[j], zs[j + 1]) < thr * sup {
                            zs.drain(j..=j + 1);
                            changed = true;
                        } else {
                            j += 1;
                        }
                    }
                }
                if !zs.is_empty() {
                    items.push(Item::Zeros {
                        count: zs.len() as u32,
                    });
                }
            }
            kind => {
                let sign = if kind == CrossKind::Plus { 1 } else { -1 };
                let mut count = 0u32;
                while i < events.len() && events[i].1 == kind {
                    count += 1;
                    i += 1;
                }
                items.push(Item::Group { sign, count });
            }
        }
    }
    // Merge same-sign groups separated by nothing, and assemble entries.
    let mut entries: Vec<MultiIndexEntry> = Vec::new();
    for item in items {
        match item {
            Item::Group { sign, count } => match entries.last_mut() {
                Some(MultiIndexEntry::Equilibrium {
                    sign: s,
                    count: c,
                }) if *s == sign => {
                    *c += count;
                }
                _ => entries.push(MultiIndexEntry::Equilibrium { sign, count }),
            },
            Item::Zeros { count } => {
                // Zeros before any group or after a zeros entry should not
                // occur once trimmed; guard anyway.
                if matches!(entries.last(), Some(MultiIndexEntry::Equilibrium { .. })) {
                    entries.push(MultiIndexEntry::Zeros { count });
                }
            }
        }
    }
    // A trailing zeros entry cannot occur (events end at an equilibrium
    // crossing), but keep the record valid under all inputs.
    if matches!(entries.last(), Some(MultiIndexEntry::Zeros { .. })) {
        entries.pop();
    }
    let mi = MultiIndex {
        entries,
        tail_threshold: thr,
    };
    debug_assert!(mi.is_valid(), "invalid multiindex {mi}");
    Ok(mi)
}

/// Multiindex of the negated profile without re-solving.
pub fn classify_negated(sol: &ProfileSolution) -> Result<MultiIndex> {
    let mut flipped = sol.clone();
    for v in flipped.bvp.states.iter_mut() {
        *v = -*v;
    }
    for v in flipped.bvp.f_nodes.iter_mut() {
        *v = -*v;
    }
    for v in flipped.bvp.y_mid.iter_mut() {
        *v = -*v;
    }
    classify(&flipped)
}
