//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line with the measured values at the stated tolerances.
//!
//! Run with `cargo test -p pme4-cli --test acceptance -- --nocapture` to
//! see the lines as they complete.

use pme4_core::continuation::{
    continue_branch_opts, profile_distance, BranchParameter, ContinueOptions, Termination,
};
use pme4_core::oscillatory::{char_spectrum, oscillatory_orbit_from, OscComponent};
use pme4_core::profiles::{
    energy_directional_fd, fit_lobe_slope, glue_profile, ground_profile, integrate_reflected,
    interface_estimate, periodic_spatial, solve_profile, ProfileGuess, ProfileProblemSpec,
    ProfileSolution,
};
use pme4_core::spectral::{adjoint_operator, adjoint_poly_unnormalized, SpectralBasis};
use std::sync::OnceLock;
use std::time::Instant;

fn check(name: &str, pass: bool, detail: String) -> bool {
    println!(
        "criterion {name}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}

/// F0 at (n=1, p=2) with eps = tol = 1e-10, shared across criteria.
fn f0_golden() -> &'static ProfileSolution {
    static CACHE: OnceLock<ProfileSolution> = OnceLock::new();
    CACHE.get_or_init(|| {
        let spec = ProfileProblemSpec::new(1.0, 2.0).unwrap();
        ground_profile(&spec, 1e-10).expect("F0 at (1, 2)")
    })
}

#[test]
fn criterion_01_spectral_oracle() {
    let t0 = Instant::now();
    let basis = SpectralBasis::with_defaults(8);
    let mass = basis.kernel_mass();
    let ok_mass = (mass - 1.0).abs() < 1e-8;
    let gram = basis.biorthogonality(6);
    let mut dev = 0.0f64;
    for (l, row) in gram.iter().enumerate() {
        for (k, v) in row.iter().enumerate() {
            dev = dev.max((v - if l == k { 1.0 } else { 0.0 }).abs());
        }
    }
    let ok_gram = dev < 1e-6;
    let mut eig = 0.0f64;
    for l in 0..=8usize {
        let q = adjoint_poly_unnormalized(l);
        let lhs = adjoint_operator(&q);
        let rhs = q.scaled(-(l as f64) / 4.0);
        for i in 0..lhs.coeffs.len().max(rhs.coeffs.len()) {
            let a = lhs.coeffs.get(i).copied().unwrap_or(0.0);
            let b = rhs.coeffs.get(i).copied().unwrap_or(0.0);
            eig = eig.max((a - b).abs());
        }
    }
    let ok_eig = eig == 0.0;
    let pass = check(
        "1 (spectral oracle)",
        ok_mass && ok_gram && ok_eig,
        format!(
            "kernel mass {mass:.12} (|err| < 1e-8: {ok_mass}); max|G-I| = {dev:.3e} (< 1e-6: {ok_gram}); \
             eigen-identity coefficient error {eig:.1e} (exact: {ok_eig}); {:.2?}",
            t0.elapsed()
        ),
    );
    assert!(pass);
}

fn aligned_distance(a: &OscComponent, b: &OscComponent) -> f64 {
    // Coarse scan of the phase shift, then ternary refinement.
    let m = 512;
    let dist_for = |shift: f64| -> f64 {
        let mut d = 0.0f64;
        for j in 0..m {
            let s = a.period * j as f64 / m as f64;
            d = d.max((a.phi(s + shift) - b.phi(s)).abs());
        }
        d
    };
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..256 {
        let shift = a.period * k as f64 / 256.0;
        let d = dist_for(shift);
        if d < best.0 {
            best = (d, shift);
        }
    }
    let mut lo = best.1 - a.period / 256.0;
    let mut hi = best.1 + a.period / 256.0;
    for _ in 0..70 {
        let s1 = lo + (hi - lo) / 3.0;
        let s2 = hi - (hi - lo) / 3.0;
        if dist_for(s1) < dist_for(s2) {
            hi = s2;
        } else {
            lo = s1;
        }
    }
    let shift = 0.5 * (lo + hi);
    let mut d = 0.0f64;
    for j in 0..4096 {
        let s = a.period * j as f64 / 4096.0;
        d = d.max((a.phi(s + shift) - b.phi(s)).abs());
    }
    d
}

#[test]
fn criterion_02_oscillatory_component() {
    let t0 = Instant::now();
    let starts: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.3, 0.2, -0.1], [-0.7, 0.5, 0.3]];
    let mut pass = true;
    let mut detail = String::new();
    for n in [0.75, 1.0, 2.0, f64::INFINITY] {
        let comps: Vec<OscComponent> = starts
            .iter()
            .map(|x0| oscillatory_orbit_from(n, x0).expect("orbit"))
            .collect();
        let amp = comps[0].amplitude;
        let mut worst = 0.0f64;
        for i in 0..comps.len() {
            for j in i + 1..comps.len() {
                worst = worst.max(aligned_distance(&comps[i], &comps[j]));
            }
        }
        let res = comps.iter().fold(0.0f64, |m, c| m.max(c.residual));
        let ok = worst <= 1e-6 * amp && res <= 1e-6 * amp;
        pass &= ok;
        detail.push_str(&format!(
            "n={n}: T={:.6}, amp={:.3e}, pairwise dist {:.2e} (tol {:.2e}), residual {:.2e}; ",
            comps[0].period,
            amp,
            worst,
            1e-6 * amp,
            res
        ));
    }
    detail.push_str(&format!("{:.2?}", t0.elapsed()));
    assert!(check("2 (oscillatory component)", pass, detail));
}

#[test]
fn criterion_03_nonoscillatory_spectrum() {
    let t0 = Instant::now();
    let spec6 = char_spectrum(6.0).unwrap();
    let s11 = 11f64.sqrt();
    let mut err: f64 = f64::INFINITY;
    // Match roots to {-1, -7 +- i sqrt(11)} in the best ordering.
    let want = [(-1.0, 0.0), (-7.0, s11), (-7.0, -s11)];
    let mut worst = 0.0f64;
    for (re, im) in want {
        let best = spec6
            .roots
            .iter()
            .map(|r| ((r.re - re).abs()).max((r.im - im).abs()))
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(best);
    }
    err = err.min(worst);
    let ok_roots = err < 1e-10;
    let mut ok_stable = true;
    for mu in [4.0, 6.0, 8.0, 12.0] {
        ok_stable &= char_spectrum(mu).unwrap().all_stable;
    }
    let pass = check(
        "3 (non-oscillatory spectrum)",
        ok_roots && ok_stable,
        format!(
            "mu=6 root error {err:.2e} (< 1e-10); Re < 0 for mu in {{4,6,8,12}}: {ok_stable}; {:.2?}",
            t0.elapsed()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_04_s_regime_golden_numbers() {
    let t0 = Instant::now();
    let sol = f0_golden();
    let est = interface_estimate(sol).expect("interface");
    let zeros_tight = est.zero_count;
    // Same problem at the crude regularization.
    let crude_spec = ProfileProblemSpec::new(1.0, 2.0).unwrap().with_eps(1e-3);
    let crude = ground_profile(&crude_spec, 1e-3).expect("crude F0");
    let est_crude = interface_estimate(&crude).expect("crude interface");
    let (slope, _) = fit_lobe_slope(&est).expect("lobe fit");
    let ok_y0 = (est.y0 - 12.0).abs() <= 1.0;
    let ok_zeros = zeros_tight >= 4 && est_crude.zero_count < zeros_tight;
    let ok_slope = (slope - 8.0).abs() <= 1.0;
    let detail = format!(
        "y0 = {:.4} (12 +- 1: {ok_y0}); zeros {} at eps=1e-10 vs {} at 1e-3 (>=4 and fewer: {ok_zeros}); \
         lobe slope {slope:.3} (8 +- 1: {ok_slope}); F0(0) = {:.6}; {:.2?}",
        est.y0,
        zeros_tight,
        est_crude.zero_count,
        sol.f_at_origin(),
        t0.elapsed()
    );
    let pass = check("4 (S-regime golden numbers)", ok_y0 && ok_zeros && ok_slope, detail);
    assert!(
        pass,
        "the y0 = 12 +- 1 window fails: the converged tail lobes obey the \
         (y0-y)^8 law with fitted slope {slope:.3}, and both the lobe fit and \
         the geometric zero-spacing ratio extrapolate to y0 = {:.3}; the \
         looser figure matches where a noisier solver's ripple floor ends, \
         not the oscillation accumulation point (see the analysis notes)",
        est.y0
    );
}

#[test]
fn criterion_05_periodic_spatial_orbit() {
    let t0 = Instant::now();
    let orbit = periodic_spatial(1.0).expect("spatial orbit");
    let ok = (orbit.max_value - 1.535).abs() <= 0.02;
    let pass = check(
        "5 (periodic spatial orbit)",
        ok,
        format!(
            "max value {:.6} (1.535 +- 0.02: {ok}); period {:.5}; mean {:.4}; tuned F''(0) {:.10}; {:.2?}",
            orbit.max_value,
            orbit.period,
            orbit.mean_value,
            orbit.shoot_d2,
            t0.elapsed()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_06_small_n_limit() {
    let t0 = Instant::now();
    let spec = ProfileProblemSpec::new(0.01, 1.01).unwrap();
    let tiny = ground_profile(&spec, 1e-10).expect("F0 at n=0.01");
    let f00 = tiny.f_at_origin();
    let ok_value = (f00 - 1.435).abs() / 1.435 <= 0.05;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for n in [0.1, 0.05, 0.02] {
        let spec = ProfileProblemSpec::new(n, n + 1.0).unwrap();
        let sol = ground_profile(&spec, 1e-10).expect("small-n F0");
        let y0 = sol.y0.expect("interface");
        xs.push(n.ln());
        ys.push(y0.ln());
    }
    let m = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|v| v * v).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(a, b)| a * b).sum();
    let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    let ok_slope = (slope + 0.75).abs() <= 0.15;
    let pass = check(
        "6 (small-n limit)",
        ok_value && ok_slope,
        format!(
            "F0(0) at n=0.01 is {f00:.5} (within 5% of 1.435: {ok_value}); \
             y0(n) log-log slope {slope:.4} (-0.75 +- 0.15: {ok_slope}); {:.2?}",
            t0.elapsed()
        ),
    );
    assert!(pass);
}

/// Deterministic pseudo-random stream (splitmix64).
struct SplitMix(u64);
impl SplitMix {
    fn next_f64(&mut self) -> f64 {
        self.0 = self.0.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        ((z ^ (z >> 31)) >> 11) as f64 / (1u64 << 53) as f64
    }
}

#[test]
fn criterion_07_criticality_at_variational_point() {
    let t0 = Instant::now();
    let sol = f0_golden();
    let r = sol.spec.radius;
    let mut rng = SplitMix(0x5EED);
    let mut worst_ratio = 0.0f64;
    for _ in 0..10 {
        let center = (rng.next_f64() - 0.5) * 1.2 * r;
        let width = (0.05 + 0.1 * rng.next_f64()) * r;
        let v = move |y: f64| -> (f64, f64) {
            let u = (y - center) / width;
            if u.abs() >= 1.0 {
                return (0.0, 0.0);
            }
            let g = 1.0 - 1.0 / (1.0 - u * u);
            let val = g.exp();
            let gp = -2.0 * u / ((1.0 - u * u) * (1.0 - u * u));
            let gpp = -2.0 * (1.0 + 3.0 * u * u) / (1.0 - u * u).powi(3);
            (val, val * (gpp + gp * gp) / (width * width))
        };
        let norm = integrate_reflected(sol, 2, |y, _| {
            let (vv, _) = v(y);
            vv * vv
        })
        .sqrt();
        let de = energy_directional_fd(sol, 1.0, &v, 1e-6);
        worst_ratio = worst_ratio.max(de.abs() / norm.max(1e-300));
    }
    let ok = worst_ratio <= 1e-4;
    let pass = check(
        "7 (criticality at p = n+1)",
        ok,
        format!(
            "max |dE(F0; v)| / ||v|| over 10 random bump directions = {worst_ratio:.2e} (<= 1e-4: {ok}); {:.2?}",
            t0.elapsed()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_ls_regime() {
    let t0 = Instant::now();
    let spec = ProfileProblemSpec::new(1.0, 3.0).unwrap().with_radius(15.0);
    let guess = ProfileGuess::default_cap(&spec);
    let sol = solve_profile(&spec, &guess, 1e-10).expect("LS profile");
    let mut min = f64::INFINITY;
    for j in 0..=3000 {
        min = min.min(sol.eval_f(15.0 * j as f64 / 3000.0));
    }
    let ok_pos = min > 0.0;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for j in 0..=60 {
        let y = 7.5 + 7.5 * j as f64 / 60.0;
        xs.push(y.ln());
        ys.push(sol.eval_f_untransformed(y).ln());
    }
    let m = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|v| v * v).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(a, b)| a * b).sum();
    let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    let ok_slope = (slope + 4.0).abs() <= 0.2;
    let pass = check(
        "8 (LS regime)",
        ok_pos && ok_slope,
        format!(
            "min F = {min:.3e} (> 0: {ok_pos}); far-field log-log slope {slope:.4} (-4 +- 0.2: {ok_slope}); {:.2?}",
            t0.elapsed()
        ),
    );
    assert!(pass);
}

fn cap_pair_guess(spec: &ProfileProblemSpec, s1: f64, d: f64, l: f64) -> ProfileGuess {
    let c = 1.5 * spec.form_equilibrium();
    ProfileGuess::from_fn(
        move |y: f64| {
            let mut acc = [0.0; 4];
            for (s, ctr) in [(s1, -d), (1.0, d)] {
                let u: f64 = y - ctr;
                if u.abs() < l {
                    let pi = std::f64::consts::PI;
                    let a = pi * u / (2.0 * l);
                    acc[0] += s * c * a.cos().powi(2);
                    acc[1] += -s * c * pi / (2.0 * l) * (2.0 * a).sin();
                    acc[2] += -s * c * pi * pi / (2.0 * l * l) * (2.0 * a).cos();
                    acc[3] += s * c * pi * pi * pi / (2.0 * l * l * l) * (2.0 * a).sin();
                }
            }
            acc
        },
        "cap pair",
    )
}

#[test]
fn criterion_09a_p0_branch_monotone() {
    let t0 = Instant::now();
    let spec = ProfileProblemSpec::new(1.0, 2.0).unwrap();
    let seed = ground_profile(&spec, 1e-8).expect("F0 seed");
    // Seed the branch start at p = 2.5 by continuing upward first.
    let mut at25: Option<ProfileSolution> = None;
    let up = continue_branch_opts(
        &seed,
        BranchParameter::P,
        2.5,
        ContinueOptions {
            dp0: 0.02,
            on_accept: Some(Box::new(|_pt, s| at25 = Some(s.clone()))),
            ..Default::default()
        },
    )
    .expect("upward branch");
    assert_eq!(up.termination, Termination::RangeEnd);
    let start = at25.expect("p = 2.5 endpoint");
    let down = continue_branch_opts(
        &start,
        BranchParameter::P,
        1.7,
        ContinueOptions {
            dp0: 0.02,
            ..Default::default()
        },
    )
    .expect("downward branch");
    let complete = down.termination == Termination::RangeEnd;
    let mut monotone = true;
    for w in down.points.windows(2) {
        if w[1].f0_at_origin <= w[0].f0_at_origin - 1e-9 {
            monotone = false;
        }
    }
    let pass = check(
        "9a (p0-branch 2.5 -> 1.7)",
        complete && monotone,
        format!(
            "termination {:?} over {} points; F0(0) grows {:.4} -> {:.4} as p decreases (monotone: {monotone}); {:.2?}",
            down.termination,
            down.points.len(),
            down.points.first().unwrap().f0_at_origin,
            down.points.last().unwrap().f0_at_origin,
            t0.elapsed()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_09b_f4_jump() {
    let t0 = Instant::now();
    let spec = ProfileProblemSpec::new(1.0, 2.0).unwrap();
    let f4 = solve_profile(&spec, &cap_pair_guess(&spec, 1.0, 4.0, 5.0), 1e-8).expect("F+4 seed");
    assert_eq!(
        f4.sigma.as_ref().map(|s| s.notation()).unwrap_or_default(),
        "+4"
    );
    let branch = continue_branch_opts(
        &f4,
        BranchParameter::P,
        2.01,
        ContinueOptions {
            dp0: 1e-3,
            ..Default::default()
        },
    )
    .expect("jump branch");
    let jumped = branch.termination == Termination::JumpDetected;
    let new_sigma = branch
        .points
        .last()
        .and_then(|p| p.sigma.as_ref().map(|s| s.notation()))
        .unwrap_or_default();
    let ok = jumped && new_sigma == "+2,2,+2";
    let pass = check(
        "9b (F+4 jump near p=2)",
        ok,
        format!(
            "termination {:?} at p = {:.5} with sigma {{{new_sigma}}}; {:.2?}",
            branch.termination,
            branch.points.last().map(|p| p.param).unwrap_or(f64::NAN),
            t0.elapsed()
        ),
    );
    assert!(
        pass,
        "no jump is observable: the F+4 profile continues smoothly past \
         p = 2 (its valley value is regularization-independent to five \
         digits across eps in [1e-4, 1e-6] and survives weak-line-search \
         and undamped Newton variants); the reported jump is a basin hop \
         of a weakly damped solver that this discretization does not \
         reproduce (see the analysis notes)"
    );
}

#[test]
fn criterion_09c_branch_split_at_n_half() {
    let t0 = Instant::now();
    let mut spec = ProfileProblemSpec::new(0.5, 1.5).unwrap();
    spec.radius = 60.0;
    let f4 = solve_profile(&spec, &cap_pair_guess(&spec, 1.0, 4.0, 6.0), 1e-8).expect("F+4 seed");
    let f222 =
        solve_profile(&spec, &cap_pair_guess(&spec, 1.0, 5.0, 6.0), 1e-8).expect("F+2,2,+2 seed");
    assert_eq!(f4.sigma.as_ref().unwrap().notation(), "+4");
    assert_eq!(f222.sigma.as_ref().unwrap().notation(), "+2,2,+2");
    let grid = 0.005;
    let run = |seed: &ProfileSolution| -> std::collections::BTreeMap<i64, ProfileSolution> {
        let mut sink = std::collections::BTreeMap::new();
        let _ = continue_branch_opts(
            seed,
            BranchParameter::P,
            1.30,
            ContinueOptions {
                dp0: grid,
                dp_floor: 1e-6,
                snap_grid: Some(grid),
                stop_on_jump: false,
                hop_on_stall: true,
                on_accept: Some(Box::new(|pt, sol| {
                    let key = (pt.param / grid).round() as i64;
                    if ((key as f64) * grid - pt.param).abs() < 1e-9 {
                        sink.insert(key, sol.clone());
                    }
                })),
                ..Default::default()
            },
        )
        .expect("branch");
        sink
    };
    let a = run(&f4);
    let b = run(&f222);
    let dist_at = |p: f64| -> Option<f64> {
        let key = (p / grid).round() as i64;
        match (a.get(&key), b.get(&key)) {
            (Some(sa), Some(sb)) => Some(profile_distance(sa, sb)),
            _ => None,
        }
    };
    let d495 = dist_at(1.495);
    let d500 = dist_at(1.5);
    let separate = d495.map(|d| d >= 0.05).unwrap_or(false)
        && d500.map(|d| d >= 0.05).unwrap_or(false);
    // Coincidence below 1.45 requires common points there.
    let mut coincide_points = 0usize;
    let mut coincide = true;
    for key in a.keys() {
        let p = *key as f64 * grid;
        if p <= 1.45 {
            if let Some(sb) = b.get(key) {
                coincide_points += 1;
                coincide &= profile_distance(&a[key], sb) < 0.05;
            }
        }
    }
    let ok_coincide = coincide && coincide_points > 0;
    let lowest_a = a.keys().next().map(|k| *k as f64 * grid).unwrap_or(f64::NAN);
    let lowest_b = b.keys().next().map(|k| *k as f64 * grid).unwrap_or(f64::NAN);
    let pass = check(
        "9c (branch split near p*)",
        separate && ok_coincide,
        format!(
            "distance at p=1.5: {:.3}, at 1.495: {:.3} (separate: {separate}); \
             common points at p <= 1.45: {coincide_points} (coincide: {ok_coincide}); \
             branches reach down to p = {lowest_a:.4} / {lowest_b:.4}; {:.2?}",
            d500.unwrap_or(f64::NAN),
            d495.unwrap_or(f64::NAN),
            t0.elapsed()
        ),
    );
    assert!(
        pass,
        "the two seeded branches approach each other (distance 0.52 at \
         p=1.5 falling to 0.08 near p=1.46) and both terminate at \
         p = 1.4578 +- 0.0005, independent of regularization (3e-4..3e-5), \
         radius (60/90) and Newton flavor, with no two-bump solution found \
         below; the structure is a saddle-node collision at p* = 1.458 \
         rather than branches continuing jointly below 1.45 (see the \
         analysis notes)"
    );
}

#[test]
fn criterion_10_gluing_families() {
    let t0 = Instant::now();
    let base = f0_golden();
    let spec = ProfileProblemSpec::new(1.0, 2.0).unwrap();
    let mut even_ks = Vec::new();
    let mut odd_ks = Vec::new();
    for (sign, d) in [
        (1.0, 4.5),
        (1.0, 6.5),
        (1.0, 12.0),
        (-1.0, 4.5),
        (-1.0, 6.5),
        (-1.0, 12.0),
    ] {
        let sol =
            glue_profile(&spec, base, &[(sign, -d), (1.0, d)], 1e-8).expect("glued member");
        let s = sol.sigma.as_ref().unwrap().notation();
        if sign > 0.0 {
            assert!(
                s.starts_with("+2,") && s.ends_with(",+2"),
                "unexpected even-glue pattern {{{s}}}"
            );
            let k: u32 = s
                .trim_start_matches("+2,")
                .trim_end_matches(",+2")
                .parse()
                .unwrap();
            assert_eq!(k % 2, 0, "even gluing produced odd k in {{{s}}}");
            even_ks.push(k);
        } else {
            assert!(
                s.starts_with("-2,") && s.ends_with(",+2"),
                "unexpected odd-glue pattern {{{s}}}"
            );
            let k: u32 = s
                .trim_start_matches("-2,")
                .trim_end_matches(",+2")
                .parse()
                .unwrap();
            assert_eq!(k % 2, 1, "odd gluing produced even k in {{{s}}}");
            odd_ks.push(k);
        }
    }
    even_ks.sort_unstable();
    even_ks.dedup();
    odd_ks.sort_unstable();
    odd_ks.dedup();
    let ok = even_ks.len() >= 2 && odd_ks.len() >= 2;
    let pass = check(
        "10 (gluing families)",
        ok,
        format!(
            "{{+2,k,+2}} members with k = {even_ks:?}; {{-2,k,+2}} members with k = {odd_ks:?}; {:.2?}",
            t0.elapsed()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_11_property_suites() {
    let t0 = Instant::now();
    // O(h^4) global-error order of the collocation scheme on y'' = -y.
    use pme4_core::collocation::{solve_bvp, BvpOptions, BvpProblem};
    use pme4_core::mesh::Mesh;
    let problem = || BvpProblem {
        dim: 2,
        rhs: Box::new(|_x, y, dy| {
            dy[0] = y[1];
            dy[1] = -y[0];
        }),
        rhs_jac: None,
        bc: Box::new(|ya, yb, r| {
            r[0] = ya[0];
            r[1] = yb[0] - 1.0;
        }),
        n_left: 1,
    };
    let mut hs = Vec::new();
    let mut es = Vec::new();
    for n in [6usize, 11, 21, 41] {
        let mesh = Mesh::uniform(0.0, std::f64::consts::FRAC_PI_2, n, 20000).unwrap();
        let guess: Vec<f64> = mesh
            .nodes()
            .iter()
            .flat_map(|&x| [x / std::f64::consts::FRAC_PI_2, 0.5])
            .collect();
        let opts = BvpOptions {
            rtol: 1e-13,
            atol: 1e-13,
            adaptive: false,
            ..Default::default()
        };
        let sol = solve_bvp(&problem(), &mesh, &guess, &opts).unwrap();
        let mut err = 0.0f64;
        for j in 0..=400 {
            let x = std::f64::consts::FRAC_PI_2 * j as f64 / 400.0;
            err = err.max((sol.eval_vec(x)[0] - x.sin()).abs());
        }
        hs.push((std::f64::consts::FRAC_PI_2 / (n - 1) as f64).ln());
        es.push(err.ln());
    }
    let m = hs.len() as f64;
    let sx: f64 = hs.iter().sum();
    let sy: f64 = es.iter().sum();
    let sxx: f64 = hs.iter().map(|v| v * v).sum();
    let sxy: f64 = hs.iter().zip(&es).map(|(a, b)| a * b).sum();
    let order = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    let ok_order = (order - 4.0).abs() <= 0.3;

    // eps-robustness of F0(0).
    let spec8 = ProfileProblemSpec::new(1.0, 2.0).unwrap().with_eps(1e-8);
    let a = ground_profile(&spec8, 1e-8).unwrap();
    let drift = (a.f_at_origin() - f0_golden().f_at_origin()).abs();
    let ok_eps = drift < 1e-3;

    // Archive round-trip byte identity and determinism through the binary.
    let dir = std::path::PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    std::fs::create_dir_all(&dir).unwrap();
    let out1 = dir.join("det1.json");
    let out2 = dir.join("det2.json");
    let run_solve = |path: &std::path::Path| {
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_pme4"))
            .args([
                "solve", "--n", "1", "--p", "2", "--eps", "1e-6", "--tol", "1e-6", "--ground",
                "--out",
            ])
            .arg(path)
            .status()
            .expect("binary run");
        assert!(status.success());
    };
    run_solve(&out1);
    run_solve(&out2);
    let mut v1: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out1).unwrap()).unwrap();
    let mut v2: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out2).unwrap()).unwrap();
    v1["provenance"]["command"] = serde_json::Value::String(String::new());
    v2["provenance"]["command"] = serde_json::Value::String(String::new());
    let ok_det = v1 == v2;
    // Round trip through parse + canonical re-serialization.
    let text = std::fs::read_to_string(&out1).unwrap();
    let reparsed: serde_json::Value = serde_json::from_str(&text).unwrap();
    let mut rewritten = serde_json::to_string_pretty(&reparsed).unwrap();
    rewritten.push('\n');
    let ok_rt = rewritten == text;

    let pass = check(
        "11 (property suites)",
        ok_order && ok_eps && ok_det && ok_rt,
        format!(
            "collocation order fit {order:.3} (4 +- 0.3: {ok_order}); F0(0) eps-drift {drift:.2e} \
             (< 1e-3: {ok_eps}); repeated-run determinism: {ok_det}; archive round-trip byte \
             identity: {ok_rt}; {:.2?}",
            t0.elapsed()
        ),
    );
    assert!(pass);
}
