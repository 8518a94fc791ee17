//! Criterion benchmarks for the hot paths of the solver stack.

use criterion::{criterion_group, criterion_main, Criterion};
use pme4_core::collocation::{solve_bvp, BvpOptions, BvpProblem};
use pme4_core::mesh::Mesh;
use pme4_core::odeint::{self, FnSystem};
use pme4_core::profiles::{solve_profile, ProfileGuess, ProfileProblemSpec};
use pme4_core::spectral::SpectralBasis;
use std::hint::black_box;

fn bench_kernel(c: &mut Criterion) {
    let basis = SpectralBasis::with_defaults(8);
    c.bench_function("kernel value at y=5", |b| {
        b.iter(|| black_box(basis.kernel(black_box(5.0))))
    });
    c.bench_function("kernel derivatives to l=6 at y=5", |b| {
        b.iter(|| black_box(basis.kernel_derivs_upto(6, black_box(5.0))))
    });
}

fn bench_rk(c: &mut Criterion) {
    let sys = FnSystem {
        dim: 2,
        f: |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0];
        },
    };
    c.bench_function("rk45 harmonic oscillator 100 turns", |b| {
        b.iter(|| {
            odeint::integrate(
                &sys,
                &[1.0, 0.0],
                (0.0, 100.0 * std::f64::consts::TAU),
                1e-10,
                1e-12,
            )
            .unwrap()
        })
    });
}

fn bench_bvp(c: &mut Criterion) {
    let problem = || BvpProblem {
        dim: 2,
        rhs: Box::new(|_x, y, dy| {
            dy[0] = y[1];
            dy[1] = -y[0];
        }),
        rhs_jac: Some(Box::new(|_x, _y, j| {
            j[0] = 0.0;
            j[1] = 1.0;
            j[2] = -1.0;
            j[3] = 0.0;
        })),
        bc: Box::new(|ya, yb, r| {
            r[0] = ya[0];
            r[1] = yb[0] - 1.0;
        }),
        n_left: 1,
    };
    let opts = BvpOptions {
        rtol: 1e-10,
        atol: 1e-10,
        ..Default::default()
    };
    c.bench_function("collocation solve y''=-y at 1e-10", |b| {
        b.iter(|| {
            let mesh = Mesh::uniform(0.0, std::f64::consts::FRAC_PI_2, 11, 20000).unwrap();
            let guess: Vec<f64> = mesh
                .nodes()
                .iter()
                .flat_map(|&x| [x / std::f64::consts::FRAC_PI_2, 0.5])
                .collect();
            solve_bvp(&problem(), &mesh, &guess, &opts).unwrap()
        })
    });
}

fn bench_profile(c: &mut Criterion) {
    let mut group = c.benchmark_group("profile");
    group.sample_size(10);
    group.bench_function("S-regime ground profile at eps 1e-6", |b| {
        b.iter(|| {
            let spec = ProfileProblemSpec::new(1.0, 2.0).unwrap().with_eps(1e-6);
            let guess = ProfileGuess::default_cap(&spec);
            solve_profile(&spec, &guess, 1e-6).unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, bench_kernel, bench_rk, bench_bvp, bench_profile);
criterion_main!(benches);
