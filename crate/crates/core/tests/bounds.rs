mod common;

use fcbc::bounds::{c_coefficient, global_bounds, vallee_poussin};
use fcbc::geometry::build_lattice;
use fcbc::kernels::KernelParams;
use fcbc::spectral::{barrier_on_lattice, build_basis};
use fcbc::geometry::Domain;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn random_polynomials_stay_inside_bounds() {
    let r = common::bounds_suite(60, 40_000, 5);
    assert_eq!(r.global_violations, 0, "{r:?}");
    assert_eq!(r.local_violations, 0, "{r:?}");
    assert!(r.local_cases > 40, "{r:?}");
}

#[test]
fn c_is_monotone() {
    for n in 1..=3 {
        for f in 1..5 {
            let q0 = 2 * f + 1;
            let mut prev = f64::INFINITY;
            for q in q0..q0 + 20 {
                let c = c_coefficient(f, q, n).unwrap();
                assert!(c <= prev && c >= 1.0);
                prev = c;
                assert!(c_coefficient(f + 1, q + 2, n).unwrap() >= c_coefficient(f, q + 2, n).unwrap());
                assert!(c_coefficient(f, q, n + 1).unwrap() >= c);
            }
        }
    }
}

#[test]
fn lattice_mean_of_kernel_is_at_most_c() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (f, q, n) in [(2, 5, 1), (2, 10, 2), (3, 28, 2), (1, 12, 3)] {
        let c = c_coefficient(f, q, n).unwrap();
        let step = 2.0 * std::f64::consts::PI / q as f64;
        for _ in 0..50 {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..step)).collect();
            let total = q.pow(n as u32);
            let mut sum = 0.0;
            for l in 0..total {
                let mut k = l;
                let z: Vec<f64> = (0..n)
                    .map(|i| {
                        let j = k % q;
                        k /= q;
                        x[i] - j as f64 * step
                    })
                    .collect();
                sum += vallee_poussin(&z, f, q - f).abs();
            }
            assert!(sum / total as f64 <= c + 1e-9, "f {f} q {q} n {n}");
        }
    }
}

#[test]
fn global_width_shrinks_with_oversampling() {
    let domain = Domain::new(vec![0.0, 0.0], vec![2.0, 1.0]).unwrap();
    let basis = build_basis(4, &KernelParams::new(1.0, vec![0.4, 0.2]).unwrap(), &domain).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let b: Vec<f64> = (0..basis.feature_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let dense = common::dense_lattice(&basis.periodic_domain().unwrap(), 600);
    let fine = barrier_on_lattice(&b, &basis, &dense).unwrap();
    let (flo, fhi) = fine.iter().fold((f64::MAX, f64::MIN), |(a, z), v| (a.min(*v), z.max(*v)));
    let mut prev = f64::INFINITY;
    for os in [1, 2, 4, 8, 16] {
        let lattice = build_lattice(&basis, os).unwrap();
        let v = barrier_on_lattice(&b, &basis, &lattice).unwrap();
        let (lo, hi) = v.iter().fold((f64::MAX, f64::MIN), |(a, z), x| (a.min(*x), z.max(*x)));
        let (glo, ghi) = global_bounds(lo, hi, c_coefficient(basis.f_max, lattice.q, 2).unwrap());
        assert!(glo <= flo + 1e-9 && ghi >= fhi - 1e-9);
        let width = ghi - glo;
        assert!(width <= prev + 1e-12, "os {os}: {width} > {prev}");
        prev = width;
    }
    assert!(prev - (fhi - flo) < 0.2 * (fhi - flo));
}
