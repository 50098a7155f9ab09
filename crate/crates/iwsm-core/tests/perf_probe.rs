// temporary perf probe
use std::time::Instant;

#[test]
#[ignore]
fn probe_primitive_costs() {
    let n = 20_000_000u64;
    let mut acc = 0.0f64;
    let t0 = Instant::now();
    let mut x = 0.001;
    for _ in 0..n {
        acc += libm::exp(-x);
        x += 1e-9;
    }
    println!("libm::exp: {:.1} ns/call (acc {acc:.3})", t0.elapsed().as_secs_f64() / n as f64 * 1e9);

    let mut acc2 = 0.0f64;
    let t0 = Instant::now();
    let mut x = 0.001f64;
    for _ in 0..n {
        acc2 += (-x).exp();
        x += 1e-9;
    }
    println!("std exp:   {:.1} ns/call (acc {acc2:.3})", t0.elapsed().as_secs_f64() / n as f64 * 1e9);

    use iwsm_core::energy::{Energy, EnergyFn};
    let f = EnergyFn::gmm(40, 0);
    let norm = f.normalized();
    let mut g = vec![0.0; 2];
    let m = 2_000_000u64;
    let t0 = Instant::now();
    let mut acc3 = 0.0;
    let mut p = [0.3, -0.2];
    for _ in 0..m {
        acc3 += norm.energy_and_grad_into(&p, &mut g).unwrap();
        p[0] += 1e-9;
    }
    println!("gmm40 energy_and_grad: {:.1} ns/call (acc {acc3:.3})", t0.elapsed().as_secs_f64() / m as f64 * 1e9);

    use iwsm_core::numerics::Rng;
    let mut rng = Rng::new(0);
    let t0 = Instant::now();
    let mut acc4 = 0.0;
    for _ in 0..n {
        acc4 += rng.normal();
    }
    println!("normal draw: {:.1} ns/call (acc {acc4:.3})", t0.elapsed().as_secs_f64() / n as f64 * 1e9);
}
