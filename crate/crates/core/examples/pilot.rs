use ginprod::{dppkernel, ensemble, limitlaw, mop};
use num_rational::BigRational;
use num_traits::Zero;
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    // criterion 7: kernel diag convergence
    for n in [30usize, 60] {
        let ctx = dppkernel::KernelContext::new(n).unwrap();
        let t = Instant::now();
        print!("N={n:3}: ");
        for x in [1.0, 2.0, 3.0, 4.0, 5.0, 6.0] {
            let d = ctx.scaled_diag(x).unwrap();
            let mu = limitlaw::mu_density(x, 1.0);
            print!("x={x}: rel={:+.4}  ", (d - mu) / mu);
        }
        println!("  [{:?}]", t.elapsed());
    }
    // criterion 4: trace N=20
    let ctx = dppkernel::KernelContext::new(20).unwrap();
    let t = Instant::now();
    let tr = dppkernel::kernel_trace(&ctx).unwrap();
    println!("trace N=20: {tr:.9} err={:.2e} [{:?}]", (tr - 20.0).abs(), t.elapsed());
    let t = Instant::now();
    let m10 = dppkernel::scaled_diag_mass(&dppkernel::KernelContext::new(10).unwrap()).unwrap();
    let m30 = dppkernel::scaled_diag_mass(&dppkernel::KernelContext::new(30).unwrap()).unwrap();
    println!("scaled diag mass N=10: {m10:.8}, N=30: {m30:.8} [{:?}]", t.elapsed());

    // criterion 5: zeros KS decay
    let law = limitlaw::LimitDensity::new(1.0).unwrap();
    let zero = BigRational::zero();
    for n in [50usize, 100, 200, 400] {
        let t = Instant::now();
        let zs = mop::zeros(n, n as u32, &zero, &zero).unwrap();
        let m = mop::zero_counting_measure(&zs);
        let ks = m.ks_distance(|x| law.cdf(x));
        println!("zeros N={n:3}: KS={ks:.5} max_zero={:.4} resid={:.2e} [{:?}]", zs.zeros.last().unwrap(), zs.refinement_residual, t.elapsed());
    }

    // criterion 6 pilot: MC batch
    let t = Instant::now();
    let batch = ensemble::run_batch(200, 100, 42).unwrap();
    println!("batch(200,100,42) built [{:?}]", t.elapsed());
    let e = ensemble::empirical_cdf(&batch);
    let ks = ensemble::ks_distance(&e, |x| law.cdf(x));
    let (m1, se1) = batch.moment_with_se(1);
    let (m2, se2) = batch.moment_with_se(2);
    println!("MC: KS={ks:.5} m1={m1:.5}±{se1:.5} m2={m2:.5}±{se2:.5}");
    let above = batch.iter_values().filter(|&v| v > 27.0/4.0 + 0.5).count();
    println!("frac above 27/4+0.5: {:.5}%", 100.0 * above as f64 / 20000.0);
    println!("batch mean: {}", batch.pooled_mean());
    // KS decay over N at fixed trials*N
    for (n, trials) in [(25usize, 800usize), (50, 400), (100, 200), (200, 100)] {
        let b = ensemble::run_batch(n, trials, 42).unwrap();
        let e = ensemble::empirical_cdf(&b);
        let ks = ensemble::ks_distance(&e, |x| law.cdf(x));
        println!("KS decay N={n:3} trials={trials:3}: KS={ks:.5}");
    }
    println!("total {:?}", t0.elapsed());
}
