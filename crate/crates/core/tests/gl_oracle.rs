use fractel::fracops::{gl_derivative_grid, graded_grid, SingularFunctionSamples};
use fractel::mlf::{ml_eval, prabhakar_eval};
use num_complex::Complex64;

fn rel_sup(samples: &SingularFunctionSamples, reference: impl Fn(f64) -> Complex64) -> f64 {
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for (t, v) in samples.grid.iter().zip(&samples.values) {
        if *t < 0.1 || *t > 1.0 {
            continue;
        }
        let r = reference(*t);
        num = num.max((v - r).norm());
        den = den.max(r.norm());
    }
    num / den
}

fn exp_type_error(rho: f64, lambda: f64, n: usize) -> f64 {
    let c = Complex64::new(lambda, 0.0);
    let e = move |t: f64| ml_eval(rho, rho, c * t.powf(rho)).unwrap();
    let s = SingularFunctionSamples::from_fn(graded_grid(1.0, n, rho), rho - 1.0, e).unwrap();
    let d = gl_derivative_grid(&s, rho).unwrap();
    rel_sup(&d, |t| c * t.powf(rho - 1.0) * e(t))
}

#[test]
fn eigenfunction_relation_converges() {
    for &(rho, lambda) in &[(0.5, -1.0), (0.3, -5.0), (0.8, -20.0), (0.6, 2.0)] {
        let e1 = exp_type_error(rho, lambda, 256);
        let e2 = exp_type_error(rho, lambda, 512);
        let e3 = exp_type_error(rho, lambda, 1024);
        println!("{rho} {lambda}: {e1:.3e} {e2:.3e} {e3:.3e}");
        assert!(e2 < 1e-3);
        assert!(e3 < 0.5 * e2);
    }
}

#[test]
fn prabhakar_relation_converges() {
    for &(rho, lambda) in &[(0.5, -1.0), (0.7, -10.0)] {
        let c = Complex64::new(lambda, 0.0);
        let mut prev = f64::INFINITY;
        for &n in &[256usize, 512, 1024] {
            let p = move |t: f64| prabhakar_eval(rho, 2.0 * rho, c * t.powf(rho)).unwrap();
            let s = SingularFunctionSamples::from_fn(graded_grid(1.0, n, rho), 2.0 * rho - 1.0, p).unwrap();
            let d = gl_derivative_grid(&s, rho).unwrap();
            let err = rel_sup(&d, |t| t.powf(rho - 1.0) * prabhakar_eval(rho, rho, c * t.powf(rho)).unwrap());
            println!("{rho} {lambda} {n}: {err:.3e}");
            assert!(err < prev * 0.5);
            prev = err;
        }
    }
}

#[test]
fn prabhakar_relation_meets_pointwise_tolerance() {
    for &(rho, lambda) in &[(0.5, -1.0), (0.7, -10.0), (0.35, -3.0)] {
        let c = Complex64::new(lambda, 0.0);
        let p = move |t: f64| prabhakar_eval(rho, 2.0 * rho, c * t.powf(rho)).unwrap();
        let s = SingularFunctionSamples::from_fn(graded_grid(1.0, 2048, rho), 2.0 * rho - 1.0, p).unwrap();
        let d = gl_derivative_grid(&s, rho).unwrap();
        let err = rel_sup(&d, |t| t.powf(rho - 1.0) * prabhakar_eval(rho, rho, c * t.powf(rho)).unwrap());
        println!("{rho} {lambda}: {err:.3e}");
        assert!(err <= 1e-5, "{err}");
    }
}

#[test]
fn convolution_relation_meets_tolerance() {
    use fractel::scalar_cauchy::{ml_convolve, MlKernel};
    // ∂^ρ of the E²_{ρ,2ρ} convolution equals the E²_{ρ,ρ} convolution, for g = τ^{ρ-1}
    for &(rho, lambda) in &[(0.5, -2.0), (0.75, -8.0)] {
        let c = Complex64::new(lambda, 0.0);
        let outer = MlKernel::new(rho, 2.0 * rho, 2, c);
        let inner = MlKernel::new(rho, rho, 2, c);
        let one = |_: f64| Complex64::new(1.0, 0.0);
        let e = 3.0 * rho - 1.0;
        let h = move |t: f64| ml_convolve(&outer, rho - 1.0, one, t).unwrap() * t.powf(-e);
        let s = SingularFunctionSamples::from_fn(graded_grid(1.0, 1024, rho), e, h).unwrap();
        let d = gl_derivative_grid(&s, rho).unwrap();
        let err = rel_sup(&d, |t| ml_convolve(&inner, rho - 1.0, one, t).unwrap());
        println!("{rho} {lambda}: {err:.3e}");
        assert!(err <= 1e-4, "{err}");
    }
}
