use fractel::laplace_oracle::{laplace_symbol, talbot_invert, talbot_invert_n};
use fractel::scalar_cauchy::{ModeParams, ModeSolution, SourceProfile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_params(rng: &mut ChaCha8Rng, i: usize) -> ModeParams {
    let rho = rng.gen_range(0.15..0.95);
    let alpha = rng.gen_range(0.2..4.0);
    let lambda = match i % 4 {
        0 => alpha * alpha,
        1 => rng.gen_range(0.0..alpha * alpha),
        _ => rng.gen_range(alpha * alpha..100.0f64.max(alpha * alpha + 1.0)),
    };
    let source = if i % 3 == 0 {
        SourceProfile::zero()
    } else {
        SourceProfile::new(vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)])
    };
    ModeParams {
        rho,
        alpha,
        lambda,
        phi0: rng.gen_range(-2.0..2.0),
        phi1: rng.gen_range(-2.0..2.0),
        source,
    }
}

fn times() -> Vec<f64> {
    (0..=18).map(|i| 0.1 + 0.05 * i as f64).collect()
}

#[test]
fn solver_matches_laplace_inversion() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for i in 0..20 {
        let p = random_params(&mut rng, i);
        let sol = ModeSolution::new(p.clone()).unwrap();
        let sym = laplace_symbol(&p).unwrap();
        let mut diff = 0.0f64;
        let mut scale = 0.0f64;
        for t in times() {
            let ys = sol.y(t).unwrap();
            let yo = talbot_invert(&sym, t).unwrap();
            diff = diff.max((ys - yo).norm());
            scale = scale.max(ys.norm());
        }
        let rel = diff / scale;
        println!("{i}: rho={:.3} alpha={:.3} lambda={:.3} rel={rel:.3e}", p.rho, p.alpha, p.lambda);
        worst = worst.max(rel);
    }
    assert!(worst <= 1e-6, "{worst}");
}

#[test]
fn contour_is_converged_at_default_nodes() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..20 {
        let p = random_params(&mut rng, i);
        let sym = laplace_symbol(&p).unwrap();
        for t in [0.1, 0.55, 1.0] {
            let a = talbot_invert_n(&sym, t, 64).unwrap();
            let b = talbot_invert_n(&sym, t, 128).unwrap();
            assert!((a - b).norm() <= 1e-10 * a.norm().max(1e-3), "{i} {t}: {a} {b}");
        }
    }
}
