use std::f64::consts::PI;

use cylspace::phase_space::{
    convolution_kernel, convolve, cyl_fourier, overlap_grid, p_char, p_char_point_masses, p_reconstruct, q_function,
    reconstruct_from_wigner_char, wigner_char, wigner_function, O_FLOOR,
};
use cylspace::{AngularWindow, VonMisesParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mixture(rng: &mut ChaCha8Rng) -> (f64, Vec<(f64, VonMisesParams)>) {
    let kappa = rng.gen_range(0.3..1.5);
    let count = rng.gen_range(1..=3);
    let raw: Vec<f64> = (0..count).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let comps = raw
        .iter()
        .map(|w| {
            let p = VonMisesParams::new(rng.gen_range(-2..=2), 0.0, rng.gen_range(-PI..PI), kappa).unwrap();
            (w / total, p)
        })
        .collect();
    (kappa, comps)
}

#[test]
fn hierarchy_on_random_mixtures() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let win = AngularWindow::new(-18, 18, 0.0, 1e-12).unwrap();
    let (lb, p) = (36, 128);
    for _ in 0..3 {
        let (kappa, comps) = mixture(&mut rng);
        let rho = p_reconstruct(&comps, win).unwrap();
        let cw = wigner_char(&rho, -lb, lb, p).unwrap();
        let o = overlap_grid(kappa, -lb, lb, p).unwrap();

        let q = q_function(&rho, kappa, -50, 50, 128).unwrap();
        assert!((q.total() - 1.0).abs() < 1e-8);
        assert!(q.min() > -1e-12);
        let cq = cyl_fourier(&q.to_table(), -lb, lb, p).unwrap();
        assert!(cq.max_distance(&cw.multiply(&o).unwrap()).unwrap() < 1e-9);

        let cp = p_char_point_masses(&comps, -lb, lb, p).unwrap();
        assert!(o.multiply(&cp).unwrap().max_distance(&cw).unwrap() < 1e-8);
        let numeric = p_char(&rho, kappa, -lb, lb, p).unwrap();
        for &(l, j) in &numeric.excluded {
            assert!(o.get(l, j).norm() <= O_FLOOR);
        }

        assert!(reconstruct_from_wigner_char(&cw, win).unwrap().distance(&rho) < 1e-9);
        assert!(cw.hermitian_residual() < 1e-12);
    }
}

#[test]
fn q_is_kernel_convolved_wigner_for_vacuum() {
    let kappa = 0.9;
    let win = AngularWindow::new(-20, 20, 0.0, 1e-12).unwrap();
    let rho = p_reconstruct(&[(1.0, VonMisesParams::new(0, 0.0, 0.0, kappa).unwrap())], win).unwrap();
    let q = q_function(&rho, kappa, -30, 30, 128).unwrap();
    let k = convolution_kernel(kappa, 20, 128).unwrap();
    let w = wigner_function(&rho, 128).unwrap();
    let conv = convolve(&k, &w, -60, 60).unwrap();
    assert!(conv.max_distance(&q.to_table()).unwrap() < 1e-8);
    // 2π W of the same state is the kernel itself
    let scaled = w.values().mapv(|v| v * 2.0 * PI);
    for nu2 in -40..=40 {
        for j in 0..128 {
            let i = (nu2 - w.nu2_min()) as usize;
            assert!((scaled[(i, j)] - k.get(nu2, j)).norm() < 1e-10);
        }
    }
}
