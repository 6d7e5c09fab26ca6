//! Synthetic estimation instances for the timing benchmark.

use tagk_core::estimators::MeasurementBlock;
use tagk_core::linalg::{mat_vec, Matrix, Vector};
use tagk_core::rng::Stream;

/// Random instance: A has independent standard-normal entries, theta_true is
/// standard-normal, and b = A theta_true plus zero-mean Gaussian noise of
/// standard deviation `noise`.
pub fn gen_synthetic(n: usize, m: usize, noise: f64, rng: &mut Stream) -> (MeasurementBlock, Vector) {
    assert!(n >= 1 && m >= 1, "instance sizes must be positive");
    let a = Matrix::from_fn(m, n, |_, _| rng.gauss());
    let theta = Vector::from_vec((0..n).map(|_| rng.gauss()).collect());
    let mut b = mat_vec(&a, &theta);
    for i in 0..m {
        b[i] += rng.gauss_scaled(noise);
    }
    (MeasurementBlock::new(a, b), theta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_are_as_requested() {
        let mut rng = Stream::derive(1, 0);
        let (block, theta) = gen_synthetic(7, 4, 0.1, &mut rng);
        assert_eq!(block.rows(), 4);
        assert_eq!(block.cols(), 7);
        assert_eq!(theta.len(), 7);
    }

    #[test]
    fn fixed_seed_reproduces_instance() {
        let (b1, t1) = gen_synthetic(5, 3, 0.2, &mut Stream::derive(9, 4));
        let (b2, t2) = gen_synthetic(5, 3, 0.2, &mut Stream::derive(9, 4));
        assert_eq!(b1, b2);
        assert_eq!(t1, t2);
    }

    #[test]
    fn noiseless_stacked_blocks_recover_theta() {
        // Least squares over enough stacked noiseless rows must return
        // theta_true: solve the normal equations over 3 stacked blocks.
        let n = 10;
        let m = 6;
        let mut rng = Stream::derive(3, 0);
        let mut stacked_a = Matrix::zeros(3 * m, n);
        let mut stacked_b = Vector::zeros(3 * m);
        let (first_block, theta) = gen_synthetic(n, m, 0.0, &mut rng);
        let mut blocks = vec![first_block];
        for _ in 1..3 {
            // Same theta: rebuild b from freshly drawn A rows.
            let a = Matrix::from_fn(m, n, |_, _| rng.gauss());
            let b = mat_vec(&a, &theta);
            blocks.push(MeasurementBlock::new(a, b));
        }
        for (k, block) in blocks.iter().enumerate() {
            for i in 0..m {
                for j in 0..n {
                    stacked_a[(k * m + i, j)] = block.a()[(i, j)];
                }
                stacked_b[k * m + i] = block.b()[i];
            }
        }
        let at = stacked_a.transpose();
        let ata = at.mat_mul(&stacked_a);
        let atb = mat_vec(&at, &stacked_b);
        let sol = tagk_core::linalg::solve_spd_vec(&ata, &atb).unwrap();
        let err = sol.sub(&theta).norm() / theta.norm();
        assert!(err < 1e-8, "relative error {err}");
    }
}
