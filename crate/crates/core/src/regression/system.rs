use crate::error::{Error, Result};
use crate::linalg::{check_capacity, kronecker, Matrix};

use super::irls::IrlsWeights;

/// The vectorized normal equations of one weighted dual problem:
/// `system · vec(Ψ) = rhs_operator · vec(T_D)`.
#[derive(Debug, Clone)]
pub struct DualSystem {
    pub system: Matrix,
    pub rhs_operator: Matrix,
}

fn check_square(m: &Matrix, what: &str) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::dim(format!(
            "{what} is {}x{}, expected square",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m.nrows())
}

fn check_dual_shapes(k: &Matrix, l: &Matrix, nm: (usize, usize), what: &str) -> Result<()> {
    let n = check_square(k, "kernel matrix")?;
    let m = check_square(l, "laplacian")?;
    if nm != (n, m) {
        return Err(Error::dim(format!(
            "{what} is {}x{}, expected {n}x{m}",
            nm.0, nm.1
        )));
    }
    Ok(())
}

/// Assembles `Σₙ Dₙ² ⊗ kₙkₙᵀ + α (I ⊗ K) + β (L ⊗ K²)` block by block.
///
/// Block `(i, j)` (each N×N) is `δᵢⱼ (K diag(w²[:, i]) K + α K) + β L(i, j) K²`,
/// since `Σₙ wₙ kₙkₙᵀ = K diag(w) K` for symmetric `K`.
pub(crate) fn assemble_system_matrix(
    k: &Matrix,
    l: &Matrix,
    weights_sq: &Matrix,
    alpha: f64,
    beta: f64,
) -> Result<Matrix> {
    check_dual_shapes(k, l, weights_sq.shape(), "weights")?;
    let (n, m) = weights_sq.shape();
    let order = n * m;
    check_capacity(order, order)?;

    let k_sq = if beta != 0.0 {
        let mut k2 = k * k;
        symmetrize(&mut k2);
        Some(k2)
    } else {
        None
    };

    let mut s = Matrix::zeros(order, order);
    for i in 0..m {
        let mut block = node_block(k, weights_sq.column(i).as_slice(), alpha);
        if let Some(k2) = &k_sq {
            let lii = beta * l[(i, i)];
            block.zip_apply(k2, |b, kv| *b += lii * kv);
        }
        s.view_mut((i * n, i * n), (n, n)).copy_from(&block);

        if let Some(k2) = &k_sq {
            for j in 0..m {
                let lij = l[(i, j)];
                if i == j || lij == 0.0 {
                    continue;
                }
                let coeff = beta * lij;
                s.view_mut((i * n, j * n), (n, n))
                    .zip_apply(k2, |o, kv| *o = coeff * kv);
            }
        }
    }
    Ok(s)
}

/// `K diag(w²) K + α K`, the data and ridge part of one diagonal block.
pub(crate) fn node_block(k: &Matrix, weights_sq: &[f64], alpha: f64) -> Matrix {
    let mut scaled = k.clone();
    for (c, &w) in weights_sq.iter().enumerate() {
        scaled.column_mut(c).scale_mut(w);
    }
    let mut block = &scaled * k;
    symmetrize(&mut block);
    block.zip_apply(k, |b, kv| *b += alpha * kv);
    block
}

fn symmetrize(m: &mut Matrix) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// The dual system matrix `S` and right-hand-side operator `I_M ⊗ K`.
pub fn assemble_dual_system(
    k: &Matrix,
    l: &Matrix,
    weights: &IrlsWeights,
    alpha: f64,
    beta: f64,
) -> Result<DualSystem> {
    let system = assemble_system_matrix(k, l, &weights.squared(), alpha, beta)?;
    let m = l.nrows();
    let rhs_operator = kronecker(&Matrix::identity(m, m), k)?;
    Ok(DualSystem {
        system,
        rhs_operator,
    })
}

/// Gradient of the weighted dual cost with respect to `Ψ`:
/// `-2 K T_D + 2 Σₙ kₙkₙᵀ Ψ Dₙ² + 2α K Ψ + 2β K² Ψ L`.
pub fn dual_gradient(
    psi: &Matrix,
    k: &Matrix,
    l: &Matrix,
    t_d: &Matrix,
    weights: &IrlsWeights,
    alpha: f64,
    beta: f64,
) -> Result<Matrix> {
    check_dual_shapes(k, l, psi.shape(), "psi")?;
    check_dual_shapes(k, l, t_d.shape(), "weighted targets")?;
    check_dual_shapes(k, l, weights.shape(), "weights")?;
    let k_psi = k * psi;
    // Row n of KΨ is kₙᵀΨ, so Σₙ kₙ (kₙᵀΨ Dₙ²) = K (KΨ ⊙ W²).
    let data = k * k_psi.component_mul(&weights.squared());
    let smooth = k * (&k_psi * l);
    Ok((data - k * t_d + &k_psi * alpha + smooth * beta) * 2.0)
}

/// Weighted dual cost (without the constant `Σₙ |Dₙ tₙ|²`):
/// `-2 tr(T_Dᵀ K Ψ) + Σₙ tr(Ψᵀ kₙkₙᵀ Ψ Dₙ²) + α tr(Ψᵀ K Ψ) + β tr(Ψᵀ K² Ψ L)`.
pub fn dual_cost(
    psi: &Matrix,
    k: &Matrix,
    l: &Matrix,
    t_d: &Matrix,
    weights: &IrlsWeights,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    check_dual_shapes(k, l, psi.shape(), "psi")?;
    check_dual_shapes(k, l, t_d.shape(), "weighted targets")?;
    check_dual_shapes(k, l, weights.shape(), "weights")?;
    let k_psi = k * psi;
    let linear = t_d.dot(&k_psi);
    let data = k_psi.component_mul(&k_psi).dot(&weights.squared());
    let ridge = psi.dot(&k_psi);
    let smooth = (&k_psi * l).dot(&k_psi);
    Ok(-2.0 * linear + data + alpha * ridge + beta * smooth)
}

/// The ℓ1 objective `Σₙ |tₙ - yₙ|₁ + α·model_norm + β Σₙ yₙᵀ L yₙ`, where
/// `model_norm` is `tr(WᵀW)` (equal to `tr(Ψᵀ K Ψ)` in the dual).
pub fn eval_cost_l1(
    targets: &Matrix,
    fitted: &Matrix,
    laplacian: &Matrix,
    model_norm: f64,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    if targets.shape() != fitted.shape() {
        return Err(Error::dim(format!(
            "targets are {:?}, fitted outputs are {:?}",
            targets.shape(),
            fitted.shape()
        )));
    }
    if laplacian.shape() != (targets.ncols(), targets.ncols()) {
        return Err(Error::dim("laplacian does not match the number of nodes"));
    }
    let l1: f64 = targets.iter().zip(fitted.iter()).map(|(t, y)| (t - y).abs()).sum();
    let smooth = if beta != 0.0 {
        (fitted * laplacian).dot(fitted)
    } else {
        0.0
    };
    Ok(l1 + alpha * model_norm + beta * smooth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::kronecker;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_psd(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
        let g = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &g * g.transpose()
    }

    fn random_laplacian(rng: &mut ChaCha8Rng, m: usize) -> Matrix {
        let mut a = Matrix::zeros(m, m);
        for i in 0..m {
            for j in (i + 1)..m {
                let w = rng.random_range(0.0..1.0);
                a[(i, j)] = w;
                a[(j, i)] = w;
            }
        }
        crate::graph::build_graph(a).unwrap().laplacian().clone()
    }

    fn random_weights(rng: &mut ChaCha8Rng, n: usize, m: usize) -> IrlsWeights {
        IrlsWeights::from_matrix(Matrix::from_fn(n, m, |_, _| rng.random_range(0.2..2.0))).unwrap()
    }

    #[test]
    fn scalar_system() {
        let one = Matrix::from_element(1, 1, 1.0);
        let sys = assemble_dual_system(&one, &Matrix::zeros(1, 1), &IrlsWeights::identity(1, 1), 1.0, 0.0)
            .unwrap();
        assert_eq!(sys.system, Matrix::from_element(1, 1, 2.0));
        assert_eq!(sys.rhs_operator, one);
    }

    #[test]
    fn identity_weights_without_graph_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (n, m, alpha) = (4, 3, 0.7);
        let k = random_psd(&mut rng, n);
        let l = random_laplacian(&mut rng, m);
        let sys = assemble_dual_system(&k, &l, &IrlsWeights::identity(n, m), alpha, 0.0).unwrap();
        let expected = kronecker(&Matrix::identity(m, m), &(&k * &k + &k * alpha)).unwrap();
        assert_relative_eq!(sys.system, expected, max_relative = 1e-12, epsilon = 1e-13);
    }

    #[test]
    fn blockwise_assembly_matches_kronecker_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (n, m, alpha, beta) = (4, 3, 0.3, 0.9);
        let k = random_psd(&mut rng, n);
        let l = random_laplacian(&mut rng, m);
        let w = random_weights(&mut rng, n, m);
        let sys = assemble_dual_system(&k, &l, &w, alpha, beta).unwrap();

        let w2 = w.squared();
        let mut expected = kronecker(&Matrix::identity(m, m), &k).unwrap() * alpha
            + kronecker(&l, &(&k * &k)).unwrap() * beta;
        for i in 0..n {
            let kn = k.column(i).into_owned();
            let d2 = Matrix::from_diagonal(&w2.row(i).transpose());
            expected += kronecker(&d2, &(&kn * kn.transpose())).unwrap();
        }
        assert_relative_eq!(sys.system, expected, max_relative = 1e-12, epsilon = 1e-12);
        let asym = (&sys.system - sys.system.transpose()).norm();
        assert!(asym <= 1e-12 * sys.system.norm());
    }

    #[test]
    fn gradient_at_zero_is_linear_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (n, m) = (3, 2);
        let k = random_psd(&mut rng, n);
        let l = random_laplacian(&mut rng, m);
        let w = random_weights(&mut rng, n, m);
        let t_d = Matrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0));
        let g = dual_gradient(&Matrix::zeros(n, m), &k, &l, &t_d, &w, 0.5, 0.5).unwrap();
        assert_relative_eq!(g, &k * &t_d * -2.0, max_relative = 1e-14);
    }

    #[test]
    fn gradient_matches_explicit_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let (n, m, alpha, beta) = (3, 2, 0.4, 1.3);
        let k = random_psd(&mut rng, n);
        let l = random_laplacian(&mut rng, m);
        let w = random_weights(&mut rng, n, m);
        let t_d = Matrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0));
        let psi = Matrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0));
        let g = dual_gradient(&psi, &k, &l, &t_d, &w, alpha, beta).unwrap();

        let mut expected = -&k * &t_d + &k * &psi * alpha + &k * &k * &psi * &l * beta;
        for i in 0..n {
            let kn = k.column(i).into_owned();
            let d2 = Matrix::from_diagonal(&w.squared().row(i).transpose());
            expected += &kn * kn.transpose() * &psi * d2;
        }
        assert_relative_eq!(g, expected * 2.0, max_relative = 1e-12, epsilon = 1e-13);
    }

    #[test]
    fn l1_cost_examples() {
        let t = Matrix::from_row_slice(1, 2, &[1.0, -1.0]);
        let y = Matrix::zeros(1, 2);
        let l = Matrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        assert_eq!(eval_cost_l1(&t, &y, &l, 0.0, 0.0, 1.0).unwrap(), 2.0);

        let t = Matrix::from_row_slice(2, 2, &[1.0, -2.0, 0.5, 3.0]);
        assert_eq!(eval_cost_l1(&t, &Matrix::zeros(2, 2), &l, 0.0, 2.0, 3.0).unwrap(), 6.5);
        let y = Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 1.0]);
        assert_eq!(eval_cost_l1(&t, &y, &l, 5.0, 0.0, 0.0).unwrap(), 1.0 + 1.0 + 0.5 + 2.0);
    }
}
