use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::rng::Rng;

/// Returns a `rows x cols` row-major matrix whose rows (if rows <= cols) or
/// columns (otherwise) are orthonormal. Modified Gram-Schmidt on a Gaussian draw.
pub fn random_orthonormal(rows: usize, cols: usize, rng: &mut Rng) -> Vec<f64> {
    let (n, m, transpose) = if rows <= cols {
        (rows, cols, false)
    } else {
        (cols, rows, true)
    };
    // n vectors of length m, orthonormalized.
    let mut v: Vec<Vec<f64>> = Vec::with_capacity(n);
    while v.len() < n {
        let mut cand: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        for _pass in 0..2 {
            for q in &v {
                let d: f64 = q.iter().zip(&cand).map(|(a, b)| a * b).sum();
                for (c, qi) in cand.iter_mut().zip(q) {
                    *c -= d * qi;
                }
            }
        }
        let norm = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        cand.iter_mut().for_each(|x| *x /= norm);
        v.push(cand);
    }
    let mut out = vec![0.0; rows * cols];
    for (i, vec) in v.iter().enumerate() {
        for (j, &x) in vec.iter().enumerate() {
            if transpose {
                out[j * cols + i] = x;
            } else {
                out[i * cols + j] = x;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn square_matrix_is_orthogonal() {
        let n = 10;
        let m = random_orthonormal(n, n, &mut rng_from_seed(3));
        for i in 0..n {
            for j in 0..n {
                let d: f64 = (0..n).map(|k| m[k * n + i] * m[k * n + j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tall_matrix_has_orthonormal_columns() {
        let m = random_orthonormal(6, 3, &mut rng_from_seed(4));
        for i in 0..3 {
            for j in 0..3 {
                let d: f64 = (0..6).map(|k| m[k * 3 + i] * m[k * 3 + j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-12);
            }
        }
    }
}
