use nalgebra::DMatrix;

use super::{column_variance, orient_columns, FactorModel, Rotation};

/// Kaiser-normalised loadings: each row divided by the square root of its
/// communality. Rows with zero communality stay zero.
fn normalise(loadings: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let mut out = loadings.clone();
    let mut norms = Vec::with_capacity(loadings.nrows());
    for mut row in out.row_iter_mut() {
        let h = row.norm();
        if h > 0.0 {
            row /= h;
        }
        norms.push(h);
    }
    (out, norms)
}

/// Varimax criterion on Kaiser-normalised loadings: the sum over factors of
/// the variance of squared loadings.
pub fn varimax_criterion(loadings: &DMatrix<f64>) -> f64 {
    let (l, _) = normalise(loadings);
    let p = l.nrows() as f64;
    l.column_iter()
        .map(|c| {
            let sq: Vec<f64> = c.iter().map(|x| x * x).collect();
            let mean = sq.iter().sum::<f64>() / p;
            sq.iter().map(|s| s * s).sum::<f64>() / p - mean * mean
        })
        .sum()
}

/// Rotates columns `a` and `b` of `m` by `phi`.
fn rotate_pair(m: &mut DMatrix<f64>, a: usize, b: usize, phi: f64) {
    let (s, c) = phi.sin_cos();
    for i in 0..m.nrows() {
        let (x, y) = (m[(i, a)], m[(i, b)]);
        m[(i, a)] = c * x + s * y;
        m[(i, b)] = -s * x + c * y;
    }
}

/// Varimax rotation by successive planar rotations.
///
/// Each planar step applies the angle that maximises the criterion within
/// that plane, so the criterion never decreases. Factors are finally
/// re-ordered by explained variance and oriented to positive column sums.
pub fn varimax(model: &FactorModel, tol: f64, max_iter: usize) -> FactorModel {
    let k = model.n_factors();
    let mut out = model.clone();
    out.rotation = Rotation::Varimax;
    if k < 2 {
        return out;
    }
    let (mut l, norms) = normalise(&model.loadings);
    let p = l.nrows() as f64;
    let mut t = DMatrix::<f64>::identity(k, k);
    for _ in 0..max_iter {
        let mut largest = 0.0f64;
        for a in 0..k - 1 {
            for b in a + 1..k {
                let (mut sum_u, mut sum_v, mut sum_uv2, mut sum_uv) = (0.0, 0.0, 0.0, 0.0);
                for i in 0..l.nrows() {
                    let (x, y) = (l[(i, a)], l[(i, b)]);
                    let u = x * x - y * y;
                    let v = 2.0 * x * y;
                    sum_u += u;
                    sum_v += v;
                    sum_uv2 += u * u - v * v;
                    sum_uv += 2.0 * u * v;
                }
                let num = sum_uv - 2.0 * sum_u * sum_v / p;
                let den = sum_uv2 - (sum_u * sum_u - sum_v * sum_v) / p;
                let phi = num.atan2(den) / 4.0;
                if phi.abs() > tol {
                    rotate_pair(&mut l, a, b, phi);
                    rotate_pair(&mut t, a, b, phi);
                }
                largest = largest.max(phi.abs());
            }
        }
        if largest <= tol {
            break;
        }
    }
    for (i, h) in norms.iter().enumerate() {
        l.row_mut(i).scale_mut(*h);
    }
    // order by explained variance, then orient
    let var = column_variance(&l);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| var[b].total_cmp(&var[a]).then(a.cmp(&b)));
    let mut sorted = l.select_columns(&order);
    let mut t_sorted = t.select_columns(&order);
    let signs = orient_columns(&mut sorted);
    for (f, s) in signs.iter().enumerate() {
        t_sorted.column_mut(f).scale_mut(*s);
    }
    out.variance_explained = column_variance(&sorted);
    out.loadings = sorted;
    out.rotation_matrix = &model.rotation_matrix * t_sorted;
    out
}
