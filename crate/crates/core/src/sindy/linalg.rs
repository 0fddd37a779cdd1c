//! Dense least-squares helpers built on the SVD, plus the l1 selection step
//! used to pick one representative out of a degenerate solution set.

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Singular values (descending) and the full right singular basis of `a`.
/// Rows are zero-padded when `a` is wide so that `V` is always square.
fn svd_full(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>, Option<DMatrix<f64>>) {
    let (m, q) = a.shape();
    let padded;
    let src = if m < q {
        padded = a.clone().resize_vertically(q, 0.0);
        &padded
    } else {
        a
    };
    let svd = src.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let s = order.iter().map(|&i| svd.singular_values[i]).collect();
    let v = DMatrix::from_fn(q, order.len(), |r, c| vt[(order[c], r)]);
    let u = DMatrix::from_fn(u.nrows().min(m), order.len(), |r, c| u[(r, order[c])]);
    (s, v, Some(u))
}

fn numerical_rank(s: &[f64], rcond: f64) -> usize {
    match s.first() {
        Some(&top) if top > 0.0 => s.iter().take_while(|&&v| v > rcond * top).count(),
        _ => 0,
    }
}

/// Minimum-norm least-squares solution of `a x ≈ b` with singular values
/// below `rcond · σ_max` treated as zero. Also returns an orthonormal basis of
/// the numerical null space of `a` (columns).
pub fn lstsq_min_norm(a: &DMatrix<f64>, b: &DVector<f64>, rcond: f64) -> (DVector<f64>, DMatrix<f64>) {
    let q = a.ncols();
    if q == 0 {
        return (DVector::zeros(0), DMatrix::zeros(0, 0));
    }
    let (s, v, u) = svd_full(a);
    let u = u.expect("U computed");
    let r = numerical_rank(&s, rcond);
    let mut x = DVector::zeros(q);
    for k in 0..r {
        let coef = u.column(k).dot(b) / s[k];
        x.axpy(coef, &v.column(k), 1.0);
    }
    let null = v.columns(r, q - r).into_owned();
    (x, null)
}

/// Orthonormal basis of the column range of `g`.
pub fn orthonormal_range(g: &DMatrix<f64>, rcond: f64) -> DMatrix<f64> {
    let p = g.nrows();
    if g.ncols() == 0 {
        return DMatrix::zeros(p, 0);
    }
    // range(G) = range of the left singular vectors; get them as the right
    // singular vectors of Gᵀ to reuse the padded full SVD.
    let (s, v, _) = svd_full(&g.transpose());
    let r = numerical_rank(&s, rcond);
    v.columns(0, r).into_owned()
}

/// Orthonormal basis of the orthogonal complement of `range(n)`, where `n`
/// has orthonormal columns.
pub fn orthogonal_complement(n: &DMatrix<f64>) -> DMatrix<f64> {
    let p = n.nrows();
    if n.ncols() == 0 {
        return DMatrix::identity(p, p);
    }
    let (s, v, _) = svd_full(&n.transpose());
    let r = numerical_rank(&s, 1e-10);
    v.columns(r, p - r).into_owned()
}

/// Restricts a null-space basis of the full coefficient vector to the
/// directions that are supported on `support` alone, expressed in the
/// coordinates of `support`.
pub fn restrict_null_basis(null: &DMatrix<f64>, support: &[usize]) -> DMatrix<f64> {
    let k = null.ncols();
    if k == 0 {
        return DMatrix::zeros(support.len(), 0);
    }
    let p = null.nrows();
    let mut in_support = vec![false; p];
    for &i in support {
        in_support[i] = true;
    }
    let off: Vec<usize> = (0..p).filter(|&i| !in_support[i]).collect();
    let z = if off.is_empty() {
        DMatrix::identity(k, k)
    } else {
        let n_off = DMatrix::from_fn(off.len(), k, |r, c| null[(off[r], c)]);
        let (s, v, _) = svd_full(&n_off);
        let r = numerical_rank(&s, 1e-10);
        // singular values beyond the row count are implicit zeros
        v.columns(r, k - r).into_owned()
    };
    if z.ncols() == 0 {
        return DMatrix::zeros(support.len(), 0);
    }
    let restricted = DMatrix::from_fn(support.len(), k, |r, c| null[(support[r], c)]) * z;
    orthonormal_range(&restricted, 1e-10)
}

/// Gauss-Jordan elimination of the rows of `a`, pivoting on the largest
/// remaining entry of each row.
fn row_reduce(mut a: DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = a.shape();
    let mut used = vec![false; c];
    for i in 0..r {
        let pivot = (0..c).filter(|&j| !used[j]).max_by(|&x, &y| a[(i, x)].abs().total_cmp(&a[(i, y)].abs()));
        let Some(pj) = pivot.filter(|&j| a[(i, j)] != 0.0) else { continue };
        used[pj] = true;
        let pv = a[(i, pj)];
        a.row_mut(i).scale_mut(1.0 / pv);
        a[(i, pj)] = 1.0;
        for k in (0..r).filter(|&k| k != i) {
            let f = a[(k, pj)];
            if f != 0.0 {
                for j in 0..c {
                    a[(k, j)] -= f * a[(i, j)];
                }
                a[(k, pj)] = 0.0;
            }
        }
    }
    a
}

/// `min ‖w‖₁` subject to `E w = E w0`, with `w = w⁺ − w⁻`.
fn l1_equality_form(w0: &DVector<f64>, e: &DMatrix<f64>) -> Option<DVector<f64>> {
    let p = w0.len();
    let rhs = e * w0;
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let pos: Vec<_> = (0..p).map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    let neg: Vec<_> = (0..p).map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    for (r, row) in e.row_iter().enumerate() {
        let mut terms = Vec::with_capacity(2 * p);
        for (i, &c) in row.iter().enumerate().filter(|(_, c)| **c != 0.0) {
            terms.push((pos[i], c));
            terms.push((neg[i], -c));
        }
        lp.add_constraint(terms.as_slice(), ComparisonOp::Eq, rhs[r]);
    }
    let sol = lp.solve().ok()?.into_solution().ok()?;
    Some(DVector::from_fn(p, |i, _| sol.var_value(pos[i]) - sol.var_value(neg[i])))
}

/// `min Σ t` subject to `−t ≤ w0 + B z ≤ t` with free `z`.
fn l1_epigraph_form(w0: &DVector<f64>, b: &DMatrix<f64>) -> Option<DVector<f64>> {
    let (p, k) = b.shape();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let z: Vec<_> = (0..k).map(|_| lp.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY))).collect();
    let t: Vec<_> = (0..p).map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    for i in 0..p {
        for sign in [1.0, -1.0] {
            let mut terms: Vec<_> = (0..k).map(|j| (z[j], sign * b[(i, j)])).collect();
            terms.push((t[i], -1.0));
            lp.add_constraint(terms.as_slice(), ComparisonOp::Le, -sign * w0[i]);
        }
    }
    let sol = lp.solve().ok()?.into_solution().ok()?;
    Some(w0 + b * DVector::from_fn(k, |j, _| sol.var_value(z[j])))
}

/// Solves `min ‖w‖₁` over `w ∈ w0 + range(B)` and returns the minimiser, with
/// entries that are zero to solver precision set exactly to zero.
///
/// The simplex solver occasionally stalls on a singular basis, so the same
/// problem is tried in up to three algebraically equivalent forms; an answer
/// is accepted only if it stays on the affine set.
pub fn min_l1_affine(w0: &DVector<f64>, basis: &DMatrix<f64>) -> Result<DVector<f64>> {
    if basis.ncols() == 0 {
        return Ok(w0.clone());
    }
    let range = orthonormal_range(basis, 1e-10);
    if range.ncols() == 0 {
        return Ok(w0.clone());
    }
    let complement = orthogonal_complement(&range).transpose();
    let scale = w0.amax().max(1.0);
    let feasible = |w: &DVector<f64>| (&complement * (w - w0)).amax() <= 1e-7 * scale;
    let attempts: [&dyn Fn() -> Option<DVector<f64>>; 3] = [
        &|| l1_equality_form(w0, &complement),
        &|| l1_equality_form(w0, &row_reduce(complement.clone())),
        &|| l1_epigraph_form(w0, &range),
    ];
    let mut w = attempts
        .iter()
        .find_map(|solve| solve().filter(|w| feasible(w)))
        .ok_or_else(|| Error::Numerical("l1 selection failed in every formulation".into()))?;
    let scale = w.amax().max(scale);
    for v in w.iter_mut() {
        if v.abs() <= 1e-9 * scale {
            *v = 0.0;
        }
    }
    Ok(w)
}
