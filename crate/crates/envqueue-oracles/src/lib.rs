//! Independent numerical oracles for the test suites.
//!
//! Nothing here is used by the library or the CLI at runtime; these routines
//! provide second opinions (dense linear algebra, subtraction-free
//! eliminations, brute-force sums) against which the closed forms and
//! simulators are checked.

use nalgebra::DMatrix;

/// Stationary vector of a conservative rate matrix by Grassmann–Taksar–Heyman
/// state elimination. The algorithm uses no subtractions, so it keeps
/// componentwise relative accuracy even when rates span hundreds of orders of
/// magnitude — exactly the regime the queue-scaled environment switch rates
/// produce.
///
/// `rows[x]` lists off-diagonal `(y, rate)` pairs; the diagonal is implied.
#[allow(clippy::needless_range_loop)]
pub fn gth_stationary(dim: usize, rows: &[Vec<(usize, f64)>]) -> Vec<f64> {
    assert_eq!(rows.len(), dim);
    let mut q = vec![vec![0.0f64; dim]; dim];
    for (x, row) in rows.iter().enumerate() {
        for &(y, r) in row {
            if x != y {
                q[x][y] += r;
            }
        }
    }
    // Eliminate states dim-1, dim-2, ..., 1.
    for k in (1..dim).rev() {
        let total: f64 = q[k][..k].iter().sum();
        if total <= 0.0 {
            // State k cannot reach the retained block; it carries no
            // stationary mass and its column is irrelevant below.
            continue;
        }
        for i in 0..k {
            let qik = q[i][k];
            if qik == 0.0 {
                continue;
            }
            for j in 0..k {
                if i != j {
                    let flow = qik * q[k][j] / total;
                    q[i][j] += flow;
                }
            }
        }
    }
    // Back substitution.
    let mut pi = vec![0.0f64; dim];
    pi[0] = 1.0;
    for k in 1..dim {
        let total: f64 = q[k][..k].iter().sum();
        if total <= 0.0 {
            pi[k] = 0.0;
            continue;
        }
        let mut acc = 0.0;
        for j in 0..k {
            acc += pi[j] * q[j][k];
        }
        pi[k] = acc / total;
    }
    let s: f64 = pi.iter().sum();
    for x in &mut pi {
        *x /= s;
    }
    pi
}

/// Spectral gap of a conservative rate matrix: the smallest nonzero decay
/// rate `-Re(lambda)` over the eigenvalues of the dense generator.
pub fn spectral_gap(dim: usize, rows: &[Vec<(usize, f64)>], diag: &[f64]) -> f64 {
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    for (x, row) in rows.iter().enumerate() {
        m[(x, x)] = diag[x];
        for &(y, r) in row {
            m[(x, y)] += r;
        }
    }
    let eigs = m.complex_eigenvalues();
    let mut gap = f64::INFINITY;
    for e in eigs.iter() {
        let decay = -e.re;
        if decay > 1e-9 && decay < gap {
            gap = decay;
        }
    }
    gap
}

/// Dense left-null-space solve of a conservative rate matrix via LU on the
/// transposed generator with the normalization row appended. Suitable only
/// for mild rate ranges; the GTH route covers the stiff ones.
pub fn lu_stationary(dim: usize, rows: &[Vec<(usize, f64)>], diag: &[f64]) -> Vec<f64> {
    let mut a = DMatrix::<f64>::zeros(dim + 1, dim);
    for (x, row) in rows.iter().enumerate() {
        a[(x, x)] = diag[x];
        for &(y, r) in row {
            a[(y, x)] += r; // transposed
        }
    }
    for j in 0..dim {
        a[(dim, j)] = 1.0;
    }
    let mut b = nalgebra::DVector::<f64>::zeros(dim + 1);
    b[dim] = 1.0;
    // Normal equations on the stacked system.
    let ata = a.transpose() * &a;
    let atb = a.transpose() * b;
    let sol = ata
        .lu()
        .solve(&atb)
        .expect("normal equations solvable for an irreducible chain");
    let mut pi: Vec<f64> = sol.iter().cloned().collect();
    let s: f64 = pi.iter().sum();
    for x in &mut pi {
        *x /= s;
    }
    pi
}

/// Exact truncated-geometric probabilities `(1-rho) rho^n` for reference.
pub fn geometric_pmf(rho: f64, n_max: u32) -> Vec<f64> {
    (0..=n_max)
        .map(|n| (1.0 - rho) * rho.powi(n as i32))
        .collect()
}
