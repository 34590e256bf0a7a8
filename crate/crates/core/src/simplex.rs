//! Dense tableau simplex for the packing LP `max 1ᵀu  s.t.  B u ≤ 1, u ≥ 0`
//! with strictly positive `B`. That is exactly the column player's LP of a
//! positive matrix game, and slack variables give a feasible start.

const PIVOT_EPS: f64 = 1e-12;
const RATIO_TIE: f64 = 1e-12;

pub(crate) struct PackingSolution {
    /// Optimal `u` (length = columns).
    pub primal: Vec<f64>,
    /// Optimal dual `t` of the row constraints (length = rows).
    #[cfg_attr(not(test), allow(dead_code))]
    pub dual: Vec<f64>,
    pub objective: f64,
}

/// Solves the packing LP for a row-major `rows × cols` matrix.
///
/// Bland's rule keeps the tableau from cycling on degenerate games.
pub(crate) fn solve_packing(b: &[f64], rows: usize, cols: usize) -> Result<PackingSolution, String> {
    debug_assert_eq!(b.len(), rows * cols);
    if b.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err("packing LP needs strictly positive finite entries".into());
    }

    // Columns: 0..cols decision vars, cols..cols+rows slacks, last = rhs.
    let width = cols + rows + 1;
    let rhs = width - 1;
    let mut tab = vec![0.0; (rows + 1) * width];
    for i in 0..rows {
        let row = &mut tab[i * width..(i + 1) * width];
        row[..cols].copy_from_slice(&b[i * cols..(i + 1) * cols]);
        row[cols + i] = 1.0;
        row[rhs] = 1.0;
    }
    // Objective row holds reduced costs of the minimization of -1ᵀu.
    let obj = rows * width;
    for j in 0..cols {
        tab[obj + j] = -1.0;
    }
    let mut basis: Vec<usize> = (cols..cols + rows).collect();

    let max_iter = 50 * (rows + cols + 1);
    for _ in 0..max_iter {
        let Some(enter) = (0..cols + rows).find(|&j| tab[obj + j] < -PIVOT_EPS) else {
            return Ok(extract(&tab, &basis, rows, cols, width));
        };

        let mut leave: Option<(usize, f64)> = None;
        for i in 0..rows {
            let a = tab[i * width + enter];
            if a <= PIVOT_EPS {
                continue;
            }
            let ratio = tab[i * width + rhs] / a;
            leave = match leave {
                None => Some((i, ratio)),
                Some((li, lr)) => {
                    if ratio < lr - RATIO_TIE || (ratio <= lr + RATIO_TIE && basis[i] < basis[li]) {
                        Some((i, ratio))
                    } else {
                        Some((li, lr))
                    }
                }
            };
        }
        let Some((pr, _)) = leave else {
            return Err("packing LP reported unbounded".into());
        };
        pivot(&mut tab, rows + 1, width, pr, enter);
        basis[pr] = enter;
    }
    Err(format!("simplex did not converge in {max_iter} pivots"))
}

fn pivot(tab: &mut [f64], height: usize, width: usize, pr: usize, pc: usize) {
    let p = tab[pr * width + pc];
    for v in &mut tab[pr * width..(pr + 1) * width] {
        *v /= p;
    }
    tab[pr * width + pc] = 1.0;
    for i in 0..height {
        if i == pr {
            continue;
        }
        let factor = tab[i * width + pc];
        if factor == 0.0 {
            continue;
        }
        for j in 0..width {
            tab[i * width + j] -= factor * tab[pr * width + j];
        }
        tab[i * width + pc] = 0.0;
    }
}

fn extract(tab: &[f64], basis: &[usize], rows: usize, cols: usize, width: usize) -> PackingSolution {
    let rhs = width - 1;
    let mut primal = vec![0.0; cols];
    for (i, &var) in basis.iter().enumerate() {
        if var < cols {
            primal[var] = tab[i * width + rhs].max(0.0);
        }
    }
    let obj = rows * width;
    let dual = (0..rows).map(|i| tab[obj + cols + i].max(0.0)).collect();
    PackingSolution {
        primal,
        dual,
        objective: tab[obj + rhs],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_packing() {
        // max u1 + u2, u1 <= 1, u2 <= 1 → objective 2.
        let sol = solve_packing(&[1.0, 1e-9, 1e-9, 1.0], 2, 2).unwrap();
        assert!((sol.objective - 2.0).abs() < 1e-6);
        assert!((sol.dual.iter().sum::<f64>() - sol.objective).abs() < 1e-9);
    }

    #[test]
    fn rejects_nonpositive_entries() {
        assert!(solve_packing(&[1.0, 0.0], 1, 2).is_err());
    }
}
