//! Zero-sum matrix games. The row player (defender) minimizes `yᵀAz`, the
//! column player (adversary) maximizes it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::solve_packing;

/// Value comparisons between independent routes.
pub const VALUE_TOL: f64 = 1e-9;
/// Strategy vectors sum to one within this after renormalization.
pub const SIMPLEX_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl GameMatrix {
    /// Row-major constructor.
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Precondition("game matrix needs at least one row and column".into()));
        }
        if entries.len() != rows * cols {
            return Err(Error::Precondition(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        if let Some(pos) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::Precondition(format!(
                "entry ({}, {}) is not finite",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Precondition("ragged matrix rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    /// Returns `c·A + shift` entrywise.
    pub fn affine(&self, scale: f64, shift: f64) -> Result<Self> {
        Self::new(
            self.rows,
            self.cols,
            self.entries.iter().map(|v| scale * v + shift).collect(),
        )
    }

    /// `yᵀAz`.
    pub fn bilinear(&self, y: &[f64], z: &[f64]) -> f64 {
        (0..self.rows)
            .map(|i| y[i] * self.row(i).iter().zip(z).map(|(a, zj)| a * zj).sum::<f64>())
            .sum()
    }

    /// `(yᵀA)_j` for every column.
    pub fn row_mix_payoffs(&self, y: &[f64]) -> Vec<f64> {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| y[i] * self.get(i, j)).sum())
            .collect()
    }

    /// `(Az)_i` for every row.
    pub fn col_mix_payoffs(&self, z: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(z).map(|(a, zj)| a * zj).sum())
            .collect()
    }

    fn min_max(&self) -> (f64, f64) {
        self.entries
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionKind {
    Pure,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixGameSolution {
    pub value: f64,
    /// Defender mixture over rows.
    pub row_strategy: Vec<f64>,
    /// Adversary mixture over columns.
    pub col_strategy: Vec<f64>,
    pub kind: SolutionKind,
    /// |defender LP optimum − adversary LP optimum|; zero for pure saddles
    /// and closed forms.
    pub duality_gap: f64,
}

impl MatrixGameSolution {
    fn pure(rows: usize, cols: usize, i: usize, j: usize, value: f64) -> Self {
        Self {
            value,
            row_strategy: unit(rows, i),
            col_strategy: unit(cols, j),
            kind: SolutionKind::Pure,
            duality_gap: 0.0,
        }
    }
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

/// Lexicographically first saddle entry: minimal in its column and maximal
/// in its row.
pub fn pure_saddle(a: &GameMatrix) -> Option<(usize, usize, f64)> {
    for i in 0..a.rows {
        let row_max = a.row(i).iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for j in 0..a.cols {
            let v = a.get(i, j);
            if v < row_max {
                continue;
            }
            if (0..a.rows).all(|r| v <= a.get(r, j)) {
                return Some((i, j, v));
            }
        }
    }
    None
}

/// Value and equilibrium strategies of a zero-sum matrix game.
///
/// Pure saddles are returned directly. Otherwise the matrix is affinely
/// normalized into `[1, 2]` and both players' LPs are solved by simplex;
/// the game value is read from the defender LP and the gap to the
/// adversary LP is reported.
pub fn solve_zero_sum(a: &GameMatrix) -> Result<MatrixGameSolution> {
    if let Some((i, j, v)) = pure_saddle(a) {
        return Ok(MatrixGameSolution::pure(a.rows, a.cols, i, j, v));
    }

    let (lo, hi) = a.min_max();
    // No pure saddle implies a non-constant matrix.
    let span = hi - lo;
    let normalized: Vec<f64> = a.entries.iter().map(|v| (v - lo) / span + 1.0).collect();
    let fail = |message: String| Error::MatrixGame {
        context: "solve_zero_sum".into(),
        message,
        matrix: a.to_rows(),
    };

    // Defender: max 1ᵀt s.t. Bᵀt ≤ 1, so y = t/Σt and val(B) = 1/Σt.
    let mut transposed = vec![0.0; a.rows * a.cols];
    for i in 0..a.rows {
        for j in 0..a.cols {
            transposed[j * a.rows + i] = normalized[i * a.cols + j];
        }
    }
    let defender = solve_packing(&transposed, a.cols, a.rows).map_err(fail)?;
    // Adversary minimizes 3 - B, which also lies in [1, 2].
    let flipped: Vec<f64> = normalized.iter().map(|v| 3.0 - v).collect();
    let adversary = solve_packing(&flipped, a.rows, a.cols).map_err(fail)?;

    if !(adversary.objective > 0.0 && defender.objective > 0.0) {
        return Err(fail("non-positive LP objective".into()));
    }
    let value_def = 1.0 / defender.objective;
    let value_adv = 3.0 - 1.0 / adversary.objective;

    let sol = MatrixGameSolution {
        value: lo + span * (value_def - 1.0),
        row_strategy: normalize(&defender.primal).ok_or_else(|| fail("degenerate defender LP".into()))?,
        col_strategy: normalize(&adversary.primal).ok_or_else(|| fail("degenerate adversary LP".into()))?,
        kind: SolutionKind::Mixed,
        duality_gap: span * (value_adv - value_def).abs(),
    };

    let check = verify_solution(a, &sol, 1e-7 * (1.0 + span + lo.abs().max(hi.abs())));
    if !check.passed {
        return Err(fail(format!(
            "equilibrium check failed with violation {:.3e}",
            check.max_violation
        )));
    }
    Ok(sol)
}

/// Shapley's closed form for a 2×2 game without a pure saddle.
pub fn solve_2x2_closed_form(a: &GameMatrix) -> Result<MatrixGameSolution> {
    if a.rows != 2 || a.cols != 2 {
        return Err(Error::Precondition(format!(
            "closed form needs a 2x2 matrix, got {}x{}",
            a.rows, a.cols
        )));
    }
    if let Some((i, j, _)) = pure_saddle(a) {
        return Err(Error::Precondition(format!("matrix has a pure saddle at ({i}, {j})")));
    }
    let (a11, a12, a21, a22) = (a.get(0, 0), a.get(0, 1), a.get(1, 0), a.get(1, 1));
    let den = a11 + a22 - a12 - a21;
    let y1 = (a22 - a21) / den;
    let z1 = (a22 - a12) / den;
    Ok(MatrixGameSolution {
        value: (a11 * a22 - a12 * a21) / den,
        row_strategy: vec![y1, 1.0 - y1],
        col_strategy: vec![z1, 1.0 - z1],
        kind: SolutionKind::Mixed,
        duality_gap: 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub passed: bool,
    /// Largest amount by which a pure deviation beats the claimed value, or
    /// by which a strategy leaves the simplex.
    pub max_violation: f64,
}

/// Checks the saddle inequalities against every pure deviation:
/// `yᵀA e_j ≤ v + tol` and `e_iᵀA z ≥ v − tol`, plus simplex membership.
pub fn verify_solution(a: &GameMatrix, sol: &MatrixGameSolution, tol: f64) -> Verification {
    if sol.row_strategy.len() != a.rows || sol.col_strategy.len() != a.cols {
        return Verification {
            passed: false,
            max_violation: f64::INFINITY,
        };
    }
    let simplex_violation = |p: &[f64]| {
        let neg = p.iter().map(|&v| (-v).max(0.0)).fold(0.0, f64::max);
        neg.max((p.iter().sum::<f64>() - 1.0).abs())
    };
    let mut worst = simplex_violation(&sol.row_strategy).max(simplex_violation(&sol.col_strategy));
    for payoff in a.row_mix_payoffs(&sol.row_strategy) {
        worst = worst.max(payoff - sol.value);
    }
    for payoff in a.col_mix_payoffs(&sol.col_strategy) {
        worst = worst.max(sol.value - payoff);
    }
    let max_violation = worst.max(0.0);
    Verification {
        passed: max_violation <= tol && max_violation.is_finite() && sol.value.is_finite(),
        max_violation,
    }
}

/// Clamps and renormalizes an LP vertex into the simplex.
fn normalize(v: &[f64]) -> Option<Vec<f64>> {
    let clipped: Vec<f64> = v.iter().map(|&x| if x < 1e-15 { 0.0 } else { x }).collect();
    let total: f64 = clipped.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return None;
    }
    let out: Vec<f64> = clipped.iter().map(|x| x / total).collect();
    debug_assert!((out.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOL);
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> GameMatrix {
        GameMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    /// Brute-force value of a game with 2 rows: scan the defender's mixture.
    fn grid_value_two_rows(a: &GameMatrix) -> f64 {
        (0..=200_000)
            .map(|s| {
                let y = s as f64 / 200_000.0;
                a.row_mix_payoffs(&[y, 1.0 - y]).into_iter().fold(f64::NEG_INFINITY, f64::max)
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn matching_pennies_style() {
        let a = m(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let sol = solve_zero_sum(&a).unwrap();
        assert!((sol.value - 0.5).abs() < 1e-12);
        assert!(close(&sol.row_strategy, &[0.5, 0.5], 1e-12));
        assert!(close(&sol.col_strategy, &[0.5, 0.5], 1e-12));
        assert_eq!(sol.kind, SolutionKind::Mixed);
        assert!(sol.duality_gap < 1e-12);
    }

    #[test]
    fn pure_saddle_is_detected() {
        let a = m(&[&[1.0, 2.0], &[0.0, 1.0]]);
        assert_eq!(pure_saddle(&a), Some((1, 1, 1.0)));
        let sol = solve_zero_sum(&a).unwrap();
        assert_eq!(sol.kind, SolutionKind::Pure);
        assert_eq!(sol.value, 1.0);
        assert_eq!(sol.row_strategy, vec![0.0, 1.0]);
        assert_eq!(sol.col_strategy, vec![0.0, 1.0]);

        assert_eq!(pure_saddle(&m(&[&[0.0, 1.0], &[1.0, 0.0]])), None);
        assert_eq!(pure_saddle(&m(&[&[4.5]])), Some((0, 0, 4.5)));
    }

    #[test]
    fn pure_saddle_tie_breaks_lexicographically() {
        let a = m(&[&[1.0, 1.0], &[1.0, 1.0]]);
        assert_eq!(pure_saddle(&a), Some((0, 0, 1.0)));
    }

    #[test]
    fn mixed_two_by_two_matches_grid_oracle() {
        let a = m(&[&[3.0, 0.0], &[1.0, 2.0]]);
        let oracle = grid_value_two_rows(&a);
        assert!((oracle - 1.5).abs() < 1e-4);
        let lp = solve_zero_sum(&a).unwrap();
        let cf = solve_2x2_closed_form(&a).unwrap();
        for sol in [&lp, &cf] {
            assert!((sol.value - 1.5).abs() < 1e-12);
            assert!(close(&sol.row_strategy, &[0.25, 0.75], 1e-12));
            assert!(close(&sol.col_strategy, &[0.5, 0.5], 1e-12));
        }
    }

    #[test]
    fn closed_form_symmetric_games() {
        let cf = solve_2x2_closed_form(&m(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        assert!((cf.value - 0.5).abs() < 1e-15);
        let cf = solve_2x2_closed_form(&m(&[&[2.0, -1.0], &[-1.0, 2.0]])).unwrap();
        assert!((cf.value - 0.5).abs() < 1e-15);
        assert!(close(&cf.row_strategy, &[0.5, 0.5], 1e-15));
        assert!(close(&cf.col_strategy, &[0.5, 0.5], 1e-15));
    }

    #[test]
    fn closed_form_preconditions() {
        assert!(matches!(
            solve_2x2_closed_form(&m(&[&[1.0, 2.0], &[0.0, 1.0]])),
            Err(Error::Precondition(_))
        ));
        assert!(solve_2x2_closed_form(&m(&[&[1.0, 2.0, 3.0], &[0.0, 1.0, 2.0]])).is_err());
    }

    #[test]
    fn verify_flags_exploitable_strategies() {
        let a = m(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let good = MatrixGameSolution {
            value: 0.5,
            row_strategy: vec![0.5, 0.5],
            col_strategy: vec![0.5, 0.5],
            kind: SolutionKind::Mixed,
            duality_gap: 0.0,
        };
        let v = verify_solution(&a, &good, 1e-9);
        assert!(v.passed);
        assert_eq!(v.max_violation, 0.0);

        let bad = MatrixGameSolution {
            row_strategy: vec![1.0, 0.0],
            ..good
        };
        let v = verify_solution(&a, &bad, 1e-9);
        assert!(!v.passed);
        assert!((v.max_violation - 0.5).abs() < 1e-15);
    }

    #[test]
    fn constructor_validation() {
        assert!(GameMatrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(GameMatrix::new(0, 2, vec![]).is_err());
        assert!(GameMatrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(GameMatrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn rock_paper_scissors() {
        let a = m(&[&[0.0, 1.0, -1.0], &[-1.0, 0.0, 1.0], &[1.0, -1.0, 0.0]]);
        let sol = solve_zero_sum(&a).unwrap();
        assert!(sol.value.abs() < 1e-12);
        assert!(close(&sol.row_strategy, &[1.0 / 3.0; 3], 1e-12));
        assert!(close(&sol.col_strategy, &[1.0 / 3.0; 3], 1e-12));
    }

    fn arb_matrix(max: usize) -> impl Strategy<Value = GameMatrix> {
        (1..=max, 1..=max).prop_flat_map(|(r, c)| {
            prop::collection::vec(-9i32..=9, r * c)
                .prop_map(move |e| GameMatrix::new(r, c, e.into_iter().map(f64::from).collect()).unwrap())
        })
    }

    proptest! {
        #[test]
        fn solver_output_always_verifies(a in arb_matrix(5)) {
            let sol = solve_zero_sum(&a).unwrap();
            let v = verify_solution(&a, &sol, 1e-8);
            prop_assert!(v.passed, "violation {}", v.max_violation);
            prop_assert!(sol.duality_gap <= 1e-9);
        }

        #[test]
        fn shift_and_scale_invariance(a in arb_matrix(4), shift in -50.0f64..50.0, scale in 0.1f64..20.0) {
            let base = solve_zero_sum(&a).unwrap();
            let shifted = solve_zero_sum(&a.affine(1.0, shift).unwrap()).unwrap();
            prop_assert!((shifted.value - base.value - shift).abs() <= 1e-9);
            let scaled = solve_zero_sum(&a.affine(scale, 0.0).unwrap()).unwrap();
            prop_assert!((scaled.value - scale * base.value).abs() <= 1e-9 * (1.0 + scale * base.value.abs()));
            prop_assert!(close(&shifted.row_strategy, &base.row_strategy, 1e-9));
            prop_assert!(close(&shifted.col_strategy, &base.col_strategy, 1e-9));
            prop_assert!(close(&scaled.row_strategy, &base.row_strategy, 1e-9));
            prop_assert!(close(&scaled.col_strategy, &base.col_strategy, 1e-9));
        }

        #[test]
        fn closed_form_agrees_with_lp(e in prop::collection::vec(-9i32..=9, 4)) {
            let a = GameMatrix::new(2, 2, e.into_iter().map(f64::from).collect()).unwrap();
            prop_assume!(pure_saddle(&a).is_none());
            let lp = solve_zero_sum(&a).unwrap();
            let cf = solve_2x2_closed_form(&a).unwrap();
            prop_assert!((lp.value - cf.value).abs() <= 1e-10);
            prop_assert!(close(&lp.row_strategy, &cf.row_strategy, 1e-8));
            prop_assert!(close(&lp.col_strategy, &cf.col_strategy, 1e-8));
        }
    }
}
