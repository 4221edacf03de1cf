//! Exact rational feasibility solver for small linear programs.
//!
//! Phase-1 simplex over BigRational with Bland's anti-cycling rule. The only
//! interface is a feasibility question for A x = b, x >= 0; infeasibility
//! comes with a Farkas vector y (y^T A <= 0, y^T b > 0) extracted from the
//! final simplex multipliers.

use crate::exact::Rational;
use num_traits::{One, Signed, Zero};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Feasibility {
    /// A solution x >= 0 with A x = b.
    Feasible(Vec<Rational>),
    /// A vector y with y^T A <= 0 componentwise and y^T b > 0.
    Infeasible(Vec<Rational>),
}

/// Decide whether {x >= 0 : A x = b} is nonempty, exactly.
pub(crate) fn solve_feasibility(a: &[Vec<Rational>], b: &[Rational]) -> Feasibility {
    let m = a.len();
    let n = if m == 0 { 0 } else { a[0].len() };
    if m == 0 {
        return Feasibility::Feasible(vec![]);
    }

    // normalize rows so the right-hand side is nonnegative, remembering signs
    let mut signs = vec![Rational::one(); m];
    let mut tab: Vec<Vec<Rational>> = Vec::with_capacity(m);
    let mut rhs: Vec<Rational> = Vec::with_capacity(m);
    for i in 0..m {
        let flip = b[i].is_negative();
        if flip {
            signs[i] = -Rational::one();
        }
        let row: Vec<Rational> = (0..n + m)
            .map(|j| {
                if j < n {
                    if flip {
                        -a[i][j].clone()
                    } else {
                        a[i][j].clone()
                    }
                } else if j - n == i {
                    Rational::one()
                } else {
                    Rational::zero()
                }
            })
            .collect();
        tab.push(row);
        rhs.push(if flip { -b[i].clone() } else { b[i].clone() });
    }

    // basis starts as the artificial columns n..n+m
    let mut basis: Vec<usize> = (n..n + m).collect();

    loop {
        // Bland: entering = lowest-index column with negative reduced cost
        // r_j = c_j - c_B^T (B^-1 A_j), with B^-1 A_j the current tableau
        // column and c_B one exactly on rows whose basic variable is
        // artificial
        let mut entering = None;
        for j in 0..n + m {
            if basis.contains(&j) {
                continue;
            }
            let cost = if j < n { Rational::zero() } else { Rational::one() };
            let mut dot = Rational::zero();
            for (r, &bv) in basis.iter().enumerate() {
                if bv >= n {
                    dot += &tab[r][j];
                }
            }
            if cost - dot < Rational::zero() {
                entering = Some(j);
                break;
            }
        }

        let Some(e) = entering else {
            // optimal: objective = c_B^T (B^-1 b) = artificial basic values
            let mut obj = Rational::zero();
            for (r, &bv) in basis.iter().enumerate() {
                if bv >= n {
                    obj += &rhs[r];
                }
            }
            if obj.is_zero() {
                let mut x = vec![Rational::zero(); n];
                for (r, &bv) in basis.iter().enumerate() {
                    if bv < n {
                        x[bv] = rhs[r].clone();
                    }
                }
                return Feasibility::Feasible(x);
            }
            // simplex multipliers y = c_B^T B^-1: the artificial block of the
            // tableau started as the identity, so its column i holds the i-th
            // column of B^-1
            let mut y = vec![Rational::zero(); m];
            for (i, yi) in y.iter_mut().enumerate() {
                for (r, &bv) in basis.iter().enumerate() {
                    if bv >= n {
                        *yi += &tab[r][n + i];
                    }
                }
            }
            // Farkas certificate in the original row orientation
            let cert: Vec<Rational> = (0..m).map(|i| &y[i] * &signs[i]).collect();
            return Feasibility::Infeasible(cert);
        };

        // ratio test, ties broken by lowest basis index (Bland)
        let mut leave: Option<usize> = None;
        let mut best: Option<Rational> = None;
        for r in 0..m {
            if tab[r][e] > Rational::zero() {
                let ratio = &rhs[r] / &tab[r][e];
                let better = match &best {
                    None => true,
                    Some(b) => {
                        ratio < *b || (ratio == *b && basis[r] < basis[leave.unwrap()])
                    }
                };
                if better {
                    best = Some(ratio);
                    leave = Some(r);
                }
            }
        }
        let Some(l) = leave else {
            // a minimization of nonnegative artificials cannot be unbounded
            unreachable!("phase-1 objective is bounded below");
        };

        // pivot on (l, e)
        let piv = tab[l][e].clone();
        for j in 0..n + m {
            tab[l][j] /= &piv;
        }
        rhs[l] /= &piv;
        for r in 0..m {
            if r == l || tab[r][e].is_zero() {
                continue;
            }
            let f = tab[r][e].clone();
            for j in 0..n + m {
                let d = &f * &tab[l][j];
                tab[r][j] -= d;
            }
            let d = &f * &rhs[l];
            rhs[r] -= d;
        }
        basis[l] = e;
    }
}
