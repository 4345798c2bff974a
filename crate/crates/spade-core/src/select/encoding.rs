//! Reference semantics for the integer program the solvers implement.
//!
//! Every auxiliary variable is a function of the selection vector x, which
//! is what licenses solving by searching over x alone. [`IlpEncoding`]
//! materializes those functions so tests can verify any solver answer
//! against the raw constraint semantics.

use alloc::vec;
use alloc::vec::Vec;

use crate::example::Label;
use crate::matrix::ResultMatrix;
use crate::subsume::SubsumptionMatrix;

use super::{ceil_eps, check_alignment, check_dimensions, check_threshold, floor_eps, SelectError};

/// The selection problem's constants: result matrix M, labels y, optional
/// subsumption matrix K, and the thresholds with denominators cleared to
/// integer right-hand sides.
pub struct IlpEncoding<'a> {
    matrix: &'a ResultMatrix,
    labels: &'a [Label],
    k: Option<&'a SubsumptionMatrix>,
    pub alpha: f64,
    pub tau: f64,
    /// Coverage constraint RHS: flagged bad examples required.
    pub need_cov: u64,
    /// FFR constraint RHS: flagged good examples allowed.
    pub allow_ffr: u64,
}

/// A full variable assignment derived from one selection vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IlpPoint {
    /// `w[i][j] = (1 − M[i][j]) · x[j]`: selected assertion j flags example i.
    pub w: Vec<Vec<u8>>,
    /// `u[i]`: bad example i is flagged by some selected assertion
    /// (0 on good rows).
    pub u: Vec<u8>,
    /// `z[i]`: good example i is flagged by some selected assertion
    /// (0 on bad rows).
    pub z: Vec<u8>,
    /// `r[j]`: some selected i ≠ j subsumes j (all zeros without K).
    pub r: Vec<u8>,
    /// `s[j] = (1 − x[j]) · (1 − r[j])`: neither selected nor subsumed.
    pub s: Vec<u8>,
    pub coverage_count: u64,
    pub false_failure_count: u64,
    pub feasible: bool,
    /// Σ x — the cardinality objective.
    pub objective_cov: u64,
    /// Σ x + Σ s — the subsumption objective.
    pub objective_sub: u64,
}

impl<'a> IlpEncoding<'a> {
    pub fn new(
        matrix: &'a ResultMatrix,
        labels: &'a [Label],
        k: Option<&'a SubsumptionMatrix>,
        alpha: f64,
        tau: f64,
    ) -> Result<Self, SelectError> {
        check_dimensions(matrix, labels)?;
        check_threshold("alpha", alpha)?;
        check_threshold("tau", tau)?;
        if let Some(k) = k {
            check_alignment(matrix, k)?;
        }
        let n_bad = labels.iter().filter(|l| l.is_bad()).count();
        let n_good = labels.len() - n_bad;
        Ok(IlpEncoding {
            matrix,
            labels,
            k,
            alpha,
            tau,
            need_cov: ceil_eps(alpha * n_bad as f64),
            allow_ffr: floor_eps(tau * n_good as f64),
        })
    }

    /// Derives every auxiliary variable from the selection vector `x`
    /// (one entry per assertion column).
    pub fn evaluate(&self, x: &[bool]) -> IlpPoint {
        let n = self.matrix.n_examples();
        let m = self.matrix.n_assertions();
        assert_eq!(x.len(), m, "one decision per assertion");

        let mut w = vec![vec![0u8; m]; n];
        let mut u = vec![0u8; n];
        let mut z = vec![0u8; n];
        for i in 0..n {
            for j in 0..m {
                if x[j] && !self.matrix.passes(i, j) {
                    w[i][j] = 1;
                }
            }
            let flagged = w[i].iter().any(|&v| v == 1);
            match self.labels[i] {
                Label::Bad => u[i] = u8::from(flagged),
                Label::Good => z[i] = u8::from(flagged),
            }
            debug_assert!(u[i] as u32 <= w[i].iter().map(|&v| v as u32).sum::<u32>());
        }

        let mut r = vec![0u8; m];
        if let Some(k) = self.k {
            for j in 0..m {
                let subsumed = (0..m).any(|i| i != j && x[i] && k.subsumes(i, j));
                r[j] = u8::from(subsumed);
            }
        }
        let s: Vec<u8> = (0..m)
            .map(|j| u8::from(!x[j] && r[j] == 0))
            .collect();

        let coverage_count = u.iter().map(|&v| v as u64).sum();
        let false_failure_count = z.iter().map(|&v| v as u64).sum();
        let objective_cov = x.iter().filter(|&&v| v).count() as u64;
        let objective_sub = objective_cov + s.iter().map(|&v| v as u64).sum::<u64>();
        IlpPoint {
            feasible: coverage_count >= self.need_cov && false_failure_count <= self.allow_ffr,
            w,
            u,
            z,
            r,
            s,
            coverage_count,
            false_failure_count,
            objective_cov,
            objective_sub,
        }
    }
}
