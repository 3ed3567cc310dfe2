//! Tolerances and iteration limits, collected in one record.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Minimal eigenvalue accepted for a reference metric.
    pub eps_pd: f64,
    /// Slack below which a grid function is no longer accepted as θ-psh.
    pub tol_psh: f64,
    /// Threshold used by the bigness certificate.
    pub tol_big: f64,
    /// Entrywise tolerance when comparing constant parts of closed forms.
    pub tol_class: f64,
    /// Relative part of the mass-comparison tolerance `tol_mono`.
    pub tol_mono_rel: f64,
    /// Sweep update norm at which an envelope is declared converged.
    pub envelope_update: f64,
    pub envelope_max_sweeps: usize,
    /// Relative part of the solver residual tolerance `tol_solve`.
    pub solve_rel: f64,
    pub solve_max_iter: usize,
    /// Continuation stops once successive constants agree to this relative level.
    pub continuation_c: f64,
    /// ... and successive normalized iterates agree to this sup-norm level.
    pub continuation_v: f64,
    pub continuation_max_steps: usize,
    /// Retries before a sampler gives up.
    pub sampler_retries: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            eps_pd: 1e-10,
            tol_psh: 1e-8,
            tol_big: 1e-9,
            tol_class: 1e-12,
            tol_mono_rel: 1e-8,
            envelope_update: 1e-10,
            envelope_max_sweeps: 2_000_000,
            solve_rel: 1e-8,
            solve_max_iter: 500,
            continuation_c: 1e-8,
            continuation_v: 1e-6,
            continuation_max_steps: 60,
            sampler_retries: 200,
        }
    }
}

impl Tolerances {
    /// `tol_mono = 1e-8 (1 + |lhs| + |rhs|)`.
    pub fn tol_mono(&self, lhs: f64, rhs: f64) -> f64 {
        self.tol_mono_rel * (1.0 + lhs.abs() + rhs.abs())
    }
}
