//! Ascent on the Stiefel manifold `{U : UᵀU = I}` with the Cayley transform.
//!
//! For a gradient `G = ∇F(U)` the generator is `A = U Gᵀ − G Uᵀ`, which is
//! skew-symmetric, so `Q = (I + τA/2)⁻¹(I − τA/2)` is orthogonal and
//! `U⁺ = Q U` stays on the manifold. To first order `U⁺ ≈ U + τ(G − U GᵀU)`,
//! an ascent direction for `F`.
//!
//! [`cayley_step`] solves the `N×N` system directly and serves as the
//! reference; [`cayley_step_smw`] uses the rank-`2c` factorization
//! `A = [U, −G]·[G, U]ᵀ` and the Sherman–Morrison–Woodbury identity so only a
//! `2c×2c` system is solved:
//!
//! ```text
//! U⁺ = U − τ P (I + τ/2 QᵀP)⁻¹ QᵀU,   P = [U, −G],  Q = [G, U]
//! ```

use ndarray::{concatenate, Array2, ArrayView2, Axis};

use crate::error::{KnetError, Result};
use crate::linalg::{self, orthonormality_error};

/// Orthonormality drift above which an accepted step is re-orthonormalized.
pub const RECOVERY_THRESHOLD: f64 = 1e-8;
/// Maximum number of step halvings before a point is declared stationary.
pub const MAX_HALVINGS: usize = 30;

pub const INITIAL_TAU: f64 = 0.5;
pub const MAX_TAU: f64 = 1.0;

fn check_shapes(l: ArrayView2<'_, f64>, u: ArrayView2<'_, f64>) -> Result<()> {
    if l.nrows() != l.ncols() || l.nrows() != u.nrows() {
        return Err(KnetError::Shape(format!(
            "operator {:?} incompatible with point {:?}",
            l.dim(),
            u.dim()
        )));
    }
    Ok(())
}

/// `tr(Uᵀ L U)`.
pub fn trace_objective(l: ArrayView2<'_, f64>, u: ArrayView2<'_, f64>) -> Result<f64> {
    check_shapes(l, u)?;
    Ok((&u * &l.dot(&u)).sum())
}

/// Euclidean gradient of [`trace_objective`] for symmetric `L`: `2 L U`.
pub fn gradient_u(l: ArrayView2<'_, f64>, u: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    check_shapes(l, u)?;
    Ok(l.dot(&u) * 2.0)
}

/// Cayley generator `A = U Gᵀ − G Uᵀ` (skew-symmetric).
pub fn skew_a(grad: ArrayView2<'_, f64>, u: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if grad.dim() != u.dim() {
        return Err(KnetError::Shape(format!(
            "gradient {:?} vs point {:?}",
            grad.dim(),
            u.dim()
        )));
    }
    Ok(u.dot(&grad.t()) - grad.dot(&u.t()))
}

/// `U⁺ = (I + τA/2)⁻¹ (I − τA/2) U`, solving the full `N×N` system.
pub fn cayley_step(u: ArrayView2<'_, f64>, a: ArrayView2<'_, f64>, tau: f64) -> Result<Array2<f64>> {
    let n = u.nrows();
    if a.dim() != (n, n) {
        return Err(KnetError::Shape(format!(
            "generator {:?} vs point {:?}",
            a.dim(),
            u.dim()
        )));
    }
    let half = 0.5 * tau;
    let eye = Array2::<f64>::eye(n);
    let lhs = &eye + &(&a * half);
    let rhs = u.to_owned() - a.dot(&u) * half;
    linalg::solve(lhs.view(), rhs.view())
}

/// Same update as [`cayley_step`] with `A = skew_a(grad, u)`, through a
/// `2c×2c` solve. Never forms an `N×N` matrix.
pub fn cayley_step_smw(u: ArrayView2<'_, f64>, grad: ArrayView2<'_, f64>, tau: f64) -> Result<Array2<f64>> {
    if grad.dim() != u.dim() {
        return Err(KnetError::Shape(format!(
            "gradient {:?} vs point {:?}",
            grad.dim(),
            u.dim()
        )));
    }
    let c = u.ncols();
    let neg_grad = grad.mapv(|v| -v);
    let p = concatenate(Axis(1), &[u, neg_grad.view()]).expect("same row count");
    let q = concatenate(Axis(1), &[grad, u]).expect("same row count");
    let mut core = q.t().dot(&p) * (0.5 * tau);
    for i in 0..2 * c {
        core[[i, i]] += 1.0;
    }
    let qtu = q.t().dot(&u);
    let w = linalg::solve(core.view(), qtu.view())?;
    Ok(u.to_owned() - p.dot(&w) * tau)
}

/// Outcome of one line-searched Cayley step.
#[derive(Debug, Clone)]
pub struct AscentState {
    pub u: Array2<f64>,
    /// Step length that was accepted (or the last one tried at a stationary point).
    pub tau: f64,
    pub objective: f64,
    /// `false` when no step length improved the objective and `u` is the input.
    pub moved: bool,
    pub halvings: usize,
    /// The accepted point had drifted off the manifold and was re-orthonormalized.
    pub recovered: bool,
}

/// One monotone Cayley step on `tr(UᵀLU)` starting at step length `tau0`,
/// halving up to [`MAX_HALVINGS`] times.
pub fn line_search_ascend(l: ArrayView2<'_, f64>, u: ArrayView2<'_, f64>, tau0: f64) -> Result<AscentState> {
    if !(tau0 > 0.0) {
        return Err(KnetError::InvalidParameter(format!(
            "initial step length must be positive, got {tau0}"
        )));
    }
    let f0 = trace_objective(l, u)?;
    let grad = gradient_u(l, u)?;

    let stationary = |tau: f64, halvings: usize| AscentState {
        u: u.to_owned(),
        tau,
        objective: f0,
        moved: false,
        halvings,
        recovered: false,
    };

    // Riemannian gradient (I - UUᵀ)G; zero means nothing to gain.
    let tangent = &grad - &u.dot(&u.t().dot(&grad));
    let scale = grad.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
    if linalg::max_abs(tangent.view()) <= 1e-14 * scale {
        return Ok(stationary(tau0, 0));
    }

    let mut tau = tau0;
    for halvings in 0..=MAX_HALVINGS {
        match cayley_step_smw(u, grad.view(), tau) {
            Ok(mut next) => {
                let mut recovered = false;
                if orthonormality_error(next.view()) > RECOVERY_THRESHOLD {
                    log::warn!("cayley step drifted off the manifold; re-orthonormalizing");
                    next = linalg::thin_q(next.view());
                    recovered = true;
                }
                let f = trace_objective(l, next.view())?;
                if f > f0 {
                    return Ok(AscentState {
                        u: next,
                        tau,
                        objective: f,
                        moved: true,
                        halvings,
                        recovered,
                    });
                }
            }
            Err(KnetError::StepFailure(_)) => {}
            Err(e) => return Err(e),
        }
        tau *= 0.5;
    }
    Ok(stationary(tau, MAX_HALVINGS))
}

/// Step-length controller carried across calls: starts at [`INITIAL_TAU`],
/// halves inside the line search, doubles (capped at [`MAX_TAU`]) after two
/// consecutive first-try acceptances.
#[derive(Debug, Clone)]
pub struct StiefelAscent {
    tau: f64,
    first_try_streak: usize,
}

impl Default for StiefelAscent {
    fn default() -> Self {
        StiefelAscent {
            tau: INITIAL_TAU,
            first_try_streak: 0,
        }
    }
}

impl StiefelAscent {
    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn step(&mut self, l: ArrayView2<'_, f64>, u: ArrayView2<'_, f64>) -> Result<AscentState> {
        let state = line_search_ascend(l, u, self.tau)?;
        if state.moved {
            if state.halvings == 0 {
                self.first_try_streak += 1;
                if self.first_try_streak >= 2 {
                    self.tau = (self.tau * 2.0).min(MAX_TAU);
                    self.first_try_streak = 0;
                }
            } else {
                self.tau = state.tau;
                self.first_try_streak = 0;
            }
        }
        Ok(state)
    }

    /// Up to `max_steps` line-searched steps, stopping early once the per-step
    /// gain drops below `min_gain` or a stationary point is reached.
    pub fn ascend(
        &mut self,
        l: ArrayView2<'_, f64>,
        u: ArrayView2<'_, f64>,
        max_steps: usize,
        min_gain: f64,
    ) -> Result<AscentState> {
        let mut current = AscentState {
            u: u.to_owned(),
            tau: self.tau,
            objective: trace_objective(l, u)?,
            moved: false,
            halvings: 0,
            recovered: false,
        };
        for _ in 0..max_steps {
            let next = self.step(l, current.u.view())?;
            let gain = next.objective - current.objective;
            let moved = next.moved;
            let recovered = current.recovered || next.recovered;
            current = AscentState {
                moved: current.moved || moved,
                recovered,
                ..next
            };
            if !moved || gain < min_gain {
                break;
            }
        }
        Ok(current)
    }
}
