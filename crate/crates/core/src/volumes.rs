//! Volumes of classes and currents.
//!
//! Volumes are normalized so that a constant closed form `A` on the unit torus
//! has volume `det A`; the Monge–Ampère mass carries an extra factor `d!`.

use serde::Serialize;

use crate::config::Tolerances;
use crate::envelope::{envelope, v_theta, EnvelopeStatus};
use crate::error::{Error, Result};
use crate::geometry::{BackgroundForm, ReferenceMetric};
use crate::ma::ma;
use crate::qpsh::{is_theta_psh, QPshFunction};
use crate::sampling::ConvexSampler;
use crate::scalar::{factorial, Scalar};

fn volume_of_mass<T: Scalar>(form: &BackgroundForm<T>, mass: T) -> T {
    mass / T::of(factorial(form.grid().dim()) as f64)
}

/// `vol(θ) = ∫ MA(V_θ) / d!`, together with `V_θ`.
pub fn vol_big_with_potential<T: Scalar>(
    form: &BackgroundForm<T>,
    tol: &Tolerances,
) -> Result<(T, QPshFunction<T>)> {
    let r = v_theta(form, tol)?;
    match r.status {
        EnvelopeStatus::Converged => {
            let mass = ma(form, &r.env)?.total_mass();
            Ok((volume_of_mass(form, mass), r.env))
        }
        EnvelopeStatus::Infeasible => Err(Error::Infeasible(
            "no θ-psh function lies below 0".into(),
        )),
        EnvelopeStatus::Unbounded => unreachable!("finite obstacle"),
        EnvelopeStatus::MaxSweeps => Err(Error::NonConvergence {
            iterations: r.sweeps,
            residual: r.final_update.as_f64(),
        }),
    }
}

pub fn vol_big<T: Scalar>(form: &BackgroundForm<T>, tol: &Tolerances) -> Result<T> {
    vol_big_with_potential(form, tol).map(|(v, _)| v)
}

/// Heuristic inner and outer volume estimates of the current `θ + dd^c φ`,
/// from masses of bounded θ-psh perturbations `φ + b`, `|b| <= bound`.
pub fn current_volume_bounds<T: Scalar>(
    form: &BackgroundForm<T>,
    phi: &QPshFunction<T>,
    perturbations: usize,
    bound: T,
    seed: u64,
    tol: &Tolerances,
) -> Result<(T, T)> {
    if perturbations == 0 {
        return Err(Error::InvalidArgument("perturbations must be >= 1".into()));
    }
    if !(bound > T::zero()) {
        return Err(Error::InvalidArgument("bound must be positive".into()));
    }
    if phi.grid() != form.grid() {
        return Err(Error::DimensionMismatch("potential and form on different grids".into()));
    }
    let grid = form.grid();
    let base = volume_of_mass(form, ma(form, phi)?.total_mass());
    let (mut lo, mut hi) = (base, base);
    let mut sampler = ConvexSampler::new(seed);
    let retries = tol.sampler_retries.max(1);
    for _ in 0..perturbations {
        let mut accepted = None;
        for _ in 0..retries {
            let p = sampler.direction::<T>(grid);
            let sup = p.iter().fold(T::zero(), |m, x| m.max(x.abs()));
            let scale = bound * T::of(rand::Rng::random_range(sampler.rng(), 0.0..1.0)) / sup;
            let cand: Vec<T> = phi
                .values()
                .iter()
                .zip(&p)
                .map(|(&a, &b)| a + b * scale)
                .collect();
            let cand = QPshFunction::new(grid, cand)?;
            if is_theta_psh(&cand, form, tol.tol_psh)? {
                accepted = Some(cand);
                break;
            }
            let proj = envelope(form, cand.values(), tol)?;
            if proj.is_converged()
                && proj.env.sup_distance(phi) <= bound
                && is_theta_psh(&proj.env, form, tol.tol_psh)?
            {
                accepted = Some(proj.env);
                break;
            }
        }
        let w = accepted.ok_or(Error::SamplingExhausted(retries))?;
        let v = volume_of_mass(form, ma(form, &w)?.total_mass());
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok((lo.max(T::zero()), hi.max(T::zero())))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum VolumeStatus {
    /// The class itself carries a θ-psh function; `vol_big` is computed directly.
    Psef,
    /// Only the perturbed classes are feasible; `vol_big` is an extrapolated limit.
    Limit,
    NotPsef,
}

#[derive(Clone, Debug, Serialize)]
pub struct VolumeReport<T> {
    pub vol_big: T,
    pub lower_est: T,
    pub upper_est: T,
    /// `(eps, vol(θ + eps W))`; `None` where the perturbed class is infeasible.
    pub eps_trace: Vec<(T, Option<T>)>,
    pub status: VolumeStatus,
}

/// Volume of an arbitrary class as the limit of `vol(θ + eps W)`, `eps ↓ 0`;
/// zero when no perturbation in `eps_list` is feasible.
pub fn vol_class<T: Scalar>(
    form: &BackgroundForm<T>,
    metric: &ReferenceMetric<T>,
    eps_list: &[T],
    tol: &Tolerances,
) -> Result<VolumeReport<T>> {
    if eps_list.is_empty()
        || eps_list.iter().any(|&e| !(e > T::zero()))
        || eps_list.windows(2).any(|w| !(w[1] < w[0]))
    {
        return Err(Error::InvalidArgument(
            "eps_list must be positive and strictly decreasing".into(),
        ));
    }
    let mut trace = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let shifted = form.plus_metric(eps, metric)?;
        let v = match vol_big(&shifted, tol) {
            Ok(v) => Some(v),
            Err(Error::Infeasible(_)) => None,
            Err(e) => return Err(e),
        };
        trace.push((eps, v));
    }
    let feasible: Vec<(T, T)> = trace
        .iter()
        .filter_map(|&(e, v)| v.map(|v| (e, v)))
        .collect();
    let Some(&(e1, v1)) = feasible.last() else {
        return Ok(VolumeReport {
            vol_big: T::zero(),
            lower_est: T::zero(),
            upper_est: T::zero(),
            eps_trace: trace,
            status: VolumeStatus::NotPsef,
        });
    };
    let extrapolated = match feasible.len() {
        1 => v1,
        k => {
            let (e2, v2) = feasible[k - 2];
            (v1 - (v2 - v1) * e1 / (e2 - e1)).max(T::zero()).min(v1)
        }
    };
    let (vol, status) = match vol_big(form, tol) {
        Ok(v) => (v.max(T::zero()), VolumeStatus::Psef),
        Err(Error::Infeasible(_)) => (extrapolated, VolumeStatus::Limit),
        Err(e) => return Err(e),
    };
    let upper = v1.max(vol);
    Ok(VolumeReport {
        vol_big: vol,
        lower_est: vol.min(extrapolated).min(upper),
        upper_est: upper,
        eps_trace: trace,
        status,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VolumeComparison<T> {
    pub holds: bool,
    pub lhs: T,
    pub rhs: T,
}

/// `vol(tθ) = t^d vol(θ)`, with `V_{tθ}` recomputed.
pub fn scaling_check<T: Scalar>(
    form: &BackgroundForm<T>,
    t: T,
    tol: &Tolerances,
) -> Result<VolumeComparison<T>> {
    if !(t > T::zero()) {
        return Err(Error::InvalidArgument("scaling factor must be positive".into()));
    }
    let lhs = vol_big(&form.scaled(t), tol)?;
    let rhs = t.powi(form.grid().dim() as i32) * vol_big(form, tol)?;
    Ok(VolumeComparison {
        holds: (lhs - rhs).abs().as_f64() <= tol.tol_mono(lhs.as_f64(), rhs.as_f64()),
        lhs,
        rhs,
    })
}

/// `G₁ <= G₂ ⇒ vol(θ₁) <= vol(θ₂)`.
pub fn monotonicity_check<T: Scalar>(
    f1: &BackgroundForm<T>,
    f2: &BackgroundForm<T>,
    tol: &Tolerances,
) -> Result<VolumeComparison<T>> {
    if !f1.loewner_le(f2, T::of(tol.tol_psh)) {
        return Err(Error::Precondition("forms are not Loewner ordered".into()));
    }
    let lhs = vol_big(f1, tol)?;
    let rhs = vol_big(f2, tol)?;
    Ok(VolumeComparison {
        holds: lhs.as_f64() <= rhs.as_f64() + tol.tol_mono(lhs.as_f64(), rhs.as_f64()),
        lhs,
        rhs,
    })
}
