//! One-shot predictor recursion from the orthogonal-projection derivation.
//!
//! ```text
//! x̂_{k+1|k} = Φ_k x̂_{k|k−1} + Φ_k P_k H_kᵀ [H_k P_k H_kᵀ + R_k]⁻¹ (z_k − H_k x̂_{k|k−1})
//! P_{k+1}   = Φ_k P_k { I − H_kᵀ [H_k P_k H_kᵀ + R_k]⁻¹ H_k P_k } Φ_kᵀ + Q_k
//! ```
//!
//! The bracketed inverse is one factorization shared by both lines. The
//! intermediate posterior `x̂_{k|k}`, `P_{k|k}` falls out of the same products
//! and is kept on the trace.

use crate::bayes::{log_gaussian_density, GaussianBelief};
use crate::error::{Error, Result};
use crate::linalg::{Definiteness, Matrix, SpdMatrix, Vector};
use crate::model::{StateSpaceModel, StepModel};
use crate::trace::{FilterStep, FilterTrace};

#[derive(Debug, Clone)]
pub struct ProjectionFilterState {
    pub k: usize,
    /// `x̂_{k|k−1}`
    pub x_pred: Vector,
    /// `P_k = P_{k|k−1}`
    pub p_pred: SpdMatrix,
}

impl ProjectionFilterState {
    pub fn initial(x0: Vector, p0: SpdMatrix) -> Result<Self> {
        if p0.dim() != x0.len() {
            return Err(Error::mismatch("initial covariance", x0.len(), p0.dim()));
        }
        Ok(ProjectionFilterState {
            k: 0,
            x_pred: x0,
            p_pred: p0,
        })
    }
}

/// Result of one recursion step together with the by-products recorded on a trace.
#[derive(Debug, Clone)]
pub struct ProjectionStep {
    pub next: ProjectionFilterState,
    pub record: FilterStep,
}

pub fn projection_step(s: &ProjectionFilterState, model_k: StepModel<'_>, z_k: &Vector) -> Result<ProjectionFilterState> {
    projection_step_detailed(s, model_k, z_k).map(|st| st.next)
}

pub fn projection_step_detailed(
    s: &ProjectionFilterState,
    model_k: StepModel<'_>,
    z_k: &Vector,
) -> Result<ProjectionStep> {
    let StepModel { phi, h, q, r } = model_k;
    let n = s.x_pred.len();
    let m = r.dim();
    if s.p_pred.dim() != n || phi.nrows() != n || phi.ncols() != n || q.dim() != n {
        return Err(Error::mismatch("projection step state", n, s.p_pred.dim()));
    }
    if h.nrows() != m || h.ncols() != n || z_k.len() != m {
        return Err(Error::mismatch(
            "projection step measurement",
            format!("H {m}x{n}, z {m}"),
            format!("H {}x{}, z {}", h.nrows(), h.ncols(), z_k.len()),
        ));
    }

    let p = s.p_pred.matrix();
    let ht = h.transpose();
    let p_ht = p * &ht;
    let bracket = SpdMatrix::certify_computed(h * &p_ht + r.matrix(), Definiteness::Positive)?;
    let innovation = z_k - h * &s.x_pred;

    let weighted_innovation = bracket.solve_vec(&innovation)?;
    let bracket_h_p = bracket.solve(&(h * p))?;

    let correction = &p_ht * &weighted_innovation;
    let x_next = phi * &s.x_pred + phi * &correction;
    let reduction = Matrix::identity(n, n) - &ht * &bracket_h_p;
    let p_next = phi * p * &reduction * phi.transpose() + q.matrix();

    let x_post = &s.x_pred + &correction;
    let p_post = p * &reduction;
    let gain = bracket_h_p.transpose();
    let log_predictive = log_gaussian_density(&innovation, &Vector::zeros(m), &bracket)?;

    let next = ProjectionFilterState {
        k: s.k + 1,
        x_pred: x_next,
        p_pred: SpdMatrix::certify_computed(p_next, Definiteness::SemiDefinite)?,
    };
    let record = FilterStep {
        k: s.k,
        prior: GaussianBelief {
            mean: s.x_pred.clone(),
            cov: s.p_pred.clone(),
        },
        posterior: GaussianBelief {
            mean: x_post,
            cov: SpdMatrix::certify_computed(p_post, Definiteness::SemiDefinite)?,
        },
        innovation,
        innovation_cov: bracket,
        gain,
        log_predictive,
    };
    Ok(ProjectionStep { next, record })
}

pub fn projection_filter_run(
    model: &StateSpaceModel,
    z: &[Vector],
    x0: &Vector,
    p0: &SpdMatrix,
) -> Result<FilterTrace> {
    if z.is_empty() {
        return Err(Error::EmptyMeasurementSequence);
    }
    if x0.len() != model.state_dim() {
        return Err(Error::mismatch("initial state", model.state_dim(), x0.len()));
    }
    model.require_steps(z.len())?;
    let mut state = ProjectionFilterState::initial(x0.clone(), p0.clone())?;
    let mut steps = Vec::with_capacity(z.len());
    for (k, zk) in z.iter().enumerate() {
        let st = model
            .step(k)
            .and_then(|sm| projection_step_detailed(&state, sm, zk))
            .map_err(|e| e.at_step(k))?;
        steps.push(st.record);
        state = st.next;
    }
    Ok(FilterTrace {
        steps,
        final_prediction: GaussianBelief {
            mean: state.x_pred,
            cov: state.p_pred,
        },
    })
}
