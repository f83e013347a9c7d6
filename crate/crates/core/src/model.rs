//! Linear-Gaussian state-space model `x_{k+1} = Φ_k x_k + u_k`, `z_k = H_k x_k + w_k`.

use crate::error::{Error, Result};
use crate::linalg::{Definiteness, Matrix, SpdMatrix};

/// A per-step quantity: one value for every step, or an explicit list indexed by step.
#[derive(Debug, Clone)]
pub enum Schedule<T> {
    Constant(T),
    PerStep(Vec<T>),
}

impl<T> Schedule<T> {
    pub fn at(&self, k: usize) -> Option<&T> {
        match self {
            Schedule::Constant(v) => Some(v),
            Schedule::PerStep(list) => list.get(k),
        }
    }

    /// Number of explicit entries, `None` for a constant schedule.
    pub fn explicit_len(&self) -> Option<usize> {
        match self {
            Schedule::Constant(_) => None,
            Schedule::PerStep(list) => Some(list.len()),
        }
    }

    pub fn iter(&self) -> Box<dyn Iterator<Item = &T> + '_> {
        match self {
            Schedule::Constant(v) => Box::new(std::iter::once(v)),
            Schedule::PerStep(list) => Box::new(list.iter()),
        }
    }

    fn require(&self, name: &'static str, needed: usize) -> Result<()> {
        match self.explicit_len() {
            Some(len) if len < needed => Err(Error::ScheduleTooShort { name, len, needed }),
            _ => Ok(()),
        }
    }
}

impl<T> From<T> for Schedule<T> {
    fn from(v: T) -> Self {
        Schedule::Constant(v)
    }
}

/// Transition, measurement and noise schedules of the process model.
///
/// `Q_k` may be semidefinite (deterministic dynamics); `R_k` must be strictly positive definite.
#[derive(Debug, Clone)]
pub struct StateSpaceModel {
    n: usize,
    m: usize,
    phi: Schedule<Matrix>,
    h: Schedule<Matrix>,
    q: Schedule<SpdMatrix>,
    r: Schedule<SpdMatrix>,
}

/// The four matrices in force at one step.
#[derive(Debug, Clone, Copy)]
pub struct StepModel<'a> {
    pub phi: &'a Matrix,
    pub h: &'a Matrix,
    pub q: &'a SpdMatrix,
    pub r: &'a SpdMatrix,
}

impl StateSpaceModel {
    pub fn new(
        phi: Schedule<Matrix>,
        h: Schedule<Matrix>,
        q: Schedule<SpdMatrix>,
        r: Schedule<SpdMatrix>,
    ) -> Result<Self> {
        let first = |name: &'static str, len: Option<usize>| -> Result<()> {
            if len == Some(0) {
                Err(Error::ScheduleTooShort { name, len: 0, needed: 1 })
            } else {
                Ok(())
            }
        };
        first("phi", phi.explicit_len())?;
        first("h", h.explicit_len())?;
        first("q", q.explicit_len())?;
        first("r", r.explicit_len())?;

        let n = phi.at(0).map(|m| m.nrows()).unwrap_or(0);
        let m = h.at(0).map(|m| m.nrows()).unwrap_or(0);
        if n == 0 || m == 0 {
            return Err(Error::mismatch("model dimensions", "n, m >= 1", format!("n={n}, m={m}")));
        }
        for (k, p) in phi.iter().enumerate() {
            if p.nrows() != n || p.ncols() != n {
                return Err(Error::mismatch(
                    format!("phi[{k}]"),
                    format!("{n}x{n}"),
                    format!("{}x{}", p.nrows(), p.ncols()),
                ));
            }
        }
        for (k, hk) in h.iter().enumerate() {
            if hk.nrows() != m || hk.ncols() != n {
                return Err(Error::mismatch(
                    format!("h[{k}]"),
                    format!("{m}x{n}"),
                    format!("{}x{}", hk.nrows(), hk.ncols()),
                ));
            }
        }
        for (k, qk) in q.iter().enumerate() {
            if qk.dim() != n {
                return Err(Error::mismatch(format!("q[{k}]"), n, qk.dim()));
            }
        }
        for (k, rk) in r.iter().enumerate() {
            if rk.dim() != m {
                return Err(Error::mismatch(format!("r[{k}]"), m, rk.dim()));
            }
            if rk.definiteness() != Definiteness::Positive {
                return Err(Error::NotPositiveDefinite { index: k, pivot: 0.0 });
            }
        }
        Ok(StateSpaceModel { n, m, phi, h, q, r })
    }

    /// Time-invariant model.
    pub fn constant(phi: Matrix, h: Matrix, q: SpdMatrix, r: SpdMatrix) -> Result<Self> {
        Self::new(phi.into(), h.into(), q.into(), r.into())
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn measurement_dim(&self) -> usize {
        self.m
    }

    pub fn phi(&self) -> &Schedule<Matrix> {
        &self.phi
    }

    pub fn h(&self) -> &Schedule<Matrix> {
        &self.h
    }

    pub fn q(&self) -> &Schedule<SpdMatrix> {
        &self.q
    }

    pub fn r(&self) -> &Schedule<SpdMatrix> {
        &self.r
    }

    /// Checks that every schedule covers steps `0..steps`.
    pub fn require_steps(&self, steps: usize) -> Result<()> {
        self.phi.require("phi", steps)?;
        self.h.require("h", steps)?;
        self.q.require("q", steps)?;
        self.r.require("r", steps)
    }

    pub fn step(&self, k: usize) -> Result<StepModel<'_>> {
        let missing = |name, s: Option<usize>| Error::ScheduleTooShort {
            name,
            len: s.unwrap_or(0),
            needed: k + 1,
        };
        Ok(StepModel {
            phi: self.phi.at(k).ok_or_else(|| missing("phi", self.phi.explicit_len()))?,
            h: self.h.at(k).ok_or_else(|| missing("h", self.h.explicit_len()))?,
            q: self.q.at(k).ok_or_else(|| missing("q", self.q.explicit_len()))?,
            r: self.r.at(k).ok_or_else(|| missing("r", self.r.explicit_len()))?,
        })
    }

    /// Same schedules with every `R_k` multiplied by `factor`.
    pub fn with_scaled_r(&self, factor: f64) -> Result<Self> {
        let scale = |r: &SpdMatrix| SpdMatrix::certify_computed(r.matrix() * factor, Definiteness::Positive);
        let r = match &self.r {
            Schedule::Constant(r) => Schedule::Constant(scale(r)?),
            Schedule::PerStep(list) => Schedule::PerStep(list.iter().map(scale).collect::<Result<_>>()?),
        };
        Ok(StateSpaceModel { r, ..self.clone() })
    }
}
