//! The simplified Gilbert iteration.
//!
//! Each trial draws a random pure product state ρ₂, keeps it only when the
//! linear functional Tr[(ρ₂ - ρ₁)(ρ₀ - ρ₁)] is positive, optionally twirls
//! it over a symmetry group, and moves ρ₁ to the point of the segment
//! [ρ₁, ρ₂] closest to ρ₀. The distance D² = Tr(ρ₀ - ρ₁)² therefore
//! decreases strictly with every accepted correction and is an upper bound
//! on the squared distance to the separable set.
//!
//! The loop keeps Δ = ρ₀ - ρ₁ and three scalars in sync with ρ₁ so that a
//! trial costs two quadratic forms:
//!
//! * `d2 = Tr[Δ²]`
//! * `overlap = Tr[ρ₁ Δ]`
//! * `purity = Tr[ρ₁²]`
//!
//! With `B = ρ₂ - ρ₁`, the functional is `g = Tr[ρ₂ Δ] - overlap` and
//! `h = Tr[B²] = Tr[ρ₂²] - 2 Tr[ρ₂ ρ₁] + purity`. Moving a fraction
//! `q = 1 - p` towards ρ₂ gives `d2(q) = d2 - 2 q g + q² h`, minimized at
//! `q = g / h` with `d2 - g² / h`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    hs_inner_unchecked, hsd_sq, outer, quadratic_form, ComplexMatrix, ComplexVector, DensityMatrix,
};
use crate::states::{Sampler, SamplerConfig};
use crate::symmetry::SymmetryGroup;

/// Accepted corrections between full recomputations of the cached scalars.
pub const REFRESH_INTERVAL: u64 = 1024;
/// Below this `Tr[(ρ₁ - ρ₂)²]` the search direction is considered degenerate.
pub const DEGENERATE_TOL: f64 = 1e-14;

/// Stopping rules. The run halts as soon as any configured rule fires.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct HaltCriteria {
    /// Stop after this many accepted corrections (c_s).
    pub max_successes: Option<u64>,
    /// Stop after this many trial states (c_t).
    pub max_trials: Option<u64>,
    /// Stop once D² drops to this value.
    pub target_d2: Option<f64>,
    /// Stop after this many consecutive trials without a correction.
    pub stall_trials: Option<u64>,
}

impl HaltCriteria {
    pub fn successes(n: u64) -> Self {
        Self {
            max_successes: Some(n),
            ..Self::default()
        }
    }

    pub fn trials(n: u64) -> Self {
        Self {
            max_trials: Some(n),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_successes.is_none()
            && self.max_trials.is_none()
            && self.target_d2.is_none()
            && self.stall_trials.is_none()
        {
            return Err(Error::Parameter("no halt criterion set".into()));
        }
        if let Some(t) = self.target_d2 {
            if !t.is_finite() {
                return Err(Error::Parameter(format!("target D² {t} is not finite")));
            }
        }
        Ok(())
    }

    fn fired(&self, state: &RunState) -> bool {
        self.max_successes.is_some_and(|n| state.successes >= n)
            || self.max_trials.is_some_and(|n| state.trials >= n)
            || self.target_d2.is_some_and(|t| state.d2 <= t)
            || self
                .stall_trials
                .is_some_and(|n| state.trials - state.last_success_trial >= n)
    }

    /// Trials still allowed by `max_trials`.
    fn remaining_trials(&self, state: &RunState) -> u64 {
        self.max_trials
            .map_or(u64::MAX, |n| n.saturating_sub(state.trials))
    }
}

/// One accepted correction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub c_t: u64,
    pub c_s: u64,
    pub d2: f64,
}

/// Append-only log of accepted corrections.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    records: Vec<TraceRecord>,
}

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a trace from records, checking that the counters increase and
    /// that D² decreases strictly.
    pub fn from_records(records: Vec<TraceRecord>) -> Result<Self> {
        for w in records.windows(2) {
            if w[1].c_t <= w[0].c_t || w[1].c_s <= w[0].c_s {
                return Err(Error::Validation(
                    "trace counters must increase strictly".into(),
                ));
            }
            if !(w[1].d2 < w[0].d2) {
                return Err(Error::Validation("trace D² must decrease strictly".into()));
            }
        }
        Ok(Self { records })
    }

    pub fn push(&mut self, record: TraceRecord) {
        self.records.push(record);
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }
}

/// Why a trial produced no correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rejection {
    PreselectFailed,
    POutOfRange,
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome {
    Accepted(TraceRecord),
    Rejected(Rejection),
}

/// Preselection functional Tr[(ρ₂ - ρ₁)(ρ₀ - ρ₁)]. A positive value means
/// admixing ρ₂ strictly decreases the distance.
pub fn preselect(rho0: &DensityMatrix, rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<f64> {
    same_dims(rho0, rho1)?;
    same_dims(rho0, rho2)?;
    let diff = rho0.matrix() - rho1.matrix();
    Ok(hs_inner_unchecked(&(rho2.matrix() - rho1.matrix()), &diff))
}

fn same_dims(a: &DensityMatrix, b: &DensityMatrix) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::Dimension(format!(
            "dims differ: {:?} vs {:?}",
            a.dims(),
            b.dims()
        )));
    }
    Ok(())
}

/// Minimizer of Tr(ρ₀ - p ρ₁ - (1 - p) ρ₂)² clamped to [0, 1], with the
/// distance reached there.
///
/// Returns `(p, new_d2)`. The unclamped minimizer is
/// `Tr[(ρ₀ - ρ₂)(ρ₁ - ρ₂)] / Tr[(ρ₁ - ρ₂)²]`.
pub fn optimal_p(
    rho0: &DensityMatrix,
    rho1: &DensityMatrix,
    rho2: &DensityMatrix,
) -> Result<(f64, f64)> {
    let (p, _, new_d2) = line_search(rho0, rho1, rho2)?;
    Ok((p, new_d2))
}

/// Like [`optimal_p`], also returning the unclamped minimizer.
pub fn line_search(
    rho0: &DensityMatrix,
    rho1: &DensityMatrix,
    rho2: &DensityMatrix,
) -> Result<(f64, f64, f64)> {
    same_dims(rho0, rho1)?;
    same_dims(rho0, rho2)?;
    let a = rho0.matrix() - rho2.matrix();
    let b = rho1.matrix() - rho2.matrix();
    let bb = hs_inner_unchecked(&b, &b);
    if bb <= DEGENERATE_TOL {
        return Err(Error::Degenerate("ρ₁ and ρ₂ coincide".into()));
    }
    let ab = hs_inner_unchecked(&a, &b);
    let aa = hs_inner_unchecked(&a, &a);
    let unclamped = ab / bb;
    let p = unclamped.clamp(0.0, 1.0);
    // aa - 2 p ab + p² bb, expanded around the clamped point
    let new_d2 = (aa - 2.0 * p * ab + p * p * bb).max(0.0);
    Ok((p, unclamped, new_d2))
}

/// A candidate correction direction.
enum Trial {
    Pure(ComplexVector),
    Mixed(ComplexMatrix),
}

/// Inner products of a trial with the current iterate.
struct TrialOverlaps {
    /// Tr[ρ₂ Δ]
    with_delta: f64,
    /// Tr[ρ₂ ρ₁]
    with_rho1: f64,
    /// Tr[ρ₂²]
    purity: f64,
}

impl Trial {
    fn overlaps(&self, delta: &ComplexMatrix, rho1: &ComplexMatrix) -> TrialOverlaps {
        match self {
            Trial::Pure(v) => TrialOverlaps {
                with_delta: quadratic_form(delta, v),
                with_rho1: quadratic_form(rho1, v),
                purity: 1.0,
            },
            Trial::Mixed(m) => TrialOverlaps {
                with_delta: hs_inner_unchecked(m, delta),
                with_rho1: hs_inner_unchecked(m, rho1),
                purity: hs_inner_unchecked(m, m),
            },
        }
    }

    fn preselect_value(&self, delta: &ComplexMatrix, overlap: f64) -> f64 {
        let with_delta = match self {
            Trial::Pure(v) => quadratic_form(delta, v),
            Trial::Mixed(m) => hs_inner_unchecked(m, delta),
        };
        with_delta - overlap
    }

    fn into_matrix(self) -> ComplexMatrix {
        match self {
            Trial::Pure(v) => outer(&v),
            Trial::Mixed(m) => m,
        }
    }
}

/// The evolving state of a run: target, current separable iterate, counters.
#[derive(Debug, Clone)]
pub struct RunState {
    rho0: DensityMatrix,
    rho1: ComplexMatrix,
    delta: ComplexMatrix,
    d2: f64,
    overlap: f64,
    purity: f64,
    trials: u64,
    successes: u64,
    last_success_trial: u64,
    group: Option<SymmetryGroup>,
    sampler: Sampler,
}

impl RunState {
    /// Prepares a run. `init_rho1` must be separable (this is the caller's
    /// claim and is not checked); it defaults to the maximally mixed state.
    /// With a symmetry group attached the initial iterate is twirled once.
    pub fn new(
        rho0: DensityMatrix,
        init_rho1: Option<DensityMatrix>,
        group: Option<SymmetryGroup>,
        cfg: SamplerConfig,
    ) -> Result<Self> {
        let rho1 = match init_rho1 {
            Some(r) => {
                same_dims(&rho0, &r)?;
                r
            }
            None => DensityMatrix::maximally_mixed(rho0.dims())?,
        };
        let rho1 = match &group {
            Some(g) => g.twirl(&rho1)?,
            None => rho1,
        };
        let mut state = Self {
            delta: rho0.matrix() - rho1.matrix(),
            rho1: rho1.into_matrix(),
            rho0,
            d2: 0.0,
            overlap: 0.0,
            purity: 0.0,
            trials: 0,
            successes: 0,
            last_success_trial: 0,
            group,
            sampler: Sampler::new(cfg),
        };
        state.refresh();
        Ok(state)
    }

    /// Recomputes Δ and the cached scalars from ρ₁.
    fn refresh(&mut self) {
        self.delta = self.rho0.matrix() - &self.rho1;
        self.d2 = hs_inner_unchecked(&self.delta, &self.delta);
        self.overlap = hs_inner_unchecked(&self.rho1, &self.delta);
        self.purity = hs_inner_unchecked(&self.rho1, &self.rho1);
    }

    pub fn rho0(&self) -> &DensityMatrix {
        &self.rho0
    }

    /// Current separable iterate ρ₁.
    pub fn rho1(&self) -> DensityMatrix {
        DensityMatrix::from_parts_unchecked(self.rho0.dims().to_vec(), self.rho1.clone())
    }

    pub fn d2(&self) -> f64 {
        self.d2
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn successes(&self) -> u64 {
        self.successes
    }

    pub fn group(&self) -> Option<&SymmetryGroup> {
        self.group.as_ref()
    }

    pub fn dims(&self) -> &[usize] {
        self.rho0.dims()
    }

    fn draw(sampler: &mut Sampler, dims: &[usize]) -> Trial {
        Trial::Pure(
            sampler
                .sample_product_vector(dims)
                .expect("dims validated at construction"),
        )
    }

    fn symmetrize(&self, trial: Trial) -> Trial {
        match &self.group {
            Some(g) if g.order() > 1 => Trial::Mixed(g.twirl_matrix(&trial.into_matrix())),
            _ => trial,
        }
    }

    /// Attempts one correction with a freshly drawn trial state.
    pub fn step(&mut self) -> StepOutcome {
        self.trials += 1;
        let dims = self.rho0.dims().to_vec();
        let trial = Self::draw(&mut self.sampler, &dims);
        if trial.preselect_value(&self.delta, self.overlap) <= 0.0 {
            return StepOutcome::Rejected(Rejection::PreselectFailed);
        }
        let trial = self.symmetrize(trial);
        self.try_accept(trial, self.trials)
    }

    /// Re-verifies preselection against the current iterate and applies
    /// the line search. `c_t` is the trial count to record.
    fn try_accept(&mut self, trial: Trial, c_t: u64) -> StepOutcome {
        let o = trial.overlaps(&self.delta, &self.rho1);
        let g = o.with_delta - self.overlap;
        if g <= 0.0 {
            return StepOutcome::Rejected(Rejection::PreselectFailed);
        }
        let h = o.purity - 2.0 * o.with_rho1 + self.purity;
        if h <= DEGENERATE_TOL {
            return StepOutcome::Rejected(Rejection::Degenerate);
        }
        let q = g / h;
        if q > 1.0 {
            // unclamped p = 1 - q falls below zero
            return StepOutcome::Rejected(Rejection::POutOfRange);
        }
        let new_d2 = self.d2 - g * g / h;
        if !(new_d2 < self.d2) {
            return StepOutcome::Rejected(Rejection::Degenerate);
        }

        let step = trial.into_matrix() - &self.rho1;
        self.rho1 += step.scale(q);
        self.delta -= step.scale(q);
        // caches follow the exact quadratic updates
        let cross = o.with_rho1 - self.purity;
        self.overlap += q * g - q * cross - q * q * h;
        self.purity += 2.0 * q * cross + q * q * h;
        self.d2 = new_d2;
        self.successes += 1;
        self.last_success_trial = c_t;
        if self.successes.is_multiple_of(REFRESH_INTERVAL) {
            self.refresh();
        }
        StepOutcome::Accepted(TraceRecord {
            c_t,
            c_s: self.successes,
            d2: self.d2,
        })
    }

    /// Runs until `halt` fires, sequentially and reproducibly.
    pub fn run(&mut self, halt: &HaltCriteria) -> Result<Trace> {
        self.run_observed(halt, |_, _| {})
    }

    /// Like [`RunState::run`], calling `observer` after each accepted correction.
    pub fn run_observed<F>(&mut self, halt: &HaltCriteria, mut observer: F) -> Result<Trace>
    where
        F: FnMut(&RunState, &TraceRecord),
    {
        halt.validate()?;
        let mut trace = Trace::new();
        while !halt.fired(self) {
            if let StepOutcome::Accepted(rec) = self.step() {
                trace.push(rec);
                observer(self, &rec);
            }
        }
        Ok(trace)
    }

    /// Speculative parallel run.
    ///
    /// Each round, `threads` workers draw up to `batch` trial states from
    /// their own streams and keep those that pass preselection against a
    /// snapshot of ρ₁. Candidates are then applied serially in worker order,
    /// each re-verified against the current ρ₁. The result depends on
    /// `threads` and `batch` but not on scheduling.
    pub fn run_parallel(
        &mut self,
        halt: &HaltCriteria,
        threads: usize,
        batch: usize,
    ) -> Result<Trace> {
        halt.validate()?;
        if threads <= 1 {
            return self.run(halt);
        }
        if batch == 0 {
            return Err(Error::Parameter("batch must be >= 1".into()));
        }
        let cfg = *self.sampler.config();
        let mut workers: Vec<Sampler> = (0..threads)
            .map(|w| Sampler::with_stream(cfg, w as u64 + 1))
            .collect();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Parameter(format!("thread pool: {e}")))?;
        let dims = self.rho0.dims().to_vec();
        let mut trace = Trace::new();

        while !halt.fired(self) {
            let budget = halt.remaining_trials(self);
            let per_worker = (batch as u64).min(budget.div_ceil(threads as u64)).max(1) as usize;
            let snapshot = &*self;
            let dims = &dims;
            // (trial offset within the round, candidate)
            let rounds: Vec<(usize, Vec<(usize, Trial)>)> = pool.install(|| {
                workers
                    .par_iter_mut()
                    .enumerate()
                    .map(|(w, sampler)| {
                        let mut kept = Vec::new();
                        let limit =
                            per_worker.min(budget.saturating_sub((w * per_worker) as u64) as usize);
                        for i in 0..limit {
                            let trial = Self::draw(sampler, dims);
                            if trial.preselect_value(&snapshot.delta, snapshot.overlap) > 0.0 {
                                kept.push((w * per_worker + i, snapshot.symmetrize(trial)));
                            }
                        }
                        (limit, kept)
                    })
                    .collect()
            });
            let drawn: u64 = rounds.iter().map(|(n, _)| *n as u64).sum();
            let start = self.trials;
            let mut stopped = false;
            for (offset, trial) in rounds.into_iter().flat_map(|(_, kept)| kept) {
                let c_t = start + offset as u64 + 1;
                self.trials = c_t;
                if let StepOutcome::Accepted(rec) = self.try_accept(trial, c_t) {
                    trace.push(rec);
                    if halt.fired(self) {
                        stopped = true;
                        break;
                    }
                }
            }
            if !stopped {
                self.trials = start + drawn;
            }
        }
        Ok(trace)
    }
}

/// Convenience wrapper: build a [`RunState`] and run it sequentially.
pub fn run(
    rho0: DensityMatrix,
    init_rho1: Option<DensityMatrix>,
    group: Option<SymmetryGroup>,
    halt: &HaltCriteria,
    cfg: SamplerConfig,
) -> Result<(RunState, Trace)> {
    halt.validate()?;
    let mut state = RunState::new(rho0, init_rho1, group, cfg)?;
    let trace = state.run(halt)?;
    Ok((state, trace))
}

/// Squared distance recomputed from scratch, for checking the caches.
pub fn recomputed_d2(state: &RunState) -> f64 {
    hsd_sq(state.rho0(), &state.rho1()).expect("dims match by construction")
}
