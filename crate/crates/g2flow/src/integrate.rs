//! Fixed-step classical RK4 over the flow systems, with guard monitoring
//! and convergence-study fitting.
//!
//! No constraint projection is applied: the systems preserve their
//! constraint manifolds, so drift is something to measure, not hide.

use crate::Result;

/// A flow `dY/dt = F(Y)` whose state supports the RK4 linear combination.
pub trait FlowSystem {
    type State: Clone;
    type Deriv;

    fn rhs(&self, state: &Self::State) -> Result<Self::Deriv>;

    /// `y + dt/6 (k1 + 2k2 + 2k3 + k4)` plus the time bump; returns the new
    /// state and the largest relative symmetrization defect absorbed while
    /// writing symmetric storage.
    fn combine(
        &self,
        state: &Self::State,
        ks: [&Self::Deriv; 4],
        dt: f64,
    ) -> Result<(Self::State, f64)>;

    /// `y + c·k` for the intermediate stages.
    fn step_euler(&self, state: &Self::State, k: &Self::Deriv, c: f64) -> Result<Self::State>;

    /// Positivity/degeneracy guard: `Some(reason)` halts the evolution.
    fn guard(&self, state: &Self::State) -> Option<GuardTrip>;

    fn time(&self, state: &Self::State) -> f64;
}

/// Why an evolution halted early.
#[derive(Debug, Clone, PartialEq)]
pub struct GuardTrip {
    pub what: &'static str,
    pub value: f64,
    pub threshold: f64,
}

/// Outcome status of [`evolve`].
#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Completed,
    GuardHalt {
        step: usize,
        t: f64,
        trip: GuardTrip,
    },
}

/// One classical RK4 step; `stats` is the symmetrization defect.
pub fn rk4_step<F: FlowSystem>(sys: &F, state: &F::State, dt: f64) -> Result<(F::State, f64)> {
    let k1 = sys.rhs(state)?;
    let y2 = sys.step_euler(state, &k1, 0.5 * dt)?;
    let k2 = sys.rhs(&y2)?;
    let y3 = sys.step_euler(state, &k2, 0.5 * dt)?;
    let k3 = sys.rhs(&y3)?;
    let y4 = sys.step_euler(state, &k3, dt)?;
    let k4 = sys.rhs(&y4)?;
    sys.combine(state, [&k1, &k2, &k3, &k4], dt)
}

/// Options for [`evolve`].
#[derive(Debug, Clone)]
pub struct EvolveOpts {
    pub t_final: f64,
    pub dt: f64,
    /// Observer cadence in steps (0 = only first and last).
    pub sample_every: usize,
}

/// Per-sample data handed to the observer.
pub struct Sample<'a, S> {
    pub step: usize,
    pub state: &'a S,
    pub sym_defect: f64,
    pub is_last: bool,
}

/// Evolve with fixed-step RK4, invoking `observer` on the initial state,
/// every `sample_every`-th step, and the final state.  Guards are checked
/// each step; a trip halts the run with a structured status (the observer
/// still sees the last valid state).
pub fn evolve<F: FlowSystem>(
    sys: &F,
    initial: F::State,
    opts: &EvolveOpts,
    mut observer: impl FnMut(Sample<'_, F::State>) -> Result<()>,
) -> Result<(F::State, RunStatus)> {
    let n_steps = (opts.t_final / opts.dt).round() as usize;
    let mut state = initial;
    let mut defect = 0.0;
    observer(Sample {
        step: 0,
        state: &state,
        sym_defect: 0.0,
        is_last: n_steps == 0,
    })?;
    for step in 1..=n_steps {
        if let Some(trip) = sys.guard(&state) {
            let t = sys.time(&state);
            observer(Sample {
                step,
                state: &state,
                sym_defect: defect,
                is_last: true,
            })?;
            return Ok((state, RunStatus::GuardHalt { step, t, trip }));
        }
        // positivity loss inside a stage is a guard event, not a crash
        let (next, d) = match rk4_step(sys, &state, opts.dt) {
            Ok(v) => v,
            Err(crate::Error::PositivityViolation { min }) => {
                let t = sys.time(&state);
                observer(Sample {
                    step,
                    state: &state,
                    sym_defect: defect,
                    is_last: true,
                })?;
                let trip = GuardTrip {
                    what: "positivity",
                    value: min,
                    threshold: 0.0,
                };
                return Ok((state, RunStatus::GuardHalt { step, t, trip }));
            }
            Err(crate::Error::NotPositiveDefinite { value, .. }) => {
                let t = sys.time(&state);
                observer(Sample {
                    step,
                    state: &state,
                    sym_defect: defect,
                    is_last: true,
                })?;
                let trip = GuardTrip {
                    what: "det S",
                    value,
                    threshold: 0.0,
                };
                return Ok((state, RunStatus::GuardHalt { step, t, trip }));
            }
            Err(e) => return Err(e),
        };
        state = next;
        defect = d;
        let is_last = step == n_steps;
        if is_last || (opts.sample_every > 0 && step % opts.sample_every == 0) {
            observer(Sample {
                step,
                state: &state,
                sym_defect: defect,
                is_last,
            })?;
        }
    }
    if let Some(trip) = sys.guard(&state) {
        let t = sys.time(&state);
        return Ok((
            state,
            RunStatus::GuardHalt {
                step: n_steps,
                t,
                trip,
            },
        ));
    }
    Ok((state, RunStatus::Completed))
}

/// Result of a log-log slope fit over (resolution, error) pairs.
#[derive(Debug, Clone, PartialEq)]
pub enum StudyResult {
    /// Least-squares slope of log(err) against log(resolution), and whether
    /// it deviates from the nominal order by more than the flag threshold.
    Slope {
        observed: f64,
        nominal: f64,
        flagged: bool,
    },
    /// All errors below the floor; no meaningful slope.
    AtFloor,
}

/// Fit the observed convergence order from ≥ 3 (resolution, error) pairs.
/// `resolution` is the small parameter (h or dt): errors are expected to
/// decrease with it.
pub fn convergence_study(
    points: &[(f64, f64)],
    nominal: f64,
    floor: f64,
) -> crate::Result<StudyResult> {
    if points.len() < 3 {
        return Err(crate::Error::Usage(format!(
            "convergence study needs at least 3 resolutions, got {}",
            points.len()
        )));
    }
    if points.iter().all(|&(_, e)| e <= floor) {
        return Ok(StudyResult::AtFloor);
    }
    let logs: Vec<(f64, f64)> = points
        .iter()
        .map(|&(r, e)| (r.ln(), e.max(f64::MIN_POSITIVE).ln()))
        .collect();
    let n = logs.len() as f64;
    let sx: f64 = logs.iter().map(|p| p.0).sum();
    let sy: f64 = logs.iter().map(|p| p.1).sum();
    let sxx: f64 = logs.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = logs.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    Ok(StudyResult::Slope {
        observed: slope,
        nominal,
        flagged: (slope - nominal).abs() > 0.3,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Scalar test system dS/dt = -S.
    struct Decay;

    impl FlowSystem for Decay {
        type State = (f64, f64); // (t, s)
        type Deriv = f64;

        fn rhs(&self, state: &Self::State) -> Result<f64> {
            Ok(-state.1)
        }

        fn combine(&self, s: &Self::State, ks: [&f64; 4], dt: f64) -> Result<(Self::State, f64)> {
            let sum = ks[0] + 2.0 * ks[1] + 2.0 * ks[2] + ks[3];
            Ok(((s.0 + dt, s.1 + dt / 6.0 * sum), 0.0))
        }

        fn step_euler(&self, s: &Self::State, k: &f64, c: f64) -> Result<Self::State> {
            Ok((s.0 + c, s.1 + c * k))
        }

        fn guard(&self, _: &Self::State) -> Option<GuardTrip> {
            None
        }

        fn time(&self, s: &Self::State) -> f64 {
            s.0
        }
    }

    #[test]
    fn zero_rhs_only_bumps_time() {
        struct Zero;
        impl FlowSystem for Zero {
            type State = (f64, f64);
            type Deriv = f64;
            fn rhs(&self, _: &Self::State) -> Result<f64> {
                Ok(0.0)
            }
            fn combine(
                &self,
                s: &Self::State,
                _: [&f64; 4],
                dt: f64,
            ) -> Result<(Self::State, f64)> {
                Ok(((s.0 + dt, s.1), 0.0))
            }
            fn step_euler(&self, s: &Self::State, _: &f64, c: f64) -> Result<Self::State> {
                Ok((s.0 + c, s.1))
            }
            fn guard(&self, _: &Self::State) -> Option<GuardTrip> {
                None
            }
            fn time(&self, s: &Self::State) -> f64 {
                s.0
            }
        }
        let (state, _) = rk4_step(&Zero, &(0.0, 1.25), 0.5).unwrap();
        assert_eq!(state, (0.5, 1.25));
    }

    #[test]
    fn rk4_is_fifth_order_per_step() {
        for dt in [0.1, 0.05, 0.025] {
            let (state, _) = rk4_step(&Decay, &(0.0, 1.0), dt).unwrap();
            let err = (state.1 - (-dt).exp()).abs();
            assert!(err < 0.05 * dt.powi(5), "dt={dt}: err={err}");
        }
    }

    #[test]
    fn evolve_matches_exponential() {
        let opts = EvolveOpts {
            t_final: 1.0,
            dt: 1e-2,
            sample_every: 10,
        };
        let mut count = 0;
        let (state, status) = evolve(&Decay, (0.0, 1.0), &opts, |_| {
            count += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(status, RunStatus::Completed);
        assert!((state.1 - (-1.0_f64).exp()).abs() < 1e-9);
        assert_eq!(count, 11); // initial + 10 samples
    }

    #[test]
    fn guard_halts() {
        struct Guarded;
        impl FlowSystem for Guarded {
            type State = (f64, f64);
            type Deriv = f64;
            fn rhs(&self, _: &Self::State) -> Result<f64> {
                Ok(-1.0)
            }
            fn combine(
                &self,
                s: &Self::State,
                _: [&f64; 4],
                dt: f64,
            ) -> Result<(Self::State, f64)> {
                Ok(((s.0 + dt, s.1 - dt), 0.0))
            }
            fn step_euler(&self, s: &Self::State, _: &f64, c: f64) -> Result<Self::State> {
                Ok((s.0 + c, s.1 - c))
            }
            fn guard(&self, s: &Self::State) -> Option<GuardTrip> {
                (s.1 < 0.5).then_some(GuardTrip {
                    what: "value",
                    value: s.1,
                    threshold: 0.5,
                })
            }
            fn time(&self, s: &Self::State) -> f64 {
                s.0
            }
        }
        let opts = EvolveOpts {
            t_final: 1.0,
            dt: 0.1,
            sample_every: 0,
        };
        let (_, status) = evolve(&Guarded, (0.0, 1.0), &opts, |_| Ok(())).unwrap();
        match status {
            RunStatus::GuardHalt { trip, .. } => assert_eq!(trip.what, "value"),
            s => panic!("expected guard halt, got {s:?}"),
        }
    }

    #[test]
    fn study_fit_and_floor() {
        // order-2 data
        let pts: Vec<(f64, f64)> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&h| (h, 3.0 * h * h))
            .collect();
        match convergence_study(&pts, 2.0, 1e-14).unwrap() {
            StudyResult::Slope {
                observed, flagged, ..
            } => {
                assert!((observed - 2.0).abs() < 1e-12);
                assert!(!flagged);
            }
            _ => panic!(),
        }
        // floor data
        let pts: Vec<(f64, f64)> = [0.1, 0.05, 0.025].iter().map(|&h| (h, 1e-16)).collect();
        assert_eq!(
            convergence_study(&pts, 2.0, 1e-14).unwrap(),
            StudyResult::AtFloor
        );
        // too few points
        assert!(convergence_study(&pts[..2], 2.0, 1e-14).is_err());
    }
}
