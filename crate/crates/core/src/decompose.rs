use crate::error::Result;
use crate::model::{assemble, Decomposition, SdConfig};
use crate::prep::DailySignal;
use crate::qp::{reformulate, solve, SolverSettings};
use crate::scalar::Scalar;

/// Estimates the residual, seasonal, degradation and soiling components of a prepared signal.
///
/// A non-optimal solver status is not an error; it is reported in
/// [`Decomposition::report`] together with the best iterate.
pub fn decompose<T: Scalar>(
    signal: &DailySignal<T>,
    config: &SdConfig,
    settings: &SolverSettings,
) -> Result<Decomposition<T>> {
    let problem = assemble(signal, config)?;
    let (qp, layout) = reformulate(&problem);
    let sol = solve(&qp, settings)?;

    let x2 = layout.seasonal(&sol.x);
    let x3 = layout.degradation(&sol.x);
    // the bound rows hold s ≤ 0 only to solver tolerance
    let x4: Vec<T> = layout.soiling(&sol.x).into_iter().map(|v| v.min(T::zero())).collect();
    let x1 = (0..signal.len())
        .map(|t| match signal.get(t) {
            Some(y) => y - x2[t] - x3[t] - x4[t],
            None => T::zero(),
        })
        .collect();

    Ok(Decomposition {
        x1,
        x2,
        x3,
        x4,
        degradation_slope: layout.slope_per_day(&sol.x),
        objective: T::lit(sol.report.objective),
        report: sol.report,
        periodicity_binding: problem.periodicity_binding(),
    })
}
