//! Störmer–Verlet (kick–drift–kick) stepping for Newtonian degrees of
//! freedom. Time-reversible and symplectic; the workhorse behind every
//! nuclear update in this crate.

use crate::error::{Error, Result};

/// One kick–drift–kick step:
///
///   p ← p + (dt/2)·F(q),  q ← q + dt·p/m,  p ← p + (dt/2)·F(q).
///
/// `masses` holds one mass per degree of freedom. `force` writes the force
/// into its output slice; a non-finite force or state aborts the step.
pub fn verlet_step(
    q: &mut [f64],
    p: &mut [f64],
    masses: &[f64],
    dt: f64,
    mut force: impl FnMut(&[f64], &mut [f64]) -> Result<()>,
) -> Result<()> {
    let n = q.len();
    debug_assert_eq!(p.len(), n);
    debug_assert_eq!(masses.len(), n);
    let mut f = vec![0.0; n];

    force(q, &mut f)?;
    check_finite(&f, "force")?;
    for i in 0..n {
        p[i] += 0.5 * dt * f[i];
    }
    for i in 0..n {
        q[i] += dt * p[i] / masses[i];
    }
    force(q, &mut f)?;
    check_finite(&f, "force")?;
    for i in 0..n {
        p[i] += 0.5 * dt * f[i];
    }
    check_finite(q, "positions")?;
    check_finite(p, "momenta")?;
    Ok(())
}

pub(crate) fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(what.to_string()));
    }
    Ok(())
}
