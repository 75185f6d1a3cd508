//! Five-stage low-storage fourth-order Runge-Kutta time stepping.

use crate::error::{Error, Result};
use crate::kernels::StateVec;

/// Standard published 5-stage low-storage RK4 coefficient set. Fourth-order
/// accuracy is pinned by the dt-convergence test rather than by these
/// constants alone.
#[derive(Debug, Clone)]
pub struct Lsrk4 {
    pub a: [f64; 5],
    pub b: [f64; 5],
    pub c: [f64; 5],
}

impl Default for Lsrk4 {
    fn default() -> Self {
        Self {
            a: [
                0.0,
                -567301805773.0 / 1357537059087.0,
                -2404267990393.0 / 2016746695238.0,
                -3550918686646.0 / 2091501179385.0,
                -1275806237668.0 / 842570457699.0,
            ],
            b: [
                1432997174477.0 / 9575080441755.0,
                5161836677717.0 / 13612068292357.0,
                1720146321549.0 / 2090206949498.0,
                3134564353537.0 / 4481467310338.0,
                2277821191437.0 / 14882151754819.0,
            ],
            c: [
                0.0,
                1432997174477.0 / 9575080441755.0,
                2526269341429.0 / 6820363962896.0,
                2006345519317.0 / 3224310063776.0,
                2802321613138.0 / 2924317926251.0,
            ],
        }
    }
}

/// One low-storage step: `res = a_i res + dt rhs(u, t + c_i dt); u += b_i res`.
/// Exactly one residual buffer per field; `rhs` writes its output into the
/// provided buffer.
pub fn lsrk4_step(
    scheme: &Lsrk4,
    state: &mut StateVec,
    residual: &mut StateVec,
    rhs_buf: &mut StateVec,
    t: f64,
    dt: f64,
    step_index: usize,
    mut rhs: impl FnMut(&StateVec, f64, &mut StateVec),
) -> Result<()> {
    for stage in 0..5 {
        rhs(state, t + scheme.c[stage] * dt, rhs_buf);
        let a = scheme.a[stage];
        let b = scheme.b[stage];
        for ((r, &f), u) in residual
            .data
            .iter_mut()
            .zip(&rhs_buf.data)
            .zip(&mut state.data)
        {
            *r = a * *r + dt * f;
            *u += b * *r;
        }
    }
    if !state.data.iter().take(64.min(state.data.len())).all(|v| v.is_finite())
        || !state.is_finite()
    {
        return Err(Error::NonFinite { step: step_index });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_state(v: f64) -> StateVec {
        let mut s = StateVec::zeros(1, 1, 1);
        s.data[0] = v;
        s
    }

    #[test]
    fn zero_rhs_leaves_state_unchanged() {
        let scheme = Lsrk4::default();
        let mut u = scalar_state(1.25);
        let mut res = scalar_state(0.0);
        let mut buf = scalar_state(0.0);
        lsrk4_step(&scheme, &mut u, &mut res, &mut buf, 0.0, 0.1, 0, |_, _, out| {
            out.data[0] = 0.0;
        })
        .unwrap();
        assert_eq!(u.data[0], 1.25);
    }

    #[test]
    fn fourth_order_on_linear_ode() {
        // dy/dt = lambda y, exact y(T) = exp(lambda T).
        let scheme = Lsrk4::default();
        let lambda = -1.3;
        let t_final = 1.0;
        let mut errors = Vec::new();
        let mut dts = Vec::new();
        for steps in [20usize, 40, 80, 160] {
            let dt = t_final / steps as f64;
            let mut u = scalar_state(1.0);
            let mut res = scalar_state(0.0);
            let mut buf = scalar_state(0.0);
            for s in 0..steps {
                lsrk4_step(
                    &scheme,
                    &mut u,
                    &mut res,
                    &mut buf,
                    s as f64 * dt,
                    dt,
                    s,
                    |y, _, out| {
                        out.data[0] = lambda * y.data[0];
                    },
                )
                .unwrap();
            }
            errors.push((u.data[0] - (lambda * t_final).exp()).abs());
            dts.push(dt);
        }
        // Least-squares slope of log(err) vs log(dt).
        let lx: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
        let ly: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
        let mx = lx.iter().sum::<f64>() / lx.len() as f64;
        let my = ly.iter().sum::<f64>() / ly.len() as f64;
        let slope: f64 = lx
            .iter()
            .zip(&ly)
            .map(|(x, y)| (x - mx) * (y - my))
            .sum::<f64>()
            / lx.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>();
        assert!((slope - 4.0).abs() < 0.1, "observed order {slope}");
    }

    #[test]
    fn nan_is_reported_with_step_number() {
        let scheme = Lsrk4::default();
        let mut u = scalar_state(1.0);
        let mut res = scalar_state(0.0);
        let mut buf = scalar_state(0.0);
        let err = lsrk4_step(&scheme, &mut u, &mut res, &mut buf, 0.0, 0.1, 7, |_, _, out| {
            out.data[0] = f64::NAN;
        })
        .unwrap_err();
        match err {
            Error::NonFinite { step } => assert_eq!(step, 7),
            other => panic!("unexpected error {other:?}"),
        }
    }
}
