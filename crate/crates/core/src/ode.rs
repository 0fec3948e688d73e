//! Dormand–Prince 5(4) stepper for small autonomous-in-dimension systems.

/// Tableau of the Dormand–Prince pair.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepError {
    /// The step size underflowed or the step budget ran out.
    Stalled,
    /// The right-hand side produced a non-finite value.
    NonFinite,
}

#[derive(Debug, Clone)]
pub struct Dp45<const D: usize> {
    pub t: f64,
    pub y: [f64; D],
    h: f64,
    rtol: f64,
    atol: f64,
    max_steps: usize,
}

impl<const D: usize> Dp45<D> {
    pub fn new(t: f64, y: [f64; D], h0: f64, rtol: f64, atol: f64) -> Self {
        Dp45 {
            t,
            y,
            h: h0,
            rtol,
            atol,
            max_steps: 100_000,
        }
    }

    /// Advances to exactly `t_end` with adaptive substeps.
    pub fn advance<F>(&mut self, f: &F, t_end: f64) -> Result<(), StepError>
    where
        F: Fn(f64, &[f64; D]) -> [f64; D],
    {
        let mut steps = 0;
        while self.t < t_end {
            steps += 1;
            if steps > self.max_steps {
                return Err(StepError::Stalled);
            }
            let last = self.t + self.h >= t_end;
            let h = if last { t_end - self.t } else { self.h };
            let mut k = [[0.0; D]; 7];
            for s in 0..7 {
                let mut ys = self.y;
                for (j, kj) in k.iter().enumerate().take(s) {
                    for d in 0..D {
                        ys[d] += h * A[s][j] * kj[d];
                    }
                }
                k[s] = f(self.t + C[s] * h, &ys);
                if k[s].iter().any(|v| !v.is_finite()) {
                    if h < 1e-14 * self.t.abs().max(1.0) {
                        return Err(StepError::NonFinite);
                    }
                    self.h = 0.25 * h;
                    break;
                }
            }
            if k.iter().flatten().any(|v| !v.is_finite()) {
                continue;
            }
            let mut y5 = self.y;
            let mut err = 0.0_f64;
            for d in 0..D {
                let mut s5 = 0.0;
                let mut s4 = 0.0;
                for s in 0..7 {
                    s5 += B5[s] * k[s][d];
                    s4 += B4[s] * k[s][d];
                }
                y5[d] += h * s5;
                let sc = self.atol + self.rtol * self.y[d].abs().max(y5[d].abs());
                err = err.max((h * (s5 - s4)).abs() / sc);
            }
            if err <= 1.0 {
                self.t = if last { t_end } else { self.t + h };
                self.y = y5;
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            let hn = h * fac;
            if err > 1.0 || !last {
                self.h = hn;
            } else {
                self.h = self.h.max(hn);
            }
            if self.h < 1e-14 * self.t.abs().max(1.0) {
                return Err(StepError::Stalled);
            }
        }
        Ok(())
    }
}
