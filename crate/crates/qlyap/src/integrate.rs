//! Adaptive Dormand-Prince 5(4) integrator with fourth-order dense output.
//!
//! Plain explicit Runge-Kutta on flat real state vectors. The flows in this
//! crate are generated by bounded skew operators, so they are non-stiff and
//! an explicit embedded pair with continuous output is the right tool.
//! Conserved quantities (trace, spectrum) are deliberately not re-imposed
//! here; their drift is the caller's a-posteriori error gauge.

use nalgebra::DVector;

use crate::error::{Error, Result};

const STAGES: usize = 7;

const C: [f64; STAGES] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];

const A: [[f64; 6]; STAGES] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];

/// Fifth-order solution weights (identical to the last row of `A`).
const B: [f64; STAGES] =
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];

/// `B - B_hat`: weights of the embedded error estimate.
const E: [f64; STAGES] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Coefficients of the quartic interpolating polynomial, per stage.
const P: [[f64; 4]; STAGES] = [
    [
        1.0,
        -8048581381.0 / 2820520608.0,
        8663915743.0 / 2820520608.0,
        -12715105075.0 / 11282082432.0,
    ],
    [0.0, 0.0, 0.0, 0.0],
    [
        0.0,
        131558114200.0 / 32700410799.0,
        -68118460800.0 / 10900136933.0,
        87487479700.0 / 32700410799.0,
    ],
    [
        0.0,
        -1754552775.0 / 470086768.0,
        14199869525.0 / 1410260304.0,
        -10690763975.0 / 1880347072.0,
    ],
    [
        0.0,
        127303824393.0 / 49829197408.0,
        -318862633887.0 / 49829197408.0,
        701980252875.0 / 199316789632.0,
    ],
    [
        0.0,
        -282668133.0 / 205662961.0,
        2019193451.0 / 616988883.0,
        -1453857185.0 / 822651844.0,
    ],
    [0.0, 40617522.0 / 29380423.0, -110615467.0 / 29380423.0, 69997945.0 / 29380423.0],
];

#[derive(Debug, Clone)]
pub struct Dopri5Options {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    pub h_max: Option<f64>,
    pub h_initial: Option<f64>,
}

impl Default for Dopri5Options {
    fn default() -> Self {
        Self { rel_tol: 1e-11, abs_tol: 1e-13, max_steps: 20_000_000, h_max: None, h_initial: None }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

/// One dense-output sample: state and its time derivative at `t`.
#[derive(Debug, Clone)]
pub struct Sample {
    pub t: f64,
    pub y: DVector<f64>,
    pub dy: DVector<f64>,
}

/// Hook applied to the accepted state every `interval` accepted steps.
pub struct PostStep<'a> {
    pub interval: usize,
    pub apply: &'a mut dyn FnMut(&mut DVector<f64>),
}

/// Integrates `dy/dt = rhs(t, y)` from `t0` to `t_final`, emitting dense
/// samples at the requested times (must be nondecreasing, within the span).
///
/// Errors on step-size underflow or when `max_steps` is exhausted before
/// reaching `t_final`.
pub fn dopri5<F>(
    mut rhs: F,
    t0: f64,
    y0: DVector<f64>,
    t_final: f64,
    sample_times: &[f64],
    opts: &Dopri5Options,
    mut post_step: Option<PostStep<'_>>,
) -> Result<(Vec<Sample>, StepStats)>
where
    F: FnMut(f64, &DVector<f64>) -> DVector<f64>,
{
    let dim = y0.len();
    let span = t_final - t0;
    assert!(span >= 0.0, "integration span must be forward");
    let mut stats = StepStats::default();
    let mut samples = Vec::with_capacity(sample_times.len());
    let mut next_sample = 0;

    let mut t = t0;
    let mut y = y0;
    let mut k: Vec<DVector<f64>> = (0..STAGES).map(|_| DVector::zeros(dim)).collect();
    k[0] = rhs(t, &y);
    stats.rhs_evals += 1;

    // emit samples at exactly t0
    while next_sample < sample_times.len() && sample_times[next_sample] <= t0 {
        samples.push(Sample { t: t0, y: y.clone(), dy: k[0].clone() });
        next_sample += 1;
    }
    if span == 0.0 {
        return Ok((samples, stats));
    }

    let h_max = opts.h_max.unwrap_or(span);
    let mut h = opts.h_initial.unwrap_or_else(|| {
        initial_step(&mut rhs, t, &y, &k[0], opts, span, &mut stats)
    })
    .min(h_max)
    .min(span);

    let scaled_err = |err: &DVector<f64>, y_a: &DVector<f64>, y_b: &DVector<f64>| -> f64 {
        let mut acc = 0.0;
        for i in 0..dim {
            let scale = opts.abs_tol + opts.rel_tol * y_a[i].abs().max(y_b[i].abs());
            let r = err[i] / scale;
            acc += r * r;
        }
        (acc / dim as f64).sqrt()
    };

    let mut steps_since_post = 0usize;
    loop {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::Integration(format!(
                "tolerance not achievable within {} steps (t = {t:.6})",
                opts.max_steps
            )));
        }
        let h_floor = 1e-14 * t.abs().max(t_final.abs()).max(1.0);
        if h < h_floor {
            return Err(Error::Integration(format!("step size underflow at t = {t:.6}")));
        }
        let last = t + h >= t_final;
        if last {
            h = t_final - t;
        }

        // stages 2..7; k7 is the derivative at the candidate solution (FSAL)
        for s in 1..STAGES {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate().take(s) {
                if A[s][j] != 0.0 {
                    ys.axpy(h * A[s][j], kj, 1.0);
                }
            }
            k[s] = rhs(t + C[s] * h, &ys);
            stats.rhs_evals += 1;
        }
        let mut y_new = y.clone();
        for (j, kj) in k.iter().enumerate() {
            if B[j] != 0.0 {
                y_new.axpy(h * B[j], kj, 1.0);
            }
        }
        let mut err = DVector::zeros(dim);
        for (j, kj) in k.iter().enumerate() {
            if E[j] != 0.0 {
                err.axpy(h * E[j], kj, 1.0);
            }
        }
        let err_norm = scaled_err(&err, &y, &y_new);

        if err_norm <= 1.0 {
            // dense output over (t, t + h]
            while next_sample < sample_times.len()
                && sample_times[next_sample] <= t + h + 1e-12 * h
            {
                let ts = sample_times[next_sample].min(t + h);
                let theta = ((ts - t) / h).clamp(0.0, 1.0);
                let (ys, dys) = interpolate(&y, &k, h, theta);
                samples.push(Sample { t: ts, y: ys, dy: dys });
                next_sample += 1;
            }
            t += h;
            y = y_new;
            k[0] = k[STAGES - 1].clone();
            stats.accepted += 1;

            if let Some(hook) = post_step.as_mut() {
                steps_since_post += 1;
                if hook.interval > 0 && steps_since_post >= hook.interval {
                    (hook.apply)(&mut y);
                    k[0] = rhs(t, &y);
                    stats.rhs_evals += 1;
                    steps_since_post = 0;
                }
            }

            if last || t >= t_final {
                return Ok((samples, stats));
            }
            let factor = if err_norm == 0.0 {
                5.0
            } else {
                (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = (h * factor).min(h_max).min(t_final - t);
        } else {
            stats.rejected += 1;
            h *= (0.9 * err_norm.powf(-0.2)).clamp(0.2, 0.9);
        }
    }
}

fn interpolate(
    y: &DVector<f64>,
    k: &[DVector<f64>],
    h: f64,
    theta: f64,
) -> (DVector<f64>, DVector<f64>) {
    let powers = [theta, theta * theta, theta * theta * theta, theta * theta * theta * theta];
    let dpowers = [1.0, 2.0 * theta, 3.0 * theta * theta, 4.0 * theta * theta * theta];
    let mut ys = y.clone();
    let mut dys = DVector::zeros(y.len());
    for (s, ks) in k.iter().enumerate() {
        let mut w = 0.0;
        let mut dw = 0.0;
        for j in 0..4 {
            w += P[s][j] * powers[j];
            dw += P[s][j] * dpowers[j];
        }
        if w != 0.0 {
            ys.axpy(h * w, ks, 1.0);
        }
        if dw != 0.0 {
            dys.axpy(dw, ks, 1.0);
        }
    }
    (ys, dys)
}

/// Step-size heuristic following Hairer/Norsett/Wanner.
fn initial_step<F>(
    rhs: &mut F,
    t0: f64,
    y0: &DVector<f64>,
    f0: &DVector<f64>,
    opts: &Dopri5Options,
    span: f64,
    stats: &mut StepStats,
) -> f64
where
    F: FnMut(f64, &DVector<f64>) -> DVector<f64>,
{
    let dim = y0.len() as f64;
    let scale_norm = |v: &DVector<f64>, reference: &DVector<f64>| -> f64 {
        let mut acc = 0.0;
        for i in 0..v.len() {
            let scale = opts.abs_tol + opts.rel_tol * reference[i].abs();
            let r = v[i] / scale;
            acc += r * r;
        }
        (acc / dim).sqrt()
    };
    let d0 = scale_norm(y0, y0);
    let d1 = scale_norm(f0, y0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let y1 = y0 + f0 * h0;
    let f1 = rhs(t0 + h0, &y1);
    stats.rhs_evals += 1;
    let d2 = scale_norm(&(f1 - f0), y0) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span)
}
