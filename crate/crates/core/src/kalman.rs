//! Constant-velocity Kalman filter on the ground plane, with a
//! Rauch-Tung-Striebel backward pass.
//!
//! State is `[x, y, vx, vy]`. Process noise (white-noise acceleration) and
//! measurement noise are isotropic and the initial covariance is diagonal, so
//! the x and y axes evolve with one shared 2x2 `[position, velocity]`
//! covariance. Gains therefore never depend on the measured values and every
//! output is a linear function of the measurements.

use crate::geometry::Vec2;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KalmanConfig<T> {
    /// White-noise acceleration standard deviation (m/s^2).
    pub sigma_a: T,
    /// Position measurement standard deviation (m).
    pub sigma_m: T,
    /// Sample spacing (s).
    pub dt: T,
}

impl<T: Scalar> Default for KalmanConfig<T> {
    fn default() -> Self {
        Self {
            sigma_a: T::lit(0.5),
            sigma_m: T::lit(0.1),
            dt: T::lit(0.4),
        }
    }
}

/// Symmetric `[position, velocity]` covariance shared by both axes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisCovariance<T> {
    pub pp: T,
    pub pv: T,
    pub vv: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CvState<T> {
    pub position: Vec2<T>,
    pub velocity: Vec2<T>,
}

impl<T: Scalar> CvState<T> {
    /// Position after `dt` seconds of constant velocity.
    pub fn extrapolate(&self, dt: T) -> Vec2<T> {
        self.position + self.velocity * dt
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FilterStep<T> {
    pub predicted: CvState<T>,
    pub predicted_cov: AxisCovariance<T>,
    pub updated: CvState<T>,
    pub updated_cov: AxisCovariance<T>,
}

fn predict_step<T: Scalar>(
    s: &CvState<T>,
    p: &AxisCovariance<T>,
    cfg: &KalmanConfig<T>,
) -> (CvState<T>, AxisCovariance<T>) {
    let dt = cfg.dt;
    let dt2 = dt * dt;
    let q = cfg.sigma_a * cfg.sigma_a;
    // discrete white-noise acceleration: G = [dt^2/2, dt], Q = G G^T sigma_a^2
    let half = T::lit(0.5);
    let qpp = q * dt2 * dt2 * T::lit(0.25);
    let qpv = q * dt2 * dt * half;
    let qvv = q * dt2;
    let state = CvState {
        position: s.extrapolate(dt),
        velocity: s.velocity,
    };
    let cov = AxisCovariance {
        pp: p.pp + T::lit(2.0) * dt * p.pv + dt2 * p.vv + qpp,
        pv: p.pv + dt * p.vv + qpv,
        vv: p.vv + qvv,
    };
    (state, cov)
}

fn update_step<T: Scalar>(
    s: &CvState<T>,
    p: &AxisCovariance<T>,
    z: Vec2<T>,
    cfg: &KalmanConfig<T>,
) -> (CvState<T>, AxisCovariance<T>) {
    let r = cfg.sigma_m * cfg.sigma_m;
    let innov_var = p.pp + r;
    let kp = p.pp / innov_var;
    let kv = p.pv / innov_var;
    let innov = z - s.position;
    let state = CvState {
        position: s.position + innov * kp,
        velocity: s.velocity + innov * kv,
    };
    let one = T::one();
    let cov = AxisCovariance {
        pp: (one - kp) * p.pp,
        pv: (one - kp) * p.pv,
        vv: p.vv - kv * p.pv,
    };
    (state, cov)
}

/// Causal pass over uniformly spaced observations (`None` marks a gap).
///
/// The state is initialized at the first valid observation with the velocity
/// of the first difference to the next valid one and covariance
/// `diag(sigma_m^2, 1)` per axis. Entries before the first valid observation
/// are `None`. Returns `None` when fewer than two observations are valid.
pub fn forward_pass<T: Scalar>(
    observations: &[Option<Vec2<T>>],
    cfg: &KalmanConfig<T>,
) -> Option<Vec<Option<FilterStep<T>>>> {
    let mut valid = observations
        .iter()
        .enumerate()
        .filter_map(|(i, z)| z.map(|z| (i, z)));
    let (i0, z0) = valid.next()?;
    let (i1, z1) = valid.next()?;
    let gap = cfg.dt * T::from_usize(i1 - i0)?;

    let init = CvState {
        position: z0,
        velocity: (z1 - z0) * (T::one() / gap),
    };
    let init_cov = AxisCovariance {
        pp: cfg.sigma_m * cfg.sigma_m,
        pv: T::zero(),
        vv: T::one(),
    };

    let mut out = vec![None; observations.len()];
    out[i0] = Some(FilterStep {
        predicted: init,
        predicted_cov: init_cov,
        updated: init,
        updated_cov: init_cov,
    });
    let (mut state, mut cov) = (init, init_cov);
    for (k, z) in observations.iter().enumerate().skip(i0 + 1) {
        let (ps, pc) = predict_step(&state, &cov, cfg);
        let (us, uc) = match z {
            Some(z) => update_step(&ps, &pc, *z, cfg),
            None => (ps, pc),
        };
        out[k] = Some(FilterStep {
            predicted: ps,
            predicted_cov: pc,
            updated: us,
            updated_cov: uc,
        });
        state = us;
        cov = uc;
    }
    Some(out)
}

/// Final filtered state of the causal pass.
pub fn filter_final<T: Scalar>(
    observations: &[Option<Vec2<T>>],
    cfg: &KalmanConfig<T>,
) -> Option<CvState<T>> {
    forward_pass(observations, cfg)?
        .last()
        .copied()
        .flatten()
        .map(|s| s.updated)
}

/// Fixed-interval RTS smoothing of a forward pass. Leading `None` entries
/// stay `None`.
pub fn rts_smooth<T: Scalar>(
    steps: &[Option<FilterStep<T>>],
    cfg: &KalmanConfig<T>,
) -> Vec<Option<CvState<T>>> {
    let n = steps.len();
    let mut out: Vec<Option<CvState<T>>> = vec![None; n];
    let Some(last) = steps.last().copied().flatten() else {
        return out;
    };
    out[n - 1] = Some(last.updated);
    let mut next_smoothed = last.updated;
    let dt = cfg.dt;
    for k in (0..n - 1).rev() {
        let Some(cur) = steps[k] else { break };
        let next = steps[k + 1].expect("forward pass has no interior holes");
        let p = cur.updated_cov;
        let pn = next.predicted_cov;
        // P F^T with F = [[1, dt], [0, 1]]
        let a = p.pp + dt * p.pv;
        let b = p.pv;
        let c = p.pv + dt * p.vv;
        let d = p.vv;
        let det = pn.pp * pn.vv - pn.pv * pn.pv;
        // inverse of the symmetric predicted covariance
        let ipp = pn.vv / det;
        let ipv = -pn.pv / det;
        let ivv = pn.pp / det;
        // gain G = (P F^T) Pn^-1, rows: position, velocity
        let g00 = a * ipp + b * ipv;
        let g01 = a * ipv + b * ivv;
        let g10 = c * ipp + d * ipv;
        let g11 = c * ipv + d * ivv;
        let dp = next_smoothed.position - next.predicted.position;
        let dv = next_smoothed.velocity - next.predicted.velocity;
        let smoothed = CvState {
            position: cur.updated.position + dp * g00 + dv * g01,
            velocity: cur.updated.velocity + dp * g10 + dv * g11,
        };
        out[k] = Some(smoothed);
        next_smoothed = smoothed;
    }
    out
}
