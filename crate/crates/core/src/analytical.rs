//! Closed-form two-pool model: per-pool volume, LP return, the liquidity
//! equilibrium `r1 (1 + d) = r2`, protocol revenue and the optimal take rate.
//!
//! Revenue is reported normalized by `V f`.

use crate::error::{Error, Result};
use crate::sweep::{check_step, take_rate_grid, SweepCurve, SweepSample};

/// Roots this far outside `[0, 1]` are floating-point residue and get clamped.
const CLAMP_TOLERANCE: f64 = 1e-12;

/// Scenario tuple shared by the analytical and simulated models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Take rate of pool 1.
    pub t1: f64,
    /// Take rate of the competitor pool.
    pub t2: f64,
    /// Sticky volume share of pool 1.
    pub s1: f64,
    /// Sticky volume share of pool 2.
    pub s2: f64,
    /// ROI premium LPs accept before leaving pool 1.
    pub d: f64,
    /// Trading fee, equal in both pools.
    pub f: f64,
    /// Total trade volume.
    pub volume: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            t1: 0.0,
            t2: 0.0,
            s1: 0.0,
            s2: 0.0,
            d: 0.0,
            f: 0.003,
            volume: 1.0,
        }
    }
}

fn check_fraction(name: &str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::param(name, format!("must lie in [0, 1], got {value}")));
    }
    Ok(())
}

impl ModelParams {
    pub fn with_t1(self, t1: f64) -> Self {
        ModelParams { t1, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        check_fraction("t1", self.t1)?;
        check_fraction("t2", self.t2)?;
        check_fraction("s1", self.s1)?;
        check_fraction("s2", self.s2)?;
        if self.s1 + self.s2 > 1.0 + 1e-12 {
            return Err(Error::param(
                "s2",
                format!("s1 + s2 must not exceed 1, got {}", self.s1 + self.s2),
            ));
        }
        if !(self.d >= 0.0 && self.d.is_finite()) {
            return Err(Error::param("d", format!("must be a nonnegative real, got {}", self.d)));
        }
        if !(0.0..1.0).contains(&self.f) {
            return Err(Error::param("f", format!("must lie in [0, 1), got {}", self.f)));
        }
        if !(self.volume > 0.0 && self.volume.is_finite()) {
            return Err(Error::param("volume", format!("must be positive, got {}", self.volume)));
        }
        Ok(())
    }

    /// Volume share routed optimally, `1 - s1 - s2`.
    pub fn routed_share(&self) -> f64 {
        (1.0 - self.s1 - self.s2).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumResult {
    pub l1: f64,
    pub v1: f64,
    pub v2: f64,
    /// LP ROI of pool 1; `None` when pool 1 is empty.
    pub r1: Option<f64>,
    /// LP ROI of pool 2; `None` when pool 2 is empty.
    pub r2: Option<f64>,
    pub rev1: f64,
}

fn check_share(l1: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&l1) {
        return Err(Error::param("l1", format!("liquidity share must lie in [0, 1], got {l1}")));
    }
    Ok(())
}

/// `v_i = s_i V + (1 - s1 - s2) l_i V`.
pub fn pool_volumes(params: &ModelParams, l1: f64) -> Result<(f64, f64)> {
    check_share(l1)?;
    let routed = params.routed_share();
    let v = params.volume;
    let v1 = params.s1 * v + routed * l1 * v;
    let v2 = params.s2 * v + routed * (1.0 - l1) * v;
    Ok((v1, v2))
}

/// `r_i = (1 - t_i) v_i f / L_i` with `L_i = l_i L_total`.
pub fn lp_roi(params: &ModelParams, l1: f64, l_total: f64) -> Result<(f64, f64)> {
    check_share(l1)?;
    if l1 == 0.0 || l1 == 1.0 {
        return Err(Error::DegeneratePool { l1 });
    }
    if !(l_total > 0.0) {
        return Err(Error::param("L_total", format!("must be positive, got {l_total}")));
    }
    let (v1, v2) = pool_volumes(params, l1)?;
    let r1 = (1.0 - params.t1) * v1 * params.f / (l1 * l_total);
    let r2 = (1.0 - params.t2) * v2 * params.f / ((1.0 - l1) * l_total);
    Ok((r1, r2))
}

/// Terms of the equilibrium condition after clearing denominators:
/// `T l^2 - (T + a + b) l + a = 0` with `a = (1+d)(1-t1)s1`,
/// `b = (1-t2)s2` and `T = (1-s1-s2)((1-t2) - (1+d)(1-t1))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumQuadratic {
    pub a: f64,
    pub b: f64,
    pub t: f64,
}

impl EquilibriumQuadratic {
    pub fn from_params(params: &ModelParams) -> Self {
        let weighted_1 = (1.0 + params.d) * (1.0 - params.t1);
        let weighted_2 = 1.0 - params.t2;
        EquilibriumQuadratic {
            a: weighted_1 * params.s1,
            b: weighted_2 * params.s2,
            t: params.routed_share() * (weighted_2 - weighted_1),
        }
    }

    /// Monic coefficients `(p, q)` of `l^2 - p l + q = 0`; `None` when the
    /// leading term vanishes.
    pub fn monic(&self) -> Option<(f64, f64)> {
        if self.t == 0.0 {
            return None;
        }
        Some((1.0 + (self.a + self.b) / self.t, self.a / self.t))
    }

    /// The root lying in `[0, 1]`.
    ///
    /// Both cases of the sign of `T` select the same algebraic root,
    /// `((T+a+b) - sqrt(D)) / (2T) = 2a / ((T+a+b) + sqrt(D))`. The second
    /// form is used when `T + a + b >= 0` and the first otherwise, which
    /// avoids cancellation and covers `T = 0` (the linear case
    /// `l = a / (a + b)`) without a separate branch.
    pub fn valid_root(&self) -> Result<f64> {
        let EquilibriumQuadratic { a, b, t } = *self;
        if t == 0.0 && a + b == 0.0 {
            return Err(Error::IndeterminateEquilibrium);
        }
        let c = t + a + b;
        let mut disc = c * c - 4.0 * t * a;
        if disc < 0.0 {
            if disc < -1e-12 * c * c {
                return Err(Error::Internal(format!("negative discriminant {disc}")));
            }
            disc = 0.0;
        }
        let root_disc = disc.sqrt();
        let root = if c >= 0.0 {
            let denom = c + root_disc;
            if denom == 0.0 {
                0.0
            } else {
                2.0 * a / denom
            }
        } else {
            (c - root_disc) / (2.0 * t)
        };
        clamp_share(root)
    }
}

fn clamp_share(l1: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&l1) {
        Ok(l1)
    } else if (-CLAMP_TOLERANCE..0.0).contains(&l1) {
        Ok(0.0)
    } else if l1 > 1.0 && l1 <= 1.0 + CLAMP_TOLERANCE {
        Ok(1.0)
    } else {
        Err(Error::Internal(format!("equilibrium root {l1} outside [0, 1]")))
    }
}

/// Equilibrium liquidity share `l1` of pool 1.
pub fn equilibrium_share(params: &ModelParams) -> Result<f64> {
    params.validate()?;
    EquilibriumQuadratic::from_params(params).valid_root()
}

/// Full equilibrium state for a market with total liquidity `l_total`.
pub fn equilibrium(params: &ModelParams, l_total: f64) -> Result<EquilibriumResult> {
    let l1 = equilibrium_share(params)?;
    let (v1, v2) = pool_volumes(params, l1)?;
    let roi = |t: f64, v: f64, share: f64| {
        (share > 0.0).then(|| (1.0 - t) * v * params.f / (share * l_total))
    };
    Ok(EquilibriumResult {
        l1,
        v1,
        v2,
        r1: roi(params.t1, v1, l1),
        r2: roi(params.t2, v2, 1.0 - l1),
        rev1: revenue_at_share(params, l1),
    })
}

/// `rev1 = t1 (s1 + (1 - s1 - s2) l1)`.
pub fn revenue_at_share(params: &ModelParams, l1: f64) -> f64 {
    params.t1 * (params.s1 + params.routed_share() * l1)
}

pub fn protocol_revenue(params: &ModelParams) -> Result<f64> {
    Ok(revenue_at_share(params, equilibrium_share(params)?))
}

/// True on the branch where pool 1 keeps all liquidity when `s2 = 0`:
/// `1 - t1 >= (1 - s1)(1 - t2) / (1 + d)`.
pub fn retains_all_liquidity(params: &ModelParams) -> bool {
    (1.0 + params.d) * (1.0 - params.t1) >= (1.0 - params.s1) * (1.0 - params.t2)
}

/// Piecewise share for a competitor without sticky volume (`s2 = 0`).
pub fn share_without_competitor_stickiness(params: &ModelParams) -> f64 {
    if retains_all_liquidity(params) {
        1.0
    } else {
        let weighted_1 = (1.0 + params.d) * (1.0 - params.t1);
        weighted_1 * params.s1 / ((1.0 - params.s1) * ((1.0 - params.t2) - weighted_1))
    }
}

/// Piecewise revenue for `s2 = 0`: `t1` while all liquidity stays,
/// `s1 (1 - t2) / ((1 + d) - (t2 + d) / t1)` after.
pub fn revenue_without_competitor_stickiness(params: &ModelParams) -> f64 {
    if retains_all_liquidity(params) {
        params.t1
    } else if params.t1 == 0.0 {
        0.0
    } else {
        params.s1 * (1.0 - params.t2) / ((1.0 + params.d) - (params.t2 + params.d) / params.t1)
    }
}

/// `t1* = 1 - (1 - s1)(1 - t2) / (1 + d)`, exact when `s2 = 0`.
pub fn closed_form_take_rate(params: &ModelParams) -> f64 {
    1.0 - (1.0 - params.s1) * (1.0 - params.t2) / (1.0 + params.d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerSettings {
    pub grid_step: f64,
    pub tolerance: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            grid_step: 0.001,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TakeRateOptimum {
    pub t1: f64,
    pub rev1: f64,
}

/// Revenue-maximizing take rate of pool 1 (`params.t1` is ignored).
///
/// Closed form when the competitor has no sticky volume; otherwise a grid
/// argmax refined by golden-section search. Ties go to the smaller take rate.
pub fn optimal_take_rate(params: &ModelParams, settings: OptimizerSettings) -> Result<TakeRateOptimum> {
    let base = params.with_t1(0.0);
    base.validate()?;
    if params.s2 == 0.0 {
        let t1 = closed_form_take_rate(params).clamp(0.0, 1.0);
        let p = base.with_t1(t1);
        let rev1 = revenue_at_share(&p, sweep_share(&p)?);
        return Ok(TakeRateOptimum { t1, rev1 });
    }

    check_step("grid_step", settings.grid_step)?;
    let revenue = |t1: f64| protocol_revenue(&base.with_t1(t1));
    let mut best = TakeRateOptimum { t1: 0.0, rev1: revenue(0.0)? };
    for t1 in take_rate_grid(settings.grid_step)? {
        let rev1 = revenue(t1)?;
        if rev1 > best.rev1 {
            best = TakeRateOptimum { t1, rev1 };
        }
    }

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut lo = (best.t1 - settings.grid_step).max(0.0);
    let mut hi = (best.t1 + settings.grid_step).min(1.0);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (revenue(x1)?, revenue(x2)?);
    while hi - lo > settings.tolerance {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = revenue(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = revenue(x2)?;
        }
    }
    let t1 = 0.5 * (lo + hi);
    let rev1 = revenue(t1)?;
    if rev1 > best.rev1 {
        best = TakeRateOptimum { t1, rev1 };
    }
    Ok(best)
}

/// Equilibrium share used inside sweeps. An indeterminate equilibrium (every
/// split balances the ROIs) resolves to `l1 = 1`: liquidity has no reason to
/// leave pool 1.
pub fn sweep_share(params: &ModelParams) -> Result<f64> {
    match equilibrium_share(params) {
        Err(Error::IndeterminateEquilibrium) => Ok(1.0),
        other => other,
    }
}

/// Analytical `l1(t1)` and `rev1(t1)` over a take-rate grid.
pub fn analytical_sweep(params: &ModelParams, l_total: f64, take_step: f64) -> Result<SweepCurve> {
    let samples = take_rate_grid(take_step)?
        .into_iter()
        .map(|t1| {
            let p = params.with_t1(t1);
            let l1 = sweep_share(&p)?;
            let (r1, r2) = match lp_roi(&p, l1, l_total) {
                Ok((r1, r2)) => (Some(r1), Some(r2)),
                Err(_) => (None, None),
            };
            Ok(SweepSample {
                t1,
                l1,
                rev1: revenue_at_share(&p, l1),
                r1,
                r2,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepCurve {
        samples,
        grid_step: take_step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(t1: f64, t2: f64, s1: f64, s2: f64, d: f64) -> ModelParams {
        ModelParams { t1, t2, s1, s2, d, ..ModelParams::default() }
    }

    /// Bisection on `r1 (1 + d) - r2`, independent of the quadratic.
    fn bisect_share(p: &ModelParams) -> f64 {
        let g = |l: f64| {
            let (r1, r2) = lp_roi(p, l, 1.0).unwrap();
            r1 * (1.0 + p.d) - r2
        };
        let (mut lo, mut hi) = (1e-12, 1.0 - 1e-12);
        if g(hi) > 0.0 {
            return 1.0;
        }
        if g(lo) < 0.0 {
            return 0.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn pool_volume_examples() {
        let p = ModelParams { volume: 100.0, ..params(0.0, 0.0, 0.0, 0.0, 0.0) };
        let (v1, v2) = pool_volumes(&p, 0.3).unwrap();
        assert!((v1 - 30.0).abs() < 1e-12 && (v2 - 70.0).abs() < 1e-12);

        let p = ModelParams { volume: 100.0, ..params(0.0, 0.0, 0.1, 0.0, 0.0) };
        let (v1, v2) = pool_volumes(&p, 0.0).unwrap();
        assert!((v1 - 10.0).abs() < 1e-12 && (v2 - 90.0).abs() < 1e-12);

        let p = ModelParams { volume: 1000.0, ..params(0.0, 0.0, 0.1, 0.05, 0.0) };
        let (v1, v2) = pool_volumes(&p, 0.5).unwrap();
        assert!((v1 - 525.0).abs() < 1e-9 && (v2 - 475.0).abs() < 1e-9);
    }

    #[test]
    fn pool_volume_rejects_bad_share() {
        assert!(pool_volumes(&ModelParams::default(), 1.5).is_err());
    }

    #[test]
    fn lp_roi_examples() {
        let p = ModelParams { volume: 100.0, f: 0.003, ..params(0.0, 0.0, 0.0, 0.0, 0.0) };
        for l1 in [0.1, 0.5, 0.77] {
            let (r1, r2) = lp_roi(&p, l1, 1000.0).unwrap();
            assert!((r1 - 100.0 * 0.003 / 1000.0).abs() < 1e-15);
            assert!((r2 - r1).abs() < 1e-15);
        }

        let p = ModelParams { volume: 100.0, f: 0.003, ..params(0.5, 0.0, 0.0, 0.0, 0.0) };
        let (r1, r2) = lp_roi(&p, 0.5, 1000.0).unwrap();
        assert!((r1 - 1.5e-4).abs() < 1e-15);
        assert!((r2 - 3.0e-4).abs() < 1e-15);
        let (r1d, r2d) = lp_roi(&p, 0.5, 2000.0).unwrap();
        assert!((r1d - r1 / 2.0).abs() < 1e-18 && (r2d - r2 / 2.0).abs() < 1e-18);
    }

    #[test]
    fn lp_roi_degenerate_pool() {
        let p = ModelParams::default();
        assert!(matches!(lp_roi(&p, 0.0, 1.0), Err(Error::DegeneratePool { .. })));
        assert!(matches!(lp_roi(&p, 1.0, 1.0), Err(Error::DegeneratePool { .. })));
    }

    #[test]
    fn equilibrium_share_examples() {
        assert!((equilibrium_share(&params(0.0, 0.0, 0.1, 0.1, 0.0)).unwrap() - 0.5).abs() < 1e-12);

        let p = params(0.2, 0.0, 0.1, 0.0, 0.0);
        let l1 = equilibrium_share(&p).unwrap();
        assert!((l1 - bisect_share(&p)).abs() < 1e-10);
        assert!((l1 - 4.0 / 9.0).abs() < 1e-12);

        assert_eq!(equilibrium_share(&params(0.05, 0.0, 0.1, 0.0, 0.0)).unwrap(), 1.0);
    }

    #[test]
    fn singular_denominator_uses_linear_solution() {
        // (1 - t2) = (1 + d)(1 - t1) with t1 = t2 = 0.2, d = 0
        let p = params(0.2, 0.2, 0.1, 0.3, 0.0);
        let l1 = equilibrium_share(&p).unwrap();
        let a = 0.8 * 0.1;
        let b = 0.8 * 0.3;
        assert!((l1 - a / (a + b)).abs() < 1e-15);
        assert!((l1 - bisect_share(&p)).abs() < 1e-10);
        assert!(EquilibriumQuadratic::from_params(&p).monic().is_none());
    }

    #[test]
    fn fully_degenerate_equilibrium_is_indeterminate() {
        assert!(matches!(
            equilibrium_share(&params(0.1, 0.1, 0.0, 0.0, 0.0)),
            Err(Error::IndeterminateEquilibrium)
        ));
        assert_eq!(sweep_share(&params(0.1, 0.1, 0.0, 0.0, 0.0)).unwrap(), 1.0);
    }

    #[test]
    fn near_singular_root_is_stable() {
        let p = params(0.2, 0.2 + 1e-13, 0.1, 0.05, 0.0);
        let l1 = equilibrium_share(&p).unwrap();
        assert!((l1 - bisect_share(&p)).abs() < 1e-9);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(equilibrium_share(&params(0.0, 0.0, 0.7, 0.7, 0.0)).is_err());
        assert!(equilibrium_share(&params(1.2, 0.0, 0.1, 0.0, 0.0)).is_err());
        assert!(equilibrium_share(&params(0.1, 0.0, 0.1, 0.0, -0.1)).is_err());
    }

    #[test]
    fn protocol_revenue_examples() {
        assert_eq!(protocol_revenue(&params(0.0, 0.0, 0.1, 0.0, 0.0)).unwrap(), 0.0);
        assert!((protocol_revenue(&params(0.1, 0.0, 0.1, 0.0, 0.0)).unwrap() - 0.1).abs() < 1e-12);
        let p = params(0.2, 0.0, 0.1, 0.0, 0.0);
        assert!((protocol_revenue(&p).unwrap() - 0.1).abs() < 1e-12);
        assert!((revenue_without_competitor_stickiness(&p) - 0.1).abs() < 1e-12);
        assert!((0.2 * (0.1 + 0.9 * 4.0 / 9.0) - 0.1f64).abs() < 1e-12);
    }

    #[test]
    fn equilibrium_result_consistency() {
        let p = ModelParams { volume: 250.0, ..params(0.2, 0.1, 0.1, 0.05, 0.05) };
        let eq = equilibrium(&p, 1e4).unwrap();
        assert!((eq.v1 + eq.v2 - 250.0).abs() < 1e-9 * 250.0);
        let (r1, r2) = (eq.r1.unwrap(), eq.r2.unwrap());
        assert!((r1 * 1.05 - r2).abs() / r2 < 1e-9);

        let full = equilibrium(&params(0.0, 0.167, 0.0, 0.0, 0.0), 1.0).unwrap();
        assert_eq!(full.l1, 1.0);
        assert!(full.r2.is_none() && full.r1.is_some());
    }

    /// Grid argmax of protocol_revenue, independent of the closed form.
    fn grid_argmax(p: &ModelParams, step: f64) -> f64 {
        let n = (1.0 / step).round() as usize;
        let mut best = (0.0, f64::NEG_INFINITY);
        for k in 0..=n {
            let t1 = k as f64 / n as f64;
            let rev = protocol_revenue(&p.with_t1(t1)).unwrap();
            if rev > best.1 + 1e-15 {
                best = (t1, rev);
            }
        }
        best.0
    }

    #[test]
    fn optimal_take_rate_examples() {
        let s = OptimizerSettings::default();
        let opt = optimal_take_rate(&params(0.0, 0.0, 0.1, 0.0, 0.0), s).unwrap();
        assert!((opt.t1 - 0.1).abs() < 1e-12);

        let p = params(0.0, 0.0, 0.1, 0.0, 0.1);
        let opt = optimal_take_rate(&p, s).unwrap();
        assert!((opt.t1 - (1.0 - 0.9 / 1.1)).abs() < 1e-12);
        assert!((grid_argmax(&p, 1e-5) - opt.t1).abs() < 2e-5);

        let p = params(0.0, 0.167, 0.1, 0.05, 0.0);
        let opt = optimal_take_rate(&p, s).unwrap();
        assert!((opt.t1 - 0.26).abs() < 0.01, "t1* = {}", opt.t1);
        assert!((grid_argmax(&p, 1e-4) - opt.t1).abs() < 2e-4);
    }

    #[test]
    fn analytical_sweep_of_no_sticky_scenario() {
        let curve = analytical_sweep(&params(0.0, 0.167, 0.0, 0.0, 0.0), 1.0, 0.01).unwrap();
        for s in &curve.samples {
            if s.t1 < 0.167 {
                assert_eq!(s.l1, 1.0);
                assert!((s.rev1 - s.t1).abs() < 1e-15);
            } else {
                assert_eq!(s.l1, 0.0);
                assert_eq!(s.rev1, 0.0);
            }
        }
    }
}
