//! Trade-level simulation of two competing pools.
//!
//! A trace is replayed against two balanced pools with sticky traders,
//! optimal routing for everyone else, and an arbitrage step after every trade.
//! Replaying over a grid of liquidity splits yields each pool's fee income,
//! from which the liquidity equilibrium and the protocol revenue follow.
//!
//! Swap mechanics do not depend on take rates, so fee income is computed once
//! per liquidity split and reused across the whole take-rate sweep.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analytical::{EquilibriumResult, ModelParams};
use crate::cpmm::{arbitrage, optimal_split, Direction, PoolState};
use crate::error::{Error, Result};
use crate::sweep::{liquidity_grid, take_rate_grid, SweepCurve, SweepSample};

pub const DEFAULT_DEVIATION_THRESHOLD: f64 = 0.1;
pub const DEFAULT_LIQUIDITY_STEP: f64 = 0.005;
pub const DEFAULT_TAKE_STEP: f64 = 0.01;

/// Relative ROI residual under which pool 1 counts as no worse than pool 2.
const ROI_TOLERANCE: f64 = 1e-9;
/// Normalized residuals closer than this are ties.
const TIE_TOLERANCE: f64 = 1e-12;
const CUMULATIVE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum StickyLabel {
    #[default]
    Unlabeled,
    Pool1,
    Pool2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeEvent {
    pub direction: Direction,
    pub amount_in: f64,
    pub sticky: StickyLabel,
}

impl TradeEvent {
    pub fn new(direction: Direction, amount_in: f64) -> Result<Self> {
        if !(amount_in > 0.0 && amount_in.is_finite()) {
            return Err(Error::Domain(format!("trade amount must be positive, got {amount_in}")));
        }
        Ok(TradeEvent {
            direction,
            amount_in,
            sticky: StickyLabel::Unlabeled,
        })
    }

    /// Trade size in token-0 at `price` (token-1 per token-0).
    pub fn value_in_token0(&self, price: f64) -> f64 {
        match self.direction {
            Direction::AToB => self.amount_in,
            Direction::BToA => self.amount_in / price,
        }
    }
}

/// Marks the smallest trades as sticky.
///
/// Trades are sorted by token-0 value (ties keep trace order) and the least
/// prefix reaching `(s1 + s2)` of total value becomes sticky. The sticky set
/// is shuffled with `seed`, and the least prefix of the shuffle reaching `s1`
/// of total value is labeled pool 1; the rest go to pool 2.
pub fn assign_sticky(trades: &[TradeEvent], s1: f64, s2: f64, seed: u64, price: f64) -> Result<Vec<TradeEvent>> {
    if !(0.0..=1.0).contains(&s1) || !(0.0..=1.0).contains(&s2) {
        return Err(Error::Domain(format!("sticky rates must lie in [0, 1], got s1={s1}, s2={s2}")));
    }
    if s1 + s2 > 1.0 + 1e-12 {
        return Err(Error::Domain(format!("s1 + s2 must not exceed 1, got {}", s1 + s2)));
    }
    if trades.is_empty() {
        return Err(Error::Domain("cannot assign sticky labels to an empty trace".into()));
    }

    let mut labeled: Vec<TradeEvent> = trades
        .iter()
        .map(|t| TradeEvent { sticky: StickyLabel::Unlabeled, ..*t })
        .collect();
    let values: Vec<f64> = trades.iter().map(|t| t.value_in_token0(price)).collect();
    let total: f64 = values.iter().sum();

    let mut order: Vec<usize> = (0..trades.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));

    let mut sticky = least_prefix(&order, &values, (s1 + s2) * total);
    sticky.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let pool1_count = if s2 == 0.0 {
        sticky.len()
    } else {
        least_prefix(&sticky, &values, s1 * total).len()
    };
    for (k, &i) in sticky.iter().enumerate() {
        labeled[i].sticky = if k < pool1_count { StickyLabel::Pool1 } else { StickyLabel::Pool2 };
    }
    Ok(labeled)
}

fn least_prefix(indices: &[usize], values: &[f64], target: f64) -> Vec<usize> {
    if target <= 0.0 {
        return Vec::new();
    }
    let threshold = target * (1.0 - CUMULATIVE_SLACK);
    let mut cumulative = 0.0;
    let mut prefix = Vec::new();
    for &i in indices {
        prefix.push(i);
        cumulative += values[i];
        if cumulative >= threshold {
            break;
        }
    }
    prefix
}

/// Aggregates of one trace replay. Volumes and fees are in token-0 units,
/// converting token-1 inputs at the receiving pool's pre-trade price.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimOutcome {
    /// Executed volume per pool, arbitrage included.
    pub volume_1: f64,
    pub volume_2: f64,
    pub fees_1: f64,
    pub fees_2: f64,
    /// Arbitrage share of `volume_i`.
    pub arb_volume_1: f64,
    pub arb_volume_2: f64,
    pub arb_count: usize,
    pub rerouted_count: usize,
    /// Raw trace input executed, per input token.
    pub executed_in_a: f64,
    pub executed_in_b: f64,
}

impl SimOutcome {
    /// Trace (non-arbitrage) volume executed in pool 1.
    pub fn trace_volume_1(&self) -> f64 {
        self.volume_1 - self.arb_volume_1
    }

    pub fn trace_volume_2(&self) -> f64 {
        self.volume_2 - self.arb_volume_2
    }

    pub fn trace_volume(&self) -> f64 {
        self.trace_volume_1() + self.trace_volume_2()
    }
}

fn token0_value(pool: &PoolState, amount: f64, direction: Direction) -> f64 {
    match direction {
        Direction::AToB => amount,
        Direction::BToA => amount * pool.reserve_a / pool.reserve_b,
    }
}

/// Stateful replay of a trace against two pools.
#[derive(Debug, Clone)]
pub struct TradeSimulation {
    pub pool1: PoolState,
    pub pool2: PoolState,
    deviation_threshold: f64,
    outcome: SimOutcome,
}

impl TradeSimulation {
    pub fn new(pool1: PoolState, pool2: PoolState, deviation_threshold: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&deviation_threshold) {
            return Err(Error::param(
                "deviation_threshold",
                format!("must lie in [0, 1], got {deviation_threshold}"),
            ));
        }
        if pool1.is_empty() && pool2.is_empty() {
            return Err(Error::EmptyPool);
        }
        Ok(TradeSimulation {
            pool1,
            pool2,
            deviation_threshold,
            outcome: SimOutcome::default(),
        })
    }

    pub fn outcome(&self) -> &SimOutcome {
        &self.outcome
    }

    pub fn into_outcome(self) -> SimOutcome {
        self.outcome
    }

    fn pool(&self, index: usize) -> &PoolState {
        if index == 0 {
            &self.pool1
        } else {
            &self.pool2
        }
    }

    /// Executes one trace trade, then the arbitrage step.
    pub fn step(&mut self, trade: &TradeEvent) -> Result<()> {
        let x = trade.amount_in;
        let dir = trade.direction;
        let sticky_pool = match trade.sticky {
            StickyLabel::Unlabeled => None,
            StickyLabel::Pool1 => Some(0),
            StickyLabel::Pool2 => Some(1),
        };

        let allocation = match sticky_pool {
            None => self.optimal(x, dir)?,
            Some(k) if self.pool(k).is_empty() => {
                self.outcome.rerouted_count += 1;
                self.optimal(x, dir)?
            }
            Some(k) => {
                let sticky_out = self.pool(k).quote(x, dir)?;
                let optimal = optimal_split(&[self.pool1.clone(), self.pool2.clone()], x, dir)?;
                let shortfall = if optimal.total_out > 0.0 {
                    (optimal.total_out - sticky_out) / optimal.total_out
                } else {
                    0.0
                };
                if shortfall > self.deviation_threshold {
                    self.outcome.rerouted_count += 1;
                    [optimal.amounts[0], optimal.amounts[1]]
                } else if k == 0 {
                    [x, 0.0]
                } else {
                    [0.0, x]
                }
            }
        };

        for (k, &amount) in allocation.iter().enumerate() {
            if amount > 0.0 {
                self.execute(k, amount, dir, false)?;
            }
        }
        match dir {
            Direction::AToB => self.outcome.executed_in_a += x,
            Direction::BToA => self.outcome.executed_in_b += x,
        }

        if !self.pool1.is_empty() && !self.pool2.is_empty() {
            if let Some(arb) = arbitrage(&self.pool1, &self.pool2)? {
                let entry = arb.trade.entry_pool;
                let exit = 1 - entry;
                self.record(entry, arb.trade.input, true);
                let exit_value = token0_value(self.pool(exit), arb.trade.intermediate, Direction::BToA);
                self.record(exit, exit_value, true);
                self.pool1 = arb.pool1;
                self.pool2 = arb.pool2;
                self.outcome.arb_count += 1;
            }
        }
        Ok(())
    }

    fn optimal(&self, x: f64, dir: Direction) -> Result<[f64; 2]> {
        let split = optimal_split(&[self.pool1.clone(), self.pool2.clone()], x, dir)?;
        Ok([split.amounts[0], split.amounts[1]])
    }

    fn execute(&mut self, k: usize, amount: f64, dir: Direction, is_arb: bool) -> Result<()> {
        let value = token0_value(self.pool(k), amount, dir);
        if k == 0 {
            self.pool1.apply_swap(amount, dir)?;
        } else {
            self.pool2.apply_swap(amount, dir)?;
        }
        self.record(k, value, is_arb);
        Ok(())
    }

    fn record(&mut self, k: usize, value: f64, is_arb: bool) {
        let fee = self.pool(k).fee * value;
        let o = &mut self.outcome;
        if k == 0 {
            o.volume_1 += value;
            o.fees_1 += fee;
            if is_arb {
                o.arb_volume_1 += value;
            }
        } else {
            o.volume_2 += value;
            o.fees_2 += fee;
            if is_arb {
                o.arb_volume_2 += value;
            }
        }
    }
}

/// Replays `trades` (already sticky-labeled) against the two pools.
pub fn simulate_trades(
    pool1: PoolState,
    pool2: PoolState,
    trades: &[TradeEvent],
    deviation_threshold: f64,
) -> Result<SimOutcome> {
    let mut sim = TradeSimulation::new(pool1, pool2, deviation_threshold)?;
    for trade in trades {
        sim.step(trade)?;
    }
    Ok(sim.into_outcome())
}

/// Market-wide settings of a simulated scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketSetup {
    /// Total token-0 liquidity shared by both pools.
    pub l_total: f64,
    /// Common initial marginal price, token-1 per token-0.
    pub price: f64,
    /// Trading fee of both pools.
    pub fee: f64,
    pub deviation_threshold: f64,
}

impl MarketSetup {
    pub fn new(l_total: f64, fee: f64) -> Self {
        MarketSetup {
            l_total,
            price: 1.0,
            fee,
            deviation_threshold: DEFAULT_DEVIATION_THRESHOLD,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.l_total > 0.0 && self.l_total.is_finite()) {
            return Err(Error::param("L_total", format!("must be positive, got {}", self.l_total)));
        }
        if !(self.price > 0.0 && self.price.is_finite()) {
            return Err(Error::param("initial_price", format!("must be positive, got {}", self.price)));
        }
        Ok(())
    }

    /// Balanced pools holding `l1` and `1 - l1` of the liquidity.
    pub fn pools(&self, l1: f64) -> Result<(PoolState, PoolState)> {
        self.validate()?;
        let p1 = PoolState::balanced(l1 * self.l_total, self.price, self.fee)?;
        let p2 = PoolState::balanced((1.0 - l1) * self.l_total, self.price, self.fee)?;
        Ok((p1, p2))
    }

    /// Fresh balanced replay of the trace at liquidity share `l1`.
    pub fn replay(&self, l1: f64, trades: &[TradeEvent]) -> Result<SimOutcome> {
        let (p1, p2) = self.pools(l1)?;
        simulate_trades(p1, p2, trades, self.deviation_threshold)
    }
}

/// Fee income of both pools at one liquidity split.
#[derive(Debug, Clone, PartialEq)]
pub struct LiquidityPoint {
    pub l1: f64,
    pub outcome: SimOutcome,
}

impl LiquidityPoint {
    /// LP ROIs `(1 - t_i) fees_i / L_i`; `None` for an empty pool.
    pub fn rois(&self, params: &ModelParams, l_total: f64) -> (Option<f64>, Option<f64>) {
        let roi = |t: f64, fees: f64, share: f64| (share > 0.0).then(|| (1.0 - t) * fees / (share * l_total));
        (
            roi(params.t1, self.outcome.fees_1, self.l1),
            roi(params.t2, self.outcome.fees_2, 1.0 - self.l1),
        )
    }

    /// Normalized protocol revenue `t1 fees_1 / (V f)`.
    pub fn revenue(&self, params: &ModelParams, fee: f64) -> f64 {
        let volume = self.outcome.trace_volume();
        if volume <= 0.0 || fee <= 0.0 {
            0.0
        } else {
            params.t1 * self.outcome.fees_1 / (volume * fee)
        }
    }

    /// `|r1 (1 + d) - r2|` scaled by the larger side, and its sign.
    fn residual(&self, params: &ModelParams, l_total: f64) -> (f64, f64) {
        match self.rois(params, l_total) {
            (Some(r1), Some(r2)) => {
                let lhs = r1 * (1.0 + params.d);
                let scale = lhs.abs().max(r2.abs());
                if scale == 0.0 {
                    (0.0, 0.0)
                } else {
                    ((lhs - r2).abs() / scale, (lhs - r2).signum())
                }
            }
            _ => (f64::INFINITY, 0.0),
        }
    }
}

/// Replays at every point of the liquidity grid plus both boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct LiquidityProfile {
    pub setup: MarketSetup,
    pub liquidity_step: f64,
    /// Ascending in `l1`; first is `l1 = 0`, last is `l1 = 1`.
    pub points: Vec<LiquidityPoint>,
}

impl LiquidityProfile {
    pub fn compute(trades: &[TradeEvent], setup: MarketSetup, liquidity_step: f64) -> Result<Self> {
        setup.validate()?;
        let mut shares = vec![0.0];
        shares.extend(liquidity_grid(liquidity_step)?);
        shares.push(1.0);
        let points = shares
            .into_par_iter()
            .map(|l1| {
                Ok(LiquidityPoint {
                    l1,
                    outcome: setup.replay(l1, trades)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LiquidityProfile {
            setup,
            liquidity_step,
            points,
        })
    }

    fn interior(&self) -> &[LiquidityPoint] {
        &self.points[1..self.points.len() - 1]
    }

    /// Grid point closest to `r1 (1 + d) = r2`, with capture at the
    /// boundaries: pool 1 takes everything if it is still no worse at the
    /// largest interior share, and nothing if it is worse at the smallest.
    /// Ties go to the larger `l1`.
    pub fn equilibrium_point(&self, params: &ModelParams) -> &LiquidityPoint {
        let l_total = self.setup.l_total;
        let interior = self.interior();
        let (Some(first), Some(last)) = (interior.first(), interior.last()) else {
            return self.points.last().expect("profile has boundary points");
        };
        let (res_last, sign_last) = last.residual(params, l_total);
        if sign_last >= 0.0 || res_last <= ROI_TOLERANCE {
            return self.points.last().expect("profile has boundary points");
        }
        let (res_first, sign_first) = first.residual(params, l_total);
        if sign_first < 0.0 && res_first > ROI_TOLERANCE {
            return &self.points[0];
        }
        let mut best = first;
        let mut best_res = res_first;
        for point in &interior[1..] {
            let (res, _) = point.residual(params, l_total);
            if res <= best_res + TIE_TOLERANCE {
                best = point;
                best_res = res.min(best_res);
            }
        }
        best
    }

    pub fn equilibrium(&self, params: &ModelParams) -> EquilibriumResult {
        to_result(self.equilibrium_point(params), params, &self.setup)
    }
}

fn to_result(point: &LiquidityPoint, params: &ModelParams, setup: &MarketSetup) -> EquilibriumResult {
    let (r1, r2) = point.rois(params, setup.l_total);
    EquilibriumResult {
        l1: point.l1,
        v1: point.outcome.trace_volume_1(),
        v2: point.outcome.trace_volume_2(),
        r1,
        r2,
        rev1: point.revenue(params, setup.fee),
    }
}

/// Simulated liquidity equilibrium for one scenario.
///
/// With `refine`, a sign change of `r1 (1 + d) - r2` between adjacent grid
/// points is narrowed further by bisection on `l1`.
pub fn find_equilibrium(
    params: &ModelParams,
    trades: &[TradeEvent],
    setup: MarketSetup,
    liquidity_step: f64,
    refine: bool,
) -> Result<EquilibriumResult> {
    params.validate()?;
    let profile = LiquidityProfile::compute(trades, setup, liquidity_step)?;
    let coarse = profile.equilibrium_point(params).clone();
    if !refine || coarse.l1 == 0.0 || coarse.l1 == 1.0 {
        return Ok(to_result(&coarse, params, &setup));
    }
    refine_equilibrium(params, trades, &setup, &profile, coarse)
}

fn refine_equilibrium(
    params: &ModelParams,
    trades: &[TradeEvent],
    setup: &MarketSetup,
    profile: &LiquidityProfile,
    coarse: LiquidityPoint,
) -> Result<EquilibriumResult> {
    let signed = |p: &LiquidityPoint| {
        let (res, sign) = p.residual(params, setup.l_total);
        res * sign
    };
    let idx = profile
        .points
        .iter()
        .position(|p| p.l1 == coarse.l1)
        .expect("coarse point comes from the profile");
    let g0 = signed(&coarse);
    let neighbour = if g0 > 0.0 { idx + 1 } else { idx.saturating_sub(1) };
    let other = &profile.points[neighbour];
    if other.l1 == 0.0 || other.l1 == 1.0 || signed(other) * g0 > 0.0 {
        return Ok(to_result(&coarse, params, setup));
    }
    // g is positive at `lo` and negative at `hi`
    let (mut lo, mut hi) = if g0 > 0.0 { (coarse.clone(), other.clone()) } else { (other.clone(), coarse.clone()) };
    for _ in 0..30 {
        let mid_l1 = 0.5 * (lo.l1 + hi.l1);
        let mid = LiquidityPoint {
            l1: mid_l1,
            outcome: setup.replay(mid_l1, trades)?,
        };
        if signed(&mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let best = if signed(&lo).abs() <= signed(&hi).abs() { lo } else { hi };
    Ok(to_result(&best, params, setup))
}

/// Simulated `l1(t1)` and `rev1(t1)` over a take-rate grid (`base.t1` is
/// ignored).
pub fn sweep_take_rate(
    base: &ModelParams,
    trades: &[TradeEvent],
    setup: MarketSetup,
    take_step: f64,
    liquidity_step: f64,
) -> Result<SweepCurve> {
    base.with_t1(0.0).validate()?;
    let grid = take_rate_grid(take_step)?;
    let profile = LiquidityProfile::compute(trades, setup, liquidity_step)?;
    let samples = grid
        .into_iter()
        .map(|t1| {
            let params = base.with_t1(t1);
            let eq = profile.equilibrium(&params);
            SweepSample {
                t1,
                l1: eq.l1,
                rev1: eq.rev1,
                r1: eq.r1,
                r2: eq.r2,
            }
        })
        .collect();
    Ok(SweepCurve {
        samples,
        grid_step: take_step,
    })
}
