//! Constant-product pool mechanics: quoting, swap execution, optimal
//! multi-pool routing and two-pool arbitrage.
//!
//! All quantities are `f64`. Fees are paid into a per-pool ledger and are not
//! compounded into the reserves, so the reserve product is invariant under
//! every swap.

use crate::error::{Error, Result};

/// Relative price gap (fee-adjusted) below which two pools are treated as
/// already arbitrage-free. Gaps this small are floating-point residue.
pub const ARB_MIN_GAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Token-0 in, token-1 out.
    AToB,
    /// Token-1 in, token-0 out.
    BToA,
}

impl Direction {
    pub fn reverse(self) -> Self {
        match self {
            Direction::AToB => Direction::BToA,
            Direction::BToA => Direction::AToB,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolState {
    pub reserve_a: f64,
    pub reserve_b: f64,
    pub fee: f64,
    pub take_rate: f64,
    pub sticky_rate: f64,
    pub fee_ledger_a: f64,
    pub fee_ledger_b: f64,
}

impl PoolState {
    pub fn new(reserve_a: f64, reserve_b: f64, fee: f64) -> Result<Self> {
        if !(reserve_a.is_finite() && reserve_a >= 0.0) {
            return Err(Error::param("reserve_a", format!("must be a nonnegative real, got {reserve_a}")));
        }
        if !(reserve_b.is_finite() && reserve_b >= 0.0) {
            return Err(Error::param("reserve_b", format!("must be a nonnegative real, got {reserve_b}")));
        }
        if !(0.0..1.0).contains(&fee) {
            return Err(Error::param("fee", format!("must lie in [0, 1), got {fee}")));
        }
        Ok(PoolState {
            reserve_a,
            reserve_b,
            fee,
            take_rate: 0.0,
            sticky_rate: 0.0,
            fee_ledger_a: 0.0,
            fee_ledger_b: 0.0,
        })
    }

    /// A pool holding `size` units of token-0 at marginal price `price`
    /// (token-1 per token-0).
    pub fn balanced(size: f64, price: f64, fee: f64) -> Result<Self> {
        if !(price.is_finite() && price > 0.0) {
            return Err(Error::param("price", format!("must be positive, got {price}")));
        }
        PoolState::new(size, size * price, fee)
    }

    pub fn with_take_rate(mut self, take_rate: f64) -> Self {
        self.take_rate = take_rate;
        self
    }

    pub fn with_sticky_rate(mut self, sticky_rate: f64) -> Self {
        self.sticky_rate = sticky_rate;
        self
    }

    pub fn is_empty(&self) -> bool {
        self.reserve_a <= 0.0 || self.reserve_b <= 0.0
    }

    /// Marginal price of token-0 in token-1, ignoring fees.
    pub fn price(&self) -> f64 {
        self.reserve_b / self.reserve_a
    }

    pub fn product(&self) -> f64 {
        self.reserve_a * self.reserve_b
    }

    /// (input-side reserve, output-side reserve) for a trade direction.
    pub fn oriented(&self, direction: Direction) -> (f64, f64) {
        match direction {
            Direction::AToB => (self.reserve_a, self.reserve_b),
            Direction::BToA => (self.reserve_b, self.reserve_a),
        }
    }

    /// Fee-adjusted marginal output per unit input at zero trade size.
    pub fn marginal_rate(&self, direction: Direction) -> f64 {
        let (r_in, r_out) = self.oriented(direction);
        (1.0 - self.fee) * r_out / r_in
    }

    /// Output of swapping `input` through the pool: `B - AB / (A + (1-f)x)`
    /// with `(A, B)` oriented by `direction`.
    pub fn quote(&self, input: f64, direction: Direction) -> Result<f64> {
        check_input(input)?;
        if self.is_empty() {
            return Err(Error::EmptyPool);
        }
        let (r_in, r_out) = self.oriented(direction);
        let effective = (1.0 - self.fee) * input;
        Ok(r_out * effective / (r_in + effective))
    }

    /// Applies a swap in place and returns the output amount.
    pub fn apply_swap(&mut self, input: f64, direction: Direction) -> Result<f64> {
        check_input(input)?;
        if self.is_empty() {
            return Err(Error::EmptyPool);
        }
        if input == 0.0 {
            return Ok(0.0);
        }
        let (r_in, r_out) = self.oriented(direction);
        let effective = (1.0 - self.fee) * input;
        let new_in = r_in + effective;
        let output = r_out * effective / new_in;
        let new_out = r_out * (r_in / new_in);
        let fee_paid = self.fee * input;
        match direction {
            Direction::AToB => {
                self.reserve_a = new_in;
                self.reserve_b = new_out;
                self.fee_ledger_a += fee_paid;
            }
            Direction::BToA => {
                self.reserve_b = new_in;
                self.reserve_a = new_out;
                self.fee_ledger_b += fee_paid;
            }
        }
        Ok(output)
    }

    /// Value-semantic swap: returns the output and the post-trade pool.
    pub fn execute_swap(&self, input: f64, direction: Direction) -> Result<(f64, PoolState)> {
        let mut next = self.clone();
        let out = next.apply_swap(input, direction)?;
        Ok((out, next))
    }
}

fn check_input(input: f64) -> Result<()> {
    if input.is_nan() || input < 0.0 || input.is_infinite() {
        return Err(Error::Domain(format!("trade input must be a finite nonnegative amount, got {input}")));
    }
    Ok(())
}

/// Per-pool allocation of one trade.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteSplit {
    pub amounts: Vec<f64>,
    pub total_out: f64,
}

/// Splits `trade` across `pools` to maximize total output.
///
/// Solves the equal-marginal-rate (Lagrange) conditions on an active set.
/// Pools are ranked by fee-adjusted marginal rate at zero size and admitted
/// one at a time while the next pool's zero-size rate still beats the common
/// marginal rate of the current support, so no allocation is negative. Empty
/// pools receive nothing.
pub fn optimal_split(pools: &[PoolState], trade: f64, direction: Direction) -> Result<RouteSplit> {
    if pools.is_empty() {
        return Err(Error::Domain("optimal_split needs at least one pool".into()));
    }
    check_input(trade)?;
    let mut amounts = vec![0.0; pools.len()];
    if trade == 0.0 {
        return Ok(RouteSplit { amounts, total_out: 0.0 });
    }

    // (index, A/(1-f), sqrt(marginal rate))
    let mut ranked: Vec<(usize, f64, f64)> = pools
        .iter()
        .enumerate()
        .filter(|(_, p)| !p.is_empty())
        .map(|(i, p)| {
            let (r_in, _) = p.oriented(direction);
            (i, r_in / (1.0 - p.fee), p.marginal_rate(direction).sqrt())
        })
        .collect();
    if ranked.is_empty() {
        return Err(Error::EmptyPool);
    }
    ranked.sort_by(|x, y| y.2.total_cmp(&x.2));

    // x_i = (A_i/g_i) * [T*sqrt(m_i) + sum_j (A_j/g_j)(sqrt(m_i) - sqrt(m_j))] / S
    // with S = sum_j (A_j/g_j) sqrt(m_j); written this way there is no
    // cancellation between large terms when the pools are nearly balanced.
    let numerator = |support: &[(usize, f64, f64)], root_m: f64| -> f64 {
        support
            .iter()
            .fold(trade * root_m, |acc, &(_, w, rm)| acc + w * (root_m - rm))
    };
    let mut active = 1;
    while active < ranked.len() && numerator(&ranked[..active], ranked[active].2) > 0.0 {
        active += 1;
    }
    let support = &ranked[..active];
    if let [(only, _, _)] = support {
        amounts[*only] = trade;
    } else {
        let s: f64 = support.iter().map(|&(_, w, rm)| w * rm).sum();
        for &(i, w, rm) in support {
            amounts[i] = (w * numerator(support, rm) / s).max(0.0);
        }
    }

    let mut total_out = 0.0;
    for (pool, &x) in pools.iter().zip(&amounts) {
        if x > 0.0 {
            total_out += pool.quote(x, direction)?;
        }
    }
    Ok(RouteSplit { amounts, total_out })
}

/// Description of an executed round-trip arbitrage. Token-0 goes into
/// `entry_pool` (index 0 or 1), the token-1 proceeds go into the other pool.
#[derive(Debug, Clone, PartialEq)]
pub struct ArbTrade {
    pub entry_pool: usize,
    pub input: f64,
    pub intermediate: f64,
    pub output: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arbitrage {
    pub trade: ArbTrade,
    /// Profit in token-0, leaves the system.
    pub profit: f64,
    pub pool1: PoolState,
    pub pool2: PoolState,
}

/// Composite round trip `x -> z(x) = K x / (M + N x)` when swapping token-0
/// into `entry` and the proceeds into `exit`.
fn round_trip_coefficients(entry: &PoolState, exit: &PoolState) -> (f64, f64, f64) {
    let (g_in, g_out) = (1.0 - entry.fee, 1.0 - exit.fee);
    let k = g_in * g_out * exit.reserve_a * entry.reserve_b;
    let m = entry.reserve_a * exit.reserve_b;
    let n = g_in * (exit.reserve_b + g_out * entry.reserve_b);
    (k, m, n)
}

/// True when no round trip in either direction beats the fee band.
pub fn within_no_arb_band(pool1: &PoolState, pool2: &PoolState) -> bool {
    let (k12, m12, _) = round_trip_coefficients(pool1, pool2);
    let (k21, m21, _) = round_trip_coefficients(pool2, pool1);
    k12 <= m12 * (1.0 + ARB_MIN_GAP) && k21 <= m21 * (1.0 + ARB_MIN_GAP)
}

/// Finds and executes the profit-maximizing round trip between two pools.
///
/// The round trip composes two constant-product curves into
/// `z(x) = K x / (M + N x)`, so profit `z(x) - x` is concave with maximizer
/// `x* = (sqrt(KM) - M) / N`, positive iff `K > M`.
pub fn arbitrage(pool1: &PoolState, pool2: &PoolState) -> Result<Option<Arbitrage>> {
    if pool1.is_empty() || pool2.is_empty() {
        return Err(Error::EmptyPool);
    }
    for entry_pool in 0..2 {
        let (entry, exit) = if entry_pool == 0 { (pool1, pool2) } else { (pool2, pool1) };
        let (k, m, n) = round_trip_coefficients(entry, exit);
        if k <= m * (1.0 + ARB_MIN_GAP) {
            continue;
        }
        let input = m * ((k / m).sqrt() - 1.0) / n;
        if !(input > 0.0) {
            continue;
        }
        let mut entry_next = entry.clone();
        let mut exit_next = exit.clone();
        let intermediate = entry_next.apply_swap(input, Direction::AToB)?;
        let output = exit_next.apply_swap(intermediate, Direction::BToA)?;
        let profit = output - input;
        if profit <= 0.0 {
            continue;
        }
        let (pool1, pool2) = if entry_pool == 0 {
            (entry_next, exit_next)
        } else {
            (exit_next, entry_next)
        };
        return Ok(Some(Arbitrage {
            trade: ArbTrade { entry_pool, input, intermediate, output },
            profit,
            pool1,
            pool2,
        }));
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool(a: f64, b: f64, f: f64) -> PoolState {
        PoolState::new(a, b, f).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    // Direct evaluation of B - AB/(A + (1-f)x).
    fn trade_fn(a: f64, b: f64, f: f64, x: f64) -> f64 {
        b - a * b / (a + (1.0 - f) * x)
    }

    #[test]
    fn quote_examples() {
        assert_eq!(pool(100.0, 100.0, 0.0).quote(0.0, Direction::AToB).unwrap(), 0.0);
        assert!((pool(100.0, 100.0, 0.0).quote(100.0, Direction::AToB).unwrap() - 50.0).abs() < 1e-12);
        let out = pool(1000.0, 1000.0, 0.003).quote(10.0, Direction::AToB).unwrap();
        assert!((out - trade_fn(1000.0, 1000.0, 0.003, 10.0)).abs() < 1e-12);
        assert!((out - 9.87158).abs() < 1e-5);
    }

    #[test]
    fn quote_orients_by_direction() {
        let p = pool(100.0, 400.0, 0.0);
        assert!((p.quote(10.0, Direction::AToB).unwrap() - trade_fn(100.0, 400.0, 0.0, 10.0)).abs() < 1e-12);
        assert!((p.quote(10.0, Direction::BToA).unwrap() - trade_fn(400.0, 100.0, 0.0, 10.0)).abs() < 1e-12);
    }

    #[test]
    fn quote_rejects_negative_input() {
        assert!(matches!(pool(1.0, 1.0, 0.0).quote(-1.0, Direction::AToB), Err(Error::Domain(_))));
        assert!(matches!(pool(1.0, 1.0, 0.0).quote(f64::NAN, Direction::AToB), Err(Error::Domain(_))));
    }

    #[test]
    fn quote_on_empty_pool_errors() {
        assert!(matches!(pool(0.0, 0.0, 0.0).quote(1.0, Direction::AToB), Err(Error::EmptyPool)));
    }

    #[test]
    fn output_strictly_below_reserve() {
        let p = pool(10.0, 10.0, 0.0);
        assert!(p.quote(1e12, Direction::AToB).unwrap() < 10.0);
    }

    #[test]
    fn execute_swap_examples() {
        let (out, next) = pool(100.0, 100.0, 0.0).execute_swap(100.0, Direction::AToB).unwrap();
        assert!((out - 50.0).abs() < 1e-12);
        assert!((next.reserve_a - 200.0).abs() < 1e-12);
        assert!((next.reserve_b - 50.0).abs() < 1e-12);
        assert_eq!(next.fee_ledger_a, 0.0);

        let (out, next) = pool(1000.0, 1000.0, 0.003).execute_swap(10.0, Direction::AToB).unwrap();
        assert!((out - trade_fn(1000.0, 1000.0, 0.003, 10.0)).abs() < 1e-12);
        assert!((next.fee_ledger_a - 0.03).abs() < 1e-15);
        assert!((next.reserve_a - (1000.0 + 0.997 * 10.0)).abs() < 1e-12);
        assert!(rel(next.product(), 1e6) < 1e-12);

        let p = pool(3.0, 7.0, 0.01);
        let (out, next) = p.execute_swap(0.0, Direction::BToA).unwrap();
        assert_eq!(out, 0.0);
        assert_eq!(next, p);
    }

    #[test]
    fn fee_for_b_to_a_lands_in_b_ledger() {
        let (_, next) = pool(50.0, 80.0, 0.01).execute_swap(4.0, Direction::BToA).unwrap();
        assert_eq!(next.fee_ledger_a, 0.0);
        assert!((next.fee_ledger_b - 0.04).abs() < 1e-15);
    }

    fn brute_force_two_pool(p: &[PoolState], t: f64, dir: Direction) -> f64 {
        let steps = 10_000;
        (0..=steps)
            .map(|k| {
                let x = t * k as f64 / steps as f64;
                let y = t - x;
                trade_fn_dir(&p[0], x, dir) + trade_fn_dir(&p[1], y, dir)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn trade_fn_dir(p: &PoolState, x: f64, dir: Direction) -> f64 {
        let (a, b) = p.oriented(dir);
        trade_fn(a, b, p.fee, x)
    }

    #[test]
    fn split_proportional_for_balanced_pools() {
        let pools = [pool(100.0, 100.0, 0.003), pool(300.0, 300.0, 0.003)];
        let split = optimal_split(&pools, 40.0, Direction::AToB).unwrap();
        assert!(rel(split.amounts[0], 10.0) < 1e-12);
        assert!(rel(split.amounts[1], 30.0) < 1e-12);
    }

    #[test]
    fn split_single_pool_takes_everything() {
        let split = optimal_split(&[pool(5.0, 9.0, 0.003)], 25.0, Direction::BToA).unwrap();
        assert_eq!(split.amounts, vec![25.0]);
    }

    #[test]
    fn split_imbalanced_matches_grid_oracle() {
        let pools = [pool(100.0, 100.0, 0.0), pool(200.0, 180.0, 0.0)];
        let split = optimal_split(&pools, 30.0, Direction::AToB).unwrap();
        assert!((split.amounts[0] - 13.8966).abs() < 1e-4);
        assert!((split.amounts[1] - 16.1034).abs() < 1e-4);
        let best = brute_force_two_pool(&pools, 30.0, Direction::AToB);
        assert!(split.total_out >= best - 1e-9 * 30.0);
    }

    #[test]
    fn split_excludes_pool_with_worse_price() {
        // Pool 2's price is far below pool 1's; a small trade stays in pool 1.
        let pools = [pool(100.0, 100.0, 0.0), pool(100.0, 50.0, 0.0)];
        let split = optimal_split(&pools, 1.0, Direction::AToB).unwrap();
        assert_eq!(split.amounts[1], 0.0);
        assert!((split.amounts[0] - 1.0).abs() < 1e-12);
        let best = brute_force_two_pool(&pools, 1.0, Direction::AToB);
        assert!(split.total_out >= best - 1e-9);
    }

    #[test]
    fn split_skips_empty_pools() {
        let pools = [pool(0.0, 0.0, 0.003), pool(10.0, 10.0, 0.003)];
        let split = optimal_split(&pools, 2.0, Direction::AToB).unwrap();
        assert_eq!(split.amounts, vec![0.0, 2.0]);
    }

    #[test]
    fn split_errors() {
        assert!(matches!(optimal_split(&[], 1.0, Direction::AToB), Err(Error::Domain(_))));
        assert!(optimal_split(&[pool(1.0, 1.0, 0.0)], -2.0, Direction::AToB).is_err());
    }

    fn brute_force_arb_profit(entry: &PoolState, exit: &PoolState) -> f64 {
        let profit = |x: f64| {
            let y = trade_fn(entry.reserve_a, entry.reserve_b, entry.fee, x);
            trade_fn(exit.reserve_b, exit.reserve_a, exit.fee, y) - x
        };
        let (mut lo, mut hi) = (0.0, entry.reserve_a.max(exit.reserve_a));
        for _ in 0..300 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if profit(m1) < profit(m2) {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        profit(0.5 * (lo + hi))
    }

    #[test]
    fn no_arbitrage_between_identical_prices() {
        assert!(arbitrage(&pool(100.0, 100.0, 0.003), &pool(500.0, 500.0, 0.003)).unwrap().is_none());
    }

    #[test]
    fn arbitrage_example() {
        let p1 = pool(100.0, 100.0, 0.0);
        let p2 = pool(100.0, 121.0, 0.0);
        let arb = arbitrage(&p1, &p2).unwrap().unwrap();
        assert_eq!(arb.trade.entry_pool, 1);
        assert!(rel(arb.trade.input, 1000.0 / 221.0) < 1e-12);
        assert!((arb.profit - 0.45249).abs() < 1e-5);
        assert!(rel(arb.profit, brute_force_arb_profit(&p2, &p1)) < 1e-6);
        assert!((arb.pool1.price() - 1.1075).abs() < 1e-3);
        assert!((arb.pool2.price() - 1.1075).abs() < 1e-3);
        assert!(within_no_arb_band(&arb.pool1, &arb.pool2));
        assert!(arbitrage(&arb.pool1, &arb.pool2).unwrap().is_none());
    }

    #[test]
    fn no_arbitrage_inside_fee_band() {
        let p1 = pool(1000.0, 1000.0, 0.003);
        let p2 = pool(1000.0, 1001.0, 0.003);
        assert!(arbitrage(&p1, &p2).unwrap().is_none());
        // every round-trip size loses money
        for k in 1..=100 {
            let x = k as f64;
            for (a, b) in [(&p1, &p2), (&p2, &p1)] {
                let y = a.quote(x, Direction::AToB).unwrap();
                assert!(b.quote(y, Direction::BToA).unwrap() < x);
            }
        }
    }

    #[test]
    fn arbitrage_rejects_empty_pool() {
        assert!(arbitrage(&pool(0.0, 0.0, 0.0), &pool(1.0, 1.0, 0.0)).is_err());
    }
}
