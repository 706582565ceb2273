//! Take-rate grids and the curves sampled over them.

use crate::error::{Error, Result};

/// One point of a take-rate sweep. ROIs are `None` where the pool is empty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSample {
    pub t1: f64,
    pub l1: f64,
    pub rev1: f64,
    pub r1: Option<f64>,
    pub r2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCurve {
    pub samples: Vec<SweepSample>,
    pub grid_step: f64,
}

impl SweepCurve {
    /// Index of the revenue-maximizing sample; ties go to the smaller take rate.
    pub fn argmax_index(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, s) in self.samples.iter().enumerate() {
            match best {
                Some(b) if self.samples[b].rev1 >= s.rev1 => {}
                _ => best = Some(i),
            }
        }
        best
    }

    pub fn argmax(&self) -> Option<&SweepSample> {
        self.argmax_index().map(|i| &self.samples[i])
    }

    /// Largest take rate at which pool 1 still holds all liquidity.
    pub fn full_retention_t1(&self) -> Option<f64> {
        self.samples
            .iter()
            .take_while(|s| s.l1 >= 1.0)
            .last()
            .map(|s| s.t1)
    }

    pub fn sample_at(&self, t1: f64) -> Option<&SweepSample> {
        self.samples
            .iter()
            .find(|s| (s.t1 - t1).abs() <= 1e-9)
    }
}

pub(crate) fn check_step(name: &str, step: f64) -> Result<()> {
    if !(step > 0.0 && step <= 0.5) {
        return Err(Error::param(name, format!("step must lie in (0, 0.5], got {step}")));
    }
    Ok(())
}

fn steps_in_unit(step: f64) -> usize {
    let n = (1.0 / step).round();
    if (n * step - 1.0).abs() <= 1e-9 {
        n as usize
    } else {
        (1.0 / step).floor() as usize
    }
}

/// `{0, step, 2 step, ...}` up to and including 1 when it lies on the grid.
pub fn take_rate_grid(step: f64) -> Result<Vec<f64>> {
    check_step("take_step", step)?;
    let n = steps_in_unit(step);
    Ok((0..=n).map(|k| grid_point(k, n, step)).collect())
}

/// Interior liquidity grid `{step, 2 step, ..., 1 - step}`.
pub fn liquidity_grid(step: f64) -> Result<Vec<f64>> {
    check_step("liquidity_step", step)?;
    let n = steps_in_unit(step);
    let mut grid: Vec<f64> = (1..=n).map(|k| grid_point(k, n, step)).collect();
    if grid.last().is_some_and(|&l| l >= 1.0) {
        grid.pop();
    }
    Ok(grid)
}

fn grid_point(k: usize, n: usize, step: f64) -> f64 {
    // k / n when the grid divides the unit interval exactly, so endpoints are exact
    if (n as f64 * step - 1.0).abs() <= 1e-9 {
        k as f64 / n as f64
    } else {
        k as f64 * step
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_have_exact_endpoints() {
        let g = take_rate_grid(0.01).unwrap();
        assert_eq!(g.len(), 101);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[100], 1.0);
        assert_eq!(g[10], 0.1);

        let l = liquidity_grid(0.005).unwrap();
        assert_eq!(l.len(), 199);
        assert_eq!(l[0], 0.005);
        assert!((l[198] - 0.995).abs() < 1e-15);
    }

    #[test]
    fn grid_with_non_dividing_step() {
        let g = take_rate_grid(0.3).unwrap();
        assert_eq!(g.len(), 4);
        assert!((g[3] - 0.9).abs() < 1e-12);
        let l = liquidity_grid(0.3).unwrap();
        assert_eq!(l.len(), 3);
    }

    #[test]
    fn rejects_bad_steps() {
        assert!(take_rate_grid(0.0).is_err());
        assert!(take_rate_grid(0.6).is_err());
        assert!(liquidity_grid(-0.1).is_err());
    }

    #[test]
    fn argmax_prefers_smaller_take_rate_on_ties() {
        let s = |t1, rev1| SweepSample { t1, l1: 1.0, rev1, r1: None, r2: None };
        let curve = SweepCurve {
            samples: vec![s(0.0, 0.0), s(0.1, 0.1), s(0.2, 0.1)],
            grid_step: 0.1,
        };
        assert_eq!(curve.argmax_index(), Some(1));
        assert_eq!(curve.full_retention_t1(), Some(0.2));
    }
}
