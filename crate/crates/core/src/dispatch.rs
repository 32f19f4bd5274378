//! Exact solvers for the two-timescale VPP operation.
//!
//! Day-ahead: split the load between two quadratic-cost generators and a
//! wind schedule `p`, hedging the worst wind realization inside the
//! prediction interval through a linear regulation recourse. Real time:
//! settle the realized deviation `y - p*` with the same regulation blocks.
//! The monetary score is the day-ahead dispatch cost plus the real-time
//! settlement cost; its negative is the bandit reward.
//!
//! All operations are pure functions of their inputs.

use serde::{Deserialize, Serialize};

use crate::qr::PredictionInterval;
use crate::{Error, Result};

/// One dispatchable generator: box capacity and quadratic cost
/// `0.5 * a * x^2 + b * x + c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    /// Maximum output, MW.
    pub capacity: f64,
    /// Quadratic cost coefficient a, $/MW².
    pub quadratic_cost: f64,
    /// Linear cost coefficient b, $/MW.
    pub linear_cost: f64,
    /// Fixed cost c, $ (charged unconditionally; no unit commitment).
    pub fixed_cost: f64,
}

/// One regulation block: per-MW revenue for absorbing excess wind (down)
/// and per-MW cost for covering a deficit (up), with box capacities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegulationParams {
    /// Down-regulation unit revenue c_D, $/MW.
    pub down_cost: f64,
    /// Up-regulation unit cost c_U, $/MW.
    pub up_cost: f64,
    /// Down-regulation capacity, MW.
    pub down_capacity: f64,
    /// Up-regulation capacity, MW.
    pub up_capacity: f64,
}

/// Full two-generator, two-block VPP configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VppConfig {
    pub generators: [GeneratorParams; 2],
    pub regulation: [RegulationParams; 2],
    /// Wind capacity P, MW.
    pub wind_capacity: f64,
}

impl Default for VppConfig {
    /// Reference two-DG setup used throughout tests and as the config-file
    /// default.
    fn default() -> Self {
        Self {
            generators: [
                GeneratorParams {
                    capacity: 70.0,
                    quadratic_cost: 0.27,
                    linear_cost: 40.0,
                    fixed_cost: 3.4,
                },
                GeneratorParams {
                    capacity: 60.0,
                    quadratic_cost: 0.3,
                    linear_cost: 26.5,
                    fixed_cost: 3.0,
                },
            ],
            regulation: [
                RegulationParams {
                    down_cost: 10.0,
                    up_cost: 100.0,
                    down_capacity: 10.0,
                    up_capacity: 10.0,
                },
                RegulationParams {
                    down_cost: 20.0,
                    up_cost: 200.0,
                    down_capacity: 30.0,
                    up_capacity: 30.0,
                },
            ],
            wind_capacity: 30.0,
        }
    }
}

impl VppConfig {
    /// Validate solver preconditions. The no-arbitrage condition
    /// `min c_U > max c_D` is mandatory: endpoint enumeration and greedy
    /// settlement are only optimal under it. Insufficient regulation
    /// capacity against the wind capacity is returned as warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        for (i, g) in self.generators.iter().enumerate() {
            if !(g.quadratic_cost > 0.0) || !(g.capacity > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "generator {i}: quadratic cost and capacity must be positive"
                )));
            }
        }
        if !(self.wind_capacity > 0.0) {
            return Err(Error::InvalidConfig("wind capacity must be positive".into()));
        }
        for (i, r) in self.regulation.iter().enumerate() {
            if r.down_cost < 0.0 || r.up_cost < 0.0 || r.down_capacity < 0.0 || r.up_capacity < 0.0
            {
                return Err(Error::InvalidConfig(format!(
                    "regulation block {i}: costs and capacities must be non-negative"
                )));
            }
        }
        let min_up = self.regulation.iter().map(|r| r.up_cost).fold(f64::INFINITY, f64::min);
        let max_down = self
            .regulation
            .iter()
            .map(|r| r.down_cost)
            .fold(f64::NEG_INFINITY, f64::max);
        if !(min_up > max_down) {
            return Err(Error::InvalidConfig(format!(
                "no-arbitrage violated: min up-regulation cost {min_up} must exceed max down-regulation revenue {max_down}"
            )));
        }

        let mut warnings = Vec::new();
        let total_down: f64 = self.regulation.iter().map(|r| r.down_capacity).sum();
        let total_up: f64 = self.regulation.iter().map(|r| r.up_capacity).sum();
        if total_down < self.wind_capacity {
            warnings.push(format!(
                "total down-regulation capacity {total_down} MW below wind capacity {} MW; large excesses are infeasible",
                self.wind_capacity
            ));
        }
        if total_up < self.wind_capacity {
            warnings.push(format!(
                "total up-regulation capacity {total_up} MW below wind capacity {} MW; large deficits are infeasible",
                self.wind_capacity
            ));
        }
        Ok(warnings)
    }

    pub fn total_generation_capacity(&self) -> f64 {
        self.generators.iter().map(|g| g.capacity).sum()
    }
}

/// Optimal day-ahead decision and its hedging terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DayAheadSolution {
    /// Generator setpoints x, MW.
    pub setpoints: [f64; 2],
    /// Scheduled wind p*, MW.
    pub wind_schedule: f64,
    /// Day-ahead dispatch cost f0^p(x*), $.
    pub da_cost: f64,
    /// Worst-case recourse cost inside the interval, $.
    pub worst_case_recourse: f64,
    /// Wind realization attaining the worst case, MW.
    pub worst_case_wind: f64,
}

/// Regulation block outputs settling one deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RealTimeSolution {
    /// Down-regulation per block, MW.
    pub down: [f64; 2],
    /// Up-regulation per block, MW.
    pub up: [f64; 2],
    /// Settlement cost (negative = net revenue), $.
    pub rt_cost: f64,
}

/// Day-ahead plus real-time cost of operating against one interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonetaryScore {
    /// Total score, $ (lower is better); the agent reward is its negative.
    pub score: f64,
    pub day_ahead: f64,
    pub real_time: f64,
}

const BALANCE_TOL: f64 = 1e-9;
const GOLDEN_TOL: f64 = 1e-6;

/// Minimize total quadratic generation cost subject to
/// `x_1 + x_2 = residual_load` and box constraints, via marginal-price
/// bisection on `x_i(lambda) = clamp((lambda - b_i) / a_i, 0, cap_i)`.
/// Fixed costs are always charged.
pub fn economic_dispatch(
    generators: &[GeneratorParams; 2],
    residual_load: f64,
) -> Result<([f64; 2], f64)> {
    let total_cap: f64 = generators.iter().map(|g| g.capacity).sum();
    if residual_load < -BALANCE_TOL || residual_load > total_cap + BALANCE_TOL {
        return Err(Error::Infeasible(format!(
            "residual load {residual_load} MW outside generation range [0, {total_cap}]"
        )));
    }
    let residual_load = residual_load.clamp(0.0, total_cap);

    let x_of = |lambda: f64| -> [f64; 2] {
        let mut x = [0.0; 2];
        for (i, g) in generators.iter().enumerate() {
            x[i] = ((lambda - g.linear_cost) / g.quadratic_cost).clamp(0.0, g.capacity);
        }
        x
    };

    let mut lo = generators.iter().map(|g| g.linear_cost).fold(f64::INFINITY, f64::min) - 1.0;
    let mut hi = generators
        .iter()
        .map(|g| g.linear_cost + g.quadratic_cost * g.capacity)
        .fold(f64::NEG_INFINITY, f64::max)
        + 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let total: f64 = x_of(mid).iter().sum();
        if total < residual_load {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    let lambda = 0.5 * (lo + hi);
    let mut x = x_of(lambda);

    // Distribute the residual bisection mismatch across interior units.
    let mismatch = residual_load - (x[0] + x[1]);
    if mismatch.abs() > 0.0 {
        let interior: Vec<usize> = (0..2)
            .filter(|&i| x[i] > 1e-12 && x[i] < generators[i].capacity - 1e-12)
            .collect();
        if interior.is_empty() {
            x[0] = (x[0] + mismatch).clamp(0.0, generators[0].capacity);
        } else {
            let share = mismatch / interior.len() as f64;
            for &i in &interior {
                x[i] = (x[i] + share).clamp(0.0, generators[i].capacity);
            }
        }
    }

    let cost: f64 = generators
        .iter()
        .zip(&x)
        .map(|(g, &xi)| 0.5 * g.quadratic_cost * xi * xi + g.linear_cost * xi + g.fixed_cost)
        .sum();
    Ok((x, cost))
}

/// Settle a wind deviation with the regulation blocks by merit order:
/// excess wind (`deviation > 0`) fills down-regulation in decreasing
/// revenue order, a deficit fills up-regulation in increasing cost order.
/// Optimal under the no-arbitrage condition; never mixes directions.
pub fn settle_deviation(
    regulation: &[RegulationParams; 2],
    deviation: f64,
) -> Result<RealTimeSolution> {
    let mut down = [0.0; 2];
    let mut up = [0.0; 2];

    if deviation.abs() > BALANCE_TOL {
        if deviation > 0.0 {
            let total: f64 = regulation.iter().map(|r| r.down_capacity).sum();
            if deviation > total + BALANCE_TOL {
                return Err(Error::Infeasible(format!(
                    "wind excess {deviation} MW exceeds down-regulation capacity {total} MW"
                )));
            }
            // Stable sort keeps block index order on ties.
            let mut order: Vec<usize> = vec![0, 1];
            order.sort_by(|&a, &b| {
                regulation[b]
                    .down_cost
                    .partial_cmp(&regulation[a].down_cost)
                    .unwrap()
            });
            let mut remaining = deviation.min(total);
            for i in order {
                let take = remaining.min(regulation[i].down_capacity);
                down[i] = take;
                remaining -= take;
                if remaining <= 0.0 {
                    break;
                }
            }
        } else {
            let deficit = -deviation;
            let total: f64 = regulation.iter().map(|r| r.up_capacity).sum();
            if deficit > total + BALANCE_TOL {
                return Err(Error::Infeasible(format!(
                    "wind deficit {deficit} MW exceeds up-regulation capacity {total} MW"
                )));
            }
            let mut order: Vec<usize> = vec![0, 1];
            order.sort_by(|&a, &b| {
                regulation[a]
                    .up_cost
                    .partial_cmp(&regulation[b].up_cost)
                    .unwrap()
            });
            let mut remaining = deficit.min(total);
            for i in order {
                let take = remaining.min(regulation[i].up_capacity);
                up[i] = take;
                remaining -= take;
                if remaining <= 0.0 {
                    break;
                }
            }
        }
    }

    let rt_cost: f64 = regulation
        .iter()
        .zip(down.iter().zip(&up))
        .map(|(r, (d, u))| -r.down_cost * d + r.up_cost * u)
        .sum();
    Ok(RealTimeSolution { down, up, rt_cost })
}

/// Worst-case recourse cost over the interval for a fixed schedule `p`.
///
/// The inner settlement cost is monotone nonincreasing in the wind
/// realization under no-arbitrage, so the maximum sits at an endpoint (the
/// lower one); both endpoints are evaluated as a cross-check and ties
/// resolve to the lower endpoint.
pub fn worst_case_recourse(
    regulation: &[RegulationParams; 2],
    interval: &PredictionInterval,
    wind_schedule: f64,
) -> Result<(f64, f64)> {
    let at_lower = settle_deviation(regulation, interval.lower - wind_schedule)?.rt_cost;
    let at_upper = settle_deviation(regulation, interval.upper - wind_schedule)?.rt_cost;
    if at_upper > at_lower {
        Ok((at_upper, interval.upper))
    } else {
        Ok((at_lower, interval.lower))
    }
}

/// Solve the day-ahead robust program: minimize dispatch cost of
/// `load - p` plus the worst-case recourse over the interval, for
/// `p in [max(0, load - total_generation), min(P, load)]`.
///
/// The objective is convex in `p` (quadratic dispatch plus convex
/// piecewise-linear recourse); golden-section search down to 1e-6 MW is
/// refined by evaluating every recourse breakpoint that falls in range.
pub fn solve_day_ahead(
    config: &VppConfig,
    interval: &PredictionInterval,
    load: f64,
) -> Result<DayAheadSolution> {
    if !(load > 0.0) {
        return Err(Error::Infeasible(format!("load must be positive, got {load}")));
    }
    let total_gen = config.total_generation_capacity();
    let p_min = (load - total_gen).max(0.0);
    let p_max = config.wind_capacity.min(load);
    if p_min > p_max + BALANCE_TOL {
        return Err(Error::Infeasible(format!(
            "no feasible wind schedule: need p in [{p_min}, {p_max}] for load {load} MW"
        )));
    }
    let p_max = p_max.max(p_min);

    let objective = |p: f64| -> Result<f64> {
        let (_, dispatch_cost) = economic_dispatch(&config.generators, load - p)?;
        let (recourse, _) = worst_case_recourse(&config.regulation, interval, p)?;
        Ok(dispatch_cost + recourse)
    };

    let mut best_p = golden_section(&objective, p_min, p_max)?;
    let mut best_obj = objective(best_p)?;

    // Candidate refinement: recourse kinks at each endpoint's deviation
    // crossing zero or a cumulative block capacity, plus the range ends.
    let mut candidates = vec![p_min, p_max];
    for &w in &[interval.lower, interval.upper] {
        candidates.push(w);
        let mut down_cum = 0.0;
        let mut down_order: Vec<usize> = vec![0, 1];
        down_order.sort_by(|&a, &b| {
            config.regulation[b]
                .down_cost
                .partial_cmp(&config.regulation[a].down_cost)
                .unwrap()
        });
        for &i in &down_order {
            down_cum += config.regulation[i].down_capacity;
            candidates.push(w - down_cum);
        }
        let mut up_cum = 0.0;
        let mut up_order: Vec<usize> = vec![0, 1];
        up_order.sort_by(|&a, &b| {
            config.regulation[a]
                .up_cost
                .partial_cmp(&config.regulation[b].up_cost)
                .unwrap()
        });
        for &i in &up_order {
            up_cum += config.regulation[i].up_capacity;
            candidates.push(w + up_cum);
        }
    }
    for p in candidates {
        if p < p_min - BALANCE_TOL || p > p_max + BALANCE_TOL {
            continue;
        }
        let p = p.clamp(p_min, p_max);
        let value = objective(p)?;
        if value < best_obj - 1e-12 {
            best_obj = value;
            best_p = p;
        }
    }

    let (setpoints, da_cost) = economic_dispatch(&config.generators, load - best_p)?;
    let (recourse, worst_w) = worst_case_recourse(&config.regulation, interval, best_p)?;
    Ok(DayAheadSolution {
        setpoints,
        wind_schedule: best_p,
        da_cost,
        worst_case_recourse: recourse,
        worst_case_wind: worst_w,
    })
}

/// Full monetary score of operating against one interval: solve the
/// day-ahead program, then settle the realized deviation `y - p*`.
pub fn monetary_score(
    config: &VppConfig,
    interval: &PredictionInterval,
    load: f64,
    realization: f64,
) -> Result<MonetaryScore> {
    if realization < -BALANCE_TOL || realization > config.wind_capacity + BALANCE_TOL {
        return Err(Error::InvalidArgument(format!(
            "realization {realization} MW outside [0, {}]",
            config.wind_capacity
        )));
    }
    let da = solve_day_ahead(config, interval, load)?;
    let rt = settle_deviation(&config.regulation, realization - da.wind_schedule)?;
    Ok(MonetaryScore {
        score: da.da_cost + rt.rt_cost,
        day_ahead: da.da_cost,
        real_time: rt.rt_cost,
    })
}

/// Golden-section minimization of a convex objective on `[lo, hi]`.
fn golden_section<F>(objective: &F, lo: f64, hi: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if hi - lo < GOLDEN_TOL {
        return Ok(0.5 * (lo + hi));
    }
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut a = lo;
    let mut b = hi;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = objective(x1)?;
    let mut f2 = objective(x2)?;
    while b - a > GOLDEN_TOL {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = objective(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = objective(x2)?;
        }
    }
    Ok(0.5 * (a + b))
}
