//! Independent brute-force oracles shared by the integration suites. These
//! deliberately avoid the library's solver logic: the settlement oracle
//! enumerates every LP vertex, and the day-ahead oracle scans a dense grid
//! of wind schedules.

use vopi::dispatch::{economic_dispatch, settle_deviation, RegulationParams, VppConfig};
use vopi::qr::PredictionInterval;

/// Exhaustive LP oracle for the settlement program: minimize
/// `-c_D . z_D + c_U . z_U` subject to boxes and
/// `sum z_D - sum z_U = deviation`. An optimum of a bounded LP sits at a
/// vertex, and every vertex fixes at least 3 of the 4 variables at a bound;
/// enumerate all such candidates and keep the cheapest feasible one.
pub fn settle_vertex_oracle(regulation: &[RegulationParams; 2], deviation: f64) -> Option<f64> {
    let caps = [
        regulation[0].down_capacity,
        regulation[1].down_capacity,
        regulation[0].up_capacity,
        regulation[1].up_capacity,
    ];
    let costs = [
        -regulation[0].down_cost,
        -regulation[1].down_cost,
        regulation[0].up_cost,
        regulation[1].up_cost,
    ];
    // Balance coefficients: down positive, up negative.
    let signs = [1.0, 1.0, -1.0, -1.0];

    let mut best: Option<f64> = None;
    for free in 0..4 {
        for mask in 0..8u32 {
            let mut z = [0.0f64; 4];
            let mut bit = 0;
            for (slot, value) in z.iter_mut().enumerate() {
                if slot == free {
                    continue;
                }
                *value = if mask >> bit & 1 == 1 { caps[slot] } else { 0.0 };
                bit += 1;
            }
            let fixed: f64 = (0..4).filter(|&i| i != free).map(|i| signs[i] * z[i]).sum();
            let needed = (deviation - fixed) / signs[free];
            if needed < -1e-9 || needed > caps[free] + 1e-9 {
                continue;
            }
            z[free] = needed.clamp(0.0, caps[free]);
            let cost: f64 = (0..4).map(|i| costs[i] * z[i]).sum();
            best = Some(match best {
                Some(b) => b.min(cost),
                None => cost,
            });
        }
    }
    best
}

/// Worst-case recourse by scanning the interval with a dense wind grid.
pub fn recourse_scan_oracle(
    regulation: &[RegulationParams; 2],
    interval: &PredictionInterval,
    schedule: f64,
    points: usize,
) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for k in 0..=points {
        let w = interval.lower + (interval.upper - interval.lower) * k as f64 / points as f64;
        let cost = settle_deviation(regulation, w - schedule)
            .expect("scan within regulation capacity")
            .rt_cost;
        worst = worst.max(cost);
    }
    worst
}

/// Brute-force day-ahead objective: grid over the wind schedule at `step`
/// MW, dispatch cost plus the worst endpoint recourse at each point. The
/// settlement cost has slope discontinuities where an endpoint deviation
/// crosses zero or a cumulative block capacity; a pure grid misses those
/// minima by up to `step * slope`, so the exact breakpoint schedules are
/// evaluated as well.
pub fn day_ahead_grid_oracle(
    config: &VppConfig,
    interval: &PredictionInterval,
    load: f64,
    step: f64,
) -> f64 {
    let p_min = (load - config.total_generation_capacity()).max(0.0);
    let p_max = config.wind_capacity.min(load).max(p_min);

    let objective = |p: f64| -> f64 {
        let (_, dispatch_cost) = economic_dispatch(&config.generators, load - p).expect("in range");
        let rec_lo = settle_deviation(&config.regulation, interval.lower - p)
            .expect("in range")
            .rt_cost;
        let rec_hi = settle_deviation(&config.regulation, interval.upper - p)
            .expect("in range")
            .rt_cost;
        dispatch_cost + rec_lo.max(rec_hi)
    };

    let n = ((p_max - p_min) / step).ceil() as usize;
    let mut best = f64::INFINITY;
    for k in 0..=n {
        best = best.min(objective((p_min + k as f64 * step).min(p_max)));
    }
    // All subset sums of block capacities cover every possible fill order.
    let down = [config.regulation[0].down_capacity, config.regulation[1].down_capacity];
    let up = [config.regulation[0].up_capacity, config.regulation[1].up_capacity];
    for &w in &[interval.lower, interval.upper] {
        let mut kinks = vec![w];
        for d in [down[0], down[1], down[0] + down[1]] {
            kinks.push(w - d);
        }
        for u in [up[0], up[1], up[0] + up[1]] {
            kinks.push(w + u);
        }
        for p in kinks {
            if p >= p_min - 1e-12 && p <= p_max + 1e-12 {
                best = best.min(objective(p.clamp(p_min, p_max)));
            }
        }
    }
    best
}

/// Deterministic pseudo-random stream for instance generation (independent
/// of the crate's RNG plumbing).
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next_f64(&mut self) -> f64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn in_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}
