use rand::Rng;

use crate::bench::{stream_rng, Stream, MAX_DRAWS};
use crate::error::{FarmError, Result};
use crate::farm::{feasibility_check, FarmRegion, Layout};

/// Keeps every turbine that is inside the region and clear of the turbines
/// kept before it; redraws the rest uniformly until they fit.
pub fn repair_by_resampling(layout: &Layout, region: &FarmRegion, seed: u64) -> Result<Layout> {
    if feasibility_check(layout, region).is_empty() {
        return Ok(layout.clone());
    }
    let mut rng = stream_rng(seed, Stream::Repair);
    let sep = region.min_separation;
    let fits = |placed: &[(f64, f64)], c: (f64, f64)| placed.iter().all(|p| (p.0 - c.0).hypot(p.1 - c.1) >= sep);
    // Decide what stays before drawing, so a redrawn turbine never displaces
    // one that was fine.
    let mut slots: Vec<Option<(f64, f64)>> = Vec::with_capacity(layout.len());
    let mut placed: Vec<(f64, f64)> = Vec::with_capacity(layout.len());
    for c in layout.points() {
        if region.contains(c.0, c.1) && fits(&placed, c) {
            placed.push(c);
            slots.push(Some(c));
        } else {
            slots.push(None);
        }
    }
    let mut draws = 0;
    for slot in slots.iter_mut().filter(|s| s.is_none()) {
        loop {
            if draws >= MAX_DRAWS {
                return Err(FarmError::InfeasibleDensity {
                    n: layout.len(),
                    draws,
                });
            }
            draws += 1;
            let c = (rng.random_range(0.0..=region.x_max), rng.random_range(0.0..=region.y_max));
            if fits(&placed, c) {
                placed.push(c);
                *slot = Some(c);
                break;
            }
        }
    }
    let kept: Vec<(f64, f64)> = slots.into_iter().flatten().collect();
    Layout::from_points(&kept)
}

/// Removes small residual spacing violations left by the outer solver by
/// pushing offending pairs apart, then clips into the region. Returns
/// `None` if a feasible layout is not reached.
pub fn round_to_feasible(layout: &Layout, region: &FarmRegion) -> Option<Layout> {
    let n = layout.len();
    let mut pts: Vec<(f64, f64)> = layout.points().collect();
    let sep = region.min_separation;
    // Overshoot slightly so the pushed pair clears the constraint after
    // floating-point rounding.
    let target = sep * (1.0 + 1e-9);
    for _ in 0..1000 {
        for p in &mut pts {
            p.0 = p.0.clamp(0.0, region.x_max);
            p.1 = p.1.clamp(0.0, region.y_max);
        }
        let candidate = Layout::from_points(&pts).ok()?;
        if feasibility_check(&candidate, region).is_empty() {
            return Some(candidate);
        }
        for i in 0..n {
            for j in i + 1..n {
                let (dx, dy) = (pts[j].0 - pts[i].0, pts[j].1 - pts[i].1);
                let dist = dx.hypot(dy);
                if dist >= sep {
                    continue;
                }
                let (ux, uy) = if dist > 0.0 { (dx / dist, dy / dist) } else { (1.0, 0.0) };
                let push = 0.5 * (target - dist);
                pts[i].0 -= push * ux;
                pts[i].1 -= push * uy;
                pts[j].0 += push * ux;
                pts[j].1 += push * uy;
            }
        }
    }
    None
}
