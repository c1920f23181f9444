#![allow(dead_code)]

//! Closed-loop AEB reference, written without the simulator.

/// Independent integration: sensor sampled at 20 Hz with zero-order hold on
/// the brake, kinematics stepped at 1 ms.
pub struct Oracle {
    pub engage_time: Option<f64>,
    pub engage_gap: Option<f64>,
    pub final_gap: f64,
}

pub fn oracle(v0: f64, d0: f64) -> Oracle {
    let (dt, a_max, every) = (0.001, 8.0, 50);
    let (mut v, mut gap, mut brake) = (v0, d0, 0.0);
    let mut engage_time = None;
    let mut engage_gap = None;
    let mut step = 0u64;
    while v > 0.0 && gap > 0.0 {
        if step.is_multiple_of(every) {
            let ttc = if v > 0.0 { gap / v } else { f64::INFINITY };
            brake = if ttc < 1.0 {
                1.0
            } else if ttc < 2.0 {
                2.0 - ttc
            } else {
                0.0
            };
            if brake > 0.0 && engage_time.is_none() {
                engage_time = Some(step as f64 * dt);
                engage_gap = Some(gap);
            }
        }
        v = (v - brake * a_max * dt).max(0.0);
        if brake > 0.0 && v < 0.1 {
            v = 0.0;
        }
        gap -= v * dt;
        step += 1;
    }
    Oracle {
        engage_time,
        engage_gap,
        final_gap: gap,
    }
}
