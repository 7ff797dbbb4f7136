use rand::Rng as _;

use super::config::{Randomization, StateScale};
use crate::channel::{ChannelPair, Scenario, UncertaintyModel};
use crate::rng::rng_from;

/// Observation vector: re and im of `h_b`, then of `h_e` (row-major),
/// divided by the channel scale, followed by the three uncertainty sigmas
/// divided by their reference values.
pub fn make_state(nominal: &ChannelPair<f64>, u: &UncertaintyModel, scale: &StateScale) -> Vec<f64> {
    let mut s = Vec::with_capacity(2 * (nominal.h_b.re().len() + nominal.h_e.re().len()) + 3);
    for h in [&nominal.h_b, &nominal.h_e] {
        s.extend(h.re().iter().map(|x| x / scale.channel));
        s.extend(h.im().iter().map(|x| x / scale.channel));
    }
    s.push(u.position_sigma / scale.position_sigma);
    s.push(u.csi_error_sigma / scale.csi_error_sigma);
    s.push(u.aoa_sigma / scale.aoa_sigma);
    s
}

/// Moves the UAV and eavesdropper uniformly within the box around their
/// configured positions.
pub fn randomize_scenario(base: &Scenario, ranges: &Randomization, seed: u64) -> Scenario {
    let mut rng = rng_from(seed);
    let mut jitter = |p: [f64; 3]| {
        let mut out = p;
        for (k, v) in out.iter_mut().enumerate() {
            let half = if k < 2 { ranges.horizontal_m } else { ranges.vertical_m };
            if half > 0.0 {
                *v += rng.random_range(-half..=half);
            }
        }
        out
    };
    let mut s = base.clone();
    s.uav_position = jitter(base.uav_position);
    s.eve_position = jitter(base.eve_position);
    s
}
