use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ExperimentConfig;
use crate::energy::max_bits_within;
use crate::error::Result;
use crate::init::BUDGET_MARGIN;
use crate::mission::MissionSpec;
use crate::scenario::{constant_velocity_path, sensor_uav_gain};

/// Drawn loads stay below this share of what the sensor can upload on the
/// straight path, so every scheme has a feasible start.
pub const LOAD_HEADROOM: f64 = 0.95;

/// Mission for `seed`: sensors uniform over the square area, loads a random
/// fraction of the UAV capacity. Explicit positions or loads in the
/// configuration replace the drawn ones; the random stream is consumed the
/// same way either way.
pub fn generate_mission(cfg: &ExperimentConfig, seed: u64) -> Result<MissionSpec> {
    let k_count = cfg.sensor_count;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = cfg.area_side_km;
    let drawn: Vec<(f64, f64)> = (0..k_count)
        .map(|_| (rng.random_range(0.0..=side), rng.random_range(0.0..=side)))
        .collect();
    let fractions: Vec<f64> = (0..k_count)
        .map(|_| rng.random_range(cfg.load_fraction_min..=cfg.load_fraction_max))
        .collect();

    let positions: Vec<(f64, f64)> = match (&cfg.sensor_x_km, &cfg.sensor_y_km) {
        (Some(xs), Some(ys)) => xs.iter().copied().zip(ys.iter().copied()).collect(),
        _ => drawn,
    };
    let sensors = positions.iter().map(|&(x, y)| cfg.sensor_template(x, y, 0.0)).collect();
    let mut mission = cfg.mission_with(sensors)?;

    match &cfg.input_mbit {
        Some(loads) => {
            for (s, &mbit) in mission.sensors.iter_mut().zip(loads) {
                s.input_bits = mbit * 1e6;
            }
        }
        None => {
            let limits = upload_limits(&mission)?;
            for k in 0..k_count {
                let want = fractions[k] * mission.uav_capacity_bits(k);
                mission.sensors[k].input_bits = want.min(LOAD_HEADROOM * limits[k]);
            }
        }
    }
    mission.validate()?;
    Ok(mission)
}

/// Bits each sensor can upload on the straight path within the budget,
/// counting only the frames every scenario allows for uplink.
pub fn upload_limits(mission: &MissionSpec) -> Result<Vec<f64>> {
    let path = constant_velocity_path(mission)?;
    let frames = mission.frame_count.saturating_sub(4);
    (0..mission.sensor_count())
        .map(|k| {
            let mut total = 0.0;
            for p in &path[..frames] {
                let g = sensor_uav_gain(mission, k + 1, p)?;
                total += max_bits_within(mission, g, mission.energy_budget_j) * (1.0 - BUDGET_MARGIN);
            }
            Ok(total)
        })
        .collect()
}
