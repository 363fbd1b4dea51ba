//! Snapshot energy profiles: how a driving signal spreads the state
//! trajectory over singular directions.

use serde::Serialize;

use super::input_row;
use super::signals::{gen_signal, SignalSpec};
use crate::error::{EsnError, Result};
use crate::esn::{EchoStateNetwork, HyperParams};
use crate::pod::PodBasis;
use crate::reservoir::Reservoir;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyProfile {
    pub sigma: Vec<f64>,
    pub energy: Vec<f64>,
}

impl EnergyProfile {
    /// Sum of the `k` largest energy contributions.
    pub fn top_energy(&self, k: usize) -> f64 {
        self.energy.iter().take(k).sum()
    }
}

/// Drives a freshly generated network with `signal` from the zero state and
/// decomposes the states recorded after the first `washout` steps.
pub fn energy_profile(hyper: &HyperParams, signal: &SignalSpec, washout: usize) -> Result<EnergyProfile> {
    let esn = EchoStateNetwork::<f64>::generate(hyper)?;
    let u = gen_signal(signal)?;
    if washout >= u.len() {
        return Err(EsnError::InvalidArgument(format!(
            "washout {washout} leaves no snapshots from {} steps",
            u.len()
        )));
    }
    let states = esn.run_states(&input_row(&u), &esn.zero_state())?;
    let basis = PodBasis::from_snapshots(&states.columns_range(washout..).into_owned())?;
    Ok(EnergyProfile {
        sigma: basis.sigma.iter().copied().collect(),
        energy: basis.energy.iter().copied().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_input_concentrates_energy() {
        let hp = HyperParams::new(40, 1.0, 0.9, 2);
        let p = energy_profile(&hp, &SignalSpec::uniform(0.5, 0.5, 1000, 0), 200).unwrap();
        assert!(p.energy[0] > 0.99, "{}", p.energy[0]);
        assert!(p.sigma.windows(2).all(|w| w[0] >= w[1]));
        assert!((p.energy.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn white_noise_spreads_energy() {
        let hp = HyperParams::new(40, 1.0, 0.9, 2);
        let wn = energy_profile(&hp, &SignalSpec::white_noise(2000, 1), 0).unwrap();
        let ap = energy_profile(&hp, &SignalSpec::aprbs(200, -1.0, 1.0, 2000, 1), 0).unwrap();
        assert!(wn.top_energy(1) < ap.top_energy(1));
        assert_eq!(wn.top_energy(100), wn.top_energy(40));
        assert!(energy_profile(&hp, &SignalSpec::white_noise(10, 1), 10).is_err());
    }
}
