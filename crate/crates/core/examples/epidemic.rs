//! Calibrates infectivity to a target R0 and simulates the baseline log.

use corn::episim::{calibrate_rho, simulate, Arm, SimConfig};
use corn::synth::{generate_facility, generate_mobility, FacilitySpec};

fn main() -> anyhow::Result<()> {
    let spec = FacilitySpec::ltcf_30();
    let g = generate_mobility(&generate_facility(&spec)?, &spec)?;
    let mut cfg = SimConfig {
        replicates: 200,
        seed: 7,
        ..SimConfig::default()
    };
    let cal = calibrate_rho(&g, 2.86, &cfg)?;
    println!(
        "rho {:.2e} gives R0 {:.2} [{:.2}, {:.2}]",
        cal.rho, cal.estimate.mean, cal.estimate.ci_low, cal.estimate.ci_high
    );
    cfg.disease.rho = cal.rho;
    let s = simulate(Arm::Baseline(&g), &cfg)?;
    let a = &s.aggregates;
    println!(
        "baseline: mean {:.2}, median {}, 90% range [{}, {}] of {} agents",
        a.mean_infections, a.median_infections, a.q05_infections, a.q95_infections, s.agents
    );
    Ok(())
}
